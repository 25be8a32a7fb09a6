//! Discrete nonlocal averages of grid functions.
//!
//! Grid functions are reconstructed piecewise linearly between nodes. When
//! `x = 0` is a node the reconstruction may jump there: the cell ending at
//! `0` uses the left trace, the cell starting at `0` uses the stored value.
//! Averages over `[x_i, x_i + h]` are then integrated exactly cell by cell
//! with the precomputed kernel moments.

use crate::error::{Error, Result};
use crate::model::{KernelMoments, RoadCondition, VelocityModel, GAUSS_NODES, GAUSS_WEIGHTS};

#[derive(Debug, Clone, PartialEq)]
pub struct GridFunction {
    /// Abscissa of node 0.
    pub x0: f64,
    pub dx: f64,
    /// Nodal values; at `x = 0` this is the right value `Q(0+)`.
    pub values: Vec<f64>,
    /// `Q(0-)` when the function jumps at `x = 0`.
    pub left_trace_at_zero: Option<f64>,
    /// Value assumed beyond the last node.
    pub right_pad: Option<f64>,
}

fn check_density(what: &'static str, value: f64) -> Result<()> {
    if (0.0..=1.0).contains(&value) {
        Ok(())
    } else {
        Err(Error::Domain { what, value })
    }
}

impl GridFunction {
    pub fn new(x0: f64, dx: f64, values: Vec<f64>) -> Result<Self> {
        if !(dx > 0.0) || !dx.is_finite() {
            return Err(Error::Domain {
                what: "dx",
                value: dx,
            });
        }
        if values.is_empty() {
            return Err(Error::InvalidInput(
                "grid function needs at least one node".into(),
            ));
        }
        for &q in &values {
            check_density("grid value", q)?;
        }
        Ok(Self {
            x0,
            dx,
            values,
            left_trace_at_zero: None,
            right_pad: None,
        })
    }

    /// A constant function on `n` nodes starting at `x0`, padded with the
    /// same constant.
    pub fn constant(x0: f64, dx: f64, n: usize, c: f64) -> Result<Self> {
        Ok(Self::new(x0, dx, vec![c; n.max(1)])?.with_right_pad(c))
    }

    /// Attaches a left trace at `x = 0`, which must be a node.
    pub fn with_left_trace(mut self, trace: f64) -> Result<Self> {
        check_density("left trace", trace)?;
        if self.zero_index().is_none() {
            return Err(Error::InvalidInput(
                "x = 0 is not a node of the grid".into(),
            ));
        }
        self.left_trace_at_zero = Some(trace);
        Ok(self)
    }

    pub fn with_right_pad(mut self, pad: f64) -> Self {
        self.right_pad = Some(pad);
        self
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    #[inline]
    pub fn x(&self, i: usize) -> f64 {
        self.x0 + i as f64 * self.dx
    }

    pub fn x_end(&self) -> f64 {
        self.x(self.len() - 1)
    }

    /// Index of the node at `x = 0`, if there is one.
    pub fn zero_index(&self) -> Option<usize> {
        let j = (-self.x0 / self.dx).round();
        if j < 0.0 || j >= self.len() as f64 {
            return None;
        }
        ((self.x0 + j * self.dx).abs() <= 1e-9 * self.dx).then_some(j as usize)
    }

    /// Nearest node to `x` (clamped to the grid).
    pub fn index_of(&self, x: f64) -> usize {
        let j = ((x - self.x0) / self.dx).round().max(0.0) as usize;
        j.min(self.len() - 1)
    }

    /// Value at node `i` seen from the right; padded beyond the grid.
    #[inline]
    pub fn value(&self, i: usize) -> Result<f64> {
        match self.values.get(i) {
            Some(&q) => Ok(q),
            None => self.right_pad.ok_or(Error::WindowOutOfRange { index: i }),
        }
    }

    /// Value at node `i` seen from the left (the trace at `x = 0`).
    #[inline]
    pub fn left_value(&self, i: usize) -> Result<f64> {
        if let Some(t) = self.left_trace_at_zero {
            if Some(i) == self.zero_index() {
                return Ok(t);
            }
        }
        self.value(i)
    }

    /// Piecewise-linear reconstruction. At `x = 0` returns the right value;
    /// left of the grid the first value is extended.
    pub fn eval(&self, x: f64) -> f64 {
        let s = (x - self.x0) / self.dx;
        if s <= 0.0 {
            return self.values[0];
        }
        let last = self.len() - 1;
        if s >= last as f64 {
            return if s - last as f64 <= 1e-12 {
                self.values[last]
            } else {
                self.right_pad.unwrap_or(self.values[last])
            };
        }
        let i = s.floor() as usize;
        let t = s - i as f64;
        if t <= 1e-12 {
            return self.values[i];
        }
        let left = self.values[i];
        let right = self.left_value(i + 1).unwrap_or(self.values[i + 1]);
        left + (right - left) * t
    }

    /// Mean of the reconstruction over `[a, b]`, exact for the piecewise
    /// linear interpolant.
    pub fn interval_mean(&self, a: f64, b: f64) -> f64 {
        debug_assert!(b > a);
        let mut total = 0.0;
        let mut lo = a;
        while lo < b {
            let s = (lo - self.x0) / self.dx;
            // Next node strictly to the right of `lo`.
            let mut next = self.x0 + (s.floor() + 1.0) * self.dx;
            if next <= lo + 1e-12 * self.dx {
                next += self.dx;
            }
            let hi = next.min(b);
            let mid = 0.5 * (lo + hi);
            // Cell-interior evaluation avoids the ambiguity at jump nodes.
            let (fl, fr) = (self.eval_inside(lo, mid), self.eval_inside(hi, mid));
            total += 0.5 * (fl + fr) * (hi - lo);
            lo = hi;
        }
        total / (b - a)
    }

    /// Value at `x` taken as the limit from inside the cell containing `mid`.
    fn eval_inside(&self, x: f64, mid: f64) -> f64 {
        let s = (mid - self.x0) / self.dx;
        if s <= 0.0 || s >= (self.len() - 1) as f64 {
            return self.eval(mid);
        }
        let i = s.floor() as usize;
        let left = self.values[i];
        let right = self.left_value(i + 1).unwrap_or(self.values[i + 1]);
        let t = ((x - self.x(i)) / self.dx).clamp(0.0, 1.0);
        left + (right - left) * t
    }
}

/// `A(Q; x_i)` split as `Q_i * coef + rest`, so that marching can treat the
/// nodal value at `x_i` as the unknown.
pub(crate) fn density_window(q: &GridFunction, i: usize, m: &KernelMoments) -> Result<(f64, f64)> {
    let inv_dx = 1.0 / m.dx;
    let coef = m.omega[0] - m.mu[0] * inv_dx;
    let mut rest = q.left_value(i + 1)? * m.mu[0] * inv_dx;
    for k in 1..m.cells() {
        let left = q.value(i + k)?;
        let right = q.left_value(i + k + 1)?;
        rest += left * m.omega[k] + (right - left) * m.mu[k] * inv_dx;
    }
    Ok((coef, rest))
}

/// `A(Q; x_i) = int_0^h Q(x_i + s) w(s) ds` for the piecewise-linear
/// reconstruction of `q`.
pub fn average_density(q: &GridFunction, i: usize, m: &KernelMoments) -> Result<f64> {
    let (coef, rest) = density_window(q, i, m)?;
    Ok(q.value(i)? * coef + rest)
}

/// `d/dx A(Q; x)` at `x_i`, i.e. `-Q(x_i) w(0) - int_0^h Q(x_i + s) w'(s) ds`
/// (the `Q(x_i + h) w(h)` term vanishes).
pub fn average_derivative(q: &GridFunction, i: usize, m: &KernelMoments) -> Result<f64> {
    let inv_dx = 1.0 / m.dx;
    let mut integral = 0.0;
    for k in 0..m.cells() {
        let left = q.value(i + k)?;
        let right = q.left_value(i + k + 1)?;
        integral += left * m.domega[k] + (right - left) * m.dmu[k] * inv_dx;
    }
    Ok(-q.value(i)? * m.w0() - integral)
}

/// `int v(P(y)) w(y - x) dy` over one cell on which `P` runs linearly from
/// `left` to `right`, with its derivative with respect to `left`.
#[inline]
pub(crate) fn velocity_cell(
    gauss: &[f64; 4],
    left: f64,
    right: f64,
    v: &VelocityModel,
) -> (f64, f64) {
    let mut val = 0.0;
    let mut dleft = 0.0;
    for (g, xi) in gauss.iter().zip(GAUSS_NODES) {
        let p = left + (right - left) * xi;
        val += g * v.eval(p);
        dleft += g * v.deriv(p) * (1.0 - xi);
    }
    (val, dleft)
}

/// Gauss rule for `int_{s_a}^{s_b} v(P) w(s) ds` where `P` is linear in
/// `s` with values `p_a`, `p_b` at the ends.
fn velocity_piece(
    m: &KernelMoments,
    s_a: f64,
    s_b: f64,
    p_a: f64,
    p_b: f64,
    v: &VelocityModel,
) -> f64 {
    let len = s_b - s_a;
    GAUSS_NODES
        .iter()
        .zip(GAUSS_WEIGHTS)
        .map(|(xi, gw)| {
            let s = s_a + xi * len;
            gw * len * m.kernel.eval(s) * v.eval(p_a + (p_b - p_a) * xi)
        })
        .sum()
}

/// `V(x_i)` split into the contribution of the first cell, as a function of
/// the nodal value at `x_i`, and the rest of the window.
pub(crate) fn velocity_window_rest(
    p: &GridFunction,
    i: usize,
    m: &KernelMoments,
    cond: &RoadCondition,
    v: &VelocityModel,
) -> Result<f64> {
    let xi = p.x(i);
    let mut rest = 0.0;
    for k in 1..m.cells() {
        rest += velocity_cell_at(p, i, k, xi, m, cond, v)?;
    }
    Ok(rest)
}

fn velocity_cell_at(
    p: &GridFunction,
    i: usize,
    k: usize,
    xi: f64,
    m: &KernelMoments,
    cond: &RoadCondition,
    v: &VelocityModel,
) -> Result<f64> {
    let left = p.value(i + k)?;
    let right = p.left_value(i + k + 1)?;
    let dx = m.dx;
    let (ya, yb) = (xi + k as f64 * dx, xi + (k + 1) as f64 * dx);
    let eps = 1e-9 * dx;
    if ya < -eps && yb > eps {
        // The cell straddles the jump of kappa: split it at y = 0.
        let s_cut = -xi;
        let p_cut = left + (right - left) * (-ya / dx);
        let s_a = k as f64 * dx;
        let s_b = (k + 1) as f64 * dx;
        return Ok(
            cond.kappa_minus * velocity_piece(m, s_a, s_cut, left, p_cut, v)
                + cond.kappa_plus * velocity_piece(m, s_cut, s_b, p_cut, right, v),
        );
    }
    let kappa = cond.kappa(0.5 * (ya + yb));
    Ok(kappa * velocity_cell(&m.gauss[k], left, right, v).0)
}

/// `V(x_i) = int_{x_i}^{x_i + h} kappa(y) v(P(y)) w(y - x_i) dy`.
pub fn average_velocity_m2(
    p: &GridFunction,
    i: usize,
    m: &KernelMoments,
    cond: &RoadCondition,
    v: &VelocityModel,
) -> Result<f64> {
    let xi = p.x(i);
    let mut total = 0.0;
    for k in 0..m.cells() {
        total += velocity_cell_at(p, i, k, xi, m, cond, v)?;
    }
    Ok(total)
}
