use std::fmt;
use std::str::FromStr;

use crate::error::{Error, Result};

/// Shapes of look-ahead weights supported in closed form. Both are
/// non-negative, strictly decreasing on `(0, h)`, vanish at `h` and have
/// unit mass.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum KernelShape {
    /// `w(s) = 2 (h - s) / h^2`.
    Linear,
    /// `w(s) = 3 (h - s)^2 / h^3`.
    Quadratic,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Kernel {
    shape: KernelShape,
    h: f64,
}

/// 4-point Gauss-Legendre nodes and weights on `[0, 1]`.
pub(crate) const GAUSS_NODES: [f64; 4] = [
    0.5 - 0.5 * 0.861_136_311_594_052_6,
    0.5 - 0.5 * 0.339_981_043_584_856_3,
    0.5 + 0.5 * 0.339_981_043_584_856_3,
    0.5 + 0.5 * 0.861_136_311_594_052_6,
];
pub(crate) const GAUSS_WEIGHTS: [f64; 4] = [
    0.5 * 0.347_854_845_137_453_9,
    0.5 * 0.652_145_154_862_546_1,
    0.5 * 0.652_145_154_862_546_1,
    0.5 * 0.347_854_845_137_453_9,
];

impl Kernel {
    pub fn new(shape: KernelShape, h: f64) -> Result<Self> {
        if !(h > 0.0) || !h.is_finite() {
            return Err(Error::InvalidKernel(format!(
                "horizon must be positive, got {h}"
            )));
        }
        Ok(Self { shape, h })
    }

    pub fn linear(h: f64) -> Result<Self> {
        Self::new(KernelShape::Linear, h)
    }

    pub fn shape(&self) -> KernelShape {
        self.shape
    }

    pub fn h(&self) -> f64 {
        self.h
    }

    pub fn eval(&self, s: f64) -> f64 {
        if !(0.0..=self.h).contains(&s) {
            return 0.0;
        }
        let (h, c) = (self.h, self.h - s);
        match self.shape {
            KernelShape::Linear => 2.0 * c / (h * h),
            KernelShape::Quadratic => 3.0 * c * c / (h * h * h),
        }
    }

    /// `w'(s)` on `(0, h)`, zero outside.
    pub fn deriv(&self, s: f64) -> f64 {
        if !(0.0..self.h).contains(&s) {
            return 0.0;
        }
        let (h, c) = (self.h, self.h - s);
        match self.shape {
            KernelShape::Linear => -2.0 / (h * h),
            KernelShape::Quadratic => -6.0 * c / (h * h * h),
        }
    }

    /// `int_a^{a+len} w(s) ds` and `int_a^{a+len} (s - a) w(s) ds` for a
    /// sub-interval of `[0, h]`.
    pub fn interval_moments(&self, a: f64, len: f64) -> (f64, f64) {
        let h = self.h;
        let c = h - a;
        match self.shape {
            KernelShape::Linear => {
                let s = 2.0 / (h * h);
                (
                    s * (c * len - 0.5 * len * len),
                    s * (0.5 * c * len * len - len * len * len / 3.0),
                )
            }
            KernelShape::Quadratic => {
                let s = 3.0 / (h * h * h);
                let (l2, l3) = (len * len, len * len * len);
                (
                    s * (c * c * len - c * l2 + l3 / 3.0),
                    s * (0.5 * c * c * l2 - 2.0 * c * l3 / 3.0 + 0.25 * l3 * len),
                )
            }
        }
    }

    /// Number of cells of width `dx` covering `[0, h]`; `h / dx` must be an
    /// integer.
    pub fn cells_per_horizon(&self, dx: f64) -> Result<usize> {
        if !(dx > 0.0) || !dx.is_finite() {
            return Err(Error::Domain {
                what: "dx",
                value: dx,
            });
        }
        let ratio = self.h / dx;
        let n = ratio.round();
        if n < 1.0 || (ratio - n).abs() > 1e-9 * ratio.max(1.0) {
            return Err(Error::GridMismatch { h: self.h, dx });
        }
        Ok(n as usize)
    }

    pub fn cell_moments(&self, dx: f64) -> Result<KernelMoments> {
        let n = self.cells_per_horizon(dx)?;
        let mut omega = Vec::with_capacity(n);
        let mut mu = Vec::with_capacity(n);
        let mut domega = Vec::with_capacity(n);
        let mut dmu = Vec::with_capacity(n);
        let mut gauss = Vec::with_capacity(n);
        for k in 0..n {
            let a = k as f64 * dx;
            let (w0, w1) = self.interval_moments(a, dx);
            omega.push(w0);
            mu.push(w1);
            let wb = if k + 1 == n { 0.0 } else { self.eval(a + dx) };
            domega.push(wb - self.eval(a));
            dmu.push(dx * wb - w0);
            let mut g = [0.0; 4];
            for (q, (xi, gw)) in GAUSS_NODES.iter().zip(GAUSS_WEIGHTS).enumerate() {
                g[q] = gw * dx * self.eval(a + xi * dx);
            }
            gauss.push(g);
        }
        Ok(KernelMoments {
            kernel: *self,
            dx,
            omega,
            mu,
            domega,
            dmu,
            gauss,
        })
    }
}

impl fmt::Display for KernelShape {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            KernelShape::Linear => "linear",
            KernelShape::Quadratic => "quadratic",
        })
    }
}

impl FromStr for KernelShape {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim() {
            "linear" => Ok(KernelShape::Linear),
            "quadratic" => Ok(KernelShape::Quadratic),
            other => Err(Error::InvalidKernel(format!("unknown kernel `{other}`"))),
        }
    }
}

/// Per-cell integrals of the kernel on a grid of spacing `dx`; cell `k`
/// covers `[k dx, (k+1) dx]`.
#[derive(Debug, Clone, PartialEq)]
pub struct KernelMoments {
    pub kernel: Kernel,
    pub dx: f64,
    /// Zeroth moments of `w`.
    pub omega: Vec<f64>,
    /// First moments of `w` about the left cell edge.
    pub mu: Vec<f64>,
    /// Zeroth moments of `w'`.
    pub domega: Vec<f64>,
    /// First moments of `w'` about the left cell edge.
    pub dmu: Vec<f64>,
    /// Gauss weights multiplied by `w` at the Gauss nodes of each cell.
    pub gauss: Vec<[f64; 4]>,
}

impl KernelMoments {
    pub fn cells(&self) -> usize {
        self.omega.len()
    }

    pub fn h(&self) -> f64 {
        self.kernel.h
    }

    pub fn w0(&self) -> f64 {
        self.kernel.eval(0.0)
    }
}
