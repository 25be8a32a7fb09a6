//! Artifact writers: CSV files, gnuplot scripts and the run manifest.
//!
//! Numbers are written with the shortest representation that reads back
//! to the same `f64`, so identical runs give byte-identical files.

use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};

use roughroad::{KinkReport, Profile, SimState};
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::error::{CliError, Result};

pub const MANIFEST: &str = "manifest.json";

pub fn profile_csv(p: &Profile, kink: Option<&KinkReport>) -> String {
    let case = p
        .case
        .map(|c| c.label.to_string())
        .unwrap_or_else(|| "homogeneous".into());
    let mut s = String::new();
    let _ = writeln!(s, "# model,fbar,case,trace_minus,trace_plus");
    let _ = writeln!(
        s,
        "# {},{},{},{},{}",
        p.model, p.fbar, case, p.trace_minus, p.trace_plus
    );
    if let Some(k) = kink {
        let _ = writeln!(
            s,
            "# kink left_slope={} right_slope={} predicted_jump={} observed_jump={} relative_error={}",
            k.left_slope, k.right_slope, k.predicted_jump, k.observed_jump, k.relative_error
        );
    }
    let _ = writeln!(s, "# x,Q");
    for (x, q) in p.samples() {
        let _ = writeln!(s, "{x},{q}");
    }
    s
}

pub fn snapshot_csv(model: roughroad::Model, state: &SimState) -> String {
    let mut s = String::new();
    let _ = writeln!(s, "# model,scheme,t,dx,interface_index,rho_minus,rho_plus");
    let _ = writeln!(
        s,
        "# {},{},{},{},{},{},{}",
        model,
        state.scheme,
        state.t,
        state.dx,
        state.interface_index,
        state.left_farfield,
        state.right_farfield
    );
    let _ = writeln!(s, "# x,rho");
    for (j, r) in state.cells.iter().enumerate() {
        let _ = writeln!(s, "{},{r}", state.center(j));
    }
    s
}

/// Writes files below one root and remembers them for the manifest.
#[derive(Debug)]
pub struct ArtifactSink {
    root: PathBuf,
    written: Vec<PathBuf>,
}

impl ArtifactSink {
    pub fn new(root: impl Into<PathBuf>) -> Result<Self> {
        let root = root.into();
        fs::create_dir_all(&root).map_err(|e| CliError::io(&root, e))?;
        Ok(Self {
            root,
            written: Vec::new(),
        })
    }

    pub fn root(&self) -> &Path {
        &self.root
    }

    /// Writes `contents` to `rel` (relative to the root) and returns the full path.
    pub fn write(&mut self, rel: impl AsRef<Path>, contents: &str) -> Result<PathBuf> {
        let rel = rel.as_ref();
        let path = self.root.join(rel);
        if let Some(dir) = path.parent() {
            fs::create_dir_all(dir).map_err(|e| CliError::io(dir, e))?;
        }
        fs::write(&path, contents).map_err(|e| CliError::io(&path, e))?;
        self.written.push(rel.to_path_buf());
        Ok(path)
    }

    pub fn absorb(&mut self, other: ArtifactSink) {
        let prefix = other
            .root
            .strip_prefix(&self.root)
            .map(Path::to_path_buf)
            .unwrap_or_default();
        self.written
            .extend(other.written.into_iter().map(|p| prefix.join(p)));
    }

    pub fn written(&self) -> &[PathBuf] {
        &self.written
    }

    /// Writes `manifest.json` covering every file written so far.
    pub fn finish(self, command: &str) -> Result<Manifest> {
        let mut artifacts = self
            .written
            .iter()
            .map(|rel| Artifact::describe(&self.root, rel))
            .collect::<Result<Vec<_>>>()?;
        artifacts.sort_by(|a, b| a.path.cmp(&b.path));
        artifacts.dedup_by(|a, b| a.path == b.path);
        let manifest = Manifest {
            command: command.to_string(),
            artifacts,
        };
        let path = self.root.join(MANIFEST);
        let text = serde_json::to_string_pretty(&manifest).expect("manifest is plain data") + "\n";
        fs::write(&path, text).map_err(|e| CliError::io(&path, e))?;
        Ok(manifest)
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Artifact {
    /// Relative to the output root, `/`-separated.
    pub path: String,
    pub bytes: u64,
    pub sha256: String,
}

fn hex(bytes: &[u8]) -> String {
    bytes.iter().map(|b| format!("{b:02x}")).collect()
}

impl Artifact {
    fn describe(root: &Path, rel: &Path) -> Result<Self> {
        let full = root.join(rel);
        let data = fs::read(&full).map_err(|e| CliError::io(&full, e))?;
        Ok(Self {
            path: rel_string(rel),
            bytes: data.len() as u64,
            sha256: hex(&Sha256::digest(&data)),
        })
    }
}

fn rel_string(rel: &Path) -> String {
    rel.components()
        .map(|c| c.as_os_str().to_string_lossy())
        .collect::<Vec<_>>()
        .join("/")
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Manifest {
    pub command: String,
    pub artifacts: Vec<Artifact>,
}

impl Manifest {
    pub fn read(root: &Path) -> Result<Self> {
        let path = root.join(MANIFEST);
        let text = fs::read_to_string(&path).map_err(|e| CliError::io(&path, e))?;
        serde_json::from_str(&text)
            .map_err(|e| CliError::Manifest(format!("{}: {e}", path.display())))
    }

    /// Checks that every listed file exists with the recorded size and
    /// digest, and that no unlisted file sits below `root`.
    pub fn validate(&self, root: &Path) -> Result<()> {
        for a in &self.artifacts {
            let now = Artifact::describe(root, Path::new(&a.path))
                .map_err(|_| CliError::Manifest(format!("{} is missing", a.path)))?;
            if now != *a {
                return Err(CliError::Manifest(format!(
                    "{} changed since it was recorded",
                    a.path
                )));
            }
        }
        let mut on_disk = Vec::new();
        list_files(root, Path::new(""), &mut on_disk)?;
        for rel in on_disk {
            if rel != MANIFEST && !self.artifacts.iter().any(|a| a.path == rel) {
                return Err(CliError::Manifest(format!("{rel} is not listed")));
            }
        }
        Ok(())
    }
}

fn list_files(root: &Path, rel: &Path, out: &mut Vec<String>) -> Result<()> {
    let dir = root.join(rel);
    let entries = fs::read_dir(&dir).map_err(|e| CliError::io(&dir, e))?;
    for entry in entries {
        let entry = entry.map_err(|e| CliError::io(&dir, e))?;
        let child = rel.join(entry.file_name());
        if entry.path().is_dir() {
            list_files(root, &child, out)?;
        } else {
            out.push(rel_string(&child));
        }
    }
    Ok(())
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum PlotStyle {
    /// `x` against `Q`, each branch of a jump drawn separately, with a
    /// marker at `x = 0`.
    Profiles,
    /// Density snapshots overlaid, labelled by time.
    Snapshots,
}

/// Data-row indices of the first and last rows at `x = 0`.
fn zero_rows(csv: &str) -> Option<(usize, usize)> {
    let mut rows = csv
        .lines()
        .filter(|l| !l.starts_with('#') && !l.trim().is_empty());
    let xs: Vec<f64> = rows
        .by_ref()
        .filter_map(|l| l.split(',').next().and_then(|x| x.parse().ok()))
        .collect();
    let first = xs.iter().position(|&x| x == 0.0)?;
    let last = xs.iter().rposition(|&x| x == 0.0)?;
    Some((first, last))
}

fn comment_field(csv: &str, header: &str, name: &str) -> Option<String> {
    let mut lines = csv.lines();
    while let Some(line) = lines.next() {
        if line.trim_start_matches("# ") == header {
            let values = lines.next()?.trim_start_matches("# ");
            let idx = header.split(',').position(|h| h == name)?;
            return values.split(',').nth(idx).map(str::to_string);
        }
    }
    None
}

/// Writes a gnuplot script drawing `data` (paths relative to the script's
/// directory are used where possible) and registers it with `sink`.
pub fn emit_plot_script(
    sink: &mut ArtifactSink,
    rel_script: &str,
    data: &[PathBuf],
    style: PlotStyle,
    title: &str,
) -> Result<PathBuf> {
    if data.is_empty() {
        return Err(CliError::config("plot", "no artifacts to plot"));
    }
    let script_dir = sink
        .root()
        .join(rel_script)
        .parent()
        .map(Path::to_path_buf)
        .unwrap_or_default();
    let mut s = String::new();
    let _ = writeln!(s, "set datafile separator ','");
    let _ = writeln!(s, "set datafile commentschars '#'");
    let _ = writeln!(s, "set title '{title}'");
    let _ = writeln!(s, "set xlabel 'x'");
    match style {
        PlotStyle::Profiles => {
            let _ = writeln!(s, "set ylabel 'Q'");
            let _ = writeln!(
                s,
                "set arrow from 0, graph 0 to 0, graph 1 nohead dashtype 2"
            );
        }
        PlotStyle::Snapshots => {
            let _ = writeln!(s, "set ylabel 'rho'");
            let _ = writeln!(s, "set key outside right");
        }
    }
    let mut curves = Vec::new();
    for (k, path) in data.iter().enumerate() {
        let csv = fs::read_to_string(path).map_err(|e| CliError::io(path, e))?;
        let name = path
            .strip_prefix(&script_dir)
            .unwrap_or(path)
            .display()
            .to_string();
        match style {
            PlotStyle::Profiles => {
                let label =
                    comment_field(&csv, "model,fbar,case,trace_minus,trace_plus", "trace_plus")
                        .map(|t| format!("Q(0+) = {t}"))
                        .unwrap_or_else(|| name.clone());
                match zero_rows(&csv) {
                    Some((first, last)) => {
                        curves.push(format!(
                            "'{name}' every ::0::{first} using 1:2 with lines linecolor {c} title '{label}'",
                            c = k + 1
                        ));
                        curves.push(format!(
                            "'{name}' every ::{last} using 1:2 with lines linecolor {c} notitle",
                            c = k + 1
                        ));
                    }
                    None => curves.push(format!("'{name}' using 1:2 with lines title '{label}'")),
                }
            }
            PlotStyle::Snapshots => {
                let label = comment_field(
                    &csv,
                    "model,scheme,t,dx,interface_index,rho_minus,rho_plus",
                    "t",
                )
                .map(|t| format!("t = {t}"))
                .unwrap_or_else(|| name.clone());
                curves.push(format!("'{name}' using 1:2 with lines title '{label}'"));
            }
        }
    }
    let _ = writeln!(s, "plot \\\n    {}", curves.join(", \\\n    "));
    sink.write(rel_script, &s)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn zero_rows_of_a_jump() {
        let csv = "# x,Q\n-0.1,0.2\n0,0.25\n0,0.5\n0.1,0.6\n";
        assert_eq!(zero_rows(csv), Some((1, 2)));
        assert_eq!(zero_rows("# x,Q\n-0.1,0.2\n0.1,0.3\n"), None);
    }

    #[test]
    fn manifest_catches_tampering() {
        let dir = tempfile::tempdir().unwrap();
        let mut sink = ArtifactSink::new(dir.path()).unwrap();
        sink.write("a/b.csv", "1,2\n").unwrap();
        sink.write("c.txt", "x\n").unwrap();
        let m = sink.finish("test").unwrap();
        assert_eq!(m.artifacts.len(), 2);
        assert_eq!(m.artifacts[0].path, "a/b.csv");
        Manifest::read(dir.path())
            .unwrap()
            .validate(dir.path())
            .unwrap();
        fs::write(dir.path().join("c.txt"), "y\n").unwrap();
        assert!(m.validate(dir.path()).is_err());
        fs::write(dir.path().join("c.txt"), "x\n").unwrap();
        fs::write(dir.path().join("extra"), "").unwrap();
        assert!(m.validate(dir.path()).is_err());
    }

    #[test]
    fn empty_plot_is_an_error() {
        let dir = tempfile::tempdir().unwrap();
        let mut sink = ArtifactSink::new(dir.path()).unwrap();
        assert!(emit_plot_script(&mut sink, "p.gp", &[], PlotStyle::Profiles, "none").is_err());
        let missing = [dir.path().join("nope.csv")];
        assert!(
            emit_plot_script(&mut sink, "p.gp", &missing, PlotStyle::Profiles, "none").is_err()
        );
    }
}
