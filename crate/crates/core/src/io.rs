//! Plain-text persistence: profile CSV with `#` metadata lines and the
//! dynamics trajectory CSV.

use std::fmt::Write as _;
use std::fs;
use std::path::Path;

use crate::dynamics::{SymGrid, Trajectory};
use crate::error::{Error, Result};
use crate::vstate::VStateSolution;

/// A profile as read back from disk.
#[derive(Clone, Debug, PartialEq)]
pub struct ProfileFile {
    pub lambda: f64,
    pub n: usize,
    pub grading: f64,
    pub residual: f64,
    pub x: Vec<f64>,
    pub y: Vec<f64>,
}

impl ProfileFile {
    pub fn from_solution(sol: &VStateSolution) -> Self {
        let g = sol.grid();
        ProfileFile {
            lambda: sol.lambda,
            n: g.n(),
            grading: g.grading(),
            residual: sol.residual_sup,
            x: g.nodes().to_vec(),
            y: sol.y.clone(),
        }
    }

    pub fn to_csv(&self) -> String {
        let mut s = String::new();
        let _ = writeln!(s, "# lambda={:.16e}", self.lambda);
        let _ = writeln!(s, "# n={}", self.n);
        let _ = writeln!(s, "# grading={:.16e}", self.grading);
        let _ = writeln!(s, "# residual={:.16e}", self.residual);
        s.push_str("x,y\n");
        for (x, y) in self.x.iter().zip(&self.y) {
            let _ = writeln!(s, "{x:.16e},{y:.16e}");
        }
        s
    }

    pub fn parse(text: &str) -> Result<Self> {
        let meta = |key: &str| -> Option<String> {
            text.lines()
                .filter_map(|l| l.strip_prefix('#'))
                .filter_map(|l| l.trim().split_once('='))
                .find(|(k, _)| k.trim() == key)
                .map(|(_, v)| v.trim().to_string())
        };
        let num = |v: Option<String>, key: &str| -> Result<f64> {
            let v = v.ok_or_else(|| Error::Parse { line: 0, msg: format!("missing header `{key}`") })?;
            v.parse().map_err(|_| Error::Parse { line: 0, msg: format!("bad value for `{key}`: {v}") })
        };
        let lambda = num(meta("lambda"), "lambda")?;
        let n = num(meta("n"), "n")? as usize;
        let grading = num(meta("grading"), "grading")?;
        let residual = num(meta("residual"), "residual")?;
        let (mut x, mut y) = (Vec::new(), Vec::new());
        for (k, line) in text.lines().enumerate() {
            let line = line.trim();
            if line.is_empty() || line.starts_with('#') || line == "x,y" {
                continue;
            }
            let bad = |msg: String| Error::Parse { line: k + 1, msg };
            let (a, b) = line.split_once(',').ok_or_else(|| bad(format!("expected `x,y`, got `{line}`")))?;
            x.push(a.trim().parse().map_err(|_| bad(format!("bad number `{a}`")))?);
            y.push(b.trim().parse().map_err(|_| bad(format!("bad number `{b}`")))?);
        }
        if x.len() != n + 1 {
            return Err(Error::Parse { line: text.lines().count(), msg: format!("expected {} rows, found {}", n + 1, x.len()) });
        }
        Ok(ProfileFile { lambda, n, grading, residual, x, y })
    }
}

pub fn write_profile(sol: &VStateSolution, path: &Path) -> Result<()> {
    fs::write(path, ProfileFile::from_solution(sol).to_csv())?;
    Ok(())
}

pub fn read_profile(path: &Path) -> Result<ProfileFile> {
    ProfileFile::parse(&fs::read_to_string(path)?)
}

/// Writes `t,dist,odd_part,snapshot` rows to `path` and each snapshot as
/// `x,mu` rows into `snapshot_dir/snapshot_KKKK.csv`; the snapshot column
/// holds the file name or is empty.
pub fn write_trajectory(tr: &Trajectory, grid: &SymGrid, path: &Path, snapshot_dir: Option<&Path>) -> Result<Vec<String>> {
    let mut names = Vec::new();
    if let Some(dir) = snapshot_dir {
        fs::create_dir_all(dir)?;
        for (k, (t, mu)) in tr.snapshots.iter().enumerate() {
            let name = format!("snapshot_{k:04}.csv");
            let mut s = format!("# t={t:.16e}\nx,mu\n");
            for (x, m) in grid.nodes.iter().zip(mu) {
                let _ = writeln!(s, "{x:.16e},{m:.16e}");
            }
            fs::write(dir.join(&name), s)?;
            names.push(name);
        }
    }
    let mut s = String::from("t,dist,odd_part,snapshot\n");
    for smp in &tr.samples {
        let snap = match (snapshot_dir, smp.snapshot) {
            (Some(_), Some(k)) => names[k].as_str(),
            _ => "",
        };
        let _ = writeln!(s, "{:.16e},{:.16e},{:.16e},{snap}", smp.t, smp.dist, smp.odd_part);
    }
    fs::write(path, s)?;
    Ok(names)
}

/// Reads back the `t,dist` columns of a trajectory file.
pub fn read_trajectory(path: &Path) -> Result<Vec<(f64, f64)>> {
    let text = fs::read_to_string(path)?;
    let mut out = Vec::new();
    for (k, line) in text.lines().enumerate().skip(1) {
        let bad = |msg: String| Error::Parse { line: k + 1, msg };
        let mut it = line.split(',');
        let t = it.next().unwrap_or("");
        let d = it.next().ok_or_else(|| bad("missing dist column".into()))?;
        out.push((t.parse().map_err(|_| bad(format!("bad t `{t}`")))?, d.parse().map_err(|_| bad(format!("bad dist `{d}`")))?));
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn parse_errors_carry_line_numbers() {
        let text = "# lambda=0.01\n# n=2\n# grading=2\n# residual=1e-12\nx,y\n0,0.01\n0.25,oops\n1,1\n";
        match ProfileFile::parse(text) {
            Err(Error::Parse { line, .. }) => assert_eq!(line, 7),
            other => panic!("{other:?}"),
        }
        assert!(matches!(ProfileFile::parse("x,y\n0,1\n"), Err(Error::Parse { .. })));
    }

    #[test]
    fn text_round_trip() {
        let p = ProfileFile {
            lambda: 0.1 / 3.0,
            n: 2,
            grading: 2.0,
            residual: 1.0e-13 / 7.0,
            x: vec![0.0, 0.25, 1.0],
            y: vec![0.1 / 3.0, 1.0 / 3.0, std::f64::consts::E],
        };
        assert_eq!(ProfileFile::parse(&p.to_csv()).unwrap(), p);
    }
}
