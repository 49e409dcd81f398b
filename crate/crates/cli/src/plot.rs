//! Small matplotlib scripts that redraw the figures from the written CSVs.

use std::fs;
use std::path::Path;

const HEAD: &str = "import csv, sys\nimport matplotlib\nmatplotlib.use(\"Agg\")\nimport matplotlib.pyplot as plt\n\n\
def rows(path):\n    with open(path) as f:\n        lines = [l for l in f if not l.startswith(\"#\")]\n    return list(csv.DictReader(lines))\n\n";

pub fn profile(out_dir: &Path, csv: &str, lambda: f64) -> std::io::Result<String> {
    let name = "plot_profile.py";
    let body = format!(
        "{HEAD}r = rows(\"{csv}\")\nx = [float(a[\"x\"]) for a in r]\ny = [float(a[\"y\"]) for a in r]\n\
fig, ax = plt.subplots(1, 2, figsize=(10, 4))\n\
for a, lim in zip(ax, (1.0, 10 * {lambda:e})):\n    a.plot(x + [-v for v in x], y + y, \".\", ms=2, label=\"y(x)\")\n    a.plot([-lim, 0, lim], [lim, 0, lim], \"k--\", lw=0.8, label=\"|x|\")\n    a.set_xlim(-lim, lim)\n    a.set_ylim(0, lim)\n    a.set_xlabel(\"x\")\n    a.legend()\n\
ax[0].set_title(\"lambda = {lambda:e}\")\nfig.tight_layout()\nfig.savefig(\"profile.png\", dpi=150)\n"
    );
    fs::write(out_dir.join(name), body)?;
    Ok(name.into())
}

pub fn trajectory(out_dir: &Path, csv: &str) -> std::io::Result<String> {
    let name = "plot_trajectory.py";
    let body = format!(
        "{HEAD}r = rows(\"{csv}\")\nt = [float(a[\"t\"]) for a in r]\nd = [float(a[\"dist\"]) for a in r]\n\
fig, ax = plt.subplots(figsize=(6, 4))\nax.plot(t, d)\nax.set_xlabel(\"t\")\nax.set_ylabel(\"dist to |x|\")\n\
fig.tight_layout()\nfig.savefig(\"trajectory.png\", dpi=150)\n"
    );
    fs::write(out_dir.join(name), body)?;
    Ok(name.into())
}

pub fn coefficients(out_dir: &Path, csv: &str) -> std::io::Result<String> {
    let name = "plot_coefficients.py";
    let body = format!(
        "{HEAD}r = rows(\"{csv}\")\nx = [float(a[\"x\"]) for a in r]\n\
fig, ax = plt.subplots(figsize=(6, 4))\n\
for key in (\"a1\", \"x_a2\", \"b2\"):\n    ax.semilogx(x, [float(a[key]) for a in r], label=key)\n\
ax.set_xlabel(\"x\")\nax.legend()\nfig.tight_layout()\nfig.savefig(\"coefficients.png\", dpi=150)\n"
    );
    fs::write(out_dir.join(name), body)?;
    Ok(name.into())
}
