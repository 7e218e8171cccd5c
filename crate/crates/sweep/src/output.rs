//! Sweep output files.
//!
//! A sweep directory holds
//!
//! - `grid.csv`: one row per Θ_r (ascending), one column per Θ_b (ascending);
//!   failed or masked cells are written as `nan`;
//! - `theta_b.csv`, `theta_r.csv`: the axes in units of π;
//! - `status.csv`: failed cells and their error messages;
//! - `provenance.toml`: the configuration and tool version;
//! - `plot_grid.py`: a plotting script template for the grid.

use std::f64::consts::PI;
use std::fs;
use std::io::Write;
use std::path::Path;

use crate::error::{Result, SweepError};
use crate::sweep::{CellStatus, SweepResult};

pub const TOOL_VERSION: &str = concat!("dichro ", env!("CARGO_PKG_VERSION"));

fn write_file(path: &Path, contents: &[u8]) -> Result<()> {
    fs::write(path, contents).map_err(|e| SweepError::io(path, e))
}

/// The grid as CSV text.
pub fn grid_csv(result: &SweepResult) -> String {
    let mut out = String::new();
    let spec = &result.spec;
    out.push_str(&format!("# observable: {}\n", spec.observable.name()));
    out.push_str("# rows: theta_r ascending (theta_r.csv); columns: theta_b ascending (theta_b.csv)\n");
    for row in &result.values {
        let line: Vec<String> =
            row.iter().map(|v| if v.is_nan() { "nan".into() } else { format!("{v:.10e}") }).collect();
        out.push_str(&line.join(","));
        out.push('\n');
    }
    out
}

fn axis_csv(name: &str, values: &[f64]) -> String {
    let mut out = format!("# {name} in units of pi\n{name}_pi\n");
    for v in values {
        out.push_str(&format!("{:.10}\n", v / PI));
    }
    out
}

const PLOT_TEMPLATE: &str = r##"# Plot template for a dichro sweep directory.
import sys
import numpy as np
import matplotlib.pyplot as plt

d = sys.argv[1] if len(sys.argv) > 1 else "."
grid = np.genfromtxt(f"{d}/grid.csv", delimiter=",", comments="#")
tb = np.loadtxt(f"{d}/theta_b.csv", delimiter=",", skiprows=2)
tr = np.loadtxt(f"{d}/theta_r.csv", delimiter=",", skiprows=2)
fig, ax = plt.subplots(figsize=(4.5, 4))
m = ax.pcolormesh(tb, tr, grid, shading="nearest", vmin=0, vmax=1, cmap="inferno")
ax.set_xlabel(r"$\Theta_b/\pi$")
ax.set_ylabel(r"$\Theta_r/\pi$")
fig.colorbar(m, label="__OBSERVABLE__")
fig.tight_layout()
fig.savefig(f"{d}/grid.png", dpi=150)
"##;

pub fn write_sweep(result: &SweepResult, dir: &Path) -> Result<()> {
    fs::create_dir_all(dir).map_err(|e| SweepError::io(dir, e))?;
    write_file(&dir.join("grid.csv"), grid_csv(result).as_bytes())?;
    write_file(&dir.join("theta_b.csv"), axis_csv("theta_b", &result.spec.theta_b.values()).as_bytes())?;
    write_file(&dir.join("theta_r.csv"), axis_csv("theta_r", &result.spec.theta_r.values()).as_bytes())?;

    let mut status = String::from("# failed cells; indices into theta_b.csv / theta_r.csv\nb,r,error\n");
    for (r, row) in result.status.iter().enumerate() {
        for (b, s) in row.iter().enumerate() {
            if let CellStatus::Failed(msg) = s {
                status.push_str(&format!("{b},{r},{}\n", msg.replace(',', ";")));
            }
        }
    }
    write_file(&dir.join("status.csv"), status.as_bytes())?;

    let mut prov = format!("# {TOOL_VERSION}\n");
    if let Some(p) = result.max_location {
        prov.push_str(&format!(
            "# grid maximum {:.6} at theta_b = {:.4} pi, theta_r = {:.4} pi\n",
            p.value,
            p.theta_b / PI,
            p.theta_r / PI
        ));
    }
    prov.push_str(&result.provenance);
    write_file(&dir.join("provenance.toml"), prov.as_bytes())?;

    let script = PLOT_TEMPLATE.replace("__OBSERVABLE__", result.spec.observable.name());
    write_file(&dir.join("plot_grid.py"), script.as_bytes())
}

/// Writes through a closure to `path`, mapping I/O errors.
pub fn write_with(path: &Path, f: impl FnOnce(&mut dyn Write) -> std::io::Result<()>) -> Result<()> {
    if let Some(parent) = path.parent().filter(|p| !p.as_os_str().is_empty()) {
        fs::create_dir_all(parent).map_err(|e| SweepError::io(parent, e))?;
    }
    let file = fs::File::create(path).map_err(|e| SweepError::io(path, e))?;
    let mut w = std::io::BufWriter::new(file);
    f(&mut w).and_then(|_| w.flush()).map_err(|e| SweepError::io(path, e))
}
