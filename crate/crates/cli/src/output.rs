//! Artifact emission with a content-hash manifest.

use std::fs;
use std::path::{Path, PathBuf};

use anyhow::{Context, Result};
use nspike_core::solver::SpikeSolution;
use serde::Serialize;
use sha2::{Digest, Sha256};

#[derive(Debug, Clone, Serialize)]
pub struct FileRecord {
    pub name: String,
    pub bytes: usize,
    pub sha256: String,
}

#[derive(Debug)]
pub struct Artifacts {
    dir: PathBuf,
    files: Vec<FileRecord>,
}

impl Artifacts {
    pub fn create(dir: &Path) -> Result<Self> {
        fs::create_dir_all(dir).with_context(|| format!("creating output directory {}", dir.display()))?;
        Ok(Self {
            dir: dir.to_path_buf(),
            files: Vec::new(),
        })
    }

    pub fn dir(&self) -> &Path {
        &self.dir
    }

    pub fn files(&self) -> &[FileRecord] {
        &self.files
    }

    pub fn write(&mut self, name: &str, data: &[u8]) -> Result<()> {
        let path = self.dir.join(name);
        fs::write(&path, data).with_context(|| format!("writing {}", path.display()))?;
        self.files.retain(|f| f.name != name);
        self.files.push(FileRecord {
            name: name.into(),
            bytes: data.len(),
            sha256: hex::encode(Sha256::digest(data)),
        });
        Ok(())
    }

    pub fn write_json<T: Serialize>(&mut self, name: &str, value: &T) -> Result<()> {
        let mut text = serde_json::to_string_pretty(value)?;
        text.push('\n');
        self.write(name, text.as_bytes())
    }

    /// Writes a file that is not listed in the manifest (the manifest itself).
    pub fn write_unlisted(&self, name: &str, data: &[u8]) -> Result<()> {
        let path = self.dir.join(name);
        fs::write(&path, data).with_context(|| format!("writing {}", path.display()))
    }
}

pub fn mu_tag(mu: f64) -> String {
    format!("{mu}")
}

/// Rescaled coordinates `y`, physical coordinates `x = T₀ y`, then `U`.
pub fn profile_csv(sol: &SpikeSolution) -> Vec<u8> {
    let field = &sol.u_phys;
    let grid = field.grid();
    let dim = grid.dim();
    let k = field.components();
    let axes = ["0", "1", "2"];
    let mut header: Vec<String> = axes[..dim].iter().map(|a| format!("y{a}")).collect();
    header.extend(axes[..dim].iter().map(|a| format!("x{a}")));
    header.extend((0..k).map(|c| format!("u{c}")));
    let mut out = header.join(",");
    out.push('\n');
    for q in 0..grid.node_count() {
        let y = grid.node(q);
        let x = sol.physical_node(q);
        let mut row: Vec<String> = y[..dim].iter().map(|v| format!("{v:.12e}")).collect();
        row.extend(x.iter().map(|v| format!("{v:.12e}")));
        row.extend((0..k).map(|c| format!("{:.15e}", field.component(c)[q])));
        out.push_str(&row.join(","));
        out.push('\n');
    }
    out.into_bytes()
}

/// A gnuplot script over whatever data files were emitted.
pub fn gnuplot_script(files: &[FileRecord], dim: usize) -> Vec<u8> {
    let mut s = String::from("# gnuplot script; run with: gnuplot -p plots.gp\nset datafile separator ','\nset key autotitle columnhead\n");
    for f in files.iter().filter(|f| f.name.starts_with("profile_mu_")) {
        if dim == 1 {
            s.push_str(&format!(
                "set title '{0}'\nset xlabel 'x'\nplot '{0}' using 2:3 with lines\npause -1\n",
                f.name
            ));
        } else {
            s.push_str(&format!(
                "set title '{0}'\nset view map\nsplot '{0}' using {1}:{2}:{3} with points palette pt 5 ps 0.3\npause -1\n",
                f.name,
                dim + 1,
                dim + 2,
                2 * dim + 1
            ));
        }
    }
    for f in files.iter().filter(|f| f.name.starts_with("tail_mu_")) {
        s.push_str(&format!(
            "set title '{0}'\nset logscale y\nset xlabel '|x|'\nplot '{0}' using 1:2 with lines\nunset logscale y\npause -1\n",
            f.name
        ));
    }
    if files.iter().any(|f| f.name == "diagnostics.csv") {
        s.push_str(
            "set title 'diagnostics'\nset logscale xy\nset xlabel 'mu'\nplot 'diagnostics.csv' using 1:3 with linespoints title 'amplitude', '' using 1:4 with linespoints title '|w|'\nunset logscale xy\npause -1\n",
        );
    }
    if files.iter().any(|f| f.name == "periodic.csv") {
        s.push_str(
            "set title 'periodic increments'\nset logscale y\nset xlabel 'L0'\nplot 'periodic.csv' using 1:5 with linespoints\nunset logscale y\npause -1\n",
        );
    }
    s.into_bytes()
}
