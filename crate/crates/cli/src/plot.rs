//! Tidy, plot-ready CSVs from a finished run directory.

use std::path::{Path, PathBuf};

use anyhow::{bail, Context, Result};
use pileup::bounds::quantile_init;
use pileup::continuum::{GridDensity, GridSpec};
use serde::Deserialize;

use crate::output::{num, read_csv, write_csv};
use crate::run::{density_file, positions_file};

#[derive(Deserialize)]
struct ManifestView {
    mode: String,
    config: ConfigView,
    instances: Vec<InstanceView>,
}

#[derive(Deserialize)]
struct ConfigView {
    grid: GridSpec,
}

#[derive(Deserialize)]
struct InstanceView {
    key: String,
    n: usize,
    alpha: Option<f64>,
    status: String,
}

fn parse(s: &str, file: &Path) -> Result<f64> {
    s.parse().with_context(|| format!("bad number `{s}` in {}", file.display()))
}

fn load_density(path: &Path, grid: GridSpec) -> Result<GridDensity> {
    let (_, rows) = read_csv(path)?;
    if rows.len() != grid.m {
        bail!("{} has {} rows, grid has {} cells", path.display(), rows.len(), grid.m);
    }
    let h = grid.h();
    let masses = rows.iter().map(|r| parse(&r[1], path).map(|d| d * h)).collect::<Result<Vec<f64>>>()?;
    GridDensity::new(grid, masses).map_err(|e| anyhow::anyhow!("{}: {e}", path.display()))
}

/// Writes `density.csv`, `positions.csv` and, for verification runs,
/// `ratios.csv` into `out` (default `run_dir/plots`). Returns the files written.
pub fn plot_data(run_dir: &Path, out: Option<&Path>) -> Result<Vec<PathBuf>> {
    let manifest_path = run_dir.join("manifest.json");
    let text = std::fs::read_to_string(&manifest_path)
        .with_context(|| format!("missing artifact {}", manifest_path.display()))?;
    let m: ManifestView =
        serde_json::from_str(&text).with_context(|| format!("unreadable manifest {}", manifest_path.display()))?;
    let out = out.map(Path::to_path_buf).unwrap_or_else(|| run_dir.join("plots"));
    let grid = m.config.grid;
    let done: Vec<&InstanceView> = m.instances.iter().filter(|i| i.status == "done").collect();
    let mut written = Vec::new();

    let mut alphas: Vec<f64> = done.iter().filter_map(|i| i.alpha).collect();
    alphas.sort_by(f64::total_cmp);
    alphas.dedup();
    let has_density = matches!(m.mode.as_str(), "solve-continuum" | "verify" | "sweep" | "robin");
    let has_positions = matches!(m.mode.as_str(), "solve-discrete" | "verify" | "sweep" | "robin");
    if !has_density && !has_positions {
        bail!("mode `{}` produces no plottable artifacts", m.mode);
    }

    if has_density {
        let mut rows = Vec::new();
        for &a in &alphas {
            let path = density_file(run_dir, a);
            let rho = load_density(&path, grid)?;
            for (i, d) in rho.densities().iter().enumerate() {
                rows.push(vec![num(a), num(grid.center(i)), num(*d)]);
            }
        }
        let p = out.join("density.csv");
        write_csv(&p, &["alpha", "x", "density"], &rows)?;
        written.push(p);
    }

    if has_positions {
        let mut rows = Vec::new();
        for inst in &done {
            let path = positions_file(run_dir, &inst.key);
            let (_, prow) = read_csv(&path)?;
            let xs = prow.iter().map(|r| parse(&r[1], &path)).collect::<Result<Vec<f64>>>()?;
            let quantiles = match (has_density, inst.alpha) {
                (true, Some(a)) => Some(quantile_init(&load_density(&density_file(run_dir, a), grid)?, inst.n)),
                _ => None,
            };
            for (i, x) in xs.iter().enumerate() {
                rows.push(vec![
                    inst.n.to_string(),
                    inst.alpha.map(num).unwrap_or_default(),
                    i.to_string(),
                    num(*x),
                    quantiles.as_ref().map(|q| num(q[i])).unwrap_or_default(),
                ]);
            }
        }
        let p = out.join("positions.csv");
        write_csv(&p, &["n", "alpha", "index", "position", "quantile"], &rows)?;
        written.push(p);
    }

    if matches!(m.mode.as_str(), "verify" | "sweep") {
        let path = run_dir.join("bounds.csv");
        let (header, rows) = read_csv(&path)?;
        let col = |name: &str| -> Result<usize> {
            header.iter().position(|h| h == name).with_context(|| format!("{} lacks column {name}", path.display()))
        };
        let idx = [col("n")?, col("alpha")?, col("A_scale")?, col("ratio_E")?, col("ratio_F")?];
        let out_rows: Vec<Vec<String>> = rows.iter().map(|r| idx.iter().map(|&i| r[i].clone()).collect()).collect();
        let p = out.join("ratios.csv");
        write_csv(&p, &["n", "alpha", "A_scale", "ratio_E", "ratio_F"], &out_rows)?;
        written.push(p);
    }
    Ok(written)
}
