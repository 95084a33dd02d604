//! Mode execution: plan instances, solve them on a worker pool, write artifacts.

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};
use std::time::Instant;

use anyhow::{Context, Result};
use log::{info, warn};
use pileup::analysis::{convolution_second_derivative, fd_oracle, TestFunction};
use pileup::bounds::{self, BoundsReport, RobinReport};
use pileup::continuum::{self, ContinuumOptions, ContinuumReport, DensityDiagnostics, GridDensity};
use pileup::discrete::{self, NewtonOptions, SolveReport};
use pileup::potentials::{check_assumptions, make_potential, AssumptionReport, ConfiningPotential};
use pileup::scaling::{frame_from_alpha, make_frame, ScaleFrame};
use rayon::prelude::*;
use serde::Serialize;

use crate::config::{Mode, Param, RunConfig};
use crate::output::{num, opt_bool, write_csv, write_json};

pub const MANIFEST_VERSION: u32 = 1;

pub const BOUNDS_COLUMNS: [&str; 15] = [
    "n", "alpha", "beta", "q_alpha", "A_scale", "E_disc", "E_cont", "F_disc", "F_cont", "FD", "FC", "ratio_E",
    "ratio_F", "pass_sign", "pass_ratio",
];

#[derive(Debug, Clone)]
pub struct RunOptions {
    pub mode: Mode,
    pub out: PathBuf,
    pub workers: usize,
    pub seed: Option<u64>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Status {
    Done,
    Skipped,
    Failed,
}

impl Status {
    fn as_str(&self) -> &'static str {
        match self {
            Status::Done => "done",
            Status::Skipped => "skipped",
            Status::Failed => "failed",
        }
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct InstanceRecord {
    pub key: String,
    pub n: usize,
    pub param: Param,
    pub alpha: Option<f64>,
    pub status: Status,
    pub detail: String,
    /// Checks evaluated on this instance, `None` if none apply.
    pub checks_pass: Option<bool>,
    pub seconds: f64,
}

#[derive(Debug, Clone, Serialize)]
pub struct RunSummary {
    pub done: usize,
    pub skipped: usize,
    pub failed: usize,
    pub checks_passed: bool,
    pub exit_code: i32,
}

#[derive(Serialize)]
struct Manifest<'a> {
    manifest_version: u32,
    tool: &'static str,
    version: &'static str,
    mode: Mode,
    seed: Option<u64>,
    workers: usize,
    config: &'a RunConfig,
    wall_seconds: f64,
    instances: &'a [InstanceRecord],
    skipped: Vec<&'a str>,
    groups: &'a [GroupStability],
    outputs: &'a [String],
    summary: &'a RunSummary,
}

#[derive(Debug, Clone, Serialize)]
pub struct GroupStability {
    pub group: String,
    pub members: usize,
    pub ratio_e_spread: f64,
    pub ratio_f_spread: f64,
    pub pass: bool,
}

struct Planned {
    n: usize,
    param: Param,
    frame: std::result::Result<ScaleFrame, String>,
    skip: Option<String>,
}

impl Planned {
    fn alpha(&self) -> Option<f64> {
        self.frame.as_ref().ok().map(|f| f.alpha)
    }

    fn key(&self) -> String {
        match self.alpha() {
            Some(a) => format!("n{}_alpha{a}", self.n),
            None => format!("n{}_{}{}", self.n, self.param.label(), self.param.value()),
        }
    }

    fn group(&self) -> String {
        format!("{}={}", self.param.label(), self.param.value())
    }
}

fn plan(cfg: &RunConfig, mode: Mode, q: &ConfiningPotential) -> Vec<Planned> {
    let mut ns = cfg.n.clone();
    ns.sort_unstable();
    ns.dedup();
    let mut params = cfg.params();
    if params.is_empty() && mode == Mode::Robin {
        params.push(Param::Beta(1.0));
    }
    let restrict = cfg.restrict(mode);
    let mut out = Vec::new();
    for &n in &ns {
        for &param in &params {
            let frame = match param {
                Param::Alpha(a) => frame_from_alpha(n, a, q),
                Param::Beta(b) => make_frame(n, b, q),
                Param::AlphaExponent(t) => frame_from_alpha(n, (n as f64).powf(t).ceil(), q),
            }
            .map_err(|e| e.to_string());
            let skip = match &frame {
                Ok(f) if restrict && f.alpha > n as f64 / (n as f64).ln() => {
                    Some(format!("alpha = {} exceeds n / log n = {}", f.alpha, n as f64 / (n as f64).ln()))
                }
                _ => None,
            };
            out.push(Planned { n, param, frame, skip });
        }
    }
    out.sort_by(|a, b| {
        (a.n, a.alpha().unwrap_or(f64::NAN))
            .partial_cmp(&(b.n, b.alpha().unwrap_or(f64::NAN)))
            .unwrap_or(std::cmp::Ordering::Equal)
            .then_with(|| a.param.value().total_cmp(&b.param.value()))
    });
    out
}

fn newton(cfg: &RunConfig) -> NewtonOptions {
    NewtonOptions { tol_g: cfg.tolerances.tol_g, max_iter: cfg.tolerances.max_newton_iter }
}

fn continuum_opts(cfg: &RunConfig) -> ContinuumOptions {
    ContinuumOptions {
        grid: cfg.grid,
        max_gradient_iter: cfg.tolerances.max_gradient_iter,
        max_active_set_iter: cfg.tolerances.max_active_set_iter,
    }
}

fn core_tolerances(cfg: &RunConfig) -> bounds::Tolerances {
    bounds::Tolerances {
        num_tol_scale: cfg.tolerances.num_tol_scale,
        residual_scale: cfg.tolerances.residual_scale,
        ratio_spread: cfg.tolerances.ratio_spread,
    }
}

type Solved = std::result::Result<(GridDensity, ContinuumReport), String>;

/// One continuum solve per distinct `alpha`; the problem does not depend on `n`.
fn solve_continua(cfg: &RunConfig, planned: &[Planned]) -> BTreeMap<u64, (ScaleFrame, Solved, f64)> {
    let mut reps: BTreeMap<u64, ScaleFrame> = BTreeMap::new();
    for p in planned.iter().filter(|p| p.skip.is_none()) {
        if let Ok(f) = &p.frame {
            reps.entry(f.alpha.to_bits()).or_insert_with(|| f.clone());
        }
    }
    let opts = continuum_opts(cfg);
    let jobs: Vec<(u64, ScaleFrame)> = reps.into_iter().collect();
    jobs.into_par_iter()
        .map(|(k, f)| {
            let t = Instant::now();
            let r = continuum::minimize_continuum(&f, &opts).map_err(|e| e.to_string());
            let secs = t.elapsed().as_secs_f64();
            (k, (f, r, secs))
        })
        .collect()
}

#[derive(Serialize, Default)]
struct InstanceJson<'a> {
    key: &'a str,
    #[serde(skip_serializing_if = "Option::is_none")]
    frame: Option<&'a ScaleFrame>,
    #[serde(skip_serializing_if = "Option::is_none")]
    discrete: Option<&'a SolveReport>,
    #[serde(skip_serializing_if = "Option::is_none")]
    continuum: Option<&'a ContinuumReport>,
    #[serde(skip_serializing_if = "Option::is_none")]
    diagnostics: Option<&'a DensityDiagnostics>,
    #[serde(skip_serializing_if = "Option::is_none")]
    bounds: Option<&'a BoundsReport>,
    #[serde(skip_serializing_if = "Option::is_none")]
    robin: Option<&'a RobinReport>,
    #[serde(skip_serializing_if = "Option::is_none")]
    assumptions: Option<&'a AssumptionReport>,
}

/// What a single instance produced.
#[derive(Default)]
struct Product {
    discrete: Option<(Vec<f64>, SolveReport)>,
    continuum: Option<(ContinuumReport, DensityDiagnostics)>,
    bounds: Option<BoundsReport>,
    robin: Option<RobinReport>,
    assumptions: Option<AssumptionReport>,
}

fn execute(
    mode: Mode,
    cfg: &RunConfig,
    q: &ConfiningPotential,
    p: &Planned,
    cont: &BTreeMap<u64, (ScaleFrame, Solved, f64)>,
) -> std::result::Result<Product, String> {
    if mode == Mode::CheckAssumptions {
        let beta = match p.param {
            Param::Beta(b) => b,
            _ => match &p.frame {
                Ok(f) => f.beta,
                Err(_) => p.n as f64 / q.primitive(p.param.value()),
            },
        };
        return Ok(Product { assumptions: Some(check_assumptions(q, p.n, beta)), ..Default::default() });
    }
    let frame = p.frame.as_ref().map_err(Clone::clone)?;
    if mode == Mode::SolveDiscrete {
        let (x, rep) = discrete::minimize(frame, None, newton(cfg)).map_err(|e| e.to_string())?;
        return Ok(Product { discrete: Some((x.positions().to_vec(), rep)), ..Default::default() });
    }
    let (_, solved, _) = cont.get(&frame.alpha.to_bits()).ok_or("continuum solve missing")?;
    let (rho, crep) = solved.as_ref().map_err(|e| format!("continuum: {e}"))?;
    let mut crep = crep.clone();
    // the cached solve used another n; F and E do not depend on it
    crep.alpha = frame.alpha;
    let diag = continuum::density_diagnostics(rho, frame);
    if mode == Mode::SolveContinuum {
        return Ok(Product { continuum: Some((crep, diag)), ..Default::default() });
    }
    let inst = bounds::solve_discrete_given(frame, rho.clone(), crep.clone(), newton(cfg)).map_err(|e| e.to_string())?;
    let mut out = Product {
        discrete: Some((inst.xbar.positions().to_vec(), inst.discrete.clone())),
        continuum: Some((crep, diag)),
        ..Default::default()
    };
    match mode {
        Mode::Robin => out.robin = Some(bounds::robin_report(&inst)),
        _ => out.bounds = Some(bounds::verify_theorems(&inst, &core_tolerances(cfg)).map_err(|e| e.to_string())?),
    }
    Ok(out)
}

/// Runs `opts.mode` over the configured instances and writes every artifact.
pub fn run(cfg: &RunConfig, opts: &RunOptions) -> Result<RunSummary> {
    let start = Instant::now();
    let pool = rayon::ThreadPoolBuilder::new().num_threads(opts.workers).build().context("building worker pool")?;
    std::fs::create_dir_all(&opts.out).with_context(|| format!("creating {}", opts.out.display()))?;
    let mut effective = cfg.clone();
    effective.mode = Some(opts.mode);
    effective.workers = Some(opts.workers);
    effective.output = Some(opts.out.clone());

    if opts.mode == Mode::AppendixCheck {
        return pool.install(|| appendix_check(&effective, opts, start));
    }

    let spec = cfg.potential.as_ref().context("potential missing")?;
    let q = make_potential(spec).map_err(|e| anyhow::anyhow!("{e}"))?;
    let planned = plan(cfg, opts.mode, &q);
    let needs_continuum = matches!(opts.mode, Mode::SolveContinuum | Mode::Verify | Mode::Sweep | Mode::Robin);
    let cont = if needs_continuum { pool.install(|| solve_continua(cfg, &planned)) } else { BTreeMap::new() };

    let results: Vec<(std::result::Result<Product, String>, f64)> = pool.install(|| {
        planned
            .par_iter()
            .map(|p| {
                if p.skip.is_some() {
                    return (Ok(Product::default()), 0.0);
                }
                let t = Instant::now();
                let r = execute(opts.mode, cfg, &q, p, &cont);
                (r, t.elapsed().as_secs_f64())
            })
            .collect()
    });

    let mut records = Vec::new();
    let mut products: Vec<Option<Product>> = Vec::new();
    for (p, (r, secs)) in planned.iter().zip(results) {
        let (status, detail, prod) = match (&p.skip, r) {
            (Some(why), _) => (Status::Skipped, why.clone(), None),
            (None, Ok(prod)) => (Status::Done, String::new(), Some(prod)),
            (None, Err(e)) => {
                warn!("{} failed: {e}", p.key());
                (Status::Failed, e, None)
            }
        };
        records.push(InstanceRecord {
            key: p.key(),
            n: p.n,
            param: p.param,
            alpha: p.alpha(),
            status,
            detail,
            checks_pass: None,
            seconds: secs,
        });
        products.push(prod);
    }

    // ratio stability per parameter group, n varying
    let mut groups = Vec::new();
    if matches!(opts.mode, Mode::Verify | Mode::Sweep) {
        let mut by_group: BTreeMap<String, Vec<usize>> = BTreeMap::new();
        for (i, p) in planned.iter().enumerate() {
            if products[i].as_ref().and_then(|x| x.bounds.as_ref()).is_some() {
                by_group.entry(p.group()).or_default().push(i);
            }
        }
        let tol = core_tolerances(cfg);
        for (g, idx) in by_group {
            if idx.len() < 2 {
                continue;
            }
            let mut reps: Vec<BoundsReport> =
                idx.iter().map(|&i| products[i].as_ref().unwrap().bounds.clone().unwrap()).collect();
            let s = bounds::sweep_stability(&mut reps, &tol);
            for (&i, r) in idx.iter().zip(reps) {
                products[i].as_mut().unwrap().bounds = Some(r);
            }
            groups.push(GroupStability {
                group: g,
                members: idx.len(),
                ratio_e_spread: s.ratio_e_spread,
                ratio_f_spread: s.ratio_f_spread,
                pass: s.pass_e && s.pass_f,
            });
        }
    }

    for (rec, prod) in records.iter_mut().zip(&products) {
        if let Some(prod) = prod {
            rec.checks_pass = instance_checks(opts.mode, prod);
        }
    }

    let outputs = write_artifacts(opts, &planned, &records, &products, &cont)?;
    let summary = summarize(&records, &groups);
    let manifest = Manifest {
        manifest_version: MANIFEST_VERSION,
        tool: "riesz-pileup",
        version: env!("CARGO_PKG_VERSION"),
        mode: opts.mode,
        seed: opts.seed,
        workers: opts.workers,
        config: &effective,
        wall_seconds: start.elapsed().as_secs_f64(),
        instances: &records,
        skipped: records.iter().filter(|r| r.status == Status::Skipped).map(|r| r.key.as_str()).collect(),
        groups: &groups,
        outputs: &outputs,
        summary: &summary,
    };
    write_json(&opts.out.join("manifest.json"), &manifest)?;
    info!("{} done, {} skipped, {} failed", summary.done, summary.skipped, summary.failed);
    Ok(summary)
}

fn instance_checks(mode: Mode, prod: &Product) -> Option<bool> {
    match mode {
        Mode::Verify | Mode::Sweep => prod.bounds.as_ref().map(|b| b.pass_sign && b.pass_raw_sign && b.pass_ratio != Some(false)),
        Mode::Robin => prod.robin.as_ref().map(|r| r.bracket.ordered && (r.bracket.n < 256 || r.magnitude_ratio <= 1.0)),
        Mode::CheckAssumptions => prod.assumptions.as_ref().map(|a| a.all_pass()),
        Mode::SolveContinuum => prod.continuum.as_ref().map(|(c, _)| c.el.passes(1e-5)),
        _ => None,
    }
}

fn summarize(records: &[InstanceRecord], groups: &[GroupStability]) -> RunSummary {
    let count = |s| records.iter().filter(|r| r.status == s).count();
    let (done, skipped, failed) = (count(Status::Done), count(Status::Skipped), count(Status::Failed));
    let checks_passed = records.iter().all(|r| r.checks_pass != Some(false)) && groups.iter().all(|g| g.pass);
    let exit_code = if failed > 0 {
        1
    } else if !checks_passed {
        2
    } else {
        0
    };
    RunSummary { done, skipped, failed, checks_passed, exit_code }
}

fn density_rows(rho: &GridDensity) -> Vec<Vec<String>> {
    rho.densities().iter().enumerate().map(|(i, d)| vec![num(rho.grid.center(i)), num(*d)]).collect()
}

pub fn density_file(out: &Path, alpha: f64) -> PathBuf {
    out.join("densities").join(format!("alpha{alpha}.csv"))
}

pub fn positions_file(out: &Path, key: &str) -> PathBuf {
    out.join("positions").join(format!("{key}.csv"))
}

fn write_artifacts(
    opts: &RunOptions,
    planned: &[Planned],
    records: &[InstanceRecord],
    products: &[Option<Product>],
    cont: &BTreeMap<u64, (ScaleFrame, Solved, f64)>,
) -> Result<Vec<String>> {
    let out = &opts.out;
    let mut outputs = vec!["instances.csv".to_string()];
    let status_rows: Vec<Vec<String>> = records
        .iter()
        .map(|r| {
            vec![
                r.key.clone(),
                r.n.to_string(),
                r.param.label().to_string(),
                num(r.param.value()),
                r.alpha.map(num).unwrap_or_default(),
                r.status.as_str().to_string(),
                opt_bool(r.checks_pass),
                r.detail.clone(),
            ]
        })
        .collect();
    write_csv(
        &out.join("instances.csv"),
        &["key", "n", "param", "param_value", "alpha", "status", "checks_pass", "detail"],
        &status_rows,
    )?;

    for (p, (rec, prod)) in planned.iter().zip(records.iter().zip(products)) {
        let Some(prod) = prod else { continue };
        let j = InstanceJson {
            key: &rec.key,
            frame: p.frame.as_ref().ok(),
            discrete: prod.discrete.as_ref().map(|d| &d.1),
            continuum: prod.continuum.as_ref().map(|c| &c.0),
            diagnostics: prod.continuum.as_ref().map(|c| &c.1),
            bounds: prod.bounds.as_ref(),
            robin: prod.robin.as_ref(),
            assumptions: prod.assumptions.as_ref(),
        };
        write_json(&out.join("instances").join(format!("{}.json", rec.key)), &j)?;
        if let Some((x, _)) = &prod.discrete {
            let rows: Vec<Vec<String>> = x.iter().enumerate().map(|(i, v)| vec![i.to_string(), num(*v)]).collect();
            write_csv(&positions_file(out, &rec.key), &["index", "position"], &rows)?;
        }
    }
    if !cont.is_empty() {
        outputs.push("densities/".to_string());
    }
    for (f, solved, _) in cont.values() {
        if let Ok((rho, _)) = solved {
            write_csv(&density_file(out, f.alpha), &["x", "density"], &density_rows(rho))?;
        }
    }
    let done = || {
        planned.iter().zip(records.iter().zip(products)).filter_map(|(p, (r, prod))| prod.as_ref().map(|x| (p, r, x)))
    };

    match opts.mode {
        Mode::SolveDiscrete => {
            let rows: Vec<Vec<String>> = done()
                .filter_map(|(p, _, x)| {
                    let (_, d) = x.discrete.as_ref()?;
                    let f = p.frame.as_ref().ok()?;
                    Some(vec![
                        d.n.to_string(),
                        num(d.alpha),
                        num(f.beta),
                        num(d.energy),
                        num(d.f_alpha),
                        num(d.f_raw),
                        num(d.energy_raw),
                        d.iterations.to_string(),
                        num(d.grad_norm),
                    ])
                })
                .collect();
            write_csv(
                &out.join("discrete.csv"),
                &["n", "alpha", "beta", "E_disc", "F_disc", "FD", "ID", "iterations", "grad_norm"],
                &rows,
            )?;
            outputs.push("discrete.csv".into());
        }
        Mode::SolveContinuum => {
            let rows: Vec<Vec<String>> = done()
                .filter_map(|(p, _, x)| {
                    let (c, d) = x.continuum.as_ref()?;
                    let f = p.frame.as_ref().ok()?;
                    Some(vec![
                        p.n.to_string(),
                        num(f.alpha),
                        num(f.beta),
                        num(c.energy),
                        num(c.f_alpha),
                        num(c.f_multiplier),
                        num(f.gamma * c.f_alpha),
                        num(d.y1),
                        num(d.y2),
                        num(d.rho_max),
                        num(d.q2_sup),
                        num(c.el.on_support_dev),
                        num(c.el.off_support_slack),
                        c.el.passes(1e-5).to_string(),
                    ])
                })
                .collect();
            write_csv(
                &out.join("continuum.csv"),
                &[
                    "n", "alpha", "beta", "E_cont", "F_cont", "F_multiplier", "FC", "y1", "y2", "rho_max", "q2_sup",
                    "el_on_support", "el_off_support", "pass_el",
                ],
                &rows,
            )?;
            outputs.push("continuum.csv".into());
        }
        Mode::Verify | Mode::Sweep => {
            let rows: Vec<Vec<String>> = done()
                .filter_map(|(_, _, x)| {
                    let b = x.bounds.as_ref()?;
                    Some(vec![
                        b.n.to_string(),
                        num(b.alpha),
                        num(b.beta),
                        num(b.q_alpha),
                        num(b.a_scale),
                        num(b.e_disc),
                        num(b.e_cont),
                        num(b.f_disc),
                        num(b.f_cont),
                        num(b.fd),
                        num(b.fc),
                        num(b.ratio_e),
                        num(b.ratio_f),
                        b.pass_sign.to_string(),
                        opt_bool(b.pass_ratio),
                    ])
                })
                .collect();
            write_csv(&out.join("bounds.csv"), &BOUNDS_COLUMNS, &rows)?;
            outputs.push("bounds.csv".into());
        }
        Mode::Robin => {
            let rows: Vec<Vec<String>> = done()
                .filter_map(|(_, _, x)| {
                    let r = x.robin.as_ref()?;
                    let b = &r.bracket;
                    Some(vec![
                        b.n.to_string(),
                        num(r.beta),
                        num(r.alpha),
                        num(b.fd),
                        num(b.fc),
                        num(b.lower),
                        num(b.upper),
                        b.ordered.to_string(),
                        num(b.width()),
                        num(b.width_decomposition()),
                        num(r.new_magnitude),
                        num(r.old_magnitude),
                        num(r.magnitude_ratio),
                    ])
                })
                .collect();
            write_csv(
                &out.join("robin.csv"),
                &[
                    "n", "beta", "alpha", "FD", "FC", "lower", "upper", "ordered", "width", "width_decomposition",
                    "new_magnitude", "old_magnitude", "magnitude_ratio",
                ],
                &rows,
            )?;
            outputs.push("robin.csv".into());
        }
        Mode::CheckAssumptions => {
            let mut rows = Vec::new();
            for (p, _, x) in done() {
                let Some(a) = &x.assumptions else { continue };
                for c in &a.checks {
                    rows.push(vec![
                        p.n.to_string(),
                        num(a.beta),
                        c.name.to_string(),
                        c.pass.to_string(),
                        c.detail.clone(),
                    ]);
                    if !c.pass {
                        eprintln!("n={} beta={}: assumption `{}` fails: {}", p.n, a.beta, c.name, c.detail);
                    }
                }
            }
            write_csv(&out.join("assumptions.csv"), &["n", "beta", "check", "pass", "detail"], &rows)?;
            outputs.push("assumptions.csv".into());
        }
        Mode::AppendixCheck => unreachable!("handled separately"),
    }
    if products.iter().any(|p| p.as_ref().is_some_and(|x| x.discrete.is_some())) {
        outputs.push("positions/".into());
    }
    outputs.push("instances/".into());
    Ok(outputs)
}

#[derive(Debug, Clone, Serialize)]
struct AppendixRow {
    function: &'static str,
    alpha: f64,
    x: f64,
    identity: f64,
    oracle: f64,
    rel_dev: f64,
    pass: bool,
}

fn appendix_check(cfg: &RunConfig, opts: &RunOptions, start: Instant) -> Result<RunSummary> {
    let rel = cfg.tolerances.appendix_rel;
    let mut jobs = Vec::new();
    for f in TestFunction::catalog() {
        let (a, b) = f.interval();
        for &alpha in &cfg.appendix.alpha {
            for i in 0..cfg.appendix.points {
                let x = a + (b - a) * (i + 1) as f64 / (cfg.appendix.points + 1) as f64;
                jobs.push((f, alpha, x));
            }
        }
    }
    let rows: Vec<std::result::Result<AppendixRow, String>> = jobs
        .par_iter()
        .map(|&(f, alpha, x)| {
            let identity = convolution_second_derivative(&f, alpha, x).map_err(|e| e.to_string())?;
            let oracle = fd_oracle(&f, alpha, x, 1e-3);
            let rel_dev = (identity - oracle).abs() / oracle.abs().max(f64::MIN_POSITIVE);
            Ok(AppendixRow { function: f.name(), alpha, x, identity, oracle, rel_dev, pass: rel_dev <= rel })
        })
        .collect();
    let failed = rows.iter().filter(|r| r.is_err()).count();
    let ok: Vec<&AppendixRow> = rows.iter().filter_map(|r| r.as_ref().ok()).collect();
    let csv_rows: Vec<Vec<String>> = ok
        .iter()
        .map(|r| {
            vec![
                r.function.to_string(),
                num(r.alpha),
                num(r.x),
                num(r.identity),
                num(r.oracle),
                num(r.rel_dev),
                r.pass.to_string(),
            ]
        })
        .collect();
    write_csv(
        &opts.out.join("appendix.csv"),
        &["function", "alpha", "x", "identity", "oracle", "rel_dev", "pass"],
        &csv_rows,
    )?;
    let checks_passed = ok.iter().all(|r| r.pass);
    let summary = RunSummary {
        done: ok.len(),
        skipped: 0,
        failed,
        checks_passed,
        exit_code: if failed > 0 {
            1
        } else if checks_passed {
            0
        } else {
            2
        },
    };
    #[derive(Serialize)]
    struct AppendixManifest<'a> {
        manifest_version: u32,
        tool: &'static str,
        version: &'static str,
        mode: Mode,
        seed: Option<u64>,
        workers: usize,
        config: &'a RunConfig,
        wall_seconds: f64,
        outputs: [&'static str; 1],
        summary: &'a RunSummary,
    }
    write_json(
        &opts.out.join("manifest.json"),
        &AppendixManifest {
            manifest_version: MANIFEST_VERSION,
            tool: "riesz-pileup",
            version: env!("CARGO_PKG_VERSION"),
            mode: opts.mode,
            seed: opts.seed,
            workers: opts.workers,
            config: cfg,
            wall_seconds: start.elapsed().as_secs_f64(),
            outputs: ["appendix.csv"],
            summary: &summary,
        },
    )?;
    Ok(summary)
}
