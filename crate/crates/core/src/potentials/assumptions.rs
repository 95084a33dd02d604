//! Sampled checks of the standing assumptions on a confining potential.

use serde::Serialize;

use super::catalog::ConfiningPotential;

/// Outcome of one assumption.
#[derive(Debug, Clone, Serialize, PartialEq)]
pub struct Check {
    pub name: &'static str,
    pub pass: bool,
    pub detail: String,
}

#[derive(Debug, Clone, Serialize)]
pub struct AssumptionReport {
    pub potential: String,
    pub n: usize,
    pub beta: f64,
    pub checks: Vec<Check>,
}

impl AssumptionReport {
    pub fn all_pass(&self) -> bool {
        self.checks.iter().all(|c| c.pass)
    }

    pub fn failures(&self) -> impl Iterator<Item = &Check> {
        self.checks.iter().filter(|c| !c.pass)
    }

    pub fn get(&self, name: &str) -> Option<&Check> {
        self.checks.iter().find(|c| c.name == name)
    }
}

fn sample_points(q: &ConfiningPotential) -> Vec<f64> {
    let (q1, q2) = q.flat_interval();
    let reach = 8.0 + 2.0 * q1.abs().max(q2.abs());
    let m = 2001;
    let mut xs: Vec<f64> = (0..m).map(|i| -reach + 2.0 * reach * i as f64 / (m - 1) as f64).collect();
    for p in q.curvature_peaks() {
        xs.extend([p - 1e-3, p, p + 1e-3]);
    }
    xs
}

/// Evaluates convexity, normalization, growth and orientation at `(n, beta)`.
///
/// A failing orientation is reported, never repaired: the caller should pass
/// the `reflected` descriptor instead.
pub fn check_assumptions(q: &ConfiningPotential, n: usize, beta: f64) -> AssumptionReport {
    let xs = sample_points(q);
    let mut checks = Vec::new();

    let worst = xs
        .iter()
        .map(|&x| (x, q.d2(x)))
        .filter(|(_, v)| v.is_finite())
        .fold((0.0, f64::INFINITY), |acc, (x, v)| if v < acc.1 { (x, v) } else { acc });
    let scale = xs.iter().map(|&x| q.d2(x).abs()).filter(|v| v.is_finite()).fold(1.0f64, f64::max);
    checks.push(Check {
        name: "convexity",
        pass: worst.1 >= -1e-12 * scale,
        detail: format!("min Q'' = {:e} at x = {}", worst.1, worst.0),
    });

    let q0 = q.value(0.0);
    let (xmin, qmin) = xs
        .iter()
        .map(|&x| (x, q.value(x)))
        .fold((0.0, f64::INFINITY), |acc, (x, v)| if v < acc.1 { (x, v) } else { acc });
    checks.push(Check {
        name: "normalization",
        pass: q0.abs() <= 1e-14 && qmin >= -1e-12,
        detail: format!("Q(0) = {q0:e}, sampled min Q = {qmin:e} at x = {xmin}"),
    });

    let (q1, q2) = q.flat_interval();
    let far = 1e3 + q1.abs().max(q2.abs());
    let (left, right) = (q.value(-far), q.value(far));
    checks.push(Check {
        name: "growth",
        pass: left > 0.0 && right > 0.0,
        detail: format!("Q(-{far}) = {left:e}, Q({far}) = {right:e}"),
    });

    let y = n as f64 / beta;
    let orientation = if !(y > 0.0) || !y.is_finite() {
        Check { name: "orientation", pass: false, detail: format!("n/beta = {y} is not a positive number") }
    } else {
        match (q.inverse_primitive(y), q.inverse_primitive(-y)) {
            (Ok(plus), Ok(minus)) => {
                let pass = plus >= -minus - 1e-10 * plus.abs().max(1.0);
                let mut detail = format!("P^-1(n/beta) = {plus}, -P^-1(-n/beta) = {}", -minus);
                if !pass {
                    detail.push_str("; reflect the potential (descriptor kind \"reflected\")");
                }
                Check { name: "orientation", pass, detail }
            }
            (Err(e), _) | (_, Err(e)) => Check { name: "orientation", pass: false, detail: e.to_string() },
        }
    };
    checks.push(orientation);

    AssumptionReport { potential: q.name().to_string(), n, beta, checks }
}
