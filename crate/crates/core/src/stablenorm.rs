//! Stable-norm estimates `f̂(nw)/n` and the sandwich certificate
//! `λ(w) <= f̂(nw)/n <= (1 + η_R)(λ(w) + Ĉ/n)`.

use num_traits::ToPrimitive;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::metric::HedlundMetric;
use crate::polytope::{format_rational, RationalVec};
use crate::scalar::Real;
use crate::solver::{CoverBox, Solver};

/// Tolerances of the sandwich certificate.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct Tolerances {
    /// Slack below the calibration bound `λ(w)`.
    pub tol_low: f64,
    /// Slack above the explicit-path bound.
    pub tol_quad: f64,
    /// Allowed increase between consecutive entries.
    pub tol_mono: f64,
    /// Required ratio of the last gap to the first gap.
    pub gap_ratio: f64,
}

impl Default for Tolerances {
    fn default() -> Self {
        Tolerances {
            tol_low: 1e-3,
            tol_quad: 1e-2,
            tol_mono: 2e-3,
            gap_ratio: 0.6,
        }
    }
}

/// `Ĉ = 2 diam̂ + κ (D̂ + e)` with its ingredients.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ConstantC {
    pub diam: f64,
    pub line_gap: f64,
    pub e_const: f64,
    pub kappa: usize,
    pub value: f64,
}

pub fn constant_c<T: Real>(metric: &HedlundMetric<T>, solver: &Solver<T>) -> ConstantC {
    let diam = solver.diameter_upper().to_f64_lossy();
    let line_gap = solver.line_gap(metric.curves()).to_f64_lossy();
    assemble_c(diam, line_gap, metric.e_const().to_f64_lossy(), metric.polytope().kappa())
}

pub fn assemble_c(diam: f64, line_gap: f64, e_const: f64, kappa: usize) -> ConstantC {
    ConstantC {
        diam,
        line_gap,
        e_const,
        kappa,
        value: 2.0 * diam + kappa as f64 * (line_gap + e_const),
    }
}

/// Start nodes: 8 points on every curve, then a `3^m` lattice of `F_0`.
pub fn default_starts<T: Real>(metric: &HedlundMetric<T>, solver: &Solver<T>) -> Vec<Vec<i64>> {
    let curves = metric.curves();
    let m = curves.dim();
    let mut out: Vec<Vec<i64>> = Vec::new();
    let mut push = |g: Vec<i64>| {
        if !out.contains(&g) {
            out.push(g);
        }
    };
    for i in 0..curves.len() {
        for k in 0..8 {
            push(solver.snap(&curves.curve_point(i, T::lit(k as f64 / 8.0), true)));
        }
    }
    for idx in 0..3usize.pow(m as u32) {
        let mut rem = idx;
        let mut x = vec![T::zero(); m];
        for c in (0..m).rev() {
            x[c] = T::lit((rem % 3) as f64 / 3.0);
            rem /= 3;
        }
        push(solver.snap(&x));
    }
    out
}

/// One entry of a norm sequence.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct NormEntry {
    pub n: usize,
    pub f_hat: Option<f64>,
    pub f_hat_over_n: Option<f64>,
    /// Start node (grid units) attaining the minimum.
    pub start: Option<Vec<i64>>,
    pub bounds: Option<CoverBox>,
    pub boundary_touched: bool,
    pub error: Option<String>,
}

struct StartResult {
    per_n: Vec<std::result::Result<(f64, CoverBox, bool), Error>>,
}

fn scaled(w: &[i64], n: usize, res: usize) -> Vec<i64> {
    w.iter().map(|&x| x * n as i64 * res as i64).collect()
}

fn run_start<T: Real>(solver: &Solver<T>, start: &[i64], w: &[i64], ns: &[usize]) -> StartResult {
    let res = solver.res();
    let budget = solver.options().budget;
    let search = |ns: &[usize]| -> Result<(Vec<f64>, CoverBox, bool)> {
        let targets: Vec<Vec<i64>> = ns
            .iter()
            .map(|&n| start.iter().zip(scaled(w, n, res)).map(|(a, b)| a + b).collect())
            .collect();
        let mut all = targets.clone();
        all.push(start.to_vec());
        let mut pad = 1;
        loop {
            let bounds = CoverBox::around(&all, res, pad);
            let found = solver.search_box(start, &targets, &bounds)?;
            let next = CoverBox::around(&all, res, 2 * pad);
            if !found.touched || next.nodes(res) > budget {
                let d = found.distances.iter().map(|d| d.to_f64_lossy()).collect();
                return Ok((d, bounds, found.touched));
            }
            pad *= 2;
        }
    };
    match search(ns) {
        Ok((d, b, t)) => StartResult {
            per_n: d.into_iter().map(|d| Ok((d, b.clone(), t))).collect(),
        },
        // Too large for one box: fall back to one box per n.
        Err(Error::OutOfMemoryBudget { .. }) => StartResult {
            per_n: ns
                .iter()
                .map(|&n| search(&[n]).map(|(d, b, t)| (d[0], b, t)))
                .collect(),
        },
        Err(e) => StartResult {
            per_n: ns.iter().map(|_| Err(e.clone())).collect(),
        },
    }
}

/// `f̂(nw)/n` for `n = 1..=n_max`: the minimum over `starts` of the grid
/// distance from the start to its translate by `nw`.
pub fn norm_sequence<T: Real>(solver: &Solver<T>, w: &[i64], n_max: usize, starts: &[Vec<i64>]) -> Result<Vec<NormEntry>> {
    if w.iter().all(|&x| x == 0) {
        return Err(Error::ZeroVector);
    }
    if w.len() != solver.dim() {
        return Err(Error::DimensionMismatch {
            expected: solver.dim(),
            found: w.len(),
        });
    }
    if n_max == 0 || starts.is_empty() {
        return Err(Error::InvalidArgument("n_max and the start set must be nonempty".into()));
    }
    let ns: Vec<usize> = (1..=n_max).collect();
    let results: Vec<StartResult> = starts.par_iter().map(|s| run_start(solver, s, w, &ns)).collect();
    Ok(ns
        .iter()
        .enumerate()
        .map(|(k, &n)| {
            let mut best: Option<(f64, usize)> = None;
            let mut err = None;
            for (si, r) in results.iter().enumerate() {
                match &r.per_n[k] {
                    Ok((d, _, _)) => {
                        if best.map_or(true, |(b, _)| *d < b) {
                            best = Some((*d, si));
                        }
                    }
                    Err(e) => err = err.or_else(|| Some(e.to_string())),
                }
            }
            match best {
                Some((d, si)) => {
                    let (_, b, t) = results[si].per_n[k].as_ref().expect("ok entry").clone();
                    NormEntry {
                        n,
                        f_hat: Some(d),
                        f_hat_over_n: Some(d / n as f64),
                        start: Some(starts[si].clone()),
                        bounds: Some(b),
                        boundary_touched: t,
                        error: None,
                    }
                }
                None => NormEntry {
                    n,
                    f_hat: None,
                    f_hat_over_n: None,
                    start: None,
                    bounds: None,
                    boundary_touched: false,
                    error: err,
                },
            }
        })
        .collect())
}

/// `f̂(v)`, an upper estimate of `min_x d(x, x + v)`.
pub fn estimate_f<T: Real>(solver: &Solver<T>, v: &[i64], starts: &[Vec<i64>]) -> Result<f64> {
    let e = norm_sequence(solver, v, 1, starts)?.remove(0);
    e.f_hat.ok_or_else(|| Error::InvalidArgument(e.error.unwrap_or_default()))
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct SandwichRow {
    pub n: usize,
    pub bounds: Option<CoverBox>,
    pub f_hat_over_n: Option<f64>,
    pub lower: f64,
    pub upper: f64,
    pub pass: bool,
    pub error: Option<String>,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct SandwichReport {
    pub w: Vec<i64>,
    pub facet_id: usize,
    pub coefficients: Vec<u64>,
    pub lambda_w: String,
    pub lambda_w_f64: f64,
    pub c_hat: ConstantC,
    pub overhead: f64,
    pub res: usize,
    pub stencil_radius: usize,
    pub n_starts: usize,
    pub rows: Vec<SandwichRow>,
    pub monotone: bool,
    pub first_gap: Option<f64>,
    pub last_gap: Option<f64>,
    pub converging: bool,
    pub tolerances: Tolerances,
    pub pass: bool,
}

/// Runs the norm sequence of `w` and checks every entry against the
/// calibration lower bound and the explicit-path upper bound.
pub fn sandwich_check<T: Real>(
    metric: &HedlundMetric<T>,
    solver: &Solver<T>,
    c_hat: &ConstantC,
    w: &[i64],
    n_max: usize,
    starts: &[Vec<i64>],
    tol: &Tolerances,
) -> Result<SandwichReport> {
    let poly = metric.polytope();
    let (facet_id, coefficients) = poly.integer_decomposition(w)?;
    let lam = poly.norm(&RationalVec::from_ints(w));
    let lambda = lam.to_f64().unwrap_or(f64::NAN);
    let eta = solver.overhead();
    let entries = norm_sequence(solver, w, n_max, starts)?;
    let rows: Vec<SandwichRow> = entries
        .into_iter()
        .map(|e| {
            let lower = lambda - tol.tol_low;
            let upper = (1.0 + eta) * (lambda + c_hat.value / e.n as f64) + tol.tol_quad;
            let pass = e.f_hat_over_n.is_some_and(|f| (lower..=upper).contains(&f));
            SandwichRow {
                n: e.n,
                bounds: e.bounds,
                f_hat_over_n: e.f_hat_over_n,
                lower,
                upper,
                pass,
                error: e.error,
            }
        })
        .collect();
    let vals: Vec<f64> = rows.iter().filter_map(|r| r.f_hat_over_n).collect();
    let monotone = vals.windows(2).all(|p| p[1] <= p[0] + tol.tol_mono);
    let first_gap = rows.first().and_then(|r| r.f_hat_over_n).map(|f| f - lambda);
    let last_gap = rows.last().and_then(|r| r.f_hat_over_n).map(|f| f - lambda);
    let converging = match (first_gap, last_gap) {
        (Some(a), Some(b)) => a <= tol.tol_mono || b <= tol.gap_ratio * a,
        _ => false,
    };
    let pass = rows.iter().all(|r| r.pass) && monotone && converging;
    Ok(SandwichReport {
        w: w.to_vec(),
        facet_id,
        coefficients,
        lambda_w: format_rational(&lam),
        lambda_w_f64: lambda,
        c_hat: c_hat.clone(),
        overhead: eta,
        res: solver.res(),
        stencil_radius: solver.options().radius,
        n_starts: starts.len(),
        rows,
        monotone,
        first_gap,
        last_gap,
        converging,
        tolerances: *tol,
        pass,
    })
}

fn format_box(b: &Option<CoverBox>) -> String {
    match b {
        Some(b) => b
            .lo
            .iter()
            .zip(&b.hi)
            .map(|(l, h)| format!("{l}:{h}"))
            .collect::<Vec<_>>()
            .join(";"),
        None => String::new(),
    }
}

impl SandwichReport {
    /// Flat CSV: `n, box, res, f_hat_over_n, lower, upper, pass`.
    pub fn to_csv(&self) -> Result<String> {
        let mut wtr = csv::Writer::from_writer(Vec::new());
        wtr.write_record(["n", "box", "res", "f_hat_over_n", "lower", "upper", "pass"])?;
        for r in &self.rows {
            wtr.write_record([
                r.n.to_string(),
                format_box(&r.bounds),
                self.res.to_string(),
                r.f_hat_over_n.map(|f| format!("{f:.12}")).unwrap_or_default(),
                format!("{:.12}", r.lower),
                format!("{:.12}", r.upper),
                r.pass.to_string(),
            ])?;
        }
        let bytes = wtr.into_inner().map_err(|e| Error::Io(e.to_string()))?;
        Ok(String::from_utf8(bytes).expect("csv is utf-8"))
    }
}
