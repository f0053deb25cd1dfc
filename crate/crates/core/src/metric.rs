//! Conformal factor of a Hedlund metric and its certificates.
//!
//! The dual metric is `g* = F ρ*` with `ρ` the flat metric, so lengths are
//! measured with the speed factor `φ = F^{-1/2}` and the dual norm of a
//! covector is `√F |η|`.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::curves::{CurveSystem, TubeHit};
use crate::error::{Error, Result};
use crate::forms::{build_all, BumpProfile, GoodForm};
use crate::polytope::{Polytope, RationalVec};
use crate::quad::adaptive_simpson_rel;
use crate::scalar::{dot, Real, MAX_DIM};

pub const DEFAULT_INFLATION: f64 = 1.05;
/// Floor factor for `Ω_i / ε_i²`, keeping every `C_i` strictly positive.
pub const OMEGA_I_FLOOR: f64 = 1.1;
pub const E_FACTOR: f64 = 1.01;
pub const POLYLINE_REL_TOL: f64 = 1e-7;

/// Calibrated constants, recorded in run manifests.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct MetricConstants {
    pub omega: f64,
    pub omega_i: Vec<f64>,
    pub decay: Vec<f64>,
    pub e_const: f64,
    pub inflation: f64,
    pub sample_res: usize,
}

#[derive(Clone, Debug)]
pub struct HedlundMetric<T> {
    poly: Polytope,
    curves: CurveSystem<T>,
    forms: Vec<GoodForm<T>>,
    bump: BumpProfile<T>,
    eps_class: Vec<T>,
    /// `|v_i|² / ε_i²`, the value of `F` on `Γ_i`.
    peak: Vec<T>,
    omega: T,
    inv_omega: T,
    sqrt_omega: T,
    omega_i: Vec<T>,
    decay: Vec<T>,
    e_const: T,
    inflation: f64,
    sample_res: usize,
}

/// Unit vectors spanning directions in the normal space of `v`.
pub(crate) fn normal_directions<T: Real>(v: &[T]) -> Vec<Vec<T>> {
    let m = v.len();
    let mut basis: Vec<Vec<T>> = Vec::new();
    for k in 0..m {
        let mut u = vec![T::zero(); m];
        u[k] = T::one();
        let vv = dot(v, v);
        let p = dot(&u, v) / vv;
        for c in 0..m {
            u[c] -= p * v[c];
        }
        for b in &basis {
            let p = dot(&u, b);
            for c in 0..m {
                u[c] -= p * b[c];
            }
        }
        let n = dot(&u, &u).sqrt();
        if n > T::lit(1e-6) {
            basis.push(u.iter().map(|&x| x / n).collect());
        }
        if basis.len() == m - 1 {
            break;
        }
    }
    let k = basis.len();
    let mut out = Vec::new();
    let mut coef = vec![-2i32; k];
    loop {
        if coef.iter().any(|&c| c != 0) {
            let mut u = vec![T::zero(); m];
            for (c, b) in coef.iter().zip(&basis) {
                for d in 0..m {
                    u[d] += T::lit(*c as f64) * b[d];
                }
            }
            let n = dot(&u, &u).sqrt();
            out.push(u.iter().map(|&x| x / n).collect());
        }
        let mut i = 0;
        while i < k && coef[i] == 2 {
            coef[i] = -2;
            i += 1;
        }
        if i == k {
            break;
        }
        coef[i] += 1;
    }
    out
}

/// Points `γ_i(s) + ℓ n` for `n_s` values of `s`, the given radii and all
/// normal directions.
pub(crate) fn tube_samples<T: Real>(curves: &CurveSystem<T>, i: usize, n_s: usize, radii: &[T]) -> Vec<Vec<T>> {
    let dirs = normal_directions(curves.direction_real(i));
    let mut pts = Vec::new();
    for k in 0..n_s {
        let p = curves.curve_point(i, T::lit(k as f64 / n_s as f64), true);
        for &r in radii {
            if r == T::zero() {
                pts.push(p.clone());
                continue;
            }
            for d in &dirs {
                pts.push(p.iter().zip(d).map(|(&a, &b)| a + r * b).collect());
            }
        }
    }
    pts
}

fn grid_point<T: Real>(mut idx: usize, m: usize, res: usize) -> Vec<T> {
    let mut x = vec![T::zero(); m];
    for c in (0..m).rev() {
        x[c] = T::lit((idx % res) as f64 / res as f64);
        idx /= res;
    }
    x
}

fn linspace<T: Real>(a: T, b: T, n: usize) -> Vec<T> {
    (0..=n).map(|k| a + (b - a) * T::lit(k as f64 / n as f64)).collect()
}

impl<T: Real> HedlundMetric<T> {
    /// Estimates `Ω` and `Ω_i` by maximizing over a grid with `sample_res`
    /// points per unit and over structured samples of every tube.
    pub fn calibrate(poly: &Polytope, curves: CurveSystem<T>, sample_res: usize, inflation: f64) -> Result<Self> {
        if !(inflation >= 1.0 && inflation.is_finite()) {
            return Err(Error::InvalidArgument(format!("inflation {inflation} must be >= 1")));
        }
        let step = 1.0 / sample_res.max(1) as f64;
        let limit = curves.eps().to_f64_lossy() / 4.0;
        if sample_res == 0 || step > limit {
            return Err(Error::SamplingTooCoarse { step, limit });
        }
        let m = curves.dim();
        let forms = build_all(poly, &curves);
        let bump = BumpProfile::new(curves.eps(), curves.rho());
        let n = curves.len();

        // (max |η|² outside U_ε, per-tube max |η|²|v|²)
        let probe = |x: &[T]| -> (f64, Vec<f64>) {
            let hit = curves.tube_locate(x);
            let mut buf = [T::zero(); MAX_DIM];
            let mut best = 0.0f64;
            for f in &forms {
                f.eval_hit(hit.as_ref(), &bump, &mut buf);
                best = best.max(dot(&buf[..m], &buf[..m]).to_f64_lossy());
            }
            let mut tube = vec![0.0; n];
            let mut outside = best;
            if let Some(h) = hit {
                tube[h.curve] = best * curves.direction_norm_sq(h.curve).to_f64_lossy();
                if h.coords.ell < curves.eps() {
                    outside = 0.0;
                }
            }
            (outside, tube)
        };
        let merge = |(a, ta): (f64, Vec<f64>), (b, tb): (f64, Vec<f64>)| {
            (a.max(b), ta.iter().zip(&tb).map(|(x, y)| x.max(*y)).collect())
        };
        let total = sample_res.pow(m as u32);
        let grid = (0..total)
            .into_par_iter()
            .map(|idx| probe(&grid_point::<T>(idx, m, sample_res)))
            .reduce(|| (0.0, vec![0.0; n]), merge);
        let mut extra = Vec::new();
        for i in 0..n {
            let len = curves.direction_norm_sq(i).sqrt().to_f64_lossy();
            let n_s = ((sample_res as f64 * len).ceil() as usize).max(8);
            let levels = ((sample_res as f64 * curves.rho().to_f64_lossy()).ceil() as usize).max(8);
            extra.extend(tube_samples(&curves, i, n_s, &linspace(curves.eps(), curves.rho(), levels)));
        }
        let tubes = extra
            .par_iter()
            .map(|x| probe(x))
            .reduce(|| (0.0, vec![0.0; n]), merge);
        let (raw_omega, raw_tube) = merge(grid, tubes);

        let eps_class: Vec<f64> = poly.representatives().iter().map(|d| d.epsilon_f64()).collect();
        let omega = inflation * raw_omega;
        let omega_i: Vec<f64> = raw_tube
            .iter()
            .zip(&eps_class)
            .map(|(&t, &e)| (inflation * t).max(OMEGA_I_FLOOR * e * e))
            .collect();
        let eps = curves.eps().to_f64_lossy();
        let decay = omega_i
            .iter()
            .zip(&eps_class)
            .map(|(&o, &e)| (o / (e * e)).ln() / (eps * eps))
            .collect();
        let e_const = E_FACTOR * eps_class.iter().cloned().fold(0.0, f64::max);
        let consts = MetricConstants {
            omega,
            omega_i,
            decay,
            e_const,
            inflation,
            sample_res,
        };
        Self::assemble(poly, curves, forms, bump, &consts)
    }

    /// Rebuilds a metric from recorded constants without resampling.
    pub fn from_constants(poly: &Polytope, curves: CurveSystem<T>, consts: &MetricConstants) -> Result<Self> {
        let forms = build_all(poly, &curves);
        let bump = BumpProfile::new(curves.eps(), curves.rho());
        Self::assemble(poly, curves, forms, bump, consts)
    }

    fn assemble(
        poly: &Polytope,
        curves: CurveSystem<T>,
        forms: Vec<GoodForm<T>>,
        bump: BumpProfile<T>,
        c: &MetricConstants,
    ) -> Result<Self> {
        let n = curves.len();
        if c.omega_i.len() != n || c.decay.len() != n || poly.n_classes() != n {
            return Err(Error::DimensionMismatch {
                expected: n,
                found: c.omega_i.len(),
            });
        }
        if !(c.omega > 0.0) {
            return Err(Error::InvalidArgument("omega must be positive".into()));
        }
        let eps_class: Vec<T> = poly
            .representatives()
            .iter()
            .map(|d| T::lit(d.epsilon_f64()))
            .collect();
        let peak = (0..n)
            .map(|i| curves.direction_norm_sq(i) / (eps_class[i] * eps_class[i]))
            .collect();
        let omega = T::lit(c.omega);
        Ok(HedlundMetric {
            poly: poly.clone(),
            forms,
            bump,
            eps_class,
            peak,
            omega,
            inv_omega: T::one() / omega,
            sqrt_omega: omega.sqrt(),
            omega_i: c.omega_i.iter().map(|&x| T::lit(x)).collect(),
            decay: c.decay.iter().map(|&x| T::lit(x)).collect(),
            e_const: T::lit(c.e_const),
            inflation: c.inflation,
            sample_res: c.sample_res,
            curves,
        })
    }

    pub fn constants(&self) -> MetricConstants {
        MetricConstants {
            omega: self.omega.to_f64_lossy(),
            omega_i: self.omega_i.iter().map(|x| x.to_f64_lossy()).collect(),
            decay: self.decay.iter().map(|x| x.to_f64_lossy()).collect(),
            e_const: self.e_const.to_f64_lossy(),
            inflation: self.inflation,
            sample_res: self.sample_res,
        }
    }

    pub fn dim(&self) -> usize {
        self.curves.dim()
    }

    pub fn polytope(&self) -> &Polytope {
        &self.poly
    }

    pub fn curves(&self) -> &CurveSystem<T> {
        &self.curves
    }

    pub fn forms(&self) -> &[GoodForm<T>] {
        &self.forms
    }

    pub fn bump(&self) -> &BumpProfile<T> {
        &self.bump
    }

    pub fn omega(&self) -> T {
        self.omega
    }

    pub fn omega_i(&self) -> &[T] {
        &self.omega_i
    }

    pub fn decay(&self) -> &[T] {
        &self.decay
    }

    pub fn e_const(&self) -> T {
        self.e_const
    }

    /// `ε_i` of each curve's class.
    pub fn class_eps(&self) -> &[T] {
        &self.eps_class
    }

    /// `h_i(ℓ) = (|v_i|² / ε_i²) exp(-C_i ℓ²)`.
    #[inline]
    pub fn profile(&self, i: usize, ell: T) -> T {
        self.peak[i] * (-self.decay[i] * ell * ell).exp()
    }

    #[inline]
    pub fn conformal_factor_hit(&self, hit: Option<&TubeHit<T>>) -> T {
        match hit {
            Some(h) if h.coords.ell < self.bump.rho => {
                let ell = h.coords.ell;
                let (z, _) = self.bump.eval(ell);
                let hv = self.profile(h.curve, ell);
                if z == T::one() {
                    hv
                } else {
                    z * hv + (T::one() - z) * self.inv_omega
                }
            }
            _ => self.inv_omega,
        }
    }

    /// `F(x) = ζ h_i + (1 - ζ) / Ω` in the tube of `Γ_i`, `1/Ω` elsewhere.
    pub fn conformal_factor(&self, x: &[T]) -> T {
        self.conformal_factor_hit(self.curves.tube_locate(x).as_ref())
    }

    /// Speed factor `φ = F^{-1/2}`.
    #[inline]
    pub fn length_factor(&self, x: &[T]) -> T {
        match self.curves.tube_locate(x) {
            Some(h) if h.coords.ell < self.bump.rho => T::one() / self.conformal_factor_hit(Some(&h)).sqrt(),
            _ => self.sqrt_omega,
        }
    }

    /// `g*(η_i, η_i)^{1/2} = √F |η_i|` at `x`.
    pub fn dual_norm(&self, facet: usize, x: &[T]) -> T {
        let m = self.dim();
        let hit = self.curves.tube_locate(x);
        let mut buf = [T::zero(); MAX_DIM];
        self.forms[facet].eval_hit(hit.as_ref(), &self.bump, &mut buf);
        (self.conformal_factor_hit(hit.as_ref()) * dot(&buf[..m], &buf[..m])).sqrt()
    }

    /// Length of one straight segment in the metric.
    pub fn segment_length(&self, a: &[T], b: &[T]) -> T {
        let d: Vec<T> = a.iter().zip(b).map(|(&p, &q)| q - p).collect();
        let len = dot(&d, &d).sqrt();
        if len == T::zero() {
            return T::zero();
        }
        let mut x = vec![T::zero(); a.len()];
        let mut f = |t: T| {
            for c in 0..a.len() {
                x[c] = a[c] + t * d[c];
            }
            self.length_factor(&x)
        };
        len * adaptive_simpson_rel(&mut f, T::zero(), T::one(), T::lit(POLYLINE_REL_TOL), T::lit(1e-14))
    }

    /// Metric length of a polyline in the cover.
    pub fn polyline_length(&self, pts: &[Vec<T>]) -> T {
        pts.windows(2).map(|w| self.segment_length(&w[0], &w[1])).sum()
    }

    /// Checks `g*(ds_i, ds_i) = F / |v_i|²` on samples of each `U_ε(Γ_i)`:
    /// equal to `1/ε_i²` on the curve and below it by at least
    /// `(1 - exp(-C_i ℓ²)) / ε_i²` off the curve.
    pub fn certify_h1(&self, res: usize) -> H1Report {
        let mut report = H1Report {
            res,
            on_curve_max_rel_err: 0.0,
            max_margin_deficit: 0.0,
            strict: true,
            worst: None,
            pass: true,
        };
        let eps = self.curves.eps();
        for i in 0..self.curves.len() {
            let len = self.curves.direction_norm_sq(i).sqrt().to_f64_lossy();
            let n_s = ((res as f64 * len).ceil() as usize).max(8);
            let levels = ((res as f64 * eps.to_f64_lossy()).ceil() as usize).max(4);
            let radii = linspace(T::zero(), eps, levels);
            let vsq = self.curves.direction_norm_sq(i);
            let e2 = self.eps_class[i] * self.eps_class[i];
            for x in tube_samples(&self.curves, i, n_s, &radii) {
                let hit = self.curves.locate_on(i, &x);
                let ell = hit.coords.ell;
                // Normalized so that the on-curve value is 1.
                let g = (self.conformal_factor_hit(Some(&hit)) / vsq * e2).to_f64_lossy();
                if ell.to_f64_lossy() < 1e-12 {
                    let err = (g - 1.0).abs();
                    if err > report.on_curve_max_rel_err {
                        report.on_curve_max_rel_err = err;
                        if err > 1e-9 {
                            report.worst = Some(to_f64_vec(&x));
                        }
                    }
                    continue;
                }
                let need = 1.0 - (-(self.decay[i] * ell * ell)).exp().to_f64_lossy();
                let deficit = need - (1.0 - g);
                if deficit > report.max_margin_deficit {
                    report.max_margin_deficit = deficit;
                }
                if g >= 1.0 {
                    report.strict = false;
                    report.worst = Some(to_f64_vec(&x));
                }
            }
        }
        report.pass = report.strict && report.on_curve_max_rel_err <= 1e-9 && report.max_margin_deficit <= 1e-12;
        report
    }

    /// Maximizes `√F |η_i|` over a grid, tube samples and curve points for
    /// every facet; passes when all maxima are at most `1 + tol` and the
    /// value on the curves of each facet equals 1 within `1e-6`.
    pub fn certify_calibration(&self, res: usize, tol: f64) -> CalibrationReport {
        let m = self.dim();
        let mut pts: Vec<Vec<T>> = (0..res.pow(m as u32)).map(|k| grid_point(k, m, res)).collect();
        let mut on_curve: Vec<(usize, usize)> = Vec::new();
        for i in 0..self.curves.len() {
            let len = self.curves.direction_norm_sq(i).sqrt().to_f64_lossy();
            let n_s = ((res as f64 * len).ceil() as usize).max(8);
            let levels = ((res as f64 * self.curves.rho().to_f64_lossy()).ceil() as usize).max(8);
            let start = pts.len();
            pts.extend(tube_samples(&self.curves, i, n_s, &[T::zero()]));
            on_curve.push((start, pts.len()));
            pts.extend(tube_samples(
                &self.curves,
                i,
                n_s,
                &linspace(T::zero(), self.curves.rho(), levels)[1..],
            ));
        }
        let nf = self.forms.len();
        let values: Vec<Vec<f64>> = pts
            .par_iter()
            .map(|x| {
                let hit = self.curves.tube_locate(x);
                let f = self.conformal_factor_hit(hit.as_ref());
                let mut buf = [T::zero(); MAX_DIM];
                self.forms
                    .iter()
                    .map(|form| {
                        form.eval_hit(hit.as_ref(), &self.bump, &mut buf);
                        (f * dot(&buf[..m], &buf[..m])).sqrt().to_f64_lossy()
                    })
                    .collect()
            })
            .collect();
        let mut facets = Vec::with_capacity(nf);
        let mut pass = true;
        for fi in 0..nf {
            let (mut max, mut arg) = (f64::NEG_INFINITY, 0);
            for (k, v) in values.iter().enumerate() {
                if v[fi] > max {
                    max = v[fi];
                    arg = k;
                }
            }
            let lambda = &self.poly.facets()[fi].lambda;
            let mut attain_err: f64 = 0.0;
            let mut attained = Vec::new();
            for (j, &(a, b)) in on_curve.iter().enumerate() {
                let vt: &RationalVec = &self.poly.representatives()[j].v_tilde;
                let lv = lambda.dot(vt);
                if lv == num_traits::One::one() || -lv == num_traits::One::one() {
                    attained.push(j);
                    for v in &values[a..b] {
                        attain_err = attain_err.max((v[fi] - 1.0).abs());
                    }
                }
            }
            let ok = max <= 1.0 + tol && attain_err <= 1e-6 && !attained.is_empty();
            pass &= ok;
            facets.push(FacetCalibration {
                facet: fi,
                max,
                argmax: to_f64_vec(&pts[arg]),
                attaining_curves: attained,
                attain_err,
                pass: ok,
            });
        }
        CalibrationReport { res, tol, facets, pass }
    }

    /// Fails with the worst offender when either certificate fails.
    pub fn certify(&self, res: usize, tol: f64) -> Result<(H1Report, CalibrationReport)> {
        let h1 = self.certify_h1(res);
        if !h1.pass {
            return Err(Error::CertificationFailed(format!(
                "H1 at res {res}: on-curve error {:.3e}, margin deficit {:.3e}, strict {}, worst {:?}",
                h1.on_curve_max_rel_err, h1.max_margin_deficit, h1.strict, h1.worst
            )));
        }
        let cal = self.certify_calibration(res, tol);
        if let Some(f) = cal.facets.iter().find(|f| !f.pass) {
            return Err(Error::CertificationFailed(format!(
                "calibration of facet {}: max {:.6} at {:?}, on-curve error {:.3e}",
                f.facet, f.max, f.argmax, f.attain_err
            )));
        }
        Ok((h1, cal))
    }
}

fn to_f64_vec<T: Real>(x: &[T]) -> Vec<f64> {
    x.iter().map(|v| v.to_f64_lossy()).collect()
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct H1Report {
    pub res: usize,
    pub on_curve_max_rel_err: f64,
    pub max_margin_deficit: f64,
    pub strict: bool,
    pub worst: Option<Vec<f64>>,
    pub pass: bool,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct FacetCalibration {
    pub facet: usize,
    pub max: f64,
    pub argmax: Vec<f64>,
    pub attaining_curves: Vec<usize>,
    pub attain_err: f64,
    pub pass: bool,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct CalibrationReport {
    pub res: usize,
    pub tol: f64,
    pub facets: Vec<FacetCalibration>,
    pub pass: bool,
}
