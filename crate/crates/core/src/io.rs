//! Run configuration, manifests, caching and exports.

use std::fs;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::curves::{place_curves, CurveSystem, Placement};
use crate::error::{Error, Result};
use crate::forms::BumpProfile;
use crate::lemmapath::{build_lemma_path, verify_bound, BoundReport, LemmaPath};
use crate::metric::{CalibrationReport, H1Report, HedlundMetric, MetricConstants, DEFAULT_INFLATION};
use crate::polytope::{format_rational, parse_rational, Polytope, RationalVec};
use crate::solver::{read_volume, write_volume, FieldSidecar, Solver, SolverOptions, DEFAULT_BUDGET, DEFAULT_RADIUS};
use crate::stablenorm::{assemble_c, default_starts, sandwich_check, ConstantC, SandwichReport, Tolerances};

/// Environment variable naming the cache directory.
pub const CACHE_ENV: &str = "HEDLUND_CACHE_DIR";

fn default_sample_res() -> usize {
    64
}
fn default_res() -> usize {
    16
}
fn default_radius() -> usize {
    DEFAULT_RADIUS
}
fn default_inflation() -> f64 {
    DEFAULT_INFLATION
}
fn default_n_max() -> usize {
    5
}
fn default_budget() -> usize {
    DEFAULT_BUDGET
}
fn default_out() -> String {
    "out".into()
}
fn default_calibration_tol() -> f64 {
    2e-2
}
fn default_bound_tol() -> f64 {
    1e-2
}

/// All tolerances used by the certificates.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct ToleranceConfig {
    #[serde(flatten)]
    pub sandwich: Tolerances,
    pub calibration: f64,
    pub lemma_bound: f64,
}

impl Default for ToleranceConfig {
    fn default() -> Self {
        ToleranceConfig {
            sandwich: Tolerances::default(),
            calibration: default_calibration_tol(),
            lemma_bound: default_bound_tol(),
        }
    }
}

/// A run configuration. Coordinates are rational strings.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    pub dimension: usize,
    pub vertices: Vec<Vec<String>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub offsets: Option<Vec<Vec<String>>>,
    #[serde(default)]
    pub placement: Placement,
    #[serde(default)]
    pub seed: u64,
    /// Samples per unit for calibrating the constants and for certificates.
    #[serde(default = "default_sample_res")]
    pub sample_res: usize,
    /// Solver grid nodes per unit.
    #[serde(default = "default_res")]
    pub res: usize,
    #[serde(default = "default_radius")]
    pub stencil_radius: usize,
    #[serde(default = "default_inflation")]
    pub inflation: f64,
    #[serde(default = "default_n_max")]
    pub n_max: usize,
    #[serde(default)]
    pub w: Vec<Vec<i64>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub lemma_start: Option<Vec<String>>,
    #[serde(default = "default_budget")]
    pub budget: usize,
    #[serde(default = "default_out")]
    pub out_dir: String,
    #[serde(default)]
    pub tolerances: ToleranceConfig,
}

fn sha256_hex(bytes: &[u8]) -> String {
    hex::encode(Sha256::digest(bytes))
}

fn parse_point(p: &[String], field: &str, m: usize) -> Result<Vec<f64>> {
    if p.len() != m {
        return Err(Error::Parse {
            field: field.into(),
            message: format!("expected {m} coordinates, found {}", p.len()),
        });
    }
    p.iter()
        .enumerate()
        .map(|(c, s)| {
            parse_rational(s)
                .map(|q| num_traits::ToPrimitive::to_f64(&q).unwrap_or(f64::NAN))
                .map_err(|e| Error::Parse {
                    field: format!("{field}[{c}]"),
                    message: e.to_string(),
                })
        })
        .collect()
}

impl RunConfig {
    /// A configuration for the given vertices with every default filled in.
    pub fn new(vertices: Vec<Vec<String>>) -> Self {
        RunConfig {
            dimension: vertices.first().map_or(0, Vec::len),
            vertices,
            offsets: None,
            placement: Placement::Deterministic,
            seed: 0,
            sample_res: default_sample_res(),
            res: default_res(),
            stencil_radius: default_radius(),
            inflation: default_inflation(),
            n_max: default_n_max(),
            w: Vec::new(),
            lemma_start: None,
            budget: default_budget(),
            out_dir: default_out(),
            tolerances: ToleranceConfig::default(),
        }
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let cfg: RunConfig = serde_json::from_str(text)?;
        cfg.check()?;
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<Self> {
        Self::from_json(&fs::read_to_string(path)?)
    }

    /// Canonical JSON text.
    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }

    /// SHA-256 of the canonical text.
    pub fn hash(&self) -> Result<String> {
        Ok(sha256_hex(serde_json::to_string(self)?.as_bytes()))
    }

    /// Field-level checks that do not need the geometry.
    pub fn check(&self) -> Result<()> {
        if self.dimension < 3 {
            return Err(Error::DimensionTooSmall(self.dimension));
        }
        for (i, v) in self.vertices.iter().enumerate() {
            if v.len() != self.dimension {
                return Err(Error::Parse {
                    field: format!("vertices[{i}]"),
                    message: format!("expected {} coordinates, found {}", self.dimension, v.len()),
                });
            }
            for (c, s) in v.iter().enumerate() {
                parse_rational(s).map_err(|e| Error::Parse {
                    field: format!("vertices[{i}][{c}]"),
                    message: e.to_string(),
                })?;
            }
        }
        for (i, w) in self.w.iter().enumerate() {
            if w.len() != self.dimension {
                return Err(Error::Parse {
                    field: format!("w[{i}]"),
                    message: format!("expected {} coordinates, found {}", self.dimension, w.len()),
                });
            }
        }
        if let Some(offs) = &self.offsets {
            for (i, o) in offs.iter().enumerate() {
                parse_point(o, &format!("offsets[{i}]"), self.dimension)?;
            }
        }
        if let Some(x) = &self.lemma_start {
            parse_point(x, "lemma_start", self.dimension)?;
        }
        if !(self.inflation >= 1.0 && self.inflation.is_finite()) {
            return Err(Error::InvalidArgument(format!("inflation {} must be >= 1", self.inflation)));
        }
        if self.n_max == 0 || self.res == 0 || self.stencil_radius == 0 || self.sample_res == 0 {
            return Err(Error::InvalidArgument(
                "n_max, res, stencil_radius and sample_res must be positive".into(),
            ));
        }
        Ok(())
    }

    pub fn polytope(&self) -> Result<Polytope> {
        self.check()?;
        Polytope::from_strings(&self.vertices)
    }

    pub fn curves(&self, poly: &Polytope) -> Result<CurveSystem<f64>> {
        match &self.offsets {
            Some(offs) => {
                if offs.len() != poly.n_classes() {
                    return Err(Error::Parse {
                        field: "offsets".into(),
                        message: format!("expected {} offsets, found {}", poly.n_classes(), offs.len()),
                    });
                }
                let pts = offs
                    .iter()
                    .enumerate()
                    .map(|(i, o)| parse_point(o, &format!("offsets[{i}]"), self.dimension))
                    .collect::<Result<Vec<_>>>()?;
                CurveSystem::from_offsets(pts, poly.classes())
            }
            None => place_curves(&poly.classes(), self.placement, self.seed, 0.0),
        }
    }

    pub fn solver_options(&self) -> SolverOptions {
        SolverOptions {
            res: self.res,
            radius: self.stencil_radius,
            budget: self.budget,
        }
    }

    pub fn lemma_start_point(&self) -> Result<Vec<f64>> {
        match &self.lemma_start {
            Some(x) => parse_point(x, "lemma_start", self.dimension),
            None => Ok((0..self.dimension).map(|c| (2 * c + 1) as f64 / (2 * self.dimension + 3) as f64).collect()),
        }
    }

    /// Key of everything the metric depends on.
    pub fn metric_key(&self) -> Result<String> {
        let key = serde_json::json!({
            "vertices": self.vertices,
            "offsets": self.offsets,
            "placement": self.placement,
            "seed": self.seed,
            "sample_res": self.sample_res,
            "inflation": self.inflation,
        });
        Ok(sha256_hex(serde_json::to_string(&key)?.as_bytes()))
    }
}

/// Cache directory: `$HEDLUND_CACHE_DIR`, else `<out>/cache`.
pub fn cache_dir(cfg: &RunConfig) -> PathBuf {
    match std::env::var_os(CACHE_ENV) {
        Some(d) if !d.is_empty() => PathBuf::from(d),
        _ => Path::new(&cfg.out_dir).join("cache"),
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
struct CachedMetric {
    key: String,
    offsets: Vec<Vec<f64>>,
    constants: MetricConstants,
}

/// Builds the metric, reusing cached constants when the key matches.
pub fn load_or_build_metric(cfg: &RunConfig, poly: &Polytope) -> Result<(HedlundMetric<f64>, bool)> {
    let key = cfg.metric_key()?;
    let path = cache_dir(cfg).join(format!("metric-{}.json", &key[..16]));
    if let Ok(text) = fs::read_to_string(&path) {
        if let Ok(c) = serde_json::from_str::<CachedMetric>(&text) {
            if c.key == key {
                let curves = CurveSystem::from_offsets(c.offsets, poly.classes())?;
                return Ok((HedlundMetric::from_constants(poly, curves, &c.constants)?, true));
            }
        }
    }
    let curves = cfg.curves(poly)?;
    let offsets = curves.offsets().to_vec();
    let metric = HedlundMetric::calibrate(poly, curves, cfg.sample_res, cfg.inflation)?;
    let entry = CachedMetric {
        key,
        offsets,
        constants: metric.constants(),
    };
    fs::create_dir_all(path.parent().expect("cache file has a parent"))?;
    fs::write(&path, serde_json::to_string_pretty(&entry)?)?;
    Ok((metric, false))
}

fn distance_key(cfg: &RunConfig, metric: &HedlundMetric<f64>) -> Result<String> {
    let key = serde_json::json!({
        "constants": metric.constants(),
        "offsets": metric.curves().offsets(),
        "classes": metric.curves().directions(),
        "res": cfg.res,
        "radius": cfg.stencil_radius,
    });
    Ok(sha256_hex(serde_json::to_string(&key)?.as_bytes()))
}

/// `diam̂` from the cached torus distance field of the origin when its key
/// matches, otherwise computed and cached.
pub fn cached_diameter(cfg: &RunConfig, metric: &HedlundMetric<f64>, solver: &Solver<f64>) -> Result<(f64, bool)> {
    let key = distance_key(cfg, metric)?;
    let dir = cache_dir(cfg);
    let stem = format!("torus-origin-{}", &key[..16]);
    let scale = 2.0 * (1.0 + solver.overhead());
    if let Ok((values, side)) = read_volume(&dir, &stem) {
        if side.manifest_hash == key {
            return Ok((scale * values.iter().cloned().fold(0.0, f64::max), true));
        }
    }
    let m = solver.dim();
    let values = solver.torus_field(&[(vec![0; m], 0.0)]);
    let side = FieldSidecar {
        name: "torus distance from origin".into(),
        dims: vec![cfg.res; m],
        components: 1,
        h: 1.0 / cfg.res as f64,
        res: cfg.res,
        stencil_radius: Some(cfg.stencil_radius),
        origin: vec![0.0; m],
        manifest_hash: key,
        dtype: "f64le".into(),
        order: "row-major, last axis fastest".into(),
    };
    write_volume(&dir, &stem, &values, &side)?;
    Ok((scale * values.iter().cloned().fold(0.0, f64::max), false))
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct CurveRecord {
    pub class: Vec<i64>,
    pub epsilon: String,
    pub offset: Vec<f64>,
    pub length: f64,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct Certificates {
    pub h1: Vec<H1Report>,
    pub calibration: Vec<CalibrationReport>,
    pub max_length_error: f64,
    pub pass: bool,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct RunManifest {
    pub config_hash: String,
    pub manifest_hash: String,
    pub dimension: usize,
    pub facets: usize,
    pub kappa: usize,
    pub curves: Vec<CurveRecord>,
    pub separation: f64,
    pub rho: f64,
    pub eps: f64,
    pub constants: MetricConstants,
    pub overhead: f64,
    pub c_hat: ConstantC,
    pub certificates: Certificates,
    pub artifacts: Vec<String>,
}

impl RunManifest {
    fn seal(mut self) -> Result<Self> {
        self.manifest_hash = String::new();
        self.manifest_hash = sha256_hex(serde_json::to_string(&self)?.as_bytes());
        Ok(self)
    }
}

/// Everything built from a configuration.
pub struct Pipeline {
    pub config: RunConfig,
    pub poly: Polytope,
    pub metric: HedlundMetric<f64>,
    pub solver: Solver<f64>,
    pub c_hat: ConstantC,
}

impl Pipeline {
    pub fn build(cfg: &RunConfig) -> Result<Pipeline> {
        let poly = cfg.polytope()?;
        let (metric, _) = load_or_build_metric(cfg, &poly)?;
        let solver = Solver::new(&metric, cfg.solver_options())?;
        let (diam, _) = cached_diameter(cfg, &metric, &solver)?;
        let gap = solver.line_gap(metric.curves());
        let c_hat = assemble_c(diam, gap, metric.e_const(), poly.kappa());
        Ok(Pipeline {
            config: cfg.clone(),
            poly,
            metric,
            solver,
            c_hat,
        })
    }

    fn out_dir(&self) -> PathBuf {
        PathBuf::from(&self.config.out_dir)
    }

    /// Certificates at the configured sample resolution and at double it
    /// for the calibration bound, plus the curve lengths.
    pub fn certify(&self) -> Certificates {
        let r = self.config.sample_res;
        let tol = self.config.tolerances.calibration;
        let h1 = vec![self.metric.certify_h1(r / 2), self.metric.certify_h1(r)];
        let calibration = vec![self.metric.certify_calibration(r, tol)];
        let max_length_error = self.curve_lengths().iter().map(|(l, e)| (l - e).abs()).fold(0.0, f64::max);
        let pass = h1.iter().all(|h| h.pass) && calibration.iter().all(|c| c.pass) && max_length_error <= 1e-4;
        Certificates {
            h1,
            calibration,
            max_length_error,
            pass,
        }
    }

    /// `(L_g(γ_i), ε_i)` for every curve.
    pub fn curve_lengths(&self) -> Vec<(f64, f64)> {
        let c = self.metric.curves();
        (0..c.len())
            .map(|i| {
                let pts = vec![c.curve_point(i, 0.0, false), c.curve_point(i, 1.0, false)];
                (self.metric.polyline_length(&pts), self.metric.class_eps()[i])
            })
            .collect()
    }

    pub fn manifest(&self, certificates: Certificates, artifacts: Vec<String>) -> Result<RunManifest> {
        let c = self.metric.curves();
        let lengths = self.curve_lengths();
        RunManifest {
            config_hash: self.config.hash()?,
            manifest_hash: String::new(),
            dimension: self.poly.dim(),
            facets: self.poly.facets().len(),
            kappa: self.poly.kappa(),
            curves: (0..c.len())
                .map(|i| CurveRecord {
                    class: c.directions()[i].clone(),
                    epsilon: format_rational(&self.poly.representatives()[i].epsilon),
                    offset: c.offsets()[i].clone(),
                    length: lengths[i].0,
                })
                .collect(),
            separation: c.separation(),
            rho: c.rho(),
            eps: c.eps(),
            constants: self.metric.constants(),
            overhead: self.solver.overhead(),
            c_hat: self.c_hat.clone(),
            certificates,
            artifacts,
        }
        .seal()
    }

    /// Certifies the metric and writes `manifest.json`.
    pub fn cmd_build(&self) -> Result<RunManifest> {
        let certs = self.certify();
        let out = self.out_dir();
        fs::create_dir_all(&out)?;
        let manifest = self.manifest(certs, vec!["manifest.json".into()])?;
        fs::write(out.join("manifest.json"), serde_json::to_string_pretty(&manifest)?)?;
        Ok(manifest)
    }

    /// Sandwich reports for every configured `w`, one CSV and one JSON each.
    pub fn cmd_stable_norm(&self) -> Result<Vec<std::result::Result<SandwichReport, Error>>> {
        let out = self.out_dir();
        fs::create_dir_all(&out)?;
        let starts = default_starts(&self.metric, &self.solver);
        let mut reports = Vec::new();
        for w in &self.config.w {
            let r = sandwich_check(
                &self.metric,
                &self.solver,
                &self.c_hat,
                w,
                self.config.n_max,
                &starts,
                &self.config.tolerances.sandwich,
            );
            if let Ok(rep) = &r {
                let stem = format!("stable_norm_{}", vec_tag(w));
                fs::write(out.join(format!("{stem}.csv")), rep.to_csv()?)?;
                fs::write(out.join(format!("{stem}.json")), serde_json::to_string_pretty(rep)?)?;
            }
            reports.push(r);
        }
        Ok(reports)
    }

    /// Builds and certifies the lemma path for `w`.
    pub fn cmd_lemma_path(&self, w: &[i64]) -> Result<(LemmaPath, BoundReport)> {
        let (facet, n) = self.poly.integer_decomposition(w)?;
        let x = self.config.lemma_start_point()?;
        let path = build_lemma_path(&self.metric, &self.solver, &x, facet, &n)?;
        let report = verify_bound(&self.metric, &self.c_hat, &path, self.config.tolerances.lemma_bound);
        let out = self.out_dir();
        fs::create_dir_all(&out)?;
        let stem = format!("lemma_path_{}", vec_tag(w));
        fs::write(out.join(format!("{stem}.csv")), path.to_csv()?)?;
        fs::write(out.join(format!("{stem}.json")), serde_json::to_string_pretty(&report)?)?;
        Ok((path, report))
    }

    /// Writes a sampled field of the metric as a volume.
    pub fn cmd_export_field(&self, field: &FieldKind, res: usize) -> Result<FieldSidecar> {
        let manifest_hash = self.manifest(
            Certificates {
                h1: vec![],
                calibration: vec![],
                max_length_error: 0.0,
                pass: false,
            },
            vec![],
        )?
        .constants_hash();
        let (values, sidecar) = export_field(&self.metric, field, res, &manifest_hash)?;
        write_volume(&self.out_dir(), &field.stem(), &values, &sidecar)?;
        Ok(sidecar)
    }
}

impl RunManifest {
    /// Hash of the metric-defining part of the manifest.
    pub fn constants_hash(&self) -> String {
        let key = serde_json::json!({
            "config": self.config_hash,
            "constants": self.constants,
            "curves": self.curves.iter().map(|c| (&c.class, &c.offset)).collect::<Vec<_>>(),
        });
        sha256_hex(key.to_string().as_bytes())
    }
}

fn vec_tag(w: &[i64]) -> String {
    w.iter().map(|x| x.to_string()).collect::<Vec<_>>().join("_")
}

/// Fields that can be exported.
#[derive(Clone, Debug, PartialEq, Eq)]
pub enum FieldKind {
    /// The conformal factor `F`.
    Conformal,
    /// The speed factor `φ = F^{-1/2}`.
    Speed,
    /// The good form of one facet, `m` components per node.
    Eta(usize),
}

impl FieldKind {
    pub fn parse(s: &str) -> Result<FieldKind> {
        match s {
            "F" | "f" => Ok(FieldKind::Conformal),
            "phi" => Ok(FieldKind::Speed),
            _ => s
                .strip_prefix("eta")
                .map(|r| r.trim_start_matches(['_', ':']))
                .and_then(|r| if r.is_empty() { Some(0) } else { r.parse().ok() })
                .map(FieldKind::Eta)
                .ok_or_else(|| Error::Parse {
                    field: "field".into(),
                    message: format!("unknown field {s:?}; expected F, phi or eta_<facet>"),
                }),
        }
    }

    pub fn stem(&self) -> String {
        match self {
            FieldKind::Conformal => "field_F".into(),
            FieldKind::Speed => "field_phi".into(),
            FieldKind::Eta(i) => format!("field_eta_{i}"),
        }
    }
}

/// Samples a field on the grid `k / res` of `[0, 1)^m`, last axis fastest.
pub fn export_field(
    metric: &HedlundMetric<f64>,
    field: &FieldKind,
    res: usize,
    manifest_hash: &str,
) -> Result<(Vec<f64>, FieldSidecar)> {
    use rayon::prelude::*;
    let m = metric.dim();
    if let FieldKind::Eta(i) = field {
        if *i >= metric.forms().len() {
            return Err(Error::InvalidArgument(format!("no facet {i}")));
        }
    }
    let bump: &BumpProfile<f64> = metric.bump();
    let total = res.pow(m as u32);
    let values: Vec<Vec<f64>> = (0..total)
        .into_par_iter()
        .map(|mut idx| {
            let mut x = vec![0.0; m];
            for c in (0..m).rev() {
                x[c] = (idx % res) as f64 / res as f64;
                idx /= res;
            }
            match field {
                FieldKind::Conformal => vec![metric.conformal_factor(&x)],
                FieldKind::Speed => vec![metric.length_factor(&x)],
                FieldKind::Eta(i) => metric.forms()[*i].eval(metric.curves(), bump, &x),
            }
        })
        .collect();
    let components = if matches!(field, FieldKind::Eta(_)) { m } else { 1 };
    let sidecar = FieldSidecar {
        name: field.stem().trim_start_matches("field_").into(),
        dims: vec![res; m],
        components,
        h: 1.0 / res as f64,
        res,
        stencil_radius: None,
        origin: vec![0.0; m],
        manifest_hash: manifest_hash.into(),
        dtype: "f64le".into(),
        order: "row-major, last axis fastest, components innermost".into(),
    };
    Ok((values.concat(), sidecar))
}

/// Outcome of `validate`.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct ValidationReport {
    pub pass: bool,
    pub messages: Vec<String>,
}

pub fn cmd_validate(cfg: &RunConfig) -> ValidationReport {
    let mut messages = Vec::new();
    let poly = match cfg.polytope() {
        Ok(p) => p,
        Err(e) => {
            return ValidationReport {
                pass: false,
                messages: vec![e.to_string()],
            }
        }
    };
    messages.push(format!(
        "polytope: dimension {}, {} vertex pairs, {} facets, kappa {}",
        poly.dim(),
        poly.n_classes(),
        poly.facets().len(),
        poly.kappa()
    ));
    match cfg.curves(&poly) {
        Ok(c) => messages.push(format!(
            "curves: separation {:.6}, rho {:.6}, eps {:.6}",
            c.separation(),
            c.rho(),
            c.eps()
        )),
        Err(e) => {
            messages.push(e.to_string());
            return ValidationReport { pass: false, messages };
        }
    }
    for w in &cfg.w {
        match poly.integer_decomposition(w) {
            Ok((f, n)) => messages.push(format!(
                "w {w:?}: facet {f}, coefficients {n:?}, norm {}",
                format_rational(&poly.norm(&RationalVec::from_ints(w)))
            )),
            Err(e) => {
                messages.push(e.to_string());
                return ValidationReport { pass: false, messages };
            }
        }
    }
    ValidationReport { pass: true, messages }
}

/// Human-readable summary of a manifest.
pub fn render_report(manifest: &RunManifest) -> String {
    let mut s = String::new();
    s.push_str(&format!("manifest {}\n", manifest.manifest_hash));
    s.push_str(&format!("config   {}\n", manifest.config_hash));
    s.push_str(&format!(
        "dimension {}, facets {}, kappa {}\n",
        manifest.dimension, manifest.facets, manifest.kappa
    ));
    s.push_str(&format!(
        "separation {:.6}, rho {:.6}, eps {:.6}\n",
        manifest.separation, manifest.rho, manifest.eps
    ));
    for c in &manifest.curves {
        s.push_str(&format!(
            "curve {:?}: eps_i {}, offset {:?}, length {:.9}\n",
            c.class, c.epsilon, c.offset, c.length
        ));
    }
    let k = &manifest.constants;
    s.push_str(&format!(
        "Omega {:.6}, Omega_i {:?}, C_i {:?}, e {:.6}, inflation {}\n",
        k.omega, k.omega_i, k.decay, k.e_const, k.inflation
    ));
    let c = &manifest.c_hat;
    s.push_str(&format!(
        "diam {:.6}, D {:.6}, C {:.6}, stencil overhead {:.6}\n",
        c.diam, c.line_gap, c.value, manifest.overhead
    ));
    for h in &manifest.certificates.h1 {
        s.push_str(&format!(
            "H1 at {}: on-curve error {:.3e}, strict {}, pass {}\n",
            h.res, h.on_curve_max_rel_err, h.strict, h.pass
        ));
    }
    for cal in &manifest.certificates.calibration {
        let worst = cal.facets.iter().map(|f| f.max).fold(f64::NEG_INFINITY, f64::max);
        s.push_str(&format!(
            "calibration at {}: max {:.9} (tol {}), pass {}\n",
            cal.res, worst, cal.tol, cal.pass
        ));
    }
    s.push_str(&format!(
        "curve length error {:.3e}\ncertificates pass: {}\n",
        manifest.certificates.max_length_error, manifest.certificates.pass
    ));
    s
}
