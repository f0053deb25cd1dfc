//! Straight closed geodesics on the flat torus and their tubular coordinates.

use std::collections::BTreeSet;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::scalar::{dot, ints_to_real, Real, MAX_DIM};

/// Tube radius cap on the unit torus.
pub const RHO_CAP: f64 = 0.25;
/// Shrink factor applied to the admissible tube radius.
pub const RHO_SHRINK: f64 = 0.9;
/// Candidate offsets live on a lattice of this many points per unit.
pub const OFFSET_GRID: usize = 8;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "lowercase")]
pub enum Placement {
    #[default]
    Deterministic,
    Seeded,
}

/// Tube coordinates of a point: curve parameter and normal distance.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct TubeCoords<T> {
    pub s: T,
    pub ell: T,
}

/// Result of locating a point relative to one curve.
#[derive(Clone, Copy, Debug)]
pub struct TubeHit<T> {
    pub curve: usize,
    pub coords: TubeCoords<T>,
    /// Normal displacement from the nearest curve point to `x`.
    pub normal: [T; MAX_DIM],
    /// Lattice vector `k` of the nearest translate: `x - b - k = s v + normal`.
    pub shift: [i64; MAX_DIM],
}

#[derive(Clone, Debug)]
pub struct CurveSystem<T> {
    dim: usize,
    offsets: Vec<Vec<T>>,
    directions: Vec<Vec<i64>>,
    dir_real: Vec<Vec<T>>,
    dir_norm_sq: Vec<T>,
    /// Samples per period used to find the nearest lattice translate.
    locate_samples: Vec<usize>,
    separation: T,
    self_separation: T,
    rho: T,
    eps: T,
}

fn gcd(a: i64, b: i64) -> i64 {
    if b == 0 {
        a.abs()
    } else {
        gcd(b, a % b)
    }
}

pub fn is_primitive(v: &[i64]) -> bool {
    v.iter().fold(0, |g, &x| gcd(g, x)) == 1
}

fn parallel(a: &[i64], b: &[i64]) -> bool {
    (0..a.len()).all(|i| (0..a.len()).all(|j| a[i] * b[j] == a[j] * b[i]))
}

fn inf_norm(v: &[i64]) -> i64 {
    v.iter().map(|x| x.abs()).max().unwrap_or(0)
}

/// Distance between the full lines `p + R a` and `q + R b`.
fn line_distance<T: Real>(d: &[T], a: &[T], b: Option<&[T]>) -> T {
    let m = d.len();
    let mut r = [T::zero(); MAX_DIM];
    r[..m].copy_from_slice(d);
    let mut basis: Vec<[T; MAX_DIM]> = Vec::with_capacity(2);
    for dir in std::iter::once(a).chain(b) {
        let mut e = [T::zero(); MAX_DIM];
        e[..m].copy_from_slice(dir);
        for f in &basis {
            let c = dot(&e[..m], &f[..m]);
            for k in 0..m {
                e[k] -= c * f[k];
            }
        }
        let n = dot(&e[..m], &e[..m]).sqrt();
        for x in e[..m].iter_mut() {
            *x = *x / n;
        }
        basis.push(e);
    }
    for f in &basis {
        let c = dot(&r[..m], &f[..m]);
        for k in 0..m {
            r[k] -= c * f[k];
        }
    }
    dot(&r[..m], &r[..m]).sqrt()
}

/// Lattice translates `k` that can realise the minimal distance between the
/// lines `p + R a + Z^m` and `q + R b`.
fn candidate_shifts<T: Real>(p: &[T], a: &[i64], q: &[T], b: &[i64]) -> BTreeSet<Vec<i64>> {
    let m = p.len();
    let qa = 4 * inf_norm(a).max(1) as usize;
    let qb = 4 * inf_norm(b).max(1) as usize;
    let mut out = BTreeSet::new();
    let window: Vec<Vec<i64>> = (0..3usize.pow(m as u32))
        .map(|mut c| {
            (0..m)
                .map(|_| {
                    let d = (c % 3) as i64 - 1;
                    c /= 3;
                    d
                })
                .collect()
        })
        .collect();
    for ia in 0..qa {
        let t = ia as f64 / qa as f64;
        for ib in 0..qb {
            let s = ib as f64 / qb as f64;
            let centre: Vec<i64> = (0..m)
                .map(|c| {
                    (q[c].to_f64_lossy() + s * b[c] as f64 - p[c].to_f64_lossy() - t * a[c] as f64).round() as i64
                })
                .collect();
            for w in &window {
                out.insert(centre.iter().zip(w).map(|(x, y)| x + y).collect());
            }
        }
    }
    out
}

impl<T: Real> CurveSystem<T> {
    /// Builds a system from explicit offsets and primitive directions. Radii
    /// are chosen by [`CurveSystem::choose_radii`].
    pub fn from_offsets(offsets: Vec<Vec<T>>, directions: Vec<Vec<i64>>) -> Result<Self> {
        let mut sys = Self::unchecked(offsets, directions)?;
        let (rho, eps) = sys.choose_radii()?;
        sys.rho = rho;
        sys.eps = eps;
        Ok(sys)
    }

    fn unchecked(offsets: Vec<Vec<T>>, directions: Vec<Vec<i64>>) -> Result<Self> {
        let dim = directions.first().map_or(0, Vec::len);
        if dim < 3 {
            return Err(Error::DimensionTooSmall(dim));
        }
        if dim > MAX_DIM {
            return Err(Error::DimensionTooLarge(dim));
        }
        if offsets.len() != directions.len() {
            return Err(Error::InvalidArgument(format!(
                "{} offsets for {} curves",
                offsets.len(),
                directions.len()
            )));
        }
        for (b, v) in offsets.iter().zip(&directions) {
            if b.len() != dim || v.len() != dim {
                return Err(Error::DimensionMismatch {
                    expected: dim,
                    found: b.len().max(v.len()),
                });
            }
            if !is_primitive(v) {
                return Err(Error::NotPrimitive(v.clone()));
            }
        }
        let offsets: Vec<Vec<T>> = offsets
            .into_iter()
            .map(|b| b.into_iter().map(|x| x - x.floor()).collect())
            .collect();
        let dir_real: Vec<Vec<T>> = directions.iter().map(|v| ints_to_real(v)).collect();
        let dir_norm_sq = dir_real.iter().map(|v| dot(v, v)).collect();
        let locate_samples = directions.iter().map(|v| 4 * inf_norm(v) as usize).collect();
        let mut sys = CurveSystem {
            dim,
            offsets,
            directions,
            dir_real,
            dir_norm_sq,
            locate_samples,
            separation: T::infinity(),
            self_separation: T::infinity(),
            rho: T::zero(),
            eps: T::zero(),
        };
        sys.separation = sys.system_separation();
        sys.self_separation = (0..sys.len()).map(|i| sys.self_separation_of(i)).fold(T::infinity(), T::min);
        Ok(sys)
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn len(&self) -> usize {
        self.directions.len()
    }

    pub fn is_empty(&self) -> bool {
        self.directions.is_empty()
    }

    pub fn offsets(&self) -> &[Vec<T>] {
        &self.offsets
    }

    pub fn directions(&self) -> &[Vec<i64>] {
        &self.directions
    }

    pub fn direction_real(&self, i: usize) -> &[T] {
        &self.dir_real[i]
    }

    /// `|v_i|^2`.
    pub fn direction_norm_sq(&self, i: usize) -> T {
        self.dir_norm_sq[i]
    }

    pub fn rho(&self) -> T {
        self.rho
    }

    pub fn eps(&self) -> T {
        self.eps
    }

    /// Minimal torus distance between distinct curves (`+inf` for one curve).
    pub fn separation(&self) -> T {
        self.separation
    }

    /// Minimal distance between a curve and its own distinct lattice translates.
    pub fn self_separation(&self) -> T {
        self.self_separation
    }

    /// Euclidean torus distance between curves `i` and `j`.
    pub fn min_pair_separation(&self, i: usize, j: usize) -> T {
        Self::pair_only(&self.offsets[i], &self.directions[i], &self.offsets[j], &self.directions[j])
    }

    fn self_separation_of(&self, i: usize) -> T {
        let v = &self.directions[i];
        let zero = vec![T::zero(); self.dim];
        let mut best = T::infinity();
        let mut d = vec![T::zero(); self.dim];
        for k in candidate_shifts(&zero, v, &zero, v) {
            if parallel(&k, v) {
                continue;
            }
            for c in 0..self.dim {
                d[c] = T::lit(k[c] as f64);
            }
            best = best.min(line_distance(&d, &self.dir_real[i], None));
        }
        best
    }

    fn system_separation(&self) -> T {
        let mut best = T::infinity();
        for i in 0..self.len() {
            for j in i + 1..self.len() {
                best = best.min(self.min_pair_separation(i, j));
            }
        }
        best
    }

    /// `rho = 0.9 * min(separation / 2, self_separation / 2, 1/4)`, `eps = rho / 2`.
    pub fn choose_radii(&self) -> Result<(T, T)> {
        choose_radii(self.separation, self.self_separation)
    }

    /// `γ_i(t) = b_i + t v_i`, reduced mod 1 when `torus` is set.
    pub fn curve_point(&self, i: usize, t: T, torus: bool) -> Vec<T> {
        self.offsets[i]
            .iter()
            .zip(&self.dir_real[i])
            .map(|(&b, &v)| {
                let x = b + t * v;
                if torus {
                    x - x.floor()
                } else {
                    x
                }
            })
            .collect()
    }

    /// Nearest lattice translate of curve `i` to `x`, with tube coordinates.
    /// `s` is reduced to `[0, 1)`.
    pub fn locate_on(&self, i: usize, x: &[T]) -> TubeHit<T> {
        let m = self.dim;
        let b = &self.offsets[i];
        let v = &self.dir_real[i];
        let nsq = self.dir_norm_sq[i];
        let q = self.locate_samples[i];
        let mut u = [T::zero(); MAX_DIM];
        for c in 0..m {
            u[c] = x[c] - b[c];
        }
        let mut best_ell_sq = T::infinity();
        let mut best_shift = [0i64; MAX_DIM];
        let mut last = [i64::MIN; MAX_DIM];
        let mut r = [T::zero(); MAX_DIM];
        for k in 0..q {
            let t = T::lit(k as f64 / q as f64);
            let mut shift = [0i64; MAX_DIM];
            for c in 0..m {
                shift[c] = (u[c] - t * v[c]).round().to_i64().unwrap_or(0);
            }
            if shift[..m] == last[..m] {
                continue;
            }
            last = shift;
            for c in 0..m {
                r[c] = u[c] - T::lit(shift[c] as f64);
            }
            let rv = dot(&r[..m], v);
            let ell_sq = (dot(&r[..m], &r[..m]) - rv * rv / nsq).max(T::zero());
            if ell_sq < best_ell_sq {
                best_ell_sq = ell_sq;
                best_shift = shift;
            }
        }
        for c in 0..m {
            r[c] = u[c] - T::lit(best_shift[c] as f64);
        }
        let s_raw = dot(&r[..m], v) / nsq;
        let whole = s_raw.floor();
        let s = s_raw - whole;
        let whole_i = whole.to_i64().unwrap_or(0);
        let mut normal = [T::zero(); MAX_DIM];
        let mut shift = [0i64; MAX_DIM];
        for c in 0..m {
            normal[c] = r[c] - s_raw * v[c];
            shift[c] = best_shift[c] + whole_i * self.directions[i][c];
        }
        let ell = dot(&normal[..m], &normal[..m]).sqrt();
        TubeHit {
            curve: i,
            coords: TubeCoords { s, ell },
            normal,
            shift,
        }
    }

    /// The curve whose `rho`-tube contains `x`, if any. Works for points of
    /// the torus and of the cover alike.
    pub fn tube_locate(&self, x: &[T]) -> Option<TubeHit<T>> {
        (0..self.len())
            .map(|i| self.locate_on(i, x))
            .find(|h| h.coords.ell < self.rho)
    }

    /// Lifted coordinate `s̄_i(x) = <x - b_i, v_i> / |v_i|^2` on the cover.
    pub fn lifted_s(&self, i: usize, x: &[T]) -> T {
        let d: Vec<T> = x.iter().zip(&self.offsets[i]).map(|(&a, &b)| a - b).collect();
        dot(&d, &self.dir_real[i]) / self.dir_norm_sq[i]
    }
}

/// Tube radii from the curve separations. Fails when the curves touch.
pub fn choose_radii<T: Real>(separation: T, self_separation: T) -> Result<(T, T)> {
    if !(separation > T::zero()) || !(self_separation > T::zero()) {
        return Err(Error::PlacementFailed {
            best: separation.min(self_separation).to_f64_lossy(),
            required: 0.0,
        });
    }
    let half = T::lit(0.5);
    let rho = T::lit(RHO_SHRINK)
        * (separation * half)
            .min(self_separation * half)
            .min(T::lit(RHO_CAP));
    Ok((rho, rho * half))
}

/// Places straight closed geodesics in the given primitive classes with
/// offsets on a `1/8` lattice, maximising the minimal separation.
pub fn place_curves<T: Real>(
    classes: &[Vec<i64>],
    strategy: Placement,
    seed: u64,
    min_separation: f64,
) -> Result<CurveSystem<T>> {
    let dim = classes.first().map_or(0, Vec::len);
    if dim < 3 {
        return Err(Error::DimensionTooSmall(dim));
    }
    if dim > MAX_DIM {
        return Err(Error::DimensionTooLarge(dim));
    }
    for v in classes {
        if !is_primitive(v) {
            return Err(Error::NotPrimitive(v.clone()));
        }
    }
    let n_cand = OFFSET_GRID.pow(dim as u32);
    let candidate = |mut idx: usize| -> Vec<T> {
        let mut out = vec![T::zero(); dim];
        for c in (0..dim).rev() {
            out[c] = T::lit((idx % OFFSET_GRID) as f64 / OFFSET_GRID as f64);
            idx /= OFFSET_GRID;
        }
        out
    };
    let mut order: Vec<usize> = (0..n_cand).collect();
    let mut curve_order: Vec<usize> = (0..classes.len()).collect();
    if strategy == Placement::Seeded {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        order.shuffle(&mut rng);
        curve_order[1..].shuffle(&mut rng);
    }

    let mut offsets: Vec<Vec<T>> = vec![vec![T::zero(); dim]; classes.len()];
    let score = |offsets: &[Vec<T>], placed: &[usize], i: usize, cand: &[T]| -> T {
        let mut best = T::infinity();
        for &j in placed {
            if j == i {
                continue;
            }
            let pair = CurveSystem::<T>::pair_only(cand, &classes[i], &offsets[j], &classes[j]);
            best = best.min(pair);
        }
        best
    };
    let mut placed: Vec<usize> = Vec::new();
    for &i in &curve_order {
        let mut best = (T::neg_infinity(), 0usize);
        for &c in &order {
            let s = score(&offsets, &placed, i, &candidate(c));
            if s > best.0 {
                best = (s, c);
            }
            if placed.is_empty() {
                break;
            }
        }
        offsets[i] = candidate(best.1);
        placed.push(i);
    }
    // Coordinate ascent on the global minimum.
    for _ in 0..2 {
        let mut improved = false;
        for &i in &curve_order {
            let current_global = global_min(&offsets, classes);
            let mut best = (score(&offsets, &placed, i, &offsets[i].clone()), None);
            for &c in &order {
                let s = score(&offsets, &placed, i, &candidate(c));
                if s > best.0 {
                    best = (s, Some(c));
                }
            }
            if let Some(c) = best.1 {
                let saved = std::mem::replace(&mut offsets[i], candidate(c));
                if global_min(&offsets, classes) > current_global {
                    improved = true;
                } else {
                    offsets[i] = saved;
                }
            }
        }
        if !improved {
            break;
        }
    }

    let sys = CurveSystem::unchecked(offsets, classes.to_vec())?;
    let best = sys.separation.min(sys.self_separation);
    if best.to_f64_lossy() < min_separation {
        return Err(Error::PlacementFailed {
            best: best.to_f64_lossy(),
            required: min_separation,
        });
    }
    CurveSystem::from_offsets(sys.offsets, sys.directions)
}

fn global_min<T: Real>(offsets: &[Vec<T>], classes: &[Vec<i64>]) -> T {
    let mut best = T::infinity();
    for i in 0..classes.len() {
        for j in i + 1..classes.len() {
            best = best.min(CurveSystem::<T>::pair_only(&offsets[i], &classes[i], &offsets[j], &classes[j]));
        }
    }
    best
}

impl<T: Real> CurveSystem<T> {
    fn pair_only(p: &[T], a: &[i64], q: &[T], b: &[i64]) -> T {
        let ar: Vec<T> = ints_to_real(a);
        let br: Vec<T> = ints_to_real(b);
        let par = parallel(a, b);
        let mut best = T::infinity();
        let mut d = vec![T::zero(); p.len()];
        for k in candidate_shifts(p, a, q, b) {
            for c in 0..p.len() {
                d[c] = q[c] - p[c] - T::lit(k[c] as f64);
            }
            let dist = if par {
                line_distance(&d, &ar, None)
            } else {
                line_distance(&d, &ar, Some(&br))
            };
            best = best.min(dist);
        }
        best
    }
}
