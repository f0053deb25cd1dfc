//! Shortest paths in the cover `R^m` for periodic conformal metrics.
//!
//! Nodes are the lattice `h Z^m` with `h = 1/res`. Every node is joined to
//! the nodes reached by the visibility-reduced stencil (offsets `o` with
//! `0 < |o|_∞ <= R` and coprime entries); an edge weighs the line integral
//! of the speed factor `φ` along the segment. Weights only depend on the
//! node class modulo `res`, so one periodic table serves the cover and the
//! torus alike.

use std::cmp::Reverse;
use std::collections::BinaryHeap;
use std::fs;
use std::io::{Read, Write};
use std::path::Path;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::curves::CurveSystem;
use crate::error::{Error, Result};
use crate::metric::HedlundMetric;
use crate::quad::adaptive_simpson_rel;
use crate::scalar::{Real, MAX_DIM};

pub const DEFAULT_RADIUS: usize = 2;
pub const DEFAULT_BUDGET: usize = 30_000_000;
pub const EDGE_REL_TOL: f64 = 1e-7;
/// Work limit (subsets times points) for the exact stencil overhead.
const OVERHEAD_WORK_LIMIT: f64 = 4e8;

/// A positive periodic speed factor `φ` on `R^m`.
pub trait PeriodicField<T: Real>: Sync {
    fn dim(&self) -> usize;
    fn speed(&self, x: &[T]) -> T;

    /// `(φ, r)` when `φ` is constant on the ball of radius `r` about `x`.
    fn constant_near(&self, _x: &[T]) -> Option<(T, T)> {
        None
    }
}

impl<T: Real> PeriodicField<T> for HedlundMetric<T> {
    fn dim(&self) -> usize {
        HedlundMetric::dim(self)
    }

    fn speed(&self, x: &[T]) -> T {
        self.length_factor(x)
    }

    fn constant_near(&self, x: &[T]) -> Option<(T, T)> {
        let curves = self.curves();
        let ell = (0..curves.len())
            .map(|i| curves.locate_on(i, x).coords.ell)
            .fold(T::infinity(), T::min);
        (ell > curves.rho()).then(|| (self.omega().sqrt(), ell - curves.rho()))
    }
}

/// Conformal factor `F ≡ c`, so `φ ≡ c^{-1/2}`.
#[derive(Clone, Copy, Debug)]
pub struct ConstantField<T> {
    pub dim: usize,
    pub c: T,
}

impl<T: Real> PeriodicField<T> for ConstantField<T> {
    fn dim(&self) -> usize {
        self.dim
    }

    fn speed(&self, _x: &[T]) -> T {
        T::one() / self.c.sqrt()
    }

    fn constant_near(&self, _x: &[T]) -> Option<(T, T)> {
        Some((T::one() / self.c.sqrt(), T::infinity()))
    }
}

fn gcd(a: i64, b: i64) -> i64 {
    if b == 0 {
        a.abs()
    } else {
        gcd(b, a % b)
    }
}

/// Visibility-reduced stencil in lexicographic order.
pub fn stencil(m: usize, radius: usize) -> Vec<Vec<i64>> {
    let r = radius as i64;
    let mut out = Vec::new();
    let mut o = vec![-r; m];
    loop {
        if o.iter().fold(0, |g, &x| gcd(g, x)) == 1 {
            out.push(o.clone());
        }
        let mut c = m;
        loop {
            if c == 0 {
                return out;
            }
            c -= 1;
            if o[c] < r {
                o[c] += 1;
                break;
            }
            o[c] = -r;
        }
    }
}

fn solve_f64(a: &mut [[f64; MAX_DIM]], m: usize) -> Option<[f64; MAX_DIM]> {
    let mut rhs = [1.0; MAX_DIM];
    for col in 0..m {
        let piv = (col..m).max_by(|&i, &j| a[i][col].abs().total_cmp(&a[j][col].abs()))?;
        if a[piv][col].abs() < 1e-12 {
            return None;
        }
        a.swap(col, piv);
        rhs.swap(col, piv);
        for r in 0..m {
            if r != col {
                let f = a[r][col] / a[col][col];
                for c in col..m {
                    a[r][c] -= f * a[col][c];
                }
                rhs[r] -= f * rhs[col];
            }
        }
    }
    let mut x = [0.0; MAX_DIM];
    for i in 0..m {
        x[i] = rhs[i] / a[i][i];
    }
    Some(x)
}

fn binomial(n: usize, k: usize) -> f64 {
    (0..k).fold(1.0, |acc, i| acc * (n - i) as f64 / (i + 1) as f64)
}

/// Worst-case ratio minus one between stencil distances and Euclidean
/// distances for constant metrics: `max_facets |λ| - 1` over the hull of
/// the unit stencil directions. Falls back to a smaller radius, and finally
/// to the cross-polytope bound `√m - 1`, when the exhaustive facet search
/// would be too expensive; both fallbacks overestimate.
pub fn stencil_overhead(m: usize, radius: usize) -> f64 {
    for r in (1..=radius).rev() {
        let pts: Vec<Vec<f64>> = stencil(m, r)
            .iter()
            .map(|o| {
                let n = o.iter().map(|&x| (x * x) as f64).sum::<f64>().sqrt();
                o.iter().map(|&x| x as f64 / n).collect()
            })
            .collect();
        if binomial(pts.len(), m) * pts.len() as f64 > OVERHEAD_WORK_LIMIT {
            continue;
        }
        let mut best: f64 = 1.0;
        crate::polytope::for_each_subset(pts.len(), m, |sub| {
            let mut a = [[0.0; MAX_DIM]; MAX_DIM];
            for (row, &k) in sub.iter().enumerate() {
                a[row][..m].copy_from_slice(&pts[k]);
            }
            let Some(lam) = solve_f64(&mut a, m) else { return };
            let lam = &lam[..m];
            let norm = lam.iter().map(|x| x * x).sum::<f64>().sqrt();
            if norm <= best {
                return;
            }
            let supporting = pts
                .iter()
                .all(|p| p.iter().zip(lam).map(|(a, b)| a * b).sum::<f64>() <= 1.0 + 1e-9);
            if supporting {
                best = norm;
            }
        });
        return best - 1.0;
    }
    (m as f64).sqrt() - 1.0
}

/// Edge weights indexed by node class modulo `res` and stencil offset.
#[derive(Clone, Debug)]
pub struct EdgeTable<T> {
    dim: usize,
    res: usize,
    radius: usize,
    offsets: Vec<Vec<i64>>,
    weights: Vec<T>,
}

fn class_index(g: &[i64], res: usize) -> usize {
    g.iter().fold(0, |acc, &x| acc * res + x.rem_euclid(res as i64) as usize)
}

fn class_coords(mut idx: usize, m: usize, res: usize) -> Vec<i64> {
    let mut g = vec![0; m];
    for c in (0..m).rev() {
        g[c] = (idx % res) as i64;
        idx /= res;
    }
    g
}

impl<T: Real> EdgeTable<T> {
    pub fn build<F: PeriodicField<T>>(field: &F, res: usize, radius: usize) -> Result<Self> {
        let m = field.dim();
        if res == 0 || radius == 0 {
            return Err(Error::InvalidArgument("resolution and stencil radius must be positive".into()));
        }
        let offsets = stencil(m, radius);
        let k = offsets.len();
        let n_class = res.pow(m as u32);
        let h = T::one() / T::lit(res as f64);
        // Offsets whose first nonzero entry is positive; the others reuse the
        // weight of the reversed edge, making the graph exactly undirected.
        let positive: Vec<usize> = (0..k)
            .filter(|&i| offsets[i].iter().find(|&&x| x != 0).is_some_and(|&x| x > 0))
            .collect();
        let reverse: Vec<usize> = offsets
            .iter()
            .map(|o| {
                let neg: Vec<i64> = o.iter().map(|x| -x).collect();
                offsets.iter().position(|p| *p == neg).expect("stencil is symmetric")
            })
            .collect();
        let half: Vec<Vec<T>> = (0..n_class)
            .into_par_iter()
            .map(|cls| {
                let g = class_coords(cls, m, res);
                let a: Vec<T> = g.iter().map(|&x| T::lit(x as f64) * h).collect();
                let mut x = vec![T::zero(); m];
                positive
                    .iter()
                    .map(|&i| {
                        let d: Vec<T> = offsets[i].iter().map(|&o| T::lit(o as f64) * h).collect();
                        let len = d.iter().map(|&v| v * v).sum::<T>().sqrt();
                        let half = T::lit(0.5);
                        let mid: Vec<T> = a.iter().zip(&d).map(|(&p, &q)| p + half * q).collect();
                        if let Some((phi, r)) = field.constant_near(&mid) {
                            if r > half * len {
                                return len * phi;
                            }
                        }
                        let mut f = |t: T| {
                            for c in 0..m {
                                x[c] = a[c] + t * d[c];
                            }
                            field.speed(&x)
                        };
                        len * adaptive_simpson_rel(&mut f, T::zero(), T::one(), T::lit(EDGE_REL_TOL), T::lit(1e-15))
                    })
                    .collect()
            })
            .collect();
        let mut weights = vec![T::zero(); n_class * k];
        for cls in 0..n_class {
            for (slot, &i) in positive.iter().enumerate() {
                weights[cls * k + i] = half[cls][slot];
            }
        }
        for cls in 0..n_class {
            let g = class_coords(cls, m, res);
            for i in 0..k {
                if positive.contains(&i) {
                    continue;
                }
                let tail: Vec<i64> = g.iter().zip(&offsets[i]).map(|(a, b)| a + b).collect();
                weights[cls * k + i] = weights[class_index(&tail, res) * k + reverse[i]];
            }
        }
        Ok(EdgeTable {
            dim: m,
            res,
            radius,
            offsets,
            weights,
        })
    }

    pub fn offsets(&self) -> &[Vec<i64>] {
        &self.offsets
    }

    /// Weight of the edge from node `g` along offset `k`.
    pub fn weight(&self, g: &[i64], k: usize) -> T {
        self.weights[class_index(g, self.res) * self.offsets.len() + k]
    }
}

/// Axis-aligned region of the cover in whole unit cells, `lo` to `hi`
/// inclusive of the boundary nodes.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct CoverBox {
    pub lo: Vec<i64>,
    pub hi: Vec<i64>,
}

impl CoverBox {
    /// Smallest box containing the nodes, widened by `pad` cells.
    pub fn around(nodes: &[Vec<i64>], res: usize, pad: i64) -> CoverBox {
        let m = nodes[0].len();
        let r = res as i64;
        let lo = (0..m)
            .map(|c| nodes.iter().map(|g| g[c].div_euclid(r)).min().unwrap() - pad)
            .collect();
        let hi = (0..m)
            .map(|c| nodes.iter().map(|g| (g[c] + r - 1).div_euclid(r)).max().unwrap() + pad)
            .collect();
        CoverBox { lo, hi }
    }

    pub fn nodes(&self, res: usize) -> usize {
        self.lo
            .iter()
            .zip(&self.hi)
            .map(|(a, b)| ((b - a) as usize) * res + 1)
            .product()
    }
}

#[derive(Clone, Debug)]
struct Lattice {
    m: usize,
    shape: Vec<usize>,
    strides: Vec<usize>,
    origin: Vec<i64>,
    wrap: bool,
    len: usize,
    class_part: Vec<Vec<u32>>,
}

impl Lattice {
    fn new(origin: Vec<i64>, shape: Vec<usize>, wrap: bool, res: usize) -> Lattice {
        let m = shape.len();
        let mut strides = vec![1; m];
        for c in (0..m.saturating_sub(1)).rev() {
            strides[c] = strides[c + 1] * shape[c + 1];
        }
        let class_part = (0..m)
            .map(|c| {
                let scale = res.pow((m - 1 - c) as u32);
                (0..shape[c])
                    .map(|i| ((origin[c] + i as i64).rem_euclid(res as i64) as usize * scale) as u32)
                    .collect()
            })
            .collect();
        Lattice {
            m,
            len: shape.iter().product(),
            shape,
            strides,
            origin,
            wrap,
            class_part,
        }
    }

    fn index(&self, g: &[i64]) -> Option<usize> {
        let mut idx = 0;
        for c in 0..self.m {
            let mut x = g[c] - self.origin[c];
            if self.wrap {
                x = x.rem_euclid(self.shape[c] as i64);
            } else if x < 0 || x >= self.shape[c] as i64 {
                return None;
            }
            idx += x as usize * self.strides[c];
        }
        Some(idx)
    }

    fn coords(&self, mut idx: usize) -> Vec<i64> {
        let mut g = vec![0; self.m];
        for c in 0..self.m {
            g[c] = self.origin[c] + (idx / self.strides[c]) as i64;
            idx %= self.strides[c];
        }
        g
    }

    fn on_boundary(&self, idx: usize) -> bool {
        let mut rem = idx;
        (0..self.m).any(|c| {
            let x = rem / self.strides[c];
            rem %= self.strides[c];
            x == 0 || x + 1 == self.shape[c]
        })
    }
}

struct Search<T> {
    dist: Vec<T>,
    pred: Vec<u32>,
}

const NO_PRED: u32 = u32::MAX;

fn dijkstra<T: Real>(lat: &Lattice, table: &EdgeTable<T>, sources: &[(usize, T)], targets: &[usize], track: bool) -> Search<T> {
    let m = lat.m;
    let k = table.offsets.len();
    let r = table.radius;
    let deltas: Vec<isize> = table
        .offsets
        .iter()
        .map(|o| o.iter().zip(&lat.strides).map(|(&a, &s)| a as isize * s as isize).sum())
        .collect();
    let mut dist = vec![T::infinity(); lat.len];
    let mut pred = if track { vec![NO_PRED; lat.len] } else { Vec::new() };
    // bit 0: settled, bit 1: target
    let mut state = vec![0u8; lat.len];
    let mut pending = 0usize;
    for &t in targets {
        if state[t] & 2 == 0 {
            state[t] |= 2;
            pending += 1;
        }
    }
    let mut heap = BinaryHeap::new();
    for &(s, d0) in sources {
        if d0 < dist[s] {
            dist[s] = d0;
            heap.push(Reverse((d0.to_f64_lossy().to_bits(), s as u32)));
        }
    }
    let mut coord = [0usize; MAX_DIM];
    while let Some(Reverse((_, node))) = heap.pop() {
        let node = node as usize;
        if state[node] & 1 != 0 {
            continue;
        }
        state[node] |= 1;
        if state[node] & 2 != 0 {
            pending -= 1;
            if pending == 0 {
                break;
            }
        }
        let d = dist[node];
        let mut rem = node;
        let mut cls = 0usize;
        let mut interior = !lat.wrap;
        for c in 0..m {
            coord[c] = rem / lat.strides[c];
            rem %= lat.strides[c];
            cls += lat.class_part[c][coord[c]] as usize;
            interior &= coord[c] >= r && coord[c] + r < lat.shape[c];
        }
        let row = &table.weights[cls * k..(cls + 1) * k];
        for i in 0..k {
            let nb = if interior {
                (node as isize + deltas[i]) as usize
            } else {
                let mut idx = 0usize;
                let mut inside = true;
                for c in 0..m {
                    let mut x = coord[c] as i64 + table.offsets[i][c];
                    let n = lat.shape[c] as i64;
                    if lat.wrap {
                        x = x.rem_euclid(n);
                    } else if x < 0 || x >= n {
                        inside = false;
                        break;
                    }
                    idx += x as usize * lat.strides[c];
                }
                if !inside {
                    continue;
                }
                idx
            };
            let nd = d + row[i];
            if nd < dist[nb] {
                dist[nb] = nd;
                if track {
                    pred[nb] = node as u32;
                }
                heap.push(Reverse((nd.to_f64_lossy().to_bits(), nb as u32)));
            }
        }
    }
    Search { dist, pred }
}

/// Result of a single-source search in a box of the cover.
#[derive(Clone, Debug)]
pub struct BoxSearch<T> {
    pub bounds: CoverBox,
    pub distances: Vec<T>,
    /// Node paths from the source to each target.
    pub paths: Vec<Vec<Vec<i64>>>,
    /// Whether some optimal path touched the box boundary.
    pub touched: bool,
}

/// Distances from one source over a whole box, exportable to disk.
#[derive(Clone, Debug)]
pub struct DistanceField<T> {
    pub source: Vec<i64>,
    pub bounds: CoverBox,
    pub res: usize,
    pub radius: usize,
    /// Row-major, last coordinate fastest.
    pub values: Vec<T>,
    pub shape: Vec<usize>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct FieldSidecar {
    pub name: String,
    pub dims: Vec<usize>,
    pub components: usize,
    pub h: f64,
    pub res: usize,
    pub stencil_radius: Option<usize>,
    pub origin: Vec<f64>,
    pub manifest_hash: String,
    pub dtype: String,
    pub order: String,
}

/// Writes little-endian `f64` values and a JSON sidecar next to them.
pub fn write_volume(dir: &Path, stem: &str, values: &[f64], sidecar: &FieldSidecar) -> Result<()> {
    fs::create_dir_all(dir)?;
    let mut bytes = Vec::with_capacity(values.len() * 8);
    for v in values {
        bytes.extend_from_slice(&v.to_le_bytes());
    }
    fs::File::create(dir.join(format!("{stem}.bin")))?.write_all(&bytes)?;
    fs::write(dir.join(format!("{stem}.json")), serde_json::to_string_pretty(sidecar)?)?;
    Ok(())
}

pub fn read_volume(dir: &Path, stem: &str) -> Result<(Vec<f64>, FieldSidecar)> {
    let sidecar: FieldSidecar = serde_json::from_str(&fs::read_to_string(dir.join(format!("{stem}.json")))?)?;
    let mut bytes = Vec::new();
    fs::File::open(dir.join(format!("{stem}.bin")))?.read_to_end(&mut bytes)?;
    let expected = sidecar.dims.iter().product::<usize>() * sidecar.components * 8;
    if bytes.len() != expected {
        return Err(Error::Io(format!("volume has {} bytes, sidecar implies {expected}", bytes.len())));
    }
    let values = bytes
        .chunks_exact(8)
        .map(|b| f64::from_le_bytes(b.try_into().expect("chunk of 8")))
        .collect();
    Ok((values, sidecar))
}

impl<T: Real> DistanceField<T> {
    pub fn get(&self, g: &[i64]) -> Option<T> {
        let mut idx = 0;
        for c in 0..g.len() {
            let x = g[c] - self.bounds.lo[c] * self.res as i64;
            if x < 0 || x >= self.shape[c] as i64 {
                return None;
            }
            idx = idx * self.shape[c] + x as usize;
        }
        Some(self.values[idx])
    }

    pub fn sidecar(&self, manifest_hash: &str) -> FieldSidecar {
        FieldSidecar {
            name: "distance".into(),
            dims: self.shape.clone(),
            components: 1,
            h: 1.0 / self.res as f64,
            res: self.res,
            stencil_radius: Some(self.radius),
            origin: self.bounds.lo.iter().map(|&x| x as f64).collect(),
            manifest_hash: manifest_hash.into(),
            dtype: "f64le".into(),
            order: "row-major, last axis fastest".into(),
        }
    }

    pub fn save(&self, dir: &Path, stem: &str, manifest_hash: &str) -> Result<()> {
        let vals: Vec<f64> = self.values.iter().map(|v| v.to_f64_lossy()).collect();
        write_volume(dir, stem, &vals, &self.sidecar(manifest_hash))
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct SolverOptions {
    pub res: usize,
    pub radius: usize,
    pub budget: usize,
}

impl Default for SolverOptions {
    fn default() -> Self {
        SolverOptions {
            res: 16,
            radius: DEFAULT_RADIUS,
            budget: DEFAULT_BUDGET,
        }
    }
}

/// Grid shortest-path solver for one periodic field.
#[derive(Clone, Debug)]
pub struct Solver<T> {
    table: EdgeTable<T>,
    opts: SolverOptions,
    overhead: f64,
}

impl<T: Real> Solver<T> {
    pub fn new<F: PeriodicField<T>>(field: &F, opts: SolverOptions) -> Result<Self> {
        let m = field.dim();
        if opts.res <= 2 * opts.radius {
            return Err(Error::InvalidArgument(format!(
                "resolution {} must exceed twice the stencil radius {}",
                opts.res, opts.radius
            )));
        }
        if opts.res.pow(m as u32) > opts.budget {
            return Err(Error::OutOfMemoryBudget {
                nodes: opts.res.pow(m as u32),
                budget: opts.budget,
            });
        }
        Ok(Solver {
            table: EdgeTable::build(field, opts.res, opts.radius)?,
            overhead: stencil_overhead(m, opts.radius),
            opts,
        })
    }

    pub fn options(&self) -> SolverOptions {
        self.opts
    }

    pub fn dim(&self) -> usize {
        self.table.dim
    }

    pub fn res(&self) -> usize {
        self.opts.res
    }

    /// Stencil overhead `η_R`: grid distances exceed continuum distances
    /// of constant metrics by at most this relative amount.
    pub fn overhead(&self) -> f64 {
        self.overhead
    }

    pub fn table(&self) -> &EdgeTable<T> {
        &self.table
    }

    /// Nearest lattice node.
    pub fn snap(&self, x: &[T]) -> Vec<i64> {
        let r = T::lit(self.opts.res as f64);
        x.iter().map(|&v| (v * r).round().to_i64().unwrap_or(0)).collect()
    }

    pub fn node_point(&self, g: &[i64]) -> Vec<T> {
        let r = T::lit(self.opts.res as f64);
        g.iter().map(|&v| T::lit(v as f64) / r).collect()
    }

    fn box_lattice(&self, bounds: &CoverBox) -> Result<Lattice> {
        let nodes = bounds.nodes(self.opts.res);
        if nodes > self.opts.budget || nodes > u32::MAX as usize {
            return Err(Error::OutOfMemoryBudget {
                nodes,
                budget: self.opts.budget,
            });
        }
        let r = self.opts.res as i64;
        let origin = bounds.lo.iter().map(|&x| x * r).collect();
        let shape = bounds
            .lo
            .iter()
            .zip(&bounds.hi)
            .map(|(a, b)| ((b - a) * r) as usize + 1)
            .collect();
        Ok(Lattice::new(origin, shape, false, self.opts.res))
    }

    fn torus_lattice(&self) -> Lattice {
        let m = self.dim();
        Lattice::new(vec![0; m], vec![self.opts.res; m], true, self.opts.res)
    }

    /// Distances from `source` to each target node inside `bounds`, with paths.
    pub fn search_box(&self, source: &[i64], targets: &[Vec<i64>], bounds: &CoverBox) -> Result<BoxSearch<T>> {
        let lat = self.box_lattice(bounds)?;
        let s = lat.index(source).ok_or(Error::TargetOutsideBox)?;
        let t: Vec<usize> = targets
            .iter()
            .map(|g| lat.index(g).ok_or(Error::TargetOutsideBox))
            .collect::<Result<_>>()?;
        let out = dijkstra(&lat, &self.table, &[(s, T::zero())], &t, true);
        let mut touched = false;
        let mut paths = Vec::with_capacity(t.len());
        for &ti in &t {
            let mut path = vec![ti];
            let mut cur = ti;
            while out.pred[cur] != NO_PRED {
                cur = out.pred[cur] as usize;
                path.push(cur);
            }
            path.reverse();
            touched |= path.iter().any(|&i| lat.on_boundary(i));
            paths.push(path.into_iter().map(|i| lat.coords(i)).collect());
        }
        Ok(BoxSearch {
            bounds: bounds.clone(),
            distances: t.iter().map(|&i| out.dist[i]).collect(),
            paths,
            touched,
        })
    }

    /// Multi-source variant: each source starts with its own offset distance.
    /// Returns, per target, the distance and the node path (starting at the
    /// chosen source).
    pub fn search_box_multi(
        &self,
        sources: &[(Vec<i64>, T)],
        targets: &[Vec<i64>],
        bounds: &CoverBox,
    ) -> Result<(Vec<T>, Vec<Vec<Vec<i64>>>)> {
        let lat = self.box_lattice(bounds)?;
        let s: Vec<(usize, T)> = sources
            .iter()
            .map(|(g, d)| lat.index(g).map(|i| (i, *d)).ok_or(Error::TargetOutsideBox))
            .collect::<Result<_>>()?;
        let t: Vec<usize> = targets
            .iter()
            .map(|g| lat.index(g).ok_or(Error::TargetOutsideBox))
            .collect::<Result<_>>()?;
        let out = dijkstra(&lat, &self.table, &s, &t, true);
        let paths = t
            .iter()
            .map(|&ti| {
                let mut path = vec![ti];
                let mut cur = ti;
                while out.pred[cur] != NO_PRED {
                    cur = out.pred[cur] as usize;
                    path.push(cur);
                }
                path.reverse();
                path.into_iter().map(|i| lat.coords(i)).collect()
            })
            .collect();
        Ok((t.iter().map(|&i| out.dist[i]).collect(), paths))
    }

    /// Full distance field from a node over a box.
    pub fn distance_field(&self, source: &[i64], bounds: &CoverBox) -> Result<DistanceField<T>> {
        let lat = self.box_lattice(bounds)?;
        let s = lat.index(source).ok_or(Error::TargetOutsideBox)?;
        let out = dijkstra(&lat, &self.table, &[(s, T::zero())], &[], false);
        Ok(DistanceField {
            source: source.to_vec(),
            bounds: bounds.clone(),
            res: self.opts.res,
            radius: self.opts.radius,
            values: out.dist,
            shape: lat.shape,
        })
    }

    /// Grid distance between the nodes nearest to `x` and `y`, with the
    /// optimal polyline from `x` to `y`. The box starts one cell beyond the
    /// endpoints and doubles its padding while the optimal path touches it.
    pub fn shortest_distance(&self, x: &[T], y: &[T]) -> Result<(T, Vec<Vec<T>>)> {
        let (gx, gy) = (self.snap(x), self.snap(y));
        let mut pad = 1;
        loop {
            let bounds = CoverBox::around(&[gx.clone(), gy.clone()], self.opts.res, pad);
            let found = self.search_box(&gx, &[gy.clone()], &bounds)?;
            let bigger = CoverBox::around(&[gx.clone(), gy.clone()], self.opts.res, pad * 2);
            if !found.touched || bigger.nodes(self.opts.res) > self.opts.budget {
                let mut pts = vec![x.to_vec()];
                pts.extend(found.paths[0].iter().map(|g| self.node_point(g)));
                pts.push(y.to_vec());
                return Ok((found.distances[0], pts));
            }
            pad *= 2;
        }
    }

    /// Distances on the torus grid from several sources at once.
    pub fn torus_field(&self, sources: &[(Vec<i64>, T)]) -> Vec<T> {
        let lat = self.torus_lattice();
        let s: Vec<(usize, T)> = sources
            .iter()
            .map(|(g, d)| (lat.index(g).expect("torus index"), *d))
            .collect();
        dijkstra(&lat, &self.table, &s, &[], false).dist
    }

    /// Torus node index of a node of the cover.
    pub fn torus_index(&self, g: &[i64]) -> usize {
        self.torus_lattice().index(g).expect("torus index")
    }

    /// `2 (1 + η_R)` times the eccentricity of the origin on the torus grid.
    pub fn diameter_upper(&self) -> T {
        let m = self.dim();
        let field = self.torus_field(&[(vec![0; m], T::zero())]);
        let ecc = field.iter().cloned().fold(T::zero(), T::max);
        T::lit(2.0 * (1.0 + self.overhead)) * ecc
    }

    /// `(1 + η_R) max_{i≠j} min` grid distance from `Γ_i` to `Γ_j`.
    pub fn line_gap(&self, curves: &CurveSystem<T>) -> T {
        let n = curves.len();
        if n < 2 {
            return T::zero();
        }
        let samples: Vec<Vec<Vec<i64>>> = (0..n).map(|i| self.curve_nodes(curves, i)).collect();
        let fields: Vec<Vec<T>> = (0..n)
            .into_par_iter()
            .map(|i| {
                let src: Vec<(Vec<i64>, T)> = samples[i].iter().map(|g| (g.clone(), T::zero())).collect();
                self.torus_field(&src)
            })
            .collect();
        let mut worst = T::zero();
        for i in 0..n {
            for j in 0..n {
                if i != j {
                    let d = samples[j]
                        .iter()
                        .map(|g| fields[i][self.torus_index(g)])
                        .fold(T::infinity(), T::min);
                    worst = worst.max(d);
                }
            }
        }
        T::lit(1.0 + self.overhead) * worst
    }

    /// Nodes nearest to samples of `Γ_i`, two per grid step of arc length.
    pub fn curve_nodes(&self, curves: &CurveSystem<T>, i: usize) -> Vec<Vec<i64>> {
        let len = curves.direction_norm_sq(i).sqrt().to_f64_lossy();
        let n = ((2.0 * self.opts.res as f64 * len).ceil() as usize).max(8);
        let mut out: Vec<Vec<i64>> = Vec::new();
        for k in 0..n {
            let g = self.snap(&curves.curve_point(i, T::lit(k as f64 / n as f64), true));
            if !out.contains(&g) {
                out.push(g);
            }
        }
        out
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::curves::{place_curves, Placement};
    use crate::metric::DEFAULT_INFLATION;
    use crate::polytope::Polytope;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn flat(c: f64) -> ConstantField<f64> {
        ConstantField { dim: 3, c }
    }

    fn octahedron_metric() -> HedlundMetric<f64> {
        let p = Polytope::cross_polytope(3).unwrap();
        let c = place_curves(&p.classes(), Placement::Deterministic, 0, 0.0).unwrap();
        HedlundMetric::calibrate(&p, c, 40, DEFAULT_INFLATION).unwrap()
    }

    #[test]
    fn stencil_sizes() {
        assert_eq!(stencil(3, 1).len(), 26);
        assert_eq!(stencil(3, 2).len(), 98);
        // Oracle: all nonzero offsets minus those with a common factor.
        for (m, r) in [(3usize, 3usize), (4, 2)] {
            let all = (2 * r + 1).pow(m as u32) - 1;
            let mut bad = 0;
            let mut o = vec![-(r as i64); m];
            'outer: loop {
                let g = o.iter().fold(0i64, |g, &x| gcd(g, x));
                if g > 1 {
                    bad += 1;
                }
                for c in (0..m).rev() {
                    if o[c] < r as i64 {
                        o[c] += 1;
                        continue 'outer;
                    }
                    o[c] = -(r as i64);
                }
                break;
            }
            assert_eq!(stencil(m, r).len(), all - bad);
        }
    }

    #[test]
    fn overhead_matches_direction_sweep() {
        // Oracle: gauge of the hull by dense sampling of directions, each
        // through a brute-force LP over pairs and triples of stencil vectors.
        for r in [1usize, 2] {
            let eta = stencil_overhead(3, r);
            let pts: Vec<Vec<f64>> = stencil(3, r)
                .iter()
                .map(|o| o.iter().map(|&x| x as f64).collect())
                .collect();
            let mut rng = ChaCha8Rng::seed_from_u64(r as u64);
            let mut worst: f64 = 0.0;
            for _ in 0..300 {
                let d: Vec<f64> = (0..3).map(|_| rng.gen_range(-1.0..1.0)).collect();
                let n = d.iter().map(|x| x * x).sum::<f64>().sqrt();
                let d: Vec<f64> = d.iter().map(|x| x / n).collect();
                let mut best = f64::INFINITY;
                crate::polytope::for_each_subset(pts.len(), 3, |s| {
                    // Solve Σ α_k p_k = d for α by Cramer's rule.
                    let mut m = [[0.0; MAX_DIM]; MAX_DIM];
                    for c in 0..3 {
                        for k in 0..3 {
                            m[c][k] = pts[s[k]][c];
                        }
                    }
                    let det = m[0][0] * (m[1][1] * m[2][2] - m[1][2] * m[2][1])
                        - m[0][1] * (m[1][0] * m[2][2] - m[1][2] * m[2][0])
                        + m[0][2] * (m[1][0] * m[2][1] - m[1][1] * m[2][0]);
                    if det.abs() < 1e-12 {
                        return;
                    }
                    let mut cost = 0.0;
                    for k in 0..3 {
                        let mut mk = m;
                        for c in 0..3 {
                            mk[c][k] = d[c];
                        }
                        let dk = mk[0][0] * (mk[1][1] * mk[2][2] - mk[1][2] * mk[2][1])
                            - mk[0][1] * (mk[1][0] * mk[2][2] - mk[1][2] * mk[2][0])
                            + mk[0][2] * (mk[1][0] * mk[2][1] - mk[1][1] * mk[2][0]);
                        let alpha = dk / det;
                        if alpha < -1e-12 {
                            return;
                        }
                        cost += alpha * pts[s[k]].iter().map(|x| x * x).sum::<f64>().sqrt();
                    }
                    best = best.min(cost);
                });
                worst = worst.max(best - 1.0);
            }
            assert!(worst <= eta + 1e-9, "r={r}: sampled {worst} > {eta}");
            assert!(worst >= 0.5 * eta, "r={r}: sampled {worst} vs {eta}");
        }
        assert!((stencil_overhead(3, 1) - 0.12814).abs() < 1e-4);
        assert!((stencil_overhead(3, 2) - 0.04942).abs() < 1e-4);
    }

    #[test]
    fn weights_are_symmetric() {
        let h = octahedron_metric();
        let t = EdgeTable::build(&h, 8, 2).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        for _ in 0..500 {
            let g: Vec<i64> = (0..3).map(|_| rng.gen_range(-20..20)).collect();
            let k = rng.gen_range(0..t.offsets().len());
            let o = &t.offsets()[k];
            let tail: Vec<i64> = g.iter().zip(o).map(|(a, b)| a + b).collect();
            let back = t.offsets().iter().position(|p| p.iter().zip(o).all(|(a, b)| *a == -b)).unwrap();
            assert_eq!(t.weight(&g, k), t.weight(&tail, back));
        }
    }

    #[test]
    fn constant_metric_ratio_within_overhead() {
        let c = 4.0;
        let s = Solver::new(&flat(c), SolverOptions { res: 5, ..Default::default() }).unwrap();
        let eta = s.overhead();
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        for _ in 0..100 {
            let v: Vec<i64> = loop {
                let v: Vec<i64> = (0..3).map(|_| rng.gen_range(-3..=3)).collect();
                if v.iter().any(|&x| x != 0) {
                    break v;
                }
            };
            let y: Vec<f64> = v.iter().map(|&x| x as f64).collect();
            let (d, _) = s.shortest_distance(&[0.0; 3], &y).unwrap();
            let exact = y.iter().map(|a| a * a).sum::<f64>().sqrt() / c.sqrt();
            let ratio = d / exact;
            assert!((1.0 - 1e-3..=1.0 + eta).contains(&ratio), "{v:?} {ratio}");
        }
        assert_eq!(s.shortest_distance(&[0.2; 3], &[0.2; 3]).unwrap().0, 0.0);
    }

    #[test]
    fn symmetry_and_triangle_inequality() {
        let h = octahedron_metric();
        let s = Solver::new(&h, SolverOptions { res: 8, ..Default::default() }).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(12);
        let mut pt = || -> Vec<f64> { (0..3).map(|_| rng.gen_range(-1.0..2.0)).collect() };
        for _ in 0..20 {
            let (x, y, z) = (pt(), pt(), pt());
            let dxy = s.shortest_distance(&x, &y).unwrap().0;
            let dyx = s.shortest_distance(&y, &x).unwrap().0;
            assert!((dxy - dyx).abs() <= 1e-9, "{dxy} {dyx}");
            let dyz = s.shortest_distance(&y, &z).unwrap().0;
            let dxz = s.shortest_distance(&x, &z).unwrap().0;
            assert!(dxz <= dxy + dyz + 1e-6);
        }
    }

    #[test]
    fn curve_segment_upper_bound_and_periodic_consistency() {
        let h = octahedron_metric();
        let s = Solver::new(&h, SolverOptions { res: 8, ..Default::default() }).unwrap();
        let x = h.curves().curve_point(0, 0.0, false);
        let y: Vec<f64> = x.iter().zip(h.curves().direction_real(0)).map(|(a, b)| a + b).collect();
        let (d, path) = s.shortest_distance(&x, &y).unwrap();
        assert!(d <= (1.0 + s.overhead()) + 1e-3, "{d}");
        assert!(d >= 1.0 - 1e-3);
        assert!(h.polyline_length(&path) >= 1.0 - 1e-3);
        let a = vec![0.3, 0.1, 0.6];
        let b = vec![1.2, 0.9, 0.4];
        let d0 = s.shortest_distance(&a, &b).unwrap().0;
        let k = [1.0, -2.0, 1.0];
        let ak: Vec<f64> = a.iter().zip(&k).map(|(p, q)| p + q).collect();
        let bk: Vec<f64> = b.iter().zip(&k).map(|(p, q)| p + q).collect();
        assert!((s.shortest_distance(&ak, &bk).unwrap().0 - d0).abs() <= 2e-3);
    }

    #[test]
    fn distances_shrink_as_the_box_grows() {
        let h = octahedron_metric();
        let s = Solver::new(&h, SolverOptions { res: 8, ..Default::default() }).unwrap();
        let a = vec![0, 3, 5];
        let b = vec![13, 9, 4];
        let small = CoverBox::around(&[a.clone(), b.clone()], 8, 0);
        let big = CoverBox::around(&[a.clone(), b.clone()], 8, 1);
        let fs = s.distance_field(&a, &small).unwrap();
        let fb = s.distance_field(&a, &big).unwrap();
        assert_eq!(fs.get(&a), Some(0.0));
        let mut rng = ChaCha8Rng::seed_from_u64(13);
        for _ in 0..200 {
            let g: Vec<i64> = (0..3).map(|c| rng.gen_range(small.lo[c] * 8..=small.hi[c] * 8)).collect();
            assert!(fb.get(&g).unwrap() <= fs.get(&g).unwrap());
        }
    }

    #[test]
    fn refinement_does_not_increase_distances() {
        let h = octahedron_metric();
        let coarse = Solver::new(&h, SolverOptions { res: 8, ..Default::default() }).unwrap();
        let fine = Solver::new(&h, SolverOptions { res: 16, ..Default::default() }).unwrap();
        for (x, y) in [([0.0, 0.0, 0.0], [1.0, 1.0, 0.0]), ([0.25, 0.5, 0.75], [1.25, 0.5, -0.25])] {
            let dc = coarse.shortest_distance(&x, &y).unwrap().0;
            let df = fine.shortest_distance(&x, &y).unwrap().0;
            assert!(df <= dc + 1e-3, "{dc} -> {df}");
        }
    }

    #[test]
    fn diameter_and_line_gap() {
        let s = Solver::new(&flat(1.0), SolverOptions { res: 8, ..Default::default() }).unwrap();
        let d = s.diameter_upper();
        assert!(d <= 2.0 * 3f64.sqrt() / 2.0 * (1.0 + s.overhead()).powi(2) + 1e-12, "{d}");
        assert!(d >= 3f64.sqrt());

        let h = octahedron_metric();
        let s = Solver::new(&h, SolverOptions { res: 8, ..Default::default() }).unwrap();
        assert!(s.diameter_upper() > 0.0);
        let gap = s.line_gap(h.curves());
        // Oracle: pairwise single-source searches between curve samples.
        let mut worst: f64 = 0.0;
        for i in 0..3 {
            for j in 0..3 {
                if i == j {
                    continue;
                }
                let mut best = f64::INFINITY;
                for g in s.curve_nodes(h.curves(), i) {
                    let f = s.torus_field(&[(g, 0.0)]);
                    for t in s.curve_nodes(h.curves(), j) {
                        best = best.min(f[s.torus_index(&t)]);
                    }
                }
                worst = worst.max(best);
            }
        }
        assert!((gap - (1.0 + s.overhead()) * worst).abs() <= 0.05 * gap);

        let single = place_curves::<f64>(&[vec![1, 0, 0]], Placement::Deterministic, 0, 0.0).unwrap();
        assert_eq!(s.line_gap(&single), 0.0);
    }

    #[test]
    fn budget_is_enforced() {
        let s = Solver::new(&flat(1.0), SolverOptions { res: 8, radius: 1, budget: 2000 }).unwrap();
        let b = CoverBox { lo: vec![0; 3], hi: vec![2; 3] };
        assert!(matches!(s.distance_field(&[0, 0, 0], &b), Err(Error::OutOfMemoryBudget { .. })));
        assert!(matches!(
            Solver::new(&flat(1.0), SolverOptions { res: 16, radius: 1, budget: 1000 }),
            Err(Error::OutOfMemoryBudget { .. })
        ));
    }

    #[test]
    fn volume_round_trip() {
        let s = Solver::new(&flat(1.0), SolverOptions { res: 5, radius: 1, ..Default::default() }).unwrap();
        let b = CoverBox { lo: vec![0; 3], hi: vec![1; 3] };
        let f = s.distance_field(&[0, 0, 0], &b).unwrap();
        let dir = tempfile::tempdir().unwrap();
        f.save(dir.path(), "d", "abc").unwrap();
        let (vals, side) = read_volume(dir.path(), "d").unwrap();
        assert_eq!(side, f.sidecar("abc"));
        assert_eq!(vals, f.values);
        assert_eq!(std::fs::metadata(dir.path().join("d.bin")).unwrap().len(), 216 * 8);
    }
}
