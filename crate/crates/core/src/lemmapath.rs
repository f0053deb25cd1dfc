//! Explicit broken paths realizing the upper bound `λ(w) + C`.
//!
//! From the start point the path repeatedly connects, by a grid geodesic, to
//! the nearest lift of a curve whose class is still needed, rides that lift
//! for its number of periods (give or take half a period, chosen to shorten
//! the next connector) and finally connects to `x + w`.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::metric::HedlundMetric;
use crate::polytope::RationalVec;
use crate::scalar::Real;
use crate::solver::{CoverBox, Solver};
use crate::stablenorm::ConstantC;

/// Curve samples per period when looking for the nearest lift.
pub const LIFT_SAMPLES: usize = 64;
/// Exit candidates per period around the nominal end of a ride.
pub const EXIT_SAMPLES: usize = 64;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase")]
pub enum SegmentKind {
    Connector,
    Ride {
        curve: usize,
        vertex: usize,
        /// Signed number of periods travelled, `n_j + δ`.
        periods: f64,
    },
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct Segment {
    #[serde(flatten)]
    pub kind: SegmentKind,
    pub points: Vec<Vec<f64>>,
    pub length: f64,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct LemmaPath {
    pub w: Vec<i64>,
    pub facet_id: usize,
    /// Coefficients on the facet's vertices, in facet order.
    pub coefficients: Vec<u64>,
    pub start: Vec<f64>,
    pub end: Vec<f64>,
    pub segments: Vec<Segment>,
    pub total_length: f64,
}

struct Exit<T> {
    point: Vec<T>,
    node: Vec<i64>,
    /// Extra metric length relative to the earliest exit.
    offset: T,
    periods: T,
}

fn add<T: Real>(a: &[T], b: &[T]) -> Vec<T> {
    a.iter().zip(b).map(|(&x, &y)| x + y).collect()
}

fn to_f64<T: Real>(pts: &[Vec<T>]) -> Vec<Vec<f64>> {
    pts.iter().map(|p| p.iter().map(|x| x.to_f64_lossy()).collect()).collect()
}

/// Builds the path from `x` to `x + Σ n_j u_j`, where `u_j` runs over the
/// primitive classes of the vertices of `facet_id` and `n` holds the
/// coefficients in facet order.
pub fn build_lemma_path<T: Real>(
    metric: &HedlundMetric<T>,
    solver: &Solver<T>,
    x: &[T],
    facet_id: usize,
    n: &[u64],
) -> Result<LemmaPath> {
    let poly = metric.polytope();
    let curves = metric.curves();
    let m = poly.dim();
    let facet = poly
        .facets()
        .get(facet_id)
        .ok_or_else(|| Error::InvalidArgument(format!("no facet {facet_id}")))?;
    if n.len() != facet.vertex_ids.len() || n.iter().all(|&k| k == 0) {
        return Err(Error::InvalidArgument("coefficients must match the facet and be nonzero".into()));
    }
    if x.len() != m {
        return Err(Error::DimensionMismatch { expected: m, found: x.len() });
    }
    // Work from F_0 and translate back at the end.
    let shift: Vec<T> = x.iter().map(|v| v.floor()).collect();
    let x0: Vec<T> = x.iter().zip(&shift).map(|(&a, &b)| a - b).collect();
    let mut w = vec![0i64; m];
    let mut todo: Vec<(usize, usize, i64, u64)> = Vec::new();
    for (&vid, &k) in facet.vertex_ids.iter().zip(n) {
        let (class, sign) = poly.class_of_vertex(vid);
        for c in 0..m {
            w[c] += k as i64 * poly.vertices()[vid].v[c];
        }
        if k > 0 {
            todo.push((vid, class, sign, k));
        }
    }
    let w_real: Vec<T> = w.iter().map(|&v| T::lit(v as f64)).collect();
    let target = add(&x0, &w_real);
    let res = solver.res();

    let mut segments: Vec<(SegmentKind, Vec<Vec<T>>)> = Vec::new();
    let mut exits = vec![Exit {
        point: x0.clone(),
        node: solver.snap(&x0),
        offset: T::zero(),
        periods: T::zero(),
    }];
    let mut last_ride: Option<(Vec<T>, usize, usize, i64)> = None;

    let finish_ride = |segments: &mut Vec<(SegmentKind, Vec<Vec<T>>)>,
                       last: &Option<(Vec<T>, usize, usize, i64)>,
                       exit: &Exit<T>| {
        if let Some((q, class, vid, _)) = last {
            segments.push((
                SegmentKind::Ride {
                    curve: *class,
                    vertex: *vid,
                    periods: exit.periods.to_f64_lossy(),
                },
                vec![q.clone(), exit.point.clone()],
            ));
        }
    };

    while !todo.is_empty() {
        let src_nodes: Vec<Vec<i64>> = exits.iter().map(|e| e.node.clone()).collect();
        let bounds = CoverBox::around(&src_nodes, res, 1);
        // Lifts of the remaining curves inside the box: (todo index, exact point, node).
        let mut lifts: Vec<(usize, Vec<T>, Vec<i64>)> = Vec::new();
        for (ti, &(_, class, _, _)) in todo.iter().enumerate() {
            for k in 0..LIFT_SAMPLES {
                let p = curves.curve_point(class, T::lit(k as f64 / LIFT_SAMPLES as f64), true);
                for_each_cell(&bounds, |cell| {
                    let q: Vec<T> = p.iter().zip(cell).map(|(&a, &c)| a + T::lit(c as f64)).collect();
                    let g = solver.snap(&q);
                    if inside(&bounds, &g, res) {
                        lifts.push((ti, q, g));
                    }
                });
            }
        }
        let sources: Vec<(Vec<i64>, T)> = exits.iter().map(|e| (e.node.clone(), e.offset)).collect();
        let targets: Vec<Vec<i64>> = lifts.iter().map(|l| l.2.clone()).collect();
        let (dist, paths) = solver.search_box_multi(&sources, &targets, &bounds)?;
        let mut best = 0;
        for k in 1..lifts.len() {
            if dist[k] < dist[best] || (dist[k] == dist[best] && lifts[k].0 < lifts[best].0) {
                best = k;
            }
        }
        let path = &paths[best];
        let exit = exits
            .iter()
            .position(|e| e.node == path[0])
            .expect("path starts at a source");
        finish_ride(&mut segments, &last_ride, &exits[exit]);
        let (ti, q, _) = &lifts[best];
        let mut pts = vec![exits[exit].point.clone()];
        pts.extend(path.iter().map(|g| solver.node_point(g)));
        pts.push(q.clone());
        segments.push((SegmentKind::Connector, pts));

        let (vid, class, sign, k) = todo.remove(*ti);
        let v = curves.direction_real(class);
        let eps = metric.class_eps()[class];
        let half = T::lit(0.5);
        exits = (0..EXIT_SAMPLES)
            .map(|s| {
                let delta = T::lit(s as f64 / EXIT_SAMPLES as f64) - half;
                let periods = T::lit(k as f64) + delta;
                let point: Vec<T> = q
                    .iter()
                    .zip(v)
                    .map(|(&a, &b)| a + periods * T::lit(sign as f64) * b)
                    .collect();
                Exit {
                    node: solver.snap(&point),
                    point,
                    offset: (delta + half) * eps,
                    periods,
                }
            })
            .collect();
        last_ride = Some((q.clone(), class, vid, sign));
    }

    let goal = solver.snap(&target);
    let mut all: Vec<Vec<i64>> = exits.iter().map(|e| e.node.clone()).collect();
    all.push(goal.clone());
    let bounds = CoverBox::around(&all, res, 1);
    let sources: Vec<(Vec<i64>, T)> = exits.iter().map(|e| (e.node.clone(), e.offset)).collect();
    let (_, paths) = solver.search_box_multi(&sources, &[goal], &bounds)?;
    let path = &paths[0];
    let exit = exits.iter().position(|e| e.node == path[0]).expect("path starts at a source");
    finish_ride(&mut segments, &last_ride, &exits[exit]);
    let mut pts = vec![exits[exit].point.clone()];
    pts.extend(path.iter().map(|g| solver.node_point(g)));
    pts.push(target.clone());
    segments.push((SegmentKind::Connector, pts));

    let measured: Vec<Segment> = segments
        .into_par_iter()
        .map(|(kind, pts)| {
            let pts: Vec<Vec<T>> = pts.iter().map(|p| add(p, &shift)).collect();
            Segment {
                length: metric.polyline_length(&pts).to_f64_lossy(),
                kind,
                points: to_f64(&pts),
            }
        })
        .collect();
    let total_length = measured.iter().map(|s| s.length).sum();
    Ok(LemmaPath {
        w,
        facet_id,
        coefficients: n.to_vec(),
        start: x.iter().map(|v| v.to_f64_lossy()).collect(),
        end: to_f64(&[add(&target, &shift)]).remove(0),
        segments: measured,
        total_length,
    })
}

fn inside(b: &CoverBox, g: &[i64], res: usize) -> bool {
    let r = res as i64;
    g.iter().enumerate().all(|(c, &x)| x >= b.lo[c] * r && x <= b.hi[c] * r)
}

fn for_each_cell(b: &CoverBox, mut f: impl FnMut(&[i64])) {
    let m = b.lo.len();
    let mut cell = b.lo.clone();
    loop {
        f(&cell);
        let mut c = m;
        loop {
            if c == 0 {
                return;
            }
            c -= 1;
            if cell[c] + 1 < b.hi[c] {
                cell[c] += 1;
                break;
            }
            cell[c] = b.lo[c];
        }
    }
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct LedgerRow {
    pub segment: usize,
    pub kind: String,
    pub length: f64,
    pub budget: f64,
    pub within: bool,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct BoundReport {
    pub w: Vec<i64>,
    pub lambda_w: f64,
    pub c_hat: f64,
    pub total_length: f64,
    pub bound: f64,
    pub tol: f64,
    pub ledger: Vec<LedgerRow>,
    pub pass: bool,
}

/// Compares the path length with `λ(w) + Ĉ`, and each segment with its
/// share of the constant: the outer connectors with `diam̂`, the inner
/// ones with `D̂ + e` and each ride with `n_j ε_j + e`.
pub fn verify_bound<T: Real>(metric: &HedlundMetric<T>, c_hat: &ConstantC, path: &LemmaPath, tol: f64) -> BoundReport {
    let poly = metric.polytope();
    let lambda_w = num_traits::ToPrimitive::to_f64(&poly.norm(&RationalVec::from_ints(&path.w))).unwrap_or(f64::NAN);
    let facet = &poly.facets()[path.facet_id];
    let e = c_hat.e_const;
    let last = path.segments.len() - 1;
    let ledger = path
        .segments
        .iter()
        .enumerate()
        .map(|(i, s)| {
            let (kind, budget) = match &s.kind {
                SegmentKind::Connector if i == 0 || i == last => ("connector", c_hat.diam),
                SegmentKind::Connector => ("connector", c_hat.line_gap + e),
                SegmentKind::Ride { vertex, .. } => {
                    let slot = facet.vertex_ids.iter().position(|v| v == vertex).unwrap_or(0);
                    let eps = poly.vertices()[*vertex].epsilon_f64();
                    ("ride", path.coefficients[slot] as f64 * eps + e)
                }
            };
            LedgerRow {
                segment: i,
                kind: kind.into(),
                length: s.length,
                budget,
                within: s.length <= budget + tol,
            }
        })
        .collect();
    let bound = lambda_w + c_hat.value;
    BoundReport {
        w: path.w.clone(),
        lambda_w,
        c_hat: c_hat.value,
        total_length: path.total_length,
        bound,
        tol,
        ledger,
        pass: path.total_length <= bound + tol,
    }
}

impl LemmaPath {
    /// CSV polyline: `segment, kind, point, x0, x1, ...`.
    pub fn to_csv(&self) -> Result<String> {
        let m = self.start.len();
        let mut wtr = csv::Writer::from_writer(Vec::new());
        let mut header = vec!["segment".to_string(), "kind".into(), "point".into()];
        header.extend((0..m).map(|c| format!("x{c}")));
        wtr.write_record(&header)?;
        for (i, s) in self.segments.iter().enumerate() {
            let kind = match s.kind {
                SegmentKind::Connector => "connector",
                SegmentKind::Ride { .. } => "ride",
            };
            for (k, p) in s.points.iter().enumerate() {
                let mut row = vec![i.to_string(), kind.to_string(), k.to_string()];
                row.extend(p.iter().map(|x| format!("{x:.12}")));
                wtr.write_record(&row)?;
            }
        }
        let bytes = wtr.into_inner().map_err(|e| Error::Io(e.to_string()))?;
        Ok(String::from_utf8(bytes).expect("csv is utf-8"))
    }

    pub fn rides(&self) -> usize {
        self.segments
            .iter()
            .filter(|s| matches!(s.kind, SegmentKind::Ride { .. }))
            .count()
    }
}
