//! Exact convex geometry of admissible polytopes.
//!
//! All arithmetic in this module is carried out in big-integer rationals.
//! Floating point only appears in the conversion helpers used by the
//! numerical layers.

use std::collections::BTreeSet;
use std::fmt;
use std::str::FromStr;

use num_bigint::BigInt;
use num_integer::Integer;
use num_rational::BigRational;
use num_traits::{One, Signed, ToPrimitive, Zero};

use crate::error::{Error, Result};
use crate::scalar::Real;

/// Parses `"p/q"` or `"p"` into a reduced rational.
pub fn parse_rational(s: &str) -> Result<BigRational> {
    let err = |m: &str| Error::Parse {
        field: format!("rational {s:?}"),
        message: m.to_string(),
    };
    let t = s.trim();
    let (num, den) = match t.split_once('/') {
        Some((n, d)) => (n.trim(), d.trim()),
        None => (t, "1"),
    };
    let n = BigInt::from_str(num).map_err(|_| err("bad numerator"))?;
    let d = BigInt::from_str(den).map_err(|_| err("bad denominator"))?;
    if d.is_zero() {
        return Err(err("zero denominator"));
    }
    Ok(BigRational::new(n, d))
}

/// Canonical text form: `"p/q"`, or `"p"` when the denominator is 1.
pub fn format_rational(r: &BigRational) -> String {
    if r.denom().is_one() {
        r.numer().to_string()
    } else {
        format!("{}/{}", r.numer(), r.denom())
    }
}

fn rational_to_f64(r: &BigRational) -> f64 {
    r.to_f64().unwrap_or(f64::NAN)
}

/// A vector of exact rationals, always stored in reduced form.
#[derive(Clone, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct RationalVec(pub Vec<BigRational>);

impl RationalVec {
    pub fn from_ints(v: &[i64]) -> Self {
        RationalVec(v.iter().map(|&x| BigRational::from_integer(x.into())).collect())
    }

    pub fn parse(coords: &[impl AsRef<str>]) -> Result<Self> {
        coords
            .iter()
            .map(|c| parse_rational(c.as_ref()))
            .collect::<Result<Vec<_>>>()
            .map(RationalVec)
    }

    pub fn to_strings(&self) -> Vec<String> {
        self.0.iter().map(format_rational).collect()
    }

    pub fn dim(&self) -> usize {
        self.0.len()
    }

    pub fn is_zero(&self) -> bool {
        self.0.iter().all(Zero::is_zero)
    }

    pub fn dot(&self, other: &RationalVec) -> BigRational {
        self.0
            .iter()
            .zip(&other.0)
            .fold(BigRational::zero(), |acc, (a, b)| acc + a * b)
    }

    pub fn neg(&self) -> RationalVec {
        RationalVec(self.0.iter().map(|x| -x).collect())
    }

    pub fn scale(&self, q: &BigRational) -> RationalVec {
        RationalVec(self.0.iter().map(|x| x * q).collect())
    }

    pub fn add(&self, other: &RationalVec) -> RationalVec {
        RationalVec(self.0.iter().zip(&other.0).map(|(a, b)| a + b).collect())
    }

    pub fn to_real<T: Real>(&self) -> Vec<T> {
        self.0.iter().map(|x| T::lit(rational_to_f64(x))).collect()
    }

    /// If `other = c * self` for some rational `c`, returns `c`.
    fn collinear_factor(&self, other: &RationalVec) -> Option<BigRational> {
        let k = self.0.iter().position(|x| !x.is_zero())?;
        let c = &other.0[k] / &self.0[k];
        (self.scale(&c) == *other).then_some(c)
    }
}

impl fmt::Debug for RationalVec {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "({})", self.to_strings().join(", "))
    }
}

impl fmt::Display for RationalVec {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        fmt::Debug::fmt(self, f)
    }
}

/// A polytope vertex together with its primitive integer class.
#[derive(Clone, Debug, PartialEq)]
pub struct VertexDatum {
    pub v_tilde: RationalVec,
    /// Indivisible integer class, `epsilon * v_tilde`.
    pub v: Vec<i64>,
    pub epsilon: BigRational,
}

impl VertexDatum {
    pub fn epsilon_f64(&self) -> f64 {
        rational_to_f64(&self.epsilon)
    }

    fn negated(&self) -> VertexDatum {
        VertexDatum {
            v_tilde: self.v_tilde.neg(),
            v: self.v.iter().map(|x| -x).collect(),
            epsilon: self.epsilon.clone(),
        }
    }
}

/// Splits a nonzero rational vector into `epsilon * v_tilde = v` with `v`
/// an integer vector whose entries have gcd 1.
pub fn primitivize(v_tilde: &RationalVec) -> Result<VertexDatum> {
    if v_tilde.is_zero() {
        return Err(Error::ZeroVector);
    }
    let lcm = v_tilde
        .0
        .iter()
        .fold(BigInt::one(), |acc, x| acc.lcm(x.denom()));
    let scaled: Vec<BigInt> = v_tilde
        .0
        .iter()
        .map(|x| (x * BigRational::from_integer(lcm.clone())).to_integer())
        .collect();
    let gcd = scaled.iter().fold(BigInt::zero(), |acc, x| acc.gcd(x));
    let v = scaled
        .iter()
        .map(|x| (x / &gcd).to_i64())
        .collect::<Option<Vec<i64>>>()
        .ok_or_else(|| Error::Overflow(v_tilde.to_string()))?;
    Ok(VertexDatum {
        v_tilde: v_tilde.clone(),
        v,
        epsilon: BigRational::new(lcm, gcd),
    })
}

/// A facet of the polytope: its vertex indices and supporting functional.
#[derive(Clone, Debug, PartialEq)]
pub struct Facet {
    /// Indices into [`Polytope::vertices`], ascending.
    pub vertex_ids: Vec<usize>,
    /// Covector equal to 1 on the facet.
    pub lambda: RationalVec,
}

/// A validated admissible polytope.
///
/// `vertices` has length `2N`: entries `0..N` are the representatives
/// `ṽ_1..ṽ_N` (the first of each `±` pair in input order) and entry `i + N`
/// is the negation of entry `i`.
#[derive(Clone, Debug)]
pub struct Polytope {
    dim: usize,
    vertices: Vec<VertexDatum>,
    facets: Vec<Facet>,
    kappa: usize,
}

/// Solves `rows * x = rhs` exactly. Returns `None` if `rows` is singular.
/// `rows` must be square.
pub(crate) fn solve_exact(rows: &[Vec<BigRational>], rhs: &[BigRational]) -> Option<Vec<BigRational>> {
    let n = rows.len();
    let mut a: Vec<Vec<BigRational>> = rows
        .iter()
        .zip(rhs)
        .map(|(r, b)| {
            let mut r = r.clone();
            r.push(b.clone());
            r
        })
        .collect();
    for col in 0..n {
        let pivot = (col..n).find(|&r| !a[r][col].is_zero())?;
        a.swap(col, pivot);
        let p = a[col][col].clone();
        for x in a[col].iter_mut() {
            *x /= &p;
        }
        for r in 0..n {
            if r != col && !a[r][col].is_zero() {
                let f = a[r][col].clone();
                let pivot_row = a[col].clone();
                for (x, y) in a[r].iter_mut().zip(&pivot_row) {
                    *x -= &f * y;
                }
            }
        }
    }
    Some(a.into_iter().map(|mut r| r.pop().unwrap()).collect())
}

/// Rank of a list of rational vectors.
pub(crate) fn rank(vectors: &[&RationalVec]) -> usize {
    let mut rows: Vec<Vec<BigRational>> = vectors.iter().map(|v| v.0.clone()).collect();
    let cols = rows.first().map_or(0, |r| r.len());
    let mut rank = 0;
    for col in 0..cols {
        let Some(p) = (rank..rows.len()).find(|&r| !rows[r][col].is_zero()) else {
            continue;
        };
        rows.swap(rank, p);
        let pivot = rows[rank].clone();
        for r in rank + 1..rows.len() {
            if !rows[r][col].is_zero() {
                let f = &rows[r][col] / &pivot[col];
                for (x, y) in rows[r].iter_mut().zip(&pivot) {
                    *x -= &f * y;
                }
            }
        }
        rank += 1;
    }
    rank
}

/// Calls `f` with each `k`-subset of `0..n` in lexicographic order.
pub(crate) fn for_each_subset(n: usize, k: usize, mut f: impl FnMut(&[usize])) {
    if k > n {
        return;
    }
    let mut idx: Vec<usize> = (0..k).collect();
    loop {
        f(&idx);
        let Some(i) = (0..k).rev().find(|&i| idx[i] != i + n - k) else {
            return;
        };
        idx[i] += 1;
        for j in i + 1..k {
            idx[j] = idx[j - 1] + 1;
        }
    }
}

/// Enumerates the facets of the hull of `points` by exhaustive search over
/// `dim`-subsets. Facets are returned in order of discovery.
pub fn enumerate_facets(points: &[RationalVec]) -> Result<Vec<Facet>> {
    let dim = points.first().map_or(0, RationalVec::dim);
    let one = BigRational::one();
    let ones = vec![one.clone(); dim];
    let mut seen = BTreeSet::new();
    let mut facets = Vec::new();
    for_each_subset(points.len(), dim, |subset| {
        let rows: Vec<Vec<BigRational>> = subset.iter().map(|&i| points[i].0.clone()).collect();
        let Some(lambda) = solve_exact(&rows, &ones) else {
            return;
        };
        let lambda = RationalVec(lambda);
        if seen.contains(&lambda) {
            return;
        }
        let values: Vec<BigRational> = points.iter().map(|p| lambda.dot(p)).collect();
        if values.iter().any(|x| *x > one) {
            return;
        }
        let vertex_ids = (0..points.len()).filter(|&j| values[j] == one).collect();
        seen.insert(lambda.clone());
        facets.push(Facet { vertex_ids, lambda });
    });
    for f in &facets {
        let on: Vec<&RationalVec> = f.vertex_ids.iter().map(|&j| &points[j]).collect();
        if rank(&on) < dim {
            return Err(Error::DegenerateFacet(format!("{:?}", f.lambda)));
        }
    }
    Ok(facets)
}

impl Polytope {
    /// Validates a vertex list and builds the polytope. Missing negations are
    /// added; each vector's primitive class is computed.
    pub fn from_vertices(raw: &[RationalVec]) -> Result<Polytope> {
        let first = raw.first().ok_or(Error::EmptyInput)?;
        let dim = first.dim();
        if dim < 3 {
            return Err(Error::DimensionTooSmall(dim));
        }
        if dim > crate::MAX_DIM {
            return Err(Error::DimensionTooLarge(dim));
        }
        for v in raw {
            if v.dim() != dim {
                return Err(Error::DimensionMismatch {
                    expected: dim,
                    found: v.dim(),
                });
            }
            if v.is_zero() {
                return Err(Error::ZeroVector);
            }
        }

        let mut reps: Vec<RationalVec> = Vec::new();
        for a in raw {
            if reps.iter().any(|r| r == a || r.neg() == *a) {
                continue;
            }
            for b in raw {
                if let Some(c) = a.collinear_factor(b) {
                    if c.is_positive() && !c.is_one() {
                        let inner = if c > BigRational::one() { a } else { b };
                        return Err(Error::NotExtreme(inner.to_string()));
                    }
                    if c.is_negative() && c != -BigRational::one() {
                        return Err(Error::NotSymmetric(format!(
                            "{a} has no negation; found {b} on the opposite ray instead"
                        )));
                    }
                }
            }
            reps.push(a.clone());
        }

        let rep_refs: Vec<&RationalVec> = reps.iter().collect();
        let r = rank(&rep_refs);
        if r < dim {
            return Err(Error::NotSpanning { rank: r, dim });
        }

        let data = reps.iter().map(primitivize).collect::<Result<Vec<_>>>()?;
        let mut vertices = data.clone();
        vertices.extend(data.iter().map(VertexDatum::negated));
        let points: Vec<RationalVec> = vertices.iter().map(|d| d.v_tilde.clone()).collect();
        let facets = enumerate_facets(&points)?;

        for (j, p) in points.iter().enumerate() {
            let normals: Vec<&RationalVec> = facets
                .iter()
                .filter(|f| f.vertex_ids.contains(&j))
                .map(|f| &f.lambda)
                .collect();
            if rank(&normals) < dim {
                return Err(Error::NotExtreme(p.to_string()));
            }
        }

        let kappa = facets.iter().map(|f| f.vertex_ids.len()).max().unwrap_or(0);
        let poly = Polytope {
            dim,
            vertices,
            facets,
            kappa,
        };
        poly.check_facet_bounds()?;
        Ok(poly)
    }

    /// Parses string coordinates and calls [`Polytope::from_vertices`].
    pub fn from_strings(raw: &[Vec<String>]) -> Result<Polytope> {
        let vs = raw
            .iter()
            .map(|c| RationalVec::parse(c))
            .collect::<Result<Vec<_>>>()?;
        Polytope::from_vertices(&vs)
    }

    /// Checks `λ_i(ṽ_j) = 1` on `J_i`, `-1` on `-J_i`, and `-1 < λ_i(ṽ_j) < 1`
    /// for all other vertices.
    pub fn check_facet_bounds(&self) -> Result<()> {
        let one = BigRational::one();
        for (i, f) in self.facets.iter().enumerate() {
            for (j, d) in self.vertices.iter().enumerate() {
                let val = f.lambda.dot(&d.v_tilde);
                let n = self.n_classes();
                let antipode = if j < n { j + n } else { j - n };
                let ok = if f.vertex_ids.contains(&j) {
                    val == one
                } else if f.vertex_ids.contains(&antipode) {
                    val == -one.clone()
                } else {
                    val < one && val > -one.clone()
                };
                if !ok {
                    return Err(Error::DegenerateFacet(format!(
                        "facet {i} takes value {} at vertex {j}",
                        format_rational(&val)
                    )));
                }
            }
        }
        Ok(())
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    /// Number of `±` vertex pairs, `N`.
    pub fn n_classes(&self) -> usize {
        self.vertices.len() / 2
    }

    pub fn vertices(&self) -> &[VertexDatum] {
        &self.vertices
    }

    /// The representatives `ṽ_1..ṽ_N`.
    pub fn representatives(&self) -> &[VertexDatum] {
        &self.vertices[..self.n_classes()]
    }

    /// Primitive classes `v_1..v_N`.
    pub fn classes(&self) -> Vec<Vec<i64>> {
        self.representatives().iter().map(|d| d.v.clone()).collect()
    }

    pub fn epsilons(&self) -> Vec<f64> {
        self.representatives().iter().map(VertexDatum::epsilon_f64).collect()
    }

    pub fn facets(&self) -> &[Facet] {
        &self.facets
    }

    pub fn kappa(&self) -> usize {
        self.kappa
    }

    /// Maps a vertex index to its curve (class) index and sign.
    pub fn class_of_vertex(&self, j: usize) -> (usize, i64) {
        let n = self.n_classes();
        if j < n {
            (j, 1)
        } else {
            (j - n, -1)
        }
    }

    /// The polytope norm: the maximum of the facet functionals.
    pub fn norm(&self, v: &RationalVec) -> BigRational {
        self.facets
            .iter()
            .map(|f| f.lambda.dot(v))
            .max()
            .expect("polytope has facets")
    }

    /// Floating-point evaluation of the polytope norm.
    pub fn norm_real<T: Real>(&self, v: &[T]) -> T {
        self.facets
            .iter()
            .map(|f| crate::scalar::dot(&f.lambda.to_real::<T>(), v))
            .fold(T::neg_infinity(), T::max)
    }

    /// Writes `v` as a nonnegative combination of the vertices of the first
    /// facet whose functional attains the norm. Among the basic solutions the
    /// lexicographically smallest coefficient vector is returned.
    pub fn cone_decompose(&self, v: &RationalVec) -> Result<(usize, Vec<BigRational>)> {
        if v.is_zero() {
            return Err(Error::ZeroVector);
        }
        let norm = self.norm(v);
        let (facet_id, facet) = self
            .facets
            .iter()
            .enumerate()
            .find(|(_, f)| f.lambda.dot(v) == norm)
            .expect("maximum is attained");
        let alpha = self
            .basic_solutions(facet, v)
            .into_iter()
            .min()
            .ok_or_else(|| Error::DegenerateFacet(format!("no cone decomposition of {v}")))?;
        Ok((facet_id, alpha))
    }

    /// All nonnegative solutions of `Σ α_j ṽ_j = v` supported on a basis of
    /// `dim` facet vertices, indexed by the facet's vertex order.
    fn basic_solutions(&self, facet: &Facet, v: &RationalVec) -> Vec<Vec<BigRational>> {
        let ids = &facet.vertex_ids;
        let mut out = Vec::new();
        for_each_subset(ids.len(), self.dim, |basis| {
            // Transposed system: columns are the basis vertices.
            let rows: Vec<Vec<BigRational>> = (0..self.dim)
                .map(|r| {
                    basis
                        .iter()
                        .map(|&b| self.vertices[ids[b]].v_tilde.0[r].clone())
                        .collect()
                })
                .collect();
            if let Some(sol) = solve_exact(&rows, &v.0) {
                if sol.iter().all(|x| !x.is_negative()) {
                    let mut alpha = vec![BigRational::zero(); ids.len()];
                    for (&b, x) in basis.iter().zip(sol) {
                        alpha[b] = x;
                    }
                    out.push(alpha);
                }
            }
        });
        out
    }

    /// Nonnegative integer coefficients `n_j` with `w = Σ n_j u_j`, where
    /// `u_j` runs over the primitive classes of the facet's vertices.
    pub fn integer_coefficients(&self, facet_id: usize, w: &[i64]) -> Option<Vec<u64>> {
        let facet = &self.facets[facet_id];
        let wr = RationalVec::from_ints(w);
        let lam_w = facet.lambda.dot(&wr);
        if lam_w != self.norm(&wr) {
            return None;
        }
        for alpha in {
            let mut sols = self.basic_solutions(facet, &wr);
            sols.sort();
            sols
        } {
            let n: Option<Vec<u64>> = alpha
                .iter()
                .zip(&facet.vertex_ids)
                .map(|(a, &j)| {
                    let q = a / &self.vertices[j].epsilon;
                    q.is_integer().then(|| q.to_integer().to_u64()).flatten()
                })
                .collect();
            if n.is_some() {
                return n;
            }
        }
        // Integer points of the cone that are not integral basic solutions:
        // bounded search using Σ n_j ε_j = λ(w).
        let eps: Vec<BigRational> = facet
            .vertex_ids
            .iter()
            .map(|&j| self.vertices[j].epsilon.clone())
            .collect();
        let prims: Vec<&Vec<i64>> = facet.vertex_ids.iter().map(|&j| &self.vertices[j].v).collect();
        let mut n = vec![0u64; eps.len()];
        fn search(
            k: usize,
            budget: &BigRational,
            eps: &[BigRational],
            prims: &[&Vec<i64>],
            rem: &mut Vec<i64>,
            n: &mut Vec<u64>,
        ) -> bool {
            if k == eps.len() {
                return rem.iter().all(|&x| x == 0);
            }
            let mut used = BigRational::zero();
            let mut count = 0u64;
            loop {
                n[k] = count;
                if search(k + 1, &(budget - &used), eps, prims, rem, n) {
                    return true;
                }
                used += &eps[k];
                if used > *budget {
                    break;
                }
                for (r, p) in rem.iter_mut().zip(prims[k].iter()) {
                    *r -= p;
                }
                count += 1;
            }
            for (r, p) in rem.iter_mut().zip(prims[k].iter()) {
                *r += p * count as i64;
            }
            n[k] = 0;
            false
        }
        let mut rem = w.to_vec();
        search(0, &lam_w, &eps, &prims, &mut rem, &mut n).then_some(n)
    }

    /// Finds the first facet (by index) whose functional attains the norm of
    /// `w` and on which `w` is a nonnegative integer combination of primitive
    /// classes. Returns the facet index and the coefficients.
    pub fn integer_decomposition(&self, w: &[i64]) -> Result<(usize, Vec<u64>)> {
        if w.len() != self.dim {
            return Err(Error::DimensionMismatch {
                expected: self.dim,
                found: w.len(),
            });
        }
        if w.iter().all(|&x| x == 0) {
            return Err(Error::ZeroVector);
        }
        (0..self.facets.len())
            .find_map(|i| self.integer_coefficients(i, w).map(|n| (i, n)))
            .ok_or_else(|| Error::NotInIntegerCone(w.to_vec()))
    }

    /// The cross-polytope with vertices `±e_1, ..., ±e_m`.
    pub fn cross_polytope(m: usize) -> Result<Polytope> {
        let raw: Vec<RationalVec> = (0..m)
            .map(|k| {
                let mut v = vec![0; m];
                v[k] = 1;
                RationalVec::from_ints(&v)
            })
            .collect();
        Polytope::from_vertices(&raw)
    }

    /// The cube `[-1, 1]^m`; representatives are the vertices with first
    /// coordinate `+1`, in lexicographically decreasing order.
    pub fn hypercube(m: usize) -> Result<Polytope> {
        if m >= 63 {
            return Err(Error::DimensionTooLarge(m));
        }
        let raw: Vec<RationalVec> = (0..1u64 << m)
            .map(|bits| {
                let v: Vec<i64> = (0..m)
                    .map(|k| if bits >> (m - 1 - k) & 1 == 0 { 1 } else { -1 })
                    .collect();
                RationalVec::from_ints(&v)
            })
            .collect();
        Polytope::from_vertices(&raw)
    }

    /// Facet functionals as floating-point covectors.
    pub fn lambdas_real<T: Real>(&self) -> Vec<Vec<T>> {
        self.facets.iter().map(|f| f.lambda.to_real()).collect()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn rv(s: &[&str]) -> RationalVec {
        RationalVec::parse(s).unwrap()
    }

    fn q(s: &str) -> BigRational {
        parse_rational(s).unwrap()
    }

    pub(crate) fn octahedron() -> Polytope {
        Polytope::from_vertices(&[
            RationalVec::from_ints(&[1, 0, 0]),
            RationalVec::from_ints(&[-1, 0, 0]),
            RationalVec::from_ints(&[0, 1, 0]),
            RationalVec::from_ints(&[0, -1, 0]),
            RationalVec::from_ints(&[0, 0, 1]),
            RationalVec::from_ints(&[0, 0, -1]),
        ])
        .unwrap()
    }

    fn cube() -> Polytope {
        let mut vs = Vec::new();
        for a in [1, -1] {
            for b in [1, -1] {
                for c in [1, -1] {
                    vs.push(RationalVec::from_ints(&[a, b, c]));
                }
            }
        }
        Polytope::from_vertices(&vs).unwrap()
    }

    #[test]
    fn rational_text_round_trip() {
        assert_eq!(format_rational(&q("4/6")), "2/3");
        assert_eq!(format_rational(&q("-3")), "-3");
        assert_eq!(format_rational(&q("5/1")), "5");
        assert!(parse_rational("1/0").is_err());
        assert!(parse_rational("x").is_err());
    }

    #[test]
    fn primitivize_examples() {
        let d = primitivize(&rv(&["1", "0", "0"])).unwrap();
        assert_eq!((d.v, d.epsilon), (vec![1, 0, 0], q("1")));
        let d = primitivize(&rv(&["1/2", "1/2", "0"])).unwrap();
        assert_eq!((d.v, d.epsilon), (vec![1, 1, 0], q("2")));
        let d = primitivize(&rv(&["2/3", "-4/3", "2"])).unwrap();
        assert_eq!((d.v, d.epsilon.clone()), (vec![1, -2, 3], q("3/2")));
        assert_eq!(d.v_tilde.scale(&d.epsilon), RationalVec::from_ints(&[1, -2, 3]));
        assert_eq!(primitivize(&rv(&["0", "0", "0"])), Err(Error::ZeroVector));
    }

    #[test]
    fn octahedron_facets() {
        let p = octahedron();
        assert_eq!(p.facets().len(), 8);
        assert_eq!(p.kappa(), 3);
        let lambdas: BTreeSet<_> = p.facets().iter().map(|f| f.lambda.clone()).collect();
        let mut expected = BTreeSet::new();
        for a in [-1, 1] {
            for b in [-1, 1] {
                for c in [-1, 1] {
                    expected.insert(RationalVec::from_ints(&[a, b, c]));
                }
            }
        }
        assert_eq!(lambdas, expected);
        // First facet is {e1, e2, e3}.
        assert_eq!(p.facets()[0].vertex_ids, vec![0, 1, 2]);
    }

    #[test]
    fn cube_facets() {
        let p = cube();
        assert_eq!(p.facets().len(), 6);
        assert_eq!(p.kappa(), 4);
        assert_eq!(p.n_classes(), 4);
        let lambdas: BTreeSet<_> = p.facets().iter().map(|f| f.lambda.clone()).collect();
        let mut expected = BTreeSet::new();
        for i in 0..3 {
            for s in [-1, 1] {
                let mut e = vec![0; 3];
                e[i] = s;
                expected.insert(RationalVec::from_ints(&e));
            }
        }
        assert_eq!(lambdas, expected);
    }

    #[test]
    fn cross_polytope_4d_kappa() {
        let mut vs = Vec::new();
        for i in 0..4 {
            let mut e = vec![0; 4];
            e[i] = 1;
            vs.push(RationalVec::from_ints(&e));
        }
        let p = Polytope::from_vertices(&vs).unwrap();
        assert_eq!(p.kappa(), 4);
        assert_eq!(p.facets().len(), 16);
    }

    #[test]
    fn negations_are_completed() {
        let p = Polytope::from_vertices(&[
            RationalVec::from_ints(&[1, 0, 0]),
            RationalVec::from_ints(&[0, 1, 0]),
            RationalVec::from_ints(&[0, 0, 1]),
        ])
        .unwrap();
        assert_eq!(p.vertices().len(), 6);
        assert_eq!(p.facets().len(), 8);
    }

    #[test]
    fn validation_errors() {
        let e1 = RationalVec::from_ints(&[1, 0, 0]);
        let e2 = RationalVec::from_ints(&[0, 1, 0]);
        let e3 = RationalVec::from_ints(&[0, 0, 1]);
        let half_e2 = rv(&["0", "1/2", "0"]);
        let r = Polytope::from_vertices(&[e1.clone(), e1.neg(), e2.clone(), e2.neg(), half_e2.clone(), half_e2.neg()]);
        assert!(matches!(r, Err(Error::NotExtreme(_))));

        let r = Polytope::from_vertices(&[e1.clone(), e1.scale(&q("-2")), e2.clone(), e3.clone()]);
        assert!(matches!(r, Err(Error::NotSymmetric(_))));

        let r = Polytope::from_vertices(&[e1.clone(), e2.clone()]);
        assert!(matches!(r, Err(Error::NotSpanning { rank: 2, dim: 3 })));

        let r = Polytope::from_vertices(&[RationalVec::from_ints(&[1, 0]), RationalVec::from_ints(&[0, 1])]);
        assert_eq!(r.unwrap_err(), Error::DimensionTooSmall(2));

        // (1,1,0)/4 lies inside the octahedron.
        let r = Polytope::from_vertices(&[e1.clone(), e2.clone(), e3.clone(), rv(&["1/4", "1/4", "0"])]);
        assert!(matches!(r, Err(Error::NotExtreme(_))));

        // (1/2,1/2,0) lies on an edge of the octahedron.
        let r = Polytope::from_vertices(&[e1, e2, e3, rv(&["1/2", "1/2", "0"])]);
        assert!(matches!(r, Err(Error::NotExtreme(_))));
    }

    #[test]
    fn norm_examples() {
        let p = octahedron();
        assert_eq!(p.norm(&RationalVec::from_ints(&[1, 1, 1])), q("3"));
        assert_eq!(p.norm(&RationalVec::from_ints(&[-2, 0, 0])), q("2"));
        assert_eq!(p.norm(&RationalVec::from_ints(&[0, 0, 0])), q("0"));
        assert_eq!(cube().norm(&RationalVec::from_ints(&[1, 1, 1])), q("1"));
    }

    #[test]
    fn cone_decompose_examples() {
        let p = octahedron();
        let (f, a) = p.cone_decompose(&RationalVec::from_ints(&[1, 1, 1])).unwrap();
        assert_eq!(p.facets()[f].vertex_ids, vec![0, 1, 2]);
        assert_eq!(a, vec![q("1"), q("1"), q("1")]);

        let (f, a) = p.cone_decompose(&RationalVec::from_ints(&[2, 0, 0])).unwrap();
        assert_eq!(f, 0);
        assert_eq!(a, vec![q("2"), q("0"), q("0")]);

        let c = cube();
        let (f, a) = c.cone_decompose(&RationalVec::from_ints(&[1, 1, 1])).unwrap();
        let ids = &c.facets()[f].vertex_ids;
        let k = ids.iter().position(|&j| c.vertices()[j].v == vec![1, 1, 1]).unwrap();
        for (i, x) in a.iter().enumerate() {
            assert_eq!(*x, if i == k { q("1") } else { q("0") });
        }
        assert_eq!(p.cone_decompose(&RationalVec::from_ints(&[0, 0, 0])), Err(Error::ZeroVector));
    }

    #[test]
    fn integer_decomposition() {
        let p = octahedron();
        let (f, n) = p.integer_decomposition(&[2, 1, 0]).unwrap();
        assert_eq!(p.facets()[f].vertex_ids, vec![0, 1, 2]);
        assert_eq!(n, vec![2, 1, 0]);
        let (f, n) = p.integer_decomposition(&[1, 0, 0]).unwrap();
        assert_eq!((f, n), (0, vec![1, 0, 0]));
        // (1,-1,0) lies in the cone over the facet {e1,-e2,e3}.
        assert!(p.integer_decomposition(&[1, -1, 0]).is_ok());

        // A polytope with a non-unit epsilon: vertices 2*e1, e2, e3.
        let q2 = Polytope::from_vertices(&[
            RationalVec::from_ints(&[2, 0, 0]),
            RationalVec::from_ints(&[0, 1, 0]),
            RationalVec::from_ints(&[0, 0, 1]),
        ])
        .unwrap();
        assert_eq!(q2.representatives()[0].v, vec![1, 0, 0]);
        assert_eq!(q2.representatives()[0].epsilon, q("1/2"));
        let (_, n) = q2.integer_decomposition(&[3, 0, 0]).unwrap();
        assert_eq!(n, vec![3, 0, 0]);
    }

    #[test]
    fn cube_integer_points_off_basic_solutions() {
        let c = cube();
        // (2,0,0) = (1,1,1) + (1,-1,-1) on the facet x = 1.
        let (f, n) = c.integer_decomposition(&[2, 0, 0]).unwrap();
        let facet = &c.facets()[f];
        let mut sum = [0i64; 3];
        for (k, &j) in facet.vertex_ids.iter().enumerate() {
            for (s, x) in sum.iter_mut().zip(&c.vertices()[j].v) {
                *s += n[k] as i64 * x;
            }
        }
        assert_eq!(sum, [2, 0, 0]);
        assert!(matches!(
            c.integer_decomposition(&[1, 0, 0]),
            Err(Error::NotInIntegerCone(_))
        ));
    }

    #[test]
    fn subsets_lexicographic() {
        let mut all = Vec::new();
        for_each_subset(4, 2, |s| all.push(s.to_vec()));
        assert_eq!(all, vec![vec![0, 1], vec![0, 2], vec![0, 3], vec![1, 2], vec![1, 3], vec![2, 3]]);
    }
}
