//! Closed one-forms that calibrate the facet functionals.
//!
//! On the flat torus every good representative has the closed form
//! `η = λ + d(ζ(ℓ) · g_j)` near curve `j`, where `g_j(x) = c_j · n(x)` is
//! affine in the normal displacement `n(x)` and `c_j = λ(v_j) v_j / |v_j|^2 - λ`.
//! Since `c_j · v_j = 0`, `g_j` is well defined on the tube.

use num_rational::BigRational;
use num_traits::Zero;

use crate::curves::{CurveSystem, TubeHit};
use crate::polytope::{Polytope, RationalVec};
use crate::quad::adaptive_simpson;
use crate::scalar::{dot, Real, MAX_DIM};

/// Smooth cut-off equal to 1 on `[0, eps]` and 0 on `[rho, ∞)`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct BumpProfile<T> {
    pub eps: T,
    pub rho: T,
}

#[inline]
fn exp_kernel<T: Real>(t: T) -> T {
    if t > T::zero() {
        (-t.recip()).exp()
    } else {
        T::zero()
    }
}

impl<T: Real> BumpProfile<T> {
    pub fn new(eps: T, rho: T) -> Self {
        assert!(T::zero() < eps && eps < rho, "bump radii must satisfy 0 < eps < rho");
        BumpProfile { eps, rho }
    }

    /// `σ(t) = B(t) / (B(t) + B(1 - t))` and its derivative.
    pub fn transition(t: T) -> (T, T) {
        let one = T::one();
        if t <= T::zero() {
            return (T::zero(), T::zero());
        }
        if t >= one {
            return (one, T::zero());
        }
        let (a, b) = (exp_kernel(t), exp_kernel(one - t));
        let sum = a + b;
        let (da, db) = (a / (t * t), b / ((one - t) * (one - t)));
        // d/dt [a / (a + b)] with b' = -db
        let d = (da * b + a * db) / (sum * sum);
        (a / sum, d)
    }

    /// `ζ(ℓ)` and `dζ/dℓ`.
    pub fn eval(&self, ell: T) -> (T, T) {
        if ell <= self.eps {
            return (T::one(), T::zero());
        }
        if ell >= self.rho {
            return (T::zero(), T::zero());
        }
        let width = self.rho - self.eps;
        let (s, ds) = Self::transition((self.rho - ell) / width);
        (s, -ds / width)
    }
}

/// Good representative of one facet functional.
#[derive(Clone, Debug)]
pub struct GoodForm<T> {
    pub facet_id: usize,
    /// Constant covector `λ_i`.
    pub base: Vec<T>,
    /// `λ_i(v_j)` for each curve.
    pub lambda_v: Vec<T>,
    /// `c_j = λ_i(v_j) v_j / |v_j|^2 - λ_i`.
    pub tube_cov: Vec<Vec<T>>,
    /// Value of the form inside `U_ε(Γ_j)`: `λ_i(v_j) v_j / |v_j|^2`.
    pub inner: Vec<Vec<T>>,
    /// Constant added to `g_j`; zero anchors `g_j` on the curve itself.
    pub potential_shift: Vec<T>,
}

/// Exact tube covector `c_j` of facet `facet` for class `v`.
pub fn tube_covector_exact(poly: &Polytope, facet: usize, v: &[i64]) -> RationalVec {
    let lambda = &poly.facets()[facet].lambda;
    let vr = RationalVec::from_ints(v);
    let nsq = vr.dot(&vr);
    let coef = lambda.dot(&vr) / nsq;
    vr.scale(&coef).add(&lambda.neg())
}

impl<T: Real> GoodForm<T> {
    pub fn build(poly: &Polytope, curves: &CurveSystem<T>, facet_id: usize) -> Self {
        let lambda = &poly.facets()[facet_id].lambda;
        let mut lambda_v = Vec::new();
        let mut tube_cov = Vec::new();
        let mut inner = Vec::new();
        for v in curves.directions() {
            let vr = RationalVec::from_ints(v);
            let lv: BigRational = lambda.dot(&vr);
            let c = tube_covector_exact(poly, facet_id, v);
            debug_assert!(c.dot(&vr).is_zero());
            let a = c.add(lambda);
            lambda_v.push(RationalVec(vec![lv]).to_real::<T>()[0]);
            tube_cov.push(c.to_real());
            inner.push(a.to_real());
        }
        GoodForm {
            facet_id,
            base: lambda.to_real(),
            potential_shift: vec![T::zero(); lambda_v.len()],
            lambda_v,
            tube_cov,
            inner,
        }
    }

    /// `g_j` at a located point: `c_j · n`.
    #[inline]
    pub fn tube_potential(&self, hit: &TubeHit<T>) -> T {
        let m = self.base.len();
        dot(&self.tube_cov[hit.curve], &hit.normal[..m]) + self.potential_shift[hit.curve]
    }

    /// Evaluates the form given the tube location of the point.
    pub fn eval_hit(&self, hit: Option<&TubeHit<T>>, bump: &BumpProfile<T>, out: &mut [T]) {
        let m = self.base.len();
        match hit {
            Some(h) if h.coords.ell < bump.rho => {
                let j = h.curve;
                if h.coords.ell <= bump.eps {
                    out[..m].copy_from_slice(&self.inner[j]);
                    return;
                }
                let (z, dz) = bump.eval(h.coords.ell);
                let g = self.tube_potential(h);
                let ell = h.coords.ell;
                for c in 0..m {
                    out[c] = self.base[c] + g * dz * h.normal[c] / ell + z * self.tube_cov[j][c];
                }
            }
            _ => out[..m].copy_from_slice(&self.base),
        }
    }

    pub fn eval(&self, curves: &CurveSystem<T>, bump: &BumpProfile<T>, x: &[T]) -> Vec<T> {
        let mut out = vec![T::zero(); self.base.len()];
        self.eval_hit(curves.tube_locate(x).as_ref(), bump, &mut out);
        out
    }

    /// Scalar `ζ(ℓ(x)) g(x)`, periodic on the torus; `η = λ + d` of it.
    pub fn correction(&self, curves: &CurveSystem<T>, bump: &BumpProfile<T>, x: &[T]) -> T {
        match curves.tube_locate(x) {
            Some(h) => bump.eval(h.coords.ell).0 * self.tube_potential(&h),
            None => T::zero(),
        }
    }

    /// Primitive of the form on the cover: `λ · x + ζ g`.
    pub fn primitive(&self, curves: &CurveSystem<T>, bump: &BumpProfile<T>, x: &[T]) -> T {
        dot(&self.base, x) + self.correction(curves, bump, x)
    }

    /// `∫_{γ_j} η` over one period.
    pub fn period(&self, curves: &CurveSystem<T>, bump: &BumpProfile<T>, j: usize) -> T {
        let v = curves.direction_real(j).to_vec();
        let mut buf = [T::zero(); MAX_DIM];
        let mut integrand = |t: T| {
            let x = curves.curve_point(j, t, false);
            self.eval_hit(curves.tube_locate(&x).as_ref(), bump, &mut buf);
            dot(&buf[..v.len()], &v)
        };
        adaptive_simpson(&mut integrand, T::zero(), T::one(), T::lit(1e-12))
    }
}

/// One good form per facet.
pub fn build_all<T: Real>(poly: &Polytope, curves: &CurveSystem<T>) -> Vec<GoodForm<T>> {
    (0..poly.facets().len())
        .map(|i| GoodForm::build(poly, curves, i))
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::curves::{place_curves, Placement};
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn setup() -> (Polytope, CurveSystem<f64>, BumpProfile<f64>) {
        let poly = Polytope::from_vertices(&[
            RationalVec::from_ints(&[1, 0, 0]),
            RationalVec::from_ints(&[0, 1, 0]),
            RationalVec::from_ints(&[0, 0, 1]),
        ])
        .unwrap();
        let curves = place_curves(&poly.classes(), Placement::Deterministic, 0, 0.05).unwrap();
        let bump = BumpProfile::new(curves.eps(), curves.rho());
        (poly, curves, bump)
    }

    fn cube_setup() -> (Polytope, CurveSystem<f64>, BumpProfile<f64>) {
        let mut vs = Vec::new();
        for a in [1, -1] {
            for b in [1, -1] {
                for c in [1, -1] {
                    vs.push(RationalVec::from_ints(&[a, b, c]));
                }
            }
        }
        let poly = Polytope::from_vertices(&vs).unwrap();
        let curves = place_curves(&poly.classes(), Placement::Deterministic, 0, 0.05).unwrap();
        let bump = BumpProfile::new(curves.eps(), curves.rho());
        (poly, curves, bump)
    }

    #[test]
    fn bump_examples() {
        let b = BumpProfile::new(0.1f64, 0.2);
        assert_eq!(b.eval(0.05), (1.0, 0.0));
        assert_eq!(b.eval(0.2), (0.0, 0.0));
        let (z, dz) = b.eval(0.15);
        assert!((z - 0.5).abs() < 1e-15);
        assert!(dz < 0.0);
        // Monotone and derivative consistent with finite differences.
        let mut prev = 1.0;
        for k in 1..100 {
            let ell = 0.1 + 0.1 * k as f64 / 100.0;
            let (z, dz) = b.eval(ell);
            assert!(z <= prev && z > 0.0);
            if (5..95).contains(&k) {
                assert!(z < prev);
            }
            prev = z;
            let h = 1e-6;
            let fd = (b.eval(ell + h).0 - b.eval(ell - h).0) / (2.0 * h);
            assert!((fd - dz).abs() < 1e-5 * (1.0 + dz.abs()));
        }
    }

    #[test]
    fn tube_covector_examples() {
        let (poly, curves, _) = setup();
        assert_eq!(poly.facets()[0].lambda, RationalVec::from_ints(&[1, 1, 1]));
        let form = GoodForm::build(&poly, &curves, 0);
        assert_eq!(form.tube_cov[0], vec![0.0, -1.0, -1.0]);
        for f in 0..poly.facets().len() {
            for v in curves.directions() {
                let c = tube_covector_exact(&poly, f, v);
                assert!(c.dot(&RationalVec::from_ints(v)).is_zero());
            }
            // λ(v_j) = ε_j on the facet's own vertices.
            let form = GoodForm::build(&poly, &curves, f);
            for &j in &poly.facets()[f].vertex_ids {
                let (cls, sign) = poly.class_of_vertex(j);
                assert_eq!(form.lambda_v[cls] * sign as f64, poly.epsilons()[cls]);
            }
        }
    }

    #[test]
    fn locality_is_bit_exact() {
        let (poly, curves, bump) = setup();
        let form = GoodForm::build(&poly, &curves, 0);
        let deep = curves.curve_point(0, 0.4, true);
        assert_eq!(form.eval(&curves, &bump, &deep), vec![1.0, 0.0, 0.0]);
        assert_eq!(form.eval(&curves, &bump, &[0.25, 0.25, 0.25]), vec![1.0, 1.0, 1.0]);
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        for _ in 0..2000 {
            let x: Vec<f64> = (0..3).map(|_| rng.gen()).collect();
            for f in 0..poly.facets().len() {
                let form = GoodForm::build(&poly, &curves, f);
                let val = form.eval(&curves, &bump, &x);
                match curves.tube_locate(&x) {
                    None => assert_eq!(val, form.base),
                    Some(h) if h.coords.ell <= bump.eps => assert_eq!(val, form.inner[h.curve]),
                    _ => {}
                }
            }
        }
    }

    #[test]
    fn annulus_matches_finite_differences() {
        for (poly, curves, bump) in [setup(), cube_setup()] {
            let mut rng = ChaCha8Rng::seed_from_u64(5);
            let mut checked = 0;
            while checked < 200 {
                let x: Vec<f64> = (0..3).map(|_| rng.gen()).collect();
                let Some(h) = curves.tube_locate(&x) else { continue };
                if h.coords.ell <= bump.eps * 1.02 || h.coords.ell >= bump.rho * 0.98 {
                    continue;
                }
                checked += 1;
                for f in 0..poly.facets().len() {
                    let form = GoodForm::build(&poly, &curves, f);
                    let val = form.eval(&curves, &bump, &x);
                    let hstep = 1e-5;
                    for c in 0..3 {
                        let mut xp = x.clone();
                        let mut xm = x.clone();
                        xp[c] += hstep;
                        xm[c] -= hstep;
                        let fd = (form.correction(&curves, &bump, &xp) - form.correction(&curves, &bump, &xm)) / (2.0 * hstep);
                        assert!((val[c] - form.base[c] - fd).abs() < 1e-5, "component {c}: {} vs {fd}", val[c] - form.base[c]);
                    }
                }
            }
        }
    }

    #[test]
    fn periods_equal_lambda_of_class() {
        for (poly, curves, bump) in [setup(), cube_setup()] {
            for f in 0..poly.facets().len() {
                let form = GoodForm::build(&poly, &curves, f);
                for j in 0..curves.len() {
                    let exact = poly.facets()[f].lambda.dot(&RationalVec::from_ints(&curves.directions()[j]));
                    let exact = RationalVec(vec![exact]).to_real::<f64>()[0];
                    assert!((form.period(&curves, &bump, j) - exact).abs() < 1e-9);
                }
            }
        }
        // Cube facet e1 on class (1,-1,1): period 1.
        let (poly, curves, bump) = cube_setup();
        let f = poly.facets().iter().position(|f| f.lambda == RationalVec::from_ints(&[1, 0, 0])).unwrap();
        let j = curves.directions().iter().position(|v| v[0] == 1 && v[1] == -1 && v[2] == 1).unwrap();
        let form = GoodForm::build(&poly, &curves, f);
        assert!((form.period(&curves, &bump, j) - 1.0).abs() < 1e-10);
    }

    #[test]
    fn small_loops_have_zero_circulation() {
        let (poly, curves, bump) = setup();
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        let forms = build_all(&poly, &curves);
        for _ in 0..200 {
            let x: Vec<f64> = (0..3).map(|_| rng.gen()).collect();
            let side = rng.gen_range(0.01..bump.rho / 4.0);
            let (a, b) = {
                let a = rng.gen_range(0..3);
                (a, (a + 1 + rng.gen_range(0..2)) % 3)
            };
            let form = &forms[rng.gen_range(0..forms.len())];
            let corners = {
                let mut c = vec![x.clone(); 4];
                c[1][a] += side;
                c[2][a] += side;
                c[2][b] += side;
                c[3][b] += side;
                c
            };
            let mut circ = 0.0;
            for k in 0..4 {
                let (p, q) = (&corners[k], &corners[(k + 1) % 4]);
                let d: Vec<f64> = p.iter().zip(q).map(|(p, q)| q - p).collect();
                let mut f = |t: f64| {
                    let y: Vec<f64> = p.iter().zip(&d).map(|(p, d)| p + t * d).collect();
                    dot(&form.eval(&curves, &bump, &y), &d)
                };
                circ += adaptive_simpson(&mut f, 0.0, 1.0, 1e-13);
            }
            assert!(circ.abs() <= 1e-8 * 4.0 * side, "circulation {circ}");
        }
    }

    #[test]
    fn finite_difference_curl_is_second_order() {
        let (poly, curves, bump) = setup();
        let form = GoodForm::build(&poly, &curves, 0);
        // A point in the annulus of the e1 curve.
        let b = &curves.offsets()[0];
        let x = vec![b[0] + 0.2, b[1] + 0.11, b[2] + 0.09];
        let curl = |h: f64| {
            let e = |y: &[f64]| form.eval(&curves, &bump, y);
            let mut xp = x.clone();
            xp[1] += h;
            let mut xm = x.clone();
            xm[1] -= h;
            let d1 = (e(&xp)[2] - e(&xm)[2]) / (2.0 * h);
            let mut yp = x.clone();
            yp[2] += h;
            let mut ym = x.clone();
            ym[2] -= h;
            let d2 = (e(&yp)[1] - e(&ym)[1]) / (2.0 * h);
            (d1 - d2).abs()
        };
        let (c1, c2) = (curl(2e-4), curl(1e-4));
        assert!(c1 < 1e-3, "{c1}");
        assert!(c2 <= c1 * 0.3 + 1e-9, "{c1} -> {c2}");
    }

    #[test]
    fn continuity_across_tube_boundary() {
        let (poly, curves, bump) = setup();
        let b = curves.offsets()[0].clone();
        for f in 0..poly.facets().len() {
            let form = GoodForm::build(&poly, &curves, f);
            for r in [bump.rho, bump.eps] {
                let inside = vec![b[0] + 0.3, b[1] + r - 1e-9, b[2]];
                let outside = vec![b[0] + 0.3, b[1] + r + 1e-9, b[2]];
                let (u, w) = (form.eval(&curves, &bump, &inside), form.eval(&curves, &bump, &outside));
                for c in 0..3 {
                    assert!((u[c] - w[c]).abs() <= 1e-6);
                }
            }
        }
    }

    #[test]
    fn potential_shift_keeps_class_and_locality() {
        // A constant shift of g_j adds shift * dζ: still exact, so periods and
        // closedness survive and the form is untouched on U_ε and outside
        // U_ϱ, but the annulus values move.
        let (poly, curves, bump) = setup();
        let base = GoodForm::build(&poly, &curves, 2);
        let mut shifted = base.clone();
        shifted.potential_shift[0] = 0.3;
        for j in 0..curves.len() {
            assert!((base.period(&curves, &bump, j) - shifted.period(&curves, &bump, j)).abs() < 1e-10);
        }
        let b = curves.offsets()[0].clone();
        let deep = [b[0] + 0.5, b[1] + 0.05, b[2]];
        assert_eq!(base.eval(&curves, &bump, &deep), shifted.eval(&curves, &bump, &deep));
        let outside = [0.25, 0.25, 0.25];
        assert_eq!(base.eval(&curves, &bump, &outside), shifted.eval(&curves, &bump, &outside));
        let annulus = [b[0] + 0.5, b[1] + 0.15, b[2]];
        assert_ne!(base.eval(&curves, &bump, &annulus), shifted.eval(&curves, &bump, &annulus));
        // Circulation around a loop crossing the annulus still vanishes.
        let corners = [[0.5, 0.1, 0.0], [0.5, 0.2, 0.0], [0.5, 0.2, 0.1], [0.5, 0.1, 0.1]];
        let mut circ = 0.0;
        for k in 0..4 {
            let (p, q) = (corners[k], corners[(k + 1) % 4]);
            let d: Vec<f64> = p.iter().zip(&q).map(|(p, q)| q - p).collect();
            let mut f = |t: f64| {
                let y: Vec<f64> = p.iter().zip(&d).map(|(p, d)| p + t * d).collect();
                dot(&shifted.eval(&curves, &bump, &y), &d)
            };
            circ += adaptive_simpson(&mut f, 0.0, 1.0, 1e-13);
        }
        assert!(circ.abs() < 1e-9);
    }
}
