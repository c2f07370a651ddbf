//! Poisson brackets on `T*Q`, `g*`, `T*P/G` and products, with the dual pair
//! `T*P/G <- T*P -> g*`, coadjoint orbits, the symplectic leaves of `T*P/G`, the
//! magnetic term and the action of the cotangent gauge groupoid.
//!
//! Brackets are `{f, g} = grad f . Pi grad g`. On `(q, p)` coordinates
//! `{q_i, p_j} = delta_ij`, on `g*` `{f, g}(mu) = <mu, [grad f, grad g]>`.
//! Leaf forms are normalized so that on `T*Q` they equal `d gamma`; with this
//! choice `omega(Pi alpha, w) = -<alpha, w>`.

use crate::bundle::{Base, BasePoint, BundlePoint, BundleSpec, CotangentSample, QuotientClass};
use crate::liealg::{expm, LieError, LieGroupSpec, Membership};
use crate::linalg::{self, canonical_tensor, numeric_rank};
use crate::report::{Check, MaxResidual, SuiteReport};
use crate::rng::{self, Stream};
use nalgebra::{DMatrix, DVector};
use serde::Serialize;
use std::sync::Arc;
use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum PoissonError {
    #[error("point outside the chart: {0}")]
    OutOfChart(String),
    #[error(transparent)]
    Lie(#[from] LieError),
    #[error("orbit is not a single point")]
    NotSingleton,
    #[error("unsupported: {0}")]
    Unsupported(String),
}

pub const GRAD_STEP: f64 = 1e-5;
pub const SECOND_STEP: f64 = 1e-4;

type Eval = Arc<dyn Fn(&DVector<f64>) -> f64 + Send + Sync>;
type Grad = Arc<dyn Fn(&DVector<f64>) -> DVector<f64> + Send + Sync>;

/// Smooth function on a coordinate chart, with an optional exact gradient.
#[derive(Clone)]
pub struct ScalarField {
    eval: Eval,
    grad: Option<Grad>,
    pub step: f64,
}

impl std::fmt::Debug for ScalarField {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("ScalarField")
            .field("exact_gradient", &self.grad.is_some())
            .field("step", &self.step)
            .finish()
    }
}

impl ScalarField {
    pub fn new(f: impl Fn(&DVector<f64>) -> f64 + Send + Sync + 'static) -> Self {
        ScalarField {
            eval: Arc::new(f),
            grad: None,
            step: GRAD_STEP,
        }
    }

    pub fn with_gradient(
        f: impl Fn(&DVector<f64>) -> f64 + Send + Sync + 'static,
        g: impl Fn(&DVector<f64>) -> DVector<f64> + Send + Sync + 'static,
    ) -> Self {
        ScalarField {
            eval: Arc::new(f),
            grad: Some(Arc::new(g)),
            step: GRAD_STEP,
        }
    }

    pub fn with_step(mut self, h: f64) -> Self {
        self.step = h;
        self
    }

    pub fn eval(&self, x: &DVector<f64>) -> f64 {
        (self.eval)(x)
    }

    pub fn has_exact_gradient(&self) -> bool {
        self.grad.is_some()
    }

    pub fn gradient(&self, x: &DVector<f64>) -> DVector<f64> {
        match &self.grad {
            Some(g) => g(x),
            None => fd_gradient(&*self.eval, x, self.step),
        }
    }

    pub fn constant(c: f64) -> Self {
        ScalarField::with_gradient(move |_| c, |x| DVector::zeros(x.len()))
    }

    pub fn coordinate(i: usize) -> Self {
        ScalarField::with_gradient(
            move |x| x[i],
            move |x| {
                let mut g = DVector::zeros(x.len());
                g[i] = 1.0;
                g
            },
        )
    }

    pub fn linear(b: DVector<f64>) -> Self {
        let b2 = b.clone();
        ScalarField::with_gradient(move |x| b.dot(x), move |_| b2.clone())
    }

    /// `c + b.x + x.S x / 2` with `S` symmetric.
    pub fn quadratic(c: f64, b: DVector<f64>, s: DMatrix<f64>) -> Self {
        let s = (&s + s.transpose()) * 0.5;
        let (b2, s2) = (b.clone(), s.clone());
        ScalarField::with_gradient(
            move |x| c + b.dot(x) + 0.5 * x.dot(&(&s * x)),
            move |x| &b2 + &s2 * x,
        )
    }

    pub fn random_linear(dim: usize, rng: &mut Stream) -> Self {
        ScalarField::linear(rng::uniform_vec(rng, dim, 1.0))
    }

    pub fn random_quadratic(dim: usize, rng: &mut Stream) -> Self {
        let c = rng::uniform_vec(rng, 1, 1.0)[0];
        let b = rng::uniform_vec(rng, dim, 1.0);
        let s = DMatrix::from_column_slice(dim, dim, rng::uniform_vec(rng, dim * dim, 1.0).as_slice());
        ScalarField::quadratic(c, b, s)
    }

    /// Random cubic without an attached gradient.
    pub fn random_cubic(dim: usize, rng: &mut Stream) -> Self {
        let q = ScalarField::random_quadratic(dim, rng);
        let w = rng::uniform_vec(rng, dim, 1.0);
        let c3 = rng::uniform_vec(rng, 1, 0.5)[0];
        ScalarField::new(move |x| q.eval(x) + c3 * w.dot(x).powi(3))
    }

    /// `f o map`, differentiated by central differences.
    pub fn compose(&self, map: impl Fn(&DVector<f64>) -> DVector<f64> + Send + Sync + 'static) -> Self {
        let f = self.clone();
        ScalarField::new(move |x| f.eval(&map(x)))
    }

    pub fn product(&self, other: &ScalarField) -> Self {
        let (f, g) = (self.clone(), other.clone());
        let (f2, g2) = (self.clone(), other.clone());
        if self.has_exact_gradient() && other.has_exact_gradient() {
            ScalarField::with_gradient(
                move |x| f.eval(x) * g.eval(x),
                move |x| f2.gradient(x) * g2.eval(x) + g2.gradient(x) * f2.eval(x),
            )
        } else {
            ScalarField::new(move |x| f.eval(x) * g.eval(x))
        }
    }
}

/// Central-difference gradient with step `h * max(1, |x_i|)`.
pub fn fd_gradient(f: &dyn Fn(&DVector<f64>) -> f64, x: &DVector<f64>, h: f64) -> DVector<f64> {
    let mut xp = x.clone();
    DVector::from_fn(x.len(), |i, _| {
        let hi = h * x[i].abs().max(1.0);
        let x0 = xp[i];
        xp[i] = x0 + hi;
        let fp = f(&xp);
        xp[i] = x0 - hi;
        let fm = f(&xp);
        xp[i] = x0;
        (fp - fm) / (2.0 * hi)
    })
}

/// Central-difference Jacobian of a vector map.
pub fn fd_jacobian(f: &dyn Fn(&DVector<f64>) -> DVector<f64>, x: &DVector<f64>, h: f64) -> DMatrix<f64> {
    let m = f(x).len();
    let mut jac = DMatrix::zeros(m, x.len());
    let mut xp = x.clone();
    for i in 0..x.len() {
        let hi = h * x[i].abs().max(1.0);
        let x0 = xp[i];
        xp[i] = x0 + hi;
        let fp = f(&xp);
        xp[i] = x0 - hi;
        let fm = f(&xp);
        xp[i] = x0;
        jac.set_column(i, &((fp - fm) / (2.0 * hi)));
    }
    jac
}

/// `Phi(q) = (1 - exp(-ad_q)) / ad_q`, so that `d/dt exp(q) = exp(q) Phi(q) q'`.
pub fn left_dexp(g: &LieGroupSpec, q: &DVector<f64>) -> DMatrix<f64> {
    let ad = -g.ad_matrix(q);
    let n = g.dim;
    let mut term = DMatrix::<f64>::identity(n, n);
    let mut sum = term.clone();
    for k in 1..60 {
        term = &term * &ad / (k as f64 + 1.0);
        sum += &term;
        if term.amax() < 1e-18 {
            break;
        }
    }
    sum
}

/// Lie-Poisson matrix `Pi_ij(mu) = <mu, [e_i, e_j]>`.
pub fn lie_poisson_tensor(g: &LieGroupSpec, mu: &DVector<f64>) -> DMatrix<f64> {
    let n = g.dim;
    DMatrix::from_fn(n, n, |i, j| (0..n).map(|k| g.c(k, i, j) * mu[k]).sum())
}

/// Canonical coordinates `w = (x, q, a, p)` on `T*P` around a point `p0`:
/// `m = m0 + x` (or `k0 exp(x)`), `u = u0 exp(q)`, and the frame covector is
/// `(a, Phi(q)^-T p)` (with the same transformation on a group base).
#[derive(Clone, Debug)]
pub struct CotangentChart {
    pub bundle: BundleSpec,
    pub center: BundlePoint,
}

impl CotangentChart {
    pub fn new(bundle: &BundleSpec, center: BundlePoint) -> Self {
        CotangentChart {
            bundle: bundle.clone(),
            center,
        }
    }

    pub fn dim(&self) -> usize {
        2 * self.bundle.dim()
    }

    fn base_frame(&self, x: &DVector<f64>) -> Option<DMatrix<f64>> {
        match &self.bundle.base {
            Base::Box { .. } => None,
            Base::Group(k) => Some(left_dexp(k, x)),
        }
    }

    pub fn sample(&self, w: &DVector<f64>) -> CotangentSample {
        let b = &self.bundle;
        let (d, n) = (b.base_dim(), b.fiber_dim());
        let x = w.rows(0, d).into_owned();
        let q = w.rows(d, n).into_owned();
        let a = w.rows(d + n, d).into_owned();
        let p = w.rows(2 * d + n, n).into_owned();
        let base = b.base.retract(&self.center.base, &x);
        let fiber = &self.center.fiber * expm(&b.group.hat(&q));
        let theta = match self.base_frame(&x) {
            None => a,
            Some(phi) => phi.transpose().lu().solve(&a).expect("dexp invertible near 0"),
        };
        let chi = left_dexp(&b.group, &q).transpose().lu().solve(&p).expect("dexp invertible near 0");
        CotangentSample {
            point: BundlePoint { base, fiber },
            covector: linalg::concat(&[&theta, &chi]),
        }
    }

    /// Chart coordinates of a sample sitting over the chart center.
    pub fn coords_at_center(&self, phi: &CotangentSample) -> DVector<f64> {
        let b = &self.bundle;
        let (d, n) = (b.base_dim(), b.fiber_dim());
        let mut w = DVector::zeros(self.dim());
        w.rows_mut(d + n, d + n).copy_from(&phi.covector);
        let _ = n;
        w
    }

    /// Canonical bracket of two functions of the chart coordinates.
    pub fn canonical_bracket(&self, f: &dyn Fn(&DVector<f64>) -> f64, g: &dyn Fn(&DVector<f64>) -> f64, w: &DVector<f64>) -> f64 {
        let gf = fd_gradient(f, w, GRAD_STEP);
        let gg = fd_gradient(g, w, GRAD_STEP);
        gf.dot(&(canonical_tensor(self.bundle.dim()) * gg))
    }
}

/// Configuration space of a canonical cotangent bundle.
#[derive(Clone, Debug, PartialEq)]
pub enum ConfigSpace {
    /// `R^n`, coordinates `(q, p)`.
    Euclidean(usize),
    /// A matrix group, coordinates `(vec(u) column-major, chi)` with `chi` left-trivialized.
    Group(LieGroupSpec),
}

#[derive(Clone, Debug, PartialEq)]
pub enum PoissonKind {
    CanonicalCotangent(ConfigSpace),
    LiePoisson(LieGroupSpec),
    /// `T*P/G` in the coordinates `(m, a, chi)` of the gauge-fixed representative.
    QuotientCotangent(BundleSpec),
    Product(Vec<PoissonSpace>),
}

#[derive(Clone, Debug, PartialEq)]
pub struct PoissonSpace {
    pub kind: PoissonKind,
}

impl PoissonSpace {
    pub fn canonical(n: usize) -> Self {
        PoissonSpace {
            kind: PoissonKind::CanonicalCotangent(ConfigSpace::Euclidean(n)),
        }
    }

    pub fn cotangent_group(g: LieGroupSpec) -> Self {
        PoissonSpace {
            kind: PoissonKind::CanonicalCotangent(ConfigSpace::Group(g)),
        }
    }

    pub fn lie_poisson(g: LieGroupSpec) -> Self {
        PoissonSpace {
            kind: PoissonKind::LiePoisson(g),
        }
    }

    pub fn quotient(b: BundleSpec) -> Result<Self, PoissonError> {
        if !matches!(b.base, Base::Box { .. }) {
            return Err(PoissonError::Unsupported("quotient coordinates need a box base".into()));
        }
        Ok(PoissonSpace {
            kind: PoissonKind::QuotientCotangent(b),
        })
    }

    pub fn product(parts: Vec<PoissonSpace>) -> Self {
        PoissonSpace {
            kind: PoissonKind::Product(parts),
        }
    }

    pub fn dim(&self) -> usize {
        match &self.kind {
            PoissonKind::CanonicalCotangent(ConfigSpace::Euclidean(n)) => 2 * n,
            PoissonKind::CanonicalCotangent(ConfigSpace::Group(g)) => g.embed * g.embed + g.dim,
            PoissonKind::LiePoisson(g) => g.dim,
            PoissonKind::QuotientCotangent(b) => 2 * b.base_dim() + b.fiber_dim(),
            PoissonKind::Product(parts) => parts.iter().map(|p| p.dim()).sum(),
        }
    }

    pub fn check_point(&self, x: &DVector<f64>) -> Result<(), PoissonError> {
        if x.len() != self.dim() {
            return Err(PoissonError::OutOfChart(format!("point has {} coordinates, space has {}", x.len(), self.dim())));
        }
        if !x.iter().all(|v| v.is_finite()) {
            return Err(PoissonError::OutOfChart("non-finite coordinate".into()));
        }
        match &self.kind {
            PoissonKind::QuotientCotangent(b) => {
                let m = BasePoint::Chart(x.rows(0, b.base_dim()).into_owned());
                if !b.base.contains(&m) {
                    return Err(PoissonError::OutOfChart("base point outside the box".into()));
                }
            }
            PoissonKind::CanonicalCotangent(ConfigSpace::Group(g)) => {
                let u = DMatrix::from_column_slice(g.embed, g.embed, x.rows(0, g.embed * g.embed).as_slice());
                if g.membership_residual(&u) > 1e-6 {
                    return Err(PoissonError::OutOfChart("configuration left the group".into()));
                }
            }
            PoissonKind::Product(parts) => {
                let mut off = 0;
                for p in parts {
                    p.check_point(&x.rows(off, p.dim()).into_owned())?;
                    off += p.dim();
                }
            }
            _ => {}
        }
        Ok(())
    }

    /// Poisson matrix at `x`.
    pub fn tensor(&self, x: &DVector<f64>) -> Result<DMatrix<f64>, PoissonError> {
        self.check_point(x)?;
        Ok(self.tensor_unchecked(x))
    }

    fn tensor_unchecked(&self, x: &DVector<f64>) -> DMatrix<f64> {
        match &self.kind {
            PoissonKind::CanonicalCotangent(ConfigSpace::Euclidean(n)) => canonical_tensor(*n),
            PoissonKind::CanonicalCotangent(ConfigSpace::Group(g)) => {
                let z = group_chart_jacobian(g, x);
                &z * canonical_tensor(g.dim) * z.transpose()
            }
            PoissonKind::LiePoisson(g) => lie_poisson_tensor(g, x),
            PoissonKind::QuotientCotangent(b) => {
                let r = quotient_chart_jacobian(b, x);
                &r * canonical_tensor(b.dim()) * r.transpose()
            }
            PoissonKind::Product(parts) => {
                let n = self.dim();
                let mut out = DMatrix::zeros(n, n);
                let mut off = 0;
                for p in parts {
                    let k = p.dim();
                    out.view_mut((off, off), (k, k))
                        .copy_from(&p.tensor_unchecked(&x.rows(off, k).into_owned()));
                    off += k;
                }
                out
            }
        }
    }

    pub fn bracket(&self, f: &ScalarField, g: &ScalarField, x: &DVector<f64>) -> Result<f64, PoissonError> {
        let pi = self.tensor(x)?;
        Ok(f.gradient(x).dot(&(pi * g.gradient(x))))
    }

    /// `{f, g}` as a scalar field, differentiated with the second-level step.
    pub fn bracket_field(&self, f: &ScalarField, g: &ScalarField) -> ScalarField {
        let (s, f, g) = (self.clone(), f.clone(), g.clone());
        ScalarField::new(move |x| {
            let pi = s.tensor_unchecked(x);
            f.gradient(x).dot(&(pi * g.gradient(x)))
        })
        .with_step(SECOND_STEP)
    }

    /// Hamiltonian vector field `x' = {x, H} = Pi grad H`.
    pub fn vector_field(&self, h: &ScalarField, x: &DVector<f64>) -> Result<DVector<f64>, PoissonError> {
        let pi = self.tensor(x)?;
        Ok(pi * h.gradient(x))
    }

    pub fn sample_point(&self, rng: &mut Stream) -> DVector<f64> {
        match &self.kind {
            PoissonKind::CanonicalCotangent(ConfigSpace::Euclidean(n)) => rng::uniform_vec(rng, 2 * n, 1.0),
            PoissonKind::CanonicalCotangent(ConfigSpace::Group(g)) => {
                let u = crate::bundle::sample_element(g, rng, 1.0);
                let chi = rng::uniform_vec(rng, g.dim, 1.0);
                linalg::concat(&[&DVector::from_column_slice(u.as_slice()), &chi])
            }
            PoissonKind::LiePoisson(g) => rng::uniform_vec(rng, g.dim, 1.0),
            PoissonKind::QuotientCotangent(b) => {
                let phi = b.sample_covector(rng);
                quotient_coords(&b.quotient_rep(&phi))
            }
            PoissonKind::Product(parts) => {
                let pieces: Vec<DVector<f64>> = parts.iter().map(|p| p.sample_point(rng)).collect();
                let refs: Vec<&DVector<f64>> = pieces.iter().collect();
                linalg::concat(&refs)
            }
        }
    }
}

/// Derivative of `(q, p) -> (vec(u0 exp q), Phi(q)^-T p)` at `q = 0`, `p = chi`.
fn group_chart_jacobian(g: &LieGroupSpec, x: &DVector<f64>) -> DMatrix<f64> {
    let (m, n) = (g.embed, g.dim);
    let u = DMatrix::from_column_slice(m, m, x.rows(0, m * m).as_slice());
    let chi = x.rows(m * m, n).into_owned();
    let mut z = DMatrix::zeros(m * m + n, 2 * n);
    for i in 0..n {
        let du = &u * &g.basis[i];
        z.view_mut((0, i), (m * m, 1)).copy_from_slice(du.as_slice());
        // Phi(q)^-T = I + ad_q^T / 2 + O(q^2).
        let dchi = g.ad_matrix(&g.unit(i)).transpose() * &chi * 0.5;
        z.view_mut((m * m, i), (n, 1)).copy_from(&dchi);
        z[(m * m + i, n + i)] = 1.0;
    }
    z
}

/// Jacobian of the gauge-fixed representative with respect to canonical chart
/// coordinates centred at `(m, e)`, evaluated at the chart point over `x`.
fn quotient_chart_jacobian(b: &BundleSpec, x: &DVector<f64>) -> DMatrix<f64> {
    let cls = quotient_class(b, x);
    let center = BundlePoint {
        base: cls.base.clone(),
        fiber: b.group.identity(),
    };
    let chart = CotangentChart::new(b, center.clone());
    let w0 = chart.coords_at_center(&CotangentSample {
        point: center,
        covector: cls.covector,
    });
    let rep = |w: &DVector<f64>| quotient_coords(&b.quotient_rep(&chart.sample(w)));
    fd_jacobian(&rep, &w0, GRAD_STEP)
}

/// Coordinates `(m, a, chi)` of a gauge-fixed class.
pub fn quotient_coords(x: &QuotientClass) -> DVector<f64> {
    linalg::concat(&[x.base.chart(), &x.covector])
}

pub fn quotient_class(b: &BundleSpec, z: &DVector<f64>) -> QuotientClass {
    let d = b.base_dim();
    QuotientClass {
        base: BasePoint::Chart(z.rows(0, d).into_owned()),
        covector: z.rows(d, d + b.fiber_dim()).into_owned(),
    }
}

/// Quotient bracket by lifting `f, g` to invariant functions on `T*P` and taking
/// the canonical bracket there; independent of [`PoissonSpace::tensor`].
pub fn quotient_bracket_lifted(b: &BundleSpec, f: &ScalarField, g: &ScalarField, z: &DVector<f64>, u: &DMatrix<f64>) -> f64 {
    let cls = quotient_class(b, z);
    let up = b.lift_class(&cls, u);
    let chart = CotangentChart::new(b, up.point.clone());
    let w0 = chart.coords_at_center(&up);
    let lift = |h: &ScalarField| {
        let chart = chart.clone();
        let b = b.clone();
        let h = h.clone();
        move |w: &DVector<f64>| h.eval(&quotient_coords(&b.quotient_rep(&chart.sample(w))))
    };
    chart.canonical_bracket(&lift(f), &lift(g), &w0)
}

/// Antisymmetry, Leibniz and Jacobi on random functions and points.
pub fn space_suite(space: &PoissonSpace, trials: usize, jacobi_trials: usize, seed: u64) -> SuiteReport {
    let mut rng = rng::stream(seed, "poisson.space");
    let n = space.dim();
    let mut anti = MaxResidual::new();
    let mut leibniz = MaxResidual::new();
    for _ in 0..trials {
        let x = space.sample_point(&mut rng);
        let f = ScalarField::random_quadratic(n, &mut rng);
        let g = ScalarField::random_quadratic(n, &mut rng);
        let k = ScalarField::random_quadratic(n, &mut rng);
        let pi = space.tensor_unchecked(&x);
        let (gf, gg) = (f.gradient(&x), g.gradient(&x));
        anti.push((gf.dot(&(&pi * &gg)) + gg.dot(&(&pi * &gf))).abs());
        let gk = ScalarField::new({
            let (g, k) = (g.clone(), k.clone());
            move |y| g.eval(y) * k.eval(y)
        });
        let lhs = f.gradient(&x).dot(&(&pi * gk.gradient(&x)));
        let rhs = gf.dot(&(&pi * &gg)) * k.eval(&x) + g.eval(&x) * gf.dot(&(&pi * k.gradient(&x)));
        leibniz.push((lhs - rhs).abs() / (1.0 + rhs.abs()));
    }
    let jac = jacobi_residual(space, jacobi_trials, &mut rng);
    let checks = vec![
        anti.check("antisymmetry", 1e-12),
        leibniz.check("leibniz", 1e-8),
        Check::new("jacobi", jacobi_trials, jac, 1e-6),
    ];
    SuiteReport::new("poisson.space", trials, checks, vec![])
}

fn jacobi_residual(space: &PoissonSpace, trials: usize, rng: &mut Stream) -> f64 {
    let n = space.dim();
    let mut res = MaxResidual::new();
    for _ in 0..trials {
        let x = space.sample_point(rng);
        let f = ScalarField::random_quadratic(n, rng);
        let g = ScalarField::random_quadratic(n, rng);
        let k = ScalarField::random_quadratic(n, rng);
        let cyc = space.bracket_field(&g, &k);
        let a = space.bracket(&f, &cyc, &x);
        let b = space.bracket(&g, &space.bracket_field(&k, &f), &x);
        let c = space.bracket(&k, &space.bracket_field(&f, &g), &x);
        match (a, b, c) {
            (Ok(a), Ok(b), Ok(c)) => res.push((a + b + c).abs()),
            _ => res.push(f64::NAN),
        }
    }
    res.value()
}

/// Max Jacobi cyclic-sum residual over random quadratic triples at `point`.
pub fn jacobi_check(space: &PoissonSpace, point: Option<&DVector<f64>>, trials: usize, seed: u64) -> f64 {
    let mut rng = rng::stream(seed, "poisson.jacobi");
    let n = space.dim();
    let mut res = MaxResidual::new();
    for _ in 0..trials {
        let x = match point {
            Some(p) => p.clone(),
            None => space.sample_point(&mut rng),
        };
        let f = ScalarField::random_quadratic(n, &mut rng);
        let g = ScalarField::random_quadratic(n, &mut rng);
        let k = ScalarField::random_quadratic(n, &mut rng);
        let terms = [
            space.bracket(&f, &space.bracket_field(&g, &k), &x),
            space.bracket(&g, &space.bracket_field(&k, &f), &x),
            space.bracket(&k, &space.bracket_field(&f, &g), &x),
        ];
        if terms.iter().any(|t| t.is_err()) {
            res.push(f64::NAN);
        } else {
            res.push(terms.iter().map(|t| *t.as_ref().unwrap()).sum::<f64>().abs());
        }
    }
    res.value()
}

/// Known Casimir functions of the Lie-Poisson structure, by group family.
pub fn casimirs(g: &LieGroupSpec) -> Vec<(String, ScalarField)> {
    if g.is_abelian() {
        return (0..g.dim).map(|i| (format!("mu_{i}"), ScalarField::coordinate(i))).collect();
    }
    if g.membership == Membership::SpecialOrthogonal && g.dim == 3 {
        return vec![(
            "norm_sq".into(),
            ScalarField::with_gradient(|x| x.norm_squared(), |x| x * 2.0),
        )];
    }
    if g.name == "se3" {
        let gamma_sq = ScalarField::with_gradient(
            |x| x.rows(3, 3).norm_squared(),
            |x| {
                let mut v = DVector::zeros(6);
                v.rows_mut(3, 3).copy_from(&(x.rows(3, 3) * 2.0));
                v
            },
        );
        let pi_gamma = ScalarField::with_gradient(
            |x| x.rows(0, 3).dot(&x.rows(3, 3)),
            |x| {
                let mut v = DVector::zeros(6);
                v.rows_mut(0, 3).copy_from(&x.rows(3, 3));
                v.rows_mut(3, 3).copy_from(&x.rows(0, 3));
                v
            },
        );
        return vec![("gamma_sq".into(), gamma_sq), ("pi_dot_gamma".into(), pi_gamma)];
    }
    Vec::new()
}

/// Polarity of the pulled-back algebras `{f o pi_G, h o J} = 0` on `T*P`, with the
/// canonical bracket in a chart around a random point.
pub fn dual_pair_check(b: &BundleSpec, trials: usize, seed: u64) -> SuiteReport {
    let mut rng = rng::stream(seed, "poisson.dual_pair");
    let (d, n) = (b.base_dim(), b.fiber_dim());
    let qdim = b.dim() + d;
    let mut quad = MaxResidual::new();
    let mut lin = MaxResidual::new();
    let mut constant = MaxResidual::new();
    let mut casimir = MaxResidual::new();
    let cas = casimirs(&b.group);
    for _ in 0..trials {
        let phi = b.sample_covector(&mut rng);
        let chart = CotangentChart::new(b, phi.point.clone());
        let w0 = chart.coords_at_center(&phi);
        let on_quotient = |f: ScalarField| {
            let (chart, b) = (chart.clone(), b.clone());
            move |w: &DVector<f64>| {
                let s = chart.sample(w);
                let rep = b.quotient_rep(&s);
                let z = match &rep.base {
                    BasePoint::Chart(m) => linalg::concat(&[m, &rep.covector]),
                    BasePoint::Group(_) => rep.covector.clone(),
                };
                f.eval(&z)
            }
        };
        let on_momentum = |h: ScalarField| {
            let (chart, b) = (chart.clone(), b.clone());
            move |w: &DVector<f64>| h.eval(&b.momentum_unchecked(&chart.sample(w).covector))
        };
        let zdim = if matches!(b.base, Base::Group(_)) { b.dim() } else { qdim };
        let f = on_quotient(ScalarField::random_quadratic(zdim, &mut rng));
        let h = on_momentum(ScalarField::random_quadratic(n, &mut rng));
        quad.push(chart.canonical_bracket(&f, &h, &w0).abs());
        let fl = on_quotient(ScalarField::random_linear(zdim, &mut rng));
        let hl = on_momentum(ScalarField::random_linear(n, &mut rng));
        lin.push(chart.canonical_bracket(&fl, &hl, &w0).abs());
        let c = on_quotient(ScalarField::constant(rng::uniform_vec(&mut rng, 1, 1.0)[0]));
        constant.push(chart.canonical_bracket(&c, &h, &w0).abs());
        for (_, cf) in &cas {
            let ch = on_momentum(cf.clone());
            let other = on_momentum(ScalarField::random_quadratic(n, &mut rng));
            casimir.push(chart.canonical_bracket(&ch, &other, &w0).abs());
        }
    }
    let mut checks = vec![
        quad.check("polarity_quadratic", 1e-7),
        lin.check("polarity_linear", 1e-8),
        constant.check("polarity_constant", 1e-12),
    ];
    if !cas.is_empty() {
        checks.push(casimir.check("casimir_pullback_commutes", 1e-7));
    }
    SuiteReport::new(format!("poisson.dual_pair:{}", b.name), trials, checks, vec![])
}

/// Samples of a coadjoint orbit together with its tangent data at the seed.
#[derive(Clone, Debug, Serialize)]
pub struct CoadjointOrbit {
    #[serde(skip)]
    pub group: Option<LieGroupSpec>,
    pub seed: Vec<f64>,
    pub samples: Vec<Vec<f64>>,
    /// Group elements `g` with `sample = Ad*_{g^-1} seed`, kept as witnesses.
    #[serde(skip)]
    pub witnesses: Vec<DMatrix<f64>>,
    pub dim: usize,
    pub casimir_residual: f64,
}

impl CoadjointOrbit {
    pub fn seed_vec(&self) -> DVector<f64> {
        DVector::from_vec(self.seed.clone())
    }

    pub fn is_singleton(&self) -> bool {
        self.dim == 0
    }
}

/// `{ad*_{e_i} mu}` as columns.
pub fn orbit_tangent(g: &LieGroupSpec, mu: &DVector<f64>) -> DMatrix<f64> {
    let cols: Vec<DVector<f64>> = (0..g.dim).map(|i| g.ad_matrix(&g.unit(i)).transpose() * mu).collect();
    DMatrix::from_columns(&cols)
}

/// `Ad*_{g^-1} mu`.
pub fn orbit_point(g: &LieGroupSpec, h: &DMatrix<f64>, mu: &DVector<f64>) -> DVector<f64> {
    g.coadjoint_matrix(&g.inverse(h)) * mu
}

pub fn coadjoint_orbit(g: &LieGroupSpec, mu0: &DVector<f64>, n_samples: usize, seed: u64) -> CoadjointOrbit {
    let mut rng = rng::stream(seed, "poisson.orbit");
    let cas = casimirs(g);
    let mut res = MaxResidual::new();
    let mut samples = Vec::with_capacity(n_samples);
    let mut witnesses = Vec::with_capacity(n_samples);
    for _ in 0..n_samples {
        let h = crate::bundle::sample_element(g, &mut rng, 1.0);
        let mu = orbit_point(g, &h, mu0);
        for (_, c) in &cas {
            res.push((c.eval(&mu) - c.eval(mu0)).abs());
        }
        samples.push(mu.as_slice().to_vec());
        witnesses.push(h);
    }
    CoadjointOrbit {
        group: Some(g.clone()),
        seed: mu0.as_slice().to_vec(),
        samples,
        witnesses,
        dim: numeric_rank(&orbit_tangent(g, mu0)),
        casimir_residual: res.value(),
    }
}

/// Leaf summary for JSON output.
#[derive(Clone, Debug, Serialize, PartialEq)]
pub struct LeafSummary {
    pub orbit_dim: usize,
    pub leaf_dim: usize,
    pub membership_trials: usize,
    pub affine_transitivity_residual: f64,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub magnetic_closedness_residual: Option<f64>,
}

/// Tangent span of the leaf at a quotient point built from `a*`-directions,
/// base directions through `sigma` and orbit directions transported by `sigma`.
pub fn constructed_leaf_span(b: &BundleSpec, m: &DVector<f64>, rho: &DVector<f64>, chi: &DVector<f64>) -> DMatrix<f64> {
    let (d, n) = (b.base_dim(), b.fiber_dim());
    let point = |m: &DVector<f64>, rho: &DVector<f64>, chi: &DVector<f64>| {
        let base = BasePoint::Chart(m.clone());
        let s = b.sigma(&base, chi);
        let a = b.a_star(&base, rho);
        quotient_coords(&QuotientClass {
            base,
            covector: s.covector + a.covector,
        })
    };
    let mut cols = Vec::new();
    for j in 0..d {
        // a* directions are constant in the representative coordinates.
        let mut e = DVector::zeros(d);
        e[j] = 1.0;
        let a = b.a_star(&BasePoint::Chart(m.clone()), &e);
        cols.push(linalg::concat(&[&DVector::zeros(d), &a.covector]));
    }
    let f_base = |x: &DVector<f64>| point(x, rho, chi);
    let jb = fd_jacobian(&f_base, m, GRAD_STEP);
    cols.extend(jb.column_iter().map(|c| c.into_owned()));
    let tangent = orbit_tangent(&b.group, chi);
    for i in 0..n {
        let dir = tangent.column(i).into_owned();
        let f_orb = |t: &DVector<f64>| point(m, rho, &(chi + &dir * t[0]));
        let jo = fd_jacobian(&f_orb, &DVector::zeros(1), GRAD_STEP);
        cols.push(jo.column(0).into_owned());
    }
    DMatrix::from_columns(&cols)
}

/// `pi_sigma[phi] = (a*)^-1([phi] - sigma(iota*[phi]))`, returned in base coordinates.
pub fn pi_sigma(b: &BundleSpec, x: &QuotientClass) -> (BasePoint, DVector<f64>) {
    let (base, chi) = b.iota_star(x);
    let s = b.sigma(&base, &chi);
    let diff = &x.covector - s.covector;
    let d = b.base_dim();
    let a_mat = DMatrix::from_columns(
        &(0..d)
            .map(|j| {
                let mut e = DVector::zeros(d);
                e[j] = 1.0;
                b.a_star(&base, &e).covector
            })
            .collect::<Vec<_>>(),
    );
    let rho = least_squares(&a_mat, &diff);
    (base, rho)
}

fn least_squares(a: &DMatrix<f64>, y: &DVector<f64>) -> DVector<f64> {
    if a.ncols() == 0 {
        return DVector::zeros(0);
    }
    a.clone().svd(true, true).solve(y, 1e-12).expect("svd solve")
}

/// Leaf form in the `d gamma` normalization: `omega(Pi alpha, w) = -<alpha, w>`,
/// evaluated on tangent vectors `tangents` (columns) at a point with Poisson matrix `pi`.
/// Returns the Gram matrix and the residual of solving `Pi alpha = v`.
pub fn leaf_form(pi: &DMatrix<f64>, tangents: &DMatrix<f64>) -> (DMatrix<f64>, f64) {
    let svd = pi.clone().svd(true, true);
    let tol = linalg::RANK_RTOL * svd.singular_values.max();
    let alphas = svd.solve(tangents, tol).expect("svd solve");
    let resid = linalg::max_abs_mat(&(pi * &alphas - tangents));
    (-(alphas.transpose() * tangents), resid)
}

/// Symplectic-leaf structure of `T*P/G` through the orbit of `orbit.seed`.
pub fn leaf_structure(b: &BundleSpec, orbit: &CoadjointOrbit, samples: usize, seed: u64) -> Result<(SuiteReport, LeafSummary), PoissonError> {
    let space = PoissonSpace::quotient(b.clone())?;
    let g = &b.group;
    let mu0 = orbit.seed_vec();
    let d = b.base_dim();
    let orbit_dim = numeric_rank(&orbit_tangent(g, &mu0));
    let expected = 2 * d + orbit_dim;
    let mut rng = rng::stream(seed, "poisson.leaf");
    let cas = casimirs(g);
    let mut member_up = MaxResidual::new();
    let mut member_down = MaxResidual::new();
    let mut cas_res = MaxResidual::new();
    let mut span_in_image = MaxResidual::new();
    let mut affine = MaxResidual::new();
    let mut pi_sigma_wd = MaxResidual::new();
    let mut pi_sigma_onto = MaxResidual::new();
    let mut dims_ok = true;
    let mut parity_ok = true;
    let mut negative_ok = true;
    let mut leaf_dim = 0;
    for _ in 0..samples {
        // Upstairs point with J in the orbit, witness w: J = Ad*_{w^-1} mu0.
        let w = crate::bundle::sample_element(g, &mut rng, 1.0);
        let mut phi = b.sample_covector(&mut rng);
        let chi_up = orbit_point(g, &w, &mu0);
        phi.covector.rows_mut(d, g.dim).copy_from(&chi_up);
        let cls = b.quotient_rep(&phi);
        let (_, chi_rep) = b.iota_star(&cls);
        // Gauge fixing by u^-1 moves the witness to w u^-1.
        let w_rep = &w * g.inverse(&phi.point.fiber);
        member_up.push((&chi_rep - orbit_point(g, &w_rep, &mu0)).amax());
        for (_, c) in &cas {
            cas_res.push((c.eval(&chi_rep) - c.eval(&mu0)).abs());
        }
        // Downstairs point over the orbit lifted to a random fiber element.
        let v = crate::bundle::sample_element(g, &mut rng, 1.0);
        let chi_down = orbit_point(g, &v, &mu0);
        let m = b.base.sample(&mut rng);
        let rho = rng::uniform_vec(&mut rng, d, 1.0);
        let s = b.sigma(&m, &chi_down);
        let x = QuotientClass {
            base: m.clone(),
            covector: s.covector + b.a_star(&m, &rho).covector,
        };
        let u = b.sample_group(&mut rng);
        let lifted = b.lift_class(&x, &u);
        let j = b.momentum_unchecked(&lifted.covector);
        member_down.push((j - orbit_point(g, &(&v * &u), &mu0)).amax());
        if !cas.is_empty() && mu0.norm() > 1e-8 && !g.is_abelian() {
            // Negative control: scaling off the orbit changes a Casimir.
            let off = &chi_down * 1.5;
            negative_ok &= cas.iter().any(|(_, c)| (c.eval(&off) - c.eval(&mu0)).abs() > 1e-6);
        }

        // Leaf dimension from the Poisson tensor and from the constructed span.
        let z = quotient_coords(&x);
        let pi = space.tensor(&z)?;
        let r_pi = numeric_rank(&pi);
        let span = constructed_leaf_span(b, m.chart(), &rho, &chi_down);
        let r_span = numeric_rank(&span);
        let od = numeric_rank(&orbit_tangent(g, &chi_down));
        parity_ok &= od.is_multiple_of(2);
        dims_ok &= r_pi == expected && r_span == expected && od == orbit_dim;
        leaf_dim = r_pi;
        let (_, solve_res) = leaf_form(&pi, &span);
        span_in_image.push(solve_res);

        // Affine structure on the iota*-fiber over (m, chi).
        let rho2 = rng::uniform_vec(&mut rng, d, 1.0);
        let y = QuotientClass {
            base: m.clone(),
            covector: b.sigma(&m, &chi_down).covector + b.a_star(&m, &rho2).covector,
        };
        let a_mat = DMatrix::from_columns(
            &(0..d)
                .map(|jj| {
                    let mut e = DVector::zeros(d);
                    e[jj] = 1.0;
                    b.a_star(&m, &e).covector
                })
                .collect::<Vec<_>>(),
        );
        let diff = &y.covector - &x.covector;
        let sol = least_squares(&a_mat, &diff);
        let fit = if d == 0 { diff.amax() } else { (&a_mat * &sol - &diff).amax() };
        affine.push(fit.max((sol - (&rho2 - &rho)).amax()));
        dims_ok &= numeric_rank(&a_mat) == d;

        // pi_sigma: independent of the representative and onto the base covectors.
        let (_, r1) = pi_sigma(b, &x);
        let (_, r2) = pi_sigma(b, &b.quotient_rep(&lifted));
        pi_sigma_wd.push((&r1 - r2).amax());
        pi_sigma_onto.push((r1 - &rho).amax());
    }
    let mut checks = vec![
        member_up.check("membership_upstairs_to_quotient", 1e-10),
        member_down.check("membership_quotient_to_upstairs", 1e-10),
        span_in_image.check("constructed_span_tangent_to_leaf", 1e-8),
        affine.check("affine_free_transitive", 1e-10),
        pi_sigma_wd.check("pi_sigma_well_defined", 1e-10),
        pi_sigma_onto.check("pi_sigma_recovers_base_covector", 1e-10),
        Check::exact("leaf_dim_identity", samples, dims_ok),
        Check::exact("orbit_dim_even", samples, parity_ok),
    ];
    if !cas.is_empty() {
        checks.push(cas_res.check("casimir_constant_on_leaf", 1e-10));
        checks.push(Check::exact("casimir_detects_off_orbit", samples, negative_ok));
    }
    if orbit_dim == 0 && mu0.amax() == 0.0 {
        let pull = crate::bundle::verify_anchor_pullback(b, samples, seed);
        let c = pull.check("anchor_pullback_of_canonical_form").cloned().expect("check exists");
        checks.push(Check::new("zero_leaf_pullback_identity", c.trials, c.max_residual, c.tolerance));
    }
    let report = SuiteReport::new(format!("poisson.leaf:{}", b.name), samples, checks, vec![]);
    let summary = LeafSummary {
        orbit_dim,
        leaf_dim,
        membership_trials: samples,
        affine_transitivity_residual: affine.value(),
        magnetic_closedness_residual: None,
    };
    Ok((report, summary))
}

/// Exact `d(chi . A)` from the polynomial connection coefficients, as the
/// antisymmetric `d x d` matrix `B_ij = d_i(chi . A_j) - d_j(chi . A_i)`.
pub fn curvature_term_exact(b: &BundleSpec, m: &DVector<f64>, chi: &DVector<f64>) -> DMatrix<f64> {
    let d = b.base_dim();
    match &b.connection {
        crate::bundle::Connection::Flat => DMatrix::zeros(d, d),
        crate::bundle::Connection::Polynomial(polys) => {
            let dpoly = |p: &crate::bundle::Poly, i: usize| -> f64 {
                p.0.iter()
                    .filter(|(_, e)| e[i] > 0)
                    .map(|(c, e)| {
                        let mut t = c * e[i] as f64;
                        for (k, &pw) in e.iter().enumerate() {
                            let pw = if k == i { pw - 1 } else { pw };
                            if pw > 0 {
                                t *= m[k].powi(pw as i32);
                            }
                        }
                        t
                    })
                    .sum()
            };
            let da = |j: usize, i: usize| -> f64 { (0..b.fiber_dim()).map(|a| chi[a] * dpoly(&polys[j][a], i)).sum() };
            DMatrix::from_fn(d, d, |i, j| da(j, i) - da(i, j))
        }
    }
}

/// Magnetic two-form on a singleton-orbit leaf in leaf coordinates `(m, rho)`.
#[derive(Clone, Debug)]
pub struct MagneticTerm {
    pub bundle: BundleSpec,
    pub chi: DVector<f64>,
}

impl MagneticTerm {
    pub fn new(b: &BundleSpec, orbit: &CoadjointOrbit) -> Result<Self, PoissonError> {
        let chi = orbit.seed_vec();
        if numeric_rank(&orbit_tangent(&b.group, &chi)) != 0 {
            return Err(PoissonError::NotSingleton);
        }
        PoissonSpace::quotient(b.clone())?;
        Ok(MagneticTerm { bundle: b.clone(), chi })
    }

    fn leaf_point(&self, y: &DVector<f64>) -> DVector<f64> {
        let b = &self.bundle;
        let d = b.base_dim();
        let m = BasePoint::Chart(y.rows(0, d).into_owned());
        let rho = y.rows(d, d).into_owned();
        quotient_coords(&QuotientClass {
            base: m.clone(),
            covector: b.sigma(&m, &self.chi).covector + b.a_star(&m, &rho).covector,
        })
    }

    /// Leaf form `omega_chi` in the coordinates `y = (m, rho)`.
    pub fn leaf_form(&self, y: &DVector<f64>) -> (DMatrix<f64>, f64) {
        let space = PoissonSpace::quotient(self.bundle.clone()).expect("box base checked");
        let z = self.leaf_point(y);
        let tangents = fd_jacobian(&|v| self.leaf_point(v), y, GRAD_STEP);
        leaf_form(&space.tensor_unchecked(&z), &tangents)
    }

    /// `omega_chi - pi_sigma^* d gamma~` at `y`.
    pub fn evaluate(&self, y: &DVector<f64>) -> DMatrix<f64> {
        let d = self.bundle.base_dim();
        let (w, _) = self.leaf_form(y);
        // d gamma~ = sum d rho_i ^ d m_i in (m, rho) coordinates.
        let mut can = DMatrix::zeros(2 * d, 2 * d);
        for i in 0..d {
            can[(d + i, i)] = 1.0;
            can[(i, d + i)] = -1.0;
        }
        w - can
    }
}

/// Exterior derivative of a two-form field by central differences:
/// `(dB)_ijk = d_i B_jk + d_j B_ki + d_k B_ij`, max abs entry.
pub fn exterior_derivative_residual(form: &dyn Fn(&DVector<f64>) -> DMatrix<f64>, y: &DVector<f64>, h: f64) -> f64 {
    let n = y.len();
    let mut derivs = Vec::with_capacity(n);
    for i in 0..n {
        let mut yp = y.clone();
        let mut ym = y.clone();
        yp[i] += h;
        ym[i] -= h;
        derivs.push((form(&yp) - form(&ym)) / (2.0 * h));
    }
    let mut worst: f64 = 0.0;
    for i in 0..n {
        for j in 0..n {
            for k in 0..n {
                let v = derivs[i][(j, k)] + derivs[j][(k, i)] + derivs[k][(i, j)];
                worst = worst.max(v.abs());
            }
        }
    }
    worst
}

/// Magnetic term on a singleton-orbit leaf: closed, basic and equal to `d(chi . A)`.
pub fn magnetic_term(b: &BundleSpec, orbit: &CoadjointOrbit, samples: usize, seed: u64) -> Result<(MagneticTerm, SuiteReport), PoissonError> {
    let mt = MagneticTerm::new(b, orbit)?;
    let mut rng = rng::stream(seed, "poisson.magnetic");
    let d = b.base_dim();
    let mut closed = MaxResidual::new();
    let mut basic = MaxResidual::new();
    let mut oracle = MaxResidual::new();
    let mut flat = MaxResidual::new();
    let mut solve = MaxResidual::new();
    for _ in 0..samples {
        let m = b.base.sample(&mut rng);
        let rho = rng::uniform_vec(&mut rng, d, 1.0);
        let y = linalg::concat(&[m.chart(), &rho]);
        let bm = mt.evaluate(&y);
        let (_, sres) = mt.leaf_form(&y);
        solve.push(sres);
        basic.push(linalg::max_abs_mat(&bm.view((0, d), (2 * d, d)).into_owned()).max(linalg::max_abs_mat(&bm.view((d, 0), (d, d)).into_owned())));
        let exact = curvature_term_exact(b, m.chart(), &mt.chi);
        oracle.push(linalg::max_abs_mat(&(bm.view((0, 0), (d, d)) - &exact)));
        if b.connection.is_flat() {
            flat.push(linalg::max_abs_mat(&bm));
        }
        closed.push(exterior_derivative_residual(&|v| mt.evaluate(v), &y, SECOND_STEP));
    }
    let mut checks = vec![
        closed.check("closed", 1e-6),
        basic.check("basic", 1e-7),
        oracle.check("equals_d_of_chi_dot_a", 1e-7),
        solve.check("leaf_tangents_in_tensor_image", 1e-8),
    ];
    if b.connection.is_flat() {
        checks.push(flat.check("flat_connection_vanishes", 1e-9));
    }
    Ok((mt, SuiteReport::new(format!("poisson.magnetic:{}", b.name), samples, checks, vec![])))
}

/// Arrow of the reduced cotangent gauge groupoid, on the slice `u_p = e` of
/// `{J(phi) + J(psi) = 0}`: coordinates `(m_p, a_p, chi_p, m_q, u_q, a_q)`, with
/// `psi = (a_q, -chi_p)` at `q = (m_q, u_q)`.
#[derive(Clone, Debug)]
pub struct GaugeArrow {
    pub m_p: DVector<f64>,
    pub a_p: DVector<f64>,
    pub chi_p: DVector<f64>,
    pub m_q: DVector<f64>,
    pub u_q: DMatrix<f64>,
    pub a_q: DVector<f64>,
}

impl GaugeArrow {
    pub fn phi(&self, b: &BundleSpec) -> CotangentSample {
        CotangentSample {
            point: BundlePoint {
                base: BasePoint::Chart(self.m_p.clone()),
                fiber: b.group.identity(),
            },
            covector: linalg::concat(&[&self.a_p, &self.chi_p]),
        }
    }

    pub fn psi(&self) -> CotangentSample {
        CotangentSample {
            point: BundlePoint {
                base: BasePoint::Chart(self.m_q.clone()),
                fiber: self.u_q.clone(),
            },
            covector: linalg::concat(&[&self.a_q, &(-&self.chi_p)]),
        }
    }

    /// `t = [phi]`.
    pub fn target(&self, b: &BundleSpec) -> QuotientClass {
        b.quotient_rep(&self.phi(b))
    }

    /// `s = [-psi]`.
    pub fn source(&self, b: &BundleSpec) -> QuotientClass {
        let mut neg = self.psi();
        neg.covector = -neg.covector;
        b.quotient_rep(&neg)
    }

    /// Slice coordinates `(m_p, a_p, chi_p, m_q, a_q)` and a chart `u_q = u0 exp(x)`.
    fn perturbed(&self, b: &BundleSpec, v: &DVector<f64>) -> GaugeArrow {
        let (d, n) = (b.base_dim(), b.fiber_dim());
        let parts = linalg::split(v, &[d, d, n, d, n, d]);
        GaugeArrow {
            m_p: &self.m_p + &parts[0],
            a_p: &self.a_p + &parts[1],
            chi_p: &self.chi_p + &parts[2],
            m_q: &self.m_q + &parts[3],
            u_q: &self.u_q * expm(&b.group.hat(&parts[4])),
            a_q: &self.a_q + &parts[5],
        }
    }
}

/// Upstairs canonical coordinates of `(phi, psi)` in charts centred at the arrow's
/// base points; used to pull back `omega + omega`.
fn arrow_canonical_coords(b: &BundleSpec, center: &GaugeArrow, arrow: &GaugeArrow) -> DVector<f64> {
    let (d, n) = (b.base_dim(), b.fiber_dim());
    let mut out = Vec::with_capacity(4 * (d + n));
    for (c, s) in [(center.phi(b), arrow.phi(b)), (center.psi(), arrow.psi())] {
        let x = b.local_diff(&c.point, &s.point).expect("nearby points");
        let q = x.rows(d, n).into_owned();
        let p = left_dexp(&b.group, &q).transpose() * s.covector.rows(d, n);
        out.extend(x.rows(0, d).iter().copied());
        out.extend(q.iter().copied());
        out.extend(s.covector.rows(0, d).iter().copied());
        out.extend(p.iter().copied());
    }
    DVector::from_vec(out)
}

/// `d gamma` on `T*P x T*P` in canonical coordinates `(x, q, a, p)` per factor.
fn double_canonical_form(dim_p: usize) -> DMatrix<f64> {
    let k = 2 * dim_p;
    let mut w = DMatrix::zeros(2 * k, 2 * k);
    for f in 0..2 {
        let off = f * k;
        for i in 0..dim_p {
            w[(off + dim_p + i, off + i)] = 1.0;
            w[(off + i, off + dim_p + i)] = -1.0;
        }
    }
    w
}

/// Target/source compatibility, orbit connection by arrows, and graph isotropy of
/// the action of the cotangent gauge groupoid on the leaf through `orbit.seed`.
pub fn groupoid_action_symplectic(b: &BundleSpec, orbit: &CoadjointOrbit, samples: usize, seed: u64) -> Result<SuiteReport, PoissonError> {
    let space = PoissonSpace::quotient(b.clone())?;
    let g = &b.group;
    let (d, n) = (b.base_dim(), b.fiber_dim());
    let mu0 = orbit.seed_vec();
    let mut rng = rng::stream(seed, "poisson.groupoid_action");
    let mut t_poisson = MaxResidual::new();
    let mut s_anti = MaxResidual::new();
    let mut ts_commute = MaxResidual::new();
    let mut connect = MaxResidual::new();
    let mut identity = MaxResidual::new();
    let mut isotropy = MaxResidual::new();
    let mut lagrangian_ok = true;
    let qdim = space.dim();
    for _ in 0..samples {
        // (a) On T*P x T*P with canonical charts around (phi, psi).
        let phi = b.sample_covector(&mut rng);
        let psi = b.sample_covector(&mut rng);
        let c1 = CotangentChart::new(b, phi.point.clone());
        let c2 = CotangentChart::new(b, psi.point.clone());
        let w0 = linalg::concat(&[&c1.coords_at_center(&phi), &c2.coords_at_center(&psi)]);
        let k = c1.dim();
        let f = ScalarField::random_quadratic(qdim, &mut rng);
        let h = ScalarField::random_quadratic(qdim, &mut rng);
        let via_t = |fun: &ScalarField| {
            let (b, c1, fun) = (b.clone(), c1.clone(), fun.clone());
            move |w: &DVector<f64>| fun.eval(&quotient_coords(&b.quotient_rep(&c1.sample(&w.rows(0, k).into_owned()))))
        };
        let via_s = |fun: &ScalarField| {
            let (b, c2, fun) = (b.clone(), c2.clone(), fun.clone());
            move |w: &DVector<f64>| {
                let mut s = c2.sample(&w.rows(k, k).into_owned());
                s.covector = -s.covector;
                fun.eval(&quotient_coords(&b.quotient_rep(&s)))
            }
        };
        let big = canonical_tensor_pair(b.dim());
        let br = |x: &dyn Fn(&DVector<f64>) -> f64, y: &dyn Fn(&DVector<f64>) -> f64| {
            fd_gradient(x, &w0, GRAD_STEP).dot(&(&big * fd_gradient(y, &w0, GRAD_STEP)))
        };
        let zt = quotient_coords(&b.quotient_rep(&phi));
        let mut neg = psi.clone();
        neg.covector = -neg.covector;
        let zs = quotient_coords(&b.quotient_rep(&neg));
        let down_t = space.bracket(&f, &h, &zt)?;
        let down_s = space.bracket(&f, &h, &zs)?;
        t_poisson.push((br(&via_t(&f), &via_t(&h)) - down_t).abs());
        s_anti.push((br(&via_s(&f), &via_s(&h)) + down_s).abs());
        ts_commute.push(br(&via_t(&f), &via_s(&h)).abs());

        // (b) Two leaf points connected by an explicit arrow.
        let wit1 = crate::bundle::sample_element(g, &mut rng, 1.0);
        let wit2 = crate::bundle::sample_element(g, &mut rng, 1.0);
        let x1 = leaf_class(b, &mut rng, &orbit_point(g, &wit1, &mu0));
        let x2 = leaf_class(b, &mut rng, &orbit_point(g, &wit2, &mu0));
        // J(x1 . gw) = Ad*_{gw^-1} J(x1) = J(x2) for gw = wit1^-1 wit2.
        let gw = g.inverse(&wit1) * &wit2;
        let arrow = GaugeArrow {
            m_p: x2.base.chart().clone(),
            a_p: x2.covector.rows(0, d).into_owned(),
            chi_p: x2.covector.rows(d, n).into_owned(),
            m_q: x1.base.chart().clone(),
            u_q: gw.clone(),
            a_q: -x1.covector.rows(0, d).into_owned(),
        };
        let moved = b.lift_class(&x1, &gw);
        let jdiag = b.momentum_unchecked(&arrow.phi(b).covector) - b.momentum_unchecked(&moved.covector);
        let t_res = (arrow.target(b).covector - &x2.covector).amax();
        let s_res = (arrow.source(b).covector - &x1.covector).amax();
        connect.push(t_res.max(s_res).max(jdiag.amax()));
        let unit = GaugeArrow {
            m_p: x1.base.chart().clone(),
            a_p: x1.covector.rows(0, d).into_owned(),
            chi_p: x1.covector.rows(d, n).into_owned(),
            m_q: x1.base.chart().clone(),
            u_q: g.identity(),
            a_q: -x1.covector.rows(0, d).into_owned(),
        };
        identity.push((unit.source(b).covector - unit.target(b).covector).amax());

        // (c) Graph {(gamma, s(gamma), t(gamma))} isotropic for (-Omega) + (-omega) + omega.
        let dim_slice = 4 * d + 2 * n;
        let zero = DVector::zeros(dim_slice);
        let embed = |v: &DVector<f64>| arrow_canonical_coords(b, &arrow, &arrow.perturbed(b, v));
        let de = fd_jacobian(&embed, &zero, GRAD_STEP);
        let omega_big = de.transpose() * double_canonical_form(b.dim()) * &de;
        let s_map = |v: &DVector<f64>| quotient_coords(&arrow.perturbed(b, v).source(b));
        let t_map = |v: &DVector<f64>| quotient_coords(&arrow.perturbed(b, v).target(b));
        let ds = fd_jacobian(&s_map, &zero, GRAD_STEP);
        let dt = fd_jacobian(&t_map, &zero, GRAD_STEP);
        let zs = s_map(&zero);
        let zt = t_map(&zero);
        let pi_s = space.tensor(&zs)?;
        let pi_t = space.tensor(&zt)?;
        // Directions whose source image stays tangent to the leaf.
        let img = image_basis(&pi_s);
        let proj = &img * img.transpose();
        let normal = (DMatrix::identity(qdim, qdim) - proj) * &ds;
        let dirs = linalg::null_space(&normal);
        let leaf_dim = img.ncols();
        lagrangian_ok &= dirs.ncols() == qdim + leaf_dim && 2 * dirs.ncols() == dim_slice + 2 * leaf_dim;
        let sx = &ds * &dirs;
        let tx = &dt * &dirs;
        let (ws, r1) = leaf_form(&pi_s, &sx);
        let (wt, r2) = leaf_form(&pi_t, &tx);
        let wg = dirs.transpose() * &omega_big * &dirs;
        let total = -wg - ws + wt;
        isotropy.push(linalg::max_abs_mat(&total).max(r1).max(r2));
    }
    let checks = vec![
        t_poisson.check("target_poisson", 1e-6),
        s_anti.check("source_anti_poisson", 1e-6),
        ts_commute.check("source_target_commute", 1e-6),
        connect.check("leaf_points_connected_by_arrow", 1e-9),
        identity.check("identity_arrow_fixes_point", 0.0),
        isotropy.check("graph_isotropic", 1e-7),
        Check::exact("graph_dimension_lagrangian", samples, lagrangian_ok),
    ];
    Ok(SuiteReport::new(format!("poisson.groupoid_action:{}", b.name), samples, checks, vec![]))
}

fn canonical_tensor_pair(dim_p: usize) -> DMatrix<f64> {
    let k = 2 * dim_p;
    let mut t = DMatrix::zeros(2 * k, 2 * k);
    t.view_mut((0, 0), (k, k)).copy_from(&canonical_tensor(dim_p));
    t.view_mut((k, k), (k, k)).copy_from(&canonical_tensor(dim_p));
    t
}

fn image_basis(m: &DMatrix<f64>) -> DMatrix<f64> {
    let svd = m.clone().svd(true, false);
    let u = svd.u.expect("u requested");
    let r = numeric_rank(m);
    u.columns(0, r).into_owned()
}

/// Random class with fiber momentum `chi`.
fn leaf_class(b: &BundleSpec, rng: &mut Stream, chi: &DVector<f64>) -> QuotientClass {
    let m = b.base.sample(rng);
    let a = rng::uniform_vec(rng, b.base_dim(), 1.0);
    QuotientClass {
        base: m,
        covector: linalg::concat(&[&a, chi]),
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn so3_coordinate_bracket() {
        let s = PoissonSpace::lie_poisson(crate::liealg::so3());
        let mu = DVector::from_vec(vec![0.3, -0.7, 1.1]);
        let v = s.bracket(&ScalarField::coordinate(0), &ScalarField::coordinate(1), &mu).unwrap();
        assert!((v - 1.1).abs() < 1e-15);
    }

    #[test]
    fn left_dexp_matches_exponential_derivative() {
        let g = crate::liealg::so3();
        let q = DVector::from_vec(vec![0.4, -0.2, 0.7]);
        let v = DVector::from_vec(vec![0.1, 0.5, -0.3]);
        let h = 1e-6;
        let dexp = (expm(&g.hat(&(&q + &v * h))) - expm(&g.hat(&(&q - &v * h)))) / (2.0 * h);
        let lhs = g.vee(&(g.inverse(&expm(&g.hat(&q))) * dexp));
        assert!((lhs - left_dexp(&g, &q) * v).amax() < 1e-9);
    }

    #[test]
    fn out_of_chart_rejected() {
        let s = PoissonSpace::quotient(crate::bundle::BundleSpec::so3_over_square()).unwrap();
        let mut x = DVector::zeros(s.dim());
        x[0] = 3.0;
        let f = ScalarField::coordinate(0);
        assert!(matches!(s.bracket(&f, &f, &x), Err(PoissonError::OutOfChart(_))));
    }
}
