//! Trivialized principal bundles `P = M x G` with right action `kappa_g(m, u) = (m, u g)`.
//!
//! Tangent vectors and covectors of `P` at `(m, u)` are stored as one vector of
//! length `dim M + dim G`: base components first, then the left-trivialized fiber
//! components (`u . xi` for vectors, `phi(u . e_i)` for covectors). In this frame
//!
//! * `T kappa_g(p)(v, xi) = (v, Ad_{g^-1} xi)`,
//! * `T kappa_p(e) X = (0, X)`,
//! * `T* kappa_g(p)(a, chi) = (a, Ad*_{g^-1} chi)`,
//!
//! and the quotient `T*P/G` is represented by the slice `u = e`.

use crate::liealg::{LieError, LieGroupDoc, LieGroupSpec};
use crate::linalg::{self, numeric_rank};
use crate::report::{Check, MaxResidual, RankRow, SuiteReport};
use crate::rng::{self, Stream};
use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum BundleError {
    #[error(transparent)]
    Lie(#[from] LieError),
    #[error("invalid sample: {0}")]
    InvalidSample(String),
    #[error("invalid bundle spec: {0}")]
    InvalidSpec(String),
}

/// Polynomial in the base coordinates: terms `coef * prod x_i^{e_i}`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize, Default)]
pub struct Poly(pub Vec<(f64, Vec<u32>)>);

impl Poly {
    pub fn eval(&self, x: &DVector<f64>) -> f64 {
        self.0
            .iter()
            .map(|(c, e)| {
                let mut t = *c;
                for (i, &p) in e.iter().enumerate() {
                    if p > 0 {
                        t *= x[i].powi(p as i32);
                    }
                }
                t
            })
            .sum()
    }

    pub fn degree(&self) -> u32 {
        self.0.iter().map(|(_, e)| e.iter().sum::<u32>()).max().unwrap_or(0)
    }

    pub fn is_zero(&self) -> bool {
        self.0.iter().all(|(c, _)| *c == 0.0)
    }

    /// Monomial `coef * x_var`.
    pub fn linear(coef: f64, var: usize, nvars: usize) -> Self {
        let mut e = vec![0; nvars];
        e[var] = 1;
        Poly(vec![(coef, e)])
    }
}

/// Base manifold of a trivialized bundle.
#[derive(Clone, Debug, PartialEq)]
pub enum Base {
    /// Open box in `R^d` with coordinate chart the identity.
    Box { lo: Vec<f64>, hi: Vec<f64> },
    /// A Lie group `K` (bundles of the form `K x N`), left-trivialized.
    Group(LieGroupSpec),
}

#[derive(Clone, Debug, PartialEq)]
pub enum BasePoint {
    Chart(DVector<f64>),
    Group(DMatrix<f64>),
}

impl BasePoint {
    pub fn chart(&self) -> &DVector<f64> {
        match self {
            BasePoint::Chart(x) => x,
            BasePoint::Group(_) => panic!("group base point has no global chart"),
        }
    }
}

impl Base {
    pub fn dim(&self) -> usize {
        match self {
            Base::Box { lo, .. } => lo.len(),
            Base::Group(k) => k.dim,
        }
    }

    /// `m + v` on a box, `k exp(v)` on a group.
    pub fn retract(&self, m: &BasePoint, v: &DVector<f64>) -> BasePoint {
        match (self, m) {
            (Base::Box { .. }, BasePoint::Chart(x)) => BasePoint::Chart(x + v),
            (Base::Group(k), BasePoint::Group(g)) => BasePoint::Group(g * crate::liealg::expm(&k.hat(v))),
            _ => panic!("base point does not match base kind"),
        }
    }

    /// Inverse of [`Base::retract`] near `m0`.
    pub fn local_diff(&self, m0: &BasePoint, m1: &BasePoint) -> Result<DVector<f64>, LieError> {
        match (self, m0, m1) {
            (Base::Box { .. }, BasePoint::Chart(a), BasePoint::Chart(b)) => Ok(b - a),
            (Base::Group(k), BasePoint::Group(a), BasePoint::Group(b)) => k.log(&(k.inverse(a) * b)),
            _ => panic!("base point does not match base kind"),
        }
    }

    pub fn sample(&self, rng: &mut Stream) -> BasePoint {
        match self {
            Base::Box { lo, hi } => BasePoint::Chart(rng::box_point(rng, lo, hi, 0.1)),
            Base::Group(k) => BasePoint::Group(sample_element(k, rng, 1.0)),
        }
    }

    pub fn contains(&self, m: &BasePoint) -> bool {
        match (self, m) {
            (Base::Box { lo, hi }, BasePoint::Chart(x)) => {
                x.len() == lo.len() && x.iter().enumerate().all(|(i, v)| *v > lo[i] && *v < hi[i])
            }
            (Base::Group(k), BasePoint::Group(g)) => k.is_member(g, 1e-8),
            _ => false,
        }
    }
}

/// Random group element `exp(x)` with `x` uniform in `[-scale, scale]^n`.
pub fn sample_element(g: &LieGroupSpec, rng: &mut Stream, scale: f64) -> DMatrix<f64> {
    crate::liealg::expm(&g.hat(&rng::uniform_vec(rng, g.dim, scale)))
}

/// Local connection coefficients: `A(m) v = sum_j v_j A_j(m)`, `A_j` in the algebra.
#[derive(Clone, Debug, PartialEq)]
pub enum Connection {
    /// `A = 0`; for a group base this is the connection of the section `k -> (k, e)`.
    Flat,
    /// `polys[j][a]` is the `a`-th algebra component of `A_j`.
    Polynomial(Vec<Vec<Poly>>),
}

impl Connection {
    /// Matrix `A(m)` of shape `dim G x dim M`.
    pub fn matrix(&self, m: &BasePoint, n: usize, d: usize) -> DMatrix<f64> {
        match self {
            Connection::Flat => DMatrix::zeros(n, d),
            Connection::Polynomial(polys) => {
                let x = m.chart();
                DMatrix::from_fn(n, d, |a, j| polys[j][a].eval(x))
            }
        }
    }

    pub fn is_flat(&self) -> bool {
        match self {
            Connection::Flat => true,
            Connection::Polynomial(p) => p.iter().flatten().all(Poly::is_zero),
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum BundleKind {
    TrivialProduct,
    SemidirectTotal,
}

/// A trivialized principal bundle with a connection.
#[derive(Clone, Debug, PartialEq)]
pub struct BundleSpec {
    pub name: String,
    pub kind: BundleKind,
    pub base: Base,
    pub group: LieGroupSpec,
    pub connection: Connection,
}

#[derive(Clone, Debug, PartialEq)]
pub struct BundlePoint {
    pub base: BasePoint,
    pub fiber: DMatrix<f64>,
}

/// `phi` in `T*_p P`, components in the trivialization frame.
#[derive(Clone, Debug, PartialEq)]
pub struct CotangentSample {
    pub point: BundlePoint,
    pub covector: DVector<f64>,
}

/// A class in `T*P/G`, represented on the slice `u = e`.
#[derive(Clone, Debug, PartialEq)]
pub struct QuotientClass {
    pub base: BasePoint,
    pub covector: DVector<f64>,
}

/// Group reference in JSON: a built-in name or an inline spec.
#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(untagged)]
pub enum GroupRef {
    Name(String),
    Doc(LieGroupDoc),
}

impl GroupRef {
    pub fn resolve(&self) -> Result<LieGroupSpec, BundleError> {
        match self {
            GroupRef::Name(n) => crate::liealg::builtin(n)
                .ok_or_else(|| BundleError::InvalidSpec(format!("unknown group '{n}'"))),
            GroupRef::Doc(d) => Ok(LieGroupSpec::from_doc(d)?),
        }
    }
}

#[derive(Clone, Debug, Default, Serialize, Deserialize)]
pub struct ConnectionDoc {
    /// `A[j][a]`: polynomial for base coordinate `j`, algebra component `a`.
    #[serde(rename = "A", default)]
    pub a: Vec<Vec<Poly>>,
}

/// JSON form of a bundle.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct BundleDoc {
    #[serde(default)]
    pub name: Option<String>,
    pub kind: BundleKind,
    #[serde(default)]
    pub base_box: Vec<(f64, f64)>,
    pub group: GroupRef,
    #[serde(default)]
    pub connection: ConnectionDoc,
    /// Base group `K` for `SemidirectTotal`.
    #[serde(default)]
    pub base_group: Option<GroupRef>,
}

impl BundleSpec {
    pub fn trivial(name: impl Into<String>, lo: Vec<f64>, hi: Vec<f64>, group: LieGroupSpec, connection: Connection) -> Result<Self, BundleError> {
        if lo.len() != hi.len() || lo.iter().zip(&hi).any(|(a, b)| a >= b) {
            return Err(BundleError::InvalidSpec("base box needs lo < hi in every coordinate".into()));
        }
        if let Connection::Polynomial(p) = &connection {
            if p.len() != lo.len() || p.iter().any(|row| row.len() != group.dim) {
                return Err(BundleError::InvalidSpec(format!(
                    "connection needs {} x {} polynomials",
                    lo.len(),
                    group.dim
                )));
            }
            if p.iter().flatten().any(|q| q.degree() > 3 || q.0.iter().any(|(_, e)| e.len() != lo.len())) {
                return Err(BundleError::InvalidSpec("connection polynomials must have degree <= 3 in the base coordinates".into()));
            }
        }
        Ok(BundleSpec {
            name: name.into(),
            kind: BundleKind::TrivialProduct,
            base: Base::Box { lo, hi },
            group,
            connection,
        })
    }

    /// `K x N -> K` in the trivialization `Sigma(k, u) = (k, e)(e, u)`.
    pub fn semidirect_total(sd: &crate::semidirect::SemidirectSpec) -> Self {
        BundleSpec {
            name: format!("{}-over-{}", sd.group().name, sd.k.name),
            kind: BundleKind::SemidirectTotal,
            base: Base::Group(sd.k.clone()),
            group: sd.n.clone(),
            connection: Connection::Flat,
        }
    }

    pub fn from_doc(doc: &BundleDoc) -> Result<Self, BundleError> {
        let group = doc.group.resolve()?;
        match doc.kind {
            BundleKind::TrivialProduct => {
                let lo: Vec<f64> = doc.base_box.iter().map(|p| p.0).collect();
                let hi: Vec<f64> = doc.base_box.iter().map(|p| p.1).collect();
                let conn = if doc.connection.a.is_empty() {
                    Connection::Flat
                } else {
                    Connection::Polynomial(doc.connection.a.clone())
                };
                BundleSpec::trivial(doc.name.clone().unwrap_or_else(|| format!("{}-bundle", group.name)), lo, hi, group, conn)
            }
            BundleKind::SemidirectTotal => {
                let k = doc
                    .base_group
                    .as_ref()
                    .ok_or_else(|| BundleError::InvalidSpec("SemidirectTotal needs base_group".into()))?
                    .resolve()?;
                Ok(BundleSpec {
                    name: doc.name.clone().unwrap_or_else(|| format!("{}-over-{}", group.name, k.name)),
                    kind: BundleKind::SemidirectTotal,
                    base: Base::Group(k),
                    group,
                    connection: Connection::Flat,
                })
            }
        }
    }

    /// `M = [-1,1]^d`, `G = SO(3)`, a cubic non-flat connection.
    pub fn so3_over_square() -> Self {
        let d = 2;
        let mut a = vec![vec![Poly::default(); 3]; d];
        a[0][0] = Poly(vec![(0.5, vec![0, 1]), (0.2, vec![1, 1])]);
        a[0][2] = Poly(vec![(-0.3, vec![1, 0]), (0.1, vec![0, 3])]);
        a[1][1] = Poly(vec![(0.4, vec![1, 0]), (-0.25, vec![2, 1])]);
        a[1][2] = Poly(vec![(0.3, vec![0, 0]), (0.2, vec![0, 2])]);
        BundleSpec::trivial("so3-over-square", vec![-1.0; d], vec![1.0; d], crate::liealg::so3(), Connection::Polynomial(a))
            .expect("built-in bundle is valid")
    }

    /// `U(1)` over `[-1,1]^2` with `A = (-y dx + x dy)/2`.
    pub fn u1_magnetic() -> Self {
        let a = vec![vec![Poly::linear(-0.5, 1, 2)], vec![Poly::linear(0.5, 0, 2)]];
        BundleSpec::trivial("u1-magnetic", vec![-1.0; 2], vec![1.0; 2], crate::liealg::torus(1), Connection::Polynomial(a))
            .expect("built-in bundle is valid")
    }

    pub fn with_connection(&self, connection: Connection) -> Self {
        BundleSpec {
            connection,
            ..self.clone()
        }
    }

    pub fn base_dim(&self) -> usize {
        self.base.dim()
    }

    pub fn fiber_dim(&self) -> usize {
        self.group.dim
    }

    pub fn dim(&self) -> usize {
        self.base_dim() + self.fiber_dim()
    }

    fn split<'a>(&self, v: &'a DVector<f64>) -> (nalgebra::DVectorView<'a, f64>, nalgebra::DVectorView<'a, f64>) {
        let d = self.base_dim();
        (v.rows(0, d), v.rows(d, self.fiber_dim()))
    }

    fn join(&self, base: &DVector<f64>, fiber: &DVector<f64>) -> DVector<f64> {
        linalg::concat(&[base, fiber])
    }

    pub fn sample_point(&self, rng: &mut Stream) -> BundlePoint {
        BundlePoint {
            base: self.base.sample(rng),
            fiber: sample_element(&self.group, rng, 1.0),
        }
    }

    pub fn sample_covector(&self, rng: &mut Stream) -> CotangentSample {
        CotangentSample {
            point: self.sample_point(rng),
            covector: rng::uniform_vec(rng, self.dim(), 1.0),
        }
    }

    pub fn sample_group(&self, rng: &mut Stream) -> DMatrix<f64> {
        sample_element(&self.group, rng, 1.0)
    }

    pub fn validate_sample(&self, phi: &CotangentSample) -> Result<(), BundleError> {
        if phi.covector.len() != self.dim() {
            return Err(BundleError::InvalidSample(format!(
                "covector has {} components, bundle dimension is {}",
                phi.covector.len(),
                self.dim()
            )));
        }
        if !self.base.contains(&phi.point.base) {
            return Err(BundleError::InvalidSample("base point outside the chart".into()));
        }
        if !self.group.is_member(&phi.point.fiber, 1e-8) {
            return Err(BundleError::InvalidSample("fiber element not in the group".into()));
        }
        if !phi.covector.iter().all(|x| x.is_finite()) {
            return Err(BundleError::InvalidSample("non-finite covector".into()));
        }
        Ok(())
    }

    /// `kappa_g(p) = p g`.
    pub fn act(&self, p: &BundlePoint, g: &DMatrix<f64>) -> BundlePoint {
        BundlePoint {
            base: p.base.clone(),
            fiber: &p.fiber * g,
        }
    }

    /// Matrix of `T kappa_g(p): T_p P -> T_{pg} P`.
    pub fn t_kappa_g(&self, g: &DMatrix<f64>) -> DMatrix<f64> {
        let d = self.base_dim();
        let n = self.fiber_dim();
        let mut m = DMatrix::identity(d + n, d + n);
        let ad = self.group.adjoint_matrix(&self.group.inverse(g));
        m.view_mut((d, d), (n, n)).copy_from(&ad);
        m
    }

    /// Matrix of `T kappa_p(e): g -> T_p P`.
    pub fn t_kappa_p(&self) -> DMatrix<f64> {
        let d = self.base_dim();
        let n = self.fiber_dim();
        let mut m = DMatrix::zeros(d + n, n);
        m.view_mut((d, 0), (n, n)).fill_with_identity();
        m
    }

    /// Matrix of `T kappa_p(g)` on left-trivialized `T_g G`, landing in `T_{pg} P`.
    pub fn t_kappa_p_at(&self, _g: &DMatrix<f64>) -> DMatrix<f64> {
        // d/dt (m, u g exp(t eta)) = (0, eta) at pg.
        self.t_kappa_p()
    }

    /// Matrix of `T* kappa_g(p) = (T kappa_g(p)^-1)^*` on covector components.
    pub fn t_star_kappa_g(&self, g: &DMatrix<f64>) -> DMatrix<f64> {
        let inv = self.t_kappa_g(&self.group.inverse(g));
        inv.transpose()
    }

    /// Lifted action on a cotangent sample.
    pub fn cot_act(&self, phi: &CotangentSample, g: &DMatrix<f64>) -> CotangentSample {
        CotangentSample {
            point: self.act(&phi.point, g),
            covector: self.t_star_kappa_g(g) * &phi.covector,
        }
    }

    /// `J(phi) = phi o T kappa_p(e)`, as the pairings `<phi, T kappa_p(e) e_i>`.
    pub fn momentum_j(&self, phi: &CotangentSample) -> Result<DVector<f64>, BundleError> {
        self.validate_sample(phi)?;
        Ok(self.momentum_unchecked(&phi.covector))
    }

    pub(crate) fn momentum_unchecked(&self, covector: &DVector<f64>) -> DVector<f64> {
        let tk = self.t_kappa_p();
        DVector::from_fn(self.fiber_dim(), |i, _| covector.dot(&tk.column(i)))
    }

    /// `|J(phi g) - Ad*_{g^-1} J(phi)|`.
    pub fn check_equivariance_j(&self, phi: &CotangentSample, g: &DMatrix<f64>) -> f64 {
        let lhs = self.momentum_unchecked(&self.cot_act(phi, g).covector);
        let rhs = self.group.coadjoint_matrix(&self.group.inverse(g)) * self.momentum_unchecked(&phi.covector);
        (lhs - rhs).amax()
    }

    /// Gauge-fixed representative: act by `u^-1`.
    pub fn quotient_rep(&self, phi: &CotangentSample) -> QuotientClass {
        let ui = self.group.inverse(&phi.point.fiber);
        let moved = self.cot_act(phi, &ui);
        QuotientClass {
            base: moved.point.base,
            covector: moved.covector,
        }
    }

    /// Upstairs point of a class at fiber element `u`.
    pub fn lift_class(&self, x: &QuotientClass, u: &DMatrix<f64>) -> CotangentSample {
        let rep = CotangentSample {
            point: BundlePoint {
                base: x.base.clone(),
                fiber: self.group.identity(),
            },
            covector: x.covector.clone(),
        };
        self.cot_act(&rep, u)
    }

    /// `I*(phi) = (p, J(phi))`.
    pub fn i_star(&self, phi: &CotangentSample) -> (BundlePoint, DVector<f64>) {
        (phi.point.clone(), self.momentum_unchecked(&phi.covector))
    }

    /// `iota*[phi] = [p, J(phi)]`, gauge-fixed to `u = e`.
    pub fn iota_star(&self, x: &QuotientClass) -> (BasePoint, DVector<f64>) {
        (x.base.clone(), self.momentum_unchecked(&x.covector))
    }

    /// `a*(rho) = [T mu(p)^* rho]` for any `p` over `m`; `p` is taken at fiber `u`.
    pub fn a_star_at(&self, m: &BasePoint, rho: &DVector<f64>, u: &DMatrix<f64>) -> QuotientClass {
        let d = self.base_dim();
        // T mu(p) projects onto the base components, so its dual pads with zeros.
        let mut t_mu = DMatrix::zeros(d, self.dim());
        t_mu.view_mut((0, 0), (d, d)).fill_with_identity();
        let phi = CotangentSample {
            point: BundlePoint {
                base: m.clone(),
                fiber: u.clone(),
            },
            covector: t_mu.transpose() * rho,
        };
        self.quotient_rep(&phi)
    }

    pub fn a_star(&self, m: &BasePoint, rho: &DVector<f64>) -> QuotientClass {
        self.a_star_at(m, rho, &self.group.identity())
    }

    /// Connection form `alpha_p(v, xi) = xi + Ad_{u^-1} A(m) v`.
    pub fn alpha(&self, p: &BundlePoint, v: &DVector<f64>) -> DVector<f64> {
        let (vb, vf) = self.split(v);
        let a = self.connection.matrix(&p.base, self.fiber_dim(), self.base_dim());
        let ad = self.group.adjoint_matrix(&self.group.inverse(&p.fiber));
        vf.into_owned() + ad * (a * vb)
    }

    /// Matrix of `alpha_p`.
    pub fn alpha_matrix(&self, p: &BundlePoint) -> DMatrix<f64> {
        let cols: Vec<DVector<f64>> = (0..self.dim())
            .map(|i| {
                let mut e = DVector::zeros(self.dim());
                e[i] = 1.0;
                self.alpha(p, &e)
            })
            .collect();
        DMatrix::from_columns(&cols)
    }

    /// Horizontal lift of a base vector at `p`.
    pub fn horizontal_lift(&self, p: &BundlePoint, v: &DVector<f64>) -> DVector<f64> {
        let a = self.connection.matrix(&p.base, self.fiber_dim(), self.base_dim());
        let ad = self.group.adjoint_matrix(&self.group.inverse(&p.fiber));
        self.join(v, &(-(ad * (a * v))))
    }

    /// `sigma(m, chi) = [chi o alpha_p]` at `p = (m, e)`, a section of `iota*`.
    pub fn sigma(&self, m: &BasePoint, chi: &DVector<f64>) -> QuotientClass {
        let p = BundlePoint {
            base: m.clone(),
            fiber: self.group.identity(),
        };
        QuotientClass {
            base: m.clone(),
            covector: self.alpha_matrix(&p).transpose() * chi,
        }
    }

    /// Pairing of a covector with a tangent vector in the trivialization frame.
    pub fn pair(&self, phi: &DVector<f64>, v: &DVector<f64>) -> f64 {
        phi.dot(v)
    }

    /// Left-trivialized tangent of `P` at `p0` pointing to `p1` (inverse retraction).
    pub fn local_diff(&self, p0: &BundlePoint, p1: &BundlePoint) -> Result<DVector<f64>, LieError> {
        let vb = self.base.local_diff(&p0.base, &p1.base)?;
        let vf = self.group.log(&(self.group.inverse(&p0.fiber) * &p1.fiber))?;
        Ok(self.join(&vb, &vf))
    }

    /// Move `p` along left-trivialized `v`.
    pub fn retract(&self, p: &BundlePoint, v: &DVector<f64>) -> BundlePoint {
        let (vb, vf) = self.split(v);
        BundlePoint {
            base: self.base.retract(&p.base, &vb.into_owned()),
            fiber: &p.fiber * crate::liealg::expm(&self.group.hat(&vf.into_owned())),
        }
    }

    /// Canonical one-form `<gamma_phi, X> = <phi, T pi X>` along a curve in `T*P`
    /// through `curve(0)`, by central differences with step `h`.
    pub fn gamma_along<F>(&self, curve: F, h: f64) -> Result<f64, LieError>
    where
        F: Fn(f64) -> CotangentSample,
    {
        let c0 = curve(0.0);
        let fwd = self.local_diff(&c0.point, &curve(h).point)?;
        let bwd = self.local_diff(&c0.point, &curve(-h).point)?;
        let tangent = (fwd - bwd) / (2.0 * h);
        Ok(c0.covector.dot(&tangent))
    }
}

/// Identities of the lifted action on random samples.
pub fn action_suite(b: &BundleSpec, samples: usize, seed: u64) -> SuiteReport {
    let mut rng = rng::stream(seed, "bundle.action");
    let g_spec = &b.group;
    let mut orbit_right = MaxResidual::new();
    let mut orbit_conj = MaxResidual::new();
    let mut orbit_left = MaxResidual::new();
    let mut infinitesimal = MaxResidual::new();
    let mut inversion = MaxResidual::new();
    let mut cocycle_t = MaxResidual::new();
    let mut cocycle_ts = MaxResidual::new();
    let mut duality = MaxResidual::new();
    let mut identity = MaxResidual::new();
    let mut tk_general = MaxResidual::new();
    let mut gamma_inv = MaxResidual::new();
    let mut equivariance = MaxResidual::new();
    for _ in 0..samples {
        let phi = b.sample_covector(&mut rng);
        let p = &phi.point;
        let g = b.sample_group(&mut rng);
        let h = b.sample_group(&mut rng);
        let x = rng::uniform_vec(&mut rng, g_spec.dim, 1.0);
        let v = rng::uniform_vec(&mut rng, b.dim(), 1.0);
        let gi = g_spec.inverse(&g);
        let pg = b.act(p, &g);

        // Orbit maps kappa_p(h) = p h, composed with right/left translations.
        let kp = |q: &BundlePoint, k: &DMatrix<f64>| b.act(q, k).fiber;
        orbit_right.push((kp(&b.act(p, &h), &g) - kp(p, &(&h * &g))).amax());
        orbit_conj.push((kp(&b.act(p, &h), &g) - kp(&pg, &(&gi * &h * &g))).amax());
        orbit_left.push((kp(&pg, &h) - kp(p, &(&g * &h))).amax());

        let tkg = b.t_kappa_g(&g);
        let tkp = b.t_kappa_p();
        let lhs4 = &tkp * &x;
        let rhs4 = &tkg * &tkp * g_spec.adjoint_matrix(&g) * &x;
        infinitesimal.push((lhs4 - rhs4).amax());

        let tkg_inv_at_pg = b.t_kappa_g(&gi);
        inversion.push((&tkg_inv_at_pg * &tkg - DMatrix::identity(b.dim(), b.dim())).amax());

        let tk_gh = b.t_kappa_g(&(&g * &h));
        cocycle_t.push((&tk_gh - b.t_kappa_g(&h) * &tkg).amax());
        let tks_gh = b.t_star_kappa_g(&(&g * &h));
        cocycle_ts.push((&tks_gh - b.t_star_kappa_g(&h) * b.t_star_kappa_g(&g)).amax());

        let pushed = &tkg * &v;
        let moved = b.t_star_kappa_g(&g) * &phi.covector;
        duality.push((moved.dot(&pushed) - phi.covector.dot(&v)).abs());

        identity.push((b.t_kappa_g(&g_spec.identity()) - DMatrix::identity(b.dim(), b.dim())).amax());

        // T kappa_p at g composed with TL_g agrees with T kappa_{pg}(e).
        tk_general.push((b.t_kappa_p_at(&g) * &x - &tkp * &x).amax());

        // gamma is invariant under the lifted action.
        let dir = rng::uniform_vec(&mut rng, 2 * b.dim(), 1.0);
        let curve = |t: f64| {
            let (dv, dphi) = (dir.rows(0, b.dim()).into_owned(), dir.rows(b.dim(), b.dim()).into_owned());
            CotangentSample {
                point: b.retract(p, &(dv * t)),
                covector: &phi.covector + dphi * t,
            }
        };
        let h_fd = 1e-6 * (1.0 + phi.covector.amax());
        let before = b.gamma_along(curve, h_fd);
        let after = b.gamma_along(|t| b.cot_act(&curve(t), &g), h_fd);
        match (before, after) {
            (Ok(x0), Ok(x1)) => gamma_inv.push((x0 - x1).abs()),
            _ => gamma_inv.push(f64::NAN),
        }
        equivariance.push(b.check_equivariance_j(&phi, &g));
    }
    let checks = vec![
        orbit_right.check("orbit_right_translation", 1e-10),
        orbit_conj.check("orbit_conjugation", 1e-10),
        orbit_left.check("orbit_left_translation", 1e-10),
        infinitesimal.check("infinitesimal_action_at_pg", 1e-10),
        inversion.check("inverse_lift", 1e-10),
        cocycle_t.check("cocycle_tangent", 1e-10),
        cocycle_ts.check("cocycle_cotangent", 1e-10),
        duality.check("cotangent_lift_is_inverse_dual", 1e-10),
        identity.check("identity_acts_trivially", 1e-14),
        tk_general.check("t_kappa_at_g_consistent", 1e-10),
        gamma_inv.check("gamma_invariance", 1e-9),
        equivariance.check("j_equivariance", 1e-10),
    ];
    SuiteReport::new(format!("bundle.action:{}", b.name), samples, checks, vec![])
}

/// Exactness of `0 -> T*(P/G) -> T*P/G -> P x_G g* -> 0` and of its upstairs
/// version `0 -> T^{V0}P -> T*P -> P x g* -> 0`, fiber by fiber.
pub fn atiyah_exactness(b: &BundleSpec, fibers: usize, seed: u64) -> SuiteReport {
    let mut rng = rng::stream(seed, "bundle.atiyah");
    let (d, n) = (b.base_dim(), b.fiber_dim());
    let mut composite = MaxResidual::new();
    let mut kernel_match = MaxResidual::new();
    let mut a_star_in_j0 = MaxResidual::new();
    let mut gauge_independence = MaxResidual::new();
    let mut iota_section = MaxResidual::new();
    let mut ranks_ok = true;
    let mut table = Vec::new();
    for trial in 0..fibers {
        let p = b.sample_point(&mut rng);
        // Matrices of a* (d -> d+n) and iota* (d+n -> n) on the class fiber over m.
        let a_cols: Vec<DVector<f64>> = (0..d)
            .map(|j| {
                let mut e = DVector::zeros(d);
                e[j] = 1.0;
                b.a_star_at(&p.base, &e, &p.fiber).covector
            })
            .collect();
        let a_mat = if d == 0 { DMatrix::zeros(d + n, 0) } else { DMatrix::from_columns(&a_cols) };
        let i_cols: Vec<DVector<f64>> = (0..d + n)
            .map(|j| {
                let mut e = DVector::zeros(d + n);
                e[j] = 1.0;
                b.iota_star(&QuotientClass { base: p.base.clone(), covector: e }).1
            })
            .collect();
        let i_mat = DMatrix::from_columns(&i_cols);
        let ra = numeric_rank(&a_mat);
        let ri = numeric_rank(&i_mat);
        composite.push(linalg::max_abs_mat(&(&i_mat * &a_mat)));
        let ker = linalg::null_space(&i_mat);
        // im a* = ker iota*: projecting a* columns onto ker leaves them unchanged.
        let proj = &ker * ker.transpose();
        kernel_match.push(linalg::max_abs_mat(&(&proj * &a_mat - &a_mat)));
        let rho = rng::uniform_vec(&mut rng, d, 1.0);
        let cls = b.a_star_at(&p.base, &rho, &p.fiber);
        a_star_in_j0.push(b.momentum_unchecked(&cls.covector).amax());
        let other = b.a_star_at(&p.base, &rho, &b.sample_group(&mut rng));
        gauge_independence.push((cls.covector - other.covector).amax());
        let chi = rng::uniform_vec(&mut rng, n, 1.0);
        iota_section.push((b.iota_star(&b.sigma(&p.base, &chi)).1 - chi).amax());

        // Upstairs: I* at p and the annihilator of the vertical space.
        let i_up = b.t_kappa_p().transpose();
        let ann = linalg::null_space(&i_up);
        let r_up = numeric_rank(&i_up);
        ranks_ok &= ra == d && ri == n && ker.ncols() == d && ra + ri == d + n && r_up == n && ann.ncols() == d;
        if trial == 0 {
            table.push(RankRow { map: "a_star".into(), rows: d + n, cols: d, rank: ra, expected: d });
            table.push(RankRow { map: "iota_star".into(), rows: n, cols: d + n, rank: ri, expected: n });
            table.push(RankRow { map: "I_star".into(), rows: n, cols: d + n, rank: r_up, expected: n });
            table.push(RankRow { map: "annihilator_of_vertical".into(), rows: d + n, cols: ann.ncols(), rank: ann.ncols(), expected: d });
        }
    }
    let checks = vec![
        composite.check("iota_star_after_a_star_zero", 1e-11),
        kernel_match.check("image_a_star_equals_kernel_iota_star", 1e-10),
        a_star_in_j0.check("a_star_lands_in_zero_momentum", 1e-12),
        gauge_independence.check("a_star_independent_of_fiber_point", 1e-10),
        iota_section.check("iota_star_after_sigma_identity", 1e-11),
        Check::exact("ranks_all_fibers", fibers, ranks_ok),
    ];
    SuiteReport::new(format!("bundle.atiyah:{}", b.name), fibers, checks, table)
}

/// Connection-form identities and the section `sigma` they induce.
pub fn connection_suite(b: &BundleSpec, samples: usize, seed: u64) -> SuiteReport {
    let mut rng = rng::stream(seed, "bundle.connection");
    let mut reproduces = MaxResidual::new();
    let mut alpha_equiv = MaxResidual::new();
    let mut section = MaxResidual::new();
    let mut flat_base = MaxResidual::new();
    let mut horizontal = MaxResidual::new();
    let mut orbit = MaxResidual::new();
    let mut idempotent = MaxResidual::new();
    for _ in 0..samples {
        let phi = b.sample_covector(&mut rng);
        let p = &phi.point;
        let g = b.sample_group(&mut rng);
        let x = rng::uniform_vec(&mut rng, b.fiber_dim(), 1.0);
        let v = rng::uniform_vec(&mut rng, b.dim(), 1.0);
        reproduces.push((b.alpha(p, &(b.t_kappa_p() * &x)) - &x).amax());
        let lhs = b.alpha(&b.act(p, &g), &(b.t_kappa_g(&g) * &v));
        let rhs = b.group.adjoint_matrix(&b.group.inverse(&g)) * b.alpha(p, &v);
        alpha_equiv.push((lhs - rhs).amax());
        let vb = rng::uniform_vec(&mut rng, b.base_dim(), 1.0);
        horizontal.push(b.alpha(p, &b.horizontal_lift(p, &vb)).amax());
        let chi = rng::uniform_vec(&mut rng, b.fiber_dim(), 1.0);
        let s = b.sigma(&p.base, &chi);
        section.push((b.iota_star(&s).1 - &chi).amax());
        if b.connection.is_flat() {
            flat_base.push(s.covector.rows(0, b.base_dim()).amax());
        }
        let r1 = b.quotient_rep(&phi);
        let r2 = b.quotient_rep(&b.cot_act(&phi, &g));
        orbit.push((r1.covector.clone() - r2.covector).amax());
        let again = b.quotient_rep(&b.lift_class(&r1, &b.group.identity()));
        idempotent.push((again.covector - r1.covector).amax());
    }
    let mut checks = vec![
        reproduces.check("alpha_reproduces_generators", 1e-10),
        alpha_equiv.check("alpha_equivariance", 1e-10),
        horizontal.check("horizontal_lift_in_kernel", 1e-12),
        section.check("sigma_is_section_of_iota_star", 1e-11),
        orbit.check("quotient_rep_orbit_invariant", 1e-11),
        idempotent.check("quotient_rep_idempotent", 1e-14),
    ];
    if b.connection.is_flat() {
        checks.push(flat_base.check("flat_sigma_has_no_base_part", 1e-14));
    }
    SuiteReport::new(format!("bundle.connection:{}", b.name), samples, checks, vec![])
}

/// `a*` pulls the canonical form of `T*P` back to that of `T*(P/G)`.
///
/// The local section `s(m) = (m, g0)` is used with a random fixed `g0`, so the
/// upstairs curve really lives off the identity slice.
pub fn verify_anchor_pullback(b: &BundleSpec, samples: usize, seed: u64) -> SuiteReport {
    let mut rng = rng::stream(seed, "bundle.anchor_pullback");
    let d = b.base_dim();
    let mut res = MaxResidual::new();
    let mut zero = MaxResidual::new();
    for _ in 0..samples {
        let m = b.base.sample(&mut rng);
        let g0 = b.sample_group(&mut rng);
        let rho = rng::uniform_vec(&mut rng, d, 1.0);
        let dm = rng::uniform_vec(&mut rng, d, 0.5);
        let drho = rng::uniform_vec(&mut rng, d, 1.0);
        let h = 1e-6 * (1.0 + rho.amax());
        let mut t_mu = DMatrix::<f64>::zeros(d, b.dim());
        t_mu.view_mut((0, 0), (d, d)).fill_with_identity();
        let up = |t: f64| CotangentSample {
            point: BundlePoint {
                base: b.base.retract(&m, &(&dm * t)),
                fiber: g0.clone(),
            },
            covector: t_mu.transpose() * (&rho + &drho * t),
        };
        let lhs = b.gamma_along(up, h);
        // gamma~ on T*(P/G): <rho, T pi~ X>.
        let fwd = b.base.local_diff(&m, &b.base.retract(&m, &(&dm * h)));
        let bwd = b.base.local_diff(&m, &b.base.retract(&m, &(&dm * -h)));
        match (lhs, fwd, bwd) {
            (Ok(l), Ok(f), Ok(bk)) => {
                let rhs = rho.dot(&((f - bk) / (2.0 * h)));
                res.push((l - rhs).abs());
            }
            _ => res.push(f64::NAN),
        }
        let z = b.gamma_along(
            |t| CotangentSample {
                point: BundlePoint {
                    base: b.base.retract(&m, &(&dm * t)),
                    fiber: g0.clone(),
                },
                covector: DVector::zeros(b.dim()),
            },
            h,
        );
        zero.push(z.map(f64::abs).unwrap_or(f64::NAN));
    }
    let checks = vec![
        res.check("anchor_pullback_of_canonical_form", 1e-9),
        zero.check("zero_covector_pairs_to_zero", 1e-15),
    ];
    SuiteReport::new(format!("bundle.anchor_pullback:{}", b.name), samples, checks, vec![])
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn identity_fiber_momentum_is_fiber_part() {
        let b = BundleSpec::trivial("g", vec![], vec![], crate::liealg::so3(), Connection::Flat).unwrap();
        let phi = CotangentSample {
            point: BundlePoint {
                base: BasePoint::Chart(DVector::zeros(0)),
                fiber: b.group.identity(),
            },
            covector: DVector::from_vec(vec![0.3, -1.0, 2.0]),
        };
        assert_eq!(b.momentum_j(&phi).unwrap(), phi.covector);
    }

    #[test]
    fn invalid_sample_rejected() {
        let b = BundleSpec::so3_over_square();
        let mut rng = rng::stream(1, "t");
        let mut phi = b.sample_covector(&mut rng);
        phi.covector = DVector::zeros(2);
        assert!(b.momentum_j(&phi).is_err());
        let mut phi = b.sample_covector(&mut rng);
        phi.point.base = BasePoint::Chart(DVector::from_vec(vec![5.0, 0.0]));
        assert!(b.momentum_j(&phi).is_err());
    }

    #[test]
    fn suites_pass_on_builtin() {
        let b = BundleSpec::so3_over_square();
        for r in [action_suite(&b, 20, 3), atiyah_exactness(&b, 10, 3), connection_suite(&b, 20, 3), verify_anchor_pullback(&b, 20, 3)] {
            assert!(r.pass, "{r:#?}");
        }
    }
}
