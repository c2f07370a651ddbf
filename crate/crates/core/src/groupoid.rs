//! VB-groupoids over the pair groupoid `P x P => P` of a trivialized bundle, their
//! cores, the duality between `T(P x P)` and `T*P x T*P`, and the short exact
//! sequences
//!
//! ```text
//! P x g x P  --I2-->  TP x TP  --A2-->  (TP x TP)/g
//! T^V0(P x P) --A2*--> T*P x T*P --I2*--> P x g* x P
//! ```
//!
//! An arrow of `P x P` is `(p, q)` with target `p` and source `q`; elements are stored
//! as fiber coordinates over the arrow. The class of `(v, w)` in `(TP x TP)/g` is
//! gauge-fixed by subtracting `T kappa(e) alpha_q(w)` from both entries, which
//! leaves `w` horizontal; its coordinates are `(v, base part of w)`.

use crate::bundle::{BasePoint, BundlePoint, BundleSpec};
use crate::linalg::{self, numeric_rank};
use crate::report::{Check, MaxResidual, RankRow, SuiteReport};
use crate::rng::{self, Stream};
use nalgebra::{DMatrix, DVector};
use serde::Serialize;
use thiserror::Error;

pub const COMPOSABLE_TOL: f64 = 1e-10;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum GroupoidError {
    #[error("elements are not composable (mismatch {0:.3e})")]
    NotComposable(f64),
    #[error("element belongs to {found:?}, expected {expected:?}")]
    WrongSpace { expected: VbSpace, found: VbSpace },
    #[error("dual elements do not match: source/target mismatch {0:.3e}")]
    DualMismatch(f64),
    #[error("unknown sequence '{0}'")]
    UnknownSequence(String),
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
pub enum VbSpace {
    /// `T(P x P) = TP x TP`, coordinates `(v, w)`.
    TangentPair,
    /// `P x g x P`, coordinates `X`; product needs equal `X`.
    TrivialVertical,
    /// `(TP x TP)/g`, coordinates `(v, w_base)` of the gauge-fixed class.
    TangentQuotient,
    /// `T*P x T*P` with source `-psi` and target `phi`.
    CotangentPair,
    /// `T^V0(P x P)`: pairs with `J(phi) + J(psi) = 0`.
    VerticalAnnihilator,
    /// `P x g* x P`, coordinates `X*`; product adds.
    GaugeDual,
}

impl VbSpace {
    pub fn all() -> [VbSpace; 6] {
        [
            VbSpace::TangentPair,
            VbSpace::TrivialVertical,
            VbSpace::TangentQuotient,
            VbSpace::CotangentPair,
            VbSpace::VerticalAnnihilator,
            VbSpace::GaugeDual,
        ]
    }
}

/// Element over the arrow `(target, source)` of `P x P`.
#[derive(Clone, Debug, PartialEq)]
pub struct VbElement {
    pub space: VbSpace,
    pub target: BundlePoint,
    pub source: BundlePoint,
    pub coords: DVector<f64>,
}

/// Element of the side bundle over a point of `P`.
#[derive(Clone, Debug, PartialEq)]
pub struct SideElement {
    pub point: BundlePoint,
    pub v: DVector<f64>,
}

/// Core fiber at a point: basis columns in fiber coordinates over `(p, p)`.
#[derive(Clone, Debug)]
pub struct CoreFiber {
    pub space: VbSpace,
    pub dim: usize,
    pub basis: DMatrix<f64>,
    /// Ratio of the smallest kept to the largest dropped singular value of the source map.
    pub rank_gap: f64,
    pub ambiguous: bool,
}

pub fn point_distance(a: &BundlePoint, b: &BundlePoint) -> f64 {
    let db = match (&a.base, &b.base) {
        (BasePoint::Chart(x), BasePoint::Chart(y)) => (x - y).amax(),
        (BasePoint::Group(x), BasePoint::Group(y)) => (x - y).amax(),
        _ => f64::INFINITY,
    };
    db.max((&a.fiber - &b.fiber).amax())
}

fn unit(n: usize, i: usize) -> DVector<f64> {
    let mut e = DVector::zeros(n);
    e[i] = 1.0;
    e
}

/// A VB-groupoid over the pair groupoid of a bundle.
#[derive(Clone, Debug)]
pub struct VbGroupoid {
    pub space: VbSpace,
    pub bundle: BundleSpec,
}

impl VbGroupoid {
    pub fn new(space: VbSpace, bundle: &BundleSpec) -> Self {
        VbGroupoid {
            space,
            bundle: bundle.clone(),
        }
    }

    fn dp(&self) -> usize {
        self.bundle.dim()
    }

    fn n(&self) -> usize {
        self.bundle.fiber_dim()
    }

    fn d(&self) -> usize {
        self.bundle.base_dim()
    }

    /// Length of the coordinate vector of an element.
    pub fn coord_len(&self) -> usize {
        match self.space {
            VbSpace::TangentPair | VbSpace::CotangentPair | VbSpace::VerticalAnnihilator => 2 * self.dp(),
            VbSpace::TrivialVertical | VbSpace::GaugeDual => self.n(),
            VbSpace::TangentQuotient => self.dp() + self.d(),
        }
    }

    /// Length of the side coordinate vector.
    pub fn side_len(&self) -> usize {
        match self.space {
            VbSpace::TangentPair | VbSpace::CotangentPair | VbSpace::VerticalAnnihilator => self.dp(),
            VbSpace::TrivialVertical => self.n(),
            VbSpace::TangentQuotient => self.d(),
            VbSpace::GaugeDual => 0,
        }
    }

    /// Basis of the fiber over `(p, q)`, as columns in coordinates.
    pub fn fiber_basis(&self, p: &BundlePoint, q: &BundlePoint) -> DMatrix<f64> {
        let _ = (p, q);
        match self.space {
            VbSpace::VerticalAnnihilator => linalg::null_space(&self.j2_matrix()),
            _ => DMatrix::identity(self.coord_len(), self.coord_len()),
        }
    }

    pub fn fiber_dim(&self) -> usize {
        match self.space {
            VbSpace::VerticalAnnihilator => 2 * self.dp() - self.n(),
            _ => self.coord_len(),
        }
    }

    /// `J2(phi, psi) = J(phi) + J(psi)` as a matrix on `(phi, psi)` coordinates.
    pub fn j2_matrix(&self) -> DMatrix<f64> {
        let tk = self.bundle.t_kappa_p().transpose();
        let mut m = DMatrix::zeros(self.n(), 2 * self.dp());
        m.view_mut((0, 0), (self.n(), self.dp())).copy_from(&tk);
        m.view_mut((0, self.dp()), (self.n(), self.dp())).copy_from(&tk);
        m
    }

    fn alpha(&self, p: &BundlePoint, v: &DVector<f64>) -> DVector<f64> {
        self.bundle.alpha(p, v)
    }

    fn vertical(&self, x: &DVector<f64>) -> DVector<f64> {
        self.bundle.t_kappa_p() * x
    }

    /// Horizontal part `v - T kappa(e) alpha(v)`.
    fn horizontal(&self, p: &BundlePoint, v: &DVector<f64>) -> DVector<f64> {
        v - self.vertical(&self.alpha(p, v))
    }

    fn expect(&self, e: &VbElement) -> Result<(), GroupoidError> {
        if e.space != self.space {
            return Err(GroupoidError::WrongSpace {
                expected: self.space,
                found: e.space,
            });
        }
        Ok(())
    }

    fn element(&self, target: &BundlePoint, source: &BundlePoint, coords: DVector<f64>) -> VbElement {
        VbElement {
            space: self.space,
            target: target.clone(),
            source: source.clone(),
            coords,
        }
    }

    /// Gauge-fixed class of `(v, w)` over `(p, q)` in `(TP x TP)/g`.
    pub fn quotient_class(&self, p: &BundlePoint, q: &BundlePoint, v: &DVector<f64>, w: &DVector<f64>) -> VbElement {
        let x = self.alpha(q, w);
        let vv = v - self.vertical(&x);
        let d = self.d();
        let coords = linalg::concat(&[&vv, &w.rows(0, d).into_owned()]);
        VbElement {
            space: VbSpace::TangentQuotient,
            target: p.clone(),
            source: q.clone(),
            coords,
        }
    }

    /// Representative `(v, w)` of a quotient class, with `w` horizontal.
    pub fn quotient_rep(&self, e: &VbElement) -> (DVector<f64>, DVector<f64>) {
        let (dp, d) = (self.dp(), self.d());
        let v = e.coords.rows(0, dp).into_owned();
        let w = self.bundle.horizontal_lift(&e.source, &e.coords.rows(dp, d).into_owned());
        (v, w)
    }

    fn halves(&self, e: &VbElement) -> (DVector<f64>, DVector<f64>) {
        let dp = self.dp();
        (e.coords.rows(0, dp).into_owned(), e.coords.rows(dp, dp).into_owned())
    }

    pub fn source(&self, e: &VbElement) -> Result<SideElement, GroupoidError> {
        self.expect(e)?;
        let v = match self.space {
            VbSpace::TangentPair => self.halves(e).1,
            VbSpace::CotangentPair | VbSpace::VerticalAnnihilator => -self.halves(e).1,
            VbSpace::TrivialVertical => e.coords.clone(),
            VbSpace::TangentQuotient => e.coords.rows(self.dp(), self.d()).into_owned(),
            VbSpace::GaugeDual => DVector::zeros(0),
        };
        Ok(SideElement {
            point: e.source.clone(),
            v,
        })
    }

    pub fn target(&self, e: &VbElement) -> Result<SideElement, GroupoidError> {
        self.expect(e)?;
        let v = match self.space {
            VbSpace::TangentPair | VbSpace::CotangentPair | VbSpace::VerticalAnnihilator => self.halves(e).0,
            VbSpace::TrivialVertical => e.coords.clone(),
            VbSpace::TangentQuotient => {
                let v = e.coords.rows(0, self.dp()).into_owned();
                self.horizontal(&e.target, &v).rows(0, self.d()).into_owned()
            }
            VbSpace::GaugeDual => DVector::zeros(0),
        };
        Ok(SideElement {
            point: e.target.clone(),
            v,
        })
    }

    pub fn identity(&self, b: &SideElement) -> VbElement {
        let p = &b.point;
        let coords = match self.space {
            VbSpace::TangentPair => linalg::concat(&[&b.v, &b.v]),
            VbSpace::CotangentPair | VbSpace::VerticalAnnihilator => linalg::concat(&[&b.v, &(-&b.v)]),
            VbSpace::TrivialVertical => b.v.clone(),
            VbSpace::TangentQuotient => {
                let h = self.bundle.horizontal_lift(p, &b.v);
                linalg::concat(&[&h, &b.v])
            }
            VbSpace::GaugeDual => DVector::zeros(self.n()),
        };
        self.element(p, p, coords)
    }

    pub fn inverse(&self, e: &VbElement) -> Result<VbElement, GroupoidError> {
        self.expect(e)?;
        Ok(match self.space {
            VbSpace::TangentPair => {
                let (v, w) = self.halves(e);
                self.element(&e.source, &e.target, linalg::concat(&[&w, &v]))
            }
            VbSpace::CotangentPair | VbSpace::VerticalAnnihilator => {
                let (phi, psi) = self.halves(e);
                self.element(&e.source, &e.target, linalg::concat(&[&(-psi), &(-phi)]))
            }
            VbSpace::TrivialVertical => self.element(&e.source, &e.target, e.coords.clone()),
            VbSpace::GaugeDual => self.element(&e.source, &e.target, -&e.coords),
            VbSpace::TangentQuotient => {
                let (v, w) = self.quotient_rep(e);
                self.quotient_class(&e.source, &e.target, &w, &v)
            }
        })
    }

    /// Product `a b`, defined when `source(a) = target(b)` to within [`COMPOSABLE_TOL`];
    /// the shared data of `a` is used.
    pub fn product(&self, a: &VbElement, b: &VbElement) -> Result<VbElement, GroupoidError> {
        self.expect(a)?;
        self.expect(b)?;
        let sa = self.source(a)?;
        let tb = self.target(b)?;
        let gap = point_distance(&sa.point, &tb.point).max(if sa.v.is_empty() { 0.0 } else { (&sa.v - &tb.v).amax() });
        if gap.is_nan() || gap > COMPOSABLE_TOL {
            return Err(GroupoidError::NotComposable(gap));
        }
        let (p, r) = (&a.target, &b.source);
        Ok(match self.space {
            VbSpace::TangentPair | VbSpace::CotangentPair | VbSpace::VerticalAnnihilator => {
                let (x, _) = self.halves(a);
                let (_, z) = self.halves(b);
                self.element(p, r, linalg::concat(&[&x, &z]))
            }
            VbSpace::TrivialVertical => self.element(p, r, a.coords.clone()),
            VbSpace::GaugeDual => self.element(p, r, &a.coords + &b.coords),
            VbSpace::TangentQuotient => {
                let (va, _) = self.quotient_rep(a);
                let (vb, ub) = self.quotient_rep(b);
                // Shift b by -Y so its first entry equals the horizontal w of a.
                let y = self.alpha(&b.target, &vb);
                self.quotient_class(p, r, &va, &(ub - self.vertical(&y)))
            }
        })
    }

    pub fn add(&self, a: &VbElement, b: &VbElement) -> Result<VbElement, GroupoidError> {
        let gap = point_distance(&a.target, &b.target).max(point_distance(&a.source, &b.source));
        if gap > COMPOSABLE_TOL {
            return Err(GroupoidError::NotComposable(gap));
        }
        Ok(self.element(&a.target, &a.source, &a.coords + &b.coords))
    }

    pub fn scale(&self, a: &VbElement, s: f64) -> VbElement {
        self.element(&a.target, &a.source, &a.coords * s)
    }

    pub fn zero(&self, p: &BundlePoint, q: &BundlePoint) -> VbElement {
        self.element(p, q, DVector::zeros(self.coord_len()))
    }

    pub fn side_add(&self, a: &SideElement, b: &SideElement) -> SideElement {
        SideElement {
            point: a.point.clone(),
            v: &a.v + &b.v,
        }
    }

    /// Random element over `(p, q)`.
    pub fn sample_over(&self, rng: &mut Stream, p: &BundlePoint, q: &BundlePoint) -> VbElement {
        let c = rng::uniform_vec(rng, self.coord_len(), 1.0);
        match self.space {
            VbSpace::VerticalAnnihilator => {
                let basis = self.fiber_basis(p, q);
                let k = rng::uniform_vec(rng, basis.ncols(), 1.0);
                self.element(p, q, basis * k)
            }
            VbSpace::TangentQuotient => {
                let dp = self.dp();
                self.quotient_class(p, q, &c.rows(0, dp).into_owned(), &rng::uniform_vec(rng, dp, 1.0))
            }
            _ => self.element(p, q, c),
        }
    }

    /// Random element over `(p, r)` whose target is `b` (with `b.point = p`).
    pub fn sample_with_target(&self, rng: &mut Stream, b: &SideElement, r: &BundlePoint) -> VbElement {
        let p = &b.point;
        let dp = self.dp();
        match self.space {
            VbSpace::TangentPair => self.element(p, r, linalg::concat(&[&b.v, &rng::uniform_vec(rng, dp, 1.0)])),
            VbSpace::CotangentPair => self.element(p, r, linalg::concat(&[&b.v, &rng::uniform_vec(rng, dp, 1.0)])),
            VbSpace::VerticalAnnihilator => {
                let mut psi = rng::uniform_vec(rng, dp, 1.0);
                let j = self.j2_matrix() * linalg::concat(&[&b.v, &psi]);
                let d = self.d();
                let mut tail = psi.rows_mut(d, self.n());
                tail -= j;
                self.element(p, r, linalg::concat(&[&b.v, &psi]))
            }
            VbSpace::TrivialVertical => self.element(p, r, b.v.clone()),
            VbSpace::GaugeDual => self.element(p, r, rng::uniform_vec(rng, self.n(), 1.0)),
            VbSpace::TangentQuotient => {
                let h = self.bundle.horizontal_lift(p, &b.v);
                let v = h + self.vertical(&rng::uniform_vec(rng, self.n(), 1.0));
                self.quotient_class(p, r, &v, &rng::uniform_vec(rng, dp, 1.0))
            }
        }
    }

    pub fn sample_side(&self, rng: &mut Stream, p: &BundlePoint) -> SideElement {
        SideElement {
            point: p.clone(),
            v: rng::uniform_vec(rng, self.side_len(), 1.0),
        }
    }

    /// Action of `g` by `(p, q) -> (pg, qg)` with the induced linear maps on fibers.
    pub fn act(&self, e: &VbElement, g: &DMatrix<f64>) -> VbElement {
        let b = &self.bundle;
        let (p, q) = (b.act(&e.target, g), b.act(&e.source, g));
        let coords = match self.space {
            VbSpace::TangentPair => {
                let (v, w) = self.halves(e);
                let t = b.t_kappa_g(g);
                linalg::concat(&[&(&t * v), &(&t * w)])
            }
            VbSpace::CotangentPair | VbSpace::VerticalAnnihilator => {
                let (v, w) = self.halves(e);
                let t = b.t_star_kappa_g(g);
                linalg::concat(&[&(&t * v), &(&t * w)])
            }
            VbSpace::TrivialVertical => b.group.adjoint_matrix(&b.group.inverse(g)) * &e.coords,
            VbSpace::GaugeDual => b.group.coadjoint_matrix(&b.group.inverse(g)) * &e.coords,
            VbSpace::TangentQuotient => {
                let (v, w) = self.quotient_rep(e);
                let t = b.t_kappa_g(g);
                return self.quotient_class(&p, &q, &(&t * v), &(&t * w));
            }
        };
        self.element(&p, &q, coords)
    }

    /// Matrix of the source map on the fiber over `(p, p)`, in fiber-basis coordinates.
    fn source_matrix(&self, p: &BundlePoint) -> DMatrix<f64> {
        let basis = self.fiber_basis(p, p);
        let cols: Vec<DVector<f64>> = basis
            .column_iter()
            .map(|c| self.source(&self.element(p, p, c.into_owned())).expect("same space").v)
            .collect();
        if self.side_len() == 0 {
            return DMatrix::zeros(0, basis.ncols());
        }
        DMatrix::from_columns(&cols)
    }

    /// Core at `p`: the kernel of the source map on the fiber over the identity arrow.
    pub fn core_compute(&self, p: &BundlePoint) -> CoreFiber {
        let basis = self.fiber_basis(p, p);
        let s = self.source_matrix(p);
        let (ker, gap) = if s.nrows() == 0 {
            (DMatrix::identity(basis.ncols(), basis.ncols()), f64::INFINITY)
        } else {
            (linalg::null_space(&s), linalg::rank_gap(&s))
        };
        let core = &basis * ker;
        CoreFiber {
            space: self.space,
            dim: core.ncols(),
            basis: core,
            rank_gap: gap,
            ambiguous: gap < 1e4,
        }
    }

    /// Sample a random arrow `(p, q)`.
    pub fn sample_arrow(&self, rng: &mut Stream) -> (BundlePoint, BundlePoint) {
        (self.bundle.sample_point(rng), self.bundle.sample_point(rng))
    }
}

/// Distance between two elements over the same arrow.
pub fn element_distance(a: &VbElement, b: &VbElement) -> f64 {
    if a.space != b.space {
        return f64::INFINITY;
    }
    point_distance(&a.target, &b.target)
        .max(point_distance(&a.source, &b.source))
        .max((&a.coords - &b.coords).amax())
}

/// Interchange law, side identities and groupoid axioms on random samples.
pub fn vb_axiom_suite(g: &VbGroupoid, samples: usize, seed: u64) -> SuiteReport {
    let mut rng = rng::stream(seed, "groupoid.vb_axioms");
    let mut interchange = MaxResidual::new();
    let mut unit_add = MaxResidual::new();
    let mut inv_add = MaxResidual::new();
    let mut zero_mul = MaxResidual::new();
    let mut zero_inv = MaxResidual::new();
    let mut neg_mul = MaxResidual::new();
    let mut s_eps = MaxResidual::new();
    let mut assoc = MaxResidual::new();
    let mut involution = MaxResidual::new();
    let mut unit_law = MaxResidual::new();
    let mut inv_law = MaxResidual::new();
    let mut zeros = MaxResidual::new();
    let dist = |a: Result<VbElement, GroupoidError>, b: Result<VbElement, GroupoidError>| match (a, b) {
        (Ok(a), Ok(b)) => element_distance(&a, &b),
        _ => f64::NAN,
    };
    for _ in 0..samples {
        let (p, q) = g.sample_arrow(&mut rng);
        let r = g.bundle.sample_point(&mut rng);
        let s = g.bundle.sample_point(&mut rng);
        let xi1 = g.sample_over(&mut rng, &p, &q);
        let xi2 = g.sample_over(&mut rng, &p, &q);
        let eta1 = g.sample_with_target(&mut rng, &g.source(&xi1).unwrap(), &r);
        let eta2 = g.sample_with_target(&mut rng, &g.source(&xi2).unwrap(), &r);
        let lhs = g.product(&g.add(&xi1, &xi2).unwrap(), &g.add(&eta1, &eta2).unwrap());
        let rhs = g.product(&xi1, &eta1).and_then(|a| g.add(&a, &g.product(&xi2, &eta2)?));
        interchange.push(dist(lhs, rhs));

        let b1 = g.sample_side(&mut rng, &p);
        let b2 = g.sample_side(&mut rng, &p);
        unit_add.push(dist(Ok(g.identity(&g.side_add(&b1, &b2))), g.add(&g.identity(&b1), &g.identity(&b2))));
        inv_add.push(dist(
            g.inverse(&g.add(&xi1, &xi2).unwrap()),
            g.inverse(&xi1).and_then(|a| g.add(&a, &g.inverse(&xi2)?)),
        ));
        zero_mul.push(dist(Ok(g.zero(&p, &r)), g.product(&g.zero(&p, &q), &g.zero(&q, &r))));
        zero_inv.push(dist(Ok(g.zero(&q, &p)), g.inverse(&g.zero(&p, &q))));
        neg_mul.push(dist(
            g.product(&g.scale(&xi1, -1.0), &g.scale(&eta1, -1.0)),
            g.product(&xi1, &eta1).map(|x| g.scale(&x, -1.0)),
        ));
        let sb = g.source(&g.identity(&b1)).unwrap();
        let tb = g.target(&g.identity(&b1)).unwrap();
        s_eps.push((&sb.v - &b1.v).amax().max((&tb.v - &b1.v).amax()));
        let zeta = g.sample_with_target(&mut rng, &g.source(&eta1).unwrap(), &s);
        assoc.push(dist(
            g.product(&xi1, &eta1).and_then(|a| g.product(&a, &zeta)),
            g.product(&eta1, &zeta).and_then(|b| g.product(&xi1, &b)),
        ));
        involution.push(dist(g.inverse(&xi1).and_then(|x| g.inverse(&x)), Ok(xi1.clone())));
        let tx = g.target(&xi1).unwrap();
        let sx = g.source(&xi1).unwrap();
        unit_law.push(dist(g.product(&g.identity(&tx), &xi1), Ok(xi1.clone())).max(dist(g.product(&xi1, &g.identity(&sx)), Ok(xi1.clone()))));
        inv_law.push(dist(g.inverse(&xi1).and_then(|x| g.product(&xi1, &x)), Ok(g.identity(&tx))));
        let z = g.zero(&p, &q);
        zeros.push(dist(g.product(&z, &g.identity(&g.source(&z).unwrap())), Ok(z.clone())));
    }
    let checks = vec![
        interchange.check("interchange_law", 1e-11),
        unit_add.check("identity_is_additive", 1e-11),
        inv_add.check("inverse_is_additive", 1e-11),
        zero_mul.check("zero_section_multiplicative", 1e-11),
        zero_inv.check("zero_section_inverse", 1e-11),
        neg_mul.check("negation_multiplicative", 1e-11),
        s_eps.check("source_target_of_identity", 1e-11),
        assoc.check("associativity", 1e-11),
        involution.check("inverse_involution", 1e-11),
        unit_law.check("unit_laws", 1e-11),
        inv_law.check("inverse_law", 1e-11),
        zeros.check("zero_times_identity", 1e-11),
    ];
    SuiteReport::new(format!("groupoid.vb_axioms:{:?}", g.space), samples, checks, vec![])
}

/// `delta(phi, psi) = (phi, -psi)`.
pub fn delta(e: &VbElement, dp: usize) -> VbElement {
    let mut c = e.coords.clone();
    let mut tail = c.rows_mut(dp, dp);
    tail *= -1.0;
    VbElement { coords: c, ..e.clone() }
}

/// Standard pair-groupoid structure on `T*P x T*P`: `s(a, b) = b`, `(a, b)(b, c) = (a, c)`.
pub fn standard_pair_product(a: &VbElement, b: &VbElement, dp: usize) -> Result<VbElement, GroupoidError> {
    let gap = (a.coords.rows(dp, dp) - b.coords.rows(0, dp)).amax().max(point_distance(&a.source, &b.target));
    if gap > COMPOSABLE_TOL {
        return Err(GroupoidError::NotComposable(gap));
    }
    Ok(VbElement {
        space: a.space,
        target: a.target.clone(),
        source: b.source.clone(),
        coords: linalg::concat(&[&a.coords.rows(0, dp).into_owned(), &b.coords.rows(dp, dp).into_owned()]),
    })
}

/// Structure maps of the cotangent pair groupoid and the involution `delta`.
pub fn cotangent_pair_suite(b: &BundleSpec, samples: usize, seed: u64) -> SuiteReport {
    let g = VbGroupoid::new(VbSpace::CotangentPair, b);
    let dp = b.dim();
    let mut rng = rng::stream(seed, "groupoid.cotangent_pair");
    let mut eps = MaxResidual::new();
    let mut eps_inv = MaxResidual::new();
    let mut delta_mul = MaxResidual::new();
    let mut delta_src = MaxResidual::new();
    let mut rejects = true;
    for _ in 0..samples {
        let (p, q) = g.sample_arrow(&mut rng);
        let r = b.sample_point(&mut rng);
        let phi = g.sample_side(&mut rng, &p);
        let e = g.identity(&phi);
        eps.push((g.source(&e).unwrap().v - &phi.v).amax().max((g.target(&e).unwrap().v - &phi.v).amax()));
        let prod = g.product(&e, &g.inverse(&e).unwrap()).unwrap();
        eps_inv.push(element_distance(&prod, &e));
        let x = g.sample_over(&mut rng, &p, &q);
        let y = g.sample_with_target(&mut rng, &g.source(&x).unwrap(), &r);
        let lhs = delta(&g.product(&x, &y).unwrap(), dp);
        let rhs = standard_pair_product(&delta(&x, dp), &delta(&y, dp), dp);
        delta_mul.push(rhs.map(|r| element_distance(&lhs, &r)).unwrap_or(f64::NAN));
        delta_src.push((delta(&x, dp).coords.rows(dp, dp) - g.source(&x).unwrap().v).amax());
        let mut bad = y.clone();
        bad.coords[0] += 1e-3;
        rejects &= matches!(g.product(&x, &bad), Err(GroupoidError::NotComposable(_)));
    }
    let checks = vec![
        eps.check("source_target_of_identity", 1e-14),
        eps_inv.check("identity_times_inverse", 1e-14),
        delta_mul.check("delta_is_groupoid_isomorphism", 1e-14),
        delta_src.check("delta_intertwines_source", 1e-14),
        Check::exact("non_composable_rejected", samples, rejects),
    ];
    SuiteReport::new(format!("groupoid.cotangent_pair:{}", b.name), samples, checks, vec![])
}

/// Pairing of `T*P x T*P` with `T(P x P)` over the same arrow: `phi(v) + psi(w)`.
pub fn pair(phi: &VbElement, xi: &VbElement) -> f64 {
    phi.coords.dot(&xi.coords)
}

/// Duality of `Omega = T(P x P)`, computed from pairings and the groupoid
/// operations of `Omega` only.
#[derive(Clone, Debug)]
pub struct TangentDual {
    pub omega: VbGroupoid,
}

impl TangentDual {
    pub fn new(b: &BundleSpec) -> Self {
        TangentDual {
            omega: VbGroupoid::new(VbSpace::TangentPair, b),
        }
    }

    fn dp(&self) -> usize {
        self.omega.bundle.dim()
    }

    /// Core element `(k, 0)` over `(p, p)`.
    fn core_element(&self, p: &BundlePoint, k: &DVector<f64>) -> VbElement {
        let o = &self.omega;
        let core = o.core_compute(p);
        let coords = &core.basis * (core.basis.transpose() * linalg::concat(&[k, &DVector::zeros(self.dp())]));
        VbElement {
            space: VbSpace::TangentPair,
            target: p.clone(),
            source: p.clone(),
            coords,
        }
    }

    /// `<beta*(Phi), k> = <Phi, k 0_gamma>` on the core basis at the target.
    pub fn dual_target(&self, phi: &VbElement) -> DVector<f64> {
        let o = &self.omega;
        let zero = o.zero(&phi.target, &phi.source);
        DVector::from_fn(self.dp(), |i, _| {
            let k = self.core_element(&phi.target, &unit(self.dp(), i));
            pair(phi, &o.product(&k, &zero).expect("core composes with zero"))
        })
    }

    /// `<alpha*(Phi), k> = <Phi, -0_gamma k^-1>` on the core basis at the source.
    pub fn dual_source(&self, phi: &VbElement) -> DVector<f64> {
        let o = &self.omega;
        let zero = o.zero(&phi.target, &phi.source);
        DVector::from_fn(self.dp(), |i, _| {
            let k = self.core_element(&phi.source, &unit(self.dp(), i));
            let x = o.product(&zero, &o.inverse(&k).unwrap()).expect("zero composes with core");
            pair(phi, &o.scale(&x, -1.0))
        })
    }

    /// `<Psi Phi, eta xi> = <Psi, eta> + <Phi, xi>` with the factorization of each
    /// basis element `(x, y)` of the composite fiber through `(x, z)(z, y)`, then
    /// modified by `tau = (a, z)`.
    pub fn dual_compose_with(&self, psi: &VbElement, phi: &VbElement, z: &DVector<f64>, a: &DVector<f64>) -> Result<VbElement, GroupoidError> {
        let o = &self.omega;
        let mismatch = (self.dual_source(psi) - self.dual_target(phi)).amax().max(point_distance(&psi.source, &phi.target));
        if mismatch > COMPOSABLE_TOL {
            return Err(GroupoidError::DualMismatch(mismatch));
        }
        let dp = self.dp();
        let (r, q, p) = (&psi.target, &psi.source, &phi.source);
        let tau = VbElement {
            space: VbSpace::TangentPair,
            target: q.clone(),
            source: q.clone(),
            coords: linalg::concat(&[a, z]),
        };
        let tau_inv = o.inverse(&tau)?;
        let coords = DVector::from_fn(2 * dp, |i, _| {
            let e = unit(2 * dp, i);
            let (x, y) = (e.rows(0, dp).into_owned(), e.rows(dp, dp).into_owned());
            let eta = VbElement {
                space: VbSpace::TangentPair,
                target: r.clone(),
                source: q.clone(),
                coords: linalg::concat(&[&x, z]),
            };
            let xi = VbElement {
                space: VbSpace::TangentPair,
                target: q.clone(),
                source: p.clone(),
                coords: linalg::concat(&[z, &y]),
            };
            let eta2 = o.product(&eta, &tau_inv).expect("tau factorization");
            let xi2 = o.product(&tau, &xi).expect("tau factorization");
            pair(psi, &eta2) + pair(phi, &xi2)
        });
        Ok(VbElement {
            space: VbSpace::CotangentPair,
            target: r.clone(),
            source: p.clone(),
            coords,
        })
    }

    pub fn dual_compose(&self, psi: &VbElement, phi: &VbElement) -> Result<VbElement, GroupoidError> {
        let z = DVector::zeros(self.dp());
        self.dual_compose_with(psi, phi, &z, &z)
    }

    /// `<1_chi, 1_b + k> = <chi, k>` with `b` the source of the paired element.
    pub fn dual_identity(&self, p: &BundlePoint, chi: &DVector<f64>) -> VbElement {
        let o = &self.omega;
        let dp = self.dp();
        let coords = DVector::from_fn(2 * dp, |i, _| {
            let xi = VbElement {
                space: VbSpace::TangentPair,
                target: p.clone(),
                source: p.clone(),
                coords: unit(2 * dp, i),
            };
            let b = o.source(&xi).unwrap();
            let k = &xi.coords - o.identity(&b).coords;
            chi.dot(&k.rows(0, dp))
        });
        VbElement {
            space: VbSpace::CotangentPair,
            target: p.clone(),
            source: p.clone(),
            coords,
        }
    }

    /// `<omega_bar, 1_b + k> = <omega, b + beta(k)>`.
    pub fn core_embedding(&self, p: &BundlePoint, omega: &DVector<f64>) -> VbElement {
        let o = &self.omega;
        let dp = self.dp();
        let coords = DVector::from_fn(2 * dp, |i, _| {
            let xi = VbElement {
                space: VbSpace::TangentPair,
                target: p.clone(),
                source: p.clone(),
                coords: unit(2 * dp, i),
            };
            let b = o.source(&xi).unwrap();
            let k = VbElement {
                coords: &xi.coords - o.identity(&b).coords,
                ..xi.clone()
            };
            let beta_k = o.target(&k).unwrap().v;
            omega.dot(&(&b.v + beta_k))
        });
        VbElement {
            space: VbSpace::CotangentPair,
            target: p.clone(),
            source: p.clone(),
            coords,
        }
    }
}

/// Factorization independence of the dual product and agreement of the dual
/// structure with the cotangent pair groupoid.
pub fn dual_structure_suite(b: &BundleSpec, samples: usize, taus: usize, seed: u64) -> SuiteReport {
    let dual = TangentDual::new(b);
    let cot = VbGroupoid::new(VbSpace::CotangentPair, b);
    let dp = b.dim();
    let mut rng = rng::stream(seed, "groupoid.dual");
    let mut factor = MaxResidual::new();
    let mut src = MaxResidual::new();
    let mut tgt = MaxResidual::new();
    let mut prod = MaxResidual::new();
    let mut ident = MaxResidual::new();
    let mut core_emb = MaxResidual::new();
    let mut zero = MaxResidual::new();
    let mut mismatch_rejected = true;
    for _ in 0..samples {
        let (p, q) = cot.sample_arrow(&mut rng);
        let r = b.sample_point(&mut rng);
        // Phi over (q, p), Psi over (r, q) with alpha*(Psi) = beta*(Phi).
        let phi = cot.sample_over(&mut rng, &q, &p);
        let top = rng::uniform_vec(&mut rng, dp, 1.0);
        let psi = cot.sample_with_target(&mut rng, &SideElement { point: r.clone(), v: top }, &q);
        let psi = VbElement {
            coords: linalg::concat(&[&psi.coords.rows(0, dp).into_owned(), &(-phi.coords.rows(0, dp).into_owned())]),
            ..psi
        };
        src.push((dual.dual_source(&phi) - cot.source(&phi).unwrap().v).amax());
        tgt.push((dual.dual_target(&phi) - cot.target(&phi).unwrap().v).amax());
        let base = dual.dual_compose(&psi, &phi).unwrap();
        let expected = cot.product(&psi, &phi).unwrap();
        prod.push((&base.coords - &expected.coords).amax());
        for _ in 0..taus {
            let z = rng::uniform_vec(&mut rng, dp, 1.0);
            let a = rng::uniform_vec(&mut rng, dp, 1.0);
            let other = dual.dual_compose_with(&psi, &phi, &z, &a).unwrap();
            factor.push((&other.coords - &base.coords).amax());
        }
        let chi = rng::uniform_vec(&mut rng, dp, 1.0);
        let one = dual.dual_identity(&p, &chi);
        ident.push((one.coords - cot.identity(&SideElement { point: p.clone(), v: chi.clone() }).coords).amax());
        let emb = dual.core_embedding(&p, &chi);
        core_emb.push((emb.coords - linalg::concat(&[&chi, &DVector::zeros(dp)])).amax());
        let z = cot.zero(&q, &p);
        zero.push(dual.dual_source(&z).amax().max(dual.dual_target(&z).amax()));
        let mut bad = psi.clone();
        bad.coords[dp] += 1e-3;
        mismatch_rejected &= matches!(dual.dual_compose(&bad, &phi), Err(GroupoidError::DualMismatch(_)));
    }
    let checks = vec![
        factor.check("factorization_independence", 1e-11),
        src.check("dual_source_matches_cotangent", 1e-10),
        tgt.check("dual_target_matches_cotangent", 1e-10),
        prod.check("dual_product_matches_cotangent", 1e-10),
        ident.check("dual_identity_matches_cotangent", 1e-10),
        core_emb.check("core_embedding_is_phi_zero", 1e-10),
        zero.check("zero_covector_has_zero_ends", 0.0),
        Check::exact("dual_mismatch_rejected", samples, mismatch_rejected),
    ];
    SuiteReport::new(format!("groupoid.dual_structure:{}", b.name), samples, checks, vec![])
}

/// Core dimension report for JSON output.
#[derive(Clone, Debug, Serialize, PartialEq)]
pub struct CoreDims {
    pub space: VbSpace,
    pub dim: usize,
    pub expected: usize,
}

/// Expected core dimension of each space.
pub fn expected_core_dim(space: VbSpace, b: &BundleSpec) -> usize {
    match space {
        VbSpace::TangentPair | VbSpace::TangentQuotient | VbSpace::CotangentPair => b.dim(),
        VbSpace::TrivialVertical => 0,
        VbSpace::VerticalAnnihilator => b.base_dim(),
        VbSpace::GaugeDual => b.fiber_dim(),
    }
}

/// Core dimensions at random points and the alternating sums along both sequences.
pub fn core_suite(b: &BundleSpec, fibers: usize, seed: u64) -> SuiteReport {
    let mut rng = rng::stream(seed, "groupoid.cores");
    let mut ok = true;
    let mut alt = true;
    let mut cores_are_core = MaxResidual::new();
    let mut ambiguous = false;
    let mut table = Vec::new();
    for f in 0..fibers {
        let p = b.sample_point(&mut rng);
        let mut dims = std::collections::BTreeMap::new();
        for space in VbSpace::all() {
            let g = VbGroupoid::new(space, b);
            let c = g.core_compute(&p);
            ambiguous |= c.ambiguous;
            let exp = expected_core_dim(space, b);
            ok &= c.dim == exp;
            dims.insert(format!("{space:?}"), c.dim as i64);
            // Core elements project to an identity arrow and have zero source.
            for col in c.basis.column_iter() {
                let e = VbElement {
                    space,
                    target: p.clone(),
                    source: p.clone(),
                    coords: col.into_owned(),
                };
                cores_are_core.push(g.source(&e).map(|s| if s.v.is_empty() { 0.0 } else { s.v.amax() }).unwrap_or(f64::NAN));
            }
            if f == 0 {
                let basis = g.fiber_basis(&p, &p);
                table.push(RankRow {
                    map: format!("core:{space:?}"),
                    rows: basis.ncols(),
                    cols: c.dim,
                    rank: c.dim,
                    expected: exp,
                });
            }
        }
        alt &= dims["TrivialVertical"] - dims["TangentPair"] + dims["TangentQuotient"] == 0;
        alt &= dims["VerticalAnnihilator"] - dims["CotangentPair"] + dims["GaugeDual"] == 0;
    }
    let checks = vec![
        Check::exact("core_dims_match", fibers, ok),
        Check::exact("core_alternating_sums_vanish", fibers, alt),
        Check::exact("core_rank_unambiguous", fibers, !ambiguous),
        cores_are_core.check("core_elements_have_zero_source", 1e-12),
    ];
    SuiteReport::new(format!("groupoid.cores:{}", b.name), fibers, checks, table)
}

/// `I2(p, X, q) = (T kappa_p(e) X, T kappa_q(e) X)`.
pub fn i2(b: &BundleSpec, e: &VbElement) -> VbElement {
    let t = b.t_kappa_p();
    VbElement {
        space: VbSpace::TangentPair,
        target: e.target.clone(),
        source: e.source.clone(),
        coords: linalg::concat(&[&(&t * &e.coords), &(&t * &e.coords)]),
    }
}

/// `A2`: class of `(v, w)` in `(TP x TP)/g`.
pub fn a2(b: &BundleSpec, e: &VbElement) -> VbElement {
    let q = VbGroupoid::new(VbSpace::TangentQuotient, b);
    let dp = b.dim();
    q.quotient_class(&e.target, &e.source, &e.coords.rows(0, dp).into_owned(), &e.coords.rows(dp, dp).into_owned())
}

/// `I2*(phi, psi) = (p, J2(phi, psi), q)`.
pub fn i2_star(b: &BundleSpec, e: &VbElement) -> VbElement {
    let g = VbGroupoid::new(VbSpace::CotangentPair, b);
    VbElement {
        space: VbSpace::GaugeDual,
        target: e.target.clone(),
        source: e.source.clone(),
        coords: g.j2_matrix() * &e.coords,
    }
}

/// Groupoid laws of `P x g* x P` and the morphism property of `I2*`.
pub fn gauge_dual_suite(b: &BundleSpec, samples: usize, seed: u64) -> SuiteReport {
    let gd = VbGroupoid::new(VbSpace::GaugeDual, b);
    let cot = VbGroupoid::new(VbSpace::CotangentPair, b);
    let ann = VbGroupoid::new(VbSpace::VerticalAnnihilator, b);
    let mut rng = rng::stream(seed, "groupoid.gauge_dual");
    let mut inv = MaxResidual::new();
    let mut morph = MaxResidual::new();
    let mut morph_ends = MaxResidual::new();
    let mut ann_kernel = MaxResidual::new();
    let mut kernel_is_ann = true;
    let mut equiv = MaxResidual::new();
    for _ in 0..samples {
        let (p, q) = gd.sample_arrow(&mut rng);
        let r = b.sample_point(&mut rng);
        let x = gd.sample_over(&mut rng, &p, &q);
        let y = gd.product(&x, &gd.inverse(&x).unwrap()).unwrap();
        inv.push(element_distance(&y, &gd.identity(&SideElement { point: p.clone(), v: DVector::zeros(0) })));
        let a = cot.sample_over(&mut rng, &p, &q);
        let c = cot.sample_with_target(&mut rng, &cot.source(&a).unwrap(), &r);
        let lhs = i2_star(b, &cot.product(&a, &c).unwrap());
        let rhs = gd.product(&i2_star(b, &a), &i2_star(b, &c)).unwrap();
        morph.push(element_distance(&lhs, &rhs));
        morph_ends.push(point_distance(&i2_star(b, &a).target, &a.target).max(point_distance(&i2_star(b, &a).source, &a.source)));
        let z = ann.sample_over(&mut rng, &p, &q);
        ann_kernel.push(i2_star(b, &z).coords.amax());
        // J2 = 0 exactly on the annihilator: its kernel has the annihilator's dimension.
        kernel_is_ann &= linalg::null_space(&cot.j2_matrix()).ncols() == ann.fiber_dim();
        let g = b.sample_group(&mut rng);
        let moved = i2_star(b, &cot.act(&a, &g));
        let expected = gd.act(&i2_star(b, &a), &g);
        equiv.push(element_distance(&moved, &expected));
    }
    let checks = vec![
        inv.check("inverse_law", 1e-14),
        morph.check("i2_star_is_morphism", 1e-11),
        morph_ends.check("i2_star_preserves_base_arrow", 0.0),
        ann_kernel.check("annihilator_has_zero_j2", 1e-12),
        Check::exact("kernel_of_j2_is_annihilator", samples, kernel_is_ann),
        equiv.check("i2_star_equivariant", 1e-10),
    ];
    SuiteReport::new(format!("groupoid.gauge_dual:{}", b.name), samples, checks, vec![])
}

fn matrix_of(f: impl Fn(&DVector<f64>) -> DVector<f64>, n: usize) -> DMatrix<f64> {
    let cols: Vec<DVector<f64>> = (0..n).map(|i| f(&unit(n, i))).collect();
    if cols.is_empty() || cols[0].is_empty() {
        return DMatrix::zeros(cols.first().map_or(0, |c| c.len()), n);
    }
    DMatrix::from_columns(&cols)
}

struct Exactness {
    composite: f64,
    kernel: f64,
    ok: bool,
    rows: Vec<RankRow>,
}

/// Exactness of `0 -> U --f--> V --h--> W -> 0` from the matrices of `f` and `h`.
fn exactness(name_f: &str, name_h: &str, f: &DMatrix<f64>, h: &DMatrix<f64>) -> Exactness {
    let (u, v, w) = (f.ncols(), f.nrows(), h.nrows());
    let rf = numeric_rank(f);
    let rh = numeric_rank(h);
    let composite = if u == 0 || w == 0 { 0.0 } else { linalg::max_abs_mat(&(h * f)) };
    let ker = linalg::null_space(h);
    let kernel = if u == 0 {
        0.0
    } else {
        let proj = &ker * ker.transpose();
        linalg::max_abs_mat(&(&proj * f - f))
    };
    Exactness {
        composite,
        kernel,
        ok: rf == u && rh == w && ker.ncols() == u && u + w == v,
        rows: vec![
            RankRow { map: name_f.into(), rows: v, cols: u, rank: rf, expected: u },
            RankRow { map: name_h.into(), rows: w, cols: v, rank: rh, expected: w },
        ],
    }
}

pub const SEQUENCES: [&str; 3] = ["tangent", "cotangent", "quotient"];

/// Fiberwise exactness of the tangent sequence, its dual, and the quotient by `G`.
pub fn ses_fiber_check(sequence_id: &str, b: &BundleSpec, samples: usize, seed: u64) -> Result<SuiteReport, GroupoidError> {
    let mut rng = rng::stream(seed, &format!("groupoid.ses.{sequence_id}"));
    let tan = VbGroupoid::new(VbSpace::TangentPair, b);
    let quo = VbGroupoid::new(VbSpace::TangentQuotient, b);
    let cot = VbGroupoid::new(VbSpace::CotangentPair, b);
    let ann = VbGroupoid::new(VbSpace::VerticalAnnihilator, b);
    let (dp, n) = (b.dim(), b.fiber_dim());
    let mut composite = MaxResidual::new();
    let mut kernel = MaxResidual::new();
    let mut extra = MaxResidual::new();
    let mut extra2 = MaxResidual::new();
    let mut extra3 = MaxResidual::new();
    let mut ranks_ok = true;
    let mut table = Vec::new();
    let mut cond_ok = true;
    for t in 0..samples {
        let (p, q) = tan.sample_arrow(&mut rng);
        let mut rows = Vec::new();
        match sequence_id {
            "tangent" => {
                let f = matrix_of(|x| i2(b, &VbElement { space: VbSpace::TrivialVertical, target: p.clone(), source: q.clone(), coords: x.clone() }).coords, n);
                let h = matrix_of(|x| a2(b, &VbElement { space: VbSpace::TangentPair, target: p.clone(), source: q.clone(), coords: x.clone() }).coords, 2 * dp);
                let ex = exactness("I2", "A2", &f, &h);
                // Side sequence P x g -> TP -> TP/g at q.
                let fs = b.t_kappa_p();
                let hs = matrix_of(|v| quo.source(&quo.quotient_class(&q, &q, &DVector::zeros(dp), v)).unwrap().v, dp);
                let exs = exactness("I", "A", &fs, &hs);
                composite.push(ex.composite.max(exs.composite));
                kernel.push(ex.kernel.max(exs.kernel));
                ranks_ok &= ex.ok && exs.ok;
                rows.extend(ex.rows);
                rows.extend(exs.rows);
                // I2 and A2 are groupoid morphisms on random composable pairs.
                let r = b.sample_point(&mut rng);
                let tv = VbGroupoid::new(VbSpace::TrivialVertical, b);
                let x = tv.sample_over(&mut rng, &p, &q);
                let y = tv.sample_with_target(&mut rng, &tv.source(&x).unwrap(), &r);
                let lhs = i2(b, &tv.product(&x, &y).unwrap());
                let rhs = tan.product(&i2(b, &x), &i2(b, &y));
                extra.push(rhs.map(|r| element_distance(&lhs, &r)).unwrap_or(f64::NAN));
                let xt = tan.sample_over(&mut rng, &p, &q);
                let yt = tan.sample_with_target(&mut rng, &tan.source(&xt).unwrap(), &r);
                let lhs = a2(b, &tan.product(&xt, &yt).unwrap());
                let rhs = quo.product(&a2(b, &xt), &a2(b, &yt));
                extra2.push(rhs.map(|r| element_distance(&lhs, &r)).unwrap_or(f64::NAN));
            }
            "cotangent" => {
                let basis = ann.fiber_basis(&p, &q);
                let f = basis.clone();
                let h = cot.j2_matrix();
                let ex = exactness("A2_star", "I2_star", &f, &h);
                composite.push(ex.composite);
                kernel.push(ex.kernel);
                ranks_ok &= ex.ok;
                rows.extend(ex.rows);
                // Transposes of the tangent maps under the pairing phi(v) + psi(w).
                let phi = cot.sample_over(&mut rng, &p, &q);
                let x = rng::uniform_vec(&mut rng, n, 1.0);
                let ix = i2(b, &VbElement { space: VbSpace::TrivialVertical, target: p.clone(), source: q.clone(), coords: x.clone() });
                extra.push((i2_star(b, &phi).coords.dot(&x) - pair(&phi, &ix)).abs());
                // Annihilator elements pair to the same value on a whole A2-class.
                let z = ann.sample_over(&mut rng, &p, &q);
                let xi = tan.sample_over(&mut rng, &p, &q);
                let shifted = tan.add(&xi, &ix).unwrap();
                extra2.push((pair(&z, &xi) - pair(&z, &shifted)).abs());
            }
            "quotient" => {
                // Contragredient pairing and the map Omega*/G -> (Omega/G)*, with
                // classes gauge-fixed at the target fiber element e.
                let g = b.sample_group(&mut rng);
                let phi = cot.sample_over(&mut rng, &p, &q);
                let xi = tan.sample_over(&mut rng, &p, &q);
                let gi = b.group.inverse(&g);
                extra.push((pair(&cot.act(&phi, &g), &xi.clone()) - pair(&phi, &tan.act(&xi, &gi))).abs());
                let fix = b.group.inverse(&p.fiber);
                let p0 = b.act(&p, &fix);
                let q0 = b.act(&q, &fix);
                // Basis of both quotient fibers over the gauge-fixed arrow (p0, q0).
                let m = DMatrix::from_fn(2 * dp, 2 * dp, |i, j| {
                    let cj = VbElement { space: VbSpace::CotangentPair, target: p0.clone(), source: q0.clone(), coords: unit(2 * dp, i) };
                    let tj = VbElement { space: VbSpace::TangentPair, target: p0.clone(), source: q0.clone(), coords: unit(2 * dp, j) };
                    pair(&cj, &tj)
                });
                let cn = linalg::condition_number(&m);
                cond_ok &= cn.is_finite() && cn < 1e8;
                // Well defined: pairing computed at another representative of both classes.
                let phi_cls = cot.act(&phi, &fix);
                let xi_cls = tan.act(&xi, &fix);
                let h = b.sample_group(&mut rng);
                extra2.push((pair(&phi_cls, &xi_cls) - pair(&cot.act(&phi_cls, &h), &tan.act(&xi_cls, &h))).abs());
                // The dual sequence is equivariant, so exactness passes to the quotient fiber.
                let f = ann.fiber_basis(&p0, &q0);
                let hmat = cot.j2_matrix();
                let ex = exactness("A2_star/G", "I2_star/G", &f, &hmat);
                composite.push(ex.composite);
                kernel.push(ex.kernel);
                ranks_ok &= ex.ok;
                rows.extend(ex.rows);
                let z = ann.sample_over(&mut rng, &p, &q);
                extra3.push(i2_star(b, &ann.act(&z, &g)).coords.amax());
            }
            other => return Err(GroupoidError::UnknownSequence(other.to_string())),
        }
        if t == 0 {
            table = rows;
        }
    }
    let mut checks = vec![
        composite.check("composite_zero", 1e-10),
        kernel.check("image_equals_kernel", 1e-10),
        Check::exact("ranks_exact", samples, ranks_ok),
    ];
    match sequence_id {
        "tangent" => {
            checks.push(extra.check("i2_is_morphism", 1e-11));
            checks.push(extra2.check("a2_is_morphism", 1e-11));
        }
        "cotangent" => {
            checks.push(extra.check("i2_star_is_transpose", 1e-12));
            checks.push(extra2.check("annihilator_pairing_descends", 1e-12));
        }
        _ => {
            checks.push(extra.check("contragredient_pairing", 1e-12));
            checks.push(extra2.check("quotient_pairing_well_defined", 1e-12));
            checks.push(extra3.check("annihilator_invariant", 1e-12));
            checks.push(Check::exact("quotient_dual_isomorphism", samples, cond_ok));
        }
    }
    Ok(SuiteReport::new(format!("groupoid.ses:{sequence_id}:{}", b.name), samples, checks, table))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn trivial_vertical_interchange_is_exact() {
        let b = BundleSpec::so3_over_square();
        let r = vb_axiom_suite(&VbGroupoid::new(VbSpace::TrivialVertical, &b), 20, 1);
        assert_eq!(r.check("interchange_law").unwrap().max_residual, 0.0);
    }

    #[test]
    fn zero_elements_satisfy_everything_exactly() {
        let b = BundleSpec::so3_over_square();
        let g = VbGroupoid::new(VbSpace::TangentPair, &b);
        let mut rng = rng::stream(1, "t");
        let (p, q) = g.sample_arrow(&mut rng);
        let z = g.zero(&p, &q);
        let zz = g.add(&z, &z).unwrap();
        assert_eq!(zz.coords, z.coords);
        let prod = g.product(&z, &g.zero(&q, &p)).unwrap();
        assert_eq!(prod.coords.amax(), 0.0);
    }
}
