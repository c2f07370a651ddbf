//! Matrix Lie groups given by an algebra basis and structure constants.
//!
//! Conventions used throughout the crate:
//! * algebra vectors are coordinates in the basis `e_i`, `[e_i, e_j] = c^k_ij e_k`;
//! * covectors pair with vectors by the coordinate dot product;
//! * tangent vectors on a group are left-trivialized, `X_g = g . xi`;
//! * the coadjoint action is `Ad*_g mu = mu o Ad_{g^-1}`, so that
//!   `<Ad*_{g^-1} mu, x> = <mu, Ad_g x>`, while `ad*_x mu = mu o ad_x`.

use crate::report::{Check, SuiteReport};
use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum LieError {
    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimMismatch { expected: usize, got: usize },
    #[error("logarithm undefined: {0}")]
    LogDomain(String),
    #[error("elements belong to different groups ({0} vs {1})")]
    GroupMismatch(String, String),
    #[error("invalid group spec: {0}")]
    InvalidSpec(String),
}

/// How membership of an embedded matrix in the group is decided.
#[derive(Clone, Debug, PartialEq)]
pub enum Membership {
    /// `R^T R = I`, `det R = 1`.
    SpecialOrthogonal,
    /// Unipotent `(n+1)x(n+1)` matrices `[[I, v], [0, 1]]`.
    Translations,
    /// Block-diagonal 2x2 rotations; angles wrap automatically.
    Torus,
    /// Upper unitriangular 3x3.
    Heisenberg,
    /// `blockdiag(k, D(k) u)` with `k` in `K`, `u` in `N`.
    Semidirect {
        k: Box<LieGroupSpec>,
        n: Box<LieGroupSpec>,
        rho: Vec<DMatrix<f64>>,
    },
    /// Principal logarithm exists and lies in the span of the basis.
    Generic,
}

/// A matrix Lie group: basis of its algebra inside `gl(m)` plus structure constants.
#[derive(Clone, Debug, PartialEq)]
pub struct LieGroupSpec {
    pub name: String,
    pub dim: usize,
    pub embed: usize,
    pub basis: Vec<DMatrix<f64>>,
    /// Dense constants, `c[(k * dim + i) * dim + j] = c^k_ij`.
    structure: Vec<f64>,
    pub membership: Membership,
    /// Least-squares coordinates of a matrix in the basis, `dim x embed^2`.
    coord_map: DMatrix<f64>,
}

/// JSON form of a group spec; indices are zero-based.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct LieGroupDoc {
    pub name: String,
    pub dim: usize,
    pub embed: usize,
    /// Row-major `embed x embed` matrices.
    pub basis: Vec<Vec<f64>>,
    /// Entries `[i, j, k, c^k_ij]`.
    pub structure: Vec<(usize, usize, usize, f64)>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub family: Option<String>,
}

impl LieGroupSpec {
    /// Build from explicit constants. Fails only on shape errors; algebraic
    /// consistency is left to [`validate_spec`].
    pub fn new(
        name: impl Into<String>,
        basis: Vec<DMatrix<f64>>,
        constants: &[(usize, usize, usize, f64)],
        membership: Membership,
    ) -> Result<Self, LieError> {
        let dim = basis.len();
        let embed = basis.first().map(|b| b.nrows()).unwrap_or(1);
        for b in &basis {
            if b.nrows() != embed || b.ncols() != embed {
                return Err(LieError::InvalidSpec(format!(
                    "basis matrix of shape {}x{} in a {embed}x{embed} embedding",
                    b.nrows(),
                    b.ncols()
                )));
            }
        }
        let mut structure = vec![0.0; dim * dim * dim];
        for &(i, j, k, v) in constants {
            if i >= dim || j >= dim || k >= dim {
                return Err(LieError::InvalidSpec(format!(
                    "structure index ({i},{j},{k}) out of range for dimension {dim}"
                )));
            }
            structure[(k * dim + i) * dim + j] = v;
        }
        let coord_map = coordinate_map(&basis, embed);
        Ok(LieGroupSpec {
            name: name.into(),
            dim,
            embed,
            basis,
            structure,
            membership,
            coord_map,
        })
    }

    /// Build with constants read off the matrix commutators of the basis.
    pub fn from_basis(
        name: impl Into<String>,
        basis: Vec<DMatrix<f64>>,
        membership: Membership,
    ) -> Result<Self, LieError> {
        let mut spec = LieGroupSpec::new(name, basis, &[], membership)?;
        let n = spec.dim;
        for i in 0..n {
            for j in 0..n {
                let c = &spec.basis[i] * &spec.basis[j] - &spec.basis[j] * &spec.basis[i];
                let coords = spec.vee(&c);
                for k in 0..n {
                    // Least-squares coordinates carry ~1e-16 noise; integral
                    // constants (every built-in) are snapped back.
                    let v = coords[k];
                    let r = v.round();
                    spec.structure[(k * n + i) * n + j] = if (v - r).abs() < 1e-12 { r } else { v };
                }
            }
        }
        Ok(spec)
    }

    pub fn from_doc(doc: &LieGroupDoc) -> Result<Self, LieError> {
        if doc.basis.len() != doc.dim {
            return Err(LieError::InvalidSpec(format!(
                "declared dim {} but {} basis matrices",
                doc.dim,
                doc.basis.len()
            )));
        }
        let m = doc.embed;
        let mut basis = Vec::with_capacity(doc.dim);
        for (idx, b) in doc.basis.iter().enumerate() {
            if b.len() != m * m {
                return Err(LieError::InvalidSpec(format!(
                    "basis matrix {idx} has {} entries, expected {}",
                    b.len(),
                    m * m
                )));
            }
            basis.push(DMatrix::from_row_slice(m, m, b));
        }
        let membership = match doc.family.as_deref() {
            Some("so3") => Membership::SpecialOrthogonal,
            Some("abelian") => Membership::Translations,
            Some("torus") => Membership::Torus,
            Some("heisenberg") => Membership::Heisenberg,
            _ => Membership::Generic,
        };
        LieGroupSpec::new(doc.name.clone(), basis, &doc.structure, membership)
    }

    pub fn to_doc(&self) -> LieGroupDoc {
        let n = self.dim;
        let mut structure = Vec::new();
        for i in 0..n {
            for j in 0..n {
                for k in 0..n {
                    let v = self.c(k, i, j);
                    if v != 0.0 {
                        structure.push((i, j, k, v));
                    }
                }
            }
        }
        let family = match self.membership {
            Membership::SpecialOrthogonal => Some("so3".to_string()),
            Membership::Translations => Some("abelian".to_string()),
            Membership::Torus => Some("torus".to_string()),
            Membership::Heisenberg => Some("heisenberg".to_string()),
            _ => None,
        };
        LieGroupDoc {
            name: self.name.clone(),
            dim: n,
            embed: self.embed,
            basis: self
                .basis
                .iter()
                .map(|b| b.transpose().iter().cloned().collect())
                .collect(),
            structure,
            family,
        }
    }

    /// Structure constant `c^k_ij`.
    #[inline]
    pub fn c(&self, k: usize, i: usize, j: usize) -> f64 {
        self.structure[(k * self.dim + i) * self.dim + j]
    }

    /// Overwrite one constant (used to build deliberately broken specs).
    pub fn set_c(&mut self, k: usize, i: usize, j: usize, v: f64) {
        let n = self.dim;
        self.structure[(k * n + i) * n + j] = v;
    }

    pub fn is_abelian(&self) -> bool {
        self.structure.iter().all(|&c| c == 0.0)
    }

    fn expect_len(&self, v: &DVector<f64>) -> Result<(), LieError> {
        if v.len() != self.dim {
            Err(LieError::DimMismatch {
                expected: self.dim,
                got: v.len(),
            })
        } else {
            Ok(())
        }
    }

    pub fn identity(&self) -> DMatrix<f64> {
        DMatrix::identity(self.embed, self.embed)
    }

    pub fn zero(&self) -> DVector<f64> {
        DVector::zeros(self.dim)
    }

    pub fn unit(&self, i: usize) -> DVector<f64> {
        let mut e = self.zero();
        e[i] = 1.0;
        e
    }

    /// Algebra vector to embedded matrix.
    pub fn hat(&self, x: &DVector<f64>) -> DMatrix<f64> {
        let mut m = DMatrix::zeros(self.embed, self.embed);
        for (xi, b) in x.iter().zip(&self.basis) {
            if *xi != 0.0 {
                m += b * *xi;
            }
        }
        m
    }

    /// Least-squares coordinates of a matrix in the basis.
    pub fn vee(&self, m: &DMatrix<f64>) -> DVector<f64> {
        let flat = DVector::from_iterator(m.len(), m.iter().cloned());
        &self.coord_map * flat
    }

    /// Distance of a matrix from the span of the basis.
    pub fn span_residual(&self, m: &DMatrix<f64>) -> f64 {
        (self.hat(&self.vee(m)) - m).amax()
    }

    /// `[x, y]` from the structure constants.
    pub fn bracket(&self, x: &DVector<f64>, y: &DVector<f64>) -> Result<DVector<f64>, LieError> {
        self.expect_len(x)?;
        self.expect_len(y)?;
        Ok(self.bracket_unchecked(x, y))
    }

    pub(crate) fn bracket_unchecked(&self, x: &DVector<f64>, y: &DVector<f64>) -> DVector<f64> {
        let n = self.dim;
        let mut out = DVector::zeros(n);
        for k in 0..n {
            let mut s = 0.0;
            for i in 0..n {
                if x[i] == 0.0 {
                    continue;
                }
                for j in 0..n {
                    s += self.c(k, i, j) * x[i] * y[j];
                }
            }
            out[k] = s;
        }
        out
    }

    /// Matrix of `ad_x`, i.e. `y -> [x, y]`.
    pub fn ad_matrix(&self, x: &DVector<f64>) -> DMatrix<f64> {
        let n = self.dim;
        DMatrix::from_fn(n, n, |k, j| (0..n).map(|i| self.c(k, i, j) * x[i]).sum())
    }

    /// `ad*_x mu` with `<ad*_x mu, y> = <mu, [x, y]>`.
    pub fn ad_star(&self, x: &DVector<f64>, mu: &DVector<f64>) -> Result<DVector<f64>, LieError> {
        self.expect_len(x)?;
        self.expect_len(mu)?;
        Ok(self.ad_matrix(x).transpose() * mu)
    }

    pub fn exp(&self, x: &DVector<f64>) -> Result<DMatrix<f64>, LieError> {
        self.expect_len(x)?;
        Ok(expm(&self.hat(x)))
    }

    /// Principal logarithm in algebra coordinates.
    pub fn log(&self, g: &DMatrix<f64>) -> Result<DVector<f64>, LieError> {
        if g.nrows() != self.embed || g.ncols() != self.embed {
            return Err(LieError::DimMismatch {
                expected: self.embed,
                got: g.nrows(),
            });
        }
        let l = logm(g)?;
        let x = self.vee(&l);
        let res = (self.hat(&x) - &l).amax();
        if res > 1e-8 * l.amax().max(1.0) {
            return Err(LieError::LogDomain(format!(
                "logarithm leaves the algebra (residual {res:.3e})"
            )));
        }
        Ok(x)
    }

    pub fn inverse(&self, g: &DMatrix<f64>) -> DMatrix<f64> {
        match self.membership {
            Membership::SpecialOrthogonal | Membership::Torus => g.transpose(),
            _ => g
                .clone()
                .try_inverse()
                .expect("group elements are invertible"),
        }
    }

    /// Matrix of `Ad_g` acting on algebra coordinates.
    pub fn adjoint_matrix(&self, g: &DMatrix<f64>) -> DMatrix<f64> {
        let gi = self.inverse(g);
        let cols: Vec<DVector<f64>> = self
            .basis
            .iter()
            .map(|b| self.vee(&(g * b * &gi)))
            .collect();
        DMatrix::from_columns(&cols)
    }

    pub fn adjoint(&self, g: &DMatrix<f64>, x: &DVector<f64>) -> Result<DVector<f64>, LieError> {
        self.expect_len(x)?;
        let gi = self.inverse(g);
        Ok(self.vee(&(g * self.hat(x) * gi)))
    }

    /// Coadjoint action `Ad*_g mu = mu o Ad_{g^-1}`.
    pub fn coadjoint(&self, g: &DMatrix<f64>, mu: &DVector<f64>) -> Result<DVector<f64>, LieError> {
        self.expect_len(mu)?;
        Ok(self.coadjoint_matrix(g) * mu)
    }

    /// Matrix of `Ad*_g`, equal to `(Ad_{g^-1})^T`.
    pub fn coadjoint_matrix(&self, g: &DMatrix<f64>) -> DMatrix<f64> {
        self.adjoint_matrix(&self.inverse(g)).transpose()
    }

    /// Membership residual of an embedded matrix (0 means exactly in the group).
    pub fn membership_residual(&self, g: &DMatrix<f64>) -> f64 {
        if g.nrows() != self.embed || g.ncols() != self.embed {
            return f64::INFINITY;
        }
        let m = self.embed;
        match &self.membership {
            Membership::SpecialOrthogonal => {
                let orth = (g.transpose() * g - DMatrix::identity(m, m)).amax();
                orth.max((g.determinant() - 1.0).abs())
            }
            Membership::Translations => {
                let mut r: f64 = 0.0;
                for i in 0..m {
                    for j in 0..m {
                        let want = if i == j { 1.0 } else { 0.0 };
                        if j != m - 1 || i == m - 1 {
                            r = r.max((g[(i, j)] - want).abs());
                        }
                    }
                }
                r
            }
            Membership::Torus => {
                let mut r: f64 = 0.0;
                for i in 0..m {
                    for j in 0..m {
                        if i / 2 != j / 2 {
                            r = r.max(g[(i, j)].abs());
                        }
                    }
                }
                for b in 0..m / 2 {
                    let (c, s) = (g[(2 * b, 2 * b)], g[(2 * b + 1, 2 * b)]);
                    r = r.max((g[(2 * b + 1, 2 * b + 1)] - c).abs());
                    r = r.max((g[(2 * b, 2 * b + 1)] + s).abs());
                    r = r.max((c * c + s * s - 1.0).abs());
                }
                r
            }
            Membership::Heisenberg => {
                let mut r: f64 = 0.0;
                for i in 0..m {
                    for j in 0..=i {
                        let want = if i == j { 1.0 } else { 0.0 };
                        r = r.max((g[(i, j)] - want).abs());
                    }
                }
                r
            }
            Membership::Semidirect { k, n, rho } => crate::semidirect::membership_residual(k, n, rho, g),
            Membership::Generic => match logm(g) {
                Ok(l) => self.span_residual(&l),
                Err(_) => f64::INFINITY,
            },
        }
    }

    pub fn is_member(&self, g: &DMatrix<f64>, tol: f64) -> bool {
        self.membership_residual(g) <= tol
    }
}

fn coordinate_map(basis: &[DMatrix<f64>], embed: usize) -> DMatrix<f64> {
    let n = basis.len();
    if n == 0 {
        return DMatrix::zeros(0, embed * embed);
    }
    let cols: Vec<DVector<f64>> = basis
        .iter()
        .map(|b| DVector::from_iterator(b.len(), b.iter().cloned()))
        .collect();
    let b = DMatrix::from_columns(&cols);
    // Normal equations keep sparse integer bases exact; dependent bases (invalid
    // specs) fall back to the SVD pseudo-inverse so validation can still report.
    let gram = b.transpose() * &b;
    match gram.clone().cholesky() {
        Some(ch) => ch.inverse() * b.transpose(),
        None => b
            .pseudo_inverse(1e-13)
            .unwrap_or_else(|_| DMatrix::zeros(n, embed * embed)),
    }
}

/// Matrix exponential by scaling and squaring with a Taylor core.
pub fn expm(a: &DMatrix<f64>) -> DMatrix<f64> {
    let n = a.nrows();
    let norm = a.iter().map(|x| x.abs()).sum::<f64>();
    let mut s = 0i32;
    if norm > 0.5 {
        s = (norm / 0.5).log2().ceil() as i32;
    }
    let scaled = a / 2f64.powi(s);
    let mut result = DMatrix::identity(n, n);
    let mut term = DMatrix::identity(n, n);
    for k in 1..40 {
        term = &term * &scaled / k as f64;
        result += &term;
        if term.amax() < 1e-18 {
            break;
        }
    }
    for _ in 0..s {
        result = &result * &result;
    }
    result
}

/// Principal square root by the Denman-Beavers iteration.
fn sqrtm(a: &DMatrix<f64>) -> Result<DMatrix<f64>, LieError> {
    let n = a.nrows();
    let mut y = a.clone();
    let mut z = DMatrix::identity(n, n);
    for _ in 0..100 {
        let yi = y
            .clone()
            .try_inverse()
            .ok_or_else(|| LieError::LogDomain("singular square-root iterate".into()))?;
        let zi = z
            .clone()
            .try_inverse()
            .ok_or_else(|| LieError::LogDomain("singular square-root iterate".into()))?;
        let y_next = (&y + zi) * 0.5;
        let z_next = (&z + yi) * 0.5;
        let delta = (&y_next - &y).amax();
        y = y_next;
        z = z_next;
        if !y.iter().all(|v| v.is_finite()) {
            break;
        }
        if delta <= 1e-15 * y.amax().max(1.0) {
            return Ok(y);
        }
    }
    Err(LieError::LogDomain(
        "square-root iteration did not converge (eigenvalue on the negative real axis?)".into(),
    ))
}

/// Principal matrix logarithm by inverse scaling and squaring.
///
/// The input is square-rooted until `||A - I||_inf < 0.25`; if that bound
/// (or the looser domain bound 1) is never reached the input lies outside the
/// injectivity domain and an error is returned.
pub fn logm(g: &DMatrix<f64>) -> Result<DMatrix<f64>, LieError> {
    let n = g.nrows();
    if !g.iter().all(|v| v.is_finite()) {
        return Err(LieError::LogDomain("non-finite matrix".into()));
    }
    let id = DMatrix::<f64>::identity(n, n);
    let mut a = g.clone();
    let mut k = 0u32;
    while (&a - &id).amax() >= 0.25 {
        if k >= 40 {
            break;
        }
        a = sqrtm(&a)?;
        k += 1;
    }
    let x = &a - &id;
    if x.amax() >= 1.0 {
        return Err(LieError::LogDomain(format!(
            "||A - I|| = {:.3e} after {k} square roots",
            x.amax()
        )));
    }
    let mut result = DMatrix::zeros(n, n);
    let mut power = x.clone();
    for j in 1..200 {
        let term = &power / j as f64;
        if j % 2 == 1 {
            result += &term;
        } else {
            result -= &term;
        }
        if term.amax() < 1e-18 {
            break;
        }
        power = &power * &x;
    }
    Ok(result * 2f64.powi(k as i32))
}

/// Element of the tangent group `TG` in left trivialization: `X_g = g . left`.
#[derive(Clone, Debug, PartialEq)]
pub struct TangentGroupPoint {
    pub base: DMatrix<f64>,
    pub left: DVector<f64>,
}

/// `(g, xi) . (h, eta) = (gh, Ad_{h^-1} xi + eta)`.
pub fn tangent_group_product(
    spec: &LieGroupSpec,
    a: &TangentGroupPoint,
    b: &TangentGroupPoint,
) -> Result<TangentGroupPoint, LieError> {
    if a.base.nrows() != spec.embed || b.base.nrows() != spec.embed {
        return Err(LieError::GroupMismatch(
            format!("{}x{}", a.base.nrows(), a.base.ncols()),
            format!("{}x{}", b.base.nrows(), b.base.ncols()),
        ));
    }
    spec.expect_len(&a.left)?;
    spec.expect_len(&b.left)?;
    let hinv = spec.inverse(&b.base);
    Ok(TangentGroupPoint {
        base: &a.base * &b.base,
        left: spec.adjoint(&hinv, &a.left)? + &b.left,
    })
}

/// `(g, xi)^-1 = (g^-1, -Ad_g xi)`.
pub fn tangent_group_inverse(spec: &LieGroupSpec, a: &TangentGroupPoint) -> Result<TangentGroupPoint, LieError> {
    Ok(TangentGroupPoint {
        base: spec.inverse(&a.base),
        left: -spec.adjoint(&a.base, &a.left)?,
    })
}

/// Run every structural invariant of a group spec.
pub fn validate_spec(g: &LieGroupSpec) -> SuiteReport {
    let n = g.dim;
    let mut antisym: f64 = 0.0;
    for i in 0..n {
        for j in 0..n {
            for k in 0..n {
                antisym = antisym.max((g.c(k, i, j) + g.c(k, j, i)).abs());
            }
        }
    }
    let mut jacobi: f64 = 0.0;
    for i in 0..n {
        for j in 0..n {
            for k in 0..n {
                let (x, y, z) = (g.unit(i), g.unit(j), g.unit(k));
                let s = g.bracket_unchecked(&g.bracket_unchecked(&x, &y), &z)
                    + g.bracket_unchecked(&g.bracket_unchecked(&y, &z), &x)
                    + g.bracket_unchecked(&g.bracket_unchecked(&z, &x), &y);
                jacobi = jacobi.max(s.amax());
            }
        }
    }
    let cols: Vec<DVector<f64>> = g
        .basis
        .iter()
        .map(|b| DVector::from_iterator(b.len(), b.iter().cloned()))
        .collect();
    let rank = if cols.is_empty() {
        0
    } else {
        crate::linalg::numeric_rank(&DMatrix::from_columns(&cols))
    };
    let mut commut: f64 = 0.0;
    for i in 0..n {
        for j in 0..n {
            let c = &g.basis[i] * &g.basis[j] - &g.basis[j] * &g.basis[i];
            let from_constants = g.hat(&g.bracket_unchecked(&g.unit(i), &g.unit(j)));
            commut = commut.max((c - from_constants).amax());
        }
    }
    let mut member: f64 = 0.0;
    for i in 0..n {
        member = member.max(g.membership_residual(&expm(&(&g.basis[i] * 0.3))));
    }
    let checks = vec![
        Check::new("antisymmetry", n * n * n, antisym, 1e-12),
        Check::new("jacobi", n * n * n, jacobi, 1e-12),
        Check::exact("basis_rank", 1, rank == n),
        Check::new("commutator_matches_constants", n * n, commut, 1e-12),
        Check::new("exp_of_basis_in_group", n, member, 1e-10),
    ];
    SuiteReport::new(format!("liealg.validate:{}", g.name), n * n * n, checks, vec![])
}

fn so3_generator(i: usize) -> DMatrix<f64> {
    // (e_i)_{jk} = -epsilon_{ijk}, so that [e_1, e_2] = e_3.
    let mut m = DMatrix::zeros(3, 3);
    let (j, k) = ((i + 1) % 3, (i + 2) % 3);
    m[(j, k)] = -1.0;
    m[(k, j)] = 1.0;
    m
}

/// SO(3) with `e_i` the infinitesimal rotation about axis `i`.
pub fn so3() -> LieGroupSpec {
    LieGroupSpec::from_basis("so3", (0..3).map(so3_generator).collect(), Membership::SpecialOrthogonal)
        .expect("so3 basis is well formed")
}

/// Abelian `R^n` as unipotent translations.
pub fn abelian(n: usize) -> LieGroupSpec {
    let basis = (0..n)
        .map(|i| {
            let mut m = DMatrix::zeros(n + 1, n + 1);
            m[(i, n)] = 1.0;
            m
        })
        .collect();
    LieGroupSpec::from_basis(format!("r{n}"), basis, Membership::Translations).expect("translation basis")
}

/// Torus `T^n` as block-diagonal rotations.
pub fn torus(n: usize) -> LieGroupSpec {
    let basis = (0..n)
        .map(|i| {
            let mut m = DMatrix::zeros(2 * n, 2 * n);
            m[(2 * i, 2 * i + 1)] = -1.0;
            m[(2 * i + 1, 2 * i)] = 1.0;
            m
        })
        .collect();
    LieGroupSpec::from_basis(format!("t{n}"), basis, Membership::Torus).expect("torus basis")
}

/// Heisenberg group of upper unitriangular 3x3 matrices, `[X, Y] = Z`.
pub fn heisenberg3() -> LieGroupSpec {
    let mut x = DMatrix::zeros(3, 3);
    x[(0, 1)] = 1.0;
    let mut y = DMatrix::zeros(3, 3);
    y[(1, 2)] = 1.0;
    let mut z = DMatrix::zeros(3, 3);
    z[(0, 2)] = 1.0;
    LieGroupSpec::from_basis("heisenberg3", vec![x, y, z], Membership::Heisenberg).expect("heisenberg basis")
}

/// Built-in groups by name: `so3`, `heisenberg3`, `rN`, `tN`, `u1`, `se3`.
pub fn builtin(name: &str) -> Option<LieGroupSpec> {
    match name {
        "so3" => Some(so3()),
        "heisenberg3" => Some(heisenberg3()),
        "u1" => Some(torus(1)),
        "se3" => Some(crate::semidirect::SemidirectSpec::se3().group()),
        _ => {
            let (head, tail) = name.split_at(1);
            let k: usize = tail.parse().ok()?;
            if k == 0 || k > 5 {
                return None;
            }
            match head {
                "r" => Some(abelian(k)),
                "t" => Some(torus(k)),
                _ => None,
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn so3_bracket_e1_e2_is_e3() {
        let g = so3();
        let b = g.bracket(&g.unit(0), &g.unit(1)).unwrap();
        assert_eq!(b, g.unit(2));
        assert_eq!(g.c(2, 0, 1), 1.0);
    }

    #[test]
    fn exp_zero_is_identity() {
        for g in [so3(), heisenberg3(), abelian(2), torus(2)] {
            assert_eq!(g.exp(&g.zero()).unwrap(), g.identity());
        }
    }

    #[test]
    fn dimension_mismatch_is_reported() {
        let g = so3();
        let err = g.bracket(&DVector::zeros(2), &g.unit(0)).unwrap_err();
        assert_eq!(err, LieError::DimMismatch { expected: 3, got: 2 });
    }

    #[test]
    fn log_of_half_turn_is_rejected() {
        let g = so3();
        let r = DMatrix::from_diagonal(&DVector::from_vec(vec![-1.0, -1.0, 1.0]));
        assert!(g.is_member(&r, 1e-15));
        assert!(matches!(g.log(&r), Err(LieError::LogDomain(_))));
    }

    #[test]
    fn broken_antisymmetry_is_named() {
        let mut g = so3();
        g.set_c(2, 1, 0, 1.0);
        let rep = validate_spec(&g);
        assert!(!rep.pass);
        assert!(!rep.check("antisymmetry").unwrap().pass);
    }

    #[test]
    fn doc_roundtrip() {
        let g = heisenberg3();
        let doc = g.to_doc();
        let json = serde_json::to_string(&doc).unwrap();
        let back = LieGroupSpec::from_doc(&serde_json::from_str(&json).unwrap()).unwrap();
        assert_eq!(back, g);
    }

    #[test]
    fn builtin_names() {
        assert_eq!(builtin("r3").unwrap().dim, 3);
        assert_eq!(builtin("t2").unwrap().embed, 4);
        assert!(builtin("q7").is_none());
    }
}
