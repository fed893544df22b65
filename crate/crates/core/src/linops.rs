//! Dense complex operators on a finite Hilbert space and their
//! Liouville-space (column-stacked) representation.

use std::ops::Deref;

use nalgebra::{DMatrix, DVector, Schur, SymmetricEigen};
use num_complex::Complex64;

use crate::error::{Error, Result};

pub type C64 = Complex64;
pub type CMatrix = DMatrix<C64>;
pub type CVector = DVector<C64>;

pub const I: C64 = C64::new(0.0, 1.0);

/// Tolerance used when validating Hermiticity, trace and positivity of inputs.
pub const STATE_TOL: f64 = 1e-10;

pub fn c(re: f64) -> C64 {
    C64::new(re, 0.0)
}

/// Largest entry modulus.
pub fn max_abs(m: &CMatrix) -> f64 {
    m.iter().fold(0.0_f64, |acc, z| acc.max(z.norm()))
}

/// Induced 1-norm (max column sum).
pub fn norm1(m: &CMatrix) -> f64 {
    m.column_iter()
        .map(|col| col.iter().map(|z| z.norm()).sum::<f64>())
        .fold(0.0, f64::max)
}

pub fn commutator(a: &CMatrix, b: &CMatrix) -> CMatrix {
    a * b - b * a
}

pub fn anticommutator(a: &CMatrix, b: &CMatrix) -> CMatrix {
    a * b + b * a
}

pub fn kron(a: &CMatrix, b: &CMatrix) -> CMatrix {
    a.kronecker(b)
}

pub fn pauli_x() -> CMatrix {
    CMatrix::from_row_slice(2, 2, &[c(0.0), c(1.0), c(1.0), c(0.0)])
}

pub fn pauli_y() -> CMatrix {
    CMatrix::from_row_slice(2, 2, &[c(0.0), -I, I, c(0.0)])
}

pub fn pauli_z() -> CMatrix {
    CMatrix::from_row_slice(2, 2, &[c(1.0), c(0.0), c(0.0), c(-1.0)])
}

/// Square operator on a `dim`-dimensional Hilbert space.
#[derive(Clone, Debug, PartialEq)]
pub struct QOperator(CMatrix);

impl QOperator {
    pub fn new(m: CMatrix) -> Result<Self> {
        if m.nrows() != m.ncols() {
            return Err(Error::DimensionMismatch {
                expected: m.nrows(),
                found: m.ncols(),
            });
        }
        if m.iter().any(|z| !z.re.is_finite() || !z.im.is_finite()) {
            return Err(Error::InvalidParameter("operator has non-finite entries".into()));
        }
        Ok(Self(m))
    }

    pub fn identity(dim: usize) -> Self {
        Self(CMatrix::identity(dim, dim))
    }

    pub fn zeros(dim: usize) -> Self {
        Self(CMatrix::zeros(dim, dim))
    }

    pub fn dim(&self) -> usize {
        self.0.nrows()
    }

    pub fn matrix(&self) -> &CMatrix {
        &self.0
    }

    pub fn into_matrix(self) -> CMatrix {
        self.0
    }

    pub fn dagger(&self) -> Self {
        Self(self.0.adjoint())
    }

    pub fn hermiticity_error(&self) -> f64 {
        max_abs(&(&self.0 - self.0.adjoint()))
    }

    /// Errors with `NotHermitian` if the deviation exceeds `tol`.
    pub fn ensure_hermitian(&self, what: &'static str, tol: f64) -> Result<()> {
        let deviation = self.hermiticity_error();
        if deviation > tol * self.0.norm().max(1.0) {
            return Err(Error::NotHermitian { what, deviation });
        }
        Ok(())
    }

    pub fn trace(&self) -> C64 {
        self.0.trace()
    }

    pub fn scaled(&self, s: C64) -> Self {
        Self(&self.0 * s)
    }

    pub fn expm(&self, t: C64) -> Result<Self> {
        Ok(Self(expm(&(&self.0 * t), 1.0)?))
    }
}

impl Deref for QOperator {
    type Target = CMatrix;
    fn deref(&self) -> &CMatrix {
        &self.0
    }
}

impl From<QOperator> for CMatrix {
    fn from(op: QOperator) -> CMatrix {
        op.0
    }
}

/// Hermitian, positive semidefinite, unit-trace operator.
#[derive(Clone, Debug, PartialEq)]
pub struct DensityMatrix(QOperator);

impl DensityMatrix {
    pub fn new(m: CMatrix) -> Result<Self> {
        let op = QOperator::new(m)?;
        let herm = op.hermiticity_error();
        if herm > STATE_TOL {
            return Err(Error::InvalidState(format!("not Hermitian (deviation {herm:.3e})")));
        }
        let tr = op.trace();
        if (tr - c(1.0)).norm() > STATE_TOL {
            return Err(Error::InvalidState(format!("trace is {tr}")));
        }
        let min_eig = hermitian_eigen(&op).0.iter().cloned().fold(f64::INFINITY, f64::min);
        if min_eig < -STATE_TOL {
            return Err(Error::InvalidState(format!("negative eigenvalue {min_eig:.3e}")));
        }
        Ok(Self(op))
    }

    /// Symmetrises and renormalises the trace before validating; absorbs roundoff
    /// from propagation or averaging.
    pub fn from_numerical(m: CMatrix) -> Result<Self> {
        let h = (&m + m.adjoint()) * c(0.5);
        let tr = h.trace().re;
        if !(tr.is_finite() && tr > 0.0) {
            return Err(Error::InvalidState(format!("trace is {tr}")));
        }
        Self::new(h / c(tr))
    }

    pub fn pure(psi: &CVector) -> Result<Self> {
        let n = psi.norm();
        if !(n.is_finite() && n > 0.0) {
            return Err(Error::InvalidState("zero or non-finite state vector".into()));
        }
        let v = psi / c(n);
        Self::from_numerical(&v * v.adjoint())
    }

    pub fn maximally_mixed(dim: usize) -> Self {
        Self(QOperator(CMatrix::identity(dim, dim) / c(dim as f64)))
    }

    pub fn dim(&self) -> usize {
        self.0.dim()
    }

    pub fn op(&self) -> &QOperator {
        &self.0
    }

    pub fn matrix(&self) -> &CMatrix {
        &self.0 .0
    }

    pub fn purity(&self) -> f64 {
        (self.matrix() * self.matrix()).trace().re
    }

    pub fn expectation(&self, obs: &CMatrix) -> C64 {
        (obs * self.matrix()).trace()
    }

    pub fn vectorize(&self) -> VecOperator {
        vectorize(&self.0)
    }
}

/// Column-stacked operator |A>> = sum_ij A_ij |j> (x) |i>.
#[derive(Clone, Debug, PartialEq)]
pub struct VecOperator {
    dim: usize,
    entries: CVector,
}

impl VecOperator {
    pub fn new(dim: usize, entries: CVector) -> Result<Self> {
        if entries.len() != dim * dim {
            return Err(Error::DimensionMismatch {
                expected: dim * dim,
                found: entries.len(),
            });
        }
        Ok(Self { dim, entries })
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn entries(&self) -> &CVector {
        &self.entries
    }

    /// Trace of the underlying operator, i.e. <<1|A>>.
    pub fn trace(&self) -> C64 {
        (0..self.dim).map(|i| self.entries[i * self.dim + i]).sum()
    }
}

pub fn vectorize(a: &QOperator) -> VecOperator {
    let d = a.dim();
    VecOperator {
        dim: d,
        entries: CVector::from_column_slice(a.matrix().as_slice()),
    }
}

pub fn devectorize(v: &VecOperator) -> QOperator {
    QOperator(CMatrix::from_column_slice(v.dim, v.dim, v.entries.as_slice()))
}

/// Raw column-stacking of a square matrix.
pub fn vec_of(m: &CMatrix) -> CVector {
    CVector::from_column_slice(m.as_slice())
}

/// Inverse of [`vec_of`] for a `dim`-dimensional operator.
pub fn unvec(v: &[C64], dim: usize) -> CMatrix {
    CMatrix::from_column_slice(dim, dim, v)
}

/// Liouville-space matrix acting on column-stacked operators of a `dim`-dimensional space.
#[derive(Clone, Debug, PartialEq)]
pub struct SuperOperator {
    dim: usize,
    m: CMatrix,
}

impl SuperOperator {
    pub fn new(dim: usize, m: CMatrix) -> Result<Self> {
        let n = dim * dim;
        if m.nrows() != n || m.ncols() != n {
            return Err(Error::DimensionMismatch {
                expected: n,
                found: m.nrows().max(m.ncols()),
            });
        }
        Ok(Self { dim, m })
    }

    pub fn zeros(dim: usize) -> Self {
        Self {
            dim,
            m: CMatrix::zeros(dim * dim, dim * dim),
        }
    }

    pub fn identity(dim: usize) -> Self {
        Self {
            dim,
            m: CMatrix::identity(dim * dim, dim * dim),
        }
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn matrix(&self) -> &CMatrix {
        &self.m
    }

    pub fn into_matrix(self) -> CMatrix {
        self.m
    }

    pub fn apply(&self, v: &VecOperator) -> Result<VecOperator> {
        if v.dim != self.dim {
            return Err(Error::DimensionMismatch {
                expected: self.dim,
                found: v.dim,
            });
        }
        Ok(VecOperator {
            dim: self.dim,
            entries: &self.m * &v.entries,
        })
    }

    pub fn apply_op(&self, a: &CMatrix) -> CMatrix {
        unvec((&self.m * vec_of(a)).as_slice(), self.dim)
    }

    /// Hilbert-Schmidt adjoint (conjugate transpose of the Liouville matrix).
    pub fn dagger(&self) -> Self {
        Self {
            dim: self.dim,
            m: self.m.adjoint(),
        }
    }

    pub fn expm(&self, t: f64) -> Result<CMatrix> {
        expm(&self.m, t)
    }

    /// Largest entry of <<1| S, zero for trace-annihilating maps.
    pub fn trace_residual(&self) -> f64 {
        let one = vec_of(&CMatrix::identity(self.dim, self.dim));
        let row = one.adjoint() * &self.m;
        row.iter().fold(0.0_f64, |a, z| a.max(z.norm()))
    }

    pub fn add(&self, other: &SuperOperator) -> Self {
        Self {
            dim: self.dim,
            m: &self.m + &other.m,
        }
    }

    pub fn add_scaled(&mut self, other: &SuperOperator, s: C64) {
        self.m += &other.m * s;
    }

    pub fn scaled(&self, s: C64) -> Self {
        Self {
            dim: self.dim,
            m: &self.m * s,
        }
    }
}

/// The map X -> A X C as Liouville matrix C^T (x) A.
pub fn sandwich(a: &CMatrix, c_right: &CMatrix) -> Result<SuperOperator> {
    if a.nrows() != c_right.nrows() || !a.is_square() || !c_right.is_square() {
        return Err(Error::DimensionMismatch {
            expected: a.nrows(),
            found: c_right.nrows(),
        });
    }
    let d = a.nrows();
    Ok(SuperOperator {
        dim: d,
        m: kron(&c_right.transpose(), a),
    })
}

/// X -> A X
pub fn left_mul(a: &CMatrix) -> SuperOperator {
    sandwich(a, &CMatrix::identity(a.nrows(), a.nrows())).expect("square operator")
}

/// X -> X C
pub fn right_mul(c_right: &CMatrix) -> SuperOperator {
    sandwich(&CMatrix::identity(c_right.nrows(), c_right.nrows()), c_right).expect("square operator")
}

/// X -> -i[A, X]
pub fn commutator_map(a: &CMatrix) -> SuperOperator {
    left_mul(a).add(&right_mul(a).scaled(c(-1.0))).scaled(-I)
}

/// X -> L X L^dag - {L^dag L, X}/2
pub fn dissipator(l: &CMatrix) -> SuperOperator {
    let ld = l.adjoint();
    let ldl = &ld * l;
    let mut s = sandwich(l, &ld).expect("square operator");
    s.add_scaled(&left_mul(&ldl), c(-0.5));
    s.add_scaled(&right_mul(&ldl), c(-0.5));
    s
}

fn is_normal(m: &CMatrix) -> bool {
    let n = m.norm();
    if n == 0.0 {
        return true;
    }
    let md = m.adjoint();
    (m * &md - &md * m).norm() <= 1e-12 * n * n
}

/// exp(t m). Normal matrices go through a unitary Schur form, everything else
/// through scaling-and-squaring with a diagonal Pade approximant.
pub fn expm(m: &CMatrix, t: f64) -> Result<CMatrix> {
    if !m.is_square() {
        return Err(Error::DimensionMismatch {
            expected: m.nrows(),
            found: m.ncols(),
        });
    }
    if is_normal(m) {
        expm_normal(m, t)
    } else {
        expm_pade(m, t)
    }
}

/// exp(t m) for normal m via the Schur decomposition.
pub fn expm_normal(m: &CMatrix, t: f64) -> Result<CMatrix> {
    let scaled_norm = m.norm() * t.abs();
    if !scaled_norm.is_finite() {
        return Err(Error::ExpmOverflow(scaled_norm));
    }
    let n = m.nrows();
    if n == 0 {
        return Ok(m.clone());
    }
    let (q, tri) = Schur::new(m.clone()).unpack();
    let diag = CVector::from_iterator(n, (0..n).map(|k| (tri[(k, k)] * t).exp()));
    let out = &q * CMatrix::from_diagonal(&diag) * q.adjoint();
    if out.iter().any(|z| !z.re.is_finite() || !z.im.is_finite()) {
        return Err(Error::ExpmOverflow(scaled_norm));
    }
    Ok(out)
}

const THETA: [(usize, f64); 4] = [
    (3, 1.495585217958292e-2),
    (5, 2.539398330063230e-1),
    (7, 9.504178996162932e-1),
    (9, 2.097847961257068e0),
];
const THETA_13: f64 = 5.371920351148152e0;

fn pade_coefficients(order: usize) -> &'static [f64] {
    match order {
        3 => &[120.0, 60.0, 12.0, 1.0],
        5 => &[30240.0, 15120.0, 3360.0, 420.0, 30.0, 1.0],
        7 => &[17297280.0, 8648640.0, 1995840.0, 277200.0, 25200.0, 1512.0, 56.0, 1.0],
        9 => &[
            17643225600.0,
            8821612800.0,
            2075673600.0,
            302702400.0,
            30270240.0,
            2162160.0,
            110880.0,
            3960.0,
            90.0,
            1.0,
        ],
        _ => &[
            64764752532480000.0,
            32382376266240000.0,
            7771770303897600.0,
            1187353796428800.0,
            129060195264000.0,
            10559470521600.0,
            670442572800.0,
            33522128640.0,
            1323241920.0,
            40840800.0,
            960960.0,
            16380.0,
            182.0,
            1.0,
        ],
    }
}

/// exp(t m) by scaling and squaring with Pade approximants of degree 3..13.
pub fn expm_pade(m: &CMatrix, t: f64) -> Result<CMatrix> {
    let n = m.nrows();
    let a = m * c(t);
    let norm = norm1(&a);
    if !norm.is_finite() {
        return Err(Error::ExpmOverflow(norm));
    }
    let id = CMatrix::identity(n, n);
    for (order, theta) in THETA {
        if norm <= theta {
            let b = pade_coefficients(order);
            let a2 = &a * &a;
            let mut odd = id.clone() * c(b[1]);
            let mut even = id.clone() * c(b[0]);
            let mut pow = id.clone();
            for k in 1..=order / 2 {
                pow = &pow * &a2;
                odd += &pow * c(b[2 * k + 1]);
                even += &pow * c(b[2 * k]);
            }
            let u = &a * odd;
            return pade_solve(&u, &even, 0, norm);
        }
    }
    let s = if norm > THETA_13 {
        (norm / THETA_13).log2().ceil().max(0.0) as i32
    } else {
        0
    };
    if s > 1000 {
        return Err(Error::ExpmOverflow(norm));
    }
    let a = a * c(0.5_f64.powi(s));
    let b = pade_coefficients(13);
    let a2 = &a * &a;
    let a4 = &a2 * &a2;
    let a6 = &a4 * &a2;
    let inner_u = &a6 * (&a6 * c(b[13]) + &a4 * c(b[11]) + &a2 * c(b[9]));
    let u = &a * (inner_u + &a6 * c(b[7]) + &a4 * c(b[5]) + &a2 * c(b[3]) + &id * c(b[1]));
    let inner_v = &a6 * (&a6 * c(b[12]) + &a4 * c(b[10]) + &a2 * c(b[8]));
    let v = inner_v + &a6 * c(b[6]) + &a4 * c(b[4]) + &a2 * c(b[2]) + &id * c(b[0]);
    pade_solve(&u, &v, s as u32, norm)
}

fn pade_solve(u: &CMatrix, v: &CMatrix, squarings: u32, norm: f64) -> Result<CMatrix> {
    let p = v + u;
    let q = v - u;
    let mut r = q.lu().solve(&p).ok_or(Error::Singular("Pade denominator"))?;
    for _ in 0..squarings {
        r = &r * &r;
    }
    if r.iter().any(|z| !z.re.is_finite() || !z.im.is_finite()) {
        return Err(Error::ExpmOverflow(norm));
    }
    Ok(r)
}

/// Eigenvalues (ascending) and eigenvectors of a Hermitian operator.
pub fn hermitian_eigen(a: &CMatrix) -> (Vec<f64>, CMatrix) {
    let h = (a + a.adjoint()) * c(0.5);
    let eig = SymmetricEigen::new(h);
    let mut idx: Vec<usize> = (0..eig.eigenvalues.len()).collect();
    idx.sort_by(|&i, &j| eig.eigenvalues[i].total_cmp(&eig.eigenvalues[j]));
    let vals = idx.iter().map(|&i| eig.eigenvalues[i]).collect();
    let vecs = CMatrix::from_columns(
        &idx.iter().map(|&i| eig.eigenvectors.column(i).into_owned()).collect::<Vec<_>>(),
    );
    (vals, vecs)
}

/// Applies a real function to the spectrum of a Hermitian operator.
pub fn hermitian_function(a: &CMatrix, f: impl Fn(f64) -> f64) -> CMatrix {
    let (vals, vecs) = hermitian_eigen(a);
    let d = CVector::from_iterator(vals.len(), vals.iter().map(|&x| c(f(x))));
    &vecs * CMatrix::from_diagonal(&d) * vecs.adjoint()
}

fn psd_sqrt(a: &CMatrix) -> CMatrix {
    hermitian_function(a, |x| x.max(0.0).sqrt())
}

/// Uhlmann fidelity (Tr sqrt(sqrt(r1) r2 sqrt(r1)))^2, in [0, 1].
pub fn fidelity(r1: &DensityMatrix, r2: &DensityMatrix) -> Result<f64> {
    if r1.dim() != r2.dim() {
        return Err(Error::DimensionMismatch {
            expected: r1.dim(),
            found: r2.dim(),
        });
    }
    let s = psd_sqrt(r1.matrix());
    let inner = &s * r2.matrix() * &s;
    let (vals, _) = hermitian_eigen(&inner);
    let mut acc = 0.0;
    for v in vals {
        if v < -1e-8 {
            return Err(Error::InvalidState(format!("fidelity kernel eigenvalue {v:.3e}")));
        }
        acc += v.max(0.0).sqrt();
    }
    Ok((acc * acc).clamp(0.0, 1.0))
}

/// Bures angle arccos(sqrt(F)).
pub fn bures_distance(r1: &DensityMatrix, r2: &DensityMatrix) -> Result<f64> {
    Ok(fidelity(r1, r2)?.sqrt().clamp(0.0, 1.0).acos())
}

/// Half the trace norm of r1 - r2.
pub fn trace_distance(r1: &DensityMatrix, r2: &DensityMatrix) -> f64 {
    let (vals, _) = hermitian_eigen(&(r1.matrix() - r2.matrix()));
    0.5 * vals.iter().map(|v| v.abs()).sum::<f64>()
}

/// Hermitian F with exp(-i F) = u and spectrum in [-pi, pi).
pub fn hermitian_unitary_log(u: &CMatrix) -> Result<QOperator> {
    let n = u.nrows();
    if !u.is_square() {
        return Err(Error::DimensionMismatch {
            expected: n,
            found: u.ncols(),
        });
    }
    let dev = max_abs(&(u.adjoint() * u - CMatrix::identity(n, n)));
    if dev > 1e-10 {
        return Err(Error::NotUnitary(dev));
    }
    let (q, tri) = Schur::new(u.clone()).unpack();
    let diag = CVector::from_iterator(
        n,
        (0..n).map(|k| {
            let mut theta = tri[(k, k)].arg();
            if theta <= -std::f64::consts::PI {
                theta = std::f64::consts::PI;
            }
            c(-theta)
        }),
    );
    let f = &q * CMatrix::from_diagonal(&diag) * q.adjoint();
    let f = (&f + f.adjoint()) * c(0.5);
    QOperator::new(f)
}
