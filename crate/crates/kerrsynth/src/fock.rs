//! Truncated Fock-space linear algebra: states, operators, tensor structure,
//! spectral decomposition, partial trace/transpose, trace norm.
//!
//! Factor ordering is fixed for the whole crate: the qubit factor (dim 2), if
//! present, comes first, followed by oscillator factors of dimension n_max+1.
//! Flat indices are row-major over the factor list.

use nalgebra::{DMatrix, DVector};
use num_complex::Complex64;

use crate::error::{Error, Result};

pub type C64 = Complex64;

pub const HERMITICITY_TOL: f64 = 1e-12;
pub const UNITARITY_TOL: f64 = 1e-10;
pub const TRACE_TOL: f64 = 1e-10;
pub const POSITIVITY_TOL: f64 = 1e-9;
pub const TRUNCATION_LIMIT: f64 = 1e-6;

/// Ordered list of subsystem dimensions.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct FockSpace {
    factors: Vec<usize>,
}

impl FockSpace {
    pub fn new(factors: Vec<usize>) -> Result<Self> {
        if factors.is_empty() || factors.iter().any(|&d| d < 1) {
            return Err(Error::InvalidParam(
                "every factor dimension must be >= 1".into(),
            ));
        }
        Ok(Self { factors })
    }

    /// A single oscillator truncated at n_max.
    pub fn single_mode(n_max: usize) -> Self {
        Self { factors: vec![n_max + 1] }
    }

    /// Two oscillators, each truncated at n_max.
    pub fn two_mode(n_max: usize) -> Self {
        Self { factors: vec![n_max + 1, n_max + 1] }
    }

    /// Qubit followed by the given oscillator space.
    pub fn with_qubit(osc: &FockSpace) -> Self {
        let mut factors = vec![2];
        factors.extend_from_slice(&osc.factors);
        Self { factors }
    }

    pub fn factors(&self) -> &[usize] {
        &self.factors
    }

    pub fn total_dim(&self) -> usize {
        self.factors.iter().product()
    }

    /// Row-major strides matching the factor order.
    pub fn strides(&self) -> Vec<usize> {
        let mut strides = vec![1usize; self.factors.len()];
        for i in (0..self.factors.len().saturating_sub(1)).rev() {
            strides[i] = strides[i + 1] * self.factors[i + 1];
        }
        strides
    }

    pub fn flat_index(&self, multi: &[usize]) -> usize {
        debug_assert_eq!(multi.len(), self.factors.len());
        self.strides()
            .iter()
            .zip(multi)
            .map(|(s, m)| s * m)
            .sum()
    }

    pub fn multi_index(&self, mut flat: usize) -> Vec<usize> {
        let strides = self.strides();
        strides
            .iter()
            .map(|&s| {
                let q = flat / s;
                flat %= s;
                q
            })
            .collect()
    }

    /// Concatenation of factor lists, used by `tensor`.
    pub fn join(&self, other: &FockSpace) -> FockSpace {
        let mut factors = self.factors.clone();
        factors.extend_from_slice(&other.factors);
        FockSpace { factors }
    }
}

/// Structural flags carried by an operator. When set they are verified
/// properties, never hints.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct OpFlags {
    pub diagonal: bool,
    pub hermitian: bool,
    pub unitary: bool,
}

#[derive(Debug, Clone)]
pub struct Operator {
    pub space: FockSpace,
    pub matrix: DMatrix<C64>,
    pub flags: OpFlags,
}

impl Operator {
    pub fn new(space: FockSpace, matrix: DMatrix<C64>) -> Self {
        assert_eq!(space.total_dim(), matrix.nrows());
        assert_eq!(matrix.nrows(), matrix.ncols());
        Self { space, matrix, flags: OpFlags::default() }
    }

    pub fn identity(space: FockSpace) -> Self {
        let d = space.total_dim();
        Self {
            space,
            matrix: DMatrix::identity(d, d),
            flags: OpFlags { diagonal: true, hermitian: true, unitary: true },
        }
    }

    pub fn from_diagonal(space: FockSpace, diag: &DVector<C64>) -> Self {
        assert_eq!(space.total_dim(), diag.len());
        let matrix = DMatrix::from_diagonal(diag);
        let hermitian = diag.iter().all(|z| z.im == 0.0);
        let unitary = diag.iter().all(|z| (z.norm() - 1.0).abs() < UNITARITY_TOL);
        Self { space, matrix, flags: OpFlags { diagonal: true, hermitian, unitary } }
    }

    pub fn dim(&self) -> usize {
        self.matrix.nrows()
    }

    /// Diagonal entries, available only when the diagonal flag is set.
    pub fn diagonal(&self) -> Option<DVector<C64>> {
        if self.flags.diagonal {
            Some(self.matrix.diagonal())
        } else {
            None
        }
    }

    pub fn dagger(&self) -> Operator {
        let mut out = self.clone();
        out.matrix = self.matrix.adjoint();
        out
    }

    pub fn max_abs(&self) -> f64 {
        self.matrix.iter().map(|z| z.norm()).fold(0.0, f64::max)
    }

    /// Re-derive the flags from the entries.
    pub fn detect_flags(&mut self) {
        let d = self.dim();
        let mut diagonal = true;
        for i in 0..d {
            for j in 0..d {
                if i != j && self.matrix[(i, j)] != C64::new(0.0, 0.0) {
                    diagonal = false;
                    break;
                }
            }
            if !diagonal {
                break;
            }
        }
        let herm_dev = (&self.matrix - self.matrix.adjoint())
            .iter()
            .map(|z| z.norm())
            .fold(0.0, f64::max);
        let prod = self.matrix.adjoint() * &self.matrix;
        let unit_dev = (&prod - DMatrix::<C64>::identity(d, d))
            .iter()
            .map(|z| z.norm())
            .fold(0.0, f64::max);
        self.flags = OpFlags {
            diagonal,
            hermitian: herm_dev < HERMITICITY_TOL,
            unitary: unit_dev < UNITARITY_TOL,
        };
    }

    /// Check that every set flag actually holds. Flags never lie.
    pub fn validate_flags(&self) -> Result<()> {
        let d = self.dim();
        if self.flags.diagonal {
            for i in 0..d {
                for j in 0..d {
                    if i != j && self.matrix[(i, j)] != C64::new(0.0, 0.0) {
                        return Err(Error::InvalidParam(
                            "diagonal flag set on a non-diagonal operator".into(),
                        ));
                    }
                }
            }
        }
        if self.flags.hermitian {
            let dev = (&self.matrix - self.matrix.adjoint())
                .iter()
                .map(|z| z.norm())
                .fold(0.0, f64::max);
            if dev >= HERMITICITY_TOL {
                return Err(Error::NonHermitian(dev));
            }
        }
        if self.flags.unitary {
            let prod = self.matrix.adjoint() * &self.matrix;
            let dev = (&prod - DMatrix::<C64>::identity(d, d))
                .iter()
                .map(|z| z.norm())
                .fold(0.0, f64::max);
            if dev >= UNITARITY_TOL {
                return Err(Error::InvalidParam(format!(
                    "unitary flag set but max|U^dag U - 1| = {dev:.3e}"
                )));
            }
        }
        Ok(())
    }
}

#[derive(Debug, Clone)]
pub struct Ket {
    pub space: FockSpace,
    pub amplitudes: DVector<C64>,
    /// Unnormalized intermediates must be explicitly flagged.
    pub normalized: bool,
}

impl Ket {
    pub fn new(space: FockSpace, amplitudes: DVector<C64>) -> Self {
        assert_eq!(space.total_dim(), amplitudes.len());
        let normalized = (amplitudes.norm() - 1.0).abs() < 1e-10;
        Self { space, amplitudes, normalized }
    }

    pub fn basis_state(space: FockSpace, index: usize) -> Self {
        let d = space.total_dim();
        let mut amp = DVector::zeros(d);
        amp[index] = C64::new(1.0, 0.0);
        Self { space, amplitudes: amp, normalized: true }
    }

    pub fn norm(&self) -> f64 {
        self.amplitudes.norm()
    }

    pub fn inner(&self, other: &Ket) -> C64 {
        self.amplitudes.dotc(&other.amplitudes)
    }

    pub fn apply(&self, op: &Operator) -> Ket {
        assert_eq!(self.space, op.space);
        let amplitudes = &op.matrix * &self.amplitudes;
        Ket::new(self.space.clone(), amplitudes)
    }
}

#[derive(Debug, Clone)]
pub struct DensityMatrix {
    pub space: FockSpace,
    pub matrix: DMatrix<C64>,
}

impl DensityMatrix {
    pub fn from_pure(psi: &Ket) -> Self {
        let v = &psi.amplitudes;
        let matrix = v * v.adjoint();
        Self { space: psi.space.clone(), matrix }
    }

    pub fn trace(&self) -> f64 {
        self.matrix.diagonal().iter().map(|z| z.re).sum()
    }

    pub fn dim(&self) -> usize {
        self.matrix.nrows()
    }

    /// Hermitian within 1e-12, unit trace within 1e-10, min eigenvalue >= -1e-9.
    pub fn validate(&self) -> Result<()> {
        let herm_dev = (&self.matrix - self.matrix.adjoint())
            .iter()
            .map(|z| z.norm())
            .fold(0.0, f64::max);
        if herm_dev >= HERMITICITY_TOL {
            return Err(Error::NonHermitian(herm_dev));
        }
        let tr = self.trace();
        if (tr - 1.0).abs() >= TRACE_TOL {
            return Err(Error::InvalidParam(format!("trace = {tr} != 1")));
        }
        let (eigvals, _) = hermitian_eigen(&self.matrix);
        let min = eigvals.iter().cloned().fold(f64::INFINITY, f64::min);
        if min < -POSITIVITY_TOL {
            return Err(Error::InvalidParam(format!("min eigenvalue {min:.3e}")));
        }
        Ok(())
    }

    /// Tr[op rho] for an operator on the same space.
    pub fn expect(&self, op: &Operator) -> C64 {
        assert_eq!(self.space, op.space);
        let d = self.dim();
        let mut acc = C64::new(0.0, 0.0);
        for i in 0..d {
            for j in 0..d {
                acc += op.matrix[(i, j)] * self.matrix[(j, i)];
            }
        }
        acc
    }
}

/// Coherent state |beta> truncated at n_max, renormalized. Returns the state
/// and the truncation weight 1 - sum |c_n|^2 before renormalization.
pub fn coherent_ket(beta: C64, n_max: usize) -> Result<(Ket, f64)> {
    if n_max < 1 {
        return Err(Error::InvalidParam("n_max must be >= 1".into()));
    }
    let d = n_max + 1;
    let mut amp = DVector::zeros(d);
    let pref = (-beta.norm_sqr() / 2.0).exp();
    let mut term = C64::new(pref, 0.0); // beta^n / sqrt(n!) running product
    amp[0] = term;
    for n in 1..d {
        term *= beta / C64::new((n as f64).sqrt(), 0.0);
        amp[n] = term;
    }
    let captured: f64 = amp.iter().map(|z| z.norm_sqr()).sum();
    let weight = 1.0 - captured;
    if weight > TRUNCATION_LIMIT {
        return Err(Error::TruncationTooSmall { weight, limit: TRUNCATION_LIMIT });
    }
    amp /= C64::new(captured.sqrt(), 0.0);
    Ok((
        Ket { space: FockSpace::single_mode(n_max), amplitudes: amp, normalized: true },
        weight,
    ))
}

/// Annihilation operator and number operator on a single truncated mode.
pub fn ladder_ops(n_max: usize) -> (Operator, Operator) {
    let d = n_max + 1;
    let space = FockSpace::single_mode(n_max);
    let mut a = DMatrix::zeros(d, d);
    for n in 1..d {
        a[(n - 1, n)] = C64::new((n as f64).sqrt(), 0.0);
    }
    let annihilation = Operator::new(space.clone(), a);
    let diag = DVector::from_fn(d, |n, _| C64::new(n as f64, 0.0));
    let number = Operator::from_diagonal(space, &diag);
    (annihilation, number)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum PauliAxis {
    X,
    Y,
    Z,
}

pub fn pauli(axis: PauliAxis) -> Operator {
    let space = FockSpace::new(vec![2]).unwrap();
    let z = |re: f64, im: f64| C64::new(re, im);
    let m = match axis {
        PauliAxis::X => DMatrix::from_row_slice(2, 2, &[z(0., 0.), z(1., 0.), z(1., 0.), z(0., 0.)]),
        PauliAxis::Y => DMatrix::from_row_slice(2, 2, &[z(0., 0.), z(0., -1.), z(0., 1.), z(0., 0.)]),
        PauliAxis::Z => DMatrix::from_row_slice(2, 2, &[z(1., 0.), z(0., 0.), z(0., 0.), z(-1., 0.)]),
    };
    let mut op = Operator::new(space, m);
    op.flags = OpFlags {
        diagonal: axis == PauliAxis::Z,
        hermitian: true,
        unitary: true,
    };
    op
}

/// Kronecker product of operators in the declared factor order.
pub fn tensor_ops(parts: &[&Operator]) -> Operator {
    assert!(!parts.is_empty());
    let mut space = parts[0].space.clone();
    let mut matrix = parts[0].matrix.clone();
    let mut flags = parts[0].flags;
    for p in &parts[1..] {
        space = space.join(&p.space);
        matrix = matrix.kronecker(&p.matrix);
        flags.diagonal &= p.flags.diagonal;
        flags.hermitian &= p.flags.hermitian;
        flags.unitary &= p.flags.unitary;
    }
    Operator { space, matrix, flags }
}

pub fn tensor_kets(parts: &[&Ket]) -> Ket {
    assert!(!parts.is_empty());
    let mut space = parts[0].space.clone();
    let mut amp = parts[0].amplitudes.clone();
    let mut normalized = parts[0].normalized;
    for p in &parts[1..] {
        space = space.join(&p.space);
        amp = amp.kronecker(&p.amplitudes);
        normalized &= p.normalized;
    }
    Ket { space, amplitudes: amp, normalized }
}

/// Eigendecomposition of a Hermitian matrix: (real eigenvalues, eigenvectors
/// as columns).
pub fn hermitian_eigen(m: &DMatrix<C64>) -> (DVector<f64>, DMatrix<C64>) {
    let eig = m.clone().symmetric_eigen();
    (eig.eigenvalues, eig.eigenvectors)
}

/// f(A) for Hermitian A via the spectral theorem; elementwise on the diagonal
/// when A is flagged diagonal.
pub fn hermitian_fn(a: &Operator, f: impl Fn(f64) -> C64) -> Result<Operator> {
    if !a.flags.hermitian {
        let dev = (&a.matrix - a.matrix.adjoint())
            .iter()
            .map(|z| z.norm())
            .fold(0.0, f64::max);
        return Err(Error::NonHermitian(dev));
    }
    if a.flags.diagonal {
        let diag = DVector::from_fn(a.dim(), |i, _| f(a.matrix[(i, i)].re));
        return Ok(Operator::from_diagonal(a.space.clone(), &diag));
    }
    let (vals, vecs) = hermitian_eigen(&a.matrix);
    let fd = DMatrix::from_diagonal(&DVector::from_fn(vals.len(), |i, _| f(vals[i])));
    let matrix = &vecs * fd * vecs.adjoint();
    let mut out = Operator::new(a.space.clone(), matrix);
    out.detect_flags();
    Ok(out)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum TrigKind {
    Sin,
    Cos,
}

/// sin(theta A) or cos(theta A) for Hermitian A.
pub fn operator_trig(a: &Operator, theta: f64, kind: TrigKind) -> Result<Operator> {
    let mut out = hermitian_fn(a, |x| match kind {
        TrigKind::Sin => C64::new((theta * x).sin(), 0.0),
        TrigKind::Cos => C64::new((theta * x).cos(), 0.0),
    })?;
    out.flags.hermitian = true;
    Ok(out)
}

/// Trace over the complement of `keep` (ascending factor indices).
pub fn partial_trace(rho: &DensityMatrix, keep: &[usize]) -> Result<DensityMatrix> {
    let nf = rho.space.factors().len();
    if keep.is_empty() {
        return Err(Error::EmptyKeepSet);
    }
    for &k in keep {
        if k >= nf {
            return Err(Error::InvalidFactor { index: k, nfactors: nf });
        }
    }
    let mut keep = keep.to_vec();
    keep.sort_unstable();
    keep.dedup();
    let traced: Vec<usize> = (0..nf).filter(|i| !keep.contains(i)).collect();
    let out_factors: Vec<usize> = keep.iter().map(|&i| rho.space.factors()[i]).collect();
    let out_space = FockSpace::new(out_factors)?;
    let dout = out_space.total_dim();
    let mut out = DMatrix::zeros(dout, dout);
    let d = rho.dim();
    // Walk every input element once, accumulating those whose traced indices
    // coincide on both sides.
    for i in 0..d {
        let mi = rho.space.multi_index(i);
        for j in 0..d {
            let mj = rho.space.multi_index(j);
            if traced.iter().all(|&t| mi[t] == mj[t]) {
                let oi: Vec<usize> = keep.iter().map(|&k| mi[k]).collect();
                let oj: Vec<usize> = keep.iter().map(|&k| mj[k]).collect();
                out[(out_space.flat_index(&oi), out_space.flat_index(&oj))] +=
                    rho.matrix[(i, j)];
            }
        }
    }
    Ok(DensityMatrix { space: out_space, matrix: out })
}

/// Transpose on the chosen factor only. The result is Hermitian when the
/// input is.
pub fn partial_transpose(rho: &DensityMatrix, factor: usize) -> Result<Operator> {
    let nf = rho.space.factors().len();
    if factor >= nf {
        return Err(Error::InvalidFactor { index: factor, nfactors: nf });
    }
    let d = rho.dim();
    let mut out = DMatrix::zeros(d, d);
    for i in 0..d {
        let mut mi = rho.space.multi_index(i);
        for j in 0..d {
            let mut mj = rho.space.multi_index(j);
            std::mem::swap(&mut mi[factor], &mut mj[factor]);
            let ti = rho.space.flat_index(&mi);
            let tj = rho.space.flat_index(&mj);
            out[(ti, tj)] = rho.matrix[(i, j)];
            std::mem::swap(&mut mi[factor], &mut mj[factor]);
        }
    }
    let mut op = Operator::new(rho.space.clone(), out);
    op.flags.hermitian = true;
    Ok(op)
}

/// Sum of |eigenvalue| for a Hermitian operator.
pub fn trace_norm(m: &Operator) -> Result<f64> {
    if !m.flags.hermitian {
        let dev = (&m.matrix - m.matrix.adjoint())
            .iter()
            .map(|z| z.norm())
            .fold(0.0, f64::max);
        return Err(Error::NonHermitian(dev));
    }
    let (vals, _) = hermitian_eigen(&m.matrix);
    Ok(vals.iter().map(|v| v.abs()).sum())
}
