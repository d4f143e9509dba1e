//! Construction of the qubit-coupling unitaries, the geometric cycle
//! U_xyxy = U_x U_y U_x† U_y†, the conditional operators O_1/O_2 and the
//! target unitary, for generic commuting Hermitian pairs (A, B) and for the
//! Kerr specializations A = B = n (self) and A = n_1, B = n_2 (cross).
//!
//! Qubit convention: the ancilla ground state |g> is the sigma_z = -1
//! eigenstate (basis index 1). With that choice <g|U_xyxy|g> reproduces
//! O_1 = 1 - 2 sin^2(tau A) sin^2(tau B) + (i/2) sin(2 tau A) sin(2 tau B)
//! and the matching target is exp[+i T A B] with T = 2 R tau^2.

use nalgebra::{DMatrix, DVector, Matrix2};

use crate::error::{Error, Result};
use crate::fock::{
    hermitian_fn, ladder_ops, operator_trig, pauli, tensor_ops, FockSpace, Ket, Operator,
    PauliAxis, TrigKind, C64,
};

pub const COMMUTATOR_TOL: f64 = 1e-10;

/// Basis index of the qubit ground state (sigma_z = -1 eigenstate).
pub const QUBIT_GROUND: usize = 1;
/// Basis index of the qubit excited state.
pub const QUBIT_EXCITED: usize = 0;

/// A commuting Hermitian pair with per-step strength and repetition count.
#[derive(Debug, Clone)]
pub struct GateSpec {
    a: Operator,
    b: Operator,
    tau: f64,
    reps: usize,
    axes: (PauliAxis, PauliAxis),
}

impl GateSpec {
    /// Checks Hermiticity of both operators and [A, B] = 0 within 1e-10.
    pub fn new(a: Operator, b: Operator, tau: f64, reps: usize) -> Result<Self> {
        if tau <= 0.0 {
            return Err(Error::InvalidParam("tau must be > 0".into()));
        }
        if reps == 0 {
            return Err(Error::InvalidParam("R must be >= 1".into()));
        }
        if a.space != b.space {
            return Err(Error::DimensionMismatch(
                "A and B must act on the same oscillator space".into(),
            ));
        }
        for op in [&a, &b] {
            let dev = (&op.matrix - op.matrix.adjoint())
                .iter()
                .map(|z| z.norm())
                .fold(0.0, f64::max);
            if dev >= 1e-12 {
                return Err(Error::NonHermitian(dev));
            }
        }
        let comm = &a.matrix * &b.matrix - &b.matrix * &a.matrix;
        let cnorm = comm.iter().map(|z| z.norm()).fold(0.0, f64::max);
        if cnorm >= COMMUTATOR_TOL {
            return Err(Error::NonCommuting(cnorm));
        }
        Ok(Self { a, b, tau, reps, axes: (PauliAxis::X, PauliAxis::Y) })
    }

    pub fn a(&self) -> &Operator {
        &self.a
    }

    pub fn b(&self) -> &Operator {
        &self.b
    }

    pub fn tau(&self) -> f64 {
        self.tau
    }

    pub fn reps(&self) -> usize {
        self.reps
    }

    pub fn axes(&self) -> (PauliAxis, PauliAxis) {
        self.axes
    }

    /// Total interaction strength T = 2 R tau^2.
    pub fn total_strength(&self) -> f64 {
        2.0 * self.reps as f64 * self.tau * self.tau
    }

    pub fn osc_space(&self) -> &FockSpace {
        &self.a.space
    }

    pub fn is_diagonal(&self) -> bool {
        self.a.flags.diagonal && self.b.flags.diagonal
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum KerrKind {
    SelfKerr,
    CrossKerr,
}

/// Kerr parameterization by (kind, T, tau, n_max); R is derived by rounding.
#[derive(Debug, Clone)]
pub struct KerrSpec {
    pub kind: KerrKind,
    pub t_total: f64,
    pub tau: f64,
    pub n_max: usize,
    pub reps: usize,
    /// |T - 2 R tau^2| / T, the rounding residue.
    pub residue: f64,
}

impl KerrSpec {
    pub fn new(kind: KerrKind, t_total: f64, tau: f64, n_max: usize) -> Result<Self> {
        if t_total <= 0.0 || tau <= 0.0 {
            return Err(Error::InvalidParam("T and tau must be > 0".into()));
        }
        let reps = (t_total / (2.0 * tau * tau)).round() as usize;
        if reps == 0 {
            return Err(Error::InvalidParam(
                "T/(2 tau^2) rounds to zero repetitions".into(),
            ));
        }
        let realized = 2.0 * reps as f64 * tau * tau;
        let residue = (t_total - realized).abs() / t_total;
        Ok(Self { kind, t_total, tau, n_max, reps, residue })
    }

    /// Kerr spec with R fixed exactly and tau derived as sqrt(T / 2R).
    pub fn with_reps(kind: KerrKind, t_total: f64, reps: usize, n_max: usize) -> Result<Self> {
        if t_total <= 0.0 || reps == 0 {
            return Err(Error::InvalidParam("T must be > 0 and R >= 1".into()));
        }
        let tau = (t_total / (2.0 * reps as f64)).sqrt();
        Ok(Self { kind, t_total, tau, n_max, reps, residue: 0.0 })
    }

    pub fn gate_spec(&self) -> Result<GateSpec> {
        let (_, n) = ladder_ops(self.n_max);
        match self.kind {
            KerrKind::SelfKerr => GateSpec::new(n.clone(), n, self.tau, self.reps),
            KerrKind::CrossKerr => {
                let id = Operator::identity(FockSpace::single_mode(self.n_max));
                let a = tensor_ops(&[&n, &id]);
                let b = tensor_ops(&[&id, &n]);
                GateSpec::new(a, b, self.tau, self.reps)
            }
        }
    }
}

/// exp[i tau sigma_axis ⊗ A] on the (qubit, oscillator) space, built in
/// closed form as 1 ⊗ cos(tau A) + i sigma_axis ⊗ sin(tau A).
pub fn coupling_unitary(a: &Operator, axis: PauliAxis, tau: f64) -> Result<Operator> {
    let c = operator_trig(a, tau, TrigKind::Cos)?;
    let s = operator_trig(a, tau, TrigKind::Sin)?;
    let qubit = FockSpace::new(vec![2]).unwrap();
    let i2 = Operator::identity(qubit);
    let sigma = pauli(axis);
    let mut matrix = tensor_ops(&[&i2, &c]).matrix;
    matrix += tensor_ops(&[&sigma, &s]).matrix * C64::new(0.0, 1.0);
    let mut out = Operator::new(FockSpace::with_qubit(&a.space), matrix);
    out.detect_flags();
    out.flags.unitary = true;
    Ok(out)
}

/// The four-factor product U_x U_y U_x† U_y† on the joint space.
pub fn geometric_cycle(spec: &GateSpec) -> Result<Operator> {
    let ux = coupling_unitary(&spec.a, spec.axes.0, spec.tau)?;
    let uy = coupling_unitary(&spec.b, spec.axes.1, spec.tau)?;
    let matrix = &ux.matrix * &uy.matrix * ux.matrix.adjoint() * uy.matrix.adjoint();
    let mut out = Operator::new(ux.space.clone(), matrix);
    out.detect_flags();
    Ok(out)
}

/// The same cycle from its closed form
/// 1 - 2 sin^2(tA) sin^2(tB)
///   + i sin(2tA) sin^2(tB) sigma_x
///   - i sin^2(tA) sin(2tB) sigma_y
///   - (i/2) sin(2tA) sin(2tB) sigma_z.
pub fn geometric_cycle_closed_form(spec: &GateSpec) -> Result<Operator> {
    let t = spec.tau;
    let sa = operator_trig(&spec.a, t, TrigKind::Sin)?;
    let sb = operator_trig(&spec.b, t, TrigKind::Sin)?;
    let s2a = operator_trig(&spec.a, 2.0 * t, TrigKind::Sin)?;
    let s2b = operator_trig(&spec.b, 2.0 * t, TrigKind::Sin)?;
    let sa2 = &sa.matrix * &sa.matrix;
    let sb2 = &sb.matrix * &sb.matrix;
    let d = spec.osc_space().total_dim();

    let c0 = DMatrix::<C64>::identity(d, d) - (&sa2 * &sb2) * C64::new(2.0, 0.0);
    let cx = (&s2a.matrix * &sb2) * C64::new(0.0, 1.0);
    let cy = (&sa2 * &s2b.matrix) * C64::new(0.0, -1.0);
    let cz = (&s2a.matrix * &s2b.matrix) * C64::new(0.0, -0.5);

    let qubit = FockSpace::new(vec![2]).unwrap();
    let wrap = |m: DMatrix<C64>| Operator::new(spec.osc_space().clone(), m);
    let mut matrix = tensor_ops(&[&Operator::identity(qubit), &wrap(c0)]).matrix;
    matrix += tensor_ops(&[&pauli(PauliAxis::X), &wrap(cx)]).matrix;
    matrix += tensor_ops(&[&pauli(PauliAxis::Y), &wrap(cy)]).matrix;
    matrix += tensor_ops(&[&pauli(PauliAxis::Z), &wrap(cz)]).matrix;
    let mut out = Operator::new(FockSpace::with_qubit(spec.osc_space()), matrix);
    out.detect_flags();
    Ok(out)
}

/// O_1 = <g|U_xyxy|g> and O_2 = <e|U_xyxy|g>, both on the oscillator space.
/// Completeness O_1†O_1 + O_2†O_2 = 1 holds by unitarity of the cycle.
pub fn conditional_ops(spec: &GateSpec) -> Result<(Operator, Operator)> {
    let t = spec.tau;
    if spec.is_diagonal() {
        let d = spec.osc_space().total_dim();
        let da = spec.a.matrix.diagonal();
        let db = spec.b.matrix.diagonal();
        let mut o1 = DVector::zeros(d);
        let mut o2 = DVector::zeros(d);
        for i in 0..d {
            let (v1, v2) = conditional_eigenvalues(da[i].re, db[i].re, t);
            o1[i] = v1;
            o2[i] = v2;
        }
        return Ok((
            Operator::from_diagonal(spec.osc_space().clone(), &o1),
            Operator::from_diagonal(spec.osc_space().clone(), &o2),
        ));
    }
    let sa = operator_trig(&spec.a, t, TrigKind::Sin)?;
    let sb = operator_trig(&spec.b, t, TrigKind::Sin)?;
    let s2a = operator_trig(&spec.a, 2.0 * t, TrigKind::Sin)?;
    let s2b = operator_trig(&spec.b, 2.0 * t, TrigKind::Sin)?;
    let sa2 = &sa.matrix * &sa.matrix;
    let sb2 = &sb.matrix * &sb.matrix;
    let d = spec.osc_space().total_dim();
    let o1 = DMatrix::<C64>::identity(d, d) - (&sa2 * &sb2) * C64::new(2.0, 0.0)
        + (&s2a.matrix * &s2b.matrix) * C64::new(0.0, 0.5);
    let o2 =
        (&sa2 * &s2b.matrix) * C64::new(-1.0, 0.0) + (&s2a.matrix * &sb2) * C64::new(0.0, 1.0);
    let mut op1 = Operator::new(spec.osc_space().clone(), o1);
    let mut op2 = Operator::new(spec.osc_space().clone(), o2);
    op1.detect_flags();
    op2.detect_flags();
    Ok((op1, op2))
}

/// Scalar eigenvalues of (O_1, O_2) at a joint eigenvalue pair (m_A, m_B).
pub fn conditional_eigenvalues(m_a: f64, m_b: f64, tau: f64) -> (C64, C64) {
    let sa = (tau * m_a).sin();
    let sb = (tau * m_b).sin();
    let s2a = (2.0 * tau * m_a).sin();
    let s2b = (2.0 * tau * m_b).sin();
    let o1 = C64::new(1.0 - 2.0 * sa * sa * sb * sb, 0.5 * s2a * s2b);
    let o2 = C64::new(-sa * sa * s2b, s2a * sb * sb);
    (o1, o2)
}

/// The ideal repeated target exp[+i T A B] with T = 2 R tau^2, via spectral
/// phases. The sign matches the phase of O_1 so that fidelities approach one.
pub fn target_unitary(spec: &GateSpec) -> Result<Operator> {
    let t_total = spec.total_strength();
    if spec.is_diagonal() {
        let d = spec.osc_space().total_dim();
        let da = spec.a.matrix.diagonal();
        let db = spec.b.matrix.diagonal();
        let diag = DVector::from_fn(d, |i, _| {
            C64::new(0.0, t_total * da[i].re * db[i].re).exp()
        });
        return Ok(Operator::from_diagonal(spec.osc_space().clone(), &diag));
    }
    // Commuting Hermitian pair: diagonalize the product AB (Hermitian here)
    // and apply the phase on its spectrum.
    let ab = &spec.a.matrix * &spec.b.matrix;
    let mut prod = Operator::new(spec.osc_space().clone(), ab);
    prod.detect_flags();
    if !prod.flags.hermitian {
        return Err(Error::NonHermitian(f64::NAN));
    }
    let mut out = hermitian_fn(&prod, |x| C64::new(0.0, t_total * x).exp())?;
    out.flags.unitary = true;
    Ok(out)
}

/// O_1 raised to the R-th power. Diagonal fast path uses eigenvalue powers.
pub fn repeated_conditional(spec: &GateSpec) -> Result<Operator> {
    let (o1, _) = conditional_ops(spec)?;
    Ok(operator_power(&o1, spec.reps))
}

/// M^r by eigenvalue powers when diagonal, binary powering otherwise.
pub fn operator_power(op: &Operator, r: usize) -> Operator {
    if let Some(diag) = op.diagonal() {
        let powered = DVector::from_fn(diag.len(), |i, _| diag[i].powu(r as u32));
        return Operator::from_diagonal(op.space.clone(), &powered);
    }
    let d = op.dim();
    let mut acc = DMatrix::<C64>::identity(d, d);
    let mut base = op.matrix.clone();
    let mut k = r;
    while k > 0 {
        if k & 1 == 1 {
            acc = &acc * &base;
        }
        base = &base * &base;
        k >>= 1;
    }
    let mut out = Operator::new(op.space.clone(), acc);
    out.detect_flags();
    out
}

/// Max-norm difference between <g|(U_xyxy)^R|g> (no qubit re-initialization)
/// and (<g|U_xyxy|g>)^R = O_1^R. Vanishes as tau -> 0 at fixed T.
pub fn no_reinit_check(spec: &GateSpec) -> Result<f64> {
    if spec.is_diagonal() {
        // Each joint oscillator eigenvalue sees an independent 2x2 qubit
        // cycle; power the blocks directly.
        let t = spec.tau;
        let da = spec.a.matrix.diagonal();
        let db = spec.b.matrix.diagonal();
        let mut max_dev: f64 = 0.0;
        for i in 0..da.len() {
            let block = cycle_qubit_block(da[i].re, db[i].re, t);
            let powered = matrix2_power(&block, spec.reps);
            let (o1, _) = conditional_eigenvalues(da[i].re, db[i].re, t);
            let dev = (powered[(QUBIT_GROUND, QUBIT_GROUND)] - o1.powu(spec.reps as u32)).norm();
            max_dev = max_dev.max(dev);
        }
        return Ok(max_dev);
    }
    let cycle = geometric_cycle(spec)?;
    let powered = operator_power(&cycle, spec.reps);
    let d = spec.osc_space().total_dim();
    // <g| . |g> block on the joint space (qubit factor first).
    let g = QUBIT_GROUND;
    let mut block = DMatrix::<C64>::zeros(d, d);
    for i in 0..d {
        for j in 0..d {
            block[(i, j)] = powered.matrix[(g * d + i, g * d + j)];
        }
    }
    let o1r = repeated_conditional(spec)?;
    let dev = (&block - &o1r.matrix).iter().map(|z| z.norm()).fold(0.0, f64::max);
    Ok(dev)
}

/// The 2x2 qubit block of U_xyxy at a joint oscillator eigenvalue (m_A, m_B).
pub fn cycle_qubit_block(m_a: f64, m_b: f64, tau: f64) -> Matrix2<C64> {
    let sa = (tau * m_a).sin();
    let sb = (tau * m_b).sin();
    let s2a = (2.0 * tau * m_a).sin();
    let s2b = (2.0 * tau * m_b).sin();
    let c0 = C64::new(1.0 - 2.0 * sa * sa * sb * sb, 0.0);
    let cx = C64::new(0.0, s2a * sb * sb);
    let cy = C64::new(0.0, -sa * sa * s2b);
    let cz = C64::new(0.0, -0.5 * s2a * s2b);
    // c0 I + cx sigma_x + cy sigma_y + cz sigma_z
    Matrix2::new(
        c0 + cz,
        cx - cy * C64::new(0.0, 1.0),
        cx + cy * C64::new(0.0, 1.0),
        c0 - cz,
    )
}

fn matrix2_power(m: &Matrix2<C64>, r: usize) -> Matrix2<C64> {
    let mut acc = Matrix2::identity();
    let mut base = *m;
    let mut k = r;
    while k > 0 {
        if k & 1 == 1 {
            acc *= base;
        }
        base *= base;
        k >>= 1;
    }
    acc
}

/// Qubit ground-state ket |g> (sigma_z = -1 eigenstate).
pub fn qubit_ground() -> Ket {
    Ket::basis_state(FockSpace::new(vec![2]).unwrap(), QUBIT_GROUND)
}
