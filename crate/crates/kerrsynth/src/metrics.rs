//! Figures of merit: success probability and fidelities, the Q_f/Q_s diagonal
//! relation and support bound, Wigner functions with negative-region
//! counting, quadrature moments, entanglement negativity and Gaussian
//! negativity.

use nalgebra::{DMatrix, Matrix4, SymmetricEigen, Vector4};

use crate::channel::{evolve, LossSpec};
use crate::error::{Error, Result};
use crate::fock::{
    coherent_ket, partial_transpose, trace_norm, DensityMatrix, Ket, Operator, C64,
};
use crate::gate::{conditional_eigenvalues, target_unitary, KerrKind, KerrSpec};
use crate::parallel;

/// P_s = <psi| O_R† O_R |psi>.
pub fn success_probability(psi: &Ket, o_r: &Operator) -> f64 {
    let amp = &o_r.matrix * &psi.amplitudes;
    amp.norm_squared()
}

/// F = |<psi| O_T† O_R |psi>|^2 / P_s, for unitary O_T.
pub fn conditional_fidelity(psi: &Ket, o_t: &Operator, o_r: &Operator) -> Result<f64> {
    if !o_t.flags.unitary {
        return Err(Error::InvalidParam("target operator must be unitary".into()));
    }
    let ps = success_probability(psi, o_r);
    if ps < 1e-12 {
        return Err(Error::EmptySupport(ps));
    }
    let target = &o_t.matrix * &psi.amplitudes;
    let out = &o_r.matrix * &psi.amplitudes;
    let overlap = target.dotc(&out);
    Ok(overlap.norm_sqr() / ps)
}

/// <psi_T| rho |psi_T> for a pure target.
pub fn deterministic_fidelity(rho: &DensityMatrix, psi_target: &Ket) -> f64 {
    let v = &psi_target.amplitudes;
    (v.adjoint() * &rho.matrix * v)[(0, 0)].re
}

/// Diagonal elements of Q_f = O_T† O_R and Q_s = O_R† O_R at a joint
/// eigenvalue pair, plus the leading-order expansion of Q_s.
#[derive(Debug, Clone, Copy)]
pub struct QfQs {
    pub qf: C64,
    pub qs: f64,
    /// 1 - 4 m_A^2 m_B^2 (m_A^2 + m_B^2) R tau^6
    pub qs_expansion: f64,
}

pub fn qfqs_diagonal(m_a: f64, m_b: f64, tau: f64, reps: usize) -> QfQs {
    let t_total = 2.0 * reps as f64 * tau * tau;
    let (o1, _) = conditional_eigenvalues(m_a, m_b, tau);
    let qf = C64::new(0.0, -t_total * m_a * m_b).exp() * o1.powu(reps as u32);
    let qs = qf.norm_sqr();
    let qs_expansion =
        1.0 - 4.0 * m_a * m_a * m_b * m_b * (m_a * m_a + m_b * m_b) * reps as f64 * tau.powi(6);
    QfQs { qf, qs, qs_expansion }
}

/// m_max = (eps R^2 / T^3)^(1/6), the support bound for near-unit fidelity
/// and success probability.
pub fn support_bound(epsilon: f64, reps: usize, t_total: f64) -> f64 {
    (epsilon * (reps as f64).powi(2) / t_total.powi(3)).powf(1.0 / 6.0)
}

#[derive(Debug, Clone)]
pub struct ScalingPoint {
    pub reps: usize,
    pub tau: f64,
    pub measured_deficit: f64,
    /// 9 T^3 |beta|^10 / R^2
    pub model_deficit: f64,
    pub ratio: f64,
}

/// Deterministic lossless self-Kerr runs at fixed T over a list of R values,
/// reporting the measured fidelity deficit against the large-amplitude model.
pub fn fidelity_scaling_probe(
    beta: C64,
    t_total: f64,
    reps_list: &[usize],
    n_max: usize,
) -> Result<Vec<ScalingPoint>> {
    let (psi, _) = coherent_ket(beta, n_max)?;
    let rho0 = DensityMatrix::from_pure(&psi);
    let mut out = Vec::with_capacity(reps_list.len());
    for &reps in reps_list {
        let spec = KerrSpec::with_reps(KerrKind::SelfKerr, t_total, reps, n_max)?.gate_spec()?;
        let run = evolve(&rho0, &spec, &LossSpec::lossless())?;
        let target = psi.apply(&target_unitary(&spec)?);
        let measured_deficit = 1.0 - deterministic_fidelity(&run.rho, &target);
        let model_deficit =
            9.0 * t_total.powi(3) * beta.norm().powi(10) / (reps as f64).powi(2);
        out.push(ScalingPoint {
            reps,
            tau: spec.tau(),
            measured_deficit,
            model_deficit,
            ratio: measured_deficit / model_deficit,
        });
    }
    Ok(out)
}

// ---------------------------------------------------------------------------
// Cross-Kerr interaction scan
// ---------------------------------------------------------------------------

/// One point of the interaction-strength scan: negativity and Gaussian
/// negativity of the ideal cross-Kerr output and of the simulated lossy run
/// at accumulated strength T = 2 R tau^2.
#[derive(Debug, Clone)]
pub struct ScanRow {
    pub t_total: f64,
    pub reps: usize,
    pub n_ideal: f64,
    pub ng_ideal: f64,
    /// Lossless simulated synthesis (finite tau, no damping).
    pub n_sim: f64,
    pub ng_sim: f64,
    pub n_lossy: f64,
    pub ng_lossy: f64,
    pub mean_photon: f64,
}

/// Scan a two-mode coherent input |alpha, beta> through the lossy cross-Kerr
/// synthesis at fixed tau, sampling T on a uniform grid from 0 to `t_max`.
/// The density matrix accumulates across grid points (round counts are
/// cumulative), so the whole scan costs one evolution of round(t_max/2tau^2)
/// steps.
pub fn cross_kerr_scan(
    alpha: C64,
    beta: C64,
    tau: f64,
    eta: f64,
    t_max: f64,
    dt: f64,
    n_max: usize,
) -> Result<Vec<ScanRow>> {
    if !(tau > 0.0) || !(dt > 0.0) || !(t_max >= 0.0) {
        return Err(Error::InvalidParam("tau, dt must be positive".into()));
    }
    let (ka, _) = coherent_ket(alpha, n_max)?;
    let (kb, _) = coherent_ket(beta, n_max)?;
    let joint = crate::fock::tensor_kets(&[&ka, &kb]);
    let space = joint.space.clone();
    let mut rho = DensityMatrix::from_pure(&joint);
    let ideal_input = joint.amplitudes.clone();

    // Mask eigenvalues per basis pair at fixed tau; cheaper than building the
    // full operators since everything is diagonal.
    let d = space.total_dim();
    let mut o1d = nalgebra::DVector::<C64>::zeros(d);
    let mut o2d = nalgebra::DVector::<C64>::zeros(d);
    for i in 0..d {
        let m = space.multi_index(i);
        let (o1, o2) = conditional_eigenvalues(m[0] as f64, m[1] as f64, tau);
        o1d[i] = o1;
        o2d[i] = o2;
    }
    let o1 = Operator::from_diagonal(space.clone(), &o1d);
    let o2 = Operator::from_diagonal(space.clone(), &o2d);

    let n_points = (t_max / dt).round() as usize + 1;
    let mut rows = Vec::with_capacity(n_points);
    let mut rho_sim = rho.clone();
    let mut done = 0usize;
    for k in 0..n_points {
        let t = k as f64 * dt;
        let target = (t / (2.0 * tau * tau)).round() as usize;
        while done < target {
            rho = crate::channel::deterministic_step(&rho, &o1, &o2)?;
            rho = crate::channel::apply_damping(&rho, eta, 0)?;
            rho = crate::channel::apply_damping(&rho, eta, 1)?;
            rho_sim = crate::channel::deterministic_step(&rho_sim, &o1, &o2)?;
            done += 1;
        }
        // ideal output at the exact strength t
        let mut psi = ideal_input.clone();
        for i in 0..d {
            let m = space.multi_index(i);
            psi[i] *= C64::new(0.0, t * (m[0] * m[1]) as f64).exp();
        }
        let ideal = DensityMatrix::from_pure(&Ket::new(space.clone(), psi));
        let n_ideal = negativity(&ideal, 1)?;
        let ng_ideal = gaussian_negativity(&quadrature_moments(&ideal)?)?;
        let n_sim = negativity(&rho_sim, 1)?;
        let ng_sim = gaussian_negativity(&quadrature_moments(&rho_sim)?)?;
        let n_lossy = negativity(&rho, 1)?;
        let ng_lossy = gaussian_negativity(&quadrature_moments(&rho)?)?;
        let mean_photon = (0..d)
            .map(|i| rho.matrix[(i, i)].re * space.multi_index(i)[0] as f64)
            .sum();
        rows.push(ScanRow {
            t_total: t,
            reps: done,
            n_ideal,
            ng_ideal,
            n_sim,
            ng_sim,
            n_lossy,
            ng_lossy,
            mean_photon,
        });
    }
    Ok(rows)
}

// ---------------------------------------------------------------------------
// Wigner function
// ---------------------------------------------------------------------------

/// Phase-space grid parameters under the x = a + a†, p = -i(a - a†)
/// convention; the Wigner value at (x, p) is evaluated at alpha = (x + ip)/2.
#[derive(Debug, Clone)]
pub struct GridParams {
    pub x_min: f64,
    pub x_max: f64,
    pub p_min: f64,
    pub p_max: f64,
    pub resolution: usize,
}

impl Default for GridParams {
    /// x, p in [-6, 6], 241 points per axis (odd count centers the origin).
    fn default() -> Self {
        Self { x_min: -6.0, x_max: 6.0, p_min: -6.0, p_max: 6.0, resolution: 241 }
    }
}

#[derive(Debug, Clone)]
pub struct WignerGrid {
    pub xs: Vec<f64>,
    pub ps: Vec<f64>,
    /// Row-major: values[ip * xs.len() + ix].
    pub values: Vec<f64>,
}

impl WignerGrid {
    pub fn value(&self, ip: usize, ix: usize) -> f64 {
        self.values[ip * self.xs.len() + ix]
    }

    /// Integral over d^2 alpha = dx dp / 4; equals 1 for a normalized state
    /// captured by the grid.
    pub fn integral(&self) -> f64 {
        let dx = self.xs[1] - self.xs[0];
        let dp = self.ps[1] - self.ps[0];
        self.values.iter().sum::<f64>() * dx * dp / 4.0
    }

    pub fn min(&self) -> f64 {
        self.values.iter().cloned().fold(f64::INFINITY, f64::min)
    }

    pub fn max_abs(&self) -> f64 {
        self.values.iter().map(|v| v.abs()).fold(0.0, f64::max)
    }
}

fn linspace(a: f64, b: f64, n: usize) -> Vec<f64> {
    if n == 1 {
        return vec![a];
    }
    (0..n).map(|i| a + (b - a) * i as f64 / (n - 1) as f64).collect()
}

/// W(x, p) = (2/pi) Tr[rho D(alpha) Pi D(alpha)†] with Pi the photon-number
/// parity, evaluated through the exact identity
/// D(alpha) Pi D(alpha)† = D(2 alpha) Pi using analytic Fock matrix elements
/// of the displacement operator. Exact on the state's support.
pub fn wigner(rho: &DensityMatrix, grid: &GridParams) -> Result<WignerGrid> {
    wigner_opts(rho, grid, cfg!(feature = "parallel"))
}

pub fn wigner_opts(rho: &DensityMatrix, grid: &GridParams, parallel: bool) -> Result<WignerGrid> {
    if rho.space.factors().len() != 1 {
        return Err(Error::InvalidParam("Wigner function requires a single-mode state".into()));
    }
    let d = rho.dim();
    let edge = rho.matrix[(d - 1, d - 1)].re;
    if edge > 1e-6 {
        return Err(Error::TruncationEdge(edge));
    }
    let xs = linspace(grid.x_min, grid.x_max, grid.resolution);
    let ps = linspace(grid.p_min, grid.p_max, grid.resolution);
    // sqrt(n! / (n+delta)!) prefactors, point-independent
    let mut pref = vec![vec![0.0f64; d]; d];
    for delta in 0..d {
        for n in 0..d - delta {
            let mut log_ratio = 0.0;
            for j in 1..=delta {
                log_ratio -= ((n + j) as f64).ln();
            }
            pref[delta][n] = (0.5 * log_ratio).exp();
        }
    }
    let row = |ip: usize| -> Vec<f64> {
        let p = ps[ip];
        xs.iter()
            .map(|&x| wigner_point(rho, x, p, &pref))
            .collect()
    };
    let rows = if parallel {
        parallel::map_indexed(ps.len(), row)
    } else {
        parallel::map_indexed_seq(ps.len(), row)
    };
    let values = rows.into_iter().flatten().collect();
    Ok(WignerGrid { xs, ps, values })
}

fn wigner_point(rho: &DensityMatrix, x: f64, p: f64, pref: &[Vec<f64>]) -> f64 {
    let d = rho.dim();
    let gamma = C64::new(x, p); // 2 alpha
    let y = gamma.norm_sqr();
    let envelope = (-y / 2.0).exp();
    // Laguerre recurrence per superdiagonal delta
    let mut total = 0.0f64;
    let mut gamma_pow = C64::new(1.0, 0.0);
    for delta in 0..d {
        let a = delta as f64;
        let mut l_prev = 1.0f64; // L_0^(a)
        let mut l_curr = 1.0 + a - y; // L_1^(a)
        let mut acc = C64::new(0.0, 0.0);
        for n in 0..d - delta {
            let l_n = if n == 0 {
                l_prev
            } else if n == 1 {
                l_curr
            } else {
                let nf = n as f64;
                let next = ((2.0 * nf - 1.0 + a - y) * l_curr - (nf - 1.0 + a) * l_prev) / nf;
                l_prev = l_curr;
                l_curr = next;
                next
            };
            let sign = if n % 2 == 0 { 1.0 } else { -1.0 };
            // term for rho_{n, n+delta} * <n+delta|D|n> * (-1)^n
            acc += rho.matrix[(n, n + delta)] * C64::new(sign * pref[delta][n] * l_n, 0.0);
        }
        let contrib = acc * gamma_pow;
        if delta == 0 {
            total += contrib.re;
        } else {
            total += 2.0 * contrib.re;
        }
        gamma_pow *= gamma;
    }
    (2.0 / std::f64::consts::PI) * envelope * total
}

/// Number of 4-connected components of grid cells with value < threshold.
pub fn negative_regions(grid: &WignerGrid, threshold: f64) -> Result<usize> {
    if threshold >= 0.0 {
        return Err(Error::InvalidParam("threshold must be negative".into()));
    }
    let nx = grid.xs.len();
    let np = grid.ps.len();
    let mask: Vec<bool> = grid.values.iter().map(|&v| v < threshold).collect();
    let mut seen = vec![false; mask.len()];
    let mut count = 0;
    let mut stack = Vec::new();
    for start in 0..mask.len() {
        if !mask[start] || seen[start] {
            continue;
        }
        count += 1;
        seen[start] = true;
        stack.push(start);
        while let Some(idx) = stack.pop() {
            let (ip, ix) = (idx / nx, idx % nx);
            let mut push = |ni: usize| {
                if mask[ni] && !seen[ni] {
                    seen[ni] = true;
                    stack.push(ni);
                }
            };
            if ix > 0 {
                push(idx - 1);
            }
            if ix + 1 < nx {
                push(idx + 1);
            }
            if ip > 0 {
                push(idx - nx);
            }
            if ip + 1 < np {
                push(idx + nx);
            }
        }
    }
    Ok(count)
}

/// Default negative-region threshold: -1e-2 of the peak |W|. Deep enough to
/// ignore shallow interference dust, shallow enough to keep genuine lobes.
pub const NEGATIVE_REGION_FRACTION: f64 = 1e-2;

pub fn default_threshold(grid: &WignerGrid) -> f64 {
    -NEGATIVE_REGION_FRACTION * grid.max_abs()
}

// ---------------------------------------------------------------------------
// Entanglement negativity and Gaussian negativity
// ---------------------------------------------------------------------------

/// N[rho] = max(0, (Tr|rho^PT| - 1)/2) for a bipartite state; `split` is the
/// factor to transpose.
pub fn negativity(rho: &DensityMatrix, split: usize) -> Result<f64> {
    let pt = partial_transpose(rho, split)?;
    let tn = trace_norm(&pt)?;
    Ok(((tn - 1.0) / 2.0).max(0.0))
}

/// First and second quadrature moments under x = a + a†, p = -i(a - a†);
/// vacuum covariance is the identity.
#[derive(Debug, Clone)]
pub struct MomentData {
    /// (<x1>, <p1>, <x2>, <p2>)
    pub mean: Vector4<f64>,
    pub covariance: Matrix4<f64>,
}

impl MomentData {
    /// Symmetry plus the uncertainty relation sigma + i Omega >= -1e-9.
    pub fn validate(&self) -> Result<()> {
        let sym_dev = (self.covariance - self.covariance.transpose()).abs().max();
        if sym_dev > 1e-10 {
            return Err(Error::InvalidParam(format!(
                "covariance asymmetry {sym_dev:.3e}"
            )));
        }
        let omega = symplectic_form();
        let mut m = Matrix4::<C64>::zeros();
        for i in 0..4 {
            for j in 0..4 {
                m[(i, j)] = C64::new(self.covariance[(i, j)], omega[(i, j)]);
            }
        }
        let eig = SymmetricEigen::new(m);
        let min = eig.eigenvalues.iter().cloned().fold(f64::INFINITY, f64::min);
        // Truncated-basis moments violate the uncertainty bound at the level
        // of the discarded tail; allow that much slack.
        if min < -1e-6 {
            return Err(Error::UnphysicalCovariance(min));
        }
        Ok(())
    }
}

fn symplectic_form() -> Matrix4<f64> {
    let mut omega = Matrix4::zeros();
    omega[(0, 1)] = 1.0;
    omega[(1, 0)] = -1.0;
    omega[(2, 3)] = 1.0;
    omega[(3, 2)] = -1.0;
    omega
}

/// Quadrature means and symmetrized covariance of a two-mode state.
pub fn quadrature_moments(rho: &DensityMatrix) -> Result<MomentData> {
    if rho.space.factors().len() != 2 {
        return Err(Error::InvalidParam("quadrature moments require a two-mode state".into()));
    }
    let dims = rho.space.factors().to_vec();
    let quad = |mode: usize, which: usize| -> DMatrix<C64> {
        // x = a + a†, p = -i(a - a†), embedded on the joint space
        let d = rho.dim();
        let mut m = DMatrix::<C64>::zeros(d, d);
        let stride = rho.space.strides()[mode];
        let dm = dims[mode];
        let outer = d / dm;
        for o in 0..outer {
            let hi = o / stride;
            let lo = o % stride;
            let base = hi * stride * dm + lo;
            for n in 1..dm {
                let s = (n as f64).sqrt();
                let i = base + (n - 1) * stride;
                let j = base + n * stride;
                if which == 0 {
                    // x: a + a†
                    m[(i, j)] += C64::new(s, 0.0);
                    m[(j, i)] += C64::new(s, 0.0);
                } else {
                    // p: -i a + i a†
                    m[(i, j)] += C64::new(0.0, -s);
                    m[(j, i)] += C64::new(0.0, s);
                }
            }
        }
        m
    };
    let ops = [quad(0, 0), quad(0, 1), quad(1, 0), quad(1, 1)];
    let mut mean = Vector4::zeros();
    for (i, op) in ops.iter().enumerate() {
        mean[i] = trace_prod(&rho.matrix, op).re;
    }
    let mut cov = Matrix4::zeros();
    for i in 0..4 {
        for j in i..4 {
            let prod = &ops[i] * &ops[j];
            let sym = trace_prod(&rho.matrix, &prod).re - mean[i] * mean[j];
            cov[(i, j)] = sym;
            cov[(j, i)] = sym;
        }
    }
    Ok(MomentData { mean, covariance: cov })
}

fn trace_prod(rho: &DMatrix<C64>, op: &DMatrix<C64>) -> C64 {
    let d = rho.nrows();
    let mut acc = C64::new(0.0, 0.0);
    for i in 0..d {
        for j in 0..d {
            acc += rho[(i, j)] * op[(j, i)];
        }
    }
    acc
}

/// Negativity of the Gaussian state sharing the given moments: from the
/// smallest symplectic eigenvalue of the partially transposed covariance
/// (p2 -> -p2), N_G = max(0, (1 - nu)/(2 nu)).
pub fn gaussian_negativity(m: &MomentData) -> Result<f64> {
    m.validate()?;
    let nu = pt_symplectic_eigenvalue(&m.covariance)?;
    if nu <= 0.0 {
        return Err(Error::UnphysicalCovariance(nu));
    }
    Ok(((1.0 - nu) / (2.0 * nu)).max(0.0))
}

/// Smallest symplectic eigenvalue of the PT covariance via the two-mode
/// invariant formula.
pub fn pt_symplectic_eigenvalue(cov: &Matrix4<f64>) -> Result<f64> {
    let a = cov.fixed_view::<2, 2>(0, 0).into_owned();
    let b = cov.fixed_view::<2, 2>(2, 2).into_owned();
    let c = cov.fixed_view::<2, 2>(0, 2).into_owned();
    let delta_t = a.determinant() + b.determinant() - 2.0 * c.determinant();
    let det = cov.determinant();
    let disc = (delta_t * delta_t - 4.0 * det).max(0.0);
    let nu2 = (delta_t - disc.sqrt()) / 2.0;
    if nu2 < -1e-6 {
        return Err(Error::UnphysicalCovariance(nu2));
    }
    Ok(nu2.max(0.0).sqrt())
}

/// Combined report for one state.
#[derive(Debug, Clone, Copy)]
pub struct NegativityReport {
    pub n: f64,
    pub n_gaussian: f64,
    pub difference: f64,
}

pub fn negativity_report(rho: &DensityMatrix) -> Result<NegativityReport> {
    let n = negativity(rho, 1)?;
    let m = quadrature_moments(rho)?;
    let n_gaussian = gaussian_negativity(&m)?;
    Ok(NegativityReport { n, n_gaussian, difference: n - n_gaussian })
}
