//! Cross-Kerr Fourier-transform engine: exact diagonal two-mode evolution,
//! evolution-time selection, post-selected projection, the brute-force
//! discrete-transform oracle, and Wigner grids of reduced states.
//!
//! Under the cross-Kerr coupling χ a†a b†b the joint amplitude of |m⟩_A|n⟩_B
//! acquires the phase e^{-iχtmn}; with B prepared uniform and
//! t = τ₂ = (∓2π/q + 2kπ)/χ the B column attached to |m⟩_A becomes the
//! Fourier vector (1/√q)Σ_n e^{±i2πmn/q}|n⟩_B. Projecting A onto the uniform
//! state |p⟩ then leaves B in the transform of the A amplitudes with success
//! probability exactly 1/q.

use ndarray::Array2;
use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::hilbert::{
    CompositeSpace, DensityMatrix, Factor, FockSpace, SpaceLabel, StateVector,
};
use crate::{parallel, CoreError, Result, TWO_PI};

/// Transform direction.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum KerrDirection {
    Forward,
    Inverse,
}

/// Cross-Kerr stage parameters.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct KerrConfig {
    /// Cross-Kerr rate χ in rad/µs (signed).
    pub chi: f64,
    /// Extra full windings k of the phase 2π·k.
    pub winding: u32,
    pub direction: KerrDirection,
}

/// Evolution time τ₂ = (∓2π/q + 2kπ)/χ, requiring τ₂ > 0.
pub fn qft_duration(q: usize, config: &KerrConfig) -> Result<f64> {
    if config.chi == 0.0 {
        return Err(CoreError::precondition("cross-Kerr rate is zero"));
    }
    if q < 1 {
        return Err(CoreError::precondition("need q >= 1"));
    }
    let base = match config.direction {
        KerrDirection::Forward => -TWO_PI / q as f64,
        KerrDirection::Inverse => TWO_PI / q as f64,
    };
    // Winding k adds k full periods 2π/|χ| (the 2kπ term with the integer
    // sign chosen so the added time is positive); every photon-number pair
    // picks up e^{∓i2πk·mn} = 1, leaving the transform unchanged.
    let tau = base / config.chi + TWO_PI * config.winding as f64 / config.chi.abs();
    if tau <= 0.0 {
        return Err(CoreError::NoPositiveDuration { k: config.winding });
    }
    Ok(tau)
}

/// Exact free evolution of a two-mode state: amplitude of |m⟩_A|n⟩_B gains
/// e^{-iχtmn}. No integrator is involved; the coupling is diagonal.
pub fn kerr_evolve(joint: &StateVector, chi: f64, t: f64) -> Result<StateVector> {
    let factors = joint.space().factors();
    if factors.len() != 2
        || !matches!(factors[0], Factor::Fock(_))
        || !matches!(factors[1], Factor::Fock(_))
    {
        return Err(CoreError::precondition(
            "kerr_evolve expects exactly two Fock factors",
        ));
    }
    kerr_evolve_factors(joint, 0, 1, chi, t)
}

/// Diagonal cross-Kerr phases between two Fock factors of a larger composite
/// state (bystander factors untouched).
pub fn kerr_evolve_factors(
    state: &StateVector,
    factor_a: usize,
    factor_b: usize,
    chi: f64,
    t: f64,
) -> Result<StateVector> {
    let dims = state.space().factor_dims();
    let mut amps = state.amplitudes().to_vec();
    for (idx, amp) in amps.iter_mut().enumerate() {
        let occ = state.space().occupations_of(idx)?;
        let phase = -chi * t * (occ[factor_a] as f64) * (occ[factor_b] as f64);
        *amp *= Complex64::from_polar(1.0, phase);
    }
    let _ = dims;
    StateVector::from_amplitudes(state.space().clone(), amps)
}

/// (1/√q) Σ_{n=0}^{q-1} |n⟩_B.
pub fn prepare_uniform_b(q: usize) -> Result<StateVector> {
    if q < 1 {
        return Err(CoreError::precondition("need q >= 1"));
    }
    let space = CompositeSpace::new(vec![Factor::Fock(FockSpace::new(
        q,
        SpaceLabel::ResonatorB,
    )?)])?;
    let amp = Complex64::new(1.0 / (q as f64).sqrt(), 0.0);
    StateVector::from_amplitudes(space, vec![amp; q])
}

/// Brute-force discrete Fourier transform oracle: the literal double-loop sum
/// out[n] = (1/√q) Σ_m e^{±i2πmn/q} c[m] (no fast transform anywhere).
pub fn dft_oracle(c: &[Complex64], direction: KerrDirection) -> Vec<Complex64> {
    let q = c.len();
    let sign = match direction {
        KerrDirection::Forward => 1.0,
        KerrDirection::Inverse => -1.0,
    };
    let scale = 1.0 / (q as f64).sqrt();
    let mut out = vec![Complex64::ZERO; q];
    for (n, o) in out.iter_mut().enumerate() {
        let mut acc = Complex64::ZERO;
        for (m, cm) in c.iter().enumerate() {
            let phase = sign * TWO_PI * (m as f64) * (n as f64) / q as f64;
            acc += cm * Complex64::from_polar(1.0, phase);
        }
        *o = acc * scale;
    }
    out
}

/// Born-rule projection outcome. A zero-probability outcome carries no state.
#[derive(Debug, Clone)]
pub struct Projection {
    pub probability: f64,
    pub state: Option<StateVector>,
}

/// Project factor `factor` onto the uniform vector |p⟩ = Σ_{m<q}|m⟩/√q and
/// renormalize the remainder over the other factors.
pub fn project_uniform(joint: &StateVector, factor: usize, q: usize) -> Result<Projection> {
    let dims = joint.space().factor_dims();
    if factor >= dims.len() {
        return Err(CoreError::OutOfRange {
            context: "projection factor",
            index: factor,
            dim: dims.len(),
        });
    }
    if q > dims[factor] {
        return Err(CoreError::OutOfRange {
            context: "uniform projector support",
            index: q,
            dim: dims[factor],
        });
    }
    let stride: usize = dims[factor + 1..].iter().product();
    let outer: usize = dims[..factor].iter().product();
    let d = dims[factor];
    let scale = 1.0 / (q as f64).sqrt();

    // ⟨p|ψ⟩ lives on the remaining factors, indexed (outer, inner).
    let amps = joint.amplitudes();
    let mut reduced = vec![Complex64::ZERO; outer * stride];
    for o in 0..outer {
        for inner in 0..stride {
            let mut acc = Complex64::ZERO;
            for m in 0..q {
                acc += amps[o * d * stride + m * stride + inner];
            }
            reduced[o * stride + inner] = acc * scale;
        }
    }
    let probability: f64 = reduced.iter().map(|z| z.norm_sqr()).sum();
    if probability < 1e-300 {
        return Ok(Projection {
            probability: 0.0,
            state: None,
        });
    }
    let remaining_factors: Vec<Factor> = joint
        .space()
        .factors()
        .iter()
        .enumerate()
        .filter(|(i, _)| *i != factor)
        .map(|(_, f)| *f)
        .collect();
    let space = CompositeSpace::new(remaining_factors)?;
    let norm = probability.sqrt();
    let state = StateVector::from_amplitudes(
        space,
        reduced.into_iter().map(|z| z / norm).collect(),
    )?;
    Ok(Projection {
        probability,
        state: Some(state),
    })
}

/// Post-selected transform result.
#[derive(Debug, Clone)]
pub struct QftResult {
    pub b_state: StateVector,
    pub success_probability: f64,
    pub pre_projection: StateVector,
}

/// Ideal pipeline: attach a uniform B register, run the cross-Kerr phase for
/// τ₂, and project A onto |p⟩. The post-selected B state equals the
/// brute-force transform of the input amplitudes with probability 1/q.
pub fn run_qft(a_state: &StateVector, config: &KerrConfig) -> Result<QftResult> {
    let factors = a_state.space().factors();
    if factors.len() != 1 || !matches!(factors[0], Factor::Fock(_)) {
        return Err(CoreError::precondition(
            "run_qft expects a single-mode state of dimension q",
        ));
    }
    let q = a_state.dim();
    let tau2 = qft_duration(q, config)?;
    let b = prepare_uniform_b(q)?;

    let space = CompositeSpace::new(vec![
        Factor::Fock(FockSpace::new(q, SpaceLabel::ResonatorA)?),
        Factor::Fock(FockSpace::new(q, SpaceLabel::ResonatorB)?),
    ])?;
    let mut amps = vec![Complex64::ZERO; q * q];
    for m in 0..q {
        for n in 0..q {
            amps[m * q + n] = a_state.amplitudes()[m] * b.amplitudes()[n];
        }
    }
    let joint = StateVector::from_amplitudes(space, amps)?;
    let evolved = kerr_evolve(&joint, config.chi, tau2)?;
    let projection = project_uniform(&evolved, 0, q)?;
    let b_state = projection.state.ok_or_else(|| {
        CoreError::precondition("post-selection probability vanished (zero input?)")
    })?;
    Ok(QftResult {
        b_state,
        success_probability: projection.probability,
        pre_projection: evolved,
    })
}

/// Outcome of the measurement-based disentangling route.
#[derive(Debug, Clone)]
pub struct DisentangleResult {
    pub b_state: StateVector,
    /// Probability of finding every qubit along +X (1/q on the ideal path).
    pub probability: f64,
    /// Population left outside |0⟩_A after the inverse transfer.
    pub a_residual: f64,
    pub reports: Vec<crate::transfer::StepReport>,
    pub warnings: Vec<String>,
}

/// Disentangle the two resonators by physical means: run the inverse state
/// transfer to move A's register content back onto the qubits, then project
/// every qubit onto |+⟩ (an X-direction measurement), which realizes the
/// uniform projector on the register. On the ideal backend this reproduces
/// [`project_uniform`] exactly.
pub fn physical_disentangle(
    joint: &StateVector,
    plan: &crate::transfer::TransferPlan,
    opts: &crate::transfer::ExecOptions,
    inverse_frame: Option<&crate::transfer::PhaseTable>,
) -> Result<DisentangleResult> {
    let factors = joint.space().factors();
    let (d_a, q_b) = match (factors.first(), factors.get(1)) {
        (Some(Factor::Fock(a)), Some(Factor::Fock(b)))
            if factors.len() == 2 && a.label == SpaceLabel::ResonatorA =>
        {
            (a.dim, b.dim)
        }
        _ => {
            return Err(CoreError::precondition(
                "physical_disentangle expects a state over (A ⊗ B)",
            ))
        }
    };
    if d_a != plan.fock_dim {
        return Err(CoreError::DimensionMismatch {
            context: "resonator A truncation vs plan",
            expected: plan.fock_dim,
            got: d_a,
        });
    }
    let n = plan.n;
    let reg_dim = 1usize << n;

    // Attach the (ground-state) register: [A, B, register].
    let full_space = CompositeSpace::new(vec![
        Factor::Fock(FockSpace::new(d_a, SpaceLabel::ResonatorA)?),
        Factor::Fock(FockSpace::new(q_b, SpaceLabel::ResonatorB)?),
        Factor::Qubits(crate::hilbert::QubitRegister::new(n)?),
    ])?;
    let mut amps = vec![Complex64::ZERO; full_space.total_dim()];
    for (idx, amp) in joint.amplitudes().iter().enumerate() {
        amps[idx * reg_dim] = *amp;
    }
    let full = StateVector::from_amplitudes(full_space, amps)?;

    let inv = crate::transfer::inverse_transfer(
        &full,
        plan,
        crate::transfer::InverseMode::Physical,
        opts,
    )?;
    let corrected = match inverse_frame {
        Some(frame) => crate::transfer::apply_register_phase_frame(&inv.final_state, frame)?,
        None => inv.final_state,
    };

    // X-direction measurement of every qubit: project the register factor
    // onto its uniform vector.
    let projection = project_uniform(&corrected, 2, reg_dim)?;
    let probability = projection.probability;
    let remaining = projection.state.ok_or_else(|| {
        CoreError::precondition("qubit projection has zero probability")
    })?;

    // Condition on A back in vacuum and report the residual honestly.
    let rem = remaining.amplitudes();
    let a0_norm_sqr: f64 = rem[..q_b].iter().map(|z| z.norm_sqr()).sum();
    let a_residual = 1.0 - a0_norm_sqr;
    if a0_norm_sqr < 1e-300 {
        return Err(CoreError::precondition(
            "inverse transfer left no population in the A vacuum block",
        ));
    }
    let b_space = CompositeSpace::new(vec![Factor::Fock(FockSpace::new(
        q_b,
        SpaceLabel::ResonatorB,
    )?)])?;
    let scale = a0_norm_sqr.sqrt();
    let b_state = StateVector::from_amplitudes(
        b_space,
        rem[..q_b].iter().map(|z| z / scale).collect(),
    )?;
    Ok(DisentangleResult {
        b_state,
        probability,
        a_residual,
        reports: inv.reports,
        warnings: inv.warnings,
    })
}

/// Rotate a state by a global phase so its largest-magnitude amplitude is
/// real positive (deterministic presentation; physically unobservable).
pub fn align_global_phase(state: &StateVector) -> StateVector {
    let amps = state.amplitudes();
    let mut best = 0usize;
    let mut best_norm = 0.0;
    for (i, a) in amps.iter().enumerate() {
        let n = a.norm_sqr();
        if n > best_norm {
            best_norm = n;
            best = i;
        }
    }
    if best_norm == 0.0 {
        return state.clone();
    }
    let phase = Complex64::from_polar(1.0, -amps[best].arg());
    StateVector::from_amplitudes(
        state.space().clone(),
        amps.iter().map(|a| a * phase).collect(),
    )
    .expect("phase rotation preserves the norm")
}

// ---------------------------------------------------------------------------
// Wigner function
// ---------------------------------------------------------------------------

/// Generalized Laguerre polynomial L_n^{(a)}(x) by upward recurrence.
fn laguerre(n: usize, a: f64, x: f64) -> f64 {
    if n == 0 {
        return 1.0;
    }
    let mut lm1 = 1.0;
    let mut l = 1.0 + a - x;
    for k in 2..=n {
        let kf = k as f64;
        let next = ((2.0 * kf - 1.0 + a - x) * l - (kf - 1.0 + a) * lm1) / kf;
        lm1 = l;
        l = next;
    }
    l
}

/// ⟨k|D(β)|m⟩ for the displacement D(β) = exp(βa† - β*a), exact closed form.
fn displacement_element(k: usize, m: usize, beta: Complex64) -> Complex64 {
    let x = beta.norm_sqr();
    let envelope = (-0.5 * x).exp();
    if k >= m {
        let d = k - m;
        let mut ratio = 1.0; // sqrt(m!/k!)
        for j in (m + 1)..=k {
            ratio /= (j as f64).sqrt();
        }
        Complex64::from_polar(1.0, beta.arg() * d as f64)
            * beta.norm().powi(d as i32)
            * ratio
            * envelope
            * laguerre(m, d as f64, x)
    } else {
        let d = m - k;
        let mut ratio = 1.0; // sqrt(k!/m!)
        for j in (k + 1)..=m {
            ratio /= (j as f64).sqrt();
        }
        let mb = -beta.conj();
        Complex64::from_polar(1.0, mb.arg() * d as f64)
            * mb.norm().powi(d as i32)
            * ratio
            * envelope
            * laguerre(k, d as f64, x)
    }
}

/// W(α) = (2/π)·Tr[ρ D(α) Π D(α)†] at one phase-space point α = x + ip,
/// evaluated through the identity D(α)ΠD(α)† = D(2α)Π.
pub fn wigner_point(rho: &Array2<Complex64>, alpha: Complex64) -> f64 {
    let d = rho.nrows();
    let beta = 2.0 * alpha;
    let mut acc = Complex64::ZERO;
    for m in 0..d {
        let parity = if m % 2 == 0 { 1.0 } else { -1.0 };
        for k in 0..d {
            let r = rho[(m, k)];
            if r.norm_sqr() < 1e-300 {
                continue;
            }
            acc += r * parity * displacement_element(k, m, beta);
        }
    }
    (2.0 / std::f64::consts::PI) * acc.re
}

/// Sampled Wigner function of a single-mode density matrix.
#[derive(Debug, Clone)]
pub struct WignerGrid {
    pub xs: Vec<f64>,
    pub ps: Vec<f64>,
    /// values[(i, j)] = W(xs[i] + i·ps[j]).
    pub values: Array2<f64>,
    pub warnings: Vec<String>,
}

impl WignerGrid {
    /// Σ W·ΔxΔp over the grid.
    pub fn integral(&self) -> f64 {
        let dx = if self.xs.len() > 1 {
            self.xs[1] - self.xs[0]
        } else {
            1.0
        };
        let dp = if self.ps.len() > 1 {
            self.ps[1] - self.ps[0]
        } else {
            1.0
        };
        self.values.iter().sum::<f64>() * dx * dp
    }

    /// CSV rows `x,p,w`.
    pub fn csv(&self) -> String {
        let mut out = String::from("x,p,w\n");
        for (i, x) in self.xs.iter().enumerate() {
            for (j, p) in self.ps.iter().enumerate() {
                out.push_str(&format!("{},{},{}\n", x, p, self.values[(i, j)]));
            }
        }
        out
    }
}

fn linspace(lo: f64, hi: f64, count: usize) -> Vec<f64> {
    if count == 1 {
        return vec![lo];
    }
    let step = (hi - lo) / (count - 1) as f64;
    (0..count).map(|i| lo + step * i as f64).collect()
}

fn wigner_grid_impl(
    rho: &DensityMatrix,
    x_range: (f64, f64),
    p_range: (f64, f64),
    resolution: usize,
    sequential: bool,
) -> Result<WignerGrid> {
    let factors = rho.space().factors();
    if factors.len() != 1 || !matches!(factors[0], Factor::Fock(_)) {
        return Err(CoreError::precondition(
            "wigner_grid expects a single-mode density matrix",
        ));
    }
    if resolution < 2 {
        return Err(CoreError::precondition("grid resolution must be >= 2"));
    }
    let d = rho.matrix().nrows();
    let mut warnings = Vec::new();
    let top2: f64 = (d.saturating_sub(2)..d)
        .map(|m| rho.matrix()[(m, m)].re)
        .sum();
    if top2 > 1e-4 {
        warnings.push(format!(
            "top two Fock levels carry population {top2:.3e}; the Wigner values are \
             truncation-limited"
        ));
    }

    let xs = linspace(x_range.0, x_range.1, resolution);
    let ps = linspace(p_range.0, p_range.1, resolution);
    let m = rho.matrix();
    let row_of = |i: usize| -> Vec<f64> {
        ps.iter()
            .map(|&p| wigner_point(m, Complex64::new(xs[i], p)))
            .collect()
    };
    let rows: Vec<Vec<f64>> = if sequential {
        parallel::map_indexed_seq(resolution, row_of)
    } else {
        parallel::map_indexed(resolution, row_of)
    };
    let mut values = Array2::zeros((resolution, resolution));
    for (i, row) in rows.into_iter().enumerate() {
        for (j, w) in row.into_iter().enumerate() {
            values[(i, j)] = w;
        }
    }
    Ok(WignerGrid {
        xs,
        ps,
        values,
        warnings,
    })
}

/// Evaluate W on a rectangular grid (rows parallelized when the `parallel`
/// feature is on; the point set and output are identical either way).
pub fn wigner_grid(
    rho: &DensityMatrix,
    x_range: (f64, f64),
    p_range: (f64, f64),
    resolution: usize,
) -> Result<WignerGrid> {
    wigner_grid_impl(rho, x_range, p_range, resolution, false)
}

/// Always-sequential twin of [`wigner_grid`], kept for benchmarking.
pub fn wigner_grid_seq(
    rho: &DensityMatrix,
    x_range: (f64, f64),
    p_range: (f64, f64),
    resolution: usize,
) -> Result<WignerGrid> {
    wigner_grid_impl(rho, x_range, p_range, resolution, true)
}
