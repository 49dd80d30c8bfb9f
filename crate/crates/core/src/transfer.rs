//! Orchestration of the n-step register → resonator state transfer and its
//! inverse: the binary-to-Fock map.
//!
//! A plan walks the qubits in reverse order k = n-1..0. Each step dresses the
//! (A, qubit k) pair, plays the step's multi-frequency pulse for
//! τ_map = π/Ω_k, and undresses, moving the excitation of qubit k into 2^k
//! photons. The ideal backend applies the exact permutation of each step; the
//! dynamical backend integrates the interaction-picture Hamiltonian with all
//! counter-rotating terms and reports per-step fidelities against the ideal
//! map.
//!
//! Dynamical steps imprint small deterministic per-level phases relative to
//! the ideal permutation. A [`PhaseTable`] calibrated once per plan (one
//! uniform-superposition run) absorbs them; the Fourier-transform stage is
//! phase sensitive, so pipelines apply the table after each transfer
//! direction.

use ndarray::Array2;
use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::drives::{self, DrivePulse, OccupiedSet};
use crate::dynamics::{
    dressing_map_pair, DeviceParams, DressedPair, DressingDirection, DressingMode,
    DriveQuadrature, PairEngine, ENGINE_CHUNK_COLS,
};
use crate::hilbert::{
    basis_state, CompositeSpace, Factor, FockSpace, PairLayout, QubitRegister, SpaceLabel,
    StateVector,
};
use crate::{parallel, CoreError, Result};

/// Decimal value Σ b_k 2^k of a basis string b_{n-1}…b_0.
pub fn bits_to_fock(bits: &str) -> Result<usize> {
    if bits.is_empty() {
        return Err(CoreError::precondition("empty bit string"));
    }
    let mut value = 0usize;
    for c in bits.chars() {
        value = value * 2
            + match c {
                '0' => 0,
                '1' => 1,
                other => {
                    return Err(CoreError::precondition(format!(
                        "invalid bit character {other:?}"
                    )))
                }
            };
    }
    Ok(value)
}

/// Composite space [resonator A (fock_dim), n-qubit register].
pub fn register_space(n: usize, fock_dim: usize) -> CompositeSpace {
    CompositeSpace::new(vec![
        Factor::Fock(FockSpace::new(fock_dim, SpaceLabel::ResonatorA).expect("dim >= 1")),
        Factor::Qubits(QubitRegister::new(n).expect("n >= 1")),
    ])
    .expect("two factors")
}

/// One scheduled step of a transfer plan.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct PlanStep {
    pub k: usize,
    pub occupied: OccupiedSet,
    pub omega: f64,
    pub pulse: DrivePulse,
}

/// The ordered k = n-1..0 schedule with per-step pulses.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct TransferPlan {
    pub n: usize,
    pub pad: usize,
    pub fock_dim: usize,
    pub dressing: DressingMode,
    pub quadrature: DriveQuadrature,
    pub params: DeviceParams,
    pub steps: Vec<PlanStep>,
    /// Total wall-time estimate Σ_k (τ_map,k + 2 τ_ad) in µs.
    pub tau_transfer: f64,
}

/// Duration bookkeeping of the full protocol.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ProtocolSchedule {
    pub tau1_us: f64,
    pub tau2_us: f64,
    pub tau3_us: f64,
    pub tau_ad_us: f64,
}

impl TransferPlan {
    pub fn schedule(&self, tau2: f64, tau3: f64) -> ProtocolSchedule {
        ProtocolSchedule {
            tau1_us: self.tau_transfer,
            tau2_us: tau2,
            tau3_us: tau3,
            tau_ad_us: self.params.tau_ad,
        }
    }
}

/// Synthesize the n-step plan. `omegas` lists the drive scale per step in
/// execution order (first entry drives qubit n-1, last drives qubit 0).
pub fn build_plan(
    n: usize,
    omegas: &[f64],
    params: &DeviceParams,
    dressing: DressingMode,
    quadrature: DriveQuadrature,
    pad: usize,
) -> Result<TransferPlan> {
    if n == 0 {
        return Err(CoreError::precondition("transfer needs n >= 1"));
    }
    if omegas.len() != n {
        return Err(CoreError::DimensionMismatch {
            context: "per-step drive scales",
            expected: n,
            got: omegas.len(),
        });
    }
    // The k = 0 chains climb one manifold above the highest data level, so
    // the truncation needs at least two spare levels.
    if pad < 2 {
        return Err(CoreError::precondition(
            "resonator A padding must be >= 2 Fock levels",
        ));
    }
    params.validate()?;
    let fock_dim = (1usize << n) + pad;
    let mut steps = Vec::with_capacity(n);
    let mut tau_transfer = 0.0;
    for (pos, k) in (0..n).rev().enumerate() {
        let omega = omegas[pos];
        let occupied = drives::occupied_photon_numbers(n, k)?;
        let pulse = if k == 0 {
            drives::synthesize_photon_preserving_drive(&occupied, omega, params)?
        } else {
            drives::synthesize_transfer_drive(k, &occupied, omega, params)?
        };
        tau_transfer += pulse.duration + 2.0 * params.tau_ad;
        steps.push(PlanStep {
            k,
            occupied,
            omega,
            pulse,
        });
    }
    Ok(TransferPlan {
        n,
        pad,
        fock_dim,
        dressing,
        quadrature,
        params: params.clone(),
        steps,
        tau_transfer,
    })
}

/// Exact unitary of step k on the (A ⊗ qubit k) pair: the permutation
/// swapping |m,1⟩ ↔ |m+2^k,0⟩ for every occupied m, identity elsewhere.
pub fn ideal_step_unitary(k: usize, n: usize, fock_dim: usize) -> Result<Array2<Complex64>> {
    let occupied = drives::occupied_photon_numbers(n, k)?;
    let dim = 2 * fock_dim;
    let mut u: Array2<Complex64> = Array2::eye(dim);
    for &m in &occupied.photon_numbers {
        let from = m * 2 + 1; // |m, 1⟩
        let to = (m + (1 << k)) * 2; // |m + 2^k, 0⟩
        if to >= dim {
            return Err(CoreError::OutOfRange {
                context: "ideal step target level",
                index: m + (1 << k),
                dim: fock_dim,
            });
        }
        u[(from, from)] = Complex64::ZERO;
        u[(to, to)] = Complex64::ZERO;
        u[(to, from)] = Complex64::ONE;
        u[(from, to)] = Complex64::ONE;
    }
    Ok(u)
}

/// Apply the ideal step permutation in place on a full composite state.
fn apply_ideal_step_flat(amps: &mut [Complex64], layout: &PairLayout, occupied: &OccupiedSet) {
    let shift = 1usize << layout.k;
    for slice in 0..layout.slice_count() {
        for &m in &occupied.photon_numbers {
            let from = layout.full_index(m, 1, slice);
            let to = layout.full_index(m + shift, 0, slice);
            amps.swap(from, to);
        }
    }
}

/// Execution backend of a transfer.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Backend {
    /// Compose the exact per-step permutations (no dynamics).
    Ideal,
    /// Integrate the interaction-picture pulses.
    Dynamical,
}

/// Knobs of one transfer execution.
#[derive(Debug, Clone)]
pub struct ExecOptions {
    pub backend: Backend,
    /// Added to every pulse duration (timing jitter δt in µs).
    pub jitter: f64,
    /// Population samples per step for time-series reports (0 = none;
    /// sampling forces a single-threaded engine pass).
    pub sample_points: usize,
    /// Record each step's pair unitary for exact adjoint inversion.
    pub record_unitaries: bool,
    /// Multiplier ≤ 1 on the default integrator step.
    pub step_scale: f64,
    /// Re-run each step at half step and report the overlap.
    pub convergence_check: bool,
}

impl Default for ExecOptions {
    fn default() -> Self {
        ExecOptions {
            backend: Backend::Dynamical,
            jitter: 0.0,
            sample_points: 0,
            record_unitaries: false,
            step_scale: 1.0,
            convergence_check: false,
        }
    }
}

impl ExecOptions {
    pub fn ideal() -> Self {
        ExecOptions {
            backend: Backend::Ideal,
            ..Default::default()
        }
    }
}

/// One sampled population point of a step's time series.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct PopulationSample {
    pub t_us: f64,
    pub label: String,
    pub population: f64,
}

/// Numbers summarizing one executed step.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct StepSummary {
    pub k: usize,
    pub omega: f64,
    pub duration_us: f64,
    /// Amplitude overlap |⟨ideal step map · pre-state | post-state⟩|.
    pub fidelity_vs_ideal: f64,
    pub leakage: f64,
    pub norm_drift: f64,
    pub integrator_steps: u64,
    pub step_size_us: f64,
    pub convergence_overlap: Option<f64>,
}

/// Per-step record: fidelity against the ideal step map, truncation leakage,
/// and the sampled population time series.
#[derive(Debug, Clone)]
pub struct StepReport {
    pub summary: StepSummary,
    pub samples: Vec<PopulationSample>,
}

impl StepReport {
    /// CSV rows `t_us,basis_label,population`.
    pub fn samples_csv(&self) -> String {
        let mut out = String::from("t_us,basis_label,population\n");
        for s in &self.samples {
            out.push_str(&format!("{},{},{}\n", s.t_us, s.label, s.population));
        }
        out
    }
}

/// Result of a transfer execution.
#[derive(Debug, Clone)]
pub struct TransferOutcome {
    pub final_state: StateVector,
    pub reports: Vec<StepReport>,
    /// Pair-space step unitaries in execution order, when recording.
    pub recorded: Option<Vec<Array2<Complex64>>>,
    pub warnings: Vec<String>,
}

/// Deterministic per-level phase corrections of a calibrated plan.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct PhaseTable {
    pub phases: Vec<f64>,
}

fn leak_pair_indices(fock_dim: usize) -> Vec<usize> {
    // Top two Fock levels of the padded mode, both qubit branches.
    vec![
        (fock_dim - 2) * 2,
        (fock_dim - 2) * 2 + 1,
        (fock_dim - 1) * 2,
        (fock_dim - 1) * 2 + 1,
    ]
}

struct StepRun {
    amps: Vec<Complex64>,
    summary: StepSummary,
    samples: Vec<PopulationSample>,
    warnings: Vec<String>,
    unitary: Option<Array2<Complex64>>,
}

/// Run one plan step dynamically on a flat full-space state.
///
/// `register_bit` names which register qubit pairs with the resonator (equal
/// to `step.k` for a full-register plan; 0 for a single-ancilla register
/// driven with step-k pulses).
fn run_step_dynamical(
    amps: &[Complex64],
    space: &CompositeSpace,
    register_bit: usize,
    step: &PlanStep,
    plan: &TransferPlan,
    opts: &ExecOptions,
) -> Result<StepRun> {
    if !(opts.step_scale > 0.0 && opts.step_scale <= 1.0) {
        return Err(CoreError::precondition(
            "step_scale must lie in (0, 1]; the integrator step may only be refined",
        ));
    }
    let layout = PairLayout::from_space(space, register_bit)?;
    let pair = DressedPair::new(layout.d_a, plan.params.omega_a, plan.params.g_for(step.k))?;
    let engine = PairEngine::new(&pair, plan.quadrature, step.pulse.tones());
    let duration = step.pulse.duration + opts.jitter;
    if duration <= 0.0 {
        return Err(CoreError::precondition("jitter exceeds the pulse duration"));
    }
    let h = opts.step_scale / (50.0 * engine.max_frequency());
    let pair_dim = layout.pair_dim();
    let leak_idx = leak_pair_indices(layout.d_a);
    let mut warnings = Vec::new();

    // Gather the occupied bystander slices into engine columns.
    let mut slice_ids = Vec::new();
    let mut cols: Vec<Complex64> = Vec::new();
    let mut scratch = vec![Complex64::ZERO; pair_dim];
    for slice in 0..layout.slice_count() {
        layout.gather(amps, slice, &mut scratch);
        if scratch.iter().any(|z| *z != Complex64::ZERO) {
            slice_ids.push(slice);
            cols.extend_from_slice(&scratch);
        }
    }
    let ncols = slice_ids.len();
    if ncols == 0 {
        return Err(CoreError::precondition("state has no support at all"));
    }

    // Ramp dressing physically propagates the detuning sweep per slice;
    // ideal dressing is an identity relabeling under the slot convention.
    let dress = |cols: &mut [Complex64], direction: DressingDirection| -> Result<Vec<String>> {
        let mut w = Vec::new();
        if plan.dressing == DressingMode::Ramp {
            let pspace = crate::dynamics::pair_space(layout.d_a);
            for c in 0..ncols {
                let seg = &mut cols[c * pair_dim..(c + 1) * pair_dim];
                let norm: f64 = seg.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt();
                if norm < 1e-15 {
                    continue;
                }
                let normalized: Vec<Complex64> = seg.iter().map(|z| z / norm).collect();
                let state = StateVector::from_amplitudes(pspace.clone(), normalized)?;
                let out =
                    dressing_map_pair(&state, &plan.params, step.k, direction, DressingMode::Ramp)?;
                for (dst, src) in seg.iter_mut().zip(out.state.amplitudes()) {
                    *dst = src * norm;
                }
                w.extend(out.warnings);
            }
        }
        Ok(w)
    };

    warnings.extend(dress(&mut cols, DressingDirection::BareToDressed)?);
    let dressed_start = cols.clone();

    let samples_requested = opts.sample_points > 0;
    let mut raw_samples: Vec<(f64, Vec<Complex64>)> = Vec::new();
    let stats_total;
    if samples_requested || ncols <= ENGINE_CHUNK_COLS {
        let mut sampler_store = |t: f64, state: &[Complex64]| {
            raw_samples.push((t, state.to_vec()));
        };
        let sampler: Option<&mut dyn FnMut(f64, &[Complex64])> = if samples_requested {
            Some(&mut sampler_store)
        } else {
            None
        };
        stats_total = engine.run(duration, h, &mut cols, &leak_idx, opts.sample_points, sampler);
    } else {
        let n_chunks = ncols.div_ceil(ENGINE_CHUNK_COLS);
        let chunk_len = ENGINE_CHUNK_COLS * pair_dim;
        let source = cols.clone();
        let results = parallel::map_indexed(n_chunks, |ci| {
            let lo = ci * chunk_len;
            let hi = ((ci + 1) * chunk_len).min(source.len());
            let mut chunk = source[lo..hi].to_vec();
            let stats = engine.run(duration, h, &mut chunk, &leak_idx, 0, None);
            (chunk, stats)
        });
        let mut offset = 0;
        let mut agg = crate::dynamics::EngineStats::default();
        for (chunk, stats) in results {
            cols[offset..offset + chunk.len()].copy_from_slice(&chunk);
            offset += chunk.len();
            agg.steps = stats.steps;
            agg.step_size = stats.step_size;
            agg.norm_drift += stats.norm_drift;
            agg.max_leak += stats.max_leak;
        }
        stats_total = agg;
    }

    let convergence_overlap = if opts.convergence_check {
        let mut half = dressed_start;
        engine.run(duration, h / 2.0, &mut half, &[], 0, None);
        let ov: Complex64 = half.iter().zip(cols.iter()).map(|(a, b)| a.conj() * b).sum();
        Some(ov.norm_sqr())
    } else {
        None
    };

    warnings.extend(dress(&mut cols, DressingDirection::DressedToBare)?);

    // Scatter back.
    let mut out = amps.to_vec();
    for (c, &slice) in slice_ids.iter().enumerate() {
        layout.scatter(&cols[c * pair_dim..(c + 1) * pair_dim], slice, &mut out);
    }

    // Fidelity against the ideal step map applied to the pre-step state,
    // reported as the amplitude overlap |⟨ideal|ψ⟩|.
    let mut ideal = amps.to_vec();
    apply_ideal_step_flat(&mut ideal, &layout, &step.occupied);
    let overlap: Complex64 = ideal.iter().zip(&out).map(|(a, b)| a.conj() * b).sum();
    let fidelity = overlap.norm();

    // Convert sampled dressed-slot snapshots to bare-basis populations.
    let mut samples = Vec::new();
    if samples_requested {
        let u = pair.to_bare();
        let mut tracked: Vec<(usize, usize, usize)> = Vec::new(); // (a, bit, col)
        let mut table: Vec<Vec<(f64, f64)>> = Vec::new();
        for (t, snapshot) in &raw_samples {
            for c in 0..slice_ids.len() {
                let seg = &snapshot[c * pair_dim..(c + 1) * pair_dim];
                for row in 0..pair_dim {
                    let mut amp = Complex64::ZERO;
                    for col in 0..pair_dim {
                        amp += u[(row, col)] * seg[col];
                    }
                    let pop = amp.norm_sqr();
                    if pop <= 1e-12 {
                        continue;
                    }
                    let key = (row / 2, row % 2, c);
                    let idx = match tracked.iter().position(|k| *k == key) {
                        Some(i) => i,
                        None => {
                            tracked.push(key);
                            table.push(Vec::new());
                            tracked.len() - 1
                        }
                    };
                    table[idx].push((*t, pop));
                }
            }
        }
        for (key, series) in tracked.iter().zip(&table) {
            let max_pop = series.iter().map(|p| p.1).fold(0.0, f64::max);
            if max_pop < 1e-4 {
                continue;
            }
            let (a, bit, c) = *key;
            let full = layout.full_index(a, bit, slice_ids[c]);
            let occ = space.occupations_of(full)?;
            let reg = occ[occ.len() - 1];
            let label = format!("{}:{:0width$b}", occ[0], reg, width = layout.n);
            for &(t, pop) in series {
                samples.push(PopulationSample {
                    t_us: t,
                    label: label.clone(),
                    population: pop,
                });
            }
        }
    }

    // Recorded unitary: propagate the full pair basis through the same pulse.
    let unitary = if opts.record_unitaries {
        let mut basis_cols = vec![Complex64::ZERO; pair_dim * pair_dim];
        for j in 0..pair_dim {
            basis_cols[j * pair_dim + j] = Complex64::ONE;
        }
        let n_chunks = pair_dim.div_ceil(ENGINE_CHUNK_COLS);
        let chunk_len = ENGINE_CHUNK_COLS * pair_dim;
        let source = basis_cols;
        let results = parallel::map_indexed(n_chunks, |ci| {
            let lo = ci * chunk_len;
            let hi = ((ci + 1) * chunk_len).min(source.len());
            let mut chunk = source[lo..hi].to_vec();
            engine.run(duration, h, &mut chunk, &[], 0, None);
            chunk
        });
        let mut flat = Vec::with_capacity(pair_dim * pair_dim);
        for chunk in results {
            flat.extend(chunk);
        }
        let mut u_step = Array2::zeros((pair_dim, pair_dim));
        for j in 0..pair_dim {
            for i in 0..pair_dim {
                u_step[(i, j)] = flat[j * pair_dim + i];
            }
        }
        Some(u_step)
    } else {
        None
    };

    Ok(StepRun {
        amps: out,
        summary: StepSummary {
            k: step.k,
            omega: step.omega,
            duration_us: duration,
            fidelity_vs_ideal: fidelity,
            leakage: stats_total.max_leak,
            norm_drift: stats_total.norm_drift,
            integrator_steps: stats_total.steps,
            step_size_us: stats_total.step_size,
            convergence_overlap,
        },
        samples,
        warnings,
        unitary,
    })
}

fn validate_initial_support(
    state: &StateVector,
    layout: &PairLayout,
    occupied: &OccupiedSet,
) -> Result<()> {
    let allowed: Vec<bool> = {
        let mut v = vec![false; layout.d_a];
        for &m in &occupied.photon_numbers {
            v[m] = true;
        }
        v
    };
    let below = layout.mid << layout.n;
    let mut bad = 0.0;
    for (idx, amp) in state.amplitudes().iter().enumerate() {
        let a = idx / below;
        if !allowed[a] {
            bad += amp.norm_sqr();
        }
    }
    if bad > 1e-9 {
        return Err(CoreError::SupportViolation {
            context: format!(
                "initial resonator support outside the step-(n-1) photon set \
                 (stray population {bad:.3e})"
            ),
        });
    }
    Ok(())
}

/// Execute the full plan k = n-1..0 on a state over (A ⊗ n qubits).
pub fn execute_transfer(
    initial: &StateVector,
    plan: &TransferPlan,
    opts: &ExecOptions,
) -> Result<TransferOutcome> {
    let layout = PairLayout::from_space(initial.space(), 0)?;
    if layout.d_a != plan.fock_dim || layout.n != plan.n {
        return Err(CoreError::DimensionMismatch {
            context: "state shape vs plan",
            expected: plan.fock_dim * (1 << plan.n),
            got: layout.d_a * (1 << layout.n),
        });
    }
    validate_initial_support(initial, &layout, &plan.steps[0].occupied)?;

    let mut amps = initial.amplitudes().to_vec();
    let mut reports = Vec::with_capacity(plan.n);
    let mut warnings = Vec::new();
    let mut recorded = if opts.record_unitaries {
        Some(Vec::with_capacity(plan.n))
    } else {
        None
    };

    for step in &plan.steps {
        match opts.backend {
            Backend::Ideal => {
                let slayout = PairLayout::from_space(initial.space(), step.k)?;
                apply_ideal_step_flat(&mut amps, &slayout, &step.occupied);
                reports.push(StepReport {
                    summary: StepSummary {
                        k: step.k,
                        omega: step.omega,
                        duration_us: step.pulse.duration,
                        fidelity_vs_ideal: 1.0,
                        leakage: 0.0,
                        norm_drift: 0.0,
                        integrator_steps: 0,
                        step_size_us: 0.0,
                        convergence_overlap: None,
                    },
                    samples: Vec::new(),
                });
            }
            Backend::Dynamical => {
                let run = run_step_dynamical(&amps, initial.space(), step.k, step, plan, opts)?;
                amps = run.amps;
                warnings.extend(run.warnings);
                if let (Some(rec), Some(u)) = (recorded.as_mut(), run.unitary) {
                    rec.push(u);
                }
                reports.push(StepReport {
                    summary: run.summary,
                    samples: run.samples,
                });
            }
        }
    }

    let final_state = StateVector::from_amplitudes(initial.space().clone(), amps)?;
    Ok(TransferOutcome {
        final_state,
        reports,
        recorded,
        warnings,
    })
}

/// Run a single plan step on an arbitrary register layout (used by the
/// phase-estimation pipeline, whose register is one recycled ancilla).
pub fn execute_single_step(
    state: &StateVector,
    register_bit: usize,
    step: &PlanStep,
    plan: &TransferPlan,
    opts: &ExecOptions,
) -> Result<(StateVector, StepReport)> {
    match opts.backend {
        Backend::Ideal => {
            let layout = PairLayout::from_space(state.space(), register_bit)?;
            let mut amps = state.amplitudes().to_vec();
            apply_ideal_step_flat(&mut amps, &layout, &step.occupied);
            let out = StateVector::from_amplitudes(state.space().clone(), amps)?;
            Ok((
                out,
                StepReport {
                    summary: StepSummary {
                        k: step.k,
                        omega: step.omega,
                        duration_us: step.pulse.duration,
                        fidelity_vs_ideal: 1.0,
                        leakage: 0.0,
                        norm_drift: 0.0,
                        integrator_steps: 0,
                        step_size_us: 0.0,
                        convergence_overlap: None,
                    },
                    samples: Vec::new(),
                },
            ))
        }
        Backend::Dynamical => {
            let run = run_step_dynamical(
                state.amplitudes(),
                state.space(),
                register_bit,
                step,
                plan,
                opts,
            )?;
            let out = StateVector::from_amplitudes(state.space().clone(), run.amps)?;
            Ok((
                out,
                StepReport {
                    summary: run.summary,
                    samples: run.samples,
                },
            ))
        }
    }
}

/// How to invert a transfer.
pub enum InverseMode<'a> {
    /// Apply the adjoints of the recorded forward step unitaries (exact
    /// inverse of the simulated evolution).
    RecordedAdjoint(&'a [Array2<Complex64>]),
    /// Re-run the steps in order k = 0..n-1 with the same pulses, exploiting
    /// the mirror symmetry of the transfer chains.
    Physical,
}

fn apply_pair_matrix(
    amps: &mut [Complex64],
    layout: &PairLayout,
    u: &Array2<Complex64>,
    adjoint: bool,
) {
    let pair_dim = layout.pair_dim();
    let mut pair = vec![Complex64::ZERO; pair_dim];
    let mut next = vec![Complex64::ZERO; pair_dim];
    for slice in 0..layout.slice_count() {
        layout.gather(amps, slice, &mut pair);
        for (i, n_amp) in next.iter_mut().enumerate() {
            let mut acc = Complex64::ZERO;
            for (j, p) in pair.iter().enumerate() {
                let v = if adjoint { u[(j, i)].conj() } else { u[(i, j)] };
                acc += v * p;
            }
            *n_amp = acc;
        }
        layout.scatter(&next, slice, amps);
    }
}

/// Apply recorded step unitaries to a state in forward execution order
/// (k = n-1..0). The step pulses act only on the (A, qubit k) pair, so the
/// matrices embed into any layout with bystander factors; this reproduces a
/// direct dynamical run exactly (the recording is the propagated pair basis).
pub fn apply_recorded_forward(
    state: &StateVector,
    plan: &TransferPlan,
    records: &[Array2<Complex64>],
) -> Result<StateVector> {
    if records.len() != plan.n {
        return Err(CoreError::DimensionMismatch {
            context: "recorded unitaries",
            expected: plan.n,
            got: records.len(),
        });
    }
    let mut amps = state.amplitudes().to_vec();
    for (step, u) in plan.steps.iter().zip(records.iter()) {
        let layout = PairLayout::from_space(state.space(), step.k)?;
        apply_pair_matrix(&mut amps, &layout, u, false);
    }
    StateVector::from_amplitudes(state.space().clone(), amps)
}

/// Apply recorded step unitaries a second time in ascending-k order: the
/// physical inverse (each chain is mirror symmetric, so the same pulse walks
/// tail back to head).
pub fn apply_recorded_inverse(
    state: &StateVector,
    plan: &TransferPlan,
    records: &[Array2<Complex64>],
) -> Result<StateVector> {
    if records.len() != plan.n {
        return Err(CoreError::DimensionMismatch {
            context: "recorded unitaries",
            expected: plan.n,
            got: records.len(),
        });
    }
    let mut amps = state.amplitudes().to_vec();
    for (step, u) in plan.steps.iter().zip(records.iter()).rev() {
        let layout = PairLayout::from_space(state.space(), step.k)?;
        apply_pair_matrix(&mut amps, &layout, u, false);
    }
    StateVector::from_amplitudes(state.space().clone(), amps)
}

/// Move resonator content back onto the qubits.
pub fn inverse_transfer(
    state: &StateVector,
    plan: &TransferPlan,
    mode: InverseMode<'_>,
    opts: &ExecOptions,
) -> Result<TransferOutcome> {
    let mut amps = state.amplitudes().to_vec();
    let mut reports = Vec::new();
    let mut warnings = Vec::new();

    match mode {
        InverseMode::RecordedAdjoint(records) => {
            if records.len() != plan.n {
                return Err(CoreError::DimensionMismatch {
                    context: "recorded unitaries",
                    expected: plan.n,
                    got: records.len(),
                });
            }
            for (step, u) in plan.steps.iter().zip(records.iter()).rev() {
                let layout = PairLayout::from_space(state.space(), step.k)?;
                apply_pair_matrix(&mut amps, &layout, u, true);
            }
        }
        InverseMode::Physical => {
            for step in plan.steps.iter().rev() {
                match opts.backend {
                    Backend::Ideal => {
                        let layout = PairLayout::from_space(state.space(), step.k)?;
                        // The ideal step is a swap permutation, its own inverse.
                        apply_ideal_step_flat(&mut amps, &layout, &step.occupied);
                    }
                    Backend::Dynamical => {
                        let run =
                            run_step_dynamical(&amps, state.space(), step.k, step, plan, opts)?;
                        amps = run.amps;
                        warnings.extend(run.warnings);
                        reports.push(StepReport {
                            summary: run.summary,
                            samples: run.samples,
                        });
                    }
                }
            }
        }
    }

    let final_state = StateVector::from_amplitudes(state.space().clone(), amps)?;
    Ok(TransferOutcome {
        final_state,
        reports,
        recorded: None,
        warnings,
    })
}

/// Multiply each amplitude by e^{-i·phases[a]} keyed on the resonator-A level.
pub fn apply_fock_phase_frame(state: &StateVector, table: &PhaseTable) -> Result<StateVector> {
    let dims = state.space().factor_dims();
    let below: usize = dims[1..].iter().product();
    let mut amps = state.amplitudes().to_vec();
    for (idx, amp) in amps.iter_mut().enumerate() {
        let a = idx / below;
        if a < table.phases.len() {
            *amp *= Complex64::from_polar(1.0, -table.phases[a]);
        }
    }
    StateVector::from_amplitudes(state.space().clone(), amps)
}

/// Multiply each amplitude by e^{-i·phases[r]} keyed on the register index
/// (the register is the last factor).
pub fn apply_register_phase_frame(state: &StateVector, table: &PhaseTable) -> Result<StateVector> {
    let dims = state.space().factor_dims();
    let reg_dim = *dims.last().expect("at least one factor");
    let mut amps = state.amplitudes().to_vec();
    for (idx, amp) in amps.iter_mut().enumerate() {
        let r = idx % reg_dim;
        if r < table.phases.len() {
            *amp *= Complex64::from_polar(1.0, -table.phases[r]);
        }
    }
    StateVector::from_amplitudes(state.space().clone(), amps)
}

/// Calibrate the forward phase frame: transfer the uniform register
/// superposition once and read the residual phase of every target level.
pub fn calibrate_forward_frame(plan: &TransferPlan, opts: &ExecOptions) -> Result<PhaseTable> {
    let q = 1usize << plan.n;
    let space = register_space(plan.n, plan.fock_dim);
    let mut amps = vec![Complex64::ZERO; space.total_dim()];
    let scale = Complex64::new(1.0 / (q as f64).sqrt(), 0.0);
    for r in 0..q {
        amps[r] = scale; // a = 0 block
    }
    let initial = StateVector::from_amplitudes(space, amps)?;
    let out = execute_transfer(&initial, plan, opts)?;
    let phases = (0..q)
        .map(|f| out.final_state.amplitudes()[f * q].arg())
        .collect();
    Ok(PhaseTable { phases })
}

/// Calibrate the inverse phase frame: run the physical inverse on the uniform
/// Fock superposition and read the residual phase of every register target.
pub fn calibrate_inverse_frame(plan: &TransferPlan, opts: &ExecOptions) -> Result<PhaseTable> {
    let q = 1usize << plan.n;
    let space = register_space(plan.n, plan.fock_dim);
    let mut amps = vec![Complex64::ZERO; space.total_dim()];
    let scale = Complex64::new(1.0 / (q as f64).sqrt(), 0.0);
    for f in 0..q {
        amps[f * q] = scale; // register = 0…0
    }
    let initial = StateVector::from_amplitudes(space, amps)?;
    let out = inverse_transfer(&initial, plan, InverseMode::Physical, opts)?;
    let phases = (0..q)
        .map(|r| out.final_state.amplitudes()[r].arg())
        .collect();
    Ok(PhaseTable { phases })
}

/// Convenience: |0⟩_A ⊗ |bits⟩ over the plan's composite space.
pub fn initial_register_state(plan: &TransferPlan, bits: &str) -> Result<StateVector> {
    if bits.len() != plan.n {
        return Err(CoreError::DimensionMismatch {
            context: "bit string length",
            expected: plan.n,
            got: bits.len(),
        });
    }
    let space = register_space(plan.n, plan.fock_dim);
    basis_state(&space, &[0, bits_to_fock(bits)?])
}

/// Convenience: |0⟩_A ⊗ Σ c_r |r⟩ over the plan's composite space.
pub fn initial_superposition(plan: &TransferPlan, coeffs: &[Complex64]) -> Result<StateVector> {
    let q = 1usize << plan.n;
    if coeffs.len() != q {
        return Err(CoreError::DimensionMismatch {
            context: "register coefficients",
            expected: q,
            got: coeffs.len(),
        });
    }
    let space = register_space(plan.n, plan.fock_dim);
    let mut amps = vec![Complex64::ZERO; space.total_dim()];
    amps[..q].copy_from_slice(coeffs);
    StateVector::normalized(space, amps)
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    fn nominal_plan(n: usize, omega_khz: f64) -> TransferPlan {
        let params = DeviceParams::nominal(n);
        let omegas = vec![crate::khz(omega_khz); n];
        build_plan(
            n,
            &omegas,
            &params,
            DressingMode::Ideal,
            DriveQuadrature::Y,
            4,
        )
        .unwrap()
    }

    #[test]
    fn bits_to_fock_examples() {
        assert_eq!(bits_to_fock("110").unwrap(), 6);
        assert_eq!(bits_to_fock("000").unwrap(), 0);
        assert_eq!(bits_to_fock("111").unwrap(), 7);
        assert!(bits_to_fock("10x").is_err());
    }

    #[test]
    fn plan_for_three_qubits_at_200_khz() {
        let plan = nominal_plan(3, 200.0);
        assert_eq!(plan.steps.len(), 3);
        assert_eq!(plan.steps[0].k, 2);
        assert_eq!(plan.steps[2].k, 0);
        for step in &plan.steps {
            assert_abs_diff_eq!(step.pulse.duration, 2.5, epsilon = 1e-12);
        }
        assert_abs_diff_eq!(plan.tau_transfer, 3.0 * (2.5 + 0.2), epsilon = 1e-12);
    }

    #[test]
    fn plan_for_one_qubit_is_single_photon_preserving_step() {
        let plan = nominal_plan(1, 200.0);
        assert_eq!(plan.steps.len(), 1);
        assert_eq!(plan.steps[0].k, 0);
        assert_eq!(plan.steps[0].pulse.components.len(), 2);
    }

    #[test]
    fn mixed_omega_plan() {
        let params = DeviceParams::nominal(3);
        let omegas = [crate::mhz(5.0), crate::mhz(5.0), crate::khz(200.0)];
        let plan = build_plan(
            3,
            &omegas,
            &params,
            DressingMode::Ideal,
            DriveQuadrature::Y,
            4,
        )
        .unwrap();
        assert_abs_diff_eq!(plan.steps[0].pulse.duration, 0.1, epsilon = 1e-12);
        assert_abs_diff_eq!(plan.steps[2].pulse.duration, 2.5, epsilon = 1e-12);
    }

    #[test]
    fn ideal_step_unitary_examples() {
        let d = 12;
        let u2 = ideal_step_unitary(2, 3, d).unwrap();
        // |0⟩_A |1⟩₂ → |4⟩_A |0⟩₂
        assert_eq!(u2[(4 * 2, 1)], Complex64::ONE);
        let u1 = ideal_step_unitary(1, 3, d).unwrap();
        // |4⟩_A |1⟩₁ → |6⟩_A |0⟩₁
        assert_eq!(u1[(6 * 2, 4 * 2 + 1)], Complex64::ONE);

        // Permutations are unitary: U U† = 1.
        let udag = crate::numerics::dagger(&u1);
        let prod = u1.dot(&udag);
        for i in 0..2 * d {
            for j in 0..2 * d {
                let want = if i == j { 1.0 } else { 0.0 };
                assert_abs_diff_eq!(prod[(i, j)].re, want, epsilon = 1e-14);
                assert_abs_diff_eq!(prod[(i, j)].im, 0.0, epsilon = 1e-14);
            }
        }
    }

    #[test]
    fn ideal_backend_maps_every_basis_string_exactly() {
        for n in 1..=3usize {
            let plan = nominal_plan(n, 200.0);
            let opts = ExecOptions::ideal();
            for r in 0..(1usize << n) {
                let bits = format!("{:0width$b}", r, width = n);
                let initial = initial_register_state(&plan, &bits).unwrap();
                let out = execute_transfer(&initial, &plan, &opts).unwrap();
                let target = out.final_state.space().index_of(&[r, 0]).unwrap();
                assert_abs_diff_eq!(
                    out.final_state.amplitudes()[target].norm_sqr(),
                    1.0,
                    epsilon = 1e-15
                );
            }
        }
    }

    #[test]
    fn ideal_backend_transfers_the_ghz_state() {
        let plan = nominal_plan(3, 200.0);
        let opts = ExecOptions::ideal();
        let inv = Complex64::new(std::f64::consts::FRAC_1_SQRT_2, 0.0);
        let mut coeffs = vec![Complex64::ZERO; 8];
        coeffs[0] = inv;
        coeffs[7] = inv;
        let initial = initial_superposition(&plan, &coeffs).unwrap();
        let out = execute_transfer(&initial, &plan, &opts).unwrap();
        let space = out.final_state.space();
        let zero = space.index_of(&[0, 0]).unwrap();
        let seven = space.index_of(&[7, 0]).unwrap();
        assert_abs_diff_eq!(
            out.final_state.amplitudes()[zero].re,
            std::f64::consts::FRAC_1_SQRT_2,
            epsilon = 1e-12
        );
        assert_abs_diff_eq!(
            out.final_state.amplitudes()[seven].re,
            std::f64::consts::FRAC_1_SQRT_2,
            epsilon = 1e-12
        );
        for step in &out.reports {
            assert_abs_diff_eq!(step.summary.fidelity_vs_ideal, 1.0, epsilon = 1e-15);
        }
    }

    #[test]
    fn ideal_ground_state_is_fixed_point() {
        let plan = nominal_plan(3, 200.0);
        let initial = initial_register_state(&plan, "000").unwrap();
        let out = execute_transfer(&initial, &plan, &ExecOptions::ideal()).unwrap();
        assert_abs_diff_eq!(
            crate::hilbert::overlap_fidelity(&initial, &out.final_state).unwrap(),
            1.0,
            epsilon = 1e-15
        );
    }

    #[test]
    fn ideal_physical_inverse_round_trips() {
        let plan = nominal_plan(3, 200.0);
        let opts = ExecOptions::ideal();
        let mut coeffs = vec![Complex64::ZERO; 8];
        for (r, c) in coeffs.iter_mut().enumerate() {
            *c = Complex64::new(1.0 + r as f64, 0.5 * r as f64);
        }
        let initial = initial_superposition(&plan, &coeffs).unwrap();
        let fwd = execute_transfer(&initial, &plan, &opts).unwrap();
        let back = inverse_transfer(&fwd.final_state, &plan, InverseMode::Physical, &opts).unwrap();
        assert!(
            crate::hilbert::overlap_fidelity(&initial, &back.final_state).unwrap() > 1.0 - 1e-12
        );
    }

    #[test]
    fn initial_support_outside_occupied_set_is_rejected() {
        let plan = nominal_plan(2, 200.0);
        let space = register_space(2, plan.fock_dim);
        // One photon already in A is not in the step-(n-1) occupied set {0}.
        let bad = basis_state(&space, &[1, 0]).unwrap();
        assert!(matches!(
            execute_transfer(&bad, &plan, &ExecOptions::ideal()),
            Err(CoreError::SupportViolation { .. })
        ));
    }

    #[test]
    fn schedule_accounts_for_all_stages() {
        let plan = nominal_plan(3, 200.0);
        let s = plan.schedule(2.5, 0.4);
        assert_abs_diff_eq!(s.tau1_us, plan.tau_transfer, epsilon = 1e-15);
        assert_abs_diff_eq!(s.tau2_us, 2.5, epsilon = 1e-15);
        assert_abs_diff_eq!(s.tau3_us, 0.4, epsilon = 1e-15);
        assert_abs_diff_eq!(s.tau_ad_us, 0.1, epsilon = 1e-15);
    }

    #[test]
    fn phase_frames_apply_per_level() {
        let plan = nominal_plan(2, 200.0);
        let space = register_space(2, plan.fock_dim);
        let mut amps = vec![Complex64::ZERO; space.total_dim()];
        for f in 0..4usize {
            amps[f * 4] = Complex64::new(0.5, 0.0);
        }
        let state = StateVector::from_amplitudes(space, amps).unwrap();
        let table = PhaseTable {
            phases: vec![0.0, 0.25, 0.5, 0.75],
        };
        let out = apply_fock_phase_frame(&state, &table).unwrap();
        for f in 0..4usize {
            let got = out.amplitudes()[f * 4];
            let want = Complex64::new(0.5, 0.0) * Complex64::from_polar(1.0, -(f as f64) * 0.25);
            assert_abs_diff_eq!((got - want).norm(), 0.0, epsilon = 1e-12);
        }
    }
}
