//! Pulse-level validation of the transfer dynamics: chain-by-chain transfer
//! populations, bystander protection, basis-map correctness, linearity,
//! inversion, drive-quadrature independence, and step-halving convergence.
//! These run the full interaction-picture integration and take a few minutes
//! altogether.

use num_complex::Complex64;
use oscqft_core::dynamics::{
    self, DeviceParams, DressedPair, DressingMode, DriveQuadrature,
};
use oscqft_core::hilbert::{self, StateVector};
use oscqft_core::transfer::{self, ExecOptions, InverseMode, TransferPlan};
use oscqft_core::{drives, parallel};

fn nominal_plan(n: usize, omegas: &[f64]) -> TransferPlan {
    let params = DeviceParams::nominal(n);
    transfer::build_plan(
        n,
        omegas,
        &params,
        DressingMode::Ideal,
        DriveQuadrature::Y,
        4,
    )
    .unwrap()
}

fn fig2_plan(n: usize) -> TransferPlan {
    nominal_plan(n, &vec![oscqft_core::khz(200.0); n])
}

/// Every transfer chain of the three-qubit plan walks its head to its tail
/// with population ≥ 0.998 in exactly τ_map at the 200 kHz drive scale.
#[test]
fn chains_transfer_head_to_tail() {
    let n = 3;
    let plan = fig2_plan(n);
    let pair = DressedPair::new(plan.fock_dim, plan.params.omega_a, plan.params.g).unwrap();

    // (step index, chain root m, head manifold, tail manifold, tail branch +)
    let mut chains = Vec::new();
    for (si, step) in plan.steps.iter().enumerate() {
        for &m in &step.occupied.photon_numbers {
            let head = m + 1;
            let (tail, tail_plus) = if step.k == 0 {
                (m + 1, false) // three-node ladder returns to |m+1,-⟩
            } else {
                (m + (1 << step.k), false)
            };
            chains.push((si, m, head, tail, tail_plus));
        }
    }
    assert_eq!(chains.len(), 7);

    // The engine carries dressed amplitudes in the slot convention:
    // slot (a, 1) holds |a+1,+⟩ and slot (a, 0) holds |a,-⟩.
    let pair_space = dynamics::pair_space(plan.fock_dim);
    let results = parallel::map_indexed(chains.len(), |i| {
        let (si, m, head, tail, _tail_plus) = chains[i];
        let step = &plan.steps[si];
        let initial = hilbert::basis_state(&pair_space, &[head - 1, 1]).unwrap();
        let (out, report) = dynamics::propagate_pulse(
            &pair,
            plan.quadrature,
            &step.pulse.tones(),
            step.pulse.duration,
            1.0,
            &initial,
        )
        .unwrap();
        let tail_slot = pair_space.index_of(&[tail, 0]).unwrap();
        let population = out.amplitudes()[tail_slot].norm_sqr();
        (step.k, m, population, report.norm_drift)
    });
    for (k, m, population, drift) in results {
        assert!(
            population >= 0.998,
            "chain k={k}, m={m} reached the tail with population {population}"
        );
        assert!(drift < 1e-9, "norm drift {drift}");
    }
}

/// Dressed |m,-⟩ states with m in the occupied set sit outside every chain:
/// their population moves by less than 1e-3 over τ_map.
#[test]
fn occupied_minus_states_stay_untouched() {
    let n = 3;
    let plan = fig2_plan(n);
    let pair = DressedPair::new(plan.fock_dim, plan.params.omega_a, plan.params.g).unwrap();

    let mut cases = Vec::new();
    for (si, step) in plan.steps.iter().enumerate() {
        for &m in &step.occupied.photon_numbers {
            cases.push((si, m));
        }
    }
    let pair_space = dynamics::pair_space(plan.fock_dim);
    let results = parallel::map_indexed(cases.len(), |i| {
        let (si, m) = cases[i];
        let step = &plan.steps[si];
        // Slot (m, 0) is the dressed |m,-⟩ (the ground state at m = 0).
        let initial = hilbert::basis_state(&pair_space, &[m, 0]).unwrap();
        let (out, _) = dynamics::propagate_pulse(
            &pair,
            plan.quadrature,
            &step.pulse.tones(),
            step.pulse.duration,
            1.0,
            &initial,
        )
        .unwrap();
        let stay = out.inner(&initial).unwrap().norm_sqr();
        (step.k, m, 1.0 - stay)
    });
    for (k, m, moved) in results {
        assert!(
            moved < 1e-3,
            "untouched state |{m},-⟩ lost {moved:.2e} population during step k={k}"
        );
    }
}

/// Every computational basis string of every register size up to three maps
/// onto its Fock target with population ≥ 0.995, and the qubits come back to
/// the ground state with less than 1e-2 total excitation.
#[test]
fn basis_strings_map_to_their_fock_targets() {
    for n in 1..=3usize {
        let plan = fig2_plan(n);
        let q = 1usize << n;
        let outcomes = parallel::map_indexed(q, |r| {
            let bits = format!("{:0width$b}", r, width = n);
            let initial = transfer::initial_register_state(&plan, &bits).unwrap();
            let out =
                transfer::execute_transfer(&initial, &plan, &ExecOptions::default()).unwrap();
            let space = out.final_state.space();
            let target = space.index_of(&[r, 0]).unwrap();
            let population = out.final_state.amplitudes()[target].norm_sqr();

            // Total excited population across the register.
            let mut excited = 0.0;
            for (idx, amp) in out.final_state.amplitudes().iter().enumerate() {
                if idx % q != 0 {
                    excited += amp.norm_sqr();
                }
            }
            (r, population, excited)
        });
        for (r, population, excited) in outcomes {
            assert!(
                population >= 0.995,
                "n={n}, string {r:0n$b}: target population {population}"
            );
            assert!(
                excited < 1e-2,
                "n={n}, string {r:0n$b}: residual qubit excitation {excited:.2e}"
            );
        }
    }
}

/// The dynamical pipeline is one linear map: transferring a superposition
/// equals superposing the individual transfers.
#[test]
fn dynamical_transfer_is_linear() {
    let n = 2;
    let plan = fig2_plan(n);
    let opts = ExecOptions::default();
    let c1 = Complex64::new(0.6, 0.2);
    let c2 = Complex64::new(-0.3, 0.7);

    let inputs: Vec<Vec<Complex64>> = vec![
        {
            let mut v = vec![Complex64::ZERO; 4];
            v[0b01] = Complex64::ONE;
            v
        },
        {
            let mut v = vec![Complex64::ZERO; 4];
            v[0b10] = Complex64::ONE;
            v
        },
        {
            let mut v = vec![Complex64::ZERO; 4];
            v[0b01] = c1;
            v[0b10] = c2;
            let norm: f64 = v.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt();
            v.iter_mut().for_each(|z| *z /= norm);
            v
        },
    ];
    let outs = parallel::map_indexed(inputs.len(), |i| {
        let initial = transfer::initial_superposition(&plan, &inputs[i]).unwrap();
        transfer::execute_transfer(&initial, &plan, &opts)
            .unwrap()
            .final_state
    });

    let norm = (c1.norm_sqr() + c2.norm_sqr()).sqrt();
    let expect: Vec<Complex64> = outs[0]
        .amplitudes()
        .iter()
        .zip(outs[1].amplitudes())
        .map(|(a, b)| (c1 * a + c2 * b) / norm)
        .collect();
    let max_diff = expect
        .iter()
        .zip(outs[2].amplitudes())
        .map(|(e, g)| (e - g).norm())
        .fold(0.0, f64::max);
    assert!(max_diff < 1e-6, "linearity violated at {max_diff:.2e}");
}

/// Applying the adjoint of the recorded forward unitaries inverts the
/// simulated evolution to numerical precision.
#[test]
fn recorded_adjoint_inverts_exactly() {
    let n = 2;
    let plan = fig2_plan(n);
    let opts = ExecOptions {
        record_unitaries: true,
        ..Default::default()
    };
    let coeffs: Vec<Complex64> = vec![
        Complex64::new(0.5, 0.1),
        Complex64::new(-0.4, 0.3),
        Complex64::new(0.2, -0.6),
        Complex64::new(0.3, 0.2),
    ];
    let initial = transfer::initial_superposition(&plan, &coeffs).unwrap();
    let fwd = transfer::execute_transfer(&initial, &plan, &opts).unwrap();
    let records = fwd.recorded.unwrap();
    let back = transfer::inverse_transfer(
        &fwd.final_state,
        &plan,
        InverseMode::RecordedAdjoint(&records),
        &ExecOptions::default(),
    )
    .unwrap();
    let fidelity = hilbert::overlap_fidelity(&initial, &back.final_state).unwrap();
    assert!(
        fidelity > 1.0 - 1e-9,
        "recorded-adjoint round trip fidelity {fidelity}"
    );
}

/// Re-running the pulses in ascending step order walks the mirror-symmetric
/// chains backwards: resonator content returns to the register with fidelity
/// ≥ 0.995 once the calibrated per-level phases are taken out. The uniform
/// superposition doubles as the frame calibration; the two-component
/// |0⟩+|7⟩ flavour is reported as well (its top level crosses the most
/// crowded combs and retains slightly less).
#[test]
fn physical_inverse_recovers_the_register() {
    let n = 3;
    let plan = fig2_plan(n);
    let opts = ExecOptions::default();

    let q = 1usize << n;
    let space = transfer::register_space(n, plan.fock_dim);
    let scale = Complex64::new(1.0 / (q as f64).sqrt(), 0.0);
    let mut amps = vec![Complex64::ZERO; space.total_dim()];
    for f in 0..q {
        amps[space.index_of(&[f, 0]).unwrap()] = scale;
    }
    let start = StateVector::from_amplitudes(space.clone(), amps).unwrap();
    let out = transfer::inverse_transfer(&start, &plan, InverseMode::Physical, &opts).unwrap();
    let frame = transfer::PhaseTable {
        phases: (0..q).map(|r| out.final_state.amplitudes()[r].arg()).collect(),
    };
    let aligned = transfer::apply_register_phase_frame(&out.final_state, &frame).unwrap();

    let mut want = vec![Complex64::ZERO; space.total_dim()];
    for r in 0..q {
        want[space.index_of(&[0, r]).unwrap()] = scale;
    }
    let target = StateVector::from_amplitudes(space.clone(), want).unwrap();
    let fidelity = hilbert::overlap_fidelity(&aligned, &target).unwrap();
    assert!(
        fidelity >= 0.995,
        "physical inverse fidelity {fidelity} after phase alignment"
    );

    let inv = Complex64::new(std::f64::consts::FRAC_1_SQRT_2, 0.0);
    let mut amps = vec![Complex64::ZERO; space.total_dim()];
    amps[space.index_of(&[0, 0]).unwrap()] = inv;
    amps[space.index_of(&[7, 0]).unwrap()] = inv;
    let ghz = StateVector::from_amplitudes(space.clone(), amps).unwrap();
    let out2 = transfer::inverse_transfer(&ghz, &plan, InverseMode::Physical, &opts).unwrap();
    let aligned2 = transfer::apply_register_phase_frame(&out2.final_state, &frame).unwrap();
    let mut want2 = vec![Complex64::ZERO; space.total_dim()];
    want2[space.index_of(&[0, 0b000]).unwrap()] = inv;
    want2[space.index_of(&[0, 0b111]).unwrap()] = inv;
    let target2 = StateVector::from_amplitudes(space, want2).unwrap();
    let f_ghz = hilbert::overlap_fidelity(&aligned2, &target2).unwrap();
    println!("two-component inverse fidelity: {f_ghz:.6}");
    assert!(f_ghz >= 0.99, "two-component inverse fidelity {f_ghz}");
}

/// The two drive quadratures transfer with the same populations; only
/// per-basis-state phases differ.
#[test]
fn transfer_is_quadrature_independent_up_to_phases() {
    let n = 2;
    let params = DeviceParams::nominal(n);
    let omegas = [oscqft_core::mhz(5.0), oscqft_core::khz(200.0)];
    let q = 1usize << n;
    let uniform = vec![Complex64::new(1.0 / (q as f64).sqrt(), 0.0); q];

    let mut retentions = Vec::new();
    let mut raw = Vec::new();
    for quadrature in [DriveQuadrature::Y, DriveQuadrature::X] {
        let plan = transfer::build_plan(
            n,
            &omegas,
            &params,
            DressingMode::Ideal,
            quadrature,
            4,
        )
        .unwrap();
        let initial = transfer::initial_superposition(&plan, &uniform).unwrap();
        let out = transfer::execute_transfer(&initial, &plan, &ExecOptions::default()).unwrap();
        let space = out.final_state.space();
        let per_string: Vec<f64> = (0..q)
            .map(|m| out.final_state.amplitudes()[space.index_of(&[m, 0]).unwrap()].norm_sqr())
            .collect();
        retentions.push(per_string);
        raw.push(
            out.reports
                .iter()
                .map(|r| r.summary.fidelity_vs_ideal)
                .collect::<Vec<_>>(),
        );
    }
    for m in 0..q {
        let (y, x) = (retentions[0][m], retentions[1][m]);
        // The chain mechanism is quadrature independent; the residual
        // beyond-rotating-wave corrections differ at the 1e-3 level.
        assert!(
            (y - x).abs() < 5e-3,
            "string {m}: target population differs between quadratures ({y} vs {x})"
        );
    }
    // The raw (phase-sensitive) step overlaps are allowed to differ; the
    // k = 0 three-node chain arrives with a quadrature-dependent phase.
    println!("raw step overlaps (Y then X): {:?} / {:?}", raw[0], raw[1]);
}

/// Halving the integrator step changes reported fidelities by less than
/// 1e-4 (checked on the 5 MHz step and on a full two-qubit transfer).
#[test]
fn step_halving_leaves_fidelities_unchanged() {
    // Single 5 MHz step of the three-qubit plan.
    let n = 3;
    let plan3 = nominal_plan(
        n,
        &[
            oscqft_core::mhz(5.0),
            oscqft_core::mhz(5.0),
            oscqft_core::khz(200.0),
        ],
    );
    let initial = {
        let q = 1usize << n;
        let inv = Complex64::new(std::f64::consts::FRAC_1_SQRT_2, 0.0);
        let mut c = vec![Complex64::ZERO; q];
        c[0] = inv;
        c[q - 1] = inv;
        transfer::initial_superposition(&plan3, &c).unwrap()
    };
    let full =
        transfer::execute_single_step(&initial, 2, &plan3.steps[0], &plan3, &ExecOptions::default())
            .unwrap()
            .1;
    let halved = transfer::execute_single_step(
        &initial,
        2,
        &plan3.steps[0],
        &plan3,
        &ExecOptions {
            step_scale: 0.5,
            ..Default::default()
        },
    )
    .unwrap()
    .1;
    let diff = (full.summary.fidelity_vs_ideal - halved.summary.fidelity_vs_ideal).abs();
    assert!(diff < 1e-4, "5 MHz step fidelity moved by {diff:.2e}");

    // Full two-qubit transfer at 200 kHz.
    let plan2 = fig2_plan(2);
    let initial2 = {
        let inv = Complex64::new(std::f64::consts::FRAC_1_SQRT_2, 0.0);
        let mut c = vec![Complex64::ZERO; 4];
        c[0] = inv;
        c[3] = inv;
        transfer::initial_superposition(&plan2, &c).unwrap()
    };
    let runs = parallel::map_indexed(2, |i| {
        let opts = ExecOptions {
            step_scale: if i == 0 { 1.0 } else { 0.5 },
            ..Default::default()
        };
        transfer::execute_transfer(&initial2, &plan2, &opts)
            .unwrap()
            .reports
            .iter()
            .map(|r| r.summary.fidelity_vs_ideal)
            .collect::<Vec<_>>()
    });
    for (a, b) in runs[0].iter().zip(&runs[1]) {
        assert!((a - b).abs() < 1e-4, "step fidelity moved by {:.2e}", (a - b).abs());
    }
}

/// The engine's convergence report (full vs half step overlap) sits at one
/// for a resolved pulse.
#[test]
fn convergence_overlap_reported_when_requested() {
    let plan = fig2_plan(1);
    let initial = transfer::initial_register_state(&plan, "1").unwrap();
    let opts = ExecOptions {
        convergence_check: true,
        ..Default::default()
    };
    let out = transfer::execute_transfer(&initial, &plan, &opts).unwrap();
    let overlap = out.reports[0]
        .summary
        .convergence_overlap
        .expect("requested");
    assert!(overlap > 1.0 - 1e-8, "half-step overlap {overlap}");
}

/// The measurement-based disentangling route on the dynamical backend: the
/// conditioned B state stays within 1% of the brute-force transform.
#[test]
fn dynamical_disentangle_matches_the_oracle() {
    use oscqft_core::kerr::{self, KerrDirection};

    let n = 2;
    let plan = fig2_plan(n);
    let opts = ExecOptions::default();
    let q = 1usize << n;
    let inverse_frame = transfer::calibrate_inverse_frame(&plan, &opts).unwrap();

    // Ideal post-evolution joint state Σ_m c_m |m⟩_A |F(m)⟩_B over the
    // padded A truncation.
    let c: Vec<Complex64> = {
        let raw = [
            Complex64::new(0.6, 0.1),
            Complex64::new(-0.2, 0.4),
            Complex64::new(0.3, -0.3),
            Complex64::new(0.4, 0.2),
        ];
        let norm: f64 = raw.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt();
        raw.iter().map(|z| z / norm).collect()
    };
    let space = hilbert::CompositeSpace::new(vec![
        hilbert::Factor::Fock(
            hilbert::FockSpace::new(plan.fock_dim, hilbert::SpaceLabel::ResonatorA).unwrap(),
        ),
        hilbert::Factor::Fock(
            hilbert::FockSpace::new(q, hilbert::SpaceLabel::ResonatorB).unwrap(),
        ),
    ])
    .unwrap();
    let mut amps = vec![Complex64::ZERO; plan.fock_dim * q];
    for m in 0..q {
        let mut delta = vec![Complex64::ZERO; q];
        delta[m] = Complex64::ONE;
        let fm = kerr::dft_oracle(&delta, KerrDirection::Forward);
        for nn in 0..q {
            amps[m * q + nn] = c[m] * fm[nn];
        }
    }
    let joint = StateVector::from_amplitudes(space, amps).unwrap();

    let result =
        kerr::physical_disentangle(&joint, &plan, &opts, Some(&inverse_frame)).unwrap();
    let oracle = kerr::dft_oracle(&c, KerrDirection::Forward);
    let overlap: Complex64 = oracle
        .iter()
        .zip(result.b_state.amplitudes())
        .map(|(a, b)| a.conj() * b)
        .sum();
    let fidelity = overlap.norm_sqr();
    assert!(
        fidelity >= 0.99,
        "dynamical disentangle fidelity {fidelity} (probability {}, residual {:.2e})",
        result.probability,
        result.a_residual
    );
    assert!((result.probability - 1.0 / q as f64).abs() < 0.01);
}

/// Driving the ancilla rounds with real pulses builds the same phase state
/// as the closed form, once the calibrated per-level phases are removed.
#[test]
fn physical_ancilla_rounds_build_the_phase_state() {
    use oscqft_core::phase_est::{self, EstimationMode, PhaseScenario};

    let n = 2;
    let params = DeviceParams::nominal(n);
    let plan = transfer::build_plan(
        n,
        &[oscqft_core::mhz(5.0), oscqft_core::khz(200.0)],
        &params,
        DressingMode::Ideal,
        DriveQuadrature::Y,
        4,
    )
    .unwrap();
    let opts = ExecOptions::default();
    let q = 1usize << n;

    // Calibrate the pipeline's own per-level phases at θ = 0.
    let mut calib = PhaseScenario::new(0.0, n);
    calib.mode = EstimationMode::Physical;
    let (flat, _) = phase_est::ancilla_pipeline_state(&calib, &plan, &opts, None).unwrap();
    let layout = hilbert::PairLayout::from_space(flat.space(), 0).unwrap();
    let frame = transfer::PhaseTable {
        phases: (0..q)
            .map(|m| flat.amplitudes()[layout.full_index(m, 0, 0)].arg())
            .collect(),
    };

    let theta = 0.37 * std::f64::consts::TAU;
    let mut scenario = PhaseScenario::new(theta, n);
    scenario.mode = EstimationMode::Physical;
    let (joint, _) =
        phase_est::ancilla_pipeline_state(&scenario, &plan, &opts, Some(&frame)).unwrap();
    let want = phase_est::build_phase_state(theta, q).unwrap();
    let mut overlap = Complex64::ZERO;
    for m in 0..q {
        overlap +=
            want.amplitudes()[m].conj() * joint.amplitudes()[layout.full_index(m, 0, 0)];
    }
    let fidelity = overlap.norm_sqr();
    assert!(
        fidelity >= 0.99,
        "physical ancilla pipeline fidelity {fidelity}"
    );

    // The end-to-end physical estimation still lands on the nearest integer.
    let kerr_config = oscqft_core::kerr::KerrConfig {
        chi: oscqft_core::khz(50.0),
        winding: 0,
        direction: oscqft_core::kerr::KerrDirection::Inverse,
    };
    let result = phase_est::run_phase_estimation_physical(
        &scenario,
        &kerr_config,
        &plan,
        &opts,
        Some(&frame),
    )
    .unwrap();
    let nearest = (q as f64 * theta / std::f64::consts::TAU).round() as usize % q;
    assert_eq!(result.n_hat, nearest);
    let total: f64 = result.distribution.iter().sum();
    assert!((total - 1.0).abs() < 1e-9);
}

/// Guard-band synthesis failure reproduces the reason the last step runs at
/// a reduced drive scale: at 5 MHz the photon-preserving comb lines collide.
#[test]
fn last_step_at_full_speed_fails_loudly() {
    let n = 3;
    let params = DeviceParams::nominal(n);
    let err = transfer::build_plan(
        n,
        &vec![oscqft_core::mhz(5.0); n],
        &params,
        DressingMode::Ideal,
        DriveQuadrature::Y,
        4,
    )
    .unwrap_err();
    assert!(matches!(err, oscqft_core::CoreError::GuardBand { .. }));
    // The drives module agrees when asked directly.
    let occupied = drives::occupied_photon_numbers(n, 0).unwrap();
    assert!(
        drives::synthesize_photon_preserving_drive(&occupied, oscqft_core::mhz(5.0), &params)
            .is_err()
    );
}
