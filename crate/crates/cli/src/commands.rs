//! The named experiments behind each CLI subcommand. Every command resolves
//! its configuration, runs one pipeline, writes CSV/JSON artifacts into the
//! run directory, and returns a `RunRecord` describing the run.

use std::path::PathBuf;

use num_complex::Complex64;
use serde::Serialize;

use oscqft_core::hilbert::{self, StateVector};
use oscqft_core::kerr::{self, KerrDirection};
use oscqft_core::phase_est::{self, EstimationMode, PhaseScenario};
use oscqft_core::transfer::{self, Backend, ExecOptions};
use oscqft_core::{error_model, CoreError, TWO_PI};

use crate::config::{Config, ConfigError};
use crate::output::{fmt_f64, write_csv, write_json, write_text};

/// Command failure with the process exit code it maps to.
#[derive(Debug)]
pub struct CmdError {
    pub message: String,
    pub exit_code: i32,
}

impl std::fmt::Display for CmdError {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "{}", self.message)
    }
}
impl std::error::Error for CmdError {}

impl From<ConfigError> for CmdError {
    fn from(e: ConfigError) -> Self {
        CmdError {
            message: e.to_string(),
            exit_code: 2,
        }
    }
}

impl From<CoreError> for CmdError {
    fn from(e: CoreError) -> Self {
        let exit_code = match e {
            CoreError::NormDrift { .. } | CoreError::Leakage { .. } => 3,
            _ => 4,
        };
        CmdError {
            message: e.to_string(),
            exit_code,
        }
    }
}

impl From<std::io::Error> for CmdError {
    fn from(e: std::io::Error) -> Self {
        CmdError {
            message: format!("io error: {e}"),
            exit_code: 1,
        }
    }
}

/// Execution-mode selection shared by the commands.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum RunMode {
    Ideal,
    Physical,
}

/// Resolved invocation context.
#[derive(Debug, Clone)]
pub struct Context {
    pub config: Config,
    pub seed: u64,
    pub mode: RunMode,
    pub step_scale: f64,
    pub fock_pad: Option<usize>,
    pub out_dir: PathBuf,
}

impl Context {
    fn exec_options(&self, backend: Backend) -> ExecOptions {
        ExecOptions {
            backend,
            step_scale: self.step_scale,
            ..Default::default()
        }
    }
}

#[derive(Debug, Serialize)]
pub struct Versions {
    pub crate_version: &'static str,
}

/// Everything needed to reproduce and audit a run. All sibling artifacts are
/// byte-deterministic for a given config and seed; the timestamp and
/// wall-clock fields live only in this record.
#[derive(Debug, Serialize)]
pub struct RunRecord {
    pub command: String,
    pub mode: String,
    pub seed: u64,
    pub config: Config,
    pub outputs: Vec<String>,
    pub versions: Versions,
    pub timestamp_unix_s: u64,
    pub wall_clock_s: f64,
    pub reports: serde_json::Value,
}

fn finish_record(
    ctx: &Context,
    command: &str,
    outputs: Vec<PathBuf>,
    reports: serde_json::Value,
    started: std::time::Instant,
) -> Result<RunRecord, CmdError> {
    let record = RunRecord {
        command: command.to_string(),
        mode: match ctx.mode {
            RunMode::Ideal => "ideal".to_string(),
            RunMode::Physical => "physical".to_string(),
        },
        seed: ctx.seed,
        config: ctx.config.clone(),
        outputs: outputs
            .iter()
            .map(|p| p.file_name().unwrap().to_string_lossy().into_owned())
            .collect(),
        versions: Versions {
            crate_version: env!("CARGO_PKG_VERSION"),
        },
        timestamp_unix_s: std::time::SystemTime::now()
            .duration_since(std::time::UNIX_EPOCH)
            .map(|d| d.as_secs())
            .unwrap_or(0),
        wall_clock_s: started.elapsed().as_secs_f64(),
        reports,
    };
    write_json(&ctx.out_dir, "run_record.json", &record)?;
    Ok(record)
}

fn prepare_run_dir(ctx: &Context) -> Result<(), CmdError> {
    std::fs::create_dir_all(&ctx.out_dir)?;
    ctx.config.validate()?;
    write_text(&ctx.out_dir, "config_echo.toml", &ctx.config.to_toml())?;
    Ok(())
}

fn initial_state(ctx: &Context, plan: &transfer::TransferPlan) -> Result<StateVector, CmdError> {
    let coeffs = ctx
        .config
        .parse_initial_state()
        .map_err(|e| ConfigError(e))?;
    Ok(transfer::initial_superposition(plan, &coeffs)?)
}

/// Reproduce the staged transfer: per-step fidelity table, population time
/// series, and the final mode amplitudes.
pub fn cmd_transfer(ctx: &Context) -> Result<RunRecord, CmdError> {
    let started = std::time::Instant::now();
    prepare_run_dir(ctx)?;
    let plan = ctx.config.build_plan(ctx.fock_pad)?;
    let initial = initial_state(ctx, &plan)?;
    let backend = match ctx.mode {
        RunMode::Ideal => Backend::Ideal,
        RunMode::Physical => Backend::Dynamical,
    };
    let opts = ExecOptions {
        sample_points: ctx.config.protocol.sample_points,
        ..ctx.exec_options(backend)
    };
    let out = transfer::execute_transfer(&initial, &plan, &opts)?;

    let mut outputs = Vec::new();
    outputs.push(write_csv(
        &ctx.out_dir,
        "step_fidelities.csv",
        "k,omega_rad_per_us,duration_us,fidelity_vs_ideal,leakage,norm_drift",
        out.reports.iter().map(|r| {
            let s = &r.summary;
            format!(
                "{},{},{},{},{},{}",
                s.k,
                fmt_f64(s.omega),
                fmt_f64(s.duration_us),
                fmt_f64(s.fidelity_vs_ideal),
                fmt_f64(s.leakage),
                fmt_f64(s.norm_drift)
            )
        }),
    )?);

    // Continuous time axis across the steps, matching the staged protocol.
    let mut rows = Vec::new();
    let mut offset = 0.0;
    for report in &out.reports {
        for s in &report.samples {
            rows.push(format!(
                "{},{},{}",
                fmt_f64(offset + s.t_us),
                s.label,
                fmt_f64(s.population)
            ));
        }
        offset += report.summary.duration_us;
    }
    outputs.push(write_csv(
        &ctx.out_dir,
        "populations.csv",
        "t_us,basis_label,population",
        rows,
    )?);

    let space = out.final_state.space();
    let reg_dim = 1usize << plan.n;
    outputs.push(write_csv(
        &ctx.out_dir,
        "final_amplitudes.csv",
        "fock_index,re,im,population",
        (0..plan.fock_dim).map(|f| {
            let amp = out.final_state.amplitudes()[space
                .index_of(&[f, 0])
                .expect("valid index")];
            let _ = reg_dim;
            format!(
                "{},{},{},{}",
                f,
                fmt_f64(amp.re),
                fmt_f64(amp.im),
                fmt_f64(amp.norm_sqr())
            )
        }),
    )?);

    let summaries: Vec<_> = out.reports.iter().map(|r| r.summary.clone()).collect();
    let schedule = plan.schedule(
        kerr::qft_duration(reg_dim, &ctx.config.kerr_config(None)).unwrap_or(0.0),
        ctx.config.protocol.tau3_us,
    );
    let reports = serde_json::json!({
        "steps": summaries,
        "schedule": schedule,
        "warnings": out.warnings,
    });
    finish_record(ctx, "transfer", outputs, reports, started)
}

/// Ideal route: exact per-step permutations feed the Kerr stage and the
/// uniform projection. Physical route: the full dynamical pipeline with
/// calibrated phase frames and the measurement-based disentangling.
pub fn cmd_qft(ctx: &Context) -> Result<RunRecord, CmdError> {
    let started = std::time::Instant::now();
    prepare_run_dir(ctx)?;
    let plan = ctx.config.build_plan(ctx.fock_pad)?;
    let q = 1usize << plan.n;
    let coeffs = ctx
        .config
        .parse_initial_state()
        .map_err(ConfigError)?;
    let kerr_config = ctx.config.kerr_config(None);
    let oracle_direction = kerr_config.direction;
    let oracle = kerr::dft_oracle(&coeffs, oracle_direction);

    let (b_state, success_probability, extra) = match ctx.mode {
        RunMode::Ideal => {
            let initial = initial_state(ctx, &plan)?;
            let out = transfer::execute_transfer(&initial, &plan, &ctx.exec_options(Backend::Ideal))?;
            // The ideal transfer leaves A exactly on the first q levels.
            let space = out.final_state.space();
            let window: Vec<Complex64> = (0..q)
                .map(|f| out.final_state.amplitudes()[space.index_of(&[f, 0]).expect("index")])
                .collect();
            let a_space = oscqft_core::hilbert::CompositeSpace::new(vec![
                oscqft_core::hilbert::Factor::Fock(
                    oscqft_core::hilbert::FockSpace::new(
                        q,
                        oscqft_core::hilbert::SpaceLabel::ResonatorA,
                    )
                    .expect("q >= 1"),
                ),
            ])
            .expect("one factor");
            let a_state = StateVector::from_amplitudes(a_space, window)?;
            let result = kerr::run_qft(&a_state, &kerr_config)?;
            (
                result.b_state,
                result.success_probability,
                serde_json::json!({}),
            )
        }
        RunMode::Physical => {
            let opts = ctx.exec_options(Backend::Dynamical);
            let forward_frame = transfer::calibrate_forward_frame(&plan, &opts)?;
            let inverse_frame = transfer::calibrate_inverse_frame(&plan, &opts)?;
            let initial = initial_state(ctx, &plan)?;
            let fwd = transfer::execute_transfer(&initial, &plan, &opts)?;
            let corrected = transfer::apply_fock_phase_frame(&fwd.final_state, &forward_frame)?;

            // Attach the uniform B register: [A, B, register].
            let full_space = oscqft_core::hilbert::CompositeSpace::new(vec![
                oscqft_core::hilbert::Factor::Fock(
                    oscqft_core::hilbert::FockSpace::new(
                        plan.fock_dim,
                        oscqft_core::hilbert::SpaceLabel::ResonatorA,
                    )
                    .expect("dim"),
                ),
                oscqft_core::hilbert::Factor::Fock(
                    oscqft_core::hilbert::FockSpace::new(
                        q,
                        oscqft_core::hilbert::SpaceLabel::ResonatorB,
                    )
                    .expect("dim"),
                ),
                oscqft_core::hilbert::Factor::Qubits(
                    oscqft_core::hilbert::QubitRegister::new(plan.n).expect("n"),
                ),
            ])
            .expect("three factors");
            let scale = 1.0 / (q as f64).sqrt();
            let mut amps = vec![Complex64::ZERO; full_space.total_dim()];
            for (idx, amp) in corrected.amplitudes().iter().enumerate() {
                let (a, r) = (idx >> plan.n, idx & (q - 1));
                for nb in 0..q {
                    amps[((a * q + nb) << plan.n) | r] = amp * scale;
                }
            }
            let joint = StateVector::from_amplitudes(full_space, amps)?;
            let tau2 = kerr::qft_duration(q, &kerr_config)?;
            let evolved = kerr::kerr_evolve_factors(&joint, 0, 1, kerr_config.chi, tau2)?;

            let inv = transfer::inverse_transfer(
                &evolved,
                &plan,
                transfer::InverseMode::Physical,
                &opts,
            )?;
            let aligned = transfer::apply_register_phase_frame(&inv.final_state, &inverse_frame)?;
            let projection = kerr::project_uniform(&aligned, 2, q)?;
            let probability = projection.probability;
            let remaining = projection.state.ok_or_else(|| {
                CoreError::precondition("qubit projection had zero probability")
            })?;
            let rem = remaining.amplitudes();
            let a0: f64 = rem[..q].iter().map(|z| z.norm_sqr()).sum();
            let b_space = oscqft_core::hilbert::CompositeSpace::new(vec![
                oscqft_core::hilbert::Factor::Fock(
                    oscqft_core::hilbert::FockSpace::new(
                        q,
                        oscqft_core::hilbert::SpaceLabel::ResonatorB,
                    )
                    .expect("dim"),
                ),
            ])
            .expect("one factor");
            let b_state = StateVector::from_amplitudes(
                b_space,
                rem[..q].iter().map(|z| z / a0.sqrt()).collect(),
            )?;
            let extra = serde_json::json!({
                "a_residual": 1.0 - a0,
                "forward_step_fidelities":
                    fwd.reports.iter().map(|r| r.summary.fidelity_vs_ideal).collect::<Vec<_>>(),
                "inverse_step_fidelities":
                    inv.reports.iter().map(|r| r.summary.fidelity_vs_ideal).collect::<Vec<_>>(),
            });
            (b_state, probability, extra)
        }
    };

    let aligned_b = kerr::align_global_phase(&b_state);
    let aligned_oracle = {
        let space = aligned_b.space().clone();
        kerr::align_global_phase(&StateVector::from_amplitudes(space, oracle.clone())?)
    };
    let fidelity_vs_oracle = hilbert::overlap_fidelity(&aligned_b, &aligned_oracle)?;

    let mut outputs = Vec::new();
    outputs.push(write_csv(
        &ctx.out_dir,
        "qft_amplitudes.csv",
        "fock_index,re,im,population,oracle_re,oracle_im",
        (0..q).map(|i| {
            let a = aligned_b.amplitudes()[i];
            let o = aligned_oracle.amplitudes()[i];
            format!(
                "{},{},{},{},{},{}",
                i,
                fmt_f64(a.re),
                fmt_f64(a.im),
                fmt_f64(a.norm_sqr()),
                fmt_f64(o.re),
                fmt_f64(o.im)
            )
        }),
    )?);

    let reports = serde_json::json!({
        "success_probability": success_probability,
        "expected_probability": 1.0 / q as f64,
        "fidelity_vs_oracle": fidelity_vs_oracle,
        "tau2_us": kerr::qft_duration(q, &kerr_config)?,
        "detail": extra,
    });
    finish_record(ctx, "qft", outputs, reports, started)
}

/// Phase estimation through the inverse transform.
pub fn cmd_phase(ctx: &Context) -> Result<RunRecord, CmdError> {
    let started = std::time::Instant::now();
    prepare_run_dir(ctx)?;
    let n = ctx.config.protocol.n;
    let theta = ctx.config.phase.theta_over_two_pi * TWO_PI;
    let mut scenario = PhaseScenario::new(theta, n);
    scenario.trials = ctx.config.phase.trials;
    scenario.seed = ctx.seed;

    // The estimation always runs the inverse transform; flip the Kerr sign
    // when the configured forward-direction sign would make τ₂ negative.
    let mut kerr_config = ctx.config.kerr_config(Some(KerrDirection::Inverse));
    if kerr::qft_duration(1 << n, &kerr_config).is_err() {
        kerr_config.chi = -kerr_config.chi;
    }

    let result = match ctx.mode {
        RunMode::Ideal => phase_est::run_phase_estimation(&scenario, &kerr_config)?,
        RunMode::Physical => {
            scenario.mode = EstimationMode::Physical;
            let plan = ctx.config.build_plan(ctx.fock_pad)?;
            let opts = ctx.exec_options(Backend::Dynamical);
            let frame = transfer::calibrate_forward_frame(&plan, &opts)?;
            phase_est::run_phase_estimation_physical(
                &scenario,
                &kerr_config,
                &plan,
                &opts,
                Some(&frame),
            )?
        }
    };

    let mut outputs = Vec::new();
    outputs.push(write_csv(
        &ctx.out_dir,
        "distribution.csv",
        "n_hat,probability",
        result
            .distribution
            .iter()
            .enumerate()
            .map(|(i, p)| format!("{},{}", i, fmt_f64(*p))),
    )?);
    if let Some(counts) = &result.sampled_counts {
        outputs.push(write_csv(
            &ctx.out_dir,
            "sampled_counts.csv",
            "n_hat,count",
            counts
                .iter()
                .enumerate()
                .map(|(i, c)| format!("{i},{c}")),
        )?);
    }
    let reports = serde_json::to_value(&result).expect("serializable");
    finish_record(ctx, "phase", outputs, reports, started)
}

/// Analytic error sweeps, the coherence budget, and (optionally) the
/// dynamical jitter Monte-Carlo for n ≤ 2.
pub fn cmd_errors(ctx: &Context) -> Result<RunRecord, CmdError> {
    let started = std::time::Instant::now();
    prepare_run_dir(ctx)?;
    let cfg = &ctx.config.errors;
    let n = ctx.config.protocol.n;
    let q = 1usize << n;
    let uniform = vec![Complex64::new(1.0 / (q as f64).sqrt(), 0.0); q];
    let decomposition = error_model::decompose_paths(&uniform, n)?;
    let t0 = std::f64::consts::PI / ctx.config.omegas()[0];

    let mut outputs = Vec::new();
    outputs.push(write_csv(
        &ctx.out_dir,
        "jitter_sweep.csv",
        "delta_t_over_t0,aggregate_fidelity,quadratic_fidelity",
        cfg.delta_t_over_t0.iter().map(|&d| {
            let exact = error_model::transfer_fidelity_jitter(&decomposition, d * t0, t0)
                .unwrap_or(f64::NAN);
            let approx = error_model::uniform_jitter_approx(n, d * t0, t0).unwrap_or(f64::NAN);
            format!("{},{},{}", fmt_f64(d), fmt_f64(exact), fmt_f64(approx))
        }),
    )?);

    outputs.push(write_csv(
        &ctx.out_dir,
        "energy_sweep.csv",
        "t0_delta_e,exact_fidelity,linear_fidelity",
        cfg.t0_delta_e.iter().map(|&b| {
            let (exact, approx) =
                error_model::aggregate_energy_fidelity(n, b / t0, t0).unwrap_or((f64::NAN, f64::NAN));
            format!("{},{},{}", fmt_f64(b), fmt_f64(exact), fmt_f64(approx))
        }),
    )?);

    let budget = error_model::coherence_budget(cfg.budget_n)?;
    outputs.push(write_json(&ctx.out_dir, "coherence_budget.json", &budget)?);

    let mc_report = if cfg.monte_carlo {
        let mut mc_config = ctx.config.clone();
        mc_config.protocol.n = cfg.mc_n;
        let plan = mc_config.build_plan(ctx.fock_pad)?;
        let opts = ctx.exec_options(Backend::Dynamical);
        let baseline =
            error_model::monte_carlo_jitter(&plan, 0.0, 1, &opts)?;
        let mut rows = Vec::new();
        let mut stats = Vec::new();
        for &d in cfg.delta_t_over_t0.iter() {
            let run = error_model::monte_carlo_jitter(
                &plan,
                d * baseline.t0_us,
                cfg.repetitions,
                &opts,
            )?;
            let analytic = 1.0 - run.analytic_fidelity;
            let simulated =
                (baseline.mean_path_fidelity - run.mean_path_fidelity).max(0.0);
            let relative = if analytic > 0.0 {
                (simulated - analytic).abs() / analytic
            } else {
                0.0
            };
            rows.push(format!(
                "{},{},{},{}",
                fmt_f64(d),
                fmt_f64(analytic),
                fmt_f64(simulated),
                fmt_f64(relative)
            ));
            stats.push(run);
        }
        outputs.push(write_csv(
            &ctx.out_dir,
            "jitter_mc.csv",
            "delta_t_over_t0,analytic_infidelity,simulated_excess_infidelity,relative_error",
            rows,
        )?);
        serde_json::json!({ "baseline": baseline, "sweeps": stats })
    } else {
        serde_json::Value::Null
    };

    let reports = serde_json::json!({
        "budget": budget,
        "monte_carlo": mc_report,
    });
    finish_record(ctx, "errors", outputs, reports, started)
}

/// Operation counts of the three estimation approaches over an n range.
pub fn cmd_resources(ctx: &Context, n_min: usize, n_max: usize) -> Result<RunRecord, CmdError> {
    let started = std::time::Instant::now();
    prepare_run_dir(ctx)?;
    if n_min == 0 || n_max < n_min {
        return Err(CmdError {
            message: format!("invalid range {n_min}..{n_max}"),
            exit_code: 2,
        });
    }
    let rows: Vec<_> = (n_min..=n_max)
        .map(phase_est::resource_counts)
        .collect::<Result<Vec<_>, _>>()?;
    let outputs = vec![write_csv(
        &ctx.out_dir,
        "resources.csv",
        "n,conventional_ops,recycling_ops,oscillator_ops,conventional_ancillas,\
         recycling_ancillas,oscillator_ancillas",
        rows.iter().map(|r| {
            format!(
                "{},{},{},{},{},{},{}",
                r.n,
                r.conventional_ops,
                r.recycling_ops,
                r.oscillator_ops,
                r.conventional_ancillas,
                r.recycling_ancillas,
                r.oscillator_ancillas.replace(',', ";")
            )
        }),
    )?];
    let reports = serde_json::to_value(&rows).expect("serializable");
    finish_record(ctx, "resources", outputs, reports, started)
}

/// Wigner snapshots of the reduced B state at t ∈ {0, τ₂/2, τ₂}.
pub fn cmd_wigner(ctx: &Context) -> Result<RunRecord, CmdError> {
    let started = std::time::Instant::now();
    prepare_run_dir(ctx)?;
    let plan = ctx.config.build_plan(ctx.fock_pad)?;
    let q = 1usize << plan.n;
    let coeffs = ctx.config.parse_initial_state().map_err(ConfigError)?;
    let kerr_config = ctx.config.kerr_config(None);
    let tau2 = kerr::qft_duration(q, &kerr_config)?;

    // Joint (A ⊗ B) product of the transferred state and the uniform B.
    let a_space = oscqft_core::hilbert::CompositeSpace::new(vec![
        oscqft_core::hilbert::Factor::Fock(
            oscqft_core::hilbert::FockSpace::new(
                q,
                oscqft_core::hilbert::SpaceLabel::ResonatorA,
            )
            .expect("dim"),
        ),
        oscqft_core::hilbert::Factor::Fock(
            oscqft_core::hilbert::FockSpace::new(
                q,
                oscqft_core::hilbert::SpaceLabel::ResonatorB,
            )
            .expect("dim"),
        ),
    ])
    .expect("two factors");
    let scale = Complex64::new(1.0 / (q as f64).sqrt(), 0.0);
    let mut amps = vec![Complex64::ZERO; q * q];
    for m in 0..q {
        for nn in 0..q {
            amps[m * q + nn] = coeffs[m] * scale;
        }
    }
    let joint = StateVector::from_amplitudes(a_space, amps)?;

    let mut outputs = Vec::new();
    let mut integrals = Vec::new();
    let mut warnings = Vec::new();
    for (tag, t) in [("t0", 0.0), ("half", tau2 / 2.0), ("tau2", tau2)] {
        let evolved = kerr::kerr_evolve(&joint, kerr_config.chi, t)?;
        let rho_b = hilbert::partial_trace(&evolved, &[1])?;
        let grid = kerr::wigner_grid(&rho_b, (-4.0, 4.0), (-4.0, 4.0), 81)?;
        integrals.push(grid.integral());
        warnings.extend(grid.warnings.clone());
        outputs.push(write_text(
            &ctx.out_dir,
            &format!("wigner_{tag}.csv"),
            &grid.csv(),
        )?);
    }
    let reports = serde_json::json!({
        "tau2_us": tau2,
        "grid_integrals": integrals,
        "warnings": warnings,
    });
    finish_record(ctx, "wigner", outputs, reports, started)
}
