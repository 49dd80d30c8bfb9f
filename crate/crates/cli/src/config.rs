//! Scenario configuration: TOML with nested sections, lab-frame frequencies
//! (MHz/kHz) at the boundary, angular rad/µs inside.

use num_complex::Complex64;
use oscqft_core::dynamics::{DeviceParams, DressingMode, DriveQuadrature};
use oscqft_core::kerr::{KerrConfig, KerrDirection};
use oscqft_core::transfer::{self, TransferPlan};
use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
#[serde(default, deny_unknown_fields)]
pub struct Config {
    pub device: DeviceSection,
    pub protocol: ProtocolSection,
    pub kerr: KerrSection,
    pub phase: PhaseSection,
    pub errors: ErrorsSection,
    pub output: OutputSection,
}

impl Default for Config {
    fn default() -> Self {
        Config {
            device: DeviceSection::default(),
            protocol: ProtocolSection::default(),
            kerr: KerrSection::default(),
            phase: PhaseSection::default(),
            errors: ErrorsSection::default(),
            output: OutputSection::default(),
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
#[serde(default, deny_unknown_fields)]
pub struct DeviceSection {
    pub omega_a_mhz: f64,
    pub omega_b_mhz: f64,
    /// Idle qubit detuning above the resonator.
    pub qubit_detuning_mhz: f64,
    pub g_mhz: f64,
    pub alpha_mhz: f64,
    pub chi_khz: f64,
    pub tau_ad_us: f64,
}

impl Default for DeviceSection {
    fn default() -> Self {
        DeviceSection {
            omega_a_mhz: 6000.0,
            omega_b_mhz: 5000.0,
            qubit_detuning_mhz: 1000.0,
            g_mhz: 200.0,
            alpha_mhz: -200.0,
            chi_khz: -50.0,
            tau_ad_us: 0.1,
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
#[serde(default, deny_unknown_fields)]
pub struct ProtocolSection {
    pub n: usize,
    /// Drive scale per step in kHz, execution order k = n-1..0. A single
    /// entry applies to every step.
    pub omega_khz: Vec<f64>,
    /// "ghz", "uniform", or "basis:<bits>".
    pub initial_state: String,
    pub fock_pad: usize,
    /// "ideal" or "ramp".
    pub dressing: String,
    /// "y" or "x".
    pub quadrature: String,
    /// Measurement-window bookkeeping τ₃.
    pub tau3_us: f64,
    /// Population samples per step in transfer reports.
    pub sample_points: usize,
}

impl Default for ProtocolSection {
    fn default() -> Self {
        ProtocolSection {
            n: 3,
            omega_khz: vec![200.0],
            initial_state: "ghz".to_string(),
            fock_pad: 4,
            dressing: "ideal".to_string(),
            quadrature: "y".to_string(),
            tau3_us: 0.0,
            sample_points: 200,
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
#[serde(default, deny_unknown_fields)]
pub struct KerrSection {
    /// "forward" or "inverse".
    pub direction: String,
    pub winding: u32,
}

impl Default for KerrSection {
    fn default() -> Self {
        KerrSection {
            direction: "forward".to_string(),
            winding: 0,
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
#[serde(default, deny_unknown_fields)]
pub struct PhaseSection {
    /// θ/2π ∈ [0, 1).
    pub theta_over_two_pi: f64,
    pub trials: usize,
}

impl Default for PhaseSection {
    fn default() -> Self {
        PhaseSection {
            theta_over_two_pi: 0.3,
            trials: 0,
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
#[serde(default, deny_unknown_fields)]
pub struct ErrorsSection {
    /// Jitter sweep points δt/t₀.
    pub delta_t_over_t0: Vec<f64>,
    /// Energy sweep points t₀·δE.
    pub t0_delta_e: Vec<f64>,
    /// Run the dynamical jitter Monte-Carlo (n ≤ 2).
    pub monte_carlo: bool,
    pub mc_n: usize,
    pub repetitions: usize,
    /// Coherence budget register size.
    pub budget_n: usize,
}

impl Default for ErrorsSection {
    fn default() -> Self {
        ErrorsSection {
            delta_t_over_t0: vec![0.005, 0.01, 0.02],
            t0_delta_e: vec![0.001, 0.005, 0.01],
            monte_carlo: false,
            mc_n: 2,
            repetitions: 2,
            budget_n: 10,
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
#[serde(default, deny_unknown_fields)]
pub struct OutputSection {
    /// Base directory for run outputs.
    pub dir: String,
}

impl Default for OutputSection {
    fn default() -> Self {
        OutputSection {
            dir: "runs".to_string(),
        }
    }
}

/// A configuration failure with an actionable message (exit code 2).
#[derive(Debug)]
pub struct ConfigError(pub String);

impl std::fmt::Display for ConfigError {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "config error: {}", self.0)
    }
}
impl std::error::Error for ConfigError {}

impl Config {
    pub fn from_toml(text: &str) -> Result<Config, ConfigError> {
        // toml errors carry line/column spans in their Display output.
        toml::from_str(text).map_err(|e| ConfigError(e.to_string()))
    }

    pub fn to_toml(&self) -> String {
        toml::to_string_pretty(self).expect("config serializes")
    }

    pub fn validate(&self) -> Result<(), ConfigError> {
        let d = &self.device;
        for (name, value) in [
            ("device.omega_a_mhz", d.omega_a_mhz),
            ("device.omega_b_mhz", d.omega_b_mhz),
            ("device.g_mhz", d.g_mhz),
            ("device.tau_ad_us", d.tau_ad_us),
            ("device.qubit_detuning_mhz", d.qubit_detuning_mhz),
        ] {
            if value <= 0.0 {
                return Err(ConfigError(format!("{name} must be positive, got {value}")));
            }
        }
        if d.chi_khz == 0.0 {
            return Err(ConfigError("device.chi_khz must be nonzero".to_string()));
        }
        let p = &self.protocol;
        if p.n == 0 {
            return Err(ConfigError("protocol.n must be >= 1".to_string()));
        }
        if p.omega_khz.is_empty() || p.omega_khz.iter().any(|&o| o <= 0.0) {
            return Err(ConfigError(
                "protocol.omega_khz needs positive entries".to_string(),
            ));
        }
        if !(p.omega_khz.len() == 1 || p.omega_khz.len() == p.n) {
            return Err(ConfigError(format!(
                "protocol.omega_khz needs 1 or n = {} entries, got {}",
                p.n,
                p.omega_khz.len()
            )));
        }
        if p.fock_pad < 2 {
            return Err(ConfigError("protocol.fock_pad must be >= 2".to_string()));
        }
        match p.dressing.as_str() {
            "ideal" | "ramp" => {}
            other => {
                return Err(ConfigError(format!(
                    "protocol.dressing must be \"ideal\" or \"ramp\", got {other:?}"
                )))
            }
        }
        match p.quadrature.as_str() {
            "y" | "x" => {}
            other => {
                return Err(ConfigError(format!(
                    "protocol.quadrature must be \"y\" or \"x\", got {other:?}"
                )))
            }
        }
        match self.kerr.direction.as_str() {
            "forward" | "inverse" => {}
            other => {
                return Err(ConfigError(format!(
                    "kerr.direction must be \"forward\" or \"inverse\", got {other:?}"
                )))
            }
        }
        self.parse_initial_state()
            .map(|_| ())
            .map_err(|e| ConfigError(format!("protocol.initial_state: {e}")))?;
        if self.errors.mc_n > 2 {
            return Err(ConfigError(
                "errors.mc_n is limited to 2 (runtime guard)".to_string(),
            ));
        }
        Ok(())
    }

    pub fn device_params(&self) -> DeviceParams {
        let d = &self.device;
        let omega_a = oscqft_core::mhz(d.omega_a_mhz);
        DeviceParams {
            omega_a,
            omega_b: oscqft_core::mhz(d.omega_b_mhz),
            omega_q: vec![omega_a + oscqft_core::mhz(d.qubit_detuning_mhz); self.protocol.n],
            g: oscqft_core::mhz(d.g_mhz),
            g_per_qubit: None,
            chi_ab: oscqft_core::khz(d.chi_khz),
            alpha: oscqft_core::mhz(d.alpha_mhz),
            tau_ad: d.tau_ad_us,
        }
    }

    pub fn omegas(&self) -> Vec<f64> {
        let p = &self.protocol;
        if p.omega_khz.len() == 1 {
            vec![oscqft_core::khz(p.omega_khz[0]); p.n]
        } else {
            p.omega_khz.iter().map(|&o| oscqft_core::khz(o)).collect()
        }
    }

    pub fn dressing(&self) -> DressingMode {
        match self.protocol.dressing.as_str() {
            "ramp" => DressingMode::Ramp,
            _ => DressingMode::Ideal,
        }
    }

    pub fn quadrature(&self) -> DriveQuadrature {
        match self.protocol.quadrature.as_str() {
            "x" => DriveQuadrature::X,
            _ => DriveQuadrature::Y,
        }
    }

    pub fn kerr_config(&self, direction: Option<KerrDirection>) -> KerrConfig {
        let dir = direction.unwrap_or(match self.kerr.direction.as_str() {
            "inverse" => KerrDirection::Inverse,
            _ => KerrDirection::Forward,
        });
        KerrConfig {
            chi: oscqft_core::khz(self.device.chi_khz),
            winding: self.kerr.winding,
            direction: dir,
        }
    }

    pub fn build_plan(&self, pad_override: Option<usize>) -> Result<TransferPlan, ConfigError> {
        let pad = pad_override.unwrap_or(self.protocol.fock_pad);
        transfer::build_plan(
            self.protocol.n,
            &self.omegas(),
            &self.device_params(),
            self.dressing(),
            self.quadrature(),
            pad,
        )
        .map_err(|e| ConfigError(format!("plan synthesis failed: {e}")))
    }

    /// Register coefficients of the configured initial state.
    pub fn parse_initial_state(&self) -> Result<Vec<Complex64>, String> {
        let q = 1usize << self.protocol.n;
        let spec = self.protocol.initial_state.as_str();
        match spec {
            "ghz" => {
                let mut c = vec![Complex64::ZERO; q];
                let inv = Complex64::new(std::f64::consts::FRAC_1_SQRT_2, 0.0);
                c[0] = inv;
                c[q - 1] = inv;
                Ok(c)
            }
            "uniform" => Ok(vec![Complex64::new(1.0 / (q as f64).sqrt(), 0.0); q]),
            other => {
                if let Some(bits) = other.strip_prefix("basis:") {
                    if bits.len() != self.protocol.n {
                        return Err(format!(
                            "basis string {bits:?} has {} bits, expected {}",
                            bits.len(),
                            self.protocol.n
                        ));
                    }
                    let index = transfer::bits_to_fock(bits).map_err(|e| e.to_string())?;
                    let mut c = vec![Complex64::ZERO; q];
                    c[index] = Complex64::ONE;
                    Ok(c)
                } else {
                    Err(format!(
                        "unknown state {other:?}; use \"ghz\", \"uniform\" or \"basis:<bits>\""
                    ))
                }
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn default_config_is_valid_and_round_trips() {
        let config = Config::default();
        config.validate().unwrap();
        let text = config.to_toml();
        let parsed = Config::from_toml(&text).unwrap();
        assert_eq!(parsed, config);
    }

    #[test]
    fn negative_coupling_is_rejected_before_any_run() {
        let mut config = Config::default();
        config.device.g_mhz = -200.0;
        let err = config.validate().unwrap_err();
        assert!(err.0.contains("g_mhz"));
    }

    #[test]
    fn toml_parse_errors_carry_position() {
        let err = Config::from_toml("[device]\nomega_a_mhz = \"oops\"\n").unwrap_err();
        assert!(err.0.contains("line 2"), "message: {}", err.0);
    }

    #[test]
    fn initial_state_specs() {
        let mut config = Config::default();
        let ghz = config.parse_initial_state().unwrap();
        assert_eq!(ghz.len(), 8);
        assert!(ghz[0].re > 0.0 && ghz[7].re > 0.0);

        config.protocol.initial_state = "basis:110".to_string();
        let basis = config.parse_initial_state().unwrap();
        assert_eq!(basis[6], Complex64::ONE);

        config.protocol.initial_state = "basis:11".to_string();
        assert!(config.validate().is_err());
    }

    #[test]
    fn frequency_conversion_is_angular() {
        let config = Config::default();
        let params = config.device_params();
        assert!((params.g - oscqft_core::TWO_PI * 200.0).abs() < 1e-9);
        assert!((params.chi_ab + oscqft_core::TWO_PI * 0.05).abs() < 1e-12);
    }
}
