//! Synthesis of the multi-frequency control fields that move register
//! excitations into resonator photons.
//!
//! For step k ≥ 1 the comb carries one tone per chain link l = 1..2^k-1 and
//! per occupied photon number m, with amplitude (-1)^(l-1)·2Ω·√(l(2^k-l)) at
//! the dressed transition frequency
//!
//!   ω_{m,l} = E_{m+l+1,+} - E_{m+l,-}   (even l)
//!   ω_{m,l} = E_{m+l+1,-} - E_{m+l,+}   (odd l)
//!
//! so that each occupied m spawns a transfer chain
//! |m+1,+⟩ → |m+2,-⟩ → … → |m+2^k,-⟩ whose rotating-frame couplings are the
//! mirror-symmetric (Ω/2)√(l(N-l)) profile; the chain walks head to tail in
//! exactly τ_map = π/Ω. Step k = 0 is photon-number preserving and instead
//! uses the two-tone drive
//!
//!   -2√2·Ω cos(ω₊ t) + 2√2·Ω cos(ω₁ t),
//!   ω₊ = E_{m+2,+} - E_{m+1,+},  ω₁ = E_{m+2,+} - E_{m+1,-}
//!
//! per occupied m, forming a three-node chain |m+1,+⟩ → |m+2,+⟩ → |m+1,-⟩.
//! Tones closer than the guard band fail synthesis loudly instead of
//! producing silent crosstalk.

use serde::{Deserialize, Serialize};

use crate::dynamics::{dressed_energy, DeviceParams, DressedSign};
use crate::{CoreError, Result};

/// Guard band between any two comb tones, as a multiple of Ω.
pub const GUARD_BAND_OMEGA_MULTIPLE: f64 = 10.0;

/// One cosine tone of a control field.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct DriveComponent {
    /// Signed amplitude in rad/µs.
    pub amplitude: f64,
    /// Angular frequency in rad/µs (must be positive).
    pub frequency: f64,
    /// Which dressed transition the tone addresses (informational).
    pub target: String,
}

/// A synthesized multi-frequency control field for one transfer step.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct DrivePulse {
    /// Step index: which qubit the field drives.
    pub k: usize,
    /// Scaling factor Ω in rad/µs; τ_map·Ω = π.
    pub omega_ref: f64,
    /// Pulse duration τ_map = π/Ω in µs.
    pub duration: f64,
    pub components: Vec<DriveComponent>,
}

impl DrivePulse {
    /// (amplitude, frequency) pairs for the propagator.
    pub fn tones(&self) -> Vec<(f64, f64)> {
        self.components
            .iter()
            .map(|c| (c.amplitude, c.frequency))
            .collect()
    }
}

/// Photon numbers that can be occupied in resonator A before step k runs.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct OccupiedSet {
    pub k: usize,
    pub photon_numbers: Vec<usize>,
}

/// The set {j·2^(k+1) : j = 0..2^(n-1-k)-1} of photon numbers present before
/// coupling qubit k, given the reverse k = n-1..0 transfer order.
pub fn occupied_photon_numbers(n: usize, k: usize) -> Result<OccupiedSet> {
    if n == 0 {
        return Err(CoreError::precondition("need n >= 1"));
    }
    if k >= n {
        return Err(CoreError::QubitOutOfRange { k, n });
    }
    let count = 1usize << (n - 1 - k);
    let stride = 1usize << (k + 1);
    Ok(OccupiedSet {
        k,
        photon_numbers: (0..count).map(|j| j * stride).collect(),
    })
}

/// Transition frequencies (l, ω_{m,l}) of the 2^k-node chain rooted at
/// photon number m, following the even/odd parity rule.
pub fn transfer_frequencies(k: usize, m: usize, params: &DeviceParams) -> Result<Vec<(usize, f64)>> {
    if k == 0 {
        return Err(CoreError::precondition(
            "k = 0 is photon-number preserving; use the photon-preserving synthesis",
        ));
    }
    let links = (1usize << k) - 1;
    let mut out = Vec::with_capacity(links);
    for l in 1..=links {
        let upper = dressed_energy(
            m + l + 1,
            if l % 2 == 0 { DressedSign::Plus } else { DressedSign::Minus },
            params,
        )?;
        let lower = dressed_energy(
            m + l,
            if l % 2 == 0 { DressedSign::Minus } else { DressedSign::Plus },
            params,
        )?;
        out.push((l, upper - lower));
    }
    Ok(out)
}

fn check_guard_band(
    components: &[DriveComponent],
    guard: f64,
) -> std::result::Result<(), CoreError> {
    for (i, a) in components.iter().enumerate() {
        for b in &components[i + 1..] {
            let separation = (a.frequency - b.frequency).abs();
            if separation < guard {
                return Err(CoreError::GuardBand {
                    label_a: a.target.clone(),
                    label_b: b.target.clone(),
                    freq_a: a.frequency,
                    freq_b: b.frequency,
                    separation,
                    guard,
                });
            }
        }
    }
    Ok(())
}

fn check_positive_frequencies(components: &[DriveComponent]) -> Result<()> {
    for c in components {
        if c.frequency <= 0.0 {
            return Err(CoreError::precondition(format!(
                "tone {} has non-positive frequency {}",
                c.target, c.frequency
            )));
        }
    }
    Ok(())
}

/// Multi-frequency field of the k ≥ 1 transfer step over every occupied
/// photon number, duration π/Ω.
pub fn synthesize_transfer_drive(
    k: usize,
    occupied: &OccupiedSet,
    omega: f64,
    params: &DeviceParams,
) -> Result<DrivePulse> {
    if k == 0 {
        return Err(CoreError::precondition(
            "k = 0 requires synthesize_photon_preserving_drive",
        ));
    }
    if omega <= 0.0 {
        return Err(CoreError::precondition("drive scale omega must be positive"));
    }
    let chain = 1usize << k;
    let mut components = Vec::new();
    for &m in &occupied.photon_numbers {
        for (l, freq) in transfer_frequencies(k, m, params)? {
            let sign = if l % 2 == 1 { 1.0 } else { -1.0 };
            let amplitude = sign * 2.0 * omega * ((l * (chain - l)) as f64).sqrt();
            components.push(DriveComponent {
                amplitude,
                frequency: freq,
                target: format!("m{m}l{l}"),
            });
        }
    }
    check_positive_frequencies(&components)?;
    check_guard_band(&components, GUARD_BAND_OMEGA_MULTIPLE * omega)?;
    Ok(DrivePulse {
        k,
        omega_ref: omega,
        duration: std::f64::consts::PI / omega,
        components,
    })
}

/// Two-tone photon-number-preserving field of the k = 0 step: per occupied
/// m, amplitude -2√2·Ω at ω₊ and +2√2·Ω at ω₁, duration π/Ω.
pub fn synthesize_photon_preserving_drive(
    occupied: &OccupiedSet,
    omega: f64,
    params: &DeviceParams,
) -> Result<DrivePulse> {
    if occupied.k != 0 {
        return Err(CoreError::precondition(
            "photon-preserving synthesis applies to the k = 0 step",
        ));
    }
    if omega <= 0.0 {
        return Err(CoreError::precondition("drive scale omega must be positive"));
    }
    let amp = 2.0 * 2f64.sqrt() * omega;
    let mut components = Vec::new();
    for &m in &occupied.photon_numbers {
        let e_top = dressed_energy(m + 2, DressedSign::Plus, params)?;
        let omega_jump = e_top - dressed_energy(m + 1, DressedSign::Plus, params)?;
        let omega_rot = e_top - dressed_energy(m + 1, DressedSign::Minus, params)?;
        components.push(DriveComponent {
            amplitude: -amp,
            frequency: omega_jump,
            target: format!("m{m}+"),
        });
        components.push(DriveComponent {
            amplitude: amp,
            frequency: omega_rot,
            target: format!("m{m}1"),
        });
    }
    check_positive_frequencies(&components)?;
    check_guard_band(&components, GUARD_BAND_OMEGA_MULTIPLE * omega)?;
    Ok(DrivePulse {
        k: 0,
        omega_ref: omega,
        duration: std::f64::consts::PI / omega,
        components,
    })
}

/// Mirror-symmetric couplings (Ω/2)·√(l(N-l)), l = 1..N-1, of an N-node
/// chain that transfers node 1 to node N exactly at t = π/Ω.
pub fn perfect_chain_couplings(node_count: usize, omega: f64) -> Result<Vec<f64>> {
    if node_count < 2 {
        return Err(CoreError::precondition("chain needs at least 2 nodes"));
    }
    Ok((1..node_count)
        .map(|l| 0.5 * omega * ((l * (node_count - l)) as f64).sqrt())
        .collect())
}

/// f_k(t) = Σ amplitude·cos(frequency·t).
pub fn evaluate_pulse(pulse: &DrivePulse, t: f64) -> f64 {
    pulse
        .components
        .iter()
        .map(|c| c.amplitude * (c.frequency * t).cos())
        .sum()
}
