//! Fock-space and qubit tensor algebra: composite spaces, states, operators,
//! partial traces, and overlaps.
//!
//! Index conventions, fixed at construction and recorded in all emitted data:
//!
//! - a composite index is mixed-radix with the *first* factor most
//!   significant, matching `kron(first, ..., last)`;
//! - inside a qubit register, bit k of the factor index is qubit k (rightmost
//!   bit = qubit 0), so the basis string b_{n-1}…b_0 is the decimal value
//!   Σ b_k 2^k;
//! - qubit excitation 1 is the excited state and σ_z|excited⟩ = +|excited⟩, so
//!   a free Hamiltonian ½ω σ_z puts the excited level above the ground level.

use ndarray::Array2;
use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::{CoreError, Result};

/// Norm tolerance enforced on state vectors.
pub const NORM_TOL: f64 = 1e-9;

/// Role tag for a bosonic mode.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum SpaceLabel {
    ResonatorA,
    ResonatorB,
}

impl std::fmt::Display for SpaceLabel {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            SpaceLabel::ResonatorA => write!(f, "A"),
            SpaceLabel::ResonatorB => write!(f, "B"),
        }
    }
}

/// Truncated harmonic-oscillator mode with `dim` Fock levels 0..dim-1.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct FockSpace {
    pub dim: usize,
    pub label: SpaceLabel,
}

impl FockSpace {
    pub fn new(dim: usize, label: SpaceLabel) -> Result<Self> {
        if dim < 1 {
            return Err(CoreError::precondition("Fock space needs dim >= 1"));
        }
        Ok(FockSpace { dim, label })
    }
}

/// A register of `n` two-level systems treated as one tensor factor of
/// dimension 2^n.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct QubitRegister {
    pub n: usize,
}

impl QubitRegister {
    pub fn new(n: usize) -> Result<Self> {
        if n < 1 {
            return Err(CoreError::precondition("register needs n >= 1"));
        }
        Ok(QubitRegister { n })
    }

    pub fn dim(&self) -> usize {
        1 << self.n
    }
}

/// One tensor factor of a composite space.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Factor {
    Fock(FockSpace),
    Qubits(QubitRegister),
}

impl Factor {
    pub fn dim(&self) -> usize {
        match self {
            Factor::Fock(f) => f.dim,
            Factor::Qubits(q) => q.dim(),
        }
    }
}

/// Ordered tensor product of Fock spaces and qubit registers.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct CompositeSpace {
    factors: Vec<Factor>,
}

impl CompositeSpace {
    pub fn new(factors: Vec<Factor>) -> Result<Self> {
        if factors.is_empty() {
            return Err(CoreError::precondition("composite space needs >= 1 factor"));
        }
        Ok(CompositeSpace { factors })
    }

    pub fn factors(&self) -> &[Factor] {
        &self.factors
    }

    pub fn factor_dims(&self) -> Vec<usize> {
        self.factors.iter().map(|f| f.dim()).collect()
    }

    pub fn total_dim(&self) -> usize {
        self.factors.iter().map(|f| f.dim()).product()
    }

    /// Mixed-radix index of one occupation per factor (first factor most
    /// significant).
    pub fn index_of(&self, occupations: &[usize]) -> Result<usize> {
        if occupations.len() != self.factors.len() {
            return Err(CoreError::DimensionMismatch {
                context: "occupation list",
                expected: self.factors.len(),
                got: occupations.len(),
            });
        }
        let mut idx = 0;
        for (f, &occ) in self.factors.iter().zip(occupations) {
            if occ >= f.dim() {
                return Err(CoreError::OutOfRange {
                    context: "factor occupation",
                    index: occ,
                    dim: f.dim(),
                });
            }
            idx = idx * f.dim() + occ;
        }
        Ok(idx)
    }

    /// Inverse of [`index_of`](Self::index_of).
    pub fn occupations_of(&self, index: usize) -> Result<Vec<usize>> {
        if index >= self.total_dim() {
            return Err(CoreError::OutOfRange {
                context: "composite index",
                index,
                dim: self.total_dim(),
            });
        }
        let mut rem = index;
        let mut occ = vec![0usize; self.factors.len()];
        for (slot, f) in self.factors.iter().enumerate().rev() {
            occ[slot] = rem % f.dim();
            rem /= f.dim();
        }
        Ok(occ)
    }
}

/// Complex amplitudes over a composite space; the protocol's mutable quantum
/// state. Unit norm within [`NORM_TOL`] is enforced at construction.
#[derive(Debug, Clone)]
pub struct StateVector {
    space: CompositeSpace,
    amps: Vec<Complex64>,
}

impl StateVector {
    pub fn from_amplitudes(space: CompositeSpace, amps: Vec<Complex64>) -> Result<Self> {
        if amps.len() != space.total_dim() {
            return Err(CoreError::DimensionMismatch {
                context: "state amplitudes",
                expected: space.total_dim(),
                got: amps.len(),
            });
        }
        let state = StateVector { space, amps };
        let norm = state.norm();
        if (norm - 1.0).abs() > NORM_TOL {
            return Err(CoreError::precondition(format!(
                "state norm {norm} deviates from 1 by more than {NORM_TOL}"
            )));
        }
        Ok(state)
    }

    /// Build from unnormalized amplitudes, rescaling to unit norm.
    pub fn normalized(space: CompositeSpace, amps: Vec<Complex64>) -> Result<Self> {
        let norm: f64 = amps.iter().map(|a| a.norm_sqr()).sum::<f64>().sqrt();
        if norm == 0.0 {
            return Err(CoreError::precondition("cannot normalize the zero vector"));
        }
        let amps = amps.into_iter().map(|a| a / norm).collect();
        StateVector::from_amplitudes(space, amps)
    }

    pub fn space(&self) -> &CompositeSpace {
        &self.space
    }

    pub fn amplitudes(&self) -> &[Complex64] {
        &self.amps
    }

    pub fn amplitudes_mut(&mut self) -> &mut [Complex64] {
        &mut self.amps
    }

    pub fn dim(&self) -> usize {
        self.amps.len()
    }

    pub fn norm(&self) -> f64 {
        self.amps.iter().map(|a| a.norm_sqr()).sum::<f64>().sqrt()
    }

    pub fn inner(&self, other: &StateVector) -> Result<Complex64> {
        if self.space != other.space {
            return Err(CoreError::SpaceMismatch);
        }
        Ok(self
            .amps
            .iter()
            .zip(&other.amps)
            .map(|(a, b)| a.conj() * b)
            .sum())
    }

    /// Population of one composite basis index.
    pub fn population(&self, index: usize) -> f64 {
        self.amps[index].norm_sqr()
    }

    /// Total population in the top `levels` Fock states of factor `factor`.
    pub fn top_level_population(&self, factor: usize, levels: usize) -> f64 {
        let dims = self.space.factor_dims();
        let d = dims[factor];
        let cutoff = d.saturating_sub(levels);
        let mut acc = 0.0;
        for (idx, amp) in self.amps.iter().enumerate() {
            let occ = self.space.occupations_of(idx).expect("valid index");
            if occ[factor] >= cutoff {
                acc += amp.norm_sqr();
            }
        }
        acc
    }
}

/// Reduced density matrix over a subset of factors.
#[derive(Debug, Clone)]
pub struct DensityMatrix {
    space: CompositeSpace,
    matrix: Array2<Complex64>,
}

impl DensityMatrix {
    pub fn space(&self) -> &CompositeSpace {
        &self.space
    }

    pub fn matrix(&self) -> &Array2<Complex64> {
        &self.matrix
    }

    pub fn trace(&self) -> Complex64 {
        (0..self.matrix.nrows()).map(|i| self.matrix[(i, i)]).sum()
    }

    /// Check Hermiticity (1e-12), unit trace (1e-9) and positive
    /// semidefiniteness (eigenvalues ≥ -1e-9).
    pub fn validate(&self) -> Result<()> {
        let m = &self.matrix;
        let n = m.nrows();
        for i in 0..n {
            for j in 0..n {
                if (m[(i, j)] - m[(j, i)].conj()).norm() > 1e-12 {
                    return Err(CoreError::precondition(format!(
                        "density matrix not Hermitian at ({i},{j})"
                    )));
                }
            }
        }
        let tr = self.trace();
        if (tr.re - 1.0).abs() > 1e-9 || tr.im.abs() > 1e-9 {
            return Err(CoreError::precondition(format!(
                "density matrix trace {tr} deviates from 1"
            )));
        }
        let eigs = crate::numerics::hermitian_eigenvalues(m);
        if let Some(min) = eigs.first() {
            if *min < -1e-9 {
                return Err(CoreError::precondition(format!(
                    "density matrix has negative eigenvalue {min}"
                )));
            }
        }
        Ok(())
    }
}

/// Unit vector with a single nonzero amplitude at the given occupation per
/// factor.
pub fn basis_state(space: &CompositeSpace, occupations: &[usize]) -> Result<StateVector> {
    let idx = space.index_of(occupations)?;
    let mut amps = vec![Complex64::ZERO; space.total_dim()];
    amps[idx] = Complex64::ONE;
    StateVector::from_amplitudes(space.clone(), amps)
}

/// Which ladder operator to build.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Ladder {
    Raise,
    Lower,
}

/// Annihilation (`Lower`, entries √m at (m-1, m)) or creation (`Raise`, its
/// adjoint) operator on a truncated Fock space.
pub fn ladder_operator(space: &FockSpace, kind: Ladder) -> Result<Array2<Complex64>> {
    if space.dim < 2 {
        return Err(CoreError::precondition("ladder operator needs dim >= 2"));
    }
    let d = space.dim;
    let mut op = Array2::zeros((d, d));
    for m in 1..d {
        let v = Complex64::new((m as f64).sqrt(), 0.0);
        match kind {
            Ladder::Lower => op[(m - 1, m)] = v,
            Ladder::Raise => op[(m, m - 1)] = v,
        }
    }
    Ok(op)
}

/// Single-qubit Pauli flavor.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Pauli {
    X,
    Y,
    Z,
    Plus,
    Minus,
}

/// Pauli operator on qubit `k` of a register, identity on the others,
/// returned over the full register dimension 2^n.
///
/// With σ_z|excited⟩ = +|excited⟩ the 2×2 blocks in (ground, excited) index
/// order are σ_z = diag(-1, +1), σ_+ = |1⟩⟨0|, σ_x = σ_+ + σ_-, and
/// σ_y = -i(σ_+ - σ_-).
pub fn pauli_operator(register: &QubitRegister, k: usize, kind: Pauli) -> Result<Array2<Complex64>> {
    if k >= register.n {
        return Err(CoreError::QubitOutOfRange { k, n: register.n });
    }
    let dim = register.dim();
    let bit = 1usize << k;
    let mut op = Array2::zeros((dim, dim));
    let i = Complex64::new(0.0, 1.0);
    for col in 0..dim {
        let excited = col & bit != 0;
        match kind {
            Pauli::Z => {
                op[(col, col)] = if excited { Complex64::ONE } else { -Complex64::ONE };
            }
            Pauli::X => {
                op[(col ^ bit, col)] = Complex64::ONE;
            }
            Pauli::Y => {
                // -i σ_+ + i σ_-: raising picks up -i, lowering +i.
                op[(col ^ bit, col)] = if excited { i } else { -i };
            }
            Pauli::Plus => {
                if !excited {
                    op[(col | bit, col)] = Complex64::ONE;
                }
            }
            Pauli::Minus => {
                if excited {
                    op[(col & !bit, col)] = Complex64::ONE;
                }
            }
        }
    }
    Ok(op)
}

/// Apply an operator that acts on one whole factor, identity on the rest.
pub fn apply_factor_operator(
    state: &StateVector,
    factor: usize,
    op: &Array2<Complex64>,
) -> Result<StateVector> {
    let dims = state.space().factor_dims();
    if factor >= dims.len() {
        return Err(CoreError::OutOfRange {
            context: "factor index",
            index: factor,
            dim: dims.len(),
        });
    }
    let d = dims[factor];
    if op.nrows() != d || op.ncols() != d {
        return Err(CoreError::DimensionMismatch {
            context: "factor operator",
            expected: d,
            got: op.nrows(),
        });
    }
    let stride: usize = dims[factor + 1..].iter().product();
    let outer: usize = dims[..factor].iter().product();
    let amps = state.amplitudes();
    let mut out = vec![Complex64::ZERO; amps.len()];
    for o in 0..outer {
        for inner in 0..stride {
            let base = o * d * stride + inner;
            for row in 0..d {
                let mut acc = Complex64::ZERO;
                for col in 0..d {
                    let v = op[(row, col)];
                    if v != Complex64::ZERO {
                        acc += v * amps[base + col * stride];
                    }
                }
                out[base + row * stride] = acc;
            }
        }
    }
    // The result of a non-unitary operator need not be normalized; callers in
    // this crate only apply unitaries or renormalize explicitly.
    Ok(StateVector {
        space: state.space().clone(),
        amps: out,
    })
}

fn keep_space(space: &CompositeSpace, keep: &[usize]) -> Result<CompositeSpace> {
    if keep.is_empty() {
        return Err(CoreError::precondition("partial trace needs a nonempty keep set"));
    }
    let mut sorted = keep.to_vec();
    sorted.sort_unstable();
    sorted.dedup();
    if sorted.len() != keep.len() {
        return Err(CoreError::precondition("keep set has duplicate factors"));
    }
    let factors = space.factors();
    for &k in &sorted {
        if k >= factors.len() {
            return Err(CoreError::OutOfRange {
                context: "keep factor",
                index: k,
                dim: factors.len(),
            });
        }
    }
    CompositeSpace::new(sorted.iter().map(|&k| factors[k]).collect())
}

/// Reduced density matrix of a pure state over the kept factors (given in
/// ascending order of the original factor positions).
pub fn partial_trace(state: &StateVector, keep: &[usize]) -> Result<DensityMatrix> {
    let reduced_space = keep_space(state.space(), keep)?;
    let mut sorted = keep.to_vec();
    sorted.sort_unstable();

    let dims = state.space().factor_dims();
    let kept_dims: Vec<usize> = sorted.iter().map(|&k| dims[k]).collect();
    let traced: Vec<usize> = (0..dims.len()).filter(|i| !sorted.contains(i)).collect();
    let traced_dims: Vec<usize> = traced.iter().map(|&k| dims[k]).collect();
    let dk: usize = kept_dims.iter().product();
    let dt: usize = traced_dims.iter().product::<usize>().max(1);

    // Composite index from (kept multi-index, traced multi-index).
    let full_index = |ik: usize, it: usize| -> usize {
        let mut occ = vec![0usize; dims.len()];
        let mut rem = ik;
        for (pos, &k) in sorted.iter().enumerate().rev() {
            occ[k] = rem % kept_dims[pos];
            rem /= kept_dims[pos];
        }
        let mut rem = it;
        for (pos, &t) in traced.iter().enumerate().rev() {
            occ[t] = rem % traced_dims[pos];
            rem /= traced_dims[pos];
        }
        let mut idx = 0;
        for (f, &o) in dims.iter().zip(&occ) {
            idx = idx * f + o;
        }
        idx
    };

    let amps = state.amplitudes();
    let mut rho = Array2::zeros((dk, dk));
    for i in 0..dk {
        for j in 0..dk {
            let mut acc = Complex64::ZERO;
            for t in 0..dt {
                acc += amps[full_index(i, t)] * amps[full_index(j, t)].conj();
            }
            rho[(i, j)] = acc;
        }
    }
    Ok(DensityMatrix {
        space: reduced_space,
        matrix: rho,
    })
}

/// Reduced density matrix of a density matrix over the kept factors.
pub fn partial_trace_density(rho: &DensityMatrix, keep: &[usize]) -> Result<DensityMatrix> {
    let reduced_space = keep_space(rho.space(), keep)?;
    let mut sorted = keep.to_vec();
    sorted.sort_unstable();

    let dims = rho.space().factor_dims();
    let kept_dims: Vec<usize> = sorted.iter().map(|&k| dims[k]).collect();
    let traced: Vec<usize> = (0..dims.len()).filter(|i| !sorted.contains(i)).collect();
    let traced_dims: Vec<usize> = traced.iter().map(|&k| dims[k]).collect();
    let dk: usize = kept_dims.iter().product();
    let dt: usize = traced_dims.iter().product::<usize>().max(1);

    let full_index = |ik: usize, it: usize| -> usize {
        let mut occ = vec![0usize; dims.len()];
        let mut rem = ik;
        for (pos, &k) in sorted.iter().enumerate().rev() {
            occ[k] = rem % kept_dims[pos];
            rem /= kept_dims[pos];
        }
        let mut rem = it;
        for (pos, &t) in traced.iter().enumerate().rev() {
            occ[t] = rem % traced_dims[pos];
            rem /= traced_dims[pos];
        }
        let mut idx = 0;
        for (f, &o) in dims.iter().zip(&occ) {
            idx = idx * f + o;
        }
        idx
    };

    let m = rho.matrix();
    let mut out = Array2::zeros((dk, dk));
    for i in 0..dk {
        for j in 0..dk {
            let mut acc = Complex64::ZERO;
            for t in 0..dt {
                acc += m[(full_index(i, t), full_index(j, t))];
            }
            out[(i, j)] = acc;
        }
    }
    Ok(DensityMatrix {
        space: reduced_space,
        matrix: out,
    })
}

/// |⟨a|b⟩|², symmetric and insensitive to global phases on either argument.
pub fn overlap_fidelity(a: &StateVector, b: &StateVector) -> Result<f64> {
    Ok(a.inner(b)?.norm_sqr())
}

/// Index bookkeeping for states shaped `[Fock(A), <middle Fock factors>, Qubits(n)]`
/// when one register qubit is singled out as the active partner of A.
///
/// The state factors as (A ⊗ qubit k) ⊗ bystanders; a *slice* fixes the
/// bystander configuration (middle-factor occupation, register bits other
/// than k) and exposes a pair vector of dimension 2·dim(A).
#[derive(Debug, Clone, Copy)]
pub struct PairLayout {
    pub d_a: usize,
    /// Product of the middle factor dimensions (1 when absent).
    pub mid: usize,
    pub n: usize,
    pub k: usize,
}

impl PairLayout {
    pub fn from_space(space: &CompositeSpace, k: usize) -> Result<Self> {
        let factors = space.factors();
        let d_a = match factors.first() {
            Some(Factor::Fock(f)) if f.label == SpaceLabel::ResonatorA => f.dim,
            _ => {
                return Err(CoreError::precondition(
                    "layout expects resonator A as the first factor",
                ))
            }
        };
        let n = match factors.last() {
            Some(Factor::Qubits(q)) => q.n,
            _ => {
                return Err(CoreError::precondition(
                    "layout expects the qubit register as the last factor",
                ))
            }
        };
        if k >= n {
            return Err(CoreError::QubitOutOfRange { k, n });
        }
        let mut mid = 1usize;
        for f in &factors[1..factors.len() - 1] {
            match f {
                Factor::Fock(fs) => mid *= fs.dim,
                Factor::Qubits(_) => {
                    return Err(CoreError::precondition(
                        "layout expects only Fock factors between A and the register",
                    ))
                }
            }
        }
        Ok(PairLayout { d_a, mid, n, k })
    }

    pub fn pair_dim(&self) -> usize {
        2 * self.d_a
    }

    pub fn slice_count(&self) -> usize {
        self.mid << (self.n - 1)
    }

    /// Flat composite index of (photon number a, active bit value, slice).
    pub fn full_index(&self, a: usize, bit: usize, slice: usize) -> usize {
        let lo_dim = 1usize << self.k;
        let hi_dim = 1usize << (self.n - 1 - self.k);
        let lo = slice % lo_dim;
        let hi = (slice / lo_dim) % hi_dim;
        let nb = slice / (lo_dim * hi_dim);
        let reg = hi << (self.k + 1) | bit << self.k | lo;
        ((a * self.mid + nb) << self.n) | reg
    }

    /// Copy slice `slice` of `amps` into a pair vector of length 2·d_a,
    /// indexed a·2 + bit.
    pub fn gather(&self, amps: &[Complex64], slice: usize, pair: &mut [Complex64]) {
        for a in 0..self.d_a {
            for bit in 0..2 {
                pair[a * 2 + bit] = amps[self.full_index(a, bit, slice)];
            }
        }
    }

    /// Inverse of [`gather`](Self::gather).
    pub fn scatter(&self, pair: &[Complex64], slice: usize, amps: &mut [Complex64]) {
        for a in 0..self.d_a {
            for bit in 0..2 {
                amps[self.full_index(a, bit, slice)] = pair[a * 2 + bit];
            }
        }
    }
}
