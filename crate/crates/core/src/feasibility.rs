//! What it would take to measure an observer in a Cat basis.
//!
//! * [`ExchangeOperator`]: the involution `Π` swapping an n-qubit agent's
//!   records `U = |0…0⟩` and `D = |1…1⟩`. Off `span{U, D}` it is extended as
//!   the bit flip of every qubit, the simplest Hermitian unitary involution
//!   that restricts correctly.
//! * [`needle_evolution`]: a von Neumann pointer on a periodic lattice,
//!   coupled through `h = λ p Π`. Each `Π = ±1` component moves the needle by
//!   `±λt`.
//! * [`parity_matrix`]: `P = exp[iπ/2 (a x² + p²/a − 1)]` (ħ = 1) on a
//!   truncated oscillator number basis, and [`parity_taylor_truncation`],
//!   its finite Taylor polynomials.
//! * [`cat_measurement_dephasing`]: how record flips on the agent's qubits
//!   wash out Cat-basis statistics as the agent grows.

use nalgebra::SymmetricEigen;
use num_complex::Complex64;
use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::rng;
use crate::statevec::{c64, Basis, CMatrix, StateVector, SystemLayout};

/// Largest agent for which the feasibility routines accept inputs.
pub const MAX_AGENT_QUBITS: usize = 16;

/// An observer made of `n` qubits whose records are the all-zeros and
/// all-ones product states.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct MacroAgent {
    qubits: usize,
}

impl MacroAgent {
    pub fn new(qubits: usize) -> Result<Self> {
        if !(1..=MAX_AGENT_QUBITS).contains(&qubits) {
            return Err(Error::InvalidParameter(format!(
                "agent qubit count {qubits} outside 1..={MAX_AGENT_QUBITS}"
            )));
        }
        Ok(Self { qubits })
    }

    pub fn qubits(&self) -> usize {
        self.qubits
    }

    pub fn dim(&self) -> usize {
        1 << self.qubits
    }

    pub fn macro_u(&self) -> Vec<Complex64> {
        self.unit(0)
    }

    pub fn macro_d(&self) -> Vec<Complex64> {
        self.unit(self.dim() - 1)
    }

    /// `(U + D)/√2`.
    pub fn cat_plus(&self) -> Vec<Complex64> {
        self.cat(1.0)
    }

    /// `(U − D)/√2`.
    pub fn cat_minus(&self) -> Vec<Complex64> {
        self.cat(-1.0)
    }

    fn unit(&self, index: usize) -> Vec<Complex64> {
        let mut v = vec![Complex64::default(); self.dim()];
        v[index] = c64(1.0, 0.0);
        v
    }

    fn cat(&self, sign: f64) -> Vec<Complex64> {
        let s = std::f64::consts::FRAC_1_SQRT_2;
        let mut v = vec![Complex64::default(); self.dim()];
        v[0] = c64(s, 0.0);
        v[self.dim() - 1] = c64(sign * s, 0.0);
        v
    }

    /// Subsystem names of the agent's qubits: `q0`, `q1`, …
    pub fn qubit_names(&self) -> Vec<String> {
        (0..self.qubits).map(|k| format!("q{k}")).collect()
    }

    /// The agent's whole register as one subsystem named `agent`, measured
    /// in `{(U+D)/√2, (U−D)/√2}` completed by the computational states that
    /// are neither `U` nor `D`. Labels are `Y`, `N`, then the bit strings.
    pub fn completed_cat_basis(&self) -> Result<Basis> {
        let mut vectors = vec![("Y".to_string(), self.cat_plus()), ("N".to_string(), self.cat_minus())];
        for k in 1..self.dim() - 1 {
            vectors.push((format!("{k:0width$b}", width = self.qubits), self.unit(k)));
        }
        Basis::new("cat_completed", "agent", vectors)
    }
}

/// `Π` as a permutation of computational states: `Π|i⟩ = |i ⊕ 1…1⟩`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ExchangeOperator {
    image: Vec<usize>,
}

/// The exchange operator of `agent`.
pub fn exchange_operator(agent: &MacroAgent) -> ExchangeOperator {
    let mask = agent.dim() - 1;
    ExchangeOperator {
        image: (0..agent.dim()).map(|i| i ^ mask).collect(),
    }
}

impl ExchangeOperator {
    pub fn dim(&self) -> usize {
        self.image.len()
    }

    /// Index that basis state `i` is mapped to.
    pub fn image(&self, i: usize) -> usize {
        self.image[i]
    }

    pub fn apply(&self, v: &[Complex64]) -> Vec<Complex64> {
        let mut out = vec![Complex64::default(); v.len()];
        for (i, a) in v.iter().enumerate() {
            out[self.image[i]] = *a;
        }
        out
    }

    pub fn to_dense(&self) -> CMatrix {
        let n = self.dim();
        let mut m = CMatrix::zeros(n, n);
        for (i, &j) in self.image.iter().enumerate() {
            m[(j, i)] = c64(1.0, 0.0);
        }
        m
    }

    /// Number of basis states not returned to themselves by `Π²`.
    pub fn square_defects(&self) -> usize {
        (0..self.dim()).filter(|&i| self.image[self.image[i]] != i).count()
    }

    /// A permutation matrix is Hermitian iff the permutation is an involution.
    pub fn is_hermitian(&self) -> bool {
        self.square_defects() == 0
    }
}

/// Periodic needle lattice and its coupling to the agent.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct NeedleModel {
    pub lattice_size: usize,
    pub spacing: f64,
    /// Coupling constant λ.
    pub coupling: f64,
    /// Evolution time t.
    pub duration: f64,
}

/// Name of the needle subsystem in [`NeedleModel::layout`].
pub const NEEDLE: &str = "needle";

impl NeedleModel {
    pub fn new(lattice_size: usize, spacing: f64, coupling: f64, duration: f64) -> Result<Self> {
        if lattice_size < 8 || !lattice_size.is_power_of_two() {
            return Err(Error::InvalidParameter(format!(
                "lattice size {lattice_size} must be a power of two and at least 8"
            )));
        }
        if !(spacing > 0.0 && spacing.is_finite()) {
            return Err(Error::InvalidParameter(format!("lattice spacing {spacing} must be positive")));
        }
        if !coupling.is_finite() || !duration.is_finite() {
            return Err(Error::InvalidParameter("coupling and duration must be finite".into()));
        }
        Ok(Self {
            lattice_size,
            spacing,
            coupling,
            duration,
        })
    }

    /// Needle displacement `λt` in lattice sites, required to be an integer.
    pub fn shift_sites(&self) -> Result<i64> {
        let sites = self.coupling * self.duration / self.spacing;
        let rounded = sites.round();
        if (sites - rounded).abs() > 1e-9 {
            return Err(Error::InvalidParameter(format!(
                "λt = {} is not an integer multiple of the spacing {}",
                self.coupling * self.duration,
                self.spacing
            )));
        }
        Ok(rounded as i64)
    }

    /// Momentum eigenvalues `2π m/(L s)` for `m` in `[−L/2, L/2)`, indexed by
    /// discrete Fourier mode.
    pub fn momenta(&self) -> Vec<f64> {
        let l = self.lattice_size as i64;
        (0..l)
            .map(|m| {
                let signed = if m < l / 2 { m } else { m - l };
                2.0 * std::f64::consts::PI * signed as f64 / (l as f64 * self.spacing)
            })
            .collect()
    }

    /// Dense momentum operator `p = F diag(k) F†`, with plane waves
    /// `F_{jm} = e^{2πi jm/L}/√L`.
    pub fn momentum_operator(&self) -> CMatrix {
        let l = self.lattice_size;
        let k = self.momenta();
        let norm = 1.0 / (l as f64).sqrt();
        let f = CMatrix::from_fn(l, l, |j, m| {
            Complex64::from_polar(norm, 2.0 * std::f64::consts::PI * (j * m) as f64 / l as f64)
        });
        let diag = CMatrix::from_diagonal(&nalgebra::DVector::from_iterator(l, k.into_iter().map(|x| c64(x, 0.0))));
        &f * diag * f.adjoint()
    }

    /// Agent qubits followed by the needle.
    pub fn layout(&self, agent: &MacroAgent) -> SystemLayout {
        let mut layout = SystemLayout::empty();
        for name in agent.qubit_names() {
            layout = layout.appended(name, 2).expect("distinct qubit names");
        }
        layout.appended(NEEDLE, self.lattice_size).expect("needle name is free")
    }

    /// Needle wavefunction localized on `site` (taken modulo L).
    pub fn localized(&self, site: i64) -> Vec<Complex64> {
        let l = self.lattice_size as i64;
        let mut v = vec![Complex64::default(); self.lattice_size];
        v[site.rem_euclid(l) as usize] = c64(1.0, 0.0);
        v
    }

    /// `agent_state ⊗ needle_state` on [`layout`](Self::layout).
    pub fn joint_state(&self, agent: &MacroAgent, agent_state: &[Complex64], needle: &[Complex64]) -> Result<StateVector> {
        if agent_state.len() != agent.dim() || needle.len() != self.lattice_size {
            return Err(Error::DimensionMismatch("agent or needle factor has the wrong length".into()));
        }
        let amps = agent_state
            .iter()
            .flat_map(|a| needle.iter().map(move |x| a * x))
            .collect();
        StateVector::new(self.layout(agent), amps)
    }
}

/// Dense `h = λ Π ⊗ p` on agent ⊗ needle.
pub fn interaction_hamiltonian(needle: &NeedleModel, agent: &MacroAgent) -> CMatrix {
    exchange_operator(agent)
        .to_dense()
        .kronecker(&needle.momentum_operator())
        * c64(needle.coupling, 0.0)
}

/// Evolves `exp(−i t λ p Π)` exactly: the `Π = +1` part of the state is
/// translated by `+λt`, the `Π = −1` part by `−λt`, with periodic wrap.
pub fn needle_evolution(needle: &NeedleModel, agent: &MacroAgent, joint_state: &StateVector) -> Result<StateVector> {
    if joint_state.layout() != &needle.layout(agent) {
        return Err(Error::DimensionMismatch(format!(
            "state layout {} is not {}",
            joint_state.layout(),
            needle.layout(agent)
        )));
    }
    let shift = needle.shift_sites()?;
    let l = needle.lattice_size as i64;
    let pi = exchange_operator(agent);
    let amps = joint_state.amplitudes();
    let mut out = vec![Complex64::default(); amps.len()];
    for a in 0..agent.dim() {
        let flipped = pi.image(a);
        for x in 0..l {
            let idx = a * needle.lattice_size + x as usize;
            let plus_src = (x - shift).rem_euclid(l) as usize;
            let minus_src = (x + shift).rem_euclid(l) as usize;
            let at = |agent_index: usize, site: usize| amps[agent_index * needle.lattice_size + site];
            // (ψ ± Πψ)/2 evaluated at the shifted source site
            let plus = (at(a, plus_src) + at(flipped, plus_src)) * 0.5;
            let minus = (at(a, minus_src) - at(flipped, minus_src)) * 0.5;
            out[idx] = plus + minus;
        }
    }
    StateVector::new(joint_state.layout().clone(), out)
}

/// Projects the agent part of a joint state onto the `Π = sign` eigenspace
/// (unnormalized amplitudes).
pub fn project_exchange_eigenspace(agent: &MacroAgent, lattice_size: usize, amps: &[Complex64], sign: f64) -> Vec<Complex64> {
    let pi = exchange_operator(agent);
    let mut out = vec![Complex64::default(); amps.len()];
    for a in 0..agent.dim() {
        let f = pi.image(a);
        for x in 0..lattice_size {
            out[a * lattice_size + x] = (amps[a * lattice_size + x] + amps[f * lattice_size + x] * sign) * 0.5;
        }
    }
    out
}

/// Truncated harmonic-oscillator model for the parity operator.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ParityModel {
    /// Number of oscillator levels kept.
    pub truncation: usize,
    /// The constant `a` in `a x² + p²/a`.
    pub a: f64,
    /// Scale of the oscillator whose number basis is used; `a` when matched.
    pub basis_scale: f64,
}

impl ParityModel {
    /// Model in the number basis matched to `a`.
    pub fn new(truncation: usize, a: f64) -> Result<Self> {
        Self::with_basis_scale(truncation, a, a)
    }

    pub fn with_basis_scale(truncation: usize, a: f64, basis_scale: f64) -> Result<Self> {
        if truncation < 8 {
            return Err(Error::InvalidParameter(format!("truncation {truncation} below 8")));
        }
        if !(a > 0.0 && a.is_finite() && basis_scale > 0.0 && basis_scale.is_finite()) {
            return Err(Error::InvalidParameter("a and the basis scale must be positive".into()));
        }
        Ok(Self {
            truncation,
            a,
            basis_scale,
        })
    }

    fn lowering(&self) -> CMatrix {
        let n = self.truncation;
        CMatrix::from_fn(n, n, |r, c| {
            if c == r + 1 {
                c64((c as f64).sqrt(), 0.0)
            } else {
                Complex64::default()
            }
        })
    }

    /// `x = (b + b†)/√(2c)` for basis scale `c`.
    pub fn position(&self) -> CMatrix {
        let b = self.lowering();
        (&b + b.adjoint()) * c64(1.0 / (2.0 * self.basis_scale).sqrt(), 0.0)
    }

    /// `p = i √(c/2) (b† − b)`.
    pub fn momentum(&self) -> CMatrix {
        let b = self.lowering();
        (b.adjoint() - &b) * c64(0.0, (self.basis_scale / 2.0).sqrt())
    }

    /// `G = a x² + p²/a − 1`, built from the truncated `x` and `p`.
    pub fn generator(&self) -> CMatrix {
        let x = self.position();
        let p = self.momentum();
        let n = self.truncation;
        &x * &x * c64(self.a, 0.0) + &p * &p * c64(1.0 / self.a, 0.0) - CMatrix::identity(n, n)
    }

    /// Size of the block on which operator identities are checked.
    pub fn half(&self) -> usize {
        self.truncation / 2
    }
}

fn phase_factor() -> Complex64 {
    c64(0.0, std::f64::consts::FRAC_PI_2)
}

/// `P = exp(iπ G/2)` through the eigendecomposition of the Hermitian
/// generator.
pub fn parity_matrix(model: &ParityModel) -> CMatrix {
    let g = model.generator();
    let g = (&g + g.adjoint()) * c64(0.5, 0.0);
    let eig = SymmetricEigen::new(g);
    let phases = eig.eigenvalues.map(|lambda| (phase_factor() * lambda).exp());
    &eig.eigenvectors * CMatrix::from_diagonal(&phases) * eig.eigenvectors.adjoint()
}

/// Leading `size × size` block.
pub fn lower_block(m: &CMatrix, size: usize) -> CMatrix {
    m.view((0, 0), (size, size)).into_owned()
}

/// Largest singular value.
pub fn spectral_norm(m: &CMatrix) -> f64 {
    m.clone().singular_values().iter().copied().fold(0.0, f64::max)
}

/// Numerical checks of the parity operator on the lower half-block.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ParityChecks {
    /// `max |P − P†|` over the whole truncated matrix.
    pub hermitian_defect: f64,
    /// `max |P†P − I|` over the whole truncated matrix.
    pub unitarity_defect: f64,
    /// `‖P² − I‖` on the lower block.
    pub square_defect: f64,
    /// `max |P_jj − (−1)^j|` and largest off-diagonal magnitude, lower block.
    pub alternation_defect: f64,
    /// Largest entry of `Px + xP` on the lower block.
    pub anticommutator_x: f64,
    /// Largest entry of `Pp + pP` on the lower block.
    pub anticommutator_p: f64,
}

fn max_entry(m: &CMatrix) -> f64 {
    m.iter().map(|z| z.norm()).fold(0.0, f64::max)
}

pub fn parity_checks(model: &ParityModel) -> ParityChecks {
    let p = parity_matrix(model);
    let n = model.truncation;
    let h = model.half();
    let x = model.position();
    let mom = model.momentum();
    let identity = CMatrix::identity(h, h);
    let alternating = CMatrix::from_fn(h, h, |r, c| {
        if r == c {
            c64(if r % 2 == 0 { 1.0 } else { -1.0 }, 0.0)
        } else {
            Complex64::default()
        }
    });
    ParityChecks {
        hermitian_defect: max_entry(&(&p - p.adjoint())),
        unitarity_defect: max_entry(&(p.adjoint() * &p - CMatrix::identity(n, n))),
        square_defect: spectral_norm(&(lower_block(&(&p * &p), h) - &identity)),
        alternation_defect: max_entry(&(lower_block(&p, h) - alternating)),
        anticommutator_x: max_entry(&lower_block(&(&p * &x + &x * &p), h)),
        anticommutator_p: max_entry(&lower_block(&(&p * &mom + &mom * &p), h)),
    }
}

/// A finite Taylor polynomial of `exp(iπ G/2)`.
#[derive(Debug, Clone, PartialEq)]
pub struct TaylorTruncation {
    pub order: usize,
    pub matrix: CMatrix,
    /// `‖T†T − I‖` on the lower half-block (spectral norm).
    pub unitarity_defect: f64,
    /// `‖T − P‖` on the lower half-block (spectral norm).
    pub distance_to_exact: f64,
}

/// `Σ_{j≤k} (iπ/2)^j G^j / j!` with its unitarity defect and distance to
/// [`parity_matrix`].
pub fn parity_taylor_truncation(model: &ParityModel, order: usize) -> TaylorTruncation {
    let exact = parity_matrix(model);
    taylor_against(model, order, &exact)
}

fn taylor_against(model: &ParityModel, order: usize, exact: &CMatrix) -> TaylorTruncation {
    let n = model.truncation;
    let h = model.half();
    let exponent = model.generator() * phase_factor();
    let mut term = CMatrix::identity(n, n);
    let mut sum = term.clone();
    for j in 1..=order {
        term = &term * &exponent * c64(1.0 / j as f64, 0.0);
        sum += &term;
    }
    let gram = lower_block(&(sum.adjoint() * &sum), h) - CMatrix::identity(h, h);
    TaylorTruncation {
        order,
        unitarity_defect: spectral_norm(&gram),
        distance_to_exact: spectral_norm(&lower_block(&(&sum - exact), h)),
        matrix: sum,
    }
}

/// Truncations for every order in `orders`, sharing one exact reference.
pub fn taylor_sweep(model: &ParityModel, orders: impl IntoIterator<Item = usize>) -> Vec<TaylorTruncation> {
    let exact = parity_matrix(model);
    orders.into_iter().map(|k| taylor_against(model, k, &exact)).collect()
}

/// Monte-Carlo statistics of a Cat-basis measurement on a noisy agent.
#[derive(Debug, Clone, PartialEq)]
pub struct DephasingReport {
    pub qubits: usize,
    pub flip_probability: f64,
    pub trials: usize,
    pub seed: u64,
    /// Counts of `Y`, `N`, and any completion outcome.
    pub counts: [usize; 3],
    pub frequencies: [f64; 3],
    /// Exact outcome probabilities.
    pub expected: [f64; 3],
    /// Total-variation distance of `frequencies` from the noiseless `(½, ½, 0)`.
    pub deviation: f64,
    /// Exact value of `deviation`.
    pub expected_deviation: f64,
    /// Standard error of the Monte-Carlo `deviation`, covering both the
    /// completion count and the sampling noise of the `Y`/`N` split.
    pub deviation_std_error: f64,
    /// Sample mean of `2 Re⟨Y|ρ|N⟩` over the noisy agent states.
    pub coherence: f64,
    /// Exact `2 Re⟨Y|ρ|N⟩ = (1−p)^n − p^n`.
    pub expected_coherence: f64,
}

/// Prepares the agent in `U = |0…0⟩`, flips each qubit independently with
/// probability `p`, and measures in `{(U±D)/√2}` plus completion.
///
/// A bit flip of a record qubit acts as a phase flip in the `(U±D)/√2`
/// frame: for one qubit it swaps the sign of the Cat outcome's coherence.
/// Pure phase flips would leave `U` untouched. Trial `i` draws from a stream
/// seeded with `derive_seed(seed, i)`, so the result is independent of the
/// evaluation order.
pub fn cat_measurement_dephasing(qubits: usize, p: f64, trials: usize, seed: u64) -> Result<DephasingReport> {
    if !(1..=12).contains(&qubits) {
        return Err(Error::InvalidParameter(format!("qubit count {qubits} outside 1..=12")));
    }
    if !(0.0..=0.5).contains(&p) {
        return Err(Error::InvalidParameter(format!("flip probability {p} outside [0, 1/2]")));
    }
    if trials == 0 {
        return Err(Error::InvalidParameter("at least one trial is needed".into()));
    }
    let (counts, coherence_sum) = (0..trials)
        .into_par_iter()
        .map(|trial| {
            let mut stream = rng::rng_from_seed(rng::derive_seed(seed, trial as u64));
            let flips = (0..qubits).filter(|_| rng::uniform(&mut stream) < p).count();
            let u = rng::uniform(&mut stream);
            let mut counts = [0usize; 3];
            let coherence = if flips == 0 || flips == qubits {
                // U or D: Y and N equally likely
                counts[usize::from(u >= 0.5)] += 1;
                if flips == 0 { 1i64 } else { -1 }
            } else {
                counts[2] += 1;
                0
            };
            (counts, coherence)
        })
        .reduce(
            || ([0usize; 3], 0i64),
            |(a, ca), (b, cb)| ([a[0] + b[0], a[1] + b[1], a[2] + b[2]], ca + cb),
        );
    let t = trials as f64;
    let frequencies = counts.map(|c| c as f64 / t);
    let stay = (1.0 - p).powi(qubits as i32);
    let all = p.powi(qubits as i32);
    let inside = stay + all;
    let expected = [inside / 2.0, inside / 2.0, 1.0 - inside];
    let tv = |f: &[f64; 3]| 0.5 * ((f[0] - 0.5).abs() + (f[1] - 0.5).abs() + f[2]);
    let leak = expected[2];
    Ok(DephasingReport {
        qubits,
        flip_probability: p,
        trials,
        seed,
        counts,
        frequencies,
        expected,
        deviation: tv(&frequencies),
        expected_deviation: tv(&expected),
        // completion noise plus the Y/N split, which dominates when `leak` is tiny
        deviation_std_error: ((leak * (1.0 - leak) + inside / 4.0) / t).sqrt(),
        coherence: coherence_sum as f64 / t,
        expected_coherence: stay - all,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn single_qubit_exchange_is_bit_flip() {
        let pi = exchange_operator(&MacroAgent::new(1).unwrap()).to_dense();
        let x = CMatrix::from_row_slice(2, 2, &[c64(0.0, 0.0), c64(1.0, 0.0), c64(1.0, 0.0), c64(0.0, 0.0)]);
        assert_eq!(pi, x);
    }

    #[test]
    fn three_qubit_exchange_swaps_records() {
        let agent = MacroAgent::new(3).unwrap();
        let pi = exchange_operator(&agent);
        assert_eq!(pi.image(0b000), 0b111);
        assert_eq!(pi.image(0b111), 0b000);
        assert_eq!(pi.apply(&agent.macro_u()), agent.macro_d());
        assert_eq!(pi.square_defects(), 0);
    }

    #[test]
    fn agent_size_limits() {
        assert!(MacroAgent::new(0).is_err());
        assert!(MacroAgent::new(MAX_AGENT_QUBITS + 1).is_err());
    }

    #[test]
    fn needle_parameter_validation() {
        assert!(NeedleModel::new(6, 1.0, 1.0, 1.0).is_err());
        assert!(NeedleModel::new(12, 1.0, 1.0, 1.0).is_err());
        assert!(NeedleModel::new(16, 0.0, 1.0, 1.0).is_err());
        let m = NeedleModel::new(16, 1.0, 1.5, 1.0).unwrap();
        assert!(matches!(m.shift_sites(), Err(Error::InvalidParameter(_))));
        assert_eq!(NeedleModel::new(16, 0.5, 1.5, 1.0).unwrap().shift_sites().unwrap(), 3);
    }

    #[test]
    fn zero_coupling_is_identity() {
        let agent = MacroAgent::new(2).unwrap();
        let needle = NeedleModel::new(16, 1.0, 0.0, 1.0).unwrap();
        let psi = needle.joint_state(&agent, &agent.macro_u(), &needle.localized(5)).unwrap();
        assert_eq!(needle_evolution(&needle, &agent, &psi).unwrap(), psi);
    }

    #[test]
    fn needle_layout_mismatch_is_an_error() {
        let agent = MacroAgent::new(2).unwrap();
        let needle = NeedleModel::new(16, 1.0, 3.0, 1.0).unwrap();
        let other = NeedleModel::new(32, 1.0, 3.0, 1.0).unwrap();
        let psi = other.joint_state(&agent, &agent.macro_u(), &other.localized(0)).unwrap();
        assert!(needle_evolution(&needle, &agent, &psi).is_err());
    }

    #[test]
    fn parity_parameter_validation() {
        assert!(ParityModel::new(7, 1.0).is_err());
        assert!(ParityModel::new(16, 0.0).is_err());
        assert!(ParityModel::new(16, 2.0).is_ok());
    }

    #[test]
    fn zeroth_order_truncation_is_identity() {
        let model = ParityModel::new(16, 1.0).unwrap();
        let t = parity_taylor_truncation(&model, 0);
        assert_eq!(t.matrix, CMatrix::identity(16, 16));
        assert!(t.unitarity_defect < 1e-15);
        assert!((t.distance_to_exact - 2.0).abs() < 1e-8);
    }

    #[test]
    fn dephasing_input_validation() {
        assert!(cat_measurement_dephasing(0, 0.1, 10, 0).is_err());
        assert!(cat_measurement_dephasing(13, 0.1, 10, 0).is_err());
        assert!(cat_measurement_dephasing(2, 0.6, 10, 0).is_err());
        assert!(cat_measurement_dephasing(2, 0.1, 0, 0).is_err());
    }

    #[test]
    fn noiseless_agent_gives_even_split() {
        for n in [1, 3, 12] {
            let r = cat_measurement_dephasing(n, 0.0, 1000, 3).unwrap();
            assert_eq!(r.expected, [0.5, 0.5, 0.0]);
            assert_eq!(r.counts[2], 0);
            assert_eq!(r.expected_deviation, 0.0);
            assert_eq!(r.coherence, 1.0);
        }
    }
}
