//! Measurement as unitary pre-measurement, plus Born-rule probabilities and
//! seeded collapse.
//!
//! A pre-measurement of `target` in basis `{b_k}` into an observer register
//! realizes `b_k ⊗ ready ↦ b_k ⊗ record_k` with the controlled permutation
//!
//! ```text
//! V = Σ_k |b_k⟩⟨b_k| ⊗ W_k
//! ```
//!
//! where `W_k` swaps the observer's `ready` and `record_k` states (and is the
//! identity when they coincide). [`dilation_unitary`] exposes `V` so tests can
//! check the fast path against a dense oracle. A catalytic pre-measurement is
//! the same map; it only differs in that the measured system is itself an
//! observer and the basis superposes its records, which the
//! [`prediction`](crate::prediction) module needs to see.

use num_complex::Complex64;

use crate::error::{Error, Result};
use crate::rng::{self, SimRng};
use crate::statevec::{c64, Basis, CMatrix, StateVector};

/// Minimum overlap of an observer with its ready state before a
/// pre-measurement.
pub const READY_TOLERANCE: f64 = 1e-8;

/// An observer subsystem together with the states it uses for "ready" and
/// for each recorded outcome.
#[derive(Debug, Clone, PartialEq)]
pub struct ObserverRegister {
    basis: Basis,
    ready: String,
    records: Vec<String>,
}

impl ObserverRegister {
    /// `basis` is the observer's record basis; `ready_label` and every record
    /// label must name vectors of it.
    pub fn new<S>(basis: Basis, ready_label: impl Into<String>, record_labels: Vec<S>) -> Result<Self>
    where
        S: Into<String>,
    {
        let ready = ready_label.into();
        let records: Vec<String> = record_labels.into_iter().map(Into::into).collect();
        if basis.index_of(&ready).is_none() {
            return Err(Error::InvalidObserver(format!(
                "ready label `{ready}` is not in basis `{}`",
                basis.name()
            )));
        }
        if records.is_empty() {
            return Err(Error::InvalidObserver("no record labels".into()));
        }
        for (k, r) in records.iter().enumerate() {
            if basis.index_of(r).is_none() {
                return Err(Error::InvalidObserver(format!(
                    "record label `{r}` is not in basis `{}`",
                    basis.name()
                )));
            }
            if records[..k].contains(r) {
                return Err(Error::InvalidObserver(format!("record label `{r}` repeated")));
            }
        }
        Ok(Self { basis, ready, records })
    }

    /// Ready state is the first vector of `basis`, records are the first
    /// `outcomes` vectors in order.
    pub fn standard(basis: Basis, outcomes: usize) -> Result<Self> {
        if outcomes > basis.dim() {
            return Err(Error::InvalidObserver(format!(
                "observer `{}` has {} states, cannot record {outcomes} outcomes",
                basis.subsystem(),
                basis.dim()
            )));
        }
        let labels: Vec<String> = basis.labels().map(str::to_string).collect();
        let ready = labels[0].clone();
        Self::new(basis, ready, labels[..outcomes].to_vec())
    }

    pub fn subsystem(&self) -> &str {
        self.basis.subsystem()
    }

    pub fn basis(&self) -> &Basis {
        &self.basis
    }

    pub fn ready_label(&self) -> &str {
        &self.ready
    }

    pub fn record_labels(&self) -> &[String] {
        &self.records
    }

    pub fn ready_vector(&self) -> &[Complex64] {
        self.basis.vector(&self.ready).expect("validated in constructor")
    }

    pub fn record_vector(&self, outcome: usize) -> &[Complex64] {
        self.basis
            .vector(&self.records[outcome])
            .expect("validated in constructor")
    }
}

/// The controlled permutation `V` acting on `target ⊗ observer`, in
/// row-major order (target index major).
pub fn dilation_unitary(basis: &Basis, observer: &ObserverRegister) -> Result<CMatrix> {
    if observer.records.len() != basis.dim() {
        return Err(Error::DimensionMismatch(format!(
            "basis `{}` has {} outcomes, observer `{}` has {} records",
            basis.name(),
            basis.dim(),
            observer.subsystem(),
            observer.records.len()
        )));
    }
    let obs = observer.basis.to_matrix();
    let obs_dim = observer.basis.dim();
    let ready = observer.basis.index_of(&observer.ready).expect("validated");
    let measured = basis.to_matrix();
    let mut total = CMatrix::zeros(basis.dim() * obs_dim, basis.dim() * obs_dim);
    for (k, record) in observer.records.iter().enumerate() {
        let record = observer.basis.index_of(record).expect("validated");
        let mut perm = CMatrix::identity(obs_dim, obs_dim);
        if record != ready {
            perm.swap_columns(ready, record);
        }
        let swap = &obs * perm * obs.adjoint();
        let column = measured.column(k);
        let projector = &column * column.adjoint();
        total += projector.kronecker(&swap);
    }
    Ok(total)
}

/// Overlap `⟨ready|ρ_O|ready⟩` of the observer's reduced state with its
/// ready state.
pub fn readiness(state: &StateVector, observer: &ObserverRegister) -> Result<f64> {
    let pos = observer.basis.position_in(state.layout(), observer.subsystem())?;
    let residual = state.contract(pos, observer.ready_vector());
    Ok(residual.iter().map(|a| a.norm_sqr()).sum())
}

/// Entangles `target`, measured in `basis`, with the observer's records.
pub fn premeasure(
    state: &StateVector,
    target: &str,
    basis: &Basis,
    observer: &ObserverRegister,
) -> Result<StateVector> {
    basis.position_in(state.layout(), target)?;
    observer.basis.position_in(state.layout(), observer.subsystem())?;
    if target == observer.subsystem() {
        return Err(Error::InvalidObserver(format!("`{target}` cannot record its own measurement")));
    }
    let overlap = readiness(state, observer)?;
    if overlap < 1.0 - READY_TOLERANCE {
        return Err(Error::ObserverNotReady {
            observer: observer.subsystem().to_string(),
            ready: observer.ready.clone(),
            overlap,
        });
    }
    let dilation = dilation_unitary(basis, observer)?;
    state.apply_unitary(&[target, observer.subsystem()], &dilation)
}

/// Pre-measurement of an agent in a basis that superposes its record states.
///
/// The map is the same as [`premeasure`]; the separate entry point keeps
/// catalytic steps identifiable in traces.
pub fn catalytic_premeasure(
    state: &StateVector,
    agent: &str,
    cat_basis: &Basis,
    observer: &ObserverRegister,
) -> Result<StateVector> {
    premeasure(state, agent, cat_basis, observer)
}

/// Outcome probabilities keyed by label, in basis order.
#[derive(Debug, Clone, PartialEq)]
pub struct OutcomeDistribution {
    entries: Vec<(String, f64)>,
}

impl OutcomeDistribution {
    /// Validates that every probability lies in `[0, 1]` and the total is 1
    /// within `1e-10`. Tiny negative or above-one rounding is clamped.
    pub fn new<S: Into<String>>(entries: Vec<(S, f64)>) -> Result<Self> {
        let entries: Vec<(String, f64)> = entries.into_iter().map(|(l, p)| (l.into(), p)).collect();
        let mut total = 0.0;
        for (label, p) in &entries {
            if !(-1e-12..=1.0 + 1e-12).contains(p) {
                return Err(Error::InvalidParameter(format!(
                    "probability {p} for `{label}` outside [0, 1]"
                )));
            }
            total += p;
        }
        if (total - 1.0).abs() > 1e-10 {
            return Err(Error::InvalidParameter(format!("probabilities sum to {total}")));
        }
        Ok(Self {
            entries: entries.into_iter().map(|(l, p)| (l, p.clamp(0.0, 1.0))).collect(),
        })
    }

    pub fn entries(&self) -> &[(String, f64)] {
        &self.entries
    }

    pub fn labels(&self) -> impl Iterator<Item = &str> {
        self.entries.iter().map(|(l, _)| l.as_str())
    }

    pub fn get(&self, label: &str) -> Option<f64> {
        self.entries.iter().find(|(l, _)| l == label).map(|(_, p)| *p)
    }

    /// Label whose probability is at least `1 − tolerance`, if any.
    pub fn certain_outcome(&self, tolerance: f64) -> Option<&str> {
        self.entries
            .iter()
            .find(|(_, p)| *p >= 1.0 - tolerance)
            .map(|(l, _)| l.as_str())
    }

    /// Total-variation distance. Both distributions must carry the same
    /// label set.
    pub fn total_variation(&self, other: &Self) -> Result<f64> {
        if self.entries.len() != other.entries.len() {
            return Err(Error::TargetMismatch("outcome sets differ in size".into()));
        }
        let mut sum = 0.0;
        for (label, p) in &self.entries {
            let q = other
                .get(label)
                .ok_or_else(|| Error::TargetMismatch(format!("outcome `{label}` missing")))?;
            sum += (p - q).abs();
        }
        Ok(0.5 * sum)
    }
}

/// Born probabilities of measuring `target` in `basis`: the branch weights of
/// [`StateVector::branch_decompose`].
pub fn born(state: &StateVector, target: &str, basis: &Basis) -> Result<OutcomeDistribution> {
    let branches = state.branch_decompose(target, basis)?;
    let total: f64 = branches.iter().map(|b| b.weight).sum();
    OutcomeDistribution::new(branches.into_iter().map(|b| (b.label, b.weight / total)).collect())
}

/// Joint Born distribution for several subsystems measured in their bases.
/// Outcome labels are the per-target labels joined with `,`, enumerated
/// row-major in the order of `targets`.
pub fn born_joint(state: &StateVector, targets: &[(&str, &Basis)]) -> Result<OutcomeDistribution> {
    if targets.is_empty() {
        return Err(Error::DimensionMismatch("no report targets".into()));
    }
    let mut rotated = state.clone();
    let mut positions = Vec::with_capacity(targets.len());
    for (name, basis) in targets {
        let pos = basis.position_in(state.layout(), name)?;
        if positions.contains(&pos) {
            return Err(Error::DimensionMismatch(format!("subsystem `{name}` reported twice")));
        }
        positions.push(pos);
        // B† maps each basis vector onto the matching computational state
        let change = basis.to_matrix().adjoint();
        rotated = rotated.apply_unitary(&[name], &change)?;
    }
    let dims: Vec<usize> = targets.iter().map(|(_, b)| b.dim()).collect();
    let outcomes: usize = dims.iter().product();
    let mut probs = vec![0.0; outcomes];
    for (i, a) in rotated.amplitudes().iter().enumerate() {
        let digits = rotated.layout().digits(i);
        let key = positions
            .iter()
            .zip(&dims)
            .fold(0, |acc, (&p, &d)| acc * d + digits[p]);
        probs[key] += a.norm_sqr();
    }
    let total: f64 = probs.iter().sum();
    let mut entries = Vec::with_capacity(outcomes);
    for (key, p) in probs.into_iter().enumerate() {
        let mut rem = key;
        let mut labels = vec![""; targets.len()];
        for (slot, (_, basis)) in targets.iter().enumerate().rev() {
            labels[slot] = basis.vectors()[rem % basis.dim()].label();
            rem /= basis.dim();
        }
        entries.push((labels.join(","), p / total));
    }
    OutcomeDistribution::new(entries)
}

/// Born distribution of `target` in `basis`, conditioned on `given` having
/// been found in the state labeled `given_label` of `given_basis`.
pub fn conditional_born(
    state: &StateVector,
    given: &str,
    given_basis: &Basis,
    given_label: &str,
    target: &str,
    basis: &Basis,
) -> Result<OutcomeDistribution> {
    given_basis.position_in(state.layout(), given)?;
    let vector = given_basis
        .vector(given_label)
        .ok_or_else(|| Error::InvalidBasis(format!("no label `{given_label}` in `{}`", given_basis.name())))?;
    let (_, conditioned) = state.condition_on(given, vector)?;
    born(&conditioned, target, basis)
}

/// Samples one outcome with the Born rule and returns it with the
/// post-measurement state (selected basis vector ⊗ normalized residual).
pub fn collapse(state: &StateVector, target: &str, basis: &Basis, rng_seed: u64) -> Result<(String, StateVector)> {
    collapse_with(state, target, basis, &mut rng::rng_from_seed(rng_seed))
}

/// [`collapse`] drawing from a caller-owned generator.
pub fn collapse_with(
    state: &StateVector,
    target: &str,
    basis: &Basis,
    rng: &mut SimRng,
) -> Result<(String, StateVector)> {
    let position = basis.position_in(state.layout(), target)?;
    let branches = state.branch_decompose(target, basis)?;
    let weights: Vec<f64> = branches.iter().map(|b| b.weight).collect();
    let k = rng::pick(&weights, rng::uniform(rng));
    let chosen = &branches[k];
    let post = chosen
        .residual
        .insert_factor(position, target, basis.vectors()[k].components())?;
    Ok((chosen.label.clone(), post))
}

/// Outcome counts of `shots` independent measurements of copies of `state`,
/// drawn from a single stream seeded with `seed`. Counts follow basis order.
pub fn sample_counts(
    state: &StateVector,
    target: &str,
    basis: &Basis,
    seed: u64,
    shots: usize,
) -> Result<Vec<(String, usize)>> {
    let distribution = born(state, target, basis)?;
    let probs: Vec<f64> = distribution.entries().iter().map(|(_, p)| *p).collect();
    let mut counts = vec![0usize; probs.len()];
    let mut rng = rng::rng_from_seed(seed);
    for _ in 0..shots {
        counts[rng::pick(&probs, rng::uniform(&mut rng))] += 1;
    }
    Ok(distribution
        .entries()
        .iter()
        .map(|(l, _)| l.clone())
        .zip(counts)
        .collect())
}

/// The two-outcome `x` basis `{(↑ ± ↓)/√2}` of a qubit, labeled as given.
pub fn hadamard_basis(name: &str, subsystem: &str, plus: &str, minus: &str) -> Result<Basis> {
    let s = std::f64::consts::FRAC_1_SQRT_2;
    Basis::new(
        name,
        subsystem,
        vec![(plus, vec![c64(s, 0.0), c64(s, 0.0)]), (minus, vec![c64(s, 0.0), c64(-s, 0.0)])],
    )
}
