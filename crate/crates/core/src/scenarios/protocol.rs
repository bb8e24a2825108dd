use std::collections::HashSet;
use std::fmt;

use num_complex::Complex64;

use crate::error::{Error, Result};
use crate::measurement::{self, ObserverRegister, OutcomeDistribution};
use crate::rng;
use crate::statevec::{c64, Basis, StateVector, SystemLayout, NORM_TOLERANCE};

/// One protocol step.
#[derive(Debug, Clone, PartialEq)]
pub enum Step {
    /// Sets the initial factor of a subsystem. Only allowed before any
    /// other kind of step. `label` remembers the basis label the vector was
    /// written as, if any.
    Prepare {
        subsystem: String,
        vector: Vec<Complex64>,
        label: Option<String>,
    },
    Premeasure {
        target: String,
        basis: Basis,
        observer: ObserverRegister,
    },
    /// Pre-measurement of an agent in a basis superposing its records.
    CatalyticPremeasure {
        agent: String,
        basis: Basis,
        observer: ObserverRegister,
    },
    Collapse {
        target: String,
        basis: Basis,
    },
    /// Requests a joint Born table; leaves the state untouched.
    Report {
        targets: Vec<(String, Basis)>,
    },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum StepKind {
    Initial,
    Prepare,
    Premeasure,
    CatalyticPremeasure,
    Collapse,
    Report,
}

impl StepKind {
    pub fn as_str(self) -> &'static str {
        match self {
            StepKind::Initial => "initial",
            StepKind::Prepare => "prepare",
            StepKind::Premeasure => "measure",
            StepKind::CatalyticPremeasure => "catmeasure",
            StepKind::Collapse => "collapse",
            StepKind::Report => "report",
        }
    }
}

impl Step {
    pub fn kind(&self) -> StepKind {
        match self {
            Step::Prepare { .. } => StepKind::Prepare,
            Step::Premeasure { .. } => StepKind::Premeasure,
            Step::CatalyticPremeasure { .. } => StepKind::CatalyticPremeasure,
            Step::Collapse { .. } => StepKind::Collapse,
            Step::Report { .. } => StepKind::Report,
        }
    }

    /// Bases referenced by the step.
    fn bases(&self) -> Vec<&Basis> {
        match self {
            Step::Prepare { .. } => vec![],
            Step::Premeasure { basis, .. } | Step::CatalyticPremeasure { basis, .. } => vec![basis],
            Step::Collapse { basis, .. } => vec![basis],
            Step::Report { targets } => targets.iter().map(|(_, b)| b).collect(),
        }
    }
}

impl fmt::Display for Step {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Step::Prepare { subsystem, vector, label } => match label {
                Some(label) => write!(f, "prepare {subsystem} {label}"),
                None => {
                    write!(f, "prepare {subsystem} [")?;
                    for (k, z) in vector.iter().enumerate() {
                        if k > 0 {
                            f.write_str(", ")?;
                        }
                        write!(f, "({},{})", z.re, z.im)?;
                    }
                    f.write_str("]")
                }
            },
            Step::Premeasure { target, basis, observer } => {
                write!(f, "measure {target} in {} record {}", basis.name(), observer.subsystem())
            }
            Step::CatalyticPremeasure { agent, basis, observer } => {
                write!(f, "catmeasure {agent} in {} record {}", basis.name(), observer.subsystem())
            }
            Step::Collapse { target, basis } => write!(f, "collapse {target} in {}", basis.name()),
            Step::Report { targets } => {
                f.write_str("report")?;
                for (name, _) in targets {
                    write!(f, " {name}")?;
                }
                f.write_str(" in")?;
                for (_, basis) in targets {
                    write!(f, " {}", basis.name())?;
                }
                Ok(())
            }
        }
    }
}

/// A layout, its declared bases, and an ordered list of steps.
#[derive(Debug, Clone, PartialEq)]
pub struct Protocol {
    layout: SystemLayout,
    bases: Vec<Basis>,
    steps: Vec<Step>,
}

impl Protocol {
    /// Validates that every step refers to declared subsystems and bases and
    /// that preparations come first.
    pub fn new(layout: SystemLayout, bases: Vec<Basis>, steps: Vec<Step>) -> Result<Self> {
        let mut names = HashSet::new();
        for b in &bases {
            if !names.insert(b.name()) {
                return Err(Error::InvalidProtocol(format!("basis `{}` declared twice", b.name())));
            }
            b.position_in(&layout, b.subsystem())?;
        }
        let protocol = Self { layout, bases, steps };
        let mut evolving = false;
        for (k, step) in protocol.steps.iter().enumerate() {
            protocol
                .validate_step(step, evolving)
                .map_err(|e| Error::InvalidProtocol(format!("step {} (`{step}`): {e}", k + 1)))?;
            evolving |= step.kind() != StepKind::Prepare;
        }
        Ok(protocol)
    }

    fn validate_step(&self, step: &Step, evolving: bool) -> Result<()> {
        for basis in step.bases() {
            if self.basis(basis.name()) != Some(basis) {
                return Err(Error::InvalidProtocol(format!("basis `{}` is not declared", basis.name())));
            }
        }
        match step {
            Step::Prepare { subsystem, vector, label } => {
                if let Some(label) = label {
                    match self.prepare_label(subsystem, label) {
                        Some(v) if v == vector.as_slice() => {}
                        _ => {
                            return Err(Error::InvalidProtocol(format!(
                                "label `{label}` does not name the prepared vector of `{subsystem}`"
                            )))
                        }
                    }
                }
                if evolving {
                    return Err(Error::InvalidProtocol("prepare after the state has evolved".into()));
                }
                let dim = self.layout.dim_of(subsystem)?;
                if vector.len() != dim {
                    return Err(Error::DimensionMismatch(format!(
                        "vector of length {} for `{subsystem}` of dimension {dim}",
                        vector.len()
                    )));
                }
                if crate::statevec::norm_of(vector) <= NORM_TOLERANCE {
                    return Err(Error::ZeroVector(format!("prepared state of `{subsystem}`")));
                }
            }
            Step::Premeasure { target, basis, observer } | Step::CatalyticPremeasure { agent: target, basis, observer } => {
                basis.position_in(&self.layout, target)?;
                observer.basis().position_in(&self.layout, observer.subsystem())?;
                if observer.subsystem() == target {
                    return Err(Error::InvalidObserver(format!("`{target}` cannot record its own measurement")));
                }
                if observer.record_labels().len() == basis.dim()
                    && *observer != self.observer(observer.subsystem(), basis.dim())?
                {
                    return Err(Error::InvalidObserver(format!(
                        "`{}` must use its record basis with the first vector as ready state",
                        observer.subsystem()
                    )));
                }
                if observer.record_labels().len() != basis.dim() {
                    return Err(Error::DimensionMismatch(format!(
                        "observer `{}` has {} records for {} outcomes",
                        observer.subsystem(),
                        observer.record_labels().len(),
                        basis.dim()
                    )));
                }
            }
            Step::Collapse { target, basis } => {
                basis.position_in(&self.layout, target)?;
            }
            Step::Report { targets } => {
                if targets.is_empty() {
                    return Err(Error::InvalidProtocol("empty report".into()));
                }
                let mut seen = HashSet::new();
                for (name, basis) in targets {
                    basis.position_in(&self.layout, name)?;
                    if !seen.insert(name) {
                        return Err(Error::InvalidProtocol(format!("`{name}` reported twice")));
                    }
                }
            }
        }
        Ok(())
    }

    pub fn layout(&self) -> &SystemLayout {
        &self.layout
    }

    pub fn bases(&self) -> &[Basis] {
        &self.bases
    }

    pub fn steps(&self) -> &[Step] {
        &self.steps
    }

    pub fn basis(&self, name: &str) -> Option<&Basis> {
        self.bases.iter().find(|b| b.name() == name)
    }

    pub fn has_collapse(&self) -> bool {
        self.steps.iter().any(|s| s.kind() == StepKind::Collapse)
    }

    /// Vector named `label` in the first declared basis on `subsystem` that
    /// has such a label.
    pub fn prepare_label(&self, subsystem: &str, label: &str) -> Option<&[Complex64]> {
        self.bases
            .iter()
            .filter(|b| b.subsystem() == subsystem)
            .find_map(|b| b.vector(label))
    }

    /// The record basis of `subsystem`: the first basis declared on it, or
    /// the computational basis labeled `0, 1, …` when none is declared.
    pub fn record_basis(&self, subsystem: &str) -> Result<Basis> {
        if let Some(b) = self.bases.iter().find(|b| b.subsystem() == subsystem) {
            return Ok(b.clone());
        }
        let dim = self.layout.dim_of(subsystem)?;
        let labels: Vec<String> = (0..dim).map(|k| k.to_string()).collect();
        Basis::computational(format!("{subsystem}_std"), subsystem, &labels)
    }

    /// Observer register used by `measure … record <observer>`: ready is the
    /// first vector of the record basis, records are the first `outcomes`.
    pub fn observer(&self, subsystem: &str, outcomes: usize) -> Result<ObserverRegister> {
        ObserverRegister::standard(self.record_basis(subsystem)?, outcomes)
    }
}

/// A requested Born table.
#[derive(Debug, Clone, PartialEq)]
pub struct Report {
    /// `(subsystem, basis name)` pairs in request order.
    pub targets: Vec<(String, String)>,
    pub distribution: OutcomeDistribution,
}

/// State after one step.
#[derive(Debug, Clone, PartialEq)]
pub struct TraceRecord {
    pub step: String,
    pub kind: StepKind,
    pub state: StateVector,
    /// Sampled label of a collapse step.
    pub outcome: Option<String>,
    pub reports: Vec<Report>,
}

/// Step-by-step record of a protocol run. The first record is the initial
/// state, followed by one record per step.
#[derive(Debug, Clone, PartialEq)]
pub struct Trace {
    pub records: Vec<TraceRecord>,
}

impl Trace {
    pub fn final_state(&self) -> &StateVector {
        &self.records.last().expect("trace always has an initial record").state
    }

    pub fn step_kinds(&self) -> Vec<StepKind> {
        self.records.iter().map(|r| r.kind).collect()
    }

    pub fn reports(&self) -> impl Iterator<Item = &Report> {
        self.records.iter().flat_map(|r| r.reports.iter())
    }

    /// Largest amplitude difference over aligned records, or `None` when the
    /// traces differ in length, step text, or layout.
    pub fn max_state_diff(&self, other: &Trace) -> Option<f64> {
        if self.records.len() != other.records.len() {
            return None;
        }
        let mut worst: f64 = 0.0;
        for (a, b) in self.records.iter().zip(&other.records) {
            if a.step != b.step || a.kind != b.kind {
                return None;
            }
            worst = worst.max(a.state.max_abs_diff(&b.state).ok()?);
        }
        Some(worst)
    }
}

pub(crate) fn report_for(state: &StateVector, targets: &[(String, Basis)]) -> Result<Report> {
    let pairs: Vec<(&str, &Basis)> = targets.iter().map(|(n, b)| (n.as_str(), b)).collect();
    Ok(Report {
        targets: targets
            .iter()
            .map(|(n, b)| (n.clone(), b.name().to_string()))
            .collect(),
        distribution: measurement::born_joint(state, &pairs)?,
    })
}

/// Applies one evolving step. Prepare and Report steps are handled by the
/// caller.
pub(crate) fn evolve(
    state: &StateVector,
    step: &Step,
    rng: Option<&mut rng::SimRng>,
) -> Result<(StateVector, Option<String>)> {
    match step {
        Step::Premeasure { target, basis, observer } => {
            Ok((measurement::premeasure(state, target, basis, observer)?, None))
        }
        Step::CatalyticPremeasure { agent, basis, observer } => {
            Ok((measurement::catalytic_premeasure(state, agent, basis, observer)?, None))
        }
        Step::Collapse { target, basis } => {
            let rng = rng.ok_or(Error::MissingSeed)?;
            let (label, post) = measurement::collapse_with(state, target, basis, rng)?;
            Ok((post, Some(label)))
        }
        Step::Report { .. } => Ok((state.clone(), None)),
        Step::Prepare { .. } => Err(Error::InvalidProtocol("prepare after the state has evolved".into())),
    }
}

/// Executes a protocol.
///
/// Every subsystem starts in its first computational state. Collapse step
/// number `k` (0-based position in the step list) draws from a stream seeded
/// with `derive_seed(seed, k)`, so a fixed seed reproduces the trace.
pub fn run_protocol(protocol: &Protocol, rng_seed: Option<u64>) -> Result<Trace> {
    if protocol.has_collapse() && rng_seed.is_none() {
        return Err(Error::MissingSeed);
    }
    let layout = protocol.layout().clone();
    let mut factors: Vec<Vec<Complex64>> = layout
        .subsystems()
        .iter()
        .map(|s| {
            let mut v = vec![Complex64::default(); s.dim()];
            v[0] = c64(1.0, 0.0);
            v
        })
        .collect();
    let mut state = StateVector::product(layout.clone(), &factors)?;
    let mut records = vec![TraceRecord {
        step: "initial".into(),
        kind: StepKind::Initial,
        state: state.clone(),
        outcome: None,
        reports: vec![],
    }];
    for (k, step) in protocol.steps().iter().enumerate() {
        let mut outcome = None;
        let mut reports = vec![];
        match step {
            Step::Prepare { subsystem, vector, .. } => {
                factors[layout.index_of(subsystem)?] = vector.clone();
                state = StateVector::product(layout.clone(), &factors)?;
            }
            Step::Report { targets } => reports.push(report_for(&state, targets)?),
            _ => {
                let mut stream = rng_seed.map(|s| rng::rng_from_seed(rng::derive_seed(s, k as u64)));
                let (next, label) = evolve(&state, step, stream.as_mut())?;
                state = next;
                outcome = label;
            }
        }
        records.push(TraceRecord {
            step: step.to_string(),
            kind: step.kind(),
            state: state.clone(),
            outcome,
            reports,
        });
    }
    Ok(Trace { records })
}

/// Deterministic evolution through one step; reports leave the state alone.
pub(crate) fn protocol_evolve(state: &StateVector, step: &Step) -> Result<StateVector> {
    Ok(evolve(state, step, None)?.0)
}
