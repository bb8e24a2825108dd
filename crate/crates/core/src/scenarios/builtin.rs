//! The three spin/two-observer processes.
//!
//! All three live on the layout `[S:2, A:2, B:2]`: a spin half `S`, an agent
//! `A` who records `U`/`D` for up/down, and a second agent `B` who records
//! `Y`/`N` (asking whether `A` is in `(U+D)/√2`) or `R`/`L` (spin right or
//! left). Each observer's first record state doubles as its ready state.
//!
//! * cat: `A` measures the spin in `z`, then `B` measures `A` in the Cat
//!   basis `{(U±D)/√2}`.
//! * dog: what `A` deduces after seeing up: start from `↑ U B` and apply
//!   `B`'s Cat-basis measurement.
//! * pet: `A` measures the spin in `z`, then `B` measures the spin in the
//!   `→/←` basis. Nobody touches `A`.
//!
//! The dedicated `run_*` functions call the measurement primitives directly;
//! `*_protocol` builds the same process as a [`Protocol`] for
//! [`run_protocol`](super::run_protocol) and the prediction rules.

use num_complex::Complex64;

use super::protocol::{report_for, Protocol, Step, StepKind, Trace, TraceRecord};
use crate::error::Result;
use crate::measurement::{self, hadamard_basis, ObserverRegister};
use crate::statevec::{Basis, StateVector, SystemLayout};

/// Subsystem and basis names used by the built-in processes.
pub mod names {
    pub const SPIN: &str = "S";
    pub const AGENT: &str = "A";
    pub const WITNESS: &str = "B";
    /// Fresh register for the agent's second look at the spin.
    pub const SECOND_LOOK: &str = "A2";

    pub const Z: &str = "z";
    pub const X: &str = "x";
    pub const AGENT_RECORDS: &str = "rec_A";
    pub const CAT: &str = "cat";
    pub const WITNESS_RECORDS: &str = "rec_B";
    pub const SECOND_LOOK_RECORDS: &str = "rec_A2";
}

use names::*;

/// Bases shared by the built-in processes.
#[derive(Debug, Clone)]
pub struct ScenarioBases {
    /// `{up, down}` on the spin.
    pub z: Basis,
    /// `{right, left}` = `{(↑±↓)/√2}` on the spin.
    pub x: Basis,
    /// `{U, D}` on the agent.
    pub agent_records: Basis,
    /// `{plus, minus}` = `{(U±D)/√2}` on the agent.
    pub cat: Basis,
    /// `{Y, N}` on the witness.
    pub witness_yes_no: Basis,
    /// `{R, L}` on the witness.
    pub witness_right_left: Basis,
}

impl ScenarioBases {
    pub fn new() -> Self {
        let built = || -> Result<Self> {
            Ok(Self {
                z: Basis::computational(Z, SPIN, &["up", "down"])?,
                x: hadamard_basis(X, SPIN, "right", "left")?,
                agent_records: Basis::computational(AGENT_RECORDS, AGENT, &["U", "D"])?,
                cat: hadamard_basis(CAT, AGENT, "plus", "minus")?,
                witness_yes_no: Basis::computational(WITNESS_RECORDS, WITNESS, &["Y", "N"])?,
                witness_right_left: Basis::computational(WITNESS_RECORDS, WITNESS, &["R", "L"])?,
            })
        };
        built().expect("built-in bases are orthonormal")
    }

    pub fn agent_observer(&self) -> ObserverRegister {
        ObserverRegister::standard(self.agent_records.clone(), 2).expect("two records")
    }

    pub fn witness_yes_no_observer(&self) -> ObserverRegister {
        ObserverRegister::standard(self.witness_yes_no.clone(), 2).expect("two records")
    }

    pub fn witness_right_left_observer(&self) -> ObserverRegister {
        ObserverRegister::standard(self.witness_right_left.clone(), 2).expect("two records")
    }
}

impl Default for ScenarioBases {
    fn default() -> Self {
        Self::new()
    }
}

fn layout() -> SystemLayout {
    SystemLayout::new([(SPIN, 2), (AGENT, 2), (WITNESS, 2)]).expect("static layout")
}

fn prepare(subsystem: &str, basis: &Basis, label: &str) -> Step {
    Step::Prepare {
        subsystem: subsystem.to_string(),
        vector: basis.vector(label).expect("known label").to_vec(),
        label: Some(label.to_string()),
    }
}

fn record(step: &Step, state: StateVector) -> TraceRecord {
    TraceRecord {
        step: step.to_string(),
        kind: step.kind(),
        state,
        outcome: None,
        reports: vec![],
    }
}

fn initial(state: StateVector) -> TraceRecord {
    TraceRecord {
        step: "initial".into(),
        kind: StepKind::Initial,
        state,
        outcome: None,
        reports: vec![],
    }
}

fn report_record(step: Step, state: &StateVector) -> TraceRecord {
    let Step::Report { targets } = &step else {
        unreachable!("report_record takes report steps")
    };
    let report = report_for(state, targets).expect("built-in report targets are valid");
    TraceRecord {
        reports: vec![report],
        ..record(&step, state.clone())
    }
}

fn vector(basis: &Basis, label: &str) -> Vec<Complex64> {
    basis.vector(label).expect("known label").to_vec()
}

/// The cat process as a protocol: prepare `S` right, `A` measures `S` in
/// `z`, `B` measures `A` in the Cat basis, report `S A B`.
pub fn cat_protocol() -> Protocol {
    let b = ScenarioBases::new();
    let steps = vec![
        prepare(SPIN, &b.x, "right"),
        Step::Premeasure {
            target: SPIN.into(),
            basis: b.z.clone(),
            observer: b.agent_observer(),
        },
        Step::CatalyticPremeasure {
            agent: AGENT.into(),
            basis: b.cat.clone(),
            observer: b.witness_yes_no_observer(),
        },
        Step::Report {
            targets: vec![
                (SPIN.into(), b.z.clone()),
                (AGENT.into(), b.agent_records.clone()),
                (WITNESS.into(), b.witness_yes_no.clone()),
            ],
        },
    ];
    Protocol::new(
        layout(),
        vec![b.z, b.x, b.agent_records, b.cat, b.witness_yes_no],
        steps,
    )
    .expect("cat protocol is valid")
}

/// The dog process: `A`'s deduction `↑ U B` followed by `B`'s Cat-basis
/// measurement of `A`, then a `z` report on the spin.
pub fn dog_protocol() -> Protocol {
    let b = ScenarioBases::new();
    let steps = vec![
        prepare(SPIN, &b.z, "up"),
        prepare(AGENT, &b.agent_records, "U"),
        Step::CatalyticPremeasure {
            agent: AGENT.into(),
            basis: b.cat.clone(),
            observer: b.witness_yes_no_observer(),
        },
        Step::Report {
            targets: vec![(SPIN.into(), b.z.clone())],
        },
    ];
    Protocol::new(
        layout(),
        vec![b.z, b.agent_records, b.cat, b.witness_yes_no],
        steps,
    )
    .expect("dog protocol is valid")
}

/// The pet process: prepare `S` right, `A` measures `S` in `z`, `B`
/// measures `S` in `x`, report `S A B`.
pub fn pet_protocol() -> Protocol {
    let b = ScenarioBases::new();
    let steps = vec![
        prepare(SPIN, &b.x, "right"),
        Step::Premeasure {
            target: SPIN.into(),
            basis: b.z.clone(),
            observer: b.agent_observer(),
        },
        Step::Premeasure {
            target: SPIN.into(),
            basis: b.x.clone(),
            observer: b.witness_right_left_observer(),
        },
        Step::Report {
            targets: vec![
                (SPIN.into(), b.z.clone()),
                (AGENT.into(), b.agent_records.clone()),
                (WITNESS.into(), b.witness_right_left.clone()),
            ],
        },
    ];
    Protocol::new(
        layout(),
        vec![b.z, b.x, b.agent_records, b.witness_right_left],
        steps,
    )
    .expect("pet protocol is valid")
}

/// Runs the cat process. The final state is
/// `[U(↑Y + ↑N + ↓Y − ↓N) + D(↑Y − ↑N + ↓Y + ↓N)]/√8`.
pub fn run_cat() -> Trace {
    let b = ScenarioBases::new();
    let p = cat_protocol();
    let steps = p.steps();
    let start = StateVector::basis_state(layout(), &[0, 0, 0]).expect("static layout");
    let prepared = StateVector::product(
        layout(),
        &[vector(&b.x, "right"), vector(&b.agent_records, "U"), vector(&b.witness_yes_no, "Y")],
    )
    .expect("nonzero factors");
    let measured = measurement::premeasure(&prepared, SPIN, &b.z, &b.agent_observer()).expect("A is ready");
    let catalyzed = measurement::catalytic_premeasure(&measured, AGENT, &b.cat, &b.witness_yes_no_observer())
        .expect("B is ready");
    Trace {
        records: vec![
            initial(start),
            record(&steps[0], prepared),
            record(&steps[1], measured),
            record(&steps[2], catalyzed.clone()),
            report_record(steps[3].clone(), &catalyzed),
        ],
    }
}

/// Runs the dog process. The final state is `↑[(U+D)Y + (U−D)N]/2`.
pub fn run_dog() -> Trace {
    let b = ScenarioBases::new();
    let p = dog_protocol();
    let steps = p.steps();
    let start = StateVector::basis_state(layout(), &[0, 0, 0]).expect("static layout");
    let prepared = StateVector::product(
        layout(),
        &[vector(&b.z, "up"), vector(&b.agent_records, "U"), vector(&b.witness_yes_no, "Y")],
    )
    .expect("nonzero factors");
    let catalyzed = measurement::catalytic_premeasure(&prepared, AGENT, &b.cat, &b.witness_yes_no_observer())
        .expect("B is ready");
    Trace {
        records: vec![
            initial(start),
            record(&steps[0], prepared.clone()),
            record(&steps[1], prepared),
            record(&steps[2], catalyzed.clone()),
            report_record(steps[3].clone(), &catalyzed),
        ],
    }
}

/// Runs the pet process. The final state is
/// `[U(↑R + ↓R + ↑L − ↓L) + D(↑R + ↓R − ↑L + ↓L)]/√8`.
pub fn run_pet() -> Trace {
    let b = ScenarioBases::new();
    let p = pet_protocol();
    let steps = p.steps();
    let start = StateVector::basis_state(layout(), &[0, 0, 0]).expect("static layout");
    let prepared = StateVector::product(
        layout(),
        &[vector(&b.x, "right"), vector(&b.agent_records, "U"), vector(&b.witness_right_left, "R")],
    )
    .expect("nonzero factors");
    let measured = measurement::premeasure(&prepared, SPIN, &b.z, &b.agent_observer()).expect("A is ready");
    let witnessed =
        measurement::premeasure(&measured, SPIN, &b.x, &b.witness_right_left_observer()).expect("B is ready");
    Trace {
        records: vec![
            initial(start),
            record(&steps[0], prepared),
            record(&steps[1], measured),
            record(&steps[2], witnessed.clone()),
            report_record(steps[3].clone(), &witnessed),
        ],
    }
}

/// Appends a fresh register `A2` (the agent's second look) and lets it
/// record the spin in `z`.
pub fn with_second_look(state: &StateVector) -> Result<StateVector> {
    let rec = second_look_records();
    let ready = rec.vector("U").expect("known label").to_vec();
    let extended = state.with_fresh(SECOND_LOOK, &ready)?;
    let observer = ObserverRegister::standard(rec, 2)?;
    measurement::premeasure(&extended, SPIN, &ScenarioBases::new().z, &observer)
}

fn second_look_records() -> Basis {
    Basis::computational(SECOND_LOOK_RECORDS, SECOND_LOOK, &["U", "D"]).expect("static basis")
}

/// For each first record `U`/`D` of the agent in `state`, the probability
/// that a second look at the spin disagrees with it.
fn flip_probabilities(state: &StateVector) -> Result<Vec<(String, f64)>> {
    let b = ScenarioBases::new();
    let looked = with_second_look(state)?;
    let second = second_look_records();
    ["U", "D"]
        .into_iter()
        .map(|first| {
            let d = measurement::conditional_born(&looked, AGENT, &b.agent_records, first, SECOND_LOOK, &second)?;
            let other = if first == "U" { "D" } else { "U" };
            Ok((first.to_string(), d.get(other).unwrap_or(0.0)))
        })
        .collect()
}

/// Conditional flip probabilities of the agent's second look after the cat
/// process, keyed by the first record.
pub fn cat_flip_probabilities() -> Result<Vec<(String, f64)>> {
    flip_probabilities(run_cat().final_state())
}

/// Same as [`cat_flip_probabilities`] for the pet process.
pub fn pet_flip_probabilities() -> Result<Vec<(String, f64)>> {
    flip_probabilities(run_pet().final_state())
}

/// Amplitudes of `state` expanded in the product of the given per-subsystem
/// bases (one per subsystem, in layout order). Labels are joined with `,`.
pub fn labeled_amplitudes(state: &StateVector, bases: &[&Basis]) -> Result<Vec<(String, Complex64)>> {
    let names: Vec<String> = state.layout().names().map(str::to_string).collect();
    if bases.len() != names.len() {
        return Err(crate::Error::DimensionMismatch(format!(
            "{} bases for {} subsystems",
            bases.len(),
            names.len()
        )));
    }
    let mut rotated = state.clone();
    for (name, basis) in names.iter().zip(bases) {
        basis.position_in(state.layout(), name)?;
        rotated = rotated.apply_unitary(&[name], &basis.to_matrix().adjoint())?;
    }
    Ok(rotated
        .amplitudes()
        .iter()
        .enumerate()
        .map(|(i, a)| {
            let digits = rotated.layout().digits(i);
            let label: Vec<&str> = digits
                .iter()
                .zip(bases)
                .map(|(&d, b)| b.vectors()[d].label())
                .collect();
            (label.join(","), *a)
        })
        .collect())
}
