//! Agent predictions under the eigenvalue-certainty rule.
//!
//! An agent who knows the state at `t₀` and the steps that will act until
//! `t` may evolve that state and, if the result is an eigenstate of the
//! measured observable, claim certainty about the outcome. [`predict_q`]
//! applies that rule as is. [`predict_q_star`] adds the condition that no
//! catalytic measurement is performed on the agent in `(t₀, t)`; when the
//! condition fails it abstains instead of predicting.
//!
//! "Catalytic" is structural: a [`Step::CatalyticPremeasure`] whose measured
//! subsystem is the agent and whose basis superposes the agent's record
//! states. A basis vector superposes records when it overlaps more than one
//! record vector by more than [`CatalyticCriterion::tolerance`]. This is one
//! formalization for finite record registers; registers with many record
//! states are treated the same way.

use std::fmt;

use crate::error::{Error, Result};
use crate::measurement::{self, OutcomeDistribution};
use crate::scenarios::{Protocol, Step, StepKind};
use crate::statevec::{dot, Basis, StateVector};

/// Probability within which an outcome counts as certain.
pub const CERTAINTY_TOLERANCE: f64 = 1e-10;

/// Reason attached to predictions refused by [`predict_q_star`].
pub const CATALYTIC_REASON: &str = "catalytic measurement on agent in interval";

/// What is predicted: `subsystem` measured in `basis` after `time` steps of
/// the interval.
#[derive(Debug, Clone, PartialEq)]
pub struct PredictionTarget {
    pub subsystem: String,
    pub basis: Basis,
    pub time: usize,
}

/// An agent's knowledge at `t₀`.
#[derive(Debug, Clone, PartialEq)]
pub struct KnowledgeModel {
    pub agent: String,
    /// Deduced state of the whole layout at `t₀`.
    pub believed_state: StateVector,
    /// Steps the agent knows will act in `(t₀, t)`.
    pub known_future_steps: Vec<Step>,
    pub target: PredictionTarget,
    /// The agent's record basis; the computational basis when `None`.
    pub record_basis: Option<Basis>,
}

impl KnowledgeModel {
    fn check(&self) -> Result<()> {
        let layout = self.believed_state.layout();
        layout
            .index_of(&self.agent)
            .map_err(|e| Error::MalformedKnowledge(e.to_string()))?;
        self.target
            .basis
            .position_in(layout, &self.target.subsystem)
            .map_err(|e| Error::MalformedKnowledge(e.to_string()))?;
        if let Some(b) = &self.record_basis {
            b.position_in(layout, &self.agent)
                .map_err(|e| Error::MalformedKnowledge(e.to_string()))?;
        }
        for step in &self.known_future_steps {
            match step.kind() {
                StepKind::Prepare | StepKind::Collapse => {
                    return Err(Error::MalformedKnowledge(format!(
                        "`{step}` cannot be part of an agent's deterministic forecast"
                    )))
                }
                _ => {}
            }
        }
        Ok(())
    }

    /// True when the known steps appear, in order, among `actual_steps`.
    pub fn is_consistent_with(&self, actual_steps: &[Step]) -> bool {
        let mut actual = actual_steps.iter();
        self.known_future_steps
            .iter()
            .all(|known| actual.any(|a| a == known))
    }

    /// Evolves the believed state through the known steps.
    pub fn forecast_state(&self) -> Result<StateVector> {
        self.check()?;
        let mut state = self.believed_state.clone();
        for step in &self.known_future_steps {
            state = crate::scenarios::protocol_evolve(&state, step)
                .map_err(|e| Error::MalformedKnowledge(format!("`{step}`: {e}")))?;
        }
        Ok(state)
    }
}

/// Decides which steps count as catalytic measurements of an agent.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CatalyticCriterion {
    /// Overlap magnitude above which a basis vector is said to contain a
    /// record state.
    pub tolerance: f64,
}

impl Default for CatalyticCriterion {
    fn default() -> Self {
        Self { tolerance: 1e-6 }
    }
}

impl CatalyticCriterion {
    /// Whether `step` is a catalytic measurement of `agent`.
    pub fn is_catalytic(&self, step: &Step, agent: &str, record_basis: Option<&Basis>) -> bool {
        let Step::CatalyticPremeasure { agent: measured, basis, .. } = step else {
            return false;
        };
        if measured != agent {
            return false;
        }
        basis.vectors().iter().any(|v| {
            let contained = match record_basis {
                Some(records) => records
                    .vectors()
                    .iter()
                    .filter(|r| dot(r.components(), v.components()).norm() > self.tolerance)
                    .count(),
                None => v.components().iter().filter(|c| c.norm() > self.tolerance).count(),
            };
            contained > 1
        })
    }
}

/// Which rule produced a prediction.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Rule {
    /// Plain eigenvalue certainty.
    Q,
    /// Certainty only when no catalytic measurement hits the agent.
    QStar,
}

impl fmt::Display for Rule {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Rule::Q => "Q",
            Rule::QStar => "Q*",
        })
    }
}

/// An agent's claim about a future measurement.
#[derive(Debug, Clone, PartialEq)]
pub struct Prediction {
    pub rule: Rule,
    pub subsystem: String,
    pub basis: String,
    /// Outcome labels of the target basis.
    pub outcomes: Vec<String>,
    /// `None` for invalid predictions, which claim nothing.
    pub distribution: Option<OutcomeDistribution>,
    pub certain_outcome: Option<String>,
    pub valid: bool,
    pub invalid_reason: Option<String>,
}

/// The unmodified rule: evolve the believed state through the known steps
/// and apply the Born rule to the target. Always valid.
pub fn predict_q(knowledge: &KnowledgeModel) -> Result<Prediction> {
    let state = knowledge.forecast_state()?;
    let target = &knowledge.target;
    let distribution = measurement::born(&state, &target.subsystem, &target.basis)?;
    let certain = distribution.certain_outcome(CERTAINTY_TOLERANCE).map(str::to_string);
    Ok(Prediction {
        rule: Rule::Q,
        subsystem: target.subsystem.clone(),
        basis: target.basis.name().to_string(),
        outcomes: target.basis.labels().map(str::to_string).collect(),
        distribution: Some(distribution),
        certain_outcome: certain,
        valid: true,
        invalid_reason: None,
    })
}

/// True iff no step of `actual_steps` is a catalytic measurement of the
/// agent, under the default [`CatalyticCriterion`].
pub fn catalytic_interval_check(knowledge: &KnowledgeModel, actual_steps: &[Step]) -> bool {
    catalytic_interval_check_with(knowledge, actual_steps, CatalyticCriterion::default())
}

pub fn catalytic_interval_check_with(
    knowledge: &KnowledgeModel,
    actual_steps: &[Step],
    criterion: CatalyticCriterion,
) -> bool {
    !actual_steps
        .iter()
        .any(|s| criterion.is_catalytic(s, &knowledge.agent, knowledge.record_basis.as_ref()))
}

/// The modified rule: as [`predict_q`] unless a catalytic measurement of the
/// agent happens in the interval, in which case the prediction is invalid
/// and carries no distribution.
pub fn predict_q_star(knowledge: &KnowledgeModel, actual_steps: &[Step]) -> Result<Prediction> {
    let naive = predict_q(knowledge)?;
    if catalytic_interval_check(knowledge, actual_steps) {
        return Ok(Prediction { rule: Rule::QStar, ..naive });
    }
    Ok(Prediction {
        rule: Rule::QStar,
        distribution: None,
        certain_outcome: None,
        valid: false,
        invalid_reason: Some(CATALYTIC_REASON.to_string()),
        ..naive
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Verdict {
    /// Predicted and actual distributions coincide.
    Agreement,
    /// The distributions differ but no certainty claim was violated.
    Deviation,
    /// A certain outcome was claimed and the actual probability is below 1.
    Contradiction,
    /// The prediction was refused.
    Abstained,
}

impl Verdict {
    pub fn as_str(self) -> &'static str {
        match self {
            Verdict::Agreement => "AGREEMENT",
            Verdict::Deviation => "DEVIATION",
            Verdict::Contradiction => "CONTRADICTION",
            Verdict::Abstained => "ABSTAINED",
        }
    }
}

impl fmt::Display for Verdict {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ValidationReport {
    pub verdict: Verdict,
    /// `None` when the prediction abstained.
    pub tv_distance: Option<f64>,
    /// Actual probability of the outcome claimed certain.
    pub certain_probability: Option<f64>,
}

/// Compares a prediction with the distribution actually realized.
pub fn validate(prediction: &Prediction, actual: &OutcomeDistribution) -> Result<ValidationReport> {
    let actual_labels: Vec<&str> = actual.labels().collect();
    if actual_labels != prediction.outcomes.iter().map(String::as_str).collect::<Vec<_>>() {
        return Err(Error::TargetMismatch(format!(
            "prediction over {:?}, actual over {:?}",
            prediction.outcomes, actual_labels
        )));
    }
    let Some(predicted) = prediction.distribution.as_ref().filter(|_| prediction.valid) else {
        return Ok(ValidationReport {
            verdict: Verdict::Abstained,
            tv_distance: None,
            certain_probability: None,
        });
    };
    let tv = predicted.total_variation(actual)?;
    let certain_probability = prediction
        .certain_outcome
        .as_deref()
        .map(|label| actual.get(label).unwrap_or(0.0));
    let verdict = match certain_probability {
        Some(p) if p < 1.0 - CERTAINTY_TOLERANCE => Verdict::Contradiction,
        _ if tv <= CERTAINTY_TOLERANCE => Verdict::Agreement,
        _ => Verdict::Deviation,
    };
    Ok(ValidationReport {
        verdict,
        tv_distance: Some(tv),
        certain_probability,
    })
}

/// An agent's knowledge extracted from a protocol, for one of its records.
#[derive(Debug, Clone)]
pub struct AgentView {
    /// The agent's record at `t₀`, if it measured something.
    pub record: Option<String>,
    pub knowledge: KnowledgeModel,
    /// Steps of the protocol in `(t₀, t)`.
    pub actual_steps: Vec<Step>,
}

/// Builds the agent's knowledge from a protocol.
///
/// If the agent records a measurement (`measure X in b record agent`), `t₀`
/// is right after its first such step and there is one view per record with
/// nonzero probability: the agent deduces the state by conditioning on its
/// own record, knows every later evolving step, and predicts a repeat of its
/// own measurement. Otherwise `t₀` is the start, the believed state is the
/// prepared state, and the target is the first entry of the last report.
pub fn views_from_protocol(protocol: &Protocol, agent: &str, seed: Option<u64>) -> Result<Vec<AgentView>> {
    protocol.layout().index_of(agent)?;
    let record_basis = protocol.record_basis(agent)?;
    let steps = protocol.steps();
    let first_look = steps.iter().position(|s| {
        matches!(s, Step::Premeasure { observer, .. } if observer.subsystem() == agent)
    });
    let forecastable = |s: &&Step| !matches!(s.kind(), StepKind::Report | StepKind::Collapse);
    match first_look {
        Some(i) => {
            let Step::Premeasure { target, basis, .. } = &steps[i] else {
                unreachable!()
            };
            let prefix = Protocol::new(protocol.layout().clone(), protocol.bases().to_vec(), steps[..=i].to_vec())?;
            let t0 = crate::scenarios::run_protocol(&prefix, seed)?.final_state().clone();
            let later = &steps[i + 1..];
            let mut views = Vec::new();
            for v in record_basis.vectors() {
                let Ok((_, believed)) = t0.condition_on(agent, v.components()) else {
                    continue;
                };
                views.push(AgentView {
                    record: Some(v.label().to_string()),
                    knowledge: KnowledgeModel {
                        agent: agent.to_string(),
                        believed_state: believed,
                        known_future_steps: later.iter().filter(forecastable).cloned().collect(),
                        target: PredictionTarget {
                            subsystem: target.clone(),
                            basis: basis.clone(),
                            time: later.len(),
                        },
                        record_basis: Some(record_basis.clone()),
                    },
                    actual_steps: later.to_vec(),
                });
            }
            Ok(views)
        }
        None => {
            let target = steps
                .iter()
                .rev()
                .find_map(|s| match s {
                    Step::Report { targets } => targets.first().cloned(),
                    _ => None,
                })
                .ok_or_else(|| {
                    Error::InvalidProtocol(format!(
                        "agent `{agent}` never measures and no report names a prediction target"
                    ))
                })?;
            let prepared = steps.iter().take_while(|s| s.kind() == StepKind::Prepare).count();
            let prefix = Protocol::new(
                protocol.layout().clone(),
                protocol.bases().to_vec(),
                steps[..prepared].to_vec(),
            )?;
            let believed = crate::scenarios::run_protocol(&prefix, None)?.final_state().clone();
            let record = measurement::born(&believed, agent, &record_basis)?
                .certain_outcome(CERTAINTY_TOLERANCE)
                .map(str::to_string);
            let later = &steps[prepared..];
            Ok(vec![AgentView {
                record,
                knowledge: KnowledgeModel {
                    agent: agent.to_string(),
                    believed_state: believed,
                    known_future_steps: later.iter().filter(forecastable).cloned().collect(),
                    target: PredictionTarget {
                        subsystem: target.0,
                        basis: target.1,
                        time: later.len(),
                    },
                    record_basis: Some(record_basis),
                },
                actual_steps: later.to_vec(),
            }])
        }
    }
}

/// Distribution of the view's target at the end of `actual`, conditioned on
/// the agent holding the view's record.
///
/// Collapse steps in `actual` are sampled with `seed`.
pub fn actual_outcomes(actual: &Protocol, view: &AgentView, seed: Option<u64>) -> Result<OutcomeDistribution> {
    let knowledge = &view.knowledge;
    let final_state = crate::scenarios::run_protocol(actual, seed)?.final_state().clone();
    let basis = actual.basis(knowledge.target.basis.name()).ok_or_else(|| {
        Error::TargetMismatch(format!(
            "basis `{}` is not declared in the actual protocol",
            knowledge.target.basis.name()
        ))
    })?;
    match &view.record {
        Some(record) => {
            let record_basis = actual.record_basis(&knowledge.agent)?;
            measurement::conditional_born(
                &final_state,
                &knowledge.agent,
                &record_basis,
                record,
                &knowledge.target.subsystem,
                basis,
            )
        }
        None => measurement::born(&final_state, &knowledge.target.subsystem, basis),
    }
}

/// Steps of `actual` in the agent's prediction interval: everything after
/// the agent's first recorded measurement, or every evolving step when it
/// never measures.
pub fn interval_steps(actual: &Protocol, agent: &str) -> Vec<Step> {
    let steps = actual.steps();
    let start = steps
        .iter()
        .position(|s| matches!(s, Step::Premeasure { observer, .. } if observer.subsystem() == agent))
        .map(|i| i + 1)
        .unwrap_or_else(|| steps.iter().take_while(|s| s.kind() == StepKind::Prepare).count());
    steps[start..].to_vec()
}

/// One prediction checked against reality.
#[derive(Debug, Clone)]
pub struct Assessment {
    pub record: Option<String>,
    pub prediction: Prediction,
    pub actual: OutcomeDistribution,
    pub report: ValidationReport,
}

/// Predicts with the agent's knowledge taken from `knowledge` and checks the
/// result against `actual`. With `naive` the plain rule is used, otherwise
/// the catalytic condition is enforced on the actual interval. Both
/// protocols run with the same seed, so collapses shared by their histories
/// pick the same outcomes.
pub fn assess(
    knowledge: &Protocol,
    actual: &Protocol,
    agent: &str,
    naive: bool,
    seed: Option<u64>,
) -> Result<Vec<Assessment>> {
    let interval = interval_steps(actual, agent);
    views_from_protocol(knowledge, agent, seed)?
        .into_iter()
        .map(|view| {
            let prediction = if naive {
                predict_q(&view.knowledge)?
            } else {
                predict_q_star(&view.knowledge, &interval)?
            };
            let realized = actual_outcomes(actual, &view, seed)?;
            let report = validate(&prediction, &realized)?;
            Ok(Assessment {
                record: view.record,
                prediction,
                actual: realized,
                report,
            })
        })
        .collect()
}
