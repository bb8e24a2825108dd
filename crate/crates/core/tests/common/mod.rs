//! Random protocol generation shared by the property tests and the
//! acceptance suite.
#![allow(dead_code)]

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use qobserver::measurement::{born, ObserverRegister, OutcomeDistribution};
use qobserver::prediction::{KnowledgeModel, PredictionTarget};
use qobserver::scenarios::{run_protocol, Protocol, Step};
use qobserver::{Basis, CMatrix, Complex64, SystemLayout};

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

fn gaussian(rng: &mut ChaCha8Rng) -> f64 {
    // Box-Muller
    let u: f64 = rng.random::<f64>().max(1e-300);
    let v: f64 = rng.random();
    (-2.0 * u.ln()).sqrt() * (2.0 * std::f64::consts::PI * v).cos()
}

pub fn random_vector(rng: &mut ChaCha8Rng, dim: usize) -> Vec<Complex64> {
    let v: Vec<Complex64> = (0..dim).map(|_| Complex64::new(gaussian(rng), gaussian(rng))).collect();
    let n = v.iter().map(|a| a.norm_sqr()).sum::<f64>().sqrt();
    v.into_iter().map(|a| a / n).collect()
}

/// Random unitary: the Q factor of a complex Gaussian matrix.
pub fn random_unitary(rng: &mut ChaCha8Rng, dim: usize) -> CMatrix {
    let m = CMatrix::from_fn(dim, dim, |_, _| Complex64::new(gaussian(rng), gaussian(rng)));
    m.qr().q()
}

pub fn random_basis(rng: &mut ChaCha8Rng, name: &str, subsystem: &str, dim: usize) -> Basis {
    let u = random_unitary(rng, dim);
    let vectors = (0..dim)
        .map(|j| (format!("{name}{j}"), u.column(j).iter().copied().collect()))
        .collect();
    Basis::new(name, subsystem, vectors).expect("QR columns are orthonormal")
}

/// A random protocol split at `t₀`: steps `..split` happen before, the rest
/// form the prediction interval.
pub struct RandomCase {
    pub protocol: Protocol,
    pub agent: String,
    pub split: usize,
    pub target: (String, Basis),
    pub seed: u64,
}

/// Builds a protocol on 3–4 subsystems. Subsystems are systems (prepared in
/// random states) or observers (left ready until they record once).
/// Catalytic measurements never target `agent` unless `catalytic_on_agent`;
/// collapses only happen before `t₀`.
pub fn random_case(rng: &mut ChaCha8Rng, catalytic_on_agent: bool) -> RandomCase {
    let n = rng.random_range(3..=4);
    let dims: Vec<usize> = (0..n).map(|_| rng.random_range(2..=3)).collect();
    let names: Vec<String> = (0..n).map(|i| format!("q{i}")).collect();
    let layout = SystemLayout::new(names.iter().cloned().zip(dims.iter().copied())).unwrap();

    let mut bases = Vec::new();
    for i in 0..n {
        let labels: Vec<String> = (0..dims[i]).map(|k| format!("r{k}")).collect();
        bases.push(Basis::computational(format!("rec{i}"), &names[i], &labels).unwrap());
    }
    for i in 0..n {
        bases.push(random_basis(rng, &format!("f{i}_"), &names[i], dims[i]));
    }
    let rec = |i: usize| bases[i].clone();
    let free = |i: usize| bases[n + i].clone();

    let system_count = rng.random_range(1..n);
    let mut order: Vec<usize> = (0..n).collect();
    for k in (1..n).rev() {
        order.swap(k, rng.random_range(0..=k));
    }
    let systems: Vec<usize> = order[..system_count].to_vec();
    let mut fresh: Vec<usize> = order[system_count..].to_vec();
    let agent = rng.random_range(0..n);

    let mut steps = Vec::new();
    for &s in &systems {
        steps.push(Step::Prepare {
            subsystem: names[s].clone(),
            vector: random_vector(rng, dims[s]),
            label: None,
        });
    }
    let prepared = steps.len();
    let mut touched: Vec<usize> = systems.clone();
    let len = rng.random_range(1..=5);
    let split_at = rng.random_range(0..=len);
    let mut split = prepared;
    for k in 0..len {
        if k == split_at {
            split = steps.len();
        }
        let before_t0 = k < split_at;
        let choice = rng.random_range(0..10);
        if choice < 2 && before_t0 {
            let t = touched[rng.random_range(0..touched.len())];
            let basis = if rng.random_bool(0.5) { rec(t) } else { free(t) };
            steps.push(Step::Collapse {
                target: names[t].clone(),
                basis,
            });
            continue;
        }
        let candidates: Vec<usize> = fresh.clone();
        let t = touched[rng.random_range(0..touched.len())];
        let usable: Vec<usize> = candidates.into_iter().filter(|&o| o != t && dims[o] >= dims[t]).collect();
        if usable.is_empty() {
            continue;
        }
        let o = usable[rng.random_range(0..usable.len())];
        fresh.retain(|&x| x != o);
        let catalytic = choice >= 7 && (t != agent || catalytic_on_agent);
        let basis = if catalytic || rng.random_bool(0.5) { free(t) } else { rec(t) };
        // the agent is never disturbed except by catalytic steps
        let basis = if t == agent && !catalytic { rec(t) } else { basis };
        let observer = ObserverRegister::standard(rec(o), dims[t]).unwrap();
        steps.push(if catalytic {
            Step::CatalyticPremeasure {
                agent: names[t].clone(),
                basis,
                observer,
            }
        } else {
            Step::Premeasure {
                target: names[t].clone(),
                basis,
                observer,
            }
        });
        touched.push(o);
    }
    if split_at == len {
        split = steps.len();
    }
    let t = rng.random_range(0..n);
    let target_basis = if rng.random_bool(0.5) { rec(t) } else { free(t) };
    let protocol = Protocol::new(layout, bases, steps).expect("generated protocols are valid");
    RandomCase {
        protocol,
        agent: names[agent].clone(),
        split,
        target: (names[t].clone(), target_basis),
        seed: rng.random(),
    }
}

/// Knowledge equal to the truth at `t₀`, the interval steps, and the actual
/// Born distribution of the target at the end.
pub fn complete_knowledge(
    case: &RandomCase,
) -> (KnowledgeModel, Vec<Step>, OutcomeDistribution) {
    let p = &case.protocol;
    let prefix = Protocol::new(p.layout().clone(), p.bases().to_vec(), p.steps()[..case.split].to_vec()).unwrap();
    let believed = run_protocol(&prefix, Some(case.seed)).unwrap().final_state().clone();
    let final_state = run_protocol(p, Some(case.seed)).unwrap().final_state().clone();
    let interval: Vec<Step> = p.steps()[case.split..].to_vec();
    let knowledge = KnowledgeModel {
        agent: case.agent.clone(),
        believed_state: believed,
        known_future_steps: interval.clone(),
        target: PredictionTarget {
            subsystem: case.target.0.clone(),
            basis: case.target.1.clone(),
            time: interval.len(),
        },
        record_basis: Some(p.record_basis(&case.agent).unwrap()),
    };
    let actual = born(&final_state, &case.target.0, &case.target.1).unwrap();
    (knowledge, interval, actual)
}

const NAMES: &[&str] = &["S", "A", "B", "needle", "Spin_2", "w"];

fn hadamard(name: &str, subsystem: &str) -> Basis {
    let h = std::f64::consts::FRAC_1_SQRT_2;
    let c = |x: f64| Complex64::new(x, 0.0);
    Basis::new(
        name,
        subsystem,
        vec![
            (format!("{name}_p"), vec![c(h), c(h)]),
            (format!("{name}_m"), vec![c(h), c(-h)]),
        ],
    )
    .unwrap()
}

/// A valid protocol covering every statement kind, with labels unique across
/// bases so a labeled preparation always resolves to its own basis.
pub fn random_protocol(rng: &mut ChaCha8Rng) -> Protocol {
    let n = rng.random_range(1..=4);
    let dims: Vec<usize> = (0..n).map(|_| rng.random_range(2..=4)).collect();
    let names: Vec<String> = NAMES[..n].iter().map(|s| s.to_string()).collect();
    let layout = SystemLayout::new(names.iter().cloned().zip(dims.iter().copied())).unwrap();

    let mut bases: Vec<Basis> = Vec::new();
    for (i, name) in names.iter().enumerate() {
        for _ in 0..rng.random_range(0..=2) {
            let bname = format!("b{}", bases.len());
            let basis = match rng.random_range(0..3) {
                0 if dims[i] == 2 => hadamard(&bname, name),
                1 => {
                    let labels: Vec<String> = (0..dims[i]).map(|k| format!("{bname}_{k}")).collect();
                    Basis::computational(&bname, name, &labels).unwrap()
                }
                _ => random_basis(rng, &format!("{bname}_"), name, dims[i]),
            };
            // random_basis names the basis after its label prefix
            let basis = Basis::new(
                &bname,
                name,
                basis
                    .vectors()
                    .iter()
                    .map(|v| (v.label().to_string(), v.components().to_vec()))
                    .collect(),
            )
            .unwrap();
            bases.push(basis);
        }
    }
    let skeleton = Protocol::new(layout.clone(), bases.clone(), vec![]).unwrap();
    let on = |i: usize| -> Vec<&Basis> { bases.iter().filter(|b| b.subsystem() == names[i]).collect() };

    let mut steps = Vec::new();
    for i in 0..n {
        match rng.random_range(0..3) {
            0 => {}
            1 if !on(i).is_empty() => {
                let choices = on(i);
                let b = choices[rng.random_range(0..choices.len())];
                let v = &b.vectors()[rng.random_range(0..b.dim())];
                steps.push(Step::Prepare {
                    subsystem: names[i].clone(),
                    vector: v.components().to_vec(),
                    label: Some(v.label().to_string()),
                });
            }
            _ => steps.push(Step::Prepare {
                subsystem: names[i].clone(),
                vector: random_vector(rng, dims[i]),
                label: None,
            }),
        }
    }
    for _ in 0..rng.random_range(0..=6) {
        let t = rng.random_range(0..n);
        let choices = on(t);
        if choices.is_empty() {
            continue;
        }
        let basis = choices[rng.random_range(0..choices.len())].clone();
        let step = match rng.random_range(0..4) {
            0 => Step::Collapse {
                target: names[t].clone(),
                basis,
            },
            1 => {
                let targets = (0..n)
                    .filter(|&i| !on(i).is_empty() && rng.random_bool(0.6))
                    .map(|i| (names[i].clone(), on(i)[0].clone()))
                    .collect::<Vec<_>>();
                if targets.is_empty() {
                    continue;
                }
                Step::Report { targets }
            }
            kind => {
                let observers: Vec<usize> = (0..n).filter(|&o| o != t && dims[o] >= basis.dim()).collect();
                if observers.is_empty() {
                    continue;
                }
                let o = observers[rng.random_range(0..observers.len())];
                let observer = skeleton.observer(&names[o], basis.dim()).unwrap();
                let target = names[t].clone();
                if kind == 2 {
                    Step::Premeasure { target, basis, observer }
                } else {
                    Step::CatalyticPremeasure {
                        agent: target,
                        basis,
                        observer,
                    }
                }
            }
        };
        steps.push(step);
    }
    Protocol::new(layout, bases, steps).unwrap()
}
