use std::path::Path;

use serde_json::{json, Value};

use qobserver::dsl::{self, ParseError};
use qobserver::feasibility::{
    cat_measurement_dephasing, exchange_operator, interaction_hamiltonian, needle_evolution, parity_checks,
    project_exchange_eigenspace, taylor_sweep, MacroAgent, NeedleModel, ParityModel,
};
use qobserver::prediction::assess;
use qobserver::rng::derive_seed;
use qobserver::scenarios::{bundled_source, run_protocol, Protocol, Step, Trace};
use qobserver::{CMatrix, Complex64, Error, StateVector};

use crate::render::{self, fixed, number, sci, Tally};
use crate::{
    AgentState, Cli, Command, DephasingArgs, Feasibility, NeedleArgs, Outcome, OutputFormat, ParityArgs, EXIT_INVALID,
    EXIT_USAGE,
};

/// Largest joint dimension for which `needle` also builds the dense oracle.
const DENSE_ORACLE_LIMIT: usize = 512;

enum Failure {
    Usage(String),
    Invalid(String),
}

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        match e {
            Error::MissingSeed => Failure::Usage(format!("{e}; pass --seed")),
            other => Failure::Invalid(format!("error: {other}")),
        }
    }
}

type Res<T> = std::result::Result<T, Failure>;

pub fn execute(cli: &Cli) -> Outcome {
    let result = match &cli.command {
        Command::Run { file, shots } => run_file(cli, file, *shots),
        Command::Scenario { name } => {
            let source = bundled_source(name.as_str()).expect("every scenario name is bundled");
            parse(source, Path::new(&format!("{}.qwp", name.as_str()))).and_then(|p| emit_run(cli, &p, None))
        }
        Command::Predict {
            file,
            agent,
            naive,
            actual,
        } => predict(cli, file, agent, *naive, actual.as_deref()),
        Command::Feasibility(Feasibility::Parity(args)) => parity(cli, args),
        Command::Feasibility(Feasibility::Needle(args)) => needle(cli, args),
        Command::Feasibility(Feasibility::Dephasing(args)) => dephasing(cli, args),
    };
    match result {
        Ok(text) => Outcome::ok(text),
        Err(Failure::Usage(msg)) => Outcome::fail(EXIT_USAGE, format!("usage error: {msg}\n")),
        Err(Failure::Invalid(msg)) => Outcome::fail(EXIT_INVALID, ensure_newline(msg)),
    }
}

fn ensure_newline(mut s: String) -> String {
    if !s.ends_with('\n') {
        s.push('\n');
    }
    s
}

fn read(path: &Path) -> Res<String> {
    std::fs::read_to_string(path).map_err(|e| Failure::Usage(format!("cannot read {}: {e}", path.display())))
}

fn parse(text: &str, path: &Path) -> Res<Protocol> {
    dsl::parse(text).map_err(|errors: Vec<ParseError>| {
        Failure::Invalid(errors.iter().map(|e| format!("{}:{e}\n", path.display())).collect())
    })
}

fn load(path: &Path) -> Res<Protocol> {
    parse(&read(path)?, path)
}

fn require_seed(cli: &Cli, protocol: &Protocol) -> Res<Option<u64>> {
    match cli.seed {
        None if protocol.has_collapse() => Err(Failure::Usage(
            "the protocol contains collapse steps; pass --seed".into(),
        )),
        seed => Ok(seed),
    }
}

fn run_file(cli: &Cli, file: &Path, shots: Option<usize>) -> Res<String> {
    let protocol = load(file)?;
    let samples = match shots {
        None => None,
        Some(0) => return Err(Failure::Usage("--shots must be positive".into())),
        Some(n) => {
            let seed = cli
                .seed
                .ok_or_else(|| Failure::Usage("--shots needs --seed".into()))?;
            Some((seed, n, tally(&protocol, seed, n)?))
        }
    };
    emit_run(cli, &protocol, samples)
}

/// Runs the protocol `shots` times, shot `k` seeded with
/// `derive_seed(seed, k)`, and counts every collapse outcome.
fn tally(protocol: &Protocol, seed: u64, shots: usize) -> Res<Vec<Tally>> {
    let mut tallies: Vec<Tally> = protocol
        .steps()
        .iter()
        .enumerate()
        .filter_map(|(k, s)| match s {
            Step::Collapse { basis, .. } => {
                Some((k, s.to_string(), basis.labels().map(|l| (l.to_string(), 0)).collect()))
            }
            _ => None,
        })
        .collect();
    for shot in 0..shots {
        let trace = run_protocol(protocol, Some(derive_seed(seed, shot as u64)))?;
        for (index, _, counts) in &mut tallies {
            // record 0 is the initial state
            let label = trace.records[*index + 1].outcome.as_deref().expect("collapse records its outcome");
            if let Some(entry) = counts.iter_mut().find(|(l, _)| l == label) {
                entry.1 += 1;
            }
        }
    }
    Ok(tallies)
}

fn emit_run(cli: &Cli, protocol: &Protocol, samples: Option<(u64, usize, Vec<Tally>)>) -> Res<String> {
    let seed = require_seed(cli, protocol)?;
    let trace = run_protocol(protocol, seed)?;
    Ok(emit_trace(cli, protocol, &trace, vec![], samples))
}

fn emit_trace(
    cli: &Cli,
    protocol: &Protocol,
    trace: &Trace,
    predictions: Vec<(Value, String)>,
    samples: Option<(u64, usize, Vec<Tally>)>,
) -> String {
    let precision = cli.precision;
    match cli.output {
        OutputFormat::Json => {
            let samples = samples.as_ref().map(|(s, n, t)| (*s, *n, t.as_slice()));
            let doc = render::document(
                protocol.layout(),
                trace,
                predictions.into_iter().map(|(v, _)| v).collect(),
                samples,
                precision,
            );
            render::pretty(&doc)
        }
        OutputFormat::Table => {
            let mut out = render::trace_table(protocol.layout(), trace, precision);
            if let Some((seed, shots, tallies)) = &samples {
                out.push_str(&render::samples_table(*seed, *shots, tallies, precision));
            }
            for (_, text) in predictions {
                out.push_str(&text);
            }
            out
        }
    }
}

fn predict(cli: &Cli, file: &Path, agent: &str, naive: bool, actual: Option<&Path>) -> Res<String> {
    let knowledge = load(file)?;
    let actual = match actual {
        Some(path) => load(path)?,
        None => knowledge.clone(),
    };
    let seed = match require_seed(cli, &knowledge)? {
        Some(s) => Some(s),
        None => require_seed(cli, &actual)?,
    };
    let assessments = assess(&knowledge, &actual, agent, naive, seed)?;
    let trace = run_protocol(&actual, seed)?;
    let predictions = assessments
        .iter()
        .map(|a| {
            (
                render::prediction_json(agent, a, cli.precision),
                render::prediction_table(agent, a, cli.precision),
            )
        })
        .collect();
    Ok(emit_trace(cli, &actual, &trace, predictions, None))
}

fn invalid_parameter(e: Error) -> Failure {
    match e {
        Error::InvalidParameter(msg) => Failure::Usage(msg),
        other => other.into(),
    }
}

fn parity(cli: &Cli, args: &ParityArgs) -> Res<String> {
    let model = match args.basis_scale {
        Some(s) => ParityModel::with_basis_scale(args.truncation, args.a, s),
        None => ParityModel::new(args.truncation, args.a),
    }
    .map_err(invalid_parameter)?;
    let checks = parity_checks(&model);
    let sweep = taylor_sweep(&model, args.orders.iter().copied());
    let prec = cli.precision;
    match cli.output {
        OutputFormat::Json => Ok(render::pretty(&json!({
            "analysis": "parity",
            "parameters": {
                "truncation": args.truncation,
                "a": args.a,
                "basis_scale": args.basis_scale.unwrap_or(args.a),
            },
            "checks": {
                "hermitian_defect": number(checks.hermitian_defect, prec),
                "unitarity_defect": number(checks.unitarity_defect, prec),
                "square_defect": number(checks.square_defect, prec),
                "alternation_defect": number(checks.alternation_defect, prec),
                "anticommutator_x": number(checks.anticommutator_x, prec),
                "anticommutator_p": number(checks.anticommutator_p, prec),
            },
            "taylor": sweep.iter().map(|t| json!({
                "order": t.order,
                "unitarity_defect": number(t.unitarity_defect, prec),
                "distance_to_exact": number(t.distance_to_exact, prec),
            })).collect::<Vec<_>>(),
        }))),
        OutputFormat::Table => {
            let mut out = format!(
                "parity N={} a={} basis_scale={}\n",
                args.truncation,
                args.a,
                args.basis_scale.unwrap_or(args.a)
            );
            for (name, value) in [
                ("hermitian defect", checks.hermitian_defect),
                ("unitarity defect", checks.unitarity_defect),
                ("square defect", checks.square_defect),
                ("alternation defect", checks.alternation_defect),
                ("|{P,x}| lower block", checks.anticommutator_x),
                ("|{P,p}| lower block", checks.anticommutator_p),
            ] {
                out.push_str(&format!("  {name:<22} {}\n", sci(value, prec)));
            }
            out.push_str("  order  unitarity defect  distance to exact\n");
            for t in &sweep {
                out.push_str(&format!(
                    "  {:>5}  {:>16}  {:>17}\n",
                    t.order,
                    sci(t.unitarity_defect, prec),
                    sci(t.distance_to_exact, prec)
                ));
            }
            Ok(out)
        }
    }
}

fn needle(cli: &Cli, args: &NeedleArgs) -> Res<String> {
    let agent = MacroAgent::new(args.qubits).map_err(invalid_parameter)?;
    let model = NeedleModel::new(args.lattice, args.spacing, args.coupling, args.duration).map_err(invalid_parameter)?;
    let shift = model.shift_sites().map_err(invalid_parameter)?;
    let agent_state = match args.state {
        AgentState::U => agent.macro_u(),
        AgentState::D => agent.macro_d(),
        AgentState::Plus => agent.cat_plus(),
        AgentState::Minus => agent.cat_minus(),
    };
    let psi = model.joint_state(&agent, &agent_state, &model.localized(0))?;
    let out_state = needle_evolution(&model, &agent, &psi)?;
    let exchange = |s: &StateVector| {
        let weight = |sign: f64| {
            project_exchange_eigenspace(&agent, args.lattice, s.amplitudes(), sign)
                .iter()
                .map(|a| a.norm_sqr())
                .sum::<f64>()
        };
        weight(1.0) - weight(-1.0)
    };
    let oracle_diff = (agent.dim() * args.lattice <= DENSE_ORACLE_LIMIT).then(|| {
        let u: CMatrix = (interaction_hamiltonian(&model, &agent) * Complex64::new(0.0, -args.duration)).exp();
        let dense = u * nalgebra_column(psi.amplitudes());
        dense
            .iter()
            .zip(out_state.amplitudes())
            .map(|(a, b)| (a - b).norm())
            .fold(0.0, f64::max)
    });
    // needle position distribution: marginal over the agent
    let mut positions = vec![0.0; args.lattice];
    for (i, a) in out_state.amplitudes().iter().enumerate() {
        positions[i % args.lattice] += a.norm_sqr();
    }
    let half = (args.lattice / 2) as i64;
    let occupied: Vec<(i64, f64)> = positions
        .iter()
        .enumerate()
        .filter(|(_, p)| **p > 1e-12)
        .map(|(site, p)| {
            let site = site as i64;
            (if site >= half { site - args.lattice as i64 } else { site }, *p)
        })
        .collect();
    let prec = cli.precision;
    let (before, after) = (exchange(&psi), exchange(&out_state));
    match cli.output {
        OutputFormat::Json => Ok(render::pretty(&json!({
            "analysis": "needle",
            "parameters": {
                "qubits": args.qubits,
                "lattice": args.lattice,
                "spacing": args.spacing,
                "coupling": args.coupling,
                "duration": args.duration,
                "state": format!("{:?}", args.state).to_lowercase(),
            },
            "shift_sites": shift,
            "exchange_expectation": { "before": number(before, prec), "after": number(after, prec) },
            "needle_positions": occupied.iter().map(|(s, p)| json!({ "site": s, "p": number(*p, prec) })).collect::<Vec<_>>(),
            "dense_oracle_max_diff": oracle_diff.map(|d| number(d, prec)),
            "exchange_involution_defects": exchange_operator(&agent).square_defects(),
        }))),
        OutputFormat::Table => {
            let mut out = format!(
                "needle n={} L={} s={} lambda={} t={} state={:?}\n  shift {shift} sites\n",
                args.qubits, args.lattice, args.spacing, args.coupling, args.duration, args.state
            );
            out.push_str(&format!(
                "  <Pi> before {}  after {}\n",
                fixed(before, prec),
                fixed(after, prec)
            ));
            out.push_str("  site  probability\n");
            for (s, p) in &occupied {
                out.push_str(&format!("  {s:>4}  {}\n", fixed(*p, prec)));
            }
            match oracle_diff {
                Some(d) => out.push_str(&format!("  dense oracle max diff {}\n", sci(d, prec))),
                None => out.push_str("  dense oracle skipped (dimension too large)\n"),
            }
            Ok(out)
        }
    }
}

fn nalgebra_column(v: &[Complex64]) -> CMatrix {
    CMatrix::from_column_slice(v.len(), 1, v)
}

fn dephasing(cli: &Cli, args: &DephasingArgs) -> Res<String> {
    let seed = cli
        .seed
        .ok_or_else(|| Failure::Usage("dephasing is a Monte-Carlo analysis; pass --seed".into()))?;
    let reports = args
        .qubits
        .iter()
        .map(|&n| cat_measurement_dephasing(n, args.p, args.trials, seed).map_err(invalid_parameter))
        .collect::<Res<Vec<_>>>()?;
    let prec = cli.precision;
    match cli.output {
        OutputFormat::Json => Ok(render::pretty(&json!({
            "analysis": "dephasing",
            "parameters": { "p": args.p, "trials": args.trials, "seed": seed },
            "agents": reports.iter().map(|r| json!({
                "qubits": r.qubits,
                "counts": { "Y": r.counts[0], "N": r.counts[1], "other": r.counts[2] },
                "frequencies": r.frequencies.map(|f| number(f, prec)),
                "expected": r.expected.map(|f| number(f, prec)),
                "deviation": number(r.deviation, prec),
                "expected_deviation": number(r.expected_deviation, prec),
                "deviation_std_error": number(r.deviation_std_error, prec),
                "coherence": number(r.coherence, prec),
                "expected_coherence": number(r.expected_coherence, prec),
            })).collect::<Vec<_>>(),
        }))),
        OutputFormat::Table => {
            let mut out = format!("dephasing p={} trials={} seed={seed}\n", args.p, args.trials);
            out.push_str("  n  P(Y)  P(N)  P(other)  deviation  expected  std error  coherence  expected\n");
            for r in &reports {
                out.push_str(&format!(
                    "  {}  {}  {}  {}  {}  {}  {}  {}  {}\n",
                    r.qubits,
                    fixed(r.frequencies[0], prec),
                    fixed(r.frequencies[1], prec),
                    fixed(r.frequencies[2], prec),
                    fixed(r.deviation, prec),
                    fixed(r.expected_deviation, prec),
                    fixed(r.deviation_std_error, prec),
                    fixed(r.coherence, prec),
                    fixed(r.expected_coherence, prec),
                ));
            }
            Ok(out)
        }
    }
}
