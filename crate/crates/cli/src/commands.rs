//! Subcommand execution: fills defaults into the configuration, dispatches
//! to the core library and builds the output table.

use foelner_core::defect::commutator_norms;
use foelner_core::probe::{
    ambient_for_depth, classify, epsilon_curve_with, Budget, ClassifyParams, Objective, OptimizerExtender,
};
use foelner_core::schemes::{
    default_anchors, default_epsilons, greedy_proper_sequence, interval_sequence, tensor_sequence, ExtensionOracle,
    IntervalExtender, SequenceRecord, TrivialExtender,
};
use foelner_core::verify::{
    check_perturbation_bound, check_sum_projections, check_tensor_bound, check_trace_hs_equivalence, SuiteReport,
};
use foelner_core::{NormKind, Operator64, Projection, ProjectionDoc};
use serde_json::Value;

use crate::config::{
    Dims, ExtenderChoice, Format, NormChoice, ObjectiveChoice, ProjectionField, RunConfig, SchemeChoice, Subcommand,
    SuiteChoice,
};
use crate::output::{emit, num, opt_num, render, Table};
use crate::script::ScriptExtender;
use crate::Failure;

const SEQUENCE_COLUMNS: &[&str] = &["step", "rank", "hs_defect", "op_defect", "certified_bound", "scheme"];

pub fn run(mut cfg: RunConfig) -> Result<(), Failure> {
    cfg.seed.get_or_insert(0);
    if cfg.format.is_none() {
        let json = cfg.output.as_ref().and_then(|p| p.extension()).is_some_and(|e| e.eq_ignore_ascii_case("json"));
        cfg.format = Some(if json { Format::Json } else { Format::Csv });
    }
    let sub = RunConfig::require(cfg.subcommand, "subcommand")?;
    let (table, verdict) = match sub {
        Subcommand::Defect => (defect(&mut cfg)?, Ok(())),
        Subcommand::Sequence => sequence(&mut cfg)?,
        Subcommand::Probe => (probe(&mut cfg)?, Ok(())),
        Subcommand::Classify => (classify_cmd(&mut cfg)?, Ok(())),
        Subcommand::Verify => verify(&mut cfg)?,
    };
    let bytes = render(&table, &cfg, cfg.format.expect("set above"))?;
    emit(&bytes, &cfg)?;
    verdict
}

fn operators(cfg: &RunConfig) -> Result<Vec<Operator64>, Failure> {
    let docs = cfg.operator_docs()?;
    Ok(Operator64::from_docs(&docs)?)
}

fn single_operator(cfg: &RunConfig, what: &str) -> Result<Operator64, Failure> {
    let mut ops = operators(cfg)?;
    if ops.len() != 1 {
        return Err(Failure::validation(format!("{what} takes exactly one operator, got {}", ops.len())));
    }
    Ok(ops.remove(0))
}

fn defect(cfg: &mut RunConfig) -> Result<Table, Failure> {
    let ops = operators(cfg)?;
    let norm = *cfg.norm.get_or_insert(NormChoice::All);
    let sort = ops[0].sort();
    let p = match (&cfg.projection, cfg.rank) {
        (Some(_), Some(_)) => return Err(Failure::validation("give either a projection or a rank, not both")),
        (Some(ProjectionField::Inline(doc)), None) => doc.resolve::<f64>(&sort)?,
        (Some(ProjectionField::Path(p)), None) => crate::config::read_projection(p.as_ref())?.resolve::<f64>(&sort)?,
        (None, Some(r)) => Projection::interval(&sort, r)?,
        (None, None) => return Err(Failure::validation("defect needs --projection FILE or --rank N")),
    };
    cfg.projection = Some(ProjectionField::Inline(ProjectionDoc::from_projection(&p)));
    cfg.rank = None;
    let kinds: &[NormKind] = match norm {
        NormChoice::Hs => &[NormKind::Hs],
        NormChoice::Trace => &[NormKind::Trace],
        NormChoice::Op => &[NormKind::Op],
        NormChoice::All => &[NormKind::Hs, NormKind::Trace, NormKind::Op],
    };
    let mut table = Table::new(&["operator", "rank", "norm", "value", "error_bound", "exact", "ambient_size"]);
    for (k, op) in ops.iter().enumerate() {
        let norms = commutator_norms(op, &p)?;
        for &kind in kinds {
            let rep = norms.report(kind);
            let name = serde_json::to_value(kind).expect("serializable");
            table.push(vec![
                k.into(),
                rep.rank.into(),
                name,
                num(rep.value),
                num(rep.error_bound),
                rep.exact.into(),
                rep.ambient_size.into(),
            ]);
        }
    }
    Ok(table)
}

fn sequence_table(records: &[SequenceRecord<f64>]) -> Table {
    let mut table = Table::new(SEQUENCE_COLUMNS);
    for r in records {
        table.push(vec![
            r.step.into(),
            r.rank.into(),
            num(r.hs_defect),
            opt_num(r.op_defect),
            opt_num(r.certified_bound),
            Value::String(r.scheme.to_string()),
        ]);
    }
    table
}

fn sequence(cfg: &mut RunConfig) -> Result<(Table, Result<(), Failure>), Failure> {
    let scheme = *cfg.scheme.get_or_insert(SchemeChoice::Interval);
    match scheme {
        SchemeChoice::Interval | SchemeChoice::Tensor => {
            let op = single_operator(cfg, "the interval and tensor schemes")?;
            let ranks = cfg.ranks.clone().ok_or_else(|| Failure::validation("missing required parameter `ranks`"))?.0;
            let records = match (scheme, &op) {
                (SchemeChoice::Tensor, Operator64::Tensor(a, b)) => {
                    let left = interval_sequence(a, &ranks)?;
                    let right = interval_sequence(b, &ranks)?;
                    tensor_sequence(&op, &left, &right)
                }
                (SchemeChoice::Tensor, _) => {
                    return Err(Failure::validation("the tensor scheme needs a tensor product operator"))
                }
                _ => interval_sequence(&op, &ranks),
            };
            match records {
                Ok(records) => Ok((sequence_table(&records), Ok(()))),
                Err(e @ foelner_core::Error::CertificateViolation { .. }) => {
                    Ok((sequence_table(&[]), Err(Failure::violation(e.to_string()))))
                }
                Err(e) => Err(e.into()),
            }
        }
        SchemeChoice::Greedy => {
            let ops = operators(cfg)?;
            let steps = *cfg.steps.get_or_insert(6);
            if steps == 0 {
                return Err(Failure::validation("steps must be positive"));
            }
            let choice = *cfg.extender.get_or_insert(ExtenderChoice::Interval);
            let extender: Box<dyn ExtensionOracle<f64>> = match choice {
                ExtenderChoice::Interval => Box::new(IntervalExtender::default()),
                ExtenderChoice::Optimizer => Box::new(OptimizerExtender::default()),
                ExtenderChoice::Trivial => Box::new(TrivialExtender),
                ExtenderChoice::Script => {
                    let command = cfg
                        .extender_cmd
                        .clone()
                        .ok_or_else(|| Failure::validation("--extender script needs --extender-cmd"))?;
                    Box::new(ScriptExtender { command, docs: cfg.operator_docs()? })
                }
            };
            let eps = default_epsilons::<f64>(steps);
            let anchors = default_anchors::<f64>(&ops[0].sort(), steps)?;
            let outcome = greedy_proper_sequence(&ops, extender.as_ref(), &eps, &anchors)?;
            for r in &outcome.records {
                eprintln!("greedy step {}: rank {}, φ = {:.6e} < ε = {:.6e}", r.step, r.rank, r.hs_defect, r.certified_bound.unwrap_or(f64::NAN));
            }
            let verdict = match outcome.failure {
                None => Ok(()),
                Some(f) => Err(Failure::violation(format!("greedy construction stopped at step {} (ε = {}): {}", f.step, f.epsilon, f.reason))),
            };
            Ok((sequence_table(&outcome.records), verdict))
        }
    }
}

fn window_size(cfg: &mut RunConfig, ops: &[Operator64], default: Option<usize>) -> Result<usize, Failure> {
    match (cfg.ambient, cfg.ambient_depth) {
        (Some(_), Some(_)) => Err(Failure::validation("give either --ambient or --ambient-depth, not both")),
        (Some(a), None) => Ok(a),
        (None, Some(depth)) => {
            let a = ambient_for_depth(&ops[0].sort(), depth)?;
            Ok(a)
        }
        (None, None) => match default {
            Some(a) => {
                cfg.ambient = Some(a);
                Ok(a)
            }
            None => Err(Failure::validation("missing required parameter `ambient` (or `ambient_depth`)")),
        },
    }
}

fn budget(cfg: &mut RunConfig) -> Budget {
    let d = Budget::default();
    Budget { restarts: *cfg.restarts.get_or_insert(d.restarts), iters: *cfg.iters.get_or_insert(d.iters) }
}

fn probe(cfg: &mut RunConfig) -> Result<Table, Failure> {
    let ops = operators(cfg)?;
    let ranks = cfg.ranks.clone().ok_or_else(|| Failure::validation("missing required parameter `ranks`"))?.0;
    let ambient = window_size(cfg, &ops, None)?;
    let budget = budget(cfg);
    let objective = match *cfg.objective.get_or_insert(ObjectiveChoice::Max) {
        ObjectiveChoice::Max => Objective::Max,
        ObjectiveChoice::SumSquares => Objective::SumSquares,
    };
    let seed = cfg.seed.expect("defaulted");
    eprintln!("probe: {} rank(s) in an ambient window of {ambient}, {} restarts", ranks.len(), budget.restarts);
    let curve = epsilon_curve_with(&ops, &ranks, ambient, budget, seed, objective)?;
    let mut table = Table::new(&["rank", "best_value", "restarts", "converged", "seed"]);
    for r in &curve.results {
        table.push(vec![r.rank.into(), num(r.best_value), r.restarts.into(), r.converged.into(), r.seed.into()]);
    }
    Ok(table)
}

fn classify_cmd(cfg: &mut RunConfig) -> Result<Table, Failure> {
    let ops = operators(cfg)?;
    let ambient = window_size(cfg, &ops, Some(256))?;
    let max_rank = *cfg.max_rank.get_or_insert(16);
    let tol = *cfg.tol.get_or_insert(1e-8);
    let budget = budget(cfg);
    let params = ClassifyParams { max_rank, ambient, tol, budget, seed: cfg.seed.expect("defaulted") };
    let report = classify(&ops, &params)?;
    eprintln!("classify: {} ({})", report.cell, report.evidence);
    eprintln!("caveat: {}", report.caveat);
    let mut table = Table::new(&["cell", "ell_estimate", "rank", "epsilon"]);
    let cell = Value::String(report.cell.to_string());
    if report.epsilon_curve.is_empty() {
        table.push(vec![cell.clone(), report.ell_estimate.into(), Value::Null, Value::Null]);
    }
    for (r, eps) in &report.epsilon_curve {
        table.push(vec![cell.clone(), report.ell_estimate.into(), (*r).into(), num(*eps)]);
    }
    table.extra.insert("evidence".into(), Value::String(report.evidence));
    table.extra.insert("caveat".into(), Value::String(report.caveat.into()));
    Ok(table)
}

fn verify(cfg: &mut RunConfig) -> Result<(Table, Result<(), Failure>), Failure> {
    let suite = *cfg.suite.get_or_insert(SuiteChoice::All);
    let seed = cfg.seed.expect("defaulted");
    // a single suite records its defaults in the resolved config; `all`
    // keeps per-suite defaults unless overridden
    match suite {
        SuiteChoice::Perturbation => {
            cfg.trials.get_or_insert(1000);
            cfg.dim.get_or_insert(24);
        }
        SuiteChoice::SumProjections => {
            cfg.trials.get_or_insert(500);
            cfg.dim.get_or_insert(32);
        }
        SuiteChoice::Tensor => {
            cfg.trials.get_or_insert(500);
        }
        SuiteChoice::TraceHs | SuiteChoice::All => {}
    }
    let trials = cfg.trials;
    let mut reports: Vec<SuiteReport> = Vec::new();
    let wants = |s: SuiteChoice| suite == s || suite == SuiteChoice::All;
    if wants(SuiteChoice::Perturbation) {
        let dim = cfg.dim.unwrap_or(24);
        reports.push(check_perturbation_bound::<f64>(trials.unwrap_or(1000), dim, seed)?);
    }
    if wants(SuiteChoice::SumProjections) {
        let dim = cfg.dim.unwrap_or(32);
        let s = *cfg.s.get_or_insert(2);
        reports.push(check_sum_projections::<f64>(trials.unwrap_or(500), dim, s, seed)?);
    }
    if wants(SuiteChoice::Tensor) {
        let Dims(a, b) = *cfg.dims.get_or_insert(Dims(8, 8));
        reports.push(check_tensor_bound::<f64>(trials.unwrap_or(500), (a, b), seed)?);
    }
    let trace_requested = suite == SuiteChoice::TraceHs || (suite == SuiteChoice::All && cfg.operators.is_some());
    if trace_requested {
        let op = single_operator(cfg, "the trace_hs suite")?;
        let ranks = cfg.ranks.clone().ok_or_else(|| Failure::validation("the trace_hs suite needs `ranks`"))?.0;
        let (report, rows) = check_trace_hs_equivalence(&op, &ranks)?;
        for row in rows {
            eprintln!("trace_hs: rank {} φ = {:.6e} φ₁ = {:.6e}", row.rank, row.hs, row.trace);
        }
        reports.push(report);
    }
    let mut table = Table::new(&["suite", "trials", "violations", "worst_margin", "seed", "passed"]);
    let mut failed = Vec::new();
    for r in &reports {
        eprintln!("{}: {} trials, {} violations, worst margin {:.3e}", r.suite, r.trials, r.violations, r.worst_margin);
        if !r.passed() {
            failed.push(r.suite.clone());
        }
        table.push(vec![
            Value::String(r.suite.clone()),
            r.trials.into(),
            r.violations.into(),
            num(r.worst_margin),
            r.seed.into(),
            r.passed().into(),
        ]);
    }
    let verdict = if failed.is_empty() {
        Ok(())
    } else {
        Err(Failure::violation(format!("suite(s) failed: {}", failed.join(", "))))
    };
    Ok((table, verdict))
}
