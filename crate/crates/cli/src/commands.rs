//! Subcommand implementations.

use std::path::Path;
use std::time::Instant;

use hicontrast::cell::{alpha0_cell, counterexample_gap, counterexample_reference, fhom_limit, qa_envelope};
use hicontrast::contrast::gamma_sweep;
use hicontrast::fields::io::{load_field, save_field};
use hicontrast::projection::{recover_potential, residual_a};
use hicontrast::symbols::{verify_constant_rank, OperatorDoc};
use hicontrast::{DifferentialOperator, Error, HighContrastProblem, ProjectionPlan, SolveReport};
use rayon::prelude::*;
use serde_json::json;

use crate::config::{self, Alpha0Config, EnvelopeConfig, FhomConfig, OperatorRef, SweepConfig};
use crate::output::{append_csv, num, OutputDir, RunManifest};
use crate::{CliError, Command, Outcome};

pub fn run(cmd: Command, out: &OutputDir) -> Result<Outcome, CliError> {
    let start = Instant::now();
    let (mut manifest, outcome) = match cmd {
        Command::Rank {
            operator,
            samples,
            tol,
            seed,
        } => rank(&operator, samples, tol, seed)?,
        Command::Project {
            op,
            input,
            output,
            mode,
        } => {
            let op = operator_arg(&op)?;
            let u = load_field(&input)?;
            let plan = ProjectionPlan::new(&op, u.grid(), mode.into())?;
            let before = residual_a(&op, &u)?;
            let p = plan.project(&u)?;
            let after = residual_a(&op, &p)?;
            let path = out.resolve(&output);
            save_field(&path, &p)?;
            print_json(&json!({ "residual_before": before, "residual_after": after }))?;
            let mut m = RunManifest::new(
                "project",
                json!({ "op": op_label(&op), "in": input, "out": output, "mode": format!("{mode:?}") }),
                None,
            );
            m.record(&path)?;
            (m, Outcome::Ok)
        }
        Command::Potential {
            op_a,
            op_b,
            input,
            output,
            tol,
        } => {
            let a = operator_arg(&op_a)?;
            let b = operator_arg(&op_b)?;
            let u = load_field(&input)?;
            let w = recover_potential(&a, &b, &u, tol)?;
            let path = out.resolve(&output);
            save_field(&path, &w)?;
            print_json(&json!({ "components": w.ncomp(), "n": w.grid().n() }))?;
            let mut m = RunManifest::new(
                "potential",
                json!({ "op_a": op_a, "op_b": op_b, "in": input, "out": output, "tol": tol }),
                None,
            );
            m.record(&path)?;
            (m, Outcome::Ok)
        }
        Command::Envelope { config } => envelope(&config, out)?,
        Command::Fhom { config } => fhom(&config, out)?,
        Command::Alpha0 { config } => alpha0(&config, out)?,
        Command::Sweep { config } => sweep(&config, out)?,
        Command::Counterexample {
            eps_list,
            n,
            output_csv,
        } => counterexample(&eps_list, n, output_csv.as_deref(), out)?,
    };
    manifest.wall_time_seconds = start.elapsed().as_secs_f64();
    manifest.write(out)?;
    Ok(outcome)
}

/// A readable operator file, else a catalog name.
fn operator_arg(arg: &str) -> Result<DifferentialOperator, CliError> {
    let path = Path::new(arg);
    if path.is_file() {
        let doc: OperatorDoc = config::load(path)?;
        return Ok(doc.into_operator()?);
    }
    OperatorRef::Name(arg.to_string()).resolve()
}

fn op_label(op: &DifferentialOperator) -> serde_json::Value {
    match op.name() {
        Some(n) => json!(n),
        None => serde_json::to_value(OperatorDoc::from_operator(op)).unwrap_or_default(),
    }
}

fn print_json(v: &impl serde::Serialize) -> Result<(), CliError> {
    println!("{}", serde_json::to_string_pretty(v)?);
    Ok(())
}

fn rank(operator: &str, samples: usize, tol: f64, seed: u64) -> Result<(RunManifest, Outcome), CliError> {
    let op = operator_arg(operator)?;
    let cert = verify_constant_rank(&op, samples, tol, seed);
    print_json(&cert)?;
    let outcome = match (cert.rank(), op.declared_rank()) {
        (None, _) => Outcome::RankViolation,
        (Some(r), Some(d)) if r != d => {
            eprintln!("declared rank {d} but sampled rank {r}");
            Outcome::RankViolation
        }
        _ => Outcome::Ok,
    };
    let m = RunManifest::new(
        "rank",
        json!({ "operator": operator, "samples": samples, "tol": tol }),
        Some(seed),
    );
    Ok((m, outcome))
}

fn report_columns(r: &SolveReport) -> Vec<String> {
    vec![
        num(r.value),
        r.iterations.to_string(),
        num(r.grad_norm),
        num(r.residuals.a),
        num(r.residuals.support),
        num(r.residuals.mean),
        r.converged.to_string(),
    ]
}

const REPORT_HEADER: [&str; 7] = [
    "value",
    "iters",
    "grad_norm",
    "residual_A",
    "residual_support",
    "residual_mean",
    "converged",
];

fn xi_header(len: usize) -> Vec<String> {
    (0..len).map(|i| format!("xi_{i}")).collect()
}

fn write_table(
    out: &OutputDir,
    csv: Option<&str>,
    header: Vec<String>,
    rows: &[Vec<String>],
    manifest: &mut RunManifest,
) -> Result<(), CliError> {
    if let Some(csv) = csv {
        let path = out.resolve(csv);
        let header: Vec<&str> = header.iter().map(String::as_str).collect();
        append_csv(&path, &header, rows)?;
        manifest.record(&path)?;
    }
    Ok(())
}

fn converged_outcome(all: bool) -> Outcome {
    if all {
        Outcome::Ok
    } else {
        Outcome::NotConverged
    }
}

fn check_points(points: &[Vec<f64>]) -> Result<(), CliError> {
    if points.is_empty() {
        return Err(Error::Empty("xi").into());
    }
    Ok(())
}

fn envelope(path: &Path, out: &OutputDir) -> Result<(RunManifest, Outcome), CliError> {
    let cfg: EnvelopeConfig = config::load(path)?;
    let op = cfg.operator.resolve()?;
    let points = cfg.xi.to_vec();
    check_points(&points)?;
    let reports = points
        .par_iter()
        .map(|xi| qa_envelope(&op, &cfg.integrand, xi, cfg.n, &cfg.opts))
        .collect::<Result<Vec<_>, Error>>()?;
    let rows: Vec<Vec<String>> = points
        .iter()
        .zip(&reports)
        .map(|(xi, r)| {
            let mut row: Vec<String> = xi.iter().map(|v| num(*v)).collect();
            row.push(cfg.n.to_string());
            row.extend(report_columns(r));
            row
        })
        .collect();
    let json_rows: Vec<_> = points
        .iter()
        .zip(&reports)
        .map(|(xi, r)| json!({ "xi": xi, "report": r }))
        .collect();
    print_json(&json_rows)?;
    let mut m = RunManifest::new("envelope", serde_json::to_value(&cfg)?, Some(cfg.opts.seed));
    let mut header = xi_header(op.in_dim());
    header.push("n".into());
    header.extend(REPORT_HEADER.iter().map(|s| s.to_string()));
    write_table(out, cfg.output_csv.as_deref(), header, &rows, &mut m)?;
    Ok((m, converged_outcome(reports.iter().all(|r| r.converged))))
}

fn fhom(path: &Path, out: &OutputDir) -> Result<(RunManifest, Outcome), CliError> {
    let cfg: FhomConfig = config::load(path)?;
    let op = cfg.operator.resolve()?;
    let ms = cfg.microstructure.build()?;
    let points = cfg.xi.to_vec();
    check_points(&points)?;
    let tables = points
        .par_iter()
        .map(|xi| fhom_limit(&op, &cfg.integrand, &ms, xi, &cfg.k, cfg.n, &cfg.opts))
        .collect::<Result<Vec<_>, Error>>()?;
    let mut rows = Vec::new();
    let mut all = true;
    for (xi, t) in points.iter().zip(&tables) {
        for r in &t.rows {
            let mut row: Vec<String> = xi.iter().map(|v| num(*v)).collect();
            row.push(r.k.to_string());
            row.push(cfg.n.to_string());
            row.extend(report_columns(&r.report));
            rows.push(row);
            all &= r.report.converged;
        }
    }
    let json_rows: Vec<_> = points
        .iter()
        .zip(&tables)
        .map(|(xi, t)| json!({ "xi": xi, "table": t }))
        .collect();
    print_json(&json_rows)?;
    let mut m = RunManifest::new("fhom", serde_json::to_value(&cfg)?, Some(cfg.opts.seed));
    let mut header = xi_header(op.in_dim());
    header.push("k".into());
    header.push("n".into());
    header.extend(REPORT_HEADER.iter().map(|s| s.to_string()));
    write_table(out, cfg.output_csv.as_deref(), header, &rows, &mut m)?;
    Ok((m, converged_outcome(all)))
}

fn alpha0(path: &Path, out: &OutputDir) -> Result<(RunManifest, Outcome), CliError> {
    let cfg: Alpha0Config = config::load(path)?;
    let op = cfg.operator.resolve()?;
    let ms = cfg.microstructure.build()?;
    let r = alpha0_cell(&op, &cfg.integrand, &ms, cfg.n, &cfg.opts)?;
    print_json(&r)?;
    let mut row = vec![cfg.n.to_string()];
    row.extend(report_columns(&r));
    row.push(r.dykstra_rate.map(num).unwrap_or_default());
    let mut header = vec!["n".to_string()];
    header.extend(REPORT_HEADER.iter().map(|s| s.to_string()));
    header.push("rate".into());
    let mut m = RunManifest::new("alpha0", serde_json::to_value(&cfg)?, Some(cfg.opts.seed));
    write_table(out, cfg.output_csv.as_deref(), header, &[row], &mut m)?;
    Ok((m, converged_outcome(r.converged)))
}

fn sweep(path: &Path, out: &OutputDir) -> Result<(RunManifest, Outcome), CliError> {
    let cfg: SweepConfig = config::load(path)?;
    let op = cfg.operator.resolve()?;
    let ms = cfg.microstructure.build()?;
    let first = *cfg.m_list.first().ok_or(Error::Empty("m_list"))?;
    let template = HighContrastProblem::new(
        op,
        cfg.soft_family(),
        cfg.f1.clone(),
        ms,
        first,
        cfg.s,
        cfg.opts.clone(),
    )?;
    let rep = gamma_sweep(&template, &cfg.m_list, &cfg.xi_grid, &cfg.k_list)?;
    print_json(&rep)?;
    let rows: Vec<Vec<String>> = rep
        .rows
        .iter()
        .map(|r| {
            vec![
                r.m.to_string(),
                num(r.epsilon),
                num(r.min_feps),
                num(r.predicted),
                num(r.gap),
                r.iterations.to_string(),
                num(r.residual_a),
                r.converged.to_string(),
            ]
        })
        .collect();
    let header = ["m", "epsilon", "minFeps", "predicted", "gap", "iters", "residual_A", "converged"]
        .map(String::from)
        .to_vec();
    let mut m = RunManifest::new("sweep", serde_json::to_value(&cfg)?, Some(cfg.opts.seed));
    write_table(out, cfg.output_csv.as_deref(), header, &rows, &mut m)?;
    let all = rep.rows.iter().all(|r| r.converged) && rep.limit.alpha0_converged;
    Ok((m, converged_outcome(all)))
}

fn counterexample(
    eps_list: &[f64],
    n: usize,
    csv: Option<&str>,
    out: &OutputDir,
) -> Result<(RunManifest, Outcome), CliError> {
    let rows = counterexample_gap(eps_list)?;
    let opts = hicontrast::SolveOptions::default();
    let reference = counterexample_reference(n, &opts)?;
    print_json(&json!({ "rows": rows, "reference": reference.value, "reference_converged": reference.converged }))?;
    let table: Vec<Vec<String>> = rows
        .iter()
        .map(|r| vec![num(r.epsilon), num(r.value), num(r.closed_form), num(reference.value)])
        .collect();
    let header = ["epsilon", "value", "closed_form", "reference"].map(String::from).to_vec();
    let mut m = RunManifest::new(
        "counterexample",
        json!({ "eps_list": eps_list, "n": n, "output_csv": csv }),
        Some(opts.seed),
    );
    write_table(out, csv, header, &table, &mut m)?;
    Ok((m, converged_outcome(reference.converged)))
}
