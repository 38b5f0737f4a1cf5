use std::fmt::Write as _;
use std::fs;
use std::path::Path;

use pitgof::boot::{observed_residuals, run_study, StudyConfig};
use pitgof::{
    bootstrap_test, fit_mle, FitOptions, FitResult, ModelSpec, RejectionTable, Series, TestReport,
};
use serde::Serialize;

use crate::config::RunConfig;
use crate::data::load_series;
use crate::{sig4, Cli, CliError, Command};

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Parameter {
    pub name: String,
    pub estimate: f64,
    pub std_error: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct FitOutput {
    pub model: ModelSpec,
    pub parameters: Vec<Parameter>,
    pub fit: FitResult,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct TestOutput {
    pub model: ModelSpec,
    pub n_obs: usize,
    pub levels: Vec<f64>,
    pub report: TestReport,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct McOutput {
    pub config: StudyConfig,
    pub tables: Vec<RejectionTable>,
}

fn write_file(dir: &Path, name: &str, contents: &[u8]) -> Result<(), CliError> {
    fs::create_dir_all(dir)
        .map_err(|e| CliError::internal(format!("cannot create {}: {e}", dir.display())))?;
    let path = dir.join(name);
    fs::write(&path, contents)
        .map_err(|e| CliError::internal(format!("cannot write {}: {e}", path.display())))
}

fn write_json<T: Serialize>(dir: &Path, name: &str, value: &T) -> Result<(), CliError> {
    let mut text =
        serde_json::to_string_pretty(value).map_err(|e| CliError::internal(e.to_string()))?;
    text.push('\n');
    write_file(dir, name, text.as_bytes())
}

/// Loads the input and builds a model that matches its columns.
fn load(cfg: &RunConfig) -> Result<(ModelSpec, Series), CliError> {
    let input = cfg.input()?;
    let series = load_series(input, cfg.support_size()?)?;
    let spec = cfg.model(series.n_regressors)?;
    series
        .validate(&spec)
        .map_err(|e| CliError::parse(format!("{}: {e}", input.display())))?;
    Ok((spec, series))
}

/// Left-aligned first column, right-aligned rest.
fn table(header: &[String], rows: &[Vec<String>]) -> String {
    let cols = header.len();
    let mut width = vec![0; cols];
    for row in std::iter::once(header).chain(rows.iter().map(Vec::as_slice)) {
        for (w, cell) in width.iter_mut().zip(row) {
            *w = (*w).max(cell.chars().count());
        }
    }
    let mut out = String::new();
    for row in std::iter::once(header).chain(rows.iter().map(Vec::as_slice)) {
        for (c, cell) in row.iter().enumerate() {
            let pad = width[c] - cell.chars().count();
            if c == 0 {
                out.push_str(cell);
                out.push_str(&" ".repeat(pad));
            } else {
                out.push_str("  ");
                out.push_str(&" ".repeat(pad));
                out.push_str(cell);
            }
        }
        out.push('\n');
    }
    out
}

pub fn cmd_fit(cfg: &RunConfig) -> Result<FitOutput, CliError> {
    let (spec, series) = load(cfg)?;
    let fit = fit_mle(&spec, &series, None, &FitOptions::default())?;
    let parameters: Vec<Parameter> = spec
        .param_names()
        .into_iter()
        .zip(fit.theta_hat.flatten(&spec))
        .zip(&fit.std_errors)
        .map(|((name, estimate), &std_error)| Parameter {
            name,
            estimate,
            std_error,
        })
        .collect();
    let rows: Vec<Vec<String>> = parameters
        .iter()
        .map(|p| vec![p.name.clone(), sig4(p.estimate), sig4(p.std_error)])
        .collect();
    let mut text = table(
        &["parameter".into(), "estimate".into(), "std.error".into()],
        &rows,
    );
    writeln!(
        text,
        "log-likelihood {}  ({} observations, {} iterations)",
        sig4(fit.loglik),
        fit.n_obs,
        fit.iterations
    )
    .unwrap();
    let out = FitOutput {
        model: spec,
        parameters,
        fit,
    };
    let dir = cfg.out_dir();
    write_json(&dir, "fit.json", &out)?;
    write_file(&dir, "fit.txt", text.as_bytes())?;
    print!("{text}");
    Ok(out)
}

pub fn cmd_test(cfg: &RunConfig) -> Result<TestOutput, CliError> {
    let (spec, series) = load(cfg)?;
    let levels = cfg.levels()?;
    let boot = cfg.bootstrap()?;
    let report = bootstrap_test(&spec, &series, &boot)?;
    let residuals = observed_residuals(&spec, &series, &report.theta_hat, &boot)?;

    let mut header = vec!["statistic".to_string(), "value".into(), "p-value".into()];
    header.extend(levels.iter().map(|a| {
        format!(
            "{}%",
            sig4(100.0 * a).trim_end_matches('0').trim_end_matches('.')
        )
    }));
    let rows: Vec<Vec<String>> = report
        .stats
        .iter()
        .map(|s| {
            let mut row = vec![s.name.clone(), sig4(s.observed), sig4(s.p_value)];
            row.extend(
                levels
                    .iter()
                    .map(|&a| if s.p_value <= a { "reject" } else { "." }.to_string()),
            );
            row
        })
        .collect();
    let mut text = table(&header, &rows);
    writeln!(
        text,
        "B = {}, seed = {}, failed bootstrap fits = {}",
        report.b, report.master_seed, report.failed_fits
    )
    .unwrap();
    for w in &report.warnings {
        writeln!(text, "warning: {w}").unwrap();
    }

    let out = TestOutput {
        model: spec,
        n_obs: series.len(),
        levels,
        report,
    };
    let dir = cfg.out_dir();
    write_json(&dir, "report.json", &out)?;
    write_file(&dir, "report.txt", text.as_bytes())?;
    let mut csv = Vec::new();
    residuals
        .write_csv(&mut csv)
        .map_err(|e| CliError::internal(e.to_string()))?;
    write_file(&dir, "residuals.csv", &csv)?;
    print!("{text}");
    Ok(out)
}

pub fn cmd_mc(cfg: &RunConfig) -> Result<McOutput, CliError> {
    let study = cfg.study()?;
    let tables = run_study(&study)?;
    let dir = cfg.out_dir();
    let mut summary = String::new();
    for t in &tables {
        let mut csv = Vec::new();
        t.write_csv(&mut csv)
            .map_err(|e| CliError::internal(e.to_string()))?;
        write_file(&dir, &format!("mc_T{}.csv", t.t), &csv)?;

        writeln!(
            summary,
            "T = {}, R = {}: percentage of rejections",
            t.t, t.r
        )
        .unwrap();
        let mut header = vec!["scenario".to_string(), "level".into()];
        header.extend(t.stats.iter().cloned());
        let rows: Vec<Vec<String>> = t
            .rows
            .iter()
            .map(|r| {
                let mut row = vec![
                    r.scenario.to_string(),
                    format!("{}%", (100.0 * r.level).round()),
                ];
                row.extend(r.rates.iter().map(|&v| sig4(v)));
                row
            })
            .collect();
        summary.push_str(&table(&header, &rows));
        summary.push('\n');
    }
    let out = McOutput {
        config: study,
        tables,
    };
    write_json(&dir, "mc.json", &out)?;
    write_file(&dir, "summary.txt", summary.as_bytes())?;
    print!("{summary}");
    Ok(out)
}

fn dispatch(command: &Command) -> Result<(), CliError> {
    let (flags, which) = match command {
        Command::Fit(c) => (c, 0),
        Command::Test(c) => (c, 1),
        Command::Mc(c) => (c, 2),
    };
    let cfg = RunConfig::resolve(flags.clone())?;
    let go = || match which {
        0 => cmd_fit(&cfg).map(drop),
        1 => cmd_test(&cfg).map(drop),
        _ => cmd_mc(&cfg).map(drop),
    };
    match cfg.threads {
        Some(0) => Err(CliError::parse("--threads must be at least 1")),
        Some(n) => rayon::ThreadPoolBuilder::new()
            .num_threads(n)
            .build()
            .map_err(|e| CliError::internal(e.to_string()))?
            .install(go),
        None => go(),
    }
}

/// Runs a parsed command line; returns the process exit code.
pub fn run(cli: &Cli) -> i32 {
    match dispatch(&cli.command) {
        Ok(()) => 0,
        Err(e) => {
            eprintln!("error: {e}");
            e.code as i32
        }
    }
}
