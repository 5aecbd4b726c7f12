use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};
use std::time::Instant;

use rayon::prelude::*;
use serde::Serialize;

use cgle_core::analysis::{
    default_slack, initial_norms, verify_envelope_unchecked, verify_rate, verify_solution_envelope_unchecked,
};
use cgle_core::certificates::{envelope_formula, BoundedQuantity, Certificate, Rates, Theorem};
use cgle_core::dynamics::linear_modal_exact;
use cgle_core::{fit_decay_rate, simulate, to_modal, ControllerSpec, Error as CoreError, RunSettings, TrajectoryRecord};

use crate::config::ExperimentConfig;
use crate::CliError;

pub const EXIT_PASS: i32 = 0;
pub const EXIT_HYPOTHESIS: i32 = 1;
pub const EXIT_VIOLATION: i32 = 2;
pub const EXIT_CONFIG: i32 = 3;

/// Time at which `cmd_converge` compares against the exact solution.
pub const CONVERGE_TIME: f64 = 1.0;

pub const CSV_HEADER: [&str; 7] = ["t", "l2_sq", "h1_semi_sq", "lpp", "envelope", "z_l2_sq", "v_l2_sq"];

/// 17 significant digits.
pub fn fmt_num(x: f64) -> String {
    format!("{x:.16e}")
}

#[derive(Debug, Clone, Default)]
pub struct RunOptions {
    pub out_dir: PathBuf,
    pub force: bool,
    pub slack: Option<f64>,
}

#[derive(Debug, Clone, Serialize)]
pub struct HypothesisRecord {
    pub name: String,
    pub statement: String,
    pub satisfied: bool,
    pub margin: f64,
}

#[derive(Debug, Clone, Serialize)]
pub struct CertificateRecord {
    pub theorem: String,
    pub satisfied: bool,
    pub forced: bool,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub exponent: Option<f64>,
    pub formula_exponent: f64,
    pub notes: Vec<String>,
    pub hypotheses: Vec<HypothesisRecord>,
}

impl CertificateRecord {
    fn new(cert: &Certificate, forced: bool) -> Self {
        Self {
            theorem: cert.theorem.name().into(),
            satisfied: cert.satisfied(),
            forced,
            exponent: cert.exponent(),
            formula_exponent: cert.formula_exponent(),
            notes: cert.notes.clone(),
            hypotheses: cert
                .hypotheses
                .iter()
                .map(|h| HypothesisRecord {
                    name: h.name.into(),
                    statement: h.statement.clone(),
                    satisfied: h.satisfied,
                    margin: h.margin,
                })
                .collect(),
        }
    }
}

#[derive(Debug, Clone, Default, Serialize)]
pub struct VerificationRecord {
    /// `envelope` or `rate`.
    pub kind: String,
    pub passed: bool,
    pub slack: f64,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub first_violation: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub worst_ratio: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub fitted_rate: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub required_rate: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub solution_passed: Option<bool>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub solution_first_violation: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub solution_worst_ratio: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub diverged_at: Option<f64>,
}

#[derive(Debug, Clone, Serialize)]
pub struct RunRecord {
    pub trajectory_file: String,
    pub wall_clock_seconds: f64,
    pub exit_code: i32,
    pub dt: f64,
    pub config: ExperimentConfig,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub certificate: Option<CertificateRecord>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub verification: Option<VerificationRecord>,
}

impl RunRecord {
    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("run record serializes")
    }
}

/// Everything `cmd_run` produced.
#[derive(Debug, Clone)]
pub struct RunOutcome {
    pub exit_code: i32,
    pub record: RunRecord,
    pub trajectory: Option<TrajectoryRecord>,
    /// Envelope column, in the squared units of the CSV.
    pub envelope: Option<Vec<f64>>,
    pub csv_path: Option<PathBuf>,
}

pub fn cmd_certify(cfg: &ExperimentConfig, out: &mut dyn Write) -> Result<i32, CliError> {
    let domain = cfg.domain()?;
    let cert = cfg
        .certificate(&domain)?
        .ok_or_else(|| CliError::Config("no controller configured, nothing to certify".into()))?;
    write!(out, "{cert}")?;
    if cert.satisfied() {
        writeln!(out, "result: hypotheses satisfied")?;
        Ok(EXIT_PASS)
    } else {
        let names: Vec<&str> = cert.failing().map(|h| h.name).collect();
        writeln!(out, "result: violated hypotheses: {}", names.join(", "))?;
        Ok(EXIT_HYPOTHESIS)
    }
}

fn trajectory_file_name(cfg: &ExperimentConfig) -> String {
    cfg.csv.clone().unwrap_or_else(|| format!("{}.csv", cfg.name))
}

fn ensure_dir(dir: &Path) -> Result<(), CliError> {
    if !dir.as_os_str().is_empty() {
        fs::create_dir_all(dir)?;
    }
    Ok(())
}

fn envelope_column(cert: &Certificate, record: &TrajectoryRecord) -> Option<Vec<f64>> {
    if cert.theorem == Theorem::ModalH1 {
        return None;
    }
    let init = initial_norms(record).ok()?;
    record
        .times
        .iter()
        .map(|t| {
            envelope_formula(cert, &init, *t).map(|e| match cert.bounded_quantity() {
                BoundedQuantity::SolutionL2 => e * e,
                _ => e,
            })
        })
        .collect::<Result<Vec<_>, _>>()
        .ok()
}

pub fn write_trajectory_csv(
    path: &Path,
    record: &TrajectoryRecord,
    envelope: Option<&[f64]>,
) -> Result<(), CliError> {
    let mut w = csv::Writer::from_path(path).map_err(|e| CliError::Io(e.into()))?;
    w.write_record(CSV_HEADER).map_err(|e| CliError::Io(e.into()))?;
    let opt = |col: Option<&Vec<f64>>, i: usize| col.map(|c| fmt_num(c[i])).unwrap_or_default();
    for i in 0..record.len() {
        let row = [
            fmt_num(record.times[i]),
            fmt_num(record.l2_sq[i]),
            fmt_num(record.h1_semi_sq[i]),
            fmt_num(record.lpp[i]),
            envelope.map(|e| fmt_num(e[i])).unwrap_or_default(),
            opt(record.z_l2_sq.as_ref(), i),
            opt(record.v_l2_sq.as_ref(), i),
        ];
        w.write_record(&row).map_err(|e| CliError::Io(e.into()))?;
    }
    w.flush()?;
    Ok(())
}

fn h1_delta(cert: &Certificate) -> Option<f64> {
    match cert.rates {
        Rates::ModalH1 { delta, .. } => Some(delta),
        _ => None,
    }
}

fn verify(
    cfg: &ExperimentConfig,
    cert: &Certificate,
    record: &TrajectoryRecord,
    slack: f64,
) -> Result<VerificationRecord, CliError> {
    if let Some(delta) = h1_delta(cert) {
        let rep = verify_rate(&record.times, &record.h1_semi_sq, delta, cfg.fit_window)?;
        return Ok(VerificationRecord {
            kind: "rate".into(),
            passed: rep.passed,
            slack,
            fitted_rate: Some(rep.fit.rate),
            required_rate: Some(rep.required),
            ..Default::default()
        });
    }
    let rep = verify_envelope_unchecked(record, cert, slack)?;
    let mut v = VerificationRecord {
        kind: "envelope".into(),
        passed: rep.passed,
        slack,
        first_violation: rep.first_violation,
        worst_ratio: Some(rep.worst_ratio),
        ..Default::default()
    };
    if cert.theorem == Theorem::Steering2 && cfg.verify_solution {
        let sol = verify_solution_envelope_unchecked(record, cert, slack)?;
        v.passed &= sol.passed;
        v.solution_passed = Some(sol.passed);
        v.solution_first_violation = sol.first_violation;
        v.solution_worst_ratio = Some(sol.worst_ratio);
    }
    Ok(v)
}

/// Simulates one configuration, writes `<out>/<name>.csv` and
/// `<out>/<name>.record.toml`, and checks the envelope.
pub fn cmd_run(cfg: &ExperimentConfig, opts: &RunOptions, out: &mut dyn Write) -> Result<RunOutcome, CliError> {
    let started = Instant::now();
    let domain = cfg.domain()?;
    let params = cfg.params();
    params.validate()?;
    let controller = cfg.controller()?;
    let cert = cfg.certificate(&domain)?;

    let trajectory_file = trajectory_file_name(cfg);
    let blank_record = |exit_code: i32, cert: Option<CertificateRecord>| RunRecord {
        trajectory_file: String::new(),
        wall_clock_seconds: started.elapsed().as_secs_f64(),
        exit_code,
        dt: 0.0,
        config: cfg.clone(),
        certificate: cert,
        verification: None,
    };

    if let Some(c) = &cert {
        if !c.satisfied() && !opts.force {
            write!(out, "{c}")?;
            let names: Vec<&str> = c.failing().map(|h| h.name).collect();
            writeln!(out, "refusing to run: violated hypotheses: {} (use --force)", names.join(", "))?;
            return Ok(RunOutcome {
                exit_code: EXIT_HYPOTHESIS,
                record: blank_record(EXIT_HYPOTHESIS, Some(CertificateRecord::new(c, false))),
                trajectory: None,
                envelope: None,
                csv_path: None,
            });
        }
    }

    let (u0, v0) = cfg.initial_states(&domain)?;
    let (record, diverged_at) = match simulate(&u0, v0.as_ref(), &params, &controller, &cfg.settings()) {
        Ok(t) => (t.record, None),
        Err(CoreError::Diverged { time, partial }) => (*partial, Some(time)),
        Err(e) => return Err(e.into()),
    };

    let slack = opts.slack.or(cfg.slack).unwrap_or_else(|| default_slack(record.dt));
    let envelope = cert.as_ref().and_then(|c| envelope_column(c, &record));
    let mut verification = match (&cert, cfg.verify, record.is_empty()) {
        (Some(c), true, false) => Some(verify(cfg, c, &record, slack)?),
        _ => None,
    };
    if let Some(t) = diverged_at {
        let v = verification.get_or_insert_with(|| VerificationRecord {
            kind: "envelope".into(),
            slack,
            ..Default::default()
        });
        v.passed = false;
        v.diverged_at = Some(t);
    }
    let exit_code = match &verification {
        Some(v) if !v.passed => EXIT_VIOLATION,
        _ => EXIT_PASS,
    };

    ensure_dir(&opts.out_dir)?;
    let csv_path = opts.out_dir.join(&trajectory_file);
    write_trajectory_csv(&csv_path, &record, envelope.as_deref())?;

    let run_record = RunRecord {
        trajectory_file,
        wall_clock_seconds: started.elapsed().as_secs_f64(),
        exit_code,
        dt: record.dt,
        config: cfg.clone(),
        certificate: cert.as_ref().map(|c| CertificateRecord::new(c, !c.satisfied())),
        verification: verification.clone(),
    };
    fs::write(opts.out_dir.join(format!("{}.record.toml", cfg.name)), run_record.to_toml())?;

    writeln!(out, "trajectory: {}", csv_path.display())?;
    writeln!(out, "samples: {}, dt = {}", record.len(), fmt_num(record.dt))?;
    if let Some(t) = diverged_at {
        writeln!(out, "diverged at t = {t}")?;
    }
    match &verification {
        Some(v) => {
            let ratio = v.worst_ratio.map(fmt_num).unwrap_or_else(|| "-".into());
            writeln!(
                out,
                "verification ({}): {} (worst ratio {ratio}, slack {})",
                v.kind,
                if v.passed { "pass" } else { "FAIL" },
                fmt_num(slack)
            )?;
            if let (Some(fit), Some(req)) = (v.fitted_rate, v.required_rate) {
                writeln!(out, "fitted rate {} against required {}", fmt_num(fit), fmt_num(req))?;
            }
            if let Some(t) = v.first_violation {
                writeln!(out, "first violation at t = {t}")?;
            }
        }
        None => writeln!(out, "verification: skipped")?,
    }

    Ok(RunOutcome {
        exit_code,
        record: run_record,
        trajectory: Some(record),
        envelope,
        csv_path: Some(csv_path),
    })
}

#[derive(Debug, Clone, PartialEq)]
pub struct SweepRow {
    pub value: f64,
    pub satisfied: bool,
    /// Formula exponent, reported whether or not the hypotheses hold.
    pub exponent: Option<f64>,
    pub fitted_rate: Option<f64>,
}

fn fitted_rate(cfg: &ExperimentConfig, cert: Option<&Certificate>) -> Option<f64> {
    let domain = cfg.domain().ok()?;
    let (u0, v0) = cfg.initial_states(&domain).ok()?;
    let run = simulate(&u0, v0.as_ref(), &cfg.params(), &cfg.controller().ok()?, &cfg.settings()).ok()?;
    let r = &run.record;
    let series = match cert.map(|c| c.bounded_quantity()) {
        Some(BoundedQuantity::ErrorL2Sq) => r.z_l2_sq.as_ref()?,
        Some(BoundedQuantity::GradientL2Sq) => &r.h1_semi_sq,
        _ => &r.l2_sq,
    };
    fit_decay_rate(&r.times, series, cfg.fit_window).ok().map(|f| f.rate)
}

/// Certifies (and unless `certify_only`, simulates) one configuration per
/// value of `param`, in parallel.
pub fn cmd_sweep(
    cfg: &ExperimentConfig,
    param: &str,
    values: &[f64],
    certify_only: bool,
    opts: &RunOptions,
    out: &mut dyn Write,
) -> Result<Vec<SweepRow>, CliError> {
    if values.is_empty() {
        return Err(CliError::Config("empty sweep range".into()));
    }
    let configs = values
        .iter()
        .map(|v| {
            let mut c = cfg.clone();
            c.set_scalar(param, *v)?;
            Ok(c)
        })
        .collect::<Result<Vec<_>, CliError>>()?;
    let rows = configs
        .par_iter()
        .zip(values.par_iter())
        .map(|(c, v)| -> Result<SweepRow, CliError> {
            let domain = c.domain()?;
            let cert = c.certificate(&domain)?;
            let fitted = if certify_only { None } else { fitted_rate(c, cert.as_ref()) };
            Ok(SweepRow {
                value: *v,
                satisfied: cert.as_ref().is_none_or(|c| c.satisfied()),
                exponent: cert.as_ref().map(|c| c.formula_exponent()),
                fitted_rate: fitted,
            })
        })
        .collect::<Result<Vec<_>, _>>()?;

    let mut text = Vec::new();
    {
        let mut w = csv::Writer::from_writer(&mut text);
        w.write_record([param, "satisfied", "exponent", "fitted_rate"])
            .map_err(|e| CliError::Io(e.into()))?;
        for r in &rows {
            let opt = |x: Option<f64>| x.map(fmt_num).unwrap_or_default();
            w.write_record([
                fmt_num(r.value),
                r.satisfied.to_string(),
                opt(r.exponent),
                opt(r.fitted_rate),
            ])
            .map_err(|e| CliError::Io(e.into()))?;
        }
        w.flush()?;
    }
    ensure_dir(&opts.out_dir)?;
    fs::write(opts.out_dir.join(format!("{}_sweep_{param}.csv", cfg.name)), &text)?;
    out.write_all(&text)?;
    Ok(rows)
}

#[derive(Debug, Clone, PartialEq)]
pub struct ConvergeRow {
    /// Step actually used.
    pub dt: f64,
    /// Relative L² error of the modal coefficients at `CONVERGE_TIME`.
    pub error: f64,
    /// Observed order against the previous row.
    pub order: Option<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ConvergeReport {
    pub exit_code: i32,
    pub rows: Vec<ConvergeRow>,
}

/// Errors against the exact linear solution for each step size.
pub fn cmd_converge(
    cfg: &ExperimentConfig,
    dts: &[f64],
    opts: &RunOptions,
    out: &mut dyn Write,
) -> Result<ConvergeReport, CliError> {
    let params = cfg.params();
    if !(params.linear_oracle && params.kappa == 0.0 && params.beta == 0.0) {
        writeln!(out, "convergence studies need linear_oracle = true with kappa = beta = 0")?;
        return Ok(ConvergeReport {
            exit_code: EXIT_HYPOTHESIS,
            rows: Vec::new(),
        });
    }
    if dts.is_empty() || dts.iter().any(|d| !(*d > 0.0)) {
        return Err(CliError::Config("need at least one positive dt".into()));
    }
    let controller = cfg.controller()?;
    let exact_params = match controller {
        ControllerSpec::Modal => params.clone(),
        ControllerSpec::None => cgle_core::CgleParams { mu: 0.0, ..params.clone() },
        _ => {
            return Err(CliError::Config(
                "the exact solution covers the modal controller or no control".into(),
            ))
        }
    };
    let domain = cfg.domain()?;
    let u0 = cfg.initial_condition().build(&domain)?;
    let count = domain.max_modes();
    let exact = linear_modal_exact(&to_modal(&u0, count)?, &exact_params, CONVERGE_TIME)?;
    let exact_norm = exact.energy().sqrt();

    let mut rows: Vec<ConvergeRow> = Vec::new();
    for &dt in dts {
        let settings = RunSettings {
            t_final: CONVERGE_TIME,
            dt: Some(dt),
            sample_every: CONVERGE_TIME,
        };
        let run = simulate(&u0, None, &params, &controller, &settings)?;
        let got = to_modal(&run.final_state, count)?;
        let diff: f64 = got
            .coeffs()
            .iter()
            .zip(exact.coeffs())
            .map(|(a, b)| (a - b).norm_sqr())
            .sum::<f64>()
            .sqrt();
        let error = if exact_norm > 0.0 { diff / exact_norm } else { diff };
        let order = rows
            .last()
            .map(|prev: &ConvergeRow| (prev.error / error).ln() / (prev.dt / run.record.dt).ln());
        rows.push(ConvergeRow {
            dt: run.record.dt,
            error,
            order,
        });
    }

    let mut text = Vec::new();
    {
        let mut w = csv::Writer::from_writer(&mut text);
        w.write_record(["dt", "error", "order"]).map_err(|e| CliError::Io(e.into()))?;
        for r in &rows {
            w.write_record([fmt_num(r.dt), fmt_num(r.error), r.order.map(fmt_num).unwrap_or_default()])
                .map_err(|e| CliError::Io(e.into()))?;
        }
        w.flush()?;
    }
    ensure_dir(&opts.out_dir)?;
    fs::write(opts.out_dir.join(format!("{}_converge.csv", cfg.name)), &text)?;
    out.write_all(&text)?;
    Ok(ConvergeReport {
        exit_code: EXIT_PASS,
        rows,
    })
}
