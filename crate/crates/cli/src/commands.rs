use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};

use catdep::exact::{theta_probability, theta_probability_enumerated, EXACT_TOLERANCE};
use catdep::kernel::KERNEL_TOLERANCE;
use catdep::{build_tree, CrossCovariance, GeneratorSpec, Sampler, SequenceModel};
use clap::ValueEnum;
use serde::Serialize;

use crate::config::RunConfig;
use crate::error::{CliError, ExitStatus};

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum GraphFormat {
    Dot,
    Json,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum MatrixFormat {
    Json,
    Csv,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum CovarianceMethod {
    Enumerate,
    Closed,
    Both,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum BatchFormat {
    Csv,
    Jsonl,
}

/// Writes to `--out` when given, otherwise to `stdout`.
fn emit(out: Option<&Path>, stdout: &mut dyn Write, text: &str) -> Result<(), CliError> {
    match out {
        Some(path) => std::fs::write(path, text)?,
        None => stdout.write_all(text.as_bytes())?,
    }
    Ok(())
}

/// 12 significant digits for human-readable tables.
fn human(x: f64) -> String {
    format!("{x:.11e}")
}

pub fn cmd_validate(cfg: &RunConfig, stdout: &mut dyn Write) -> Result<ExitStatus, CliError> {
    let report = cfg.generator.validate(cfg.length);
    for n in &report.near_boundary {
        writeln!(
            stdout,
            "note: n={n}: value lies within 1e-9 of an integer before flooring"
        )?;
    }
    if report.is_valid() {
        writeln!(
            stdout,
            "generator {} satisfies 1 <= alpha(n) < n for n in 2..={}",
            cfg.generator, cfg.length
        )?;
        Ok(ExitStatus::Success)
    } else {
        writeln!(
            stdout,
            "generator {} has {} violation(s) on 2..={}:",
            cfg.generator,
            report.violations.len(),
            cfg.length
        )?;
        for v in &report.violations {
            writeln!(stdout, "{v}")?;
        }
        Ok(ExitStatus::ValidationFailed)
    }
}

pub fn cmd_graph(
    cfg: &RunConfig,
    format: GraphFormat,
    out: Option<&Path>,
    stdout: &mut dyn Write,
) -> Result<ExitStatus, CliError> {
    let tree = build_tree(&cfg.generator, cfg.length)?;
    let text = match format {
        GraphFormat::Dot => tree.export_dot(),
        GraphFormat::Json => format!("{}\n", tree.to_json()),
    };
    emit(out, stdout, &text)?;
    Ok(ExitStatus::Success)
}

/// Covariance output of `cmd_covariance`.
#[derive(Debug, Clone, PartialEq)]
pub struct CovarianceReport {
    pub enumerated: Option<CrossCovariance>,
    pub closed_form: Option<CrossCovariance>,
}

impl CovarianceReport {
    pub fn discrepancy(&self) -> Option<f64> {
        Some(self.enumerated.as_ref()?.max_abs_diff(self.closed_form.as_ref()?))
    }

    pub fn to_json(&self) -> String {
        #[derive(Serialize)]
        struct Both<'a> {
            enumerated: &'a CrossCovariance,
            closed_form: &'a CrossCovariance,
            max_abs_discrepancy: f64,
        }
        let text = match (&self.enumerated, &self.closed_form) {
            (Some(e), Some(c)) => serde_json::to_string(&Both {
                enumerated: e,
                closed_form: c,
                max_abs_discrepancy: e.max_abs_diff(c),
            }),
            (Some(single), None) | (None, Some(single)) => serde_json::to_string(single),
            (None, None) => Ok("null".into()),
        }
        .expect("covariance serializes");
        format!("{text}\n")
    }

    pub fn to_csv(&self) -> String {
        let mut blocks = Vec::new();
        let both = self.enumerated.is_some() && self.closed_form.is_some();
        for cov in [&self.enumerated, &self.closed_form].into_iter().flatten() {
            if both {
                blocks.push(format!("method,{}\n{}", cov.method.as_str(), cov.to_csv()));
            } else {
                blocks.push(cov.to_csv());
            }
        }
        let mut text = blocks.join("\n");
        if let Some(d) = self.discrepancy() {
            text.push_str(&format!("\nmax_abs_discrepancy\n{d:?}\n"));
        }
        text
    }
}

pub fn covariance_report(
    cfg: &RunConfig,
    m: usize,
    n: usize,
    method: CovarianceMethod,
) -> Result<CovarianceReport, CliError> {
    if m == 0 || m >= n || n > cfg.length {
        return Err(CliError::Usage(format!(
            "positions must satisfy 1 <= m < n <= N = {}, got m = {m}, n = {n}",
            cfg.length
        )));
    }
    build_tree(&cfg.generator, cfg.length)?;
    let model = cfg.model();
    let enumerated = match method {
        CovarianceMethod::Enumerate | CovarianceMethod::Both => Some(model.cross_covariance_enumerated(m, n)?),
        CovarianceMethod::Closed => None,
    };
    let closed_form = match method {
        CovarianceMethod::Closed | CovarianceMethod::Both => Some(model.cross_covariance_closed_form(m, n)?),
        CovarianceMethod::Enumerate => None,
    };
    Ok(CovarianceReport {
        enumerated,
        closed_form,
    })
}

pub fn cmd_covariance(
    cfg: &RunConfig,
    m: usize,
    n: usize,
    method: CovarianceMethod,
    format: MatrixFormat,
    out: Option<&Path>,
    stdout: &mut dyn Write,
) -> Result<ExitStatus, CliError> {
    let report = covariance_report(cfg, m, n, method)?;
    let text = match format {
        MatrixFormat::Json => report.to_json(),
        MatrixFormat::Csv => report.to_csv(),
    };
    emit(out, stdout, &text)?;
    Ok(ExitStatus::Success)
}

/// `batch.csv` gets the sidecar `batch.meta.json`.
pub fn sidecar_path(out: &Path) -> PathBuf {
    out.with_extension("meta.json")
}

pub fn cmd_sample(
    cfg: &RunConfig,
    format: BatchFormat,
    workers: Option<usize>,
    out: Option<&Path>,
    stdout: &mut dyn Write,
) -> Result<ExitStatus, CliError> {
    let seed = cfg
        .seed
        .ok_or_else(|| CliError::Usage("sample requires a seed".into()))?;
    let count = cfg
        .count
        .ok_or_else(|| CliError::Usage("sample requires a count".into()))?;
    let sampler = Sampler::new(&cfg.model(), cfg.length)?;
    let batch = sampler.sample_batch(seed, count, workers);
    let write = |w: &mut dyn Write| match format {
        BatchFormat::Csv => batch.write_csv(w),
        BatchFormat::Jsonl => batch.write_jsonl(w),
    };
    match out {
        Some(path) => {
            let mut file = BufWriter::new(File::create(path)?);
            write(&mut file)?;
            file.flush()?;
            std::fs::write(sidecar_path(path), format!("{}\n", batch.metadata_json()))?;
        }
        None => {
            let mut buffered = BufWriter::new(stdout);
            write(&mut buffered)?;
            buffered.flush()?;
        }
    }
    Ok(ExitStatus::Success)
}

/// One line of the verification report.
#[derive(Debug, Clone, PartialEq)]
pub struct Check {
    pub name: String,
    pub value: f64,
    pub tolerance: Option<f64>,
    pub detail: String,
}

impl Check {
    fn error(name: &str, value: f64, tolerance: f64) -> Self {
        Check {
            name: name.into(),
            value,
            tolerance: Some(tolerance),
            detail: String::new(),
        }
    }

    fn info(name: &str, value: f64, detail: String) -> Self {
        Check {
            name: name.into(),
            value,
            tolerance: None,
            detail,
        }
    }

    pub fn passed(&self) -> bool {
        self.tolerance.is_none_or(|tol| self.value <= tol)
    }

    fn render(&self) -> String {
        let tag = match self.tolerance {
            None => "INFO",
            Some(_) if self.passed() => "PASS",
            Some(_) => "FAIL",
        };
        let mut line = format!("{tag}  {:<28} {}", self.name, human(self.value));
        if let Some(tol) = self.tolerance {
            line.push_str(&format!("  (tol {tol:.0e})"));
        }
        if !self.detail.is_empty() {
            line.push_str("  ");
            line.push_str(&self.detail);
        }
        line
    }
}

fn max_abs<I: IntoIterator<Item = f64>>(values: I) -> f64 {
    values.into_iter().fold(0.0, |acc, x| acc.max(x.abs()))
}

/// Fitted `log_δ(Λ_ii / (p_i(1 − p_i)))` for every diagonal cell large enough
/// to fit reliably, or `None` when δ is too close to 0 or 1 for a stable fit.
fn fitted_exponents(model: &SequenceModel, cov: &CrossCovariance) -> Option<Vec<f64>> {
    let d = model.delta().value();
    if d <= 0.0 || d >= 1.0 || d.ln().abs() < 1e-3 {
        return None;
    }
    let fits: Vec<f64> = model
        .marginal()
        .probs()
        .iter()
        .enumerate()
        .filter_map(|(i, &pi)| {
            let base = pi * (1.0 - pi);
            let entry = cov.matrix[i][i];
            (base > 0.0 && entry > 1e-6).then(|| (entry / base).ln() / d.ln())
        })
        .collect();
    (!fits.is_empty()).then_some(fits)
}

/// Runs the exact-path checks at the configured parameters.
pub fn verification_checks(cfg: &RunConfig) -> Result<Vec<Check>, CliError> {
    build_tree(&cfg.generator, cfg.length)?;
    let model = cfg.model();
    let len = cfg.length;
    let k = cfg.categories;
    let p = cfg.p.probs();
    let mut checks = Vec::new();

    checks.push(Check::error(
        "kernel row sums",
        model.kernel().max_row_sum_error(),
        KERNEL_TOLERANCE,
    ));

    let summary = model.enumeration(len)?.marginals();
    checks.push(Check::error(
        "normalization",
        (summary.total - 1.0).abs(),
        EXACT_TOLERANCE,
    ));
    checks.push(Check::error(
        "marginals (enumeration)",
        max_abs(
            summary
                .marginals
                .iter()
                .flat_map(|row| row.iter().zip(p).map(|(a, b)| a - b)),
        ),
        EXACT_TOLERANCE,
    ));
    let mut propagated = Vec::new();
    for n in 1..=len {
        let probs = model.marginal_at(n)?.probs;
        propagated.extend(probs.iter().zip(p).map(|(a, b)| a - b));
    }
    checks.push(Check::error(
        "marginals (propagation)",
        max_abs(propagated),
        EXACT_TOLERANCE,
    ));

    if len >= 2 {
        let mut discrepancy = 0.0_f64;
        let mut margins = 0.0_f64;
        let mut largest = 0.0_f64;
        let mut exponent_error = 0.0_f64;
        let mut fk_fits: [Vec<f64>; 2] = [Vec::new(), Vec::new()];
        let mut fitted_any = false;
        for n in 2..=len {
            for m in 1..n {
                let enumerated = model.cross_covariance_enumerated(m, n)?;
                let closed = model.cross_covariance_closed_form(m, n)?;
                discrepancy = discrepancy.max(enumerated.max_abs_diff(&closed));
                margins = margins.max(enumerated.max_margin_sum());
                largest = largest.max(max_abs(enumerated.matrix.iter().flatten().copied()));
                if let Some(fits) = fitted_exponents(&model, &enumerated) {
                    fitted_any = true;
                    let expected = closed.exponent.expect("closed form records its exponent") as f64;
                    exponent_error = exponent_error.max(max_abs(fits.iter().map(|f| f - expected)));
                    fk_fits[usize::from(m > 1)].extend(fits);
                }
            }
        }
        let basis = catdep::ExponentBasis::for_generator(&cfg.generator);
        let mut detail = format!("basis {}", basis.as_str());
        if basis.is_conjecture() {
            detail.push_str(&format!(" ({})", catdep::exact::CONJECTURE_NOTE));
        }
        checks.push(Check {
            detail,
            ..Check::error("covariance equivalence", discrepancy, EXACT_TOLERANCE)
        });
        checks.push(Check::error("covariance row/col sums", margins, EXACT_TOLERANCE));
        checks.push(Check::info(
            "max |covariance|",
            largest,
            "largest enumerated entry over all pairs".into(),
        ));
        if fitted_any {
            let mut detail = String::from("fitted log_delta(Λ_ii / p_i(1-p_i)) vs expected exponent");
            if cfg.generator == GeneratorSpec::Fk {
                let mean = |v: &[f64]| v.iter().sum::<f64>() / v.len() as f64;
                detail = format!("fk: m=1 -> delta^{}", human(mean(&fk_fits[0])));
                if !fk_fits[1].is_empty() {
                    detail.push_str(&format!(", m>1 -> delta^{}", human(mean(&fk_fits[1]))));
                }
            }
            checks.push(Check {
                detail,
                ..Check::error("covariance exponent", exponent_error, 1e-6)
            });
        }
    }

    if cfg.generator == GeneratorSpec::Sequential && len >= 2 {
        let mut worst = 0.0_f64;
        for n in 2..=len {
            for i in 1..=k {
                let enumerated = theta_probability_enumerated(n, i, &cfg.p, cfg.delta, cfg.enumeration_cap)?;
                let closed = theta_probability(n, i, &cfg.p, cfg.delta)?;
                worst = worst.max((enumerated - closed).abs());
            }
        }
        checks.push(Check::error("theta probability", worst, EXACT_TOLERANCE));
    }
    Ok(checks)
}

pub fn cmd_verify(cfg: &RunConfig, stdout: &mut dyn Write) -> Result<ExitStatus, CliError> {
    let checks = verification_checks(cfg)?;
    writeln!(
        stdout,
        "verify generator={} K={} N={} delta={}",
        cfg.generator,
        cfg.categories,
        cfg.length,
        cfg.delta.value()
    )?;
    for check in &checks {
        writeln!(stdout, "{}", check.render())?;
    }
    if checks.iter().all(Check::passed) {
        writeln!(stdout, "all checks passed")?;
        Ok(ExitStatus::Success)
    } else {
        writeln!(stdout, "verification FAILED")?;
        Ok(ExitStatus::VerificationFailed)
    }
}
