//! Result emission: the sweep CSV/JSON tables and the reloadable optimizer
//! document.

use std::io::Write;
use std::path::Path;

use anyhow::Context;
use ergocap::emi::Covariance;
use ergocap::linalg::CMatrix;
use ergocap::optimizer::{OptimizationResult, StopReason};
use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::config::ReportBase;
use crate::experiment::ExperimentRow;

pub const CSV_HEADER: &str = "snr_db,emi_identity_mc,emi_identity_stderr,emi_opt_mc,\
emi_opt_stderr,emi_identity_approx,emi_opt_approx,iterations,time_s,rho_m";

/// 17 significant decimal digits: enough to reproduce any f64 exactly on
/// parse-back.
fn full(x: f64) -> String {
    format!("{x:.16e}")
}

fn unit_factor(base: ReportBase) -> f64 {
    match base {
        ReportBase::Nats => 1.0,
        ReportBase::Bits => 1.0 / std::f64::consts::LN_2,
    }
}

fn stop_reason_label(reason: StopReason) -> &'static str {
    match reason {
        StopReason::Converged => "converged",
        StopReason::MaxIterations => "max_iterations",
        StopReason::RestartExhausted => "restart_exhausted",
    }
}

/// Renders the sweep table. EMI columns are converted to the report base;
/// `snr_db`, `iterations`, `time_s` and `rho_m` are unit-free.
pub fn format_csv(rows: &[ExperimentRow], base: ReportBase) -> String {
    let factor = unit_factor(base);
    let mut out = String::from(CSV_HEADER);
    out.push('\n');
    for row in rows {
        let fields = [
            full(row.snr_db),
            full(row.emi_identity_mc * factor),
            full(row.emi_identity_stderr * factor),
            full(row.emi_opt_mc * factor),
            full(row.emi_opt_stderr * factor),
            full(row.emi_identity_approx * factor),
            full(row.emi_opt_approx * factor),
            row.iterations.to_string(),
            full(row.time_s),
            full(row.rho_m),
        ];
        out.push_str(&fields.join(","));
        out.push('\n');
    }
    out
}

#[derive(Debug, Serialize, Deserialize)]
struct JsonEstimate {
    mean: f64,
    std_error: f64,
}

#[derive(Debug, Serialize, Deserialize)]
struct JsonRow {
    snr_db: f64,
    emi_identity_mc: JsonEstimate,
    emi_opt_mc: JsonEstimate,
    emi_identity_approx: f64,
    emi_opt_approx: f64,
    iterations: usize,
    time_s: f64,
    rho_m: f64,
    stop_reason: String,
    emi_monotone: bool,
}

#[derive(Debug, Serialize, Deserialize)]
struct JsonDocument {
    report_base: String,
    rows: Vec<JsonRow>,
}

pub fn format_json(rows: &[ExperimentRow], base: ReportBase) -> String {
    let factor = unit_factor(base);
    let document = JsonDocument {
        report_base: match base {
            ReportBase::Nats => "nats".into(),
            ReportBase::Bits => "bits".into(),
        },
        rows: rows
            .iter()
            .map(|row| JsonRow {
                snr_db: row.snr_db,
                emi_identity_mc: JsonEstimate {
                    mean: row.emi_identity_mc * factor,
                    std_error: row.emi_identity_stderr * factor,
                },
                emi_opt_mc: JsonEstimate {
                    mean: row.emi_opt_mc * factor,
                    std_error: row.emi_opt_stderr * factor,
                },
                emi_identity_approx: row.emi_identity_approx * factor,
                emi_opt_approx: row.emi_opt_approx * factor,
                iterations: row.iterations,
                time_s: row.time_s,
                rho_m: row.rho_m,
                stop_reason: stop_reason_label(row.stop_reason).into(),
                emi_monotone: row.emi_monotone,
            })
            .collect(),
    };
    let mut text = serde_json::to_string_pretty(&document).expect("document serializes");
    text.push('\n');
    text
}

/// Writes rendered output to a file, or to stdout when no path is given.
pub fn emit(text: &str, path: Option<&Path>) -> anyhow::Result<()> {
    match path {
        Some(path) => std::fs::write(path, text)
            .with_context(|| format!("cannot write output {}", path.display())),
        None => {
            std::io::stdout()
                .write_all(text.as_bytes())
                .context("cannot write to stdout")
        }
    }
}

// ---------------------------------------------------------------------------
// Optimizer document
// ---------------------------------------------------------------------------

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct TrajectoryRecord {
    pub iteration: usize,
    pub emi: f64,
    pub q_change: f64,
    pub delta_change: f64,
    pub delta_tilde_change: f64,
}

/// Reloadable snapshot of an optimizer run: the maximizer (split into real
/// and imaginary parts), the canonical vectors and the trajectory. Enough
/// to re-verify optimality offline.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct QStarDocument {
    pub side: usize,
    pub stop_reason: String,
    pub restarts: usize,
    pub q_star_re: Vec<Vec<f64>>,
    pub q_star_im: Vec<Vec<f64>>,
    pub delta_star: Vec<f64>,
    pub delta_tilde_star: Vec<f64>,
    pub trajectory: Vec<TrajectoryRecord>,
}

impl QStarDocument {
    pub fn from_result(result: &OptimizationResult) -> Self {
        let m = result.q_star.matrix();
        let side = m.nrows();
        let rows = |f: fn(&Complex64) -> f64| -> Vec<Vec<f64>> {
            (0..side)
                .map(|i| (0..side).map(|j| f(&m[(i, j)])).collect())
                .collect()
        };
        Self {
            side,
            stop_reason: stop_reason_label(result.stop_reason).into(),
            restarts: result.restarts,
            q_star_re: rows(|z| z.re),
            q_star_im: rows(|z| z.im),
            delta_star: result.delta_star.iter().copied().collect(),
            delta_tilde_star: result.delta_tilde_star.iter().copied().collect(),
            trajectory: result
                .trajectory
                .iter()
                .map(|p| TrajectoryRecord {
                    iteration: p.iteration,
                    emi: p.emi,
                    q_change: p.q_change,
                    delta_change: p.delta_change,
                    delta_tilde_change: p.delta_tilde_change,
                })
                .collect(),
        }
    }

    /// Rebuilds the stored covariance.
    pub fn covariance(&self) -> anyhow::Result<Covariance> {
        let n = self.side;
        if self.q_star_re.len() != n || self.q_star_im.len() != n {
            anyhow::bail!("covariance entry arrays do not match the declared side");
        }
        let m = CMatrix::from_fn(n, n, |i, j| {
            Complex64::new(self.q_star_re[i][j], self.q_star_im[i][j])
        });
        Ok(Covariance::new(m)?)
    }
}

pub fn emit_qstar(result: &OptimizationResult, path: &Path) -> anyhow::Result<()> {
    let document = QStarDocument::from_result(result);
    let mut text = serde_json::to_string_pretty(&document).expect("document serializes");
    text.push('\n');
    std::fs::write(path, text).with_context(|| format!("cannot write {}", path.display()))
}

pub fn load_qstar(path: &Path) -> anyhow::Result<QStarDocument> {
    let text = std::fs::read_to_string(path)
        .with_context(|| format!("cannot read {}", path.display()))?;
    serde_json::from_str(&text).with_context(|| format!("cannot parse {}", path.display()))
}
