//! CSV writers and readers for every artifact the tools emit.
//!
//! Headers are fixed per schema; floats go through [`fmt_float`] so a
//! parse → serialize cycle is byte-identical (modulo a trailing newline).
//! Readers report 1-based physical line numbers on bad rows.

use std::fmt::Write as _;

use thiserror::Error;

use crate::dde::Trajectory;
use crate::harness::{LevelSummary, RecordedRun, StepRecord};
use crate::ident::DelayBank;
use crate::num::Real;
use crate::sem::{Cell, CellVerdict, StabilityGrid};

use super::{fmt_float, parse_float};

#[derive(Debug, Error)]
pub enum CsvError {
    /// First non-blank line does not match the schema header.
    #[error("bad header: expected `{expected}`, got `{found}`")]
    Header { expected: String, found: String },
    /// A data row failed to parse.
    #[error("line {line}: {msg}")]
    Row { line: usize, msg: String },
    /// Rows parse individually but the table does not form a valid value.
    #[error("{0}")]
    Shape(String),
}

/// Splits `text` into trimmed comma-separated rows after checking the
/// header. Blank lines are skipped; returned line numbers are 1-based
/// positions in the original text.
fn parse_table<'a>(text: &'a str, header: &str) -> Result<Vec<(usize, Vec<&'a str>)>, CsvError> {
    let ncols = header.split(',').count();
    let mut rows = Vec::new();
    let mut saw_header = false;
    for (idx, raw) in text.lines().enumerate() {
        let line = raw.trim();
        if line.is_empty() {
            continue;
        }
        if !saw_header {
            if line != header {
                return Err(CsvError::Header {
                    expected: header.to_string(),
                    found: line.to_string(),
                });
            }
            saw_header = true;
            continue;
        }
        let fields: Vec<&str> = line.split(',').map(str::trim).collect();
        if fields.len() != ncols {
            return Err(CsvError::Row {
                line: idx + 1,
                msg: format!("expected {ncols} fields, got {}", fields.len()),
            });
        }
        rows.push((idx + 1, fields));
    }
    if !saw_header {
        return Err(CsvError::Header {
            expected: header.to_string(),
            found: "<empty file>".to_string(),
        });
    }
    Ok(rows)
}

fn float_field<T: Real>(line: usize, name: &str, raw: &str) -> Result<T, CsvError> {
    parse_float(raw)
        .ok_or_else(|| CsvError::Row { line, msg: format!("bad float for `{name}`: `{raw}`") })
}

fn usize_field(line: usize, name: &str, raw: &str) -> Result<usize, CsvError> {
    raw.parse::<usize>()
        .map_err(|_| CsvError::Row { line, msg: format!("bad integer for `{name}`: `{raw}`") })
}

fn u64_field(line: usize, name: &str, raw: &str) -> Result<u64, CsvError> {
    raw.parse::<u64>()
        .map_err(|_| CsvError::Row { line, msg: format!("bad integer for `{name}`: `{raw}`") })
}

// ---------------------------------------------------------------------------
// Trajectory

pub const TRAJECTORY_HEADER: &str = "t,dx,v_ego,dv,a_ego,u_lead";

pub fn write_trajectory<T: Real>(traj: &Trajectory<T>) -> String {
    let mut out = String::with_capacity(32 + traj.len() * 150);
    out.push_str(TRAJECTORY_HEADER);
    out.push('\n');
    for k in 0..traj.len() {
        let _ = writeln!(
            out,
            "{},{},{},{},{},{}",
            fmt_float(traj.time(k)),
            fmt_float(traj.dx[k]),
            fmt_float(traj.v_ego[k]),
            fmt_float(traj.dv[k]),
            fmt_float(traj.a_ego[k]),
            fmt_float(traj.u_lead[k]),
        );
    }
    out
}

/// Reads a trajectory back. The time column must be a uniform grid (it is
/// re-checked here, tolerance 1e-6·dt); at least two rows are required to
/// recover the sample time. A truncated file simply yields a shorter
/// trajectory — the divergence marker is not serialized.
pub fn read_trajectory<T: Real>(text: &str) -> Result<Trajectory<T>, CsvError> {
    let rows = parse_table(text, TRAJECTORY_HEADER)?;
    if rows.len() < 2 {
        return Err(CsvError::Shape(format!(
            "need at least 2 data rows to recover the sample time, got {}",
            rows.len()
        )));
    }
    let n = rows.len();
    let mut t = Vec::with_capacity(n);
    let mut traj = Trajectory {
        dt: T::zero(),
        t0: T::zero(),
        dx: Vec::with_capacity(n),
        v_ego: Vec::with_capacity(n),
        dv: Vec::with_capacity(n),
        a_ego: Vec::with_capacity(n),
        u_lead: Vec::with_capacity(n),
        diverged_at: None,
    };
    for (line, fields) in &rows {
        t.push(float_field::<T>(*line, "t", fields[0])?);
        traj.dx.push(float_field(*line, "dx", fields[1])?);
        traj.v_ego.push(float_field(*line, "v_ego", fields[2])?);
        traj.dv.push(float_field(*line, "dv", fields[3])?);
        traj.a_ego.push(float_field(*line, "a_ego", fields[4])?);
        traj.u_lead.push(float_field(*line, "u_lead", fields[5])?);
    }
    traj.t0 = t[0];
    traj.dt = t[1] - t[0];
    if !(traj.dt > T::zero()) {
        return Err(CsvError::Shape(format!(
            "time must be strictly increasing, first increment is {}",
            traj.dt
        )));
    }
    let tol = T::lit(1e-6) * traj.dt;
    for (k, &tk) in t.iter().enumerate() {
        if (tk - traj.time(k)).abs() > tol {
            return Err(CsvError::Row {
                line: rows[k].0,
                msg: format!("non-uniform time: {tk} is off the {}-spaced grid", traj.dt),
            });
        }
    }
    Ok(traj)
}

// ---------------------------------------------------------------------------
// Stability grid

pub const STABILITY_HEADER: &str = "alpha,beta,tau,rho,stable";

fn verdict_str(v: CellVerdict) -> &'static str {
    match v {
        CellVerdict::Stable => "true",
        CellVerdict::Unstable => "false",
        CellVerdict::Error => "error",
    }
}

pub fn write_stability_grid<T: Real>(grid: &StabilityGrid<T>) -> String {
    let (na, nb, nt) =
        (grid.alpha_values.len(), grid.beta_values.len(), grid.tau_values.len());
    let mut out = String::with_capacity(32 + na * nb * nt * 90);
    out.push_str(STABILITY_HEADER);
    out.push('\n');
    for ti in 0..nt {
        for ai in 0..na {
            for bi in 0..nb {
                let cell = grid.cell(ai, bi, ti);
                let _ = writeln!(
                    out,
                    "{},{},{},{},{}",
                    fmt_float(grid.alpha_values[ai]),
                    fmt_float(grid.beta_values[bi]),
                    fmt_float(grid.tau_values[ti]),
                    fmt_float(cell.rho),
                    verdict_str(cell.verdict),
                );
            }
        }
    }
    out
}

/// Collects the finite values of one key column, sorted and deduplicated.
fn axis_values<T: Real>(col: &[(usize, T)], name: &str) -> Result<Vec<T>, CsvError> {
    for &(line, v) in col {
        if !v.is_finite() {
            return Err(CsvError::Row { line, msg: format!("non-finite `{name}`: {v}") });
        }
    }
    let mut vals: Vec<T> = col.iter().map(|&(_, v)| v).collect();
    vals.sort_by(|a, b| a.partial_cmp(b).expect("finite values compare"));
    vals.dedup();
    Ok(vals)
}

fn axis_index<T: Real>(axis: &[T], v: T) -> usize {
    axis.binary_search_by(|p| p.partial_cmp(&v).expect("finite values compare"))
        .expect("value came from this column")
}

/// Reads a grid back. Row order is free; the (α, β, τ) triple of each row
/// locates its cell, and every lattice point must appear exactly once.
pub fn read_stability_grid<T: Real>(text: &str) -> Result<StabilityGrid<T>, CsvError> {
    let rows = parse_table(text, STABILITY_HEADER)?;
    let mut alphas = Vec::with_capacity(rows.len());
    let mut betas = Vec::with_capacity(rows.len());
    let mut taus = Vec::with_capacity(rows.len());
    let mut cells = Vec::with_capacity(rows.len());
    for (line, fields) in &rows {
        alphas.push((*line, float_field::<T>(*line, "alpha", fields[0])?));
        betas.push((*line, float_field::<T>(*line, "beta", fields[1])?));
        taus.push((*line, float_field::<T>(*line, "tau", fields[2])?));
        let rho = float_field::<T>(*line, "rho", fields[3])?;
        let verdict = match fields[4] {
            "true" => CellVerdict::Stable,
            "false" => CellVerdict::Unstable,
            "error" => CellVerdict::Error,
            other => {
                return Err(CsvError::Row {
                    line: *line,
                    msg: format!("bad verdict `{other}` (expected true/false/error)"),
                })
            }
        };
        cells.push((*line, Cell { rho, verdict }));
    }
    let alpha_values = axis_values(&alphas, "alpha")?;
    let beta_values = axis_values(&betas, "beta")?;
    let tau_values = axis_values(&taus, "tau")?;
    let (na, nb, nt) = (alpha_values.len(), beta_values.len(), tau_values.len());
    let expected = na * nb * nt;
    if rows.len() != expected {
        return Err(CsvError::Shape(format!(
            "{} rows do not fill a {na}x{nb} grid over {nt} delays ({expected} cells)",
            rows.len()
        )));
    }
    let mut slots: Vec<Option<Cell<T>>> = vec![None; expected];
    for i in 0..rows.len() {
        let ai = axis_index(&alpha_values, alphas[i].1);
        let bi = axis_index(&beta_values, betas[i].1);
        let ti = axis_index(&tau_values, taus[i].1);
        let slot = &mut slots[(ti * na + ai) * nb + bi];
        if slot.is_some() {
            return Err(CsvError::Row {
                line: cells[i].0,
                msg: "duplicate (alpha, beta, tau) cell".to_string(),
            });
        }
        *slot = Some(cells[i].1);
    }
    let cells: Vec<Cell<T>> = slots.into_iter().map(|c| c.expect("all slots filled")).collect();
    StabilityGrid::from_parts(alpha_values, beta_values, tau_values, cells)
        .map_err(|e| CsvError::Shape(e.to_string()))
}

// ---------------------------------------------------------------------------
// Estimator bank checkpoint

pub const CHECKPOINT_HEADER: &str = "d,k,p1,p2,p3,J,r11,r21,r22,r31,r32,r33";

/// One per-delay line of a bank checkpoint: sample count, parameter
/// estimate, accumulated cost, and the lower triangle of the inverse
/// Cholesky factor.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CheckpointRow<T> {
    pub d: usize,
    pub samples_seen: usize,
    pub params: [T; 3],
    pub cost: T,
    pub factor: [[T; 3]; 3],
}

pub fn checkpoint_rows<T: Real>(bank: &DelayBank<T>) -> Vec<CheckpointRow<T>> {
    let (d_min, d_max) = bank.delay_range();
    (d_min..=d_max)
        .map(|d| {
            let est = bank.estimator(d).expect("delay within the bank range");
            CheckpointRow {
                d,
                samples_seen: est.samples_seen(),
                params: est.params(),
                cost: bank.cost(d).expect("delay within the bank range"),
                factor: est.factor(),
            }
        })
        .collect()
}

pub fn write_bank_checkpoint<T: Real>(rows: &[CheckpointRow<T>]) -> String {
    let mut out = String::with_capacity(64 + rows.len() * 280);
    out.push_str(CHECKPOINT_HEADER);
    out.push('\n');
    for r in rows {
        let f = &r.factor;
        let _ = writeln!(
            out,
            "{},{},{},{},{},{},{},{},{},{},{},{}",
            r.d,
            r.samples_seen,
            fmt_float(r.params[0]),
            fmt_float(r.params[1]),
            fmt_float(r.params[2]),
            fmt_float(r.cost),
            fmt_float(f[0][0]),
            fmt_float(f[1][0]),
            fmt_float(f[1][1]),
            fmt_float(f[2][0]),
            fmt_float(f[2][1]),
            fmt_float(f[2][2]),
        );
    }
    out
}

pub fn read_bank_checkpoint<T: Real>(text: &str) -> Result<Vec<CheckpointRow<T>>, CsvError> {
    let rows = parse_table(text, CHECKPOINT_HEADER)?;
    let mut out = Vec::with_capacity(rows.len());
    for (line, f) in &rows {
        let mut factor = [[T::zero(); 3]; 3];
        factor[0][0] = float_field(*line, "r11", f[6])?;
        factor[1][0] = float_field(*line, "r21", f[7])?;
        factor[1][1] = float_field(*line, "r22", f[8])?;
        factor[2][0] = float_field(*line, "r31", f[9])?;
        factor[2][1] = float_field(*line, "r32", f[10])?;
        factor[2][2] = float_field(*line, "r33", f[11])?;
        out.push(CheckpointRow {
            d: usize_field(*line, "d", f[0])?,
            samples_seen: usize_field(*line, "k", f[1])?,
            params: [
                float_field(*line, "p1", f[2])?,
                float_field(*line, "p2", f[3])?,
                float_field(*line, "p3", f[4])?,
            ],
            cost: float_field(*line, "J", f[5])?,
            factor,
        });
    }
    Ok(out)
}

// ---------------------------------------------------------------------------
// Recorded drives

pub const RECORDED_HEADER: &str = "time,v_ego,dx,dv,a";

pub fn write_recorded_run<T: Real>(run: &RecordedRun<T>) -> String {
    let mut out = String::with_capacity(32 + run.time.len() * 125);
    out.push_str(RECORDED_HEADER);
    out.push('\n');
    for k in 0..run.time.len() {
        let _ = writeln!(
            out,
            "{},{},{},{},{}",
            fmt_float(run.time[k]),
            fmt_float(run.v_ego[k]),
            fmt_float(run.dx[k]),
            fmt_float(run.dv[k]),
            fmt_float(run.a[k]),
        );
    }
    out
}

/// Reads a raw recording. Column-length and time-axis validation happens
/// later, when the recording is cut into episodes.
pub fn read_recorded_run<T: Real>(text: &str) -> Result<RecordedRun<T>, CsvError> {
    let rows = parse_table(text, RECORDED_HEADER)?;
    let mut run = RecordedRun {
        time: Vec::with_capacity(rows.len()),
        v_ego: Vec::with_capacity(rows.len()),
        dx: Vec::with_capacity(rows.len()),
        dv: Vec::with_capacity(rows.len()),
        a: Vec::with_capacity(rows.len()),
    };
    for (line, f) in &rows {
        run.time.push(float_field(*line, "time", f[0])?);
        run.v_ego.push(float_field(*line, "v_ego", f[1])?);
        run.dx.push(float_field(*line, "dx", f[2])?);
        run.dv.push(float_field(*line, "dv", f[3])?);
        run.a.push(float_field(*line, "a", f[4])?);
    }
    Ok(run)
}

// ---------------------------------------------------------------------------
// Identification reports

pub const IDENT_HISTORY_HEADER: &str = "k,d,alpha_id,beta_id,gamma_id,cost";

/// Per-step identification log: selected delay, its parameter estimate and
/// its accumulated cost.
pub fn write_ident_history<T: Real>(steps: &[StepRecord<T>]) -> String {
    let mut out = String::with_capacity(48 + steps.len() * 130);
    out.push_str(IDENT_HISTORY_HEADER);
    out.push('\n');
    for s in steps {
        let _ = writeln!(
            out,
            "{},{},{},{},{},{}",
            s.k,
            s.d,
            fmt_float(s.params[0]),
            fmt_float(s.params[1]),
            fmt_float(s.params[2]),
            fmt_float(s.cost),
        );
    }
    out
}

pub fn read_ident_history<T: Real>(text: &str) -> Result<Vec<StepRecord<T>>, CsvError> {
    let rows = parse_table(text, IDENT_HISTORY_HEADER)?;
    let mut out = Vec::with_capacity(rows.len());
    for (line, f) in &rows {
        out.push(StepRecord {
            k: usize_field(*line, "k", f[0])?,
            d: usize_field(*line, "d", f[1])?,
            params: [
                float_field(*line, "alpha_id", f[2])?,
                float_field(*line, "beta_id", f[3])?,
                float_field(*line, "gamma_id", f[4])?,
            ],
            cost: float_field(*line, "cost", f[5])?,
        });
    }
    Ok(out)
}

/// Per-step cost of every delay hypothesis; columns `j_d<delay>`.
pub fn write_cost_history<T: Real>(delays: &[usize], rows: &[(usize, Vec<T>)]) -> String {
    let mut out = String::with_capacity(16 + rows.len() * (1 + delays.len()) * 25);
    out.push('k');
    for d in delays {
        let _ = write!(out, ",j_d{d}");
    }
    out.push('\n');
    for (k, costs) in rows {
        assert_eq!(costs.len(), delays.len(), "cost row width must match the delay list");
        let _ = write!(out, "{k}");
        for c in costs {
            let _ = write!(out, ",{}", fmt_float(*c));
        }
        out.push('\n');
    }
    out
}

pub fn read_cost_history<T: Real>(text: &str) -> Result<(Vec<usize>, Vec<(usize, Vec<T>)>), CsvError> {
    let mut lines = text.lines().enumerate().filter(|(_, l)| !l.trim().is_empty());
    let (_, header) = lines.next().ok_or_else(|| CsvError::Header {
        expected: "k,j_d<delay>,...".to_string(),
        found: "<empty file>".to_string(),
    })?;
    let cols: Vec<&str> = header.trim().split(',').collect();
    let bad_header = || CsvError::Header {
        expected: "k,j_d<delay>,...".to_string(),
        found: header.trim().to_string(),
    };
    if cols.len() < 2 || cols[0] != "k" {
        return Err(bad_header());
    }
    let mut delays = Vec::with_capacity(cols.len() - 1);
    for c in &cols[1..] {
        let d = c.strip_prefix("j_d").and_then(|n| n.parse::<usize>().ok());
        delays.push(d.ok_or_else(bad_header)?);
    }
    let mut rows = Vec::new();
    for (idx, raw) in lines {
        let fields: Vec<&str> = raw.trim().split(',').map(str::trim).collect();
        if fields.len() != cols.len() {
            return Err(CsvError::Row {
                line: idx + 1,
                msg: format!("expected {} fields, got {}", cols.len(), fields.len()),
            });
        }
        let k = usize_field(idx + 1, "k", fields[0])?;
        let mut costs = Vec::with_capacity(delays.len());
        for (d, f) in delays.iter().zip(&fields[1..]) {
            costs.push(float_field(idx + 1, &format!("j_d{d}"), f)?);
        }
        rows.push((k, costs));
    }
    Ok((delays, rows))
}

// ---------------------------------------------------------------------------
// Study reports

pub const STUDY_TRIALS_HEADER: &str = "snr_db,seed,selected_d,rel_error,alpha_id,beta_id,gamma_id";

/// One identification trial of a noise study.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct StudyTrialRow<T> {
    pub snr_db: T,
    pub seed: u64,
    pub selected_d: usize,
    pub rel_error: T,
    pub params: [T; 3],
}

pub fn study_trial_rows<T: Real>(levels: &[LevelSummary<T>]) -> Vec<StudyTrialRow<T>> {
    levels
        .iter()
        .flat_map(|level| {
            level.trials.iter().map(|t| StudyTrialRow {
                snr_db: level.snr_db,
                seed: t.seed,
                selected_d: t.selected_d,
                rel_error: t.rel_error,
                params: t.params,
            })
        })
        .collect()
}

pub fn write_study_trials<T: Real>(rows: &[StudyTrialRow<T>]) -> String {
    let mut out = String::with_capacity(64 + rows.len() * 160);
    out.push_str(STUDY_TRIALS_HEADER);
    out.push('\n');
    for r in rows {
        let _ = writeln!(
            out,
            "{},{},{},{},{},{},{}",
            fmt_float(r.snr_db),
            r.seed,
            r.selected_d,
            fmt_float(r.rel_error),
            fmt_float(r.params[0]),
            fmt_float(r.params[1]),
            fmt_float(r.params[2]),
        );
    }
    out
}

pub fn read_study_trials<T: Real>(text: &str) -> Result<Vec<StudyTrialRow<T>>, CsvError> {
    let rows = parse_table(text, STUDY_TRIALS_HEADER)?;
    let mut out = Vec::with_capacity(rows.len());
    for (line, f) in &rows {
        out.push(StudyTrialRow {
            snr_db: float_field(*line, "snr_db", f[0])?,
            seed: u64_field(*line, "seed", f[1])?,
            selected_d: usize_field(*line, "selected_d", f[2])?,
            rel_error: float_field(*line, "rel_error", f[3])?,
            params: [
                float_field(*line, "alpha_id", f[4])?,
                float_field(*line, "beta_id", f[5])?,
                float_field(*line, "gamma_id", f[6])?,
            ],
        });
    }
    Ok(out)
}

pub const STUDY_MEANS_HEADER: &str = "snr_db,trials,mean_rel_error";

pub fn write_study_means<T: Real>(levels: &[LevelSummary<T>]) -> String {
    let mut out = String::with_capacity(48 + levels.len() * 60);
    out.push_str(STUDY_MEANS_HEADER);
    out.push('\n');
    for level in levels {
        let _ = writeln!(
            out,
            "{},{},{}",
            fmt_float(level.snr_db),
            level.trials.len(),
            fmt_float(level.mean_rel_error),
        );
    }
    out
}

pub fn read_study_means<T: Real>(text: &str) -> Result<Vec<(T, usize, T)>, CsvError> {
    let rows = parse_table(text, STUDY_MEANS_HEADER)?;
    let mut out = Vec::with_capacity(rows.len());
    for (line, f) in &rows {
        out.push((
            float_field(*line, "snr_db", f[0])?,
            usize_field(*line, "trials", f[1])?,
            float_field(*line, "mean_rel_error", f[2])?,
        ));
    }
    Ok(out)
}
