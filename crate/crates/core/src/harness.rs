//! Paired Picard-vs-accelerated sweeps with CSV output.
//!
//! A sweep fixes one experiment axis (misalignment rotation, misalignment
//! translation, or stopping tolerance), runs `trials` seeded registrations
//! per axis value with both drivers from the identity guess, and reports
//! per-trial rows plus per-value aggregate statistics. Trial seeds depend
//! only on the master seed and the trial number, so trials are paired
//! across axis values and the whole sweep is reproducible (wall-clock
//! columns excepted).

use std::fmt;
use std::fs;
use std::path::Path;
use std::str::FromStr;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use crate::aa_icp::{run_aa_icp_on, run_fixed_point, AaConfig};
use crate::cloud::PointCloud;
use crate::error::{Error, Result};
use crate::geometry::Pose6;
use crate::icp::{IcpProblem, RunRecord};
use crate::synth::{random_misalign, subsample, MisalignSpec};

/// The experiment variable of a sweep.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SweepAxis {
    /// Axis values are misalignment rotation angles in degrees
    /// (no translation).
    RotationDegrees,
    /// Axis values are misalignment translation distances in meters
    /// (no rotation).
    TranslationMeters,
    /// Axis values are stopping tolerances; the misalignment is a fixed
    /// 10-degree rotation.
    Epsilon,
}

/// Misalignment rotation used for every trial of an epsilon sweep.
pub const EPSILON_AXIS_ROTATION_DEG: f64 = 10.0;

impl SweepAxis {
    pub fn name(&self) -> &'static str {
        match self {
            SweepAxis::RotationDegrees => "rotation",
            SweepAxis::TranslationMeters => "translation",
            SweepAxis::Epsilon => "epsilon",
        }
    }
}

impl fmt::Display for SweepAxis {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for SweepAxis {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "rotation" => Ok(SweepAxis::RotationDegrees),
            "translation" => Ok(SweepAxis::TranslationMeters),
            "epsilon" => Ok(SweepAxis::Epsilon),
            other => Err(Error::InvalidArgument(format!(
                "unknown axis '{other}' (expected rotation, translation or epsilon)"
            ))),
        }
    }
}

/// Which drivers a sweep actually executes.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum RunMode {
    Both,
    PicardOnly,
    AaOnly,
}

impl RunMode {
    pub fn name(&self) -> &'static str {
        match self {
            RunMode::Both => "both",
            RunMode::PicardOnly => "picard",
            RunMode::AaOnly => "aa",
        }
    }
}

impl fmt::Display for RunMode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for RunMode {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "both" => Ok(RunMode::Both),
            "picard" => Ok(RunMode::PicardOnly),
            "aa" => Ok(RunMode::AaOnly),
            other => Err(Error::InvalidArgument(format!(
                "unknown mode '{other}' (expected both, picard or aa)"
            ))),
        }
    }
}

/// Full description of one sweep.
#[derive(Debug, Clone, PartialEq)]
pub struct SweepConfig {
    pub axis: SweepAxis,
    /// Axis values, swept in the given order.
    pub values: Vec<f64>,
    /// Trials per axis value.
    pub trials: usize,
    /// Master seed; every trial seed derives from it.
    pub seed: u64,
    /// Gaussian noise added to each perturbed source cloud.
    pub noise_sigma: f64,
    /// Subsample the reference cloud to this size once, before the sweep.
    pub subsample_to: Option<usize>,
    pub mode: RunMode,
    /// Solver parameters shared by both drivers (epsilon is overridden per
    /// value on the epsilon axis).
    pub solver: AaConfig,
}

impl Default for SweepConfig {
    fn default() -> Self {
        SweepConfig {
            axis: SweepAxis::RotationDegrees,
            values: vec![5.0, 10.0, 20.0],
            trials: 50,
            seed: 0,
            noise_sigma: 0.0,
            subsample_to: None,
            mode: RunMode::Both,
            solver: AaConfig::default(),
        }
    }
}

impl SweepConfig {
    pub fn validate(&self) -> Result<()> {
        if self.trials == 0 {
            return Err(Error::InvalidArgument("trials must be at least 1".into()));
        }
        if self.values.is_empty() {
            return Err(Error::InvalidArgument(
                "at least one axis value is required".into(),
            ));
        }
        for &v in &self.values {
            let ok = match self.axis {
                SweepAxis::RotationDegrees => v.is_finite() && (0.0..=180.0).contains(&v),
                SweepAxis::TranslationMeters => v.is_finite() && v >= 0.0,
                SweepAxis::Epsilon => v.is_finite() && v > 0.0,
            };
            if !ok {
                return Err(Error::InvalidArgument(format!(
                    "value {v} is out of range for the {} axis",
                    self.axis
                )));
            }
        }
        if !(self.noise_sigma.is_finite() && self.noise_sigma >= 0.0) {
            return Err(Error::InvalidArgument(
                "noise_sigma must be finite and non-negative".into(),
            ));
        }
        self.solver.validate()
    }
}

/// One benchmark trial as written to the CSV. Empty options mean the side
/// did not run or did not finish.
#[derive(Debug, Clone, PartialEq)]
pub struct TrialRow {
    pub axis_value: f64,
    pub trial: usize,
    pub seed: u64,
    pub iters_picard: Option<usize>,
    pub iters_aa: Option<usize>,
    pub err_picard: Option<f64>,
    pub err_aa: Option<f64>,
    pub speedup: Option<f64>,
    pub err_improvement: Option<f64>,
    pub resets_aa: Option<usize>,
    pub converged_picard: bool,
    pub converged_aa: bool,
    pub wall_ms_picard: Option<f64>,
    pub wall_ms_aa: Option<f64>,
}

impl TrialRow {
    /// Both drivers produced a record, so the paired metrics exist.
    pub fn is_paired(&self) -> bool {
        self.iters_picard.is_some() && self.iters_aa.is_some()
    }

    /// Equality on everything that is seeded (wall-clock columns vary
    /// between runs even with identical seeds).
    pub fn same_ignoring_wall_time(&self, other: &TrialRow) -> bool {
        let mut a = self.clone();
        let mut b = other.clone();
        a.wall_ms_picard = None;
        a.wall_ms_aa = None;
        b.wall_ms_picard = None;
        b.wall_ms_aa = None;
        a == b
    }
}

/// Aggregates over the paired rows of one axis value.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ComparisonStats {
    /// Total rows seen, including failed ones.
    pub trials: usize,
    /// Rows excluded because at least one side failed.
    pub failed: usize,
    pub median_speedup: f64,
    pub mean_speedup: f64,
    pub median_err_improvement: f64,
    pub mean_err_improvement: f64,
    /// Fraction of paired rows with strictly fewer accelerated iterations.
    pub fraction_accelerated: f64,
    /// Fraction of paired rows with strictly smaller accelerated error.
    pub fraction_error_improved: f64,
    /// Watchdog iterations as a share of all accelerated iterations.
    pub reset_fraction: f64,
}

/// Statistics attached to one axis value (`None` when the sweep mode ran
/// only one driver, so no paired metrics exist).
#[derive(Debug, Clone, PartialEq)]
pub struct AxisSummary {
    pub axis_value: f64,
    pub stats: Option<ComparisonStats>,
}

/// Everything a sweep produces.
#[derive(Debug, Clone, PartialEq)]
pub struct SweepResult {
    /// One row per (axis value, trial), in deterministic order.
    pub rows: Vec<TrialRow>,
    /// One summary per axis value, in input order.
    pub summaries: Vec<AxisSummary>,
}

/// Runs both drivers on one pair from the same start pose and returns both
/// records; one side failing does not suppress the other.
pub fn run_pair(
    source: &PointCloud,
    reference: &PointCloud,
    u0: &Pose6,
    cfg: &AaConfig,
) -> Result<(Result<RunRecord>, Result<RunRecord>)> {
    cfg.validate()?;
    let problem = IcpProblem::new(source, reference)?
        .with_max_distance(cfg.max_correspondence_distance)?;
    let picard = run_fixed_point(&problem, u0, &cfg.convergence(), None);
    let aa = run_aa_icp_on(&problem, u0, cfg);
    Ok((picard, aa))
}

/// Median of the paper-statistics convention: lower interpolation on the
/// sorted values (no averaging of middle pairs).
fn median_lower(values: &[f64]) -> f64 {
    debug_assert!(!values.is_empty());
    let mut sorted = values.to_vec();
    sorted.sort_by(f64::total_cmp);
    sorted[(sorted.len() - 1) / 2]
}

/// Aggregates a set of trial rows. Errors when no row has both sides.
pub fn summarize(rows: &[TrialRow]) -> Result<ComparisonStats> {
    let paired: Vec<&TrialRow> = rows.iter().filter(|r| r.is_paired()).collect();
    if paired.is_empty() {
        return Err(Error::NoSuccessfulTrials);
    }
    let speedups: Vec<f64> = paired.iter().map(|r| r.speedup.unwrap()).collect();
    let improvements: Vec<f64> = paired.iter().map(|r| r.err_improvement.unwrap()).collect();
    let n = paired.len() as f64;
    let accelerated = paired
        .iter()
        .filter(|r| r.iters_aa.unwrap() < r.iters_picard.unwrap())
        .count();
    let improved = paired
        .iter()
        .filter(|r| r.err_aa.unwrap() < r.err_picard.unwrap())
        .count();
    let total_aa_iters: usize = paired.iter().map(|r| r.iters_aa.unwrap()).sum();
    let total_resets: usize = paired.iter().map(|r| r.resets_aa.unwrap_or(0)).sum();
    Ok(ComparisonStats {
        trials: rows.len(),
        failed: rows.len() - paired.len(),
        median_speedup: median_lower(&speedups),
        mean_speedup: speedups.iter().sum::<f64>() / n,
        median_err_improvement: median_lower(&improvements),
        mean_err_improvement: improvements.iter().sum::<f64>() / n,
        fraction_accelerated: accelerated as f64 / n,
        fraction_error_improved: improved as f64 / n,
        reset_fraction: if total_aa_iters == 0 {
            0.0
        } else {
            total_resets as f64 / total_aa_iters as f64
        },
    })
}

/// Trial seeds: a splitmix64 step of the master seed and the trial number.
/// Deliberately independent of the axis value so trials pair up across
/// values.
fn trial_seed(master: u64, trial: usize) -> u64 {
    let mut z = master.wrapping_add((trial as u64 + 1).wrapping_mul(0x9E37_79B9_7F4A_7C15));
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

fn wall_ms(record: &RunRecord) -> f64 {
    record.wall_time.as_secs_f64() * 1e3
}

fn run_trial(
    reference: &PointCloud,
    cfg: &SweepConfig,
    axis_value: f64,
    trial: usize,
) -> TrialRow {
    let seed = trial_seed(cfg.seed, trial);
    let mut row = TrialRow {
        axis_value,
        trial,
        seed,
        iters_picard: None,
        iters_aa: None,
        err_picard: None,
        err_aa: None,
        speedup: None,
        err_improvement: None,
        resets_aa: None,
        converged_picard: false,
        converged_aa: false,
        wall_ms_picard: None,
        wall_ms_aa: None,
    };

    let (rotation_deg, translation) = match cfg.axis {
        SweepAxis::RotationDegrees => (axis_value, 0.0),
        SweepAxis::TranslationMeters => (0.0, axis_value),
        SweepAxis::Epsilon => (EPSILON_AXIS_ROTATION_DEG, 0.0),
    };
    let mut solver = cfg.solver;
    if cfg.axis == SweepAxis::Epsilon {
        solver.epsilon = axis_value;
    }
    let spec = MisalignSpec {
        rotation_angle_deg: rotation_deg,
        translation_distance: translation,
        noise_sigma: cfg.noise_sigma,
        seed,
        subsample_to: None,
    };
    let Ok((source, _)) = random_misalign(reference, &spec) else {
        return row;
    };
    let Ok(problem) = IcpProblem::new(&source, reference)
        .and_then(|p| p.with_max_distance(solver.max_correspondence_distance))
    else {
        return row;
    };

    let u0 = Pose6::IDENTITY;
    if cfg.mode != RunMode::AaOnly {
        if let Ok(record) = run_fixed_point(&problem, &u0, &solver.convergence(), None) {
            row.iters_picard = Some(record.iterations);
            row.err_picard = record.final_error();
            row.converged_picard = record.converged;
            row.wall_ms_picard = Some(wall_ms(&record));
        }
    }
    if cfg.mode != RunMode::PicardOnly {
        if let Ok(record) = run_aa_icp_on(&problem, &u0, &solver) {
            row.iters_aa = Some(record.iterations);
            row.err_aa = record.final_error();
            row.converged_aa = record.converged;
            row.resets_aa = Some(record.reset_count);
            row.wall_ms_aa = Some(wall_ms(&record));
        }
    }
    if let (Some(ip), Some(ia)) = (row.iters_picard, row.iters_aa) {
        row.speedup = Some((ip as f64 - ia as f64) / ip as f64);
    }
    if let (Some(ep), Some(ea)) = (row.err_picard, row.err_aa) {
        row.err_improvement = Some(if ep == 0.0 { 0.0 } else { (ep - ea) / ep });
    }
    row
}

/// Executes a full sweep over `reference`.
///
/// Trials run in parallel but rows come back in deterministic
/// (value-major, trial-minor) order. Fails with
/// [`Error::NoSuccessfulTrials`] only when every trial failed on every
/// side it was supposed to run.
pub fn run_sweep(reference: &PointCloud, cfg: &SweepConfig) -> Result<SweepResult> {
    cfg.validate()?;
    let base;
    let reference = match cfg.subsample_to {
        Some(keep) => {
            let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
            base = subsample(reference, keep, &mut rng)?;
            &base
        }
        None => reference,
    };

    let jobs: Vec<(f64, usize)> = cfg
        .values
        .iter()
        .flat_map(|&v| (0..cfg.trials).map(move |t| (v, t)))
        .collect();
    let rows: Vec<TrialRow> = jobs
        .par_iter()
        .map(|&(value, trial)| run_trial(reference, cfg, value, trial))
        .collect();

    let any_success = rows.iter().any(|r| match cfg.mode {
        RunMode::Both => r.is_paired(),
        RunMode::PicardOnly => r.iters_picard.is_some(),
        RunMode::AaOnly => r.iters_aa.is_some(),
    });
    if !any_success {
        return Err(Error::NoSuccessfulTrials);
    }

    let summaries = cfg
        .values
        .iter()
        .enumerate()
        .map(|(vi, &value)| {
            let slice = &rows[vi * cfg.trials..(vi + 1) * cfg.trials];
            AxisSummary {
                axis_value: value,
                stats: if cfg.mode == RunMode::Both {
                    summarize(slice).ok()
                } else {
                    None
                },
            }
        })
        .collect();

    Ok(SweepResult { rows, summaries })
}

pub const CSV_HEADER: &str = "axis_value,trial,seed,iters_picard,iters_aa,err_picard,err_aa,\
speedup,err_improvement,resets_aa,converged_picard,converged_aa,wall_ms_picard,wall_ms_aa";

fn push_opt<T: fmt::Display>(out: &mut String, v: &Option<T>) {
    if let Some(v) = v {
        out.push_str(&v.to_string());
    }
}

/// Renders rows as CSV text (header included). Floats use the shortest
/// representation that round-trips, so parsing the output reproduces the
/// rows exactly.
pub fn render_csv(rows: &[TrialRow]) -> String {
    let mut out = String::with_capacity(64 * (rows.len() + 1));
    out.push_str(CSV_HEADER);
    out.push('\n');
    for r in rows {
        out.push_str(&format!("{},{},{},", r.axis_value, r.trial, r.seed));
        push_opt(&mut out, &r.iters_picard);
        out.push(',');
        push_opt(&mut out, &r.iters_aa);
        out.push(',');
        push_opt(&mut out, &r.err_picard);
        out.push(',');
        push_opt(&mut out, &r.err_aa);
        out.push(',');
        push_opt(&mut out, &r.speedup);
        out.push(',');
        push_opt(&mut out, &r.err_improvement);
        out.push(',');
        push_opt(&mut out, &r.resets_aa);
        out.push(',');
        out.push_str(if r.converged_picard { "true" } else { "false" });
        out.push(',');
        out.push_str(if r.converged_aa { "true" } else { "false" });
        out.push(',');
        push_opt(&mut out, &r.wall_ms_picard);
        out.push(',');
        push_opt(&mut out, &r.wall_ms_aa);
        out.push('\n');
    }
    out
}

pub fn write_csv(path: &Path, rows: &[TrialRow]) -> Result<()> {
    fs::write(path, render_csv(rows)).map_err(|source| Error::Io {
        path: path.to_path_buf(),
        source,
    })
}

fn parse_error(origin: &Path, line: usize, message: impl Into<String>) -> Error {
    Error::Parse {
        path: origin.to_path_buf(),
        line,
        message: message.into(),
    }
}

fn field<T: FromStr>(origin: &Path, line: usize, name: &str, raw: &str) -> Result<T> {
    raw.parse()
        .map_err(|_| parse_error(origin, line, format!("bad {name} value '{raw}'")))
}

fn opt_field<T: FromStr>(origin: &Path, line: usize, name: &str, raw: &str) -> Result<Option<T>> {
    if raw.is_empty() {
        Ok(None)
    } else {
        field(origin, line, name, raw).map(Some)
    }
}

/// Parses CSV text produced by [`render_csv`]. `origin` only labels error
/// messages.
pub fn parse_csv(text: &str, origin: &Path) -> Result<Vec<TrialRow>> {
    let mut lines = text.lines().enumerate();
    match lines.next() {
        Some((_, header)) if header == CSV_HEADER => {}
        Some((_, header)) => {
            return Err(parse_error(
                origin,
                1,
                format!("unexpected header '{header}'"),
            ))
        }
        None => return Err(parse_error(origin, 1, "empty file")),
    }
    let mut rows = Vec::new();
    for (i, raw) in lines {
        let line = i + 1;
        if raw.is_empty() {
            continue;
        }
        let f: Vec<&str> = raw.split(',').collect();
        if f.len() != 14 {
            return Err(parse_error(
                origin,
                line,
                format!("expected 14 fields, found {}", f.len()),
            ));
        }
        rows.push(TrialRow {
            axis_value: field(origin, line, "axis_value", f[0])?,
            trial: field(origin, line, "trial", f[1])?,
            seed: field(origin, line, "seed", f[2])?,
            iters_picard: opt_field(origin, line, "iters_picard", f[3])?,
            iters_aa: opt_field(origin, line, "iters_aa", f[4])?,
            err_picard: opt_field(origin, line, "err_picard", f[5])?,
            err_aa: opt_field(origin, line, "err_aa", f[6])?,
            speedup: opt_field(origin, line, "speedup", f[7])?,
            err_improvement: opt_field(origin, line, "err_improvement", f[8])?,
            resets_aa: opt_field(origin, line, "resets_aa", f[9])?,
            converged_picard: field(origin, line, "converged_picard", f[10])?,
            converged_aa: field(origin, line, "converged_aa", f[11])?,
            wall_ms_picard: opt_field(origin, line, "wall_ms_picard", f[12])?,
            wall_ms_aa: opt_field(origin, line, "wall_ms_aa", f[13])?,
        });
    }
    Ok(rows)
}

pub fn read_csv(path: &Path) -> Result<Vec<TrialRow>> {
    let text = fs::read_to_string(path).map_err(|source| Error::Io {
        path: path.to_path_buf(),
        source,
    })?;
    parse_csv(&text, path)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::synth::{make_test_shape, TestShape};
    use nalgebra::Point3;

    fn paired_row(trial: usize, iters_p: usize, iters_aa: usize, ep: f64, ea: f64) -> TrialRow {
        TrialRow {
            axis_value: 10.0,
            trial,
            seed: trial as u64,
            iters_picard: Some(iters_p),
            iters_aa: Some(iters_aa),
            err_picard: Some(ep),
            err_aa: Some(ea),
            speedup: Some((iters_p as f64 - iters_aa as f64) / iters_p as f64),
            err_improvement: Some(if ep == 0.0 { 0.0 } else { (ep - ea) / ep }),
            resets_aa: Some(0),
            converged_picard: true,
            converged_aa: true,
            wall_ms_picard: Some(1.5),
            wall_ms_aa: Some(1.25),
        }
    }

    #[test]
    fn single_pair_speedup_matches_hand_value() {
        let stats = summarize(&[paired_row(0, 10, 7, 0.004, 0.004)]).unwrap();
        assert_eq!(stats.median_speedup, 0.3);
        assert_eq!(stats.mean_speedup, 0.3);
        assert_eq!(stats.fraction_accelerated, 1.0);
        assert_eq!(stats.trials, 1);
        assert_eq!(stats.failed, 0);
    }

    #[test]
    fn identical_sides_give_zero_improvements() {
        let rows: Vec<TrialRow> = (0..4).map(|t| paired_row(t, 12, 12, 0.01, 0.01)).collect();
        let stats = summarize(&rows).unwrap();
        assert_eq!(stats.median_speedup, 0.0);
        assert_eq!(stats.mean_speedup, 0.0);
        assert_eq!(stats.median_err_improvement, 0.0);
        assert_eq!(stats.fraction_accelerated, 0.0);
        assert_eq!(stats.fraction_error_improved, 0.0);
    }

    #[test]
    fn five_rows_match_hand_computed_aggregates() {
        // Speedups: 0.5, 0.25, 0.0, -0.25, 0.2 -> sorted: -0.25 0 0.2 0.25 0.5
        // median (lower) = 0.2, mean = 0.14.
        let rows = vec![
            paired_row(0, 10, 5, 0.01, 0.008), // speedup 0.5, improved
            paired_row(1, 8, 6, 0.01, 0.01),   // 0.25, tie
            paired_row(2, 6, 6, 0.02, 0.02),   // 0.0, tie
            paired_row(3, 4, 5, 0.01, 0.012),  // -0.25, worse
            paired_row(4, 10, 8, 0.05, 0.04),  // 0.2, improved
        ];
        let stats = summarize(&rows).unwrap();
        assert!((stats.median_speedup - 0.2).abs() < 1e-15);
        assert!((stats.mean_speedup - 0.14).abs() < 1e-15);
        assert_eq!(stats.fraction_accelerated, 3.0 / 5.0);
        assert_eq!(stats.fraction_error_improved, 2.0 / 5.0);
    }

    #[test]
    fn failed_rows_are_counted_but_excluded() {
        let mut failed = paired_row(1, 10, 7, 0.01, 0.01);
        failed.iters_aa = None;
        failed.speedup = None;
        let rows = vec![paired_row(0, 10, 5, 0.01, 0.01), failed];
        let stats = summarize(&rows).unwrap();
        assert_eq!(stats.trials, 2);
        assert_eq!(stats.failed, 1);
        assert_eq!(stats.median_speedup, 0.5);
        assert!(matches!(
            summarize(&[]),
            Err(Error::NoSuccessfulTrials)
        ));
    }

    #[test]
    fn median_uses_lower_interpolation() {
        assert_eq!(median_lower(&[3.0, 1.0]), 1.0);
        assert_eq!(median_lower(&[4.0, 1.0, 3.0, 2.0]), 2.0);
        assert_eq!(median_lower(&[5.0, 1.0, 3.0]), 3.0);
    }

    fn small_sweep_config() -> SweepConfig {
        SweepConfig {
            values: vec![5.0, 10.0],
            trials: 3,
            seed: 42,
            ..SweepConfig::default()
        }
    }

    fn small_reference() -> PointCloud {
        make_test_shape(TestShape::BunnyProxy, 300, 7).unwrap()
    }

    #[test]
    fn sweep_is_deterministic_modulo_wall_time() {
        let reference = small_reference();
        let cfg = small_sweep_config();
        let a = run_sweep(&reference, &cfg).unwrap();
        let b = run_sweep(&reference, &cfg).unwrap();
        assert_eq!(a.rows.len(), 6);
        for (x, y) in a.rows.iter().zip(&b.rows) {
            assert!(x.same_ignoring_wall_time(y));
        }
        assert_eq!(a.summaries.len(), 2);
        for (x, y) in a.summaries.iter().zip(&b.summaries) {
            assert_eq!(x, y, "aggregates contain no wall-clock data");
        }
        let different = run_sweep(
            &reference,
            &SweepConfig {
                seed: 43,
                ..cfg.clone()
            },
        )
        .unwrap();
        assert!(a
            .rows
            .iter()
            .zip(&different.rows)
            .any(|(x, y)| !x.same_ignoring_wall_time(y)));
    }

    #[test]
    fn trials_are_paired_across_axis_values() {
        let reference = small_reference();
        let result = run_sweep(&reference, &small_sweep_config()).unwrap();
        for t in 0..3 {
            assert_eq!(result.rows[t].seed, result.rows[3 + t].seed);
        }
        assert_ne!(result.rows[0].seed, result.rows[1].seed);
    }

    #[test]
    fn zero_window_solver_never_reports_speedup() {
        let reference = small_reference();
        let cfg = SweepConfig {
            solver: AaConfig {
                history_limit: 0,
                ..AaConfig::default()
            },
            ..small_sweep_config()
        };
        let result = run_sweep(&reference, &cfg).unwrap();
        for row in &result.rows {
            assert_eq!(row.speedup, Some(0.0));
            assert_eq!(row.err_improvement, Some(0.0));
            assert_eq!(row.iters_picard, row.iters_aa);
        }
    }

    #[test]
    fn single_side_modes_leave_other_columns_empty() {
        let reference = small_reference();
        let cfg = SweepConfig {
            mode: RunMode::PicardOnly,
            trials: 2,
            values: vec![5.0],
            ..SweepConfig::default()
        };
        let result = run_sweep(&reference, &cfg).unwrap();
        for row in &result.rows {
            assert!(row.iters_picard.is_some());
            assert!(row.iters_aa.is_none());
            assert!(row.speedup.is_none());
        }
        assert!(result.summaries[0].stats.is_none());
    }

    #[test]
    fn degenerate_reference_fails_every_trial() {
        let line: Vec<Point3<f64>> = (0..100)
            .map(|i| Point3::new(i as f64 * 0.01, 0.0, 0.0))
            .collect();
        let reference = PointCloud::from_points(line).unwrap();
        let cfg = SweepConfig {
            values: vec![5.0],
            trials: 2,
            ..SweepConfig::default()
        };
        assert!(matches!(
            run_sweep(&reference, &cfg),
            Err(Error::NoSuccessfulTrials)
        ));
    }

    #[test]
    fn subsampling_the_reference_is_applied_once() {
        let reference = make_test_shape(TestShape::BunnyProxy, 800, 3).unwrap();
        let cfg = SweepConfig {
            subsample_to: Some(200),
            values: vec![5.0],
            trials: 1,
            ..SweepConfig::default()
        };
        let result = run_sweep(&reference, &cfg).unwrap();
        assert!(result.rows[0].is_paired());
    }

    #[test]
    fn config_validation_rejects_bad_sweeps() {
        let base = small_sweep_config();
        for cfg in [
            SweepConfig {
                trials: 0,
                ..base.clone()
            },
            SweepConfig {
                values: vec![],
                ..base.clone()
            },
            SweepConfig {
                values: vec![190.0],
                ..base.clone()
            },
            SweepConfig {
                axis: SweepAxis::Epsilon,
                values: vec![0.0],
                ..base.clone()
            },
            SweepConfig {
                noise_sigma: -1.0,
                ..base.clone()
            },
        ] {
            assert!(cfg.validate().is_err(), "{cfg:?} should not validate");
        }
        assert!(base.validate().is_ok());
    }

    #[test]
    fn csv_round_trip_is_exact() {
        let reference = small_reference();
        let result = run_sweep(&reference, &small_sweep_config()).unwrap();
        let text = render_csv(&result.rows);
        assert!(text.starts_with(CSV_HEADER));
        let parsed = parse_csv(&text, Path::new("<memory>")).unwrap();
        assert_eq!(parsed, result.rows, "floats must reparse bit-exactly");
        let original = summarize(&result.rows).unwrap();
        let reparsed = summarize(&parsed).unwrap();
        assert_eq!(original, reparsed);
    }

    #[test]
    fn csv_files_round_trip_through_disk() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("sweep.csv");
        let rows = vec![paired_row(0, 9, 6, 0.02, 0.019)];
        write_csv(&path, &rows).unwrap();
        assert_eq!(read_csv(&path).unwrap(), rows);
    }

    #[test]
    fn csv_parser_reports_line_numbers() {
        let origin = Path::new("rows.csv");
        let bad_header = parse_csv("nope\n", origin);
        assert!(matches!(bad_header, Err(Error::Parse { line: 1, .. })));
        let text = format!("{CSV_HEADER}\n1,2\n");
        assert!(matches!(
            parse_csv(&text, origin),
            Err(Error::Parse { line: 2, .. })
        ));
        let text = format!("{CSV_HEADER}\n10,0,1,,,,,,,,true,true,,\nx,0,1,,,,,,,,true,true,,\n");
        assert!(matches!(
            parse_csv(&text, origin),
            Err(Error::Parse { line: 3, .. })
        ));
    }

    #[test]
    fn run_pair_returns_both_records() {
        let reference = small_reference();
        let spec = MisalignSpec {
            rotation_angle_deg: 10.0,
            translation_distance: 0.0,
            noise_sigma: 0.0,
            seed: 5,
            subsample_to: None,
        };
        let (source, _) = random_misalign(&reference, &spec).unwrap();
        let (picard, aa) = run_pair(
            &source,
            &reference,
            &Pose6::IDENTITY,
            &AaConfig::default(),
        )
        .unwrap();
        let picard = picard.unwrap();
        let aa = aa.unwrap();
        assert!(picard.converged && aa.converged);
        assert!(picard.iterations >= 1 && aa.iterations >= 1);
        assert_eq!(picard.reset_count, 0);
    }

    #[test]
    fn aligned_pair_has_negligible_speedup() {
        let reference = small_reference();
        let (picard, aa) = run_pair(
            &reference,
            &reference,
            &Pose6::IDENTITY,
            &AaConfig::default(),
        )
        .unwrap();
        let picard = picard.unwrap();
        let aa = aa.unwrap();
        assert!(picard.iterations <= 3 && aa.iterations <= 3);
    }
}
