//! Anderson-accelerated registration with safety heuristics.
//!
//! The driver iterates the ICP fixed-point map exactly like `run_picard`,
//! but after each evaluation it tries to replace the next iterate with an
//! affine combination of recent images (growing the window one step at a
//! time) and keeps two safeguards in the loop:
//!
//! * **error watchdog** -- if the measured error jumped above the previous
//!   one, the history cut-off moves to the current iteration and the run
//!   restarts from the last trusted image; the evaluation only contributes
//!   its error ("empty" iteration);
//! * **weight guard** -- a window is accepted only while every weight stays
//!   within `alpha_limit` in magnitude and the newest image keeps a positive
//!   weight; the first rejected window stops the growth, keeping the last
//!   accepted combination.
//!
//! With `history_limit = 0` both safeguards and the solve are bypassed and
//! the iterate sequence is bit-for-bit the Picard one.

use std::time::Instant;

use nalgebra::DVector;

use crate::anderson::{solve_alpha, AaHistory, AlphaSolution};
use crate::cloud::PointCloud;
use crate::error::Result;
use crate::geometry::Pose6;
use crate::icp::{check_convergence, ConvergenceConfig, IcpProblem, RunRecord};
use crate::Error;

/// Parameters of the accelerated registration driver.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AaConfig {
    /// Maximum acceleration window (`0` disables acceleration entirely and
    /// reproduces the plain iteration bit for bit).
    pub history_limit: usize,
    /// Largest acceptable weight magnitude; combinations beyond it are
    /// rejected by the guard.
    pub alpha_limit: f64,
    /// Minimum error change still counted as progress.
    pub epsilon: f64,
    /// Hard cap on fixed-point evaluations.
    pub max_iterations: usize,
    /// The watchdog fires when `error > previous_error * reset_slack`.
    pub reset_slack: f64,
    /// Consecutive criterion satisfactions required in the steady regime.
    pub confirm_iterations: usize,
    /// Below this iteration index a single satisfaction already stops.
    pub early_exit_before: usize,
    /// Optional correspondence rejection cutoff.
    pub max_correspondence_distance: Option<f64>,
}

impl Default for AaConfig {
    fn default() -> Self {
        AaConfig {
            history_limit: 10,
            alpha_limit: 10.0,
            epsilon: 1e-3,
            max_iterations: 100,
            reset_slack: 1.0,
            confirm_iterations: 2,
            early_exit_before: 4,
            max_correspondence_distance: None,
        }
    }
}

impl AaConfig {
    /// The stopping protocol shared with the plain driver.
    pub fn convergence(&self) -> ConvergenceConfig {
        ConvergenceConfig {
            epsilon: self.epsilon,
            max_iterations: self.max_iterations,
            confirm_iterations: self.confirm_iterations,
            early_exit_before: self.early_exit_before,
            max_correspondence_distance: self.max_correspondence_distance,
        }
    }

    pub fn validate(&self) -> Result<()> {
        self.convergence().validate()?;
        if !(self.alpha_limit.is_finite() && self.alpha_limit > 0.0) {
            return Err(Error::InvalidArgument(
                "alpha_limit must be finite and positive".into(),
            ));
        }
        if !(self.reset_slack.is_finite() && self.reset_slack > 0.0) {
            return Err(Error::InvalidArgument(
                "reset_slack must be finite and positive".into(),
            ));
        }
        Ok(())
    }
}

/// Error-watchdog decision: restart history when the freshly measured error
/// exceeds the previous one by more than the slack factor.
pub fn should_reset(error: f64, previous_error: f64, reset_slack: f64) -> bool {
    error > previous_error * reset_slack
}

/// Weight guard: every weight bounded by `alpha_limit` in magnitude and a
/// strictly positive weight on the newest image.
pub fn alpha_within_limits(solution: &AlphaSolution, alpha_limit: f64) -> bool {
    solution.alphas.iter().all(|a| a.abs() <= alpha_limit)
        && solution.alphas.first().is_some_and(|a| *a > 0.0)
}

pub(crate) struct Acceleration {
    pub history_limit: usize,
    pub alpha_limit: f64,
    pub reset_slack: f64,
}

fn pose_vec(p: &Pose6) -> DVector<f64> {
    DVector::from_column_slice(&p.to_array())
}

fn vec_pose(v: &DVector<f64>) -> Pose6 {
    Pose6::from_array([v[0], v[1], v[2], v[3], v[4], v[5]])
}

/// The iteration engine both registration drivers share. `accel = None`
/// (or a zero window) is the plain Picard iteration.
pub(crate) fn run_fixed_point(
    problem: &IcpProblem,
    u0: &Pose6,
    conv: &ConvergenceConfig,
    accel: Option<Acceleration>,
) -> Result<RunRecord> {
    let start = Instant::now();
    let mut poses = vec![*u0];
    let mut errors: Vec<f64> = Vec::new();
    let mut reset_count = 0usize;
    let mut converged = false;

    if conv.max_iterations == 0 {
        return Ok(RunRecord {
            final_pose: *u0,
            iterations: 0,
            errors,
            poses,
            reset_count,
            converged,
            wall_time: start.elapsed(),
        });
    }

    let accel = accel.filter(|a| a.history_limit >= 1);
    let mut history = accel.as_ref().map(|a| AaHistory::new(a.history_limit));

    let first = problem.step(u0)?;
    errors.push(first.error);
    if let Some(h) = history.as_mut() {
        h.push(0, pose_vec(u0), pose_vec(&first.next_pose), first.error);
    }
    // Image of the previous iteration, the restart point for the watchdog.
    let mut previous_image = first.next_pose;
    let mut current = first.next_pose;
    poses.push(current);

    for n in 1..conv.max_iterations {
        let step = problem.step(&current)?;
        errors.push(step.error);
        let image = step.next_pose;

        if let (Some(a), Some(h)) = (accel.as_ref(), history.as_mut()) {
            if should_reset(errors[n], errors[n - 1], a.reset_slack) {
                // "Empty" iteration: keep the error, move the cut-off, and
                // restart from the last trusted image. No convergence check.
                reset_count += 1;
                h.reset(n);
                h.push(n, pose_vec(&current), pose_vec(&image), step.error);
                current = previous_image;
                poses.push(current);
                previous_image = image;
                continue;
            }

            h.push(n, pose_vec(&current), pose_vec(&image), step.error);
            let mut next = image;
            for window in 1..=h.usable_window() {
                let residuals = h.window_residuals(window)?;
                let solution = solve_alpha(&residuals)?;
                if !alpha_within_limits(&solution, a.alpha_limit) {
                    break;
                }
                // Safety contract of every accepted jump, kept checked in
                // release builds as well.
                assert!(
                    solution.alphas.first().is_some_and(|x| *x > 0.0)
                        && solution.alphas.iter().all(|x| x.abs() <= a.alpha_limit),
                    "accepted combination violates the weight guard"
                );
                next = vec_pose(&h.combine_images(&solution.alphas)?);
            }
            previous_image = image;
            current = next;
        } else {
            previous_image = image;
            current = image;
        }

        poses.push(current);
        if check_convergence(&errors, n, conv) {
            converged = true;
            break;
        }
    }

    Ok(RunRecord {
        final_pose: current,
        iterations: errors.len(),
        errors,
        poses,
        reset_count,
        converged,
        wall_time: start.elapsed(),
    })
}

/// Anderson-accelerated registration of `source` onto `reference` starting
/// from `u0`, under the same stopping protocol as [`crate::run_picard`].
pub fn run_aa_icp(
    source: &PointCloud,
    reference: &PointCloud,
    u0: &Pose6,
    cfg: &AaConfig,
) -> Result<RunRecord> {
    cfg.validate()?;
    let problem = IcpProblem::new(source, reference)?
        .with_max_distance(cfg.max_correspondence_distance)?;
    run_aa_icp_on(&problem, u0, cfg)
}

/// Accelerated registration on a prebuilt problem (lets callers share one
/// neighbor index across runs).
pub(crate) fn run_aa_icp_on(
    problem: &IcpProblem,
    u0: &Pose6,
    cfg: &AaConfig,
) -> Result<RunRecord> {
    run_fixed_point(
        problem,
        u0,
        &cfg.convergence(),
        Some(Acceleration {
            history_limit: cfg.history_limit,
            alpha_limit: cfg.alpha_limit,
            reset_slack: cfg.reset_slack,
        }),
    )
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::icp::run_picard;
    use crate::synth::{make_test_shape, random_misalign, MisalignSpec, TestShape};

    fn guard(alphas: &[f64]) -> AlphaSolution {
        AlphaSolution {
            alphas: alphas.to_vec(),
            residual_norm: 0.0,
        }
    }

    #[test]
    fn weight_guard_accepts_and_rejects() {
        assert!(alpha_within_limits(&guard(&[0.2, 0.9]), 10.0));
        assert!(!alpha_within_limits(&guard(&[12.0, -11.0]), 10.0));
        assert!(!alpha_within_limits(&guard(&[-0.2, 1.2]), 10.0));
        // Boundary: exactly at the limit passes, zero first weight fails.
        assert!(alpha_within_limits(&guard(&[10.0, -9.0]), 10.0));
        assert!(!alpha_within_limits(&guard(&[0.0, 1.0]), 10.0));
    }

    #[test]
    fn watchdog_fires_only_above_slack() {
        assert!(!should_reset(1.0, 1.0, 1.0));
        assert!(should_reset(1.0 + 1e-9, 1.0, 1.0));
        assert!(!should_reset(1.4, 1.0, 1.5));
        assert!(should_reset(1.6, 1.0, 1.5));
        assert!(!should_reset(0.5, 1.0, 1.0));
    }

    #[test]
    fn config_validation_rejects_bad_values() {
        for cfg in [
            AaConfig {
                alpha_limit: 0.0,
                ..AaConfig::default()
            },
            AaConfig {
                epsilon: -1.0,
                ..AaConfig::default()
            },
            AaConfig {
                reset_slack: f64::NAN,
                ..AaConfig::default()
            },
            AaConfig {
                confirm_iterations: 0,
                ..AaConfig::default()
            },
            AaConfig {
                max_correspondence_distance: Some(0.0),
                ..AaConfig::default()
            },
        ] {
            assert!(cfg.validate().is_err(), "{cfg:?} should not validate");
        }
        assert!(AaConfig::default().validate().is_ok());
    }

    fn trial_pair() -> (crate::PointCloud, crate::PointCloud) {
        let reference = make_test_shape(TestShape::BunnyProxy, 600, 9).unwrap();
        let spec = MisalignSpec {
            rotation_angle_deg: 10.0,
            translation_distance: 0.05,
            noise_sigma: 0.0,
            seed: 4,
            subsample_to: None,
        };
        let (source, _) = random_misalign(&reference, &spec).unwrap();
        (source, reference)
    }

    #[test]
    fn zero_history_reproduces_picard_bit_for_bit() {
        let (source, reference) = trial_pair();
        let cfg = AaConfig {
            history_limit: 0,
            ..AaConfig::default()
        };
        let aa = run_aa_icp(&source, &reference, &Pose6::IDENTITY, &cfg).unwrap();
        let picard = run_picard(&source, &reference, &Pose6::IDENTITY, &cfg.convergence()).unwrap();
        assert_eq!(aa.iterations, picard.iterations);
        assert_eq!(aa.reset_count, 0);
        assert_eq!(aa.poses.len(), picard.poses.len());
        for (a, p) in aa.poses.iter().zip(&picard.poses) {
            for (x, y) in a.to_array().iter().zip(p.to_array().iter()) {
                assert_eq!(x.to_bits(), y.to_bits());
            }
        }
        for (a, p) in aa.errors.iter().zip(&picard.errors) {
            assert_eq!(a.to_bits(), p.to_bits());
        }
    }

    #[test]
    fn accelerated_run_tracks_record_invariants() {
        let (source, reference) = trial_pair();
        let cfg = AaConfig::default();
        let record = run_aa_icp(&source, &reference, &Pose6::IDENTITY, &cfg).unwrap();
        assert_eq!(record.errors.len(), record.iterations);
        assert_eq!(record.poses.len(), record.iterations + 1);
        assert!(record.iterations <= cfg.max_iterations);
        assert!(record.converged);
        assert_eq!(
            record.poses.last().unwrap().to_array(),
            record.final_pose.to_array()
        );
        // The safeguards must never leave the run worse than it started.
        assert!(record.final_error().unwrap() <= record.errors[0]);
    }

    #[test]
    fn aligned_pair_stops_early_for_both_drivers() {
        let reference = make_test_shape(TestShape::SphereIsh, 400, 12).unwrap();
        let cfg = AaConfig::default();
        let aa = run_aa_icp(&reference, &reference, &Pose6::IDENTITY, &cfg).unwrap();
        let picard =
            run_picard(&reference, &reference, &Pose6::IDENTITY, &cfg.convergence()).unwrap();
        assert!(aa.converged && picard.converged);
        assert!(aa.iterations <= 3);
        assert!(picard.iterations <= 3);
        let diff = (aa.final_error().unwrap() - picard.final_error().unwrap()).abs();
        assert!(diff < 1e-9);
    }

    #[test]
    fn paranoid_watchdog_degenerates_to_delayed_picard() {
        // With slack ~0 every iteration looks like a regression, so the run
        // performs only "empty" iterations: history resets each step, no
        // convergence check ever fires, and the run uses the whole budget.
        let (source, reference) = trial_pair();
        let cfg = AaConfig {
            reset_slack: 1e-12,
            max_iterations: 12,
            ..AaConfig::default()
        };
        let record = run_aa_icp(&source, &reference, &Pose6::IDENTITY, &cfg).unwrap();
        assert_eq!(record.iterations, 12);
        assert!(!record.converged);
        assert_eq!(record.reset_count, 11);
        // u^{n+1} = g^{n-1} makes iterate 2 revisit iterate 1.
        assert_eq!(
            record.poses[2].to_array(),
            record.poses[1].to_array()
        );
    }

    #[test]
    fn zero_iteration_budget_returns_start_pose() {
        let (source, reference) = trial_pair();
        let cfg = AaConfig {
            max_iterations: 0,
            ..AaConfig::default()
        };
        let start = Pose6::new(0.1, 0.0, 0.0, 0.0, 0.0, 0.0);
        let record = run_aa_icp(&source, &reference, &start, &cfg).unwrap();
        assert_eq!(record.iterations, 0);
        assert!(record.errors.is_empty());
        assert_eq!(record.final_pose, start);
        assert!(!record.converged);
    }
}
