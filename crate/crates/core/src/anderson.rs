//! Anderson acceleration for fixed-point iterations on `R^d`.
//!
//! Given a map `G` with iterates `u^n`, images `g^n = G(u^n)` and residuals
//! `f^n = g^n - u^n`, an accelerated step replaces the next iterate by an
//! affine combination of recent images, `sum_j alpha_j g^{n-j}`, where the
//! weights minimize the norm of the same combination of residuals subject to
//! summing to one. Weights are indexed most-recent-first: `alphas[0]` always
//! belongs to the newest image.
//!
//! This module is geometry-agnostic; the registration driver feeds it poses
//! flattened to vectors, and the tests feed it arbitrary maps.

use std::collections::VecDeque;

use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};

/// Relative singular-value threshold for rank truncation in the least-squares
/// solve; below it, directions are dropped and the minimum-norm solution is
/// returned.
const RANK_TRUNCATION: f64 = 1e-13;

/// One remembered iteration of a fixed-point run.
#[derive(Debug, Clone)]
pub struct AaEntry {
    /// Iteration number the entry was recorded at.
    pub index: usize,
    pub u: DVector<f64>,
    pub g: DVector<f64>,
    /// Residual `g - u`.
    pub f: DVector<f64>,
    pub error: f64,
}

/// Sliding window of recent iterations plus the history cut-off cursor.
///
/// The buffer keeps at most `limit + 1` entries (enough for a window of
/// `limit` plus the current iteration). The cursor marks the oldest iteration
/// still trusted; entries recorded before it never participate in a solve
/// again, and the cursor itself only moves forward.
#[derive(Debug, Clone)]
pub struct AaHistory {
    entries: VecDeque<AaEntry>,
    cursor: usize,
    limit: usize,
}

impl AaHistory {
    /// `limit` is the maximum window width (the `m` of AA(m)).
    pub fn new(limit: usize) -> Self {
        AaHistory {
            entries: VecDeque::with_capacity(limit + 2),
            cursor: 0,
            limit,
        }
    }

    pub fn limit(&self) -> usize {
        self.limit
    }

    pub fn cursor(&self) -> usize {
        self.cursor
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    /// Records iteration `index`. Entries must arrive in order; the oldest
    /// entry is evicted once the buffer exceeds `limit + 1`.
    pub fn push(&mut self, index: usize, u: DVector<f64>, g: DVector<f64>, error: f64) {
        debug_assert!(
            self.entries.back().is_none_or(|e| e.index + 1 == index),
            "history entries must be recorded consecutively"
        );
        let f = &g - &u;
        self.entries.push_back(AaEntry {
            index,
            u,
            g,
            f,
            error,
        });
        while self.entries.len() > self.limit + 1 {
            self.entries.pop_front();
        }
    }

    /// Moves the cut-off cursor forward to iteration `n`. Panics if that
    /// would move it backward: resets only ever discard older history.
    pub fn reset(&mut self, n: usize) {
        assert!(
            n >= self.cursor,
            "history cursor must be non-decreasing ({} -> {n})",
            self.cursor
        );
        self.cursor = n;
    }

    pub fn latest(&self) -> Option<&AaEntry> {
        self.entries.back()
    }

    /// Entry `j` steps behind the latest one.
    pub fn entry_back(&self, j: usize) -> Option<&AaEntry> {
        self.entries.len().checked_sub(j + 1).and_then(|i| self.entries.get(i))
    }

    /// Widest usable window for the latest iteration `n`: bounded by the
    /// configured limit, by what is still buffered, and by the cursor
    /// (`n - cursor` entries from iteration `cursor` onward).
    pub fn usable_window(&self) -> usize {
        match self.latest() {
            None => 0,
            Some(e) => self
                .limit
                .min(self.entries.len() - 1)
                .min(e.index - self.cursor.min(e.index)),
        }
    }

    /// Residuals `f^n, f^{n-1}, ..., f^{n-window}`, most recent first.
    pub fn window_residuals(&self, window: usize) -> Result<Vec<DVector<f64>>> {
        if window > self.usable_window() {
            return Err(Error::InvalidArgument(format!(
                "window {window} exceeds usable history {}",
                self.usable_window()
            )));
        }
        Ok((0..=window)
            .map(|j| self.entry_back(j).expect("bounded by usable_window").f.clone())
            .collect())
    }

    /// Affine combination of images with most-recent-first weights.
    pub fn combine_images(&self, alphas: &[f64]) -> Result<DVector<f64>> {
        if alphas.is_empty() || alphas.len() > self.entries.len() {
            return Err(Error::InvalidArgument(
                "weight count does not match buffered history".into(),
            ));
        }
        let mut acc = DVector::zeros(self.latest().expect("non-empty").g.len());
        for (j, &a) in alphas.iter().enumerate() {
            acc += &self.entry_back(j).expect("checked above").g * a;
        }
        Ok(acc)
    }
}

/// Weights of one accelerated step, most recent first, plus the norm of the
/// combined residual they achieve.
#[derive(Debug, Clone, PartialEq)]
pub struct AlphaSolution {
    pub alphas: Vec<f64>,
    pub residual_norm: f64,
}

impl AlphaSolution {
    pub fn sum(&self) -> f64 {
        self.alphas.iter().sum()
    }
}

/// Solves for the affine weights minimizing the combined residual.
///
/// `residuals` are ordered most recent first; the constrained problem is
/// reduced to an unconstrained least squares over the trailing weights by
/// substituting `alphas[0] = 1 - sum(rest)`:
///
/// ```text
/// minimize || f0 + sum_j x_j (f_j - f0) ||
/// ```
///
/// solved through an orthogonal factorization (SVD) so near-collinear
/// residual histories stay stable; rank-deficient systems yield the
/// minimum-norm solution. Needs at least two residuals.
pub fn solve_alpha(residuals: &[DVector<f64>]) -> Result<AlphaSolution> {
    if residuals.len() < 2 {
        return Err(Error::InvalidArgument(
            "alpha solve needs at least two residuals".into(),
        ));
    }
    let dim = residuals[0].len();
    if residuals.iter().any(|r| r.len() != dim) {
        return Err(Error::InvalidArgument(
            "residuals must share one dimension".into(),
        ));
    }
    let f0 = &residuals[0];
    let width = residuals.len() - 1;
    let differences = DMatrix::from_fn(dim, width, |r, c| residuals[c + 1][r] - f0[r]);

    let svd = differences.clone().svd(true, true);
    let max_sv = svd.singular_values.iter().cloned().fold(0.0, f64::max);
    let x = svd
        .solve(&(-f0), max_sv * RANK_TRUNCATION)
        .map_err(|e| Error::InvalidArgument(format!("alpha least-squares failed: {e}")))?;

    let trailing_sum: f64 = x.iter().sum();
    let mut alphas = Vec::with_capacity(residuals.len());
    alphas.push(1.0 - trailing_sum);
    alphas.extend(x.iter().copied());

    let residual_norm = (f0 + differences * x).norm();
    let solution = AlphaSolution {
        alphas,
        residual_norm,
    };
    // The affine constraint holds by construction; keep it checked on every
    // solve since downstream safety arguments rely on it.
    assert!(
        (solution.sum() - 1.0).abs() <= 1e-12,
        "alpha weights drifted off the affine constraint: sum = {}",
        solution.sum()
    );
    Ok(solution)
}

/// One accelerated iterate from buffered history: solves for the weights of
/// the given window and combines the images. `window = 0` degenerates to the
/// plain fixed-point update (the latest image).
pub fn anderson_step(history: &AaHistory, window: usize) -> Result<DVector<f64>> {
    let latest = history.latest().ok_or_else(|| {
        Error::InvalidArgument("anderson_step needs at least one recorded iteration".into())
    })?;
    if window == 0 {
        return Ok(latest.g.clone());
    }
    let residuals = history.window_residuals(window)?;
    let solution = solve_alpha(&residuals)?;
    history.combine_images(&solution.alphas)
}

/// Trace of a plain (non-ICP) fixed-point run.
#[derive(Debug, Clone)]
pub struct FixedPointTrace {
    /// `u^0 ..= u^last`.
    pub iterates: Vec<DVector<f64>>,
    /// `||f^n||` per evaluation, aligned with iterate indices.
    pub residual_norms: Vec<f64>,
    pub converged: bool,
}

/// Anderson-accelerated fixed-point iteration on an arbitrary map, with an
/// optional window cap (`None` keeps the whole history).
///
/// Stops when the residual norm drops below `tolerance` or after
/// `max_iterations` evaluations of the map; errors with [`Error::Diverged`]
/// if an image or combined iterate stops being finite. No safeguards are
/// applied here -- on maps that are not contractions this may diverge, which
/// is precisely what the guarded registration driver exists to prevent.
pub fn run_anderson_plain<G>(
    mut g: G,
    u0: &DVector<f64>,
    window_limit: Option<usize>,
    max_iterations: usize,
    tolerance: f64,
) -> Result<FixedPointTrace>
where
    G: FnMut(&DVector<f64>) -> DVector<f64>,
{
    let mut iterates = vec![u0.clone()];
    let mut residual_norms = Vec::new();
    if max_iterations == 0 {
        return Ok(FixedPointTrace {
            iterates,
            residual_norms,
            converged: false,
        });
    }

    let mut images: Vec<DVector<f64>> = Vec::new();
    let mut residuals: Vec<DVector<f64>> = Vec::new();

    let g0 = g(u0);
    ensure_finite(&g0, 0)?;
    let f0 = &g0 - u0;
    residual_norms.push(f0.norm());
    images.push(g0.clone());
    residuals.push(f0);
    if residual_norms[0] < tolerance {
        return Ok(FixedPointTrace {
            iterates,
            residual_norms,
            converged: true,
        });
    }
    iterates.push(g0);

    let mut converged = false;
    for n in 1..max_iterations {
        let u_n = iterates.last().expect("never empty");
        let g_n = g(u_n);
        ensure_finite(&g_n, n)?;
        let f_n = &g_n - u_n;
        residual_norms.push(f_n.norm());
        images.push(g_n);
        residuals.push(f_n);
        if residual_norms[n] < tolerance {
            converged = true;
            break;
        }

        let window = window_limit.unwrap_or(n).min(n);
        let u_next = if window == 0 {
            images[n].clone()
        } else {
            let recent: Vec<DVector<f64>> =
                (0..=window).map(|j| residuals[n - j].clone()).collect();
            let solution = solve_alpha(&recent)?;
            let mut acc = DVector::zeros(u0.len());
            for (j, &a) in solution.alphas.iter().enumerate() {
                acc += &images[n - j] * a;
            }
            acc
        };
        if !u_next.iter().all(|v| v.is_finite()) {
            return Err(Error::Diverged(n));
        }
        iterates.push(u_next);
    }

    Ok(FixedPointTrace {
        iterates,
        residual_norms,
        converged,
    })
}

/// Plain Picard iteration on an arbitrary map, same trace and stopping rule
/// as [`run_anderson_plain`]. Kept separate so comparisons have an
/// acceleration-free baseline.
pub fn run_picard_plain<G>(
    g: G,
    u0: &DVector<f64>,
    max_iterations: usize,
    tolerance: f64,
) -> Result<FixedPointTrace>
where
    G: FnMut(&DVector<f64>) -> DVector<f64>,
{
    run_anderson_plain(g, u0, Some(0), max_iterations, tolerance)
}

fn ensure_finite(v: &DVector<f64>, step: usize) -> Result<()> {
    if v.iter().all(|x| x.is_finite()) {
        Ok(())
    } else {
        Err(Error::Diverged(step))
    }
}
