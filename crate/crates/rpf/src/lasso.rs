//! L1-penalized least squares by cyclic coordinate descent.
//!
//! Solves `min_u (1/n) ||e - phi u||_2^2 + 2 r ||u||_1`. The coordinate
//! update is soft-thresholding against the per-coordinate curvature
//! `(2/n) ||phi_i||^2`; regularization paths are computed by warm starts
//! down a decreasing grid. Optimality is certified through the KKT
//! conditions: the Dantzig constraint `||(1/n) phi^T (e - phi u)||_inf <= r`
//! plus stationarity on the support.
//!
//! The minimizer need not be unique; the solver returns the coordinate
//! descent fixed point from the zero (or warm) start and certifies only
//! the KKT conditions.

use thiserror::Error;

use crate::design::DesignMatrix;
use crate::scalar::Real;

/// Default convergence tolerance on coordinate changes.
pub const DEFAULT_TOL: f64 = 1e-9;
/// Default sweep cap.
pub const DEFAULT_MAX_ITER: usize = 100_000;
/// Default number of grid points for a regularization path.
pub const DEFAULT_GRID_POINTS: usize = 60;
/// Default ratio `r_max / r_min` for a regularization path.
pub const DEFAULT_GRID_RATIO: f64 = 1e3;

#[derive(Debug, Error)]
pub enum LassoError {
    #[error("observations have length {got}, design has {expected} rows")]
    LengthMismatch { expected: usize, got: usize },
    #[error("penalty must be positive and finite, got {got}")]
    BadPenalty { got: f64 },
    #[error("tolerance must be positive, got {got}")]
    BadTolerance { got: f64 },
    #[error("grid point {index}: values must be positive and strictly decreasing")]
    GridNotDecreasing { index: usize },
    #[error("grid is empty")]
    EmptyGrid,
    #[error("candidate solution has length {got}, expected {expected}")]
    BadCandidate { expected: usize, got: usize },
}

/// One L1-penalized regression instance.
#[derive(Clone, Copy, Debug)]
pub struct LassoProblem<'a, F> {
    observations: &'a [F],
    design: &'a DesignMatrix,
    penalty: F,
}

impl<'a, F: Real> LassoProblem<'a, F> {
    pub fn new(
        observations: &'a [F],
        design: &'a DesignMatrix,
        penalty: F,
    ) -> Result<Self, LassoError> {
        if observations.len() != design.n() {
            return Err(LassoError::LengthMismatch {
                expected: design.n(),
                got: observations.len(),
            });
        }
        if !(penalty > F::zero()) || !penalty.is_finite() {
            return Err(LassoError::BadPenalty {
                got: penalty.to_f64().unwrap_or(f64::NAN),
            });
        }
        Ok(Self {
            observations,
            design,
            penalty,
        })
    }

    pub fn observations(&self) -> &[F] {
        self.observations
    }

    pub fn design(&self) -> &DesignMatrix {
        self.design
    }

    pub fn penalty(&self) -> F {
        self.penalty
    }
}

/// A coordinate-descent fixed point with its optimality diagnostics.
#[derive(Clone, Debug, PartialEq)]
pub struct LassoSolution<F> {
    pub s_hat: Vec<F>,
    /// Completed coordinate sweeps.
    pub iterations: usize,
    /// `(1/n) ||e - phi s_hat||^2 + 2 r ||s_hat||_1`, recomputed from
    /// `s_hat` at exit.
    pub objective: F,
    /// Maximal violation of the stationarity conditions.
    pub kkt_residual: F,
    pub converged: bool,
}

/// Outcome of [`kkt_check`].
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct KktReport<F> {
    /// `||(1/n) phi^T (e - phi u)||_inf <= r + tol`.
    pub dantzig_ok: bool,
    /// `|(1/n) phi_i^T (e - phi u) - r sign(u_i)| <= tol` on the support.
    pub support_stationarity_ok: bool,
    pub max_violation: F,
}

/// `r_max = ||(1/n) phi^T e||_inf`: the null solution is optimal for any
/// penalty at or above this.
pub fn r_max<F: Real>(observations: &[F], design: &DesignMatrix) -> F {
    let n = F::cast(design.n());
    let mut worst = F::zero();
    for i in 0..design.p() {
        let mut dot = F::zero();
        for j in 0..design.n() {
            dot += F::cast(design.entry(j, i)) * observations[j];
        }
        worst = worst.max((dot / n).abs());
    }
    worst
}

/// Log-spaced decreasing grid from `top` down to `top / ratio`.
pub fn log_grid<F: Real>(top: F, ratio: F, points: usize) -> Vec<F> {
    if points == 0 {
        return Vec::new();
    }
    if points == 1 {
        return vec![top];
    }
    let step = ratio.ln() / F::cast(points - 1);
    (0..points)
        .map(|k| top * (-step * F::cast(k)).exp())
        .collect()
}

fn soft_threshold<F: Real>(z: F, r: F) -> F {
    if z > r {
        z - r
    } else if z < -r {
        z + r
    } else {
        F::zero()
    }
}

struct Columns<F> {
    cols: Vec<Vec<F>>,
    /// `(1/n) ||phi_i||^2`
    sq_over_n: Vec<F>,
    n: F,
}

impl<F: Real> Columns<F> {
    fn from_design(design: &DesignMatrix) -> Self {
        let n = F::cast(design.n());
        let cols: Vec<Vec<F>> = (0..design.p()).map(|i| design.column(i)).collect();
        let sq_over_n = cols
            .iter()
            .map(|c| c.iter().map(|&v| v * v).sum::<F>() / n)
            .collect();
        Self { cols, sq_over_n, n }
    }

    fn residual(&self, observations: &[F], s: &[F], out: &mut Vec<F>) {
        out.clear();
        out.extend_from_slice(observations);
        for (i, col) in self.cols.iter().enumerate() {
            if s[i] != F::zero() {
                for (r, &c) in out.iter_mut().zip(col) {
                    *r -= s[i] * c;
                }
            }
        }
    }

    fn objective(&self, observations: &[F], s: &[F], r: F, scratch: &mut Vec<F>) -> F {
        self.residual(observations, s, scratch);
        let fit: F = scratch.iter().map(|&v| v * v).sum::<F>() / self.n;
        let l1: F = s.iter().map(|v| v.abs()).sum();
        fit + F::cast(2.0) * r * l1
    }

    /// Maximal stationarity violation at `s` (fresh residual).
    fn kkt_residual(&self, observations: &[F], s: &[F], r: F, scratch: &mut Vec<F>) -> F {
        self.residual(observations, s, scratch);
        let mut worst = F::zero();
        for (i, col) in self.cols.iter().enumerate() {
            let corr = col.iter().zip(scratch.iter()).map(|(&c, &v)| c * v).sum::<F>() / self.n;
            let violation = if s[i] == F::zero() {
                (corr.abs() - r).max(F::zero())
            } else {
                (corr - r * s[i].signum()).abs()
            };
            worst = worst.max(violation);
        }
        worst
    }
}

fn solve_inner<F: Real>(
    problem: &LassoProblem<'_, F>,
    tol: F,
    max_iter: usize,
    start: Option<&[F]>,
    mut trace: Option<&mut Vec<F>>,
) -> Result<LassoSolution<F>, LassoError> {
    if !(tol > F::zero()) {
        return Err(LassoError::BadTolerance {
            got: tol.to_f64().unwrap_or(f64::NAN),
        });
    }
    let design = problem.design;
    let e = problem.observations;
    let r = problem.penalty;
    let p = design.p();
    let cols = Columns::from_design(design);

    let mut s = match start {
        Some(init) => {
            if init.len() != p {
                return Err(LassoError::BadCandidate {
                    expected: p,
                    got: init.len(),
                });
            }
            init.to_vec()
        }
        None => vec![F::zero(); p],
    };
    let mut residual = Vec::with_capacity(e.len());
    cols.residual(e, &s, &mut residual);
    let mut scratch = Vec::with_capacity(e.len());

    let mut sweeps = 0;
    let mut converged = false;
    let mut kkt = F::infinity();
    while sweeps < max_iter {
        let mut max_delta = F::zero();
        for i in 0..p {
            let curvature = cols.sq_over_n[i];
            if curvature == F::zero() {
                // a zero column never enters the model
                s[i] = F::zero();
                continue;
            }
            let col = &cols.cols[i];
            let corr = col.iter().zip(residual.iter()).map(|(&c, &v)| c * v).sum::<F>() / cols.n;
            let target = corr + curvature * s[i];
            let updated = soft_threshold(target, r) / curvature;
            let delta = updated - s[i];
            if delta != F::zero() {
                for (res, &c) in residual.iter_mut().zip(col) {
                    *res -= delta * c;
                }
                s[i] = updated;
                max_delta = max_delta.max(delta.abs());
            }
        }
        sweeps += 1;
        // fresh residual each sweep so incremental drift cannot accumulate
        cols.residual(e, &s, &mut residual);
        if let Some(trace) = trace.as_deref_mut() {
            trace.push(cols.objective(e, &s, r, &mut scratch));
        }
        let scale = F::one().max(s.iter().fold(F::zero(), |m, v| m.max(v.abs())));
        if max_delta <= tol * scale {
            // declare convergence only once the certificate holds too
            kkt = cols.kkt_residual(e, &s, r, &mut scratch);
            if kkt <= F::cast(10.0) * tol {
                converged = true;
                break;
            }
        }
    }
    if !converged {
        kkt = cols.kkt_residual(e, &s, r, &mut scratch);
    }
    let objective = cols.objective(e, &s, r, &mut scratch);
    Ok(LassoSolution {
        s_hat: s,
        iterations: sweeps,
        objective,
        kkt_residual: kkt,
        converged,
    })
}

/// Solves one instance from the zero start.
///
/// Hitting `max_iter` is reported through `converged = false`, not an
/// error.
pub fn solve<F: Real>(
    problem: &LassoProblem<'_, F>,
    tol: F,
    max_iter: usize,
) -> Result<LassoSolution<F>, LassoError> {
    solve_inner(problem, tol, max_iter, None, None)
}

/// Like [`solve`], additionally returning the objective value after each
/// sweep (non-increasing by construction; asserted in the test suites).
pub fn solve_traced<F: Real>(
    problem: &LassoProblem<'_, F>,
    tol: F,
    max_iter: usize,
) -> Result<(LassoSolution<F>, Vec<F>), LassoError> {
    let mut trace = Vec::new();
    let solution = solve_inner(problem, tol, max_iter, None, Some(&mut trace))?;
    Ok((solution, trace))
}

/// Warm-started solves down a strictly decreasing penalty grid.
///
/// Grid points at or above `r_max` keep the exact zero solution.
pub fn path<F: Real>(
    observations: &[F],
    design: &DesignMatrix,
    r_grid: &[F],
    tol: F,
    max_iter: usize,
) -> Result<Vec<LassoSolution<F>>, LassoError> {
    if r_grid.is_empty() {
        return Err(LassoError::EmptyGrid);
    }
    for (index, pair) in r_grid.windows(2).enumerate() {
        if !(pair[1] < pair[0]) {
            return Err(LassoError::GridNotDecreasing { index: index + 1 });
        }
    }
    if !(r_grid[r_grid.len() - 1] > F::zero()) {
        return Err(LassoError::GridNotDecreasing {
            index: r_grid.len() - 1,
        });
    }
    let mut solutions = Vec::with_capacity(r_grid.len());
    let mut warm: Option<Vec<F>> = None;
    for &r in r_grid {
        let problem = LassoProblem::new(observations, design, r)?;
        let solution = solve_inner(&problem, tol, max_iter, warm.as_deref(), None)?;
        warm = Some(solution.s_hat.clone());
        solutions.push(solution);
    }
    Ok(solutions)
}

/// Checks the KKT certificate of a candidate solution.
pub fn kkt_check<F: Real>(
    problem: &LassoProblem<'_, F>,
    s_hat: &[F],
    tol: F,
) -> Result<KktReport<F>, LassoError> {
    let design = problem.design;
    if s_hat.len() != design.p() {
        return Err(LassoError::BadCandidate {
            expected: design.p(),
            got: s_hat.len(),
        });
    }
    let cols = Columns::from_design(design);
    let e = problem.observations;
    let r = problem.penalty;
    let mut residual = Vec::with_capacity(e.len());
    cols.residual(e, s_hat, &mut residual);
    let mut dantzig_worst = F::zero();
    let mut support_worst = F::zero();
    let mut max_violation = F::zero();
    for (i, col) in cols.cols.iter().enumerate() {
        let corr = col.iter().zip(residual.iter()).map(|(&c, &v)| c * v).sum::<F>() / cols.n;
        dantzig_worst = dantzig_worst.max(corr.abs());
        if s_hat[i] != F::zero() {
            let v = (corr - r * s_hat[i].signum()).abs();
            support_worst = support_worst.max(v);
            max_violation = max_violation.max(v);
        } else {
            max_violation = max_violation.max((corr.abs() - r).max(F::zero()));
        }
    }
    Ok(KktReport {
        dantzig_ok: dantzig_worst <= r + tol,
        support_stationarity_ok: support_worst <= tol,
        max_violation,
    })
}
