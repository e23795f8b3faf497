//! Pick-freeze Monte Carlo engine with exact evaluation accounting.
//!
//! One replication draws two independent input points `x, x'` and, for
//! each design row `j`, evaluates the model at the mixture taking frozen
//! coordinates (`phi[j][i] = 1`) from `x` and the rest from `x'`. The
//! closed-index estimator of a row is the empirical correlation-style
//! ratio of the paired outputs; signed designs use the difference of the
//! row estimator and its complement.
//!
//! The one draw of `(x, x', y)` is shared across all rows, which makes
//! the exact model-call count `(n+1) N` for binary designs and
//! `(2n+1) N` for signed ones. The engine counts calls exactly and the
//! tests audit the count with an instrumented wrapper. The reported
//! experiment arithmetic (`30 x 2 x 3000`) omits the shared `+1` term;
//! the counter here does not.

use std::collections::BTreeSet;
use std::io::{Read, Write};

use rayon::prelude::*;
use thiserror::Error;

use crate::design::{Alphabet, DesignMatrix};
use crate::model::ModelFn;
use crate::rng::{stream_rng, STREAM_MC_X, STREAM_MC_XPRIME};
use crate::scalar::Real;

/// Relative tolerance declaring the estimator denominator degenerate:
/// `den <= DEGENERATE_REL_TOL * range^2` over the paired outputs.
pub const DEGENERATE_REL_TOL: f64 = 1e-12;

#[derive(Debug, Error)]
pub enum PickFreezeError {
    #[error("Monte Carlo sample size must be at least 2, got {got}")]
    SampleSizeTooSmall { got: usize },
    #[error("design has {design_p} columns, model expects {model_p}")]
    DimensionMismatch { design_p: usize, model_p: usize },
    #[error("row {row}: denominator of the closed estimator is degenerate")]
    DegenerateVariance { row: usize },
    #[error("row {row}: complement outputs missing (closed-kind sample)")]
    MissingComplement { row: usize },
    #[error("row index {row} outside 0..{n}")]
    RowOutOfRange { row: usize, n: usize },
    #[error("variable index {index} outside 1..={p}")]
    IndexOutOfRange { index: usize, p: usize },
    #[error("binary sample dump: {reason}")]
    Dump { reason: String },
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

/// Which estimator family a sample feeds.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum SchemeKind {
    /// Closed estimators `S_F` (binary designs).
    Closed,
    /// Difference estimators `S_F - S_F^c` (signed designs).
    Delta,
}

impl SchemeKind {
    /// The kind matching a design's alphabet.
    pub fn for_design(design: &DesignMatrix) -> Self {
        match design.alphabet() {
            Alphabet::Binary => SchemeKind::Closed,
            Alphabet::Signed => SchemeKind::Delta,
        }
    }

    fn code(self) -> u64 {
        match self {
            SchemeKind::Closed => 0,
            SchemeKind::Delta => 1,
        }
    }

    fn from_code(code: u64) -> Option<Self> {
        match code {
            0 => Some(SchemeKind::Closed),
            1 => Some(SchemeKind::Delta),
            _ => None,
        }
    }
}

/// Monte Carlo configuration: sample size, seed and estimator kind.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct MonteCarloPlan {
    sample_size: usize,
    seed: u64,
    kind: SchemeKind,
}

impl MonteCarloPlan {
    pub fn new(sample_size: usize, seed: u64, kind: SchemeKind) -> Result<Self, PickFreezeError> {
        if sample_size < 2 {
            return Err(PickFreezeError::SampleSizeTooSmall { got: sample_size });
        }
        Ok(Self {
            sample_size,
            seed,
            kind,
        })
    }

    pub fn sample_size(&self) -> usize {
        self.sample_size
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    pub fn kind(&self) -> SchemeKind {
        self.kind
    }
}

/// The Monte Carlo realizations for one design: `y[k] = f(x_k)`,
/// `y_frozen[j][k] = f(x_k mixed by row j)` and, for delta samples,
/// the complement mixtures.
#[derive(Clone, Debug, PartialEq)]
pub struct PickFreezeSample<F> {
    pub y: Vec<F>,
    pub y_frozen: Vec<Vec<F>>,
    pub y_frozen_complement: Option<Vec<Vec<F>>>,
    /// Exact number of model evaluations spent.
    pub eval_count: u64,
    pub plan: MonteCarloPlan,
}

/// The estimator vector `E`, one entry per design row.
#[derive(Clone, Debug, PartialEq)]
pub struct EstimateVector<F> {
    pub values: Vec<F>,
    pub plan: MonteCarloPlan,
}

/// Result of the classical one-variable-at-a-time sweep.
#[derive(Clone, Debug, PartialEq)]
pub struct SweepResult<F> {
    /// `estimates[i]` is the single-index estimate of variable `i+1`.
    pub estimates: Vec<F>,
    /// Exactly `(p+1) N`: the `y` draw is shared across variables.
    pub eval_count: u64,
}

/// Runs the pick-freeze replications for every design row.
///
/// Inputs are drawn per replication from counter-based streams, so the
/// result is independent of how the loop is scheduled. Replications run
/// in parallel; the model must be pure.
pub fn simulate<F: Real, M: ModelFn<F>>(
    model: &M,
    design: &DesignMatrix,
    plan: &MonteCarloPlan,
) -> Result<PickFreezeSample<F>, PickFreezeError> {
    if design.p() != model.dim() {
        return Err(PickFreezeError::DimensionMismatch {
            design_p: design.p(),
            model_p: model.dim(),
        });
    }
    let n = design.n();
    let p = design.p();
    let big_n = plan.sample_size;
    let with_complement = plan.kind == SchemeKind::Delta;

    struct Scratch<F> {
        x: Vec<F>,
        x_prime: Vec<F>,
        mix: Vec<F>,
    }

    let per_k: Vec<(F, Vec<F>, Option<Vec<F>>)> = (0..big_n)
        .into_par_iter()
        .map_init(
            || Scratch {
                x: vec![F::zero(); p],
                x_prime: vec![F::zero(); p],
                mix: vec![F::zero(); p],
            },
            |scratch, k| {
                let mut rng_x = stream_rng(plan.seed, STREAM_MC_X, k as u64);
                let mut rng_xp = stream_rng(plan.seed, STREAM_MC_XPRIME, k as u64);
                for v in scratch.x.iter_mut() {
                    *v = F::uniform01(&mut rng_x);
                }
                for v in scratch.x_prime.iter_mut() {
                    *v = F::uniform01(&mut rng_xp);
                }
                let y = model.eval(&scratch.x);
                let mut frozen = Vec::with_capacity(n);
                let mut complement = with_complement.then(|| Vec::with_capacity(n));
                for j in 0..n {
                    let row = design.row(j);
                    for i in 0..p {
                        scratch.mix[i] = if row[i] == 1 {
                            scratch.x[i]
                        } else {
                            scratch.x_prime[i]
                        };
                    }
                    frozen.push(model.eval(&scratch.mix));
                    if let Some(comp) = complement.as_mut() {
                        for i in 0..p {
                            scratch.mix[i] = if row[i] == 1 {
                                scratch.x_prime[i]
                            } else {
                                scratch.x[i]
                            };
                        }
                        comp.push(model.eval(&scratch.mix));
                    }
                }
                (y, frozen, complement)
            },
        )
        .collect();

    let mut y = Vec::with_capacity(big_n);
    let mut y_frozen = vec![Vec::with_capacity(big_n); n];
    let mut y_frozen_complement = with_complement.then(|| vec![Vec::with_capacity(big_n); n]);
    for (yk, frozen, complement) in per_k {
        y.push(yk);
        for (j, v) in frozen.into_iter().enumerate() {
            y_frozen[j].push(v);
        }
        if let (Some(rows), Some(comp)) = (y_frozen_complement.as_mut(), complement) {
            for (j, v) in comp.into_iter().enumerate() {
                rows[j].push(v);
            }
        }
    }

    let rows_per_draw = if with_complement { 2 * n + 1 } else { n + 1 };
    Ok(PickFreezeSample {
        y,
        y_frozen,
        y_frozen_complement,
        eval_count: rows_per_draw as u64 * big_n as u64,
        plan: *plan,
    })
}

/// The closed-index estimator from paired outputs `(y_k, y^F_k)`:
/// ratio of the empirical covariance-style numerator to the pooled
/// variance denominator.
fn closed_from_pairs<F: Real>(y: &[F], y_f: &[F], row: usize) -> Result<F, PickFreezeError> {
    let n = F::cast(y.len());
    let half = F::cast(0.5);
    let mut s_yy = F::zero();
    let mut s_avg = F::zero();
    let mut s_sq = F::zero();
    let mut lo = F::infinity();
    let mut hi = F::neg_infinity();
    for (&a, &b) in y.iter().zip(y_f) {
        s_yy += a * b;
        s_avg += (a + b) * half;
        s_sq += (a * a + b * b) * half;
        lo = lo.min(a.min(b));
        hi = hi.max(a.max(b));
    }
    let mean = s_avg / n;
    let numerator = s_yy / n - mean * mean;
    let denominator = s_sq / n - mean * mean;
    let range = hi - lo;
    if denominator <= F::cast(DEGENERATE_REL_TOL) * range * range {
        return Err(PickFreezeError::DegenerateVariance { row });
    }
    Ok(numerator / denominator)
}

impl<F: Real> PickFreezeSample<F> {
    pub fn rows(&self) -> usize {
        self.y_frozen.len()
    }

    fn check_row(&self, row: usize) -> Result<(), PickFreezeError> {
        if row >= self.rows() {
            return Err(PickFreezeError::RowOutOfRange {
                row,
                n: self.rows(),
            });
        }
        Ok(())
    }

    /// Closed estimator of row `j` (0-based).
    pub fn estimate_closed(&self, row: usize) -> Result<F, PickFreezeError> {
        self.check_row(row)?;
        closed_from_pairs(&self.y, &self.y_frozen[row], row)
    }

    /// Difference estimator of row `j`: closed minus its complement.
    pub fn estimate_delta(&self, row: usize) -> Result<F, PickFreezeError> {
        self.check_row(row)?;
        let complement = self
            .y_frozen_complement
            .as_ref()
            .ok_or(PickFreezeError::MissingComplement { row })?;
        let direct = closed_from_pairs(&self.y, &self.y_frozen[row], row)?;
        let swapped = closed_from_pairs(&self.y, &complement[row], row)?;
        Ok(direct - swapped)
    }

    /// The estimator vector `E`, closed or delta per the plan kind.
    pub fn estimate_vector(&self) -> Result<EstimateVector<F>, PickFreezeError> {
        let values = (0..self.rows())
            .map(|j| match self.plan.kind {
                SchemeKind::Closed => self.estimate_closed(j),
                SchemeKind::Delta => self.estimate_delta(j),
            })
            .collect::<Result<Vec<F>, _>>()?;
        Ok(EstimateVector {
            values,
            plan: self.plan,
        })
    }

    /// Delete-1 jackknife noise scale: the per-row standard error of the
    /// row estimator, maximized over rows. Used as the plug-in `sigma`
    /// for the bound calculators.
    pub fn estimate_sigma(&self) -> Result<F, PickFreezeError> {
        let mut worst = F::zero();
        for row in 0..self.rows() {
            let se = match self.plan.kind {
                SchemeKind::Closed => jackknife_se(&self.y, &self.y_frozen[row], None, row)?,
                SchemeKind::Delta => {
                    let complement = self
                        .y_frozen_complement
                        .as_ref()
                        .ok_or(PickFreezeError::MissingComplement { row })?;
                    jackknife_se(&self.y, &self.y_frozen[row], Some(&complement[row]), row)?
                }
            };
            worst = worst.max(se);
        }
        Ok(worst)
    }

    /// Writes the binary dump: header of three little-endian `u64`
    /// (`N`, `n`, `kind`), then `y`, the frozen rows and, for delta
    /// samples, the complement rows as little-endian `f64`, row-major.
    pub fn write_binary<W: Write>(&self, mut out: W) -> Result<(), PickFreezeError> {
        let n = self.rows() as u64;
        let big_n = self.y.len() as u64;
        out.write_all(&big_n.to_le_bytes())?;
        out.write_all(&n.to_le_bytes())?;
        out.write_all(&self.plan.kind.code().to_le_bytes())?;
        let mut write_slice = |values: &[F]| -> Result<(), PickFreezeError> {
            for v in values {
                let bits = v.to_f64().unwrap_or(f64::NAN);
                out.write_all(&bits.to_le_bytes())?;
            }
            Ok(())
        };
        write_slice(&self.y)?;
        for row in &self.y_frozen {
            write_slice(row)?;
        }
        if let Some(rows) = &self.y_frozen_complement {
            for row in rows {
                write_slice(row)?;
            }
        }
        Ok(())
    }

    /// Reads a binary dump written by [`PickFreezeSample::write_binary`].
    /// The evaluation counter is reconstructed from the counting formula;
    /// `seed` is not stored and comes back as 0.
    pub fn read_binary<R: Read>(mut input: R) -> Result<Self, PickFreezeError> {
        let mut word = [0u8; 8];
        let mut read_u64 = |input: &mut R| -> Result<u64, PickFreezeError> {
            input.read_exact(&mut word)?;
            Ok(u64::from_le_bytes(word))
        };
        let big_n = read_u64(&mut input)? as usize;
        let n = read_u64(&mut input)? as usize;
        let code = read_u64(&mut input)?;
        let kind = SchemeKind::from_code(code).ok_or_else(|| PickFreezeError::Dump {
            reason: format!("unknown kind code {code}"),
        })?;
        let mut read_slice = |input: &mut R, len: usize| -> Result<Vec<F>, PickFreezeError> {
            let mut out = Vec::with_capacity(len);
            let mut buf = [0u8; 8];
            for _ in 0..len {
                input.read_exact(&mut buf)?;
                out.push(F::cast(f64::from_le_bytes(buf)));
            }
            Ok(out)
        };
        let y = read_slice(&mut input, big_n)?;
        let mut y_frozen = Vec::with_capacity(n);
        for _ in 0..n {
            y_frozen.push(read_slice(&mut input, big_n)?);
        }
        let y_frozen_complement = match kind {
            SchemeKind::Closed => None,
            SchemeKind::Delta => {
                let mut rows = Vec::with_capacity(n);
                for _ in 0..n {
                    rows.push(read_slice(&mut input, big_n)?);
                }
                Some(rows)
            }
        };
        let rows_per_draw = match kind {
            SchemeKind::Closed => n + 1,
            SchemeKind::Delta => 2 * n + 1,
        };
        Ok(Self {
            y,
            y_frozen,
            y_frozen_complement,
            eval_count: rows_per_draw as u64 * big_n as u64,
            plan: MonteCarloPlan::new(big_n, 0, kind)?,
        })
    }
}

/// Delete-1 jackknife standard error of the row estimator.
fn jackknife_se<F: Real>(
    y: &[F],
    y_f: &[F],
    y_fc: Option<&[F]>,
    row: usize,
) -> Result<F, PickFreezeError> {
    struct Sums<F> {
        yy: F,
        avg: F,
        sq: F,
    }

    fn accumulate<F: Real>(y: &[F], y_f: &[F]) -> Sums<F> {
        let half = F::cast(0.5);
        let mut s = Sums {
            yy: F::zero(),
            avg: F::zero(),
            sq: F::zero(),
        };
        for (&a, &b) in y.iter().zip(y_f) {
            s.yy += a * b;
            s.avg += (a + b) * half;
            s.sq += (a * a + b * b) * half;
        }
        s
    }

    fn loo_ratio<F: Real>(s: &Sums<F>, a: F, b: F, m: F, row: usize) -> Result<F, PickFreezeError> {
        let half = F::cast(0.5);
        let yy = s.yy - a * b;
        let avg = s.avg - (a + b) * half;
        let sq = s.sq - (a * a + b * b) * half;
        let mean = avg / m;
        let den = sq / m - mean * mean;
        if den <= F::zero() {
            return Err(PickFreezeError::DegenerateVariance { row });
        }
        Ok((yy / m - mean * mean) / den)
    }

    let n = y.len();
    let m = F::cast(n - 1);
    let direct = accumulate(y, y_f);
    let swapped = y_fc.map(|fc| accumulate(y, fc));
    let mut loo = Vec::with_capacity(n);
    for k in 0..n {
        let mut theta = loo_ratio(&direct, y[k], y_f[k], m, row)?;
        if let (Some(s), Some(fc)) = (&swapped, y_fc) {
            theta -= loo_ratio(s, y[k], fc[k], m, row)?;
        }
        loo.push(theta);
    }
    let mean: F = loo.iter().copied().sum::<F>() / F::cast(n);
    let ss: F = loo.iter().map(|&t| (t - mean) * (t - mean)).sum();
    Ok((m / F::cast(n) * ss).sqrt())
}

/// Classical single-index pick-freeze estimate of variable `index`
/// (1-based). Costs exactly `2 N` model evaluations.
pub fn estimate_single<F: Real, M: ModelFn<F>>(
    model: &M,
    index: usize,
    sample_size: usize,
    seed: u64,
) -> Result<F, PickFreezeError> {
    if sample_size < 2 {
        return Err(PickFreezeError::SampleSizeTooSmall { got: sample_size });
    }
    let p = model.dim();
    if index == 0 || index > p {
        return Err(PickFreezeError::IndexOutOfRange { index, p });
    }
    let mut x = vec![F::zero(); p];
    let mut mix = vec![F::zero(); p];
    let mut y = Vec::with_capacity(sample_size);
    let mut y_i = Vec::with_capacity(sample_size);
    for k in 0..sample_size {
        let mut rng_x = stream_rng(seed, STREAM_MC_X, k as u64);
        let mut rng_xp = stream_rng(seed, STREAM_MC_XPRIME, k as u64);
        for v in x.iter_mut() {
            *v = F::uniform01(&mut rng_x);
        }
        for v in mix.iter_mut() {
            *v = F::uniform01(&mut rng_xp);
        }
        mix[index - 1] = x[index - 1];
        y.push(model.eval(&x));
        y_i.push(model.eval(&mix));
    }
    closed_from_pairs(&y, &y_i, 0)
}

/// Classical one-variable-at-a-time sweep over all `p` indices with a
/// shared `y` draw: exactly `(p+1) N` model evaluations.
pub fn classical_sweep<F: Real, M: ModelFn<F>>(
    model: &M,
    sample_size: usize,
    seed: u64,
) -> Result<SweepResult<F>, PickFreezeError> {
    if sample_size < 2 {
        return Err(PickFreezeError::SampleSizeTooSmall { got: sample_size });
    }
    let p = model.dim();
    let half = F::cast(0.5);
    let mut s_yy = vec![F::zero(); p];
    let mut s_avg = vec![F::zero(); p];
    let mut s_sq = vec![F::zero(); p];
    let mut lo = vec![F::infinity(); p];
    let mut hi = vec![F::neg_infinity(); p];
    let mut x = vec![F::zero(); p];
    let mut x_prime = vec![F::zero(); p];
    let mut mix = vec![F::zero(); p];
    let mut evals: u64 = 0;
    for k in 0..sample_size {
        let mut rng_x = stream_rng(seed, STREAM_MC_X, k as u64);
        let mut rng_xp = stream_rng(seed, STREAM_MC_XPRIME, k as u64);
        for v in x.iter_mut() {
            *v = F::uniform01(&mut rng_x);
        }
        for v in x_prime.iter_mut() {
            *v = F::uniform01(&mut rng_xp);
        }
        let y = model.eval(&x);
        evals += 1;
        mix.copy_from_slice(&x_prime);
        for i in 0..p {
            mix[i] = x[i];
            let y_i = model.eval(&mix);
            evals += 1;
            mix[i] = x_prime[i];
            s_yy[i] += y * y_i;
            s_avg[i] += (y + y_i) * half;
            s_sq[i] += (y * y + y_i * y_i) * half;
            lo[i] = lo[i].min(y.min(y_i));
            hi[i] = hi[i].max(y.max(y_i));
        }
    }
    debug_assert_eq!(evals, (p as u64 + 1) * sample_size as u64);
    let n = F::cast(sample_size);
    let mut estimates = Vec::with_capacity(p);
    for i in 0..p {
        let mean = s_avg[i] / n;
        let numerator = s_yy[i] / n - mean * mean;
        let denominator = s_sq[i] / n - mean * mean;
        let range = hi[i] - lo[i];
        if denominator <= F::cast(DEGENERATE_REL_TOL) * range * range {
            return Err(PickFreezeError::DegenerateVariance { row: i });
        }
        estimates.push(numerator / denominator);
    }
    Ok(SweepResult {
        estimates,
        eval_count: evals,
    })
}

/// Evaluation cost of estimating all `p` indices one at a time with a
/// shared `y` draw.
pub fn sweep_cost(p: usize, sample_size: usize) -> u64 {
    (p as u64 + 1) * sample_size as u64
}

/// 1-based complement of an index set within `1..=p`.
pub fn complement(set: &BTreeSet<usize>, p: usize) -> BTreeSet<usize> {
    (1..=p).filter(|i| !set.contains(i)).collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::design::{sample_design, DesignMatrix, DesignScheme};
    use crate::model::AdditiveModel;
    use std::sync::atomic::{AtomicU64, Ordering};

    fn small_model() -> AdditiveModel<f64> {
        AdditiveModel::new(
            6,
            vec![
                (1, vec![0.0, 4.0, 1.0]),
                (2, vec![0.0, 4.0]),
                (3, vec![0.0, 10.0]),
            ],
        )
        .unwrap()
    }

    /// Instruments a model with an exact call counter.
    struct Counting<'a, M> {
        inner: &'a M,
        calls: AtomicU64,
    }

    impl<'a, M: ModelFn<f64>> Counting<'a, M> {
        fn new(inner: &'a M) -> Self {
            Self {
                inner,
                calls: AtomicU64::new(0),
            }
        }
    }

    impl<M: ModelFn<f64>> ModelFn<f64> for Counting<'_, M> {
        fn dim(&self) -> usize {
            self.inner.dim()
        }
        fn eval(&self, x: &[f64]) -> f64 {
            self.calls.fetch_add(1, Ordering::Relaxed);
            self.inner.eval(x)
        }
    }

    fn full_freeze_design(n: usize, p: usize) -> DesignMatrix {
        DesignMatrix::from_rows(
            DesignScheme::Bernoulli { mu: 0.5 },
            0,
            n,
            p,
            vec![1; n * p],
        )
        .unwrap()
    }

    #[test]
    fn full_freeze_row_reproduces_y() {
        let model = small_model();
        let design = full_freeze_design(1, 6);
        let plan = MonteCarloPlan::new(50, 3, SchemeKind::Closed).unwrap();
        let sample = simulate(&model, &design, &plan).unwrap();
        assert_eq!(sample.y, sample.y_frozen[0]);
        // numerator and denominator coincide: the estimator is exactly 1
        assert_eq!(sample.estimate_closed(0).unwrap(), 1.0);
    }

    #[test]
    fn empty_freeze_row_is_independent_copy() {
        let model = small_model();
        let design = DesignMatrix::from_rows(
            DesignScheme::Bernoulli { mu: 0.5 },
            0,
            1,
            6,
            vec![0; 6],
        )
        .unwrap();
        let plan = MonteCarloPlan::new(10_000, 11, SchemeKind::Closed).unwrap();
        let sample = simulate(&model, &design, &plan).unwrap();
        assert_ne!(sample.y, sample.y_frozen[0]);
        // true closed index of the empty set is 0: CLT band 3/sqrt(N)
        let est = sample.estimate_closed(0).unwrap();
        assert!(est.abs() <= 3.0 / (10_000f64).sqrt() * 2.0, "est {est}");
    }

    #[test]
    fn eval_count_closed_and_delta() {
        let model = small_model();
        let counting = Counting::new(&model);
        let design = sample_design(DesignScheme::Bernoulli { mu: 0.5 }, 7, 6, 1).unwrap();
        let plan = MonteCarloPlan::new(100, 5, SchemeKind::Closed).unwrap();
        let sample = simulate(&counting, &design, &plan).unwrap();
        assert_eq!(sample.eval_count, (7 + 1) * 100);
        assert_eq!(counting.calls.load(Ordering::Relaxed), sample.eval_count);

        let counting = Counting::new(&model);
        let design = sample_design(DesignScheme::Rademacher, 7, 6, 1).unwrap();
        let plan = MonteCarloPlan::new(100, 5, SchemeKind::Delta).unwrap();
        let sample = simulate(&counting, &design, &plan).unwrap();
        assert_eq!(sample.eval_count, (2 * 7 + 1) * 100);
        assert_eq!(counting.calls.load(Ordering::Relaxed), sample.eval_count);
    }

    #[test]
    fn simulate_is_deterministic() {
        let model = small_model();
        let design = sample_design(DesignScheme::Rademacher, 5, 6, 2).unwrap();
        let plan = MonteCarloPlan::new(64, 9, SchemeKind::Delta).unwrap();
        let a = simulate(&model, &design, &plan).unwrap();
        let b = simulate(&model, &design, &plan).unwrap();
        assert_eq!(a, b);
        let e1 = a.estimate_vector().unwrap();
        let e2 = b.estimate_vector().unwrap();
        assert_eq!(e1.values, e2.values);
    }

    #[test]
    fn dimension_mismatch_is_rejected() {
        let model = small_model();
        let design = sample_design(DesignScheme::Rademacher, 3, 5, 0).unwrap();
        let plan = MonteCarloPlan::new(10, 0, SchemeKind::Delta).unwrap();
        assert!(matches!(
            simulate(&model, &design, &plan),
            Err(PickFreezeError::DimensionMismatch { design_p: 5, model_p: 6 })
        ));
    }

    #[test]
    fn plan_requires_two_samples() {
        assert!(MonteCarloPlan::new(1, 0, SchemeKind::Closed).is_err());
        assert!(MonteCarloPlan::new(2, 0, SchemeKind::Closed).is_ok());
    }

    #[test]
    fn delta_needs_complement_outputs() {
        let model = small_model();
        let design = sample_design(DesignScheme::Bernoulli { mu: 0.5 }, 3, 6, 0).unwrap();
        let plan = MonteCarloPlan::new(16, 0, SchemeKind::Closed).unwrap();
        let sample = simulate(&model, &design, &plan).unwrap();
        assert!(matches!(
            sample.estimate_delta(0),
            Err(PickFreezeError::MissingComplement { row: 0 })
        ));
    }

    #[test]
    fn delta_full_freeze_swap_antisymmetry() {
        let model = small_model();
        // row 0 freezes everything, row 1 nothing: complements of each other
        let mut entries = vec![1i8; 6];
        entries.extend_from_slice(&[-1i8; 6]);
        let design =
            DesignMatrix::from_rows(DesignScheme::Rademacher, 0, 2, 6, entries).unwrap();
        let plan = MonteCarloPlan::new(4096, 21, SchemeKind::Delta).unwrap();
        let sample = simulate(&model, &design, &plan).unwrap();
        let d0 = sample.estimate_delta(0).unwrap();
        let d1 = sample.estimate_delta(1).unwrap();
        assert_eq!(d0, -d1);
        // S_full - S_empty = 1: CLT band around 1
        assert!((d0 - 1.0).abs() <= 3.0 / (4096f64).sqrt() * 2.0, "d0 {d0}");
    }

    #[test]
    fn degenerate_variance_detected() {
        // constant model output
        let model = AdditiveModel::new(3, vec![(1, vec![2.0])]).unwrap();
        let design = full_freeze_design(1, 3);
        let plan = MonteCarloPlan::new(8, 0, SchemeKind::Closed).unwrap();
        let sample = simulate(&model, &design, &plan).unwrap();
        assert!(matches!(
            sample.estimate_closed(0),
            Err(PickFreezeError::DegenerateVariance { row: 0 })
        ));
    }

    #[test]
    fn estimate_vector_single_full_freeze_row() {
        let model = small_model();
        let design = full_freeze_design(1, 6);
        let plan = MonteCarloPlan::new(32, 1, SchemeKind::Closed).unwrap();
        let sample = simulate(&model, &design, &plan).unwrap();
        let e = sample.estimate_vector().unwrap();
        assert_eq!(e.values, vec![1.0]);
    }

    #[test]
    fn estimate_single_matches_definition() {
        let model = small_model();
        let est = estimate_single::<f64, _>(&model, 3, 10_000, 17).unwrap();
        // S3 = 375/529; generous sanity band, the statistical tests pin it
        assert!((est - 375.0 / 529.0).abs() < 0.05, "est {est}");
        assert!(estimate_single::<f64, _>(&model, 0, 100, 0).is_err());
        assert!(estimate_single::<f64, _>(&model, 7, 100, 0).is_err());
    }

    #[test]
    fn sweep_counts_and_estimates() {
        let model = small_model();
        let counting = Counting::new(&model);
        let sweep = classical_sweep::<f64, _>(&counting, 500, 23).unwrap();
        assert_eq!(sweep.eval_count, (6 + 1) * 500);
        assert_eq!(counting.calls.load(Ordering::Relaxed), sweep.eval_count);
        assert_eq!(sweep.eval_count, sweep_cost(6, 500));
        assert_eq!(sweep.estimates.len(), 6);
        // inactive variable: near zero
        assert!(sweep.estimates[4].abs() < 0.2);
    }

    #[test]
    fn jackknife_sigma_positive_and_shrinks() {
        let model = small_model();
        let design = sample_design(DesignScheme::Bernoulli { mu: 0.5 }, 4, 6, 3).unwrap();
        let small = simulate(
            &model,
            &design,
            &MonteCarloPlan::new(200, 7, SchemeKind::Closed).unwrap(),
        )
        .unwrap();
        let large = simulate(
            &model,
            &design,
            &MonteCarloPlan::new(3200, 7, SchemeKind::Closed).unwrap(),
        )
        .unwrap();
        let s_small = small.estimate_sigma().unwrap();
        let s_large = large.estimate_sigma().unwrap();
        assert!(s_small > 0.0);
        // SE scales like 1/sqrt(N): a 16x sample should shrink it ~4x
        assert!(s_large < s_small, "{s_small} -> {s_large}");
    }

    #[test]
    fn binary_dump_roundtrip() {
        let model = small_model();
        let design = sample_design(DesignScheme::Rademacher, 3, 6, 2).unwrap();
        let plan = MonteCarloPlan::new(16, 4, SchemeKind::Delta).unwrap();
        let sample = simulate(&model, &design, &plan).unwrap();
        let mut buf = Vec::new();
        sample.write_binary(&mut buf).unwrap();
        assert_eq!(buf.len(), 24 + 8 * 16 * (2 * 3 + 1));
        let back = PickFreezeSample::<f64>::read_binary(buf.as_slice()).unwrap();
        assert_eq!(back.y, sample.y);
        assert_eq!(back.y_frozen, sample.y_frozen);
        assert_eq!(back.y_frozen_complement, sample.y_frozen_complement);
        assert_eq!(back.eval_count, sample.eval_count);
    }

    #[test]
    fn complement_helper() {
        let set: BTreeSet<usize> = [1, 3].into_iter().collect();
        assert_eq!(complement(&set, 4), [2, 4].into_iter().collect());
    }
}
