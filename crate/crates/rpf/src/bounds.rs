//! Closed-form calculators for the recovery guarantees: error thresholds,
//! failure probabilities, minimal sample sizes and penalty floors for
//! each design family, plus the cost model of the classical one-by-one
//! baseline with a multiple-testing correction.
//!
//! Conventions: `log p` is the natural logarithm throughout. Failure
//! probabilities `alpha >= 1` are reported verbatim with the `vacuous`
//! flag set rather than clamped. Every calculator is a pure function of
//! its parameters: identical inputs give bit-identical outputs.

use std::collections::BTreeMap;

use serde_json::{json, Value};
use thiserror::Error;

use crate::scalar::Real;

#[derive(Debug, Error)]
pub enum BoundError {
    #[error("missing parameter `{0}`")]
    MissingParam(&'static str),
    #[error("parameter `{name}` out of range: {reason}")]
    OutOfRange { name: &'static str, reason: String },
    #[error("penalty r = {r} below the admissible minimum {r_min}")]
    PenaltyBelowMinimum { r: f64, r_min: f64 },
    #[error(
        "no feasible parameters: smallest failure probability reached {best_alpha} \
         (error bound {best_t}) against the target {alpha_max}"
    )]
    NoFeasiblePoint {
        best_alpha: f64,
        best_t: f64,
        alpha_max: f64,
    },
}

/// Inputs shared by the calculators. Each calculator reads only the
/// fields it needs and validates its own preconditions.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct BoundParams<F> {
    /// Problem dimension.
    pub p: Option<usize>,
    /// Sparsity (number of active variables).
    pub s: Option<usize>,
    /// Number of design rows.
    pub n: Option<usize>,
    /// Monte Carlo sample size (cost accounting only).
    pub n_samples: Option<usize>,
    /// Bernoulli design parameter.
    pub mu: Option<F>,
    /// Concentration slack `delta`.
    pub delta: Option<F>,
    /// Slack multiplier `delta' > 1` (signed designs).
    pub delta_prime: Option<F>,
    /// Gaussian tail multiplier `A`.
    pub a: Option<F>,
    /// Noise scale (largest noise standard deviation).
    pub sigma: Option<F>,
    /// Probability exponent `c > 1`.
    pub c: Option<F>,
    /// Universal constants left free by the supporting lemmas.
    pub c1: Option<F>,
    pub c2: Option<F>,
    pub c3: Option<F>,
    /// Expander left degree.
    pub d: Option<usize>,
    /// Expansion constant.
    pub e: Option<F>,
    /// Chosen penalty.
    pub r: Option<F>,
}

fn req<T: Copy>(v: Option<T>, name: &'static str) -> Result<T, BoundError> {
    v.ok_or(BoundError::MissingParam(name))
}

fn out_of_range(name: &'static str, reason: impl Into<String>) -> BoundError {
    BoundError::OutOfRange {
        name,
        reason: reason.into(),
    }
}

/// Output of a calculator.
#[derive(Clone, Debug, PartialEq)]
pub struct BoundReport<F> {
    /// Penalty the bound is stated at.
    pub r: F,
    /// Minimal admissible penalty.
    pub r_min: F,
    /// Sup-norm error threshold.
    pub t: F,
    /// Failure probability (not clamped).
    pub alpha: F,
    /// Minimal number of rows for the probability to be meaningful
    /// (0 when the statement imposes none).
    pub n_min: u64,
    /// Set iff `alpha >= 1`.
    pub vacuous: bool,
    /// Named intermediate quantities.
    pub extras: BTreeMap<String, F>,
}

impl<F: Real> BoundReport<F> {
    fn new(r: F, r_min: F, t: F, alpha: F, n_min: u64, extras: BTreeMap<String, F>) -> Self {
        Self {
            r,
            r_min,
            t,
            alpha,
            n_min,
            vacuous: !(alpha < F::one()),
            extras,
        }
    }

    /// Flat JSON object: `r, r_min, t, alpha, n_min, vacuous, extras.*`.
    pub fn to_json(&self) -> Value {
        let mut map = serde_json::Map::new();
        map.insert("r".into(), json_number(self.r));
        map.insert("r_min".into(), json_number(self.r_min));
        map.insert("t".into(), json_number(self.t));
        map.insert("alpha".into(), json_number(self.alpha));
        map.insert("n_min".into(), json!(self.n_min));
        map.insert("vacuous".into(), json!(self.vacuous));
        for (k, v) in &self.extras {
            map.insert(format!("extras.{k}"), json_number(*v));
        }
        Value::Object(map)
    }
}

fn json_number<F: Real>(x: F) -> Value {
    let v = x.to_f64().unwrap_or(f64::NAN);
    serde_json::Number::from_f64(v)
        .map(Value::Number)
        .unwrap_or_else(|| Value::String(format!("{v}")))
}

fn ln_p<F: Real>(p: usize) -> F {
    F::cast(p).ln()
}

/// Sup-norm guarantee for i.i.d. 0/1 designs with parameter `mu`.
///
/// Needs `p, s, n, mu, delta, a, sigma`; requires
/// `0 < delta < (1 - mu)/(16 s)` and `A > 2 sqrt(2)`.
pub fn bernoulli_bound<F: Real>(params: &BoundParams<F>) -> Result<BoundReport<F>, BoundError> {
    let p = req(params.p, "p")?;
    let s = req(params.s, "s")?;
    let n = req(params.n, "n")?;
    let mu = req(params.mu, "mu")?;
    let delta = req(params.delta, "delta")?;
    let a = req(params.a, "a")?;
    let sigma = req(params.sigma, "sigma")?;
    if !(mu > F::zero() && mu < F::one()) {
        return Err(out_of_range("mu", "must lie in (0,1)"));
    }
    let delta_cap = (F::one() - mu) / (F::cast(16) * F::cast(s));
    if !(delta > F::zero() && delta < delta_cap) {
        return Err(out_of_range(
            "delta",
            format!("must lie in (0, {})", delta_cap.to_f64().unwrap_or(f64::NAN)),
        ));
    }
    let two_sqrt2 = F::cast(2.0) * F::cast(2.0).sqrt();
    if !(a > two_sqrt2) {
        return Err(out_of_range("a", "must exceed 2 sqrt(2)"));
    }
    if n == 0 || p == 0 || s == 0 {
        return Err(out_of_range("n", "p, s, n must be positive"));
    }
    let lp: F = ln_p(p);
    let nf = F::cast(n);
    let r = a * sigma * (mu * (F::one() + delta)).sqrt() * (lp / nf).sqrt();
    let bracket = F::cast(1.5)
        + F::cast(24) * (mu + delta) / ((F::one() - mu) / F::cast(s) - F::cast(16) * delta);
    let t = bracket * r / mu;
    let tail_a = F::cast(p).powf(F::one() - a * a / F::cast(8));
    let conc = -F::cast(2.0) * nf * delta * delta * mu * mu;
    let alpha = F::one() - (F::one() - tail_a) * (F::one() - F::cast(2.0) * (conc + lp).exp())
        + (conc + F::cast(2.0) * lp).exp();
    let n_min = bernoulli_min_n(p, s, mu, delta)?.given_delta;
    Ok(BoundReport::new(r, r, t, alpha, n_min, BTreeMap::new()))
}

/// The two sample-size floors for the 0/1 design guarantee.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct MinSampleSizes {
    /// `ceil(ln p / (delta^2 mu^2))` at the chosen `delta`.
    pub given_delta: u64,
    /// The delta-free floor `ceil(256 s^2 ln p / (mu^2 (1-mu)^2))`.
    pub delta_free: u64,
}

/// Minimal `n` for the 0/1 design probability to be positive. Accepts
/// `delta` up to and including `(1 - mu)/(16 s)`.
pub fn bernoulli_min_n<F: Real>(
    p: usize,
    s: usize,
    mu: F,
    delta: F,
) -> Result<MinSampleSizes, BoundError> {
    if p == 0 || s == 0 {
        return Err(out_of_range("p", "p, s must be positive"));
    }
    if !(mu > F::zero() && mu < F::one()) {
        return Err(out_of_range("mu", "must lie in (0,1)"));
    }
    let delta_cap = (F::one() - mu) / (F::cast(16) * F::cast(s));
    if !(delta > F::zero() && delta <= delta_cap) {
        return Err(out_of_range(
            "delta",
            format!(
                "must lie in (0, {}]",
                delta_cap.to_f64().unwrap_or(f64::NAN)
            ),
        ));
    }
    let lp: F = ln_p(p);
    let given_delta = (lp / (delta * delta * mu * mu)).ceil();
    let s2 = F::cast(s) * F::cast(s);
    let one_minus = F::one() - mu;
    let delta_free = (F::cast(256) * s2 * lp / (mu * mu * one_minus * one_minus)).ceil();
    Ok(MinSampleSizes {
        given_delta: given_delta.to_u64().unwrap_or(u64::MAX),
        delta_free: delta_free.to_u64().unwrap_or(u64::MAX),
    })
}

/// Sup-norm guarantee for i.i.d. signed designs.
///
/// Needs `p, s, n, sigma, a, delta_prime`; requires `delta' > 1` and
/// `A > 2 sqrt(2)`. Internally `delta = 1/(7 delta' s)`, so the
/// concentration exponent reads `n/(2 delta'^2)`.
pub fn rademacher_bound<F: Real>(params: &BoundParams<F>) -> Result<BoundReport<F>, BoundError> {
    let p = req(params.p, "p")?;
    let s = req(params.s, "s")?;
    let n = req(params.n, "n")?;
    let sigma = req(params.sigma, "sigma")?;
    let a = req(params.a, "a")?;
    let delta_prime = req(params.delta_prime, "delta_prime")?;
    if !(delta_prime > F::one()) {
        return Err(out_of_range("delta_prime", "must exceed 1"));
    }
    let two_sqrt2 = F::cast(2.0) * F::cast(2.0).sqrt();
    if !(a > two_sqrt2) {
        return Err(out_of_range("a", "must exceed 2 sqrt(2)"));
    }
    if n == 0 || p == 0 || s == 0 {
        return Err(out_of_range("n", "p, s, n must be positive"));
    }
    let lp: F = ln_p(p);
    let nf = F::cast(n);
    let sf = F::cast(s);
    let r = a * sigma * (lp / nf).sqrt();
    let t = F::cast(1.5) * (F::one() + F::cast(16) / (F::cast(5) * (delta_prime - F::one()))) * r;
    let delta = F::one() / (F::cast(7) * delta_prime * sf);
    let tail_a = F::cast(p).powf(F::one() - a * a / F::cast(8));
    let conc = (-nf * F::cast(49) * delta * delta * sf * sf / F::cast(2.0)
        + F::cast(2.0) * lp)
        .exp();
    let alpha = F::one() - (F::one() - tail_a) * (F::one() - conc);
    // alpha < 1 needs n > 4 delta'^2 ln p
    let n_min = (F::cast(4) * delta_prime * delta_prime * lp)
        .ceil()
        .to_u64()
        .unwrap_or(u64::MAX);
    let mut extras = BTreeMap::new();
    extras.insert("delta".to_string(), delta);
    Ok(BoundReport::new(r, r, t, alpha, n_min, extras))
}

/// Sup-norm bound implied by the universal distortion inequality with
/// parameters `(rho, kappa)` and Gram statistics `(theta1, theta2)`,
/// conditional on the noise event at level `r0`.
///
/// Returns the error threshold plus the intermediate L1 bound
/// `2 r n rho^2 s / (1 - r0/r - 2 kappa)` in `extras["l1_bound"]`.
/// `alpha` is reported as 0: the statement is deterministic given the
/// noise event, whose probability is controlled by the caller.
#[allow(clippy::too_many_arguments)]
pub fn udp_linf_bound<F: Real>(
    rho: F,
    kappa: F,
    theta1: F,
    theta2: F,
    r: F,
    r0: F,
    n: usize,
    s: usize,
) -> Result<BoundReport<F>, BoundError> {
    if !(rho > F::zero()) {
        return Err(out_of_range("rho", "must be positive"));
    }
    if !(kappa > F::zero() && kappa < F::cast(0.5)) {
        return Err(out_of_range("kappa", "must lie in (0, 1/2)"));
    }
    if !(theta2 > F::zero()) {
        return Err(out_of_range("theta2", "must be positive"));
    }
    if !(r0 >= F::zero()) {
        return Err(out_of_range("r0", "must be nonnegative"));
    }
    if n == 0 || s == 0 {
        return Err(out_of_range("n", "n, s must be positive"));
    }
    let r_min = r0 / (F::one() - F::cast(2.0) * kappa);
    if !(r > r_min) {
        return Err(BoundError::PenaltyBelowMinimum {
            r: r.to_f64().unwrap_or(f64::NAN),
            r_min: r_min.to_f64().unwrap_or(f64::NAN),
        });
    }
    let nf = F::cast(n);
    let sf = F::cast(s);
    let gap = F::one() - r0 / r - F::cast(2.0) * kappa;
    let l1 = F::cast(2.0) * r * nf * rho * rho * sf / gap;
    let t = (F::one() + r0 / r + F::cast(2.0) * nf * theta1 * rho * rho * sf / gap) * r / theta2;
    let mut extras = BTreeMap::new();
    extras.insert("l1_bound".to_string(), l1);
    Ok(BoundReport::new(r, r_min, t, F::zero(), 0, extras))
}

/// Exact-recovery guarantee for signed designs beyond the coherence
/// regime (`n` of order `s log p` instead of `s^2 log p`), with the
/// universal constants `C1, C2, C3` supplied by the caller.
///
/// Needs `p, s, n, sigma, c, c1, c2, c3, r`; requires `c > 1`,
/// `s >= 6(2+c)/C1`, `n >= n0 = C1 s ln(C2 p)` and `r >= r1`.
pub fn tiebreak_bound<F: Real>(params: &BoundParams<F>) -> Result<BoundReport<F>, BoundError> {
    let p = req(params.p, "p")?;
    let s = req(params.s, "s")?;
    let n = req(params.n, "n")?;
    let sigma = req(params.sigma, "sigma")?;
    let c = req(params.c, "c")?;
    let c1 = req(params.c1, "c1")?;
    let c2 = req(params.c2, "c2")?;
    let c3 = req(params.c3, "c3")?;
    let r = req(params.r, "r")?;
    if !(c > F::one()) {
        return Err(out_of_range("c", "must exceed 1"));
    }
    if !(c1 > F::zero() && c2 > F::zero() && c3 > F::zero()) {
        return Err(out_of_range("c1", "C1, C2, C3 must be positive"));
    }
    let sf = F::cast(s);
    if !(sf >= F::cast(6) * (F::cast(2) + c) / c1) {
        return Err(out_of_range("s", "must satisfy s >= 6(2+c)/C1"));
    }
    let lp: F = ln_p(p);
    let nf = F::cast(n);
    let n0 = c1 * sf * (c2 * F::cast(p)).ln();
    if !(nf >= n0) {
        return Err(out_of_range("n", "must satisfy n >= C1 s ln(C2 p)"));
    }
    let r1 = F::cast(45) * sigma * (c * lp / nf).sqrt();
    if !(r >= r1) {
        return Err(BoundError::PenaltyBelowMinimum {
            r: r.to_f64().unwrap_or(f64::NAN),
            r_min: r1.to_f64().unwrap_or(f64::NAN),
        });
    }
    let c_prime_1 = F::cast(35869) * (c * (F::cast(2) + c)).sqrt() / c1;
    let c_prime_2 = F::cast(46.31) * c.sqrt() / c1.sqrt();
    let t = sigma * (n0 / nf).sqrt() * (r / r1) * (c_prime_1 + c_prime_2 / sf.sqrt()) * sf.sqrt();
    let alpha = F::cast(3) * F::cast(p).powf(-c) + F::cast(2) * (-c3 * nf).exp();
    let mut extras = BTreeMap::new();
    extras.insert("c_prime_1".to_string(), c_prime_1);
    extras.insert("c_prime_2".to_string(), c_prime_2);
    extras.insert("n0".to_string(), n0);
    extras.insert("r1".to_string(), r1);
    Ok(BoundReport::new(
        r,
        r1,
        t,
        alpha,
        n0.ceil().to_u64().unwrap_or(u64::MAX),
        extras,
    ))
}

/// Exact-recovery guarantee for left-regular adjacency designs under the
/// signal-proportional noise model (noise scale `sigma` here plays the
/// role of the normalized level).
///
/// Plain mode needs `p, s, n, d, e, sigma, a, r` with `1/p < e < 1/6`
/// and `A > sqrt(2)`. With `snr_mode` the expansion constant is fixed to
/// `1/12` and the randomized-graph corollary applies: additionally needs
/// `c > 1`, `c1`, `c2`, and `p >= 4s`.
pub fn expander_bound<F: Real>(
    params: &BoundParams<F>,
    snr_mode: bool,
) -> Result<BoundReport<F>, BoundError> {
    let p = req(params.p, "p")?;
    let s = req(params.s, "s")?;
    let n = req(params.n, "n")?;
    let sigma = req(params.sigma, "sigma")?;
    let a = req(params.a, "a")?;
    let r = req(params.r, "r")?;
    if p == 0 || s == 0 || n == 0 {
        return Err(out_of_range("p", "p, s, n must be positive"));
    }
    let lp: F = ln_p(p);
    let nf = F::cast(n);
    let sf = F::cast(s);

    if snr_mode {
        let c = req(params.c, "c")?;
        let c1 = req(params.c1, "c1")?;
        let c2 = req(params.c2, "c2")?;
        if !(c > F::one()) {
            return Err(out_of_range("c", "must exceed 1"));
        }
        if !(c1 > F::zero() && c2 > F::zero()) {
            return Err(out_of_range("c1", "C1, C2 must be positive"));
        }
        if p < 4 * s {
            return Err(out_of_range("p", "must satisfy p >= 4 s"));
        }
        let a_floor = c1.min(F::cast(2)).sqrt();
        if !(a > a_floor) {
            return Err(out_of_range("a", "must exceed sqrt(min(C1, 2))"));
        }
        let n0 = c2 * sf * lp;
        if !(nf >= n0) {
            return Err(out_of_range("n", "must satisfy n >= C2 s ln p"));
        }
        let r1 = F::cast(3.34) * a * sigma * (lp / nf).powf(F::cast(1.5));
        if !(r >= r1) {
            return Err(BoundError::PenaltyBelowMinimum {
                r: r.to_f64().unwrap_or(f64::NAN),
                r_min: r1.to_f64().unwrap_or(f64::NAN),
            });
        }
        let t = F::cast(51.7) * a * sigma / c2.sqrt() * (r / r1) * (n0 / nf).sqrt() * sf.sqrt();
        let alpha = F::cast(p).powf(F::one() - a * a / F::cast(2))
            + F::cast(2) * sf * F::cast(p).powf(-c);
        let mut extras = BTreeMap::new();
        extras.insert("n0".to_string(), n0);
        extras.insert("r1".to_string(), r1);
        return Ok(BoundReport::new(
            r,
            r1,
            t,
            alpha,
            n0.ceil().to_u64().unwrap_or(u64::MAX),
            extras,
        ));
    }

    let d = req(params.d, "d")?;
    let e = req(params.e, "e")?;
    if d == 0 {
        return Err(out_of_range("d", "must be positive"));
    }
    if !(e > F::one() / F::cast(p) && e < F::one() / F::cast(6)) {
        return Err(out_of_range("e", "must lie in (1/p, 1/6)"));
    }
    if !(a > F::cast(2).sqrt()) {
        return Err(out_of_range("a", "must exceed sqrt(2)"));
    }
    let one_minus_2e = F::one() - F::cast(2) * e;
    let one_minus_6e = F::one() - F::cast(6) * e;
    let r1 = F::cast(2) * a * sigma * (one_minus_2e / one_minus_6e) * F::cast(d) * lp.sqrt()
        / nf.powf(F::cast(1.5));
    if !(r >= r1) {
        return Err(BoundError::PenaltyBelowMinimum {
            r: r.to_f64().unwrap_or(f64::NAN),
            r_min: r1.to_f64().unwrap_or(f64::NAN),
        });
    }
    let bracket = F::one()
        + F::cast(2) * one_minus_2e / one_minus_6e
        + F::cast(16) * e * sf / (one_minus_6e * one_minus_6e);
    let t = a * sigma * (lp / nf).sqrt() * bracket * (r / r1);
    let alpha = F::cast(p).powf(F::one() - a * a / F::cast(2));
    let mut extras = BTreeMap::new();
    extras.insert("bracket".to_string(), bracket);
    extras.insert("r1".to_string(), r1);
    Ok(BoundReport::new(r, r1, t, alpha, 0, extras))
}

/// Exact-recovery guarantee for 0/1 designs at the sparse-graph scaling
/// `mu = 799 (1+c) ln p / n`.
///
/// Needs `p, s, n, sigma, c, r`; requires `p > 7`, `c > 1`,
/// `n >= 12982 (1+c) s ln p` and `r >= r1 = 9692 sigma (1+c) ln p / n`.
/// `extras` carries the implied `mu`, the noise level `r0` and the
/// sharper bracket form of the bound for cross-checks.
pub fn bernoulli_design_bound<F: Real>(
    params: &BoundParams<F>,
) -> Result<BoundReport<F>, BoundError> {
    let p = req(params.p, "p")?;
    let s = req(params.s, "s")?;
    let n = req(params.n, "n")?;
    let sigma = req(params.sigma, "sigma")?;
    let c = req(params.c, "c")?;
    let r = req(params.r, "r")?;
    if p <= 7 {
        return Err(out_of_range("p", "must exceed 7"));
    }
    if !(c > F::one()) {
        return Err(out_of_range("c", "must exceed 1"));
    }
    if s == 0 || n == 0 {
        return Err(out_of_range("s", "s, n must be positive"));
    }
    let lp: F = ln_p(p);
    let nf = F::cast(n);
    let sf = F::cast(s);
    let one_plus_c = F::one() + c;
    let n_floor = F::cast(12982) * one_plus_c * sf * lp;
    if !(nf >= n_floor) {
        return Err(out_of_range("n", "must satisfy n >= 12982 (1+c) s ln p"));
    }
    let mu = F::cast(799) * one_plus_c * lp / nf;
    let r1 = F::cast(9692) * sigma * one_plus_c * lp / nf;
    if !(r >= r1) {
        return Err(BoundError::PenaltyBelowMinimum {
            r: r.to_f64().unwrap_or(f64::NAN),
            r_min: r1.to_f64().unwrap_or(f64::NAN),
        });
    }
    let t = F::cast(775.36) * (r / r1) * sigma * sf;
    let alpha = F::cast(3) * F::cast(p).powf(F::one() - c);
    let r0 = F::cast(6) * sigma * (F::cast(46) * c * one_plus_c).sqrt() * lp / nf;
    // the proof-level display of the same bound, exposed for cross-checks
    let gap = F::cast(0.0942) - r0 / r;
    let bracket_bound = nf / (F::cast(759) * one_plus_c * lp)
        * (F::one() + r0 / r + F::cast(5.338) * sf / gap)
        * r;
    let mut extras = BTreeMap::new();
    extras.insert("mu".to_string(), mu);
    extras.insert("r0".to_string(), r0);
    extras.insert("r1".to_string(), r1);
    extras.insert("bracket_bound".to_string(), bracket_bound);
    Ok(BoundReport::new(
        r,
        r1,
        t,
        alpha,
        n_floor.ceil().to_u64().unwrap_or(u64::MAX),
        extras,
    ))
}

/// Cost model of the classical one-by-one baseline: `p` simultaneous
/// confidence intervals at the multiple-testing-corrected per-test level
/// `1 - confidence^(1/p)`, each of target width `target_width`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct ClassicalCost<F> {
    pub per_test_level: F,
    /// Standard-normal quantile at `1 - per_test_level/2`; the interval
    /// width constant is `2 z`.
    pub z: F,
    /// Per-index sample size `ceil((2 z / width)^2)`.
    pub n_prime: u64,
    /// `2 n_prime (p + 1)` model evaluations in total.
    pub total_evals: u64,
}

impl<F: Real> ClassicalCost<F> {
    pub fn to_json(&self) -> Value {
        json!({
            "per_test_level": self.per_test_level.to_f64().unwrap_or(f64::NAN),
            "z": self.z.to_f64().unwrap_or(f64::NAN),
            "interval_width_constant": 2.0 * self.z.to_f64().unwrap_or(f64::NAN),
            "n_prime": self.n_prime,
            "total_evals": self.total_evals,
        })
    }
}

pub fn classical_cost<F: Real>(
    p: usize,
    target_width: F,
    confidence: F,
) -> Result<ClassicalCost<F>, BoundError> {
    if p == 0 {
        return Err(out_of_range("p", "must be positive"));
    }
    if !(target_width > F::zero()) {
        return Err(out_of_range("target_width", "must be positive"));
    }
    if !(confidence > F::zero() && confidence < F::one()) {
        return Err(out_of_range("confidence", "must lie in (0,1)"));
    }
    // quantile evaluated in f64: the per-test level is tiny
    let conf = confidence.to_f64().unwrap_or(f64::NAN);
    let per_test = 1.0 - (conf.ln() / p as f64).exp();
    let z = normal_quantile(1.0 - per_test / 2.0);
    let width = target_width.to_f64().unwrap_or(f64::NAN);
    let n_prime = ((2.0 * z / width) * (2.0 * z / width)).ceil() as u64;
    let total_evals = 2 * n_prime * (p as u64 + 1);
    Ok(ClassicalCost {
        per_test_level: F::cast(per_test),
        z: F::cast(z),
        n_prime,
        total_evals,
    })
}

/// Standard-normal quantile by Wichura's rational approximations
/// (algorithm AS 241, PPND16 branch), accurate to well below 1e-9.
///
/// Returns NaN outside `(0, 1)`.
pub fn normal_quantile(p: f64) -> f64 {
    if !(p > 0.0 && p < 1.0) {
        return f64::NAN;
    }
    let q = p - 0.5;
    if q.abs() <= 0.425 {
        let r = 0.180625 - q * q;
        static A: [f64; 8] = [
            3.387_132_872_796_366_608e0,
            1.331_416_678_917_843_774_5e2,
            1.971_590_950_306_551_442_7e3,
            1.373_169_376_550_946_112_5e4,
            4.592_195_393_154_987_145_7e4,
            6.726_577_092_700_870_085_3e4,
            3.343_057_558_358_812_810_5e4,
            2.509_080_928_730_122_672_7e3,
        ];
        static B: [f64; 8] = [
            1.0,
            4.231_333_070_160_091_125_2e1,
            6.871_870_074_920_579_083e2,
            5.394_196_021_424_751_107_7e3,
            2.121_379_430_158_659_586_7e4,
            3.930_789_580_009_271_061e4,
            2.872_908_573_572_194_267_4e4,
            5.226_495_278_852_854_561e3,
        ];
        return q * poly(&A, r) / poly(&B, r);
    }
    let lower = q < 0.0;
    let r = if lower { p } else { 1.0 - p };
    let mut x = (-r.ln()).sqrt();
    let value = if x <= 5.0 {
        x -= 1.6;
        static C: [f64; 8] = [
            1.423_437_110_749_683_577_34e0,
            4.630_337_846_156_545_295_9e0,
            5.769_497_221_460_691_405_5e0,
            3.647_848_324_763_204_605_04e0,
            1.270_458_252_452_368_382_58e0,
            2.417_807_251_774_506_117_7e-1,
            2.272_384_498_926_918_458_33e-2,
            7.745_450_142_783_414_076_4e-4,
        ];
        static D: [f64; 8] = [
            1.0,
            2.053_191_626_637_758_821_87e0,
            1.676_384_830_183_803_849_4e0,
            6.897_673_349_851_000_045_5e-1,
            1.481_039_764_274_800_745_9e-1,
            1.519_866_656_361_645_719_66e-2,
            5.475_938_084_995_344_946e-4,
            1.050_750_071_644_416_843_24e-9,
        ];
        poly(&C, x) / poly(&D, x)
    } else {
        x -= 5.0;
        static E: [f64; 8] = [
            6.657_904_643_501_103_777_2e0,
            5.463_784_911_164_114_369_9e0,
            1.784_826_539_917_291_335_8e0,
            2.965_605_718_285_048_912_3e-1,
            2.653_218_952_657_612_309_3e-2,
            1.242_660_947_388_078_438_6e-3,
            2.711_555_568_743_487_578_15e-5,
            2.010_334_399_292_288_132_65e-7,
        ];
        static F_COEF: [f64; 8] = [
            1.0,
            5.998_322_065_558_879_376_9e-1,
            1.369_298_809_227_358_053_1e-1,
            1.487_536_129_085_061_485_25e-2,
            7.868_691_311_456_132_591e-4,
            1.846_318_317_510_054_681_8e-5,
            1.421_511_758_316_445_888_7e-7,
            2.044_263_103_389_939_785_64e-15,
        ];
        poly(&E, x) / poly(&F_COEF, x)
    };
    if lower {
        -value
    } else {
        value
    }
}

fn poly(coeffs: &[f64; 8], x: f64) -> f64 {
    coeffs.iter().rev().fold(0.0, |acc, &c| acc * x + c)
}

/// Which calculator [`optimize_params`] drives.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum CalculatorId {
    BernoulliBound,
    RademacherBound,
}

/// Minimizes the error threshold `t` over the free theorem parameters
/// (`A` and `delta` or `delta'`) subject to `alpha <= alpha_max`.
///
/// Deterministic: a fixed grid over the slack parameter with a bisection
/// for the smallest admissible `A` at each point (`alpha` decreases and
/// `t` increases in `A`), then golden-section refinement of the slack
/// around the best grid cell. The chosen parameters are reported in
/// `extras["a"]` and `extras["delta"]`/`extras["delta_prime"]`.
pub fn optimize_params<F: Real>(
    calculator: CalculatorId,
    fixed: &BoundParams<F>,
    alpha_max: F,
) -> Result<BoundReport<F>, BoundError> {
    if !(alpha_max > F::zero() && alpha_max < F::one()) {
        return Err(out_of_range("alpha_max", "must lie in (0,1)"));
    }
    // everything runs in f64 internally; the final report is recomputed
    // through the calculator in F
    let p = req(fixed.p, "p")?;
    let s = req(fixed.s, "s")?;
    let n = req(fixed.n, "n")?;
    let sigma = req(fixed.sigma, "sigma")?.to_f64().unwrap_or(f64::NAN);
    let alpha_cap = alpha_max.to_f64().unwrap_or(f64::NAN);

    let evaluate: Box<dyn Fn(f64, f64) -> Option<(f64, f64)>> = match calculator {
        CalculatorId::RademacherBound => Box::new(move |slack: f64, a: f64| {
            let mut params = BoundParams::<f64>::default();
            params.p = Some(p);
            params.s = Some(s);
            params.n = Some(n);
            params.sigma = Some(sigma);
            params.a = Some(a);
            params.delta_prime = Some(slack);
            rademacher_bound(&params).ok().map(|rep| (rep.t, rep.alpha))
        }),
        CalculatorId::BernoulliBound => {
            let mu = req(fixed.mu, "mu")?.to_f64().unwrap_or(f64::NAN);
            Box::new(move |slack: f64, a: f64| {
                let mut params = BoundParams::<f64>::default();
                params.p = Some(p);
                params.s = Some(s);
                params.n = Some(n);
                params.sigma = Some(sigma);
                params.mu = Some(mu);
                params.a = Some(a);
                params.delta = Some(slack);
                bernoulli_bound(&params).ok().map(|rep| (rep.t, rep.alpha))
            })
        }
    };

    // slack parameter range
    let (slack_lo, slack_hi) = match calculator {
        CalculatorId::RademacherBound => (1.0 + 1e-9, 1e6),
        CalculatorId::BernoulliBound => {
            let mu = req(fixed.mu, "mu")?.to_f64().unwrap_or(f64::NAN);
            if !(mu > 0.0 && mu < 1.0) {
                return Err(out_of_range("mu", "must lie in (0,1)"));
            }
            let cap = (1.0 - mu) / (16.0 * s as f64);
            (cap * 1e-9, cap * (1.0 - 1e-9))
        }
    };

    const A_LO: f64 = 2.0 * std::f64::consts::SQRT_2 * (1.0 + 1e-12);
    const A_HI: f64 = 64.0;

    // smallest admissible A at a given slack; alpha decreases in A
    let min_feasible_a = |slack: f64| -> Option<(f64, f64, f64)> {
        let (_, alpha_hi) = evaluate(slack, A_HI)?;
        if !(alpha_hi <= alpha_cap) {
            return None;
        }
        let mut lo = A_LO;
        let mut hi = A_HI;
        for _ in 0..200 {
            let mid = 0.5 * (lo + hi);
            match evaluate(slack, mid) {
                Some((_, alpha)) if alpha <= alpha_cap => hi = mid,
                _ => lo = mid,
            }
        }
        let (t, alpha) = evaluate(slack, hi)?;
        Some((t, hi, alpha))
    };

    const GRID: usize = 400;
    let log_lo = slack_lo.ln();
    let log_hi = slack_hi.ln();
    let slack_at = |k: f64| -> f64 { (log_lo + (log_hi - log_lo) * k).exp() };

    let mut best: Option<(f64, f64, f64, f64)> = None; // (t, slack, a, alpha)
    let mut nearest_alpha = f64::INFINITY;
    let mut nearest_t = f64::NAN;
    let mut best_k = 0.0;
    for i in 0..=GRID {
        let k = i as f64 / GRID as f64;
        let slack = slack_at(k);
        if let Some((t, a, alpha)) = min_feasible_a(slack) {
            if best.as_ref().is_none_or(|b| t < b.0) {
                best = Some((t, slack, a, alpha));
                best_k = k;
            }
        } else if let Some((t, alpha)) = evaluate(slack, A_HI) {
            if alpha < nearest_alpha {
                nearest_alpha = alpha;
                nearest_t = t;
            }
        }
    }
    let Some((mut best_t, mut best_slack, mut best_a, _)) = best else {
        return Err(BoundError::NoFeasiblePoint {
            best_alpha: nearest_alpha,
            best_t: nearest_t,
            alpha_max: alpha_cap,
        });
    };

    // golden-section refinement of the slack around the best cell
    let golden = (5.0_f64.sqrt() - 1.0) / 2.0;
    let step = 1.0 / GRID as f64;
    let mut lo = (best_k - step).max(0.0);
    let mut hi = (best_k + step).min(1.0);
    let score = |k: f64| -> f64 {
        min_feasible_a(slack_at(k))
            .map(|(t, _, _)| t)
            .unwrap_or(f64::INFINITY)
    };
    let mut k1 = hi - golden * (hi - lo);
    let mut k2 = lo + golden * (hi - lo);
    let mut f1 = score(k1);
    let mut f2 = score(k2);
    for _ in 0..120 {
        if f1 <= f2 {
            hi = k2;
            k2 = k1;
            f2 = f1;
            k1 = hi - golden * (hi - lo);
            f1 = score(k1);
        } else {
            lo = k1;
            k1 = k2;
            f1 = f2;
            k2 = lo + golden * (hi - lo);
            f2 = score(k2);
        }
    }
    let k_best = if f1 <= f2 { k1 } else { k2 };
    if let Some((t, a, _)) = min_feasible_a(slack_at(k_best)) {
        if t < best_t {
            best_t = t;
            best_slack = slack_at(k_best);
            best_a = a;
        }
    }
    let _ = best_t;

    // final report recomputed through the calculator in F
    let mut chosen = fixed.clone();
    chosen.a = Some(F::cast(best_a));
    let mut report = match calculator {
        CalculatorId::RademacherBound => {
            chosen.delta_prime = Some(F::cast(best_slack));
            rademacher_bound(&chosen)?
        }
        CalculatorId::BernoulliBound => {
            chosen.delta = Some(F::cast(best_slack));
            bernoulli_bound(&chosen)?
        }
    };
    report.extras.insert("a".to_string(), F::cast(best_a));
    match calculator {
        CalculatorId::RademacherBound => {
            report
                .extras
                .insert("delta_prime".to_string(), F::cast(best_slack));
        }
        CalculatorId::BernoulliBound => {
            report
                .extras
                .insert("delta".to_string(), F::cast(best_slack));
        }
    }
    Ok(report)
}
