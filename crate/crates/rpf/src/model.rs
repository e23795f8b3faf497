//! Additive test models with an exact analytic Sobol oracle.
//!
//! A model is a sum of univariate polynomial terms `f(x) = sum_i f_i(x_i)`
//! over independent uniform-`[0,1]` inputs. For this class the first-order
//! Sobol indices have a closed form: `S_i = Var(f_i) / sum_j Var(f_j)`,
//! with the moments computed exactly from `E[X^k] = 1/(k+1)`.
//!
//! Variable indices are 1-based in every public surface (term tables,
//! index sets, reports); dense arrays are 0-based with position `i-1`
//! holding variable `i`.

use std::collections::BTreeSet;
use std::fmt::Write as _;

use thiserror::Error;

use crate::scalar::Real;

/// Errors from model construction, evaluation and the analytic oracle.
#[derive(Debug, Error)]
pub enum ModelError {
    #[error("input dimension must be at least 1")]
    EmptyInput,
    #[error("point has length {got}, model expects {expected}")]
    DimensionMismatch { expected: usize, got: usize },
    #[error("term index {index} outside 1..={p}")]
    TermIndexOutOfRange { index: usize, p: usize },
    #[error("duplicate term for index {index}")]
    DuplicateTerm { index: usize },
    #[error("model has zero total variance")]
    ZeroVariance,
    #[error("index set contains {index}, outside 1..={p}")]
    IndexOutOfRange { index: usize, p: usize },
    #[error("model text line {line}: {reason}")]
    Parse { line: usize, reason: String },
}

/// Per-coordinate input distribution tag. Only the uniform law on `[0,1]`
/// is supported; the tag exists so model files stay forward-compatible.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum InputDistribution {
    Uniform01,
}

/// The input space: dimension and per-coordinate distribution tags.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct InputSpec {
    p: usize,
    distributions: Vec<InputDistribution>,
}

impl InputSpec {
    /// `p` independent uniform-`[0,1]` coordinates.
    pub fn uniform(p: usize) -> Result<Self, ModelError> {
        if p == 0 {
            return Err(ModelError::EmptyInput);
        }
        Ok(Self {
            p,
            distributions: vec![InputDistribution::Uniform01; p],
        })
    }

    pub fn dim(&self) -> usize {
        self.p
    }

    pub fn distribution(&self, i: usize) -> InputDistribution {
        self.distributions[i]
    }
}

/// A univariate polynomial `c0 + c1 x + c2 x^2 + ...`.
#[derive(Clone, Debug, PartialEq)]
pub struct Polynomial<F> {
    coeffs: Vec<F>,
}

impl<F: Real> Polynomial<F> {
    pub fn new(coeffs: Vec<F>) -> Self {
        Self { coeffs }
    }

    pub fn coeffs(&self) -> &[F] {
        &self.coeffs
    }

    /// Horner evaluation.
    pub fn eval(&self, x: F) -> F {
        self.coeffs
            .iter()
            .rev()
            .fold(F::zero(), |acc, &c| acc * x + c)
    }

    /// `E[f(X)]` for `X ~ U[0,1]`, via `E[X^k] = 1/(k+1)`.
    pub fn mean_uniform01(&self) -> F {
        self.coeffs
            .iter()
            .enumerate()
            .map(|(k, &c)| c / F::cast(k + 1))
            .sum()
    }

    /// `E[f(X)^2]` for `X ~ U[0,1]`.
    pub fn second_moment_uniform01(&self) -> F {
        let mut m2 = F::zero();
        for (k, &ck) in self.coeffs.iter().enumerate() {
            for (l, &cl) in self.coeffs.iter().enumerate() {
                m2 += ck * cl / F::cast(k + l + 1);
            }
        }
        m2
    }

    /// `Var(f(X))` for `X ~ U[0,1]`, exact up to rounding.
    pub fn variance_uniform01(&self) -> F {
        let m = self.mean_uniform01();
        self.second_moment_uniform01() - m * m
    }
}

/// An additive model `f(x) = sum_i f_i(x_i)` with at most one polynomial
/// term per coordinate.
#[derive(Clone, Debug, PartialEq)]
pub struct AdditiveModel<F> {
    input: InputSpec,
    /// `(variable index (1-based), term)`, sorted by index.
    terms: Vec<(usize, Polynomial<F>)>,
}

/// First-order Sobol indices of a model together with the output variance.
///
/// For the analytic indices of an additive model, `values` are nonnegative
/// and sum to 1. Estimated vectors stored in this type may violate both.
#[derive(Clone, Debug, PartialEq)]
pub struct SobolVector<F> {
    /// `values[i]` is the index of variable `i+1`.
    pub values: Vec<F>,
    /// `Var(Y)` in squared output units.
    pub total_variance: F,
}

impl<F: Real> AdditiveModel<F> {
    /// Builds a model over `p` uniform inputs; `terms` pairs a 1-based
    /// variable index with the coefficients `(c0, c1, ...)` of its term.
    pub fn new(p: usize, terms: Vec<(usize, Vec<F>)>) -> Result<Self, ModelError> {
        let input = InputSpec::uniform(p)?;
        let mut seen = BTreeSet::new();
        let mut built = Vec::with_capacity(terms.len());
        for (index, coeffs) in terms {
            if index == 0 || index > p {
                return Err(ModelError::TermIndexOutOfRange { index, p });
            }
            if !seen.insert(index) {
                return Err(ModelError::DuplicateTerm { index });
            }
            built.push((index, Polynomial::new(coeffs)));
        }
        built.sort_by_key(|&(i, _)| i);
        Ok(Self {
            input,
            terms: built,
        })
    }

    pub fn input(&self) -> &InputSpec {
        &self.input
    }

    pub fn dim(&self) -> usize {
        self.input.dim()
    }

    /// `(1-based index, polynomial)` pairs, sorted by index.
    pub fn terms(&self) -> &[(usize, Polynomial<F>)] {
        &self.terms
    }

    /// Evaluates `f` at a point. Pure and deterministic.
    pub fn evaluate(&self, x: &[F]) -> Result<F, ModelError> {
        if x.len() != self.dim() {
            return Err(ModelError::DimensionMismatch {
                expected: self.dim(),
                got: x.len(),
            });
        }
        Ok(self.eval_unchecked(x))
    }

    fn eval_unchecked(&self, x: &[F]) -> F {
        self.terms
            .iter()
            .map(|(i, poly)| poly.eval(x[i - 1]))
            .sum()
    }

    /// Exact first-order Sobol indices from the uniform moments.
    ///
    /// Errors when the model output has zero variance.
    pub fn analytic_sobol(&self) -> Result<SobolVector<F>, ModelError> {
        let mut values = vec![F::zero(); self.dim()];
        let mut total = F::zero();
        for (i, poly) in &self.terms {
            let v = poly.variance_uniform01();
            values[i - 1] = v;
            total += v;
        }
        if !(total > F::zero()) {
            return Err(ModelError::ZeroVariance);
        }
        for v in &mut values {
            *v /= total;
        }
        Ok(SobolVector {
            values,
            total_variance: total,
        })
    }

    /// Closed Sobol index of a group: `S_F = sum_{i in F} S_i`
    /// (1-based indices).
    pub fn closed_index(&self, group: &BTreeSet<usize>) -> Result<F, ModelError> {
        let p = self.dim();
        for &i in group {
            if i == 0 || i > p {
                return Err(ModelError::IndexOutOfRange { index: i, p });
            }
        }
        let sobol = self.analytic_sobol()?;
        Ok(group.iter().map(|&i| sobol.values[i - 1]).sum())
    }

    /// The true support: 1-based indices of terms with nonzero variance.
    pub fn active_variables(&self) -> BTreeSet<usize> {
        self.terms
            .iter()
            .filter(|(_, poly)| poly.variance_uniform01() != F::zero())
            .map(|&(i, _)| i)
            .collect()
    }

    /// Text form: one term per line, `index c0 c1 c2 ...`, ASCII decimal.
    pub fn to_text(&self) -> String {
        let mut out = String::new();
        for (i, poly) in &self.terms {
            let _ = write!(out, "{i}");
            for c in poly.coeffs() {
                let _ = write!(out, " {c}");
            }
            out.push('\n');
        }
        out
    }

    /// Parses the text form; `p` comes from the caller (the file holds
    /// only the terms).
    pub fn from_text(p: usize, text: &str) -> Result<Self, ModelError> {
        let mut terms = Vec::new();
        for (lineno, line) in text.lines().enumerate() {
            let line = line.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            let mut fields = line.split_whitespace();
            let index: usize = fields
                .next()
                .expect("non-empty line")
                .parse()
                .map_err(|e| ModelError::Parse {
                    line: lineno + 1,
                    reason: format!("bad index: {e}"),
                })?;
            let coeffs = fields
                .map(|tok| {
                    tok.parse::<f64>().map(F::cast).map_err(|e| ModelError::Parse {
                        line: lineno + 1,
                        reason: format!("bad coefficient {tok:?}: {e}"),
                    })
                })
                .collect::<Result<Vec<F>, _>>()?;
            if coeffs.is_empty() {
                return Err(ModelError::Parse {
                    line: lineno + 1,
                    reason: "term needs at least one coefficient".into(),
                });
            }
            terms.push((index, coeffs));
        }
        Self::new(p, terms)
    }
}

/// A black-box scalar model the Monte Carlo engine can evaluate.
///
/// Implementations must be pure: the engine may call `eval` concurrently.
pub trait ModelFn<F: Real>: Sync {
    fn dim(&self) -> usize;

    /// Evaluates at a point of length `dim()`.
    fn eval(&self, x: &[F]) -> F;
}

impl<F: Real> ModelFn<F> for AdditiveModel<F> {
    fn dim(&self) -> usize {
        self.input.dim()
    }

    fn eval(&self, x: &[F]) -> F {
        debug_assert_eq!(x.len(), self.dim());
        self.eval_unchecked(x)
    }
}
