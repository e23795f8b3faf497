//! Random design matrices and the matrix properties the recovery
//! guarantees rely on.
//!
//! A design is an `n x p` matrix over `{0,1}` (Bernoulli, expander) or
//! `{-1,+1}` (Rademacher) whose rows encode which variables are frozen in
//! each replication: row `j` freezes `F_j = {i : phi[j][i] = 1}`.
//!
//! Besides the three samplers, the module computes coherence statistics of
//! the normalized Gram matrix `(1/n) phi^T phi`, verifies the unbalanced
//! expansion property by exhaustive subset enumeration, and searches for
//! counterexamples to the universal distortion inequality.

use std::collections::BTreeSet;
use std::fmt::Write as _;

use rand::seq::index::sample as sample_indices;
use thiserror::Error;

use crate::rng::{derive_seed, stream_rng, unit_f64, STREAM_DESIGN_ENTRY, STREAM_EXPANDER_COL, STREAM_UDP_TRIAL};
use crate::scalar::Real;

/// Default subset budget for [`DesignMatrix::verify_expander`].
pub const DEFAULT_EXPANDER_BUDGET: u64 = 2_000_000;

#[derive(Debug, Error)]
pub enum DesignError {
    #[error("matrix dimensions must be at least 1x1, got {n}x{p}")]
    EmptyMatrix { n: usize, p: usize },
    #[error("Bernoulli parameter must lie in (0,1), got {mu}")]
    BadBernoulliParameter { mu: f64 },
    #[error("expander left degree must satisfy 1 <= d <= n, got d={d}, n={n}")]
    BadLeftDegree { d: usize, n: usize },
    #[error("entry ({row},{col}) = {value} outside the {alphabet} alphabet")]
    BadEntry {
        row: usize,
        col: usize,
        value: i8,
        alphabet: Alphabet,
    },
    #[error("column {col} has {ones} ones, expected left degree {d}")]
    NotLeftRegular { col: usize, ones: usize, d: usize },
    #[error("expansion check needs a 0/1 left-regular matrix: {reason}")]
    NotAdjacency { reason: String },
    #[error("{needed} subsets exceed the budget of {budget}; use randomized checks instead")]
    BudgetExceeded { needed: u128, budget: u64 },
    #[error("freeze set contains {index}, outside 1..={p}")]
    FreezeIndexOutOfRange { index: usize, p: usize },
    #[error("expected {expected} entries, got {got}")]
    WrongEntryCount { expected: usize, got: usize },
    #[error("UDP parameters need rho > 0, 0 < kappa < 1/2, s >= 1, trials >= 1")]
    BadUdpParameters,
    #[error("design text {reason}")]
    ParseText { reason: String },
}

/// Entry alphabet of a design matrix.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Alphabet {
    /// `{0, 1}`
    Binary,
    /// `{-1, +1}`
    Signed,
}

impl std::fmt::Display for Alphabet {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            Alphabet::Binary => write!(f, "01"),
            Alphabet::Signed => write!(f, "pm1"),
        }
    }
}

/// The three sampling families.
#[derive(Clone, Copy, Debug, PartialEq)]
pub enum DesignScheme {
    /// I.i.d. entries, `P(1) = mu`, `P(0) = 1 - mu`.
    Bernoulli { mu: f64 },
    /// I.i.d. entries, `P(+1) = P(-1) = 1/2`.
    Rademacher,
    /// Each column an independent uniform `d`-subset of the rows
    /// (left-`d`-regular bipartite graph).
    ExpanderRandom { d: usize },
}

impl DesignScheme {
    pub fn alphabet(&self) -> Alphabet {
        match self {
            DesignScheme::Rademacher => Alphabet::Signed,
            _ => Alphabet::Binary,
        }
    }

    fn validate(&self, n: usize) -> Result<(), DesignError> {
        match *self {
            DesignScheme::Bernoulli { mu } => {
                if !(mu > 0.0 && mu < 1.0) {
                    return Err(DesignError::BadBernoulliParameter { mu });
                }
            }
            DesignScheme::ExpanderRandom { d } => {
                if d == 0 || d > n {
                    return Err(DesignError::BadLeftDegree { d, n });
                }
            }
            DesignScheme::Rademacher => {}
        }
        Ok(())
    }

    fn token(&self) -> String {
        match self {
            DesignScheme::Bernoulli { mu } => format!("bernoulli({mu})"),
            DesignScheme::Rademacher => "rademacher".to_string(),
            DesignScheme::ExpanderRandom { d } => format!("expander({d})"),
        }
    }

    fn parse_token(tok: &str) -> Result<Self, DesignError> {
        if tok == "rademacher" {
            return Ok(DesignScheme::Rademacher);
        }
        let inner = |prefix: &str| -> Option<&str> {
            tok.strip_prefix(prefix)?.strip_prefix('(')?.strip_suffix(')')
        };
        if let Some(arg) = inner("bernoulli") {
            let mu: f64 = arg.parse().map_err(|e| DesignError::ParseText {
                reason: format!("bad bernoulli parameter {arg:?}: {e}"),
            })?;
            return Ok(DesignScheme::Bernoulli { mu });
        }
        if let Some(arg) = inner("expander") {
            let d: usize = arg.parse().map_err(|e| DesignError::ParseText {
                reason: format!("bad expander degree {arg:?}: {e}"),
            })?;
            return Ok(DesignScheme::ExpanderRandom { d });
        }
        Err(DesignError::ParseText {
            reason: format!("unknown scheme {tok:?}"),
        })
    }
}

/// An `n x p` design with its sampling scheme and seed.
///
/// Entries are stored exactly (`i8`); conversion to the working scalar
/// happens at the point of use. The scheme tag records the family a
/// matrix was drawn from (or claimed to belong to, for matrices built
/// from explicit rows); the alphabet and, for expanders, left-regularity
/// are enforced regardless.
#[derive(Clone, Debug, PartialEq)]
pub struct DesignMatrix {
    n: usize,
    p: usize,
    entries: Vec<i8>, // row-major
    scheme: DesignScheme,
    seed: u64,
}

/// Coherence statistics of `Psi = (1/n) phi^T phi`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct GramStats<F> {
    /// `theta_1 = max_{k != l} |Psi_{kl}|`.
    pub max_coherence: F,
    /// `theta_2 = min_i Psi_{ii} = min_i (1/n) ||phi_i||^2`.
    pub min_col_normsq_over_n: F,
    /// `(min, max)` of the diagonal `(1/n) ||phi_i||^2`.
    pub diag_range: (F, F),
}

/// Outcome of the exhaustive expansion check.
#[derive(Clone, Debug, PartialEq)]
pub struct ExpanderReport {
    pub is_expander: bool,
    /// Present only on failure: the violating set of minimal expansion
    /// ratio `|N(I)| / (d |I|)`.
    pub witness: Option<ExpanderWitness>,
}

#[derive(Clone, Debug, PartialEq)]
pub struct ExpanderWitness {
    /// 1-based column indices of the violating set.
    pub columns: Vec<usize>,
    pub neighborhood_size: usize,
    pub required: f64,
    pub ratio: f64,
}

/// A witnessed violation of the universal distortion inequality
/// `||gamma_T||_1 <= rho sqrt(s) ||phi gamma||_2 + kappa ||gamma||_1`.
#[derive(Clone, Debug, PartialEq)]
pub struct UdpViolation<F> {
    pub gamma: Vec<F>,
    /// 1-based indices of the worst set `T` (the `s` largest magnitudes).
    pub t_set: BTreeSet<usize>,
    pub lhs: F,
    pub rhs: F,
}

/// Samples a design. Identical `(scheme, n, p, seed)` give identical
/// matrices; entries are derived from per-entry counters, so the result
/// does not depend on evaluation order.
pub fn sample_design(
    scheme: DesignScheme,
    n: usize,
    p: usize,
    seed: u64,
) -> Result<DesignMatrix, DesignError> {
    if n == 0 || p == 0 {
        return Err(DesignError::EmptyMatrix { n, p });
    }
    scheme.validate(n)?;
    let mut entries = vec![0i8; n * p];
    match scheme {
        DesignScheme::Bernoulli { mu } => {
            for (idx, e) in entries.iter_mut().enumerate() {
                let u = unit_f64(derive_seed(seed, STREAM_DESIGN_ENTRY, idx as u64));
                *e = i8::from(u < mu);
            }
        }
        DesignScheme::Rademacher => {
            for (idx, e) in entries.iter_mut().enumerate() {
                let bits = derive_seed(seed, STREAM_DESIGN_ENTRY, idx as u64);
                *e = if bits >> 63 == 1 { 1 } else { -1 };
            }
        }
        DesignScheme::ExpanderRandom { d } => {
            for col in 0..p {
                let mut rng = stream_rng(seed, STREAM_EXPANDER_COL, col as u64);
                for row in sample_indices(&mut rng, n, d) {
                    entries[row * p + col] = 1;
                }
            }
        }
    }
    Ok(DesignMatrix {
        n,
        p,
        entries,
        scheme,
        seed,
    })
}

impl DesignMatrix {
    /// Builds a matrix from explicit row-major entries, validating the
    /// scheme's alphabet (and left-regularity for expanders).
    pub fn from_rows(
        scheme: DesignScheme,
        seed: u64,
        n: usize,
        p: usize,
        entries: Vec<i8>,
    ) -> Result<Self, DesignError> {
        if n == 0 || p == 0 {
            return Err(DesignError::EmptyMatrix { n, p });
        }
        scheme.validate(n)?;
        if entries.len() != n * p {
            return Err(DesignError::WrongEntryCount {
                expected: n * p,
                got: entries.len(),
            });
        }
        let alphabet = scheme.alphabet();
        for (idx, &v) in entries.iter().enumerate() {
            let ok = match alphabet {
                Alphabet::Binary => v == 0 || v == 1,
                Alphabet::Signed => v == -1 || v == 1,
            };
            if !ok {
                return Err(DesignError::BadEntry {
                    row: idx / p,
                    col: idx % p,
                    value: v,
                    alphabet,
                });
            }
        }
        let matrix = Self {
            n,
            p,
            entries,
            scheme,
            seed,
        };
        if let DesignScheme::ExpanderRandom { d } = scheme {
            for col in 0..p {
                let ones = matrix.column_ones(col);
                if ones != d {
                    return Err(DesignError::NotLeftRegular { col, ones, d });
                }
            }
        }
        Ok(matrix)
    }

    /// Rebuilds a matrix from freeze sets (1-based variable indices):
    /// the inverse of [`DesignMatrix::freeze_sets`] for both alphabets.
    pub fn from_freeze_sets(
        scheme: DesignScheme,
        seed: u64,
        p: usize,
        sets: &[BTreeSet<usize>],
    ) -> Result<Self, DesignError> {
        let n = sets.len();
        if n == 0 || p == 0 {
            return Err(DesignError::EmptyMatrix { n, p });
        }
        let off = match scheme.alphabet() {
            Alphabet::Binary => 0i8,
            Alphabet::Signed => -1i8,
        };
        let mut entries = vec![off; n * p];
        for (j, set) in sets.iter().enumerate() {
            for &i in set {
                if i == 0 || i > p {
                    return Err(DesignError::FreezeIndexOutOfRange { index: i, p });
                }
                entries[j * p + (i - 1)] = 1;
            }
        }
        Self::from_rows(scheme, seed, n, p, entries)
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn p(&self) -> usize {
        self.p
    }

    pub fn scheme(&self) -> DesignScheme {
        self.scheme
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    pub fn alphabet(&self) -> Alphabet {
        self.scheme.alphabet()
    }

    pub fn entry(&self, row: usize, col: usize) -> i8 {
        self.entries[row * self.p + col]
    }

    pub fn row(&self, row: usize) -> &[i8] {
        &self.entries[row * self.p..(row + 1) * self.p]
    }

    /// Column `col` converted to the working scalar.
    pub fn column<F: Real>(&self, col: usize) -> Vec<F> {
        (0..self.n).map(|j| F::cast(self.entry(j, col))).collect()
    }

    fn column_ones(&self, col: usize) -> usize {
        (0..self.n).filter(|&j| self.entry(j, col) == 1).count()
    }

    /// Freeze sets `F_j = {i : phi[j][i] = 1}` (1-based), for both
    /// alphabets.
    pub fn freeze_sets(&self) -> Vec<BTreeSet<usize>> {
        (0..self.n)
            .map(|j| {
                self.row(j)
                    .iter()
                    .enumerate()
                    .filter(|&(_, &v)| v == 1)
                    .map(|(i, _)| i + 1)
                    .collect()
            })
            .collect()
    }

    /// Exact coherence statistics of `(1/n) phi^T phi`.
    ///
    /// Inner products are accumulated in integers, so the diagonal of a
    /// Rademacher design comes out exactly 1. Cost is `O(n p^2)`.
    pub fn gram_stats<F: Real>(&self) -> GramStats<F> {
        let n = F::cast(self.n);
        let mut max_off: i64 = 0;
        for k in 0..self.p {
            for l in (k + 1)..self.p {
                let dot: i64 = (0..self.n)
                    .map(|j| i64::from(self.entry(j, k)) * i64::from(self.entry(j, l)))
                    .sum();
                max_off = max_off.max(dot.abs());
            }
        }
        let mut diag_min: i64 = i64::MAX;
        let mut diag_max: i64 = i64::MIN;
        for i in 0..self.p {
            let sq: i64 = (0..self.n)
                .map(|j| {
                    let v = i64::from(self.entry(j, i));
                    v * v
                })
                .sum();
            diag_min = diag_min.min(sq);
            diag_max = diag_max.max(sq);
        }
        GramStats {
            max_coherence: F::cast(max_off) / n,
            min_col_normsq_over_n: F::cast(diag_min) / n,
            diag_range: (F::cast(diag_min) / n, F::cast(diag_max) / n),
        }
    }

    /// Exhaustively checks the `(s, e)`-unbalanced expansion property:
    /// every column set `I` with `|I| <= s` must satisfy
    /// `|N(I)| >= (1 - e) d |I|`.
    ///
    /// Requires a 0/1 left-regular matrix and
    /// `sum_{k<=s} C(p,k) <= budget`. Comparisons carry a `1e-9` slack so
    /// sets exactly on the bound count as satisfying.
    pub fn verify_expander(
        &self,
        s: usize,
        e: f64,
        budget: u64,
    ) -> Result<ExpanderReport, DesignError> {
        if self.alphabet() != Alphabet::Binary {
            return Err(DesignError::NotAdjacency {
                reason: "entries must be 0/1".into(),
            });
        }
        let d = self.column_ones(0);
        if d == 0 {
            return Err(DesignError::NotAdjacency {
                reason: "column 1 has no ones".into(),
            });
        }
        for col in 1..self.p {
            let ones = self.column_ones(col);
            if ones != d {
                return Err(DesignError::NotLeftRegular { col, ones, d });
            }
        }
        let s = s.min(self.p).max(1);
        let needed = subset_count(self.p, s);
        if needed > u128::from(budget) {
            return Err(DesignError::BudgetExceeded { needed, budget });
        }

        // column bitsets over the rows
        let words = self.n.div_ceil(64);
        let mut cols = vec![0u64; self.p * words];
        for i in 0..self.p {
            for j in 0..self.n {
                if self.entry(j, i) == 1 {
                    cols[i * words + j / 64] |= 1u64 << (j % 64);
                }
            }
        }

        struct Search<'a> {
            cols: &'a [u64],
            words: usize,
            p: usize,
            d: usize,
            e: f64,
            worst_ratio: f64,
            worst: Option<ExpanderWitness>,
            stack: Vec<usize>,
        }

        impl Search<'_> {
            fn visit(&mut self, union: &[u64]) {
                let cover: u32 = union.iter().map(|w| w.count_ones()).sum();
                let k = self.stack.len();
                let required = (1.0 - self.e) * (self.d * k) as f64;
                let ratio = f64::from(cover) / (self.d * k) as f64;
                if (f64::from(cover) + 1e-9) < required && ratio < self.worst_ratio {
                    self.worst_ratio = ratio;
                    self.worst = Some(ExpanderWitness {
                        columns: self.stack.iter().map(|&c| c + 1).collect(),
                        neighborhood_size: cover as usize,
                        required,
                        ratio,
                    });
                }
            }

            fn recurse(&mut self, start: usize, depth_left: usize, union: &[u64]) {
                for col in start..self.p {
                    let mut next = union.to_vec();
                    for (w, &c) in next
                        .iter_mut()
                        .zip(&self.cols[col * self.words..(col + 1) * self.words])
                    {
                        *w |= c;
                    }
                    self.stack.push(col);
                    self.visit(&next);
                    if depth_left > 1 {
                        self.recurse(col + 1, depth_left - 1, &next);
                    }
                    self.stack.pop();
                }
            }
        }

        let mut search = Search {
            cols: &cols,
            words,
            p: self.p,
            d,
            e,
            worst_ratio: f64::INFINITY,
            worst: None,
            stack: Vec::with_capacity(s),
        };
        search.recurse(0, s, &vec![0u64; words]);

        Ok(ExpanderReport {
            is_expander: search.worst.is_none(),
            witness: search.worst,
        })
    }

    /// Randomized search for a counterexample to the universal distortion
    /// inequality with parameters `(rho, kappa)` at sparsity `s`.
    ///
    /// The canonical basis vectors are always tried first (catching
    /// degenerate columns deterministically), followed by `trials` random
    /// candidates alternating sparse sign patterns, sparse uniform and
    /// dense uniform vectors. For each candidate the adversarial `T` is
    /// the set of the `s` largest magnitudes. Absence of a violation is
    /// evidence, not proof: the exact check is nonconvex.
    pub fn falsify_udp<F: Real>(
        &self,
        s: usize,
        rho: F,
        kappa: F,
        trials: usize,
        seed: u64,
    ) -> Result<Option<UdpViolation<F>>, DesignError> {
        if !(rho > F::zero()) || !(kappa > F::zero() && kappa < F::cast(0.5)) || s == 0 || trials == 0
        {
            return Err(DesignError::BadUdpParameters);
        }
        let mut gamma = vec![F::zero(); self.p];
        for j in 0..self.p {
            gamma[j] = F::one();
            if let Some(v) = self.udp_violation(&gamma, s, rho, kappa) {
                return Ok(Some(v));
            }
            gamma[j] = F::zero();
        }
        for trial in 0..trials {
            let mut rng = stream_rng(seed, STREAM_UDP_TRIAL, trial as u64);
            gamma.iter_mut().for_each(|g| *g = F::zero());
            match trial % 3 {
                0 => {
                    // sparse sign pattern
                    let nnz = 1 + (trial / 3) % (2 * s).min(self.p);
                    for idx in sample_indices(&mut rng, self.p, nnz) {
                        let sign = if F::uniform01(&mut rng) < F::cast(0.5) {
                            -F::one()
                        } else {
                            F::one()
                        };
                        gamma[idx] = sign;
                    }
                }
                1 => {
                    // sparse with uniform magnitudes
                    let nnz = 1 + (trial / 3) % (2 * s).min(self.p);
                    for idx in sample_indices(&mut rng, self.p, nnz) {
                        gamma[idx] = F::cast(2.0) * F::uniform01(&mut rng) - F::one();
                    }
                }
                _ => {
                    // dense
                    for g in gamma.iter_mut() {
                        *g = F::cast(2.0) * F::uniform01(&mut rng) - F::one();
                    }
                }
            }
            if let Some(v) = self.udp_violation(&gamma, s, rho, kappa) {
                return Ok(Some(v));
            }
        }
        Ok(None)
    }

    fn udp_violation<F: Real>(
        &self,
        gamma: &[F],
        s: usize,
        rho: F,
        kappa: F,
    ) -> Option<UdpViolation<F>> {
        let l1: F = gamma.iter().map(|g| g.abs()).sum();
        if l1 == F::zero() {
            return None;
        }
        // ||phi gamma||_2
        let mut sq = F::zero();
        for j in 0..self.n {
            let row = self.row(j);
            let dot: F = row
                .iter()
                .zip(gamma)
                .filter(|(&e, _)| e != 0)
                .map(|(&e, &g)| F::cast(e) * g)
                .sum();
            sq += dot * dot;
        }
        // the worst T of size <= s: largest magnitudes
        let mut order: Vec<usize> = (0..self.p).collect();
        order.sort_by(|&a, &b| {
            gamma[b]
                .abs()
                .partial_cmp(&gamma[a].abs())
                .unwrap_or(std::cmp::Ordering::Equal)
        });
        let t_cols = &order[..s.min(self.p)];
        let lhs: F = t_cols.iter().map(|&i| gamma[i].abs()).sum();
        let rhs = rho * F::cast(s).sqrt() * sq.sqrt() + kappa * l1;
        if lhs > rhs {
            Some(UdpViolation {
                gamma: gamma.to_vec(),
                t_set: t_cols.iter().map(|&i| i + 1).collect(),
                lhs,
                rhs,
            })
        } else {
            None
        }
    }

    /// Text form: header `n p alphabet seed scheme`, then `n` rows of
    /// space-separated entries.
    pub fn to_text(&self) -> String {
        let mut out = format!(
            "{} {} {} {} {}\n",
            self.n,
            self.p,
            self.alphabet(),
            self.seed,
            self.scheme.token()
        );
        for j in 0..self.n {
            for (i, v) in self.row(j).iter().enumerate() {
                if i > 0 {
                    out.push(' ');
                }
                let _ = write!(out, "{v}");
            }
            out.push('\n');
        }
        out
    }

    pub fn from_text(text: &str) -> Result<Self, DesignError> {
        let mut lines = text.lines();
        let header = lines.next().ok_or_else(|| DesignError::ParseText {
            reason: "empty input".into(),
        })?;
        let fields: Vec<&str> = header.split_whitespace().collect();
        if fields.len() != 5 {
            return Err(DesignError::ParseText {
                reason: format!("header needs 5 fields, got {}", fields.len()),
            });
        }
        let parse_num = |tok: &str, what: &str| -> Result<u64, DesignError> {
            tok.parse().map_err(|e| DesignError::ParseText {
                reason: format!("bad {what} {tok:?}: {e}"),
            })
        };
        let n = parse_num(fields[0], "row count")? as usize;
        let p = parse_num(fields[1], "column count")? as usize;
        let seed = parse_num(fields[3], "seed")?;
        let scheme = DesignScheme::parse_token(fields[4])?;
        if fields[2] != scheme.alphabet().to_string() {
            return Err(DesignError::ParseText {
                reason: format!(
                    "alphabet {} does not match scheme {}",
                    fields[2],
                    scheme.token()
                ),
            });
        }
        let mut entries = Vec::with_capacity(n * p);
        for line in lines {
            if line.trim().is_empty() {
                continue;
            }
            for tok in line.split_whitespace() {
                let v: i8 = tok.parse().map_err(|e| DesignError::ParseText {
                    reason: format!("bad entry {tok:?}: {e}"),
                })?;
                entries.push(v);
            }
        }
        Self::from_rows(scheme, seed, n, p, entries)
    }
}

/// `sum_{k=1..s} C(p, k)` without overflow.
fn subset_count(p: usize, s: usize) -> u128 {
    let mut total: u128 = 0;
    let mut binom: u128 = 1;
    for k in 1..=s {
        binom = binom.saturating_mul((p - k + 1) as u128) / k as u128;
        total = total.saturating_add(binom);
    }
    total
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn bernoulli_entry_mean_near_mu() {
        let m = sample_design(DesignScheme::Bernoulli { mu: 0.5 }, 30, 300, 1).unwrap();
        let ones: usize = (0..30).map(|j| m.row(j).iter().filter(|&&v| v == 1).count()).sum();
        let mean = ones as f64 / 9000.0;
        // 3 sigma band is +-0.0158; the documented acceptance band is wider
        assert!((0.45..=0.55).contains(&mean), "mean {mean}");
    }

    #[test]
    fn rademacher_alphabet_only() {
        let m = sample_design(DesignScheme::Rademacher, 2, 2, 99).unwrap();
        for j in 0..2 {
            for &v in m.row(j) {
                assert!(v == 1 || v == -1);
            }
        }
    }

    #[test]
    fn expander_columns_left_regular() {
        let m = sample_design(DesignScheme::ExpanderRandom { d: 3 }, 10, 5, 7).unwrap();
        for i in 0..5 {
            let ones: i32 = (0..10).map(|j| i32::from(m.entry(j, i))).sum();
            assert_eq!(ones, 3);
        }
    }

    #[test]
    fn expander_degree_must_fit() {
        assert!(matches!(
            sample_design(DesignScheme::ExpanderRandom { d: 11 }, 10, 5, 7),
            Err(DesignError::BadLeftDegree { d: 11, n: 10 })
        ));
    }

    #[test]
    fn sampling_is_reproducible() {
        for scheme in [
            DesignScheme::Bernoulli { mu: 0.3 },
            DesignScheme::Rademacher,
            DesignScheme::ExpanderRandom { d: 4 },
        ] {
            let a = sample_design(scheme, 12, 17, 42).unwrap();
            let b = sample_design(scheme, 12, 17, 42).unwrap();
            assert_eq!(a, b);
            let c = sample_design(scheme, 12, 17, 43).unwrap();
            assert_ne!(a, c);
        }
    }

    #[test]
    fn freeze_sets_read_ones_for_both_alphabets() {
        let bin = DesignMatrix::from_rows(
            DesignScheme::Bernoulli { mu: 0.5 },
            0,
            2,
            3,
            vec![1, 0, 1, 0, 0, 0],
        )
        .unwrap();
        let sets = bin.freeze_sets();
        assert_eq!(sets[0], [1, 3].into_iter().collect());
        assert!(sets[1].is_empty());

        let signed =
            DesignMatrix::from_rows(DesignScheme::Rademacher, 0, 1, 3, vec![1, -1, 1]).unwrap();
        assert_eq!(signed.freeze_sets()[0], [1, 3].into_iter().collect());
    }

    #[test]
    fn gram_stats_orthogonal_rademacher() {
        let m = DesignMatrix::from_rows(DesignScheme::Rademacher, 0, 2, 2, vec![1, 1, 1, -1])
            .unwrap();
        let g: GramStats<f64> = m.gram_stats();
        assert_eq!(g.max_coherence, 0.0);
        assert_eq!(g.min_col_normsq_over_n, 1.0);
        assert_eq!(g.diag_range, (1.0, 1.0));
    }

    #[test]
    fn gram_stats_binary_identity() {
        let m = DesignMatrix::from_rows(
            DesignScheme::Bernoulli { mu: 0.5 },
            0,
            2,
            2,
            vec![1, 0, 0, 1],
        )
        .unwrap();
        let g: GramStats<f64> = m.gram_stats();
        assert_eq!(g.max_coherence, 0.0);
        assert_eq!(g.min_col_normsq_over_n, 0.5);
    }

    #[test]
    fn rademacher_gram_diagonal_exactly_one() {
        let m = sample_design(DesignScheme::Rademacher, 23, 40, 5).unwrap();
        let g: GramStats<f64> = m.gram_stats();
        assert_eq!(g.diag_range, (1.0, 1.0));
    }

    #[test]
    fn identity_graph_is_expander_for_any_s() {
        // p = n, d = 1, column i mapped to row i: disjoint neighborhoods
        let p = 6;
        let mut entries = vec![0i8; p * p];
        for i in 0..p {
            entries[i * p + i] = 1;
        }
        let m = DesignMatrix::from_rows(DesignScheme::ExpanderRandom { d: 1 }, 0, p, p, entries)
            .unwrap();
        let report = m.verify_expander(p, 0.0, DEFAULT_EXPANDER_BUDGET).unwrap();
        assert!(report.is_expander);
        assert!(report.witness.is_none());
    }

    #[test]
    fn collision_graph_fails() {
        // two columns sharing one single-1 row: |N({1,2})| = 1 < 0.75*1*2
        let m = DesignMatrix::from_rows(DesignScheme::ExpanderRandom { d: 1 }, 0, 1, 2, vec![1, 1])
            .unwrap();
        let report = m.verify_expander(2, 0.25, DEFAULT_EXPANDER_BUDGET).unwrap();
        assert!(!report.is_expander);
        let w = report.witness.unwrap();
        assert_eq!(w.columns, vec![1, 2]);
        assert_eq!(w.neighborhood_size, 1);
        assert!((w.required - 1.5).abs() < 1e-12);
    }

    #[test]
    fn expander_check_rejects_irregular_and_signed() {
        let m = DesignMatrix::from_rows(
            DesignScheme::Bernoulli { mu: 0.5 },
            0,
            2,
            2,
            vec![1, 0, 1, 1],
        )
        .unwrap();
        assert!(matches!(
            m.verify_expander(1, 0.1, DEFAULT_EXPANDER_BUDGET),
            Err(DesignError::NotLeftRegular { .. })
        ));
        let r = sample_design(DesignScheme::Rademacher, 3, 3, 0).unwrap();
        assert!(matches!(
            r.verify_expander(1, 0.1, DEFAULT_EXPANDER_BUDGET),
            Err(DesignError::NotAdjacency { .. })
        ));
    }

    #[test]
    fn expander_budget_is_enforced() {
        let m = sample_design(DesignScheme::ExpanderRandom { d: 2 }, 10, 50, 3).unwrap();
        assert!(matches!(
            m.verify_expander(5, 0.1, 1000),
            Err(DesignError::BudgetExceeded { .. })
        ));
    }

    #[test]
    fn udp_finds_zero_column() {
        // column 2 all-zero: gamma = e_2 gives ||gamma_T||_1 = 1 > kappa
        let m = DesignMatrix::from_rows(
            DesignScheme::Bernoulli { mu: 0.5 },
            0,
            2,
            2,
            vec![1, 0, 1, 0],
        )
        .unwrap();
        let v = m
            .falsify_udp::<f64>(1, 0.1, 0.45, 10, 0)
            .unwrap()
            .expect("violation");
        assert_eq!(v.t_set, [2].into_iter().collect());
        assert!(v.lhs > v.rhs);
    }

    #[test]
    fn udp_holds_on_orthogonal_design() {
        // (1/n) phi^T phi = I: Cauchy-Schwarz gives the inequality with
        // rho = 1/sqrt(n) for any kappa > 0
        let m = DesignMatrix::from_rows(
            DesignScheme::Rademacher,
            0,
            4,
            4,
            vec![
                1, 1, 1, 1, //
                1, -1, 1, -1, //
                1, 1, -1, -1, //
                1, -1, -1, 1,
            ],
        )
        .unwrap();
        let v = m.falsify_udp::<f64>(1, 0.5, 0.45, 10_000, 1).unwrap();
        assert!(v.is_none(), "unexpected violation: {v:?}");
    }

    #[test]
    fn udp_rejects_bad_parameters() {
        let m = sample_design(DesignScheme::Rademacher, 2, 2, 0).unwrap();
        assert!(m.falsify_udp::<f64>(1, 0.0, 0.4, 1, 0).is_err());
        assert!(m.falsify_udp::<f64>(1, 0.1, 0.6, 1, 0).is_err());
        assert!(m.falsify_udp::<f64>(0, 0.1, 0.4, 1, 0).is_err());
    }

    #[test]
    fn text_roundtrip_all_schemes() {
        for scheme in [
            DesignScheme::Bernoulli { mu: 0.25 },
            DesignScheme::Rademacher,
            DesignScheme::ExpanderRandom { d: 2 },
        ] {
            let m = sample_design(scheme, 5, 7, 11).unwrap();
            let text = m.to_text();
            let back = DesignMatrix::from_text(&text).unwrap();
            assert_eq!(m, back);
        }
    }

    #[test]
    fn text_rejects_alphabet_mismatch() {
        let bad = "1 2 pm1 0 bernoulli(0.5)\n1 0\n";
        assert!(matches!(
            DesignMatrix::from_text(bad),
            Err(DesignError::ParseText { .. })
        ));
    }

    #[test]
    fn subset_count_small_values() {
        assert_eq!(subset_count(4, 2), 4 + 6);
        assert_eq!(subset_count(40, 3), 40 + 780 + 9880);
    }
}
