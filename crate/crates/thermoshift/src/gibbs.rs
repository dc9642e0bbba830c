//! Reference measures and Gibbs certification.
//!
//! A measure is Gibbs for a potential at pressure P when the cylinder masses
//! satisfy c0^-1 <= mu[w] / exp(-P n + S_n phi) <= c0 uniformly. The
//! estimator here scans words up to a depth and reports the smallest c0 the
//! scanned words allow, along with a flag for the telltale exponential
//! growth that means the sandwich is failing (wrong P, wrong potential, or
//! a measure that simply is not Gibbs).

use serde::Serialize;

use crate::error::{Error, Result};
use crate::gauss::{gauss_digit_tail, LogContinuants};
use crate::potential::Potential;
use crate::shift::{Constraint, ShiftSpec, Symbol, Witness, Word};

/// Per-symbol probabilities for product measures, finite or geometric.
#[derive(Debug, Clone)]
pub enum WeightSeq {
    Finite(Vec<f64>),
    /// prob(i) = first * ratio^i over all i >= 0.
    Geometric {
        first: f64,
        ratio: f64,
    },
}

impl WeightSeq {
    fn prob(&self, i: usize) -> f64 {
        match self {
            WeightSeq::Finite(p) => p.get(i).copied().unwrap_or(0.0),
            WeightSeq::Geometric { first, ratio } => first * ratio.powi(i as i32),
        }
    }

    /// Probability that a letter's index exceeds n.
    fn tail(&self, n: u64) -> f64 {
        match self {
            WeightSeq::Finite(p) => p.iter().skip(n as usize + 1).sum(),
            WeightSeq::Geometric { first, ratio } => {
                first * ratio.powi(n as i32 + 1) / (1.0 - ratio)
            }
        }
    }
}

/// A candidate Gibbs measure with computable cylinder masses and letter
/// tails. Levels in tail queries use each model's natural letter labels:
/// 0-based symbol indices for product and Markov models, 1-based partial
/// quotients for the Gauss measure.
#[derive(Debug, Clone)]
pub enum GibbsModel {
    BernoulliProduct(WeightSeq),
    GaussMeasure,
    MarkovChain { p: Vec<f64>, pi: Vec<f64>, m: usize },
}

impl GibbsModel {
    pub fn bernoulli_product(probs: &[f64]) -> Result<Self> {
        if probs.is_empty() || probs.iter().any(|&p| !(p > 0.0) || !p.is_finite()) {
            return Err(Error::InvalidInput("probabilities must be positive".into()));
        }
        let total: f64 = probs.iter().sum();
        if (total - 1.0).abs() > 1e-9 {
            return Err(Error::InvalidInput(format!(
                "probabilities sum to {}",
                total
            )));
        }
        Ok(GibbsModel::BernoulliProduct(WeightSeq::Finite(
            probs.to_vec(),
        )))
    }

    pub fn geometric(first: f64, ratio: f64) -> Result<Self> {
        if !(first > 0.0) || !(ratio > 0.0) || !(ratio < 1.0) {
            return Err(Error::InvalidInput(
                "need first > 0 and 0 < ratio < 1".into(),
            ));
        }
        let total = first / (1.0 - ratio);
        if (total - 1.0).abs() > 1e-9 {
            return Err(Error::InvalidInput(format!(
                "probabilities sum to {}",
                total
            )));
        }
        Ok(GibbsModel::BernoulliProduct(WeightSeq::Geometric {
            first,
            ratio,
        }))
    }

    pub fn gauss() -> Self {
        GibbsModel::GaussMeasure
    }

    /// Stationary Markov chain from a row-stochastic matrix. The stationary
    /// vector is verified if given and computed by damped iteration if not.
    pub fn markov_chain(rows: &[Vec<f64>], pi: Option<Vec<f64>>) -> Result<Self> {
        let m = rows.len();
        if m == 0 {
            return Err(Error::InvalidInput("empty transition matrix".into()));
        }
        let mut p = vec![0.0; m * m];
        for (i, row) in rows.iter().enumerate() {
            if row.len() != m {
                return Err(Error::InvalidInput(format!("row {} has wrong length", i)));
            }
            let s: f64 = row.iter().sum();
            if (s - 1.0).abs() > 1e-9 || row.iter().any(|&x| x < 0.0) {
                return Err(Error::InvalidInput(format!(
                    "row {} is not a distribution",
                    i
                )));
            }
            p[i * m..(i + 1) * m].copy_from_slice(row);
        }
        let pi = match pi {
            Some(pi) => {
                if pi.len() != m || pi.iter().any(|&x| !(x >= 0.0)) {
                    return Err(Error::InvalidInput("stationary vector malformed".into()));
                }
                pi
            }
            None => {
                // Damped iteration converges even for periodic chains.
                let mut pi = vec![1.0 / m as f64; m];
                for _ in 0..4000 {
                    let mut next = vec![0.0; m];
                    for a in 0..m {
                        for b in 0..m {
                            next[b] += pi[a] * p[a * m + b];
                        }
                    }
                    for b in 0..m {
                        next[b] = 0.5 * next[b] + 0.5 * pi[b];
                    }
                    pi = next;
                }
                pi
            }
        };
        let total: f64 = pi.iter().sum();
        if (total - 1.0).abs() > 1e-8 {
            return Err(Error::InvalidInput(format!(
                "stationary vector sums to {}",
                total
            )));
        }
        for b in 0..m {
            let flow: f64 = (0..m).map(|a| pi[a] * p[a * m + b]).sum();
            if (flow - pi[b]).abs() > 1e-8 {
                return Err(Error::InvalidInput("vector is not stationary".into()));
            }
        }
        Ok(GibbsModel::MarkovChain { p, pi, m })
    }

    /// Parse {"kind": "bernoulli_product", "probs": [..]}
    /// | {"kind": "geometric", "first": f, "ratio": r} | {"kind": "gauss"}
    /// | {"kind": "markov", "rows": [[..]], "stationary": [..]?}.
    pub fn from_json(doc: &serde_json::Value) -> Result<Self> {
        let obj = doc
            .as_object()
            .ok_or_else(|| Error::ConfigInvalid("model must be a JSON object".into()))?;
        let kind = obj
            .get("kind")
            .and_then(|v| v.as_str())
            .ok_or_else(|| Error::ConfigInvalid("model needs a string kind".into()))?;
        let nums = |key: &str| -> Result<Vec<f64>> {
            let arr = obj
                .get(key)
                .and_then(|v| v.as_array())
                .ok_or_else(|| Error::ConfigInvalid(format!("model needs array {}", key)))?;
            arr.iter()
                .map(|v| {
                    v.as_f64()
                        .ok_or_else(|| Error::ConfigInvalid("non-number".into()))
                })
                .collect()
        };
        match kind {
            "bernoulli_product" => GibbsModel::bernoulli_product(&nums("probs")?)
                .map_err(|e| Error::ConfigInvalid(e.to_string())),
            "geometric" => {
                let first = obj.get("first").and_then(|v| v.as_f64());
                let ratio = obj.get("ratio").and_then(|v| v.as_f64());
                match (first, ratio) {
                    (Some(f), Some(r)) => {
                        GibbsModel::geometric(f, r).map_err(|e| Error::ConfigInvalid(e.to_string()))
                    }
                    _ => Err(Error::ConfigInvalid(
                        "geometric needs first and ratio".into(),
                    )),
                }
            }
            "gauss" => Ok(GibbsModel::GaussMeasure),
            "markov" => {
                let rows_v = obj
                    .get("rows")
                    .and_then(|v| v.as_array())
                    .ok_or_else(|| Error::ConfigInvalid("markov needs rows".into()))?;
                let mut rows = Vec::with_capacity(rows_v.len());
                for r in rows_v {
                    let r = r
                        .as_array()
                        .ok_or_else(|| Error::ConfigInvalid("rows must be arrays".into()))?;
                    let row: Option<Vec<f64>> = r.iter().map(|v| v.as_f64()).collect();
                    rows.push(row.ok_or_else(|| Error::ConfigInvalid("non-number".into()))?);
                }
                let pi = match obj.get("stationary") {
                    None => None,
                    Some(_) => Some(nums("stationary")?),
                };
                GibbsModel::markov_chain(&rows, pi).map_err(|e| Error::ConfigInvalid(e.to_string()))
            }
            other => Err(Error::ConfigInvalid(format!(
                "unknown model kind {:?}",
                other
            ))),
        }
    }

    /// ln mu[w]; NEG_INFINITY for zero-mass words.
    pub fn log_mass(&self, w: &[Symbol]) -> f64 {
        match self {
            GibbsModel::BernoulliProduct(seq) => w.iter().map(|&s| seq.prob(s as usize).ln()).sum(),
            GibbsModel::GaussMeasure => {
                let mut lc = LogContinuants::new();
                for &s in w {
                    lc.push(s as u64 + 1);
                }
                lc.log_mass()
            }
            GibbsModel::MarkovChain { p, pi, m } => {
                if w.is_empty() {
                    return 0.0;
                }
                if w.iter().any(|&s| s as usize >= *m) {
                    return f64::NEG_INFINITY;
                }
                let mut lm = pi[w[0] as usize].ln();
                for i in 0..w.len() - 1 {
                    lm += p[w[i] as usize * m + w[i + 1] as usize].ln();
                }
                lm
            }
        }
    }

    /// Probability that one letter's natural label exceeds n.
    pub fn level_tail(&self, n: u64) -> f64 {
        match self {
            GibbsModel::BernoulliProduct(seq) => seq.tail(n),
            GibbsModel::GaussMeasure => gauss_digit_tail(n),
            GibbsModel::MarkovChain { pi, .. } => pi.iter().skip(n as usize + 1).sum(),
        }
    }

    /// Stationary probability of a single letter (by natural label order,
    /// which for the Gauss measure means digit n+1... callers pass symbols).
    pub fn symbol_prob(&self, s: Symbol) -> f64 {
        match self {
            GibbsModel::BernoulliProduct(seq) => seq.prob(s as usize),
            GibbsModel::GaussMeasure => self.log_mass(&[s]).exp(),
            GibbsModel::MarkovChain { pi, .. } => pi.get(s as usize).copied().unwrap_or(0.0),
        }
    }

    /// Alphabet size when the model itself is finite.
    pub fn alphabet_limit(&self) -> Option<usize> {
        match self {
            GibbsModel::BernoulliProduct(WeightSeq::Finite(p)) => Some(p.len()),
            GibbsModel::BernoulliProduct(WeightSeq::Geometric { .. }) => None,
            GibbsModel::GaussMeasure => None,
            GibbsModel::MarkovChain { m, .. } => Some(*m),
        }
    }
}

/// Result of scanning words for the Gibbs sandwich constant.
#[derive(Debug, Clone, Serialize)]
pub struct GibbsReport {
    /// Smallest admissible c0 using words up to each depth 1..=depth.
    pub c0_by_depth: Vec<f64>,
    pub c0: f64,
    pub depth: usize,
    pub log_pressure: f64,
    pub words_checked: u64,
    /// Set when log c0 keeps growing by more than 0.05 per depth across the
    /// last three depths: the sandwich is not closing.
    pub suspect_nonconvergent: bool,
}

/// Scan all admissible words up to depth and report the smallest constant
/// c0 compatible with the Gibbs sandwich at the given pressure.
pub fn estimate_gibbs_constant(
    shift: &ShiftSpec,
    model: &GibbsModel,
    potential: &Potential,
    log_pressure: f64,
    depth: usize,
    budget: u64,
) -> Result<GibbsReport> {
    if depth == 0 {
        return Err(Error::InvalidInput("depth must be at least 1".into()));
    }
    let mut required: u128 = 0;
    for n in 1..=depth {
        let c = shift.count_words(n, Constraint::none())?;
        required = required.saturating_add(biguint_to_u128(&c));
    }
    if required > budget as u128 {
        return Err(Error::BudgetExceeded { required, budget });
    }
    let mut c0_by_depth = Vec::with_capacity(depth);
    let mut c0 = 1.0f64;
    let mut words_checked = 0u64;
    for n in 1..=depth {
        for w in shift.words(n, Constraint::none()) {
            words_checked += 1;
            let lm = model.log_mass(&w);
            let (lo, hi) = potential.word_bounds(shift, &w)?;
            let pn = log_pressure * n as f64;
            // mu[w] <= c0 exp(-Pn + S) for every S in [lo, hi], so the
            // binding case is S = lo; the lower sandwich binds at S = hi.
            let upper_need = (lm + pn - lo).exp();
            let lower_need = (-(lm + pn - hi)).exp();
            c0 = c0.max(upper_need).max(lower_need);
        }
        c0_by_depth.push(c0);
    }
    let suspect_nonconvergent = if depth >= 4 {
        let a = c0_by_depth[depth - 4].ln();
        let b = c0_by_depth[depth - 1].ln();
        (b - a) / 3.0 > 0.05
    } else {
        false
    };
    Ok(GibbsReport {
        c0_by_depth,
        c0,
        depth,
        log_pressure,
        words_checked,
        suspect_nonconvergent,
    })
}

#[derive(Debug, Clone, Serialize)]
pub struct DistortionReport {
    pub depth: usize,
    pub c0: f64,
    pub pairs_checked: u64,
    pub violations: u64,
    pub min_ratio: f64,
    pub max_ratio: f64,
    pub min_pair: (Word, Word),
    pub max_pair: (Word, Word),
}

/// Quasi-independence check: over every pair (v, w) whose concatenation vw
/// is admissible with |v| + |w| <= depth, the ratio mu[vw] / (mu[v] mu[w])
/// must lie in [c0^-3, c0^3]. Violations are counted, not fatal, and the
/// extremal ratios are reported with their witness pairs either way. The
/// budget bounds the rank-table footprint, sum of m^k for k <= depth.
pub fn check_distortion(
    shift: &ShiftSpec,
    model: &GibbsModel,
    depth: usize,
    c0: f64,
    budget: u64,
) -> Result<DistortionReport> {
    if depth < 2 {
        return Err(Error::InvalidInput("pair check needs depth >= 2".into()));
    }
    if !(c0.is_finite() && c0 >= 1.0) {
        return Err(Error::InvalidInput(format!(
            "c0 = {} must be at least 1",
            c0
        )));
    }
    let m = shift.alphabet_size();
    let mut required: u128 = 0;
    let mut pow = 1u128;
    for _ in 1..=depth {
        pow = pow.saturating_mul(m as u128);
        required = required.saturating_add(pow);
    }
    if required > budget as u128 {
        return Err(Error::BudgetExceeded { required, budget });
    }
    // Piece masses, rank-indexed with NaN holes for inadmissible words, so
    // a split costs two lookups while scanning each concatenation once.
    let mut tables: Vec<Vec<f64>> = Vec::with_capacity(depth - 1);
    for k in 1..depth {
        let mut t = vec![f64::NAN; m.pow(k as u32)];
        for w in shift.words(k, Constraint::none()) {
            let rank = w.iter().fold(0usize, |acc, &s| acc * m + s as usize);
            t[rank] = model.log_mass(&w);
        }
        tables.push(t);
    }
    let mut pows = vec![1usize; depth];
    for i in 1..depth {
        pows[i] = pows[i - 1] * m;
    }
    let bound_hi = c0.powi(3);
    let bound_lo = bound_hi.recip();
    let mut pairs_checked = 0u64;
    let mut violations = 0u64;
    let mut min_ratio = f64::INFINITY;
    let mut max_ratio = f64::NEG_INFINITY;
    let mut min_pair = (Word(vec![]), Word(vec![]));
    let mut max_pair = (Word(vec![]), Word(vec![]));
    let mut sr = vec![0usize; depth + 1];
    for s in 2..=depth {
        for u in shift.words(s, Constraint::none()) {
            let lm_u = model.log_mass(&u);
            if !lm_u.is_finite() {
                continue;
            }
            sr[s] = 0;
            for a in (0..s).rev() {
                sr[a] = sr[a + 1] + (u[a] as usize) * pows[s - 1 - a];
            }
            let mut pr = 0usize;
            for a in 1..s {
                pr = pr * m + u[a - 1] as usize;
                let lv = tables[a - 1][pr];
                let lw = tables[s - a - 1][sr[a]];
                if !(lv.is_finite() && lw.is_finite()) {
                    continue;
                }
                pairs_checked += 1;
                let r = (lm_u - lv - lw).exp();
                if r < min_ratio {
                    min_ratio = r;
                    min_pair = (Word(u[..a].to_vec()), Word(u[a..].to_vec()));
                }
                if r > max_ratio {
                    max_ratio = r;
                    max_pair = (Word(u[..a].to_vec()), Word(u[a..].to_vec()));
                }
                if r > bound_hi || r < bound_lo {
                    violations += 1;
                }
            }
        }
    }
    Ok(DistortionReport {
        depth,
        c0,
        pairs_checked,
        violations,
        min_ratio,
        max_ratio,
        min_pair,
        max_pair,
    })
}

#[derive(Debug, Clone, Serialize)]
pub struct MixingReport {
    pub pairs_checked: u64,
    pub min_ratio: f64,
    pub claimed_lower: f64,
    pub violations: u64,
}

/// For word pairs (w, v) up to the given length, check that some witness
/// word lambda joins them with mu[w lambda v] >= claimed * mu[w] mu[v].
/// With an empty witness (full shifts) the join is direct concatenation.
pub fn check_mixing_constant(
    shift: &ShiftSpec,
    model: &GibbsModel,
    witness: &Witness,
    max_len: usize,
    claimed_lower: f64,
    budget: u64,
) -> Result<MixingReport> {
    let mut words: Vec<Vec<Symbol>> = Vec::new();
    for n in 1..=max_len {
        for w in shift.words(n, Constraint::none()) {
            words.push(w.0);
            if words.len() as u64 > budget {
                return Err(Error::BudgetExceeded {
                    required: words.len() as u128,
                    budget,
                });
            }
        }
    }
    let middles: Vec<Vec<Symbol>> = if witness.connect_len == 0 {
        vec![vec![]]
    } else {
        witness.words.iter().map(|w| w.0.clone()).collect()
    };
    // The loop below is quadratic in the word list; gate the real cost,
    // not just the enumeration.
    let required = (words.len() as u128) * (words.len() as u128) * (middles.len().max(1) as u128);
    if required > budget as u128 {
        return Err(Error::BudgetExceeded { required, budget });
    }
    let mut pairs_checked = 0u64;
    let mut min_ratio = f64::INFINITY;
    let mut violations = 0u64;
    for w in &words {
        let lw = model.log_mass(w);
        for v in &words {
            pairs_checked += 1;
            let lv = model.log_mass(v);
            let mut best = f64::NEG_INFINITY;
            for lam in &middles {
                let mut joined = w.clone();
                joined.extend_from_slice(lam);
                joined.extend_from_slice(v);
                if shift.check_word(&joined).is_err() {
                    continue;
                }
                best = best.max(model.log_mass(&joined));
            }
            let ratio = (best - lw - lv).exp();
            min_ratio = min_ratio.min(ratio);
            if !(ratio >= claimed_lower) {
                violations += 1;
            }
        }
    }
    Ok(MixingReport {
        pairs_checked,
        min_ratio,
        claimed_lower,
        violations,
    })
}

fn biguint_to_u128(x: &num_bigint::BigUint) -> u128 {
    use num_traits::ToPrimitive;
    x.to_u128().unwrap_or(u128::MAX)
}
