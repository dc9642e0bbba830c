//! Potentials and observables on truncated shifts: Birkhoff-sum bounds over
//! cylinders, exact sums at periodic and preimage points, and cylinder
//! oscillation (the error term every ensemble comparison inherits).

use std::collections::BTreeMap;

use crate::error::{Error, Result};
use crate::gauss::{cf_value, periodic_point, preimage_point, LogContinuants};
use crate::shift::{Constraint, ShiftSpec, Symbol};

/// Continuation cap for locally-constant lookahead enumeration.
const ENUM_BUDGET: u64 = 4_000_000;

/// Value table for a function of the first `depth` symbols.
#[derive(Debug, Clone)]
pub struct LcTable {
    depth: usize,
    values: BTreeMap<Vec<Symbol>, f64>,
}

impl LcTable {
    pub fn new(depth: usize, values: BTreeMap<Vec<Symbol>, f64>) -> Result<Self> {
        if depth == 0 {
            return Err(Error::InvalidInput(
                "locally constant depth must be >= 1".into(),
            ));
        }
        for (w, v) in &values {
            if w.len() != depth {
                return Err(Error::InvalidInput(format!(
                    "table word {:?} has length {}, expected {}",
                    w,
                    w.len(),
                    depth
                )));
            }
            if !v.is_finite() {
                return Err(Error::InvalidInput(format!(
                    "table value for {:?} not finite",
                    w
                )));
            }
        }
        Ok(LcTable { depth, values })
    }

    pub fn depth(&self) -> usize {
        self.depth
    }

    /// Smallest and largest table value.
    pub fn value_range(&self) -> (f64, f64) {
        let mut lo = f64::INFINITY;
        let mut hi = f64::NEG_INFINITY;
        for &v in self.values.values() {
            lo = lo.min(v);
            hi = hi.max(v);
        }
        (lo, hi)
    }

    fn lookup(&self, window: &[Symbol]) -> Option<f64> {
        self.values.get(window).copied()
    }

    fn value(&self, window: &[Symbol]) -> Result<f64> {
        self.values
            .get(window)
            .copied()
            .ok_or_else(|| Error::InvalidInput(format!("no table value for window {:?}", window)))
    }

    /// Sum of the windows fully determined by w, plus the (min, max) over
    /// admissible continuations of the windows that overhang the end.
    fn word_bounds(&self, shift: &ShiftSpec, w: &[Symbol]) -> Result<(f64, f64)> {
        let n = w.len();
        let r = self.depth;
        if n == 0 {
            return Ok((0.0, 0.0));
        }
        let mut det = 0.0;
        for i in 0..n.saturating_sub(r - 1) {
            det += self.value(&w[i..i + r])?;
        }
        if r == 1 {
            return Ok((det, det));
        }
        let (tmin, tmax) = self.tail_spread(shift, w)?;
        Ok((det + tmin, det + tmax))
    }

    /// (min, max) over continuations u of the overhanging window sum.
    fn tail_spread(&self, shift: &ShiftSpec, w: &[Symbol]) -> Result<(f64, f64)> {
        let n = w.len();
        let r = self.depth;
        let last = w[n - 1];
        let m = shift.alphabet_size() as u128;
        let required = m.pow((r - 1) as u32);
        if required > ENUM_BUDGET as u128 {
            return Err(Error::AlphabetTooLargeForEnumeration {
                required,
                budget: ENUM_BUDGET,
            });
        }
        let mut tmin = f64::INFINITY;
        let mut tmax = f64::NEG_INFINITY;
        let start = n.saturating_sub(r - 1); // first overhanging window
        for u in shift.words(r - 1, Constraint::none()) {
            if !shift.allowed(last, u[0]) {
                continue;
            }
            let mut v: Vec<Symbol> = w[start..].to_vec();
            v.extend_from_slice(&u);
            let mut t = 0.0;
            let mut ok = true;
            for i in 0..(n - start) {
                match self.value(&v[i..i + r]) {
                    Ok(x) => t += x,
                    Err(_) => {
                        // continuation runs through a window missing from the
                        // table; treat as inadmissible for this potential
                        ok = false;
                        break;
                    }
                }
            }
            if ok {
                tmin = tmin.min(t);
                tmax = tmax.max(t);
            }
        }
        if tmin.is_infinite() {
            return Err(Error::InadmissibleWord { position: n - 1 });
        }
        Ok((tmin, tmax))
    }

    fn periodic_sum(&self, shift: &ShiftSpec, w: &[Symbol]) -> Result<f64> {
        let n = w.len();
        if n == 0 {
            return Ok(0.0);
        }
        if !shift.allowed(w[n - 1], w[0]) {
            return Err(Error::InadmissibleWord { position: n - 1 });
        }
        let mut total = 0.0;
        let mut window = Vec::with_capacity(self.depth);
        for i in 0..n {
            window.clear();
            for j in 0..self.depth {
                window.push(w[(i + j) % n]);
            }
            total += self.value(&window)?;
        }
        Ok(total)
    }

    fn preimage_sum(&self, w: &[Symbol], anchor: &[Symbol]) -> Result<f64> {
        let n = w.len();
        let r = self.depth;
        if anchor.len() < r - 1 {
            return Err(Error::InadmissibleAnchor);
        }
        let mut v = w.to_vec();
        v.extend_from_slice(&anchor[..r - 1]);
        let mut total = 0.0;
        for i in 0..n {
            total += self.value(&v[i..i + r])?;
        }
        Ok(total)
    }

    /// Largest word-bounds spread at length n. The spread depends only on
    /// the last min(n, depth-1) symbols, so those are what get enumerated.
    fn oscillation(&self, shift: &ShiftSpec, n: usize) -> Result<f64> {
        let r = self.depth;
        if n == 0 || r == 1 {
            return Ok(0.0);
        }
        let k = n.min(r - 1);
        let mut worst = 0.0f64;
        for sigma in shift.words(k, Constraint::none()) {
            if let Ok((lo, hi)) = self.tail_spread(shift, &sigma) {
                worst = worst.max(hi - lo);
            }
        }
        Ok(worst)
    }

    fn value_spread(&self) -> f64 {
        let mut lo = f64::INFINITY;
        let mut hi = f64::NEG_INFINITY;
        for v in self.values.values() {
            lo = lo.min(*v);
            hi = hi.max(*v);
        }
        if lo.is_infinite() {
            0.0
        } else {
            hi - lo
        }
    }
}

/// How a preimage point is pinned down beyond its leading word.
#[derive(Debug, Clone)]
pub enum Anchor {
    /// A point of [0, 1] whose n-th image the word's preimage hits (Gauss).
    Point(f64),
    /// Trailing symbols, enough to close every lookahead window.
    Symbols(Vec<Symbol>),
}

/// A real potential on the shift, with enough structure to bound or
/// evaluate Birkhoff sums without ever touching an infinite tail.
#[derive(Debug, Clone)]
pub enum Potential {
    /// phi(x) = log weight(x0) on a full shift.
    Bernoulli { log_weights: Vec<f64> },
    /// phi(x) depends on the first `depth` symbols.
    LocallyConstant(LcTable),
    /// The Gauss-map geometric potential -log |T'|; symbols s mean digit s+1.
    GaussLog,
    /// base + beta * observable.
    Tilted {
        base: Box<Potential>,
        observable: Observable,
        beta: f64,
    },
}

/// An observable whose Birkhoff averages the rate functions describe.
#[derive(Debug, Clone)]
pub enum Observable {
    /// 1 when the current symbol equals the target.
    Indicator(Symbol),
    /// A function of the first `depth` symbols.
    LocallyConstant(LcTable),
}

impl Potential {
    pub fn bernoulli(weights: &[f64]) -> Result<Self> {
        if weights.is_empty() {
            return Err(Error::InvalidInput("need at least one weight".into()));
        }
        if weights.iter().any(|&w| !(w > 0.0) || !w.is_finite()) {
            return Err(Error::InvalidInput(
                "weights must be positive and finite".into(),
            ));
        }
        Ok(Potential::Bernoulli {
            log_weights: weights.iter().map(|w| w.ln()).collect(),
        })
    }

    pub fn gauss_log() -> Self {
        Potential::GaussLog
    }

    pub fn locally_constant(table: LcTable) -> Self {
        Potential::LocallyConstant(table)
    }

    pub fn tilt(self, observable: Observable, beta: f64) -> Self {
        Potential::Tilted {
            base: Box::new(self),
            observable,
            beta,
        }
    }

    /// Parse {"kind": "bernoulli", "weights": [..]} | {"kind": "gauss_log"}
    /// | {"kind": "locally_constant", "depth": r, "values": [{"word": [..], "value": v}, ..]}.
    pub fn from_json(doc: &serde_json::Value) -> Result<Self> {
        let obj = doc
            .as_object()
            .ok_or_else(|| Error::ConfigInvalid("potential must be a JSON object".into()))?;
        let kind = obj
            .get("kind")
            .and_then(|v| v.as_str())
            .ok_or_else(|| Error::ConfigInvalid("potential needs a string kind".into()))?;
        match kind {
            "bernoulli" => {
                let weights = obj
                    .get("weights")
                    .and_then(|v| v.as_array())
                    .ok_or_else(|| Error::ConfigInvalid("bernoulli needs weights".into()))?;
                let w: Option<Vec<f64>> = weights.iter().map(|v| v.as_f64()).collect();
                let w = w.ok_or_else(|| Error::ConfigInvalid("weights must be numbers".into()))?;
                Potential::bernoulli(&w).map_err(|e| Error::ConfigInvalid(e.to_string()))
            }
            "gauss_log" => Ok(Potential::GaussLog),
            "locally_constant" => {
                let table = lc_table_from_json(obj)?;
                Ok(Potential::LocallyConstant(table))
            }
            other => Err(Error::ConfigInvalid(format!(
                "unknown potential kind {:?}",
                other
            ))),
        }
    }

    /// Bounds on S_n phi over the cylinder of w (n = |w|).
    pub fn word_bounds(&self, shift: &ShiftSpec, w: &[Symbol]) -> Result<(f64, f64)> {
        shift.check_word(w)?;
        match self {
            Potential::Bernoulli { log_weights } => {
                let mut s = 0.0;
                for &sym in w {
                    s += *log_weights
                        .get(sym as usize)
                        .ok_or(Error::InadmissibleWord { position: 0 })?;
                }
                Ok((s, s))
            }
            Potential::LocallyConstant(t) => t.word_bounds(shift, w),
            Potential::GaussLog => {
                let lc = gauss_state(w);
                Ok((-2.0 * lc.log_q_shifted(1.0), -2.0 * lc.log_q()))
            }
            Potential::Tilted {
                base,
                observable,
                beta,
            } => {
                let (blo, bhi) = base.word_bounds(shift, w)?;
                let (olo, ohi) = observable.word_bounds(shift, w)?;
                if *beta >= 0.0 {
                    Ok((blo + beta * olo, bhi + beta * ohi))
                } else {
                    Ok((blo + beta * ohi, bhi + beta * olo))
                }
            }
        }
    }

    /// Exact S_n phi at the periodic point whose repeating word is w.
    pub fn periodic_sum(&self, shift: &ShiftSpec, w: &[Symbol]) -> Result<f64> {
        shift.check_word(w)?;
        match self {
            Potential::Bernoulli { .. } => Ok(self.word_bounds(shift, w)?.0),
            Potential::LocallyConstant(t) => t.periodic_sum(shift, w),
            Potential::GaussLog => {
                if w.is_empty() {
                    return Ok(0.0);
                }
                let digits: Vec<u64> = w.iter().map(|&s| s as u64 + 1).collect();
                Ok(periodic_point(&digits)?.1)
            }
            Potential::Tilted {
                base,
                observable,
                beta,
            } => Ok(base.periodic_sum(shift, w)? + beta * observable.periodic_sum(shift, w)?),
        }
    }

    /// Exact S_n phi at the preimage point picked out by w and the anchor.
    pub fn preimage_sum(&self, shift: &ShiftSpec, w: &[Symbol], anchor: &Anchor) -> Result<f64> {
        shift.check_word(w)?;
        match self {
            Potential::Bernoulli { .. } => Ok(self.word_bounds(shift, w)?.0),
            Potential::LocallyConstant(t) => match anchor {
                Anchor::Symbols(y) => {
                    if t.depth() > 1 {
                        if y.len() < t.depth() - 1 {
                            return Err(Error::InadmissibleAnchor);
                        }
                        let mut v = w.to_vec();
                        v.extend_from_slice(&y[..t.depth() - 1]);
                        shift.check_word(&v)?;
                    }
                    t.preimage_sum(w, y)
                }
                Anchor::Point(_) => Err(Error::InvalidInput(
                    "locally constant potentials need a symbol anchor".into(),
                )),
            },
            Potential::GaussLog => match anchor {
                Anchor::Point(y) => {
                    if w.is_empty() {
                        return Ok(0.0);
                    }
                    let digits: Vec<u64> = w.iter().map(|&s| s as u64 + 1).collect();
                    Ok(preimage_point(&digits, *y)?.1)
                }
                Anchor::Symbols(_) => Err(Error::InvalidInput(
                    "the Gauss potential needs a point anchor".into(),
                )),
            },
            Potential::Tilted {
                base,
                observable,
                beta,
            } => {
                let b = base.preimage_sum(shift, w, anchor)?;
                let o = match (observable, anchor) {
                    // indicator sums never look past the word
                    (Observable::Indicator(_), _) => observable.preimage_count(w, &[])?,
                    (Observable::LocallyConstant(_), Anchor::Symbols(y)) => {
                        observable.preimage_count(w, y)?
                    }
                    (Observable::LocallyConstant(_), Anchor::Point(_)) => {
                        return Err(Error::InvalidInput(
                            "locally constant observables need a symbol anchor".into(),
                        ))
                    }
                };
                Ok(b + beta * o)
            }
        }
    }

    /// Largest spread of S_n phi over any single n-cylinder.
    pub fn oscillation(&self, shift: &ShiftSpec, n: usize) -> Result<f64> {
        match self {
            Potential::Bernoulli { .. } => Ok(0.0),
            Potential::LocallyConstant(t) => t.oscillation(shift, n),
            Potential::GaussLog => {
                if n == 0 {
                    return Ok(0.0);
                }
                // The cylinder spread is 2 log(1 + q_{n-1}/q_n) and the ratio
                // equals the reversed word's continued fraction, maximized by
                // alternating digits 1, M, 1, M, ..
                let m = shift.alphabet_size() as u64;
                let digits: Vec<u64> = (0..n).map(|i| if i % 2 == 0 { 1 } else { m }).collect();
                Ok(2.0 * cf_value(&digits, 0.0).ln_1p())
            }
            Potential::Tilted {
                base,
                observable,
                beta,
            } => Ok(base.oscillation(shift, n)? + beta.abs() * observable.oscillation(shift, n)?),
        }
    }

    /// Bound on the cylinder spread valid at every length.
    pub fn oscillation_upper(&self, shift: &ShiftSpec) -> f64 {
        match self {
            Potential::Bernoulli { .. } => 0.0,
            Potential::LocallyConstant(t) => (t.depth() - 1) as f64 * t.value_spread(),
            Potential::GaussLog => 2.0 * std::f64::consts::LN_2,
            Potential::Tilted {
                base,
                observable,
                beta,
            } => base.oscillation_upper(shift) + beta.abs() * observable.oscillation_upper(shift),
        }
    }

    /// Number of leading symbols that determine phi, when finite.
    pub(crate) fn window_depth(&self) -> Option<usize> {
        match self {
            Potential::Bernoulli { .. } => Some(1),
            Potential::LocallyConstant(t) => Some(t.depth()),
            Potential::GaussLog => None,
            Potential::Tilted {
                base, observable, ..
            } => Some(base.window_depth()?.max(observable.window_depth())),
        }
    }

    /// phi on the cylinder of w; w must carry at least window_depth symbols.
    /// None marks a window the potential excludes (missing table entry).
    pub(crate) fn window_value(&self, w: &[Symbol]) -> Option<f64> {
        match self {
            Potential::Bernoulli { log_weights } => log_weights.get(w[0] as usize).copied(),
            Potential::LocallyConstant(t) => t.lookup(&w[..t.depth()]),
            Potential::GaussLog => None,
            Potential::Tilted {
                base,
                observable,
                beta,
            } => Some(base.window_value(w)? + beta * observable.window_value(w)?),
        }
    }

    /// Per-digit weights exp(beta) when self is the Gauss potential tilted
    /// by digit indicators only; None for anything else.
    pub(crate) fn gauss_tilt_multipliers(&self) -> Option<Vec<(u64, f64)>> {
        match self {
            Potential::GaussLog => Some(Vec::new()),
            Potential::Tilted {
                base,
                observable,
                beta,
            } => {
                let mut mult = base.gauss_tilt_multipliers()?;
                let s = observable.indicator_symbol()?;
                mult.push((s as u64 + 1, beta.exp()));
                Some(mult)
            }
            _ => None,
        }
    }
}

impl Observable {
    pub fn indicator(symbol: Symbol) -> Self {
        Observable::Indicator(symbol)
    }

    /// Indicator of the continued-fraction digit k (symbol k-1).
    pub fn indicator_digit(k: u64) -> Result<Self> {
        if k == 0 {
            return Err(Error::InvalidInput("digits start at 1".into()));
        }
        Ok(Observable::Indicator((k - 1) as Symbol))
    }

    /// Parse {"kind": "indicator", "symbol": s | "digit": k} or a
    /// locally-constant table in the same shape as potentials.
    pub fn from_json(doc: &serde_json::Value) -> Result<Self> {
        let obj = doc
            .as_object()
            .ok_or_else(|| Error::ConfigInvalid("observable must be a JSON object".into()))?;
        let kind = obj
            .get("kind")
            .and_then(|v| v.as_str())
            .ok_or_else(|| Error::ConfigInvalid("observable needs a string kind".into()))?;
        match kind {
            "indicator" => {
                if let Some(s) = obj.get("symbol").and_then(|v| v.as_u64()) {
                    Ok(Observable::Indicator(s as Symbol))
                } else if let Some(k) = obj.get("digit").and_then(|v| v.as_u64()) {
                    Observable::indicator_digit(k).map_err(|e| Error::ConfigInvalid(e.to_string()))
                } else {
                    Err(Error::ConfigInvalid(
                        "indicator needs symbol or digit".into(),
                    ))
                }
            }
            "locally_constant" => Ok(Observable::LocallyConstant(lc_table_from_json(obj)?)),
            other => Err(Error::ConfigInvalid(format!(
                "unknown observable kind {:?}",
                other
            ))),
        }
    }

    pub fn word_bounds(&self, shift: &ShiftSpec, w: &[Symbol]) -> Result<(f64, f64)> {
        match self {
            Observable::Indicator(s) => {
                let c = w.iter().filter(|&&x| x == *s).count() as f64;
                Ok((c, c))
            }
            Observable::LocallyConstant(t) => t.word_bounds(shift, w),
        }
    }

    pub fn periodic_sum(&self, shift: &ShiftSpec, w: &[Symbol]) -> Result<f64> {
        match self {
            Observable::Indicator(s) => Ok(w.iter().filter(|&&x| x == *s).count() as f64),
            Observable::LocallyConstant(t) => t.periodic_sum(shift, w),
        }
    }

    fn preimage_count(&self, w: &[Symbol], anchor: &[Symbol]) -> Result<f64> {
        match self {
            Observable::Indicator(s) => Ok(w.iter().filter(|&&x| x == *s).count() as f64),
            Observable::LocallyConstant(t) => t.preimage_sum(w, anchor),
        }
    }

    pub fn oscillation(&self, shift: &ShiftSpec, n: usize) -> Result<f64> {
        match self {
            Observable::Indicator(_) => Ok(0.0),
            Observable::LocallyConstant(t) => t.oscillation(shift, n),
        }
    }

    pub fn oscillation_upper(&self, _shift: &ShiftSpec) -> f64 {
        match self {
            Observable::Indicator(_) => 0.0,
            Observable::LocallyConstant(t) => (t.depth() - 1) as f64 * t.value_spread(),
        }
    }

    /// Exact per-word symbol count when the observable is an indicator.
    pub fn indicator_symbol(&self) -> Option<Symbol> {
        match self {
            Observable::Indicator(s) => Some(*s),
            Observable::LocallyConstant(_) => None,
        }
    }

    /// Pointwise value range; every Birkhoff average lies inside it. The
    /// attainable range of averages can be strictly smaller on a
    /// constrained shift.
    pub fn value_range(&self) -> (f64, f64) {
        match self {
            Observable::Indicator(_) => (0.0, 1.0),
            Observable::LocallyConstant(t) => t.value_range(),
        }
    }

    pub(crate) fn window_depth(&self) -> usize {
        match self {
            Observable::Indicator(_) => 1,
            Observable::LocallyConstant(t) => t.depth(),
        }
    }

    pub(crate) fn window_value(&self, w: &[Symbol]) -> Option<f64> {
        match self {
            Observable::Indicator(s) => Some((w[0] == *s) as u8 as f64),
            Observable::LocallyConstant(t) => t.lookup(&w[..t.depth()]),
        }
    }
}

fn lc_table_from_json(obj: &serde_json::Map<String, serde_json::Value>) -> Result<LcTable> {
    let depth = obj
        .get("depth")
        .and_then(|v| v.as_u64())
        .ok_or_else(|| Error::ConfigInvalid("locally_constant needs integer depth".into()))?
        as usize;
    let entries = obj
        .get("values")
        .and_then(|v| v.as_array())
        .ok_or_else(|| Error::ConfigInvalid("locally_constant needs a values array".into()))?;
    let mut map = BTreeMap::new();
    for e in entries {
        let eo = e
            .as_object()
            .ok_or_else(|| Error::ConfigInvalid("values entries must be objects".into()))?;
        let word = eo
            .get("word")
            .and_then(|v| v.as_array())
            .ok_or_else(|| Error::ConfigInvalid("values entries need a word".into()))?;
        let w: Option<Vec<Symbol>> = word
            .iter()
            .map(|v| v.as_u64().map(|x| x as Symbol))
            .collect();
        let w = w.ok_or_else(|| Error::ConfigInvalid("word symbols must be integers".into()))?;
        let value = eo
            .get("value")
            .and_then(|v| v.as_f64())
            .ok_or_else(|| Error::ConfigInvalid("values entries need a number value".into()))?;
        map.insert(w, value);
    }
    LcTable::new(depth, map).map_err(|e| Error::ConfigInvalid(e.to_string()))
}

fn gauss_state(w: &[Symbol]) -> LogContinuants {
    let mut lc = LogContinuants::new();
    for &s in w {
        lc.push(s as u64 + 1);
    }
    lc
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn golden_lc() -> LcTable {
        let mut map = BTreeMap::new();
        map.insert(vec![0, 0], -1.0);
        map.insert(vec![0, 1], 0.5);
        map.insert(vec![1, 0], 0.25);
        LcTable::new(2, map).unwrap()
    }

    #[test]
    fn gauss_word_bounds_match_continuants() {
        let shift = ShiftSpec::full(5).unwrap();
        let phi = Potential::gauss_log();
        // Symbols (0, 0) are digits (1, 1): q2 = 2, q2 + q1 = 3.
        let (lo, hi) = phi.word_bounds(&shift, &[0, 0]).unwrap();
        assert!((hi - (-2.0 * 2.0f64.ln())).abs() < 1e-14);
        assert!((lo - (-2.0 * 3.0f64.ln())).abs() < 1e-14);
    }

    #[test]
    fn gauss_oscillation_alternating_extremal() {
        let shift = ShiftSpec::full(5).unwrap();
        let phi = Potential::gauss_log();
        assert!((phi.oscillation(&shift, 1).unwrap() - 2.0 * 2.0f64.ln()).abs() < 1e-14);
        // n = 2, digits <= 5: extremal ratio is [0; 1, 5] = 5/6.
        let d2 = phi.oscillation(&shift, 2).unwrap();
        assert!((d2 - 2.0 * (11.0f64 / 6.0).ln()).abs() < 1e-14);
        // Brute force over all two-digit words agrees.
        let mut worst = 0.0f64;
        for w in shift.words(2, Constraint::none()) {
            let (lo, hi) = phi.word_bounds(&shift, &w).unwrap();
            worst = worst.max(hi - lo);
        }
        assert!((d2 - worst).abs() < 1e-13);
        assert!(d2 <= phi.oscillation_upper(&shift) + 1e-15);
    }

    #[test]
    fn bernoulli_sums_are_exact() {
        let shift = ShiftSpec::full(2).unwrap();
        let phi = Potential::bernoulli(&[1.0 / 3.0, 2.0 / 3.0]).unwrap();
        let (lo, hi) = phi.word_bounds(&shift, &[0, 1, 1]).unwrap();
        let expect = (1.0f64 / 3.0).ln() + 2.0 * (2.0f64 / 3.0).ln();
        assert!((lo - expect).abs() < 1e-14);
        assert_eq!(lo, hi);
        assert_eq!(phi.oscillation(&shift, 7).unwrap(), 0.0);
        assert!((phi.periodic_sum(&shift, &[0, 1, 1]).unwrap() - expect).abs() < 1e-14);
    }

    #[test]
    fn locally_constant_bounds_and_sums() {
        let shift = ShiftSpec::golden_mean();
        let phi = Potential::locally_constant(golden_lc());

        // Word (0,1): the overhang window (1, ?) forces ? = 0.
        let (lo, hi) = phi.word_bounds(&shift, &[0, 1]).unwrap();
        assert!((lo - 0.75).abs() < 1e-15);
        assert_eq!(lo, hi);

        // Word (0,0): overhang (0, ?) ranges over {(0,0), (0,1)}.
        let (lo, hi) = phi.word_bounds(&shift, &[0, 0]).unwrap();
        assert!((lo - (-2.0)).abs() < 1e-15);
        assert!((hi - (-0.5)).abs() < 1e-15);

        // Cyclic sum for (0,1): windows (0,1) and (1,0).
        let p = phi.periodic_sum(&shift, &[0, 1]).unwrap();
        assert!((p - 0.75).abs() < 1e-15);
        // (1,1) wrap is inadmissible.
        assert!(matches!(
            phi.periodic_sum(&shift, &[1, 0, 1]),
            Err(Error::InadmissibleWord { position: 2 })
        ));

        // Preimage sums need a long-enough admissible anchor.
        let s = phi
            .preimage_sum(&shift, &[0, 0], &Anchor::Symbols(vec![1]))
            .unwrap();
        assert!((s - (-0.5)).abs() < 1e-15);
        assert!(matches!(
            phi.preimage_sum(&shift, &[0, 0], &Anchor::Symbols(vec![])),
            Err(Error::InadmissibleAnchor)
        ));
        assert!(matches!(
            phi.preimage_sum(&shift, &[0, 1], &Anchor::Symbols(vec![1])),
            Err(Error::InadmissibleWord { position: 1 })
        ));
    }

    #[test]
    fn locally_constant_oscillation_matches_brute_force() {
        let shift = ShiftSpec::golden_mean();
        let phi = Potential::locally_constant(golden_lc());
        for n in 1..6 {
            let osc = phi.oscillation(&shift, n).unwrap();
            let mut worst = 0.0f64;
            for w in shift.words(n, Constraint::none()) {
                let (lo, hi) = phi.word_bounds(&shift, &w).unwrap();
                worst = worst.max(hi - lo);
            }
            assert!(
                (osc - worst).abs() < 1e-13,
                "n = {}: {} vs {}",
                n,
                osc,
                worst
            );
        }
    }

    #[test]
    fn gauss_periodic_and_preimage_points() {
        let shift = ShiftSpec::full(3).unwrap();
        let phi = Potential::gauss_log();
        // Symbol 0 = digit 1: the golden fixed point.
        let p = phi.periodic_sum(&shift, &[0]).unwrap();
        assert!((p - (-0.9624236501192069)).abs() < 1e-12);
        let (lo, hi) = phi.word_bounds(&shift, &[0]).unwrap();
        assert!(lo <= p && p <= hi);

        let s = phi.preimage_sum(&shift, &[0], &Anchor::Point(0.0)).unwrap();
        assert!(s.abs() < 1e-14);
        assert!(matches!(
            phi.preimage_sum(&shift, &[0], &Anchor::Symbols(vec![0])),
            Err(Error::InvalidInput(_))
        ));
    }

    #[test]
    fn tilted_composes_intervals() {
        let shift = ShiftSpec::full(4).unwrap();
        let obs = Observable::indicator(0);
        let phi = Potential::gauss_log().tilt(obs, 1.5);
        let (lo, hi) = phi.word_bounds(&shift, &[0, 0]).unwrap();
        let (blo, bhi) = Potential::gauss_log().word_bounds(&shift, &[0, 0]).unwrap();
        assert!((lo - (blo + 3.0)).abs() < 1e-14);
        assert!((hi - (bhi + 3.0)).abs() < 1e-14);

        // Negative beta flips which observable bound goes where.
        let phi = Potential::gauss_log().tilt(Observable::indicator(0), -2.0);
        let (lo2, hi2) = phi.word_bounds(&shift, &[0, 0]).unwrap();
        assert!((lo2 - (blo - 4.0)).abs() < 1e-14);
        assert!((hi2 - (bhi - 4.0)).abs() < 1e-14);
    }

    #[test]
    fn indicator_digit_shifts_to_symbol() {
        let obs = Observable::indicator_digit(3).unwrap();
        assert_eq!(obs.indicator_symbol(), Some(2));
        assert!(Observable::indicator_digit(0).is_err());
    }

    #[test]
    fn observable_counts() {
        let shift = ShiftSpec::full(3).unwrap();
        let obs = Observable::indicator(1);
        let (lo, hi) = obs.word_bounds(&shift, &[1, 0, 1, 1]).unwrap();
        assert_eq!((lo, hi), (3.0, 3.0));
        assert_eq!(obs.periodic_sum(&shift, &[1, 0]).unwrap(), 1.0);
    }

    #[test]
    fn potential_json_round_trips() {
        let doc: serde_json::Value =
            serde_json::from_str(r#"{"kind": "bernoulli", "weights": [0.5, 0.5]}"#).unwrap();
        assert!(matches!(
            Potential::from_json(&doc),
            Ok(Potential::Bernoulli { .. })
        ));

        let doc: serde_json::Value = serde_json::from_str(r#"{"kind": "gauss_log"}"#).unwrap();
        assert!(matches!(
            Potential::from_json(&doc),
            Ok(Potential::GaussLog)
        ));

        let doc: serde_json::Value = serde_json::from_str(
            r#"{"kind": "locally_constant", "depth": 2,
                "values": [{"word": [0, 0], "value": -1.0},
                           {"word": [0, 1], "value": 0.5},
                           {"word": [1, 0], "value": 0.25}]}"#,
        )
        .unwrap();
        assert!(matches!(
            Potential::from_json(&doc),
            Ok(Potential::LocallyConstant(_))
        ));

        let doc: serde_json::Value =
            serde_json::from_str(r#"{"kind": "indicator", "digit": 1}"#).unwrap();
        assert_eq!(
            Observable::from_json(&doc).unwrap().indicator_symbol(),
            Some(0)
        );
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(48))]

        #[test]
        fn exact_sums_lie_inside_cylinder_bounds(
            vals in proptest::collection::vec(-2.0f64..2.0, 9),
            word in proptest::collection::vec(0u32..3, 1..7),
        ) {
            let shift = ShiftSpec::full(3).unwrap();
            let mut map = BTreeMap::new();
            let mut k = 0;
            for a in 0..3u32 {
                for b in 0..3u32 {
                    map.insert(vec![a, b], vals[k]);
                    k += 1;
                }
            }
            let phi = Potential::locally_constant(LcTable::new(2, map).unwrap());
            let (lo, hi) = phi.word_bounds(&shift, &word).unwrap();
            let p = phi.periodic_sum(&shift, &word).unwrap();
            prop_assert!(lo - 1e-12 <= p && p <= hi + 1e-12);
            let s = phi
                .preimage_sum(&shift, &word, &Anchor::Symbols(vec![1, 2]))
                .unwrap();
            prop_assert!(lo - 1e-12 <= s && s <= hi + 1e-12);
        }
    }
}
