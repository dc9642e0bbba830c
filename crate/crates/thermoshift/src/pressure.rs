//! Pressure estimators across the sampling families: covering word sums,
//! periodic orbits, iterated preimages, and certified transfer brackets.
//!
//! The first three families converge to the pressure but carry no usable
//! finite-n certificate in general, so their estimates are marked heuristic
//! (the covering sum does certify an upper bound). The transfer bracket is
//! the rigorous one: eigenvalue envelopes give a two-sided enclosure.

use std::collections::BTreeMap;

use serde::Serialize;

use crate::error::{Error, Result};
use crate::potential::{Anchor, Potential};
use crate::shift::{Constraint, ShiftSpec, Symbol};
use crate::transfer::{
    growth_bracket_full, growth_bracket_truncated, ChebGrid, GaussOperator, TailMode,
};

/// What a single estimate certifies about the true pressure.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum Direction {
    UpperBound,
    LowerBound,
    TwoSided,
    /// Point estimate from a convergent family, no finite-n certificate.
    Heuristic,
}

#[derive(Debug, Clone, Serialize)]
pub struct PressureEstimate {
    pub ensemble: &'static str,
    pub n: usize,
    pub value: f64,
    /// Certified bounds; infinite on the open side, NaN when heuristic.
    pub lo: f64,
    pub hi: f64,
    pub direction: Direction,
}

impl PressureEstimate {
    fn heuristic(ensemble: &'static str, n: usize, value: f64) -> Self {
        PressureEstimate {
            ensemble,
            n,
            value,
            lo: f64::NAN,
            hi: f64::NAN,
            direction: Direction::Heuristic,
        }
    }
}

/// Streaming log-sum-exp accumulator.
#[derive(Debug, Clone, Copy)]
pub(crate) struct LogSum {
    max: f64,
    sum: f64,
}

impl LogSum {
    pub(crate) fn new() -> Self {
        LogSum {
            max: f64::NEG_INFINITY,
            sum: 0.0,
        }
    }

    pub(crate) fn add(&mut self, x: f64) {
        if x == f64::NEG_INFINITY {
            return;
        }
        if x <= self.max {
            self.sum += (x - self.max).exp();
        } else {
            self.sum = self.sum * (self.max - x).exp() + 1.0;
            self.max = x;
        }
    }

    pub(crate) fn value(&self) -> f64 {
        if self.sum == 0.0 {
            f64::NEG_INFINITY
        } else {
            self.max + self.sum.ln()
        }
    }
}

fn ensure_budget(shift: &ShiftSpec, n: usize, constraint: Constraint, budget: u64) -> Result<()> {
    use num_traits::ToPrimitive;
    let required = shift
        .count_words(n, constraint)?
        .to_u128()
        .unwrap_or(u128::MAX);
    if required > budget as u128 {
        return Err(Error::BudgetExceeded { required, budget });
    }
    Ok(())
}

/// ln of the covering partition sum at length n: sum over admissible words
/// of exp(sup S_n phi) when use_sup, of exp(inf S_n phi) otherwise.
pub fn log_word_sum(
    shift: &ShiftSpec,
    potential: &Potential,
    n: usize,
    use_sup: bool,
    budget: u64,
) -> Result<f64> {
    if n == 0 {
        return Err(Error::InvalidInput("need n >= 1".into()));
    }
    ensure_budget(shift, n, Constraint::none(), budget)?;
    let mut ls = LogSum::new();
    for w in shift.words(n, Constraint::none()) {
        let (lo, hi) = potential.word_bounds(shift, &w)?;
        ls.add(if use_sup { hi } else { lo });
    }
    Ok(ls.value())
}

/// ln of the periodic partition sum: S_n phi evaluated exactly on the
/// periodic orbit of each admissible periodic word.
pub fn log_periodic_sum(
    shift: &ShiftSpec,
    potential: &Potential,
    n: usize,
    budget: u64,
) -> Result<f64> {
    if n == 0 {
        return Err(Error::InvalidInput("need n >= 1".into()));
    }
    ensure_budget(shift, n, Constraint::periodic(), budget)?;
    let mut ls = LogSum::new();
    for w in shift.words(n, Constraint::periodic()) {
        ls.add(potential.periodic_sum(shift, &w)?);
    }
    Ok(ls.value())
}

/// ln of the preimage partition sum anchored at a fixed future: S_n phi
/// evaluated at the preimage point of the anchor through each word.
pub fn log_preimage_sum(
    shift: &ShiftSpec,
    potential: &Potential,
    anchor: &Anchor,
    n: usize,
    budget: u64,
) -> Result<f64> {
    if n == 0 {
        return Err(Error::InvalidInput("need n >= 1".into()));
    }
    if let Anchor::Symbols(y) = anchor {
        if !y.is_empty() {
            shift.check_word(y).map_err(|_| Error::InadmissibleAnchor)?;
        }
    }
    ensure_budget(shift, n, Constraint::none(), budget)?;
    let mut ls = LogSum::new();
    for w in shift.words(n, Constraint::none()) {
        if let Anchor::Symbols(y) = anchor {
            // words whose seam to the anchor is forbidden have no preimage
            if let Some(&y0) = y.first() {
                if !shift.allowed(w[w.len() - 1], y0) {
                    continue;
                }
            }
        }
        ls.add(potential.preimage_sum(shift, &w, anchor)?);
    }
    Ok(ls.value())
}

/// Covering-sum estimate a_n / n. Subadditivity of the sup sums makes every
/// one of these a certified upper bound for the pressure.
pub fn pressure_word_sum(
    shift: &ShiftSpec,
    potential: &Potential,
    n: usize,
    budget: u64,
) -> Result<PressureEstimate> {
    let a = log_word_sum(shift, potential, n, true, budget)?;
    let value = a / n as f64;
    Ok(PressureEstimate {
        ensemble: "word_sum",
        n,
        value,
        lo: f64::NEG_INFINITY,
        hi: value,
        direction: Direction::UpperBound,
    })
}

/// Increment a_n - a_(n-1) of the covering sums: converges geometrically
/// where the plain quotient converges like 1/n, but certifies nothing.
pub fn pressure_word_sum_accelerated(
    shift: &ShiftSpec,
    potential: &Potential,
    n: usize,
    budget: u64,
) -> Result<PressureEstimate> {
    if n < 2 {
        return Err(Error::InvalidInput("increments need n >= 2".into()));
    }
    let a1 = log_word_sum(shift, potential, n - 1, true, budget)?;
    let a2 = log_word_sum(shift, potential, n, true, budget)?;
    Ok(PressureEstimate::heuristic("word_sum_accel", n, a2 - a1))
}

/// Periodic-orbit estimate (1/n) ln Z_n^per.
pub fn pressure_periodic(
    shift: &ShiftSpec,
    potential: &Potential,
    n: usize,
    budget: u64,
) -> Result<PressureEstimate> {
    let z = log_periodic_sum(shift, potential, n, budget)?;
    Ok(PressureEstimate::heuristic("periodic", n, z / n as f64))
}

/// Preimage estimate (1/n) ln Z_n^pre(anchor).
pub fn pressure_preimage(
    shift: &ShiftSpec,
    potential: &Potential,
    anchor: &Anchor,
    n: usize,
    budget: u64,
) -> Result<PressureEstimate> {
    let z = log_preimage_sum(shift, potential, anchor, n, budget)?;
    Ok(PressureEstimate::heuristic("preimage", n, z / n as f64))
}

/// Preimage increment ln Z_n - ln Z_(n-1). For the continued-fraction
/// family this rides the transfer operator, so n can be large at fixed
/// cost; everything else falls back to two enumerations.
pub fn pressure_preimage_accelerated(
    shift: &ShiftSpec,
    potential: &Potential,
    anchor: &Anchor,
    n: usize,
    budget: u64,
) -> Result<PressureEstimate> {
    if n < 2 {
        return Err(Error::InvalidInput("increments need n >= 2".into()));
    }
    if let (Some(mult), Anchor::Point(y)) = (potential.gauss_tilt_multipliers(), anchor) {
        if shift.is_full() {
            let grid = ChebGrid::new(32)?;
            let mut op = GaussOperator::new(&grid, shift.alphabet_size(), TailMode::None)?;
            for &(d, f) in &mult {
                op = op.multiply_digit(d, f)?;
            }
            let mut f = vec![1.0; grid.nodes().len()];
            let mut prev_at_y = 1.0;
            let mut at_y = 1.0;
            for _ in 0..n {
                f = op.apply(&f);
                prev_at_y = at_y;
                at_y = grid.eval(&f, *y);
            }
            let value = at_y.ln() - prev_at_y.ln();
            return Ok(PressureEstimate::heuristic("preimage_accel", n, value));
        }
    }
    let z1 = log_preimage_sum(shift, potential, anchor, n - 1, budget)?;
    let z2 = log_preimage_sum(shift, potential, anchor, n, budget)?;
    Ok(PressureEstimate::heuristic("preimage_accel", n, z2 - z1))
}

/// Certified two-sided pressure bracket through the transfer operator:
/// eigenvalue envelopes for the continued-fraction family (truncated, or
/// with the countable tail restored when include_tail is set), matrix
/// envelopes for finite-window potentials on finite shifts.
pub fn pressure_transfer_bracket(
    shift: &ShiftSpec,
    potential: &Potential,
    degree: usize,
    iters: usize,
    tolerance: f64,
    include_tail: bool,
) -> Result<PressureEstimate> {
    if let Some(mult) = potential.gauss_tilt_multipliers() {
        if !shift.is_full() {
            return Err(Error::UnsupportedModel(
                "the continued-fraction transfer bracket needs a full shift",
            ));
        }
        let grid = ChebGrid::new(degree)?;
        let m = shift.alphabet_size();
        let br = if include_tail {
            growth_bracket_full(&grid, m, &mult, iters, tolerance)?
        } else {
            growth_bracket_truncated(&grid, m, &mult, iters, tolerance)?
        };
        return Ok(PressureEstimate {
            ensemble: "transfer",
            n: iters,
            value: br.mid(),
            lo: br.log_lo,
            hi: br.log_hi,
            direction: Direction::TwoSided,
        });
    }
    if include_tail {
        return Err(Error::InvalidInput(
            "tail extension applies to the continued-fraction family only".into(),
        ));
    }
    let (b, dim) = weighted_block_matrix(shift, potential)?;
    let (lo, hi) = matrix_cw_bracket(&b, dim, iters)?;
    if hi - lo > tolerance {
        return Err(Error::DivergedInterpolation {
            spread: hi - lo,
            tolerance,
        });
    }
    Ok(PressureEstimate {
        ensemble: "transfer",
        n: iters,
        value: 0.5 * (lo + hi),
        lo,
        hi,
        direction: Direction::TwoSided,
    })
}

const BLOCK_BUDGET: u64 = 4096;

/// Weighted adjacency on (r-1)-blocks whose spectral radius is exp(P).
fn weighted_block_matrix(shift: &ShiftSpec, potential: &Potential) -> Result<(Vec<f64>, usize)> {
    let r = potential.window_depth().ok_or(Error::UnsupportedModel(
        "the block transfer matrix needs a finite-window potential",
    ))?;
    let k = r.max(2);
    let q = k - 1;
    let states: Vec<Vec<Symbol>> = shift.words(q, Constraint::none()).map(|w| w.0).collect();
    if states.len() as u64 > BLOCK_BUDGET {
        return Err(Error::AlphabetTooLargeForEnumeration {
            required: states.len() as u128,
            budget: BLOCK_BUDGET,
        });
    }
    let dim = states.len();
    let index: BTreeMap<&[Symbol], usize> = states
        .iter()
        .enumerate()
        .map(|(i, s)| (s.as_slice(), i))
        .collect();
    let mut b = vec![0.0; dim * dim];
    for (i, u) in states.iter().enumerate() {
        for c in 0..shift.alphabet_size() as Symbol {
            if !shift.allowed(u[q - 1], c) {
                continue;
            }
            let mut full = u.clone();
            full.push(c);
            let Some(&j) = index.get(&full[1..]) else {
                continue;
            };
            if let Some(v) = potential.window_value(&full[..r]) {
                b[i * dim + j] = v.exp();
            }
        }
    }
    Ok((b, dim))
}

/// Power-iterate, then read off the eigenvalue envelope min/max of
/// (Bv)_i / v_i, valid for any strictly positive test vector.
fn matrix_cw_bracket(b: &[f64], dim: usize, iters: usize) -> Result<(f64, f64)> {
    let apply = |v: &[f64]| -> Vec<f64> {
        (0..dim)
            .map(|i| (0..dim).map(|j| b[i * dim + j] * v[j]).sum())
            .collect()
    };
    let mut v = vec![1.0; dim];
    for _ in 0..iters {
        let nv = apply(&v);
        let mx = nv.iter().cloned().fold(0.0f64, f64::max);
        if !(mx > 0.0) || !mx.is_finite() {
            return Err(Error::DivergedInterpolation {
                spread: f64::INFINITY,
                tolerance: 0.0,
            });
        }
        v = nv.into_iter().map(|x| x / mx).collect();
    }
    let bv = apply(&v);
    let mut lo = f64::INFINITY;
    let mut hi = 0.0f64;
    for i in 0..dim {
        if !(v[i] > 0.0) {
            return Err(Error::DivergedInterpolation {
                spread: f64::INFINITY,
                tolerance: 0.0,
            });
        }
        let ratio = bv[i] / v[i];
        lo = lo.min(ratio);
        hi = hi.max(ratio);
    }
    Ok((lo.ln(), hi.ln()))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::potential::LcTable;
    use crate::potential::{Anchor, Observable, Potential};

    const PHI: f64 = 1.618033988749895;

    fn zero_potential() -> Potential {
        Potential::bernoulli(&[1.0, 1.0]).unwrap()
    }

    #[test]
    fn word_sums_count_golden_words_exactly() {
        let shift = ShiftSpec::golden_mean();
        let est = pressure_word_sum(&shift, &zero_potential(), 12, 100_000).unwrap();
        // 377 admissible words of length 12.
        assert!((est.value - (377.0f64).ln() / 12.0).abs() < 1e-12);
        assert_eq!(est.direction, Direction::UpperBound);
        assert!(est.value > PHI.ln());
        assert_eq!(est.hi, est.value);
    }

    #[test]
    fn periodic_sums_hit_the_trace_numbers() {
        let shift = ShiftSpec::golden_mean();
        let est12 = pressure_periodic(&shift, &zero_potential(), 12, 100_000).unwrap();
        assert!((est12.value - (322.0f64).ln() / 12.0).abs() < 1e-12);
        assert!((est12.value - PHI.ln()).abs() < 1e-6);
        let est20 = pressure_periodic(&shift, &zero_potential(), 20, 100_000).unwrap();
        assert!((est20.value - (15127.0f64).ln() / 20.0).abs() < 1e-12);
        assert!((est20.value - PHI.ln()).abs() < 1e-9);
    }

    #[test]
    fn accelerated_word_sums_converge_much_faster() {
        let shift = ShiftSpec::golden_mean();
        let plain = pressure_word_sum(&shift, &zero_potential(), 12, 100_000).unwrap();
        let accel = pressure_word_sum_accelerated(&shift, &zero_potential(), 12, 100_000).unwrap();
        // a_12 - a_11 = ln(377/233).
        assert!((accel.value - (377.0f64 / 233.0).ln()).abs() < 1e-12);
        let plain_err = (plain.value - PHI.ln()).abs();
        let accel_err = (accel.value - PHI.ln()).abs();
        assert!(accel_err < 1e-4);
        assert!(accel_err * 100.0 < plain_err);
        assert!(accel.lo.is_nan() && accel.hi.is_nan());
    }

    #[test]
    fn truncated_gauss_periodic_and_preimage_match_closed_forms() {
        let shift = ShiftSpec::full(2).unwrap();
        let phi = Potential::gauss_log();
        // Fixed points of the two branches: golden conjugate and sqrt(2)-1.
        let x1 = (5.0f64.sqrt() - 1.0) / 2.0;
        let x2 = 2.0f64.sqrt() - 1.0;
        let per = pressure_periodic(&shift, &phi, 1, 100).unwrap();
        assert!(
            (per.value - (x1 * x1 + x2 * x2).ln()).abs() < 1e-12,
            "per {}",
            per.value
        );

        let pre0 = pressure_preimage(&shift, &phi, &Anchor::Point(0.0), 1, 100).unwrap();
        assert!((pre0.value - 1.25f64.ln()).abs() < 1e-12);
        let preg = pressure_preimage(&shift, &phi, &Anchor::Point(x1), 1, 100).unwrap();
        let expect = (1.0 / ((1.0 + x1) * (1.0 + x1)) + 1.0 / ((2.0 + x1) * (2.0 + x1))).ln();
        assert!((preg.value - expect).abs() < 1e-12);
    }

    #[test]
    fn transfer_bracket_pins_golden_entropy() {
        let shift = ShiftSpec::golden_mean();
        let est = pressure_transfer_bracket(&shift, &zero_potential(), 8, 80, 1e-9, false).unwrap();
        assert_eq!(est.direction, Direction::TwoSided);
        assert!(est.lo <= PHI.ln() && PHI.ln() <= est.hi);
        assert!(est.hi - est.lo < 1e-9);
    }

    #[test]
    fn block_lift_sees_through_a_disguised_product_weight() {
        // Depth-3 table that only reads its first symbol: growth must be
        // ln(2 + 3) either way.
        let shift = ShiftSpec::full(2).unwrap();
        let mut map = BTreeMap::new();
        for a in 0..2u32 {
            for b in 0..2u32 {
                for c in 0..2u32 {
                    map.insert(vec![a, b, c], [2.0f64, 3.0][a as usize].ln());
                }
            }
        }
        let lc = Potential::locally_constant(LcTable::new(3, map).unwrap());
        let via_blocks = pressure_transfer_bracket(&shift, &lc, 8, 60, 1e-9, false).unwrap();
        let product = Potential::bernoulli(&[2.0, 3.0]).unwrap();
        let direct = pressure_transfer_bracket(&shift, &product, 8, 60, 1e-9, false).unwrap();
        assert!((via_blocks.value - 5.0f64.ln()).abs() < 1e-10);
        assert!((direct.value - 5.0f64.ln()).abs() < 1e-10);
    }

    #[test]
    fn tilted_transfer_agrees_with_preimage_increments() {
        let shift = ShiftSpec::full(2).unwrap();
        let phi = Potential::gauss_log().tilt(Observable::indicator_digit(1).unwrap(), 0.4);
        let bracket = pressure_transfer_bracket(&shift, &phi, 24, 60, 1e-8, false).unwrap();
        // Enumerated increments of the anchored sums.
        let anchor = Anchor::Point(0.3);
        let z15 = log_preimage_sum(&shift, &phi, &anchor, 15, 1 << 20).unwrap();
        let z16 = log_preimage_sum(&shift, &phi, &anchor, 16, 1 << 20).unwrap();
        assert!(
            (z16 - z15 - bracket.value).abs() < 1e-5,
            "enum {} vs {}",
            z16 - z15,
            bracket.value
        );
        // Operator-powered increments land on the same number.
        let accel = pressure_preimage_accelerated(&shift, &phi, &anchor, 16, 1 << 20).unwrap();
        assert!((accel.value - bracket.value).abs() < 1e-6);
        assert_eq!(accel.direction, Direction::Heuristic);
    }

    #[test]
    fn anchored_sums_skip_words_with_forbidden_seams() {
        let shift = ShiftSpec::golden_mean();
        let mut map = BTreeMap::new();
        map.insert(vec![0u32, 0], 0.0);
        map.insert(vec![0u32, 1], 0.0);
        map.insert(vec![1u32, 0], 0.0);
        let lc = Potential::locally_constant(LcTable::new(2, map).unwrap());
        // Anchor starting with 1 rules out words ending in 1: of the three
        // admissible 2-words only 00 and 10 contribute.
        let z = log_preimage_sum(&shift, &lc, &Anchor::Symbols(vec![1, 0]), 2, 100).unwrap();
        assert!((z - 2.0f64.ln()).abs() < 1e-12);
    }

    #[test]
    fn enumeration_budgets_are_enforced() {
        let shift = ShiftSpec::full(10).unwrap();
        let phi = Potential::gauss_log();
        let err = pressure_word_sum(&shift, &phi, 12, 1_000_000).unwrap_err();
        assert!(matches!(err, Error::BudgetExceeded { .. }));
    }
}
