//! Exponential tightness certificates: excursion level schedules, the
//! exact distribution of schedule violations over a window, and the
//! geometric bound that distribution must sit under.
//!
//! A schedule assigns a ceiling N_j to each look-ahead distance j, chosen
//! so the one-letter tail past N_j is at most theta^(j+1). Position i of a
//! trajectory is bad when some letter at distance j from it exceeds N_j.
//! The number of bad positions in a window of length n then has an
//! exponentially small upper tail, uniformly in n.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::gibbs::GibbsModel;
use crate::ldp::sample_symbols;

/// Badness at a position can only be caused by letters within this many
/// steps ahead, up to events of probability below theta^CLASS_CLIP.
const CLASS_CLIP: usize = 80;

/// Extra positions simulated past the window so that look-ahead from the
/// last window position is honest; influence from beyond decays like
/// theta^HORIZON_PAD.
const HORIZON_PAD: usize = 64;

/// Ceilings N_0 <= N_1 <= ... for letter labels, one per look-ahead
/// distance. Built so the tail past N_j is at most theta^(j+1).
#[derive(Debug, Clone, Serialize)]
pub struct TightnessSchedule {
    pub theta: f64,
    pub levels: Vec<u64>,
}

/// Smallest N with tail(N) <= bound, by galloping then bisection.
fn minimal_level(model: &GibbsModel, bound: f64, start: u64) -> Result<u64> {
    const GUARD: u64 = 1_000_000_000;
    if model.level_tail(start) <= bound {
        // The previous level already satisfies the tighter bound; shrink
        // back down to the true minimum.
        let mut lo = 0u64;
        let mut hi = start;
        while lo < hi {
            let mid = lo + (hi - lo) / 2;
            if model.level_tail(mid) <= bound {
                hi = mid;
            } else {
                lo = mid + 1;
            }
        }
        return Ok(lo);
    }
    let mut lo = start;
    let mut hi = start.max(1) * 2;
    while model.level_tail(hi) > bound {
        lo = hi;
        hi *= 2;
        if hi > 2 * GUARD {
            return Err(Error::InvalidInput(format!(
                "no level below {} has tail at most {:.3e}; the letter tail decays too slowly",
                GUARD, bound
            )));
        }
    }
    while lo + 1 < hi {
        let mid = lo + (hi - lo) / 2;
        if model.level_tail(mid) <= bound {
            hi = mid;
        } else {
            lo = mid + 1;
        }
    }
    let n = if model.level_tail(lo) <= bound {
        lo
    } else {
        hi
    };
    if n > GUARD {
        return Err(Error::InvalidInput(format!(
            "level {} exceeds the 1e9 guard; the letter tail decays too slowly",
            n
        )));
    }
    Ok(n)
}

/// Build the level schedule: N_j is the smallest ceiling whose letter
/// tail is at most theta^(j+1). theta must lie in (0, min(c0^-3, 1/5)],
/// the range where the Gibbs comparison argument closes.
pub fn build_schedule(
    model: &GibbsModel,
    theta: f64,
    depth: usize,
    c0: f64,
) -> Result<TightnessSchedule> {
    if !(c0 >= 1.0) || !c0.is_finite() {
        return Err(Error::InvalidInput(format!(
            "c0 = {} must be finite and >= 1",
            c0
        )));
    }
    let max = c0.powi(-3).min(0.2);
    if !(theta > 0.0) || theta > max {
        return Err(Error::ThetaOutOfRange { theta, max });
    }
    if depth == 0 {
        return Err(Error::InvalidInput("schedule depth must be >= 1".into()));
    }
    let mut levels = Vec::with_capacity(depth);
    let mut prev = 0u64;
    for j in 0..depth {
        let n = minimal_level(model, theta.powi(j as i32 + 1), prev)?;
        levels.push(n);
        prev = n;
    }
    Ok(TightnessSchedule { theta, levels })
}

impl TightnessSchedule {
    /// Look-ahead class of a letter label: the smallest j with x <= N_j,
    /// clipped at CLASS_CLIP. Past the stored levels the schedule extends
    /// by its defining rule, x <= N_j exactly when tail(x - 1) > theta^(j+1).
    fn level_index(&self, model: &GibbsModel, x: u64) -> usize {
        for (j, &nj) in self.levels.iter().enumerate() {
            if x <= nj {
                return j.min(CLASS_CLIP);
            }
            if j >= CLASS_CLIP {
                return CLASS_CLIP;
            }
        }
        if x == 0 {
            return 0;
        }
        let t = model.level_tail(x - 1);
        let mut j = self.levels.len();
        while j < CLASS_CLIP && self.theta.powi(j as i32 + 1) >= t {
            j += 1;
        }
        j
    }
}

/// Exact law of the number of bad positions in a window of length n.
#[derive(Debug, Clone, Serialize)]
pub struct VisitDistribution {
    pub n: usize,
    pub theta: f64,
    pub horizon: usize,
    /// probabilities[m] = P(exactly m bad positions among the first n).
    pub probabilities: Vec<f64>,
}

/// Letter-class probabilities for an independent-letter model:
/// pl[c] = P(level_index = c). The enumeration stops once the remaining
/// tail is below 1e-18 and parks that remainder in its own class.
fn product_level_probs(model: &GibbsModel, schedule: &TightnessSchedule) -> Vec<f64> {
    let mut pl = vec![0.0; CLASS_CLIP + 1];
    let mut x = 0u64;
    loop {
        pl[schedule.level_index(model, x)] += model.symbol_prob(x as u32);
        let t = model.level_tail(x);
        if t < 1e-18 || x > 10_000_000 {
            pl[schedule.level_index(model, x + 1)] += t;
            break;
        }
        x += 1;
    }
    pl
}

/// Advance one position backward: the badness reach B becomes
/// max(class of the letter here, B - 1); the position is bad when the new
/// reach is positive.
fn step_reach(b: usize, c: usize) -> usize {
    c.max(b.saturating_sub(1))
}

/// Exact distribution of bad-position counts by dynamic programming over
/// the badness reach, scanned backward from a far horizon. Supported for
/// independent-letter and Markov models; the Gauss measure's letters are
/// not a finite-order chain, so it only has the Monte Carlo route.
pub fn visit_distribution(
    model: &GibbsModel,
    schedule: &TightnessSchedule,
    n: usize,
) -> Result<VisitDistribution> {
    if n == 0 {
        return Err(Error::InvalidInput("visit counts need n >= 1".into()));
    }
    let horizon = n + HORIZON_PAD;
    let probabilities = match model {
        GibbsModel::BernoulliProduct(_) => {
            let pl = product_level_probs(model, schedule);
            // Phase 1: reach distribution at the window edge, positions
            // horizon-1 down to n with reach 0 past the horizon.
            let mut b = vec![0.0; CLASS_CLIP + 1];
            b[0] = 1.0;
            for _ in n..horizon {
                let mut nb = vec![0.0; CLASS_CLIP + 1];
                for (bb, &p) in b.iter().enumerate() {
                    if p == 0.0 {
                        continue;
                    }
                    for (c, &q) in pl.iter().enumerate() {
                        if q == 0.0 {
                            continue;
                        }
                        nb[step_reach(bb, c)] += p * q;
                    }
                }
                b = nb;
            }
            // Phase 2: joint (reach, bad count) over the window itself.
            let mut f = vec![vec![0.0; n + 1]; CLASS_CLIP + 1];
            for (bb, &p) in b.iter().enumerate() {
                f[bb][0] = p;
            }
            for _ in 0..n {
                let mut nf = vec![vec![0.0; n + 1]; CLASS_CLIP + 1];
                for (bb, row) in f.iter().enumerate() {
                    for (k, &v) in row.iter().enumerate() {
                        if v == 0.0 {
                            continue;
                        }
                        for (c, &q) in pl.iter().enumerate() {
                            if q == 0.0 {
                                continue;
                            }
                            let nb = step_reach(bb, c);
                            nf[nb][k + (nb >= 1) as usize] += v * q;
                        }
                    }
                }
                f = nf;
            }
            let mut out = vec![0.0; n + 1];
            for row in &f {
                for (k, &v) in row.iter().enumerate() {
                    out[k] += v;
                }
            }
            out
        }
        GibbsModel::MarkovChain { p, pi, m } => {
            let m = *m;
            // Backward scan needs the reversed kernel: conditioned on the
            // letter to the right being t, the letter here is s with
            // probability pi_s p(s -> t) / pi_t.
            let mut rev = vec![0.0; m * m];
            for t in 0..m {
                if pi[t] > 0.0 {
                    for s in 0..m {
                        rev[t * m + s] = pi[s] * p[s * m + t] / pi[t];
                    }
                }
            }
            let cls: Vec<usize> = (0..m)
                .map(|s| schedule.level_index(model, s as u64))
                .collect();
            let cmax = *cls.iter().max().unwrap_or(&0);
            // State (letter, reach); reach never exceeds the largest class.
            let mut b = vec![0.0; m * (cmax + 1)];
            for s in 0..m {
                b[s * (cmax + 1) + step_reach(0, cls[s])] += pi[s];
            }
            for _ in n..horizon.saturating_sub(1) {
                let mut nb = vec![0.0; m * (cmax + 1)];
                for t in 0..m {
                    for bb in 0..=cmax {
                        let v = b[t * (cmax + 1) + bb];
                        if v == 0.0 {
                            continue;
                        }
                        for s in 0..m {
                            let q = rev[t * m + s];
                            if q == 0.0 {
                                continue;
                            }
                            nb[s * (cmax + 1) + step_reach(bb, cls[s])] += v * q;
                        }
                    }
                }
                b = nb;
            }
            let mut f = vec![0.0; m * (cmax + 1) * (n + 1)];
            let idx = |s: usize, bb: usize, k: usize| (s * (cmax + 1) + bb) * (n + 1) + k;
            for s in 0..m {
                for bb in 0..=cmax {
                    f[idx(s, bb, 0)] = b[s * (cmax + 1) + bb];
                }
            }
            for _ in 0..n {
                let mut nf = vec![0.0; m * (cmax + 1) * (n + 1)];
                for t in 0..m {
                    for bb in 0..=cmax {
                        for k in 0..=n {
                            let v = f[idx(t, bb, k)];
                            if v == 0.0 {
                                continue;
                            }
                            for s in 0..m {
                                let q = rev[t * m + s];
                                if q == 0.0 {
                                    continue;
                                }
                                let nb = step_reach(bb, cls[s]);
                                nf[idx(s, nb, k + (nb >= 1) as usize)] += v * q;
                            }
                        }
                    }
                }
                f = nf;
            }
            let mut out = vec![0.0; n + 1];
            for s in 0..m {
                for bb in 0..=cmax {
                    for (k, slot) in out.iter_mut().enumerate() {
                        *slot += f[idx(s, bb, k)];
                    }
                }
            }
            out
        }
        GibbsModel::GaussMeasure => {
            return Err(Error::UnsupportedModel(
                "the Gauss measure's letters are not a finite-order chain; use mc_visit_counts",
            ))
        }
    };
    Ok(VisitDistribution {
        n,
        theta: schedule.theta,
        horizon,
        probabilities,
    })
}

/// Sampled bad-position counts, for models without an exact route and as
/// a cross-check for those with one.
#[derive(Debug, Clone, Serialize)]
pub struct VisitSample {
    pub n: usize,
    pub trials: u64,
    pub seed: u64,
    pub counts: Vec<u64>,
    pub probabilities: Vec<f64>,
}

pub fn mc_visit_counts(
    model: &GibbsModel,
    schedule: &TightnessSchedule,
    n: usize,
    trials: u64,
    seed: u64,
) -> Result<VisitSample> {
    if n == 0 || trials == 0 {
        return Err(Error::InvalidInput("need n >= 1 and trials >= 1".into()));
    }
    let horizon = n + HORIZON_PAD;
    // The Gauss measure's natural labels are 1-based partial quotients.
    let offset = matches!(model, GibbsModel::GaussMeasure) as u64;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut counts = vec![0u64; n + 1];
    for _ in 0..trials {
        let w = sample_symbols(model, horizon, &mut rng)?;
        let mut reach = 0usize;
        let mut bad = 0usize;
        for i in (0..horizon).rev() {
            let label = w[i] as u64 + offset;
            reach = step_reach(reach, schedule.level_index(model, label));
            if i < n && reach >= 1 {
                bad += 1;
            }
        }
        counts[bad] += 1;
    }
    let probabilities = counts.iter().map(|&c| c as f64 / trials as f64).collect();
    Ok(VisitSample {
        n,
        trials,
        seed,
        counts,
        probabilities,
    })
}

/// The geometric ceiling the visit distribution must sit under.
#[derive(Debug, Clone, Serialize)]
pub struct ExpoBoundCheck {
    pub theta: f64,
    pub n: usize,
    /// bounds[m] = 2^n (4 theta)^m / (1 - 4 theta).
    pub bounds: Vec<f64>,
    /// bounds[m] - probabilities[m]; nonnegative everywhere on a pass.
    pub margins: Vec<f64>,
    /// First m where the bound drops below 1 and starts saying something.
    pub informative_from: Option<usize>,
    pub pass: bool,
}

/// Check p_m <= 2^n (4 theta)^m / (1 - 4 theta) for every m. Needs
/// theta < 1/4 so the geometric envelope converges.
pub fn check_expo_bound(probabilities: &[f64], theta: f64, n: usize) -> Result<ExpoBoundCheck> {
    if !(theta > 0.0) || theta >= 0.25 {
        return Err(Error::ThetaOutOfRange { theta, max: 0.25 });
    }
    let base = 2f64.powi(n as i32) / (1.0 - 4.0 * theta);
    let mut bounds = Vec::with_capacity(probabilities.len());
    let mut margins = Vec::with_capacity(probabilities.len());
    let mut informative_from = None;
    let mut pass = true;
    for (m, &p) in probabilities.iter().enumerate() {
        let bound = base * (4.0 * theta).powi(m as i32);
        if bound < 1.0 && informative_from.is_none() {
            informative_from = Some(m);
        }
        if p > bound + 1e-12 {
            pass = false;
        }
        margins.push(bound - p);
        bounds.push(bound);
    }
    Ok(ExpoBoundCheck {
        theta,
        n,
        bounds,
        margins,
        informative_from,
        pass,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn halving() -> GibbsModel {
        // P(letter = k) = 2^-(k+1).
        GibbsModel::geometric(0.5, 0.5).unwrap()
    }

    #[test]
    fn schedule_levels_for_halving_tails() {
        let s = build_schedule(&halving(), 0.2, 4, 1.0).unwrap();
        assert_eq!(s.levels, vec![2, 4, 6, 9]);
        let s = build_schedule(&halving(), 0.01, 4, 1.0).unwrap();
        assert_eq!(s.levels, vec![6, 13, 19, 26]);
    }

    #[test]
    fn gauss_schedule_first_levels() {
        let s = build_schedule(&GibbsModel::gauss(), 0.2, 3, 1.0).unwrap();
        // Digit tail log2(1 + 1/(N+1)) <= 0.2 first holds at N = 6.
        assert_eq!(s.levels[0], 6);
        for (j, &nj) in s.levels.iter().enumerate() {
            let t = 0.2f64.powi(j as i32 + 1);
            assert!(GibbsModel::gauss().level_tail(nj) <= t);
            if nj > 0 {
                assert!(GibbsModel::gauss().level_tail(nj - 1) > t);
            }
        }
    }

    #[test]
    fn theta_range_is_enforced() {
        let err = build_schedule(&halving(), 0.21, 2, 1.0).unwrap_err();
        assert!(matches!(err, Error::ThetaOutOfRange { .. }));
        // c0 = 3 caps theta at 1/27.
        let err = build_schedule(&halving(), 0.1, 2, 3.0).unwrap_err();
        match err {
            Error::ThetaOutOfRange { max, .. } => assert!((max - 3f64.powi(-3)).abs() < 1e-15),
            e => panic!("{:?}", e),
        }
        assert!(build_schedule(&halving(), 1.0 / 27.0, 2, 3.0).is_ok());
    }

    #[test]
    fn single_position_matches_independent_closed_form() {
        let model = halving();
        let s = build_schedule(&model, 0.2, 4, 1.0).unwrap();
        let d = visit_distribution(&model, &s, 1).unwrap();
        assert_eq!(d.probabilities.len(), 2);
        let sum: f64 = d.probabilities.iter().sum();
        assert!((sum - 1.0).abs() < 1e-12);
        // Independent letters: position 0 is good exactly when letter j
        // stays within N_j for every j up to the horizon.
        let mut good = 1.0;
        for j in 0..d.horizon {
            let bound = 0.2f64.powi(j as i32 + 1);
            let nj = if j < s.levels.len() {
                s.levels[j]
            } else {
                minimal_level(&model, bound, *s.levels.last().unwrap()).unwrap()
            };
            good *= 1.0 - model.level_tail(nj);
        }
        assert!(
            (d.probabilities[0] - good).abs() < 1e-12,
            "{} vs {}",
            d.probabilities[0],
            good
        );
        // Union bound: P(bad) <= sum theta^(j+1) = theta / (1 - theta).
        assert!(d.probabilities[1] <= 0.2 / 0.8);
    }

    #[test]
    fn exact_dp_matches_monte_carlo() {
        let model = halving();
        let s = build_schedule(&model, 0.2, 4, 1.0).unwrap();
        let n = 6;
        let exact = visit_distribution(&model, &s, n).unwrap();
        let mc = mc_visit_counts(&model, &s, n, 40_000, 2024).unwrap();
        for m in 0..=n {
            let sigma = (exact.probabilities[m] * (1.0 - exact.probabilities[m]) / 40_000.0).sqrt();
            assert!(
                (exact.probabilities[m] - mc.probabilities[m]).abs() < 6.0 * sigma + 1e-3,
                "m = {}: exact {} vs mc {}",
                m,
                exact.probabilities[m],
                mc.probabilities[m]
            );
        }
    }

    #[test]
    fn markov_dp_matches_monte_carlo() {
        let rows = vec![
            vec![0.6, 0.3, 0.1],
            vec![0.5, 0.4, 0.1],
            vec![0.3, 0.3, 0.4],
        ];
        let model = GibbsModel::markov_chain(&rows, None).unwrap();
        let s = build_schedule(&model, 0.2, 3, 1.0).unwrap();
        let n = 5;
        let exact = visit_distribution(&model, &s, n).unwrap();
        let sum: f64 = exact.probabilities.iter().sum();
        assert!((sum - 1.0).abs() < 1e-12);
        let mc = mc_visit_counts(&model, &s, n, 40_000, 77).unwrap();
        for m in 0..=n {
            let sigma = (exact.probabilities[m] * (1.0 - exact.probabilities[m]) / 40_000.0).sqrt();
            assert!(
                (exact.probabilities[m] - mc.probabilities[m]).abs() < 6.0 * sigma + 1e-3,
                "m = {}: exact {} vs mc {}",
                m,
                exact.probabilities[m],
                mc.probabilities[m]
            );
        }
    }

    #[test]
    fn gauss_exact_route_is_refused_but_mc_works() {
        let model = GibbsModel::gauss();
        let s = build_schedule(&model, 0.2, 4, 1.0).unwrap();
        let err = visit_distribution(&model, &s, 4).unwrap_err();
        assert!(matches!(err, Error::UnsupportedModel(_)));
        let mc = mc_visit_counts(&model, &s, 4, 4_000, 5).unwrap();
        let sum: f64 = mc.probabilities.iter().sum();
        assert!((sum - 1.0).abs() < 1e-12);
        // All six digits of the window and the near look-ahead staying
        // under their ceilings happens a bit under half the time.
        assert!(
            mc.probabilities[0] > 0.3 && mc.probabilities[0] < 0.6,
            "{:?}",
            mc.probabilities
        );
    }

    #[test]
    fn expo_bound_values_and_gate() {
        let b = check_expo_bound(&vec![0.0; 11], 0.2, 10).unwrap();
        assert!((b.bounds[10] - 549.755813888).abs() < 1e-6);
        assert!(b.pass);
        assert!(b.informative_from.is_none());
        let b = check_expo_bound(&vec![0.0; 15], 0.01, 14).unwrap();
        assert_eq!(b.informative_from, Some(4));
        assert!(check_expo_bound(&[1.0], 0.25, 3).is_err());
    }

    #[test]
    fn halving_model_sits_under_the_geometric_envelope() {
        let model = halving();
        for theta in [0.2, 0.01] {
            let s = build_schedule(&model, theta, 4, 1.0).unwrap();
            let d = visit_distribution(&model, &s, 10).unwrap();
            let check = check_expo_bound(&d.probabilities, theta, 10).unwrap();
            assert!(check.pass, "theta {}: {:?}", theta, check.margins);
        }
    }
}
