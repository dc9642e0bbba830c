//! Level-1 large deviations: free energy, Legendre-transform rate curves,
//! constrained deviation sums for the sampling ensembles, and a Monte Carlo
//! cross-check.
//!
//! The free energy is Lambda(beta) = P(phi + beta psi) - P(phi), sampled on
//! a beta grid through a pressure backend and cached, so the Legendre
//! refinement can request intermediate points. Deviation rates are
//! (1/n) log of a constrained sum over length-n words whose count of a
//! marked symbol crosses the threshold ceil(alpha n), divided by the
//! unconstrained normalizer of the same ensemble at the same (n, alphabet).

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::gauss::{periodic_point, preimage_point, sample_gauss_digits, LogContinuants};
use crate::gibbs::GibbsModel;
use crate::potential::{Anchor, Observable, Potential};
use crate::pressure::pressure_transfer_bracket;
use crate::shift::{ShiftSpec, Symbol};
use crate::transfer::{
    growth_bracket_extended, marked_power, marked_trace, ChebGrid, InitFunction, TailMode,
};

/// Search window for the Legendre supremum. Optima at the edge are
/// reported with the `saturated` flag rather than silently trusted.
pub const BETA_WINDOW: f64 = 8.0;

/// Which pressure backend evaluates P(phi + beta psi).
#[derive(Debug, Clone)]
pub enum PressureMethod {
    /// Collatz-Wielandt envelope of the weighted block matrix. For
    /// finite-window potentials on finite alphabets; certified.
    BlockMatrix { iters: usize, tolerance: f64 },
    /// Truncated continued-fraction operator, digits 1..=M from the shift.
    /// Certified for the truncated system.
    TransferTruncated {
        degree: usize,
        iters: usize,
        tolerance: f64,
    },
    /// Countable-alphabet operator with digits beyond M kept explicitly up
    /// to M + extra and a polygamma remainder past that. Tight enough for
    /// derivative work; the remainder term itself is not certified.
    TransferExtended {
        degree: usize,
        extra: usize,
        iters: usize,
        tolerance: f64,
    },
}

#[derive(Debug, Clone, Copy, Serialize)]
struct Sample {
    beta: f64,
    raw: f64,
    width: f64,
}

/// Cached free-energy samples Lambda(beta), normalized so Lambda(0) = 0.
#[derive(Debug, Clone)]
pub struct FreeEnergy {
    shift: ShiftSpec,
    potential: Potential,
    observable: Observable,
    method: PressureMethod,
    base_raw: f64,
    max_width: f64,
    samples: Vec<Sample>,
}

/// Sample the free energy on a beta grid. The grid must be finite values;
/// beta = 0 is evaluated regardless to pin the normalization. Errors with
/// NonconvexSamples when the sampled points fail midpoint convexity beyond
/// what the pressure brackets can explain.
pub fn free_energy(
    shift: &ShiftSpec,
    potential: &Potential,
    observable: &Observable,
    beta_grid: &[f64],
    method: PressureMethod,
) -> Result<FreeEnergy> {
    for &b in beta_grid {
        if !b.is_finite() || b.abs() > 100.0 {
            return Err(Error::InvalidInput(format!("beta = {} out of range", b)));
        }
    }
    let mut fe = FreeEnergy {
        shift: shift.clone(),
        potential: potential.clone(),
        observable: observable.clone(),
        method,
        base_raw: f64::NAN,
        max_width: 0.0,
        samples: Vec::new(),
    };
    let (raw0, w0) = fe.eval(0.0)?;
    fe.base_raw = raw0;
    fe.max_width = w0;
    fe.insert(Sample {
        beta: 0.0,
        raw: raw0,
        width: w0,
    });
    for &b in beta_grid {
        fe.lambda(b)?;
    }
    fe.check_convex()?;
    Ok(fe)
}

impl FreeEnergy {
    fn eval(&self, beta: f64) -> Result<(f64, f64)> {
        let tilted = if beta == 0.0 {
            self.potential.clone()
        } else {
            self.potential.clone().tilt(self.observable.clone(), beta)
        };
        match self.method {
            PressureMethod::BlockMatrix { iters, tolerance } => {
                let est =
                    pressure_transfer_bracket(&self.shift, &tilted, 0, iters, tolerance, false)?;
                Ok((est.value, est.hi - est.lo))
            }
            PressureMethod::TransferTruncated {
                degree,
                iters,
                tolerance,
            } => {
                let est = pressure_transfer_bracket(
                    &self.shift,
                    &tilted,
                    degree,
                    iters,
                    tolerance,
                    false,
                )?;
                Ok((est.value, est.hi - est.lo))
            }
            PressureMethod::TransferExtended {
                degree,
                extra,
                iters,
                tolerance,
            } => {
                let mult = tilted
                    .gauss_tilt_multipliers()
                    .ok_or(Error::UnsupportedModel(
                        "the extended transfer backend needs the continued-fraction potential",
                    ))?;
                if !self.shift.is_full() {
                    return Err(Error::UnsupportedModel(
                        "the extended transfer backend needs a full shift",
                    ));
                }
                let grid = ChebGrid::new(degree)?;
                let br = growth_bracket_extended(
                    &grid,
                    self.shift.alphabet_size(),
                    extra,
                    &mult,
                    iters,
                    tolerance,
                )?;
                Ok((br.mid(), br.width()))
            }
        }
    }

    fn insert(&mut self, s: Sample) {
        let pos = self.samples.partition_point(|x| x.beta < s.beta);
        if self.samples.get(pos).map(|x| x.beta == s.beta) != Some(true) {
            self.samples.insert(pos, s);
        }
    }

    /// Lambda(beta), cached. Lambda(0) = 0 exactly by normalization.
    pub fn lambda(&mut self, beta: f64) -> Result<f64> {
        if !beta.is_finite() || beta.abs() > 100.0 {
            return Err(Error::InvalidInput(format!("beta = {} out of range", beta)));
        }
        let pos = self.samples.partition_point(|x| x.beta < beta);
        if let Some(s) = self.samples.get(pos) {
            if s.beta == beta {
                return Ok(s.raw - self.base_raw);
            }
        }
        let (raw, width) = self.eval(beta)?;
        self.max_width = self.max_width.max(width);
        self.samples.insert(pos, Sample { beta, raw, width });
        Ok(raw - self.base_raw)
    }

    /// The sampled curve, normalized, in increasing beta order.
    pub fn samples(&self) -> Vec<(f64, f64)> {
        self.samples
            .iter()
            .map(|s| (s.beta, s.raw - self.base_raw))
            .collect()
    }

    /// Widest pressure bracket seen while sampling.
    pub fn max_bracket_width(&self) -> f64 {
        self.max_width
    }

    /// Central difference (Lambda(h) - Lambda(-h)) / 2h: the mean of the
    /// observable under the equilibrium state, up to O(h^2).
    pub fn slope_at_zero(&mut self, h: f64) -> Result<f64> {
        if !(h > 0.0) {
            return Err(Error::InvalidInput("step h must be positive".into()));
        }
        Ok((self.lambda(h)? - self.lambda(-h)?) / (2.0 * h))
    }

    /// Midpoint convexity of the sampled points, with slack for the
    /// pressure brackets: a genuine kink beyond 2 * max width + 1e-9 means
    /// the samples cannot come from a convex function.
    fn check_convex(&self) -> Result<()> {
        let tol = 2.0 * self.max_width + 1e-9;
        for w in self.samples.windows(3) {
            let (a, b, c) = (w[0], w[1], w[2]);
            let left = (b.raw - a.raw) / (b.beta - a.beta);
            let right = (c.raw - b.raw) / (c.beta - b.beta);
            if left - right > tol {
                return Err(Error::NonconvexSamples {
                    beta: b.beta,
                    violation: left - right,
                });
            }
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct RatePoint {
    pub alpha: f64,
    pub rate: f64,
    pub beta_star: f64,
    /// The supremum landed on the edge of the beta window; the rate is
    /// then only a lower bound.
    pub saturated: bool,
}

#[derive(Debug, Clone, Serialize)]
pub struct RateCurve {
    pub points: Vec<RatePoint>,
}

#[derive(Debug, Clone, Copy, Serialize)]
pub struct CurveCheck {
    pub nonnegative: bool,
    pub min_rate: f64,
    pub convex: bool,
    pub worst_secant_drop: f64,
    pub monotone_flanks: bool,
}

/// Legendre transform I(alpha) = sup over beta of (alpha beta - Lambda).
/// Golden-section refinement inside [-BETA_WINDOW, BETA_WINDOW] down to
/// 1e-7 in beta, ties toward smaller |beta|. Alphas outside the pointwise
/// range of the observable get an infinite-rate marker.
pub fn rate_legendre(fe: &mut FreeEnergy, alphas: &[f64]) -> Result<RateCurve> {
    let (omin, omax) = fe.observable.value_range();
    let mut points = Vec::with_capacity(alphas.len());
    for &alpha in alphas {
        if !alpha.is_finite() {
            return Err(Error::InvalidInput(format!("alpha = {} not finite", alpha)));
        }
        if alpha < omin - 1e-12 || alpha > omax + 1e-12 {
            points.push(RatePoint {
                alpha,
                rate: f64::INFINITY,
                beta_star: f64::NAN,
                saturated: true,
            });
            continue;
        }
        let (beta_star, val) =
            golden_max(-BETA_WINDOW, BETA_WINDOW, |b| Ok(alpha * b - fe.lambda(b)?))?;
        // beta = 0 is always feasible and gives exactly 0 there, so the
        // supremum is never negative; tiny negatives are golden-section
        // noise.
        let (rate, beta_star) = if val < 0.0 {
            (0.0, 0.0)
        } else {
            (val, beta_star)
        };
        let saturated = BETA_WINDOW - beta_star.abs() < 1e-6;
        points.push(RatePoint {
            alpha,
            rate,
            beta_star,
            saturated,
        });
    }
    points.sort_by(|a, b| a.alpha.partial_cmp(&b.alpha).unwrap());
    Ok(RateCurve { points })
}

fn golden_max(
    mut lo: f64,
    mut hi: f64,
    mut f: impl FnMut(f64) -> Result<f64>,
) -> Result<(f64, f64)> {
    const INV: f64 = 0.618_033_988_749_894_9;
    let mut c = hi - INV * (hi - lo);
    let mut d = lo + INV * (hi - lo);
    let mut fc = f(c)?;
    let mut fd = f(d)?;
    while hi - lo > 1e-7 {
        let keep_left = if fc != fd {
            fc > fd
        } else {
            // Exact tie: keep whichever side sits closer to beta = 0.
            (lo + d).abs() <= (c + hi).abs()
        };
        if keep_left {
            hi = d;
            d = c;
            fd = fc;
            c = hi - INV * (hi - lo);
            fc = f(c)?;
        } else {
            lo = c;
            c = d;
            fc = fd;
            d = lo + INV * (hi - lo);
            fd = f(d)?;
        }
    }
    let beta = 0.5 * (lo + hi);
    let val = f(beta)?;
    Ok((beta, val))
}

impl RateCurve {
    /// Shape invariants every level-1 rate curve must satisfy: rates are
    /// nonnegative, secant slopes nondecrease (tolerance 1e-8), and the
    /// curve falls then rises around its minimum. Points with infinite
    /// rate markers sit outside the domain and are skipped.
    pub fn check_properties(&self) -> CurveCheck {
        let pts: Vec<&RatePoint> = self.points.iter().filter(|p| p.rate.is_finite()).collect();
        let mut min_rate = f64::INFINITY;
        for p in &pts {
            min_rate = min_rate.min(p.rate);
        }
        let nonnegative = min_rate >= 0.0;
        let mut worst_secant_drop = 0.0f64;
        for w in pts.windows(3) {
            let s1 = (w[1].rate - w[0].rate) / (w[1].alpha - w[0].alpha);
            let s2 = (w[2].rate - w[1].rate) / (w[2].alpha - w[1].alpha);
            worst_secant_drop = worst_secant_drop.max(s1 - s2);
        }
        let convex = worst_secant_drop <= 1e-8;
        let argmin = pts
            .iter()
            .enumerate()
            .min_by(|a, b| a.1.rate.partial_cmp(&b.1.rate).unwrap())
            .map(|(i, _)| i)
            .unwrap_or(0);
        let mut monotone_flanks = true;
        for i in 1..=argmin {
            if pts[i].rate > pts[i - 1].rate + 1e-9 {
                monotone_flanks = false;
            }
        }
        for i in argmin..pts.len().saturating_sub(1) {
            if pts[i + 1].rate < pts[i].rate - 1e-9 {
                monotone_flanks = false;
            }
        }
        CurveCheck {
            nonnegative,
            min_rate,
            convex,
            worst_secant_drop,
            monotone_flanks,
        }
    }
}

/// Which sampling ensemble weights the constrained words.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum DevEnsemble {
    /// Cylinder sizes: interval lengths for the continued-fraction system,
    /// plain weighted covering sums on finite shifts.
    Lebesgue,
    /// Periodic points weighted by their orbit segment, over Z_n periodic.
    Periodic,
    /// n-step preimages of an anchor, over Z_n at the same anchor.
    Preimage,
    /// The reference measure's own mass of the constrained union.
    GibbsMeasure,
}

/// Which side of the threshold the count constraint keeps.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum Side {
    AtLeast,
    AtMost,
}

#[derive(Debug, Clone, Serialize)]
pub struct DeviationRate {
    pub ensemble: DevEnsemble,
    pub side: Side,
    pub alpha: f64,
    pub n: usize,
    /// Count classes kept: m in [count_lo, count_hi].
    pub count_lo: usize,
    pub count_hi: usize,
    pub log_constrained: f64,
    /// Log of the unconstrained sum over the same truncated (n, M) family.
    /// Every ensemble is conditioned on its own truncated total, so the
    /// four rates share a limit despite the truncation's mass defect.
    pub log_normalizer: f64,
    /// (1/n)(log_constrained - log_normalizer).
    pub value: f64,
    /// Certified bracket where available (Lebesgue via endpoint envelopes);
    /// equal to value elsewhere.
    pub lo: f64,
    pub hi: f64,
}

fn count_range(side: Side, alpha: f64, n: usize) -> Result<(usize, usize)> {
    if !(0.0..=1.0 + 1e-12).contains(&alpha) {
        return Err(Error::InvalidInput(format!(
            "alpha = {} outside [0, 1] for a counting constraint",
            alpha
        )));
    }
    match side {
        Side::AtLeast => {
            let k = (alpha * n as f64 - 1e-9).ceil().max(0.0) as usize;
            if k > n {
                return Err(Error::EmptyConstraintSet);
            }
            Ok((k, n))
        }
        Side::AtMost => {
            let k = (alpha * n as f64 + 1e-9).floor().min(n as f64) as usize;
            Ok((0, k))
        }
    }
}

/// Deviation rate of one ensemble: (1/n) log of the constrained sum over
/// the normalizer. Exact count-marked matrix products on finite shifts
/// with one-symbol potentials; count-marked collocation of the transfer
/// operator for the continued-fraction family (with the all-marked edge
/// class replaced by its exact single-word value). The GibbsMeasure
/// ensemble needs `model`; the Preimage ensemble needs `anchor` (Point for
/// the continued-fraction system, trailing Symbols on finite shifts,
/// defaulting to the point 0).
pub fn deviation_rate_constrained(
    shift: &ShiftSpec,
    potential: &Potential,
    observable: &Observable,
    model: Option<&GibbsModel>,
    ensemble: DevEnsemble,
    side: Side,
    alpha: f64,
    n: usize,
    anchor: Option<&Anchor>,
    degree: usize,
) -> Result<DeviationRate> {
    if n == 0 {
        return Err(Error::InvalidInput("deviation rates need n >= 1".into()));
    }
    let marked = observable
        .indicator_symbol()
        .ok_or(Error::UnsupportedModel(
            "count constraints need an indicator observable",
        ))?;
    if marked as usize >= shift.alphabet_size() {
        return Err(Error::InvalidInput(format!(
            "marked symbol {} outside the alphabet",
            marked
        )));
    }
    let (count_lo, count_hi) = count_range(side, alpha, n)?;
    let is_gauss = matches!(potential, Potential::GaussLog);
    let (log_constrained, log_normalizer, lo, hi) = if is_gauss {
        if !shift.is_full() {
            return Err(Error::UnsupportedModel(
                "the continued-fraction ensembles need a full digit shift",
            ));
        }
        gauss_constrained(
            shift, model, ensemble, marked, n, count_lo, count_hi, anchor, degree,
        )?
    } else {
        chain_constrained(
            shift, potential, model, ensemble, marked, n, count_lo, count_hi, anchor,
        )?
    };
    if !log_constrained.is_finite() {
        return Err(Error::EmptyConstraintSet);
    }
    let value = (log_constrained - log_normalizer) / n as f64;
    Ok(DeviationRate {
        ensemble,
        side,
        alpha,
        n,
        count_lo,
        count_hi,
        log_constrained,
        log_normalizer,
        value,
        lo,
        hi,
    })
}

#[allow(clippy::too_many_arguments)]
fn gauss_constrained(
    shift: &ShiftSpec,
    model: Option<&GibbsModel>,
    ensemble: DevEnsemble,
    marked: Symbol,
    n: usize,
    count_lo: usize,
    count_hi: usize,
    anchor: Option<&Anchor>,
    degree: usize,
) -> Result<(f64, f64, f64, f64)> {
    let m = shift.alphabet_size();
    let digit = marked as u64 + 1;
    let grid = ChebGrid::new(degree)?;
    let range = count_lo..=count_hi;
    // The all-marked extreme class is a single word whose operator-borne
    // value can sink below collocation noise; its exact value is cheap.
    let exact_edge = |log_weight: f64| -> f64 { log_weight };
    let single = count_lo == n;
    let word: Vec<u64> = vec![digit; n];
    match ensemble {
        DevEnsemble::Lebesgue => {
            let classes = marked_power(&grid, m, digit, n, InitFunction::One, TailMode::None)?;
            let at = |idx: usize| -> f64 { range.clone().map(|c| classes[c][idx]).sum() };
            let integral: f64 = {
                let sum: Vec<f64> = (0..grid.len())
                    .map(|j| range.clone().map(|c| classes[c][j]).sum())
                    .collect();
                grid.integrate(&sum)
            };
            // Condition on the truncated family: all ensembles divide by
            // the same-(n, M) total, so their rates share a limit.
            let total: f64 = {
                let sum: Vec<f64> = (0..grid.len())
                    .map(|j| (0..=n).map(|c| classes[c][j]).sum())
                    .collect();
                grid.integrate(&sum)
            };
            let log_c = if single {
                exact_edge(LogContinuants::from_digits(&word).log_lebesgue())
            } else {
                guard_log(integral)?
            };
            let log_z = guard_log(total)?;
            let v = (log_c - log_z) / n as f64;
            // Branch derivatives at the interval ends certify the bracket:
            // node 0 is t = 1, the last node is t = 0.
            let lo = (guard_log(at(0))? - log_z) / n as f64;
            let hi = (guard_log(at(grid.len() - 1))? - log_z) / n as f64;
            Ok((log_c, log_z, lo.min(v), hi.max(v)))
        }
        DevEnsemble::Periodic => {
            let traces = marked_trace(&grid, m, digit, n, TailMode::None)?;
            let constrained: f64 = range.clone().map(|c| traces[c]).sum();
            let total: f64 = traces.iter().sum();
            let log_c = if single {
                exact_edge(periodic_point(&word)?.1)
            } else {
                guard_log(constrained)?
            };
            let log_z = guard_log(total)?;
            let v = (log_c - log_z) / n as f64;
            Ok((log_c, log_z, v, v))
        }
        DevEnsemble::Preimage => {
            let y = match anchor {
                None => 0.0,
                Some(Anchor::Point(y)) => *y,
                Some(Anchor::Symbols(_)) => {
                    return Err(Error::InvalidInput(
                        "the continued-fraction preimage anchor is a point of [0, 1]".into(),
                    ))
                }
            };
            if !(0.0..=1.0).contains(&y) {
                return Err(Error::InvalidInput(format!(
                    "anchor y = {} outside [0, 1]",
                    y
                )));
            }
            let classes = marked_power(&grid, m, digit, n, InitFunction::One, TailMode::None)?;
            let eval = |c: usize| grid.eval(&classes[c], y);
            let constrained: f64 = range.clone().map(eval).sum();
            let total: f64 = (0..=n).map(eval).sum();
            let log_c = if single {
                exact_edge(preimage_point(&word, y)?.1)
            } else {
                guard_log(constrained)?
            };
            let log_z = guard_log(total)?;
            let v = (log_c - log_z) / n as f64;
            Ok((log_c, log_z, v, v))
        }
        DevEnsemble::GibbsMeasure => {
            match model {
                Some(GibbsModel::GaussMeasure) => {}
                Some(_) => {
                    return Err(Error::InvalidInput(
                        "continued-fraction cylinders take the Gauss measure model".into(),
                    ))
                }
                None => {
                    return Err(Error::InvalidInput(
                        "the GibbsMeasure ensemble needs a model".into(),
                    ))
                }
            }
            let classes = marked_power(
                &grid,
                m,
                digit,
                n,
                InitFunction::GaussDensity,
                TailMode::None,
            )?;
            let sum: Vec<f64> = (0..grid.len())
                .map(|j| range.clone().map(|c| classes[c][j]).sum())
                .collect();
            let integral = grid.integrate(&sum);
            let total: f64 = {
                let s: Vec<f64> = (0..grid.len())
                    .map(|j| (0..=n).map(|c| classes[c][j]).sum())
                    .collect();
                grid.integrate(&s)
            };
            let log_c = if single {
                let symbols: Vec<Symbol> = vec![marked; n];
                GibbsModel::gauss().log_mass(&symbols)
            } else {
                guard_log(integral)?
            };
            let log_z = guard_log(total)?;
            let v = (log_c - log_z) / n as f64;
            Ok((log_c, log_z, v, v))
        }
    }
}

fn guard_log(x: f64) -> Result<f64> {
    if x > 0.0 {
        Ok(x.ln())
    } else {
        // Positive sums that land at or below zero have been consumed by
        // collocation roundoff.
        Err(Error::PrecisionExhausted { digits: Vec::new() })
    }
}

/// One-symbol weights for the counting DP: an initial weight per symbol
/// and an edge weight per allowed transition.
struct Chain {
    m: usize,
    init: Vec<f64>,
    edge: Vec<f64>,
}

fn potential_chain(shift: &ShiftSpec, potential: &Potential) -> Result<Chain> {
    match potential.window_depth() {
        Some(1) => {}
        _ => {
            return Err(Error::UnsupportedModel(
                "the counting path needs a one-symbol potential window",
            ))
        }
    }
    let m = shift.alphabet_size();
    let mut wt = vec![0.0; m];
    for a in 0..m {
        wt[a] = potential
            .window_value(&[a as Symbol])
            .map(f64::exp)
            .unwrap_or(0.0);
    }
    let mut edge = vec![0.0; m * m];
    for a in 0..m {
        for b in 0..m {
            if shift.allowed(a as Symbol, b as Symbol) {
                edge[a * m + b] = wt[b];
            }
        }
    }
    Ok(Chain { m, init: wt, edge })
}

fn model_chain(shift: &ShiftSpec, model: &GibbsModel) -> Result<Chain> {
    let m = shift.alphabet_size();
    match model {
        GibbsModel::BernoulliProduct(_) => {
            let mut init = vec![0.0; m];
            for (a, slot) in init.iter_mut().enumerate() {
                *slot = model.symbol_prob(a as Symbol);
            }
            let mut edge = vec![0.0; m * m];
            for a in 0..m {
                for b in 0..m {
                    if shift.allowed(a as Symbol, b as Symbol) {
                        edge[a * m + b] = init[b];
                    }
                }
            }
            Ok(Chain { m, init, edge })
        }
        GibbsModel::MarkovChain { p, pi, m: cm } => {
            if *cm != m {
                return Err(Error::InvalidInput(format!(
                    "model alphabet {} does not match the shift alphabet {}",
                    cm, m
                )));
            }
            let mut edge = vec![0.0; m * m];
            for a in 0..m {
                for b in 0..m {
                    if shift.allowed(a as Symbol, b as Symbol) {
                        edge[a * m + b] = p[a * m + b];
                    }
                }
            }
            Ok(Chain {
                m,
                init: pi.clone(),
                edge,
            })
        }
        GibbsModel::GaussMeasure => Err(Error::UnsupportedModel(
            "the Gauss measure rides the operator path, not the counting DP",
        )),
    }
}

/// Forward count-marked DP: class sums by (marked count, final symbol).
fn marked_forward(chain: &Chain, marked: Symbol, n: usize) -> Vec<Vec<f64>> {
    let m = chain.m;
    let mut f = vec![vec![0.0; m]; n + 1];
    for b in 0..m {
        let cls = (b as Symbol == marked) as usize;
        f[cls][b] = chain.init[b];
    }
    for _ in 1..n {
        let mut next = vec![vec![0.0; m]; n + 1];
        for cls in 0..=n {
            for b in 0..m {
                let v = f[cls][b];
                if v == 0.0 {
                    continue;
                }
                for c in 0..m {
                    let w = chain.edge[b * m + c];
                    if w == 0.0 {
                        continue;
                    }
                    let ncls = cls + (c as Symbol == marked) as usize;
                    if ncls <= n {
                        next[ncls][c] += v * w;
                    }
                }
            }
        }
        f = next;
    }
    f
}

/// Start-resolved count-marked DP for the wrap-around ensemble: entry
/// [cls][a][b] sums weighted paths from a to b with cls marks.
fn marked_wrap(chain: &Chain, marked: Symbol, n: usize) -> Vec<Vec<f64>> {
    let m = chain.m;
    let mut g = vec![vec![0.0; m * m]; n + 1];
    for a in 0..m {
        let cls = (a as Symbol == marked) as usize;
        g[cls][a * m + a] = chain.init[a];
    }
    for _ in 1..n {
        let mut next = vec![vec![0.0; m * m]; n + 1];
        for cls in 0..=n {
            for a in 0..m {
                for b in 0..m {
                    let v = g[cls][a * m + b];
                    if v == 0.0 {
                        continue;
                    }
                    for c in 0..m {
                        let w = chain.edge[b * m + c];
                        if w == 0.0 {
                            continue;
                        }
                        let ncls = cls + (c as Symbol == marked) as usize;
                        if ncls <= n {
                            next[ncls][a * m + c] += v * w;
                        }
                    }
                }
            }
        }
        g = next;
    }
    g
}

#[allow(clippy::too_many_arguments)]
fn chain_constrained(
    shift: &ShiftSpec,
    potential: &Potential,
    model: Option<&GibbsModel>,
    ensemble: DevEnsemble,
    marked: Symbol,
    n: usize,
    count_lo: usize,
    count_hi: usize,
    anchor: Option<&Anchor>,
) -> Result<(f64, f64, f64, f64)> {
    let range = count_lo..=count_hi;
    match ensemble {
        DevEnsemble::Lebesgue | DevEnsemble::GibbsMeasure => {
            let chain = if ensemble == DevEnsemble::Lebesgue {
                potential_chain(shift, potential)?
            } else {
                let model = model.ok_or_else(|| {
                    Error::InvalidInput("the GibbsMeasure ensemble needs a model".into())
                })?;
                model_chain(shift, model)?
            };
            let f = marked_forward(&chain, marked, n);
            let class_sum = |cls: usize| -> f64 { f[cls].iter().sum() };
            let constrained: f64 = range.clone().map(class_sum).sum();
            let total: f64 = (0..=n).map(class_sum).sum();
            let log_c = finite_log(constrained);
            let log_z = finite_log(total);
            let v = (log_c - log_z) / n as f64;
            Ok((log_c, log_z, v, v))
        }
        DevEnsemble::Periodic => {
            let chain = potential_chain(shift, potential)?;
            let g = marked_wrap(&chain, marked, n);
            let m = chain.m;
            let closed = |cls: usize| -> f64 {
                let mut acc = 0.0;
                for a in 0..m {
                    for b in 0..m {
                        if shift.allowed(b as Symbol, a as Symbol) {
                            acc += g[cls][a * m + b];
                        }
                    }
                }
                acc
            };
            let constrained: f64 = range.clone().map(closed).sum();
            let total: f64 = (0..=n).map(closed).sum();
            let log_c = finite_log(constrained);
            let log_z = finite_log(total);
            let v = (log_c - log_z) / n as f64;
            Ok((log_c, log_z, v, v))
        }
        DevEnsemble::Preimage => {
            let chain = potential_chain(shift, potential)?;
            let y = match anchor {
                Some(Anchor::Symbols(y)) if !y.is_empty() => {
                    shift.check_word(y)?;
                    y[0]
                }
                Some(Anchor::Point(_)) => {
                    return Err(Error::InvalidInput(
                        "finite-shift preimage anchors are trailing symbols".into(),
                    ))
                }
                _ => {
                    return Err(Error::InvalidInput(
                        "the preimage ensemble needs an anchor word".into(),
                    ))
                }
            };
            let f = marked_forward(&chain, marked, n);
            let class_sum = |cls: usize| -> f64 {
                (0..chain.m)
                    .filter(|&b| shift.allowed(b as Symbol, y))
                    .map(|b| f[cls][b])
                    .sum()
            };
            let constrained: f64 = range.clone().map(class_sum).sum();
            let total: f64 = (0..=n).map(class_sum).sum();
            let log_c = finite_log(constrained);
            let log_z = finite_log(total);
            let v = (log_c - log_z) / n as f64;
            Ok((log_c, log_z, v, v))
        }
    }
}

fn finite_log(x: f64) -> f64 {
    if x > 0.0 {
        x.ln()
    } else {
        f64::NEG_INFINITY
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct McDeviation {
    pub hits: u64,
    pub trials: u64,
    pub probability: f64,
    pub ci_lo: f64,
    pub ci_hi: f64,
    /// (1/n) log of the point estimate; absent when nothing hit.
    pub implied_rate: Option<f64>,
    /// (1/n) log of the Wilson interval; the lower end is -inf at 0 hits.
    pub rate_lo: f64,
    pub rate_hi: f64,
    pub n: usize,
    pub seed: u64,
}

/// Monte Carlo estimate of the deviation probability under the model,
/// with a Wilson score interval. Zero hits still give a one-sided bound.
pub fn mc_deviation(
    model: &GibbsModel,
    observable: &Observable,
    side: Side,
    alpha: f64,
    n: usize,
    trials: u64,
    seed: u64,
) -> Result<McDeviation> {
    if n == 0 || trials == 0 {
        return Err(Error::InvalidInput("need n >= 1 and trials >= 1".into()));
    }
    let depth = observable.window_depth();
    let len = n + depth - 1;
    let marked = observable.indicator_symbol();
    let threshold = if let Some(_) = marked {
        let (lo, hi) = count_range(side, alpha, n)?;
        (lo as f64, hi as f64)
    } else {
        match side {
            Side::AtLeast => (alpha * n as f64 - 1e-9, f64::INFINITY),
            Side::AtMost => (f64::NEG_INFINITY, alpha * n as f64 + 1e-9),
        }
    };
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut hits = 0u64;
    for _ in 0..trials {
        let w = sample_symbols(model, len, &mut rng)?;
        let sum = if let Some(s) = marked {
            w[..n].iter().filter(|&&x| x == s).count() as f64
        } else {
            let mut acc = 0.0;
            for i in 0..n {
                acc += observable.window_value(&w[i..i + depth]).ok_or_else(|| {
                    Error::InvalidInput("observable undefined on a sampled window".into())
                })?;
            }
            acc
        };
        let hit = match side {
            Side::AtLeast => sum >= threshold.0,
            Side::AtMost => sum <= threshold.1,
        };
        if hit {
            hits += 1;
        }
    }
    let z = 1.959963984540054f64;
    let t = trials as f64;
    let p_hat = hits as f64 / t;
    let denom = 1.0 + z * z / t;
    let center = (p_hat + z * z / (2.0 * t)) / denom;
    let half = z * (p_hat * (1.0 - p_hat) / t + z * z / (4.0 * t * t)).sqrt() / denom;
    // At the boundary counts the Wilson interval pins to the boundary
    // exactly; the algebra above only gets there up to roundoff.
    let ci_lo = if hits == 0 {
        0.0
    } else {
        (center - half).max(0.0)
    };
    let ci_hi = if hits == trials {
        1.0
    } else {
        (center + half).min(1.0)
    };
    let nf = n as f64;
    Ok(McDeviation {
        hits,
        trials,
        probability: p_hat,
        ci_lo,
        ci_hi,
        implied_rate: if hits > 0 {
            Some(p_hat.ln() / nf)
        } else {
            None
        },
        rate_lo: finite_log(ci_lo) / nf,
        rate_hi: finite_log(ci_hi) / nf,
        n,
        seed,
    })
}

pub(crate) fn sample_symbols<R: Rng>(
    model: &GibbsModel,
    len: usize,
    rng: &mut R,
) -> Result<Vec<Symbol>> {
    let mut out = Vec::with_capacity(len);
    match model {
        GibbsModel::BernoulliProduct(_) => {
            for _ in 0..len {
                out.push(sample_cdf(rng, |s| model.symbol_prob(s))?);
            }
        }
        GibbsModel::GaussMeasure => {
            for d in sample_gauss_digits(rng, len) {
                out.push((d - 1) as Symbol);
            }
        }
        GibbsModel::MarkovChain { p, pi, m } => {
            let mut prev: Option<usize> = None;
            for _ in 0..len {
                let row: &[f64] = match prev {
                    None => pi,
                    Some(a) => &p[a * m..(a + 1) * m],
                };
                let mut u: f64 = rng.gen();
                let mut s = m - 1;
                for (b, &q) in row.iter().enumerate() {
                    if u < q {
                        s = b;
                        break;
                    }
                    u -= q;
                }
                out.push(s as Symbol);
                prev = Some(s);
            }
        }
    }
    Ok(out)
}

fn sample_cdf<R: Rng>(rng: &mut R, prob: impl Fn(Symbol) -> f64) -> Result<Symbol> {
    let mut u: f64 = rng.gen();
    let mut s: u64 = 0;
    loop {
        let q = prob(s as Symbol);
        if u < q || s >= (1 << 31) {
            return Ok(s as Symbol);
        }
        u -= q;
        s += 1;
    }
}
