//! Continued-fraction machinery for the Gauss map x -> 1/x mod 1.
//!
//! Digit words here use actual partial quotients (1-based); the shift-side
//! symbol s corresponds to digit s + 1. Everything numerically delicate is
//! carried either in exact integers or in log space: cylinder endpoints
//! collide to ~ q^-2 while the quantities we need (lengths, measures,
//! Birkhoff sums) live at that scale, so naive endpoint subtraction dies
//! around depth 18.

use num_bigint::BigUint;
use num_traits::{One, ToPrimitive, Zero};
use rand::Rng;

use crate::error::{Error, Result};

const LN2: f64 = std::f64::consts::LN_2;

/// Largest digit the samplers will emit.
const DIGIT_CAP: u64 = 1 << 31;

/// Exact continuant pair for a digit word: p/q = [0; a1, .., an] with
/// p(0) = 0, q(0) = 1, p(-1) = 1, q(-1) = 0.
#[derive(Debug, Clone)]
pub struct Continuants {
    pub p: BigUint,
    pub q: BigUint,
    pub p_prev: BigUint,
    pub q_prev: BigUint,
    n: usize,
}

impl Continuants {
    pub fn new() -> Self {
        Continuants {
            p: BigUint::zero(),
            q: BigUint::one(),
            p_prev: BigUint::one(),
            q_prev: BigUint::zero(),
            n: 0,
        }
    }

    pub fn from_digits(digits: &[u64]) -> Self {
        let mut c = Continuants::new();
        for &d in digits {
            c.push(d);
        }
        c
    }

    pub fn depth(&self) -> usize {
        self.n
    }

    pub fn push(&mut self, d: u64) {
        assert!(d >= 1, "partial quotients are at least 1");
        let p_new = d * &self.p + &self.p_prev;
        let q_new = d * &self.q + &self.q_prev;
        self.p_prev = std::mem::replace(&mut self.p, p_new);
        self.q_prev = std::mem::replace(&mut self.q, q_new);
        self.n += 1;
    }

    /// Exact cylinder endpoints as (lo_num, lo_den), (hi_num, hi_den).
    /// One endpoint is p/q, the other (p + p_prev)/(q + q_prev); which is
    /// which alternates with depth.
    pub fn interval(&self) -> ((BigUint, BigUint), (BigUint, BigUint)) {
        let e1 = (self.p.clone(), self.q.clone());
        let e2 = (&self.p + &self.p_prev, &self.q + &self.q_prev);
        if self.n % 2 == 0 {
            (e1, e2)
        } else {
            (e2, e1)
        }
    }

    pub fn interval_f64(&self) -> (f64, f64) {
        let ((ln, ld), (hn, hd)) = self.interval();
        (
            ln.to_f64().unwrap() / ld.to_f64().unwrap(),
            hn.to_f64().unwrap() / hd.to_f64().unwrap(),
        )
    }
}

impl Default for Continuants {
    fn default() -> Self {
        Continuants::new()
    }
}

/// Log-space continuant state for a digit word. Tracks log q(n), the ratio
/// s = q(n-1)/q(n), and the same pair for the mirrored sequence
/// G(n) = p(n) + q(n), which obeys the identical recursion. The signed gap
/// g - s has exact magnitude 1/(q G) and sign (-1)^n, so it is carried as
/// a log magnitude plus the parity rather than by subtraction.
#[derive(Debug, Clone)]
pub struct LogContinuants {
    log_q: f64,
    s: f64,
    log_g: f64,
    g: f64,
    n: usize,
}

impl LogContinuants {
    pub fn new() -> Self {
        // Empty word: q = 1, q_prev = 0; G = p + q = 1, G_prev = p_prev + q_prev = 1.
        LogContinuants {
            log_q: 0.0,
            s: 0.0,
            log_g: 0.0,
            g: 1.0,
            n: 0,
        }
    }

    pub fn from_digits(digits: &[u64]) -> Self {
        let mut c = LogContinuants::new();
        for &d in digits {
            c.push(d);
        }
        c
    }

    pub fn depth(&self) -> usize {
        self.n
    }

    pub fn push(&mut self, d: u64) {
        assert!(d >= 1, "partial quotients are at least 1");
        let d = d as f64;
        self.log_q += (d + self.s).ln();
        self.s = 1.0 / (d + self.s);
        self.log_g += (d + self.g).ln();
        self.g = 1.0 / (d + self.g);
        self.n += 1;
    }

    /// ln q(n).
    pub fn log_q(&self) -> f64 {
        self.log_q
    }

    /// q(n-1)/q(n).
    pub fn prev_ratio(&self) -> f64 {
        self.s
    }

    /// ln(q(n) + t q(n-1)) for t in [0, 1].
    pub fn log_q_shifted(&self, t: f64) -> f64 {
        self.log_q + (t * self.s).ln_1p()
    }

    /// ln of the cylinder's Lebesgue length, exactly 1/(q (q + q_prev)).
    pub fn log_lebesgue(&self) -> f64 {
        -(2.0 * self.log_q + self.s.ln_1p())
    }

    /// ln |g - s| = -(ln q + ln G).
    fn log_gap(&self) -> f64 {
        -(self.log_q + self.log_g)
    }

    /// Fraction of the cylinder's Gauss mass carried by the sub-interval
    /// where the continued tail t = T^n x lies in [0, u].
    pub fn tail_mass_fraction(&self, u: f64) -> f64 {
        let log_gap = self.log_gap();
        if log_gap < -600.0 {
            // The gap cancels between numerator and denominator once both
            // log1p calls are in their linear regime.
            return u * (1.0 + self.s) / (1.0 + self.s * u);
        }
        let mag = log_gap.exp();
        let delta = if self.n % 2 == 0 { mag } else { -mag };
        let num = (delta * u / (1.0 + self.s * u)).ln_1p().abs();
        let den = (delta / (1.0 + self.s)).ln_1p().abs();
        num / den
    }

    /// ln of the cylinder's Gauss measure.
    pub fn log_mass(&self) -> f64 {
        // mass = |log1p(delta / (1 + s))| / ln 2 with delta = g - s.
        let t = self.log_gap() - self.s.ln_1p();
        if t < -37.0 {
            // log1p is the identity to machine precision here
            t - LN2.ln()
        } else {
            let x = if self.n % 2 == 0 { t.exp() } else { -t.exp() };
            x.ln_1p().abs().ln() - LN2.ln()
        }
    }

    /// Gauss measure of the cylinder.
    pub fn mass(&self) -> f64 {
        self.log_mass().exp()
    }

    /// Sample the next partial quotient under the Gauss measure conditioned
    /// on this cylinder, by inverting the tail CDF d -> P(digit >= d).
    pub fn sample_digit<R: Rng>(&self, rng: &mut R) -> u64 {
        let v: f64 = rng.gen();
        let tail = |d: u64| self.tail_mass_fraction(1.0 / d as f64);
        // Bulk of the mass sits on small digits; scan those directly.
        for d in 1..8u64 {
            if tail(d + 1) <= v {
                return d;
            }
        }
        // tail(lo) > v; grow hi until tail(hi) <= v, then bisect.
        let mut lo = 8u64;
        let mut hi = 16u64;
        while hi < DIGIT_CAP && tail(hi) > v {
            lo = hi;
            hi *= 2;
        }
        if hi >= DIGIT_CAP && tail(DIGIT_CAP) > v {
            return DIGIT_CAP;
        }
        while hi - lo > 1 {
            let mid = lo + (hi - lo) / 2;
            if tail(mid) > v {
                lo = mid;
            } else {
                hi = mid;
            }
        }
        lo
    }
}

impl Default for LogContinuants {
    fn default() -> Self {
        LogContinuants::new()
    }
}

/// Evaluate [0; a1, .., an + tail] by backward recurrence.
pub fn cf_value(digits: &[u64], tail: f64) -> f64 {
    let mut u = tail;
    for &d in digits.iter().rev() {
        u = 1.0 / (d as f64 + u);
    }
    u
}

/// The point with purely periodic expansion [0; w, w, w, ..] and the log
/// weight -2 ln(q + x q_prev) of its length-|w| orbit segment.
pub fn periodic_point(digits: &[u64]) -> Result<(f64, f64)> {
    if digits.is_empty() {
        return Err(Error::InvalidInput("periodic word must be nonempty".into()));
    }
    // x -> [0; w + x] contracts by at least (golden mean)^-2 ~ 0.382.
    let mut x = 0.5f64;
    for _ in 0..200 {
        let next = cf_value(digits, x);
        if (next - x).abs() < 1e-16 * (1.0 + x) {
            x = next;
            break;
        }
        x = next;
    }
    let lc = LogContinuants::from_digits(digits);
    let log_weight = -2.0 * lc.log_q_shifted(x);
    Ok((x, log_weight))
}

/// The n-step preimage of y whose digit word is given, with its log weight
/// -2 ln(q + y q_prev).
pub fn preimage_point(digits: &[u64], y: f64) -> Result<(f64, f64)> {
    if !(0.0..=1.0).contains(&y) {
        return Err(Error::InvalidInput(format!(
            "preimage anchor y = {} outside [0, 1]",
            y
        )));
    }
    let x = cf_value(digits, y);
    let lc = LogContinuants::from_digits(digits);
    let log_weight = -2.0 * lc.log_q_shifted(y);
    Ok((x, log_weight))
}

/// Continued-fraction digits of x in (0, 1), at most max_digits of them.
/// Stops with TerminatedExpansion when the orbit hits 0 (x rational) and
/// with PrecisionExhausted when the denominator growth has consumed the
/// f64 mantissa, carrying the digits recovered so far.
pub fn cf_expand(x: f64, max_digits: usize) -> Result<Vec<u64>> {
    if !(x > 0.0 && x < 1.0) {
        return Err(Error::InvalidInput(format!(
            "cf_expand needs x in (0, 1), got {}",
            x
        )));
    }
    let mut digits = Vec::new();
    let mut t = x;
    // q grows by a factor >= golden mean per digit; once q > 2^24 the
    // remaining mantissa cannot pin down further digits of the input.
    let mut q = 1.0f64;
    let mut q_prev = 0.0f64;
    while digits.len() < max_digits {
        let inv = 1.0 / t;
        let d = inv.floor();
        if !(d >= 1.0) || d >= 9.0e15 {
            // t was 0 (or denormal junk): the expansion terminated.
            return Err(Error::TerminatedExpansion { digits });
        }
        digits.push(d as u64);
        let q_new = d * q + q_prev;
        q_prev = q;
        q = q_new;
        t = inv - d;
        if t <= 0.0 {
            return Err(Error::TerminatedExpansion { digits });
        }
        if q > (1u64 << 24) as f64 && digits.len() < max_digits {
            return Err(Error::PrecisionExhausted { digits });
        }
    }
    Ok(digits)
}

/// Gauss measure of the digit cylinder {x : a1(x) = d}.
pub fn gauss_digit_prob(d: u64) -> f64 {
    let d = d as f64;
    (1.0 / (d * (d + 2.0))).ln_1p() / LN2
}

/// Gauss measure of {x : a1(x) > n}.
pub fn gauss_digit_tail(n: u64) -> f64 {
    (1.0 / (n as f64 + 1.0)).ln_1p() / LN2
}

/// Draw a point distributed by the Gauss measure (1/ln 2) dx/(1+x).
pub fn sample_gauss<R: Rng>(rng: &mut R) -> f64 {
    let u: f64 = rng.gen();
    (u * LN2).exp_m1()
}

/// Draw the first n partial quotients of a Gauss-distributed point, digit
/// by digit from the exact conditional law given the growing prefix.
pub fn sample_gauss_digits<R: Rng>(rng: &mut R, n: usize) -> Vec<u64> {
    let mut state = LogContinuants::new();
    let mut digits = Vec::with_capacity(n);
    for _ in 0..n {
        let d = state.sample_digit(rng);
        state.push(d);
        digits.push(d);
    }
    digits
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn masses_of_short_cylinders() {
        let empty = LogContinuants::new();
        assert!((empty.mass() - 1.0).abs() < 1e-15);

        let one = LogContinuants::from_digits(&[1]);
        assert!((one.mass() - 0.4150374992788438).abs() < 1e-15);
        assert!((one.mass() - gauss_digit_prob(1)).abs() < 1e-15);

        let two = LogContinuants::from_digits(&[2]);
        assert!((two.mass() - 0.16992500144231237).abs() < 1e-15);

        let three = LogContinuants::from_digits(&[3]);
        assert!((three.mass() - 0.09310940439148147).abs() < 1e-15);

        // [0; 1, 1] covers [1/2, 2/3): mass log2(10/9).
        let oneone = LogContinuants::from_digits(&[1, 1]);
        assert!((oneone.mass() - 0.15200309344504997).abs() < 1e-15);
    }

    #[test]
    fn exact_intervals_and_lengths() {
        let c = Continuants::from_digits(&[1]);
        let ((ln, ld), (hn, hd)) = c.interval();
        assert_eq!((ln.to_u64(), ld.to_u64()), (Some(1), Some(2)));
        assert_eq!((hn.to_u64(), hd.to_u64()), (Some(1), Some(1)));

        let c = Continuants::from_digits(&[2]);
        let (lo, hi) = c.interval_f64();
        assert!((lo - 1.0 / 3.0).abs() < 1e-15);
        assert!((hi - 0.5).abs() < 1e-15);

        let c = Continuants::from_digits(&[1, 1]);
        let (lo, hi) = c.interval_f64();
        assert!((lo - 0.5).abs() < 1e-15);
        assert!((hi - 2.0 / 3.0).abs() < 1e-15);

        // Lebesgue length of [0; 1, 1] is 1/6 = 1/(q (q + q_prev)).
        let lc = LogContinuants::from_digits(&[1, 1]);
        assert!((lc.log_lebesgue() - (1.0f64 / 6.0).ln()).abs() < 1e-14);
    }

    #[test]
    fn deep_cylinder_mass_stays_accurate() {
        // All-ones word of depth 40: naive endpoint subtraction is dead by
        // depth ~18, the log-space state is not. Consecutive convergents are
        // Farey neighbors, so (1+hi)/(1+lo) = 1 + 1/((ln+ld) hd) exactly.
        let digits = vec![1u64; 40];
        let lc = LogContinuants::from_digits(&digits);
        let c = Continuants::from_digits(&digits);
        let ((ln_, ld), (hn, hd)) = c.interval();
        assert_eq!(&hn * &ld - &ln_ * &hd, BigUint::one());
        let d = ((&ln_ + &ld) * &hd).to_f64().unwrap();
        let exact = (1.0 / d).ln_1p() / LN2;
        let rel = (lc.mass() - exact).abs() / exact;
        assert!(rel < 1e-12, "rel err {}", rel);
    }

    #[test]
    fn periodic_point_golden_and_mixed() {
        let (x, logw) = periodic_point(&[1]).unwrap();
        assert!((x - 0.6180339887498949).abs() < 1e-12);
        assert!((logw - (-0.9624236501192069)).abs() < 1e-12);

        // [0; 1, 2, 1, 2, ..] = sqrt(3) - 1, weight (q2 + x q1)^-2 = (3+x)^-2.
        let (x, logw) = periodic_point(&[1, 2]).unwrap();
        assert!((x - (3.0f64.sqrt() - 1.0)).abs() < 1e-12);
        let expect = -2.0 * (3.0 + x).ln();
        assert!((logw - expect).abs() < 1e-12);
    }

    #[test]
    fn preimage_points_and_weights() {
        // Branch digit 1 at y = 0: z = 1, weight (q1 + 0)^-2 = 1.
        let (z, logw) = preimage_point(&[1], 0.0).unwrap();
        assert!((z - 1.0).abs() < 1e-15);
        assert!(logw.abs() < 1e-15);

        // Branch digit 2 at y = 1/2: z = 1/(2.5), weight (2 + 1/2)^-2.
        let (z, logw) = preimage_point(&[2], 0.5).unwrap();
        assert!((z - 0.4).abs() < 1e-15);
        assert!((logw - (-2.0 * 2.5f64.ln())).abs() < 1e-14);

        assert!(preimage_point(&[1], 1.5).is_err());
    }

    #[test]
    fn expand_recovers_digits() {
        let x = 2.0f64.sqrt() - 1.0; // [0; 2, 2, 2, ..]
        let digits = cf_expand(x, 10).unwrap();
        assert_eq!(digits, vec![2; 10]);

        match cf_expand(1.0 / 3.0, 10) {
            Err(Error::TerminatedExpansion { digits }) => assert_eq!(digits, vec![3]),
            other => panic!("expected termination, got {:?}", other),
        }

        // The golden point has digits all 1; f64 runs out near depth 35.
        match cf_expand(0.6180339887498949, 100) {
            Err(Error::PrecisionExhausted { digits }) => {
                assert!(digits.len() >= 25, "only {} digits", digits.len());
                assert!(digits.iter().all(|&d| d == 1));
            }
            other => panic!("expected precision exhaustion, got {:?}", other),
        }

        assert!(cf_expand(1.5, 4).is_err());
    }

    #[test]
    fn round_trip_expand_value() {
        let digits = [3u64, 7, 15, 1, 292];
        let x = cf_value(&digits, 0.35);
        let got = cf_expand(x, 5).unwrap();
        assert_eq!(got, digits);
    }

    #[test]
    fn sampler_matches_gauss_law() {
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        let n = 20000;
        let mut mean_cdf = 0.0;
        for _ in 0..n {
            let x = sample_gauss(&mut rng);
            assert!((0.0..1.0).contains(&x));
            mean_cdf += x.ln_1p() / LN2;
        }
        mean_cdf /= n as f64;
        // CDF of the sample is uniform, so its mean is 1/2 (sd ~ 0.002).
        assert!((mean_cdf - 0.5).abs() < 0.01, "mean cdf {}", mean_cdf);
    }

    #[test]
    fn digit_sampler_matches_digit_law() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        let words = 4000;
        let len = 5;
        let mut count1 = 0usize;
        let mut total = 0usize;
        for _ in 0..words {
            let digits = sample_gauss_digits(&mut rng, len);
            assert_eq!(digits.len(), len);
            count1 += digits.iter().filter(|&&d| d == 1).count();
            total += len;
        }
        let freq = count1 as f64 / total as f64;
        // Stationary frequency of digit 1 is log2(4/3) ~ 0.41504; allow 4 sigma
        // of a (correlated) sample of 20000 digits.
        assert!((freq - 0.4150374992788438).abs() < 0.02, "freq {}", freq);
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(48))]

        #[test]
        fn log_state_matches_exact_rationals(
            digits in proptest::collection::vec(1u64..9, 1..7),
        ) {
            let lc = LogContinuants::from_digits(&digits);
            let c = Continuants::from_digits(&digits);
            let ((ln_, ld), (hn, hd)) = c.interval();
            // Endpoints are Farey neighbors: hn/hd - ln/ld = 1/(ld hd).
            prop_assert_eq!(&hn * &ld - &ln_ * &hd, BigUint::one());
            let log_len = -(hd.to_f64().unwrap().ln() + ld.to_f64().unwrap().ln());
            prop_assert!((lc.log_lebesgue() - log_len).abs() < 1e-12);
            let d = ((&ln_ + &ld) * &hd).to_f64().unwrap();
            let mass = (1.0 / d).ln_1p() / LN2;
            prop_assert!((lc.mass() - mass).abs() / mass < 1e-12);
        }
    }
}
