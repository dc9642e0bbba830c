//! Draw continued-fraction digit strings from the Gauss measure and
//! compare empirical digit frequencies with the exact law
//! P(digit = k) = log2(1 + 1/(k(k+2))). Then estimate a small-deviation
//! probability by Monte Carlo and check the Wilson interval against the
//! exponential prediction.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use thermoshift::{mc_deviation, sample_gauss_digits, GibbsModel, Observable, Side};

fn main() {
    let mut rng = ChaCha8Rng::seed_from_u64(42);
    let strings = 20_000;
    let len = 10;

    let mut counts = [0u64; 6];
    let mut total = 0u64;
    for _ in 0..strings {
        for d in sample_gauss_digits(&mut rng, len) {
            if (1..=5).contains(&d) {
                counts[d as usize] += 1;
            }
            total += 1;
        }
    }
    println!("{:>6} {:>10} {:>10}", "digit", "empirical", "exact");
    for k in 1..=5u64 {
        let exact = (1.0 + 1.0 / (k as f64 * (k as f64 + 2.0))).log2();
        println!(
            "{:>6} {:>10.5} {:>10.5}",
            k,
            counts[k as usize] as f64 / total as f64,
            exact
        );
    }

    // P(at least 70% of the first 12 digits are 1). The Gauss law mean is
    // log2(4/3) = 0.415, so this is a moderate deviation.
    let model = GibbsModel::gauss();
    let observable = Observable::indicator_digit(1).expect("observable");
    let mc = mc_deviation(&model, &observable, Side::AtLeast, 0.7, 12, 400_000, 42).expect("mc");
    println!(
        "\nP(freq >= 0.7 at n=12): {:.5} in [{:.5}, {:.5}], {} hits / {} trials",
        mc.probability, mc.ci_lo, mc.ci_hi, mc.hits, mc.trials
    );
    if let Some(rate) = mc.implied_rate {
        println!("implied rate ln(P)/n = {:.4}", rate);
    }
}
