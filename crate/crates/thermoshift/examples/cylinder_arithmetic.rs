//! Exact cylinder arithmetic for continued fractions. Continuant pairs
//! (p, q) carry each digit word to the exact rational interval of reals
//! whose expansion starts with that word; the interval length is exactly
//! 1/(q (q + q_prev)), so Lebesgue masses of cylinders never leave
//! integer arithmetic.

use num_bigint::BigUint;
use thermoshift::{cf_expand, cf_value, periodic_point, Continuants};

fn main() {
    // pi - 3 = [0; 7, 15, 1, 292, ...]
    let x = std::f64::consts::PI - 3.0;
    let digits = cf_expand(x, 10).expect("expansion");
    let shown: Vec<String> = digits.iter().map(|d| d.to_string()).collect();
    println!("pi - 3 = [0; {}, ...]", shown.join(", "));
    println!("reconstructed: {:.15} vs {:.15}", cf_value(&digits, 0.5), x);

    let c = Continuants::from_digits(&digits[..4]);
    let ((lon, lod), (hin, hid)) = c.interval();
    println!("\ncylinder of [0; 7, 15, 1, 292]:");
    println!("  [{}/{}, {}/{}]", lon, lod, hin, hid);
    let den = &c.q * (&c.q + &c.q_prev);
    println!("  length exactly 1/{}", den);

    // Quadratic irrationals are the periodic words.
    for word in [vec![1u64], vec![2], vec![1, 2]] {
        let (fixed, log_w) = periodic_point(&word).expect("periodic point");
        println!(
            "\nperiodic word {:?}: x = {:.12}, derivative weight exp({:.6}) = {:.8}",
            word,
            fixed,
            log_w,
            log_w.exp()
        );
    }

    // Continuants grow like phi^n even for the all-ones word; the
    // interval for fifty 1s is astronomically thin but still exact.
    let c = Continuants::from_digits(&vec![1u64; 50]);
    let den = &c.q * (&c.q + &c.q_prev);
    println!("\nfifty 1s: interval length 1/{}", den);
    assert!(den > BigUint::from(10u8).pow(20));
}
