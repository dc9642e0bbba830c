//! The Gauss map's log-derivative potential -2 ln|x'| has pressure zero
//! (Lebesgue measure is conformal). Truncating to the first M digits
//! pushes the pressure slightly negative; the collocation bracket for the
//! truncated operator plus the explicit tail bound recovers an interval
//! around zero.

use thermoshift::{pressure_transfer_bracket, pressure_word_sum, Potential, ShiftSpec};

fn main() {
    let potential = Potential::gauss_log();

    println!(
        "{:>5} {:>16} {:>16} {:>10}",
        "M", "bracket lo", "bracket hi", "width"
    );
    for m in [10, 30, 100, 300] {
        let shift = ShiftSpec::full(m).expect("shift");
        // Loose tolerance: at small M the tail term dominates the width,
        // and that is the point of the table.
        let b = pressure_transfer_bracket(&shift, &potential, 64, 40, 0.2, true).expect("bracket");
        assert!(b.lo <= 0.0 && 0.0 <= b.hi, "bracket must contain zero");
        println!(
            "{:>5} {:>16.10} {:>16.10} {:>10.2e}",
            m,
            b.lo,
            b.hi,
            b.hi - b.lo
        );
    }

    // The covering sums converge to the same limit from above, at O(1/n):
    // each sum enumerates all M^n cylinders, so only short words are
    // affordable and the bias is still visible.
    let shift = ShiftSpec::full(40).expect("shift");
    println!("\ncylinder covering sums at M = 40:");
    for n in [2, 3, 4] {
        let est = pressure_word_sum(&shift, &potential, n, 10_000_000).expect("word sum");
        println!("  n = {}: {:+.6}", n, est.value);
    }
}
