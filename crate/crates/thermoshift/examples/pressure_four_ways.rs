//! Four estimates of the topological entropy of the golden-mean shift.
//! All of them should crowd around ln((1+sqrt(5))/2) = 0.481211825...
//!
//! The covering sum and preimage count converge like O(1/n) from above;
//! the periodic-point count is already exact up to the additive split
//! between the two trace terms.

use thermoshift::{
    pressure_periodic, pressure_preimage, pressure_transfer_bracket, pressure_word_sum, Anchor,
    Potential, ShiftSpec,
};

fn main() {
    let shift = ShiftSpec::golden_mean();
    // Unit weights make the potential identically zero, so pressure is
    // plain entropy.
    let zero = Potential::bernoulli(&[1.0, 1.0]).expect("zero potential");
    let target = ((1.0 + 5.0_f64.sqrt()) / 2.0).ln();
    println!("target ln(phi) = {:.12}\n", target);

    println!(
        "{:>4} {:>14} {:>14} {:>14}",
        "n", "word_sum", "periodic", "preimage"
    );
    for n in [4, 8, 12, 16, 20] {
        let ws = pressure_word_sum(&shift, &zero, n, 10_000_000).expect("word sum");
        let pp = pressure_periodic(&shift, &zero, n, 10_000_000).expect("periodic");
        let pre = pressure_preimage(&shift, &zero, &Anchor::Symbols(vec![0]), n, 10_000_000)
            .expect("preimage");
        println!(
            "{:>4} {:>14.10} {:>14.10} {:>14.10}",
            n, ws.value, pp.value, pre.value
        );
    }

    let bracket = pressure_transfer_bracket(&shift, &zero, 0, 200, 1e-12, false).expect("bracket");
    println!(
        "\nblock-matrix bracket: [{:.12}, {:.12}]",
        bracket.lo, bracket.hi
    );
    println!("error vs ln(phi): {:.2e}", (bracket.value - target).abs());
}
