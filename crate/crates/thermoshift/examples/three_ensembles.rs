//! Three different finite ensembles assign a probability to "at least 90%
//! of the first n continued-fraction digits are 1": Lebesgue measure of
//! the union of cylinders, a weighted count of periodic points, and a
//! weighted count of preimages of a fixed anchor. All three decay at the
//! same exponential rate.

use thermoshift::{
    deviation_rate_constrained, DevEnsemble, GibbsModel, Observable, Potential, ShiftSpec, Side,
};

fn main() {
    let shift = ShiftSpec::full(20).expect("shift");
    let potential = Potential::gauss_log();
    let observable = Observable::indicator_digit(1).expect("observable");
    let model = GibbsModel::gauss();

    let alpha = 0.9;
    println!("P(freq of digit 1 >= {alpha}) as exp(n * rate):\n");
    println!(
        "{:>4} {:>14} {:>14} {:>14} {:>14}",
        "n", "lebesgue", "periodic", "preimage", "gauss"
    );
    for n in [8, 16, 24] {
        let mut row = Vec::new();
        for ens in [
            DevEnsemble::Lebesgue,
            DevEnsemble::Periodic,
            DevEnsemble::Preimage,
            DevEnsemble::GibbsMeasure,
        ] {
            let r = deviation_rate_constrained(
                &shift,
                &potential,
                &observable,
                Some(&model),
                ens,
                Side::AtLeast,
                alpha,
                n,
                None,
                32,
            )
            .expect("deviation rate");
            row.push(r.value);
        }
        println!(
            "{:>4} {:>14.8} {:>14.8} {:>14.8} {:>14.8}",
            n, row[0], row[1], row[2], row[3]
        );
    }
    println!("\nthe spread shrinks as n grows; the common limit is -I(0.9).");
}
