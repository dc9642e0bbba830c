//! Rate function for the frequency of a symbol under a Bernoulli measure,
//! checked against the closed-form relative entropy
//! I(a) = a ln(a/p) + (1-a) ln((1-a)/(1-p)).

use thermoshift::{free_energy, rate_legendre, Observable, Potential, PressureMethod, ShiftSpec};

fn main() {
    let p = 0.3;
    let shift = ShiftSpec::full(2).expect("shift");
    let potential = Potential::bernoulli(&[p, 1.0 - p]).expect("weights");
    let observable = Observable::indicator(0);

    let betas: Vec<f64> = (-24..=24).map(|i| i as f64 / 4.0).collect();
    let method = PressureMethod::BlockMatrix {
        iters: 120,
        tolerance: 1e-12,
    };
    let mut fe = free_energy(&shift, &potential, &observable, &betas, method).expect("free energy");

    println!(
        "mean frequency (Lambda'(0)) = {:.6}",
        fe.slope_at_zero(1e-3).expect("slope")
    );

    let alphas: Vec<f64> = (1..=19).map(|i| i as f64 / 20.0).collect();
    let curve = rate_legendre(&mut fe, &alphas).expect("legendre");
    let check = curve.check_properties();
    println!(
        "curve checks: nonnegative={} convex={}",
        check.nonnegative, check.convex
    );
    println!(
        "{:>6} {:>14} {:>14} {:>10}",
        "alpha", "I(alpha)", "closed form", "diff"
    );
    for pt in &curve.points {
        let a = pt.alpha;
        let exact = a * (a / p).ln() + (1.0 - a) * ((1.0 - a) / (1.0 - p)).ln();
        println!(
            "{:>6.2} {:>14.10} {:>14.10} {:>10.2e}",
            a,
            pt.rate,
            exact,
            (pt.rate - exact).abs()
        );
    }
}
