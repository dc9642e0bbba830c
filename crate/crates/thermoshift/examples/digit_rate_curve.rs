//! Large-deviation rate curve for the frequency of digit 1 in continued
//! fraction expansions. The Gauss measure gives digit k probability
//! log2(1 + 1/(k(k+2))), so the curve's zero sits at log2(4/3) = 0.415...
//!
//! The free energy here is the pressure of -2 ln|x'| + beta 1_{[digit=1]},
//! computed with the tail-extended collocation operator so that the
//! truncation error stays far below the Legendre search resolution.

use thermoshift::{free_energy, rate_legendre, Observable, Potential, PressureMethod, ShiftSpec};

fn main() {
    let shift = ShiftSpec::full(64).expect("shift");
    let potential = Potential::gauss_log();
    let observable = Observable::indicator_digit(1).expect("digit observable");

    let betas: Vec<f64> = (-12..=12).map(|i| i as f64 / 4.0).collect();
    let method = PressureMethod::TransferExtended {
        degree: 40,
        extra: 400,
        iters: 60,
        tolerance: 1e-10,
    };
    let mut fe = free_energy(&shift, &potential, &observable, &betas, method).expect("free energy");

    let mean = fe.slope_at_zero(1e-3).expect("slope");
    let exact_mean = (4.0_f64 / 3.0).log2();
    println!(
        "digit-1 frequency: Lambda'(0) = {:.8}, Gauss law log2(4/3) = {:.8}",
        mean, exact_mean
    );

    let alphas = [0.05, 0.2, 0.415, 0.6, 0.8, 0.95];
    let curve = rate_legendre(&mut fe, &alphas).expect("legendre");
    println!("\n{:>6} {:>12} {:>12}", "alpha", "I(alpha)", "beta*");
    for pt in &curve.points {
        println!("{:>6.3} {:>12.8} {:>12.6}", pt.alpha, pt.rate, pt.beta_star);
    }
    let check = curve.check_properties();
    println!(
        "\nnonnegative={} convex={} min rate={:.2e}",
        check.nonnegative, check.convex, check.min_rate
    );
}
