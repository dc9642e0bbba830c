//! Certify numerically that the Gauss measure is Gibbs for -2 ln|x'| with
//! pressure zero: find the smallest sandwich constant c0 with
//!
//!     c0^-1 <= mu[w] / exp(S_n phi) <= c0   over all cylinders w,
//!
//! then confirm bounded distortion with the same constant and exhibit a
//! mixing witness word.

use thermoshift::{
    check_distortion, check_mixing_constant, estimate_gibbs_constant, GibbsModel, Potential,
    ShiftSpec,
};

fn main() {
    let shift = ShiftSpec::full(8).expect("shift");
    let model = GibbsModel::gauss();
    let potential = Potential::gauss_log();

    let report = estimate_gibbs_constant(&shift, &model, &potential, 0.0, 6, 20_000_000)
        .expect("gibbs constant");
    println!("c0 by depth: {:?}", report.c0_by_depth);
    println!(
        "c0 = {:.6} after {} words (converged: {})",
        report.c0, report.words_checked, !report.suspect_nonconvergent
    );

    let distortion =
        check_distortion(&shift, &model, 6, report.c0, 20_000_000).expect("distortion");
    println!(
        "distortion over {} concatenation pairs: ratios in [{:.4}, {:.4}], {} violations",
        distortion.pairs_checked, distortion.min_ratio, distortion.max_ratio, distortion.violations
    );

    let witness = shift.witness(2).expect("witness");
    let mixing =
        check_mixing_constant(&shift, &model, &witness, 3, 1e-3, 20_000_000).expect("mixing");
    println!(
        "mixing over {} word pairs: min bridged mass ratio {:.4e}, violations below {:.0e}: {}",
        mixing.pairs_checked, mixing.min_ratio, mixing.claimed_lower, mixing.violations
    );
}
