//! Excursion schedules. Pick thresholds N_0 < N_1 < ... so that the tail
//! mass above N_j is at most theta^(j+1); then the chance that a length-n
//! prefix contains m positions from which the trajectory out-runs every
//! threshold decays like (4 theta)^m, uniformly in where those positions
//! sit. The exact distribution of that count, computed by dynamic
//! programming, sits far below the geometric envelope.

use thermoshift::{build_schedule, check_expo_bound, visit_distribution, GibbsModel};

fn main() {
    let model = GibbsModel::geometric(0.5, 0.5).expect("model");
    let n = 12;

    for theta in [0.2, 0.05] {
        let schedule = build_schedule(&model, theta, 6, 1.0).expect("schedule");
        println!("theta = {}: levels = {:?}", theta, schedule.levels);

        let dist = visit_distribution(&model, &schedule, n).expect("distribution");
        let check = check_expo_bound(&dist.probabilities, theta, n).expect("bound");
        println!(
            "{:>3} {:>14} {:>14} {:>9}",
            "m", "P(count = m)", "envelope", "margin"
        );
        for m in 0..=n.min(6) {
            println!(
                "{:>3} {:>14.6e} {:>14.6e} {:>9.1e}",
                m, dist.probabilities[m], check.bounds[m], check.margins[m]
            );
        }
        match check.informative_from {
            Some(m) => println!("envelope dips below 1 from m = {}", m),
            None => println!("envelope stays above 1 out to m = {}", n),
        }
        println!("pass = {}\n", check.pass);
    }
}
