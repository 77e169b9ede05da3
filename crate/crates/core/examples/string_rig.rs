//! Twist the preset Miura rig and print the fold angle it settles at.

use foldwright_core::presets::miura_string_rig;
use foldwright_core::string_sim::{default_twist_schedule, solve_quasi_static};

fn main() {
    let rig = miura_string_rig().expect("preset rig");
    let states = solve_quasi_static(&rig.pattern, &rig.plan, &rig.config, &default_twist_schedule(), rig.theta_max())
        .expect("simulation");
    println!("{:>5} {:>10} {:>10} {:>12}", "state", "twist", "fold_deg", "min_slack");
    for s in states.iter().step_by(36) {
        let slack = s.strings.iter().map(|x| x.slack).fold(f64::INFINITY, f64::min);
        println!("{:>5} {:>10.4} {:>10.3} {:>12.3e}", s.index, s.twist, s.fold_theta.to_degrees(), slack);
    }
}
