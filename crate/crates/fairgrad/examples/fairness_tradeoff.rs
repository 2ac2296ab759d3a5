//! Runs the two-task toy landscape from one start under three fairness
//! levels and prints the final losses, showing how larger `alpha` trades
//! total progress for balance between the tasks.
//!
//! ```text
//! cargo run --example fairness_tradeoff
//! ```

use fairgrad::optimizer::run;
use fairgrad::toybench::{toy_start, ToyProblem};
use fairgrad::types::{ExperimentConfig, StepRule};

fn main() {
    let start = toy_start("p1").expect("known start name");
    println!("start: ({:.1}, {:.1})", start[0], start[1]);
    println!("{:>6} {:>12} {:>12} {:>12}", "alpha", "l1", "l2", "l1 + l2");

    for alpha in [0.0, 1.0, 10.0] {
        let config = ExperimentConfig {
            alpha,
            step_rule: StepRule::AdaptiveMoment,
            learning_rate: 1e-3,
            max_steps: 200_000,
            stationarity_tol: 1e-3,
            initial_point: Some(start.iter().copied().collect()),
            ..Default::default()
        };
        let result = run(&ToyProblem, &config).expect("toy run");
        let l = &result.final_losses;
        println!(
            "{:>6} {:>12.6} {:>12.6} {:>12.6}   ({}, {} steps)",
            alpha,
            l[0],
            l[1],
            l[0] + l[1],
            result.termination,
            result.steps
        );
    }
}
