//! Rough per-formula timing for the satisfiability workload.
//!
//! Run with `cargo run -p sharegraph --example profile_fsat` to see how much
//! exploration each formula costs under the eager-contraction search.

use std::time::Instant;

use sharegraph::{compute, load_rsat, Cnf, Parallelism};

fn main() {
    let spec = load_rsat();
    let cases: Vec<(&str, Vec<Vec<i32>>)> = vec![
        ("unit", vec![vec![1]]),
        ("contradiction", vec![vec![1], vec![-1]]),
        ("chain", vec![vec![1, -2], vec![2]]),
        ("triangle", vec![vec![1, 2], vec![-1, 3], vec![-2, -3]]),
        ("tautologies", vec![vec![1, -1], vec![2, -2], vec![3, -3]]),
    ];

    for (name, clauses) in cases {
        let cnf = Cnf::new(3, clauses).expect("well-formed clause set");
        let start = Instant::now();
        let outcome = compute(&spec, &cnf.to_term(), Parallelism::Sequential)
            .expect("computation finished");
        let elapsed = start.elapsed();
        println!(
            "{:>12}: {:>8.1} ms  states={:<6} fused={:<6} accepted={:<3} stuck={}",
            name,
            elapsed.as_secs_f64() * 1e3,
            outcome.states_expanded,
            outcome.fused_steps,
            outcome.accepted.len(),
            outcome.stuck.len(),
        );
    }
}
