//! Learned exploration versus uniformly drawn regions across budgets on the
//! synthetic pointer task.
//!
//!     cargo run --release --example budget_sweep -- [seed] [budgets...]

use std::time::Instant;

use glimpse::experiments::{sweep, SweepConfig};
use glimpse::{generate_pointer_task, PointerTaskSpec, TrainingPlan};

fn main() -> glimpse::Result<()> {
    let mut args = std::env::args().skip(1);
    let seed: u64 = args.next().map(|s| s.parse().expect("seed")).unwrap_or(0);
    let mut budgets: Vec<usize> = args.map(|s| s.parse().expect("budget")).collect();
    if budgets.is_empty() {
        budgets = vec![1, 2, 3, 4, 6, 8, 12, 16];
    }

    let spec = PointerTaskSpec {
        seed,
        ..PointerTaskSpec::default()
    };
    let (train, test) = generate_pointer_task(&spec)?;
    println!(
        "pointer task: {} train / {} test, targets {:?}",
        train.len(),
        test.len(),
        spec.target_regions()?
    );

    let plan = TrainingPlan::new(1, spec.rows, spec.cols, seed);
    let config = SweepConfig {
        budgets,
        trials: 5,
        repeats: 1,
    };
    let t0 = Instant::now();
    let report = sweep(&train, &test, &plan, &config)?;
    report.write_csv(std::io::stdout().lock(), true)?;
    eprintln!("sweep took {:.1?}", t0.elapsed());
    Ok(())
}
