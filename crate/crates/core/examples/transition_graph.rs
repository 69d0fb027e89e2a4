//! Which regions a trained policy visits, and in what order.
//!
//!     cargo run --release --example transition_graph -- [budget]

use glimpse::experiments::trajectories;
use glimpse::{generate_pointer_task, learn_full_policy, PointerTaskSpec, TrainingPlan};

fn main() -> glimpse::Result<()> {
    let budget: usize = std::env::args().nth(1).map(|s| s.parse().expect("budget")).unwrap_or(3);
    let spec = PointerTaskSpec::default();
    let (train, test) = generate_pointer_task(&spec)?;
    let (bundle, _) = learn_full_policy(&train, &TrainingPlan::new(budget, spec.rows, spec.cols, 0))?;

    let graph = trajectories(&bundle, &test)?;
    println!("targets {:?}", spec.target_regions()?);
    println!("{} trajectories, {} transitions", graph.n_trajectories, graph.total_transitions());
    for (i, row) in graph.counts.iter().enumerate() {
        for (j, &c) in row.iter().enumerate().filter(|(_, &c)| c > 0) {
            println!("  {i:2} -> {j:2}: {c}");
        }
    }
    graph.write_step_frequencies_csv(std::io::stdout().lock())
}
