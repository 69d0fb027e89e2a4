//! Trains a policy on the pointer task, saves and reloads the bundle, and
//! traces a few test classifications.
//!
//!     cargo run --release --example train_policy -- [budget] [seed]

use glimpse::experiments::evaluate;
use glimpse::inference::classify_traced;
use glimpse::{generate_pointer_task, learn_full_policy, load_bundle, save_bundle, PointerTaskSpec, TrainingPlan};

fn main() -> glimpse::Result<()> {
    let mut args = std::env::args().skip(1);
    let budget: usize = args.next().map(|s| s.parse().expect("budget")).unwrap_or(3);
    let seed: u64 = args.next().map(|s| s.parse().expect("seed")).unwrap_or(0);

    let spec = PointerTaskSpec {
        seed,
        ..PointerTaskSpec::default()
    };
    let (train, test) = generate_pointer_task(&spec)?;
    let plan = TrainingPlan::new(budget, spec.rows, spec.cols, seed);
    let (bundle, log) = learn_full_policy(&train, &plan)?;
    print!("{log}");

    let path = std::env::temp_dir().join(format!("glimpse_b{budget}_s{seed}.json"));
    save_bundle(&bundle, &path)?;
    let bundle = load_bundle(&path)?;
    println!("bundle saved to {}", path.display());

    println!("pointer {} targets {:?}", spec.pointer()?, spec.target_regions()?);
    for (img, label) in test.items().iter().take(4) {
        let r = classify_traced(img, &bundle)?;
        println!("true {label} predicted {} via {:?} ({} descriptors)", r.class, &r.trajectory[..], r.phi_calls);
    }
    println!("test accuracy {:.3}", evaluate(&bundle, &test)?.accuracy());
    Ok(())
}
