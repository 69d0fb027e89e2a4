//! Generates the synthetic pointer task, writes it as PGM files plus
//! manifests and reads it back.
//!
//!     cargo run --example pointer_task -- <out_dir> [seed]

use glimpse::{generate_pointer_task, load_dataset, save_dataset, PointerTaskSpec};

fn main() -> glimpse::Result<()> {
    let mut args = std::env::args().skip(1);
    let dir = args.next().unwrap_or_else(|| "pointer_task".into());
    let seed: u64 = args.next().map(|s| s.parse().expect("seed")).unwrap_or(0);

    let spec = PointerTaskSpec {
        seed,
        ..PointerTaskSpec::default()
    };
    println!("pointer region {} codes {:?}", spec.pointer()?, spec.pointer_levels());
    println!("targets {:?}", spec.target_regions()?);
    println!("background {} class levels {:?}", spec.background_level(), spec.class_levels());

    let (train, test) = generate_pointer_task(&spec)?;
    let train_path = save_dataset(&train, &dir, "train")?;
    let test_path = save_dataset(&test, &dir, "test")?;
    let back = load_dataset(&train_path)?;
    println!(
        "{} -> {} images, identical: {}",
        train_path.display(),
        back.len(),
        back.items() == train.items()
    );
    println!("{} -> {} images", test_path.display(), load_dataset(&test_path)?.len());
    Ok(())
}
