//! Learns a patch codebook with k-means and describes regions by word counts.
//!
//!     cargo run --release --example codebook -- [words] [patch_size]

use glimpse::features::{build_codebook, decompose, phi};
use glimpse::{generate_pointer_task, FeatureExtractor, PointerTaskSpec};

fn main() -> glimpse::Result<()> {
    let mut args = std::env::args().skip(1);
    let words: usize = args.next().map(|s| s.parse().expect("words")).unwrap_or(8);
    let patch: usize = args.next().map(|s| s.parse().expect("patch size")).unwrap_or(4);

    let (train, _) = generate_pointer_task(&PointerTaskSpec::default())?;
    let images: Vec<_> = train.items().iter().map(|(img, _)| img.clone()).collect();
    let ex = build_codebook(&images, patch, words, 0)?;
    if let FeatureExtractor::Codebook { centroids, .. } = &ex {
        for (i, c) in centroids.iter().enumerate() {
            let mean = c.iter().sum::<f64>() / c.len() as f64;
            println!("word {i}: mean intensity {mean:.1}");
        }
    }

    let (img, label) = &train.items()[0];
    let grid = decompose(img, 4, 4)?;
    println!("image 0 (class {label}):");
    for r in 0..grid.len() {
        let v = phi(img, &grid, r, &ex)?;
        let fmt: Vec<String> = v.values().iter().map(|x| format!("{x:.2}")).collect();
        println!("  region {r:2}: [{}]", fmt.join(" "));
    }
    Ok(())
}
