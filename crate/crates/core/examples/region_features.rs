//! Region grid, per-region histograms and the position-preserving aggregate.
//!
//!     cargo run --example region_features

use glimpse::features::{aggregate, decompose, phi, FeatureSession};
use glimpse::{FeatureExtractor, Image};

fn main() -> glimpse::Result<()> {
    // 10x7 so the last row and column absorb the remainder
    let image = Image::from_fn(10, 7, |x, y| ((x * 25 + y * 9) % 256) as u8)?;
    let grid = decompose(&image, 3, 3)?;
    for r in 0..grid.len() {
        let b = grid.bounds(r)?;
        println!("region {r}: x {}..{} y {}..{} ({} px)", b.x0, b.x1, b.y0, b.y1, b.area());
    }

    let ex = FeatureExtractor::histogram(4)?;
    let ramp = Image::from_fn(4, 4, |x, y| (y * 4 + x) as u8)?;
    let one = decompose(&ramp, 1, 1)?;
    println!("ramp 0..15, K=4: {:?}", phi(&ramp, &one, 0, &ex)?.values());

    let picked = [4, 0, 8];
    let feats: Vec<_> = picked
        .iter()
        .map(|&r| Ok((r, phi(&image, &grid, r, &ex)?)))
        .collect::<glimpse::Result<_>>()?;
    let agg = aggregate(&feats, ex.k(), grid.len())?;
    for r in 0..grid.len() {
        println!("block {r}: {:?}", agg.block(r));
    }

    let mut session = FeatureSession::new(&image, &grid, &ex)?;
    let again = session.aggregate(&[8, 4, 0])?;
    session.aggregate(&[0, 4])?;
    println!("order-independent: {}", again == agg);
    println!("descriptors computed: {}", session.phi_calls());
    Ok(())
}
