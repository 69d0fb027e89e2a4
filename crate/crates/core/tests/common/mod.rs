#![allow(dead_code)]

use glimpse::{FeatureExtractor, Image, LinearModel, PointerTaskSpec, PolicyBundle};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

pub fn random_image(rng: &mut impl Rng, width: usize, height: usize) -> Image {
    let pixels = (0..width * height).map(|_| rng.random::<u8>()).collect();
    Image::new(width, height, pixels).unwrap()
}

pub fn random_model(rng: &mut impl Rng, n_outputs: usize, dim: usize) -> LinearModel {
    let w = (0..n_outputs * (dim + 1)).map(|_| rng.random_range(-1.0..1.0)).collect();
    LinearModel::new(n_outputs, dim, w).unwrap()
}

/// Histogram bundle with uniform random weights.
pub fn random_bundle(rng: &mut impl Rng, rows: usize, cols: usize, bins: usize, budget: usize, classes: usize) -> PolicyBundle {
    let n = rows * cols;
    let dim = bins * n;
    let f = random_model(rng, classes, dim);
    let pols = (1..budget).map(|_| random_model(rng, n, dim)).collect();
    let start = rng.random_range(0..n);
    let names = (0..classes).map(|c| format!("c{c}")).collect();
    PolicyBundle::new(f, pols, rows, cols, FeatureExtractor::histogram(bins).unwrap(), budget, start, names).unwrap()
}

/// Hand-coded budget-2 bundle for a pointer task: the policy reads the
/// pointer code and jumps to its target, the classifier reads the class
/// code wherever it sits outside the pointer region.
pub fn cheating_bundle(spec: &PointerTaskSpec, bins: usize) -> PolicyBundle {
    let n = spec.rows * spec.cols;
    let dim = bins * n;
    let pointer = spec.pointer().unwrap();
    let bin = |v: u8| v as usize * bins / 256;
    let mut policy = LinearModel::zeros(n, dim);
    for (code, &target) in spec.pointer_levels().iter().zip(&spec.target_regions().unwrap()) {
        policy.row_mut(target)[pointer * bins + bin(*code)] = 1.0;
    }
    let mut f = LinearModel::zeros(spec.n_classes, dim);
    for (c, &level) in spec.class_levels().iter().enumerate() {
        for r in (0..n).filter(|&r| r != pointer) {
            f.row_mut(c)[r * bins + bin(level)] = 1.0;
        }
    }
    PolicyBundle::new(
        f,
        vec![policy],
        spec.rows,
        spec.cols,
        FeatureExtractor::histogram(bins).unwrap(),
        2,
        pointer,
        spec.class_names(),
    )
    .unwrap()
}

// ---- independent oracles, written from the definitions only ----

/// Pixel rectangle of `region`, recomputed from the tiling rule.
pub fn oracle_bounds(width: usize, height: usize, rows: usize, cols: usize, region: usize) -> (usize, usize, usize, usize) {
    let (r, c) = (region / cols, region % cols);
    let (cw, ch) = (width / cols, height / rows);
    let x1 = if c + 1 == cols { width } else { (c + 1) * cw };
    let y1 = if r + 1 == rows { height } else { (r + 1) * ch };
    (c * cw, r * ch, x1, y1)
}

pub fn oracle_histogram(image: &Image, rows: usize, cols: usize, region: usize, bins: usize) -> Vec<f64> {
    let (x0, y0, x1, y1) = oracle_bounds(image.width(), image.height(), rows, cols, region);
    let mut h = vec![0.0; bins];
    for y in y0..y1 {
        for x in x0..x1 {
            let v = image.get(x, y) as usize;
            // bin b holds [b*256/K, (b+1)*256/K)
            let b = (0..bins).find(|&b| v * bins < (b + 1) * 256).unwrap();
            h[b] += 1.0;
        }
    }
    let total = ((x1 - x0) * (y1 - y0)) as f64;
    h.iter().map(|c| c / total).collect()
}

pub fn oracle_aggregate(image: &Image, rows: usize, cols: usize, bins: usize, trajectory: &[usize]) -> Vec<f64> {
    let mut out = vec![0.0; bins * rows * cols];
    for &r in trajectory {
        let h = oracle_histogram(image, rows, cols, r, bins);
        out[r * bins..(r + 1) * bins].copy_from_slice(&h);
    }
    out
}

pub fn oracle_scores(model: &LinearModel, x: &[f64]) -> Vec<f64> {
    let d = model.dim();
    (0..model.n_outputs())
        .map(|c| {
            let w = &model.weights()[c * (d + 1)..(c + 1) * (d + 1)];
            let mut s = 0.0;
            for i in 0..d {
                s += w[i] * x[i];
            }
            s + w[d]
        })
        .collect()
}

/// First index of the maximum among `allowed`.
pub fn oracle_argmax(scores: &[f64], allowed: impl Fn(usize) -> bool) -> usize {
    let mut best: Option<usize> = None;
    for i in 0..scores.len() {
        if allowed(i) && best.is_none_or(|b| scores[i] > scores[b]) {
            best = Some(i);
        }
    }
    best.unwrap()
}

/// Greedy extension of `prefix` with `policies`, then the classifier.
pub fn oracle_rollout(
    image: &Image,
    rows: usize,
    cols: usize,
    bins: usize,
    policies: &[LinearModel],
    classifier: &LinearModel,
    prefix: &[usize],
) -> (usize, Vec<usize>) {
    let mut traj = prefix.to_vec();
    for p in policies {
        let x = oracle_aggregate(image, rows, cols, bins, &traj);
        let s = oracle_scores(p, &x);
        let next = oracle_argmax(&s, |i| !traj.contains(&i));
        traj.push(next);
    }
    let x = oracle_aggregate(image, rows, cols, bins, &traj);
    (oracle_argmax(&oracle_scores(classifier, &x), |_| true), traj)
}

/// Budgeted classification re-derived step by step.
pub fn oracle_classify(image: &Image, bundle: &PolicyBundle) -> (usize, Vec<usize>) {
    let bins = bundle.extractor().k();
    oracle_rollout(
        image,
        bundle.rows(),
        bundle.cols(),
        bins,
        bundle.sub_policies(),
        bundle.f_theta(),
        &[bundle.start_region()],
    )
}

/// All `size`-subsets of `items`, in lexicographic order.
pub fn subsets(items: &[usize], size: usize) -> Vec<Vec<usize>> {
    if size == 0 {
        return vec![vec![]];
    }
    let mut out = Vec::new();
    for (i, &first) in items.iter().enumerate() {
        for mut rest in subsets(&items[i + 1..], size - 1) {
            rest.insert(0, first);
            out.push(rest);
        }
    }
    out
}
