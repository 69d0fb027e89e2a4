//! Region grids, per-region descriptors and the position-preserving aggregate.
//!
//! An image is cut into an `rows x cols` grid whose regions are indexed
//! row-major from 0. Each region is described by a length-`K` vector; a set of
//! acquired regions is represented by a `K * rows * cols` vector in which
//! region `i` owns the block `[i*K, (i+1)*K)` and unacquired blocks stay zero.

use std::collections::BTreeSet;

use rand::seq::index;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};
use crate::image::Image;

/// Maximum number of Lloyd iterations in [`build_codebook`].
pub const KMEANS_MAX_ITERS: usize = 25;

/// Pixel window `[x0, x1) x [y0, y1)` of one region.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct RegionBounds {
    pub x0: usize,
    pub y0: usize,
    pub x1: usize,
    pub y1: usize,
}

impl RegionBounds {
    pub fn width(&self) -> usize {
        self.x1 - self.x0
    }

    pub fn height(&self) -> usize {
        self.y1 - self.y0
    }

    pub fn area(&self) -> usize {
        self.width() * self.height()
    }
}

/// Fixed `rows x cols` tiling of a `width x height` image.
///
/// Every region is `width / cols` pixels wide except the last column, which
/// also absorbs the remainder; rows are handled the same way.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct RegionGrid {
    rows: usize,
    cols: usize,
    width: usize,
    height: usize,
}

impl RegionGrid {
    pub fn new(width: usize, height: usize, rows: usize, cols: usize) -> Result<Self> {
        if rows == 0 || cols == 0 || width < cols || height < rows {
            return Err(Error::DimensionTooSmall {
                width,
                height,
                rows,
                cols,
            });
        }
        Ok(RegionGrid {
            rows,
            cols,
            width,
            height,
        })
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn height(&self) -> usize {
        self.height
    }

    /// Number of regions, `rows * cols`.
    pub fn len(&self) -> usize {
        self.rows * self.cols
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn row_col(&self, index: usize) -> (usize, usize) {
        (index / self.cols, index % self.cols)
    }

    pub fn index(&self, row: usize, col: usize) -> usize {
        row * self.cols + col
    }

    /// The cell `((rows-1)/2, (cols-1)/2)`, used as the first acquired region.
    pub fn center_region(&self) -> usize {
        self.index((self.rows - 1) / 2, (self.cols - 1) / 2)
    }

    pub fn bounds(&self, index: usize) -> Result<RegionBounds> {
        self.check_index(index)?;
        let (row, col) = self.row_col(index);
        let (x0, x1) = span(self.width, self.cols, col);
        let (y0, y1) = span(self.height, self.rows, row);
        Ok(RegionBounds { x0, y0, x1, y1 })
    }

    pub fn check_index(&self, index: usize) -> Result<()> {
        if index >= self.len() {
            return Err(Error::RegionOutOfRange {
                index,
                count: self.len(),
            });
        }
        Ok(())
    }

    pub fn fits(&self, image: &Image) -> bool {
        image.width() == self.width && image.height() == self.height
    }
}

fn span(extent: usize, parts: usize, i: usize) -> (usize, usize) {
    let step = extent / parts;
    let start = i * step;
    let end = if i + 1 == parts { extent } else { start + step };
    (start, end)
}

/// Builds the `rows x cols` grid for `image`.
pub fn decompose(image: &Image, rows: usize, cols: usize) -> Result<RegionGrid> {
    RegionGrid::new(image.width(), image.height(), rows, cols)
}

/// Descriptor of a single region.
#[derive(Debug, Clone, PartialEq)]
pub struct FeatureVector(Vec<f64>);

impl FeatureVector {
    pub fn new(values: Vec<f64>) -> Self {
        FeatureVector(values)
    }

    pub fn zeros(k: usize) -> Self {
        FeatureVector(vec![0.0; k])
    }

    pub fn values(&self) -> &[f64] {
        &self.0
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }
}

/// Concatenation of per-region blocks, zero outside acquired regions.
#[derive(Debug, Clone, PartialEq)]
pub struct AggregatedFeatures {
    values: Vec<f64>,
    block: usize,
}

impl AggregatedFeatures {
    pub fn zeros(k: usize, grid_size: usize) -> Self {
        AggregatedFeatures {
            values: vec![0.0; k * grid_size],
            block: k,
        }
    }

    pub fn from_values(values: Vec<f64>, k: usize) -> Result<Self> {
        if k == 0 || !values.len().is_multiple_of(k) {
            return Err(Error::InvalidParameter(format!(
                "length {} is not a multiple of block size {k}",
                values.len()
            )));
        }
        Ok(AggregatedFeatures { values, block: k })
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn block_size(&self) -> usize {
        self.block
    }

    pub fn grid_size(&self) -> usize {
        self.values.len() / self.block
    }

    pub fn block(&self, region: usize) -> &[f64] {
        &self.values[region * self.block..(region + 1) * self.block]
    }

    /// Adds `feature` into the block of `region`.
    pub fn add_region(&mut self, region: usize, feature: &FeatureVector) -> Result<()> {
        if region >= self.grid_size() {
            return Err(Error::RegionOutOfRange {
                index: region,
                count: self.grid_size(),
            });
        }
        if feature.len() != self.block {
            return Err(Error::DimensionMismatch {
                expected: self.block,
                actual: feature.len(),
            });
        }
        let dst = &mut self.values[region * self.block..(region + 1) * self.block];
        for (d, s) in dst.iter_mut().zip(feature.values()) {
            *d += *s;
        }
        Ok(())
    }
}

/// How a region's pixels become a length-`K` descriptor.
#[derive(Debug, Clone, PartialEq)]
pub enum FeatureExtractor {
    /// `bins`-bin intensity histogram, uniform right-open bins over `[0, 256)`.
    Histogram { bins: usize },
    /// Bag of words over non-overlapping `patch_size x patch_size` patches,
    /// hard-assigned to the nearest centroid.
    Codebook {
        patch_size: usize,
        centroids: Vec<Vec<f64>>,
    },
}

impl FeatureExtractor {
    pub fn histogram(bins: usize) -> Result<Self> {
        if bins < 2 {
            return Err(Error::InvalidParameter(format!(
                "histogram needs at least 2 bins, got {bins}"
            )));
        }
        Ok(FeatureExtractor::Histogram { bins })
    }

    pub fn codebook(patch_size: usize, centroids: Vec<Vec<f64>>) -> Result<Self> {
        if patch_size == 0 {
            return Err(Error::InvalidParameter("patch size must be positive".into()));
        }
        if centroids.len() < 2 {
            return Err(Error::InvalidParameter(format!(
                "codebook needs at least 2 centroids, got {}",
                centroids.len()
            )));
        }
        let want = patch_size * patch_size;
        if let Some(bad) = centroids.iter().find(|c| c.len() != want) {
            return Err(Error::DimensionMismatch {
                expected: want,
                actual: bad.len(),
            });
        }
        if centroids.iter().flatten().any(|v| !v.is_finite()) {
            return Err(Error::InvalidParameter("non-finite centroid".into()));
        }
        Ok(FeatureExtractor::Codebook {
            patch_size,
            centroids,
        })
    }

    /// Descriptor length `K`.
    pub fn k(&self) -> usize {
        match self {
            FeatureExtractor::Histogram { bins } => *bins,
            FeatureExtractor::Codebook { centroids, .. } => centroids.len(),
        }
    }

    fn extract(&self, image: &Image, b: RegionBounds) -> FeatureVector {
        match self {
            FeatureExtractor::Histogram { bins } => {
                let mut counts = vec![0usize; *bins];
                for y in b.y0..b.y1 {
                    for &v in image.row_span(y, b.x0, b.x1) {
                        counts[v as usize * bins / 256] += 1;
                    }
                }
                normalize(counts, b.area())
            }
            FeatureExtractor::Codebook {
                patch_size,
                centroids,
            } => {
                let p = *patch_size;
                let mut counts = vec![0usize; centroids.len()];
                let mut patch = Vec::with_capacity(p * p);
                let mut total = 0;
                for py in (b.y0..).step_by(p).take_while(|y| y + p <= b.y1) {
                    for px in (b.x0..).step_by(p).take_while(|x| x + p <= b.x1) {
                        patch.clear();
                        for y in py..py + p {
                            patch.extend(image.row_span(y, px, px + p).iter().map(|&v| v as f64));
                        }
                        counts[nearest(&patch, centroids).0] += 1;
                        total += 1;
                    }
                }
                normalize(counts, total)
            }
        }
    }
}

fn normalize(counts: Vec<usize>, total: usize) -> FeatureVector {
    if total == 0 {
        return FeatureVector::zeros(counts.len());
    }
    let t = total as f64;
    FeatureVector(counts.into_iter().map(|c| c as f64 / t).collect())
}

fn squared_distance(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum()
}

/// Nearest centroid (lowest index on ties) and its squared distance.
fn nearest(point: &[f64], centroids: &[Vec<f64>]) -> (usize, f64) {
    let mut best = (0, f64::INFINITY);
    for (i, c) in centroids.iter().enumerate() {
        let d = squared_distance(point, c);
        if d < best.1 {
            best = (i, d);
        }
    }
    best
}

/// Descriptor of region `region` of `image`.
///
/// This is the only function that reads region pixels; [`FeatureSession`]
/// wraps it with a cache and a call counter.
pub fn phi(
    image: &Image,
    grid: &RegionGrid,
    region: usize,
    extractor: &FeatureExtractor,
) -> Result<FeatureVector> {
    if !grid.fits(image) {
        return Err(Error::Incompatible(format!(
            "grid laid out for {}x{} applied to a {}x{} image",
            grid.width(),
            grid.height(),
            image.width(),
            image.height()
        )));
    }
    let bounds = grid.bounds(region)?;
    Ok(extractor.extract(image, bounds))
}

/// Embeds `feature` into block `region` of a zero vector of `grid_size` blocks.
pub fn gamma(feature: &FeatureVector, region: usize, grid_size: usize) -> Result<AggregatedFeatures> {
    let mut out = AggregatedFeatures::zeros(feature.len(), grid_size);
    out.add_region(region, feature)?;
    Ok(out)
}

/// Sum of [`gamma`] over `features`, which must name distinct regions.
pub fn aggregate(
    features: &[(usize, FeatureVector)],
    k: usize,
    grid_size: usize,
) -> Result<AggregatedFeatures> {
    let mut seen = vec![false; grid_size];
    let mut out = AggregatedFeatures::zeros(k, grid_size);
    for (region, feature) in features {
        if *region >= grid_size {
            return Err(Error::RegionOutOfRange {
                index: *region,
                count: grid_size,
            });
        }
        if std::mem::replace(&mut seen[*region], true) {
            return Err(Error::DuplicateRegion(*region));
        }
        out.add_region(*region, feature)?;
    }
    Ok(out)
}

fn image_patches(images: &[Image], p: usize) -> Vec<Vec<u8>> {
    let mut out = Vec::new();
    for img in images {
        for py in (0..).step_by(p).take_while(|y| y + p <= img.height()) {
            for px in (0..).step_by(p).take_while(|x| x + p <= img.width()) {
                let mut patch = Vec::with_capacity(p * p);
                for y in py..py + p {
                    patch.extend_from_slice(img.row_span(y, px, px + p));
                }
                out.push(patch);
            }
        }
    }
    out
}

/// Learns a `k`-word patch codebook with seeded k-means.
///
/// Centroids start at `k` distinct patches drawn with `seed`; clusters that
/// empty out are reseeded to the point farthest from its current centroid.
pub fn build_codebook(
    images: &[Image],
    patch_size: usize,
    k: usize,
    seed: u64,
) -> Result<FeatureExtractor> {
    if k < 2 {
        return Err(Error::InvalidParameter(format!(
            "codebook needs at least 2 words, got {k}"
        )));
    }
    if patch_size == 0 {
        return Err(Error::InvalidParameter("patch size must be positive".into()));
    }
    let raw = image_patches(images, patch_size);
    let distinct: Vec<&Vec<u8>> = raw.iter().collect::<BTreeSet<_>>().into_iter().collect();
    if distinct.len() < k {
        return Err(Error::InsufficientPatches {
            needed: k,
            found: distinct.len(),
        });
    }

    let points: Vec<Vec<f64>> = raw
        .iter()
        .map(|p| p.iter().map(|&v| v as f64).collect())
        .collect();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut centroids: Vec<Vec<f64>> = index::sample(&mut rng, distinct.len(), k)
        .into_iter()
        .map(|i| distinct[i].iter().map(|&v| v as f64).collect())
        .collect();

    let dim = patch_size * patch_size;
    let mut assignment = vec![usize::MAX; points.len()];
    for _ in 0..KMEANS_MAX_ITERS {
        let mut changed = false;
        let mut dists = Vec::with_capacity(points.len());
        for (a, p) in assignment.iter_mut().zip(&points) {
            let (c, d) = nearest(p, &centroids);
            changed |= *a != c;
            *a = c;
            dists.push(d);
        }
        if !changed {
            break;
        }

        let mut sums = vec![vec![0.0; dim]; k];
        let mut counts = vec![0usize; k];
        for (&a, p) in assignment.iter().zip(&points) {
            counts[a] += 1;
            for (s, v) in sums[a].iter_mut().zip(p) {
                *s += v;
            }
        }
        let mut taken = vec![false; points.len()];
        for c in 0..k {
            if counts[c] > 0 {
                let n = counts[c] as f64;
                centroids[c] = sums[c].iter().map(|s| s / n).collect();
            } else {
                // farthest point not already used for a reseed, lowest index on ties
                let mut far: Option<usize> = None;
                for (i, &d) in dists.iter().enumerate() {
                    if !taken[i] && far.is_none_or(|f| d > dists[f]) {
                        far = Some(i);
                    }
                }
                if let Some(f) = far {
                    taken[f] = true;
                    dists[f] = 0.0;
                    centroids[c] = points[f].clone();
                }
            }
        }
    }
    FeatureExtractor::codebook(patch_size, centroids)
}

/// Lazily computed descriptors for one image.
///
/// Each region is extracted at most once; `phi_calls` counts extractions.
/// A session is meant for one thread of control at a time.
#[derive(Debug)]
pub struct FeatureSession<'a> {
    image: &'a Image,
    grid: &'a RegionGrid,
    extractor: &'a FeatureExtractor,
    cache: Vec<Option<FeatureVector>>,
    phi_calls: usize,
}

impl<'a> FeatureSession<'a> {
    pub fn new(image: &'a Image, grid: &'a RegionGrid, extractor: &'a FeatureExtractor) -> Result<Self> {
        if !grid.fits(image) {
            return Err(Error::Incompatible(format!(
                "image is {}x{} but the grid expects {}x{}",
                image.width(),
                image.height(),
                grid.width(),
                grid.height()
            )));
        }
        Ok(FeatureSession {
            image,
            grid,
            extractor,
            cache: vec![None; grid.len()],
            phi_calls: 0,
        })
    }

    pub fn grid(&self) -> &RegionGrid {
        self.grid
    }

    pub fn k(&self) -> usize {
        self.extractor.k()
    }

    pub fn phi_calls(&self) -> usize {
        self.phi_calls
    }

    pub fn feature(&mut self, region: usize) -> Result<&FeatureVector> {
        self.grid.check_index(region)?;
        if self.cache[region].is_none() {
            let f = phi(self.image, self.grid, region, self.extractor)?;
            self.phi_calls += 1;
            self.cache[region] = Some(f);
        }
        Ok(self.cache[region].as_ref().expect("filled above"))
    }

    /// Aggregate over `trajectory`, extracting any missing regions.
    pub fn aggregate(&mut self, trajectory: &[usize]) -> Result<AggregatedFeatures> {
        let mut seen = vec![false; self.grid.len()];
        let mut out = AggregatedFeatures::zeros(self.k(), self.grid.len());
        for &r in trajectory {
            self.grid.check_index(r)?;
            if std::mem::replace(&mut seen[r], true) {
                return Err(Error::DuplicateRegion(r));
            }
            let f = self.feature(r)?;
            out.add_region(r, f)?;
        }
        Ok(out)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn decompose_exact_division() {
        let img = Image::filled(8, 8, 0).unwrap();
        let grid = decompose(&img, 4, 4).unwrap();
        assert_eq!(grid.len(), 16);
        for i in 0..16 {
            let b = grid.bounds(i).unwrap();
            assert_eq!((b.width(), b.height()), (2, 2));
        }
    }

    #[test]
    fn decompose_remainder_goes_to_last_column() {
        let img = Image::filled(9, 8, 0).unwrap();
        let grid = decompose(&img, 4, 4).unwrap();
        let widths: Vec<_> = (0..4).map(|c| grid.bounds(c).unwrap().width()).collect();
        assert_eq!(widths, vec![2, 2, 2, 3]);
    }

    #[test]
    fn decompose_too_small() {
        let img = Image::filled(3, 3, 0).unwrap();
        assert!(matches!(
            decompose(&img, 4, 4),
            Err(Error::DimensionTooSmall { .. })
        ));
    }

    #[test]
    fn regions_tile_the_image() {
        for (w, h, r, c) in [(9, 8, 4, 4), (13, 7, 3, 5), (5, 5, 5, 5), (31, 17, 4, 3)] {
            let grid = RegionGrid::new(w, h, r, c).unwrap();
            let mut cover = vec![0u8; w * h];
            for i in 0..grid.len() {
                let b = grid.bounds(i).unwrap();
                assert!(b.area() > 0);
                assert_eq!(grid.index(grid.row_col(i).0, grid.row_col(i).1), i);
                for y in b.y0..b.y1 {
                    for x in b.x0..b.x1 {
                        cover[y * w + x] += 1;
                    }
                }
            }
            assert!(cover.iter().all(|&c| c == 1));
        }
    }

    #[test]
    fn center_of_four_by_four() {
        let grid = RegionGrid::new(16, 16, 4, 4).unwrap();
        assert_eq!(grid.center_region(), 5);
        assert_eq!(RegionGrid::new(9, 9, 3, 3).unwrap().center_region(), 4);
    }

    #[test]
    fn phi_histogram_examples() {
        let ex = FeatureExtractor::histogram(4).unwrap();
        let zeros = Image::filled(4, 4, 0).unwrap();
        let grid = decompose(&zeros, 1, 1).unwrap();
        assert_eq!(phi(&zeros, &grid, 0, &ex).unwrap().values(), &[1.0, 0.0, 0.0, 0.0]);

        let half = Image::from_fn(4, 4, |x, _| if x < 2 { 0 } else { 255 }).unwrap();
        let ex2 = FeatureExtractor::histogram(2).unwrap();
        assert_eq!(phi(&half, &grid, 0, &ex2).unwrap().values(), &[0.5, 0.5]);

        // intensities 0..15 all fall below the first edge at 64
        let ramp = Image::from_fn(4, 4, |x, y| (y * 4 + x) as u8).unwrap();
        assert_eq!(phi(&ramp, &grid, 0, &ex).unwrap().values(), &[1.0, 0.0, 0.0, 0.0]);
    }

    #[test]
    fn phi_bin_edges_by_enumeration() {
        // every intensity lands in the bin whose [lo, hi) real interval contains it
        for k in [2usize, 3, 4, 7, 16, 256] {
            let ex = FeatureExtractor::histogram(k).unwrap();
            for v in 0..=255u8 {
                let img = Image::filled(1, 1, v).unwrap();
                let grid = decompose(&img, 1, 1).unwrap();
                let f = phi(&img, &grid, 0, &ex).unwrap();
                let expect = (0..k)
                    .find(|&b| {
                        let lo = b as f64 * 256.0 / k as f64;
                        let hi = (b + 1) as f64 * 256.0 / k as f64;
                        lo <= v as f64 && (v as f64) < hi
                    })
                    .unwrap();
                assert_eq!(f.values()[expect], 1.0, "k={k} v={v}");
            }
        }
    }

    #[test]
    fn phi_index_out_of_range() {
        let img = Image::filled(4, 4, 0).unwrap();
        let grid = decompose(&img, 2, 2).unwrap();
        let ex = FeatureExtractor::histogram(4).unwrap();
        assert!(matches!(
            phi(&img, &grid, 4, &ex),
            Err(Error::RegionOutOfRange { index: 4, count: 4 })
        ));
    }

    #[test]
    fn gamma_examples() {
        let f = FeatureVector::new(vec![0.5, 0.5]);
        assert_eq!(
            gamma(&f, 1, 4).unwrap().values(),
            &[0.0, 0.0, 0.5, 0.5, 0.0, 0.0, 0.0, 0.0]
        );
        let g = FeatureVector::new(vec![1.0, 0.0]);
        assert_eq!(
            gamma(&g, 0, 4).unwrap().values(),
            &[1.0, 0.0, 0.0, 0.0, 0.0, 0.0, 0.0, 0.0]
        );
        let z = FeatureVector::zeros(3);
        assert!(gamma(&z, 2, 3).unwrap().values().iter().all(|&v| v == 0.0));
        assert!(gamma(&z, 3, 3).is_err());
    }

    #[test]
    fn aggregate_examples() {
        assert!(aggregate(&[], 2, 4).unwrap().values().iter().all(|&v| v == 0.0));
        let list = vec![
            (0, FeatureVector::new(vec![1.0, 0.0])),
            (2, FeatureVector::new(vec![0.0, 1.0])),
        ];
        let a = aggregate(&list, 2, 4).unwrap();
        assert_eq!(a.values(), &[1.0, 0.0, 0.0, 0.0, 0.0, 1.0, 0.0, 0.0]);
        let rev: Vec<_> = list.iter().rev().cloned().collect();
        assert_eq!(aggregate(&rev, 2, 4).unwrap(), a);
        let dup = vec![list[0].clone(), list[0].clone()];
        assert!(matches!(aggregate(&dup, 2, 4), Err(Error::DuplicateRegion(0))));
    }

    #[test]
    fn codebook_two_constant_images() {
        let imgs = vec![Image::filled(4, 4, 0).unwrap(), Image::filled(4, 4, 255).unwrap()];
        let ex = build_codebook(&imgs, 2, 2, 7).unwrap();
        let FeatureExtractor::Codebook { centroids, .. } = &ex else {
            panic!("expected codebook");
        };
        let mut got = centroids.clone();
        got.sort_by(|a, b| a[0].partial_cmp(&b[0]).unwrap());
        assert_eq!(got, vec![vec![0.0; 4], vec![255.0; 4]]);

        let again = build_codebook(&imgs, 2, 2, 7).unwrap();
        assert_eq!(ex, again);
    }

    #[test]
    fn codebook_errors() {
        let imgs = vec![Image::filled(4, 4, 0).unwrap()];
        assert!(build_codebook(&imgs, 2, 1, 0).is_err());
        assert!(matches!(
            build_codebook(&imgs, 2, 2, 0),
            Err(Error::InsufficientPatches { needed: 2, found: 1 })
        ));
    }

    #[test]
    fn codebook_phi_assigns_patches() {
        let img = Image::from_fn(4, 4, |x, _| if x < 2 { 0 } else { 255 }).unwrap();
        let ex = FeatureExtractor::codebook(2, vec![vec![0.0; 4], vec![250.0; 4]]).unwrap();
        let grid = decompose(&img, 1, 1).unwrap();
        assert_eq!(phi(&img, &grid, 0, &ex).unwrap().values(), &[0.5, 0.5]);
    }

    #[test]
    fn codebook_with_empty_cluster_reseeds() {
        // three tight groups, four words: one word must be reseeded and still finite
        let imgs: Vec<Image> = [0u8, 1, 128, 255]
            .iter()
            .map(|&v| Image::filled(4, 4, v).unwrap())
            .collect();
        let ex = build_codebook(&imgs, 2, 4, 3).unwrap();
        assert_eq!(ex.k(), 4);
    }

    #[test]
    fn session_counts_and_caches() {
        let img = Image::from_fn(8, 8, |x, y| (x * 31 + y * 17) as u8).unwrap();
        let grid = decompose(&img, 2, 2).unwrap();
        let ex = FeatureExtractor::histogram(4).unwrap();
        let mut s = FeatureSession::new(&img, &grid, &ex).unwrap();
        let a = s.aggregate(&[3, 1]).unwrap();
        assert_eq!(s.phi_calls(), 2);
        let b = s.aggregate(&[1, 3, 0]).unwrap();
        assert_eq!(s.phi_calls(), 3);
        assert_eq!(a.block(3), b.block(3));
        assert!(s.aggregate(&[1, 1]).is_err());
    }
}
