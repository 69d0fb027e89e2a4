//! Labeled datasets, tab-separated manifests and the synthetic pointer task.

use std::collections::BTreeSet;
use std::fs;
use std::path::{Path, PathBuf};

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};

use crate::error::{Error, Result};
use crate::features::RegionGrid;
use crate::image::Image;
use crate::seed::derive_seed;

#[derive(Debug, Clone, PartialEq)]
pub struct LabeledDataset {
    items: Vec<(Image, usize)>,
    class_names: Vec<String>,
}

impl LabeledDataset {
    pub fn new(items: Vec<(Image, usize)>, class_names: Vec<String>) -> Result<Self> {
        if items.is_empty() {
            return Err(Error::EmptyDataset("dataset has no items".into()));
        }
        if let Some((_, label)) = items.iter().find(|(_, l)| *l >= class_names.len()) {
            return Err(Error::LabelOutOfRange {
                label: *label,
                n_outputs: class_names.len(),
            });
        }
        Ok(LabeledDataset { items, class_names })
    }

    pub fn items(&self) -> &[(Image, usize)] {
        &self.items
    }

    pub fn len(&self) -> usize {
        self.items.len()
    }

    pub fn is_empty(&self) -> bool {
        self.items.is_empty()
    }

    pub fn class_names(&self) -> &[String] {
        &self.class_names
    }

    pub fn n_classes(&self) -> usize {
        self.class_names.len()
    }

    pub fn labels(&self) -> impl Iterator<Item = usize> + '_ {
        self.items.iter().map(|(_, l)| *l)
    }

    /// Items selected by `indices`, in that order, with the same class names.
    pub fn subset(&self, indices: &[usize]) -> Result<LabeledDataset> {
        let items = indices.iter().map(|&i| self.items[i].clone()).collect();
        LabeledDataset::new(items, self.class_names.clone())
    }

    /// Union of two datasets sharing class names.
    pub fn concat(&self, other: &LabeledDataset) -> Result<LabeledDataset> {
        if self.class_names != other.class_names {
            return Err(Error::Incompatible("datasets have different class names".into()));
        }
        let items = self.items.iter().chain(&other.items).cloned().collect();
        LabeledDataset::new(items, self.class_names.clone())
    }

    /// Seeded shuffle, first `round(train_fraction * len)` items to the first set.
    pub fn split(&self, train_fraction: f64, seed: u64) -> Result<(LabeledDataset, LabeledDataset)> {
        let n = self.len();
        let n_train = (train_fraction * n as f64).round() as usize;
        if n_train == 0 || n_train >= n {
            return Err(Error::InvalidParameter(format!(
                "split of {n} items at {train_fraction} leaves one side empty"
            )));
        }
        let mut order: Vec<usize> = (0..n).collect();
        order.shuffle(&mut ChaCha8Rng::seed_from_u64(seed));
        let (a, b) = order.split_at_mut(n_train);
        a.sort_unstable();
        b.sort_unstable();
        Ok((self.subset(a)?, self.subset(b)?))
    }
}

/// Reads a `filename<TAB>label` manifest; relative filenames resolve against
/// the manifest's directory. Class indices follow sorted label order.
pub fn load_dataset(manifest: impl AsRef<Path>) -> Result<LabeledDataset> {
    let manifest = manifest.as_ref();
    let text = fs::read_to_string(manifest).map_err(|e| Error::io(manifest, e))?;
    let root = manifest.parent().unwrap_or(Path::new("."));

    let mut entries = Vec::new();
    for (n, line) in text.lines().enumerate() {
        let line_no = n + 1;
        let line = line.trim_end_matches('\r');
        if line.trim().is_empty() {
            continue;
        }
        let malformed = |reason: &str| Error::MalformedManifest {
            path: manifest.to_path_buf(),
            line: line_no,
            reason: reason.to_string(),
        };
        let (file, label) = line
            .split_once('\t')
            .ok_or_else(|| malformed("expected filename<TAB>label"))?;
        if file.is_empty() || label.is_empty() || label.contains('\t') {
            return Err(malformed("expected filename<TAB>label"));
        }
        entries.push((line_no, root.join(file), label.to_string()));
    }
    if entries.is_empty() {
        return Err(Error::EmptyManifest(manifest.to_path_buf()));
    }

    let class_names: Vec<String> = entries
        .iter()
        .map(|(_, _, l)| l.clone())
        .collect::<BTreeSet<_>>()
        .into_iter()
        .collect();
    let mut items = Vec::with_capacity(entries.len());
    for (line, path, label) in entries {
        if !path.is_file() {
            return Err(Error::MissingFile { path, line });
        }
        let img = Image::read_pgm(&path)?;
        let idx = class_names.binary_search(&label).expect("label collected above");
        items.push((img, idx));
    }
    LabeledDataset::new(items, class_names)
}

/// Writes every image as `images/<name>_NNNNN.pgm` under `dir` plus the
/// manifest `<name>.tsv`, returning the manifest path.
pub fn save_dataset(dataset: &LabeledDataset, dir: impl AsRef<Path>, name: &str) -> Result<PathBuf> {
    let dir = dir.as_ref();
    let images = dir.join("images");
    fs::create_dir_all(&images).map_err(|e| Error::io(&images, e))?;
    let mut manifest = String::new();
    for (i, (img, label)) in dataset.items().iter().enumerate() {
        let file = format!("images/{name}_{i:05}.pgm");
        img.write_pgm(dir.join(&file))?;
        manifest.push_str(&file);
        manifest.push('\t');
        manifest.push_str(&dataset.class_names()[*label]);
        manifest.push('\n');
    }
    let path = dir.join(format!("{name}.tsv"));
    fs::write(&path, manifest).map_err(|e| Error::io(&path, e))?;
    Ok(path)
}

/// Synthetic task in which one region tells where the class is written.
///
/// The pointer region holds one of `n_targets` intensity codes naming a
/// target region; that target holds the class code; every other region,
/// including the unused targets, is background. Gaussian noise is added
/// everywhere and pixels are clamped to `[0, 255]`.
#[derive(Debug, Clone, PartialEq)]
pub struct PointerTaskSpec {
    pub rows: usize,
    pub cols: usize,
    pub width: usize,
    pub height: usize,
    pub n_classes: usize,
    /// Defaults to the grid's center region.
    pub pointer_region: Option<usize>,
    pub n_targets: usize,
    pub noise_std: f64,
    /// Total images; labels are assigned round-robin.
    pub n_images: usize,
    pub seed: u64,
}

impl Default for PointerTaskSpec {
    fn default() -> Self {
        PointerTaskSpec {
            rows: 4,
            cols: 4,
            width: 32,
            height: 32,
            n_classes: 4,
            pointer_region: None,
            n_targets: 4,
            noise_std: 8.0,
            n_images: 625,
            seed: 0,
        }
    }
}

pub const TRAIN_FRACTION: f64 = 0.8;

// seed streams
const STREAM_TARGETS: u64 = 1;
const STREAM_IMAGES: u64 = 2;
const STREAM_SPLIT: u64 = 3;

/// `m` evenly spaced levels centred in `m` equal slices of `[0, 256)`.
fn levels(m: usize) -> Vec<u8> {
    (0..m).map(|j| ((2 * j + 1) * 128 / m) as u8).collect()
}

fn min_gap(levels: &[u8]) -> f64 {
    levels
        .windows(2)
        .map(|w| (w[1] - w[0]) as f64)
        .fold(f64::INFINITY, f64::min)
}

impl PointerTaskSpec {
    pub fn grid(&self) -> Result<RegionGrid> {
        RegionGrid::new(self.width, self.height, self.rows, self.cols)
    }

    pub fn pointer(&self) -> Result<usize> {
        let grid = self.grid()?;
        let p = self.pointer_region.unwrap_or_else(|| grid.center_region());
        grid.check_index(p)?;
        Ok(p)
    }

    /// Pointer code for target slot `j`.
    pub fn pointer_levels(&self) -> Vec<u8> {
        levels(self.n_targets)
    }

    /// Background level followed by one code per class.
    fn target_levels(&self) -> Vec<u8> {
        levels(self.n_classes + 1)
    }

    pub fn background_level(&self) -> u8 {
        self.target_levels()[0]
    }

    pub fn class_levels(&self) -> Vec<u8> {
        self.target_levels()[1..].to_vec()
    }

    pub fn class_names(&self) -> Vec<String> {
        let width = (self.n_classes.max(2) - 1).to_string().len();
        (0..self.n_classes)
            .map(|c| format!("class{c:0width$}"))
            .collect()
    }

    pub fn validate(&self) -> Result<()> {
        let grid = self.grid()?;
        let pointer = self.pointer()?;
        let _ = pointer;
        if self.n_classes < 2 {
            return Err(Error::InvalidParameter("pointer task needs at least 2 classes".into()));
        }
        if self.n_targets == 0 || self.n_targets > grid.len() - 1 {
            return Err(Error::InvalidParameter(format!(
                "n_targets must be in [1, {}], got {}",
                grid.len() - 1,
                self.n_targets
            )));
        }
        if !(self.noise_std >= 0.0 && self.noise_std.is_finite()) {
            return Err(Error::InvalidParameter("noise_std must be finite and >= 0".into()));
        }
        if self.n_classes + 1 > 256 {
            return Err(Error::InvalidParameter("too many classes for 8-bit codes".into()));
        }
        let sep = min_gap(&self.pointer_levels()).min(min_gap(&self.target_levels()));
        if sep < 4.0 * self.noise_std {
            return Err(Error::InvalidParameter(format!(
                "code separation {sep} is below 4 * noise_std = {}",
                4.0 * self.noise_std
            )));
        }
        let n_train = (TRAIN_FRACTION * self.n_images as f64).round() as usize;
        if n_train == 0 || n_train >= self.n_images {
            return Err(Error::InvalidParameter(format!(
                "{} images cannot be split into non-empty train and test sets",
                self.n_images
            )));
        }
        Ok(())
    }

    /// Candidate target regions, ascending. Derived from the seed.
    pub fn target_regions(&self) -> Result<Vec<usize>> {
        self.validate()?;
        let pointer = self.pointer()?;
        let n = self.rows * self.cols;
        let mut others: Vec<usize> = (0..n).filter(|&r| r != pointer).collect();
        let mut rng = ChaCha8Rng::seed_from_u64(derive_seed(self.seed, STREAM_TARGETS, 0));
        let (chosen, _) = others.partial_shuffle(&mut rng, self.n_targets);
        let mut chosen = chosen.to_vec();
        chosen.sort_unstable();
        Ok(chosen)
    }
}

/// Generates the task and splits it 80/20 into (train, test).
pub fn generate_pointer_task(spec: &PointerTaskSpec) -> Result<(LabeledDataset, LabeledDataset)> {
    spec.validate()?;
    let grid = spec.grid()?;
    let pointer = spec.pointer()?;
    let targets = spec.target_regions()?;
    let pointer_levels = spec.pointer_levels();
    let class_levels = spec.class_levels();
    let background = spec.background_level();
    let noise = if spec.noise_std > 0.0 {
        Some(Normal::new(0.0, spec.noise_std).map_err(|e| Error::InvalidParameter(e.to_string()))?)
    } else {
        None
    };

    let mut rng = ChaCha8Rng::seed_from_u64(derive_seed(spec.seed, STREAM_IMAGES, 0));
    let mut items = Vec::with_capacity(spec.n_images);
    for i in 0..spec.n_images {
        let label = i % spec.n_classes;
        let slot = rng.random_range(0..spec.n_targets);
        let mut base = vec![background; grid.len()];
        base[pointer] = pointer_levels[slot];
        base[targets[slot]] = class_levels[label];

        let mut img = Image::filled(spec.width, spec.height, 0)?;
        for (region, &level) in base.iter().enumerate() {
            let b = grid.bounds(region)?;
            for y in b.y0..b.y1 {
                for x in b.x0..b.x1 {
                    let v = match &noise {
                        Some(n) => (level as f64 + n.sample(&mut rng)).round().clamp(0.0, 255.0) as u8,
                        None => level,
                    };
                    img.set(x, y, v);
                }
            }
        }
        items.push((img, label));
    }
    let all = LabeledDataset::new(items, spec.class_names())?;
    all.split(TRAIN_FRACTION, derive_seed(spec.seed, STREAM_SPLIT, 0))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn small(noise_std: f64, n_targets: usize) -> PointerTaskSpec {
        PointerTaskSpec {
            noise_std,
            n_targets,
            n_images: 40,
            seed: 3,
            ..PointerTaskSpec::default()
        }
    }

    fn region_mean(img: &Image, grid: &RegionGrid, r: usize) -> f64 {
        let b = grid.bounds(r).unwrap();
        let mut s = 0.0;
        for y in b.y0..b.y1 {
            for x in b.x0..b.x1 {
                s += img.get(x, y) as f64;
            }
        }
        s / b.area() as f64
    }

    #[test]
    fn split_is_eighty_twenty() {
        let spec = PointerTaskSpec::default();
        let (train, test) = generate_pointer_task(&spec).unwrap();
        assert_eq!((train.len(), test.len()), (500, 125));
        assert_eq!(train.class_names(), &["class0", "class1", "class2", "class3"]);
    }

    #[test]
    fn deterministic_under_seed() {
        let spec = small(8.0, 4);
        assert_eq!(generate_pointer_task(&spec).unwrap(), generate_pointer_task(&spec).unwrap());
        let other = PointerTaskSpec { seed: 4, ..spec };
        assert_ne!(generate_pointer_task(&other).unwrap().0, generate_pointer_task(&small(8.0, 4)).unwrap().0);
    }

    #[test]
    fn noiseless_single_target_layout() {
        let spec = small(0.0, 1);
        let (train, _) = generate_pointer_task(&spec).unwrap();
        let grid = spec.grid().unwrap();
        let target = spec.target_regions().unwrap()[0];
        let pointer = spec.pointer().unwrap();
        for (img, label) in train.items() {
            for r in 0..grid.len() {
                let m = region_mean(img, &grid, r);
                let want = if r == pointer {
                    spec.pointer_levels()[0]
                } else if r == target {
                    spec.class_levels()[*label]
                } else {
                    spec.background_level()
                };
                assert_eq!(m, want as f64);
            }
        }
    }

    #[test]
    fn non_target_regions_carry_no_class_information() {
        // noiseless: everything outside the target set is identical across classes
        let spec = small(0.0, 4);
        let (train, _) = generate_pointer_task(&spec).unwrap();
        let grid = spec.grid().unwrap();
        let targets = spec.target_regions().unwrap();
        let pointer = spec.pointer().unwrap();
        for r in (0..grid.len()).filter(|r| !targets.contains(r) && *r != pointer) {
            for (img, _) in train.items() {
                assert_eq!(region_mean(img, &grid, r), spec.background_level() as f64);
            }
        }
    }

    #[test]
    fn spec_violations() {
        let bad = PointerTaskSpec {
            n_targets: 16,
            ..PointerTaskSpec::default()
        };
        assert!(bad.validate().is_err());
        let bad = PointerTaskSpec {
            n_classes: 1,
            ..PointerTaskSpec::default()
        };
        assert!(bad.validate().is_err());
        let bad = PointerTaskSpec {
            noise_std: 20.0,
            ..PointerTaskSpec::default()
        };
        assert!(bad.validate().is_err());
        let bad = PointerTaskSpec {
            width: 3,
            ..PointerTaskSpec::default()
        };
        assert!(bad.validate().is_err());
        let bad = PointerTaskSpec {
            n_images: 1,
            ..PointerTaskSpec::default()
        };
        assert!(bad.validate().is_err());
    }

    #[test]
    fn codes_are_separated() {
        let spec = PointerTaskSpec::default();
        assert_eq!(spec.pointer_levels(), vec![32, 96, 160, 224]);
        assert_eq!(spec.background_level(), 25);
        assert_eq!(spec.class_levels(), vec![76, 128, 179, 230]);
    }
}
