//! Backward training of the classifier and the region-selection policies.
//!
//! The classifier is fit first, on random `B`-region trajectories. Policies
//! are then learned from the last step to the first: for step `k`, random
//! `k`-region prefixes are extended by every unacquired candidate, the
//! already-trained later policies and the classifier are rolled out from
//! there, and each candidate whose rollout ends on the true label becomes a
//! training pair `(aggregate(prefix), candidate)`.

use std::fmt;
use std::ops::Deref;
use std::time::{Duration, Instant};

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use crate::data::LabeledDataset;
use crate::error::{Error, Result};
use crate::features::{build_codebook, FeatureExtractor, FeatureSession, RegionGrid};
use crate::linear::{fit_sparse, LinearModel, SparseExample, TrainConfig};
use crate::seed::derive_seed;

/// Ordered, duplicate-free region indices.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Trajectory(Vec<usize>);

impl Trajectory {
    pub fn new(regions: Vec<usize>) -> Result<Self> {
        let mut seen = std::collections::BTreeSet::new();
        for &r in &regions {
            if !seen.insert(r) {
                return Err(Error::DuplicateRegion(r));
            }
        }
        Ok(Trajectory(regions))
    }

    pub fn into_vec(self) -> Vec<usize> {
        self.0
    }
}

impl Deref for Trajectory {
    type Target = [usize];

    fn deref(&self) -> &[usize] {
        &self.0
    }
}

/// `start_region` followed by `length - 1` distinct regions drawn uniformly
/// without replacement from the others.
pub fn sample_trajectory_prefix<R: Rng + ?Sized>(
    length: usize,
    grid_size: usize,
    start_region: usize,
    rng: &mut R,
) -> Result<Trajectory> {
    if length == 0 || length > grid_size {
        return Err(Error::InvalidParameter(format!(
            "prefix length {length} outside [1, {grid_size}]"
        )));
    }
    if start_region >= grid_size {
        return Err(Error::RegionOutOfRange {
            index: start_region,
            count: grid_size,
        });
    }
    let mut others: Vec<usize> = (0..grid_size).filter(|&r| r != start_region).collect();
    let (picked, _) = others.partial_shuffle(rng, length - 1);
    let mut out = Vec::with_capacity(length);
    out.push(start_region);
    out.extend_from_slice(picked);
    Ok(Trajectory(out))
}

/// Trained classifier, policies and the feature setup they were trained on.
#[derive(Debug, Clone, PartialEq)]
pub struct PolicyBundle {
    f_theta: LinearModel,
    sub_policies: Vec<LinearModel>,
    rows: usize,
    cols: usize,
    extractor: FeatureExtractor,
    budget: usize,
    start_region: usize,
    class_names: Vec<String>,
}

impl PolicyBundle {
    /// `sub_policies[t - 1]` is the policy that picks region `t + 1`.
    #[allow(clippy::too_many_arguments)]
    pub fn new(
        f_theta: LinearModel,
        sub_policies: Vec<LinearModel>,
        rows: usize,
        cols: usize,
        extractor: FeatureExtractor,
        budget: usize,
        start_region: usize,
        class_names: Vec<String>,
    ) -> Result<Self> {
        let n = rows * cols;
        if rows == 0 || cols == 0 {
            return Err(Error::InvalidParameter("grid must have at least one region".into()));
        }
        if budget == 0 || budget > n {
            return Err(Error::InvalidParameter(format!("budget {budget} outside [1, {n}]")));
        }
        if sub_policies.len() != budget - 1 {
            return Err(Error::InvalidParameter(format!(
                "budget {budget} needs {} sub-policies, got {}",
                budget - 1,
                sub_policies.len()
            )));
        }
        if start_region >= n {
            return Err(Error::RegionOutOfRange {
                index: start_region,
                count: n,
            });
        }
        let dim = extractor.k() * n;
        if f_theta.dim() != dim {
            return Err(Error::DimensionMismatch {
                expected: dim,
                actual: f_theta.dim(),
            });
        }
        if f_theta.n_outputs() != class_names.len() {
            return Err(Error::DimensionMismatch {
                expected: class_names.len(),
                actual: f_theta.n_outputs(),
            });
        }
        for p in &sub_policies {
            if p.dim() != dim {
                return Err(Error::DimensionMismatch {
                    expected: dim,
                    actual: p.dim(),
                });
            }
            if p.n_outputs() != n {
                return Err(Error::DimensionMismatch {
                    expected: n,
                    actual: p.n_outputs(),
                });
            }
        }
        Ok(PolicyBundle {
            f_theta,
            sub_policies,
            rows,
            cols,
            extractor,
            budget,
            start_region,
            class_names,
        })
    }

    pub fn f_theta(&self) -> &LinearModel {
        &self.f_theta
    }

    pub fn sub_policies(&self) -> &[LinearModel] {
        &self.sub_policies
    }

    /// Policy for step `t` (1-based), which picks region `t + 1`.
    pub fn sub_policy(&self, t: usize) -> Option<&LinearModel> {
        t.checked_sub(1).and_then(|i| self.sub_policies.get(i))
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn grid_size(&self) -> usize {
        self.rows * self.cols
    }

    pub fn extractor(&self) -> &FeatureExtractor {
        &self.extractor
    }

    pub fn budget(&self) -> usize {
        self.budget
    }

    pub fn start_region(&self) -> usize {
        self.start_region
    }

    pub fn class_names(&self) -> &[String] {
        &self.class_names
    }

    /// Same bundle with a different first region.
    pub fn with_start_region(mut self, start_region: usize) -> Result<Self> {
        if start_region >= self.grid_size() {
            return Err(Error::RegionOutOfRange {
                index: start_region,
                count: self.grid_size(),
            });
        }
        self.start_region = start_region;
        Ok(self)
    }

    /// Policies from step `first_step` on, plus the classifier.
    pub fn suffix(&self, first_step: usize) -> Result<PolicySuffix<'_>> {
        if first_step == 0 || first_step > self.budget {
            return Err(Error::InvalidParameter(format!(
                "step {first_step} outside [1, {}]",
                self.budget
            )));
        }
        Ok(PolicySuffix {
            first_step,
            policies: &self.sub_policies[first_step - 1..],
            classifier: &self.f_theta,
        })
    }
}

/// Policies for steps `first_step..B` followed by the classifier.
#[derive(Debug, Clone, Copy)]
pub struct PolicySuffix<'a> {
    first_step: usize,
    policies: &'a [LinearModel],
    classifier: &'a LinearModel,
}

impl<'a> PolicySuffix<'a> {
    pub fn new(first_step: usize, policies: &'a [LinearModel], classifier: &'a LinearModel) -> Self {
        PolicySuffix {
            first_step,
            policies,
            classifier,
        }
    }

    pub fn first_step(&self) -> usize {
        self.first_step
    }

    pub fn budget(&self) -> usize {
        self.first_step + self.policies.len()
    }

    pub fn policies(&self) -> &'a [LinearModel] {
        self.policies
    }

    pub fn classifier(&self) -> &'a LinearModel {
        self.classifier
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Rollout {
    pub label: usize,
    pub trajectory: Vec<usize>,
}

/// Greedily extends `prefix` with the suffix policies, then classifies.
pub fn rollout(suffix: &PolicySuffix<'_>, session: &mut FeatureSession<'_>, prefix: &[usize]) -> Result<Rollout> {
    if prefix.len() != suffix.first_step {
        return Err(Error::Incompatible(format!(
            "suffix starts at step {} but the prefix holds {} regions",
            suffix.first_step,
            prefix.len()
        )));
    }
    let mut phi = session.aggregate(prefix)?;
    let mut trajectory = prefix.to_vec();
    for policy in suffix.policies {
        let next = policy.predict_region(&phi, &trajectory)?;
        phi.add_region(next, session.feature(next)?)?;
        trajectory.push(next);
    }
    let label = suffix.classifier.predict_class(&phi)?;
    Ok(Rollout { label, trajectory })
}

#[derive(Debug, Clone, PartialEq)]
pub enum ExtractorConfig {
    Histogram { bins: usize },
    Codebook { words: usize, patch_size: usize },
}

impl ExtractorConfig {
    pub fn build(&self, data: &LabeledDataset, seed: u64) -> Result<FeatureExtractor> {
        match *self {
            ExtractorConfig::Histogram { bins } => FeatureExtractor::histogram(bins),
            ExtractorConfig::Codebook { words, patch_size } => {
                let images: Vec<_> = data.items().iter().map(|(img, _)| img.clone()).collect();
                build_codebook(&images, patch_size, words, seed)
            }
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct TrainingPlan {
    pub budget: usize,
    pub samples_per_image: usize,
    pub rows: usize,
    pub cols: usize,
    pub extractor: ExtractorConfig,
    pub classifier: TrainConfig,
    pub policy: TrainConfig,
    pub seed: u64,
    /// Defaults to the grid's center region.
    pub start_region: Option<usize>,
}

impl TrainingPlan {
    /// Defaults: 16-bin histograms, 8 samples per image, default fit settings,
    /// with every seed taken from `seed`.
    pub fn new(budget: usize, rows: usize, cols: usize, seed: u64) -> Self {
        let fit = TrainConfig {
            seed,
            ..TrainConfig::default()
        };
        TrainingPlan {
            budget,
            samples_per_image: 8,
            rows,
            cols,
            extractor: ExtractorConfig::Histogram { bins: 16 },
            classifier: fit.clone(),
            policy: fit,
            seed,
            start_region: None,
        }
    }

    pub fn grid_size(&self) -> usize {
        self.rows * self.cols
    }

    pub fn start(&self) -> usize {
        self.start_region
            .unwrap_or(((self.rows.max(1) - 1) / 2) * self.cols + (self.cols.max(1) - 1) / 2)
    }

    pub fn validate(&self) -> Result<()> {
        if self.rows == 0 || self.cols == 0 {
            return Err(Error::InvalidParameter("grid must have at least one region".into()));
        }
        let n = self.grid_size();
        if self.budget == 0 || self.budget > n {
            return Err(Error::InvalidParameter(format!(
                "budget {} outside [1, {n}] for a {}x{} grid",
                self.budget, self.rows, self.cols
            )));
        }
        if self.samples_per_image == 0 {
            return Err(Error::InvalidParameter("samples per image must be at least 1".into()));
        }
        if self.start() >= n {
            return Err(Error::RegionOutOfRange {
                index: self.start(),
                count: n,
            });
        }
        self.classifier.validate()?;
        self.policy.validate()?;
        Ok(())
    }

    fn grids(&self, data: &LabeledDataset) -> Result<Vec<RegionGrid>> {
        self.validate()?;
        data.items()
            .iter()
            .map(|(img, _)| RegionGrid::new(img.width(), img.height(), self.rows, self.cols))
            .collect()
    }
}

// seed streams; policy for step k uses STREAM_POLICY + k
const STREAM_CLASSIFIER: u64 = 10;
const STREAM_POLICY: u64 = 1000;

fn sessions<'a>(
    data: &'a LabeledDataset,
    grids: &'a [RegionGrid],
    extractor: &'a FeatureExtractor,
) -> Result<Vec<FeatureSession<'a>>> {
    data.items()
        .iter()
        .zip(grids)
        .map(|((img, _), grid)| FeatureSession::new(img, grid, extractor))
        .collect()
}

/// Pair recorded while learning the policy for one step.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SupervisionPair {
    pub image: usize,
    pub prefix: Vec<usize>,
    pub candidate: usize,
}

#[derive(Debug, Clone)]
pub struct PhaseData {
    pub examples: Vec<SparseExample>,
    pub pairs: Vec<SupervisionPair>,
    pub prefixes: usize,
    pub rollouts: usize,
}

fn classifier_phase(sessions: &mut [FeatureSession<'_>], labels: &[usize], plan: &TrainingPlan) -> Result<PhaseData> {
    let start = plan.start();
    let per_image: Vec<Vec<SparseExample>> = sessions
        .par_iter_mut()
        .enumerate()
        .map(|(i, session)| {
            let mut rng = ChaCha8Rng::seed_from_u64(derive_seed(plan.seed, STREAM_CLASSIFIER, i as u64));
            (0..plan.samples_per_image)
                .map(|_| {
                    let traj = sample_trajectory_prefix(plan.budget, plan.grid_size(), start, &mut rng)?;
                    let phi = session.aggregate(&traj)?;
                    Ok(SparseExample::from_dense(&phi, labels[i]))
                })
                .collect::<Result<Vec<_>>>()
        })
        .collect::<Result<_>>()?;
    let examples: Vec<SparseExample> = per_image.into_iter().flatten().collect();
    Ok(PhaseData {
        prefixes: examples.len(),
        examples,
        pairs: Vec::new(),
        rollouts: 0,
    })
}

fn subpolicy_phase(
    k: usize,
    later: &PolicySuffix<'_>,
    sessions: &mut [FeatureSession<'_>],
    labels: &[usize],
    plan: &TrainingPlan,
) -> Result<PhaseData> {
    if k == 0 || k >= plan.budget {
        return Err(Error::InvalidParameter(format!(
            "policy step {k} outside [1, {}]",
            plan.budget.saturating_sub(1)
        )));
    }
    if later.first_step() != k + 1 || later.budget() != plan.budget {
        return Err(Error::Incompatible(format!(
            "policy step {k} needs the policies for steps {}..{} and the classifier",
            k + 1,
            plan.budget
        )));
    }
    let n = plan.grid_size();
    let start = plan.start();
    type ImageResult = (Vec<SparseExample>, Vec<SupervisionPair>, usize);
    let per_image: Vec<ImageResult> = sessions
        .par_iter_mut()
        .enumerate()
        .map(|(i, session)| {
            let mut rng = ChaCha8Rng::seed_from_u64(derive_seed(plan.seed, STREAM_POLICY + k as u64, i as u64));
            let mut examples = Vec::new();
            let mut pairs = Vec::new();
            let mut rollouts = 0;
            for _ in 0..plan.samples_per_image {
                let prefix = sample_trajectory_prefix(k, n, start, &mut rng)?;
                let state = session.aggregate(&prefix)?;
                let mut extended: Vec<usize> = prefix.iter().copied().chain([0]).collect();
                for candidate in (0..n).filter(|r| !prefix.contains(r)) {
                    *extended.last_mut().expect("non-empty") = candidate;
                    rollouts += 1;
                    if rollout(later, session, &extended)?.label == labels[i] {
                        examples.push(SparseExample::from_dense(&state, candidate));
                        pairs.push(SupervisionPair {
                            image: i,
                            prefix: prefix.to_vec(),
                            candidate,
                        });
                    }
                }
            }
            Ok((examples, pairs, rollouts))
        })
        .collect::<Result<_>>()?;

    let mut data = PhaseData {
        examples: Vec::new(),
        pairs: Vec::new(),
        prefixes: sessions.len() * plan.samples_per_image,
        rollouts: 0,
    };
    for (ex, pairs, rollouts) in per_image {
        data.examples.extend(ex);
        data.pairs.extend(pairs);
        data.rollouts += rollouts;
    }
    Ok(data)
}

/// Training examples for the classifier: `samples_per_image` random
/// `B`-region trajectories per image, labelled with the image's class.
pub fn classifier_examples(data: &LabeledDataset, plan: &TrainingPlan, extractor: &FeatureExtractor) -> Result<PhaseData> {
    let grids = plan.grids(data)?;
    let mut sessions = sessions(data, &grids, extractor)?;
    let labels: Vec<usize> = data.labels().collect();
    classifier_phase(&mut sessions, &labels, plan)
}

pub fn learn_classifier(data: &LabeledDataset, plan: &TrainingPlan, extractor: &FeatureExtractor) -> Result<LinearModel> {
    let phase = classifier_examples(data, plan, extractor)?;
    fit_sparse(&phase.examples, extractor.k() * plan.grid_size(), data.n_classes(), &plan.classifier)
}

/// Supervision for the policy at step `k`, given the later policies.
pub fn subpolicy_examples(
    k: usize,
    later: &PolicySuffix<'_>,
    data: &LabeledDataset,
    plan: &TrainingPlan,
    extractor: &FeatureExtractor,
) -> Result<PhaseData> {
    let grids = plan.grids(data)?;
    let mut sessions = sessions(data, &grids, extractor)?;
    let labels: Vec<usize> = data.labels().collect();
    subpolicy_phase(k, later, &mut sessions, &labels, plan)
}

fn fit_policy(k: usize, phase: &PhaseData, dim: usize, n: usize, config: &TrainConfig) -> Result<LinearModel> {
    if phase.examples.is_empty() {
        return Err(Error::EmptyDataset(format!(
            "sub-policy {k}: none of {} rollouts reached the true label",
            phase.rollouts
        )));
    }
    fit_sparse(&phase.examples, dim, n, config)
}

pub fn learn_subpolicy(
    k: usize,
    later: &PolicySuffix<'_>,
    data: &LabeledDataset,
    plan: &TrainingPlan,
    extractor: &FeatureExtractor,
) -> Result<LinearModel> {
    let phase = subpolicy_examples(k, later, data, plan, extractor)?;
    fit_policy(k, &phase, extractor.k() * plan.grid_size(), plan.grid_size(), &plan.policy)
}

#[derive(Debug, Clone, PartialEq)]
pub struct PhaseRecord {
    /// `None` for the classifier, `Some(k)` for the policy at step `k`.
    pub step: Option<usize>,
    pub examples: usize,
    pub prefixes: usize,
    pub rollouts: usize,
    /// Policy steps already trained and used for rollouts (classifier excluded).
    pub uses_steps: Vec<usize>,
    /// Cumulative feature extractions over all training images.
    pub phi_calls: usize,
    pub elapsed: Duration,
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct TrainingLog {
    pub phases: Vec<PhaseRecord>,
}

impl fmt::Display for TrainingLog {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for p in &self.phases {
            let name = match p.step {
                None => "classifier".to_string(),
                Some(k) => format!("policy[{k}]"),
            };
            let uses: Vec<String> = p.uses_steps.iter().map(|s| s.to_string()).collect();
            writeln!(
                f,
                "phase={name} examples={} prefixes={} rollouts={} uses=[{}] phi_calls={} elapsed_ms={}",
                p.examples,
                p.prefixes,
                p.rollouts,
                uses.join(","),
                p.phi_calls,
                p.elapsed.as_millis()
            )?;
        }
        Ok(())
    }
}

/// Trains the classifier, then the policies for steps `B-1` down to `1`.
pub fn learn_full_policy(data: &LabeledDataset, plan: &TrainingPlan) -> Result<(PolicyBundle, TrainingLog)> {
    plan.validate()?;
    let extractor = plan.extractor.build(data, plan.seed)?;
    let grids = plan.grids(data)?;
    let mut sessions = sessions(data, &grids, &extractor)?;
    let labels: Vec<usize> = data.labels().collect();
    let n = plan.grid_size();
    let dim = extractor.k() * n;
    let phi_calls = |s: &[FeatureSession<'_>]| s.iter().map(|s| s.phi_calls()).sum::<usize>();
    let mut log = TrainingLog::default();

    let t0 = Instant::now();
    let phase = classifier_phase(&mut sessions, &labels, plan)?;
    let f_theta = fit_sparse(&phase.examples, dim, data.n_classes(), &plan.classifier)?;
    log.phases.push(PhaseRecord {
        step: None,
        examples: phase.examples.len(),
        prefixes: phase.prefixes,
        rollouts: 0,
        uses_steps: Vec::new(),
        phi_calls: phi_calls(&sessions),
        elapsed: t0.elapsed(),
    });

    // later[0] is the policy for step k + 1
    let mut later: Vec<LinearModel> = Vec::with_capacity(plan.budget.saturating_sub(1));
    for k in (1..plan.budget).rev() {
        let t0 = Instant::now();
        let suffix = PolicySuffix::new(k + 1, &later, &f_theta);
        let phase = subpolicy_phase(k, &suffix, &mut sessions, &labels, plan)?;
        let policy = fit_policy(k, &phase, dim, n, &plan.policy)?;
        log.phases.push(PhaseRecord {
            step: Some(k),
            examples: phase.examples.len(),
            prefixes: phase.prefixes,
            rollouts: phase.rollouts,
            uses_steps: (k + 1..plan.budget).collect(),
            phi_calls: phi_calls(&sessions),
            elapsed: t0.elapsed(),
        });
        later.insert(0, policy);
    }

    let bundle = PolicyBundle::new(
        f_theta,
        later,
        plan.rows,
        plan.cols,
        extractor,
        plan.budget,
        plan.start(),
        data.class_names().to_vec(),
    )?;
    Ok((bundle, log))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::image::Image;

    #[test]
    fn prefix_basics() {
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        assert_eq!(&*sample_trajectory_prefix(1, 16, 5, &mut rng).unwrap(), &[5]);
        let full = sample_trajectory_prefix(16, 16, 5, &mut rng).unwrap();
        assert_eq!(full[0], 5);
        let mut sorted = full.to_vec();
        sorted.sort_unstable();
        assert_eq!(sorted, (0..16).collect::<Vec<_>>());
        assert!(sample_trajectory_prefix(0, 16, 5, &mut rng).is_err());
        assert!(sample_trajectory_prefix(17, 16, 5, &mut rng).is_err());
    }

    #[test]
    fn second_element_is_uniform() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let mut counts = [0usize; 4];
        let draws = 10_000;
        for _ in 0..draws {
            counts[sample_trajectory_prefix(2, 4, 1, &mut rng).unwrap()[1]] += 1;
        }
        assert_eq!(counts[1], 0);
        for r in [0, 2, 3] {
            let f = counts[r] as f64 / draws as f64;
            assert!((f - 1.0 / 3.0).abs() <= 0.02, "region {r}: {f}");
        }
    }

    #[test]
    fn trajectory_rejects_duplicates() {
        assert!(Trajectory::new(vec![1, 2, 1]).is_err());
        assert_eq!(&*Trajectory::new(vec![3, 0]).unwrap(), &[3, 0]);
    }

    #[test]
    fn plan_validation() {
        assert!(TrainingPlan::new(17, 4, 4, 0).validate().is_err());
        assert!(TrainingPlan::new(0, 4, 4, 0).validate().is_err());
        assert_eq!(TrainingPlan::new(2, 4, 4, 0).start(), 5);
        let mut p = TrainingPlan::new(2, 4, 4, 0);
        p.samples_per_image = 0;
        assert!(p.validate().is_err());
    }

    #[test]
    fn bundle_invariants() {
        let ex = FeatureExtractor::histogram(2).unwrap();
        let f = LinearModel::zeros(2, 8);
        let names = vec!["a".to_string(), "b".to_string()];
        assert!(PolicyBundle::new(f.clone(), vec![], 2, 2, ex.clone(), 1, 0, names.clone()).is_ok());
        assert!(PolicyBundle::new(f.clone(), vec![], 2, 2, ex.clone(), 2, 0, names.clone()).is_err());
        assert!(PolicyBundle::new(f.clone(), vec![], 2, 2, ex.clone(), 1, 4, names.clone()).is_err());
        let bad = LinearModel::zeros(3, 8);
        assert!(PolicyBundle::new(f, vec![bad], 2, 2, ex, 2, 0, names).is_err());
    }

    #[test]
    fn rollout_with_zero_policies_fills_lowest_indices() {
        let img = Image::from_fn(8, 8, |x, y| (x * 30 + y) as u8).unwrap();
        let grid = RegionGrid::new(8, 8, 2, 2).unwrap();
        let ex = FeatureExtractor::histogram(4).unwrap();
        let mut s = FeatureSession::new(&img, &grid, &ex).unwrap();
        let pols = vec![LinearModel::zeros(4, 16), LinearModel::zeros(4, 16)];
        let f = LinearModel::zeros(3, 16);
        let suffix = PolicySuffix::new(2, &pols, &f);
        let r = rollout(&suffix, &mut s, &[2, 3]).unwrap();
        assert_eq!(r.trajectory, vec![2, 3, 0, 1]);
        assert_eq!(r.label, 0);
        assert!(rollout(&suffix, &mut s, &[2]).is_err());
    }
}
