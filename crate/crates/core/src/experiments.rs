//! Evaluation harness: accuracy, budget sweeps against the random-region
//! baseline, and region transition statistics. Tables are written as CSV.

use std::io::Write;
use std::time::Instant;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use crate::data::LabeledDataset;
use crate::error::{Error, Result};
use crate::inference::{classify, classify_random};
use crate::seed::derive_seed;
use crate::training::{learn_full_policy, PolicyBundle, TrainingPlan};

const STREAM_RANDOM: u64 = 20;
const STREAM_REPEAT: u64 = 21;

/// Maps dataset labels onto the bundle's class indices by name.
pub fn align_labels(bundle: &PolicyBundle, dataset: &LabeledDataset) -> Result<Vec<usize>> {
    let mapping: Vec<usize> = dataset
        .class_names()
        .iter()
        .map(|name| {
            bundle
                .class_names()
                .iter()
                .position(|b| b == name)
                .ok_or_else(|| Error::Incompatible(format!("class {name:?} unknown to the model")))
        })
        .collect::<Result<_>>()?;
    Ok(dataset.labels().map(|l| mapping[l]).collect())
}

#[derive(Debug, Clone, PartialEq)]
pub struct Prediction {
    pub index: usize,
    pub truth: usize,
    pub predicted: usize,
    pub trajectory: Vec<usize>,
    pub phi_calls: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ClassStats {
    pub name: String,
    pub correct: usize,
    pub total: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub struct EvalReport {
    pub class_names: Vec<String>,
    pub predictions: Vec<Prediction>,
}

impl EvalReport {
    pub fn accuracy(&self) -> f64 {
        if self.predictions.is_empty() {
            return 0.0;
        }
        let hits = self.predictions.iter().filter(|p| p.truth == p.predicted).count();
        hits as f64 / self.predictions.len() as f64
    }

    pub fn per_class(&self) -> Vec<ClassStats> {
        let mut stats: Vec<ClassStats> = self
            .class_names
            .iter()
            .map(|n| ClassStats {
                name: n.clone(),
                correct: 0,
                total: 0,
            })
            .collect();
        for p in &self.predictions {
            stats[p.truth].total += 1;
            if p.truth == p.predicted {
                stats[p.truth].correct += 1;
            }
        }
        stats
    }

    /// `index,true_label,predicted_label,correct,phi_calls,trajectory`;
    /// the trajectory is space-separated region indices.
    pub fn write_predictions_csv<W: Write>(&self, out: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(out);
        w.write_record(["index", "true_label", "predicted_label", "correct", "phi_calls", "trajectory"])?;
        for p in &self.predictions {
            let traj: Vec<String> = p.trajectory.iter().map(|r| r.to_string()).collect();
            w.write_record([
                p.index.to_string(),
                self.class_names[p.truth].clone(),
                self.class_names[p.predicted].clone(),
                u8::from(p.truth == p.predicted).to_string(),
                p.phi_calls.to_string(),
                traj.join(" "),
            ])?;
        }
        w.flush().map_err(csv::Error::from)?;
        Ok(())
    }
}

/// Runs the learned policy on every item, in parallel, ordered by index.
pub fn evaluate(bundle: &PolicyBundle, dataset: &LabeledDataset) -> Result<EvalReport> {
    let truth = align_labels(bundle, dataset)?;
    let predictions = dataset
        .items()
        .par_iter()
        .enumerate()
        .map(|(i, (img, _))| {
            let r = classify(img, bundle)?;
            Ok(Prediction {
                index: i,
                truth: truth[i],
                predicted: r.class,
                trajectory: r.trajectory.into_vec(),
                phi_calls: r.phi_calls,
            })
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(EvalReport {
        class_names: bundle.class_names().to_vec(),
        predictions,
    })
}

/// Accuracy of the bundle's classifier on uniformly drawn `budget`-region
/// trajectories; item `i` draws from its own stream of `seed`.
pub fn random_accuracy(bundle: &PolicyBundle, dataset: &LabeledDataset, budget: usize, seed: u64) -> Result<f64> {
    let truth = align_labels(bundle, dataset)?;
    let hits = dataset
        .items()
        .par_iter()
        .enumerate()
        .map(|(i, (img, _))| {
            let mut rng = ChaCha8Rng::seed_from_u64(derive_seed(seed, STREAM_RANDOM, i as u64));
            Ok(usize::from(classify_random(img, bundle, budget, &mut rng)?.class == truth[i]))
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(hits.iter().sum::<usize>() as f64 / dataset.len() as f64)
}

fn mean_std(xs: &[f64]) -> (f64, f64) {
    let n = xs.len() as f64;
    let mean = xs.iter().sum::<f64>() / n;
    if xs.len() < 2 {
        return (mean, 0.0);
    }
    let var = xs.iter().map(|x| (x - mean) * (x - mean)).sum::<f64>() / (n - 1.0);
    (mean, var.sqrt())
}

#[derive(Debug, Clone, PartialEq)]
pub struct SweepRow {
    pub budget: usize,
    pub learned_accuracy: f64,
    pub random_mean: f64,
    pub random_std: f64,
    pub mean_phi_calls: f64,
    /// Mean wall time of one learned classification, microseconds.
    pub mean_wall_time_us: f64,
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct SweepReport {
    pub rows: Vec<SweepRow>,
}

impl SweepReport {
    /// One row per budget; the timing column is omitted when
    /// `include_timing` is false so that the output is reproducible.
    pub fn write_csv<W: Write>(&self, out: W, include_timing: bool) -> Result<()> {
        let mut w = csv::Writer::from_writer(out);
        let mut header = vec!["budget", "learned_accuracy", "random_mean", "random_std", "mean_phi_calls"];
        if include_timing {
            header.push("mean_wall_time_us");
        }
        w.write_record(&header)?;
        for r in &self.rows {
            let mut rec = vec![
                r.budget.to_string(),
                format!("{:.6}", r.learned_accuracy),
                format!("{:.6}", r.random_mean),
                format!("{:.6}", r.random_std),
                format!("{:.6}", r.mean_phi_calls),
            ];
            if include_timing {
                rec.push(format!("{:.3}", r.mean_wall_time_us));
            }
            w.write_record(&rec)?;
        }
        w.flush().map_err(csv::Error::from)?;
        Ok(())
    }

    pub fn read_csv<R: std::io::Read>(input: R) -> Result<SweepReport> {
        let mut r = csv::Reader::from_reader(input);
        let timing = r.headers()?.len() == 6;
        let mut rows = Vec::new();
        for rec in r.records() {
            let rec = rec?;
            let num = |i: usize| -> Result<f64> {
                rec.get(i)
                    .and_then(|s| s.parse().ok())
                    .ok_or_else(|| Error::InvalidParameter(format!("bad sweep field {i}")))
            };
            rows.push(SweepRow {
                budget: num(0)? as usize,
                learned_accuracy: num(1)?,
                random_mean: num(2)?,
                random_std: num(3)?,
                mean_phi_calls: num(4)?,
                mean_wall_time_us: if timing { num(5)? } else { 0.0 },
            });
        }
        Ok(SweepReport { rows })
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SweepConfig {
    pub budgets: Vec<usize>,
    /// Random-baseline trials per budget (and per repeat).
    pub trials: usize,
    /// With more than one repeat, train and test are pooled and re-split
    /// 80/20 with a fresh seed for every repeat.
    pub repeats: usize,
}

struct Measured {
    learned: f64,
    random: Vec<f64>,
    phi: f64,
    wall_us: f64,
}

fn measure(bundle: &PolicyBundle, test: &LabeledDataset, trials: usize, seed: u64) -> Result<Measured> {
    let t0 = Instant::now();
    let report = evaluate(bundle, test)?;
    let wall_us = t0.elapsed().as_secs_f64() * 1e6 / test.len() as f64;
    let random = (0..trials.max(1))
        .map(|t| random_accuracy(bundle, test, bundle.budget(), derive_seed(seed, STREAM_RANDOM, t as u64)))
        .collect::<Result<_>>()?;
    let phi = report.predictions.iter().map(|p| p.phi_calls as f64).sum::<f64>() / test.len() as f64;
    Ok(Measured {
        learned: report.accuracy(),
        random,
        phi,
        wall_us,
    })
}

/// Learned-versus-random comparison for one trained bundle.
pub fn sweep_row(bundle: &PolicyBundle, test: &LabeledDataset, trials: usize, seed: u64) -> Result<SweepRow> {
    let m = measure(bundle, test, trials, seed)?;
    let (random_mean, random_std) = mean_std(&m.random);
    Ok(SweepRow {
        budget: bundle.budget(),
        learned_accuracy: m.learned,
        random_mean,
        random_std,
        mean_phi_calls: m.phi,
        mean_wall_time_us: m.wall_us,
    })
}

/// Trains one bundle per budget with `plan` (budget overridden) and compares
/// it with the random baseline sharing its classifier.
pub fn sweep(train: &LabeledDataset, test: &LabeledDataset, plan: &TrainingPlan, config: &SweepConfig) -> Result<SweepReport> {
    sweep_with(train, test, plan, config, |train, plan| Ok(learn_full_policy(train, plan)?.0))
}

/// [`sweep`] with a caller-supplied way of obtaining the bundle for each
/// budget, e.g. loading it from disk.
pub fn sweep_with<F>(
    train: &LabeledDataset,
    test: &LabeledDataset,
    plan: &TrainingPlan,
    config: &SweepConfig,
    mut obtain: F,
) -> Result<SweepReport>
where
    F: FnMut(&LabeledDataset, &TrainingPlan) -> Result<PolicyBundle>,
{
    let n = plan.grid_size();
    if config.budgets.is_empty() {
        return Err(Error::InvalidParameter("no budgets given".into()));
    }
    if let Some(&b) = config.budgets.iter().find(|&&b| b == 0 || b > n) {
        return Err(Error::InvalidParameter(format!("budget {b} outside [1, {n}]")));
    }
    let repeats = config.repeats.max(1);
    let splits: Vec<(LabeledDataset, LabeledDataset)> = if repeats == 1 {
        vec![(train.clone(), test.clone())]
    } else {
        let pool = train.concat(test)?;
        let frac = train.len() as f64 / pool.len() as f64;
        (0..repeats)
            .map(|r| pool.split(frac, derive_seed(plan.seed, STREAM_REPEAT, r as u64)))
            .collect::<Result<_>>()?
    };

    let mut report = SweepReport::default();
    for &budget in &config.budgets {
        let mut learned = Vec::new();
        let mut random = Vec::new();
        let mut phi = Vec::new();
        let mut wall = Vec::new();
        for (r, (tr, te)) in splits.iter().enumerate() {
            let mut p = plan.clone();
            p.budget = budget;
            if repeats > 1 {
                p.seed = derive_seed(plan.seed, STREAM_REPEAT, r as u64);
            }
            let bundle = obtain(tr, &p)?;
            if bundle.budget() != budget {
                return Err(Error::Incompatible(format!(
                    "bundle for budget {budget} has budget {}",
                    bundle.budget()
                )));
            }
            let m = measure(&bundle, te, config.trials, p.seed)?;
            learned.push(m.learned);
            random.extend(m.random);
            phi.push(m.phi);
            wall.push(m.wall_us);
        }
        let (random_mean, random_std) = mean_std(&random);
        report.rows.push(SweepRow {
            budget,
            learned_accuracy: mean_std(&learned).0,
            random_mean,
            random_std,
            mean_phi_calls: mean_std(&phi).0,
            mean_wall_time_us: mean_std(&wall).0,
        });
    }
    Ok(report)
}

/// How often region `j` directly followed region `i`, and which regions
/// were acquired at each step.
#[derive(Debug, Clone, PartialEq)]
pub struct TransitionGraph {
    pub grid_size: usize,
    pub n_trajectories: usize,
    /// `counts[i][j]`: trajectories where `j` was acquired right after `i`.
    pub counts: Vec<Vec<u64>>,
    /// `step_counts[s][r]`: trajectories whose step-`s` region (0-based) is `r`.
    pub step_counts: Vec<Vec<u64>>,
}

impl TransitionGraph {
    pub fn from_trajectories<'a>(
        trajectories: impl IntoIterator<Item = &'a [usize]>,
        grid_size: usize,
        budget: usize,
    ) -> Result<Self> {
        let mut g = TransitionGraph {
            grid_size,
            n_trajectories: 0,
            counts: vec![vec![0; grid_size]; grid_size],
            step_counts: vec![vec![0; grid_size]; budget],
        };
        for t in trajectories {
            if t.len() > budget {
                return Err(Error::InvalidParameter(format!(
                    "trajectory of length {} exceeds budget {budget}",
                    t.len()
                )));
            }
            if let Some(&r) = t.iter().find(|&&r| r >= grid_size) {
                return Err(Error::RegionOutOfRange {
                    index: r,
                    count: grid_size,
                });
            }
            g.n_trajectories += 1;
            for (s, &r) in t.iter().enumerate() {
                g.step_counts[s][r] += 1;
            }
            for w in t.windows(2) {
                g.counts[w[0]][w[1]] += 1;
            }
        }
        Ok(g)
    }

    pub fn total_transitions(&self) -> u64 {
        self.counts.iter().flatten().sum()
    }

    /// Nonzero edges as `from,to,count,share_of_source,share_of_total`.
    pub fn write_transitions_csv<W: Write>(&self, out: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(out);
        w.write_record(["from", "to", "count", "share_of_source", "share_of_total"])?;
        let total = self.total_transitions();
        for (i, row) in self.counts.iter().enumerate() {
            let out_of_i: u64 = row.iter().sum();
            for (j, &c) in row.iter().enumerate().filter(|(_, &c)| c > 0) {
                w.write_record([
                    i.to_string(),
                    j.to_string(),
                    c.to_string(),
                    format!("{:.6}", c as f64 / out_of_i as f64),
                    format!("{:.6}", c as f64 / total as f64),
                ])?;
            }
        }
        w.flush().map_err(csv::Error::from)?;
        Ok(())
    }

    /// Every (step, region) cell as `step,region,count,frequency`.
    pub fn write_step_frequencies_csv<W: Write>(&self, out: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(out);
        w.write_record(["step", "region", "count", "frequency"])?;
        for (s, row) in self.step_counts.iter().enumerate() {
            let at_step: u64 = row.iter().sum();
            for (r, &c) in row.iter().enumerate() {
                let f = if at_step == 0 { 0.0 } else { c as f64 / at_step as f64 };
                w.write_record([s.to_string(), r.to_string(), c.to_string(), format!("{f:.6}")])?;
            }
        }
        w.flush().map_err(csv::Error::from)?;
        Ok(())
    }
}

/// Transition statistics of the learned policy over `dataset`.
pub fn trajectories(bundle: &PolicyBundle, dataset: &LabeledDataset) -> Result<TransitionGraph> {
    let report = evaluate(bundle, dataset)?;
    TransitionGraph::from_trajectories(
        report.predictions.iter().map(|p| p.trajectory.as_slice()),
        bundle.grid_size(),
        bundle.budget(),
    )
}
