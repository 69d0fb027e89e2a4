//! Budgeted classification of a single image.

use rand::Rng;

use crate::error::{Error, Result};
use crate::features::{decompose, FeatureSession};
use crate::image::Image;
use crate::training::{sample_trajectory_prefix, PolicyBundle, Trajectory};

#[derive(Debug, Clone, PartialEq)]
pub struct InferenceResult {
    pub class: usize,
    pub trajectory: Trajectory,
    /// Regions whose descriptor was computed for this call.
    pub phi_calls: usize,
    /// Policy scores at each selection step, when requested.
    pub trace: Option<Vec<Vec<f64>>>,
}

fn check_budget(bundle: &PolicyBundle, budget: usize) -> Result<()> {
    if budget == 0 || budget > bundle.grid_size() {
        return Err(Error::InvalidParameter(format!(
            "budget {budget} outside [1, {}]",
            bundle.grid_size()
        )));
    }
    Ok(())
}

fn classify_inner(image: &Image, bundle: &PolicyBundle, keep_trace: bool) -> Result<InferenceResult> {
    let grid = decompose(image, bundle.rows(), bundle.cols())?;
    let mut session = FeatureSession::new(image, &grid, bundle.extractor())?;
    let mut trajectory = vec![bundle.start_region()];
    let mut phi = session.aggregate(&trajectory)?;
    let mut trace = keep_trace.then(Vec::new);
    for policy in bundle.sub_policies() {
        let next = policy.predict_region(&phi, &trajectory)?;
        if let Some(t) = trace.as_mut() {
            t.push(policy.score(&phi)?);
        }
        phi.add_region(next, session.feature(next)?)?;
        trajectory.push(next);
    }
    let class = bundle.f_theta().predict_class(&phi)?;
    Ok(InferenceResult {
        class,
        trajectory: Trajectory::new(trajectory)?,
        phi_calls: session.phi_calls(),
        trace,
    })
}

/// Acquires the start region, lets each policy add one region, then
/// classifies. Only the `B` acquired regions are ever described.
pub fn classify(image: &Image, bundle: &PolicyBundle) -> Result<InferenceResult> {
    classify_inner(image, bundle, false)
}

/// [`classify`], also keeping each step's policy scores.
pub fn classify_traced(image: &Image, bundle: &PolicyBundle) -> Result<InferenceResult> {
    classify_inner(image, bundle, true)
}

/// Baseline: the start region plus `budget - 1` uniformly drawn regions,
/// classified by the bundle's classifier.
pub fn classify_random<R: Rng + ?Sized>(
    image: &Image,
    bundle: &PolicyBundle,
    budget: usize,
    rng: &mut R,
) -> Result<InferenceResult> {
    check_budget(bundle, budget)?;
    let grid = decompose(image, bundle.rows(), bundle.cols())?;
    let mut session = FeatureSession::new(image, &grid, bundle.extractor())?;
    let trajectory = sample_trajectory_prefix(budget, bundle.grid_size(), bundle.start_region(), rng)?;
    let phi = session.aggregate(&trajectory)?;
    let class = bundle.f_theta().predict_class(&phi)?;
    Ok(InferenceResult {
        class,
        trajectory,
        phi_calls: session.phi_calls(),
        trace: None,
    })
}

/// Classifier applied to every region of the image.
pub fn classify_full(image: &Image, bundle: &PolicyBundle) -> Result<usize> {
    let grid = decompose(image, bundle.rows(), bundle.cols())?;
    let mut session = FeatureSession::new(image, &grid, bundle.extractor())?;
    let all: Vec<usize> = (0..grid.len()).collect();
    bundle.f_theta().predict_class(&session.aggregate(&all)?)
}
