//! Versioned JSON encoding of [`PolicyBundle`].
//!
//! Field order is fixed by the struct layout below so that equal bundles
//! serialize to identical bytes. Weights are written as shortest
//! round-trip decimals and parsed back bit-exactly.

use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::features::FeatureExtractor;
use crate::linear::LinearModel;
use crate::training::PolicyBundle;

pub const FORMAT_VERSION: u64 = 1;

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct BundleFile {
    version: u64,
    grid: GridFile,
    budget: usize,
    start_region: usize,
    extractor: ExtractorFile,
    class_names: Vec<String>,
    f_theta: ModelFile,
    sub_policies: Vec<ModelFile>,
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct GridFile {
    rows: usize,
    cols: usize,
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct ExtractorFile {
    kind: String,
    #[serde(rename = "K")]
    k: usize,
    patch_size: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    codebook: Option<Vec<Vec<f64>>>,
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct ModelFile {
    n_outputs: usize,
    dim: usize,
    /// Row-major, `n_outputs x (dim + 1)`, bias last in each row.
    weights: Vec<f64>,
}

#[derive(Deserialize)]
struct VersionProbe {
    version: u64,
}

const KIND_HISTOGRAM: &str = "histogram";
const KIND_CODEBOOK: &str = "codebook";

impl From<&LinearModel> for ModelFile {
    fn from(m: &LinearModel) -> Self {
        ModelFile {
            n_outputs: m.n_outputs(),
            dim: m.dim(),
            weights: m.weights().to_vec(),
        }
    }
}

impl TryFrom<ModelFile> for LinearModel {
    type Error = Error;

    fn try_from(m: ModelFile) -> Result<Self> {
        LinearModel::new(m.n_outputs, m.dim, m.weights)
    }
}

fn extractor_to_file(ex: &FeatureExtractor) -> ExtractorFile {
    match ex {
        FeatureExtractor::Histogram { bins } => ExtractorFile {
            kind: KIND_HISTOGRAM.into(),
            k: *bins,
            patch_size: None,
            codebook: None,
        },
        FeatureExtractor::Codebook {
            patch_size,
            centroids,
        } => ExtractorFile {
            kind: KIND_CODEBOOK.into(),
            k: centroids.len(),
            patch_size: Some(*patch_size),
            codebook: Some(centroids.clone()),
        },
    }
}

fn extractor_from_file(f: ExtractorFile) -> Result<FeatureExtractor> {
    match (f.kind.as_str(), f.patch_size, f.codebook) {
        (KIND_HISTOGRAM, None, None) => FeatureExtractor::histogram(f.k),
        (KIND_CODEBOOK, Some(p), Some(centroids)) => {
            if centroids.len() != f.k {
                return Err(Error::BundleParse(format!(
                    "codebook has {} words but K = {}",
                    centroids.len(),
                    f.k
                )));
            }
            FeatureExtractor::codebook(p, centroids)
        }
        (kind, _, _) => Err(Error::BundleParse(format!(
            "inconsistent extractor of kind {kind:?}"
        ))),
    }
}

pub fn bundle_to_json(bundle: &PolicyBundle) -> Vec<u8> {
    let file = BundleFile {
        version: FORMAT_VERSION,
        grid: GridFile {
            rows: bundle.rows(),
            cols: bundle.cols(),
        },
        budget: bundle.budget(),
        start_region: bundle.start_region(),
        extractor: extractor_to_file(bundle.extractor()),
        class_names: bundle.class_names().to_vec(),
        f_theta: bundle.f_theta().into(),
        sub_policies: bundle.sub_policies().iter().map(ModelFile::from).collect(),
    };
    let mut out = serde_json::to_vec(&file).expect("bundle is always serializable");
    out.push(b'\n');
    out
}

pub fn bundle_from_json(bytes: &[u8]) -> Result<PolicyBundle> {
    let probe: VersionProbe =
        serde_json::from_slice(bytes).map_err(|e| Error::BundleParse(e.to_string()))?;
    if probe.version != FORMAT_VERSION {
        return Err(Error::BundleVersion {
            found: probe.version,
            expected: FORMAT_VERSION,
        });
    }
    let file: BundleFile = serde_json::from_slice(bytes).map_err(|e| Error::BundleParse(e.to_string()))?;
    let f_theta = LinearModel::try_from(file.f_theta)?;
    let sub_policies = file
        .sub_policies
        .into_iter()
        .map(LinearModel::try_from)
        .collect::<Result<Vec<_>>>()?;
    PolicyBundle::new(
        f_theta,
        sub_policies,
        file.grid.rows,
        file.grid.cols,
        extractor_from_file(file.extractor)?,
        file.budget,
        file.start_region,
        file.class_names,
    )
}

pub fn save_bundle(bundle: &PolicyBundle, path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    fs::write(path, bundle_to_json(bundle)).map_err(|e| Error::io(path, e))
}

pub fn load_bundle(path: impl AsRef<Path>) -> Result<PolicyBundle> {
    let path = path.as_ref();
    let bytes = fs::read(path).map_err(|e| Error::io(path, e))?;
    bundle_from_json(&bytes)
}
