//! Spec documents and CSV output.
//!
//! Spec files are JSON with neurons numbered from 1:
//!
//! ```json
//! {
//!   "schema_version": 1,
//!   "n": 3,
//!   "weights": [[1, 2, 0.3], [1, 3, 0.3], [2, 3, 0.3]],
//!   "drift": 0.0,
//!   "reset": [1.0, 1.0, 1.0],
//!   "intensity": {"family": "affine", "slope": [1, 1, 1], "offset": [0, 0, 0]},
//!   "interaction": {"kind": "clip_add"},
//!   "lower_triangular_inputs": true
//! }
//! ```
//!
//! `drift` and `reset` take a vector or a single number for every neuron.
//! Unknown fields are rejected. CSV files print floats in their shortest
//! round-trip form, so equal runs give equal bytes.

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::error::{Error, Result};
use crate::network::{
    build_example, ExampleKind, ExampleTag, IntensitySpec, InteractionRule, NetworkSpec, Weights,
};

pub const SCHEMA_VERSION: u32 = 1;

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(untagged)]
enum PerNeuron {
    All(f64),
    Each(Vec<f64>),
}

impl PerNeuron {
    fn expand(self, n: usize) -> Vec<f64> {
        match self {
            PerNeuron::All(v) => vec![v; n],
            PerNeuron::Each(v) => v,
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct SpecDocument {
    schema_version: u32,
    n: usize,
    weights: Vec<(usize, usize, f64)>,
    drift: PerNeuron,
    reset: PerNeuron,
    intensity: IntensitySpec,
    interaction: InteractionRule,
    #[serde(default)]
    lower_triangular_inputs: bool,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    example: Option<ExampleTag>,
}

fn to_document(spec: &NetworkSpec) -> SpecDocument {
    SpecDocument {
        schema_version: SCHEMA_VERSION,
        n: spec.n(),
        weights: spec.weights().triplets().map(|(i, j, w)| (i + 1, j + 1, w)).collect(),
        drift: PerNeuron::Each(spec.drift().to_vec()),
        reset: PerNeuron::Each(spec.reset().to_vec()),
        intensity: spec.intensity().clone(),
        interaction: spec.interaction(),
        lower_triangular_inputs: spec.lower_triangular_inputs(),
        example: spec.example().cloned(),
    }
}

fn from_document(doc: SpecDocument) -> Result<NetworkSpec> {
    if doc.schema_version != SCHEMA_VERSION {
        return Err(Error::InvalidSpec(format!(
            "schema_version {} is not supported (expected {SCHEMA_VERSION})",
            doc.schema_version
        )));
    }
    let n = doc.n;
    let mut trip = Vec::with_capacity(doc.weights.len());
    for (i, j, w) in doc.weights {
        if i == 0 || j == 0 {
            return Err(Error::InvalidSpec(format!(
                "weight ({i}, {j}): neurons are numbered from 1"
            )));
        }
        trip.push((i - 1, j - 1, w));
    }
    let spec = NetworkSpec::new(
        n,
        Weights::from_triplets(n, &trip)?,
        doc.drift.expand(n),
        doc.reset.expand(n),
        doc.intensity,
        doc.interaction,
        doc.lower_triangular_inputs,
    )?;
    Ok(match doc.example {
        Some(tag) => spec.with_example(tag),
        None => spec,
    })
}

/// Pretty JSON document for a spec.
pub fn spec_to_json(spec: &NetworkSpec) -> String {
    serde_json::to_string_pretty(&to_document(spec)).expect("spec documents always serialize")
}

/// Parses and validates a spec document.
pub fn spec_from_json(text: &str) -> Result<NetworkSpec> {
    let doc: SpecDocument = serde_json::from_str(text).map_err(|e| Error::Parse {
        line: e.line(),
        column: e.column(),
        message: e.to_string(),
    })?;
    from_document(doc)
}

/// Hex SHA-256 of the compact spec document.
pub fn spec_digest(spec: &NetworkSpec) -> String {
    let text = serde_json::to_string(&to_document(spec)).expect("spec documents always serialize");
    Sha256::digest(text.as_bytes())
        .iter()
        .fold(String::with_capacity(64), |mut s, b| {
            let _ = write!(s, "{b:02x}");
            s
        })
}

/// Loads `example:KIND` (built with `n` neurons, 20 by default, and the
/// given parameters) or a JSON file.
pub fn load_spec(
    source: &str,
    n: Option<usize>,
    params: &BTreeMap<String, f64>,
) -> Result<NetworkSpec> {
    if let Some(kind) = source.strip_prefix("example:") {
        let kind: ExampleKind = kind.parse()?;
        return build_example(kind, n.unwrap_or(20), params);
    }
    if !params.is_empty() {
        return Err(Error::InvalidArgument(
            "example parameters only apply to example:KIND specs".into(),
        ));
    }
    let text = fs::read_to_string(source)?;
    let spec = spec_from_json(&text)?;
    if let Some(n) = n {
        if n != spec.n() {
            return Err(Error::InvalidArgument(format!(
                "--n {n} contradicts the {} neurons of {source}",
                spec.n()
            )));
        }
    }
    Ok(spec)
}

/// Writes `text` to `path`, creating parent directories.
pub fn write_file(path: &Path, text: &str) -> Result<()> {
    if let Some(dir) = path.parent() {
        fs::create_dir_all(dir)?;
    }
    fs::write(path, text)?;
    Ok(())
}

/// Builds a CSV document from a header and rows of preformatted cells.
pub fn csv<I, R>(header: &[&str], rows: I) -> String
where
    I: IntoIterator<Item = R>,
    R: IntoIterator<Item = String>,
{
    let mut out = header.join(",");
    out.push('\n');
    for row in rows {
        let cells: Vec<String> = row.into_iter().collect();
        out.push_str(&cells.join(","));
        out.push('\n');
    }
    out
}
