//! Model artifacts on disk: a JSON envelope tagging format, version and
//! payload kind around the serialized value. JSON keeps every `f64`
//! bit-exact through a shortest-round-trip encoding, so reloaded models
//! predict identically.

use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};
use std::fs;
use std::path::Path;

use crate::error::{Error, Result};
use crate::forest::Forest;
use crate::nn::transfer::FittedModel;
use crate::tsf::{DepthwiseDistribution, StructureDistribution};

pub const FORMAT_NAME: &str = "tsf-artifact";
pub const FORMAT_VERSION: u32 = 1;

pub const KIND_FOREST: &str = "survival-forest";
pub const KIND_STRUCTURE: &str = "structure-distribution";
pub const KIND_DEPTHWISE: &str = "depthwise-distribution";
pub const KIND_MODEL: &str = "survival-network";

#[derive(Serialize)]
struct EnvelopeRef<'a, T> {
    format: &'a str,
    version: u32,
    kind: &'a str,
    payload: &'a T,
}

#[derive(Deserialize)]
struct Envelope<T> {
    format: String,
    version: u32,
    kind: String,
    payload: T,
}

/// Serialize a value into an enveloped JSON document.
pub fn to_document<T: Serialize>(kind: &str, value: &T) -> Result<String> {
    let env = EnvelopeRef { format: FORMAT_NAME, version: FORMAT_VERSION, kind, payload: value };
    serde_json::to_string_pretty(&env).map_err(|e| Error::Serialization(e.to_string()))
}

fn check_header(format: &str, version: u32, kind: &str, expected_kind: &str) -> Result<()> {
    if format != FORMAT_NAME {
        return Err(Error::Serialization(format!("not a {FORMAT_NAME} document")));
    }
    if version != FORMAT_VERSION {
        return Err(Error::Serialization(format!(
            "unsupported version {version} (this build reads {FORMAT_VERSION})"
        )));
    }
    if kind != expected_kind {
        return Err(Error::Serialization(format!(
            "expected a {expected_kind} artifact, found {kind}"
        )));
    }
    Ok(())
}

/// Parse an enveloped document, checking format, version and kind.
pub fn from_document<T: DeserializeOwned>(kind: &str, document: &str) -> Result<T> {
    let env: Envelope<T> =
        serde_json::from_str(document).map_err(|e| Error::Serialization(e.to_string()))?;
    check_header(&env.format, env.version, &env.kind, kind)?;
    Ok(env.payload)
}

/// Kind tag of a document without decoding its payload.
pub fn document_kind(document: &str) -> Result<String> {
    let env: Envelope<serde::de::IgnoredAny> =
        serde_json::from_str(document).map_err(|e| Error::Serialization(e.to_string()))?;
    if env.format != FORMAT_NAME {
        return Err(Error::Serialization(format!("not a {FORMAT_NAME} document")));
    }
    Ok(env.kind)
}

pub fn save_artifact<T: Serialize>(path: &Path, kind: &str, value: &T) -> Result<()> {
    fs::write(path, to_document(kind, value)?)?;
    Ok(())
}

pub fn load_artifact<T: DeserializeOwned>(path: &Path, kind: &str) -> Result<T> {
    from_document(kind, &fs::read_to_string(path)?)
}

/// Kind tag of an artifact file.
pub fn artifact_kind(path: &Path) -> Result<String> {
    document_kind(&fs::read_to_string(path)?)
}

pub fn save_forest(path: &Path, forest: &Forest) -> Result<()> {
    save_artifact(path, KIND_FOREST, forest)
}

pub fn load_forest(path: &Path) -> Result<Forest> {
    load_artifact(path, KIND_FOREST)
}

pub fn save_structure_distribution(path: &Path, dist: &StructureDistribution) -> Result<()> {
    save_artifact(path, KIND_STRUCTURE, dist)
}

pub fn load_structure_distribution(path: &Path) -> Result<StructureDistribution> {
    load_artifact(path, KIND_STRUCTURE)
}

pub fn save_depthwise_distribution(path: &Path, dist: &DepthwiseDistribution) -> Result<()> {
    save_artifact(path, KIND_DEPTHWISE, dist)
}

pub fn load_depthwise_distribution(path: &Path) -> Result<DepthwiseDistribution> {
    load_artifact(path, KIND_DEPTHWISE)
}

pub fn save_model(path: &Path, model: &FittedModel) -> Result<()> {
    save_artifact(path, KIND_MODEL, model)
}

pub fn load_model(path: &Path) -> Result<FittedModel> {
    load_artifact(path, KIND_MODEL)
}
