//! Cohort files: a CSV of covariates plus duration and event columns,
//! described by a JSON schema sidecar (`<name>.schema.json`). The schema
//! names the special columns and says how to decode each feature, so a
//! CSV round-trips into exactly the same [`Cohort`].

use serde::{Deserialize, Serialize};
use std::path::{Path, PathBuf};

use tsf_core::{Cohort, Error, Result};

/// How one CSV column becomes a covariate.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum FeatureKind {
    /// Parsed directly as a float.
    Numeric,
    /// Encoded as the level's position in `levels`. A value outside the
    /// list maps to `unknown_code` when given, otherwise it is an error.
    Categorical {
        levels: Vec<String>,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        unknown_code: Option<f64>,
    },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FeatureColumn {
    pub name: String,
    #[serde(flatten)]
    pub kind: FeatureKind,
}

/// Sidecar description of a cohort CSV.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CohortSchema {
    pub duration: String,
    pub event: String,
    pub features: Vec<FeatureColumn>,
}

impl CohortSchema {
    /// All-numeric schema, the shape every generated cohort uses.
    pub fn numeric(feature_names: &[String], duration: &str, event: &str) -> Self {
        Self {
            duration: duration.to_string(),
            event: event.to_string(),
            features: feature_names
                .iter()
                .map(|n| FeatureColumn { name: n.clone(), kind: FeatureKind::Numeric })
                .collect(),
        }
    }

    /// `cohort.csv` is described by `cohort.schema.json` next to it.
    pub fn sidecar_path(csv_path: &Path) -> PathBuf {
        csv_path.with_extension("schema.json")
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)?;
        serde_json::from_str(&text).map_err(|e| {
            Error::Serialization(format!("{}: {e}", path.display()))
        })
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        let mut text = serde_json::to_string_pretty(self)
            .map_err(|e| Error::Serialization(e.to_string()))?;
        text.push('\n');
        std::fs::write(path, text)?;
        Ok(())
    }
}

fn decode_event(raw: &str, row: usize, column: &str) -> Result<bool> {
    match raw.trim() {
        "1" | "true" => Ok(true),
        "0" | "false" => Ok(false),
        other => Err(Error::InvalidCohort(format!(
            "row {row}, column '{column}': event must be 0/1 or true/false, got '{other}'"
        ))),
    }
}

fn decode_feature(raw: &str, kind: &FeatureKind, row: usize, column: &str) -> Result<f64> {
    match kind {
        FeatureKind::Numeric => raw.trim().parse::<f64>().map_err(|_| {
            Error::InvalidCohort(format!(
                "row {row}, column '{column}': expected a number, got '{raw}'"
            ))
        }),
        FeatureKind::Categorical { levels, unknown_code } => {
            let value = raw.trim();
            match levels.iter().position(|l| l == value) {
                Some(i) => Ok(i as f64),
                None => unknown_code.ok_or_else(|| {
                    Error::InvalidCohort(format!(
                        "row {row}, column '{column}': unknown level '{value}'"
                    ))
                }),
            }
        }
    }
}

/// Read a cohort CSV under a schema; with no explicit schema path the
/// sidecar next to the CSV is used.
pub fn load_cohort(csv_path: &Path, schema_path: Option<&Path>) -> Result<(Cohort, CohortSchema)> {
    let schema = match schema_path {
        Some(p) => CohortSchema::load(p)?,
        None => CohortSchema::load(&CohortSchema::sidecar_path(csv_path))?,
    };
    let mut reader = csv::Reader::from_path(csv_path)
        .map_err(|e| Error::InvalidCohort(format!("{}: {e}", csv_path.display())))?;
    let headers = reader
        .headers()
        .map_err(|e| Error::InvalidCohort(e.to_string()))?
        .clone();
    let col = |name: &str| -> Result<usize> {
        headers.iter().position(|h| h == name).ok_or_else(|| {
            Error::InvalidCohort(format!("{}: missing column '{name}'", csv_path.display()))
        })
    };
    let duration_col = col(&schema.duration)?;
    let event_col = col(&schema.event)?;
    let feature_cols: Vec<usize> =
        schema.features.iter().map(|f| col(&f.name)).collect::<Result<_>>()?;

    let mut covariates = Vec::new();
    let mut durations = Vec::new();
    let mut events = Vec::new();
    for (idx, record) in reader.records().enumerate() {
        let row = idx + 1;
        let record = record.map_err(|e| Error::InvalidCohort(format!("row {row}: {e}")))?;
        let get = |c: usize, name: &str| -> Result<&str> {
            record.get(c).ok_or_else(|| {
                Error::InvalidCohort(format!("row {row}: missing column '{name}'"))
            })
        };
        let raw_duration = get(duration_col, &schema.duration)?;
        durations.push(raw_duration.trim().parse::<f64>().map_err(|_| {
            Error::InvalidCohort(format!(
                "row {row}, column '{}': expected a number, got '{raw_duration}'",
                schema.duration
            ))
        })?);
        events.push(decode_event(get(event_col, &schema.event)?, row, &schema.event)?);
        for (f, &c) in schema.features.iter().zip(&feature_cols) {
            covariates.push(decode_feature(get(c, &f.name)?, &f.kind, row, &f.name)?);
        }
    }
    let names: Vec<String> = schema.features.iter().map(|f| f.name.clone()).collect();
    let cohort = Cohort::new(covariates, names.len(), durations, events, names)?;
    Ok((cohort, schema))
}

/// Write a cohort CSV plus its schema sidecar. Floats print in their
/// shortest round-trip form, so load gives back identical values.
pub fn save_cohort(csv_path: &Path, cohort: &Cohort, schema: &CohortSchema) -> Result<()> {
    if schema.features.len() != cohort.n_features() {
        return Err(Error::FeatureMismatch {
            expected: cohort.n_features(),
            got: schema.features.len(),
        });
    }
    if !schema.features.iter().all(|f| matches!(f.kind, FeatureKind::Numeric)) {
        return Err(Error::InvalidConfig(
            "only numeric features can be written back to CSV".into(),
        ));
    }
    let mut writer = csv::Writer::from_path(csv_path)
        .map_err(|e| Error::InvalidCohort(format!("{}: {e}", csv_path.display())))?;
    let mut header: Vec<String> = schema.features.iter().map(|f| f.name.clone()).collect();
    header.push(schema.duration.clone());
    header.push(schema.event.clone());
    writer.write_record(&header).map_err(|e| Error::InvalidCohort(e.to_string()))?;
    for i in 0..cohort.n_subjects() {
        let mut record: Vec<String> = cohort.row(i).iter().map(|v| v.to_string()).collect();
        record.push(cohort.duration(i).to_string());
        record.push(if cohort.event(i) { "1".into() } else { "0".into() });
        writer.write_record(&record).map_err(|e| Error::InvalidCohort(e.to_string()))?;
    }
    writer.flush()?;
    schema.save(&CohortSchema::sidecar_path(csv_path))
}
