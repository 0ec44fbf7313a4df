//! Right-censored survival cohorts.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// A cohort of right-censored subjects: a covariate matrix plus one
/// observed duration and one event indicator per subject.
///
/// `event(i) == true` means the failure was observed at `duration(i)`;
/// `false` means the subject was censored there and is known only to have
/// survived past that time.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Cohort {
    covariates: Vec<f64>, // row-major, n_subjects x n_features
    n_features: usize,
    durations: Vec<f64>,
    events: Vec<bool>,
    feature_names: Vec<String>,
}

impl Cohort {
    /// Build a cohort, validating shape and value invariants:
    /// at least one subject, finite covariates, finite non-negative
    /// durations, and unique feature names matching the matrix width.
    pub fn new(
        covariates: Vec<f64>,
        n_features: usize,
        durations: Vec<f64>,
        events: Vec<bool>,
        feature_names: Vec<String>,
    ) -> Result<Self> {
        let n = durations.len();
        if n == 0 {
            return Err(Error::EmptyCohort);
        }
        if events.len() != n {
            return Err(Error::InvalidCohort(format!(
                "{} durations but {} event indicators",
                n,
                events.len()
            )));
        }
        if covariates.len() != n * n_features {
            return Err(Error::InvalidCohort(format!(
                "covariate matrix has {} entries, expected {} ({} subjects x {} features)",
                covariates.len(),
                n * n_features,
                n,
                n_features
            )));
        }
        if feature_names.len() != n_features {
            return Err(Error::InvalidCohort(format!(
                "{} feature names for {} features",
                feature_names.len(),
                n_features
            )));
        }
        for (j, name) in feature_names.iter().enumerate() {
            if feature_names[..j].contains(name) {
                return Err(Error::InvalidCohort(format!("duplicate feature name {name:?}")));
            }
        }
        for (i, &t) in durations.iter().enumerate() {
            if !t.is_finite() || t < 0.0 {
                return Err(Error::InvalidCohort(format!("duration {t} at row {i}")));
            }
        }
        if let Some(pos) = covariates.iter().position(|v| !v.is_finite()) {
            return Err(Error::InvalidCohort(format!(
                "non-finite covariate at row {}, feature {}",
                pos / n_features,
                pos % n_features
            )));
        }
        Ok(Self { covariates, n_features, durations, events, feature_names })
    }

    /// Convenience constructor with generated feature names `x0..x{p-1}`.
    pub fn from_rows(rows: Vec<Vec<f64>>, durations: Vec<f64>, events: Vec<bool>) -> Result<Self> {
        let n_features = rows.first().map_or(0, Vec::len);
        let mut flat = Vec::with_capacity(rows.len() * n_features);
        for (i, row) in rows.iter().enumerate() {
            if row.len() != n_features {
                return Err(Error::InvalidCohort(format!(
                    "row {i} has {} features, expected {n_features}",
                    row.len()
                )));
            }
            flat.extend_from_slice(row);
        }
        let names = (0..n_features).map(|j| format!("x{j}")).collect();
        Self::new(flat, n_features, durations, events, names)
    }

    pub fn n_subjects(&self) -> usize {
        self.durations.len()
    }

    pub fn n_features(&self) -> usize {
        self.n_features
    }

    /// Number of observed (uncensored) failures.
    pub fn n_events(&self) -> usize {
        self.events.iter().filter(|&&e| e).count()
    }

    /// Covariate row of subject `i`.
    pub fn row(&self, i: usize) -> &[f64] {
        &self.covariates[i * self.n_features..(i + 1) * self.n_features]
    }

    /// Covariate value of subject `i` for feature `j`.
    pub fn value(&self, i: usize, j: usize) -> f64 {
        self.covariates[i * self.n_features + j]
    }

    pub fn duration(&self, i: usize) -> f64 {
        self.durations[i]
    }

    pub fn event(&self, i: usize) -> bool {
        self.events[i]
    }

    pub fn durations(&self) -> &[f64] {
        &self.durations
    }

    pub fn events(&self) -> &[bool] {
        &self.events
    }

    pub fn feature_names(&self) -> &[String] {
        &self.feature_names
    }

    /// New cohort holding the given subjects, in order. Indices may repeat,
    /// which is how bootstrap resamples are expressed.
    pub fn select(&self, indices: &[usize]) -> Result<Self> {
        if indices.is_empty() {
            return Err(Error::EmptyCohort);
        }
        let mut covariates = Vec::with_capacity(indices.len() * self.n_features);
        let mut durations = Vec::with_capacity(indices.len());
        let mut events = Vec::with_capacity(indices.len());
        for &i in indices {
            covariates.extend_from_slice(self.row(i));
            durations.push(self.durations[i]);
            events.push(self.events[i]);
        }
        Ok(Self {
            covariates,
            n_features: self.n_features,
            durations,
            events,
            feature_names: self.feature_names.clone(),
        })
    }

    /// Distinct observed event times, ascending. This is the natural
    /// evaluation grid for cumulative-hazard estimates on this cohort.
    pub fn event_time_grid(&self) -> Vec<f64> {
        let mut times: Vec<f64> = self
            .durations
            .iter()
            .zip(&self.events)
            .filter(|(_, &e)| e)
            .map(|(&t, _)| t)
            .collect();
        times.sort_by(f64::total_cmp);
        times.dedup();
        times
    }
}
