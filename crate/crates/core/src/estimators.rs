//! Nonparametric estimators for right-censored data: the event table,
//! Nelson-Aalen cumulative hazard, and Kaplan-Meier survival.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::step::StepFunction;

/// Death and risk-set counts at each distinct event time.
///
/// `times` is strictly increasing and holds only times with at least one
/// death; `at_risk[l]` counts subjects with `duration >= times[l]` (a
/// subject censored at `t` is still at risk at `t`).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EventTable {
    pub times: Vec<f64>,
    pub deaths: Vec<u64>,
    pub at_risk: Vec<u64>,
}

/// Aggregate raw observations into an [`EventTable`].
///
/// `weights`, when given, are positive integer multiplicities: a subject
/// with weight `w` counts exactly as `w` duplicated rows would.
pub fn build_event_table(
    durations: &[f64],
    events: &[bool],
    weights: Option<&[u64]>,
) -> Result<EventTable> {
    let n = durations.len();
    if n == 0 {
        return Err(Error::EmptyCohort);
    }
    if events.len() != n {
        return Err(Error::InvalidCohort(format!("{n} durations but {} events", events.len())));
    }
    if let Some(w) = weights {
        if w.len() != n {
            return Err(Error::InvalidCohort(format!("{n} durations but {} weights", w.len())));
        }
        if w.contains(&0) {
            return Err(Error::InvalidCohort("zero weight".into()));
        }
    }
    for (i, &t) in durations.iter().enumerate() {
        if !t.is_finite() || t < 0.0 {
            return Err(Error::InvalidCohort(format!("duration {t} at row {i}")));
        }
    }

    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&a, &b| durations[a].total_cmp(&durations[b]));

    let total: u64 = match weights {
        Some(w) => w.iter().sum(),
        None => n as u64,
    };

    let mut times = Vec::new();
    let mut deaths = Vec::new();
    let mut at_risk = Vec::new();
    let mut remaining = total;
    let mut pos = 0;
    while pos < n {
        let t = durations[order[pos]];
        let mut d = 0u64;
        let mut leaving = 0u64;
        while pos < n && durations[order[pos]] == t {
            let i = order[pos];
            let w = weights.map_or(1, |w| w[i]);
            leaving += w;
            if events[i] {
                d += w;
            }
            pos += 1;
        }
        if d > 0 {
            times.push(t);
            deaths.push(d);
            at_risk.push(remaining);
        }
        remaining -= leaving;
    }
    Ok(EventTable { times, deaths, at_risk })
}

/// Nelson-Aalen cumulative hazard: `H(t) = sum_{times[l] <= t} d_l / Y_l`.
/// Zero before the first event time; an event-free table gives constant 0.
pub fn nelson_aalen(table: &EventTable) -> StepFunction {
    let mut values = Vec::with_capacity(table.times.len());
    let mut h = 0.0;
    for l in 0..table.times.len() {
        h += table.deaths[l] as f64 / table.at_risk[l] as f64;
        values.push(h);
    }
    StepFunction::new(table.times.clone(), values, 0.0)
        .expect("event table times are strictly increasing")
}

/// Kaplan-Meier survival: `S(t) = prod_{times[l] <= t} (1 - d_l / Y_l)`.
/// One before the first event time; an event-free table gives constant 1.
pub fn kaplan_meier(table: &EventTable) -> StepFunction {
    let mut values = Vec::with_capacity(table.times.len());
    let mut s = 1.0;
    for l in 0..table.times.len() {
        s *= 1.0 - table.deaths[l] as f64 / table.at_risk[l] as f64;
        values.push(s);
    }
    StepFunction::new(table.times.clone(), values, 1.0)
        .expect("event table times are strictly increasing")
}

/// Convert a cumulative hazard to a survival curve, `S(t) = exp(-H(t))`.
/// Rejects inputs with any negative value, which cannot be a cumulative
/// hazard.
pub fn surv_from_cumhaz(cumhaz: &StepFunction) -> Result<StepFunction> {
    if cumhaz.initial_value() < 0.0 || cumhaz.values().iter().any(|&v| v < 0.0) {
        return Err(Error::NotCumulativeHazard);
    }
    cumhaz.map_values(|h| (-h).exp())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn close(a: f64, b: f64) -> bool {
        (a - b).abs() <= 1e-12
    }

    // Four subjects: deaths at 1, 2, 2 and one censored at 3.
    fn small_table() -> EventTable {
        build_event_table(&[1.0, 2.0, 2.0, 3.0], &[true, true, true, false], None).unwrap()
    }

    #[test]
    fn event_table_counts() {
        let t = small_table();
        assert_eq!(t.times, vec![1.0, 2.0]);
        assert_eq!(t.deaths, vec![1, 2]);
        assert_eq!(t.at_risk, vec![4, 3]);
    }

    #[test]
    fn censored_only_times_are_dropped() {
        // censoring at 1.5 shrinks the risk set but adds no row
        let t = build_event_table(&[1.0, 1.5, 2.0], &[true, false, true], None).unwrap();
        assert_eq!(t.times, vec![1.0, 2.0]);
        assert_eq!(t.at_risk, vec![3, 1]);
    }

    #[test]
    fn weights_equal_duplication() {
        let weighted =
            build_event_table(&[1.0, 2.0, 3.0], &[true, true, false], Some(&[2, 3, 1])).unwrap();
        let duplicated = build_event_table(
            &[1.0, 1.0, 2.0, 2.0, 2.0, 3.0],
            &[true, true, true, true, true, false],
            None,
        )
        .unwrap();
        assert_eq!(weighted, duplicated);
        // and the estimators agree exactly
        let (na_w, na_d) = (nelson_aalen(&weighted), nelson_aalen(&duplicated));
        assert_eq!(na_w, na_d);
        assert_eq!(kaplan_meier(&weighted), kaplan_meier(&duplicated));
    }

    #[test]
    fn rejects_empty_and_zero_weight() {
        assert!(matches!(build_event_table(&[], &[], None).unwrap_err(), Error::EmptyCohort));
        assert!(matches!(
            build_event_table(&[1.0], &[true], Some(&[0])).unwrap_err(),
            Error::InvalidCohort(_)
        ));
    }

    #[test]
    fn nelson_aalen_small() {
        // H(1) = 1/4, H(2) = 1/4 + 2/3
        let na = nelson_aalen(&small_table());
        assert_eq!(na.eval(0.5), 0.0);
        assert!(close(na.eval(1.0), 0.25));
        assert!(close(na.eval(1.9), 0.25));
        assert!(close(na.eval(2.0), 0.25 + 2.0 / 3.0));
        assert!(close(na.eval(10.0), 0.25 + 2.0 / 3.0));
    }

    #[test]
    fn kaplan_meier_small() {
        // S(1) = 3/4, S(2) = 3/4 * 1/3 = 1/4
        let km = kaplan_meier(&small_table());
        assert_eq!(km.eval(0.0), 1.0);
        assert!(close(km.eval(1.0), 0.75));
        assert!(close(km.eval(2.0), 0.25));
        assert!(close(km.eval(99.0), 0.25));
    }

    #[test]
    fn all_censored_gives_trivial_estimates() {
        let t = build_event_table(&[1.0, 2.0], &[false, false], None).unwrap();
        assert!(t.times.is_empty());
        assert_eq!(nelson_aalen(&t).eval(5.0), 0.0);
        assert_eq!(kaplan_meier(&t).eval(5.0), 1.0);
    }

    #[test]
    fn km_drops_to_zero_when_last_subject_dies() {
        let t = build_event_table(&[1.0, 2.0], &[true, true], None).unwrap();
        let km = kaplan_meier(&t);
        assert!(close(km.eval(1.0), 0.5));
        assert_eq!(km.eval(2.0), 0.0);
    }

    #[test]
    fn surv_from_cumhaz_is_pointwise_exp() {
        let na = nelson_aalen(&small_table());
        let s = surv_from_cumhaz(&na).unwrap();
        assert_eq!(s.eval(0.0), 1.0);
        assert!(close(s.eval(1.0), (-0.25f64).exp()));
        assert!(close(s.eval(3.0), (-(0.25 + 2.0 / 3.0) as f64).exp()));
    }

    #[test]
    fn surv_from_cumhaz_rejects_negative() {
        let f = StepFunction::new(vec![1.0], vec![-0.1], 0.0).unwrap();
        assert!(matches!(surv_from_cumhaz(&f).unwrap_err(), Error::NotCumulativeHazard));
    }
}
