//! Time-dependent concordance for survival-curve predictions.

use crate::cohort::Cohort;
use crate::error::{Error, Result};
use crate::step::StepFunction;

/// Time-dependent concordance index over predicted survival curves.
///
/// An ordered pair `(i, j)` is comparable when subject `i` has an observed
/// event and either `T_i < T_j`, or `T_i == T_j` with `j` censored. The
/// pair is concordant when the model gives `i` the lower survival at `T_i`,
/// i.e. `S_i(T_i) < S_j(T_i)`; exact ties in the two predictions count 0.5.
/// Pairs with equal times and two events are not comparable.
///
/// Returns `(concordant + 0.5 * tied) / comparable`; errors when there are
/// no comparable pairs at all.
pub fn concordance_td(cohort: &Cohort, curves: &[StepFunction]) -> Result<f64> {
    let n = cohort.n_subjects();
    if curves.len() != n {
        return Err(Error::InvalidCohort(format!(
            "{n} subjects but {} predicted curves",
            curves.len()
        )));
    }
    let mut comparable = 0u64;
    let mut score = 0.0f64;
    for i in 0..n {
        if !cohort.event(i) {
            continue;
        }
        let t_i = cohort.duration(i);
        let s_i = curves[i].eval(t_i);
        for j in 0..n {
            if j == i {
                continue;
            }
            let t_j = cohort.duration(j);
            let usable = t_i < t_j || (t_i == t_j && !cohort.event(j));
            if !usable {
                continue;
            }
            comparable += 1;
            let s_j = curves[j].eval(t_i);
            if s_i < s_j {
                score += 1.0;
            } else if s_i == s_j {
                score += 0.5;
            }
        }
    }
    if comparable == 0 {
        return Err(Error::NoComparablePairs);
    }
    Ok(score / comparable as f64)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn curve(knots: Vec<f64>, values: Vec<f64>) -> StepFunction {
        StepFunction::new(knots, values, 1.0).unwrap()
    }

    fn three_subject_cohort() -> Cohort {
        Cohort::from_rows(
            vec![vec![0.0], vec![0.0], vec![0.0]],
            vec![1.0, 2.0, 3.0],
            vec![true, true, true],
        )
        .unwrap()
    }

    // Curves ordered pointwise: c0 < c1 < c2 at every time.
    fn ordered_curves() -> Vec<StepFunction> {
        vec![
            curve(vec![0.5], vec![0.1]),
            curve(vec![0.5], vec![0.5]),
            curve(vec![0.5], vec![0.9]),
        ]
    }

    #[test]
    fn perfectly_ordered_curves_score_one() {
        let c = three_subject_cohort();
        assert_eq!(concordance_td(&c, &ordered_curves()).unwrap(), 1.0);
    }

    #[test]
    fn swapping_two_curves_costs_one_of_three_pairs() {
        let c = three_subject_cohort();
        let mut curves = ordered_curves();
        curves.swap(0, 1);
        let got = concordance_td(&c, &curves).unwrap();
        assert!((got - 2.0 / 3.0).abs() < 1e-15);
    }

    #[test]
    fn identical_curves_score_half() {
        let c = three_subject_cohort();
        let curves = vec![curve(vec![0.5], vec![0.4]); 3];
        assert_eq!(concordance_td(&c, &curves).unwrap(), 0.5);
    }

    #[test]
    fn censored_subjects_never_serve_as_the_event_side() {
        // only subject 0 has an event; pairs (0,1) and (0,2) are comparable
        let c = Cohort::from_rows(
            vec![vec![0.0]; 3],
            vec![1.0, 2.0, 3.0],
            vec![true, false, false],
        )
        .unwrap();
        let got = concordance_td(&c, &ordered_curves()).unwrap();
        assert_eq!(got, 1.0);
    }

    #[test]
    fn tied_times_need_exactly_one_event() {
        // both events at t=2: no comparable pairs at all
        let c = Cohort::from_rows(vec![vec![0.0]; 2], vec![2.0, 2.0], vec![true, true]).unwrap();
        let curves = vec![curve(vec![1.0], vec![0.2]), curve(vec![1.0], vec![0.7])];
        assert!(matches!(concordance_td(&c, &curves).unwrap_err(), Error::NoComparablePairs));

        // event vs censored at the same time: the event subject plays i
        let c = Cohort::from_rows(vec![vec![0.0]; 2], vec![2.0, 2.0], vec![true, false]).unwrap();
        let curves = vec![curve(vec![1.0], vec![0.2]), curve(vec![1.0], vec![0.7])];
        assert_eq!(concordance_td(&c, &curves).unwrap(), 1.0);
    }

    #[test]
    fn no_events_errors() {
        let c = Cohort::from_rows(vec![vec![0.0]; 2], vec![1.0, 2.0], vec![false, false]).unwrap();
        let curves = vec![curve(vec![1.0], vec![0.5]); 2];
        assert!(matches!(concordance_td(&c, &curves).unwrap_err(), Error::NoComparablePairs));
    }
}
