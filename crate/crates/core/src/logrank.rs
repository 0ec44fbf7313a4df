//! Two-sample log-rank statistic, shared by hypothesis-style comparisons
//! and by tree split scoring.

use crate::error::{Error, Result};

/// Accumulated observed/expected deaths for group A and the hypergeometric
/// variance across all distinct pooled event times.
#[derive(Debug, Default, Clone, Copy)]
pub(crate) struct LogRankTerms {
    pub o_minus_e: f64,
    pub variance: f64,
    pub n_events: u64,
}

impl LogRankTerms {
    /// `|O - E| / sqrt(V)`; zero when there are no events or no variance.
    pub fn statistic(&self) -> f64 {
        if self.n_events == 0 || self.variance <= 0.0 {
            0.0
        } else {
            self.o_minus_e.abs() / self.variance.sqrt()
        }
    }
}

/// Sweep `(duration, event, in_group_a)` triples, which must arrive sorted
/// ascending by duration, accumulating log-rank terms. `n_total` and `n_a`
/// are the starting risk-set sizes.
pub(crate) fn logrank_sweep<I>(items: I, n_total: u64, n_a: u64) -> LogRankTerms
where
    I: Iterator<Item = (f64, bool, bool)>,
{
    let mut it = items.peekable();
    let mut y = n_total;
    let mut y_a = n_a;
    let mut terms = LogRankTerms::default();
    while let Some(&(t, _, _)) = it.peek() {
        let mut d = 0u64;
        let mut d_a = 0u64;
        let mut leaving = 0u64;
        let mut leaving_a = 0u64;
        while let Some(&(tt, event, in_a)) = it.peek() {
            if tt != t {
                break;
            }
            leaving += 1;
            if in_a {
                leaving_a += 1;
            }
            if event {
                d += 1;
                if in_a {
                    d_a += 1;
                }
            }
            it.next();
        }
        if d > 0 && y > 0 {
            let yf = y as f64;
            let frac_a = y_a as f64 / yf;
            terms.n_events += d;
            terms.o_minus_e += d_a as f64 - d as f64 * frac_a;
            if y > 1 {
                terms.variance +=
                    d as f64 * frac_a * (1.0 - frac_a) * (y - d) as f64 / (y - 1) as f64;
            }
        }
        y -= leaving;
        y_a -= leaving_a;
    }
    terms
}

/// Two-sample log-rank statistic `|O - E| / sqrt(V)` comparing the survival
/// experience of groups A and B. Returns 0 when the pooled data has no
/// events or zero variance; errors when either group is empty.
pub fn log_rank_statistic(
    durations_a: &[f64],
    events_a: &[bool],
    durations_b: &[f64],
    events_b: &[bool],
) -> Result<f64> {
    if durations_a.is_empty() || durations_b.is_empty() {
        return Err(Error::DegenerateSplit);
    }
    if durations_a.len() != events_a.len() || durations_b.len() != events_b.len() {
        return Err(Error::InvalidCohort("durations and events differ in length".into()));
    }
    let n_total = (durations_a.len() + durations_b.len()) as u64;
    let n_a = durations_a.len() as u64;
    let mut pooled: Vec<(f64, bool, bool)> = Vec::with_capacity(n_total as usize);
    pooled.extend(durations_a.iter().zip(events_a).map(|(&t, &e)| (t, e, true)));
    pooled.extend(durations_b.iter().zip(events_b).map(|(&t, &e)| (t, e, false)));
    pooled.sort_by(|x, y| x.0.total_cmp(&y.0));
    Ok(logrank_sweep(pooled.into_iter(), n_total, n_a).statistic())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn separated_groups() {
        // A dies at 1 and 2, B at 3 and 4. By hand:
        //   t=1: O-E += 1 - 2/4,  V += (2/4)(2/4)(3/3) = 1/4
        //   t=2: O-E += 1 - 1/3,  V += (1/3)(2/3)(2/2) = 2/9
        //   t=3,4: group A no longer at risk, contributes nothing
        // stat = (7/6) / sqrt(17/36) = 7 / sqrt(17)
        let s = log_rank_statistic(&[1.0, 2.0], &[true, true], &[3.0, 4.0], &[true, true]).unwrap();
        assert!((s - 7.0 / 17.0f64.sqrt()).abs() < 1e-12);
    }

    #[test]
    fn identical_groups_score_zero() {
        let d = [1.0, 2.0, 5.0];
        let e = [true, true, false];
        let s = log_rank_statistic(&d, &e, &d, &e).unwrap();
        assert!(s.abs() < 1e-12);
    }

    #[test]
    fn no_events_scores_zero() {
        let s = log_rank_statistic(&[1.0, 2.0], &[false, false], &[3.0], &[false]).unwrap();
        assert_eq!(s, 0.0);
    }

    #[test]
    fn empty_group_errors() {
        let err = log_rank_statistic(&[], &[], &[1.0], &[true]).unwrap_err();
        assert!(matches!(err, Error::DegenerateSplit));
    }

    #[test]
    fn symmetric_in_group_order() {
        let da = [1.0, 3.0, 4.0, 9.0];
        let ea = [true, false, true, true];
        let db = [2.0, 3.0, 7.0];
        let eb = [true, true, false];
        let ab = log_rank_statistic(&da, &ea, &db, &eb).unwrap();
        let ba = log_rank_statistic(&db, &eb, &da, &ea).unwrap();
        assert!((ab - ba).abs() <= 1e-12);
    }
}
