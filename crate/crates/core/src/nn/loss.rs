//! Training objectives for the survival networks: the full Cox partial
//! likelihood with Breslow tie handling, its case-control approximation,
//! and the discrete-time likelihood/ranking pair. Each loss comes with an
//! analytic gradient with respect to the network outputs.

use rand::Rng;
use serde::{Deserialize, Serialize};
use std::collections::BTreeSet;

use crate::error::{Error, Result};

/// Floor applied to probabilities before taking logarithms.
pub const PROB_FLOOR: f64 = 1e-12;

fn check_lengths(scores_len: usize, durations: &[f64], events: &[bool]) -> Result<()> {
    if durations.is_empty() {
        return Err(Error::EmptyCohort);
    }
    if scores_len != durations.len() || events.len() != durations.len() {
        return Err(Error::InvalidConfig("scores, durations and events must align".into()));
    }
    Ok(())
}

/// Negative Cox partial log-likelihood (sum over events, Breslow ties):
/// `sum_i [ log(sum_{T_j >= T_i} e^{s_j}) - s_i ]`. Returns 0 when the
/// cohort has no events.
pub fn cox_nll(scores: &[f64], durations: &[f64], events: &[bool]) -> Result<f64> {
    cox_nll_grad(scores, durations, events).map(|(l, _)| l)
}

/// Loss plus `d(loss)/d(scores)`.
pub fn cox_nll_grad(
    scores: &[f64],
    durations: &[f64],
    events: &[bool],
) -> Result<(f64, Vec<f64>)> {
    check_lengths(scores.len(), durations, events)?;
    if scores.iter().any(|s| !s.is_finite()) {
        return Err(Error::InvalidConfig("non-finite score".into()));
    }
    let n = scores.len();
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_unstable_by(|&a, &b| durations[b].total_cmp(&durations[a]));
    let max = scores.iter().copied().fold(f64::NEG_INFINITY, f64::max);

    // descending sweep over distinct times: risk-set sums and per-time
    // event counts, with every score shifted by the global max
    let mut risk_sums: Vec<(f64, f64, u64)> = Vec::new(); // (time, sum e^(s-max) over R(t), deaths)
    let mut cum = 0.0;
    let mut at = 0;
    while at < n {
        let t = durations[order[at]];
        let mut deaths = 0u64;
        while at < n && durations[order[at]] == t {
            let i = order[at];
            cum += (scores[i] - max).exp();
            if events[i] {
                deaths += 1;
            }
            at += 1;
        }
        if deaths > 0 {
            risk_sums.push((t, cum, deaths));
        }
    }
    risk_sums.reverse(); // ascending in time

    let mut loss = 0.0;
    for &(_, cum, deaths) in &risk_sums {
        loss += deaths as f64 * (max + cum.ln());
    }
    for i in 0..n {
        if events[i] {
            loss -= scores[i];
        }
    }

    // grad_k = -1{event_k} + e^{s_k - max} * sum_{event times <= T_k} d_l / cum_l
    let mut grad = vec![0.0; n];
    let mut ascending: Vec<usize> = (0..n).collect();
    ascending.sort_unstable_by(|&a, &b| durations[a].total_cmp(&durations[b]));
    let mut acc = 0.0;
    let mut li = 0;
    for &k in &ascending {
        while li < risk_sums.len() && risk_sums[li].0 <= durations[k] {
            acc += risk_sums[li].2 as f64 / risk_sums[li].1;
            li += 1;
        }
        grad[k] = (scores[k] - max).exp() * acc - if events[k] { 1.0 } else { 0.0 };
    }
    Ok((loss, grad))
}

/// One event subject with its sampled comparison set. `controls` holds
/// distinct subject indices, never including `case`.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct CaseControls {
    pub case: usize,
    pub controls: Vec<usize>,
}

/// Draw `control_size` at-risk comparators (with replacement, then
/// deduplicated) for every event subject. Cases are visited in index
/// order so the draw sequence is reproducible.
pub fn sample_case_controls<R: Rng>(
    durations: &[f64],
    events: &[bool],
    control_size: usize,
    rng: &mut R,
) -> Vec<CaseControls> {
    let n = durations.len();
    let mut out = Vec::new();
    for i in 0..n {
        if !events[i] {
            continue;
        }
        let pool: Vec<usize> =
            (0..n).filter(|&j| j != i && durations[j] >= durations[i]).collect();
        let mut picked = BTreeSet::new();
        if !pool.is_empty() {
            for _ in 0..control_size {
                picked.insert(pool[rng.gen_range(0..pool.len())]);
            }
        }
        out.push(CaseControls { case: i, controls: picked.into_iter().collect() });
    }
    out
}

/// The full risk set of every event subject (minus the case itself); with
/// these comparison sets the case-control loss coincides with [`cox_nll`].
pub fn exhaustive_case_controls(durations: &[f64], events: &[bool]) -> Vec<CaseControls> {
    let n = durations.len();
    let mut out = Vec::new();
    for i in 0..n {
        if !events[i] {
            continue;
        }
        let controls: Vec<usize> =
            (0..n).filter(|&j| j != i && durations[j] >= durations[i]).collect();
        out.push(CaseControls { case: i, controls });
    }
    out
}

/// Case-control Cox loss over fixed comparison sets:
/// `sum_cases [ log(e^{s_case} + sum_controls e^{s_j}) - s_case ]`.
pub fn coxcc_nll_with_controls(scores: &[f64], cases: &[CaseControls]) -> Result<f64> {
    coxcc_grad_with_controls(scores, cases).map(|(l, _)| l)
}

/// Loss plus `d(loss)/d(scores)` for fixed comparison sets.
pub fn coxcc_grad_with_controls(
    scores: &[f64],
    cases: &[CaseControls],
) -> Result<(f64, Vec<f64>)> {
    let n = scores.len();
    let mut loss = 0.0;
    let mut grad = vec![0.0; n];
    for cc in cases {
        if cc.case >= n || cc.controls.iter().any(|&j| j >= n) {
            return Err(Error::InvalidConfig("comparison index out of range".into()));
        }
        let members = std::iter::once(cc.case).chain(cc.controls.iter().copied());
        let max = members
            .clone()
            .map(|j| scores[j])
            .fold(f64::NEG_INFINITY, f64::max);
        let total: f64 = members.clone().map(|j| (scores[j] - max).exp()).sum();
        loss += max + total.ln() - scores[cc.case];
        for j in members {
            grad[j] += (scores[j] - max).exp() / total;
        }
        grad[cc.case] -= 1.0;
    }
    Ok((loss, grad))
}

/// Case-control Cox loss with freshly sampled comparison sets.
pub fn coxcc_nll<R: Rng>(
    scores: &[f64],
    durations: &[f64],
    events: &[bool],
    control_size: usize,
    rng: &mut R,
) -> Result<f64> {
    check_lengths(scores.len(), durations, events)?;
    if control_size == 0 {
        return Err(Error::InvalidConfig("control_size must be >= 1".into()));
    }
    let cases = sample_case_controls(durations, events, control_size, rng);
    coxcc_nll_with_controls(scores, &cases)
}

/// Right-open discretization of the time axis. Cut points are strictly
/// increasing and positive; bin `k` (0-based) covers `(cut[k-1], cut[k]]`
/// and the last bin absorbs everything beyond the final cut.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DiscreteTimeGrid {
    cuts: Vec<f64>,
}

impl DiscreteTimeGrid {
    pub fn new(cuts: Vec<f64>) -> Result<Self> {
        if cuts.len() < 2 {
            return Err(Error::InvalidConfig("need at least 2 time bins".into()));
        }
        if cuts.iter().any(|c| !c.is_finite() || *c <= 0.0) {
            return Err(Error::InvalidConfig("cut points must be finite and positive".into()));
        }
        if cuts.windows(2).any(|w| w[0] >= w[1]) {
            return Err(Error::InvalidConfig("cut points must be strictly increasing".into()));
        }
        Ok(Self { cuts })
    }

    /// Cuts at the `j/n_bins` quantiles of the observed durations,
    /// deduplicated; heavy ties can therefore yield fewer bins than asked.
    pub fn from_quantiles(durations: &[f64], n_bins: usize) -> Result<Self> {
        if durations.is_empty() {
            return Err(Error::EmptyCohort);
        }
        if n_bins < 2 {
            return Err(Error::InvalidConfig("need at least 2 time bins".into()));
        }
        let mut sorted = durations.to_vec();
        sorted.sort_unstable_by(f64::total_cmp);
        let mut cuts = Vec::with_capacity(n_bins);
        for j in 1..=n_bins {
            let q = j as f64 / n_bins as f64;
            let pos = (q * (sorted.len() - 1) as f64).round() as usize;
            cuts.push(sorted[pos]);
        }
        cuts.dedup();
        cuts.retain(|&c| c > 0.0);
        Self::new(cuts)
    }

    pub fn n_bins(&self) -> usize {
        self.cuts.len()
    }

    pub fn cuts(&self) -> &[f64] {
        &self.cuts
    }

    /// 0-based bin of a duration: the first bin whose cut is `>= t`, with
    /// the last bin absorbing any tail beyond the final cut.
    pub fn bin_of(&self, t: f64) -> usize {
        self.cuts.partition_point(|&c| c < t).min(self.cuts.len() - 1)
    }

    /// Number of cut points `<= t`: the index at which a survival curve
    /// over this grid is evaluated as a right-continuous step function.
    pub fn floor_index(&self, t: f64) -> usize {
        self.cuts.partition_point(|&c| c <= t)
    }
}

fn check_probs(y: &[f64], grid: &DiscreteTimeGrid, n: usize) -> Result<()> {
    if y.len() != n * grid.n_bins() {
        return Err(Error::InvalidConfig(format!(
            "expected {} bin probabilities ({} subjects x {} bins), got {}",
            n * grid.n_bins(),
            n,
            grid.n_bins(),
            y.len()
        )));
    }
    Ok(())
}

/// `1 - sum of the first k bin masses`: survival just past cut `k`.
fn survival_after(y_row: &[f64], k: usize) -> f64 {
    1.0 - y_row[..k].iter().sum::<f64>()
}

/// Discrete-time negative log-likelihood. An event in bin `e` contributes
/// `-log y_e`. A censored subject certifies survival only through the bins
/// it fully completed: `-log(1 - sum_{k<j} y_k)` with `j` the number of
/// cuts at or below the censoring time, capped at `n_bins - 1` because the
/// absorbing last bin can never be completed (an uncapped `j` would make
/// every late censoring's survival mass exactly zero).
/// `y` is row-major `n x n_bins`.
pub fn deephit_likelihood(
    y: &[f64],
    grid: &DiscreteTimeGrid,
    durations: &[f64],
    events: &[bool],
) -> Result<f64> {
    deephit_likelihood_grad(y, grid, durations, events).map(|(l, _)| l)
}

/// Likelihood loss plus `d(loss)/dy` (same layout as `y`).
pub fn deephit_likelihood_grad(
    y: &[f64],
    grid: &DiscreteTimeGrid,
    durations: &[f64],
    events: &[bool],
) -> Result<(f64, Vec<f64>)> {
    check_lengths(durations.len(), durations, events)?;
    check_probs(y, grid, durations.len())?;
    let m = grid.n_bins();
    let mut loss = 0.0;
    let mut grad = vec![0.0; y.len()];
    for i in 0..durations.len() {
        let row = &y[i * m..(i + 1) * m];
        if events[i] {
            let p = row[grid.bin_of(durations[i])];
            loss -= p.max(PROB_FLOOR).ln();
            // inside the floor the loss is flat, so the gradient is zero
            if p > PROB_FLOOR {
                grad[i * m + grid.bin_of(durations[i])] -= 1.0 / p;
            }
        } else {
            let j = grid.floor_index(durations[i]).min(m - 1);
            let s = survival_after(row, j);
            loss -= s.max(PROB_FLOOR).ln();
            if s > PROB_FLOOR {
                for k in 0..j {
                    grad[i * m + k] += 1.0 / s;
                }
            }
        }
    }
    Ok((loss, grad))
}

/// Discrete-time ranking loss: each event subject `i` contributes the mean
/// of `exp((S_i(T_i) - S_j(T_i)) / sigma)` over its comparable partners
/// (`T_i < T_j`), both survival curves read at the earlier subject's time.
/// Averaging within each subject keeps the term on the same per-subject
/// scale as the likelihood, so their mix does not drift with batch size.
pub fn deephit_rank(
    y: &[f64],
    grid: &DiscreteTimeGrid,
    durations: &[f64],
    events: &[bool],
    sigma: f64,
) -> Result<f64> {
    deephit_rank_grad(y, grid, durations, events, sigma).map(|(l, _)| l)
}

/// Ranking loss plus `d(loss)/dy`.
pub fn deephit_rank_grad(
    y: &[f64],
    grid: &DiscreteTimeGrid,
    durations: &[f64],
    events: &[bool],
    sigma: f64,
) -> Result<(f64, Vec<f64>)> {
    check_lengths(durations.len(), durations, events)?;
    check_probs(y, grid, durations.len())?;
    if !(sigma > 0.0) || !sigma.is_finite() {
        return Err(Error::InvalidConfig("sigma must be positive".into()));
    }
    let n = durations.len();
    let m = grid.n_bins();
    let mut loss = 0.0;
    let mut grad = vec![0.0; y.len()];
    for i in 0..n {
        if !events[i] {
            continue;
        }
        let partners = (0..n).filter(|&j| j != i && durations[j] > durations[i]).count();
        if partners == 0 {
            continue;
        }
        let inv = 1.0 / partners as f64;
        let k = grid.floor_index(durations[i]);
        let si = survival_after(&y[i * m..(i + 1) * m], k);
        for j in 0..n {
            if j == i || durations[j] <= durations[i] {
                continue;
            }
            let sj = survival_after(&y[j * m..(j + 1) * m], k);
            let w = inv * ((si - sj) / sigma).exp();
            loss += w;
            // dS/dy_k = -1 for k < floor index, so the chain rule flips sign
            let d = w / sigma;
            for b in 0..k {
                grad[i * m + b] -= d;
                grad[j * m + b] += d;
            }
        }
    }
    Ok((loss, grad))
}

/// Convex combination `alpha * likelihood + (1 - alpha) * ranking`,
/// `alpha` strictly inside (0, 1).
pub fn deephit_loss(
    y: &[f64],
    grid: &DiscreteTimeGrid,
    durations: &[f64],
    events: &[bool],
    alpha: f64,
    sigma: f64,
) -> Result<f64> {
    deephit_loss_grad(y, grid, durations, events, alpha, sigma).map(|(l, _)| l)
}

/// Combined loss plus `d(loss)/dy`.
pub fn deephit_loss_grad(
    y: &[f64],
    grid: &DiscreteTimeGrid,
    durations: &[f64],
    events: &[bool],
    alpha: f64,
    sigma: f64,
) -> Result<(f64, Vec<f64>)> {
    if !(alpha > 0.0 && alpha < 1.0) {
        return Err(Error::InvalidConfig("alpha must lie strictly in (0, 1)".into()));
    }
    let (ll, lg) = deephit_likelihood_grad(y, grid, durations, events)?;
    let (rl, rg) = deephit_rank_grad(y, grid, durations, events, sigma)?;
    let grad = lg
        .into_iter()
        .zip(rg)
        .map(|(a, b)| alpha * a + (1.0 - alpha) * b)
        .collect();
    Ok((alpha * ll + (1.0 - alpha) * rl, grad))
}
