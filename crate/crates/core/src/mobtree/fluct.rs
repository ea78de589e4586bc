//! Score-based parameter-instability tests for split variable selection.
//!
//! Node scores are centered and standardized by the outer-product-of-
//! gradients covariance estimate (symmetric 2x2, pseudo-inverted with a
//! 1e-10 eigenvalue cutoff, so a degenerate direction -- e.g. the shape
//! score at the near-Poisson cap -- simply drops out of the statistic).
//!
//! Categorical candidates use the chi-squared form: the statistic sums the
//! standardized within-level score sums and is asymptotically chi-squared
//! with rank*(C-1) degrees of freedom. Ordered candidates use a supLM scan
//! over the trimmed range; its p-value is a Bonferroni bound over the
//! evaluated breakpoints, which is conservative but exact-free, and never
//! touches categorical-only runs.

use super::{CandidateTest, Dataset, SplitData, SplitVariable, TreeConfig};
use crate::negbin::{score_contributions, NbFit};
use crate::numeric::chi2_sf;

const EIGEN_CUTOFF: f64 = 1e-10;

/// Result of one fluctuation test.
#[derive(Debug, Clone, Copy)]
pub struct TestOutcome {
    pub statistic: f64,
    pub df: f64,
    pub p: f64,
}

impl TestOutcome {
    fn degenerate() -> TestOutcome {
        TestOutcome { statistic: 0.0, df: 0.0, p: 1.0 }
    }
}

/// Pseudo-inverse of a symmetric 2x2 matrix with an absolute eigenvalue
/// cutoff; returns the inverse and its rank.
fn pinv2(a: f64, b: f64, c: f64) -> ([f64; 4], usize) {
    let mid = 0.5 * (a + c);
    let disc = (0.25 * (a - c) * (a - c) + b * b).sqrt();
    let eigs = [mid + disc, mid - disc];
    let mut inv = [0.0; 4];
    let mut rank = 0;
    for &lambda in &eigs {
        if lambda <= EIGEN_CUTOFF {
            continue;
        }
        rank += 1;
        // Eigenvector for lambda.
        let (vx, vy) = if b.abs() > 1e-300 {
            (lambda - c, b)
        } else if a >= c {
            if lambda == eigs[0] { (1.0, 0.0) } else { (0.0, 1.0) }
        } else if lambda == eigs[0] {
            (0.0, 1.0)
        } else {
            (1.0, 0.0)
        };
        let norm = (vx * vx + vy * vy).sqrt();
        if norm == 0.0 {
            continue;
        }
        let (vx, vy) = (vx / norm, vy / norm);
        inv[0] += vx * vx / lambda;
        inv[1] += vx * vy / lambda;
        inv[2] += vy * vx / lambda;
        inv[3] += vy * vy / lambda;
    }
    (inv, rank)
}

fn quad_form(inv: &[f64; 4], s: [f64; 2]) -> f64 {
    s[0] * (inv[0] * s[0] + inv[1] * s[1]) + s[1] * (inv[2] * s[0] + inv[3] * s[1])
}

/// Center the member scores and estimate their covariance.
fn centered(scores: &[[f64; 2]]) -> (Vec<[f64; 2]>, [f64; 4], usize) {
    let m = scores.len() as f64;
    let mean0: f64 = scores.iter().map(|s| s[0]).sum::<f64>() / m;
    let mean1: f64 = scores.iter().map(|s| s[1]).sum::<f64>() / m;
    let cs: Vec<[f64; 2]> = scores.iter().map(|s| [s[0] - mean0, s[1] - mean1]).collect();
    let (mut a, mut b, mut c) = (0.0, 0.0, 0.0);
    for s in &cs {
        a += s[0] * s[0];
        b += s[0] * s[1];
        c += s[1] * s[1];
    }
    let (inv, rank) = pinv2(a / m, b / m, c / m);
    (cs, inv, rank)
}

/// Parameter-instability test of the node scores against one candidate.
/// `scores` has one row per entry of `members`, in the same order.
pub fn fluctuation_test(
    scores: &[[f64; 2]],
    var: &SplitVariable,
    members: &[usize],
    trim: f64,
) -> TestOutcome {
    assert_eq!(scores.len(), members.len(), "one score row per member");
    let m = members.len();
    if m < 4 {
        return TestOutcome::degenerate();
    }
    let (cs, inv, rank) = centered(scores);
    if rank == 0 {
        return TestOutcome::degenerate();
    }
    match &var.data {
        SplitData::Categorical { levels, codes } => {
            let member_codes: Vec<u32> = members.iter().map(|&r| codes[r]).collect();
            categorical_test(&cs, &member_codes, levels.len(), &inv, rank, &var.name)
        }
        SplitData::Numeric { values } => {
            let member_values: Vec<f64> = members.iter().map(|&r| values[r]).collect();
            suplm_test(&cs, &member_values, &inv, rank, trim)
        }
    }
}

fn categorical_test(
    cs: &[[f64; 2]],
    codes: &[u32],
    n_levels: usize,
    inv: &[f64; 4],
    rank: usize,
    name: &str,
) -> TestOutcome {

    let mut counts = vec![0usize; n_levels];
    for &c in codes {
        counts[c as usize] += 1;
    }

    // Collapse levels with fewer than 2 members into the observed level with
    // the nearest count (ties to the larger, then lower code).
    let mut target: Vec<u32> = (0..n_levels as u32).collect();
    let healthy: Vec<usize> = (0..n_levels).filter(|&l| counts[l] >= 2).collect();
    for l in 0..n_levels {
        if counts[l] == 1 {
            if let Some(&best) = healthy.iter().min_by(|&&x, &&y| {
                let dx = counts[x].abs_diff(counts[l]);
                let dy = counts[y].abs_diff(counts[l]);
                dx.cmp(&dy).then(counts[y].cmp(&counts[x])).then(x.cmp(&y))
            }) {
                log::debug!("collapsing singleton level {l} of {name:?} into level {best}");
                target[l] = best as u32;
            }
        }
    }

    let mut sums = vec![[0.0f64; 2]; n_levels];
    let mut eff_counts = vec![0usize; n_levels];
    for (s, &c) in cs.iter().zip(codes) {
        let t = target[c as usize] as usize;
        sums[t][0] += s[0];
        sums[t][1] += s[1];
        eff_counts[t] += 1;
    }

    let observed: Vec<usize> = (0..n_levels).filter(|&l| eff_counts[l] > 0).collect();
    let c_obs = observed.len();
    if c_obs < 2 {
        return TestOutcome::degenerate();
    }

    let mut stat = 0.0;
    for &l in &observed {
        stat += quad_form(inv, sums[l]) / eff_counts[l] as f64;
    }
    let df = (rank * (c_obs - 1)) as f64;
    TestOutcome { statistic: stat, df, p: chi2_sf(stat, df) }
}

fn suplm_test(cs: &[[f64; 2]], values: &[f64], inv: &[f64; 4], rank: usize, trim: f64) -> TestOutcome {
    let m = cs.len();
    let mut order: Vec<usize> = (0..m).collect();
    order.sort_by(|&i, &j| values[i].partial_cmp(&values[j]).expect("finite values").then(i.cmp(&j)));

    let lo = ((trim * m as f64).ceil() as usize).max(1);
    let hi = ((1.0 - trim) * m as f64).floor() as usize;
    let hi = hi.min(m - 1);
    if lo > hi {
        return TestOutcome::degenerate();
    }

    let mut best = f64::NEG_INFINITY;
    let mut candidates = 0usize;
    let mut cum = [0.0f64; 2];
    for (pos, &idx) in order.iter().enumerate() {
        cum[0] += cs[idx][0];
        cum[1] += cs[idx][1];
        let i = pos + 1;
        if i < lo || i > hi {
            continue;
        }
        // Breakpoints only between distinct values.
        if values[order[pos]] == values[order[pos + 1]] {
            continue;
        }
        candidates += 1;
        let lm = quad_form(inv, cum) * m as f64 / (i as f64 * (m - i) as f64);
        if lm > best {
            best = lm;
        }
    }
    if candidates == 0 {
        return TestOutcome::degenerate();
    }
    let df = rank as f64;
    let pointwise = chi2_sf(best, df);
    TestOutcome { statistic: best, df, p: (candidates as f64 * pointwise).min(1.0) }
}

/// Outcome of candidate screening in one node.
#[derive(Debug, Clone)]
pub struct Selection {
    pub test_log: Vec<CandidateTest>,
    /// Index into `ds.vars` of the winning candidate, if any cleared alpha.
    pub best: Option<usize>,
}

fn is_constant(var: &SplitVariable, members: &[usize]) -> bool {
    match &var.data {
        SplitData::Categorical { codes, .. } => {
            let first = codes[members[0]];
            members.iter().all(|&r| codes[r] == first)
        }
        SplitData::Numeric { values } => {
            let first = values[members[0]];
            members.iter().all(|&r| values[r] == first)
        }
    }
}

/// Test every candidate, Bonferroni-adjust by the number actually tested,
/// and pick the smallest adjusted p-value below alpha (first wins ties).
pub fn select_variable(ds: &Dataset, members: &[usize], fit: &NbFit, cfg: &TreeConfig) -> Selection {
    let sample: Vec<u64> = members.iter().map(|&i| ds.y[i]).collect();
    let scores = score_contributions(&sample, fit);

    let outcomes: Vec<Option<TestOutcome>> = ds
        .vars
        .iter()
        .map(|var| {
            if is_constant(var, members) {
                None
            } else {
                Some(fluctuation_test(&scores, var, members, cfg.trim))
            }
        })
        .collect();

    let n_tested = outcomes.iter().flatten().count();
    let mut test_log = Vec::with_capacity(ds.vars.len());
    let mut best: Option<(usize, f64)> = None;
    for (idx, (var, outcome)) in ds.vars.iter().zip(&outcomes).enumerate() {
        let row = match outcome {
            None => CandidateTest {
                variable: var.name.clone(),
                statistic: 0.0,
                df: 0.0,
                p_raw: 1.0,
                p_adjusted: 1.0,
                tested: false,
            },
            Some(t) => {
                let p_adjusted = if cfg.bonferroni {
                    (t.p * n_tested as f64).min(1.0)
                } else {
                    t.p
                };
                if p_adjusted < cfg.alpha && best.is_none_or(|(_, bp)| p_adjusted < bp) {
                    best = Some((idx, p_adjusted));
                }
                CandidateTest {
                    variable: var.name.clone(),
                    statistic: t.statistic,
                    df: t.df,
                    p_raw: t.p,
                    p_adjusted,
                    tested: true,
                }
            }
        };
        test_log.push(row);
    }
    Selection { test_log, best: best.map(|(i, _)| i) }
}
