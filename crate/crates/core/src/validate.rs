//! Stability validation of a fitted tree.
//!
//! Resampled datasets at 5/6 of the original size (regular or stratified,
//! with replacement) are refitted with slightly relaxed tuning; every
//! original segment is matched to its best counterpart by the segment-wise
//! Jaccard index over the predicted memberships of all n original reports.
//! Matched-fit parameters, concordance summaries, residual autocorrelations
//! and per-segment fit diagnostics feed the plot-ready CSV artifacts.

use crate::error::{Error, Result};
use crate::mobtree::{grow, Dataset, Tree, TreeConfig};
use crate::negbin::{fit_poisson_intercept, nb_logpmf};
use crate::numeric::{median, quantile};
use chrono::NaiveDateTime;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use std::collections::HashSet;
use std::hash::Hash;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Scheme {
    /// Regular resampling: floor(fraction*n) draws with replacement from all
    /// reports.
    Rrs,
    /// Stratified resampling: floor(fraction*n_k) draws with replacement
    /// from each original segment.
    Srs,
}

impl std::fmt::Display for Scheme {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            Scheme::Rrs => write!(f, "rrs"),
            Scheme::Srs => write!(f, "srs"),
        }
    }
}

/// One resampling study: `b` refits under one scheme.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ResamplePlan {
    pub scheme: Scheme,
    pub b: usize,
    pub fraction: f64,
    pub seed: u64,
    pub refit: TreeConfig,
}

impl ResamplePlan {
    pub fn validate(&self) -> Result<()> {
        if self.b < 1 {
            return Err(Error::Config("need at least one resample".into()));
        }
        if !(self.fraction > 0.0 && self.fraction <= 1.0) {
            return Err(Error::Config(format!("fraction must be in (0,1], got {}", self.fraction)));
        }
        self.refit.validate()
    }
}

/// Best-match record for one (resample, original segment) pair.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct MatchResult {
    pub b: usize,
    pub scheme: Scheme,
    /// Original segment id.
    pub k: usize,
    /// Matched segment id in the resampled tree (argmax Jaccard, lowest id
    /// on ties).
    pub l: usize,
    pub jaccard: f64,
    pub log_mu_l: f64,
    pub theta_l: f64,
}

/// |A intersect B| / |A union B|; both sets empty is an error.
pub fn jaccard<T: Eq + Hash>(a: &HashSet<T>, b: &HashSet<T>) -> Result<f64> {
    if a.is_empty() && b.is_empty() {
        return Err(Error::Data("jaccard of two empty sets".into()));
    }
    let inter = a.intersection(b).count();
    let union = a.len() + b.len() - inter;
    Ok(inter as f64 / union as f64)
}

/// Draw the row multiset for resample `b`. Deterministic in (seed, scheme, b).
pub fn resample(
    n: usize,
    strata: Option<&[Vec<usize>]>,
    plan: &ResamplePlan,
    b: usize,
) -> Vec<usize> {
    let mut rng = ChaCha8Rng::seed_from_u64(plan.seed);
    rng.set_stream(((b as u64) << 1) | matches!(plan.scheme, Scheme::Srs) as u64);
    match (plan.scheme, strata) {
        (Scheme::Rrs, _) => {
            let m = (plan.fraction * n as f64).floor() as usize;
            (0..m).map(|_| rng.gen_range(0..n)).collect()
        }
        (Scheme::Srs, Some(strata)) => {
            let mut rows = Vec::new();
            for stratum in strata {
                let nk = stratum.len();
                let mut mk = (plan.fraction * nk as f64).floor() as usize;
                if nk < 6 {
                    log::debug!("stratum with {nk} reports: drawing max(1, {mk})");
                    mk = mk.max(1);
                }
                for _ in 0..mk {
                    rows.push(stratum[rng.gen_range(0..nk)]);
                }
            }
            rows
        }
        (Scheme::Srs, None) => unreachable!("SRS requires the original segments as strata"),
    }
}

/// Predicted-membership partition of all dataset rows under a tree, as one
/// label per row (1-based segment ids).
fn segment_labels(tree: &Tree, ds: &Dataset) -> Result<Vec<usize>> {
    tree.segments_of(ds)
}

/// Rows of each segment recovered by routing the dataset through the tree.
/// For a freshly grown tree this equals the stored training partition, and
/// unlike the stored member lists it also works for deserialized trees.
fn routed_members(tree: &Tree, ds: &Dataset) -> Result<Vec<Vec<usize>>> {
    let labels = segment_labels(tree, ds)?;
    let mut members = vec![Vec::new(); tree.num_segments()];
    for (row, &k) in labels.iter().enumerate() {
        members[k - 1].push(row);
    }
    Ok(members)
}

/// Match every original segment to its best counterpart in the resampled
/// tree. Membership sets are the predicted segments of all n original
/// (distinct) reports under each tree.
pub fn match_segments(
    original: &Tree,
    resampled: &Tree,
    ds: &Dataset,
    b: usize,
    scheme: Scheme,
) -> Result<Vec<MatchResult>> {
    let orig = segment_labels(original, ds)?;
    let res = segment_labels(resampled, ds)?;
    let r = original.num_segments();
    let r_b = resampled.num_segments();

    let mut joint = vec![vec![0usize; r_b + 1]; r + 1];
    let mut n_orig = vec![0usize; r + 1];
    let mut n_res = vec![0usize; r_b + 1];
    for (&k, &l) in orig.iter().zip(&res) {
        joint[k][l] += 1;
        n_orig[k] += 1;
        n_res[l] += 1;
    }

    let leaves = resampled.leaves();
    let mut out = Vec::with_capacity(r);
    for k in 1..=r {
        let mut best_l = 1;
        let mut best_j = -1.0;
        for l in 1..=r_b {
            let inter = joint[k][l];
            let union = n_orig[k] + n_res[l] - inter;
            let j = if union == 0 { 0.0 } else { inter as f64 / union as f64 };
            if j > best_j {
                best_j = j;
                best_l = l;
            }
        }
        let leaf = leaves[best_l - 1];
        out.push(MatchResult {
            b,
            scheme,
            k,
            l: best_l,
            jaccard: best_j,
            log_mu_l: leaf.fit.log_mu,
            theta_l: leaf.fit.params.theta,
        });
    }
    Ok(out)
}

/// Run a full resampling plan: draw, refit, match; results are ordered by
/// (b, k) and reproducible bit for bit under a fixed seed.
pub fn run_plan(ds: &Dataset, original: &Tree, plan: &ResamplePlan) -> Result<Vec<MatchResult>> {
    plan.validate()?;
    let strata = routed_members(original, ds)?;
    let per_b: Vec<Result<Vec<MatchResult>>> = (0..plan.b)
        .into_par_iter()
        .map(|b| {
            let rows = resample(ds.len(), Some(&strata), plan, b);
            let ds_b = ds.select(&rows);
            let tree_b = grow(&ds_b, &plan.refit)?;
            match_segments(original, &tree_b, ds, b, plan.scheme)
        })
        .collect();
    let mut out = Vec::with_capacity(plan.b * original.num_segments());
    for r in per_b {
        out.extend(r?);
    }
    Ok(out)
}

#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
pub struct Fractions {
    /// Share of matches with Jaccard exactly 1.
    pub coinciding: f64,
    /// Share of matches with Jaccard >= 0.8.
    pub strong: f64,
    pub count: usize,
}

fn fractions(results: &[&MatchResult]) -> Fractions {
    let count = results.len();
    let coinciding = results.iter().filter(|m| m.jaccard == 1.0).count();
    let strong = results.iter().filter(|m| m.jaccard >= 0.8).count();
    Fractions {
        coinciding: coinciding as f64 / count.max(1) as f64,
        strong: strong as f64 / count.max(1) as f64,
        count,
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct SegmentStability {
    pub k: usize,
    pub median: f64,
    pub q1: f64,
    pub q3: f64,
    pub count: usize,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct StabilitySummary {
    pub pooled: Fractions,
    pub per_scheme: Vec<(Scheme, Fractions)>,
    pub per_segment: Vec<SegmentStability>,
}

/// Pooled and per-scheme concordance fractions plus per-segment quartiles of
/// the matched Jaccard values.
pub fn stability_summary(results: &[MatchResult]) -> StabilitySummary {
    let all: Vec<&MatchResult> = results.iter().collect();
    let pooled = fractions(&all);
    let mut per_scheme = Vec::new();
    for scheme in [Scheme::Rrs, Scheme::Srs] {
        let subset: Vec<&MatchResult> = results.iter().filter(|m| m.scheme == scheme).collect();
        if !subset.is_empty() {
            per_scheme.push((scheme, fractions(&subset)));
        }
    }
    let max_k = results.iter().map(|m| m.k).max().unwrap_or(0);
    let mut per_segment = Vec::new();
    for k in 1..=max_k {
        let values: Vec<f64> = results.iter().filter(|m| m.k == k).map(|m| m.jaccard).collect();
        if values.is_empty() {
            continue;
        }
        per_segment.push(SegmentStability {
            k,
            median: median(&values),
            q1: quantile(&values, 0.25),
            q3: quantile(&values, 0.75),
            count: values.len(),
        });
    }
    StabilitySummary { pooled, per_scheme, per_segment }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct SegmentParams {
    pub k: usize,
    /// Matched (log mu, theta) pairs across resamples.
    pub values: Vec<(f64, f64)>,
    pub median_log_mu: f64,
    pub median_theta: f64,
}

/// Distributions of the matched-segment parameter estimates, the data behind
/// the parameter-stability plots.
pub fn parameter_stability(results: &[MatchResult]) -> Vec<SegmentParams> {
    let max_k = results.iter().map(|m| m.k).max().unwrap_or(0);
    (1..=max_k)
        .filter_map(|k| {
            let values: Vec<(f64, f64)> = results
                .iter()
                .filter(|m| m.k == k)
                .map(|m| (m.log_mu_l, m.theta_l))
                .collect();
            if values.is_empty() {
                return None;
            }
            let log_mus: Vec<f64> = values.iter().map(|v| v.0).collect();
            let thetas: Vec<f64> = values.iter().map(|v| v.1).collect();
            Some(SegmentParams {
                k,
                values,
                median_log_mu: median(&log_mus),
                median_theta: median(&thetas),
            })
        })
        .collect()
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct SegmentAcf {
    pub segment: usize,
    pub n: usize,
    /// +-1.96/sqrt(n) reference band.
    pub band: f64,
    /// Lag 1..=max_lag sample autocorrelations of the Pearson residuals in
    /// filing order.
    pub acf: Vec<f64>,
}

/// Per-segment residual autocorrelations in filing order. Segments that are
/// too short or have constant residuals are skipped (logged).
pub fn residual_acf(
    tree: &Tree,
    ds: &Dataset,
    dates: &[NaiveDateTime],
    max_lag: usize,
) -> Result<Vec<SegmentAcf>> {
    if dates.len() != ds.len() {
        return Err(Error::Data("one date per report required".into()));
    }
    let memberships = routed_members(tree, ds)?;
    let mut out = Vec::new();
    for (leaf, rows) in tree.leaves().iter().zip(&memberships) {
        let segment = leaf.segment.expect("numbered leaf");
        let nk = rows.len();
        if nk < max_lag + 2 {
            log::debug!("segment {segment}: {nk} reports < max_lag + 2, skipped");
            continue;
        }
        let mut rows = rows.clone();
        rows.sort_by_key(|&r| (dates[r], r));
        let mu = leaf.fit.params.mu;
        let sd = leaf.fit.params.variance().sqrt();
        let resid: Vec<f64> = rows.iter().map(|&r| (ds.y[r] as f64 - mu) / sd).collect();

        let mean = resid.iter().sum::<f64>() / nk as f64;
        let denom: f64 = resid.iter().map(|e| (e - mean) * (e - mean)).sum();
        if denom <= 0.0 {
            log::debug!("segment {segment}: constant residuals, autocorrelation undefined, skipped");
            continue;
        }
        let acf = (1..=max_lag)
            .map(|h| {
                let num: f64 = (h..nk)
                    .map(|t| (resid[t] - mean) * (resid[t - h] - mean))
                    .sum();
                num / denom
            })
            .collect();
        out.push(SegmentAcf { segment, n: nk, band: 1.96 / (nk as f64).sqrt(), acf });
    }
    Ok(out)
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct SegmentDiagnostics {
    pub segment: usize,
    pub n: usize,
    pub deviance: f64,
    pub df: usize,
    pub dev_ratio: f64,
    /// Mean absolute prediction error |y - mu_k| within the segment.
    pub mae: f64,
    pub loglik_nb: f64,
    pub aic_nb: f64,
    pub bic_nb: f64,
    pub loglik_poisson: f64,
    pub aic_poisson: f64,
    pub bic_poisson: f64,
}

/// Per-segment fit quality: deviance ratio, MAE and the NB-vs-Poisson
/// information criteria.
pub fn fit_diagnostics(tree: &Tree, ds: &Dataset) -> Result<Vec<SegmentDiagnostics>> {
    let memberships = routed_members(tree, ds)?;
    tree.leaves()
        .iter()
        .zip(&memberships)
        .map(|(leaf, rows)| {
            let ys: Vec<u64> = rows.iter().map(|&i| ds.y[i]).collect();
            let mu = leaf.fit.params.mu;
            let mae = ys.iter().map(|&y| (y as f64 - mu).abs()).sum::<f64>() / ys.len() as f64;
            let pois = fit_poisson_intercept(&ys)?;
            Ok(SegmentDiagnostics {
                segment: leaf.segment.expect("numbered leaf"),
                n: ys.len(),
                deviance: leaf.fit.deviance,
                df: leaf.fit.df,
                dev_ratio: leaf.fit.deviance / leaf.fit.df.max(1) as f64,
                mae,
                loglik_nb: leaf.fit.loglik,
                aic_nb: leaf.fit.aic(),
                bic_nb: leaf.fit.bic(),
                loglik_poisson: pois.loglik,
                aic_poisson: pois.aic,
                bic_poisson: pois.bic,
            })
        })
        .collect()
}

/// Sanity helper used by diagnostics consumers: NB log-likelihood recomputed
/// from the pmf (kept close to the serialized fits for cross-checking).
pub fn nb_loglik(sample: &[u64], mu: f64, theta: f64) -> Result<f64> {
    sample
        .iter()
        .map(|&y| nb_logpmf(y, crate::negbin::NbParams { mu, theta }))
        .sum()
}
