//! Latent Dirichlet Allocation fitted by variational EM.
//!
//! Topics are point-estimated topic--word distributions (no prior on the
//! rows, so the usual eta hyperparameter stays unspecified); per-document
//! topic proportions carry a symmetric Dirichlet(kappa) prior. With kappa
//! near zero the variational posterior concentrates on a single topic per
//! document, which is what makes the downstream hard assignments safe.
//!
//! Topic ids are 1-based in all outputs; id 0 is reserved for documents that
//! are empty after preprocessing and never enters the fit itself.

use crate::corpus::{DocTermCounts, Vocabulary};
use crate::error::{Error, Result};
use crate::numeric::{digamma, ln_gamma, logsumexp};
use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use std::collections::HashMap;

/// Tuning knobs of the variational fit. Defaults are the production
/// configuration: 100 topics and a near-degenerate proportion prior.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct LdaConfig {
    pub s: usize,
    pub kappa: f64,
    pub tol: f64,
    pub max_iter: usize,
    pub seed: u64,
}

impl Default for LdaConfig {
    fn default() -> Self {
        LdaConfig { s: 100, kappa: 0.001, tol: 1e-5, max_iter: 100, seed: 0 }
    }
}

/// Inner-loop (per-document coordinate ascent) stopping rule.
const GAMMA_TOL: f64 = 1e-5;
const GAMMA_MAX_ITER: usize = 200;

/// Fitted topic model: `beta` is the s x q row-stochastic topic--word matrix
/// in row-major order.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(from = "LdaModelJson", into = "LdaModelJson")]
pub struct LdaModel {
    pub s: usize,
    pub q: usize,
    pub kappa: f64,
    pub seed: u64,
    pub beta: Vec<f64>,
    pub elbo_trace: Vec<f64>,
    /// The topic--word prior parameter eta is deliberately unused: beta is a
    /// point parameter under variational EM.
    pub eta_note: String,
}

#[derive(Serialize, Deserialize)]
struct LdaModelJson {
    s: usize,
    kappa: f64,
    seed: u64,
    beta: Vec<f64>,
    elbo_trace: Vec<f64>,
}

impl From<LdaModelJson> for LdaModel {
    fn from(j: LdaModelJson) -> LdaModel {
        let q = j.beta.len().checked_div(j.s).unwrap_or(0);
        LdaModel {
            s: j.s,
            q,
            kappa: j.kappa,
            seed: j.seed,
            beta: j.beta,
            elbo_trace: j.elbo_trace,
            eta_note: eta_note(),
        }
    }
}

impl From<LdaModel> for LdaModelJson {
    fn from(m: LdaModel) -> LdaModelJson {
        LdaModelJson { s: m.s, kappa: m.kappa, seed: m.seed, beta: m.beta, elbo_trace: m.elbo_trace }
    }
}

fn eta_note() -> String {
    "eta unspecified: beta is a point parameter".to_string()
}

impl LdaModel {
    pub fn beta_row(&self, t: usize) -> &[f64] {
        &self.beta[t * self.q..(t + 1) * self.q]
    }
}

/// Variational posterior of one document.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct DocPosterior {
    pub doc_id: String,
    pub gamma: Vec<f64>,
    pub pi_hat: Vec<f64>,
    /// 1-based topic id (0 is reserved for no-text documents and never
    /// produced here). Lowest index wins ties.
    pub hard_topic: usize,
    pub max_pi: f64,
}

impl DocPosterior {
    fn from_gamma(doc_id: &str, gamma: Vec<f64>) -> DocPosterior {
        let total: f64 = gamma.iter().sum();
        let pi_hat: Vec<f64> = gamma.iter().map(|g| g / total).collect();
        let mut best = 0;
        for (t, &p) in pi_hat.iter().enumerate() {
            if p > pi_hat[best] {
                best = t;
            }
        }
        DocPosterior { doc_id: doc_id.to_string(), gamma, pi_hat: pi_hat.clone(), hard_topic: best + 1, max_pi: pi_hat[best] }
    }
}

/// Initialize topics as corpus-wide empirical term frequencies perturbed by
/// multiplicative uniform noise in [0.5, 1.5], renormalized per row.
pub fn init_lda(docs: &[DocTermCounts], q: usize, s: usize, kappa: f64, seed: u64) -> Result<LdaModel> {
    if s < 1 {
        return Err(Error::Config("number of topics must be >= 1".into()));
    }
    if !kappa.is_finite() || kappa <= 0.0 {
        return Err(Error::Config("kappa must be > 0".into()));
    }
    if docs.is_empty() {
        return Err(Error::Data("empty corpus".into()));
    }
    if s > docs.len() {
        log::warn!("more topics ({s}) than documents ({})", docs.len());
    }
    let mut freq = vec![1e-10; q];
    for doc in docs {
        for &(u, c) in &doc.entries {
            freq[u as usize] += c as f64;
        }
    }
    let total: f64 = freq.iter().sum();
    for f in &mut freq {
        *f /= total;
    }

    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut beta = Vec::with_capacity(s * q);
    for _ in 0..s {
        let mut row: Vec<f64> = freq.iter().map(|&f| f * rng.gen_range(0.5..1.5)).collect();
        let z: f64 = row.iter().sum();
        for b in &mut row {
            *b /= z;
        }
        beta.extend_from_slice(&row);
    }
    Ok(LdaModel {
        s,
        q,
        kappa,
        seed,
        beta,
        elbo_trace: Vec::new(),
        eta_note: eta_note(),
    })
}

/// Result of one document E-step: the variational Dirichlet parameter, the
/// per-distinct-term topic responsibilities (one s-vector per entry of the
/// document, in entry order) and the document's evidence lower bound
/// contribution.
pub struct EStep {
    pub gamma: Vec<f64>,
    pub phi: Vec<Vec<f64>>,
    pub bound: f64,
}

/// Coordinate ascent for one document at fixed topics.
pub fn e_step(doc: &DocTermCounts, model: &LdaModel) -> Result<EStep> {
    if doc.is_empty() {
        return Err(Error::Data(format!("document {} is empty", doc.doc_id)));
    }
    let ln_beta_by_term = transpose_log_beta(&model.beta, model.s, model.q);
    let gamma0 = vec![model.kappa + doc.total as f64 / model.s as f64; model.s];
    Ok(e_step_inner(doc, model.s, model.kappa, &ln_beta_by_term, gamma0, GAMMA_MAX_ITER))
}

/// Log topic--word matrix in term-major order (q x s): the E-step scans all
/// topics for one term at a time, and the transposed layout keeps those
/// reads contiguous.
fn transpose_log_beta(beta: &[f64], s: usize, q: usize) -> Vec<f64> {
    let mut out = vec![0.0; s * q];
    for t in 0..s {
        for u in 0..q {
            out[u * s + t] = beta[t * q + u].ln();
        }
    }
    out
}

fn e_step_inner(
    doc: &DocTermCounts,
    s: usize,
    kappa: f64,
    ln_beta_by_term: &[f64],
    mut gamma: Vec<f64>,
    max_rounds: usize,
) -> EStep {
    let entries = &doc.entries;
    let mut phi = vec![vec![0.0; s]; entries.len()];
    let mut dig = vec![0.0; s];
    let mut logs = vec![0.0; s];

    for _ in 0..max_rounds {
        for t in 0..s {
            dig[t] = digamma(gamma[t]);
        }
        let mut new_gamma = vec![kappa; s];
        for (m, &(u, c)) in entries.iter().enumerate() {
            let lnb = &ln_beta_by_term[u as usize * s..(u as usize + 1) * s];
            for t in 0..s {
                logs[t] = lnb[t] + dig[t];
            }
            let z = logsumexp(&logs);
            let row = &mut phi[m];
            for t in 0..s {
                row[t] = (logs[t] - z).exp();
                new_gamma[t] += c as f64 * row[t];
            }
        }
        let delta: f64 =
            gamma.iter().zip(&new_gamma).map(|(a, b)| (a - b).abs()).sum::<f64>() / s as f64;
        gamma = new_gamma;
        if delta < GAMMA_TOL {
            break;
        }
    }

    // Evidence lower bound with the final (phi, gamma) pair.
    let gamma_total: f64 = gamma.iter().sum();
    let dig_total = digamma(gamma_total);
    for t in 0..s {
        dig[t] = digamma(gamma[t]);
    }
    let mut bound = ln_gamma(s as f64 * kappa) - s as f64 * ln_gamma(kappa) - ln_gamma(gamma_total);
    for t in 0..s {
        let e_log_pi = dig[t] - dig_total;
        bound += (kappa - gamma[t]) * e_log_pi + ln_gamma(gamma[t]);
    }
    for (m, &(u, c)) in entries.iter().enumerate() {
        let row = &phi[m];
        let lnb = &ln_beta_by_term[u as usize * s..(u as usize + 1) * s];
        for t in 0..s {
            let p = row[t];
            if p > 0.0 {
                bound += c as f64 * p * (dig[t] - dig_total + lnb[t] - p.ln());
            }
        }
    }
    EStep { gamma, phi, bound }
}

/// Topic--word sufficient statistics accumulated over documents.
pub struct SuffStats {
    pub s: usize,
    pub q: usize,
    pub counts: Vec<f64>,
}

impl SuffStats {
    pub fn new(s: usize, q: usize) -> SuffStats {
        SuffStats { s, q, counts: vec![0.0; s * q] }
    }

    pub fn accumulate(&mut self, doc: &DocTermCounts, phi: &[Vec<f64>]) {
        for (&(u, c), row) in doc.entries.iter().zip(phi) {
            for (t, &p) in row.iter().enumerate() {
                self.counts[t * self.q + u as usize] += c as f64 * p;
            }
        }
    }
}

/// M-step: re-estimate topics from the accumulated statistics with a 1e-10
/// floor so every entry stays strictly positive.
pub fn m_step(stats: &SuffStats) -> Vec<f64> {
    const EPS: f64 = 1e-10;
    let mut beta = vec![0.0; stats.s * stats.q];
    for t in 0..stats.s {
        let row = &stats.counts[t * stats.q..(t + 1) * stats.q];
        let z: f64 = row.iter().map(|&v| v + EPS).sum();
        for (u, &v) in row.iter().enumerate() {
            beta[t * stats.q + u] = (v + EPS) / z;
        }
    }
    beta
}

/// Fit by alternating E and M steps until the relative ELBO change drops
/// below `tol`. Empty documents are excluded; posteriors are returned for the
/// fitted documents in input order.
pub fn fit_lda(
    docs: &[DocTermCounts],
    q: usize,
    cfg: &LdaConfig,
) -> Result<(LdaModel, Vec<DocPosterior>)> {
    let model = init_lda(
        &docs.iter().filter(|d| !d.is_empty()).cloned().collect::<Vec<_>>(),
        q,
        cfg.s,
        cfg.kappa,
        cfg.seed,
    )?;
    fit_lda_with_init(docs, cfg, model)
}

/// Run the EM loop from an explicit starting model. Exposed so callers can
/// study initialization effects (for instance topic relabeling).
pub fn fit_lda_with_init(
    docs: &[DocTermCounts],
    cfg: &LdaConfig,
    mut model: LdaModel,
) -> Result<(LdaModel, Vec<DocPosterior>)> {
    if !cfg.tol.is_finite() || cfg.tol <= 0.0 {
        return Err(Error::Config("tol must be > 0".into()));
    }
    let fitted: Vec<&DocTermCounts> = docs.iter().filter(|d| !d.is_empty()).collect();
    if fitted.is_empty() {
        return Err(Error::Data("no non-empty documents to fit".into()));
    }
    let s = model.s;
    let q = model.q;
    let kappa = model.kappa;

    // Each E-step runs per document from two starts and keeps the better
    // bound: the uniform (fresh) start lets documents migrate as the topics
    // sharpen -- under a near-degenerate kappa a warm start alone would
    // freeze every document in its first-iteration topic -- while the warm
    // candidate guarantees the bound never falls below the previous
    // iteration's value, keeping the ELBO trace monotone. One warm round is
    // enough for that guarantee (a single phi update from the stored gamma
    // already dominates the old state's bound at the new topics), so the
    // warm path stays cheap.
    let mut gammas: Vec<Vec<f64>> = Vec::new();
    let mut elbo_trace = Vec::new();
    let mut prev = f64::NEG_INFINITY;

    for iteration in 1..=cfg.max_iter {
        let ln_beta_by_term = transpose_log_beta(&model.beta, s, q);
        let results: Vec<EStep> = fitted
            .par_iter()
            .enumerate()
            .map(|(d, doc)| {
                let g0 = vec![kappa + doc.total as f64 / s as f64; s];
                let fresh = e_step_inner(doc, s, kappa, &ln_beta_by_term, g0, GAMMA_MAX_ITER);
                match gammas.get(d) {
                    Some(g_prev) => {
                        let warm =
                            e_step_inner(doc, s, kappa, &ln_beta_by_term, g_prev.clone(), 1);
                        if warm.bound >= fresh.bound {
                            warm
                        } else {
                            fresh
                        }
                    }
                    None => fresh,
                }
            })
            .collect();

        let mut stats = SuffStats::new(s, q);
        let mut elbo = 0.0;
        for (doc, r) in fitted.iter().zip(&results) {
            stats.accumulate(doc, &r.phi);
            elbo += r.bound;
        }
        if !elbo.is_finite() {
            return Err(Error::Numerical(format!("non-finite ELBO at iteration {iteration}")));
        }
        elbo_trace.push(elbo);
        gammas = results.into_iter().map(|r| r.gamma).collect();

        let done = prev.is_finite() && ((elbo - prev) / prev.abs()).abs() < cfg.tol;
        prev = elbo;
        if done || iteration == cfg.max_iter {
            break;
        }
        model.beta = m_step(&stats);
    }

    model.elbo_trace = elbo_trace;
    let posteriors = fitted
        .iter()
        .zip(gammas)
        .map(|(doc, g)| DocPosterior::from_gamma(&doc.doc_id, g))
        .collect();
    Ok((model, posteriors))
}

/// Hard topic assignment table: every fitted document maps to its argmax
/// topic; empty-text documents map to the reserved topic 0.
#[derive(Debug, Clone)]
pub struct Assignments {
    map: HashMap<String, usize>,
    active: Vec<usize>,
}

impl Assignments {
    pub fn topic_of(&self, doc_id: &str) -> Option<usize> {
        self.map.get(doc_id).copied()
    }

    /// Topic ids that received at least one document, ascending. Each one
    /// becomes a binary split-candidate variable named `topic_<t>`.
    pub fn active_topics(&self) -> &[usize] {
        &self.active
    }

    pub fn len(&self) -> usize {
        self.map.len()
    }

    pub fn is_empty(&self) -> bool {
        self.map.is_empty()
    }
}

pub fn hard_assign(posteriors: &[DocPosterior], empty_doc_ids: &[String]) -> Assignments {
    let mut map = HashMap::with_capacity(posteriors.len() + empty_doc_ids.len());
    let mut active: Vec<usize> = Vec::new();
    for p in posteriors {
        map.insert(p.doc_id.clone(), p.hard_topic);
        if !active.contains(&p.hard_topic) {
            active.push(p.hard_topic);
        }
    }
    for id in empty_doc_ids {
        map.insert(id.clone(), 0);
        if !active.contains(&0) {
            active.push(0);
        }
    }
    active.sort_unstable();
    Assignments { map, active }
}

/// Frequency table of one topic: document count and the top-k terms by raw
/// frequency within the documents hard-assigned to it (ties lexicographic).
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct TopicTerms {
    pub topic: usize,
    pub number_doc: usize,
    pub terms: Vec<(String, u64)>,
}

pub fn topic_terms(
    docs: &[DocTermCounts],
    assignments: &Assignments,
    vocab: &Vocabulary,
    topic: usize,
    k: usize,
) -> TopicTerms {
    let mut freq: HashMap<u32, u64> = HashMap::new();
    let mut number_doc = 0;
    for doc in docs {
        if assignments.topic_of(&doc.doc_id) == Some(topic) {
            number_doc += 1;
            for &(u, c) in &doc.entries {
                *freq.entry(u).or_insert(0) += c as u64;
            }
        }
    }
    let mut terms: Vec<(String, u64)> =
        freq.into_iter().map(|(u, c)| (vocab.term(u).to_string(), c)).collect();
    terms.sort_by(|a, b| b.1.cmp(&a.1).then_with(|| a.0.cmp(&b.0)));
    terms.truncate(k);
    TopicTerms { topic, number_doc, terms }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::corpus::build_vocabulary;
    use approx::{assert_abs_diff_eq, assert_relative_eq};

    fn doc(id: &str, entries: &[(u32, u32)]) -> DocTermCounts {
        DocTermCounts {
            doc_id: id.to_string(),
            entries: entries.to_vec(),
            total: entries.iter().map(|&(_, c)| c).sum(),
        }
    }

    fn row_sums(model: &LdaModel) -> Vec<f64> {
        (0..model.s).map(|t| model.beta_row(t).iter().sum()).collect()
    }

    #[test]
    fn init_is_row_stochastic_and_deterministic() {
        let docs = vec![doc("a", &[(0, 2), (2, 1)]), doc("b", &[(1, 3)])];
        let m1 = init_lda(&docs, 3, 3, 0.001, 42).unwrap();
        let m2 = init_lda(&docs, 3, 3, 0.001, 42).unwrap();
        assert_eq!(m1.beta, m2.beta);
        for sum in row_sums(&m1) {
            assert_abs_diff_eq!(sum, 1.0, epsilon = 1e-10);
        }
        assert!(m1.beta.iter().all(|&b| b > 0.0));

        let single = init_lda(&docs, 3, 1, 0.001, 7).unwrap();
        for sum in row_sums(&single) {
            assert_abs_diff_eq!(sum, 1.0, epsilon = 1e-10);
        }
    }

    #[test]
    fn e_step_single_topic_closed_form() {
        let docs = vec![doc("a", &[(0, 2), (1, 3)])];
        let model = init_lda(&docs, 2, 1, 0.5, 0).unwrap();
        let r = e_step(&docs[0], &model).unwrap();
        // s = 1 forces phi = 1 and gamma = kappa + q_d.
        assert_eq!(r.phi.len(), 2);
        for row in &r.phi {
            assert_eq!(row, &[1.0]);
        }
        assert_abs_diff_eq!(r.gamma[0], 0.5 + 5.0, epsilon = 1e-12);
    }

    #[test]
    fn e_step_degenerate_support_forces_topic() {
        // Terms 0,1 belong to topic 1; 2,3 to topic 2. A document using only
        // topic-2 terms must be hard-assigned topic 2.
        let mut model = LdaModel {
            s: 2,
            q: 4,
            kappa: 0.001,
            seed: 0,
            beta: vec![0.499999995, 0.499999995, 5e-9, 5e-9, 5e-9, 5e-9, 0.499999995, 0.499999995],
            elbo_trace: vec![],
            eta_note: String::new(),
        };
        model.eta_note = "test".into();
        let d = doc("x", &[(2, 1), (3, 2)]);
        let r = e_step(&d, &model).unwrap();
        let post = DocPosterior::from_gamma("x", r.gamma);
        assert_eq!(post.hard_topic, 2);
        assert!(post.max_pi > 0.99);
    }

    /// Independent oracle: iterate the two mean-field update equations in
    /// plain form (no log-space tricks) to a fixed point and compare gamma.
    #[test]
    fn e_step_matches_hand_iterated_fixed_point() {
        let beta = [0.7, 0.3, 0.2, 0.8]; // 2x2 row-major
        let model = LdaModel {
            s: 2,
            q: 2,
            kappa: 0.4,
            seed: 0,
            beta: beta.to_vec(),
            elbo_trace: vec![],
            eta_note: String::new(),
        };
        let d = doc("x", &[(0, 2), (1, 1)]);
        let r = e_step(&d, &model).unwrap();

        let kappa = 0.4;
        let mut gamma = [kappa + 1.5, kappa + 1.5];
        let mut phi = [[0.0f64; 2]; 2];
        for _ in 0..500 {
            let d0 = digamma(gamma[0]);
            let d1 = digamma(gamma[1]);
            for (m, &u) in [0usize, 1].iter().enumerate() {
                let w0 = beta[u] * d0.exp();
                let w1 = beta[2 + u] * d1.exp();
                phi[m] = [w0 / (w0 + w1), w1 / (w0 + w1)];
            }
            gamma = [
                kappa + 2.0 * phi[0][0] + 1.0 * phi[1][0],
                kappa + 2.0 * phi[0][1] + 1.0 * phi[1][1],
            ];
        }
        // e_step stops at mean abs gamma change < 1e-5, so agreement with the
        // fully converged oracle holds to about that scale.
        assert_relative_eq!(r.gamma[0], gamma[0], max_relative = 1e-4);
        assert_relative_eq!(r.gamma[1], gamma[1], max_relative = 1e-4);
        for (m, row) in r.phi.iter().enumerate() {
            assert_relative_eq!(row[0], phi[m][0], max_relative = 1e-3);
            let sum: f64 = row.iter().sum();
            assert_abs_diff_eq!(sum, 1.0, epsilon = 1e-10);
        }
    }

    /// The returned document bound must never exceed the exact log evidence
    /// log P(w | beta, kappa), computed by enumerating all word-topic
    /// assignments with the proportions integrated out.
    #[test]
    fn doc_bound_is_a_lower_bound_on_exact_evidence() {
        let beta = [0.4, 0.3, 0.2, 0.1, 0.05, 0.15, 0.35, 0.45]; // 2x4 row-major
        let s = 2usize;
        let q = 4usize;
        for &kappa in &[0.001, 0.1, 1.0] {
            let model = LdaModel {
                s,
                q,
                kappa,
                seed: 0,
                beta: beta.to_vec(),
                elbo_trace: vec![],
                eta_note: String::new(),
            };
            for entries in [
                vec![(0u32, 1u32)],
                vec![(1, 2)],
                vec![(0, 1), (3, 1)],
                vec![(1, 1), (2, 2)],
                vec![(0, 1), (1, 1), (2, 1)],
            ] {
                let d = doc("x", &entries);
                let words: Vec<u32> = entries
                    .iter()
                    .flat_map(|&(u, c)| std::iter::repeat_n(u, c as usize))
                    .collect();
                let q_d = words.len();
                let mut terms = Vec::new();
                for mask in 0..s.pow(q_d as u32) {
                    let mut rest = mask;
                    let mut counts = vec![0usize; s];
                    let mut log_w = 0.0;
                    for &w in &words {
                        let z = rest % s;
                        rest /= s;
                        counts[z] += 1;
                        log_w += beta[z * q + w as usize].ln();
                    }
                    let mut log_prior =
                        ln_gamma(s as f64 * kappa) - ln_gamma(s as f64 * kappa + q_d as f64);
                    for &c in &counts {
                        log_prior += ln_gamma(kappa + c as f64) - ln_gamma(kappa);
                    }
                    terms.push(log_w + log_prior);
                }
                let evidence = logsumexp(&terms);
                let bound = e_step(&d, &model).unwrap().bound;
                assert!(
                    bound <= evidence + 1e-9,
                    "bound {bound} exceeds evidence {evidence} (kappa={kappa}, doc={entries:?})"
                );
                // The bound is not vacuous either.
                assert!(bound > evidence - 5.0, "bound {bound} far below evidence {evidence}");
            }
        }
    }

    #[test]
    fn m_step_normalizes_and_floors() {
        let mut stats = SuffStats::new(2, 3);
        stats.counts = vec![10.0, 0.0, 0.0, 0.0, 0.0, 5.0];
        let beta = m_step(&stats);
        for t in 0..2 {
            let sum: f64 = beta[t * 3..(t + 1) * 3].iter().sum();
            assert_abs_diff_eq!(sum, 1.0, epsilon = 1e-12);
        }
        // Unseen terms keep a positive floor.
        assert!(beta[1] > 0.0 && beta[1] < 1e-9);
        assert!(beta[0] > 0.999);

        // Matches an independent normalization.
        let expect = (0.0 + 1e-10) / (10.0 + 3.0 * 1e-10);
        assert_relative_eq!(beta[1], expect, max_relative = 1e-12);
    }

    fn two_topic_corpus(n_docs: usize, len: usize, seed: u64) -> (Vec<DocTermCounts>, Vec<usize>) {
        // Topic 1 uses terms 0..3, topic 2 uses terms 4..7, disjointly.
        use rand::Rng;
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut docs = Vec::new();
        let mut labels = Vec::new();
        for i in 0..n_docs {
            let topic = rng.gen_range(0..2);
            labels.push(topic + 1);
            let mut counts = [0u32; 8];
            for _ in 0..len {
                let term = 4 * topic + rng.gen_range(0..4);
                counts[term] += 1;
            }
            let entries: Vec<(u32, u32)> = counts
                .iter()
                .enumerate()
                .filter(|&(_, &c)| c > 0)
                .map(|(u, &c)| (u as u32, c))
                .collect();
            docs.push(doc(&format!("d{i}"), &entries));
        }
        (docs, labels)
    }

    #[test]
    fn fit_recovers_disjoint_topics_up_to_permutation() {
        let (docs, labels) = two_topic_corpus(200, 20, 99);
        let cfg = LdaConfig { s: 2, kappa: 0.001, tol: 1e-6, max_iter: 100, seed: 31 };
        let (model, posteriors) = fit_lda(&docs, 8, &cfg).unwrap();

        // ELBO monotone within slack.
        for w in model.elbo_trace.windows(2) {
            assert!(w[1] >= w[0] - 1e-8, "ELBO decreased: {} -> {}", w[0], w[1]);
        }

        // Accuracy under the best of the two label permutations.
        let assigned: Vec<usize> = posteriors.iter().map(|p| p.hard_topic).collect();
        let direct = assigned.iter().zip(&labels).filter(|(a, b)| a == b).count();
        let flipped = assigned.iter().zip(&labels).filter(|(a, b)| 3 - **a == **b).count();
        let acc = direct.max(flipped) as f64 / labels.len() as f64;
        assert!(acc >= 0.95, "accuracy {acc}");

        // Near-degenerate prior gives near-one max_pi.
        let mut maxes: Vec<f64> = posteriors.iter().map(|p| p.max_pi).collect();
        maxes.sort_by(|a, b| a.partial_cmp(b).unwrap());
        assert!(maxes[maxes.len() / 2] >= 0.95);
    }

    #[test]
    fn fit_single_topic_assigns_everything_to_topic_one() {
        let (docs, _) = two_topic_corpus(40, 10, 5);
        let cfg = LdaConfig { s: 1, kappa: 0.001, tol: 1e-5, max_iter: 20, seed: 1 };
        let (_, posteriors) = fit_lda(&docs, 8, &cfg).unwrap();
        for p in &posteriors {
            assert_eq!(p.hard_topic, 1);
            assert_abs_diff_eq!(p.max_pi, 1.0, epsilon = 1e-12);
        }
    }

    #[test]
    fn fit_is_deterministic_and_skips_empty_docs() {
        let (mut docs, _) = two_topic_corpus(30, 12, 8);
        docs.push(doc("empty", &[]));
        let cfg = LdaConfig { s: 2, kappa: 0.001, tol: 1e-5, max_iter: 50, seed: 3 };
        let (m1, p1) = fit_lda(&docs, 8, &cfg).unwrap();
        let (m2, p2) = fit_lda(&docs, 8, &cfg).unwrap();
        assert_eq!(m1.beta, m2.beta);
        assert_eq!(p1.len(), 30);
        assert_eq!(p2.len(), 30);
        assert!(p1.iter().all(|p| p.doc_id != "empty"));
    }

    #[test]
    fn posterior_normalization_invariants() {
        let (docs, _) = two_topic_corpus(50, 15, 2);
        let cfg = LdaConfig { s: 3, kappa: 0.01, tol: 1e-5, max_iter: 30, seed: 11 };
        let (model, posteriors) = fit_lda(&docs, 8, &cfg).unwrap();
        for p in &posteriors {
            let sum: f64 = p.pi_hat.iter().sum();
            assert_abs_diff_eq!(sum, 1.0, epsilon = 1e-10);
            assert!(p.gamma.iter().all(|&g| g >= model.kappa));
            let best = p
                .pi_hat
                .iter()
                .enumerate()
                .max_by(|a, b| a.1.partial_cmp(b.1).unwrap())
                .unwrap()
                .0;
            assert_eq!(p.hard_topic, best + 1);
        }
    }

    #[test]
    fn label_permutation_equivariance() {
        let (docs, _) = two_topic_corpus(60, 15, 44);
        let cfg = LdaConfig { s: 2, kappa: 0.001, tol: 1e-6, max_iter: 40, seed: 9 };
        let init = init_lda(&docs, 8, cfg.s, cfg.kappa, cfg.seed).unwrap();

        let mut swapped = init.clone();
        let row0 = init.beta_row(0).to_vec();
        let row1 = init.beta_row(1).to_vec();
        swapped.beta = [row1, row0].concat();

        let (m1, p1) = fit_lda_with_init(&docs, &cfg, init).unwrap();
        let (m2, p2) = fit_lda_with_init(&docs, &cfg, swapped).unwrap();

        for u in 0..8 {
            assert_relative_eq!(m1.beta_row(0)[u], m2.beta_row(1)[u], max_relative = 1e-9);
            assert_relative_eq!(m1.beta_row(1)[u], m2.beta_row(0)[u], max_relative = 1e-9);
        }
        for (a, b) in p1.iter().zip(&p2) {
            assert_eq!(a.hard_topic, 3 - b.hard_topic);
        }
    }

    #[test]
    fn exchangeability_counts_determine_gamma() {
        // Two token orders of the same bag produce identical DocTermCounts
        // and therefore bit-identical posteriors.
        use crate::corpus::{build_vocabulary, to_counts};
        let tokens_a: Vec<String> = ["fire", "contact", "fire", "enemi"].iter().map(|s| s.to_string()).collect();
        let tokens_b: Vec<String> = ["enemi", "fire", "contact", "fire"].iter().map(|s| s.to_string()).collect();
        let vocab = build_vocabulary(std::slice::from_ref(&tokens_a), 1).unwrap();
        let ca = to_counts("d", &tokens_a, &vocab);
        let cb = to_counts("d", &tokens_b, &vocab);
        assert_eq!(ca, cb);

        let model = init_lda(std::slice::from_ref(&ca), vocab.size(), 2, 0.001, 1).unwrap();
        let ra = e_step(&ca, &model).unwrap();
        let rb = e_step(&cb, &model).unwrap();
        assert_eq!(
            ra.gamma.iter().map(|g| g.to_bits()).collect::<Vec<_>>(),
            rb.gamma.iter().map(|g| g.to_bits()).collect::<Vec<_>>()
        );
    }

    #[test]
    fn hard_assign_partitions_and_tie_breaks() {
        let p1 = DocPosterior::from_gamma("a", vec![0.98, 0.02]);
        assert_eq!(p1.hard_topic, 1);
        let tie = DocPosterior::from_gamma("b", vec![0.5, 0.5]);
        assert_eq!(tie.hard_topic, 1, "exact tie goes to the lowest index");

        let (docs, _) = two_topic_corpus(40, 10, 21);
        let cfg = LdaConfig { s: 2, kappa: 0.001, tol: 1e-5, max_iter: 30, seed: 2 };
        let (_, posteriors) = fit_lda(&docs, 8, &cfg).unwrap();
        let empties = vec!["e1".to_string(), "e2".to_string()];
        let assign = hard_assign(&posteriors, &empties);
        assert_eq!(assign.len(), 42);
        // Dummy columns partition the corpus: membership counts sum to n.
        let total: usize = assign
            .active_topics()
            .iter()
            .map(|&t| {
                posteriors.iter().filter(|p| p.hard_topic == t).count()
                    + if t == 0 { empties.len() } else { 0 }
            })
            .sum();
        assert_eq!(total, 42);
        assert!(assign.active_topics().contains(&0));
        assert_eq!(assign.topic_of("e1"), Some(0));
    }

    #[test]
    fn topic_terms_tallies_and_ties() {
        let vocab = build_vocabulary(
            &[vec!["fire".to_string(), "tf".to_string(), "contact".to_string()]],
            1,
        )
        .unwrap();
        // vocab sorted: contact=0, fire=1, tf=2
        let docs = vec![
            doc("d1", &[(1, 2)]),
            doc("d2", &[(1, 1), (2, 1)]),
            doc("d3", &[(0, 5)]),
        ];
        let posteriors = vec![
            DocPosterior::from_gamma("d1", vec![9.0, 1.0]),
            DocPosterior::from_gamma("d2", vec![9.0, 1.0]),
            DocPosterior::from_gamma("d3", vec![1.0, 9.0]),
        ];
        let assign = hard_assign(&posteriors, &[]);
        let tt = topic_terms(&docs, &assign, &vocab, 1, 10);
        assert_eq!(tt.number_doc, 2);
        assert_eq!(tt.terms, vec![("fire".to_string(), 3), ("tf".to_string(), 1)]);

        // k larger than distinct terms returns everything; empty topic is empty.
        let tt2 = topic_terms(&docs, &assign, &vocab, 2, 99);
        assert_eq!(tt2.terms, vec![("contact".to_string(), 5)]);
        let tt3 = topic_terms(&docs, &assign, &vocab, 7, 10);
        assert_eq!(tt3.number_doc, 0);
        assert!(tt3.terms.is_empty());

        // Tie on frequency resolves lexicographically.
        let tie_docs = vec![doc("d1", &[(1, 2), (2, 2)])];
        let tie_post = vec![DocPosterior::from_gamma("d1", vec![1.0])];
        let tie_assign = hard_assign(&tie_post, &[]);
        let tt4 = topic_terms(&tie_docs, &tie_assign, &vocab, 1, 2);
        assert_eq!(tt4.terms[0].0, "fire");
        assert_eq!(tt4.terms[1].0, "tf");
    }

    #[test]
    fn model_json_schema_roundtrip() {
        let (docs, _) = two_topic_corpus(20, 8, 3);
        let cfg = LdaConfig { s: 2, kappa: 0.001, tol: 1e-4, max_iter: 10, seed: 6 };
        let (model, _) = fit_lda(&docs, 8, &cfg).unwrap();
        let json = serde_json::to_value(&model).unwrap();
        for key in ["s", "kappa", "seed", "beta", "elbo_trace"] {
            assert!(json.get(key).is_some(), "missing key {key}");
        }
        assert!(json.get("eta_note").is_none(), "eta stays out of the artifact");
        let back: LdaModel = serde_json::from_value(json).unwrap();
        assert_eq!(back.q, model.q);
        assert_eq!(back.beta, model.beta);
    }

    #[test]
    fn non_finite_elbo_is_reported() {
        // A zero beta row entry drives ln(0) = -inf into the bound.
        let docs = vec![doc("a", &[(0, 1)])];
        let model = LdaModel {
            s: 1,
            q: 1,
            kappa: 0.1,
            seed: 0,
            beta: vec![0.0],
            elbo_trace: vec![],
            eta_note: String::new(),
        };
        let cfg = LdaConfig { s: 1, kappa: 0.1, tol: 1e-5, max_iter: 5, seed: 0 };
        let err = fit_lda_with_init(&docs, &cfg, model).unwrap_err();
        assert!(err.to_string().contains("iteration 1"), "{err}");
    }
}
