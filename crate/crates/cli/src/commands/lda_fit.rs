use crate::artifacts::{Artifacts, ASSIGNMENTS, COUNTS, MODEL, TOPIC_TERMS, VOCAB};
use crate::config::PipelineConfig;
use tmtree::corpus::Vocabulary;
use tmtree::lda::{fit_lda, hard_assign, topic_terms, LdaConfig};
use tmtree::Result;

/// Fit the topic model and write the model, the hard assignments and the
/// per-topic frequency table.
pub fn lda_fit(cfg: &PipelineConfig) -> Result<()> {
    let artifacts = Artifacts::new(&cfg.out_dir)?;
    let vocab: Vocabulary = artifacts.read_json(VOCAB, "preprocess")?;
    let counts = artifacts.read_counts(COUNTS, "preprocess")?;

    let lda_cfg = LdaConfig {
        s: cfg.lda.s,
        kappa: cfg.lda.kappa,
        tol: cfg.lda.tol,
        max_iter: cfg.lda.max_iter,
        seed: cfg.lda_seed(),
    };
    let (model, posteriors) = fit_lda(&counts, vocab.size(), &lda_cfg)?;
    artifacts.write_json(MODEL, &model)?;

    let empty_ids: Vec<String> = counts
        .iter()
        .filter(|c| c.is_empty())
        .map(|c| c.doc_id.clone())
        .collect();
    let assignments = hard_assign(&posteriors, &empty_ids);

    // assignments.csv in input document order; empty-text docs carry the
    // reserved topic 0 with a degenerate max_pi of 1.
    let mut writer = artifacts.csv_writer(ASSIGNMENTS)?;
    writer.write_record(["doc_id", "hard_topic", "max_pi"])?;
    let by_id: std::collections::HashMap<&str, &tmtree::DocPosterior> =
        posteriors.iter().map(|p| (p.doc_id.as_str(), p)).collect();
    for c in &counts {
        match by_id.get(c.doc_id.as_str()) {
            Some(p) => writer.write_record([
                c.doc_id.as_str(),
                &p.hard_topic.to_string(),
                &format!("{}", p.max_pi),
            ])?,
            None => writer.write_record([c.doc_id.as_str(), "0", "1"])?,
        }
    }
    writer.flush()?;

    // Table of the ten most frequent terms per topic, with the number of
    // assigned documents in the first column.
    let k = 10;
    let mut tt = artifacts.csv_writer(TOPIC_TERMS)?;
    let mut header = vec!["topic".to_string(), "number_doc".to_string()];
    header.extend((1..=k).map(|i| format!("term_{i}")));
    tt.write_record(&header)?;
    for &topic in assignments.active_topics() {
        let row = topic_terms(&counts, &assignments, &vocab, topic, k);
        let mut record = vec![topic.to_string(), row.number_doc.to_string()];
        record.extend(row.terms.iter().map(|(term, freq)| format!("{term} ({freq})")));
        record.resize(2 + k, String::new());
        tt.write_record(&record)?;
    }
    tt.flush()?;

    let final_elbo = model.elbo_trace.last().copied().unwrap_or(f64::NAN);
    println!(
        "lda-fit: {} topics over {} documents, {} EM iterations, final ELBO {final_elbo:.4}, {} active topics",
        model.s,
        posteriors.len(),
        model.elbo_trace.len(),
        assignments.active_topics().len()
    );
    Ok(())
}
