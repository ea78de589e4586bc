use crate::artifacts::{Artifacts, COUNTS, VOCAB};
use crate::config::PipelineConfig;
use rayon::prelude::*;
use tmtree::corpus::{build_vocabulary, preprocess_text, to_counts, DocTermCounts, StopList};
use tmtree::Result;

/// Turn the input table into the shared vocabulary and per-document term
/// counts. Deterministic: identical input and config give identical bytes.
pub fn preprocess(cfg: &PipelineConfig) -> Result<()> {
    let reports = super::load_input(cfg)?;
    let stoplist = match &cfg.stoplist {
        Some(path) => StopList::from_path(path)?,
        None => StopList::default_english(),
    };

    let processed: Vec<Vec<String>> = reports
        .par_iter()
        .map(|r| preprocess_text(&r.summary, &stoplist))
        .collect();
    let vocab = build_vocabulary(&processed, cfg.min_count)?;
    let counts: Vec<DocTermCounts> = reports
        .iter()
        .zip(&processed)
        .map(|(r, tokens)| to_counts(&r.id, tokens, &vocab))
        .collect();
    let empty = counts.iter().filter(|c| c.is_empty()).count();

    let artifacts = Artifacts::new(&cfg.out_dir)?;
    artifacts.write_json(VOCAB, &vocab)?;
    artifacts.write_counts(COUNTS, &counts)?;

    println!(
        "preprocess: {} documents, vocabulary size {}, {} empty after preprocessing",
        counts.len(),
        vocab.size(),
        empty
    );
    Ok(())
}
