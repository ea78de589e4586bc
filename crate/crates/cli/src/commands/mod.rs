//! Pipeline subcommands.

mod lda_fit;
mod preprocess;
mod report;
mod tree_fit;
mod validate;

pub use lda_fit::lda_fit;
pub use preprocess::preprocess;
pub use report::report;
pub use tree_fit::tree_fit;
pub use validate::validate;

use crate::config::PipelineConfig;
use std::collections::HashMap;
use tmtree::corpus::{load_reports, Report};
use tmtree::mobtree::{Dataset, SplitVariable};
use tmtree::{Error, Result};

pub(crate) fn load_input(cfg: &PipelineConfig) -> Result<Vec<Report>> {
    load_reports(&cfg.input.path, cfg.input.format, &cfg.input.column_map)
}

/// Build the split-candidate dataset: the configured report columns plus one
/// binary dummy per topic that received at least one document.
pub(crate) fn build_dataset(
    reports: &[Report],
    assignments: &HashMap<String, usize>,
    cfg: &PipelineConfig,
) -> Result<Dataset> {
    let mut vars = Vec::new();
    for name in &cfg.tree.candidates {
        let values: Vec<&str> = match name.as_str() {
            "region" => reports.iter().map(|r| r.region.as_str()).collect(),
            "attack_on" => reports.iter().map(|r| r.attack_on.as_str()).collect(),
            "dcolor" => reports.iter().map(|r| r.dcolor.as_str()).collect(),
            "complex_attack" => reports.iter().map(|r| r.complex_attack.as_str()).collect(),
            other => {
                return Err(Error::Config(format!(
                    "unknown split candidate {other:?} (expected one of region, attack_on, dcolor, complex_attack)"
                )))
            }
        };
        vars.push(SplitVariable::categorical(name, &values));
    }

    let topics: Vec<usize> = {
        let mut t: Vec<usize> = reports
            .iter()
            .map(|r| {
                assignments.get(&r.id).copied().ok_or_else(|| {
                    Error::Data(format!("report {:?} has no topic assignment", r.id))
                })
            })
            .collect::<Result<Vec<usize>>>()?;
        t.sort_unstable();
        t.dedup();
        t
    };
    for &t in &topics {
        let values: Vec<&str> = reports
            .iter()
            .map(|r| if assignments.get(&r.id) == Some(&t) { "1" } else { "0" })
            .collect();
        vars.push(SplitVariable::categorical(&format!("topic_{t}"), &values));
    }

    Dataset::new(
        reports.iter().map(|r| r.id.clone()).collect(),
        reports.iter().map(|r| r.y).collect(),
        vars,
    )
}

/// Read assignments.csv back into a doc_id -> topic map.
pub(crate) fn read_assignments(
    artifacts: &crate::artifacts::Artifacts,
) -> Result<HashMap<String, usize>> {
    let mut reader = artifacts.csv_reader(crate::artifacts::ASSIGNMENTS, "lda-fit")?;
    let mut map = HashMap::new();
    for record in reader.records() {
        let record = record?;
        let id = record
            .get(0)
            .ok_or_else(|| Error::Data("assignments.csv: missing doc_id".into()))?;
        let topic: usize = record
            .get(1)
            .and_then(|t| t.parse().ok())
            .ok_or_else(|| Error::Data(format!("assignments.csv: bad topic for {id:?}")))?;
        map.insert(id.to_string(), topic);
    }
    Ok(map)
}
