use crate::artifacts::{Artifacts, SEGMENTS, TREE};
use crate::config::PipelineConfig;
use tmtree::mobtree::{grow, segment_table};
use tmtree::Result;

/// Grow the model tree on the configured candidates plus the topic dummies
/// and write the tree and the segment summary table.
pub fn tree_fit(cfg: &PipelineConfig) -> Result<()> {
    let artifacts = Artifacts::new(&cfg.out_dir)?;
    let reports = super::load_input(cfg)?;
    let assignments = super::read_assignments(&artifacts)?;
    let ds = super::build_dataset(&reports, &assignments, cfg)?;

    let tree_cfg = cfg.tree_config(ds.len());
    let tree = grow(&ds, &tree_cfg)?;
    artifacts.write_json(TREE, &tree)?;

    let rows = segment_table(&tree, &ds);
    let mut writer = artifacts.csv_writer(SEGMENTS)?;
    writer.write_record([
        "segment", "log_mu", "se_log_mu", "theta", "se_theta", "df", "dev", "max", "pct_zero",
    ])?;
    let opt = |v: Option<f64>| v.map(|x| x.to_string()).unwrap_or_default();
    for row in &rows {
        writer.write_record([
            row.segment.to_string(),
            row.log_mu.to_string(),
            opt(row.se_log_mu),
            row.theta.to_string(),
            opt(row.se_theta),
            row.df.to_string(),
            row.deviance.to_string(),
            row.max.to_string(),
            row.pct_zero.to_string(),
        ])?;
    }
    writer.flush()?;

    println!(
        "tree-fit: {} reports, min_segment {}, alpha {:.1e} -> {} segments",
        ds.len(),
        tree_cfg.min_segment,
        tree_cfg.alpha,
        tree.num_segments()
    );
    for row in &rows {
        println!(
            "  segment {}: n={}, mu={:.3}, theta={:.4}",
            row.segment,
            row.df + 1,
            row.log_mu.exp(),
            row.theta
        );
    }
    Ok(())
}
