use crate::artifacts::{Artifacts, REPORT, SEGMENTS, STABILITY, SUMMARY, TOPIC_TERMS, TREE};
use crate::config::PipelineConfig;
use std::fmt::Write as _;
use tmtree::mobtree::{Node, SplitRule};
use tmtree::validate::StabilitySummary;
use tmtree::{Result, Tree};

/// Render a human-readable markdown summary of the fitted artifacts.
pub fn report(cfg: &PipelineConfig) -> Result<()> {
    let artifacts = Artifacts::new(&cfg.out_dir)?;
    let tree: Tree = artifacts.read_json(TREE, "tree-fit")?;

    let mut md = String::new();
    let _ = writeln!(md, "# Segmentation report\n");
    let _ = writeln!(
        md,
        "{} reports partitioned into {} segments.\n",
        tree.n,
        tree.num_segments()
    );

    let _ = writeln!(md, "## Tree\n");
    let _ = writeln!(md, "```");
    render_node(&tree.root, 0, &mut md);
    let _ = writeln!(md, "```\n");

    let _ = writeln!(md, "## Segments\n");
    render_csv_table(&artifacts, SEGMENTS, "tree-fit", &mut md)?;

    // Topic frequency rows for the topics the tree actually splits on.
    let mut split_topics: Vec<String> = Vec::new();
    collect_split_topics(&tree.root, &mut split_topics);
    if !split_topics.is_empty() && artifacts.path(TOPIC_TERMS).exists() {
        let _ = writeln!(md, "## Topics used by the tree\n");
        let mut reader = artifacts.csv_reader(TOPIC_TERMS, "lda-fit")?;
        let headers = reader.headers()?.clone();
        let _ = writeln!(md, "| {} |", headers.iter().collect::<Vec<_>>().join(" | "));
        let _ = writeln!(md, "|{}|", vec!["---"; headers.len()].join("|"));
        for record in reader.records() {
            let record = record?;
            let topic = record.get(0).unwrap_or_default();
            if split_topics.iter().any(|t| t == topic) {
                let _ = writeln!(md, "| {} |", record.iter().collect::<Vec<_>>().join(" | "));
            }
        }
        let _ = writeln!(md);
    }

    if artifacts.path(SUMMARY).exists() {
        let summary: StabilitySummary = artifacts.read_json(SUMMARY, "validate")?;
        let _ = writeln!(md, "## Stability\n");
        let _ = writeln!(
            md,
            "Pooled over {} matches: {:.1}% coinciding (Jaccard = 1), {:.1}% strongly corresponding (Jaccard >= 0.8).\n",
            summary.pooled.count,
            100.0 * summary.pooled.coinciding,
            100.0 * summary.pooled.strong
        );
        let _ = writeln!(md, "| segment | median | q1 | q3 | matches |");
        let _ = writeln!(md, "|---|---|---|---|---|");
        for seg in &summary.per_segment {
            let _ = writeln!(
                md,
                "| {} | {:.3} | {:.3} | {:.3} | {} |",
                seg.k, seg.median, seg.q1, seg.q3, seg.count
            );
        }
        let _ = writeln!(md);
    } else {
        let _ = writeln!(md, "## Stability\n\nNot available ({STABILITY} absent; run `validate`).\n");
    }

    std::fs::write(artifacts.path(REPORT), &md)?;
    print!("{md}");
    Ok(())
}

fn render_node(node: &Node, depth: usize, md: &mut String) {
    let pad = "  ".repeat(depth);
    match (&node.split, node.segment) {
        (Some(split), _) => {
            let rule = match &split.rule {
                SplitRule::Levels { left, right } => {
                    format!("{} in {{{}}} | {{{}}}", split.variable, left.join(", "), right.join(", "))
                }
                SplitRule::Threshold(t) => format!("{} <= {t}", split.variable),
            };
            let _ = writeln!(md, "{pad}[{}] n={} split: {}", node.id, node.n_members, rule);
            for child in &node.children {
                render_node(child, depth + 1, md);
            }
        }
        (None, Some(segment)) => {
            let _ = writeln!(
                md,
                "{pad}[{}] n={} segment {}: mu={:.3}, theta={:.4}",
                node.id,
                node.n_members,
                segment,
                node.fit.params.mu,
                node.fit.params.theta
            );
        }
        (None, None) => {
            let _ = writeln!(md, "{pad}[{}] n={} (unnumbered leaf)", node.id, node.n_members);
        }
    }
}

fn collect_split_topics(node: &Node, out: &mut Vec<String>) {
    if let Some(split) = &node.split {
        if let Some(id) = split.variable.strip_prefix("topic_") {
            if !out.iter().any(|t| t == id) {
                out.push(id.to_string());
            }
        }
        for child in &node.children {
            collect_split_topics(child, out);
        }
    }
}

fn render_csv_table(artifacts: &Artifacts, name: &str, produced_by: &str, md: &mut String) -> Result<()> {
    let mut reader = artifacts.csv_reader(name, produced_by)?;
    let headers = reader.headers()?.clone();
    let _ = writeln!(md, "| {} |", headers.iter().collect::<Vec<_>>().join(" | "));
    let _ = writeln!(md, "|{}|", vec!["---"; headers.len()].join("|"));
    for record in reader.records() {
        let record = record?;
        let cells: Vec<String> = record
            .iter()
            .map(|c| match c.parse::<f64>() {
                Ok(v) if c.contains('.') => format!("{v:.3}"),
                _ => c.to_string(),
            })
            .collect();
        let _ = writeln!(md, "| {} |", cells.join(" | "));
    }
    let _ = writeln!(md);
    Ok(())
}
