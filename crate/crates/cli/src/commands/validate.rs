use crate::artifacts::{Artifacts, ACF, DIAGNOSTICS, STABILITY, SUMMARY, TREE};
use crate::config::PipelineConfig;
use tmtree::validate::{
    fit_diagnostics, residual_acf, run_plan, stability_summary, MatchResult, ResamplePlan,
};
use tmtree::{Result, Tree};

/// Run the resampling stability study plus the per-segment diagnostics for
/// the fitted tree.
pub fn validate(cfg: &PipelineConfig) -> Result<()> {
    let artifacts = Artifacts::new(&cfg.out_dir)?;
    let reports = super::load_input(cfg)?;
    let assignments = super::read_assignments(&artifacts)?;
    let ds = super::build_dataset(&reports, &assignments, cfg)?;
    let tree: Tree = artifacts.read_json(TREE, "tree-fit")?;

    let mut results: Vec<MatchResult> = Vec::new();
    for &scheme in &cfg.validate.schemes {
        let plan = ResamplePlan {
            scheme,
            b: cfg.validate.b_per_scheme,
            fraction: cfg.validate.fraction,
            seed: cfg.validate_seed(),
            refit: cfg.refit_config(ds.len()),
        };
        results.extend(run_plan(&ds, &tree, &plan)?);
    }

    let mut writer = artifacts.csv_writer(STABILITY)?;
    writer.write_record(["b", "scheme", "k", "l", "jaccard", "log_mu_l", "theta_l"])?;
    for m in &results {
        writer.write_record([
            m.b.to_string(),
            m.scheme.to_string(),
            m.k.to_string(),
            m.l.to_string(),
            m.jaccard.to_string(),
            m.log_mu_l.to_string(),
            m.theta_l.to_string(),
        ])?;
    }
    writer.flush()?;

    let summary = stability_summary(&results);
    artifacts.write_json(SUMMARY, &summary)?;

    let dates: Vec<_> = reports.iter().map(|r| r.date).collect();
    let acfs = residual_acf(&tree, &ds, &dates, cfg.validate.max_lag)?;
    let mut writer = artifacts.csv_writer(ACF)?;
    writer.write_record(["segment", "n", "lag", "acf", "band"])?;
    for seg in &acfs {
        for (lag, value) in seg.acf.iter().enumerate() {
            writer.write_record([
                seg.segment.to_string(),
                seg.n.to_string(),
                (lag + 1).to_string(),
                value.to_string(),
                seg.band.to_string(),
            ])?;
        }
    }
    writer.flush()?;

    let diagnostics = fit_diagnostics(&tree, &ds)?;
    let mut writer = artifacts.csv_writer(DIAGNOSTICS)?;
    writer.write_record([
        "segment",
        "n",
        "deviance",
        "df",
        "dev_ratio",
        "mae",
        "aic_nb",
        "bic_nb",
        "aic_poisson",
        "bic_poisson",
    ])?;
    for d in &diagnostics {
        writer.write_record([
            d.segment.to_string(),
            d.n.to_string(),
            d.deviance.to_string(),
            d.df.to_string(),
            d.dev_ratio.to_string(),
            d.mae.to_string(),
            d.aic_nb.to_string(),
            d.bic_nb.to_string(),
            d.aic_poisson.to_string(),
            d.bic_poisson.to_string(),
        ])?;
    }
    writer.flush()?;

    println!(
        "validate: {} matches over {} scheme(s); {:.1}% coinciding, {:.1}% strongly corresponding (Jaccard >= 0.8)",
        summary.pooled.count,
        cfg.validate.schemes.len(),
        100.0 * summary.pooled.coinciding,
        100.0 * summary.pooled.strong
    );
    Ok(())
}
