//! Model-based recursive partitioning with intercept-only negative binomial
//! node models.
//!
//! Each node fits NB(mu, theta) to its members, tests every split-candidate
//! variable for parameter instability with score-based fluctuation tests
//! (Bonferroni-adjusted across candidates), and splits on the most unstable
//! variable at the partition maximizing the children's joint log-likelihood.
//! Growth stops when no candidate is significant at the global level, the
//! depth cap binds, or no partition can satisfy the minimum segment size.

mod fluct;
mod split;

pub use fluct::{fluctuation_test, select_variable, Selection, TestOutcome};
pub use split::find_split;

use crate::error::{Error, Result};
use crate::negbin::{fit_nb_intercept, NbFit};
use serde::{Deserialize, Serialize};

pub type NodeId = usize;

/// Column of split-candidate values, one entry per report.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct SplitVariable {
    pub name: String,
    pub data: SplitData,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SplitData {
    /// Level strings plus one code (index into `levels`) per report. A
    /// two-level variable is a binary candidate; "NA" is an ordinary level.
    Categorical { levels: Vec<String>, codes: Vec<u32> },
    /// Ordered numeric values; must be finite.
    Numeric { values: Vec<f64> },
}

impl SplitVariable {
    pub fn categorical(name: &str, values: &[&str]) -> SplitVariable {
        let mut levels: Vec<String> = Vec::new();
        let mut codes = Vec::with_capacity(values.len());
        for &v in values {
            let code = match levels.iter().position(|l| l == v) {
                Some(i) => i,
                None => {
                    levels.push(v.to_string());
                    levels.len() - 1
                }
            };
            codes.push(code as u32);
        }
        SplitVariable { name: name.to_string(), data: SplitData::Categorical { levels, codes } }
    }

    pub fn numeric(name: &str, values: Vec<f64>) -> SplitVariable {
        SplitVariable { name: name.to_string(), data: SplitData::Numeric { values } }
    }

    pub fn len(&self) -> usize {
        match &self.data {
            SplitData::Categorical { codes, .. } => codes.len(),
            SplitData::Numeric { values } => values.len(),
        }
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }
}

/// Column-major dataset handed to the tree: target counts, report ids and
/// the candidate columns.
#[derive(Debug, Clone)]
pub struct Dataset {
    pub ids: Vec<String>,
    pub y: Vec<u64>,
    pub vars: Vec<SplitVariable>,
}

impl Dataset {
    pub fn new(ids: Vec<String>, y: Vec<u64>, vars: Vec<SplitVariable>) -> Result<Dataset> {
        let n = y.len();
        if ids.len() != n {
            return Err(Error::Data(format!("{} ids for {} observations", ids.len(), n)));
        }
        for var in &vars {
            if var.len() != n {
                return Err(Error::Data(format!(
                    "variable {} has {} values for {} observations",
                    var.name,
                    var.len(),
                    n
                )));
            }
            match &var.data {
                SplitData::Categorical { levels, codes } => {
                    if codes.iter().any(|&c| c as usize >= levels.len()) {
                        return Err(Error::Data(format!("variable {}: code out of range", var.name)));
                    }
                }
                SplitData::Numeric { values } => {
                    if values.iter().any(|v| !v.is_finite()) {
                        return Err(Error::Data(format!(
                            "variable {}: non-finite numeric value",
                            var.name
                        )));
                    }
                }
            }
        }
        Ok(Dataset { ids, y, vars })
    }

    pub fn len(&self) -> usize {
        self.y.len()
    }

    pub fn is_empty(&self) -> bool {
        self.y.is_empty()
    }

    /// Materialize a row subset (rows may repeat, as under resampling with
    /// replacement; duplicates then count as repeated observations).
    pub fn select(&self, rows: &[usize]) -> Dataset {
        let ids = rows.iter().map(|&r| self.ids[r].clone()).collect();
        let y = rows.iter().map(|&r| self.y[r]).collect();
        let vars = self
            .vars
            .iter()
            .map(|v| SplitVariable {
                name: v.name.clone(),
                data: match &v.data {
                    SplitData::Categorical { levels, codes } => SplitData::Categorical {
                        levels: levels.clone(),
                        codes: rows.iter().map(|&r| codes[r]).collect(),
                    },
                    SplitData::Numeric { values } => {
                        SplitData::Numeric { values: rows.iter().map(|&r| values[r]).collect() }
                    }
                },
            })
            .collect();
        Dataset { ids, y, vars }
    }

    fn var_index(&self, name: &str) -> Option<usize> {
        self.vars.iter().position(|v| v.name == name)
    }
}

/// Tree tuning parameters.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct TreeConfig {
    /// Global significance level of the fluctuation tests.
    pub alpha: f64,
    /// Minimum number of reports in every segment (enforced on children).
    pub min_segment: usize,
    pub max_depth: Option<usize>,
    /// Bonferroni-adjust p-values by the number of candidates actually
    /// tested in the node.
    pub bonferroni: bool,
    /// Categorical candidates with at most this many observed levels get an
    /// exhaustive binary-partition search; larger ones are mean-ordered.
    pub exhaustive_level_limit: usize,
    /// Trimming fraction of the supLM scan for ordered candidates.
    pub trim: f64,
}

impl Default for TreeConfig {
    fn default() -> Self {
        TreeConfig {
            alpha: 1e-4,
            min_segment: 2,
            max_depth: None,
            bonferroni: true,
            exhaustive_level_limit: 10,
            trim: 0.1,
        }
    }
}

impl TreeConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.alpha > 0.0 && self.alpha < 1.0) {
            return Err(Error::Config(format!("alpha must be in (0,1), got {}", self.alpha)));
        }
        if self.min_segment < 2 {
            return Err(Error::Config("min_segment must be >= 2".into()));
        }
        if !(self.trim > 0.0 && self.trim < 0.5) {
            return Err(Error::Config("trim must be in (0, 0.5)".into()));
        }
        Ok(())
    }
}

/// One row of a node's test log.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct CandidateTest {
    pub variable: String,
    pub statistic: f64,
    pub df: f64,
    pub p_raw: f64,
    pub p_adjusted: f64,
    /// False when the candidate was constant within the node and therefore
    /// excluded from the Bonferroni count.
    pub tested: bool,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SplitRule {
    /// Observed levels routed left/right; unseen levels take the NA side.
    Levels { left: Vec<String>, right: Vec<String> },
    /// value <= threshold routes left.
    Threshold(f64),
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct Split {
    pub variable: String,
    pub rule: SplitRule,
    /// Side for NA/unseen levels (and non-finite numeric values) at
    /// prediction time.
    pub default_left: bool,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct Node {
    pub id: NodeId,
    /// Row indices of the fitting dataset; not serialized (counts are).
    #[serde(skip)]
    pub members: Vec<usize>,
    pub n_members: usize,
    pub fit: NbFit,
    pub test_log: Vec<CandidateTest>,
    pub split: Option<Split>,
    /// 1-based leaf number in depth-first left-to-right order; None for
    /// internal nodes.
    pub segment: Option<usize>,
    #[serde(default)]
    pub children: Vec<Node>,
}

impl Node {
    pub fn is_leaf(&self) -> bool {
        self.split.is_none()
    }
}

/// Fitted recursive partition.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct Tree {
    pub n: usize,
    pub config: TreeConfig,
    pub root: Node,
}

impl Tree {
    /// Leaves in depth-first left-to-right order (segment order).
    pub fn leaves(&self) -> Vec<&Node> {
        let mut out = Vec::new();
        fn walk<'a>(node: &'a Node, out: &mut Vec<&'a Node>) {
            if node.is_leaf() {
                out.push(node);
            } else {
                for child in &node.children {
                    walk(child, out);
                }
            }
        }
        walk(&self.root, &mut out);
        out
    }

    pub fn num_segments(&self) -> usize {
        self.leaves().len()
    }

    /// Route one dataset row to its segment id (1-based).
    pub fn predict_segment(&self, ds: &Dataset, row: usize) -> Result<usize> {
        let leaf = self.route(ds, row)?;
        leaf.segment.ok_or_else(|| Error::Data("tree has unnumbered leaves".into()))
    }

    /// Fitted mean of the segment the row routes to.
    pub fn predict_mu(&self, ds: &Dataset, row: usize) -> Result<f64> {
        Ok(self.route(ds, row)?.fit.params.mu)
    }

    /// Segment ids for every row of the dataset.
    pub fn segments_of(&self, ds: &Dataset) -> Result<Vec<usize>> {
        (0..ds.len()).map(|row| self.predict_segment(ds, row)).collect()
    }

    fn route<'a>(&'a self, ds: &Dataset, row: usize) -> Result<&'a Node> {
        let mut node = &self.root;
        while let Some(split) = &node.split {
            let var_idx = ds
                .var_index(&split.variable)
                .ok_or_else(|| Error::Data(format!("unknown split variable {:?}", split.variable)))?;
            let go_left = match (&split.rule, &ds.vars[var_idx].data) {
                (SplitRule::Levels { left, right }, SplitData::Categorical { levels, codes }) => {
                    let level = &levels[codes[row] as usize];
                    if left.contains(level) {
                        true
                    } else if right.contains(level) {
                        false
                    } else {
                        log::debug!(
                            "row {row}: unseen level {level:?} for {:?}, routed to NA side",
                            split.variable
                        );
                        split.default_left
                    }
                }
                (SplitRule::Threshold(t), SplitData::Numeric { values }) => {
                    let v = values[row];
                    if v.is_finite() {
                        v <= *t
                    } else {
                        split.default_left
                    }
                }
                _ => {
                    return Err(Error::Data(format!(
                        "split rule kind does not match variable {:?}",
                        split.variable
                    )))
                }
            };
            node = if go_left { &node.children[0] } else { &node.children[1] };
        }
        Ok(node)
    }
}

/// Fit the tree on a dataset. Fails only if the root model cannot be fitted
/// (for instance an all-zero target).
pub fn grow(ds: &Dataset, cfg: &TreeConfig) -> Result<Tree> {
    cfg.validate()?;
    if ds.is_empty() {
        return Err(Error::Data("empty dataset".into()));
    }
    let members: Vec<usize> = (0..ds.len()).collect();
    let mut next_id = 1;
    let mut root = build_node(ds, cfg, members, 0, &mut next_id)?;
    let mut segment = 0;
    number_leaves(&mut root, &mut segment);
    Ok(Tree { n: ds.len(), config: cfg.clone(), root })
}

fn number_leaves(node: &mut Node, counter: &mut usize) {
    if node.is_leaf() {
        *counter += 1;
        node.segment = Some(*counter);
    } else {
        for child in &mut node.children {
            number_leaves(child, counter);
        }
    }
}

fn build_node(
    ds: &Dataset,
    cfg: &TreeConfig,
    members: Vec<usize>,
    depth: usize,
    next_id: &mut NodeId,
) -> Result<Node> {
    let id = *next_id;
    *next_id += 1;
    let sample: Vec<u64> = members.iter().map(|&i| ds.y[i]).collect();
    let fit = fit_nb_intercept(&sample)?;

    let mut node = Node {
        id,
        n_members: members.len(),
        members,
        fit,
        test_log: Vec::new(),
        split: None,
        segment: None,
        children: Vec::new(),
    };

    let depth_capped = cfg.max_depth.is_some_and(|d| depth >= d);
    if depth_capped || node.members.len() < 2 * cfg.min_segment {
        return Ok(node);
    }

    let selection = select_variable(ds, &node.members, &node.fit, cfg);
    node.test_log = selection.test_log;
    let Some(var_index) = selection.best else {
        return Ok(node);
    };

    let Some(split) = find_split(ds, &node.members, var_index, cfg) else {
        log::debug!(
            "node {id}: no feasible partition of {:?} respects min_segment = {}",
            ds.vars[var_index].name,
            cfg.min_segment
        );
        return Ok(node);
    };

    let (left_rows, right_rows) = partition_members(ds, &node.members, var_index, &split);
    node.split = Some(split);
    let left = build_node(ds, cfg, left_rows, depth + 1, next_id)?;
    let right = build_node(ds, cfg, right_rows, depth + 1, next_id)?;
    node.children = vec![left, right];
    Ok(node)
}

/// Partition member rows by a split on the training data (observed levels
/// always match one of the two sides here).
fn partition_members(
    ds: &Dataset,
    members: &[usize],
    var_index: usize,
    split: &Split,
) -> (Vec<usize>, Vec<usize>) {
    let mut left = Vec::new();
    let mut right = Vec::new();
    match (&split.rule, &ds.vars[var_index].data) {
        (SplitRule::Levels { left: left_levels, .. }, SplitData::Categorical { levels, codes }) => {
            let left_codes: Vec<u32> = levels
                .iter()
                .enumerate()
                .filter(|(_, l)| left_levels.contains(l))
                .map(|(i, _)| i as u32)
                .collect();
            for &row in members {
                if left_codes.contains(&codes[row]) {
                    left.push(row);
                } else {
                    right.push(row);
                }
            }
        }
        (SplitRule::Threshold(t), SplitData::Numeric { values }) => {
            for &row in members {
                if values[row] <= *t {
                    left.push(row);
                } else {
                    right.push(row);
                }
            }
        }
        _ => unreachable!("split built from this variable"),
    }
    (left, right)
}

/// One row of the segment summary table.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct SegmentRow {
    pub segment: usize,
    pub log_mu: f64,
    pub se_log_mu: Option<f64>,
    pub theta: f64,
    pub se_theta: Option<f64>,
    pub df: usize,
    pub deviance: f64,
    pub max: u64,
    pub pct_zero: f64,
}

/// Per-segment statistics, one row per leaf in segment order.
pub fn segment_table(tree: &Tree, ds: &Dataset) -> Vec<SegmentRow> {
    tree.leaves()
        .iter()
        .map(|leaf| {
            let ys: Vec<u64> = leaf.members.iter().map(|&i| ds.y[i]).collect();
            let max = ys.iter().copied().max().unwrap_or(0);
            let zeros = ys.iter().filter(|&&v| v == 0).count();
            SegmentRow {
                segment: leaf.segment.expect("numbered leaf"),
                log_mu: leaf.fit.log_mu,
                se_log_mu: leaf.fit.se_log_mu,
                theta: leaf.fit.params.theta,
                se_theta: leaf.fit.se_theta,
                df: leaf.fit.df,
                deviance: leaf.fit.deviance,
                max,
                pct_zero: 100.0 * zeros as f64 / ys.len() as f64,
            }
        })
        .collect()
}

/// Leaf membership (row indices) in segment order, from the stored fit.
pub fn segment_members(tree: &Tree) -> Vec<Vec<usize>> {
    tree.leaves().iter().map(|l| l.members.clone()).collect()
}

/// Resolve the NA/unseen-level default side for a fresh split: the side
/// whose levels contain "NA" if any, otherwise the side with more members.
pub(crate) fn default_side(left_levels: &[String], right_levels: &[String], n_left: usize, n_right: usize) -> bool {
    if left_levels.iter().any(|l| l == "NA") {
        true
    } else if right_levels.iter().any(|l| l == "NA") {
        false
    } else {
        n_left >= n_right
    }
}
