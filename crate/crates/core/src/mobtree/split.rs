//! Split-point search: maximize the children's joint NB log-likelihood.

use super::{default_side, Dataset, Split, SplitData, SplitRule, TreeConfig};
use crate::negbin::fit_nb_intercept;

/// Objective of one feasible partition, or None when a child violates the
/// minimum size or cannot carry an NB fit (all-zero counts).
fn partition_loglik(ds: &Dataset, left: &[usize], right: &[usize], min_segment: usize) -> Option<f64> {
    if left.len() < min_segment || right.len() < min_segment {
        return None;
    }
    let ys_left: Vec<u64> = left.iter().map(|&i| ds.y[i]).collect();
    let ys_right: Vec<u64> = right.iter().map(|&i| ds.y[i]).collect();
    if ys_left.iter().all(|&y| y == 0) || ys_right.iter().all(|&y| y == 0) {
        return None;
    }
    let fl = fit_nb_intercept(&ys_left).ok()?;
    let fr = fit_nb_intercept(&ys_right).ok()?;
    Some(fl.loglik + fr.loglik)
}

/// Best binary partition of the selected variable within the node, or None
/// when nothing feasible exists.
pub fn find_split(ds: &Dataset, members: &[usize], var_index: usize, cfg: &TreeConfig) -> Option<Split> {
    let var = &ds.vars[var_index];
    match &var.data {
        SplitData::Categorical { levels, codes } => {
            categorical_split(ds, members, &var.name, levels, codes, cfg)
        }
        SplitData::Numeric { values } => numeric_split(ds, members, &var.name, values, cfg),
    }
}

fn categorical_split(
    ds: &Dataset,
    members: &[usize],
    name: &str,
    levels: &[String],
    codes: &[u32],
    cfg: &TreeConfig,
) -> Option<Split> {
    // Observed levels within the node, ordered lexicographically so the
    // enumeration (and therefore tie-breaking) is deterministic.
    let mut observed: Vec<u32> = Vec::new();
    for &row in members {
        if !observed.contains(&codes[row]) {
            observed.push(codes[row]);
        }
    }
    observed.sort_by(|&a, &b| levels[a as usize].cmp(&levels[b as usize]));
    let c_obs = observed.len();
    if c_obs < 2 {
        return None;
    }

    let rows_by_level = |keep: &dyn Fn(u32) -> bool| -> (Vec<usize>, Vec<usize>) {
        let mut left = Vec::new();
        let mut right = Vec::new();
        for &row in members {
            if keep(codes[row]) {
                left.push(row);
            } else {
                right.push(row);
            }
        }
        (left, right)
    };

    let mut best: Option<(f64, Vec<u32>)> = None;
    let mut consider = |left_codes: Vec<u32>| {
        let in_left = |c: u32| left_codes.contains(&c);
        let (l, r) = rows_by_level(&in_left);
        if let Some(obj) = partition_loglik(ds, &l, &r, cfg.min_segment) {
            if best.as_ref().is_none_or(|(b, _)| obj > *b) {
                best = Some((obj, left_codes));
            }
        }
    };

    if c_obs <= cfg.exhaustive_level_limit {
        // Exhaustive scan over the 2^(C-1)-1 binary level partitions. The
        // lexicographically first level anchors the left side, so each
        // unordered partition is visited exactly once.
        let anchor = observed[0];
        let rest = &observed[1..];
        let n_subsets = 1u64 << rest.len();
        for mask in 0..n_subsets - 1 {
            let mut left_codes = vec![anchor];
            for (bit, &code) in rest.iter().enumerate() {
                if mask & (1 << bit) != 0 {
                    left_codes.push(code);
                }
            }
            consider(left_codes);
        }
    } else {
        // Too many levels: order by within-level mean response and scan the
        // C-1 order-respecting partitions.
        let mut stats: Vec<(u32, f64)> = observed
            .iter()
            .map(|&code| {
                let mut total = 0u64;
                let mut count = 0usize;
                for &row in members {
                    if codes[row] == code {
                        total += ds.y[row];
                        count += 1;
                    }
                }
                (code, total as f64 / count as f64)
            })
            .collect();
        stats.sort_by(|a, b| {
            a.1.partial_cmp(&b.1)
                .expect("finite means")
                .then_with(|| levels[a.0 as usize].cmp(&levels[b.0 as usize]))
        });
        for cut in 1..stats.len() {
            let left_codes: Vec<u32> = stats[..cut].iter().map(|&(c, _)| c).collect();
            consider(left_codes);
        }
    }

    let (_, left_codes) = best?;
    let mut left: Vec<String> = left_codes.iter().map(|&c| levels[c as usize].clone()).collect();
    let mut right: Vec<String> = observed
        .iter()
        .filter(|c| !left_codes.contains(c))
        .map(|&c| levels[c as usize].clone())
        .collect();
    left.sort();
    right.sort();
    let n_left = members.iter().filter(|&&r| left.contains(&levels[codes[r] as usize])).count();
    let default_left = default_side(&left, &right, n_left, members.len() - n_left);
    Some(Split { variable: name.to_string(), rule: SplitRule::Levels { left, right }, default_left })
}

fn numeric_split(
    ds: &Dataset,
    members: &[usize],
    name: &str,
    values: &[f64],
    cfg: &TreeConfig,
) -> Option<Split> {
    let mut sorted: Vec<f64> = members.iter().map(|&r| values[r]).collect();
    sorted.sort_by(|a, b| a.partial_cmp(b).expect("finite values"));
    sorted.dedup();
    if sorted.len() < 2 {
        return None;
    }

    let mut best: Option<(f64, f64, usize)> = None; // (objective, threshold, n_left)
    for w in sorted.windows(2) {
        let threshold = 0.5 * (w[0] + w[1]);
        let mut left = Vec::new();
        let mut right = Vec::new();
        for &row in members {
            if values[row] <= threshold {
                left.push(row);
            } else {
                right.push(row);
            }
        }
        if let Some(obj) = partition_loglik(ds, &left, &right, cfg.min_segment) {
            // Strict improvement keeps the smallest threshold on ties.
            if best.is_none_or(|(b, _, _)| obj > b) {
                best = Some((obj, threshold, left.len()));
            }
        }
    }
    let (_, threshold, n_left) = best?;
    Some(Split {
        variable: name.to_string(),
        rule: SplitRule::Threshold(threshold),
        default_left: n_left >= members.len() - n_left,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::mobtree::SplitVariable;
    use crate::negbin::{sample_nb, NbParams};

    fn ids(n: usize) -> Vec<String> {
        (0..n).map(|i| i.to_string()).collect()
    }

    fn cfg(min_segment: usize) -> TreeConfig {
        TreeConfig { min_segment, ..TreeConfig::default() }
    }

    #[test]
    fn binary_variable_yields_its_unique_partition() {
        let mut y = sample_nb(NbParams { mu: 0.3, theta: 1.0 }, 100, 1);
        y.extend(sample_nb(NbParams { mu: 4.0, theta: 1.0 }, 100, 2));
        let vals: Vec<&str> = (0..200).map(|i| if i < 100 { "a" } else { "b" }).collect();
        let ds = Dataset::new(ids(200), y, vec![SplitVariable::categorical("v", &vals)]).unwrap();
        let members: Vec<usize> = (0..200).collect();
        let split = find_split(&ds, &members, 0, &cfg(10)).unwrap();
        match &split.rule {
            SplitRule::Levels { left, right } => {
                assert_eq!(left, &["a"]);
                assert_eq!(right, &["b"]);
            }
            _ => panic!("expected level split"),
        }
    }

    /// Planted three-level variable with means (0.2, 0.2, 5): the split must
    /// be {A,B} vs {C}, and it must agree with an independent evaluation of
    /// the objective over every partition.
    #[test]
    fn three_level_partition_matches_exhaustive_oracle() {
        let mut y = sample_nb(NbParams { mu: 0.2, theta: 1.0 }, 200, 3);
        y.extend(sample_nb(NbParams { mu: 0.2, theta: 1.0 }, 200, 4));
        y.extend(sample_nb(NbParams { mu: 5.0, theta: 1.0 }, 200, 5));
        let vals: Vec<&str> = (0..600).map(|i| ["A", "B", "C"][i / 200]).collect();
        let ds = Dataset::new(ids(600), y.clone(), vec![SplitVariable::categorical("v", &vals)]).unwrap();
        let members: Vec<usize> = (0..600).collect();
        let split = find_split(&ds, &members, 0, &cfg(20)).unwrap();
        let SplitRule::Levels { left, right } = &split.rule else {
            panic!("expected level split")
        };
        let chosen: (Vec<String>, Vec<String>) = (left.clone(), right.clone());
        assert!(
            chosen == (vec!["A".into(), "B".into()], vec!["C".into()])
                || chosen == (vec!["C".into()], vec!["A".into(), "B".into()]),
            "got {chosen:?}"
        );

        // Oracle: evaluate all three partitions directly.
        let groups = |keep: &[&str]| -> (Vec<u64>, Vec<u64>) {
            let mut l = Vec::new();
            let mut r = Vec::new();
            for (i, &v) in vals.iter().enumerate() {
                if keep.contains(&v) {
                    l.push(y[i]);
                } else {
                    r.push(y[i]);
                }
            }
            (l, r)
        };
        let objective = |keep: &[&str]| -> f64 {
            let (l, r) = groups(keep);
            fit_nb_intercept(&l).unwrap().loglik + fit_nb_intercept(&r).unwrap().loglik
        };
        let best_keep = [["A", "B"], ["A", "C"], ["B", "C"]]
            .iter()
            .max_by(|a, b| objective(*a).partial_cmp(&objective(*b)).unwrap())
            .unwrap()
            .to_vec();
        assert_eq!(best_keep, ["A", "B"], "oracle agrees the AB|C partition wins");
    }

    #[test]
    fn infeasible_min_segment_returns_none() {
        let y = sample_nb(NbParams { mu: 1.0, theta: 1.0 }, 30, 6);
        let vals: Vec<&str> = (0..30).map(|i| if i < 5 { "a" } else { "b" }).collect();
        let ds = Dataset::new(ids(30), y, vec![SplitVariable::categorical("v", &vals)]).unwrap();
        let members: Vec<usize> = (0..30).collect();
        assert!(find_split(&ds, &members, 0, &cfg(10)).is_none());
    }

    #[test]
    fn all_zero_child_is_infeasible() {
        let mut y = vec![0u64; 50];
        y.extend(sample_nb(NbParams { mu: 3.0, theta: 1.0 }, 50, 7));
        let vals: Vec<&str> = (0..100).map(|i| if i < 50 { "z" } else { "p" }).collect();
        // The z side is all zeros: the only binary partition is infeasible.
        let ds = Dataset::new(ids(100), y, vec![SplitVariable::categorical("v", &vals)]).unwrap();
        let members: Vec<usize> = (0..100).collect();
        assert!(find_split(&ds, &members, 0, &cfg(10)).is_none());
    }

    #[test]
    fn numeric_threshold_lands_between_populations() {
        let mut y = sample_nb(NbParams { mu: 0.3, theta: 1.0 }, 150, 8);
        y.extend(sample_nb(NbParams { mu: 4.0, theta: 1.0 }, 150, 9));
        let values: Vec<f64> = (0..300).map(|i| i as f64 / 10.0).collect();
        let ds = Dataset::new(ids(300), y, vec![SplitVariable::numeric("x", values)]).unwrap();
        let members: Vec<usize> = (0..300).collect();
        let split = find_split(&ds, &members, 0, &cfg(20)).unwrap();
        let SplitRule::Threshold(t) = split.rule else { panic!("expected threshold") };
        assert!(t > 12.0 && t < 18.0, "threshold {t}");
    }

    #[test]
    fn many_levels_use_mean_ordering() {
        // 12 levels, half low mean and half high; the ordered scan must
        // separate low from high.
        let mut y = Vec::new();
        let mut vals = Vec::new();
        let names: Vec<String> = (0..12).map(|i| format!("L{i:02}")).collect();
        for (i, name) in names.iter().enumerate() {
            let mu = if i % 2 == 0 { 0.3 } else { 4.0 };
            let draws = sample_nb(NbParams { mu, theta: 1.0 }, 60, 10 + i as u64);
            for v in draws {
                y.push(v);
                vals.push(name.as_str());
            }
        }
        let ds = Dataset::new(ids(y.len()), y, vec![SplitVariable::categorical("v", &vals)]).unwrap();
        let members: Vec<usize> = (0..ds.len()).collect();
        let config = TreeConfig { exhaustive_level_limit: 10, ..cfg(30) };
        let split = find_split(&ds, &members, 0, &config).unwrap();
        let SplitRule::Levels { left, right } = &split.rule else { panic!() };
        let low_side = if left.contains(&"L00".to_string()) { left } else { right };
        for i in (0..12).step_by(2) {
            assert!(low_side.contains(&format!("L{i:02}")), "low level L{i:02} misplaced");
        }
        assert_eq!(low_side.len(), 6);
    }
}
