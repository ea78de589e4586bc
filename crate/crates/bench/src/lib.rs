//! Synthetic data builders shared by the benchmarks.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use tmtree::corpus::DocTermCounts;
use tmtree::mobtree::{Dataset, SplitVariable};
use tmtree::negbin::{sample_nb, NbParams};

/// Counts from a mixture of well-separated segments plus noise candidates,
/// shaped like the production problem.
pub fn planted_dataset(n_per_cell: usize, noise_vars: usize, seed: u64) -> Dataset {
    let mut y = Vec::new();
    let mut v1 = Vec::new();
    let mut v2 = Vec::new();
    for (ci, &(l1, l2, mu)) in [("a", "x", 0.2), ("b", "x", 1.0), ("b", "y", 5.0)]
        .iter()
        .enumerate()
    {
        for value in sample_nb(NbParams { mu, theta: 1.0 }, n_per_cell, seed * 7 + ci as u64) {
            y.push(value);
            v1.push(l1);
            v2.push(l2);
        }
    }
    let n = y.len();
    let mut vars = vec![
        SplitVariable::categorical("v1", &v1),
        SplitVariable::categorical("v2", &v2),
    ];
    let mut rng = ChaCha8Rng::seed_from_u64(seed ^ 0xbe);
    for k in 0..noise_vars {
        let vals: Vec<&str> = (0..n).map(|_| if rng.gen_bool(0.5) { "p" } else { "q" }).collect();
        vars.push(SplitVariable::categorical(&format!("noise{k}"), &vals));
    }
    let ids = (0..n).map(|i| format!("r{i}")).collect();
    Dataset::new(ids, y, vars).expect("consistent dataset")
}

/// Bag-of-words corpus over `q` terms with `s` planted topics.
pub fn topic_corpus(s: usize, q: usize, n_docs: usize, doc_len: usize, seed: u64) -> Vec<DocTermCounts> {
    let own = q / s;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    (0..n_docs)
        .map(|d| {
            let topic = rng.gen_range(0..s);
            let mut counts = vec![0u32; q];
            for _ in 0..doc_len {
                let term = if rng.gen_bool(0.9) {
                    topic * own + rng.gen_range(0..own)
                } else {
                    rng.gen_range(0..q)
                };
                counts[term] += 1;
            }
            let entries: Vec<(u32, u32)> = counts
                .iter()
                .enumerate()
                .filter(|&(_, &c)| c > 0)
                .map(|(u, &c)| (u as u32, c))
                .collect();
            let total = entries.iter().map(|&(_, c)| c).sum();
            DocTermCounts { doc_id: format!("d{d}"), entries, total }
        })
        .collect()
}
