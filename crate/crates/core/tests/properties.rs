//! Property tests for the value-level invariants.

use proptest::collection::vec;
use proptest::prelude::*;
use std::collections::HashSet;
use tmtree::corpus::{build_vocabulary, preprocess_text, stem, to_counts, tokenize, StopList};
use tmtree::negbin::{deviance, fit_nb_intercept, nb_logpmf, score_contributions, NbParams};
use tmtree::validate::jaccard;

proptest! {
    /// Tokens are lowercase alphabetic runs of length >= 2, whatever the input.
    #[test]
    fn tokenize_output_shape(text in "\\PC{0,200}") {
        for token in tokenize(&text) {
            prop_assert!(token.chars().count() >= 2);
            prop_assert!(token.chars().all(|c| c.is_alphabetic()));
            prop_assert_eq!(token.to_lowercase(), token.clone());
        }
    }

    /// Stemming never empties a token and stays lowercase alphabetic on
    /// ASCII input (Porter is not idempotent in general, so that is all we
    /// claim).
    #[test]
    fn stem_output_shape(token in "[a-z]{1,20}") {
        let s = stem(&token);
        prop_assert!(!s.is_empty());
        prop_assert!(s.bytes().all(|b| b.is_ascii_lowercase()));
    }

    /// Token conservation: the document total equals the number of
    /// post-pipeline tokens that are in vocabulary, and word order never
    /// matters (the counts are exchangeable).
    #[test]
    fn token_conservation_and_exchangeability(
        words in vec("[a-z]{2,8}", 1..60),
        rotation in 0usize..60,
    ) {
        let stop = StopList::default_english();
        let text = words.join(" ");
        let tokens = preprocess_text(&text, &stop);
        prop_assume!(!tokens.is_empty());
        let vocab = build_vocabulary(std::slice::from_ref(&tokens), 1).unwrap();
        let counts = to_counts("d", &tokens, &vocab);
        let in_vocab = tokens.iter().filter(|t| vocab.position(t).is_some()).count();
        prop_assert_eq!(counts.total as usize, in_vocab);
        // strictly increasing indices
        for pair in counts.entries.windows(2) {
            prop_assert!(pair[0].0 < pair[1].0);
        }

        let mut rotated = tokens.clone();
        rotated.rotate_left(rotation % tokens.len());
        prop_assert_eq!(to_counts("d", &rotated, &vocab), counts);
    }

    /// The log pmf is a log probability: nonpositive and finite over the
    /// parameter box, and the fitted sample scores sum to zero.
    #[test]
    fn nb_logpmf_and_fit_invariants(
        sample in vec(0u64..40, 2..150),
        mu in 0.05f64..30.0,
        theta in 0.01f64..100.0,
    ) {
        for &y in sample.iter().take(20) {
            let lp = nb_logpmf(y, NbParams { mu, theta }).unwrap();
            prop_assert!(lp.is_finite());
            prop_assert!(lp <= 1e-12, "log pmf {lp} > 0 at y={y}, mu={mu}, theta={theta}");
        }

        prop_assume!(sample.iter().any(|&y| y > 0));
        let fit = fit_nb_intercept(&sample).unwrap();
        let scores = score_contributions(&sample, &fit);
        let sum_mu: f64 = scores.iter().map(|s| s[0]).sum();
        prop_assert!(sum_mu.abs() < 1e-6 * sample.len() as f64);
        prop_assert!(deviance(&sample, &fit) >= -1e-9);

        // Order independence of the fit.
        let mut reversed = sample.clone();
        reversed.reverse();
        let fit2 = fit_nb_intercept(&reversed).unwrap();
        prop_assert_eq!(fit.params.mu.to_bits(), fit2.params.mu.to_bits());
        prop_assert_eq!(fit.params.theta.to_bits(), fit2.params.theta.to_bits());
    }

    /// Jaccard stays in [0,1], is 1 exactly on equal nonempty sets and 0 on
    /// disjoint ones.
    #[test]
    fn jaccard_bounds(a in vec(0u32..50, 0..30), b in vec(0u32..50, 0..30)) {
        let sa: HashSet<u32> = a.iter().copied().collect();
        let sb: HashSet<u32> = b.iter().copied().collect();
        prop_assume!(!sa.is_empty() || !sb.is_empty());
        let j = jaccard(&sa, &sb).unwrap();
        prop_assert!((0.0..=1.0).contains(&j));
        if sa == sb {
            prop_assert_eq!(j, 1.0);
        }
        if sa.is_disjoint(&sb) {
            prop_assert_eq!(j, 0.0);
        }
        if !sa.is_empty() {
            prop_assert_eq!(jaccard(&sa, &sa).unwrap(), 1.0);
        }
    }
}
