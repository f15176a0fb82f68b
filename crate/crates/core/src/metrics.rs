//! BLEU and ROUGE-1/2/L, plus the scalar cycle-consistency score built from
//! the nine ROUGE components.
//!
//! Conventions, fixed here once: a single reference, case handling left to
//! the tokenizer, and a zero-denominator always scoring 0 rather than NaN or
//! an error so degenerate translations rank worst instead of crashing runs.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::tokenize::{ngrams, TokenSequence};

/// Recall, precision, and F1 for one ROUGE variant. All three lie in [0, 1];
/// `f1` is the harmonic mean, 0 when precision + recall is 0.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RougeComponent {
    pub recall: f64,
    pub precision: f64,
    pub f1: f64,
}

impl RougeComponent {
    fn from_overlap(overlap: f64, reference_total: f64, candidate_total: f64) -> Self {
        let recall = ratio(overlap, reference_total);
        let precision = ratio(overlap, candidate_total);
        let f1 = if precision + recall > 0.0 {
            2.0 * precision * recall / (precision + recall)
        } else {
            0.0
        };
        Self {
            recall,
            precision,
            f1,
        }
    }

    pub fn sum(&self) -> f64 {
        self.recall + self.precision + self.f1
    }
}

fn ratio(num: f64, den: f64) -> f64 {
    if den > 0.0 {
        num / den
    } else {
        0.0
    }
}

/// The nine ROUGE components of one original/back-translated pair and their
/// sum. `total` lies in [0, 9]; 9.0 means a perfect round trip.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ConsistencyScore {
    pub rouge1: RougeComponent,
    pub rouge2: RougeComponent,
    pub rouge_l: RougeComponent,
    pub total: f64,
}

/// BLEU with uniform weights 1/N over orders 1..=N and the standard brevity
/// penalty. `value` is 0 whenever any clipped precision is 0 (no smoothing).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BleuScore {
    pub value: f64,
    pub brevity_penalty: f64,
    pub precisions: Vec<f64>,
    pub max_order: usize,
}

/// Length of the longest common subsequence of the two token lists.
/// Dynamic programming, O(|a|·|b|) time, one DP row of memory.
pub fn lcs_length(a: &TokenSequence, b: &TokenSequence) -> usize {
    lcs_length_slices(a.tokens(), b.tokens())
}

fn lcs_length_slices(a: &[String], b: &[String]) -> usize {
    if a.is_empty() || b.is_empty() {
        return 0;
    }
    let mut prev = vec![0usize; b.len() + 1];
    let mut cur = vec![0usize; b.len() + 1];
    for ai in a {
        for (j, bj) in b.iter().enumerate() {
            cur[j + 1] = if ai == bj {
                prev[j] + 1
            } else {
                prev[j + 1].max(cur[j])
            };
        }
        std::mem::swap(&mut prev, &mut cur);
    }
    prev[b.len()]
}

/// ROUGE-N: clipped n-gram overlap against the reference. `n` is 1 or 2 in
/// the consistency score but any order >= 1 works.
pub fn rouge_n(reference: &TokenSequence, candidate: &TokenSequence, n: usize) -> RougeComponent {
    let ref_counts = ngrams(reference, n);
    let cand_counts = ngrams(candidate, n);
    let overlap: usize = cand_counts
        .iter()
        .map(|(gram, count)| ref_counts.get(gram).map_or(0, |rc| *count.min(rc)))
        .sum();
    let ref_total: usize = ref_counts.values().sum();
    let cand_total: usize = cand_counts.values().sum();
    RougeComponent::from_overlap(overlap as f64, ref_total as f64, cand_total as f64)
}

/// ROUGE-L: recall/precision/F1 of the LCS length against the two sequence
/// lengths.
pub fn rouge_l(reference: &TokenSequence, candidate: &TokenSequence) -> RougeComponent {
    let lcs = lcs_length(reference, candidate) as f64;
    RougeComponent::from_overlap(lcs, reference.len() as f64, candidate.len() as f64)
}

/// Sums recall, precision, and F1 across ROUGE-1, ROUGE-2, and ROUGE-L with
/// `original` as reference and `cycled` as candidate.
///
/// Both sequences must carry the same language tag.
pub fn consistency(original: &TokenSequence, cycled: &TokenSequence) -> Result<ConsistencyScore> {
    if original.language().code() != cycled.language().code() {
        return Err(Error::LanguageMismatch {
            expected: original.language().code().to_string(),
            found: cycled.language().code().to_string(),
        });
    }
    let rouge1 = rouge_n(original, cycled, 1);
    let rouge2 = rouge_n(original, cycled, 2);
    let rouge_l = rouge_l(original, cycled);
    let total = rouge1.sum() + rouge2.sum() + rouge_l.sum();
    Ok(ConsistencyScore {
        rouge1,
        rouge2,
        rouge_l,
        total,
    })
}

/// BLEU of `candidate` against a single reference.
///
/// p_n is the clipped n-gram precision; the brevity penalty is 1 when the
/// candidate is at least as long as the reference and exp(1 - r/c) otherwise.
/// An empty candidate scores 0 outright.
pub fn bleu(reference: &TokenSequence, candidate: &TokenSequence, max_order: usize) -> BleuScore {
    assert!(max_order >= 1, "BLEU max_order must be >= 1");
    if candidate.is_empty() {
        return BleuScore {
            value: 0.0,
            brevity_penalty: 0.0,
            precisions: vec![0.0; max_order],
            max_order,
        };
    }
    let precisions: Vec<f64> = (1..=max_order)
        .map(|n| {
            let ref_counts = ngrams(reference, n);
            let cand_counts = ngrams(candidate, n);
            let clipped: usize = cand_counts
                .iter()
                .map(|(gram, count)| ref_counts.get(gram).map_or(0, |rc| *count.min(rc)))
                .sum();
            let cand_total: usize = cand_counts.values().sum();
            ratio(clipped as f64, cand_total as f64)
        })
        .collect();

    let ref_len = reference.len() as f64;
    let cand_len = candidate.len() as f64;
    let brevity_penalty = if cand_len >= ref_len {
        1.0
    } else {
        (1.0 - ref_len / cand_len).exp()
    };

    let value = if precisions.contains(&0.0) {
        0.0
    } else {
        let weight = 1.0 / max_order as f64;
        let log_sum: f64 = precisions.iter().map(|p| weight * p.ln()).sum();
        brevity_penalty * log_sum.exp()
    };

    BleuScore {
        value,
        brevity_penalty,
        precisions,
        max_order,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::lang::LanguageRegistry;
    use proptest::prelude::*;

    fn seq(tokens: &[&str]) -> TokenSequence {
        let en = LanguageRegistry::builtin().get("en").unwrap().clone();
        TokenSequence::new(tokens.iter().map(|s| s.to_string()).collect(), en).unwrap()
    }

    fn seq_lang(tokens: &[&str], code: &str) -> TokenSequence {
        let tag = LanguageRegistry::builtin().get(code).unwrap().clone();
        TokenSequence::new(tokens.iter().map(|s| s.to_string()).collect(), tag).unwrap()
    }

    /// Brute-force LCS by enumerating every subsequence of `a` and checking
    /// it against `b`. Only usable for short inputs; kept deliberately
    /// independent of the DP implementation.
    fn lcs_brute_force(a: &[String], b: &[String]) -> usize {
        let mut best = 0;
        for mask in 0u32..(1 << a.len()) {
            let picked: Vec<&String> = a
                .iter()
                .enumerate()
                .filter(|(i, _)| mask >> i & 1 == 1)
                .map(|(_, t)| t)
                .collect();
            let mut it = b.iter();
            if picked.iter().all(|want| it.any(|have| have == *want)) {
                best = best.max(picked.len());
            }
        }
        best
    }

    #[test]
    fn lcs_matches_hand_examples() {
        assert_eq!(lcs_length(&seq(&["a", "b", "c", "d"]), &seq(&["a", "c", "b", "d"])), 3);
        let x = seq(&["q", "w", "e"]);
        assert_eq!(lcs_length(&x, &x), 3);
        assert_eq!(lcs_length(&x, &seq(&[])), 0);
        assert_eq!(lcs_length(&seq(&[]), &x), 0);
    }

    #[test]
    fn rouge1_hand_counted_fixture() {
        let reference = seq(&["the", "cat", "sat", "on", "the", "mat"]);
        let candidate = seq(&["the", "cat", "sat"]);
        let r = rouge_n(&reference, &candidate, 1);
        assert!((r.precision - 1.0).abs() < 1e-12);
        assert!((r.recall - 0.5).abs() < 1e-12);
        assert!((r.f1 - 2.0 / 3.0).abs() < 1e-6);
    }

    #[test]
    fn rouge_identity_and_disjoint() {
        let x = seq(&["a", "b", "c"]);
        let id = rouge_n(&x, &x, 1);
        assert_eq!((id.precision, id.recall, id.f1), (1.0, 1.0, 1.0));
        let d = rouge_n(&seq(&["a", "b"]), &seq(&["c", "d"]), 1);
        assert_eq!((d.precision, d.recall, d.f1), (0.0, 0.0, 0.0));
    }

    #[test]
    fn rouge_l_fixture_and_edge_cases() {
        let r = rouge_l(&seq(&["a", "b", "c", "d"]), &seq(&["a", "c", "d"]));
        assert!((r.precision - 1.0).abs() < 1e-12);
        assert!((r.recall - 0.75).abs() < 1e-12);
        assert!((r.f1 - 6.0 / 7.0).abs() < 1e-6);

        let x = seq(&["a", "b"]);
        let id = rouge_l(&x, &x);
        assert_eq!((id.precision, id.recall, id.f1), (1.0, 1.0, 1.0));
        let empty = rouge_l(&x, &seq(&[]));
        assert_eq!((empty.precision, empty.recall, empty.f1), (0.0, 0.0, 0.0));
    }

    #[test]
    fn consistency_of_identical_sequences_is_nine() {
        let x = seq(&["the", "cat", "sat"]);
        let score = consistency(&x, &x).unwrap();
        assert!((score.total - 9.0).abs() < 1e-12);
    }

    #[test]
    fn consistency_of_disjoint_sequences_is_zero() {
        let score = consistency(&seq(&["a", "b"]), &seq(&["c", "d"])).unwrap();
        assert_eq!(score.total, 0.0);
    }

    // All nine components of the "the cat sat" truncation pair, confirmed
    // by hand: rouge1 r=3/6 p=3/3, rouge2 r=2/5 p=2/2, rougeL r=3/6 p=3/3.
    #[test]
    fn consistency_truncation_fixture() {
        let original = seq(&["the", "cat", "sat", "on", "the", "mat"]);
        let cycled = seq(&["the", "cat", "sat"]);
        let score = consistency(&original, &cycled).unwrap();
        assert!((score.rouge1.recall - 0.5).abs() < 1e-9);
        assert!((score.rouge1.precision - 1.0).abs() < 1e-9);
        assert!((score.rouge1.f1 - 2.0 / 3.0).abs() < 1e-9);
        assert!((score.rouge2.recall - 0.4).abs() < 1e-9);
        assert!((score.rouge2.precision - 1.0).abs() < 1e-9);
        assert!((score.rouge2.f1 - 4.0 / 7.0).abs() < 1e-9);
        assert!((score.rouge_l.recall - 0.5).abs() < 1e-9);
        assert!((score.rouge_l.precision - 1.0).abs() < 1e-9);
        assert!((score.rouge_l.f1 - 2.0 / 3.0).abs() < 1e-9);
        assert!((score.total - 6.304_761_904_761_905).abs() < 1e-9);
    }

    #[test]
    fn consistency_rejects_language_mismatch() {
        let err = consistency(&seq(&["a"]), &seq_lang(&["a"], "fr")).unwrap_err();
        assert!(matches!(err, Error::LanguageMismatch { .. }));
    }

    #[test]
    fn consistency_total_equals_component_sum() {
        let score = consistency(
            &seq(&["a", "b", "c", "a"]),
            &seq(&["a", "c", "b"]),
        )
        .unwrap();
        let by_hand = score.rouge1.sum() + score.rouge2.sum() + score.rouge_l.sum();
        assert!((score.total - by_hand).abs() < 1e-12);
    }

    #[test]
    fn bleu_brevity_penalty_fixture() {
        let reference = seq(&["the", "cat", "sat", "on", "the", "mat"]);
        let candidate = seq(&["the", "cat", "sat"]);
        let score = bleu(&reference, &candidate, 2);
        assert!((score.precisions[0] - 1.0).abs() < 1e-12);
        assert!((score.precisions[1] - 1.0).abs() < 1e-12);
        assert!((score.brevity_penalty - (-1.0f64).exp()).abs() < 1e-12);
        assert!((score.value - (-1.0f64).exp()).abs() < 1e-6);
    }

    #[test]
    fn bleu_clips_repeated_candidate_ngrams() {
        let score = bleu(&seq(&["the", "cat"]), &seq(&["the", "the", "the"]), 1);
        assert!((score.precisions[0] - 1.0 / 3.0).abs() < 1e-12);
        assert_eq!(score.brevity_penalty, 1.0);
        assert!((score.value - 1.0 / 3.0).abs() < 1e-6);
    }

    #[test]
    fn bleu_identity_is_one() {
        let x = seq(&["a", "b", "c", "d"]);
        assert!((bleu(&x, &x, 4).value - 1.0).abs() < 1e-12);
    }

    #[test]
    fn bleu_empty_candidate_is_zero_without_panicking() {
        let score = bleu(&seq(&["a", "b"]), &seq(&[]), 4);
        assert_eq!(score.value, 0.0);
        assert_eq!(score.brevity_penalty, 0.0);
    }

    #[test]
    fn bleu_zero_when_any_order_has_no_overlap() {
        // Unigrams overlap but no bigram does; no smoothing means 0.
        let score = bleu(&seq(&["a", "b", "c"]), &seq(&["a", "c", "b"]), 2);
        assert!(score.precisions[0] > 0.0);
        assert_eq!(score.value, 0.0);
    }

    proptest! {
        #[test]
        fn lcs_symmetric_and_matches_brute_force(
            a in proptest::collection::vec("[a-c]", 0..8),
            b in proptest::collection::vec("[a-c]", 0..8),
        ) {
            let sa = seq(&a.iter().map(|s| s.as_str()).collect::<Vec<_>>());
            let sb = seq(&b.iter().map(|s| s.as_str()).collect::<Vec<_>>());
            let fast = lcs_length(&sa, &sb);
            prop_assert_eq!(fast, lcs_length(&sb, &sa));
            prop_assert_eq!(fast, lcs_brute_force(sa.tokens(), sb.tokens()));
        }

        #[test]
        fn score_bounds_hold(
            a in proptest::collection::vec("[a-d]{1,2}", 0..12),
            b in proptest::collection::vec("[a-d]{1,2}", 0..12),
        ) {
            let sa = seq(&a.iter().map(|s| s.as_str()).collect::<Vec<_>>());
            let sb = seq(&b.iter().map(|s| s.as_str()).collect::<Vec<_>>());
            let score = consistency(&sa, &sb).unwrap();
            for c in [score.rouge1, score.rouge2, score.rouge_l] {
                for v in [c.recall, c.precision, c.f1] {
                    prop_assert!((0.0..=1.0).contains(&v));
                }
            }
            prop_assert!((0.0..=9.0).contains(&score.total));
            let bleu_score = bleu(&sa, &sb, 3);
            prop_assert!((0.0..=1.0).contains(&bleu_score.value));
        }

        /// Appending a token already present in the reference never lowers
        /// ROUGE-1 recall.
        #[test]
        fn rouge1_recall_monotone_in_reference_tokens(
            reference in proptest::collection::vec("[a-c]", 1..8),
            candidate in proptest::collection::vec("[a-c]", 0..8),
            pick in 0usize..8,
        ) {
            let r = seq(&reference.iter().map(|s| s.as_str()).collect::<Vec<_>>());
            let before = seq(&candidate.iter().map(|s| s.as_str()).collect::<Vec<_>>());
            let mut extended = candidate.clone();
            extended.push(reference[pick % reference.len()].clone());
            let after = seq(&extended.iter().map(|s| s.as_str()).collect::<Vec<_>>());
            prop_assert!(rouge_n(&r, &after, 1).recall >= rouge_n(&r, &before, 1).recall);
        }
    }
}
