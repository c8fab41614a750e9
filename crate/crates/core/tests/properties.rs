use cadastre_core::consistency::{exact_match, unigram_overlap, Comparable};
use cadastre_core::entity_search::{edit_distance, fuzzy_match, similarity};
use cadastre_core::llm::{format_reference_list, parse_reference_list};
use cadastre_core::python_agent::PhraseColumnReference;
use cadastre_core::sql_agent::{canonicalize_result, ResultTable};
use cadastre_core::tabular::{normalize_text, DatasetNumber, Value};
use proptest::prelude::*;

/// Plain recursive definition, memoized.
fn levenshtein_oracle(a: &[char], b: &[char]) -> usize {
    fn go(a: &[char], b: &[char], i: usize, j: usize, memo: &mut Vec<Vec<Option<usize>>>) -> usize {
        if let Some(v) = memo[i][j] {
            return v;
        }
        let v = if i == a.len() {
            b.len() - j
        } else if j == b.len() {
            a.len() - i
        } else {
            let sub = go(a, b, i + 1, j + 1, memo) + usize::from(a[i] != b[j]);
            let del = go(a, b, i + 1, j, memo) + 1;
            let ins = go(a, b, i, j + 1, memo) + 1;
            sub.min(del).min(ins)
        };
        memo[i][j] = Some(v);
        v
    }
    let mut memo = vec![vec![None; b.len() + 1]; a.len() + 1];
    go(a, b, 0, 0, &mut memo)
}

fn words() -> impl Strategy<Value = String> {
    proptest::collection::vec("[a-zàèé]{1,6}", 1..6).prop_map(|w| w.join(" "))
}

proptest! {
    #[test]
    fn normalize_is_idempotent(s in "\\PC{0,30}") {
        let once = normalize_text(&s);
        prop_assert_eq!(normalize_text(&once), once);
    }

    #[test]
    fn edit_distance_matches_oracle(a in "[abcà]{0,10}", b in "[abcà]{0,10}") {
        let ac: Vec<char> = a.chars().collect();
        let bc: Vec<char> = b.chars().collect();
        prop_assert_eq!(edit_distance(&a, &b), levenshtein_oracle(&ac, &bc));
    }

    #[test]
    fn similarity_in_unit_interval(a in "[a-z]{0,10}", b in "[a-z]{0,10}") {
        let s = similarity(&a, &b);
        prop_assert!((0.0..=1.0).contains(&s));
    }

    #[test]
    fn raising_threshold_only_removes_matches(
        phrase in "[a-z]{1,8}",
        vocab in proptest::collection::vec("[a-z]{1,8}", 0..8),
        lo in 0.0f64..1.0,
        delta in 0.0f64..0.5,
    ) {
        let loose = fuzzy_match(&phrase, &vocab, lo);
        let strict = fuzzy_match(&phrase, &vocab, (lo + delta).min(1.0));
        prop_assert!(strict.iter().all(|m| loose.iter().any(|l| l.value == m.value)));
    }

    #[test]
    fn overlap_bounds_and_identity(p in words(), g in words()) {
        let o = unigram_overlap(&p, &g).unwrap();
        prop_assert!((0.0..=1.0).contains(&o));
        prop_assert_eq!(unigram_overlap(&g, &g).unwrap(), 1.0);
    }

    #[test]
    fn overlap_ignores_token_order(p in proptest::collection::vec("[a-z]{1,4}", 1..6), g in proptest::collection::vec("[a-z]{1,4}", 1..6)) {
        let mut p_rev = p.clone();
        p_rev.reverse();
        let mut g_rev = g.clone();
        g_rev.reverse();
        let base = unigram_overlap(&p.join(" "), &g.join(" ")).unwrap();
        prop_assert_eq!(unigram_overlap(&p_rev.join(" "), &g.join(" ")).unwrap(), base);
        prop_assert_eq!(unigram_overlap(&p.join(" "), &g_rev.join(" ")).unwrap(), base);
    }

    #[test]
    fn reference_list_round_trip(
        items in proptest::collection::vec(("[a-zA-Z ']{0,12}", "[a-z_]{1,12}", 1i64..=3), 0..5)
    ) {
        let refs: Vec<PhraseColumnReference> = items
            .iter()
            .map(|(p, c, n)| PhraseColumnReference::new(p.clone(), c.clone(), DatasetNumber::new(*n).unwrap()))
            .collect();
        let text = format!("Reasoning first. {}", format_reference_list(&refs));
        prop_assert_eq!(parse_reference_list(&text).unwrap(), refs);
    }

    #[test]
    fn exact_match_is_symmetric_and_order_blind(
        rows_a in proptest::collection::vec((0i64..4, "[ab]{1,2}"), 0..5),
        rows_b in proptest::collection::vec((0i64..4, "[ab]{1,2}"), 0..5),
    ) {
        let table = |rows: &[(i64, String)]| ResultTable {
            columns: vec!["n".into(), "s".into()],
            rows: rows.iter().map(|(n, s)| vec![Value::Int(*n), Value::Text(s.clone())]).collect(),
        };
        let a = Comparable::Table(table(&rows_a));
        let b = Comparable::Table(table(&rows_b));
        let ab = exact_match(&a, &b).unwrap();
        prop_assert_eq!(ab, exact_match(&b, &a).unwrap());
        if ab {
            let ta = canonicalize_result(&table(&rows_a)).render_text();
            let tb = canonicalize_result(&table(&rows_b)).render_text();
            if !ta.trim().is_empty() {
                prop_assert_eq!(unigram_overlap(&tb, &ta).unwrap(), 1.0);
            }
        }
        let mut rev = rows_a.clone();
        rev.reverse();
        prop_assert!(exact_match(&a, &Comparable::Table(table(&rev))).unwrap());
    }
}
