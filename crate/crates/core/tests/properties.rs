use dcc_core::analysis::overlap;
use dcc_core::bitseq::{deletion_ball, lcs_len, reverse_weight, shares_subsequence, vt_residual, BitString};
use dcc_core::confgraph::build_graph_pairwise;
use dcc_core::greedy::{
    greedy_by_permutation, greedy_from_priorities, is_deletion_correcting, is_deletion_correcting_pairwise,
};
use dcc_core::priolib::numpy_sum;
use dcc_core::progdb::{dedup_hash, length_probabilities, softmax};
use dcc_core::prompt::{extract_body, render_prompt, TemplateId};
use dcc_core::{build_graph, Code, ConfusabilityGraph, PriorityValue};
use proptest::prelude::*;
use proptest::sample::subsequence;
use std::sync::OnceLock;

fn graphs() -> &'static Vec<ConfusabilityGraph> {
    static CELL: OnceLock<Vec<ConfusabilityGraph>> = OnceLock::new();
    CELL.get_or_init(|| {
        let mut out = Vec::new();
        for n in 3..=8 {
            for s in 1..=2.min(n - 1) {
                out.push(build_graph(n, s).unwrap());
            }
        }
        out
    })
}

fn bitstring(n: usize) -> impl Strategy<Value = BitString> {
    (0u64..1 << n).prop_map(move |v| BitString::new(n, v).unwrap())
}

fn pair_of_strings() -> impl Strategy<Value = (BitString, BitString)> {
    (1usize..=12).prop_flat_map(|n| (bitstring(n), bitstring(n)))
}

fn graph_index() -> impl Strategy<Value = usize> {
    0..graphs().len()
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(256))]

    #[test]
    fn text_round_trip(v in (1usize..=20).prop_flat_map(bitstring)) {
        let text = v.to_text();
        prop_assert_eq!(text.len(), v.len());
        prop_assert_eq!(text.parse::<BitString>().unwrap(), v);
    }

    #[test]
    fn ball_members_are_subsequences(v in (2usize..=12).prop_flat_map(bitstring), s in 1usize..=3) {
        prop_assume!(s < v.len());
        let ball = deletion_ball(v, s).unwrap();
        prop_assert!(!ball.is_empty());
        prop_assert!(ball.len() <= v.runs().pow(s as u32).max(1));
        for w in ball.members() {
            prop_assert_eq!(w.len(), v.len() - s);
            prop_assert_eq!(lcs_len(&v, w), v.len() - s);
        }
    }

    #[test]
    fn subsequence_sharing_is_symmetric((a, b) in pair_of_strings(), s in 1usize..=3) {
        prop_assume!(s < a.len());
        let ab = shares_subsequence(&a, &b, s).unwrap();
        prop_assert_eq!(ab, shares_subsequence(&b, &a, s).unwrap());
        prop_assert!(shares_subsequence(&a, &a, s).unwrap());
        let balls = deletion_ball(a, s).unwrap().intersects(&deletion_ball(b, s).unwrap());
        prop_assert_eq!(ab, balls);
    }

    #[test]
    fn weights_stay_in_range(v in (1usize..=20).prop_flat_map(bitstring)) {
        let n = v.len() as u64;
        prop_assert!(vt_residual(&v) <= v.len());
        prop_assert!(reverse_weight(&v) <= n * (n + 1) / 2);
        // W(v) + Σ i·v_i = (n + 1)·|v|
        prop_assert_eq!(reverse_weight(&v) + v.vt_sum(), (n + 1) * v.popcount() as u64);
    }

    #[test]
    fn greedy_codes_are_valid_and_maximal(gi in graph_index(), seed in any::<u64>()) {
        let g = &graphs()[gi];
        let mut x = seed | 1;
        let priorities: Vec<PriorityValue> = (0..g.vertex_count())
            .map(|_| {
                x ^= x << 13;
                x ^= x >> 7;
                x ^= x << 17;
                PriorityValue::Scalar((x % 5) as f64)
            })
            .collect();
        let code = greedy_from_priorities(g, &priorities).unwrap();
        prop_assert!(is_deletion_correcting(&code));
        prop_assert!(is_deletion_correcting_pairwise(&code));
        prop_assert!(code.is_maximal_in(g));
    }

    #[test]
    fn permutation_greedy_is_valid(gi in graph_index(), order in any::<u64>()) {
        let g = &graphs()[gi];
        let mut ranks: Vec<u32> = (0..g.vertex_count() as u32).collect();
        let mut x = order | 1;
        for i in (1..ranks.len()).rev() {
            x ^= x << 13;
            x ^= x >> 7;
            x ^= x << 17;
            ranks.swap(i, (x % (i as u64 + 1)) as usize);
        }
        let code = greedy_by_permutation(g, &ranks).unwrap();
        prop_assert!(is_deletion_correcting(&code));
        prop_assert!(code.is_maximal_in(g));
        ranks.pop();
        prop_assert!(greedy_by_permutation(g, &ranks).is_err());
    }

    #[test]
    fn ball_check_agrees_with_lcs(n in 4usize..=9, s in 1usize..=2, picks in subsequence((0u64..512).collect::<Vec<_>>(), 0..12)) {
        let words: Vec<BitString> = picks.into_iter().filter(|&v| v < 1 << n).map(|v| BitString::new(n, v).unwrap()).collect();
        let code = Code::new(n, s, words).unwrap();
        prop_assert_eq!(is_deletion_correcting(&code), is_deletion_correcting_pairwise(&code));
    }

    #[test]
    fn larger_s_gives_supergraph(gi in graph_index()) {
        let g = &graphs()[gi];
        prop_assume!(g.s() == 1 && g.n() >= 3);
        let wide = build_graph(g.n(), 2).unwrap();
        for (a, b) in g.edges() {
            prop_assert!(wide.has_edge(a as usize, b as usize));
        }
    }

    #[test]
    fn graph_file_round_trip(gi in graph_index()) {
        let g = &graphs()[gi];
        prop_assert_eq!(&ConfusabilityGraph::from_bytes(&g.to_bytes()).unwrap(), g);
        prop_assert_eq!(&ConfusabilityGraph::from_edge_list_text(&g.to_edge_list_text()).unwrap(), g);
        let degree_sum: usize = (0..g.vertex_count()).map(|r| g.degree_of(r)).sum();
        prop_assert_eq!(degree_sum, 2 * g.edge_count());
    }

    #[test]
    fn softmax_is_a_distribution(scores in prop::collection::vec(-500.0f64..500.0, 1..20), t in 0.01f64..10.0) {
        let p = softmax(&scores, t);
        prop_assert!((p.iter().sum::<f64>() - 1.0).abs() < 1e-12);
        prop_assert!(p.iter().all(|&x| (0.0..=1.0).contains(&x)));
    }

    #[test]
    fn shorter_members_weigh_more(lengths in prop::collection::vec(1usize..500, 1..10)) {
        let p = length_probabilities(&lengths);
        prop_assert!((p.iter().sum::<f64>() - 1.0).abs() < 1e-12);
        for i in 0..lengths.len() {
            for j in 0..lengths.len() {
                if lengths[i] < lengths[j] {
                    prop_assert!(p[i] > p[j]);
                }
            }
        }
    }

    #[test]
    fn hash_tracks_canonical_vectors(a in prop::collection::vec(-1e6f64..1e6, 1..40), b in prop::collection::vec(-1e6f64..1e6, 1..40)) {
        let va: Vec<PriorityValue> = a.iter().map(|&x| PriorityValue::Scalar(x)).collect();
        let vb: Vec<PriorityValue> = b.iter().map(|&x| PriorityValue::Scalar(x)).collect();
        let canon = |v: &[PriorityValue]| v.iter().map(|p| p.canonical()).collect::<Vec<_>>();
        prop_assert_eq!(dedup_hash(&[&va]) == dedup_hash(&[&vb]), canon(&va) == canon(&vb));
    }

    #[test]
    fn integer_sums_are_exact(xs in prop::collection::vec(-1000i32..1000, 0..400)) {
        let floats: Vec<f64> = xs.iter().map(|&x| x as f64).collect();
        prop_assert_eq!(numpy_sum(&floats), xs.iter().map(|&x| x as i64).sum::<i64>() as f64);
    }

    #[test]
    fn overlap_is_symmetric(n in 4usize..=8, a in subsequence((0u64..256).collect::<Vec<_>>(), 0..20), b in subsequence((0u64..256).collect::<Vec<_>>(), 0..20)) {
        let code = |v: Vec<u64>| {
            Code::new(n, 1, v.into_iter().filter(|&x| x < 1 << n).map(|x| BitString::new(n, x).unwrap()).collect()).unwrap()
        };
        let (a, b) = (code(a), code(b));
        let ab = overlap(&a, &b).unwrap();
        prop_assert_eq!(ab, overlap(&b, &a).unwrap());
        prop_assert!((0.0..=1.0).contains(&ab));
    }

    #[test]
    fn rendered_bodies_extract_back(body in "[a-z]{1,8}( [+*] [a-z0-9]{1,4}){0,3}") {
        let source = format!("    x = {body}\n    return x\n");
        let prompt = render_prompt(TemplateId::Baseline, &[&source], 1).unwrap();
        prop_assert_eq!(&prompt, &render_prompt(TemplateId::Baseline, &[&source], 1).unwrap());
        let completion = format!("{source}\ndef f_2(v, G, n, s):\n    pass\n");
        prop_assert_eq!(extract_body(&completion), Some(source));
    }
}

#[test]
fn bucketing_matches_pairwise_small() {
    for n in 2..=7 {
        for s in 1..n.min(4) {
            assert_eq!(build_graph(n, s).unwrap(), build_graph_pairwise(n, s).unwrap(), "n={n} s={s}");
        }
    }
}
