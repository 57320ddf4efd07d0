mod support;

use proptest::prelude::*;
use support::metric_oracles as oracle;
use uisum_core::metrics::{
    bleu, meteor_lite, rouge_l, score_corpus, BleuOptions, CiderIdf, NoStem, Tokens,
};
use uisum_core::text::tokenize;

const TOL: f64 = 1e-6;

fn t(s: &str) -> Tokens {
    tokenize(s)
}

fn stem(w: &str) -> String {
    oracle::toy_stem(w)
}

#[test]
fn library_matches_brute_force_oracles() {
    for seed in 0..3 {
        let (cands, refs) = oracle::random_corpus(seed, 60);
        for smoothing in [false, true] {
            let got = bleu(&cands, &refs, BleuOptions { smoothing }).unwrap();
            let want = oracle::bleu(&cands, &refs, smoothing);
            for n in 0..4 {
                assert!((got[n] - want[n]).abs() < TOL, "bleu-{} {} vs {}", n + 1, got[n], want[n]);
            }
        }
        let idf = CiderIdf::fit(&refs);
        let cider = oracle::cider(&cands, &refs);
        for (i, (c, rs)) in cands.iter().zip(&refs).enumerate() {
            assert!((rouge_l(c, rs) - oracle::rouge_l(c, rs)).abs() < TOL, "rouge {i}");
            assert!((idf.score(c, rs) - cider[i]).abs() < TOL, "cider {i}");
            assert!((meteor_lite(c, rs, &stem) - oracle::meteor(c, rs)).abs() < TOL, "meteor {i}");
            // per-screen BLEU is the corpus formula on a corpus of one
            let one = oracle::bleu(&cands[i..=i], &refs[i..=i], false);
            let got = bleu(&cands[i..=i], &refs[i..=i], BleuOptions::default()).unwrap();
            for n in 0..4 {
                assert!((got[n] - one[n]).abs() < TOL);
            }
        }
    }
}

#[test]
fn report_aggregates_per_screen_scores() {
    let (cands, refs) = oracle::random_corpus(7, 10);
    let ids: Vec<String> = (0..10).map(|i| format!("s{i}")).collect();
    let r = score_corpus(&ids, &cands, &refs, BleuOptions::default(), &stem).unwrap();
    let mean = |v: Vec<f64>| 100.0 * v.iter().sum::<f64>() / v.len() as f64;
    let rouge = mean(cands.iter().zip(&refs).map(|(c, rs)| oracle::rouge_l(c, rs)).collect());
    let meteor = mean(cands.iter().zip(&refs).map(|(c, rs)| oracle::meteor(c, rs)).collect());
    let cider = mean(oracle::cider(&cands, &refs));
    let b = oracle::bleu(&cands, &refs, false);
    assert!((r.rouge_l - rouge).abs() < 1e-4);
    assert!((r.meteor - meteor).abs() < 1e-4);
    assert!((r.cider - cider).abs() < 1e-4);
    for n in 0..4 {
        assert!((r.bleu[n] - 100.0 * b[n]).abs() < 1e-4);
    }
    assert!(!r.degenerate_idf);
    assert_eq!(r.per_screen.len(), 10);
}

#[test]
fn identical_references_give_maximal_scores() {
    let refs: Vec<Vec<Tokens>> = ["login page for app", "list of app settings here", "a map view of city"]
        .iter()
        .map(|s| vec![t(s); 5])
        .collect();
    let cands: Vec<Tokens> = refs.iter().map(|r| r[0].clone()).collect();
    let ids: Vec<String> = vec!["a".into(), "b".into(), "c".into()];
    let r = score_corpus(&ids, &cands, &refs, BleuOptions::default(), &NoStem).unwrap();
    for n in 0..4 {
        assert!((r.bleu[n] - 100.0).abs() < 1e-9);
    }
    assert!((r.rouge_l - 100.0).abs() < 1e-9);
    assert!((r.cider - 1000.0).abs() < 1e-6);
    for (s, c) in r.per_screen.iter().zip(&cands) {
        let want = 1.0 - 0.5 / (c.len() as f64).powi(3);
        assert!((s.meteor - want).abs() < 1e-12);
    }
}

#[test]
fn empty_predictions_score_zero() {
    let (_, refs) = oracle::random_corpus(3, 5);
    let cands = vec![Vec::new(); 5];
    let ids: Vec<String> = (0..5).map(|i| i.to_string()).collect();
    let r = score_corpus(&ids, &cands, &refs, BleuOptions::default(), &NoStem).unwrap();
    for (_, v) in r.columns() {
        assert_eq!(v, 0.0);
    }
}

#[test]
fn cider_five_screen_toy_corpus() {
    let refs: Vec<Vec<Tokens>> = [
        ["sign in page", "login screen", "sign in screen", "login page", "sign in form"],
        ["settings menu", "app settings", "settings page", "list of settings", "settings"],
        ["map view", "map of city", "map screen", "location map", "a map"],
        ["music player", "song playing", "music screen", "player page", "audio player"],
        ["photo gallery", "gallery page", "list of photos", "photos", "image gallery"],
    ]
    .iter()
    .map(|rs| rs.iter().map(|s| t(s)).collect())
    .collect();
    let idf = CiderIdf::fit(&refs);
    let cands: Vec<Tokens> = refs.iter().map(|r| r[0].clone()).collect();
    let want = oracle::cider(&cands, &refs);
    for i in 0..5 {
        assert!((idf.score(&cands[i], &refs[i]) - want[i]).abs() < TOL);
    }
}

#[test]
fn bleu_requires_references() {
    assert!(bleu(&[t("a")], &[vec![]], BleuOptions::default()).is_err());
    assert!(bleu(&[t("a")], &[], BleuOptions::default()).is_err());
}

fn arb_sentence() -> impl Strategy<Value = Tokens> {
    prop::collection::vec(prop::sample::select(vec!["a", "b", "c", "page", "pages", "x"]), 1..8)
        .prop_map(|v| v.into_iter().map(String::from).collect())
}

fn arb_case() -> impl Strategy<Value = (Tokens, Vec<Tokens>)> {
    (arb_sentence(), prop::collection::vec(arb_sentence(), 5))
}

proptest! {
    #[test]
    fn scores_ignore_reference_order((c, refs) in arb_case(), rot in 0usize..5) {
        let mut shuffled = refs.clone();
        shuffled.rotate_left(rot);
        shuffled.swap(0, 4);
        prop_assert_eq!(rouge_l(&c, &refs), rouge_l(&c, &shuffled));
        prop_assert_eq!(meteor_lite(&c, &refs, &stem), meteor_lite(&c, &shuffled, &stem));
        let b1 = bleu(&[c.clone()], &[refs.clone()], BleuOptions::default()).unwrap();
        let b2 = bleu(&[c.clone()], &[shuffled.clone()], BleuOptions::default()).unwrap();
        prop_assert_eq!(b1, b2);
        let corpus = vec![refs.clone(), vec![c.clone()]];
        let shuffled_corpus = vec![shuffled.clone(), vec![c.clone()]];
        let x = CiderIdf::fit(&corpus).score(&c, &refs);
        let y = CiderIdf::fit(&shuffled_corpus).score(&c, &shuffled);
        prop_assert!((x - y).abs() < 1e-12);
    }

    #[test]
    fn scores_are_bounded((c, refs) in arb_case(), (c2, refs2) in arb_case()) {
        let corpus = vec![refs.clone(), refs2.clone()];
        let b = bleu(&[c.clone(), c2], &corpus, BleuOptions::default()).unwrap();
        for v in b {
            prop_assert!((0.0..=1.0 + 1e-12).contains(&v));
        }
        prop_assert!((0.0..=1.0 + 1e-12).contains(&rouge_l(&c, &refs)));
        prop_assert!((0.0..=1.0 + 1e-12).contains(&meteor_lite(&c, &refs, &stem)));
        let cider = CiderIdf::fit(&corpus).score(&c, &refs);
        prop_assert!((0.0..=10.0 + 1e-9).contains(&cider));
    }

    #[test]
    fn appending_a_matching_token_keeps_rouge_recall(c in arb_sentence(), r in arb_sentence()) {
        // extend the candidate with the reference token after its current LCS
        let recall = |c: &[String]| uisum_core::metrics::lcs_len(c, &r) as f64 / r.len() as f64;
        for w in &r {
            let mut longer = c.clone();
            longer.push(w.clone());
            prop_assert!(recall(&longer) >= recall(&c));
        }
    }
}
