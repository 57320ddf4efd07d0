mod support;

use proptest::prelude::*;
use uisum_core::analysis::{length_distribution, mean_pairwise_iou, sfa_stats, word_agreement};
use uisum_core::corpus::Screen;
use uisum_core::tree::Rect;

const NONE: [&str; 0] = [];

fn with_summaries(summaries: Vec<String>, id: usize) -> Screen {
    let mut s = support::screens::screen(id, 0);
    s.screen_id = format!("x{id}");
    s.summaries = summaries;
    s
}

fn arb_rect() -> impl Strategy<Value = Rect> {
    (0i32..20, 0i32..20, 0i32..20, 0i32..20).prop_map(|(a, b, c, d)| Rect::normalized(a, b, c, d))
}

fn arb_summary() -> impl Strategy<Value = String> {
    prop::collection::vec(prop::sample::select(vec!["login", "page", "list", "of", "items", "map"]), 1..7)
        .prop_map(|w| w.join(" "))
}

proptest! {
    #[test]
    fn iou_properties(a in arb_rect(), b in arb_rect()) {
        let x = a.iou(&b);
        prop_assert_eq!(x, b.iou(&a));
        prop_assert!((0.0..=1.0).contains(&x));
        if a.area() > 0 && b.area() > 0 {
            prop_assert_eq!(x == 1.0, a == b);
            let overlap = a.intersection(&b).map_or(0, |r| r.area());
            prop_assert_eq!(x == 0.0, overlap == 0);
        }
    }

    #[test]
    fn agreement_conserves_occurrences(
        screens in prop::collection::vec(prop::collection::vec(arb_summary(), 5), 1..5),
        extra in prop::collection::vec(arb_summary(), 1..4),
    ) {
        let mut list: Vec<Screen> = screens.into_iter().enumerate().map(|(i, s)| with_summaries(s, i)).collect();
        // a screen without five summaries is excluded and counted
        list.push(with_summaries(extra, 99));
        let per_token = word_agreement(&list, &NONE, true);
        let per_type = word_agreement(&list, &NONE, false);
        prop_assert_eq!(per_token.screens_excluded, 1);
        for (w, c) in &per_token.all {
            prop_assert_eq!(c.tp + c.fp, c.occurrences);
            let containing: usize = list[..list.len() - 1]
                .iter()
                .flat_map(|s| &s.summaries)
                .filter(|s| s.split(' ').any(|t| t == w))
                .count();
            let t = &per_type.all[w];
            prop_assert_eq!(t.tp + t.fp, containing);
        }
        for r in &per_type.rows {
            prop_assert!(r.occurrences >= 2);
            if let Some(p) = r.precision {
                prop_assert!((p - r.tp as f64 / (r.tp + r.fp) as f64).abs() < 1e-12);
            }
        }
        // pure function of its input
        prop_assert_eq!(&per_type, &word_agreement(&list, &NONE, false));
        prop_assert!((0.0..=1.0).contains(&per_type.occurrence_coverage));
    }

    #[test]
    fn sfa_stats_are_bounded(boxes in prop::collection::vec(arb_rect(), 0..5)) {
        let mut s = with_summaries(vec!["a".into()], 0);
        s.screenshot = uisum_core::image::RgbImage::filled(20, 20, [0, 0, 0]);
        s.sfa_boxes = boxes.clone();
        let st = sfa_stats([&s]);
        prop_assert_eq!(st.boxes, boxes.len());
        if let Some(c) = st.mean_coverage {
            prop_assert!((0.0..=1.0).contains(&c));
        }
        prop_assert_eq!(st.mean_iou, mean_pairwise_iou(&boxes));
    }
}

#[test]
fn word_in_one_of_five_summaries() {
    let s = with_summaries(
        ["settings page", "page", "page", "page", "page"].map(String::from).to_vec(),
        0,
    );
    let a = word_agreement([&s], &NONE, false);
    let c = &a.all["settings"];
    assert_eq!((c.tp, c.fp, c.fn_), (0, 1, 4));
    let row = a.rows.iter().find(|r| r.word == "page").unwrap();
    assert_eq!(row.precision, Some(1.0));
    // "settings" occurs once and falls outside the reported rows
    assert!(a.rows.iter().all(|r| r.word != "settings"));
    assert!((a.occurrence_coverage - 5.0 / 6.0).abs() < 1e-12);
}

#[test]
fn iou_averages_per_screen_then_over_screens() {
    let mut a = with_summaries(vec!["a".into()], 0);
    a.sfa_boxes = vec![Rect::new(0, 0, 2, 2), Rect::new(1, 1, 3, 3)];
    let mut b = with_summaries(vec!["a".into()], 1);
    b.sfa_boxes = vec![Rect::new(0, 0, 4, 4); 3];
    let st = sfa_stats([&a, &b]);
    assert!((st.mean_iou.unwrap() - (1.0 / 7.0 + 1.0) / 2.0).abs() < 1e-12);
    assert_eq!(st.screens_with_pairs, 2);
}

#[test]
fn lengths_follow_stop_phrase_removal() {
    let s = with_summaries(vec!["login page in the app".into(), "map".into()], 0);
    let h = length_distribution([&s], &uisum_core::corpus::DEFAULT_STOP_PHRASES);
    assert_eq!(h.counts.into_iter().collect::<Vec<_>>(), vec![(1, 1), (2, 1)]);
    assert_eq!(h.mean, Some(1.5));
}
