use proptest::prelude::*;
use selfalign::probe_data::{aggregate_majority, Answer, LikertDistribution, Orientation, ProbeDataError};

fn dist(weights: &[u32], orientation: Orientation) -> LikertDistribution {
    let total: f64 = weights.iter().map(|w| f64::from(*w)).sum();
    LikertDistribution {
        question_id: "Q".into(),
        country: "C".into(),
        scale_size: weights.len(),
        shares: weights.iter().map(|w| f64::from(*w) / total).collect(),
        orientation,
    }
}

fn weights() -> impl Strategy<Value = Vec<u32>> {
    (2usize..=11).prop_flat_map(|n| prop::collection::vec(0u32..1000, n)).prop_filter("some mass", |w| {
        w.iter().any(|x| *x > 0)
    })
}

fn orientation() -> impl Strategy<Value = Orientation> {
    prop_oneof![Just(Orientation::LowIsOptionA), Just(Orientation::LowIsOptionB)]
}

fn outcome(d: &LikertDistribution) -> Option<Answer> {
    match aggregate_majority(d) {
        Ok(m) => Some(m.majority),
        Err(ProbeDataError::Tie { .. }) => None,
        Err(e) => panic!("unexpected {e}"),
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(500))]

    #[test]
    fn reversing_scale_and_orientation_is_invariant(w in weights(), o in orientation()) {
        let mut rev = w.clone();
        rev.reverse();
        prop_assert_eq!(outcome(&dist(&w, o)), outcome(&dist(&rev, o.flipped())));
    }

    #[test]
    fn flipping_orientation_swaps_answer(w in weights(), o in orientation()) {
        let a = outcome(&dist(&w, o));
        let b = outcome(&dist(&w, o.flipped()));
        prop_assert_eq!(a.map(Answer::other), b);
    }

    #[test]
    fn permuting_within_halves_is_invariant(w in weights(), o in orientation(), rot in 0usize..6) {
        let half = w.len() / 2;
        let mut p = w.clone();
        p[..half].rotate_left(rot % half.max(1));
        let n = p.len();
        p[n - half..].rotate_right(rot % half.max(1));
        prop_assert_eq!(outcome(&dist(&w, o)), outcome(&dist(&p, o)));
    }

    #[test]
    fn majority_share_is_at_least_half(w in weights(), o in orientation()) {
        if let Ok(m) = aggregate_majority(&dist(&w, o)) {
            prop_assert!(m.majority_share > 0.5 && m.majority_share <= 1.0);
        }
    }

    #[test]
    fn ten_point_split_is_one_to_five_versus_six_to_ten(low in prop::collection::vec(0u32..100, 5), high in prop::collection::vec(0u32..100, 5)) {
        let lo: u32 = low.iter().sum();
        let hi: u32 = high.iter().sum();
        prop_assume!(lo + hi > 0);
        let w: Vec<u32> = low.iter().chain(&high).copied().collect();
        let got = outcome(&dist(&w, Orientation::LowIsOptionB));
        let want = match lo.cmp(&hi) {
            std::cmp::Ordering::Greater => Some(Answer::OptionB),
            std::cmp::Ordering::Less => Some(Answer::OptionA),
            std::cmp::Ordering::Equal => None,
        };
        prop_assert_eq!(got, want);
    }
}
