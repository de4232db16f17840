use ewqof_core::metrics::{
    beta_ewqof, beta_maxqof, etx, hdlac, parent_score, propagated_qof, select_parent, EstimatorParams, LinkStats,
    NodeId, ParentView, Qof, QofHistory, SwapDecision,
};
use proptest::prelude::*;

/// Closed-form weights of the recursive estimator for `n` samples, oldest
/// first: the first sample keeps `alpha^(n-1)`, sample `i >= 2` keeps
/// `(1 - alpha) * alpha^(n-i)`.
fn weights(n: usize, alpha: f64) -> Vec<f64> {
    (1..=n)
        .map(|i| if i == 1 { alpha.powi(n as i32 - 1) } else { (1.0 - alpha) * alpha.powi((n - i) as i32) })
        .collect()
}

fn oracle_beta(window: &[f64], alpha: f64) -> f64 {
    weights(window.len(), alpha).iter().zip(window).map(|(w, q)| w * q).sum()
}

fn history(k: usize, values: &[f64]) -> QofHistory {
    QofHistory::from_values(k, values).unwrap()
}

fn window(k: usize, values: &[f64]) -> &[f64] {
    &values[values.len().saturating_sub(k)..]
}

fn samples() -> impl Strategy<Value = (usize, Vec<f64>)> {
    (1usize..=32).prop_flat_map(|k| (Just(k), prop::collection::vec(0.0f64..=1.0, 1..=48)))
}

fn view(id: u32, rank: u32, qof: f64, beta: f64, tnop: u64, tnopss: u64) -> ParentView {
    ParentView {
        parent_id: NodeId(id),
        rank,
        advertised_qof: Qof::new(qof).unwrap(),
        advertised_beta: beta,
        link: LinkStats::new(tnop, tnopss).unwrap(),
    }
}

fn arb_view(id: u32) -> impl Strategy<Value = ParentView> {
    (1u32..8, 0.0f64..=1.0, 0.0f64..=1.0, 0u64..20, 0u64..20).prop_map(move |(rank, q, b, a, s)| {
        let tnop = a.max(s);
        view(id, rank, q, b, tnop, s.min(tnop))
    })
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(1000))]

    #[test]
    fn ewqof_matches_closed_form((k, values) in samples(), alpha in 0.01f64..0.99) {
        let got = beta_ewqof(&history(k, &values), alpha).unwrap();
        prop_assert!((got - oracle_beta(window(k, &values), alpha)).abs() < 1e-12);
    }

    #[test]
    fn weights_sum_to_one(n in 1usize..=32, alpha in 0.01f64..0.99) {
        let s: f64 = weights(n, alpha).iter().sum();
        prop_assert!((s - 1.0).abs() < 1e-12);
    }

    #[test]
    fn constant_window_is_a_fixed_point(k in 1usize..=32, n in 1usize..=40, c in 0.0f64..=1.0, alpha in 0.01f64..0.99) {
        let got = beta_ewqof(&history(k, &vec![c; n]), alpha).unwrap();
        prop_assert!((got - c).abs() < 1e-12);
    }

    #[test]
    fn ewqof_lies_between_window_min_and_max((k, values) in samples(), alpha in 0.01f64..0.99) {
        let w = window(k, &values);
        let lo = w.iter().copied().fold(f64::INFINITY, f64::min);
        let hi = w.iter().copied().fold(0.0, f64::max);
        let h = history(k, &values);
        let b = beta_ewqof(&h, alpha).unwrap();
        prop_assert!(b >= lo - 1e-12 && b <= hi + 1e-12);
        prop_assert_eq!(beta_maxqof(&h).unwrap(), hi);
    }

    #[test]
    fn ewqof_is_monotone_in_each_sample((k, values) in samples(), idx in any::<prop::sample::Index>(), bump in 0.0f64..=1.0, alpha in 0.01f64..0.99) {
        let i = idx.index(values.len());
        let mut raised = values.clone();
        raised[i] = (raised[i] + bump).min(1.0);
        let before = beta_ewqof(&history(k, &values), alpha).unwrap();
        let after = beta_ewqof(&history(k, &raised), alpha).unwrap();
        prop_assert!(after >= before - 1e-12);
    }

    #[test]
    fn one_sample_moves_ewqof_by_at_most_its_weight(k in 2usize..=32, base in 0.0f64..=0.5, idx in any::<prop::sample::Index>(), alpha in 0.01f64..0.99) {
        let mut values = vec![base; k];
        let i = idx.index(k);
        values[i] = 1.0;
        let shift = beta_ewqof(&history(k, &values), alpha).unwrap() - base;
        let w = weights(k, alpha)[i];
        prop_assert!((shift - w * (1.0 - base)).abs() < 1e-12);
        prop_assert!(shift <= alpha.powi(k as i32 - 1).max(1.0 - alpha) + 1e-12);
    }

    #[test]
    fn ewqof_never_exceeds_maxqof((k, values) in samples(), alpha in 0.01f64..0.99) {
        let h = history(k, &values);
        prop_assert!(beta_ewqof(&h, alpha).unwrap() <= beta_maxqof(&h).unwrap() + 1e-12);
    }

    #[test]
    fn etx_is_at_least_one(tnop in 0u64..10_000, frac in 0.0f64..=1.0) {
        let ok = (tnop as f64 * frac).floor() as u64;
        match etx(LinkStats::new(tnop, ok).unwrap()) {
            Ok(e) => {
                prop_assert!(e >= 1.0);
                if tnop > 0 { prop_assert!((e - tnop as f64 / ok as f64).abs() < 1e-12); }
            }
            Err(_) => prop_assert!(tnop > 0 && ok == 0),
        }
    }

    #[test]
    fn propagated_qof_is_the_path_maximum(path in prop::collection::vec(0.0f64..=1.0, 1..10)) {
        let folded = path.iter().fold(None, |acc: Option<Qof>, &q| Some(propagated_qof(Qof::new(q).unwrap(), acc)));
        let max = path.iter().copied().fold(0.0, f64::max);
        prop_assert_eq!(folded.unwrap().value(), max);
    }

    #[test]
    fn selection_matches_brute_force(
        current in arb_view(0),
        cands in prop::collection::vec((1u32..20).prop_flat_map(arb_view), 0..8),
        theta in 0.05f64..0.95,
        delta in 0.0f64..2.0,
    ) {
        let params = EstimatorParams { theta_th: theta, delta_th: delta, ..EstimatorParams::default() };
        let got = select_parent(&current, &cands, &params);
        let w = params.etx_worst;
        let expected = if current.advertised_beta <= theta {
            SwapDecision::Keep
        } else {
            let mut eligible: Vec<&ParentView> = cands
                .iter()
                .filter(|c| c.parent_id != current.parent_id && hdlac(&current, w) - hdlac(c, w) > delta)
                .collect();
            eligible.sort_by(|a, b| {
                parent_score(a, params.eta, w)
                    .total_cmp(&parent_score(b, params.eta, w))
                    .then(a.rank.cmp(&b.rank))
                    .then(a.parent_id.cmp(&b.parent_id))
            });
            eligible.first().map_or(SwapDecision::Keep, |c| SwapDecision::SwapTo(c.parent_id))
        };
        prop_assert_eq!(got, expected);
    }
}

#[test]
fn single_full_slotframe_triggers_only_the_window_maximum() {
    let p = EstimatorParams::default();
    for k in [4, 8, 16, 32] {
        let mut values = vec![0.0; k - 1];
        values.push(1.0);
        let h = history(k, &values);
        assert!(beta_ewqof(&h, p.alpha).unwrap() <= p.theta_th, "k={k}");
        assert!(beta_maxqof(&h).unwrap() > p.theta_th, "k={k}");
    }
}

#[test]
fn sustained_congestion_triggers_both() {
    let p = EstimatorParams::default();
    let h = history(4, &[0.0, 0.0, 0.8, 0.8]);
    assert!(beta_ewqof(&h, p.alpha).unwrap() > p.theta_th);
    assert!(beta_maxqof(&h).unwrap() > p.theta_th);
}

#[test]
fn selection_requires_congested_parent() {
    let p = EstimatorParams::default();
    let current = view(1, 3, 0.2, 0.5, 10, 5);
    let better = view(2, 1, 0.0, 0.0, 0, 0);
    assert_eq!(select_parent(&current, &[better], &p), SwapDecision::Keep);
    let congested = ParentView { advertised_beta: 0.51, ..current };
    assert_eq!(select_parent(&congested, &[better], &p), SwapDecision::SwapTo(NodeId(2)));
}

#[test]
fn hysteresis_margin_is_strict() {
    let p = EstimatorParams::default();
    let current = view(1, 2, 0.9, 0.9, 0, 0);
    let edge = view(2, 1, 0.0, 0.0, 4, 2);
    assert_eq!(hdlac(&current, 16.0) - hdlac(&edge, 16.0), 0.0);
    assert_eq!(select_parent(&current, &[edge], &p), SwapDecision::Keep);
}

#[test]
fn ties_break_on_rank_then_id() {
    let p = EstimatorParams::default();
    let current = view(9, 5, 0.9, 0.9, 0, 0);
    let a = view(4, 2, 0.0, 0.0, 2, 1);
    let b = view(3, 3, 0.0, 0.0, 0, 0);
    assert_eq!(parent_score(&a, p.eta, 16.0), parent_score(&b, p.eta, 16.0));
    assert_eq!(select_parent(&current, &[b, a], &p), SwapDecision::SwapTo(NodeId(4)));
    let c = view(2, 2, 0.0, 0.0, 2, 1);
    assert_eq!(select_parent(&current, &[a, c], &p), SwapDecision::SwapTo(NodeId(2)));
}
