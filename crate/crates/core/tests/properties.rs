use lanfl::fl::{aggregate, ModelWeights};
use lanfl::net::{
    build_and_select_topology, ring_allreduce, ring_allreduce_all, AccessPoint, BandwidthMode, Flow, LanDomainNet,
    Member,
};
use proptest::prelude::*;

fn models(dim: usize, n: usize) -> impl Strategy<Value = (Vec<Vec<f64>>, Vec<f64>)> {
    (
        prop::collection::vec(prop::collection::vec(-100.0..100.0f64, dim), n),
        prop::collection::vec(0.01..1000.0f64, n),
    )
}

fn sized_models() -> impl Strategy<Value = (Vec<Vec<f64>>, Vec<f64>)> {
    (1usize..=100, 2usize..=16).prop_flat_map(|(dim, n)| models(dim, n))
}

fn rel_close(a: &[f64], b: &[f64], tol: f64) -> Result<(), TestCaseError> {
    let scale = b.iter().fold(1e-12f64, |m, x| m.max(x.abs()));
    for (x, y) in a.iter().zip(b) {
        prop_assert!((x - y).abs() <= tol * scale, "{} vs {} (scale {})", x, y, scale);
    }
    Ok(())
}

fn weights_of(vals: &[Vec<f64>]) -> Vec<ModelWeights> {
    vals.iter().map(|v| ModelWeights::new(v.clone())).collect()
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(200))]

    #[test]
    fn aggregation_ignores_order((vals, ws) in sized_models(), seed in any::<u64>()) {
        let models = weights_of(&vals);
        let updates: Vec<(&ModelWeights, f64)> = models.iter().zip(ws.iter().copied()).collect();
        let mut shuffled = updates.clone();
        let k = (seed as usize) % shuffled.len();
        shuffled.rotate_left(k);
        shuffled.reverse();
        rel_close(&aggregate(&shuffled).unwrap().values, &aggregate(&updates).unwrap().values, 1e-12)?;
    }

    #[test]
    fn grouped_weighted_mean_equals_flat((vals, ws) in sized_models(), cut in 1usize..16) {
        let models = weights_of(&vals);
        let cut = cut.min(models.len() - 1);
        let updates: Vec<(&ModelWeights, f64)> = models.iter().zip(ws.iter().copied()).collect();
        let flat = aggregate(&updates).unwrap();
        let (a, b) = updates.split_at(cut);
        let ga = aggregate(a).unwrap();
        let gb = aggregate(b).unwrap();
        let mass = |g: &[(&ModelWeights, f64)]| g.iter().map(|u| u.1).sum::<f64>();
        let nested = aggregate(&[(&ga, mass(a)), (&gb, mass(b))]).unwrap();
        rel_close(&nested.values, &flat.values, 1e-12)?;
    }

    #[test]
    fn ring_matches_aggregate((vals, ws) in sized_models()) {
        let models = weights_of(&vals);
        let refs: Vec<&ModelWeights> = models.iter().collect();
        let updates: Vec<(&ModelWeights, f64)> = models.iter().zip(ws.iter().copied()).collect();
        let expect = aggregate(&updates).unwrap();
        for out in ring_allreduce_all(&refs, &ws).unwrap() {
            rel_close(&out.values, &expect.values, 1e-6)?;
        }
    }

    #[test]
    fn ring_result_independent_of_order((vals, ws) in sized_models(), rot in 0usize..16) {
        let models = weights_of(&vals);
        let n = models.len();
        let order: Vec<usize> = (0..n).map(|i| (i + rot) % n).rev().collect();
        let refs: Vec<&ModelWeights> = models.iter().collect();
        let permuted: Vec<&ModelWeights> = order.iter().map(|&i| &models[i]).collect();
        let pws: Vec<f64> = order.iter().map(|&i| ws[i]).collect();
        rel_close(
            &ring_allreduce(&permuted, &pws).unwrap().values,
            &ring_allreduce(&refs, &ws).unwrap().values,
            1e-6,
        )?;
    }

    #[test]
    fn ap_capacity_never_exceeded(
        caps in prop::collection::vec(1.0..500.0f64, 1..5),
        backbone in prop::option::of(1.0..200.0f64),
        raw in prop::collection::vec((0usize..5, 0usize..5), 1..40),
    ) {
        let n = caps.len();
        let lan = LanDomainNet {
            lan_id: 0,
            aps: caps.iter().enumerate().map(|(ap_id, &capacity_mbps)| AccessPoint { ap_id, capacity_mbps }).collect(),
            mode: BandwidthMode::CapacityModel { backbone_mbps: backbone },
        };
        let flows: Vec<Flow> = raw.iter().map(|&(s, d)| Flow { src_ap: s % n, dst_ap: d % n }).collect();
        let rates = lan.estimate_flow_throughput(&flows).unwrap();
        for (ap, cap) in caps.iter().enumerate() {
            let load: f64 = flows
                .iter()
                .zip(&rates)
                .filter(|(f, _)| f.src_ap == ap || f.dst_ap == ap)
                .map(|(_, r)| r)
                .sum();
            prop_assert!(load <= cap * (1.0 + 1e-12), "AP {} carries {} > {}", ap, load, cap);
            if let Some(b) = backbone {
                let out: f64 = flows.iter().zip(&rates).filter(|(f, _)| f.src_ap == ap && f.dst_ap != ap).map(|(_, r)| r).sum();
                let inc: f64 = flows.iter().zip(&rates).filter(|(f, _)| f.dst_ap == ap && f.src_ap != ap).map(|(_, r)| r).sum();
                prop_assert!(out <= b * (1.0 + 1e-12) && inc <= b * (1.0 + 1e-12));
            }
        }
    }

    #[test]
    fn selected_topology_is_never_slower_than_alternatives(
        n in 2usize..12,
        aps in 1usize..4,
        cap in 10.0..300.0f64,
        bytes in 1_000u64..50_000_000,
    ) {
        let lan = LanDomainNet {
            lan_id: 0,
            aps: (0..aps).map(|ap_id| AccessPoint { ap_id, capacity_mbps: cap }).collect(),
            mode: BandwidthMode::CapacityModel { backbone_mbps: Some(cap / 2.0) },
        };
        let members: Vec<Member> = (0..n).map(|d| Member { device_id: d, ap_id: d % aps }).collect();
        let best = build_and_select_topology(&lan, &members, bytes).unwrap();
        let ring = lanfl::net::ring_candidate(&lan, &members, bytes).unwrap();
        prop_assert!(best.comm_time_s <= ring.comm_time_s);
        for ap in 0..aps {
            if let Some(ps) = lanfl::net::ps_candidate(&lan, &members, ap, bytes).unwrap() {
                prop_assert!(best.comm_time_s <= ps.comm_time_s);
            }
        }
    }
}
