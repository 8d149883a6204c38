use birs_core::hypergraph::{edge_weights, node_weight, PathError};
use birs_core::model::{MaterialClass, Opening};
use birs_core::{build_hypergraph, path_weight, WeightConfig};
use birs_testkit::{oracle_door_weight, oracle_node_weight, random_config, random_model, today, twocorridor};
use proptest::prelude::*;
use rand::rngs::StdRng;
use rand::SeedableRng;

#[test]
fn twocorridor_weights() {
    let m = twocorridor();
    let c = WeightConfig::default();
    let g = build_hypergraph(&m, &c, today());
    assert_eq!((g.nodes.len(), g.edges.len()), (5, 12));
    let w = |id: &str| g.node(id).unwrap().weight;
    assert_eq!(
        [w("W-CORRIDOR"), w("CENTER-HALL"), w("E-CORRIDOR"), w("N-CORRIDOR"), w("SIDE-ROOM")],
        [12.0, 16.0, 22.0, 30.0, 6.0]
    );
    let n = g.node("N-CORRIDOR").unwrap().terms;
    assert_eq!((n.material, n.area, n.scan_age, n.hazard), (12.0, 12.0, 6.0, 0.0));

    let short = ["W-CORRIDOR", "D1", "CENTER-HALL", "D2", "E-CORRIDOR"];
    let long = ["W-CORRIDOR", "D3", "N-CORRIDOR", "D4", "E-CORRIDOR"];
    assert_eq!(path_weight(&g, &short), Ok(58.0));
    assert_eq!(path_weight(&g, &long), Ok(68.0));
    assert_eq!(path_weight(&g, &["SIDE-ROOM"]), Ok(6.0));
    assert_eq!(
        path_weight(&g, &["W-CORRIDOR", "D2", "E-CORRIDOR"]),
        Err(PathError::Disconnected { position: 1 })
    );
}

#[test]
fn every_path_weight_matches_resummation() {
    let m = twocorridor();
    let c = WeightConfig::default();
    let g = build_hypergraph(&m, &c, today());
    let paths: [&[&str]; 4] = [
        &["E-CORRIDOR", "D2", "CENTER-HALL", "D1", "W-CORRIDOR"],
        &["N-CORRIDOR", "D5", "SIDE-ROOM", "D6", "N-CORRIDOR"],
        &["W-CORRIDOR", "D3", "N-CORRIDOR", "D6", "SIDE-ROOM"],
        &["E-CORRIDOR", "D4", "N-CORRIDOR", "D3", "W-CORRIDOR", "D1", "CENTER-HALL"],
    ];
    for p in paths {
        let mut expected = 0.0;
        for (i, id) in p.iter().enumerate() {
            if i % 2 == 0 {
                expected += oracle_node_weight(&m, m.room(id).unwrap(), &c, today());
            } else {
                let d = m.door(id).unwrap();
                expected += oracle_door_weight(d.opening, d.from_room == p[i - 1], &c);
            }
        }
        assert_eq!(path_weight(&g, p), Ok(expected), "{p:?}");
    }
}

fn room_and_walls(area: f64, age: Option<u64>, hazard: bool, curtains: usize) -> birs_core::BuildingModel {
    let mut m = twocorridor();
    let r = m.room_mut("SIDE-ROOM").unwrap();
    r.area = area;
    r.hazard = hazard;
    r.last_scan = age.map(|d| today() - chrono::Days::new(d));
    for w in &mut m.walls {
        w.material_class = MaterialClass::Standard;
    }
    for id in ["WL-13", "WL-14"].iter().take(curtains) {
        m.walls.iter_mut().find(|w| w.id == *id).unwrap().material_class = MaterialClass::Curtain;
    }
    m
}

#[test]
fn every_bucket_combination() {
    let c = WeightConfig::default();
    let areas = [(0.5, 2.0), (49.999, 2.0), (50.0, 8.0), (75.0, 8.0), (100.0, 8.0), (100.001, 12.0), (1e4, 12.0)];
    let ages = [
        (Some(0), 10.0),
        (Some(6), 10.0),
        (Some(7), 6.0),
        (Some(10), 6.0),
        (Some(14), 6.0),
        (Some(15), 0.0),
        (Some(365), 0.0),
        (None, 0.0),
    ];
    for curtains in 0..=2 {
        let wm = if curtains > 0 { 12.0 } else { 4.0 };
        for &(area, wa) in &areas {
            for &(age, ws) in &ages {
                for hazard in [false, true] {
                    let wh = if hazard { 500.0 } else { 0.0 };
                    let m = room_and_walls(area, age, hazard, curtains);
                    let room = m.room("SIDE-ROOM").unwrap();
                    let n = node_weight(room, &m.walls_of(room), &c, today());
                    let t = n.terms;
                    assert_eq!((t.material, t.area, t.scan_age, t.hazard), (wm, wa, ws, wh));
                    assert_eq!(n.weight, wm + wa + ws + wh);
                    assert_eq!(n.weight, oracle_node_weight(&m, room, &c, today()));
                }
            }
        }
    }
}

#[test]
fn door_costs() {
    let m = twocorridor();
    let c = WeightConfig::default();
    for d in &m.doors {
        let (f, r) = edge_weights(d, &c);
        let expect = match d.opening {
            Opening::Push => (2.0, 6.0),
            Opening::Pull => (6.0, 2.0),
        };
        assert_eq!((f.weight, r.weight), expect);
        assert_eq!((f.tail.as_slice(), f.head.as_str()), (&[d.from_room.clone()][..], d.to_room.as_str()));
        assert_eq!((r.tail.as_slice(), r.head.as_str()), (&[d.to_room.clone()][..], d.from_room.as_str()));
    }
}

/// The cost constants, excluding the bucket thresholds.
fn constants(c: &mut WeightConfig) -> [&mut f64; 11] {
    [
        &mut c.wm_curtain,
        &mut c.wm_standard,
        &mut c.wa_small,
        &mut c.wa_medium,
        &mut c.wa_large,
        &mut c.ws_fresh,
        &mut c.ws_recent,
        &mut c.ws_stale,
        &mut c.wh_hazard,
        &mut c.wd_push,
        &mut c.wd_pull,
    ]
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(128))]

    #[test]
    fn nodes_match_the_cost_table(seed in any::<u64>()) {
        let mut rng = StdRng::seed_from_u64(seed);
        let m = random_model(&mut rng, 10, 20);
        let c = random_config(&mut rng, 0, 20);
        let g = build_hypergraph(&m, &c, today());
        prop_assert_eq!(g.nodes.len(), m.rooms.len());
        prop_assert_eq!(g.edges.len(), 2 * m.doors.len());
        for n in &g.nodes {
            let t = n.terms;
            prop_assert_eq!(n.weight, t.material + t.area + t.scan_age + t.hazard);
            prop_assert_eq!(n.weight, oracle_node_weight(&m, m.room(&n.room_id).unwrap(), &c, today()));
        }
        prop_assert!(g.nodes.windows(2).all(|w| w[0].room_id < w[1].room_id));
    }

    #[test]
    fn raising_a_constant_never_lowers_a_weight(seed in any::<u64>(), which in 0usize..11, bump in 0.5f64..50.0) {
        let mut rng = StdRng::seed_from_u64(seed);
        let m = random_model(&mut rng, 10, 20);
        let c = random_config(&mut rng, 0, 20);
        let mut raised = c.clone();
        *constants(&mut raised)[which] += bump;
        let (a, b) = (build_hypergraph(&m, &c, today()), build_hypergraph(&m, &raised, today()));
        for (x, y) in a.nodes.iter().zip(&b.nodes) {
            prop_assert!(y.weight >= x.weight);
        }
        for (x, y) in a.edges.iter().zip(&b.edges) {
            prop_assert!(y.weight >= x.weight);
        }
        // Any walk along the first door chain.
        let d = &m.doors[0];
        let p = [d.from_room.as_str(), d.id.as_str(), d.to_room.as_str()];
        prop_assert!(path_weight(&b, &p).unwrap() >= path_weight(&a, &p).unwrap());
    }

    #[test]
    fn doors_are_complementary(seed in any::<u64>()) {
        let mut rng = StdRng::seed_from_u64(seed);
        let m = random_model(&mut rng, 10, 20);
        let g = build_hypergraph(&m, &WeightConfig::default(), today());
        for pair in g.edges.chunks(2) {
            prop_assert_eq!(&pair[0].door_id, &pair[1].door_id);
            prop_assert_ne!(pair[0].direction_kind, pair[1].direction_kind);
            let mut ws = [pair[0].weight, pair[1].weight];
            ws.sort_by(f64::total_cmp);
            prop_assert_eq!(ws, [2.0, 6.0]);
        }
    }

    #[test]
    fn rebuild_is_deterministic(seed in any::<u64>()) {
        let mut rng = StdRng::seed_from_u64(seed);
        let m = random_model(&mut rng, 10, 20);
        let c = random_config(&mut rng, 0, 20);
        prop_assert_eq!(build_hypergraph(&m, &c, today()), build_hypergraph(&m, &c, today()));
    }
}
