use proptest::prelude::*;

use lookahead_core::tree_model::{
    node_meta, node_value, plus_density, subtree_plus_density, GameParams, NodeCursor, NodeKind, NodePath, Player,
    Value,
};

fn path_strategy(b: u32, max_len: usize) -> impl Strategy<Value = Vec<u32>> {
    prop::collection::vec(0..b, 0..=max_len)
}

proptest! {
    #[test]
    fn values_depend_only_on_seed_and_path(
        b in 2u32..6, gamma in 0.0..=1.0f64, seed: u64, path in path_strategy(2, 30)
    ) {
        let p = GameParams::new(b, gamma, 40, seed).unwrap();
        let path = NodePath::from(path);
        let first = node_value(&p, &path).unwrap();
        let again = node_value(&GameParams::new(b, gamma, 40, seed).unwrap(), &path).unwrap();
        prop_assert_eq!(first, again);
        prop_assert_eq!(NodeCursor::at(&p, &path).value(), first);
    }

    #[test]
    fn children_respect_parent_kind(
        b in 2u32..6, gamma in 0.0..=1.0f64, seed: u64, path in path_strategy(2, 20)
    ) {
        let p = GameParams::new(b, gamma, 30, seed).unwrap();
        let path = NodePath::from(path);
        let info = node_meta(&p, &path).unwrap();
        let children: Vec<Value> = (0..b).map(|i| node_value(&p, &path.child(i)).unwrap()).collect();
        match info.kind {
            NodeKind::Forced => prop_assert!(children.iter().all(|&v| v == info.value)),
            NodeKind::Choice => {
                prop_assert!(children.contains(&info.value));
                prop_assert_eq!(info.value, info.player.favorable());
            }
        }
        // the node's value is the minimax value of its children
        let backed_up = match info.player {
            Player::Max => if children.contains(&Value::Plus) { Value::Plus } else { Value::Minus },
            Player::Min => if children.contains(&Value::Minus) { Value::Minus } else { Value::Plus },
        };
        prop_assert_eq!(backed_up, info.value);
    }

    #[test]
    fn optimal_moves_keep_the_value(b in 2u32..6, gamma in 0.0..=1.0f64, seed: u64) {
        let p = GameParams::new(b, gamma, 10, seed).unwrap();
        let info = node_meta(&p, &NodePath::root()).unwrap();
        prop_assert!(!info.optimal_moves.is_empty());
        for i in 0..b {
            let keeps = node_value(&p, &NodePath::from(vec![i])).unwrap() == Value::Plus;
            prop_assert_eq!(keeps, info.optimal_moves.contains(&i));
        }
    }

    #[test]
    fn path_text_round_trip(path in path_strategy(9, 40)) {
        let path = NodePath::from(path);
        prop_assert_eq!(path.to_string().parse::<NodePath>().unwrap(), path);
    }

    #[test]
    fn densities_stay_in_unit_interval(b in 2u32..20, gamma in 0.0..=1.0f64, n in 0u32..60) {
        let p = GameParams::new(b, gamma, 60, 0).unwrap();
        let f = plus_density(&p, n).unwrap();
        prop_assert!((0.0..=1.0).contains(&f));
        for (v, pl) in [(Value::Plus, Player::Max), (Value::Minus, Player::Min)] {
            let g = subtree_plus_density(v, pl, n, &p).unwrap();
            prop_assert!((0.0..=1.0).contains(&g));
        }
    }
}

#[test]
fn designated_child_is_uniform() {
    let b = 5u32;
    let p = GameParams::new(b, 1.0, 20, 3).unwrap();
    let mut counts = vec![0u32; b as usize];
    // one designation per node over the first levels of one tree
    let mut level = vec![NodeCursor::root(&p)];
    for _ in 0..7 {
        for c in &level {
            counts[c.designated_child(&p) as usize] += 1;
        }
        level = level.iter().flat_map(|c| (0..b).map(|i| c.child(&p, i)).collect::<Vec<_>>()).collect();
    }
    let total: u32 = counts.iter().sum();
    let expected = f64::from(total) / f64::from(b);
    let chi2: f64 = counts.iter().map(|&c| (f64::from(c) - expected).powi(2) / expected).sum();
    // 4 degrees of freedom, 0.1% critical value
    assert!(chi2 < 18.47, "chi-square {chi2} over {total} designations");
}

#[test]
fn non_designated_children_flip_at_the_critical_rate() {
    for gamma in [0.1, 0.5, 0.9] {
        let b = 4;
        let (mut flips, mut trials) = (0u32, 0u32);
        for seed in 0..5000 {
            let p = GameParams::new(b, gamma, 5, seed).unwrap();
            let root = NodeCursor::root(&p);
            let d = root.designated_child(&p);
            for i in (0..b).filter(|&i| i != d) {
                trials += 1;
                flips += u32::from(root.child_value(&p, i) == Value::Minus);
            }
        }
        let rate = f64::from(flips) / f64::from(trials);
        let se = (gamma * (1.0 - gamma) / f64::from(trials)).sqrt();
        assert!((rate - gamma).abs() < 4.0 * se, "gamma {gamma}: rate {rate}");
    }
}

#[test]
fn forced_nodes_never_flip() {
    for seed in 0..200 {
        let p = GameParams::new(3, 1.0, 8, seed).unwrap();
        let root = NodeCursor::root(&p);
        for i in 0..3 {
            let child = root.child(&p, i);
            if child.kind() == NodeKind::Forced {
                assert!((0..3).all(|j| child.child_value(&p, j) == child.value()));
            }
        }
    }
}

#[test]
fn lazy_generation_reaches_deep_nodes() {
    let p = GameParams::new(10, 0.9, 2000, 1).unwrap();
    let path = NodePath::from(vec![7; 2000]);
    let v = node_value(&p, &path).unwrap();
    assert_eq!(v, node_value(&p, &path).unwrap());
    assert!(node_meta(&p, &path).unwrap().terminal);
}
