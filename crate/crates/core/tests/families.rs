mod common;

use csma_sic::phy::{LinkId, PhyConfig};
use csma_sic::setspace::{
    capacity_contains, enumerate_feasible, is_independent, Enumeration, LinkSet, Membership, DEFAULT_ENUMERATION_CAP,
};
use proptest::prelude::*;

use common::{random_topology, rng, set, topology, triangle};

#[test]
fn triangle_pairs_but_not_triple() {
    let (topo, ch) = triangle();
    let h = 3.25f64.powf(-1.5);
    assert!((ch.gain(topo.link(LinkId(1)).tx, topo.link(LinkId(0)).rx) - h).abs() < 1e-12);
    for pair in [[0, 1], [1, 2], [0, 2]] {
        assert!(is_independent(&set(3, &pair), &topo, &ch));
    }
    assert!(!is_independent(&set(3, &[0, 1, 2]), &topo, &ch));
    let fam = enumerate_feasible(&topo, &ch, Enumeration::Exhaustive, DEFAULT_ENUMERATION_CAP).unwrap();
    assert_eq!(fam.len(), 7);
    assert_eq!(fam.max_set_size(), 2);
}

#[test]
fn shared_transmitter_allows_one_link_at_a_time() {
    let pos = [[0.0, 0.0], [1.0, 0.0], [0.0, 1.0], [-1.0, 0.0], [0.0, -1.0]];
    let (topo, ch) = topology(&pos, &[(0, 1), (0, 2), (0, 3), (0, 4)], PhyConfig::default());
    let fam = enumerate_feasible(&topo, &ch, Enumeration::Exhaustive, 20).unwrap();
    assert_eq!(fam.len(), 5);
}

#[test]
fn distant_links_are_independent() {
    let pos = [[0.0, 0.0], [1.0, 0.0], [100.0, 0.0], [101.0, 0.0]];
    let (topo, ch) = topology(&pos, &[(0, 1), (2, 3)], PhyConfig::default());
    let fam = enumerate_feasible(&topo, &ch, Enumeration::Exhaustive, 20).unwrap();
    assert_eq!(fam.len(), 4);
    let w = capacity_contains(&[1.0, 1.0], &fam, Membership::Exact).unwrap().unwrap();
    assert_eq!(w.weights[fam.index_of(&set(2, &[0, 1])).unwrap()], 1.0);
}

#[test]
fn cap_is_enforced() {
    let mut r = rng(3);
    let (topo, ch) = random_topology(&mut r, 6, 20.0, 10.0);
    assert!(enumerate_feasible(&topo, &ch, Enumeration::Exhaustive, 5).is_err());
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn feasibility_is_hereditary(seed in any::<u64>(), k in 1usize..7) {
        let (topo, ch) = random_topology(&mut rng(seed), k, 6.0, 8.0);
        let ex = enumerate_feasible(&topo, &ch, Enumeration::Exhaustive, 20).unwrap();
        let re = enumerate_feasible(&topo, &ch, Enumeration::Reachable, 20).unwrap();
        prop_assert_eq!(ex.sets(), re.sets());
        for d in ex.sets() {
            for l in d.iter() {
                prop_assert!(ex.contains(&d.without(l)));
            }
            prop_assert_eq!(ex.eta(d).len(), (0..k).filter(|&l| !d.contains(LinkId(l)) && ex.contains(&d.with(LinkId(l)))).count());
        }
    }

    #[test]
    fn capacity_witnesses_are_valid(seed in any::<u64>(), k in 1usize..6, x in prop::collection::vec(0.0f64..1.0, 6)) {
        let (topo, ch) = random_topology(&mut rng(seed), k, 6.0, 8.0);
        let fam = enumerate_feasible(&topo, &ch, Enumeration::Exhaustive, 20).unwrap();
        let x = &x[..k];
        // every member's indicator is a vertex of the region
        for d in fam.sets() {
            let v: Vec<f64> = (0..k).map(|l| f64::from(u8::from(d.contains(LinkId(l))))).collect();
            prop_assert!(capacity_contains(&v, &fam, Membership::Exact).unwrap().is_some());
        }
        match capacity_contains(x, &fam, Membership::Dominated).unwrap() {
            Some(w) => {
                prop_assert!((w.weights.iter().sum::<f64>() - 1.0).abs() <= 1e-9);
                prop_assert!(w.weights.iter().all(|&a| a >= -1e-12));
                let rates = w.rates(&fam);
                prop_assert!(x.iter().zip(&rates).all(|(a, b)| *b >= a - 1e-9));
                let half: Vec<f64> = x.iter().map(|v| v / 2.0).collect();
                prop_assert!(capacity_contains(&half, &fam, Membership::Dominated).unwrap().is_some());
            }
            None => {
                let doubled: Vec<f64> = x.iter().map(|v| v * 2.0).collect();
                prop_assert!(capacity_contains(&doubled, &fam, Membership::Dominated).unwrap().is_none());
            }
        }
        // no time sharing serves more than the largest set at once
        let total = fam.max_set_size() as f64 + 0.01;
        let over = vec![total / k as f64; k];
        prop_assert!(capacity_contains(&over, &fam, Membership::Dominated).unwrap().is_none());
    }
}

#[test]
fn empty_set_is_always_a_member() {
    let (topo, ch) = triangle();
    let fam = enumerate_feasible(&topo, &ch, Enumeration::Reachable, 20).unwrap();
    assert_eq!(fam.sets()[0], LinkSet::empty(3));
}
