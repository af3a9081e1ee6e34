#![allow(dead_code)]

use csma_sic::localstate::{check_all_feasible, CoeffTable, Transmission, TxTable};
use csma_sic::phy::{build_channel_matrix, ChannelMatrix, Link, LinkId, NetworkTopology, Node, NodeId, PhyConfig};
use csma_sic::setspace::LinkSet;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

pub fn set(width: usize, links: &[usize]) -> LinkSet {
    LinkSet::from_links(width, links.iter().map(|&l| LinkId(l)))
}

/// Three links on a triangle: each transmitter sits 0.5 m from the center and its
/// receiver 1 m further out on the same ray. Every foreign transmitter is
/// sqrt(3.25) m from a receiver, so the interfering gain is h = 3.25^-1.5 ≈ 0.1707.
/// With n0/P = 0.1 and beta = 3: alone 1/0.1 = 10, with one interferer
/// 1/(h + 0.1) ≈ 3.69, with two 1/(2h + 0.1) ≈ 2.27. Pairs are feasible, the triple is not.
pub fn triangle() -> (NetworkTopology<f64>, ChannelMatrix<f64>) {
    let mut nodes = Vec::new();
    let mut links = Vec::new();
    for k in 0..3 {
        let theta = std::f64::consts::FRAC_PI_2 + k as f64 * 2.0 * std::f64::consts::PI / 3.0;
        let (s, c) = theta.sin_cos();
        nodes.push(Node { id: NodeId(2 * k), position: [0.5 * c, 0.5 * s] });
        nodes.push(Node { id: NodeId(2 * k + 1), position: [1.5 * c, 1.5 * s] });
        links.push(Link { id: LinkId(k), tx: NodeId(2 * k), rx: NodeId(2 * k + 1), sinr_threshold: None });
    }
    let phy = PhyConfig {
        tx_power: 1.0,
        noise_power: 0.1,
        sinr_threshold: 3.0,
        cancel_fraction: 1.0,
        radius: 10.0,
        far_interference: 0.0,
        path_loss_exponent: 3.0,
    };
    let topo = NetworkTopology::new(nodes, links, phy).unwrap();
    let ch = build_channel_matrix(&topo);
    (topo, ch)
}

pub fn single_link() -> (NetworkTopology<f64>, ChannelMatrix<f64>) {
    let nodes = vec![Node { id: NodeId(0), position: [0.0, 0.0] }, Node { id: NodeId(1), position: [1.0, 0.0] }];
    let links = vec![Link { id: LinkId(0), tx: NodeId(0), rx: NodeId(1), sinr_threshold: None }];
    let topo = NetworkTopology::new(nodes, links, PhyConfig::default()).unwrap();
    let ch = build_channel_matrix(&topo);
    (topo, ch)
}

/// Random admissible topology with `k` links whose transmitters lie in a `side` x `side`
/// box. Links are 1..2.5 m long; some reuse nodes so half-duplex conflicts occur.
pub fn random_topology(
    rng: &mut ChaCha8Rng,
    k: usize,
    side: f64,
    radius: f64,
) -> (NetworkTopology<f64>, ChannelMatrix<f64>) {
    loop {
        let phy = PhyConfig {
            tx_power: 1.0,
            noise_power: rng.random_range(0.005..0.1),
            sinr_threshold: rng.random_range(0.3..3.0),
            cancel_fraction: rng.random_range(0.5..=1.0),
            radius,
            far_interference: 0.0,
            path_loss_exponent: 3.0,
        };
        let mut pos: Vec<[f64; 2]> = Vec::new();
        let mut links = Vec::new();
        for l in 0..k {
            let tx = if !pos.is_empty() && rng.random_bool(0.15) {
                rng.random_range(0..pos.len())
            } else {
                pos.push([rng.random_range(0.0..side), rng.random_range(0.0..side)]);
                pos.len() - 1
            };
            let angle: f64 = rng.random_range(0.0..std::f64::consts::TAU);
            let len = rng.random_range(1.0..2.5);
            let p = pos[tx];
            pos.push([p[0] + len * angle.cos(), p[1] + len * angle.sin()]);
            let rx = pos.len() - 1;
            let beta = if rng.random_bool(0.2) { Some(rng.random_range(0.3..3.0)) } else { None };
            links.push(Link { id: LinkId(l), tx: NodeId(tx), rx: NodeId(rx), sinr_threshold: beta });
        }
        let nodes = pos.iter().enumerate().map(|(i, &p)| Node { id: NodeId(i), position: p }).collect();
        let Ok(topo) = NetworkTopology::new(nodes, links, phy) else { continue };
        let ch = build_channel_matrix(&topo);
        if topo.admit(&ch).is_ok() {
            return (topo, ch);
        }
    }
}

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

/// Decoding straight from the definition: at each stage the interference is every
/// received power except the current signal's, minus the cancelled share of what was
/// already decoded. `signals` holds `(node, gain, beta)`.
pub fn literal_decode(desired: usize, signals: &[(usize, f64, f64)], floor: f64, z: f64) -> bool {
    let mut order = signals.to_vec();
    order.sort_by(|a, b| b.1.partial_cmp(&a.1).unwrap().then(a.0.cmp(&b.0)));
    let total: f64 = order.iter().map(|s| s.1).sum();
    let mut decoded = 0.0;
    for &(node, g, beta) in &order {
        let interference = total - g - z * decoded + floor;
        let sinr = if interference > 0.0 { g / interference } else { f64::INFINITY };
        if g <= 0.0 || sinr < beta {
            return false;
        }
        if node == desired {
            return true;
        }
        decoded += g;
    }
    false
}

/// A receiver (node 0) hearing `gains.len()` transmitters (nodes 1..).
pub fn receiver_channel(gains: &[f64]) -> ChannelMatrix<f64> {
    let n = gains.len() + 1;
    let mut g = vec![0.0; n * n];
    for (i, &v) in gains.iter().enumerate() {
        g[i + 1] = v;
        g[(i + 1) * n] = v;
    }
    for i in 1..n {
        for j in 1..n {
            if i != j {
                g[i * n + j] = 1.0;
            }
        }
    }
    ChannelMatrix::from_gains(n, g).unwrap()
}

/// Verdict of the candidate's transmitter using only what it knows: a surveyed
/// channel table and the ongoing transmissions it has heard about.
pub fn local_verdict(topo: &NetworkTopology<f64>, ch: &ChannelMatrix<f64>, active: &LinkSet, cand: LinkId) -> bool {
    let owner = topo.link(cand).tx;
    let coeffs = CoeffTable::survey(owner, topo, ch);
    let mut txs = TxTable::new(owner);
    for l in active.iter() {
        let t = Transmission::of_link(topo, l);
        if topo.in_range(owner, t.tx) || topo.in_range(owner, t.rx) {
            txs.insert(t).unwrap();
        }
    }
    check_all_feasible(&Transmission::of_link(topo, cand), &coeffs, &txs, topo.phy()).unwrap()
}

/// Whether every pair among the endpoints of `links` is within range.
pub fn all_in_range(topo: &NetworkTopology<f64>, links: impl IntoIterator<Item = LinkId>) -> bool {
    let nodes: Vec<NodeId> = links.into_iter().flat_map(|l| [topo.link(l).tx, topo.link(l).rx]).collect();
    nodes.iter().all(|&a| nodes.iter().all(|&b| topo.in_range(a, b)))
}

pub fn topology(
    pos: &[[f64; 2]],
    pairs: &[(usize, usize)],
    phy: PhyConfig<f64>,
) -> (NetworkTopology<f64>, ChannelMatrix<f64>) {
    let nodes = pos.iter().enumerate().map(|(i, &p)| Node { id: NodeId(i), position: p }).collect();
    let links = pairs
        .iter()
        .enumerate()
        .map(|(l, &(tx, rx))| Link { id: LinkId(l), tx: NodeId(tx), rx: NodeId(rx), sinr_threshold: None })
        .collect();
    let topo = NetworkTopology::new(nodes, links, phy).unwrap();
    let ch = build_channel_matrix(&topo);
    (topo, ch)
}

pub fn scenario_path(name: &str) -> std::path::PathBuf {
    std::path::Path::new(env!("CARGO_MANIFEST_DIR")).join("scenarios").join(name)
}
