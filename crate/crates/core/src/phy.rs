//! Physical layer: node geometry, channel gains and staged SIC decoding.
//!
//! Signals are modeled only by received power. A transmitter `k` active at
//! receiver `rx` contributes `P * g[k][rx]`; every quantity below is normalized
//! by the common transmit power `P`, so only `n_0 / P` ever matters.
//!
//! Decoding at a receiver proceeds strongest-first. At each stage the candidate
//! is compared against the noise floor, every weaker (still undecoded) signal and
//! the cancellation residual `(1 - z) * g` of each signal decoded so far. The
//! first failing stage ends decoding, so a signal is only decodable if every
//! stronger signal is.

use std::cmp::Ordering;
use std::fmt;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::scalar::Real;

/// Near-field clamp for the distance power law, in meters.
pub const MIN_DISTANCE: f64 = 1.0;

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(transparent)]
pub struct NodeId(pub usize);

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(transparent)]
pub struct LinkId(pub usize);

impl fmt::Display for NodeId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "n{}", self.0)
    }
}

impl fmt::Display for LinkId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "l{}", self.0)
    }
}

#[derive(Debug, Error, Clone, PartialEq)]
pub enum PhyError {
    #[error("invalid physical parameter: {0}")]
    InvalidParameter(String),
    #[error("node ids must be dense in [0, n): position {index} holds id {id}")]
    SparseNodeIds { index: usize, id: usize },
    #[error("link ids must be dense in [0, K): position {index} holds id {id}")]
    SparseLinkIds { index: usize, id: usize },
    #[error("link {0} references unknown node {1}")]
    UnknownNode(LinkId, NodeId),
    #[error("link {0} has identical transmitter and receiver")]
    SelfLink(LinkId),
    #[error("link {link} spans {distance} m, not shorter than the radius {radius} m")]
    LinkTooLong { link: LinkId, distance: f64, radius: f64 },
    #[error("nodes {0} and {1} share a position")]
    CoLocated(NodeId, NodeId),
    #[error("link {0} cannot be decoded even when transmitting alone")]
    SoloInfeasible(LinkId),
    #[error("too many links: {0} (at most {max})", max = crate::setspace::MAX_LINKS)]
    TooManyLinks(usize),
    #[error("transmitter {tx} is not among the active signals at {rx}")]
    InactiveTransmitter { tx: NodeId, rx: NodeId },
    #[error("channel matrix is {found}x{found}, expected {expected}x{expected}")]
    ChannelShape { expected: usize, found: usize },
    #[error("channel gain ({0}, {1}) is negative, non-finite or asymmetric")]
    BadGain(NodeId, NodeId),
}

/// Physical-layer constants common to the whole network.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields, bound(deserialize = "T: Real + Deserialize<'de>"))]
pub struct PhyConfig<T> {
    /// Transmit power `P` in watts, identical for all nodes.
    pub tx_power: T,
    /// Receiver noise `n_0` in watts.
    pub noise_power: T,
    /// Default SINR threshold; individual links may override it.
    pub sinr_threshold: T,
    /// Fraction `z` of a decoded signal's power removed from the sum.
    pub cancel_fraction: T,
    /// Decode and control range, meters.
    pub radius: T,
    /// Bound on aggregate interference from beyond `radius`, normalized by `P`.
    pub far_interference: T,
    pub path_loss_exponent: T,
}

impl<T: Real> Default for PhyConfig<T> {
    fn default() -> Self {
        Self {
            tx_power: T::one(),
            noise_power: T::lit(0.1),
            sinr_threshold: T::one(),
            cancel_fraction: T::one(),
            radius: T::lit(10.0),
            far_interference: T::zero(),
            path_loss_exponent: T::lit(3.0),
        }
    }
}

impl<T: Real> PhyConfig<T> {
    pub fn validate(&self) -> Result<(), PhyError> {
        let bad = |what: &str| Err(PhyError::InvalidParameter(what.to_string()));
        let finite = [
            self.tx_power,
            self.noise_power,
            self.sinr_threshold,
            self.cancel_fraction,
            self.radius,
            self.far_interference,
            self.path_loss_exponent,
        ];
        if finite.iter().any(|v| !v.is_finite()) {
            return bad("all parameters must be finite");
        }
        if self.tx_power <= T::zero() {
            return bad("tx_power must be > 0");
        }
        if self.noise_power < T::zero() {
            return bad("noise_power must be >= 0");
        }
        if self.sinr_threshold <= T::zero() {
            return bad("sinr_threshold must be > 0");
        }
        if self.cancel_fraction < T::zero() || self.cancel_fraction > T::one() {
            return bad("cancel_fraction must lie in [0, 1]");
        }
        if self.radius <= T::zero() {
            return bad("radius must be > 0");
        }
        if self.far_interference < T::zero() {
            return bad("far_interference must be >= 0");
        }
        if self.path_loss_exponent <= T::zero() {
            return bad("path_loss_exponent must be > 0");
        }
        Ok(())
    }

    /// Noise plus far-field interference, normalized by transmit power.
    pub fn noise_floor(&self) -> T {
        self.noise_power / self.tx_power + self.far_interference
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Node<T> {
    pub id: NodeId,
    pub position: [T; 2],
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Link<T> {
    pub id: LinkId,
    pub tx: NodeId,
    pub rx: NodeId,
    /// Per-link SINR threshold, for links running at a different rate.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub sinr_threshold: Option<T>,
}

/// Static description of the network: node positions, directed links and PHY constants.
#[derive(Debug, Clone, PartialEq)]
pub struct NetworkTopology<T> {
    nodes: Vec<Node<T>>,
    links: Vec<Link<T>>,
    phy: PhyConfig<T>,
}

impl<T: Real> NetworkTopology<T> {
    /// Validates the structural invariants (dense ids, distinct positions, short links).
    /// Solo feasibility is a separate admission check, see [`NetworkTopology::admit`].
    pub fn new(nodes: Vec<Node<T>>, links: Vec<Link<T>>, phy: PhyConfig<T>) -> Result<Self, PhyError> {
        phy.validate()?;
        for (index, node) in nodes.iter().enumerate() {
            if node.id.0 != index {
                return Err(PhyError::SparseNodeIds { index, id: node.id.0 });
            }
            if !node.position.iter().all(|c| c.is_finite()) {
                return Err(PhyError::InvalidParameter(format!("node {} has a non-finite position", node.id)));
            }
        }
        if links.len() > crate::setspace::MAX_LINKS {
            return Err(PhyError::TooManyLinks(links.len()));
        }
        for (i, a) in nodes.iter().enumerate() {
            for b in &nodes[i + 1..] {
                if a.position == b.position {
                    return Err(PhyError::CoLocated(a.id, b.id));
                }
            }
        }
        let topo = Self { nodes, links, phy };
        for (index, link) in topo.links.iter().enumerate() {
            if link.id.0 != index {
                return Err(PhyError::SparseLinkIds { index, id: link.id.0 });
            }
            for end in [link.tx, link.rx] {
                if end.0 >= topo.nodes.len() {
                    return Err(PhyError::UnknownNode(link.id, end));
                }
            }
            if link.tx == link.rx {
                return Err(PhyError::SelfLink(link.id));
            }
            if let Some(beta) = link.sinr_threshold {
                if !(beta.is_finite() && beta > T::zero()) {
                    return Err(PhyError::InvalidParameter(format!("link {} threshold must be > 0", link.id)));
                }
            }
            if !topo.in_range(link.tx, link.rx) {
                return Err(PhyError::LinkTooLong {
                    link: link.id,
                    distance: topo.distance(link.tx, link.rx).as_f64(),
                    radius: topo.phy.radius.as_f64(),
                });
            }
        }
        Ok(topo)
    }

    /// Checks that every link is decodable when it is the only active transmission.
    pub fn admit(&self, channel: &ChannelMatrix<T>) -> Result<(), PhyError> {
        channel.check_shape(self.nodes.len())?;
        for link in &self.links {
            let solo = [Emission { node: link.tx, threshold: self.threshold(link.id) }];
            if !sic_decodable(link.tx, link.rx, &solo, channel, &self.phy)? {
                return Err(PhyError::SoloInfeasible(link.id));
            }
        }
        Ok(())
    }

    pub fn nodes(&self) -> &[Node<T>] {
        &self.nodes
    }

    pub fn links(&self) -> &[Link<T>] {
        &self.links
    }

    pub fn phy(&self) -> &PhyConfig<T> {
        &self.phy
    }

    pub fn num_nodes(&self) -> usize {
        self.nodes.len()
    }

    pub fn num_links(&self) -> usize {
        self.links.len()
    }

    pub fn link(&self, id: LinkId) -> &Link<T> {
        &self.links[id.0]
    }

    /// SINR threshold of a link, falling back to the network default.
    pub fn threshold(&self, id: LinkId) -> T {
        self.links[id.0].sinr_threshold.unwrap_or(self.phy.sinr_threshold)
    }

    pub fn distance(&self, a: NodeId, b: NodeId) -> T {
        let [ax, ay] = self.nodes[a.0].position;
        let [bx, by] = self.nodes[b.0].position;
        (ax - bx).hypot(ay - by)
    }

    /// Whether `a` and `b` are strictly closer than the radius. A node is in range of itself.
    pub fn in_range(&self, a: NodeId, b: NodeId) -> bool {
        a == b || self.distance(a, b) < self.phy.radius
    }

    /// Nodes within the radius of `center`, including `center` itself.
    pub fn neighborhood(&self, center: NodeId) -> impl Iterator<Item = NodeId> + '_ {
        self.nodes.iter().map(|n| n.id).filter(move |&id| self.in_range(center, id))
    }
}

/// Symmetric matrix of channel power gains `g[i][j]`. The diagonal is zero.
#[derive(Debug, Clone, PartialEq)]
pub struct ChannelMatrix<T> {
    n: usize,
    g: Vec<T>,
}

impl<T: Real> ChannelMatrix<T> {
    /// Builds a matrix from explicit gains, row-major `n * n`. The diagonal is ignored.
    pub fn from_gains(n: usize, mut g: Vec<T>) -> Result<Self, PhyError> {
        if g.len() != n * n {
            return Err(PhyError::ChannelShape { expected: n, found: (g.len() as f64).sqrt() as usize });
        }
        for i in 0..n {
            g[i * n + i] = T::zero();
            for j in 0..i {
                let (a, b) = (g[i * n + j], g[j * n + i]);
                if !(a.is_finite() && a >= T::zero() && a == b) {
                    return Err(PhyError::BadGain(NodeId(i), NodeId(j)));
                }
            }
        }
        Ok(Self { n, g })
    }

    pub fn num_nodes(&self) -> usize {
        self.n
    }

    #[inline]
    pub fn gain(&self, a: NodeId, b: NodeId) -> T {
        self.g[a.0 * self.n + b.0]
    }

    fn check_shape(&self, n: usize) -> Result<(), PhyError> {
        if self.n == n {
            Ok(())
        } else {
            Err(PhyError::ChannelShape { expected: n, found: self.n })
        }
    }
}

/// Distance power-law gains `max(d, 1 m)^(-alpha)`.
pub fn build_channel_matrix<T: Real>(topology: &NetworkTopology<T>) -> ChannelMatrix<T> {
    let n = topology.num_nodes();
    let exponent = topology.phy.path_loss_exponent;
    let d_min = T::lit(MIN_DISTANCE);
    let mut g = vec![T::zero(); n * n];
    for i in 0..n {
        for j in (i + 1)..n {
            let d = topology.distance(NodeId(i), NodeId(j)).max(d_min);
            let gain = d.powf(-exponent);
            g[i * n + j] = gain;
            g[j * n + i] = gain;
        }
    }
    ChannelMatrix { n, g }
}

/// An active transmitter as seen by a receiver, tagged with the SINR its link needs.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Emission<T> {
    pub node: NodeId,
    pub threshold: T,
}

/// A received signal: who sent it, its power gain at the receiver, its required SINR.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Signal<T> {
    pub node: NodeId,
    pub gain: T,
    pub threshold: T,
}

/// Strongest first, ties by ascending node id.
fn decode_order<T: Real>(a: &Signal<T>, b: &Signal<T>) -> Ordering {
    b.gain.partial_cmp(&a.gain).unwrap_or(Ordering::Equal).then(a.node.cmp(&b.node))
}

/// Runs strongest-first successive decoding over `signals` and reports whether
/// the signal from `desired` is recovered. `noise_floor` is `n_0 / P` plus the
/// far-field bound. Returns `None` when `desired` is not among the signals.
pub fn decode_staged<T: Real>(
    desired: NodeId,
    signals: &mut [Signal<T>],
    noise_floor: T,
    cancel_fraction: T,
) -> Option<bool> {
    if !signals.iter().any(|s| s.node == desired) {
        return None;
    }
    signals.sort_by(decode_order);
    // weaker[k] = sum of gains strictly after stage k in decode order
    let mut weaker = vec![T::zero(); signals.len()];
    let mut acc = T::zero();
    for k in (0..signals.len()).rev() {
        weaker[k] = acc;
        acc = acc + signals[k].gain;
    }
    let residual_factor = T::one() - cancel_fraction;
    let mut decoded = T::zero();
    for (k, s) in signals.iter().enumerate() {
        let interference = weaker[k] + residual_factor * decoded + noise_floor;
        if !(s.gain > T::zero() && s.gain >= s.threshold * interference) {
            return Some(false);
        }
        if s.node == desired {
            return Some(true);
        }
        decoded = decoded + s.gain;
    }
    unreachable!("desired signal is present")
}

/// Whether `rx` decodes the signal of `tx` given the transmitters in `active`
/// (all assumed within the radius of `rx`; farther ones belong to `far_interference`).
pub fn sic_decodable<T: Real>(
    tx: NodeId,
    rx: NodeId,
    active: &[Emission<T>],
    channel: &ChannelMatrix<T>,
    phy: &PhyConfig<T>,
) -> Result<bool, PhyError> {
    let mut signals: Vec<Signal<T>> = active
        .iter()
        .map(|e| Signal { node: e.node, gain: channel.gain(e.node, rx), threshold: e.threshold })
        .collect();
    decode_staged(tx, &mut signals, phy.noise_floor(), phy.cancel_fraction)
        .ok_or(PhyError::InactiveTransmitter { tx, rx })
}
