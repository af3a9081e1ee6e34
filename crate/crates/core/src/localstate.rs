//! Per-node knowledge: the channel table `C_i`, the ongoing-transmission table
//! `T_i`, how overheard RTS/CTS/ACK packets update them, and the local
//! feasibility check a transmitter runs before letting its backoff timer count.

use std::collections::BTreeMap;

use thiserror::Error;

use crate::phy::{decode_staged, ChannelMatrix, LinkId, NetworkTopology, NodeId, PhyConfig, Signal};
use crate::scalar::Real;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum TableError {
    #[error("table of {owner} has no gain estimate for ({a}, {b})")]
    MissingGain { owner: NodeId, a: NodeId, b: NodeId },
    #[error("{node} is already busy in the transmission table of {owner}")]
    NodeBusy { owner: NodeId, node: NodeId },
    #[error("{tx} -> {rx} is not listed in the transmission table")]
    NotListed { tx: NodeId, rx: NodeId },
    #[error("tables belong to {owner}, not to transmitter {tx}")]
    WrongOwner { owner: NodeId, tx: NodeId },
}

/// What a node knows about the channel between two nodes.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Estimate<T> {
    /// The pair is within range and this is the estimated power gain.
    Gain(T),
    /// The pair is known to be out of range; its interference is part of the far-field bound.
    Beyond,
}

/// Turns a true channel gain into the value a node would estimate from a control packet.
pub trait GainEstimator<T> {
    fn estimate(&mut self, a: NodeId, b: NodeId, true_gain: T) -> T;
}

/// Noiseless estimation: control and data channels see identical gains.
#[derive(Debug, Clone, Copy, Default)]
pub struct Exact;

impl<T> GainEstimator<T> for Exact {
    fn estimate(&mut self, _a: NodeId, _b: NodeId, true_gain: T) -> T {
        true_gain
    }
}

fn pair(a: NodeId, b: NodeId) -> (NodeId, NodeId) {
    if a <= b {
        (a, b)
    } else {
        (b, a)
    }
}

/// Channel coefficient table `C_i` held by one node.
#[derive(Debug, Clone, PartialEq)]
pub struct CoeffTable<T> {
    owner: NodeId,
    entries: BTreeMap<(NodeId, NodeId), Estimate<T>>,
}

impl<T: Real> CoeffTable<T> {
    pub fn new(owner: NodeId) -> Self {
        Self { owner, entries: BTreeMap::new() }
    }

    /// Table of a node that already knows every gain among its neighborhood, plus the
    /// gain of each link whose receiver it can hear (the CTS payload).
    pub fn survey(owner: NodeId, topology: &NetworkTopology<T>, channel: &ChannelMatrix<T>) -> Self {
        let mut table = Self::new(owner);
        let hood: Vec<NodeId> = topology.neighborhood(owner).collect();
        for (k, &a) in hood.iter().enumerate() {
            for &b in &hood[k + 1..] {
                let est = if topology.in_range(a, b) { Estimate::Gain(channel.gain(a, b)) } else { Estimate::Beyond };
                table.entries.insert(pair(a, b), est);
            }
        }
        for link in topology.links() {
            if topology.in_range(owner, link.rx) {
                table.entries.insert(pair(link.tx, link.rx), Estimate::Gain(channel.gain(link.tx, link.rx)));
            }
        }
        table
    }

    pub fn owner(&self) -> NodeId {
        self.owner
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn get(&self, a: NodeId, b: NodeId) -> Option<Estimate<T>> {
        self.entries.get(&pair(a, b)).copied()
    }

    pub fn gain(&self, a: NodeId, b: NodeId) -> Option<T> {
        match self.get(a, b) {
            Some(Estimate::Gain(g)) => Some(g),
            _ => None,
        }
    }

    pub fn set_gain(&mut self, a: NodeId, b: NodeId, g: T) {
        if a != b {
            self.entries.insert(pair(a, b), Estimate::Gain(g));
        }
    }

    /// Whether `node` is the owner or a node the owner has heard.
    pub fn is_neighbor(&self, node: NodeId) -> bool {
        node == self.owner || self.gain(node, self.owner).is_some()
    }

    /// The owner heard an RTS from `rts_tx` (addressed to `rts_rx`).
    pub fn overhear_rts(&mut self, rts_tx: NodeId, rts_rx: NodeId, channel: &ChannelMatrix<T>) {
        self.overhear_rts_with(rts_tx, rts_rx, channel, &mut Exact)
    }

    pub fn overhear_rts_with(
        &mut self,
        rts_tx: NodeId,
        _rts_rx: NodeId,
        channel: &ChannelMatrix<T>,
        est: &mut impl GainEstimator<T>,
    ) {
        let g = est.estimate(rts_tx, self.owner, channel.gain(rts_tx, self.owner));
        self.set_gain(rts_tx, self.owner, g);
    }

    /// The owner heard a CTS from `cts_tx` answering `original_tx`; the CTS carries the
    /// receiver's estimate of the link gain.
    pub fn overhear_cts(&mut self, cts_tx: NodeId, original_tx: NodeId, embedded_gain: T, channel: &ChannelMatrix<T>) {
        self.overhear_cts_with(cts_tx, original_tx, embedded_gain, channel, &mut Exact)
    }

    pub fn overhear_cts_with(
        &mut self,
        cts_tx: NodeId,
        original_tx: NodeId,
        embedded_gain: T,
        channel: &ChannelMatrix<T>,
        est: &mut impl GainEstimator<T>,
    ) {
        let g = est.estimate(cts_tx, self.owner, channel.gain(cts_tx, self.owner));
        self.set_gain(cts_tx, self.owner, g);
        self.set_gain(original_tx, cts_tx, embedded_gain);
    }

    /// ACKs refresh estimates exactly like a CTS.
    pub fn overhear_ack(&mut self, ack_tx: NodeId, original_tx: NodeId, embedded_gain: T, channel: &ChannelMatrix<T>) {
        self.overhear_cts(ack_tx, original_tx, embedded_gain, channel)
    }
}

/// One ongoing transmission as announced by its RTS/CTS exchange.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Transmission<T> {
    pub link: LinkId,
    pub tx: NodeId,
    pub rx: NodeId,
    /// SINR the link needs, carried in the control packets.
    pub threshold: T,
}

impl<T: Real> Transmission<T> {
    pub fn of_link(topology: &NetworkTopology<T>, link: LinkId) -> Self {
        let l = topology.link(link);
        Self { link, tx: l.tx, rx: l.rx, threshold: topology.threshold(link) }
    }
}

/// Ongoing-transmission table `T_i`. A node occurs at most once, as transmitter or receiver.
#[derive(Debug, Clone, PartialEq)]
pub struct TxTable<T> {
    owner: NodeId,
    active: Vec<Transmission<T>>,
}

impl<T: Real> TxTable<T> {
    pub fn new(owner: NodeId) -> Self {
        Self { owner, active: Vec::new() }
    }

    pub fn owner(&self) -> NodeId {
        self.owner
    }

    pub fn iter(&self) -> impl Iterator<Item = &Transmission<T>> {
        self.active.iter()
    }

    pub fn len(&self) -> usize {
        self.active.len()
    }

    pub fn is_empty(&self) -> bool {
        self.active.is_empty()
    }

    pub fn involves(&self, node: NodeId) -> bool {
        self.active.iter().any(|t| t.tx == node || t.rx == node)
    }

    pub fn insert(&mut self, t: Transmission<T>) -> Result<(), TableError> {
        for node in [t.tx, t.rx] {
            if self.involves(node) {
                return Err(TableError::NodeBusy { owner: self.owner, node });
            }
        }
        self.active.push(t);
        Ok(())
    }

    /// Drops the entry for `link`; returns whether it was present.
    pub fn remove(&mut self, link: LinkId) -> bool {
        let before = self.active.len();
        self.active.retain(|t| t.link != link);
        before != self.active.len()
    }
}

/// Whether `rx` decodes `tx` using only the owner's tables. Interferers are the
/// transmitters in `txs` the owner can hear; pairs marked out of range are left to
/// the far-field bound.
pub fn check_feasible<T: Real>(
    tx: NodeId,
    rx: NodeId,
    coeffs: &CoeffTable<T>,
    txs: &TxTable<T>,
    phy: &PhyConfig<T>,
) -> Result<bool, TableError> {
    if !txs.iter().any(|t| t.tx == tx && t.rx == rx) {
        return Err(TableError::NotListed { tx, rx });
    }
    let mut signals = Vec::with_capacity(txs.len());
    for t in txs.iter() {
        if t.tx != tx && !coeffs.is_neighbor(t.tx) {
            continue;
        }
        match coeffs.get(t.tx, rx) {
            Some(Estimate::Gain(gain)) => signals.push(Signal { node: t.tx, gain, threshold: t.threshold }),
            Some(Estimate::Beyond) if t.tx != tx => {}
            _ => return Err(TableError::MissingGain { owner: coeffs.owner(), a: t.tx, b: rx }),
        }
    }
    Ok(decode_staged(tx, &mut signals, phy.noise_floor(), phy.cancel_fraction).expect("desired transmitter listed"))
}

/// Whether the owner may start `candidate` now: every receiver the owner can hear,
/// including the candidate's own, must still decode its signal once the candidate
/// joins the ongoing transmissions.
pub fn check_all_feasible<T: Real>(
    candidate: &Transmission<T>,
    coeffs: &CoeffTable<T>,
    txs: &TxTable<T>,
    phy: &PhyConfig<T>,
) -> Result<bool, TableError> {
    if coeffs.owner() != candidate.tx {
        return Err(TableError::WrongOwner { owner: coeffs.owner(), tx: candidate.tx });
    }
    // half duplex
    if txs.involves(candidate.tx) || txs.involves(candidate.rx) {
        return Ok(false);
    }
    let mut with_new = txs.clone();
    with_new.insert(*candidate)?;
    for t in with_new.iter() {
        if t.link != candidate.link && !coeffs.is_neighbor(t.rx) {
            continue;
        }
        if !check_feasible(t.tx, t.rx, coeffs, &with_new, phy)? {
            return Ok(false);
        }
    }
    Ok(true)
}
