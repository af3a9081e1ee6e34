//! Independent sets under SIC: the indicator `I(D)`, the neighborhood `eta(D)`,
//! enumeration of the feasible family and capacity-region membership.

pub mod lp;

use std::collections::{HashMap, VecDeque};
use std::fmt;

use thiserror::Error;

use crate::phy::{sic_decodable, ChannelMatrix, Emission, LinkId, NetworkTopology};
use crate::scalar::Real;
use lp::{Feasibility, Row};

/// Width limit of a [`LinkSet`].
pub const MAX_LINKS: usize = 64;

/// Default limit on `K` for exhaustive enumeration.
pub const DEFAULT_ENUMERATION_CAP: usize = 20;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum SetError {
    #[error("{links} links exceed the enumeration cap of {cap}; use the simulator instead")]
    CapExceeded { links: usize, cap: usize },
    #[error("rate vector has {found} entries, expected {expected}")]
    WidthMismatch { expected: usize, found: usize },
    #[error("rate vector entries must be finite and non-negative")]
    BadRates,
}

/// A subset of the links, stored as a bit vector of width `K`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct LinkSet {
    bits: u64,
    width: u8,
}

impl LinkSet {
    pub fn empty(width: usize) -> Self {
        assert!(width <= MAX_LINKS, "at most {MAX_LINKS} links");
        Self { bits: 0, width: width as u8 }
    }

    pub fn from_bits(width: usize, bits: u64) -> Self {
        let mut s = Self::empty(width);
        assert!(width == 64 || bits >> width == 0, "bits beyond width");
        s.bits = bits;
        s
    }

    pub fn from_links(width: usize, links: impl IntoIterator<Item = LinkId>) -> Self {
        links.into_iter().fold(Self::empty(width), |s, l| s.with(l))
    }

    pub fn bits(&self) -> u64 {
        self.bits
    }

    pub fn width(&self) -> usize {
        self.width as usize
    }

    pub fn len(&self) -> usize {
        self.bits.count_ones() as usize
    }

    pub fn is_empty(&self) -> bool {
        self.bits == 0
    }

    pub fn contains(&self, l: LinkId) -> bool {
        l.0 < self.width() && self.bits >> l.0 & 1 == 1
    }

    #[must_use]
    pub fn with(mut self, l: LinkId) -> Self {
        assert!(l.0 < self.width(), "link {l} outside width {}", self.width);
        self.bits |= 1 << l.0;
        self
    }

    #[must_use]
    pub fn without(mut self, l: LinkId) -> Self {
        if l.0 < self.width() {
            self.bits &= !(1 << l.0);
        }
        self
    }

    pub fn is_subset(&self, other: &LinkSet) -> bool {
        self.bits & !other.bits == 0
    }

    pub fn iter(&self) -> impl Iterator<Item = LinkId> + '_ {
        (0..self.width()).filter(|&i| self.bits >> i & 1 == 1).map(LinkId)
    }

    /// Size first, then bit pattern: `{}`, `{0}`, `{1}`, `{0,1}`, ...
    pub fn display_order(a: &LinkSet, b: &LinkSet) -> std::cmp::Ordering {
        a.len().cmp(&b.len()).then(a.bits.cmp(&b.bits))
    }
}

impl fmt::Display for LinkSet {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str("{")?;
        for (k, l) in self.iter().enumerate() {
            if k > 0 {
                f.write_str(",")?;
            }
            write!(f, "{}", l.0)?;
        }
        f.write_str("}")
    }
}

/// The indicator `I(D)`: node-disjoint links, each decodable at its receiver
/// given every active transmitter within range of that receiver.
pub fn is_independent<T: Real>(d: &LinkSet, topology: &NetworkTopology<T>, channel: &ChannelMatrix<T>) -> bool {
    let links: Vec<_> = d.iter().map(|l| topology.link(l)).collect();
    for (k, a) in links.iter().enumerate() {
        for b in &links[k + 1..] {
            if a.tx == b.tx || a.tx == b.rx || a.rx == b.tx || a.rx == b.rx {
                return false;
            }
        }
    }
    let phy = topology.phy();
    links.iter().all(|l| {
        let active: Vec<Emission<T>> = links
            .iter()
            .filter(|m| topology.in_range(m.tx, l.rx))
            .map(|m| Emission { node: m.tx, threshold: topology.threshold(m.id) })
            .collect();
        sic_decodable(l.tx, l.rx, &active, channel, phy).expect("own transmitter is in range")
    })
}

/// A family of feasible link sets, sorted by [`LinkSet::display_order`].
#[derive(Debug, Clone, PartialEq)]
pub struct FeasibleFamily {
    width: usize,
    sets: Vec<LinkSet>,
    index: HashMap<LinkSet, usize>,
}

impl FeasibleFamily {
    /// Builds a family from explicit sets; the empty set is always added.
    pub fn from_sets(width: usize, sets: impl IntoIterator<Item = LinkSet>) -> Self {
        let mut sets: Vec<LinkSet> = sets.into_iter().chain([LinkSet::empty(width)]).collect();
        assert!(sets.iter().all(|s| s.width() == width), "mixed widths");
        sets.sort_by(LinkSet::display_order);
        sets.dedup();
        let index = sets.iter().enumerate().map(|(i, &s)| (s, i)).collect();
        Self { width, sets, index }
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn sets(&self) -> &[LinkSet] {
        &self.sets
    }

    pub fn len(&self) -> usize {
        self.sets.len()
    }

    /// Never true: the empty set is always a member.
    pub fn is_empty(&self) -> bool {
        self.sets.is_empty()
    }

    pub fn contains(&self, d: &LinkSet) -> bool {
        self.index.contains_key(d)
    }

    pub fn index_of(&self, d: &LinkSet) -> Option<usize> {
        self.index.get(d).copied()
    }

    /// `eta(D)`: links that can join `d` with the result still in the family.
    pub fn eta(&self, d: &LinkSet) -> Vec<LinkId> {
        (0..self.width).map(LinkId).filter(|&l| !d.contains(l) && self.contains(&d.with(l))).collect()
    }

    /// Sets reachable from the empty set by single-link additions within the family.
    pub fn reachable(&self) -> FeasibleFamily {
        let empty = LinkSet::empty(self.width);
        let mut seen = vec![false; self.sets.len()];
        let mut queue = VecDeque::from([empty]);
        seen[self.index[&empty]] = true;
        while let Some(d) = queue.pop_front() {
            for l in self.eta(&d) {
                let next = d.with(l);
                let i = self.index[&next];
                if !seen[i] {
                    seen[i] = true;
                    queue.push_back(next);
                }
            }
        }
        FeasibleFamily::from_sets(self.width, self.sets.iter().zip(seen).filter(|(_, s)| *s).map(|(d, _)| *d))
    }

    /// Members not contained in any other member.
    pub fn maximal_sets(&self) -> Vec<LinkSet> {
        self.sets.iter().filter(|d| self.sets.iter().all(|e| e == *d || !d.is_subset(e))).copied().collect()
    }

    pub fn max_set_size(&self) -> usize {
        self.sets.iter().map(LinkSet::len).max().unwrap_or(0)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum Enumeration {
    /// Test every one of the `2^K` subsets.
    #[default]
    Exhaustive,
    /// Grow from the empty set one feasible link at a time.
    Reachable,
}

/// Enumerates `{D : I(D)}` (or its part reachable from the empty set).
pub fn enumerate_feasible<T: Real>(
    topology: &NetworkTopology<T>,
    channel: &ChannelMatrix<T>,
    mode: Enumeration,
    cap: usize,
) -> Result<FeasibleFamily, SetError> {
    let k = topology.num_links();
    if k > cap || k > MAX_LINKS {
        return Err(SetError::CapExceeded { links: k, cap: cap.min(MAX_LINKS) });
    }
    let sets = match mode {
        Enumeration::Exhaustive => (0..1u64 << k)
            .map(|bits| LinkSet::from_bits(k, bits))
            .filter(|d| is_independent(d, topology, channel))
            .collect::<Vec<_>>(),
        Enumeration::Reachable => {
            let mut memo: HashMap<LinkSet, bool> = HashMap::new();
            let mut stack = vec![LinkSet::empty(k)];
            memo.insert(LinkSet::empty(k), true);
            let mut found = Vec::new();
            while let Some(d) = stack.pop() {
                found.push(d);
                for l in (0..k).map(LinkId).filter(|&l| !d.contains(l)) {
                    let next = d.with(l);
                    if let std::collections::hash_map::Entry::Vacant(e) = memo.entry(next) {
                        let ok = is_independent(&next, topology, channel);
                        e.insert(ok);
                        if ok {
                            stack.push(next);
                        }
                    }
                }
            }
            found
        }
    };
    Ok(FeasibleFamily::from_sets(k, sets))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum Membership {
    /// `x` is dominated by a convex combination of family vectors (links may idle).
    #[default]
    Dominated,
    /// `x` equals a convex combination.
    Exact,
}

/// Convex weights over a family's sets, aligned with [`FeasibleFamily::sets`].
#[derive(Debug, Clone, PartialEq)]
pub struct CapacityWitness<T> {
    pub weights: Vec<T>,
}

impl<T: Real> CapacityWitness<T> {
    /// Per-link rate delivered by time sharing with these weights.
    pub fn rates(&self, family: &FeasibleFamily) -> Vec<T> {
        let mut rates = vec![T::zero(); family.width()];
        for (d, &w) in family.sets().iter().zip(&self.weights) {
            for l in d.iter() {
                rates[l.0] = rates[l.0] + w;
            }
        }
        rates
    }
}

/// Capacity-region membership of the rate vector `x`, with a witness on success.
pub fn capacity_contains<T: Real>(
    x: &[T],
    family: &FeasibleFamily,
    membership: Membership,
) -> Result<Option<CapacityWitness<T>>, SetError> {
    let k = family.width();
    if x.len() != k {
        return Err(SetError::WidthMismatch { expected: k, found: x.len() });
    }
    if x.iter().any(|v| !v.is_finite() || *v < T::zero()) {
        return Err(SetError::BadRates);
    }
    let columns: Vec<LinkSet> = match membership {
        Membership::Dominated => family.maximal_sets(),
        Membership::Exact => family.sets().to_vec(),
    };
    let mut lp = Feasibility::new(columns.len());
    lp.push(vec![T::one(); columns.len()], Row::Eq, T::one());
    let kind = match membership {
        Membership::Dominated => Row::Ge,
        Membership::Exact => Row::Eq,
    };
    for (l, &target) in x.iter().enumerate() {
        let coeffs = columns.iter().map(|d| if d.contains(LinkId(l)) { T::one() } else { T::zero() }).collect();
        lp.push(coeffs, kind, target);
    }
    Ok(lp.solve().map(|alpha| {
        let mut weights = vec![T::zero(); family.len()];
        for (d, a) in columns.iter().zip(alpha) {
            weights[family.index_of(d).expect("column from family")] = a;
        }
        CapacityWitness { weights }
    }))
}
