//! The CSMA-SIC Markov chain over feasible link sets.
//!
//! From state `D` link `i` joins at rate `lambda_i = exp(r_i)` whenever
//! `i ∈ eta(D)` and leaves `D + i` at rate `mu_i`. The chain is reversible and its
//! stationary law has product form `Q(D) ∝ Π_{i∈D} lambda_i / mu_i`.

use thiserror::Error;

use crate::phy::LinkId;
use crate::scalar::{log_sum_exp, Real};
use crate::setspace::{FeasibleFamily, LinkSet};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum CtmcError {
    #[error("expected {expected} rate entries, found {found}")]
    WidthMismatch { expected: usize, found: usize },
    #[error("link {0}: r must be finite and mu positive and finite")]
    BadRate(LinkId),
    #[error("state weights are not finite")]
    NonFinite,
}

/// Aggressiveness exponents `r` and departure rates `mu`, one per link.
#[derive(Debug, Clone, PartialEq)]
pub struct RateParams<T> {
    pub r: Vec<T>,
    /// Departure rate; the mean packet duration is `1 / mu`.
    pub mu: Vec<T>,
}

impl<T: Real> RateParams<T> {
    /// Unit departure rates.
    pub fn new(r: Vec<T>) -> Self {
        let mu = vec![T::one(); r.len()];
        Self { r, mu }
    }

    pub fn zeros(k: usize) -> Self {
        Self::new(vec![T::zero(); k])
    }

    /// From attempt rates `lambda` rather than exponents.
    pub fn from_lambda(lambda: &[T], mu: Vec<T>) -> Self {
        Self { r: lambda.iter().map(|l| l.ln()).collect(), mu }
    }

    pub fn len(&self) -> usize {
        self.r.len()
    }

    pub fn is_empty(&self) -> bool {
        self.r.is_empty()
    }

    pub fn lambda(&self, l: LinkId) -> T {
        self.r[l.0].exp()
    }

    pub fn mu(&self, l: LinkId) -> T {
        self.mu[l.0]
    }

    pub fn validate(&self, width: usize) -> Result<(), CtmcError> {
        for found in [self.r.len(), self.mu.len()] {
            if found != width {
                return Err(CtmcError::WidthMismatch { expected: width, found });
            }
        }
        for (i, (r, mu)) in self.r.iter().zip(&self.mu).enumerate() {
            if !r.is_finite() || !mu.is_finite() || *mu <= T::zero() {
                return Err(CtmcError::BadRate(LinkId(i)));
            }
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Transition<T> {
    pub from: usize,
    pub to: usize,
    pub link: LinkId,
    pub rate: T,
}

/// Off-diagonal generator entries over the states of a family, by state index.
#[derive(Debug, Clone, PartialEq)]
pub struct RateMatrix<T> {
    pub states: usize,
    pub transitions: Vec<Transition<T>>,
}

impl<T: Real> RateMatrix<T> {
    pub fn rate(&self, from: usize, to: usize) -> T {
        self.transitions.iter().find(|t| t.from == from && t.to == to).map_or(T::zero(), |t| t.rate)
    }

    /// Total rate out of `from`.
    pub fn exit_rate(&self, from: usize) -> T {
        self.transitions.iter().filter(|t| t.from == from).map(|t| t.rate).sum()
    }
}

pub fn transition_rates<T: Real>(family: &FeasibleFamily, params: &RateParams<T>) -> Result<RateMatrix<T>, CtmcError> {
    params.validate(family.width())?;
    let mut transitions = Vec::new();
    for (from, d) in family.sets().iter().enumerate() {
        for l in family.eta(d) {
            let to = family.index_of(&d.with(l)).expect("eta stays in family");
            transitions.push(Transition { from, to, link: l, rate: params.lambda(l) });
            transitions.push(Transition { from: to, to: from, link: l, rate: params.mu(l) });
        }
    }
    transitions.sort_by_key(|t| (t.from, t.to));
    Ok(RateMatrix { states: family.len(), transitions })
}

/// Stationary distribution over the states reachable from the empty set.
#[derive(Debug, Clone, PartialEq)]
pub struct SteadyState<T> {
    family: FeasibleFamily,
    probs: Vec<T>,
    unreachable: Vec<LinkSet>,
}

impl<T: Real> SteadyState<T> {
    /// Wraps an arbitrary distribution (e.g. an empirical one) over `family`.
    pub fn from_probs(family: FeasibleFamily, probs: Vec<T>) -> Self {
        assert_eq!(family.len(), probs.len(), "one probability per state");
        Self { family, probs, unreachable: Vec::new() }
    }

    pub fn family(&self) -> &FeasibleFamily {
        &self.family
    }

    pub fn probs(&self) -> &[T] {
        &self.probs
    }

    pub fn iter(&self) -> impl Iterator<Item = (&LinkSet, T)> {
        self.family.sets().iter().zip(self.probs.iter().copied())
    }

    /// `Q(D)`; zero for sets outside the chain.
    pub fn prob(&self, d: &LinkSet) -> T {
        self.family.index_of(d).map_or(T::zero(), |i| self.probs[i])
    }

    /// Feasible sets the chain can never enter, which carry no probability.
    pub fn unreachable(&self) -> &[LinkSet] {
        &self.unreachable
    }

    /// `tau_i = Σ_{D ∋ i} Q(D)`.
    pub fn throughput(&self) -> Vec<T> {
        let mut tau = vec![T::zero(); self.family.width()];
        for (d, q) in self.iter() {
            for l in d.iter() {
                tau[l.0] = tau[l.0] + q;
            }
        }
        tau
    }
}

/// Product-form steady state, normalized in log space.
pub fn steady_state<T: Real>(family: &FeasibleFamily, params: &RateParams<T>) -> Result<SteadyState<T>, CtmcError> {
    params.validate(family.width())?;
    let reach = family.reachable();
    let unreachable: Vec<LinkSet> = family.sets().iter().filter(|d| !reach.contains(d)).copied().collect();
    let log_ratio: Vec<T> = params.r.iter().zip(&params.mu).map(|(&r, &mu)| r - mu.ln()).collect();
    let log_w: Vec<T> = reach.sets().iter().map(|d| d.iter().map(|l| log_ratio[l.0]).sum()).collect();
    let lse = log_sum_exp(&log_w);
    if !lse.is_finite() {
        return Err(CtmcError::NonFinite);
    }
    let probs: Vec<T> = log_w.iter().map(|&w| (w - lse).exp()).collect();
    if probs.iter().any(|p| !p.is_finite()) {
        return Err(CtmcError::NonFinite);
    }
    Ok(SteadyState { family: reach, probs, unreachable })
}

/// Largest violation of the global balance equations by `q` over `family`.
pub fn global_balance_residual<T: Real>(family: &FeasibleFamily, params: &RateParams<T>, q: &SteadyState<T>) -> T {
    let mut worst = T::zero();
    for d in family.sets() {
        let eta = family.eta(d);
        let out: T = d.iter().map(|i| params.mu(i)).sum::<T>() + eta.iter().map(|&j| params.lambda(j)).sum::<T>();
        let inflow: T = d.iter().map(|i| params.lambda(i) * q.prob(&d.without(i))).sum::<T>()
            + eta.iter().map(|&j| params.mu(j) * q.prob(&d.with(j))).sum::<T>();
        worst = worst.max((out * q.prob(d) - inflow).abs());
    }
    worst
}

/// Largest violation of `mu_j Q(D + j) = lambda_j Q(D)` over the chain's edges.
pub fn detailed_balance_residual<T: Real>(family: &FeasibleFamily, params: &RateParams<T>, q: &SteadyState<T>) -> T {
    let mut worst = T::zero();
    for d in family.sets() {
        for j in family.eta(d) {
            let r = (params.mu(j) * q.prob(&d.with(j)) - params.lambda(j) * q.prob(d)).abs();
            worst = worst.max(r);
        }
    }
    worst
}

/// Stationary probability that each link is transmitting.
pub fn expected_throughput<T: Real>(family: &FeasibleFamily, params: &RateParams<T>) -> Result<Vec<T>, CtmcError> {
    Ok(steady_state(family, params)?.throughput())
}
