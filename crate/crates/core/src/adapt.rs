//! Gradient adjustment of the backoff exponents `r` toward a target arrival rate.
//!
//! Time is cut into epochs. Over each epoch the simulator measures, per link, the
//! arrival rate `λ'` of an external packet source and the service rate `τ'`
//! (completed transmissions per unit time); then
//! `r ← clamp(r + α (λ' − τ'), 0, r_cap)`. Arrivals feed a virtual queue that is
//! drained by services and floored at zero.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Poisson};

use crate::ctmc::RateParams;
use crate::phy::{ChannelMatrix, NetworkTopology};
use crate::scalar::Real;
use crate::sim::{SimError, Simulator};

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum StepSchedule<T> {
    /// `α(i) = a0 / (1 + i / i0)`.
    Diminishing {
        a0: T,
        i0: T,
    },
    Constant(T),
}

impl<T: Real> StepSchedule<T> {
    pub fn step(&self, i: usize) -> T {
        match *self {
            StepSchedule::Diminishing { a0, i0 } => a0 / (T::one() + T::lit(i as f64) / i0),
            StepSchedule::Constant(a) => a,
        }
    }
}

impl<T: Real> Default for StepSchedule<T> {
    fn default() -> Self {
        StepSchedule::Diminishing { a0: T::lit(0.1), i0: T::lit(100.0) }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum ArrivalProcess {
    /// Exactly `floor(x t)` packets by time `t`.
    #[default]
    Deterministic,
    Poisson,
}

#[derive(Debug, Clone, PartialEq)]
pub struct AdaptConfig<T> {
    pub target_rates: Vec<T>,
    pub step: StepSchedule<T>,
    /// Epoch length `t_i - t_{i-1}`.
    pub update_period: f64,
    pub max_updates: usize,
    pub r_cap: T,
    pub arrivals: ArrivalProcess,
    /// Relative headroom: the controller chases `λ' (1 + margin)` instead of `λ'`, so
    /// service settles strictly above arrivals and the queues drain.
    pub margin: T,
    /// Departure rates used by the simulator; unit rates when `None`.
    pub mu: Option<Vec<T>>,
    pub seed: u64,
}

impl<T: Real> AdaptConfig<T> {
    pub fn new(target_rates: Vec<T>, seed: u64) -> Self {
        Self {
            target_rates,
            step: StepSchedule::default(),
            update_period: 100.0,
            max_updates: 500,
            r_cap: T::lit(25.0),
            arrivals: ArrivalProcess::Deterministic,
            margin: T::zero(),
            mu: None,
            seed,
        }
    }

    pub fn validate(&self, k: usize) -> Result<(), SimError> {
        let bad = |m: &str| Err(SimError::Config(m.to_string()));
        if self.target_rates.len() != k {
            return bad("one target rate per link is required");
        }
        if self.target_rates.iter().any(|x| !x.is_finite() || *x < T::zero()) {
            return bad("target rates must be finite and >= 0");
        }
        if !(self.update_period.is_finite() && self.update_period > 0.0) {
            return bad("update_period must be > 0");
        }
        if !(self.r_cap.is_finite() && self.r_cap >= T::zero()) {
            return bad("r_cap must be finite and >= 0");
        }
        if !(self.margin.is_finite() && self.margin >= T::zero()) {
            return bad("margin must be finite and >= 0");
        }
        if self.mu.as_ref().is_some_and(|mu| mu.len() != k) {
            return bad("one departure rate per link is required");
        }
        match self.step {
            StepSchedule::Diminishing { a0, i0 } if a0 > T::zero() && i0 > T::zero() => Ok(()),
            StepSchedule::Constant(a) if a > T::zero() => Ok(()),
            _ => bad("step sizes must be positive"),
        }
    }
}

/// One gradient step with projection onto `[0, r_cap]`.
pub fn update_rates<T: Real>(r_prev: &[T], alpha: T, lambda_emp: &[T], tau_emp: &[T], r_cap: T) -> Vec<T> {
    assert!(r_prev.len() == lambda_emp.len() && r_prev.len() == tau_emp.len(), "length mismatch");
    r_prev
        .iter()
        .zip(lambda_emp.iter().zip(tau_emp))
        .map(|(&r, (&a, &s))| (r + alpha * (a - s)).min(r_cap).max(T::zero()))
        .collect()
}

/// State after the `update`-th epoch.
#[derive(Debug, Clone, PartialEq)]
pub struct AdaptRecord<T> {
    pub update: usize,
    /// `t_i`, the end of the epoch.
    pub time: f64,
    /// Exponents in force for the next epoch.
    pub r: Vec<T>,
    pub lambda_emp: Vec<T>,
    pub tau_emp: Vec<T>,
    pub queues: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct AdaptTrace<T> {
    pub records: Vec<AdaptRecord<T>>,
}

impl<T: Real> AdaptTrace<T> {
    fn final_quarter(&self) -> &[AdaptRecord<T>] {
        let n = self.records.len();
        &self.records[n - n.div_ceil(4)..]
    }

    /// Mean measured service rate per link over the last quarter of the updates.
    pub fn final_quarter_service(&self) -> Vec<f64> {
        let tail = self.final_quarter();
        let k = tail.first().map_or(0, |r| r.tau_emp.len());
        (0..k).map(|l| tail.iter().map(|r| r.tau_emp[l].as_f64()).sum::<f64>() / tail.len() as f64).collect()
    }

    /// Least-squares slope of each virtual queue against time over the last quarter.
    pub fn final_quarter_queue_slopes(&self) -> Vec<f64> {
        let tail = self.final_quarter();
        let k = tail.first().map_or(0, |r| r.queues.len());
        let t: Vec<f64> = tail.iter().map(|r| r.time).collect();
        (0..k)
            .map(|l| {
                let q: Vec<f64> = tail.iter().map(|r| r.queues[l]).collect();
                least_squares_slope(&t, &q)
            })
            .collect()
    }
}

/// Slope of the ordinary least-squares line through `(x, y)`; zero for fewer than two points.
pub fn least_squares_slope(x: &[f64], y: &[f64]) -> f64 {
    let n = x.len().min(y.len());
    if n < 2 {
        return 0.0;
    }
    let mx = x[..n].iter().sum::<f64>() / n as f64;
    let my = y[..n].iter().sum::<f64>() / n as f64;
    let (mut sxy, mut sxx) = (0.0, 0.0);
    for i in 0..n {
        sxy += (x[i] - mx) * (y[i] - my);
        sxx += (x[i] - mx) * (x[i] - mx);
    }
    if sxx == 0.0 {
        0.0
    } else {
        sxy / sxx
    }
}

/// Alternates simulation epochs with gradient updates, starting from `r = 0`.
pub fn adapt_run<T: Real>(
    topology: &NetworkTopology<T>,
    channel: &ChannelMatrix<T>,
    cfg: &AdaptConfig<T>,
) -> Result<AdaptTrace<T>, SimError> {
    let k = topology.num_links();
    cfg.validate(k)?;
    let mu = cfg.mu.clone().unwrap_or_else(|| vec![T::one(); k]);
    let mut params = RateParams { r: vec![T::zero(); k], mu };
    let mut sim = Simulator::new(topology, channel, &params, cfg.seed)?;
    // arrivals use their own stream family so they never perturb the protocol draws
    let mut arrival_rng = ChaCha8Rng::seed_from_u64(cfg.seed ^ 0xA221_7A15);
    let period = T::lit(cfg.update_period);
    let mut queues = vec![0.0; k];
    let mut served_before = vec![0u64; k];
    let mut records = Vec::with_capacity(cfg.max_updates);
    for i in 1..=cfg.max_updates {
        let (t0, t1) = ((i - 1) as f64 * cfg.update_period, i as f64 * cfg.update_period);
        sim.advance(t1)?;
        let mut lambda_emp = Vec::with_capacity(k);
        let mut tau_emp = Vec::with_capacity(k);
        for l in 0..k {
            let x = cfg.target_rates[l].as_f64();
            let arrived = match cfg.arrivals {
                ArrivalProcess::Deterministic => ((x * t1).floor() - (x * t0).floor()).max(0.0),
                ArrivalProcess::Poisson if x > 0.0 => {
                    Poisson::new(x * cfg.update_period).expect("positive mean").sample(&mut arrival_rng)
                }
                ArrivalProcess::Poisson => 0.0,
            };
            let served_total = sim.stats().completions[l];
            let served = (served_total - served_before[l]) as f64;
            served_before[l] = served_total;
            queues[l] = (queues[l] + arrived - served).max(0.0);
            lambda_emp.push(T::lit(arrived) / period);
            tau_emp.push(T::lit(served) / period);
        }
        let driven: Vec<T> = lambda_emp.iter().map(|&a| a * (T::one() + cfg.margin)).collect();
        params.r = update_rates(&params.r, cfg.step.step(i), &driven, &tau_emp, cfg.r_cap);
        sim.set_rates(&params)?;
        records.push(AdaptRecord {
            update: i,
            time: t1,
            r: params.r.clone(),
            lambda_emp,
            tau_emp,
            queues: queues.clone(),
        });
    }
    Ok(AdaptTrace { records })
}
