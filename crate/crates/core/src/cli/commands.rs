use anyhow::{bail, Result};

use super::output::{fmt_num, write_csv, ResultTable};
use super::scenario::Scenario;
use crate::adapt::adapt_run;
use crate::ctmc::{steady_state, SteadyState};
use crate::phy::LinkId;
use crate::setspace::{capacity_contains, enumerate_feasible, FeasibleFamily, Membership};
use crate::sim::{empirical_throughput, run, total_variation};

/// Queue growth above this many packets per unit time counts as unstable.
pub const SLOPE_TOLERANCE: f64 = 1e-4;

/// What a command produced: the CSV contract plus text for a human.
#[derive(Debug, Clone, PartialEq)]
pub struct Report {
    pub csv: String,
    pub summary: String,
    pub warnings: Vec<String>,
}

fn link_id(l: usize) -> String {
    LinkId(l).to_string()
}

fn join(v: &[f64]) -> String {
    v.iter().map(|x| format!("{x:.4}")).collect::<Vec<_>>().join(", ")
}

fn analytical(s: &Scenario) -> Result<(FeasibleFamily, SteadyState<f64>)> {
    let (cap, mode) = s.analysis();
    let family = enumerate_feasible(&s.topology, &s.channel, mode, cap)?;
    let q = steady_state(&family, &s.rate_params()?)?;
    Ok((family, q))
}

/// Feasible family, stationary law and per-link throughput.
pub fn cmd_analyze(s: &Scenario) -> Result<Report> {
    let (family, q) = analytical(s)?;
    let params = s.rate_params()?;
    let mut t = ResultTable::default();
    for (d, p) in q.iter() {
        t.push("state_prob", d.to_string(), Some(p), None);
    }
    for d in q.unreachable() {
        t.push("unreachable_state", d.to_string(), Some(0.0), None);
    }
    let tau = q.throughput();
    for (l, &v) in tau.iter().enumerate() {
        t.push("throughput", link_id(l), Some(v), None);
    }
    for (l, &v) in tau.iter().enumerate() {
        t.push("service_rate", link_id(l), Some(v * params.mu[l]), None);
    }
    let summary = format!(
        "{} links, {} feasible sets ({} reachable, largest has {} links)\nthroughput: [{}]\n",
        s.num_links(),
        family.len(),
        q.family().len(),
        family.max_set_size(),
        join(&tau)
    );
    Ok(Report { csv: t.to_csv()?, summary, warnings: Vec::new() })
}

/// Runs the protocol and sets empirical occupancy and throughput beside the analytical values.
pub fn cmd_simulate(s: &Scenario, seed: Option<u64>, horizon: Option<f64>) -> Result<Report> {
    let cfg = s.sim_config(seed, horizon)?;
    let mut warnings = Vec::new();
    let exact = match analytical(s) {
        Ok(a) => Some(a.1),
        Err(e) => {
            warnings.push(format!("analytical columns omitted: {e:#}"));
            None
        }
    };
    let stats = run(&s.topology, &s.channel, &cfg)?;
    let occupancy = stats.occupancy_fractions();
    let tau_emp = empirical_throughput(&stats);
    let window = stats.window();
    let mut t = ResultTable::default();
    let mut states: Vec<_> = exact.iter().flat_map(|q| q.family().sets().iter().copied()).collect();
    states.extend(occupancy.keys().filter(|d| !states.contains(d)).copied().collect::<Vec<_>>());
    for d in &states {
        let a = exact.as_ref().map(|q| q.prob(d));
        t.push("state_prob", d.to_string(), a, Some(occupancy.get(d).copied().unwrap_or(0.0)));
    }
    let tau = exact.as_ref().map(|q| q.throughput());
    for (l, &v) in tau_emp.iter().enumerate() {
        t.push("throughput", link_id(l), tau.as_ref().map(|x| x[l]), Some(v));
    }
    for (l, &c) in stats.completions.iter().enumerate() {
        let a = tau.as_ref().map(|x| x[l] * cfg.params.mu[l]);
        t.push("service_rate", link_id(l), a, Some(if window > 0.0 { c as f64 / window } else { 0.0 }));
    }
    let mut summary = format!(
        "simulated {} links for {} time units (warmup {}, seed {})\nthroughput: [{}]\n",
        s.num_links(),
        cfg.horizon,
        cfg.warmup,
        cfg.seed,
        join(&tau_emp)
    );
    if let Some(q) = &exact {
        let tv = total_variation(&occupancy, q.iter().map(|(d, p)| (*d, p)));
        t.push("total_variation", "all", None, Some(tv));
        summary.push_str(&format!("analytical:  [{}]\ntotal variation: {tv:.6}\n", join(&q.throughput())));
    }
    Ok(Report { csv: t.to_csv()?, summary, warnings })
}

/// Membership of `x` in the capacity region with a time-sharing witness.
pub fn cmd_capacity(s: &Scenario) -> Result<Report> {
    let (x, membership) = s.capacity()?;
    let (cap, mode) = s.analysis();
    let family = enumerate_feasible(&s.topology, &s.channel, mode, cap)?;
    let witness = capacity_contains(&x, &family, membership)?;
    let mut rows =
        vec![vec!["contained".to_string(), "all".to_string(), fmt_num(f64::from(u8::from(witness.is_some())))]];
    for (l, &v) in x.iter().enumerate() {
        rows.push(vec!["target".into(), link_id(l), fmt_num(v)]);
    }
    let summary = match &witness {
        Some(w) => {
            let rates = w.rates(&family);
            for (d, &a) in family.sets().iter().zip(&w.weights) {
                if a != 0.0 {
                    rows.push(vec!["weight".into(), d.to_string(), fmt_num(a)]);
                }
            }
            for (l, &v) in rates.iter().enumerate() {
                rows.push(vec!["rate".into(), link_id(l), fmt_num(v)]);
            }
            let gap = |i: usize| match membership {
                Membership::Dominated => (x[i] - rates[i]).max(0.0),
                Membership::Exact => (x[i] - rates[i]).abs(),
            };
            let worst = (0..x.len())
                .map(gap)
                .chain([(w.weights.iter().sum::<f64>() - 1.0).abs()])
                .chain(w.weights.iter().map(|&a| (-a).max(0.0)))
                .fold(0.0, f64::max);
            rows.push(vec!["max_violation".into(), "all".into(), fmt_num(worst)]);
            format!("[{}] is inside the capacity region (max constraint violation {worst:.3e})\n", join(&x))
        }
        None => format!("[{}] is outside the capacity region\n", join(&x)),
    };
    let header = ["quantity", "id", "value"].map(String::from);
    Ok(Report { csv: write_csv(&header, rows)?, summary, warnings: Vec::new() })
}

/// Gradient adaptation trace, one row per update.
pub fn cmd_adapt(s: &Scenario, seed: Option<u64>, horizon: Option<f64>) -> Result<Report> {
    let cfg = s.adapt_config(seed, horizon)?;
    if cfg.max_updates == 0 {
        bail!("adaptation needs at least one update");
    }
    let k = s.num_links();
    let mut warnings = Vec::new();
    let (cap, mode) = s.analysis();
    let padded: Vec<f64> = cfg.target_rates.iter().map(|x| x * (1.0 + cfg.margin)).collect();
    match enumerate_feasible(&s.topology, &s.channel, mode, cap) {
        Ok(family) => {
            if capacity_contains(&padded, &family, Membership::Dominated)?.is_none() {
                warnings.push(format!("target [{}] (with margin) lies outside the capacity region", join(&padded)));
            }
        }
        Err(e) => warnings.push(format!("capacity check skipped: {e}")),
    }
    let trace = adapt_run(&s.topology, &s.channel, &cfg)?;
    let mut header = vec!["update".to_string(), "time".to_string()];
    for name in ["r", "lambda", "tau", "queue"] {
        header.extend((0..k).map(|l| format!("{name}_{l}")));
    }
    let rows = trace.records.iter().map(|rec| {
        let mut row = vec![rec.update.to_string(), fmt_num(rec.time)];
        for v in [&rec.r, &rec.lambda_emp, &rec.tau_emp, &rec.queues] {
            row.extend(v.iter().map(|&x| fmt_num(x)));
        }
        row
    });
    let csv = write_csv(&header, rows)?;
    let service = trace.final_quarter_service();
    let slopes = trace.final_quarter_queue_slopes();
    for (l, &m) in slopes.iter().enumerate() {
        if m > SLOPE_TOLERANCE {
            warnings.push(format!("queue of link {l} grows by {m:.4} packets per unit time"));
        }
    }
    let last = trace.records.last().expect("at least one update");
    let summary = format!(
        "{} updates of period {}\nfinal r: [{}]\nfinal-quarter service: [{}]\nfinal-quarter queue slopes: [{}]\n",
        cfg.max_updates,
        cfg.update_period,
        join(&last.r),
        join(&service),
        slopes.iter().map(|m| format!("{m:.2e}")).collect::<Vec<_>>().join(", ")
    );
    Ok(Report { csv, summary, warnings })
}
