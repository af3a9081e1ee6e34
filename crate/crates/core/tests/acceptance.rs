//! Acceptance criteria, one line each. Exits non-zero if any criterion fails.

mod common;

use std::process::{Command, ExitCode};

use csma_sic::cli::Scenario;
use csma_sic::ctmc::{detailed_balance_residual, global_balance_residual, steady_state, RateParams};
use csma_sic::phy::{sic_decodable, Emission, LinkId, NodeId, PhyConfig};
use csma_sic::setspace::{
    capacity_contains, enumerate_feasible, is_independent, Enumeration, FeasibleFamily, Membership,
};
use csma_sic::sim::{empirical_throughput, run, total_variation, SimConfig};
use rand::Rng;

use common::{all_in_range, local_verdict, random_topology, receiver_channel, rng, scenario_path, triangle};

type Criterion = (&'static str, fn() -> Verdict);

struct Verdict {
    pass: bool,
    detail: String,
}

fn verdict(pass: bool, detail: String) -> Verdict {
    Verdict { pass, detail }
}

fn product_form() -> Verdict {
    let mut r = rng(1001);
    let (mut gb, mut db) = (0.0f64, 0.0f64);
    let n = 60;
    for i in 0..n {
        let k = 1 + i % 6;
        let (topo, ch) = random_topology(&mut r, k, 6.0, 8.0);
        let fam = enumerate_feasible(&topo, &ch, Enumeration::Exhaustive, 20).unwrap();
        let params = RateParams::new((0..k).map(|_| r.random_range(-3.0..=3.0)).collect());
        let q = steady_state(&fam, &params).unwrap();
        gb = gb.max(global_balance_residual(&fam, &params, &q));
        db = db.max(detailed_balance_residual(&fam, &params, &q));
    }
    verdict(
        gb <= 1e-10 && db <= 1e-12,
        format!("{n} topologies, worst global residual {gb:.2e}, worst detailed residual {db:.2e}"),
    )
}

struct Agreement {
    tv: f64,
    tau: f64,
}

fn agreement(topo: &csma_sic::Topology, ch: &csma_sic::Channel, params: RateParams<f64>, seed: u64) -> Agreement {
    let fam = enumerate_feasible(topo, ch, Enumeration::Exhaustive, 20).unwrap();
    let q = steady_state(&fam, &params).unwrap();
    let stats = run(topo, ch, &SimConfig::new(1e6, seed, params)).unwrap();
    let tv = total_variation(&stats.occupancy_fractions(), q.iter().map(|(d, p)| (*d, p)));
    let tau = empirical_throughput(&stats).iter().zip(q.throughput()).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max);
    Agreement { tv, tau }
}

fn ergodic_agreement() -> Verdict {
    let mut r = rng(2002);
    let mut cases = vec![(triangle(), RateParams::zeros(3)), (triangle(), RateParams::new(vec![2f64.ln(), 0.0, 0.0]))];
    for i in 0..10 {
        let k = 2 + i % 4;
        let case = random_topology(&mut r, k, 5.0, 20.0);
        let params = RateParams::new((0..k).map(|_| r.random_range(-1.0..=1.0)).collect());
        cases.push((case, params));
    }
    let results: Vec<Agreement> = std::thread::scope(|s| {
        let handles: Vec<_> = cases
            .iter()
            .enumerate()
            .map(|(i, ((topo, ch), params))| s.spawn(move || agreement(topo, ch, params.clone(), 7 + i as u64)))
            .collect();
        handles.into_iter().map(|h| h.join().unwrap()).collect()
    });
    let tv = results.iter().map(|a| a.tv).fold(0.0, f64::max);
    let tau = results.iter().map(|a| a.tau).fold(0.0, f64::max);
    verdict(
        tv <= 0.02 && tau <= 0.02,
        format!("{} scenarios at horizon 1e6, worst TV {tv:.4}, worst throughput gap {tau:.4}", results.len()),
    )
}

fn local_global() -> Verdict {
    let mut r = rng(3003);
    let (mut checked, mut agree, mut yes) = (0, 0, 0);
    while checked < 2000 {
        let k = 2 + checked % 5;
        let (topo, ch) = random_topology(&mut r, k, 4.0, 10.0);
        let fam = enumerate_feasible(&topo, &ch, Enumeration::Exhaustive, 20).unwrap();
        let d = fam.sets()[r.random_range(0..fam.len())];
        let free: Vec<LinkId> = (0..k).map(LinkId).filter(|&l| !d.contains(l)).collect();
        if free.is_empty() {
            continue;
        }
        let c = free[r.random_range(0..free.len())];
        if !all_in_range(&topo, d.iter().chain([c])) {
            continue;
        }
        let global = is_independent(&d.with(c), &topo, &ch);
        checked += 1;
        agree += usize::from(local_verdict(&topo, &ch, &d, c) == global);
        yes += usize::from(global);
    }
    verdict(
        agree == checked,
        format!("{agree}/{checked} instances agree ({yes} feasible, {} infeasible)", checked - yes),
    )
}

fn decode_order() -> Verdict {
    let mut r = rng(4004);
    let n = 5000;
    let (mut violations, mut decodable) = (0, 0);
    for _ in 0..n {
        let m = r.random_range(1..=8);
        let gains: Vec<f64> = (0..m).map(|_| 10f64.powf(r.random_range(-3.0..2.0))).collect();
        let ch = receiver_channel(&gains);
        let phy = PhyConfig {
            noise_power: r.random_range(0.0..0.5),
            cancel_fraction: r.random_range(0.0..=1.0),
            ..PhyConfig::default()
        };
        let active: Vec<Emission<f64>> =
            (0..m).map(|i| Emission { node: NodeId(i + 1), threshold: r.random_range(0.2..4.0) }).collect();
        let ok: Vec<bool> =
            (0..m).map(|i| sic_decodable(NodeId(i + 1), NodeId(0), &active, &ch, &phy).unwrap()).collect();
        decodable += ok.iter().filter(|&&b| b).count();
        for i in 0..m {
            for j in 0..m {
                if ok[i] && gains[j] > gains[i] && !ok[j] {
                    violations += 1;
                }
            }
        }
    }
    verdict(violations == 0, format!("{n} receivers, {decodable} decodable signals, {violations} violations"))
}

/// Every rate vector reachable by time sharing over `maximal` with weights on a 0.01 grid,
/// in hundredths.
fn grid_rates(k: usize, maximal: &[u64]) -> Vec<Vec<u32>> {
    fn compose(left: u32, parts: usize, prefix: &mut Vec<u32>, out: &mut Vec<Vec<u32>>) {
        if parts == 1 {
            prefix.push(left);
            out.push(prefix.clone());
            prefix.pop();
            return;
        }
        for w in 0..=left {
            prefix.push(w);
            compose(left - w, parts - 1, prefix, out);
            prefix.pop();
        }
    }
    let mut weights = Vec::new();
    compose(100, maximal.len(), &mut Vec::new(), &mut weights);
    weights
        .iter()
        .map(|w| {
            (0..k).map(|l| maximal.iter().zip(w).filter(|(d, _)| *d >> l & 1 == 1).map(|(_, &a)| a).sum()).collect()
        })
        .collect()
}

fn grid_covers(grid: &[Vec<u32>], x: &[f64]) -> bool {
    grid.iter().any(|v| v.iter().zip(x).all(|(&a, &b)| a as f64 / 100.0 >= b))
}

fn capacity_region() -> Verdict {
    let (topo, ch) = triangle();
    let fam = enumerate_feasible(&topo, &ch, Enumeration::Exhaustive, 20).unwrap();
    let x = [2.0 / 3.0; 3];
    let witness_ok = match capacity_contains(&x, &fam, Membership::Dominated).unwrap() {
        Some(w) => {
            let rates = w.rates(&fam);
            (w.weights.iter().sum::<f64>() - 1.0).abs() <= 1e-9
                && w.weights.iter().all(|&a| a >= -1e-9)
                && rates.iter().zip(&x).all(|(r, x)| *r >= x - 1e-9)
        }
        None => false,
    };
    let rejects = capacity_contains(&[0.7; 3], &fam, Membership::Dominated).unwrap().is_none();

    let mut r = rng(5005);
    let (mut families, mut checked, mut skipped, mut agree) = (0, 0, 0, 0);
    while families < 25 {
        let k = 2 + families % 3;
        let (topo, ch) = random_topology(&mut r, k, 6.0, 8.0);
        let fam: FeasibleFamily = enumerate_feasible(&topo, &ch, Enumeration::Exhaustive, 20).unwrap();
        let bits: Vec<u64> = fam.sets().iter().map(|d| d.bits()).collect();
        let maximal: Vec<u64> = bits.iter().copied().filter(|&a| !bits.iter().any(|&b| b != a && a & b == a)).collect();
        if maximal.len() > 4 {
            continue;
        }
        families += 1;
        let delta = 0.01 * maximal.len() as f64;
        let grid = grid_rates(k, &maximal);
        for _ in 0..80 {
            let mix: Vec<f64> = (0..maximal.len()).map(|_| r.random_range(0.0..1.0)).collect();
            let total: f64 = mix.iter().sum();
            let scale = r.random_range(0.7..1.3);
            let x: Vec<f64> = (0..k)
                .map(|l| {
                    let v: f64 =
                        maximal.iter().zip(&mix).filter(|(d, _)| *d >> l & 1 == 1).map(|(_, a)| a / total).sum();
                    (v * scale * r.random_range(0.9..1.1)).clamp(0.0, 1.0)
                })
                .collect();
            let lp = capacity_contains(&x, &fam, Membership::Dominated).unwrap().is_some();
            let shrunk: Vec<f64> = x.iter().map(|v| (v - delta).max(0.0)).collect();
            let oracle = if grid_covers(&grid, &x) {
                true
            } else if !grid_covers(&grid, &shrunk) {
                false
            } else {
                skipped += 1;
                continue;
            };
            checked += 1;
            agree += usize::from(lp == oracle);
        }
    }
    verdict(
        witness_ok && rejects && agree == checked,
        format!(
            "2/3 witness valid: {witness_ok}, 0.7 rejected: {rejects}, grid oracle {agree}/{checked} over {families} families ({skipped} points within grid resolution skipped)"
        ),
    )
}

fn adaptation() -> Verdict {
    let run = |name: &str| {
        let s = Scenario::load(&scenario_path(name)).unwrap();
        let cfg = s.adapt_config(None, None).unwrap();
        assert!(cfg.max_updates <= 500 && cfg.update_period == 100.0);
        let trace = csma_sic::adapt::adapt_run(&s.topology, &s.channel, &cfg).unwrap();
        (trace.final_quarter_service(), trace.final_quarter_queue_slopes())
    };
    let (service, slopes) = run("triangle.toml");
    let (_, overload) = run("triangle_overload.toml");
    let worst_service = service.iter().copied().fold(f64::INFINITY, f64::min);
    let worst_slope = slopes.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let overload_slope = overload.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    verdict(
        worst_service >= 0.47 && worst_slope <= 1e-4 && overload_slope > 0.05,
        format!(
            "target 0.5: min service {worst_service:.4}, max queue slope {worst_slope:.2e}; target 0.9: max queue slope {overload_slope:.4}"
        ),
    )
}

fn determinism() -> Verdict {
    let dir = tempfile::tempdir().unwrap();
    let mut identical = 0;
    let mut total = 0;
    for file in ["triangle.toml", "single_link.toml", "triangle_overload.toml"] {
        let scenario = scenario_path(file);
        let commands: &[&str] = match file {
            "triangle.toml" => &["analyze", "simulate", "capacity", "adapt"],
            "single_link.toml" => &["analyze", "simulate", "capacity"],
            _ => &["capacity", "adapt"],
        };
        for cmd in commands {
            let outs: Vec<Vec<u8>> = (0..2)
                .map(|i| {
                    let out = dir.path().join(format!("{file}.{cmd}.{i}.csv"));
                    let status = Command::new(env!("CARGO_BIN_EXE_csma-sic"))
                        .args([*cmd, scenario.to_str().unwrap(), "--out", out.to_str().unwrap()])
                        .output()
                        .unwrap()
                        .status;
                    assert!(status.success(), "{cmd} {file}");
                    std::fs::read(out).unwrap()
                })
                .collect();
            total += 1;
            identical += usize::from(outs[0] == outs[1] && !outs[0].is_empty());
        }
    }
    verdict(identical == total, format!("{identical}/{total} command reruns produced identical CSV bytes"))
}

fn main() -> ExitCode {
    let criteria: [Criterion; 7] = [
        ("product-form balance", product_form),
        ("simulator vs chain", ergodic_agreement),
        ("local vs global feasibility", local_global),
        ("decode order", decode_order),
        ("capacity region", capacity_region),
        ("rate adaptation", adaptation),
        ("determinism", determinism),
    ];
    let mut failed = 0;
    for (i, (name, check)) in criteria.iter().enumerate() {
        let started = std::time::Instant::now();
        let v = check();
        failed += usize::from(!v.pass);
        println!(
            "criterion {} {:<28} {}  {} [{:.1}s]",
            i + 1,
            name,
            if v.pass { "PASS" } else { "FAIL" },
            v.detail,
            started.elapsed().as_secs_f64()
        );
    }
    if failed == 0 {
        ExitCode::SUCCESS
    } else {
        println!("{failed} criteria failed");
        ExitCode::FAILURE
    }
}
