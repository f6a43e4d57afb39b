//! Acceptance gate: one PASS/FAIL line per criterion, nonzero exit on any failure.
//!
//! Simulation criteria run the shipped `n1`/`n2` scenarios at 30 replications.

use std::path::PathBuf;
use std::process::ExitCode;
use std::time::Instant;

use lora_capacity::airtime::{pure_aloha_throughput, time_on_air, AirtimeParams};
use lora_capacity::analytic::{coverage_probability, TypicalNode};
use lora_capacity::montecarlo::estimate_coverage;
use lora_capacity::simulator::{multichannel_projection, run_replication, sweep, SimOutcome, Summary, SweepResult, Verdict};
use lora_capacity::specfun::hyp2f1;
use lora_capacity::specfun::oracle::hyp2f1_oracle;
use lora_capacity::{CollisionModel, Scenario, SpreadingFactor};

const REPLICATIONS: usize = 30;
const MC_TRIALS: u64 = 1_000_000;

fn config(name: &str) -> Scenario {
    let path = PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("../../configs").join(name);
    Scenario::load(&path).unwrap_or_else(|e| panic!("{}: {e}", path.display()))
}

struct Gate {
    failed: usize,
}

impl Gate {
    fn report(&mut self, id: u32, title: &str, ok: bool, detail: String) {
        if !ok {
            self.failed += 1;
        }
        println!("{} C{id:<2} {title}: {detail}", if ok { "PASS" } else { "FAIL" });
    }
}

struct Curves {
    n1_bp: SweepResult,
    n1_ic: SweepResult,
    n2_bp: SweepResult,
    n2_ic: SweepResult,
    n2_iic: SweepResult,
}

fn run_case(file: &str, model: CollisionModel) -> (Scenario, SweepResult) {
    let mut s = config(file);
    s.simulation.collision_model = model;
    s.simulation.replications = REPLICATIONS;
    let loads = s.traffic.offered_loads.clone();
    let r = sweep(&s, &loads).expect("sweep runs");
    (s, r)
}

fn within(value: f64, target: f64, tol: f64) -> bool {
    (value - target).abs() <= tol
}

fn aloha_peak(g: &mut Gate) {
    let s = pure_aloha_throughput(0.5);
    g.report(1, "pure-ALOHA peak", within(s, 0.18394, 1e-4), format!("S(0.5) = {s:.6}, target 0.18394 ± 1e-4"));
}

fn airtime_points(g: &mut Gate) {
    let sf7 = time_on_air(&AirtimeParams::eu868(SpreadingFactor::new(7).unwrap(), 14)).unwrap();
    let mean = SpreadingFactor::ALL
        .iter()
        .map(|&sf| time_on_air(&AirtimeParams::eu868(sf, 14)).unwrap())
        .sum::<f64>()
        / 6.0;
    let ok = within(sf7, 0.0463, 1e-4) && within(mean, 0.3995, 5e-3);
    g.report(
        2,
        "time on air",
        ok,
        format!("SF7 = {:.3} ms (46.3 ± 0.1), mean SF7-12 = {:.2} ms (399.5 ± 5)", sf7 * 1e3, mean * 1e3),
    );
}

fn n1_bp_vs_theory(g: &mut Gate, c: &Curves, elapsed: f64) {
    let mut worst = (0.0, 0.0);
    for p in &c.n1_bp.points {
        let theory = pure_aloha_throughput(p.offered);
        let rel = (p.throughput.mean - theory).abs() / theory;
        if rel > worst.0 {
            worst = (rel, p.offered);
        }
    }
    g.report(
        3,
        "N1/BP against G·exp(-2G)",
        worst.0 <= 0.02,
        format!(
            "worst relative error {:.3}% at G = {:.1} (limit 2%), sweep took {elapsed:.1} s",
            worst.0 * 100.0,
            worst.1
        ),
    );
}

fn peak(r: &SweepResult) -> &SimOutcome {
    r.max_throughput()
}

fn throughput_maxima(g: &mut Gate, c: &Curves) {
    let checks = [
        ("N2/BP", peak(&c.n2_bp), 0.214),
        ("N1/IC", peak(&c.n1_ic), 0.27),
        ("N2/IC", peak(&c.n2_ic), 0.812),
        ("N2/IIC", peak(&c.n2_iic), 0.652),
    ];
    let mut ok = true;
    let mut parts = Vec::new();
    for (name, p, target) in checks {
        let hit = within(p.throughput.mean, target, 0.05);
        ok &= hit;
        parts.push(format!(
            "{name} {:.3}@{:.1} ({target}){}",
            p.throughput.mean,
            p.offered,
            if hit { "" } else { " MISS" }
        ));
    }
    let argmax = peak(&c.n1_ic).offered;
    let arg_ok = within(argmax, 0.8, 0.1 + 1e-9);
    ok &= arg_ok;
    parts.push(format!("N1/IC argmax G = {argmax:.1} (0.8 ± 0.1){}", if arg_ok { "" } else { " MISS" }));
    g.report(4, "throughput maxima ± 0.05 E", ok, parts.join(", "));
}

fn pdr_endpoints(g: &mut Gate, c: &Curves) {
    let checks = [
        ("N1/BP", &c.n1_bp, 0.82, 0.135),
        ("N2/BP", &c.n2_bp, 0.826, 0.192),
        ("N1/IC", &c.n1_ic, 0.879, 0.27),
        ("N2/IIC", &c.n2_iic, 0.952, 0.652),
        ("N2/IC", &c.n2_ic, 0.978, 0.812),
    ];
    let mut ok = true;
    let mut parts = Vec::new();
    for (name, r, lo_target, hi_target) in checks {
        let lo = r.at(0.1).expect("G = 0.1 swept").pdr.mean;
        let hi = r.at(1.0).expect("G = 1.0 swept").pdr.mean;
        let hit = within(lo, lo_target, 0.05) && within(hi, hi_target, 0.05);
        ok &= hit;
        parts.push(format!(
            "{name} {lo:.3}->{hi:.3} ({lo_target}->{hi_target}){}",
            if hit { "" } else { " MISS" }
        ));
    }
    g.report(5, "PDR endpoints ± 0.05", ok, parts.join(", "));
}

fn analytic_vs_mc(g: &mut Gate) {
    let base = config("coverage.toml");
    let t0 = Instant::now();
    let mut agree = 0;
    let mut worst = 0.0f64;
    let mut seed = 1000;
    for n in [250.0, 500.0, 2500.0] {
        let mut s = base.clone();
        s.topology = s.topology.with_mean_nodes(n);
        for d in [300.0, 900.0, 1500.0, 2100.0, 2700.0] {
            let node = TypicalNode::in_ring(d, &s.topology).unwrap();
            let analytic = coverage_probability(&node, &s).unwrap().c1;
            let mc = estimate_coverage(&node, &s, MC_TRIALS, seed).unwrap();
            seed += 1;
            let z = mc.c1.z_score(analytic).abs();
            worst = worst.max(z);
            if z <= 3.0 {
                agree += 1;
            }
        }
    }
    g.report(
        6,
        "analytic C1 against Monte Carlo",
        agree >= 14,
        format!(
            "{agree}/15 points within 3 SE (need 14), worst |z| = {worst:.2}, {} trials each, {:.1} s",
            MC_TRIALS,
            t0.elapsed().as_secs_f64()
        ),
    );
}

fn coverage_shape(g: &mut Gate) {
    let base = config("coverage.toml");
    let grid: Vec<f64> = (1..=300).map(|k| 10.0 * k as f64).collect();
    let curve = |n: f64| -> (Scenario, Vec<(usize, f64)>) {
        let mut s = base.clone();
        s.topology = s.topology.with_mean_nodes(n);
        let pts = grid
            .iter()
            .map(|&d| {
                let node = TypicalNode::in_ring(d, &s.topology).unwrap();
                let ring = node.sf.index();
                (ring, coverage_probability(&node, &s).unwrap().c1)
            })
            .collect();
        (s, pts)
    };
    let counts = [250.0, 500.0, 2500.0];
    let curves: Vec<_> = counts.iter().map(|&n| curve(n)).collect();

    let mut monotone_n = true;
    for pair in curves.windows(2) {
        for (a, b) in pair[0].1.iter().zip(&pair[1].1) {
            monotone_n &= b.1 <= a.1;
        }
    }
    let mut decreasing_d = true;
    let mut jumps = true;
    for (s, pts) in &curves {
        for w in pts.windows(2) {
            if w[0].0 == w[1].0 {
                decreasing_d &= w[1].1 < w[0].1;
            }
        }
        for j in 1..s.topology.num_rings() {
            let l = s.topology.boundaries()[j];
            let at = |d: f64| {
                let node = TypicalNode::in_ring(d, &s.topology).unwrap();
                coverage_probability(&node, s).unwrap().c1
            };
            jumps &= at(l * (1.0 + 1e-9)) > at(l);
        }
    }
    g.report(
        7,
        "coverage curve shape",
        monotone_n && decreasing_d && jumps,
        format!(
            "non-increasing in N: {monotone_n}, decreasing within rings: {decreasing_d}, jump at every boundary: {jumps}"
        ),
    );
}

fn hypergeometric(g: &mut Gate) {
    let mut worst = 0.0f64;
    let mut points = 0;
    for eta in [2.1, 2.75, 4.0] {
        let b = 2.0 / eta;
        let per_eta = if eta == 4.0 { 66 } else { 67 };
        for k in 0..per_eta {
            // Log-spaced magnitudes from 1e-3 to 1e6.
            let x = -(10f64.powf(-3.0 + 9.0 * k as f64 / (per_eta - 1) as f64));
            let f = hyp2f1(1.0, b, 1.0 + b, x).unwrap();
            let o = hyp2f1_oracle(1.0, b, 1.0 + b, x).unwrap();
            worst = worst.max(((f - o) / o).abs());
            points += 1;
        }
    }
    let mut worst_ln = 0.0f64;
    for k in 0..20 {
        let x = 10f64.powf(-3.0 + 9.0 * k as f64 / 19.0);
        let f = hyp2f1(1.0, 1.0, 2.0, -x).unwrap();
        let exact = x.ln_1p() / x;
        worst_ln = worst_ln.max(((f - exact) / exact).abs());
    }
    g.report(
        8,
        "2F1 accuracy",
        points == 200 && worst <= 1e-10 && worst_ln <= 1e-12,
        format!("{points}-point oracle grid worst rel {worst:.2e} (≤ 1e-10), ln identity worst rel {worst_ln:.2e} (≤ 1e-12)"),
    );
}

fn projection(g: &mut Gate, c: &Curves) {
    let best = peak(&c.n1_ic);
    let proj = multichannel_projection(best, 5).unwrap();
    let sim_ok = proj.throughput.mean == 5.0 * best.throughput.mean && proj.pdr == best.pdr;
    let mut quoted = best.clone();
    quoted.throughput = Summary { mean: 0.27, ci95: 0.0 };
    quoted.pdr = Summary { mean: 0.338, ci95: 0.0 };
    let q = multichannel_projection(&quoted, 5).unwrap();
    let quoted_ok = within(q.throughput.mean, 1.35, 1e-12) && q.pdr.mean == 0.338;
    g.report(
        9,
        "multichannel projection",
        sim_ok && quoted_ok,
        format!(
            "0.27 E x 5 = {:.2} E with PDR {}; simulated peak {:.4} -> {:.4} E, PDR kept {:.4}",
            q.throughput.mean, q.pdr.mean, best.throughput.mean, proj.throughput.mean, proj.pdr.mean
        ),
    );
}

fn properties(g: &mut Gate, c: &Curves, n1: &Scenario, n2: &Scenario) {
    let all = [&c.n1_bp, &c.n1_ic, &c.n2_bp, &c.n2_ic, &c.n2_iic];

    let mut conserved = true;
    let mut duty = 0.0f64;
    for r in all {
        for p in &r.points {
            duty = duty.max(p.max_node_airtime_fraction);
            for rep in &p.replications {
                conserved &= rep.tx_count == rep.rx_count + rep.lost_count();
            }
        }
    }

    let mut again = n2.clone();
    again.simulation.collision_model = CollisionModel::Iic;
    let rerun = sweep(&again, &[0.1, 1.0]).unwrap();
    let deterministic = rerun.points[0].replications == c.n2_iic.at(0.1).unwrap().replications
        && rerun.points[1].replications == c.n2_iic.at(1.0).unwrap().replications;

    let mut unique = true;
    for (base, model) in [(n1, CollisionModel::Ic), (n2, CollisionModel::Ic), (n2, CollisionModel::Iic)] {
        let mut s = base.clone();
        s.simulation.collision_model = model;
        let trace = run_replication(&s, 1.0, 0, true).unwrap().trace;
        let mut rx: Vec<_> = trace.iter().filter(|p| p.verdict == Verdict::Received).collect();
        rx.sort_by(|a, b| a.start.total_cmp(&b.start));
        for (i, a) in rx.iter().enumerate() {
            for b in rx[i + 1..].iter().take_while(|b| b.start < a.end) {
                unique &= !(a.sf == b.sf && a.channel == b.channel);
            }
        }
    }

    let mut ordered = true;
    let le = |a: &Summary, b: &Summary| a.mean <= b.mean + a.ci95 + b.ci95;
    for k in 0..c.n2_bp.points.len() {
        let (bp, iic, ic) = (&c.n2_bp.points[k], &c.n2_iic.points[k], &c.n2_ic.points[k]);
        ordered &= le(&bp.throughput, &iic.throughput) && le(&iic.throughput, &ic.throughput);
        ordered &= le(&c.n1_bp.points[k].throughput, &c.n1_ic.points[k].throughput);
    }

    let duty_ok = duty <= 0.01;
    g.report(
        10,
        "simulator properties",
        conserved && deterministic && unique && ordered && duty_ok,
        format!(
            "conservation {conserved}, bit-exact rerun {deterministic}, one capture per episode {unique}, BP <= IIC <= IC {ordered}, max node airtime {:.3}% (<= 1%)",
            duty * 100.0
        ),
    );
}

fn main() -> ExitCode {
    let mut g = Gate { failed: 0 };
    aloha_peak(&mut g);
    airtime_points(&mut g);

    let t0 = Instant::now();
    let (n1, n1_bp) = run_case("n1.toml", CollisionModel::Bp);
    let n1_bp_time = t0.elapsed().as_secs_f64();
    let (_, n1_ic) = run_case("n1.toml", CollisionModel::Ic);
    let (n2, n2_bp) = run_case("n2.toml", CollisionModel::Bp);
    let (_, n2_ic) = run_case("n2.toml", CollisionModel::Ic);
    let (_, n2_iic) = run_case("n2.toml", CollisionModel::Iic);
    let curves = Curves {
        n1_bp,
        n1_ic,
        n2_bp,
        n2_ic,
        n2_iic,
    };
    n1_bp_vs_theory(&mut g, &curves, n1_bp_time);
    throughput_maxima(&mut g, &curves);
    pdr_endpoints(&mut g, &curves);
    analytic_vs_mc(&mut g);
    coverage_shape(&mut g);
    hypergeometric(&mut g);
    projection(&mut g, &curves);
    properties(&mut g, &curves, &n1, &n2);

    println!("acceptance: {} of 10 criteria failed", g.failed);
    if g.failed == 0 {
        ExitCode::SUCCESS
    } else {
        ExitCode::FAILURE
    }
}
