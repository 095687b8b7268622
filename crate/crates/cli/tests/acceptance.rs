//! Acceptance criteria C1–C8, one PASS/FAIL line each.
//!
//! C7 compares policies at desk scale. When one of its directional checks
//! does not hold, the line reads FAIL and each broken check is listed as a
//! DEVIATION; that outcome does not fail the run. Every other criterion
//! fails the run when it fails or exceeds its time budget.

use std::path::Path;
use std::time::{Duration, Instant};

use podsim::cluster::{throughput_margin, LocalityClass, RateProfile, RateVector, TaskType, Topology};
use podsim::engine::{mean_completion_time, queue_stability_stat, run, run_with_log, Horizon, SimConfig};
use podsim::policies::{PodConfig, PolicyKind, PolicyOptions};
use podsim::workload::{
    sample_type_pool, stream_rng, PoolScope, Popularity, ServiceFamily, ServiceModel, Stream, TimeMode,
};
use podsim_cli::config::{ExperimentSpec, PolicyEntry};
use podsim_cli::experiment::{run_experiment, write_experiment, Experiment, SummaryRow};
use podsim_cli::{goldens, plot};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

struct Outcome {
    pass: bool,
    summary: String,
    details: Vec<String>,
}

impl Outcome {
    fn new(pass: bool, summary: impl Into<String>) -> Self {
        Self {
            pass,
            summary: summary.into(),
            details: vec![],
        }
    }
}

struct Criterion {
    id: &'static str,
    title: &'static str,
    budget: Duration,
    /// A failure is reported but does not fail the run.
    deviation_only: bool,
    check: fn() -> Outcome,
}

fn main() {
    let criteria = [
        Criterion {
            id: "C1",
            title: "sampling-cost constants",
            budget: Duration::from_secs(1),
            deviation_only: false,
            check: c1_sampling_costs,
        },
        Criterion {
            id: "C2",
            title: "pod-to-parent reduction",
            budget: Duration::from_secs(10),
            deviation_only: false,
            check: c2_pod_reduction,
        },
        Criterion {
            id: "C3",
            title: "capacity LP oracle",
            budget: Duration::from_secs(30),
            deviation_only: false,
            check: c3_capacity_oracle,
        },
        Criterion {
            id: "C4",
            title: "M/M/1 closed form",
            budget: Duration::from_secs(60),
            deviation_only: false,
            check: c4_mm1,
        },
        Criterion {
            id: "C5",
            title: "service-mean contracts",
            budget: Duration::from_secs(10),
            deviation_only: false,
            check: c5_service_means,
        },
        Criterion {
            id: "C6",
            title: "stability",
            budget: Duration::from_secs(600),
            deviation_only: false,
            check: c6_stability,
        },
        Criterion {
            id: "C7",
            title: "qualitative figure shape",
            budget: Duration::from_secs(1800),
            deviation_only: true,
            check: c7_figure_shape,
        },
        Criterion {
            id: "C8",
            title: "determinism and goldens",
            budget: Duration::from_secs(60),
            deviation_only: false,
            check: c8_determinism,
        },
    ];

    let mut fatal = Vec::new();
    for c in &criteria {
        let start = Instant::now();
        let out = (c.check)();
        let elapsed = start.elapsed();
        let in_time = elapsed <= c.budget;
        let pass = out.pass && in_time;
        let mut note = String::new();
        if !in_time {
            note = format!(" over budget of {:?}", c.budget);
        } else if !pass && c.deviation_only {
            note = " (reported deviation)".into();
        }
        println!(
            "{} {} {}: {} [{:.2} s{}]",
            c.id,
            if pass { "PASS" } else { "FAIL" },
            c.title,
            out.summary,
            elapsed.as_secs_f64(),
            note
        );
        for d in &out.details {
            println!("    {d}");
        }
        if !pass && !(c.deviation_only && in_time) {
            fatal.push(c.id);
        }
    }
    if !fatal.is_empty() {
        println!("acceptance failed: {}", fatal.join(", "));
        std::process::exit(1);
    }
}

// ---------------------------------------------------------------- C1

fn c1_sampling_costs() -> Outcome {
    // Replicas in three different racks so both sampled strata are larger
    // than the requested counts.
    let topo = Topology::new(500, 10).unwrap();
    let w = RateVector::new(vec![
        (TaskType::new([1, 60, 300]).unwrap(), 30.0),
        (TaskType::new([120, 222, 480]).unwrap(), 30.0),
    ])
    .unwrap();
    let cost = |kind, pod| {
        let mut c = SimConfig::new(topo, w.clone(), kind);
        c.options.pod = Some(pod);
        c.horizon = Horizon::Arrivals(2_000);
        run(&c).unwrap().cost
    };
    let bp = cost(PolicyKind::BpPod, PodConfig::stratified(2, 6));
    let jsq = cost(PolicyKind::JsqMwPod, PodConfig::stratified(6, 6));
    let route = bp.route_examined as f64 / bp.route_decisions as f64;
    let sched = jsq.sched_examined as f64 / jsq.sched_decisions as f64;
    let pass = bp.route_examined == 11 * bp.route_decisions
        && route / 500.0 == 0.022
        && jsq.sched_examined == 13 * jsq.sched_decisions
        && bp.route_decisions > 0
        && jsq.sched_decisions > 0;
    Outcome::new(
        pass,
        format!(
            "bp_pod(2,6) routing examines {route} of 500 servers ({}%), jsq_mw_pod(6,6) scheduling examines {sched}",
            route / 5.0
        ),
    )
}

// ---------------------------------------------------------------- C2

fn c2_pod_reduction() -> Outcome {
    let topo = Topology::new(6, 2).unwrap();
    let pool = sample_type_pool(&topo, 20, 3, Popularity::Uniform, PoolScope::All, 5).unwrap();
    let shape = pool.shape();
    let margin = throughput_margin(&shape, &topo, &RateProfile::default())
        .unwrap()
        .margin;
    let trace = |kind, pod: Option<PodConfig>| {
        let mut c = SimConfig::new(topo, shape.scaled(0.85 * margin), kind);
        c.options = PolicyOptions {
            pod,
            count_in_service: false,
        };
        c.horizon = Horizon::Arrivals(10_000);
        c.seed = 21;
        let mut log = Vec::new();
        run_with_log(&c, &mut log).unwrap();
        log
    };
    let full = Some(PodConfig::stratified(6, 6));
    let mut details = vec![];
    let mut pass = true;
    for (pod, parent) in [
        (PolicyKind::BpPod, PolicyKind::Bp),
        (PolicyKind::JsqMwPod, PolicyKind::JsqMw),
    ] {
        let (a, b) = (trace(pod, full), trace(parent, None));
        let same = a == b;
        pass &= same;
        details.push(format!(
            "{pod} vs {parent}: {} log lines, {}",
            a.iter().filter(|&&c| c == b'\n').count(),
            if same { "identical" } else { "DIFFERENT" }
        ));
    }
    let mut o = Outcome::new(
        pass,
        "10,000-task traces on 6 servers / 2 racks with full-stratum sampling",
    );
    o.details = details;
    o
}

// ---------------------------------------------------------------- C3

/// Locality class computed from scratch: rack of server `m` is
/// `(m - 1) / per_rack`.
fn class_of(locals: &[usize], m: usize, per_rack: usize) -> LocalityClass {
    let rack = |s: usize| (s - 1) / per_rack;
    if locals.contains(&m) {
        LocalityClass::Local
    } else if locals.iter().any(|&l| rack(l) == rack(m)) {
        LocalityClass::RackLocal
    } else {
        LocalityClass::Remote
    }
}

/// Whether `rho * lambda` splits over servers with every server's
/// rate-weighted load at most 1. One type fits iff its rate is at most the
/// summed service rates. With two types, the first should occupy the
/// servers where it costs the second the least capacity per unit, which is
/// a fractional knapsack.
fn feasible(rho: f64, lambda: &[f64], rate: &[Vec<f64>]) -> bool {
    const TOL: f64 = 1e-12;
    match lambda {
        [l] => rho * l <= rate[0].iter().sum::<f64>() + TOL,
        [l1, l2] => {
            let (r1, r2) = (&rate[0], &rate[1]);
            let mut order: Vec<usize> = (0..r1.len()).collect();
            order.sort_by(|&a, &b| (r2[a] / r1[a]).total_cmp(&(r2[b] / r1[b])));
            let mut need = rho * l1;
            let mut left = 0.0;
            for m in order {
                let x = need.min(r1[m]);
                need -= x;
                left += r2[m] * (1.0 - x / r1[m]);
            }
            need <= TOL && rho * l2 <= left + TOL
        }
        _ => unreachable!("at most two types"),
    }
}

/// Largest multiple of `step` that is feasible, scanning upwards.
fn grid_margin(lambda: &[f64], rate: &[Vec<f64>], step: f64) -> f64 {
    let mut k = 0u64;
    while feasible((k + 1) as f64 * step, lambda, rate) {
        k += 1;
    }
    k as f64 * step
}

fn random_profile(rng: &mut ChaCha8Rng) -> RateProfile {
    let alpha = rng.random_range(0.5..2.0);
    let beta = alpha * rng.random_range(0.2..0.95);
    let gamma = beta * rng.random_range(0.2..0.95);
    RateProfile::new(alpha, beta, gamma).unwrap()
}

fn random_shape(rng: &mut ChaCha8Rng, m: usize, types: usize) -> RateVector {
    let mut entries: Vec<(TaskType, f64)> = Vec::new();
    while entries.len() < types {
        let r = rng.random_range(1..=m.min(3));
        let mut locals: Vec<usize> = rand::seq::index::sample(rng, m, r).into_iter().map(|i| i + 1).collect();
        locals.sort_unstable();
        let t = TaskType::new(locals).unwrap();
        if !entries.iter().any(|(u, _)| *u == t) {
            entries.push((t, rng.random_range(0.1..2.0)));
        }
    }
    RateVector::new(entries).unwrap()
}

fn c3_capacity_oracle() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    let mut worst_grid: f64 = 0.0;
    let mut n_grid = 0;
    while n_grid < 50 {
        let m = rng.random_range(1..=4);
        let divisors: Vec<usize> = (1..=m).filter(|k| m % k == 0).collect();
        let k = divisors[rng.random_range(0..divisors.len())];
        // Two distinct types need at least two servers.
        let types = if m == 1 { 1 } else { rng.random_range(1..=2) };
        let topo = Topology::new(m, k).unwrap();
        let profile = random_profile(&mut rng);
        let shape = random_shape(&mut rng, m, types);
        let lambda: Vec<f64> = shape.rates().collect();
        let rate: Vec<Vec<f64>> = shape
            .types()
            .map(|t| (1..=m).map(|s| profile.rate(class_of(t.locals(), s, m / k))).collect())
            .collect();
        let lp = throughput_margin(&shape, &topo, &profile).unwrap().margin;
        let grid = grid_margin(&lambda, &rate, 1e-3);
        worst_grid = worst_grid.max((lp - grid).abs());
        n_grid += 1;
    }

    let mut worst_homog: f64 = 0.0;
    for _ in 0..50 {
        let k = rng.random_range(1..=4);
        let m = k * rng.random_range(1..=4);
        let types = rng.random_range(1..=6.min(m));
        let topo = Topology::new(m, k).unwrap();
        let profile = random_profile(&mut rng);
        let shape = random_shape(&mut rng, m, types);
        let c = rng.random_range(0.01..100.0);
        let a = throughput_margin(&shape, &topo, &profile).unwrap().margin;
        let b = throughput_margin(&shape.scaled(c), &topo, &profile).unwrap().margin;
        worst_homog = worst_homog.max((b * c - a).abs() / a);
    }
    Outcome::new(
        worst_grid <= 2e-3 && worst_homog <= 1e-6,
        format!(
            "max |LP - grid(1e-3)| = {worst_grid:.2e} over {n_grid} instances (tol 2e-3); \
             max homogeneity error {worst_homog:.2e} over 50 instances (tol 1e-6)"
        ),
    )
}

// ---------------------------------------------------------------- C4

fn c4_mm1() -> Outcome {
    let mut pass = true;
    let mut details = vec![];
    for (lambda, expected) in [(0.5, 2.0), (0.8, 5.0)] {
        for kind in PolicyKind::ALL {
            let topo = Topology::new(1, 1).unwrap();
            let w = RateVector::new(vec![(TaskType::new([1]).unwrap(), lambda)]).unwrap();
            let mut c = SimConfig::new(topo, w, kind);
            c.horizon = Horizon::Arrivals(260_000);
            c.seed = 4;
            let r = run(&c).unwrap();
            let ct = mean_completion_time(&r).unwrap();
            // Closed form 1 / (mu - lambda) with mu = 1.
            let ok = ct.count >= 200_000 && (ct.mean - expected).abs() <= 0.05 * expected;
            pass &= ok;
            if !ok || kind == PolicyKind::Bp {
                details.push(format!(
                    "{kind} lambda={lambda}: {:.4} over {} tasks (expected {expected} +- 5%){}",
                    ct.mean,
                    ct.count,
                    if ok { "" } else { " FAIL" }
                ));
            }
        }
    }
    let mut o = Outcome::new(pass, "one server, replication 1, every policy at lambda 0.5 and 0.8");
    o.details = details;
    o
}

// ---------------------------------------------------------------- C5

fn c5_service_means() -> Outcome {
    let rates = RateProfile::default();
    let mut worst: f64 = 0.0;
    let mut details = vec![];
    for (family, mode) in [
        (ServiceFamily::Geometric, TimeMode::Slotted),
        (ServiceFamily::Exponential, TimeMode::Continuous),
        (ServiceFamily::LogNormal { cv: 2.0 }, TimeMode::Continuous),
    ] {
        let model = ServiceModel::new(family, rates, mode).unwrap();
        let mut rng = stream_rng(5, Stream::Service);
        let mut line = format!("{}:", family.name());
        for class in [LocalityClass::Local, LocalityClass::RackLocal, LocalityClass::Remote] {
            let n = 100_000;
            let mean = (0..n).map(|_| model.sample(class, &mut rng)).sum::<f64>() / n as f64;
            let target = 1.0 / rates.rate(class);
            let err = (mean - target).abs() / target;
            worst = worst.max(err);
            line.push_str(&format!(" {class} {mean:.4}/{target}"));
        }
        details.push(line);
    }
    let mut o = Outcome::new(
        worst <= 0.02,
        format!("max relative error {:.3}% (tol 2%)", worst * 100.0),
    );
    o.details = details;
    o
}

// ---------------------------------------------------------------- C6

fn desk() -> ExperimentSpec {
    ExperimentSpec::load(Path::new("preset:desk")).unwrap()
}

fn entry(name: PolicyKind, pod: Option<PodConfig>) -> PolicyEntry {
    PolicyEntry {
        name,
        pod,
        count_in_service: false,
    }
}

fn c6_stability() -> Outcome {
    let mut spec = desk();
    spec.run.loads = vec![0.7];
    spec.policies = vec![
        entry(PolicyKind::Bp, None),
        entry(PolicyKind::BpPod, Some(PodConfig::stratified(2, 6))),
        entry(PolicyKind::JsqMw, None),
        entry(PolicyKind::JsqMwPod, Some(PodConfig::stratified(6, 6))),
    ];
    let exp = run_experiment(&spec).unwrap();
    let mut pass = true;
    let mut details = vec![];
    for p in &spec.policies {
        let ratios: Vec<f64> = exp
            .rows
            .iter()
            .filter(|r| r.policy == p.name.name())
            .map(|r| r.stability_ratio)
            .collect();
        let ok = ratios.iter().all(|r| (0.8..=1.3).contains(r));
        pass &= ok;
        let shown: Vec<String> = ratios.iter().map(|r| format!("{r:.3}")).collect();
        details.push(format!(
            "{} at rho=0.7: [{}]{}",
            p.name,
            shown.join(", "),
            if ok { "" } else { " FAIL" }
        ));
    }

    // One type whose local servers sit in rack 1. The full capacity region
    // uses 3 local + 7 rack-local + 40 remote servers; JSQ-Priority serves
    // only on the 3 local ones.
    let topo = Topology::new(50, 5).unwrap();
    let t = TaskType::new([1, 2, 3]).unwrap();
    let shape = RateVector::new(vec![(t, 1.0)]).unwrap();
    let full = 3.0 * 1.0 + 7.0 * 0.5 + 40.0 * 0.25;
    let margin = throughput_margin(&shape, &topo, &RateProfile::default())
        .unwrap()
        .margin;
    let mut c = SimConfig::new(topo, shape.scaled(0.7 * margin), PolicyKind::JsqPriority);
    c.horizon = Horizon::Arrivals(200_000);
    c.warmup = 0.0;
    c.seed = 6;
    let s = queue_stability_stat(&run(&c).unwrap());
    let grows = s.ratio > 2.0;
    pass &= grows && (margin - full).abs() < 1e-9;
    details.push(format!(
        "jsq_priority, single type (1,2,3) at 0.7 x {margin} = {:.3} > 3 local servers: ratio {:.3}{}",
        0.7 * margin,
        s.ratio,
        if grows { "" } else { " FAIL" }
    ));
    let mut o = Outcome::new(
        pass,
        "four throughput-optimal policies in [0.8, 1.3]; jsq_priority outside its region > 2",
    );
    o.details = details;
    o
}

// ---------------------------------------------------------------- C7

fn overlap(a: &SummaryRow, b: &SummaryRow) -> bool {
    a.mean_completion_time - a.ci_half_width <= b.mean_completion_time + b.ci_half_width
        && b.mean_completion_time - b.ci_half_width <= a.mean_completion_time + a.ci_half_width
}

fn show(r: &SummaryRow) -> String {
    format!("{} {:.3}+-{:.3}", r.policy, r.mean_completion_time, r.ci_half_width)
}

/// Directional checks on a finished desk sweep: `(holds, description)`.
fn shape_checks(exp: &Experiment, bp: &str, bp_pod: &str) -> Vec<(bool, String)> {
    let get = |p: &str, rho: f64| exp.summary_row(p, rho).unwrap_or_else(|| panic!("{p} at {rho}"));
    let mut out = vec![];
    for rho in [0.3, 0.5, 0.7] {
        let (a, b) = (get(bp_pod, rho), get(bp, rho));
        out.push((
            a.mean_completion_time <= 1.02 * b.mean_completion_time,
            format!("rho={rho}: bp_pod <= 1.02 x bp: {} vs {}", show(a), show(b)),
        ));
    }
    let (a, b) = (get(bp, 0.9), get("jsq_mw", 0.9));
    out.push((
        a.mean_completion_time <= b.mean_completion_time || overlap(a, b),
        format!("rho=0.9: bp <= jsq_mw: {} vs {}", show(a), show(b)),
    ));
    let w = get("jsq_mw_pod", 0.9);
    for other in [bp, bp_pod, "jsq_mw"] {
        let o = get(other, 0.9);
        out.push((
            w.mean_completion_time >= o.mean_completion_time || overlap(w, o),
            format!("rho=0.9: jsq_mw_pod >= {other}: {} vs {}", show(w), show(o)),
        ));
    }
    out
}

fn c7_figure_shape() -> Outcome {
    let spec = desk();
    assert_eq!(spec.service, ServiceFamily::Exponential);
    assert_eq!(
        (spec.cluster.servers, spec.cluster.racks, spec.run.replications),
        (50, 5, 5)
    );
    let exp = run_experiment(&spec).unwrap();
    let checks = shape_checks(&exp, "bp", "bp_pod");
    let held = checks.iter().filter(|c| c.0).count();
    let mut details: Vec<String> = checks
        .iter()
        .map(|(ok, d)| format!("{} {d}", if *ok { "ok       " } else { "DEVIATION" }))
        .collect();

    // Informational: the Balanced-Pandas pair with the task in service
    // counted in the workload.
    let mut variant = spec.clone();
    variant.policies = vec![
        PolicyEntry {
            count_in_service: true,
            ..entry(PolicyKind::Bp, None)
        },
        PolicyEntry {
            count_in_service: true,
            ..entry(PolicyKind::BpPod, Some(PodConfig::stratified(2, 6)))
        },
    ];
    let v = run_experiment(&variant).unwrap();
    let mut merged = exp.clone();
    merged.summary.retain(|r| r.policy.starts_with("jsq"));
    merged.summary.extend(v.summary.iter().map(|r| SummaryRow {
        policy: format!("{}+", r.policy),
        ..r.clone()
    }));
    for (ok, d) in shape_checks(&merged, "bp+", "bp_pod+") {
        details.push(format!(
            "info, in-service workload: {} {d}",
            if ok { "holds" } else { "fails" }
        ));
    }

    Outcome {
        pass: held == checks.len(),
        summary: format!(
            "{held} of {} directional checks hold on 50 servers, {} rows",
            checks.len(),
            exp.rows.len()
        ),
        details,
    }
}

// ---------------------------------------------------------------- C8

fn c8_determinism() -> Outcome {
    let goldens_ok = goldens::check_goldens(&goldens::default_dir()).is_ok();
    let twice = PolicyKind::ALL
        .iter()
        .all(|&k| goldens::render(k).unwrap() == goldens::render(k).unwrap());

    let mut spec = desk();
    spec.cluster.servers = 12;
    spec.cluster.racks = 3;
    if let Some(p) = spec.pool.as_mut() {
        p.size = 30;
    }
    spec.run.loads = vec![0.5, 0.9];
    spec.run.replications = 2;
    spec.run.horizon = podsim_cli::config::HorizonSpec::Arrivals(5_000);
    let tmp = tempfile::tempdir().unwrap();
    let mut dirs = vec![];
    for workers in [1, 4] {
        spec.run.workers = Some(workers);
        let dir = tmp.path().join(format!("w{workers}"));
        let exp = run_experiment(&spec).unwrap();
        write_experiment(&exp, &dir).unwrap();
        plot::emit_plot_data(&exp.summary, &dir).unwrap();
        dirs.push(dir);
    }
    let mut names: Vec<_> = std::fs::read_dir(&dirs[0])
        .unwrap()
        .map(|e| e.unwrap().file_name())
        .collect();
    names.sort();
    let same = names
        .iter()
        .all(|n| std::fs::read(dirs[0].join(n)).ok() == std::fs::read(dirs[1].join(n)).ok());
    Outcome::new(
        goldens_ok && twice && same,
        format!(
            "6 golden traces match committed files: {goldens_ok}; regenerate identically: {twice}; \
             {} output files identical with 1 and 4 workers: {same}",
            names.len()
        ),
    )
}
