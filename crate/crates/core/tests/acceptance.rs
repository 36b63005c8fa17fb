//! Acceptance suite. Prints one PASS/FAIL line per criterion and exits
//! non-zero if any criterion fails.

use std::path::Path;
use std::process::ExitCode;
use std::time::Instant;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use sybilsim_core::adversary::burst_batch_size;
use sybilsim_core::analysis::{
    check_corollary_windows, check_lemma_algcost, check_lemma_joinbad, check_theorem1, check_theorem2, cs2_holds,
    default_windows, detect_epochs, detect_epochs_brute_force, A2Options, AssumptionConstants, CheckReport,
    EpochAnalysis,
};
use sybilsim_core::baselines::remp_spend_rate;
use sybilsim_core::churn::{generate, GeneratorSpec, TraceDuration};
use sybilsim_core::experiments::{
    assumptions, execute, gmcom_failure, loglog_slope, parse_defenses, sweep, ExperimentKind, ExperimentSpec, Network,
    RunSummary, SweepResult,
};
use sybilsim_core::{run, AdversaryConfig, ChurnTrace, Defense, SimConfig, SimResult};

struct Outcome {
    pass: bool,
    detail: String,
}

fn outcome(pass: bool, detail: impl Into<String>) -> Outcome {
    Outcome { pass, detail: detail.into() }
}

/// `T ∈ {2^10, 2^12, ..., 2^30}`.
fn grid() -> Vec<f64> {
    (10..=30).step_by(2).map(|e| 2f64.powi(e)).collect()
}

fn grid_spec(kind: ExperimentKind, defenses: &str) -> ExperimentSpec {
    let mut spec = ExperimentSpec::new(kind, Network::Gnutella);
    spec.t_values = grid();
    spec.runs = 5;
    spec.seed = 1;
    spec.sim_seconds = 2000.0;
    spec.defenses = parse_defenses(defenses).unwrap();
    spec.check_bounds = true;
    spec
}

fn mean_at(res: &SweepResult, defense: &str, t: f64) -> f64 {
    res.row(defense, t).map_or(f64::NAN, |r| r.mean_alg)
}

fn merged(runs: &[&RunSummary], pick: impl Fn(&sybilsim_core::experiments::BoundChecks) -> &CheckReport) -> CheckReport {
    let mut total: Option<CheckReport> = None;
    for r in runs {
        let c = pick(r.checks.as_ref().expect("bound checks enabled"));
        match &mut total {
            Some(t) => t.merge(c),
            None => total = Some(c.clone()),
        }
    }
    total.expect("at least one run")
}

fn describe(r: &CheckReport) -> String {
    format!("{} {}/{} failed (worst ratio {:.3})", r.name, r.failed, r.checked, r.worst_ratio)
}

fn criterion1(togcom: &SweepResult, elapsed: f64) -> Outcome {
    let (x, y): (Vec<f64>, Vec<f64>) = togcom.series("togcom").into_iter().unzip();
    match loglog_slope(&x, &y) {
        Ok(s) => {
            let pass = (0.35..=0.65).contains(&s) && x.len() == grid().len() && elapsed < 600.0;
            outcome(pass, format!("ToGCom slope {s:.4} over {} T values, in [0.35, 0.65]; {elapsed:.1} s on one thread", x.len()))
        }
        Err(e) => outcome(false, format!("slope unavailable: {e}")),
    }
}

fn criterion2(togcom: &SweepResult, other: &SweepResult) -> Outcome {
    let mut worst = 0.0f64;
    for t in grid().into_iter().filter(|&t| t >= 128.0) {
        worst = worst.max(mean_at(togcom, "togcom", t) / mean_at(other, "ccom", t));
    }
    let top = 2f64.powi(30);
    let gain = mean_at(other, "ccom", top) / mean_at(togcom, "togcom", top);
    outcome(
        worst <= 1.0 && gain >= 30.0,
        format!("max A(ToGCom)/A(CCom) = {worst:.4} (<= 1); CCom/ToGCom at 2^30 = {gain:.1} (>= 30)"),
    )
}

fn criterion3() -> Outcome {
    let a = remp_spend_rate(1.0 / 18.0, 1e4).unwrap();
    let b = remp_spend_rate(1.0 / 18.0, 1e7).unwrap();
    let close = |x: f64, y: f64| (x - y).abs() <= 4.0 * f64::EPSILON * y;
    outcome(close(a, 170_000.0) && close(b, 1.7e8), format!("REMP-1e4 = {a}, REMP-1e7 = {b}"))
}

fn criterion4(runs: &[&RunSummary]) -> Outcome {
    let worst = runs.iter().map(|r| r.max_bad_fraction).fold(0.0, f64::max);
    let violations: u64 = runs.iter().map(|r| r.population_violations).sum();
    outcome(
        worst < 1.0 / 6.0 && violations == 0,
        format!("max bad fraction {worst:.4} over {} runs, {violations} violations", runs.len()),
    )
}

fn criterion5(togcom: &SweepResult, other: &SweepResult) -> Outcome {
    let top = 2f64.powi(30);
    let sf_gain = mean_at(togcom, "togcom", top) / mean_at(other, "tgch_sf98", top);
    let worst = grid()
        .into_iter()
        .map(|t| mean_at(other, "tgch", t) / mean_at(togcom, "togcom", t))
        .fold(0.0, f64::max);
    outcome(
        sf_gain >= 10.0 && worst <= 1.05,
        format!("ToGCom/TGCH-SF98 at 2^30 = {sf_gain:.1} (>= 10); max A(TGCH)/A(ToGCom) = {worst:.4} (<= 1.05)"),
    )
}

fn criterion6() -> Outcome {
    let xs: Vec<f64> = (0..=30).step_by(5).map(|e| 2f64.powi(e)).collect();
    let base = SimConfig::new(Defense::GMCom, 10_000, 1.0, 1);
    let rows = match gmcom_failure(&xs, 1, &base) {
        Ok(r) => r,
        Err(e) => return outcome(false, format!("experiment failed: {e}")),
    };
    let (x, y): (Vec<f64>, Vec<f64>) = rows.iter().filter(|r| r.x >= 1024.0).map(|r| (r.x, r.a_gmcom)).unzip();
    let slope = loglog_slope(&x, &y).unwrap_or(f64::NAN);
    let cc: Vec<f64> = rows.iter().map(|r| r.a_ccom).collect();
    let spread = cc.iter().cloned().fold(0.0, f64::max) / cc.iter().cloned().fold(f64::INFINITY, f64::min);
    outcome(
        (0.9..=1.1).contains(&slope) && spread <= 1.05,
        format!("GMCom slope {slope:.4} (X >= 2^10, in [0.9, 1.1]); CCom max/min {spread:.4} (<= 1.05)"),
    )
}

/// A short attacked ToGCom run with its own trace analysis.
struct Fixture {
    run: SimResult,
    ep: EpochAnalysis,
    constants: AssumptionConstants,
}

fn fixture() -> Fixture {
    let trace = generate(&GeneratorSpec::gnutella(1000, TraceDuration::Seconds(2000.0)), 4).unwrap();
    let cfg = SimConfig::new(Defense::ToGCom, trace.n_init, 2000.0, 4);
    let run = run(&cfg, &trace, &AdversaryConfig::greedy(4096.0)).unwrap();
    let ep = detect_epochs(&trace);
    let constants = AssumptionConstants::measure(&ep, &A2Options::default()).unwrap();
    Fixture { run, ep, constants }
}

fn corrupt_rows(run: &SimResult, f: impl Fn(&mut sybilsim_core::togcom::IterationRow)) -> SimResult {
    let mut bad = run.clone();
    bad.ledger.rows.iter_mut().skip(3).for_each(f);
    bad
}

fn criterion7(runs: &[&RunSummary], fx: &Fixture) -> Outcome {
    let live = merged(runs, |c| &c.theorem1);
    let clean = check_theorem1(&fx.run, &fx.ep, &fx.constants);
    let skewed = corrupt_rows(&fx.run, |r| r.jg *= 1e3);
    let caught = check_theorem1(&skewed, &fx.ep, &fx.constants);
    outcome(
        live.passed() && live.checked > 0 && clean.passed() && !caught.passed(),
        format!(
            "{} across {} runs; fixture: clean {}/{} failed, inflated estimate {}/{} failed",
            describe(&live),
            runs.len(),
            clean.failed,
            clean.checked,
            caught.failed,
            caught.checked
        ),
    )
}

fn criterion8(runs: &[&RunSummary], fx: &Fixture) -> Outcome {
    let reports = [
        merged(runs, |c| &c.theorem2),
        merged(runs, |c| &c.joinbad),
        merged(runs, |c| &c.algcost),
        merged(runs, |c| &c.corollary),
    ];
    let live_ok = reports.iter().all(|r| r.passed() && r.checked > 0);

    let (run, ep, ac) = (&fx.run, &fx.ep, &fx.constants);
    let windows = |r: &SimResult| default_windows(2, r.rows().iter().filter(|x| x.closed).count() as u64);
    let mut inflated = run.clone();
    inflated.ledger.alg_purge += 1_000_000_000_000;
    let heavy = corrupt_rows(run, |r| r.alg_purge += 1_000_000_000);
    let flood = corrupt_rows(run, |r| r.bad_joins += 1_000_000_000);
    let fixtures = [
        ("theorem2", check_theorem2(&inflated, ep, ac).passed()),
        ("joinbad", check_lemma_joinbad(&flood).passed()),
        ("algcost", check_lemma_algcost(&heavy, ac).passed()),
        ("corollary", check_corollary_windows(&heavy, ep, ac, &windows(&heavy)).map(|r| r.passed()).unwrap_or(true)),
    ];
    let fixtures_rejected = fixtures.iter().all(|(_, accepted)| !accepted);
    let mut detail: Vec<String> = reports.iter().map(describe).collect();
    detail.push(format!(
        "fixtures rejected: {}",
        fixtures.iter().map(|(n, a)| format!("{n}={}", !a)).collect::<Vec<_>>().join(" ")
    ));
    outcome(live_ok && fixtures_rejected, format!("{} runs; {}", runs.len(), detail.join("; ")))
}

fn criterion9() -> Outcome {
    let measure = |network: Network| {
        let spec = ExperimentSpec::new(ExperimentKind::Assumptions, network);
        assumptions(&spec).map(|r| r.constants)
    };
    match (measure(Network::Ethereum), measure(Network::Gnutella)) {
        (Ok(e), Ok(g)) => {
            let within = |lo: f64, hi: f64, a: f64, b: f64| a >= lo && b <= hi;
            let pass = within(0.25, 4.0, e.a1_low, e.a1_high)
                && within(0.1, 8.0, e.a2_low, e.a2_high)
                && within(0.25, 4.0, g.a1_low, g.a1_high);
            outcome(
                pass,
                format!(
                    "ethereum a1 [{:.3}, {:.3}] a2 [{:.3}, {:.3}]; gnutella a1 [{:.3}, {:.3}]",
                    e.a1_low, e.a1_high, e.a2_low, e.a2_high, g.a1_low, g.a1_high
                ),
            )
        }
        (Err(e), _) | (_, Err(e)) => outcome(false, format!("measurement failed: {e}")),
    }
}

fn random_trace(rng: &mut ChaCha8Rng) -> ChurnTrace {
    let n_init = rng.random_range(5..400);
    let seconds = rng.random_range(50.0..4000.0);
    let spec = match rng.random_range(0..3) {
        0 => GeneratorSpec::ethereum(n_init, TraceDuration::Seconds(seconds)),
        1 => GeneratorSpec::bittorrent(n_init, TraceDuration::Seconds(seconds)),
        _ => GeneratorSpec::gnutella(n_init, TraceDuration::Seconds(seconds)),
    };
    let spec = GeneratorSpec { arrival_mean: rng.random_range(0.2..3.0), ..spec };
    let mut trace = generate(&spec, rng.random()).unwrap();
    trace.events.truncate(10_000);
    trace
}

fn criterion10() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(10);
    let mut epoch_mismatch = 0;
    let mut max_events = 0;
    for _ in 0..50 {
        let t = random_trace(&mut rng);
        max_events = max_events.max(t.events.len());
        if detect_epochs(&t).boundaries() != detect_epochs_brute_force(&t) {
            epoch_mismatch += 1;
        }
    }
    let mut burst_mismatch = 0;
    for _ in 0..100 {
        let b: u64 = rng.random_range(0..2_000_000);
        let (mut k, mut spent) = (0u64, 0u64);
        while spent + k + 1 <= b {
            k += 1;
            spent += k;
        }
        if burst_batch_size(b) != k {
            burst_mismatch += 1;
        }
    }
    let mut cs2_fail = 0;
    for _ in 0..100_000 {
        let n = rng.random_range(1..40);
        let v: Vec<f64> = (0..n).map(|_| rng.random_range(0.0..1e6)).collect();
        if !cs2_holds(&v) {
            cs2_fail += 1;
        }
    }
    outcome(
        epoch_mismatch == 0 && burst_mismatch == 0 && cs2_fail == 0,
        format!(
            "epochs {epoch_mismatch}/50 mismatches (largest trace {max_events} events); burst {burst_mismatch}/100; cs2 {cs2_fail}/100000"
        ),
    )
}

fn read_all(dir: &Path) -> Vec<(String, Vec<u8>)> {
    let mut files: Vec<_> = std::fs::read_dir(dir)
        .unwrap()
        .map(|e| e.unwrap().path())
        .map(|p| (p.file_name().unwrap().to_string_lossy().into_owned(), std::fs::read(&p).unwrap()))
        .collect();
    files.sort();
    files
}

fn criterion11() -> Outcome {
    let specs = |out: &Path| {
        let mut sw = ExperimentSpec::new(ExperimentKind::AvtSweep, Network::Gnutella);
        sw.t_values = vec![0.0, 64.0, 4096.0];
        sw.runs = 2;
        sw.sim_seconds = 300.0;
        sw.emit_plot_data = true;
        let mut heur = ExperimentSpec::new(ExperimentKind::HeuristicSweep, Network::Ethereum);
        heur.t_values = vec![1024.0];
        heur.runs = 2;
        heur.sim_seconds = 300.0;
        let mut gm = ExperimentSpec::new(ExperimentKind::GmcomFailure, Network::Gnutella);
        gm.x_values = vec![1.0, 1024.0];
        let mut asm = ExperimentSpec::new(ExperimentKind::Assumptions, Network::BitTorrent);
        asm.epochs = 50;
        asm.runs = 2;
        let mut single = ExperimentSpec::new(ExperimentKind::SingleRun, Network::Gnutella);
        single.sim_seconds = 300.0;
        single.adversary.rate = 512.0;
        let mut all = vec![sw, heur, gm, asm, single];
        for s in &mut all {
            s.output_dir = out.to_path_buf();
        }
        all
    };
    let a = tempfile::tempdir().unwrap();
    let b = tempfile::tempdir().unwrap();
    for dir in [a.path(), b.path()] {
        for s in specs(dir) {
            if let Err(e) = execute(&s) {
                return outcome(false, format!("{} failed: {e}", s.kind.name()));
            }
        }
    }
    let (fa, fb) = (read_all(a.path()), read_all(b.path()));
    outcome(fa == fb && fa.len() >= 7, format!("{} CSV files byte-identical across two executions", fa.len()))
}

fn main() -> ExitCode {
    let started = Instant::now();
    let mut results: Vec<(u32, &str, Outcome)> = Vec::new();

    let pool = rayon::ThreadPoolBuilder::new().num_threads(1).build().unwrap();
    let t0 = Instant::now();
    let togcom = pool.install(|| sweep(&grid_spec(ExperimentKind::AvtSweep, "togcom"))).unwrap();
    let c1_time = t0.elapsed().as_secs_f64();
    let other = sweep(&grid_spec(ExperimentKind::HeuristicSweep, "ccom,tgch,tgch_sf98")).unwrap();

    let c1_runs: Vec<&RunSummary> = togcom.runs.iter().collect();
    let c5_runs: Vec<&RunSummary> = other.runs.iter().filter(|r| r.defense != "ccom").collect();
    let all_runs: Vec<&RunSummary> = c1_runs.iter().chain(c5_runs.iter()).copied().collect();
    let fx = fixture();

    results.push((1, "asymmetric scaling", criterion1(&togcom, c1_time)));
    results.push((2, "defense ordering", criterion2(&togcom, &other)));
    results.push((3, "REMP closed form", criterion3()));
    results.push((4, "population invariant", criterion4(&all_runs)));
    results.push((5, "heuristic gains", criterion5(&togcom, &other)));
    results.push((6, "GMCom failure", criterion6()));
    results.push((7, "estimator bracket", criterion7(&c1_runs, &fx)));
    results.push((8, "cost bound checkers", criterion8(&all_runs, &fx)));
    results.push((9, "assumption constants", criterion9()));
    results.push((10, "oracle equivalences", criterion10()));
    results.push((11, "determinism", criterion11()));

    for (n, name, o) in &results {
        println!("criterion {n:>2} [{}] {name}: {}", if o.pass { "PASS" } else { "FAIL" }, o.detail);
    }
    let failed = results.iter().filter(|r| !r.2.pass).count();
    println!("acceptance: {} passed, {failed} failed in {:.1} s", results.len() - failed, started.elapsed().as_secs_f64());
    if failed == 0 {
        ExitCode::SUCCESS
    } else {
        ExitCode::FAILURE
    }
}
