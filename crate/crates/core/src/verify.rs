//! Built-in checks run by `larc verify`, and the randomized operation
//! harness behind the normalization check.

use std::time::{Duration, Instant};

use num_complex::Complex64;
use rand::Rng;
use rayon::prelude::*;

use crate::fock::{Branch, ModeKind, ModeRegistry, Molecule, Momentum, Position, SuperpositionState};
use crate::larc::{self, LarcEvent, LarcId, LarcStatus, OutcomeKind};
use crate::product::SiteRef;
use crate::scenario::{Amplitudes, ExplicitModel, MomentumScenario, PinholeScenario, Scenario, Timing};
use crate::stats::{self, trajectory_rng};

#[derive(Debug, Clone, Copy)]
pub struct Criterion {
    pub id: &'static str,
    pub description: &'static str,
}

pub const CRITERIA: &[Criterion] = &[
    Criterion {
        id: "single-larc-weights",
        description: "one molecule per patch: class weights (0.25, 0.25, 0.5) within 1e-12 in under 1 ms",
    },
    Criterion {
        id: "many-larc-weights",
        description: "100 molecules per patch: every trigger gives the single-larc weights, under 1 s",
    },
    Criterion {
        id: "product-structure",
        description: "before any reduction: 2 sectors, m1+m2 pending larcs, sector weights |a1|^2, |a2|^2",
    },
    Criterion {
        id: "correlation-propagation",
        description: "after an absorption at patch 1 no amplitude remains on x2 (m = 1, 2, 100)",
    },
    Criterion {
        id: "exact-enumeration",
        description: "exact outcome enumeration reproduces |a1|^2 for small plates",
    },
    Criterion {
        id: "born-rule",
        description: "99% Wilson interval of freq_x1 covers |a1|^2 = 0.3 in >= 97% of repetitions",
    },
    Criterion {
        id: "abc-rate",
        description: "first-reduction rate within 5% of P_t(m1+m2) and KS-exponential at alpha = 0.01",
    },
    Criterion {
        id: "normalization",
        description: "randomized operation sequences keep unit norm (1e-12) and one electron per molecule",
    },
    Criterion {
        id: "momentum-structure",
        description: "every branch pairs kick p1 with x1 and p2 with x2; component kicks add up exactly",
    },
    Criterion {
        id: "reproducibility",
        description: "identical seed gives identical stats and trajectories for 1 and many workers",
    },
];

#[derive(Debug, Clone, Copy)]
pub struct VerifyOptions {
    pub quick: bool,
    pub jobs: usize,
}

#[derive(Debug, Clone)]
pub struct CheckResult {
    pub id: &'static str,
    pub pass: bool,
    pub detail: String,
    pub elapsed: Duration,
}

pub fn run_all(options: &VerifyOptions) -> Vec<CheckResult> {
    CRITERIA.iter().map(|c| run_criterion(c.id, options).expect("listed criterion")).collect()
}

/// Runs one criterion by id; `None` for unknown ids.
pub fn run_criterion(id: &str, options: &VerifyOptions) -> Option<CheckResult> {
    let criterion = CRITERIA.iter().find(|c| c.id == id)?;
    let start = Instant::now();
    let outcome = match criterion.id {
        "single-larc-weights" => single_larc_weights(),
        "many-larc-weights" => many_larc_weights(),
        "product-structure" => product_structure(),
        "correlation-propagation" => correlation_propagation(),
        "exact-enumeration" => exact_enumeration(),
        "born-rule" => born_rule(options),
        "abc-rate" => abc_rate(options),
        "normalization" => normalization(options),
        "momentum-structure" => momentum_structure(options),
        "reproducibility" => reproducibility(options),
        _ => unreachable!(),
    };
    let (pass, detail) = match outcome {
        Ok(detail) => (true, detail),
        Err(detail) => (false, detail),
    };
    Some(CheckResult {
        id: criterion.id,
        pass,
        detail,
        elapsed: start.elapsed(),
    })
}

type Check = Result<String, String>;

fn ensure(cond: bool, message: impl FnOnce() -> String) -> Result<(), String> {
    if cond {
        Ok(())
    } else {
        Err(message())
    }
}

const H: f64 = std::f64::consts::FRAC_1_SQRT_2;

fn pinhole(amplitudes: Amplitudes, n: u32, m1: usize, m2: usize, timing: Timing) -> Scenario {
    Scenario::Pinhole(PinholeScenario {
        amplitudes,
        n,
        m1,
        m2,
        timing,
    })
}

fn close3(got: [f64; 3], want: [f64; 3], tol: f64) -> bool {
    got.iter().zip(want).all(|(g, w)| (g - w).abs() <= tol)
}

fn single_larc_weights() -> Check {
    let scenario = pinhole(Amplitudes::real(H, H, H, H), 1, 1, 1, Timing::simultaneous(1.0, 1.0));
    let model = ExplicitModel::new(&scenario).map_err(|e| e.to_string())?;
    let mut state = model.initial_state().clone();
    let mut events = Vec::new();
    for site in [SiteRef::new(Position::X1, 0), SiteRef::new(Position::X2, 0)] {
        let mut event = model.larc(scenario.larc_id(site)).clone();
        state = larc::branch_on_larc(&state, &mut event, Complex64::new(H, 0.0), Complex64::new(H, 0.0)).map_err(|e| e.to_string())?;
        events.push(event);
    }
    let start = Instant::now();
    let classes = larc::classify_outcomes(&state, &events[0]).map_err(|e| e.to_string())?;
    let elapsed = start.elapsed();
    let weights = classes.each_ref().map(|c| c.weight);
    ensure(close3(weights, [0.25, 0.25, 0.5], 1e-12), || format!("weights {weights:?}"))?;
    ensure(elapsed < Duration::from_millis(1), || format!("classification took {elapsed:?}"))?;
    Ok(format!("weights {weights:?} in {elapsed:?}"))
}

fn many_larc_weights() -> Check {
    let start = Instant::now();
    let scenario = pinhole(Amplitudes::real(H, H, H, H), 200, 100, 100, Timing::simultaneous(1.0, 1.0));
    let (mut state, arrivals) = scenario.build().map_err(|e| e.to_string())?;
    for (_, site) in &arrivals {
        state.activate(*site).map_err(|e| e.to_string())?;
    }
    let mut worst: f64 = 0.0;
    for (_, site) in &arrivals {
        let w = state.class_weights(*site).map_err(|e| e.to_string())?;
        // a patch-2 trigger sees its own patch as class 1/2
        let want = [0.25, 0.25, 0.5];
        for (g, t) in w.iter().zip(want) {
            worst = worst.max((g - t).abs());
        }
    }
    let elapsed = start.elapsed();
    ensure(worst <= 1e-12, || format!("max deviation {worst:e}"))?;
    ensure(elapsed < Duration::from_secs(1), || format!("took {elapsed:?}"))?;
    Ok(format!("200 triggers, max deviation {worst:e}, {elapsed:?}"))
}

fn product_structure() -> Check {
    let (a1, a2) = (0.3f64.sqrt(), 0.7f64.sqrt());
    let scenario = pinhole(Amplitudes::real(a1, a2, 0.6, 0.8), 500, 100, 150, Timing::simultaneous(1.0, 1.0));
    let (mut state, arrivals) = scenario.build().map_err(|e| e.to_string())?;
    for (_, site) in &arrivals {
        state.activate(*site).map_err(|e| e.to_string())?;
    }
    ensure(state.is_alive(Position::X1) && state.is_alive(Position::X2), || "a sector is missing".into())?;
    ensure(state.pending().len() == 250, || format!("{} pending larcs", state.pending().len()))?;
    let (w1, w2) = (state.sector_weight(Position::X1), state.sector_weight(Position::X2));
    ensure((w1 - 0.3).abs() <= 1e-12 && (w2 - 0.7).abs() <= 1e-12, || format!("sector weights {w1}, {w2}"))?;
    Ok(format!("250 pending, sector weights {w1:.15}, {w2:.15}"))
}

fn correlation_propagation() -> Check {
    for m in [1usize, 2, 100] {
        let scenario = pinhole(Amplitudes::real(0.6, 0.8, 0.6, 0.8), 2 * m as u32, m, m, Timing::simultaneous(1.0, 1.0));
        let (mut state, arrivals) = scenario.build().map_err(|e| e.to_string())?;
        for (_, site) in &arrivals {
            state.activate(*site).map_err(|e| e.to_string())?;
        }
        state
            .reduce(SiteRef::new(Position::X1, 0), OutcomeKind::Absorbed)
            .map_err(|e| e.to_string())?;
        ensure(state.sector_weight(Position::X2) == 0.0, || format!("m={m}: weight left on x2"))?;
        for site in 0..m {
            let a = state.amplitude(Position::X2, &[site]);
            ensure(a == Complex64::new(0.0, 0.0), || format!("m={m}: patch-2 site {site} keeps amplitude {a}"))?;
        }
        if m <= 2 {
            let model = ExplicitModel::new(&scenario).map_err(|e| e.to_string())?;
            let expanded = model.expand(&state).map_err(|e| e.to_string())?;
            ensure(expanded.branches().iter().all(|b| b.position == Position::X1), || format!("m={m}: explicit x2 branch"))?;
        }
    }
    Ok("m = 1, 2, 100: x2 amplitude exactly 0".into())
}

fn exact_enumeration() -> Check {
    for (n, m) in [(1u32, 1usize), (1, 2), (2, 2)] {
        let scenario = pinhole(Amplitudes::real(0.3f64.sqrt(), 0.7f64.sqrt(), 0.6, 0.8), n, m, m, Timing::simultaneous(1.0, 1.0));
        let outcomes = scenario.exact_outcomes().map_err(|e| e.to_string())?;
        let x1: f64 = outcomes.iter().filter(|(o, _)| o.position == Position::X1).map(|(_, p)| p).sum();
        let total: f64 = outcomes.values().sum();
        ensure((total - 1.0).abs() <= 1e-12 && (x1 - 0.3).abs() <= 1e-12, || format!("n={n}, m={m}: P(x1)={x1}, total={total}"))?;
    }
    Ok("P(x1) = 0.3 for (n, m) = (1,1), (1,2), (2,2)".into())
}

fn born_rule(options: &VerifyOptions) -> Check {
    let (reps, n, need) = if options.quick { (20u64, 2000u64, 18u64) } else { (100, 10_000, 97) };
    let mut timing = Timing::simultaneous(0.01, 100.0);
    timing.stop_after_localization = true;
    let scenario = pinhole(Amplitudes::real(0.3f64.sqrt(), 0.7f64.sqrt(), 0.6, 0.8), 20, 10, 10, timing);
    let mut covered = 0;
    for rep in 0..reps {
        let (_, s) = stats::run_ensemble(&scenario, 1000 + rep, n, options.jobs).map_err(|e| e.to_string())?;
        if s.freq_x1.contains(0.3) {
            covered += 1;
        }
    }
    ensure(covered >= need, || format!("covered in {covered}/{reps}, need {need}"))?;
    Ok(format!("covered in {covered}/{reps} (N = {n})"))
}

fn abc_rate(options: &VerifyOptions) -> Check {
    let (n, tol) = if options.quick { (2000u64, 0.10) } else { (10_000, 0.05) };
    let p_t = 0.01;
    let mut details = Vec::new();
    for total in [10usize, 50, 200] {
        let mut timing = Timing::simultaneous(p_t, 2000.0);
        timing.stop_after_localization = true;
        let scenario = pinhole(Amplitudes::real(H, H, 0.6, 0.8), total as u32, total / 2, total / 2, timing);
        let (records, s) = stats::run_ensemble(&scenario, 77 + total as u64, n, options.jobs).map_err(|e| e.to_string())?;
        let expected = p_t * total as f64;
        let wait = s.first_reduction.ok_or("no reductions")?;
        let rel = (wait.rate_estimate - expected).abs() / expected;
        ensure(wait.count == n, || format!("m={total}: {} unresolved", n - wait.count))?;
        ensure(rel <= tol, || format!("m={total}: rate {} vs {expected}", wait.rate_estimate))?;
        let samples: Vec<f64> = records.iter().filter_map(|r| r.first_reduction_time).collect();
        let ks = stats::ks_exponential_test(&samples, expected, 0.01).map_err(|e| e.to_string())?;
        ensure(ks.pass, || format!("m={total}: KS D={} > {}", ks.statistic, ks.critical))?;
        details.push(format!("m={total}: rate {:.4} ({:+.2}%)", wait.rate_estimate, 100.0 * (wait.rate_estimate / expected - 1.0)));
    }
    Ok(details.join("; "))
}

fn normalization(options: &VerifyOptions) -> Check {
    let count = if options.quick { 10_000 } else { 1_000_000 };
    let report = normalization_fuzz(count, 2024, options.jobs);
    ensure(report.failures == 0, || format!("{} failures, first: {}", report.failures, report.first_failure.clone().unwrap_or_default()))?;
    ensure(report.max_norm_error <= 1e-12, || format!("norm error {:e}", report.max_norm_error))?;
    Ok(format!("{} sequences, {} checks, max norm error {:e}", report.sequences, report.checks, report.max_norm_error))
}

/// Checks that every kicked molecule in `state` carries the kick of its
/// branch's position and nothing else.
pub fn kick_position_violation(model: &ExplicitModel, state: &SuperpositionState) -> Option<String> {
    let p = [model.kick(Position::X1), model.kick(Position::X2)];
    for branch in state.branches() {
        let own = p[branch.position.index()];
        for (com, kick) in branch.kicks() {
            if kick.transferred != Momentum::ZERO && kick.transferred != own {
                return Some(format!("{com} carries {} in a {:?} branch", kick.transferred, branch.position));
            }
        }
    }
    None
}

fn momentum_structure(options: &VerifyOptions) -> Check {
    let trajectories = if options.quick { 50 } else { 500 };
    let p1 = Momentum::new(5, -3);
    let (x, y) = p1.components();
    ensure(x + y == p1, || "component sum differs".into())?;
    let build = |decompose| {
        Scenario::Momentum(MomentumScenario {
            amplitudes: Amplitudes::real(H, H, H, H),
            n: 2,
            p1,
            p2: Momentum::new(-4, 2),
            molecules: vec![Momentum::new(1, 0), Momentum::ZERO, Momentum::new(0, -2)],
            decompose,
            timing: Timing::simultaneous(0.5, 20.0),
        })
    };
    let plain = build(false);
    let split = build(true);
    let plain_model = ExplicitModel::new(&plain).map_err(|e| e.to_string())?;
    let split_model = ExplicitModel::new(&split).map_err(|e| e.to_string())?;
    let mut checked = 0u64;
    for seed in 0..trajectories {
        let mut plain_states = Vec::new();
        let mut problem = None;
        plain_model
            .run_trajectory_observed(&mut trajectory_rng(5, seed), |s, _| {
                if problem.is_none() {
                    problem = kick_position_violation(&plain_model, s);
                }
                plain_states.push(s.clone());
            })
            .map_err(|e| e.to_string())?;
        let mut split_states = Vec::new();
        split_model
            .run_trajectory_observed(&mut trajectory_rng(5, seed), |s, _| split_states.push(s.clone()))
            .map_err(|e| e.to_string())?;
        let mut lazy_problem = None;
        plain
            .run_trajectory_observed(&mut trajectory_rng(5, seed), |s, _| {
                if lazy_problem.is_none() {
                    lazy_problem = plain_model.expand(s).map_err(|e| e.to_string()).map(|e| kick_position_violation(&plain_model, &e)).unwrap_or_else(Some);
                }
            })
            .map_err(|e| e.to_string())?;
        if let Some(p) = problem.or(lazy_problem) {
            return Err(format!("trajectory {seed}: {p}"));
        }
        ensure(plain_states.len() == split_states.len(), || format!("trajectory {seed}: decomposition changed the reduction count"))?;
        for (a, b) in plain_states.iter().zip(&split_states) {
            let keys = |s: &SuperpositionState| s.branches().iter().map(Branch::key).collect::<Vec<_>>();
            ensure(keys(a) == keys(b), || format!("trajectory {seed}: decomposed kicks differ"))?;
            checked += a.len() as u64;
        }
    }
    Ok(format!("{trajectories} trajectories, {checked} branches checked"))
}

fn reproducibility(options: &VerifyOptions) -> Check {
    let mut timing = Timing::simultaneous(0.05, 40.0);
    timing.schedule = crate::scenario::Schedule::Stagger { window: 5.0 };
    let scenario = pinhole(Amplitudes::real(0.6, 0.8, 0.6, 0.8), 6, 5, 5, timing);
    let n = if options.quick { 500 } else { 5000 };
    let render = |jobs| -> Result<(String, Vec<u8>), String> {
        let (records, s) = stats::run_ensemble(&scenario, 99, n, jobs).map_err(|e| e.to_string())?;
        let mut csv = Vec::new();
        stats::write_trajectories_csv(&records, &mut csv).map_err(|e| e.to_string())?;
        Ok((stats::to_json(&s), csv))
    };
    let one = render(1)?;
    let many_jobs = options.jobs.max(4);
    let many = render(many_jobs)?;
    ensure(one == many, || format!("outputs differ between 1 and {many_jobs} workers"))?;
    ensure(one == render(1)?, || "outputs differ between identical runs".into())?;
    Ok(format!("{n} trajectories identical for 1 and {many_jobs} workers"))
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct FuzzReport {
    pub sequences: u64,
    pub checks: u64,
    pub max_norm_error: f64,
    pub failures: u64,
    pub first_failure: Option<String>,
}

#[derive(Default)]
struct SequenceReport {
    checks: u64,
    max_norm_error: f64,
    failure: Option<String>,
}

/// Runs `sequences` random operation sequences on small registries and
/// checks the norm and electron count after every normalizing step.
/// Sequence `i` draws from stream `i` of `seed`.
pub fn normalization_fuzz(sequences: u64, seed: u64, jobs: usize) -> FuzzReport {
    let pool = rayon::ThreadPoolBuilder::new().num_threads(jobs.max(1)).build().expect("thread pool");
    let reports: Vec<SequenceReport> = pool.install(|| (0..sequences).into_par_iter().map(|i| fuzz_sequence(&mut trajectory_rng(seed, i))).collect());
    let mut out = FuzzReport {
        sequences,
        ..FuzzReport::default()
    };
    for (i, r) in reports.into_iter().enumerate() {
        out.checks += r.checks;
        out.max_norm_error = out.max_norm_error.max(r.max_norm_error);
        if let Some(f) = r.failure {
            out.failures += 1;
            out.first_failure.get_or_insert(format!("sequence {i}: {f}"));
        }
    }
    out
}

fn random_amplitude<R: Rng>(rng: &mut R) -> Complex64 {
    Complex64::new(rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0))
}

fn fuzz_sequence<R: Rng>(rng: &mut R) -> SequenceReport {
    let mut report = SequenceReport::default();
    let mut registry = ModeRegistry::new();
    let fields: Vec<_> = (0..rng.random_range(1..=2))
        .map(|i| registry.register_mode(&format!("gamma{i}"), ModeKind::PhotonField).expect("fresh label"))
        .collect();
    let molecules: Vec<Molecule> = (0..rng.random_range(1..=3))
        .map(|i| registry.register_molecule(&format!("m{i}"), rng.random_bool(0.5)).expect("fresh label"))
        .collect();

    let mut branches = Vec::new();
    for _ in 0..rng.random_range(1..=4) {
        let position = if rng.random_bool(0.5) { Position::X1 } else { Position::X2 };
        let mut b = Branch::new(random_amplitude(rng), position);
        for &f in &fields {
            if rng.random_bool(0.8) {
                b = b.with_occupation(f, rng.random_range(0..=3)).expect("field mode");
            }
        }
        for m in &molecules {
            let p = Momentum::new(rng.random_range(-2..=2), rng.random_range(-2..=2));
            b = b.with_ground_molecule(m, p).expect("registered molecule");
        }
        branches.push(b);
    }
    let mut state = SuperpositionState::new(branches).merge_and_prune();

    let mut larcs: Vec<LarcEvent> = Vec::new();
    for &f in &fields {
        for (host, m) in molecules.iter().enumerate() {
            let kicks: Vec<_> = m.com.map(|c| (c, Momentum::new(rng.random_range(-3..=3), rng.random_range(-3..=3)))).into_iter().collect();
            larcs.push(LarcEvent::absorption(LarcId(larcs.len()), host, f, m.orbitals, &kicks, 3));
        }
    }

    let mut check = |state: &SuperpositionState, step: &str| -> Result<(), String> {
        report.checks += 1;
        let err = (state.norm_sqr() - 1.0).abs();
        report.max_norm_error = report.max_norm_error.max(err);
        if err > 1e-12 {
            return Err(format!("{step}: norm error {err:e}"));
        }
        registry.check_state(state).map_err(|e| format!("{step}: {e}"))
    };
    if state.is_empty() {
        return report;
    }
    if let Err(e) = check(&state, "initial") {
        report.failure = Some(e);
        return report;
    }

    for _ in 0..rng.random_range(1..=8) {
        let op = rng.random_range(0..7);
        let mapped = |f: &dyn Fn(&Branch) -> Option<Branch>| {
            let branches = state.branches().iter().map(|b| f(b).unwrap_or_else(|| b.clone())).collect();
            SuperpositionState::new(branches).merge_and_prune()
        };
        let (next, step) = match op {
            0 => {
                let f = fields[rng.random_range(0..fields.len())];
                (mapped(&|b| b.apply_annihilation_lenient(f).ok()), "annihilation")
            }
            1 => {
                let f = fields[rng.random_range(0..fields.len())];
                (mapped(&|b| b.apply_creation(f).ok()), "creation")
            }
            2 => {
                let m = molecules[rng.random_range(0..molecules.len())].orbitals;
                (mapped(&|b| b.apply_raising(m).ok()), "raising")
            }
            3 => {
                let m = molecules[rng.random_range(0..molecules.len())].orbitals;
                (mapped(&|b| b.apply_lowering(m).ok()), "lowering")
            }
            4 => {
                let m = &molecules[rng.random_range(0..molecules.len())];
                let Some(com) = m.com else { continue };
                let p = Momentum::new(rng.random_range(-3..=3), rng.random_range(-3..=3));
                (mapped(&|b| b.apply_raising_momentum(com, p).ok()), "kick")
            }
            5 => {
                let i = rng.random_range(0..larcs.len());
                let theta = rng.random_range(0.0..std::f64::consts::FRAC_PI_2);
                let b1 = Complex64::from_polar(theta.cos(), rng.random_range(0.0..6.3));
                let b2 = Complex64::from_polar(theta.sin(), rng.random_range(0.0..6.3));
                match larc::branch_on_larc(&state, &mut larcs[i], b1, b2) {
                    Ok(s) => (s, "branching"),
                    Err(_) => continue,
                }
            }
            _ => {
                let pending: Vec<usize> = (0..larcs.len()).filter(|&i| larcs[i].status == LarcStatus::Pending).collect();
                if pending.is_empty() {
                    continue;
                }
                let i = pending[rng.random_range(0..pending.len())];
                match larc::sample_and_reduce(&state, &mut larcs[i], 0.0, rng) {
                    Ok((s, _)) => (s, "reduction"),
                    Err(_) => continue,
                }
            }
        };
        if next.is_empty() {
            break;
        }
        state = next;
        if let Err(e) = check(&state, step) {
            report.failure = Some(e);
            break;
        }
    }
    report
}
