//! Acceptance suite: the release criteria, one test per criterion, each
//! printing a single pass/fail line (`cargo test --test acceptance --
//! --nocapture` shows them all).
//!
//! Every tolerance is pinned here, in code.

mod common;

use std::time::Instant;

use common::{algorithm1_solve, bounded_sphere, penalized_sphere};
use mfes::bench::{self, StartKind};
use mfes::harness::{self, ExperimentPlan, OutputFormat};
use mfes::solver::{self, EventKind, SolverConfig};

const BASE_SEED: u64 = 0;

fn plan(names: &[&str], budget: usize, start: StartKind) -> ExperimentPlan {
    ExperimentPlan {
        problems: names.iter().map(|s| s.to_string()).collect(),
        budget,
        runs: 10,
        base_seed: BASE_SEED,
        start_kind: start,
        ..Default::default()
    }
}

fn report(criterion: &str, pass: bool, detail: String) {
    println!(
        "acceptance {criterion}: {} - {detail}",
        if pass { "PASS" } else { "FAIL" }
    );
    assert!(pass, "{criterion}: {detail}");
}

/// G12, budget 1000, 10 runs from the bound midpoint: mean best-feasible
/// objective within 1e-3 of -1 and mean violation below 1e-5.
#[test]
fn criterion_1_g12_small_budget() {
    let t = Instant::now();
    let rows = harness::run_experiment(&plan(&["G12"], 1000, StartKind::Midpoint)).unwrap();
    let row = &rows[0];
    let f_mean = row.f_mean.unwrap_or(f64::NAN);
    let g_mean = row.g_mean.unwrap_or(f64::NAN);
    let elapsed = t.elapsed().as_secs_f64();
    let pass = (f_mean - (-1.0)).abs() <= 1e-3
        && g_mean < 1e-5
        && row.failures == 0
        && elapsed < 10.0;
    report(
        "1 (G12 @1000)",
        pass,
        format!("mean f = {f_mean:.6}, mean g = {g_mean:.2e}, {elapsed:.2}s"),
    );
}

/// G8, budget 1000, 10 runs from the stored feasible start: at least 8 of 10
/// runs reach f <= -0.0957 with g < 1e-5.
#[test]
fn criterion_2_g8_hit_rate() {
    let t = Instant::now();
    let result = harness::run_campaign(&plan(&["G8"], 1000, StartKind::Feasible)).unwrap();
    let hits = result.records[0]
        .1
        .iter()
        .filter(|run| {
            run.as_ref()
                .ok()
                .and_then(|rec| rec.best_feasible.as_ref())
                .is_some_and(|b| b.f.value() <= -0.0957 && b.g < 1e-5)
        })
        .count();
    let elapsed = t.elapsed().as_secs_f64();
    let pass = hits >= 8 && elapsed < 10.0;
    report(
        "2 (G8 @1000)",
        pass,
        format!("{hits}/10 runs reached f <= -0.0957, {elapsed:.2}s"),
    );
}

/// G11, budget 20000, 10 runs: mean best-feasible objective within 1e-2 of
/// 0.75.
#[test]
fn criterion_3_g11_large_budget() {
    let t = Instant::now();
    let rows = harness::run_experiment(&plan(&["G11"], 20000, StartKind::Midpoint)).unwrap();
    let f_mean = rows[0].f_mean.unwrap_or(f64::NAN);
    let elapsed = t.elapsed().as_secs_f64();
    let pass = (f_mean - 0.75).abs() <= 1e-2 && rows[0].failures == 0 && elapsed < 60.0;
    report(
        "3 (G11 @20000)",
        pass,
        format!("mean f = {f_mean:.6}, {elapsed:.2}s"),
    );
}

/// Synthetic analytic problem (min |x|^2 s.t. 1 - x <= 0 on [-5,5], optimum
/// f = 1 at x = 1), budget 2000, 10 seeds: every run within 1e-3 of 1.
#[test]
fn criterion_4_synthetic_every_run() {
    let t = Instant::now();
    let p = penalized_sphere(1);
    let mut worst = 0.0f64;
    for seed in 0..10 {
        let cfg = SolverConfig {
            budget: 2000,
            seed: BASE_SEED + seed,
            ..Default::default()
        };
        let rec = solver::solve(&p, &cfg, &[0.0]).unwrap();
        let err = rec
            .best_feasible
            .map(|b| (b.f.value() - 1.0).abs())
            .unwrap_or(f64::INFINITY);
        worst = worst.max(err);
    }
    let elapsed = t.elapsed().as_secs_f64();
    let pass = worst <= 1e-3 && elapsed < 5.0;
    report(
        "4 (synthetic @2000)",
        pass,
        format!("worst |f - 1| = {worst:.2e} over 10 seeds, {elapsed:.2}s"),
    );
}

/// Step-size law over the full traces of all 16 problems at budget 1000:
/// every unsuccessful iteration has sigma' = 0.9 sigma exactly, every
/// successful one sigma' >= sigma, and phase transitions carry sigma over.
#[test]
fn criterion_5_step_size_law_all_problems() {
    let mut violations = 0usize;
    let mut events = 0usize;
    for entry in bench::registry() {
        let x0 = solver::default_start(&entry.problem).unwrap();
        let cfg = SolverConfig {
            budget: 1000,
            seed: BASE_SEED,
            ..Default::default()
        };
        let rec = solver::solve(&entry.problem, &cfg, &x0).unwrap();
        for ev in &rec.trace {
            events += 1;
            let ok = if ev.kind.shrinks_sigma() {
                ev.sigma_after.to_bits() == (0.9 * ev.sigma_before).to_bits()
            } else if ev.success {
                ev.sigma_after >= ev.sigma_before
            } else {
                ev.sigma_after.to_bits() == ev.sigma_before.to_bits()
            };
            if !ok {
                violations += 1;
            }
        }
    }
    report(
        "5 (step-size law, 16 problems)",
        violations == 0,
        format!("{violations} violations over {events} iterations"),
    );
}

/// Degenerate equivalence: on a bounds-only sphere in dimension 5 the full
/// solver's traces are bitwise identical to the unrelaxable-only
/// sufficient-decrease ES for 5 seeds.
#[test]
fn criterion_6_unrelaxable_only_equivalence() {
    let p = bounded_sphere(5);
    let x0 = [2.0, -3.0, 1.0, 0.5, -4.0];
    let mut identical = true;
    for seed in 0..5u64 {
        let cfg = SolverConfig {
            budget: 600,
            seed: BASE_SEED + seed,
            ..Default::default()
        };
        let full = solver::solve(&p, &cfg, &x0).unwrap();
        let reference = algorithm1_solve(&p, &cfg, &x0);
        identical &= full.trace.len() == reference.events.len()
            && full
                .trace
                .iter()
                .zip(&reference.events)
                .all(|(ev, rev)| {
                    ev.success == rev.success
                        && ev.sigma_before.to_bits() == rev.sigma_before.to_bits()
                        && ev.sigma_after.to_bits() == rev.sigma_after.to_bits()
                        && ev.f_current.unwrap().to_bits() == rev.f_current.to_bits()
                        && ev.f_trial.unwrap().to_bits() == rev.f_trial.to_bits()
                        && ev.f_evals == rev.f_evals
                })
            && full.f_evals == reference.f_evals
            && full.final_iterate.x.iter().map(|v| v.to_bits()).eq(
                reference.final_x.iter().map(|v| v.to_bits()),
            );
    }
    report(
        "6 (degenerate equivalence)",
        identical,
        "bitwise trace equality over 5 seeds".to_string(),
    );
}

/// Step sizes tend to zero: on G12 and the synthetic problem at budget
/// 20000, every run observes sigma_min < 1e-3 * sigma0.
#[test]
fn criterion_7_sigma_min_proxy() {
    let mut worst_ratio = 0.0f64;
    let g12 = bench::find("G12").unwrap();
    let synth = penalized_sphere(1);
    for seed in 0..10u64 {
        let cfg = SolverConfig {
            budget: 20000,
            seed: BASE_SEED + seed,
            ..Default::default()
        };
        let a = solver::solve(&g12.problem, &cfg, &[5.0, 5.0, 5.0]).unwrap();
        let b = solver::solve(&synth, &cfg, &[0.0]).unwrap();
        worst_ratio = worst_ratio
            .max(a.sigma_min / a.sigma0)
            .max(b.sigma_min / b.sigma0);
    }
    report(
        "7 (sigma_min proxy)",
        worst_ratio < 1e-3,
        format!("worst sigma_min / sigma0 = {worst_ratio:.2e}"),
    );
}

/// Registry validation: the coded formulas reproduce the published optima
/// within |f - f_opt| <= 1e-3 max(1, |f_opt|) and g <= 1e-4 for every
/// problem with a stored solution vector.
#[test]
fn criterion_8_registry_validation() {
    let report_ = bench::validate_registry();
    let flagged: Vec<String> = report_
        .flagged()
        .iter()
        .map(|e| e.name.clone())
        .collect();
    let with_vectors = report_
        .entries
        .iter()
        .filter(|e| e.f_at_optimum.is_some())
        .count();
    report(
        "8 (registry validation)",
        report_.all_ok() && with_vectors == 16,
        format!("{with_vectors}/16 entries checked, flagged: {flagged:?}"),
    );
}

/// Restoration is exercised: from G6's stored infeasible start, at least 5
/// of 10 runs enter restoration, and every recorded entry replays true under
/// the restoration-identifier predicate.
#[test]
fn criterion_9_restoration_exercised() {
    let entry = bench::find("G6").unwrap();
    let x0 = entry.start(StartKind::Infeasible).unwrap();
    let cfg_proto = SolverConfig {
        budget: 1000,
        ..Default::default()
    };
    let mut runs_with_entries = 0;
    let mut entries = 0usize;
    let mut replay_failures = 0usize;
    for seed in 0..10u64 {
        let cfg = SolverConfig {
            seed: BASE_SEED + seed,
            ..cfg_proto.clone()
        };
        let rec = solver::solve(&entry.problem, &cfg, &x0).unwrap();
        if rec.restoration_entries > 0 {
            runs_with_entries += 1;
        }
        for ev in &rec.trace {
            if ev.kind == EventKind::EnterRestoration {
                entries += 1;
                if ev.replay_restoration_identifier(&cfg) != Some(true) {
                    replay_failures += 1;
                }
            }
        }
    }
    let pass = runs_with_entries >= 5 && replay_failures == 0 && entries > 0;
    report(
        "9 (restoration exercised)",
        pass,
        format!(
            "{runs_with_entries}/10 runs entered restoration ({entries} entries, {replay_failures} replay failures)"
        ),
    );
}

/// Determinism: repeating a campaign with an identical plan yields
/// byte-identical CSV output.
#[test]
fn criterion_10_campaign_determinism() {
    let make = || {
        let rows =
            harness::run_experiment(&plan(&["G12", "G8", "G6"], 400, StartKind::Midpoint))
                .unwrap();
        let mut buf = Vec::new();
        harness::write_structured(&rows, OutputFormat::Csv, &mut buf).unwrap();
        buf
    };
    let a = make();
    let b = make();
    report(
        "10 (campaign determinism)",
        a == b,
        format!("{} CSV bytes, byte-identical: {}", a.len(), a == b),
    );
}
