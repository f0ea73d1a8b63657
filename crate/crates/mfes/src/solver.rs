//! The constrained evolution-strategy solver: offspring generation, merit
//! and violation ranking, trial-mean acceptance under sufficient decrease,
//! the restoration phase that drives down infeasibility, step-size control,
//! and per-iteration trace recording.

use std::io::{self, Write};

use nalgebra::DVector;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use thiserror::Error;

use crate::engine::{
    self, default_population, recombine, tangent_generators_box, CmaParams, DirectionSet,
    DistributionState, Provenance, RecombinationWeights,
};
use crate::problem::{
    is_feasible, EvalCounts, EvaluatedPoint, ExtendedReal, MeritParams, ProblemSpec, ViolationNorm,
};

#[derive(Debug, Error)]
pub enum SolverError {
    #[error("starting point must satisfy the unrelaxable constraints")]
    InfeasibleStart,
    #[error("starting point has dimension {got}, problem has {expected}")]
    DimensionMismatch { expected: usize, got: usize },
    #[error("configuration error: {0}")]
    BadConfig(String),
    #[error("coordinate {0} is fixed (lower == upper); eliminate it before solving")]
    DegenerateBounds(usize),
    #[error("problem has an infinite bound and no explicit start; supply one")]
    NoDefaultStart,
    #[error(transparent)]
    Engine(#[from] engine::EngineError),
}

// ---------------------------------------------------------------------------
// Configuration
// ---------------------------------------------------------------------------

/// How sampled directions are reconciled with the unrelaxable constraints.
#[derive(Clone, Copy, Debug, PartialEq, Eq, serde::Serialize, serde::Deserialize)]
pub enum DirectionMode {
    /// Projection for bounds-only regions, barrier otherwise.
    Auto,
    /// Clamp each sampled point onto the bound box.
    Projection,
    /// Keep raw directions; points outside the region get `+inf` without
    /// being evaluated. Optionally augments with tangent-cone generators.
    Barrier,
}

/// Which point the solver returns to when it leaves restoration through the
/// merit test. The trial point triggered the exit, so moving to it is the
/// default; the conservative alternative stays at the incumbent.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum RestorationExit {
    MoveToTrial,
    KeepIncumbent,
}

#[derive(Clone, Debug)]
pub struct SolverConfig {
    /// Offspring count; `4 + floor(3 ln n)` when unset.
    pub lambda: Option<usize>,
    /// Parent count; `floor(lambda / 2)` when unset.
    pub mu: Option<usize>,
    /// Step-shrink interval `(beta1, beta2)`; the shrink factor used is its
    /// midpoint, so the defaults give exactly `sigma <- 0.9 sigma`.
    pub beta1: f64,
    pub beta2: f64,
    /// Forcing function `rho(sigma) = forcing_coeff * sigma^forcing_exp`.
    pub forcing_coeff: f64,
    pub forcing_exp: f64,
    /// Penalty weight override; `max(10, g(x0))` when unset.
    pub delta_bar: Option<f64>,
    /// Constant `C > 1` in the near-feasibility guard.
    pub big_c: f64,
    pub norm: ViolationNorm,
    /// Maximum number of objective evaluations.
    pub budget: usize,
    pub feasibility_tol: f64,
    pub mode: DirectionMode,
    /// In barrier mode, replace the tail sampled directions with tangent-cone
    /// generators when near-active bounds exist.
    pub generator_augmentation: bool,
    pub seed: u64,
    /// Initial step length override; half the smallest finite bound range
    /// (or 1) when unset.
    pub sigma0: Option<f64>,
    /// Stagnation stop: terminate once `sigma` falls below this.
    pub sigma_stop: f64,
    pub restoration_exit: RestorationExit,
}

impl Default for SolverConfig {
    fn default() -> Self {
        SolverConfig {
            lambda: None,
            mu: None,
            beta1: 0.9,
            beta2: 0.9,
            forcing_coeff: 1e-4,
            forcing_exp: 2.0,
            delta_bar: None,
            big_c: 100.0,
            norm: ViolationNorm::L1,
            budget: 1000,
            feasibility_tol: 1e-5,
            mode: DirectionMode::Auto,
            generator_augmentation: false,
            seed: 0,
            sigma0: None,
            sigma_stop: 1e-12,
            restoration_exit: RestorationExit::MoveToTrial,
        }
    }
}

impl SolverConfig {
    pub fn with_budget(mut self, budget: usize) -> Self {
        self.budget = budget;
        self
    }

    pub fn with_seed(mut self, seed: u64) -> Self {
        self.seed = seed;
        self
    }

    fn validate(&self) -> Result<(), SolverError> {
        if !(self.beta1 > 0.0 && self.beta1 <= self.beta2 && self.beta2 < 1.0) {
            return Err(SolverError::BadConfig(
                "need 0 < beta1 <= beta2 < 1".into(),
            ));
        }
        if !(self.forcing_coeff > 0.0 && self.forcing_exp > 1.0) {
            return Err(SolverError::BadConfig(
                "forcing function needs coeff > 0 and exponent > 1".into(),
            ));
        }
        if !(self.big_c > 1.0) {
            return Err(SolverError::BadConfig("need C > 1".into()));
        }
        if !(self.feasibility_tol > 0.0) {
            return Err(SolverError::BadConfig("feasibility_tol must be > 0".into()));
        }
        if let Some(s) = self.sigma0 {
            if !(s > 0.0) {
                return Err(SolverError::BadConfig("sigma0 must be > 0".into()));
            }
        }
        Ok(())
    }
}

/// Sufficient-decrease margin `rho(sigma)`; positive and nondecreasing.
pub fn forcing(sigma: f64, cfg: &SolverConfig) -> f64 {
    debug_assert!(sigma > 0.0);
    cfg.forcing_coeff * sigma.powf(cfg.forcing_exp)
}

/// Initial step length: half the smallest finite bound range, or 1 when no
/// coordinate has two finite bounds. A zero-width coordinate is an error.
pub fn initial_step(p: &ProblemSpec) -> Result<f64, SolverError> {
    let mut min_range = f64::INFINITY;
    for j in 0..p.dimension() {
        let (lo, hi) = (p.lower()[j], p.upper()[j]);
        if lo.is_finite() && hi.is_finite() {
            if hi == lo {
                return Err(SolverError::DegenerateBounds(j));
            }
            min_range = min_range.min(hi - lo);
        }
    }
    Ok(if min_range.is_finite() {
        0.5 * min_range
    } else {
        1.0
    })
}

/// Componentwise bound midpoint, the default starting point for fully
/// bounded problems.
pub fn default_start(p: &ProblemSpec) -> Result<Vec<f64>, SolverError> {
    let mut x = Vec::with_capacity(p.dimension());
    for j in 0..p.dimension() {
        let (lo, hi) = (p.lower()[j], p.upper()[j]);
        if !(lo.is_finite() && hi.is_finite()) {
            return Err(SolverError::NoDefaultStart);
        }
        x.push((lo + hi) / 2.0);
    }
    Ok(x)
}

// ---------------------------------------------------------------------------
// Acceptance predicates
// ---------------------------------------------------------------------------

/// The trigger for entering restoration: the trial decreases the violation
/// sufficiently, the incumbent is far from feasibility, and the merit did
/// not improve. Requires `trial.in_omega_nr` (checked upstream).
pub fn is_restoration_identifier(
    trial: &EvaluatedPoint,
    current: &EvaluatedPoint,
    sigma: f64,
    cfg: &SolverConfig,
) -> bool {
    let rho = forcing(sigma, cfg);
    trial.g < current.g - rho
        && current.g > cfg.big_c * rho
        && trial.merit.value() >= current.merit.value()
}

/// A successful trial point: sufficient violation decrease while far from
/// feasibility, or sufficient merit decrease.
pub fn is_successful_point(
    trial: &EvaluatedPoint,
    current: &EvaluatedPoint,
    sigma: f64,
    cfg: &SolverConfig,
) -> bool {
    let rho = forcing(sigma, cfg);
    (current.g > cfg.big_c * rho && trial.g < current.g - rho)
        || trial.merit.value() < current.merit.value() - rho
}

// ---------------------------------------------------------------------------
// Trace
// ---------------------------------------------------------------------------

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Phase {
    Main,
    Restoration,
}

impl Phase {
    pub fn as_str(&self) -> &'static str {
        match self {
            Phase::Main => "main",
            Phase::Restoration => "restoration",
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum EventKind {
    MainSuccess,
    MainUnsuccess,
    EnterRestoration,
    RestorationSuccess,
    RestorationUnsuccess,
    LeaveRestoration,
    TrialOutsideOmegaNr,
}

impl EventKind {
    pub fn as_str(&self) -> &'static str {
        match self {
            EventKind::MainSuccess => "main-success",
            EventKind::MainUnsuccess => "main-unsuccess",
            EventKind::EnterRestoration => "enter-restoration",
            EventKind::RestorationSuccess => "restoration-success",
            EventKind::RestorationUnsuccess => "restoration-unsuccess",
            EventKind::LeaveRestoration => "leave-restoration",
            EventKind::TrialOutsideOmegaNr => "trial-outside",
        }
    }

    /// Unsuccessful iterations shrink the step; phase transitions keep it.
    pub fn shrinks_sigma(&self) -> bool {
        matches!(
            self,
            EventKind::MainUnsuccess
                | EventKind::RestorationUnsuccess
                | EventKind::TrialOutsideOmegaNr
        )
    }
}

/// One iteration of the run. `f`/`merit` fields are `None` when the solver
/// never spent the corresponding evaluation (restoration iterations rank by
/// violation only); `+inf` values mean a barrier rejection.
#[derive(Clone, Debug)]
pub struct TraceEvent {
    pub iteration: usize,
    pub phase: Phase,
    pub kind: EventKind,
    /// True only for accepted trial means (Main or Restoration success).
    pub success: bool,
    pub sigma_before: f64,
    pub sigma_after: f64,
    pub f_current: Option<f64>,
    pub g_current: f64,
    pub merit_current: Option<f64>,
    pub f_trial: Option<f64>,
    pub g_trial: f64,
    pub merit_trial: Option<f64>,
    /// Objective evaluations performed so far (after this iteration).
    pub f_evals: usize,
}

fn fmt_opt(v: Option<f64>) -> String {
    match v {
        None => "-".to_string(),
        Some(v) if v.is_infinite() => "inf".to_string(),
        Some(v) => format!("{v:.17e}"),
    }
}

impl TraceEvent {
    /// One line per event, space-separated, field order:
    /// `iteration phase kind success sigma_before sigma_after f_current
    /// g_current merit_current f_trial g_trial merit_trial f_evals`.
    /// Unevaluated fields print as `-`, barrier values as `inf`.
    pub fn write_line<W: Write>(&self, w: &mut W) -> io::Result<()> {
        writeln!(
            w,
            "{} {} {} {} {:.17e} {:.17e} {} {} {} {} {} {} {}",
            self.iteration,
            self.phase.as_str(),
            self.kind.as_str(),
            self.success,
            self.sigma_before,
            self.sigma_after,
            fmt_opt(self.f_current),
            fmt_opt(Some(self.g_current)),
            fmt_opt(self.merit_current),
            fmt_opt(self.f_trial),
            fmt_opt(Some(self.g_trial)),
            fmt_opt(self.merit_trial),
            self.f_evals,
        )
    }

    /// Re-checks the restoration trigger from the recorded scalars.
    pub fn replay_restoration_identifier(&self, cfg: &SolverConfig) -> Option<bool> {
        let (m_cur, m_tr) = (self.merit_current?, self.merit_trial?);
        let rho = forcing(self.sigma_before, cfg);
        Some(
            self.g_trial < self.g_current - rho
                && self.g_current > cfg.big_c * rho
                && m_tr >= m_cur,
        )
    }
}

// ---------------------------------------------------------------------------
// Run record
// ---------------------------------------------------------------------------

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum StopReason {
    BudgetExhausted,
    SigmaStagnation,
}

/// Restoration usage over a finite run, a budget-bounded stand-in for the
/// asymptotic trichotomy (restoration entered finitely often, entered and
/// never left, entered infinitely often).
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum RestorationClass {
    FiniteRestoration,
    NeverLeft,
    InfinitelyOften,
}

#[derive(Clone, Debug)]
pub struct RunRecord {
    pub problem: String,
    pub seed: u64,
    pub budget: usize,
    /// Least-objective evaluated point that met the feasibility tolerance,
    /// over every point the run actually evaluated (offspring, trial means,
    /// and the start).
    pub best_feasible: Option<EvaluatedPoint>,
    /// Objective evaluations spent when `best_feasible` was first attained.
    pub f_evals_at_best: Option<usize>,
    pub final_iterate: EvaluatedPoint,
    pub f_evals: usize,
    pub c_evals: usize,
    pub eval_errors: usize,
    pub iterations: usize,
    pub restoration_entries: usize,
    pub sigma_min: f64,
    pub sigma_final: f64,
    pub sigma0: f64,
    pub stop: StopReason,
    pub trace: Vec<TraceEvent>,
}

impl RunRecord {
    pub fn classify(&self) -> RestorationClass {
        classify_run(&self.trace, self.budget)
    }

    /// Single-record summary of the run as JSON.
    pub fn summary_json(&self) -> serde_json::Value {
        let best = self.best_feasible.as_ref();
        serde_json::json!({
            "problem": self.problem,
            "seed": self.seed,
            "budget": self.budget,
            "best_x": best.map(|b| b.x.clone()),
            "best_f": best.map(|b| b.f.value()),
            "best_g": best.map(|b| b.g),
            "f_evals_at_best": self.f_evals_at_best,
            "final_x": self.final_iterate.x.clone(),
            "final_f": self.final_iterate.f.value(),
            "final_g": self.final_iterate.g,
            "f_evals": self.f_evals,
            "c_evals": self.c_evals,
            "eval_errors": self.eval_errors,
            "iterations": self.iterations,
            "restoration_entries": self.restoration_entries,
            "sigma_min": self.sigma_min,
            "sigma0": self.sigma0,
            "stop": match self.stop {
                StopReason::BudgetExhausted => "budget",
                StopReason::SigmaStagnation => "sigma-stagnation",
            },
            "classification": match self.classify() {
                RestorationClass::FiniteRestoration => "finite-restoration",
                RestorationClass::NeverLeft => "never-left",
                RestorationClass::InfinitelyOften => "infinitely-often",
            },
        })
    }

    pub fn write_trace<W: Write>(&self, w: &mut W) -> io::Result<()> {
        for ev in &self.trace {
            ev.write_line(w)?;
        }
        Ok(())
    }
}

/// Classifies restoration usage from a completed trace. `NeverLeft` when the
/// final restoration entry is never matched by an exit and at least half the
/// budget was spent inside it; `InfinitelyOften` when entries reach the
/// threshold (20) and keep occurring in the last tenth of the budget.
pub fn classify_run(trace: &[TraceEvent], budget: usize) -> RestorationClass {
    let mut entries: Vec<&TraceEvent> = Vec::new();
    let mut last_enter_open: Option<&TraceEvent> = None;
    for ev in trace {
        match ev.kind {
            EventKind::EnterRestoration => {
                entries.push(ev);
                last_enter_open = Some(ev);
            }
            EventKind::LeaveRestoration => {
                last_enter_open = None;
            }
            _ => {}
        }
    }
    let total_f = trace.last().map(|e| e.f_evals).unwrap_or(0);
    if let Some(open) = last_enter_open {
        if (total_f - open.f_evals) * 2 >= budget {
            return RestorationClass::NeverLeft;
        }
    }
    let threshold = 20;
    if entries.len() >= threshold {
        let tail_start = (budget as f64 * 0.9) as usize;
        if entries.iter().any(|e| e.f_evals >= tail_start) {
            return RestorationClass::InfinitelyOften;
        }
    }
    RestorationClass::FiniteRestoration
}

// ---------------------------------------------------------------------------
// Solver
// ---------------------------------------------------------------------------

/// Incumbent mean parent. During restoration the objective at an accepted
/// point is not evaluated until a merit comparison needs it, so `f` is
/// memoized separately from `g`.
#[derive(Clone, Debug)]
struct Incumbent {
    x: Vec<f64>,
    f: Option<ExtendedReal>,
    g: f64,
}

impl Incumbent {
    fn as_evaluated(&self, delta_bar: f64) -> EvaluatedPoint {
        let f = self.f.expect("incumbent objective not evaluated yet");
        EvaluatedPoint {
            x: self.x.clone(),
            f,
            g: self.g,
            merit: ExtendedReal::from_eval(f.value() + delta_bar * self.g),
            in_omega_nr: true,
        }
    }
}

struct Solver<'a> {
    p: &'a ProblemSpec,
    cfg: &'a SolverConfig,
    mp: MeritParams,
    lambda: usize,
    weights: RecombinationWeights,
    cma: CmaParams,
    mode: DirectionMode,
    beta: f64,
    rng: ChaCha8Rng,
    ds: DistributionState,
    sigma: f64,
    sigma_min: f64,
    phase: Phase,
    incumbent: Incumbent,
    counts: EvalCounts,
    best: Option<EvaluatedPoint>,
    best_at: Option<usize>,
    restoration_entries: usize,
    trace: Vec<TraceEvent>,
    min_finite_range: f64,
}

impl<'a> Solver<'a> {
    /// Evaluates the merit of `x`, counting and best-tracking.
    fn eval_merit(&mut self, x: &[f64]) -> EvaluatedPoint {
        let ep = self.p.eval_merit(x, &self.mp, &mut self.counts);
        self.track_best(&ep);
        ep
    }

    /// Ensures the incumbent's objective is known (restoration may have
    /// accepted it on violation alone).
    fn ensure_incumbent_f(&mut self) {
        if self.incumbent.f.is_none() {
            let f = self.p.eval_objective(&self.incumbent.x, &mut self.counts);
            self.incumbent.f = Some(f);
            let ep = self.incumbent.as_evaluated(self.mp.delta_bar);
            self.track_best(&ep);
        }
    }

    fn track_best(&mut self, ep: &EvaluatedPoint) {
        if !is_feasible(ep, self.cfg.feasibility_tol) {
            return;
        }
        let better = match &self.best {
            None => true,
            Some(b) => ep.f < b.f,
        };
        if better {
            self.best = Some(ep.clone());
            self.best_at = Some(self.counts.objective);
        }
    }

    /// Offspring points for this iteration along with the direction set:
    /// raw samples, the adjusted steps `(y - x) / sigma` actually taken, and
    /// per-direction provenance.
    fn generate_offspring(&mut self) -> (Vec<Vec<f64>>, DirectionSet) {
        let raw = self.ds.sample_directions(self.lambda, &mut self.rng);
        let x = &self.incumbent.x;
        let n = x.len();
        match self.mode {
            DirectionMode::Projection => {
                let mut points = Vec::with_capacity(self.lambda);
                let mut adjusted = Vec::with_capacity(self.lambda);
                let mut provenance = Vec::with_capacity(self.lambda);
                for d in &raw {
                    let stepped: Vec<f64> =
                        (0..n).map(|j| x[j] + self.sigma * d[j]).collect();
                    let y = engine::project_box(&stepped, self.p.lower(), self.p.upper());
                    let step =
                        DVector::from_iterator(n, y.iter().zip(x).map(|(yj, xj)| (yj - xj) / self.sigma));
                    provenance.push(if y == stepped {
                        Provenance::Sampled
                    } else {
                        Provenance::Projected
                    });
                    points.push(y);
                    adjusted.push(step);
                }
                (points, DirectionSet { raw, adjusted, provenance })
            }
            DirectionMode::Barrier => {
                let mut adjusted = raw.clone();
                let mut provenance = vec![Provenance::Sampled; self.lambda];
                if self.cfg.generator_augmentation {
                    let eps = self.sigma.min(1e-3 * self.min_finite_range);
                    if eps > 0.0 && eps.is_finite() {
                        let gens =
                            tangent_generators_box(x, self.p.lower(), self.p.upper(), eps);
                        let take = gens.len().min(self.lambda / 2);
                        for (slot, g) in gens.into_iter().take(take).enumerate() {
                            let idx = self.lambda - take + slot;
                            adjusted[idx] = g;
                            provenance[idx] = Provenance::Generator;
                        }
                    }
                }
                let points = adjusted
                    .iter()
                    .map(|d| (0..n).map(|j| x[j] + self.sigma * d[j]).collect())
                    .collect();
                (points, DirectionSet { raw, adjusted, provenance })
            }
            DirectionMode::Auto => unreachable!("mode resolved before the loop"),
        }
    }

    /// CMA update from the ranked parent steps, skipping generator-provenance
    /// directions (their geometry is not a sample from the distribution).
    /// `moved_from` is the pre-iteration incumbent when the trial was
    /// accepted; a rejected trial feeds the paths a zero mean step, so the
    /// ES step length decays during stalls instead of integrating progress
    /// that never happened.
    fn update_distribution(
        &mut self,
        order: &[usize],
        dirs: &DirectionSet,
        sigma: f64,
        moved_from: Option<&[f64]>,
    ) -> Result<(), SolverError> {
        let mu = self.weights.len();
        let mut kept_steps = Vec::with_capacity(mu);
        let mut kept_w = Vec::with_capacity(mu);
        for (rank, &idx) in order.iter().take(mu).enumerate() {
            if dirs.provenance[idx] != Provenance::Generator {
                kept_steps.push(dirs.adjusted[idx].clone());
                kept_w.push(self.weights.as_slice()[rank]);
            }
        }
        if kept_steps.is_empty() {
            return Ok(());
        }
        let weights = if kept_w.len() == mu {
            self.weights.clone()
        } else {
            let total: f64 = kept_w.iter().sum();
            for w in &mut kept_w {
                *w /= total;
            }
            RecombinationWeights::new(kept_w)?
        };
        let n = self.incumbent.x.len();
        let mean_step = moved_from.map(|old| {
            DVector::from_iterator(
                n,
                self.incumbent.x.iter().zip(old).map(|(xn, xo)| (xn - xo) / sigma),
            )
        });
        self.ds.update(&kept_steps, &weights, &self.cma, mean_step.as_ref())?;
        self.ds.clamp_sigma_es(0.1 * self.sigma, 10.0 * self.sigma);
        Ok(())
    }

    fn main_iteration(&mut self, k: usize) -> Result<TraceEvent, SolverError> {
        let sigma = self.sigma;
        let (points, dirs) = self.generate_offspring();
        let offspring: Vec<EvaluatedPoint> =
            points.iter().map(|y| self.eval_merit(y)).collect();

        let mut order: Vec<usize> = (0..self.lambda).collect();
        order.sort_by(|&a, &b| offspring[a].merit.cmp(&offspring[b].merit));

        let mu = self.weights.len();
        let parent_points: Vec<&[f64]> = order[..mu]
            .iter()
            .map(|&i| offspring[i].x.as_slice())
            .collect();
        let trial_x = recombine(&parent_points, &self.weights);
        let trial = self.eval_merit(&trial_x);

        let current = self.incumbent.as_evaluated(self.mp.delta_bar);
        let x_before = self.incumbent.x.clone();
        let kind;
        if !trial.in_omega_nr {
            kind = EventKind::TrialOutsideOmegaNr;
            self.sigma = self.beta * sigma;
        } else if is_restoration_identifier(&trial, &current, sigma, self.cfg) {
            kind = EventKind::EnterRestoration;
            self.phase = Phase::Restoration;
            self.restoration_entries += 1;
        } else if is_successful_point(&trial, &current, sigma, self.cfg) {
            kind = EventKind::MainSuccess;
            self.incumbent = Incumbent {
                x: trial.x.clone(),
                f: Some(trial.f),
                g: trial.g,
            };
            self.sigma = sigma.max(self.ds.sigma_es());
        } else {
            kind = EventKind::MainUnsuccess;
            self.sigma = self.beta * sigma;
        }

        let moved = kind == EventKind::MainSuccess;
        self.update_distribution(&order, &dirs, sigma, moved.then_some(x_before.as_slice()))?;

        Ok(TraceEvent {
            iteration: k,
            phase: Phase::Main,
            kind,
            success: kind == EventKind::MainSuccess,
            sigma_before: sigma,
            sigma_after: self.sigma,
            f_current: Some(current.f.value()),
            g_current: current.g,
            merit_current: Some(current.merit.value()),
            f_trial: Some(trial.f.value()),
            g_trial: trial.g,
            merit_trial: Some(trial.merit.value()),
            f_evals: self.counts.objective,
        })
    }

    fn restoration_iteration(&mut self, k: usize) -> Result<TraceEvent, SolverError> {
        let sigma = self.sigma;
        let (points, dirs) = self.generate_offspring();

        // rank by the barrier violation only; no objective evaluation here
        let g_vals: Vec<f64> = points
            .iter()
            .map(|y| self.p.barrier_violation(y, self.cfg.norm, &mut self.counts))
            .collect();
        let mut order: Vec<usize> = (0..self.lambda).collect();
        order.sort_by(|&a, &b| g_vals[a].total_cmp(&g_vals[b]));

        let mu = self.weights.len();
        let parent_points: Vec<&[f64]> =
            order[..mu].iter().map(|&i| points[i].as_slice()).collect();
        let trial_x = recombine(&parent_points, &self.weights);
        let trial_in = self.p.in_unrelaxable(&trial_x);
        let trial_g = if trial_in {
            self.p
                .eval_violation(&trial_x, self.cfg.norm, &mut self.counts)
        } else {
            f64::INFINITY
        };

        let rho = forcing(sigma, self.cfg);
        let g_k = self.incumbent.g;
        let x_before = self.incumbent.x.clone();

        // incumbent scalars at the start of the iteration, for the trace
        let mut f_current = self.incumbent.f.map(|f| f.value());
        let mut merit_current = self
            .incumbent
            .f
            .map(|f| f.value() + self.mp.delta_bar * g_k);

        let mut kind;
        let mut f_trial = None;
        let mut merit_trial = None;

        if trial_in && trial_g < g_k - rho && g_k > self.cfg.big_c * rho {
            kind = EventKind::RestorationSuccess;
            self.incumbent = Incumbent {
                x: trial_x,
                f: None,
                g: trial_g,
            };
            self.sigma = sigma.max(self.ds.sigma_es());
        } else {
            // unsuccessful; the exit test compares merits, which may spend
            // the objective evaluations it needs
            kind = if trial_in {
                EventKind::RestorationUnsuccess
            } else {
                EventKind::TrialOutsideOmegaNr
            };
            let m_trial = if trial_in {
                let f = self.p.eval_objective(&trial_x, &mut self.counts);
                let ep = EvaluatedPoint {
                    x: trial_x.clone(),
                    f,
                    g: trial_g,
                    merit: ExtendedReal::from_eval(f.value() + self.mp.delta_bar * trial_g),
                    in_omega_nr: true,
                };
                self.track_best(&ep);
                f_trial = Some(f.value());
                ep.merit.value()
            } else {
                f64::INFINITY
            };
            merit_trial = Some(m_trial);
            self.ensure_incumbent_f();
            f_current = self.incumbent.f.map(|f| f.value());
            let m_current = self.incumbent.as_evaluated(self.mp.delta_bar).merit.value();
            merit_current = Some(m_current);

            if m_trial < m_current {
                kind = EventKind::LeaveRestoration;
                self.phase = Phase::Main;
                if self.cfg.restoration_exit == RestorationExit::MoveToTrial {
                    // trial is in the region here: +inf merit never beats the
                    // incumbent's finite merit
                    self.incumbent = Incumbent {
                        x: trial_x,
                        f: f_trial.map(ExtendedReal::from_eval),
                        g: trial_g,
                    };
                }
                // sigma carries over unchanged
            } else {
                self.sigma = self.beta * sigma;
            }
        }

        let moved = matches!(
            kind,
            EventKind::RestorationSuccess | EventKind::LeaveRestoration
        ) && self.incumbent.x != x_before;
        self.update_distribution(&order, &dirs, sigma, moved.then_some(x_before.as_slice()))?;

        Ok(TraceEvent {
            iteration: k,
            phase: Phase::Restoration,
            kind,
            success: kind == EventKind::RestorationSuccess,
            sigma_before: sigma,
            sigma_after: self.sigma,
            f_current,
            g_current: g_k,
            merit_current,
            f_trial,
            g_trial: trial_g,
            merit_trial,
            f_evals: self.counts.objective,
        })
    }
}

/// Runs the solver from `x0` (which must satisfy the unrelaxable
/// constraints, though it may violate the relaxable ones) until the
/// objective-evaluation budget is exhausted or the step length stagnates.
pub fn solve(p: &ProblemSpec, cfg: &SolverConfig, x0: &[f64]) -> Result<RunRecord, SolverError> {
    cfg.validate()?;
    if x0.len() != p.dimension() {
        return Err(SolverError::DimensionMismatch {
            expected: p.dimension(),
            got: x0.len(),
        });
    }
    if !p.in_unrelaxable(x0) {
        return Err(SolverError::InfeasibleStart);
    }

    let n = p.dimension();
    let (lambda_default, mu_default) = default_population(n);
    let lambda = cfg.lambda.unwrap_or(lambda_default);
    let mu = cfg.mu.unwrap_or_else(|| {
        if cfg.lambda.is_some() {
            lambda / 2
        } else {
            mu_default
        }
    });
    if mu == 0 || mu > lambda {
        return Err(SolverError::BadConfig(format!(
            "need 1 <= mu <= lambda, got lambda={lambda} mu={mu}"
        )));
    }
    if cfg.budget < lambda {
        return Err(SolverError::BadConfig(format!(
            "budget {} is below one generation (lambda = {lambda})",
            cfg.budget
        )));
    }
    let weights = RecombinationWeights::default_for(lambda, mu)?;
    let cma = CmaParams::new(n, &weights);

    let mode = match cfg.mode {
        DirectionMode::Auto => {
            if p.is_bounds_only() {
                DirectionMode::Projection
            } else {
                DirectionMode::Barrier
            }
        }
        m => m,
    };

    let sigma0 = match cfg.sigma0 {
        Some(s) => s,
        None => initial_step(p)?,
    };
    let beta = 0.5 * (cfg.beta1 + cfg.beta2);

    let mut counts = EvalCounts::default();
    let g0 = p.eval_violation(x0, cfg.norm, &mut counts);
    let delta_bar = cfg.delta_bar.unwrap_or_else(|| 10.0f64.max(g0));
    let mp = MeritParams::new(delta_bar, cfg.big_c, cfg.norm)
        .map_err(|e| SolverError::BadConfig(e.to_string()))?;
    let f0 = p.eval_objective(x0, &mut counts);

    let min_finite_range = (0..n)
        .filter_map(|j| {
            let (lo, hi) = (p.lower()[j], p.upper()[j]);
            (lo.is_finite() && hi.is_finite()).then(|| hi - lo)
        })
        .fold(f64::INFINITY, f64::min);

    let mut solver = Solver {
        p,
        cfg,
        mp,
        lambda,
        weights,
        cma,
        mode,
        beta,
        rng: ChaCha8Rng::seed_from_u64(cfg.seed),
        ds: DistributionState::new(n, sigma0),
        sigma: sigma0,
        sigma_min: sigma0,
        phase: Phase::Main,
        incumbent: Incumbent {
            x: x0.to_vec(),
            f: Some(f0),
            g: g0,
        },
        counts,
        best: None,
        best_at: None,
        restoration_entries: 0,
        trace: Vec::new(),
        min_finite_range,
    };
    let start_ep = solver.incumbent.as_evaluated(delta_bar);
    solver.track_best(&start_ep);

    let mut k = 0;
    let stop;
    loop {
        if solver.counts.objective >= cfg.budget {
            stop = StopReason::BudgetExhausted;
            break;
        }
        if solver.sigma < cfg.sigma_stop {
            stop = StopReason::SigmaStagnation;
            break;
        }
        let ev = match solver.phase {
            Phase::Main => solver.main_iteration(k)?,
            Phase::Restoration => solver.restoration_iteration(k)?,
        };
        debug_assert!(
            p.in_unrelaxable(&solver.incumbent.x),
            "incumbent left the unrelaxable region at iteration {k}"
        );
        solver.sigma_min = solver.sigma_min.min(solver.sigma);
        solver.trace.push(ev);
        k += 1;
    }

    solver.ensure_incumbent_f();
    let final_iterate = solver.incumbent.as_evaluated(delta_bar);

    Ok(RunRecord {
        problem: p.name().to_string(),
        seed: cfg.seed,
        budget: cfg.budget,
        best_feasible: solver.best,
        f_evals_at_best: solver.best_at,
        final_iterate,
        f_evals: solver.counts.objective,
        c_evals: solver.counts.constraint,
        eval_errors: solver.counts.eval_errors,
        iterations: k,
        restoration_entries: solver.restoration_entries,
        sigma_min: solver.sigma_min,
        sigma_final: solver.sigma,
        sigma0,
        stop,
        trace: solver.trace,
    })
}
