//! Shared test support: an independently coded sufficient-decrease ES for
//! unrelaxable-constraints-only problems (no merit machinery, no
//! restoration), used as the reference path for the degenerate-equivalence
//! checks, plus a few problem builders.

use std::sync::Arc;

use nalgebra::DVector;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use mfes::engine::{
    default_population, project_box, recombine, CmaParams, DistributionState,
    RecombinationWeights,
};
use mfes::problem::{EvalCounts, ProblemSpec};
use mfes::solver::{initial_step, SolverConfig};

pub struct A1Event {
    pub sigma_before: f64,
    pub sigma_after: f64,
    pub success: bool,
    pub f_current: f64,
    pub f_trial: f64,
    pub f_evals: usize,
}

pub struct A1Run {
    pub events: Vec<A1Event>,
    pub final_x: Vec<f64>,
    pub f_evals: usize,
}

/// Sufficient-decrease ES for problems whose only constraints are the
/// unrelaxable bounds: rank offspring by the barrier objective, accept the
/// recombined trial mean iff `f(trial) <= f(x_k) - rho(sigma_k)`, shrink the
/// step otherwise. Uses the same engine primitives (sampling, projection,
/// recombination, distribution update) so that, with equal seeds, any
/// difference from the full solver isolates the acceptance logic itself.
pub fn algorithm1_solve(p: &ProblemSpec, cfg: &SolverConfig, x0: &[f64]) -> A1Run {
    assert!(p.in_unrelaxable(x0), "reference requires a feasible start");
    assert_eq!(p.num_relaxable(), 0, "reference handles bounds only");

    let n = p.dimension();
    let (lambda_d, mu_d) = default_population(n);
    let lambda = cfg.lambda.unwrap_or(lambda_d);
    let mu = cfg.mu.unwrap_or(mu_d);
    let weights = RecombinationWeights::default_for(lambda, mu).unwrap();
    let cma = CmaParams::new(n, &weights);
    let sigma0 = match cfg.sigma0 {
        Some(s) => s,
        None => initial_step(p).unwrap(),
    };
    let beta = 0.5 * (cfg.beta1 + cfg.beta2);

    let mut counts = EvalCounts::default();
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let mut ds = DistributionState::new(n, sigma0);
    let mut sigma = sigma0;
    let mut x = x0.to_vec();
    let mut fx = p.eval_objective(&x, &mut counts).value();

    let mut events = Vec::new();
    while counts.objective < cfg.budget && sigma >= cfg.sigma_stop {
        let raw = ds.sample_directions(lambda, &mut rng);
        let mut points = Vec::with_capacity(lambda);
        let mut steps = Vec::with_capacity(lambda);
        for d in &raw {
            let stepped: Vec<f64> = (0..n).map(|j| x[j] + sigma * d[j]).collect();
            let y = project_box(&stepped, p.lower(), p.upper());
            let step =
                DVector::from_iterator(n, y.iter().zip(&x).map(|(yj, xj)| (yj - xj) / sigma));
            points.push(y);
            steps.push(step);
        }

        let f_vals: Vec<f64> = points
            .iter()
            .map(|y| p.barrier_objective(y, &mut counts).value())
            .collect();
        let mut order: Vec<usize> = (0..lambda).collect();
        order.sort_by(|&a, &b| f_vals[a].total_cmp(&f_vals[b]));

        let parent_points: Vec<&[f64]> = order[..mu].iter().map(|&i| points[i].as_slice()).collect();
        let trial = recombine(&parent_points, &weights);
        let f_trial = p.barrier_objective(&trial, &mut counts).value();

        let sigma_before = sigma;
        let f_before = fx;
        let success = f_trial <= fx - cfg.forcing_coeff * sigma.powf(cfg.forcing_exp);
        let moved_from = if success {
            let old = x.clone();
            x = trial;
            fx = f_trial;
            sigma = sigma.max(ds.sigma_es());
            Some(old)
        } else {
            sigma *= beta;
            None
        };

        let ranked_steps: Vec<DVector<f64>> =
            order[..mu].iter().map(|&i| steps[i].clone()).collect();
        let mean_step = moved_from.map(|old| {
            DVector::from_iterator(n, x.iter().zip(&old).map(|(xn, xo)| (xn - xo) / sigma_before))
        });
        ds.update(&ranked_steps, &weights, &cma, mean_step.as_ref())
            .unwrap();
        ds.clamp_sigma_es(0.1 * sigma, 10.0 * sigma);

        events.push(A1Event {
            sigma_before,
            sigma_after: sigma,
            success,
            f_current: f_before,
            f_trial,
            f_evals: counts.objective,
        });
    }

    A1Run {
        events,
        final_x: x,
        f_evals: counts.objective,
    }
}

/// `min |x|^2` subject to the relaxable constraint `1 - x_1 <= 0` on the box
/// `[-5, 5]^n`; the optimum is `x = (1, 0, ..)` with objective 1.
pub fn penalized_sphere(n: usize) -> ProblemSpec {
    ProblemSpec::new("penalized-sphere", n, Arc::new(|x: &[f64]| {
        x.iter().map(|v| v * v).sum()
    }))
    .unwrap()
    .with_bounds(vec![-5.0; n], vec![5.0; n])
    .unwrap()
    .with_constraint(Arc::new(|x: &[f64]| 1.0 - x[0]))
}

/// Plain sphere on `[-5, 5]^n` with no relaxable constraints.
pub fn bounded_sphere(n: usize) -> ProblemSpec {
    ProblemSpec::new("sphere", n, Arc::new(|x: &[f64]| {
        x.iter().map(|v| v * v).sum()
    }))
    .unwrap()
    .with_bounds(vec![-5.0; n], vec![5.0; n])
    .unwrap()
}
