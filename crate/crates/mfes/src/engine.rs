//! Sampling-distribution adaptation (CMA-style), direction generation with
//! norm safeguards, bound projection, tangent-cone generators for boxes, and
//! weighted recombination.

use nalgebra::{DMatrix, DVector};
use rand::Rng;
use rand_distr::StandardNormal;
use thiserror::Error;

/// Lower norm safeguard on sampled directions.
pub const DIRECTION_NORM_MIN: f64 = 1e-10;
/// Upper norm safeguard on sampled directions.
pub const DIRECTION_NORM_MAX: f64 = 1e10;

#[derive(Debug, Error)]
pub enum EngineError {
    #[error("recombination weights must be nonnegative and sum to 1 (got sum {0})")]
    BadWeights(f64),
    #[error("need 1 <= mu <= lambda, got lambda={lambda} mu={mu}")]
    BadPopulation { lambda: usize, mu: usize },
    #[error("weight formula produced a nonpositive weight for mu={0}")]
    NonPositiveWeight(usize),
    #[error("cannot safeguard the zero direction")]
    ZeroDirection,
    #[error("covariance factorization failed")]
    FactorizationFailed,
}

/// Default population sizes: `lambda = 4 + floor(3 ln n)`, `mu = floor(lambda/2)`.
pub fn default_population(n: usize) -> (usize, usize) {
    assert!(n >= 1);
    let lambda = 4 + (3.0 * (n as f64).ln()).floor() as usize;
    (lambda, lambda / 2)
}

// ---------------------------------------------------------------------------
// Recombination weights
// ---------------------------------------------------------------------------

/// Simplex weights used to recombine the `mu` best offspring into the next
/// mean: nonnegative, summing to 1 (within 1e-12).
#[derive(Clone, Debug)]
pub struct RecombinationWeights {
    w: Vec<f64>,
}

impl RecombinationWeights {
    pub fn new(w: Vec<f64>) -> Result<RecombinationWeights, EngineError> {
        let sum: f64 = w.iter().sum();
        if w.is_empty() || w.iter().any(|&v| v < 0.0) || (sum - 1.0).abs() > 1e-12 {
            return Err(EngineError::BadWeights(sum));
        }
        Ok(RecombinationWeights { w })
    }

    /// Log-linear weights `a_i = ln(lambda/2 + 1/2) - ln(i)` normalized to
    /// sum 1; strictly decreasing over `i = 1..=mu`.
    pub fn default_for(lambda: usize, mu: usize) -> Result<RecombinationWeights, EngineError> {
        if mu == 0 || mu > lambda {
            return Err(EngineError::BadPopulation { lambda, mu });
        }
        let base = (lambda as f64 / 2.0 + 0.5).ln();
        let a: Vec<f64> = (1..=mu).map(|i| base - (i as f64).ln()).collect();
        if a[mu - 1] <= 0.0 {
            return Err(EngineError::NonPositiveWeight(mu));
        }
        let sum: f64 = a.iter().sum();
        Ok(RecombinationWeights {
            w: a.into_iter().map(|v| v / sum).collect(),
        })
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.w
    }

    pub fn len(&self) -> usize {
        self.w.len()
    }

    pub fn is_empty(&self) -> bool {
        self.w.is_empty()
    }

    /// Variance-effective selection mass `1 / sum(w_i^2)`.
    pub fn mu_eff(&self) -> f64 {
        1.0 / self.w.iter().map(|v| v * v).sum::<f64>()
    }
}

// ---------------------------------------------------------------------------
// CMA parameters
// ---------------------------------------------------------------------------

/// Learning rates of the covariance/step-length adaptation, the standard
/// defaults as functions of `n` and the selection mass. All fields are
/// public so tests can freeze the distribution by zeroing the rates.
#[derive(Clone, Copy, Debug)]
pub struct CmaParams {
    pub c_sigma: f64,
    pub d_sigma: f64,
    pub c_c: f64,
    pub c_1: f64,
    pub c_mu: f64,
    pub mu_eff: f64,
    /// Expected norm of an n-dimensional standard normal vector.
    pub chi_n: f64,
}

impl CmaParams {
    pub fn new(n: usize, weights: &RecombinationWeights) -> CmaParams {
        let nf = n as f64;
        let mu_eff = weights.mu_eff();
        let c_sigma = (mu_eff + 2.0) / (nf + mu_eff + 5.0);
        let d_sigma = 1.0 + 2.0 * (((mu_eff - 1.0) / (nf + 1.0)).sqrt() - 1.0).max(0.0) + c_sigma;
        let c_c = (4.0 + mu_eff / nf) / (nf + 4.0 + 2.0 * mu_eff / nf);
        let c_1 = 2.0 / ((nf + 1.3) * (nf + 1.3) + mu_eff);
        let c_mu = (2.0 * (mu_eff - 2.0 + 1.0 / mu_eff) / ((nf + 2.0) * (nf + 2.0) + mu_eff))
            .min(1.0 - c_1);
        let chi_n = nf.sqrt() * (1.0 - 1.0 / (4.0 * nf) + 1.0 / (21.0 * nf * nf));
        CmaParams {
            c_sigma,
            d_sigma,
            c_c,
            c_1,
            c_mu,
            mu_eff,
            chi_n,
        }
    }

    /// All learning rates zero: updates leave the distribution unchanged.
    pub fn frozen(n: usize, weights: &RecombinationWeights) -> CmaParams {
        let mut p = CmaParams::new(n, weights);
        p.c_sigma = 0.0;
        p.c_c = 0.0;
        p.c_1 = 0.0;
        p.c_mu = 0.0;
        p
    }
}

// ---------------------------------------------------------------------------
// Distribution state
// ---------------------------------------------------------------------------

/// Sampling distribution of the offspring directions: covariance `C` (kept
/// with its eigenfactorization for sampling), the two evolution paths, and
/// the adaptively controlled step length `sigma_es`.
#[derive(Clone, Debug)]
pub struct DistributionState {
    n: usize,
    cov: DMatrix<f64>,
    /// Eigenvectors of `cov` (columns).
    eig_vectors: DMatrix<f64>,
    /// Square roots of the (floored) eigenvalues.
    eig_sqrt: DVector<f64>,
    path_sigma: DVector<f64>,
    path_cov: DVector<f64>,
    sigma_es: f64,
    generation: u64,
    /// Number of updates that carried an accepted mean step.
    path_updates: u64,
}

impl DistributionState {
    pub fn new(n: usize, sigma_es: f64) -> DistributionState {
        assert!(n >= 1 && sigma_es > 0.0);
        DistributionState {
            n,
            cov: DMatrix::identity(n, n),
            eig_vectors: DMatrix::identity(n, n),
            eig_sqrt: DVector::from_element(n, 1.0),
            path_sigma: DVector::zeros(n),
            path_cov: DVector::zeros(n),
            sigma_es,
            generation: 0,
            path_updates: 0,
        }
    }

    pub fn covariance(&self) -> &DMatrix<f64> {
        &self.cov
    }

    pub fn sigma_es(&self) -> f64 {
        self.sigma_es
    }

    /// Clamps the adapted ES step length into `[lo, hi]`. The solver anchors
    /// it to a band around its own step size so the growth rule
    /// `max(sigma, sigma_es)` stays at the scale that generated the samples.
    pub fn clamp_sigma_es(&mut self, lo: f64, hi: f64) {
        self.sigma_es = self.sigma_es.clamp(lo, hi);
    }

    pub fn generation(&self) -> u64 {
        self.generation
    }

    pub fn path_sigma(&self) -> &DVector<f64> {
        &self.path_sigma
    }

    pub fn path_cov(&self) -> &DVector<f64> {
        &self.path_cov
    }

    /// Draws `lambda` directions `d ~ N(0, C)`, each safeguarded into the
    /// norm band. Consumes the generator deterministically: a fixed seed
    /// yields an identical direction set.
    pub fn sample_directions<R: Rng>(&self, lambda: usize, rng: &mut R) -> Vec<DVector<f64>> {
        let mut out = Vec::with_capacity(lambda);
        for _ in 0..lambda {
            loop {
                let z = DVector::from_fn(self.n, |_, _| rng.sample(StandardNormal));
                let scaled = z.component_mul(&self.eig_sqrt);
                let d = &self.eig_vectors * scaled;
                match safeguard_direction(&d) {
                    Ok(d) => {
                        out.push(d);
                        break;
                    }
                    // zero draw: resample (probability-zero event)
                    Err(_) => continue,
                }
            }
        }
        out
    }

    /// Applies the CMA update from the selected parents' steps
    /// `(y_i - x_k) / sigma_k` in rank order.
    ///
    /// `mean_step` is the displacement `(x_{k+1} - x_k) / sigma_k` the mean
    /// actually made, or `None` on iterations whose trial was rejected. The
    /// evolution paths and the ES step length integrate accepted moves only:
    /// feeding them the would-be displacement of rejected trials lets the
    /// step length ratchet up through stalls (selection keeps pointing the
    /// same way while the mean goes nowhere), while decaying the paths on
    /// every rejection biases the adaptation into collapse. Rejected
    /// iterations still reshape the covariance through its rank-mu term.
    ///
    /// The factorization is refreshed after the update, with an eigenvalue
    /// floor of `1e-14 * trace(C) / n` as repair against loss of positive
    /// definiteness.
    pub fn update(
        &mut self,
        ranked_steps: &[DVector<f64>],
        weights: &RecombinationWeights,
        params: &CmaParams,
        mean_step: Option<&DVector<f64>>,
    ) -> Result<(), EngineError> {
        assert_eq!(ranked_steps.len(), weights.len());
        let w = weights.as_slice();
        self.generation += 1;

        let mut rank_one = params.c_1;
        let mut base_extra = 0.0;
        if let Some(ms) = mean_step {
            assert_eq!(ms.len(), self.n);
            // C^{-1/2} mean_step via the cached factorization
            let mut c_inv_sqrt_ms = self.eig_vectors.transpose() * ms;
            for j in 0..self.n {
                c_inv_sqrt_ms[j] /= self.eig_sqrt[j];
            }
            let c_inv_sqrt_ms = &self.eig_vectors * c_inv_sqrt_ms;

            let cs = params.c_sigma;
            self.path_sigma = &self.path_sigma * (1.0 - cs)
                + c_inv_sqrt_ms * (cs * (2.0 - cs) * params.mu_eff).sqrt();

            if cs > 0.0 {
                let exponent =
                    (cs / params.d_sigma) * (self.path_sigma.norm() / params.chi_n - 1.0);
                self.sigma_es = (self.sigma_es * exponent.exp()).clamp(1e-16, 1e16);
            }

            self.path_updates += 1;

            // stall indicator h_sigma
            let decay = 1.0 - (1.0 - cs).powi(2 * self.path_updates as i32);
            let h_sigma = decay > 0.0
                && self.path_sigma.norm() / decay.sqrt()
                    < (1.4 + 2.0 / (self.n as f64 + 1.0)) * params.chi_n;
            let h = if h_sigma { 1.0 } else { 0.0 };

            let cc = params.c_c;
            self.path_cov = &self.path_cov * (1.0 - cc)
                + ms * (h * (cc * (2.0 - cc) * params.mu_eff).sqrt());
            base_extra = params.c_1 * (1.0 - h) * cc * (2.0 - cc);
        } else {
            // paths and step length freeze; shape-only update below
            rank_one = 0.0;
        }

        let base = 1.0 - rank_one - params.c_mu + base_extra;
        let mut cov = &self.cov * base;
        if rank_one > 0.0 {
            cov.syger(rank_one, &self.path_cov, &self.path_cov, 1.0);
        }
        for (wi, s) in w.iter().zip(ranked_steps) {
            cov.syger(params.c_mu * wi, s, s, 1.0);
        }
        // syger only touches the lower triangle; mirror it
        for i in 0..self.n {
            for j in (i + 1)..self.n {
                cov[(i, j)] = cov[(j, i)];
            }
        }
        self.cov = cov;
        self.refresh_factorization()
    }

    fn refresh_factorization(&mut self) -> Result<(), EngineError> {
        match self.try_factorize() {
            Ok(()) => Ok(()),
            Err(_) => {
                // repair once: reset to identity scaled to the current trace
                log::warn!("covariance factorization failed; resetting to scaled identity");
                let scale = (self.cov.trace() / self.n as f64).abs().max(1e-16);
                self.cov = DMatrix::identity(self.n, self.n) * scale;
                self.try_factorize()
            }
        }
    }

    fn try_factorize(&mut self) -> Result<(), EngineError> {
        if self.cov.iter().any(|v| !v.is_finite()) {
            return Err(EngineError::FactorizationFailed);
        }
        let eig = self
            .cov
            .clone()
            .try_symmetric_eigen(1e-13, 0)
            .ok_or(EngineError::FactorizationFailed)?;
        let floor = (1e-14 * self.cov.trace() / self.n as f64).max(f64::MIN_POSITIVE);
        let mut repaired = false;
        let mut vals = eig.eigenvalues.clone();
        for v in vals.iter_mut() {
            if *v < floor {
                *v = floor;
                repaired = true;
            }
        }
        if repaired {
            // rebuild C = B diag(vals) B^T with the floored spectrum
            let mut rebuilt = &eig.eigenvectors * DMatrix::from_diagonal(&vals);
            rebuilt *= eig.eigenvectors.transpose();
            self.cov = (&rebuilt + rebuilt.transpose()) * 0.5;
        }
        self.eig_vectors = eig.eigenvectors;
        self.eig_sqrt = vals.map(|v| v.sqrt());
        Ok(())
    }
}

// ---------------------------------------------------------------------------
// Direction handling
// ---------------------------------------------------------------------------

/// How a direction in a [`DirectionSet`] was produced.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Provenance {
    Sampled,
    Projected,
    Generator,
}

/// The raw sampled directions and their feasibility-adjusted counterparts.
#[derive(Clone, Debug)]
pub struct DirectionSet {
    pub raw: Vec<DVector<f64>>,
    pub adjusted: Vec<DVector<f64>>,
    pub provenance: Vec<Provenance>,
}

/// Clamps the norm of `d` into `[DIRECTION_NORM_MIN, DIRECTION_NORM_MAX]`
/// preserving its direction. The zero vector cannot be safeguarded.
pub fn safeguard_direction(d: &DVector<f64>) -> Result<DVector<f64>, EngineError> {
    let norm = d.norm();
    if norm == 0.0 || !norm.is_finite() {
        return Err(EngineError::ZeroDirection);
    }
    if norm < DIRECTION_NORM_MIN {
        Ok(d * (DIRECTION_NORM_MIN / norm))
    } else if norm > DIRECTION_NORM_MAX {
        Ok(d * (DIRECTION_NORM_MAX / norm))
    } else {
        Ok(d.clone())
    }
}

/// Componentwise clamp of `x` into the box `[lower, upper]`.
pub fn project_box(x: &[f64], lower: &[f64], upper: &[f64]) -> Vec<f64> {
    debug_assert!(x.len() == lower.len() && x.len() == upper.len());
    x.iter()
        .zip(lower.iter().zip(upper))
        .map(|(&v, (&lo, &hi))| v.max(lo).min(hi))
        .collect()
}

/// The direction actually stepped after projecting `x + sigma d` onto the
/// box: `(project(x + sigma d) - x) / sigma`. A fully clipped direction
/// (point at a corner, direction pointing outward) comes back as zero; the
/// caller keeps the offspring at `x` in that case.
pub fn projected_direction(
    x: &[f64],
    sigma: f64,
    d: &DVector<f64>,
    lower: &[f64],
    upper: &[f64],
) -> DVector<f64> {
    debug_assert!(sigma > 0.0);
    let stepped: Vec<f64> = x.iter().zip(d.iter()).map(|(xi, di)| xi + sigma * di).collect();
    let projected = project_box(&stepped, lower, upper);
    DVector::from_iterator(
        x.len(),
        projected.iter().zip(x).map(|(p, xi)| (p - xi) / sigma),
    )
}

/// Positive generators of the tangent cone of the eps-active bound
/// constraints at `x`. Empty when no bound is eps-active (no augmentation
/// needed at interior points); otherwise `+e_j` is included unless the
/// upper bound of coordinate `j` is eps-active and `-e_j` unless its lower
/// bound is, so small feasible steps exist along every returned direction.
pub fn tangent_generators_box(
    x: &[f64],
    lower: &[f64],
    upper: &[f64],
    eps: f64,
) -> Vec<DVector<f64>> {
    debug_assert!(eps > 0.0);
    let n = x.len();
    let lower_active: Vec<bool> = (0..n).map(|j| x[j] - lower[j] <= eps).collect();
    let upper_active: Vec<bool> = (0..n).map(|j| upper[j] - x[j] <= eps).collect();
    if !lower_active.iter().any(|&b| b) && !upper_active.iter().any(|&b| b) {
        return Vec::new();
    }
    let mut gens = Vec::new();
    for j in 0..n {
        if !upper_active[j] {
            let mut e = DVector::zeros(n);
            e[j] = 1.0;
            gens.push(e);
        }
        if !lower_active[j] {
            let mut e = DVector::zeros(n);
            e[j] = -1.0;
            gens.push(e);
        }
    }
    gens
}

/// Weighted mean of the selected parents; lies in their convex hull.
pub fn recombine(points: &[&[f64]], weights: &RecombinationWeights) -> Vec<f64> {
    assert_eq!(points.len(), weights.len());
    let n = points[0].len();
    let mut mean = vec![0.0; n];
    for (wi, p) in weights.as_slice().iter().zip(points) {
        debug_assert_eq!(p.len(), n);
        for j in 0..n {
            mean[j] += wi * p[j];
        }
    }
    mean
}
