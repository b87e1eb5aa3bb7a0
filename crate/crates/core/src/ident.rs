//! Online parameter identification from sampled trajectories.
//!
//! The sampled model is linear in the parameters once the delay is fixed:
//! a(k) = α·Δx(k−d) + β·v(k−d) + γ·Δv(k−d). Since the true lag d is not
//! known, a [`DelayBank`] runs one recursive estimator per delay hypothesis
//! in parallel over the same sample stream and tracks an exponentially
//! smoothed prediction-error cost per hypothesis; the hypothesis with the
//! smallest cost wins ([`select_delay`]).
//!
//! Each estimator is an inverse-QR recursive least-squares filter
//! ([`IQREstimator`]): it propagates the inverse Cholesky factor of the
//! information matrix through Givens rotations, so no matrix inversion ever
//! happens and the factor stays triangular by construction.

use thiserror::Error;

use crate::dde::Trajectory;
use crate::linalg::{lstsq, LinalgError, Mat};
use crate::num::Real;

/// Steady-state samples an estimator must absorb before its cost is trusted
/// for delay selection.
pub const DEFAULT_WARMUP: usize = 20;

#[derive(Debug, Error)]
pub enum IdentError {
    #[error("invalid identifier configuration: {0}")]
    InvalidConfig(String),
    #[error("no delay hypothesis has seen {needed} samples yet")]
    NotReady { needed: usize },
    #[error("need at least {need} usable samples, got {got}")]
    InsufficientData { got: usize, need: usize },
    #[error(transparent)]
    Linalg(#[from] LinalgError),
}

/// One regression sample: scaled delayed state `x`, sampled acceleration
/// `y`, and the step index `k` it was taken at.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RegressorSample<T> {
    pub x: [T; 3],
    pub y: T,
    pub k: usize,
}

/// Inner product of a parameter vector with a regressor: the one-step
/// prediction of the sampled acceleration.
pub fn predict<T: Real>(p: &[T; 3], x: &[T; 3]) -> T {
    p[0] * x[0] + p[1] * x[1] + p[2] * x[2]
}

/// Exponentially smoothed absolute prediction error:
/// J ← (1 − η)·J + η·|e|.
pub fn accumulate_error<T: Real>(j: T, e: T, eta: T) -> T {
    (T::one() - eta) * j + eta * e.abs()
}

/// What one [`IQREstimator::update`] did.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct UpdateOutcome<T> {
    /// Prediction error before the update, y − pᵀx.
    pub prior_error: T,
    /// False when the sample was rejected (non-finite data).
    pub applied: bool,
}

/// Recursive least squares in inverse-QR form.
///
/// The filter stores the lower-triangular factor U = R⁻ᵀ of the inverse
/// information matrix (P = U Uᵀ) and rotates it directly with each sample,
/// using a forgetting factor λ. Initialization U = δ·I encodes the prior
/// covariance δ²·I. Per sample the cost is O(p²) with p = 3 parameters and
/// the factor stays triangular, which keeps long runs (10⁵+ updates)
/// well-conditioned where a covariance-form filter can lose symmetry.
#[derive(Debug, Clone, PartialEq)]
pub struct IQREstimator<T> {
    p: [T; 3],
    /// Lower-triangular inverse square-root factor U = R⁻ᵀ.
    u_factor: [[T; 3]; 3],
    lambda: T,
    samples_seen: usize,
}

impl<T: Real> IQREstimator<T> {
    /// `lambda` is the forgetting factor in (0, 1]; `delta` scales the
    /// initial factor (prior covariance δ²·I), so large δ means a weak
    /// prior that the first few samples overwrite almost completely.
    pub fn new(lambda: T, delta: T) -> Result<Self, IdentError> {
        if !(lambda > T::zero() && lambda <= T::one()) {
            return Err(IdentError::InvalidConfig(format!(
                "forgetting factor must be in (0, 1], got {lambda}"
            )));
        }
        if !(delta > T::zero()) {
            return Err(IdentError::InvalidConfig(format!(
                "initial factor scale must be positive, got {delta}"
            )));
        }
        let mut u_factor = [[T::zero(); 3]; 3];
        for (i, row) in u_factor.iter_mut().enumerate() {
            row[i] = delta;
        }
        Ok(IQREstimator { p: [T::zero(); 3], u_factor, lambda, samples_seen: 0 })
    }

    /// Rebuilds an estimator from checkpointed state.
    pub fn from_parts(
        p: [T; 3],
        u_factor: [[T; 3]; 3],
        lambda: T,
        samples_seen: usize,
    ) -> Result<Self, IdentError> {
        if !(lambda > T::zero() && lambda <= T::one()) {
            return Err(IdentError::InvalidConfig(format!(
                "forgetting factor must be in (0, 1], got {lambda}"
            )));
        }
        Ok(IQREstimator { p, u_factor, lambda, samples_seen })
    }

    /// Current parameter estimate (in the scaled regressor domain).
    pub fn params(&self) -> [T; 3] {
        self.p
    }

    /// Lower-triangular inverse square-root factor (for checkpoints).
    pub fn factor(&self) -> [[T; 3]; 3] {
        self.u_factor
    }

    pub fn lambda(&self) -> T {
        self.lambda
    }

    pub fn samples_seen(&self) -> usize {
        self.samples_seen
    }

    /// Physical-domain estimate: the scaled-domain estimate multiplied
    /// component-wise by the regressor scaling factors.
    pub fn physical_params(&self, scaling: &[T; 3]) -> [T; 3] {
        [self.p[0] * scaling[0], self.p[1] * scaling[1], self.p[2] * scaling[2]]
    }

    /// Absorbs one sample.
    ///
    /// One sweep of Givens rotations annihilates the rotated regressor
    /// a = λ^{−1/2}·Uᵀx against the scalar pivot b (starting at 1),
    /// simultaneously updating the factor and building the gain row u so
    /// that the estimate correction is p += (e/b)·u.
    pub fn update(&mut self, x: &[T; 3], y: T) -> UpdateOutcome<T> {
        let e = y - predict(&self.p, x);
        if !x.iter().all(|v| v.is_finite()) || !y.is_finite() {
            return UpdateOutcome { prior_error: e, applied: false };
        }
        let inv_sqrt_lambda = T::one() / self.lambda.sqrt();
        let mut b = T::one();
        let mut gain = [T::zero(); 3];
        let mut factor = self.u_factor;
        for i in 0..3 {
            // Rotated regressor component from row i of the factor.
            let mut a = T::zero();
            for j in 0..=i {
                a = a + factor[i][j] * x[j];
            }
            a = a * inv_sqrt_lambda;
            let b_new = (b * b + a * a).sqrt();
            if !b_new.is_finite() || b_new == T::zero() {
                return UpdateOutcome { prior_error: e, applied: false };
            }
            let s = a / b_new;
            let c = b / b_new;
            for j in 0..=i {
                let r_old = factor[i][j];
                let g_old = gain[j];
                factor[i][j] = inv_sqrt_lambda * c * r_old - s * g_old;
                gain[j] = c * g_old + inv_sqrt_lambda * s * r_old;
            }
            b = b_new;
        }
        let z = e / b;
        let p_new = [self.p[0] + z * gain[0], self.p[1] + z * gain[1], self.p[2] + z * gain[2]];
        if !p_new.iter().all(|v| v.is_finite()) {
            return UpdateOutcome { prior_error: e, applied: false };
        }
        self.u_factor = factor;
        self.p = p_new;
        self.samples_seen += 1;
        UpdateOutcome { prior_error: e, applied: true }
    }
}

/// Ordinary least squares over a whole sample batch, the offline reference
/// the recursive filter must agree with when λ = 1 and the prior is weak.
pub fn batch_ls<T: Real>(samples: &[RegressorSample<T>]) -> Result<[T; 3], IdentError> {
    if samples.len() < 3 {
        return Err(IdentError::InsufficientData { got: samples.len(), need: 3 });
    }
    let mut a = Mat::zeros(samples.len(), 3);
    let mut b = vec![T::zero(); samples.len()];
    for (i, s) in samples.iter().enumerate() {
        for j in 0..3 {
            a[(i, j)] = s.x[j];
        }
        b[i] = s.y;
    }
    let sol = lstsq(&a, &b)?;
    Ok([sol[0], sol[1], sol[2]])
}

/// A parallel bank of [`IQREstimator`]s, one per delay hypothesis
/// d ∈ [d_min, d_max], sharing a sample stream.
///
/// Per step, each hypothesis regresses the current sampled acceleration on
/// its own delayed state; the bank smooths each hypothesis' absolute
/// prediction error into a cost J_d, and [`DelayBank::select_delay`] picks
/// the smallest-cost hypothesis once warmed up. Prediction errors feed the
/// cost *before* the estimator absorbs the sample, so a hypothesis is
/// scored on data it has not yet fitted.
#[derive(Debug, Clone)]
pub struct DelayBank<T> {
    d_min: usize,
    d_max: usize,
    estimators: Vec<IQREstimator<T>>,
    cost: Vec<T>,
    eta_learn: T,
    warmup: usize,
    scaling: [T; 3],
}

impl<T: Real> DelayBank<T> {
    /// `scaling` holds the multiplicative factors applied to the raw
    /// (Δx, v, Δv) columns before regression; `[1, 1, 1]` regresses raw.
    pub fn new(
        d_min: usize,
        d_max: usize,
        lambda: T,
        delta: T,
        eta_learn: T,
        scaling: [T; 3],
    ) -> Result<Self, IdentError> {
        if d_min > d_max {
            return Err(IdentError::InvalidConfig(format!(
                "delay range is empty: d_min = {d_min} > d_max = {d_max}"
            )));
        }
        if !(eta_learn > T::zero() && eta_learn <= T::one()) {
            return Err(IdentError::InvalidConfig(format!(
                "cost smoothing rate must be in (0, 1], got {eta_learn}"
            )));
        }
        if !scaling.iter().all(|f| f.is_finite() && *f > T::zero()) {
            return Err(IdentError::InvalidConfig(format!(
                "scaling factors must be positive and finite, got {scaling:?}"
            )));
        }
        let n = d_max - d_min + 1;
        let mut estimators = Vec::with_capacity(n);
        for _ in 0..n {
            estimators.push(IQREstimator::new(lambda, delta)?);
        }
        Ok(DelayBank {
            d_min,
            d_max,
            estimators,
            cost: vec![T::zero(); n],
            eta_learn,
            warmup: DEFAULT_WARMUP,
            scaling,
        })
    }

    pub fn with_warmup(mut self, warmup: usize) -> Self {
        self.warmup = warmup;
        self
    }

    pub fn delay_range(&self) -> (usize, usize) {
        (self.d_min, self.d_max)
    }

    pub fn warmup(&self) -> usize {
        self.warmup
    }

    pub fn scaling(&self) -> [T; 3] {
        self.scaling
    }

    pub fn estimator(&self, d: usize) -> Option<&IQREstimator<T>> {
        d.checked_sub(self.d_min).and_then(|i| self.estimators.get(i))
    }

    /// Smoothed prediction-error cost of hypothesis `d`.
    pub fn cost(&self, d: usize) -> Option<T> {
        d.checked_sub(self.d_min).and_then(|i| self.cost.get(i)).copied()
    }

    /// Scaled regressor for hypothesis `d` at step `k`, if the delayed
    /// sample exists.
    fn regressor(&self, traj: &Trajectory<T>, k: usize, d: usize) -> Option<[T; 3]> {
        let j = k.checked_sub(d)?;
        Some([
            traj.dx[j] * self.scaling[0],
            traj.v_ego[j] * self.scaling[1],
            traj.dv[j] * self.scaling[2],
        ])
    }

    /// Feeds sample `k` of a trajectory to every hypothesis whose delayed
    /// state exists (k ≥ d and k ≥ 1; the k = 0 acceleration is a filler,
    /// not a measurement). Returns how many estimators absorbed the sample.
    pub fn bank_step(&mut self, traj: &Trajectory<T>, k: usize) -> usize {
        if k == 0 || k >= traj.len() {
            return 0;
        }
        let y = traj.a_ego[k];
        let mut updated = 0;
        for d in self.d_min..=self.d_max {
            let Some(x) = self.regressor(traj, k, d) else { continue };
            let i = d - self.d_min;
            let outcome = self.estimators[i].update(&x, y);
            if outcome.applied {
                // prior_error is the pre-update error, so the cost scores
                // the hypothesis on data it had not yet fitted. Rejected
                // (non-finite) samples touch neither estimate nor cost.
                self.cost[i] = accumulate_error(self.cost[i], outcome.prior_error, self.eta_learn);
                updated += 1;
            }
        }
        updated
    }

    /// The warmed-up hypothesis with the smallest cost (ties break toward
    /// the smallest delay).
    pub fn select_delay(&self) -> Result<usize, IdentError> {
        let mut best: Option<(usize, T)> = None;
        for (i, est) in self.estimators.iter().enumerate() {
            if est.samples_seen() < self.warmup {
                continue;
            }
            let j = self.cost[i];
            match best {
                Some((_, jb)) if j >= jb => {}
                _ => best = Some((self.d_min + i, j)),
            }
        }
        best.map(|(d, _)| d).ok_or(IdentError::NotReady { needed: self.warmup })
    }

    /// Physical-domain estimate of hypothesis `d` (scaling factors undone).
    pub fn physical_params(&self, d: usize) -> Option<[T; 3]> {
        self.estimator(d).map(|e| e.physical_params(&self.scaling))
    }
}

/// Standalone form of [`DelayBank::select_delay`] for callers holding the
/// bank behind a shared reference.
pub fn select_delay<T: Real>(bank: &DelayBank<T>) -> Result<usize, IdentError> {
    bank.select_delay()
}
