//! The car-following model core: a vehicle of mass M couples to its leader
//! through a spring–damper pair whose natural length X₀ grows with speed,
//! acting through a driver reaction delay τ.
//!
//! State convention: `x1` is the spacing Δx to the leader and `x2` is the
//! ego speed v. Relative speed is derived, Δv = u − v, where u is the lead
//! speed. (Only this reading makes the steady state null the equations of
//! motion; see [`steady_state`].)

use thiserror::Error;

use crate::num::Real;

#[derive(Debug, Error)]
pub enum ModelError {
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),
    #[error("degenerate spring (stiffness/mass ratio is zero): steady spacing undefined")]
    DegenerateSpring,
}

/// Whether the spring law clamps its natural length at `x0_min`/`x0_max`
/// (`Nonlinear`) or extends the linear segment X₀ = s·v over all speeds
/// (`Linear`, the normal highway regime).
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Mode {
    Linear,
    Nonlinear,
}

/// Physical parameters of one follower.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CFParams<T> {
    /// Vehicle mass M (kg).
    pub mass_kg: T,
    /// Spring stiffness k (N/m).
    pub stiffness: T,
    /// Damper coefficient c (N·s/m).
    pub damping: T,
    /// Slope s of the speed-dependent relaxation length (s).
    pub slope_s: T,
    /// Driver reaction delay τ (s).
    pub delay_tau: T,
    /// Lower speed breakpoint of the relaxation-length law (m/s).
    pub v_low: T,
    /// Upper speed breakpoint (m/s).
    pub v_high: T,
    /// Relaxation length below `v_low` (m); must equal s·v_low.
    pub x0_min: T,
    /// Relaxation length above `v_high` (m); must equal s·v_high.
    pub x0_max: T,
}

impl<T: Real> CFParams<T> {
    /// Validates invariants: positivity, breakpoint ordering, and continuity
    /// of the piecewise relaxation-length law at both breakpoints. Breakpoint
    /// mismatches are errors, not silently corrected.
    pub fn new(
        mass_kg: T,
        stiffness: T,
        damping: T,
        slope_s: T,
        delay_tau: T,
        v_low: T,
        v_high: T,
        x0_min: T,
        x0_max: T,
    ) -> Result<Self, ModelError> {
        let p = CFParams {
            mass_kg,
            stiffness,
            damping,
            slope_s,
            delay_tau,
            v_low,
            v_high,
            x0_min,
            x0_max,
        };
        p.validate()?;
        Ok(p)
    }

    pub fn validate(&self) -> Result<(), ModelError> {
        let bad = |msg: String| Err(ModelError::InvalidParameter(msg));
        if !(self.mass_kg > T::zero()) {
            return bad(format!("mass_kg must be positive, got {}", self.mass_kg));
        }
        if !(self.stiffness >= T::zero()) {
            return bad(format!("stiffness must be nonnegative, got {}", self.stiffness));
        }
        if !(self.damping >= T::zero()) {
            return bad(format!("damping must be nonnegative, got {}", self.damping));
        }
        if !(self.delay_tau >= T::zero()) {
            return bad(format!("delay_tau must be nonnegative, got {}", self.delay_tau));
        }
        if !(self.v_low <= self.v_high) {
            return bad(format!(
                "v_low ({}) must not exceed v_high ({})",
                self.v_low, self.v_high
            ));
        }
        let tol = T::lit(1e-9) * (T::one() + self.x0_max.abs());
        if (self.x0_min - self.slope_s * self.v_low).abs() > tol {
            return bad(format!(
                "x0_min ({}) breaks continuity: slope_s * v_low = {}",
                self.x0_min,
                self.slope_s * self.v_low
            ));
        }
        if (self.x0_max - self.slope_s * self.v_high).abs() > tol {
            return bad(format!(
                "x0_max ({}) breaks continuity: slope_s * v_high = {}",
                self.x0_max,
                self.slope_s * self.v_high
            ));
        }
        Ok(())
    }

    /// Mass-normalized ratios driving the delay differential equation.
    pub fn reduce(&self) -> ReducedParams<T> {
        ReducedParams {
            alpha: self.stiffness / self.mass_kg,
            beta: self.damping / self.mass_kg,
            slope_s: self.slope_s,
        }
    }

    /// The parameter vector the identifier estimates from sampled data:
    /// acceleration = α_id·Δx + β_id·v + γ_id·Δv with everything delayed by
    /// `d` sampling steps (β_id = −k·s/M absorbs the relaxation length).
    pub fn ident_triple(&self, d: usize) -> IdentTriple<T> {
        IdentTriple {
            alpha_id: self.stiffness / self.mass_kg,
            beta_id: -(self.stiffness * self.slope_s) / self.mass_kg,
            gamma_id: self.damping / self.mass_kg,
            delay_steps: d,
        }
    }
}

/// Mass-normalized model: α = k/M, β = c/M, plus the spring-law slope.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ReducedParams<T> {
    pub alpha: T,
    pub beta: T,
    pub slope_s: T,
}

impl<T: Real> ReducedParams<T> {
    pub fn new(alpha: T, beta: T, slope_s: T) -> Result<Self, ModelError> {
        if !(alpha >= T::zero()) || !(beta >= T::zero()) {
            return Err(ModelError::InvalidParameter(format!(
                "alpha and beta must be nonnegative, got ({alpha}, {beta})"
            )));
        }
        Ok(ReducedParams { alpha, beta, slope_s })
    }
}

/// Identified parameter triple (per delay hypothesis `d`).
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct IdentTriple<T> {
    /// k/M (1/s²).
    pub alpha_id: T,
    /// −k·s/M (1/s).
    pub beta_id: T,
    /// c/M (1/s).
    pub gamma_id: T,
    /// Delay in sampling steps.
    pub delay_steps: usize,
}

impl<T: Real> IdentTriple<T> {
    pub fn as_array(&self) -> [T; 3] {
        [self.alpha_id, self.beta_id, self.gamma_id]
    }

    /// Recovers the spring-law slope s = −β_id/α_id.
    pub fn slope(&self) -> T {
        -self.beta_id / self.alpha_id
    }
}

/// State of the reduced model: spacing and ego speed.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CFState<T> {
    /// Spacing Δx to the leader (m).
    pub x1: T,
    /// Ego speed v (m/s).
    pub x2: T,
}

/// Speed-dependent relaxation length: X₀(v) = s·v on the linear segment,
/// clamped to `x0_min` below `v_low` and `x0_max` above `v_high`.
/// Continuous and nondecreasing in v by the parameter invariants.
pub fn relaxation_length<T: Real>(v: T, p: &CFParams<T>) -> T {
    if v < p.v_low {
        p.x0_min
    } else if v > p.v_high {
        p.x0_max
    } else {
        p.slope_s * v
    }
}

/// Follower acceleration from the (delayed) spacing, own speed, and relative
/// speed: (k/M)·(Δx − X₀(v)) + (c/M)·Δv. `Linear` mode uses X₀ = s·v
/// without clamping.
pub fn acceleration<T: Real>(dx: T, v: T, dv: T, p: &CFParams<T>, mode: Mode) -> T {
    let x0 = match mode {
        Mode::Linear => p.slope_s * v,
        Mode::Nonlinear => relaxation_length(v, p),
    };
    (p.stiffness / p.mass_kg) * (dx - x0) + (p.damping / p.mass_kg) * dv
}

/// Steady state under a constant lead speed u: the unique state with zero
/// time derivatives, (Δx, v) = (s·u, u).
///
/// Derivation: v̇ = α(Δx − s·v) + β(u − v) and Δẋ = u − v vanish iff v = u
/// and Δx = s·v. (A published variant multiplying in an extra (−1+αs+β)/αs
/// factor fails the residual check whenever β ≠ 1; see the unit tests, which
/// evaluate the residual of both expressions.)
pub fn steady_state<T: Real>(u: T, r: &ReducedParams<T>) -> Result<CFState<T>, ModelError> {
    if r.alpha <= T::zero() {
        return Err(ModelError::DegenerateSpring);
    }
    Ok(CFState { x1: r.slope_s * u, x2: u })
}

/// Right-hand side of the reduced delay system evaluated with current state
/// = delayed state = `state` and lead speed `u`; zero exactly at the steady
/// state. Exposed so tests and callers can verify equilibria directly.
pub fn steady_residual<T: Real>(state: &CFState<T>, u: T, r: &ReducedParams<T>) -> [T; 2] {
    [
        u - state.x2,
        r.alpha * (state.x1 - r.slope_s * state.x2) + r.beta * (u - state.x2),
    ]
}
