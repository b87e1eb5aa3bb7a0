//! Forward simulation of the delayed equations of motion.
//!
//! Two integrators with distinct jobs:
//!
//! * [`simulate_dde`] — fixed-step RK4 by the method of steps, for
//!   continuous-time validation and stability studies. The step divides the
//!   delay exactly, so delayed lookups land on stored grid points (stage
//!   midpoints use cubic Hermite interpolation between them).
//! * [`simulate_euler`] — the explicit Euler discretization with sampling
//!   time `dt` and integer delay d = round(τ/dt), the scheme the online
//!   identifier assumes when it regresses sampled accelerations on delayed
//!   states.

use thiserror::Error;

use crate::model::{acceleration, steady_state, CFParams, CFState, Mode, ModelError};
use crate::num::Real;

/// State magnitude beyond which an unstable run is truncated.
const DIVERGENCE_LIMIT: f64 = 1e9;

#[derive(Debug, Error)]
pub enum DdeError {
    #[error("invalid simulation input: {0}")]
    InvalidInput(String),
    #[error(transparent)]
    Model(#[from] ModelError),
}

/// Lead-vehicle speed u(t). Profiles are total functions of time; negative
/// times (reached through delayed arguments during start-up) evaluate the
/// same formula, and piecewise-linear profiles clamp to their end samples.
#[derive(Debug, Clone, PartialEq)]
pub enum LeadProfile<T> {
    Constant(T),
    /// limit − gap·exp(−rate·t): pulls away toward `limit`.
    ExponentialApproach { limit: T, gap: T, rate: T },
    /// base + Σ amp·sin(ω·t + φ) over `components` = (amp, ω, φ): a
    /// persistently exciting profile for identification studies.
    MultiSine { base: T, components: Vec<(T, T, T)> },
    /// Linear interpolation through (t, u) samples sorted by t.
    PiecewiseLinear(Vec<(T, T)>),
}

impl<T: Real> LeadProfile<T> {
    pub fn speed(&self, t: T) -> T {
        match self {
            LeadProfile::Constant(u) => *u,
            LeadProfile::ExponentialApproach { limit, gap, rate } => {
                *limit - *gap * (-*rate * t).exp()
            }
            LeadProfile::MultiSine { base, components } => components
                .iter()
                .fold(*base, |u, &(amp, omega, phase)| u + amp * (omega * t + phase).sin()),
            LeadProfile::PiecewiseLinear(samples) => {
                debug_assert!(!samples.is_empty(), "empty piecewise profile");
                let first = samples[0];
                let last = samples[samples.len() - 1];
                if t <= first.0 {
                    return first.1;
                }
                if t >= last.0 {
                    return last.1;
                }
                let i = samples.partition_point(|&(ts, _)| ts <= t);
                let (t0, u0) = samples[i - 1];
                let (t1, u1) = samples[i];
                u0 + (u1 - u0) * (t - t0) / (t1 - t0)
            }
        }
    }
}

/// State history on [−τ, 0].
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum History<T> {
    /// x(t) ≡ the given state for all t ≤ 0.
    Constant(CFState<T>),
    /// The steady state under the lead speed at t = 0, scaled by 1 + ε in
    /// both components.
    PerturbedSteadyState { epsilon: T },
}

impl<T: Real> History<T> {
    fn resolve(&self, p: &CFParams<T>, lead: &LeadProfile<T>) -> Result<CFState<T>, DdeError> {
        match self {
            History::Constant(s) => Ok(*s),
            History::PerturbedSteadyState { epsilon } => {
                let st = steady_state(lead.speed(T::zero()), &p.reduce())?;
                let scale = T::one() + *epsilon;
                Ok(CFState { x1: st.x1 * scale, x2: st.x2 * scale })
            }
        }
    }
}

/// Uniformly sampled run: spacing, ego speed, relative speed, ego
/// acceleration, and the lead speed, one row per `dt`.
///
/// For simulated trajectories dv(k) = u_lead(k) − v_ego(k) holds exactly.
/// The acceleration column is the instantaneous derivative at the sample
/// for the RK4 path and the backward difference (v(k) − v(k−1))/dt (zero at
/// k = 0) for the Euler path.
#[derive(Debug, Clone, PartialEq)]
pub struct Trajectory<T> {
    pub dt: T,
    pub t0: T,
    pub dx: Vec<T>,
    pub v_ego: Vec<T>,
    pub dv: Vec<T>,
    pub a_ego: Vec<T>,
    pub u_lead: Vec<T>,
    /// Time at which the state blew past the divergence limit; rows stop at
    /// the last finite state before it.
    pub diverged_at: Option<T>,
}

impl<T: Real> Trajectory<T> {
    pub fn len(&self) -> usize {
        self.dx.len()
    }

    pub fn is_empty(&self) -> bool {
        self.dx.is_empty()
    }

    pub fn time(&self, k: usize) -> T {
        self.t0 + self.dt * T::of_usize(k)
    }

    fn with_capacity(dt: T, n: usize) -> Self {
        Trajectory {
            dt,
            t0: T::zero(),
            dx: Vec::with_capacity(n),
            v_ego: Vec::with_capacity(n),
            dv: Vec::with_capacity(n),
            a_ego: Vec::with_capacity(n),
            u_lead: Vec::with_capacity(n),
            diverged_at: None,
        }
    }

    fn push(&mut self, dx: T, v: T, dv: T, a: T, u: T) {
        self.dx.push(dx);
        self.v_ego.push(v);
        self.dv.push(dv);
        self.a_ego.push(a);
        self.u_lead.push(u);
    }
}

fn state_ok<T: Real>(x: &[T; 2]) -> bool {
    let lim = T::lit(DIVERGENCE_LIMIT);
    x.iter().all(|v| v.is_finite() && v.abs() <= lim)
}

/// Method-of-steps RK4 integration of the delayed equations of motion.
///
/// The internal step is h = τ/m with m = round(τ/h_requested) (min 1), so
/// delayed arguments at step boundaries are stored grid values and stage
/// midpoints interpolate between adjacent grid values with cubic Hermite
/// (states and stored derivatives). τ = 0 degrades to a plain ODE RK4 run.
/// The output is sampled at dt = h.
///
/// Unstable runs end early: once any state component leaves ±1e9 the
/// trajectory is truncated and `diverged_at` records the time.
pub fn simulate_dde<T: Real>(
    p: &CFParams<T>,
    lead: &LeadProfile<T>,
    hist: &History<T>,
    horizon: T,
    h_requested: T,
    mode: Mode,
) -> Result<Trajectory<T>, DdeError> {
    if !(horizon > T::zero()) {
        return Err(DdeError::InvalidInput(format!("horizon must be positive, got {horizon}")));
    }
    if !(h_requested > T::zero()) {
        return Err(DdeError::InvalidInput(format!("step must be positive, got {h_requested}")));
    }
    p.validate()?;
    let tau = p.delay_tau;
    let half = T::lit(0.5);

    // Delay-aligned step: m grid intervals per delay period.
    let (m, h) = if tau > T::zero() {
        let m = (tau / h_requested).round().as_f64().max(1.0) as usize;
        (m, tau / T::of_usize(m))
    } else {
        (0, h_requested)
    };
    let n_steps = ((horizon / h).round().as_f64().max(1.0)) as usize;

    let x0 = hist.resolve(p, lead)?;
    let hist_state = [x0.x1, x0.x2];

    let rhs = |t: T, x: &[T; 2], xd: &[T; 2]| -> [T; 2] {
        let u = lead.speed(t);
        let ud = lead.speed(t - tau);
        [u - x[1], acceleration(xd[0], xd[1], ud - xd[1], p, mode)]
    };

    let mut xs: Vec<[T; 2]> = Vec::with_capacity(n_steps + 1);
    let mut fs: Vec<[T; 2]> = Vec::with_capacity(n_steps + 1);
    xs.push(hist_state);
    fs.push([T::zero(); 2]); // replaced by k1 at the first step

    // Delayed state at t_i + θh − τ for θ ∈ {0, ½}; grid-aligned when θ = 0.
    let delayed = |xs: &Vec<[T; 2]>, fs: &Vec<[T; 2]>, i: usize, theta: T| -> [T; 2] {
        let j = i as isize - m as isize;
        if (j as f64) + theta.as_f64() < 0.0 {
            return hist_state;
        }
        let j = j as usize;
        if theta == T::zero() {
            return xs[j];
        }
        // Cubic Hermite on [t_j, t_{j+1}] from stored states and slopes.
        let t2 = theta * theta;
        let t3 = t2 * theta;
        let h00 = T::lit(2.0) * t3 - T::lit(3.0) * t2 + T::one();
        let h10 = t3 - T::lit(2.0) * t2 + theta;
        let h01 = -T::lit(2.0) * t3 + T::lit(3.0) * t2;
        let h11 = t3 - t2;
        let (x0, f0, x1, f1) = (xs[j], fs[j], xs[j + 1], fs[j + 1]);
        [
            h00 * x0[0] + h10 * h * f0[0] + h01 * x1[0] + h11 * h * f1[0],
            h00 * x0[1] + h10 * h * f0[1] + h01 * x1[1] + h11 * h * f1[1],
        ]
    };

    let mut diverged_at = None;
    for i in 0..n_steps {
        let t = h * T::of_usize(i);
        let xi = xs[i];

        // With no delay (m = 0) every "delayed" argument is the stage state
        // itself and the scheme is classical RK4.
        let xd_node = (m > 0).then(|| delayed(&xs, &fs, i, T::zero()));
        let k1 = rhs(t, &xi, xd_node.as_ref().unwrap_or(&xi));
        // The midpoint lookup may interpolate up to index i (when m = 1), so
        // fs[i] must hold k1 first.
        fs[i] = k1;
        let xd_mid = (m > 0).then(|| delayed(&xs, &fs, i, half));
        let xd_end = (m > 0).then(|| if i + 1 >= m { xs[i + 1 - m] } else { hist_state });

        let x_mid1 = [xi[0] + half * h * k1[0], xi[1] + half * h * k1[1]];
        let k2 = rhs(t + half * h, &x_mid1, xd_mid.as_ref().unwrap_or(&x_mid1));
        let x_mid2 = [xi[0] + half * h * k2[0], xi[1] + half * h * k2[1]];
        let k3 = rhs(t + half * h, &x_mid2, xd_mid.as_ref().unwrap_or(&x_mid2));
        let x_end = [xi[0] + h * k3[0], xi[1] + h * k3[1]];
        let k4 = rhs(t + h, &x_end, xd_end.as_ref().unwrap_or(&x_end));

        let sixth = T::lit(1.0 / 6.0);
        let two = T::lit(2.0);
        let next = [
            xi[0] + h * sixth * (k1[0] + two * k2[0] + two * k3[0] + k4[0]),
            xi[1] + h * sixth * (k1[1] + two * k2[1] + two * k3[1] + k4[1]),
        ];
        if !state_ok(&next) {
            diverged_at = Some(t + h);
            break;
        }
        xs.push(next);
        fs.push([T::zero(); 2]);
    }

    // Final-node derivative: on a truncated run fs[last] already holds k1
    // of the failed step; on a complete run the last node needs one more
    // right-hand-side evaluation.
    let last = xs.len() - 1;
    if diverged_at.is_none() {
        let t_last = h * T::of_usize(last);
        let xd = if m == 0 { xs[last] } else { delayed(&xs, &fs, last, T::zero()) };
        fs[last] = rhs(t_last, &xs[last], &xd);
    }

    let mut traj = Trajectory::with_capacity(h, xs.len());
    traj.diverged_at = diverged_at;
    for (k, (x, f)) in xs.iter().zip(&fs).enumerate() {
        let t = h * T::of_usize(k);
        let u = lead.speed(t);
        traj.push(x[0], x[1], u - x[1], f[1], u);
    }
    Ok(traj)
}

/// Explicit Euler discretization with sampling time `dt` and integer delay
/// d = round(τ/dt):
///
/// * v(k) = v(k−1) + dt·accel(Δx(k−d), v(k−d), Δv(k−d))
/// * Δx(k) = Δx(k−1) + dt·Δv(k−1)
/// * a(k)  = (v(k) − v(k−1))/dt  (0 at k = 0)
///
/// so the sampled acceleration at step k regresses exactly on the state d
/// steps earlier — the relation the identifier bank searches for. When
/// d = 0 the only explicit choice is the previous sample, so the effective
/// minimum delay of the sampled scheme is one step.
///
/// Pre-history (indices k − d < 0) holds the initial state constant while
/// the lead profile is evaluated at the actual negative times, matching a
/// constant-history DDE run of the same model.
pub fn simulate_euler<T: Real>(
    p: &CFParams<T>,
    lead: &LeadProfile<T>,
    x0: CFState<T>,
    horizon: T,
    dt: T,
    mode: Mode,
) -> Result<Trajectory<T>, DdeError> {
    simulate_euler_with_history(p, lead, x0, horizon, dt, mode, &History::Constant(x0))
}

/// [`simulate_euler`] with an explicit pre-history for the start-up steps.
pub fn simulate_euler_with_history<T: Real>(
    p: &CFParams<T>,
    lead: &LeadProfile<T>,
    x0: CFState<T>,
    horizon: T,
    dt: T,
    mode: Mode,
    pre: &History<T>,
) -> Result<Trajectory<T>, DdeError> {
    if !(horizon > T::zero()) {
        return Err(DdeError::InvalidInput(format!("horizon must be positive, got {horizon}")));
    }
    if !(dt > T::zero()) {
        return Err(DdeError::InvalidInput(format!("dt must be positive, got {dt}")));
    }
    p.validate()?;
    let d = (p.delay_tau / dt).round().as_f64().max(0.0) as usize;
    let lag = d.max(1);
    let n_steps = ((horizon / dt).round().as_f64().max(1.0)) as usize;
    let pre_state = pre.resolve(p, lead)?;

    let mut traj = Trajectory::with_capacity(dt, n_steps + 1);
    let u0 = lead.speed(T::zero());
    traj.push(x0.x1, x0.x2, u0 - x0.x2, T::zero(), u0);

    for k in 1..=n_steps {
        let t = dt * T::of_usize(k);
        let j = k as isize - lag as isize;
        let (dxd, vd, dvd) = if j >= 0 {
            let j = j as usize;
            (traj.dx[j], traj.v_ego[j], traj.dv[j])
        } else {
            let tj = dt * T::lit(j as f64);
            (pre_state.x1, pre_state.x2, lead.speed(tj) - pre_state.x2)
        };
        let acc = acceleration(dxd, vd, dvd, p, mode);
        let prev_v = traj.v_ego[k - 1];
        let prev_dx = traj.dx[k - 1];
        let prev_dv = traj.dv[k - 1];
        let v = prev_v + dt * acc;
        let dx = prev_dx + dt * prev_dv;
        let next = [dx, v];
        if !state_ok(&next) {
            traj.diverged_at = Some(t);
            break;
        }
        let u = lead.speed(t);
        traj.push(dx, v, u - v, (v - prev_v) / dt, u);
    }
    Ok(traj)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::ReducedParams;

    /// Linear-regime parameters with unit mass so (α, β) read directly.
    fn reduced_params(alpha: f64, beta: f64, s: f64, tau: f64) -> CFParams<f64> {
        CFParams::new(1.0, alpha, beta, s, tau, 0.0, 1e6, 0.0, s * 1e6).unwrap()
    }

    #[test]
    fn lead_profiles_evaluate_and_clamp() {
        let c = LeadProfile::Constant(20.0);
        assert_eq!(c.speed(-3.0), 20.0);
        let e = LeadProfile::ExponentialApproach { limit: 15.0, gap: 5.0, rate: 0.05 };
        assert_eq!(e.speed(0.0), 10.0);
        assert!((e.speed(50.0) - (15.0 - 5.0 * (-2.5f64).exp())).abs() < 1e-12);
        let p = LeadProfile::PiecewiseLinear(vec![(0.0, 1.0), (2.0, 3.0), (4.0, 3.0)]);
        assert_eq!(p.speed(-1.0), 1.0);
        assert_eq!(p.speed(1.0), 2.0);
        assert_eq!(p.speed(9.0), 3.0);
        let m = LeadProfile::MultiSine {
            base: 15.0,
            components: vec![(2.0, 0.5, 0.0), (1.0, 1.3, 0.7)],
        };
        let expect = 15.0 + 2.0 * (0.5f64 * 3.0).sin() + 1.0 * (1.3f64 * 3.0 + 0.7).sin();
        assert!((m.speed(3.0) - expect).abs() < 1e-12);
        assert_eq!(m.speed(0.0), 15.0 + (0.7f64).sin());
    }

    #[test]
    fn equilibrium_history_stays_at_equilibrium() {
        let p = reduced_params(1.0, 2.0, 5.0, 0.2);
        let st = crate::model::steady_state(20.0, &ReducedParams::new(1.0, 2.0, 5.0).unwrap())
            .unwrap();
        let traj = simulate_dde(
            &p,
            &LeadProfile::Constant(20.0),
            &History::Constant(st),
            10.0,
            0.01,
            Mode::Linear,
        )
        .unwrap();
        assert!(traj.diverged_at.is_none());
        for k in 0..traj.len() {
            assert!((traj.dx[k] - 100.0).abs() < 1e-9, "k={k}");
            assert!((traj.v_ego[k] - 20.0).abs() < 1e-9, "k={k}");
        }
    }

    #[test]
    fn perturbed_stable_point_contracts() {
        let p = reduced_params(1.0, 2.0, 5.0, 0.2);
        let traj = simulate_dde(
            &p,
            &LeadProfile::Constant(20.0),
            &History::PerturbedSteadyState { epsilon: 0.10 },
            50.0,
            0.01,
            Mode::Linear,
        )
        .unwrap();
        assert!(traj.diverged_at.is_none());
        let last = traj.len() - 1;
        let dev0 = (traj.dx[0] - 100.0).abs().max((traj.v_ego[0] - 20.0).abs() * 5.0);
        let devf = (traj.dx[last] - 100.0).abs().max((traj.v_ego[last] - 20.0).abs() * 5.0);
        assert!(devf < dev0 * 1e-2, "dev0={dev0} devf={devf}");
    }

    #[test]
    fn perturbed_unstable_point_truncates_with_status() {
        let p = reduced_params(1.6, 2.0, 5.0, 0.2);
        let traj = simulate_dde(
            &p,
            &LeadProfile::Constant(20.0),
            &History::PerturbedSteadyState { epsilon: 0.10 },
            50.0,
            0.01,
            Mode::Linear,
        )
        .unwrap();
        let t_div = traj.diverged_at.expect("unstable run must report divergence");
        assert!(t_div < 50.0);
        // Partial trajectory, all rows finite.
        assert!(traj.len() >= 1);
        assert!(traj.dx.iter().all(|v| v.is_finite()));
        assert!((traj.time(traj.len() - 1) - t_div).abs() <= traj.dt + 1e-12);
    }

    #[test]
    fn dv_column_is_lead_minus_ego_exactly() {
        let p = reduced_params(0.1, 0.5, 5.0, 0.5);
        let lead = LeadProfile::ExponentialApproach { limit: 15.0, gap: 5.0, rate: 0.05 };
        let traj = simulate_dde(
            &p,
            &lead,
            &History::Constant(CFState { x1: 20.0, x2: 5.0 }),
            10.0,
            0.05,
            Mode::Linear,
        )
        .unwrap();
        for k in 0..traj.len() {
            assert_eq!(traj.dv[k], traj.u_lead[k] - traj.v_ego[k]);
        }
    }

    #[test]
    fn euler_kinematic_consistency_is_exact() {
        let p = reduced_params(0.1, 0.5, 5.0, 0.5);
        let lead = LeadProfile::ExponentialApproach { limit: 15.0, gap: 5.0, rate: 0.05 };
        let traj =
            simulate_euler(&p, &lead, CFState { x1: 20.0, x2: 5.0 }, 50.0, 0.1, Mode::Linear)
                .unwrap();
        assert_eq!(traj.len(), 501);
        for k in 1..traj.len() {
            // Same expressions the integrator evaluates, so bit-equal.
            assert_eq!(traj.dx[k], traj.dx[k - 1] + 0.1 * traj.dv[k - 1]);
            assert_eq!(traj.a_ego[k], (traj.v_ego[k] - traj.v_ego[k - 1]) / 0.1);
        }
    }

    #[test]
    fn euler_regression_identity_holds_at_true_delay() {
        // The sampled acceleration at k must equal the model applied to the
        // state exactly d steps back — the identity the identifier exploits.
        let p = reduced_params(0.1, 0.5, 5.0, 0.5);
        let lead = LeadProfile::ExponentialApproach { limit: 15.0, gap: 5.0, rate: 0.05 };
        let traj =
            simulate_euler(&p, &lead, CFState { x1: 20.0, x2: 5.0 }, 50.0, 0.1, Mode::Linear)
                .unwrap();
        let d = 5;
        for k in d..traj.len() {
            let predicted = 0.1 * traj.dx[k - d] - 0.5 * traj.v_ego[k - d] + 0.5 * traj.dv[k - d];
            assert!(
                (traj.a_ego[k] - predicted).abs() < 1e-12,
                "k={k}: {} vs {predicted}",
                traj.a_ego[k]
            );
        }
    }

    #[test]
    fn zero_forces_leave_speed_constant() {
        let p = CFParams::new(1.0, 0.0, 0.0, 0.0, 0.0, 0.0, 1.0, 0.0, 0.0).unwrap();
        let lead = LeadProfile::Constant(12.0);
        let traj =
            simulate_euler(&p, &lead, CFState { x1: 7.0, x2: 4.0 }, 5.0, 0.1, Mode::Linear)
                .unwrap();
        assert!(traj.v_ego.iter().all(|&v| v == 4.0));
        // dx integrates dv = 8 exactly: dx(k) = 7 + 0.8k
        for k in 0..traj.len() {
            assert!((traj.dx[k] - (7.0 + 0.8 * k as f64)).abs() < 1e-9);
        }
    }

    #[test]
    fn dde_with_zero_delay_is_plain_ode() {
        let p = reduced_params(0.5, 1.0, 5.0, 0.0);
        let lead = LeadProfile::Constant(10.0);
        // The slow mode decays like e^(−0.149t), so give it 150 s to settle.
        let traj = simulate_dde(
            &p,
            &lead,
            &History::Constant(CFState { x1: 40.0, x2: 8.0 }),
            150.0,
            0.01,
            Mode::Linear,
        )
        .unwrap();
        assert!(traj.diverged_at.is_none());
        let last = traj.len() - 1;
        // Undelayed spring-damper relaxes to the steady state (50, 10).
        assert!((traj.dx[last] - 50.0).abs() < 1e-6);
        assert!((traj.v_ego[last] - 10.0).abs() < 1e-6);
    }

    #[test]
    fn euler_converges_to_dde_as_dt_shrinks() {
        let p = reduced_params(0.1, 0.5, 5.0, 0.5);
        let lead = LeadProfile::ExponentialApproach { limit: 15.0, gap: 5.0, rate: 0.05 };
        let x0 = CFState { x1: 20.0, x2: 5.0 };
        let reference =
            simulate_dde(&p, &lead, &History::Constant(x0), 20.0, 0.0005, Mode::Linear).unwrap();
        let mut gaps = Vec::new();
        for &dt in &[0.1, 0.05, 0.025] {
            let e = simulate_euler(&p, &lead, x0, 20.0, dt, Mode::Linear).unwrap();
            let stride = (dt / 0.0005).round() as usize;
            let gap = e
                .v_ego
                .iter()
                .enumerate()
                .map(|(k, v)| (v - reference.v_ego[k * stride]).abs())
                .fold(0.0f64, f64::max);
            gaps.push(gap);
        }
        assert!(gaps[1] < 0.7 * gaps[0], "{gaps:?}");
        assert!(gaps[2] < 0.7 * gaps[1], "{gaps:?}");
        // Roughly first order: halving dt should land near half the gap.
        let ratio = gaps[0] / gaps[2];
        assert!(ratio > 2.0, "expected ~4x reduction, got {gaps:?}");
    }

    #[test]
    fn identical_inputs_give_bit_identical_trajectories() {
        let p = reduced_params(1.0, 2.0, 5.0, 0.2);
        let lead = LeadProfile::ExponentialApproach { limit: 15.0, gap: 5.0, rate: 0.05 };
        let run = || {
            simulate_dde(
                &p,
                &lead,
                &History::PerturbedSteadyState { epsilon: 0.1 },
                10.0,
                0.01,
                Mode::Linear,
            )
            .unwrap()
        };
        assert_eq!(run(), run());
    }
}
