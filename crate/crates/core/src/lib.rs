//! Car-following dynamics with a driver reaction delay, modeled as a
//! mass-spring-damper whose natural length grows with speed.
//!
//! Three workflows share the model core:
//!
//! * [`dde`] — forward simulation of the delayed equations of motion
//!   (method-of-steps RK4 for continuous-time studies, explicit Euler for
//!   sampled identification data);
//! * [`sem`] — stability analysis of the linear delay system: a spectral
//!   element discretization turns one delay interval into a finite dynamic
//!   map Γ, and ρ(Γ) < 1 decides asymptotic stability over (α, β, τ) grids;
//! * [`ident`] — online parameter identification from sampled trajectories
//!   via a parallel bank of inverse-QR recursive least squares estimators,
//!   one per delay hypothesis, with automatic delay selection.
//!
//! [`harness`] wires these into reproducible studies (noise injection at
//! controlled SNR, Monte-Carlo sweeps, episode preparation for recorded
//! data), and [`io`] provides the config/CSV/SVG plumbing used by the CLI.
//!
//! All numerics are generic over the scalar type through [`num::Real`];
//! [`Scalar`] (= `f64`) is the default used by the CLI and the file formats.

pub mod dde;
pub mod harness;
pub mod ident;
pub mod io;
pub mod linalg;
pub mod model;
pub mod num;
pub mod sem;

/// Default scalar type for CLI, file formats, and most callers.
pub type Scalar = f64;

pub use dde::{simulate_dde, simulate_euler, History, LeadProfile, Trajectory};
pub use ident::{batch_ls, select_delay, DelayBank, IQREstimator, RegressorSample};
pub use model::{steady_state, CFParams, CFState, IdentTriple, Mode, ReducedParams};
pub use num::Real;
pub use sem::{
    build_gamma, char_boundary_oracle, is_stable, spectral_radius, stability_sweep, DDESystem,
    SEMConfig, StabilityGrid,
};
