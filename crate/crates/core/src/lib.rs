//! Numerical laboratory for the prototype anisotropic p-Laplacian evolution
//! equation
//!
//!   ∂_t u = Σ_i ∂_i (|∂_i u|^(p_i - 2) ∂_i u),   2 < p_1 ≤ ... ≤ p_N,
//!
//! covering its scaling group and intrinsic geometry, Barenblatt profiles via
//! the Fokker–Planck frame, energy estimates, the De Giorgi / critical-mass
//! iteration, and lower-semicontinuous regularization — all on tensor-product
//! grids with exact rational exponent bookkeeping.

pub mod energy_degiorgi;
pub mod fokker_planck;
pub mod grid;
pub mod io;
pub mod lsc;
pub mod numeric;
pub mod params;
pub mod scaling;
pub mod solver;
