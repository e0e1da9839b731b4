//! Spread and basket option pricing under multivariate Lévy models via
//! Fourier series on truncated hyperbolic-cross lattices.

pub mod cli;
pub mod complexmath;
pub mod density;
pub mod martingale;
pub mod models;
pub mod payoff;
pub mod pricer;
