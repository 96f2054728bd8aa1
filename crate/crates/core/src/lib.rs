//! Optimal withdrawal control of a one-dimensional diffusion under a
//! state-dependent bound on the withdrawal rate.
//!
//! The optimal strategy is a refraction (bang-bang) strategy: nothing is
//! withdrawn below a barrier `b*`, and the maximal rate `F(x)` is withdrawn
//! above it. This crate computes `b*`, the value function and its building
//! blocks, and checks the result against the HJB equation and Monte Carlo.

pub mod model;
pub mod specfun;
pub mod ode;
pub mod curve;
pub mod fundamental;
pub mod resolvent;
pub mod optimizer;
pub mod simulate;
pub mod config;
pub mod sweep;
pub mod check;
pub mod output;
