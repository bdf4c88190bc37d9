//! Solver library for finite-horizon risk-averse Markov decision processes
//! with hybrid discrete-continuous states, continuous actions, and linear
//! transition/cost structure.
//!
//! The solver (`rddp`) grows a piecewise-affine lower bound on the optimal
//! value function from LP-dual subgradient cuts. A dynamic portfolio
//! benchmark (`portfolio`) and a Monte Carlo policy evaluator (`sim`) are
//! bundled.

pub mod bellman;
pub mod cli;
pub mod linalg;
pub mod lp;
pub mod model;
pub mod portfolio;
pub mod rddp;
pub mod risk;
pub mod sim;
pub mod value;
