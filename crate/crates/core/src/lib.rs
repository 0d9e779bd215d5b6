//! Highway trajectory planning that pairs chance-constrained model predictive
//! control with a reachability-based fail-safe backup plan.
//!
//! At every time step two optimal control problems are solved: an optimistic
//! one against probabilistic predictions of the surrounding vehicles, and a
//! fail-safe one against their worst-case occupancy sets. The optimistic
//! input is only applied when a fail-safe continuation from its successor
//! state exists; otherwise the fail-safe input or a stored safe input
//! sequence takes over, which makes the scheme recursively feasible.
//!
//! The crate also ships a scenario simulator and a small CLI (`smpcft`) that
//! runs single scenarios, randomized batches, and a built-in property
//! self-test.

pub mod constraint_gen;
pub mod ev_model;
pub mod ocp;
pub mod qp;
pub mod reachability;
pub mod sim;
pub mod supervisor;
pub mod tv_model;
pub mod uncertainty;
