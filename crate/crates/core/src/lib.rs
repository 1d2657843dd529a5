//! Cost-minimizing energy dispatch for a smart-grid community of households.
//!
//! Households that own renewable generation and storage can optimize alone,
//! pool their resources in a coalition, or additionally sell energy to pure
//! consumers at a discount on the utility price. Each variant compiles to a
//! linear program solved by the embedded simplex in [`lp`]; the coalition's
//! savings are shared with exact Shapley values in [`game`], and [`horizon`]
//! threads storage levels across a rolling multi-day run.

pub mod data;
pub mod dispatch;
pub mod game;
pub mod horizon;
pub mod lp;
pub mod model;
