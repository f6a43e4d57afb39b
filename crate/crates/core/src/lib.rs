//! Coverage and capacity models for a single-gateway LoRaWAN cell.
//!
//! * [`analytic`]: closed-form connection, capture and coverage probabilities
//!   of a typical node in a ring-structured Poisson field of interferers.
//! * [`montecarlo`]: brute-force sampling of the same model, used as its oracle.
//! * [`simulator`]: discrete-event pure-ALOHA simulation with duty cycle,
//!   Hata propagation and three collision models (BP, IC, IIC).
//! * [`airtime`]: LoRa time on air and the pure-ALOHA curve.
//! * [`specfun`]: the `₂F₁(1, b; 1 + b; x)` evaluator behind the capture formula.
//! * [`scenario`]: configuration files, validation, ring geometry and node placement.

pub mod airtime;
pub mod analytic;
pub mod montecarlo;
pub mod scenario;
pub mod simulator;
pub mod specfun;
pub mod units;

pub use scenario::{CollisionModel, Scenario};
pub use units::SpreadingFactor;
