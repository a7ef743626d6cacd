//! Multi-cell full-duplex NOMA network simulator and power-allocation
//! optimizer.
//!
//! The crate models a small cellular network in which full-duplex base
//! stations serve downlink and uplink users on the same resource via
//! power-domain NOMA, optionally with centralized baseband processing that
//! cancels cross-cell DL-to-UL interference down to a residual. Sum
//! throughput is maximized over transmit powers two ways: globally by a
//! polyblock outer-approximation solver on the monotonic reformulation, and
//! approximately by successive convex approximation of the
//! difference-of-concave form. A Monte Carlo harness sweeps operating points
//! across five transmission schemes and writes CSV summaries.

pub mod bench;
pub mod config;
pub mod experiment;
pub mod link;
pub mod model;
pub mod optim;
pub mod propagation;
pub mod verify;
