//! Cooperative localization for teams of mobile agents.
//!
//! A team of agents propagates individual motion models from proprioceptive
//! (odometry) measurements and corrects the joint estimate whenever one agent
//! takes a relative measurement of another, or an absolute measurement of
//! itself. The crate provides:
//!
//! - [`ekf`]: the centralized reference filter over the stacked team state,
//!   including a correlation-ignoring variant that reproduces the classic
//!   inconsistent "naive" filter.
//! - [`imdcl`]: an exactly equivalent decentralized implementation in which
//!   cross-covariances are never propagated explicitly. Each agent carries a
//!   local factor `Phi` and a registry of `Pi` blocks such that
//!   `P_ij = Phi_i * Pi_ij * Phi_j^T` at all times; the agent that takes a
//!   measurement acts as interim master and broadcasts one update message from
//!   which every agent reproduces its centralized update locally.
//! - [`ci`]: a loosely coupled baseline that relays a composed pose estimate
//!   to the observed agent, which fuses it by covariance intersection.
//! - [`netsim`]: a deterministic directed communication graph with multi-hop
//!   flooding and per-agent byte accounting.
//! - [`wire`]: the canonical little-endian binary layout (plus a JSON debug
//!   form) for every message that crosses an agent boundary.
//!
//! The crate is `no_std`-compatible (with `alloc`); file IO, scenario
//! configuration, and the Monte Carlo harness live in the companion `cooploc`
//! crate.

#![cfg_attr(not(feature = "std"), no_std)]

extern crate alloc;

pub mod ci;
pub mod ekf;
pub mod error;
pub mod imdcl;
pub mod models;
pub mod netsim;
pub mod numerics;
pub mod serde_support;
pub mod wire;

pub use error::{Error, Result};

/// Unique agent identifier. The wire format carries it as a `u16`; zero is
/// reserved for "no counterpart" in message headers.
pub type AgentId = u16;

/// Scalar math that needs `libm` when `std` is unavailable. Routed through
/// one shim so both builds call the same names.
pub(crate) mod fmath {
    #[cfg(feature = "std")]
    pub fn sqrt(x: f64) -> f64 {
        x.sqrt()
    }
    #[cfg(feature = "std")]
    pub fn sin(x: f64) -> f64 {
        x.sin()
    }
    #[cfg(feature = "std")]
    pub fn cos(x: f64) -> f64 {
        x.cos()
    }

    #[cfg(not(feature = "std"))]
    pub fn sqrt(x: f64) -> f64 {
        libm::sqrt(x)
    }
    #[cfg(not(feature = "std"))]
    pub fn sin(x: f64) -> f64 {
        libm::sin(x)
    }
    #[cfg(not(feature = "std"))]
    pub fn cos(x: f64) -> f64 {
        libm::cos(x)
    }
}
