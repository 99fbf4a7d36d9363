//! Transient performance of voltage control in multi-terminal DC grids.
//!
//! A DC grid is modelled as a connected network of purely resistive lines
//! between capacitive terminals. Three closed-loop controllers are assembled
//! on top of that network:
//!
//! | controller | state                 | dynamics                                  |
//! |------------|-----------------------|-------------------------------------------|
//! | slack bus  | `V` minus ground node | `C V' = -L~ V`                            |
//! | droop      | `V`                   | `C V' = -(L + K_P) V`                     |
//! | DAPI       | `(z, V)`              | `K z' = V - L_q z`, `C V' = -z - (L + K_P) V` |
//!
//! and compared through their squared H2 norm with output `y = V / sqrt(n)`.
//! The norms are available in closed spectral form ([`systems`]), through a
//! dense Lyapunov solve ([`numerics::solve_lyapunov`]) and by Monte Carlo
//! simulation ([`simulate`]). [`resistance`] relates the slack norm to the
//! Kirchhoff index of the network and runs lattice scaling sweeps.
//!
//! The crate is `no_std` and only needs `alloc`. File formats and the command
//! line front end live in the companion `mtdc` crate.

#![cfg_attr(not(test), no_std)]

extern crate alloc;

mod error;
pub mod matrix;
pub mod network;
pub mod numerics;
pub mod resistance;
pub mod rng;
pub mod simulate;
pub mod systems;

pub use error::{Error, Result};
pub use matrix::Matrix;
pub use network::{Edge, Network};
pub use numerics::{LyapunovSolution, SpectralDecomposition};
pub use resistance::{Family, ScalingRecord, SweepResult};
pub use simulate::{InitialMode, McEstimate, McMode, Trajectory};
pub use systems::{ControllerParams, H2Method, H2Report, ModelKind, NodeParams, StateLabel, StateSpaceModel};

pub const VERSION: &str = env!("CARGO_PKG_VERSION");
