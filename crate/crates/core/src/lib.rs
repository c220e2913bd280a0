//! d-dimensional BB84 over photon spatial modes.
//!
//! Symbols are encoded in the zero-OAM Laguerre-Gauss modes `LG(n,n)` (or a
//! fixed-OAM sector `LG(n+l, n)`), which are unchanged, up to a global phase,
//! by a rotation about the propagation axis. Sender and receiver therefore
//! need no shared transverse reference frame.
//!
//! Modules, bottom up:
//! - [`modecalc`]: closed-form HG/LG fields and quadrature checks
//! - [`qstate`]: logical states, the B1/B2 bases, MUB families, Born sampling
//! - [`devices`]: sorter, MODAN/Fourier chain, modal converter, preparation
//! - [`channel`]: rotation, Gouy phase, loss, frequency shift, intercept-resend
//! - [`protocol`]: session engine, sifting, QBER test, transcripts
//! - [`cli`]: JSON config, flags and output files

pub mod channel;
pub mod cli;
pub mod devices;
pub mod error;
pub mod modecalc;
pub mod protocol;
pub mod qstate;

pub use error::{Error, Result};
