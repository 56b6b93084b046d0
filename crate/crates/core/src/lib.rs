//! Robust routing of video analytics tasks between an edge tier and a cloud tier.
//!
//! Each task picks a resolution, a frame rate and a tier before uncertainty
//! about compute cost is revealed, then a model version once it is. The
//! solver minimizes the worst case of that two-stage cost over a budgeted
//! uncertainty set. A small recurrent gate over frame differences proposes a
//! starting configuration, and the simulator replays plans against synthetic
//! traces and fluctuating bandwidth.

pub mod error;
pub mod gating;
pub mod model;
pub mod oracle;
pub mod rng;
pub mod robust;
pub mod sim;

pub use error::{Error, Result};
