//! Pricing policies and plan-selection equilibria for a monopolist wireless
//! LAN provider that runs either a contention (CSMA) or a scheduled (TDMA)
//! MAC protocol.

pub mod design;
pub mod engine;
pub mod error;
pub mod experiment;
pub mod game;
pub mod mac;
pub mod model;
pub mod sim;
pub mod verify;

pub use error::{Error, Result};
pub use model::*;
