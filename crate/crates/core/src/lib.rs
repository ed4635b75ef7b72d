//! Network-guided screening of item pools.
//!
//! Nodes of a network carry a latent binary relevance; each edge owns a pool
//! of items whose relevance rate depends on its endpoints. Screening results
//! are folded into beliefs about nodes and edges, and a policy chooses which
//! edge to screen next.

pub mod bayes_linear;
pub mod error;
pub mod io;
pub mod model;
pub mod moments;
pub mod network;
pub mod oracle;
pub mod policy;
pub mod priors;
pub mod session;
pub mod sim;

pub use error::{Error, Result};
pub use network::{EdgeCount, EdgeId, EdgeStats, Network, Observation};
