//! Command-line experiment runner and HTTP service for interactive
//! network-guided search.

pub mod api;
pub mod cli;
pub mod store;
