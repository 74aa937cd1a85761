//! Library surface of the command-line front end, exposed for
//! integration tests.

pub mod commands;
pub mod config;
