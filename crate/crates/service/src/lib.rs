//! HTTP API and command-line driver for the requirement recommender.

pub mod api;
pub mod cli;
