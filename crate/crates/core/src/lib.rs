// Copyright 2026 The ionspam Authors
// SPDX-License-Identifier: Apache-2.0

//! State preparation and measurement (SPAM) modeling for hyperfine
//! trapped-ion qubits.
//!
//! - [`species`]: level structure and per-species parameters.
//! - [`ratemodel`]: steady-state optical pumping error, closed form and ODE.
//! - [`pumpsim`]: Markov evolution of Zeeman populations under pumping cycles.
//! - [`detection`]: shelving, segmented fluorescence and shot classification.
//! - [`stats`]: Wilson intervals, error budgets, correlated-error bursts.
//! - [`experiment`]: end-to-end simulated SPAM runs.
//! - [`config`]: TOML run configuration.

// `!(x > 0.0)` is used on purpose: it also rejects NaN.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod config;
pub mod detection;
pub mod error;
pub mod experiment;
pub mod pumpsim;
pub mod ratemodel;
pub mod species;
pub mod stats;

pub use error::{Error, Result};
