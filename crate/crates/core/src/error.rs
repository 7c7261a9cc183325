// Copyright 2026 The ionspam Authors
// SPDX-License-Identifier: Apache-2.0

use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    /// A numeric or structural parameter violates its invariant.
    #[error("invalid value for `{field}`: {reason}")]
    InvalidParameter { field: String, reason: String },

    #[error("unknown manifold `{0}` (expected one of S1/2, P1/2, P3/2, D3/2, D5/2)")]
    UnknownManifold(String),

    #[error("at least one manifold must be requested")]
    EmptyManifoldSet,

    #[error("species `{species}` carries no {manifold} structure")]
    UnsupportedManifold { species: String, manifold: String },

    #[error("unknown species `{0}`")]
    UnknownSpecies(String),

    #[error("sublevel {0} is not part of the state space")]
    MissingSublevel(String),

    #[error("rate model undefined: {0}")]
    ModelUndefined(String),

    #[error("integration produced a non-finite population at t = {t_s:e} s")]
    NonFinite { t_s: f64 },

    #[error("inconsistent budget: leftover for {state} is {leftover:e} (< 0)")]
    InconsistentBudget { state: String, leftover: f64 },

    /// Malformed configuration, species or budget files.
    #[error("{context}: {message}")]
    Format { context: String, message: String },

    /// Unreadable or malformed shot archive.
    #[error("{context}: {message}")]
    Archive { context: String, message: String },

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

impl Error {
    pub fn invalid(field: impl Into<String>, reason: impl Into<String>) -> Self {
        Error::InvalidParameter {
            field: field.into(),
            reason: reason.into(),
        }
    }

    pub fn archive(context: impl Into<String>, message: impl ToString) -> Self {
        Error::Archive {
            context: context.into(),
            message: message.to_string(),
        }
    }

    pub fn format(context: impl Into<String>, message: impl ToString) -> Self {
        Error::Format {
            context: context.into(),
            message: message.to_string(),
        }
    }

    /// True for errors caused by user input rather than by a failed computation.
    pub fn is_config_error(&self) -> bool {
        matches!(
            self,
            Error::InvalidParameter { .. }
                | Error::UnknownManifold(_)
                | Error::EmptyManifoldSet
                | Error::UnsupportedManifold { .. }
                | Error::UnknownSpecies(_)
                | Error::Format { .. }
        )
    }
}
