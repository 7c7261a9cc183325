// Copyright 2026 The ionspam Authors
// SPDX-License-Identifier: Apache-2.0

//! Two-population rate model of microwave-assisted optical pumping.
//!
//! The population outside the qubit state, `rho_other`, is returned to |0>
//! by the weak flush beam at rate `eta_flush * gamma / 2`. The qubit state is
//! depleted by off-resonant scattering of the same beam at rate
//!
//! ```text
//! gamma * [eta_up * (Γ / 2δ_S)² + eta_cross * (Γ / 2δ₋)²],   δ₋ = δ_S − δ_P
//! ```
//!
//! Whatever leaves one population enters the other, so the pair relaxes to a
//! steady state whose ratio `rho_other / rho_qubit` is the preparation error
//! returned in closed form by [`prep_error_steady_state`].

use log::warn;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::species::{builtin_species, SpeciesParams};

/// Default flush scattering rate as a fraction of the linewidth.
pub const DEFAULT_SCATTER_FRACTION: f64 = 1e-3;

/// Above this fraction of Γ the low-saturation model is outside its range.
pub const LOW_SATURATION_LIMIT: f64 = 0.1;

/// Steady-state preparation error of a species in the many-cycle,
/// low-flush-power limit:
/// `(Γ²/2) · [1/δ_S² + (η_cross/η_up) · 1/δ₋²]`.
pub fn prep_error_steady_state(species: &SpeciesParams) -> Result<f64> {
    let gamma = species.linewidth_hz;
    let delta_s = species.hf_s_hz;
    let delta_minus = species.delta_minus_hz();
    if !(delta_minus > 0.0) {
        return Err(Error::ModelUndefined(format!(
            "{}: δ₋ = δ_S − δ_P = {delta_minus} Hz must be positive",
            species.name
        )));
    }
    if !(species.eta_up > 0.0) {
        return Err(Error::ModelUndefined(format!(
            "{}: eta_up must be positive",
            species.name
        )));
    }
    if !(gamma > 0.0 && delta_s > 0.0) {
        return Err(Error::ModelUndefined(format!(
            "{}: linewidth and ground splitting must be positive",
            species.name
        )));
    }
    let ratio = species.eta_cross / species.eta_up;
    Ok(0.5 * gamma * gamma * (1.0 / (delta_s * delta_s) + ratio / (delta_minus * delta_minus)))
}

#[derive(Debug, Clone, PartialEq)]
pub struct PrepPrediction {
    pub species: SpeciesParams,
    pub eps_prep: f64,
}

/// Applies [`prep_error_steady_state`] to every entry, preserving order.
pub fn prediction_report(table: &[SpeciesParams]) -> Result<Vec<PrepPrediction>> {
    table
        .iter()
        .map(|s| {
            Ok(PrepPrediction {
                species: s.clone(),
                eps_prep: prep_error_steady_state(s)?,
            })
        })
        .collect()
}

/// Predicted preparation error for the built-in species table.
pub fn table1_report() -> Vec<(String, f64)> {
    prediction_report(&builtin_species())
        .expect("built-in species satisfy the model preconditions")
        .into_iter()
        .map(|p| (p.species.name, p.eps_prep))
        .collect()
}

/// CSV with columns species, I, linewidth, splittings and predicted error.
pub fn prediction_csv(predictions: &[PrepPrediction]) -> String {
    let mut out = String::from("species,I,linewidth_hz,hf_s_hz,hf_p_hz,eps_prep\n");
    for p in predictions {
        let s = &p.species;
        out.push_str(&format!(
            "{},{},{:?},{:?},{:?},{:e}\n",
            s.name, s.nuclear_spin, s.linewidth_hz, s.hf_s_hz, s.hf_p_hz, p.eps_prep
        ));
    }
    out
}

#[derive(Debug, Clone)]
pub struct RatePumpConfig {
    pub species: SpeciesParams,
    /// Flush-beam scattering rate γ in s⁻¹.
    pub scatter_rate_hz: f64,
}

impl RatePumpConfig {
    pub fn new(species: SpeciesParams, scatter_rate_hz: f64) -> Result<Self> {
        if !(scatter_rate_hz.is_finite() && scatter_rate_hz >= 0.0) {
            return Err(Error::invalid(
                "scatter_rate_hz",
                format!("{scatter_rate_hz} must be finite and non-negative"),
            ));
        }
        if scatter_rate_hz > LOW_SATURATION_LIMIT * species.linewidth_hz {
            warn!(
                "scatter rate {scatter_rate_hz:e} s^-1 exceeds {LOW_SATURATION_LIMIT}·Γ for {}; \
                 the low-saturation rate model may not apply",
                species.name
            );
        }
        Ok(RatePumpConfig {
            species,
            scatter_rate_hz,
        })
    }

    /// γ = 10⁻³ Γ.
    pub fn with_default_rate(species: SpeciesParams) -> Self {
        let rate = DEFAULT_SCATTER_FRACTION * species.linewidth_hz;
        RatePumpConfig {
            species,
            scatter_rate_hz: rate,
        }
    }

    /// Rate at which non-qubit population is pumped back into |0>.
    pub fn refill_rate(&self) -> f64 {
        self.species.eta_flush() * self.scatter_rate_hz / 2.0
    }

    /// Rate at which |0> is depleted by off-resonant scattering.
    pub fn loss_rate(&self) -> f64 {
        let s = &self.species;
        let g = s.linewidth_hz;
        let up = g / (2.0 * s.hf_s_hz);
        let cross = g / (2.0 * s.delta_minus_hz());
        (s.eta_up * up * up + s.eta_cross * cross * cross) * self.scatter_rate_hz
    }

    /// Time constant of the approach to steady state, 1 / (refill + loss).
    pub fn relaxation_time_s(&self) -> f64 {
        1.0 / (self.refill_rate() + self.loss_rate())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PopulationPair {
    pub rho_qubit: f64,
    pub rho_other: f64,
}

impl PopulationPair {
    pub fn new(rho_qubit: f64, rho_other: f64) -> Result<Self> {
        for (field, v) in [("rho_qubit", rho_qubit), ("rho_other", rho_other)] {
            if !(0.0..=1.0).contains(&v) {
                return Err(Error::invalid(field, format!("{v} outside [0, 1]")));
            }
        }
        Ok(PopulationPair {
            rho_qubit,
            rho_other,
        })
    }

    pub fn total(&self) -> f64 {
        self.rho_qubit + self.rho_other
    }

    /// rho_other / rho_qubit, the preparation error once converged.
    pub fn error_ratio(&self) -> f64 {
        self.rho_other / self.rho_qubit
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RateSample {
    pub t_s: f64,
    pub pop: PopulationPair,
}

fn derivative(refill: f64, loss: f64, p: PopulationPair) -> (f64, f64) {
    let d_qubit = refill * p.rho_other - loss * p.rho_qubit;
    (d_qubit, -d_qubit)
}

fn rk4_step(refill: f64, loss: f64, p: PopulationPair, h: f64) -> PopulationPair {
    let shift = |p: PopulationPair, k: (f64, f64), scale: f64| PopulationPair {
        rho_qubit: p.rho_qubit + scale * k.0,
        rho_other: p.rho_other + scale * k.1,
    };
    let k1 = derivative(refill, loss, p);
    let k2 = derivative(refill, loss, shift(p, k1, h / 2.0));
    let k3 = derivative(refill, loss, shift(p, k2, h / 2.0));
    let k4 = derivative(refill, loss, shift(p, k3, h));
    let dq = (k1.0 + 2.0 * k2.0 + 2.0 * k3.0 + k4.0) / 6.0;
    // Apply the qubit increment and its negation so the pair sum is untouched.
    PopulationPair {
        rho_qubit: p.rho_qubit + h * dq,
        rho_other: p.rho_other - h * dq,
    }
}

/// Integrates the coupled pair with classical fourth-order Runge-Kutta.
///
/// The step count is `ceil(duration_s / dt_s)` and the step is shrunk
/// uniformly so the last sample lands on `duration_s`. The returned series
/// includes the initial point.
pub fn integrate_rate_equations(
    cfg: &RatePumpConfig,
    init: PopulationPair,
    duration_s: f64,
    dt_s: f64,
) -> Result<Vec<RateSample>> {
    if !(duration_s.is_finite() && duration_s > 0.0) {
        return Err(Error::invalid("duration_s", format!("{duration_s} must be positive")));
    }
    if !(dt_s.is_finite() && dt_s > 0.0 && dt_s <= duration_s) {
        return Err(Error::invalid(
            "dt_s",
            format!("{dt_s} must lie in (0, duration_s = {duration_s}]"),
        ));
    }
    let steps = (duration_s / dt_s).ceil() as usize;
    let h = duration_s / steps as f64;
    let (refill, loss) = (cfg.refill_rate(), cfg.loss_rate());

    let mut series = Vec::with_capacity(steps + 1);
    let mut pop = init;
    series.push(RateSample { t_s: 0.0, pop });
    for i in 1..=steps {
        pop = rk4_step(refill, loss, pop, h);
        let t_s = i as f64 * h;
        if !(pop.rho_qubit.is_finite() && pop.rho_other.is_finite()) {
            return Err(Error::NonFinite { t_s });
        }
        series.push(RateSample { t_s, pop });
    }
    Ok(series)
}

/// Relative change of the final error ratio when `dt_s` is halved.
pub fn step_halving_change(
    cfg: &RatePumpConfig,
    init: PopulationPair,
    duration_s: f64,
    dt_s: f64,
) -> Result<f64> {
    let final_ratio = |dt: f64| -> Result<f64> {
        let series = integrate_rate_equations(cfg, init, duration_s, dt)?;
        Ok(series.last().expect("series is never empty").pop.error_ratio())
    };
    let coarse = final_ratio(dt_s)?;
    let fine = final_ratio(dt_s / 2.0)?;
    Ok(((coarse - fine) / fine).abs())
}

/// Long-time error ratio from the ODE, integrating for `relaxations`
/// relaxation times at `steps_per_relaxation` steps each.
pub fn ode_steady_ratio(
    cfg: &RatePumpConfig,
    relaxations: f64,
    steps_per_relaxation: f64,
) -> Result<f64> {
    let tau = cfg.relaxation_time_s();
    let series = integrate_rate_equations(
        cfg,
        PopulationPair {
            rho_qubit: 1.0,
            rho_other: 0.0,
        },
        relaxations * tau,
        tau / steps_per_relaxation,
    )?;
    Ok(series.last().expect("series is never empty").pop.error_ratio())
}
