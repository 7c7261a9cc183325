// Copyright 2026 The ionspam Authors
// SPDX-License-Identifier: Apache-2.0

//! End-to-end SPAM runs: pumping, transfer, shelving, detection, bursts.
//!
//! Trials interleave the two prepared states: record `2i` prepares |0>,
//! record `2i + 1` prepares |1> (|0> followed by the transfer pulse). Every
//! record draws from its own stream, so output does not depend on the
//! number of worker threads.

use std::sync::Arc;

use rand::Rng;
use rayon::prelude::*;

use crate::config::{ProtocolKind, RunConfig};
use crate::detection::{sample_decay_time_us, shot_rng, simulate_shot, ShotRecord, TruthState};
use crate::error::{Error, Result};
use crate::pumpsim::{
    apply_step, build_maop, build_nbop, build_polarization_prep, evolve, flush_first,
    PopulationVector, ProtocolStep, Protocol, PulseParams, StateSpace,
};
use crate::species::SpeciesParams;
use crate::stats::{inject_correlated_errors, InjectedBurst};

/// Builds the configured protocol with explicit pulse parameters.
pub fn build_protocol(
    kind: ProtocolKind,
    cycles: u32,
    flush_cycles: Option<u32>,
    pulses: &PulseParams,
    species: &SpeciesParams,
) -> Protocol {
    match kind {
        ProtocolKind::Maop => build_maop(cycles, pulses, species),
        ProtocolKind::Nbop => {
            let mask = flush_first(cycles, flush_cycles.unwrap_or(cycles));
            build_nbop(cycles, mask, pulses, species)
        }
        ProtocolKind::Polarization => {
            build_polarization_prep(pulses.polarization_residual, pulses.residual_spread)
        }
    }
}

fn final_error(
    kind: ProtocolKind,
    cycles: u32,
    flush_cycles: Option<u32>,
    pulses: &PulseParams,
    species: &SpeciesParams,
    init: &PopulationVector,
) -> Result<f64> {
    let protocol = build_protocol(kind, cycles, flush_cycles, pulses, species);
    let run = evolve(&protocol, species, init)?;
    Ok(run.series.last().map_or(1.0, |p| p.prep_error))
}

/// Flush leak that makes the final preparation error equal `target`.
///
/// The final error rises monotonically with the leak, so a bisection on
/// `[0, 0.5]` converges; a target outside the reachable range is an error.
pub fn calibrate_flush_leak(
    kind: ProtocolKind,
    cycles: u32,
    flush_cycles: Option<u32>,
    pulses: &PulseParams,
    species: &SpeciesParams,
    target: f64,
) -> Result<f64> {
    let space = Arc::new(StateSpace::for_species(species)?);
    let init = PopulationVector::uniform_ground(space)?;
    let at = |leak: f64| {
        let p = PulseParams {
            flush_leak: leak,
            ..*pulses
        };
        final_error(kind, cycles, flush_cycles, &p, species, &init)
    };
    let (mut lo, mut hi) = (0.0, 0.5);
    let (e_lo, e_hi) = (at(lo)?, at(hi)?);
    if !(e_lo <= target && target <= e_hi) {
        return Err(Error::ModelUndefined(format!(
            "target preparation error {target:e} is outside the reachable range [{e_lo:e}, {e_hi:e}]"
        )));
    }
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if mid <= lo || mid >= hi {
            break;
        }
        if at(mid)? < target {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    Ok(0.5 * (lo + hi))
}

/// Pulse parameters after applying the configured calibration.
pub fn resolved_pulses(cfg: &RunConfig, species: &SpeciesParams) -> Result<PulseParams> {
    let mut pulses = cfg.protocol.pulses;
    if let Some(target) = cfg.protocol.target_prep_error {
        if cfg.protocol.kind == ProtocolKind::Polarization {
            log::warn!("target_prep_error ignored: the polarization protocol has no flush pulse");
        } else {
            pulses.flush_leak = calibrate_flush_leak(
                cfg.protocol.kind,
                cfg.protocol.cycles,
                cfg.protocol.flush_cycles,
                &pulses,
                species,
                target,
            )?;
            log::info!("calibrated flush leak {:e}", pulses.flush_leak);
        }
    }
    Ok(pulses)
}

/// Probability of sitting in |0> at shelving time, per prepared state.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PreparedStates {
    pub prep_error: f64,
    pub p_zero_given_zero: f64,
    pub p_zero_given_one: f64,
    pub flush_leak: f64,
}

pub fn prepare_states(cfg: &RunConfig, species: &SpeciesParams) -> Result<PreparedStates> {
    let pulses = resolved_pulses(cfg, species)?;
    let protocol = build_protocol(
        cfg.protocol.kind,
        cfg.protocol.cycles,
        cfg.protocol.flush_cycles,
        &pulses,
        species,
    );
    let space = Arc::new(StateSpace::for_species(species)?);
    let init = PopulationVector::uniform_ground(space)?;
    let run = evolve(&protocol, species, &init)?;
    let zero = species.qubit_zero();
    let transferred = apply_step(
        &run.final_pop,
        &ProtocolStep::TransferPi {
            infidelity: pulses.transfer_infidelity,
        },
        species,
    )?;
    let p_zero = run.final_pop.get(&zero);
    Ok(PreparedStates {
        prep_error: run.series.last().map_or(1.0 - p_zero, |p| p.prep_error),
        p_zero_given_zero: p_zero,
        p_zero_given_one: transferred.get(&zero),
        flush_leak: pulses.flush_leak,
    })
}

#[derive(Debug, Clone)]
pub struct SpamRun {
    pub prepared: PreparedStates,
    pub records: Vec<ShotRecord>,
    pub bursts: Vec<InjectedBurst>,
}

/// Simulates `trials` interleaved pairs of |0> and |1> shots.
pub fn simulate_spam(cfg: &RunConfig, species: &SpeciesParams) -> Result<SpamRun> {
    cfg.validate()?;
    let prepared = prepare_states(cfg, species)?;
    let seed = cfg.run.seed;
    let n_records = cfg
        .run
        .trials
        .checked_mul(2)
        .ok_or_else(|| Error::invalid("run.trials", "too large"))?;
    let mut records: Vec<ShotRecord> = (0..n_records)
        .into_par_iter()
        .map(|shot| {
            let mut rng = shot_rng(seed, shot);
            let (truth, p_zero) = if shot % 2 == 0 {
                (TruthState::PreparedZero, prepared.p_zero_given_zero)
            } else {
                (TruthState::PreparedOne, prepared.p_zero_given_one)
            };
            let in_zero = rng.random::<f64>() < p_zero;
            simulate_shot(shot, truth, in_zero, &cfg.detection, &cfg.shelving, &mut rng)
        })
        .collect();
    let bursts = inject_correlated_errors(&mut records, &cfg.burst, &cfg.detection, seed);
    Ok(SpamRun {
        prepared,
        records,
        bursts,
    })
}

/// Number of the `n` shelved shots whose decay time falls within
/// `window_us`, each on its own stream.
pub fn monte_carlo_decays(n: u64, window_us: f64, lifetime_s: f64, seed: u64) -> u64 {
    (0..n)
        .into_par_iter()
        .filter(|&i| sample_decay_time_us(lifetime_s, &mut shot_rng(seed, i)) < window_us)
        .count() as u64
}
