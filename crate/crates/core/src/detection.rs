// Copyright 2026 The ionspam Authors
// SPDX-License-Identifier: Apache-2.0

//! Cabinet shelving, segmented fluorescence detection and shot classification.
//!
//! A shot is a list of photon counts, one per detection segment. Population
//! in |0> is shelved to D5/2 by three successive π-pulses and reads dark;
//! anything left in S1/2 reads bright. A shelved ion may decay back to S1/2
//! during the last two shelving pulses or the detection window, after which
//! it fluoresces at the bright rate for the rest of the window.
//!
//! Two discriminators are provided: a total-count threshold and a sequential
//! Bayesian test over the segments with Poisson likelihoods. Shots the
//! threshold calls bright but the Bayesian test calls dark are flagged as
//! probable mid-window decays.

use std::collections::BTreeMap;
use std::io::{BufRead, Write};

use rand::Rng;
use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Exp, Poisson};
use serde::{Deserialize, Serialize};
use statrs::distribution::{DiscreteCDF, Poisson as PoissonDist};
use statrs::function::factorial::ln_factorial;

use crate::error::{Error, Result};

/// Per-segment likelihood floor.
pub const LIKELIHOOD_FLOOR: f64 = 1e-300;

/// Tail probability above the default threshold for a dark shot.
pub const DARK_EDGE_TAIL: f64 = 1e-7;

/// Three-pulse cabinet shelving of |0> into D5/2.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ShelvingConfig {
    /// Success probability of each π-pulse.
    pub pulse_fidelities: [f64; 3],
    pub pulse_durations_us: [f64; 3],
}

impl Default for ShelvingConfig {
    fn default() -> Self {
        ShelvingConfig {
            pulse_fidelities: [0.99; 3],
            pulse_durations_us: [165.0, 45.0, 55.0],
        }
    }
}

impl ShelvingConfig {
    /// Probability that |0> survives all three pulses unshelved.
    pub fn residual_unshelved(&self) -> f64 {
        self.pulse_fidelities.iter().map(|f| 1.0 - f).product()
    }

    /// Shelved time before detection starts: pulses two and three.
    pub fn pre_detection_shelved_us(&self) -> f64 {
        self.pulse_durations_us[1] + self.pulse_durations_us[2]
    }

    pub fn total_duration_us(&self) -> f64 {
        self.pulse_durations_us.iter().sum()
    }

    pub fn validate(&self) -> Result<()> {
        for f in self.pulse_fidelities {
            if !(0.0..=1.0).contains(&f) {
                return Err(Error::invalid("pulse_fidelities", format!("{f} outside [0, 1]")));
            }
        }
        if self.pulse_durations_us.iter().any(|d| !(d.is_finite() && *d > 0.0)) {
            return Err(Error::invalid("pulse_durations_us", "durations must be positive"));
        }
        Ok(())
    }
}

/// Segmented fluorescence detection.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct DetectionConfig {
    pub n_segments: usize,
    pub segment_us: f64,
    pub bright_rate_per_us: f64,
    pub dark_rate_per_us: f64,
    /// D5/2 lifetime; `inf` disables decay.
    pub d52_lifetime_s: f64,
    /// Stop once the losing hypothesis falls below this posterior.
    pub bayes_confidence: f64,
    /// Bright iff total counts exceed this. Derived from the dark rate when unset.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub threshold_counts: Option<u32>,
}

impl Default for DetectionConfig {
    fn default() -> Self {
        DetectionConfig {
            n_segments: 10,
            segment_us: 35.0,
            bright_rate_per_us: 20.0 / 35.0,
            dark_rate_per_us: 0.04 / 35.0,
            d52_lifetime_s: 30.1,
            bayes_confidence: 1e-6,
            threshold_counts: None,
        }
    }
}

impl DetectionConfig {
    pub fn window_us(&self) -> f64 {
        self.n_segments as f64 * self.segment_us
    }

    /// Threshold in use: the configured one, else [`dark_edge_threshold`].
    pub fn threshold(&self) -> u32 {
        self.threshold_counts
            .unwrap_or_else(|| dark_edge_threshold(self.dark_rate_per_us * self.window_us(), DARK_EDGE_TAIL))
    }

    pub fn validate(&self) -> Result<()> {
        if self.n_segments == 0 {
            return Err(Error::invalid("n_segments", "must be at least 1"));
        }
        if !(self.segment_us.is_finite() && self.segment_us > 0.0) {
            return Err(Error::invalid("segment_us", "must be positive"));
        }
        for (field, r) in [
            ("bright_rate_per_us", self.bright_rate_per_us),
            ("dark_rate_per_us", self.dark_rate_per_us),
        ] {
            if !(r.is_finite() && r >= 0.0) {
                return Err(Error::invalid(field, format!("{r} must be finite and non-negative")));
            }
        }
        if self.bright_rate_per_us <= self.dark_rate_per_us {
            return Err(Error::invalid(
                "bright_rate_per_us",
                "must exceed dark_rate_per_us",
            ));
        }
        if !(self.d52_lifetime_s > 0.0) {
            return Err(Error::invalid("d52_lifetime_s", "must be positive"));
        }
        if !(self.bayes_confidence > 0.0 && self.bayes_confidence < 0.5) {
            return Err(Error::invalid("bayes_confidence", "must lie in (0, 0.5)"));
        }
        Ok(())
    }
}

/// Smallest `t` with `P(Poisson(dark_mean) > t) <= tail`.
pub fn dark_edge_threshold(dark_mean: f64, tail: f64) -> u32 {
    if dark_mean <= 0.0 {
        return 0;
    }
    let dist = PoissonDist::new(dark_mean).expect("positive mean");
    (0u32..)
        .find(|&t| dist.sf(u64::from(t)) <= tail)
        .expect("Poisson tail eventually vanishes")
}

/// Probability that a D5/2 ion decays within `duration_us`.
pub fn decay_probability(duration_us: f64, lifetime_s: f64) -> f64 {
    -(-duration_us * 1e-6 / lifetime_s).exp_m1()
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum TruthState {
    #[serde(rename = "zero")]
    PreparedZero,
    #[serde(rename = "one")]
    PreparedOne,
}

impl TruthState {
    /// The readout a perfect experiment produces.
    pub fn expected_readout(self) -> Readout {
        match self {
            TruthState::PreparedZero => Readout::Dark,
            TruthState::PreparedOne => Readout::Bright,
        }
    }

    pub fn label(self) -> &'static str {
        match self {
            TruthState::PreparedZero => "zero",
            TruthState::PreparedOne => "one",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Readout {
    Bright,
    Dark,
}

impl Readout {
    pub fn label(self) -> &'static str {
        match self {
            Readout::Bright => "bright",
            Readout::Dark => "dark",
        }
    }
}

/// One detection shot with its ground truth.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ShotRecord {
    pub shot: u64,
    pub truth: TruthState,
    #[serde(rename = "counts")]
    pub segment_counts: Vec<u32>,
    /// Decay time relative to the start of detection; negative values fall
    /// within the last two shelving pulses. `None` if no decay occurred
    /// before the window closed.
    #[serde(rename = "decay_us")]
    pub truth_decay_time_us: Option<f64>,
}

impl ShotRecord {
    pub fn total_counts(&self) -> u64 {
        self.segment_counts.iter().map(|&c| u64::from(c)).sum()
    }
}

/// Time until a D5/2 ion decays, measured from the moment it is shelved.
pub fn sample_decay_time_us<R: Rng + ?Sized>(lifetime_s: f64, rng: &mut R) -> f64 {
    if !lifetime_s.is_finite() {
        return f64::INFINITY;
    }
    Exp::new(1.0 / (lifetime_s * 1e6)).expect("positive rate").sample(rng)
}

/// Independent stream for shot `index` under `seed`.
pub fn shot_rng(seed: u64, index: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(index);
    rng
}

fn poisson<R: Rng + ?Sized>(mean: f64, rng: &mut R) -> u32 {
    if mean <= 0.0 {
        return 0;
    }
    Poisson::new(mean).expect("finite positive mean").sample(rng) as u32
}

/// Draws segment counts for an ion that is dark until `bright_from_us`
/// (relative to detection start) and bright afterwards. `None` means dark
/// for the whole window.
pub fn sample_counts<R: Rng + ?Sized>(
    cfg: &DetectionConfig,
    bright_from_us: Option<f64>,
    rng: &mut R,
) -> Vec<u32> {
    (0..cfg.n_segments)
        .map(|i| {
            let start = i as f64 * cfg.segment_us;
            let end = start + cfg.segment_us;
            let bright_us = match bright_from_us {
                None => 0.0,
                Some(t) => (end - t.clamp(start, end)).max(0.0),
            };
            let dark_us = cfg.segment_us - bright_us;
            poisson(cfg.dark_rate_per_us * dark_us + cfg.bright_rate_per_us * bright_us, rng)
        })
        .collect()
}

/// Segment counts at a fixed rate for the whole window.
pub fn sample_counts_at_rate<R: Rng + ?Sized>(
    cfg: &DetectionConfig,
    rate_per_us: f64,
    rng: &mut R,
) -> Vec<u32> {
    (0..cfg.n_segments)
        .map(|_| poisson(rate_per_us * cfg.segment_us, rng))
        .collect()
}

/// Simulates cabinet shelving and detection for one shot.
///
/// `in_qubit_zero` says whether the ion sits in |0> when shelving begins;
/// any other sublevel is not addressed by the shelving pulses and reads
/// bright.
pub fn simulate_shot<R: Rng + ?Sized>(
    shot: u64,
    truth: TruthState,
    in_qubit_zero: bool,
    cfg: &DetectionConfig,
    shelving: &ShelvingConfig,
    rng: &mut R,
) -> ShotRecord {
    let mut decay = None;
    let bright_from = if in_qubit_zero {
        // Each pulse gets a chance at whatever is still unshelved.
        let shelved = shelving
            .pulse_fidelities
            .iter()
            .any(|&f| rng.random::<f64>() < f);
        if shelved {
            let t = sample_decay_time_us(cfg.d52_lifetime_s, rng) - shelving.pre_detection_shelved_us();
            if t < cfg.window_us() {
                decay = Some(t);
            }
            decay
        } else {
            Some(f64::NEG_INFINITY)
        }
    } else {
        Some(f64::NEG_INFINITY)
    };
    ShotRecord {
        shot,
        truth,
        segment_counts: sample_counts(cfg, bright_from, rng),
        truth_decay_time_us: decay,
    }
}

/// [`simulate_shot`] on the stream derived from `(seed, shot)`.
pub fn simulate_shot_seeded(
    shot: u64,
    truth: TruthState,
    in_qubit_zero: bool,
    cfg: &DetectionConfig,
    shelving: &ShelvingConfig,
    seed: u64,
) -> ShotRecord {
    let mut rng = shot_rng(seed, shot);
    simulate_shot(shot, truth, in_qubit_zero, cfg, shelving, &mut rng)
}

pub fn classify_threshold(record: &ShotRecord, threshold_counts: u32) -> Readout {
    if record.total_counts() > u64::from(threshold_counts) {
        Readout::Bright
    } else {
        Readout::Dark
    }
}

/// Posterior over the two hypotheses; always sums to one.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Posterior {
    pub bright: f64,
    pub dark: f64,
}

impl Posterior {
    pub const UNIFORM: Posterior = Posterior {
        bright: 0.5,
        dark: 0.5,
    };

    /// From the log odds ln(P_bright / P_dark).
    pub fn from_log_odds(log_odds: f64) -> Self {
        // Evaluate the smaller side through exp of a non-positive number.
        let small = (-log_odds.abs()).exp();
        let big = 1.0 / (1.0 + small);
        let minor = small / (1.0 + small);
        if log_odds >= 0.0 {
            Posterior {
                bright: big,
                dark: minor,
            }
        } else {
            Posterior {
                bright: minor,
                dark: big,
            }
        }
    }

    pub fn min(&self) -> f64 {
        self.bright.min(self.dark)
    }

    pub fn label(&self) -> Readout {
        if self.bright > self.dark {
            Readout::Bright
        } else {
            Readout::Dark
        }
    }
}

fn ln_poisson_likelihood(counts: u32, mean: f64) -> f64 {
    let ln_l = if mean <= 0.0 {
        if counts == 0 {
            0.0
        } else {
            f64::NEG_INFINITY
        }
    } else {
        f64::from(counts) * mean.ln() - mean - ln_factorial(u64::from(counts))
    };
    ln_l.max(LIKELIHOOD_FLOOR.ln())
}

/// ln L(bright) − ln L(dark) for one segment.
pub fn segment_log_likelihood_ratio(counts: u32, cfg: &DetectionConfig) -> f64 {
    ln_poisson_likelihood(counts, cfg.bright_rate_per_us * cfg.segment_us)
        - ln_poisson_likelihood(counts, cfg.dark_rate_per_us * cfg.segment_us)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BayesOutcome {
    pub label: Readout,
    pub segments_used: usize,
    pub posterior: Posterior,
    /// Whether the confidence threshold was crossed before the last segment.
    pub early_stop: bool,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum BayesMode {
    /// Classify a complete record.
    #[default]
    PostProcess,
    /// Conclude the measurement at the stopping segment, discarding the rest
    /// of the record.
    RealTime,
}

/// Posterior after each consumed segment, starting from a uniform prior and
/// stopping at the confidence threshold.
pub fn posterior_trace(record: &ShotRecord, cfg: &DetectionConfig) -> Vec<Posterior> {
    let mut log_odds = 0.0;
    let mut trace = Vec::with_capacity(record.segment_counts.len());
    for &c in &record.segment_counts {
        log_odds += segment_log_likelihood_ratio(c, cfg);
        let post = Posterior::from_log_odds(log_odds);
        trace.push(post);
        if post.min() < cfg.bayes_confidence {
            break;
        }
    }
    trace
}

/// Sequential Bayesian classification of one record.
pub fn classify_bayes(record: &ShotRecord, cfg: &DetectionConfig) -> BayesOutcome {
    let trace = posterior_trace(record, cfg);
    let posterior = trace.last().copied().unwrap_or(Posterior::UNIFORM);
    BayesOutcome {
        label: posterior.label(),
        segments_used: trace.len(),
        posterior,
        early_stop: trace.len() < record.segment_counts.len(),
    }
}

/// [`classify_bayes`] with a mode; `RealTime` truncates the record to the
/// segments actually consumed.
pub fn classify_bayes_with_mode(
    record: &mut ShotRecord,
    cfg: &DetectionConfig,
    mode: BayesMode,
) -> BayesOutcome {
    let outcome = classify_bayes(record, cfg);
    if mode == BayesMode::RealTime {
        record.segment_counts.truncate(outcome.segments_used);
    }
    outcome
}

/// Indices of shots read bright by the threshold but dark by the Bayesian test.
pub fn flag_decays(records: &[ShotRecord], cfg: &DetectionConfig) -> Vec<usize> {
    let threshold = cfg.threshold();
    records
        .iter()
        .enumerate()
        .filter(|(_, r)| {
            classify_threshold(r, threshold) == Readout::Bright
                && classify_bayes(r, cfg).label == Readout::Dark
        })
        .map(|(i, _)| i)
        .collect()
}

/// Total-count histogram split by prepared state: counts → [zero, one].
pub fn count_histogram(records: &[ShotRecord]) -> BTreeMap<u64, [u64; 2]> {
    let mut hist = BTreeMap::new();
    for r in records {
        let slot: &mut [u64; 2] = hist.entry(r.total_counts()).or_default();
        match r.truth {
            TruthState::PreparedZero => slot[0] += 1,
            TruthState::PreparedOne => slot[1] += 1,
        }
    }
    hist
}

pub fn histogram_csv(hist: &BTreeMap<u64, [u64; 2]>) -> String {
    let mut out = String::from("counts,zero,one\n");
    for (counts, [zero, one]) in hist {
        out.push_str(&format!("{counts},{zero},{one}\n"));
    }
    out
}

/// Writes one JSON record per line.
pub fn write_archive<W: Write>(mut out: W, records: &[ShotRecord]) -> Result<()> {
    for r in records {
        serde_json::to_writer(&mut out, r).map_err(|e| Error::archive("archive", e))?;
        out.write_all(b"\n")?;
    }
    Ok(())
}

pub fn read_archive<R: BufRead>(input: R) -> Result<Vec<ShotRecord>> {
    let mut records = Vec::new();
    for (lineno, line) in input.lines().enumerate() {
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        let record: ShotRecord = serde_json::from_str(&line)
            .map_err(|e| Error::archive(format!("archive line {}", lineno + 1), e))?;
        records.push(record);
    }
    Ok(records)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn record(counts: Vec<u32>) -> ShotRecord {
        ShotRecord {
            shot: 0,
            truth: TruthState::PreparedZero,
            segment_counts: counts,
            truth_decay_time_us: None,
        }
    }

    #[test]
    fn three_pulse_residual() {
        let s = ShelvingConfig::default();
        assert!((s.residual_unshelved() - 1e-6).abs() < 1e-18);
        assert_eq!(s.pre_detection_shelved_us() + 350.0, 450.0);
        assert_eq!(s.total_duration_us() + 350.0, 615.0);
    }

    #[test]
    fn decay_probabilities_over_detection_and_full_shelving() {
        let p350 = decay_probability(350.0, 30.1);
        let p615 = decay_probability(615.0, 30.1);
        assert!((p350 - 1.16e-5).abs() < 0.005e-5, "{p350}");
        assert!((p615 - 2.04e-5).abs() < 0.005e-5, "{p615}");
    }

    #[test]
    fn default_threshold_sits_at_dark_edge() {
        let cfg = DetectionConfig::default();
        assert_eq!(cfg.window_us(), 350.0);
        assert_eq!(cfg.threshold(), 7);
        let with_override = DetectionConfig {
            threshold_counts: Some(12),
            ..cfg
        };
        assert_eq!(with_override.threshold(), 12);
        assert_eq!(dark_edge_threshold(0.0, 1e-7), 0);
    }

    #[test]
    fn zero_counts_read_dark() {
        assert_eq!(classify_threshold(&record(vec![0; 10]), 5), Readout::Dark);
    }

    #[test]
    fn decay_at_start_reads_bright() {
        let cfg = DetectionConfig::default();
        let mut rng = shot_rng(3, 0);
        for _ in 0..100 {
            let counts = sample_counts(&cfg, Some(0.0), &mut rng);
            assert_eq!(classify_threshold(&record(counts), cfg.threshold()), Readout::Bright);
        }
    }

    #[test]
    fn infinite_lifetime_never_decays() {
        let cfg = DetectionConfig {
            d52_lifetime_s: f64::INFINITY,
            ..DetectionConfig::default()
        };
        let shelving = ShelvingConfig {
            pulse_fidelities: [1.0; 3],
            ..ShelvingConfig::default()
        };
        for shot in 0..200 {
            let r = simulate_shot_seeded(shot, TruthState::PreparedZero, true, &cfg, &shelving, 9);
            assert!(r.truth_decay_time_us.is_none());
        }
    }

    #[test]
    fn unshelvable_population_reads_bright() {
        let cfg = DetectionConfig::default();
        let r = simulate_shot_seeded(0, TruthState::PreparedOne, false, &cfg, &ShelvingConfig::default(), 1);
        assert_eq!(r.segment_counts.len(), 10);
        assert!(r.total_counts() > 100);
    }

    #[test]
    fn decay_segment_is_pro_rated() {
        // With zero dark rate, counts before the decay segment must vanish.
        let cfg = DetectionConfig {
            dark_rate_per_us: 0.0,
            bright_rate_per_us: 100.0,
            ..DetectionConfig::default()
        };
        let mut rng = shot_rng(0, 0);
        let counts = sample_counts(&cfg, Some(52.5), &mut rng);
        assert_eq!(counts[0], 0);
        // Half of segment 1 is bright: mean 1750 with sd ≈ 42.
        assert!((counts[1] as f64 - 1750.0).abs() < 300.0, "{counts:?}");
        assert!((counts[2] as f64 - 3500.0).abs() < 400.0);
    }

    #[test]
    fn empty_counts_stop_early_as_dark() {
        let cfg = DetectionConfig::default();
        let out = classify_bayes(&record(vec![0; 10]), &cfg);
        assert_eq!(out.label, Readout::Dark);
        assert!(out.early_stop);
        assert!(out.segments_used < 10);
    }

    #[test]
    fn realtime_mode_truncates() {
        let cfg = DetectionConfig::default();
        let mut r = record(vec![0; 10]);
        let out = classify_bayes_with_mode(&mut r, &cfg, BayesMode::RealTime);
        assert_eq!(r.segment_counts.len(), out.segments_used);
        let mut r = record(vec![0; 10]);
        classify_bayes_with_mode(&mut r, &cfg, BayesMode::PostProcess);
        assert_eq!(r.segment_counts.len(), 10);
    }

    #[test]
    fn zero_dark_rate_is_floored_not_locked_out() {
        let cfg = DetectionConfig {
            dark_rate_per_us: 0.0,
            ..DetectionConfig::default()
        };
        // One stray count would make the dark likelihood exactly zero.
        let out = classify_bayes(&record(vec![1, 0, 0, 0, 0, 0, 0, 0, 0, 0]), &cfg);
        assert!(out.posterior.bright.is_finite() && out.posterior.dark.is_finite());
        assert!((out.posterior.bright + out.posterior.dark - 1.0).abs() < 1e-12);
    }

    #[test]
    fn late_decay_is_flagged() {
        let cfg = DetectionConfig::default();
        let mut counts = vec![0; 10];
        for c in counts.iter_mut().skip(4) {
            *c = 20;
        }
        let mut decayed = record(counts);
        decayed.truth_decay_time_us = Some(140.0);
        let clean = record(vec![0; 10]);
        assert_eq!(flag_decays(&[clean, decayed], &cfg), vec![1]);
    }

    #[test]
    fn histogram_and_archive_round_trip() {
        let cfg = DetectionConfig::default();
        let records: Vec<_> = (0..20)
            .map(|i| {
                let truth = if i % 2 == 0 { TruthState::PreparedZero } else { TruthState::PreparedOne };
                simulate_shot_seeded(i, truth, i % 2 == 0, &cfg, &ShelvingConfig::default(), 5)
            })
            .collect();
        let mut buf = Vec::new();
        write_archive(&mut buf, &records).unwrap();
        assert_eq!(read_archive(buf.as_slice()).unwrap(), records);
        let hist = count_histogram(&records);
        let total: u64 = hist.values().map(|v| v[0] + v[1]).sum();
        assert_eq!(total, 20);
        assert!(histogram_csv(&hist).starts_with("counts,zero,one\n"));
    }

    #[test]
    fn malformed_archive_names_the_line() {
        let text = "{\"shot\":0,\"truth\":\"zero\",\"counts\":[0],\"decay_us\":null}\nnot json\n";
        match read_archive(text.as_bytes()) {
            Err(Error::Archive { context, .. }) => assert_eq!(context, "archive line 2"),
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn config_validation() {
        assert!(DetectionConfig::default().validate().is_ok());
        let swapped = DetectionConfig {
            bright_rate_per_us: 0.0,
            ..DetectionConfig::default()
        };
        assert!(swapped.validate().is_err());
        let bad = ShelvingConfig {
            pulse_fidelities: [1.5, 0.9, 0.9],
            ..ShelvingConfig::default()
        };
        assert!(bad.validate().is_err());
    }

    proptest! {
        #[test]
        fn posterior_is_normalized(counts in prop::collection::vec(0u32..40, 10)) {
            let cfg = DetectionConfig::default();
            for p in posterior_trace(&record(counts), &cfg) {
                prop_assert!((p.bright + p.dark - 1.0).abs() < 1e-12);
            }
        }

        #[test]
        fn swapping_rates_swaps_labels(
            counts in prop::collection::vec(0u32..30, 10),
            dark in 0.0f64..0.5,
            bright in 1.0f64..15.0,
        ) {
            let cfg = DetectionConfig {
                dark_rate_per_us: dark / 35.0,
                bright_rate_per_us: bright / 35.0,
                ..DetectionConfig::default()
            };
            let mirrored = DetectionConfig {
                dark_rate_per_us: cfg.bright_rate_per_us,
                bright_rate_per_us: cfg.dark_rate_per_us,
                ..cfg
            };
            let r = record(counts);
            let a = classify_bayes(&r, &cfg);
            let b = classify_bayes(&r, &mirrored);
            prop_assume!(a.posterior.bright != a.posterior.dark);
            prop_assert_eq!(a.segments_used, b.segments_used);
            prop_assert_ne!(a.label, b.label);
            prop_assert_eq!(a.posterior.bright, b.posterior.dark);
        }
    }
}
