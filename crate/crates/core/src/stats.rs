// Copyright 2026 The ionspam Authors
// SPDX-License-Identifier: Apache-2.0

//! Infidelity estimates, error budgets and correlated-error bursts.

use std::fmt::Write as _;

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::detection::{
    classify_threshold, sample_counts_at_rate, shot_rng, DetectionConfig, Readout, ShotRecord,
    TruthState,
};
use crate::error::{Error, Result};

/// Stream reserved for burst injection; shot streams use the shot index.
pub const BURST_STREAM: u64 = u64::MAX;

/// Wilson score interval for `errors` out of `n` at quantile `z`.
pub fn wilson_interval(errors: u64, n: u64, z: f64) -> Result<(f64, f64)> {
    if n == 0 {
        return Err(Error::invalid("n", "Wilson interval needs at least one trial"));
    }
    if errors > n {
        return Err(Error::invalid("errors", format!("{errors} exceeds {n} trials")));
    }
    if !(z.is_finite() && z > 0.0) {
        return Err(Error::invalid("z", "must be positive"));
    }
    let nf = n as f64;
    let p = errors as f64 / nf;
    let z2 = z * z;
    let denom = 1.0 + z2 / nf;
    let center = (p + z2 / (2.0 * nf)) / denom;
    let half = z / denom * (p * (1.0 - p) / nf + z2 / (4.0 * nf * nf)).sqrt();
    // The endpoints are exact at the boundaries; keep rounding from crossing them.
    let low = if errors == 0 { 0.0 } else { (center - half).clamp(0.0, p) };
    let high = if errors == n { 1.0 } else { (center + half).clamp(p, 1.0) };
    Ok((low, high))
}

/// A proportion with its one-sigma Wilson interval.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Estimate {
    pub value: f64,
    pub low: f64,
    pub high: f64,
}

impl Estimate {
    pub fn from_counts(errors: u64, n: u64) -> Result<Self> {
        let (low, high) = wilson_interval(errors, n, 1.0)?;
        Ok(Estimate {
            value: errors as f64 / n as f64,
            low,
            high,
        })
    }

    pub fn half_width(&self) -> f64 {
        0.5 * (self.high - self.low)
    }

    pub fn overlaps(&self, low: f64, high: f64) -> bool {
        self.low <= high && low <= self.high
    }

    pub fn paren(&self) -> String {
        format_paren(self.value, self.half_width(), None)
    }
}

/// Error counts per prepared state.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct TrialTally {
    pub n_zero: u64,
    pub n_one: u64,
    /// |0> prepared, read bright.
    pub errors_zero: u64,
    /// |1> prepared, read dark.
    pub errors_one: u64,
}

impl TrialTally {
    pub fn new(n_trials: u64, errors_zero: u64, errors_one: u64) -> Result<Self> {
        let t = TrialTally {
            n_zero: n_trials,
            n_one: n_trials,
            errors_zero,
            errors_one,
        };
        t.validate()?;
        Ok(t)
    }

    pub fn validate(&self) -> Result<()> {
        if self.errors_zero > self.n_zero {
            return Err(Error::invalid("errors_zero", "exceeds the |0> trial count"));
        }
        if self.errors_one > self.n_one {
            return Err(Error::invalid("errors_one", "exceeds the |1> trial count"));
        }
        Ok(())
    }

    pub fn record(&mut self, truth: TruthState, readout: Readout) {
        let wrong = readout != truth.expected_readout();
        match truth {
            TruthState::PreparedZero => {
                self.n_zero += 1;
                self.errors_zero += u64::from(wrong);
            }
            TruthState::PreparedOne => {
                self.n_one += 1;
                self.errors_one += u64::from(wrong);
            }
        }
    }

    /// Associative merge of two partial tallies.
    pub fn merge(self, other: TrialTally) -> TrialTally {
        TrialTally {
            n_zero: self.n_zero + other.n_zero,
            n_one: self.n_one + other.n_one,
            errors_zero: self.errors_zero + other.errors_zero,
            errors_one: self.errors_one + other.errors_one,
        }
    }
}

/// Tallies an archive with the threshold discriminator.
pub fn tally_threshold(records: &[ShotRecord], threshold_counts: u32) -> TrialTally {
    let mut tally = TrialTally::default();
    for r in records {
        tally.record(r.truth, classify_threshold(r, threshold_counts));
    }
    tally
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SpamSummary {
    pub zero: Estimate,
    pub one: Estimate,
    /// Mean of the two infidelities; interval from the pooled counts.
    pub total: Estimate,
}

pub fn spam_summary(tally: &TrialTally) -> Result<SpamSummary> {
    tally.validate()?;
    let zero = Estimate::from_counts(tally.errors_zero, tally.n_zero)?;
    let one = Estimate::from_counts(tally.errors_one, tally.n_one)?;
    let pooled = Estimate::from_counts(tally.errors_zero + tally.errors_one, tally.n_zero + tally.n_one)?;
    Ok(SpamSummary {
        zero,
        one,
        total: Estimate {
            value: 0.5 * (zero.value + one.value),
            ..pooled
        },
    })
}

impl SpamSummary {
    pub fn render(&self, tally: &TrialTally) -> String {
        format!(
            "|0> {} ({}/{})\n|1> {} ({}/{})\ntotal {}\n",
            self.zero.paren(),
            tally.errors_zero,
            tally.n_zero,
            self.one.paren(),
            tally.errors_one,
            tally.n_one,
            self.total.paren(),
        )
    }
}

fn superscript(exp: i32) -> String {
    exp.to_string()
        .chars()
        .map(|c| match c {
            '-' => '⁻',
            '0' => '⁰',
            '1' => '¹',
            '2' => '²',
            '3' => '³',
            '4' => '⁴',
            '5' => '⁵',
            '6' => '⁶',
            '7' => '⁷',
            '8' => '⁸',
            _ => '⁹',
        })
        .collect()
}

/// Parenthetical uncertainty with two significant digits on the
/// uncertainty, e.g. `9.6(1.4)×10⁻⁵`. `exponent` defaults to the value's
/// decade, or the uncertainty's when the value is zero.
pub fn format_paren(value: f64, uncertainty: f64, exponent: Option<i32>) -> String {
    let reference = if value != 0.0 { value.abs() } else { uncertainty.abs() };
    let exp = exponent.unwrap_or_else(|| {
        if reference > 0.0 {
            reference.log10().floor() as i32
        } else {
            0
        }
    });
    let scale = 10f64.powi(exp);
    let (v, u) = (value / scale, uncertainty / scale);
    let decimals = if u > 0.0 {
        (1 - u.log10().floor() as i32).max(0) as usize
    } else {
        1
    };
    let body = format!("{v:.decimals$}({u:.decimals$})");
    if exp == 0 {
        body
    } else {
        format!("{body}×10{}", superscript(exp))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum BudgetState {
    Zero,
    One,
}

impl BudgetState {
    fn index(self) -> usize {
        match self {
            BudgetState::Zero => 0,
            BudgetState::One => 1,
        }
    }

    pub fn label(self) -> &'static str {
        match self {
            BudgetState::Zero => "|0>",
            BudgetState::One => "|1>",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum EntryKind {
    Predicted,
    Measured,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BudgetEntry {
    pub source: String,
    pub state: BudgetState,
    #[serde(default)]
    pub value: f64,
    #[serde(default)]
    pub uncertainty: f64,
    pub kind: EntryKind,
    /// The value bounds the contribution from above and is itself a leftover.
    #[serde(default)]
    pub upper_bound: bool,
    /// Raw counts; when both are set they replace `value` and `uncertainty`.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub errors: Option<u64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub trials: Option<u64>,
}

impl BudgetEntry {
    fn resolved(&self) -> Result<BudgetEntry> {
        let mut e = self.clone();
        match (self.errors, self.trials) {
            (Some(k), Some(n)) => {
                let est = Estimate::from_counts(k, n)?;
                e.value = est.value;
                e.uncertainty = est.half_width();
            }
            (None, None) => {}
            _ => {
                return Err(Error::invalid(
                    format!("{}.errors", self.source),
                    "errors and trials must be given together",
                ))
            }
        }
        for (field, v) in [("value", e.value), ("uncertainty", e.uncertainty)] {
            if !(v.is_finite() && v >= 0.0) {
                return Err(Error::invalid(format!("{}.{field}", self.source), format!("{v} must be non-negative")));
            }
        }
        Ok(e)
    }
}

/// Budget components as read from a file.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BudgetComponents {
    #[serde(default, rename = "entry")]
    pub entries: Vec<BudgetEntry>,
}

impl BudgetComponents {
    pub fn from_toml(text: &str) -> Result<Self> {
        toml::from_str(text).map_err(|e| Error::format("budget components", e))
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ErrorBudget {
    pub entries: Vec<BudgetEntry>,
    /// Sum of predicted entries, per state.
    pub predicted_subtotal: [f64; 2],
    /// Measured subtotal and its uncertainty, per state.
    pub measured_subtotal: [Option<(f64, f64)>; 2],
    /// For states with an upper-bound row: measured subtotal minus every
    /// other predicted entry.
    pub leftover: [Option<f64>; 2],
    /// Mean of the measured subtotals with propagated uncertainty.
    pub total: Option<(f64, f64)>,
}

pub fn build_budget(components: &BudgetComponents) -> Result<ErrorBudget> {
    let entries = components
        .entries
        .iter()
        .map(BudgetEntry::resolved)
        .collect::<Result<Vec<_>>>()?;

    let mut predicted = [0.0; 2];
    let mut attributed = [0.0; 2];
    let mut bounded = [false; 2];
    let mut measured: [Option<(f64, f64)>; 2] = [None, None];
    for e in &entries {
        let i = e.state.index();
        match e.kind {
            EntryKind::Predicted => {
                predicted[i] += e.value;
                if e.upper_bound {
                    bounded[i] = true;
                } else {
                    attributed[i] += e.value;
                }
            }
            EntryKind::Measured => {
                if measured[i].is_some() {
                    return Err(Error::invalid(
                        e.source.clone(),
                        format!("second measured subtotal for {}", e.state.label()),
                    ));
                }
                measured[i] = Some((e.value, e.uncertainty));
            }
        }
    }

    let mut leftover = [None; 2];
    for state in [BudgetState::Zero, BudgetState::One] {
        let i = state.index();
        if let (Some((m, _)), true) = (measured[i], bounded[i]) {
            let rest = m - attributed[i];
            // Rounding of equal decimal inputs must not trip the check.
            if rest < -1e-12 * m.max(attributed[i]) {
                return Err(Error::InconsistentBudget {
                    state: state.label().into(),
                    leftover: rest,
                });
            }
            leftover[i] = Some(rest.max(0.0));
        }
    }

    let total = match measured {
        [Some((a, ua)), Some((b, ub))] => Some((0.5 * (a + b), 0.5 * ua.hypot(ub))),
        _ => None,
    };

    Ok(ErrorBudget {
        entries,
        predicted_subtotal: predicted,
        measured_subtotal: measured,
        leftover,
        total,
    })
}

const BUDGET_UNIT: f64 = 1e-5;

fn cell(v: f64, u: f64, upper: bool) -> String {
    let body = if u > 0.0 {
        format!("{:.1} ± {:.1}", v / BUDGET_UNIT, u / BUDGET_UNIT)
    } else {
        format!("{:.1}", v / BUDGET_UNIT)
    };
    if upper {
        format!("< {body}")
    } else {
        body
    }
}

impl ErrorBudget {
    /// Aligned text table in units of 1e-5.
    pub fn render_text(&self) -> String {
        let mut rows: Vec<[String; 3]> = vec![[
            "Error source (×10⁻⁵)".into(),
            "|0> state".into(),
            "|1> state".into(),
        ]];
        let blank = || "---".to_string();
        for e in self.entries.iter().filter(|e| e.kind == EntryKind::Predicted) {
            let mut row = [e.source.clone(), blank(), blank()];
            row[1 + e.state.index()] = cell(e.value, e.uncertainty, e.upper_bound);
            rows.push(row);
        }
        rows.push([
            "Subtotal (predicted)".into(),
            cell(self.predicted_subtotal[0], 0.0, false),
            cell(self.predicted_subtotal[1], 0.0, false),
        ]);
        let opt = |v: Option<(f64, f64)>| v.map_or_else(blank, |(v, u)| cell(v, u, false));
        rows.push([
            "Subtotal (measured)".into(),
            opt(self.measured_subtotal[0]),
            opt(self.measured_subtotal[1]),
        ]);
        rows.push([
            "Leftover (upper bound)".into(),
            opt(self.leftover[0].map(|v| (v, 0.0))),
            opt(self.leftover[1].map(|v| (v, 0.0))),
        ]);

        let w0 = rows.iter().map(|r| r[0].chars().count()).max().unwrap_or(0);
        let w1 = rows.iter().map(|r| r[1].chars().count()).max().unwrap_or(0);
        let mut out = String::new();
        for r in &rows {
            let pad0 = w0 - r[0].chars().count();
            let pad1 = w1 - r[1].chars().count();
            let _ = writeln!(out, "{}{}  {}{}  {}", r[0], " ".repeat(pad0), r[1], " ".repeat(pad1), r[2]);
        }
        match self.total {
            Some((v, u)) => {
                let _ = writeln!(out, "Total (measured)  {}", format_paren(v, u, Some(-5)));
            }
            None => out.push_str("Total (measured)  ---\n"),
        }
        out
    }

    /// Full-precision CSV including subtotal rows.
    pub fn render_csv(&self) -> String {
        let mut out = String::from("source,state,kind,value,uncertainty,upper_bound\n");
        for e in &self.entries {
            let kind = match e.kind {
                EntryKind::Predicted => "predicted",
                EntryKind::Measured => "measured",
            };
            let state = match e.state {
                BudgetState::Zero => "zero",
                BudgetState::One => "one",
            };
            let _ = writeln!(
                out,
                "{},{state},{kind},{:e},{:e},{}",
                csv_field(&e.source),
                e.value,
                e.uncertainty,
                e.upper_bound
            );
        }
        for (state, i) in [("zero", 0), ("one", 1)] {
            let _ = writeln!(out, "subtotal,{state},predicted,{:e},0e0,false", self.predicted_subtotal[i]);
            if let Some(v) = self.leftover[i] {
                let _ = writeln!(out, "leftover,{state},derived,{v:e},0e0,true");
            }
        }
        if let Some((v, u)) = self.total {
            let _ = writeln!(out, "total,both,measured,{v:e},{u:e},false");
        }
        out
    }
}

fn csv_field(s: &str) -> String {
    if s.contains([',', '"', '\n']) {
        format!("\"{}\"", s.replace('"', "\"\""))
    } else {
        s.to_string()
    }
}

/// Phenomenological bursts of intermediate-fluorescence trials.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct BurstModel {
    /// Onset probability per |0> trial outside a burst.
    pub burst_rate_per_trial: f64,
    /// Inclusive run-length range in trials.
    pub burst_length_range: (u32, u32),
    pub burst_count_rate_per_us: f64,
}

impl Default for BurstModel {
    fn default() -> Self {
        BurstModel {
            // 40 affected trials per 10^6 at a mean run of 25.
            burst_rate_per_trial: 1.6e-6,
            burst_length_range: (20, 30),
            burst_count_rate_per_us: 6.0 / 35.0,
        }
    }
}

impl BurstModel {
    pub fn disabled() -> Self {
        BurstModel {
            burst_rate_per_trial: 0.0,
            ..BurstModel::default()
        }
    }

    pub fn mean_length(&self) -> f64 {
        0.5 * f64::from(self.burst_length_range.0 + self.burst_length_range.1)
    }

    pub fn validate(&self, detection: &DetectionConfig) -> Result<()> {
        if !(0.0..=1.0).contains(&self.burst_rate_per_trial) {
            return Err(Error::invalid("burst_rate_per_trial", "must lie in [0, 1]"));
        }
        let (lo, hi) = self.burst_length_range;
        if lo == 0 || lo > hi {
            return Err(Error::invalid("burst_length_range", format!("({lo}, {hi}) needs 1 <= min <= max")));
        }
        let r = self.burst_count_rate_per_us;
        if !(r.is_finite() && r >= 0.0) {
            return Err(Error::invalid("burst_count_rate_per_us", "must be non-negative"));
        }
        if r > detection.bright_rate_per_us {
            return Err(Error::invalid("burst_count_rate_per_us", "must not exceed the bright rate"));
        }
        Ok(())
    }
}

/// Ground truth of one injected burst.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct InjectedBurst {
    /// Ordinal of the first affected |0> trial.
    pub first_trial: u64,
    pub length: u32,
    /// Shot indices of every overwritten record.
    pub shots: Vec<u64>,
}

/// Overwrites runs of consecutive |0> trials, and the |1> trial recorded
/// immediately after each, with counts at the burst rate.
pub fn inject_correlated_errors(
    records: &mut [ShotRecord],
    model: &BurstModel,
    detection: &DetectionConfig,
    seed: u64,
) -> Vec<InjectedBurst> {
    let mut rng = shot_rng(seed, BURST_STREAM);
    let zero_positions: Vec<usize> = records
        .iter()
        .enumerate()
        .filter(|(_, r)| r.truth == TruthState::PreparedZero)
        .map(|(i, _)| i)
        .collect();
    let (lo, hi) = model.burst_length_range;
    let mut bursts = Vec::new();
    let mut trial = 0usize;
    while trial < zero_positions.len() {
        if model.burst_rate_per_trial <= 0.0 || !rng.random_bool(model.burst_rate_per_trial) {
            trial += 1;
            continue;
        }
        let length = rng.random_range(lo..=hi);
        let end = (trial + length as usize).min(zero_positions.len());
        let mut shots = Vec::new();
        for &pos in &zero_positions[trial..end] {
            let mut targets = vec![pos];
            if records.get(pos + 1).is_some_and(|r| r.truth == TruthState::PreparedOne) {
                targets.push(pos + 1);
            }
            for t in targets {
                records[t].segment_counts =
                    sample_counts_at_rate(detection, model.burst_count_rate_per_us, &mut rng);
                records[t].truth_decay_time_us = None;
                shots.push(records[t].shot);
            }
        }
        bursts.push(InjectedBurst {
            first_trial: trial as u64,
            length: (end - trial) as u32,
            shots,
        });
        trial = end;
    }
    bursts
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::detection::simulate_shot_seeded;
    use crate::detection::ShelvingConfig;
    use proptest::prelude::*;

    fn close(a: f64, b: f64, rel: f64) -> bool {
        (a - b).abs() <= rel * b.abs()
    }

    #[test]
    fn wilson_zero_errors() {
        let (lo, hi) = wilson_interval(0, 1_000_000, 1.0).unwrap();
        assert_eq!(lo, 0.0);
        assert!(close(hi, 1.0 / 1_000_001.0, 1e-9), "{hi}");
    }

    #[test]
    fn wilson_against_direct_substitution() {
        // Independent form: roots of (p̂ − p)² = z² p(1 − p)/n.
        let (k, n, z) = (192.0f64, 2e6f64, 1.0f64);
        let ph = k / n;
        let a = 1.0 + z * z / n;
        let b = -(2.0 * ph + z * z / n);
        let c = ph * ph;
        let disc = (b * b - 4.0 * a * c).sqrt();
        let (r1, r2) = ((-b - disc) / (2.0 * a), (-b + disc) / (2.0 * a));
        let (lo, hi) = wilson_interval(192, 2_000_000, 1.0).unwrap();
        assert!(close(lo, r1, 1e-9) && close(hi, r2, 1e-9));
        let center = 0.5 * (lo + hi);
        let half = 0.5 * (hi - lo);
        assert!((center - 9.6e-5).abs() < 0.05e-5, "{center}");
        assert!((half - 6.9e-6).abs() < 0.05e-6, "{half}");
    }

    #[test]
    fn wilson_rejects_empty_and_overfull() {
        assert!(wilson_interval(0, 0, 1.0).is_err());
        assert!(wilson_interval(5, 4, 1.0).is_err());
    }

    #[test]
    fn summary_of_measured_subtotals() {
        let t = TrialTally::new(1_000_000, 147, 42).unwrap();
        let s = spam_summary(&t).unwrap();
        assert!(close(s.total.value, 9.45e-5, 1e-12));
        assert!((s.total.value - 9.6e-5).abs() <= 0.2e-5);
        let swapped = TrialTally::new(1_000_000, 42, 147).unwrap();
        assert_eq!(spam_summary(&swapped).unwrap().total, s.total);
        let none = spam_summary(&TrialTally::new(10, 0, 0).unwrap()).unwrap();
        assert_eq!(none.total.value, 0.0);
    }

    #[test]
    fn paren_formatting() {
        assert_eq!(format_paren(9.6e-5, 1.4e-5, None), "9.6(1.4)×10⁻⁵");
        assert_eq!(format_paren(9.45e-5, 0.69e-5, None), "9.45(0.69)×10⁻⁵");
        assert_eq!(format_paren(1.47e-4, 2.4e-5, Some(-5)), "14.7(2.4)×10⁻⁵");
        assert_eq!(format_paren(0.0, 1e-6, None), "0.0(1.0)×10⁻⁶");
        assert_eq!(format_paren(3.0, 0.0, None), "3.0(0.0)");
    }

    fn shipped() -> BudgetComponents {
        BudgetComponents::from_toml(include_str!("../config/ba137_budget.toml")).unwrap()
    }

    #[test]
    fn shipped_budget_subtotal_and_leftover() {
        let b = build_budget(&shipped()).unwrap();
        assert!(close(b.predicted_subtotal[0], 14.7e-5, 1e-12), "{}", b.predicted_subtotal[0]);
        assert!(close(b.leftover[0].unwrap(), 9.1e-5, 1e-12), "{:?}", b.leftover);
        let (total, _) = b.total.unwrap();
        assert!(close(total, 9.45e-5, 1e-12));
        let text = b.render_text();
        assert!(text.contains("< 9.1"), "{text}");
        assert!(b.render_csv().lines().count() > b.entries.len());
    }

    #[test]
    fn empty_budget_is_zero() {
        let b = build_budget(&BudgetComponents::default()).unwrap();
        assert_eq!(b.predicted_subtotal, [0.0, 0.0]);
        assert_eq!(b.leftover, [None, None]);
        assert!(b.total.is_none());
    }

    #[test]
    fn negative_leftover_is_rejected() {
        let text = r#"
            [[entry]]
            source = "decay"
            state = "zero"
            value = 5e-5
            kind = "predicted"
            [[entry]]
            source = "prep"
            state = "zero"
            value = 0.0
            kind = "predicted"
            upper_bound = true
            [[entry]]
            source = "measured"
            state = "zero"
            value = 1e-5
            kind = "measured"
        "#;
        let err = build_budget(&BudgetComponents::from_toml(text).unwrap()).unwrap_err();
        assert!(matches!(err, Error::InconsistentBudget { .. }));
    }

    #[test]
    fn counts_replace_quoted_values() {
        let text = r#"
            [[entry]]
            source = "measured"
            state = "one"
            kind = "measured"
            errors = 42
            trials = 1000000
        "#;
        let b = build_budget(&BudgetComponents::from_toml(text).unwrap()).unwrap();
        let (v, u) = b.measured_subtotal[1].unwrap();
        assert!(close(v, 4.2e-5, 1e-12));
        assert!(u > 0.5e-5 && u < 0.8e-5);
    }

    fn archive(n: u64, seed: u64) -> Vec<ShotRecord> {
        let cfg = DetectionConfig::default();
        let shelving = ShelvingConfig::default();
        (0..2 * n)
            .map(|i| {
                let truth = if i % 2 == 0 { TruthState::PreparedZero } else { TruthState::PreparedOne };
                simulate_shot_seeded(i, truth, truth == TruthState::PreparedZero, &cfg, &shelving, seed)
            })
            .collect()
    }

    #[test]
    fn zero_burst_rate_leaves_archive_unchanged() {
        let original = archive(500, 2);
        let mut copy = original.clone();
        let bursts = inject_correlated_errors(&mut copy, &BurstModel::disabled(), &DetectionConfig::default(), 2);
        assert!(bursts.is_empty());
        assert_eq!(copy, original);
    }

    #[test]
    fn bursts_respect_length_range_and_pairing() {
        let mut records = archive(5_000, 4);
        let model = BurstModel {
            burst_rate_per_trial: 2e-3,
            ..BurstModel::default()
        };
        let bursts = inject_correlated_errors(&mut records, &model, &DetectionConfig::default(), 4);
        assert!(!bursts.is_empty());
        for b in &bursts {
            let last = b.first_trial + u64::from(b.length) == 5_000;
            assert!(last || (20..=30).contains(&b.length), "{b:?}");
            assert_eq!(b.shots.len(), 2 * b.length as usize);
        }
        // Burst counts exceed the threshold: |0> trials turn bright, |1> stay bright.
        let t = tally_threshold(&records, DetectionConfig::default().threshold());
        let burst_trials: u64 = bursts.iter().map(|b| u64::from(b.length)).sum();
        assert!(t.errors_zero >= burst_trials);
        assert!(t.errors_one <= 2);
    }

    proptest! {
        #[test]
        fn wilson_brackets_the_estimate(n in 1u64..5_000_000, frac in 0.0f64..=1.0, z in 0.1f64..4.0) {
            let k = ((n as f64) * frac).floor() as u64;
            let (lo, hi) = wilson_interval(k, n, z).unwrap();
            let p = k as f64 / n as f64;
            prop_assert!(lo <= p && p <= hi);
            prop_assert!(0.0 <= lo && hi <= 1.0);
        }

        #[test]
        fn subtotal_is_the_sum(values in prop::collection::vec(0.0f64..1e-3, 0..12)) {
            let entries = values.iter().enumerate().map(|(i, &v)| BudgetEntry {
                source: format!("s{i}"),
                state: BudgetState::Zero,
                value: v,
                uncertainty: 0.0,
                kind: EntryKind::Predicted,
                upper_bound: false,
                errors: None,
                trials: None,
            }).collect();
            let b = build_budget(&BudgetComponents { entries }).unwrap();
            let direct: f64 = values.iter().sum();
            prop_assert!((b.predicted_subtotal[0] - direct).abs() <= 1e-12 * direct.max(f64::MIN_POSITIVE));
        }
    }
}
