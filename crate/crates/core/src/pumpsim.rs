// Copyright 2026 The ionspam Authors
// SPDX-License-Identifier: Apache-2.0

//! Population-level simulation of the cyclic pumping sequences.
//!
//! Every pulse is a row-stochastic transition matrix over the enumerated
//! Zeeman sublevels (row = source, column = destination). Coherences are
//! not tracked: each cycle ends in an incoherent flush or deshelve, so the
//! preparation error after `n` cycles is fully determined by populations.
//!
//! Built-in sequences:
//!
//! * polarization prep: one [`ProtocolStep::PolarizationPump`];
//! * MAOP: polarization prep, then per cycle two microwave π-pulses
//!   |S, F, ±1> ↔ |S, F+1, ±1> followed by a flush pulse;
//! * NBOP: polarization prep, then per cycle an optional flush pulse, two
//!   1762 nm π-pulses |S, F, ±1> → |D5/2, F, ∓1>, and a 614 nm deshelve.
//!
//! With every imperfection set to zero and the initial error in
//! |S, F, ±1>, both cycles remove the ±1 error and return a third of it to
//! |0>, so the error contracts by exactly 2/3 per cycle.

use std::collections::HashMap;
use std::sync::Arc;

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::species::{enumerate_sublevels, Manifold, SpeciesParams, ZeemanState};

/// Normalization tolerance accepted on input populations.
pub const NORMALIZATION_TOLERANCE: f64 = 1e-9;

/// Indexed set of sublevels shared by population vectors and matrices.
#[derive(Debug, Clone, PartialEq)]
pub struct StateSpace {
    states: Vec<ZeemanState>,
    index: HashMap<ZeemanState, usize>,
}

impl StateSpace {
    pub fn new(states: Vec<ZeemanState>) -> Self {
        let index = states.iter().enumerate().map(|(i, s)| (*s, i)).collect();
        StateSpace { states, index }
    }

    /// S1/2 plus D5/2 where the species models its metastable structure.
    pub fn for_species(species: &SpeciesParams) -> Result<Self> {
        let manifolds: &[Manifold] = if species.has_metastable_d() {
            &[Manifold::S12, Manifold::D52]
        } else {
            &[Manifold::S12]
        };
        Ok(StateSpace::new(enumerate_sublevels(species, manifolds)?))
    }

    pub fn len(&self) -> usize {
        self.states.len()
    }

    pub fn is_empty(&self) -> bool {
        self.states.is_empty()
    }

    pub fn states(&self) -> &[ZeemanState] {
        &self.states
    }

    pub fn index_of(&self, state: &ZeemanState) -> Result<usize> {
        self.index
            .get(state)
            .copied()
            .ok_or_else(|| Error::MissingSublevel(state.to_string()))
    }

    fn indices_where(&self, pred: impl Fn(&ZeemanState) -> bool) -> Vec<usize> {
        (0..self.states.len()).filter(|&i| pred(&self.states[i])).collect()
    }
}

/// Probability distribution over a [`StateSpace`].
#[derive(Debug, Clone, PartialEq)]
pub struct PopulationVector {
    space: Arc<StateSpace>,
    probs: Vec<f64>,
}

impl PopulationVector {
    pub fn from_probs(space: Arc<StateSpace>, probs: Vec<f64>) -> Result<Self> {
        if probs.len() != space.len() {
            return Err(Error::invalid(
                "probs",
                format!("{} entries for {} sublevels", probs.len(), space.len()),
            ));
        }
        if probs.iter().any(|p| !(p.is_finite() && *p >= 0.0)) {
            return Err(Error::invalid("probs", "entries must be finite and non-negative"));
        }
        let pop = PopulationVector { space, probs };
        if (pop.total() - 1.0).abs() > NORMALIZATION_TOLERANCE {
            return Err(Error::invalid("probs", format!("sum {} is not 1", pop.total())));
        }
        Ok(pop)
    }

    pub fn pure(space: Arc<StateSpace>, state: &ZeemanState) -> Result<Self> {
        let mut probs = vec![0.0; space.len()];
        probs[space.index_of(state)?] = 1.0;
        Ok(PopulationVector { space, probs })
    }

    /// `1 - error` in `target`, with `error` split evenly over `spread`.
    pub fn with_error(
        space: Arc<StateSpace>,
        target: &ZeemanState,
        error: f64,
        spread: &[ZeemanState],
    ) -> Result<Self> {
        if !(0.0..=1.0).contains(&error) {
            return Err(Error::invalid("error", format!("{error} outside [0, 1]")));
        }
        if spread.is_empty() || spread.contains(target) {
            return Err(Error::invalid(
                "spread",
                "must be non-empty and exclude the target sublevel",
            ));
        }
        let mut probs = vec![0.0; space.len()];
        probs[space.index_of(target)?] = 1.0 - error;
        for s in spread {
            probs[space.index_of(s)?] += error / spread.len() as f64;
        }
        Ok(PopulationVector { space, probs })
    }

    /// Equal weight on every S1/2 sublevel.
    pub fn uniform_ground(space: Arc<StateSpace>) -> Result<Self> {
        let ground = space.indices_where(|s| s.manifold == Manifold::S12);
        if ground.is_empty() {
            return Err(Error::MissingSublevel("S1/2".into()));
        }
        let mut probs = vec![0.0; space.len()];
        for &i in &ground {
            probs[i] = 1.0 / ground.len() as f64;
        }
        Ok(PopulationVector { space, probs })
    }

    pub fn space(&self) -> &Arc<StateSpace> {
        &self.space
    }

    pub fn probs(&self) -> &[f64] {
        &self.probs
    }

    pub fn get(&self, state: &ZeemanState) -> f64 {
        self.space.index.get(state).map_or(0.0, |&i| self.probs[i])
    }

    pub fn total(&self) -> f64 {
        self.probs.iter().sum()
    }

    pub fn iter(&self) -> impl Iterator<Item = (&ZeemanState, f64)> {
        self.space.states.iter().zip(self.probs.iter().copied())
    }

    fn apply_matrix(&self, matrix: &DMatrix<f64>) -> PopulationVector {
        let row = DVector::from_column_slice(&self.probs);
        let next = matrix.tr_mul(&row);
        PopulationVector {
            space: Arc::clone(&self.space),
            probs: next.iter().copied().collect(),
        }
    }
}

/// Where the polarization-prep residual ends up.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ResidualSpread {
    /// Evenly over every non-qubit S1/2 sublevel.
    #[default]
    Uniform,
    /// Evenly over the non-qubit sublevels of the lower hyperfine manifold.
    LowerManifold,
}

/// One pulse of a preparation sequence, as a stochastic map.
#[derive(Debug, Clone, PartialEq)]
pub enum ProtocolStep {
    /// Broadband 493 nm flush: empties the upper S1/2 manifold evenly into
    /// the lower one. `leak_prob_qubit` of |0> ends the pulse spread over
    /// the non-qubit lower sublevels.
    FlushPulse { leak_prob_qubit: f64 },
    /// Microwave π-pulses exchanging each (lower, upper) pair.
    MicrowavePi {
        targets: Vec<(ZeemanState, ZeemanState)>,
        infidelity: f64,
    },
    /// 1762 nm π-pulses exchanging each (ground, D5/2) pair. A fraction
    /// `off_resonant_qubit_leak` of |0> is shelved into the target D levels.
    ShelvePi1762 {
        targets: Vec<(ZeemanState, ZeemanState)>,
        infidelity: f64,
        off_resonant_qubit_leak: f64,
    },
    /// 614 nm deshelve with sideband marching: all D5/2 population ends in
    /// the lower S1/2 manifold, evenly over mF. `branch_f1` is the part that
    /// gets there on the first decay.
    Deshelve614 { branch_f1: f64 },
    /// Polarization-limited pumping of the ground manifold into |0>.
    PolarizationPump {
        residual_error: f64,
        spread: ResidualSpread,
    },
    /// |0> ↔ |1> transfer pulse.
    TransferPi { infidelity: f64 },
}

fn check_probability(field: &str, p: f64) -> Result<()> {
    if (0.0..=1.0).contains(&p) {
        Ok(())
    } else {
        Err(Error::invalid(field, format!("{p} outside [0, 1]")))
    }
}

fn swap_pairs(
    m: &mut DMatrix<f64>,
    space: &StateSpace,
    targets: &[(ZeemanState, ZeemanState)],
    infidelity: f64,
) -> Result<Vec<(usize, usize)>> {
    let mut seen = Vec::new();
    let mut pairs = Vec::with_capacity(targets.len());
    for (a, b) in targets {
        let (ia, ib) = (space.index_of(a)?, space.index_of(b)?);
        if ia == ib || seen.contains(&ia) || seen.contains(&ib) {
            return Err(Error::invalid("targets", format!("overlapping pair {a} ↔ {b}")));
        }
        seen.extend([ia, ib]);
        pairs.push((ia, ib));
    }
    for &(ia, ib) in &pairs {
        for (src, dst) in [(ia, ib), (ib, ia)] {
            m[(src, src)] = infidelity;
            m[(src, dst)] = 1.0 - infidelity;
        }
    }
    Ok(pairs)
}

impl ProtocolStep {
    pub fn is_flush(&self) -> bool {
        matches!(self, ProtocolStep::FlushPulse { .. })
    }

    /// Row-stochastic transition matrix of this step over `space`.
    pub fn transition_matrix(
        &self,
        space: &StateSpace,
        species: &SpeciesParams,
    ) -> Result<DMatrix<f64>> {
        let n = space.len();
        let mut m = DMatrix::<f64>::identity(n, n);
        let zero = space.index_of(&species.qubit_zero())?;
        let lower_f = species.lower_f();
        let upper_f = species.upper_f();
        let lower = space.indices_where(|s| s.manifold == Manifold::S12 && s.f == lower_f);
        let lower_non_qubit: Vec<usize> = lower.iter().copied().filter(|&i| i != zero).collect();

        match self {
            ProtocolStep::FlushPulse { leak_prob_qubit } => {
                check_probability("leak_prob_qubit", *leak_prob_qubit)?;
                let upper = space.indices_where(|s| s.manifold == Manifold::S12 && s.f == upper_f);
                for &src in &upper {
                    m[(src, src)] = 0.0;
                    for &dst in &lower {
                        m[(src, dst)] = 1.0 / lower.len() as f64;
                    }
                }
                if *leak_prob_qubit > 0.0 {
                    m[(zero, zero)] = 1.0 - leak_prob_qubit;
                    for &dst in &lower_non_qubit {
                        m[(zero, dst)] = leak_prob_qubit / lower_non_qubit.len() as f64;
                    }
                }
            }
            ProtocolStep::MicrowavePi {
                targets,
                infidelity,
            } => {
                check_probability("infidelity", *infidelity)?;
                swap_pairs(&mut m, space, targets, *infidelity)?;
            }
            ProtocolStep::ShelvePi1762 {
                targets,
                infidelity,
                off_resonant_qubit_leak,
            } => {
                check_probability("infidelity", *infidelity)?;
                check_probability("off_resonant_qubit_leak", *off_resonant_qubit_leak)?;
                let pairs = swap_pairs(&mut m, space, targets, *infidelity)?;
                if *off_resonant_qubit_leak > 0.0 {
                    if pairs.iter().any(|&(a, b)| a == zero || b == zero) {
                        return Err(Error::invalid(
                            "off_resonant_qubit_leak",
                            "the qubit state is itself a target",
                        ));
                    }
                    m[(zero, zero)] = 1.0 - off_resonant_qubit_leak;
                    for &(_, upper) in &pairs {
                        m[(zero, upper)] = off_resonant_qubit_leak / pairs.len() as f64;
                    }
                }
            }
            ProtocolStep::Deshelve614 { branch_f1 } => {
                check_probability("branch_f1", *branch_f1)?;
                if *branch_f1 == 0.0 {
                    return Err(Error::invalid(
                        "branch_f1",
                        "zero direct branching never returns population",
                    ));
                }
                let shelved = space.indices_where(|s| s.manifold == Manifold::D52);
                if shelved.is_empty() {
                    return Err(Error::MissingSublevel("D5/2".into()));
                }
                // Direct branch b plus marched remainder (1 - b) both land in
                // the lower ground manifold, so the collapsed map is b-independent.
                for &src in &shelved {
                    m[(src, src)] = 0.0;
                    for &dst in &lower {
                        m[(src, dst)] = 1.0 / lower.len() as f64;
                    }
                }
            }
            ProtocolStep::PolarizationPump {
                residual_error,
                spread,
            } => {
                check_probability("residual_error", *residual_error)?;
                let ground = space.indices_where(|s| s.manifold == Manifold::S12);
                let sinks: Vec<usize> = match spread {
                    ResidualSpread::Uniform => {
                        ground.iter().copied().filter(|&i| i != zero).collect()
                    }
                    ResidualSpread::LowerManifold => lower_non_qubit.clone(),
                };
                for &src in &ground {
                    for j in 0..n {
                        m[(src, j)] = 0.0;
                    }
                    m[(src, zero)] = 1.0 - residual_error;
                    for &dst in &sinks {
                        m[(src, dst)] += residual_error / sinks.len() as f64;
                    }
                }
            }
            ProtocolStep::TransferPi { infidelity } => {
                check_probability("infidelity", *infidelity)?;
                swap_pairs(
                    &mut m,
                    space,
                    &[(species.qubit_zero(), species.qubit_one())],
                    *infidelity,
                )?;
            }
        }
        Ok(m)
    }
}

/// Applies one step to a normalized population.
pub fn apply_step(
    pop: &PopulationVector,
    step: &ProtocolStep,
    species: &SpeciesParams,
) -> Result<PopulationVector> {
    if (pop.total() - 1.0).abs() > NORMALIZATION_TOLERANCE {
        return Err(Error::invalid("pop", format!("sum {} is not 1", pop.total())));
    }
    let m = step.transition_matrix(&pop.space, species)?;
    Ok(pop.apply_matrix(&m))
}

/// A step with its duration, which is reporting metadata only.
#[derive(Debug, Clone, PartialEq)]
pub struct Pulse {
    pub step: ProtocolStep,
    pub duration_us: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Protocol {
    pub name: String,
    /// Applied once, before the first cycle.
    pub preamble: Vec<Pulse>,
    /// Applied `cycles` times.
    pub cycle: Vec<Pulse>,
    pub cycles: u32,
    /// Per-cycle switch for the flush pulses; missing entries mean "on".
    pub flush_mask: Vec<bool>,
}

impl Protocol {
    fn flush_on(&self, cycle: u32) -> bool {
        self.flush_mask.get(cycle as usize).copied().unwrap_or(true)
    }

    /// Steps executed in cycle `cycle` (0-based), honoring the flush mask.
    pub fn cycle_steps(&self, cycle: u32) -> impl Iterator<Item = &Pulse> {
        let flush = self.flush_on(cycle);
        self.cycle.iter().filter(move |p| flush || !p.step.is_flush())
    }

    pub fn total_duration_us(&self) -> f64 {
        let pre: f64 = self.preamble.iter().map(|p| p.duration_us).sum();
        let cycles: f64 = (0..self.cycles)
            .map(|c| self.cycle_steps(c).map(|p| p.duration_us).sum::<f64>())
            .sum();
        pre + cycles
    }

    fn matrix_of<'a>(
        pulses: impl Iterator<Item = &'a Pulse>,
        space: &StateSpace,
        species: &SpeciesParams,
    ) -> Result<DMatrix<f64>> {
        let n = space.len();
        let mut acc = DMatrix::<f64>::identity(n, n);
        for pulse in pulses {
            acc *= pulse.step.transition_matrix(space, species)?;
        }
        Ok(acc)
    }

    /// Transition matrix of the whole of cycle `cycle`.
    pub fn cycle_matrix(
        &self,
        cycle: u32,
        space: &StateSpace,
        species: &SpeciesParams,
    ) -> Result<DMatrix<f64>> {
        Protocol::matrix_of(self.cycle_steps(cycle), space, species)
    }
}

/// Canonical durations in µs.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct StepDurations {
    pub polarization_us: f64,
    pub flush_us: f64,
    pub microwave_pi_us: f64,
    pub shelve_pi_us: [f64; 2],
    pub deshelve_us: f64,
}

impl Default for StepDurations {
    fn default() -> Self {
        StepDurations {
            polarization_us: 40.0,
            flush_us: 1.0,
            microwave_pi_us: 50.0,
            shelve_pi_us: [45.0, 55.0],
            deshelve_us: 4.0,
        }
    }
}

/// Imperfections and timing of the built-in sequences.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PulseParams {
    /// Off-resonant loss of |0> per flush pulse.
    pub flush_leak: f64,
    pub microwave_infidelity: f64,
    pub shelve_infidelity: f64,
    pub shelve_qubit_leak: f64,
    pub polarization_residual: f64,
    pub residual_spread: ResidualSpread,
    /// Composite |0> → |1> pulse; used when preparing |1>, not during prep.
    pub transfer_infidelity: f64,
    pub durations: StepDurations,
}

impl Default for PulseParams {
    fn default() -> Self {
        PulseParams {
            flush_leak: 1e-6,
            microwave_infidelity: 0.0,
            shelve_infidelity: 0.0,
            shelve_qubit_leak: 0.0,
            polarization_residual: 7e-3,
            residual_spread: ResidualSpread::Uniform,
            transfer_infidelity: 5.4e-5,
            durations: StepDurations::default(),
        }
    }
}

impl PulseParams {
    /// Perfect cycles; the polarization residual is kept and placed in the
    /// lower-manifold non-qubit sublevels.
    pub fn ideal() -> Self {
        PulseParams {
            flush_leak: 0.0,
            microwave_infidelity: 0.0,
            shelve_infidelity: 0.0,
            shelve_qubit_leak: 0.0,
            residual_spread: ResidualSpread::LowerManifold,
            transfer_infidelity: 0.0,
            ..PulseParams::default()
        }
    }

    pub fn validate(&self) -> Result<()> {
        for (field, p) in [
            ("flush_leak", self.flush_leak),
            ("microwave_infidelity", self.microwave_infidelity),
            ("shelve_infidelity", self.shelve_infidelity),
            ("shelve_qubit_leak", self.shelve_qubit_leak),
            ("polarization_residual", self.polarization_residual),
            ("transfer_infidelity", self.transfer_infidelity),
        ] {
            check_probability(field, p)?;
        }
        let d = &self.durations;
        let all = [
            d.polarization_us,
            d.flush_us,
            d.microwave_pi_us,
            d.shelve_pi_us[0],
            d.shelve_pi_us[1],
            d.deshelve_us,
        ];
        if all.iter().any(|t| !(t.is_finite() && *t >= 0.0)) {
            return Err(Error::invalid("durations", "must be finite and non-negative"));
        }
        Ok(())
    }
}

fn ground(f: u32, m_f: i32) -> ZeemanState {
    ZeemanState {
        manifold: Manifold::S12,
        f,
        m_f,
    }
}

fn polarization_pulse(params: &PulseParams) -> Pulse {
    Pulse {
        step: ProtocolStep::PolarizationPump {
            residual_error: params.polarization_residual,
            spread: params.residual_spread,
        },
        duration_us: params.durations.polarization_us,
    }
}

fn flush_pulse(params: &PulseParams) -> Pulse {
    Pulse {
        step: ProtocolStep::FlushPulse {
            leak_prob_qubit: params.flush_leak,
        },
        duration_us: params.durations.flush_us,
    }
}

/// Polarization-limited preparation alone.
pub fn build_polarization_prep(residual: f64, spread: ResidualSpread) -> Protocol {
    let params = PulseParams {
        polarization_residual: residual,
        residual_spread: spread,
        ..PulseParams::default()
    };
    Protocol {
        name: "polarization".into(),
        preamble: vec![polarization_pulse(&params)],
        cycle: Vec::new(),
        cycles: 0,
        flush_mask: Vec::new(),
    }
}

/// Microwave-assisted optical pumping: per cycle π(+1), π(−1), flush.
pub fn build_maop(cycles: u32, params: &PulseParams, species: &SpeciesParams) -> Protocol {
    let (lo, hi) = (species.lower_f(), species.upper_f());
    let microwave = |m_f: i32| Pulse {
        step: ProtocolStep::MicrowavePi {
            targets: vec![(ground(lo, m_f), ground(hi, m_f))],
            infidelity: params.microwave_infidelity,
        },
        duration_us: params.durations.microwave_pi_us,
    };
    Protocol {
        name: "maop".into(),
        preamble: vec![polarization_pulse(params)],
        cycle: vec![microwave(1), microwave(-1), flush_pulse(params)],
        cycles,
        flush_mask: vec![true; cycles as usize],
    }
}

/// Narrow-band optical pumping: per cycle optional flush, two 1762 nm
/// π-pulses |S, F, ±1> → |D5/2, F, ∓1>, then the 614 nm deshelve.
pub fn build_nbop(
    cycles: u32,
    flush_mask: Vec<bool>,
    params: &PulseParams,
    species: &SpeciesParams,
) -> Protocol {
    let lo = species.lower_f();
    let shelve = |m_f: i32, duration_us: f64| Pulse {
        step: ProtocolStep::ShelvePi1762 {
            targets: vec![(
                ground(lo, m_f),
                ZeemanState {
                    manifold: Manifold::D52,
                    f: lo,
                    m_f: -m_f,
                },
            )],
            infidelity: params.shelve_infidelity,
            off_resonant_qubit_leak: params.shelve_qubit_leak,
        },
        duration_us,
    };
    let [first_us, second_us] = params.durations.shelve_pi_us;
    Protocol {
        name: "nbop".into(),
        preamble: vec![polarization_pulse(params)],
        cycle: vec![
            flush_pulse(params),
            shelve(1, first_us),
            shelve(-1, second_us),
            Pulse {
                step: ProtocolStep::Deshelve614 {
                    branch_f1: species.deshelve_branch_f1.unwrap_or(1.0),
                },
                duration_us: params.durations.deshelve_us,
            },
        ],
        cycles,
        flush_mask,
    }
}

/// Mask with the flush pulse on in the first `flush_cycles` of `cycles`.
pub fn flush_first(cycles: u32, flush_cycles: u32) -> Vec<bool> {
    (0..cycles).map(|c| c < flush_cycles).collect()
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CyclePoint {
    pub cycle: u32,
    pub prep_error: f64,
}

#[derive(Debug, Clone)]
pub struct PrepRun {
    /// Point 0 is after the preamble, point n after n cycles.
    pub series: Vec<CyclePoint>,
    pub final_pop: PopulationVector,
}

/// Deterministic evolution of `init` through `protocol`.
pub fn evolve(
    protocol: &Protocol,
    species: &SpeciesParams,
    init: &PopulationVector,
) -> Result<PrepRun> {
    let space = Arc::clone(init.space());
    let zero = space.index_of(&species.qubit_zero())?;
    // Summing the other sublevels keeps full relative precision at small errors.
    let point = |cycle: u32, pop: &PopulationVector| CyclePoint {
        cycle,
        prep_error: pop
            .probs
            .iter()
            .enumerate()
            .filter(|&(i, _)| i != zero)
            .map(|(_, p)| p)
            .sum(),
    };

    let mut pop = init.clone();
    for pulse in &protocol.preamble {
        pop = apply_step(&pop, &pulse.step, species)?;
    }
    let mut series = Vec::with_capacity(protocol.cycles as usize + 1);
    series.push(point(0, &pop));

    // Cycles sharing a flush setting share a matrix.
    let mut cache: [Option<DMatrix<f64>>; 2] = [None, None];
    for c in 0..protocol.cycles {
        let slot = usize::from(protocol.flush_on(c));
        if cache[slot].is_none() {
            cache[slot] = Some(protocol.cycle_matrix(c, &space, species)?);
        }
        pop = pop.apply_matrix(cache[slot].as_ref().expect("filled above"));
        series.push(point(c + 1, &pop));
    }
    Ok(PrepRun {
        series,
        final_pop: pop,
    })
}

/// Preparation error after each cycle, `1 − P(|0>)`, evaluated as the
/// population outside |0>.
pub fn run_prep(
    protocol: &Protocol,
    species: &SpeciesParams,
    init: &PopulationVector,
) -> Result<Vec<CyclePoint>> {
    evolve(protocol, species, init).map(|run| run.series)
}

/// Stationary population of one flushed cycle repeated forever, from a
/// direct linear solve of `π M = π`, `Σπ = 1` over the states reachable
/// from |0>.
pub fn cycle_fixed_point(
    protocol: &Protocol,
    species: &SpeciesParams,
    space: Arc<StateSpace>,
) -> Result<PopulationVector> {
    let m = Protocol::matrix_of(protocol.cycle.iter(), &space, species)?;
    // Sublevels the cycle never touches are absorbing on their own and
    // would make the full system singular.
    let start = space.index_of(&species.qubit_zero())?;
    let mut reach = vec![false; space.len()];
    reach[start] = true;
    let mut stack = vec![start];
    while let Some(i) = stack.pop() {
        for j in 0..space.len() {
            if m[(i, j)] > 0.0 && !reach[j] {
                reach[j] = true;
                stack.push(j);
            }
        }
    }
    let idx: Vec<usize> = (0..space.len()).filter(|&i| reach[i]).collect();
    let n = idx.len();
    let mut a = DMatrix::<f64>::from_fn(n, n, |r, c| m[(idx[c], idx[r])]);
    a -= DMatrix::<f64>::identity(n, n);
    for j in 0..n {
        a[(n - 1, j)] = 1.0;
    }
    let mut b = DVector::<f64>::zeros(n);
    b[n - 1] = 1.0;
    let solution = a
        .lu()
        .solve(&b)
        .ok_or_else(|| Error::ModelUndefined("cycle map has no unique fixed point".into()))?;
    let mut probs = vec![0.0; space.len()];
    for (k, &i) in idx.iter().enumerate() {
        probs[i] = solution[k].max(0.0);
    }
    Ok(PopulationVector { space, probs })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::species::{builtin_species, find_species};
    use proptest::prelude::*;

    fn ba() -> SpeciesParams {
        find_species(&builtin_species(), "137Ba+").unwrap().clone()
    }

    fn space() -> Arc<StateSpace> {
        Arc::new(StateSpace::for_species(&ba()).unwrap())
    }

    fn d52(f: u32, m_f: i32) -> ZeemanState {
        ZeemanState {
            manifold: Manifold::D52,
            f,
            m_f,
        }
    }

    fn pm_one_error(eps: f64) -> PopulationVector {
        PopulationVector::with_error(space(), &ground(1, 0), eps, &[ground(1, -1), ground(1, 1)])
            .unwrap()
    }

    fn no_preamble(mut p: Protocol) -> Protocol {
        p.preamble.clear();
        p
    }

    #[test]
    fn flush_spreads_upper_manifold_evenly() {
        let pop = PopulationVector::pure(space(), &ground(2, -2)).unwrap();
        let out = apply_step(&pop, &ProtocolStep::FlushPulse { leak_prob_qubit: 0.0 }, &ba()).unwrap();
        for m in -1..=1 {
            assert!((out.get(&ground(1, m)) - 1.0 / 3.0).abs() < 1e-15);
        }
        assert!((out.total() - 1.0).abs() < 1e-12);
    }

    #[test]
    fn flush_leak_moves_qubit_population() {
        let pop = PopulationVector::pure(space(), &ground(1, 0)).unwrap();
        let out = apply_step(&pop, &ProtocolStep::FlushPulse { leak_prob_qubit: 0.1 }, &ba()).unwrap();
        assert!((out.get(&ground(1, 0)) - 0.9).abs() < 1e-15);
        assert!((out.get(&ground(1, 1)) - 0.05).abs() < 1e-15);
    }

    #[test]
    fn perfect_microwave_pulse_transfers_fully() {
        let pop = PopulationVector::pure(space(), &ground(1, 1)).unwrap();
        let step = ProtocolStep::MicrowavePi {
            targets: vec![(ground(1, 1), ground(2, 1))],
            infidelity: 0.0,
        };
        let out = apply_step(&pop, &step, &ba()).unwrap();
        assert_eq!(out.get(&ground(2, 1)), 1.0);
    }

    #[test]
    fn deshelve_returns_everything_to_lower_manifold() {
        let pop = PopulationVector::from_probs(space(), {
            let mut p = vec![0.0; 32];
            let s = space();
            p[s.index_of(&d52(1, -1)).unwrap()] = 0.5;
            p[s.index_of(&d52(1, 1)).unwrap()] = 0.5;
            p
        })
        .unwrap();
        let out = apply_step(&pop, &ProtocolStep::Deshelve614 { branch_f1: 0.738 }, &ba()).unwrap();
        let lower: f64 = (-1..=1).map(|m| out.get(&ground(1, m))).sum();
        assert!((lower - 1.0).abs() < 1e-15);
        assert!((-2..=2).all(|m| out.get(&ground(2, m)) == 0.0));
    }

    #[test]
    fn deshelve_needs_positive_branching() {
        let pop = PopulationVector::pure(space(), &d52(1, 1)).unwrap();
        assert!(apply_step(&pop, &ProtocolStep::Deshelve614 { branch_f1: 0.0 }, &ba()).is_err());
    }

    #[test]
    fn missing_sublevels_are_errors() {
        let be = find_species(&builtin_species(), "9Be+").unwrap().clone();
        let s = Arc::new(StateSpace::for_species(&be).unwrap());
        let pop = PopulationVector::pure(s, &ground(1, 0)).unwrap();
        let err = apply_step(&pop, &ProtocolStep::Deshelve614 { branch_f1: 0.5 }, &be);
        assert!(matches!(err, Err(Error::MissingSublevel(_))));
        let step = ProtocolStep::ShelvePi1762 {
            targets: vec![(ground(1, 1), d52(1, -1))],
            infidelity: 0.0,
            off_resonant_qubit_leak: 0.0,
        };
        assert!(matches!(apply_step(&pop, &step, &be), Err(Error::MissingSublevel(_))));
    }

    #[test]
    fn unnormalized_input_is_rejected() {
        let mut pop = PopulationVector::pure(space(), &ground(1, 0)).unwrap();
        pop.probs[0] = 0.5;
        assert!(apply_step(&pop, &ProtocolStep::TransferPi { infidelity: 0.0 }, &ba()).is_err());
    }

    #[test]
    fn transfer_pulse_with_infidelity() {
        let pop = PopulationVector::pure(space(), &ground(1, 0)).unwrap();
        let out = apply_step(&pop, &ProtocolStep::TransferPi { infidelity: 5.4e-5 }, &ba()).unwrap();
        assert!((out.get(&ground(2, 0)) - (1.0 - 5.4e-5)).abs() < 1e-15);
    }

    #[test]
    fn polarization_pump_spreads_residual() {
        let pop = PopulationVector::uniform_ground(space()).unwrap();
        let step = ProtocolStep::PolarizationPump {
            residual_error: 7e-3,
            spread: ResidualSpread::Uniform,
        };
        let out = apply_step(&pop, &step, &ba()).unwrap();
        assert!((out.get(&ground(1, 0)) - (1.0 - 7e-3)).abs() < 1e-15);
        assert!((out.get(&ground(2, 2)) - 1e-3).abs() < 1e-15);
    }

    #[test]
    fn zero_residual_polarization_is_pure() {
        let protocol = build_polarization_prep(0.0, ResidualSpread::Uniform);
        let init = PopulationVector::uniform_ground(space()).unwrap();
        let run = evolve(&protocol, &ba(), &init).unwrap();
        assert_eq!(run.final_pop.get(&ground(1, 0)), 1.0);
        assert_eq!(run.series.len(), 1);
    }

    #[test]
    fn zero_cycle_maop_is_polarization_only() {
        let p = build_maop(0, &PulseParams::default(), &ba());
        assert_eq!(p.cycles, 0);
        assert_eq!(p.preamble.len(), 1);
        let init = PopulationVector::uniform_ground(space()).unwrap();
        let series = run_prep(&p, &ba(), &init).unwrap();
        assert_eq!(series.len(), 1);
        assert!((series[0].prep_error - 7e-3).abs() < 1e-15);
    }

    #[test]
    fn nbop_schedule_drops_final_flushes() {
        let p = build_nbop(35, flush_first(35, 30), &PulseParams::default(), &ba());
        assert_eq!(p.cycles, 35);
        let flushes = |c| p.cycle_steps(c).filter(|s| s.step.is_flush()).count();
        assert!((0..30).all(|c| flushes(c) == 1));
        assert!((30..35).all(|c| flushes(c) == 0));
        assert_eq!(p.total_duration_us(), 40.0 + 35.0 * 104.0 + 30.0);
    }

    #[test]
    fn ideal_cycles_contract_by_two_thirds() {
        let eps0 = 7e-3;
        let init = pm_one_error(eps0);
        let params = PulseParams::ideal();
        for protocol in [
            build_maop(35, &params, &ba()),
            build_nbop(35, flush_first(35, 30), &params, &ba()),
        ] {
            let series = run_prep(&no_preamble(protocol), &ba(), &init).unwrap();
            for p in &series {
                let expected = eps0 * (2.0f64 / 3.0).powi(p.cycle as i32);
                assert!((p.prep_error - expected).abs() < 1e-12, "{p:?}");
            }
        }
    }

    #[test]
    fn first_maop_cycle_with_uniform_residual_contracts_by_16_of_21() {
        let mut params = PulseParams::ideal();
        params.residual_spread = ResidualSpread::Uniform;
        let init = PopulationVector::uniform_ground(space()).unwrap();
        let series = run_prep(&build_maop(2, &params, &ba()), &ba(), &init).unwrap();
        let r1 = series[1].prep_error / series[0].prep_error;
        let r2 = series[2].prep_error / series[1].prep_error;
        assert!((r1 - 16.0 / 21.0).abs() < 1e-12);
        assert!((r2 - 2.0 / 3.0).abs() < 1e-12);
    }

    /// Hand-derived one-cycle affine maps on the error ε with flush leak p:
    /// MAOP (microwaves, then flush): ε' = (2/3)ε + p(1 − ε)
    /// NBOP (flush, shelve, deshelve): ε' = (2/3)(ε + p(1 − ε))
    #[test]
    fn leak_plateau_matches_affine_oracle_and_linear_solve() {
        let p = 1e-4;
        let params = PulseParams {
            flush_leak: p,
            ..PulseParams::ideal()
        };
        type Closed = fn(f64, f64) -> f64;
        let cases: [(Protocol, Closed); 2] = [
            (build_maop(200, &params, &ba()), |e, p| 2.0 / 3.0 * e + p * (1.0 - e)),
            (
                build_nbop(200, vec![true; 200], &params, &ba()),
                |e, p| 2.0 / 3.0 * (e + p * (1.0 - e)),
            ),
        ];
        for (protocol, affine) in cases {
            let protocol = no_preamble(protocol);
            let series = run_prep(&protocol, &ba(), &pm_one_error(7e-3)).unwrap();
            let mut e = 7e-3;
            for point in &series[1..] {
                e = affine(e, p);
                assert!((point.prep_error - e).abs() < 1e-13, "{} vs {e}", point.prep_error);
            }
            let fixed = cycle_fixed_point(&protocol, &ba(), space()).unwrap();
            let eps_star = 1.0 - fixed.get(&ground(1, 0));
            assert!(eps_star > 0.0);
            assert!((series.last().unwrap().prep_error - eps_star).abs() < 1e-10);
        }
    }

    proptest! {
        #[test]
        fn every_step_is_row_stochastic(
            leak in 0.0f64..1.0,
            inf in 0.0f64..1.0,
            resid in 0.0f64..1.0,
        ) {
            let s = space();
            let pm = [(ground(1, 1), d52(1, -1)), (ground(1, -1), d52(1, 1))];
            let steps = [
                ProtocolStep::FlushPulse { leak_prob_qubit: leak },
                ProtocolStep::MicrowavePi { targets: vec![(ground(1, 1), ground(2, 1))], infidelity: inf },
                ProtocolStep::ShelvePi1762 { targets: pm.to_vec(), infidelity: inf, off_resonant_qubit_leak: leak },
                ProtocolStep::Deshelve614 { branch_f1: 0.738 },
                ProtocolStep::PolarizationPump { residual_error: resid, spread: ResidualSpread::Uniform },
                ProtocolStep::PolarizationPump { residual_error: resid, spread: ResidualSpread::LowerManifold },
                ProtocolStep::TransferPi { infidelity: inf },
            ];
            for step in &steps {
                let m = step.transition_matrix(&s, &ba()).unwrap();
                for i in 0..s.len() {
                    let row: f64 = m.row(i).iter().sum();
                    prop_assert!((row - 1.0).abs() < 1e-12);
                    prop_assert!(m.row(i).iter().all(|x| *x >= 0.0));
                }
            }
        }

        #[test]
        fn ideal_error_never_increases(weights in prop::collection::vec(0.0f64..1.0, 32)) {
            let total: f64 = weights.iter().sum();
            prop_assume!(total > 1e-6);
            let init = PopulationVector::from_probs(
                space(),
                weights.iter().map(|w| w / total).collect(),
            ).unwrap();
            let params = PulseParams::ideal();
            for protocol in [
                build_maop(10, &params, &ba()),
                build_nbop(10, flush_first(10, 7), &params, &ba()),
            ] {
                let series = run_prep(&no_preamble(protocol), &ba(), &init).unwrap();
                for w in series.windows(2) {
                    prop_assert!(w[1].prep_error <= w[0].prep_error + 1e-15);
                }
            }
        }
    }
}
