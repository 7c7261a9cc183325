// Copyright 2026 The ionspam Authors
// SPDX-License-Identifier: Apache-2.0

//! Per-isotope atomic constants and hyperfine/Zeeman sublevel enumeration.
//!
//! Frequencies are stored as plain cyclic frequencies in Hz (Γ/2π, not Γ).
//! Every quantity derived from them here is a ratio of like frequencies, so
//! the 2π convention cancels.

use std::collections::BTreeSet;
use std::fmt;
use std::path::Path;
use std::str::FromStr;

use serde::{Deserialize, Deserializer, Serialize, Serializer};

use crate::error::{Error, Result};

/// Version written to and required from species data files.
pub const SPECIES_FORMAT_VERSION: u32 = 1;

/// Species data shipped with the crate; identical to [`builtin_species`].
pub const BUILTIN_SPECIES_TOML: &str = include_str!("../data/species.toml");

/// A positive half-integer nuclear spin, stored as twice its value.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct NuclearSpin(u32);

impl NuclearSpin {
    pub fn from_twice(twice: u32) -> Result<Self> {
        if twice % 2 == 0 {
            return Err(Error::invalid(
                "nuclear_spin",
                format!("{twice}/2 is not a half-integer"),
            ));
        }
        Ok(NuclearSpin(twice))
    }

    pub fn twice(self) -> u32 {
        self.0
    }

    pub fn value(self) -> f64 {
        f64::from(self.0) / 2.0
    }
}

impl fmt::Display for NuclearSpin {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}/2", self.0)
    }
}

impl FromStr for NuclearSpin {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let bad = || Error::invalid("nuclear_spin", format!("cannot parse `{s}` as k/2"));
        let (num, den) = s.trim().split_once('/').ok_or_else(bad)?;
        if den.trim() != "2" {
            return Err(bad());
        }
        let twice: u32 = num.trim().parse().map_err(|_| bad())?;
        NuclearSpin::from_twice(twice)
    }
}

impl Serialize for NuclearSpin {
    fn serialize<S: Serializer>(&self, serializer: S) -> std::result::Result<S::Ok, S::Error> {
        serializer.collect_str(self)
    }
}

impl<'de> Deserialize<'de> for NuclearSpin {
    fn deserialize<D: Deserializer<'de>>(deserializer: D) -> std::result::Result<Self, D::Error> {
        let s = String::deserialize(deserializer)?;
        s.parse().map_err(serde::de::Error::custom)
    }
}

/// Fine-structure manifolds that take part in preparation and readout.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum Manifold {
    #[serde(rename = "S1/2")]
    S12,
    #[serde(rename = "P1/2")]
    P12,
    #[serde(rename = "P3/2")]
    P32,
    #[serde(rename = "D3/2")]
    D32,
    #[serde(rename = "D5/2")]
    D52,
}

impl Manifold {
    pub const ALL: [Manifold; 5] = [
        Manifold::S12,
        Manifold::P12,
        Manifold::P32,
        Manifold::D32,
        Manifold::D52,
    ];

    /// Twice the electronic angular momentum J.
    pub fn twice_j(self) -> u32 {
        match self {
            Manifold::S12 | Manifold::P12 => 1,
            Manifold::P32 | Manifold::D32 => 3,
            Manifold::D52 => 5,
        }
    }

    pub fn label(self) -> &'static str {
        match self {
            Manifold::S12 => "S1/2",
            Manifold::P12 => "P1/2",
            Manifold::P32 => "P3/2",
            Manifold::D32 => "D3/2",
            Manifold::D52 => "D5/2",
        }
    }

    /// Allowed total angular momenta F = |J-I| ..= J+I.
    pub fn f_range(self, spin: NuclearSpin) -> std::ops::RangeInclusive<u32> {
        let (j2, i2) = (self.twice_j(), spin.twice());
        (j2.abs_diff(i2) / 2)..=((j2 + i2) / 2)
    }
}

impl fmt::Display for Manifold {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.label())
    }
}

impl FromStr for Manifold {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let key: String = s
            .chars()
            .filter(|c| !matches!(c, '/' | '_' | ' '))
            .collect::<String>()
            .to_ascii_uppercase();
        match key.as_str() {
            "S12" => Ok(Manifold::S12),
            "P12" => Ok(Manifold::P12),
            "P32" => Ok(Manifold::P32),
            "D32" => Ok(Manifold::D32),
            "D52" => Ok(Manifold::D52),
            _ => Err(Error::UnknownManifold(s.to_string())),
        }
    }
}

/// One magnetic sublevel |manifold, F, mF>.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct ZeemanState {
    pub manifold: Manifold,
    pub f: u32,
    pub m_f: i32,
}

impl ZeemanState {
    pub fn new(manifold: Manifold, f: u32, m_f: i32) -> Result<Self> {
        if m_f.unsigned_abs() > f {
            return Err(Error::invalid("m_f", format!("|{m_f}| exceeds F = {f}")));
        }
        Ok(ZeemanState { manifold, f, m_f })
    }

    /// Whether F is allowed for this manifold given the nuclear spin.
    pub fn is_consistent_with(&self, spin: NuclearSpin) -> bool {
        self.manifold.f_range(spin).contains(&self.f) && self.m_f.unsigned_abs() <= self.f
    }
}

impl fmt::Display for ZeemanState {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "|{}, F={}, mF={:+}>", self.manifold, self.f, self.m_f)
    }
}

/// Tabulated constants for one ion species.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SpeciesParams {
    pub name: String,
    pub nuclear_spin: NuclearSpin,
    /// Natural linewidth Γ/2π of the cycling transition.
    pub linewidth_hz: f64,
    /// Ground-state hyperfine splitting.
    pub hf_s_hz: f64,
    /// Excited P-state hyperfine splitting.
    pub hf_p_hz: f64,
    /// Branching P(F'+1) -> S(F+1).
    #[serde(deserialize_with = "de_fraction")]
    pub eta_up: f64,
    /// Branching P(F') -> S(F+1).
    #[serde(deserialize_with = "de_fraction")]
    pub eta_cross: f64,
    /// Flush branching used by the rate equations; falls back to `eta_up`.
    #[serde(
        default,
        skip_serializing_if = "Option::is_none",
        deserialize_with = "de_opt_fraction"
    )]
    pub eta_flush: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub d52_lifetime_s: Option<f64>,
    /// Fraction of P3/2, F=0 decays landing directly in S1/2, F=I-1/2.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub deshelve_branch_f1: Option<f64>,
}

#[derive(Deserialize)]
#[serde(untagged)]
enum FractionRepr {
    Number(f64),
    Text(String),
}

fn parse_fraction(text: &str) -> std::result::Result<f64, String> {
    match text.split_once('/') {
        Some((num, den)) => {
            let num: f64 = num.trim().parse().map_err(|_| format!("bad numerator in `{text}`"))?;
            let den: f64 = den.trim().parse().map_err(|_| format!("bad denominator in `{text}`"))?;
            if den == 0.0 {
                return Err(format!("zero denominator in `{text}`"));
            }
            Ok(num / den)
        }
        None => text.trim().parse().map_err(|_| format!("cannot parse `{text}` as a number")),
    }
}

fn de_fraction<'de, D: Deserializer<'de>>(deserializer: D) -> std::result::Result<f64, D::Error> {
    match FractionRepr::deserialize(deserializer)? {
        FractionRepr::Number(x) => Ok(x),
        FractionRepr::Text(s) => parse_fraction(&s).map_err(serde::de::Error::custom),
    }
}

fn de_opt_fraction<'de, D: Deserializer<'de>>(
    deserializer: D,
) -> std::result::Result<Option<f64>, D::Error> {
    de_fraction(deserializer).map(Some)
}

impl SpeciesParams {
    pub fn eta_flush(&self) -> f64 {
        self.eta_flush.unwrap_or(self.eta_up)
    }

    /// δ₋ = δ_HF,S − δ_HF,P.
    pub fn delta_minus_hz(&self) -> f64 {
        self.hf_s_hz - self.hf_p_hz
    }

    /// Whether metastable D and P3/2 structure is modeled for this species.
    pub fn has_metastable_d(&self) -> bool {
        self.d52_lifetime_s.is_some()
    }

    /// F of the lower ground hyperfine manifold (I − 1/2).
    pub fn lower_f(&self) -> u32 {
        (self.nuclear_spin.twice() - 1) / 2
    }

    pub fn upper_f(&self) -> u32 {
        self.nuclear_spin.twice().div_ceil(2)
    }

    /// Qubit |0> = |S1/2, F=I-1/2, mF=0>.
    pub fn qubit_zero(&self) -> ZeemanState {
        ZeemanState {
            manifold: Manifold::S12,
            f: self.lower_f(),
            m_f: 0,
        }
    }

    /// Qubit |1> = |S1/2, F=I+1/2, mF=0>.
    pub fn qubit_one(&self) -> ZeemanState {
        ZeemanState {
            manifold: Manifold::S12,
            f: self.upper_f(),
            m_f: 0,
        }
    }

    pub fn validate(&self) -> Result<()> {
        let ctx = |field: &str| format!("{}.{field}", self.name);
        if self.name.trim().is_empty() {
            return Err(Error::invalid("name", "must not be empty"));
        }
        for (field, value) in [
            ("linewidth_hz", self.linewidth_hz),
            ("hf_s_hz", self.hf_s_hz),
            ("hf_p_hz", self.hf_p_hz),
        ] {
            if !(value.is_finite() && value > 0.0) {
                return Err(Error::invalid(ctx(field), format!("{value} must be positive")));
            }
        }
        if let Some(tau) = self.d52_lifetime_s {
            if !(tau.is_finite() && tau > 0.0) {
                return Err(Error::invalid(ctx("d52_lifetime_s"), format!("{tau} must be positive")));
            }
        }
        let etas = [
            ("eta_up", Some(self.eta_up)),
            ("eta_cross", Some(self.eta_cross)),
            ("eta_flush", self.eta_flush),
            ("deshelve_branch_f1", self.deshelve_branch_f1),
        ];
        for (field, value) in etas {
            if let Some(eta) = value {
                if !(0.0..=1.0).contains(&eta) {
                    return Err(Error::invalid(ctx(field), format!("{eta} outside [0, 1]")));
                }
            }
        }
        if self.hf_s_hz <= self.hf_p_hz {
            return Err(Error::invalid(
                ctx("hf_p_hz"),
                format!(
                    "ground splitting {} Hz must exceed P splitting {} Hz",
                    self.hf_s_hz, self.hf_p_hz
                ),
            ));
        }
        Ok(())
    }
}

#[allow(clippy::too_many_arguments)]
fn row(
    name: &str,
    twice_i: u32,
    eta_up: f64,
    eta_cross: f64,
    linewidth_hz: f64,
    hf_s_hz: f64,
    hf_p_hz: f64,
    barium: bool,
) -> SpeciesParams {
    SpeciesParams {
        name: name.to_string(),
        nuclear_spin: NuclearSpin(twice_i),
        linewidth_hz,
        hf_s_hz,
        hf_p_hz,
        eta_up,
        eta_cross,
        eta_flush: None,
        d52_lifetime_s: barium.then_some(30.1),
        deshelve_branch_f1: barium.then_some(0.738),
    }
}

/// The seven tabulated I > 1/2 species, lightest first.
pub fn builtin_species() -> Vec<SpeciesParams> {
    vec![
        row("9Be+", 3, 1.0 / 2.0, 5.0 / 6.0, 22.4e6, 1.25e9, 0.194e9, false),
        row("25Mg+", 5, 4.0 / 9.0, 7.0 / 9.0, 42.4e6, 1.788e9, 0.307e9, false),
        row("43Ca+", 7, 5.0 / 12.0, 3.0 / 4.0, 22.4e6, 3.226e9, 0.581e9, false),
        row("87Sr+", 9, 2.0 / 5.0, 11.0 / 15.0, 21.5e6, 5.0e9, 0.89e9, false),
        row("135Ba+", 3, 1.0 / 2.0, 5.0 / 6.0, 20.1e6, 7.18e9, 1.33e9, true),
        row("137Ba+", 3, 1.0 / 2.0, 5.0 / 6.0, 20.1e6, 8.03e9, 1.49e9, true),
        row("173Yb+", 5, 4.0 / 9.0, 7.0 / 9.0, 19.7e6, 10.5e9, 1.85e9, false),
    ]
}

/// Looks a species up by name, ignoring case and a trailing `+`.
pub fn find_species<'a>(table: &'a [SpeciesParams], name: &str) -> Result<&'a SpeciesParams> {
    let key = |s: &str| s.trim().trim_end_matches('+').to_ascii_lowercase();
    let wanted = key(name);
    table
        .iter()
        .find(|s| key(&s.name) == wanted)
        .ok_or_else(|| Error::UnknownSpecies(name.to_string()))
}

/// Enumerates every (manifold, F, mF) sublevel of the requested manifolds,
/// sorted by manifold, then F, then mF.
pub fn enumerate_sublevels(
    species: &SpeciesParams,
    manifolds: &[Manifold],
) -> Result<Vec<ZeemanState>> {
    if manifolds.is_empty() {
        return Err(Error::EmptyManifoldSet);
    }
    let unique: BTreeSet<Manifold> = manifolds.iter().copied().collect();
    let mut states = Vec::new();
    for manifold in unique {
        let modeled = matches!(manifold, Manifold::S12 | Manifold::P12) || species.has_metastable_d();
        if !modeled {
            return Err(Error::UnsupportedManifold {
                species: species.name.clone(),
                manifold: manifold.to_string(),
            });
        }
        for f in manifold.f_range(species.nuclear_spin) {
            let f_signed = f as i32;
            states.extend((-f_signed..=f_signed).map(|m_f| ZeemanState { manifold, f, m_f }));
        }
    }
    Ok(states)
}

#[derive(Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct SpeciesFile {
    format_version: u32,
    #[serde(default)]
    species: Vec<SpeciesParams>,
}

/// Parses a species data file and validates every entry.
pub fn parse_species_toml(text: &str) -> Result<Vec<SpeciesParams>> {
    let file: SpeciesFile = toml::from_str(text).map_err(|e| Error::format("species file", e))?;
    if file.format_version != SPECIES_FORMAT_VERSION {
        return Err(Error::invalid(
            "format_version",
            format!(
                "unsupported version {} (expected {SPECIES_FORMAT_VERSION})",
                file.format_version
            ),
        ));
    }
    for s in &file.species {
        s.validate()?;
    }
    Ok(file.species)
}

pub fn species_to_toml(species: &[SpeciesParams]) -> Result<String> {
    let file = SpeciesFile {
        format_version: SPECIES_FORMAT_VERSION,
        species: species.to_vec(),
    };
    toml::to_string(&file).map_err(|e| Error::format("species file", e))
}

pub fn load_species_file(path: &Path) -> Result<Vec<SpeciesParams>> {
    let text = std::fs::read_to_string(path)?;
    parse_species_toml(&text).map_err(|e| match e {
        Error::Format { message, .. } => Error::format(path.display().to_string(), message),
        other => other,
    })
}

/// Overlays `overrides` on `base`: same-named entries are replaced in place,
/// new names are appended in the order given.
pub fn merge_species(base: Vec<SpeciesParams>, overrides: Vec<SpeciesParams>) -> Vec<SpeciesParams> {
    let mut merged = base;
    for entry in overrides {
        match merged.iter_mut().find(|s| s.name == entry.name) {
            Some(slot) => *slot = entry,
            None => merged.push(entry),
        }
    }
    merged
}
