// Copyright 2026 The ionspam Authors
// SPDX-License-Identifier: Apache-2.0

//! Command-line entry point.
//!
//! Exit codes: 0 success, 2 configuration error, 3 runtime error.

use std::fmt::Write as _;
use std::fs::File;
use std::io::{BufReader, BufWriter, Write};
use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::sync::Arc;

use clap::{CommandFactory, Parser, Subcommand};

use ionspam::config::{ProtocolKind, RunConfig};
use ionspam::detection::{
    classify_bayes, classify_threshold, count_histogram, flag_decays, histogram_csv, read_archive,
    write_archive, ShotRecord,
};
use ionspam::experiment::{build_protocol, resolved_pulses, simulate_spam};
use ionspam::pumpsim::{evolve, PopulationVector, PulseParams, StateSpace};
use ionspam::ratemodel::{prediction_csv, prediction_report};
use ionspam::species::{
    builtin_species, enumerate_sublevels, find_species, load_species_file, merge_species, Manifold,
    SpeciesParams,
};
use ionspam::stats::{build_budget, spam_summary, tally_threshold, BudgetComponents, TrialTally};
use ionspam::{Error, Result};

const DEFAULT_BUDGET_TOML: &str = include_str!("../../config/ba137_budget.toml");

#[derive(Debug, Parser)]
#[command(name = "ionspam", version, about = "Trapped-ion SPAM modeling")]
struct Cli {
    /// TOML run configuration.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Master seed; shots draw from per-shot streams of it.
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Primary output file; stdout when absent.
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    /// Trials per prepared state.
    #[arg(long, global = true)]
    trials: Option<u64>,
    /// Worker threads; affects speed only.
    #[arg(long, global = true)]
    threads: Option<usize>,
    /// Extra species rows, merged over the built-in table by name.
    #[arg(long, global = true)]
    species_file: Option<PathBuf>,
    /// Print the resolved configuration and exit.
    #[arg(long, global = true)]
    dump_config: bool,
    #[command(subcommand)]
    command: Option<Command>,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// List species, or the sublevels of one species.
    Species {
        name: Option<String>,
        /// Comma-separated manifolds, e.g. S1/2,D5/2.
        #[arg(long, value_delimiter = ',', default_value = "S1/2")]
        manifolds: Vec<String>,
    },
    /// Steady-state preparation error for every species, as CSV.
    Predict,
    /// Preparation error per pumping cycle, as CSV.
    SimulatePrep {
        #[arg(long, value_parser = parse_protocol)]
        protocol: Option<ProtocolKind>,
        #[arg(long)]
        cycles: Option<u32>,
        #[arg(long)]
        flush_cycles: Option<u32>,
        /// Perfect pulses and no leaks.
        #[arg(long)]
        ideal: bool,
    },
    /// Simulate interleaved SPAM trials into a shot archive.
    SimulateSpam {
        /// Total-count histogram CSV.
        #[arg(long)]
        histogram: Option<PathBuf>,
    },
    /// Per-shot labels and decay flags for an archive, as CSV.
    Classify { archive: PathBuf },
    /// Infidelity summary of an archive.
    Summarize { archive: PathBuf },
    /// Render an error budget; defaults to the shipped 137Ba+ budget.
    Budget {
        components: Option<PathBuf>,
        #[arg(long)]
        csv: Option<PathBuf>,
    },
}

fn parse_protocol(s: &str) -> std::result::Result<ProtocolKind, String> {
    s.parse().map_err(|e: Error| e.to_string())
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = match Cli::try_parse() {
        Ok(cli) if cli.command.is_none() && !cli.dump_config => {
            let _ = Cli::command().print_help();
            return ExitCode::from(2);
        }
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { ExitCode::from(2) } else { ExitCode::SUCCESS };
        }
    };
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(if e.is_config_error() { 2 } else { 3 })
        }
    }
}

fn run(cli: Cli) -> Result<()> {
    let cfg = resolve_config(&cli)?;
    if cli.dump_config {
        return emit(cli.out.as_deref(), &cfg.to_toml()?);
    }
    match cli.threads {
        Some(0) => Err(Error::Format {
            context: "--threads".into(),
            message: "must be at least 1".into(),
        }),
        Some(n) => rayon::ThreadPoolBuilder::new()
            .num_threads(n)
            .build()
            .map_err(|e| Error::format("--threads", e))?
            .install(|| dispatch(&cli, &cfg)),
        None => dispatch(&cli, &cfg),
    }
}

fn resolve_config(cli: &Cli) -> Result<RunConfig> {
    let mut cfg = match &cli.config {
        Some(path) => RunConfig::load(path)?,
        None => RunConfig::default(),
    };
    if let Some(seed) = cli.seed {
        cfg.run.seed = seed;
    }
    if let Some(trials) = cli.trials {
        cfg.run.trials = trials;
    }
    if let Some(Command::SimulatePrep {
        protocol,
        cycles,
        flush_cycles,
        ideal,
    }) = &cli.command
    {
        let p = &mut cfg.protocol;
        if let Some(kind) = protocol {
            p.kind = *kind;
        }
        if let Some(c) = cycles {
            p.cycles = *c;
            p.flush_cycles = p.flush_cycles.map(|f| f.min(*c));
        }
        if flush_cycles.is_some() {
            p.flush_cycles = *flush_cycles;
        }
        if *ideal {
            p.pulses = PulseParams {
                polarization_residual: p.pulses.polarization_residual,
                durations: p.pulses.durations,
                ..PulseParams::ideal()
            };
            p.target_prep_error = None;
        }
    }
    cfg.validate()?;
    Ok(cfg)
}

fn species_table(cli: &Cli) -> Result<Vec<SpeciesParams>> {
    let base = builtin_species();
    match &cli.species_file {
        Some(path) => Ok(merge_species(base, load_species_file(path)?)),
        None => Ok(base),
    }
}

fn emit(out: Option<&Path>, content: &str) -> Result<()> {
    match out {
        Some(path) => std::fs::write(path, content)?,
        None => match std::io::stdout().lock().write_all(content.as_bytes()) {
            // A closed downstream pipe (e.g. `| head`) is not a failure.
            Err(e) if e.kind() == std::io::ErrorKind::BrokenPipe => {}
            r => r?,
        },
    }
    Ok(())
}

fn load_archive(path: &Path) -> Result<Vec<ShotRecord>> {
    let file = File::open(path).map_err(|e| Error::archive(path.display().to_string(), e))?;
    read_archive(BufReader::new(file)).map_err(|e| match e {
        Error::Archive { context, message } => Error::Archive {
            context: format!("{}: {context}", path.display()),
            message,
        },
        other => other,
    })
}

fn dispatch(cli: &Cli, cfg: &RunConfig) -> Result<()> {
    let out = cli.out.as_deref();
    let Some(command) = &cli.command else {
        return Ok(());
    };
    match command {
        Command::Species { name, manifolds } => {
            let table = species_table(cli)?;
            match name {
                None => emit(out, &species_csv(&table)),
                Some(name) => {
                    let species = find_species(&table, name)?;
                    let manifolds = manifolds
                        .iter()
                        .map(|m| m.parse::<Manifold>())
                        .collect::<Result<Vec<_>>>()?;
                    let mut text = String::from("manifold,F,mF\n");
                    for s in enumerate_sublevels(species, &manifolds)? {
                        let _ = writeln!(text, "{},{},{}", s.manifold, s.f, s.m_f);
                    }
                    emit(out, &text)
                }
            }
        }
        Command::Predict => {
            let table = species_table(cli)?;
            emit(out, &prediction_csv(&prediction_report(&table)?))
        }
        Command::SimulatePrep { .. } => {
            let table = species_table(cli)?;
            let species = find_species(&table, &cfg.run.species)?;
            let pulses = resolved_pulses(cfg, species)?;
            let protocol = build_protocol(
                cfg.protocol.kind,
                cfg.protocol.cycles,
                cfg.protocol.flush_cycles,
                &pulses,
                species,
            );
            let space = Arc::new(StateSpace::for_species(species)?);
            let run = evolve(&protocol, species, &PopulationVector::uniform_ground(space)?)?;
            let mut text = String::from("cycle,prep_error\n");
            for p in &run.series {
                let _ = writeln!(text, "{},{:e}", p.cycle, p.prep_error);
            }
            emit(out, &text)
        }
        Command::SimulateSpam { histogram } => {
            let table = species_table(cli)?;
            let species = find_species(&table, &cfg.run.species)?;
            let run = simulate_spam(cfg, species)?;
            let archive = out.or(cfg.output.archive.as_deref());
            match archive {
                Some(path) => write_archive(BufWriter::new(File::create(path)?), &run.records)?,
                None => write_archive(BufWriter::new(std::io::stdout().lock()), &run.records)?,
            }
            if let Some(path) = histogram.as_deref().or(cfg.output.histogram.as_deref()) {
                std::fs::write(path, histogram_csv(&count_histogram(&run.records)))?;
            }
            let tally = tally_threshold(&run.records, cfg.detection.threshold());
            let burst_trials: u64 = run.bursts.iter().map(|b| u64::from(b.length)).sum();
            eprintln!(
                "prep error {:e} (flush leak {:e}); {} bursts over {} |0> trials",
                run.prepared.prep_error,
                run.prepared.flush_leak,
                run.bursts.len(),
                burst_trials
            );
            eprint!("{}", spam_summary(&tally)?.render(&tally));
            Ok(())
        }
        Command::Classify { archive } => {
            let records = load_archive(archive)?;
            let det = &cfg.detection;
            let threshold = det.threshold();
            let flagged = flag_decays(&records, det);
            let mut flag_iter = flagged.iter().peekable();
            let mut text = String::from("shot,truth,total_counts,threshold,bayes,segments_used,flagged\n");
            let mut segments = 0usize;
            let mut bayes_tally = TrialTally::default();
            for (i, r) in records.iter().enumerate() {
                let b = classify_bayes(r, det);
                segments += b.segments_used;
                bayes_tally.record(r.truth, b.label);
                let is_flagged = flag_iter.next_if(|&&j| j == i).is_some();
                let _ = writeln!(
                    text,
                    "{},{},{},{},{},{},{}",
                    r.shot,
                    r.truth.label(),
                    r.total_counts(),
                    classify_threshold(r, threshold).label(),
                    b.label.label(),
                    b.segments_used,
                    u8::from(is_flagged)
                );
            }
            emit(out, &text)?;
            let tally = tally_threshold(&records, threshold);
            let true_decays = flagged
                .iter()
                .filter(|&&i| records[i].truth_decay_time_us.is_some())
                .count();
            let mean_stop_us = if records.is_empty() {
                0.0
            } else {
                segments as f64 / records.len() as f64 * det.segment_us
            };
            eprintln!(
                "threshold {threshold}: {}/{} |0> errors, {}/{} |1> errors",
                tally.errors_zero, tally.n_zero, tally.errors_one, tally.n_one
            );
            eprintln!(
                "bayes: {}/{} |0> errors, {}/{} |1> errors, mean stop {mean_stop_us:.1} us",
                bayes_tally.errors_zero, bayes_tally.n_zero, bayes_tally.errors_one, bayes_tally.n_one
            );
            eprintln!("flagged decays: {} ({} with a recorded decay)", flagged.len(), true_decays);
            Ok(())
        }
        Command::Summarize { archive } => {
            let records = load_archive(archive)?;
            let tally = tally_threshold(&records, cfg.detection.threshold());
            emit(out, &spam_summary(&tally)?.render(&tally))
        }
        Command::Budget { components, csv } => {
            let text = match components {
                Some(path) => std::fs::read_to_string(path)
                    .map_err(|e| Error::format(path.display().to_string(), e))?,
                None => DEFAULT_BUDGET_TOML.to_string(),
            };
            let budget = build_budget(&BudgetComponents::from_toml(&text)?)?;
            if let Some(path) = csv {
                std::fs::write(path, budget.render_csv())?;
            }
            emit(out, &budget.render_text())
        }
    }
}

fn species_csv(table: &[SpeciesParams]) -> String {
    let mut text = String::from(
        "species,I,linewidth_hz,hf_s_hz,hf_p_hz,eta_up,eta_cross,eta_flush,d52_lifetime_s,deshelve_branch_f1\n",
    );
    let opt = |v: Option<f64>| v.map_or_else(String::new, |v| format!("{v:?}"));
    for s in table {
        let _ = writeln!(
            text,
            "{},{},{:?},{:?},{:?},{:?},{:?},{:?},{},{}",
            s.name,
            s.nuclear_spin,
            s.linewidth_hz,
            s.hf_s_hz,
            s.hf_p_hz,
            s.eta_up,
            s.eta_cross,
            s.eta_flush(),
            opt(s.d52_lifetime_s),
            opt(s.deshelve_branch_f1),
        );
    }
    text
}
