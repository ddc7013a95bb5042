//! `hybridsim`: run scenarios, sweep grids, regenerate the reference figure
//! datasets and self-check the simulator.

pub mod error;
pub mod scenario;
pub mod table;

use std::ffi::OsString;
use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};

use clap::{Parser, Subcommand};
use hybrid_core::analytic::PRINTED_PROBABILITY_FACTOR;
use hybrid_core::figures::{self, Figure, Panel};
use hybrid_core::pipeline::{run_scheme, sweep, RowMetrics, SchemeConfig, ScsSource, SweepParam, SweepRow};
use hybrid_core::resources::PairSourceSpec;
use hybrid_core::validation::{self, CriterionReport};

use crate::error::{CliError, Result, EXIT_INVALID, EXIT_OK, EXIT_SELFCHECK};

#[derive(Debug, Parser)]
#[command(name = "hybridsim", version, about = "Heralded photon-polarization / coherent-state entanglement simulator")]
pub struct Cli {
    /// Worker threads for grid evaluation (default: all cores).
    #[arg(long, global = true, value_parser = clap::value_parser!(u16).range(1..))]
    pub threads: Option<u16>,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Evaluate one scenario and print its scalars.
    Run {
        #[arg(long)]
        scenario: PathBuf,
        /// Also write a one-row result table.
        #[arg(long)]
        output: Option<PathBuf>,
    },
    /// Evaluate the scenario's [sweep] grid into a result table.
    Sweep {
        #[arg(long)]
        scenario: PathBuf,
        #[arg(long)]
        output: PathBuf,
    },
    /// Regenerate the dataset behind a reference figure.
    Reproduce {
        #[arg(long, value_parser = ["2", "3", "4", "5"])]
        figure: String,
        #[arg(long, value_parser = ["a", "b", "c", "d"])]
        panel: Option<String>,
        /// Table destination (default: standard output).
        #[arg(long)]
        output: Option<PathBuf>,
    },
    /// Run every acceptance and property check.
    Selfcheck,
}

/// Parse `args` (including the program name), execute, and return the exit code.
pub fn main_with(args: impl IntoIterator<Item = impl Into<OsString> + Clone>, out: &mut (dyn Write + Send), err: &mut (dyn Write + Send)) -> i32 {
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() { EXIT_INVALID } else { EXIT_OK };
            let text = e.render().to_string();
            let _ = if e.use_stderr() {
                err.write_all(text.as_bytes())
            } else {
                out.write_all(text.as_bytes())
            };
            return code;
        }
    };
    let mut builder = rayon::ThreadPoolBuilder::new();
    if let Some(n) = cli.threads {
        builder = builder.num_threads(n as usize);
    }
    let pool = match builder.build() {
        Ok(p) => p,
        Err(e) => {
            let _ = writeln!(err, "error: cannot start worker threads: {e}");
            return EXIT_INVALID;
        }
    };
    match pool.install(|| execute(cli.command, out, err)) {
        Ok(code) => code,
        Err(e) => {
            let _ = writeln!(err, "error: {e}");
            e.exit_code()
        }
    }
}

pub fn execute(command: Command, out: &mut (dyn Write + Send), err: &mut (dyn Write + Send)) -> Result<i32> {
    match command {
        Command::Run { scenario, output } => cmd_run(&scenario, output.as_deref(), out),
        Command::Sweep { scenario, output } => cmd_sweep(&scenario, &output, err),
        Command::Reproduce { figure, panel, output } => {
            let figure: Figure = figure.parse()?;
            let panel: Option<Panel> = panel.map(|p| p.parse()).transpose()?;
            cmd_reproduce(figure, panel, output.as_deref(), out)
        }
        Command::Selfcheck => Ok(report_selfcheck(&validation::acceptance_suite(), out)?),
    }
}

fn create(path: &Path) -> Result<BufWriter<File>> {
    Ok(BufWriter::new(File::create(path)?))
}

/// Parameter columns describing a single configuration.
fn config_params(config: &SchemeConfig) -> Vec<(SweepParam, f64)> {
    let mut params = vec![
        (SweepParam::T, config.t),
        (SweepParam::Eta, config.eta),
        (SweepParam::AlphaF, config.alpha_f()),
    ];
    match config.pair_source {
        PairSourceSpec::Spdc { lambda, .. } => params.push((SweepParam::Lambda, lambda)),
        PairSourceSpec::VacuumMixed { z } => params.push((SweepParam::Z, z)),
        PairSourceSpec::IdealChi => {}
    }
    if let ScsSource::Squeezed(spec) = config.scs_source {
        params.push((SweepParam::S, spec.s));
    }
    params.sort_by_key(|(p, _)| *p);
    params
}

pub fn cmd_run(path: &Path, output: Option<&Path>, out: &mut (dyn Write + Send)) -> Result<i32> {
    let scenario = scenario::load(path)?;
    if scenario.grid.is_some() {
        return Err(CliError::Usage(
            "scenario has a [sweep] table; use the `sweep` command".into(),
        ));
    }
    let config = scenario.config;
    let r = run_scheme(&config)?;
    let d = &r.diagnostics;
    let num = table::number;
    writeln!(out, "fidelity           {}", num(r.fidelity))?;
    writeln!(out, "probability_total  {}", num(r.probability_total))?;
    writeln!(out, "negativity         {}", num(r.negativity))?;
    writeln!(out, "alpha_i            {}", num(config.alpha_i()))?;
    writeln!(out, "alpha_f            {}", num(config.alpha_f()))?;
    writeln!(
        out,
        "pattern_probs      {} {}",
        num(d.pattern_probabilities[0]),
        num(d.pattern_probabilities[1])
    )?;
    writeln!(out, "tail_mass          {}", num(d.tail_mass))?;
    if d.source_tail_mass > 0.0 {
        writeln!(out, "source_tail_mass   {}", num(d.source_tail_mass))?;
    }
    if let Some(c) = d.cutoffs {
        writeln!(out, "cutoffs            pair={} detector={} beam={}", c.pair, c.detector, c.beam)?;
    }
    for (name, v) in [("p_vac", d.p_vac), ("p_chi", d.p_chi), ("p_phi2", d.p_phi2)] {
        if let Some(v) = v {
            writeln!(out, "{name:<19}{}", num(v))?;
        }
    }
    match (d.analytic_fidelity, d.analytic_probability, d.printed_probability_ratio) {
        (Some(f), Some(p), ratio) => {
            writeln!(
                out,
                "oracle fidelity    closed form {} delta {:+.3e}",
                num(f),
                r.fidelity - f
            )?;
            writeln!(
                out,
                "oracle probability closed form {} ratio {}",
                num(p),
                num(r.probability_total / p)
            )?;
            if let Some(ratio) = ratio {
                writeln!(
                    out,
                    "oracle printed     ratio {} (documented factor {})",
                    num(ratio),
                    PRINTED_PROBABILITY_FACTOR
                )?;
            }
        }
        _ => writeln!(out, "oracle             none apply to this configuration")?,
    }
    if let Some(path) = output {
        let row = SweepRow {
            params: config_params(&config),
            outcome: Ok(RowMetrics::from(&r)),
        };
        let params: Vec<SweepParam> = row.params.iter().map(|(p, _)| *p).collect();
        let mut w = create(path)?;
        table::write_table(&mut w, &params, &[row])?;
        w.flush()?;
    }
    Ok(EXIT_OK)
}

pub fn cmd_sweep(path: &Path, output: &Path, err: &mut (dyn Write + Send)) -> Result<i32> {
    let scenario = scenario::load(path)?;
    let grid = scenario
        .grid
        .ok_or_else(|| CliError::Usage("scenario has no [sweep] table".into()))?;
    let rows = sweep(&scenario.config, &grid);
    let params: Vec<SweepParam> = grid.axes().iter().map(|(p, _)| *p).collect();
    let mut w = create(output)?;
    table::write_table(&mut w, &params, &rows)?;
    w.flush()?;
    let failed = rows.iter().filter(|r| r.outcome.is_err()).count();
    if failed > 0 {
        writeln!(err, "warning: {failed} of {} grid points failed; see the status column", rows.len())?;
    }
    Ok(EXIT_OK)
}

pub fn cmd_reproduce(figure: Figure, panel: Option<Panel>, output: Option<&Path>, out: &mut (dyn Write + Send)) -> Result<i32> {
    let report = figures::reproduce(figure, panel)?;
    match output {
        Some(path) => {
            let mut w = create(path)?;
            table::write_table(&mut w, &report.params, &report.table)?;
            w.flush()?;
        }
        None => table::write_table(&mut *out, &report.params, &report.table)?,
    }
    writeln!(out, "# figure {figure}: {} rows", report.table.len())?;
    for check in &report.spots {
        writeln!(out, "# {check}")?;
    }
    Ok(EXIT_OK)
}

/// Print every report and return the selfcheck exit code.
pub fn report_selfcheck(reports: &[CriterionReport], out: &mut (dyn Write + Send)) -> std::io::Result<i32> {
    for r in reports {
        write!(out, "{r}")?;
    }
    let failed: Vec<u8> = reports.iter().filter(|r| !r.pass()).map(|r| r.id).collect();
    if failed.is_empty() {
        writeln!(out, "selfcheck: all {} criteria pass", reports.len())?;
        Ok(EXIT_OK)
    } else {
        writeln!(out, "selfcheck: failing criteria {failed:?}")?;
        Ok(EXIT_SELFCHECK)
    }
}
