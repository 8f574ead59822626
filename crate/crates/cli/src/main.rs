use std::io::{self, Write};
use std::path::PathBuf;
use std::process::ExitCode;

use anyhow::{bail, Context, Result};
use clap::{Args, Parser, Subcommand};

use fintstab_core::certificate::{
    check_theorem1, lower_bounds, suggest_margins, theorem2_eta_bound, ControlGains, PlantBounds,
};
use fintstab_core::experiment::{preset, run_experiment, sweep, ExperimentConfig, RunReport, PRESETS};
use fintstab_core::output::{write_certificate, write_levels};
use fintstab_core::quantizer::{build_levels, gamma_bar};

/// Finite-time stabilization toolkit: quantizer tables, schedule statistics,
/// stability certificates and closed-loop simulations.
#[derive(Parser)]
#[command(name = "fintstab", version)]
struct Cli {
    #[command(subcommand)]
    command: Command,
    #[command(flatten)]
    source: Source,
}

#[derive(Args)]
struct Source {
    /// Experiment config file (TOML).
    #[arg(long, global = true, conflicts_with = "preset")]
    config: Option<PathBuf>,
    /// Built-in experiment; `certified` when neither this nor --config is given.
    #[arg(long, global = true)]
    preset: Option<String>,
    /// Output directory for emitted files.
    #[arg(long, global = true, env = "FINTSTAB_OUT")]
    out: Option<PathBuf>,
}

#[derive(Subcommand)]
enum Command {
    /// Print the quantizer level table as CSV.
    Levels {
        /// Override the magnitude the table must cover.
        #[arg(long)]
        cover: Option<f64>,
    },
    /// Print the switching schedule, or its span statistics with --stats.
    Schedule {
        #[arg(long)]
        stats: bool,
    },
    /// Print the closed-form lower bounds for the configured plant.
    Bounds,
    /// Check the constant-gain certificate; exits with 1 when it fails.
    Certify,
    /// Run the experiment and write CSV (and SVG) outputs.
    Simulate,
    /// Run the experiment once per value of a numeric config key.
    Sweep {
        /// Dotted key, e.g. `control.alpha3` or `sim.step`.
        #[arg(long)]
        param: String,
        /// Comma-separated values.
        #[arg(long, value_delimiter = ',', num_args = 0..)]
        values: Vec<f64>,
    },
}

fn load(source: &Source) -> Result<ExperimentConfig> {
    match (&source.config, &source.preset) {
        (Some(path), _) => ExperimentConfig::load(path).with_context(|| format!("loading {}", path.display())),
        (None, Some(name)) => Ok(preset(name)?),
        (None, None) => Ok(preset("certified")?),
    }
}

fn out_dir(source: &Source, cfg: &ExperimentConfig) -> PathBuf {
    source.out.clone().unwrap_or_else(|| PathBuf::from(&cfg.output.dir))
}

fn plant_bounds(cfg: &ExperimentConfig) -> Result<PlantBounds> {
    let plant = cfg.plant.build()?;
    let Some((a1, a2)) = plant.growth_bounds() else {
        bail!("plant kind has no error comparison system to certify");
    };
    Ok(PlantBounds::new(a1, a2, cfg.plant.delay_bound()?)?)
}

fn fmt_opt<T: std::fmt::Display>(v: Option<T>) -> String {
    v.map_or_else(|| "none".to_string(), |x| format!("{x}"))
}

fn print_report(out: &mut impl Write, r: &RunReport) -> io::Result<()> {
    writeln!(out, "run: {}", r.name)?;
    if let Some(pb) = &r.plant_bounds {
        writeln!(
            out,
            "alpha1 = {}, alpha2 = {}, tau = {}",
            pb.alpha1, pb.alpha2, pb.tau_bound
        )?;
    }
    writeln!(
        out,
        "theta_low = {}, theta_high = {}",
        r.stats.theta_low, r.stats.theta_high
    )?;
    if let Some(c) = &r.certificate {
        let verdict = if c.satisfied() { "certified" } else { "FAILED" };
        writeln!(
            out,
            "certificate: {verdict} (windows {}, settling increment {})",
            fmt_opt(c.window_count),
            fmt_opt(c.settling_bound_increment)
        )?;
    }
    writeln!(out, "T1 = {}, T2 = {}", fmt_opt(r.t1), fmt_opt(r.t2))?;
    if let Some(a) = &r.audit {
        writeln!(
            out,
            "window audit: {} ({} windows)",
            if a.passed() { "passed" } else { "failed" },
            a.entries.len()
        )?;
    }
    if let Some((a3, a4)) = r.final_gains {
        writeln!(out, "final gains: alpha3 = {a3}, alpha4 = {a4}")?;
    }
    for n in &r.notes {
        writeln!(out, "note: {n}")?;
    }
    for f in &r.files {
        writeln!(out, "wrote {}", f.display())?;
    }
    Ok(())
}

fn run(cli: Cli, stdout: &mut Vec<u8>) -> Result<ExitCode> {
    let cfg = load(&cli.source)?;
    match cli.command {
        Command::Levels { cover } => {
            let table = build_levels(&cfg.quantizer.spec(), cover.unwrap_or(cfg.quantizer.cover))?;
            write_levels(&table, &mut *stdout)?;
        }
        Command::Schedule { stats } => {
            let schedule = cfg.schedule.build()?.extended_to(cfg.sim.t_end);
            if stats {
                let realized = schedule.compute_stats(schedule.complete_windows())?;
                let used = schedule.stats()?;
                writeln!(stdout, "theta_low,{}", used.theta_low)?;
                writeln!(stdout, "theta_high,{}", used.theta_high)?;
                writeln!(stdout, "windows,{}", schedule.complete_windows())?;
                writeln!(stdout, "realized_theta_low,{}", realized.theta_low)?;
                writeln!(stdout, "realized_theta_high,{}", realized.theta_high)?;
                for note in schedule.declared_mismatches() {
                    eprintln!("warning: {note}");
                }
            } else {
                writeln!(stdout, "k,t_k")?;
                for (k, t) in schedule.boundaries().iter().enumerate() {
                    writeln!(stdout, "{k},{t}")?;
                }
            }
        }
        Command::Bounds => {
            let pb = plant_bounds(&cfg)?;
            let stats = cfg.span_stats()?;
            let gb = gamma_bar(&cfg.quantizer.spec());
            let lb = lower_bounds(&pb, &stats, gb)?;
            writeln!(stdout, "sigma_low,{}", lb.sigma_low)?;
            writeln!(stdout, "alpha3_low,{}", lb.alpha3_low)?;
            writeln!(stdout, "varpi1_low,{}", lb.varpi1_low)?;
            writeln!(stdout, "alpha4_low,{}", lb.alpha4_low)?;
            writeln!(stdout, "eta_bound,{}", theorem2_eta_bound(&pb, &stats, gb)?)?;
        }
        Command::Certify => {
            let Some(gains) = cfg.control.gains()? else {
                bail!("certify needs a controller with gains");
            };
            let gains = ControlGains::new(gains.alpha3, gains.alpha4)?;
            let pb = plant_bounds(&cfg)?;
            let stats = cfg.span_stats()?;
            let margins = match cfg.margins {
                Some(m) => m,
                None => match suggest_margins(&pb, &gains, &stats) {
                    Ok(m) => m,
                    Err(e) => {
                        writeln!(stdout, "{e}")?;
                        return Ok(ExitCode::from(1));
                    }
                },
            };
            let cert = check_theorem1(&pb, &gains, &margins, &stats, gamma_bar(&cfg.quantizer.spec()));
            writeln!(
                stdout,
                "margins: varpi1 = {}, varpi2 = {}, phi = {}",
                margins.varpi1, margins.varpi2, margins.phi
            )?;
            writeln!(stdout, "{:<22} {:<9} {:>14}", "condition", "satisfied", "slack")?;
            for c in &cert.conditions {
                writeln!(stdout, "{:<22} {:<9} {:>14.6}", c.name, c.satisfied, c.slack)?;
            }
            writeln!(stdout, "sigma_star: {}", fmt_opt(cert.sigma_star))?;
            writeln!(stdout, "window_count: {}", fmt_opt(cert.window_count))?;
            writeln!(
                stdout,
                "settling_bound_increment: {}",
                fmt_opt(cert.settling_bound_increment)
            )?;
            writeln!(stdout)?;
            write_certificate(&cert, &mut *stdout)?;
            if !cert.satisfied() {
                return Ok(ExitCode::from(1));
            }
        }
        Command::Simulate => {
            let dir = out_dir(&cli.source, &cfg);
            let report = run_experiment(&cfg, Some(&dir))?;
            print_report(stdout, &report)?;
        }
        Command::Sweep { param, values } => {
            let dir = out_dir(&cli.source, &cfg);
            let result = sweep(&cfg, &param, &values, Some(&dir))?;
            writeln!(stdout, "{param},status,certified,t1,t2")?;
            for (v, run) in result.values.iter().zip(&result.runs) {
                match run {
                    Ok(r) => writeln!(
                        stdout,
                        "{v},ok,{},{},{}",
                        r.certified().map_or("n/a".to_string(), |c| c.to_string()),
                        fmt_opt(r.t1),
                        fmt_opt(r.t2)
                    )?,
                    Err(e) => writeln!(stdout, "{v},error: {},,,", e.to_string().replace(',', ";"))?,
                }
            }
            if let Some(p) = result.order_estimate {
                writeln!(stdout, "order_estimate,{p}")?;
            }
        }
    }
    Ok(ExitCode::SUCCESS)
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    if let Some(name) = &cli.source.preset {
        if !PRESETS.contains(&name.as_str()) {
            eprintln!("error: unknown preset {name:?}; expected one of {}", PRESETS.join(", "));
            return ExitCode::from(2);
        }
    }
    let mut buf = Vec::new();
    let code = match run(cli, &mut buf) {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(2)
        }
    };
    match io::stdout().lock().write_all(&buf) {
        Err(e) if e.kind() != io::ErrorKind::BrokenPipe => {
            eprintln!("error: writing output: {e}");
            ExitCode::from(2)
        }
        _ => code,
    }
}
