use std::fs::File;
use std::io::{self, BufWriter, Write};
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Parser, Subcommand, ValueEnum};
use serde_json::json;

use pamaj::dynamics::{run_protocol, Colour, Protocol, ProtocolConfig};
use pamaj::harness::{emit, run_sweep, ExperimentSpec, Format};
use pamaj::pa_graph::generate_pa;
use pamaj::structure::{scan, StructureParams};
use pamaj::threshold::{alpha_star, ConvergenceSchedule};
use pamaj::{Error, PaGraph};

const WORKERS_ENV: &str = "PAMAJ_WORKERS";

#[derive(Parser)]
#[command(name = "pamaj", version, about = "Majority dynamics on preferential attachment graphs")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Generate a PA_t(m, δ) graph and write it as an edge list.
    Generate {
        #[arg(long)]
        t: usize,
        #[arg(long)]
        m: usize,
        #[arg(long, default_value_t = 0.0, allow_negative_numbers = true)]
        delta: f64,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        /// Output file; stdout if omitted.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Run a protocol on a saved graph and print a JSON summary.
    Run {
        #[arg(long)]
        graph: PathBuf,
        #[arg(long, default_value_t = 5)]
        k: usize,
        #[arg(long)]
        alpha: f64,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long, default_value_t = 1000)]
        max_steps: usize,
        #[arg(long, value_enum, default_value_t = ProtocolArg::Mpk)]
        protocol: ProtocolArg,
        /// Write the red count after every step as CSV.
        #[arg(long)]
        trace: Option<PathBuf>,
    },
    /// Print the critical bias α*(d), or a table for odd d up to --table.
    Threshold {
        #[arg(long, default_value_t = 5)]
        d: u32,
        #[arg(long)]
        table: Option<u32>,
    },
    /// Print the predicted convergence schedule τ*.
    Schedule {
        #[arg(long)]
        d: u32,
        #[arg(long, default_value_t = 0.1)]
        eps: f64,
        #[arg(long)]
        t: f64,
    },
    /// Classify truncated balls around sampled light roots.
    Structure {
        #[arg(long)]
        graph: PathBuf,
        /// Inner core size; defaults to ⌈t^0.3⌉.
        #[arg(long)]
        kappa: Option<usize>,
        /// Outer core size; defaults to ⌈t^0.5⌉.
        #[arg(long)]
        kappa_o: Option<usize>,
        /// Maximum length of core paths.
        #[arg(long, default_value_t = 3)]
        omega: usize,
        /// Ball radius; defaults to omega.
        #[arg(long)]
        radius: Option<usize>,
        #[arg(long, default_value_t = 1000)]
        samples: usize,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        /// Per-root CSV; stdout if omitted. The summary goes to stderr.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Run a parameter sweep described by a JSON config.
    Sweep {
        #[arg(long)]
        config: PathBuf,
        #[arg(long)]
        workers: Option<usize>,
        /// Output file; overrides the config's csv_out / json_out.
        #[arg(long)]
        out: Option<PathBuf>,
        #[arg(long, value_enum, default_value_t = FormatArg::Csv)]
        format: FormatArg,
    },
}

#[derive(Clone, Copy, ValueEnum)]
enum ProtocolArg {
    Mpk,
    Voter,
}

#[derive(Clone, Copy, ValueEnum)]
enum FormatArg {
    Csv,
    Json,
}

fn exit_code(err: &Error) -> u8 {
    match err {
        Error::Io(_) => 3,
        _ => 2,
    }
}

fn output(path: Option<&Path>) -> Result<Box<dyn Write>, Error> {
    Ok(match path {
        Some(p) => Box::new(BufWriter::new(File::create(p)?)),
        None => Box::new(BufWriter::new(io::stdout().lock())),
    })
}

/// `x` rounded to `digits` significant digits.
fn sig(x: f64, digits: i32) -> String {
    if x == 0.0 || !x.is_finite() {
        return x.to_string();
    }
    let decimals = (digits - 1 - x.abs().log10().floor() as i32).max(0) as usize;
    format!("{x:.decimals$}")
}

fn colour_name(c: Option<Colour>) -> &'static str {
    match c {
        Some(Colour::Blue) => "blue",
        Some(Colour::Red) => "red",
        None => "none",
    }
}

fn workers(flag: Option<usize>, config: Option<usize>) -> Result<Option<usize>, Error> {
    if flag.is_some() || config.is_some() {
        return Ok(flag.or(config));
    }
    match std::env::var(WORKERS_ENV) {
        Ok(v) => v
            .parse::<usize>()
            .ok()
            .filter(|&n| n > 0)
            .map(Some)
            .ok_or_else(|| Error::Config(format!("{WORKERS_ENV}={v} is not a positive integer"))),
        Err(_) => Ok(None),
    }
}

fn execute(command: Command) -> Result<(), Error> {
    match command {
        Command::Generate { t, m, delta, seed, out } => {
            let g = generate_pa(t, m, delta, seed)?;
            let mut w = output(out.as_deref())?;
            g.write_to(&mut w)?;
            w.flush()?;
        }
        Command::Run {
            graph,
            k,
            alpha,
            seed,
            max_steps,
            protocol,
            trace,
        } => {
            let g = PaGraph::load(&graph)?;
            let config = ProtocolConfig::new(k, alpha, seed, max_steps)?;
            let protocol = match protocol {
                ProtocolArg::Mpk => Protocol::Mpk,
                ProtocolArg::Voter => Protocol::Voter,
            };
            let result = run_protocol(&g, &config, protocol);
            if let Some(path) = trace {
                let mut w = output(Some(&path))?;
                writeln!(w, "step,red_count")?;
                for (i, r) in result.red_counts.iter().enumerate() {
                    writeln!(w, "{i},{r}")?;
                }
                w.flush()?;
            }
            let summary = json!({
                "t": g.t(),
                "m": g.m(),
                "k": k,
                "alpha": alpha,
                "seed": seed,
                "protocol": match protocol { Protocol::Mpk => "mpk", Protocol::Voter => "voter" },
                "winner": colour_name(result.winner),
                "consensus_step": result.consensus_step,
                "steps_run": result.steps_run,
                "initial_red": result.red_counts[0],
                "final_red": result.red_counts[result.steps_run],
            });
            println!("{summary}");
        }
        Command::Threshold { d, table } => match table {
            Some(dmax) => {
                println!("d,alpha_star");
                for d in (5..=dmax).step_by(2) {
                    println!("{d},{}", sig(alpha_star(d)?, 9));
                }
            }
            None => println!("{}", sig(alpha_star(d)?, 9)),
        },
        Command::Schedule { d, eps, t } => {
            let s = ConvergenceSchedule::new(d, eps, t)?;
            println!(
                "{}",
                json!({
                    "d": d,
                    "epsilon": eps,
                    "t": t,
                    "b": sig(s.b, 9),
                    "tau_star": sig(s.tau_star, 9),
                    "consensus_bound": s.consensus_bound(),
                })
            );
        }
        Command::Structure {
            graph,
            kappa,
            kappa_o,
            omega,
            radius,
            samples,
            seed,
            out,
        } => {
            let g = PaGraph::load(&graph)?;
            let defaults = StructureParams::desk_defaults(&g);
            let params = StructureParams::new(
                g.t(),
                omega,
                kappa.unwrap_or(defaults.kappa),
                kappa_o.unwrap_or(defaults.kappa_o),
                defaults.gamma,
            )?;
            let (reports, summary) = scan(&g, &params, radius.unwrap_or(omega), samples, seed)?;
            let mut w = output(out.as_deref())?;
            writeln!(w, "root,category,light_cycles,core_edges")?;
            for r in &reports {
                writeln!(w, "{},{},{},{}", r.root, r.category.as_str(), r.light_cycles, r.core_edges)?;
            }
            w.flush()?;
            eprintln!("{}", serde_json::to_string(&summary)?);
        }
        Command::Sweep {
            config,
            workers: flag,
            out,
            format,
        } => {
            let spec = ExperimentSpec::load(&config)?;
            let result = run_sweep(&spec, workers(flag, spec.workers)?)?;
            let format = match format {
                FormatArg::Csv => Format::Csv,
                FormatArg::Json => Format::Json,
            };
            match out {
                Some(path) => emit(&result, format, path)?,
                None if spec.csv_out.is_some() || spec.json_out.is_some() => {
                    if let Some(p) = &spec.csv_out {
                        emit(&result, Format::Csv, p)?;
                    }
                    if let Some(p) = &spec.json_out {
                        emit(&result, Format::Json, p)?;
                    }
                }
                None => {
                    let text = match format {
                        Format::Csv => result.to_csv(),
                        Format::Json => result.to_json()?,
                    };
                    print!("{text}");
                }
            }
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match execute(cli.command) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(exit_code(&e))
        }
    }
}
