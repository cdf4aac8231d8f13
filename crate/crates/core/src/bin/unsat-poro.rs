use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use unsat_poro::aa_theory::{richardson_aa_experiment, sample_planes, PlaneRect, SpectralPair};
use unsat_poro::runner::{emit_report, load_config, report_table, run_checks, run_sweep};
use unsat_poro::Error;

#[derive(Parser)]
#[command(
    version,
    about = "Fixed-stress splitting and Anderson acceleration for unsaturated poromechanics"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run a sweep described by a TOML config and write report.csv / report.txt.
    Run {
        config: PathBuf,
        /// Overrides `output_dir` from the config.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Sample the AA*(1) contraction factor on a rectangle of the eigenvalue plane.
    Plane {
        #[arg(long, num_args = 2, default_values_t = [-0.995, 0.995], allow_negative_numbers = true)]
        l1: Vec<f64>,
        #[arg(long, num_args = 2, default_values_t = [-0.995, 0.995], allow_negative_numbers = true)]
        l2: Vec<f64>,
        #[arg(long, default_value_t = 200)]
        resolution: usize,
        /// CSV destination, stdout when omitted.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// AA*(1) and plain Richardson on A = diag(l1, l2).
    Richardson {
        #[arg(long, allow_negative_numbers = true)]
        l1: f64,
        #[arg(long, allow_negative_numbers = true)]
        l2: f64,
        #[arg(long, default_value_t = 1.0, allow_negative_numbers = true)]
        beta1: f64,
        #[arg(long, default_value_t = 1.0, allow_negative_numbers = true)]
        beta2: f64,
        /// Number of four-iteration blocks.
        #[arg(long, default_value_t = 10)]
        quads: usize,
    },
    /// Run the quick invariant suites.
    Check,
}

fn exit_code(e: &Error) -> u8 {
    match e {
        Error::Io { .. } => 2,
        _ => 1,
    }
}

fn io_err(path: &std::path::Path) -> impl Fn(std::io::Error) -> Error + '_ {
    move |e| Error::Io {
        path: path.to_path_buf(),
        source: e,
    }
}

fn run(cmd: Command) -> Result<(), Error> {
    match cmd {
        Command::Run { config, out } => {
            let cfg = load_config(&config)?;
            let dir = out.unwrap_or_else(|| cfg.output_dir.clone());
            let report = run_sweep(&cfg)?;
            let files = emit_report(&report, &dir)?;
            print!("{}", report_table(&report));
            for f in files {
                eprintln!("wrote {}", f.display());
            }
        }
        Command::Plane {
            l1,
            l2,
            resolution,
            out,
        } => {
            let rect = PlaneRect {
                l1: (l1[0], l1[1]),
                l2: (l2[0], l2[1]),
            };
            let sample = sample_planes(rect, resolution)?;
            match out {
                Some(path) => {
                    let f = File::create(&path).map_err(io_err(&path))?;
                    sample.write_csv(BufWriter::new(f)).map_err(io_err(&path))?;
                    let acc = sample.points.iter().filter(|p| p.accelerates).count();
                    let conv = sample.points.iter().filter(|p| p.converges).count();
                    eprintln!(
                        "{} points, {acc} accelerating, {conv} converging, wrote {}",
                        sample.points.len(),
                        path.display()
                    );
                }
                None => {
                    let stdout = std::io::stdout();
                    let path = PathBuf::from("<stdout>");
                    sample.write_csv(stdout.lock()).map_err(io_err(&path))?;
                }
            }
        }
        Command::Richardson {
            l1,
            l2,
            beta1,
            beta2,
            quads,
        } => {
            let pair = SpectralPair::with_weights(l1, l2, beta1, beta2)?;
            let r = pair.contraction_factor()?;
            let h = richardson_aa_experiment(&pair, quads);
            let mut out = std::io::stdout().lock();
            let path = PathBuf::from("<stdout>");
            let w = |out: &mut dyn Write, s: String| writeln!(out, "{s}").map_err(io_err(&path));
            w(&mut out, format!("r({l1}, {l2}) = {r:.6e}"))?;
            w(
                &mut out,
                "block  |e_aa|        ratio_aa     |e_plain|     ratio_plain".into(),
            )?;
            let (ra, rp) = (h.aa_block_ratios(), h.plain_block_ratios());
            for k in 0..=quads {
                let i = 4 * k;
                let (qa, qp) = if k == 0 {
                    (String::new(), String::new())
                } else {
                    (format!("{:.6e}", ra[k - 1]), format!("{:.6e}", rp[k - 1]))
                };
                w(
                    &mut out,
                    format!(
                        "{k:5}  {:.6e}  {qa:>12}  {:.6e}  {qp:>12}",
                        h.aa_errors[i], h.plain_errors[i]
                    ),
                )?;
            }
        }
        Command::Check => {
            for c in run_checks()? {
                let tag = if c.passed { "PASS" } else { "FAIL" };
                println!("{tag} {}: {}", c.name, c.detail);
            }
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli.command) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(exit_code(&e))
        }
    }
}
