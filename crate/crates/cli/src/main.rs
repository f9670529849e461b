use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use viabilitykit::builtins;
use viabilitykit::commands::{self, CliError, ConeSet, Overrides, EXIT_INPUT};
use viabilitykit::output;
use viabilitykit::scenario::{CheckName, SelectionSpec};

#[derive(Parser)]
#[command(
    name = "viabilitykit",
    version,
    about = "Check forward invariance of constrained differential inclusions"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Args, Clone)]
struct Common {
    /// Scenario file, or the name of a built-in scenario.
    #[arg(long)]
    scenario: String,
    /// Output directory.
    #[arg(long, default_value = ".")]
    out: PathBuf,
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long)]
    tol: Option<f64>,
    #[arg(long = "eps-cone")]
    eps_cone: Option<f64>,
    #[arg(long)]
    margin: Option<f64>,
    #[arg(long)]
    h: Option<f64>,
    #[arg(long)]
    horizon: Option<f64>,
}

impl Common {
    fn overrides(&self) -> Overrides {
        Overrides {
            seed: self.seed,
            tol: self.tol,
            eps_cone: self.eps_cone,
            margin: self.margin,
            h: self.h,
            horizon: self.horizon,
        }
    }

    fn load(&self) -> Result<viabilitykit::Scenario, CliError> {
        let mut s = builtins::resolve(&self.scenario)?;
        self.overrides().apply(&mut s);
        Ok(s)
    }
}

#[derive(Subcommand)]
enum Command {
    /// Run the checks and write report_<name>.json.
    Check {
        #[command(flatten)]
        common: Common,
        /// Run a single checker instead of the scenario's list.
        #[arg(long, value_enum)]
        check: Option<CheckName>,
        #[arg(long)]
        emit_csv: bool,
        #[arg(long)]
        emit_gnuplot: bool,
    },
    /// Integrate one selection and write traj_<name>_0.csv.
    Simulate {
        #[command(flatten)]
        common: Common,
        /// Initial point, comma separated.
        #[arg(long, allow_hyphen_values = true)]
        x0: String,
        /// vertex:J or weights:e1,e2,...
        #[arg(long, default_value = "vertex:0")]
        selection: String,
        #[arg(long)]
        emit_gnuplot: bool,
    },
    /// Cone membership table over a direction grid.
    Cones {
        #[command(flatten)]
        common: Common,
        #[arg(long, value_enum)]
        set: ConeSet,
        /// Base point, comma separated.
        #[arg(long, allow_hyphen_values = true)]
        x: String,
        /// Number of directions (default 360 in 2-D, 500 above).
        #[arg(long)]
        grid: Option<usize>,
    },
    /// Check every built-in scenario.
    Corpus {
        #[arg(long, default_value = ".")]
        out: PathBuf,
        #[arg(long)]
        seed: Option<u64>,
    },
    /// List the built-in scenarios.
    List,
    /// Print a built-in scenario in canonical form.
    Export { name: String },
}

fn run(cli: Cli) -> Result<i32, CliError> {
    match cli.command {
        Command::Check {
            common,
            check,
            emit_csv,
            emit_gnuplot,
        } => {
            let s = common.load()?;
            let rep = commands::run_check(&s, check)?;
            let files =
                commands::write_check_outputs(&s, &rep, &common.out, emit_csv, emit_gnuplot)?;
            println!("{}: {}", s.name, rep.verdict.summary);
            for f in files {
                println!("wrote {}", f.display());
            }
            Ok(rep.verdict.exit_code)
        }
        Command::Simulate {
            common,
            x0,
            selection,
            emit_gnuplot,
        } => {
            let s = common.load()?;
            let x0 = commands::parse_point(&x0)?;
            let sel = SelectionSpec::parse_flag(&selection)?.compile("--selection")?;
            let out = commands::run_simulate(&s, &x0, &sel, &common.out, emit_gnuplot)?;
            let r = &out.summary;
            println!(
                "end={:?} t={} max_dist_K={:e} max_dist_KC={:e} first_exit={} star_ok_throughout={}",
                r.end_reason.unwrap(),
                r.end_time,
                r.max_dist_k,
                r.max_dist_kc,
                r.first_exit_time.map_or("none".to_string(), |t| t.to_string()),
                r.star_ok_throughout
            );
            println!("wrote {}", out.csv_path.display());
            if let Some(p) = out.gnuplot_path {
                println!("wrote {}", p.display());
            }
            Ok(0)
        }
        Command::Cones {
            common,
            set,
            x,
            grid,
        } => {
            let s = common.load()?;
            let x = commands::parse_point(&x)?;
            let table = commands::run_cones(&s, set, &x, grid)?;
            let name = format!("cones_{}_{}.csv", s.name, set.name());
            let path = output::write(&common.out, &name, &table.csv())?;
            for kind in viabilitykit_core::cones::ConeKind::ALL {
                let m = table.members(kind);
                println!(
                    "{}: {}/{} directions",
                    kind.name(),
                    m.iter().filter(|b| **b).count(),
                    m.len()
                );
            }
            println!("wrote {}", path.display());
            Ok(0)
        }
        Command::Corpus { out, seed } => {
            let entries = commands::run_corpus(&Overrides {
                seed,
                ..Overrides::default()
            })?;
            for e in &entries {
                output::write(
                    &out,
                    &format!("report_{}.json", e.name),
                    &e.report.to_json(),
                )?;
                println!(
                    "{} exit={} {}",
                    e.name, e.report.verdict.exit_code, e.report.verdict.summary
                );
            }
            let problems = commands::corpus_problems(&entries);
            for p in &problems {
                println!("problem: {}", p);
            }
            Ok(if problems.is_empty() { 0 } else { 1 })
        }
        Command::List => {
            for name in builtins::names() {
                println!("{}", name);
            }
            Ok(0)
        }
        Command::Export { name } => {
            let s = builtins::resolve(&name)?.canonical()?;
            println!("{}", s.to_json());
            Ok(0)
        }
    }
}

fn main() -> ExitCode {
    commands::init_threads();
    let cli = Cli::parse();
    match run(cli) {
        Ok(code) => ExitCode::from(code as u8),
        Err(e) => {
            eprintln!("error: {}", e);
            ExitCode::from(EXIT_INPUT as u8)
        }
    }
}
