//! `rcto` subcommands.
//!
//! Exit status is 0 on success, 1 with a single `error[kind]: message` line
//! on stderr when a command fails, and 2 with usage text for bad arguments.

use std::ffi::OsString;
use std::io::Write;
use std::path::{Path, PathBuf};

use clap::{Parser, Subcommand, ValueEnum};
use rcto_core::gradcheck;
use rcto_core::optimizer::Optimizer;

use crate::config::ConfigDoc;
use crate::error::{Error, Result};
use crate::export::ExportBundle;
use crate::section;

/// Hybrid truss-continuum topology optimization for reinforced concrete.
#[derive(Debug, Parser)]
#[command(name = "rcto", version)]
pub struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Run an optimization and write its export bundle.
    Optimize {
        /// Problem config.
        config: PathBuf,
        /// Bundle directory [default: config path with extension `out`].
        #[arg(long)]
        out: Option<PathBuf>,
        /// Print one line per outer iteration on stderr.
        #[arg(long)]
        progress: bool,
    },
    /// Compare analytic sensitivities with central differences.
    CheckGradients {
        /// Problem config.
        config: PathBuf,
        /// Largest acceptable relative error.
        #[arg(long, default_value_t = 1e-4)]
        tol: f64,
    },
    /// Nominal moment and three-point design load of a prismatic section.
    Aci {
        /// Section file.
        section: PathBuf,
    },
    /// Re-emit the geometry of an export bundle.
    Export {
        /// Bundle directory.
        bundle: PathBuf,
        /// Output format.
        #[arg(long, value_enum)]
        format: Format,
        /// Target directory [default: the bundle itself].
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Parse a config and check the problem is well posed.
    Validate {
        /// Problem config.
        config: PathBuf,
    },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
enum Format {
    Csv,
    Vtk,
}

/// Parses `args`, runs the command and returns the exit status.
pub fn main<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return e.exit_code();
        }
    };
    let stdout = std::io::stdout();
    match run(cli, &mut stdout.lock()) {
        Ok(()) => 0,
        Err(e) => {
            eprintln!("{}", e.one_line());
            1
        }
    }
}

/// Runs a parsed command, writing its report to `out`.
pub fn run(cli: Cli, out: &mut dyn Write) -> Result<()> {
    match cli.command {
        Command::Optimize {
            config,
            out: dir,
            progress,
        } => {
            let dir = dir.unwrap_or_else(|| config.with_extension("out"));
            optimize(&config, &dir, progress, out)
        }
        Command::CheckGradients { config, tol } => check_gradients(&config, tol, out),
        Command::Aci { section } => aci(&section, out),
        Command::Export {
            bundle,
            format,
            out: dir,
        } => {
            let dir = dir.unwrap_or_else(|| bundle.clone());
            export(&bundle, format, &dir, out)
        }
        Command::Validate { config } => validate(&config, out),
    }
}

fn report(out: &mut dyn Write, line: std::fmt::Arguments) -> Result<()> {
    writeln!(out, "{line}").map_err(|e| Error::io(Path::new("<stdout>"), e))
}

fn load(path: &Path) -> Result<(ConfigDoc, rcto_core::Problem)> {
    let doc = ConfigDoc::load(path)?;
    let problem = doc.build().map_err(|e| e.at(path))?;
    Ok((doc, problem))
}

fn optimize(config: &Path, dir: &Path, progress: bool, out: &mut dyn Write) -> Result<()> {
    let (doc, problem) = load(config)?;
    let mut opt = Optimizer::new(problem)?;
    let max = opt.problem().config.max_outer_iters;
    let mut converged = false;
    for _ in 0..max {
        let (r, done) = opt.outer_step()?;
        if progress {
            eprintln!(
                "iter {:4}  c {:.6e}  change {:.4}  ratio {:.3}  members {}",
                r.iteration, r.compliance, r.max_change, r.ratio, r.members
            );
        }
        if done {
            converged = true;
            break;
        }
    }
    let result = opt.finish(converged);
    let bundle = ExportBundle::from_run(&doc, &result)?;
    bundle.write_dir(dir)?;
    let last = result.log.last().map(|r| r.compliance).unwrap_or(f64::NAN);
    report(
        out,
        format_args!(
            "converged={} iterations={} compliance={last:.6e} bundle={}",
            converged,
            result.log.len(),
            dir.display()
        ),
    )
}

fn check_gradients(config: &Path, tol: f64, out: &mut dyn Write) -> Result<()> {
    let (_, problem) = load(config)?;
    let mut opt = Optimizer::new(problem)?;
    let r = gradcheck::check_gradients(&mut opt, &gradcheck::default_steps())?;
    for f in &r.families {
        report(
            out,
            format_args!(
                "{} max_rel_error={:.3e} best_step={:.0e} v_shaped={} components={}",
                f.family.name(),
                f.max_rel_error,
                f.best_step,
                f.v_shaped,
                f.components
            ),
        )?;
    }
    match r.families.iter().find(|f| !(f.max_rel_error < tol)) {
        Some(f) => Err(Error::GradientMismatch {
            family: f.family.name(),
            error: f.max_rel_error,
            tol,
        }),
        None => Ok(()),
    }
}

fn aci(path: &Path, out: &mut dyn Write) -> Result<()> {
    let spec = section::load(path)?;
    let c = section::capacity(&spec)?;
    report(out, format_args!("a = {:.2} mm", c.block_depth_mm))?;
    report(out, format_args!("M_n = {:.3} kN m", c.moment_knm))?;
    report(out, format_args!("P = {:.2} kN", c.load_kn))
}

fn export(bundle: &Path, format: Format, dir: &Path, out: &mut dyn Write) -> Result<()> {
    let b = ExportBundle::read_dir(bundle)?;
    match format {
        Format::Csv => b.write_csv(dir)?,
        Format::Vtk => b.write_vtk(dir)?,
    }
    report(
        out,
        format_args!("wrote {} to {}", format_name(format), dir.display()),
    )
}

fn format_name(f: Format) -> &'static str {
    match f {
        Format::Csv => "csv",
        Format::Vtk => "vtk",
    }
}

fn validate(config: &Path, out: &mut dyn Write) -> Result<()> {
    let (_, p) = load(config)?;
    report(
        out,
        format_args!(
            "ok: {}x{} elements, {} members, concrete fill {:.4}",
            p.mesh.nx(),
            p.mesh.ny(),
            p.ground.members.len(),
            p.fill_fraction()
        ),
    )
}
