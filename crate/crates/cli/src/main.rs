use std::fmt::Write as _;
use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand, ValueEnum};
use num_complex::Complex64;
use tumorloc::phantom::diagonal_gap;
use tumorloc::{
    fit_affine, load_trajectories, locate_file, mobius_forward, mobius_inverse, Error, ErrorKind,
    GeodesicChoice, LocateOverrides, MobiusParams, ProjectorChoice,
};

#[derive(Parser)]
#[command(
    name = "tumorloc",
    version,
    about = "Locate a breast tumour for surgery from its CC and MLO mammogram positions"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Clone, Copy, ValueEnum)]
enum Projector {
    Affine,
    Calibrated,
}

#[derive(Subcommand)]
enum Command {
    /// Run the full localization on a case file.
    Locate {
        case: PathBuf,
        /// Forward model used for the extremes and the refinement.
        #[arg(long, value_enum)]
        projector: Option<Projector>,
        /// Read the chord ratio from the other MLO extreme.
        #[arg(long)]
        flip_side: bool,
        /// Measure r along the ellipsoid instead of the symmetrized sphere.
        #[arg(long)]
        geodesic: bool,
        /// Stop after the closed-form target.
        #[arg(long)]
        no_refine: bool,
        /// Print only the machine block.
        #[arg(long)]
        machine: bool,
    },
    /// Fit the affine compression matrix to a phantom trajectory CSV.
    FitPhantom {
        file: PathBuf,
        #[arg(long)]
        machine: bool,
    },
    /// Apply the MLO disk map (or its inverse) to one point.
    #[command(allow_negative_numbers = true)]
    Mobius {
        #[arg(long)]
        b: f64,
        #[arg(long = "H")]
        h: f64,
        #[arg(long)]
        inverse: bool,
        re: f64,
        im: f64,
    },
}

fn exit_code(e: &Error) -> u8 {
    match e.kind() {
        ErrorKind::Input => 2,
        ErrorKind::Numeric => 3,
        ErrorKind::Domain => 4,
    }
}

fn run(cli: Cli) -> Result<String, Error> {
    match cli.command {
        Command::Locate {
            case,
            projector,
            flip_side,
            geodesic,
            no_refine,
            machine,
        } => {
            let overrides = LocateOverrides {
                projector: projector.map(|p| match p {
                    Projector::Affine => ProjectorChoice::Affine,
                    Projector::Calibrated => ProjectorChoice::Calibrated,
                }),
                geodesic: geodesic.then_some(GeodesicChoice::Numeric),
                flip_side,
                no_refine,
            };
            let report = locate_file(&case, &overrides)?;
            Ok(if machine {
                report.machine_block()
            } else {
                format!(
                    "{}\n# machine\n{}",
                    report.human_report(),
                    report.machine_block()
                )
            })
        }
        Command::FitPhantom { file, machine } => {
            let fit = fit_affine(&load_trajectories(&file)?)?;
            let mut block = String::new();
            for i in 0..3 {
                for j in 0..3 {
                    let _ = writeln!(block, "C.{}{} = {:.4}", i + 1, j + 1, fit.c[(i, j)] + 0.0);
                }
            }
            let (label, axis) = fit.max_residual_location;
            let axis = ["x", "y", "z"][axis];
            let _ = writeln!(block, "E.max = {:.4}", fit.max_abs_residual);
            let _ = writeln!(block, "E.max_label = {label}");
            let _ = writeln!(block, "E.max_axis = {axis}");
            let _ = writeln!(block, "E.frobenius = {:.4}", fit.frobenius_residual());
            if machine {
                return Ok(block);
            }
            let mut s = String::from("C (row-major, B·C ≈ A)\n");
            for i in 0..3 {
                let _ = writeln!(
                    s,
                    "  {:>8.4} {:>8.4} {:>8.4}",
                    fit.c[(i, 0)] + 0.0,
                    fit.c[(i, 1)] + 0.0,
                    fit.c[(i, 2)] + 0.0
                );
            }
            s.push_str("\nresiduals E = A − B·C (cm)\n  nodule        x        y        z\n");
            for (r, l) in fit.labels.iter().enumerate() {
                let e = |j: usize| fit.residuals[(r, j)] + 0.0;
                let _ = writeln!(s, "  {l:<6} {:>8.4} {:>8.4} {:>8.4}", e(0), e(1), e(2));
            }
            let _ = writeln!(
                s,
                "\nmax |E| = {:.4} at nodule {label}, {axis}; largest departure from 1.22·I: {:.4}",
                fit.max_abs_residual,
                diagonal_gap(&fit)
            );
            Ok(format!("{s}\n# machine\n{block}"))
        }
        Command::Mobius {
            b,
            h,
            inverse,
            re,
            im,
        } => {
            let m = MobiusParams::new(b, h)?;
            let z = Complex64::new(re, im);
            let w = if inverse {
                mobius_inverse(z, &m)?
            } else {
                mobius_forward(z, &m)?
            };
            Ok(format!("{:.4} {:.4}\n", w.re + 0.0, w.im + 0.0))
        }
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli) {
        Ok(out) => {
            print!("{out}");
            ExitCode::SUCCESS
        }
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(exit_code(&e))
        }
    }
}
