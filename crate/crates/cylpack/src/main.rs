//! Command-line interface over the packing library.

use clap::{Parser, Subcommand};
use cylpack::{
    analyze_column, fit_number_density, run_deposition, sweep_diameter, sweep_templates,
    DepositionConfig, DiameterRatio, Error, Result, SweepGrid, TemplateParams,
};
use std::path::{Path, PathBuf};
use std::process::ExitCode;

#[derive(Parser)]
#[command(
    name = "cylpack",
    version,
    about = "Dense columnar sphere packings in cylinders via sequential deposition"
)]
struct Cli {
    #[command(subcommand)]
    cmd: Cmd,
}

#[derive(Subcommand)]
enum Cmd {
    /// Grow one column from explicit template parameters
    Deposit {
        /// Cylinder-to-sphere diameter ratio
        #[arg(long)]
        d: f64,
        /// Template angular pitch in [0, pi]
        #[arg(long)]
        dphi21: f64,
        /// Template axial pitch in [0, 1]; only valid (and then required)
        /// where the contact equation leaves it free
        #[arg(long)]
        dz21: Option<f64>,
        /// Deposition handedness (+1 or -1)
        #[arg(long, default_value_t = 1, allow_negative_numbers = true)]
        direction: i8,
        /// Post-template axial length to grow, in diameters
        #[arg(long, default_value_t = 20.0)]
        length: f64,
        /// Envelope safety-scan resolution
        #[arg(long, default_value_t = 4096)]
        scan_grid: usize,
        /// Spheres per deposition step
        #[arg(long, default_value_t = 1)]
        group: usize,
        /// Column file to write (column goes to stdout if omitted)
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Sweep template parameters at one diameter ratio
    SweepTemplates {
        #[arg(long)]
        d: f64,
        /// dphi21 samples across [0, pi]
        #[arg(long, default_value_t = 1571)]
        dphi_steps: usize,
        /// dz21 samples across [0, 1] where the axial pitch is free
        #[arg(long, default_value_t = 101)]
        dz_steps: usize,
        /// Local refinement passes around the incumbent
        #[arg(long, default_value_t = 3)]
        refine_rounds: usize,
        #[arg(long, default_value_t = 20.0)]
        length: f64,
        #[arg(long, default_value_t = 4096)]
        scan_grid: usize,
        /// Append the winning record to this result table
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Sweep the diameter ratio, running a template sweep per sample
    SweepD {
        #[arg(long)]
        d_lo: f64,
        /// Upper end of the half-open range [d_lo, d_hi)
        #[arg(long)]
        d_hi: f64,
        #[arg(long, default_value_t = 0.001)]
        step: f64,
        #[arg(long, default_value_t = 1571)]
        dphi_steps: usize,
        #[arg(long, default_value_t = 101)]
        dz_steps: usize,
        #[arg(long, default_value_t = 3)]
        refine_rounds: usize,
        #[arg(long, default_value_t = 20.0)]
        length: f64,
        #[arg(long, default_value_t = 4096)]
        scan_grid: usize,
        /// Result table to append each finished sample to (with a manifest
        /// sidecar describing the run)
        #[arg(long)]
        checkpoint: Option<PathBuf>,
        /// Continue an existing checkpoint, skipping finished samples
        #[arg(long)]
        resume: bool,
    },
    /// Identify the structure stored in a column file
    Classify {
        /// Column file to read
        #[arg(long)]
        input: PathBuf,
    },
    /// Render the rolled-out diagram of a column file
    Diagram {
        /// Column file to read
        #[arg(long)]
        input: PathBuf,
        /// Write the diagram as SVG
        #[arg(long)]
        svg: Option<PathBuf>,
        /// Write the rolled-out points as CSV
        #[arg(long)]
        csv: Option<PathBuf>,
    },
    /// Compare a density curve against a reference curve
    Compare {
        /// Our curve: a sweep result table or a plain d,vf file
        #[arg(long)]
        ours: PathBuf,
        /// Reference curve: a plain d,vf file
        #[arg(long)]
        reference: PathBuf,
        /// Deviation above this is flagged
        #[arg(long, default_value_t = 1e-3)]
        tolerance: f64,
    },
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            use clap::error::ErrorKind;
            let code = match e.kind() {
                ErrorKind::DisplayHelp | ErrorKind::DisplayVersion => 0u8,
                _ => 1u8,
            };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    match run(cli.cmd) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {}", e);
            ExitCode::from(e.exit_code() as u8)
        }
    }
}

fn run(cmd: Cmd) -> Result<()> {
    match cmd {
        Cmd::Deposit {
            d,
            dphi21,
            dz21,
            direction,
            length,
            scan_grid,
            group,
            out,
        } => {
            let ratio = DiameterRatio::new(d)?;
            let params = TemplateParams::new(dphi21, dz21, direction)?;
            let cfg = DepositionConfig {
                target_length: length,
                scan_grid,
                group_size: group,
                ..DepositionConfig::default()
            };
            let col = run_deposition(ratio, &params, &cfg)?;
            let report = analyze_column(&col);
            eprintln!(
                "deposited {} sites ({} template) at d = {}",
                col.sites.len(),
                col.template_len,
                d
            );
            match fit_number_density(&col) {
                Ok(est) => eprintln!("density slope = {}, vf = {}", est.slope, est.vf),
                Err(e) => eprintln!("density fit unavailable: {}", e),
            }
            eprintln!("label: {}", report.label);
            match out {
                Some(path) => {
                    cylpack::io::write_column(&col, &path)?;
                    eprintln!("wrote {}", path.display());
                }
                None => print!("{}", cylpack::io::column_to_string(&col)),
            }
            Ok(())
        }

        Cmd::SweepTemplates {
            d,
            dphi_steps,
            dz_steps,
            refine_rounds,
            length,
            scan_grid,
            out,
        } => {
            let ratio = DiameterRatio::new(d)?;
            let grid = SweepGrid {
                dphi_steps,
                dz_steps,
                refine_rounds,
            };
            let cfg = DepositionConfig {
                target_length: length,
                scan_grid,
                ..DepositionConfig::default()
            };
            let rec = sweep_templates(ratio, &grid, &cfg)?;
            print_record_line(&rec);
            if let Some(path) = out {
                cylpack::io::append_records(&path, std::slice::from_ref(&rec))?;
                eprintln!("appended to {}", path.display());
            }
            Ok(())
        }

        Cmd::SweepD {
            d_lo,
            d_hi,
            step,
            dphi_steps,
            dz_steps,
            refine_rounds,
            length,
            scan_grid,
            checkpoint,
            resume,
        } => {
            let grid = SweepGrid {
                dphi_steps,
                dz_steps,
                refine_rounds,
            };
            let cfg = DepositionConfig {
                target_length: length,
                scan_grid,
                ..DepositionConfig::default()
            };
            if resume && checkpoint.is_none() {
                return Err(Error::InvalidParameter(
                    "--resume needs --checkpoint".into(),
                ));
            }
            let mut skip = Vec::new();
            if let Some(cp) = &checkpoint {
                if cp.exists() {
                    if !resume {
                        return Err(Error::InvalidParameter(format!(
                            "checkpoint {} already exists; pass --resume to continue it",
                            cp.display()
                        )));
                    }
                    skip = cylpack::io::read_records(cp)?
                        .iter()
                        .map(|r| r.d)
                        .collect();
                    eprintln!("resuming: {} samples already in the checkpoint", skip.len());
                }
                let manifest = cylpack::io::RunManifest {
                    tool_version: env!("CARGO_PKG_VERSION").to_string(),
                    command: "sweep-d".to_string(),
                    d_lo,
                    d_hi,
                    step,
                    dphi_steps,
                    dz_steps,
                    refine_rounds,
                    target_length: length,
                    scan_grid,
                    contact_tol: cfg.contact_tol,
                    degeneracy_tol: cfg.degeneracy_tol,
                    group_size: cfg.group_size,
                    tie_break: "max vf, then smallest (dphi21, dz21), ties within 1e-9"
                        .to_string(),
                    created_unix: std::time::SystemTime::now()
                        .duration_since(std::time::UNIX_EPOCH)
                        .map(|t| t.as_secs())
                        .unwrap_or(0),
                };
                cylpack::io::write_manifest(
                    &manifest,
                    &cylpack::io::RunManifest::sidecar_path(cp),
                )?;
            }
            let cp = checkpoint.clone();
            let out = sweep_diameter(d_lo, d_hi, step, &grid, &cfg, &skip, |rec| {
                if let Some(cp) = &cp {
                    cylpack::io::append_records(cp, std::slice::from_ref(rec))?;
                }
                print_record_line(rec);
                Ok(())
            })?;
            eprintln!(
                "swept {} samples ({} failed)",
                out.records.len() + out.failures.len(),
                out.failures.len()
            );
            for (d, why) in &out.failures {
                eprintln!("  d = {}: {}", d, why);
            }
            Ok(())
        }

        Cmd::Classify { input } => {
            let col = cylpack::io::read_column(&input)?;
            let report = analyze_column(&col);
            println!("label: {}", report.label);
            match &report.period {
                Some(p) => {
                    println!(
                        "period: dphi_p = {} rad, dz_p = {}, sites_per_period = {}, transient_len = {}",
                        p.dphi_p, p.dz_p, p.sites_per_period, p.transient_len
                    );
                    if let Some(v) = p.v_norm {
                        println!(
                            "wraparound norm: {} (one revolution = {})",
                            v,
                            col.ratio.span() * std::f64::consts::PI
                        );
                    }
                }
                None => println!("period: none detected"),
            }
            match fit_number_density(&col) {
                Ok(est) => println!("vf = {}", est.vf),
                Err(e) => println!("vf unavailable: {}", e),
            }
            Ok(())
        }

        Cmd::Diagram { input, svg, csv } => {
            if svg.is_none() && csv.is_none() {
                return Err(Error::InvalidParameter(
                    "pass --svg and/or --csv to choose an output".into(),
                ));
            }
            let col = cylpack::io::read_column(&input)?;
            let report = analyze_column(&col);
            if let Some(path) = svg {
                let rendered = cylpack::io::render_diagram(&col, report.period.as_ref());
                cylpack::io::write_text(&path, &rendered)?;
                eprintln!("wrote {}", path.display());
            }
            if let Some(path) = csv {
                cylpack::io::write_text(&path, &cylpack::io::points_to_csv(&col))?;
                eprintln!("wrote {}", path.display());
            }
            Ok(())
        }

        Cmd::Compare {
            ours,
            reference,
            tolerance,
        } => {
            let our_curve = load_curve(&ours)?;
            let ref_curve = cylpack::io::read_reference(&reference)?;
            let report = cylpack::io::compare_curves(&our_curve, &ref_curve.points, tolerance)?;
            println!("d,ours,reference,delta");
            for row in &report.rows {
                println!("{},{},{},{}", row.d, row.ours, row.reference, row.delta);
            }
            eprintln!(
                "{} common samples; max |delta| = {}, mean |delta| = {}",
                report.rows.len(),
                report.max_delta,
                report.mean_delta
            );
            if report.flagged.is_empty() {
                eprintln!("all deviations within {}", tolerance);
            } else {
                eprintln!(
                    "{} samples beyond {} (transition neighborhoods): {:?}",
                    report.flagged.len(),
                    tolerance,
                    report.flagged
                );
            }
            Ok(())
        }
    }
}

/// Loads `(d, vf)` samples from either a sweep result table or a plain
/// two-column file, sorted by diameter.
fn load_curve(path: &Path) -> Result<Vec<(f64, f64)>> {
    let mut curve = match cylpack::io::read_records(path) {
        Ok(records) => records.iter().map(|r| (r.d, r.vf_max)).collect(),
        Err(Error::Parse { .. }) => cylpack::io::read_reference(path)?.points,
        Err(e) => return Err(e),
    };
    curve.sort_by(|a, b| a.0.partial_cmp(&b.0).unwrap());
    Ok(curve)
}

fn print_record_line(rec: &cylpack::SweepRecord) {
    let dz = rec
        .params
        .dz21
        .map(|v| format!(", dz21 = {}", v))
        .unwrap_or_default();
    println!(
        "d = {}: vf_max = {} at dphi21 = {}{} [{}] ({:.1}s)",
        rec.ratio.get(),
        rec.vf_max,
        rec.params.dphi21,
        dz,
        rec.label,
        rec.runtime_secs
    );
}
