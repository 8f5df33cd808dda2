//! Command-line runner for the convergence experiments and the property
//! suite.

use std::fs;
use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use ppife::analysis::sci4;
use ppife::experiment::{parse_ladder, run_experiment, write_outputs, ExampleId, RunConfig};
use ppife::verify::{run_properties, VerifyConfig};

#[derive(Parser)]
#[command(name = "ppife", version, about = "Partially penalized IFE experiments")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run a refinement ladder and write rate tables.
    Run(RunArgs),
}

#[derive(clap::Args)]
struct RunArgs {
    /// Flat `key = value` configuration file.
    #[arg(long)]
    config: Option<PathBuf>,
    /// `example1` or `example2`.
    #[arg(long)]
    example: Option<ExampleId>,
    #[arg(long)]
    beta_plus: Option<f64>,
    #[arg(long)]
    beta_minus: Option<f64>,
    /// Comma-separated mesh sizes, e.g. `8,16,32`.
    #[arg(long)]
    n_ladder: Option<String>,
    /// Output directory for the CSV files.
    #[arg(long)]
    out: Option<PathBuf>,
    /// Also run the property suite and write `properties.txt`.
    #[arg(long)]
    verify: bool,
    /// Write the mesh of every level.
    #[arg(long)]
    dump_mesh: bool,
    /// Write the assembled matrix of every level.
    #[arg(long)]
    dump_matrix: bool,
    /// Allow meshes finer than N = 512.
    #[arg(long)]
    allow_fine: bool,
}

fn config(args: &RunArgs) -> Result<RunConfig, String> {
    let mut cfg = match &args.config {
        Some(path) => {
            let text = fs::read_to_string(path).map_err(|e| format!("{}: {e}", path.display()))?;
            RunConfig::parse(&text).map_err(|e| format!("{}: {e}", path.display()))?
        }
        None => RunConfig::default(),
    };
    if let Some(e) = args.example {
        cfg.example = e;
    }
    if let Some(b) = args.beta_plus {
        cfg.beta_plus = b;
    }
    if let Some(b) = args.beta_minus {
        cfg.beta_minus = b;
    }
    if let Some(l) = &args.n_ladder {
        cfg.n_ladder = parse_ladder(l).map_err(|e| e.to_string())?;
    }
    if let Some(o) = &args.out {
        cfg.out_dir = Some(o.clone());
    }
    cfg.verify |= args.verify;
    cfg.dump_mesh |= args.dump_mesh;
    cfg.dump_matrix |= args.dump_matrix;
    cfg.allow_fine |= args.allow_fine;
    cfg.validate().map_err(|e| e.to_string())?;
    Ok(cfg)
}

fn run(args: &RunArgs) -> Result<bool, String> {
    let cfg = config(args)?;
    let dir = cfg.out_dir.clone().unwrap_or_else(|| PathBuf::from("."));
    fs::create_dir_all(&dir).map_err(|e| format!("{}: {e}", dir.display()))?;
    let cfg = RunConfig {
        out_dir: Some(dir.clone()),
        ..cfg
    };
    let report = run_experiment(&cfg).map_err(|e| e.to_string())?;
    println!("{}", report.problem);
    for level in &report.levels {
        let r = &level.report;
        println!(
            "N={:<5} h={} L2={} H1={} interface elements={} edges={}",
            r.n,
            sci4(r.h),
            sci4(r.l2),
            sci4(r.h1),
            level.interface_elements,
            level.interface_edges
        );
    }
    if let Some(t) = &report.table {
        println!("fitted slopes: L2 {:.2}, H1 {:.2}", t.l2_slope, t.h1_slope);
    }
    write_outputs(&report, &dir).map_err(|e| e.to_string())?;
    let mut ok = true;
    if let Some((n, err)) = &report.failure {
        eprintln!("error at N = {n}: {err}");
        ok = false;
    }
    if cfg.verify {
        let vcfg = VerifyConfig {
            seed: cfg.seed,
            beta_plus: cfg.beta_plus,
            beta_minus: cfg.beta_minus,
            ..VerifyConfig::default()
        };
        let props = run_properties(&vcfg);
        fs::write(dir.join("properties.txt"), props.to_text()).map_err(|e| e.to_string())?;
        print!("{}", props.to_text());
        ok &= props.all_passed();
    }
    Ok(ok)
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match cli.command {
        Command::Run(args) => match run(&args) {
            Ok(true) => ExitCode::SUCCESS,
            Ok(false) => ExitCode::FAILURE,
            Err(e) => {
                eprintln!("error: {e}");
                ExitCode::from(2)
            }
        },
    }
}
