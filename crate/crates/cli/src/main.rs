use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{bail, Context, Result};
use clap::{Args, Parser, Subcommand, ValueEnum};

use dyndtn::coeffs::Time;
use dyndtn::mesh::{generate_disk_mesh, generate_square_mesh, load_mesh, save_mesh, TriMesh};
use dyndtn::oracle::disk_dtn_eigenvalue;
use dyndtn::scenario::{
    load_scenario, run_dtn_matrix, run_evolve, run_stationary, run_verify, Check, RunContext,
    Scenario, Summary,
};

/// Non-autonomous Dirichlet-to-Neumann operators: scenarios, evolution and
/// verification of the operator hypotheses.
#[derive(Debug, Parser)]
#[command(name = "dyndtn", version)]
struct Cli {
    /// Scenario file (JSON).
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Output directory.
    #[arg(long, global = true, default_value = ".")]
    out: PathBuf,
    /// Seed for random trial vectors.
    #[arg(long, global = true, default_value_t = 0)]
    seed: u64,
    /// Worker threads (defaults to the number of cores).
    #[arg(long, global = true)]
    threads: Option<usize>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Generate or check meshes.
    #[command(subcommand)]
    Mesh(MeshCommand),
    /// Dense DtN matrix as CSV.
    DtnMatrix {
        /// Time of the snapshot, a number or `inf` (defaults to t0).
        #[arg(long)]
        time: Option<String>,
    },
    /// Evolve on the fixed domain.
    Evolve,
    /// Evolve on the moving domain through the change of variables.
    NoncylEvolve,
    /// Stationary Neumann solution of the limit problem.
    Stationary,
    /// Analytic reference values.
    #[command(subcommand)]
    Oracle(OracleCommand),
    /// Run one verification check.
    Verify {
        #[arg(value_enum)]
        check: CheckArg,
    },
}

#[derive(Debug, Subcommand)]
enum MeshCommand {
    /// Write a generated mesh (from flags, or the scenario mesh).
    Gen(MeshGen),
    /// Load and validate a mesh file.
    Check { path: PathBuf },
}

#[derive(Debug, Args)]
struct MeshGen {
    #[arg(long, value_enum)]
    generator: Option<Generator>,
    #[arg(long, default_value_t = 1.0)]
    radius: f64,
    /// Target mesh size of the disk generator.
    #[arg(long, default_value_t = 0.1)]
    h: f64,
    #[arg(long, default_value_t = 1.0)]
    side: f64,
    /// Cells per side of the square generator.
    #[arg(long, default_value_t = 8)]
    n: usize,
    /// File name inside the output directory.
    #[arg(long, default_value = "mesh.txt")]
    name: String,
}

#[derive(Debug, Clone, Copy, ValueEnum)]
enum Generator {
    Disk,
    Square,
}

#[derive(Debug, Subcommand)]
enum OracleCommand {
    /// Unit-disk DtN eigenvalues `(k, mu_k)` as CSV on stdout.
    Disk {
        #[arg(long, default_value_t = -1.0, allow_hyphen_values = true)]
        lambda: f64,
        #[arg(long, default_value_t = 10)]
        kmax: u32,
    },
}

#[derive(Debug, Clone, Copy, ValueEnum)]
enum CheckArg {
    Sectoriality,
    Holder,
    Yagi,
    Adjoint,
    Coercivity,
    Motion,
}

impl From<CheckArg> for Check {
    fn from(c: CheckArg) -> Check {
        match c {
            CheckArg::Sectoriality => Check::Sectoriality,
            CheckArg::Holder => Check::Holder,
            CheckArg::Yagi => Check::Yagi,
            CheckArg::Adjoint => Check::Adjoint,
            CheckArg::Coercivity => Check::Coercivity,
            CheckArg::Motion => Check::Motion,
        }
    }
}

fn scenario(cli: &Cli) -> Result<Scenario> {
    let path = cli.config.as_deref().context("this command needs --config <path>")?;
    load_scenario(path).with_context(|| format!("loading {}", path.display()))
}

fn parse_time(s: &str) -> Result<Time> {
    if s == "inf" {
        return Ok(Time::Infinity);
    }
    let t: f64 = s.parse().with_context(|| format!("`{s}` is neither a number nor `inf`"))?;
    if !t.is_finite() {
        bail!("time must be finite or `inf`");
    }
    Ok(Time::At(t))
}

fn describe(mesh: &TriMesh) -> String {
    format!(
        "vertices {}\ntriangles {}\nboundary_vertices {}\narea {:.12e}\nboundary_length {:.12e}\nmax_edge {:.12e}\n",
        mesh.num_vertices(),
        mesh.triangles().len(),
        mesh.num_boundary(),
        mesh.area(),
        mesh.boundary_length(),
        mesh.max_edge_length(),
    )
}

fn mesh_gen(cli: &Cli, args: &MeshGen) -> Result<()> {
    let mesh = match args.generator {
        Some(Generator::Disk) => generate_disk_mesh(args.radius, args.h)?,
        Some(Generator::Square) => generate_square_mesh(args.side, args.n)?,
        None => scenario(cli)?.mesh.build()?,
    };
    fs::create_dir_all(&cli.out)?;
    let path = cli.out.join(&args.name);
    fs::write(&path, save_mesh(&mesh)).with_context(|| format!("writing {}", path.display()))?;
    print!("{}", describe(&mesh));
    Ok(())
}

fn mesh_check(path: &Path) -> Result<()> {
    let text = fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
    let mesh = load_mesh(&text)?;
    mesh.validate()?;
    print!("{}", describe(&mesh));
    Ok(())
}

fn oracle_disk(lambda: f64, kmax: u32) -> Result<()> {
    let mut out = String::from("k,mu_k\n");
    for k in 0..=kmax {
        out.push_str(&format!("{k},{:.15e}\n", disk_dtn_eigenvalue(lambda, k)?));
    }
    print!("{out}");
    Ok(())
}

/// `Some(summary)` for commands that run checks, `None` otherwise.
fn run(cli: &Cli) -> Result<Option<Summary>> {
    let ctx = RunContext::new(&cli.out, cli.seed);
    let summary = match &cli.command {
        Command::Mesh(MeshCommand::Gen(args)) => {
            mesh_gen(cli, args)?;
            None
        }
        Command::Mesh(MeshCommand::Check { path }) => {
            mesh_check(path)?;
            None
        }
        Command::Oracle(OracleCommand::Disk { lambda, kmax }) => {
            oracle_disk(*lambda, *kmax)?;
            None
        }
        Command::DtnMatrix { time } => {
            let s = scenario(cli)?;
            let t = match time {
                Some(t) => parse_time(t)?,
                None => Time::At(s.t0),
            };
            let path = run_dtn_matrix(&s, &ctx, t)?;
            println!("{}", path.display());
            None
        }
        Command::Evolve => Some(run_evolve(&scenario(cli)?, &ctx, false)?),
        Command::NoncylEvolve => Some(run_evolve(&scenario(cli)?, &ctx, true)?),
        Command::Stationary => Some(run_stationary(&scenario(cli)?, &ctx)?),
        Command::Verify { check } => Some(run_verify(&scenario(cli)?, &ctx, &[(*check).into()])?),
    };
    Ok(summary)
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    if let Some(n) = cli.threads {
        if let Err(e) = rayon::ThreadPoolBuilder::new().num_threads(n).build_global() {
            eprintln!("error: cannot configure {n} threads: {e}");
            return ExitCode::from(2);
        }
    }
    match run(&cli) {
        Ok(None) => ExitCode::SUCCESS,
        Ok(Some(summary)) => {
            print!("{}", summary.to_json());
            if summary.all_passed() {
                ExitCode::SUCCESS
            } else {
                ExitCode::from(1)
            }
        }
        Err(e) => {
            eprintln!("error: {e}");
            for cause in e.chain().skip(1) {
                eprintln!("  caused by: {cause}");
            }
            ExitCode::from(2)
        }
    }
}
