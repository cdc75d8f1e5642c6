use clap::{ArgAction, Parser, Subcommand};
use std::path::PathBuf;
use std::process::ExitCode;
use wellgrade::lz::{lz_run, LZSpec};
use wellgrade::model::{benchmark_discretization, Grid1d, ProtocolKind, ProtocolSpec, WellStates, BENCHMARK_LEVELS};
use wellgrade::operator::DensityMatrix;
use wellgrade::phasespace::{default_sizes, husimi_field, sphere_grid, verify_decomposition, wehrl_entropy};
use wellgrade::runner::{self, RunConfig, RunError, Table1Overrides};
use wellgrade::spinbasis::SpinBasis;

#[derive(Parser)]
#[command(name = "wellgrade", version, about = "Double-well state transfer with protocol grading")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run one scenario and write trajectory.csv, grading.json, manifest.json.
    Simulate {
        #[arg(long)]
        config: PathBuf,
        /// Overrides output.directory.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Grade every (protocol, T, τω) cell.
    Sweep {
        #[arg(long)]
        config: PathBuf,
        /// Comma-separated τω values; defaults to a log grid 0.1..300.
        #[arg(long = "tau-omega", value_delimiter = ',', num_args = 0..)]
        tau_omega: Option<Vec<f64>>,
        #[arg(long, value_delimiter = ',', num_args = 0.., required = true)]
        temps: Vec<f64>,
        /// Comma-separated protocols; defaults to all four.
        #[arg(long, value_delimiter = ',')]
        protocols: Option<Vec<ProtocolKind>>,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Regenerate the 8-column protocol comparison table.
    Table1 {
        #[arg(long, default_value = "table1")]
        out: PathBuf,
        #[arg(long = "gamma-over-omega")]
        gamma_over_omega: Option<f64>,
        #[arg(long = "lambda-over-omega")]
        lambda_over_omega: Option<f64>,
    },
    /// Two-level sweep with or without counter-diabatic driving.
    LzDemo {
        #[arg(long, default_value_t = 0.05)]
        delta: f64,
        #[arg(long, default_value_t = 1.0)]
        tau: f64,
        #[arg(long = "cd", overrides_with = "no_cd", action = ArgAction::SetTrue)]
        cd: bool,
        #[arg(long = "no-cd", action = ArgAction::SetTrue)]
        no_cd: bool,
    },
    /// Discretization benchmark, entropy-decomposition identity and grid refinement.
    Validate,
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("info")).init();
    let cli = Cli::parse();
    match run(cli.command) {
        Ok(code) => ExitCode::from(code),
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}

fn run(command: Command) -> Result<u8, RunError> {
    match command {
        Command::Simulate { config, out } => {
            let cfg = RunConfig::from_file(&config)?;
            let dir = out.unwrap_or_else(|| cfg.output.directory.clone());
            let (manifest, grading) = runner::run_scenario(&cfg, &dir)?;
            println!("{}", serde_json::to_string_pretty(&grading).expect("serializes"));
            println!("wrote {} files to {}", manifest.files.len() + 1, dir.display());
            Ok(0)
        }
        Command::Sweep {
            config,
            tau_omega,
            temps,
            protocols,
            out,
        } => {
            let cfg = RunConfig::from_file(&config)?;
            let taus = tau_omega.unwrap_or_else(runner::default_tau_omegas);
            let protocols = protocols.unwrap_or_else(|| ProtocolKind::ALL.to_vec());
            let dir = out.unwrap_or_else(|| cfg.output.directory.clone());
            let (_, rows) = runner::run_sweep(&cfg, &protocols, &taus, &temps, &dir)?;
            let failed = rows.iter().filter(|r| !r.reason.is_empty()).count();
            println!("{} cells ({failed} failed) written to {}", rows.len(), dir.join("sweep.csv").display());
            Ok(0)
        }
        Command::Table1 {
            out,
            gamma_over_omega,
            lambda_over_omega,
        } => {
            let ov = Table1Overrides {
                gamma_over_omega,
                lambda_over_omega,
                numerics: None,
            };
            let (_, columns) = runner::run_table1(&ov, &out)?;
            print!("{:<10}", "");
            for c in &columns {
                print!("{:>16}", c.label());
            }
            println!();
            for (i, row) in runner::TABLE1_ROWS.iter().enumerate() {
                print!("{row:<10}");
                for c in &columns {
                    print!("{:>16}", format!("{:.4} ({:+.3})", c.values[i], c.delta[i]));
                }
                println!();
            }
            Ok(if columns.iter().any(|c| !c.reason.is_empty()) { 3 } else { 0 })
        }
        Command::LzDemo { delta, tau, cd, no_cd } => {
            let spec = LZSpec {
                delta,
                tau,
                with_cd: cd || !no_cd,
                ..Default::default()
            };
            spec.validate().map_err(|e| RunError::Config(e.to_string()))?;
            let outcome = lz_run(&spec).map_err(|source| RunError::Integration { step: "lz sweep", source })?;
            println!("{}", serde_json::to_string_pretty(&outcome).expect("serializes"));
            Ok(0)
        }
        Command::Validate => validate(),
    }
}

fn validate() -> Result<u8, RunError> {
    let integration = |step| move |source| RunError::Integration { step, source };
    let cfg = RunConfig::default();
    let basis = SpinBasis::new(cfg.basis.n, cfg.basis.kappa).map_err(|e| RunError::Config(e.to_string()))?;
    let system = cfg.system();
    let protocol = ProtocolSpec::standard(ProtocolKind::Quantum1, 1.0);
    let mut ok = true;
    let mut report = |name: &str, pass: bool, detail: String| {
        println!("{} {name}: {detail}", if pass { "PASS" } else { "FAIL" });
        ok &= pass;
    };

    let levels = benchmark_discretization(&basis, &system, &protocol, 0.0, &Grid1d::default())
        .map_err(integration("discretization benchmark"))?;
    let worst = levels[..BENCHMARK_LEVELS].iter().map(|l| l.rel_err).fold(0.0, f64::max);
    report("discretization", worst < 1e-2, format!("max relative error over {BENCHMARK_LEVELS} levels {worst:.3e}"));

    let omega = WellStates::at_start(&basis, &system, &protocol)
        .map_err(integration("well classification"))?
        .omega(1.0);
    report("omega", (2.25..=2.35).contains(&omega), format!("{omega:.5}"));

    let err = verify_decomposition(32, 100, 7).map_err(integration("entropy decomposition"))?;
    report("decomposition", err < 1e-10, format!("max error {err:.3e}"));

    let rho = wellgrade::model::initial_state(&basis, &system, &protocol).map_err(integration("initial state"))?;
    let (nt, np) = default_sizes(basis.dim());
    let wehrl_at = |nt, np, rho: &DensityMatrix| -> Result<(f64, f64), RunError> {
        let grid = sphere_grid(basis.dim(), nt, np).map_err(integration("sphere grid"))?;
        let field = husimi_field(rho, &grid);
        Ok((field.normalization(&grid), wehrl_entropy(&field, &grid)))
    };
    let (n1, w1) = wehrl_at(nt, np, &rho)?;
    let (n2, w2) = wehrl_at(2 * nt, 2 * np - 1, &rho)?;
    let rel = ((w1 - w2) / w2).abs();
    report(
        "grid refinement",
        rel < 1e-2 && (n1 - 1.0).abs() < 1e-8 && (n2 - 1.0).abs() < 1e-8,
        format!("Wehrl {w1:.8} vs {w2:.8} (rel {rel:.2e}), norms {n1:.12} {n2:.12}"),
    );
    Ok(if ok { 0 } else { 3 })
}
