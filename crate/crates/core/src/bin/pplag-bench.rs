use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};

use pplag_core::bench::{
    self, InstanceSource, RunConfig, SolverChoice, EXIT_CONFIG_ERROR, EXIT_NUMERICAL_FAILURE, OUTPUT_DIR_ENV,
};
use pplag_core::{Error, GeneratorConfig};

#[derive(Parser)]
#[command(name = "pplag-bench", version, about = "P-Lagrangian vs SProx-ALM benchmark harness")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Generate a random LCQP instance directory.
    Gen {
        #[arg(long)]
        n: usize,
        #[arg(long)]
        m: usize,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long, default_value_t = 0.0)]
        lower: f64,
        #[arg(long, default_value_t = 5.0)]
        upper: f64,
        /// Instance directory to create.
        #[arg(long)]
        out: PathBuf,
        /// Overwrite an existing directory.
        #[arg(long)]
        force: bool,
    },
    /// Run one solver (or both) and write trace CSV plus summary.json.
    Solve(RunArgs),
    /// Run both solvers on the same instance and write report.json.
    Compare(RunArgs),
    /// Run the P-Lagrangian once per alpha value.
    SweepAlpha {
        #[command(flatten)]
        run: RunArgs,
        /// Comma-separated alpha values.
        #[arg(long, value_delimiter = ',', required = true)]
        alphas: Vec<f64>,
    },
}

#[derive(Clone, Copy, ValueEnum)]
enum SolverArg {
    Pplag,
    Sproxalm,
    Both,
}

#[derive(Args)]
struct RunArgs {
    /// JSON run configuration; flags below override it.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Load the instance from this directory.
    #[arg(long, conflicts_with_all = ["n", "m", "seed"])]
    instance: Option<PathBuf>,
    #[arg(long)]
    n: Option<usize>,
    #[arg(long)]
    m: Option<usize>,
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long, value_enum)]
    solver: Option<SolverArg>,
    #[arg(long)]
    alpha: Option<f64>,
    #[arg(long)]
    beta: Option<f64>,
    #[arg(long = "r")]
    r_ratio: Option<f64>,
    #[arg(long)]
    delta0: Option<f64>,
    #[arg(long)]
    eta_safety: Option<f64>,
    /// SProx-ALM penalty (default 2 L_f).
    #[arg(long)]
    gamma: Option<f64>,
    #[arg(long)]
    max_iters: Option<u64>,
    #[arg(long)]
    eps_stat: Option<f64>,
    #[arg(long)]
    eps_feas: Option<f64>,
    #[arg(long)]
    record_every: Option<u64>,
    /// Seed for the random starting point (default: instance seed).
    #[arg(long)]
    init_seed: Option<u64>,
    /// Fill the wallclock_ns trace column.
    #[arg(long)]
    timing: bool,
    /// Output directory (default: $PPLAG_OUTPUT_DIR or ./out).
    #[arg(long, env = OUTPUT_DIR_ENV)]
    out: Option<PathBuf>,
}

impl RunArgs {
    fn into_config(self) -> Result<RunConfig, Error> {
        let mut cfg = match &self.config {
            Some(path) => RunConfig::from_json_file(path)?,
            None => RunConfig::default(),
        };
        if let Some(path) = self.instance {
            cfg.instance = InstanceSource::Load { path };
        } else if self.n.is_some() || self.m.is_some() || self.seed.is_some() {
            let base = match &cfg.instance {
                InstanceSource::Generate(g) => g.clone(),
                InstanceSource::Load { .. } => GeneratorConfig::new(50, 10, 0),
            };
            cfg.instance = InstanceSource::Generate(GeneratorConfig {
                n: self.n.unwrap_or(base.n),
                m: self.m.unwrap_or(base.m),
                seed: self.seed.unwrap_or(base.seed),
                ..base
            });
        }
        if let Some(s) = self.solver {
            cfg.solver = match s {
                SolverArg::Pplag => SolverChoice::Pplag,
                SolverArg::Sproxalm => SolverChoice::Sproxalm,
                SolverArg::Both => SolverChoice::Both,
            };
        }
        let p = &mut cfg.pplag;
        p.alpha = self.alpha.unwrap_or(p.alpha);
        p.beta = self.beta.unwrap_or(p.beta);
        p.r_ratio = self.r_ratio.unwrap_or(p.r_ratio);
        p.delta0 = self.delta0.unwrap_or(p.delta0);
        p.eta_safety = self.eta_safety.unwrap_or(p.eta_safety);
        cfg.gamma = self.gamma.or(cfg.gamma);
        cfg.stop.max_iters = self.max_iters.unwrap_or(cfg.stop.max_iters);
        cfg.stop.eps_stat = self.eps_stat.unwrap_or(cfg.stop.eps_stat);
        cfg.stop.eps_feas = self.eps_feas.unwrap_or(cfg.stop.eps_feas);
        cfg.record_every = self.record_every.or(cfg.record_every);
        cfg.init_seed = self.init_seed.or(cfg.init_seed);
        cfg.timing |= self.timing;
        if let Some(out) = self.out {
            cfg.output_dir = out;
        }
        Ok(cfg)
    }
}

fn error_code(e: &Error) -> i32 {
    match e {
        Error::NumericalFailure { .. } => EXIT_NUMERICAL_FAILURE,
        Error::Io { .. } => 1,
        _ => EXIT_CONFIG_ERROR,
    }
}

fn run(cli: Cli) -> Result<i32, Error> {
    match cli.command {
        Command::Gen {
            n,
            m,
            seed,
            lower,
            upper,
            out,
            force,
        } => {
            let cfg = GeneratorConfig {
                lower_value: lower,
                upper_value: upper,
                ..GeneratorConfig::new(n, m, seed)
            };
            let meta = bench::cmd_gen(&cfg, &out, force)?;
            println!(
                "n={} m={} seed={} L_Q={:.6e} sigma_max={:.6e} -> {}",
                meta.n,
                meta.m,
                meta.seed,
                meta.lipschitz,
                meta.sigma_max,
                out.display()
            );
            Ok(0)
        }
        Command::Solve(args) => {
            let report = bench::cmd_solve(&args.into_config()?)?;
            println!("{}", serde_json::to_string_pretty(&report)?);
            Ok(report.exit_code())
        }
        Command::Compare(args) => {
            let report = bench::cmd_compare(&args.into_config()?)?;
            println!("{}", serde_json::to_string_pretty(&report)?);
            Ok(report.exit_code())
        }
        Command::SweepAlpha { run, alphas } => {
            let report = bench::cmd_sweep_alpha(&run.into_config()?, &alphas)?;
            println!("{}", serde_json::to_string_pretty(&report)?);
            Ok(report.exit_code())
        }
    }
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() { EXIT_CONFIG_ERROR as u8 } else { 0 };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    match run(cli) {
        Ok(code) => ExitCode::from(code as u8),
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(error_code(&e) as u8)
        }
    }
}
