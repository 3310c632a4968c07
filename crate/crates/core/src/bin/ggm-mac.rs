use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use ggm_mac::channel::{build_real_block, ChannelSpec};
use ggm_mac::estimators::uncoded_tail_constant;
use ggm_mac::harness::{self, ChannelConfig, ExperimentConfig, GainsConfig};
use ggm_mac::matrix_io::{self, MatrixFile};
use ggm_mac::metrics::theorem_bounds;
use ggm_mac::model::{self, RandomModelSpec};
use ggm_mac::solver::{self, SolverConfig};

#[derive(Parser)]
#[command(
    name = "ggm-mac",
    version,
    about = "Distributed GGM structure learning over a Gaussian MAC"
)]
struct Cli {
    /// Worker threads (defaults to all cores).
    #[arg(long, global = true, env = "GGM_MAC_THREADS")]
    threads: Option<usize>,
    #[command(subcommand)]
    cmd: Cmd,
}

#[derive(Subcommand)]
enum Cmd {
    /// Draw a model and write it as a matrix file.
    GenModel(GenModel),
    /// Run an experiment config and write the CSV.
    Run {
        config: PathBuf,
        /// CSV destination (stdout when omitted).
        #[arg(long, short)]
        out: Option<PathBuf>,
    },
    /// Check a config without running it.
    Validate { config: PathBuf },
    /// Print the sample-size bounds for a model and channel.
    Bounds(Bounds),
    /// Solve the penalized problem for one covariance matrix file.
    Solve(Solve),
}

#[derive(Args)]
struct GenModel {
    #[arg(long, default_value = "random", value_parser = ["random", "star"])]
    kind: String,
    #[arg(long)]
    d: usize,
    #[arg(long, default_value_t = 0.1)]
    edge_prob: f64,
    #[arg(long, default_value_t = 5)]
    max_degree: usize,
    #[arg(long, default_value_t = 0.25)]
    rho: f64,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long, short)]
    out: PathBuf,
}

#[derive(Args)]
struct Bounds {
    model: PathBuf,
    /// `identity`, `rayleigh` or `rayleigh(<seed>)`.
    #[arg(long, default_value = "identity")]
    gains: String,
    #[arg(long, default_value_t = 3.0)]
    snr: f64,
    /// Defaults to `1/(2d²)`.
    #[arg(long)]
    epsilon: Option<f64>,
}

#[derive(Args)]
struct Solve {
    input: PathBuf,
    #[arg(long)]
    lambda: f64,
    #[arg(long, default_value_t = SolverConfig::default().duality_tol)]
    duality_tol: f64,
    #[arg(long, default_value_t = SolverConfig::default().inner_tol)]
    inner_tol: f64,
    #[arg(long, default_value_t = SolverConfig::default().max_sweeps)]
    max_sweeps: usize,
    #[arg(long, short)]
    out: Option<PathBuf>,
}

fn gen_model(a: GenModel) -> ggm_mac::Result<()> {
    let m = match a.kind.as_str() {
        "star" => model::generate_star_model(a.d, a.rho)?,
        _ => model::generate_random_model(
            &RandomModelSpec::new(a.d, a.edge_prob, a.max_degree),
            a.seed,
        )?,
    };
    let alpha = model::compute_constants(&m).ok().map(|c| c.alpha);
    matrix_io::model_file(&m, alpha).save(&a.out)?;
    eprintln!(
        "{} edges, max degree {}, written to {}",
        m.edges().len(),
        m.max_degree(),
        a.out.display()
    );
    Ok(())
}

fn bounds(a: Bounds) -> ggm_mac::Result<()> {
    let m = matrix_io::model_from_file(&MatrixFile::load(&a.model)?)?;
    let d = m.dim();
    let constants = model::compute_constants(&m)?;
    let ch = ChannelConfig {
        gains: GainsConfig::Keyword(a.gains),
        snr: Some(a.snr),
        ..Default::default()
    };
    let spec: ChannelSpec = harness::build_channel(&ch, d, 0)?;
    let c = uncoded_tail_constant(&build_real_block(&spec)?);
    let eps = a.epsilon.unwrap_or(0.5 / (d * d) as f64);
    let b = theorem_bounds(&constants, &m, c, eps)?;
    println!("alpha            {:.6}", constants.alpha);
    println!("kappa_sigma      {:.6}", constants.kappa_sigma);
    println!("kappa_gamma      {:.6}", constants.kappa_gamma);
    println!("max_degree       {}", m.max_degree());
    println!("theta_min        {:.6}", m.theta_min());
    println!("channel c        {c:.6e}");
    println!("epsilon          {eps:.6e}");
    println!("C_sign           {:.6e}", b.c_sign);
    println!("T_sign           {:.6e}", b.t_sign);
    println!("C_uncoded        {:.6e}", b.c_uncoded);
    println!("T_uncoded        {:.6e}", b.t_uncoded);
    println!("n_min sign (a)   {:.6e}", b.n_min_sign_a);
    println!("n_min sign (b)   {:.6e}", b.n_min_sign_b);
    println!("n_min uncoded (a) {:.6e}", b.n_min_uncoded_a);
    println!("n_min uncoded (b) {:.6e}", b.n_min_uncoded_b);
    Ok(())
}

fn solve(a: Solve) -> ggm_mac::Result<()> {
    let est = matrix_io::estimate_from_file(&MatrixFile::load(&a.input)?)?;
    let cfg = SolverConfig {
        lambda: a.lambda,
        duality_tol: a.duality_tol,
        inner_tol: a.inner_tol,
        max_sweeps: a.max_sweeps,
        ..Default::default()
    };
    let r = solver::glasso_solve(&est, &cfg)?;
    let mut f = MatrixFile::new("solution");
    f.set("d", est.dim())
        .set("lambda", matrix_io::fmt_f64(a.lambda))
        .set("converged", r.converged)
        .set("sweeps", r.sweeps_used)
        .set("objective", matrix_io::fmt_f64(r.objective()))
        .set(
            "edges",
            r.edges
                .iter()
                .map(|(j, k)| format!("{j}-{k}"))
                .collect::<Vec<_>>()
                .join(","),
        );
    f.push("precision", r.theta_hat);
    match a.out {
        Some(p) => f.save(p)?,
        None => print!("{}", f.to_string_lossless()),
    }
    if !r.converged {
        eprintln!("warning: solver stopped at max_sweeps without converging");
    }
    Ok(())
}

fn run(config: PathBuf, out: Option<PathBuf>) -> ggm_mac::Result<()> {
    let cfg = ExperimentConfig::load(&config)?;
    let result = harness::run_experiment(&cfg)?;
    match out {
        Some(p) => result.write_csv(std::fs::File::create(p)?)?,
        None => result.write_csv(std::io::stdout().lock())?,
    }
    eprint!("{}", result.summary_table());
    Ok(())
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = Cli::parse();
    if let Some(t) = cli.threads {
        if let Err(e) = rayon::ThreadPoolBuilder::new()
            .num_threads(t)
            .build_global()
        {
            eprintln!("error: {e}");
            return ExitCode::FAILURE;
        }
    }
    let res = match cli.cmd {
        Cmd::GenModel(a) => gen_model(a),
        Cmd::Run { config, out } => run(config, out),
        Cmd::Validate { config } => match ExperimentConfig::load(&config) {
            Ok(cfg) => {
                let v = harness::validate_config(&cfg);
                if v.is_empty() {
                    println!("ok");
                    return ExitCode::SUCCESS;
                }
                for msg in &v {
                    println!("violation: {msg}");
                }
                return ExitCode::FAILURE;
            }
            Err(e) => Err(e),
        },
        Cmd::Bounds(a) => bounds(a),
        Cmd::Solve(a) => solve(a),
    };
    match res {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::FAILURE
        }
    }
}
