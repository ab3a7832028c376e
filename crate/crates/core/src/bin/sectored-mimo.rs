use std::path::PathBuf;
use std::process::ExitCode;

use clap::Parser;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use sectored_mimo::harness::{self, ScenarioSpec};
use sectored_mimo::verification::validate_bound;
use sectored_mimo::{build_coupling, build_layout, drop_users, upa, AntennaMode, Error, NetworkConfig, Result, Scheme};

/// Sectorized multi-cell massive MIMO downlink simulator.
#[derive(Debug, Parser)]
#[command(version)]
struct Cli {
    /// TOML configuration file; missing keys take the built-in defaults.
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long, default_value = "upa")]
    scheme: Scheme,
    #[arg(long = "antenna-mode", default_value = "directional")]
    antenna_mode: AntennaMode,
    /// Total elements per base station, comma separated.
    #[arg(long, value_delimiter = ',', default_value = "100")]
    mb: Vec<f64>,
    #[arg(long, default_value_t = 10)]
    drops: usize,
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long, default_value = "out")]
    out: PathBuf,
    /// Worker threads (defaults to all cores).
    #[arg(long)]
    threads: Option<usize>,
    /// Run the Monte Carlo check of the closed-form bound instead of a scenario.
    #[arg(long)]
    verify: bool,
    /// Monte Carlo trials for `--verify`.
    #[arg(long, default_value_t = 10_000)]
    trials: usize,
    /// Elements per array for `--verify`.
    #[arg(long, default_value_t = 16)]
    verify_elements: u32,
}

fn base_config(cli: &Cli) -> Result<NetworkConfig> {
    let mut cfg = match &cli.config {
        Some(path) => NetworkConfig::load(path)?,
        None => NetworkConfig::default(),
    };
    if let Some(seed) = cli.seed {
        cfg.seed = seed;
    }
    cfg.mode = cli.antenna_mode;
    Ok(cfg)
}

fn verify(cli: &Cli, mut cfg: NetworkConfig) -> Result<()> {
    // element count refers to one array in either mode
    cfg.antennas_per_array = match cfg.mode {
        AntennaMode::Directional => f64::from(cli.verify_elements),
        AntennaMode::Omni => f64::from(cli.verify_elements) / 3.0,
    };
    cfg.validate()?;
    let layout = build_layout(&cfg)?;
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let users = drop_users(&cfg, &layout, &mut rng)?;
    let coupling = build_coupling(&layout, &users, &cfg, &mut rng)?;
    let report = validate_bound(&coupling, &upa(&cfg, &layout), &cfg, cli.trials)?;

    std::fs::create_dir_all(&cli.out).map_err(|e| Error::Io { path: cli.out.clone(), source: e })?;
    let path = cli.out.join("verification.json");
    let text = serde_json::to_string_pretty(&report).map_err(|e| Error::NumericalBreakdown(e.to_string()))?;
    std::fs::write(&path, text).map_err(|e| Error::Io { path: path.clone(), source: e })?;

    let worst = |f: &dyn Fn(&sectored_mimo::verification::UserBoundCheck) -> f64| {
        report.users.iter().map(f).fold(0.0, f64::max)
    };
    println!("trials {} elements {}", report.trials, report.elements);
    println!("max |Var[T2]/E|T2|^2 - 1| {:.4}", worst(&|u| (u.variance[2] / u.expected_t2 - 1.0).abs()));
    println!("max |undirected/I2 - 1|   {:.4}", worst(&|u| (u.undirected_noiseless / u.undirected - 1.0).abs()));
    println!(
        "max pairwise |corr|       {:.4} (3/sqrt(n) = {:.4})",
        worst(&|u| u.max_correlation()),
        3.0 / (report.trials as f64).sqrt()
    );
    println!("report written to {}", path.display());
    Ok(())
}

fn run(cli: &Cli) -> Result<()> {
    let cfg = base_config(cli)?;
    if cli.verify {
        return verify(cli, cfg);
    }
    let spec = ScenarioSpec {
        base: cfg,
        mode: cli.antenna_mode,
        scheme: cli.scheme,
        mb: cli.mb.clone(),
        n_drops: cli.drops,
        output_dir: Some(cli.out.clone()),
        threads: cli.threads,
    };
    let (result, secs) = harness::run_and_export(&spec)?;
    for sweep in &result.sweeps {
        println!(
            "{}-{} M_B={} rows={} failed={} 0.95-likely rate={:.6} bits/s/Hz",
            spec.mode,
            spec.scheme,
            sweep.mb,
            sweep.records.len(),
            sweep.failures.len(),
            sweep.likely_rate_95()?
        );
    }
    println!("wrote {} in {secs:.1}s", cli.out.display());
    Ok(())
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(&cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
