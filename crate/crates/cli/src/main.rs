use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::Context;
use clap::{Parser, Subcommand, ValueEnum};
use serde::Deserialize;

use corrlab::correlator::{correlator_bruteforce, correlator_metropolis, CorrelatorEstimate};
use corrlab::experiment::{load_record, run_experiment, persist, verify_claims, ClaimStatus, EngineConfig, ExperimentConfig, ExperimentKind};
use corrlab::hamiltonian::expectations;
use corrlab::oracle::Propagator;
use corrlab::ratios::{self, RatioInputs};
use corrlab::wavefunction::{gaussian, make_homogeneous, make_inhomogeneous};
use corrlab::{BoundaryPair, DiscreteWaveFunction, Error, HamiltonianSpec, LatticeSpec, PropagatorSpec};

#[derive(Parser)]
#[command(name = "corrlab", version, about = "Path-integral correlators over normalized lattice wave functions")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Closed-form contributions and ratios for one set of inputs.
    Ratios {
        #[arg(long)]
        sites: u64,
        #[arg(long)]
        spacing: f64,
        #[arg(long)]
        b2: f64,
        #[arg(long, default_value_t = 1e-3)]
        alpha: f64,
        #[arg(long, default_value_t = 16)]
        k: u64,
    },
    /// Crank–Nicolson evolution; prints norm, energy and locality per step.
    Propagate {
        #[arg(long)]
        config: PathBuf,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// A single correlator by exhaustive summation or Metropolis sampling.
    Correlator {
        #[arg(long)]
        config: PathBuf,
        #[arg(long, value_enum, default_value_t = Engine::Brute)]
        engine: Engine,
        #[arg(long)]
        seed: Option<u64>,
        #[arg(long)]
        budget: Option<u64>,
    },
    /// Runs one named experiment and writes its record.
    Experiment {
        kind: String,
        #[arg(long)]
        config: PathBuf,
        #[arg(long)]
        seed: Option<u64>,
        #[arg(long)]
        out: Option<PathBuf>,
        #[arg(long)]
        budget: Option<u64>,
    },
    /// Claim matrix over run directories.
    Verify {
        #[arg(required = true)]
        runs: Vec<PathBuf>,
    },
}

#[derive(Clone, Copy, ValueEnum)]
enum Engine {
    Brute,
    Metropolis,
}

/// A boundary state described in a config file.
#[derive(Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
enum StateSpec {
    Homogeneous,
    Inhomogeneous { b2: f64, peak_site: usize },
    Gaussian { center: f64, width: f64, #[serde(default)] wavenumber: f64 },
    Ground,
    Localized { site: usize },
    Explicit { state: DiscreteWaveFunction },
}

impl StateSpec {
    fn build(&self, l: &LatticeSpec, h: &HamiltonianSpec) -> corrlab::Result<DiscreteWaveFunction> {
        match self {
            StateSpec::Homogeneous => make_homogeneous(l),
            StateSpec::Inhomogeneous { b2, peak_site } => make_inhomogeneous(l, *b2, *peak_site),
            StateSpec::Gaussian { center, width, wavenumber } => gaussian(l, *center, *width, *wavenumber),
            StateSpec::Ground => Ok(h.ground_state(l)?.1),
            StateSpec::Localized { site } => Ok(h.localized_eigenstate(l, *site, 1e-9)?.1),
            StateSpec::Explicit { state } => Ok(state.clone()),
        }
    }
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct PropagateConfig {
    lattice: LatticeSpec,
    hamiltonian: HamiltonianSpec,
    initial: StateSpec,
    steps: usize,
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct CorrelatorConfig {
    lattice: LatticeSpec,
    hamiltonian: HamiltonianSpec,
    psi1: StateSpec,
    psi2: StateSpec,
    t1: i64,
    t2: i64,
    #[serde(default)]
    engine: EngineConfig,
}

/// Failure classes mapped onto exit codes.
enum Failure {
    Checks,
    Config(anyhow::Error),
}

impl From<anyhow::Error> for Failure {
    fn from(e: anyhow::Error) -> Self {
        Failure::Config(e)
    }
}

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        Failure::Config(e.into())
    }
}

fn read_toml<T: for<'de> Deserialize<'de>>(path: &Path) -> anyhow::Result<T> {
    let text = std::fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
    toml::from_str(&text).with_context(|| format!("parsing {}", path.display()))
}

fn print_json<T: serde::Serialize>(v: &T) -> anyhow::Result<()> {
    println!("{}", serde_json::to_string_pretty(v)?);
    Ok(())
}

fn ratios_cmd(sites: u64, spacing: f64, b2: f64, alpha: f64, k: u64) -> Result<(), Failure> {
    let i = RatioInputs::new(sites, spacing, b2).with_alpha(alpha).with_k(k);
    let asym = ratios::contribution_ratio_asymptotic(&i)?;
    let th = ratios::alpha_threshold(&i)?;
    print_json(&serde_json::json!({
        "inputs": i,
        "homogeneous_log": ratios::homogeneous_contribution(&i)?,
        "inhomogeneous_log": ratios::inhomogeneous_contribution(&i)?,
        "log_ratio_exact": ratios::log_ratio_exact(&i)?,
        "ratio_exact": ratios::contribution_ratio_exact(&i)?,
        "ratio_rearranged": ratios::contribution_ratio_rearranged(&i)?,
        "asymptotic": asym,
        "alpha_threshold": th,
    }))?;
    Ok(())
}

fn propagate_cmd(config: &Path, out: Option<&Path>) -> Result<(), Failure> {
    let c: PropagateConfig = read_toml(config)?;
    c.lattice.validate()?;
    let psi = c.initial.build(&c.lattice, &c.hamiltonian)?;
    let p = Propagator::new(&PropagatorSpec::new(c.hamiltonian.clone(), c.lattice.dt), &c.lattice)?;
    let hist = p.run(&psi, c.steps)?;
    let mut rows = String::from("step,norm,energy,momentum,locality\n");
    for (t, s) in hist.slices.iter().enumerate() {
        let (e, m) = expectations(s, &c.hamiltonian, &c.lattice)?;
        rows += &format!("{t},{:.16e},{:.16e},{:.16e},{:.16e}\n", s.norm_sq(), e, m, s.locality_score());
    }
    match out {
        Some(dir) => {
            std::fs::create_dir_all(dir).context("creating output directory")?;
            std::fs::write(dir.join("series_propagation.csv"), rows).context("writing series")?;
            std::fs::write(dir.join("final_state.json"), serde_json::to_string_pretty(hist.last()).context("serializing")?)
                .context("writing final state")?;
        }
        None => print!("{rows}"),
    }
    Ok(())
}

fn correlator_cmd(config: &Path, engine: Engine, seed: Option<u64>, budget: Option<u64>) -> Result<(), Failure> {
    let mut c: CorrelatorConfig = read_toml(config)?;
    if let Some(s) = seed {
        c.engine.seed = s;
    }
    if let Some(b) = budget {
        c.engine.budget = b;
    }
    for w in c.lattice.validate()? {
        eprintln!("warning: {w}");
    }
    let psi1 = c.psi1.build(&c.lattice, &c.hamiltonian)?;
    let psi2 = c.psi2.build(&c.lattice, &c.hamiltonian)?;
    let pair = BoundaryPair::new(psi1, psi2, c.t1, c.t2)?;
    let grid = c.engine.grid(&c.lattice);
    let est: CorrelatorEstimate = match engine {
        Engine::Brute => correlator_bruteforce(&pair, &c.hamiltonian, &c.lattice, &grid, c.engine.budget as u128)?,
        Engine::Metropolis => correlator_metropolis(&pair, &c.hamiltonian, &c.lattice, &grid, &c.engine.metropolis())?,
    };
    print_json(&est)?;
    Ok(())
}

fn experiment_cmd(kind: &str, config: &Path, seed: Option<u64>, out: Option<PathBuf>, budget: Option<u64>) -> Result<(), Failure> {
    let kind: ExperimentKind = kind.parse()?;
    let mut cfg = ExperimentConfig::load(config)?;
    if cfg.kind() != kind {
        return Err(Failure::Config(anyhow::anyhow!("config describes {} but {} was requested", cfg.kind(), kind)));
    }
    if let Some(s) = seed {
        cfg.engine.seed = s;
    }
    if let Some(b) = budget {
        cfg.engine.budget = b;
    }
    let (rec, man) = run_experiment(&cfg)?;
    for c in &rec.checks {
        println!("{} {}: measured {:.6e}, threshold {:.6e} ({})", if c.passed { "PASS" } else { "FAIL" }, c.name, c.measured, c.threshold, c.detail);
    }
    if let Some(dir) = out.or_else(|| cfg.output.clone()) {
        let path = persist(&cfg, &rec, &man, &dir)?;
        println!("wrote {}", path.display());
    }
    if rec.all_passed() {
        Ok(())
    } else {
        Err(Failure::Checks)
    }
}

fn verify_cmd(runs: &[PathBuf]) -> Result<(), Failure> {
    let records = runs
        .iter()
        .map(|d| load_record(d).with_context(|| format!("loading {}", d.display())))
        .collect::<anyhow::Result<Vec<_>>>()?;
    let rows = verify_claims(&records);
    for r in &rows {
        let status = match r.status {
            ClaimStatus::Pass => "pass",
            ClaimStatus::Fail => "FAIL",
            ClaimStatus::NotRun => "not run",
            ClaimStatus::Tampered => "TAMPERED",
        };
        let margin = r.margin.map(|m| format!("{m:.3e}")).unwrap_or_else(|| "-".into());
        println!("{status:<9} {:<18} margin {margin:<11} {}", r.experiment.name(), r.claim);
    }
    if rows.iter().any(|r| matches!(r.status, ClaimStatus::Fail | ClaimStatus::Tampered)) {
        Err(Failure::Checks)
    } else {
        Ok(())
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let res = match cli.command {
        Command::Ratios { sites, spacing, b2, alpha, k } => ratios_cmd(sites, spacing, b2, alpha, k),
        Command::Propagate { config, out } => propagate_cmd(&config, out.as_deref()),
        Command::Correlator { config, engine, seed, budget } => correlator_cmd(&config, engine, seed, budget),
        Command::Experiment { kind, config, seed, out, budget } => experiment_cmd(&kind, &config, seed, out, budget),
        Command::Verify { runs } => verify_cmd(&runs),
    };
    match res {
        Ok(()) => ExitCode::SUCCESS,
        Err(Failure::Checks) => ExitCode::from(1),
        Err(Failure::Config(e)) => {
            eprintln!("error: {e:#}");
            ExitCode::from(2)
        }
    }
}
