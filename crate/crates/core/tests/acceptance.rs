//! Acceptance suite. Runs every primary criterion at its stated tolerance and
//! prints one PASS/FAIL line per criterion, then exits non-zero if any failed.

use std::path::PathBuf;
use std::process::ExitCode;
use std::time::{Duration, Instant};

use corrlab::correlator::{correlator_bruteforce, correlator_metropolis, AmplitudeGrid, MetropolisOptions, DEFAULT_BUDGET};
use corrlab::experiment::{run_experiment, ExperimentConfig, ResultRecord};
use corrlab::hamiltonian::expectations;
use corrlab::ratios::{contribution_ratio_asymptotic, identity_deviation, log_ratio_exact};
use corrlab::wavefunction::gaussian;
use corrlab::{propagate, BoundaryPair, HamiltonianSpec, LatticeSpec, PropagatorSpec, RatioInputs};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

type Criterion = (&'static str, Duration, fn() -> Outcome);

struct Outcome {
    passed: bool,
    detail: String,
}

fn config(name: &str) -> ExperimentConfig {
    let path = PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("../../configs").join(format!("{name}.toml"));
    ExperimentConfig::load(&path).unwrap_or_else(|e| panic!("loading {}: {e}", path.display()))
}

fn run(name: &str) -> ResultRecord {
    run_experiment(&config(name)).unwrap_or_else(|e| panic!("{name}: {e}")).0
}

/// Outcome of the named checks of a shipped experiment.
fn from_checks(rec: &ResultRecord, names: &[&str]) -> Outcome {
    let mut passed = true;
    let mut parts = Vec::new();
    for n in names {
        let c = rec.check(n).unwrap_or_else(|| panic!("record has no check {n}"));
        passed &= c.passed;
        parts.push(format!("{n}={:.6e} (limit {:.3e}) {}", c.measured, c.threshold, c.detail));
    }
    Outcome {
        passed,
        detail: parts.join("; "),
    }
}

fn analytic_identities() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(1);
    let (mut forms, mut contrib, mut contrib_abs) = (0.0f64, 0.0f64, 0.0f64);
    for _ in 0..1000 {
        let m = rng.random_range(2f64.ln()..1e4f64.ln()).exp().round() as u64;
        let a = rng.random_range(1e-3f64.ln()..0.0).exp();
        let ab2: f64 = rng.random_range(1e-9..1.0);
        let i = RatioInputs::new(m, a, ab2 / a);
        if i.validate().is_err() {
            continue;
        }
        let d = identity_deviation(&i).unwrap();
        forms = forms.max(d.forms);
        contrib = contrib.max(d.contributions);
        contrib_abs = contrib_abs.max(d.contributions_absolute);
    }
    let i = RatioInputs::new(10_000, 0.25, 2.0);
    let asym = contribution_ratio_asymptotic(&i).unwrap();
    let conv = ((asym.log_value - log_ratio_exact(&i).unwrap()).exp() - 1.0).abs();
    Outcome {
        passed: forms <= 1e-12 && contrib <= 1e-12 && conv <= 1e-3,
        detail: format!(
            "exact vs rearranged {forms:.3e}, exact vs exp(dlog) {contrib:.3e} relative to the contributions ({contrib_abs:.3e} in the log), asymptotic/exact - 1 at M=1e4 {conv:.3e}"
        ),
    }
}

fn cn_lattice(h: &HamiltonianSpec) -> LatticeSpec {
    let l = LatticeSpec::new(12, 0.5, 0.05, 1e-3, 16);
    match h.kind {
        corrlab::HamiltonianKind::DoubleWell { .. } | corrlab::HamiltonianKind::Pinning { .. } => {
            l.with_boundary(corrlab::Boundary::Dirichlet)
        }
        _ => l,
    }
}

fn schrodinger_oracle() -> Outcome {
    let kinds = [
        ("free", HamiltonianSpec::free()),
        ("harmonic", HamiltonianSpec::harmonic(1.5, 3.0)),
        ("double_well", HamiltonianSpec::double_well(3, 8, 2.0, 0.2)),
        ("pinning", HamiltonianSpec::pinning(5, 1.0)),
        ("composite_detector", HamiltonianSpec::composite(2, 4.0)),
    ];
    let (mut norm, mut energy, mut back) = (0.0f64, 0.0f64, 0.0f64);
    let mut parts = Vec::new();
    for (name, h) in kinds {
        let l = cn_lattice(&h);
        let psi0 = gaussian(&l, 2.0, 0.6, 1.3).unwrap();
        let spec = PropagatorSpec::new(h.clone(), l.dt);
        let fwd = propagate(&psi0, &spec, &l, 1000).unwrap();
        let (e0, _) = expectations(&psi0, &h, &l).unwrap();
        let mut n_drift = 0.0f64;
        let mut e_drift = 0.0f64;
        for s in &fwd.slices {
            n_drift = n_drift.max((s.norm_sq() - 1.0).abs());
            e_drift = e_drift.max((expectations(s, &h, &l).unwrap().0 - e0).abs());
        }
        let rev = propagate(fwd.last(), &spec.reversed(), &l, 1000).unwrap();
        let ret = rev
            .last()
            .amplitudes()
            .iter()
            .zip(psi0.amplitudes())
            .map(|(x, y)| (x - y).norm())
            .fold(0.0, f64::max);
        norm = norm.max(n_drift);
        energy = energy.max(e_drift);
        back = back.max(ret);
        parts.push(format!("{name} {n_drift:.1e}/{e_drift:.1e}/{ret:.1e}"));
    }
    Outcome {
        passed: norm < 1e-10 && energy < 1e-8 && back <= 1e-8,
        detail: format!("norm drift {norm:.3e}, energy drift {energy:.3e}, reversal {back:.3e} [{}]", parts.join(", ")),
    }
}

fn oracle_agreement() -> Outcome {
    let l = LatticeSpec::new(2, 0.5, 0.1, 0.3, 8);
    let h = HamiltonianSpec::harmonic(1.0, 0.25);
    let psi1 = gaussian(&l, 0.0, 0.4, 0.7).unwrap();
    let psi2 = gaussian(&l, 0.5, 0.6, -0.4).unwrap();
    let pair = BoundaryPair::new(psi1, psi2, 0, 2).unwrap();
    let grid = AmplitudeGrid::new(8, 8);
    let bf = correlator_bruteforce(&pair, &h, &l, &grid, DEFAULT_BUDGET).unwrap();
    let opts = MetropolisOptions::new(16, 20_000, 20240611);
    let mc = correlator_metropolis(&pair, &h, &l, &grid, &opts).unwrap();
    let again = correlator_metropolis(&pair, &h, &l, &grid, &opts).unwrap();
    let identical = serde_json::to_string(&mc).unwrap() == serde_json::to_string(&again).unwrap();
    let dist = (mc.value - bf.value).norm();
    Outcome {
        passed: dist <= 3.0 * mc.abs_error && identical,
        detail: format!(
            "brute {:.6e}{:+.6e}i over {} points, metropolis {:.6e}{:+.6e}i, distance {:.2} SE, repeat identical {identical}",
            bf.value.re, bf.value.im, bf.n_points, mc.value.re, mc.value.im, dist / mc.abs_error
        ),
    }
}

fn main() -> ExitCode {
    let criteria: [Criterion; 9] = [
        ("analytic identity suite", Duration::from_secs(5), analytic_identities),
        ("measure dominance", Duration::from_secs(10), || {
            from_checks(&run("measure_dominance"), &["reduced_ratio_below_one", "measure_matches_formula"])
        }),
        ("schrodinger oracle", Duration::from_secs(30), schrodinger_oracle),
        ("alpha scaling", Duration::from_secs(120), || {
            from_checks(&run("alpha_scaling"), &["solution_slope", "non_solution_slope"])
        }),
        ("correlator oracle agreement", Duration::from_secs(180), oracle_agreement),
        ("time symmetry", Duration::from_secs(120), || from_checks(&run("time_symmetry"), &["magnitude_symmetry"])),
        ("born rule", Duration::from_secs(300), || from_checks(&run("born_rule"), &["branch_ratio"])),
        ("nonlinearity", Duration::from_secs(180), || {
            from_checks(&run("nonlinearity"), &["superposition_suppressed"])
        }),
        ("collapse timing", Duration::from_secs(120), || {
            from_checks(&run("collapse_timing"), &["short_horizon_schrodinger_first", "long_horizon_collapse_first"])
        }),
    ];
    let mut failed = 0;
    for (name, limit, f) in criteria {
        let start = Instant::now();
        let out = f();
        let took = start.elapsed();
        let ok = out.passed && took <= limit;
        if !ok {
            failed += 1;
        }
        println!(
            "{} {name}: {} [{:.2}s of {}s]",
            if ok { "PASS" } else { "FAIL" },
            out.detail,
            took.as_secs_f64(),
            limit.as_secs()
        );
    }
    println!("acceptance: {} of 9 criteria passed", 9 - failed);
    if failed == 0 {
        ExitCode::SUCCESS
    } else {
        ExitCode::FAILURE
    }
}
