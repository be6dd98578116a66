use std::path::Path;

use corrlab::correlator::{correlator_bruteforce, correlator_metropolis, AmplitudeGrid, MetropolisOptions, DEFAULT_BUDGET};
use corrlab::experiment::{born_rule_setup, load_record, persist, run_experiment, run_to_dir, verify_claims, ClaimStatus, ExperimentConfig};
use corrlab::measure::raw_action;
use corrlab::wavefunction::{concentrated, gaussian};
use corrlab::{
    compare_history_families, make_homogeneous, propagate, schrodinger_residual, Boundary, BoundaryPair,
    DiscreteWaveFunction, FluctuationOptions, HamiltonianSpec, HistoryFamily, LatticeSpec, PropagatorSpec, WaveHistory,
};
use num_complex::Complex64;
use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn config(name: &str) -> ExperimentConfig {
    let path = Path::new(env!("CARGO_MANIFEST_DIR")).join("../../configs").join(format!("{name}.toml"));
    ExperimentConfig::load(&path).unwrap()
}

fn state(probs: &[f64], phases: &[f64], a: f64) -> DiscreteWaveFunction {
    DiscreteWaveFunction::from_probabilities(probs, phases, a).unwrap()
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(24))]

    #[test]
    fn residual_vanishes_exactly_on_propagated_histories(
        probs in prop::collection::vec(0.05f64..1.0, 4),
        phases in prop::collection::vec(0.0f64..std::f64::consts::TAU, 4),
        omega in 0.2f64..2.0,
        noise in 0.05f64..0.5,
    ) {
        let l = LatticeSpec::new(4, 0.5, 0.1, 1e-2, 16);
        let h = HamiltonianSpec::harmonic(omega, 0.75);
        let spec = PropagatorSpec::new(h, l.dt);
        let hist = propagate(&state(&probs, &phases, l.spacing), &spec, &l, 5).unwrap();
        prop_assert!(schrodinger_residual(&hist, &spec).unwrap().total < 1e-12);

        let mut slices = hist.slices.clone();
        let mut amps = slices[2].amplitudes().to_vec();
        amps[0] += Complex64::new(noise, -noise);
        slices[2] = DiscreteWaveFunction::normalized(amps, l.spacing).unwrap();
        let broken = WaveHistory::new(&hist.lattice, slices).unwrap().with_step(hist.step);
        prop_assert!(schrodinger_residual(&broken, &spec).unwrap().total > 1e-6);
    }
}

/// Central difference of the raw action along a norm-preserving curve through the
/// interior slices.
fn directional_derivative(hist: &WaveHistory, h: &HamiltonianSpec, dirs: &[Vec<Complex64>], eps: f64) -> f64 {
    let hmat = h.matrix(&hist.lattice).unwrap();
    let at = |s: f64| {
        let mut slices = hist.slices.clone();
        for (t, d) in dirs.iter().enumerate() {
            let amps: Vec<Complex64> = slices[t + 1].amplitudes().iter().zip(d).map(|(x, y)| x + y * s).collect();
            slices[t + 1] = DiscreteWaveFunction::normalized(amps, hist.lattice.spacing).unwrap();
        }
        raw_action(&WaveHistory::new(&hist.lattice, slices).unwrap().with_step(hist.step), &hmat)
    };
    (at(eps) - at(-eps)) / (2.0 * eps)
}

#[test]
fn propagated_history_is_stationary_along_random_directions() {
    let l = LatticeSpec::new(6, 0.5, 0.05, 1e-3, 16);
    let h = HamiltonianSpec::free();
    let spec = PropagatorSpec::new(h.clone(), l.dt);
    let hist = propagate(&gaussian(&l, 1.0, 0.6, 1.0).unwrap(), &spec, &l, 6).unwrap();
    let mut noisy_slices = hist.slices.clone();
    noisy_slices[3] = gaussian(&l, 2.0, 0.4, -2.0).unwrap();
    let noisy = WaveHistory::new(&hist.lattice, noisy_slices).unwrap().with_step(hist.step);

    let mut rng = ChaCha8Rng::seed_from_u64(3);
    for _ in 0..10 {
        let dirs: Vec<Vec<Complex64>> = (1..hist.slices.len() - 1)
            .map(|t| {
                let psi = hist.slices[t].amplitudes();
                let raw: Vec<Complex64> = (0..l.sites)
                    .map(|_| Complex64::new(rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0)))
                    .collect();
                // drop the component along psi so the first-order norm change vanishes
                let dot: Complex64 = psi.iter().zip(&raw).map(|(p, r)| p.conj() * r).sum::<Complex64>()
                    / psi.iter().map(|p| p.norm_sqr()).sum::<f64>();
                raw.iter().zip(psi).map(|(r, p)| r - p * dot).collect()
            })
            .collect();
        let d_sol = directional_derivative(&hist, &h, &dirs, 1e-4).abs();
        let d_noisy = directional_derivative(&noisy, &h, &dirs, 1e-4).abs();
        assert!(d_sol < 1e-6, "solution derivative {d_sol:e}");
        assert!(d_noisy > 1e3 * d_sol, "noisy {d_noisy:e} vs solution {d_sol:e}");
    }
}

#[test]
fn brute_force_is_covariant_under_site_relabeling() {
    let grid = AmplitudeGrid::new(6, 4);
    // reflection on a Dirichlet lattice with a pinned site
    let l = LatticeSpec::new(3, 1.0, 0.1, 0.05, 6).with_boundary(Boundary::Dirichlet);
    let psi1 = state(&[0.5, 0.3, 0.2], &[0.0, 0.4, 1.1], 1.0);
    let psi2 = state(&[0.2, 0.2, 0.6], &[0.3, -0.2, 0.9], 1.0);
    let flip = |p: &DiscreteWaveFunction| {
        DiscreteWaveFunction::new(p.amplitudes().iter().rev().copied().collect(), p.spacing()).unwrap()
    };
    let c = correlator_bruteforce(&BoundaryPair::new(psi1.clone(), psi2.clone(), 0, 2).unwrap(), &HamiltonianSpec::pinning(0, 1.0), &l, &grid, DEFAULT_BUDGET).unwrap();
    let r = correlator_bruteforce(&BoundaryPair::new(flip(&psi1), flip(&psi2), 0, 2).unwrap(), &HamiltonianSpec::pinning(2, 1.0), &l, &grid, DEFAULT_BUDGET).unwrap();
    assert!((c.value - r.value).norm() <= 1e-10 * c.value.norm(), "{} vs {}", c.value, r.value);

    // cyclic shift on a periodic free lattice
    let l = LatticeSpec::new(3, 1.0, 0.1, 0.05, 6);
    let shift = |p: &DiscreteWaveFunction| {
        let mut v = p.amplitudes().to_vec();
        v.rotate_right(1);
        DiscreteWaveFunction::new(v, p.spacing()).unwrap()
    };
    let h = HamiltonianSpec::free();
    let c = correlator_bruteforce(&BoundaryPair::new(psi1.clone(), psi2.clone(), 0, 2).unwrap(), &h, &l, &grid, DEFAULT_BUDGET).unwrap();
    let s = correlator_bruteforce(&BoundaryPair::new(shift(&psi1), shift(&psi2), 0, 2).unwrap(), &h, &l, &grid, DEFAULT_BUDGET).unwrap();
    assert!((c.value - s.value).norm() <= 1e-10 * c.value.norm(), "{} vs {}", c.value, s.value);
}

#[test]
fn metropolis_error_shrinks_with_chain_length() {
    let l = LatticeSpec::new(2, 0.5, 0.1, 0.3, 8);
    let h = HamiltonianSpec::harmonic(1.0, 0.25);
    let pair = BoundaryPair::new(gaussian(&l, 0.0, 0.4, 0.7).unwrap(), gaussian(&l, 0.5, 0.6, -0.4).unwrap(), 0, 2).unwrap();
    let grid = AmplitudeGrid::new(8, 8);
    let exact = correlator_bruteforce(&pair, &h, &l, &grid, DEFAULT_BUDGET).unwrap().value;
    let mut z = Vec::new();
    for seed in 0..8 {
        let short = correlator_metropolis(&pair, &h, &l, &grid, &MetropolisOptions::new(16, 2_000, seed)).unwrap();
        let long = correlator_metropolis(&pair, &h, &l, &grid, &MetropolisOptions::new(16, 32_000, seed)).unwrap();
        let shrink = short.abs_error / long.abs_error;
        assert!((2.0..8.0).contains(&shrink), "seed {seed}: standard error shrank by {shrink}");
        z.push((long.value - exact).norm() / long.abs_error);
    }
    z.sort_by(f64::total_cmp);
    // the distance is a two-component deviation, so its median sits near 0.8 SE
    assert!(z[3] < 1.5 && z[7] < 4.0, "{z:?}");
}

#[test]
fn equal_probabilities_give_equal_branches() {
    let l = LatticeSpec::new(4, 1.0, 0.1, 1e-3, 16).with_boundary(Boundary::Dirichlet);
    let setup = born_rule_setup(&[0.5, 0.5], 2, 4.0, &l, 2).unwrap();
    let grid = AmplitudeGrid::new(16, 4);
    let m: Vec<f64> = setup
        .pairs
        .iter()
        .map(|p| correlator_bruteforce(p, &setup.hamiltonian, &setup.lattice, &grid, DEFAULT_BUDGET).unwrap().value.norm())
        .collect();
    assert!((m[0] / m[1] - 1.0).abs() < 1e-9, "{m:?}");
}

/// Free particle on a small ring, collapsing onto a concentrated state. The
/// Schrodinger family leads at two links; by ten links the larger measure of the
/// concentrated slices outweighs it even though nothing here is macroscopic.
#[test]
fn microscopic_free_particle_ranking_flips_with_horizon() {
    let l = LatticeSpec::new(5, 1.0, 0.1, 1e-3, 64);
    let h = HamiltonianSpec::free();
    let prop = PropagatorSpec::new(h.clone(), l.dt);
    let psi1 = gaussian(&l, 1.0, 1.0, 0.8).unwrap();
    let target = concentrated(&l, 2, 0.05).unwrap();
    let opts = FluctuationOptions { window: 0.1, ..Default::default() };
    for (links, leader) in [(2, "schrodinger"), (10, "collapse")] {
        let fams = [
            HistoryFamily::schrodinger(&psi1, &prop, &l, links).unwrap(),
            HistoryFamily::collapse(&psi1, &target, 1, &prop, &l, links).unwrap(),
        ];
        let pair = BoundaryPair::new(psi1.clone(), fams[0].center.last().clone(), 0, links as i64).unwrap();
        let ranking = compare_history_families(&fams, &pair, &h, &opts).unwrap();
        let s = ranking.get("schrodinger").unwrap().log_contribution;
        let c = ranking.get("collapse").unwrap().log_contribution;
        assert_eq!(ranking.leader().label, leader, "links {links}: schrodinger {s}, collapse {c}");
    }
}

#[test]
fn families_must_share_the_initial_state() {
    let l = LatticeSpec::new(4, 1.0, 0.1, 1e-3, 16);
    let h = HamiltonianSpec::free();
    let prop = PropagatorSpec::new(h.clone(), l.dt);
    let psi1 = gaussian(&l, 1.0, 1.0, 0.3).unwrap();
    let other = make_homogeneous(&l).unwrap();
    let fams = [
        HistoryFamily::schrodinger(&psi1, &prop, &l, 3).unwrap(),
        HistoryFamily::schrodinger(&other, &prop, &l, 3).unwrap().with_label("other"),
    ];
    let pair = BoundaryPair::new(psi1.clone(), fams[0].center.last().clone(), 0, 3).unwrap();
    assert!(compare_history_families(&fams, &pair, &h, &Default::default()).is_err());
}

fn file_bytes(dir: &Path) -> Vec<(String, Vec<u8>)> {
    let mut out: Vec<_> = std::fs::read_dir(dir)
        .unwrap()
        .map(|e| e.unwrap())
        .filter(|e| e.file_name() != "manifest.json")
        .map(|e| (e.file_name().to_string_lossy().into_owned(), std::fs::read(e.path()).unwrap()))
        .collect();
    out.sort();
    out
}

#[test]
fn runs_are_byte_reproducible() {
    let tmp = tempfile::tempdir().unwrap();
    for name in ["time_symmetry", "alpha_scaling", "collapse_timing"] {
        let cfg = config(name);
        let a = tmp.path().join(format!("{name}_a"));
        let b = tmp.path().join(format!("{name}_b"));
        run_to_dir(&cfg, Some(&a)).unwrap();
        run_to_dir(&cfg, Some(&b)).unwrap();
        let (fa, fb) = (file_bytes(&a), file_bytes(&b));
        assert!(fa.len() >= 3);
        assert_eq!(fa, fb, "{name}");
    }
}

#[test]
fn persist_replaces_runs_without_leftovers() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = config("time_symmetry");
    let out = tmp.path().join("run");
    let (rec, man) = run_experiment(&cfg).unwrap();
    persist(&cfg, &rec, &man, &out).unwrap();
    std::fs::write(out.join("stale.txt"), "old").unwrap();
    persist(&cfg, &rec, &man, &out).unwrap();
    assert!(!out.join("stale.txt").exists());
    let names: Vec<_> = std::fs::read_dir(tmp.path()).unwrap().map(|e| e.unwrap().file_name()).collect();
    assert_eq!(names, vec![std::ffi::OsString::from("run")]);
    assert_eq!(load_record(&out).unwrap(), rec);

    // a parent that is a plain file makes the write fail before anything appears
    let blocker = tmp.path().join("blocker");
    std::fs::write(&blocker, "").unwrap();
    assert!(persist(&cfg, &rec, &man, &blocker.join("run")).is_err());
}

#[test]
fn claim_matrix_reports_missing_tampered_and_decided_rows() {
    assert!(verify_claims(&[]).iter().all(|r| r.status == ClaimStatus::NotRun));

    let tmp = tempfile::tempdir().unwrap();
    let dir = tmp.path().join("alpha");
    let (rec, _, _) = run_to_dir(&config("alpha_scaling"), Some(&dir)).unwrap();
    let summary = std::fs::read_to_string(dir.join("summary.json")).unwrap();
    let slope = rec.metrics["solution_slope"].value;
    let edited = summary.replacen(&format!("{slope}"), "3.0", 1);
    assert_ne!(summary, edited);
    std::fs::write(dir.join("summary.json"), edited).unwrap();
    let tampered = load_record(&dir).unwrap();
    let rows = verify_claims(&[tampered]);
    assert!(rows.iter().filter(|r| r.experiment == rec.kind).all(|r| r.status == ClaimStatus::Tampered));

    let all: Vec<_> = ["measure_dominance", "alpha_scaling", "time_symmetry", "collapse_timing", "nonlinearity", "born_rule"]
        .iter()
        .map(|n| run_experiment(&config(n)).unwrap().0)
        .collect();
    let rows = verify_claims(&all);
    for r in &rows {
        println!("{:?} {} {}", r.status, r.experiment, r.claim);
        assert!(matches!(r.status, ClaimStatus::Pass | ClaimStatus::Fail), "{r:?}");
    }
}

#[test]
fn shipped_configs_round_trip_through_toml() {
    for kind in corrlab::experiment::ExperimentKind::ALL {
        let cfg = config(kind.name());
        assert_eq!(cfg.kind(), kind);
        let again = ExperimentConfig::from_toml(&cfg.to_toml().unwrap()).unwrap();
        assert_eq!(again, cfg, "{kind}");
    }
}
