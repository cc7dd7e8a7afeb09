//! Acceptance suite. Prints one PASS/FAIL line per criterion and exits
//! nonzero if any criterion fails.
//!
//! Run with `cargo test -p gkbo --test acceptance`.

use std::process::ExitCode;
use std::time::{Duration, Instant};

use gkbo::bench::{
    run_experiment, write_results, ExperimentConfig, ExperimentSummary, SolverKind, Sweep,
    SweepVariable, SUCCESS_THRESHOLD,
};
use gkbo::cli::compare_defaults;
use gkbo::ensemble::{apply_label_transitions, WeightVector};
use gkbo::gkbo::{assign_clusters, cluster_consensus_from_energies};
use gkbo::{run_gkbo, Ensemble, GkboState, Label, ObjectiveSpec, SolverConfig};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

const M: usize = 20;

type Criterion = (&'static str, fn() -> Outcome);

struct Outcome {
    pass: bool,
    detail: String,
}

fn check(failures: &mut Vec<String>, name: &str, ok: bool) {
    if !ok {
        failures.push(name.to_owned());
    }
}

fn random_ensemble(rng: &mut ChaCha8Rng, n: usize, dim: usize, n_leaders: usize) -> Ensemble {
    let rows: Vec<Vec<f64>> = (0..n)
        .map(|_| (0..dim).map(|_| rng.random_range(-10.0..10.0)).collect())
        .collect();
    let labels = (0..n)
        .map(|i| {
            if i < n_leaders {
                Label::Leader
            } else {
                Label::Follower
            }
        })
        .collect();
    Ensemble::from_rows(&rows, labels).unwrap()
}

fn brute_force_omega(energies: &[f64]) -> Vec<f64> {
    let mut best = 0;
    for (i, &e) in energies.iter().enumerate() {
        if e < energies[best] {
            best = i;
        }
    }
    let e_min = energies[best];
    let n = energies.len() as f64;
    energies
        .iter()
        .map(|&ei| {
            energies
                .iter()
                .filter(|&&ej| (e_min - ej).abs() < (e_min - ei).abs())
                .count() as f64
                / n
        })
        .collect()
}

fn property_suite() -> Outcome {
    let start = Instant::now();
    let mut failures = Vec::new();
    let mut rng = ChaCha8Rng::seed_from_u64(2024);

    let mut worst_planted: f64 = 0.0;
    for name in [
        "rastrigin1",
        "rastrigin2",
        "rastrigin4",
        "ackley1",
        "ackley2",
        "ackley4",
    ] {
        for dim in [1, 2, 5, 10] {
            let spec = ObjectiveSpec::preset(name, dim).unwrap();
            let floor = spec.kind().minimum_value();
            for m in spec.minimizers() {
                worst_planted = worst_planted.max((spec.eval(m).unwrap() - floor).abs());
            }
        }
    }
    check(&mut failures, "planted minimizers", worst_planted <= 1e-12);

    let mut hull_ok = true;
    let mut worst_shift: f64 = 0.0;
    let mut worst_best: f64 = 0.0;
    for _ in 0..200 {
        let n = rng.random_range(5..40);
        let dim = rng.random_range(1..4);
        let n_leaders = rng.random_range(1..=n.min(5));
        let ens = random_ensemble(&mut rng, n, dim, n_leaders);
        let energies: Vec<f64> = (0..n).map(|_| rng.random_range(-5.0..5.0)).collect();
        let mut clusters = assign_clusters(&ens).unwrap();

        cluster_consensus_from_energies(&ens, &energies, &mut clusters, 3.0).unwrap();
        for k in 0..clusters.n_clusters() {
            let members: Vec<&[f64]> = (0..n)
                .filter(|&i| clusters.cluster_of(i) == k)
                .map(|i| ens.position(i))
                .collect();
            for (c, &v) in clusters.consensus(k).iter().enumerate() {
                let lo = members.iter().map(|p| p[c]).fold(f64::INFINITY, f64::min);
                let hi = members
                    .iter()
                    .map(|p| p[c])
                    .fold(f64::NEG_INFINITY, f64::max);
                hull_ok &= v >= lo - 1e-12 && v <= hi + 1e-12;
            }
        }

        let before: Vec<Vec<f64>> = clusters.consensus_points().map(<[f64]>::to_vec).collect();
        let shift = rng.random_range(-1e3..1e3);
        let shifted: Vec<f64> = energies.iter().map(|e| e + shift).collect();
        cluster_consensus_from_energies(&ens, &shifted, &mut clusters, 3.0).unwrap();
        for (a, b) in before.iter().zip(clusters.consensus_points()) {
            for (x, y) in a.iter().zip(b) {
                worst_shift = worst_shift.max((x - y).abs());
            }
        }

        // energies on a 1e-3 grid so every gap is at least 1e-3
        let mut levels: Vec<usize> = (0..n).collect();
        for i in (1..n).rev() {
            levels.swap(i, rng.random_range(0..=i));
        }
        let gapped: Vec<f64> = levels.iter().map(|&l| l as f64 * 1e-3).collect();
        cluster_consensus_from_energies(&ens, &gapped, &mut clusters, 5e6).unwrap();
        for k in 0..clusters.n_clusters() {
            let best = (0..n)
                .filter(|&i| clusters.cluster_of(i) == k)
                .min_by(|&a, &b| gapped[a].total_cmp(&gapped[b]))
                .unwrap();
            for (x, y) in clusters.consensus(k).iter().zip(ens.position(best)) {
                worst_best = worst_best.max((x - y).abs());
            }
        }
    }
    check(&mut failures, "convex hull", hull_ok);
    check(&mut failures, "shift invariance", worst_shift <= 1e-9);
    check(&mut failures, "cluster-best consensus", worst_best <= 1e-9);

    let mut rank_ok = true;
    for _ in 0..500 {
        let n = rng.random_range(1..=20);
        // coarse values force ties
        let energies: Vec<f64> = (0..n)
            .map(|_| f64::from(rng.random_range(-4..5_i32)) * 0.5)
            .collect();
        rank_ok &=
            WeightVector::from_energies(&energies).unwrap().omega == brute_force_omega(&energies);
    }
    check(&mut failures, "rank oracle", rank_ok);

    let mut labels_ok = true;
    for _ in 0..200 {
        let n = rng.random_range(2..30);
        let n_leaders = rng.random_range(0..n);
        let mut ens = random_ensemble(&mut rng, n, 2, n_leaders);
        let energies: Vec<f64> = (0..n).map(|_| rng.random_range(0.0..1.0)).collect();
        let w = WeightVector::from_energies(&energies).unwrap();
        let omega_bar = rng.random_range(1..=n) as f64 / n as f64;
        let positions: Vec<Vec<f64>> = ens.positions().map(<[f64]>::to_vec).collect();
        let old = ens.labels().to_vec();
        apply_label_transitions(&mut ens, &w, omega_bar, 0.5, &mut rng).unwrap();
        let promoted = old
            .iter()
            .zip(ens.labels())
            .filter(|(a, b)| !a.is_leader() && b.is_leader())
            .count();
        let demoted = old
            .iter()
            .zip(ens.labels())
            .filter(|(a, b)| a.is_leader() && !b.is_leader())
            .count();
        let old_leaders = old.iter().filter(|l| l.is_leader()).count();
        labels_ok &= ens.len() == n
            && ens.leader_count() == old_leaders + promoted - demoted
            && ens.positions().zip(&positions).all(|(a, b)| a == &b[..]);
    }
    let spec = ObjectiveSpec::preset("rastrigin2", 2).unwrap();
    let cfg = SolverConfig {
        n_leaders: 6,
        n_steps: 200,
        seed: 9,
        ..SolverConfig::default()
    };
    let mut state = GkboState::new(&spec, &cfg, 80).unwrap();
    while state.step().unwrap() {
        let leaders = state
            .ensemble()
            .labels()
            .iter()
            .filter(|l| l.is_leader())
            .count();
        labels_ok &= state.ensemble().len() == 80
            && leaders == state.ensemble().leader_count()
            && leaders == state.clusters().n_clusters();
    }
    check(&mut failures, "label bookkeeping", labels_ok);

    let a = run_gkbo(&spec, &cfg, 80).unwrap();
    let b = run_gkbo(&spec, &cfg, 80).unwrap();
    let mut bench = ExperimentConfig {
        n_agents: 60,
        repetitions: 3,
        base_seed: 5,
        sweep: Sweep {
            variable: SweepVariable::SigmaF,
            values: vec![0.5, 2.5],
        },
        ..ExperimentConfig::default()
    };
    bench.gkbo.n_leaders = 4;
    bench.gkbo.n_steps = 150;
    let dir = tempfile::tempdir().unwrap();
    let (p1, p2) = (dir.path().join("a.csv"), dir.path().join("b.csv"));
    write_results(&run_experiment(&bench).unwrap(), &p1).unwrap();
    write_results(&run_experiment(&bench).unwrap(), &p2).unwrap();
    let csv_same = std::fs::read(&p1).unwrap() == std::fs::read(&p2).unwrap();
    check(&mut failures, "seed determinism", a == b && csv_same);

    let elapsed = start.elapsed();
    check(
        &mut failures,
        "runtime < 30 s",
        elapsed < Duration::from_secs(30),
    );
    Outcome {
        pass: failures.is_empty(),
        detail: format!(
            "planted {worst_planted:.1e}, shift {worst_shift:.1e}, cluster-best {worst_best:.1e}, {:.1} s{}",
            elapsed.as_secs_f64(),
            if failures.is_empty() { String::new() } else { format!("; failed: {}", failures.join(", ")) }
        ),
    }
}

fn deterministic_sanity() -> Outcome {
    let start = Instant::now();
    let spec = ObjectiveSpec::preset("rastrigin1", 1).unwrap();
    let mut hits = 0;
    for seed in 0..M as u64 {
        let cfg = SolverConfig {
            sigma_f: 0.0,
            n_leaders: 1,
            n_steps: 2000,
            alpha: 5e6,
            seed,
            ..SolverConfig::default()
        };
        let report = run_gkbo(&spec, &cfg, 50).unwrap();
        let all_close = report.final_consensus.iter().all(|c| {
            c.iter()
                .zip(&spec.minimizers()[0])
                .all(|(a, b)| (a - b).abs() <= SUCCESS_THRESHOLD)
        });
        hits += usize::from(all_close && !report.final_consensus.is_empty());
    }
    let elapsed = start.elapsed();
    Outcome {
        pass: hits == M && elapsed < Duration::from_secs(10),
        detail: format!("{hits}/{M} runs, {:.1} s", elapsed.as_secs_f64()),
    }
}

fn experiment(
    objective: &str,
    dim: usize,
    sigma_f: f64,
    n_leaders: usize,
    sweep: Sweep,
) -> ExperimentSummary {
    let mut cfg = ExperimentConfig {
        objective: objective.to_owned(),
        dim,
        n_agents: 600,
        solver: SolverKind::Gkbo,
        repetitions: M,
        sweep,
        base_seed: 0,
        ..ExperimentConfig::default()
    };
    cfg.gkbo.sigma_f = sigma_f;
    cfg.gkbo.n_leaders = n_leaders;
    run_experiment(&cfg).unwrap()
}

fn sweep(variable: SweepVariable, values: &[f64]) -> Sweep {
    Sweep {
        variable,
        values: values.to_vec(),
    }
}

fn dimension_trend() -> Outcome {
    let s = experiment(
        "rastrigin4",
        2,
        2.5,
        12,
        sweep(SweepVariable::Dimension, &[2.0, 10.0]),
    );
    let (d2, d10) = (
        s.rows[0].mean_detected_minima,
        s.rows[1].mean_detected_minima,
    );
    Outcome {
        pass: d2 >= d10,
        detail: format!("detected d=2 {d2:.2}, d=10 {d10:.2}"),
    }
}

fn leader_trend() -> Outcome {
    let s = experiment(
        "rastrigin4",
        2,
        2.5,
        12,
        sweep(SweepVariable::NLeaders, &[12.0, 300.0]),
    );
    let (few, many) = (s.rows[0].success_rate, s.rows[1].success_rate);
    Outcome {
        pass: few >= many,
        detail: format!("success N_L=12 {few:.2}, N_L=300 {many:.2}"),
    }
}

fn diffusion_sensitivity() -> Outcome {
    let s = experiment(
        "rastrigin2",
        10,
        2.5,
        12,
        sweep(SweepVariable::SigmaF, &[0.1, 2.5]),
    );
    let (small, large) = (s.rows[0].success_rate, s.rows[1].success_rate);
    Outcome {
        pass: large >= small + 0.2,
        detail: format!("success sigma_F=2.5 {large:.2}, sigma_F=0.1 {small:.2}"),
    }
}

fn solver_comparison() -> Outcome {
    let mut base = compare_defaults();
    base.sweep.values = (1..=5).map(f64::from).collect();
    base.repetitions = M;
    base.base_seed = 0;
    let mean = |kind| {
        let cfg = ExperimentConfig {
            solver: kind,
            ..base.clone()
        };
        let rows = run_experiment(&cfg).unwrap().rows;
        rows.iter().map(|r| r.success_rate).sum::<f64>() / rows.len() as f64
    };
    let (g, p) = (mean(SolverKind::Gkbo), mean(SolverKind::Pcbo));
    Outcome {
        pass: g >= p,
        detail: format!("mean success GKBO {g:.3}, pCBO {p:.3}"),
    }
}

fn success_floor() -> Outcome {
    let s = experiment("rastrigin2", 2, 2.5, 12, sweep(SweepVariable::None, &[]));
    let rate = s.rows[0].success_rate;
    Outcome {
        pass: rate >= 0.8,
        detail: format!("success {rate:.2}"),
    }
}

fn main() -> ExitCode {
    let criteria: [Criterion; 7] = [
        ("1 property suite", property_suite),
        (
            "2 deterministic sanity, 20/20 within 0.25",
            deterministic_sanity,
        ),
        ("3 detected minima d=2 >= d=10", dimension_trend),
        ("4 success N_L=12 >= N_L=300", leader_trend),
        (
            "5 success sigma_F=2.5 >= sigma_F=0.1 + 0.2",
            diffusion_sensitivity,
        ),
        ("6 GKBO mean success >= pCBO over d=1..5", solver_comparison),
        ("7 success floor >= 0.8", success_floor),
    ];
    let mut failed = 0;
    for (name, run) in criteria {
        let outcome = run();
        let tag = if outcome.pass { "PASS" } else { "FAIL" };
        println!("{tag} criterion {name}: {}", outcome.detail);
        failed += usize::from(!outcome.pass);
    }
    println!("{} of 7 criteria passed", 7 - failed);
    if failed == 0 {
        ExitCode::SUCCESS
    } else {
        ExitCode::FAILURE
    }
}
