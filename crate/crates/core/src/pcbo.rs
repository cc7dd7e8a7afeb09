//! Polarized consensus-based optimization baseline.
//!
//! One population, `J_c` moving cluster centres. Every particle is hard
//! assigned to its nearest centre and drifts toward that centre's softmax
//! consensus with multiplicative noise. Positions and centres are stored
//! row-major with the dimension passed alongside.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::gkbo::{distinct_points, squared_distance, Diffusion, RunReport, StallTracker};
use crate::objectives::ObjectiveSpec;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PcboConfig {
    pub nu: f64,
    pub sigma: f64,
    pub alpha: f64,
    /// Number of cluster centres `J_c`.
    pub n_clusters: usize,
    pub n_steps: usize,
    pub delta_stall: f64,
    pub j_stall: usize,
    pub diffusion: Diffusion,
    pub seed: u64,
    pub domain: [f64; 2],
}

impl Default for PcboConfig {
    fn default() -> Self {
        Self {
            nu: 1.0,
            sigma: 0.5,
            alpha: 5e6,
            n_clusters: 4,
            n_steps: 10_000,
            delta_stall: 1e-4,
            j_stall: 1000,
            diffusion: Diffusion::Anisotropic,
            seed: 0,
            domain: [-10.0, 10.0],
        }
    }
}

impl PcboConfig {
    pub fn validate(&self) -> Result<()> {
        for (key, v) in [
            ("nu", self.nu),
            ("alpha", self.alpha),
            ("delta_stall", self.delta_stall),
        ] {
            if !(v.is_finite() && v > 0.0) {
                return Err(Error::config(
                    key,
                    format!("must be a positive finite number, got {v}"),
                ));
            }
        }
        if !(self.sigma.is_finite() && self.sigma >= 0.0) {
            return Err(Error::config(
                "sigma",
                format!("must be ≥ 0, got {}", self.sigma),
            ));
        }
        if self.n_clusters == 0 {
            return Err(Error::config("n_clusters", "must be at least 1"));
        }
        if self.j_stall == 0 {
            return Err(Error::config("j_stall", "must be at least 1"));
        }
        let [lo, hi] = self.domain;
        if !(lo.is_finite() && hi.is_finite() && lo < hi) {
            return Err(Error::config(
                "domain",
                format!("invalid interval [{lo}, {hi}]"),
            ));
        }
        Ok(())
    }
}

/// Nearest centre of every particle, ties to the lowest centre index.
pub fn pcbo_assign(positions: &[f64], centres: &[f64], dim: usize) -> Result<Vec<usize>> {
    if dim == 0
        || centres.is_empty()
        || !centres.len().is_multiple_of(dim)
        || !positions.len().is_multiple_of(dim)
    {
        return Err(Error::invalid(
            "positions and centres must be non-empty rows of length dim",
        ));
    }
    Ok(positions
        .chunks_exact(dim)
        .map(|x| {
            let mut best = 0;
            let mut best_d = f64::INFINITY;
            for (j, c) in centres.chunks_exact(dim).enumerate() {
                let d = squared_distance(x, c);
                if d < best_d {
                    best_d = d;
                    best = j;
                }
            }
            best
        })
        .collect())
}

/// Softmax-weighted centre of each cluster's members, shifted by the
/// cluster's minimum energy. Clusters without members keep `previous`.
fn compute_centres(
    positions: &[f64],
    energies: &[f64],
    assignment: &[usize],
    previous: &[f64],
    dim: usize,
    alpha: f64,
) -> Vec<f64> {
    let n_clusters = previous.len() / dim;
    let mut e_min = vec![f64::INFINITY; n_clusters];
    for (&j, &e) in assignment.iter().zip(energies) {
        e_min[j] = e_min[j].min(e);
    }
    let mut sums = vec![0.0; previous.len()];
    let mut norm = vec![0.0; n_clusters];
    for ((x, &j), &e) in positions.chunks_exact(dim).zip(assignment).zip(energies) {
        let w = (-alpha * (e - e_min[j])).exp();
        norm[j] += w;
        for (s, xi) in sums[j * dim..(j + 1) * dim].iter_mut().zip(x) {
            *s += w * xi;
        }
    }
    for j in 0..n_clusters {
        let out = &mut sums[j * dim..(j + 1) * dim];
        if norm[j] > 0.0 {
            out.iter_mut().for_each(|v| *v /= norm[j]);
        } else {
            out.copy_from_slice(&previous[j * dim..(j + 1) * dim]);
        }
    }
    sums
}

/// First centres from soft memberships `p` (`N × J_c`, row-major, each row
/// summing to one).
fn soft_centres(
    positions: &[f64],
    energies: &[f64],
    p: &[f64],
    dim: usize,
    alpha: f64,
) -> Vec<f64> {
    let n_clusters = p.len() / energies.len();
    let e_min = energies.iter().copied().fold(f64::INFINITY, f64::min);
    let mut sums = vec![0.0; n_clusters * dim];
    let mut norm = vec![0.0; n_clusters];
    for (i, x) in positions.chunks_exact(dim).enumerate() {
        let base = (-alpha * (energies[i] - e_min)).exp();
        for j in 0..n_clusters {
            let w = p[i * n_clusters + j] * base;
            norm[j] += w;
            for (s, xi) in sums[j * dim..(j + 1) * dim].iter_mut().zip(x) {
                *s += w * xi;
            }
        }
    }
    for (j, c) in sums.chunks_exact_mut(dim).enumerate() {
        c.iter_mut().for_each(|v| *v /= norm[j]);
    }
    sums
}

fn move_particles<R: Rng + ?Sized>(
    positions: &mut [f64],
    assignment: &[usize],
    centres: &[f64],
    dim: usize,
    cfg: &PcboConfig,
    rng: &mut R,
    step: usize,
) -> Result<()> {
    let mut xi = vec![0.0; dim];
    for (i, (x, &j)) in positions.chunks_exact_mut(dim).zip(assignment).enumerate() {
        let c = &centres[j * dim..(j + 1) * dim];
        for v in xi.iter_mut() {
            *v = rng.sample(StandardNormal);
        }
        let iso = squared_distance(c, x).sqrt();
        for k in 0..dim {
            let scale = match cfg.diffusion {
                Diffusion::Isotropic => iso,
                Diffusion::Anisotropic => c[k] - x[k],
            };
            x[k] += cfg.nu * (c[k] - x[k]) + cfg.sigma * scale * xi[k];
        }
        if x.iter().any(|v| !v.is_finite()) {
            return Err(Error::NonFinitePosition { agent: i, step });
        }
    }
    Ok(())
}

fn energies_of(positions: &[f64], spec: &ObjectiveSpec) -> Result<Vec<f64>> {
    let energies: Vec<f64> = positions
        .chunks_exact(spec.dim())
        .map(|x| spec.eval_unchecked(x))
        .collect();
    match energies.iter().position(|e| !e.is_finite()) {
        Some(agent) => Err(Error::NonFiniteEnergy { agent }),
        None => Ok(energies),
    }
}

/// One update. Centres are recomputed from the current members (empty
/// clusters keep `centres`), then every particle moves toward its centre:
/// `x + ν(c − x) + σ D(x) ξ`. Returns the new positions and the centres used.
pub fn pcbo_step<R: Rng + ?Sized>(
    positions: &[f64],
    assignment: &[usize],
    centres: &[f64],
    spec: &ObjectiveSpec,
    cfg: &PcboConfig,
    rng: &mut R,
) -> Result<(Vec<f64>, Vec<f64>)> {
    let dim = spec.dim();
    if positions.len() != assignment.len() * dim {
        return Err(Error::invalid(
            "assignment does not match the number of particles",
        ));
    }
    if centres.is_empty() || !centres.len().is_multiple_of(dim) {
        return Err(Error::invalid(
            "centres must be non-empty rows of length dim",
        ));
    }
    let n_clusters = centres.len() / dim;
    if assignment.iter().any(|&j| j >= n_clusters) {
        return Err(Error::invalid("assignment refers to a missing centre"));
    }
    let energies = energies_of(positions, spec)?;
    let used = compute_centres(positions, &energies, assignment, centres, dim, cfg.alpha);
    let mut next = positions.to_vec();
    move_particles(&mut next, assignment, &used, dim, cfg, rng, 0)?;
    Ok((next, used))
}

fn estimates(assignment: &[usize], centres: &[f64], dim: usize) -> Vec<f64> {
    assignment
        .iter()
        .flat_map(|&j| centres[j * dim..(j + 1) * dim].iter().copied())
        .collect()
}

/// Runs polarized CBO with the same termination rule as GKBO.
pub fn run_pcbo(spec: &ObjectiveSpec, cfg: &PcboConfig, n_particles: usize) -> Result<RunReport> {
    cfg.validate()?;
    if n_particles == 0 {
        return Err(Error::invalid("need at least one particle"));
    }
    let dim = spec.dim();
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let [lo, hi] = cfg.domain;
    let mut positions: Vec<f64> = (0..n_particles * dim)
        .map(|_| rng.random_range(lo..=hi))
        .collect();
    let mut energies = energies_of(&positions, spec)?;
    let mut evaluations = n_particles as u64;

    let j_c = cfg.n_clusters;
    let mut p: Vec<f64> = (0..n_particles * j_c)
        .map(|_| rng.random::<f64>())
        .collect();
    for row in p.chunks_exact_mut(j_c) {
        let s: f64 = row.iter().sum();
        if s > 0.0 {
            row.iter_mut().for_each(|v| *v /= s);
        } else {
            row.fill(1.0 / j_c as f64);
        }
    }
    let initial = soft_centres(&positions, &energies, &p, dim, cfg.alpha);
    let mut assignment = pcbo_assign(&positions, &initial, dim)?;
    let mut centres = compute_centres(&positions, &energies, &assignment, &initial, dim, cfg.alpha);
    let mut tracker = StallTracker::from_estimates(&estimates(&assignment, &centres, dim), dim);

    let mut iterations = 0;
    let mut stall = 0;
    while iterations < cfg.n_steps && stall < cfg.j_stall {
        move_particles(
            &mut positions,
            &assignment,
            &centres,
            dim,
            cfg,
            &mut rng,
            iterations,
        )?;
        energies = energies_of(&positions, spec)?;
        evaluations += n_particles as u64;
        assignment = pcbo_assign(&positions, &centres, dim)?;
        centres = compute_centres(&positions, &energies, &assignment, &centres, dim, cfg.alpha);
        stall = tracker.check_estimates(&estimates(&assignment, &centres, dim), cfg.delta_stall);
        iterations += 1;
    }

    let mut occupied = vec![false; j_c];
    for &j in &assignment {
        occupied[j] = true;
    }
    let live = centres
        .chunks_exact(dim)
        .zip(&occupied)
        .filter_map(|(c, &o)| o.then_some(c));
    Ok(RunReport {
        iterations,
        stalled: stall >= cfg.j_stall,
        final_consensus: distinct_points(live),
        leader_count: occupied.iter().filter(|&&o| o).count(),
        best_value: energies.iter().copied().fold(f64::INFINITY, f64::min),
        evaluations,
        seed: cfg.seed,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::objectives::FunctionKind;
    use proptest::prelude::*;

    #[test]
    fn assignment_examples() {
        assert_eq!(pcbo_assign(&[1.0], &[-5.0, 5.0], 1).unwrap(), vec![1]);
        assert_eq!(pcbo_assign(&[0.0], &[-5.0, 5.0], 1).unwrap(), vec![0]);
        assert_eq!(
            pcbo_assign(&[0.0, 4.0, -9.0], &[3.0], 1).unwrap(),
            vec![0, 0, 0]
        );
        assert!(pcbo_assign(&[0.0], &[], 1).is_err());
    }

    #[test]
    fn tie_break_follows_index_not_order() {
        // mirrored centres: the tie always resolves to whichever comes first
        assert_eq!(pcbo_assign(&[0.0], &[5.0, -5.0], 1).unwrap(), vec![0]);
        assert_eq!(
            pcbo_assign(&[0.0, 0.0], &[2.0, 0.0, 0.0, 2.0], 2).unwrap(),
            vec![0]
        );
    }

    fn single_min_at_one() -> ObjectiveSpec {
        ObjectiveSpec::broadcast(FunctionKind::Rastrigin, 1, &[1.0]).unwrap()
    }

    #[test]
    fn equal_energy_pair_meets_in_the_middle() {
        let cfg = PcboConfig {
            nu: 1.0,
            sigma: 0.0,
            n_clusters: 1,
            ..PcboConfig::default()
        };
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        let (next, centres) = pcbo_step(
            &[0.0, 2.0],
            &[0, 0],
            &[0.0],
            &single_min_at_one(),
            &cfg,
            &mut rng,
        )
        .unwrap();
        assert_eq!(centres, vec![1.0]);
        assert_eq!(next, vec![1.0, 1.0]);
    }

    #[test]
    fn particle_on_its_centre_stays() {
        let cfg = PcboConfig {
            sigma: 0.0,
            n_clusters: 1,
            ..PcboConfig::default()
        };
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        let (next, _) =
            pcbo_step(&[3.0], &[0], &[0.0], &single_min_at_one(), &cfg, &mut rng).unwrap();
        assert_eq!(next, vec![3.0]);
    }

    #[test]
    fn empty_cluster_keeps_centre() {
        let cfg = PcboConfig {
            sigma: 0.0,
            ..PcboConfig::default()
        };
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        let (_, centres) = pcbo_step(
            &[0.0, 2.0],
            &[0, 0],
            &[9.0, -9.0],
            &single_min_at_one(),
            &cfg,
            &mut rng,
        )
        .unwrap();
        assert_eq!(centres, vec![1.0, -9.0]);
    }

    #[test]
    fn energy_shift_leaves_trajectory_unchanged() {
        let a = ObjectiveSpec::broadcast(FunctionKind::Rastrigin, 2, &[-5.0, 5.0]).unwrap();
        let cfg = PcboConfig {
            alpha: 3.0,
            n_clusters: 2,
            ..PcboConfig::default()
        };
        let positions = [1.0, 2.0, -3.0, 4.0, 5.5, -6.0];
        let centres = [-5.0, -5.0, 5.0, 5.0];
        let assignment = pcbo_assign(&positions, &centres, 2).unwrap();
        let energies = energies_of(&positions, &a).unwrap();
        let shifted: Vec<f64> = energies.iter().map(|e| e + 123.0).collect();
        let c1 = compute_centres(&positions, &energies, &assignment, &centres, 2, cfg.alpha);
        let c2 = compute_centres(&positions, &shifted, &assignment, &centres, 2, cfg.alpha);
        for (x, y) in c1.iter().zip(&c2) {
            assert!((x - y).abs() < 1e-12);
        }
    }

    #[test]
    fn zero_steps_and_determinism() {
        let spec = ObjectiveSpec::preset("ackley2", 2).unwrap();
        let cfg = PcboConfig {
            n_steps: 0,
            ..PcboConfig::default()
        };
        let r = run_pcbo(&spec, &cfg, 50).unwrap();
        assert_eq!(r.iterations, 0);
        assert!(!r.stalled);

        let cfg = PcboConfig {
            n_steps: 100,
            seed: 4,
            ..PcboConfig::default()
        };
        assert_eq!(
            run_pcbo(&spec, &cfg, 80).unwrap(),
            run_pcbo(&spec, &cfg, 80).unwrap()
        );
    }

    #[test]
    fn config_validation() {
        assert!(PcboConfig::default().validate().is_ok());
        let bad = PcboConfig {
            n_clusters: 0,
            ..PcboConfig::default()
        };
        assert!(matches!(bad.validate(), Err(Error::Config { key, .. }) if key == "n_clusters"));
    }

    proptest! {
        #[test]
        fn assignment_is_idempotent(
            positions in prop::collection::vec(-10.0f64..10.0, 2..40),
            centres in prop::collection::vec(-10.0f64..10.0, 2..8),
        ) {
            let dim = 2;
            let positions = &positions[..positions.len() / dim * dim];
            let centres = &centres[..centres.len() / dim * dim];
            let first = pcbo_assign(positions, centres, dim).unwrap();
            let second = pcbo_assign(positions, centres, dim).unwrap();
            prop_assert_eq!(&first, &second);
            for (x, &j) in positions.chunks_exact(dim).zip(&first) {
                let dj = squared_distance(x, &centres[j * dim..(j + 1) * dim]);
                for c in centres.chunks_exact(dim) {
                    prop_assert!(dj <= squared_distance(x, c));
                }
            }
        }

        #[test]
        fn centres_are_convex_combinations(
            positions in prop::collection::vec(-10.0f64..10.0, 1..30),
            alpha in prop::sample::select(vec![0.5, 10.0, 5e6]),
        ) {
            let spec = ObjectiveSpec::preset("rastrigin2", 1).unwrap();
            let energies = energies_of(&positions, &spec).unwrap();
            let centres = [-5.0, 5.0];
            let assignment = pcbo_assign(&positions, &centres, 1).unwrap();
            let out = compute_centres(&positions, &energies, &assignment, &centres, 1, alpha);
            for j in 0..2 {
                let members: Vec<f64> = positions.iter().zip(&assignment)
                    .filter_map(|(&x, &a)| (a == j).then_some(x)).collect();
                if members.is_empty() {
                    prop_assert_eq!(out[j], centres[j]);
                } else {
                    let lo = members.iter().copied().fold(f64::INFINITY, f64::min);
                    let hi = members.iter().copied().fold(f64::NEG_INFINITY, f64::max);
                    prop_assert!(out[j] >= lo - 1e-12 && out[j] <= hi + 1e-12);
                }
            }
        }

        #[test]
        fn single_cluster_noiseless_is_plain_cbo(
            positions in prop::collection::vec(-10.0f64..10.0, 1..20),
            nu in 0.05f64..1.0,
        ) {
            let spec = ObjectiveSpec::preset("ackley1", 1).unwrap();
            let cfg = PcboConfig { nu, sigma: 0.0, alpha: 2.0, n_clusters: 1, ..PcboConfig::default() };
            let assignment = vec![0; positions.len()];
            let mut rng = ChaCha8Rng::seed_from_u64(1);
            let (next, c) = pcbo_step(&positions, &assignment, &[0.0], &spec, &cfg, &mut rng).unwrap();
            for (x, y) in positions.iter().zip(&next) {
                let expect = x + nu * (c[0] - x);
                prop_assert!((y - expect).abs() <= 1e-12);
            }
        }
    }
}
