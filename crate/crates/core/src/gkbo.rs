//! Localized GKBO solver.
//!
//! Each iteration moves followers toward their nearest leader with
//! multiplicative noise and relaxes leaders toward the softmax consensus of
//! their cluster, then re-draws leadership labels from the rank weights.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::ensemble::{apply_label_transitions, Ensemble, Label, WeightVector};
use crate::error::{Error, Result};
use crate::objectives::ObjectiveSpec;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize, Default)]
#[serde(rename_all = "lowercase")]
pub enum Diffusion {
    Isotropic,
    #[default]
    Anisotropic,
}

impl std::str::FromStr for Diffusion {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "isotropic" => Ok(Diffusion::Isotropic),
            "anisotropic" => Ok(Diffusion::Anisotropic),
            other => Err(Error::invalid(format!("unknown diffusion mode `{other}`"))),
        }
    }
}

/// Hyperparameters of one GKBO run.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SolverConfig {
    /// Follower drift rate `ν_F`.
    pub nu_f: f64,
    /// Leader drift rate `ν_L`.
    pub nu_l: f64,
    /// Follower diffusion strength `σ_F`.
    pub sigma_f: f64,
    /// Interaction scaling `ε`; also the label flip probability.
    pub eps: f64,
    /// Laplace weight `α`.
    pub alpha: f64,
    pub n_leaders: usize,
    pub n_steps: usize,
    pub delta_stall: f64,
    pub j_stall: usize,
    pub diffusion: Diffusion,
    pub seed: u64,
    /// Initial hypercube `[lo, hi]^d`.
    pub domain: [f64; 2],
}

impl Default for SolverConfig {
    fn default() -> Self {
        Self {
            nu_f: 1.0,
            nu_l: 2.0,
            sigma_f: 2.5,
            eps: 0.1,
            alpha: 5e6,
            n_leaders: 12,
            n_steps: 10_000,
            delta_stall: 1e-4,
            j_stall: 1000,
            diffusion: Diffusion::Anisotropic,
            seed: 0,
            domain: [-10.0, 10.0],
        }
    }
}

impl SolverConfig {
    pub fn validate(&self, n_agents: usize) -> Result<()> {
        fn positive(key: &str, v: f64) -> Result<()> {
            if v.is_finite() && v > 0.0 {
                Ok(())
            } else {
                Err(Error::config(
                    key,
                    format!("must be a positive finite number, got {v}"),
                ))
            }
        }
        positive("nu_f", self.nu_f)?;
        positive("nu_l", self.nu_l)?;
        positive("alpha", self.alpha)?;
        positive("delta_stall", self.delta_stall)?;
        if !(self.sigma_f.is_finite() && self.sigma_f >= 0.0) {
            return Err(Error::config(
                "sigma_f",
                format!("must be ≥ 0, got {}", self.sigma_f),
            ));
        }
        if !(self.eps > 0.0 && self.eps <= 1.0) {
            return Err(Error::config(
                "eps",
                format!("must lie in (0, 1], got {}", self.eps),
            ));
        }
        if self.n_leaders == 0 || self.n_leaders > n_agents {
            return Err(Error::config(
                "n_leaders",
                format!("must lie in [1, {n_agents}], got {}", self.n_leaders),
            ));
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

    /// Leader fraction threshold `ω̄ = N_L / N_s`.
    pub fn omega_bar(&self, n_agents: usize) -> f64 {
        self.n_leaders as f64 / n_agents as f64
    }
}

/// Nearest-leader partition of the ensemble and the consensus point of each
/// cluster. Clusters are indexed by position in `leaders` (ascending agent
/// index).
#[derive(Debug, Clone, PartialEq)]
pub struct ClusterState {
    dim: usize,
    leaders: Vec<usize>,
    cluster_of: Vec<usize>,
    consensus: Vec<f64>,
}

impl ClusterState {
    pub fn leaders(&self) -> &[usize] {
        &self.leaders
    }

    pub fn n_clusters(&self) -> usize {
        self.leaders.len()
    }

    /// Cluster index of agent `i`.
    pub fn cluster_of(&self, i: usize) -> usize {
        self.cluster_of[i]
    }

    /// Agent index of the leader whose cluster contains agent `i`.
    pub fn leader_of(&self, i: usize) -> usize {
        self.leaders[self.cluster_of[i]]
    }

    pub fn consensus(&self, k: usize) -> &[f64] {
        &self.consensus[k * self.dim..(k + 1) * self.dim]
    }

    pub fn consensus_points(&self) -> impl Iterator<Item = &[f64]> {
        self.consensus.chunks_exact(self.dim)
    }

    /// `x̂(xᵢ)`: the consensus point of agent `i`'s cluster.
    pub fn agent_estimate(&self, i: usize) -> &[f64] {
        self.consensus(self.cluster_of[i])
    }

    pub fn n_agents(&self) -> usize {
        self.cluster_of.len()
    }

    fn estimates_flat(&self) -> Vec<f64> {
        let mut out = Vec::with_capacity(self.cluster_of.len() * self.dim);
        for i in 0..self.cluster_of.len() {
            out.extend_from_slice(self.agent_estimate(i));
        }
        out
    }
}

#[inline]
pub(crate) fn squared_distance(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum()
}

/// Assigns every agent to its nearest leader (Euclidean), with exact ties
/// going to the lowest leader index. Leaders always form their own cluster.
/// Consensus points are left at zero.
pub fn assign_clusters(ens: &Ensemble) -> Result<ClusterState> {
    let leaders = ens.leader_indices();
    if leaders.is_empty() {
        return Err(Error::EmptyLeaderSet);
    }
    let dim = ens.dim();
    let mut cluster_of = Vec::with_capacity(ens.len());
    for (i, x) in ens.positions().enumerate() {
        if ens.labels()[i].is_leader() {
            // binary search is exact: leaders is sorted and contains i
            cluster_of.push(leaders.binary_search(&i).unwrap_or(0));
            continue;
        }
        let mut best = 0;
        let mut best_d = f64::INFINITY;
        for (k, &l) in leaders.iter().enumerate() {
            let d = squared_distance(x, ens.position(l));
            if d < best_d {
                best_d = d;
                best = k;
            }
        }
        cluster_of.push(best);
    }
    Ok(ClusterState {
        dim,
        consensus: vec![0.0; leaders.len() * dim],
        leaders,
        cluster_of,
    })
}

/// Fills the consensus points from precomputed energies. Each point is the
/// `exp(−α E)`-weighted mean over every agent of the cluster, shifted by the
/// cluster minimum so the largest weight is exactly one.
pub fn cluster_consensus_from_energies(
    ens: &Ensemble,
    energies: &[f64],
    clusters: &mut ClusterState,
    alpha: f64,
) -> Result<()> {
    if energies.len() != ens.len() || clusters.n_agents() != ens.len() {
        return Err(Error::invalid("cluster state does not match ensemble size"));
    }
    let dim = clusters.dim;
    let k = clusters.n_clusters();
    let mut e_min = vec![f64::INFINITY; k];
    for (&c, &e) in clusters.cluster_of.iter().zip(energies) {
        e_min[c] = e_min[c].min(e);
    }
    let mut norm = vec![0.0; k];
    clusters.consensus.iter_mut().for_each(|v| *v = 0.0);
    for (i, x) in ens.positions().enumerate() {
        let c = clusters.cluster_of[i];
        let w = (-alpha * (energies[i] - e_min[c])).exp();
        norm[c] += w;
        for (acc, xi) in clusters.consensus[c * dim..(c + 1) * dim].iter_mut().zip(x) {
            *acc += w * xi;
        }
    }
    for (c, point) in clusters.consensus.chunks_exact_mut(dim).enumerate() {
        // norm[c] ≥ 1: the cluster minimum contributes weight exp(0)
        for v in point {
            *v /= norm[c];
        }
    }
    Ok(())
}

pub fn cluster_consensus(
    ens: &Ensemble,
    spec: &ObjectiveSpec,
    clusters: &mut ClusterState,
    alpha: f64,
) -> Result<()> {
    let energies = ens.energies(spec)?;
    cluster_consensus_from_energies(ens, &energies, clusters, alpha)
}

/// Diagonal of the diffusion matrix `D(x)`.
pub fn diffusion_matrix(x: &[f64], x_hat: &[f64], mode: Diffusion) -> Vec<f64> {
    match mode {
        Diffusion::Isotropic => {
            let norm = squared_distance(x_hat, x).sqrt();
            vec![norm; x.len()]
        }
        Diffusion::Anisotropic => x_hat.iter().zip(x).map(|(h, xi)| h - xi).collect(),
    }
}

/// Moves every agent once, reading only pre-step positions.
///
/// Followers: `x + εν_F(x_* − x) + √ε σ_F D(x) ξ` with `x_*` the nearest
/// leader and a fresh standard normal `ξ ∈ R^d` per follower.
/// Leaders: `x + εν_L(x̂(x) − x)`, no noise drawn.
pub fn interaction_step<R: Rng + ?Sized>(
    ens: &mut Ensemble,
    clusters: &ClusterState,
    cfg: &SolverConfig,
    rng: &mut R,
    step: usize,
) -> Result<()> {
    if clusters.n_agents() != ens.len() {
        return Err(Error::invalid("cluster state does not match ensemble size"));
    }
    let dim = ens.dim();
    let drift_f = cfg.eps * cfg.nu_f;
    let drift_l = cfg.eps * cfg.nu_l;
    let noise = cfg.eps.sqrt() * cfg.sigma_f;
    let old = ens.positions_flat().to_vec();
    let mut xi = vec![0.0; dim];
    for i in 0..ens.len() {
        let x = &old[i * dim..(i + 1) * dim];
        let x_hat = clusters.agent_estimate(i);
        let label = ens.labels()[i];
        let out = &mut ens.positions_flat_mut()[i * dim..(i + 1) * dim];
        match label {
            Label::Leader => {
                for ((o, &xv), &h) in out.iter_mut().zip(x).zip(x_hat) {
                    *o = xv + drift_l * (h - xv);
                }
            }
            Label::Follower => {
                let l = clusters.leader_of(i);
                let star = &old[l * dim..(l + 1) * dim];
                for v in xi.iter_mut() {
                    *v = rng.sample(StandardNormal);
                }
                let iso = match cfg.diffusion {
                    Diffusion::Isotropic => squared_distance(x_hat, x).sqrt(),
                    Diffusion::Anisotropic => 0.0,
                };
                for c in 0..dim {
                    let scale = match cfg.diffusion {
                        Diffusion::Isotropic => iso,
                        Diffusion::Anisotropic => x_hat[c] - x[c],
                    };
                    out[c] = x[c] + drift_f * (star[c] - x[c]) + noise * scale * xi[c];
                }
            }
        }
        if out.iter().any(|v| !v.is_finite()) {
            return Err(Error::NonFinitePosition { agent: i, step });
        }
    }
    Ok(())
}

/// Per-agent count of consecutive iterations in which `x̂ᵢ` moved by at most
/// `δ_stall` in the max norm.
#[derive(Debug, Clone, PartialEq)]
pub struct StallTracker {
    counters: Vec<usize>,
    previous: Vec<f64>,
    dim: usize,
}

impl StallTracker {
    /// Records the initial estimates without counting.
    pub fn new(clusters: &ClusterState) -> Self {
        Self::from_estimates(&clusters.estimates_flat(), clusters.dim)
    }

    /// Same as [`new`](Self::new) for row-major per-agent estimates.
    pub fn from_estimates(estimates: &[f64], dim: usize) -> Self {
        Self {
            counters: vec![0; estimates.len() / dim],
            previous: estimates.to_vec(),
            dim,
        }
    }

    pub fn counters(&self) -> &[usize] {
        &self.counters
    }

    /// Global stall index `j = minᵢ jᵢ`.
    pub fn global(&self) -> usize {
        self.counters.iter().copied().min().unwrap_or(0)
    }

    /// Compares each agent's new estimate against the previous one, updates
    /// the counters and returns the global stall index.
    pub fn check(&mut self, clusters: &ClusterState, delta_stall: f64) -> usize {
        self.check_estimates(&clusters.estimates_flat(), delta_stall)
    }

    pub fn check_estimates(&mut self, estimates: &[f64], delta_stall: f64) -> usize {
        let dim = self.dim;
        let rows = estimates
            .chunks_exact(dim)
            .zip(self.previous.chunks_exact_mut(dim));
        for (counter, (new, old)) in self.counters.iter_mut().zip(rows) {
            let moved = new
                .iter()
                .zip(old.iter())
                .fold(0.0f64, |m, (a, b)| m.max((a - b).abs()));
            if moved <= delta_stall {
                *counter += 1;
            } else {
                *counter = 0;
            }
            old.copy_from_slice(new);
        }
        self.global()
    }
}

/// Outcome of a single solver run.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunReport {
    pub iterations: usize,
    pub stalled: bool,
    /// Distinct consensus points of the leader clusters at termination.
    pub final_consensus: Vec<Vec<f64>>,
    pub leader_count: usize,
    pub best_value: f64,
    pub evaluations: u64,
    pub seed: u64,
}

pub(crate) fn distinct_points<'a>(points: impl Iterator<Item = &'a [f64]>) -> Vec<Vec<f64>> {
    let mut out: Vec<Vec<f64>> = Vec::new();
    for p in points {
        if !out.iter().any(|q| q.as_slice() == p) {
            out.push(p.to_vec());
        }
    }
    out
}

/// A GKBO run in progress. [`run_gkbo`] drives this to completion; it is
/// exposed so callers can observe intermediate states.
#[derive(Debug, Clone)]
pub struct GkboState {
    spec: ObjectiveSpec,
    cfg: SolverConfig,
    rng: ChaCha8Rng,
    ensemble: Ensemble,
    energies: Vec<f64>,
    clusters: ClusterState,
    tracker: StallTracker,
    omega_bar: f64,
    iterations: usize,
    stall_index: usize,
    evaluations: u64,
}

impl GkboState {
    /// Draws the initial ensemble and promotes the `N_L` best agents with
    /// one deterministic label pass.
    pub fn new(spec: &ObjectiveSpec, cfg: &SolverConfig, n_agents: usize) -> Result<Self> {
        cfg.validate(n_agents)?;
        let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
        let [lo, hi] = cfg.domain;
        let ensemble = Ensemble::init_uniform(n_agents, spec.dim(), lo, hi, &mut rng)?;
        Self::from_ensemble(spec, cfg, ensemble, rng)
    }

    /// Starts from an explicit ensemble; labels are taken as given unless no
    /// leader exists, in which case the deterministic pass runs.
    pub fn with_ensemble(
        spec: &ObjectiveSpec,
        cfg: &SolverConfig,
        ensemble: Ensemble,
    ) -> Result<Self> {
        cfg.validate(ensemble.len())?;
        let rng = ChaCha8Rng::seed_from_u64(cfg.seed);
        Self::from_ensemble(spec, cfg, ensemble, rng)
    }

    fn from_ensemble(
        spec: &ObjectiveSpec,
        cfg: &SolverConfig,
        mut ensemble: Ensemble,
        mut rng: ChaCha8Rng,
    ) -> Result<Self> {
        let energies = ensemble.energies(spec)?;
        let omega_bar = cfg.omega_bar(ensemble.len());
        if ensemble.leader_count() == 0 {
            let weights = WeightVector::from_energies(&energies)?;
            apply_label_transitions(&mut ensemble, &weights, omega_bar, 1.0, &mut rng)?;
        }
        let mut clusters = assign_clusters(&ensemble)?;
        cluster_consensus_from_energies(&ensemble, &energies, &mut clusters, cfg.alpha)?;
        let tracker = StallTracker::new(&clusters);
        Ok(Self {
            spec: spec.clone(),
            cfg: cfg.clone(),
            rng,
            evaluations: ensemble.len() as u64,
            ensemble,
            energies,
            clusters,
            tracker,
            omega_bar,
            iterations: 0,
            stall_index: 0,
        })
    }

    pub fn is_finished(&self) -> bool {
        self.iterations >= self.cfg.n_steps || self.stall_index >= self.cfg.j_stall
    }

    /// Advances one iteration. Returns `false` without doing anything once
    /// the step budget or the stall criterion is exhausted.
    pub fn step(&mut self) -> Result<bool> {
        if self.is_finished() {
            return Ok(false);
        }
        interaction_step(
            &mut self.ensemble,
            &self.clusters,
            &self.cfg,
            &mut self.rng,
            self.iterations,
        )?;
        self.energies = self.ensemble.energies(&self.spec)?;
        self.evaluations += self.ensemble.len() as u64;

        let weights = WeightVector::from_energies(&self.energies)?;
        apply_label_transitions(
            &mut self.ensemble,
            &weights,
            self.omega_bar,
            self.cfg.eps,
            &mut self.rng,
        )?;
        if self.ensemble.leader_count() == 0 {
            apply_label_transitions(
                &mut self.ensemble,
                &weights,
                self.omega_bar,
                1.0,
                &mut self.rng,
            )?;
        }

        self.clusters = assign_clusters(&self.ensemble)?;
        cluster_consensus_from_energies(
            &self.ensemble,
            &self.energies,
            &mut self.clusters,
            self.cfg.alpha,
        )?;
        self.stall_index = self.tracker.check(&self.clusters, self.cfg.delta_stall);
        self.iterations += 1;
        Ok(true)
    }

    pub fn ensemble(&self) -> &Ensemble {
        &self.ensemble
    }

    pub fn clusters(&self) -> &ClusterState {
        &self.clusters
    }

    pub fn energies(&self) -> &[f64] {
        &self.energies
    }

    pub fn iterations(&self) -> usize {
        self.iterations
    }

    pub fn report(&self) -> RunReport {
        RunReport {
            iterations: self.iterations,
            stalled: self.stall_index >= self.cfg.j_stall,
            final_consensus: distinct_points(self.clusters.consensus_points()),
            leader_count: self.ensemble.leader_count(),
            best_value: self.energies.iter().copied().fold(f64::INFINITY, f64::min),
            evaluations: self.evaluations,
            seed: self.cfg.seed,
        }
    }
}

/// Runs GKBO to termination: `N_t` iterations or `j_stall` consecutive
/// stalled iterations, whichever comes first.
pub fn run_gkbo(spec: &ObjectiveSpec, cfg: &SolverConfig, n_agents: usize) -> Result<RunReport> {
    let mut state = GkboState::new(spec, cfg, n_agents)?;
    while state.step()? {}
    Ok(state.report())
}
