//! Particle population: positions, leader/follower labels, rank weights and
//! the stochastic label transitions.

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::objectives::ObjectiveSpec;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Label {
    Follower,
    Leader,
}

impl Label {
    pub fn is_leader(self) -> bool {
        self == Label::Leader
    }
}

/// `N_s` agents in `R^d`. Positions are stored row-major in one buffer.
#[derive(Debug, Clone, PartialEq)]
pub struct Ensemble {
    dim: usize,
    positions: Vec<f64>,
    labels: Vec<Label>,
}

impl Ensemble {
    /// Builds an ensemble from explicit rows. Every row must have the same
    /// non-zero length and finite coordinates.
    pub fn from_rows(rows: &[Vec<f64>], labels: Vec<Label>) -> Result<Self> {
        let dim = rows.first().map(Vec::len).unwrap_or(0);
        if rows.is_empty() || dim == 0 {
            return Err(Error::invalid(
                "ensemble needs at least one agent of dimension ≥ 1",
            ));
        }
        if labels.len() != rows.len() {
            return Err(Error::invalid(format!(
                "{} labels for {} agents",
                labels.len(),
                rows.len()
            )));
        }
        let mut positions = Vec::with_capacity(rows.len() * dim);
        for (i, row) in rows.iter().enumerate() {
            if row.len() != dim {
                return Err(Error::invalid(format!(
                    "agent {i} has {} coordinates, expected {dim}",
                    row.len()
                )));
            }
            if row.iter().any(|v| !v.is_finite()) {
                return Err(Error::invalid(format!(
                    "agent {i} has a non-finite coordinate"
                )));
            }
            positions.extend_from_slice(row);
        }
        Ok(Self {
            dim,
            positions,
            labels,
        })
    }

    /// Draws every coordinate i.i.d. uniform on `[lo, hi]`; all agents start
    /// as followers.
    pub fn init_uniform<R: Rng + ?Sized>(
        n_agents: usize,
        dim: usize,
        lo: f64,
        hi: f64,
        rng: &mut R,
    ) -> Result<Self> {
        if n_agents == 0 || dim == 0 {
            return Err(Error::invalid("need at least one agent of dimension ≥ 1"));
        }
        if !(lo.is_finite() && hi.is_finite() && lo < hi) {
            return Err(Error::invalid(format!("invalid domain [{lo}, {hi}]")));
        }
        let positions = (0..n_agents * dim)
            .map(|_| rng.random_range(lo..=hi))
            .collect();
        Ok(Self {
            dim,
            positions,
            labels: vec![Label::Follower; n_agents],
        })
    }

    pub fn len(&self) -> usize {
        self.labels.len()
    }

    pub fn is_empty(&self) -> bool {
        self.labels.is_empty()
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    #[inline]
    pub fn position(&self, i: usize) -> &[f64] {
        &self.positions[i * self.dim..(i + 1) * self.dim]
    }

    pub fn positions(&self) -> impl ExactSizeIterator<Item = &[f64]> {
        self.positions.chunks_exact(self.dim)
    }

    pub(crate) fn positions_flat(&self) -> &[f64] {
        &self.positions
    }

    pub(crate) fn positions_flat_mut(&mut self) -> &mut [f64] {
        &mut self.positions
    }

    pub fn labels(&self) -> &[Label] {
        &self.labels
    }

    pub fn set_label(&mut self, i: usize, label: Label) {
        self.labels[i] = label;
    }

    pub fn leader_count(&self) -> usize {
        self.labels.iter().filter(|l| l.is_leader()).count()
    }

    /// Agent indices holding the leader label, ascending.
    pub fn leader_indices(&self) -> Vec<usize> {
        self.labels
            .iter()
            .enumerate()
            .filter_map(|(i, l)| l.is_leader().then_some(i))
            .collect()
    }

    /// Objective value of every agent.
    pub fn energies(&self, spec: &ObjectiveSpec) -> Result<Vec<f64>> {
        if spec.dim() != self.dim {
            return Err(Error::invalid(format!(
                "objective dimension {} does not match ensemble dimension {}",
                spec.dim(),
                self.dim
            )));
        }
        let energies: Vec<f64> = self.positions().map(|x| spec.eval_unchecked(x)).collect();
        if let Some(agent) = energies.iter().position(|e| !e.is_finite()) {
            return Err(Error::NonFiniteEnergy { agent });
        }
        Ok(energies)
    }
}

/// Rank weights `ω_i = #{j : |E_min − E_j| < |E_min − E_i|} / N`.
#[derive(Debug, Clone, PartialEq)]
pub struct WeightVector {
    pub omega: Vec<f64>,
    pub x_min_index: usize,
}

impl WeightVector {
    pub fn from_energies(energies: &[f64]) -> Result<Self> {
        if energies.is_empty() {
            return Err(Error::invalid("cannot weight an empty ensemble"));
        }
        if let Some(agent) = energies.iter().position(|e| !e.is_finite()) {
            return Err(Error::NonFiniteEnergy { agent });
        }
        // first index wins on ties
        let x_min_index =
            energies
                .iter()
                .enumerate()
                .fold(0, |best, (i, &e)| if e < energies[best] { i } else { best });
        let e_min = energies[x_min_index];
        let gaps: Vec<f64> = energies.iter().map(|e| (e_min - e).abs()).collect();
        let mut sorted = gaps.clone();
        sorted.sort_unstable_by(f64::total_cmp);
        let n = energies.len() as f64;
        let omega = gaps
            .iter()
            .map(|&g| sorted.partition_point(|&s| s < g) as f64 / n)
            .collect();
        Ok(Self { omega, x_min_index })
    }
}

pub fn compute_weights(ens: &Ensemble, spec: &ObjectiveSpec) -> Result<WeightVector> {
    WeightVector::from_energies(&ens.energies(spec)?)
}

/// One synchronous label-switching step. A uniform variate is drawn for every
/// agent in index order; followers with `ω < ω̄` are promoted and leaders with
/// `ω > ω̄` demoted when that draw falls below `eps`.
pub fn apply_label_transitions<R: Rng + ?Sized>(
    ens: &mut Ensemble,
    weights: &WeightVector,
    omega_bar: f64,
    eps: f64,
    rng: &mut R,
) -> Result<()> {
    if weights.omega.len() != ens.len() {
        return Err(Error::invalid(format!(
            "{} weights for {} agents",
            weights.omega.len(),
            ens.len()
        )));
    }
    for (label, &w) in ens.labels.iter_mut().zip(&weights.omega) {
        let u: f64 = rng.random();
        let eligible = match *label {
            Label::Follower => w < omega_bar,
            Label::Leader => w > omega_bar,
        };
        if eligible && u < eps {
            *label = match *label {
                Label::Follower => Label::Leader,
                Label::Leader => Label::Follower,
            };
        }
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    /// Literal pairwise count, independent of the sorting path.
    fn brute_force_omega(energies: &[f64]) -> Vec<f64> {
        let mut min_i = 0;
        for (i, &e) in energies.iter().enumerate() {
            if e < energies[min_i] {
                min_i = i;
            }
        }
        let e_min = energies[min_i];
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

    #[test]
    fn init_uniform_covers_box_with_followers() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let ens = Ensemble::init_uniform(600, 2, -10.0, 10.0, &mut rng).unwrap();
        assert_eq!(ens.len(), 600);
        assert_eq!(ens.positions_flat().len(), 1200);
        assert!(ens
            .positions_flat()
            .iter()
            .all(|v| (-10.0..=10.0).contains(v)));
        assert_eq!(ens.leader_count(), 0);

        let single = Ensemble::init_uniform(1, 1, -1.0, 1.0, &mut rng).unwrap();
        assert_eq!(single.labels(), &[Label::Follower]);
    }

    #[test]
    fn init_uniform_is_seed_deterministic() {
        let a = Ensemble::init_uniform(50, 3, -10.0, 10.0, &mut ChaCha8Rng::seed_from_u64(9));
        let b = Ensemble::init_uniform(50, 3, -10.0, 10.0, &mut ChaCha8Rng::seed_from_u64(9));
        assert_eq!(a.unwrap(), b.unwrap());
    }

    #[test]
    fn init_uniform_rejects_bad_domain() {
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        assert!(Ensemble::init_uniform(0, 2, -1.0, 1.0, &mut rng).is_err());
        assert!(Ensemble::init_uniform(3, 2, 1.0, 1.0, &mut rng).is_err());
    }

    #[test]
    fn weights_small_examples() {
        let w = WeightVector::from_energies(&[3.0, 1.0, 2.0]).unwrap();
        assert_eq!(w.omega, vec![2.0 / 3.0, 0.0, 1.0 / 3.0]);
        assert_eq!(w.x_min_index, 1);

        let w = WeightVector::from_energies(&[4.0; 5]).unwrap();
        assert!(w.omega.iter().all(|&o| o == 0.0));
        assert_eq!(w.x_min_index, 0);
    }

    #[test]
    fn weights_reject_non_finite_energy() {
        let err = WeightVector::from_energies(&[1.0, f64::NAN, 0.0]).unwrap_err();
        assert!(matches!(err, Error::NonFiniteEnergy { agent: 1 }));
    }

    #[test]
    fn certain_transitions_when_eps_is_one() {
        let rows = vec![vec![0.0], vec![1.0], vec![2.0]];
        let mut ens =
            Ensemble::from_rows(&rows, vec![Label::Follower, Label::Leader, Label::Leader])
                .unwrap();
        let w = WeightVector::from_energies(&[0.0, 1.0, 2.0]).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        apply_label_transitions(&mut ens, &w, 1.0 / 3.0, 1.0, &mut rng).unwrap();
        // agent 1 sits exactly on ω̄ and keeps its label
        assert_eq!(
            ens.labels(),
            &[Label::Leader, Label::Leader, Label::Follower]
        );
        assert_eq!(ens.position(2), &[2.0]);
    }

    #[test]
    fn flip_rate_matches_eps() {
        let mut rng = ChaCha8Rng::seed_from_u64(2024);
        let w = WeightVector {
            omega: vec![0.0],
            x_min_index: 0,
        };
        let trials = 100_000;
        let mut flips = 0;
        for _ in 0..trials {
            let mut ens = Ensemble::from_rows(&[vec![0.0]], vec![Label::Follower]).unwrap();
            apply_label_transitions(&mut ens, &w, 0.5, 0.1, &mut rng).unwrap();
            flips += ens.leader_count();
        }
        let rate = flips as f64 / trials as f64;
        assert!((rate - 0.1).abs() <= 0.01, "empirical flip rate {rate}");
    }

    proptest! {
        #[test]
        fn weights_match_brute_force(energies in prop::collection::vec(-5i32..5, 1..=20)) {
            let energies: Vec<f64> = energies.into_iter().map(|e| f64::from(e) * 0.5).collect();
            let w = WeightVector::from_energies(&energies).unwrap();
            prop_assert_eq!(&w.omega, &brute_force_omega(&energies));
            prop_assert_eq!(w.omega[w.x_min_index], 0.0);
            let n = energies.len() as f64;
            for &o in &w.omega {
                let m = o * n;
                prop_assert!(m.fract() == 0.0 && m >= 0.0 && m < n);
            }
        }

        #[test]
        fn weights_invariant_under_increasing_maps(
            energies in prop::collection::vec(-3.0f64..3.0, 1..=20),
        ) {
            let mapped: Vec<f64> = energies.iter().map(|e| e.exp() * 2.0 + 7.0).collect();
            let a = WeightVector::from_energies(&energies).unwrap();
            let b = WeightVector::from_energies(&mapped).unwrap();
            prop_assert_eq!(a.omega, b.omega);
        }

        #[test]
        fn deterministic_pass_selects_best_ranked(
            energies in prop::collection::btree_set(-1000i32..1000, 1..=40),
            n_leaders_frac in 0.01f64..1.0,
            seed in 0u64..1000,
        ) {
            // shuffle the distinct energies deterministically by seed
            let mut energies: Vec<f64> = energies.into_iter().map(f64::from).collect();
            let n = energies.len();
            energies.rotate_left(seed as usize % n);
            let n_leaders = ((n_leaders_frac * n as f64).ceil() as usize).clamp(1, n);
            let rows: Vec<Vec<f64>> = (0..n).map(|i| vec![i as f64]).collect();
            let mut ens = Ensemble::from_rows(&rows, vec![Label::Follower; n]).unwrap();
            let before = ens.clone();
            let w = WeightVector::from_energies(&energies).unwrap();
            let omega_bar = n_leaders as f64 / n as f64;
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            apply_label_transitions(&mut ens, &w, omega_bar, 1.0, &mut rng).unwrap();

            let mut order: Vec<usize> = (0..n).collect();
            order.sort_by(|&a, &b| energies[a].total_cmp(&energies[b]));
            let mut expected = vec![Label::Follower; n];
            for &i in &order[..n_leaders] {
                expected[i] = Label::Leader;
            }
            prop_assert_eq!(ens.labels(), &expected[..]);
            prop_assert_eq!(ens.positions_flat(), before.positions_flat());
            prop_assert_eq!(ens.len(), before.len());
        }
    }
}
