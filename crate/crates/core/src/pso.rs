//! Star-topology particle swarm optimization over bounded mixed
//! continuous/discrete spaces. Scores are minimized.

use std::collections::BTreeMap;

use rand::Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::rng::{substream, StreamRng};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum DimensionKind {
    Continuous,
    Integer,
    /// Index into a list of options; bounds are the first and last index.
    Categorical,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Dimension {
    pub name: String,
    pub kind: DimensionKind,
    pub lower: f64,
    pub upper: f64,
    /// The swarm moves in log10 space; decoding yields 10^p.
    #[serde(default)]
    pub log10: bool,
}

impl Dimension {
    pub fn continuous(name: &str, lower: f64, upper: f64) -> Self {
        Dimension {
            name: name.into(),
            kind: DimensionKind::Continuous,
            lower,
            upper,
            log10: false,
        }
    }

    pub fn log10(name: &str, lower_exp: f64, upper_exp: f64) -> Self {
        Dimension {
            log10: true,
            ..Self::continuous(name, lower_exp, upper_exp)
        }
    }

    pub fn integer(name: &str, lower: f64, upper: f64) -> Self {
        Dimension {
            kind: DimensionKind::Integer,
            ..Self::continuous(name, lower, upper)
        }
    }

    fn decode(&self, p: f64) -> f64 {
        let p = p.clamp(self.lower, self.upper);
        match self.kind {
            DimensionKind::Continuous if self.log10 => 10f64.powf(p),
            DimensionKind::Continuous => p,
            DimensionKind::Integer | DimensionKind::Categorical => {
                let r = p.round().clamp(self.lower.ceil(), self.upper.floor());
                if self.log10 {
                    10f64.powf(r)
                } else {
                    r
                }
            }
        }
    }

    fn encode(&self, v: f64) -> f64 {
        if self.log10 {
            v.log10()
        } else {
            v
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(transparent)]
pub struct SearchSpace {
    pub dims: Vec<Dimension>,
}

/// Named hyperparameter values decoded from a position.
pub type Assignment = BTreeMap<String, f64>;

impl SearchSpace {
    pub fn new(dims: Vec<Dimension>) -> Result<Self> {
        let space = SearchSpace { dims };
        space.validate()?;
        Ok(space)
    }

    pub fn validate(&self) -> Result<()> {
        if self.dims.is_empty() {
            return Err(Error::SearchSpace("search space has no dimensions".into()));
        }
        let mut names = std::collections::HashSet::new();
        for d in &self.dims {
            if !(d.lower.is_finite() && d.upper.is_finite() && d.lower < d.upper) {
                return Err(Error::SearchSpace(format!(
                    "dimension {} needs finite lower < upper, got [{}, {}]",
                    d.name, d.lower, d.upper
                )));
            }
            if !names.insert(d.name.as_str()) {
                return Err(Error::SearchSpace(format!(
                    "duplicate dimension {}",
                    d.name
                )));
            }
            if d.kind != DimensionKind::Continuous && d.lower.ceil() > d.upper.floor() {
                return Err(Error::SearchSpace(format!(
                    "discrete dimension {} contains no integer",
                    d.name
                )));
            }
        }
        Ok(())
    }

    pub fn len(&self) -> usize {
        self.dims.len()
    }

    pub fn is_empty(&self) -> bool {
        self.dims.is_empty()
    }

    pub fn lower(&self) -> Vec<f64> {
        self.dims.iter().map(|d| d.lower).collect()
    }

    pub fn upper(&self) -> Vec<f64> {
        self.dims.iter().map(|d| d.upper).collect()
    }

    /// Continuous dimensions pass through (10^p for log-scaled ones);
    /// integer and categorical dimensions round to the nearest valid value.
    pub fn decode(&self, position: &[f64]) -> Assignment {
        self.dims
            .iter()
            .zip(position)
            .map(|(d, p)| (d.name.clone(), d.decode(*p)))
            .collect()
    }

    pub fn encode(&self, assignment: &Assignment) -> Result<Vec<f64>> {
        self.dims
            .iter()
            .map(|d| {
                assignment
                    .get(&d.name)
                    .map(|v| d.encode(*v))
                    .ok_or_else(|| Error::SearchSpace(format!("assignment lacks {}", d.name)))
            })
            .collect()
    }
}

/// Inertia and acceleration constants.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PsoConstants {
    pub inertia: f64,
    pub cognitive: f64,
    pub social: f64,
}

impl Default for PsoConstants {
    fn default() -> Self {
        PsoConstants {
            inertia: 0.9,
            cognitive: 0.5,
            social: 0.3,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Particle {
    pub position: Vec<f64>,
    pub velocity: Vec<f64>,
    pub best_position: Vec<f64>,
    #[serde(with = "crate::serde_matrix::score")]
    pub best_score: f64,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct Swarm {
    pub particles: Vec<Particle>,
    pub global_best: Vec<f64>,
    #[serde(with = "crate::serde_matrix::score")]
    pub global_best_score: f64,
    pub constants: PsoConstants,
    lower: Vec<f64>,
    upper: Vec<f64>,
    rng: StreamRng,
}

impl PartialEq for Swarm {
    fn eq(&self, other: &Self) -> bool {
        self.particles == other.particles
            && self.global_best == other.global_best
            && self.global_best_score.to_bits() == other.global_best_score.to_bits()
            && self.constants == other.constants
            && self.rng == other.rng
    }
}

/// Uniform positions within bounds and velocities within +-range/2.
pub fn init_swarm(
    space: &SearchSpace,
    n_particles: usize,
    constants: PsoConstants,
    seed: u64,
) -> Result<Swarm> {
    space.validate()?;
    if n_particles == 0 {
        return Err(Error::SearchSpace(
            "swarm needs at least one particle".into(),
        ));
    }
    let mut rng = substream(seed, "pso/init");
    let lower = space.lower();
    let upper = space.upper();
    let particles = (0..n_particles)
        .map(|_| {
            let position: Vec<f64> = lower
                .iter()
                .zip(&upper)
                .map(|(lo, hi)| rng.random_range(*lo..=*hi))
                .collect();
            let velocity = lower
                .iter()
                .zip(&upper)
                .map(|(lo, hi)| {
                    let half = 0.5 * (hi - lo);
                    rng.random_range(-half..=half)
                })
                .collect();
            Particle {
                best_position: position.clone(),
                position,
                velocity,
                best_score: f64::INFINITY,
            }
        })
        .collect::<Vec<_>>();
    Ok(Swarm {
        global_best: particles[0].position.clone(),
        global_best_score: f64::INFINITY,
        particles,
        constants,
        lower,
        upper,
        rng: substream(seed, "pso/steps"),
    })
}

impl Swarm {
    /// Folds one score per particle into personal and global bests.
    /// Non-finite scores count as +inf and never become a best.
    pub fn record_scores(&mut self, scores: &[f64]) -> Result<()> {
        if scores.len() != self.particles.len() {
            return Err(Error::dim(
                "particle scores",
                self.particles.len(),
                scores.len(),
            ));
        }
        for (p, &s) in self.particles.iter_mut().zip(scores) {
            let s = if s.is_finite() { s } else { f64::INFINITY };
            if s < p.best_score {
                p.best_score = s;
                p.best_position = p.position.clone();
            }
        }
        // particle order, strict improvement: independent of evaluation order
        for p in &self.particles {
            if p.best_score < self.global_best_score {
                self.global_best_score = p.best_score;
                self.global_best = p.best_position.clone();
            }
        }
        Ok(())
    }

    /// Velocity and position update with fresh per-dimension U(0,1) draws.
    pub fn advance(&mut self) {
        let mut rng = self.rng.clone();
        self.advance_with(|| (rng.random::<f64>(), rng.random::<f64>()));
        self.rng = rng;
    }

    /// Velocity and position update with caller-supplied (U1, U2) draws, one
    /// pair per particle and dimension.
    pub fn advance_with<F: FnMut() -> (f64, f64)>(&mut self, mut draws: F) {
        let PsoConstants {
            inertia,
            cognitive,
            social,
        } = self.constants;
        for p in &mut self.particles {
            for k in 0..p.position.len() {
                let (u1, u2) = draws();
                let v = inertia * p.velocity[k]
                    + cognitive * u1 * (p.best_position[k] - p.position[k])
                    + social * u2 * (self.global_best[k] - p.position[k]);
                let mut x = p.position[k] + v;
                let mut v = v;
                if x < self.lower[k] {
                    x = self.lower[k];
                    v = 0.0;
                } else if x > self.upper[k] {
                    x = self.upper[k];
                    v = 0.0;
                }
                p.position[k] = x;
                p.velocity[k] = v;
            }
        }
    }

    pub fn positions(&self) -> Vec<Vec<f64>> {
        self.particles.iter().map(|p| p.position.clone()).collect()
    }
}

/// Records `fitness` and moves every particle.
pub fn swarm_step(mut swarm: Swarm, fitness: &[f64]) -> Result<Swarm> {
    swarm.record_scores(fitness)?;
    swarm.advance();
    Ok(swarm)
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct PsoSettings {
    pub iterations: usize,
    pub particles: usize,
    #[serde(default)]
    pub constants: PsoConstants,
    pub seed: u64,
}

/// Search state that can be persisted and resumed.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PsoCheckpoint {
    pub swarm: Swarm,
    pub completed_iterations: usize,
    #[serde(with = "crate::serde_matrix::scores")]
    pub trace: Vec<f64>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct PsoOutcome {
    pub best_position: Vec<f64>,
    #[serde(with = "crate::serde_matrix::score")]
    pub best_score: f64,
    /// Best score after each iteration; nonincreasing.
    #[serde(with = "crate::serde_matrix::scores")]
    pub trace: Vec<f64>,
}

/// Runs the swarm for `settings.iterations` iterations.
///
/// All particles of an iteration are evaluated (in parallel when a rayon pool
/// is active) before any best is updated. An objective error scores +inf.
pub fn optimize<F>(objective: F, space: &SearchSpace, settings: &PsoSettings) -> Result<PsoOutcome>
where
    F: Fn(&[f64]) -> Result<f64> + Sync,
{
    let swarm = init_swarm(space, settings.particles, settings.constants, settings.seed)?;
    let checkpoint = PsoCheckpoint {
        swarm,
        completed_iterations: 0,
        trace: Vec::new(),
    };
    resume(objective, checkpoint, settings.iterations, |_| Ok(()))
}

/// Continues a search until `iterations` total iterations have completed,
/// handing a checkpoint to `on_iteration` after each one.
pub fn resume<F, C>(
    objective: F,
    mut checkpoint: PsoCheckpoint,
    iterations: usize,
    mut on_iteration: C,
) -> Result<PsoOutcome>
where
    F: Fn(&[f64]) -> Result<f64> + Sync,
    C: FnMut(&PsoCheckpoint) -> Result<()>,
{
    if iterations == 0 {
        return Err(Error::SearchSpace(
            "PSO needs at least one iteration".into(),
        ));
    }
    while checkpoint.completed_iterations < iterations {
        let positions = checkpoint.swarm.positions();
        let scores: Vec<f64> = positions
            .par_iter()
            .map(|p| match objective(p) {
                Ok(s) if s.is_finite() => s,
                Ok(_) => f64::INFINITY,
                Err(e) => {
                    log::warn!("objective failed, scoring +inf: {e}");
                    f64::INFINITY
                }
            })
            .collect();
        checkpoint.swarm.record_scores(&scores)?;
        checkpoint.trace.push(checkpoint.swarm.global_best_score);
        checkpoint.completed_iterations += 1;
        checkpoint.swarm.advance();
        on_iteration(&checkpoint)?;
    }
    Ok(PsoOutcome {
        best_position: checkpoint.swarm.global_best.clone(),
        best_score: checkpoint.swarm.global_best_score,
        trace: checkpoint.trace,
    })
}
