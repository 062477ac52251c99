//! Simulated trajectories and their containment in computed reach sets.

use czreach_core::sample::{FactorSampler, SamplingMode};
use czreach_core::{ReachResult, Result};
use nalgebra::DVector;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::Serialize;

use crate::scenario::Scenario;

/// `trajectories[k][t]` is the state of trajectory `k` at time `t`.
pub struct Trajectories {
    pub states: Vec<Vec<DVector<f64>>>,
    pub mode: SamplingMode,
}

/// Simulates `count` closed-loop trajectories from seeded samples of `X0`.
pub fn sample_trajectories(scenario: &Scenario, count: usize, seed: u64) -> Result<Trajectories> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut sampler = FactorSampler::new(&scenario.initial_set)?;
    let mut states = Vec::with_capacity(count);
    for _ in 0..count {
        let xi = sampler.sample(&mut rng)?;
        let mut x = scenario.initial_set.at(&xi);
        let mut traj = Vec::with_capacity(scenario.horizon + 1);
        traj.push(x.clone());
        for _ in 0..scenario.horizon {
            let u = scenario.network.eval(&x);
            x = scenario.plant.step(&x, &u);
            traj.push(x.clone());
        }
        states.push(traj);
    }
    Ok(Trajectories { states, mode: sampler.mode() })
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct StepContainment {
    pub t: usize,
    pub contained: usize,
    pub total: usize,
    pub fraction: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ContainmentReport {
    pub samples: usize,
    pub sampling: &'static str,
    pub steps: Vec<StepContainment>,
    /// `(trajectory, t)` pairs that fell outside the reach set.
    pub misses: Vec<(usize, usize)>,
}

impl ContainmentReport {
    pub fn all_contained(&self) -> bool {
        self.misses.is_empty()
    }
}

fn mode_name(mode: SamplingMode) -> &'static str {
    match mode {
        SamplingMode::Uniform => "uniform",
        SamplingMode::Rejection => "rejection",
        SamplingMode::VertexFallback => "vertex-fallback",
    }
}

/// Checks every sampled state against the reach set of its time step.
pub fn containment(reach: &ReachResult, trajectories: &Trajectories) -> Result<ContainmentReport> {
    let horizon = reach.horizon();
    let mut steps = Vec::with_capacity(horizon + 1);
    let mut misses = Vec::new();
    for t in 0..=horizon {
        let index = reach.steps[t].indexed()?;
        let mut contained = 0;
        for (k, traj) in trajectories.states.iter().enumerate() {
            let Some(x) = traj.get(t) else { continue };
            if index.contains(x)? {
                contained += 1;
            } else {
                misses.push((k, t));
            }
        }
        let total = trajectories.states.iter().filter(|tr| tr.len() > t).count();
        let fraction = if total == 0 { 1.0 } else { contained as f64 / total as f64 };
        steps.push(StepContainment { t, contained, total, fraction });
    }
    misses.sort();
    Ok(ContainmentReport { samples: trajectories.states.len(), sampling: mode_name(trajectories.mode), steps, misses })
}
