//! Running a learned policy as a fleet controller and collecting its
//! decisions as training transitions.

use std::collections::BTreeMap;

use aam_nn::Tape;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::gae::compute_gae;
use crate::config::EpisodeConfig;
use crate::episode::{run_episode, Decision, EpisodeMetrics, FleetController};
use crate::policy::{BatchInput, Observation, Policy};
use crate::sim::{Completion, World};
use crate::Result;

/// One decision of one agent.
#[derive(Clone, Debug)]
pub struct Transition {
    pub obs: Observation,
    pub action: usize,
    pub log_prob: f64,
    pub value: f64,
    /// Net reward of the decision, attached when its job completes.
    pub reward: f64,
    /// Last decision of the agent in this sequence.
    pub done: bool,
    pub episode: usize,
    pub agent: usize,
    /// Decision index of the agent within the episode.
    pub step: u32,
    pub advantage: f64,
    pub ret: f64,
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct ControlOptions {
    pub k_v: usize,
    pub k_d: usize,
    pub use_mask: bool,
    /// Take the most probable depot instead of sampling.
    pub greedy: bool,
}

/// Drives every vehicle with one shared policy; optionally records the
/// decisions it makes.
pub struct PolicyController<'a> {
    pub policy: &'a Policy,
    pub options: ControlOptions,
    rng: ChaCha8Rng,
    recording: Option<Recording>,
}

struct Recording {
    episode: usize,
    transitions: Vec<Transition>,
    /// `(vehicle, decision index)` to transition position.
    pending: BTreeMap<(usize, u32), usize>,
}

impl<'a> PolicyController<'a> {
    pub fn new(policy: &'a Policy, options: ControlOptions, seed: u64) -> Self {
        Self {
            policy,
            options,
            rng: ChaCha8Rng::seed_from_u64(seed),
            recording: None,
        }
    }

    fn start_recording(&mut self, episode: usize) {
        self.recording = Some(Recording {
            episode,
            transitions: Vec::new(),
            pending: BTreeMap::new(),
        });
    }

    /// Finished transitions of the recorded episode, in decision order.
    fn take_recording(&mut self) -> Vec<Transition> {
        let mut rec = self.recording.take().map(|r| r.transitions).unwrap_or_default();
        let mut last: BTreeMap<usize, usize> = BTreeMap::new();
        for (i, t) in rec.iter().enumerate() {
            last.insert(t.agent, i);
        }
        for &i in last.values() {
            rec[i].done = true;
        }
        rec
    }

    fn sample(&mut self, probabilities: &[f64]) -> usize {
        if self.options.greedy {
            // first maximum, so ties resolve to the lower id
            return probabilities
                .iter()
                .enumerate()
                .fold((0, f64::NEG_INFINITY), |best, (i, &p)| if p > best.1 { (i, p) } else { best })
                .0;
        }
        let u: f64 = self.rng.random();
        let mut acc = 0.0;
        let mut fallback = 0;
        for (i, &p) in probabilities.iter().enumerate() {
            if p > 0.0 {
                acc += p;
                fallback = i;
                if u < acc {
                    return i;
                }
            }
        }
        fallback
    }
}

impl FleetController for PolicyController<'_> {
    fn decide(&mut self, world: &World, deciding: &[usize]) -> Result<Vec<Decision>> {
        let o = self.options;
        let observations = deciding
            .iter()
            .map(|&v| Observation::new(world, v, o.k_v, o.k_d, o.use_mask))
            .collect::<Result<Vec<_>>>()?;
        let refs: Vec<&Observation> = observations.iter().collect();
        let input = BatchInput::new(&refs)?;
        let (log_probs, values) = {
            let mut tape = Tape::new(&self.policy.params);
            let pass = self.policy.forward(&mut tape, &input)?;
            (tape.value(pass.log_probs).clone(), tape.value(pass.values).clone())
        };

        let mut decisions = Vec::with_capacity(deciding.len());
        for (row, (obs, &v)) in observations.into_iter().zip(deciding).enumerate() {
            let probabilities: Vec<f64> = log_probs.row(row).iter().map(|l| l.exp()).collect();
            let action = self.sample(&probabilities);
            if let Some(rec) = self.recording.as_mut() {
                let step = world.vehicles[v].decisions;
                rec.pending.insert((v, step), rec.transitions.len());
                rec.transitions.push(Transition {
                    obs,
                    action,
                    log_prob: log_probs.get(row, action),
                    value: values.get(row, 0),
                    reward: 0.0,
                    done: false,
                    episode: rec.episode,
                    agent: v,
                    step,
                    advantage: 0.0,
                    ret: 0.0,
                });
            }
            decisions.push(Decision::Depot(action));
        }
        Ok(decisions)
    }

    fn on_completion(&mut self, _world: &World, c: &Completion) {
        if let Some(rec) = self.recording.as_mut() {
            if let Some(i) = rec.pending.remove(&(c.vehicle, c.decision)) {
                rec.transitions[i].reward = c.reward;
            }
        }
    }
}

/// Transitions with advantages and returns filled in, plus the metrics of
/// every episode that contributed.
#[derive(Clone, Debug, Default)]
pub struct RolloutBuffer {
    pub transitions: Vec<Transition>,
    pub episodes: Vec<EpisodeMetrics>,
}

impl RolloutBuffer {
    pub fn len(&self) -> usize {
        self.transitions.len()
    }

    pub fn is_empty(&self) -> bool {
        self.transitions.is_empty()
    }
}

/// Runs episodes with seeds `first_seed, first_seed + 1, ...` until `count`
/// decisions are recorded. The buffer keeps exactly `count`; agents cut off
/// mid-episode bootstrap from the value of their first dropped decision.
#[allow(clippy::too_many_arguments)]
pub fn collect_rollouts(
    config: &EpisodeConfig,
    policy: &Policy,
    options: ControlOptions,
    count: usize,
    first_seed: u64,
    action_seed: u64,
    gamma: f64,
    lambda: f64,
) -> Result<RolloutBuffer> {
    let mut controller = PolicyController::new(policy, options, action_seed);
    let mut buffer = RolloutBuffer::default();
    let mut episode = 0;
    let mut idle_streak = 0;
    while buffer.transitions.len() < count {
        controller.start_recording(episode);
        let run = run_episode(config, first_seed + episode as u64, &mut controller)?;
        let mut recorded = controller.take_recording();
        // Episodes without demand end before anyone decides; a long run of
        // them means the configuration can never fill the buffer.
        idle_streak = if recorded.is_empty() { idle_streak + 1 } else { 0 };
        if idle_streak > 1000 {
            return Err(crate::Error::InvalidConfig("no decisions in 1000 consecutive episodes".into()));
        }
        // merge order: episode, then tick, then agent (the recording order)
        let room = count - buffer.transitions.len();
        let mut bootstrap: BTreeMap<usize, f64> = BTreeMap::new();
        if recorded.len() > room {
            for t in &recorded[room..] {
                bootstrap.entry(t.agent).or_insert(t.value);
            }
            recorded.truncate(room);
            for t in recorded.iter_mut() {
                if bootstrap.contains_key(&t.agent) {
                    t.done = false;
                }
            }
        }
        fill_advantages(&mut recorded, &bootstrap, gamma, lambda)?;
        buffer.transitions.extend(recorded);
        buffer.episodes.push(run.metrics);
        episode += 1;
    }
    Ok(buffer)
}

/// Runs GAE separately over each agent's decisions of one episode.
fn fill_advantages(episode: &mut [Transition], bootstrap: &BTreeMap<usize, f64>, gamma: f64, lambda: f64) -> Result<()> {
    let mut by_agent: BTreeMap<usize, Vec<usize>> = BTreeMap::new();
    for (i, t) in episode.iter().enumerate() {
        by_agent.entry(t.agent).or_default().push(i);
    }
    for (agent, idx) in by_agent {
        let rewards: Vec<f64> = idx.iter().map(|&i| episode[i].reward).collect();
        let values: Vec<f64> = idx.iter().map(|&i| episode[i].value).collect();
        let dones: Vec<bool> = idx.iter().map(|&i| episode[i].done).collect();
        let last = bootstrap.get(&agent).copied().unwrap_or(0.0);
        let (adv, ret) = compute_gae(&rewards, &values, &dones, last, gamma, lambda)?;
        for (k, &i) in idx.iter().enumerate() {
            episode[i].advantage = adv[k];
            episode[i].ret = ret[k];
        }
    }
    Ok(())
}
