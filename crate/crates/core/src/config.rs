use serde::{Deserialize, Serialize};

use crate::{Error, Result};

/// Side length of the square service area, in grid cells.
pub const GRID_SIZE: u32 = 24;
/// Maximum number of queued requests per depot.
pub const QUEUE_CAPACITY: usize = 5;
/// Ticks between payload population rounds in on-demand mode.
pub const ARRIVAL_INTERVAL: u64 = 50;
/// Vehicle speed in grid units per tick.
pub const VEHICLE_SPEED: f64 = 1.0;
/// Standard deviation of sampled payload sizes around a depot's mean size.
pub const SIZE_STD: f64 = 0.1;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Mode {
    /// Queues are filled once at the start and never again.
    OneShot,
    /// Queues are refilled every [`ARRIVAL_INTERVAL`] ticks.
    OnDemand,
}

/// Per-depot Poisson rates (arrivals per tick) a depot draws from.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum RateSet {
    High,
    Low,
}

impl RateSet {
    pub fn values(self) -> [f64; 3] {
        match self {
            RateSet::High => [0.01, 0.05, 0.025],
            RateSet::Low => [0.005, 0.025, 0.0125],
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EpisodeConfig {
    pub mode: Mode,
    pub duration_ticks: u64,
    /// Maximum decisions per agent per episode.
    pub max_decisions: u32,
    pub rates: RateSet,
    /// Number of vehicles of capacity 1, 2 and 3.
    pub fleet: [usize; 3],
    pub depots: usize,
    pub clients: usize,
    /// Observed vehicles per agent, ego included.
    pub k_v: usize,
    /// Observed depots per agent.
    pub k_d: usize,
    /// Seeds the depot/client layout; per-episode randomness is seeded separately.
    pub seed: u64,
}

impl EpisodeConfig {
    pub fn one_shot(fleet: [usize; 3], depots: usize, clients: usize) -> Self {
        Self {
            mode: Mode::OneShot,
            duration_ticks: 100,
            max_decisions: 50,
            rates: RateSet::High,
            fleet,
            depots,
            clients,
            k_v: 5.min(fleet.iter().sum()),
            k_d: 5.min(depots),
            seed: 0,
        }
    }

    pub fn on_demand(fleet: [usize; 3], depots: usize, clients: usize) -> Self {
        Self {
            mode: Mode::OnDemand,
            duration_ticks: 400,
            ..Self::one_shot(fleet, depots, clients)
        }
    }

    pub fn vehicle_count(&self) -> usize {
        self.fleet.iter().sum()
    }

    pub fn validate(&self) -> Result<()> {
        let fail = |msg: String| Err(Error::InvalidConfig(msg));
        if self.vehicle_count() == 0 {
            return fail("fleet is empty".into());
        }
        if self.depots == 0 {
            return fail("at least one depot is required".into());
        }
        if self.duration_ticks == 0 || self.max_decisions == 0 {
            return fail("duration and decision budget must be positive".into());
        }
        if self.k_v == 0 || self.k_v > self.vehicle_count() {
            return fail(format!("k_v = {} outside 1..={}", self.k_v, self.vehicle_count()));
        }
        if self.k_d == 0 || self.k_d > self.depots {
            return fail(format!("k_d = {} outside 1..={}", self.k_d, self.depots));
        }
        let cells = (GRID_SIZE * GRID_SIZE) as usize;
        if self.depots + self.clients > cells {
            return fail("more nodes than grid cells".into());
        }
        if self.depots + self.clients < 2 {
            return fail("payloads need a destination other than their origin".into());
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn presets_are_valid() {
        EpisodeConfig::one_shot([2, 2, 2], 10, 12).validate().unwrap();
        EpisodeConfig::on_demand([2, 2, 2], 5, 5).validate().unwrap();
        assert_eq!(EpisodeConfig::on_demand([1, 0, 0], 3, 3).duration_ticks, 400);
    }

    #[test]
    fn observation_ranges_are_checked() {
        let mut c = EpisodeConfig::one_shot([1, 1, 1], 4, 4);
        c.k_d = 5;
        assert!(c.validate().is_err());
        c.k_d = 4;
        c.k_v = 4;
        assert!(c.validate().is_err());
        c.k_v = 3;
        c.fleet = [0, 0, 0];
        assert!(c.validate().is_err());
    }
}
