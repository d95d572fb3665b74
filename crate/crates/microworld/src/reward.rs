//! Shaped rewards for the two training phases.

use crate::event::GameEvent;
use serde::{Deserialize, Serialize};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Phase {
    Action,
    Navigation,
}

/// Per-event reward weights. Magnitudes are kept small against the
/// +/-1 of a frag so they densify the signal without dominating it.
#[derive(Clone, Copy, Debug, Serialize, Deserialize)]
#[serde(default)]
pub struct RewardConfig {
    pub kill: f32,
    pub suicide: f32,
    pub pickup: f32,
    /// Applied per point of health lost (weight is negative).
    pub health_loss_per_point: f32,
    pub shot_fired: f32,
    /// Navigation only: per cell moved since the last decision.
    pub distance_per_cell: f32,
    pub lava_tick: f32,
}

impl Default for RewardConfig {
    fn default() -> Self {
        RewardConfig {
            kill: 1.0,
            suicide: -1.0,
            pickup: 0.04,
            health_loss_per_point: -0.01,
            shot_fired: -0.02,
            distance_per_cell: 0.05,
            lava_tick: -0.05,
        }
    }
}

/// Sum the phase's reward terms over one actor's events.
///
/// Action phase: kills, suicides, pickups, health loss, shots.
/// Navigation phase: pickups, distance moved, lava ticks.
pub fn shaped_reward(events: &[GameEvent], config: &RewardConfig, phase: Phase) -> f32 {
    let mut total = 0.0f32;
    for event in events {
        match (phase, event) {
            (Phase::Action, GameEvent::Kill) => total += config.kill,
            (Phase::Action, GameEvent::Suicide) => total += config.suicide,
            (Phase::Action, GameEvent::Pickup(_)) => total += config.pickup,
            (Phase::Action, GameEvent::HealthDelta(d)) if *d < 0 => {
                total += config.health_loss_per_point * (-d) as f32;
            }
            (Phase::Action, GameEvent::ShotFired) => total += config.shot_fired,
            (Phase::Navigation, GameEvent::Pickup(_)) => total += config.pickup,
            (Phase::Navigation, GameEvent::Moved(d)) => total += config.distance_per_cell * d,
            (Phase::Navigation, GameEvent::LavaTick) => total += config.lava_tick,
            _ => {}
        }
    }
    total
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::map::ItemKind;

    #[test]
    fn no_events_is_zero() {
        assert_eq!(shaped_reward(&[], &RewardConfig::default(), Phase::Action), 0.0);
    }

    #[test]
    fn one_kill_is_plus_one() {
        let r = shaped_reward(&[GameEvent::Kill], &RewardConfig::default(), Phase::Action);
        assert_eq!(r, 1.0);
    }

    #[test]
    fn navigation_distance_is_linear() {
        let r = shaped_reward(
            &[GameEvent::Moved(2.0)],
            &RewardConfig::default(),
            Phase::Navigation,
        );
        assert!((r - 0.1).abs() < 1e-6);
    }

    #[test]
    fn phases_select_disjoint_terms() {
        let events = [
            GameEvent::Kill,
            GameEvent::Moved(3.0),
            GameEvent::ShotFired,
            GameEvent::Pickup(ItemKind::Ammo),
            GameEvent::HealthDelta(-10),
            GameEvent::LavaTick,
        ];
        let cfg = RewardConfig::default();
        let action = shaped_reward(&events, &cfg, Phase::Action);
        let nav = shaped_reward(&events, &cfg, Phase::Navigation);
        // action: 1.0 + 0.04 - 0.02 - 0.1 = 0.92 (no distance term)
        assert!((action - 0.92).abs() < 1e-6);
        // nav: 0.04 + 0.15 - 0.05 = 0.14 (no kill/shot/health terms)
        assert!((nav - 0.14).abs() < 1e-6);
    }

    #[test]
    fn healing_is_not_penalized() {
        let r = shaped_reward(
            &[GameEvent::HealthDelta(25)],
            &RewardConfig::default(),
            Phase::Action,
        );
        assert_eq!(r, 0.0);
    }
}
