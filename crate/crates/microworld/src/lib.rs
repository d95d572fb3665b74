//! Deterministic, partially observable first-person micro-arena: a
//! raycast renderer over a 2D occupancy grid, scripted deathmatch bots,
//! itemized shaped rewards, and ground-truth entity-visibility features
//! taken from the same occlusion computation as the pixels.

pub mod action;
pub mod error;
pub mod event;
pub mod map;
pub mod observe;
pub mod ppm;
pub mod probe;
pub mod render;
pub mod reward;
pub mod sim;
pub mod vec2;

pub use action::{Action, ACTION_SET, NAV_SET};
pub use error::{MapError, SimError};
pub use event::{events_for, ActorId, EventRecord, GameEvent, AGENT};
pub use map::{ItemKind, ItemSpawn, MapSpec};
pub use observe::{observe, render, visible_features, Observation};
pub use ppm::write_ppm;
pub use probe::{labeled_enemy_frames, LabeledFrame};
pub use render::{line_of_sight, render_with_classes, FeatureClass, FeatureSet, Frame, Palette};
pub use reward::{shaped_reward, Phase, RewardConfig};
pub use sim::{bot_policy, reset, Actor, Projectile, SimState, Weapon};
pub use vec2::Vec2;
