use serde::{Deserialize, Serialize};

/// Discrete controls. The action network chooses from all six; the
/// navigation network from the three movement-only entries.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Action {
    MoveForward,
    MoveBackward,
    TurnLeft,
    TurnRight,
    /// Single lateral dodge (right of facing).
    Strafe,
    Attack,
}

pub const ACTION_SET: [Action; 6] = [
    Action::MoveForward,
    Action::MoveBackward,
    Action::TurnLeft,
    Action::TurnRight,
    Action::Strafe,
    Action::Attack,
];

pub const NAV_SET: [Action; 3] = [Action::MoveForward, Action::TurnLeft, Action::TurnRight];
