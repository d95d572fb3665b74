use crate::map::ItemKind;

/// Index into the sim's actor list; the agent is always actor 0.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct ActorId(pub usize);

pub const AGENT: ActorId = ActorId(0);

/// Things that happened to a specific actor during a step. A suicide
/// always co-occurs with a death for the same actor; lava and
/// self-blast deaths both count as suicides so every death has exactly
/// one attributed cause.
#[derive(Clone, Copy, Debug, PartialEq)]
pub enum GameEvent {
    /// Credited to the attacker (attacker != victim).
    Kill,
    Death,
    Suicide,
    Pickup(ItemKind),
    /// Signed; damage is negative, healing positive.
    HealthDelta(i32),
    ShotFired,
    /// Distance covered in cells during this step call.
    Moved(f32),
    LavaTick,
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct EventRecord {
    pub actor: ActorId,
    pub event: GameEvent,
}

/// Events belonging to one actor.
pub fn events_for(events: &[EventRecord], actor: ActorId) -> impl Iterator<Item = &GameEvent> {
    events
        .iter()
        .filter(move |r| r.actor == actor)
        .map(|r| &r.event)
}
