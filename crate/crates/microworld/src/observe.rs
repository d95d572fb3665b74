//! Observation assembly: rendered frame + game-feature ground truth +
//! scalar meta. Rendering for a dead viewer returns the frozen frame
//! from the moment of death.

use crate::event::ActorId;
use crate::render::{render_scene, FeatureSet, Frame};
use crate::sim::SimState;

#[derive(Clone, Debug)]
pub struct Observation {
    pub frame: Frame,
    /// Ground-truth visibility per configured feature class.
    pub features: Vec<bool>,
    pub health: i32,
    pub ammo: u32,
}

/// First-person view for `viewer`. While the viewer is dead the frame
/// from the first post-death render is returned unchanged until respawn.
pub fn render(state: &mut SimState, viewer: ActorId, w: usize, h: usize) -> Frame {
    let i = viewer.0;
    if state.actors[i].alive {
        let pose = (state.actors[i].pos, state.actors[i].heading);
        return render_scene(state, i, pose, w, h).frame;
    }
    if let Some(cached) = &state.death_view[i] {
        if cached.w == w && cached.h == h {
            return cached.clone();
        }
    }
    let pose = (state.actors[i].pos, state.actors[i].heading);
    let frame = render_scene(state, i, pose, w, h).frame;
    state.death_view[i] = Some(frame.clone());
    frame
}

/// Ground-truth entity visibility, computed by the exact render pass
/// (per-pixel class attribution), so it can never diverge from pixels.
/// A dead viewer sees nothing.
pub fn visible_features(
    state: &SimState,
    viewer: ActorId,
    w: usize,
    h: usize,
    set: &FeatureSet,
) -> Vec<bool> {
    let i = viewer.0;
    if !state.actors[i].alive {
        return vec![false; set.k()];
    }
    let pose = (state.actors[i].pos, state.actors[i].heading);
    render_scene(state, i, pose, w, h).features(set)
}

/// Frame, features and scalars in one render pass.
pub fn observe(
    state: &mut SimState,
    viewer: ActorId,
    w: usize,
    h: usize,
    set: &FeatureSet,
) -> Observation {
    let i = viewer.0;
    let (health, ammo) = (state.actors[i].health, state.actors[i].ammo);
    if !state.actors[i].alive {
        return Observation {
            frame: render(state, viewer, w, h),
            features: vec![false; set.k()],
            health: 0,
            ammo,
        };
    }
    let pose = (state.actors[i].pos, state.actors[i].heading);
    let scene = render_scene(state, i, pose, w, h);
    Observation {
        features: scene.features(set),
        frame: scene.frame,
        health,
        ammo,
    }
}
