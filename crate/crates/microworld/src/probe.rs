//! Labeled frame sets for feature-detection evaluation: randomized
//! poses, palettes and entity layouts, balanced between frames with a
//! visible enemy and frames without one. Labels come from the render
//! pass itself, so they are ground truth by construction.

use crate::event::ActorId;
use crate::map::MapSpec;
use crate::render::{render_scene, FeatureClass, FeatureSet, Frame};
use crate::sim::{reset, ACTOR_RADIUS};
use crate::vec2::Vec2;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

#[derive(Clone, Debug)]
pub struct LabeledFrame {
    pub frame: Frame,
    pub enemy_visible: bool,
}

/// Generate `count` frames, half with a visible enemy and half without.
/// Each sample draws a fresh palette from the seed stream, so a set
/// keyed by a seed disjoint from training exercises generalization.
pub fn labeled_enemy_frames(
    map: &MapSpec,
    count: usize,
    w: usize,
    h: usize,
    seed: u64,
) -> Vec<LabeledFrame> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed.wrapping_mul(0x9e3779b97f4a7c15).wrapping_add(11));
    let set = FeatureSet(vec![FeatureClass::Enemy]);
    let mut positives = Vec::with_capacity(count / 2);
    let mut negatives = Vec::with_capacity(count - count / 2);
    let free = map.free_cells();
    let mut attempts = 0usize;
    let max_attempts = count.saturating_mul(200).max(10_000);

    while (positives.len() < count / 2 || negatives.len() < count - count / 2)
        && attempts < max_attempts
    {
        attempts += 1;
        let palette_seed = rng.gen::<u64>();
        let n_bots = rng.gen_range(1..=3usize).min(map.spawns.len() - 1);
        let mut state = match reset(&map.with_palette_seed(palette_seed), n_bots, rng.gen()) {
            Ok(s) => s,
            Err(_) => continue,
        };
        // random item availability for distractor variety
        for idx in 0..state.items.len() {
            state.set_item_present(idx, rng.gen::<f32>() < 0.7);
        }
        // scatter all actors
        let mut placed = true;
        for i in 0..state.actors.len() {
            let mut ok = false;
            for _ in 0..40 {
                let (cx, cy) = free[rng.gen_range(0..free.len())];
                let pos = Vec2::new(
                    cx as f32 + 0.5 + rng.gen_range(-0.3..0.3),
                    cy as f32 + 0.5 + rng.gen_range(-0.3..0.3),
                );
                if !state.map.collides(pos, ACTOR_RADIUS) {
                    state.place_actor(
                        ActorId(i),
                        pos,
                        rng.gen_range(-std::f32::consts::PI..std::f32::consts::PI),
                    );
                    ok = true;
                    break;
                }
            }
            if !ok {
                placed = false;
                break;
            }
        }
        if !placed {
            continue;
        }
        let pose = (state.actors[0].pos, state.actors[0].heading);
        let scene = render_scene(&state, 0, pose, w, h);
        let visible = scene.features(&set)[0];
        if visible && positives.len() < count / 2 {
            positives.push(LabeledFrame {
                frame: scene.frame,
                enemy_visible: true,
            });
        } else if !visible && negatives.len() < count - count / 2 {
            negatives.push(LabeledFrame {
                frame: scene.frame,
                enemy_visible: false,
            });
        }
    }

    // deterministic interleave
    let mut out = Vec::with_capacity(positives.len() + negatives.len());
    let mut p = positives.into_iter();
    let mut n = negatives.into_iter();
    loop {
        match (p.next(), n.next()) {
            (None, None) => break,
            (a, b) => {
                if let Some(a) = a {
                    out.push(a);
                }
                if let Some(b) = b {
                    out.push(b);
                }
            }
        }
    }
    out
}
