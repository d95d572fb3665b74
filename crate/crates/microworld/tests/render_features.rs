//! Renderer oracles: mirror symmetry, billboard projection, FOV and
//! wall occlusion, and the feature/pixel consistency invariant.

use microworld::map::MapSpec;
use microworld::sim::reset;
use microworld::{
    render_with_classes, visible_features, ActorId, FeatureClass, FeatureSet, Vec2, AGENT,
};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

const W: usize = 60;
const H: usize = 45;

fn empty_room() -> MapSpec {
    MapSpec::from_grid(
        "empty",
        &[
            "#############",
            "#...........#",
            "#...........#",
            "#.....0.....#",
            "#...........#",
            "#.....1.....#",
            "#...........#",
            "#############",
        ],
        &[0.0, 0.0],
        vec![],
        5,
    )
    .unwrap()
}

fn enemy_set() -> FeatureSet {
    FeatureSet(vec![FeatureClass::Enemy])
}

#[test]
fn empty_room_renders_mirror_images() {
    let map = MapSpec::from_grid(
        "sym",
        &[
            "#############",
            "#...........#",
            "#...........#",
            "#0.........1#",
            "#...........#",
            "#...........#",
            "#############",
        ],
        &[0.0, 180.0],
        vec![],
        9,
    )
    .unwrap();
    let mut state = reset(&map, 0, 1).unwrap();
    // exact center of the room, facing +x
    state.place_actor(AGENT, Vec2::new(6.5, 3.5), 0.0);
    let frame = microworld::render(&mut state, AGENT, W, H);
    for y in 0..H {
        for x in 0..W {
            assert_eq!(
                frame.get(x, y),
                frame.get(W - 1 - x, y),
                "asymmetry at ({x},{y})"
            );
        }
    }
}

fn enemy_column_height(class_buf: &[u8]) -> usize {
    let mut best = 0;
    for x in 0..W {
        let mut count = 0;
        for y in 0..H {
            if class_buf[y * W + x] == 1 {
                count += 1;
            }
        }
        best = best.max(count);
    }
    best
}

#[test]
fn billboard_height_follows_inverse_distance() {
    let mut state = reset(&empty_room(), 1, 1).unwrap();
    state.place_actor(AGENT, Vec2::new(1.5, 3.5), 0.0);
    state.place_actor(ActorId(1), Vec2::new(1.5 + 4.0, 3.5), 0.0);
    let (_, classes_near) = render_with_classes(&state, AGENT, W, H);
    let h1 = enemy_column_height(&classes_near);

    state.place_actor(ActorId(1), Vec2::new(1.5 + 8.0, 3.5), 0.0);
    let (_, classes_far) = render_with_classes(&state, AGENT, W, H);
    let h2 = enemy_column_height(&classes_far);

    assert!(h1 > 0 && h2 > 0, "enemy not rendered: {h1} {h2}");
    let expected = h1 as f32 / 2.0;
    assert!(
        (h2 as f32 - expected).abs() <= 1.0,
        "height {h1} at d vs {h2} at 2d"
    );
}

#[test]
fn enemy_behind_viewer_is_invisible() {
    let mut state = reset(&empty_room(), 1, 1).unwrap();
    state.place_actor(AGENT, Vec2::new(6.5, 3.5), 0.0); // facing +x
    state.place_actor(ActorId(1), Vec2::new(2.5, 3.5), 0.0); // behind
    let (_, classes) = render_with_classes(&state, AGENT, W, H);
    assert!(classes.iter().all(|&c| c != 1));
    let feats = visible_features(&state, AGENT, W, H, &enemy_set());
    assert!(!feats[0]);
}

#[test]
fn enemy_behind_wall_is_invisible_inside_fov() {
    let map = MapSpec::from_grid(
        "occl",
        &[
            "###########",
            "#0...#....#",
            "#....#....#",
            "#....#..1.#",
            "#.........#",
            "###########",
        ],
        &[0.0, 180.0],
        vec![],
        3,
    )
    .unwrap();
    let mut state = reset(&map, 1, 1).unwrap();
    state.place_actor(AGENT, Vec2::new(2.5, 2.5), 0.0); // facing +x at the wall
    state.place_actor(ActorId(1), Vec2::new(8.5, 2.5), 0.0); // dead ahead, behind wall
    let feats = visible_features(&state, AGENT, W, H, &enemy_set());
    assert!(!feats[0], "enemy visible through wall");
    // step out of cover: two cells down has an open line
    state.place_actor(AGENT, Vec2::new(2.5, 4.5), 0.0);
    state.place_actor(ActorId(1), Vec2::new(8.5, 4.5), 0.0);
    let feats = visible_features(&state, AGENT, W, H, &enemy_set());
    assert!(feats[0], "enemy not visible in the open");
}

#[test]
fn features_match_pixels_exactly_under_fuzz() {
    // the invariant: features[c] <=> at least one pixel of class c
    let map = microworld::map::arena();
    let mut rng = ChaCha8Rng::seed_from_u64(31337);
    let set = FeatureSet(vec![
        FeatureClass::Enemy,
        FeatureClass::Health,
        FeatureClass::Ammo,
        FeatureClass::Weapon,
    ]);
    let free = map.free_cells();
    for trial in 0..120 {
        let mut state = reset(&map.with_palette_seed(rng.gen()), 3, rng.gen()).unwrap();
        for i in 0..state.actors.len() {
            let (cx, cy) = free[rng.gen_range(0..free.len())];
            let pos = Vec2::new(cx as f32 + 0.5, cy as f32 + 0.5);
            if !state.map.collides(pos, microworld::sim::ACTOR_RADIUS) {
                state.place_actor(
                    ActorId(i),
                    pos,
                    rng.gen_range(-std::f32::consts::PI..std::f32::consts::PI),
                );
            }
        }
        let feats = visible_features(&state, AGENT, W, H, &set);
        let (_, classes) = render_with_classes(&state, AGENT, W, H);
        for (ci, class) in [1u8, 2, 3, 4].iter().enumerate() {
            let any_pixel = classes.iter().any(|c| c == class);
            assert_eq!(
                feats[ci], any_pixel,
                "trial {trial}: class {class} feature/pixel mismatch"
            );
        }
    }
}

#[test]
fn no_entities_means_no_features() {
    let mut state = reset(&empty_room(), 0, 1).unwrap();
    state.place_actor(AGENT, Vec2::new(6.5, 3.5), 0.0);
    let set = FeatureSet(vec![
        FeatureClass::Enemy,
        FeatureClass::Health,
        FeatureClass::Ammo,
        FeatureClass::Weapon,
    ]);
    assert!(visible_features(&state, AGENT, W, H, &set).iter().all(|&f| !f));
}

#[test]
fn render_is_deterministic() {
    let map = microworld::map::arena();
    let mut a = reset(&map, 4, 5).unwrap();
    let mut b = reset(&map, 4, 5).unwrap();
    let fa = microworld::render(&mut a, AGENT, W, H);
    let fb = microworld::render(&mut b, AGENT, W, H);
    assert_eq!(fa.data, fb.data);
}

#[test]
fn dead_viewer_gets_frozen_frame() {
    let mut state = reset(&empty_room(), 1, 3).unwrap();
    state.give_launcher(AGENT);
    state.place_actor(AGENT, Vec2::new(1.5, 1.5), std::f32::consts::PI);
    state.step(Some(microworld::Action::Attack), 6);
    assert!(!state.agent().alive);
    let f1 = microworld::render(&mut state, AGENT, W, H);
    // world keeps moving; the dead view must not
    state.step(None, 10);
    let f2 = microworld::render(&mut state, AGENT, W, H);
    assert_eq!(f1.data, f2.data);
}

#[test]
fn probe_set_is_balanced_and_labeled() {
    let map = microworld::map::arena();
    let frames = microworld::labeled_enemy_frames(&map, 60, W, H, 77);
    assert_eq!(frames.len(), 60);
    let pos = frames.iter().filter(|f| f.enemy_visible).count();
    assert_eq!(pos, 30);
    // labels are reproducible
    let again = microworld::labeled_enemy_frames(&map, 60, W, H, 77);
    assert_eq!(
        frames.iter().map(|f| f.enemy_visible).collect::<Vec<_>>(),
        again.iter().map(|f| f.enemy_visible).collect::<Vec<_>>()
    );
    assert_eq!(frames[0].frame.data, again[0].frame.data);
}
