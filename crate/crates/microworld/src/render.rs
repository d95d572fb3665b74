//! Column raycaster with a 90 degree horizontal FOV plus billboard
//! sprites for entities. Game-feature ground truth comes from the same
//! pass: a per-pixel class buffer is filled while drawing, and a
//! feature is true exactly when its class owns at least one pixel.

use crate::map::{ItemKind, MapSpec};
use crate::sim::SimState;
use crate::vec2::Vec2;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use tensor_engine::Tensor;

/// Rendered view, channel-major RGB ([3][h][w]), values 0-255.
#[derive(Clone, Debug, PartialEq)]
pub struct Frame {
    pub w: usize,
    pub h: usize,
    pub data: Vec<u8>,
}

impl Frame {
    pub fn new(w: usize, h: usize) -> Self {
        Frame {
            w,
            h,
            data: vec![0; 3 * w * h],
        }
    }

    #[inline]
    pub fn put(&mut self, x: usize, y: usize, rgb: [u8; 3]) {
        let plane = self.w * self.h;
        let off = y * self.w + x;
        self.data[off] = rgb[0];
        self.data[plane + off] = rgb[1];
        self.data[2 * plane + off] = rgb[2];
    }

    #[inline]
    pub fn get(&self, x: usize, y: usize) -> [u8; 3] {
        let plane = self.w * self.h;
        let off = y * self.w + x;
        [
            self.data[off],
            self.data[plane + off],
            self.data[2 * plane + off],
        ]
    }

    /// Float tensor [3,h,w] scaled to [0,1].
    pub fn to_tensor(&self) -> Tensor<f32> {
        let data: Vec<f32> = self.data.iter().map(|&b| b as f32 / 255.0).collect();
        Tensor::new(vec![3, self.h, self.w], data).expect("frame shape")
    }
}

/// Entity classes the feature head can be asked to detect.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum FeatureClass {
    Enemy,
    Health,
    Ammo,
    Weapon,
}

impl FeatureClass {
    fn class_id(self) -> u8 {
        match self {
            FeatureClass::Enemy => 1,
            FeatureClass::Health => 2,
            FeatureClass::Ammo => 3,
            FeatureClass::Weapon => 4,
        }
    }
}

/// Ordered list of feature classes exposed to the nets (k >= 1).
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct FeatureSet(pub Vec<FeatureClass>);

impl Default for FeatureSet {
    fn default() -> Self {
        FeatureSet(vec![FeatureClass::Enemy])
    }
}

impl FeatureSet {
    pub fn k(&self) -> usize {
        self.0.len()
    }
}

/// Episode color scheme. The seed perturbs wall/floor/ceiling strongly
/// (texture randomization analog) and entity tints mildly, so entity
/// classes stay learnable but are not pixel-constant.
#[derive(Clone, Debug)]
pub struct Palette {
    pub wall: [u8; 3],
    pub floor: [u8; 3],
    pub ceiling: [u8; 3],
    pub lava: [u8; 3],
    pub enemy_body: [u8; 3],
    pub enemy_head: [u8; 3],
    pub health: [u8; 3],
    pub ammo: [u8; 3],
    pub weapon: [u8; 3],
    pub rocket: [u8; 3],
}

fn hsv(h: f32, s: f32, v: f32) -> [u8; 3] {
    let h = h.rem_euclid(360.0) / 60.0;
    let c = v * s;
    let x = c * (1.0 - (h % 2.0 - 1.0).abs());
    let (r, g, b) = match h as u32 {
        0 => (c, x, 0.0),
        1 => (x, c, 0.0),
        2 => (0.0, c, x),
        3 => (0.0, x, c),
        4 => (x, 0.0, c),
        _ => (c, 0.0, x),
    };
    let m = v - c;
    [
        ((r + m) * 255.0).round() as u8,
        ((g + m) * 255.0).round() as u8,
        ((b + m) * 255.0).round() as u8,
    ]
}

impl Palette {
    pub fn from_seed(seed: u64) -> Self {
        let mut rng = ChaCha8Rng::seed_from_u64(seed.wrapping_mul(0x9e3779b97f4a7c15));
        let wall_hue = rng.gen_range(0.0..360.0);
        let floor_hue = rng.gen_range(0.0..360.0);
        let enemy_jit = rng.gen_range(-16.0..16.0);
        let item_jit = rng.gen_range(-12.0..12.0);
        Palette {
            wall: hsv(wall_hue, rng.gen_range(0.25..0.6), rng.gen_range(0.55..0.9)),
            floor: hsv(floor_hue, rng.gen_range(0.15..0.45), rng.gen_range(0.25..0.5)),
            ceiling: hsv(floor_hue + 30.0, rng.gen_range(0.1..0.3), rng.gen_range(0.12..0.3)),
            lava: hsv(20.0 + rng.gen_range(-8.0..8.0), 0.95, 0.95),
            enemy_body: hsv(350.0 + enemy_jit, 0.85, 0.72),
            enemy_head: hsv(350.0 + enemy_jit, 0.55, 0.95),
            health: hsv(120.0 + item_jit, 0.8, 0.8),
            ammo: hsv(55.0 + item_jit, 0.9, 0.9),
            weapon: hsv(280.0 + item_jit, 0.7, 0.85),
            rocket: hsv(35.0, 0.9, 1.0),
        }
    }
}

#[inline]
fn shade(rgb: [u8; 3], f: f32) -> [u8; 3] {
    [
        (rgb[0] as f32 * f).round().clamp(0.0, 255.0) as u8,
        (rgb[1] as f32 * f).round().clamp(0.0, 255.0) as u8,
        (rgb[2] as f32 * f).round().clamp(0.0, 255.0) as u8,
    ]
}

#[inline]
fn dim(dist: f32) -> f32 {
    1.0 / (1.0 + 0.07 * dist)
}

/// Camera-plane offsets per column, antisymmetric by construction so a
/// centered viewer in a symmetric room renders mirror-image halves.
fn camera_xs(w: usize) -> Vec<f32> {
    let mut xs = vec![0.0f32; w];
    for x in 0..w {
        let partner = w - 1 - x;
        if x > partner {
            xs[x] = (2.0 * x as f32 + 1.0) / w as f32 - 1.0;
        }
    }
    for x in 0..w {
        let partner = w - 1 - x;
        if x < partner {
            xs[x] = -xs[partner];
        }
    }
    xs
}

struct WallHit {
    perp: f32,
    side: u8,
}

fn cast_wall(map: &MapSpec, pos: Vec2, rd: Vec2) -> WallHit {
    let mut mx = pos.x.floor() as i32;
    let mut my = pos.y.floor() as i32;
    let ddx = if rd.x == 0.0 { f32::INFINITY } else { (1.0 / rd.x).abs() };
    let ddy = if rd.y == 0.0 { f32::INFINITY } else { (1.0 / rd.y).abs() };
    let (step_x, mut side_x) = if rd.x < 0.0 {
        (-1, (pos.x - mx as f32) * ddx)
    } else {
        (1, (mx as f32 + 1.0 - pos.x) * ddx)
    };
    let (step_y, mut side_y) = if rd.y < 0.0 {
        (-1, (pos.y - my as f32) * ddy)
    } else {
        (1, (my as f32 + 1.0 - pos.y) * ddy)
    };
    let mut side = 0u8;
    let limit = (map.width + map.height + 4) as u32;
    for _ in 0..limit {
        if side_x < side_y {
            side_x += ddx;
            mx += step_x;
            side = 0;
        } else {
            side_y += ddy;
            my += step_y;
            side = 1;
        }
        if mx < 0 || my < 0 || map.is_wall_cell(mx as usize, my as usize) {
            break;
        }
    }
    let perp = if side == 0 { side_x - ddx } else { side_y - ddy };
    WallHit {
        perp: perp.max(1e-4),
        side,
    }
}

/// Euclidean distance to the first wall along a unit direction.
pub(crate) fn wall_distance(map: &MapSpec, pos: Vec2, unit_dir: Vec2) -> f32 {
    cast_wall(map, pos, unit_dir).perp
}

/// Wall occlusion test between two points (used by bots and blasts).
pub fn line_of_sight(map: &MapSpec, from: Vec2, to: Vec2) -> bool {
    let rel = to.sub(from);
    let dist = rel.len();
    if dist < 1e-6 {
        return true;
    }
    let rd = rel.scale(1.0 / dist);
    let hit = cast_wall(map, from, rd);
    hit.perp >= dist - 1e-3
}

const N_CLASSES: usize = 6; // 0 none, 1-4 feature classes, 5 projectile

struct SpriteDraw {
    depth: f32,
    tx: f32,
    class_id: u8,
    scale: f32,
    aspect: f32,
}

pub(crate) struct Scene {
    pub frame: Frame,
    pub class_buf: Vec<u8>,
    class_present: [bool; N_CLASSES],
}

impl Scene {
    pub fn features(&self, set: &FeatureSet) -> Vec<bool> {
        set.0
            .iter()
            .map(|c| self.class_present[c.class_id() as usize])
            .collect()
    }
}

/// Render plus the per-pixel class attribution the features are
/// derived from (0 none, 1 enemy, 2 health, 3 ammo, 4 weapon,
/// 5 projectile). Debugging and oracle aid.
pub fn render_with_classes(
    state: &SimState,
    viewer: crate::event::ActorId,
    w: usize,
    h: usize,
) -> (Frame, Vec<u8>) {
    let a = &state.actors[viewer.0];
    let scene = render_scene(state, viewer.0, (a.pos, a.heading), w, h);
    (scene.frame, scene.class_buf)
}

/// Full render from an arbitrary pose. Pure: same state, same output.
pub(crate) fn render_scene(
    state: &SimState,
    viewer: usize,
    pose: (Vec2, f32),
    w: usize,
    h: usize,
) -> Scene {
    let map = &state.map;
    let pal = &state.palette;
    let (pos, heading) = pose;
    let dir = Vec2::from_heading(heading);
    let plane = dir.perp();
    let xs = camera_xs(w);
    let mut frame = Frame::new(w, h);
    let mut class_buf = vec![0u8; w * h];
    let mut zbuf = vec![f32::INFINITY; w];
    let half = h / 2;

    // ceiling
    for y in 0..half {
        for x in 0..w {
            frame.put(x, y, pal.ceiling);
        }
    }
    // floor casting: per-row distance, per-column world sample so lava
    // pools are visible
    for y in half..h {
        let p = (y - half) as f32 + 0.5;
        let row_dist = half as f32 / p;
        let f = dim(row_dist);
        let floor_rgb = shade(pal.floor, f);
        let lava_rgb = shade(pal.lava, f);
        for x in 0..w {
            let rd = dir.add(plane.scale(xs[x]));
            let sample = pos.add(rd.scale(row_dist));
            let rgb = if map.is_lava(sample) { lava_rgb } else { floor_rgb };
            frame.put(x, y, rgb);
        }
    }
    // walls
    for x in 0..w {
        let rd = dir.add(plane.scale(xs[x]));
        let hit = cast_wall(map, pos, rd);
        zbuf[x] = hit.perp;
        let line_h = h as f32 / hit.perp;
        let top = (half as f32 - line_h / 2.0).max(0.0) as usize;
        let bottom = ((half as f32 + line_h / 2.0) as usize).min(h);
        let side_shade = if hit.side == 1 { 0.72 } else { 1.0 };
        let rgb = shade(pal.wall, side_shade * dim(hit.perp));
        for y in top..bottom {
            frame.put(x, y, rgb);
        }
    }

    // collect sprites: living actors (not the viewer), present items,
    // projectiles in flight
    let mut sprites: Vec<SpriteDraw> = Vec::new();
    let inv = |rel: Vec2| -> (f32, f32) {
        // camera-space transform; plane/dir are unit and orthogonal
        let tx = dir.x * rel.y - dir.y * rel.x;
        let ty = dir.x * rel.x + dir.y * rel.y;
        (tx, ty)
    };
    for (i, actor) in state.actors.iter().enumerate() {
        if i == viewer || !actor.alive {
            continue;
        }
        let (tx, ty) = inv(actor.pos.sub(pos));
        sprites.push(SpriteDraw {
            depth: ty,
            tx,
            class_id: 1,
            scale: 0.62,
            aspect: 0.55,
        });
    }
    for (idx, item) in state.items.iter().enumerate() {
        if !item.present {
            continue;
        }
        let spawn = &state.map.items[idx];
        let ipos = Vec2::new(spawn.x, spawn.y);
        let (tx, ty) = inv(ipos.sub(pos));
        let class_id = match spawn.kind {
            ItemKind::Health => 2,
            ItemKind::Ammo => 3,
            ItemKind::Weapon => 4,
        };
        sprites.push(SpriteDraw {
            depth: ty,
            tx,
            class_id,
            scale: 0.30,
            aspect: 0.9,
        });
    }
    for proj in &state.projectiles {
        let (tx, ty) = inv(proj.pos.sub(pos));
        sprites.push(SpriteDraw {
            depth: ty,
            tx,
            class_id: 5,
            scale: 0.14,
            aspect: 1.0,
        });
    }

    // painter's order: far to near, deterministic tie-break
    sprites.sort_by(|a, b| {
        b.depth
            .partial_cmp(&a.depth)
            .unwrap_or(std::cmp::Ordering::Equal)
            .then(b.class_id.cmp(&a.class_id))
            .then(b.tx.partial_cmp(&a.tx).unwrap_or(std::cmp::Ordering::Equal))
    });

    for s in &sprites {
        if s.depth <= 0.1 {
            continue;
        }
        let screen_x = (w as f32 / 2.0) * (1.0 + s.tx / s.depth);
        let sprite_h = s.scale * h as f32 / s.depth;
        if sprite_h < 1.0 {
            continue;
        }
        let sprite_w = sprite_h * s.aspect;
        let bottom = if s.class_id == 5 {
            // projectiles fly at eye height
            half as f32 + sprite_h / 2.0
        } else {
            // feet on the floor plane
            half as f32 + (h as f32) / (2.0 * s.depth)
        };
        let top = bottom - sprite_h;
        let x0 = (screen_x - sprite_w / 2.0).floor() as i32;
        let x1 = (screen_x + sprite_w / 2.0).ceil() as i32;
        let y0 = top.floor().max(0.0) as usize;
        let y1 = (bottom.ceil() as usize).min(h);
        if x1 <= x0 || y1 <= y0 {
            continue;
        }
        for sx in x0.max(0)..x1.min(w as i32) {
            let sxu = sx as usize;
            if s.depth >= zbuf[sxu] {
                continue;
            }
            let u = (sx as f32 + 0.5 - (screen_x - sprite_w / 2.0)) / sprite_w;
            for sy in y0..y1 {
                let v = (sy as f32 + 0.5 - top) / sprite_h;
                if !(0.0..1.0).contains(&u) || !(0.0..1.0).contains(&v) {
                    continue;
                }
                let rgb = sprite_texel(pal, s.class_id, u, v, s.depth);
                frame.put(sxu, sy, rgb);
                class_buf[sy * w + sxu] = s.class_id;
            }
        }
    }

    let mut class_present = [false; N_CLASSES];
    for &c in &class_buf {
        class_present[c as usize] = true;
    }
    Scene {
        frame,
        class_buf,
        class_present,
    }
}

/// Procedural two-tone textures so each class has shape, not just hue.
fn sprite_texel(pal: &Palette, class_id: u8, u: f32, v: f32, depth: f32) -> [u8; 3] {
    let f = dim(depth);
    match class_id {
        1 => {
            // enemy: light head band, dark center stripe on the body
            if v < 0.28 {
                shade(pal.enemy_head, f)
            } else if (u - 0.5).abs() < 0.12 {
                shade(pal.enemy_body, 0.55 * f)
            } else {
                shade(pal.enemy_body, f)
            }
        }
        2 => {
            // health: white cross on green
            if (u - 0.5).abs() < 0.16 || (v - 0.5).abs() < 0.16 {
                shade([235, 235, 235], f)
            } else {
                shade(pal.health, f)
            }
        }
        3 => {
            // ammo: dark base band
            if v > 0.65 {
                shade(pal.ammo, 0.5 * f)
            } else {
                shade(pal.ammo, f)
            }
        }
        4 => {
            // weapon: bright diagonal
            if (u - v).abs() < 0.18 {
                shade([240, 240, 240], f)
            } else {
                shade(pal.weapon, f)
            }
        }
        _ => {
            // projectile: bright core
            if (u - 0.5).abs() < 0.25 && (v - 0.5).abs() < 0.25 {
                [255, 250, 210]
            } else {
                shade(pal.rocket, f)
            }
        }
    }
}
