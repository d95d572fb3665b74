//! Arena maps: an occupancy grid plus spawn points and item spawns.
//!
//! The on-disk form is JSON with the walls/lava/spawns encoded as an
//! ASCII grid: '#' wall, '.' floor, 'L' lava, digits 0-9 spawn ids.

use crate::error::MapError;
use crate::vec2::Vec2;
use serde::{Deserialize, Serialize};
use std::path::Path;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ItemKind {
    Health,
    Ammo,
    Weapon,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct ItemSpawn {
    pub kind: ItemKind,
    pub x: f32,
    pub y: f32,
    /// Ticks until the item reappears after a pickup.
    pub respawn: u64,
}

/// Compiled map. Build one from an ASCII grid (`from_grid`) or load the
/// JSON file form (`load`).
#[derive(Clone, Debug)]
pub struct MapSpec {
    pub name: String,
    pub width: usize,
    pub height: usize,
    walls: Vec<bool>,
    lava: Vec<bool>,
    /// (position, heading radians)
    pub spawns: Vec<(Vec2, f32)>,
    pub items: Vec<ItemSpawn>,
    pub palette_seed: u64,
}

/// Serde-facing file form.
#[derive(Serialize, Deserialize)]
struct MapFile {
    name: String,
    grid: Vec<String>,
    #[serde(default)]
    spawn_headings_deg: Vec<f32>,
    #[serde(default)]
    items: Vec<ItemSpawn>,
    #[serde(default)]
    palette_seed: u64,
}

impl MapSpec {
    pub fn from_grid(
        name: &str,
        grid: &[&str],
        spawn_headings_deg: &[f32],
        items: Vec<ItemSpawn>,
        palette_seed: u64,
    ) -> Result<Self, MapError> {
        let file = MapFile {
            name: name.to_owned(),
            grid: grid.iter().map(|s| s.to_string()).collect(),
            spawn_headings_deg: spawn_headings_deg.to_vec(),
            items,
            palette_seed,
        };
        Self::compile(file)
    }

    pub fn load<P: AsRef<Path>>(path: P) -> Result<Self, MapError> {
        let text = std::fs::read_to_string(path)?;
        let file: MapFile = serde_json::from_str(&text)?;
        Self::compile(file)
    }

    pub fn save<P: AsRef<Path>>(&self, path: P) -> Result<(), MapError> {
        let text = serde_json::to_string_pretty(&self.to_file())?;
        std::fs::write(path, text)?;
        Ok(())
    }

    fn to_file(&self) -> MapFile {
        let mut grid: Vec<Vec<char>> = (0..self.height)
            .map(|y| {
                (0..self.width)
                    .map(|x| {
                        if self.walls[y * self.width + x] {
                            '#'
                        } else if self.lava[y * self.width + x] {
                            'L'
                        } else {
                            '.'
                        }
                    })
                    .collect()
            })
            .collect();
        for (i, (pos, _)) in self.spawns.iter().enumerate() {
            let (x, y) = (pos.x as usize, pos.y as usize);
            grid[y][x] = char::from_digit(i as u32, 10).unwrap_or('.');
        }
        MapFile {
            name: self.name.clone(),
            grid: grid.into_iter().map(|r| r.into_iter().collect()).collect(),
            spawn_headings_deg: self
                .spawns
                .iter()
                .map(|(_, h)| h.to_degrees())
                .collect(),
            items: self.items.clone(),
            palette_seed: self.palette_seed,
        }
    }

    fn compile(file: MapFile) -> Result<Self, MapError> {
        let height = file.grid.len();
        if height < 3 {
            return Err(MapError::Invalid("grid needs at least 3 rows".into()));
        }
        let width = file.grid[0].chars().count();
        if width < 3 {
            return Err(MapError::Invalid("grid needs at least 3 columns".into()));
        }
        let mut walls = vec![false; width * height];
        let mut lava = vec![false; width * height];
        let mut spawn_cells: Vec<(usize, usize, usize)> = Vec::new(); // (id, x, y)
        for (y, row) in file.grid.iter().enumerate() {
            let chars: Vec<char> = row.chars().collect();
            if chars.len() != width {
                return Err(MapError::Invalid(format!(
                    "row {y} has {} cells, expected {width}",
                    chars.len()
                )));
            }
            for (x, ch) in chars.into_iter().enumerate() {
                match ch {
                    '#' => walls[y * width + x] = true,
                    '.' => {}
                    'L' => lava[y * width + x] = true,
                    d if d.is_ascii_digit() => {
                        spawn_cells.push((d.to_digit(10).unwrap() as usize, x, y));
                    }
                    other => {
                        return Err(MapError::Invalid(format!(
                            "unknown cell '{other}' at ({x},{y})"
                        )))
                    }
                }
            }
        }
        spawn_cells.sort_unstable();
        let spawns: Vec<(Vec2, f32)> = spawn_cells
            .iter()
            .enumerate()
            .map(|(i, &(_, x, y))| {
                let heading = file
                    .spawn_headings_deg
                    .get(i)
                    .copied()
                    .unwrap_or(0.0)
                    .to_radians();
                (Vec2::new(x as f32 + 0.5, y as f32 + 0.5), heading)
            })
            .collect();

        let map = MapSpec {
            name: file.name,
            width,
            height,
            walls,
            lava,
            spawns,
            items: file.items,
            palette_seed: file.palette_seed,
        };
        map.validate()?;
        Ok(map)
    }

    pub fn validate(&self) -> Result<(), MapError> {
        for x in 0..self.width {
            if !self.is_wall_cell(x, 0) || !self.is_wall_cell(x, self.height - 1) {
                return Err(MapError::Invalid("border must be walls".into()));
            }
        }
        for y in 0..self.height {
            if !self.is_wall_cell(0, y) || !self.is_wall_cell(self.width - 1, y) {
                return Err(MapError::Invalid("border must be walls".into()));
            }
        }
        if self.spawns.len() < 2 {
            return Err(MapError::Invalid(format!(
                "need at least 2 spawn points, got {}",
                self.spawns.len()
            )));
        }
        for (pos, _) in &self.spawns {
            if self.blocked_or_lava(*pos) {
                return Err(MapError::Invalid(format!(
                    "spawn at ({}, {}) on wall or lava",
                    pos.x, pos.y
                )));
            }
        }
        for item in &self.items {
            if self.blocked_or_lava(Vec2::new(item.x, item.y)) {
                return Err(MapError::Invalid(format!(
                    "item at ({}, {}) on wall or lava",
                    item.x, item.y
                )));
            }
        }
        Ok(())
    }

    fn blocked_or_lava(&self, p: Vec2) -> bool {
        self.is_wall(p) || self.is_lava(p)
    }

    #[inline]
    pub fn is_wall_cell(&self, x: usize, y: usize) -> bool {
        x >= self.width || y >= self.height || self.walls[y * self.width + x]
    }

    #[inline]
    pub fn is_wall(&self, p: Vec2) -> bool {
        if p.x < 0.0 || p.y < 0.0 {
            return true;
        }
        self.is_wall_cell(p.x as usize, p.y as usize)
    }

    #[inline]
    pub fn is_lava(&self, p: Vec2) -> bool {
        if p.x < 0.0 || p.y < 0.0 {
            return false;
        }
        let (x, y) = (p.x as usize, p.y as usize);
        x < self.width && y < self.height && self.lava[y * self.width + x]
    }

    /// Circle-vs-grid collision for actor movement.
    pub fn collides(&self, p: Vec2, radius: f32) -> bool {
        let x0 = (p.x - radius).floor() as i32;
        let x1 = (p.x + radius).floor() as i32;
        let y0 = (p.y - radius).floor() as i32;
        let y1 = (p.y + radius).floor() as i32;
        for cy in y0..=y1 {
            for cx in x0..=x1 {
                if cx < 0 || cy < 0 || self.is_wall_cell(cx as usize, cy as usize) {
                    // closest point of the cell to the circle center
                    let nx = p.x.clamp(cx as f32, cx as f32 + 1.0);
                    let ny = p.y.clamp(cy as f32, cy as f32 + 1.0);
                    if Vec2::new(nx, ny).dist(p) < radius {
                        return true;
                    }
                }
            }
        }
        false
    }

    pub fn free_cells(&self) -> Vec<(usize, usize)> {
        let mut out = Vec::new();
        for y in 0..self.height {
            for x in 0..self.width {
                if !self.walls[y * self.width + x] && !self.lava[y * self.width + x] {
                    out.push((x, y));
                }
            }
        }
        out
    }

    /// Copy with a different palette seed (texture randomization analog).
    pub fn with_palette_seed(&self, seed: u64) -> MapSpec {
        let mut m = self.clone();
        m.palette_seed = seed;
        m
    }

    /// Navigation variant: weapons removed, other items kept. Run it
    /// with zero bots for enemy-free exploration training.
    pub fn without_weapons(&self) -> MapSpec {
        let mut m = self.clone();
        m.items.retain(|i| i.kind != ItemKind::Weapon);
        m.name = format!("{}-nav", m.name);
        m
    }

    pub fn builtin(name: &str) -> Option<MapSpec> {
        match name {
            "arena" => Some(arena()),
            "cross" => Some(cross()),
            "pillars" => Some(pillars()),
            _ => None,
        }
    }
}

/// Main combat arena: open center, side rooms, one lava pool, ten
/// spawn points, health/ammo around the edges and a launcher near the
/// middle.
pub fn arena() -> MapSpec {
    let grid = [
        "###################",
        "#0.......#........#",
        "#.##.....#....##..#",
        "#.##..............#",
        "#........2.....1..#",
        "#...LL............#",
        "#...LL....####....#",
        "#3........####..4.#",
        "#.................#",
        "#....5........##..#",
        "#.####........##..#",
        "#.####...6........#",
        "#........##....7..#",
        "#8.......##......9#",
        "###################",
    ];
    let items = vec![
        ItemSpawn { kind: ItemKind::Health, x: 2.5, y: 8.5, respawn: 350 },
        ItemSpawn { kind: ItemKind::Health, x: 16.5, y: 2.5, respawn: 350 },
        ItemSpawn { kind: ItemKind::Ammo, x: 4.5, y: 3.5, respawn: 250 },
        ItemSpawn { kind: ItemKind::Ammo, x: 16.5, y: 11.5, respawn: 250 },
        ItemSpawn { kind: ItemKind::Ammo, x: 12.5, y: 12.5, respawn: 250 },
        ItemSpawn { kind: ItemKind::Weapon, x: 9.5, y: 8.5, respawn: 500 },
    ];
    let headings = [0.0, 180.0, 90.0, 0.0, 180.0, 0.0, 270.0, 180.0, 0.0, 270.0];
    MapSpec::from_grid("arena", &grid, &headings, items, 1).expect("builtin arena is valid")
}

/// Small symmetric cross, handy for focused tests.
pub fn cross() -> MapSpec {
    let grid = [
        "###########",
        "#####0#####",
        "#####.#####",
        "#####.#####",
        "#####.#####",
        "#1........#",
        "#####.#####",
        "#####.#####",
        "#####.#####",
        "#####2#####",
        "###########",
    ];
    let items = vec![ItemSpawn { kind: ItemKind::Health, x: 5.5, y: 5.5, respawn: 300 }];
    MapSpec::from_grid("cross", &grid, &[90.0, 0.0, 270.0], items, 2).expect("builtin cross")
}

/// Room field with pillars; denser item set for navigation training.
pub fn pillars() -> MapSpec {
    let grid = [
        "#################",
        "#0......#.....1.#",
        "#..##...#..##...#",
        "#..##......##...#",
        "#2..............#",
        "#.....##........#",
        "#.....##....##..#",
        "#...........##.3#",
        "#...####........#",
        "#...####....4...#",
        "#5..............#",
        "#......##.......#",
        "#..6...##.....7.#",
        "#################",
    ];
    let items = vec![
        ItemSpawn { kind: ItemKind::Health, x: 14.5, y: 2.5, respawn: 300 },
        ItemSpawn { kind: ItemKind::Health, x: 2.5, y: 11.5, respawn: 300 },
        ItemSpawn { kind: ItemKind::Ammo, x: 5.5, y: 1.5, respawn: 250 },
        ItemSpawn { kind: ItemKind::Ammo, x: 12.5, y: 10.5, respawn: 250 },
        ItemSpawn { kind: ItemKind::Ammo, x: 5.5, y: 7.5, respawn: 250 },
        ItemSpawn { kind: ItemKind::Weapon, x: 8.5, y: 7.5, respawn: 500 },
    ];
    let headings = [0.0, 180.0, 0.0, 180.0, 90.0, 0.0, 0.0, 180.0];
    MapSpec::from_grid("pillars", &grid, &headings, items, 3).expect("builtin pillars")
}
