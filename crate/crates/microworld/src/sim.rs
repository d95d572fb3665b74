//! Arena state and the tick loop: movement, hitscan and rocket combat,
//! blast damage with wall occlusion, lava, pickups and respawns.
//! Everything is driven by one ChaCha stream inside the state, so
//! (map, seed, action sequence) fully determines the event log.

use crate::action::Action;
use crate::error::SimError;
use crate::event::{ActorId, EventRecord, GameEvent};
use crate::map::{ItemKind, MapSpec};
use crate::render::{line_of_sight, Frame, Palette};
use crate::vec2::{angle_diff, Vec2};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

pub const TICKS_PER_SECOND: u64 = 35;
pub const RESPAWN_DELAY: u64 = 35;
pub const MOVE_SPEED: f32 = 0.12;
pub const STRAFE_SPEED: f32 = 0.10;
pub const TURN_SPEED_DEG: f32 = 4.0;
pub const ACTOR_RADIUS: f32 = 0.35;
pub const PISTOL_DAMAGE: i32 = 15;
pub const PISTOL_RANGE: f32 = 25.0;
pub const ROCKET_SPEED: f32 = 0.5;
pub const BLAST_RADIUS: f32 = 2.0;
pub const BLAST_MAX_DAMAGE: f32 = 150.0;
pub const FIRE_COOLDOWN: u32 = 20;
pub const START_AMMO: u32 = 15;
pub const MAX_AMMO: u32 = 60;
pub const AMMO_PICKUP: u32 = 10;
pub const WEAPON_PICKUP_AMMO: u32 = 5;
pub const HEALTH_PICKUP: i32 = 25;
pub const LAVA_DAMAGE: i32 = 2;
pub const PICKUP_RADIUS: f32 = 0.5;
pub const BOT_AIM_SIGMA_DEG: f32 = 6.0;
pub const BOT_SIGHT_RANGE: f32 = 14.0;
pub const BOT_FIRE_RANGE: f32 = 12.0;
pub const BOT_AIM_TOL_DEG: f32 = 5.0;
pub const BOT_RETREAT_HEALTH: i32 = 30;

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Weapon {
    Pistol,
    Launcher,
}

#[derive(Clone, Debug)]
pub struct Actor {
    pub pos: Vec2,
    pub heading: f32,
    pub health: i32,
    pub ammo: u32,
    pub weapon: Weapon,
    pub alive: bool,
    pub respawn_at: Option<u64>,
    pub kills: u32,
    pub deaths: u32,
    pub suicides: u32,
    /// Distance travelled this life, cells. Non-decreasing within a life.
    pub odometer: f32,
    pub cooldown: u32,
    pub aim_noise_deg: f32,
}

impl Actor {
    fn spawn(pos: Vec2, heading: f32, aim_noise_deg: f32) -> Self {
        Actor {
            pos,
            heading,
            health: 100,
            ammo: START_AMMO,
            weapon: Weapon::Pistol,
            alive: true,
            respawn_at: None,
            kills: 0,
            deaths: 0,
            suicides: 0,
            odometer: 0.0,
            cooldown: 0,
            aim_noise_deg,
        }
    }
}

#[derive(Clone, Debug)]
pub struct Projectile {
    pub pos: Vec2,
    pub vel: Vec2,
    pub owner: usize,
}

#[derive(Clone, Debug)]
pub struct ItemState {
    pub present: bool,
    pub respawn_at: u64,
}

#[derive(Clone, Debug)]
pub(crate) enum BotMind {
    Wander { target: Vec2, patience: u32 },
    Engage,
    Retreat,
}

#[derive(Clone)]
pub struct SimState {
    pub map: MapSpec,
    pub tick: u64,
    pub actors: Vec<Actor>,
    pub projectiles: Vec<Projectile>,
    pub items: Vec<ItemState>,
    pub palette: Palette,
    pub(crate) bot_minds: Vec<BotMind>,
    pub(crate) death_view: Vec<Option<Frame>>,
    rng: ChaCha8Rng,
}

/// Place the agent (actor 0) and `n_bots` bots on distinct spawn
/// points. Deterministic in (map, n_bots, seed).
pub fn reset(map: &MapSpec, n_bots: usize, seed: u64) -> Result<SimState, SimError> {
    map.validate()?;
    if n_bots + 1 > map.spawns.len() {
        return Err(SimError::Config(format!(
            "{} actors but map '{}' has {} spawn points",
            n_bots + 1,
            map.name,
            map.spawns.len()
        )));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed.wrapping_mul(0x2545f4914f6cdd1d).wrapping_add(1));
    let mut order: Vec<usize> = (0..map.spawns.len()).collect();
    for i in (1..order.len()).rev() {
        let j = rng.gen_range(0..=i);
        order.swap(i, j);
    }
    let mut actors = Vec::with_capacity(n_bots + 1);
    for (slot, &spawn_idx) in order.iter().take(n_bots + 1).enumerate() {
        let (pos, heading) = map.spawns[spawn_idx];
        let noise = if slot == 0 { 0.0 } else { BOT_AIM_SIGMA_DEG };
        actors.push(Actor::spawn(pos, heading, noise));
    }
    let items = map
        .items
        .iter()
        .map(|_| ItemState {
            present: true,
            respawn_at: 0,
        })
        .collect();
    let bot_minds = actors
        .iter()
        .map(|a| BotMind::Wander {
            target: a.pos,
            patience: 0,
        })
        .collect();
    let death_view = actors.iter().map(|_| None).collect();
    Ok(SimState {
        palette: Palette::from_seed(map.palette_seed),
        map: map.clone(),
        tick: 0,
        actors,
        projectiles: Vec::new(),
        items,
        bot_minds,
        death_view,
        rng,
    })
}

impl SimState {
    pub fn agent(&self) -> &Actor {
        &self.actors[0]
    }

    /// Scripting hooks for tests and probe-set generation.
    pub fn place_actor(&mut self, id: ActorId, pos: Vec2, heading: f32) {
        let a = &mut self.actors[id.0];
        a.pos = pos;
        a.heading = heading;
    }

    pub fn set_health(&mut self, id: ActorId, health: i32) {
        self.actors[id.0].health = health.clamp(1, 100);
    }

    pub fn set_ammo(&mut self, id: ActorId, ammo: u32) {
        self.actors[id.0].ammo = ammo.min(MAX_AMMO);
    }

    pub fn give_launcher(&mut self, id: ActorId) {
        self.actors[id.0].weapon = Weapon::Launcher;
    }

    pub fn set_item_present(&mut self, idx: usize, present: bool) {
        self.items[idx].present = present;
    }

    /// Advance the world by `ticks`, holding the agent's action for all
    /// of them (frame-skip semantics). Bots decide every tick. Returns
    /// the per-actor event log of the whole call.
    pub fn step(&mut self, agent_action: Option<Action>, ticks: u32) -> Vec<EventRecord> {
        let mut events = Vec::new();
        let mut moved = vec![0.0f32; self.actors.len()];
        for _ in 0..ticks {
            self.tick_once(agent_action, &mut events, &mut moved);
        }
        for (i, d) in moved.iter().enumerate() {
            if *d > 0.0 {
                events.push(EventRecord {
                    actor: ActorId(i),
                    event: GameEvent::Moved(*d),
                });
            }
        }
        events
    }

    fn tick_once(
        &mut self,
        agent_action: Option<Action>,
        events: &mut Vec<EventRecord>,
        moved: &mut [f32],
    ) {
        let n = self.actors.len();
        let mut rng = self.rng.clone();

        for a in self.actors.iter_mut() {
            if a.cooldown > 0 {
                a.cooldown -= 1;
            }
        }

        // decide
        let mut decisions: Vec<Option<Action>> = vec![None; n];
        if self.actors[0].alive {
            decisions[0] = agent_action;
        }
        for i in 1..n {
            if self.actors[i].alive {
                let (action, mind) = bot_decide(self, i, &mut rng);
                decisions[i] = Some(action);
                self.bot_minds[i] = mind;
            }
        }

        // move / turn
        let turn = TURN_SPEED_DEG.to_radians();
        for i in 0..n {
            let Some(action) = decisions[i] else { continue };
            let actor = &mut self.actors[i];
            let dir = Vec2::from_heading(actor.heading);
            let delta = match action {
                Action::TurnLeft => {
                    actor.heading = wrap_angle(actor.heading - turn);
                    continue;
                }
                Action::TurnRight => {
                    actor.heading = wrap_angle(actor.heading + turn);
                    continue;
                }
                Action::MoveForward => dir.scale(MOVE_SPEED),
                Action::MoveBackward => dir.scale(-MOVE_SPEED),
                Action::Strafe => dir.perp().scale(STRAFE_SPEED),
                Action::Attack => continue,
            };
            let before = actor.pos;
            let mut p = actor.pos;
            let nx = Vec2::new(p.x + delta.x, p.y);
            if !self.map.collides(nx, ACTOR_RADIUS) {
                p = nx;
            }
            let ny = Vec2::new(p.x, p.y + delta.y);
            if !self.map.collides(ny, ACTOR_RADIUS) {
                p = ny;
            }
            actor.pos = p;
            let d = p.dist(before);
            actor.odometer += d;
            moved[i] += d;
        }

        // fire
        for i in 0..n {
            if decisions[i] != Some(Action::Attack) {
                continue;
            }
            let (alive, cooldown, ammo) = {
                let a = &self.actors[i];
                (a.alive, a.cooldown, a.ammo)
            };
            if !alive || cooldown > 0 || ammo == 0 {
                continue;
            }
            let noise = gauss(&mut rng) * self.actors[i].aim_noise_deg.to_radians();
            let shot_heading = self.actors[i].heading + noise.clamp(-0.35, 0.35);
            {
                let a = &mut self.actors[i];
                a.ammo -= 1;
                a.cooldown = FIRE_COOLDOWN;
            }
            events.push(EventRecord {
                actor: ActorId(i),
                event: GameEvent::ShotFired,
            });
            let dir = Vec2::from_heading(shot_heading);
            match self.actors[i].weapon {
                Weapon::Pistol => self.hitscan(i, dir, events),
                Weapon::Launcher => {
                    // spawn just inside the shooter's radius so the
                    // start point can never be inside a wall
                    let start = self.actors[i].pos.add(dir.scale(ACTOR_RADIUS - 0.05));
                    self.projectiles.push(Projectile {
                        pos: start,
                        vel: dir.scale(ROCKET_SPEED),
                        owner: i,
                    });
                }
            }
        }

        // projectiles
        self.advance_projectiles(events);

        // lava
        for i in 0..n {
            if self.actors[i].alive && self.map.is_lava(self.actors[i].pos) {
                events.push(EventRecord {
                    actor: ActorId(i),
                    event: GameEvent::LavaTick,
                });
                self.apply_damage(i, LAVA_DAMAGE, i, events);
            }
        }

        // pickups
        for i in 0..n {
            if !self.actors[i].alive {
                continue;
            }
            for idx in 0..self.items.len() {
                if !self.items[idx].present {
                    continue;
                }
                let spawn = &self.map.items[idx];
                let ipos = Vec2::new(spawn.x, spawn.y);
                if self.actors[i].pos.dist(ipos) >= PICKUP_RADIUS {
                    continue;
                }
                let taken = match spawn.kind {
                    ItemKind::Health => {
                        let a = &mut self.actors[i];
                        if a.health >= 100 {
                            false
                        } else {
                            let gain = HEALTH_PICKUP.min(100 - a.health);
                            a.health += gain;
                            events.push(EventRecord {
                                actor: ActorId(i),
                                event: GameEvent::HealthDelta(gain),
                            });
                            true
                        }
                    }
                    ItemKind::Ammo => {
                        let a = &mut self.actors[i];
                        if a.ammo >= MAX_AMMO {
                            false
                        } else {
                            a.ammo = (a.ammo + AMMO_PICKUP).min(MAX_AMMO);
                            true
                        }
                    }
                    ItemKind::Weapon => {
                        let a = &mut self.actors[i];
                        if a.weapon == Weapon::Pistol {
                            a.weapon = Weapon::Launcher;
                        }
                        a.ammo = (a.ammo + WEAPON_PICKUP_AMMO).min(MAX_AMMO);
                        true
                    }
                };
                if taken {
                    self.items[idx].present = false;
                    self.items[idx].respawn_at = self.tick + spawn.respawn;
                    events.push(EventRecord {
                        actor: ActorId(i),
                        event: GameEvent::Pickup(spawn.kind),
                    });
                }
            }
        }

        // respawns
        for idx in 0..self.items.len() {
            if !self.items[idx].present && self.tick >= self.items[idx].respawn_at {
                self.items[idx].present = true;
            }
        }
        for i in 0..n {
            if self.actors[i].alive {
                continue;
            }
            if let Some(at) = self.actors[i].respawn_at {
                if self.tick >= at {
                    self.respawn_actor(i, &mut rng);
                }
            }
        }

        self.rng = rng;
        self.tick += 1;
    }

    fn respawn_actor(&mut self, i: usize, rng: &mut ChaCha8Rng) {
        let free: Vec<usize> = (0..self.map.spawns.len())
            .filter(|&s| {
                let (pos, _) = self.map.spawns[s];
                self.actors
                    .iter()
                    .enumerate()
                    .all(|(j, a)| j == i || !a.alive || a.pos.dist(pos) > 1.0)
            })
            .collect();
        let pick = if free.is_empty() {
            rng.gen_range(0..self.map.spawns.len())
        } else {
            free[rng.gen_range(0..free.len())]
        };
        let (pos, heading) = self.map.spawns[pick];
        let noise = self.actors[i].aim_noise_deg;
        let (kills, deaths, suicides) = {
            let a = &self.actors[i];
            (a.kills, a.deaths, a.suicides)
        };
        let mut fresh = Actor::spawn(pos, heading, noise);
        fresh.kills = kills;
        fresh.deaths = deaths;
        fresh.suicides = suicides;
        self.actors[i] = fresh;
        self.death_view[i] = None;
    }

    fn hitscan(&mut self, shooter: usize, dir: Vec2, events: &mut Vec<EventRecord>) {
        let origin = self.actors[shooter].pos;
        let wall = crate::render::wall_distance(&self.map, origin, dir);
        let mut best: Option<(usize, f32)> = None;
        for (j, other) in self.actors.iter().enumerate() {
            if j == shooter || !other.alive {
                continue;
            }
            let rel = other.pos.sub(origin);
            let along = rel.dot(dir);
            if along <= 0.0 || along > PISTOL_RANGE || along > wall {
                continue;
            }
            let perp2 = rel.dot(rel) - along * along;
            if perp2 < ACTOR_RADIUS * ACTOR_RADIUS && best.map_or(true, |(_, d)| along < d) {
                best = Some((j, along));
            }
        }
        if let Some((victim, _)) = best {
            self.apply_damage(victim, PISTOL_DAMAGE, shooter, events);
        }
    }

    fn advance_projectiles(&mut self, events: &mut Vec<EventRecord>) {
        let mut blasts: Vec<(Vec2, usize)> = Vec::new();
        let mut survivors = Vec::with_capacity(self.projectiles.len());
        let substeps = 3;
        for proj in self.projectiles.drain(..) {
            let mut p = proj.pos;
            let step = proj.vel.scale(1.0 / substeps as f32);
            let mut exploded = false;
            for _ in 0..substeps {
                let prev = p;
                p = p.add(step);
                if self.map.is_wall(p) {
                    // detonate at the last point in open space so the
                    // blast's occlusion test is meaningful
                    blasts.push((prev, proj.owner));
                    exploded = true;
                    break;
                }
                let hit = self
                    .actors
                    .iter()
                    .enumerate()
                    .any(|(j, a)| j != proj.owner && a.alive && a.pos.dist(p) < ACTOR_RADIUS);
                if hit {
                    blasts.push((p, proj.owner));
                    exploded = true;
                    break;
                }
            }
            if !exploded {
                survivors.push(Projectile { pos: p, ..proj });
            }
        }
        self.projectiles = survivors;

        for (center, owner) in blasts {
            for j in 0..self.actors.len() {
                if !self.actors[j].alive {
                    continue;
                }
                let d = self.actors[j].pos.dist(center);
                if d >= BLAST_RADIUS {
                    continue;
                }
                if !line_of_sight(&self.map, center, self.actors[j].pos) {
                    continue;
                }
                let damage = (BLAST_MAX_DAMAGE * (1.0 - d / BLAST_RADIUS)).round() as i32;
                if damage > 0 {
                    self.apply_damage(j, damage, owner, events);
                }
            }
        }
    }

    fn apply_damage(&mut self, victim: usize, amount: i32, attacker: usize, events: &mut Vec<EventRecord>) {
        if !self.actors[victim].alive {
            return;
        }
        events.push(EventRecord {
            actor: ActorId(victim),
            event: GameEvent::HealthDelta(-amount),
        });
        let health = {
            let a = &mut self.actors[victim];
            a.health -= amount;
            a.health
        };
        if health > 0 {
            return;
        }
        // death resolution: exactly one attributed cause
        {
            let a = &mut self.actors[victim];
            a.health = 0;
            a.alive = false;
            a.respawn_at = Some(self.tick + RESPAWN_DELAY);
            a.deaths += 1;
        }
        events.push(EventRecord {
            actor: ActorId(victim),
            event: GameEvent::Death,
        });
        if attacker == victim {
            self.actors[victim].suicides += 1;
            events.push(EventRecord {
                actor: ActorId(victim),
                event: GameEvent::Suicide,
            });
        } else {
            self.actors[attacker].kills += 1;
            events.push(EventRecord {
                actor: ActorId(attacker),
                event: GameEvent::Kill,
            });
        }
    }
}

fn wrap_angle(a: f32) -> f32 {
    let mut a = a;
    while a > std::f32::consts::PI {
        a -= std::f32::consts::TAU;
    }
    while a < -std::f32::consts::PI {
        a += std::f32::consts::TAU;
    }
    a
}

/// Approximate standard normal from twelve uniforms (Irwin-Hall).
fn gauss(rng: &mut ChaCha8Rng) -> f32 {
    let mut s = 0.0f32;
    for _ in 0..12 {
        s += rng.gen::<f32>();
    }
    s - 6.0
}

/// Scripted finite-state bot: retreat to health when hurt, engage
/// visible enemies, otherwise wander between random waypoints. Never
/// fires without a visible enemy.
pub fn bot_policy(state: &SimState, bot: ActorId, rng: &mut ChaCha8Rng) -> Action {
    bot_decide(state, bot.0, rng).0
}

pub(crate) fn bot_decide(state: &SimState, i: usize, rng: &mut ChaCha8Rng) -> (Action, BotMind) {
    let me = &state.actors[i];

    // retreat at low health toward the nearest available health pack
    if me.health < BOT_RETREAT_HEALTH {
        let target = state
            .items
            .iter()
            .enumerate()
            .filter(|(idx, s)| s.present && state.map.items[*idx].kind == ItemKind::Health)
            .map(|(idx, _)| Vec2::new(state.map.items[idx].x, state.map.items[idx].y))
            .min_by(|a, b| {
                me.pos
                    .dist(*a)
                    .partial_cmp(&me.pos.dist(*b))
                    .unwrap_or(std::cmp::Ordering::Equal)
            });
        if let Some(target) = target {
            return (steer_toward(state, me, target), BotMind::Retreat);
        }
    }

    // engage the nearest visible enemy
    let enemy = state
        .actors
        .iter()
        .enumerate()
        .filter(|(j, a)| *j != i && a.alive)
        .map(|(_, a)| (a.pos, me.pos.dist(a.pos)))
        .filter(|(pos, d)| *d <= BOT_SIGHT_RANGE && line_of_sight(&state.map, me.pos, *pos))
        .min_by(|a, b| a.1.partial_cmp(&b.1).unwrap_or(std::cmp::Ordering::Equal));
    if let Some((target, dist)) = enemy {
        let desired = target.sub(me.pos).angle();
        let diff = angle_diff(me.heading, desired);
        let action = if diff.abs() <= BOT_AIM_TOL_DEG.to_radians() {
            if dist <= BOT_FIRE_RANGE && me.cooldown == 0 && me.ammo > 0 {
                Action::Attack
            } else if dist > 4.0 {
                Action::MoveForward
            } else {
                Action::Strafe
            }
        } else if diff > 0.0 {
            Action::TurnRight
        } else {
            Action::TurnLeft
        };
        return (action, BotMind::Engage);
    }

    // wander
    let (target, patience) = match &state.bot_minds[i] {
        BotMind::Wander { target, patience } if *patience > 0 && me.pos.dist(*target) > 0.7 => {
            (*target, patience - 1)
        }
        _ => {
            let free = state.map.free_cells();
            let (cx, cy) = free[rng.gen_range(0..free.len())];
            (Vec2::new(cx as f32 + 0.5, cy as f32 + 0.5), 140)
        }
    };
    let action = steer_toward(state, me, target);
    // blocked straight ahead: drop the waypoint next tick
    let probe = me.pos.add(Vec2::from_heading(me.heading).scale(0.6));
    let patience = if action == Action::MoveForward && state.map.collides(probe, ACTOR_RADIUS * 0.8)
    {
        0
    } else {
        patience
    };
    (action, BotMind::Wander { target, patience })
}

fn steer_toward(state: &SimState, me: &Actor, target: Vec2) -> Action {
    let desired = target.sub(me.pos).angle();
    let diff = angle_diff(me.heading, desired);
    if diff.abs() < 30.0f32.to_radians() {
        let probe = me.pos.add(Vec2::from_heading(me.heading).scale(0.6));
        if state.map.collides(probe, ACTOR_RADIUS * 0.8) {
            if diff > 0.0 {
                Action::TurnRight
            } else {
                Action::TurnLeft
            }
        } else {
            Action::MoveForward
        }
    } else if diff > 0.0 {
        Action::TurnRight
    } else {
        Action::TurnLeft
    }
}
