//! Particle model of the virtual material: sensing, movement, growth and
//! shrinkage, driven by a randomly ordered scheduler.
//!
//! Headings are in degrees. Heading 0 points along +x and positive rotation
//! turns towards +y; the sensor at `+sensor_angle` is the "left" sensor.

use rand::seq::SliceRandom;
use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::encoding::StimulusPolyline;
use crate::error::{Error, Result};
use crate::lattice::{OccupancyGrid, TrailField, EMPTY};

pub type SimRng = ChaCha8Rng;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Particle {
    pub x: f64,
    pub y: f64,
    heading: f64,
    dir: (f64, f64),
    pub alive: bool,
    pub moved_last_step: bool,
}

impl Particle {
    pub fn new(x: f64, y: f64, heading: f64) -> Self {
        let mut p = Self {
            x,
            y,
            heading: 0.0,
            dir: (1.0, 0.0),
            alive: true,
            moved_last_step: false,
        };
        p.set_heading(heading);
        p
    }

    pub fn heading(&self) -> f64 {
        self.heading
    }

    pub fn set_heading(&mut self, degrees: f64) {
        let h = degrees.rem_euclid(360.0);
        // rem_euclid can round up to exactly 360 for tiny negative inputs.
        self.heading = if h >= 360.0 { 0.0 } else { h };
        let (s, c) = self.heading.to_radians().sin_cos();
        self.dir = (c, s);
    }

    /// Lattice cell holding the particle (x assumed already wrapped).
    pub fn cell(&self) -> (usize, usize) {
        (self.x.floor() as usize, self.y.floor() as usize)
    }
}

/// Whether a neighbourhood count includes the particle at the centre.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum NeighbourCount {
    IncludeSelf,
    ExcludeSelf,
}

#[derive(Debug, Clone, PartialEq)]
pub struct AgentParams {
    /// Sensor offset distance (px).
    pub sensor_offset: f64,
    /// Sensor angle (degrees).
    pub sensor_angle: f64,
    /// Rotation angle (degrees).
    pub rotation_angle: f64,
    pub deposit_amount: f64,
    /// Trail decay applied after each diffusion pass.
    pub decay_rate: f64,
    /// Division and survival are tested every this many steps.
    pub adapt_frequency: u64,
    pub counting: NeighbourCount,
    /// Half-width of the division window (4 → 9×9).
    pub division_radius: usize,
    pub division_range: (usize, usize),
    /// Half-width of the survival window (2 → 5×5).
    pub survival_radius: usize,
    pub survival_range: (usize, usize),
}

impl Default for AgentParams {
    fn default() -> Self {
        Self {
            sensor_offset: 5.0,
            sensor_angle: 90.0,
            rotation_angle: 45.0,
            deposit_amount: 5.0,
            decay_rate: 0.1,
            adapt_frequency: 2,
            counting: NeighbourCount::IncludeSelf,
            division_radius: 4,
            division_range: (1, 10),
            survival_radius: 2,
            survival_range: (0, 24),
        }
    }
}

/// Movement is one pixel per step.
pub const STEP_LENGTH: f64 = 1.0;

impl AgentParams {
    pub fn validate(&self) -> Result<()> {
        if !(self.sensor_offset >= 3.0) || !self.sensor_offset.is_finite() {
            return Err(Error::Parameter(format!(
                "sensor offset must be at least 3 px, got {}",
                self.sensor_offset
            )));
        }
        for (name, v) in [("sensor angle", self.sensor_angle), ("rotation angle", self.rotation_angle)] {
            if !v.is_finite() {
                return Err(Error::Parameter(format!("{name} must be finite, got {v}")));
            }
        }
        if !self.deposit_amount.is_finite() || self.deposit_amount < 0.0 {
            return Err(Error::Parameter(format!(
                "deposit amount must be finite and non-negative, got {}",
                self.deposit_amount
            )));
        }
        if !(0.0..1.0).contains(&self.decay_rate) {
            return Err(Error::Parameter(format!(
                "decay rate must lie in [0, 1), got {}",
                self.decay_rate
            )));
        }
        if self.adapt_frequency == 0 {
            return Err(Error::Parameter("adaptation frequency must be at least 1".into()));
        }
        Ok(())
    }

    fn counted(&self, raw: usize) -> usize {
        match self.counting {
            NeighbourCount::IncludeSelf => raw,
            NeighbourCount::ExcludeSelf => raw - 1,
        }
    }
}

/// Turn chosen by the sensory stage, before it is applied.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Turn {
    Keep,
    Left,
    Right,
}

/// Sensory decision table over the front, front-left and front-right
/// readings. `coin` picks the side when both side sensors beat the front one.
pub fn choose_turn(front: f64, left: f64, right: f64, coin: bool) -> Turn {
    if front > left && front > right {
        Turn::Keep
    } else if front < left && front < right {
        if coin {
            Turn::Left
        } else {
            Turn::Right
        }
    } else if left < right {
        Turn::Right
    } else if right < left {
        Turn::Left
    } else {
        Turn::Keep
    }
}

/// Per-step bookkeeping, mainly for invariant checks.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct StepStats {
    pub moves: usize,
    pub births: usize,
    pub deaths: usize,
}

/// Whether particles may change position this step.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum Motion {
    Free,
    Held,
}

/// Full agent-simulation state.
#[derive(Debug, Clone)]
pub struct WorldState {
    pub field: TrailField,
    pub occupancy: OccupancyGrid,
    particles: Vec<Particle>,
    pub step: u64,
    rng: SimRng,
    order: Vec<u32>,
    last_stats: StepStats,
}

impl WorldState {
    pub fn new(width: usize, height: usize, rng: SimRng) -> Result<Self> {
        Ok(Self {
            field: TrailField::new(width, height)?,
            occupancy: OccupancyGrid::new(width, height),
            particles: Vec::new(),
            step: 0,
            rng,
            order: Vec::new(),
            last_stats: StepStats::default(),
        })
    }

    pub fn from_seed(width: usize, height: usize, seed: u64) -> Result<Self> {
        Self::new(width, height, SimRng::seed_from_u64(seed))
    }

    pub fn width(&self) -> usize {
        self.field.width()
    }

    pub fn height(&self) -> usize {
        self.field.height()
    }

    pub fn particles(&self) -> &[Particle] {
        &self.particles
    }

    pub fn population(&self) -> usize {
        self.particles.len()
    }

    pub fn rng(&mut self) -> &mut SimRng {
        &mut self.rng
    }

    pub fn last_stats(&self) -> StepStats {
        self.last_stats
    }

    /// Adds a particle; fails if its cell is out of bounds or taken.
    pub fn add_particle(&mut self, mut p: Particle) -> Result<()> {
        if !p.x.is_finite() || !p.y.is_finite() {
            return Err(Error::Parameter("particle position must be finite".into()));
        }
        p.x = p.x.rem_euclid(self.width() as f64);
        if p.x >= self.width() as f64 {
            p.x = 0.0;
        }
        if p.y < 0.0 || p.y >= self.height() as f64 {
            return Err(Error::Parameter(format!("particle row {} outside the lattice", p.y)));
        }
        let (cx, cy) = p.cell();
        if !self.occupancy.is_free(cx, cy) {
            return Err(Error::Parameter(format!("cell ({cx}, {cy}) already occupied")));
        }
        let id = self.particles.len() as u32;
        p.alive = true;
        self.occupancy.set_raw(cx, cy, id);
        self.particles.push(p);
        Ok(())
    }

    pub fn add_particles(&mut self, ps: impl IntoIterator<Item = Particle>) -> Result<()> {
        for p in ps {
            self.add_particle(p)?;
        }
        Ok(())
    }

    /// Checks the one-per-cell bijection between particles and occupancy.
    pub fn check_occupancy(&self) -> Result<()> {
        if self.occupancy.occupied_count() != self.particles.len() {
            return Err(Error::Parameter(format!(
                "{} occupied cells for {} particles",
                self.occupancy.occupied_count(),
                self.particles.len()
            )));
        }
        for (i, p) in self.particles.iter().enumerate() {
            let (cx, cy) = p.cell();
            if !p.alive || self.occupancy.raw(cx, cy) != i as u32 {
                return Err(Error::Parameter(format!("particle {i} not registered at ({cx}, {cy})")));
            }
        }
        Ok(())
    }

    fn neighbours(&self, p: &Particle, radius: usize, params: &AgentParams) -> usize {
        let (cx, cy) = p.cell();
        params.counted(self.occupancy.count_window(cx, cy, radius))
    }

    /// New heading for particle `i` from its three sensors.
    pub fn sensory_stage(&mut self, i: usize, params: &AgentParams) -> f64 {
        let p = &self.particles[i];
        let (dx, dy) = p.dir;
        let so = params.sensor_offset;
        let (sa_sin, sa_cos) = params.sensor_angle.to_radians().sin_cos();
        let front = self.field.sample(p.x + so * dx, p.y + so * dy);
        // Rotate the unit heading by ±sensor_angle.
        let (lx, ly) = (dx * sa_cos - dy * sa_sin, dx * sa_sin + dy * sa_cos);
        let (rx, ry) = (dx * sa_cos + dy * sa_sin, -dx * sa_sin + dy * sa_cos);
        let left = self.field.sample(p.x + so * lx, p.y + so * ly);
        let right = self.field.sample(p.x + so * rx, p.y + so * ry);
        let coin = if front < left && front < right { self.rng.gen::<bool>() } else { false };
        let heading = p.heading;
        match choose_turn(front, left, right, coin) {
            Turn::Keep => heading,
            Turn::Left => {
                self.particles[i].set_heading(heading + params.rotation_angle);
                self.particles[i].heading
            }
            Turn::Right => {
                self.particles[i].set_heading(heading - params.rotation_angle);
                self.particles[i].heading
            }
        }
    }

    /// Attempts a one-pixel move for particle `i`. Returns whether it moved.
    pub fn motor_stage(&mut self, i: usize, params: &AgentParams) -> bool {
        self.motor(i, params, Motion::Free)
    }

    fn motor(&mut self, i: usize, params: &AgentParams, motion: Motion) -> bool {
        let w = self.width();
        let h = self.height() as f64;
        let p = self.particles[i];
        let nx = p.x + STEP_LENGTH * p.dir.0;
        let ny = p.y + STEP_LENGTH * p.dir.1;
        let mut blocked = !(0.0..h).contains(&ny);
        let (ox, oy) = p.cell();
        let (mut tx, mut ty) = (ox, oy);
        let mut wx = nx;
        if !blocked {
            wx = nx.rem_euclid(w as f64);
            if wx >= w as f64 {
                wx = 0.0;
            }
            tx = wx.floor() as usize;
            ty = ny.floor() as usize;
            let occupant = self.occupancy.raw(tx, ty);
            blocked = occupant != EMPTY && occupant != i as u32;
        }
        if blocked {
            let heading = self.rng.gen_range(0.0..360.0);
            let q = &mut self.particles[i];
            q.set_heading(heading);
            q.moved_last_step = false;
            return false;
        }
        match motion {
            Motion::Free => {
                if (tx, ty) != (ox, oy) {
                    self.occupancy.set_raw(ox, oy, EMPTY);
                    self.occupancy.set_raw(tx, ty, i as u32);
                }
                let q = &mut self.particles[i];
                q.x = wx;
                q.y = ny;
                self.field.deposit_at(tx, ty, params.deposit_amount);
            }
            Motion::Held => {
                self.field.deposit_at(ox, oy, params.deposit_amount);
            }
        }
        self.particles[i].moved_last_step = true;
        true
    }

    /// Division test for particle `i`. Returns the number of particles spawned.
    pub fn try_divide(&mut self, i: usize, params: &AgentParams) -> usize {
        let p = self.particles[i];
        if !p.alive || !p.moved_last_step {
            return 0;
        }
        let n = self.neighbours(&p, params.division_radius, params);
        if n < params.division_range.0 || n > params.division_range.1 {
            return 0;
        }
        let (cx, cy) = p.cell();
        let (w, h) = (self.width() as i64, self.height() as i64);
        let mut free = [(0i64, 0i64); 8];
        let mut k = 0;
        for dy in -1i64..=1 {
            for dx in -1i64..=1 {
                if dx == 0 && dy == 0 {
                    continue;
                }
                let y = cy as i64 + dy;
                if y < 0 || y >= h {
                    continue;
                }
                let x = (cx as i64 + dx).rem_euclid(w);
                if self.occupancy.is_free(x as usize, y as usize) {
                    free[k] = (dx, dy);
                    k += 1;
                }
            }
        }
        if k == 0 {
            return 0;
        }
        let (dx, dy) = free[self.rng.gen_range(0..k)];
        let heading = self.rng.gen_range(0.0..360.0);
        // Child keeps the parent's sub-cell offset in the neighbouring cell.
        let mut x = (p.x + dx as f64).rem_euclid(w as f64);
        if x >= w as f64 {
            x = 0.0;
        }
        let child = Particle::new(x, p.y + dy as f64, heading);
        let (nx, ny) = child.cell();
        let id = self.particles.len() as u32;
        self.occupancy.set_raw(nx, ny, id);
        self.particles.push(child);
        1
    }

    /// Survival test for particle `i`; a failing particle is marked dead and
    /// its cell freed. Call [`WorldState::compact`] afterwards.
    pub fn apply_survival(&mut self, i: usize, params: &AgentParams) -> bool {
        let p = self.particles[i];
        if !p.alive {
            return false;
        }
        let n = self.neighbours(&p, params.survival_radius, params);
        if n >= params.survival_range.0 && n <= params.survival_range.1 {
            return true;
        }
        let (cx, cy) = p.cell();
        self.occupancy.set_raw(cx, cy, EMPTY);
        self.particles[i].alive = false;
        false
    }

    /// Drops dead particles and re-registers the survivors' indices.
    pub fn compact(&mut self) {
        if self.particles.iter().all(|p| p.alive) {
            return;
        }
        self.particles.retain(|p| p.alive);
        for (i, p) in self.particles.iter().enumerate() {
            let (cx, cy) = p.cell();
            self.occupancy.set_raw(cx, cy, i as u32);
        }
    }

    fn shuffled_order(&mut self) {
        self.order.clear();
        self.order.extend(0..self.particles.len() as u32);
        self.order.shuffle(&mut self.rng);
    }

    fn adapt(&mut self, params: &AgentParams) -> (usize, usize) {
        self.shuffled_order();
        let order = std::mem::take(&mut self.order);
        let (mut births, mut deaths) = (0, 0);
        for &i in &order {
            let i = i as usize;
            if !self.particles[i].alive {
                continue;
            }
            births += self.try_divide(i, params);
            if !self.apply_survival(i, params) {
                deaths += 1;
            }
        }
        self.order = order;
        self.compact();
        (births, deaths)
    }

    fn advance(&mut self, params: &AgentParams, motion: Motion) {
        self.shuffled_order();
        let order = std::mem::take(&mut self.order);
        let mut moves = 0;
        for &i in &order {
            let i = i as usize;
            self.sensory_stage(i, params);
            if self.motor(i, params, motion) {
                moves += 1;
            }
        }
        self.order = order;
        let (births, deaths) = if self.step % params.adapt_frequency == 0 {
            self.adapt(params)
        } else {
            (0, 0)
        };
        self.field.diffuse_unchecked(params.decay_rate);
        self.step += 1;
        self.last_stats = StepStats { moves, births, deaths };
    }

    /// One scheduler step with free movement.
    pub fn scheduler_step(&mut self, params: &AgentParams) {
        self.advance(params, Motion::Free);
    }

    /// One hold step: the band stimulus is projected, particles sense and
    /// deposit but keep their positions, and growth and shrinkage still run.
    pub fn hold_step(&mut self, band: &StimulusPolyline, amount: f64, params: &AgentParams) -> Result<()> {
        self.field.project_stimulus(band, amount)?;
        self.advance(params, Motion::Held);
        Ok(())
    }

    /// Runs `steps` hold steps.
    pub fn run_hold_phase(
        &mut self,
        band: &StimulusPolyline,
        amount: f64,
        steps: u64,
        params: &AgentParams,
    ) -> Result<()> {
        for _ in 0..steps {
            self.hold_step(band, amount, params)?;
        }
        Ok(())
    }
}
