//! Single-intersection traffic simulator.
//!
//! Four approaches (East, West, North, South) with three dedicated lanes each
//! (left, through, right). Each lane is 400 m long and discretised into 80
//! cells of 5 m. Vehicles advance up to three cells per second, limited by the
//! vehicle ahead and by the stop line; the front vehicle of a lane with a green
//! movement discharges with a 2 s headway. Right turns run with their
//! approach's through phase.
//!
//! All randomness comes from two injected streams: one for arrivals and one
//! for the detection (equipage) flag. The second stream never influences the
//! traffic itself, so detection-type corruption cannot change the trajectory.

mod fixed;

pub use fixed::{optimize_fixed_plan, run_fixed_timing, FixedPlan, FixedPlanSearch};

use std::collections::VecDeque;
use std::fmt;
use std::io::Write;

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::rng::{self, Stream};

pub const APPROACHES: usize = 4;
pub const LANES: usize = 12;
pub const CELLS_PER_LANE: usize = 80;
pub const CELL_M: f64 = 5.0;
pub const LANE_M: f64 = 400.0;
pub const OCCUPANCY_DIM: usize = LANES * CELLS_PER_LANE;
pub const OBS_DIM: usize = OCCUPANCY_DIM + 4 + 1;
/// Seconds per agent decision.
pub const DECISION_SECONDS: usize = 6;
/// Maximum speed in cells per second (15 m/s).
pub const V_MAX_CELLS: u16 = 3;
pub const DISCHARGE_HEADWAY_S: usize = 2;
/// A vehicle is queued when its speed is below this threshold (m/s).
pub const STOP_SPEED_MPS: f64 = 0.3;
/// Queue length at which the step reward crosses zero.
pub const REWARD_CENTER: f64 = 80.0;

const STOP_CELL: u16 = (CELLS_PER_LANE - 1) as u16;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Movement {
    Left,
    Through,
    Right,
}

impl Movement {
    pub const ALL: [Movement; 3] = [Movement::Left, Movement::Through, Movement::Right];

    pub fn lane_offset(self) -> usize {
        self as usize
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Approach {
    East,
    West,
    North,
    South,
}

impl Approach {
    pub const ALL: [Approach; 4] = [Approach::East, Approach::West, Approach::North, Approach::South];

    pub fn is_east_west(self) -> bool {
        matches!(self, Approach::East | Approach::West)
    }
}

/// Lane index for an approach and movement.
pub fn lane_id(approach: Approach, movement: Movement) -> usize {
    approach as usize * 3 + movement.lane_offset()
}

pub fn lane_approach(lane: usize) -> Approach {
    Approach::ALL[lane / 3]
}

pub fn lane_movement(lane: usize) -> Movement {
    Movement::ALL[lane % 3]
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum PhaseAction {
    #[serde(rename = "ew_left")]
    EwLeft,
    #[serde(rename = "ew_through")]
    EwThrough,
    #[serde(rename = "ns_left")]
    NsLeft,
    #[serde(rename = "ns_through")]
    NsThrough,
}

impl PhaseAction {
    pub const ALL: [PhaseAction; 4] =
        [PhaseAction::EwLeft, PhaseAction::EwThrough, PhaseAction::NsLeft, PhaseAction::NsThrough];
    pub const COUNT: usize = 4;

    pub fn index(self) -> usize {
        self as usize
    }

    pub fn from_index(i: usize) -> Option<Self> {
        Self::ALL.get(i).copied()
    }

    /// Whether vehicles in `lane` may discharge under this phase.
    pub fn serves(self, lane: usize) -> bool {
        let ew = lane_approach(lane).is_east_west();
        let left = lane_movement(lane) == Movement::Left;
        match self {
            PhaseAction::EwLeft => ew && left,
            PhaseAction::EwThrough => ew && !left,
            PhaseAction::NsLeft => !ew && left,
            PhaseAction::NsThrough => !ew && !left,
        }
    }
}

impl fmt::Display for PhaseAction {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let s = match self {
            PhaseAction::EwLeft => "ew_left",
            PhaseAction::EwThrough => "ew_through",
            PhaseAction::NsLeft => "ns_left",
            PhaseAction::NsThrough => "ns_through",
        };
        f.write_str(s)
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct Vehicle {
    pub id: u64,
    pub lane: usize,
    /// Cell counted from the lane entry; the stop-line cell is 79.
    pub cell: u16,
    /// Cells travelled during the last simulated second.
    pub speed_cells: u16,
    pub movement: Movement,
    /// Detectable by roadside sensing.
    pub equipped: bool,
}

impl Vehicle {
    /// Distance from the lane entry in meters.
    pub fn position_m(&self) -> f64 {
        self.cell as f64 * CELL_M
    }

    pub fn speed_mps(&self) -> f64 {
        self.speed_cells as f64 * CELL_M
    }

    pub fn is_stopped(&self) -> bool {
        self.speed_mps() < STOP_SPEED_MPS
    }

    /// Observation cell index (0 adjacent to the stop line).
    pub fn obs_cell(&self) -> usize {
        (STOP_CELL - self.cell) as usize
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DemandProfile {
    /// Peak arrival probability per second per lane.
    pub peak_rate: f64,
    /// Left : through : right weights.
    pub turn_split: [f64; 3],
    /// Episode length in seconds.
    pub horizon: usize,
}

impl Default for DemandProfile {
    fn default() -> Self {
        Self { peak_rate: DEFAULT_PEAK_RATE, turn_split: [1.0, 3.0, 2.0], horizon: 3600 }
    }
}

/// Default peak arrival rate, calibrated so the optimized fixed-timing plan
/// sees a mean queue of 60 to 100 vehicles.
pub const DEFAULT_PEAK_RATE: f64 = 0.155;

impl DemandProfile {
    pub fn validate(&self) -> Result<()> {
        if !(self.peak_rate >= 0.0) || self.turn_split.iter().any(|w| !(*w >= 0.0)) {
            return Err(Error::InvalidParameter("demand rates must be non-negative".into()));
        }
        if self.turn_split.iter().sum::<f64>() <= 0.0 {
            return Err(Error::InvalidParameter("turn split must have positive mass".into()));
        }
        if self.horizon == 0 || self.horizon % DECISION_SECONDS != 0 {
            return Err(Error::InvalidParameter(format!("horizon must be a positive multiple of {DECISION_SECONDS}")));
        }
        Ok(())
    }

    /// Arrival probability per lane slot at second `t` for an approach.
    pub fn rate(&self, t: usize, approach: Approach) -> f64 {
        let phase = std::f64::consts::PI * t as f64 / (2.0 * self.horizon as f64);
        let m = if approach.is_east_west() { phase.sin() } else { phase.cos() };
        (self.peak_rate * m).clamp(0.0, 1.0)
    }

    fn sample_movement(&self, rng: &mut Stream) -> Movement {
        let total: f64 = self.turn_split.iter().sum();
        let mut u = rng.random::<f64>() * total;
        for (m, w) in Movement::ALL.iter().zip(self.turn_split) {
            if u < w {
                return *m;
            }
            u -= w;
        }
        Movement::Right
    }
}

/// Detection model: each spawned vehicle is equipped with probability `detect_prob`.
#[derive(Clone, Debug)]
pub struct Equipage {
    pub detect_prob: f64,
    rng: Stream,
}

impl Equipage {
    pub fn new(detect_prob: f64, seed: u64) -> Self {
        Self { detect_prob: detect_prob.clamp(0.0, 1.0), rng: rng::stream(seed, "equipage") }
    }

    pub fn all_detected() -> Self {
        Self::new(1.0, 0)
    }

    pub fn draw(&mut self) -> bool {
        // One draw per vehicle regardless of probability keeps the stream aligned.
        let u = self.rng.random::<f64>();
        u < self.detect_prob
    }
}

/// Draws arrivals for second `t`: one Bernoulli trial per lane slot of each
/// approach; the movement of a new vehicle is drawn from the turn split and
/// selects the lane it enters. Returned vehicles are not yet placed.
pub fn spawn_arrivals(t: usize, demand: &DemandProfile, rng: &mut Stream, equipage: &mut Equipage) -> Vec<Vehicle> {
    let mut out = Vec::new();
    for approach in Approach::ALL {
        let rate = demand.rate(t, approach);
        for _slot in 0..3 {
            if rng.random::<f64>() < rate {
                let movement = demand.sample_movement(rng);
                out.push(Vehicle {
                    id: 0,
                    lane: lane_id(approach, movement),
                    cell: 0,
                    speed_cells: V_MAX_CELLS,
                    movement,
                    equipped: equipage.draw(),
                });
            }
        }
    }
    out
}

pub fn step_reward(queue: usize) -> f64 {
    -(queue as f64 - REWARD_CENTER) / REWARD_CENTER
}

/// 960 occupancy bits, lane-major, cell 0 of each lane adjacent to the stop line.
#[derive(Clone, Copy, PartialEq, Eq, Hash, Default)]
pub struct Occupancy([u64; 15]);

impl fmt::Debug for Occupancy {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "Occupancy({} occupied)", self.count())
    }
}

impl Occupancy {
    pub fn get(&self, idx: usize) -> bool {
        self.0[idx / 64] >> (idx % 64) & 1 == 1
    }

    pub fn set(&mut self, idx: usize, value: bool) {
        let bit = 1u64 << (idx % 64);
        if value {
            self.0[idx / 64] |= bit;
        } else {
            self.0[idx / 64] &= !bit;
        }
    }

    pub fn get_cell(&self, lane: usize, cell: usize) -> bool {
        self.get(lane * CELLS_PER_LANE + cell)
    }

    pub fn set_cell(&mut self, lane: usize, cell: usize, value: bool) {
        self.set(lane * CELLS_PER_LANE + cell, value)
    }

    pub fn count(&self) -> usize {
        self.0.iter().map(|w| w.count_ones() as usize).sum()
    }

    pub fn iter_ones(&self) -> impl Iterator<Item = usize> + '_ {
        self.0.iter().enumerate().flat_map(|(wi, &w)| {
            let mut bits = w;
            std::iter::from_fn(move || {
                if bits == 0 {
                    return None;
                }
                let tz = bits.trailing_zeros() as usize;
                bits &= bits - 1;
                Some(wi * 64 + tz)
            })
        })
    }

    pub fn hamming(&self, other: &Occupancy) -> usize {
        self.0.iter().zip(other.0.iter()).map(|(a, b)| (a ^ b).count_ones() as usize).sum()
    }

    pub fn lane(&self, lane: usize) -> Vec<u8> {
        (0..CELLS_PER_LANE).map(|c| self.get_cell(lane, c) as u8).collect()
    }

    pub fn from_bits(bits: &[u8]) -> Result<Self> {
        if bits.len() != OCCUPANCY_DIM {
            return Err(Error::DimensionMismatch { expected: OCCUPANCY_DIM, got: bits.len() });
        }
        let mut occ = Occupancy::default();
        for (i, &b) in bits.iter().enumerate() {
            occ.set(i, b != 0);
        }
        Ok(occ)
    }
}

/// The agent input: 960 occupancy cells, a phase one-hot and the normalised
/// phase duration.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Observation {
    pub occupancy: Occupancy,
    pub phase: PhaseAction,
    /// Seconds in the current phase divided by 60, clipped to [0, 2].
    pub phase_duration: f32,
}

impl Observation {
    pub fn new(occupancy: Occupancy, phase: PhaseAction, phase_seconds: usize) -> Self {
        Self { occupancy, phase, phase_duration: normalize_duration(phase_seconds) }
    }

    pub fn to_vec(&self) -> Vec<f32> {
        let mut v = vec![0.0f32; OBS_DIM];
        for i in self.occupancy.iter_ones() {
            v[i] = 1.0;
        }
        v[OCCUPANCY_DIM + self.phase.index()] = 1.0;
        v[OBS_DIM - 1] = self.phase_duration;
        v
    }

    /// Non-zero entries as `(index, value)` pairs in increasing index order.
    pub fn sparse(&self) -> Vec<(u32, f32)> {
        let mut out: Vec<(u32, f32)> = self.occupancy.iter_ones().map(|i| (i as u32, 1.0)).collect();
        out.push(((OCCUPANCY_DIM + self.phase.index()) as u32, 1.0));
        if self.phase_duration != 0.0 {
            out.push(((OBS_DIM - 1) as u32, self.phase_duration));
        }
        out
    }

    pub fn from_slice(v: &[f32]) -> Result<Self> {
        if v.len() != OBS_DIM {
            return Err(Error::DimensionMismatch { expected: OBS_DIM, got: v.len() });
        }
        let mut occ = Occupancy::default();
        for (i, &x) in v[..OCCUPANCY_DIM].iter().enumerate() {
            occ.set(i, x != 0.0);
        }
        let hot: Vec<usize> = (0..4).filter(|&i| v[OCCUPANCY_DIM + i] != 0.0).collect();
        if hot.len() != 1 {
            return Err(Error::InvalidParameter("phase one-hot must have exactly one entry".into()));
        }
        Ok(Self { occupancy: occ, phase: PhaseAction::ALL[hot[0]], phase_duration: v[OBS_DIM - 1].clamp(0.0, 2.0) })
    }
}

pub fn normalize_duration(seconds: usize) -> f32 {
    (seconds as f32 / 60.0).clamp(0.0, 2.0)
}

#[derive(Clone, Debug, Default)]
struct Lane {
    /// Front (closest to the stop line) first.
    vehicles: VecDeque<Vehicle>,
    last_departure: Option<usize>,
}

/// Outcome of one decision (six simulated seconds).
#[derive(Clone, Debug, PartialEq)]
pub struct DecisionOutcome {
    /// Summed per-second rewards.
    pub reward: f64,
    pub queues: [usize; DECISION_SECONDS],
    pub done: bool,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EpisodeResult {
    pub returns_per_decision: Vec<f64>,
    pub episode_return: f64,
    /// Queue count after every simulated second.
    pub queue_trajectory: Vec<u32>,
    /// Active phase during every simulated second.
    pub phase_trajectory: Vec<PhaseAction>,
    pub decision_count: usize,
}

impl EpisodeResult {
    pub fn mean_queue(&self) -> f64 {
        if self.queue_trajectory.is_empty() {
            return 0.0;
        }
        self.queue_trajectory.iter().map(|&q| q as f64).sum::<f64>() / self.queue_trajectory.len() as f64
    }

    /// Writes `step,t,queue,reward,phase`, one row per simulated second.
    pub fn write_trace_csv<W: Write>(&self, mut w: W) -> std::io::Result<()> {
        writeln!(w, "step,t,queue,reward,phase")?;
        for (t, (&q, phase)) in self.queue_trajectory.iter().zip(&self.phase_trajectory).enumerate() {
            writeln!(w, "{},{},{},{},{}", t / DECISION_SECONDS, t, q, step_reward(q as usize), phase)?;
        }
        Ok(())
    }
}

/// Accumulates per-decision outcomes into an [`EpisodeResult`].
#[derive(Clone, Debug, Default)]
pub struct EpisodeRecorder {
    returns: Vec<f64>,
    queues: Vec<u32>,
    phases: Vec<PhaseAction>,
}

impl EpisodeRecorder {
    pub fn record(&mut self, phase: PhaseAction, outcome: &DecisionOutcome) {
        self.returns.push(outcome.reward);
        self.queues.extend(outcome.queues.iter().map(|&q| q as u32));
        self.phases.extend(std::iter::repeat_n(phase, DECISION_SECONDS));
    }

    pub fn finish(self) -> EpisodeResult {
        let episode_return = self.queues.iter().map(|&q| step_reward(q as usize)).sum();
        EpisodeResult {
            decision_count: self.returns.len(),
            returns_per_decision: self.returns,
            episode_return,
            queue_trajectory: self.queues,
            phase_trajectory: self.phases,
        }
    }
}

/// Counters for vehicle conservation checks.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub struct Counters {
    pub spawned: u64,
    pub departed: u64,
    pub dropped: u64,
}

#[derive(Clone, Debug)]
pub struct Intersection {
    demand: DemandProfile,
    lanes: Vec<Lane>,
    t: usize,
    phase: PhaseAction,
    phase_elapsed: usize,
    arrivals: Stream,
    equipage: Equipage,
    counters: Counters,
    next_id: u64,
    last_queue: usize,
}

impl Intersection {
    /// A fresh episode with arrivals drawn from `seed`; every vehicle detectable.
    pub fn new(demand: DemandProfile, seed: u64) -> Result<Self> {
        Self::with_equipage(demand, seed, Equipage::all_detected())
    }

    pub fn with_equipage(demand: DemandProfile, seed: u64, equipage: Equipage) -> Result<Self> {
        demand.validate()?;
        Ok(Self {
            demand,
            lanes: vec![Lane::default(); LANES],
            t: 0,
            phase: PhaseAction::EwLeft,
            phase_elapsed: 0,
            arrivals: rng::stream(seed, "arrivals"),
            equipage,
            counters: Counters::default(),
            next_id: 0,
            last_queue: 0,
        })
    }

    pub fn demand(&self) -> &DemandProfile {
        &self.demand
    }

    pub fn time(&self) -> usize {
        self.t
    }

    pub fn phase(&self) -> PhaseAction {
        self.phase
    }

    pub fn phase_elapsed(&self) -> usize {
        self.phase_elapsed
    }

    pub fn is_done(&self) -> bool {
        self.t >= self.demand.horizon
    }

    pub fn counters(&self) -> Counters {
        self.counters
    }

    pub fn vehicle_count(&self) -> usize {
        self.lanes.iter().map(|l| l.vehicles.len()).sum()
    }

    pub fn vehicles(&self) -> impl Iterator<Item = &Vehicle> {
        self.lanes.iter().flat_map(|l| l.vehicles.iter())
    }

    pub fn count_queued(&self) -> usize {
        self.vehicles().filter(|v| v.is_stopped()).count()
    }

    /// Queue measured after the last simulated second.
    pub fn last_queue(&self) -> usize {
        self.last_queue
    }

    /// Inserts a vehicle (scenario construction). Fails if the cell is taken.
    pub fn place_vehicle(&mut self, lane: usize, cell: u16, speed_cells: u16, equipped: bool) -> Result<()> {
        if lane >= LANES || cell > STOP_CELL {
            return Err(Error::InvalidParameter(format!("no cell {cell} on lane {lane}")));
        }
        let vehicles = &mut self.lanes[lane].vehicles;
        if vehicles.iter().any(|v| v.cell == cell) {
            return Err(Error::InvalidParameter(format!("cell {cell} on lane {lane} occupied")));
        }
        let pos = vehicles.iter().position(|v| v.cell < cell).unwrap_or(vehicles.len());
        vehicles.insert(
            pos,
            Vehicle { id: self.next_id, lane, cell, speed_cells, movement: lane_movement(lane), equipped },
        );
        self.next_id += 1;
        self.counters.spawned += 1;
        Ok(())
    }

    pub fn set_phase(&mut self, phase: PhaseAction) {
        if phase != self.phase {
            self.phase = phase;
            self.phase_elapsed = 0;
        }
    }

    /// Advances one second: discharge, movement, arrivals. Returns the queue.
    pub fn advance_one_second(&mut self) -> usize {
        let t = self.t;
        let phase = self.phase;
        for (lane_idx, lane) in self.lanes.iter_mut().enumerate() {
            let green = phase.serves(lane_idx);
            let headway_ok = lane.last_departure.is_none_or(|d| t - d >= DISCHARGE_HEADWAY_S);
            if green && headway_ok && lane.vehicles.front().is_some_and(|v| v.cell == STOP_CELL) {
                lane.vehicles.pop_front();
                lane.last_departure = Some(t);
                self.counters.departed += 1;
            }
            let mut limit = STOP_CELL;
            for v in lane.vehicles.iter_mut() {
                let target = (v.cell + V_MAX_CELLS).min(limit);
                v.speed_cells = target - v.cell;
                v.cell = target;
                limit = target.saturating_sub(1);
            }
        }
        let queue = self.count_queued();

        for mut v in spawn_arrivals(t, &self.demand, &mut self.arrivals, &mut self.equipage) {
            let lane = &mut self.lanes[v.lane];
            if lane.vehicles.back().is_some_and(|b| b.cell == 0) {
                self.counters.dropped += 1;
                continue;
            }
            v.id = self.next_id;
            self.next_id += 1;
            lane.vehicles.push_back(v);
            self.counters.spawned += 1;
        }

        self.t += 1;
        self.phase_elapsed += 1;
        self.last_queue = queue;
        queue
    }

    /// Applies `action` for six seconds.
    pub fn decision_step(&mut self, action: PhaseAction) -> Result<DecisionOutcome> {
        if self.is_done() {
            return Err(Error::EpisodeFinished);
        }
        self.set_phase(action);
        let mut queues = [0usize; DECISION_SECONDS];
        let mut reward = 0.0;
        for q in queues.iter_mut() {
            *q = self.advance_one_second();
            reward += step_reward(*q);
        }
        Ok(DecisionOutcome { reward, queues, done: self.is_done() })
    }

    fn occupancy_where(&self, keep: impl Fn(&Vehicle) -> bool) -> Occupancy {
        let mut occ = Occupancy::default();
        for (lane_idx, lane) in self.lanes.iter().enumerate() {
            for v in lane.vehicles.iter().filter(|v| keep(v)) {
                occ.set_cell(lane_idx, v.obs_cell(), true);
            }
        }
        occ
    }

    /// Ground-truth observation.
    pub fn observe(&self) -> Observation {
        Observation::new(self.occupancy_where(|_| true), self.phase, self.phase_elapsed)
    }

    /// Observation built from equipped vehicles only.
    pub fn observe_detected(&self) -> Observation {
        Observation::new(self.occupancy_where(|v| v.equipped), self.phase, self.phase_elapsed)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn zero_demand() -> DemandProfile {
        DemandProfile { peak_rate: 0.0, ..DemandProfile::default() }
    }

    #[test]
    fn reward_centering() {
        assert_eq!(step_reward(80), 0.0);
        assert_eq!(step_reward(0), 1.0);
        assert_eq!(step_reward(160), -1.0);
    }

    #[test]
    fn modulation_endpoints() {
        let d = DemandProfile::default();
        assert_eq!(d.rate(0, Approach::East), 0.0);
        assert!((d.rate(0, Approach::North) - d.peak_rate).abs() < 1e-12);
        assert!((d.rate(d.horizon, Approach::West) - d.peak_rate).abs() < 1e-12);
        assert!(d.rate(d.horizon, Approach::South).abs() < 1e-12);
    }

    #[test]
    fn empty_intersection_only_advances_time() {
        let mut env = Intersection::new(zero_demand(), 1).unwrap();
        for _ in 0..10 {
            assert_eq!(env.advance_one_second(), 0);
        }
        assert_eq!(env.time(), 10);
        assert_eq!(env.vehicle_count(), 0);
        assert_eq!(env.count_queued(), 0);
    }

    #[test]
    fn empty_decision_reward_is_six() {
        let mut env = Intersection::new(zero_demand(), 1).unwrap();
        let out = env.decision_step(PhaseAction::NsThrough).unwrap();
        assert_eq!(out.reward, 6.0);
    }

    #[test]
    fn vehicle_at_385m_departs_one_second_after_reaching_stop_line() {
        let mut env = Intersection::new(zero_demand(), 1).unwrap();
        let lane = lane_id(Approach::East, Movement::Through);
        env.place_vehicle(lane, 77, V_MAX_CELLS, true).unwrap();
        assert_eq!(env.vehicles().next().unwrap().position_m(), 385.0);
        env.set_phase(PhaseAction::EwThrough);
        env.advance_one_second();
        assert_eq!(env.vehicles().next().unwrap().cell, STOP_CELL);
        env.advance_one_second();
        assert_eq!(env.vehicle_count(), 0);
        assert_eq!(env.counters().departed, 1);
    }

    #[test]
    fn ten_queued_vehicles_discharge_in_twenty_seconds() {
        let mut env = Intersection::new(zero_demand(), 1).unwrap();
        let lane = lane_id(Approach::North, Movement::Through);
        for k in 0..10u16 {
            env.place_vehicle(lane, STOP_CELL - k, 0, true).unwrap();
        }
        env.set_phase(PhaseAction::NsThrough);
        let mut last = 0;
        for s in 1..=30 {
            env.advance_one_second();
            if env.counters().departed == 10 {
                last = s;
                break;
            }
        }
        // departures at seconds 1, 3, ..., 19
        assert_eq!(last, 19);
    }

    #[test]
    fn red_light_holds_everyone() {
        let mut env = Intersection::new(zero_demand(), 1).unwrap();
        let lane = lane_id(Approach::West, Movement::Left);
        for k in 0..5u16 {
            env.place_vehicle(lane, STOP_CELL - 10 - 2 * k, V_MAX_CELLS, true).unwrap();
        }
        env.set_phase(PhaseAction::NsThrough);
        for _ in 0..30 {
            env.advance_one_second();
        }
        assert_eq!(env.count_queued(), 5);
        assert_eq!(env.vehicles().next().unwrap().cell, STOP_CELL);
    }

    #[test]
    fn right_turns_move_with_through_phase() {
        let mut env = Intersection::new(zero_demand(), 1).unwrap();
        let lane = lane_id(Approach::South, Movement::Right);
        env.place_vehicle(lane, STOP_CELL, 0, true).unwrap();
        env.set_phase(PhaseAction::NsLeft);
        env.advance_one_second();
        assert_eq!(env.vehicle_count(), 1);
        env.set_phase(PhaseAction::NsThrough);
        env.advance_one_second();
        assert_eq!(env.vehicle_count(), 0);
    }

    #[test]
    fn mixed_scene_queue_matches_hand_count() {
        let mut env = Intersection::new(zero_demand(), 1).unwrap();
        let red = lane_id(Approach::East, Movement::Left);
        let free = lane_id(Approach::North, Movement::Through);
        // Two vehicles bumper to bumper at the red stop line, one approaching
        // with a 2-cell gap, one far upstream.
        env.place_vehicle(red, 79, 0, true).unwrap();
        env.place_vehicle(red, 78, 0, true).unwrap();
        env.place_vehicle(red, 75, 3, true).unwrap();
        env.place_vehicle(red, 10, 3, true).unwrap();
        env.place_vehicle(free, 40, 3, true).unwrap();
        env.set_phase(PhaseAction::NsThrough);
        // 79, 78 stay; 75 -> 77 (moves 2); 10 -> 13; 40 -> 43.
        assert_eq!(env.advance_one_second(), 2);
        // 77 is now blocked; 13 -> 16; 43 -> 46.
        assert_eq!(env.advance_one_second(), 3);
    }

    #[test]
    fn observation_layout() {
        let mut env = Intersection::new(zero_demand(), 1).unwrap();
        env.place_vehicle(0, STOP_CELL, 0, true).unwrap();
        env.place_vehicle(11, 0, 0, false).unwrap();
        let obs = env.observe();
        let v = obs.to_vec();
        assert_eq!(v.len(), OBS_DIM);
        assert_eq!(v[0], 1.0);
        assert_eq!(v[11 * 80 + 79], 1.0);
        assert_eq!(v[960..964].iter().sum::<f32>(), 1.0);
        assert_eq!(Observation::from_slice(&v).unwrap(), obs);
        assert_eq!(env.observe_detected().occupancy.count(), 1);
    }

    #[test]
    fn finished_episode_rejects_steps() {
        let demand = DemandProfile { horizon: 12, ..zero_demand() };
        let mut env = Intersection::new(demand, 3).unwrap();
        assert!(!env.decision_step(PhaseAction::EwLeft).unwrap().done);
        assert!(env.decision_step(PhaseAction::EwLeft).unwrap().done);
        assert!(matches!(env.decision_step(PhaseAction::EwLeft), Err(Error::EpisodeFinished)));
    }
}
