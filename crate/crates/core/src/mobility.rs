//! Manhattan grid, vehicle-pair motion and the zone partition.
//!
//! The area is a torus of side `side_m` with `blocks` horizontal and
//! `blocks` vertical roads. Each road carries `lanes_per_direction` lanes in
//! each direction (right-hand traffic). A pair is a transmitter followed by
//! its receiver at a fixed gap in the same lane; the pair moves as a unit and
//! picks left/right/straight at every intersection.

use alloc::vec;
use alloc::vec::Vec;

#[allow(unused_imports)] // inherent methods shadow it when std is linked
use num_traits::Float;
use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Euclidean remainder, in `[0, m)` up to rounding.
fn modulo(a: f64, m: f64) -> f64 {
    let r = a % m;
    if r < 0.0 {
        r + m
    } else {
        r
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct Point {
    pub x: f64,
    pub y: f64,
}

impl Point {
    pub const fn new(x: f64, y: f64) -> Self {
        Point { x, y }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Axis {
    Horizontal,
    Vertical,
}

impl Axis {
    pub fn perpendicular(self) -> Axis {
        match self {
            Axis::Horizontal => Axis::Vertical,
            Axis::Vertical => Axis::Horizontal,
        }
    }
}

/// One directed lane: road `road` on `axis`, travelling towards +x/+y when
/// `forward`, `index` counting outwards from the road centre.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct Lane {
    pub axis: Axis,
    pub road: usize,
    pub forward: bool,
    pub index: usize,
}

impl Lane {
    /// Unit heading vector.
    pub fn heading(&self) -> (f64, f64) {
        let sign = if self.forward { 1.0 } else { -1.0 };
        match self.axis {
            Axis::Horizontal => (sign, 0.0),
            Axis::Vertical => (0.0, sign),
        }
    }

    fn from_heading(hx: f64, hy: f64, road: usize, index: usize) -> Lane {
        if hx != 0.0 {
            Lane {
                axis: Axis::Horizontal,
                road,
                forward: hx > 0.0,
                index,
            }
        } else {
            Lane {
                axis: Axis::Vertical,
                road,
                forward: hy > 0.0,
                index,
            }
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct GridSpec {
    pub side_m: f64,
    /// Roads per axis; `blocks²` intersections.
    pub blocks: usize,
    pub lane_width_m: f64,
    pub lanes_per_direction: usize,
}

impl Default for GridSpec {
    fn default() -> Self {
        GridSpec {
            side_m: 250.0,
            blocks: 3,
            lane_width_m: 4.0,
            lanes_per_direction: 2,
        }
    }
}

impl GridSpec {
    pub fn validate(&self) -> Result<()> {
        if !(self.side_m > 0.0) || !self.side_m.is_finite() {
            return Err(Error::config("grid.side_m", "must be positive"));
        }
        if self.blocks == 0 {
            return Err(Error::config("grid.blocks", "must be at least 1"));
        }
        if self.lanes_per_direction == 0 {
            return Err(Error::config(
                "grid.lanes_per_direction",
                "must be at least 1",
            ));
        }
        let half_road = self.lane_width_m * self.lanes_per_direction as f64;
        if !(self.lane_width_m > 0.0) || 2.0 * half_road >= self.road_spacing() {
            return Err(Error::config(
                "grid.lane_width_m",
                "lanes must be positive and narrower than the road spacing",
            ));
        }
        Ok(())
    }

    pub fn road_spacing(&self) -> f64 {
        self.side_m / self.blocks as f64
    }

    /// Centre coordinate of road `j` (x for vertical roads, y for horizontal).
    pub fn road_center(&self, j: usize) -> f64 {
        (j as f64 + 0.5) * self.road_spacing()
    }

    pub fn wrap(&self, v: f64) -> f64 {
        let w = modulo(v, self.side_m);
        // the remainder can round up to exactly side_m
        if w >= self.side_m {
            0.0
        } else {
            w
        }
    }

    /// Minimal-image difference `b - a` on the torus, per axis.
    pub fn delta(&self, a: Point, b: Point) -> (f64, f64) {
        let half = 0.5 * self.side_m;
        let d = |v: f64| {
            let w = modulo(v + half, self.side_m) - half;
            if w < -half {
                w + self.side_m
            } else {
                w
            }
        };
        (d(b.x - a.x), d(b.y - a.y))
    }

    pub fn distance(&self, a: Point, b: Point) -> f64 {
        let (dx, dy) = self.delta(a, b);
        (dx * dx + dy * dy).sqrt()
    }

    /// Perpendicular coordinate of a lane centreline.
    pub fn lane_offset(&self, lane: &Lane) -> f64 {
        let (hx, hy) = lane.heading();
        // right-hand normal of the heading
        let (nx, ny) = (hy, -hx);
        let shift = (lane.index as f64 + 0.5) * self.lane_width_m;
        let center = self.road_center(lane.road);
        match lane.axis {
            Axis::Horizontal => self.wrap(center + ny * shift),
            Axis::Vertical => self.wrap(center + nx * shift),
        }
    }

    /// Point at along-lane coordinate `s`.
    pub fn lane_point(&self, lane: &Lane, s: f64) -> Point {
        let off = self.lane_offset(lane);
        let s = self.wrap(s);
        match lane.axis {
            Axis::Horizontal => Point::new(s, off),
            Axis::Vertical => Point::new(off, s),
        }
    }

    pub fn lanes(&self) -> Vec<Lane> {
        let mut out = Vec::new();
        for axis in [Axis::Horizontal, Axis::Vertical] {
            for road in 0..self.blocks {
                for forward in [true, false] {
                    for index in 0..self.lanes_per_direction {
                        out.push(Lane {
                            axis,
                            road,
                            forward,
                            index,
                        });
                    }
                }
            }
        }
        out
    }

    pub fn intersection(&self, horizontal_road: usize, vertical_road: usize) -> Point {
        Point::new(
            self.road_center(vertical_road),
            self.road_center(horizontal_road),
        )
    }

    /// Distance along the lane to the next road crossing strictly ahead,
    /// and the index of that crossing road.
    fn next_crossing(&self, s: f64, forward: bool) -> (f64, usize) {
        let mut best = (f64::INFINITY, 0);
        for j in 0..self.blocks {
            let c = self.road_center(j);
            let mut d = if forward {
                modulo(c - s, self.side_m)
            } else {
                modulo(s - c, self.side_m)
            };
            if d <= 0.0 || d >= self.side_m {
                d = self.side_m;
            }
            if d < best.0 {
                best = (d, j);
            }
        }
        best
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct MobilityConfig {
    pub speed_mps: f64,
    pub pair_gap_m: f64,
    pub turn_left: f64,
    pub turn_right: f64,
}

impl Default for MobilityConfig {
    fn default() -> Self {
        MobilityConfig {
            speed_mps: 60.0 / 3.6,
            pair_gap_m: 50.0,
            turn_left: 0.25,
            turn_right: 0.25,
        }
    }
}

impl MobilityConfig {
    pub fn validate(&self, grid: &GridSpec) -> Result<()> {
        if !(self.speed_mps >= 0.0) || !self.speed_mps.is_finite() {
            return Err(Error::config("mobility.speed_mps", "must be non-negative"));
        }
        if !(self.pair_gap_m > 0.0) || self.pair_gap_m >= 0.5 * grid.side_m {
            return Err(Error::config(
                "mobility.pair_gap_m",
                "must be positive and below half the area side",
            ));
        }
        let ok = |p: f64| (0.0..=1.0).contains(&p);
        if !ok(self.turn_left) || !ok(self.turn_right) || self.turn_left + self.turn_right > 1.0 {
            return Err(Error::config(
                "mobility.turn_left/turn_right",
                "must be probabilities summing to at most 1",
            ));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Turn {
    Left,
    Right,
    Straight,
}

/// A transmitter/receiver pair. The receiver trails the transmitter by the
/// configured gap in the same lane.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct VuePair {
    pub lane: Lane,
    /// Along-lane coordinate of the transmitter.
    pub s: f64,
    pub speed_mps: f64,
}

impl VuePair {
    pub fn tx_pos(&self, grid: &GridSpec) -> Point {
        grid.lane_point(&self.lane, self.s)
    }

    pub fn rx_pos(&self, grid: &GridSpec, gap: f64) -> Point {
        let sign = if self.lane.forward { 1.0 } else { -1.0 };
        grid.lane_point(&self.lane, self.s - sign * gap)
    }

    /// Moves the pair `speed·dt` along its lane, turning at intersections.
    pub fn advance<R: Rng + ?Sized>(
        &mut self,
        grid: &GridSpec,
        mob: &MobilityConfig,
        dt: f64,
        rng: &mut R,
    ) {
        let mut remaining = self.speed_mps * dt;
        while remaining > 0.0 {
            let (to_next, road) = grid.next_crossing(self.s, self.lane.forward);
            let sign = if self.lane.forward { 1.0 } else { -1.0 };
            if remaining < to_next {
                self.s = grid.wrap(self.s + sign * remaining);
                return;
            }
            remaining -= to_next;
            let crossing = grid.road_center(road);
            let (hx, hy) = self.lane.heading();
            let turn = sample_turn(mob, rng);
            let (nx, ny) = match turn {
                Turn::Straight => {
                    self.s = crossing;
                    continue;
                }
                Turn::Left => (-hy, hx),
                Turn::Right => (hy, -hx),
            };
            // the new lane runs along the crossing road; the pair enters it at
            // the centre line of the road it is leaving
            let leaving = grid.road_center(self.lane.road);
            self.lane = Lane::from_heading(nx, ny, road, self.lane.index);
            self.s = leaving;
        }
    }
}

fn sample_turn<R: Rng + ?Sized>(mob: &MobilityConfig, rng: &mut R) -> Turn {
    let u: f64 = rng.random();
    if u < mob.turn_left {
        Turn::Left
    } else if u < mob.turn_left + mob.turn_right {
        Turn::Right
    } else {
        Turn::Straight
    }
}

/// Spreads `count` pairs round-robin over all lanes, evenly spaced within
/// each lane from a random offset.
pub fn place_pairs<R: Rng + ?Sized>(
    grid: &GridSpec,
    mob: &MobilityConfig,
    count: usize,
    rng: &mut R,
) -> Vec<VuePair> {
    let lanes = grid.lanes();
    let mut per_lane = vec![0usize; lanes.len()];
    for i in 0..count {
        per_lane[i % lanes.len()] += 1;
    }
    let offsets: Vec<f64> = lanes
        .iter()
        .map(|_| rng.random::<f64>() * grid.side_m)
        .collect();
    (0..count)
        .map(|i| {
            let l = i % lanes.len();
            let slot = i / lanes.len();
            let spacing = grid.side_m / per_lane[l] as f64;
            VuePair {
                lane: lanes[l],
                s: grid.wrap(offsets[l] + slot as f64 * spacing),
                speed_mps: mob.speed_mps,
            }
        })
        .collect()
}

/// Advances every pair, each with its own random stream.
pub fn step_mobility<R: Rng>(
    pairs: &mut [VuePair],
    rngs: &mut [R],
    grid: &GridSpec,
    mob: &MobilityConfig,
    dt: f64,
) {
    for (pair, rng) in pairs.iter_mut().zip(rngs.iter_mut()) {
        pair.advance(grid, mob, dt, rng);
    }
}

/// Cell size, reuse factor and RB pool for the zone partition.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ZoneLayout {
    pub cell_m: f64,
    pub reuse: usize,
    pub total_rbs: usize,
}

impl Default for ZoneLayout {
    fn default() -> Self {
        ZoneLayout {
            cell_m: 125.0,
            reuse: 2,
            total_rbs: 60,
        }
    }
}

impl ZoneLayout {
    pub fn validate(&self) -> Result<()> {
        if self.reuse == 0 {
            return Err(Error::config("zones.reuse", "must be at least 1"));
        }
        if self.total_rbs == 0 || !self.total_rbs.is_multiple_of(self.reuse) {
            return Err(Error::config(
                "zones.total_rbs",
                "must be a positive multiple of the reuse factor",
            ));
        }
        if !(self.cell_m > 0.0) {
            return Err(Error::config("zones.cell_m", "must be positive"));
        }
        Ok(())
    }

    pub fn rbs_per_zone(&self) -> usize {
        self.total_rbs / self.reuse
    }
}

/// Zone of every pair plus the RB set of every reuse color.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ZoneMap {
    pub cells_per_side: usize,
    pub cell_m: f64,
    pub reuse: usize,
    /// RB indices per color.
    pub rb_sets: Vec<Vec<usize>>,
    /// Zone id (cell index) per pair.
    pub zone_of: Vec<usize>,
}

impl ZoneMap {
    pub fn cell_of(&self, p: Point) -> (usize, usize) {
        let clamp = |v: f64| ((v / self.cell_m) as usize).min(self.cells_per_side - 1);
        (clamp(p.x), clamp(p.y))
    }

    pub fn zone_id(&self, cx: usize, cy: usize) -> usize {
        cx + cy * self.cells_per_side
    }

    pub fn color(&self, zone: usize) -> usize {
        let cx = zone % self.cells_per_side;
        let cy = zone / self.cells_per_side;
        (cx + cy) % self.reuse
    }

    pub fn zone_rbs(&self, zone: usize) -> &[usize] {
        &self.rb_sets[self.color(zone)]
    }

    pub fn pair_rbs(&self, pair: usize) -> &[usize] {
        self.zone_rbs(self.zone_of[pair])
    }

    /// True if no two edge-adjacent cells share an RB.
    pub fn adjacent_cells_disjoint(&self) -> bool {
        if self.reuse == 1 {
            return self.cells_per_side == 1;
        }
        let n = self.cells_per_side;
        for cy in 0..n {
            for cx in 0..n {
                let z = self.zone_id(cx, cy);
                let mut neighbours = Vec::new();
                if cx + 1 < n {
                    neighbours.push(self.zone_id(cx + 1, cy));
                }
                if cy + 1 < n {
                    neighbours.push(self.zone_id(cx, cy + 1));
                }
                for nz in neighbours {
                    let a = self.zone_rbs(z);
                    if self.zone_rbs(nz).iter().any(|rb| a.contains(rb)) {
                        return false;
                    }
                }
            }
        }
        true
    }
}

/// Partitions the area into square cells, colors them `(cx + cy) mod reuse`
/// and splits the RB pool evenly over colors. Pairs are zoned by their
/// transmitter position.
pub fn assign_zones(positions: &[Point], grid: &GridSpec, layout: &ZoneLayout) -> Result<ZoneMap> {
    layout.validate()?;
    let cells_per_side = ((grid.side_m / layout.cell_m).ceil() as usize).max(1);
    let per = layout.rbs_per_zone();
    let rb_sets = (0..layout.reuse)
        .map(|c| (c * per..(c + 1) * per).collect())
        .collect();
    let mut map = ZoneMap {
        cells_per_side,
        cell_m: layout.cell_m,
        reuse: layout.reuse,
        rb_sets,
        zone_of: Vec::with_capacity(positions.len()),
    };
    for &p in positions {
        let (cx, cy) = map.cell_of(p);
        let z = map.zone_id(cx, cy);
        map.zone_of.push(z);
    }
    Ok(map)
}
