//! Worst-case target-vehicle occupancy prediction with interval arithmetic:
//! traffic-rule clipping, consecutive-step convex hulls, placeholder branches
//! for vehicles behind the ego vehicle, and terminal safe-set parameters.
//!
//! Occupancy boxes live in "enlarged" coordinates: the positional intervals
//! already include the sensor bound and both vehicle shapes, so keeping the
//! ego CENTER outside a box rules out a collision.

use crate::ev_model::{lane_of, EvState, RoadGeometry};
use crate::tv_model::{TvParams, TvState};

/// Interval over the full TV state.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct IntervalBox {
    pub x_lo: f64,
    pub x_hi: f64,
    pub vx_lo: f64,
    pub vx_hi: f64,
    pub y_lo: f64,
    pub y_hi: f64,
    pub vy_lo: f64,
    pub vy_hi: f64,
}

impl IntervalBox {
    pub fn contains_position(&self, x: f64, y: f64) -> bool {
        x >= self.x_lo && x <= self.x_hi && y >= self.y_lo && y <= self.y_hi
    }
}

/// A forward wall the occupancy must stay behind: the rear edge of a vehicle
/// ahead, retreating at worst under maximal braking from speed `vx`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ForwardWall {
    pub rear_edge: f64,
    pub vx: f64,
}

impl ForwardWall {
    /// Static wall (the ego rear edge seen by a rear placeholder).
    pub fn fixed(rear_edge: f64) -> Self {
        Self { rear_edge, vx: 0.0 }
    }

    /// Worst-case (maximal braking) rear-edge position after `t` seconds.
    pub fn position_at(&self, t: f64, a_min: f64) -> f64 {
        let t_stop = -self.vx / a_min;
        let tau = t.min(t_stop);
        self.rear_edge + self.vx * tau + 0.5 * a_min * tau * tau
    }
}

/// Rules the target vehicles are assumed to obey.
#[derive(Debug, Clone)]
pub struct TrafficRules {
    /// Below this speed no lane change is possible.
    pub v_lc_min: f64,
    /// Cap cumulative lateral range to the seed lane plus one adjacent lane.
    pub single_lane_change: bool,
    /// Per-lane forward clipping wall from the nearest lead vehicle.
    pub lead_walls: Vec<Option<ForwardWall>>,
}

impl TrafficRules {
    pub fn open_road(road: &RoadGeometry) -> Self {
        Self {
            v_lc_min: 10.0,
            single_lane_change: true,
            lead_walls: vec![None; road.n_lanes],
        }
    }
}

/// One step of a TV occupancy prediction.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct OccupancySet {
    pub step: usize,
    pub state: IntervalBox,
    /// Lateral lane band the branch may occupy.
    pub lane_lo: usize,
    pub lane_hi: usize,
    /// Lane the branch started in; its band applies while too slow to change lanes.
    pub home_lane: usize,
    /// Forward wall this branch must respect, if any.
    pub wall: Option<ForwardWall>,
}

/// Terminal parameters of the fail-safe problem: minimal terminal gap, the
/// speed cap that makes a pure braking tail collision-free behind the lead,
/// and the lowest predicted lead speed it was derived from.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TerminalSafeParams {
    pub ds_min: f64,
    pub v_n_max: f64,
    pub vtv_n_min: f64,
}

/// Positional enlargement applied to occupancy boxes: sensor bound plus both
/// vehicle shapes, per axis.
pub fn position_enlargement(p: &TvParams, road: &RoadGeometry) -> (f64, f64) {
    (
        road.veh_length + p.sens_bounds[0],
        road.veh_width + p.sens_bounds[2],
    )
}

/// Initial occupancy interval around a measured TV state: the measurement
/// box enlarged by the vehicle shapes on the position axes.
pub fn initial_occupancy(xi_hat0: &TvState, p: &TvParams, road: &RoadGeometry) -> IntervalBox {
    let s = &p.sens_bounds;
    IntervalBox {
        x_lo: xi_hat0.x - s[0] - road.veh_length,
        x_hi: xi_hat0.x + s[0] + road.veh_length,
        vx_lo: (xi_hat0.vx - s[1]).max(0.0),
        vx_hi: xi_hat0.vx + s[1],
        y_lo: xi_hat0.y - s[2] - road.veh_width,
        y_hi: xi_hat0.y + s[2] + road.veh_width,
        vy_lo: xi_hat0.vy - s[3],
        vy_hi: xi_hat0.vy + s[3],
    }
}

/// Enlarged lateral band for a range of physical lanes.
fn lane_band_enlarged(
    lane_lo: usize,
    lane_hi: usize,
    p: &TvParams,
    road: &RoadGeometry,
) -> (f64, f64) {
    let margin = 0.5 * (road.lane_width - road.veh_width);
    let (_, enl_y) = position_enlargement(p, road);
    (
        road.lane_center(lane_lo) - margin - enl_y,
        road.lane_center(lane_hi) + margin + enl_y,
    )
}

/// Propagate one occupancy step under extreme admissible inputs and the
/// traffic rules: longitudinal velocity floored at zero, lateral range
/// clipped to the branch lane band (the seed lane only while the vehicle is
/// too slow to change lanes), forward growth capped by the branch wall.
pub fn propagate_occupancy(
    set_k: &OccupancySet,
    rules: &TrafficRules,
    p: &TvParams,
    road: &RoadGeometry,
    dt: f64,
) -> OccupancySet {
    let b = &set_k.state;
    let (a_min, a_max) = (p.u_min[0], p.u_max[0]);
    let (ay_min, ay_max) = (p.u_min[1], p.u_max[1]);

    // Longitudinal: braking may not drive vx negative.
    let a_lo_eff = a_min.max(-b.vx_lo / dt);
    let mut x_lo = b.x_lo + dt * b.vx_lo + 0.5 * dt * dt * a_lo_eff;
    let mut x_hi = b.x_hi + dt * b.vx_hi + 0.5 * dt * dt * a_max;
    let vx_lo = (b.vx_lo + dt * a_min).max(0.0);
    let vx_hi = b.vx_hi + dt * a_max;

    if let Some(wall) = set_k.wall {
        let t_next = (set_k.step + 1) as f64 * dt;
        x_hi = x_hi.min(wall.position_at(t_next, a_min));
        x_lo = x_lo.min(x_hi);
    }

    // Lateral: full band when fast enough to change lanes, seed lane otherwise.
    let (lane_lo, lane_hi) = if b.vx_hi < rules.v_lc_min {
        (set_k.home_lane, set_k.home_lane)
    } else {
        (set_k.lane_lo, set_k.lane_hi)
    };
    let (band_lo, band_hi) = lane_band_enlarged(lane_lo, lane_hi, p, road);
    let y_lo = (b.y_lo + dt * b.vy_lo + 0.5 * dt * dt * ay_min).max(band_lo.min(b.y_lo));
    let y_hi = (b.y_hi + dt * b.vy_hi + 0.5 * dt * dt * ay_max).min(band_hi.max(b.y_hi));
    let vy_lo = b.vy_lo + dt * ay_min;
    let vy_hi = b.vy_hi + dt * ay_max;

    OccupancySet {
        step: set_k.step + 1,
        state: IntervalBox {
            x_lo,
            x_hi,
            vx_lo,
            vx_hi,
            y_lo,
            y_hi,
            vy_lo,
            vy_hi,
        },
        ..*set_k
    }
}

/// Rectangular convex hull of two consecutive occupancy steps; velocities and
/// metadata come from the later step.
pub fn hull_consecutive(set_prev: &OccupancySet, set_k: &OccupancySet) -> OccupancySet {
    assert_eq!(set_prev.step + 1, set_k.step, "steps must be consecutive");
    let mut out = *set_k;
    out.state.x_lo = set_prev.state.x_lo.min(set_k.state.x_lo);
    out.state.x_hi = set_prev.state.x_hi.max(set_k.state.x_hi);
    out.state.y_lo = set_prev.state.y_lo.min(set_k.state.y_lo);
    out.state.y_hi = set_prev.state.y_hi.max(set_k.state.y_hi);
    out
}

/// Which hypothesis an occupancy branch encodes.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum BranchKind {
    /// Ordinary TV ahead or in another lane.
    Main,
    /// Rear same-lane TV staying behind the ego vehicle.
    RearSame,
    /// Rear TV passing in the adjacent lane left of the ego vehicle.
    RearLeft,
    /// Rear TV passing in the adjacent lane right of the ego vehicle.
    RearRight,
}

/// Seed occupancy boxes for a TV located behind the ego vehicle in the same
/// lane: a stay-behind box clipped at the ego rear edge plus passing boxes
/// shifted into the existing adjacent lanes. Empty if the precondition
/// (behind, same lane) does not hold.
pub fn placeholder_occupancies(
    xi0_ev: &EvState,
    xi_hat0: &TvState,
    p: &TvParams,
    road: &RoadGeometry,
    rules: &TrafficRules,
) -> Vec<(BranchKind, OccupancySet)> {
    let ev_lane = lane_of(xi0_ev.d, road);
    let tv_lane = lane_of(xi_hat0.y, road);
    if tv_lane != ev_lane || xi_hat0.x >= xi0_ev.s {
        return Vec::new();
    }

    let base = initial_occupancy(xi_hat0, p, road);
    let ev_rear = xi0_ev.s - 0.5 * road.veh_length;

    let make = |kind: BranchKind, lane: usize, wall: Option<ForwardWall>| {
        let shift = (lane as f64 - tv_lane as f64) * road.lane_width;
        let mut state = base;
        state.y_lo += shift;
        state.y_hi += shift;
        if let Some(w) = wall {
            state.x_hi = state.x_hi.min(w.rear_edge);
            state.x_lo = state.x_lo.min(state.x_hi);
        }
        (
            kind,
            OccupancySet {
                step: 0,
                state,
                lane_lo: lane,
                lane_hi: lane,
                home_lane: lane,
                wall,
            },
        )
    };

    let mut out = vec![make(
        BranchKind::RearSame,
        tv_lane,
        Some(ForwardWall::fixed(ev_rear)),
    )];
    if tv_lane + 1 < road.n_lanes {
        out.push(make(BranchKind::RearLeft, tv_lane + 1, rules.lead_walls[tv_lane + 1]));
    }
    if tv_lane > 0 {
        out.push(make(BranchKind::RearRight, tv_lane - 1, rules.lead_walls[tv_lane - 1]));
    }
    out
}

/// Terminal parameters from the lead vehicle's occupancy prediction: the
/// lowest worst-case lead speed over the horizon bounds the terminal ego
/// speed through the braking-distance inequality
/// `v^2 / (2 |a_min|) <= ds_min + vtv^2 / (2 |a_min|)`.
pub fn terminal_bounds(
    lead_occupancy: &[OccupancySet],
    ds_min: f64,
    a_min: f64,
) -> TerminalSafeParams {
    assert!(a_min < 0.0, "a_min must be a deceleration");
    let vtv_n_min = lead_occupancy
        .iter()
        .map(|s| s.state.vx_lo)
        .fold(f64::INFINITY, f64::min)
        .max(0.0);
    let v_n_max = (vtv_n_min * vtv_n_min + 2.0 * (-a_min) * ds_min).max(0.0).sqrt();
    TerminalSafeParams {
        ds_min,
        v_n_max,
        vtv_n_min,
    }
}

/// One occupancy hypothesis of a target vehicle over the horizon.
#[derive(Debug, Clone)]
pub struct OccupancyBranch {
    pub kind: BranchKind,
    /// Reachable sets per prediction step, index 0 = now.
    pub raw: Vec<OccupancySet>,
    /// Consecutive-step hulls: `hulls[0] = raw[0]`,
    /// `hulls[k] = hull(raw[k-1], raw[k])`.
    pub hulls: Vec<OccupancySet>,
}

/// Per-lane forward walls seen by target vehicle `tv_index`: the worst-case
/// rear edge of the nearest other vehicle ahead in each lane.
pub fn lead_walls_for(
    tv_index: usize,
    measured: &[TvState],
    road: &RoadGeometry,
) -> Vec<Option<ForwardWall>> {
    let own_x = measured[tv_index].x;
    let mut walls: Vec<Option<ForwardWall>> = vec![None; road.n_lanes];
    for (j, other) in measured.iter().enumerate() {
        if j == tv_index || other.x <= own_x {
            continue;
        }
        let lane = lane_of(other.y, road);
        let wall = ForwardWall {
            rear_edge: other.x - 0.5 * road.veh_length,
            vx: other.vx.max(0.0),
        };
        let closer = match walls[lane] {
            Some(w) => wall.rear_edge < w.rear_edge,
            None => true,
        };
        if closer {
            walls[lane] = Some(wall);
        }
    }
    walls
}

/// Worst-case occupancy prediction of one target vehicle over `n` steps:
/// either a single branch, or up to three placeholder branches when the TV
/// sits behind the ego vehicle in the same lane.
pub fn predict_tv_occupancy(
    xi0_ev: &EvState,
    xi_hat0: &TvState,
    n: usize,
    p: &TvParams,
    road: &RoadGeometry,
    rules: &TrafficRules,
) -> Vec<OccupancyBranch> {
    let mut seeds = placeholder_occupancies(xi0_ev, xi_hat0, p, road, rules);
    if seeds.is_empty() {
        let home = lane_of(xi_hat0.y, road);
        let (lane_lo, lane_hi) = if rules.single_lane_change {
            (home.saturating_sub(1), (home + 1).min(road.n_lanes - 1))
        } else {
            (0, road.n_lanes - 1)
        };
        seeds.push((
            BranchKind::Main,
            OccupancySet {
                step: 0,
                state: initial_occupancy(xi_hat0, p, road),
                lane_lo,
                lane_hi,
                home_lane: home,
                wall: rules.lead_walls[home],
            },
        ));
    }

    seeds
        .into_iter()
        .map(|(kind, seed)| {
            let mut raw = Vec::with_capacity(n + 1);
            raw.push(seed);
            for _ in 0..n {
                let next = propagate_occupancy(raw.last().unwrap(), rules, p, road, p.dt);
                raw.push(next);
            }
            let mut hulls = Vec::with_capacity(n + 1);
            hulls.push(raw[0]);
            for k in 1..raw.len() {
                hulls.push(hull_consecutive(&raw[k - 1], &raw[k]));
            }
            OccupancyBranch { kind, raw, hulls }
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn params() -> TvParams {
        TvParams::highway(0.2)
    }

    fn road() -> RoadGeometry {
        RoadGeometry::three_lane()
    }

    #[test]
    fn initial_box_values() {
        let b = initial_occupancy(&TvState::new(40.0, 32.0, 7.0, 0.0), &params(), &road());
        assert_relative_eq!(b.x_lo, 34.75, epsilon = 1e-12);
        assert_relative_eq!(b.x_hi, 45.25, epsilon = 1e-12);
        assert_relative_eq!(b.y_lo, 4.972, epsilon = 1e-12);
        assert_relative_eq!(b.y_hi, 9.028, epsilon = 1e-12);
        assert_relative_eq!(b.vx_lo, 31.75, epsilon = 1e-12);
        assert_relative_eq!(b.vx_hi, 32.25, epsilon = 1e-12);
    }

    #[test]
    fn initial_box_zero_sensor_bounds() {
        let mut p = params();
        p.sens_bounds = nalgebra::Vector4::zeros();
        let b = initial_occupancy(&TvState::new(10.0, 20.0, 0.0, 0.0), &p, &road());
        assert_eq!((b.x_lo, b.x_hi), (5.0, 15.0));
        assert_eq!((b.y_lo, b.y_hi), (-2.0, 2.0));
        assert_eq!((b.vx_lo, b.vx_hi), (20.0, 20.0));
    }

    #[test]
    fn initial_box_contains_measurement() {
        let xi = TvState::new(123.0, 17.0, 3.1, -0.2);
        let b = initial_occupancy(&xi, &params(), &road());
        assert!(b.contains_position(xi.x, xi.y));
        assert!(b.vx_lo <= xi.vx && xi.vx <= b.vx_hi);
    }

    fn point_set(x: f64, vx: f64, y: f64, lane: usize) -> OccupancySet {
        OccupancySet {
            step: 0,
            state: IntervalBox {
                x_lo: x,
                x_hi: x,
                vx_lo: vx,
                vx_hi: vx,
                y_lo: y,
                y_hi: y,
                vy_lo: 0.0,
                vy_hi: 0.0,
            },
            lane_lo: lane.saturating_sub(1),
            lane_hi: (lane + 1).min(2),
            home_lane: lane,
            wall: None,
        }
    }

    #[test]
    fn propagation_interval_arithmetic() {
        let p = params();
        let set = point_set(0.0, 20.0, 0.0, 0);
        let next = propagate_occupancy(&set, &TrafficRules::open_road(&road()), &p, &road(), 0.2);
        assert_relative_eq!(next.state.x_lo, 3.82, epsilon = 1e-12);
        assert_relative_eq!(next.state.x_hi, 4.10, epsilon = 1e-12);
        assert_relative_eq!(next.state.vx_lo, 18.2, epsilon = 1e-12);
        assert_relative_eq!(next.state.vx_hi, 21.0, epsilon = 1e-12);
    }

    #[test]
    fn stopped_worst_case_cannot_advance_backward_or_forward() {
        let p = params();
        let set = point_set(50.0, 0.0, 0.0, 0);
        let next = propagate_occupancy(&set, &TrafficRules::open_road(&road()), &p, &road(), 0.2);
        assert_eq!(next.state.x_lo, 50.0);
        assert!(next.state.x_hi > 50.0); // could accelerate
        assert_eq!(next.state.vx_lo, 0.0);
    }

    #[test]
    fn slow_vehicle_stays_in_lane() {
        let p = params();
        let mut set = point_set(0.0, 8.0, 3.5, 1);
        set.state.vx_hi = 8.0;
        set.state.vx_lo = 8.0;
        let rules = TrafficRules::open_road(&road());
        let next = propagate_occupancy(&set, &rules, &p, &road(), 0.2);
        let (band_lo, band_hi) = lane_band_enlarged(1, 1, &p, &road());
        assert!(next.state.y_lo >= band_lo);
        assert!(next.state.y_hi <= band_hi);
        // A fast vehicle may grow laterally beyond its own lane band.
        let mut fast = point_set(0.0, 20.0, 3.5, 1);
        fast.state.vy_lo = -2.0;
        fast.state.vy_hi = 2.0;
        let mut cur = fast;
        for _ in 0..10 {
            cur = propagate_occupancy(&cur, &rules, &p, &road(), 0.2);
        }
        assert!(cur.state.y_hi > band_hi);
    }

    #[test]
    fn single_lane_change_caps_lateral_range() {
        let p = params();
        let rules = TrafficRules::open_road(&road());
        let mut cur = point_set(0.0, 30.0, 0.0, 0);
        cur.state.vy_lo = -3.0;
        cur.state.vy_hi = 3.0;
        for _ in 0..40 {
            cur = propagate_occupancy(&cur, &rules, &p, &road(), 0.2);
        }
        let (band_lo, band_hi) = lane_band_enlarged(0, 1, &p, &road());
        assert!(cur.state.y_lo >= band_lo - 1e-12);
        assert!(cur.state.y_hi <= band_hi + 1e-12);
    }

    #[test]
    fn hull_is_componentwise_union() {
        let a = point_set(0.0, 10.0, 0.0, 0);
        let mut b = point_set(2.0, 10.0, 0.5, 0);
        b.step = 1;
        let mut a2 = a;
        a2.state.x_hi = 10.0;
        let mut b2 = b.state;
        b2.x_hi = 15.0;
        let b = OccupancySet { state: b2, ..b };
        let h = hull_consecutive(&a2, &b);
        assert_eq!(h.state.x_lo, 0.0);
        assert_eq!(h.state.x_hi, 15.0);
        assert_eq!(h.step, 1);
    }

    #[test]
    fn hull_of_nested_boxes_is_outer() {
        let mut outer = point_set(0.0, 10.0, 0.0, 0);
        outer.state.x_lo = -5.0;
        outer.state.x_hi = 5.0;
        outer.state.y_lo = -1.0;
        outer.state.y_hi = 1.0;
        let mut inner = outer;
        inner.step = 1;
        inner.state.x_lo = -1.0;
        inner.state.x_hi = 1.0;
        let h = hull_consecutive(&outer, &inner);
        assert_eq!(h.state.x_lo, -5.0);
        assert_eq!(h.state.x_hi, 5.0);
    }

    #[test]
    fn hull_contains_continuous_time_positions() {
        // Continuous positions between two steps under constant admissible
        // inputs. Tolerance 0.01 covers the lateral parabola vertex, bounded
        // by |ay|_max dt^2 / 2 = 0.008.
        let p = params();
        let rules = TrafficRules::open_road(&road());
        let dt = 0.2;
        let mut rng = ChaCha8Rng::seed_from_u64(404);
        let xi = TvState::new(50.0, 15.0, 3.5, 0.0);
        let branch = &predict_tv_occupancy(
            &EvState::new(0.0, 0.0, 0.0, 27.0),
            &xi,
            10,
            &p,
            &road(),
            &rules,
        )[0];
        // true trajectories carry the shape enlargement only; the sensor
        // bound is already part of the seed interval
        let (enl_x, enl_y) = (road().veh_length, road().veh_width);
        let (band_lo, band_hi) = (-0.75, 7.75); // physical center band, lanes 0..2
        for _ in 0..10_000 {
            // random true start inside the measurement box
            let mut x = xi.x + rng.random_range(-0.25..0.25);
            let mut vx: f64 = (xi.vx + rng.random_range(-0.25..0.25)).max(0.0);
            let mut y = xi.y + rng.random_range(-0.028..0.028);
            let mut vy = xi.vy + rng.random_range(-0.028..0.028);
            for k in 0..10usize {
                let a = rng.random_range(p.u_min[0].max(-vx / dt)..=p.u_max[0]);
                let ay = rng.random_range(p.u_min[1]..=p.u_max[1]);
                let tau = rng.random_range(0.0..=dt);
                let xc = x + vx * tau + 0.5 * a * tau * tau;
                let yc = (y + vy * tau + 0.5 * ay * tau * tau).clamp(band_lo, band_hi);
                let hull = &branch.hulls[k + 1].state;
                assert!(
                    xc - enl_x >= hull.x_lo - 0.01 && xc + enl_x <= hull.x_hi + 0.01,
                    "x escape at k={k}"
                );
                assert!(
                    yc - enl_y >= hull.y_lo - 0.01 && yc + enl_y <= hull.y_hi + 0.01,
                    "y escape at k={k}"
                );
                x += vx * dt + 0.5 * a * dt * dt;
                vx = (vx + a * dt).max(0.0);
                y = (y + vy * dt + 0.5 * ay * dt * dt).clamp(band_lo, band_hi);
                vy += ay * dt;
            }
        }
    }

    #[test]
    fn placeholders_three_seeds_in_middle_lane() {
        let p = params();
        let rules = TrafficRules::open_road(&road());
        let ev = EvState::new(50.0, 3.5, 0.0, 27.0);
        let tv = TvState::new(10.0, 25.0, 3.5, 0.0);
        let seeds = placeholder_occupancies(&ev, &tv, &p, &road(), &rules);
        assert_eq!(seeds.len(), 3);
        let lanes: Vec<usize> = seeds.iter().map(|(_, s)| s.lane_lo).collect();
        assert_eq!(lanes, vec![1, 2, 0]);
        // pairwise disjoint lane assignments
        for i in 0..3 {
            for j in i + 1..3 {
                assert_ne!(seeds[i].1.lane_lo, seeds[j].1.lane_lo);
            }
        }
    }

    #[test]
    fn placeholders_two_seeds_in_rightmost_lane() {
        let p = params();
        let rules = TrafficRules::open_road(&road());
        let ev = EvState::new(50.0, 0.0, 0.0, 27.0);
        let tv = TvState::new(10.0, 25.0, 0.0, 0.0);
        let seeds = placeholder_occupancies(&ev, &tv, &p, &road(), &rules);
        assert_eq!(seeds.len(), 2);
        assert_eq!(seeds[0].0, BranchKind::RearSame);
        assert_eq!(seeds[1].0, BranchKind::RearLeft);
    }

    #[test]
    fn placeholders_empty_when_precondition_fails() {
        let p = params();
        let rules = TrafficRules::open_road(&road());
        let ev = EvState::new(50.0, 0.0, 0.0, 27.0);
        // ahead of the EV
        assert!(placeholder_occupancies(
            &ev,
            &TvState::new(80.0, 25.0, 0.0, 0.0),
            &p,
            &road(),
            &rules
        )
        .is_empty());
        // behind but in another lane
        assert!(placeholder_occupancies(
            &ev,
            &TvState::new(10.0, 25.0, 3.5, 0.0),
            &p,
            &road(),
            &rules
        )
        .is_empty());
    }

    #[test]
    fn same_lane_seed_clipped_behind_ev() {
        let p = params();
        let rules = TrafficRules::open_road(&road());
        let ev = EvState::new(30.0, 0.0, 0.0, 27.0);
        let tv = TvState::new(10.0, 25.0, 0.0, 0.0);
        let seeds = placeholder_occupancies(&ev, &tv, &p, &road(), &rules);
        let same = &seeds[0].1;
        let ev_rear = 30.0 - 2.5;
        assert!(same.state.x_hi <= ev_rear + 1e-12);
        // the clip persists across propagation
        let mut cur = *same;
        for _ in 0..10 {
            cur = propagate_occupancy(&cur, &rules, &p, &road(), 0.2);
            assert!(cur.state.x_hi <= ev_rear + 1e-12);
        }
    }

    #[test]
    fn lead_wall_caps_forward_growth() {
        let p = params();
        let road = road();
        let measured = vec![
            TvState::new(0.0, 30.0, 0.0, 0.0),
            TvState::new(40.0, 10.0, 0.0, 0.0),
        ];
        let walls = lead_walls_for(0, &measured, &road);
        assert!(walls[0].is_some());
        assert_relative_eq!(walls[0].unwrap().rear_edge, 37.5, epsilon = 1e-12);
        let rules = TrafficRules {
            lead_walls: walls.clone(),
            ..TrafficRules::open_road(&road)
        };
        let branches = predict_tv_occupancy(
            &EvState::new(-100.0, 7.0, 0.0, 27.0),
            &measured[0],
            10,
            &p,
            &road,
            &rules,
        );
        for (k, set) in branches[0].raw.iter().enumerate() {
            let wall_pos = walls[0].unwrap().position_at(k as f64 * 0.2, p.u_min[0]);
            assert!(
                set.state.x_hi <= wall_pos + 1e-9,
                "wall breached at k={k}: {} > {}",
                set.state.x_hi,
                wall_pos
            );
        }
    }

    #[test]
    fn monotone_nesting_when_unclipped() {
        let p = params();
        let rules = TrafficRules {
            single_lane_change: false,
            ..TrafficRules::open_road(&road())
        };
        let branch = &predict_tv_occupancy(
            &EvState::new(-500.0, 0.0, 0.0, 27.0),
            &TvState::new(100.0, 20.0, 3.5, 0.0),
            10,
            &p,
            &road(),
            &rules,
        )[0];
        for k in 1..branch.raw.len() {
            let a = &branch.raw[k - 1].state;
            let b = &branch.raw[k].state;
            assert!(b.x_hi - b.x_lo >= a.x_hi - a.x_lo - 1e-12);
            assert!(b.y_hi - b.y_lo >= a.y_hi - a.y_lo - 1e-12);
        }
    }

    #[test]
    fn over_approximation_of_random_rule_respecting_rollouts() {
        // Discrete double-integrator rollouts under the encoded rules stay
        // inside the raw reachable boxes at every step, shape-enlarged.
        let p = params();
        let road = road();
        let rules = TrafficRules::open_road(&road);
        let dt = 0.2;
        let xi = TvState::new(60.0, 22.0, 3.5, 0.1);
        let branch = &predict_tv_occupancy(
            &EvState::new(0.0, 0.0, 0.0, 27.0),
            &xi,
            10,
            &p,
            &road,
            &rules,
        )[0];
        let (enl_x, enl_y) = (road.veh_length, road.veh_width);
        let margin = 0.5 * (road.lane_width - road.veh_width);
        let (band_lo, band_hi) = (road.lane_center(0) - margin, road.lane_center(2) + margin);
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        for _ in 0..2_000 {
            let mut x = xi.x + rng.random_range(-0.25..0.25);
            let mut vx: f64 = (xi.vx + rng.random_range(-0.25..0.25)).max(0.0);
            let mut y = xi.y + rng.random_range(-0.028..0.028);
            let mut vy = xi.vy + rng.random_range(-0.028..0.028);
            for k in 1..=10usize {
                let a = rng.random_range(p.u_min[0].max(-vx / dt)..=p.u_max[0]);
                let ay = rng.random_range(p.u_min[1]..=p.u_max[1]);
                x += vx * dt + 0.5 * a * dt * dt;
                vx = (vx + a * dt).max(0.0);
                y = (y + vy * dt + 0.5 * ay * dt * dt).clamp(band_lo, band_hi);
                vy += ay * dt;
                let b = &branch.raw[k].state;
                assert!(x - enl_x >= b.x_lo - 1e-9 && x + enl_x <= b.x_hi + 1e-9);
                assert!(y - enl_y >= b.y_lo - 1e-9 && y + enl_y <= b.y_hi + 1e-9);
            }
        }
    }

    #[test]
    fn terminal_bounds_values() {
        let mk = |vx_lo: f64| OccupancySet {
            state: IntervalBox {
                vx_lo,
                ..IntervalBox {
                    x_lo: 0.0,
                    x_hi: 0.0,
                    vx_lo: 0.0,
                    vx_hi: 0.0,
                    y_lo: 0.0,
                    y_hi: 0.0,
                    vy_lo: 0.0,
                    vy_hi: 0.0,
                }
            },
            step: 0,
            lane_lo: 0,
            lane_hi: 0,
            home_lane: 0,
            wall: None,
        };
        let occ: Vec<OccupancySet> = [22.0, 21.0, 20.0, 20.5].iter().map(|&v| mk(v)).collect();
        let t = terminal_bounds(&occ, 22.5, -9.0);
        assert_eq!(t.vtv_n_min, 20.0);
        assert_relative_eq!(t.v_n_max, 805.0f64.sqrt(), epsilon = 1e-12);

        let stopped = terminal_bounds(&[mk(0.0)], 22.5, -9.0);
        assert_relative_eq!(stopped.v_n_max, 405.0f64.sqrt(), epsilon = 1e-12);

        let equal = terminal_bounds(&[mk(13.0)], 0.0, -9.0);
        assert_relative_eq!(equal.v_n_max, 13.0, epsilon = 1e-12);
    }

    #[test]
    fn terminal_bounds_braking_guarantee() {
        // Both vehicles braking at a_min from (v_n_max, vtv_n_min) with an
        // initial gap of ds_min never end with a negative gap
        // (closed-form stopping distances).
        for &(vtv, ds) in &[(20.0, 22.5), (0.0, 22.5), (5.0, 10.0), (31.0, 40.0)] {
            let occ = OccupancySet {
                state: IntervalBox {
                    x_lo: 0.0,
                    x_hi: 0.0,
                    vx_lo: vtv,
                    vx_hi: vtv,
                    y_lo: 0.0,
                    y_hi: 0.0,
                    vy_lo: 0.0,
                    vy_hi: 0.0,
                },
                step: 0,
                lane_lo: 0,
                lane_hi: 0,
                home_lane: 0,
                wall: None,
            };
            let t = terminal_bounds(&[occ], ds, -9.0);
            let ev_dist = t.v_n_max * t.v_n_max / 18.0;
            let tv_dist = vtv * vtv / 18.0;
            let final_gap = ds + tv_dist - ev_dist;
            assert!(final_gap >= -1e-9, "gap {final_gap}");
        }
    }
}

