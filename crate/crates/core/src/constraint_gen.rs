//! Case selection and linear half-plane constraints that keep the ego center
//! away from target-vehicle safety rectangles (optimistic problem) and
//! worst-case occupancy hulls (fail-safe problem).
//!
//! Each constraint has the form `0 >= q_y d_k + q_x s_k + q_t`. The case is
//! picked from the vehicle configuration at k = 0; the coefficients use the
//! rectangle or hull corners at prediction step k. Inclined lines connect an
//! ego corner at k = 0 with a rectangle corner at step k and are anchored at
//! the rectangle corner; when such a line would cut through either box the
//! case falls back to its vertical or horizontal variant.

use crate::ev_model::{lane_of, EvState, RoadGeometry};
use crate::reachability::{BranchKind, OccupancyBranch, OccupancySet};
use crate::tv_model::TvState;
use crate::uncertainty::SafetyRectangle;

/// Half-plane `0 >= q_y * d + q_x * s + q_t` at one prediction step.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LinearConstraint {
    pub q_x: f64,
    pub q_y: f64,
    pub q_t: f64,
    pub step: usize,
    pub tv_id: usize,
    pub case_id: CaseId,
}

impl LinearConstraint {
    /// Signed constraint value at a point; positive means excluded.
    pub fn eval(&self, s: f64, d: f64) -> f64 {
        self.q_y * d + self.q_x * s + self.q_t
    }
}

/// Which table row produced a constraint.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum CaseId {
    B,
    C,
    D,
    /// Vertical fallback of D when the inclined line is inadmissible.
    DVert,
    E,
    E2,
    E3,
    F,
    G,
    H,
    BStar,
    DStar,
    FaStar,
    FbStar,
    F2Star,
    HaStar,
    HbStar,
    H2Star,
    JStarS,
    JStarL,
    JStarR,
    CStarS,
    CStarL,
    CStarLLim,
    CStarR,
    CStarRLim,
}

/// Selected optimistic-planning case for one (EV, TV) pair.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SmpcCase {
    A,
    B,
    C,
    D,
    E,
    E3,
    F,
    G,
    H,
    J,
    /// No table row matches (faster TV ahead in the adjacent left lane);
    /// treated like A.
    NoRule,
}

/// Selected fail-safe case for one (EV, TV) pair.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum FtCase {
    A,
    B,
    D,
    Fa,
    Fb,
    F2,
    Ha,
    Hb,
    H2,
    /// Rear same-lane TV, close: vertical + horizontal placeholder rows.
    J,
    /// Rear same-lane TV, far: vertical + inclined placeholder rows.
    C,
    NoRule,
}

/// Rectangle corners; front = larger x, left = larger y.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Corners {
    /// 1: front-left
    pub fl: (f64, f64),
    /// 2: rear-left
    pub rl: (f64, f64),
    /// 3: rear-right
    pub rr: (f64, f64),
    /// 4: front-right
    pub fr: (f64, f64),
}

impl Corners {
    pub fn from_extents(x_lo: f64, x_hi: f64, y_lo: f64, y_hi: f64) -> Self {
        Self {
            fl: (x_hi, y_hi),
            rl: (x_lo, y_hi),
            rr: (x_lo, y_lo),
            fr: (x_hi, y_lo),
        }
    }

    pub fn all(&self) -> [(f64, f64); 4] {
        [self.fl, self.rl, self.rr, self.fr]
    }
}

/// Axis-aligned ego footprint corners at the initial state (heading is
/// ignored so constraints stay linear in the ego position).
pub fn ev_corners(xi0: &EvState, road: &RoadGeometry) -> Corners {
    Corners::from_extents(
        xi0.s - 0.5 * road.veh_length,
        xi0.s + 0.5 * road.veh_length,
        xi0.d - 0.5 * road.veh_width,
        xi0.d + 0.5 * road.veh_width,
    )
}

pub fn rect_corners(rect: &SafetyRectangle) -> Corners {
    Corners::from_extents(
        rect.center_x - rect.half_length,
        rect.center_x + rect.half_length,
        rect.center_y - rect.half_width,
        rect.center_y + rect.half_width,
    )
}

pub fn occupancy_corners(set: &OccupancySet) -> Corners {
    Corners::from_extents(set.state.x_lo, set.state.x_hi, set.state.y_lo, set.state.y_hi)
}

/// Case thresholds.
#[derive(Debug, Clone, Copy)]
pub struct CaseParams {
    /// Beyond this longitudinal distance no constraint is generated.
    pub r_lar: f64,
    /// Base close distance of the optimistic problem.
    pub d_close: f64,
    /// Floor of the fail-safe close distance.
    pub d_close_ft_floor: f64,
    /// Left-lane margin: closer than this, the inclined left-lane constraint
    /// becomes a horizontal one.
    pub r_llm: f64,
}

impl CaseParams {
    pub fn highway() -> Self {
        Self {
            r_lar: 200.0,
            d_close: 90.0,
            d_close_ft_floor: 10.0,
            r_llm: 25.0,
        }
    }
}

/// Velocity-dependent close distance: `base + |v0 - vtv| N dt`.
pub fn close_distance(v0: f64, vtv: f64, n: usize, dt: f64, base: f64) -> f64 {
    base + (v0 - vtv).abs() * n as f64 * dt
}

/// Fail-safe close distance: `max(floor, |v0| N dt)` plus the same
/// velocity-difference augmentation.
pub fn close_distance_ft(v0: f64, vtv: f64, n: usize, dt: f64, p: &CaseParams) -> f64 {
    let base = p.d_close_ft_floor.max((v0 * n as f64 * dt).abs());
    close_distance(v0, vtv, n, dt, base)
}

/// Optimistic-table case from the k = 0 configuration. `dx = s0 - x_tv0`.
pub fn smpc_case(
    xi0: &EvState,
    tv0: &TvState,
    f_close: f64,
    p: &CaseParams,
    road: &RoadGeometry,
) -> SmpcCase {
    let dx = xi0.s - tv0.x;
    if dx.abs() >= p.r_lar {
        return SmpcCase::A;
    }
    let ev_lane = lane_of(xi0.d, road);
    let tv_lane = lane_of(tv0.y, road);

    if -dx > f_close {
        return SmpcCase::B;
    }
    if dx > f_close {
        return SmpcCase::C;
    }
    // |dx| <= f_close from here on
    if ev_lane > tv_lane {
        return SmpcCase::F;
    }
    if tv_lane == ev_lane {
        return if dx <= 0.0 { SmpcCase::D } else { SmpcCase::J };
    }
    if tv_lane >= ev_lane + 2 {
        return if dx <= 0.0 { SmpcCase::G } else { SmpcCase::H };
    }
    // TV exactly one lane left
    if dx > 0.0 {
        return SmpcCase::H;
    }
    if tv0.x < xi0.s + 0.5 * road.veh_width + p.r_llm {
        return SmpcCase::E3;
    }
    if xi0.v - tv0.vx > 0.0 {
        return SmpcCase::E;
    }
    SmpcCase::NoRule
}

/// Inclined line through the rectangle corner `anchor` with the slope of the
/// segment from the ego corner `ev` (k = 0) to `anchor` (step k). Returns
/// `(q_x, q_t)` for a `q_y = -1` row, or None when the segment is vertical
/// or ascends the wrong way.
fn inclined_above(ev: (f64, f64), anchor: (f64, f64)) -> Option<(f64, f64)> {
    let den = ev.0 - anchor.0;
    if den >= -1e-9 {
        return None;
    }
    let slope = (ev.1 - anchor.1) / den;
    if slope < 0.0 {
        return None;
    }
    Some((slope, anchor.1 - slope * anchor.0))
}

/// Optimistic-problem constraint for one TV at one prediction step, or None
/// for the no-constraint cases.
#[allow(clippy::too_many_arguments)]
pub fn smpc_constraint(
    xi0: &EvState,
    tv0: &TvState,
    rect_k: &SafetyRectangle,
    params: &CaseParams,
    road: &RoadGeometry,
    n: usize,
    dt: f64,
    tv_id: usize,
) -> Option<LinearConstraint> {
    let f_close = close_distance(xi0.v, tv0.vx, n, dt, params.d_close);
    let case = smpc_case(xi0, tv0, f_close, params, road);
    let c = rect_corners(rect_k);
    let ev = ev_corners(xi0, road);
    let k = rect_k.step;

    let mk = |q_x: f64, q_y: f64, q_t: f64, case_id: CaseId| {
        Some(LinearConstraint {
            q_x,
            q_y,
            q_t,
            step: k,
            tv_id,
            case_id,
        })
    };

    match case {
        SmpcCase::A | SmpcCase::J | SmpcCase::NoRule => None,
        SmpcCase::B => mk(1.0, 0.0, -c.rl.0, CaseId::B),
        SmpcCase::C => mk(-1.0, 0.0, c.fl.0, CaseId::C),
        SmpcCase::D => match inclined_above(ev.fr, c.rl) {
            Some((q_x, q_t)) => mk(q_x, -1.0, q_t, CaseId::D),
            None => mk(1.0, 0.0, -c.rl.0, CaseId::DVert),
        },
        SmpcCase::E => match inclined_above(ev.fr, c.rl) {
            Some((q_x, q_t)) => mk(q_x, -1.0, q_t, CaseId::E),
            None => mk(1.0, 0.0, -c.rl.0, CaseId::E2),
        },
        SmpcCase::E3 => mk(0.0, 1.0, -c.rr.1, CaseId::E3),
        SmpcCase::F => mk(0.0, -1.0, c.rl.1, CaseId::F),
        SmpcCase::G => mk(0.0, 1.0, -c.rr.1, CaseId::G),
        SmpcCase::H => mk(0.0, 1.0, -c.fr.1, CaseId::H),
    }
}

/// Fail-safe-table case from the k = 0 configuration.
pub fn ft_case(
    xi0: &EvState,
    tv0: &TvState,
    f_close_ft: f64,
    p: &CaseParams,
    road: &RoadGeometry,
) -> FtCase {
    let dx = xi0.s - tv0.x;
    if dx.abs() >= p.r_lar {
        return FtCase::A;
    }
    let ev_lane = lane_of(xi0.d, road);
    let tv_lane = lane_of(tv0.y, road);
    let same = ev_lane == tv_lane;

    if same && dx > 0.0 {
        // rear same-lane TV: placeholder families
        return if dx <= f_close_ft { FtCase::J } else { FtCase::C };
    }
    if -dx > f_close_ft {
        return FtCase::B;
    }
    if same {
        return FtCase::D; // 0 <= -dx <= f_close_ft
    }
    let tv_center = road.lane_center(tv_lane);
    if ev_lane > tv_lane {
        if dx > 0.0 {
            return FtCase::Fa;
        }
        return if xi0.d >= tv_center + 0.5 * road.lane_width + 0.5 * road.veh_width {
            FtCase::Fb
        } else {
            FtCase::F2
        };
    }
    if ev_lane < tv_lane {
        if dx > 0.0 {
            return FtCase::Ha;
        }
        return if xi0.d <= tv_center - 0.5 * road.lane_width - 0.5 * road.veh_width {
            FtCase::Hb
        } else {
            FtCase::H2
        };
    }
    FtCase::NoRule
}

/// Fail-safe constraints for one TV at one prediction step: one row per
/// occupancy branch (up to three for the rear same-lane placeholder cases).
#[allow(clippy::too_many_arguments)]
pub fn ft_constraints(
    xi0: &EvState,
    tv0: &TvState,
    branches: &[OccupancyBranch],
    k: usize,
    params: &CaseParams,
    road: &RoadGeometry,
    n_ftp: usize,
    dt: f64,
    tv_id: usize,
) -> Vec<LinearConstraint> {
    let f_close_ft = close_distance_ft(xi0.v, tv0.vx, n_ftp, dt, params);
    let case = ft_case(xi0, tv0, f_close_ft, params, road);
    let ev = ev_corners(xi0, road);

    let mk = |q_x: f64, q_y: f64, q_t: f64, case_id: CaseId| LinearConstraint {
        q_x,
        q_y,
        q_t,
        step: k,
        tv_id,
        case_id,
    };

    let single = |case_id: CaseId, f: &dyn Fn(&Corners) -> (f64, f64, f64)| {
        let c = occupancy_corners(&branches[0].hulls[k]);
        let (q_x, q_y, q_t) = f(&c);
        vec![mk(q_x, q_y, q_t, case_id)]
    };

    match case {
        FtCase::A | FtCase::NoRule => Vec::new(),
        FtCase::B => single(CaseId::BStar, &|c| (1.0, 0.0, -c.rl.0)),
        FtCase::D => single(CaseId::DStar, &|c| (1.0, 0.0, -c.rl.0)),
        FtCase::Fa => single(CaseId::FaStar, &|c| (0.0, -1.0, c.rl.1)),
        FtCase::Fb => single(CaseId::FbStar, &|c| (0.0, -1.0, c.rl.1)),
        FtCase::F2 => single(CaseId::F2Star, &|c| (1.0, 0.0, -c.rl.0)),
        FtCase::Ha => single(CaseId::HaStar, &|c| (0.0, 1.0, -c.rr.1)),
        FtCase::Hb => single(CaseId::HbStar, &|c| (0.0, 1.0, -c.rr.1)),
        FtCase::H2 => single(CaseId::H2Star, &|c| (1.0, 0.0, -c.rl.0)),
        FtCase::J => branches
            .iter()
            .filter_map(|b| {
                let c = occupancy_corners(&b.hulls[k]);
                match b.kind {
                    BranchKind::RearSame => Some(mk(-1.0, 0.0, c.fl.0, CaseId::JStarS)),
                    // stay below the left placeholder
                    BranchKind::RearLeft => Some(mk(0.0, 1.0, -c.fr.1, CaseId::JStarL)),
                    // stay above the right placeholder
                    BranchKind::RearRight => Some(mk(0.0, -1.0, c.fl.1, CaseId::JStarR)),
                    BranchKind::Main => None,
                }
            })
            .collect(),
        FtCase::C => branches
            .iter()
            .filter_map(|b| {
                let c = occupancy_corners(&b.hulls[k]);
                match b.kind {
                    BranchKind::RearSame => Some(mk(-1.0, 0.0, c.fl.0, CaseId::CStarS)),
                    BranchKind::RearLeft => {
                        // descending line from the box front-left corner to the
                        // ego rear-right corner; feasible side above
                        let den = ev.rr.0 - c.fl.0;
                        if den > 1e-9 {
                            let slope = (ev.rr.1 - c.fl.1) / den;
                            if slope <= 0.0 {
                                return Some(mk(
                                    slope,
                                    -1.0,
                                    c.fl.1 - slope * c.fl.0,
                                    CaseId::CStarL,
                                ));
                            }
                        }
                        Some(mk(-1.0, 0.0, c.fl.0, CaseId::CStarLLim))
                    }
                    BranchKind::RearRight => {
                        // ascending line from the box front-right corner to the
                        // ego rear-left corner; feasible side below
                        let den = ev.rl.0 - c.fr.0;
                        if den > 1e-9 {
                            let q_x = -(ev.rl.1 - c.fr.1) / den;
                            if q_x <= 0.0 {
                                return Some(mk(
                                    q_x,
                                    1.0,
                                    -c.fr.1 - q_x * c.fr.0,
                                    CaseId::CStarR,
                                ));
                            }
                        }
                        Some(mk(1.0, 0.0, -c.fr.0, CaseId::CStarRLim))
                    }
                    BranchKind::Main => None,
                }
            })
            .collect(),
    }
}

/// Check that a constraint actually excludes its generating rectangle: every
/// corner lies in the ego-infeasible half-plane for axis-parallel rows, or
/// the case's anchor corner sits on the boundary for inclined rows.
pub fn exclusion_check(c: &LinearConstraint, corners: &Corners) -> bool {
    let inclined = c.q_x != 0.0 && c.q_y != 0.0;
    if !inclined {
        return corners.all().iter().all(|&(x, y)| c.eval(x, y) >= -1e-9);
    }
    let anchor = match c.case_id {
        CaseId::D | CaseId::E => corners.rl,
        CaseId::CStarL => corners.fl,
        CaseId::CStarR => corners.fr,
        _ => return false,
    };
    c.eval(anchor.0, anchor.1).abs() <= 1e-9
}
