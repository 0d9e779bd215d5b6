//! Scenario engine: closed-loop simulation of the supervised planner against
//! scripted or randomized traffic, collision detection, and the closed-loop
//! cost metric.

pub mod config;
pub mod output;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::ev_model::{lane_of, step_plant, EvInput, EvState, RoadGeometry};
use crate::ocp::OcpWeights;
use crate::reachability::{lead_walls_for, predict_tv_occupancy, OccupancyBranch, TrafficRules};
use crate::supervisor::{
    plan_step, solve_ft, solve_smpc, update_safe_sequence, validate_safe_sequence,
    DecisionSource, PlanContext, PlannerConfig, SafeInputSequence, SafeUpdate,
};
use crate::tv_model::{measure, tv_feedback_input, tv_step_true, TvReference, TvState};

pub use config::{Mode, ScenarioConfig};

/// One executed simulation step: the state at `h`, the input applied at `h`,
/// and the true traffic states at `h`.
#[derive(Debug, Clone)]
pub struct TraceRow {
    pub h: usize,
    pub ev: EvState,
    pub input: EvInput,
    pub source: DecisionSource,
    pub smpc_feasible: bool,
    pub ft_feasible: bool,
    pub tvs: Vec<TvState>,
    pub min_gap: f64,
}

#[derive(Debug, Clone)]
pub struct SimResult {
    pub trace: Vec<TraceRow>,
    pub final_ev: EvState,
    pub final_tvs: Vec<TvState>,
    pub collided: bool,
    pub collision_step: Option<usize>,
    pub j_sim: f64,
    pub seed: u64,
    pub n_smpc: usize,
    pub n_ft: usize,
    pub n_safe: usize,
    /// Whether the carried safe input sequence validated at every step.
    pub safe_seq_valid: bool,
    pub first_invalid_step: Option<usize>,
}

/// Separating-axis overlap test between the ego vehicle's oriented rectangle
/// and a target vehicle's axis-aligned rectangle.
pub fn collision_check(ev: &EvState, tvs: &[TvState], road: &RoadGeometry) -> bool {
    tvs.iter().any(|tv| rectangles_overlap(ev, tv, road))
}

fn rectangles_overlap(ev: &EvState, tv: &TvState, road: &RoadGeometry) -> bool {
    let (hl, hw) = (0.5 * road.veh_length, 0.5 * road.veh_width);
    let (sin, cos) = ev.phi.sin_cos();
    // ego corners in world coordinates
    let ev_corners: [(f64, f64); 4] = [(hl, hw), (-hl, hw), (-hl, -hw), (hl, -hw)]
        .map(|(x, y)| (ev.s + x * cos - y * sin, ev.d + x * sin + y * cos));
    let tv_corners: [(f64, f64); 4] = [
        (tv.x + hl, tv.y + hw),
        (tv.x - hl, tv.y + hw),
        (tv.x - hl, tv.y - hw),
        (tv.x + hl, tv.y - hw),
    ];
    // candidate separating axes: world axes plus the ego's body axes
    let axes = [(1.0, 0.0), (0.0, 1.0), (cos, sin), (-sin, cos)];
    for (ax, ay) in axes {
        let project = |corners: &[(f64, f64); 4]| {
            let mut lo = f64::INFINITY;
            let mut hi = f64::NEG_INFINITY;
            for &(x, y) in corners {
                let p = x * ax + y * ay;
                lo = lo.min(p);
                hi = hi.max(p);
            }
            (lo, hi)
        };
        let (a_lo, a_hi) = project(&ev_corners);
        let (b_lo, b_hi) = project(&tv_corners);
        if a_hi < b_lo || b_hi < a_lo {
            return false;
        }
    }
    true
}

/// Axis-aligned footprint clearance to the nearest target vehicle (negative
/// once footprints overlap in both axes; heading is ignored).
pub fn min_gap(ev: &EvState, tvs: &[TvState], road: &RoadGeometry) -> f64 {
    tvs.iter()
        .map(|tv| {
            let gx = (ev.s - tv.x).abs() - road.veh_length;
            let gy = (ev.d - tv.y).abs() - road.veh_width;
            gx.max(gy)
        })
        .fold(f64::INFINITY, f64::min)
}

/// Closed-loop cost of an executed trajectory: state deviation against the
/// adaptive lane reference plus input and input-rate terms.
pub fn total_cost(
    trace: &[TraceRow],
    final_ev: &EvState,
    v_ref: f64,
    road: &RoadGeometry,
    w: &OcpWeights,
) -> f64 {
    let mut j = 0.0;
    let mut u_prev = EvInput::ZERO;
    for k in 0..trace.len() {
        let state = if k + 1 < trace.len() {
            trace[k + 1].ev
        } else {
            *final_ev
        };
        let reference = EvState::new(
            state.s,
            road.lane_center(lane_of(state.d, road)),
            0.0,
            v_ref,
        );
        let dx = state.to_vector() - reference.to_vector();
        let u = trace[k].input.to_vector();
        let du = u - u_prev.to_vector();
        j += (dx.transpose() * w.q * dx)[(0, 0)]
            + (u.transpose() * w.r * u)[(0, 0)]
            + (du.transpose() * w.s * du)[(0, 0)];
        u_prev = trace[k].input;
    }
    j
}

/// Runtime target a scripted vehicle is steering toward.
#[derive(Debug, Clone)]
struct ScriptState {
    target_vx: f64,
    target_lane: usize,
    pending: Vec<config::TvScriptEvent>,
}

impl ScriptState {
    fn new(tv: &config::TvConfig, road: &RoadGeometry) -> Self {
        let s = tv.state();
        Self {
            target_vx: s.vx,
            target_lane: lane_of(s.y, road),
            pending: tv.script.clone(),
        }
    }

    fn fire(&mut self, h: usize, own: &TvState, all: &[TvState]) {
        let mut remaining = Vec::with_capacity(self.pending.len());
        for ev in self.pending.drain(..) {
            let hit = match ev.trigger {
                config::Trigger::AtStep { step } => h >= step,
                config::Trigger::WhenPassed { tv, offset } => own.x > all[tv].x + offset,
            };
            if hit {
                match ev.action {
                    config::Action::SetTargetVx { vx } => self.target_vx = vx,
                    config::Action::SetTargetLane { lane } => self.target_lane = lane,
                }
            } else {
                remaining.push(ev);
            }
        }
        self.pending = remaining;
    }
}

/// Worst-case occupancies long enough to validate a stored safe sequence.
fn validation_occupancies(
    ev: &EvState,
    tvs: &[TvState],
    cfg: &PlannerConfig,
    len: usize,
) -> Vec<Vec<OccupancyBranch>> {
    tvs.iter()
        .enumerate()
        .map(|(i, _)| {
            let rules = TrafficRules {
                v_lc_min: cfg.v_lc_min,
                single_lane_change: true,
                lead_walls: lead_walls_for(i, tvs, &cfg.ev.road),
            };
            predict_tv_occupancy(ev, &tvs[i], len + 1, &cfg.tv, &cfg.ev.road, &rules)
        })
        .collect()
}

/// Run one scenario to completion or first collision.
pub fn run_scenario(cfg: &ScenarioConfig, seed: u64) -> SimResult {
    cfg.validate().expect("validated configuration");
    let planner = cfg.planner_config();
    let road = planner.ev.road;
    let mode = cfg.planner.mode;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);

    let mut ev = cfg.ev_state();
    let mut tvs: Vec<TvState> = cfg.tvs.iter().map(|t| t.state()).collect();
    let mut scripts: Vec<ScriptState> =
        cfg.tvs.iter().map(|t| ScriptState::new(t, &road)).collect();

    let mut u_prev = EvInput::ZERO;
    let mut safe_seq = SafeInputSequence::initial_braking(ev.v, planner.ev.u_min.a, planner.dt);
    // leftover plan executed when the unsupervised optimistic mode goes infeasible
    let mut stale_plan: Vec<EvInput> = Vec::new();

    let mut trace = Vec::with_capacity(cfg.n_steps);
    let mut collided = false;
    let mut collision_step = None;
    let (mut n_smpc, mut n_ft, mut n_safe) = (0usize, 0usize, 0usize);
    let mut safe_seq_valid = true;
    let mut first_invalid_step = None;

    for h in 0..cfg.n_steps {
        let measured: Vec<TvState> = tvs
            .iter()
            .map(|tv| {
                if cfg.noise.sensor {
                    measure(tv, &mut rng, &planner.tv)
                } else {
                    *tv
                }
            })
            .collect();

        // recursive-feasibility invariant: the carried sequence must remain
        // safe from the current state under the current worst-case prediction
        if mode != Mode::Smpc {
            let occ = validation_occupancies(&ev, &measured, &planner, safe_seq.len());
            if !validate_safe_sequence(&ev, &safe_seq, &occ, &planner.ev, planner.dt) {
                safe_seq_valid = false;
                first_invalid_step.get_or_insert(h);
            }
        }

        let (applied, source, smpc_feasible, ft_feasible) = match mode {
            Mode::Smpcft => {
                let d = plan_step(&ev, &measured, &safe_seq, &u_prev, h, &planner);
                safe_seq = d.new_safe_sequence;
                (d.applied, d.source, d.smpc_feasible, d.ft_feasible)
            }
            Mode::Ft => {
                let ctx = PlanContext::build(&ev, &measured, &planner);
                match solve_ft(&ctx, &ev, &measured, 0, &u_prev, &planner) {
                    Some(ft) => {
                        let applied = ft.inputs[0];
                        safe_seq = update_safe_sequence(
                            SafeUpdate::FromDirectFt {
                                inputs: &ft.inputs,
                                v_end: ft.v_end,
                            },
                            &safe_seq,
                            planner.ev.u_min.a,
                            planner.dt,
                            h,
                        );
                        (applied, DecisionSource::Ft, false, true)
                    }
                    None => {
                        let applied = safe_seq.first();
                        safe_seq = update_safe_sequence(
                            SafeUpdate::Shift,
                            &safe_seq,
                            planner.ev.u_min.a,
                            planner.dt,
                            h,
                        );
                        (applied, DecisionSource::Safe, false, false)
                    }
                }
            }
            Mode::Smpc => {
                let ctx = PlanContext::build(&ev, &measured, &planner);
                match solve_smpc(&ctx, &ev, &measured, &u_prev, &planner) {
                    Some(plan) => {
                        let applied = plan[0];
                        stale_plan = plan[1..].to_vec();
                        (applied, DecisionSource::Smpc, true, false)
                    }
                    None => {
                        // keep executing the last plan, then coast
                        let applied = if stale_plan.is_empty() {
                            EvInput::ZERO
                        } else {
                            stale_plan.remove(0)
                        };
                        (applied, DecisionSource::Smpc, false, false)
                    }
                }
            }
        };

        match source {
            DecisionSource::Smpc => n_smpc += 1,
            DecisionSource::Ft => n_ft += 1,
            DecisionSource::Safe => n_safe += 1,
        }

        trace.push(TraceRow {
            h,
            ev,
            input: applied,
            source,
            smpc_feasible,
            ft_feasible,
            tvs: tvs.clone(),
            min_gap: min_gap(&ev, &tvs, &road),
        });

        // advance the world
        ev = step_plant(&ev, &applied, planner.dt, &planner.ev);
        let snapshot = tvs.clone();
        for (i, tv) in tvs.iter_mut().enumerate() {
            scripts[i].fire(h, &snapshot[i], &snapshot);
            let reference = TvReference {
                vx_ref: scripts[i].target_vx,
                y_ref: road.lane_center(scripts[i].target_lane),
                vy_ref: 0.0,
            };
            let input = tv_feedback_input(tv, &reference, &planner.tv);
            *tv = tv_step_true(tv, &input, &mut rng, &planner.tv, cfg.noise.tv_process);
        }
        u_prev = applied;

        if collision_check(&ev, &tvs, &road) {
            collided = true;
            collision_step = Some(h);
            break;
        }
    }

    let j_sim = total_cost(&trace, &ev, cfg.ev_ref.v_ref, &road, &cfg.planner_config().weights);
    SimResult {
        trace,
        final_ev: ev,
        final_tvs: tvs,
        collided,
        collision_step,
        j_sim,
        seed,
        n_smpc,
        n_ft,
        n_safe,
        safe_seq_valid,
        first_invalid_step,
    }
}

/// Randomized variant of a base scenario: the ego vehicle starts on a random
/// lane; five constant-velocity vehicles are placed with at least 50 m
/// spacing per lane and per-lane speeds ordered so they never collide.
pub fn random_scenario<R: Rng>(rng: &mut R, base: &ScenarioConfig) -> ScenarioConfig {
    let mut cfg = base.clone();
    let road = cfg.road.geometry();
    let ev_lane = rng.random_range(0..road.n_lanes);
    cfg.ev_init = [0.0, road.lane_center(ev_lane), 0.0, 27.0];

    let n_tvs = 5;
    let mut placed: Vec<(usize, f64)> = vec![(ev_lane, 0.0)]; // (lane, x) incl. the EV
    let mut tvs = Vec::with_capacity(n_tvs);
    while tvs.len() < n_tvs {
        let lane = rng.random_range(0..road.n_lanes);
        let x = rng.random_range(-100.0..=200.0);
        let clear = placed
            .iter()
            .all(|&(l, px)| l != lane || (px - x).abs() >= 50.0);
        if !clear {
            continue;
        }
        placed.push((lane, x));
        let vx = rng.random_range(20.0..=32.0);
        tvs.push(config::TvConfig {
            init: [x, vx, road.lane_center(lane), 0.0],
            script: Vec::new(),
        });
    }

    // per lane, order speeds front to back so followers never catch leaders
    for lane in 0..road.n_lanes {
        let mut members: Vec<usize> = (0..tvs.len())
            .filter(|&i| lane_of(tvs[i].init[2], &road) == lane)
            .collect();
        members.sort_by(|&a, &b| tvs[a].init[0].partial_cmp(&tvs[b].init[0]).unwrap());
        for w in (0..members.len().saturating_sub(1)).rev() {
            let (behind, ahead) = (members[w], members[w + 1]);
            if tvs[behind].init[1] > tvs[ahead].init[1] {
                tvs[behind].init[1] = tvs[ahead].init[1];
            }
        }
    }

    cfg.tvs = tvs;
    cfg
}
