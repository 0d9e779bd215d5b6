//! Per-step planning supervision: solve the optimistic problem, admit its
//! first input only if a fail-safe continuation exists, otherwise fall back
//! to the fail-safe input or to the stored safe input sequence. The carried
//! sequence is what makes the scheme recursively feasible: it always ends in
//! a braking tail and implicit zero inputs, so shifting it can never run dry.

use crate::constraint_gen::{ft_constraints, smpc_constraint, CaseParams, LinearConstraint};
use crate::ev_model::{
    lane_of, linearize_discretize, predict_linear, step_plant, EvInput, EvParams, EvState,
    LinearDiscreteModel,
};
use crate::ocp::{build_ft_qp, build_smpc_qp, FtTerminal, OcpQp, OcpWeights};
use crate::reachability::{
    lead_walls_for, predict_tv_occupancy, terminal_bounds, OccupancyBranch, TrafficRules,
};
use crate::tv_model::{tv_predict, TvParams, TvState};
use crate::uncertainty::{
    propagate_error_cov, safety_rectangle, tolerance_level, ErrorCovariance,
};
use crate::qp::{solve_qp, QpStatus};

/// Everything the planner needs besides the current states.
#[derive(Debug, Clone)]
pub struct PlannerConfig {
    pub ev: EvParams,
    pub tv: TvParams,
    pub weights: OcpWeights,
    pub case_params: CaseParams,
    pub beta: f64,
    pub n_smpc: usize,
    pub n_ftp: usize,
    pub dt: f64,
    /// Minimal terminal gap behind the lead vehicle.
    pub ds_min: f64,
    /// Additional safety margin of the TV rectangle.
    pub m_safe: f64,
    pub v_lc_min: f64,
    pub v_ref: f64,
}

impl PlannerConfig {
    pub fn highway(beta: f64) -> Self {
        let dt = 0.2;
        Self {
            ev: EvParams::highway(),
            tv: TvParams::highway(dt),
            weights: OcpWeights::highway(),
            case_params: CaseParams::highway(),
            beta,
            n_smpc: 10,
            n_ftp: 10,
            dt,
            ds_min: 22.5,
            m_safe: 0.01,
            v_lc_min: 10.0,
            v_ref: 27.0,
        }
    }

    /// Per-step state references: current lane center, road-aligned heading,
    /// reference speed.
    pub fn references(&self, xi0: &EvState, n: usize) -> Vec<EvState> {
        let d_ref = self.ev.road.lane_center(lane_of(xi0.d, &self.ev.road));
        vec![EvState::new(0.0, d_ref, 0.0, self.v_ref); n + 1]
    }
}

/// Stored backup input list; applying it from the state it was built for
/// avoids worst-case collisions and ends at standstill. Inputs past the end
/// are implicitly zero.
#[derive(Debug, Clone, PartialEq)]
pub struct SafeInputSequence {
    pub inputs: Vec<EvInput>,
    pub origin_step: usize,
}

impl SafeInputSequence {
    pub fn new(inputs: Vec<EvInput>, origin_step: usize) -> Self {
        assert!(!inputs.is_empty(), "safe sequence may not be empty");
        Self { inputs, origin_step }
    }

    /// Initial sequence: brake straight to standstill (the scenario starts in
    /// a safe state).
    pub fn initial_braking(v: f64, a_min: f64, dt: f64) -> Self {
        let mut inputs = braking_sequence(v, a_min, dt);
        if inputs.is_empty() {
            inputs.push(EvInput::ZERO);
        }
        Self::new(inputs, 0)
    }

    pub fn first(&self) -> EvInput {
        self.inputs[0]
    }

    pub fn len(&self) -> usize {
        self.inputs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.inputs.is_empty()
    }

    /// Input at position `i`, zero past the stored tail.
    pub fn get(&self, i: usize) -> EvInput {
        self.inputs.get(i).copied().unwrap_or(EvInput::ZERO)
    }
}

/// Which supervision branch produced the applied input.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum DecisionSource {
    Smpc,
    Ft,
    Safe,
}

impl DecisionSource {
    pub fn as_str(&self) -> &'static str {
        match self {
            DecisionSource::Smpc => "SMPC",
            DecisionSource::Ft => "FT",
            DecisionSource::Safe => "SAFE",
        }
    }
}

/// Outcome of one supervised planning step.
#[derive(Debug, Clone)]
pub struct StepDecision {
    pub applied: EvInput,
    pub source: DecisionSource,
    pub smpc_feasible: bool,
    pub ft_feasible: bool,
    pub new_safe_sequence: SafeInputSequence,
    pub planned_smpc: Option<Vec<EvInput>>,
    pub planned_ft: Option<Vec<EvInput>>,
}

/// Safe-state test: footprint fully inside one lane, road-aligned heading,
/// and either standstill or slower than the lead vehicle in the same lane.
pub fn is_safe_state(xi: &EvState, lead_tv: Option<&TvState>, road: &crate::ev_model::RoadGeometry) -> bool {
    if xi.phi.abs() > 1e-6 {
        return false;
    }
    let center = road.lane_center(lane_of(xi.d, road));
    if (xi.d - center).abs() > 0.5 * (road.lane_width - road.veh_width) + 1e-9 {
        return false;
    }
    if xi.v <= 1e-9 {
        return true;
    }
    match lead_tv {
        Some(lead) => xi.v < lead.vx,
        None => true,
    }
}

/// Straight-line braking inputs until standstill: full deceleration, with an
/// exact-stop final entry.
pub fn braking_sequence(v: f64, a_min: f64, dt: f64) -> Vec<EvInput> {
    assert!(a_min < 0.0 && dt > 0.0);
    let mut out = Vec::new();
    let mut speed = v.max(0.0);
    while speed > 1e-12 {
        let a = a_min.max(-speed / dt);
        out.push(EvInput::new(a, 0.0));
        speed = (speed + a * dt).max(0.0);
    }
    out
}

/// How the safe sequence is renewed at the end of a supervision step.
pub enum SafeUpdate<'a> {
    /// Fail-safe solved from the successor of the optimistic input: the full
    /// fail-safe plan plus a braking tail.
    FromPrimedFt { inputs: &'a [EvInput], v_end: f64 },
    /// Fail-safe solved from the current state and its first input applied:
    /// the remaining plan plus a braking tail.
    FromDirectFt { inputs: &'a [EvInput], v_end: f64 },
    /// No fail-safe solution: consume one stored input.
    Shift,
}

pub fn update_safe_sequence(
    branch: SafeUpdate,
    prev: &SafeInputSequence,
    a_min: f64,
    dt: f64,
    origin_step: usize,
) -> SafeInputSequence {
    match branch {
        SafeUpdate::FromPrimedFt { inputs, v_end } => {
            let mut seq = inputs.to_vec();
            seq.extend(braking_sequence(v_end, a_min, dt));
            if seq.is_empty() {
                seq.push(EvInput::ZERO);
            }
            SafeInputSequence::new(seq, origin_step)
        }
        SafeUpdate::FromDirectFt { inputs, v_end } => {
            let mut seq: Vec<EvInput> = inputs.iter().skip(1).copied().collect();
            seq.extend(braking_sequence(v_end, a_min, dt));
            if seq.is_empty() {
                seq.push(EvInput::ZERO);
            }
            SafeInputSequence::new(seq, origin_step)
        }
        SafeUpdate::Shift => {
            let mut seq: Vec<EvInput> = prev.inputs.iter().skip(1).copied().collect();
            if seq.is_empty() {
                seq.push(EvInput::ZERO);
            }
            SafeInputSequence::new(seq, prev.origin_step)
        }
    }
}

/// Per-step derived data shared by the optimistic and fail-safe problems.
pub struct PlanContext {
    pub model: LinearDiscreteModel,
    pub smpc_constraints: Vec<LinearConstraint>,
    /// Worst-case occupancy branches per target vehicle, horizon `n_ftp + 1`.
    pub occupancies: Vec<Vec<OccupancyBranch>>,
    /// Index of the nearest measured TV ahead in the ego lane.
    pub lead_index: Option<usize>,
}

impl PlanContext {
    pub fn build(xi0: &EvState, tvs: &[TvState], cfg: &PlannerConfig) -> Self {
        let road = &cfg.ev.road;
        let kappa = tolerance_level(cfg.beta).expect("beta in (0,1)");
        let model = linearize_discretize(xi0, cfg.dt, &cfg.ev);

        let mut smpc_constraints = Vec::new();
        for (i, tv) in tvs.iter().enumerate() {
            let pred = tv_predict(tv, cfg.n_smpc, &cfg.tv, road);
            let mut cov = ErrorCovariance::initial(&cfg.tv);
            for (k, tv_k) in pred.iter().enumerate() {
                let rect = safety_rectangle(
                    xi0,
                    tv_k,
                    &cov,
                    kappa,
                    road,
                    cfg.ev.u_min.a,
                    cfg.m_safe,
                    k,
                );
                if let Some(c) = smpc_constraint(
                    xi0,
                    tv,
                    &rect,
                    &cfg.case_params,
                    road,
                    cfg.n_smpc,
                    cfg.dt,
                    i,
                ) {
                    smpc_constraints.push(c);
                }
                cov = propagate_error_cov(&cov, &cfg.tv);
            }
        }

        let occupancies: Vec<Vec<OccupancyBranch>> = tvs
            .iter()
            .enumerate()
            .map(|(i, tv)| {
                let rules = TrafficRules {
                    v_lc_min: cfg.v_lc_min,
                    single_lane_change: true,
                    lead_walls: lead_walls_for(i, tvs, road),
                };
                predict_tv_occupancy(xi0, tv, cfg.n_ftp + 1, &cfg.tv, road, &rules)
            })
            .collect();

        let ev_lane = lane_of(xi0.d, road);
        let lead_index = tvs
            .iter()
            .enumerate()
            .filter(|(_, tv)| tv.x > xi0.s && lane_of(tv.y, road) == ev_lane)
            .min_by(|a, b| a.1.x.partial_cmp(&b.1.x).unwrap())
            .map(|(i, _)| i);

        Self {
            model,
            smpc_constraints,
            occupancies,
            lead_index,
        }
    }
}

fn solve_ocp(qp: &OcpQp) -> Option<(Vec<EvInput>, EvState)> {
    if qp.infeasible_at_k0 {
        return None;
    }
    match solve_qp(&qp.problem) {
        Ok(sol) if sol.status == QpStatus::Optimal => {
            let terminal = qp.state_at(qp.horizon, &sol.z);
            Some((qp.inputs(&sol.z), terminal))
        }
        Ok(_) => None,
        Err(_) => None,
    }
}

/// Solve the optimistic problem; None when infeasible.
pub fn solve_smpc(
    ctx: &PlanContext,
    xi0: &EvState,
    tvs: &[TvState],
    u_prev: &EvInput,
    cfg: &PlannerConfig,
) -> Option<Vec<EvInput>> {
    let _ = tvs;
    let refs = cfg.references(xi0, cfg.n_smpc);
    let qp = build_smpc_qp(
        xi0,
        &ctx.model,
        &ctx.smpc_constraints,
        &refs,
        u_prev,
        &cfg.weights,
        cfg.n_smpc,
        &cfg.ev,
    );
    solve_ocp(&qp).map(|(inputs, _)| inputs)
}

/// A fail-safe plan and the linear-model speed at its terminal step.
pub struct FtPlan {
    pub inputs: Vec<EvInput>,
    pub v_end: f64,
}

/// Solve the fail-safe problem from `from_state`. `time_offset` aligns the
/// occupancy sets: 1 when the problem starts after the optimistic input has
/// been applied, 0 when it starts now.
pub fn solve_ft(
    ctx: &PlanContext,
    from_state: &EvState,
    tvs: &[TvState],
    time_offset: usize,
    u_prev: &EvInput,
    cfg: &PlannerConfig,
) -> Option<FtPlan> {
    let road = &cfg.ev.road;
    let model = linearize_discretize(from_state, cfg.dt, &cfg.ev);

    let mut constraints = Vec::new();
    for (i, tv) in tvs.iter().enumerate() {
        for k in 0..=cfg.n_ftp {
            let mut rows = ft_constraints(
                from_state,
                tv,
                &ctx.occupancies[i],
                k + time_offset,
                &cfg.case_params,
                road,
                cfg.n_ftp,
                cfg.dt,
                i,
            );
            for r in &mut rows {
                r.step = k;
            }
            constraints.extend(rows);
        }
    }

    let terminal = ctx.lead_index.map(|li| {
        let branch = &ctx.occupancies[li][0];
        let window = &branch.raw[time_offset..=time_offset + cfg.n_ftp];
        let params = terminal_bounds(window, cfg.ds_min, cfg.ev.u_min.a);
        let lead_x_n =
            branch.raw[time_offset + cfg.n_ftp].state.x_lo + road.veh_length;
        FtTerminal { params, lead_x_n }
    });

    let refs = cfg.references(from_state, cfg.n_ftp);
    let qp = build_ft_qp(
        from_state,
        &model,
        &constraints,
        terminal.as_ref(),
        &refs,
        u_prev,
        &cfg.weights,
        cfg.n_ftp,
        &cfg.ev,
    );
    solve_ocp(&qp).map(|(inputs, terminal_state)| FtPlan {
        inputs,
        v_end: terminal_state.v,
    })
}

/// One supervised planning step: optimistic input if it keeps a fail-safe
/// continuation, else fail-safe input, else the stored safe input.
pub fn plan_step(
    xi0: &EvState,
    tv_measurements: &[TvState],
    prev_safe: &SafeInputSequence,
    u_prev: &EvInput,
    step: usize,
    cfg: &PlannerConfig,
) -> StepDecision {
    let ctx = PlanContext::build(xi0, tv_measurements, cfg);
    let smpc_plan = solve_smpc(&ctx, xi0, tv_measurements, u_prev, cfg);

    if let Some(plan) = &smpc_plan {
        let u0 = plan[0];
        let primed = predict_linear(&ctx.model, xi0, &u0);
        if let Some(ft) = solve_ft(&ctx, &primed, tv_measurements, 1, &u0, cfg) {
            let seq = update_safe_sequence(
                SafeUpdate::FromPrimedFt {
                    inputs: &ft.inputs,
                    v_end: ft.v_end,
                },
                prev_safe,
                cfg.ev.u_min.a,
                cfg.dt,
                step,
            );
            return StepDecision {
                applied: u0,
                source: DecisionSource::Smpc,
                smpc_feasible: true,
                ft_feasible: true,
                new_safe_sequence: seq,
                planned_smpc: smpc_plan.clone(),
                planned_ft: Some(ft.inputs),
            };
        }
        // optimistic input is not certifiably safe; try the fail-safe problem
        // from the current state
        if let Some(ft) = solve_ft(&ctx, xi0, tv_measurements, 0, u_prev, cfg) {
            let applied = ft.inputs[0];
            let seq = update_safe_sequence(
                SafeUpdate::FromDirectFt {
                    inputs: &ft.inputs,
                    v_end: ft.v_end,
                },
                prev_safe,
                cfg.ev.u_min.a,
                cfg.dt,
                step,
            );
            return StepDecision {
                applied,
                source: DecisionSource::Ft,
                smpc_feasible: true,
                ft_feasible: true,
                new_safe_sequence: seq,
                planned_smpc: smpc_plan.clone(),
                planned_ft: Some(ft.inputs),
            };
        }
        let seq = update_safe_sequence(SafeUpdate::Shift, prev_safe, cfg.ev.u_min.a, cfg.dt, step);
        return StepDecision {
            applied: prev_safe.first(),
            source: DecisionSource::Safe,
            smpc_feasible: true,
            ft_feasible: false,
            new_safe_sequence: seq,
            planned_smpc: smpc_plan,
            planned_ft: None,
        };
    }

    if let Some(ft) = solve_ft(&ctx, xi0, tv_measurements, 0, u_prev, cfg) {
        let applied = ft.inputs[0];
        let seq = update_safe_sequence(
            SafeUpdate::FromDirectFt {
                inputs: &ft.inputs,
                v_end: ft.v_end,
            },
            prev_safe,
            cfg.ev.u_min.a,
            cfg.dt,
            step,
        );
        return StepDecision {
            applied,
            source: DecisionSource::Ft,
            smpc_feasible: false,
            ft_feasible: true,
            new_safe_sequence: seq,
            planned_smpc: None,
            planned_ft: Some(ft.inputs),
        };
    }

    let seq = update_safe_sequence(SafeUpdate::Shift, prev_safe, cfg.ev.u_min.a, cfg.dt, step);
    StepDecision {
        applied: prev_safe.first(),
        source: DecisionSource::Safe,
        smpc_feasible: false,
        ft_feasible: false,
        new_safe_sequence: seq,
        planned_smpc: None,
        planned_ft: None,
    }
}

/// Check a stored sequence against worst-case occupancy predictions: apply
/// every input through the nonlinear plant, require no occupancy collision at
/// any step, standstill at the end, and a safe terminal state.
pub fn validate_safe_sequence(
    xi: &EvState,
    seq: &SafeInputSequence,
    occupancies: &[Vec<OccupancyBranch>],
    p: &EvParams,
    dt: f64,
) -> bool {
    let inside_any = |state: &EvState, idx: usize| {
        occupancies.iter().any(|branches| {
            branches.iter().any(|b| {
                let j = idx.min(b.hulls.len() - 1);
                b.hulls[j].state.contains_position(state.s, state.d)
            })
        })
    };

    let mut state = *xi;
    if inside_any(&state, 0) {
        return false;
    }
    for (i, _) in seq.inputs.iter().enumerate() {
        let u = seq.get(i);
        state = step_plant(&state, &u, dt, p);
        if inside_any(&state, i + 1) {
            return false;
        }
    }
    state.v <= 1e-9 && is_safe_state(&state, None, &p.road)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::ev_model::RoadGeometry;
    use approx::assert_relative_eq;

    fn road() -> RoadGeometry {
        RoadGeometry::three_lane()
    }

    #[test]
    fn safe_state_examples() {
        let r = road();
        assert!(is_safe_state(&EvState::new(0.0, 0.0, 0.0, 0.0), None, &r));
        let lead = TvState::new(100.0, 25.0, 0.0, 0.0);
        assert!(is_safe_state(
            &EvState::new(0.0, 0.0, 0.0, 20.0),
            Some(&lead),
            &r
        ));
        assert!(!is_safe_state(
            &EvState::new(0.0, 0.0, 0.1, 0.0),
            None,
            &r
        ));
        // faster than the lead
        assert!(!is_safe_state(
            &EvState::new(0.0, 0.0, 0.0, 27.0),
            Some(&TvState::new(100.0, 20.0, 0.0, 0.0)),
            &r
        ));
        // straddling a lane boundary
        assert!(!is_safe_state(&EvState::new(0.0, 1.75, 0.0, 0.0), None, &r));
        // no lead: any speed is fine if aligned and in lane
        assert!(is_safe_state(&EvState::new(0.0, 3.5, 0.0, 30.0), None, &r));
    }

    #[test]
    fn braking_sequence_lengths() {
        let one = braking_sequence(1.8, -9.0, 0.2);
        assert_eq!(one.len(), 1);
        assert_eq!(one[0], EvInput::new(-9.0, 0.0));

        let full = braking_sequence(27.0, -9.0, 0.2);
        assert_eq!(full.len(), 15);
        assert!(full.iter().all(|u| (u.a + 9.0).abs() < 1e-9 && u.delta == 0.0));

        assert!(braking_sequence(0.0, -9.0, 0.2).is_empty());

        // fractional remainder gets an exact-stop entry
        let frac = braking_sequence(1.0, -9.0, 0.2);
        assert_eq!(frac.len(), 1);
        assert_relative_eq!(frac[0].a, -5.0, epsilon = 1e-12);
    }

    #[test]
    fn braking_sequence_stops_plant_exactly() {
        let p = EvParams::highway();
        for v in [0.0, 1.0, 1.8, 12.3, 27.0, 35.0] {
            let mut state = EvState::new(0.0, 3.5, 0.0, v);
            for u in braking_sequence(v, p.u_min.a, 0.2) {
                state = step_plant(&state, &u, 0.2, &p);
            }
            assert!(state.v <= 1e-9, "v0 = {v}, residual {}", state.v);
            assert_eq!(state.d, 3.5);
        }
    }

    #[test]
    fn update_branches() {
        let prev = SafeInputSequence::new(
            vec![
                EvInput::new(1.0, 0.0),
                EvInput::new(2.0, 0.0),
                EvInput::new(3.0, 0.0),
            ],
            0,
        );

        // branch 3: drop the first element
        let shifted = update_safe_sequence(SafeUpdate::Shift, &prev, -9.0, 0.2, 5);
        assert_eq!(
            shifted.inputs,
            vec![EvInput::new(2.0, 0.0), EvInput::new(3.0, 0.0)]
        );

        // shift identity: prepending the applied input restores the original
        let mut restored = vec![prev.first()];
        restored.extend(shifted.inputs.iter().copied());
        assert_eq!(restored, prev.inputs);

        // branch 1: full plan plus braking tail
        let ft: Vec<EvInput> = (0..10).map(|_| EvInput::new(0.5, 0.0)).collect();
        let seq = update_safe_sequence(
            SafeUpdate::FromPrimedFt {
                inputs: &ft,
                v_end: 1.8,
            },
            &prev,
            -9.0,
            0.2,
            7,
        );
        assert_eq!(seq.len(), 11);
        assert_eq!(seq.origin_step, 7);
        assert_eq!(seq.inputs[10], EvInput::new(-9.0, 0.0));

        // branch 2: plan without its first element plus braking tail
        let seq2 = update_safe_sequence(
            SafeUpdate::FromDirectFt {
                inputs: &ft,
                v_end: 27.0,
            },
            &prev,
            -9.0,
            0.2,
            7,
        );
        assert_eq!(seq2.len(), 9 + 15);
    }

    #[test]
    fn shift_never_empties() {
        let mut seq = SafeInputSequence::new(vec![EvInput::new(-9.0, 0.0)], 0);
        for _ in 0..5 {
            seq = update_safe_sequence(SafeUpdate::Shift, &seq, -9.0, 0.2, 0);
            assert!(!seq.is_empty());
        }
        assert_eq!(seq.first(), EvInput::ZERO);
    }

    fn open_road_cfg() -> PlannerConfig {
        PlannerConfig::highway(0.8)
    }

    #[test]
    fn open_road_applies_optimistic_input() {
        let cfg = open_road_cfg();
        let xi0 = EvState::new(0.0, 0.0, 0.0, 27.0);
        let prev = SafeInputSequence::initial_braking(27.0, -9.0, 0.2);
        let d = plan_step(&xi0, &[], &prev, &EvInput::ZERO, 0, &cfg);
        assert_eq!(d.source, DecisionSource::Smpc);
        assert!(d.smpc_feasible && d.ft_feasible);
        assert!(d.applied.a.abs() < 0.5);
        assert!(d.applied.delta.abs() < 0.01);
        // renewed sequence ends at standstill under the plant
        let p = EvParams::highway();
        let mut state = crate::ev_model::step_plant(&xi0, &d.applied, 0.2, &p);
        for i in 0..d.new_safe_sequence.len() {
            state = step_plant(&state, &d.new_safe_sequence.get(i), 0.2, &p);
        }
        assert!(state.v <= 1e-9, "residual speed {}", state.v);
    }

    #[test]
    fn lead_vehicle_forces_fallback_modes() {
        // Lead almost bumper to bumper and much slower: the optimistic
        // problem's inclined row pushes a lane change, but a fail-safe
        // continuation exists, so the step stays supervised.
        let cfg = open_road_cfg();
        let xi0 = EvState::new(0.0, 0.0, 0.0, 27.0);
        let tv = TvState::new(40.0, 10.0, 0.0, 0.0);
        let prev = SafeInputSequence::initial_braking(27.0, -9.0, 0.2);
        let d = plan_step(&xi0, &[tv], &prev, &EvInput::ZERO, 0, &cfg);
        // whatever the source, an input is produced and the sequence renews
        assert!(!d.new_safe_sequence.is_empty());
        if d.source == DecisionSource::Safe {
            assert!(!d.ft_feasible);
        }
    }

    #[test]
    fn validate_initial_braking_against_stopped_lead() {
        let cfg = open_road_cfg();
        let p = &cfg.ev;
        let xi0 = EvState::new(0.0, 0.0, 0.0, 27.0);

        // stopped lead 200 m ahead: braking from 27 needs 40.5 m
        let far = TvState::new(200.0, 0.0, 0.0, 0.0);
        let seq = SafeInputSequence::initial_braking(27.0, p.u_min.a, cfg.dt);
        let ctx = PlanContext::build(&xi0, &[far], &cfg);
        assert!(validate_safe_sequence(
            &xi0,
            &seq,
            &occupancies_for(&ctx, &xi0, &[far], &cfg, seq.len()),
            p,
            cfg.dt
        ));

        // stopped lead 30 m ahead: 40.5 m > 30 m, must fail
        let near = TvState::new(30.0, 0.0, 0.0, 0.0);
        let ctx = PlanContext::build(&xi0, &[near], &cfg);
        assert!(!validate_safe_sequence(
            &xi0,
            &seq,
            &occupancies_for(&ctx, &xi0, &[near], &cfg, seq.len()),
            p,
            cfg.dt
        ));
    }

    /// Occupancies long enough to cover a sequence.
    fn occupancies_for(
        _ctx: &PlanContext,
        xi0: &EvState,
        tvs: &[TvState],
        cfg: &PlannerConfig,
        len: usize,
    ) -> Vec<Vec<OccupancyBranch>> {
        tvs.iter()
            .enumerate()
            .map(|(i, tv)| {
                let rules = TrafficRules {
                    v_lc_min: cfg.v_lc_min,
                    single_lane_change: true,
                    lead_walls: lead_walls_for(i, tvs, &cfg.ev.road),
                };
                predict_tv_occupancy(xi0, tv, len + 1, &cfg.tv, &cfg.ev.road, &rules)
            })
            .collect()
    }

    #[test]
    fn zero_sequence_from_standstill_is_valid() {
        let cfg = open_road_cfg();
        let seq = SafeInputSequence::new(vec![EvInput::ZERO; 3], 0);
        let xi = EvState::new(0.0, 0.0, 0.0, 0.0);
        assert!(validate_safe_sequence(&xi, &seq, &[], &cfg.ev, cfg.dt));
    }
}
