//! Condensed quadratic-program assembly for the optimistic and fail-safe
//! optimal control problems. States are eliminated through the linearized
//! dynamics, leaving the stacked input sequence as the decision vector.

use nalgebra::{DMatrix, DVector, Dyn, Matrix2, Matrix4, OMatrix, Vector4, U4};

use crate::constraint_gen::LinearConstraint;
use crate::ev_model::{lane_of, EvInput, EvParams, EvState, LinearDiscreteModel};
use crate::qp::QpProblem;
use crate::reachability::TerminalSafeParams;

/// Affine sensitivity of one predicted state to the stacked input vector.
pub type StateGain = OMatrix<f64, U4, Dyn>;

/// Cost weights: state deviation, input magnitude, input rate.
#[derive(Debug, Clone, Copy)]
pub struct OcpWeights {
    pub q: Matrix4<f64>,
    pub r: Matrix2<f64>,
    pub s: Matrix2<f64>,
}

impl OcpWeights {
    pub fn highway() -> Self {
        Self {
            q: Matrix4::from_diagonal(&Vector4::new(0.0, 0.25, 0.2, 10.0)),
            r: Matrix2::from_diagonal(&nalgebra::Vector2::new(0.33, 5.0)),
            s: Matrix2::from_diagonal(&nalgebra::Vector2::new(0.33, 15.0)),
        }
    }
}

/// Terminal requirements of the fail-safe problem when a lead vehicle exists.
#[derive(Debug, Clone, Copy)]
pub struct FtTerminal {
    pub params: TerminalSafeParams,
    /// Worst-case (lowest) lead center position at the final prediction step.
    pub lead_x_n: f64,
}

/// A built optimal control problem: the QP plus the affine maps from the
/// input vector to each predicted state, `xi_k = offset[k] + gain[k] * z`.
#[derive(Debug, Clone)]
pub struct OcpQp {
    pub problem: QpProblem,
    /// True when a constraint row at k = 0 is violated by the initial state
    /// itself; such a problem is infeasible without solving.
    pub infeasible_at_k0: bool,
    pub state_offset: Vec<Vector4<f64>>,
    pub state_gain: Vec<StateGain>,
    pub horizon: usize,
}

impl OcpQp {
    /// Predicted state at step `k` for the stacked input vector `z`.
    pub fn state_at(&self, k: usize, z: &DVector<f64>) -> EvState {
        let x = self.state_offset[k] + &self.state_gain[k] * z;
        EvState::new(x[0], x[1], x[2], x[3])
    }

    /// Split a stacked solution into per-step inputs.
    pub fn inputs(&self, z: &DVector<f64>) -> Vec<EvInput> {
        (0..self.horizon)
            .map(|k| EvInput::new(z[2 * k], z[2 * k + 1]))
            .collect()
    }
}

struct Builder {
    n: usize,
    nz: usize,
    hess: DMatrix<f64>,
    grad: DVector<f64>,
    g_rows: Vec<DVector<f64>>,
    h_vals: Vec<f64>,
    offset: Vec<Vector4<f64>>,
    gain: Vec<StateGain>,
    infeasible_at_k0: bool,
}

impl Builder {
    fn new(xi0: &EvState, model: &LinearDiscreteModel, n: usize) -> Self {
        let nz = 2 * n;
        // xi_{k+1} = affine + A xi_k + B u_k, condensed over the horizon
        let mut offset = Vec::with_capacity(n + 1);
        let mut gain: Vec<StateGain> = Vec::with_capacity(n + 1);
        offset.push(xi0.to_vector());
        gain.push(StateGain::zeros(nz));
        for k in 0..n {
            offset.push(model.affine + model.a_d * offset[k]);
            let mut g = model.a_d * &gain[k];
            g.view_mut((0, 2 * k), (4, 2)).copy_from(&model.b_d);
            gain.push(g);
        }
        Self {
            n,
            nz,
            hess: DMatrix::zeros(nz, nz),
            grad: DVector::zeros(nz),
            g_rows: Vec::new(),
            h_vals: Vec::new(),
            offset,
            gain,
            infeasible_at_k0: false,
        }
    }

    fn add_state_cost(&mut self, w: &Matrix4<f64>, refs: &[EvState]) {
        for k in 1..=self.n {
            let gk = &self.gain[k];
            let dev = self.offset[k] - refs[k].to_vector();
            let wg = w * gk;
            self.hess += 2.0 * gk.transpose() * &wg;
            self.grad += 2.0 * gk.transpose() * (w * dev);
        }
    }

    fn add_input_cost(&mut self, r: &Matrix2<f64>) {
        for k in 0..self.n {
            for i in 0..2 {
                for j in 0..2 {
                    self.hess[(2 * k + i, 2 * k + j)] += 2.0 * r[(i, j)];
                }
            }
        }
    }

    fn add_rate_cost(&mut self, s: &Matrix2<f64>, u_prev: &EvInput) {
        // du_0 = u_0 - u_prev, du_k = u_k - u_{k-1}; accumulate entrywise
        for k in 0..self.n {
            for i in 0..2 {
                for j in 0..2 {
                    let sij = 2.0 * s[(i, j)];
                    self.hess[(2 * k + i, 2 * k + j)] += sij;
                    if k == 0 {
                        self.grad[i] -= sij * u_prev.to_vector()[j];
                    } else {
                        self.hess[(2 * k + i, 2 * (k - 1) + j)] -= sij;
                        self.hess[(2 * (k - 1) + i, 2 * k + j)] -= sij;
                        self.hess[(2 * (k - 1) + i, 2 * (k - 1) + j)] += sij;
                    }
                }
            }
        }
    }

    /// Row `coeff . z <= bound`.
    fn add_row(&mut self, coeff: DVector<f64>, bound: f64) {
        self.g_rows.push(coeff);
        self.h_vals.push(bound);
    }

    /// Row `q . xi_k <= bound` through the state maps; a k = 0 row is
    /// constant and only checked.
    fn add_state_row(&mut self, k: usize, q: &Vector4<f64>, bound: f64) {
        let fixed = q.dot(&self.offset[k]);
        if k == 0 {
            if fixed > bound + 1e-9 {
                self.infeasible_at_k0 = true;
            }
            return;
        }
        let coeff = (q.transpose() * &self.gain[k]).transpose();
        self.add_row(coeff, bound - fixed);
    }

    fn add_input_box(&mut self, p: &EvParams) {
        for k in 0..self.n {
            for (i, (lo, hi)) in [(p.u_min.a, p.u_max.a), (p.u_min.delta, p.u_max.delta)]
                .iter()
                .enumerate()
            {
                let mut up = DVector::zeros(self.nz);
                up[2 * k + i] = 1.0;
                self.add_row(up, *hi);
                let mut lo_row = DVector::zeros(self.nz);
                lo_row[2 * k + i] = -1.0;
                self.add_row(lo_row, -lo);
            }
        }
    }

    fn add_rate_box(&mut self, p: &EvParams, u_prev: &EvInput) {
        let up = u_prev.to_vector();
        for k in 0..self.n {
            for i in 0..2 {
                let (lo, hi) = if i == 0 {
                    (p.du_min.a, p.du_max.a)
                } else {
                    (p.du_min.delta, p.du_max.delta)
                };
                let mut row = DVector::zeros(self.nz);
                row[2 * k + i] = 1.0;
                let mut shift = 0.0;
                if k == 0 {
                    shift = up[i];
                } else {
                    row[2 * (k - 1) + i] = -1.0;
                }
                self.add_row(row.clone(), hi + shift);
                self.add_row(-row, -(lo + shift));
            }
        }
    }

    fn add_state_box(&mut self, p: &EvParams) {
        let (d_lo, d_hi) = p.road.center_bounds();
        let e_d = Vector4::new(0.0, 1.0, 0.0, 0.0);
        let e_v = Vector4::new(0.0, 0.0, 0.0, 1.0);
        for k in 1..=self.n {
            self.add_state_row(k, &e_d, d_hi);
            self.add_state_row(k, &(-e_d), -d_lo);
            self.add_state_row(k, &e_v, p.v_max);
            self.add_state_row(k, &(-e_v), 0.0);
        }
    }

    fn add_tv_constraints(&mut self, constraints: &[LinearConstraint]) {
        for c in constraints {
            let q = Vector4::new(c.q_x, c.q_y, 0.0, 0.0);
            self.add_state_row(c.step, &q, -c.q_t);
        }
    }

    fn finish(self, horizon: usize) -> OcpQp {
        let m = self.g_rows.len();
        let mut g = DMatrix::zeros(m, self.nz);
        for (i, row) in self.g_rows.iter().enumerate() {
            g.set_row(i, &row.transpose());
        }
        OcpQp {
            problem: QpProblem {
                hess: self.hess,
                grad: self.grad,
                g,
                h: DVector::from_vec(self.h_vals),
            },
            infeasible_at_k0: self.infeasible_at_k0,
            state_offset: self.offset,
            state_gain: self.gain,
            horizon,
        }
    }
}

/// Build the optimistic planning QP: tracking cost plus input, rate, road,
/// speed, and per-step collision half-plane rows.
pub fn build_smpc_qp(
    xi0: &EvState,
    model: &LinearDiscreteModel,
    constraints: &[LinearConstraint],
    refs: &[EvState],
    u_prev: &EvInput,
    w: &OcpWeights,
    n: usize,
    p: &EvParams,
) -> OcpQp {
    assert!(n >= 1);
    assert!(refs.len() > n, "need a reference for every predicted step");
    let mut b = Builder::new(xi0, model, n);
    b.add_state_cost(&w.q, refs);
    b.add_input_cost(&w.r);
    b.add_rate_cost(&w.s, u_prev);
    b.add_input_box(p);
    b.add_rate_box(p, u_prev);
    b.add_state_box(p);
    b.add_tv_constraints(constraints);
    b.finish(n)
}

/// Build the fail-safe QP: same structure as the optimistic problem plus the
/// terminal safe-state rows (gap and speed behind the lead when one exists,
/// road alignment, and a fully-in-lane band around the current lane center).
pub fn build_ft_qp(
    xi0: &EvState,
    model: &LinearDiscreteModel,
    constraints: &[LinearConstraint],
    terminal: Option<&FtTerminal>,
    refs: &[EvState],
    u_prev: &EvInput,
    w: &OcpWeights,
    n: usize,
    p: &EvParams,
) -> OcpQp {
    assert!(n >= 1);
    assert!(refs.len() > n);
    let mut b = Builder::new(xi0, model, n);
    b.add_state_cost(&w.q, refs);
    b.add_input_cost(&w.r);
    b.add_rate_cost(&w.s, u_prev);
    b.add_input_box(p);
    b.add_rate_box(p, u_prev);
    b.add_state_box(p);
    b.add_tv_constraints(constraints);

    let e_s = Vector4::new(1.0, 0.0, 0.0, 0.0);
    let e_d = Vector4::new(0.0, 1.0, 0.0, 0.0);
    let e_phi = Vector4::new(0.0, 0.0, 1.0, 0.0);
    let e_v = Vector4::new(0.0, 0.0, 0.0, 1.0);

    if let Some(t) = terminal {
        b.add_state_row(n, &e_s, t.lead_x_n - t.params.ds_min);
        b.add_state_row(n, &e_v, t.params.v_n_max);
    }
    // terminal alignment, as an inequality pair
    b.add_state_row(n, &e_phi, 1e-9);
    b.add_state_row(n, &(-e_phi), 1e-9);
    // terminal state fully inside the current lane
    let center = p.road.lane_center(lane_of(xi0.d, &p.road));
    let band = 0.5 * (p.road.lane_width - p.road.veh_width);
    b.add_state_row(n, &e_d, center + band);
    b.add_state_row(n, &(-e_d), -(center - band));

    b.finish(n)
}
