//! Dense convex quadratic programming:
//!
//! ```text
//!     minimize    1/2 z' H z + f' z
//!     subject to  G z <= h
//! ```
//!
//! solved with a dual active-set method in the style of Goldfarb and Idnani:
//! start at the unconstrained minimizer, repeatedly pull the most violated
//! constraint into the active set with primal and dual steps, drop blocking
//! constraints whose multiplier would turn negative. The method needs H
//! positive definite (a tiny ridge is added for semidefinite inputs) and
//! certifies infeasibility when a violated constraint's normal lies in the
//! span of the active normals with no droppable blocker.

use nalgebra::{DMatrix, DVector};
use thiserror::Error;

const FEAS_TOL: f64 = 1e-9;
const DUAL_TOL: f64 = 1e-12;

#[derive(Debug, Error)]
pub enum QpError {
    #[error("Hessian is not symmetric positive semidefinite (min eigenvalue {0:.3e})")]
    NotPsd(f64),
    #[error("dimension mismatch: {0}")]
    Dimensions(String),
}

#[derive(Debug, Clone)]
pub struct QpProblem {
    pub hess: DMatrix<f64>,
    pub grad: DVector<f64>,
    pub g: DMatrix<f64>,
    pub h: DVector<f64>,
}

impl QpProblem {
    pub fn n(&self) -> usize {
        self.grad.len()
    }

    pub fn m(&self) -> usize {
        self.h.len()
    }

    pub fn objective(&self, z: &DVector<f64>) -> f64 {
        0.5 * (z.transpose() * &self.hess * z)[(0, 0)] + self.grad.dot(z)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum QpStatus {
    Optimal,
    Infeasible,
}

#[derive(Debug, Clone)]
pub struct QpSolution {
    pub status: QpStatus,
    pub z: DVector<f64>,
    pub objective: f64,
    pub kkt_residual: f64,
}

/// Worst KKT violation of `(z, mu)` for the original problem data.
fn kkt_residual(p: &QpProblem, z: &DVector<f64>, mu: &DVector<f64>) -> f64 {
    let stationarity = (&p.hess * z + &p.grad + p.g.transpose() * mu).amax();
    let mut primal: f64 = 0.0;
    let mut compl: f64 = 0.0;
    let mut dual: f64 = 0.0;
    for i in 0..p.m() {
        let slack = p.g.row(i).transpose().dot(z) - p.h[i];
        primal = primal.max(slack);
        compl = compl.max((mu[i] * slack).abs());
        dual = dual.max(-mu[i]);
    }
    stationarity.max(primal).max(compl).max(dual)
}

pub fn solve_qp(p: &QpProblem) -> Result<QpSolution, QpError> {
    let n = p.n();
    let m = p.m();
    if p.hess.nrows() != n || p.hess.ncols() != n {
        return Err(QpError::Dimensions(format!(
            "Hessian is {}x{}, expected {n}x{n}",
            p.hess.nrows(),
            p.hess.ncols()
        )));
    }
    if p.g.nrows() != m || (m > 0 && p.g.ncols() != n) {
        return Err(QpError::Dimensions(format!(
            "G is {}x{}, expected {m}x{n}",
            p.g.nrows(),
            p.g.ncols()
        )));
    }

    let sym = 0.5 * (&p.hess + p.hess.transpose());
    let eigs = sym.clone().symmetric_eigenvalues();
    let max_eig = eigs.amax();
    let min_eig = eigs.min();
    if min_eig < -1e-8 * max_eig.max(1.0) {
        return Err(QpError::NotPsd(min_eig));
    }
    let chol = match sym.clone().cholesky() {
        Some(c) => c,
        None => {
            let ridge = 1e-10 * max_eig.max(1.0);
            (sym + DMatrix::identity(n, n) * ridge)
                .cholesky()
                .ok_or(QpError::NotPsd(min_eig))?
        }
    };

    // Normalize constraint rows so violation tolerances are scale-free.
    // Zero rows are vacuous or immediately contradictory.
    let mut rows: Vec<DVector<f64>> = Vec::with_capacity(m);
    let mut rhs: Vec<f64> = Vec::with_capacity(m);
    let mut scale: Vec<f64> = Vec::with_capacity(m);
    let mut row_index: Vec<usize> = Vec::with_capacity(m);
    for i in 0..m {
        let r = p.g.row(i).transpose();
        let nrm = r.norm();
        if nrm <= 1e-14 {
            if p.h[i] < -FEAS_TOL {
                return Ok(QpSolution {
                    status: QpStatus::Infeasible,
                    z: -chol.solve(&p.grad),
                    objective: f64::NAN,
                    kkt_residual: f64::INFINITY,
                });
            }
            continue;
        }
        rows.push(r / nrm);
        rhs.push(p.h[i] / nrm);
        scale.push(nrm);
        row_index.push(i);
    }
    let mc = rows.len();

    let mut x = -chol.solve(&p.grad);
    let mut active: Vec<usize> = Vec::new();
    let mut mu_active: Vec<f64> = Vec::new();

    let finish = |x: DVector<f64>, active: &[usize], mu_active: &[f64], status: QpStatus| {
        let mut mu = DVector::zeros(m);
        for (idx, &c) in active.iter().enumerate() {
            // dual of the normalized row maps back through the row norm
            mu[row_index[c]] = mu_active[idx] / scale[c];
        }
        let objective = p.objective(&x);
        let kkt = kkt_residual(p, &x, &mu);
        QpSolution {
            status,
            z: x,
            objective,
            kkt_residual: kkt,
        }
    };

    let max_iter = 50 * (mc + n + 1);
    for _ in 0..max_iter {
        // most violated inactive constraint
        let mut p_idx = usize::MAX;
        let mut worst = FEAS_TOL;
        for c in 0..mc {
            if active.contains(&c) {
                continue;
            }
            let v = rows[c].dot(&x) - rhs[c];
            if v > worst {
                worst = v;
                p_idx = c;
            }
        }
        if p_idx == usize::MAX {
            return Ok(finish(x, &active, &mu_active, QpStatus::Optimal));
        }

        let g_p = &rows[p_idx];
        let mut mu_p = 0.0;

        loop {
            let hz = chol.solve(g_p);
            let hz_dot = g_p.dot(&hz).max(1e-300);

            // project the step onto the active-set null space
            let (z, r) = if active.is_empty() {
                (hz.clone(), DVector::zeros(0))
            } else {
                let na = active.len();
                let mut w = DMatrix::zeros(n, na);
                for (idx, &c) in active.iter().enumerate() {
                    w.set_column(idx, &chol.solve(&rows[c]));
                }
                let mut ga = DMatrix::zeros(na, n);
                for (idx, &c) in active.iter().enumerate() {
                    ga.set_row(idx, &rows[c].transpose());
                }
                let m_mat = &ga * &w;
                let rhs_r = &ga * &hz;
                let r = match m_mat.clone().cholesky() {
                    Some(c) => c.solve(&rhs_r),
                    None => m_mat.lu().solve(&rhs_r).unwrap_or_else(|| rhs_r.clone()),
                };
                (&hz - &w * &r, r)
            };
            let z_dot = g_p.dot(&z);

            // dual blocking step
            let mut t1 = f64::INFINITY;
            let mut blocker = usize::MAX;
            for (idx, &rj) in r.iter().enumerate() {
                if rj > DUAL_TOL {
                    let t = mu_active[idx] / rj;
                    if t < t1 {
                        t1 = t;
                        blocker = idx;
                    }
                }
            }

            if z_dot <= 1e-11 * hz_dot {
                if blocker == usize::MAX {
                    return Ok(finish(x, &active, &mu_active, QpStatus::Infeasible));
                }
                for (idx, &rj) in r.iter().enumerate() {
                    mu_active[idx] -= t1 * rj;
                }
                mu_p += t1;
                active.remove(blocker);
                mu_active.remove(blocker);
                continue;
            }

            let violation = g_p.dot(&x) - rhs[p_idx];
            let t2 = violation / z_dot;
            let t = t1.min(t2);

            x -= t * &z;
            for (idx, &rj) in r.iter().enumerate() {
                mu_active[idx] -= t * rj;
            }
            mu_p += t;

            if t2 <= t1 {
                active.push(p_idx);
                mu_active.push(mu_p);
                break;
            }
            active.remove(blocker);
            mu_active.remove(blocker);
        }
    }

    // No convergence within the iteration budget: report infeasible, which the
    // caller treats as "fall back to the stored safe inputs".
    Ok(finish(x, &active, &mu_active, QpStatus::Infeasible))
}
