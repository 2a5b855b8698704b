//! Solver for one penalized component
//!
//! ```text
//! maximize  αᵀB̂α / (αᵀSα + τ‖α‖²_λ)   s.t.  α̂_lᵀSα = 0 for earlier components l
//! ```
//!
//! Since `αᵀB̂α = max_{‖v‖=1} (vᵀMᵀα)²`, the solver alternates between
//! `v ← Mᵀα/‖Mᵀα‖` and maximizing the linear form `(Mv)ᵀα` over the set
//! `αᵀSα + τ‖α‖²_λ ≤ 1`. The second step is solved through its Lagrangian
//!
//! ```text
//! ½(αᵀSα + τ(1−λ)‖α‖² + τλ‖α‖₁²) − cᵀα
//! ```
//!
//! by cyclic coordinate descent: with the other coordinates fixed, the
//! squared ℓ1 term splits into `α_j²` plus `2(Σ_{i≠j}|α_i|)|α_j|`, so each
//! update is a closed-form soft threshold. The minimizer is proportional to
//! the constrained maximizer and the ratio objective is scale invariant, so
//! the result is rescaled to `αᵀSα = 1` at the end.
//!
//! Orthogonality to earlier components is handled by an augmented
//! Lagrangian on `Gα = 0` (rows of `G` are `Sα̂_l`) inside the coordinate
//! updates, and `M` is replaced by `M − Σ_l Sα̂_l ŵ_lᵀ`, which agrees with `M`
//! on the feasible set. A final S-metric Gram–Schmidt step removes the
//! residual violation.

use super::{ratio_objective, CrossMoment, PenaltyPair, SolverConfig};
use crate::error::{Error, Result};
use crate::numerics::{
    axpy, canonical_sign, dot, norm1, norm2, soft_threshold, spd_solve, thin_svd, Matrix,
    RandomStream, SpdFactor,
};

/// Signal below `EXHAUSTED · ‖M‖²_F` counts as no signal.
const EXHAUSTED: f64 = 1e-14;
/// Inner coordinate-descent tolerance: starts loose and tracks the outer
/// progress, `INNER_TOL_RATIO ×` the last relative change of the objective.
const INNER_TOL_LOOSE: f64 = 1e-5;
const INNER_TOL_TIGHT: f64 = 1e-11;
const INNER_TOL_RATIO: f64 = 1e-3;
const INNER_MAX_SWEEPS: usize = 100;
/// Largest face on which the Newton step is attempted.
const NEWTON_MAX_ACTIVE: usize = 400;
const KKT_SLACK: f64 = 1e-10;
const ACTIVE_MAX_SWEEPS: usize = 50;
const MAX_ESCALATIONS: usize = 6;
const RESTART_SCALE: f64 = 0.1;

#[derive(Debug, Clone, PartialEq)]
pub struct ComponentSolution {
    /// Loading with `αᵀSα = 1`; largest-magnitude entry non-negative.
    pub alpha: Vec<f64>,
    /// `αᵀB̂α`.
    pub mu_hat: f64,
    /// Ratio objective at `alpha`.
    pub objective: f64,
    pub converged: bool,
    pub iterations: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub enum ComponentOutcome {
    Solved(ComponentSolution),
    /// No signal left orthogonal to the earlier components.
    Exhausted,
}

/// Solves for the next component given the earlier loadings `prev`
/// (each with unit S-norm, mutually S-orthogonal).
pub fn solve_component(
    cm: &CrossMoment,
    penalty: &PenaltyPair,
    prev: &[Vec<f64>],
    cfg: &SolverConfig,
) -> Result<ComponentOutcome> {
    cfg.validate()?;
    let p = cm.p();
    for (l, a) in prev.iter().enumerate() {
        if a.len() != p {
            return Err(Error::DimensionMismatch {
                context: "previous loading",
                expected: (p, 1),
                got: (a.len(), 1),
            });
        }
        let norm = cm.s_inner(a, a);
        if (norm - 1.0).abs() > 1e-6 {
            return Err(Error::Consistency(format!(
                "previous loading {l} has S-norm² {norm}, expected 1"
            )));
        }
    }
    let m_norm_sq = cm.m().frobenius_sq();
    if m_norm_sq == 0.0 || p == 0 {
        return Ok(ComponentOutcome::Exhausted);
    }
    let floor = EXHAUSTED * m_norm_sq;

    let problem = Problem::new(cm, penalty, prev)?;
    let gram = problem.md.t_matmul(&problem.md)?;
    let svd = thin_svd(&gram)?;
    let top = svd.singular_values[0];
    if top <= floor {
        return Ok(ComponentOutcome::Exhausted);
    }
    let v0 = svd.v.column(0);
    let c0 = problem.md.mul_vec(&v0);
    let start: Vec<f64> = c0.iter().map(|c| c / (1.0 + penalty.tau)).collect();

    let mut best = problem.run(start.clone(), cfg);
    // With a rank-one deflated moment the direction v is fixed up to sign and
    // the remaining problem is convex, so perturbed restarts cannot help.
    let rank_one = svd.singular_values.get(1).is_none_or(|s| *s <= 1e-12 * top);
    if !rank_one && cfg.restarts > 0 {
        let mut rs = RandomStream::new(cfg.seed, prev.len() as u64);
        let scale = RESTART_SCALE * norm2(&start);
        for _ in 0..cfg.restarts {
            let noise: Vec<f64> = (0..p).map(|_| rs.standard_normal()).collect();
            let nn = norm2(&noise).max(f64::MIN_POSITIVE);
            let mut perturbed = start.clone();
            axpy(scale / nn, &noise, &mut perturbed);
            let cand = problem.run(perturbed, cfg);
            if better(&cand, &best) {
                best = cand;
            }
        }
    }

    if best.mu_hat <= floor {
        return Ok(ComponentOutcome::Exhausted);
    }
    Ok(ComponentOutcome::Solved(best))
}

fn sign_pattern(beta: &[f64]) -> Vec<i8> {
    beta.iter()
        .map(|&b| {
            if b > 0.0 {
                1
            } else if b < 0.0 {
                -1
            } else {
                0
            }
        })
        .collect()
}

fn better(a: &ComponentSolution, b: &ComponentSolution) -> bool {
    let scale = a
        .objective
        .abs()
        .max(b.objective.abs())
        .max(f64::MIN_POSITIVE);
    if (a.objective - b.objective).abs() <= 1e-12 * scale {
        norm1(&a.alpha) < norm1(&b.alpha)
    } else {
        a.objective > b.objective
    }
}

/// Removes the S-projections onto `prev` (twice, for stability) and rescales
/// to unit S-norm.
pub(crate) fn s_gram_schmidt(cm: &CrossMoment, mut alpha: Vec<f64>, prev: &[Vec<f64>]) -> Vec<f64> {
    let s_prev: Vec<Vec<f64>> = prev.iter().map(|a| cm.s_apply(a)).collect();
    project_out(&mut alpha, prev, &s_prev);
    normalize_s(cm, &mut alpha);
    alpha
}

fn project_out(alpha: &mut [f64], prev: &[Vec<f64>], s_prev: &[Vec<f64>]) {
    for _ in 0..2 {
        for (a, sa) in prev.iter().zip(s_prev) {
            let c = dot(sa, alpha);
            if c != 0.0 {
                axpy(-c, a, alpha);
            }
        }
    }
}

fn normalize_s(cm: &CrossMoment, alpha: &mut [f64]) {
    let sn = cm.s_inner(alpha, alpha).sqrt();
    if sn > 0.0 {
        alpha.iter_mut().for_each(|v| *v /= sn);
    }
    if canonical_sign(alpha) < 0.0 {
        alpha.iter_mut().for_each(|v| *v = -*v);
    }
}

struct Problem<'a> {
    cm: &'a CrossMoment,
    penalty: PenaltyPair,
    prev: &'a [Vec<f64>],
    /// `Sα̂_l` for each earlier component.
    s_prev: Vec<Vec<f64>>,
    /// Deflated cross moment.
    md: Matrix,
    /// p × L constraint matrix, row j holds `(Sα̂_l)_j` for all l.
    g: Matrix,
    g_sq: Vec<f64>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum Inner {
    /// Ended on an exact face optimum, feasible for the orthogonality constraints.
    Exact,
    /// Coordinate descent met its tolerance.
    Converged,
    Stalled,
}

struct State {
    beta: Vec<f64>,
    /// `Zβ`
    u: Vec<f64>,
    /// `Gβ`
    pi: Vec<f64>,
    l1: f64,
}

impl<'a> Problem<'a> {
    fn new(cm: &'a CrossMoment, penalty: &PenaltyPair, prev: &'a [Vec<f64>]) -> Result<Self> {
        let p = cm.p();
        let s_prev: Vec<Vec<f64>> = prev.iter().map(|a| cm.s_apply(a)).collect();
        let mut md = cm.m().clone();
        for (a, sa) in prev.iter().zip(&s_prev) {
            let w = cm.m().t_mul_vec(a);
            for (j, &s) in sa.iter().enumerate() {
                if s != 0.0 {
                    axpy(-s, &w, md.row_mut(j));
                }
            }
        }
        let g = Matrix::from_fn(p, prev.len(), |j, l| s_prev[l][j]);
        let g_sq = (0..p).map(|j| dot(g.row(j), g.row(j))).collect();
        Ok(Self {
            cm,
            penalty: *penalty,
            prev,
            s_prev,
            md,
            g,
            g_sq,
        })
    }

    fn state(&self, beta: Vec<f64>) -> State {
        let u = self.cm.z_apply(&beta);
        let pi = self.g.t_mul_vec(&beta);
        let l1 = norm1(&beta);
        State { beta, u, pi, l1 }
    }

    /// One coordinate update; returns the absolute change.
    #[inline]
    fn update(&self, j: usize, c: &[f64], nu: &[f64], rho: f64, st: &mut State) -> f64 {
        let tau = self.penalty.tau;
        let zj = self.cm.zt().row(j);
        let d = self.cm.s_diag()[j];
        let old = st.beta[j];
        let curvature = d + tau + rho * self.g_sq[j];
        if curvature <= 0.0 {
            return 0.0;
        }
        let mut grad_rest = dot(zj, &st.u) - d * old;
        if !nu.is_empty() {
            let gj = self.g.row(j);
            grad_rest += dot(gj, nu) + rho * (dot(gj, &st.pi) - self.g_sq[j] * old);
        }
        let others_l1 = (st.l1 - old.abs()).max(0.0);
        let new =
            soft_threshold(c[j] - grad_rest, tau * self.penalty.lambda * others_l1) / curvature;
        let delta = new - old;
        if delta != 0.0 {
            axpy(delta, zj, &mut st.u);
            if !nu.is_empty() {
                axpy(delta, self.g.row(j), &mut st.pi);
            }
            st.l1 += new.abs() - old.abs();
            st.beta[j] = new;
        }
        delta.abs()
    }

    /// Coordinate descent on the Lagrangian for linear term `c`. Once a full
    /// sweep leaves the sign pattern unchanged, or coordinate descent has
    /// converged under constraints, an exact Newton step on that face is tried.
    fn inner_solve(&self, c: &[f64], nu: &mut [f64], rho: f64, tol: f64, st: &mut State) -> Inner {
        let p = self.cm.p();
        let constrained = !nu.is_empty();
        let mut pattern = sign_pattern(&st.beta);
        for _ in 0..INNER_MAX_SWEEPS {
            st.l1 = norm1(&st.beta);
            let mut max_delta = 0.0f64;
            for j in 0..p {
                max_delta = max_delta.max(self.update(j, c, nu, rho, st));
            }
            let scale = st
                .beta
                .iter()
                .fold(0.0f64, |m, b| m.max(b.abs()))
                .max(f64::MIN_POSITIVE);
            let active: Vec<usize> = (0..p).filter(|&j| st.beta[j] != 0.0).collect();
            let current = sign_pattern(&st.beta);
            let settled = max_delta <= tol * scale;
            if (current == pattern || (settled && constrained))
                && self.newton_step(&active, c, nu, rho, st)
            {
                return Inner::Exact;
            }
            if settled {
                return Inner::Converged;
            }
            pattern = current;
            if active.len() == p {
                continue;
            }
            for _ in 0..ACTIVE_MAX_SWEEPS {
                let mut max_delta = 0.0f64;
                for &j in &active {
                    max_delta = max_delta.max(self.update(j, c, nu, rho, st));
                }
                if max_delta <= tol * scale {
                    break;
                }
            }
        }
        Inner::Stalled
    }

    /// Minimizes the Lagrangian over the face with the current signs on
    /// `active` and zeros elsewhere, subject to `G_Aᵀβ_A = 0`. On the face the
    /// objective is a quadratic with Hessian `H = S_AA + τ(1−λ)I + τλ s sᵀ`, so
    /// the minimizer and the multipliers `η` solve
    ///
    /// ```text
    /// [H    G_A] [β_A]   [c_A]
    /// [G_Aᵀ  0 ] [ η ] = [ 0 ]
    /// ```
    ///
    /// Moves to the minimizer (adopting `η` as `ν`), or as far towards it as
    /// the signs allow. Returns true when the minimizer keeps its signs and
    /// satisfies the optimality conditions off the face.
    fn newton_step(
        &self,
        active: &[usize],
        c: &[f64],
        nu: &mut [f64],
        rho: f64,
        st: &mut State,
    ) -> bool {
        let k = active.len();
        let constraints = nu.len();
        if k == 0 || k > NEWTON_MAX_ACTIVE || k < constraints {
            return false;
        }
        let (tau, lambda) = (self.penalty.tau, self.penalty.lambda);
        let zt = self.cm.zt();
        let signs: Vec<f64> = active.iter().map(|&j| st.beta[j].signum()).collect();
        let mut h = vec![0.0; k * k];
        for a in 0..k {
            let ja = active[a];
            for b in 0..=a {
                let v = dot(zt.row(ja), zt.row(active[b])) + tau * lambda * signs[a] * signs[b];
                h[a * k + b] = v;
                h[b * k + a] = v;
            }
            h[a * k + a] += tau * (1.0 - lambda);
        }
        let Some(factor) = SpdFactor::new(&h, k) else {
            return false;
        };
        let c_a: Vec<f64> = active.iter().map(|&j| c[j]).collect();
        let mut target = factor.solve(&c_a);
        let mut eta = vec![0.0; constraints];
        if constraints > 0 {
            let g_cols: Vec<Vec<f64>> = (0..constraints)
                .map(|l| active.iter().map(|&j| self.g[(j, l)]).collect())
                .collect();
            let h_inv_g: Vec<Vec<f64>> = g_cols.iter().map(|g| factor.solve(g)).collect();
            let mut schur = vec![0.0; constraints * constraints];
            for l in 0..constraints {
                for m in 0..constraints {
                    schur[l * constraints + m] = dot(&g_cols[l], &h_inv_g[m]);
                }
            }
            let rhs: Vec<f64> = g_cols.iter().map(|g| dot(g, &target)).collect();
            let Some(sol) = spd_solve(&schur, constraints, &rhs) else {
                return false;
            };
            for (e, x) in sol.iter().zip(&h_inv_g) {
                axpy(-e, x, &mut target);
            }
            eta = sol;
        }

        let mut step = 1.0f64;
        let mut blocking = None;
        for (a, &j) in active.iter().enumerate() {
            if target[a] * signs[a] <= 0.0 {
                let t = st.beta[j] / (st.beta[j] - target[a]);
                if t < step {
                    step = t;
                    blocking = Some(a);
                }
            }
        }
        let mut beta = st.beta.clone();
        for (a, &j) in active.iter().enumerate() {
            beta[j] += step * (target[a] - beta[j]);
        }
        if let Some(a) = blocking {
            beta[active[a]] = 0.0;
        }
        *st = self.state(beta);
        if blocking.is_some() {
            return false;
        }
        nu.copy_from_slice(&eta);

        // Off the face: |∂_j smooth part| ≤ τλ‖β‖₁.
        let grad = zt.mul_vec(&st.u);
        let bound = tau * lambda * st.l1;
        let scale = c
            .iter()
            .fold(0.0f64, |m, v| m.max(v.abs()))
            .max(f64::MIN_POSITIVE);
        (0..self.cm.p()).filter(|&j| st.beta[j] == 0.0).all(|j| {
            let mut g = c[j] - grad[j];
            if constraints > 0 {
                let gj = self.g.row(j);
                g -= dot(gj, nu) + rho * dot(gj, &st.pi);
            }
            g.abs() <= bound + KKT_SLACK * scale
        })
    }

    fn constraint_value(&self, st: &State) -> f64 {
        dot(&st.u, &st.u) + self.penalty.tau * self.penalty.norm_sq(&st.beta)
    }

    fn run(&self, start: Vec<f64>, cfg: &SolverConfig) -> ComponentSolution {
        let constrained = !self.prev.is_empty();
        let mut st = self.state(start);
        let mut nu = vec![0.0; self.prev.len()];
        let mut rho = if constrained {
            cfg.ortho_penalty_start * (1.0 + self.penalty.tau)
        } else {
            0.0
        };
        let mut escalations = 0;
        let mut prev_violation = f64::INFINITY;
        let mut prev_f: Option<f64> = None;
        let mut converged = false;
        let mut iterations = 0;
        let final_tol = (cfg.tol * INNER_TOL_RATIO).max(INNER_TOL_TIGHT);
        let mut inner_tol = INNER_TOL_LOOSE.max(final_tol);

        for it in 1..=cfg.max_outer_iters {
            iterations = it;
            let h = self.md.t_mul_vec(&st.beta);
            let hn = norm2(&h);
            if hn == 0.0 {
                break;
            }
            let v: Vec<f64> = h.iter().map(|x| x / hn).collect();
            let c = self.md.mul_vec(&v);
            let inner = self.inner_solve(&c, &mut nu, rho, inner_tol, &mut st);
            let inner_ok = inner != Inner::Stalled;

            let s_norm = norm2(&st.u).max(f64::MIN_POSITIVE);
            let violation = st.pi.iter().fold(0.0f64, |m, x| m.max(x.abs())) / s_norm;
            if constrained {
                for (nl, pl) in nu.iter_mut().zip(&st.pi) {
                    *nl += rho * pl;
                }
                if inner != Inner::Exact
                    && violation > 0.25 * prev_violation
                    && violation > cfg.ortho_tol
                    && escalations < MAX_ESCALATIONS
                {
                    rho *= 10.0;
                    escalations += 1;
                }
                prev_violation = violation;
            }

            let hd = self.md.t_mul_vec(&st.beta);
            let f = dot(&hd, &hd) / self.constraint_value(&st).max(f64::MIN_POSITIVE);
            if let Some(pf) = prev_f {
                let rel = (f - pf).abs() / f.abs().max(f64::MIN_POSITIVE);
                if rel <= cfg.tol
                    && inner_ok
                    && inner_tol <= final_tol
                    && violation <= cfg.ortho_tol
                {
                    converged = true;
                    break;
                }
                inner_tol = (rel * INNER_TOL_RATIO).clamp(final_tol, inner_tol);
            }
            prev_f = Some(f);
        }

        let mut alpha = st.beta;
        if constrained {
            project_out(&mut alpha, self.prev, &self.s_prev);
        }
        normalize_s(self.cm, &mut alpha);
        let mu_hat = self.cm.b_quadratic(&alpha);
        let objective = ratio_objective(self.cm, &self.penalty, &alpha);
        ComponentSolution {
            alpha,
            mu_hat,
            objective,
            converged,
            iterations,
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::extractor::cross_moment;

    /// Design with `S = I` (orthonormal, centered columns scaled by √n) and
    /// responses chosen so that the cross moment equals `m`.
    pub(crate) fn design_with_moment(m: &Matrix, n: usize) -> (Matrix, Matrix) {
        let p = m.rows();
        assert!(n > p);
        // Centered Helmert-like orthonormal columns.
        let mut cols: Vec<Vec<f64>> = Vec::new();
        for k in 0..p {
            let mut v: Vec<f64> = (0..n)
                .map(|i| ((i + 1) as f64 * (k + 1) as f64 * 0.7).sin())
                .collect();
            let mean = v.iter().sum::<f64>() / n as f64;
            v.iter_mut().for_each(|x| *x -= mean);
            for c in &cols {
                let d = dot(c, &v);
                axpy(-d, c, &mut v);
            }
            let nv = norm2(&v);
            v.iter_mut().for_each(|x| *x /= nv);
            cols.push(v);
        }
        let root_n = (n as f64).sqrt();
        let x = Matrix::from_fn(n, p, |i, j| cols[j][i] * root_n);
        let y = x.matmul(m).unwrap();
        (x, y)
    }

    #[test]
    fn unpenalized_eigenproblem() {
        // B̂ = M Mᵀ = diag(3, 1, 0).
        let m = Matrix::from_rows(&[vec![3f64.sqrt(), 0.0], vec![0.0, 1.0], vec![0.0, 0.0]]);
        let (x, y) = design_with_moment(&m, 12);
        let cm = cross_moment(&x, &y).unwrap();
        let pen = PenaltyPair::new(0.0, 0.0).unwrap();
        let sol = match solve_component(&cm, &pen, &[], &SolverConfig::default()).unwrap() {
            ComponentOutcome::Solved(s) => s,
            ComponentOutcome::Exhausted => panic!("exhausted"),
        };
        assert!((sol.mu_hat - 3.0).abs() < 1e-8, "{}", sol.mu_hat);
        assert!((sol.alpha[0] - 1.0).abs() < 1e-6);
        assert!(sol.alpha[1].abs() < 1e-4 && sol.alpha[2].abs() < 1e-6);

        let second =
            match solve_component(&cm, &pen, &[sol.alpha.clone()], &SolverConfig::default())
                .unwrap()
            {
                ComponentOutcome::Solved(s) => s,
                ComponentOutcome::Exhausted => panic!("exhausted"),
            };
        assert!((second.mu_hat - 1.0).abs() < 1e-8);
        assert!(cm.s_inner(&sol.alpha, &second.alpha).abs() < 1e-12);

        let third = solve_component(
            &cm,
            &pen,
            &[sol.alpha.clone(), second.alpha.clone()],
            &SolverConfig::default(),
        )
        .unwrap();
        assert_eq!(third, ComponentOutcome::Exhausted);
    }

    #[test]
    fn zero_moment_is_exhausted() {
        let (x, _) = design_with_moment(&Matrix::zeros(2, 1), 5);
        let y = Matrix::from_fn(5, 1, |_, _| 2.0);
        let cm = cross_moment(&x, &y).unwrap();
        let pen = PenaltyPair::new(1.0, 0.5).unwrap();
        assert_eq!(
            solve_component(&cm, &pen, &[], &SolverConfig::default()).unwrap(),
            ComponentOutcome::Exhausted
        );
    }

    #[test]
    fn rejects_unnormalized_previous() {
        let m = Matrix::from_rows(&[vec![1.0], vec![0.5]]);
        let (x, y) = design_with_moment(&m, 6);
        let cm = cross_moment(&x, &y).unwrap();
        let pen = PenaltyPair::new(0.1, 0.1).unwrap();
        let err = solve_component(&cm, &pen, &[vec![2.0, 0.0]], &SolverConfig::default());
        assert!(matches!(err, Err(Error::Consistency(_))));
    }
}
