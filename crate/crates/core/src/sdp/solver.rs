//! Homogeneous self-dual interior-point method with Nesterov-Todd scaling
//! and Mehrotra predictor-corrector steps.
//!
//! The iterate is kept in factored form `X = G Λ Gᵀ`, `S = G⁻ᵀ Λ G⁻¹` with
//! `Λ` diagonal, so the scaled variables `G⁻¹XG⁻ᵀ = GᵀSG = Λ` coincide.
//! Each Newton system is reduced to the Schur complement
//! `M_kl = ⟨A_k, W A_l W⟩` with `W = GGᵀ`. Nonnegative-orthant blocks are
//! expanded into `1 × 1` semidefinite blocks.

use nalgebra::{Cholesky, DMatrix, DVector, SymmetricEigen, SVD};

use super::{inner_dense, preprocess, BlockKind, ConicProgram, Solution, SolverConfig, Status};
use crate::{Error, Result};

const STEP_FRACTION: f64 = 0.99;
/// Iterations without improving the best iterate before giving up.
const STAGNATION_LIMIT: usize = 12;
/// Best iterates within this factor of every tolerance are near-optimal.
const NEAR_OPTIMAL_FACTOR: f64 = 1e3;

/// Constraint data grouped by internal block, symmetric entries listed in
/// both triangles.
struct Internal {
    sizes: Vec<usize>,
    /// `by_block[b]` = list of `(constraint, entries)` touching block `b`.
    by_block: Vec<Vec<(usize, Vec<(usize, usize, f64)>)>>,
    c: Vec<DMatrix<f64>>,
    b: DVector<f64>,
    /// Internal block of each original `(block, diagonal index)`.
    map: Vec<Vec<(usize, usize)>>,
}

impl Internal {
    fn new(p: &ConicProgram) -> Self {
        let mut sizes = Vec::new();
        let mut map: Vec<Vec<(usize, usize)>> = Vec::with_capacity(p.blocks.len());
        for blk in &p.blocks {
            match blk.kind {
                BlockKind::Psd => {
                    map.push((0..blk.size).map(|i| (sizes.len(), i)).collect());
                    sizes.push(blk.size);
                }
                BlockKind::Diag => {
                    map.push((0..blk.size).map(|i| (sizes.len() + i, 0)).collect());
                    sizes.extend(std::iter::repeat_n(1, blk.size));
                }
            }
        }
        let locate = |block: usize, i: usize, j: usize| -> (usize, usize, usize) {
            let (ib, ii) = map[block][i];
            let (_, jj) = map[block][j];
            (ib, ii, jj)
        };
        let mut by_block: Vec<Vec<(usize, Vec<(usize, usize, f64)>)>> = vec![Vec::new(); sizes.len()];
        for (k, a) in p.a.iter().enumerate() {
            for e in a {
                let (ib, i, j) = locate(e.block, e.i, e.j);
                let list = &mut by_block[ib];
                if list.last().is_none_or(|(kk, _)| *kk != k) {
                    list.push((k, Vec::new()));
                }
                let entries = &mut list.last_mut().expect("just pushed").1;
                entries.push((i, j, e.value));
                if i != j {
                    entries.push((j, i, e.value));
                }
            }
        }
        let mut c: Vec<DMatrix<f64>> = sizes.iter().map(|&n| DMatrix::zeros(n, n)).collect();
        for e in &p.c {
            let (ib, i, j) = locate(e.block, e.i, e.j);
            c[ib][(i, j)] += e.value;
            if i != j {
                c[ib][(j, i)] += e.value;
            }
        }
        Self {
            sizes,
            by_block,
            c,
            b: DVector::from_column_slice(&p.b),
            map,
        }
    }

    fn m(&self) -> usize {
        self.b.len()
    }

    fn apply(&self, x: &[DMatrix<f64>]) -> DVector<f64> {
        let mut out = DVector::zeros(self.m());
        for (blk, list) in self.by_block.iter().enumerate() {
            for (k, entries) in list {
                out[*k] += entries.iter().map(|&(i, j, v)| v * x[blk][(i, j)]).sum::<f64>();
            }
        }
        out
    }

    fn adjoint(&self, y: &DVector<f64>) -> Vec<DMatrix<f64>> {
        let mut out: Vec<DMatrix<f64>> = self.sizes.iter().map(|&n| DMatrix::zeros(n, n)).collect();
        for (blk, list) in self.by_block.iter().enumerate() {
            for (k, entries) in list {
                let yk = y[*k];
                if yk != 0.0 {
                    for &(i, j, v) in entries {
                        out[blk][(i, j)] += yk * v;
                    }
                }
            }
        }
        out
    }

    /// Schur complement `M_kl = Σ_blocks tr(A_k W A_l W)`.
    fn schur(&self, w: &[DMatrix<f64>]) -> DMatrix<f64> {
        let m = self.m();
        let mut mat = DMatrix::zeros(m, m);
        for (blk, list) in self.by_block.iter().enumerate() {
            let wb = &w[blk];
            for (ia, (k, ak)) in list.iter().enumerate() {
                for (l, al) in &list[ia..] {
                    let mut acc = 0.0;
                    for &(i, j, u) in ak {
                        for &(p, q, v) in al {
                            acc += u * v * wb[(j, p)] * wb[(q, i)];
                        }
                    }
                    let (r, c) = if k <= l { (*k, *l) } else { (*l, *k) };
                    mat[(r, c)] += acc;
                }
            }
        }
        for r in 0..m {
            for c in 0..r {
                mat[(r, c)] = mat[(c, r)];
            }
        }
        mat
    }
}

#[derive(Clone)]
struct Iterate {
    g: Vec<DMatrix<f64>>,
    ginv: Vec<DMatrix<f64>>,
    lambda: Vec<DVector<f64>>,
    y: DVector<f64>,
    tau: f64,
    kappa: f64,
}

impl Iterate {
    fn x(&self) -> Vec<DMatrix<f64>> {
        self.g
            .iter()
            .zip(&self.lambda)
            .map(|(g, l)| g * DMatrix::from_diagonal(l) * g.transpose())
            .collect()
    }

    fn s(&self) -> Vec<DMatrix<f64>> {
        self.ginv
            .iter()
            .zip(&self.lambda)
            .map(|(gi, l)| gi.transpose() * DMatrix::from_diagonal(l) * gi)
            .collect()
    }
}

struct Direction {
    dx_scaled: Vec<DMatrix<f64>>,
    ds_scaled: Vec<DMatrix<f64>>,
    dy: DVector<f64>,
    dtau: f64,
    dkappa: f64,
}

/// Quantities shared by the predictor and corrector of one iteration.
struct Factored<'a> {
    data: &'a Internal,
    chol: Cholesky<f64, nalgebra::Dyn>,
    schur: DMatrix<f64>,
    w: Vec<DMatrix<f64>>,
    wcw: Vec<DMatrix<f64>>,
    a_minus_b: DVector<f64>,
    q: DVector<f64>,
    c_wcw: f64,
    r_p: DVector<f64>,
    r_d: Vec<DMatrix<f64>>,
    r_g: f64,
}

fn sandwich(w: &DMatrix<f64>, m: &DMatrix<f64>) -> DMatrix<f64> {
    w * m * w
}

impl Factored<'_> {
    fn direction(&self, it: &Iterate, u: &[DMatrix<f64>], r_tau: f64, eta: f64) -> Direction {
        let d = self.data;
        let h: Vec<DMatrix<f64>> = (0..d.sizes.len())
            .map(|k| &it.g[k] * &u[k] * it.g[k].transpose() - sandwich(&self.w[k], &self.r_d[k]) * eta)
            .collect();
        let rhs = &self.r_p * eta - d.apply(&h);
        let p = refine(&self.chol, &self.schur, &rhs);
        let c_h = inner_dense(&d.c, &h);
        let num = -eta * self.r_g - c_h - self.a_minus_b.dot(&p) - r_tau / it.tau;
        let den = self.a_minus_b.dot(&self.q) - self.c_wcw - it.kappa / it.tau;
        let dtau = num / den;
        let dy = &p + &self.q * dtau;
        let dkappa = (r_tau - it.kappa * dtau) / it.tau;
        let mut dy = dy;
        let aty = d.adjoint(&dy);
        let mut dx: Vec<DMatrix<f64>> = (0..d.sizes.len())
            .map(|k| &h[k] + sandwich(&self.w[k], &aty[k]) - &self.wcw[k] * dtau)
            .collect();
        // One refinement round on the primal equation 𝒜dX = η r_p + b dτ;
        // the correction keeps the complementarity equation intact.
        let err = d.apply(&dx) - &d.b * dtau - &self.r_p * eta;
        let delta = -refine(&self.chol, &self.schur, &err);
        let at_delta = d.adjoint(&delta);
        dy += &delta;
        for k in 0..d.sizes.len() {
            dx[k] += sandwich(&self.w[k], &at_delta[k]);
        }
        let aty = d.adjoint(&dy);
        let mut dx_scaled = Vec::with_capacity(d.sizes.len());
        let mut ds_scaled = Vec::with_capacity(d.sizes.len());
        for k in 0..d.sizes.len() {
            let ds = &self.r_d[k] * eta - &aty[k] + &d.c[k] * dtau;
            ds_scaled.push(it.g[k].transpose() * ds * &it.g[k]);
            dx_scaled.push(&it.ginv[k] * &dx[k] * it.ginv[k].transpose());
        }
        Direction {
            dx_scaled,
            ds_scaled,
            dy,
            dtau,
            dkappa,
        }
    }
}

/// Largest `α` with `Λ + α D ⪰ 0` (infinite if never violated).
fn max_step_block(lambda: &DVector<f64>, d: &DMatrix<f64>) -> f64 {
    let n = lambda.len();
    let scaled = DMatrix::from_fn(n, n, |i, j| {
        0.5 * (d[(i, j)] + d[(j, i)]) / (lambda[i] * lambda[j]).sqrt()
    });
    let e = if n == 1 {
        scaled[(0, 0)]
    } else {
        SymmetricEigen::new(scaled).eigenvalues.min()
    };
    if e < 0.0 {
        -1.0 / e
    } else {
        f64::INFINITY
    }
}

fn max_step(it: &Iterate, dir: &Direction) -> f64 {
    let mut alpha = f64::INFINITY;
    for k in 0..it.lambda.len() {
        alpha = alpha
            .min(max_step_block(&it.lambda[k], &dir.dx_scaled[k]))
            .min(max_step_block(&it.lambda[k], &dir.ds_scaled[k]));
    }
    if dir.dtau < 0.0 {
        alpha = alpha.min(-it.tau / dir.dtau);
    }
    if dir.dkappa < 0.0 {
        alpha = alpha.min(-it.kappa / dir.dkappa);
    }
    alpha
}

fn frob(m: &[DMatrix<f64>]) -> f64 {
    m.iter().map(|b| b.norm_squared()).sum::<f64>().sqrt()
}

/// Cholesky with escalating diagonal regularization.
fn factor(mut m: DMatrix<f64>) -> Option<Cholesky<f64, nalgebra::Dyn>> {
    let scale = m.diagonal().amax().max(1e-300);
    let mut reg = 0.0;
    for attempt in 0..4 {
        if attempt > 0 {
            let bump = scale * 1e-14 * 100f64.powi(attempt);
            for i in 0..m.nrows() {
                m[(i, i)] += bump - reg;
            }
            reg = bump;
        }
        if let Some(ch) = Cholesky::new(m.clone()) {
            return Some(ch);
        }
    }
    None
}

/// Solves `M x = rhs` with two steps of iterative refinement.
fn refine(chol: &Cholesky<f64, nalgebra::Dyn>, m: &DMatrix<f64>, rhs: &DVector<f64>) -> DVector<f64> {
    let mut x = chol.solve(rhs);
    for _ in 0..2 {
        let r = rhs - m * &x;
        x += chol.solve(&r);
    }
    x
}

/// Rescales the factorization from new scaled iterates `X̃⁺`, `S̃⁺`.
fn rescale(
    g: &DMatrix<f64>,
    ginv: &DMatrix<f64>,
    x_new: &DMatrix<f64>,
    s_new: &DMatrix<f64>,
) -> Option<(DMatrix<f64>, DMatrix<f64>, DVector<f64>)> {
    let sym = |m: &DMatrix<f64>| (m + m.transpose()) * 0.5;
    let l1 = Cholesky::new(sym(x_new))?.l();
    let l2 = Cholesky::new(sym(s_new))?.l();
    let svd = SVD::new(l2.transpose() * &l1, true, true);
    let v = svd.v_t?.transpose();
    let d = svd.singular_values;
    if d.iter().any(|&s| !(s > 0.0)) {
        return None;
    }
    let n = d.len();
    let d_inv_sqrt = DMatrix::from_diagonal(&d.map(|s| 1.0 / s.sqrt()));
    let d_sqrt = DMatrix::from_diagonal(&d.map(f64::sqrt));
    let l1_inv = l1.solve_lower_triangular(&DMatrix::identity(n, n))?;
    let g_new = g * &l1 * &v * d_inv_sqrt;
    let ginv_new = d_sqrt * v.transpose() * l1_inv * ginv;
    Some((g_new, ginv_new, d))
}

/// Solves a conic program in standard form.
///
/// Linearly dependent constraints are removed first; their duals are
/// reported as zero. Deterministic for identical input. When the method
/// stops short, the best iterate seen is returned with
/// [`Status::NearOptimal`] or [`Status::Stalled`]. The infeasibility
/// statuses carry the normalized certificate instead of a solution.
pub fn solve(program: &ConicProgram, config: &SolverConfig) -> Result<Solution> {
    let reduced = match preprocess(program) {
        Ok(r) => r,
        Err(Error::Infeasible(_)) => return Ok(inconsistent(program)),
        Err(e) => return Err(e),
    };
    let mut sol = solve_reduced(&reduced.program, config)?;
    sol.y = reduced.expand_dual(&sol.y, program.num_constraints());
    Ok(sol)
}

/// Result for an equality system that is inconsistent on its own.
fn inconsistent(program: &ConicProgram) -> Solution {
    Solution {
        status: Status::Infeasible,
        x: program.zero_blocks(),
        s: program.zero_blocks(),
        y: vec![0.0; program.num_constraints()],
        primal_objective: f64::INFINITY,
        dual_objective: f64::INFINITY,
        relative_gap: f64::NAN,
        primal_residual: f64::NAN,
        dual_residual: f64::NAN,
        iterations: 0,
    }
}

fn solve_reduced(program: &ConicProgram, config: &SolverConfig) -> Result<Solution> {
    let data = Internal::new(program);
    let m = data.m();
    let nu: usize = data.sizes.iter().sum();
    let mut it = Iterate {
        g: data.sizes.iter().map(|&n| DMatrix::identity(n, n)).collect(),
        ginv: data.sizes.iter().map(|&n| DMatrix::identity(n, n)).collect(),
        lambda: data.sizes.iter().map(|&n| DVector::from_element(n, 1.0)).collect(),
        y: DVector::zeros(m),
        tau: 1.0,
        kappa: 1.0,
    };
    let norm_b = data.b.norm();
    let norm_c = frob(&data.c);
    let mut iterations = 0;
    let mut status = Status::Stalled;
    let mut small_steps = 0;
    // Best iterate by `max(pres, dres)/feas_tol ∨ gap/gap_tol`.
    let mut best: Option<(f64, Iterate, usize)> = None;
    loop {
        let x = it.x();
        let s = it.s();
        let ax = data.apply(&x);
        let aty = data.adjoint(&it.y);
        let cx = inner_dense(&data.c, &x);
        let by = data.b.dot(&it.y);
        let r_p = &data.b * it.tau - &ax;
        let r_d: Vec<DMatrix<f64>> = (0..data.sizes.len())
            .map(|k| &data.c[k] * it.tau - &aty[k] - &s[k])
            .collect();
        let r_g = cx - by + it.kappa;
        let mu = (inner_dense(&x, &s) + it.tau * it.kappa) / (nu as f64 + 1.0);

        let pres = r_p.norm() / it.tau / (1.0 + norm_b);
        let dres = frob(&r_d) / it.tau / (1.0 + norm_c);
        let (pobj, dobj) = (cx / it.tau, by / it.tau);
        let gap = (pobj - dobj).abs() / (1.0 + pobj.abs() + dobj.abs());
        if pres <= config.feas_tol && dres <= config.feas_tol && gap <= config.gap_tol {
            status = Status::Optimal;
            break;
        }
        let merit = (pres.max(dres) / config.feas_tol).max(gap / config.gap_tol);
        if best.as_ref().is_none_or(|(m, _, _)| merit < *m) {
            best = Some((merit, it.clone(), iterations));
        }
        if by > 0.0 {
            let cert: Vec<DMatrix<f64>> = (0..data.sizes.len()).map(|k| &aty[k] + &s[k]).collect();
            if frob(&cert) / by <= config.feas_tol {
                status = Status::Infeasible;
                break;
            }
        }
        if cx < 0.0 && ax.norm() / -cx <= config.feas_tol {
            status = Status::Unbounded;
            break;
        }
        let stagnant = best
            .as_ref()
            .is_some_and(|(_, _, k)| iterations >= k + STAGNATION_LIMIT);
        if iterations >= config.max_iter || small_steps >= 3 || stagnant {
            break;
        }
        iterations += 1;

        let w: Vec<DMatrix<f64>> = it.g.iter().map(|g| g * g.transpose()).collect();
        let wcw: Vec<DMatrix<f64>> = (0..w.len()).map(|k| sandwich(&w[k], &data.c[k])).collect();
        let schur = data.schur(&w);
        let Some(chol) = factor(schur.clone()) else { break };
        let a = data.apply(&wcw);
        let q = refine(&chol, &schur, &(&a + &data.b));
        let fac = Factored {
            data: &data,
            chol,
            schur,
            c_wcw: inner_dense(&data.c, &wcw),
            a_minus_b: &a - &data.b,
            w,
            wcw,
            q,
            r_p,
            r_d,
            r_g,
        };

        // Predictor.
        let u_aff: Vec<DMatrix<f64>> = it.lambda.iter().map(|l| -DMatrix::from_diagonal(l)).collect();
        let aff = fac.direction(&it, &u_aff, -it.tau * it.kappa, 1.0);
        let alpha_aff = max_step(&it, &aff).min(1.0);
        let sigma = (1.0 - alpha_aff).powi(3).clamp(0.0, 1.0);

        // Corrector.
        let u: Vec<DMatrix<f64>> = (0..it.lambda.len())
            .map(|k| {
                let l = &it.lambda[k];
                let cross = &aff.dx_scaled[k] * &aff.ds_scaled[k];
                let n = l.len();
                DMatrix::from_fn(n, n, |i, j| {
                    let mut r = -0.5 * (cross[(i, j)] + cross[(j, i)]);
                    if i == j {
                        r += sigma * mu - l[i] * l[i];
                    }
                    2.0 * r / (l[i] + l[j])
                })
            })
            .collect();
        let r_tau = -it.tau * it.kappa + sigma * mu - aff.dtau * aff.dkappa;
        let dir = fac.direction(&it, &u, r_tau, 1.0 - sigma);
        let alpha = (STEP_FRACTION * max_step(&it, &dir)).min(1.0);
        if alpha < 1e-10 {
            small_steps += 1;
            continue;
        }

        let mut next_g = Vec::with_capacity(it.g.len());
        let mut next_ginv = Vec::with_capacity(it.g.len());
        let mut next_lambda = Vec::with_capacity(it.g.len());
        let mut ok = true;
        for k in 0..it.g.len() {
            let lam = DMatrix::from_diagonal(&it.lambda[k]);
            let xs = &lam + &dir.dx_scaled[k] * alpha;
            let ss = &lam + &dir.ds_scaled[k] * alpha;
            match rescale(&it.g[k], &it.ginv[k], &xs, &ss) {
                Some((g, gi, l)) => {
                    next_g.push(g);
                    next_ginv.push(gi);
                    next_lambda.push(l);
                }
                None => {
                    ok = false;
                    break;
                }
            }
        }
        if !ok {
            break;
        }
        it.g = next_g;
        it.ginv = next_ginv;
        it.lambda = next_lambda;
        it.y += &dir.dy * alpha;
        it.tau += alpha * dir.dtau;
        it.kappa += alpha * dir.dkappa;
        small_steps = if alpha < 1e-6 { small_steps + 1 } else { 0 };
    }

    if status == Status::Stalled {
        if let Some((merit, b, _)) = best {
            it = b;
            if merit <= NEAR_OPTIMAL_FACTOR {
                status = Status::NearOptimal;
            }
        }
    }
    let x = it.x();
    let s = it.s();
    let scale = match status {
        Status::Infeasible => data.b.dot(&it.y),
        Status::Unbounded => -inner_dense(&data.c, &x),
        _ => it.tau,
    };
    let unscale = |v: Vec<DMatrix<f64>>| -> Vec<DMatrix<f64>> { v.into_iter().map(|b| b / scale).collect() };
    let x_out = gather(program, &data, &unscale(x));
    let s_out = gather(program, &data, &unscale(s));
    let y_out: Vec<f64> = it.y.iter().map(|v| v / scale).collect();
    let mut sol = Solution::evaluate(program, status, x_out, s_out, y_out, iterations);
    let unbounded_value = match status {
        Status::Infeasible => f64::INFINITY,
        Status::Unbounded => f64::NEG_INFINITY,
        _ => return Ok(sol),
    };
    sol.primal_objective = unbounded_value;
    sol.dual_objective = unbounded_value;
    sol.relative_gap = f64::NAN;
    Ok(sol)
}

/// Reassembles internal blocks into the program's block layout.
fn gather(program: &ConicProgram, data: &Internal, blocks: &[DMatrix<f64>]) -> Vec<DMatrix<f64>> {
    program
        .blocks
        .iter()
        .enumerate()
        .map(|(b, blk)| match blk.kind {
            BlockKind::Psd => blocks[data.map[b][0].0].clone(),
            BlockKind::Diag => {
                let d: Vec<f64> = (0..blk.size).map(|i| blocks[data.map[b][i].0][(0, 0)]).collect();
                DMatrix::from_diagonal(&DVector::from_vec(d))
            }
        })
        .collect()
}
