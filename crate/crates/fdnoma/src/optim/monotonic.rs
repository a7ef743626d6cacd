//! Globally optimal power allocation by polyblock outer approximation.
//!
//! The throughput problem is rewritten over `z_d = 1 + SINR_d`: maximize
//! `sum_d w_d log2(z_d)` over the normal set of jointly achievable `z`.
//! Membership is decided by a fixed-point power-control oracle, and the
//! polyblock loop shrinks an outer approximation of that set until the gap
//! between its best vertex and the best feasible point found is below the
//! solver tolerance.
//!
//! Every SINR here is a ratio of a linear to an affine function of the power
//! vector, increasing in the own power and non-increasing in all others; that
//! monotone structure is exactly what makes the oracle and the outer
//! approximation sound.

use crate::link::SinrModel;
use crate::model::{PolyblockTraceRow, PowerAllocation, SimConfig, SolverResult, SolverTrace};

/// Fixed-point iteration budget of the feasibility oracle.
const FP_MAX_ITERS: usize = 10_000;
/// Componentwise relative convergence threshold of the oracle.
const FP_REL_TOL: f64 = 1e-9;
/// Bisection tolerance of the boundary projection, in the ray parameter.
const PROJECT_LAMBDA_TOL: f64 = 1e-6;
/// Hard cap on bisection steps (each step is one oracle call).
const PROJECT_MAX_STEPS: usize = 80;

/// Outcome of the SINR-target feasibility oracle.
#[derive(Debug, Clone, PartialEq)]
pub enum Feasibility {
    /// Targets are jointly achievable; carries the componentwise-minimal
    /// power vector that meets them with equality.
    Feasible(Vec<f64>),
    Infeasible,
    /// Iteration budget exhausted before a verdict; callers treat this as
    /// infeasible.
    Undecided,
}

impl Feasibility {
    pub fn is_feasible(&self) -> bool {
        matches!(self, Feasibility::Feasible(_))
    }
}

/// Decide whether per-user SINR targets are jointly achievable inside the
/// power caps. The underlying iteration `p <- T(p)` sets every user's power
/// to exactly meet its target given the others' interference; started from
/// zero it increases componentwise toward the minimal solution, so the first
/// cap violation certifies infeasibility.
///
/// Since the map is affine, the limit is computed directly by a small linear
/// solve whenever the spectral radius of the coupling matrix can be
/// certified away from 1 (Collatz-Wielandt bounds on a nonnegative matrix);
/// otherwise the plain monotone iteration decides.
pub fn sinr_targets_feasible(model: &SinrModel, gamma: &[f64]) -> Feasibility {
    assert_eq!(gamma.len(), model.n_users());
    debug_assert!(gamma.iter().all(|&g| g >= 0.0));

    // Active users: zero targets pin their power to zero.
    let active: Vec<usize> = (0..model.n_users()).filter(|&d| gamma[d] > 0.0).collect();
    if active.is_empty() {
        return Feasibility::Feasible(vec![0.0; model.n_vars()]);
    }
    let m = active.len();
    // p_i = sum_j a[i][j] p_j + b_i over the active block.
    let mut a = vec![vec![0.0; m]; m];
    let mut b = vec![0.0; m];
    for (i, &d) in active.iter().enumerate() {
        let row = &model.rows[d];
        let scale = gamma[d] / row.own_gain;
        b[i] = scale * model.noise_w;
        for (j, &e) in active.iter().enumerate() {
            a[i][j] = scale * row.c_total[model.rows[e].var];
        }
    }

    match certify_spectral_radius(&a, &b) {
        SpectralVerdict::Contractive => {
            if let Some(p_active) = solve_linear(&a, &b) {
                // Guard the solve against conditioning; the verified limit
                // must reproduce itself under the affine map.
                let ok = p_active.iter().enumerate().all(|(i, &pi)| {
                    let ti: f64 =
                        b[i] + a[i].iter().zip(&p_active).map(|(&aij, &pj)| aij * pj).sum::<f64>();
                    pi >= 0.0 && (ti - pi).abs() <= 1e-7 * pi.abs().max(1e-300)
                });
                if ok {
                    let mut x = vec![0.0; model.n_vars()];
                    for (i, &d) in active.iter().enumerate() {
                        x[model.rows[d].var] = p_active[i];
                    }
                    return if within_caps(model, &x) {
                        Feasibility::Feasible(x)
                    } else {
                        // The componentwise-minimal solution violates a cap.
                        Feasibility::Infeasible
                    };
                }
            }
            iterate_to_fixed_point(model, gamma)
        }
        SpectralVerdict::Expansive => Feasibility::Infeasible,
        SpectralVerdict::Unclear => iterate_to_fixed_point(model, gamma),
    }
}

enum SpectralVerdict {
    Contractive,
    Expansive,
    Unclear,
}

/// Collatz-Wielandt bracketing of the spectral radius of the nonnegative
/// coupling matrix: for any positive vector v, min_i (Av)_i/v_i <= rho <=
/// max_i (Av)_i/v_i. Power iterations tighten both sides.
fn certify_spectral_radius(a: &[Vec<f64>], b: &[f64]) -> SpectralVerdict {
    let m = b.len();
    let mut v: Vec<f64> = b.to_vec(); // strictly positive
    for _ in 0..64 {
        let mut w = vec![0.0; m];
        for i in 0..m {
            w[i] = a[i].iter().zip(&v).map(|(&aij, &vj)| aij * vj).sum();
        }
        let mut hi: f64 = 0.0;
        let mut lo = f64::INFINITY;
        for i in 0..m {
            if v[i] > 0.0 {
                let r = w[i] / v[i];
                hi = hi.max(r);
                lo = lo.min(r);
            }
        }
        if hi < 0.9999 {
            return SpectralVerdict::Contractive;
        }
        if lo > 1.0001 {
            return SpectralVerdict::Expansive;
        }
        let norm: f64 = w.iter().sum();
        if norm <= 0.0 {
            // Nilpotent coupling: no interference feedback at all.
            return SpectralVerdict::Contractive;
        }
        // Keep strictly positive for the next bracket.
        let floor = 1e-300;
        for (vi, &wi) in v.iter_mut().zip(&w) {
            *vi = (wi / norm).max(floor);
        }
    }
    SpectralVerdict::Unclear
}

/// Dense LU solve of `(I - A) p = b` with partial pivoting.
fn solve_linear(a: &[Vec<f64>], b: &[f64]) -> Option<Vec<f64>> {
    let m = b.len();
    let mut mat: Vec<Vec<f64>> = (0..m)
        .map(|i| {
            (0..m)
                .map(|j| if i == j { 1.0 - a[i][j] } else { -a[i][j] })
                .collect()
        })
        .collect();
    let mut rhs = b.to_vec();
    for col in 0..m {
        let pivot = (col..m)
            .max_by(|&i, &j| mat[i][col].abs().partial_cmp(&mat[j][col].abs()).unwrap())?;
        if mat[pivot][col].abs() < 1e-300 {
            return None;
        }
        mat.swap(col, pivot);
        rhs.swap(col, pivot);
        for rowi in col + 1..m {
            let f = mat[rowi][col] / mat[col][col];
            if f == 0.0 {
                continue;
            }
            for c in col..m {
                mat[rowi][c] -= f * mat[col][c];
            }
            rhs[rowi] -= f * rhs[col];
        }
    }
    let mut p = vec![0.0; m];
    for i in (0..m).rev() {
        let mut acc = rhs[i];
        for j in i + 1..m {
            acc -= mat[i][j] * p[j];
        }
        p[i] = acc / mat[i][i];
        if !p[i].is_finite() {
            return None;
        }
    }
    Some(p)
}

fn within_caps(model: &SinrModel, x: &[f64]) -> bool {
    let slack = crate::link::CAP_REL_TOL;
    if x.iter()
        .zip(&model.bounds.var_cap)
        .any(|(&v, &cap)| v > cap * (1.0 + slack))
    {
        return false;
    }
    for vars in &model.bounds.cell_dl_vars {
        let sum: f64 = vars.iter().map(|&i| x[i]).sum();
        if sum > model.bounds.cell_dl_cap_w * (1.0 + slack) {
            return false;
        }
    }
    true
}

/// Plain monotone Jacobi iteration from zero; the decision path for targets
/// too close to the feasibility boundary to certify spectrally.
fn iterate_to_fixed_point(model: &SinrModel, gamma: &[f64]) -> Feasibility {
    let n_vars = model.n_vars();
    let caps = &model.bounds.var_cap;
    let cell_cap = model.bounds.cell_dl_cap_w;
    let slack = crate::link::CAP_REL_TOL;

    let mut x = vec![0.0; n_vars];
    let mut x_new = vec![0.0; n_vars];
    for _ in 0..FP_MAX_ITERS {
        for (row_idx, row) in model.rows.iter().enumerate() {
            let g = gamma[row_idx];
            x_new[row.var] = if g == 0.0 {
                0.0
            } else {
                g * (model.noise_w + model.interference_w(row_idx, &x)) / row.own_gain
            };
        }
        if x_new
            .iter()
            .zip(caps)
            .any(|(&v, &cap)| v > cap * (1.0 + slack))
        {
            return Feasibility::Infeasible;
        }
        for vars in &model.bounds.cell_dl_vars {
            let sum: f64 = vars.iter().map(|&i| x_new[i]).sum();
            if sum > cell_cap * (1.0 + slack) {
                return Feasibility::Infeasible;
            }
        }
        let converged = x_new
            .iter()
            .zip(&x)
            .all(|(&a, &b)| (a - b).abs() <= FP_REL_TOL * a.abs().max(1e-300));
        std::mem::swap(&mut x, &mut x_new);
        if converged {
            return Feasibility::Feasible(x);
        }
    }
    Feasibility::Undecided
}

/// Weighted objective of the monotonic reformulation, `sum_d w_d log2(z_d)`.
pub fn phi(model: &SinrModel, z: &[f64]) -> f64 {
    model
        .rows
        .iter()
        .zip(z)
        .map(|(r, &zd)| r.weight * zd.log2())
        .sum()
}

fn gamma_of(z: &[f64]) -> Vec<f64> {
    z.iter().map(|&zd| (zd - 1.0).max(0.0)).collect()
}

/// Projection of a vertex toward the feasible boundary along the ray from
/// `z_lb` through the vertex.
#[derive(Debug, Clone)]
pub struct Projection {
    /// Last ray point whose shell-inflated targets were accepted; its oracle
    /// point `x` over-achieves it by the shell factor.
    pub y: Vec<f64>,
    /// Cut corner: the infeasible bracket end of the shell-inflated test.
    /// It sits at least one shell factor above the true boundary, so cutting
    /// the open box above it removes no point of the shrunk region and
    /// leaves cuts with a guaranteed minimum thickness.
    pub y_cut: Vec<f64>,
    /// Oracle power vector; achieves `y` scaled up by `(1 + shell)`.
    pub x: Vec<f64>,
    /// Ray parameter of `y` (1 when the vertex itself passes the test).
    pub lambda: f64,
}

/// Targets for membership of `z` in the shell-shrunk feasible region:
/// `z` passes iff `z_lb + (1 + shell)(z - z_lb)` is jointly achievable. The
/// inflation applies to the excess over the rate floor, so a user sitting at
/// its floor (zero excess rate) is never forced to transmit.
fn gamma_shrunk(z: &[f64], z_lb: &[f64], shell: f64) -> Vec<f64> {
    z.iter()
        .zip(z_lb)
        .map(|(&zd, &lb)| (lb + (1.0 + shell) * (zd - lb) - 1.0).max(0.0))
        .collect()
}

/// Bisection over the ray `z(l) = z_lb + l (v - z_lb)`, `l` in [0, 1],
/// against the shell-shrunk region.
///
/// Requires `z_lb` feasible in the true region (`x_lb` is its oracle
/// witness); with `shell = 0` this is the plain boundary projection.
pub fn project_to_boundary(
    model: &SinrModel,
    z_lb: &[f64],
    x_lb: &[f64],
    v: &[f64],
    shell: f64,
) -> Projection {
    let point = |l: f64| -> Vec<f64> {
        z_lb.iter()
            .zip(v)
            .map(|(&a, &b)| a + l * (b - a))
            .collect()
    };
    if let Feasibility::Feasible(x) = sinr_targets_feasible(model, &gamma_shrunk(v, z_lb, shell)) {
        return Projection {
            y: v.to_vec(),
            y_cut: v.to_vec(),
            x,
            lambda: 1.0,
        };
    }
    let mut lo = 0.0f64;
    let mut hi = 1.0f64;
    let mut x_lo = x_lb.to_vec();
    for _ in 0..PROJECT_MAX_STEPS {
        if hi - lo <= PROJECT_LAMBDA_TOL {
            break;
        }
        let mid = 0.5 * (lo + hi);
        match sinr_targets_feasible(model, &gamma_shrunk(&point(mid), z_lb, shell)) {
            Feasibility::Feasible(x) => {
                lo = mid;
                x_lo = x;
            }
            _ => hi = mid,
        }
    }
    Projection {
        y: point(lo),
        y_cut: point(hi),
        x: x_lo,
        lambda: lo,
    }
}

/// Polyblock outer approximation over the monotonic reformulation.
///
/// Initializes one vertex at the per-user single-link upper bound, then
/// repeatedly projects the best vertex onto the feasible boundary, records
/// the achieved point, and replaces the vertex by its children until the
/// upper bound meets the best feasible value within `solver_tol` or the
/// vertex budget runs out.
pub fn solve_polyblock(model: &SinrModel, cfg: &SimConfig) -> SolverResult {
    solve_polyblock_warm(model, cfg, None)
}

/// [`solve_polyblock`] with an optional feasible incumbent power vector that
/// seeds the best value. The bound sequence is unaffected; a good incumbent
/// only tightens pruning and guarantees the returned value never falls below
/// the incumbent's.
pub fn solve_polyblock_warm(
    model: &SinrModel,
    cfg: &SimConfig,
    incumbent: Option<&[f64]>,
) -> SolverResult {
    let n = model.n_users();
    let tol = model.solver_tol;
    // Projections test a shell-shrunk region, so every cut removes a slab of
    // guaranteed thickness instead of thinning out at the boundary (where the
    // bound would stall). Any point of the true region scales down into the
    // shrunk one at an objective cost of at most `sum_w log2(1 + shell)`;
    // sizing that at 0.45 tol and stopping the gap at 0.5 tol keeps the
    // returned value within `tol` of the true optimum.
    let sum_w: f64 = model.rows.iter().map(|r| r.weight).sum();
    let shell = 2f64.powf(0.45 * tol / sum_w) - 1.0;
    let gap_stop = 0.5 * tol;

    let z_lb: Vec<f64> = (0..n).map(|d| 1.0 + model.rate_target_sinr(d)).collect();
    let x_lb = match sinr_targets_feasible(model, &gamma_of(&z_lb)) {
        Feasibility::Feasible(x) => x,
        // Undecided counts as infeasible: the rate demand could not be
        // certified within the iteration budget.
        _ => return SolverResult::infeasible(model.n_dl, model.n_ul),
    };

    // Upper corner: each user alone at its own cap, all other powers zero.
    let z_ub: Vec<f64> = model
        .rows
        .iter()
        .enumerate()
        .map(|(d, r)| {
            let best = 1.0 + model.bounds.var_cap[r.var] * r.own_gain / model.noise_w;
            best.max(z_lb[d])
        })
        .collect();

    let mut cbv = model.objective(&x_lb);
    let mut best_x = x_lb.clone();
    if let Some(x0) = incumbent {
        debug_assert!(model.bounds.check_flat(x0).is_ok());
        let obj0 = model.objective(x0);
        if obj0 > cbv {
            cbv = obj0;
            best_x = x0.to_vec();
        }
    }

    // Vertex slab; `alive` holds slab ids of current vertices.
    let mut slab: Vec<Vec<f64>> = vec![z_ub.clone()];
    let mut phis: Vec<f64> = vec![phi(model, &z_ub)];
    let mut alive: Vec<usize> = vec![0];

    let mut trace = Vec::new();
    let mut iterations = 0usize;
    let mut budget_exhausted = false;

    loop {
        // Lazy prune, then pick the best vertex; ties go to the
        // lexicographically smallest.
        alive.retain(|&id| phis[id] > cbv);
        let Some(&best_id) = alive.iter().reduce(|a, b| {
            if phis[*b] > phis[*a] || (phis[*b] == phis[*a] && slab[*b] < slab[*a]) {
                b
            } else {
                a
            }
        }) else {
            // Every vertex pruned: the bound has collapsed onto cbv.
            trace.push(PolyblockTraceRow {
                iter: iterations,
                upper_bound: cbv,
                cbv,
                n_vertices: 0,
            });
            break;
        };
        let ub = phis[best_id];
        iterations += 1;
        trace.push(PolyblockTraceRow {
            iter: iterations,
            upper_bound: ub,
            cbv,
            n_vertices: alive.len(),
        });
        if ub - cbv <= gap_stop {
            break;
        }

        let v = slab[best_id].clone();
        let proj = project_to_boundary(model, &z_lb, &x_lb, &v, shell);
        debug_assert!(proj
            .y
            .iter()
            .zip(z_lb.iter().zip(&v))
            .all(|(&y, (&lb, &vd))| y >= lb - 1e-12 && y <= vd * (1.0 + 1e-12)));
        let obj = model.objective(&proj.x);
        if obj > cbv {
            // Polish new incumbents with a short minorize-maximize run;
            // boundary projections are good global samples but rarely exact
            // local maxima.
            let (x_pol, obj_pol) = crate::optim::sca::polish(model, &proj.x, 30);
            if obj_pol > obj {
                cbv = obj_pol;
                best_x = x_pol;
            } else {
                cbv = obj;
                best_x = proj.x.clone();
            }
        }

        // Replace the chosen vertex by its children v - (v_d - y_d) e_d.
        // The cut corner is the infeasible bracket end, so only certainly
        // infeasible points are removed; coordinates with no reduction are
        // degenerate and spawn no child.
        alive.retain(|&id| id != best_id);
        for d in 0..n {
            let shrink = v[d] - proj.y_cut[d];
            if shrink <= 1e-12 * v[d].abs().max(1e-300) {
                continue;
            }
            let mut child = v.clone();
            child[d] = proj.y_cut[d];
            debug_assert!(child[d] >= z_lb[d] - 1e-12);
            let child_phi = phi(model, &child);
            if child_phi <= cbv {
                continue;
            }
            // A child below another vertex cannot contain a better point.
            let dominated = alive
                .iter()
                .any(|&id| slab[id].iter().zip(&child).all(|(&a, &b)| b <= a));
            if dominated {
                continue;
            }
            slab.push(child);
            phis.push(child_phi);
            alive.push(slab.len() - 1);
        }
        // The budget counts vertices ever created, which also bounds the
        // number of expansions.
        if slab.len() >= cfg.vertex_budget {
            budget_exhausted = true;
        }
        if budget_exhausted {
            break;
        }
    }

    let objective = model.objective(&best_x);
    SolverResult {
        p: PowerAllocation::from_flat(&best_x, model.n_dl),
        objective_bps_hz: objective,
        feasible: true,
        iterations,
        trace: SolverTrace::Polyblock(trace),
        budget_exhausted,
    }
}
