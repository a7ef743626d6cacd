//! Suboptimal power allocation via successive convex approximation.
//!
//! The objective splits as a difference of two concave functions,
//! `sum_d w_d log2(S_d + N0 + I_d) - sum_d w_d log2(N0 + I_d)`. Each outer
//! iteration linearizes the subtracted term at the current iterate, which
//! yields a concave minorant that is tight there; maximizing the minorant
//! can only increase the true objective. The inner maximization runs
//! projected gradient ascent with backtracking over the power caps, adding a
//! log barrier for the linearized minimum-rate constraints when a rate
//! demand is active.

use crate::link::SinrModel;
use crate::model::{PowerAllocation, ScaTraceRow, SimConfig, SolverResult, SolverTrace};
use crate::optim::monotonic::{sinr_targets_feasible, Feasibility};

use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

const LN2: f64 = std::f64::consts::LN_2;
/// Inner projected-gradient residual target (normalized variables).
const PG_TOL: f64 = 1e-7;
/// Inner iteration cap per subproblem stage.
const PG_MAX_ITERS: usize = 4000;
/// Outer SCA iteration cap.
const SCA_MAX_ITERS: usize = 500;
/// Barrier schedule for active rate constraints.
const BARRIER_MU: [f64; 4] = [1e-2, 1e-4, 1e-6, 1e-8];

/// First-order expansion of the subtracted concave term at a reference point.
#[derive(Debug, Clone)]
pub struct DcSurrogate {
    pub p_ref: Vec<f64>,
    /// `sum_d w_d log2(N0 + I_d(p_ref))`.
    pub lin_const: f64,
    /// Its gradient at `p_ref`.
    pub lin_grad: Vec<f64>,
    /// Per-user `N0 + I_d(p_ref)`, kept for diagnostics.
    pub denom_ref: Vec<f64>,
}

/// Exact first-order expansion of `sum_d w_d log2(N0 + I_d(p))` at `p_ref`;
/// the gradient is analytic from the affine interference coefficients.
pub fn build_surrogate(model: &SinrModel, p_ref: &[f64]) -> DcSurrogate {
    let n_vars = model.n_vars();
    let mut lin_const = 0.0;
    let mut lin_grad = vec![0.0; n_vars];
    let mut denom_ref = Vec::with_capacity(model.n_users());
    for (d, row) in model.rows.iter().enumerate() {
        let denom = model.noise_w + model.interference_w(d, p_ref);
        denom_ref.push(denom);
        lin_const += row.weight * denom.log2();
        let scale = row.weight / (denom * LN2);
        for (g, &c) in lin_grad.iter_mut().zip(&row.c_total) {
            *g += scale * c;
        }
    }
    DcSurrogate {
        p_ref: p_ref.to_vec(),
        lin_const,
        lin_grad,
        denom_ref,
    }
}

/// Surrogate objective value; a concave minorant of the true objective that
/// is tight at the reference point.
pub fn surrogate_value(model: &SinrModel, s: &DcSurrogate, x: &[f64]) -> f64 {
    let mut val = 0.0;
    for (d, row) in model.rows.iter().enumerate() {
        let total = model.signal_w(d, x) + model.noise_w + model.interference_w(d, x);
        val += row.weight * total.log2();
    }
    let lin: f64 = s
        .lin_grad
        .iter()
        .zip(x.iter().zip(&s.p_ref))
        .map(|(&g, (&xi, &ri))| g * (xi - ri))
        .sum();
    val - s.lin_const - lin
}

/// Analytic gradient of the surrogate.
pub fn surrogate_grad(model: &SinrModel, s: &DcSurrogate, x: &[f64]) -> Vec<f64> {
    let mut grad = vec![0.0; model.n_vars()];
    for (d, row) in model.rows.iter().enumerate() {
        let total = model.signal_w(d, x) + model.noise_w + model.interference_w(d, x);
        let scale = row.weight / (total * LN2);
        grad[row.var] += scale * row.own_gain;
        for (g, &c) in grad.iter_mut().zip(&row.c_total) {
            *g += scale * c;
        }
    }
    for (g, &lg) in grad.iter_mut().zip(&s.lin_grad) {
        *g -= lg;
    }
    grad
}

/// Euclidean projection onto the feasible set in normalized units
/// `u = x / cap`: per cell, onto `{0 <= u_i <= 1, sum cap_i u_i <= C}` via
/// bisection on the dual variable (the box clamp must happen inside the dual
/// search, not before it); remaining coordinates are plain box clamps.
fn project(model: &SinrModel, u: &mut [f64]) {
    let caps = &model.bounds.var_cap;
    let cell_cap = model.bounds.cell_dl_cap_w;
    for vars in &model.bounds.cell_dl_vars {
        let y: Vec<f64> = vars.iter().map(|&i| u[i]).collect();
        let clamped_sum: f64 = vars
            .iter()
            .zip(&y)
            .map(|(&i, &yi)| caps[i] * yi.clamp(0.0, 1.0))
            .sum();
        if clamped_sum <= cell_cap {
            for (&i, &yi) in vars.iter().zip(&y) {
                u[i] = yi.clamp(0.0, 1.0);
            }
            continue;
        }
        // u_i = clamp(y_i - tau cap_i), with tau from bisection.
        let mut tau_lo = 0.0f64;
        let mut tau_hi = vars
            .iter()
            .zip(&y)
            .map(|(&i, &yi)| yi / caps[i])
            .fold(0.0f64, f64::max);
        for _ in 0..100 {
            let tau = 0.5 * (tau_lo + tau_hi);
            let s: f64 = vars
                .iter()
                .zip(&y)
                .map(|(&i, &yi)| caps[i] * (yi - tau * caps[i]).clamp(0.0, 1.0))
                .sum();
            if s > cell_cap {
                tau_lo = tau;
            } else {
                tau_hi = tau;
            }
        }
        let tau = tau_hi;
        for (&i, &yi) in vars.iter().zip(&y) {
            u[i] = (yi - tau * caps[i]).clamp(0.0, 1.0);
        }
        // Land exactly on the feasible side of the cap.
        let s: f64 = vars.iter().map(|&i| caps[i] * u[i]).sum();
        if s > cell_cap {
            let fix = cell_cap / s;
            for &i in vars {
                u[i] *= fix;
            }
        }
    }
    // UL variables sit after the DL block and carry no sum constraint.
    for v in u[model.n_dl..].iter_mut() {
        *v = v.clamp(0.0, 1.0);
    }
}

fn to_x(model: &SinrModel, u: &[f64]) -> Vec<f64> {
    u.iter()
        .zip(&model.bounds.var_cap)
        .map(|(&ui, &cap)| ui * cap)
        .collect()
}

struct InnerObjective<'a> {
    model: &'a SinrModel,
    surr: &'a DcSurrogate,
    /// Barrier weight; 0 disables the rate-constraint barrier.
    mu: f64,
    targets: &'a [f64],
}

impl InnerObjective<'_> {
    /// Value in normalized units; -inf outside the barrier domain.
    fn value(&self, u: &[f64]) -> f64 {
        let x = to_x(self.model, u);
        let mut val = surrogate_value(self.model, self.surr, &x);
        if self.mu > 0.0 {
            for d in 0..self.model.n_users() {
                let slack = self.rate_slack_w(d, &x);
                if slack <= 0.0 {
                    return f64::NEG_INFINITY;
                }
                val += self.mu * (slack / self.model.noise_w).ln();
            }
        }
        val
    }

    fn rate_slack_w(&self, d: usize, x: &[f64]) -> f64 {
        let t = self.targets[d];
        self.model.signal_w(d, x) - t * (self.model.noise_w + self.model.interference_w(d, x))
    }

    /// Gradient in normalized units.
    fn grad(&self, u: &[f64]) -> Vec<f64> {
        let x = to_x(self.model, u);
        let mut g = surrogate_grad(self.model, self.surr, &x);
        if self.mu > 0.0 {
            for (d, row) in self.model.rows.iter().enumerate() {
                let t = self.targets[d];
                let slack = self.rate_slack_w(d, &x);
                let scale = self.mu / slack;
                g[row.var] += scale * row.own_gain;
                for (gi, &c) in g.iter_mut().zip(&row.c_total) {
                    *gi -= scale * t * c;
                }
            }
        }
        g.iter()
            .zip(&self.model.bounds.var_cap)
            .map(|(&gi, &cap)| gi * cap)
            .collect()
    }
}

/// Spectral (Barzilai-Borwein) projected gradient ascent with Armijo
/// backtracking; the BB step adapts to the badly mixed curvature scales of
/// the power variables. Returns the final point and the unit-step
/// projected-gradient residual (infinity norm, normalized variables).
fn pg_ascend(obj: &InnerObjective, u0: Vec<f64>, tol: f64) -> (Vec<f64>, f64) {
    let model = obj.model;
    let mut u = u0;
    let mut f = obj.value(&u);
    debug_assert!(f.is_finite(), "inner solver started outside its domain");
    let mut residual = f64::INFINITY;
    let mut prev: Option<(Vec<f64>, Vec<f64>)> = None;
    let mut alpha = 1.0f64;
    for _ in 0..PG_MAX_ITERS {
        let g = obj.grad(&u);
        let mut probe = u.clone();
        for (p, &gi) in probe.iter_mut().zip(&g) {
            *p += gi;
        }
        project(model, &mut probe);
        residual = probe
            .iter()
            .zip(&u)
            .map(|(&a, &b)| (a - b).abs())
            .fold(0.0, f64::max);
        if residual <= tol {
            break;
        }
        if let Some((u_prev, g_prev)) = &prev {
            let mut ss = 0.0;
            let mut sy = 0.0;
            for i in 0..u.len() {
                let s = u[i] - u_prev[i];
                let y = g[i] - g_prev[i];
                ss += s * s;
                sy += s * y;
            }
            // Concavity makes s.y <= 0; fall back to growth when it is not.
            alpha = if sy < 0.0 {
                (ss / -sy).clamp(1e-12, 1e12)
            } else {
                (alpha * 2.0).min(1e12)
            };
        }
        prev = Some((u.clone(), g.clone()));

        let mut t = alpha;
        let mut accepted = false;
        while t > 1e-18 {
            let mut cand = u.clone();
            for (c, &gi) in cand.iter_mut().zip(&g) {
                *c += t * gi;
            }
            project(model, &mut cand);
            let dir_gain: f64 = g
                .iter()
                .zip(cand.iter().zip(&u))
                .map(|(&gi, (&c, &ui))| gi * (c - ui))
                .sum();
            let f_cand = obj.value(&cand);
            if f_cand >= f + 1e-4 * dir_gain && f_cand >= f {
                u = cand;
                f = f_cand;
                accepted = true;
                break;
            }
            t *= 0.5;
        }
        if !accepted {
            break; // step collapsed; residual already reflects the point
        }
    }
    (u, residual)
}

/// Maximize the concave surrogate over the power caps and the linearized
/// rate constraints `S_d >= (2^(r_min/w_d) - 1)(N0 + I_d)`, starting from a
/// feasible point. Returns the solution and its projected-gradient / KKT
/// residual.
pub fn solve_convex_subproblem(
    model: &SinrModel,
    surr: &DcSurrogate,
    start: &[f64],
) -> (Vec<f64>, f64) {
    let caps = &model.bounds.var_cap;
    let mut u: Vec<f64> = start.iter().zip(caps).map(|(&x, &c)| x / c).collect();
    project(model, &mut u);

    let targets: Vec<f64> = (0..model.n_users())
        .map(|d| model.rate_target_sinr(d))
        .collect();
    let unconstrained = targets.iter().all(|&t| t == 0.0);

    if unconstrained {
        let obj = InnerObjective {
            model,
            surr,
            mu: 0.0,
            targets: &targets,
        };
        let (u_fin, res) = pg_ascend(&obj, u, PG_TOL);
        return (to_x(model, &u_fin), res);
    }

    // Interior-point path over the barrier weight; each stage warm-starts
    // from the previous one.
    let mut res = f64::INFINITY;
    for &mu in &BARRIER_MU {
        let obj = InnerObjective {
            model,
            surr,
            mu,
            targets: &targets,
        };
        let (u_fin, r) = pg_ascend(&obj, u, PG_TOL);
        u = u_fin;
        res = r;
    }
    (to_x(model, &u), res)
}

/// Default initialization: every power at 10% of its cap (clipped into the
/// cell budgets); if that violates the rate demand, fall back to the minimal
/// power vector that meets the demand exactly, nudged into the interior.
pub fn default_start(model: &SinrModel) -> Option<Vec<f64>> {
    let mut x: Vec<f64> = model.bounds.var_cap.iter().map(|&c| 0.1 * c).collect();
    model.bounds.clip(&mut x);
    if model.r_min == 0.0 {
        return Some(x);
    }
    let ok = (0..model.n_users()).all(|d| model.linear_rate_slack_w(d, &x) > 0.0);
    if ok {
        return Some(x);
    }
    let gamma: Vec<f64> = (0..model.n_users())
        .map(|d| model.rate_target_sinr(d))
        .collect();
    match sinr_targets_feasible(model, &gamma) {
        Feasibility::Feasible(x_min) => Some(nudge_interior(model, x_min)),
        _ => None,
    }
}

/// Scale a zero-slack point up toward the caps until every rate constraint
/// holds strictly; scaling all powers up raises every SINR.
fn nudge_interior(model: &SinrModel, x_min: Vec<f64>) -> Vec<f64> {
    for factor in [1.5, 1.25, 1.1, 1.05, 1.02, 1.01, 1.005] {
        let mut x: Vec<f64> = x_min.iter().map(|&v| v * factor).collect();
        model.bounds.clip(&mut x);
        let ok = (0..model.n_users()).all(|d| model.linear_rate_slack_w(d, &x) > 0.0);
        if ok {
            return x;
        }
    }
    x_min
}

fn random_start(model: &SinrModel, seed: u64, attempt: u64) -> Option<Vec<f64>> {
    let mut rng = ChaCha8Rng::seed_from_u64(
        seed.wrapping_mul(0x9E37_79B9_7F4A_7C15)
            .wrapping_add(attempt),
    );
    let mut x: Vec<f64> = model
        .bounds
        .var_cap
        .iter()
        .map(|&c| c * rng.random::<f64>())
        .collect();
    model.bounds.clip(&mut x);
    if model.r_min == 0.0 {
        return Some(x);
    }
    let ok = (0..model.n_users()).all(|d| model.linear_rate_slack_w(d, &x) > 0.0);
    if ok {
        Some(x)
    } else {
        default_start(model)
    }
}

/// Minorize-maximize loop: build the surrogate at the current iterate, solve
/// the concave subproblem, and repeat while the true objective improves by
/// at least the solver tolerance. The true objective never decreases across
/// iterations.
pub fn solve_sca(model: &SinrModel, cfg: &SimConfig, p0: Option<&PowerAllocation>) -> SolverResult {
    let starts: Vec<Vec<f64>> = if let Some(p) = p0 {
        vec![p.to_flat()]
    } else {
        let mut s = Vec::new();
        match default_start(model) {
            Some(x) => s.push(x),
            None => return SolverResult::infeasible(model.n_dl, model.n_ul),
        }
        for k in 1..cfg.sca_restarts {
            if let Some(x) = random_start(model, cfg.base_seed, k as u64) {
                s.push(x);
            }
        }
        s
    };

    let mut best: Option<SolverResult> = None;
    for start in starts {
        let run = sca_from(model, cfg, start);
        let better = match &best {
            None => true,
            Some(b) => run.objective_bps_hz > b.objective_bps_hz,
        };
        if better {
            best = Some(run);
        }
    }
    best.unwrap_or_else(|| SolverResult::infeasible(model.n_dl, model.n_ul))
}

/// Short minorize-maximize refinement from a feasible point; returns the
/// improved point and its true objective. Used by the polyblock solver to
/// polish incumbents found on the boundary.
pub fn polish(model: &SinrModel, start: &[f64], max_outer: usize) -> (Vec<f64>, f64) {
    let mut x = start.to_vec();
    let mut f = model.objective(&x);
    for _ in 0..max_outer {
        let surr = build_surrogate(model, &x);
        let (x_new, _) = solve_convex_subproblem(model, &surr, &x);
        let f_new = model.objective(&x_new);
        if f_new <= f {
            break;
        }
        let improved = f_new - f;
        x = x_new;
        f = f_new;
        if improved < 0.1 * model.solver_tol {
            break;
        }
    }
    (x, f)
}

fn sca_from(model: &SinrModel, cfg: &SimConfig, start: Vec<f64>) -> SolverResult {
    let tol = model.solver_tol;
    let mut x = start;
    let mut f = model.objective(&x);
    let mut trace = vec![ScaTraceRow {
        iter: 0,
        objective: f,
        step_norm: 0.0,
        kkt_residual: f64::NAN,
    }];
    let mut iterations = 0usize;
    for t in 1..=SCA_MAX_ITERS {
        let surr = build_surrogate(model, &x);
        let (x_new, kkt) = solve_convex_subproblem(model, &surr, &x);
        let f_new = model.objective(&x_new);
        iterations = t;
        // The subproblem starts at x and only accepts ascent steps, so the
        // minorant chain keeps the true objective non-decreasing; guard the
        // invariant against numerical noise anyway.
        let (x_next, f_next) = if f_new >= f {
            (x_new, f_new)
        } else {
            (x.clone(), f)
        };
        let step_norm = x_next
            .iter()
            .zip(&x)
            .map(|(&a, &b)| (a - b) * (a - b))
            .sum::<f64>()
            .sqrt();
        trace.push(ScaTraceRow {
            iter: t,
            objective: f_next,
            step_norm,
            kkt_residual: kkt,
        });
        let improvement = f_next - f;
        x = x_next;
        f = f_next;
        if improvement < tol {
            break;
        }
    }
    let _ = cfg;
    SolverResult {
        p: PowerAllocation::from_flat(&x, model.n_dl),
        objective_bps_hz: f,
        feasible: true,
        iterations,
        trace: SolverTrace::Sca(trace),
        budget_exhausted: false,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::link::{sic_order, SinrModel};
    use crate::model::{SchemeKind, SimConfig};
    use crate::optim::monotonic::solve_polyblock;
    use crate::propagation::{build_channels, ChannelSet, Topology};
    use rand::Rng;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn seeded_model(n_dl: usize, n_ul: usize, seed: u64) -> (SinrModel, SimConfig) {
        let cfg = SimConfig {
            n_cells: 1,
            n_dl_users: n_dl,
            n_ul_users: n_ul.max(1),
            base_seed: seed,
            snr_ratio_db: 75.0,
            ..SimConfig::default()
        };
        let topo = Topology {
            rrh_xy: vec![(0.0, 0.0)],
            dl_xy: (0..n_dl).map(|i| (30.0 + 15.0 * i as f64, -5.0)).collect(),
            ul_xy: (0..n_ul).map(|i| (-25.0, 12.0 * (i + 1) as f64)).collect(),
            dl_cell: vec![0; n_dl],
            ul_cell: vec![0; n_ul],
        };
        let ch = build_channels(&topo, &cfg, seed as usize);
        let order = sic_order(&ch, &topo);
        let model = SinrModel::build(&ch, &topo, &order, SchemeKind::CFdbNomaSuboptimal, &cfg);
        (model, cfg)
    }

    fn random_feasible(model: &SinrModel, rng: &mut ChaCha8Rng) -> Vec<f64> {
        let mut x: Vec<f64> = model
            .bounds
            .var_cap
            .iter()
            .map(|&c| c * rng.random::<f64>())
            .collect();
        model.bounds.clip(&mut x);
        x
    }

    #[test]
    fn surrogate_is_tangent_at_the_reference() {
        let (model, _) = seeded_model(2, 2, 4);
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        for _ in 0..100 {
            let p = random_feasible(&model, &mut rng);
            let surr = build_surrogate(&model, &p);
            let sv = surrogate_value(&model, &surr, &p);
            let fv = model.objective(&p);
            assert!(
                (sv - fv).abs() <= 1e-10 * fv.abs().max(1.0),
                "tangency violated: {sv} vs {fv}"
            );
        }
    }

    #[test]
    fn surrogate_minorizes_the_objective() {
        let (model, _) = seeded_model(2, 2, 8);
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        for _ in 0..1000 {
            let p_ref = random_feasible(&model, &mut rng);
            let p = random_feasible(&model, &mut rng);
            let surr = build_surrogate(&model, &p_ref);
            let sv = surrogate_value(&model, &surr, &p);
            let fv = model.objective(&p);
            assert!(sv <= fv + 1e-9 * fv.abs().max(1.0), "minorant violated");
        }
    }

    /// Analytic gradients of both surrogate parts against central finite
    /// differences with a 1e-6 relative step; discrepancies are normalized by
    /// max(1, |analytic|).
    #[test]
    fn gradients_match_finite_differences() {
        let (model, _) = seeded_model(2, 1, 5);
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        for _ in 0..20 {
            let mut p = random_feasible(&model, &mut rng);
            for (v, &cap) in p.iter_mut().zip(&model.bounds.var_cap) {
                *v = v.max(1e-3 * cap); // keep relative steps meaningful
            }
            let surr = build_surrogate(&model, &p);

            // Linearized part: gradient of sum_d w log2(N0 + I_d).
            let h = |x: &[f64]| -> f64 {
                model
                    .rows
                    .iter()
                    .enumerate()
                    .map(|(d, r)| {
                        r.weight * (model.noise_w + model.interference_w(d, x)).log2()
                    })
                    .sum()
            };
            for j in 0..model.n_vars() {
                let step = 1e-6 * p[j];
                let mut hi = p.clone();
                hi[j] += step;
                let mut lo = p.clone();
                lo[j] -= step;
                let fd = (h(&hi) - h(&lo)) / (2.0 * step);
                let an = surr.lin_grad[j];
                let denom = an.abs().max(1.0);
                assert!(
                    (fd - an).abs() / denom <= 1e-5,
                    "lin grad mismatch at {j}: fd {fd}, analytic {an}"
                );
            }

            // Full surrogate gradient.
            let g = surrogate_grad(&model, &surr, &p);
            for j in 0..model.n_vars() {
                let step = 1e-6 * p[j];
                let mut hi = p.clone();
                hi[j] += step;
                let mut lo = p.clone();
                lo[j] -= step;
                let fd = (surrogate_value(&model, &surr, &hi)
                    - surrogate_value(&model, &surr, &lo))
                    / (2.0 * step);
                let denom = g[j].abs().max(1.0);
                assert!(
                    (fd - g[j]).abs() / denom <= 1e-5,
                    "surrogate grad mismatch at {j}"
                );
            }
        }
    }

    #[test]
    fn isolated_link_subproblem_returns_the_cap() {
        let topo = Topology {
            rrh_xy: vec![(0.0, 0.0)],
            dl_xy: vec![(10.0, 0.0)],
            ul_xy: vec![],
            dl_cell: vec![0],
            ul_cell: vec![],
        };
        let ch = ChannelSet {
            g_rrh_dl: vec![vec![0.01]],
            g_ul_rrh: vec![vec![]],
            g_ul_dl: vec![],
            g_rrh_rrh: vec![vec![0.0]],
            g_si: vec![1.0],
        };
        let cfg = SimConfig {
            n_cells: 1,
            n_dl_users: 1,
            snr_ratio_db: 60.0,
            ..SimConfig::default()
        };
        let order = sic_order(&ch, &topo);
        let model = SinrModel::build(&ch, &topo, &order, SchemeKind::CFdbNomaSuboptimal, &cfg);
        let start = vec![0.1 * cfg.p_dl_max_w()];
        let surr = build_surrogate(&model, &start);
        let (x, res) = solve_convex_subproblem(&model, &surr, &start);
        assert!(res <= 1e-6);
        assert!((x[0] - cfg.p_dl_max_w()).abs() <= 1e-6 * cfg.p_dl_max_w());
    }

    #[test]
    fn subproblem_never_loses_to_its_start_and_meets_kkt() {
        let (model, _) = seeded_model(2, 2, 6);
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        for _ in 0..10 {
            let start = random_feasible(&model, &mut rng);
            let surr = build_surrogate(&model, &start);
            let (x, res) = solve_convex_subproblem(&model, &surr, &start);
            assert!(res <= 1e-6, "KKT residual {res}");
            assert!(
                surrogate_value(&model, &surr, &x)
                    >= surrogate_value(&model, &surr, &start) - 1e-12
            );
            assert!(model.bounds.check_flat(&x).is_ok());
        }
    }

    #[test]
    fn sca_matches_polyblock_on_isolated_link() {
        let topo = Topology {
            rrh_xy: vec![(0.0, 0.0)],
            dl_xy: vec![(10.0, 0.0)],
            ul_xy: vec![],
            dl_cell: vec![0],
            ul_cell: vec![],
        };
        let ch = ChannelSet {
            g_rrh_dl: vec![vec![0.003]],
            g_ul_rrh: vec![vec![]],
            g_ul_dl: vec![],
            g_rrh_rrh: vec![vec![0.0]],
            g_si: vec![1.0],
        };
        let cfg = SimConfig {
            n_cells: 1,
            n_dl_users: 1,
            snr_ratio_db: 65.0,
            ..SimConfig::default()
        };
        let order = sic_order(&ch, &topo);
        let model = SinrModel::build(&ch, &topo, &order, SchemeKind::CFdbNomaSuboptimal, &cfg);
        let sca = solve_sca(&model, &cfg, None);
        let poly = solve_polyblock(&model, &cfg);
        assert!((sca.objective_bps_hz - poly.objective_bps_hz).abs() <= cfg.solver_tol);
    }

    #[test]
    fn objective_sequence_is_monotone_and_stops_on_small_gain() {
        let (model, cfg) = seeded_model(2, 2, 12);
        let res = solve_sca(&model, &cfg, None);
        assert!(res.feasible);
        let SolverTrace::Sca(rows) = &res.trace else { panic!() };
        for w in rows.windows(2) {
            assert!(w[1].objective >= w[0].objective - 1e-12);
        }
        if rows.len() >= 2 && res.iterations < SCA_MAX_ITERS {
            let last = rows[rows.len() - 1].objective;
            let prev = rows[rows.len() - 2].objective;
            assert!(last - prev < cfg.solver_tol);
        }
    }

    #[test]
    fn minorize_maximize_chain_holds_each_iteration() {
        let (model, _) = seeded_model(2, 1, 19);
        let mut x = default_start(&model).unwrap();
        for _ in 0..10 {
            let f_t = model.objective(&x);
            let surr = build_surrogate(&model, &x);
            let (x_new, _) = solve_convex_subproblem(&model, &surr, &x);
            let s_new = surrogate_value(&model, &surr, &x_new);
            let s_old = surrogate_value(&model, &surr, &x);
            let f_new = model.objective(&x_new);
            assert!(s_new >= s_old - 1e-12);
            assert!((s_old - f_t).abs() <= 1e-9 * f_t.abs().max(1.0));
            assert!(f_new >= s_new - 1e-9 * s_new.abs().max(1.0));
            x = x_new;
        }
    }

    #[test]
    fn interference_free_channels_converge_in_one_step() {
        // Diagonal channels: one DL user and no UL users leaves no coupling,
        // so the first subproblem already lands on the cap.
        let topo = Topology {
            rrh_xy: vec![(0.0, 0.0)],
            dl_xy: vec![(10.0, 0.0)],
            ul_xy: vec![],
            dl_cell: vec![0],
            ul_cell: vec![],
        };
        let ch = ChannelSet {
            g_rrh_dl: vec![vec![0.02]],
            g_ul_rrh: vec![vec![]],
            g_ul_dl: vec![],
            g_rrh_rrh: vec![vec![0.0]],
            g_si: vec![1.0],
        };
        let cfg = SimConfig {
            n_cells: 1,
            n_dl_users: 1,
            snr_ratio_db: 70.0,
            ..SimConfig::default()
        };
        let order = sic_order(&ch, &topo);
        let model = SinrModel::build(&ch, &topo, &order, SchemeKind::CFdbNomaSuboptimal, &cfg);
        let res = solve_sca(&model, &cfg, None);
        assert!((res.p.dl_w[0] - cfg.p_dl_max_w()).abs() <= 1e-6 * cfg.p_dl_max_w());
        // One productive iteration plus the stopping check.
        assert!(res.iterations <= 2, "took {} iterations", res.iterations);
    }

    #[test]
    fn rate_demand_keeps_iterates_feasible() {
        let (model, cfg) = {
            let cfg = SimConfig {
                n_cells: 1,
                n_dl_users: 2,
                n_ul_users: 1,
                base_seed: 23,
                snr_ratio_db: 75.0,
                r_min_bps_hz: 0.02,
                ..SimConfig::default()
            };
            let topo = Topology {
                rrh_xy: vec![(0.0, 0.0)],
                dl_xy: vec![(30.0, -5.0), (45.0, -5.0)],
                ul_xy: vec![(-25.0, 12.0)],
                dl_cell: vec![0, 0],
                ul_cell: vec![0],
            };
            let ch = build_channels(&topo, &cfg, 23);
            let order = sic_order(&ch, &topo);
            (
                SinrModel::build(&ch, &topo, &order, SchemeKind::CFdbNomaSuboptimal, &cfg),
                cfg,
            )
        };
        let res = solve_sca(&model, &cfg, None);
        assert!(res.feasible);
        let x = res.p.to_flat();
        assert!(model.bounds.check_flat(&x).is_ok());
        let (ok, slacks) = model.rate_slacks(&x);
        assert!(ok, "rate slack violated: {slacks:?}");
    }

    #[test]
    fn infeasible_rate_demand_reports_infeasible() {
        let (model, cfg) = {
            let cfg = SimConfig {
                n_cells: 1,
                n_dl_users: 1,
                n_ul_users: 1,
                snr_ratio_db: 40.0,
                r_min_bps_hz: 30.0,
                ..SimConfig::default()
            };
            let topo = Topology {
                rrh_xy: vec![(0.0, 0.0)],
                dl_xy: vec![(150.0, 0.0)],
                ul_xy: vec![(-150.0, 0.0)],
                dl_cell: vec![0],
                ul_cell: vec![0],
            };
            let ch = build_channels(&topo, &cfg, 0);
            let order = sic_order(&ch, &topo);
            (
                SinrModel::build(&ch, &topo, &order, SchemeKind::CFdbNomaSuboptimal, &cfg),
                cfg,
            )
        };
        let res = solve_sca(&model, &cfg, None);
        assert!(!res.feasible);
    }
}
