//! The fast self-check suite behind `fdnoma verify`: oracle equivalences and
//! model invariants that a fresh checkout must satisfy. Each check is
//! independent and reports pass/fail; the whole suite runs in seconds.
//!
//! The `corrupt_gains` switch flips the sign of one channel gain before the
//! model-level checks run. It exists as a negative control: a corrupted
//! model must make the suite fail.

use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::bench::grid_search;
use crate::link::{sic_order, SinrModel};
use crate::model::{dbm_to_watts, validate_config, watts_to_dbm, SchemeKind, SimConfig};
use crate::optim::monotonic::{sinr_targets_feasible, solve_polyblock, Feasibility};
use crate::optim::sca::{build_surrogate, solve_sca, surrogate_value};
use crate::propagation::{build_channels, generate_drop, ChannelSet, Topology};

/// One verification outcome.
#[derive(Debug, Clone)]
pub struct CheckOutcome {
    pub name: &'static str,
    pub passed: bool,
    pub detail: String,
}

type CheckResult = Result<(), String>;

fn outcome(name: &'static str, result: CheckResult) -> CheckOutcome {
    match result {
        Ok(()) => CheckOutcome {
            name,
            passed: true,
            detail: String::new(),
        },
        Err(detail) => CheckOutcome {
            name,
            passed: false,
            detail,
        },
    }
}

struct Ctx {
    corrupt_gains: bool,
}

impl Ctx {
    /// Channels for the verification scenarios, with the optional negative-
    /// control corruption applied.
    fn channels(&self, topo: &Topology, cfg: &SimConfig, drop: usize) -> ChannelSet {
        let mut ch = build_channels(topo, cfg, drop);
        if self.corrupt_gains {
            ch.g_rrh_dl[0][0] = -ch.g_rrh_dl[0][0];
        }
        ch
    }

    fn two_cell_cfg(&self) -> SimConfig {
        SimConfig {
            n_cells: 2,
            n_dl_users: 2,
            n_ul_users: 2,
            snr_ratio_db: 75.0,
            base_seed: 7,
            vertex_budget: 4_000,
            ..SimConfig::default()
        }
    }
}

fn check_unit_round_trip() -> CheckResult {
    let mut x = -50.0f64;
    while x <= 50.0 {
        let back = watts_to_dbm(dbm_to_watts(x));
        if (back - x).abs() / x.abs().max(1.0) > 1e-12 {
            return Err(format!("round trip failed at {x} dBm: {back}"));
        }
        x += 0.73;
    }
    if (dbm_to_watts(30.0) - 1.0).abs() > 0.0 {
        return Err("30 dBm must be exactly 1 W".into());
    }
    Ok(())
}

fn check_default_config() -> CheckResult {
    validate_config(&SimConfig::default())
        .map_err(|v| format!("default config rejected: {}", v[0]))
}

fn check_drop_determinism(ctx: &Ctx) -> CheckResult {
    let cfg = ctx.two_cell_cfg();
    for drop in 0..5 {
        if generate_drop(&cfg, drop) != generate_drop(&cfg, drop) {
            return Err(format!("drop {drop} not reproducible"));
        }
        let a = ctx.channels(&generate_drop(&cfg, drop), &cfg, drop);
        let b = ctx.channels(&generate_drop(&cfg, drop), &cfg, drop);
        if a != b {
            return Err(format!("channels of drop {drop} not reproducible"));
        }
    }
    Ok(())
}

fn check_association(ctx: &Ctx) -> CheckResult {
    let cfg = ctx.two_cell_cfg();
    for drop in 0..5 {
        let t = generate_drop(&cfg, drop);
        for (d, &p) in t.dl_xy.iter().enumerate() {
            let own = dist(p, t.rrh_xy[t.dl_cell[d]]);
            for &q in &t.rrh_xy {
                if own > dist(p, q) + 1e-12 {
                    return Err(format!("DL user {d} not associated to the nearest RRH"));
                }
            }
        }
    }
    Ok(())
}

fn dist(a: (f64, f64), b: (f64, f64)) -> f64 {
    ((a.0 - b.0).powi(2) + (a.1 - b.1).powi(2)).sqrt()
}

fn check_gains_positive(ctx: &Ctx) -> CheckResult {
    let cfg = ctx.two_cell_cfg();
    let topo = generate_drop(&cfg, 0);
    let ch = ctx.channels(&topo, &cfg, 0);
    let all = ch
        .g_rrh_dl
        .iter()
        .chain(&ch.g_ul_rrh)
        .chain(&ch.g_ul_dl)
        .flatten();
    for &g in all {
        if g < 0.0 {
            return Err(format!("negative channel gain {g}"));
        }
    }
    for &g in &ch.g_si {
        if g != cfg.si_channel_gain() {
            return Err("SI gain must be the configured constant".into());
        }
    }
    Ok(())
}

fn check_sinr_conservation(ctx: &Ctx) -> CheckResult {
    let cfg = ctx.two_cell_cfg();
    let topo = generate_drop(&cfg, 1);
    let ch = ctx.channels(&topo, &cfg, 1);
    let order = sic_order(&ch, &topo);
    let mut rng = ChaCha8Rng::seed_from_u64(1);
    for scheme in SchemeKind::ALL {
        let model = SinrModel::build(&ch, &topo, &order, scheme, &cfg);
        let mut x: Vec<f64> = model
            .bounds
            .var_cap
            .iter()
            .map(|&c| c * rng.random::<f64>())
            .collect();
        model.bounds.clip(&mut x);
        let p = crate::model::PowerAllocation::from_flat(&x, model.n_dl);
        let rows = model
            .breakdown(&p)
            .map_err(|e| format!("{scheme}: breakdown rejected a clipped point: {e}"))?;
        for row in &rows {
            let denom = row.noise_w
                + row.intra_noma_w
                + row.i_dl_to_dl_w
                + row.i_ul_to_dl_w
                + row.i_dl_to_ul_w
                + row.i_ul_to_ul_w
                + row.i_self_w;
            let recomputed = row.signal_w / denom;
            if (recomputed - row.sinr).abs() > 1e-12 * row.sinr.abs().max(1e-300) {
                return Err(format!("{scheme}: SINR does not reassemble from parts"));
            }
            if row.sinr < 0.0 {
                return Err(format!("{scheme}: negative SINR {}", row.sinr));
            }
        }
    }
    Ok(())
}

fn check_sinr_monotonicity(ctx: &Ctx) -> CheckResult {
    let cfg = ctx.two_cell_cfg();
    let topo = generate_drop(&cfg, 2);
    let ch = ctx.channels(&topo, &cfg, 2);
    let order = sic_order(&ch, &topo);
    let model = SinrModel::build(&ch, &topo, &order, SchemeKind::CFdbNomaOptimal, &cfg);
    let mut rng = ChaCha8Rng::seed_from_u64(2);
    for _ in 0..20 {
        let x: Vec<f64> = model
            .bounds
            .var_cap
            .iter()
            .map(|&c| 0.4 * c * rng.random::<f64>())
            .collect();
        for row in 0..model.n_users() {
            let own = model.rows[row].var;
            let base = model.sinr(row, &x);
            let mut up = x.clone();
            up[own] += 1e-3 * model.bounds.var_cap[own] + 1e-12;
            if model.sinr(row, &up) <= base {
                return Err(format!("SINR of user {row} not increasing in own power"));
            }
            for other in 0..x.len() {
                if other == own {
                    continue;
                }
                let mut o = x.clone();
                o[other] += 1e-3 * model.bounds.var_cap[other] + 1e-12;
                if model.sinr(row, &o) > base + 1e-15 {
                    return Err(format!(
                        "SINR of user {row} increased with power {other}"
                    ));
                }
            }
        }
    }
    Ok(())
}

fn check_hd_kappa_invariance(ctx: &Ctx) -> CheckResult {
    let base = ctx.two_cell_cfg();
    let topo = generate_drop(&base, 3);
    let ch = ctx.channels(&topo, &base, 3);
    let a = crate::bench::evaluate_scheme(&ch, &topo, SchemeKind::HdbNoma, &base);
    let hi = SimConfig {
        kappa_si_db: -40.0,
        kappa_du_db: -40.0,
        ..base
    };
    let b = crate::bench::evaluate_scheme(&ch, &topo, SchemeKind::HdbNoma, &hi);
    if a.objective_bps_hz != b.objective_bps_hz {
        return Err("half-duplex objective depends on residual coefficients".into());
    }
    Ok(())
}

fn check_kappa_du_unity_equivalence(ctx: &Ctx) -> CheckResult {
    let cfg = SimConfig {
        kappa_du_db: 0.0,
        ..ctx.two_cell_cfg()
    };
    let topo = generate_drop(&cfg, 4);
    let ch = ctx.channels(&topo, &cfg, 4);
    let a = crate::bench::evaluate_scheme(&ch, &topo, SchemeKind::CFdbNomaOptimal, &cfg);
    let b = crate::bench::evaluate_scheme(&ch, &topo, SchemeKind::FdbNoma, &cfg);
    if (a.objective_bps_hz - b.objective_bps_hz).abs() > 1e-9 {
        return Err(format!(
            "kappa_du = 1 should collapse the schemes: {} vs {}",
            a.objective_bps_hz, b.objective_bps_hz
        ));
    }
    Ok(())
}

fn check_pointwise_dominance(ctx: &Ctx) -> CheckResult {
    let cfg = ctx.two_cell_cfg();
    let topo = generate_drop(&cfg, 5);
    let ch = ctx.channels(&topo, &cfg, 5);
    let order = sic_order(&ch, &topo);
    let c_model = SinrModel::build(&ch, &topo, &order, SchemeKind::CFdbNomaOptimal, &cfg);
    let f_model = SinrModel::build(&ch, &topo, &order, SchemeKind::FdbNoma, &cfg);
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    for _ in 0..100 {
        let mut x: Vec<f64> = c_model
            .bounds
            .var_cap
            .iter()
            .map(|&c| c * rng.random::<f64>())
            .collect();
        c_model.bounds.clip(&mut x);
        if c_model.objective(&x) < f_model.objective(&x) - 1e-12 {
            return Err("cancelled model fell below the uncancelled one".into());
        }
    }
    Ok(())
}

fn check_polyblock_vs_grid(ctx: &Ctx) -> CheckResult {
    let cfg = SimConfig {
        n_cells: 1,
        n_dl_users: 1,
        n_ul_users: 1,
        snr_ratio_db: 75.0,
        base_seed: 12,
        ..SimConfig::default()
    };
    for drop in 0..2 {
        let topo = generate_drop(&cfg, drop);
        let ch = ctx.channels(&topo, &cfg, drop);
        let order = sic_order(&ch, &topo);
        let model = SinrModel::build(&ch, &topo, &order, SchemeKind::CFdbNomaOptimal, &cfg);
        let poly = solve_polyblock(&model, &cfg);
        let grid = grid_search(&model, 48).map_err(|e| e.to_string())?;
        if !poly.feasible {
            return Err("tiny instance reported infeasible".into());
        }
        if grid.objective_bps_hz > poly.objective_bps_hz + cfg.solver_tol {
            return Err(format!(
                "grid {} beat polyblock {}",
                grid.objective_bps_hz, poly.objective_bps_hz
            ));
        }
        let margin = 2.0 * 4.0 / 47.0 * 10f64.log2() + cfg.solver_tol;
        if poly.objective_bps_hz > grid.objective_bps_hz + margin {
            return Err("polyblock value implausibly above the grid".into());
        }
    }
    Ok(())
}

fn check_sca_surrogate(ctx: &Ctx) -> CheckResult {
    let cfg = ctx.two_cell_cfg();
    let topo = generate_drop(&cfg, 6);
    let ch = ctx.channels(&topo, &cfg, 6);
    let order = sic_order(&ch, &topo);
    let model = SinrModel::build(&ch, &topo, &order, SchemeKind::CFdbNomaSuboptimal, &cfg);
    let mut rng = ChaCha8Rng::seed_from_u64(4);
    for _ in 0..100 {
        let mut p_ref: Vec<f64> = model
            .bounds
            .var_cap
            .iter()
            .map(|&c| c * rng.random::<f64>())
            .collect();
        model.bounds.clip(&mut p_ref);
        let surr = build_surrogate(&model, &p_ref);
        let f_ref = model.objective(&p_ref);
        let s_ref = surrogate_value(&model, &surr, &p_ref);
        if (s_ref - f_ref).abs() > 1e-9 * f_ref.abs().max(1.0) {
            return Err("surrogate not tangent at its reference".into());
        }
        let mut p: Vec<f64> = model
            .bounds
            .var_cap
            .iter()
            .map(|&c| c * rng.random::<f64>())
            .collect();
        model.bounds.clip(&mut p);
        let s = surrogate_value(&model, &surr, &p);
        let f = model.objective(&p);
        if s > f + 1e-9 * f.abs().max(1.0) {
            return Err("surrogate exceeded the true objective".into());
        }
    }
    Ok(())
}

fn check_sca_ascent(ctx: &Ctx) -> CheckResult {
    let cfg = ctx.two_cell_cfg();
    let topo = generate_drop(&cfg, 7);
    let ch = ctx.channels(&topo, &cfg, 7);
    let order = sic_order(&ch, &topo);
    let model = SinrModel::build(&ch, &topo, &order, SchemeKind::CFdbNomaSuboptimal, &cfg);
    let res = solve_sca(&model, &cfg, None);
    if !res.feasible {
        return Err("SCA infeasible at r_min = 0".into());
    }
    if let crate::model::SolverTrace::Sca(rows) = &res.trace {
        for w in rows.windows(2) {
            if w[1].objective < w[0].objective - 1e-12 {
                return Err("SCA objective decreased across an iteration".into());
            }
        }
    }
    Ok(())
}

fn check_oracle_closed_form(ctx: &Ctx) -> CheckResult {
    let _ = ctx;
    let topo = Topology {
        rrh_xy: vec![(0.0, 0.0)],
        dl_xy: vec![(10.0, 0.0)],
        ul_xy: vec![],
        dl_cell: vec![0],
        ul_cell: vec![],
    };
    let ch = ChannelSet {
        g_rrh_dl: vec![vec![0.004]],
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
    let model = SinrModel::build(&ch, &topo, &order, SchemeKind::CFdbNomaOptimal, &cfg);
    match sinr_targets_feasible(&model, &[5.0]) {
        Feasibility::Feasible(x) => {
            let expect = 5.0 * cfg.noise_w() / 0.004;
            if (x[0] - expect).abs() > 1e-12 * expect {
                return Err(format!("closed form mismatch: {} vs {expect}", x[0]));
            }
            Ok(())
        }
        other => Err(format!("isolated target should be feasible, got {other:?}")),
    }
}

/// Run the whole suite. Returns one outcome per check, in print order.
pub fn run_verification(corrupt_gains: bool) -> Vec<CheckOutcome> {
    let ctx = Ctx { corrupt_gains };
    vec![
        outcome("unit round trip dbm/watts", check_unit_round_trip()),
        outcome("default config validates", check_default_config()),
        outcome("drop and channel determinism", check_drop_determinism(&ctx)),
        outcome("nearest-RRH association", check_association(&ctx)),
        outcome("channel gains positive, SI constant", check_gains_positive(&ctx)),
        outcome("SINR conservation identity", check_sinr_conservation(&ctx)),
        outcome("SINR monotone structure", check_sinr_monotonicity(&ctx)),
        outcome("HD invariance to residuals", check_hd_kappa_invariance(&ctx)),
        outcome(
            "kappa_du = 1 scheme equivalence",
            check_kappa_du_unity_equivalence(&ctx),
        ),
        outcome(
            "centralized dominates uncancelled",
            check_pointwise_dominance(&ctx),
        ),
        outcome("polyblock matches grid oracle", check_polyblock_vs_grid(&ctx)),
        outcome("SCA tangency and minorant", check_sca_surrogate(&ctx)),
        outcome("SCA monotone ascent", check_sca_ascent(&ctx)),
        outcome("fixed-point oracle closed form", check_oracle_closed_form(&ctx)),
    ]
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn clean_suite_passes() {
        let outcomes = run_verification(false);
        for o in &outcomes {
            assert!(o.passed, "{} failed: {}", o.name, o.detail);
        }
    }

    #[test]
    fn corrupted_gains_fail_the_suite() {
        let outcomes = run_verification(true);
        assert!(
            outcomes.iter().any(|o| !o.passed),
            "negative control not detected"
        );
    }
}
