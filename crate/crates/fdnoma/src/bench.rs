//! Scheme wiring and verification oracles.
//!
//! [`evaluate_scheme`] routes each transmission scheme to the solver the
//! experiments use for it; [`grid_search`] is the brute-force baseline the
//! test suites compare the solvers against.

use thiserror::Error;

use crate::link::{sic_order, SinrModel};
use crate::model::{PowerAllocation, SchemeKind, SimConfig, SolverResult, SolverTrace};
use crate::optim::monotonic::solve_polyblock_warm;
use crate::optim::sca::solve_sca;
use crate::propagation::{ChannelSet, Topology};

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum GridError {
    #[error("grid search supports at most {max} variables, instance has {got}")]
    TooManyVariables { max: usize, got: usize },
}

const GRID_MAX_VARS: usize = 6;

/// Exhaustive baseline: evaluate the sum throughput on the Cartesian grid of
/// `levels` geometric points per variable (from cap/10^4 to cap) plus the
/// zero point, keeping the best point that satisfies the power caps and the
/// rate demand. Guarded to tiny instances.
pub fn grid_search(model: &SinrModel, levels: usize) -> Result<SolverResult, GridError> {
    let n_vars = model.n_vars();
    if n_vars > GRID_MAX_VARS {
        return Err(GridError::TooManyVariables {
            max: GRID_MAX_VARS,
            got: n_vars,
        });
    }
    let ratio = 1e4f64.powf(1.0 / (levels - 1) as f64);
    let values: Vec<Vec<f64>> = model
        .bounds
        .var_cap
        .iter()
        .map(|&cap| {
            let mut vals = Vec::with_capacity(levels + 1);
            vals.push(0.0);
            let mut v = cap * 1e-4;
            for _ in 0..levels {
                vals.push(v.min(cap));
                v *= ratio;
            }
            vals
        })
        .collect();

    let mut idx = vec![0usize; n_vars];
    let mut x = vec![0.0; n_vars];
    let mut best_obj = f64::NEG_INFINITY;
    let mut best_x: Option<Vec<f64>> = None;
    let mut evaluated = 0usize;
    'outer: loop {
        for i in 0..n_vars {
            x[i] = values[i][idx[i]];
        }
        evaluated += 1;
        if model.bounds.check_flat(&x).is_ok() {
            let (ok, _) = model.rate_slacks(&x);
            if ok {
                let obj = model.objective(&x);
                if obj > best_obj {
                    best_obj = obj;
                    best_x = Some(x.clone());
                }
            }
        }
        let mut pos = 0;
        loop {
            if pos == n_vars {
                break 'outer;
            }
            idx[pos] += 1;
            if idx[pos] < values[pos].len() {
                break;
            }
            idx[pos] = 0;
            pos += 1;
        }
    }

    Ok(match best_x {
        Some(x) => SolverResult {
            p: PowerAllocation::from_flat(&x, model.n_dl),
            objective_bps_hz: best_obj,
            feasible: true,
            iterations: evaluated,
            trace: SolverTrace::Empty,
            budget_exhausted: false,
        },
        None => SolverResult {
            iterations: evaluated,
            ..SolverResult::infeasible(model.n_dl, model.n_ul)
        },
    })
}

/// Solve one scheme end to end on a channel realization: the SCA scheme runs
/// the SCA solver, every other scheme is power-optimized by the polyblock
/// method on its own SINR model (warm-started from an SCA incumbent, so its
/// value never falls below the SCA one even when the vertex budget binds).
pub fn evaluate_scheme(
    ch: &ChannelSet,
    topo: &Topology,
    scheme: SchemeKind,
    cfg: &SimConfig,
) -> SolverResult {
    let order = sic_order(ch, topo);
    let model = SinrModel::build(ch, topo, &order, scheme, cfg);
    match scheme {
        SchemeKind::CFdbNomaSuboptimal => solve_sca(&model, cfg, None),
        _ => {
            let sca = solve_sca(&model, cfg, None);
            let incumbent = sca.feasible.then(|| sca.p.to_flat());
            solve_polyblock_warm(&model, cfg, incumbent.as_deref())
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::link::sic_order;
    use crate::model::{SchemeKind, SimConfig};
    use crate::optim::monotonic::solve_polyblock;
    use crate::propagation::{build_channels, generate_drop, ChannelSet, Topology};
    use rand::Rng;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn single_var_model(g: f64) -> (SinrModel, SimConfig) {
        let topo = Topology {
            rrh_xy: vec![(0.0, 0.0)],
            dl_xy: vec![(10.0, 0.0)],
            ul_xy: vec![],
            dl_cell: vec![0],
            ul_cell: vec![],
        };
        let ch = ChannelSet {
            g_rrh_dl: vec![vec![g]],
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
        (
            SinrModel::build(&ch, &topo, &order, SchemeKind::CFdbNomaOptimal, &cfg),
            cfg,
        )
    }

    #[test]
    fn monotone_single_variable_grid_picks_the_cap() {
        let (model, cfg) = single_var_model(0.005);
        let res = grid_search(&model, 64).unwrap();
        assert!(res.feasible);
        assert!((res.p.dl_w[0] - cfg.p_dl_max_w()).abs() <= 1e-12);
    }

    #[test]
    fn refining_the_grid_never_decreases_the_best_value() {
        let cfg = SimConfig {
            n_cells: 1,
            n_dl_users: 1,
            n_ul_users: 1,
            base_seed: 3,
            snr_ratio_db: 80.0,
            ..SimConfig::default()
        };
        let topo = Topology {
            rrh_xy: vec![(0.0, 0.0)],
            dl_xy: vec![(40.0, 0.0)],
            ul_xy: vec![(-30.0, 10.0)],
            dl_cell: vec![0],
            ul_cell: vec![0],
        };
        let ch = build_channels(&topo, &cfg, 0);
        let order = sic_order(&ch, &topo);
        let model = SinrModel::build(&ch, &topo, &order, SchemeKind::CFdbNomaOptimal, &cfg);
        // Nested-resolution grids share the endpoint structure, so the best
        // value cannot drop as levels refine 16 -> 64 -> 256.
        let g16 = grid_search(&model, 16).unwrap().objective_bps_hz;
        let g64 = grid_search(&model, 64).unwrap().objective_bps_hz;
        let g256 = grid_search(&model, 256).unwrap().objective_bps_hz;
        assert!(g64 >= g16 - 1e-12);
        assert!(g256 >= g64 - 1e-12);
    }

    #[test]
    fn grid_rejects_large_instances() {
        let cfg = SimConfig {
            base_seed: 2,
            ..SimConfig::default()
        };
        let topo = generate_drop(&cfg, 0);
        let ch = build_channels(&topo, &cfg, 0);
        let order = sic_order(&ch, &topo);
        let model = SinrModel::build(&ch, &topo, &order, SchemeKind::CFdbNomaOptimal, &cfg);
        assert!(matches!(
            grid_search(&model, 8),
            Err(GridError::TooManyVariables { .. })
        ));
    }

    #[test]
    fn grid_value_never_beats_polyblock_beyond_tolerance() {
        let cfg = SimConfig {
            n_cells: 1,
            n_dl_users: 1,
            n_ul_users: 1,
            base_seed: 17,
            snr_ratio_db: 75.0,
            ..SimConfig::default()
        };
        let topo = Topology {
            rrh_xy: vec![(0.0, 0.0)],
            dl_xy: vec![(35.0, 5.0)],
            ul_xy: vec![(-20.0, 25.0)],
            dl_cell: vec![0],
            ul_cell: vec![0],
        };
        let ch = build_channels(&topo, &cfg, 1);
        let order = sic_order(&ch, &topo);
        let model = SinrModel::build(&ch, &topo, &order, SchemeKind::CFdbNomaOptimal, &cfg);
        let grid = grid_search(&model, 64).unwrap();
        let poly = solve_polyblock(&model, &cfg);
        assert!(grid.objective_bps_hz <= poly.objective_bps_hz + cfg.solver_tol);
    }

    /// A unit DL-to-UL residual makes the centralized scheme identical to
    /// the uncancelled one, solver and all.
    #[test]
    fn kappa_du_unity_collapses_the_scheme_gap() {
        let cfg = SimConfig {
            n_cells: 2,
            n_dl_users: 2,
            n_ul_users: 2,
            kappa_du_db: 0.0,
            base_seed: 31,
            snr_ratio_db: 70.0,
            vertex_budget: 4_000,
            ..SimConfig::default()
        };
        for drop in 0..3 {
            let topo = generate_drop(&cfg, drop);
            let ch = build_channels(&topo, &cfg, drop);
            let a = evaluate_scheme(&ch, &topo, SchemeKind::CFdbNomaOptimal, &cfg);
            let b = evaluate_scheme(&ch, &topo, SchemeKind::FdbNoma, &cfg);
            assert!(
                (a.objective_bps_hz - b.objective_bps_hz).abs() <= 1e-9,
                "drop {drop}: {} vs {}",
                a.objective_bps_hz,
                b.objective_bps_hz
            );
        }
    }

    #[test]
    fn hd_scheme_ignores_si_cancellation() {
        let base = SimConfig {
            n_cells: 2,
            n_dl_users: 2,
            n_ul_users: 2,
            base_seed: 37,
            snr_ratio_db: 70.0,
            vertex_budget: 4_000,
            ..SimConfig::default()
        };
        let topo = generate_drop(&base, 0);
        let ch = build_channels(&topo, &base, 0);
        let lo = SimConfig {
            kappa_si_db: -130.0,
            ..base.clone()
        };
        let hi = SimConfig {
            kappa_si_db: -60.0,
            ..base
        };
        let a = evaluate_scheme(&ch, &topo, SchemeKind::HdbNoma, &lo);
        let b = evaluate_scheme(&ch, &topo, SchemeKind::HdbNoma, &hi);
        assert_eq!(a.objective_bps_hz, b.objective_bps_hz);
    }

    #[test]
    fn centralized_dominates_uncancelled_pointwise_and_at_the_optimum() {
        let cfg = SimConfig {
            n_cells: 2,
            n_dl_users: 2,
            n_ul_users: 2,
            base_seed: 41,
            snr_ratio_db: 85.0,
            vertex_budget: 4_000,
            ..SimConfig::default()
        };
        let mut rng = ChaCha8Rng::seed_from_u64(6);
        for drop in 0..4 {
            let topo = generate_drop(&cfg, drop);
            let ch = build_channels(&topo, &cfg, drop);
            let order = sic_order(&ch, &topo);
            let c_model = SinrModel::build(&ch, &topo, &order, SchemeKind::CFdbNomaOptimal, &cfg);
            let f_model = SinrModel::build(&ch, &topo, &order, SchemeKind::FdbNoma, &cfg);
            // Pointwise dominance in the power vector.
            for _ in 0..50 {
                let mut x: Vec<f64> = c_model
                    .bounds
                    .var_cap
                    .iter()
                    .map(|&c| c * rng.random::<f64>())
                    .collect();
                c_model.bounds.clip(&mut x);
                assert!(c_model.objective(&x) >= f_model.objective(&x) - 1e-12);
            }
            // Hence the optima are ordered the same way.
            let a = evaluate_scheme(&ch, &topo, SchemeKind::CFdbNomaOptimal, &cfg);
            let b = evaluate_scheme(&ch, &topo, SchemeKind::FdbNoma, &cfg);
            assert!(a.objective_bps_hz >= b.objective_bps_hz - cfg.solver_tol);
        }
    }

    #[test]
    fn all_schemes_are_feasible_without_rate_demand() {
        let cfg = SimConfig {
            n_cells: 2,
            n_dl_users: 2,
            n_ul_users: 2,
            base_seed: 43,
            snr_ratio_db: 70.0,
            vertex_budget: 3_000,
            ..SimConfig::default()
        };
        let topo = generate_drop(&cfg, 1);
        let ch = build_channels(&topo, &cfg, 1);
        for scheme in SchemeKind::ALL {
            let res = evaluate_scheme(&ch, &topo, scheme, &cfg);
            assert!(res.feasible, "{scheme} infeasible at r_min = 0");
        }
    }
}
