//! Monte Carlo harness: paired per-drop evaluation of all requested schemes,
//! sweeps over the operating point, and CSV aggregation.
//!
//! Every drop is generated from `(base_seed, drop_index)` alone, so all
//! schemes and all sweep values see identical node layouts and fading.
//! Drops run in parallel; aggregation walks them in drop order, which makes
//! the output independent of the worker count.

use rayon::prelude::*;

use crate::bench::evaluate_scheme;
use crate::link::{sic_order, strict_decodability_rates};
use crate::model::{SchemeKind, SimConfig, SolverResult};
use crate::propagation::{build_channels, generate_drop};

/// Which scenario parameter a sweep varies.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SweepVariable {
    SnrRatioDb,
    KappaSiDb,
}

impl SweepVariable {
    pub fn name(self) -> &'static str {
        match self {
            SweepVariable::SnrRatioDb => "snr_ratio_db",
            SweepVariable::KappaSiDb => "kappa_si_db",
        }
    }

    pub fn parse(s: &str) -> Option<SweepVariable> {
        match s {
            "snr_ratio_db" => Some(SweepVariable::SnrRatioDb),
            "kappa_si_db" => Some(SweepVariable::KappaSiDb),
            _ => None,
        }
    }

    pub fn apply(self, cfg: &SimConfig, value_db: f64) -> SimConfig {
        let mut out = cfg.clone();
        match self {
            SweepVariable::SnrRatioDb => out.snr_ratio_db = value_db,
            SweepVariable::KappaSiDb => out.kappa_si_db = value_db,
        }
        out
    }
}

/// A sweep design: the swept variable with its grid, the schemes compared on
/// each drop, and the drop count.
#[derive(Debug, Clone, PartialEq)]
pub struct SweepSpec {
    /// `None` evaluates the configuration as a single operating point.
    pub variable: Option<SweepVariable>,
    pub values: Vec<f64>,
    pub schemes: Vec<SchemeKind>,
    pub n_drops: usize,
}

impl SweepSpec {
    /// Evaluate the configuration as-is: no swept variable, one pass.
    pub fn single_point(cfg: &SimConfig) -> SweepSpec {
        SweepSpec {
            variable: None,
            values: Vec::new(),
            schemes: vec![cfg.scheme],
            n_drops: cfg.n_drops,
        }
    }

    pub fn validate(&self) -> Result<(), String> {
        if self.n_drops == 0 {
            return Err("n_drops must be at least 1".into());
        }
        if self.schemes.is_empty() {
            return Err("schemes must not be empty".into());
        }
        if self.variable.is_some() {
            if self.values.is_empty() {
                return Err("sweep_values must not be empty".into());
            }
            for w in self.values.windows(2) {
                if !(w[1] > w[0]) {
                    return Err(format!(
                        "sweep_values must be strictly increasing ({} then {})",
                        w[0], w[1]
                    ));
                }
            }
        }
        Ok(())
    }
}

/// One scheme's outcome on one drop.
#[derive(Debug, Clone, PartialEq)]
pub struct DropEval {
    pub scheme: SchemeKind,
    pub result: SolverResult,
    /// The throughput entering the averages; differs from the solver
    /// objective only under the strict-decodability reporting model.
    pub reported_tput: f64,
    /// True when the polyblock budget ran out and the SCA result replaced or
    /// confirmed it.
    pub fell_back: bool,
}

/// Evaluate every requested scheme on one drop (identical realization for
/// all of them).
///
/// A polyblock run that exhausts its vertex budget already carries the SCA
/// value through its warm start; with `sca_fallback` set, such a result is
/// accepted and counted as a fallback, otherwise it stays flagged as an
/// unrecovered budget exhaustion (the CLI turns that into exit code 4).
pub fn run_drop(
    cfg: &SimConfig,
    schemes: &[SchemeKind],
    drop_index: usize,
    sca_fallback: bool,
) -> Vec<DropEval> {
    let topo = generate_drop(cfg, drop_index);
    let ch = build_channels(&topo, cfg, drop_index);
    let order = sic_order(&ch, &topo);
    schemes
        .iter()
        .map(|&scheme| {
            let result = evaluate_scheme(&ch, &topo, scheme, cfg);
            let fell_back = result.budget_exhausted && sca_fallback;
            let reported_tput = if cfg.strict_decodability && result.feasible {
                strict_decodability_rates(&result.p, &ch, &topo, &order, scheme, cfg)
                    .map(|rates| rates.iter().sum())
                    .unwrap_or(result.objective_bps_hz)
            } else {
                result.objective_bps_hz
            };
            DropEval {
                scheme,
                result,
                reported_tput,
                fell_back,
            }
        })
        .collect()
}

/// Aggregated statistics for one (scheme, sweep value) pair.
#[derive(Debug, Clone, PartialEq)]
pub struct SweepCell {
    pub scheme: SchemeKind,
    pub value_db: f64,
    /// Mean throughput over feasible drops, bits/s/Hz.
    pub mean_tput: f64,
    /// Standard error of that mean.
    pub stderr: f64,
    pub n_feasible: usize,
    pub n_drops: usize,
    pub mean_iters: f64,
    pub n_fallback: usize,
    pub n_budget_exhausted: usize,
}

/// Full sweep output, row-major over (sweep value, scheme).
#[derive(Debug, Clone, PartialEq)]
pub struct SweepResult {
    pub variable: Option<SweepVariable>,
    pub cells: Vec<SweepCell>,
}

impl SweepResult {
    pub fn cell(&self, scheme: SchemeKind, value_db: f64) -> Option<&SweepCell> {
        self.cells
            .iter()
            .find(|c| c.scheme == scheme && (c.value_db == value_db || c.value_db.is_nan() && value_db.is_nan()))
    }

    /// CSV with the fixed schema
    /// `scheme,sweep_var,sweep_value_db,mean_tput,stderr,n_feasible,mean_iters`.
    pub fn to_csv(&self) -> String {
        let var_name = match self.variable {
            Some(v) => v.name(),
            None => "none",
        };
        let mut out = String::from(
            "scheme,sweep_var,sweep_value_db,mean_tput,stderr,n_feasible,mean_iters\n",
        );
        for c in &self.cells {
            out.push_str(&format!(
                "{},{},{},{:.6},{:.6},{},{:.3}\n",
                c.scheme,
                var_name,
                if c.value_db.is_nan() {
                    "-".to_string()
                } else {
                    format!("{}", c.value_db)
                },
                c.mean_tput,
                c.stderr,
                c.n_feasible,
                c.mean_iters
            ));
        }
        out
    }

    pub fn total_fallbacks(&self) -> usize {
        self.cells.iter().map(|c| c.n_fallback).sum()
    }

    pub fn total_budget_exhausted(&self) -> usize {
        self.cells.iter().map(|c| c.n_budget_exhausted).sum()
    }

    pub fn all_infeasible(&self) -> bool {
        self.cells.iter().all(|c| c.n_feasible == 0)
    }
}

fn aggregate(
    scheme: SchemeKind,
    value_db: f64,
    per_drop: &[Vec<DropEval>],
    scheme_pos: usize,
) -> SweepCell {
    let mut tputs = Vec::new();
    let mut iters_sum = 0.0;
    let mut n_fallback = 0;
    let mut n_budget = 0;
    for drop in per_drop {
        let eval = &drop[scheme_pos];
        debug_assert_eq!(eval.scheme, scheme);
        if eval.fell_back {
            n_fallback += 1;
        }
        if eval.result.budget_exhausted {
            n_budget += 1;
        }
        if eval.result.feasible {
            tputs.push(eval.reported_tput);
            iters_sum += eval.result.iterations as f64;
        }
    }
    let n = tputs.len();
    let mean = if n > 0 {
        tputs.iter().sum::<f64>() / n as f64
    } else {
        f64::NAN
    };
    let stderr = if n > 1 {
        let var = tputs.iter().map(|t| (t - mean) * (t - mean)).sum::<f64>() / (n - 1) as f64;
        (var / n as f64).sqrt()
    } else {
        0.0
    };
    SweepCell {
        scheme,
        value_db,
        mean_tput: mean,
        stderr,
        n_feasible: n,
        n_drops: per_drop.len(),
        mean_iters: if n > 0 { iters_sum / n as f64 } else { 0.0 },
        n_fallback,
        n_budget_exhausted: n_budget,
    }
}

/// Run a sweep with `workers` threads (0 = all cores). Deterministic in the
/// configuration: the output is bitwise identical for any worker count.
pub fn run_sweep(spec: &SweepSpec, cfg: &SimConfig, workers: usize, sca_fallback: bool) -> SweepResult {
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(workers)
        .build()
        .expect("thread pool");
    let mut cells = Vec::new();
    let values: Vec<f64> = if spec.variable.is_some() {
        spec.values.clone()
    } else {
        vec![f64::NAN]
    };
    for &value in &values {
        let cfg_v = match spec.variable {
            Some(var) => var.apply(cfg, value),
            None => cfg.clone(),
        };
        // Paired drops: index order fixed, execution order free.
        let per_drop: Vec<Vec<DropEval>> = pool.install(|| {
            (0..spec.n_drops)
                .into_par_iter()
                .map(|drop| run_drop(&cfg_v, &spec.schemes, drop, sca_fallback))
                .collect()
        });
        for (pos, &scheme) in spec.schemes.iter().enumerate() {
            cells.push(aggregate(scheme, value, &per_drop, pos));
        }
    }
    SweepResult {
        variable: spec.variable,
        cells,
    }
}
