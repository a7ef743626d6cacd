//! Domain types shared by every other module: unit conversions, transmission
//! schemes, the scenario configuration, power vectors and solver results.
//!
//! Internally everything is kept in linear units (watts, meters, linear power
//! gains). dB and dBm appear only at the configuration and output boundaries.

use thiserror::Error;

/// Convert a dBm value to watts: `10^((x - 30) / 10)`.
pub fn dbm_to_watts(dbm: f64) -> f64 {
    10f64.powf((dbm - 30.0) / 10.0)
}

/// Inverse of [`dbm_to_watts`].
pub fn watts_to_dbm(watts: f64) -> f64 {
    10.0 * watts.log10() + 30.0
}

/// Convert a dB value to a linear power ratio.
pub fn db_to_linear(db: f64) -> f64 {
    10f64.powf(db / 10.0)
}

/// Convert a linear power ratio to dB.
pub fn linear_to_db(linear: f64) -> f64 {
    10.0 * linear.log10()
}

/// Duplexing mode of the base stations.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Duplex {
    Fd,
    Hd,
}

/// Multiple-access mode.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Access {
    Noma,
    Oma,
}

/// How cross-cell DL-to-UL interference is treated at the receive side.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum DuCancellation {
    /// Centralized processing leaves only a residual (scaled by `kappa_du`).
    Residual,
    /// No cancellation; the full DL-to-UL term applies.
    None,
    /// Not applicable (half-duplex operation).
    NotApplicable,
}

/// The five transmission schemes compared by the simulator.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum SchemeKind {
    /// Centralized FD NOMA, power allocation by the global polyblock solver.
    CFdbNomaOptimal,
    /// Centralized FD NOMA, power allocation by the SCA solver.
    CFdbNomaSuboptimal,
    /// FD NOMA without centralized processing: DL-to-UL interference is not cancelled.
    FdbNoma,
    /// FD base stations serving DL and UL users on orthogonal subbands.
    FdbOma,
    /// Half-duplex NOMA: DL and UL occupy orthogonal halves of the resource.
    HdbNoma,
}

impl SchemeKind {
    pub const ALL: [SchemeKind; 5] = [
        SchemeKind::CFdbNomaOptimal,
        SchemeKind::CFdbNomaSuboptimal,
        SchemeKind::FdbNoma,
        SchemeKind::FdbOma,
        SchemeKind::HdbNoma,
    ];

    pub fn duplex_mode(self) -> Duplex {
        match self {
            SchemeKind::HdbNoma => Duplex::Hd,
            _ => Duplex::Fd,
        }
    }

    pub fn access_mode(self) -> Access {
        match self {
            SchemeKind::FdbOma => Access::Oma,
            _ => Access::Noma,
        }
    }

    pub fn du_cancellation(self) -> DuCancellation {
        match self {
            SchemeKind::CFdbNomaOptimal | SchemeKind::CFdbNomaSuboptimal | SchemeKind::FdbOma => {
                DuCancellation::Residual
            }
            SchemeKind::FdbNoma => DuCancellation::None,
            SchemeKind::HdbNoma => DuCancellation::NotApplicable,
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            SchemeKind::CFdbNomaOptimal => "c-fdb-noma-optimal",
            SchemeKind::CFdbNomaSuboptimal => "c-fdb-noma-suboptimal",
            SchemeKind::FdbNoma => "fdb-noma",
            SchemeKind::FdbOma => "fdb-oma",
            SchemeKind::HdbNoma => "hdb-noma",
        }
    }

    pub fn parse(s: &str) -> Option<SchemeKind> {
        SchemeKind::ALL.iter().copied().find(|k| k.name() == s)
    }
}

impl std::fmt::Display for SchemeKind {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.name())
    }
}

/// All scenario parameters. Constructed from a config file or [`Default`].
#[derive(Debug, Clone, PartialEq)]
pub struct SimConfig {
    /// Radius of the circular network area in meters.
    pub area_radius_m: f64,
    /// Path loss exponent alpha; gain = max(d, d_min)^(-alpha).
    pub pathloss_exponent: f64,
    /// Distance clamp avoiding the path-loss singularity at d -> 0.
    pub min_distance_m: f64,
    pub n_cells: usize,
    pub n_dl_users: usize,
    pub n_ul_users: usize,
    /// Maximum total DL transmit power per RRH.
    pub p_dl_max_dbm: f64,
    /// Maximum transmit power per UL user.
    pub p_ul_max_dbm: f64,
    /// Self-interference channel gain (constant, no fading).
    pub si_channel_gain_db: f64,
    /// Residual self-interference cancellation coefficient.
    pub kappa_si_db: f64,
    /// Residual DL-to-UL cross-cell cancellation coefficient (centralized schemes).
    pub kappa_du_db: f64,
    /// Operating point P_DL_max / N0; the noise power is derived from it.
    pub snr_ratio_db: f64,
    /// Minimum per-user rate demand in bits/s/Hz (one value for all users).
    pub r_min_bps_hz: f64,
    /// Convergence tolerance shared by both solvers.
    pub solver_tol: f64,
    pub scheme: SchemeKind,
    pub n_drops: usize,
    pub base_seed: u64,
    /// Evaluation-only cross-receiver decodability model (never used inside solvers).
    pub strict_decodability: bool,
    /// Polyblock solver vertex budget.
    pub vertex_budget: usize,
    /// Number of SCA initializations per solve (first one uses the default policy).
    pub sca_restarts: usize,
}

impl Default for SimConfig {
    fn default() -> Self {
        SimConfig {
            area_radius_m: 300.0,
            pathloss_exponent: 3.5,
            min_distance_m: 1.0,
            n_cells: 2,
            n_dl_users: 4,
            n_ul_users: 4,
            p_dl_max_dbm: 30.0,
            p_ul_max_dbm: 27.0,
            si_channel_gain_db: 0.0,
            kappa_si_db: -110.0,
            kappa_du_db: -110.0,
            snr_ratio_db: 90.0,
            r_min_bps_hz: 0.0,
            solver_tol: 1e-3,
            scheme: SchemeKind::CFdbNomaOptimal,
            n_drops: 50,
            base_seed: 1,
            strict_decodability: false,
            vertex_budget: 200_000,
            sca_restarts: 1,
        }
    }
}

impl SimConfig {
    pub fn p_dl_max_w(&self) -> f64 {
        dbm_to_watts(self.p_dl_max_dbm)
    }

    pub fn p_ul_max_w(&self) -> f64 {
        dbm_to_watts(self.p_ul_max_dbm)
    }

    /// Noise power derived from the configured P_DL_max / N0 ratio.
    pub fn noise_w(&self) -> f64 {
        self.p_dl_max_w() / db_to_linear(self.snr_ratio_db)
    }

    pub fn kappa_si(&self) -> f64 {
        db_to_linear(self.kappa_si_db)
    }

    pub fn kappa_du(&self) -> f64 {
        db_to_linear(self.kappa_du_db)
    }

    pub fn si_channel_gain(&self) -> f64 {
        db_to_linear(self.si_channel_gain_db)
    }
}

/// A violated configuration invariant, reported by field name.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ConfigViolation {
    pub field: &'static str,
    pub message: String,
}

impl std::fmt::Display for ConfigViolation {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "{}: {}", self.field, self.message)
    }
}

/// Check every configuration invariant; returns the full list of violations
/// rather than stopping at the first.
pub fn validate_config(cfg: &SimConfig) -> Result<(), Vec<ConfigViolation>> {
    let mut errs = Vec::new();
    let mut bad = |field: &'static str, message: String| {
        errs.push(ConfigViolation {
            field,
            message,
        })
    };

    let positive = [
        ("area_radius_m", cfg.area_radius_m),
        ("pathloss_exponent", cfg.pathloss_exponent),
        ("min_distance_m", cfg.min_distance_m),
        ("solver_tol", cfg.solver_tol),
    ];
    for (field, v) in positive {
        if !(v > 0.0) || !v.is_finite() {
            bad(field, format!("must be positive and finite, got {v}"));
        }
    }
    let finite = [
        ("p_dl_max_dbm", cfg.p_dl_max_dbm),
        ("p_ul_max_dbm", cfg.p_ul_max_dbm),
        ("si_channel_gain_db", cfg.si_channel_gain_db),
        ("kappa_si_db", cfg.kappa_si_db),
        ("kappa_du_db", cfg.kappa_du_db),
        ("snr_ratio_db", cfg.snr_ratio_db),
    ];
    for (field, v) in finite {
        if !v.is_finite() {
            bad(field, format!("must be finite, got {v}"));
        }
    }
    if !(cfg.r_min_bps_hz >= 0.0) || !cfg.r_min_bps_hz.is_finite() {
        bad(
            "r_min_bps_hz",
            format!("must be nonnegative and finite, got {}", cfg.r_min_bps_hz),
        );
    }
    for (field, v) in [
        ("n_cells", cfg.n_cells),
        ("n_dl_users", cfg.n_dl_users),
        ("n_ul_users", cfg.n_ul_users),
        ("n_drops", cfg.n_drops),
        ("vertex_budget", cfg.vertex_budget),
        ("sca_restarts", cfg.sca_restarts),
    ] {
        if v == 0 {
            bad(field, "must be positive".to_string());
        }
    }
    if cfg.n_cells > 0 {
        if cfg.n_dl_users % cfg.n_cells != 0 {
            bad(
                "n_dl_users",
                format!("not divisible by n_cells ({} % {})", cfg.n_dl_users, cfg.n_cells),
            );
        }
        if cfg.n_ul_users % cfg.n_cells != 0 {
            bad(
                "n_ul_users",
                format!("not divisible by n_cells ({} % {})", cfg.n_ul_users, cfg.n_cells),
            );
        }
    }
    if cfg.min_distance_m >= cfg.area_radius_m {
        bad(
            "min_distance_m",
            format!(
                "must be smaller than area_radius_m ({} >= {})",
                cfg.min_distance_m, cfg.area_radius_m
            ),
        );
    }
    if errs.is_empty() {
        Ok(())
    } else {
        Err(errs)
    }
}

/// The decision vector: per-DL-user cell transmit powers and per-UL-user powers.
///
/// `dl_w[d]` is the power the serving RRH spends on DL user `d`; `ul_w[u]` is
/// the transmit power of UL user `u`. All watts.
#[derive(Debug, Clone, PartialEq)]
pub struct PowerAllocation {
    pub dl_w: Vec<f64>,
    pub ul_w: Vec<f64>,
}

impl PowerAllocation {
    pub fn zeros(n_dl: usize, n_ul: usize) -> Self {
        PowerAllocation {
            dl_w: vec![0.0; n_dl],
            ul_w: vec![0.0; n_ul],
        }
    }

    pub fn n_vars(&self) -> usize {
        self.dl_w.len() + self.ul_w.len()
    }

    /// Flatten to the solver variable layout: DL users first, then UL users.
    pub fn to_flat(&self) -> Vec<f64> {
        let mut x = Vec::with_capacity(self.n_vars());
        x.extend_from_slice(&self.dl_w);
        x.extend_from_slice(&self.ul_w);
        x
    }

    pub fn from_flat(x: &[f64], n_dl: usize) -> Self {
        PowerAllocation {
            dl_w: x[..n_dl].to_vec(),
            ul_w: x[n_dl..].to_vec(),
        }
    }
}

/// Violation of the feasible power set.
#[derive(Debug, Error, Clone, PartialEq)]
pub enum PowerError {
    #[error("power variable {index} is negative: {value}")]
    Negative { index: usize, value: f64 },
    #[error("power variable {index} exceeds its cap: {value} > {cap}")]
    AboveCap { index: usize, value: f64, cap: f64 },
    #[error("cell {cell} DL power sum exceeds the cap: {sum} > {cap}")]
    CellSum { cell: usize, sum: f64, cap: f64 },
    #[error("power vector has {got} variables, expected {expected}")]
    Shape { got: usize, expected: usize },
}

/// Per-iteration record of the polyblock solver.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PolyblockTraceRow {
    pub iter: usize,
    pub upper_bound: f64,
    pub cbv: f64,
    pub n_vertices: usize,
}

/// Per-iteration record of the SCA solver.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ScaTraceRow {
    pub iter: usize,
    pub objective: f64,
    pub step_norm: f64,
    pub kkt_residual: f64,
}

/// Solver iteration trace; the variants carry their CSV schemas.
#[derive(Debug, Clone, PartialEq, Default)]
pub enum SolverTrace {
    #[default]
    Empty,
    Polyblock(Vec<PolyblockTraceRow>),
    Sca(Vec<ScaTraceRow>),
}

impl SolverTrace {
    /// The spec-level view: (iteration, bound-or-objective) pairs.
    pub fn points(&self) -> Vec<(usize, f64)> {
        match self {
            SolverTrace::Empty => Vec::new(),
            SolverTrace::Polyblock(rows) => rows.iter().map(|r| (r.iter, r.upper_bound)).collect(),
            SolverTrace::Sca(rows) => rows.iter().map(|r| (r.iter, r.objective)).collect(),
        }
    }

    /// Render the trace as CSV with the solver-specific column schema.
    pub fn to_csv(&self) -> String {
        let mut out = String::new();
        match self {
            SolverTrace::Empty => out.push_str("iter,value\n"),
            SolverTrace::Polyblock(rows) => {
                out.push_str("iter,upper_bound,cbv,n_vertices\n");
                for r in rows {
                    out.push_str(&format!(
                        "{},{:.9},{:.9},{}\n",
                        r.iter, r.upper_bound, r.cbv, r.n_vertices
                    ));
                }
            }
            SolverTrace::Sca(rows) => {
                out.push_str("iter,objective,step_norm,kkt_residual\n");
                for r in rows {
                    out.push_str(&format!(
                        "{},{:.9},{:.3e},{:.3e}\n",
                        r.iter, r.objective, r.step_norm, r.kkt_residual
                    ));
                }
            }
        }
        out
    }
}

/// Outcome of one power-allocation solve.
#[derive(Debug, Clone, PartialEq)]
pub struct SolverResult {
    pub p: PowerAllocation,
    pub objective_bps_hz: f64,
    pub feasible: bool,
    pub iterations: usize,
    pub trace: SolverTrace,
    /// True when the polyblock vertex budget ran out before the gap closed.
    pub budget_exhausted: bool,
}

impl SolverResult {
    pub fn infeasible(n_dl: usize, n_ul: usize) -> Self {
        SolverResult {
            p: PowerAllocation::zeros(n_dl, n_ul),
            objective_bps_hz: 0.0,
            feasible: false,
            iterations: 0,
            trace: SolverTrace::Empty,
            budget_exhausted: false,
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn dbm_definition_points() {
        assert_eq!(dbm_to_watts(30.0), 1.0);
        assert_eq!(dbm_to_watts(0.0), 0.001);
        // 10^(-0.3), evaluated independently.
        assert!((dbm_to_watts(27.0) - 0.5012).abs() < 1e-4);
    }

    #[test]
    fn dbm_watts_round_trip() {
        // x in [-50, 50] dBm recovers to 1e-12 relative.
        let mut x = -50.0f64;
        while x <= 50.0 {
            let back = watts_to_dbm(dbm_to_watts(x));
            let denom = x.abs().max(1.0);
            assert!(
                (back - x).abs() / denom < 1e-12,
                "round trip failed at {x}: {back}"
            );
            x += 0.37;
        }
    }

    #[test]
    fn scheme_flags_match_definitions() {
        use SchemeKind::*;
        for k in [CFdbNomaOptimal, CFdbNomaSuboptimal] {
            assert_eq!(k.duplex_mode(), Duplex::Fd);
            assert_eq!(k.access_mode(), Access::Noma);
            assert_eq!(k.du_cancellation(), DuCancellation::Residual);
        }
        assert_eq!(FdbNoma.duplex_mode(), Duplex::Fd);
        assert_eq!(FdbNoma.du_cancellation(), DuCancellation::None);
        assert_eq!(FdbOma.access_mode(), Access::Oma);
        assert_eq!(FdbOma.du_cancellation(), DuCancellation::Residual);
        assert_eq!(HdbNoma.duplex_mode(), Duplex::Hd);
        assert_eq!(HdbNoma.du_cancellation(), DuCancellation::NotApplicable);
    }

    #[test]
    fn scheme_names_round_trip() {
        for k in SchemeKind::ALL {
            assert_eq!(SchemeKind::parse(k.name()), Some(k));
        }
        assert_eq!(SchemeKind::parse("nonsense"), None);
    }

    #[test]
    fn default_config_is_valid() {
        assert!(validate_config(&SimConfig::default()).is_ok());
    }

    #[test]
    fn divisibility_violation_is_reported() {
        let cfg = SimConfig {
            n_dl_users: 3,
            ..SimConfig::default()
        };
        let errs = validate_config(&cfg).unwrap_err();
        assert!(errs.iter().any(|e| e.field == "n_dl_users" && e.message.contains("not divisible")));
    }

    #[test]
    fn zero_tolerance_is_reported() {
        let cfg = SimConfig {
            solver_tol: 0.0,
            ..SimConfig::default()
        };
        let errs = validate_config(&cfg).unwrap_err();
        assert!(errs.iter().any(|e| e.field == "solver_tol" && e.message.contains("positive")));
    }

    #[test]
    fn violations_accumulate() {
        let cfg = SimConfig {
            solver_tol: -1.0,
            n_dl_users: 3,
            area_radius_m: -5.0,
            ..SimConfig::default()
        };
        let errs = validate_config(&cfg).unwrap_err();
        assert!(errs.len() >= 3);
    }

    #[test]
    fn noise_derivation_from_ratio() {
        let cfg = SimConfig {
            snr_ratio_db: 90.0,
            ..SimConfig::default()
        };
        // 1 W / 10^9
        assert!((cfg.noise_w() - 1e-9).abs() < 1e-21);
    }
}
