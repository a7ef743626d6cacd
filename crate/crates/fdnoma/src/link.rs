//! The SINR and rate engine.
//!
//! For every scheme, each user's received signal and interference decompose
//! into the intra-cell NOMA term plus five cross terms: DL-to-UL, UL-to-DL,
//! DL-to-DL, UL-to-UL and self-interference. All of them are linear in the
//! power vector, so the whole model is captured by per-user coefficient
//! vectors over the stacked variable layout (DL powers first, then UL
//! powers). Solvers work on that linear form; [`sinr_breakdown`] reports the
//! individual components.
//!
//! Rate convention: a user with resource weight `w` achieves
//! `w * log2(1 + SINR)` bits/s/Hz, and its minimum-rate constraint is
//! `w * log2(1 + SINR) >= r_min` (equivalently `1 + SINR >= 2^(r_min/w)`).
//! The weight is 1 for full-duplex NOMA, 1/2 for half-duplex NOMA and 1/K
//! for K-subband OMA.

use crate::model::{DuCancellation, Duplex, PowerAllocation, PowerError, SchemeKind, SimConfig};
use crate::propagation::{ChannelSet, Topology};

/// Per-cell SIC decoding orders: DL users by descending RRH-to-user gain,
/// UL users by descending user-to-RRH received gain. Ties break toward the
/// lower user index.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SicOrder {
    /// `dl_rank[c]` lists the DL users of cell `c`, strongest channel first.
    pub dl_rank: Vec<Vec<usize>>,
    /// `ul_rank[c]` lists the UL users of cell `c`, strongest received gain first.
    pub ul_rank: Vec<Vec<usize>>,
}

pub fn sic_order(ch: &ChannelSet, topo: &Topology) -> SicOrder {
    let n_cells = topo.rrh_xy.len();
    let mut dl_rank = vec![Vec::new(); n_cells];
    let mut ul_rank = vec![Vec::new(); n_cells];
    for (d, &c) in topo.dl_cell.iter().enumerate() {
        dl_rank[c].push(d);
    }
    for (u, &c) in topo.ul_cell.iter().enumerate() {
        ul_rank[c].push(u);
    }
    for (c, members) in dl_rank.iter_mut().enumerate() {
        members.sort_by(|&a, &b| {
            ch.g_rrh_dl[c][b]
                .partial_cmp(&ch.g_rrh_dl[c][a])
                .unwrap()
                .then(a.cmp(&b))
        });
    }
    for (c, members) in ul_rank.iter_mut().enumerate() {
        members.sort_by(|&a, &b| {
            ch.g_ul_rrh[c][b]
                .partial_cmp(&ch.g_ul_rrh[c][a])
                .unwrap()
                .then(a.cmp(&b))
        });
    }
    SicOrder { dl_rank, ul_rank }
}

/// Which side of the link a user is on.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum UserKind {
    Dl,
    Ul,
}

/// One user's linear SINR description: `SINR = own_gain * x[var] /
/// (noise + c_total . x)` where `x` is the stacked power vector.
#[derive(Debug, Clone, PartialEq)]
pub struct UserRow {
    pub kind: UserKind,
    /// Index within its kind (DL user index or UL user index).
    pub user: usize,
    pub cell: usize,
    /// 1-based SIC rank within the cell (index-order position for OMA).
    pub rank: usize,
    /// OMA subband, when the scheme uses one.
    pub subband: Option<usize>,
    /// Resource weight multiplying log2(1 + SINR).
    pub weight: f64,
    /// Own power variable in the stacked layout.
    pub var: usize,
    pub own_gain: f64,
    pub c_intra: Vec<f64>,
    pub c_dl_to_dl: Vec<f64>,
    pub c_ul_to_dl: Vec<f64>,
    pub c_dl_to_ul: Vec<f64>,
    pub c_ul_to_ul: Vec<f64>,
    pub c_self: Vec<f64>,
    /// Sum of the six category vectors; the hot-path interference coefficients.
    pub c_total: Vec<f64>,
}

/// The feasible power set: per-variable caps plus per-cell DL sum caps.
#[derive(Debug, Clone, PartialEq)]
pub struct PowerBounds {
    pub var_cap: Vec<f64>,
    /// DL variable indices per cell.
    pub cell_dl_vars: Vec<Vec<usize>>,
    pub cell_dl_cap_w: f64,
}

/// Relative slack tolerated when checking cap constraints.
pub const CAP_REL_TOL: f64 = 1e-9;

impl PowerBounds {
    pub fn n_vars(&self) -> usize {
        self.var_cap.len()
    }

    pub fn check_flat(&self, x: &[f64]) -> Result<(), PowerError> {
        if x.len() != self.var_cap.len() {
            return Err(PowerError::Shape {
                got: x.len(),
                expected: self.var_cap.len(),
            });
        }
        for (i, (&v, &cap)) in x.iter().zip(&self.var_cap).enumerate() {
            if v < 0.0 {
                return Err(PowerError::Negative { index: i, value: v });
            }
            if v > cap * (1.0 + CAP_REL_TOL) {
                return Err(PowerError::AboveCap {
                    index: i,
                    value: v,
                    cap,
                });
            }
        }
        for (cell, vars) in self.cell_dl_vars.iter().enumerate() {
            let sum: f64 = vars.iter().map(|&i| x[i]).sum();
            if sum > self.cell_dl_cap_w * (1.0 + CAP_REL_TOL) {
                return Err(PowerError::CellSum {
                    cell,
                    sum,
                    cap: self.cell_dl_cap_w,
                });
            }
        }
        Ok(())
    }

    /// Clip a point into the feasible set: clamp to the boxes, then rescale
    /// any cell whose DL sum exceeds the cap.
    pub fn clip(&self, x: &mut [f64]) {
        for (v, &cap) in x.iter_mut().zip(&self.var_cap) {
            *v = v.clamp(0.0, cap);
        }
        for vars in &self.cell_dl_vars {
            let sum: f64 = vars.iter().map(|&i| x[i]).sum();
            if sum > self.cell_dl_cap_w {
                let scale = self.cell_dl_cap_w / sum;
                for &i in vars {
                    x[i] *= scale;
                }
            }
        }
    }
}

/// The complete linear SINR model of one (channel realization, scheme) pair.
#[derive(Debug, Clone, PartialEq)]
pub struct SinrModel {
    pub scheme: SchemeKind,
    pub n_dl: usize,
    pub n_ul: usize,
    pub noise_w: f64,
    pub r_min: f64,
    pub solver_tol: f64,
    pub rows: Vec<UserRow>,
    pub bounds: PowerBounds,
    /// OMA subband count; 1 otherwise.
    pub n_subbands: usize,
}

impl SinrModel {
    pub fn n_vars(&self) -> usize {
        self.n_dl + self.n_ul
    }

    pub fn n_users(&self) -> usize {
        self.rows.len()
    }

    /// Build the per-user coefficient rows for a scheme on one realization.
    pub fn build(
        ch: &ChannelSet,
        topo: &Topology,
        order: &SicOrder,
        scheme: SchemeKind,
        cfg: &SimConfig,
    ) -> SinrModel {
        let n_cells = topo.rrh_xy.len();
        let n_dl = topo.dl_xy.len();
        let n_ul = topo.ul_xy.len();
        let n_vars = n_dl + n_ul;
        let duplex = scheme.duplex_mode();
        let kappa_si = cfg.kappa_si();
        let kappa_eff = match scheme.du_cancellation() {
            DuCancellation::Residual => cfg.kappa_du(),
            DuCancellation::None => 1.0,
            DuCancellation::NotApplicable => 0.0,
        };

        // SIC rank (1-based) per user within its cell.
        let mut dl_sic_rank = vec![0usize; n_dl];
        for ranks in &order.dl_rank {
            for (r, &d) in ranks.iter().enumerate() {
                dl_sic_rank[d] = r + 1;
            }
        }
        let mut ul_sic_rank = vec![0usize; n_ul];
        for ranks in &order.ul_rank {
            for (r, &u) in ranks.iter().enumerate() {
                ul_sic_rank[u] = r + 1;
            }
        }

        // Index-order cell membership, used for OMA subband pairing.
        let mut cell_dl_members = vec![Vec::new(); n_cells];
        for (d, &c) in topo.dl_cell.iter().enumerate() {
            cell_dl_members[c].push(d);
        }
        let mut cell_ul_members = vec![Vec::new(); n_cells];
        for (u, &c) in topo.ul_cell.iter().enumerate() {
            cell_ul_members[c].push(u);
        }

        let oma = scheme.access_mode() == crate::model::Access::Oma;
        let n_subbands = if oma {
            cell_dl_members
                .iter()
                .zip(&cell_ul_members)
                .map(|(d, u)| d.len().max(u.len()))
                .max()
                .unwrap_or(1)
                .max(1)
        } else {
            1
        };
        // The k-th DL and k-th UL user of each cell (index order) share subband k.
        let mut dl_subband = vec![0usize; n_dl];
        for members in &cell_dl_members {
            for (k, &d) in members.iter().enumerate() {
                dl_subband[d] = k;
            }
        }
        let mut ul_subband = vec![0usize; n_ul];
        for members in &cell_ul_members {
            for (k, &u) in members.iter().enumerate() {
                ul_subband[u] = k;
            }
        }

        let weight = match (duplex, oma) {
            (Duplex::Hd, _) => 0.5,
            (Duplex::Fd, true) => 1.0 / n_subbands as f64,
            (Duplex::Fd, false) => 1.0,
        };

        let p_dl_cap = cfg.p_dl_max_w();
        let p_ul_cap = cfg.p_ul_max_w();
        let dl_var_cap = if oma {
            // P_DL_max split equally across the subbands.
            p_dl_cap / n_subbands as f64
        } else {
            p_dl_cap
        };
        let mut var_cap = vec![dl_var_cap; n_dl];
        var_cap.extend(std::iter::repeat_n(p_ul_cap, n_ul));
        let mut cell_dl_vars = vec![Vec::new(); n_cells];
        for (d, &c) in topo.dl_cell.iter().enumerate() {
            cell_dl_vars[c].push(d);
        }
        let bounds = PowerBounds {
            var_cap,
            cell_dl_vars,
            cell_dl_cap_w: p_dl_cap,
        };

        let hd = duplex == Duplex::Hd;
        let mut rows = Vec::with_capacity(n_dl + n_ul);

        for d in 0..n_dl {
            let c = topo.dl_cell[d];
            let mut row = UserRow {
                kind: UserKind::Dl,
                user: d,
                cell: c,
                rank: if oma { dl_subband[d] + 1 } else { dl_sic_rank[d] },
                subband: oma.then_some(dl_subband[d]),
                weight,
                var: d,
                own_gain: ch.g_rrh_dl[c][d],
                c_intra: vec![0.0; n_vars],
                c_dl_to_dl: vec![0.0; n_vars],
                c_ul_to_dl: vec![0.0; n_vars],
                c_dl_to_ul: vec![0.0; n_vars],
                c_ul_to_ul: vec![0.0; n_vars],
                c_self: vec![0.0; n_vars],
                c_total: vec![0.0; n_vars],
            };
            if !oma {
                // Stronger-ranked co-users interfere; weaker ones are cancelled.
                for &d2 in &order.dl_rank[c] {
                    if dl_sic_rank[d2] < dl_sic_rank[d] {
                        row.c_intra[d2] = ch.g_rrh_dl[c][d];
                    }
                }
            }
            for (d2, &c2) in topo.dl_cell.iter().enumerate() {
                if c2 != c && (!oma || dl_subband[d2] == dl_subband[d]) {
                    row.c_dl_to_dl[d2] = ch.g_rrh_dl[c2][d];
                }
            }
            if !hd {
                // UL transmissions hit DL receivers whether intra- or inter-cell.
                for u in 0..n_ul {
                    if !oma || ul_subband[u] == dl_subband[d] {
                        row.c_ul_to_dl[n_dl + u] = ch.g_ul_dl[u][d];
                    }
                }
            }
            finish_row(&mut row);
            rows.push(row);
        }

        for u in 0..n_ul {
            let c = topo.ul_cell[u];
            let mut row = UserRow {
                kind: UserKind::Ul,
                user: u,
                cell: c,
                rank: if oma { ul_subband[u] + 1 } else { ul_sic_rank[u] },
                subband: oma.then_some(ul_subband[u]),
                weight,
                var: n_dl + u,
                own_gain: ch.g_ul_rrh[c][u],
                c_intra: vec![0.0; n_vars],
                c_dl_to_dl: vec![0.0; n_vars],
                c_ul_to_dl: vec![0.0; n_vars],
                c_dl_to_ul: vec![0.0; n_vars],
                c_ul_to_ul: vec![0.0; n_vars],
                c_self: vec![0.0; n_vars],
                c_total: vec![0.0; n_vars],
            };
            if !oma {
                // The BS decodes strongest first; weaker users are still undecoded.
                for &u2 in &order.ul_rank[c] {
                    if ul_sic_rank[u2] > ul_sic_rank[u] {
                        row.c_intra[n_dl + u2] = ch.g_ul_rrh[c][u2];
                    }
                }
            }
            for (u2, &c2) in topo.ul_cell.iter().enumerate() {
                if c2 != c && (!oma || ul_subband[u2] == ul_subband[u]) {
                    row.c_ul_to_ul[n_dl + u2] = ch.g_ul_rrh[c][u2];
                }
            }
            if !hd {
                // Residual SI scales with the serving RRH's own DL power.
                for (d2, &c2) in topo.dl_cell.iter().enumerate() {
                    if c2 == c && (!oma || dl_subband[d2] == ul_subband[u]) {
                        row.c_self[d2] = kappa_si * ch.g_si[c];
                    }
                }
                // Cross-cell DL reaches this RRH over the RRH-to-RRH path.
                for (d2, &c2) in topo.dl_cell.iter().enumerate() {
                    if c2 != c && (!oma || dl_subband[d2] == ul_subband[u]) {
                        row.c_dl_to_ul[d2] = kappa_eff * ch.g_rrh_rrh[c][c2];
                    }
                }
            }
            finish_row(&mut row);
            rows.push(row);
        }

        SinrModel {
            scheme,
            n_dl,
            n_ul,
            noise_w: cfg.noise_w(),
            r_min: cfg.r_min_bps_hz,
            solver_tol: cfg.solver_tol,
            rows,
            bounds,
            n_subbands,
        }
    }

    pub fn interference_w(&self, row: usize, x: &[f64]) -> f64 {
        dot(&self.rows[row].c_total, x)
    }

    pub fn signal_w(&self, row: usize, x: &[f64]) -> f64 {
        let r = &self.rows[row];
        r.own_gain * x[r.var]
    }

    pub fn sinr(&self, row: usize, x: &[f64]) -> f64 {
        self.signal_w(row, x) / (self.noise_w + self.interference_w(row, x))
    }

    pub fn rate(&self, row: usize, x: &[f64]) -> f64 {
        self.rows[row].weight * (1.0 + self.sinr(row, x)).log2()
    }

    /// Sum throughput over every user, in bits/s/Hz. No feasibility check;
    /// this is the solver hot path.
    pub fn objective(&self, x: &[f64]) -> f64 {
        (0..self.rows.len()).map(|i| self.rate(i, x)).sum()
    }

    /// SINR target equivalent to the per-user rate demand.
    pub fn rate_target_sinr(&self, row: usize) -> f64 {
        if self.r_min == 0.0 {
            0.0
        } else {
            2f64.powf(self.r_min / self.rows[row].weight) - 1.0
        }
    }

    /// Watt-scale slack of the linearized rate constraint
    /// `S_d(p) - t_d (N0 + I_d(p))`, nonnegative iff the rate demand holds.
    pub fn linear_rate_slack_w(&self, row: usize, x: &[f64]) -> f64 {
        let t = self.rate_target_sinr(row);
        self.signal_w(row, x) - t * (self.noise_w + self.interference_w(row, x))
    }

    /// Per-user rate slack in bits/s/Hz and the joint verdict at the solver
    /// tolerance.
    pub fn rate_slacks(&self, x: &[f64]) -> (bool, Vec<f64>) {
        let slacks: Vec<f64> = (0..self.rows.len())
            .map(|i| self.rate(i, x) - self.r_min)
            .collect();
        let ok = slacks.iter().all(|&s| s >= -self.solver_tol);
        (ok, slacks)
    }

    pub fn breakdown(&self, p: &PowerAllocation) -> Result<Vec<SinrBreakdown>, PowerError> {
        let x = p.to_flat();
        self.bounds.check_flat(&x)?;
        Ok(self
            .rows
            .iter()
            .enumerate()
            .map(|(i, r)| {
                let signal_w = self.signal_w(i, &x);
                let intra_noma_w = dot(&r.c_intra, &x);
                let i_dl_to_dl_w = dot(&r.c_dl_to_dl, &x);
                let i_ul_to_dl_w = dot(&r.c_ul_to_dl, &x);
                let i_dl_to_ul_w = dot(&r.c_dl_to_ul, &x);
                let i_ul_to_ul_w = dot(&r.c_ul_to_ul, &x);
                let i_self_w = dot(&r.c_self, &x);
                let denom = self.noise_w
                    + intra_noma_w
                    + i_dl_to_dl_w
                    + i_ul_to_dl_w
                    + i_dl_to_ul_w
                    + i_ul_to_ul_w
                    + i_self_w;
                let sinr = signal_w / denom;
                SinrBreakdown {
                    kind: r.kind,
                    user: r.user,
                    cell: r.cell,
                    rank: r.rank,
                    weight: r.weight,
                    signal_w,
                    noise_w: self.noise_w,
                    intra_noma_w,
                    i_dl_to_dl_w,
                    i_ul_to_dl_w,
                    i_dl_to_ul_w,
                    i_ul_to_ul_w,
                    i_self_w,
                    sinr,
                    rate_bps_hz: r.weight * (1.0 + sinr).log2(),
                }
            })
            .collect())
    }
}

fn finish_row(row: &mut UserRow) {
    for i in 0..row.c_total.len() {
        row.c_total[i] = row.c_intra[i]
            + row.c_dl_to_dl[i]
            + row.c_ul_to_dl[i]
            + row.c_dl_to_ul[i]
            + row.c_ul_to_ul[i]
            + row.c_self[i];
    }
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

/// Per-user signal, noise and interference components, all in watts.
#[derive(Debug, Clone, PartialEq)]
pub struct SinrBreakdown {
    pub kind: UserKind,
    pub user: usize,
    pub cell: usize,
    pub rank: usize,
    pub weight: f64,
    pub signal_w: f64,
    pub noise_w: f64,
    pub intra_noma_w: f64,
    pub i_dl_to_dl_w: f64,
    pub i_ul_to_dl_w: f64,
    pub i_dl_to_ul_w: f64,
    pub i_ul_to_ul_w: f64,
    pub i_self_w: f64,
    pub sinr: f64,
    pub rate_bps_hz: f64,
}

/// Render breakdowns as CSV, one column per interference category.
pub fn breakdown_csv(rows: &[SinrBreakdown]) -> String {
    let mut out = String::from(
        "kind,user,cell,rank,weight,signal_w,noise_w,intra_noma_w,i_dl_to_dl_w,i_ul_to_dl_w,i_dl_to_ul_w,i_ul_to_ul_w,i_self_w,sinr,rate_bps_hz\n",
    );
    for b in rows {
        let kind = match b.kind {
            UserKind::Dl => "dl",
            UserKind::Ul => "ul",
        };
        out.push_str(&format!(
            "{},{},{},{},{:.6},{:.6e},{:.6e},{:.6e},{:.6e},{:.6e},{:.6e},{:.6e},{:.6e},{:.6e},{:.6}\n",
            kind,
            b.user,
            b.cell,
            b.rank,
            b.weight,
            b.signal_w,
            b.noise_w,
            b.intra_noma_w,
            b.i_dl_to_dl_w,
            b.i_ul_to_dl_w,
            b.i_dl_to_ul_w,
            b.i_ul_to_ul_w,
            b.i_self_w,
            b.sinr,
            b.rate_bps_hz
        ));
    }
    out
}

/// Per-user breakdown at a power allocation. Rejects points outside the
/// feasible power set.
pub fn sinr_breakdown(
    p: &PowerAllocation,
    ch: &ChannelSet,
    topo: &Topology,
    order: &SicOrder,
    scheme: SchemeKind,
    cfg: &SimConfig,
) -> Result<Vec<SinrBreakdown>, PowerError> {
    SinrModel::build(ch, topo, order, scheme, cfg).breakdown(p)
}

/// Sum throughput over all DL and UL users in bits/s/Hz.
pub fn sum_throughput(
    p: &PowerAllocation,
    ch: &ChannelSet,
    topo: &Topology,
    order: &SicOrder,
    scheme: SchemeKind,
    cfg: &SimConfig,
) -> Result<f64, PowerError> {
    let model = SinrModel::build(ch, topo, order, scheme, cfg);
    let x = p.to_flat();
    model.bounds.check_flat(&x)?;
    Ok(model.objective(&x))
}

/// True iff every user meets the rate demand within the solver tolerance;
/// also reports the per-user slack in bits/s/Hz.
pub fn rate_constraints_satisfied(
    p: &PowerAllocation,
    ch: &ChannelSet,
    topo: &Topology,
    order: &SicOrder,
    scheme: SchemeKind,
    cfg: &SimConfig,
) -> Result<(bool, Vec<f64>), PowerError> {
    let model = SinrModel::build(ch, topo, order, scheme, cfg);
    let x = p.to_flat();
    model.bounds.check_flat(&x)?;
    Ok(model.rate_slacks(&x))
}

/// Evaluation-only decodability model for DL NOMA: the rate of a rank-r user
/// is limited by the worst SINR of its message across its own receiver and
/// every stronger-ranked co-user that must decode it during SIC. UL rates are
/// unchanged (the BS is the only receiver). Never used inside solvers.
pub fn strict_decodability_rates(
    p: &PowerAllocation,
    ch: &ChannelSet,
    topo: &Topology,
    order: &SicOrder,
    scheme: SchemeKind,
    cfg: &SimConfig,
) -> Result<Vec<f64>, PowerError> {
    let model = SinrModel::build(ch, topo, order, scheme, cfg);
    let x = p.to_flat();
    model.bounds.check_flat(&x)?;

    let n_dl = model.n_dl;
    let mut rates: Vec<f64> = (0..model.n_users()).map(|i| model.rate(i, &x)).collect();
    if scheme.access_mode() != crate::model::Access::Noma {
        return Ok(rates);
    }

    // Cross interference (everything except the intra-cell NOMA term) seen at
    // each DL receiver; it does not depend on which message is being decoded.
    let cross: Vec<f64> = (0..n_dl)
        .map(|d| {
            let r = &model.rows[d];
            dot(&r.c_dl_to_dl, &x) + dot(&r.c_ul_to_dl, &x)
        })
        .collect();

    for ranks in &order.dl_rank {
        for (pos, &d) in ranks.iter().enumerate() {
            let rank_d = pos + 1;
            let c = topo.dl_cell[d];
            let mut min_sinr = f64::INFINITY;
            // Receivers: user d itself plus every stronger-ranked co-user.
            for &e in ranks.iter().take(rank_d) {
                let g_ce = ch.g_rrh_dl[c][e];
                // Messages ranked strictly stronger than d are still undecoded
                // at receiver e when it decodes message d.
                let undecoded: f64 = ranks
                    .iter()
                    .take(rank_d - 1)
                    .map(|&d2| p.dl_w[d2] * g_ce)
                    .sum();
                let sinr = p.dl_w[d] * g_ce / (model.noise_w + cross[e] + undecoded);
                min_sinr = min_sinr.min(sinr);
            }
            rates[d] = model.rows[d].weight * (1.0 + min_sinr).log2();
        }
    }
    Ok(rates)
}
