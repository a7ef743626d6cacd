//! Random network drops and channel gains.
//!
//! Every random draw comes from a dedicated ChaCha8 stream keyed by
//! `(base_seed, drop_index, stream tag)`, where the tag identifies one node
//! placement or one link fade. Adding new links therefore never perturbs the
//! draws of existing ones, and drops can be generated concurrently in any
//! order with identical results.

use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::model::{db_to_linear, SimConfig};

/// Node positions and the nearest-RRH association for one drop.
#[derive(Debug, Clone, PartialEq)]
pub struct Topology {
    pub rrh_xy: Vec<(f64, f64)>,
    pub dl_xy: Vec<(f64, f64)>,
    pub ul_xy: Vec<(f64, f64)>,
    /// Serving cell per DL user.
    pub dl_cell: Vec<usize>,
    /// Serving cell per UL user.
    pub ul_cell: Vec<usize>,
}

/// Linear power gains for every link in the interference graph.
#[derive(Debug, Clone, PartialEq)]
pub struct ChannelSet {
    /// `g_rrh_dl[c][d]`: RRH `c` to DL user `d`.
    pub g_rrh_dl: Vec<Vec<f64>>,
    /// `g_ul_rrh[c][u]`: UL user `u` received at RRH `c`.
    pub g_ul_rrh: Vec<Vec<f64>>,
    /// `g_ul_dl[u][d]`: UL user `u` to DL user `d`.
    pub g_ul_dl: Vec<Vec<f64>>,
    /// `g_rrh_rrh[c][c2]`: RRH `c2` to RRH `c`, zero on the diagonal
    /// (the self path is the SI term, not a propagated link).
    pub g_rrh_rrh: Vec<Vec<f64>>,
    /// Constant per-RRH self-interference channel gain; no fading applies.
    pub g_si: Vec<f64>,
}

/// Small-scale fading model applied on top of path loss.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum FadingMode {
    /// i.i.d. Rayleigh fading: |h|^2 ~ exponential(1). The default.
    Rayleigh,
    /// Unit fading; gains equal pure path loss. Test hook.
    Unit,
}

const TAG_RRH_POS: u64 = 0;
const TAG_DL_POS: u64 = 1;
const TAG_UL_POS: u64 = 2;
const TAG_FADE_RRH_DL: u64 = 10;
const TAG_FADE_UL_RRH: u64 = 11;
const TAG_FADE_UL_DL: u64 = 12;
const TAG_FADE_RRH_RRH: u64 = 13;

fn splitmix64(state: &mut u64) -> u64 {
    *state = state.wrapping_add(0x9E37_79B9_7F4A_7C15);
    let mut z = *state;
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// A ChaCha8 stream for one (drop, tag, i, j) draw site.
fn stream(base_seed: u64, drop_index: u64, tag: u64, i: u64, j: u64) -> ChaCha8Rng {
    let mut state = base_seed ^ 0xD6E8_FEB8_6659_FD93;
    let mut seed = [0u8; 32];
    let mix = [drop_index, tag, i, j];
    for m in mix {
        state ^= splitmix64(&mut state) ^ m.wrapping_mul(0xA076_1D64_78BD_642F);
    }
    for chunk in seed.chunks_exact_mut(8) {
        chunk.copy_from_slice(&splitmix64(&mut state).to_le_bytes());
    }
    ChaCha8Rng::from_seed(seed)
}

/// Uniform point in the disk of the given radius centered at the origin.
fn draw_point_in_disk(rng: &mut ChaCha8Rng, radius: f64) -> (f64, f64) {
    let r = radius * rng.random::<f64>().sqrt();
    let theta = 2.0 * std::f64::consts::PI * rng.random::<f64>();
    (r * theta.cos(), r * theta.sin())
}

/// Squared-envelope Rayleigh fade: an exponential(1) variate.
pub fn draw_fading_power<R: Rng>(rng: &mut R) -> f64 {
    let u: f64 = rng.random();
    -(1.0 - u).ln()
}

/// Distance-based gain `max(d, d_min)^(-alpha)`.
pub fn path_loss(d: f64, alpha: f64, d_min: f64) -> f64 {
    d.max(d_min).powf(-alpha)
}

fn dist(a: (f64, f64), b: (f64, f64)) -> f64 {
    ((a.0 - b.0).powi(2) + (a.1 - b.1).powi(2)).sqrt()
}

/// Place one node, re-drawing while it sits closer than `min_d` to any node
/// it shares a link with.
fn place(rng: &mut ChaCha8Rng, radius: f64, min_d: f64, linked: &[(f64, f64)]) -> (f64, f64) {
    loop {
        let p = draw_point_in_disk(rng, radius);
        if linked.iter().all(|&q| dist(p, q) >= min_d) {
            return p;
        }
    }
}

/// Generate the node layout for one drop. Deterministic in
/// `(cfg.base_seed, drop_index)`.
pub fn generate_drop(cfg: &SimConfig, drop_index: usize) -> Topology {
    let di = drop_index as u64;
    let r = cfg.area_radius_m;
    let dmin = cfg.min_distance_m;

    let mut rrh_xy = Vec::with_capacity(cfg.n_cells);
    for c in 0..cfg.n_cells {
        let mut rng = stream(cfg.base_seed, di, TAG_RRH_POS, c as u64, 0);
        let p = place(&mut rng, r, dmin, &rrh_xy);
        rrh_xy.push(p);
    }

    let mut dl_xy = Vec::with_capacity(cfg.n_dl_users);
    for d in 0..cfg.n_dl_users {
        let mut rng = stream(cfg.base_seed, di, TAG_DL_POS, d as u64, 0);
        // DL users link to every RRH (serving plus interference paths).
        dl_xy.push(place(&mut rng, r, dmin, &rrh_xy));
    }

    let mut ul_xy = Vec::with_capacity(cfg.n_ul_users);
    let mut ul_linked = rrh_xy.clone();
    ul_linked.extend_from_slice(&dl_xy);
    for u in 0..cfg.n_ul_users {
        let mut rng = stream(cfg.base_seed, di, TAG_UL_POS, u as u64, 0);
        // UL users link to every RRH and to every DL user.
        ul_xy.push(place(&mut rng, r, dmin, &ul_linked));
    }

    let nearest = |p: (f64, f64)| -> usize {
        let mut best = 0usize;
        let mut best_d = f64::INFINITY;
        for (c, &q) in rrh_xy.iter().enumerate() {
            let d = dist(p, q);
            // Strict < keeps the lowest index on ties.
            if d < best_d {
                best_d = d;
                best = c;
            }
        }
        best
    };
    let dl_cell = dl_xy.iter().map(|&p| nearest(p)).collect();
    let ul_cell = ul_xy.iter().map(|&p| nearest(p)).collect();

    Topology {
        rrh_xy,
        dl_xy,
        ul_xy,
        dl_cell,
        ul_cell,
    }
}

/// Channel gains for one drop with an explicit fading mode.
///
/// `FadingMode::Unit` is a test hook that reduces every propagated gain to
/// pure path loss.
pub fn build_channels_with_fading(
    topo: &Topology,
    cfg: &SimConfig,
    drop_index: usize,
    fading: FadingMode,
) -> ChannelSet {
    let di = drop_index as u64;
    let alpha = cfg.pathloss_exponent;
    let dmin = cfg.min_distance_m;
    let fade = |tag: u64, i: usize, j: usize| -> f64 {
        match fading {
            FadingMode::Unit => 1.0,
            FadingMode::Rayleigh => {
                let mut rng = stream(cfg.base_seed, di, tag, i as u64, j as u64);
                draw_fading_power(&mut rng)
            }
        }
    };

    let n_c = topo.rrh_xy.len();
    let n_d = topo.dl_xy.len();
    let n_u = topo.ul_xy.len();

    let mut g_rrh_dl = vec![vec![0.0; n_d]; n_c];
    for c in 0..n_c {
        for d in 0..n_d {
            let pl = path_loss(dist(topo.rrh_xy[c], topo.dl_xy[d]), alpha, dmin);
            g_rrh_dl[c][d] = pl * fade(TAG_FADE_RRH_DL, c, d);
        }
    }
    let mut g_ul_rrh = vec![vec![0.0; n_u]; n_c];
    for c in 0..n_c {
        for u in 0..n_u {
            let pl = path_loss(dist(topo.ul_xy[u], topo.rrh_xy[c]), alpha, dmin);
            g_ul_rrh[c][u] = pl * fade(TAG_FADE_UL_RRH, c, u);
        }
    }
    let mut g_ul_dl = vec![vec![0.0; n_d]; n_u];
    for u in 0..n_u {
        for d in 0..n_d {
            let pl = path_loss(dist(topo.ul_xy[u], topo.dl_xy[d]), alpha, dmin);
            g_ul_dl[u][d] = pl * fade(TAG_FADE_UL_DL, u, d);
        }
    }
    let mut g_rrh_rrh = vec![vec![0.0; n_c]; n_c];
    for c in 0..n_c {
        for c2 in 0..n_c {
            if c == c2 {
                continue;
            }
            let pl = path_loss(dist(topo.rrh_xy[c], topo.rrh_xy[c2]), alpha, dmin);
            g_rrh_rrh[c][c2] = pl * fade(TAG_FADE_RRH_RRH, c, c2);
        }
    }
    let g_si = vec![db_to_linear(cfg.si_channel_gain_db); n_c];

    ChannelSet {
        g_rrh_dl,
        g_ul_rrh,
        g_ul_dl,
        g_rrh_rrh,
        g_si,
    }
}

/// Channel gains for one drop: path loss times an i.i.d. Rayleigh fade per
/// link, plus the constant SI gain. Deterministic in
/// `(cfg.base_seed, drop_index)`.
pub fn build_channels(topo: &Topology, cfg: &SimConfig, drop_index: usize) -> ChannelSet {
    build_channels_with_fading(topo, cfg, drop_index, FadingMode::Rayleigh)
}

/// Render the drop as the debug dump format: one node per line,
/// `kind index x y cell`.
pub fn dump_drop(topo: &Topology) -> String {
    let mut out = String::new();
    for (i, p) in topo.rrh_xy.iter().enumerate() {
        out.push_str(&format!("rrh {} {:.6} {:.6} {}\n", i, p.0, p.1, i));
    }
    for (i, p) in topo.dl_xy.iter().enumerate() {
        out.push_str(&format!("dl {} {:.6} {:.6} {}\n", i, p.0, p.1, topo.dl_cell[i]));
    }
    for (i, p) in topo.ul_xy.iter().enumerate() {
        out.push_str(&format!("ul {} {:.6} {:.6} {}\n", i, p.0, p.1, topo.ul_cell[i]));
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::SimConfig;

    #[test]
    fn drops_are_deterministic() {
        let cfg = SimConfig::default();
        for drop in [0usize, 1, 7] {
            assert_eq!(generate_drop(&cfg, drop), generate_drop(&cfg, drop));
        }
        assert_ne!(generate_drop(&cfg, 0), generate_drop(&cfg, 1));
    }

    #[test]
    fn nodes_stay_inside_the_disk() {
        let cfg = SimConfig::default();
        for drop in 0..50 {
            let t = generate_drop(&cfg, drop);
            for p in t.rrh_xy.iter().chain(&t.dl_xy).chain(&t.ul_xy) {
                let r = (p.0 * p.0 + p.1 * p.1).sqrt();
                assert!(r <= cfg.area_radius_m + 1e-9);
            }
            // Radius 300 bounds every pairwise distance by the diameter.
            for a in t.rrh_xy.iter().chain(&t.dl_xy).chain(&t.ul_xy) {
                for b in t.rrh_xy.iter().chain(&t.dl_xy).chain(&t.ul_xy) {
                    assert!(dist(*a, *b) <= 2.0 * cfg.area_radius_m + 1e-9);
                }
            }
        }
    }

    #[test]
    fn mean_distance_matches_uniform_disk_expectation() {
        // E[distance from center] = 2R/3 for a uniform draw in a disk.
        let cfg = SimConfig::default();
        let mut sum = 0.0;
        let mut n = 0usize;
        for drop in 0..10_000 {
            let t = generate_drop(&cfg, drop);
            for p in t.dl_xy.iter().chain(&t.ul_xy) {
                sum += (p.0 * p.0 + p.1 * p.1).sqrt();
                n += 1;
            }
        }
        let mean = sum / n as f64;
        let expect = 2.0 * cfg.area_radius_m / 3.0;
        assert!(
            (mean - expect).abs() < 0.02 * expect,
            "mean {mean}, expected {expect}"
        );
    }

    #[test]
    fn association_picks_the_nearest_rrh() {
        let cfg = SimConfig {
            n_cells: 4,
            n_dl_users: 8,
            n_ul_users: 8,
            ..SimConfig::default()
        };
        for drop in 0..20 {
            let t = generate_drop(&cfg, drop);
            for (d, &p) in t.dl_xy.iter().enumerate() {
                let own = dist(p, t.rrh_xy[t.dl_cell[d]]);
                for &q in &t.rrh_xy {
                    assert!(own <= dist(p, q) + 1e-12);
                }
            }
            for (u, &p) in t.ul_xy.iter().enumerate() {
                let own = dist(p, t.rrh_xy[t.ul_cell[u]]);
                for &q in &t.rrh_xy {
                    assert!(own <= dist(p, q) + 1e-12);
                }
            }
        }
    }

    #[test]
    fn min_distance_is_respected() {
        let cfg = SimConfig {
            min_distance_m: 40.0,
            ..SimConfig::default()
        };
        for drop in 0..200 {
            let t = generate_drop(&cfg, drop);
            for (c, &r1) in t.rrh_xy.iter().enumerate() {
                for &r2 in &t.rrh_xy[c + 1..] {
                    assert!(dist(r1, r2) >= cfg.min_distance_m);
                }
                for &p in t.dl_xy.iter().chain(&t.ul_xy) {
                    assert!(dist(r1, p) >= cfg.min_distance_m);
                }
            }
            for &u in &t.ul_xy {
                for &d in &t.dl_xy {
                    assert!(dist(u, d) >= cfg.min_distance_m);
                }
            }
        }
    }

    #[test]
    fn path_loss_points() {
        assert_eq!(path_loss(1.0, 3.5, 1.0), 1.0);
        let g = path_loss(10.0, 3.5, 1.0);
        let expect = 10f64.powf(-3.5);
        assert!((g - expect).abs() / expect < 1e-8);
        // Clamp below d_min.
        assert_eq!(path_loss(0.1, 3.5, 1.0), 1.0);
        assert_eq!(path_loss(0.0, 3.5, 1.0), 1.0);
    }

    #[test]
    fn fading_moments_match_exponential_unit() {
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        let n = 1_000_000usize;
        let mut sum = 0.0;
        let mut sum_sq = 0.0;
        for _ in 0..n {
            let v = draw_fading_power(&mut rng);
            assert!(v >= 0.0);
            sum += v;
            sum_sq += v * v;
        }
        let mean = sum / n as f64;
        let var = sum_sq / n as f64 - mean * mean;
        assert!((mean - 1.0).abs() < 0.01, "mean {mean}");
        assert!((var - 1.0).abs() < 0.02, "var {var}");
    }

    #[test]
    fn channels_are_deterministic_and_si_is_constant() {
        let cfg = SimConfig::default();
        let topo = generate_drop(&cfg, 3);
        let a = build_channels(&topo, &cfg, 3);
        let b = build_channels(&topo, &cfg, 3);
        assert_eq!(a, b);
        for &g in &a.g_si {
            assert_eq!(g, 1.0); // 0 dB
        }
        for row in &a.g_rrh_dl {
            for &g in row {
                assert!(g > 0.0);
            }
        }
        for (c, row) in a.g_rrh_rrh.iter().enumerate() {
            assert_eq!(row[c], 0.0);
        }
    }

    #[test]
    fn unit_fading_reduces_to_pure_path_loss() {
        let cfg = SimConfig::default();
        let topo = generate_drop(&cfg, 5);
        let ch = build_channels_with_fading(&topo, &cfg, 5, FadingMode::Unit);
        for (c, row) in ch.g_rrh_dl.iter().enumerate() {
            for (d, &g) in row.iter().enumerate() {
                let pl = path_loss(
                    dist(topo.rrh_xy[c], topo.dl_xy[d]),
                    cfg.pathloss_exponent,
                    cfg.min_distance_m,
                );
                assert_eq!(g, pl);
            }
        }
    }

    #[test]
    fn gain_decreases_with_distance_under_unit_fading() {
        let alpha = 3.5;
        let mut prev = f64::INFINITY;
        for step in 1..100 {
            let d = step as f64 * 5.0;
            let g = path_loss(d, alpha, 1.0);
            assert!(g < prev);
            prev = g;
        }
    }

    #[test]
    fn dump_format_has_one_line_per_node() {
        let cfg = SimConfig::default();
        let topo = generate_drop(&cfg, 0);
        let dump = dump_drop(&topo);
        let lines: Vec<&str> = dump.lines().collect();
        assert_eq!(lines.len(), cfg.n_cells + cfg.n_dl_users + cfg.n_ul_users);
        assert!(lines[0].starts_with("rrh 0 "));
        for line in lines {
            assert_eq!(line.split_whitespace().count(), 5);
        }
    }
}
