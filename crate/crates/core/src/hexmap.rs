//! Hexagon coordinates for real sign sectors of `(z1, z2, z3)` and pole
//! trajectories of scalar three-phase functions.
//!
//! Each sector where exactly one variable has the opposite sign is mapped onto
//! a regular hexagon of circumradius 2 centred at the origin. Along a pole
//! trajectory the two same-sign variables are held at `(g, 1)` and the poles
//! in the remaining variable are the real negative roots of the denominator.

use std::fmt::Write as _;

use thiserror::Error;

use crate::collections::ZCollection;
use crate::numcore::{c64, re, C64};
use crate::ratfunc::{extract_pq, MultiPoly, MultiRational, RatFuncError};

#[derive(Debug, Error)]
pub enum HexError {
    #[error("component z{0} is zero")]
    ZeroComponent(usize),
    #[error("no component has a sign opposite to the other two")]
    NotInSector,
    #[error("collection is not pruned: {0}")]
    NotPruned(String),
    #[error("U must be one-dimensional, got dimension {0}")]
    NotScalarU(usize),
    #[error("expected three phases, got {0}")]
    NotThreePhase(usize),
    #[error("invalid grid: {0}")]
    BadGrid(String),
    #[error(transparent)]
    RatFunc(RatFuncError),
}

impl From<RatFuncError> for HexError {
    fn from(e: RatFuncError) -> Self {
        match e {
            RatFuncError::NotPruned(s) => HexError::NotPruned(s),
            RatFuncError::UNotScalar(m) => HexError::NotScalarU(m),
            other => HexError::RatFunc(other),
        }
    }
}

pub type Result<T> = std::result::Result<T, HexError>;

/// A real point `z` placed on the hexagon of its sign sector.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct HexPoint {
    /// 1, 2 or 3: the variable whose sign differs from the other two.
    pub hexagon_id: u8,
    pub x: f64,
    pub y: f64,
    pub z: [f64; 3],
}

/// Intermediate `t` and `s` coordinates of the map.
pub fn t_coords(z: [f64; 3]) -> [f64; 3] {
    let t = |a: f64, b: f64| 1.0 / (1.0 + (a / b).abs());
    [t(z[1], z[2]), t(z[2], z[0]), t(z[0], z[1])]
}

pub fn s_coords(z: [f64; 3]) -> [f64; 3] {
    let [t1, t2, t3] = t_coords(z);
    let s1 = 2.0 * t1 - t2 - t3;
    let s2 = 2.0 * t2 - t3 - t1;
    [s1, s2, -(s1 + s2)]
}

/// Which variable has the odd sign, 0-based.
fn sector(z: [f64; 3]) -> Result<usize> {
    for (i, &v) in z.iter().enumerate() {
        if v == 0.0 || v.is_nan() {
            return Err(HexError::ZeroComponent(i + 1));
        }
    }
    let neg: Vec<bool> = z.iter().map(|v| *v < 0.0).collect();
    (0..3)
        .find(|&i| neg[i] != neg[(i + 1) % 3] && neg[(i + 1) % 3] == neg[(i + 2) % 3])
        .ok_or(HexError::NotInSector)
}

/// Hexagon coordinates of a real triple with exactly one sign differing.
///
/// Infinite components are allowed (they land on the hexagon boundary).
pub fn hex_coords(z: [f64; 3]) -> Result<HexPoint> {
    let i = sector(z)?;
    let [s1, s2, _] = s_coords(z);
    Ok(HexPoint { hexagon_id: i as u8 + 1, x: s1, y: (s1 + 2.0 * s2) / 3f64.sqrt(), z })
}

/// `Z / sqrt(z_a z_b)` where `z_a`, `z_b` are the two same-sign variables.
pub fn normalized_value(r: &MultiRational, z: [f64; 3]) -> Result<C64> {
    let i = sector(z)?;
    let v = r.eval(&z.map(re))?;
    Ok(v / (z[(i + 1) % 3] * z[(i + 2) % 3]).sqrt())
}

/// Log-spaced values of the free positive parameter `g`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Grid {
    pub lo: f64,
    pub hi: f64,
    pub points: usize,
}

impl Default for Grid {
    fn default() -> Self {
        Grid { lo: 1e-2, hi: 1e2, points: 41 }
    }
}

impl Grid {
    pub fn values(&self) -> Result<Vec<f64>> {
        if !(self.lo > 0.0 && self.hi >= self.lo && self.lo.is_finite() && self.hi.is_finite()) {
            return Err(HexError::BadGrid(format!("need 0 < lo <= hi, got [{}, {}]", self.lo, self.hi)));
        }
        if self.points == 0 {
            return Err(HexError::BadGrid("no grid points".into()));
        }
        if self.points == 1 {
            return Ok(vec![self.lo]);
        }
        let (a, b) = (self.lo.ln(), self.hi.ln());
        Ok((0..self.points).map(|k| (a + (b - a) * k as f64 / (self.points - 1) as f64).exp()).collect())
    }
}

/// One pole on one hexagon at one grid value.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct PolePoint {
    pub branch_id: usize,
    pub grid_param: f64,
    pub point: HexPoint,
}

#[derive(Clone, Debug)]
pub struct PoleTrajectory {
    pub points: Vec<PolePoint>,
    /// Largest number of poles seen at one grid value, per hexagon.
    pub counts: [usize; 3],
    pub phase_dims: [usize; 3],
    /// Estimate of `dim J` from the poles on the edge `z_{2} = 0`, when determined.
    pub q2_estimate: Option<usize>,
    pub function: MultiRational,
}

/// Roots of `Σ c_k x^k` by Aberth iteration followed by Newton polishing.
///
/// Leading coefficients below `1e-14` of the largest are dropped first; vanishing
/// low-order coefficients give exact zero roots.
pub fn poly_roots(coeffs: &[C64]) -> Vec<C64> {
    let scale = coeffs.iter().map(|c| c.norm()).fold(0.0, f64::max);
    if scale == 0.0 {
        return Vec::new();
    }
    let mut deg = coeffs.len() - 1;
    while deg > 0 && coeffs[deg].norm() <= 1e-14 * scale {
        deg -= 1;
    }
    let mut low = 0;
    while low < deg && coeffs[low].norm() <= 1e-14 * scale {
        low += 1;
    }
    let c = &coeffs[low..=deg];
    let mut roots = vec![C64::new(0.0, 0.0); low];
    roots.extend(nonzero_roots(c));
    roots
}

fn nonzero_roots(c: &[C64]) -> Vec<C64> {
    let deg = c.len() - 1;
    if deg == 0 {
        return Vec::new();
    }
    if deg == 1 {
        return vec![-c[0] / c[1]];
    }
    let eval = |x: C64| {
        let mut p = C64::new(0.0, 0.0);
        let mut dp = C64::new(0.0, 0.0);
        for &a in c.iter().rev() {
            dp = dp * x + p;
            p = p * x + a;
        }
        (p, dp)
    };
    // Cauchy bound for the initial circle.
    let lead = c[deg].norm();
    let radius = 1.0 + c[..deg].iter().map(|a| a.norm() / lead).fold(0.0, f64::max);
    let mut roots: Vec<C64> = (0..deg)
        .map(|k| C64::from_polar(0.5 * radius, 2.0 * std::f64::consts::PI * (k as f64 + 0.25) / deg as f64))
        .collect();
    for _ in 0..500 {
        let mut moved = 0.0f64;
        for k in 0..deg {
            let (p, dp) = eval(roots[k]);
            if p.norm() == 0.0 {
                continue;
            }
            let ratio = p / dp;
            let repulsion: C64 = (0..deg).filter(|&j| j != k).map(|j| (roots[k] - roots[j]).inv()).sum();
            let step = ratio / (c64(1.0, 0.0) - ratio * repulsion);
            if step.is_finite() {
                roots[k] -= step;
                moved = moved.max(step.norm() / (1.0 + roots[k].norm()));
            }
        }
        if moved < 1e-15 {
            break;
        }
    }
    for r in &mut roots {
        for _ in 0..3 {
            let (p, dp) = eval(*r);
            if dp.norm() == 0.0 {
                break;
            }
            let next = *r - p / dp;
            if next.is_finite() && eval(next).0.norm() < p.norm() {
                *r = next;
            } else {
                break;
            }
        }
    }
    roots
}

/// `|Σ c_k x^k|` relative to `Σ |c_k| |x|^k`.
pub fn root_residual(coeffs: &[C64], x: C64) -> f64 {
    let value: C64 = coeffs.iter().rev().fold(C64::new(0.0, 0.0), |acc, &a| acc * x + a);
    let scale: f64 = coeffs.iter().rev().fold(0.0, |acc, a| acc * x.norm() + a.norm());
    if scale == 0.0 {
        0.0
    } else {
        value.norm() / scale
    }
}

const REAL_TOL: f64 = 1e-7;

/// Real negative roots of a slice polynomial, ascending.
fn negative_roots(coeffs: &[C64]) -> Vec<f64> {
    let mut out: Vec<f64> = poly_roots(coeffs)
        .into_iter()
        .filter(|r| r.im.abs() <= REAL_TOL * (1.0 + r.re.abs()) && r.re < 0.0)
        .map(|r| r.re)
        .collect();
    out.sort_by(f64::total_cmp);
    out
}

/// Point with `z_i = v` and the other two variables at `(g, 1)` in cyclic order.
fn sector_point(i: usize, v: f64, g: f64) -> [f64; 3] {
    let mut z = [0.0; 3];
    z[i] = v;
    z[(i + 1) % 3] = g;
    z[(i + 2) % 3] = 1.0;
    z
}

/// Sample the pole trajectories of the function of a pruned scalar three-phase collection.
pub fn pole_trajectory(c: &ZCollection, grid: &Grid) -> Result<PoleTrajectory> {
    if c.m() != 1 {
        return Err(HexError::NotScalarU(c.m()));
    }
    if c.n() != 3 {
        return Err(HexError::NotThreePhase(c.n()));
    }
    let gs = grid.values()?;
    let r = extract_pq(c)?;
    let dims = c.phase_dims();
    let phase_dims = [dims[0], dims[1], dims[2]];
    let trajectory = trajectory_of(&r, phase_dims, &gs);
    let q2_estimate = estimate_q2(r.q(), phase_dims);
    Ok(PoleTrajectory { q2_estimate, function: r, ..trajectory })
}

fn trajectory_of(r: &MultiRational, phase_dims: [usize; 3], gs: &[f64]) -> PoleTrajectory {
    let mut points = Vec::new();
    let mut counts = [0usize; 3];
    for i in 0..3 {
        for &g in gs {
            let mut others = [re(1.0); 3];
            others[(i + 1) % 3] = re(g);
            let slice = r.q().slice(i, &others);
            let scale = slice.iter().map(|c| c.norm()).fold(0.0, f64::max);
            let mut poles: Vec<f64> = negative_roots(&slice);
            let lead = slice.get(phase_dims[i]).map_or(0.0, |c| c.norm());
            if scale > 0.0 && lead <= 1e-9 * scale {
                poles.push(f64::NEG_INFINITY);
            }
            counts[i] = counts[i].max(poles.len());
            for (b, &v) in poles.iter().enumerate() {
                let point = hex_coords(sector_point(i, v, g)).expect("point lies in sector");
                points.push(PolePoint { branch_id: b, grid_param: g, point });
            }
        }
    }
    PoleTrajectory { points, counts, phase_dims, q2_estimate: None, function: r.clone() }
}

/// Estimate `dim J` from the poles crossing the edge `z2 = 0`, `z3 = 1`, `z1 < 0`.
///
/// Poles at `z1 = -inf` (a denominator slice of degree below `p_1`) count as
/// crossings. Only a crossing count below `p_1` determines the value.
pub fn estimate_q2(q: &MultiPoly, phase_dims: [usize; 3]) -> Option<usize> {
    let [p1, p2, _] = phase_dims;
    let slice = q.slice(0, &[re(1.0), re(0.0), re(1.0)]);
    let scale = slice.iter().map(|c| c.norm()).fold(0.0, f64::max);
    if scale == 0.0 {
        return None;
    }
    let degree = (0..slice.len()).rev().find(|&k| slice[k].norm() > 1e-9 * scale).unwrap_or(0);
    let crossings = negative_roots(&slice).len() + p1.saturating_sub(degree);
    if crossings < p1 {
        (crossings + p2).checked_sub(1)
    } else {
        None
    }
}

impl PoleTrajectory {
    pub const CSV_HEADER: &'static str = "hexagon_id,branch_id,grid_param,x,y";

    pub fn to_csv(&self) -> String {
        let mut out = String::from(Self::CSV_HEADER);
        out.push('\n');
        for p in &self.points {
            let _ = writeln!(
                out,
                "{},{},{:e},{:.17e},{:.17e}",
                p.point.hexagon_id, p.branch_id, p.grid_param, p.point.x, p.point.y
            );
        }
        out
    }

    /// Static figure: the three hexagons side by side with the sampled poles.
    pub fn to_svg(&self) -> String {
        const UNIT: f64 = 60.0;
        const PANEL: f64 = 300.0;
        let colors = ["#1f77b4", "#d62728", "#2ca02c", "#9467bd", "#ff7f0e", "#8c564b", "#e377c2", "#17becf"];
        let mut out = String::new();
        let _ = writeln!(
            out,
            r#"<svg xmlns="http://www.w3.org/2000/svg" width="{}" height="{}" viewBox="0 0 {} {}">"#,
            3.0 * PANEL,
            PANEL,
            3.0 * PANEL,
            PANEL
        );
        let to_px = |panel: usize, x: f64, y: f64| (PANEL * (panel as f64 + 0.5) + UNIT * x, PANEL * 0.5 - UNIT * y);
        let s3 = 3f64.sqrt();
        let vertices = [(2.0, 0.0), (1.0, s3), (-1.0, s3), (-2.0, 0.0), (-1.0, -s3), (1.0, -s3)];
        for panel in 0..3 {
            let pts: Vec<String> = vertices
                .iter()
                .map(|&(x, y)| {
                    let (a, b) = to_px(panel, x, y);
                    format!("{a:.2},{b:.2}")
                })
                .collect();
            let _ = writeln!(out, r#"<polygon points="{}" fill="none" stroke="black"/>"#, pts.join(" "));
            let (lx, ly) = to_px(panel, -2.0, 2.1);
            let _ = writeln!(
                out,
                r#"<text x="{lx:.2}" y="{ly:.2}" font-size="14">z{} opposite sign ({} paths, dim P{} = {})</text>"#,
                panel + 1,
                self.counts[panel],
                panel + 1,
                self.phase_dims[panel]
            );
        }
        for p in &self.points {
            let (a, b) = to_px(p.point.hexagon_id as usize - 1, p.point.x, p.point.y);
            let _ = writeln!(
                out,
                r#"<circle cx="{a:.2}" cy="{b:.2}" r="1.8" fill="{}"/>"#,
                colors[p.branch_id % colors.len()]
            );
        }
        out.push_str("</svg>\n");
        out
    }
}
