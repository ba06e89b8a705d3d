//! Warm-started detuning sweeps of the matrix-product steady state and the
//! features read off the resulting correlation curves.

use serde::{Deserialize, Serialize};

use super::chain::TruncationPolicy;
use super::gates::{build_trotter_gates, TrotterOrder};
use super::mpo::{Correlation, VectorizedMpo};
use super::tebd::{evolve_to_ness_mpo, NessOptions, NessReport};
use crate::error::{invalid, Result};
use crate::lattice::{Lattice, ModelParams};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct MpoSweepOptions {
    pub dt: f64,
    pub order: TrotterOrder,
    pub truncation: TruncationPolicy,
    pub ness: NessOptions,
    /// Correlations `C(r)` are recorded for `r = 1..=max_distance`.
    pub max_distance: usize,
}

impl Default for MpoSweepOptions {
    fn default() -> Self {
        Self {
            dt: 0.05,
            order: TrotterOrder::Second,
            truncation: TruncationPolicy::default(),
            ness: NessOptions::default(),
            max_distance: 4,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MpoPoint {
    pub detuning: f64,
    pub central_density: f64,
    pub profile: Vec<f64>,
    /// `C(r)` from the central site, `r = 1, 2, ...`.
    pub correlations: Vec<Correlation>,
    /// Operator entropy across the central bond.
    pub entropy: f64,
    pub report: NessReport,
}

/// Relaxes to the steady state at each detuning in the given order, starting
/// every point from the previous one. Returns the points and the last state.
pub fn mpo_sweep(
    params: &ModelParams,
    lattice: &Lattice,
    detunings: &[f64],
    start: VectorizedMpo,
    opts: &MpoSweepOptions,
) -> Result<(Vec<MpoPoint>, VectorizedMpo)> {
    if detunings.iter().any(|d| !d.is_finite()) {
        return Err(invalid("sweep detunings must be finite"));
    }
    opts.truncation.validate()?;
    let mut state = start;
    let mut points = Vec::with_capacity(detunings.len());
    for &d in detunings {
        let p = params.with_detuning(d);
        let sched = build_trotter_gates(&p, lattice, opts.dt, opts.order)?;
        let (next, report) = evolve_to_ness_mpo(state, &sched, &opts.truncation, &opts.ness)?;
        state = next;
        let c = state.central_site();
        let correlations = (1..=opts.max_distance)
            .filter(|r| c + r < state.n_sites())
            .map(|r| state.correlation(c, r))
            .collect::<Result<_>>()?;
        let entropy = match state.central_bond() {
            Some(b) => state.operator_entropy(b)?,
            None => 0.0,
        };
        let profile = state.densities()?;
        points.push(MpoPoint { detuning: d, central_density: profile[c], profile, correlations, entropy, report });
    }
    Ok((points, state))
}

/// Vertex of the least-squares parabola through the points. `None` when the
/// fit is degenerate or the vertex falls outside the fitted abscissae.
pub fn quadratic_vertex(xs: &[f64], ys: &[f64]) -> Option<f64> {
    if xs.len() < 3 || xs.len() != ys.len() {
        return None;
    }
    let x0 = xs.iter().sum::<f64>() / xs.len() as f64;
    let mut m = [[0.0; 3]; 3];
    let mut v = [0.0; 3];
    for (&x, &y) in xs.iter().zip(ys) {
        let u = x - x0;
        let basis = [1.0, u, u * u];
        for a in 0..3 {
            v[a] += basis[a] * y;
            for b in 0..3 {
                m[a][b] += basis[a] * basis[b];
            }
        }
    }
    let det = |m: &[[f64; 3]; 3]| {
        m[0][0] * (m[1][1] * m[2][2] - m[1][2] * m[2][1]) - m[0][1] * (m[1][0] * m[2][2] - m[1][2] * m[2][0])
            + m[0][2] * (m[1][0] * m[2][1] - m[1][1] * m[2][0])
    };
    let d = det(&m);
    if d.abs() < 1e-300 {
        return None;
    }
    let coef = |k: usize| {
        let mut mk = m;
        for a in 0..3 {
            mk[a][k] = v[a];
        }
        det(&mk) / d
    };
    let (b, c) = (coef(1), coef(2));
    if c.abs() < 1e-14 {
        return None;
    }
    let vertex = x0 - b / (2.0 * c);
    let (lo, hi) = xs.iter().fold((f64::INFINITY, f64::NEG_INFINITY), |(l, h), &x| (l.min(x), h.max(x)));
    (vertex >= lo && vertex <= hi).then_some(vertex)
}

/// Refines a discrete extremum at `idx` with a parabola through up to
/// `half_width` neighbors on each side.
fn refine(xs: &[f64], ys: &[f64], idx: usize, half_width: usize) -> Option<f64> {
    let lo = idx.saturating_sub(half_width);
    let hi = (idx + half_width + 1).min(xs.len());
    quadratic_vertex(&xs[lo..hi], &ys[lo..hi])
}

fn interior_extremum(ys: &[f64], want_max: bool) -> Option<usize> {
    let n = ys.len();
    if n < 3 {
        return None;
    }
    let idx = (0..n)
        .filter(|&i| ys[i].is_finite())
        .max_by(|&a, &b| if want_max { ys[a].total_cmp(&ys[b]) } else { ys[b].total_cmp(&ys[a]) })?;
    (idx > 0 && idx + 1 < n).then_some(idx)
}

/// Features of the nearest-neighbor correlation and entropy curves.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CorrelationFeatures {
    /// First detuning where `C(1)` drops through 1.
    pub crossing: Option<f64>,
    pub minimum: Option<f64>,
    pub entropy_peak: Option<f64>,
    /// Minimum of `dC(1)/dΔ`.
    pub fastest_decay: Option<f64>,
}

/// Reads the features off curves sampled at increasing detunings. Extrema
/// are refined with parabolas over five points.
pub fn correlation_features(detunings: &[f64], c1: &[f64], entropy: &[f64]) -> Result<CorrelationFeatures> {
    if detunings.len() != c1.len() || detunings.len() != entropy.len() {
        return Err(invalid("curve lengths differ"));
    }
    if !detunings.windows(2).all(|w| w[1] > w[0]) {
        return Err(invalid("detunings must be strictly increasing"));
    }
    let crossing = detunings.windows(2).zip(c1.windows(2)).find_map(|(x, y)| {
        (y[0] >= 1.0 && y[1] < 1.0).then(|| x[0] + (y[0] - 1.0) / (y[0] - y[1]) * (x[1] - x[0]))
    });
    let minimum = interior_extremum(c1, false).and_then(|i| refine(detunings, c1, i, 2));
    let entropy_peak = interior_extremum(entropy, true).and_then(|i| refine(detunings, entropy, i, 2));
    let (dx, dc): (Vec<f64>, Vec<f64>) = (1..detunings.len().saturating_sub(1))
        .map(|i| (detunings[i], (c1[i + 1] - c1[i - 1]) / (detunings[i + 1] - detunings[i - 1])))
        .unzip();
    let fastest_decay = interior_extremum(&dc, false).and_then(|i| refine(&dx, &dc, i, 2));
    Ok(CorrelationFeatures { crossing, minimum, entropy_peak, fastest_decay })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn parabola_vertex_is_exact() {
        let xs: Vec<f64> = (0..7).map(|i| 0.1 * i as f64).collect();
        let ys: Vec<f64> = xs.iter().map(|x| 3.0 * (x - 0.37f64).powi(2) - 1.0).collect();
        assert!((quadratic_vertex(&xs, &ys).unwrap() - 0.37).abs() < 1e-12);
        let line: Vec<f64> = xs.iter().map(|x| 2.0 * x).collect();
        assert!(quadratic_vertex(&xs, &line).is_none());
    }

    #[test]
    fn features_of_synthetic_curves() {
        let xs: Vec<f64> = (0..41).map(|i| 0.1 * i as f64).collect();
        // C(1) = 1 + a·(x − 2)² − b with a crossing below 2 and minimum at 2.
        let c1: Vec<f64> = xs.iter().map(|x| 0.5 + 0.125 * (x - 2.0f64).powi(2)).collect();
        let s: Vec<f64> = xs.iter().map(|x| 1.0 - (x - 1.2f64).powi(2)).collect();
        let f = correlation_features(&xs, &c1, &s).unwrap();
        assert!((f.crossing.unwrap() - 0.0).abs() < 1e-12);
        assert!((f.minimum.unwrap() - 2.0).abs() < 1e-9);
        assert!((f.entropy_peak.unwrap() - 1.2).abs() < 1e-9);
        // Slope of a parabola has no interior minimum.
        assert!(f.fastest_decay.is_none());
        let tanh: Vec<f64> = xs.iter().map(|x| 1.0 - (2.0 * (x - 1.5)).tanh()).collect();
        let f = correlation_features(&xs, &tanh, &s).unwrap();
        assert!((f.crossing.unwrap() - 1.5).abs() < 1e-12);
        assert!((f.fastest_decay.unwrap() - 1.5).abs() < 1e-3);
    }
}
