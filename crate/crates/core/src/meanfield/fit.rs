use serde::{Deserialize, Serialize};

use crate::error::{invalid, Result};

/// Relative residual above which a profile is reported as non-oscillatory.
const FAILURE_RESIDUAL: f64 = 0.5;
const BULK_REFINEMENTS: usize = 4;

/// Sites entering the fit, with 1-based site labels `j`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct FitWindow {
    /// Sites dropped next to the open edge. The boundary layer of a 61-site
    /// chain is not a single damped mode for roughly the first nine sites.
    pub edge_margin: usize,
    /// Last site included; defaults to the central site `⌈N/2⌉`.
    pub last_site: Option<usize>,
}

impl Default for FitWindow {
    fn default() -> Self {
        Self { edge_margin: 9, last_site: None }
    }
}

/// `δn_j = A e^{−j/r} sin(kj + φ)` with `δn_j = n_j − n̄`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct OscillationFit {
    pub amplitude: f64,
    pub decay_length: f64,
    pub wavenumber: f64,
    /// Phase in `(−π, π]`; equivalent phases differ by `2π`, or by `π`
    /// together with a sign flip of the amplitude.
    pub phase: f64,
    pub bulk_density: f64,
    pub residual_norm: f64,
    /// Residual norm divided by the norm of `δn` over the window.
    pub relative_residual: f64,
    pub failed: bool,
}

impl OscillationFit {
    pub fn evaluate(&self, j: f64) -> f64 {
        self.bulk_density
            + self.amplitude * (-j / self.decay_length).exp() * (self.wavenumber * j + self.phase).sin()
    }

    /// The amplitude and phase re-expressed with the given amplitude sign
    /// and the phase shifted by multiples of `2π` to lie nearest `target`.
    pub fn phase_near(&self, amplitude_sign: f64, target: f64) -> (f64, f64) {
        let (a, mut p) = if self.amplitude.signum() == amplitude_sign.signum() {
            (self.amplitude, self.phase)
        } else {
            (-self.amplitude, self.phase + std::f64::consts::PI)
        };
        let tau = std::f64::consts::TAU;
        p += ((target - p) / tau).round() * tau;
        (a, p)
    }
}

struct Linear {
    a: f64,
    b: f64,
    sse: f64,
}

/// Best `a sin(kj) + b cos(kj)` times `e^{−κj}` for fixed `(κ, k)`.
fn linear_part(js: &[f64], y: &[f64], kappa: f64, k: f64) -> Linear {
    let (mut ss, mut sc, mut cc, mut sy, mut cy) = (0.0, 0.0, 0.0, 0.0, 0.0);
    for (&j, &v) in js.iter().zip(y) {
        let e = (-kappa * j).exp();
        let s = e * (k * j).sin();
        let c = e * (k * j).cos();
        ss += s * s;
        sc += s * c;
        cc += c * c;
        sy += s * v;
        cy += c * v;
    }
    let det = ss * cc - sc * sc;
    let (a, b) = if det.abs() > 1e-300 {
        ((sy * cc - cy * sc) / det, (cy * ss - sy * sc) / det)
    } else {
        (0.0, 0.0)
    };
    let sse = js
        .iter()
        .zip(y)
        .map(|(&j, &v)| {
            let e = (-kappa * j).exp();
            let r = v - e * (a * (k * j).sin() + b * (k * j).cos());
            r * r
        })
        .sum();
    Linear { a, b, sse }
}

/// Fits `e^{−κj}(a sin kj + b cos kj)` to `y`, optionally from a previous
/// `(κ, k)`.
fn fit_tail(js: &[f64], y: &[f64], start: Option<(f64, f64)>) -> (f64, f64, Linear) {
    let (kappa0, k0) = start.unwrap_or_else(|| {
        // Spectral peak of δn for the initial wavenumber.
        let power = |k: f64| {
            let (s, c) = js
                .iter()
                .zip(y)
                .fold((0.0, 0.0), |(s, c), (&j, &v)| (s + v * (k * j).sin(), c + v * (k * j).cos()));
            s * s + c * c
        };
        let k0 = (1..=400)
            .map(|i| i as f64 * std::f64::consts::PI / 400.0)
            .max_by(|&a, &b| power(a).total_cmp(&power(b)))
            .unwrap();
        let sse = |kappa: f64| linear_part(js, y, kappa, k0).sse;
        let kappa0 = (1..=200).map(|i| i as f64 * 0.005).min_by(|&a, &b| sse(a).total_cmp(&sse(b))).unwrap();
        (kappa0, k0)
    });
    let [kappa, k] = minimize2(|x| linear_part(js, y, x[0], x[1]).sse, [kappa0, k0], [0.01, 0.02]);
    (kappa, k, linear_part(js, y, kappa, k))
}

/// Nelder–Mead on two variables.
fn minimize2(f: impl Fn([f64; 2]) -> f64, start: [f64; 2], scale: [f64; 2]) -> [f64; 2] {
    let mut pts = [start, [start[0] + scale[0], start[1]], [start[0], start[1] + scale[1]]];
    let mut vals = pts.map(&f);
    for _ in 0..2000 {
        let mut idx = [0, 1, 2];
        idx.sort_by(|&a, &b| vals[a].total_cmp(&vals[b]));
        pts = idx.map(|i| pts[i]);
        vals = idx.map(|i| vals[i]);
        let size = (pts[1][0] - pts[0][0]).abs().max((pts[2][0] - pts[0][0]).abs())
            + (pts[1][1] - pts[0][1]).abs().max((pts[2][1] - pts[0][1]).abs());
        if size < 1e-12 {
            break;
        }
        let c = [(pts[0][0] + pts[1][0]) / 2.0, (pts[0][1] + pts[1][1]) / 2.0];
        let at = |t: f64| [c[0] + t * (pts[2][0] - c[0]), c[1] + t * (pts[2][1] - c[1])];
        let r = at(-1.0);
        let fr = f(r);
        if fr < vals[0] {
            let e = at(-2.0);
            let fe = f(e);
            if fe < fr {
                pts[2] = e;
                vals[2] = fe;
            } else {
                pts[2] = r;
                vals[2] = fr;
            }
        } else if fr < vals[1] {
            pts[2] = r;
            vals[2] = fr;
        } else {
            let k = if fr < vals[2] { at(-0.5) } else { at(0.5) };
            let fk = f(k);
            if fk < vals[2].min(fr) {
                pts[2] = k;
                vals[2] = fk;
            } else {
                for i in 1..3 {
                    pts[i] = [(pts[i][0] + pts[0][0]) / 2.0, (pts[i][1] + pts[0][1]) / 2.0];
                    vals[i] = f(pts[i]);
                }
            }
        }
    }
    let best = (0..3).min_by(|&a, &b| vals[a].total_cmp(&vals[b])).unwrap();
    pts[best]
}

/// Fits decaying density oscillations measured from the left edge.
///
/// `profile[i]` is the density of site `j = i + 1`. The bulk density `n̄` is
/// the mean over the middle third of the chain after the fitted tail has
/// been subtracted there.
pub fn fit_density_oscillations(profile: &[f64], window: &FitWindow) -> Result<OscillationFit> {
    let n = profile.len();
    let last = window.last_site.unwrap_or(n.div_ceil(2));
    let first = window.edge_margin + 1;
    if last > n || last < first + 5 {
        return Err(invalid(format!(
            "fit window sites {first}..={last} too small for a profile of {n} sites"
        )));
    }
    let bulk = n / 3..n - n / 3;
    let js: Vec<f64> = (first..=last).map(|j| j as f64).collect();
    // The bulk average is refined by removing the fitted tail, mirrored onto
    // the right half, from the middle-third sites.
    let mut nbar = profile[bulk.clone()].iter().sum::<f64>() / bulk.len() as f64;
    let mut state = None;
    for _ in 0..BULK_REFINEMENTS {
        let y: Vec<f64> = (first..=last).map(|j| profile[j - 1] - nbar).collect();
        let (kappa, k, lin) = fit_tail(&js, &y, state.map(|(kappa, k, _)| (kappa, k)));
        let tail = |j: f64| (-kappa * j).exp() * (lin.a * (k * j).sin() + lin.b * (k * j).cos());
        let corrected: f64 = bulk
            .clone()
            .map(|i| {
                let j = (i + 1).min(n - i) as f64;
                profile[i] - tail(j)
            })
            .sum();
        nbar = corrected / bulk.len() as f64;
        state = Some((kappa, k, lin));
    }
    let y: Vec<f64> = (first..=last).map(|j| profile[j - 1] - nbar).collect();
    let norm = y.iter().map(|v| v * v).sum::<f64>().sqrt();
    let (kappa, k, lin) = fit_tail(&js, &y, state.map(|(kappa, k, _)| (kappa, k)));
    let amplitude = lin.a.hypot(lin.b);
    let phase = lin.b.atan2(lin.a);
    let residual_norm = lin.sse.sqrt();
    let relative_residual = if norm > 0.0 { residual_norm / norm } else { f64::INFINITY };
    Ok(OscillationFit {
        amplitude,
        decay_length: 1.0 / kappa,
        wavenumber: k,
        phase,
        bulk_density: nbar,
        residual_norm,
        relative_residual,
        failed: !(kappa > 0.0) || !relative_residual.is_finite() || relative_residual > FAILURE_RESIDUAL,
    })
}
