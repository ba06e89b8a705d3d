use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::{evolve_to_ness, MeanFieldOptions, ProductState};
use crate::error::{invalid, Result};
use crate::lattice::{Lattice, ModelParams};

/// Largest density disagreement tolerated between anchor seeds.
pub const ANCHOR_AGREEMENT: f64 = 1e-6;
/// Jumps in the central density below this are treated as smooth crossovers.
pub const MIN_TRANSITION_JUMP: f64 = 0.1;
/// Branches closer than this everywhere are considered identical.
const BRANCH_AGREEMENT: f64 = 1e-3;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum SweepDirection {
    /// From large detuning downwards.
    RightToLeft,
    /// From negative detuning upwards.
    LeftToRight,
}

impl SweepDirection {
    pub fn label(self) -> &'static str {
        match self {
            SweepDirection::RightToLeft => "R-L",
            SweepDirection::LeftToRight => "L-R",
        }
    }
}

/// Uniform detuning grid between two anchors.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SweepGrid {
    pub anchor_high: f64,
    pub anchor_low: f64,
    pub step: f64,
}

impl Default for SweepGrid {
    fn default() -> Self {
        Self { anchor_high: 3.0, anchor_low: -2.0, step: 0.02 }
    }
}

impl SweepGrid {
    /// Grid points in sweep order; the first point is the anchor.
    pub fn points(&self, direction: SweepDirection) -> Result<Vec<f64>> {
        if !(self.step > 0.0 && self.anchor_high > self.anchor_low) {
            return Err(invalid(format!("bad sweep grid {self:?}")));
        }
        let n = ((self.anchor_high - self.anchor_low) / self.step).round() as usize;
        let up = (0..=n).map(|i| self.anchor_low + i as f64 * self.step);
        Ok(match direction {
            SweepDirection::LeftToRight => up.collect(),
            SweepDirection::RightToLeft => {
                let mut v: Vec<f64> = up.collect();
                v.reverse();
                v
            }
        })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SweepSpec {
    /// Detunings in sweep order; `grid[0]` is the anchor.
    pub grid: Vec<f64>,
    pub direction: SweepDirection,
    #[serde(default = "default_anchor_seeds")]
    pub anchor_seeds: usize,
    /// Start each point from the previous point's steady state. When false
    /// every point restarts from the anchor steady state.
    #[serde(default = "default_true")]
    pub warm_start: bool,
    #[serde(default)]
    pub seed: u64,
}

fn default_anchor_seeds() -> usize {
    5
}

fn default_true() -> bool {
    true
}

impl SweepSpec {
    pub fn new(grid: Vec<f64>, direction: SweepDirection, seed: u64) -> Self {
        Self { grid, direction, anchor_seeds: default_anchor_seeds(), warm_start: true, seed }
    }

    pub fn from_grid(grid: &SweepGrid, direction: SweepDirection, seed: u64) -> Result<Self> {
        Ok(Self::new(grid.points(direction)?, direction, seed))
    }

    pub fn validate(&self) -> Result<()> {
        if self.grid.is_empty() {
            return Err(invalid("sweep grid is empty"));
        }
        if self.grid.iter().any(|x| !x.is_finite()) {
            return Err(invalid("sweep grid has non-finite values"));
        }
        let ok = self.grid.windows(2).all(|w| match self.direction {
            SweepDirection::RightToLeft => w[1] < w[0],
            SweepDirection::LeftToRight => w[1] > w[0],
        });
        if !ok {
            return Err(invalid(format!(
                "sweep grid is not strictly monotone in the {} direction",
                self.direction.label()
            )));
        }
        if self.anchor_seeds == 0 {
            return Err(invalid("need at least one anchor seed"));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepRecord {
    pub detuning: f64,
    pub central_density: f64,
    pub converged: bool,
    pub residual: f64,
    pub final_time: f64,
    pub profile: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepResult {
    pub direction: SweepDirection,
    pub records: Vec<SweepRecord>,
    /// Largest density spread among the anchor seeds.
    pub anchor_spread: f64,
    pub anchor_unique: bool,
}

impl SweepResult {
    pub fn all_converged(&self) -> bool {
        self.records.iter().all(|r| r.converged)
    }

    /// Record at the grid point closest to `detuning`.
    pub fn nearest(&self, detuning: f64) -> Option<&SweepRecord> {
        self.records
            .iter()
            .min_by(|a, b| (a.detuning - detuning).abs().total_cmp(&(b.detuning - detuning).abs()))
    }
}

fn record(detuning: f64, state: &ProductState, lattice: &Lattice, rep: super::ConvergenceReport) -> SweepRecord {
    SweepRecord {
        detuning,
        central_density: state.density(lattice.central_site()),
        converged: rep.converged,
        residual: rep.residual,
        final_time: rep.final_time,
        profile: state.densities(),
    }
}

/// Sweeps the detuning along `sweep.grid`, warm-starting each point from
/// the previous steady state. The anchor is relaxed from several random
/// pure product states and their agreement is recorded.
pub fn sweep_detuning(
    sweep: &SweepSpec,
    params: &ModelParams,
    lattice: &Lattice,
    opts: &MeanFieldOptions,
) -> Result<SweepResult> {
    sweep.validate()?;
    params.validate()?;
    let n = lattice.n_sites();
    let anchor_params = params.with_detuning(sweep.grid[0]);
    let anchors: Vec<(ProductState, super::ConvergenceReport)> = (0..sweep.anchor_seeds)
        .into_par_iter()
        .map(|i| {
            let mut rng = ChaCha8Rng::seed_from_u64(sweep.seed);
            rng.set_stream(i as u64);
            let st0 = ProductState::random_pure(n, &mut rng);
            evolve_to_ness(&st0, &anchor_params, lattice, opts)
        })
        .collect::<Result<_>>()?;
    let anchor_spread = anchors
        .iter()
        .skip(1)
        .map(|(s, _)| s.max_density_diff(&anchors[0].0))
        .fold(0.0, f64::max);

    let (anchor_state, anchor_rep) = anchors.into_iter().next().expect("at least one anchor");
    let mut records = Vec::with_capacity(sweep.grid.len());
    records.push(record(sweep.grid[0], &anchor_state, lattice, anchor_rep));
    let mut current = anchor_state.clone();
    for &d in &sweep.grid[1..] {
        let start = if sweep.warm_start { &current } else { &anchor_state };
        let (st, rep) = evolve_to_ness(start, &params.with_detuning(d), lattice, opts)?;
        records.push(record(d, &st, lattice, rep));
        current = st;
    }
    Ok(SweepResult {
        direction: sweep.direction,
        records,
        anchor_spread,
        anchor_unique: anchor_spread < ANCHOR_AGREEMENT,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Transition {
    /// Midpoint of the grid pair with the largest central-density jump.
    pub detuning: f64,
    /// Signed change of the central density across the pair, in sweep order.
    pub jump: f64,
}

/// Locates the largest adjacent jump of the central density. Returns `None`
/// when that jump is below [`MIN_TRANSITION_JUMP`].
pub fn locate_transition(records: &[SweepRecord]) -> Option<Transition> {
    let best = records
        .windows(2)
        .map(|w| Transition {
            detuning: 0.5 * (w[0].detuning + w[1].detuning),
            jump: w[1].central_density - w[0].central_density,
        })
        .max_by(|a, b| a.jump.abs().total_cmp(&b.jump.abs()))?;
    (best.jump.abs() >= MIN_TRANSITION_JUMP).then_some(best)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BistabilityRecord {
    pub hopping: f64,
    pub drive: f64,
    pub left_to_right: Option<Transition>,
    pub right_to_left: Option<Transition>,
    /// `(low, high)` detuning bounds of the region where the branches
    /// differ, or `None` when they agree everywhere.
    pub interval: Option<(f64, f64)>,
    pub max_branch_difference: f64,
    pub all_converged: bool,
}

/// Largest central-density difference between the two sweeps at common
/// grid points.
pub fn branch_difference(a: &SweepResult, b: &SweepResult) -> f64 {
    a.records
        .iter()
        .filter_map(|r| {
            b.records
                .iter()
                .find(|s| (s.detuning - r.detuning).abs() < 1e-9)
                .map(|s| (s.central_density - r.central_density).abs())
        })
        .fold(0.0, f64::max)
}

/// Runs both sweep directions for every `(J, Ω)` pair and reports the
/// bistable interval.
pub fn scan_bistability(
    hoppings: &[f64],
    drives: &[f64],
    template: &ModelParams,
    lattice: &Lattice,
    grid: &SweepGrid,
    opts: &MeanFieldOptions,
    seed: u64,
) -> Result<Vec<BistabilityRecord>> {
    let monotone = |v: &[f64]| v.windows(2).all(|w| w[1] > w[0]);
    if !monotone(hoppings) || !monotone(drives) {
        return Err(invalid("hopping and drive grids must be strictly increasing"));
    }
    let jobs: Vec<(f64, f64, SweepDirection)> = hoppings
        .iter()
        .flat_map(|&j| {
            drives.iter().flat_map(move |&o| {
                [SweepDirection::LeftToRight, SweepDirection::RightToLeft].map(|d| (j, o, d))
            })
        })
        .collect();
    let results: Vec<SweepResult> = jobs
        .par_iter()
        .map(|&(j, o, d)| {
            let p = ModelParams { hopping: j, drive: o, ..*template };
            sweep_detuning(&SweepSpec::from_grid(grid, d, seed)?, &p, lattice, opts)
        })
        .collect::<Result<_>>()?;
    Ok(jobs
        .chunks(2)
        .zip(results.chunks(2))
        .map(|(job, res)| {
            let (lr, rl) = (&res[0], &res[1]);
            let diff = branch_difference(lr, rl);
            let differing: Vec<f64> = lr
                .records
                .iter()
                .filter(|r| {
                    rl.nearest(r.detuning)
                        .is_some_and(|s| (s.central_density - r.central_density).abs() > BRANCH_AGREEMENT)
                })
                .map(|r| r.detuning)
                .collect();
            let interval = if diff > BRANCH_AGREEMENT {
                let lo = differing.iter().copied().fold(f64::INFINITY, f64::min);
                let hi = differing.iter().copied().fold(f64::NEG_INFINITY, f64::max);
                Some((lo, hi))
            } else {
                None
            };
            BistabilityRecord {
                hopping: job[0].0,
                drive: job[0].1,
                left_to_right: locate_transition(&lr.records),
                right_to_left: locate_transition(&rl.records),
                interval,
                max_branch_difference: diff,
                all_converged: lr.all_converged() && rl.all_converged(),
            }
        })
        .collect())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn rec(d: f64, n: f64) -> SweepRecord {
        SweepRecord {
            detuning: d,
            central_density: n,
            converged: true,
            residual: 0.0,
            final_time: 0.0,
            profile: vec![n],
        }
    }

    #[test]
    fn grid_points_are_ordered_and_anchored() {
        let g = SweepGrid { anchor_high: 1.0, anchor_low: 0.0, step: 0.25 };
        assert_eq!(g.points(SweepDirection::LeftToRight).unwrap(), vec![0.0, 0.25, 0.5, 0.75, 1.0]);
        assert_eq!(g.points(SweepDirection::RightToLeft).unwrap()[0], 1.0);
        assert_eq!(SweepGrid::default().points(SweepDirection::RightToLeft).unwrap().len(), 251);
    }

    #[test]
    fn non_monotone_grid_rejected() {
        let s = SweepSpec::new(vec![1.0, 0.5, 0.7], SweepDirection::RightToLeft, 0);
        assert!(s.validate().is_err());
        let s = SweepSpec::new(vec![1.0, 0.5], SweepDirection::LeftToRight, 0);
        assert!(s.validate().is_err());
    }

    #[test]
    fn transition_at_largest_jump() {
        let r = [rec(1.0, 0.8), rec(0.9, 0.78), rec(0.8, 0.3), rec(0.7, 0.29)];
        let t = locate_transition(&r).unwrap();
        assert!((t.detuning - 0.85).abs() < 1e-12);
        assert!((t.jump + 0.48).abs() < 1e-12);
        let smooth = [rec(1.0, 0.5), rec(0.9, 0.45), rec(0.8, 0.4)];
        assert!(locate_transition(&smooth).is_none());
    }

    #[test]
    fn decoupled_sites_have_no_bistability() {
        let lat = Lattice::chain(3).unwrap();
        let grid = SweepGrid { anchor_high: 1.0, anchor_low: -1.0, step: 0.25 };
        let out = scan_bistability(
            &[0.0],
            &[0.5, 1.5],
            &ModelParams::in_decay_units(0.0, 1.0, 0.0),
            &lat,
            &grid,
            &MeanFieldOptions { tol: 1e-9, ..Default::default() },
            7,
        )
        .unwrap();
        assert_eq!(out.len(), 2);
        for r in out {
            assert!(r.interval.is_none(), "{r:?}");
            assert!(r.all_converged);
        }
    }

    #[test]
    fn anchor_seeds_agree_for_unique_steady_state() {
        let lat = Lattice::chain(5).unwrap();
        let spec = SweepSpec::new(vec![3.0, 2.9], SweepDirection::RightToLeft, 11);
        let opts = MeanFieldOptions { tol: 1e-10, ..Default::default() };
        let res = sweep_detuning(&spec, &ModelParams::in_decay_units(2.0, 1.0, 0.0), &lat, &opts).unwrap();
        assert!(res.anchor_unique, "spread {}", res.anchor_spread);
        assert_eq!(res.records.len(), 2);
    }
}
