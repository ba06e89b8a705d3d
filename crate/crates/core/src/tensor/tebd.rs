use ndarray::Array2;
use serde::{Deserialize, Serialize};

use super::chain::TruncationPolicy;
use super::gates::{merged_sequence, Layer, TrotterSchedule};
use super::mpo::VectorizedMpo;
use crate::error::{invalid, Result};

/// Truncation bookkeeping of a block of steps.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct TruncationReport {
    /// Sum of the discarded fractions of all splits in the block.
    pub discarded: f64,
    pub max_bond: usize,
}

fn apply_layer(
    mpo: &mut VectorizedMpo,
    gates: &[Array2<f64>],
    layer: Layer,
    policy: &TruncationPolicy,
) -> Result<f64> {
    let n = mpo.n_sites();
    if n == 1 {
        if layer == Layer::Even {
            mpo.chain.apply_one_site(0, &gates[0]);
        }
        return Ok(0.0);
    }
    let mut bonds: Vec<usize> = layer.bonds(n).collect();
    if bonds.is_empty() {
        return Ok(0.0);
    }
    let rightward = mpo.center() < n / 2;
    if !rightward {
        bonds.reverse();
    }
    let mut discarded = 0.0;
    for b in bonds {
        let chain = &mut mpo.chain;
        chain.move_center(if rightward { b } else { b + 1 })?;
        discarded += chain.apply_two_site(b, &gates[b], policy, rightward)?;
    }
    Ok(discarded)
}

fn run_sequence(
    mpo: &mut VectorizedMpo,
    schedule: &TrotterSchedule,
    policy: &TruncationPolicy,
    seq: &[(Layer, f64)],
    steps: usize,
) -> Result<TruncationReport> {
    policy.validate()?;
    if mpo.n_sites() != schedule.n_sites() {
        return Err(invalid(format!(
            "schedule built for {} sites applied to an MPO of {}",
            schedule.n_sites(),
            mpo.n_sites()
        )));
    }
    let mut report = TruncationReport { discarded: 0.0, max_bond: mpo.max_bond() };
    for &(layer, w) in seq {
        report.discarded += apply_layer(mpo, schedule.gates(w), layer, policy)?;
        mpo.renormalize()?;
        report.max_bond = report.max_bond.max(mpo.max_bond());
    }
    mpo.discarded_weight += report.discarded;
    mpo.time += steps as f64 * schedule.dt;
    Ok(report)
}

/// One full time step, trace renormalized to 1.
pub fn tebd_step(
    mpo: &mut VectorizedMpo,
    schedule: &TrotterSchedule,
    policy: &TruncationPolicy,
) -> Result<TruncationReport> {
    tebd_evolve(mpo, schedule, policy, 1)
}

/// `steps` time steps with the boundary half-steps of neighbouring steps
/// fused.
pub fn tebd_evolve(
    mpo: &mut VectorizedMpo,
    schedule: &TrotterSchedule,
    policy: &TruncationPolicy,
    steps: usize,
) -> Result<TruncationReport> {
    if steps == 0 {
        return Ok(TruncationReport { discarded: 0.0, max_bond: mpo.max_bond() });
    }
    let seq = merged_sequence(schedule.order, steps);
    run_sequence(mpo, schedule, policy, &seq, steps)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct NessOptions {
    /// Bound on `max_j |Δn_j|` between checks.
    pub tol: f64,
    pub t_max: f64,
    /// Time between convergence checks, in units of `1/γ`.
    pub check_interval: f64,
    /// Consecutive checks below `tol` required to stop.
    pub patience: usize,
}

impl Default for NessOptions {
    fn default() -> Self {
        Self { tol: 1e-6, t_max: 400.0, check_interval: 1.0, patience: 3 }
    }
}

impl NessOptions {
    pub fn validate(&self) -> Result<()> {
        if !(self.tol > 0.0 && self.t_max > 0.0 && self.check_interval > 0.0 && self.patience > 0) || !self.t_max.is_finite() {
            return Err(invalid(format!("bad NESS options: {self:?}")));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NessReport {
    pub converged: bool,
    /// Evolution time of this call.
    pub elapsed: f64,
    /// `max_j |Δn_j|` over the last check interval.
    pub residual: f64,
    /// Discarded weight accumulated during this call.
    pub discarded_weight: f64,
    /// Discarded weight of the last check interval.
    pub final_discarded: f64,
    pub max_bond: usize,
    /// Some bond reached `chi_max`.
    pub chi_saturated: bool,
    pub steps: usize,
}

/// Evolves until the densities change by less than `tol` over `patience`
/// consecutive check intervals, or `t_max` is reached.
pub fn evolve_to_ness_mpo(
    mut mpo: VectorizedMpo,
    schedule: &TrotterSchedule,
    policy: &TruncationPolicy,
    opts: &NessOptions,
) -> Result<(VectorizedMpo, NessReport)> {
    opts.validate()?;
    if !(schedule.dt > 0.0) {
        return Err(invalid("NESS search needs a positive time step"));
    }
    let per_check = ((opts.check_interval / schedule.dt).round() as usize).max(1);
    let max_checks = (opts.t_max / (per_check as f64 * schedule.dt)).ceil() as usize;
    let seq = merged_sequence(schedule.order, per_check);
    let mut prev = mpo.densities()?;
    let mut report = NessReport {
        converged: false,
        elapsed: 0.0,
        residual: f64::INFINITY,
        discarded_weight: 0.0,
        final_discarded: 0.0,
        max_bond: mpo.max_bond(),
        chi_saturated: false,
        steps: 0,
    };
    let mut quiet = 0;
    for _ in 0..max_checks {
        let block = run_sequence(&mut mpo, schedule, policy, &seq, per_check)?;
        report.steps += per_check;
        report.elapsed += per_check as f64 * schedule.dt;
        report.discarded_weight += block.discarded;
        report.final_discarded = block.discarded;
        report.max_bond = report.max_bond.max(block.max_bond);
        let dens = mpo.densities()?;
        report.residual = dens.iter().zip(&prev).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max);
        prev = dens;
        quiet = if report.residual < opts.tol { quiet + 1 } else { 0 };
        if quiet >= opts.patience {
            report.converged = true;
            break;
        }
    }
    report.chi_saturated = report.max_bond >= policy.chi_max;
    Ok((mpo, report))
}
