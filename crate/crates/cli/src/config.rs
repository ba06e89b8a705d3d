//! Experiment configuration: parsing, static checks and hashing.

use std::fmt;
use std::path::PathBuf;

use ddxy::cqed::{dispersive_checks, CircuitSpec, CouplingMode, FindingLevel, ReferenceHopping};
use ddxy::meanfield::{FitWindow, MeanFieldOptions, SweepDirection, SweepGrid};
use ddxy::tensor::{MpoSweepOptions, NessOptions, TrotterOrder, TruncationPolicy};
use ddxy::trajectories::{EnsembleSpec, MAX_DECAY_STEP};
use ddxy::{Lattice, ModelParams};
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, clap::ValueEnum)]
#[serde(rename_all = "kebab-case")]
pub enum Kind {
    MfSweep,
    MfScan,
    MfTraj,
    MpoNess,
    MpoSweep,
    MpsTraj,
    CqedCompare,
    Oracle,
}

impl Kind {
    pub fn name(self) -> &'static str {
        match self {
            Kind::MfSweep => "mf-sweep",
            Kind::MfScan => "mf-scan",
            Kind::MfTraj => "mf-traj",
            Kind::MpoNess => "mpo-ness",
            Kind::MpoSweep => "mpo-sweep",
            Kind::MpsTraj => "mps-traj",
            Kind::CqedCompare => "cqed-compare",
            Kind::Oracle => "oracle",
        }
    }

    /// Blocks that must be present and blocks that may be present.
    fn blocks(self) -> (&'static [&'static str], &'static [&'static str]) {
        match self {
            Kind::MfSweep => (&["model", "lattice", "sweep"], &["meanfield", "fit"]),
            Kind::MfScan => (&["model", "lattice", "sweep", "scan"], &["meanfield"]),
            Kind::MfTraj => (&["model", "lattice", "ensemble"], &[]),
            Kind::MpsTraj => (&["model", "lattice", "ensemble"], &[]),
            Kind::MpoNess => (&["model", "lattice", "tebd"], &[]),
            Kind::MpoSweep => (&["model", "lattice", "sweep", "tebd"], &[]),
            Kind::CqedCompare => (&["circuit"], &[]),
            Kind::Oracle => (&["model", "lattice"], &[]),
        }
    }
}

impl fmt::Display for Kind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

/// Either `chain = N` or `rect = [nx, ny]`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct LatticeSpec {
    pub chain: Option<usize>,
    pub rect: Option<[usize; 2]>,
}

impl LatticeSpec {
    pub fn build(&self) -> Result<Lattice, String> {
        match (self.chain, self.rect) {
            (Some(n), None) => Lattice::chain(n).map_err(|e| e.to_string()),
            (None, Some([nx, ny])) => Lattice::rect(nx, ny).map_err(|e| e.to_string()),
            _ => Err("lattice needs exactly one of `chain` or `rect`".into()),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Direction {
    #[serde(rename = "L-R")]
    LeftToRight,
    #[serde(rename = "R-L")]
    RightToLeft,
}

impl From<Direction> for SweepDirection {
    fn from(d: Direction) -> Self {
        match d {
            Direction::LeftToRight => SweepDirection::LeftToRight,
            Direction::RightToLeft => SweepDirection::RightToLeft,
        }
    }
}

fn both_directions() -> Vec<Direction> {
    vec![Direction::LeftToRight, Direction::RightToLeft]
}

fn default_true() -> bool {
    true
}

fn default_anchor_seeds() -> usize {
    5
}

/// Detuning grid, given by anchors and step or by explicit increasing points.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SweepBlock {
    pub anchor_low: Option<f64>,
    pub anchor_high: Option<f64>,
    pub step: Option<f64>,
    pub points: Option<Vec<f64>>,
    #[serde(default = "both_directions")]
    pub directions: Vec<Direction>,
    #[serde(default = "default_true")]
    pub warm_start: bool,
    #[serde(default = "default_anchor_seeds")]
    pub anchor_seeds: usize,
}

impl SweepBlock {
    /// Increasing grid points.
    pub fn points(&self) -> Result<Vec<f64>, String> {
        match (&self.points, self.anchor_low, self.anchor_high, self.step) {
            (Some(p), None, None, None) => {
                if p.is_empty() || p.iter().any(|x| !x.is_finite()) {
                    return Err("sweep points must be finite and non-empty".into());
                }
                if !p.windows(2).all(|w| w[1] > w[0]) {
                    return Err("sweep points are not strictly increasing".into());
                }
                Ok(p.clone())
            }
            (None, Some(lo), Some(hi), Some(step)) => SweepGrid { anchor_low: lo, anchor_high: hi, step }
                .points(SweepDirection::LeftToRight)
                .map_err(|_| format!("sweep grid needs step > 0 and anchor_high > anchor_low, got {lo}..{hi} step {step}")),
            _ => Err("sweep needs either `points` or all of `anchor_low`, `anchor_high`, `step`".into()),
        }
    }

    pub fn ordered(&self, direction: Direction) -> Result<Vec<f64>, String> {
        let mut p = self.points()?;
        if direction == Direction::RightToLeft {
            p.reverse();
        }
        Ok(p)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FitBlock {
    pub detunings: Vec<f64>,
    #[serde(default)]
    pub window: FitWindow,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScanBlock {
    pub hoppings: Vec<f64>,
    pub drives: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct EnsembleBlock {
    #[serde(default = "default_t_total")]
    pub t_total: f64,
    #[serde(default = "default_traj_dt")]
    pub dt: f64,
    #[serde(default = "default_n_traj")]
    pub n_traj: usize,
    #[serde(default = "default_window")]
    pub window: f64,
    #[serde(default = "default_bins")]
    pub bins: usize,
    /// Detunings to run; defaults to the model detuning.
    pub detunings: Option<Vec<f64>>,
    /// Bond dimension of trajectory states (mps-traj only).
    pub chi: Option<usize>,
}

fn default_t_total() -> f64 {
    EnsembleSpec::default().t_total
}
fn default_traj_dt() -> f64 {
    EnsembleSpec::default().dt
}
fn default_n_traj() -> usize {
    EnsembleSpec::default().n_traj
}
fn default_window() -> f64 {
    EnsembleSpec::default().window
}
fn default_bins() -> usize {
    EnsembleSpec::default().bins
}

impl EnsembleBlock {
    pub fn spec(&self, seed: u64) -> EnsembleSpec {
        EnsembleSpec {
            t_total: self.t_total,
            dt: self.dt,
            n_traj: self.n_traj,
            window: self.window,
            bins: self.bins,
            seed,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TebdBlock {
    #[serde(default = "default_tebd_dt")]
    pub dt: f64,
    #[serde(default)]
    pub order: TrotterOrder,
    #[serde(default = "default_chi")]
    pub chi_max: usize,
    #[serde(default = "default_cutoff")]
    pub sv_cutoff: f64,
    #[serde(default)]
    pub ness: NessOptions,
    #[serde(default = "default_distance")]
    pub max_distance: usize,
    /// Write the final state of mpo-ness as a checkpoint.
    #[serde(default)]
    pub checkpoint: bool,
}

fn default_tebd_dt() -> f64 {
    MpoSweepOptions::default().dt
}
fn default_chi() -> usize {
    TruncationPolicy::default().chi_max
}
fn default_cutoff() -> f64 {
    TruncationPolicy::default().sv_cutoff
}
fn default_distance() -> usize {
    4
}

impl TebdBlock {
    pub fn options(&self) -> Result<MpoSweepOptions, String> {
        Ok(MpoSweepOptions {
            dt: self.dt,
            order: self.order,
            truncation: TruncationPolicy::new(self.chi_max, self.sv_cutoff).map_err(|e| e.to_string())?,
            ness: self.ness,
            max_distance: self.max_distance,
        })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CircuitBlock {
    /// `Δ_c = ω_c − ω_L`.
    pub qubit_detuning: f64,
    /// `Δ_1, Δ_2` with `Δ_j = ω_L − ω_j`.
    pub cavity_detunings: [f64; 2],
    pub couplings: [f64; 2],
    pub drive: f64,
    pub mode: CouplingMode,
    #[serde(default = "default_n_max")]
    pub n_max: usize,
    /// Scale factors `s`: `Δ_j → sΔ_j`, `g_j² → s g_j²`.
    #[serde(default = "default_scales")]
    pub scales: Vec<f64>,
    /// Final time; defaults to `20/J` with `J = g₁²/Δ₁`.
    pub t_end: Option<f64>,
    #[serde(default = "default_samples")]
    pub samples: usize,
    #[serde(default = "default_reference")]
    pub reference: ReferenceHopping,
    /// Decay rate for the parameter-window checks.
    pub decay: Option<f64>,
}

fn default_n_max() -> usize {
    2
}
fn default_scales() -> Vec<f64> {
    vec![1.0]
}
fn default_samples() -> usize {
    2001
}
fn default_reference() -> ReferenceHopping {
    ReferenceHopping::Effective
}

impl CircuitBlock {
    pub fn spec(&self, scale: f64) -> CircuitSpec {
        let g = self.couplings.map(|g| g * scale.sqrt());
        let d = self.cavity_detunings.map(|d| d * scale);
        CircuitSpec::from_detunings(self.qubit_detuning, d, g, self.drive, self.mode, self.n_max)
    }

    pub fn t_end(&self) -> f64 {
        self.t_end.unwrap_or_else(|| 20.0 * self.cavity_detunings[0] / (self.couplings[0] * self.couplings[0]))
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub kind: Kind,
    pub seed: Option<u64>,
    pub output: Option<PathBuf>,
    pub model: Option<ModelParams>,
    pub lattice: Option<LatticeSpec>,
    pub sweep: Option<SweepBlock>,
    pub meanfield: Option<MeanFieldOptions>,
    pub fit: Option<FitBlock>,
    pub scan: Option<ScanBlock>,
    pub ensemble: Option<EnsembleBlock>,
    pub tebd: Option<TebdBlock>,
    pub circuit: Option<CircuitBlock>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum Level {
    Info,
    Warning,
    Error,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Finding {
    pub level: Level,
    pub message: String,
}

impl fmt::Display for Finding {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let tag = match self.level {
            Level::Info => "info",
            Level::Warning => "warning",
            Level::Error => "error",
        };
        write!(f, "{tag}: {}", self.message)
    }
}

pub fn parse(text: &str) -> Result<ExperimentConfig, String> {
    toml::from_str(text).map_err(|e| e.to_string())
}

fn hex(bytes: &[u8]) -> String {
    bytes.iter().map(|b| format!("{b:02x}")).collect()
}

impl ExperimentConfig {
    fn present(&self) -> Vec<&'static str> {
        let mut v = Vec::new();
        let flags = [
            ("model", self.model.is_some()),
            ("lattice", self.lattice.is_some()),
            ("sweep", self.sweep.is_some()),
            ("meanfield", self.meanfield.is_some()),
            ("fit", self.fit.is_some()),
            ("scan", self.scan.is_some()),
            ("ensemble", self.ensemble.is_some()),
            ("tebd", self.tebd.is_some()),
            ("circuit", self.circuit.is_some()),
        ];
        for (name, on) in flags {
            if on {
                v.push(name);
            }
        }
        v
    }

    /// SHA-256 of the canonical JSON form (keys sorted). The output
    /// location does not enter the hash.
    pub fn hash(&self) -> String {
        let value = serde_json::to_value(Self { output: None, ..self.clone() }).expect("config serializes");
        hex(&Sha256::digest(value.to_string().as_bytes()))
    }

    /// Fills a missing seed from the hash of the seedless config. Returns
    /// whether the seed was generated.
    pub fn resolve_seed(&mut self) -> bool {
        if self.seed.is_some() {
            return false;
        }
        let h = self.hash();
        self.seed = Some(u64::from_str_radix(&h[..16], 16).expect("hex digest"));
        true
    }

    pub fn lattice(&self) -> Result<Lattice, String> {
        self.lattice.as_ref().ok_or("missing [lattice]")?.build()
    }

    pub fn model(&self) -> Result<ModelParams, String> {
        self.model.ok_or_else(|| "missing [model]".to_string())
    }

    /// Static checks. Never fails; problems are reported as findings.
    pub fn validate(&self) -> Vec<Finding> {
        let mut out = Vec::new();
        let mut err = |m: String| out.push(Finding { level: Level::Error, message: m });
        let (required, optional) = self.kind.blocks();
        let present = self.present();
        for r in required {
            if !present.contains(r) {
                err(format!("{} requires a [{r}] block", self.kind));
            }
        }
        for p in &present {
            if !required.contains(p) && !optional.contains(p) {
                err(format!("[{p}] is not used by {}", self.kind));
            }
        }
        if let Some(m) = &self.model {
            if let Err(e) = m.validate() {
                err(format!("model: {e}"));
            }
        }
        let lattice = self.lattice.as_ref().map(|l| l.build());
        if let Some(Err(e)) = &lattice {
            err(format!("lattice: {e}"));
        }
        let lattice = lattice.and_then(|l| l.ok());
        if let Some(s) = &self.sweep {
            if let Err(e) = s.points() {
                err(format!("sweep: {e}"));
            }
            if s.directions.is_empty() {
                err("sweep: no directions".into());
            }
            if s.anchor_seeds == 0 {
                err("sweep: anchor_seeds must be at least 1".into());
            }
        }
        if let Some(fit) = &self.fit {
            if fit.detunings.is_empty() {
                err("fit: no detunings".into());
            }
        }
        if let Some(scan) = &self.scan {
            let inc = |v: &[f64]| !v.is_empty() && v.windows(2).all(|w| w[1] > w[0]);
            if !inc(&scan.hoppings) || !inc(&scan.drives) {
                err("scan: hoppings and drives must be non-empty and strictly increasing".into());
            }
        }
        if let Some(t) = &self.tebd {
            if let Err(e) = t.options() {
                err(format!("tebd: {e}"));
            }
            if !(t.dt > 0.0 && t.dt.is_finite()) {
                err(format!("tebd: dt must be positive, got {}", t.dt));
            }
            if let Err(e) = t.ness.validate() {
                err(format!("tebd.ness: {e}"));
            }
        }
        if let Some(e) = &self.ensemble {
            if let Err(x) = e.spec(0).validate() {
                err(format!("ensemble: {x}"));
            }
            if self.kind == Kind::MpsTraj && !e.chi.is_some_and(|c| c >= 1) {
                err("ensemble: mps-traj needs chi >= 1".into());
            }
            if self.kind == Kind::MfTraj && e.chi.is_some() {
                err("ensemble: chi is only used by mps-traj".into());
            }
        }
        if let Some(m) = &self.meanfield {
            if let Err(e) = m.validate() {
                err(format!("meanfield: {e}"));
            }
        }
        if let (Some(l), true) = (&self.lattice, matches!(self.kind, Kind::MpoNess | Kind::MpoSweep | Kind::MpsTraj)) {
            if l.chain.is_none() {
                err(format!("{} needs a chain lattice", self.kind));
            }
        }
        if let (Some(s), Kind::MfScan) = (&self.sweep, self.kind) {
            if s.points.is_some() {
                err("mf-scan needs an anchor grid, not explicit points".into());
            }
        }
        if let (Some(lat), Kind::Oracle) = (&lattice, self.kind) {
            if lat.n_sites() > ddxy::dense::MAX_LIOUVILLIAN_SITES {
                err(format!("oracle is limited to {} sites", ddxy::dense::MAX_LIOUVILLIAN_SITES));
            }
        }
        if let Some(c) = &self.circuit {
            if c.scales.is_empty() || c.scales.iter().any(|s| !(*s > 0.0)) {
                err("circuit: scales must be positive".into());
            }
            if c.samples < 2 {
                err("circuit: need at least 2 samples".into());
            }
            if let Err(e) = c.spec(1.0).validate() {
                err(format!("circuit: {e}"));
            }
        }

        let mut warn = |m: String| out.push(Finding { level: Level::Warning, message: m });
        let decay = self.model.map_or(1.0, |m| m.decay);
        if let Some(e) = &self.ensemble {
            if e.dt * decay >= MAX_DECAY_STEP {
                warn(format!(
                    "ensemble: γ·dt = {} is outside the first-order jump regime (< {MAX_DECAY_STEP}); trajectory runs will reject it",
                    e.dt * decay
                ));
            }
        }
        if let Some(m) = &self.meanfield {
            if m.dt * decay > MAX_DECAY_STEP {
                warn(format!("meanfield: γ·dt = {} is large for the integrator", m.dt * decay));
            }
        }
        if let Some(t) = &self.tebd {
            if t.dt * decay > 0.1 {
                warn(format!("tebd: γ·dt = {} gives Trotter errors above 1e-3", t.dt * decay));
            }
        }
        if let Some(c) = &self.circuit {
            for f in dispersive_checks(&c.spec(1.0), c.decay) {
                if f.level == FindingLevel::Warn {
                    warn(format!("circuit: {} = {}", f.check, f.detail));
                }
            }
        }
        if self.seed.is_none() {
            out.push(Finding {
                level: Level::Info,
                message: "no seed given; a seed derived from the config hash will be used and recorded".into(),
            });
        }
        out
    }
}

pub fn has_errors(findings: &[Finding]) -> bool {
    findings.iter().any(|f| f.level == Level::Error)
}

/// Number of worker threads: flag, then `DDXY_WORKERS`, then all cores.
pub fn worker_count(flag: Option<usize>) -> Option<usize> {
    flag.or_else(|| std::env::var("DDXY_WORKERS").ok().and_then(|v| v.trim().parse().ok())).filter(|&n| n > 0)
}

#[cfg(test)]
mod tests {
    use super::*;

    const SWEEP: &str = r#"
kind = "mf-sweep"
seed = 1
[model]
hopping = 2.0
drive = 1.0
detuning = 0.0
[lattice]
chain = 11
[sweep]
anchor_low = 0.0
anchor_high = 1.0
step = 0.5
"#;

    #[test]
    fn parses_and_validates() {
        let c = parse(SWEEP).unwrap();
        assert_eq!(c.kind, Kind::MfSweep);
        assert!(c.validate().is_empty());
        assert_eq!(c.sweep.as_ref().unwrap().points().unwrap(), vec![0.0, 0.5, 1.0]);
    }

    #[test]
    fn rejects_unknown_keys_with_location() {
        let e = parse(&SWEEP.replace("drive = 1.0", "drive = 1.0\nspeed = 3")).unwrap_err();
        assert!(e.contains("speed") && e.contains("line"), "{e}");
    }

    #[test]
    fn missing_and_extra_blocks() {
        let c = parse(&SWEEP.replace("kind = \"mf-sweep\"", "kind = \"mpo-ness\"")).unwrap();
        let f = c.validate();
        assert!(f.iter().any(|x| x.level == Level::Error && x.message.contains("[tebd]")));
        assert!(f.iter().any(|x| x.level == Level::Error && x.message.contains("[sweep] is not used")));
    }

    #[test]
    fn non_monotone_points_are_errors() {
        let text = SWEEP.replace("anchor_low = 0.0\nanchor_high = 1.0\nstep = 0.5", "points = [0.0, 0.5, 0.4]");
        assert!(has_errors(&parse(&text).unwrap().validate()));
    }

    #[test]
    fn auto_seed_is_deterministic_and_hash_changes() {
        let mut a = parse(&SWEEP.replace("seed = 1\n", "")).unwrap();
        assert!(a.validate().iter().any(|f| f.level == Level::Info));
        let mut b = a.clone();
        assert!(a.resolve_seed() && b.resolve_seed());
        assert_eq!(a.seed, b.seed);
        let c = parse(SWEEP).unwrap();
        assert_ne!(a.hash(), c.hash());
        assert_eq!(c.hash(), parse(SWEEP).unwrap().hash());
    }
}
