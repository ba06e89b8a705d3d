//! Model parameters, open-boundary lattice geometry and local operators.

use serde::{Deserialize, Serialize};

use crate::error::{invalid, Error, Result};
use crate::linalg::Mat2;
use crate::C64;

/// Rates of the driven-dissipative XY model.
///
/// The Hamiltonian in the frame rotating with the drive is
/// `H = Σ_j [detuning·n_j + drive·(σ⁺_j + σ⁻_j)] − hopping·Σ_⟨j,k⟩ σ⁺_j σ⁻_k`
/// and every site decays through `σ⁻_j` at rate `decay`. Results are reported
/// in units of `decay`, which defaults to 1.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ModelParams {
    pub hopping: f64,
    pub drive: f64,
    pub detuning: f64,
    #[serde(default = "unit_decay")]
    pub decay: f64,
}

fn unit_decay() -> f64 {
    1.0
}

impl ModelParams {
    pub fn new(hopping: f64, drive: f64, detuning: f64, decay: f64) -> Result<Self> {
        let p = Self { hopping, drive, detuning, decay };
        p.validate()?;
        Ok(p)
    }

    /// Parameters in units of a unit decay rate.
    pub fn in_decay_units(hopping: f64, drive: f64, detuning: f64) -> Self {
        Self { hopping, drive, detuning, decay: 1.0 }
    }

    pub fn validate(&self) -> Result<()> {
        let all = [self.hopping, self.drive, self.detuning, self.decay];
        if all.iter().any(|x| !x.is_finite()) {
            return Err(invalid(format!("model rates must be finite: {self:?}")));
        }
        if self.decay <= 0.0 {
            return Err(invalid(format!("decay rate must be positive, got {}", self.decay)));
        }
        Ok(())
    }

    /// Like [`ModelParams::validate`] but also accepts `decay == 0`, the
    /// closed-system limit used by unitary checks.
    pub fn validate_allow_closed(&self) -> Result<()> {
        let all = [self.hopping, self.drive, self.detuning, self.decay];
        if all.iter().any(|x| !x.is_finite()) || self.decay < 0.0 {
            return Err(invalid(format!("bad model rates: {self:?}")));
        }
        Ok(())
    }

    pub fn with_detuning(mut self, detuning: f64) -> Self {
        self.detuning = detuning;
        self
    }

    /// Rates divided by the decay rate, so that `decay == 1`.
    pub fn normalized(&self) -> Self {
        Self {
            hopping: self.hopping / self.decay,
            drive: self.drive / self.decay,
            detuning: self.detuning / self.decay,
            decay: 1.0,
        }
    }

    /// Excited-state population of an isolated driven, damped site:
    /// `|Ω|² / (Δ² + γ²/4 + 2|Ω|²)`.
    pub fn single_site_density(drive_abs_sq: f64, detuning: f64, decay: f64) -> f64 {
        drive_abs_sq / (detuning * detuning + decay * decay / 4.0 + 2.0 * drive_abs_sq)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Geometry {
    Chain { n: usize },
    /// `nx` columns by `ny` rows; site `x + nx·y`.
    Rect { nx: usize, ny: usize },
}

/// Lattice with open boundaries and nearest-neighbor bonds.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Lattice {
    geometry: Geometry,
    adjacency: Vec<Vec<usize>>,
}

impl Lattice {
    pub fn chain(n: usize) -> Result<Self> {
        Self::new(Geometry::Chain { n })
    }

    pub fn rect(nx: usize, ny: usize) -> Result<Self> {
        Self::new(Geometry::Rect { nx, ny })
    }

    /// Builds a lattice from per-axis extents: one extent for a chain, two
    /// for a rectangle.
    pub fn from_extents(extents: &[usize]) -> Result<Self> {
        match *extents {
            [n] => Self::chain(n),
            [nx, ny] => Self::rect(nx, ny),
            _ => Err(invalid(format!(
                "lattice needs 1 or 2 extents, got {}",
                extents.len()
            ))),
        }
    }

    pub fn new(geometry: Geometry) -> Result<Self> {
        let adjacency = match geometry {
            Geometry::Chain { n } => {
                if n == 0 {
                    return Err(invalid("chain needs at least one site"));
                }
                (0..n)
                    .map(|j| {
                        let mut v = Vec::with_capacity(2);
                        if j > 0 {
                            v.push(j - 1);
                        }
                        if j + 1 < n {
                            v.push(j + 1);
                        }
                        v
                    })
                    .collect()
            }
            Geometry::Rect { nx, ny } => {
                if nx == 0 || ny == 0 {
                    return Err(invalid("rectangle extents must be at least 1"));
                }
                (0..nx * ny)
                    .map(|s| {
                        let (x, y) = (s % nx, s / nx);
                        let mut v = Vec::with_capacity(4);
                        if y > 0 {
                            v.push(s - nx);
                        }
                        if x > 0 {
                            v.push(s - 1);
                        }
                        if x + 1 < nx {
                            v.push(s + 1);
                        }
                        if y + 1 < ny {
                            v.push(s + nx);
                        }
                        v
                    })
                    .collect()
            }
        };
        Ok(Self { geometry, adjacency })
    }

    pub fn geometry(&self) -> Geometry {
        self.geometry
    }

    pub fn dimension(&self) -> usize {
        match self.geometry {
            Geometry::Chain { .. } => 1,
            Geometry::Rect { .. } => 2,
        }
    }

    pub fn extents(&self) -> Vec<usize> {
        match self.geometry {
            Geometry::Chain { n } => vec![n],
            Geometry::Rect { nx, ny } => vec![nx, ny],
        }
    }

    pub fn n_sites(&self) -> usize {
        self.adjacency.len()
    }

    pub fn check_site(&self, site: usize) -> Result<()> {
        if site < self.n_sites() {
            Ok(())
        } else {
            Err(Error::SiteOutOfRange { site, n_sites: self.n_sites() })
        }
    }

    /// Nearest neighbors of `site` in increasing index order.
    pub fn neighbors(&self, site: usize) -> Result<&[usize]> {
        self.check_site(site)?;
        Ok(&self.adjacency[site])
    }

    /// Unchecked neighbor access for hot loops.
    pub(crate) fn adjacency(&self) -> &[Vec<usize>] {
        &self.adjacency
    }

    /// Every bond once, as `(a, b)` with `a < b`.
    pub fn bonds(&self) -> Vec<(usize, usize)> {
        let mut out = Vec::new();
        for (a, nbrs) in self.adjacency.iter().enumerate() {
            for &b in nbrs {
                if a < b {
                    out.push((a, b));
                }
            }
        }
        out
    }

    /// The central site, `⌈N/2⌉` counted from 1 along each axis, returned as
    /// a 0-based index.
    pub fn central_site(&self) -> usize {
        let mid = |n: usize| n.div_ceil(2) - 1;
        match self.geometry {
            Geometry::Chain { n } => mid(n),
            Geometry::Rect { nx, ny } => mid(nx) + nx * mid(ny),
        }
    }

    /// Image of `site` under the point reflection through the lattice center.
    pub fn reflect(&self, site: usize) -> usize {
        self.n_sites() - 1 - site
    }
}

/// Single-site operators in the `{|0⟩, |1⟩}` basis.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum LocalOp {
    Identity,
    SigmaPlus,
    SigmaMinus,
    SigmaZ,
    /// `n = σ⁺σ⁻`, the excitation number.
    Number,
}

impl LocalOp {
    pub fn matrix(self) -> Mat2 {
        let o = C64::new(0.0, 0.0);
        let l = C64::new(1.0, 0.0);
        match self {
            LocalOp::Identity => [[l, o], [o, l]],
            LocalOp::SigmaPlus => [[o, o], [l, o]],
            LocalOp::SigmaMinus => [[o, l], [o, o]],
            LocalOp::SigmaZ => [[-l, o], [o, l]],
            LocalOp::Number => [[o, o], [o, l]],
        }
    }

    pub fn is_hermitian(self) -> bool {
        !matches!(self, LocalOp::SigmaPlus | LocalOp::SigmaMinus)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn chain_neighbors() {
        let l = Lattice::chain(5).unwrap();
        assert_eq!(l.neighbors(0).unwrap(), &[1]);
        assert_eq!(l.neighbors(2).unwrap(), &[1, 3]);
        assert_eq!(l.neighbors(4).unwrap(), &[3]);
        assert!(matches!(l.neighbors(5), Err(Error::SiteOutOfRange { site: 5, n_sites: 5 })));
    }

    #[test]
    fn rect_center_has_four_neighbors() {
        let l = Lattice::rect(3, 3).unwrap();
        let c = l.central_site();
        assert_eq!(c, 4);
        assert_eq!(l.neighbors(c).unwrap(), &[1, 3, 5, 7]);
        assert_eq!(l.neighbors(0).unwrap(), &[1, 3]);
    }

    #[test]
    fn neighbor_relation_is_symmetric() {
        for lat in [Lattice::chain(7).unwrap(), Lattice::rect(4, 3).unwrap(), Lattice::rect(1, 5).unwrap()] {
            for s in 0..lat.n_sites() {
                for &t in lat.neighbors(s).unwrap() {
                    assert!(lat.neighbors(t).unwrap().contains(&s));
                }
                assert!(lat.neighbors(s).unwrap().len() <= 2 * lat.dimension());
            }
        }
    }

    #[test]
    fn central_site_uses_ceiling() {
        assert_eq!(Lattice::chain(61).unwrap().central_site(), 30);
        assert_eq!(Lattice::chain(4).unwrap().central_site(), 1);
        assert_eq!(Lattice::rect(8, 8).unwrap().central_site(), 3 + 8 * 3);
    }

    #[test]
    fn bonds_listed_once() {
        assert_eq!(Lattice::chain(5).unwrap().bonds().len(), 4);
        assert_eq!(Lattice::rect(3, 3).unwrap().bonds().len(), 12);
    }

    #[test]
    fn local_operator_identities() {
        let p = LocalOp::SigmaPlus.matrix();
        let m = LocalOp::SigmaMinus.matrix();
        let n = LocalOp::Number.matrix();
        let z = LocalOp::SigmaZ.matrix();
        for a in 0..2 {
            for b in 0..2 {
                assert_eq!(p[a][b], m[b][a].conj());
                let pm: C64 = (0..2).map(|c| p[a][c] * m[c][b]).sum();
                assert_eq!(pm, n[a][b]);
                let id = if a == b { 1.0 } else { 0.0 };
                assert_eq!(z[a][b], n[a][b] * 2.0 - id);
            }
        }
    }

    #[test]
    fn params_reject_nonpositive_decay() {
        assert!(ModelParams::new(1.0, 1.0, 0.0, 0.0).is_err());
        assert!(ModelParams::new(f64::NAN, 1.0, 0.0, 1.0).is_err());
        assert!(ModelParams::new(2.0, 1.0, 0.5, 1.0).is_ok());
    }
}
