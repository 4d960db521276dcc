//! Time-frequency-polarization lattice.
//!
//! Cells are addressed by subcarrier `n` and half-symbol index `m` (one step
//! is `T0/2`). Each cell carries the phase `exp(j·π/2·(n+m))` and, for the
//! dual-polarization structures, a polarization determined by index parity.

use num_complex::Complex64;
use std::fmt;
use std::str::FromStr;

use crate::error::Error;

/// Multiplexing structure of the lattice.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum StructureId {
    /// Single polarization, every cell on V.
    Conventional,
    /// Structure I: polarization alternates with the half-symbol index.
    Tpdm,
    /// Structure II: polarization alternates with the subcarrier index.
    Fpdm,
    /// Structure III: checkerboard over (n, m).
    Tfpdm,
}

impl StructureId {
    pub const ALL: [StructureId; 4] = [
        StructureId::Conventional,
        StructureId::Tpdm,
        StructureId::Fpdm,
        StructureId::Tfpdm,
    ];

    /// Structure number as used on the command line (1, 2, 3); `None` for
    /// the conventional single-polarization lattice.
    pub fn number(self) -> Option<u8> {
        match self {
            StructureId::Conventional => None,
            StructureId::Tpdm => Some(1),
            StructureId::Fpdm => Some(2),
            StructureId::Tfpdm => Some(3),
        }
    }

    pub fn from_number(n: u8) -> Option<Self> {
        match n {
            1 => Some(StructureId::Tpdm),
            2 => Some(StructureId::Fpdm),
            3 => Some(StructureId::Tfpdm),
            _ => None,
        }
    }

    pub fn is_dual(self) -> bool {
        self != StructureId::Conventional
    }
}

impl fmt::Display for StructureId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let s = match self {
            StructureId::Conventional => "conventional",
            StructureId::Tpdm => "tpdm",
            StructureId::Fpdm => "fpdm",
            StructureId::Tfpdm => "tfpdm",
        };
        f.write_str(s)
    }
}

impl FromStr for StructureId {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.trim().to_ascii_lowercase().as_str() {
            "conventional" | "0" => Ok(StructureId::Conventional),
            "tpdm" | "1" | "i" => Ok(StructureId::Tpdm),
            "fpdm" | "2" | "ii" => Ok(StructureId::Fpdm),
            "tfpdm" | "3" | "iii" => Ok(StructureId::Tfpdm),
            other => Err(Error::param(format!("unknown structure '{other}'"))),
        }
    }
}

/// One of the two orthogonal polarizations.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Polarization {
    V,
    H,
}

impl Polarization {
    pub fn index(self) -> usize {
        match self {
            Polarization::V => 0,
            Polarization::H => 1,
        }
    }

    pub fn other(self) -> Self {
        match self {
            Polarization::V => Polarization::H,
            Polarization::H => Polarization::V,
        }
    }
}

/// A fully resolved lattice cell.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LatticeCell {
    pub n: usize,
    pub m: i64,
    pub pol: Polarization,
    pub phase: Complex64,
}

impl LatticeCell {
    pub fn new(structure: StructureId, n: usize, m: i64) -> Self {
        LatticeCell {
            n,
            m,
            pol: assign_polarization(structure, n as i64, m),
            phase: phase(n as i64, m),
        }
    }
}

/// `exp(j·π/2·(n+m))`, exact on the four axis points.
pub fn phase(n: i64, m: i64) -> Complex64 {
    match (n + m).rem_euclid(4) {
        0 => Complex64::new(1.0, 0.0),
        1 => Complex64::new(0.0, 1.0),
        2 => Complex64::new(-1.0, 0.0),
        _ => Complex64::new(0.0, -1.0),
    }
}

/// Polarization carrying cell (n, m). Even parity maps to V.
pub fn assign_polarization(structure: StructureId, n: i64, m: i64) -> Polarization {
    let even = match structure {
        StructureId::Conventional => true,
        StructureId::Tpdm => m.rem_euclid(2) == 0,
        StructureId::Fpdm => n.rem_euclid(2) == 0,
        StructureId::Tfpdm => (n + m).rem_euclid(2) == 0,
    };
    if even {
        Polarization::V
    } else {
        Polarization::H
    }
}

/// Boolean window over offsets `p ∈ [-dp, dp]`, `q ∈ [-dq, dq]`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct PolMask {
    pub dp: usize,
    pub dq: usize,
    same: Vec<bool>,
}

impl PolMask {
    fn index(&self, p: i64, q: i64) -> Option<usize> {
        let (dp, dq) = (self.dp as i64, self.dq as i64);
        if p.abs() > dp || q.abs() > dq {
            return None;
        }
        Some(((p + dp) * (2 * dq + 1) + (q + dq)) as usize)
    }

    /// Whether offset (p, q) lands on the same polarization as the reference
    /// cell. Offsets outside the window return `false`.
    pub fn same_pol(&self, p: i64, q: i64) -> bool {
        self.index(p, q).map(|i| self.same[i]).unwrap_or(false)
    }
}

/// Mask of same-polarization neighbours. All four assignments depend only on
/// index parities, so the mask is the same for every reference cell.
pub fn same_pol_mask(structure: StructureId, dp: usize, dq: usize) -> PolMask {
    let mut same = Vec::with_capacity((2 * dp + 1) * (2 * dq + 1));
    for p in -(dp as i64)..=dp as i64 {
        for q in -(dq as i64)..=dq as i64 {
            same.push(assign_polarization(structure, p, q) == assign_polarization(structure, 0, 0));
        }
    }
    PolMask { dp, dq, same }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn phase_values() {
        assert_eq!(phase(0, 0), Complex64::new(1.0, 0.0));
        assert_eq!(phase(1, 0), Complex64::new(0.0, 1.0));
        assert_eq!(phase(2, 2), Complex64::new(1.0, 0.0));
        assert_eq!(phase(-1, 0), Complex64::new(0.0, -1.0));
        for s in -8..8 {
            let expect = Complex64::from_polar(1.0, std::f64::consts::FRAC_PI_2 * s as f64);
            assert!((phase(s, 0) - expect).norm() < 1e-12);
            assert_eq!(phase(s, 0), phase(s + 4, 0));
        }
    }

    #[test]
    fn polarization_examples() {
        use Polarization::*;
        assert_eq!(assign_polarization(StructureId::Tpdm, 5, 2), V);
        assert_eq!(assign_polarization(StructureId::Tpdm, 5, 3), H);
        assert_eq!(assign_polarization(StructureId::Fpdm, 2, 7), V);
        assert_eq!(assign_polarization(StructureId::Fpdm, 3, 7), H);
        assert_eq!(assign_polarization(StructureId::Tfpdm, 1, 1), V);
        assert_eq!(assign_polarization(StructureId::Conventional, 3, 7), V);
    }

    #[test]
    fn masks() {
        let m = same_pol_mask(StructureId::Tfpdm, 2, 3);
        for p in -2..=2 {
            for q in -3..=3 {
                assert_eq!(m.same_pol(p, q), (p + q) % 2 == 0);
            }
        }
        let m = same_pol_mask(StructureId::Tpdm, 2, 3);
        for p in -2..=2 {
            for q in -3..=3 {
                assert_eq!(m.same_pol(p, q), q % 2 == 0);
            }
        }
        let m = same_pol_mask(StructureId::Conventional, 1, 1);
        assert!((-1..=1).all(|p| (-1..=1).all(|q| m.same_pol(p, q))));
        assert!(!m.same_pol(2, 0));
    }

    #[test]
    fn mask_is_shift_invariant() {
        for s in StructureId::ALL {
            let mask = same_pol_mask(s, 2, 3);
            for n in 0..4i64 {
                for m in 0..4i64 {
                    for p in -2..=2 {
                        for q in -3..=3 {
                            let same = assign_polarization(s, n + p, m + q) == assign_polarization(s, n, m);
                            assert_eq!(mask.same_pol(p, q), same, "{s} n={n} m={m} p={p} q={q}");
                        }
                    }
                }
            }
        }
    }

    #[test]
    fn halves_of_every_block() {
        for s in [StructureId::Tpdm, StructureId::Fpdm, StructureId::Tfpdm] {
            for n in 0..6i64 {
                for m in 0..6i64 {
                    let v = [(0, 0), (0, 1), (1, 0), (1, 1)]
                        .iter()
                        .filter(|(a, b)| assign_polarization(s, n + a, m + b) == Polarization::V)
                        .count();
                    assert_eq!(v, 2);
                }
            }
        }
    }

    #[test]
    fn tfpdm_nearest_neighbours_cross_polarized() {
        for n in 0..5i64 {
            for m in 0..5i64 {
                let me = assign_polarization(StructureId::Tfpdm, n, m);
                for (p, q) in [(1, 0), (-1, 0), (0, 1), (0, -1)] {
                    assert_ne!(assign_polarization(StructureId::Tfpdm, n + p, m + q), me);
                }
            }
        }
    }

    #[test]
    fn parse_structure() {
        assert_eq!("1".parse::<StructureId>().unwrap(), StructureId::Tpdm);
        assert_eq!("TFPDM".parse::<StructureId>().unwrap(), StructureId::Tfpdm);
        assert!("7".parse::<StructureId>().is_err());
    }
}
