use num_complex::Complex64;

use crate::error::{Error, Result};
use crate::lattice::{assign_polarization, Polarization, StructureId};

/// Which FFT bins carry data.
///
/// Bins are in FFT order: bin `n` sits at frequency `n` (for `n < size/2`)
/// or `n − size` subcarrier spacings. Guards are counted on the negative
/// ("left") and positive ("right") edges of the nominal band, and DC is
/// optionally nulled.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct CarrierLayout {
    fft_size: usize,
    active: Vec<usize>,
    is_active: Vec<bool>,
}

impl CarrierLayout {
    /// Layout for a nominal band of `nominal` subcarriers synthesized with an
    /// FFT of `nominal · oversample` bins.
    pub fn new(
        nominal: usize,
        oversample: usize,
        left_guard: usize,
        right_guard: usize,
        null_dc: bool,
    ) -> Result<Self> {
        if nominal < 4 || !nominal.is_power_of_two() {
            return Err(Error::param(format!("M must be a power of two >= 4, got {nominal}")));
        }
        if oversample == 0 || !oversample.is_power_of_two() {
            return Err(Error::param(format!("oversampling must be a power of two, got {oversample}")));
        }
        let half = (nominal / 2) as i64;
        if left_guard as i64 > half || right_guard as i64 >= half {
            return Err(Error::param("guard bands exceed half the band"));
        }
        let lowest = -half + left_guard as i64;
        let highest = half - 1 - right_guard as i64;
        let fft_size = nominal * oversample;
        let mut active = Vec::new();
        for f in lowest..=highest {
            if null_dc && f == 0 {
                continue;
            }
            active.push(f.rem_euclid(fft_size as i64) as usize);
        }
        if active.is_empty() {
            return Err(Error::param("layout has no active subcarriers"));
        }
        let mut is_active = vec![false; fft_size];
        active.iter().for_each(|&n| is_active[n] = true);
        Ok(CarrierLayout {
            fft_size,
            active,
            is_active,
        })
    }

    /// All bins active.
    pub fn full(size: usize) -> Result<Self> {
        Self::new(size, 1, 0, 0, false)
    }

    pub fn fft_size(&self) -> usize {
        self.fft_size
    }

    /// Active bins sorted by frequency (negative to positive).
    pub fn active(&self) -> &[usize] {
        &self.active
    }

    pub fn is_active(&self, n: usize) -> bool {
        self.is_active.get(n).copied().unwrap_or(false)
    }

    /// Signed frequency of bin `n` in subcarrier spacings.
    pub fn frequency(&self, n: usize) -> i64 {
        let n = n as i64;
        let size = self.fft_size as i64;
        if n < size / 2 {
            n
        } else {
            n - size
        }
    }
}

/// Row-major (time, subcarrier) complex grid: `values[col·M + n]`.
#[derive(Debug, Clone, PartialEq)]
pub struct ComplexGrid {
    pub subcarriers: usize,
    pub columns: usize,
    pub values: Vec<Complex64>,
}

impl ComplexGrid {
    pub fn zeros(subcarriers: usize, columns: usize) -> Self {
        ComplexGrid {
            subcarriers,
            columns,
            values: vec![Complex64::default(); subcarriers * columns],
        }
    }

    pub fn get(&self, n: usize, col: usize) -> Complex64 {
        self.values[col * self.subcarriers + n]
    }

    pub fn set(&mut self, n: usize, col: usize, v: Complex64) {
        self.values[col * self.subcarriers + n] = v;
    }

    pub fn column(&self, col: usize) -> &[Complex64] {
        &self.values[col * self.subcarriers..(col + 1) * self.subcarriers]
    }
}

/// Real OQAM lattice `a[n,m]` for `n < M`, `m < 2S`, with a polarization
/// tag per cell.
#[derive(Debug, Clone, PartialEq)]
pub struct SymbolGrid {
    pub subcarriers: usize,
    pub half_symbols: usize,
    pub structure: StructureId,
    pub values: Vec<f64>,
}

impl SymbolGrid {
    pub fn zeros(subcarriers: usize, half_symbols: usize, structure: StructureId) -> Self {
        SymbolGrid {
            subcarriers,
            half_symbols,
            structure,
            values: vec![0.0; subcarriers * half_symbols],
        }
    }

    pub fn get(&self, n: usize, m: usize) -> f64 {
        self.values[m * self.subcarriers + n]
    }

    pub fn set(&mut self, n: usize, m: usize, v: f64) {
        self.values[m * self.subcarriers + n] = v;
    }

    /// `a[n+p, m+q]` as seen from `(n, m)`, with zeros outside the grid.
    ///
    /// Subcarrier offsets wrap modulo `M`. The carrier phase is referenced
    /// to a half-integer filter centre, so bin `n + M` is bin `n` negated
    /// and each wrap flips the sign.
    pub fn get_offset(&self, n: usize, m: usize, p: i64, q: i64) -> f64 {
        let mm = m as i64 + q;
        if mm < 0 || mm >= self.half_symbols as i64 {
            return 0.0;
        }
        let size = self.subcarriers as i64;
        let target = n as i64 + p;
        let a = self.get(target.rem_euclid(size) as usize, mm as usize);
        if target.div_euclid(size) % 2 == 0 {
            a
        } else {
            -a
        }
    }

    pub fn pol(&self, n: usize, m: usize) -> Polarization {
        assign_polarization(self.structure, n as i64, m as i64)
    }

    /// Copy with every cell not on `pol` zeroed.
    pub fn restricted_to(&self, pol: Polarization) -> SymbolGrid {
        let mut out = self.clone();
        for m in 0..self.half_symbols {
            for n in 0..self.subcarriers {
                if self.pol(n, m) != pol {
                    out.set(n, m, 0.0);
                }
            }
        }
        out
    }

    /// Number of non-zero cells on each polarization, `[V, H]`.
    pub fn occupied_per_pol(&self) -> [usize; 2] {
        let mut counts = [0; 2];
        for m in 0..self.half_symbols {
            for n in 0..self.subcarriers {
                if self.get(n, m) != 0.0 {
                    counts[self.pol(n, m).index()] += 1;
                }
            }
        }
        counts
    }
}

/// Split each QAM symbol into two real half-symbols: real part at `m = 2k`,
/// imaginary part at `m = 2k + 1`.
pub fn oqam_stagger(qam: &ComplexGrid, structure: StructureId) -> SymbolGrid {
    let mut grid = SymbolGrid::zeros(qam.subcarriers, 2 * qam.columns, structure);
    for k in 0..qam.columns {
        for n in 0..qam.subcarriers {
            let s = qam.get(n, k);
            grid.set(n, 2 * k, s.re);
            grid.set(n, 2 * k + 1, s.im);
        }
    }
    grid
}

/// Inverse of [`oqam_stagger`]. A trailing odd half-symbol is ignored.
pub fn oqam_destagger(grid: &SymbolGrid) -> ComplexGrid {
    let cols = grid.half_symbols / 2;
    let mut out = ComplexGrid::zeros(grid.subcarriers, cols);
    for k in 0..cols {
        for n in 0..grid.subcarriers {
            out.set(n, k, Complex64::new(grid.get(n, 2 * k), grid.get(n, 2 * k + 1)));
        }
    }
    out
}

/// Complex baseband samples per polarization. `h` is empty for
/// single-polarization systems.
#[derive(Debug, Clone, PartialEq)]
pub struct BasebandSignal {
    pub v: Vec<Complex64>,
    pub h: Vec<Complex64>,
    pub sample_rate: f64,
}

impl BasebandSignal {
    pub fn single(v: Vec<Complex64>, sample_rate: f64) -> Self {
        BasebandSignal {
            v,
            h: Vec::new(),
            sample_rate,
        }
    }

    pub fn dual(v: Vec<Complex64>, h: Vec<Complex64>, sample_rate: f64) -> Result<Self> {
        if v.len() != h.len() {
            return Err(Error::dim(format!(
                "polarization streams differ in length ({} vs {})",
                v.len(),
                h.len()
            )));
        }
        Ok(BasebandSignal { v, h, sample_rate })
    }

    pub fn is_dual(&self) -> bool {
        !self.h.is_empty()
    }

    pub fn len(&self) -> usize {
        self.v.len()
    }

    pub fn is_empty(&self) -> bool {
        self.v.is_empty()
    }

    /// Streams present, V first.
    pub fn streams(&self) -> impl Iterator<Item = &Vec<Complex64>> {
        std::iter::once(&self.v).chain(self.is_dual().then_some(&self.h))
    }

    pub fn streams_mut(&mut self) -> impl Iterator<Item = &mut Vec<Complex64>> {
        let dual = self.is_dual();
        let BasebandSignal { v, h, .. } = self;
        std::iter::once(v).chain(dual.then_some(h))
    }

    /// Total energy summed over both polarizations.
    pub fn energy(&self) -> f64 {
        self.streams().flat_map(|s| s.iter()).map(|x| x.norm_sqr()).sum()
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn default_layout_counts() {
        let l = CarrierLayout::new(512, 1, 17, 16, true).unwrap();
        assert_eq!(l.active().len(), 478);
        assert!(!l.is_active(0));
        assert!(l.is_active(1) && l.is_active(239) && !l.is_active(240));
        assert!(!l.is_active(272) && l.is_active(273) && l.is_active(511));
        // 17 guards on the negative edge, 16 on the positive.
        assert_eq!((256..273).filter(|&n| !l.is_active(n)).count(), 17);
        assert_eq!((240..256).filter(|&n| !l.is_active(n)).count(), 16);
        assert_eq!(l.frequency(l.active()[0]), -239);
        assert_eq!(l.frequency(*l.active().last().unwrap()), 239);
    }

    #[test]
    fn oversampled_layout_keeps_band() {
        let l = CarrierLayout::new(512, 4, 17, 16, true).unwrap();
        assert_eq!(l.fft_size(), 2048);
        assert_eq!(l.active().len(), 478);
        assert!(l.is_active(2048 - 239) && !l.is_active(2048 - 240));
    }

    #[test]
    fn stagger_single_symbol() {
        let mut q = ComplexGrid::zeros(4, 1);
        q.set(0, 0, Complex64::new(3.0, 4.0));
        let g = oqam_stagger(&q, StructureId::Conventional);
        assert_eq!(g.get(0, 0), 3.0);
        assert_eq!(g.get(0, 1), 4.0);
        assert_eq!(g.values.iter().filter(|v| **v != 0.0).count(), 2);
        let z = oqam_stagger(&ComplexGrid::zeros(4, 3), StructureId::Conventional);
        assert!(z.values.iter().all(|v| *v == 0.0));
    }

    #[test]
    fn restriction_partitions_cells() {
        let mut g = SymbolGrid::zeros(8, 6, StructureId::Tpdm);
        g.values.iter_mut().enumerate().for_each(|(i, v)| *v = 1.0 + i as f64);
        let v = g.restricted_to(Polarization::V);
        let h = g.restricted_to(Polarization::H);
        assert_eq!(v.occupied_per_pol()[0] + h.occupied_per_pol()[1], 48);
        for m in 0..6 {
            assert_eq!(v.get(3, m) != 0.0, m % 2 == 0);
        }
    }

    #[test]
    fn dual_length_check() {
        assert!(BasebandSignal::dual(vec![Complex64::default(); 3], vec![], 1.0).is_err());
    }

    proptest! {
        #[test]
        fn destagger_inverts_stagger(vals in proptest::collection::vec((-5.0f64..5.0, -5.0f64..5.0), 12)) {
            let mut q = ComplexGrid::zeros(4, 3);
            for (i, (re, im)) in vals.iter().enumerate() {
                q.values[i] = Complex64::new(*re, *im);
            }
            prop_assert_eq!(oqam_destagger(&oqam_stagger(&q, StructureId::Conventional)), q);
        }
    }
}
