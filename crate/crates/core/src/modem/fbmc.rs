//! Polyphase (PPN) synthesis and analysis filter banks.
//!
//! Half-symbol `m` contributes
//!
//! ```text
//! x_m(l) = h(l) · IFFT_M{ a[n,m] · θ(n,m) · exp(−j2πnD/M) · (−1)^(n·m) }(l mod M)
//! ```
//!
//! at output offset `m·M/2`, which is the translate sum of the OQAM
//! synthesis equation written with the carrier referenced to absolute
//! sample time. The receiver folds each `K·M` window into `M` polyphase
//! branches, takes an FFT and undoes the same phase factors.

use std::sync::Arc;

use num_complex::Complex64;
use rustfft::{Fft, FftPlanner};

use crate::error::{Error, Result};
use crate::filters::ProtoFilter;
use crate::lattice::{assign_polarization, phase, Polarization, StructureId};
use crate::modem::grid::{BasebandSignal, ComplexGrid, SymbolGrid};

#[derive(Clone)]
pub struct FbmcModem {
    filter: ProtoFilter,
    carrier_ref: Vec<Complex64>,
    forward: Arc<dyn Fft<f64>>,
    inverse: Arc<dyn Fft<f64>>,
}

impl std::fmt::Debug for FbmcModem {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("FbmcModem").field("filter", &self.filter.kind()).finish()
    }
}

fn alternating(n: usize, m: usize) -> f64 {
    if (n * m) % 2 == 1 {
        -1.0
    } else {
        1.0
    }
}

impl FbmcModem {
    pub fn new(filter: ProtoFilter) -> Self {
        let m = filter.subcarriers();
        let d = filter.centre();
        let carrier_ref = (0..m)
            .map(|n| Complex64::from_polar(1.0, -2.0 * std::f64::consts::PI * n as f64 * d / m as f64))
            .collect();
        let mut planner = FftPlanner::new();
        FbmcModem {
            forward: planner.plan_fft_forward(m),
            inverse: planner.plan_fft_inverse(m),
            filter,
            carrier_ref,
        }
    }

    pub fn filter(&self) -> &ProtoFilter {
        &self.filter
    }

    pub fn subcarriers(&self) -> usize {
        self.filter.subcarriers()
    }

    /// Samples produced for `half_symbols` half-symbols, filter tails included.
    pub fn frame_len(&self, half_symbols: usize) -> usize {
        if half_symbols == 0 {
            return 0;
        }
        (half_symbols - 1) * self.subcarriers() / 2 + self.filter.len()
    }

    /// Sample index of the pulse centre of half-symbol `m`.
    pub fn cell_centre(&self, m: usize) -> f64 {
        (m * self.subcarriers() / 2) as f64 + self.filter.centre()
    }

    pub fn modulate(&self, grid: &SymbolGrid) -> Result<Vec<Complex64>> {
        let mm = self.subcarriers();
        if grid.subcarriers != mm {
            return Err(Error::dim(format!(
                "grid has {} subcarriers, filter expects {mm}",
                grid.subcarriers
            )));
        }
        let taps = self.filter.taps();
        let mut out = vec![Complex64::default(); self.frame_len(grid.half_symbols)];
        let mut buf = vec![Complex64::default(); mm];
        for m in 0..grid.half_symbols {
            let mut any = false;
            for n in 0..mm {
                let a = grid.get(n, m);
                any |= a != 0.0;
                buf[n] = phase(n as i64, m as i64) * self.carrier_ref[n] * (a * alternating(n, m));
            }
            if !any {
                continue;
            }
            self.inverse.process(&mut buf);
            let seg = &mut out[m * mm / 2..m * mm / 2 + taps.len()];
            for (l, (o, h)) in seg.iter_mut().zip(taps).enumerate() {
                *o += buf[l % mm] * *h;
            }
        }
        Ok(out)
    }

    /// Matched-filter outputs `<r, v[n,m]>` for `m < half_symbols`, before
    /// taking the real part.
    pub fn demodulate(&self, signal: &[Complex64], half_symbols: usize) -> Result<ComplexGrid> {
        let mm = self.subcarriers();
        let need = self.frame_len(half_symbols);
        if signal.len() < need {
            return Err(Error::dim(format!(
                "signal has {} samples, {half_symbols} half-symbols need {need}",
                signal.len()
            )));
        }
        let taps = self.filter.taps();
        let mut grid = ComplexGrid::zeros(mm, half_symbols);
        let mut buf = vec![Complex64::default(); mm];
        for m in 0..half_symbols {
            buf.iter_mut().for_each(|b| *b = Complex64::default());
            let win = &signal[m * mm / 2..m * mm / 2 + taps.len()];
            for (l, (r, h)) in win.iter().zip(taps).enumerate() {
                buf[l % mm] += r * *h;
            }
            self.forward.process(&mut buf);
            for n in 0..mm {
                let y = buf[n] * self.carrier_ref[n].conj() * phase(n as i64, m as i64).conj();
                grid.set(n, m, y * alternating(n, m));
            }
        }
        Ok(grid)
    }
}

/// Dual-polarization FBMC: cells are routed to V or H by the structure's
/// parity rule and each stream runs through its own filter bank.
#[derive(Debug, Clone)]
pub struct DualPolModem {
    modem: FbmcModem,
    structure: StructureId,
}

impl DualPolModem {
    pub fn new(filter: ProtoFilter, structure: StructureId) -> Result<Self> {
        if !structure.is_dual() {
            return Err(Error::param("dual-polarization modem needs structure I, II or III"));
        }
        Ok(DualPolModem {
            modem: FbmcModem::new(filter),
            structure,
        })
    }

    pub fn structure(&self) -> StructureId {
        self.structure
    }

    pub fn inner(&self) -> &FbmcModem {
        &self.modem
    }

    pub fn modulate(&self, grid: &SymbolGrid, sample_rate: f64) -> Result<BasebandSignal> {
        if grid.structure != self.structure {
            return Err(Error::param(format!(
                "grid lattice is {}, modem is {}",
                grid.structure, self.structure
            )));
        }
        let v = self.modem.modulate(&grid.restricted_to(Polarization::V))?;
        let h = self.modem.modulate(&grid.restricted_to(Polarization::H))?;
        BasebandSignal::dual(v, h, sample_rate)
    }

    /// Full-lattice analysis of each received polarization, `[V, H]`.
    pub fn demodulate_both(&self, signal: &BasebandSignal, half_symbols: usize) -> Result<[ComplexGrid; 2]> {
        if !signal.is_dual() {
            return Err(Error::param("dual-polarization demodulation needs two streams"));
        }
        Ok([
            self.modem.demodulate(&signal.v, half_symbols)?,
            self.modem.demodulate(&signal.h, half_symbols)?,
        ])
    }

    /// Reassemble one grid taking each cell from its own polarization.
    pub fn select(&self, outputs: &[ComplexGrid; 2]) -> ComplexGrid {
        let mut out = outputs[0].clone();
        for m in 0..out.columns {
            for n in 0..out.subcarriers {
                let pol = assign_polarization(self.structure, n as i64, m as i64);
                out.set(n, m, outputs[pol.index()].get(n, m));
            }
        }
        out
    }

    pub fn demodulate(&self, signal: &BasebandSignal, half_symbols: usize) -> Result<ComplexGrid> {
        Ok(self.select(&self.demodulate_both(signal, half_symbols)?))
    }
}
