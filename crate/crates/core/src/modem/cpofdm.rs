use std::sync::Arc;

use num_complex::Complex64;
use rustfft::{Fft, FftPlanner};

use crate::error::{Error, Result};
use crate::modem::grid::ComplexGrid;

/// Cyclic-prefix OFDM with unitary FFT scaling, so per-subcarrier energy
/// equals time-domain energy over the useful part of each symbol.
#[derive(Clone)]
pub struct CpOfdmModem {
    size: usize,
    cp_len: usize,
    forward: Arc<dyn Fft<f64>>,
    inverse: Arc<dyn Fft<f64>>,
}

impl std::fmt::Debug for CpOfdmModem {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("CpOfdmModem")
            .field("size", &self.size)
            .field("cp_len", &self.cp_len)
            .finish()
    }
}

impl CpOfdmModem {
    pub fn new(size: usize, cp_len: usize) -> Result<Self> {
        if size == 0 {
            return Err(Error::param("FFT size must be positive"));
        }
        if cp_len >= size {
            return Err(Error::param(format!("cyclic prefix {cp_len} must be shorter than M = {size}")));
        }
        let mut planner = FftPlanner::new();
        Ok(CpOfdmModem {
            size,
            cp_len,
            forward: planner.plan_fft_forward(size),
            inverse: planner.plan_fft_inverse(size),
        })
    }

    pub fn subcarriers(&self) -> usize {
        self.size
    }

    pub fn cp_len(&self) -> usize {
        self.cp_len
    }

    pub fn symbol_len(&self) -> usize {
        self.size + self.cp_len
    }

    pub fn frame_len(&self, symbols: usize) -> usize {
        symbols * self.symbol_len()
    }

    /// Sample index at the middle of symbol `k`'s FFT window.
    pub fn symbol_centre(&self, k: usize) -> f64 {
        (k * self.symbol_len() + self.cp_len) as f64 + (self.size as f64 - 1.0) / 2.0
    }

    pub fn modulate(&self, qam: &ComplexGrid) -> Result<Vec<Complex64>> {
        if qam.subcarriers != self.size {
            return Err(Error::dim(format!(
                "grid has {} subcarriers, modem expects {}",
                qam.subcarriers, self.size
            )));
        }
        let scale = (self.size as f64).sqrt().recip();
        let mut out = Vec::with_capacity(self.frame_len(qam.columns));
        let mut buf = vec![Complex64::default(); self.size];
        for k in 0..qam.columns {
            buf.copy_from_slice(qam.column(k));
            self.inverse.process(&mut buf);
            buf.iter_mut().for_each(|x| *x *= scale);
            out.extend_from_slice(&buf[self.size - self.cp_len..]);
            out.extend_from_slice(&buf);
        }
        Ok(out)
    }

    pub fn demodulate(&self, signal: &[Complex64], symbols: usize) -> Result<ComplexGrid> {
        if signal.len() < self.frame_len(symbols) {
            return Err(Error::dim(format!(
                "signal has {} samples, {symbols} symbols need {}",
                signal.len(),
                self.frame_len(symbols)
            )));
        }
        let scale = (self.size as f64).sqrt().recip();
        let mut grid = ComplexGrid::zeros(self.size, symbols);
        for k in 0..symbols {
            let start = k * self.symbol_len() + self.cp_len;
            let col = &mut grid.values[k * self.size..(k + 1) * self.size];
            col.copy_from_slice(&signal[start..start + self.size]);
            self.forward.process(col);
            col.iter_mut().for_each(|x| *x *= scale);
        }
        Ok(grid)
    }
}
