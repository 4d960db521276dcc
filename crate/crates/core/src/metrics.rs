//! BER counting, PAPR statistics and Welch power spectral density.

use num_complex::Complex64;
use rustfft::FftPlanner;

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct BerRecord {
    pub bits_sent: u64,
    pub bit_errors: u64,
}

impl BerRecord {
    pub fn ber(&self) -> f64 {
        if self.bits_sent == 0 {
            0.0
        } else {
            self.bit_errors as f64 / self.bits_sent as f64
        }
    }

    pub fn merge(&mut self, other: BerRecord) {
        self.bits_sent += other.bits_sent;
        self.bit_errors += other.bit_errors;
    }
}

pub fn ber_count(tx: &[u8], rx: &[u8]) -> Result<BerRecord> {
    if tx.len() != rx.len() {
        return Err(Error::dim(format!("{} transmitted vs {} received bits", tx.len(), rx.len())));
    }
    Ok(BerRecord {
        bits_sent: tx.len() as u64,
        bit_errors: tx.iter().zip(rx).filter(|(a, b)| (*a & 1) != (*b & 1)).count() as u64,
    })
}

/// Peak-to-average power ratio in dB.
pub fn papr(frame: &[Complex64]) -> Result<f64> {
    let mut peak: f64 = 0.0;
    let mut total = 0.0;
    for x in frame {
        let p = x.norm_sqr();
        peak = peak.max(p);
        total += p;
    }
    if total == 0.0 {
        return Err(Error::param("PAPR of a zero-power frame"));
    }
    Ok(10.0 * (peak * frame.len() as f64 / total).log10())
}

#[derive(Debug, Clone, PartialEq)]
pub struct PaprCcdf {
    pub thresholds_db: Vec<f64>,
    pub ccdf: Vec<f64>,
}

impl PaprCcdf {
    /// Empirical `P(PAPR > threshold)`.
    pub fn from_values(values: &[f64], thresholds_db: &[f64]) -> Self {
        let mut sorted = values.to_vec();
        sorted.sort_by(f64::total_cmp);
        let n = sorted.len();
        let ccdf = thresholds_db
            .iter()
            .map(|&t| {
                if n == 0 {
                    0.0
                } else {
                    (n - sorted.partition_point(|&v| v <= t)) as f64 / n as f64
                }
            })
            .collect();
        PaprCcdf {
            thresholds_db: thresholds_db.to_vec(),
            ccdf,
        }
    }

    /// Smallest threshold whose CCDF is at or below `level`, linearly
    /// interpolated between grid points.
    pub fn threshold_at(&self, level: f64) -> Option<f64> {
        let i = self.ccdf.iter().position(|&c| c <= level)?;
        if i == 0 {
            return Some(self.thresholds_db[0]);
        }
        let (c0, c1) = (self.ccdf[i - 1], self.ccdf[i]);
        let (t0, t1) = (self.thresholds_db[i - 1], self.thresholds_db[i]);
        Some(t0 + (t1 - t0) * (c0 - level) / (c0 - c1))
    }
}

/// Evenly spaced thresholds `start, start+step, ..` up to `stop` inclusive.
pub fn threshold_grid(start: f64, stop: f64, step: f64) -> Vec<f64> {
    let count = ((stop - start) / step + 1e-9).floor() as usize + 1;
    (0..count).map(|i| start + i as f64 * step).collect()
}

#[derive(Debug, Clone, PartialEq)]
pub struct Psd {
    /// Cycles per sample in `[−0.5, 0.5)`, ascending.
    pub freq: Vec<f64>,
    /// Peak-normalized dB.
    pub db: Vec<f64>,
}

/// Running Welch accumulator: Hann-windowed segments of `nfft` samples
/// advancing by `nfft·(1 − overlap)`. Records are segmented independently,
/// so no segment straddles two frames.
#[derive(Debug, Clone, PartialEq)]
pub struct WelchAccumulator {
    nfft: usize,
    hop: usize,
    window: Vec<f64>,
    acc: Vec<f64>,
    segments: usize,
}

impl WelchAccumulator {
    pub fn new(nfft: usize, overlap: f64) -> Result<Self> {
        if nfft < 2 {
            return Err(Error::param("nfft must be at least 2"));
        }
        if !(0.0..1.0).contains(&overlap) {
            return Err(Error::param(format!("overlap must be in [0, 1), got {overlap}")));
        }
        Ok(WelchAccumulator {
            nfft,
            hop: ((nfft as f64 * (1.0 - overlap)).round() as usize).max(1),
            window: (0..nfft)
                .map(|i| 0.5 - 0.5 * (std::f64::consts::TAU * i as f64 / nfft as f64).cos())
                .collect(),
            acc: vec![0.0; nfft],
            segments: 0,
        })
    }

    pub fn add(&mut self, record: &[Complex64]) {
        let fft = FftPlanner::new().plan_fft_forward(self.nfft);
        let mut buf = vec![Complex64::default(); self.nfft];
        let mut start = 0;
        while start + self.nfft <= record.len() {
            for ((b, x), w) in buf.iter_mut().zip(&record[start..start + self.nfft]).zip(&self.window) {
                *b = x * w;
            }
            fft.process(&mut buf);
            self.acc.iter_mut().zip(&buf).for_each(|(a, b)| *a += b.norm_sqr());
            self.segments += 1;
            start += self.hop;
        }
    }

    pub fn merge(&mut self, other: &WelchAccumulator) {
        self.acc.iter_mut().zip(&other.acc).for_each(|(a, b)| *a += b);
        self.segments += other.segments;
    }

    pub fn segments(&self) -> usize {
        self.segments
    }

    /// Peak-normalized, frequency-ordered estimate.
    pub fn finish(&self) -> Result<Psd> {
        if self.segments == 0 {
            return Err(Error::param(format!("signal shorter than nfft = {}", self.nfft)));
        }
        let peak = self.acc.iter().cloned().fold(0.0, f64::max);
        if peak == 0.0 {
            return Err(Error::param("PSD of a zero signal"));
        }
        let (n, half) = (self.nfft, self.nfft / 2);
        let (mut freq, mut db) = (Vec::with_capacity(n), Vec::with_capacity(n));
        for k in (half..n).chain(0..half) {
            let f = if k >= half { k as f64 - n as f64 } else { k as f64 };
            freq.push(f / n as f64);
            db.push(10.0 * (self.acc[k] / peak).max(1e-300).log10());
        }
        Ok(Psd { freq, db })
    }
}

/// Welch estimate averaged over all segments of all records, peak
/// normalized to 0 dB.
pub fn psd_welch(records: &[&[Complex64]], nfft: usize, overlap: f64) -> Result<Psd> {
    let mut acc = WelchAccumulator::new(nfft, overlap)?;
    for r in records {
        acc.add(r);
    }
    acc.finish()
}
