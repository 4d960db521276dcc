use std::f64::consts::FRAC_1_SQRT_2;
use std::fmt;
use std::str::FromStr;

use num_complex::Complex64;

use crate::error::{Error, Result};

const QAM16_SCALE: f64 = 0.316_227_766_016_837_94; // 1/sqrt(10)

/// Gray-mapped, unit-average-energy constellations.
///
/// Each axis is mapped independently. QPSK uses one bit per axis
/// (`0 → +`, `1 → −`); 16-QAM uses two bits per axis, sign bit first, with
/// levels `00 → +1`, `01 → +3`, `10 → −1`, `11 → −3` before scaling.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Modulation {
    Qpsk,
    Qam16,
}

impl fmt::Display for Modulation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Modulation::Qpsk => "qpsk",
            Modulation::Qam16 => "qam16",
        })
    }
}

impl FromStr for Modulation {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim().to_ascii_lowercase().as_str() {
            "qpsk" | "4qam" => Ok(Modulation::Qpsk),
            "qam16" | "16qam" | "16-qam" => Ok(Modulation::Qam16),
            other => Err(Error::param(format!("unknown modulation '{other}'"))),
        }
    }
}

impl Modulation {
    pub fn bits_per_symbol(self) -> usize {
        match self {
            Modulation::Qpsk => 2,
            Modulation::Qam16 => 4,
        }
    }

    fn bits_per_axis(self) -> usize {
        self.bits_per_symbol() / 2
    }

    fn axis_level(self, bits: &[u8]) -> f64 {
        match self {
            Modulation::Qpsk => {
                if bits[0] == 0 {
                    FRAC_1_SQRT_2
                } else {
                    -FRAC_1_SQRT_2
                }
            }
            Modulation::Qam16 => {
                let sign = if bits[0] == 0 { 1.0 } else { -1.0 };
                let mag = if bits[1] == 0 { 1.0 } else { 3.0 };
                sign * mag * QAM16_SCALE
            }
        }
    }

    /// Hard decision on one real axis, appending the decided bits.
    pub fn decide_axis(self, x: f64, out: &mut Vec<u8>) {
        match self {
            Modulation::Qpsk => out.push((x < 0.0) as u8),
            Modulation::Qam16 => {
                out.push((x < 0.0) as u8);
                out.push((x.abs() > 2.0 * QAM16_SCALE) as u8);
            }
        }
    }

    pub fn map(self, bits: &[u8]) -> Result<Vec<Complex64>> {
        let bps = self.bits_per_symbol();
        if bits.len() % bps != 0 {
            return Err(Error::param(format!(
                "{} bits is not a multiple of {bps} bits per symbol",
                bits.len()
            )));
        }
        let half = self.bits_per_axis();
        Ok(bits
            .chunks_exact(bps)
            .map(|c| Complex64::new(self.axis_level(&c[..half]), self.axis_level(&c[half..])))
            .collect())
    }

    pub fn demap(self, symbols: &[Complex64]) -> Vec<u8> {
        let mut out = Vec::with_capacity(symbols.len() * self.bits_per_symbol());
        for s in symbols {
            self.decide_axis(s.re, &mut out);
            self.decide_axis(s.im, &mut out);
        }
        out
    }

    /// All constellation points, indexed by their bit pattern.
    pub fn constellation(self) -> Vec<Complex64> {
        let bps = self.bits_per_symbol();
        (0..1usize << bps)
            .map(|v| {
                let bits: Vec<u8> = (0..bps).map(|i| ((v >> (bps - 1 - i)) & 1) as u8).collect();
                self.map(&bits).unwrap()[0]
            })
            .collect()
    }
}
