//! Prototype filters and their time-frequency localization.
//!
//! All filters are sampled at `M` samples per symbol period `T0`, have
//! `K·M` taps, are symmetric about `D = (K·M − 1)/2` and carry unit energy.
//!
//! The lattice translates are
//!
//! ```text
//! v[n,m](k) = h(k − m·M/2) · exp(j2π·n·(k − D)/M) · exp(jπ/2·(n + m))
//! ```
//!
//! and [`ProtoFilter::ambiguity`] returns `<v[0,0], v[p,q]>` as a discrete
//! sum over the filter support. For real-orthogonal filters the off-diagonal
//! values are purely imaginary.

use std::f64::consts::{PI, SQRT_2};
use std::fmt;
use std::str::FromStr;

use num_complex::Complex64;

use crate::error::{Error, Result};
use crate::lattice::{same_pol_mask, StructureId};

/// Frequency-sampling coefficients of the K = 4 PHYDYAS design.
const PHYDYAS_K4: [f64; 4] = [1.0, 0.971960, std::f64::consts::FRAC_1_SQRT_2, 0.235147];

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum FilterKind {
    Iota,
    Phydyas,
    Srrc,
}

impl fmt::Display for FilterKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            FilterKind::Iota => "iota",
            FilterKind::Phydyas => "phydyas",
            FilterKind::Srrc => "srrc",
        })
    }
}

impl FromStr for FilterKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim().to_ascii_lowercase().as_str() {
            "iota" => Ok(FilterKind::Iota),
            "phydyas" => Ok(FilterKind::Phydyas),
            "srrc" | "rrc" => Ok(FilterKind::Srrc),
            other => Err(Error::param(format!("unknown filter '{other}'"))),
        }
    }
}

/// Filter family plus its parameters, independent of `M`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FilterSpec {
    pub kind: FilterKind,
    pub overlap: usize,
    pub alpha: Option<f64>,
}

impl FilterSpec {
    pub fn build(&self, subcarriers: usize) -> Result<ProtoFilter> {
        match self.kind {
            FilterKind::Phydyas => ProtoFilter::phydyas(self.overlap, subcarriers),
            FilterKind::Iota => ProtoFilter::iota(self.overlap, subcarriers),
            FilterKind::Srrc => {
                let alpha = self.alpha.unwrap_or(2.0 / self.overlap as f64);
                ProtoFilter::srrc(self.overlap, subcarriers, alpha)
            }
        }
    }
}

/// Sampled prototype impulse response.
#[derive(Debug, Clone, PartialEq)]
pub struct ProtoFilter {
    kind: FilterKind,
    overlap: usize,
    subcarriers: usize,
    alpha: Option<f64>,
    taps: Vec<f64>,
}

fn check_subcarriers(m: usize) -> Result<()> {
    if m < 4 || !m.is_power_of_two() {
        return Err(Error::param(format!("M must be a power of two >= 4, got {m}")));
    }
    Ok(())
}

fn normalize(mut taps: Vec<f64>) -> Vec<f64> {
    let energy: f64 = taps.iter().map(|x| x * x).sum();
    let scale = energy.sqrt().recip();
    taps.iter_mut().for_each(|x| *x *= scale);
    taps
}

/// Centred sample times `(k − D)/M` in units of `T0`.
fn centred_times(len: usize, m: usize) -> impl Iterator<Item = f64> {
    let d = (len as f64 - 1.0) / 2.0;
    (0..len).map(move |k| (k as f64 - d) / m as f64)
}

fn srrc_at(t: f64, alpha: f64) -> f64 {
    if t.abs() < 1e-12 {
        return 1.0 - alpha + 4.0 * alpha / PI;
    }
    let edge = 1.0 / (4.0 * alpha);
    if (t.abs() - edge).abs() < 1e-10 {
        let a = PI / (4.0 * alpha);
        return alpha / SQRT_2 * ((1.0 + 2.0 / PI) * a.sin() + (1.0 - 2.0 / PI) * a.cos());
    }
    let num = (PI * t * (1.0 - alpha)).sin() + 4.0 * alpha * t * (PI * t * (1.0 + alpha)).cos();
    let den = PI * t * (1.0 - (4.0 * alpha * t).powi(2));
    num / den
}

/// Continuous IOTA pulse evaluator with time and frequency spacing
/// `τ0 = ν0 = 1/√2` (so that `T0 = 2τ0 = √2`).
struct IotaPulse {
    /// Fourier coefficients of the periodic frequency normalizer.
    coeffs: Vec<f64>,
}

impl IotaPulse {
    const SPACING: f64 = std::f64::consts::FRAC_1_SQRT_2;
    const ORDER: i64 = 12;

    fn gaussian(t: f64) -> f64 {
        2f64.powf(0.25) * (-PI * t * t).exp()
    }

    fn new() -> Self {
        let nu0 = Self::SPACING;
        // w(f) = 1/sqrt(ν0 Σ_l G(f − lν0)²) is even and ν0-periodic; the
        // rectangle rule over one period is spectrally accurate for it.
        let samples = 512;
        let w: Vec<f64> = (0..samples)
            .map(|i| {
                let f = i as f64 * nu0 / samples as f64;
                let s: f64 = (-20..=20)
                    .map(|l| Self::gaussian(f - l as f64 * nu0).powi(2))
                    .sum();
                1.0 / (nu0 * s).sqrt()
            })
            .collect();
        let coeffs = (0..=Self::ORDER)
            .map(|k| {
                w.iter()
                    .enumerate()
                    .map(|(i, wi)| wi * (2.0 * PI * (k * i as i64) as f64 / samples as f64).cos())
                    .sum::<f64>()
                    / samples as f64
            })
            .collect();
        IotaPulse { coeffs }
    }

    /// Frequency-orthogonalized Gaussian: `Σ_k d_k g(t + k/ν0)`.
    fn freq_orth(&self, t: f64) -> f64 {
        let period = 1.0 / Self::SPACING;
        let mut acc = self.coeffs[0] * Self::gaussian(t);
        for (k, d) in self.coeffs.iter().enumerate().skip(1) {
            let shift = k as f64 * period;
            acc += d * (Self::gaussian(t + shift) + Self::gaussian(t - shift));
        }
        acc
    }

    fn eval(&self, t: f64) -> f64 {
        let tau0 = Self::SPACING;
        let x = self.freq_orth(t);
        let s: f64 = (-32..=32)
            .map(|l| self.freq_orth(t - l as f64 * tau0).powi(2))
            .sum();
        x / (tau0 * s).sqrt()
    }
}

impl ProtoFilter {
    /// PHYDYAS frequency-sampling filter. Only `K = 4` is supported.
    pub fn phydyas(overlap: usize, subcarriers: usize) -> Result<Self> {
        if overlap != 4 {
            return Err(Error::param(format!("PHYDYAS supports K = 4 only, got {overlap}")));
        }
        check_subcarriers(subcarriers)?;
        let len = overlap * subcarriers;
        let d = (len as f64 - 1.0) / 2.0;
        let taps = (0..len)
            .map(|k| {
                let t = k as f64 - d;
                PHYDYAS_K4[0]
                    + 2.0
                        * PHYDYAS_K4
                            .iter()
                            .enumerate()
                            .skip(1)
                            .map(|(i, p)| p * (2.0 * PI * i as f64 * t / len as f64).cos())
                            .sum::<f64>()
            })
            .collect();
        Ok(ProtoFilter {
            kind: FilterKind::Phydyas,
            overlap,
            subcarriers,
            alpha: None,
            taps: normalize(taps),
        })
    }

    /// Square-root raised cosine with symbol period `T0`, truncated to `K·M`
    /// samples around the peak.
    pub fn srrc(overlap: usize, subcarriers: usize, alpha: f64) -> Result<Self> {
        if !(alpha > 0.0 && alpha <= 1.0) {
            return Err(Error::param(format!("SRRC roll-off must be in (0, 1], got {alpha}")));
        }
        if overlap < 2 {
            return Err(Error::param(format!("overlapping factor must be >= 2, got {overlap}")));
        }
        check_subcarriers(subcarriers)?;
        let len = overlap * subcarriers;
        let taps = centred_times(len, subcarriers).map(|t| srrc_at(t, alpha)).collect();
        Ok(ProtoFilter {
            kind: FilterKind::Srrc,
            overlap,
            subcarriers,
            alpha: Some(alpha),
            taps: normalize(taps),
        })
    }

    /// IOTA pulse (orthogonalized Gaussian, parameter 1) truncated to `K·M`
    /// samples. Only `K = 4` is supported.
    pub fn iota(overlap: usize, subcarriers: usize) -> Result<Self> {
        if overlap != 4 {
            return Err(Error::param(format!("IOTA supports K = 4 only, got {overlap}")));
        }
        check_subcarriers(subcarriers)?;
        let pulse = IotaPulse::new();
        let len = overlap * subcarriers;
        // One T0 spans √2 in the pulse's native units.
        let half = len / 2;
        let first: Vec<f64> = centred_times(len, subcarriers)
            .take(half)
            .map(|t| pulse.eval(t * SQRT_2))
            .collect();
        // Mirror so the symmetry holds bit-exactly.
        let taps = first.iter().chain(first.iter().rev()).copied().collect();
        Ok(ProtoFilter {
            kind: FilterKind::Iota,
            overlap,
            subcarriers,
            alpha: None,
            taps: normalize(taps),
        })
    }

    pub fn kind(&self) -> FilterKind {
        self.kind
    }

    /// Overlapping factor `K`.
    pub fn overlap(&self) -> usize {
        self.overlap
    }

    /// Samples per symbol period, `M`.
    pub fn subcarriers(&self) -> usize {
        self.subcarriers
    }

    pub fn alpha(&self) -> Option<f64> {
        self.alpha
    }

    pub fn taps(&self) -> &[f64] {
        &self.taps
    }

    pub fn len(&self) -> usize {
        self.taps.len()
    }

    pub fn is_empty(&self) -> bool {
        self.taps.is_empty()
    }

    /// Centre of symmetry `D = (K·M − 1)/2`.
    pub fn centre(&self) -> f64 {
        (self.taps.len() as f64 - 1.0) / 2.0
    }

    /// `<v[0,0], v[p,q]>`; `p` counts subcarriers, `q` half-symbols.
    pub fn ambiguity(&self, p: i64, q: i64) -> Complex64 {
        let m = self.subcarriers as i64;
        let len = self.taps.len() as i64;
        let shift = q * m / 2;
        let d = self.centre();
        let w = -2.0 * PI * p as f64 / m as f64;
        let lo = shift.max(0);
        let hi = (len + shift).min(len);
        let mut acc = Complex64::new(0.0, 0.0);
        for k in lo..hi {
            let prod = self.taps[k as usize] * self.taps[(k - shift) as usize];
            acc += Complex64::from_polar(prod, w * (k as f64 - d));
        }
        acc * crate::lattice::phase(-p, -q)
    }

    /// Ambiguity values over `p ∈ [-dp, dp]`, `q ∈ [-dq, dq]`.
    pub fn interference_table(&self, dp: usize, dq: usize) -> AmbiguityTable {
        let mut values = Vec::with_capacity((2 * dp + 1) * (2 * dq + 1));
        for p in -(dp as i64)..=dp as i64 {
            for q in -(dq as i64)..=dq as i64 {
                values.push(self.ambiguity(p, q));
            }
        }
        AmbiguityTable { dp, dq, values }
    }

    /// Interference power from same-polarization neighbours in the window.
    pub fn residual_interference_power(&self, structure: StructureId, dp: usize, dq: usize) -> f64 {
        self.interference_table(dp, dq).residual_power(structure)
    }

    /// Taps as CSV with header `index,value`.
    pub fn to_csv(&self) -> String {
        let mut out = String::from("index,value\n");
        for (i, t) in self.taps.iter().enumerate() {
            out.push_str(&format!("{i},{t}\n"));
        }
        out
    }
}

/// Ambiguity values on a rectangular window of lattice offsets.
#[derive(Debug, Clone, PartialEq)]
pub struct AmbiguityTable {
    pub dp: usize,
    pub dq: usize,
    values: Vec<Complex64>,
}

impl AmbiguityTable {
    fn index(&self, p: i64, q: i64) -> Option<usize> {
        let (dp, dq) = (self.dp as i64, self.dq as i64);
        if p.abs() > dp || q.abs() > dq {
            return None;
        }
        Some(((p + dp) * (2 * dq + 1) + (q + dq)) as usize)
    }

    /// Value at (p, q), zero outside the window.
    pub fn get(&self, p: i64, q: i64) -> Complex64 {
        self.index(p, q).map(|i| self.values[i]).unwrap_or_default()
    }

    /// Offsets and values in row-major (p, then q) order.
    pub fn iter(&self) -> impl Iterator<Item = (i64, i64, Complex64)> + '_ {
        let (dp, dq) = (self.dp as i64, self.dq as i64);
        (-dp..=dp)
            .flat_map(move |p| (-dq..=dq).map(move |q| (p, q)))
            .zip(self.values.iter())
            .map(|((p, q), v)| (p, q, *v))
    }

    /// Contribution of the symbol at `(n+p, m+q)` to the matched-filter
    /// output at `(n, m)`, i.e. `<v[n+p,m+q], v[n,m]>`.
    ///
    /// Equal to `(−1)^(p·(m+q)) · A(−p, −q)`; the sign comes from the
    /// absolute-time carrier phase of the interfering cell.
    pub fn coupling(&self, m: i64, p: i64, q: i64) -> Complex64 {
        let v = self.get(-p, -q);
        if (p * (m + q)).rem_euclid(2) == 1 {
            -v
        } else {
            v
        }
    }

    /// Σ|v(p,q)|² over same-polarization offsets other than (0, 0).
    pub fn residual_power(&self, structure: StructureId) -> f64 {
        let mask = same_pol_mask(structure, self.dp, self.dq);
        self.iter()
            .filter(|&(p, q, _)| (p, q) != (0, 0) && mask.same_pol(p, q))
            .map(|(_, _, v)| v.norm_sqr())
            .sum()
    }

    /// CSV with header `p,q,re,im`.
    pub fn to_csv(&self) -> String {
        let mut out = String::from("p,q,re,im\n");
        for (p, q, v) in self.iter() {
            out.push_str(&format!("{p},{q},{},{}\n", v.re, v.im));
        }
        out
    }
}
