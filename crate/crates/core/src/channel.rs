//! Tapped-delay-line fading, AWGN, frequency/timing offsets and
//! cross-polarization leakage.

use std::fmt;
use std::str::FromStr;

use num_complex::Complex64;
use rand::Rng;
use rand_distr::StandardNormal;

use crate::error::{Error, Result};
use crate::modem::BasebandSignal;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum ProfileName {
    Awgn,
    PedA,
    VehA,
}

impl fmt::Display for ProfileName {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            ProfileName::Awgn => "awgn",
            ProfileName::PedA => "peda",
            ProfileName::VehA => "veha",
        })
    }
}

impl FromStr for ProfileName {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().replace(['-', '_'], "").as_str() {
            "awgn" => Ok(ProfileName::Awgn),
            "peda" | "pedestriana" => Ok(ProfileName::PedA),
            "veha" | "vehiculara" => Ok(ProfileName::VehA),
            _ => Err(Error::param(format!("unknown channel profile '{s}'"))),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Fading {
    None,
    Rayleigh,
    /// Rician first tap with the given K-factor in dB; other taps Rayleigh.
    Rician { k_db: f64 },
}

#[derive(Debug, Clone, PartialEq)]
pub struct ChannelProfile {
    pub name: ProfileName,
    /// Seconds, ascending, first tap at zero.
    pub tap_delays: Vec<f64>,
    /// Relative tap powers in dB.
    pub tap_powers_db: Vec<f64>,
    pub fading: Fading,
    pub sample_rate: f64,
}

/// Tapped-delay-line profile for `name` at `sample_rate` Hz.
pub fn make_itu_profile(name: ProfileName, sample_rate: f64) -> Result<ChannelProfile> {
    if !(sample_rate > 0.0) {
        return Err(Error::param("sample rate must be positive"));
    }
    let (delays_ns, powers, fading): (&[f64], &[f64], Fading) = match name {
        ProfileName::Awgn => (&[0.0], &[0.0], Fading::None),
        ProfileName::PedA => (
            &[0.0, 110.0, 190.0, 410.0],
            &[0.0, -9.7, -19.2, -22.8],
            Fading::Rician { k_db: 10.0 },
        ),
        ProfileName::VehA => (
            &[0.0, 310.0, 710.0, 1090.0, 1730.0, 2510.0],
            &[0.0, -1.0, -9.0, -10.0, -15.0, -20.0],
            Fading::Rayleigh,
        ),
    };
    Ok(ChannelProfile {
        name,
        tap_delays: delays_ns.iter().map(|d| d * 1e-9).collect(),
        tap_powers_db: powers.to_vec(),
        fading,
        sample_rate,
    })
}

impl ChannelProfile {
    /// Profile with the given fading model replaced.
    pub fn with_fading(mut self, fading: Fading) -> Self {
        self.fading = fading;
        self
    }

    fn linear_powers(&self) -> Vec<f64> {
        let w: Vec<f64> = self.tap_powers_db.iter().map(|p| 10f64.powf(p / 10.0)).collect();
        let total: f64 = w.iter().sum();
        w.into_iter().map(|x| x / total).collect()
    }

    /// Power-weighted RMS delay spread of the tap table, in seconds.
    pub fn rms_delay_spread(&self) -> f64 {
        let w = self.linear_powers();
        let mean: f64 = w.iter().zip(&self.tap_delays).map(|(w, t)| w * t).sum();
        let second: f64 = w.iter().zip(&self.tap_delays).map(|(w, t)| w * t * t).sum();
        (second - mean * mean).max(0.0).sqrt()
    }

    /// Taps placed on the nearest sample, powers of merged taps summed;
    /// `(sample delay, linear power)` with total power one.
    pub fn discrete_taps(&self) -> Vec<(usize, f64)> {
        let mut taps: Vec<(usize, f64)> = Vec::new();
        for (t, w) in self.tap_delays.iter().zip(self.linear_powers()) {
            let d = (t * self.sample_rate).round() as usize;
            match taps.iter_mut().find(|(k, _)| *k == d) {
                Some((_, p)) => *p += w,
                None => taps.push((d, w)),
            }
        }
        taps
    }

    /// Longest discrete delay in samples.
    pub fn max_delay_samples(&self) -> usize {
        self.discrete_taps().iter().map(|(d, _)| *d).max().unwrap_or(0)
    }

    /// One faded impulse response.
    pub fn draw_taps<R: Rng + ?Sized>(&self, rng: &mut R) -> Vec<Complex64> {
        let taps = self.discrete_taps();
        let mut ir = vec![Complex64::default(); self.max_delay_samples() + 1];
        for (i, (d, p)) in taps.into_iter().enumerate() {
            ir[d] += match (self.fading, i) {
                (Fading::None, _) => Complex64::new(p.sqrt(), 0.0),
                (Fading::Rician { k_db }, 0) => {
                    let k = 10f64.powf(k_db / 10.0);
                    let los = Complex64::from_polar((p * k / (k + 1.0)).sqrt(), rng.random_range(0.0..std::f64::consts::TAU));
                    los + gaussian(rng, p / (k + 1.0))
                }
                _ => gaussian(rng, p),
            };
        }
        ir
    }

    /// CSV with header `delay_ns,power_db`.
    pub fn to_csv(&self) -> String {
        let mut out = String::from("delay_ns,power_db\n");
        for (t, p) in self.tap_delays.iter().zip(&self.tap_powers_db) {
            out.push_str(&format!("{},{}\n", t * 1e9, p));
        }
        out
    }
}

/// Circular complex Gaussian with the given variance.
pub fn gaussian<R: Rng + ?Sized>(rng: &mut R, variance: f64) -> Complex64 {
    let s = (variance / 2.0).sqrt();
    let re: f64 = rng.sample(StandardNormal);
    let im: f64 = rng.sample(StandardNormal);
    Complex64::new(re * s, im * s)
}

/// Cross-polarization leakage amplitude for an XPD in dB; zero for an
/// infinite XPD.
pub fn xpd_leakage_amplitude(xpd_db: f64) -> Result<f64> {
    if xpd_db.is_nan() || xpd_db <= 0.0 {
        return Err(Error::param(format!("XPD must be positive or infinite, got {xpd_db}")));
    }
    if xpd_db.is_infinite() {
        return Ok(0.0);
    }
    Ok(10f64.powf(-xpd_db / 20.0))
}

/// One block-fading draw for both polarizations.
#[derive(Debug, Clone, PartialEq)]
pub struct ChannelRealization {
    pub ir_vv: Vec<Complex64>,
    pub ir_hh: Vec<Complex64>,
    pub xpd_db: f64,
    /// H transmit to V receive.
    pub leak_hv: Vec<Complex64>,
    /// V transmit to H receive.
    pub leak_vh: Vec<Complex64>,
}

impl ChannelRealization {
    /// Distortionless channel with perfect polarization isolation.
    pub fn identity() -> Self {
        ChannelRealization {
            ir_vv: vec![Complex64::new(1.0, 0.0)],
            ir_hh: vec![Complex64::new(1.0, 0.0)],
            xpd_db: f64::INFINITY,
            leak_hv: Vec::new(),
            leak_vh: Vec::new(),
        }
    }

    /// Independent fading draws for the two co-polar paths and, for a
    /// finite XPD, the two leakage paths.
    pub fn draw<R: Rng + ?Sized>(profile: &ChannelProfile, xpd_db: f64, rng: &mut R) -> Result<Self> {
        let leak = xpd_leakage_amplitude(xpd_db)?;
        let ir_vv = profile.draw_taps(rng);
        let ir_hh = profile.draw_taps(rng);
        let (leak_hv, leak_vh) = if leak > 0.0 {
            let scale = |ir: Vec<Complex64>| ir.into_iter().map(|x| x * leak).collect::<Vec<_>>();
            (scale(profile.draw_taps(rng)), scale(profile.draw_taps(rng)))
        } else {
            (Vec::new(), Vec::new())
        };
        Ok(ChannelRealization {
            ir_vv,
            ir_hh,
            xpd_db,
            leak_hv,
            leak_vh,
        })
    }

    fn ir_len(&self) -> usize {
        [&self.ir_vv, &self.ir_hh, &self.leak_hv, &self.leak_vh]
            .iter()
            .map(|v| v.len())
            .max()
            .unwrap_or(1)
            .max(1)
    }
}

/// DFT of an impulse response at the bins of a `size`-point FFT.
pub fn frequency_response(ir: &[Complex64], size: usize) -> Vec<Complex64> {
    (0..size)
        .map(|n| {
            ir.iter()
                .enumerate()
                .map(|(l, h)| h * Complex64::from_polar(1.0, -std::f64::consts::TAU * ((n * l) % size) as f64 / size as f64))
                .sum()
        })
        .collect()
}

fn convolve_into(out: &mut [Complex64], x: &[Complex64], ir: &[Complex64]) {
    for (d, h) in ir.iter().enumerate() {
        if *h == Complex64::default() {
            continue;
        }
        for (o, s) in out[d..].iter_mut().zip(x) {
            *o += s * h;
        }
    }
}

/// Linear convolution with the realization. Output streams are longer than
/// the input by the impulse-response length minus one.
pub fn apply_channel(sig: &BasebandSignal, ch: &ChannelRealization) -> Result<BasebandSignal> {
    if sig.is_empty() {
        return Err(Error::param("cannot pass an empty signal through the channel"));
    }
    let len = sig.len() + ch.ir_len() - 1;
    let mut v = vec![Complex64::default(); len];
    convolve_into(&mut v, &sig.v, &ch.ir_vv);
    if !sig.is_dual() {
        return Ok(BasebandSignal::single(v, sig.sample_rate));
    }
    let mut h = vec![Complex64::default(); len];
    convolve_into(&mut h, &sig.h, &ch.ir_hh);
    convolve_into(&mut v, &sig.h, &ch.leak_hv);
    convolve_into(&mut h, &sig.v, &ch.leak_vh);
    BasebandSignal::dual(v, h, sig.sample_rate)
}

/// Per-sample complex noise variance `N0` for a target Eb/N0.
///
/// `overhead` is the number of transmitted stream samples (summed over
/// polarizations) per data QAM symbol, so `Eb = P · overhead / bits_per_qam`
/// with `P` the mean sample power of `sig`. Everything that is not payload
/// (CP, guards, pilots, filter tails) is thereby charged to Eb.
pub fn noise_variance(sig: &BasebandSignal, ebn0_db: f64, bits_per_qam: usize, overhead: f64) -> Result<f64> {
    if !ebn0_db.is_finite() {
        return Err(Error::param("Eb/N0 must be finite"));
    }
    if bits_per_qam == 0 || !(overhead > 0.0) {
        return Err(Error::param("bits per symbol and overhead must be positive"));
    }
    let samples = sig.streams().map(|s| s.len()).sum::<usize>();
    if samples == 0 {
        return Err(Error::param("cannot measure power of an empty signal"));
    }
    let power = sig.energy() / samples as f64;
    let eb = power * overhead / bits_per_qam as f64;
    Ok(eb / 10f64.powf(ebn0_db / 10.0))
}

/// Add independent white Gaussian noise of variance `n0` to every stream.
pub fn add_noise<R: Rng + ?Sized>(sig: &mut BasebandSignal, n0: f64, rng: &mut R) {
    for stream in sig.streams_mut() {
        stream.iter_mut().for_each(|x| *x += gaussian(rng, n0));
    }
}

/// AWGN at `ebn0_db`, with the noise level measured from `sig` itself.
pub fn apply_awgn<R: Rng + ?Sized>(
    sig: &BasebandSignal,
    ebn0_db: f64,
    bits_per_qam: usize,
    overhead: f64,
    rng: &mut R,
) -> Result<BasebandSignal> {
    let n0 = noise_variance(sig, ebn0_db, bits_per_qam, overhead)?;
    let mut out = sig.clone();
    add_noise(&mut out, n0, rng);
    Ok(out)
}

/// Rotate sample `i` by `exp(j2π·eps·i/M)`; `eps` is in subcarrier spacings.
pub fn apply_cfo(sig: &BasebandSignal, eps: f64, subcarriers: usize) -> BasebandSignal {
    let mut out = sig.clone();
    let step = std::f64::consts::TAU * eps / subcarriers as f64;
    for stream in out.streams_mut() {
        for (i, x) in stream.iter_mut().enumerate() {
            *x *= Complex64::from_polar(1.0, step * i as f64);
        }
    }
    out
}

/// Shift every stream by `offset` samples, keeping its length: positive
/// values delay (leading zeros), negative values advance (trailing zeros).
pub fn apply_timing_offset(sig: &BasebandSignal, offset: i64) -> Result<BasebandSignal> {
    let len = sig.len();
    if offset.unsigned_abs() as usize >= len.max(1) {
        return Err(Error::param(format!("timing offset {offset} out of range for {len} samples")));
    }
    let mut out = sig.clone();
    let shift = offset.unsigned_abs() as usize;
    for stream in out.streams_mut() {
        if offset >= 0 {
            stream.rotate_right(shift);
            stream[..shift].iter_mut().for_each(|x| *x = Complex64::default());
        } else {
            stream.rotate_left(shift);
            stream[len - shift..].iter_mut().for_each(|x| *x = Complex64::default());
        }
    }
    Ok(out)
}
