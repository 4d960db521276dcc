//! Config-driven, seeded experiment runner.
//!
//! Trials are independent: trial `t` of sweep point `p` draws from
//! [`derive_stream`]`(seed, t, p)`, and per-trial results are merged in
//! trial order, so output bytes do not depend on the worker count.

mod config;
mod link;

use std::fmt::Write as _;
use std::io::Write as _;
use std::path::Path;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

pub use config::{Equalizer, Experiment, ExperimentConfig, System, KEYS};
pub use link::{Impairments, Link};

use crate::channel::make_itu_profile;
use crate::error::{Error, Result};
use crate::filters::{FilterSpec, ProtoFilter};
use crate::metrics::{papr, threshold_grid, BerRecord, PaprCcdf, WelchAccumulator};

/// Error count after which a point stops early when `early_stop` is set.
pub const EARLY_STOP_ERRORS: u64 = 200;

/// Trials per batch when early stopping; the stop decision is only taken
/// between batches so it does not depend on scheduling.
pub const EARLY_STOP_BATCH: usize = 64;

/// Independent random stream for one trial.
///
/// The ChaCha key is expanded from `seed`; the 64-bit stream id is
/// `point << 32 | trial`, which is collision-free for fewer than 2³² trials
/// per point.
pub fn derive_stream(seed: u64, trial: u64, point: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream((point << 32) | (trial & 0xffff_ffff));
    rng
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BerRow {
    pub axis_value: f64,
    pub frames: usize,
    pub record: BerRecord,
}

#[derive(Debug, Clone, PartialEq)]
pub enum ExperimentOutput {
    Ber(Vec<BerRow>),
    Papr(Option<PaprCcdf>),
    /// Frequency in subcarrier spacings and peak-normalized dB.
    Psd(Vec<(f64, f64)>),
}

fn fmt_opt<T: ToString>(v: Option<T>) -> String {
    v.map(|x| x.to_string()).unwrap_or_default()
}

impl ExperimentOutput {
    pub fn to_csv(&self, cfg: &ExperimentConfig) -> String {
        let mut out = String::new();
        match self {
            ExperimentOutput::Ber(rows) => {
                out.push_str(
                    "experiment,system,structure,filter,K,alpha,modulation,channel,axis_name,axis_value,frames,bits,bit_errors,ber,seed\n",
                );
                let ofdm = cfg.system == System::CpOfdm;
                for r in rows {
                    let _ = writeln!(
                        out,
                        "{},{},{},{},{},{},{},{},{},{},{},{},{},{},{}",
                        cfg.experiment,
                        cfg.system,
                        fmt_opt(cfg.structure.and_then(|s| s.number())),
                        if ofdm { String::new() } else { cfg.filter.to_string() },
                        if ofdm { String::new() } else { cfg.overlap.to_string() },
                        if ofdm { String::new() } else { fmt_opt(cfg.alpha) },
                        cfg.modulation,
                        cfg.channel,
                        cfg.experiment.axis_name(),
                        r.axis_value,
                        r.frames,
                        r.record.bits_sent,
                        r.record.bit_errors,
                        r.record.ber(),
                        cfg.seed
                    );
                }
            }
            ExperimentOutput::Papr(ccdf) => {
                out.push_str("papr0_db,ccdf\n");
                if let Some(c) = ccdf {
                    for (t, p) in c.thresholds_db.iter().zip(&c.ccdf) {
                        let _ = writeln!(out, "{t},{p}");
                    }
                }
            }
            ExperimentOutput::Psd(points) => {
                out.push_str("freq_norm,psd_db\n");
                for (f, d) in points {
                    let _ = writeln!(out, "{f},{d}");
                }
            }
        }
        out
    }
}

fn pool(workers: usize) -> Result<rayon::ThreadPool> {
    rayon::ThreadPoolBuilder::new()
        .num_threads(workers)
        .build()
        .map_err(|e| Error::param(format!("cannot start worker pool: {e}")))
}

/// Run the configured sweep.
pub fn run_experiment(cfg: &ExperimentConfig) -> Result<ExperimentOutput> {
    cfg.validate()?;
    let pool = pool(cfg.workers)?;
    pool.install(|| match cfg.experiment {
        Experiment::Papr => run_papr(cfg),
        Experiment::Psd => run_psd(cfg),
        _ => run_ber(cfg),
    })
}

fn sweep_points(cfg: &ExperimentConfig) -> Vec<(f64, Impairments)> {
    let base = Impairments {
        ebn0_db: cfg.ebn0_db()[0],
        cfo: cfg.cfo[0],
        timing: cfg.to[0],
        xpd_db: cfg.xpd_db[0],
    };
    match cfg.experiment {
        Experiment::Cfo => cfg.cfo.iter().map(|&v| (v, Impairments { cfo: v, ..base })).collect(),
        Experiment::To => cfg.to.iter().map(|&v| (v as f64, Impairments { timing: v, ..base })).collect(),
        Experiment::Xpd => cfg.xpd_db.iter().map(|&v| (v, Impairments { xpd_db: v, ..base })).collect(),
        _ => cfg
            .ebn0_db()
            .into_iter()
            .map(|v| (v, Impairments { ebn0_db: v, ..base }))
            .collect(),
    }
}

fn run_ber(cfg: &ExperimentConfig) -> Result<ExperimentOutput> {
    if cfg.frames == 0 {
        return Ok(ExperimentOutput::Ber(Vec::new()));
    }
    let link = Link::new(cfg)?;
    let mut rows = Vec::new();
    for (point, (axis_value, imp)) in sweep_points(cfg).into_iter().enumerate() {
        let trial = |t: usize| link.run_frame(&imp, &mut derive_stream(cfg.seed, t as u64, point as u64));
        let mut record = BerRecord::default();
        let mut frames = 0;
        let batch = if cfg.early_stop { EARLY_STOP_BATCH } else { cfg.frames };
        while frames < cfg.frames {
            let end = (frames + batch).min(cfg.frames);
            let results: Vec<BerRecord> = (frames..end).into_par_iter().map(trial).collect::<Result<_>>()?;
            results.into_iter().for_each(|r| record.merge(r));
            frames = end;
            if cfg.early_stop && record.bit_errors >= EARLY_STOP_ERRORS {
                break;
            }
        }
        rows.push(BerRow {
            axis_value,
            frames,
            record,
        });
    }
    Ok(ExperimentOutput::Ber(rows))
}

fn random_bits(n: usize, rng: &mut impl Rng) -> Vec<u8> {
    (0..n).map(|_| rng.random::<bool>() as u8).collect()
}

/// PAPR of every polarization stream of every frame over the tail-free
/// frame window.
fn run_papr(cfg: &ExperimentConfig) -> Result<ExperimentOutput> {
    if cfg.frames == 0 {
        return Ok(ExperimentOutput::Papr(None));
    }
    let link = Link::with_oversampling(cfg, 1, false)?;
    let window = link.papr_window();
    let values: Vec<Vec<f64>> = (0..cfg.frames)
        .into_par_iter()
        .map(|t| {
            let mut rng = derive_stream(cfg.seed, t as u64, 0);
            let tx = link.transmit(&random_bits(link.bits_per_frame(), &mut rng))?;
            tx.streams().map(|s| papr(&s[window.clone()])).collect::<Result<Vec<f64>>>()
        })
        .collect::<Result<_>>()?;
    let flat: Vec<f64> = values.into_iter().flatten().collect();
    let grid = threshold_grid(0.0, cfg.papr_max_db, cfg.papr_step_db);
    Ok(ExperimentOutput::Papr(Some(PaprCcdf::from_values(&flat, &grid))))
}

/// Welch PSD of oversampled, tail-free frames, all streams pooled.
fn run_psd(cfg: &ExperimentConfig) -> Result<ExperimentOutput> {
    if cfg.frames == 0 {
        return Ok(ExperimentOutput::Psd(Vec::new()));
    }
    let link = Link::with_oversampling(cfg, cfg.oversample, false)?;
    let window = link.papr_window();
    let parts: Vec<WelchAccumulator> = (0..cfg.frames)
        .into_par_iter()
        .map(|t| {
            let mut rng = derive_stream(cfg.seed, t as u64, 0);
            let tx = link.transmit(&random_bits(link.bits_per_frame(), &mut rng))?;
            let mut acc = WelchAccumulator::new(cfg.nfft, cfg.welch_overlap)?;
            tx.streams().for_each(|s| acc.add(&s[window.clone()]));
            Ok(acc)
        })
        .collect::<Result<_>>()?;
    let mut total = WelchAccumulator::new(cfg.nfft, cfg.welch_overlap)?;
    parts.iter().for_each(|p| total.merge(p));
    let psd = total.finish()?;
    let size = link.layout().fft_size() as f64;
    Ok(ExperimentOutput::Psd(
        psd.freq.iter().zip(&psd.db).map(|(f, d)| (f * size, *d)).collect(),
    ))
}

/// Write via a temporary file in the same directory, then rename.
pub fn write_atomic(path: &Path, contents: &str) -> Result<()> {
    let io = |e: std::io::Error| Error::Io(format!("{}: {e}", path.display()));
    let dir = match path.parent() {
        Some(d) if !d.as_os_str().is_empty() => d,
        _ => Path::new("."),
    };
    let name = path.file_name().ok_or_else(|| Error::Io(format!("{}: not a file path", path.display())))?;
    let tmp = dir.join(format!(".{}.tmp{}", name.to_string_lossy(), std::process::id()));
    let mut f = std::fs::File::create(&tmp).map_err(io)?;
    f.write_all(contents.as_bytes()).map_err(io)?;
    f.sync_all().map_err(io)?;
    drop(f);
    std::fs::rename(&tmp, path).map_err(|e| {
        let _ = std::fs::remove_file(&tmp);
        io(e)
    })
}

/// Prototype filter of the config at its nominal subcarrier count.
pub fn config_filter(cfg: &ExperimentConfig) -> Result<ProtoFilter> {
    cfg.validate()?;
    FilterSpec {
        kind: cfg.filter,
        overlap: cfg.overlap,
        alpha: cfg.alpha,
    }
    .build(cfg.subcarriers)
}

/// `index,value` taps of the configured filter.
pub fn dump_filter(cfg: &ExperimentConfig) -> Result<String> {
    Ok(config_filter(cfg)?.to_csv())
}

/// `p,q,re,im` ambiguity values over `|p| ≤ 2`, `|q| ≤ 3`.
pub fn dump_table(cfg: &ExperimentConfig) -> Result<String> {
    Ok(config_filter(cfg)?.interference_table(2, 3).to_csv())
}

/// `delay_ns,power_db` taps of the configured channel.
pub fn dump_profile(cfg: &ExperimentConfig) -> Result<String> {
    Ok(make_itu_profile(cfg.channel, cfg.bandwidth_hz)?.to_csv())
}
