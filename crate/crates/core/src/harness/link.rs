//! One end-to-end frame: bits, mapping, pilots, modulation, channel,
//! demodulation, equalization and bit decisions.

use std::ops::Range;

use num_complex::Complex64;
use rand::Rng;

use crate::channel::{
    add_noise, apply_cfo, apply_channel, apply_timing_offset, make_itu_profile, noise_variance, ChannelProfile,
    ChannelRealization,
};
use crate::error::Result;
use crate::estimation::{
    genie_response, interpolate_grid, xpi_cancel, zf_equalize, ChannelEstimate, FbmcPilotPlan, PilotPattern,
    PilotSample,
};
use crate::filters::{AmbiguityTable, FilterSpec};
use crate::harness::config::{Equalizer, ExperimentConfig, System};
use crate::lattice::{Polarization, StructureId};
use crate::metrics::{ber_count, BerRecord};
use crate::modem::{
    oqam_stagger, BasebandSignal, CarrierLayout, ComplexGrid, CpOfdmModem, DualPolModem, FbmcModem, Modulation,
};

/// Impairments of one sweep point.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Impairments {
    pub ebn0_db: f64,
    pub cfo: f64,
    pub timing: i64,
    pub xpd_db: f64,
}

#[derive(Debug, Clone)]
enum Transceiver {
    Ofdm(CpOfdmModem),
    Fbmc(FbmcModem),
    Dual(DualPolModem),
}

/// Everything about a link that is fixed across frames.
#[derive(Debug, Clone)]
pub struct Link {
    modulation: Modulation,
    symbols: usize,
    equalizer: Equalizer,
    xpi_cancel: bool,
    sample_rate: f64,
    layout: CarrierLayout,
    transceiver: Transceiver,
    profile: ChannelProfile,
    pattern: Option<PilotPattern>,
    plan: Option<FbmcPilotPlan>,
    table: Option<AmbiguityTable>,
    data_slots: Vec<(usize, usize)>,
    denoise_taps: Option<usize>,
}

impl Link {
    pub fn new(cfg: &ExperimentConfig) -> Result<Self> {
        Self::with_oversampling(cfg, 1, cfg.equalizer() == Equalizer::Estimated)
    }

    /// Link synthesized at `oversample` times the nominal rate, with or
    /// without pilots.
    pub fn with_oversampling(cfg: &ExperimentConfig, oversample: usize, pilots: bool) -> Result<Self> {
        cfg.validate()?;
        let size = cfg.subcarriers * oversample;
        let layout = CarrierLayout::new(cfg.subcarriers, oversample, cfg.guards.0, cfg.guards.1, true)?;
        let symbols = cfg.symbols_per_frame;
        let structure = cfg.structure.unwrap_or(StructureId::Conventional);
        let spec = FilterSpec {
            kind: cfg.filter,
            overlap: cfg.overlap,
            alpha: cfg.alpha,
        };
        let transceiver = match cfg.system {
            System::CpOfdm => Transceiver::Ofdm(CpOfdmModem::new(size, cfg.cp_len() * oversample)?),
            System::Fbmc => Transceiver::Fbmc(FbmcModem::new(spec.build(size)?)),
            System::DpFbmc => Transceiver::Dual(DualPolModem::new(spec.build(size)?, structure)?),
        };
        let pattern = if pilots {
            Some(PilotPattern::new(&layout, cfg.pilot_count, cfg.pilot_stride)?)
        } else {
            None
        };
        let filter = match &transceiver {
            Transceiver::Ofdm(_) => None,
            Transceiver::Fbmc(m) => Some(m.filter()),
            Transceiver::Dual(d) => Some(d.inner().filter()),
        };
        let (plan, table) = match (filter, &pattern) {
            (Some(filter), Some(p)) => {
                // Cancellation window spans the whole filter support in time.
                let k = filter.overlap();
                let table = filter.interference_table(k, 2 * k - 1);
                let plan = FbmcPilotPlan::new(p, &layout, structure, &table, symbols)?;
                (Some(plan), Some(table))
            }
            _ => (None, None),
        };
        let ofdm_pilot = |n: usize, k: usize| -> bool {
            pattern
                .as_ref()
                .is_some_and(|p| k % p.symbol_stride() == 0 && p.subcarriers().contains(&n))
        };
        let mut data_slots = Vec::new();
        for k in 0..symbols {
            for &n in layout.active() {
                let reserved = match (&transceiver, &plan) {
                    (Transceiver::Ofdm(_), _) => ofdm_pilot(n, k),
                    (_, Some(plan)) => plan.is_reserved(n, k),
                    _ => false,
                };
                if !reserved {
                    data_slots.push((n, k));
                }
            }
        }
        let denoise_taps = pattern.as_ref().map(|p| {
            let np = p.subcarriers().len();
            let span = (layout.frequency(p.subcarriers()[np - 1]) - layout.frequency(p.subcarriers()[0])) as f64;
            let spacing = span / (np - 1) as f64;
            let taps = (cfg.cp_len() as f64 * np as f64 * spacing / cfg.subcarriers as f64).ceil() as usize;
            taps.min(np - 1)
        });
        Ok(Link {
            modulation: cfg.modulation,
            symbols,
            equalizer: cfg.equalizer(),
            xpi_cancel: cfg.xpi_cancel,
            sample_rate: cfg.bandwidth_hz * oversample as f64,
            profile: make_itu_profile(cfg.channel, cfg.bandwidth_hz * oversample as f64)?,
            layout,
            transceiver,
            pattern,
            plan,
            table,
            data_slots,
            denoise_taps,
        })
    }

    pub fn layout(&self) -> &CarrierLayout {
        &self.layout
    }

    pub fn data_slots(&self) -> usize {
        self.data_slots.len()
    }

    pub fn bits_per_frame(&self) -> usize {
        self.data_slots.len() * self.modulation.bits_per_symbol()
    }

    /// Samples of a transmitted frame used for PAPR: the whole CP-OFDM
    /// frame, or `S·M` samples centred on the FBMC symbols (filter tails
    /// cut off).
    pub fn papr_window(&self) -> Range<usize> {
        let size = self.layout.fft_size();
        match &self.transceiver {
            Transceiver::Ofdm(m) => 0..m.frame_len(self.symbols),
            Transceiver::Fbmc(m) => tail_free(m, self.symbols, size),
            Transceiver::Dual(d) => tail_free(d.inner(), self.symbols, size),
        }
    }

    /// Modulate one frame carrying `bits`. Pilots are inserted when the link
    /// has them.
    pub fn transmit(&self, bits: &[u8]) -> Result<BasebandSignal> {
        let syms = self.modulation.map(bits)?;
        let size = self.layout.fft_size();
        let mut qam = ComplexGrid::zeros(size, self.symbols);
        for (&(n, k), s) in self.data_slots.iter().zip(&syms) {
            qam.set(n, k, *s);
        }
        match &self.transceiver {
            Transceiver::Ofdm(modem) => {
                if let Some(p) = &self.pattern {
                    for k in p.pilot_symbols(self.symbols) {
                        for &n in p.subcarriers() {
                            qam.set(n, k, p.ofdm_value);
                        }
                    }
                }
                Ok(BasebandSignal::single(modem.modulate(&qam)?, self.sample_rate))
            }
            Transceiver::Fbmc(modem) => {
                let g = self.stagger(&qam, StructureId::Conventional)?;
                Ok(BasebandSignal::single(modem.modulate(&g)?, self.sample_rate))
            }
            Transceiver::Dual(modem) => {
                let g = self.stagger(&qam, modem.structure())?;
                modem.modulate(&g, self.sample_rate)
            }
        }
    }

    fn stagger(&self, qam: &ComplexGrid, structure: StructureId) -> Result<crate::modem::SymbolGrid> {
        let mut g = oqam_stagger(qam, structure);
        if let (Some(plan), Some(table), Some(p)) = (&self.plan, &self.table, &self.pattern) {
            plan.apply(&mut g, p.fbmc_value, table)?;
        }
        Ok(g)
    }

    /// One random frame through the channel; bit errors counted.
    pub fn run_frame<R: Rng + ?Sized>(&self, imp: &Impairments, rng: &mut R) -> Result<BerRecord> {
        let bits: Vec<u8> = (0..self.bits_per_frame()).map(|_| rng.random::<bool>() as u8).collect();
        let tx = self.transmit(&bits)?;
        let stream_samples: usize = tx.streams().map(|s| s.len()).sum();
        let overhead = stream_samples as f64 / self.data_slots.len().max(1) as f64;
        let n0 = noise_variance(&tx, imp.ebn0_db, self.modulation.bits_per_symbol(), overhead)?;
        let xpd = if tx.is_dual() { imp.xpd_db } else { f64::INFINITY };
        let ch = ChannelRealization::draw(&self.profile, xpd, rng)?;
        let rx = apply_channel(&tx, &ch)?;
        let rx = apply_timing_offset(&rx, imp.timing)?;
        let mut rx = apply_cfo(&rx, imp.cfo, self.layout.fft_size());
        add_noise(&mut rx, n0, rng);

        let (soft, erased) = self.equalize(&rx, &ch, imp)?;
        let per = self.modulation.bits_per_symbol();
        let mut decided = Vec::with_capacity(bits.len());
        for (i, s) in soft.iter().enumerate() {
            if erased[i] {
                decided.extend((0..per).map(|_| rng.random::<bool>() as u8));
            } else {
                decided.extend(self.modulation.demap(std::slice::from_ref(s)));
            }
        }
        ber_count(&bits, &decided)
    }

    fn genie(&self, ir: &[Complex64], columns: usize, centre: impl Fn(usize) -> f64, imp: &Impairments) -> ChannelEstimate {
        let shift = imp.timing as f64;
        genie_response(ir, &self.layout, columns, |c| centre(c) + shift, imp.cfo, imp.timing)
    }

    fn estimate(&self, samples: Vec<PilotSample>, columns: usize) -> Result<ChannelEstimate> {
        interpolate_grid(&samples, &self.layout, columns, self.denoise_taps)
    }

    fn fbmc_estimate(&self, y: &ComplexGrid, pol: Polarization) -> Result<ChannelEstimate> {
        let (plan, p) = (self.plan.as_ref().expect("pilots"), self.pattern.as_ref().expect("pilots"));
        let samples = plan
            .pilots
            .iter()
            .filter(|c| c.pol == pol)
            .map(|c| PilotSample {
                n: c.n,
                // Centre of the QAM slot holding the pilot.
                time: (c.m / 2) as f64 * 2.0 + 0.5,
                h: y.get(c.n, c.m) / p.fbmc_value,
            })
            .collect();
        self.estimate(samples, y.columns)
    }

    /// Equalized QAM estimates for the data slots, with erasure flags.
    fn equalize(
        &self,
        rx: &BasebandSignal,
        ch: &ChannelRealization,
        imp: &Impairments,
    ) -> Result<(Vec<Complex64>, Vec<bool>)> {
        let s = self.symbols;
        match &self.transceiver {
            Transceiver::Ofdm(modem) => {
                let y = modem.demodulate(&rx.v, s)?;
                let h = match (self.equalizer, &self.pattern) {
                    (Equalizer::Estimated, Some(p)) => {
                        let samples = p
                            .pilot_symbols(s)
                            .into_iter()
                            .flat_map(|k| p.subcarriers().iter().map(move |&n| (n, k)))
                            .map(|(n, k)| PilotSample {
                                n,
                                time: k as f64,
                                h: y.get(n, k) / p.ofdm_value,
                            })
                            .collect();
                        self.estimate(samples, s)?
                    }
                    _ => self.genie(&ch.ir_vv, s, |k| modem.symbol_centre(k), imp),
                };
                let (x, erased) = zf_equalize(&y, &h)?;
                Ok(self.collect_complex(&x, &erased))
            }
            Transceiver::Fbmc(modem) => {
                let y = modem.demodulate(&rx.v, 2 * s)?;
                let h = match self.equalizer {
                    Equalizer::Estimated => self.fbmc_estimate(&y, Polarization::V)?,
                    Equalizer::Perfect => self.genie(&ch.ir_vv, 2 * s, |m| modem.cell_centre(m), imp),
                };
                let (x, erased) = zf_equalize(&y, &h)?;
                Ok(self.collect_oqam(&x, &erased))
            }
            Transceiver::Dual(modem) => {
                let both = modem.demodulate_both(rx, 2 * s)?;
                let centre = |m: usize| modem.inner().cell_centre(m);
                let co = match self.equalizer {
                    Equalizer::Estimated => [
                        self.fbmc_estimate(&both[0], Polarization::V)?,
                        self.fbmc_estimate(&both[1], Polarization::H)?,
                    ],
                    Equalizer::Perfect => [
                        self.genie(&ch.ir_vv, 2 * s, centre, imp),
                        self.genie(&ch.ir_hh, 2 * s, centre, imp),
                    ],
                };
                let (streams, erased) = if self.xpi_cancel {
                    let leak = [
                        self.genie(&ch.leak_hv, 2 * s, centre, imp),
                        self.genie(&ch.leak_vh, 2 * s, centre, imp),
                    ];
                    let (x, erased) = xpi_cancel(&both, &co, &leak)?;
                    (x, [erased.clone(), erased])
                } else {
                    let (xv, ev) = zf_equalize(&both[0], &co[0])?;
                    let (xh, eh) = zf_equalize(&both[1], &co[1])?;
                    ([xv, xh], [ev, eh])
                };
                let x = modem.select(&streams);
                let size = x.subcarriers;
                let mut owned_erasure = vec![false; x.values.len()];
                for m in 0..x.columns {
                    for n in 0..size {
                        let pol = crate::lattice::assign_polarization(modem.structure(), n as i64, m as i64);
                        owned_erasure[m * size + n] = erased[pol.index()][m * size + n];
                    }
                }
                Ok(self.collect_oqam(&x, &owned_erasure))
            }
        }
    }

    fn collect_complex(&self, x: &ComplexGrid, erased: &[bool]) -> (Vec<Complex64>, Vec<bool>) {
        let size = x.subcarriers;
        self.data_slots
            .iter()
            .map(|&(n, k)| (x.get(n, k), erased[k * size + n]))
            .unzip()
    }

    fn collect_oqam(&self, x: &ComplexGrid, erased: &[bool]) -> (Vec<Complex64>, Vec<bool>) {
        let size = x.subcarriers;
        self.data_slots
            .iter()
            .map(|&(n, k)| {
                let (re, im) = (2 * k * size + n, (2 * k + 1) * size + n);
                (Complex64::new(x.values[re].re, x.values[im].re), erased[re] || erased[im])
            })
            .unzip()
    }
}

fn tail_free(modem: &FbmcModem, symbols: usize, size: usize) -> Range<usize> {
    let start = modem.filter().len() / 2 - size / 4;
    start..start + symbols * size
}
