//! Scattered pilots, auxiliary pilots, LS/DFT/spline channel estimation and
//! one-tap equalization.

use num_complex::Complex64;
use rustfft::FftPlanner;

use crate::error::{Error, Result};
use crate::filters::AmbiguityTable;
use crate::lattice::{assign_polarization, Polarization, StructureId};
use crate::modem::{CarrierLayout, ComplexGrid, SymbolGrid};
use crate::spline::CubicSpline;

/// Channel estimate on the full (subcarrier, column) grid; inactive bins
/// hold zero.
pub type ChannelEstimate = ComplexGrid;

/// Smallest auxiliary coupling accepted for interference cancellation.
pub const MIN_AUX_COUPLING: f64 = 1e-3;

/// Below this channel magnitude a cell is erased instead of equalized.
pub const ERASURE_THRESHOLD: f64 = 1e-9;

#[derive(Debug, Clone, PartialEq)]
pub struct PilotPattern {
    subcarriers: Vec<usize>,
    symbol_stride: usize,
    /// Real pilot amplitude on the OQAM lattice.
    pub fbmc_value: f64,
    /// Complex pilot symbol for CP-OFDM.
    pub ofdm_value: Complex64,
}

impl PilotPattern {
    /// `count` pilot subcarriers equally spaced over the active band (both
    /// edges included), on every `stride`-th QAM symbol starting at zero.
    pub fn new(layout: &CarrierLayout, count: usize, stride: usize) -> Result<Self> {
        let active = layout.active();
        if count < 2 || count > active.len() {
            return Err(Error::param(format!(
                "need between 2 and {} pilot subcarriers, got {count}",
                active.len()
            )));
        }
        if stride == 0 {
            return Err(Error::param("pilot stride must be positive"));
        }
        let span = (active.len() - 1) as f64;
        let subcarriers = (0..count)
            .map(|i| active[(i as f64 * span / (count - 1) as f64).round() as usize])
            .collect();
        Ok(PilotPattern {
            subcarriers,
            symbol_stride: stride,
            fbmc_value: 1.0,
            ofdm_value: Complex64::new(1.0, 1.0) / 2f64.sqrt(),
        })
    }

    /// Pilot bins sorted by frequency.
    pub fn subcarriers(&self) -> &[usize] {
        &self.subcarriers
    }

    pub fn symbol_stride(&self) -> usize {
        self.symbol_stride
    }

    /// QAM symbol indices that carry pilots in a frame of `symbols`.
    pub fn pilot_symbols(&self, symbols: usize) -> Vec<usize> {
        (0..symbols).step_by(self.symbol_stride).collect()
    }
}

/// A pilot cell on the OQAM lattice with its auxiliary cell.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct PilotCell {
    pub n: usize,
    pub m: usize,
    pub pol: Polarization,
    pub aux_n: usize,
    pub aux_m: usize,
}

/// Signed bin offset from `from` to `to`, wrapped into `[−size/2, size/2)`.
fn bin_offset(from: usize, to: usize, size: usize) -> i64 {
    let s = size as i64;
    (to as i64 - from as i64 + s / 2).rem_euclid(s) - s / 2
}

/// Demodulator coupling of the cell at offset `(p, q)` into `(n, m)`,
/// including the sign flip for neighbours across the FFT wrap.
fn coupling_at(table: &AmbiguityTable, n: usize, m: usize, p: i64, q: i64, size: usize) -> Complex64 {
    let k = table.coupling(m as i64, p, q);
    if (n as i64 + p).div_euclid(size as i64) % 2 == 0 {
        k
    } else {
        -k
    }
}

/// Pilot and auxiliary cells of an FBMC frame, and the QAM slots they use.
#[derive(Debug, Clone, PartialEq)]
pub struct FbmcPilotPlan {
    pub pilots: Vec<PilotCell>,
    subcarriers: usize,
    symbols: usize,
    reserved: Vec<bool>,
}

impl FbmcPilotPlan {
    /// Place one pilot per polarization at every (pilot subcarrier, pilot
    /// symbol) location. The pilot takes the first half-cell of its
    /// polarization in the slot; the auxiliary cell is the same-pol half-cell
    /// of the used slots with the strongest coupling into the pilot. A second
    /// slot on the adjacent subcarrier is used when one slot cannot hold both.
    pub fn new(
        pattern: &PilotPattern,
        layout: &CarrierLayout,
        structure: StructureId,
        table: &AmbiguityTable,
        symbols: usize,
    ) -> Result<Self> {
        let size = layout.fft_size();
        let pols: &[Polarization] = if structure.is_dual() {
            &[Polarization::V, Polarization::H]
        } else {
            &[Polarization::V]
        };
        let mut plan = FbmcPilotPlan {
            pilots: Vec::new(),
            subcarriers: size,
            symbols,
            reserved: vec![false; size * symbols],
        };
        for k in pattern.pilot_symbols(symbols) {
            for &n in pattern.subcarriers() {
                let neighbour = [(n + 1) % size, (n + size - 1) % size]
                    .into_iter()
                    .find(|&b| layout.is_active(b) && !plan.is_reserved(b, k));
                let mut cells = vec![(n, 2 * k), (n, 2 * k + 1)];
                let mut placed = place_location(structure, table, pols, &cells, size);
                if placed.is_none() {
                    if let Some(b) = neighbour {
                        cells.extend([(b, 2 * k), (b, 2 * k + 1)]);
                        placed = place_location(structure, table, pols, &cells, size);
                    }
                }
                let Some(cells_here) = placed else {
                    return Err(Error::config(
                        &["filter", "structure"],
                        format!("no auxiliary cell with coupling >= {MIN_AUX_COUPLING} near pilot subcarrier {n}"),
                    ));
                };
                if plan.is_reserved(n, k) {
                    return Err(Error::param("pilot locations overlap"));
                }
                for &(b, m) in &cells {
                    plan.reserved[(m / 2) * size + b] = true;
                }
                plan.pilots.extend(cells_here);
            }
        }
        Ok(plan)
    }

    /// Whether QAM slot `(n, k)` is consumed by pilots.
    pub fn is_reserved(&self, n: usize, k: usize) -> bool {
        self.reserved[k * self.subcarriers + n]
    }

    pub fn reserved_slots(&self) -> usize {
        self.reserved.iter().filter(|r| **r).count()
    }

    /// Zero the reserved slots, write pilot values and solve the auxiliary
    /// values against the surrounding data.
    pub fn apply(&self, grid: &mut SymbolGrid, value: f64, table: &AmbiguityTable) -> Result<()> {
        if grid.subcarriers != self.subcarriers || grid.half_symbols != 2 * self.symbols {
            return Err(Error::dim("grid does not match pilot plan"));
        }
        for k in 0..self.symbols {
            for n in 0..self.subcarriers {
                if self.is_reserved(n, k) {
                    grid.set(n, 2 * k, 0.0);
                    grid.set(n, 2 * k + 1, 0.0);
                }
            }
        }
        for p in &self.pilots {
            grid.set(p.n, p.m, value);
        }
        insert_auxiliary_pilots(grid, &self.pilots, table)
    }
}

fn place_location(
    structure: StructureId,
    table: &AmbiguityTable,
    pols: &[Polarization],
    cells: &[(usize, usize)],
    size: usize,
) -> Option<Vec<PilotCell>> {
    let mut out = Vec::new();
    for &pol in pols {
        let mine: Vec<_> = cells
            .iter()
            .copied()
            .filter(|&(n, m)| assign_polarization(structure, n as i64, m as i64) == pol)
            .collect();
        let (&(n, m), rest) = mine.split_first()?;
        let (aux_n, aux_m, strength) = rest
            .iter()
            .map(|&(b, mm)| {
                let k = coupling_at(table, n, m, bin_offset(n, b, size), mm as i64 - m as i64, size);
                (b, mm, k.im.abs())
            })
            .max_by(|a, b| a.2.total_cmp(&b.2))?;
        if strength < MIN_AUX_COUPLING {
            return None;
        }
        out.push(PilotCell {
            n,
            m,
            pol,
            aux_n,
            aux_m,
        });
    }
    Some(out)
}

/// Same-pol intrinsic interference `Σ a · Im(coupling)` seen at `(n, m)`.
fn interference_at(grid: &SymbolGrid, table: &AmbiguityTable, n: usize, m: usize, pol: Polarization) -> f64 {
    let size = grid.subcarriers as i64;
    table
        .iter()
        .filter(|&(p, q, _)| (p, q) != (0, 0))
        .map(|(p, q, _)| {
            let mm = m as i64 + q;
            if mm < 0 || mm >= grid.half_symbols as i64 {
                return 0.0;
            }
            let nn = (n as i64 + p).rem_euclid(size);
            if assign_polarization(grid.structure, nn, mm) != pol {
                return 0.0;
            }
            grid.get_offset(n, m, p, q) * table.coupling(m as i64, p, q).im
        })
        .sum()
}

/// Overwrite each pilot's auxiliary cell so that the same-polarization
/// intrinsic interference at the pilot vanishes over the table window.
/// Auxiliary cells that interact are solved jointly by Gauss-Seidel sweeps.
pub fn insert_auxiliary_pilots(grid: &mut SymbolGrid, pilots: &[PilotCell], table: &AmbiguityTable) -> Result<()> {
    let size = grid.subcarriers;
    let weights: Vec<f64> = pilots
        .iter()
        .map(|c| {
            let p = bin_offset(c.n, c.aux_n, size);
            let q = c.aux_m as i64 - c.m as i64;
            coupling_at(table, c.n, c.m, p, q, size).im
        })
        .collect();
    if let Some(w) = weights.iter().find(|w| w.abs() < MIN_AUX_COUPLING) {
        return Err(Error::config(
            &["filter", "structure"],
            format!("auxiliary coupling {w:.2e} too small to cancel interference"),
        ));
    }
    for c in pilots {
        grid.set(c.aux_n, c.aux_m, 0.0);
    }
    for _ in 0..100 {
        let mut change: f64 = 0.0;
        for (c, w) in pilots.iter().zip(&weights) {
            let residual = interference_at(grid, table, c.n, c.m, c.pol);
            let step = residual / w;
            grid.set(c.aux_n, c.aux_m, grid.get(c.aux_n, c.aux_m) - step);
            change = change.max(step.abs());
        }
        if change < 1e-13 {
            return Ok(());
        }
    }
    Ok(())
}

/// Per-pilot least-squares estimate `rx / tx`.
pub fn ls_estimate(rx: &[Complex64], tx: &[Complex64]) -> Result<Vec<Complex64>> {
    if rx.len() != tx.len() {
        return Err(Error::dim(format!("{} received vs {} transmitted pilots", rx.len(), tx.len())));
    }
    rx.iter()
        .zip(tx)
        .map(|(r, t)| {
            if t.norm() == 0.0 {
                Err(Error::param("zero transmitted pilot"))
            } else {
                Ok(r / t)
            }
        })
        .collect()
}

/// Delay-domain truncation of a pilot-frequency response: taps with index
/// above `max_taps` are zeroed. `max_taps >= len − 1` is the identity.
pub fn dft_denoise(h: &[Complex64], max_taps: usize) -> Vec<Complex64> {
    let n = h.len();
    if n == 0 || max_taps + 1 >= n {
        return h.to_vec();
    }
    let mut planner = FftPlanner::new();
    let mut buf = h.to_vec();
    planner.plan_fft_inverse(n).process(&mut buf);
    buf[max_taps + 1..].iter_mut().for_each(|x| *x = Complex64::default());
    planner.plan_fft_forward(n).process(&mut buf);
    buf.iter_mut().for_each(|x| *x /= n as f64);
    buf
}

/// One pilot observation: bin, time in grid columns, and estimate.
/// Samples with equal `time` form one pilot symbol.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PilotSample {
    pub n: usize,
    pub time: f64,
    pub h: Complex64,
}

/// Fill the active grid from scattered pilot estimates: per pilot column,
/// optional DFT denoising and a natural cubic spline across frequency
/// (edge values held outside the pilot range); then linear interpolation
/// across columns with constant extension.
pub fn interpolate_grid(
    samples: &[PilotSample],
    layout: &CarrierLayout,
    columns: usize,
    denoise_taps: Option<usize>,
) -> Result<ChannelEstimate> {
    let mut times: Vec<f64> = samples.iter().map(|s| s.time).collect();
    times.sort_by(f64::total_cmp);
    times.dedup();
    if times.is_empty() {
        return Err(Error::param("no pilots to interpolate"));
    }
    let size = layout.fft_size();
    let mut rows: Vec<Vec<Complex64>> = Vec::with_capacity(times.len());
    for &t in &times {
        let mut pts: Vec<(f64, Complex64)> = samples
            .iter()
            .filter(|s| s.time == t)
            .map(|s| (layout.frequency(s.n) as f64, s.h))
            .collect();
        if pts.len() < 4 {
            return Err(Error::param(format!("pilot time {t} has {} pilots, need at least 4", pts.len())));
        }
        pts.sort_by(|a, b| a.0.total_cmp(&b.0));
        let xs: Vec<f64> = pts.iter().map(|p| p.0).collect();
        let mut ys: Vec<Complex64> = pts.iter().map(|p| p.1).collect();
        if let Some(taps) = denoise_taps {
            ys = dft_denoise(&ys, taps);
        }
        let spline = CubicSpline::natural(&xs, &ys);
        rows.push((0..size).map(|n| spline.eval(layout.frequency(n) as f64)).collect());
    }
    let mut est = ComplexGrid::zeros(size, columns);
    for col in 0..columns {
        let x = col as f64;
        let j = times.partition_point(|&t| t <= x);
        let value = |n: usize| -> Complex64 {
            if j == 0 {
                rows[0][n]
            } else if j == times.len() {
                rows[j - 1][n]
            } else {
                let (t0, t1) = (times[j - 1], times[j]);
                let w = (x - t0) / (t1 - t0);
                rows[j - 1][n] * (1.0 - w) + rows[j][n] * w
            }
        };
        for &n in layout.active() {
            est.set(n, col, value(n));
        }
    }
    Ok(est)
}

/// Per-cell zero forcing. Returns the equalized grid and an erasure flag per
/// cell for channel magnitudes below [`ERASURE_THRESHOLD`].
pub fn zf_equalize(grid: &ComplexGrid, est: &ChannelEstimate) -> Result<(ComplexGrid, Vec<bool>)> {
    if grid.subcarriers != est.subcarriers || grid.columns > est.columns {
        return Err(Error::dim("estimate does not cover the grid"));
    }
    let mut out = ComplexGrid::zeros(grid.subcarriers, grid.columns);
    let mut erased = vec![false; grid.values.len()];
    for (i, (y, o)) in grid.values.iter().zip(out.values.iter_mut()).enumerate() {
        let h = est.values[i];
        if h.norm() < ERASURE_THRESHOLD {
            erased[i] = true;
        } else {
            *o = y / h;
        }
    }
    Ok((out, erased))
}

/// Per-cell inversion of the polarization mixing
/// `[y_v, y_h] = [[H_vv, L_hv], [L_vh, H_hh]] · [x_v, x_h]`.
/// Returns `[x_v, x_h]` and erasure flags for singular cells.
pub fn xpi_cancel(
    rx: &[ComplexGrid; 2],
    co: &[ChannelEstimate; 2],
    leak: &[ChannelEstimate; 2],
) -> Result<([ComplexGrid; 2], Vec<bool>)> {
    let len = rx[0].values.len();
    if [&rx[1], &co[0], &co[1], &leak[0], &leak[1]]
        .iter()
        .any(|g| g.values.len() < len || g.subcarriers != rx[0].subcarriers)
    {
        return Err(Error::dim("mixing grids do not match received grids"));
    }
    let mut xv = ComplexGrid::zeros(rx[0].subcarriers, rx[0].columns);
    let mut xh = xv.clone();
    let mut erased = vec![false; len];
    for i in 0..len {
        let (a, b, c, d) = (co[0].values[i], leak[0].values[i], leak[1].values[i], co[1].values[i]);
        let det = a * d - b * c;
        if det.norm() < ERASURE_THRESHOLD * ERASURE_THRESHOLD {
            erased[i] = true;
            continue;
        }
        let (yv, yh) = (rx[0].values[i], rx[1].values[i]);
        xv.values[i] = (d * yv - b * yh) / det;
        xh.values[i] = (a * yh - c * yv) / det;
    }
    Ok(([xv, xh], erased))
}

/// Exact per-cell response of a static impulse response seen through a
/// timing offset of `timing` samples and a frequency offset of `cfo`
/// subcarriers, evaluated at each column's centre sample.
pub fn genie_response(
    ir: &[Complex64],
    layout: &CarrierLayout,
    columns: usize,
    centre: impl Fn(usize) -> f64,
    cfo: f64,
    timing: i64,
) -> ChannelEstimate {
    let size = layout.fft_size();
    let freq = crate::channel::frequency_response(ir, size);
    let mut out = ComplexGrid::zeros(size, columns);
    for col in 0..columns {
        let rot = Complex64::from_polar(1.0, std::f64::consts::TAU * cfo * centre(col) / size as f64);
        for &n in layout.active() {
            let ramp = Complex64::from_polar(
                1.0,
                -std::f64::consts::TAU * (n as i64 * timing).rem_euclid(size as i64) as f64 / size as f64,
            );
            out.set(n, col, freq[n] * ramp * rot);
        }
    }
    out
}
