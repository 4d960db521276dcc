use std::fmt;
use std::path::PathBuf;
use std::str::FromStr;

use crate::channel::ProfileName;
use crate::error::{Error, Result};
use crate::filters::FilterKind;
use crate::lattice::StructureId;
use crate::modem::Modulation;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Experiment {
    Ber,
    Papr,
    Psd,
    Cfo,
    To,
    Xpd,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum System {
    CpOfdm,
    Fbmc,
    DpFbmc,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Equalizer {
    /// Scattered pilots, LS, spline interpolation.
    Estimated,
    /// Exact channel knowledge.
    Perfect,
}

macro_rules! text_enum {
    ($ty:ident, $what:literal, $($var:ident => $name:literal $(| $alias:literal)*),+) => {
        impl fmt::Display for $ty {
            fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
                f.write_str(match self { $($ty::$var => $name),+ })
            }
        }
        impl FromStr for $ty {
            type Err = Error;
            fn from_str(s: &str) -> Result<Self> {
                match s.trim().to_ascii_lowercase().as_str() {
                    $($name $(| $alias)* => Ok($ty::$var),)+
                    _ => Err(Error::param(format!(concat!("unknown ", $what, " '{}'"), s))),
                }
            }
        }
    };
}

text_enum!(Experiment, "experiment", Ber => "ber", Papr => "papr", Psd => "psd", Cfo => "cfo", To => "to", Xpd => "xpd");
text_enum!(System, "system", CpOfdm => "cpofdm" | "ofdm" | "cp-ofdm", Fbmc => "fbmc", DpFbmc => "dpfbmc" | "dp-fbmc");
text_enum!(Equalizer, "equalizer", Estimated => "estimated", Perfect => "perfect");

impl Experiment {
    /// Name of the swept axis in result rows.
    pub fn axis_name(self) -> &'static str {
        match self {
            Experiment::Ber => "ebn0_db",
            Experiment::Cfo => "cfo",
            Experiment::To => "to",
            Experiment::Xpd => "xpd_db",
            Experiment::Papr => "papr0_db",
            Experiment::Psd => "freq_norm",
        }
    }
}

/// Every key accepted in a config file or as a `--key` flag.
pub const KEYS: &[&str] = &[
    "experiment",
    "system",
    "structure",
    "filter",
    "K",
    "alpha",
    "modulation",
    "channel",
    "M",
    "symbols_per_frame",
    "bandwidth_hz",
    "cp_fraction",
    "guards",
    "ebn0",
    "cfo",
    "to",
    "xpd",
    "frames",
    "seed",
    "equalizer",
    "out",
    "pilots",
    "pilot_stride",
    "xpi_cancel",
    "workers",
    "nfft",
    "overlap",
    "oversample",
    "papr_max_db",
    "papr_step_db",
    "early_stop",
];

#[derive(Debug, Clone, PartialEq)]
pub struct ExperimentConfig {
    pub experiment: Experiment,
    pub system: System,
    pub structure: Option<StructureId>,
    pub filter: FilterKind,
    pub overlap: usize,
    pub alpha: Option<f64>,
    pub modulation: Modulation,
    pub channel: ProfileName,
    pub subcarriers: usize,
    pub symbols_per_frame: usize,
    pub bandwidth_hz: f64,
    pub cp_fraction: f64,
    pub guards: (usize, usize),
    ebn0_db: Option<Vec<f64>>,
    pub cfo: Vec<f64>,
    pub to: Vec<i64>,
    pub xpd_db: Vec<f64>,
    pub frames: usize,
    pub seed: u64,
    equalizer: Option<Equalizer>,
    pub out: Option<PathBuf>,
    pub pilot_count: usize,
    pub pilot_stride: usize,
    pub xpi_cancel: bool,
    pub workers: usize,
    pub nfft: usize,
    pub welch_overlap: f64,
    pub oversample: usize,
    pub papr_max_db: f64,
    pub papr_step_db: f64,
    pub early_stop: bool,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        ExperimentConfig {
            experiment: Experiment::Ber,
            system: System::Fbmc,
            structure: None,
            filter: FilterKind::Phydyas,
            overlap: 4,
            alpha: None,
            modulation: Modulation::Qpsk,
            channel: ProfileName::Awgn,
            subcarriers: 512,
            symbols_per_frame: 16,
            bandwidth_hz: 1e7,
            cp_fraction: 1.0 / 16.0,
            guards: (17, 16),
            ebn0_db: None,
            cfo: vec![0.0],
            to: vec![0],
            xpd_db: vec![f64::INFINITY],
            frames: 100,
            seed: 1,
            equalizer: None,
            out: None,
            pilot_count: 30,
            pilot_stride: 4,
            xpi_cancel: false,
            workers: 0,
            nfft: 2048,
            welch_overlap: 0.5,
            oversample: 4,
            papr_max_db: 14.0,
            papr_step_db: 0.1,
            early_stop: false,
        }
    }
}

fn bad(key: &str, value: &str, why: impl fmt::Display) -> Error {
    Error::config(&[key], format!("invalid value '{value}' for {key}: {why}"))
}

fn parse_one<T: FromStr>(key: &str, value: &str) -> Result<T>
where
    T::Err: fmt::Display,
{
    value.trim().parse::<T>().map_err(|e| bad(key, value, e))
}

fn parse_f64(key: &str, value: &str) -> Result<f64> {
    match value.trim().to_ascii_lowercase().as_str() {
        "inf" | "+inf" | "infinity" => Ok(f64::INFINITY),
        "-inf" => Ok(f64::NEG_INFINITY),
        v => v.parse::<f64>().map_err(|e| bad(key, value, e)),
    }
}

fn parse_bool(key: &str, value: &str) -> Result<bool> {
    match value.trim().to_ascii_lowercase().as_str() {
        "1" | "true" | "yes" | "on" => Ok(true),
        "0" | "false" | "no" | "off" => Ok(false),
        _ => Err(bad(key, value, "expected true or false")),
    }
}

/// Comma-separated values; an item `start:step:stop` expands to an
/// inclusive range.
fn parse_list(key: &str, value: &str) -> Result<Vec<f64>> {
    let mut out = Vec::new();
    for item in value.split(',').map(str::trim).filter(|s| !s.is_empty()) {
        let parts: Vec<&str> = item.split(':').collect();
        match parts.as_slice() {
            [one] => out.push(parse_f64(key, one)?),
            [a, step, b] => {
                let (a, step, b) = (parse_f64(key, a)?, parse_f64(key, step)?, parse_f64(key, b)?);
                if !(step > 0.0) || !a.is_finite() || !b.is_finite() || b < a {
                    return Err(bad(key, item, "range needs start <= stop and a positive step"));
                }
                let count = ((b - a) / step + 1e-9).floor() as usize + 1;
                out.extend((0..count).map(|i| a + i as f64 * step));
            }
            _ => return Err(bad(key, item, "expected a number or start:step:stop")),
        }
    }
    if out.is_empty() {
        return Err(bad(key, value, "empty list"));
    }
    Ok(out)
}

impl ExperimentConfig {
    /// Parse `key = value` lines; `#` starts a comment.
    pub fn from_text(text: &str) -> Result<Self> {
        let mut cfg = ExperimentConfig::default();
        for (i, raw) in text.lines().enumerate() {
            let line = raw.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let Some((key, value)) = line.split_once('=') else {
                return Err(Error::config(&[], format!("line {}: expected key = value", i + 1)));
            };
            cfg.set(key.trim(), value.trim())?;
        }
        Ok(cfg)
    }

    /// Set one key from its text value.
    pub fn set(&mut self, key: &str, value: &str) -> Result<()> {
        match key {
            "experiment" => self.experiment = parse_one(key, value)?,
            "system" => self.system = parse_one(key, value)?,
            "structure" => {
                self.structure = match value.trim().to_ascii_lowercase().as_str() {
                    "" | "none" => None,
                    _ => Some(parse_one(key, value)?),
                }
            }
            "filter" => self.filter = parse_one(key, value)?,
            "K" | "k" => self.overlap = parse_one(key, value)?,
            "alpha" => {
                self.alpha = match value.trim().to_ascii_lowercase().as_str() {
                    "" | "none" => None,
                    _ => Some(parse_f64(key, value)?),
                }
            }
            "modulation" => self.modulation = parse_one(key, value)?,
            "channel" => self.channel = parse_one(key, value)?,
            "M" | "m" => self.subcarriers = parse_one(key, value)?,
            "symbols_per_frame" => self.symbols_per_frame = parse_one(key, value)?,
            "bandwidth_hz" => self.bandwidth_hz = parse_f64(key, value)?,
            "cp_fraction" => {
                self.cp_fraction = match value.split_once('/') {
                    Some((a, b)) => parse_f64(key, a)? / parse_f64(key, b)?,
                    None => parse_f64(key, value)?,
                }
            }
            "guards" => {
                let parts: Vec<&str> = value.split(',').collect();
                let [l, r] = parts.as_slice() else {
                    return Err(bad(key, value, "expected left,right"));
                };
                self.guards = (parse_one(key, l)?, parse_one(key, r)?);
            }
            "ebn0" | "ebn0_db" => self.ebn0_db = Some(parse_list(key, value)?),
            "cfo" => self.cfo = parse_list(key, value)?,
            "to" => {
                self.to = parse_list(key, value)?
                    .into_iter()
                    .map(|v| {
                        if v.fract() == 0.0 && v.is_finite() {
                            Ok(v as i64)
                        } else {
                            Err(bad(key, value, "timing offsets are whole samples"))
                        }
                    })
                    .collect::<Result<_>>()?
            }
            "xpd" | "xpd_db" => self.xpd_db = parse_list(key, value)?,
            "frames" => self.frames = parse_one(key, value)?,
            "seed" => self.seed = parse_one(key, value)?,
            "equalizer" => self.equalizer = Some(parse_one(key, value)?),
            "out" => self.out = Some(PathBuf::from(value.trim())),
            "pilots" => self.pilot_count = parse_one(key, value)?,
            "pilot_stride" => self.pilot_stride = parse_one(key, value)?,
            "xpi_cancel" => self.xpi_cancel = parse_bool(key, value)?,
            "workers" => self.workers = parse_one(key, value)?,
            "nfft" => self.nfft = parse_one(key, value)?,
            "overlap" => self.welch_overlap = parse_f64(key, value)?,
            "oversample" => self.oversample = parse_one(key, value)?,
            "papr_max_db" => self.papr_max_db = parse_f64(key, value)?,
            "papr_step_db" => self.papr_step_db = parse_f64(key, value)?,
            "early_stop" => self.early_stop = parse_bool(key, value)?,
            _ => return Err(Error::config(&[key], format!("unknown key '{key}'"))),
        }
        Ok(())
    }

    /// Eb/N0 points: the configured list, else 0..20 dB in 2 dB steps for a
    /// BER sweep, 12 dB for offset sweeps and 16 dB for XPD sweeps.
    pub fn ebn0_db(&self) -> Vec<f64> {
        match (&self.ebn0_db, self.experiment) {
            (Some(v), _) => v.clone(),
            (None, Experiment::Ber) => (0..=10).map(|i| 2.0 * i as f64).collect(),
            (None, Experiment::Xpd) => vec![16.0],
            (None, _) => vec![12.0],
        }
    }

    pub fn set_ebn0_db(&mut self, v: Vec<f64>) {
        self.ebn0_db = Some(v);
    }

    /// Configured equalizer, else pilot-based for BER sweeps and exact
    /// knowledge for offset and XPD sweeps.
    pub fn equalizer(&self) -> Equalizer {
        self.equalizer.unwrap_or(match self.experiment {
            Experiment::Ber => Equalizer::Estimated,
            _ => Equalizer::Perfect,
        })
    }

    pub fn set_equalizer(&mut self, e: Equalizer) {
        self.equalizer = Some(e);
    }

    pub fn cp_len(&self) -> usize {
        (self.cp_fraction * self.subcarriers as f64).round() as usize
    }

    /// Reject inconsistent combinations, naming the offending keys.
    pub fn validate(&self) -> Result<()> {
        let err = |keys: &[&str], msg: &str| Err(Error::config(keys, msg));
        match (self.system, self.structure) {
            (System::DpFbmc, None) => return err(&["system", "structure"], "dpfbmc requires structure 1, 2 or 3"),
            (System::DpFbmc, Some(StructureId::Conventional)) => {
                return err(&["system", "structure"], "dpfbmc requires structure 1, 2 or 3")
            }
            (System::CpOfdm | System::Fbmc, Some(_)) => {
                return err(&["system", "structure"], "structure only applies to dpfbmc")
            }
            _ => {}
        }
        if self.system != System::CpOfdm {
            match (self.filter, self.alpha) {
                (FilterKind::Srrc, None) => return err(&["filter", "alpha"], "srrc requires alpha"),
                (FilterKind::Srrc, Some(a)) if !(a > 0.0 && a <= 1.0) => {
                    return err(&["alpha"], "alpha must be in (0, 1]")
                }
                (FilterKind::Iota | FilterKind::Phydyas, Some(_)) => {
                    return err(&["filter", "alpha"], "alpha only applies to srrc")
                }
                _ => {}
            }
            if matches!(self.filter, FilterKind::Iota | FilterKind::Phydyas) && self.overlap != 4 {
                return err(&["filter", "K"], "iota and phydyas are defined for K = 4 only");
            }
            if self.overlap == 0 {
                return err(&["K"], "K must be positive");
            }
        }
        if self.subcarriers < 16 || !self.subcarriers.is_power_of_two() {
            return err(&["M"], "M must be a power of two >= 16");
        }
        if self.symbols_per_frame == 0 {
            return err(&["symbols_per_frame"], "need at least one symbol per frame");
        }
        if self.guards.0 + self.guards.1 + 2 >= self.subcarriers {
            return err(&["guards", "M"], "guards leave no active subcarriers");
        }
        if !(self.bandwidth_hz > 0.0) {
            return err(&["bandwidth_hz"], "bandwidth must be positive");
        }
        if self.system == System::CpOfdm && !(0.0..1.0).contains(&self.cp_fraction) {
            return err(&["cp_fraction"], "cp_fraction must be in [0, 1)");
        }
        if self.experiment == Experiment::Xpd && self.system != System::DpFbmc {
            return err(&["experiment", "system"], "xpd sweeps require system dpfbmc");
        }
        if self.xpi_cancel {
            if self.system != System::DpFbmc {
                return err(&["xpi_cancel", "system"], "xpi_cancel requires system dpfbmc");
            }
            if self.equalizer() != Equalizer::Perfect {
                return err(&["xpi_cancel", "equalizer"], "xpi_cancel requires equalizer perfect");
            }
        }
        if self.ebn0_db().iter().any(|v| !v.is_finite()) {
            return err(&["ebn0"], "Eb/N0 values must be finite");
        }
        if self.cfo.iter().any(|v| !v.is_finite()) {
            return err(&["cfo"], "CFO values must be finite");
        }
        if self.xpd_db.iter().any(|v| v.is_nan() || *v <= 0.0) {
            return err(&["xpd"], "XPD values must be positive or inf");
        }
        let single = |key: &str, len: usize| -> Result<()> {
            if len != 1 {
                return Err(Error::config(&[key, "experiment"], format!("{key} must be a single value for this experiment")));
            }
            Ok(())
        };
        match self.experiment {
            Experiment::Ber => {
                single("cfo", self.cfo.len())?;
                single("to", self.to.len())?;
                single("xpd", self.xpd_db.len())?;
            }
            Experiment::Cfo => {
                single("ebn0", self.ebn0_db().len())?;
                single("to", self.to.len())?;
                single("xpd", self.xpd_db.len())?;
            }
            Experiment::To => {
                single("ebn0", self.ebn0_db().len())?;
                single("cfo", self.cfo.len())?;
                single("xpd", self.xpd_db.len())?;
            }
            Experiment::Xpd => {
                single("ebn0", self.ebn0_db().len())?;
                single("cfo", self.cfo.len())?;
                single("to", self.to.len())?;
            }
            Experiment::Papr | Experiment::Psd => {}
        }
        if self.equalizer() == Equalizer::Estimated && self.pilot_count < 4 {
            return err(&["pilots"], "need at least 4 pilot subcarriers");
        }
        if self.pilot_stride == 0 {
            return err(&["pilot_stride"], "pilot stride must be positive");
        }
        if self.experiment == Experiment::Psd {
            if self.oversample == 0 || !self.oversample.is_power_of_two() {
                return err(&["oversample"], "oversample must be a power of two");
            }
            if self.nfft < 2 {
                return err(&["nfft"], "nfft must be at least 2");
            }
            if !(0.0..1.0).contains(&self.welch_overlap) {
                return err(&["overlap"], "overlap must be in [0, 1)");
            }
        }
        if self.experiment == Experiment::Papr && !(self.papr_step_db > 0.0 && self.papr_max_db >= 0.0) {
            return err(&["papr_max_db", "papr_step_db"], "PAPR grid needs a positive step");
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn keys_of(e: Error) -> Vec<String> {
        match e {
            Error::Config { keys, .. } => keys,
            other => panic!("expected config error, got {other}"),
        }
    }

    #[test]
    fn defaults_match_reference_setup() {
        let c = ExperimentConfig::default();
        assert_eq!((c.subcarriers, c.symbols_per_frame, c.bandwidth_hz), (512, 16, 1e7));
        assert_eq!(c.cp_len(), 32);
        assert_eq!(c.guards, (17, 16));
        assert!(c.validate().is_ok());
    }

    #[test]
    fn parses_file() {
        let c = ExperimentConfig::from_text(
            "# comment\nexperiment = xpd\nsystem = dpfbmc\nstructure = 3  # checkerboard\nfilter = srrc\nalpha = 0.5\n\
             xpd = 1, 5, 10, 20, inf\nebn0 = 16\nchannel = veha\nmodulation = qam16\nequalizer = perfect\nxpi_cancel = true\n",
        )
        .unwrap();
        assert_eq!(c.experiment, Experiment::Xpd);
        assert_eq!(c.structure, Some(StructureId::Tfpdm));
        assert_eq!(c.xpd_db, vec![1.0, 5.0, 10.0, 20.0, f64::INFINITY]);
        assert!(c.validate().is_ok());
    }

    #[test]
    fn ranges_expand() {
        let mut c = ExperimentConfig::default();
        c.set("ebn0", "0:2:6, 9").unwrap();
        assert_eq!(c.ebn0_db(), vec![0.0, 2.0, 4.0, 6.0, 9.0]);
        c.set("cp_fraction", "1/8").unwrap();
        assert_eq!(c.cp_len(), 64);
        assert!(c.set("to", "1.5").is_err());
    }

    #[test]
    fn errors_name_keys() {
        assert_eq!(keys_of(ExperimentConfig::from_text("bogus = 1").unwrap_err()), vec!["bogus"]);
        assert_eq!(keys_of(ExperimentConfig::from_text("frames = many").unwrap_err()), vec!["frames"]);
        let check = |text: &str, want: &[&str]| {
            let e = ExperimentConfig::from_text(text).unwrap().validate().unwrap_err();
            assert_eq!(keys_of(e), want, "{text}");
        };
        check("system = dpfbmc", &["system", "structure"]);
        check("system = cpofdm\nstructure = 1", &["system", "structure"]);
        check("filter = srrc", &["filter", "alpha"]);
        check("filter = phydyas\nalpha = 0.5", &["filter", "alpha"]);
        check("filter = phydyas\nK = 8", &["filter", "K"]);
        check("experiment = xpd", &["experiment", "system"]);
        check("system = dpfbmc\nstructure = 1\nxpi_cancel = true", &["xpi_cancel", "equalizer"]);
        check("system = dpfbmc\nstructure = 1\nxpd = 0", &["xpd"]);
        check("experiment = cfo\nebn0 = 1,2", &["ebn0", "experiment"]);
    }
}
