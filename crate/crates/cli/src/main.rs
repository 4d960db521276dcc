//! Command-line experiment runner.
//!
//! Reads an optional `key = value` config file, applies `--key value` flags on
//! top of it, runs the experiment and writes CSV to `out` (or stdout).

use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Arg, ArgAction, ArgMatches, Command};
use dpfbmc::harness::{self, ExperimentConfig, KEYS};
use dpfbmc::Error;

const EXIT_FAILURE: u8 = 1;
const EXIT_CONFIG: u8 = 2;

fn command() -> Command {
    let mut cmd = Command::new("dpfbmc")
        .about("Run CP-OFDM / FBMC / dual-polarization FBMC link experiments and write CSV")
        .arg(
            Arg::new("config")
                .long("config")
                .short('c')
                .value_name("FILE")
                .value_parser(clap::value_parser!(PathBuf))
                .help("key = value config file; flags override it"),
        )
        .arg(
            Arg::new("dump-filter")
                .long("dump-filter")
                .value_name("PATH")
                .value_parser(clap::value_parser!(PathBuf))
                .help("write prototype filter taps as index,value CSV"),
        )
        .arg(
            Arg::new("dump-table")
                .long("dump-table")
                .value_name("PATH")
                .value_parser(clap::value_parser!(PathBuf))
                .help("write the ambiguity table as p,q,re,im CSV"),
        )
        .arg(
            Arg::new("dump-profile")
                .long("dump-profile")
                .value_name("PATH")
                .value_parser(clap::value_parser!(PathBuf))
                .help("write the channel power-delay profile as delay_ns,power_db CSV"),
        )
        .arg(
            Arg::new("dump-only")
                .long("dump-only")
                .action(ArgAction::SetTrue)
                .help("write the requested dumps and skip the experiment"),
        );
    for key in KEYS {
        cmd = cmd.arg(
            Arg::new(*key)
                .long(*key)
                .value_name("VALUE")
                .allow_hyphen_values(true)
                .help(format!("override config key '{key}'")),
        );
    }
    cmd
}

fn load_config(matches: &ArgMatches) -> Result<ExperimentConfig, Error> {
    let mut cfg = match matches.get_one::<PathBuf>("config") {
        Some(path) => {
            let text = std::fs::read_to_string(path).map_err(|e| Error::Config {
                keys: vec!["config".into()],
                message: format!("{}: {e}", path.display()),
            })?;
            ExperimentConfig::from_text(&text)?
        }
        None => ExperimentConfig::default(),
    };
    for key in KEYS {
        if let Some(value) = matches.get_one::<String>(key) {
            cfg.set(key, value)?;
        }
    }
    cfg.validate()?;
    Ok(cfg)
}

fn emit(path: Option<&Path>, csv: &str) -> Result<(), Error> {
    match path {
        Some(p) => harness::write_atomic(p, csv),
        None => {
            print!("{csv}");
            Ok(())
        }
    }
}

fn run(matches: &ArgMatches) -> Result<(), Error> {
    let cfg = load_config(matches)?;

    let dumps: [(&str, fn(&ExperimentConfig) -> dpfbmc::Result<String>); 3] = [
        ("dump-filter", harness::dump_filter),
        ("dump-table", harness::dump_table),
        ("dump-profile", harness::dump_profile),
    ];
    for (flag, dump) in dumps {
        if let Some(path) = matches.get_one::<PathBuf>(flag) {
            harness::write_atomic(path, &dump(&cfg)?)?;
        }
    }
    if matches.get_flag("dump-only") {
        return Ok(());
    }

    let output = harness::run_experiment(&cfg)?;
    emit(cfg.out.as_deref(), &output.to_csv(&cfg))
}

fn main() -> ExitCode {
    let matches = command().get_matches();
    match run(&matches) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("dpfbmc: {e}");
            match e {
                Error::Config { .. } | Error::Parameter(_) => ExitCode::from(EXIT_CONFIG),
                _ => ExitCode::from(EXIT_FAILURE),
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn command_is_well_formed() {
        command().debug_assert();
    }

    #[test]
    fn flags_override_file() {
        let dir = tempfile::tempdir().unwrap();
        let file = dir.path().join("run.cfg");
        std::fs::write(&file, "experiment = papr\nframes = 3\nseed = 9\n").unwrap();
        let m = command()
            .try_get_matches_from(["dpfbmc", "--config", file.to_str().unwrap(), "--frames", "7"])
            .unwrap();
        let cfg = load_config(&m).unwrap();
        assert_eq!(cfg.frames, 7);
        assert_eq!(cfg.seed, 9);
    }

    #[test]
    fn negative_values_are_accepted() {
        let m = command().try_get_matches_from(["dpfbmc", "--experiment", "cfo", "--cfo", "-0.1,0.1"]).unwrap();
        assert_eq!(load_config(&m).unwrap().cfo, vec![-0.1, 0.1]);
    }
}
