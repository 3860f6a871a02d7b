use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};

use anyhow::{bail, Context, Result};
use clap::{Arg, ArgAction, ArgMatches, Command};

use hidegl::data::{gen_three_moon, write_csv, write_libsvm, ThreeMoonSpec};
use hidegl::graph::spectral_diagnostics;
use hidegl_cli::config::{PARAM_KEYS, RUN_KEYS};
use hidegl_cli::{bench, RawConfig};

const CONFIG_HELP: &str = "\
Config files hold one `key = value` per line; `#` starts a comment.
Every key can also be given as a flag of the same name (`--sigma 0.2`),
which overrides the file. Hyperparameters accept comma-separated lists for
`grid`. AGR's regularization weight is `gamma`; it takes the place of
lambda2 in the reduced solver.

The master seed comes from --seed, then HIDEGL_SEED, then the file.";

fn key_args() -> Vec<Arg> {
    PARAM_KEYS
        .iter()
        .chain(RUN_KEYS.iter().filter(|&&k| k != "seed"))
        .chain(std::iter::once(&"cache_dir"))
        .map(|&k| Arg::new(k).long(k).value_name("VALUE").help_heading("Config overrides"))
        .collect()
}

fn config_command(name: &'static str, about: &'static str) -> Command {
    Command::new(name)
        .about(about)
        .after_help(CONFIG_HELP)
        .arg(
            Arg::new("config")
                .long("config")
                .value_name("FILE")
                .value_parser(clap::value_parser!(PathBuf)),
        )
        .arg(
            Arg::new("seed")
                .long("seed")
                .env("HIDEGL_SEED")
                .value_name("SEED")
                .help("Master seed for label draws and initialization"),
        )
        .args(key_args())
}

fn cli() -> Command {
    Command::new("hidegl")
        .about("Semi-supervised learning on high-dense points and spanning trees")
        .version(env!("CARGO_PKG_VERSION"))
        .subcommand_required(true)
        .subcommand(
            Command::new("gen-threemoon")
                .about("Write the three-moon dataset (CSV when the path ends in .csv, LIBSVM otherwise)")
                .arg(Arg::new("out").long("out").required(true).value_parser(clap::value_parser!(PathBuf)))
                .arg(Arg::new("seed").long("seed").env("HIDEGL_SEED").value_parser(clap::value_parser!(u64)))
                .arg(Arg::new("n_per_class").long("n_per_class").value_parser(clap::value_parser!(usize)))
                .arg(Arg::new("ambient_dim").long("ambient_dim").value_parser(clap::value_parser!(usize)))
                .arg(Arg::new("noise_sd").long("noise_sd").value_parser(clap::value_parser!(f64))),
        )
        .subcommand(config_command("bench", "Evaluate one configuration over repeated label draws"))
        .subcommand(
            config_command("grid", "Search hyperparameter lists and report the best configuration").arg(
                Arg::new("best_config")
                    .long("best_config")
                    .value_name("FILE")
                    .value_parser(clap::value_parser!(PathBuf))
                    .help("Write the winning configuration as a config file"),
            ),
        )
        .subcommand(
            config_command("diagnose", "Dense spectral checks of a fitted graph (small problems only)").arg(
                Arg::new("quiet")
                    .long("quiet")
                    .action(ArgAction::SetTrue)
                    .help("Only set the exit status"),
            ),
        )
}

fn raw_config(m: &ArgMatches) -> Result<RawConfig> {
    let mut raw = match m.get_one::<PathBuf>("config") {
        Some(p) => RawConfig::load(p)?,
        None => RawConfig::default(),
    };
    for key in PARAM_KEYS.iter().chain(RUN_KEYS.iter()).chain(std::iter::once(&"cache_dir")) {
        if let Some(v) = m.get_one::<String>(key) {
            raw.set(key, v)?;
        }
    }
    Ok(raw)
}

fn write_out(path: Option<&Path>, text: &str) -> Result<()> {
    match path {
        Some(p) => std::fs::write(p, text).with_context(|| format!("writing {}", p.display())),
        None => {
            println!("{text}");
            Ok(())
        }
    }
}

fn main() -> Result<()> {
    match cli().get_matches().subcommand() {
        Some(("gen-threemoon", m)) => {
            let mut spec = ThreeMoonSpec::default();
            if let Some(&s) = m.get_one::<u64>("seed") {
                spec.seed = s;
            }
            if let Some(&v) = m.get_one::<usize>("n_per_class") {
                spec.n_per_class = v;
            }
            if let Some(&v) = m.get_one::<usize>("ambient_dim") {
                spec.ambient_dim = v;
            }
            if let Some(&v) = m.get_one::<f64>("noise_sd") {
                spec.noise_sd = v;
            }
            let out: &PathBuf = m.get_one("out").expect("required");
            let ds = gen_three_moon(&spec)?;
            let mut w = BufWriter::new(File::create(out).with_context(|| format!("creating {}", out.display()))?);
            if out.extension().is_some_and(|e| e == "csv") {
                write_csv(&ds, &mut w)?;
            } else {
                write_libsvm(&ds, &mut w)?;
            }
            w.flush()?;
        }
        Some(("bench", m)) => {
            let cfg = raw_config(m)?.to_run_config()?;
            let report = bench::run_bench(&cfg)?;
            if cfg.output.is_none() {
                println!("{}", report.to_json()?);
            }
            report.save(&cfg)?;
        }
        Some(("grid", m)) => {
            let raw = raw_config(m)?;
            let grid = bench::grid_search_raw(&raw)?;
            if let Some(p) = m.get_one::<PathBuf>("best_config") {
                std::fs::write(p, grid.best.to_config_text())?;
            }
            let json = serde_json::to_string_pretty(&grid)?;
            write_out(grid.best.output.as_deref(), &json)?;
            if let Some(p) = &grid.best.csv_output {
                grid.best_report.write_csv(BufWriter::new(File::create(p)?))?;
            }
            eprintln!(
                "best score {:.2} over {} cells:\n{}",
                grid.best_report.score(),
                grid.cells.len(),
                grid.best.to_config_text()
            );
        }
        Some(("diagnose", m)) => {
            let cfg = raw_config(m)?.to_run_config()?;
            let factor = bench::fit_hidegl_factor(&cfg)?;
            let report = spectral_diagnostics(&factor)?;
            if !m.get_flag("quiet") {
                write_out(cfg.output.as_deref(), &serde_json::to_string_pretty(&report)?)?;
            }
            if !report.all_pass {
                bail!("spectral checks failed");
            }
        }
        _ => unreachable!("subcommand_required"),
    }
    Ok(())
}
