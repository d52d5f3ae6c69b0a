use std::fs::{self, File};
use std::io::BufWriter;
use std::path::{Path, PathBuf};

use igabem::adaptivity::{adaptive_loop, default_window, fit_slope, AdaptiveRunLog, LevelRecord};
use serde::Serialize;

use crate::config::RunConfig;
use crate::Failure;

pub const RUNLOG: &str = "runlog.csv";
pub const KNOTS: &str = "knots.json";
pub const SUMMARY: &str = "summary.json";
pub const INDICATORS: &str = "indicators";

#[derive(Debug, Serialize)]
struct Row {
    level: usize,
    #[serde(rename = "N")]
    n: usize,
    eta: f64,
    error_proxy: Option<f64>,
    kappa: f64,
    seconds: f64,
}

impl From<&LevelRecord> for Row {
    fn from(l: &LevelRecord) -> Self {
        Row {
            level: l.level,
            n: l.n,
            eta: l.eta,
            error_proxy: l.error_proxy,
            kappa: l.kappa,
            seconds: l.seconds,
        }
    }
}

#[derive(Debug, Serialize)]
struct Summary<'a> {
    config: &'a RunConfig,
    levels: usize,
    #[serde(rename = "final_N")]
    final_n: usize,
    final_eta: f64,
    kappa0: f64,
    max_kappa: f64,
    slope: Option<f64>,
    slope_window: usize,
    proxy_slope: Option<f64>,
    /// max/min of error_proxy/eta over the slope window.
    proxy_ratio_spread: Option<f64>,
}

fn io_err(path: &Path, e: impl std::fmt::Display) -> Failure {
    Failure::Io(format!("{}: {e}", path.display()))
}

fn write_json(path: &Path, value: &impl Serialize) -> Result<(), Failure> {
    let f = File::create(path).map_err(|e| io_err(path, e))?;
    serde_json::to_writer_pretty(BufWriter::new(f), value).map_err(|e| io_err(path, e))
}

fn write_indicators(dir: &Path, l: &LevelRecord) -> Result<(), Failure> {
    let Some(ind) = &l.indicators else { return Ok(()) };
    let path = dir.join(format!("level_{:03}.csv", l.level));
    let mut w = csv::Writer::from_path(&path).map_err(|e| io_err(&path, e))?;
    w.write_record(["node", "param", "value"]).map_err(|e| io_err(&path, e))?;
    for (i, (t, v)) in ind.rows().enumerate() {
        w.serialize((i, t, v)).map_err(|e| io_err(&path, e))?;
    }
    w.flush().map_err(|e| io_err(&path, e))
}

pub struct RunOptions {
    pub out: PathBuf,
    pub with_error_proxy: bool,
    pub dump_indicators: bool,
}

/// Runs the adaptive loop and writes all artifacts to `opts.out`.
pub fn cmd_run(config: &RunConfig, opts: &RunOptions) -> Result<AdaptiveRunLog, Failure> {
    let (problem, cfg) = config
        .resolve(opts.with_error_proxy, opts.dump_indicators)
        .map_err(Failure::Config)?;
    fs::create_dir_all(&opts.out).map_err(|e| io_err(&opts.out, e))?;
    let ind_dir = opts.out.join(INDICATORS);
    if opts.dump_indicators {
        fs::create_dir_all(&ind_dir).map_err(|e| io_err(&ind_dir, e))?;
    }
    let log_path = opts.out.join(RUNLOG);
    let mut csv = csv::Writer::from_path(&log_path).map_err(|e| io_err(&log_path, e))?;
    let mut pending: Option<Failure> = None;
    let result = adaptive_loop(&problem, &cfg, |l| {
        if pending.is_some() {
            return;
        }
        let r = csv
            .serialize(Row::from(l))
            .and_then(|_| csv.flush().map_err(csv::Error::from))
            .map_err(|e| io_err(&log_path, e))
            .and_then(|_| write_indicators(&ind_dir, l));
        if let Err(e) = r {
            pending = Some(e);
        }
        eprintln!("level {:3}  N = {:5}  eta = {:.4e}  ({:.1} s)", l.level, l.n, l.eta, l.seconds);
    });
    if let Some(e) = pending {
        return Err(e);
    }
    let log = result.map_err(|e| Failure::Numerical(e.to_string()))?;
    write_json(&opts.out.join(KNOTS), &log.final_knots)?;

    let ns: Vec<f64> = log.levels.iter().map(|l| l.n as f64).collect();
    let etas = log.etas();
    let k = config.slope_window.unwrap_or_else(|| default_window(&ns)).min(ns.len());
    let from = ns.len() - k;
    let proxies: Option<Vec<f64>> = log.levels[from..].iter().map(|l| l.error_proxy).collect();
    let ratios = proxies.as_ref().map(|p| p.iter().zip(&etas[from..]).map(|(a, b)| a / b).collect::<Vec<_>>());
    let summary = Summary {
        config,
        levels: log.levels.len(),
        final_n: *log.ns().last().unwrap_or(&0),
        final_eta: *etas.last().unwrap_or(&f64::NAN),
        kappa0: log.kappa0,
        max_kappa: log.levels.iter().map(|l| l.kappa).fold(0.0, f64::max),
        slope: fit_slope(&ns[from..], &etas[from..]),
        slope_window: k,
        proxy_slope: proxies.as_ref().and_then(|p| fit_slope(&ns[from..], p)),
        proxy_ratio_spread: ratios.map(|r| {
            r.iter().cloned().fold(f64::MIN, f64::max) / r.iter().cloned().fold(f64::MAX, f64::min)
        }),
    };
    write_json(&opts.out.join(SUMMARY), &summary)?;
    Ok(log)
}
