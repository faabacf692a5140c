//! Seeded batch execution and CSV output.

use std::collections::HashMap;
use std::io::Write;
use std::path::Path;
use std::time::Instant;

use irs_secrecy::pipeline::{stage_one, stage_two, Placement, SchemeTag};
use rayon::prelude::*;

use crate::config::{ConfigError, RunConfig};

pub const CSV_HEADER: [&str; 11] = [
    "sweep_value",
    "scheme",
    "seed",
    "rate_bits",
    "omega_i_x",
    "omega_i_y",
    "eve_x",
    "eve_y",
    "outage_hat",
    "iters",
    "wall_ms",
];

/// One `(sweep value, scheme, seed)` run. Failed runs keep their error and
/// carry NaN in the numeric fields.
#[derive(Clone, Debug, PartialEq)]
pub struct Row {
    pub sweep_value: f64,
    pub scheme: SchemeTag,
    pub seed: u64,
    pub rate_bits: f64,
    pub omega_i: [f64; 2],
    pub eve: [f64; 2],
    pub outage_hat: f64,
    /// AO rounds (0 for closed-form designs).
    pub iters: usize,
    pub wall_ms: u64,
    pub error: Option<String>,
}

#[derive(Clone, Debug, PartialEq)]
pub struct Summary {
    pub sweep_value: f64,
    pub scheme: SchemeTag,
    pub n: usize,
    pub failures: usize,
    pub mean_rate: f64,
    pub std_err: f64,
}

#[derive(Clone, Debug, Default)]
pub struct SweepResults {
    pub rows: Vec<Row>,
    pub summary: Vec<Summary>,
}

impl SweepResults {
    pub fn summary_for(&self, value: f64, scheme: SchemeTag) -> Option<&Summary> {
        self.summary.iter().find(|s| s.sweep_value == value && s.scheme == scheme)
    }

    pub fn failures(&self) -> usize {
        self.rows.iter().filter(|r| r.error.is_some()).count()
    }
}

/// Mean and standard error of the mean.
pub fn mean_se(xs: &[f64]) -> (f64, f64) {
    let n = xs.len();
    if n == 0 {
        return (f64::NAN, f64::NAN);
    }
    let m = xs.iter().sum::<f64>() / n as f64;
    if n < 2 {
        return (m, 0.0);
    }
    let var = xs.iter().map(|x| (x - m).powi(2)).sum::<f64>() / (n - 1) as f64;
    (m, (var / n as f64).sqrt())
}

fn failed_row(value: f64, scheme: SchemeTag, seed: u64, err: String) -> Row {
    Row {
        sweep_value: value,
        scheme,
        seed,
        rate_bits: f64::NAN,
        omega_i: [f64::NAN; 2],
        eve: [f64::NAN; 2],
        outage_hat: f64::NAN,
        iters: 0,
        wall_ms: 0,
        error: Some(err),
    }
}

/// Run every `(sweep value, scheme, seed)` cell. Seed-independent stage-1
/// placements are computed once per `(value, scheme)`; cells run on the rayon
/// pool and rows come back in sweep, scheme, seed order.
pub fn run_sweep(config: &RunConfig) -> Result<SweepResults, ConfigError> {
    config.validate()?;
    let schemes = config.scheme_tags()?;
    let settings = config.settings();
    let seeds = config.seeds();
    let values = config.sweep_values();
    let params: Vec<_> = values.iter().map(|&v| config.params_at(v)).collect::<Result<_, _>>()?;

    let shared: Vec<(usize, SchemeTag)> = (0..values.len())
        .flat_map(|i| schemes.iter().filter(|s| !s.random_placement()).map(move |&s| (i, s)))
        .collect();
    let placements: HashMap<(usize, SchemeTag), Result<(Placement, u64), String>> = shared
        .par_iter()
        .map(|&(i, s)| {
            let t = Instant::now();
            let r = stage_one(&params[i], s, config.seed, &settings)
                .map(|p| (p, t.elapsed().as_millis() as u64))
                .map_err(|e| e.to_string());
            ((i, s), r)
        })
        .collect();

    let mut jobs: Vec<(usize, SchemeTag, u64)> = Vec::new();
    for i in 0..values.len() {
        for &s in &schemes {
            jobs.extend(seeds.iter().map(|&seed| (i, s, seed)));
        }
    }
    let rows: Vec<Row> = jobs
        .par_iter()
        .map(|&(i, scheme, seed)| {
            let t = Instant::now();
            let p = &params[i];
            let (placement, stage1_ms) = match placements.get(&(i, scheme)) {
                Some(Ok((pl, ms))) => (pl.clone(), *ms),
                Some(Err(e)) => return failed_row(values[i], scheme, seed, e.clone()),
                None => match stage_one(p, scheme, seed, &settings) {
                    Ok(pl) => (pl, 0),
                    Err(e) => return failed_row(values[i], scheme, seed, e.to_string()),
                },
            };
            match stage_two(p, &placement, scheme, seed, &settings) {
                Ok(r) => Row {
                    sweep_value: values[i],
                    scheme,
                    seed,
                    rate_bits: r.stage2.rate,
                    omega_i: [r.placement.result.omega_i.x, r.placement.result.omega_i.y],
                    eve: [r.placement.eve_loc.x, r.placement.eve_loc.y],
                    outage_hat: r.empirical_outage.p_hat,
                    iters: r.stage2.trace.len() - 1,
                    wall_ms: if config.timing {
                        t.elapsed().as_millis() as u64 + stage1_ms
                    } else {
                        0
                    },
                    error: None,
                },
                Err(e) => failed_row(values[i], scheme, seed, e.to_string()),
            }
        })
        .collect();

    let mut summary = Vec::new();
    for &v in &values {
        for &s in &schemes {
            let cell: Vec<&Row> = rows.iter().filter(|r| r.sweep_value == v && r.scheme == s).collect();
            let ok: Vec<f64> = cell.iter().filter(|r| r.error.is_none()).map(|r| r.rate_bits).collect();
            let (mean_rate, std_err) = mean_se(&ok);
            summary.push(Summary {
                sweep_value: v,
                scheme: s,
                n: ok.len(),
                failures: cell.len() - ok.len(),
                mean_rate,
                std_err,
            });
        }
    }
    Ok(SweepResults { rows, summary })
}

/// Write `rows` as CSV with the fixed column order of [`CSV_HEADER`].
pub fn write_csv<W: Write>(rows: &[Row], out: W) -> csv::Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(CSV_HEADER)?;
    for r in rows {
        w.write_record([
            r.sweep_value.to_string(),
            r.scheme.to_string(),
            r.seed.to_string(),
            r.rate_bits.to_string(),
            r.omega_i[0].to_string(),
            r.omega_i[1].to_string(),
            r.eve[0].to_string(),
            r.eve[1].to_string(),
            r.outage_hat.to_string(),
            r.iters.to_string(),
            r.wall_ms.to_string(),
        ])?;
    }
    w.flush()?;
    Ok(())
}

pub fn emit_csv(results: &SweepResults, path: &Path) -> csv::Result<()> {
    let f = std::fs::File::create(path)?;
    write_csv(&results.rows, std::io::BufWriter::new(f))
}

/// Parse a file written by [`emit_csv`]. Error messages are not stored in
/// the CSV, so `error` is `None` on every returned row.
pub fn read_csv(path: &Path) -> Result<Vec<Row>, Box<dyn std::error::Error>> {
    let mut r = csv::Reader::from_path(path)?;
    let header: Vec<String> = r.headers()?.iter().map(String::from).collect();
    if header != CSV_HEADER {
        return Err(format!("unexpected header {header:?}").into());
    }
    let mut rows = Vec::new();
    for rec in r.records() {
        let rec = rec?;
        let f = |i: usize| rec[i].parse::<f64>();
        rows.push(Row {
            sweep_value: f(0)?,
            scheme: rec[1].parse()?,
            seed: rec[2].parse()?,
            rate_bits: f(3)?,
            omega_i: [f(4)?, f(5)?],
            eve: [f(6)?, f(7)?],
            outage_hat: f(8)?,
            iters: rec[9].parse()?,
            wall_ms: rec[10].parse()?,
            error: None,
        });
    }
    Ok(rows)
}
