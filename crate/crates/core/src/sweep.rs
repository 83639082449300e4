//! Experiment harness: sweep specifications, config-file parsing, linear
//! network geometry, parallel grid evaluation, and CSV/SVG emission.

use crate::error::Error;
use crate::model::{line_network, Combining, KnowledgeMode, NetworkConfig};
use crate::protocols::{job_seed, optimize_point, ProtocolKind};
use rayon::prelude::*;
use std::path::{Path, PathBuf};

/// Distances are clamped below at this value before gains are computed, so
/// coincident node positions stay finite.
pub const DISTANCE_FLOOR: f64 = 1e-3;

/// What the sweep varies.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SweepKind {
    /// Two relays at `r` and `1 - r` on the source-destination line.
    TwoRelayDistance,
    /// One relay at `r`.
    SingleRelayDistance,
    /// `N` equally spaced relays, `N` swept.
    RelayCount,
    /// Path loss exponent swept at fixed relay count.
    PathLoss,
    /// A single configuration.
    SinglePoint,
}

impl SweepKind {
    pub fn parse(name: &str) -> Result<Self, Error> {
        match name {
            "two-relay-distance" => Ok(SweepKind::TwoRelayDistance),
            "single-relay-distance" => Ok(SweepKind::SingleRelayDistance),
            "relay-count" => Ok(SweepKind::RelayCount),
            "path-loss" => Ok(SweepKind::PathLoss),
            "single-point" => Ok(SweepKind::SinglePoint),
            other => Err(Error::Domain(format!(
                "unknown sweep kind '{other}'; valid kinds: two-relay-distance, \
                 single-relay-distance, relay-count, path-loss, single-point"
            ))),
        }
    }

    pub fn name(&self) -> &'static str {
        match self {
            SweepKind::TwoRelayDistance => "two-relay-distance",
            SweepKind::SingleRelayDistance => "single-relay-distance",
            SweepKind::RelayCount => "relay-count",
            SweepKind::PathLoss => "path-loss",
            SweepKind::SinglePoint => "single-point",
        }
    }
}

/// Full description of one sweep run.
#[derive(Debug, Clone)]
pub struct SweepSpec {
    pub kind: SweepKind,
    pub start: f64,
    pub stop: f64,
    pub step: f64,
    /// Fixed relay position (single-point runs).
    pub r: f64,
    pub snr_db: f64,
    pub theta: f64,
    pub n_relays: usize,
    pub protocols: Vec<ProtocolKind>,
    pub combining: Combining,
    pub schedule: KnowledgeMode,
    pub normalize_power: bool,
    pub seed: u64,
    pub budget: usize,
}

impl SweepSpec {
    /// Per-kind defaults: 10 dB, path loss exponent 4, non-coherent.
    pub fn defaults(kind: SweepKind) -> Self {
        let (start, stop, step) = match kind {
            SweepKind::TwoRelayDistance => (-0.5, 0.5, 0.1),
            SweepKind::SingleRelayDistance => (-1.0, 1.0, 0.2),
            SweepKind::RelayCount => (0.0, 6.0, 1.0),
            SweepKind::PathLoss => (2.0, 6.0, 1.0),
            SweepKind::SinglePoint => (0.0, 0.0, 1.0),
        };
        SweepSpec {
            kind,
            start,
            stop,
            step,
            r: 0.5,
            snr_db: 10.0,
            theta: 4.0,
            n_relays: match kind {
                SweepKind::TwoRelayDistance => 2,
                _ => 1,
            },
            protocols: vec![
                ProtocolKind::SingleHop,
                ProtocolKind::Df,
                ProtocolKind::CutSet,
            ],
            combining: Combining::NonCoherent,
            schedule: KnowledgeMode::FixedSchedule,
            normalize_power: false,
            seed: 0,
            budget: 2000,
        }
    }

    pub fn validate(&self) -> Result<(), Error> {
        if !(self.step > 0.0) {
            return Err(Error::Domain(format!(
                "step {} must be positive",
                self.step
            )));
        }
        if self.protocols.is_empty() {
            return Err(Error::Domain("protocol list must not be empty".into()));
        }
        if !self.snr_db.is_finite() {
            return Err(Error::Domain("snr-db must be finite".into()));
        }
        if !(self.theta > 0.0) {
            return Err(Error::Domain("theta must be positive".into()));
        }
        if self.stop < self.start {
            return Err(Error::Domain("stop must not be below start".into()));
        }
        Ok(())
    }

    /// Grid of swept values.
    pub fn grid(&self) -> Vec<f64> {
        if self.kind == SweepKind::SinglePoint {
            return vec![self.r];
        }
        let mut xs = Vec::new();
        let mut i = 0usize;
        loop {
            let x = self.start + self.step * i as f64;
            if x > self.stop + 1e-9 {
                break;
            }
            xs.push(x);
            i += 1;
        }
        xs
    }

    /// Network at one grid value.
    pub fn network_at(&self, x: f64) -> NetworkConfig {
        let positions: Vec<f64> = match self.kind {
            SweepKind::TwoRelayDistance => vec![x, 1.0 - x],
            SweepKind::SingleRelayDistance | SweepKind::SinglePoint => {
                if self.n_relays == 2 {
                    vec![x, 1.0 - x]
                } else if self.n_relays == 0 {
                    vec![]
                } else {
                    vec![x]
                }
            }
            SweepKind::RelayCount => {
                let n = x.round().max(0.0) as usize;
                (1..=n).map(|i| i as f64 / (n + 1) as f64).collect()
            }
            SweepKind::PathLoss => {
                let n = self.n_relays;
                (1..=n).map(|i| i as f64 / (n + 1) as f64).collect()
            }
        };
        let theta = if self.kind == SweepKind::PathLoss {
            x
        } else {
            self.theta
        };
        line_network(
            &positions,
            theta,
            self.snr_db,
            self.combining,
            DISTANCE_FLOOR,
        )
    }
}

/// One evaluated grid point.
#[derive(Debug, Clone, PartialEq)]
pub struct SweepRow {
    pub r: f64,
    pub n: usize,
    pub theta: f64,
    pub snr_db: f64,
    pub protocol: String,
    pub schedule: String,
    pub combining: String,
    pub rate_bpcu: f64,
    pub binding: String,
    pub evals: usize,
    pub seed: u64,
}

/// Result table of a sweep, ordered by grid index then protocol.
#[derive(Debug, Clone, PartialEq)]
pub struct SweepTable {
    pub rows: Vec<SweepRow>,
}

pub const CSV_HEADER: &str =
    "r,N,theta,snr_db,protocol,schedule,combining,rate_bpcu,binding,evals,seed";

/// Parses a flat `key = value` config file into a sweep spec. Unknown keys
/// are rejected by name with their line number.
pub fn parse_config(text: &str, kind_default: Option<SweepKind>) -> Result<SweepSpec, Error> {
    let mut kind = kind_default;
    // First pass: find the kind so defaults are correct.
    for (idx, raw) in text.lines().enumerate() {
        let line = strip_comment(raw);
        if line.is_empty() {
            continue;
        }
        let (key, value) = split_kv(line, idx + 1)?;
        if key == "kind" {
            kind = Some(SweepKind::parse(value).map_err(|e| Error::Config {
                line: Some(idx + 1),
                message: e.to_string(),
            })?);
        }
    }
    let kind = kind.ok_or_else(|| Error::Config {
        line: None,
        message: "missing required key 'kind'".into(),
    })?;
    let mut spec = SweepSpec::defaults(kind);

    for (idx, raw) in text.lines().enumerate() {
        let lineno = idx + 1;
        let line = strip_comment(raw);
        if line.is_empty() {
            continue;
        }
        let (key, value) = split_kv(line, lineno)?;
        let err = |msg: String| Error::Config {
            line: Some(lineno),
            message: msg,
        };
        let parse_f64 = |v: &str, key: &str| -> Result<f64, Error> {
            v.parse::<f64>()
                .map_err(|_| err(format!("key '{key}': invalid number '{v}'")))
        };
        match key {
            "kind" => {}
            "start" => spec.start = parse_f64(value, key)?,
            "stop" => spec.stop = parse_f64(value, key)?,
            "step" => spec.step = parse_f64(value, key)?,
            "r" => spec.r = parse_f64(value, key)?,
            "snr-db" => spec.snr_db = parse_f64(value, key)?,
            "theta" => spec.theta = parse_f64(value, key)?,
            "n-relays" => {
                spec.n_relays = value
                    .parse::<usize>()
                    .map_err(|_| err(format!("key 'n-relays': invalid count '{value}'")))?;
            }
            "protocols" => {
                let mut list = Vec::new();
                for name in value.split(',') {
                    let name = name.trim();
                    if name.is_empty() {
                        continue;
                    }
                    list.push(ProtocolKind::parse(name).map_err(|e| err(e.to_string()))?);
                }
                spec.protocols = list;
            }
            "combining" => {
                spec.combining = match value {
                    "coherent" => Combining::Coherent,
                    "noncoherent" => Combining::NonCoherent,
                    other => {
                        return Err(err(format!(
                            "key 'combining': '{other}' is not one of coherent, noncoherent"
                        )))
                    }
                };
            }
            "schedule" => {
                spec.schedule = match value {
                    "fixed" => KnowledgeMode::FixedSchedule,
                    "random" => KnowledgeMode::RandomAccess,
                    other => {
                        return Err(err(format!(
                            "key 'schedule': '{other}' is not one of fixed, random"
                        )))
                    }
                };
            }
            "normalize-power" => {
                spec.normalize_power = match value {
                    "true" => true,
                    "false" => false,
                    other => {
                        return Err(err(format!(
                            "key 'normalize-power': '{other}' is not one of true, false"
                        )))
                    }
                };
            }
            "seed" => {
                spec.seed = value
                    .parse::<u64>()
                    .map_err(|_| err(format!("key 'seed': invalid integer '{value}'")))?;
            }
            "budget" => {
                spec.budget = value
                    .parse::<usize>()
                    .map_err(|_| err(format!("key 'budget': invalid integer '{value}'")))?;
            }
            unknown => {
                return Err(err(format!("unknown key '{unknown}'")));
            }
        }
    }
    spec.validate()?;
    Ok(spec)
}

fn strip_comment(line: &str) -> &str {
    match line.find('#') {
        Some(pos) => line[..pos].trim(),
        None => line.trim(),
    }
}

fn split_kv(line: &str, lineno: usize) -> Result<(&str, &str), Error> {
    let (k, v) = line.split_once('=').ok_or(Error::Config {
        line: Some(lineno),
        message: format!("expected 'key = value', got '{line}'"),
    })?;
    Ok((k.trim(), v.trim()))
}

/// Loads and parses a sweep config file.
pub fn load_config(path: &Path, kind_default: Option<SweepKind>) -> Result<SweepSpec, Error> {
    let text = std::fs::read_to_string(path)?;
    parse_config(&text, kind_default)
}

/// Runs every grid point for every protocol. Points are evaluated in
/// parallel; rows are ordered by grid index then protocol index, and a
/// failed point is recorded as a row with NaN rate rather than aborting the
/// sweep.
pub fn run_sweep(spec: &SweepSpec) -> Result<SweepTable, Error> {
    spec.validate()?;
    let grid = spec.grid();
    let jobs: Vec<(usize, f64, ProtocolKind)> = grid
        .iter()
        .enumerate()
        .flat_map(|(gi, &x)| {
            spec.protocols
                .iter()
                .enumerate()
                .map(move |(pi, &p)| (gi * spec.protocols.len() + pi, x, p))
        })
        .collect();
    let rows: Vec<SweepRow> = jobs
        .into_par_iter()
        .map(|(job_index, x, protocol)| {
            let network = spec.network_at(x);
            let schedule = if protocol.supports_random_schedule() {
                spec.schedule
            } else {
                KnowledgeMode::FixedSchedule
            };
            let seed = job_seed(spec.seed, job_index);
            let outcome = optimize_point(
                &network,
                protocol,
                schedule,
                spec.budget,
                seed,
                spec.normalize_power && protocol == ProtocolKind::SingleHop,
            );
            let (rate, binding, evals) = match outcome {
                Ok(res) => (res.rate, res.binding, res.evals),
                Err(e) => (f64::NAN, format!("error:{e}"), 0),
            };
            SweepRow {
                r: if spec.kind == SweepKind::RelayCount || spec.kind == SweepKind::PathLoss {
                    0.0
                } else {
                    x
                },
                n: network.num_relays,
                theta: network.path_loss_exponent,
                snr_db: spec.snr_db,
                protocol: protocol.name().to_string(),
                schedule: match schedule {
                    KnowledgeMode::FixedSchedule => "fixed".to_string(),
                    KnowledgeMode::RandomAccess => "random".to_string(),
                },
                combining: match spec.combining {
                    Combining::Coherent => "coherent".to_string(),
                    Combining::NonCoherent => "noncoherent".to_string(),
                },
                rate_bpcu: rate,
                binding,
                evals,
                seed,
            }
        })
        .collect();
    if rows.is_empty() {
        return Err(Error::Domain("sweep produced no grid points".into()));
    }
    Ok(SweepTable { rows })
}

/// Serializes the table with the fixed header; rates carry five decimals.
pub fn emit_csv(table: &SweepTable) -> String {
    let mut out = String::from(CSV_HEADER);
    out.push('\n');
    for row in &table.rows {
        out.push_str(&format!(
            "{:.5},{},{:.5},{:.5},{},{},{},{:.5},{},{},{}\n",
            row.r,
            row.n,
            row.theta,
            row.snr_db,
            row.protocol,
            row.schedule,
            row.combining,
            row.rate_bpcu,
            row.binding,
            row.evals,
            row.seed
        ));
    }
    out
}

/// Parses CSV produced by [`emit_csv`] back into a table (used for
/// round-trip checks and plotting).
pub fn parse_csv(text: &str) -> Result<SweepTable, Error> {
    let mut lines = text.lines();
    let header = lines
        .next()
        .ok_or_else(|| Error::Domain("empty csv".into()))?;
    if header != CSV_HEADER {
        return Err(Error::Domain(format!("unexpected csv header '{header}'")));
    }
    let mut rows = Vec::new();
    for (idx, line) in lines.enumerate() {
        if line.is_empty() {
            continue;
        }
        let f: Vec<&str> = line.split(',').collect();
        if f.len() != 11 {
            return Err(Error::Domain(format!(
                "csv line {} has {} fields",
                idx + 2,
                f.len()
            )));
        }
        let num = |s: &str| -> Result<f64, Error> {
            s.parse::<f64>()
                .map_err(|_| Error::Domain(format!("bad number '{s}'")))
        };
        rows.push(SweepRow {
            r: num(f[0])?,
            n: f[1]
                .parse()
                .map_err(|_| Error::Domain("bad relay count".into()))?,
            theta: num(f[2])?,
            snr_db: num(f[3])?,
            protocol: f[4].to_string(),
            schedule: f[5].to_string(),
            combining: f[6].to_string(),
            rate_bpcu: num(f[7])?,
            binding: f[8].to_string(),
            evals: f[9]
                .parse()
                .map_err(|_| Error::Domain("bad eval count".into()))?,
            seed: f[10]
                .parse()
                .map_err(|_| Error::Domain("bad seed".into()))?,
        });
    }
    Ok(SweepTable { rows })
}

/// Writes the CSV (and optionally an SVG plot) into `dir`; returns the paths
/// written.
pub fn emit_outputs(table: &SweepTable, dir: &Path, plot: bool) -> Result<Vec<PathBuf>, Error> {
    if table.rows.is_empty() {
        return Err(Error::Domain("refusing to emit an empty table".into()));
    }
    std::fs::create_dir_all(dir)?;
    let mut written = Vec::new();
    let csv_path = dir.join("sweep.csv");
    std::fs::write(&csv_path, emit_csv(table))?;
    written.push(csv_path);
    if plot {
        let svg_path = dir.join("sweep.svg");
        std::fs::write(&svg_path, render_svg(table))?;
        written.push(svg_path);
    }
    Ok(written)
}

const PALETTE: &[&str] = &[
    "#1f77b4", "#d62728", "#2ca02c", "#000000", "#9467bd", "#8c564b", "#e377c2",
];

/// Self-contained SVG line plot of rate versus the swept variable, one
/// series per (protocol, schedule) pair present in the table.
pub fn render_svg(table: &SweepTable) -> String {
    let (w, h) = (800.0, 500.0);
    let (ml, mr, mt, mb) = (70.0, 20.0, 20.0, 50.0);

    // The swept variable: prefer r when it varies, then N, then theta.
    let varies = |f: fn(&SweepRow) -> f64| {
        let first = f(&table.rows[0]);
        table.rows.iter().any(|r| (f(r) - first).abs() > 1e-12)
    };
    let (xpick, xlabel): (fn(&SweepRow) -> f64, &str) = if varies(|r| r.r) {
        (|r| r.r, "distance r")
    } else if varies(|r| r.n as f64) {
        (|r| r.n as f64, "number of relays N")
    } else if varies(|r| r.theta) {
        (|r| r.theta, "path loss exponent theta")
    } else {
        (|r| r.r, "distance r")
    };

    let mut series: Vec<(String, Vec<(f64, f64)>)> = Vec::new();
    for row in &table.rows {
        if !row.rate_bpcu.is_finite() {
            continue;
        }
        let key = format!("{} ({})", row.protocol, row.schedule);
        let pt = (xpick(row), row.rate_bpcu);
        match series.iter_mut().find(|(k, _)| *k == key) {
            Some((_, pts)) => pts.push(pt),
            None => series.push((key, vec![pt])),
        }
    }
    let xs: Vec<f64> = series
        .iter()
        .flat_map(|(_, pts)| pts.iter().map(|p| p.0))
        .collect();
    let ys: Vec<f64> = series
        .iter()
        .flat_map(|(_, pts)| pts.iter().map(|p| p.1))
        .collect();
    let (xmin, xmax) = bounds(&xs);
    let (ymin, ymax) = bounds(&ys);
    let sx = |x: f64| ml + (x - xmin) / (xmax - xmin).max(1e-12) * (w - ml - mr);
    let sy = |y: f64| h - mb - (y - ymin) / (ymax - ymin).max(1e-12) * (h - mt - mb);

    let mut svg = String::new();
    svg.push_str(&format!(
        "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"{w}\" height=\"{h}\" \
         viewBox=\"0 0 {w} {h}\">\n"
    ));
    svg.push_str("<rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n");
    svg.push_str(&format!(
        "<line x1=\"{ml}\" y1=\"{}\" x2=\"{}\" y2=\"{}\" stroke=\"black\"/>\n",
        h - mb,
        w - mr,
        h - mb
    ));
    svg.push_str(&format!(
        "<line x1=\"{ml}\" y1=\"{mt}\" x2=\"{ml}\" y2=\"{}\" stroke=\"black\"/>\n",
        h - mb
    ));
    for i in 0..=4 {
        let xv = xmin + (xmax - xmin) * i as f64 / 4.0;
        let yv = ymin + (ymax - ymin) * i as f64 / 4.0;
        svg.push_str(&format!(
            "<text x=\"{:.2}\" y=\"{:.2}\" font-size=\"12\" text-anchor=\"middle\">{:.2}</text>\n",
            sx(xv),
            h - mb + 18.0,
            xv
        ));
        svg.push_str(&format!(
            "<text x=\"{:.2}\" y=\"{:.2}\" font-size=\"12\" text-anchor=\"end\">{:.2}</text>\n",
            ml - 6.0,
            sy(yv) + 4.0,
            yv
        ));
    }
    svg.push_str(&format!(
        "<text x=\"{:.2}\" y=\"{:.2}\" font-size=\"13\" text-anchor=\"middle\">{xlabel}</text>\n",
        ml + (w - ml - mr) / 2.0,
        h - 12.0
    ));
    svg.push_str(&format!(
        "<text x=\"16\" y=\"{:.2}\" font-size=\"13\" transform=\"rotate(-90 16 {:.2})\" \
         text-anchor=\"middle\">rate (bpcu)</text>\n",
        mt + (h - mt - mb) / 2.0,
        mt + (h - mt - mb) / 2.0
    ));
    for (si, (name, pts)) in series.iter().enumerate() {
        let color = PALETTE[si % PALETTE.len()];
        let mut sorted = pts.clone();
        sorted.sort_by(|a, b| a.0.total_cmp(&b.0));
        let path: Vec<String> = sorted
            .iter()
            .map(|(x, y)| format!("{:.2},{:.2}", sx(*x), sy(*y)))
            .collect();
        svg.push_str(&format!(
            "<polyline fill=\"none\" stroke=\"{color}\" stroke-width=\"1.5\" \
             points=\"{}\"/>\n",
            path.join(" ")
        ));
        let ly = mt + 16.0 + 16.0 * si as f64;
        svg.push_str(&format!(
            "<line x1=\"{:.2}\" y1=\"{ly:.2}\" x2=\"{:.2}\" y2=\"{ly:.2}\" stroke=\"{color}\" \
             stroke-width=\"2\"/>\n",
            ml + 10.0,
            ml + 34.0
        ));
        svg.push_str(&format!(
            "<text x=\"{:.2}\" y=\"{:.2}\" font-size=\"12\">{name}</text>\n",
            ml + 40.0,
            ly + 4.0
        ));
    }
    svg.push_str("</svg>\n");
    svg
}

fn bounds(vals: &[f64]) -> (f64, f64) {
    let mut lo = f64::INFINITY;
    let mut hi = f64::NEG_INFINITY;
    for &v in vals {
        lo = lo.min(v);
        hi = hi.max(v);
    }
    if !lo.is_finite() || !hi.is_finite() {
        (0.0, 1.0)
    } else if hi - lo < 1e-9 {
        (lo - 0.5, hi + 0.5)
    } else {
        (lo, hi)
    }
}
