//! CSV result rows, per-cell summaries and plot-ready long tables.

use std::collections::BTreeMap;
use std::fs::OpenOptions;
use std::io::{Read, Write};
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::network::RunOutcome;
use crate::objective::ObjectiveKind;
use crate::scenario::{TopologyKind, TrafficClassName};

/// One run. Column order is fixed; absent values are empty fields.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ResultRow {
    pub scenario_id: String,
    pub topology: TopologyKind,
    pub objective: ObjectiveKind,
    pub rx_ratio: f64,
    pub node_count: usize,
    pub seed: u64,
    pub duration_s: f64,
    pub warmup_s: f64,
    pub convergence_s: Option<f64>,
    pub pdr_total: Option<f64>,
    pub pdr_high_critical: Option<f64>,
    pub pdr_critical: Option<f64>,
    pub pdr_low_critical: Option<f64>,
    pub pdr_temperature: Option<f64>,
    pub avg_power_mw: f64,
    pub total_energy_mj: f64,
    pub dio_count: u64,
    pub dis_count: u64,
    pub drops_no_route: u64,
    pub drops_mac: u64,
    pub drops_queue: u64,
    pub drops_ttl: u64,
}

pub const COLUMNS: [&str; 22] = [
    "scenario_id",
    "topology",
    "objective",
    "rx_ratio",
    "node_count",
    "seed",
    "duration_s",
    "warmup_s",
    "convergence_s",
    "pdr_total",
    "pdr_high_critical",
    "pdr_critical",
    "pdr_low_critical",
    "pdr_temperature",
    "avg_power_mw",
    "total_energy_mj",
    "dio_count",
    "dis_count",
    "drops_no_route",
    "drops_mac",
    "drops_queue",
    "drops_ttl",
];

impl ResultRow {
    pub fn from_outcome(out: &RunOutcome) -> Self {
        let cfg = &out.config;
        let r = &out.report;
        let drops = r.total().drops;
        ResultRow {
            scenario_id: cfg.scenario_id(),
            topology: cfg.topology,
            objective: cfg.objective,
            rx_ratio: cfg.rx_success_ratio,
            node_count: cfg.node_count,
            seed: cfg.seed,
            duration_s: cfg.duration,
            warmup_s: cfg.warmup,
            convergence_s: r.convergence_time.map(|t| t.as_secs_f64()),
            pdr_total: r.pdr_total(),
            pdr_high_critical: r.pdr(TrafficClassName::HighCritical),
            pdr_critical: r.pdr(TrafficClassName::Critical),
            pdr_low_critical: r.pdr(TrafficClassName::LowCritical),
            pdr_temperature: r.pdr(TrafficClassName::Temperature),
            avg_power_mw: r.avg_power_mw,
            total_energy_mj: r.total_energy_mj,
            dio_count: r.dio_count,
            dis_count: r.dis_count,
            drops_no_route: drops.no_route,
            drops_mac: drops.mac_failure,
            drops_queue: drops.queue_overflow,
            drops_ttl: drops.ttl,
        }
    }
}

pub fn write_rows<W: Write, T: Serialize>(rows: &[T], out: W, header: bool) -> csv::Result<()> {
    let mut w = csv::WriterBuilder::new()
        .has_headers(header)
        .from_writer(out);
    for row in rows {
        w.serialize(row)?;
    }
    w.flush()?;
    Ok(())
}

/// Appends rows to `path`, writing the header only when the file is new or
/// empty.
pub fn append_rows(path: &Path, rows: &[ResultRow]) -> csv::Result<()> {
    let fresh = std::fs::metadata(path)
        .map(|m| m.len() == 0)
        .unwrap_or(true);
    let file = OpenOptions::new().create(true).append(true).open(path)?;
    write_rows(rows, file, fresh)
}

pub fn read_rows<R: Read>(input: R) -> csv::Result<Vec<ResultRow>> {
    csv::Reader::from_reader(input).deserialize().collect()
}

/// Aggregate of one (topology, objective, rx, node_count) cell.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SummaryRow {
    pub topology: TopologyKind,
    pub objective: ObjectiveKind,
    pub rx_ratio: f64,
    pub node_count: usize,
    pub runs: usize,
    pub pdr_mean: Option<f64>,
    pub pdr_stddev: Option<f64>,
    pub power_mean_mw: f64,
    pub power_stddev_mw: f64,
}

/// Sample mean and standard deviation (n − 1 denominator; zero for one value).
pub fn mean_stddev(values: &[f64]) -> Option<(f64, f64)> {
    if values.is_empty() {
        return None;
    }
    let n = values.len() as f64;
    let mean = values.iter().sum::<f64>() / n;
    let sd = if values.len() < 2 {
        0.0
    } else {
        (values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (n - 1.0)).sqrt()
    };
    Some((mean, sd))
}

type CellKey = (TopologyKind, ObjectiveKind, u64, usize);

fn cell_key(r: &ResultRow) -> CellKey {
    (r.topology, r.objective, r.rx_ratio.to_bits(), r.node_count)
}

/// One summary row per cell, sorted by topology, objective, rx and node count.
pub fn summarize(rows: &[ResultRow]) -> Vec<SummaryRow> {
    let mut cells: BTreeMap<CellKey, Vec<&ResultRow>> = BTreeMap::new();
    for r in rows {
        cells.entry(cell_key(r)).or_default().push(r);
    }
    let mut out: Vec<SummaryRow> = cells
        .into_values()
        .map(|group| {
            let first = group[0];
            let pdrs: Vec<f64> = group.iter().filter_map(|r| r.pdr_total).collect();
            let powers: Vec<f64> = group.iter().map(|r| r.avg_power_mw).collect();
            let pdr = mean_stddev(&pdrs);
            let (pm, ps) = mean_stddev(&powers).expect("cells are never empty");
            SummaryRow {
                topology: first.topology,
                objective: first.objective,
                rx_ratio: first.rx_ratio,
                node_count: first.node_count,
                runs: group.len(),
                pdr_mean: pdr.map(|p| p.0),
                pdr_stddev: pdr.map(|p| p.1),
                power_mean_mw: pm,
                power_stddev_mw: ps,
            }
        })
        .collect();
    out.sort_by(|a, b| {
        (a.topology, a.objective, a.node_count)
            .cmp(&(b.topology, b.objective, b.node_count))
            .then(a.rx_ratio.total_cmp(&b.rx_ratio))
    });
    out
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Figure {
    Pdr,
    Power,
}

impl std::str::FromStr for Figure {
    type Err = String;
    fn from_str(s: &str) -> Result<Self, String> {
        match s {
            "pdr" => Ok(Figure::Pdr),
            "power" => Ok(Figure::Power),
            other => Err(format!("unknown figure `{other}` (expected pdr or power)")),
        }
    }
}

/// Long-format point: one metric value per (series, node_count).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PlotPoint {
    pub figure: Figure,
    pub topology: TopologyKind,
    pub rx_ratio: f64,
    pub objective: ObjectiveKind,
    pub node_count: usize,
    pub mean: Option<f64>,
    pub stddev: Option<f64>,
    pub runs: usize,
}

pub fn plot_data(rows: &[ResultRow], figure: Figure) -> Vec<PlotPoint> {
    let mut points: Vec<PlotPoint> = summarize(rows)
        .into_iter()
        .map(|s| {
            let (mean, stddev) = match figure {
                Figure::Pdr => (s.pdr_mean, s.pdr_stddev),
                Figure::Power => (Some(s.power_mean_mw), Some(s.power_stddev_mw)),
            };
            PlotPoint {
                figure,
                topology: s.topology,
                rx_ratio: s.rx_ratio,
                objective: s.objective,
                node_count: s.node_count,
                mean,
                stddev,
                runs: s.runs,
            }
        })
        .collect();
    points.sort_by(|a, b| {
        a.topology
            .cmp(&b.topology)
            .then(a.rx_ratio.total_cmp(&b.rx_ratio))
            .then(a.objective.cmp(&b.objective))
            .then(a.node_count.cmp(&b.node_count))
    });
    points
}

#[cfg(test)]
mod tests {
    use super::*;

    fn row(obj: ObjectiveKind, n: usize, seed: u64, pdr: Option<f64>, power: f64) -> ResultRow {
        ResultRow {
            scenario_id: format!("x-{n}-{seed}"),
            topology: TopologyKind::Grid,
            objective: obj,
            rx_ratio: 0.8,
            node_count: n,
            seed,
            duration_s: 900.0,
            warmup_s: 60.0,
            convergence_s: None,
            pdr_total: pdr,
            pdr_high_critical: pdr,
            pdr_critical: None,
            pdr_low_critical: None,
            pdr_temperature: None,
            avg_power_mw: power,
            total_energy_mj: 1.0,
            dio_count: 1,
            dis_count: 2,
            drops_no_route: 0,
            drops_mac: 0,
            drops_queue: 0,
            drops_ttl: 0,
        }
    }

    #[test]
    fn header_matches_column_order() {
        let mut buf = Vec::new();
        write_rows(
            &[row(ObjectiveKind::Of0, 20, 1, Some(0.5), 0.2)],
            &mut buf,
            true,
        )
        .unwrap();
        let text = String::from_utf8(buf).unwrap();
        let header = text.lines().next().unwrap();
        assert_eq!(header, COLUMNS.join(","));
        let second = text.lines().nth(1).unwrap();
        assert!(second.contains(",,"), "absent values are empty: {second}");
    }

    #[test]
    fn rows_round_trip() {
        let rows = vec![
            row(ObjectiveKind::Of0, 20, 1, Some(0.5), 0.2),
            row(ObjectiveKind::Etx, 40, 2, None, 0.3),
        ];
        let mut buf = Vec::new();
        write_rows(&rows, &mut buf, true).unwrap();
        assert_eq!(read_rows(&buf[..]).unwrap(), rows);
    }

    #[test]
    fn summary_mean_is_row_mean() {
        let rows: Vec<ResultRow> = (0..3)
            .map(|s| row(ObjectiveKind::Of0, 20, s, Some(0.5 + s as f64 * 0.1), 0.2))
            .collect();
        let s = summarize(&rows);
        assert_eq!(s.len(), 1);
        assert_eq!(s[0].runs, 3);
        assert!((s[0].pdr_mean.unwrap() - 0.6).abs() < 1e-12);
        assert!((s[0].pdr_stddev.unwrap() - 0.1).abs() < 1e-12);
        assert!(s[0].power_stddev_mw.abs() < 1e-12);
    }

    #[test]
    fn plot_points_per_objective_and_size() {
        let rows = vec![
            row(ObjectiveKind::Of0, 20, 1, Some(0.9), 0.2),
            row(ObjectiveKind::Of0, 40, 1, Some(0.8), 0.2),
            row(ObjectiveKind::Etx, 20, 1, Some(0.7), 0.3),
        ];
        let pts = plot_data(&rows, Figure::Power);
        assert_eq!(pts.len(), 3);
        assert!(pts.iter().all(|p| p.figure == Figure::Power));
        assert_eq!(pts[0].objective, ObjectiveKind::Of0);
        assert_eq!(pts[0].node_count, 20);
    }
}
