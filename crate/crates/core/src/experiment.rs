// SPDX-License-Identifier: Apache-2.0

//! Repeated runs, aggregate statistics and paired summary tables.

use std::collections::BTreeMap;
use std::fmt::Write as _;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::engine::{RunOutput, Simulator};
use crate::error::{Error, Result};
use crate::metrics::{FlowSelector, MetricsReport, Query};
use crate::model::SimTime;
use crate::scenario::ScenarioFile;
use crate::traffic::FlowKind;

/// Mean and sample standard deviation (n - 1 denominator).
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Stat {
    pub mean: f64,
    pub stddev: f64,
    pub n: usize,
}

impl Stat {
    pub fn of(xs: &[f64]) -> Stat {
        let n = xs.len();
        if n == 0 {
            return Stat {
                mean: f64::NAN,
                stddev: f64::NAN,
                n,
            };
        }
        let mean = xs.iter().sum::<f64>() / n as f64;
        let stddev = if n < 2 {
            0.0
        } else {
            (xs.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (n - 1) as f64).sqrt()
        };
        Stat { mean, stddev, n }
    }
}

impl std::fmt::Display for Stat {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        if self.mean.abs() >= 10.0 {
            write!(f, "{:.1} ± {:.1}", self.mean, self.stddev)
        } else {
            write!(f, "{:.3} ± {:.3}", self.mean, self.stddev)
        }
    }
}

/// Whether a larger value of a metric is an improvement.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Polarity {
    HigherIsBetter,
    LowerIsBetter,
}

/// Scalar metrics extracted from every run, with display labels.
pub const METRICS: &[(&str, &str, Polarity)] = &[
    ("received_bytes", "Received data [B]", Polarity::HigherIsBetter),
    ("lost_packets", "Lost packets (window)", Polarity::LowerIsBetter),
    ("drop_ratio", "Drop ratio", Polarity::LowerIsBetter),
    ("dropped_packets", "Dropped packets (run)", Polarity::LowerIsBetter),
    ("delay_avg_ms", "Avg. delay [ms]", Polarity::LowerIsBetter),
    ("delay_min_ms", "Min. delay [ms]", Polarity::LowerIsBetter),
    ("delay_max_ms", "Max. delay [ms]", Polarity::LowerIsBetter),
    ("voip_min_bitrate_kbps", "VoIP min. bitrate [kbit/s]", Polarity::HigherIsBetter),
    ("voip_max_bitrate_kbps", "VoIP max. bitrate [kbit/s]", Polarity::HigherIsBetter),
    ("voip_avg_delay_ms", "VoIP avg. delay [ms]", Polarity::LowerIsBetter),
    ("voip_max_delay_ms", "VoIP max. delay [ms]", Polarity::LowerIsBetter),
    ("voip_max_loss_pps", "VoIP max. loss rate [pkt/s]", Polarity::LowerIsBetter),
];

pub fn polarity(metric: &str) -> Option<Polarity> {
    METRICS.iter().find(|m| m.0 == metric).map(|m| m.2)
}

fn label(metric: &str) -> &str {
    METRICS.iter().find(|m| m.0 == metric).map_or(metric, |m| m.1)
}

/// Per-run scalars.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RunSummary {
    pub seed: u64,
    pub metrics: BTreeMap<String, f64>,
    pub conserved: bool,
    pub event_count: u64,
    pub event_log_sha256: String,
}

/// Extracts the scalar metrics of one report. VoIP metrics appear only when
/// the run carries a VoIP flow; they skip the first and last second, which
/// are partial.
pub fn summarize(report: &MetricsReport, seed: u64) -> Result<RunSummary> {
    let mut m = BTreeMap::new();
    let w = report.collect(Query::window(report, FlowSelector::All))?;
    m.insert("received_bytes".into(), w.received_bytes as f64);
    m.insert("lost_packets".into(), w.lost as f64);
    m.insert("drop_ratio".into(), w.drop_ratio);
    m.insert("dropped_packets".into(), report.totals.dropped_total() as f64);
    let ms = |us: f64| us / 1e3;
    if let Some(v) = w.delay_avg_us {
        m.insert("delay_avg_ms".into(), ms(v));
    }
    if let Some(v) = w.delay_min_us {
        m.insert("delay_min_ms".into(), ms(v as f64));
    }
    if let Some(v) = w.delay_max_us {
        m.insert("delay_max_ms".into(), ms(v as f64));
    }
    if report.flows.iter().any(|f| f.kind == FlowKind::Voip) && report.duration > SimTime::from_secs(2) {
        let v = report.collect(Query {
            from: SimTime::from_secs(1),
            to: SimTime::from_secs(report.duration.whole_secs() - 1),
            flows: FlowSelector::Kind(FlowKind::Voip),
        })?;
        let rates = v.series.iter().map(|s| s.bitrate_bps() / 1e3);
        m.insert("voip_min_bitrate_kbps".into(), rates.clone().fold(f64::INFINITY, f64::min));
        m.insert("voip_max_bitrate_kbps".into(), rates.fold(0.0, f64::max));
        if let Some(d) = v.delay_avg_us {
            m.insert("voip_avg_delay_ms".into(), ms(d));
        }
        if let Some(d) = v.delay_max_us {
            m.insert("voip_max_delay_ms".into(), ms(d as f64));
        }
        let worst = v.series.iter().map(|s| s.lost).max().unwrap_or(0);
        m.insert("voip_max_loss_pps".into(), worst as f64);
    }
    Ok(RunSummary {
        seed,
        metrics: m,
        conserved: report.totals.conserved(),
        event_count: report.event_count,
        event_log_sha256: report.event_log_sha256.clone(),
    })
}

/// Runs one repetition of a scenario with the given seed.
pub fn run_once(file: &ScenarioFile, seed: u64, keep_log: bool) -> Result<RunOutput> {
    let p = file.prepare(seed)?;
    let mut cfg = p.config;
    cfg.keep_log = keep_log;
    Ok(Simulator::new(p.topology, cfg, p.flows, &p.failures)?.run())
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct Experiment {
    pub scenario: ScenarioFile,
    pub seed_base: u64,
    pub runs: Vec<RunSummary>,
    pub aggregate: BTreeMap<String, Stat>,
}

/// Runs `repetitions` isolated engines; repetition `i` uses seed
/// `seed_base + i`. The file is fully validated before any run starts.
pub fn run_experiment(file: &ScenarioFile, repetitions: u32, seed_base: u64) -> Result<Experiment> {
    Ok(run_experiment_with(file, repetitions, seed_base, false, |_, _| ())?.0)
}

/// Like [`run_experiment`], handing each finished run to `sink` together
/// with its repetition index. Sink results are returned in repetition order.
/// `keep_log` retains event records for the sink.
pub fn run_experiment_with<T, F>(
    file: &ScenarioFile,
    repetitions: u32,
    seed_base: u64,
    keep_log: bool,
    sink: F,
) -> Result<(Experiment, Vec<T>)>
where
    T: Send,
    F: Fn(u32, &RunOutput) -> T + Sync,
{
    if repetitions == 0 {
        return Err(Error::Scenario("at least one repetition is required".into()));
    }
    file.validate()?;
    let outs = (0..repetitions)
        .into_par_iter()
        .map(|i| {
            let seed = seed_base.wrapping_add(u64::from(i));
            let out = run_once(file, seed, keep_log)?;
            let s = summarize(&out.report, seed)?;
            Ok((s, sink(i, &out)))
        })
        .collect::<Result<Vec<_>>>()?;
    let (runs, extra): (Vec<_>, Vec<_>) = outs.into_iter().unzip();
    let aggregate = aggregate(&runs);
    Ok((
        Experiment {
            scenario: file.clone(),
            seed_base,
            runs,
            aggregate,
        },
        extra,
    ))
}

/// Metric-wise statistics over the runs that report the metric.
pub fn aggregate(runs: &[RunSummary]) -> BTreeMap<String, Stat> {
    let mut values: BTreeMap<&str, Vec<f64>> = BTreeMap::new();
    for r in runs {
        for (k, v) in &r.metrics {
            values.entry(k).or_default().push(*v);
        }
    }
    values.into_iter().map(|(k, v)| (k.to_string(), Stat::of(&v))).collect()
}

/// One row of a paired table.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SummaryRow {
    pub metric: String,
    pub baseline: Stat,
    pub famtar: Stat,
    /// Improvement of the FAMTAR mean over the baseline mean.
    pub difference: f64,
    /// `difference / baseline mean`, as a fraction.
    pub relative_gain: f64,
}

/// Improvement and relative gain. The sign follows the metric polarity, so a
/// positive gain is always an improvement.
pub fn gain(baseline: f64, famtar: f64, polarity: Polarity) -> (f64, f64) {
    let diff = match polarity {
        Polarity::HigherIsBetter => famtar - baseline,
        Polarity::LowerIsBetter => baseline - famtar,
    };
    let rel = if baseline == 0.0 {
        if diff == 0.0 {
            0.0
        } else {
            f64::NAN
        }
    } else {
        diff / baseline.abs()
    };
    (diff, rel)
}

/// Pairs a baseline and a FAMTAR experiment of the same scenario.
pub fn pair(baseline: &Experiment, famtar: &Experiment) -> Result<Vec<SummaryRow>> {
    if baseline.scenario.famtar.enabled || !famtar.scenario.famtar.enabled {
        return Err(Error::Mismatch("expected a baseline run and a FAMTAR run".into()));
    }
    let strip = |e: &Experiment| {
        let mut f = e.scenario.with_famtar(false);
        f.name.clear();
        f.repetitions = 0;
        f.seed = 0;
        f
    };
    if strip(baseline) != strip(famtar) {
        return Err(Error::Mismatch(format!(
            "{} and {} describe different scenarios",
            baseline.scenario.name, famtar.scenario.name
        )));
    }
    if baseline.runs.len() != famtar.runs.len() || baseline.seed_base != famtar.seed_base {
        return Err(Error::Mismatch("repetition counts or seeds differ".into()));
    }
    Ok(METRICS
        .iter()
        .filter_map(|(name, _, pol)| {
            let b = *baseline.aggregate.get(*name)?;
            let f = *famtar.aggregate.get(*name)?;
            let (difference, relative_gain) = gain(b.mean, f.mean, *pol);
            Some(SummaryRow {
                metric: name.to_string(),
                baseline: b,
                famtar: f,
                difference,
                relative_gain,
            })
        })
        .collect())
}

/// Renders rows as a fixed-width text table.
pub fn emit_summary(rows: &[SummaryRow]) -> String {
    let header = ["Metric", "Without FAMTAR", "With FAMTAR", "Average difference", "Relative gain"];
    let cells: Vec<[String; 5]> = rows
        .iter()
        .map(|r| {
            [
                label(&r.metric).to_string(),
                r.baseline.to_string(),
                r.famtar.to_string(),
                if r.difference.abs() >= 10.0 {
                    format!("{:.1}", r.difference)
                } else {
                    format!("{:.3}", r.difference)
                },
                format!("{:.1}%", r.relative_gain * 100.0),
            ]
        })
        .collect();
    let mut width = header.map(str::len);
    for c in &cells {
        for (w, s) in width.iter_mut().zip(c) {
            *w = (*w).max(s.chars().count());
        }
    }
    let mut out = String::new();
    let line = |out: &mut String, row: [&str; 5]| {
        let parts: Vec<String> = row
            .iter()
            .zip(width)
            .enumerate()
            .map(|(i, (s, w))| {
                let pad = w - s.chars().count();
                if i == 0 {
                    format!("{s}{}", " ".repeat(pad))
                } else {
                    format!("{}{s}", " ".repeat(pad))
                }
            })
            .collect();
        let _ = writeln!(out, "| {} |", parts.join(" | "));
    };
    line(&mut out, header);
    let rule: Vec<String> = width.iter().map(|w| "-".repeat(*w)).collect();
    let _ = writeln!(out, "|-{}-|", rule.join("-|-"));
    for c in &cells {
        line(&mut out, [&c[0], &c[1], &c[2], &c[3], &c[4]]);
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn stat_conventions() {
        let s = Stat::of(&[2.0, 4.0, 4.0, 4.0, 5.0, 5.0, 7.0, 9.0]);
        assert_eq!(s.mean, 5.0);
        assert!((s.stddev - (32.0f64 / 7.0).sqrt()).abs() < 1e-12);
        let one = Stat::of(&[3.5]);
        assert_eq!((one.mean, one.stddev), (3.5, 0.0));
        assert_eq!(one.to_string(), "3.500 ± 0.000");
        assert_eq!(Stat::of(&[12.0, 14.0]).to_string(), "13.0 ± 1.4");
    }

    #[test]
    fn gains() {
        let (d, g) = gain(3841.9, 4656.2, Polarity::LowerIsBetter);
        assert!((d - -814.3).abs() < 1e-9);
        assert_eq!(format!("{:.1}", g * 100.0), "-21.2");
        let (d, g) = gain(8.7, 16.7, Polarity::HigherIsBetter);
        assert!((d - 8.0).abs() < 1e-9);
        assert_eq!(format!("{:.0}", g * 100.0), "92");
        assert_eq!(gain(5.0, 5.0, Polarity::LowerIsBetter), (0.0, 0.0));
        assert_eq!(gain(0.0, 0.0, Polarity::HigherIsBetter), (0.0, 0.0));
    }

    #[test]
    fn table_layout() {
        let rows = vec![SummaryRow {
            metric: "dropped_packets".into(),
            baseline: Stat {
                mean: 3841.9,
                stddev: 631.5,
                n: 5,
            },
            famtar: Stat {
                mean: 4656.2,
                stddev: 48.1,
                n: 5,
            },
            difference: -814.3,
            relative_gain: -814.3 / 3841.9,
        }];
        let t = emit_summary(&rows);
        let lines: Vec<&str> = t.lines().collect();
        assert_eq!(lines.len(), 3);
        let head: Vec<&str> = lines[0].split('|').map(str::trim).filter(|c| !c.is_empty()).collect();
        assert_eq!(head, ["Metric", "Without FAMTAR", "With FAMTAR", "Average difference", "Relative gain"]);
        assert!(lines[2].contains("3841.9 ± 631.5"));
        assert!(lines[2].contains("4656.2 ± 48.1"));
        assert!(lines[2].contains("-814.3"));
        assert!(lines[2].trim_end().ends_with("-21.2% |"));
        let widths: Vec<usize> = lines.iter().map(|l| l.chars().count()).collect();
        assert!(widths.iter().all(|w| *w == widths[0]));
    }
}
