//! Per-scenario, per-mode comparison of scenario reports.

use std::collections::BTreeMap;
use std::fmt;

use serde::{Deserialize, Serialize};

use super::scenario::ScenarioReport;
use super::Mode;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct MetricsRow {
    pub scenario: String,
    pub mode: Mode,
    pub runs: usize,
    pub successes: usize,
    pub median_wall_time: f64,
    pub median_interactions: f64,
    /// `1 − interactions / teleop interactions`, for gesture modes with a
    /// teleop row to compare against.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub reduction: Option<f64>,
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct MetricsTable {
    pub rows: Vec<MetricsRow>,
}

fn median(mut v: Vec<f64>) -> f64 {
    v.sort_by(f64::total_cmp);
    let n = v.len();
    if n == 0 {
        return f64::NAN;
    }
    if n % 2 == 1 { v[n / 2] } else { 0.5 * (v[n / 2 - 1] + v[n / 2]) }
}

/// One row per scenario and mode, ordered by scenario then mode.
pub fn report_metrics(reports: &[ScenarioReport]) -> MetricsTable {
    let mut groups: BTreeMap<(String, Mode), Vec<&ScenarioReport>> = BTreeMap::new();
    for r in reports {
        groups.entry((r.scenario.clone(), r.mode)).or_default().push(r);
    }
    let mut rows: Vec<MetricsRow> = groups
        .into_iter()
        .map(|((scenario, mode), rs)| MetricsRow {
            scenario,
            mode,
            runs: rs.len(),
            successes: rs.iter().filter(|r| r.success).count(),
            median_wall_time: median(rs.iter().map(|r| r.wall_time).collect()),
            median_interactions: median(rs.iter().map(|r| r.interaction_events as f64).collect()),
            reduction: None,
        })
        .collect();
    let teleop: BTreeMap<String, f64> = rows
        .iter()
        .filter(|r| r.mode == Mode::Teleop)
        .map(|r| (r.scenario.clone(), r.median_interactions))
        .collect();
    for r in rows.iter_mut().filter(|r| r.mode.is_gesture()) {
        r.reduction = teleop.get(&r.scenario).filter(|t| **t > 0.0).map(|t| 1.0 - r.median_interactions / t);
    }
    MetricsTable { rows }
}

impl MetricsTable {
    pub fn row(&self, scenario: &str, mode: Mode) -> Option<&MetricsRow> {
        self.rows.iter().find(|r| r.scenario == scenario && r.mode == mode)
    }
}

impl fmt::Display for MetricsTable {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        writeln!(
            f,
            "{:<22} {:<19} {:>4} {:>7} {:>10} {:>12} {:>9}",
            "scenario", "mode", "runs", "success", "wall_time", "interactions", "reduction"
        )?;
        for r in &self.rows {
            let red = r.reduction.map_or("-".to_string(), |x| format!("{:.1}%", 100.0 * x));
            writeln!(
                f,
                "{:<22} {:<19} {:>4} {:>7} {:>10.2} {:>12.1} {:>9}",
                r.scenario,
                r.mode.name(),
                r.runs,
                format!("{}/{}", r.successes, r.runs),
                r.median_wall_time,
                r.median_interactions,
                red
            )?;
        }
        Ok(())
    }
}
