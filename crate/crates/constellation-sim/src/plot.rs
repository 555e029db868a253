//! Static SVG plots over a run's event log: per-satellite training loss,
//! the activity-coloured state of charge with its standby threshold,
//! temperatures against the 40 °C line, and the exchange timeline.

use std::fs;
use std::path::{Path, PathBuf};

use crate::constraints::{Activity, SOC_STANDBY_THRESHOLD, TEMPERATURE_STANDBY_THRESHOLD_C};
use crate::engine::EventRecord;
use crate::error::Result;
use crate::protocol::ExchangeOutcome;

const WIDTH: f64 = 900.0;
const HEIGHT: f64 = 420.0;
const MARGIN_L: f64 = 70.0;
const MARGIN_R: f64 = 130.0;
const MARGIN_T: f64 = 40.0;
const MARGIN_B: f64 = 50.0;

const SAT_COLORS: [&str; 8] = [
    "#1f77b4", "#ff7f0e", "#2ca02c", "#d62728", "#9467bd", "#8c564b", "#e377c2", "#7f7f7f",
];

fn activity_color(activity: Activity) -> &'static str {
    match activity {
        Activity::Training => "#1f77b4",
        Activity::Inference => "#2ca02c",
        Activity::Exchanging => "#ff7f0e",
        Activity::Standby => "#d62728",
    }
}

struct Chart {
    title: String,
    x_label: String,
    y_label: String,
    x_range: (f64, f64),
    y_range: (f64, f64),
    body: String,
    legend: Vec<(String, String)>,
}

impl Chart {
    fn new(title: &str, x_label: &str, y_label: &str, x_range: (f64, f64), y_range: (f64, f64)) -> Self {
        let fix = |(lo, hi): (f64, f64)| {
            if hi > lo {
                (lo, hi)
            } else {
                (lo, lo + 1.0)
            }
        };
        Chart {
            title: title.to_string(),
            x_label: x_label.to_string(),
            y_label: y_label.to_string(),
            x_range: fix(x_range),
            y_range: fix(y_range),
            body: String::new(),
            legend: Vec::new(),
        }
    }

    fn x(&self, v: f64) -> f64 {
        let (lo, hi) = self.x_range;
        MARGIN_L + (v - lo) / (hi - lo) * (WIDTH - MARGIN_L - MARGIN_R)
    }

    fn y(&self, v: f64) -> f64 {
        let (lo, hi) = self.y_range;
        HEIGHT - MARGIN_B - (v - lo) / (hi - lo) * (HEIGHT - MARGIN_T - MARGIN_B)
    }

    fn polyline(&mut self, points: &[(f64, f64)], color: &str, width: f64) {
        if points.len() < 2 {
            self.markers(points, color, 2.0);
            return;
        }
        let coords: Vec<String> = points
            .iter()
            .map(|&(x, y)| format!("{:.2},{:.2}", self.x(x), self.y(y)))
            .collect();
        self.body.push_str(&format!(
            "<polyline fill=\"none\" stroke=\"{color}\" stroke-width=\"{width}\" points=\"{}\"/>\n",
            coords.join(" ")
        ));
    }

    fn segment(&mut self, a: (f64, f64), b: (f64, f64), color: &str, width: f64) {
        self.body.push_str(&format!(
            "<line x1=\"{:.2}\" y1=\"{:.2}\" x2=\"{:.2}\" y2=\"{:.2}\" stroke=\"{color}\" stroke-width=\"{width}\"/>\n",
            self.x(a.0),
            self.y(a.1),
            self.x(b.0),
            self.y(b.1)
        ));
    }

    fn markers(&mut self, points: &[(f64, f64)], color: &str, radius: f64) {
        for &(x, y) in points {
            self.body.push_str(&format!(
                "<circle cx=\"{:.2}\" cy=\"{:.2}\" r=\"{radius}\" fill=\"{color}\"/>\n",
                self.x(x),
                self.y(y)
            ));
        }
    }

    fn hline(&mut self, y: f64, color: &str, label: &str) {
        let py = self.y(y);
        self.body.push_str(&format!(
            "<line x1=\"{:.2}\" y1=\"{py:.2}\" x2=\"{:.2}\" y2=\"{py:.2}\" stroke=\"{color}\" stroke-width=\"1.2\" stroke-dasharray=\"6,4\"/>\n",
            MARGIN_L,
            WIDTH - MARGIN_R
        ));
        self.body.push_str(&format!(
            "<text x=\"{:.2}\" y=\"{:.2}\" font-size=\"11\" fill=\"{color}\">{label}</text>\n",
            MARGIN_L + 4.0,
            py - 4.0
        ));
    }

    fn legend_entry(&mut self, label: &str, color: &str) {
        self.legend.push((label.to_string(), color.to_string()));
    }

    fn render(&self) -> String {
        let mut svg = String::new();
        svg.push_str(&format!(
            "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"{WIDTH}\" height=\"{HEIGHT}\" viewBox=\"0 0 {WIDTH} {HEIGHT}\">\n"
        ));
        svg.push_str("<rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n");
        svg.push_str(&format!(
            "<text x=\"{:.1}\" y=\"24\" font-size=\"15\" text-anchor=\"middle\" font-family=\"sans-serif\">{}</text>\n",
            (MARGIN_L + WIDTH - MARGIN_R) / 2.0,
            self.title
        ));
        // Axes.
        svg.push_str(&format!(
            "<line x1=\"{MARGIN_L}\" y1=\"{MARGIN_T}\" x2=\"{MARGIN_L}\" y2=\"{:.1}\" stroke=\"black\"/>\n",
            HEIGHT - MARGIN_B
        ));
        svg.push_str(&format!(
            "<line x1=\"{MARGIN_L}\" y1=\"{:.1}\" x2=\"{:.1}\" y2=\"{:.1}\" stroke=\"black\"/>\n",
            HEIGHT - MARGIN_B,
            WIDTH - MARGIN_R,
            HEIGHT - MARGIN_B
        ));
        // Ticks.
        for i in 0..=5 {
            let f = i as f64 / 5.0;
            let xv = self.x_range.0 + f * (self.x_range.1 - self.x_range.0);
            let yv = self.y_range.0 + f * (self.y_range.1 - self.y_range.0);
            let px = self.x(xv);
            let py = self.y(yv);
            svg.push_str(&format!(
                "<line x1=\"{px:.1}\" y1=\"{:.1}\" x2=\"{px:.1}\" y2=\"{:.1}\" stroke=\"black\"/>\n",
                HEIGHT - MARGIN_B,
                HEIGHT - MARGIN_B + 5.0
            ));
            svg.push_str(&format!(
                "<text x=\"{px:.1}\" y=\"{:.1}\" font-size=\"11\" text-anchor=\"middle\" font-family=\"sans-serif\">{}</text>\n",
                HEIGHT - MARGIN_B + 18.0,
                trim_number(xv)
            ));
            svg.push_str(&format!(
                "<line x1=\"{:.1}\" y1=\"{py:.1}\" x2=\"{MARGIN_L}\" y2=\"{py:.1}\" stroke=\"black\"/>\n",
                MARGIN_L - 5.0
            ));
            svg.push_str(&format!(
                "<text x=\"{:.1}\" y=\"{:.1}\" font-size=\"11\" text-anchor=\"end\" font-family=\"sans-serif\">{}</text>\n",
                MARGIN_L - 8.0,
                py + 4.0,
                trim_number(yv)
            ));
        }
        // Axis labels.
        svg.push_str(&format!(
            "<text x=\"{:.1}\" y=\"{:.1}\" font-size=\"12\" text-anchor=\"middle\" font-family=\"sans-serif\">{}</text>\n",
            (MARGIN_L + WIDTH - MARGIN_R) / 2.0,
            HEIGHT - 12.0,
            self.x_label
        ));
        svg.push_str(&format!(
            "<text x=\"16\" y=\"{:.1}\" font-size=\"12\" text-anchor=\"middle\" font-family=\"sans-serif\" transform=\"rotate(-90 16 {:.1})\">{}</text>\n",
            (MARGIN_T + HEIGHT - MARGIN_B) / 2.0,
            (MARGIN_T + HEIGHT - MARGIN_B) / 2.0,
            self.y_label
        ));
        svg.push_str(&self.body);
        // Legend.
        for (i, (label, color)) in self.legend.iter().enumerate() {
            let y = MARGIN_T + 14.0 * i as f64;
            svg.push_str(&format!(
                "<rect x=\"{:.1}\" y=\"{:.1}\" width=\"10\" height=\"10\" fill=\"{color}\"/>\n",
                WIDTH - MARGIN_R + 10.0,
                y
            ));
            svg.push_str(&format!(
                "<text x=\"{:.1}\" y=\"{:.1}\" font-size=\"11\" font-family=\"sans-serif\">{label}</text>\n",
                WIDTH - MARGIN_R + 24.0,
                y + 9.0
            ));
        }
        svg.push_str("</svg>\n");
        svg
    }
}

fn trim_number(v: f64) -> String {
    if v == 0.0 {
        return "0".to_string();
    }
    if v.abs() >= 1000.0 {
        format!("{v:.0}")
    } else if v.abs() >= 1.0 {
        format!("{v:.2}")
    } else {
        format!("{v:.3}")
    }
}

fn sat_ids(events: &[EventRecord]) -> Vec<u32> {
    let mut ids: Vec<u32> = events.iter().map(|e| e.sat_id).collect();
    ids.sort_unstable();
    ids.dedup();
    ids
}

fn t_hours_range(events: &[EventRecord]) -> (f64, f64) {
    let hi = events
        .iter()
        .map(|e| (e.t + e.dt_s) / 3600.0)
        .fold(0.0, f64::max);
    (0.0, hi)
}

fn loss_chart(events: &[EventRecord]) -> String {
    let mut chart = Chart::new(
        "Training loss over time",
        "hours",
        "batch-mean MSE loss",
        t_hours_range(events),
        {
            let mut lo = f64::INFINITY;
            let mut hi = f64::NEG_INFINITY;
            for e in events.iter().filter_map(|e| e.train_loss) {
                lo = lo.min(e);
                hi = hi.max(e);
            }
            if lo.is_finite() {
                (lo, hi)
            } else {
                (0.0, 1.0)
            }
        },
    );
    for (i, sat) in sat_ids(events).iter().enumerate() {
        let color = SAT_COLORS[i % SAT_COLORS.len()];
        let pts: Vec<(f64, f64)> = events
            .iter()
            .filter(|e| e.sat_id == *sat)
            .filter_map(|e| e.train_loss.map(|l| (e.t / 3600.0, l)))
            .collect();
        chart.polyline(&pts, color, 1.0);
        chart.legend_entry(&format!("sat {sat}"), color);
    }
    chart.render()
}

fn soc_chart(events: &[EventRecord]) -> String {
    let mut chart = Chart::new(
        "State of charge, satellite 0 (coloured by activity)",
        "hours",
        "state of charge",
        t_hours_range(events),
        (0.0, 1.05),
    );
    let first = sat_ids(events).first().copied();
    if let Some(sat) = first {
        let rows: Vec<&EventRecord> = events.iter().filter(|e| e.sat_id == sat).collect();
        let mut prev: Option<(f64, f64)> = None;
        for e in rows {
            let p1 = (e.t / 3600.0, e.soc);
            let p2 = ((e.t + e.dt_s) / 3600.0, e.soc);
            if let Some(p0) = prev {
                chart.segment(p0, p1, activity_color(e.activity), 1.4);
            }
            chart.segment(p1, p2, activity_color(e.activity), 1.4);
            prev = Some(p2);
        }
    }
    for activity in Activity::ALL {
        chart.legend_entry(activity.name(), activity_color(activity));
    }
    chart.hline(
        SOC_STANDBY_THRESHOLD,
        "#d62728",
        &format!("standby threshold {SOC_STANDBY_THRESHOLD}"),
    );
    chart.render()
}

fn temperature_chart(events: &[EventRecord]) -> String {
    let mut hi = TEMPERATURE_STANDBY_THRESHOLD_C + 5.0;
    let mut lo = 0.0f64;
    for e in events {
        hi = hi.max(e.temperature_c + 2.0);
        lo = lo.min(e.temperature_c - 2.0);
    }
    let mut chart = Chart::new(
        "Temperature over time",
        "hours",
        "temperature (°C)",
        t_hours_range(events),
        (lo, hi),
    );
    for (i, sat) in sat_ids(events).iter().enumerate() {
        let color = SAT_COLORS[i % SAT_COLORS.len()];
        let pts: Vec<(f64, f64)> = events
            .iter()
            .filter(|e| e.sat_id == *sat)
            .map(|e| (e.t / 3600.0, e.temperature_c))
            .collect();
        chart.polyline(&pts, color, 1.0);
        chart.legend_entry(&format!("sat {sat}"), color);
    }
    chart.hline(
        TEMPERATURE_STANDBY_THRESHOLD_C,
        "#d62728",
        &format!("standby threshold {TEMPERATURE_STANDBY_THRESHOLD_C} °C"),
    );
    chart.render()
}

fn exchange_chart(events: &[EventRecord]) -> String {
    let sats = sat_ids(events);
    let y_hi = sats.len().max(1) as f64;
    let mut chart = Chart::new(
        "Exchange events (green completed, red aborted)",
        "hours",
        "satellite",
        t_hours_range(events),
        (-0.5, y_hi - 0.5),
    );
    for e in events {
        for ex in &e.exchange {
            let color = match ex.outcome {
                ExchangeOutcome::Completed => "#2ca02c",
                ExchangeOutcome::Aborted => "#d62728",
            };
            chart.markers(&[(ex.t_resolved / 3600.0, e.sat_id as f64)], color, 3.0);
        }
    }
    chart.legend_entry("completed", "#2ca02c");
    chart.legend_entry("aborted", "#d62728");
    chart.render()
}

/// Render the four run plots into `<out_dir>/plots/`.
pub fn render_plots(events: &[EventRecord], out_dir: &Path) -> Result<Vec<PathBuf>> {
    let plots_dir = out_dir.join("plots");
    fs::create_dir_all(&plots_dir)?;
    let files = [
        ("loss_vs_time.svg", loss_chart(events)),
        ("soc_vs_time.svg", soc_chart(events)),
        ("temperature_vs_time.svg", temperature_chart(events)),
        ("exchange_timeline.svg", exchange_chart(events)),
    ];
    let mut out = Vec::new();
    for (name, svg) in files {
        let path = plots_dir.join(name);
        fs::write(&path, svg)?;
        out.push(path);
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn empty_log_still_renders_axes() {
        let dir = tempfile::tempdir().unwrap();
        let paths = render_plots(&[], dir.path()).unwrap();
        assert_eq!(paths.len(), 4);
        for p in paths {
            let text = std::fs::read_to_string(p).unwrap();
            assert!(text.starts_with("<svg"));
            assert!(text.contains("<line"));
        }
    }

    #[test]
    fn soc_chart_marks_the_standby_threshold() {
        let svg = soc_chart(&[]);
        assert!(svg.contains("standby threshold 0.2"));
    }
}
