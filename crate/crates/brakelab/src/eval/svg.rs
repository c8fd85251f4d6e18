//! Minimal SVG line charts for speed traces and learning curves.

use super::trial::Metrics;
use crate::policy::CurveRow;
use std::path::Path;

#[derive(Debug)]
pub enum EvalError {
    /// A trace required for plotting is empty.
    EmptyTrace { name: String },
    Io(std::io::Error),
}

impl std::fmt::Display for EvalError {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            EvalError::EmptyTrace { name } => write!(f, "trace {name} is empty"),
            EvalError::Io(e) => write!(f, "plot io error: {e}"),
        }
    }
}

impl std::error::Error for EvalError {}

impl From<std::io::Error> for EvalError {
    fn from(e: std::io::Error) -> Self {
        EvalError::Io(e)
    }
}

pub(crate) struct Series {
    pub name: String,
    pub points: Vec<(f64, f64)>,
    pub dashed: bool,
    pub color: &'static str,
}

const COLORS: [&str; 6] = [
    "#1f77b4", "#d62728", "#2ca02c", "#9467bd", "#ff7f0e", "#555555",
];

const W: f64 = 860.0;
const H: f64 = 520.0;
const MARGIN_L: f64 = 70.0;
const MARGIN_R: f64 = 150.0;
const MARGIN_T: f64 = 50.0;
const MARGIN_B: f64 = 60.0;

fn esc(s: &str) -> String {
    s.replace('&', "&amp;").replace('<', "&lt;").replace('>', "&gt;")
}

/// Writes one line chart with axes, tick labels, and a legend.
pub(crate) fn line_chart(
    title: &str,
    x_label: &str,
    y_label: &str,
    series: &[Series],
    path: &Path,
) -> Result<(), EvalError> {
    for s in series {
        if s.points.is_empty() {
            return Err(EvalError::EmptyTrace {
                name: s.name.clone(),
            });
        }
    }
    let all = series.iter().flat_map(|s| s.points.iter());
    let (mut x0, mut x1, mut y0, mut y1) = (f64::MAX, f64::MIN, f64::MAX, f64::MIN);
    for (x, y) in all {
        x0 = x0.min(*x);
        x1 = x1.max(*x);
        y0 = y0.min(*y);
        y1 = y1.max(*y);
    }
    if (x1 - x0).abs() < 1e-12 {
        x1 = x0 + 1.0;
    }
    if (y1 - y0).abs() < 1e-12 {
        y1 = y0 + 1.0;
    }
    let pad = (y1 - y0) * 0.05;
    y0 -= pad;
    y1 += pad;
    let px = |x: f64| MARGIN_L + (x - x0) / (x1 - x0) * (W - MARGIN_L - MARGIN_R);
    let py = |y: f64| H - MARGIN_B - (y - y0) / (y1 - y0) * (H - MARGIN_T - MARGIN_B);

    let mut svg = String::new();
    svg.push_str(&format!(
        "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"{W}\" height=\"{H}\" viewBox=\"0 0 {W} {H}\">\n"
    ));
    svg.push_str("<rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n");
    svg.push_str(&format!(
        "<text x=\"{:.1}\" y=\"28\" font-size=\"17\" font-family=\"sans-serif\" text-anchor=\"middle\">{}</text>\n",
        W / 2.0,
        esc(title)
    ));
    // Axes.
    svg.push_str(&format!(
        "<line x1=\"{MARGIN_L}\" y1=\"{:.1}\" x2=\"{:.1}\" y2=\"{:.1}\" stroke=\"black\"/>\n",
        H - MARGIN_B,
        W - MARGIN_R,
        H - MARGIN_B
    ));
    svg.push_str(&format!(
        "<line x1=\"{MARGIN_L}\" y1=\"{MARGIN_T}\" x2=\"{MARGIN_L}\" y2=\"{:.1}\" stroke=\"black\"/>\n",
        H - MARGIN_B
    ));
    // Ticks.
    for k in 0..=5 {
        let xv = x0 + (x1 - x0) * k as f64 / 5.0;
        let yv = y0 + (y1 - y0) * k as f64 / 5.0;
        svg.push_str(&format!(
            "<text x=\"{:.1}\" y=\"{:.1}\" font-size=\"11\" font-family=\"sans-serif\" text-anchor=\"middle\">{:.1}</text>\n",
            px(xv),
            H - MARGIN_B + 18.0,
            xv
        ));
        svg.push_str(&format!(
            "<text x=\"{:.1}\" y=\"{:.1}\" font-size=\"11\" font-family=\"sans-serif\" text-anchor=\"end\">{:.1}</text>\n",
            MARGIN_L - 6.0,
            py(yv) + 4.0,
            yv
        ));
        svg.push_str(&format!(
            "<line x1=\"{MARGIN_L}\" y1=\"{:.1}\" x2=\"{:.1}\" y2=\"{:.1}\" stroke=\"#dddddd\"/>\n",
            py(yv),
            W - MARGIN_R,
            py(yv)
        ));
    }
    svg.push_str(&format!(
        "<text x=\"{:.1}\" y=\"{:.1}\" font-size=\"13\" font-family=\"sans-serif\" text-anchor=\"middle\">{}</text>\n",
        (MARGIN_L + W - MARGIN_R) / 2.0,
        H - 16.0,
        esc(x_label)
    ));
    svg.push_str(&format!(
        "<text x=\"18\" y=\"{:.1}\" font-size=\"13\" font-family=\"sans-serif\" text-anchor=\"middle\" transform=\"rotate(-90 18 {:.1})\">{}</text>\n",
        H / 2.0,
        H / 2.0,
        esc(y_label)
    ));
    // Series.
    for (i, s) in series.iter().enumerate() {
        let mut d = String::new();
        for (k, (x, y)) in s.points.iter().enumerate() {
            d.push_str(if k == 0 { "M" } else { "L" });
            d.push_str(&format!("{:.2},{:.2} ", px(*x), py(*y)));
        }
        let dash = if s.dashed {
            " stroke-dasharray=\"8,5\""
        } else {
            ""
        };
        svg.push_str(&format!(
            "<path d=\"{}\" fill=\"none\" stroke=\"{}\" stroke-width=\"1.6\"{}/>\n",
            d.trim_end(),
            s.color,
            dash
        ));
        let ly = MARGIN_T + 18.0 * i as f64;
        svg.push_str(&format!(
            "<line x1=\"{:.1}\" y1=\"{ly:.1}\" x2=\"{:.1}\" y2=\"{ly:.1}\" stroke=\"{}\" stroke-width=\"2\"{}/>\n",
            W - MARGIN_R + 10.0,
            W - MARGIN_R + 40.0,
            s.color,
            dash
        ));
        svg.push_str(&format!(
            "<text x=\"{:.1}\" y=\"{:.1}\" font-size=\"12\" font-family=\"sans-serif\">{}</text>\n",
            W - MARGIN_R + 46.0,
            ly + 4.0,
            esc(&s.name)
        ));
    }
    svg.push_str("</svg>\n");
    if let Some(dir) = path.parent() {
        std::fs::create_dir_all(dir)?;
    }
    std::fs::write(path, svg)?;
    Ok(())
}

/// Per-scenario speed plot: four solid wheel-speed curves and the dashed
/// vehicle-speed curve.
pub fn plot_speed_traces(
    scenario_name: &str,
    metrics: &Metrics,
    path: &Path,
) -> Result<(), EvalError> {
    if metrics.trace.is_empty() {
        return Err(EvalError::EmptyTrace {
            name: scenario_name.to_string(),
        });
    }
    let wheel_names = ["FL wheel", "FR wheel", "RL wheel", "RR wheel"];
    let mut series = Vec::new();
    for (i, name) in wheel_names.iter().enumerate() {
        series.push(Series {
            name: name.to_string(),
            points: metrics
                .trace
                .iter()
                .map(|p| (p.t_s, p.wheel_kmh[i]))
                .collect(),
            dashed: false,
            color: COLORS[i],
        });
    }
    series.push(Series {
        name: "vehicle".to_string(),
        points: metrics.trace.iter().map(|p| (p.t_s, p.v_kmh)).collect(),
        dashed: true,
        color: COLORS[5],
    });
    line_chart(
        &format!("Braking speeds: {scenario_name}"),
        "time (s)",
        "speed (km/h)",
        &series,
        path,
    )
}

/// Learning-curve panels from the policy-optimization CSV rows.
pub fn plot_learning_curves(rows: &[CurveRow], dir: &Path) -> Result<(), EvalError> {
    if rows.is_empty() {
        return Err(EvalError::EmptyTrace {
            name: "learning curves".to_string(),
        });
    }
    let panel = |name: &str,
                 label: &str,
                 f: &dyn Fn(&CurveRow) -> f64,
                 color: &'static str|
     -> Result<(), EvalError> {
        line_chart(
            label,
            "model step",
            label,
            &[Series {
                name: label.to_string(),
                points: rows.iter().map(|r| (r.step as f64, f(r))).collect(),
                dashed: false,
                color,
            }],
            &dir.join(format!("{name}.svg")),
        )
    };
    panel("critic_loss", "critic loss", &|r| r.critic_loss, COLORS[0])?;
    panel("actor_objective", "actor objective", &|r| r.actor_obj, COLORS[1])?;
    panel("reward_speed_term", "speed reward term", &|r| r.r_speed, COLORS[2])?;
    panel("reward_yaw_term", "yaw reward term", &|r| r.r_yaw, COLORS[3])?;
    panel("reward_slip_term", "slip reward term", &|r| r.r_slip, COLORS[4])?;
    Ok(())
}

/// Model-training loss curves (train and validation NLL per epoch).
pub fn plot_model_loss(history: &crate::model::LossHistory, path: &Path) -> Result<(), EvalError> {
    if history.epochs.is_empty() {
        return Err(EvalError::EmptyTrace {
            name: "model loss history".to_string(),
        });
    }
    line_chart(
        "Dynamics-model training",
        "epoch",
        "negative log-likelihood",
        &[
            Series {
                name: "train NLL".to_string(),
                points: history
                    .epochs
                    .iter()
                    .map(|e| (e.epoch as f64, e.train_nll))
                    .collect(),
                dashed: false,
                color: COLORS[0],
            },
            Series {
                name: "validation NLL".to_string(),
                points: history
                    .epochs
                    .iter()
                    .map(|e| (e.epoch as f64, e.val_nll))
                    .collect(),
                dashed: true,
                color: COLORS[1],
            },
        ],
        path,
    )
}
