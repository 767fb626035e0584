//! Self-contained SVG line plots of a trajectory.

use std::fmt::Write;

use pendusim_core::control::Setpoint;
use pendusim_core::sim::Trajectory;

const WIDTH: f64 = 720.0;
const HEIGHT: f64 = 260.0;
const MARGIN: (f64, f64, f64, f64) = (70.0, 20.0, 30.0, 40.0); // left, right, top, bottom
const MAX_POINTS: usize = 2000;
const COLORS: [&str; 8] = [
    "#1f77b4", "#d62728", "#2ca02c", "#ff7f0e", "#9467bd", "#8c564b", "#e377c2", "#17becf",
];

/// A named series, optionally drawn dashed.
pub struct Series {
    pub label: String,
    pub values: Vec<f64>,
    pub dashed: bool,
}

fn series(label: impl Into<String>, values: Vec<f64>) -> Series {
    Series {
        label: label.into(),
        values,
        dashed: false,
    }
}

fn reference(label: impl Into<String>, value: f64, len: usize) -> Series {
    Series {
        label: label.into(),
        values: vec![value; len],
        dashed: true,
    }
}

/// One plot per signal group: arm joints with yaw, CoM, movers, attitude.
pub fn figure(traj: &Trajectory, setpoint: &Setpoint<f64>) -> Vec<(String, String)> {
    let t = traj.times();
    let len = t.len();
    let col = |f: &dyn Fn(&pendusim_core::sim::Record) -> f64| traj.records.iter().map(f).collect::<Vec<_>>();

    let mut arm: Vec<Series> = (0..traj.links)
        .map(|k| series(format!("q_r{}", k + 1), col(&|r| r.q[5 + k])))
        .collect();
    arm.push(series("gamma", col(&|r| r.q[2])));
    for (k, v) in setpoint.q_r_des.iter().enumerate() {
        arm.push(reference(format!("q_r{} des", k + 1), *v, len));
    }

    let com = vec![series("x_c", col(&|r| r.xc.x)), series("y_c", col(&|r| r.xc.y))];
    let movers = vec![
        series("q_m1", col(&|r| r.q[3])),
        series("q_m2", col(&|r| r.q[4])),
        reference("q_m1*", setpoint.q_m_star.x, len),
        reference("q_m2*", setpoint.q_m_star.y, len),
    ];
    let attitude = vec![series("alpha", col(&|r| r.q[0])), series("beta", col(&|r| r.q[1]))];

    vec![
        ("q_r_gamma.svg".into(), plot("arm joints and yaw [rad]", &t, &arm)),
        ("x_c.svg".into(), plot("CoM position [m]", &t, &com)),
        ("q_m.svg".into(), plot("moving masses [m]", &t, &movers)),
        ("phi.svg".into(), plot("roll and pitch [rad]", &t, &attitude)),
    ]
}

fn bounds(values: impl Iterator<Item = f64>) -> (f64, f64) {
    let (lo, hi) = values
        .filter(|v| v.is_finite())
        .fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), v| (lo.min(v), hi.max(v)));
    if !lo.is_finite() {
        return (-1.0, 1.0);
    }
    let pad = ((hi - lo) * 0.05).max(1e-9);
    (lo - pad, hi + pad)
}

/// Renders `series` against `t` as a standalone SVG document.
pub fn plot(title: &str, t: &[f64], series: &[Series]) -> String {
    let (l, r, top, bottom) = MARGIN;
    let (pw, ph) = (WIDTH - l - r, HEIGHT - top - bottom);
    let (t0, t1) = (
        t.first().copied().unwrap_or(0.0),
        t.last().copied().unwrap_or(1.0).max(1e-9),
    );
    let (y0, y1) = bounds(series.iter().flat_map(|s| s.values.iter().copied()));
    let x = |v: f64| l + (v - t0) / (t1 - t0).max(1e-12) * pw;
    let y = |v: f64| top + (y1 - v) / (y1 - y0) * ph;
    let stride = t.len().div_ceil(MAX_POINTS).max(1);

    let mut s = String::new();
    let _ = writeln!(
        s,
        r#"<svg xmlns="http://www.w3.org/2000/svg" width="{WIDTH}" height="{HEIGHT}" viewBox="0 0 {WIDTH} {HEIGHT}" font-family="sans-serif" font-size="11">"#
    );
    let _ = writeln!(s, r#"<rect width="100%" height="100%" fill="white"/>"#);
    let _ = writeln!(s, r#"<text x="{l}" y="18" font-size="13">{title}</text>"#);
    let _ = writeln!(
        s,
        r##"<rect x="{l}" y="{top}" width="{pw}" height="{ph}" fill="none" stroke="#444"/>"##
    );
    for (v, anchor_y) in [
        (y1, y(y1) + 4.0),
        (y0, y(y0)),
        (0.5 * (y0 + y1), y(0.5 * (y0 + y1)) + 4.0),
    ] {
        let _ = writeln!(
            s,
            r#"<text x="{}" y="{anchor_y:.1}" text-anchor="end">{v:.3e}</text>"#,
            l - 4.0
        );
    }
    if y0 < 0.0 && y1 > 0.0 {
        let (x2, y_zero) = (l + pw, y(0.0));
        let _ = writeln!(
            s,
            r##"<line x1="{l}" x2="{x2}" y1="{y_zero:.1}" y2="{y_zero:.1}" stroke="#bbb"/>"##
        );
    }
    let _ = writeln!(s, r#"<text x="{l}" y="{}">{t0:.0}</text>"#, HEIGHT - 22.0);
    let _ = writeln!(
        s,
        r#"<text x="{}" y="{}" text-anchor="end">{t1:.0} s</text>"#,
        l + pw,
        HEIGHT - 22.0
    );

    for (k, ser) in series.iter().enumerate() {
        let color = COLORS[k % COLORS.len()];
        let dash = if ser.dashed { r#" stroke-dasharray="5,4""# } else { "" };
        let mut pts = String::new();
        for (tv, v) in t.iter().zip(&ser.values).step_by(stride).filter(|(_, v)| v.is_finite()) {
            let _ = write!(pts, "{:.2},{:.2} ", x(*tv), y(*v));
        }
        let _ = writeln!(
            s,
            r#"<polyline fill="none" stroke="{color}" stroke-width="1.2"{dash} points="{}"/>"#,
            pts.trim_end()
        );
        let lx = l + 8.0 + 90.0 * k as f64;
        let _ = writeln!(
            s,
            r#"<text x="{lx}" y="{}" fill="{color}">{}</text>"#,
            HEIGHT - 6.0,
            ser.label
        );
    }
    s.push_str("</svg>\n");
    s
}
