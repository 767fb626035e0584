use std::fmt;

use serde::{Deserialize, Serialize};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Classification {
    Converged,
    LimitCycle,
    Diverged,
    /// No rule fired; reported as such rather than mapped to a verdict.
    Inconclusive,
}

impl fmt::Display for Classification {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Self::Converged => "converged",
            Self::LimitCycle => "limit_cycle",
            Self::Diverged => "diverged",
            Self::Inconclusive => "inconclusive",
        })
    }
}

/// Thresholds for one signal.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Criteria {
    pub band: f64,
    /// Trailing window length, seconds.
    pub window: f64,
    pub escape: f64,
}

/// Amplitude ratio range of the last two windows that counts as sustained.
pub const SUSTAINED_RATIO: (f64, f64) = (0.8, 1.25);

fn norm(x: &[f64]) -> f64 {
    x.iter().map(|v| v * v).sum::<f64>().sqrt()
}

/// Index of the first sample with `t >= t0`.
fn start_index(times: &[f64], t0: f64) -> usize {
    times.partition_point(|&t| t < t0 - 1e-9)
}

/// Largest per-component peak-to-peak amplitude over `values[range]`.
pub fn peak_to_peak(values: &[Vec<f64>]) -> f64 {
    let Some(first) = values.first() else { return 0.0 };
    (0..first.len())
        .map(|j| {
            let (lo, hi) = values.iter().fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), v| {
                (lo.min(v[j]), hi.max(v[j]))
            });
            hi - lo
        })
        .fold(0.0, f64::max)
}

/// Classifies a deviation signal sampled at `times`.
///
/// Rules in order: diverged (escaped, or the norm ever exceeds the escape
/// bound), converged (norm inside the band over the trailing window),
/// limit cycle (trailing peak-to-peak above twice the band and roughly equal
/// to the preceding window's), otherwise inconclusive.
pub fn classify(times: &[f64], values: &[Vec<f64>], c: &Criteria, escaped: bool) -> Classification {
    if escaped || values.iter().any(|v| !(norm(v) <= c.escape)) {
        return Classification::Diverged;
    }
    let Some(&t_end) = times.last() else {
        return Classification::Inconclusive;
    };
    let last = start_index(times, t_end - c.window);
    if values[last..].iter().all(|v| norm(v) <= c.band) {
        return Classification::Converged;
    }
    let prev = start_index(times, t_end - 2.0 * c.window);
    let a_last = peak_to_peak(&values[last..]);
    let a_prev = peak_to_peak(&values[prev..last]);
    if a_last > 2.0 * c.band && a_prev > 0.0 {
        let ratio = a_last / a_prev;
        if (SUSTAINED_RATIO.0..=SUSTAINED_RATIO.1).contains(&ratio) {
            return Classification::LimitCycle;
        }
    }
    Classification::Inconclusive
}

/// First time after which the norm stays inside `band`; `None` if the last
/// sample is outside.
pub fn settling_time(times: &[f64], values: &[Vec<f64>], band: f64) -> Option<f64> {
    match values.iter().rposition(|v| norm(v) > band) {
        None => times.first().copied(),
        Some(i) if i + 1 < times.len() => Some(times[i + 1]),
        Some(_) => None,
    }
}

/// Trailing-window peak-to-peak amplitude.
pub fn trailing_amplitude(times: &[f64], values: &[Vec<f64>], window: f64) -> f64 {
    let Some(&t_end) = times.last() else { return 0.0 };
    peak_to_peak(&values[start_index(times, t_end - window)..])
}

/// Samples at or below this are treated as numerically zero by the decay fit.
pub const DECAY_FLOOR: f64 = 1e-12;

/// Exponential decay rate of the norm envelope over `[t0, t1]`.
///
/// The interval is cut into blocks of `block` seconds; the log of each
/// block's maximum is fitted by least squares against the block's center
/// time and the negated slope is returned. Blocks whose maximum is below
/// [`DECAY_FLOOR`] are dropped. `None` if fewer than two blocks remain.
pub fn decay_rate(times: &[f64], values: &[Vec<f64>], t0: f64, t1: f64, block: f64) -> Option<f64> {
    let mut pts = Vec::new();
    let mut start = t0;
    while start + block <= t1 + 1e-9 {
        let lo = start_index(times, start);
        let hi = start_index(times, start + block);
        if hi > lo {
            let peak = values[lo..hi].iter().map(|v| norm(v)).fold(0.0, f64::max);
            if peak > DECAY_FLOOR {
                pts.push((start + 0.5 * block, peak.ln()));
            }
        }
        start += block;
    }
    if pts.len() < 2 {
        return None;
    }
    let n = pts.len() as f64;
    let mx = pts.iter().map(|p| p.0).sum::<f64>() / n;
    let my = pts.iter().map(|p| p.1).sum::<f64>() / n;
    let sxy: f64 = pts.iter().map(|p| (p.0 - mx) * (p.1 - my)).sum();
    let sxx: f64 = pts.iter().map(|p| (p.0 - mx).powi(2)).sum();
    Some(-sxy / sxx)
}
