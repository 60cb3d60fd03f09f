//! Non-maximum suppression on ERF maps and star-tap matching.

use serde::{Deserialize, Serialize};

use super::star::StarGeometry;
use crate::erf::ErfMap;
use crate::error::{invalid, Result};
use crate::tensor::{Shape, Tensor};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Peak {
    pub row: usize,
    pub col: usize,
    pub value: f64,
}

/// Detected peaks, sorted by value descending.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PeakSet {
    pub peaks: Vec<Peak>,
    pub window: usize,
    pub threshold_frac: f64,
}

impl PeakSet {
    pub fn empty(window: usize, threshold_frac: f64) -> Self {
        Self { peaks: Vec::new(), window, threshold_frac }
    }

    pub fn len(&self) -> usize {
        self.peaks.len()
    }

    pub fn is_empty(&self) -> bool {
        self.peaks.is_empty()
    }
}

/// Sliding maximum over `[i - radius, i + radius]`, clipped at the ends.
fn sliding_max(src: &[f64], radius: usize, out: &mut [f64]) {
    let n = src.len();
    let mut deque = std::collections::VecDeque::with_capacity(2 * radius + 1);
    let mut next = 0;
    for i in 0..n {
        let hi = (i + radius).min(n - 1);
        while next <= hi {
            while deque.back().is_some_and(|&b| src[b] <= src[next]) {
                deque.pop_back();
            }
            deque.push_back(next);
            next += 1;
        }
        let lo = i.saturating_sub(radius);
        while deque.front().is_some_and(|&f| f < lo) {
            deque.pop_front();
        }
        out[i] = src[deque[0]];
    }
}

/// A pixel is a peak when it is the strict maximum of its `(2·window+1)²`
/// neighborhood and at least `threshold_frac` times the global maximum.
pub fn detect_peaks(erf: &ErfMap, window: usize, threshold_frac: f64) -> Result<PeakSet> {
    if window == 0 {
        return Err(invalid("peak window must be >= 1"));
    }
    if !(threshold_frac > 0.0 && threshold_frac <= 1.0) {
        return Err(invalid(format!("threshold fraction must lie in (0, 1], got {threshold_frac}")));
    }
    let (h, w) = (erf.height(), erf.width());
    let v = erf.values();
    let global = erf.max_value();
    if global <= 0.0 {
        return Ok(PeakSet::empty(window, threshold_frac));
    }
    let floor = threshold_frac * global;

    let mut rowmax = vec![0.0; h * w];
    for r in 0..h {
        sliding_max(&v[r * w..(r + 1) * w], window, &mut rowmax[r * w..(r + 1) * w]);
    }
    let mut col = vec![0.0; h];
    let mut colmax = vec![0.0; h];
    let mut neigh = vec![0.0; h * w];
    for c in 0..w {
        for r in 0..h {
            col[r] = rowmax[r * w + c];
        }
        sliding_max(&col, window, &mut colmax);
        for r in 0..h {
            neigh[r * w + c] = colmax[r];
        }
    }

    let mut peaks = Vec::new();
    for r in 0..h {
        for c in 0..w {
            let val = v[r * w + c];
            if val < floor || val < neigh[r * w + c] {
                continue;
            }
            let (r0, r1) = (r.saturating_sub(window), (r + window).min(h - 1));
            let (c0, c1) = (c.saturating_sub(window), (c + window).min(w - 1));
            let strict = (r0..=r1).all(|rr| (c0..=c1).all(|cc| (rr, cc) == (r, c) || v[rr * w + cc] < val));
            if strict {
                peaks.push(Peak { row: r, col: c, value: val });
            }
        }
    }
    peaks.sort_by(|a, b| b.value.total_cmp(&a.value).then((a.row, a.col).cmp(&(b.row, b.col))));
    Ok(PeakSet { peaks, window, threshold_frac })
}

/// Separable Gaussian blur with kernel truncated at `3σ`, renormalized at borders.
pub fn gaussian_smooth(erf: &ErfMap, sigma: f64) -> Result<ErfMap> {
    if sigma <= 0.0 {
        return Ok(erf.clone());
    }
    let radius = (3.0 * sigma).ceil() as usize;
    let kernel: Vec<f64> = (0..=2 * radius)
        .map(|i| {
            let d = i as f64 - radius as f64;
            (-d * d / (2.0 * sigma * sigma)).exp()
        })
        .collect();
    let (h, w) = (erf.height(), erf.width());
    let blur = |src: &[f64], dst: &mut [f64]| {
        let n = src.len();
        for (i, d) in dst.iter_mut().enumerate() {
            let lo = i.saturating_sub(radius);
            let hi = (i + radius).min(n - 1);
            let (mut acc, mut norm) = (0.0, 0.0);
            for j in lo..=hi {
                let k = kernel[j + radius - i];
                acc += k * src[j];
                norm += k;
            }
            *d = acc / norm;
        }
    };
    let v = erf.values();
    let mut tmp = vec![0.0; h * w];
    for r in 0..h {
        blur(&v[r * w..(r + 1) * w], &mut tmp[r * w..(r + 1) * w]);
    }
    let mut out = vec![0.0; h * w];
    let (mut col, mut res) = (vec![0.0; h], vec![0.0; h]);
    for c in 0..w {
        for r in 0..h {
            col[r] = tmp[r * w + c];
        }
        blur(&col, &mut res);
        for r in 0..h {
            out[r * w + c] = res[r].max(0.0);
        }
    }
    ErfMap::from_tensor(Tensor::from_vec(Shape::new(h, w, 1), out)?, erf.n_accumulated())
}

/// Assignment of one predicted tap.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TapMatch {
    pub tap: usize,
    pub ring: u32,
    pub predicted: (i64, i64),
    pub peak: Option<Peak>,
    pub distance: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MatchReport {
    pub matched: usize,
    pub total_taps: usize,
    pub match_radius: f64,
    pub taps: Vec<TapMatch>,
    pub unmatched_peaks: usize,
    pub predicted_bottom: f64,
    /// Distance between the peaks matched to the two bottom corner taps.
    pub measured_bottom: Option<f64>,
    pub deviation: Option<f64>,
}

impl MatchReport {
    pub fn is_matched(&self, tap: usize) -> bool {
        self.taps[tap].peak.is_some()
    }
}

/// Greedy nearest-first assignment of taps to peaks within `match_radius` pixels.
pub fn measure_star(peaks: &PeakSet, predicted: &StarGeometry, match_radius: f64) -> MatchReport {
    let mut pairs = Vec::new();
    for (ti, tap) in predicted.taps.iter().enumerate() {
        for (pi, p) in peaks.peaks.iter().enumerate() {
            let d = ((p.row as f64 - tap.row as f64).powi(2) + (p.col as f64 - tap.col as f64).powi(2)).sqrt();
            if d <= match_radius {
                pairs.push((d, ti, pi));
            }
        }
    }
    pairs.sort_by(|a, b| a.0.total_cmp(&b.0).then((a.1, a.2).cmp(&(b.1, b.2))));

    let mut tap_peak: Vec<Option<(usize, f64)>> = vec![None; predicted.taps.len()];
    let mut claimed = vec![false; peaks.peaks.len()];
    for (d, ti, pi) in pairs {
        if tap_peak[ti].is_none() && !claimed[pi] {
            tap_peak[ti] = Some((pi, d));
            claimed[pi] = true;
        }
    }

    let taps: Vec<TapMatch> = predicted
        .taps
        .iter()
        .enumerate()
        .map(|(i, t)| TapMatch {
            tap: i,
            ring: t.ring,
            predicted: (t.row, t.col),
            peak: tap_peak[i].map(|(pi, _)| peaks.peaks[pi]),
            distance: tap_peak[i].map(|(_, d)| d),
        })
        .collect();
    let matched = taps.iter().filter(|t| t.peak.is_some()).count();
    let measured_bottom = match (taps[predicted.bottom_left].peak, taps[predicted.bottom_right].peak) {
        (Some(a), Some(b)) => {
            Some(((a.row as f64 - b.row as f64).powi(2) + (a.col as f64 - b.col as f64).powi(2)).sqrt())
        }
        _ => None,
    };
    MatchReport {
        matched,
        total_taps: predicted.taps.len(),
        match_radius,
        unmatched_peaks: claimed.iter().filter(|&&c| !c).count(),
        predicted_bottom: predicted.center_to_center_bottom,
        deviation: measured_bottom.map(|m| m - predicted.center_to_center_bottom),
        measured_bottom,
        taps,
    }
}

/// Peak-detection settings for star measurement.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DetectionParams {
    pub window: usize,
    pub threshold_frac: f64,
    /// Gaussian pre-smoothing sigma in pixels; 0 disables it.
    pub smoothing_sigma: f64,
    pub match_radius: f64,
}

impl DetectionParams {
    /// Window `r·s/2`, threshold 5% of the maximum, smoothing `s/2`, radius 16 px.
    pub fn for_rate(r: usize, s: usize) -> Self {
        Self { window: (r * s / 2).max(1), threshold_frac: 0.05, smoothing_sigma: s as f64 / 2.0, match_radius: 16.0 }
    }
}

/// Smooth, detect peaks, and match them against `predicted`.
pub fn find_star(erf: &ErfMap, predicted: &StarGeometry, params: &DetectionParams) -> Result<(PeakSet, MatchReport)> {
    let smoothed = gaussian_smooth(erf, params.smoothing_sigma)?;
    let peaks = detect_peaks(&smoothed, params.window, params.threshold_frac)?;
    let report = measure_star(&peaks, predicted, params.match_radius);
    Ok((peaks, report))
}
