use serde::{Deserialize, Serialize};

use crate::error::{invalid, Result};

/// Default margin added to the center-to-center span for the blob extent at the corner taps.
pub const DEFAULT_ALPHA: f64 = 32.0;

/// Compass directions, clockwise from north, as `(d_row, d_col)`.
pub const DIRECTIONS: [(i64, i64); 8] = [(-1, 0), (-1, 1), (0, 1), (1, 1), (1, 0), (1, -1), (0, -1), (-1, -1)];

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Layout {
    /// Center plus eight taps at each of `r·s`, `2r·s`, `3r·s`.
    Aspp,
    /// 5×5 grid spaced `r·s`, the support of two stacked dilation-`r` 3×3 convs.
    FcnD6,
}

/// A predicted input-pixel tap position.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct Tap {
    pub row: i64,
    pub col: i64,
    /// Chebyshev ring index in units of `r·s` (0 for the center).
    pub ring: u32,
}

impl Tap {
    pub fn in_frame(&self, height: usize, width: usize) -> bool {
        self.row >= 0 && self.col >= 0 && (self.row as usize) < height && (self.col as usize) < width
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StarGeometry {
    pub layout: Layout,
    pub r: usize,
    pub s: usize,
    pub alpha: f64,
    pub center: (i64, i64),
    pub taps: Vec<Tap>,
    /// Index into `taps` of the bottom-left and bottom-right corner taps.
    pub bottom_left: usize,
    pub bottom_right: usize,
    pub center_to_center_bottom: f64,
    pub end_to_end: f64,
}

impl StarGeometry {
    pub fn taps_in_frame(&self, height: usize, width: usize) -> Vec<usize> {
        (0..self.taps.len()).filter(|&i| self.taps[i].in_frame(height, width)).collect()
    }

    /// Offsets of every tap from the center.
    pub fn offsets(&self) -> Vec<(i64, i64)> {
        self.taps.iter().map(|t| (t.row - self.center.0, t.col - self.center.1)).collect()
    }
}

fn check_rs(r: usize, s: usize) -> Result<()> {
    if r == 0 || s == 0 {
        return Err(invalid(format!("rate and stride must be >= 1, got r={r}, s={s}")));
    }
    Ok(())
}

/// The 25 ASPP taps: the center and the eight compass directions at radii `k·r·s`, `k = 1, 2, 3`.
///
/// The bottom corner taps sit `6rs` apart center to center; adding `alpha`
/// gives the end-to-end extent.
pub fn predict_star(r: usize, s: usize, center: (i64, i64), alpha: f64) -> Result<StarGeometry> {
    check_rs(r, s)?;
    let step = (r * s) as i64;
    let mut taps = vec![Tap { row: center.0, col: center.1, ring: 0 }];
    for ring in 1..=3u32 {
        for (dr, dc) in DIRECTIONS {
            let d = step * i64::from(ring);
            taps.push(Tap { row: center.0 + dr * d, col: center.1 + dc * d, ring });
        }
    }
    let find = |dr: i64, dc: i64| {
        taps.iter()
            .position(|t| t.ring == 3 && t.row - center.0 == dr * 3 * step && t.col - center.1 == dc * 3 * step)
            .expect("corner tap exists")
    };
    let (bottom_left, bottom_right) = (find(1, -1), find(1, 1));
    let span = (6 * r * s) as f64;
    Ok(StarGeometry {
        layout: Layout::Aspp,
        r,
        s,
        alpha,
        center,
        bottom_left,
        bottom_right,
        taps,
        center_to_center_bottom: span,
        end_to_end: span + alpha,
    })
}

/// Bottom corner span of an FCN-D6 head: `4·r·s` pixels.
pub fn predict_fcn_d6_span(r: usize, s: usize) -> Result<usize> {
    check_rs(r, s)?;
    Ok(4 * r * s)
}

/// The 5×5 FCN-D6 tap grid, spaced `r·s` pixels around `center`.
pub fn predict_fcn_d6(r: usize, s: usize, center: (i64, i64), alpha: f64) -> Result<StarGeometry> {
    let span = predict_fcn_d6_span(r, s)? as f64;
    let step = (r * s) as i64;
    let mut taps = Vec::with_capacity(25);
    for i in -2i64..=2 {
        for j in -2i64..=2 {
            let ring = i.unsigned_abs().max(j.unsigned_abs()) as u32;
            taps.push(Tap { row: center.0 + i * step, col: center.1 + j * step, ring });
        }
    }
    Ok(StarGeometry {
        layout: Layout::FcnD6,
        r,
        s,
        alpha,
        center,
        bottom_left: 20,
        bottom_right: 24,
        taps,
        center_to_center_bottom: span,
        end_to_end: span + alpha,
    })
}

#[cfg(test)]
mod tests {
    use std::collections::HashSet;

    use super::*;

    #[test]
    fn bottom_span_examples() {
        let g = predict_star(6, 16, (383, 384), DEFAULT_ALPHA).unwrap();
        assert_eq!(g.center_to_center_bottom, 576.0);
        assert_eq!(g.end_to_end, 608.0);
        let g = predict_star(12, 8, (383, 384), DEFAULT_ALPHA).unwrap();
        assert_eq!(g.center_to_center_bottom, 576.0);

        let g = predict_star(1, 1, (0, 0), DEFAULT_ALPHA).unwrap();
        let radii: HashSet<i64> = g.offsets().iter().map(|&(a, b)| a.abs().max(b.abs())).collect();
        assert_eq!(radii, HashSet::from([0, 1, 2, 3]));
        assert_eq!(g.center_to_center_bottom, 6.0);
        let (bl, br) = (g.taps[g.bottom_left], g.taps[g.bottom_right]);
        assert_eq!((bl.row, bl.col, br.row, br.col), (3, -3, 3, 3));
    }

    #[test]
    fn twenty_five_distinct_taps() {
        for (r, s) in [(1, 1), (6, 16), (12, 8), (5, 3)] {
            let g = predict_star(r, s, (10, -4), 0.0).unwrap();
            let set: HashSet<(i64, i64)> = g.taps.iter().map(|t| (t.row, t.col)).collect();
            assert_eq!(set.len(), 25);
        }
        assert!(predict_star(0, 16, (0, 0), 32.0).is_err());
    }

    #[test]
    fn fcn_d6_span_examples() {
        assert_eq!(predict_fcn_d6_span(6, 16).unwrap(), 384);
        assert_eq!(predict_fcn_d6_span(1, 1).unwrap(), 4);
        assert_eq!(predict_fcn_d6_span(12, 8).unwrap(), 384);
        let g = predict_fcn_d6(6, 16, (0, 0), 32.0).unwrap();
        let (bl, br) = (g.taps[g.bottom_left], g.taps[g.bottom_right]);
        assert_eq!((bl.row, bl.col, br.row, br.col), (192, -192, 192, 192));
        assert_eq!(g.center_to_center_bottom, 384.0);
    }

    #[test]
    fn frame_membership() {
        let g = predict_star(6, 16, (255, 256), 32.0).unwrap();
        let inside = g.taps_in_frame(512, 512);
        assert_eq!(inside.len(), 17);
        assert!(inside.iter().all(|&i| g.taps[i].ring <= 2));
    }

    proptest::proptest! {
        #[test]
        fn symmetric_under_rotation_and_reflection(r in 1usize..20, s in 1usize..33) {
            for g in [predict_star(r, s, (0, 0), 32.0).unwrap(), predict_fcn_d6(r, s, (0, 0), 32.0).unwrap()] {
                let set: HashSet<(i64, i64)> = g.offsets().into_iter().collect();
                let rot: HashSet<(i64, i64)> = set.iter().map(|&(a, b)| (b, -a)).collect();
                let flip_r: HashSet<(i64, i64)> = set.iter().map(|&(a, b)| (-a, b)).collect();
                let flip_c: HashSet<(i64, i64)> = set.iter().map(|&(a, b)| (a, -b)).collect();
                proptest::prop_assert_eq!(&rot, &set);
                proptest::prop_assert_eq!(&flip_r, &set);
                proptest::prop_assert_eq!(&flip_c, &set);
            }
        }

        #[test]
        fn linear_in_rate_and_stride(r in 1usize..20, s in 1usize..17, k in 1usize..4) {
            let base = predict_star(r, s, (0, 0), 32.0).unwrap();
            let by_r = predict_star(k * r, s, (0, 0), 32.0).unwrap();
            let by_s = predict_star(r, k * s, (0, 0), 32.0).unwrap();
            let scaled: Vec<(i64, i64)> = base.offsets().iter().map(|&(a, b)| (a * k as i64, b * k as i64)).collect();
            proptest::prop_assert_eq!(&by_r.offsets(), &scaled);
            proptest::prop_assert_eq!(&by_s.offsets(), &scaled);
            proptest::prop_assert_eq!(by_r.center_to_center_bottom, base.center_to_center_bottom * k as f64);
        }

        #[test]
        fn doubling_rate_halving_stride_is_invariant(r in 1usize..20, half in 1usize..17) {
            let a = predict_star(r, 2 * half, (383, 384), 32.0).unwrap();
            let b = predict_star(2 * r, half, (383, 384), 32.0).unwrap();
            proptest::prop_assert_eq!(a.taps, b.taps);
        }
    }
}
