//! Atrous-rate selection: the legacy stride rule, the field-of-view guideline
//! `r* = (l − α) / (6s)`, and diagnosis of a chosen `(l, s, r)`.
//!
//! The legacy rule only covers strides 8 and 16. Some U-Net configurations use
//! `r = 12` at stride 16, which this rule does not describe.

use std::fmt;

use serde::{Deserialize, Serialize};

use crate::error::{invalid, Error, Result};

/// How the ASPP field of view compares with the input size.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Diagnosis {
    Matched,
    /// Outer atrous taps land in zero padding.
    InvalidKernelRegion,
    /// The star does not reach the image borders.
    UnderCoverage,
}

impl fmt::Display for Diagnosis {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Diagnosis::Matched => "matched",
            Diagnosis::InvalidKernelRegion => "invalid-kernel-region",
            Diagnosis::UnderCoverage => "under-coverage",
        })
    }
}

/// Base rate of the legacy rule: 6 at stride 16, 12 at stride 8.
pub fn legacy_rate(s: usize) -> Result<usize> {
    match s {
        16 => Ok(6),
        8 => Ok(12),
        _ => Err(Error::Unsupported(format!("the legacy rate rule defines strides 8 and 16 only, got {s}"))),
    }
}

/// `(l − α) / (6s)`: the base rate whose end-to-end star extent equals `l`.
pub fn optimal_rate(l: usize, s: usize, alpha: f64) -> Result<f64> {
    if s == 0 {
        return Err(invalid("output stride must be >= 1"));
    }
    if !alpha.is_finite() || alpha < 0.0 {
        return Err(invalid(format!("alpha must be a nonnegative number, got {alpha}")));
    }
    if (l as f64) <= alpha {
        return Err(invalid(format!("image size {l} must exceed alpha {alpha}")));
    }
    Ok((l as f64 - alpha) / (6.0 * s as f64))
}

/// Nearest integer, halves rounding up, never below 1.
pub fn round_rate(r_star: f64) -> usize {
    ((r_star + 0.5).floor() as usize).max(1)
}

/// End-to-end star extent `6·r·s + α` in pixels.
pub fn fov_end_to_end(s: usize, r: usize, alpha: f64) -> f64 {
    (6 * r * s) as f64 + alpha
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ConfigCheck {
    pub image_size: usize,
    pub rate: usize,
    pub fov: f64,
    pub diagnosis: Diagnosis,
}

pub fn validate_config(l: usize, s: usize, r: usize, alpha: f64) -> Result<ConfigCheck> {
    if l == 0 || s == 0 || r == 0 {
        return Err(invalid("size, stride and rate must all be >= 1"));
    }
    let fov = fov_end_to_end(s, r, alpha);
    let size = l as f64;
    let diagnosis = if fov > size {
        Diagnosis::InvalidKernelRegion
    } else if fov < size {
        Diagnosis::UnderCoverage
    } else {
        Diagnosis::Matched
    };
    Ok(ConfigCheck { image_size: l, rate: r, fov, diagnosis })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AdvisorReport {
    pub image_size: usize,
    pub height: usize,
    pub width: usize,
    /// Set when the input is not square; `image_size` is then the shorter side.
    pub asymmetric: bool,
    pub output_stride: usize,
    pub alpha: f64,
    pub r_star: f64,
    pub r_rounded: usize,
    pub fov_end_to_end: f64,
    pub legacy_rate: Option<usize>,
    /// Rate that was diagnosed: the requested one, or `r_rounded`.
    pub evaluated_rate: usize,
    pub evaluated_fov: f64,
    pub diagnosis: Diagnosis,
}

/// Full recommendation for an `height × width` crop; a requested `rate` is diagnosed
/// instead of the recommended one.
pub fn advise(height: usize, width: usize, s: usize, rate: Option<usize>, alpha: f64) -> Result<AdvisorReport> {
    let l = height.min(width);
    let r_star = optimal_rate(l, s, alpha)?;
    let r_rounded = round_rate(r_star);
    let evaluated_rate = rate.unwrap_or(r_rounded);
    let check = validate_config(l, s, evaluated_rate, alpha)?;
    Ok(AdvisorReport {
        image_size: l,
        height,
        width,
        asymmetric: height != width,
        output_stride: s,
        alpha,
        r_star,
        r_rounded,
        fov_end_to_end: fov_end_to_end(s, r_rounded, alpha),
        legacy_rate: legacy_rate(s).ok(),
        evaluated_rate,
        evaluated_fov: check.fov,
        diagnosis: check.diagnosis,
    })
}

/// Crop sizes and strides of the published guideline table.
pub const GUIDELINE_SIZES: [usize; 10] = [128, 256, 320, 512, 640, 768, 769, 832, 896, 1024];
pub const GUIDELINE_STRIDES: [usize; 2] = [16, 8];

pub fn guideline_rows() -> Vec<(usize, usize)> {
    GUIDELINE_STRIDES
        .iter()
        .flat_map(|&s| GUIDELINE_SIZES.iter().map(move |&l| (l, s)))
        .collect()
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GuidelineRow {
    pub l: usize,
    pub s: usize,
    pub r_star: f64,
    pub r_rounded: usize,
}

impl fmt::Display for GuidelineRow {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{} {} {:.2} {}", self.l, self.s, self.r_star, self.r_rounded)
    }
}

pub fn guideline_table(rows: &[(usize, usize)], alpha: f64) -> Result<Vec<GuidelineRow>> {
    rows.iter()
        .map(|&(l, s)| {
            let r_star = optimal_rate(l, s, alpha)?;
            Ok(GuidelineRow { l, s, r_star, r_rounded: round_rate(r_star) })
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn legacy_rule() {
        assert_eq!(legacy_rate(16).unwrap(), 6);
        assert_eq!(legacy_rate(8).unwrap(), 12);
        assert!(matches!(legacy_rate(32), Err(Error::Unsupported(_))));
    }

    #[test]
    fn optimal_rate_examples() {
        let two = |l, s| format!("{:.2}", optimal_rate(l, s, 32.0).unwrap());
        assert_eq!(two(512, 16), "5.00");
        assert_eq!(two(769, 8), "15.35");
        assert_eq!(two(128, 16), "1.00");
        assert_eq!(two(896, 8), "18.00");
        assert!(optimal_rate(32, 16, 32.0).is_err());
        assert!(optimal_rate(16, 16, 32.0).is_err());
    }

    #[test]
    fn table_examples() {
        let rows = guideline_table(&[(640, 16), (320, 8)], 32.0).unwrap();
        assert_eq!(rows[0].to_string(), "640 16 6.33 6");
        assert_eq!(rows[1].to_string(), "320 8 6.00 6");
        assert_eq!(guideline_rows().len(), 20);
        assert!(guideline_table(&[(10, 8)], 32.0).is_err());
    }

    #[test]
    fn diagnosis_examples() {
        let c = validate_config(512, 16, 6, 32.0).unwrap();
        assert_eq!((c.fov, c.diagnosis), (608.0, Diagnosis::InvalidKernelRegion));
        let c = validate_config(769, 8, 12, 32.0).unwrap();
        assert_eq!((c.fov, c.diagnosis), (608.0, Diagnosis::UnderCoverage));
        let c = validate_config(512, 16, 5, 32.0).unwrap();
        assert_eq!((c.fov, c.diagnosis), (512.0, Diagnosis::Matched));
    }

    #[test]
    fn rounding_rules() {
        assert_eq!(round_rate(2.5), 3);
        assert_eq!(round_rate(2.49), 2);
        assert_eq!(round_rate(0.2), 1);
        assert_eq!(round_rate(15.35), 15);
    }

    #[test]
    fn guideline_round_trip_within_rounding_slack() {
        for row in guideline_table(&guideline_rows(), 32.0).unwrap() {
            let c = validate_config(row.l, row.s, row.r_rounded, 32.0).unwrap();
            assert!((c.fov - row.l as f64).abs() <= 3.0 * row.s as f64, "{row}");
        }
    }

    #[test]
    fn anchor_rates_are_reported_side_by_side() {
        let rep = advise(512, 512, 16, None, 32.0).unwrap();
        assert_eq!(rep.r_rounded, 5);
        assert_eq!(rep.legacy_rate, Some(6));
        assert_eq!(rep.diagnosis, Diagnosis::Matched);
        assert!(!rep.asymmetric);
    }

    #[test]
    fn rectangular_uses_shorter_side() {
        let rep = advise(512, 1024, 16, Some(6), 32.0).unwrap();
        assert!(rep.asymmetric);
        assert_eq!(rep.image_size, 512);
        assert_eq!(rep.diagnosis, Diagnosis::InvalidKernelRegion);
        assert_eq!(rep.fov_end_to_end, 512.0);
    }

    proptest::proptest! {
        #[test]
        fn monotone_in_size_and_stride(l in 40usize..4000, s in 1usize..64) {
            let r = optimal_rate(l, s, 32.0).unwrap();
            proptest::prop_assert!(optimal_rate(l + 1, s, 32.0).unwrap() > r);
            proptest::prop_assert!(optimal_rate(l, s + 1, 32.0).unwrap() < r);
        }
    }
}
