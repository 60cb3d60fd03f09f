//! Axis-aligned 2D Gaussian fit by Levenberg–Marquardt.
//!
//! Model: `A·exp(−(x−x_c)²/(2σ_x²) − (y−y_c)²/(2σ_y²)) + offset`, with `x` the
//! column and `y` the row index. Initialization from intensity moments,
//! forward-difference Jacobian, Marquardt-scaled damping.

use nalgebra::{Matrix6, Vector6};
use serde::{Deserialize, Serialize};

use crate::erf::ErfMap;
use crate::error::{invalid, Result};

const MAX_ITERATIONS: usize = 200;
const REL_TOLERANCE: f64 = 1e-10;
const INITIAL_DAMPING: f64 = 1e-3;
const MAX_DAMPING: f64 = 1e12;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GaussianFit {
    pub x_c: f64,
    pub y_c: f64,
    pub sigma_x: f64,
    pub sigma_y: f64,
    pub amplitude: f64,
    pub offset: f64,
    pub rms_residual: f64,
    pub iterations: usize,
    pub converged: bool,
}

/// Parameter order: `[x_c, y_c, sigma_x, sigma_y, amplitude, offset]`.
type Params = Vector6<f64>;

struct Grid<'a> {
    height: usize,
    width: usize,
    values: &'a [f64],
}

impl Grid<'_> {
    /// Residuals `model − data` and their sum of squares.
    fn residuals(&self, p: &Params, out: &mut [f64]) -> f64 {
        let (xc, yc, sx, sy, amp, off) = (p[0], p[1], p[2], p[3], p[4], p[5]);
        let gx: Vec<f64> = (0..self.width).map(|x| (-(x as f64 - xc).powi(2) / (2.0 * sx * sx)).exp()).collect();
        let mut cost = 0.0;
        for y in 0..self.height {
            let gy = amp * (-(y as f64 - yc).powi(2) / (2.0 * sy * sy)).exp();
            let row = &self.values[y * self.width..(y + 1) * self.width];
            let dst = &mut out[y * self.width..(y + 1) * self.width];
            for ((d, &g), &v) in dst.iter_mut().zip(&gx).zip(row) {
                *d = gy * g + off - v;
                cost += *d * *d;
            }
        }
        cost
    }
}

/// Starting point: offset at the median, amplitude to the maximum, center and
/// spread from the region above half maximum. A Gaussian's half-maximum region
/// is an ellipse with per-axis coordinate variance `σ²·ln2/2`.
fn initial_guess(grid: &Grid) -> Option<Params> {
    let mut sorted = grid.values.to_vec();
    sorted.sort_by(f64::total_cmp);
    let offset = sorted[sorted.len() / 2];
    let max = sorted[sorted.len() - 1];
    let amp = max - offset;
    if !(amp > 0.0) {
        return None;
    }
    let half = offset + amp / 2.0;
    let (mut n, mut sx, mut sy, mut sxx, mut syy) = (0.0, 0.0, 0.0, 0.0, 0.0);
    for y in 0..grid.height {
        for x in 0..grid.width {
            if grid.values[y * grid.width + x] >= half {
                let (xf, yf) = (x as f64, y as f64);
                n += 1.0;
                sx += xf;
                sy += yf;
                sxx += xf * xf;
                syy += yf * yf;
            }
        }
    }
    let (mx, my) = (sx / n, sy / n);
    let spread = |m2: f64, m: f64| ((m2 / n - m * m).max(0.0) * 2.0 / std::f64::consts::LN_2).sqrt().max(0.5);
    Some(Params::new(mx, my, spread(sxx, mx), spread(syy, my), amp, offset))
}

fn finish(p: &Params, cost: f64, n: usize, iterations: usize, converged: bool) -> GaussianFit {
    GaussianFit {
        x_c: p[0],
        y_c: p[1],
        sigma_x: p[2].abs(),
        sigma_y: p[3].abs(),
        amplitude: p[4],
        offset: p[5],
        rms_residual: (cost / n as f64).sqrt(),
        iterations,
        converged,
    }
}

/// Fits a row-major `height × width` grid; returns the fit and the cost after
/// every accepted step (starting with the initial cost).
pub fn fit_gaussian_grid(height: usize, width: usize, values: &[f64]) -> Result<(GaussianFit, Vec<f64>)> {
    if values.len() != height * width {
        return Err(invalid(format!("{} values for a {height}x{width} grid", values.len())));
    }
    let nonzero = values.iter().filter(|&&v| v != 0.0).count();
    if nonzero < 6 {
        return Err(invalid(format!("a 2D Gaussian fit needs >= 6 nonzero pixels, got {nonzero}")));
    }
    let grid = Grid { height, width, values };
    let n = values.len();
    let mut r = vec![0.0; n];

    let Some(mut p) = initial_guess(&grid) else {
        // constant map: no peak to fit
        let p = Params::new((width as f64 - 1.0) / 2.0, (height as f64 - 1.0) / 2.0, 0.0, 0.0, 0.0, values[0]);
        return Ok((finish(&p, 0.0, n, 0, false), vec![0.0]));
    };

    let mut cost = grid.residuals(&p, &mut r);
    let mut history = vec![cost];
    let mut lambda = INITIAL_DAMPING;
    let mut jac = vec![[0.0; 6]; n];
    let mut r_step = vec![0.0; n];
    let mut iterations = 0;
    let mut converged = false;

    'outer: while iterations < MAX_ITERATIONS {
        // forward-difference Jacobian of the residual vector
        for k in 0..6 {
            let h = 1e-6 * p[k].abs().max(1.0);
            let mut q = p;
            q[k] += h;
            grid.residuals(&q, &mut r_step);
            for (row, (a, b)) in jac.iter_mut().zip(r_step.iter().zip(&r)) {
                row[k] = (a - b) / h;
            }
        }
        let mut jtj = Matrix6::<f64>::zeros();
        let mut jtr = Vector6::<f64>::zeros();
        for (row, &res) in jac.iter().zip(&r) {
            for a in 0..6 {
                jtr[a] += row[a] * res;
                for b in a..6 {
                    jtj[(a, b)] += row[a] * row[b];
                }
            }
        }
        for a in 0..6 {
            for b in 0..a {
                jtj[(a, b)] = jtj[(b, a)];
            }
        }

        loop {
            iterations += 1;
            let mut damped = jtj;
            for a in 0..6 {
                damped[(a, a)] += lambda * jtj[(a, a)].max(1e-12);
            }
            let step = match damped.cholesky() {
                Some(ch) => ch.solve(&(-jtr)),
                None => match damped.lu().solve(&(-jtr)) {
                    Some(s) => s,
                    None => {
                        lambda *= 10.0;
                        if lambda > MAX_DAMPING || iterations >= MAX_ITERATIONS {
                            break 'outer;
                        }
                        continue;
                    }
                },
            };
            let trial = p + step;
            let trial_cost = grid.residuals(&trial, &mut r_step);
            if trial_cost.is_finite() && trial_cost < cost {
                let rel = (cost - trial_cost) / cost.max(f64::MIN_POSITIVE);
                p = trial;
                cost = trial_cost;
                std::mem::swap(&mut r, &mut r_step);
                history.push(cost);
                lambda = (lambda / 10.0).max(1e-15);
                if rel < REL_TOLERANCE || cost == 0.0 {
                    converged = true;
                    break 'outer;
                }
                break;
            }
            lambda *= 10.0;
            if lambda > MAX_DAMPING {
                // no step reduces the cost any further: a stationary point
                converged = true;
                break 'outer;
            }
            if iterations >= MAX_ITERATIONS {
                break 'outer;
            }
        }
    }
    let fit = finish(&p, cost, n, iterations, converged && p[2] != 0.0 && p[3] != 0.0);
    Ok((fit, history))
}

pub fn fit_gaussian_2d(erf: &ErfMap) -> Result<GaussianFit> {
    Ok(fit_gaussian_grid(erf.height(), erf.width(), erf.values())?.0)
}
