//! Monotone piecewise-cubic Hermite interpolation (Fritsch–Carlson) and a
//! few linear helpers.

use alloc::format;
use alloc::vec::Vec;

use crate::error::{Error, Result};
use crate::math::abs;

/// Shape-preserving cubic interpolant through strictly increasing abscissae.
/// Monotone data gives a monotone interpolant.
#[derive(Debug, Clone)]
pub struct Pchip {
    x: Vec<f64>,
    y: Vec<f64>,
    d: Vec<f64>,
}

impl Pchip {
    pub fn new(x: &[f64], y: &[f64]) -> Result<Self> {
        if x.len() != y.len() || x.len() < 2 {
            return Err(Error::Precondition(format!(
                "pchip needs matching abscissae and values with at least 2 points (got {} and {})",
                x.len(),
                y.len()
            )));
        }
        if let Some(k) = (1..x.len()).find(|&k| !(x[k] > x[k - 1])) {
            return Err(Error::Precondition(format!(
                "pchip abscissae must increase strictly: x[{}] = {} , x[{k}] = {}",
                k - 1,
                x[k - 1],
                x[k]
            )));
        }
        let n = x.len();
        let h: Vec<f64> = (0..n - 1).map(|k| x[k + 1] - x[k]).collect();
        let del: Vec<f64> = (0..n - 1).map(|k| (y[k + 1] - y[k]) / h[k]).collect();
        let mut d = alloc::vec![0.0; n];
        if n == 2 {
            d[0] = del[0];
            d[1] = del[0];
        } else {
            for k in 1..n - 1 {
                if del[k - 1] * del[k] > 0.0 {
                    let w1 = 2.0 * h[k] + h[k - 1];
                    let w2 = h[k] + 2.0 * h[k - 1];
                    d[k] = (w1 + w2) / (w1 / del[k - 1] + w2 / del[k]);
                }
            }
            d[0] = end_slope(h[0], h[1], del[0], del[1]);
            d[n - 1] = end_slope(h[n - 2], h[n - 3], del[n - 2], del[n - 3]);
        }
        Ok(Self { x: x.to_vec(), y: y.to_vec(), d })
    }

    pub fn domain(&self) -> (f64, f64) {
        (self.x[0], self.x[self.x.len() - 1])
    }

    fn locate(&self, t: f64) -> usize {
        self.x.partition_point(|&v| v <= t).clamp(1, self.x.len() - 1) - 1
    }

    /// Value at `t`; outside the data range the end cubic is continued.
    pub fn eval(&self, t: f64) -> f64 {
        let k = self.locate(t);
        let h = self.x[k + 1] - self.x[k];
        let s = (t - self.x[k]) / h;
        let (y0, y1, d0, d1) = (self.y[k], self.y[k + 1], self.d[k] * h, self.d[k + 1] * h);
        let s2 = s * s;
        let s3 = s2 * s;
        (2.0 * s3 - 3.0 * s2 + 1.0) * y0 + (s3 - 2.0 * s2 + s) * d0 + (-2.0 * s3 + 3.0 * s2) * y1 + (s3 - s2) * d1
    }

    pub fn derivative(&self, t: f64) -> f64 {
        let k = self.locate(t);
        let h = self.x[k + 1] - self.x[k];
        let s = (t - self.x[k]) / h;
        let (y0, y1, d0, d1) = (self.y[k], self.y[k + 1], self.d[k] * h, self.d[k + 1] * h);
        let s2 = s * s;
        ((6.0 * s2 - 6.0 * s) * y0
            + (3.0 * s2 - 4.0 * s + 1.0) * d0
            + (-6.0 * s2 + 6.0 * s) * y1
            + (3.0 * s2 - 2.0 * s) * d1)
            / h
    }
}

/// Three-point end derivative, limited to keep monotone data monotone.
fn end_slope(h0: f64, h1: f64, del0: f64, del1: f64) -> f64 {
    let d = ((2.0 * h0 + h1) * del0 - h0 * del1) / (h0 + h1);
    if d * del0 <= 0.0 {
        0.0
    } else if del0 * del1 <= 0.0 && abs(d) > abs(3.0 * del0) {
        3.0 * del0
    } else {
        d
    }
}

/// Piecewise-linear interpolation on increasing `x`, clamped at the ends.
pub fn linear(x: &[f64], y: &[f64], t: f64) -> f64 {
    let n = x.len();
    if t <= x[0] {
        return y[0];
    }
    if t >= x[n - 1] {
        return y[n - 1];
    }
    let k = x.partition_point(|&v| v <= t).clamp(1, n - 1);
    let (x0, x1) = (x[k - 1], x[k]);
    y[k - 1] + (y[k] - y[k - 1]) * (t - x0) / (x1 - x0)
}

/// `n` evenly spaced points from `a` to `b` inclusive.
pub fn linspace(a: f64, b: f64, n: usize) -> Vec<f64> {
    match n {
        0 => Vec::new(),
        1 => alloc::vec![a],
        _ => (0..n).map(|k| if k == n - 1 { b } else { a + (b - a) * k as f64 / (n - 1) as f64 }).collect(),
    }
}
