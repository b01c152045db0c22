//! Closed-form distortion predictors for one random ReLU layer.
//!
//! All functions take the input angle `θ ∈ [0, π]` between two vectors.
//! Weights are i.i.d. `N(0, 1/m)`, so quantities summed over the `m` output
//! coordinates do not depend on `m`.

use std::f64::consts::{FRAC_PI_4, PI};

use ndarray::ArrayView1;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg;
use crate::quad::adaptive_simpson;

/// Absolute tolerance used for every kernel quadrature.
pub const QUAD_TOL: f64 = 1e-10;

fn check_theta(theta: f64) -> Result<()> {
    if !(0.0..=PI).contains(&theta) {
        return Err(Error::InvalidArgument(format!(
            "angle {theta} outside [0, π]"
        )));
    }
    Ok(())
}

/// Angle and norms summarizing a pair of vectors.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct AnglePair {
    pub theta: f64,
    pub norm_x: f64,
    pub norm_y: f64,
}

impl AnglePair {
    pub fn new(theta: f64, norm_x: f64, norm_y: f64) -> Result<Self> {
        check_theta(theta)?;
        for r in [norm_x, norm_y] {
            if !(r > 0.0 && r <= 1.0 + 1e-12) {
                return Err(Error::InvalidArgument(format!("norm {r} outside (0, 1]")));
            }
        }
        Ok(AnglePair {
            theta,
            norm_x,
            norm_y,
        })
    }

    pub fn unit(theta: f64) -> Result<Self> {
        AnglePair::new(theta, 1.0, 1.0)
    }

    pub fn from_vectors(x: ArrayView1<f64>, y: ArrayView1<f64>) -> Result<Self> {
        let (theta, degenerate) = linalg::angle_between(x, y);
        if degenerate {
            return Err(Error::InvalidArgument("zero vector in angle pair".into()));
        }
        AnglePair::new(theta, linalg::norm(x), linalg::norm(y))
    }

    /// `‖x − y‖²` by the law of cosines.
    pub fn sq_distance(&self) -> f64 {
        self.norm_x * self.norm_x + self.norm_y * self.norm_y
            - 2.0 * self.norm_x * self.norm_y * self.theta.cos()
    }
}

/// Predicted output geometry of a pair after one random ReLU layer.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct DistortionPrediction {
    pub expected_sq_distance: f64,
    pub expected_cosine: f64,
    pub expected_hamming: f64,
    /// `½‖x − y‖² + ‖x‖‖y‖·dist(θ)`, the additive-sign variant, kept for
    /// side-by-side reporting only. It overshoots the antipodal case by 2×.
    pub printed_variant_sq_distance: f64,
}

/// `dist(θ) = (sin θ − θ cos θ) / π`.
pub fn dist_kernel(theta: f64) -> Result<f64> {
    check_theta(theta)?;
    Ok(dist_unchecked(theta))
}

#[inline]
fn dist_unchecked(theta: f64) -> f64 {
    (theta.sin() - theta * theta.cos()) / PI
}

/// `E⟨ρ(Mx), ρ(My)⟩ = ‖x‖‖y‖ (sin θ + (π − θ) cos θ) / (2π)`.
pub fn arccos_moment(theta: f64, norm_x: f64, norm_y: f64) -> Result<f64> {
    check_theta(theta)?;
    if !(norm_x > 0.0 && norm_y > 0.0) {
        return Err(Error::InvalidArgument("norms must be positive".into()));
    }
    Ok(norm_x * norm_y * (theta.sin() + (PI - theta) * theta.cos()) / (2.0 * PI))
}

/// The same moment as the integral `‖x‖‖y‖/π ∫₀^{π−θ} sin φ sin(φ + θ) dφ`.
pub fn arccos_moment_quadrature(theta: f64, norm_x: f64, norm_y: f64) -> Result<f64> {
    check_theta(theta)?;
    let integral = adaptive_simpson(|p| p.sin() * (p + theta).sin(), 0.0, PI - theta, QUAD_TOL);
    Ok(norm_x * norm_y * integral / PI)
}

/// Expected `‖ρ(Mx) − ρ(My)‖²` together with the other per-pair predictions.
///
/// `input_sq_distance` must agree with the pair through the law of cosines.
pub fn expected_sq_distance(pair: &AnglePair, input_sq_distance: f64) -> Result<DistortionPrediction> {
    let implied = pair.sq_distance();
    if (implied - input_sq_distance).abs() > 1e-9 * implied.abs().max(1.0) {
        return Err(Error::InvalidArgument(format!(
            "squared distance {input_sq_distance} inconsistent with angle/norms ({implied})"
        )));
    }
    let d = dist_unchecked(pair.theta);
    let scale = pair.norm_x * pair.norm_y;
    Ok(DistortionPrediction {
        expected_sq_distance: (0.5 * input_sq_distance - scale * d).max(0.0),
        expected_cosine: cosine_unchecked(pair.theta),
        expected_hamming: pair.theta / PI,
        printed_variant_sq_distance: 0.5 * input_sq_distance + scale * d,
    })
}

/// Expected squared output distance for a unit-norm pair at angle `θ`.
pub fn expected_sq_distance_unit(theta: f64) -> Result<f64> {
    let pair = AnglePair::unit(theta)?;
    Ok(expected_sq_distance(&pair, pair.sq_distance())?.expected_sq_distance)
}

/// Output cosine `cos θ + dist(θ)`, in `[0, 1]`.
pub fn expected_cosine(theta: f64) -> Result<f64> {
    check_theta(theta)?;
    Ok(cosine_unchecked(theta))
}

#[inline]
fn cosine_unchecked(theta: f64) -> f64 {
    (theta.cos() + dist_unchecked(theta)).clamp(0.0, 1.0)
}

/// Output angle after `layers` random ReLU layers, iterating
/// `θ ← acos(cos θ + dist θ)`.
pub fn angle_map(theta: f64, layers: u32) -> Result<f64> {
    check_theta(theta)?;
    let mut t = theta;
    for _ in 0..layers {
        t = cosine_unchecked(t).acos();
    }
    Ok(t)
}

/// Reference decay line `0.95^q · θ`, meaningful for `θ ∈ [0, π/4]`.
pub fn angle_decay_reference(theta: f64, layers: u32) -> Result<f64> {
    if !(0.0..=FRAC_PI_4).contains(&theta) {
        return Err(Error::InvalidArgument(format!(
            "reference decay defined on [0, π/4], got {theta}"
        )));
    }
    Ok(0.95f64.powi(layers as i32) * theta)
}

/// Probability that one Gaussian row puts `x` and `y` on different sides: `θ/π`.
pub fn hamming_expectation(theta: f64) -> Result<f64> {
    check_theta(theta)?;
    Ok(theta / PI)
}

/// Fourth-order moments of `(a, b) = (ρ(gᵀx), ρ(gᵀy))` for unit `x, y` and
/// standard normal `g`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct HigherMoments {
    /// `E ρ(a)⁴`
    pub m4: f64,
    /// `E ρ(a)³ρ(b)` (equal to `E ρ(a)ρ(b)³` by exchangeability)
    pub m31: f64,
    /// `E ρ(a)²ρ(b)²`
    pub m22: f64,
    /// `m²·E z_i²`: variance of `(ρ(a) − ρ(b))²`.
    pub z_var: f64,
}

/// Bound on `m²·E z_i²` claimed for sets inside the unit ball.
pub const Z_VAR_BOUND: f64 = 2.1;

pub fn higher_moments(theta: f64) -> Result<HigherMoments> {
    check_theta(theta)?;
    let end = PI - theta;
    let m31 = 4.0 / PI
        * adaptive_simpson(|p| p.sin().powi(3) * (p + theta).sin(), 0.0, end, QUAD_TOL);
    let m22 = 4.0 / PI
        * adaptive_simpson(|p| (p.sin() * (p + theta).sin()).powi(2), 0.0, end, QUAD_TOL);
    let m4 = 1.5;
    let mean = 1.0 - cosine_unchecked(theta);
    let fourth = 2.0 * m4 - 8.0 * m31 + 6.0 * m22;
    Ok(HigherMoments {
        m4,
        m31,
        m22,
        z_var: (fourth - mean * mean).max(0.0),
    })
}

/// One row of the plotting table emitted by `kernel-table`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct KernelRow {
    pub theta: f64,
    pub dist: f64,
    pub expected_cosine: f64,
    pub expected_hamming: f64,
    pub expected_sq_distance_unit: f64,
    pub m31: f64,
    pub m22: f64,
}

/// Kernels on `points` evenly spaced angles spanning `[0, π]`.
pub fn kernel_table(points: usize) -> Result<Vec<KernelRow>> {
    if points < 2 {
        return Err(Error::InvalidArgument("kernel table needs ≥ 2 grid points".into()));
    }
    (0..points)
        .map(|i| {
            let theta = if i + 1 == points {
                PI
            } else {
                PI * (i as f64 / (points - 1) as f64)
            };
            let hm = higher_moments(theta)?;
            Ok(KernelRow {
                theta,
                dist: dist_kernel(theta)?,
                expected_cosine: expected_cosine(theta)?,
                expected_hamming: hamming_expectation(theta)?,
                expected_sq_distance_unit: expected_sq_distance_unit(theta)?,
                m31: hm.m31,
                m22: hm.m22,
            })
        })
        .collect()
}
