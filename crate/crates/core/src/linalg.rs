//! Small vector helpers shared by the simulation and analytics code.

use ndarray::{Array1, ArrayView1};
use std::f64::consts::FRAC_PI_2;

use crate::rng::Stream;

#[inline]
pub fn dot(a: ArrayView1<f64>, b: ArrayView1<f64>) -> f64 {
    a.dot(&b)
}

#[inline]
pub fn norm(a: ArrayView1<f64>) -> f64 {
    a.dot(&a).sqrt()
}

pub fn sq_distance(a: ArrayView1<f64>, b: ArrayView1<f64>) -> f64 {
    a.iter().zip(b.iter()).map(|(x, y)| (x - y) * (x - y)).sum()
}

pub fn distance(a: ArrayView1<f64>, b: ArrayView1<f64>) -> f64 {
    sq_distance(a, b).sqrt()
}

/// Angle between two vectors and whether it was defined by convention.
///
/// Uses `2·atan2(‖â − b̂‖, ‖â + b̂‖)`, which stays accurate for tiny angles
/// where `acos` of the cosine loses half the digits. A zero vector gives
/// `π/2` with the flag set.
pub fn angle_between(a: ArrayView1<f64>, b: ArrayView1<f64>) -> (f64, bool) {
    let na = norm(a);
    let nb = norm(b);
    if na == 0.0 || nb == 0.0 {
        return (FRAC_PI_2, true);
    }
    let mut diff = 0.0;
    let mut sum = 0.0;
    for (x, y) in a.iter().zip(b.iter()) {
        let (u, v) = (x / na, y / nb);
        diff += (u - v) * (u - v);
        sum += (u + v) * (u + v);
    }
    (2.0 * diff.sqrt().atan2(sum.sqrt()), false)
}

pub fn angle(a: ArrayView1<f64>, b: ArrayView1<f64>) -> f64 {
    angle_between(a, b).0
}

pub fn random_unit(stream: &mut Stream, n: usize) -> Array1<f64> {
    loop {
        let v = Array1::from_shape_fn(n, |_| stream.gaussian());
        let r = norm(v.view());
        if r > 0.0 {
            return v / r;
        }
    }
}

/// Uniform unit vector orthogonal to the unit vector `x`. Needs `n ≥ 2`.
pub fn orthogonal_unit(stream: &mut Stream, x: ArrayView1<f64>) -> Array1<f64> {
    loop {
        let mut u = Array1::from_shape_fn(x.len(), |_| stream.gaussian());
        let p = dot(u.view(), x);
        u.scaled_add(-p, &x);
        // second pass removes the rounding residue of the first
        let p = dot(u.view(), x);
        u.scaled_add(-p, &x);
        let r = norm(u.view());
        if r > 1e-8 {
            return u / r;
        }
    }
}

/// Unit pair `(x, y)` with `∠(x, y) = theta` exactly by construction:
/// `y = cos θ·x + sin θ·u` for a uniform unit `u ⟂ x`.
pub fn pair_at_angle(stream: &mut Stream, n: usize, theta: f64) -> (Array1<f64>, Array1<f64>) {
    let x = random_unit(stream, n);
    let u = orthogonal_unit(stream, x.view());
    let y = &x * theta.cos() + &u * theta.sin();
    (x, y)
}

/// Rescales `v` onto the unit ball if it lies outside it.
pub fn clip_to_unit_ball(v: &mut Array1<f64>) {
    let r = norm(v.view());
    if r > 1.0 {
        v.mapv_inplace(|t| t / r);
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use ndarray::array;
    use std::f64::consts::PI;

    #[test]
    fn angle_matches_acos_at_moderate_angles() {
        let a = array![1.0, 0.0, 0.0];
        let b = array![1.0, 1.0, 0.0];
        assert!((angle(a.view(), b.view()) - PI / 4.0).abs() < 1e-15);
        let c = array![-2.0, 0.0, 0.0];
        assert!((angle(a.view(), c.view()) - PI).abs() < 1e-15);
        assert_eq!(angle(a.view(), (&a * 3.0).view()), 0.0);
    }

    #[test]
    fn zero_vector_angle_is_flagged() {
        let a = array![1.0, 2.0];
        let z = array![0.0, 0.0];
        assert_eq!(angle_between(a.view(), z.view()), (FRAC_PI_2, true));
    }

    #[test]
    fn tiny_angles_are_resolved() {
        let t: f64 = 1e-9;
        let a = array![1.0, 0.0];
        let b = array![t.cos(), t.sin()];
        assert!((angle(a.view(), b.view()) - t).abs() < 1e-20);
    }

    #[test]
    fn controlled_pairs_have_exact_angle() {
        let mut s = Stream::new(5);
        for &theta in &[0.0, 0.1, 1.0, FRAC_PI_2, 3.0, PI] {
            let (x, y) = pair_at_angle(&mut s, 20, theta);
            assert!((norm(x.view()) - 1.0).abs() < 1e-12);
            assert!((norm(y.view()) - 1.0).abs() < 1e-12);
            let c = dot(x.view(), y.view()).clamp(-1.0, 1.0).acos();
            assert!((c - theta).abs() < 1e-7, "{c} vs {theta}");
        }
    }
}
