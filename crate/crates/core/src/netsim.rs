//! Seeded random Gaussian layers, networks and sign hashing.

use ndarray::{concatenate, Array1, Array2, ArrayView1, ArrayView2, Axis};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::rng::Stream;

/// Points per matrix-multiply block. Fixed so results do not depend on how
/// blocks are scheduled across workers.
pub const FORWARD_BLOCK: usize = 64;

/// Pointwise activation. All variants except `Sign` are semi-truncated
/// linear: `f(0) = 0`, `0 < f(x) ≤ x` for `x > 0`, `x ≤ f(x) ≤ 0` for `x < 0`,
/// and 1-Lipschitz.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize, Default)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum ActivationKind {
    #[default]
    Relu,
    CappedRelu {
        cap: f64,
    },
    HardTanh {
        lo: f64,
        hi: f64,
    },
    Identity,
    Sign,
}

impl ActivationKind {
    pub fn validate(&self) -> Result<()> {
        match *self {
            ActivationKind::CappedRelu { cap } if !(cap > 0.0) => Err(Error::InvalidArgument(
                format!("capped relu needs a positive cap, got {cap}"),
            )),
            ActivationKind::HardTanh { lo, hi } if !(lo <= 0.0 && hi > 0.0) => Err(
                Error::InvalidArgument(format!("hard tanh needs lo ≤ 0 < hi, got [{lo}, {hi}]")),
            ),
            _ => Ok(()),
        }
    }

    #[inline]
    pub fn apply(&self, x: f64) -> f64 {
        match *self {
            ActivationKind::Relu => x.max(0.0),
            ActivationKind::CappedRelu { cap } => x.max(0.0).min(cap),
            ActivationKind::HardTanh { lo, hi } => x.clamp(lo, hi),
            ActivationKind::Identity => x,
            ActivationKind::Sign => sgn(x),
        }
    }

    pub fn is_semi_truncated(&self) -> bool {
        !matches!(self, ActivationKind::Sign)
    }
}

/// `sgn(x) = +1` for `x > 0`, else `−1` (so `sgn(0) = −1`).
#[inline]
pub fn sgn(x: f64) -> f64 {
    if x > 0.0 {
        1.0
    } else {
        -1.0
    }
}

/// Everything needed to rebuild a layer.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct LayerSpec {
    pub n: usize,
    pub m: usize,
    #[serde(default)]
    pub activation: ActivationKind,
    #[serde(default)]
    pub renormalize: bool,
    pub seed: u64,
}

impl LayerSpec {
    pub fn build(&self) -> Result<Layer> {
        let mut layer = make_layer(self.n, self.m, self.activation, self.seed)?;
        layer.renormalize = self.renormalize;
        Ok(layer)
    }
}

/// An `m×n` weight matrix with i.i.d. `N(0, 1/m)` entries and an activation.
#[derive(Clone, Debug, PartialEq)]
pub struct Layer {
    pub weights: Array2<f64>,
    pub activation: ActivationKind,
    pub renormalize: bool,
    pub seed: u64,
}

/// Builds a layer. Row `i` is drawn from ChaCha stream `i` of `seed` with the
/// polar Gaussian sampler and scaled by `1/√m`, so the matrix is a pure
/// function of `(seed, m, n)`.
pub fn make_layer(n: usize, m: usize, activation: ActivationKind, seed: u64) -> Result<Layer> {
    if n == 0 || m == 0 {
        return Err(Error::InvalidArgument(format!("layer dims must be ≥ 1, got {m}×{n}")));
    }
    activation.validate()?;
    let scale = 1.0 / (m as f64).sqrt();
    let mut weights = Array2::zeros((m, n));
    weights
        .axis_iter_mut(Axis(0))
        .into_par_iter()
        .enumerate()
        .for_each(|(i, mut row)| {
            let mut s = Stream::indexed(seed, i as u64);
            s.fill_gaussian(row.as_slice_mut().expect("row-major"), scale);
        });
    Ok(Layer {
        weights,
        activation,
        renormalize: false,
        seed,
    })
}

impl Layer {
    pub fn input_dim(&self) -> usize {
        self.weights.ncols()
    }

    pub fn output_dim(&self) -> usize {
        self.weights.nrows()
    }

    pub fn spec(&self) -> LayerSpec {
        LayerSpec {
            n: self.input_dim(),
            m: self.output_dim(),
            activation: self.activation,
            renormalize: self.renormalize,
            seed: self.seed,
        }
    }

    fn check_dim(&self, n: usize) -> Result<()> {
        if n != self.input_dim() {
            return Err(Error::InvalidArgument(format!(
                "point dimension {n} does not match layer input {}",
                self.input_dim()
            )));
        }
        Ok(())
    }

    /// `Mx` for each row of `points`.
    pub fn preactivate(&self, points: ArrayView2<f64>) -> Result<Array2<f64>> {
        self.check_dim(points.ncols())?;
        let blocks: Vec<Array2<f64>> = points
            .axis_chunks_iter(Axis(0), FORWARD_BLOCK)
            .collect::<Vec<_>>()
            .into_par_iter()
            .map(|block| block.dot(&self.weights.t()))
            .collect();
        if blocks.is_empty() {
            return Ok(Array2::zeros((0, self.output_dim())));
        }
        let views: Vec<_> = blocks.iter().map(|b| b.view()).collect();
        Ok(concatenate(Axis(0), &views).expect("blocks share width"))
    }

    /// `f(Mx)` for each row, renormalized to the unit sphere if the layer
    /// says so (zero rows stay zero).
    pub fn apply(&self, points: ArrayView2<f64>) -> Result<Array2<f64>> {
        let mut out = self.preactivate(points)?;
        let act = self.activation;
        out.mapv_inplace(|v| act.apply(v));
        if self.renormalize {
            for mut row in out.axis_iter_mut(Axis(0)) {
                let r = row.dot(&row).sqrt();
                if r > 0.0 {
                    row.mapv_inplace(|v| v / r);
                }
            }
        }
        Ok(out)
    }

    pub fn apply_one(&self, x: ArrayView1<f64>) -> Result<Array1<f64>> {
        let out = self.apply(x.insert_axis(Axis(0)))?;
        Ok(out.row(0).to_owned())
    }

    /// `Mᵀv`.
    pub fn transpose_apply(&self, v: ArrayView1<f64>) -> Result<Array1<f64>> {
        if v.len() != self.output_dim() {
            return Err(Error::InvalidArgument(format!(
                "vector length {} does not match layer output {}",
                v.len(),
                self.output_dim()
            )));
        }
        Ok(self.weights.t().dot(&v))
    }
}

/// `g(x) = sgn(f(Mx)) ∈ {−1, +1}^m`.
pub fn binary_hash(layer: &Layer, point: ArrayView1<f64>) -> Result<Vec<i8>> {
    Ok(binary_hash_batch(layer, point.insert_axis(Axis(0)))?.remove(0))
}

pub fn binary_hash_batch(layer: &Layer, points: ArrayView2<f64>) -> Result<Vec<Vec<i8>>> {
    let pre = layer.preactivate(points)?;
    let act = layer.activation;
    Ok(pre
        .axis_iter(Axis(0))
        .map(|row| {
            row.iter()
                .map(|&v| if act.apply(v) > 0.0 { 1 } else { -1 })
                .collect()
        })
        .collect())
}

/// Fraction of disagreeing coordinates.
pub fn hamming_fraction(a: &[i8], b: &[i8]) -> f64 {
    assert_eq!(a.len(), b.len(), "codes must have equal length");
    if a.is_empty() {
        return 0.0;
    }
    a.iter().zip(b).filter(|(x, y)| x != y).count() as f64 / a.len() as f64
}

/// Radius inflation of a covering ball through one layer of width `m`:
/// `1 + ω/√m`.
pub fn covering_growth_factor(omega: f64, m: usize) -> Result<f64> {
    if !(omega >= 0.0) || m == 0 {
        return Err(Error::InvalidArgument("need ω ≥ 0 and m ≥ 1".into()));
    }
    Ok(1.0 + omega / (m as f64).sqrt())
}

/// Product of per-layer growth factors.
pub fn chained_growth_factor(omega: f64, widths: &[usize]) -> Result<f64> {
    widths
        .iter()
        .try_fold(1.0, |acc, &m| Ok(acc * covering_growth_factor(omega, m)?))
}

/// A stack of layers with chained dimensions. Layers are stored as specs
/// and materialized one at a time, so wide networks never hold more than
/// one weight matrix.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RandomNetwork {
    pub layers: Vec<LayerSpec>,
}

impl RandomNetwork {
    pub fn new(layers: Vec<LayerSpec>) -> Result<Self> {
        if layers.is_empty() {
            return Err(Error::InvalidArgument("network needs at least one layer".into()));
        }
        for (i, w) in layers.windows(2).enumerate() {
            if w[1].n != w[0].m {
                return Err(Error::InvalidArgument(format!(
                    "layer {} expects input {} but layer {i} outputs {}",
                    i + 1,
                    w[1].n,
                    w[0].m
                )));
            }
        }
        for l in &layers {
            l.activation.validate()?;
            if l.n == 0 || l.m == 0 {
                return Err(Error::InvalidArgument("layer dims must be ≥ 1".into()));
            }
        }
        Ok(RandomNetwork { layers })
    }

    /// `depth` layers of the same activation; seeds derived from `seed`.
    pub fn uniform(input_dim: usize, widths: &[usize], activation: ActivationKind, seed: u64) -> Result<Self> {
        let mut n = input_dim;
        let layers = widths
            .iter()
            .enumerate()
            .map(|(i, &m)| {
                let spec = LayerSpec {
                    n,
                    m,
                    activation,
                    renormalize: false,
                    seed: crate::rng::derive_seed(seed, &[crate::rng::tag("layer"), i as u64]),
                };
                n = m;
                spec
            })
            .collect();
        RandomNetwork::new(layers)
    }

    pub fn depth(&self) -> usize {
        self.layers.len()
    }

    pub fn input_dim(&self) -> usize {
        self.layers[0].n
    }

    pub fn widths(&self) -> Vec<usize> {
        self.layers.iter().map(|l| l.m).collect()
    }
}

/// Propagates `points` through every layer and returns the output after
/// each one.
pub fn forward(net: &RandomNetwork, points: ArrayView2<f64>) -> Result<Vec<Array2<f64>>> {
    let mut outs = Vec::with_capacity(net.depth());
    forward_each(net, points, |_, out| {
        outs.push(out.clone());
        Ok(())
    })?;
    Ok(outs)
}

/// Like [`forward`] but hands each intermediate to `visit` instead of
/// keeping all of them.
pub fn forward_each<F>(net: &RandomNetwork, points: ArrayView2<f64>, mut visit: F) -> Result<Array2<f64>>
where
    F: FnMut(usize, &Array2<f64>) -> Result<()>,
{
    if points.ncols() != net.input_dim() {
        return Err(Error::InvalidArgument(format!(
            "point dimension {} does not match network input {}",
            points.ncols(),
            net.input_dim()
        )));
    }
    let mut current = points.to_owned();
    for (i, spec) in net.layers.iter().enumerate() {
        let layer = spec.build()?;
        current = layer.apply(current.view())?;
        visit(i, &current)?;
    }
    Ok(current)
}

#[cfg(test)]
mod tests {
    use super::*;
    use ndarray::array;

    #[test]
    fn layer_is_deterministic() {
        let a = make_layer(4, 100, ActivationKind::Relu, 5).unwrap();
        let b = make_layer(4, 100, ActivationKind::Relu, 5).unwrap();
        assert!(a.weights.iter().zip(b.weights.iter()).all(|(x, y)| x.to_bits() == y.to_bits()));
        let c = make_layer(4, 100, ActivationKind::Relu, 6).unwrap();
        assert_ne!(a.weights, c.weights);
        assert!(make_layer(0, 3, ActivationKind::Relu, 0).is_err());
    }

    #[test]
    fn entry_statistics() {
        let m = 10_000;
        let layer = make_layer(100, m, ActivationKind::Relu, 1).unwrap();
        let count = layer.weights.len() as f64;
        let mean = layer.weights.mean().unwrap();
        // CLT: sd of the mean is (1/√m)/√count
        assert!(mean.abs() <= 5.0 * (1.0 / (m as f64).sqrt()) / count.sqrt());
        let var = layer.weights.mapv(|v| v * v).mean().unwrap();
        // Var of a squared N(0, σ²) is 2σ⁴
        let sigma2 = 1.0 / m as f64;
        assert!((var - sigma2).abs() <= 5.0 * (2.0f64).sqrt() * sigma2 / count.sqrt());
        for col in layer.weights.axis_iter(Axis(1)) {
            let r = col.dot(&col).sqrt();
            assert!((r - 1.0).abs() < 0.05, "{r}");
        }
    }

    #[test]
    fn activations_are_semi_truncated() {
        let acts = [
            ActivationKind::Relu,
            ActivationKind::CappedRelu { cap: 0.5 },
            ActivationKind::HardTanh { lo: -1.0, hi: 1.0 },
            ActivationKind::Identity,
        ];
        let xs: Vec<f64> = (-40..=40).map(|i| i as f64 * 0.1).collect();
        for act in acts {
            assert_eq!(act.apply(0.0), 0.0);
            for &x in &xs {
                let f = act.apply(x);
                if x > 0.0 {
                    assert!(f > 0.0 && f <= x);
                } else if x < 0.0 {
                    assert!(f <= 0.0 && f >= x);
                }
                for &y in &xs {
                    assert!((f - act.apply(y)).abs() <= (x - y).abs() + 1e-15);
                }
            }
        }
        assert!(ActivationKind::HardTanh { lo: 0.5, hi: 1.0 }.validate().is_err());
        assert!(ActivationKind::CappedRelu { cap: 0.0 }.validate().is_err());
    }

    #[test]
    fn zero_input_gives_zero() {
        let net = RandomNetwork::uniform(5, &[7, 3], ActivationKind::Relu, 1).unwrap();
        let outs = forward(&net, Array2::zeros((1, 5)).view()).unwrap();
        assert!(outs.iter().all(|o| o.iter().all(|v| *v == 0.0)));
    }

    #[test]
    fn relu_is_positively_homogeneous() {
        let net = RandomNetwork::uniform(6, &[10, 8, 4], ActivationKind::Relu, 2).unwrap();
        let x = array![[0.1, -0.3, 0.2, 0.5, -0.1, 0.05]];
        let a = forward(&net, x.view()).unwrap();
        let b = forward(&net, (&x * 2.0).view()).unwrap();
        for (u, v) in a.iter().zip(&b) {
            assert!(u.iter().zip(v.iter()).all(|(p, q)| (2.0 * p - q).abs() < 1e-14));
        }
    }

    #[test]
    fn forward_matches_reference_matvec() {
        let layer = make_layer(8, 16, ActivationKind::Relu, 99).unwrap();
        let net = RandomNetwork::new(vec![layer.spec()]).unwrap();
        let mut x = Array1::zeros(8);
        x[0] = 1.0;
        let out = forward(&net, x.view().insert_axis(Axis(0))).unwrap();
        // straightforward reference: row i of M dotted with e₁ is M[i][0]
        let mut s_rows = Vec::new();
        for i in 0..16u64 {
            let mut s = Stream::indexed(99, i);
            s_rows.push(s.gaussian() / 4.0);
        }
        for (i, &v) in s_rows.iter().enumerate() {
            assert_eq!(out[0][[0, i]], v.max(0.0));
        }
    }

    #[test]
    fn renormalized_rows_are_unit() {
        let mut spec = make_layer(5, 50, ActivationKind::Relu, 3).unwrap().spec();
        spec.renormalize = true;
        let net = RandomNetwork::new(vec![spec]).unwrap();
        let x = array![[0.3, 0.1, -0.2, 0.4, 0.0]];
        let out = forward(&net, x.view()).unwrap();
        let r = out[0].row(0).dot(&out[0].row(0)).sqrt();
        assert!((r - 1.0).abs() < 1e-12);
    }

    #[test]
    fn dimension_errors() {
        let net = RandomNetwork::uniform(4, &[3], ActivationKind::Relu, 0).unwrap();
        assert!(forward(&net, Array2::zeros((2, 5)).view()).is_err());
        let bad = vec![
            LayerSpec { n: 4, m: 3, activation: ActivationKind::Relu, renormalize: false, seed: 0 },
            LayerSpec { n: 4, m: 3, activation: ActivationKind::Relu, renormalize: false, seed: 1 },
        ];
        assert!(RandomNetwork::new(bad).is_err());
        assert!(RandomNetwork::new(vec![]).is_err());
    }

    #[test]
    fn hash_examples() {
        let layer = make_layer(10, 500, ActivationKind::Relu, 4).unwrap();
        let mut s = Stream::new(1);
        let x = crate::linalg::random_unit(&mut s, 10);
        let hx = binary_hash(&layer, x.view()).unwrap();
        let hn = binary_hash(&layer, (-&x).view()).unwrap();
        assert_eq!(hamming_fraction(&hx, &hn), 1.0);
        assert_eq!(hamming_fraction(&hx, &hx), 0.0);
        let z = binary_hash(&layer, Array1::zeros(10).view()).unwrap();
        assert!(z.iter().all(|&v| v == -1));
    }

    #[test]
    fn orthogonal_hash_fraction() {
        let layer = make_layer(2, 10_000, ActivationKind::Relu, 8).unwrap();
        let h = binary_hash_batch(&layer, array![[1.0, 0.0], [0.0, 1.0]].view()).unwrap();
        // Binomial(10⁴, ½): sd 0.005
        assert!((hamming_fraction(&h[0], &h[1]) - 0.5).abs() <= 0.02);
    }

    #[test]
    fn growth_factors() {
        assert!((covering_growth_factor(2.0, 400).unwrap() - 1.1).abs() < 1e-15);
        assert_eq!(covering_growth_factor(0.0, 7).unwrap(), 1.0);
        let w = (5.0 + 10f64.ln()).sqrt();
        assert!((covering_growth_factor(w, 100).unwrap() - 1.2702).abs() < 1e-4);
        let chained = chained_growth_factor(2.0, &[400, 100, 25]).unwrap();
        assert!((chained - 1.1 * 1.2 * 1.4).abs() < 1e-14);
    }
}
