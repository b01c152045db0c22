//! Low-complexity model sets and their width / covering quantities.

use std::collections::HashSet;

use ndarray::{s, Array1, Array2, ArrayView1, ArrayView2, Axis};
use rand::seq::index;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::{self, clip_to_unit_ball};
use crate::rng::{self, Stream};

/// Tolerance on `‖BᵀB − I‖_max` for subspace frames.
pub const ORTHONORMAL_TOL: f64 = 1e-10;

/// Points stored as rows, with one integer class label per row.
#[derive(Clone, Debug, PartialEq)]
pub struct LabeledCloud {
    pub points: Array2<f64>,
    pub labels: Vec<i64>,
}

impl LabeledCloud {
    pub fn new(points: Array2<f64>, labels: Vec<i64>) -> Result<Self> {
        if points.nrows() != labels.len() {
            return Err(Error::InvalidInput(format!(
                "{} points but {} labels",
                points.nrows(),
                labels.len()
            )));
        }
        Ok(LabeledCloud { points, labels })
    }

    pub fn unlabeled(points: Array2<f64>) -> Self {
        let labels = vec![0; points.nrows()];
        LabeledCloud { points, labels }
    }

    pub fn len(&self) -> usize {
        self.points.nrows()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn dim(&self) -> usize {
        self.points.ncols()
    }
}

#[derive(Clone, Debug, PartialEq)]
pub enum ModelKind {
    /// Union of `L` subspaces, each given by an `n×k` orthonormal frame.
    Gmm { bases: Vec<Array2<f64>> },
    /// `k`-sparse combinations of the unit-norm columns of an `n×L` dictionary.
    SparseDict {
        dictionary: Array2<f64>,
        sparsity: usize,
        orthonormal: bool,
    },
    /// An explicit finite set.
    Cloud(LabeledCloud),
}

/// A model set `K` intersected with the norm window `β ≤ ‖x‖ ≤ 1`.
///
/// Sampling honors the window; projection targets the structure intersected
/// with the unit ball (the lower radius is not enforced there).
#[derive(Clone, Debug, PartialEq)]
pub struct ModelSet {
    pub kind: ModelKind,
    pub ambient_dim: usize,
    pub beta: f64,
}

fn check_beta(beta: f64) -> Result<()> {
    if !(0.0..=1.0).contains(&beta) {
        return Err(Error::InvalidModel(format!("beta {beta} outside [0, 1]")));
    }
    Ok(())
}

/// Orthonormalizes the columns of `a` in place (two passes of modified
/// Gram–Schmidt). Returns false if a column is numerically dependent.
fn orthonormalize(a: &mut Array2<f64>) -> bool {
    let k = a.ncols();
    for j in 0..k {
        for _ in 0..2 {
            for i in 0..j {
                let p = a.column(i).dot(&a.column(j));
                let qi = a.column(i).to_owned();
                a.column_mut(j).scaled_add(-p, &qi);
            }
        }
        let r = linalg::norm(a.column(j));
        if r < 1e-12 {
            return false;
        }
        a.column_mut(j).mapv_inplace(|v| v / r);
    }
    true
}

fn gram_deviation(a: ArrayView2<f64>) -> f64 {
    let g = a.t().dot(&a);
    g.indexed_iter()
        .map(|((i, j), v)| (v - if i == j { 1.0 } else { 0.0 }).abs())
        .fold(0.0, f64::max)
}

impl ModelSet {
    /// GMM-of-subspaces from explicit frames.
    pub fn gmm(bases: Vec<Array2<f64>>, beta: f64) -> Result<Self> {
        check_beta(beta)?;
        let first = bases
            .first()
            .ok_or_else(|| Error::InvalidModel("GMM needs at least one subspace".into()))?;
        let (n, k) = first.dim();
        if k == 0 || k > n {
            return Err(Error::InvalidModel(format!("subspace dim k={k} with n={n}")));
        }
        for (j, b) in bases.iter().enumerate() {
            if b.dim() != (n, k) {
                return Err(Error::InvalidModel(format!("frame {j} has shape {:?}", b.dim())));
            }
            let dev = gram_deviation(b.view());
            if dev > ORTHONORMAL_TOL {
                return Err(Error::InvalidModel(format!(
                    "frame {j} is not orthonormal (Gram deviation {dev:e})"
                )));
            }
        }
        Ok(ModelSet {
            kind: ModelKind::Gmm { bases },
            ambient_dim: n,
            beta,
        })
    }

    /// `L` uniformly random `k`-dimensional subspaces of `ℝⁿ`.
    pub fn random_gmm(n: usize, subspaces: usize, k: usize, beta: f64, seed: u64) -> Result<Self> {
        if subspaces == 0 {
            return Err(Error::InvalidModel("GMM needs at least one subspace".into()));
        }
        if k == 0 || k > n {
            return Err(Error::InvalidModel(format!("subspace dim k={k} with n={n}")));
        }
        let mut bases = Vec::with_capacity(subspaces);
        for j in 0..subspaces {
            let mut s = Stream::indexed(rng::derive_seed(seed, &[rng::tag("gmm-basis")]), j as u64);
            loop {
                let mut b = Array2::from_shape_fn((n, k), |_| s.gaussian());
                if orthonormalize(&mut b) {
                    bases.push(b);
                    break;
                }
            }
        }
        ModelSet::gmm(bases, beta)
    }

    /// Sparse model; dictionary columns are normalized to unit length.
    pub fn sparse(mut dictionary: Array2<f64>, sparsity: usize, beta: f64) -> Result<Self> {
        check_beta(beta)?;
        let (n, l) = dictionary.dim();
        if n == 0 || l == 0 {
            return Err(Error::InvalidModel("empty dictionary".into()));
        }
        if sparsity == 0 || sparsity > n || sparsity > l {
            return Err(Error::InvalidModel(format!(
                "sparsity k={sparsity} with n={n}, L={l}"
            )));
        }
        for (j, mut col) in dictionary.axis_iter_mut(Axis(1)).enumerate() {
            let r = linalg::norm(col.view());
            if r == 0.0 || !r.is_finite() {
                return Err(Error::InvalidModel(format!("dictionary column {j} has norm {r}")));
            }
            col.mapv_inplace(|v| v / r);
        }
        let orthonormal = n == l && gram_deviation(dictionary.view()) <= ORTHONORMAL_TOL;
        Ok(ModelSet {
            kind: ModelKind::SparseDict {
                dictionary,
                sparsity,
                orthonormal,
            },
            ambient_dim: n,
            beta,
        })
    }

    /// `k`-sparse vectors in the standard basis of `ℝⁿ`.
    pub fn sparse_identity(n: usize, sparsity: usize, beta: f64) -> Result<Self> {
        ModelSet::sparse(Array2::eye(n), sparsity, beta)
    }

    pub fn cloud(cloud: LabeledCloud, beta: f64) -> Result<Self> {
        check_beta(beta)?;
        if cloud.is_empty() {
            return Err(Error::InvalidModel("empty cloud".into()));
        }
        Ok(ModelSet {
            ambient_dim: cloud.dim(),
            kind: ModelKind::Cloud(cloud),
            beta,
        })
    }

    pub fn name(&self) -> &'static str {
        match self.kind {
            ModelKind::Gmm { .. } => "gmm",
            ModelKind::SparseDict { .. } => "sparse",
            ModelKind::Cloud(_) => "cloud",
        }
    }

    /// `(L, k)` for the structured variants.
    pub fn structure(&self) -> Option<(usize, usize)> {
        match &self.kind {
            ModelKind::Gmm { bases } => Some((bases.len(), bases[0].ncols())),
            ModelKind::SparseDict {
                dictionary,
                sparsity,
                ..
            } => Some((dictionary.ncols(), *sparsity)),
            ModelKind::Cloud(_) => None,
        }
    }
}

fn support_label(support: &[usize]) -> i64 {
    let bytes: Vec<u8> = support.iter().flat_map(|&i| (i as u64).to_le_bytes()).collect();
    (rng::fnv1a(&bytes) >> 1) as i64
}

/// Draws `count` labeled points from the model.
///
/// GMM points are labeled with their subspace index, sparse points with a
/// hash of their support, and cloud points keep their own labels. Norms are
/// uniform in `[β, 1]` for the structured variants.
pub fn sample_points(model: &ModelSet, count: usize, seed: u64) -> Result<LabeledCloud> {
    if count == 0 {
        return Err(Error::InvalidInput("sample count must be ≥ 1".into()));
    }
    let n = model.ambient_dim;
    let mut points = Array2::zeros((count, n));
    let mut labels = Vec::with_capacity(count);
    let mut s = Stream::derived(seed, &[rng::tag("sample-points")]);
    for (i, mut row) in points.axis_iter_mut(Axis(0)).enumerate() {
        let radius = s.uniform_in(model.beta, 1.0);
        match &model.kind {
            ModelKind::Gmm { bases } => {
                let j = s.index(bases.len());
                let k = bases[j].ncols();
                let c = linalg::random_unit(&mut s, k);
                let mut x = bases[j].dot(&c) * radius;
                clip_to_unit_ball(&mut x);
                row.assign(&x);
                labels.push(j as i64);
            }
            ModelKind::SparseDict {
                dictionary,
                sparsity,
                ..
            } => loop {
                let mut support = index::sample(s.rng(), dictionary.ncols(), *sparsity).into_vec();
                support.sort_unstable();
                let mut x = Array1::zeros(n);
                for &j in &support {
                    x.scaled_add(s.gaussian(), &dictionary.column(j));
                }
                let r = linalg::norm(x.view());
                if r > 1e-12 {
                    x.mapv_inplace(|v| v * radius / r);
                    clip_to_unit_ball(&mut x);
                    row.assign(&x);
                    labels.push(support_label(&support));
                    break;
                }
            },
            ModelKind::Cloud(cloud) => {
                let j = s.index(cloud.len());
                row.assign(&cloud.points.row(j));
                labels.push(cloud.labels[j]);
            }
        }
        debug_assert_eq!(labels.len(), i + 1);
    }
    Ok(LabeledCloud { points, labels })
}

/// Nearest point of the model structure, clipped to the unit ball.
///
/// GMM: best subspace projection. Orthonormal dictionaries: hard
/// thresholding of `Dᵀx` to the `k` largest magnitudes. General
/// dictionaries: orthogonal matching pursuit. Cloud: nearest member.
/// Ties go to the lowest index.
pub fn project(model: &ModelSet, point: ArrayView1<f64>) -> Array1<f64> {
    let mut out = match &model.kind {
        ModelKind::Gmm { bases } => {
            let mut best: Option<(f64, Array1<f64>, usize)> = None;
            for (j, b) in bases.iter().enumerate() {
                let c = b.t().dot(&point);
                let energy = c.dot(&c);
                if best.as_ref().is_none_or(|(e, _, _)| energy > *e) {
                    best = Some((energy, c, j));
                }
            }
            let (_, c, j) = best.expect("GMM has a subspace");
            bases[j].dot(&c)
        }
        ModelKind::SparseDict {
            dictionary,
            sparsity,
            orthonormal: true,
        } => {
            let c = dictionary.t().dot(&point);
            let mut order: Vec<usize> = (0..c.len()).collect();
            order.sort_by(|&a, &b| c[b].abs().total_cmp(&c[a].abs()).then(a.cmp(&b)));
            let mut x = Array1::zeros(point.len());
            for &j in &order[..*sparsity] {
                x.scaled_add(c[j], &dictionary.column(j));
            }
            x
        }
        ModelKind::SparseDict {
            dictionary,
            sparsity,
            orthonormal: false,
        } => matching_pursuit(dictionary.view(), *sparsity, point),
        ModelKind::Cloud(cloud) => {
            let mut best = (f64::INFINITY, 0);
            for (j, row) in cloud.points.axis_iter(Axis(0)).enumerate() {
                let d = linalg::sq_distance(row, point);
                if d < best.0 {
                    best = (d, j);
                }
            }
            cloud.points.row(best.1).to_owned()
        }
    };
    clip_to_unit_ball(&mut out);
    out
}

fn matching_pursuit(dict: ArrayView2<f64>, k: usize, x: ArrayView1<f64>) -> Array1<f64> {
    let n = dict.nrows();
    let mut q: Vec<Array1<f64>> = Vec::with_capacity(k);
    let mut chosen = HashSet::new();
    let mut approx = Array1::zeros(n);
    let mut residual = x.to_owned();
    for _ in 0..k {
        let corr = dict.t().dot(&residual);
        let mut best: Option<(f64, usize)> = None;
        for (j, c) in corr.iter().enumerate() {
            if !chosen.contains(&j) && best.is_none_or(|(v, _)| c.abs() > v) {
                best = Some((c.abs(), j));
            }
        }
        let Some((_, j)) = best else { break };
        chosen.insert(j);
        let mut v = dict.column(j).to_owned();
        for _ in 0..2 {
            for qi in &q {
                let p = qi.dot(&v);
                v.scaled_add(-p, qi);
            }
        }
        let r = linalg::norm(v.view());
        if r < 1e-12 {
            continue;
        }
        v.mapv_inplace(|t| t / r);
        approx.scaled_add(v.dot(&x), &v);
        q.push(v);
        residual = &x - &approx;
    }
    approx
}

/// Monte Carlo estimate of the Gaussian mean width of a finite sample.
///
/// Each trial draws `g ~ N(0, I)` and records `max⟨g, x⟩ − min⟨g, x⟩`, the
/// supremum of `⟨g, x − y⟩` over sample pairs. Over a finite sample of `K`
/// this is a lower estimate of `ω(K)`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct MeanWidthEstimate {
    pub value: f64,
    pub std_error: f64,
    pub trials: usize,
    pub sample_size: usize,
}

pub fn estimate_mean_width(points: ArrayView2<f64>, trials: usize, seed: u64) -> Result<MeanWidthEstimate> {
    if points.nrows() == 0 {
        return Err(Error::InvalidInput("mean width of an empty set".into()));
    }
    if trials < 2 {
        return Err(Error::InvalidInput("mean width needs ≥ 2 trials".into()));
    }
    let widths = width_samples(points, trials, seed);
    let mean = widths.iter().sum::<f64>() / trials as f64;
    let var = widths.iter().map(|w| (w - mean).powi(2)).sum::<f64>() / (trials - 1) as f64;
    Ok(MeanWidthEstimate {
        value: mean,
        std_error: (var / trials as f64).sqrt(),
        trials,
        sample_size: points.nrows(),
    })
}

/// Per-trial values of `sup_{x,y} ⟨g, x − y⟩`, one Gaussian direction each.
pub fn width_samples(points: ArrayView2<f64>, trials: usize, seed: u64) -> Vec<f64> {
    let key = rng::derive_seed(seed, &[rng::tag("mean-width")]);
    (0..trials)
        .into_par_iter()
        .map(|t| {
            let mut s = Stream::indexed(key, t as u64);
            let g = Array1::from_shape_fn(points.ncols(), |_| s.gaussian());
            let proj = points.dot(&g);
            let (lo, hi) = proj
                .iter()
                .fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), &v| (lo.min(v), hi.max(v)));
            hi - lo
        })
        .collect()
}

/// Closed-form width scale: `C√(k + ln L)` (GMM), `C√(k ln(L/k))` (sparse).
pub fn mean_width_bound(model: &ModelSet, constant: f64) -> Result<f64> {
    match &model.kind {
        ModelKind::Gmm { bases } => {
            let k = bases[0].ncols() as f64;
            Ok(constant * (k + (bases.len() as f64).ln()).sqrt())
        }
        ModelKind::SparseDict {
            dictionary,
            sparsity,
            ..
        } => {
            let k = *sparsity as f64;
            let l = dictionary.ncols() as f64;
            Ok(constant * (k * (l / k).ln()).max(0.0).sqrt())
        }
        ModelKind::Cloud(_) => Err(Error::UnsupportedModel(
            "no closed-form width for explicit clouds".into(),
        )),
    }
}

/// A covering number, possibly too large to represent.
#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord)]
pub enum CoveringCount {
    Finite(u128),
    Infinite,
}

impl CoveringCount {
    /// Rounds a real-valued bound up; overflow becomes `Infinite`.
    pub fn from_real(v: f64) -> Self {
        if !v.is_finite() || v >= u128::MAX as f64 {
            return CoveringCount::Infinite;
        }
        // absorb rounding in products like 2·(1 + 2/0.5)
        let snapped = if (v - v.round()).abs() <= 1e-9 * v.max(1.0) {
            v.round()
        } else {
            v.ceil()
        };
        CoveringCount::Finite(snapped.max(1.0) as u128)
    }

    pub fn ln(&self) -> f64 {
        match self {
            CoveringCount::Finite(c) => (*c as f64).ln(),
            CoveringCount::Infinite => f64::INFINITY,
        }
    }

    pub fn as_f64(&self) -> f64 {
        match self {
            CoveringCount::Finite(c) => *c as f64,
            CoveringCount::Infinite => f64::INFINITY,
        }
    }
}

impl Serialize for CoveringCount {
    fn serialize<S: serde::Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        match self {
            CoveringCount::Finite(c) if *c <= u64::MAX as u128 => s.serialize_u64(*c as u64),
            CoveringCount::Finite(c) => s.serialize_str(&c.to_string()),
            CoveringCount::Infinite => s.serialize_str("inf"),
        }
    }
}

fn binomial(n: usize, k: usize) -> f64 {
    let k = k.min(n - k);
    (0..k).fold(1.0, |acc, i| acc * (n - i) as f64 / (i + 1) as f64).round()
}

/// Closed-form covering number: `L(1 + 2/ε)^k` (GMM) or
/// `C(L, k)(1 + 2/ε)^k` (sparse) for `ε < 1`, and 1 otherwise.
pub fn covering_bound(model: &ModelSet, epsilon: f64) -> Result<CoveringCount> {
    if !(epsilon > 0.0) {
        return Err(Error::InvalidArgument(format!("epsilon {epsilon} must be positive")));
    }
    let (prefactor, k) = match &model.kind {
        ModelKind::Gmm { bases } => (bases.len() as f64, bases[0].ncols()),
        ModelKind::SparseDict {
            dictionary,
            sparsity,
            ..
        } => (binomial(dictionary.ncols(), *sparsity), *sparsity),
        ModelKind::Cloud(_) => {
            return Err(Error::UnsupportedModel("no closed-form covering for clouds".into()))
        }
    };
    if epsilon >= 1.0 {
        return Ok(CoveringCount::Finite(1));
    }
    Ok(CoveringCount::from_real(prefactor * (1.0 + 2.0 / epsilon).powi(k as i32)))
}

/// Sparse covering bound with the binomial replaced by `(eL/k)^k`.
pub fn sparse_stirling_covering_bound(model: &ModelSet, epsilon: f64) -> Result<CoveringCount> {
    let ModelKind::SparseDict {
        dictionary,
        sparsity,
        ..
    } = &model.kind
    else {
        return Err(Error::UnsupportedModel("Stirling form applies to sparse models".into()));
    };
    if !(epsilon > 0.0) {
        return Err(Error::InvalidArgument(format!("epsilon {epsilon} must be positive")));
    }
    if epsilon >= 1.0 {
        return Ok(CoveringCount::Finite(1));
    }
    let k = *sparsity as f64;
    let l = dictionary.ncols() as f64;
    Ok(CoveringCount::from_real(
        (std::f64::consts::E * l / k * (1.0 + 2.0 / epsilon)).powf(k),
    ))
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct CoveringRecord {
    pub epsilon: f64,
    pub bound_closed_form: Option<CoveringCount>,
    pub net_size_greedy: usize,
    pub center_indices: Vec<usize>,
    #[serde(skip)]
    pub centers: Array2<f64>,
}

/// Farthest-first ε-net: start from row 0, then repeatedly add the point
/// farthest from the current centers while that distance exceeds `ε`.
/// Ties go to the lowest index.
pub fn greedy_epsilon_net(points: ArrayView2<f64>, epsilon: f64) -> Result<CoveringRecord> {
    if !(epsilon > 0.0) {
        return Err(Error::InvalidArgument(format!("epsilon {epsilon} must be positive")));
    }
    let count = points.nrows();
    let mut centers = Vec::new();
    if count > 0 {
        let eps2 = epsilon * epsilon;
        let mut nearest = vec![f64::INFINITY; count];
        let mut next = 0;
        loop {
            centers.push(next);
            let c = points.row(next);
            nearest
                .par_iter_mut()
                .enumerate()
                .for_each(|(i, d)| *d = d.min(linalg::sq_distance(points.row(i), c)));
            let (far, dist) = nearest
                .iter()
                .enumerate()
                .fold((0, f64::NEG_INFINITY), |best, (i, &d)| if d > best.1 { (i, d) } else { best });
            if dist <= eps2 {
                break;
            }
            next = far;
        }
    }
    let sel = points.select(Axis(0), &centers);
    Ok(CoveringRecord {
        epsilon,
        bound_closed_form: None,
        net_size_greedy: centers.len(),
        center_indices: centers,
        centers: sel,
    })
}

/// Dudley entropy integral `C∫ √(ln N_ε) dε` by the trapezoid rule.
///
/// The integrand on `[0, ε₁]` is taken as its value at the first grid point,
/// so a constant covering count integrates to `√(ln N)·ε_max` exactly.
pub fn dudley_bound<F: Fn(f64) -> CoveringCount>(covering: F, grid: &[f64], constant: f64) -> Result<f64> {
    if grid.is_empty() {
        return Err(Error::InvalidArgument("empty epsilon grid".into()));
    }
    if grid[0] <= 0.0 || grid.windows(2).any(|w| w[1] <= w[0]) {
        return Err(Error::InvalidArgument("epsilon grid must be positive and strictly increasing".into()));
    }
    let counts: Vec<CoveringCount> = grid.iter().map(|&e| covering(e)).collect();
    if let Some(i) = counts.windows(2).position(|w| w[1] > w[0]) {
        return Err(Error::InvalidCovering(format!(
            "covering count increases between ε={} and ε={}",
            grid[i],
            grid[i + 1]
        )));
    }
    let f: Vec<f64> = counts.iter().map(|c| c.ln().max(0.0).sqrt()).collect();
    let mut total = f[0] * grid[0];
    for i in 1..grid.len() {
        total += 0.5 * (f[i] + f[i - 1]) * (grid[i] - grid[i - 1]);
    }
    Ok(constant * total)
}

/// Covering size implied by Sudakov minoration: `exp(c ω²/ε²)`.
pub fn sudakov_covering_bound(omega: f64, epsilon: f64, constant: f64) -> Result<f64> {
    if !(omega >= 0.0) || !(epsilon > 0.0) {
        return Err(Error::InvalidArgument("need ω ≥ 0 and ε > 0".into()));
    }
    Ok((constant * omega * omega / (epsilon * epsilon)).exp())
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct TrainingSizeBound {
    pub omega: f64,
    pub epsilon: f64,
    /// `ω²/ε²`
    pub exponent: f64,
    pub bound: f64,
}

/// Sample count scale `exp(ω²/ε²)` needed to ε-cover a set of width ω.
pub fn training_size_bound(omega: f64, epsilon: f64) -> Result<TrainingSizeBound> {
    let bound = sudakov_covering_bound(omega, epsilon, 1.0)?;
    Ok(TrainingSizeBound {
        omega,
        epsilon,
        exponent: omega * omega / (epsilon * epsilon),
        bound,
    })
}

/// Rows `[start, end)` of a cloud as a new cloud.
pub fn slice_cloud(cloud: &LabeledCloud, start: usize, end: usize) -> LabeledCloud {
    LabeledCloud {
        points: cloud.points.slice(s![start..end, ..]).to_owned(),
        labels: cloud.labels[start..end].to_vec(),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use ndarray::array;

    fn e1_model() -> ModelSet {
        ModelSet::gmm(vec![array![[1.0], [0.0]]], 0.0).unwrap()
    }

    #[test]
    fn single_line_samples() {
        let m = ModelSet::gmm(vec![array![[1.0], [0.0], [0.0]]], 0.0).unwrap();
        let c = sample_points(&m, 3, 1).unwrap();
        for row in c.points.axis_iter(Axis(0)) {
            assert!(row[0].abs() <= 1.0);
            assert_eq!(row[1], 0.0);
            assert_eq!(row[2], 0.0);
        }
        assert_eq!(c.labels, vec![0, 0, 0]);
    }

    #[test]
    fn identity_sparse_samples() {
        let m = ModelSet::sparse_identity(4, 1, 0.5).unwrap();
        let c = sample_points(&m, 2, 9).unwrap();
        for row in c.points.axis_iter(Axis(0)) {
            assert_eq!(row.iter().filter(|v| **v != 0.0).count(), 1);
            let r = linalg::norm(row);
            assert!((0.5..=1.0).contains(&r));
        }
    }

    #[test]
    fn invalid_models() {
        assert!(ModelSet::sparse_identity(4, 5, 0.5).is_err());
        assert!(ModelSet::sparse(Array2::eye(3).slice(s![.., ..2]).to_owned(), 3, 0.5).is_err());
        assert!(ModelSet::random_gmm(3, 2, 4, 0.5, 0).is_err());
        assert!(ModelSet::gmm(vec![array![[1.0], [1.0]]], 0.0).is_err());
        assert!(ModelSet::random_gmm(3, 2, 2, 1.5, 0).is_err());
        assert!(sample_points(&e1_model(), 0, 0).is_err());
    }

    #[test]
    fn random_gmm_frames_are_orthonormal() {
        let m = ModelSet::random_gmm(100, 10, 5, 0.5, 3).unwrap();
        let ModelKind::Gmm { bases } = &m.kind else { unreachable!() };
        for b in bases {
            assert!(gram_deviation(b.view()) <= ORTHONORMAL_TOL);
        }
    }

    #[test]
    fn gmm_samples_lie_in_model() {
        let m = ModelSet::random_gmm(30, 4, 3, 0.5, 11).unwrap();
        let c = sample_points(&m, 200, 5).unwrap();
        let ModelKind::Gmm { bases } = &m.kind else { unreachable!() };
        for (row, &l) in c.points.axis_iter(Axis(0)).zip(&c.labels) {
            let b = &bases[l as usize];
            let back = b.dot(&b.t().dot(&row));
            assert!(linalg::distance(back.view(), row) < 1e-9);
            let r = linalg::norm(row);
            assert!((0.5 - 1e-12..=1.0 + 1e-12).contains(&r));
        }
    }

    #[test]
    fn gmm_labels_are_multinomial() {
        let m = ModelSet::random_gmm(100, 10, 5, 0.5, 2).unwrap();
        let c = sample_points(&m, 1000, 17).unwrap();
        let mut hist = [0usize; 10];
        for &l in &c.labels {
            hist[l as usize] += 1;
        }
        // multinomial: mean 100, sd √(1000·0.1·0.9) = 9.49
        let sd = (1000.0f64 * 0.1 * 0.9).sqrt();
        for h in hist {
            assert!((h as f64 - 100.0).abs() <= 4.0 * sd, "{hist:?}");
        }
    }

    #[test]
    fn projection_examples() {
        let p = project(&e1_model(), array![3.0, 4.0].view());
        assert_eq!(p, array![1.0, 0.0]);
        let s = ModelSet::sparse_identity(3, 1, 0.0).unwrap();
        assert_eq!(project(&s, array![0.2, 0.9, 0.1].view()), array![0.0, 0.9, 0.0]);
        let x = array![0.0, -0.5, 0.0];
        assert_eq!(project(&s, x.view()), x);
    }

    #[test]
    fn projection_is_idempotent_on_samples() {
        let gmm = ModelSet::random_gmm(20, 3, 2, 0.5, 1).unwrap();
        let sparse = ModelSet::sparse_identity(20, 3, 0.5).unwrap();
        for model in [&gmm, &sparse] {
            let c = sample_points(model, 50, 4).unwrap();
            for row in c.points.axis_iter(Axis(0)) {
                let p = project(model, row);
                assert!(linalg::distance(p.view(), row) < 1e-12);
            }
        }
    }

    #[test]
    fn matching_pursuit_recovers_exact_support() {
        let mut s = Stream::new(8);
        let d = Array2::from_shape_fn((40, 60), |_| s.gaussian());
        let model = ModelSet::sparse(d, 2, 0.0).unwrap();
        let ModelKind::SparseDict { dictionary, orthonormal, .. } = &model.kind else { unreachable!() };
        assert!(!orthonormal);
        let x = dictionary.column(3).to_owned() * 0.6 + dictionary.column(17).to_owned() * 0.3;
        let p = project(&model, x.view());
        assert!(linalg::distance(p.view(), x.view()) < 1e-10);
    }

    #[test]
    fn cloud_projection_picks_nearest() {
        let cloud = LabeledCloud::new(array![[0.0, 0.0], [0.5, 0.0], [0.0, 0.5]], vec![0, 1, 2]).unwrap();
        let m = ModelSet::cloud(cloud, 0.0).unwrap();
        assert_eq!(project(&m, array![0.4, 0.1].view()), array![0.5, 0.0]);
    }

    #[test]
    fn mean_width_examples() {
        let one = array![[0.3, 0.4]];
        let est = estimate_mean_width(one.view(), 10, 0).unwrap();
        assert_eq!(est.value, 0.0);
        assert_eq!(est.std_error, 0.0);

        let pm = array![[0.6, 0.8, 0.0], [-0.6, -0.8, 0.0]];
        let est = estimate_mean_width(pm.view(), 4000, 1).unwrap();
        let exact = 2.0 * (2.0 / std::f64::consts::PI).sqrt();
        assert!((est.value - exact).abs() <= 3.0 * est.std_error, "{est:?}");

        assert!(estimate_mean_width(Array2::zeros((0, 3)).view(), 10, 0).is_err());
        assert!(estimate_mean_width(one.view(), 1, 0).is_err());
    }

    #[test]
    fn mean_width_bounds() {
        let g = ModelSet::random_gmm(100, 10, 5, 0.5, 0).unwrap();
        assert!((mean_width_bound(&g, 1.0).unwrap() - 2.7024).abs() < 1e-4);
        let s = ModelSet::sparse_identity(16, 2, 0.5).unwrap();
        assert!((mean_width_bound(&s, 1.0).unwrap() - 2.0393).abs() < 1e-4);
        let g1 = ModelSet::random_gmm(3, 1, 1, 0.5, 0).unwrap();
        assert_eq!(mean_width_bound(&g1, 1.0).unwrap(), 1.0);
        let c = ModelSet::cloud(LabeledCloud::unlabeled(array![[1.0]]), 0.0).unwrap();
        assert!(matches!(mean_width_bound(&c, 1.0), Err(Error::UnsupportedModel(_))));
    }

    #[test]
    fn covering_examples() {
        let g = ModelSet::random_gmm(5, 2, 1, 0.5, 0).unwrap();
        assert_eq!(covering_bound(&g, 0.5).unwrap(), CoveringCount::Finite(10));
        assert_eq!(covering_bound(&g, 1.5).unwrap(), CoveringCount::Finite(1));
        let s = ModelSet::sparse_identity(4, 2, 0.5).unwrap();
        assert_eq!(covering_bound(&s, 0.5).unwrap(), CoveringCount::Finite(150));
        assert!(covering_bound(&s, 0.0).is_err());
        let big = ModelSet::sparse_identity(400, 40, 0.5).unwrap();
        assert_eq!(covering_bound(&big, 1e-3).unwrap(), CoveringCount::Infinite);
        assert!(sparse_stirling_covering_bound(&s, 0.5).unwrap() >= covering_bound(&s, 0.5).unwrap());
    }

    #[test]
    fn greedy_examples() {
        let line = array![[0.0], [0.4], [0.8]];
        let rec = greedy_epsilon_net(line.view(), 0.5).unwrap();
        assert_eq!(rec.net_size_greedy, 2);
        assert_eq!(rec.center_indices, vec![0, 2]);
        let rec = greedy_epsilon_net(line.view(), 0.8).unwrap();
        assert_eq!(rec.net_size_greedy, 1);
        assert!(greedy_epsilon_net(line.view(), 0.0).is_err());
    }

    #[test]
    fn dudley_examples() {
        let grid: Vec<f64> = (1..=200).map(|i| i as f64 * 0.01).collect();
        assert_eq!(dudley_bound(|_| CoveringCount::Finite(1), &grid, 1.0).unwrap(), 0.0);
        let step = |e: f64| CoveringCount::Finite(if e <= 1.0 + 1e-12 { 10 } else { 1 });
        let v = dudley_bound(step, &grid, 1.0).unwrap();
        assert!((v - 10f64.ln().sqrt()).abs() < 0.01 * 10f64.ln().sqrt(), "{v}");
        let constant = dudley_bound(|_| CoveringCount::Finite(7), &grid, 1.0).unwrap();
        assert!((constant - 7f64.ln().sqrt() * 2.0).abs() < 1e-12);
        let bad = dudley_bound(|e| CoveringCount::Finite(if e < 0.5 { 1 } else { 5 }), &grid, 1.0);
        assert!(matches!(bad, Err(Error::InvalidCovering(_))));
        assert!(dudley_bound(|_| CoveringCount::Finite(1), &[0.2, 0.1], 1.0).is_err());
    }

    #[test]
    fn sudakov_and_training() {
        assert_eq!(sudakov_covering_bound(0.0, 0.3, 1.0).unwrap(), 1.0);
        assert!((sudakov_covering_bound(2.0, 1.0, 1.0).unwrap() - 54.598).abs() < 1e-3);
        assert!((sudakov_covering_bound(2.0, 2.0, 1.0).unwrap() - std::f64::consts::E).abs() < 1e-12);
        assert_eq!(training_size_bound(0.0, 1.0).unwrap().bound, 1.0);
        let t = training_size_bound(3.0, 1.0).unwrap();
        assert!((t.bound - 8103.08).abs() < 1e-2);
        assert_eq!(t.exponent, 9.0);
        assert!((training_size_bound(3.0, 3.0).unwrap().bound - std::f64::consts::E).abs() < 1e-12);
    }
}
