//! Boundary-pair and angle-bin distortion analytics.
//!
//! Works on any pair of index-aligned clouds (input features, output
//! features), whether they come from a random network simulated here or from
//! an externally trained model.

use std::f64::consts::PI;
use std::fmt::Write as _;
use std::fs;
use std::path::Path;

use ndarray::{Array1, Array2, ArrayView1, ArrayView2, Axis};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg;
use crate::models::LabeledCloud;
use crate::netsim::{self, RandomNetwork};
use crate::rng::{self, Stream};
use crate::stats;

pub const SCHEMA: &str = "rangelens-report-v1";
pub const DEFAULT_HIST_BINS: usize = 50;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Relation {
    IntraClass,
    InterClass,
}

/// One boundary pair, measured at the input and at the output.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct PairObservation {
    pub euclid_in_sq: f64,
    pub euclid_out_sq: f64,
    pub angle_in: f64,
    pub angle_out: f64,
    pub hamming: Option<f64>,
    pub relation: Relation,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Statistic {
    RatioEuclid,
    DiffEuclid,
    RatioAngle,
    DiffAngle,
    /// Raw output angle (angle-bin reports).
    OutputAngle,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", tag = "kind")]
pub enum Population {
    BoundaryIntra,
    BoundaryInter,
    RandomIntra,
    RandomInter,
    AngleBin { lo: f64, hi: f64, depth: usize },
}

impl Population {
    fn slug(&self) -> String {
        match self {
            Population::BoundaryIntra => "boundary_intra".into(),
            Population::BoundaryInter => "boundary_inter".into(),
            Population::RandomIntra => "random_intra".into(),
            Population::RandomInter => "random_inter".into(),
            Population::AngleBin { lo, hi, depth } => format!("angle_{lo:.4}_{hi:.4}_q{depth}"),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DistortionHistogram {
    pub bin_edges: Vec<f64>,
    pub counts: Vec<u64>,
    pub statistic: Statistic,
    pub population: Population,
    pub mean: f64,
    pub median: f64,
}

impl DistortionHistogram {
    /// Uniform bins over the observed range. A degenerate range collapses to
    /// one bin `[v, v]`; an empty input gives no bins.
    pub fn from_values(values: &[f64], bins: usize, statistic: Statistic, population: Population) -> Self {
        let bins = bins.max(1);
        let (lo, hi) = values
            .iter()
            .fold((f64::INFINITY, f64::NEG_INFINITY), |(a, b), &v| (a.min(v), b.max(v)));
        let (bin_edges, counts) = if values.is_empty() {
            (Vec::new(), Vec::new())
        } else if lo == hi {
            (vec![lo, hi], vec![values.len() as u64])
        } else {
            let width = hi - lo;
            let edges: Vec<f64> = (0..=bins)
                .map(|i| if i == bins { hi } else { lo + width * i as f64 / bins as f64 })
                .collect();
            let mut counts = vec![0u64; bins];
            for &v in values {
                let i = (((v - lo) / width) * bins as f64) as usize;
                counts[i.min(bins - 1)] += 1;
            }
            (edges, counts)
        };
        DistortionHistogram {
            bin_edges,
            counts,
            statistic,
            population,
            // summing in sorted order keeps the mean independent of input order
            mean: stats::mean(&sorted(values)),
            median: stats::median(values),
        }
    }

    pub fn total(&self) -> u64 {
        self.counts.iter().sum()
    }

    pub fn to_csv(&self) -> String {
        let mut out = String::from("bin_lo,bin_hi,count\n");
        for (i, c) in self.counts.iter().enumerate() {
            writeln!(out, "{:?},{:?},{c}", self.bin_edges[i], self.bin_edges[i + 1]).unwrap();
        }
        out
    }

    pub fn file_stem(&self) -> String {
        let stat = serde_json::to_value(self.statistic).unwrap();
        format!("{}_{}", self.population.slug(), stat.as_str().unwrap_or("stat"))
    }
}

/// Parses the CSV written by [`DistortionHistogram::to_csv`] back into
/// `(bin_lo, bin_hi, count)` rows.
pub fn parse_histogram_csv(text: &str) -> Result<Vec<(f64, f64, u64)>> {
    let mut rows = Vec::new();
    for (i, line) in text.lines().enumerate().skip(1) {
        let parts: Vec<&str> = line.split(',').collect();
        let bad = || Error::InvalidInput(format!("histogram line {}: `{line}`", i + 1));
        if parts.len() != 3 {
            return Err(bad());
        }
        rows.push((
            parts[0].parse().map_err(|_| bad())?,
            parts[1].parse().map_err(|_| bad())?,
            parts[2].parse().map_err(|_| bad())?,
        ));
    }
    Ok(rows)
}

fn sorted(values: &[f64]) -> Vec<f64> {
    let mut v = values.to_vec();
    v.sort_by(f64::total_cmp);
    v
}

fn unit_rows(points: ArrayView2<f64>) -> (Array2<f64>, Vec<bool>) {
    let mut out = points.to_owned();
    let mut zero = vec![false; points.nrows()];
    for (i, mut row) in out.axis_iter_mut(Axis(0)).enumerate() {
        let r = linalg::norm(row.view());
        if r == 0.0 {
            zero[i] = true;
        } else {
            row.mapv_inplace(|v| v / r);
        }
    }
    (out, zero)
}

fn unit_angle(u: ArrayView1<f64>, v: ArrayView1<f64>) -> f64 {
    let mut d = 0.0;
    let mut s = 0.0;
    for (a, b) in u.iter().zip(v.iter()) {
        d += (a - b) * (a - b);
        s += (a + b) * (a + b);
    }
    2.0 * d.sqrt().atan2(s.sqrt())
}

struct Geometry {
    points: Array2<f64>,
    units: Array2<f64>,
    zero: Vec<bool>,
}

impl Geometry {
    fn new(points: ArrayView2<f64>) -> Self {
        let (units, zero) = unit_rows(points);
        Geometry {
            points: points.to_owned(),
            units,
            zero,
        }
    }

    fn sq_dist(&self, i: usize, j: usize) -> f64 {
        linalg::sq_distance(self.points.row(i), self.points.row(j))
    }

    /// Zero vectors sit at `π/2` from everything.
    fn angle(&self, i: usize, j: usize) -> f64 {
        if self.zero[i] || self.zero[j] {
            PI / 2.0
        } else {
            unit_angle(self.units.row(i), self.units.row(j))
        }
    }
}

/// Per-point extreme partner at one side of the network.
#[derive(Clone, Copy)]
struct Extremes {
    far_intra_sq: f64,
    far_intra_angle: f64,
    near_inter_sq: f64,
    near_inter_angle: f64,
    has_intra: bool,
    has_inter: bool,
}

fn extremes(g: &Geometry, labels: &[i64], p: usize) -> Extremes {
    let mut e = Extremes {
        far_intra_sq: f64::NEG_INFINITY,
        far_intra_angle: f64::NEG_INFINITY,
        near_inter_sq: f64::INFINITY,
        near_inter_angle: f64::INFINITY,
        has_intra: false,
        has_inter: false,
    };
    for q in 0..labels.len() {
        if q == p {
            continue;
        }
        let d = g.sq_dist(p, q);
        let a = g.angle(p, q);
        if labels[q] == labels[p] {
            e.has_intra = true;
            e.far_intra_sq = e.far_intra_sq.max(d);
            e.far_intra_angle = e.far_intra_angle.max(a);
        } else {
            e.has_inter = true;
            e.near_inter_sq = e.near_inter_sq.min(d);
            e.near_inter_angle = e.near_inter_angle.min(a);
        }
    }
    e
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct BoundaryReport {
    pub points: usize,
    pub observations: Vec<PairObservation>,
    /// Points without a same-class partner.
    pub skipped_intra: usize,
    /// Points without an other-class partner.
    pub skipped_inter: usize,
    /// Ratios left out because the input distance or angle was zero.
    pub skipped_zero_ratio: usize,
    pub histograms: Vec<DistortionHistogram>,
}

/// For every point, its farthest same-class and closest other-class partner,
/// found separately at the input and at the output (the output partner need
/// not be the image of the input partner). Emits ratio and difference
/// histograms of Euclidean and angular distance for both relations.
pub fn boundary_pair_stats(
    input: ArrayView2<f64>,
    output: ArrayView2<f64>,
    labels: &[i64],
    bins: usize,
) -> Result<BoundaryReport> {
    if input.nrows() != output.nrows() || input.nrows() != labels.len() {
        return Err(Error::InvalidInput(format!(
            "clouds must be index-aligned: {} inputs, {} outputs, {} labels",
            input.nrows(),
            output.nrows(),
            labels.len()
        )));
    }
    let gin = Geometry::new(input);
    let gout = Geometry::new(output);
    let per_point: Vec<(Extremes, Extremes)> = (0..labels.len())
        .into_par_iter()
        .map(|p| (extremes(&gin, labels, p), extremes(&gout, labels, p)))
        .collect();

    let mut observations = Vec::new();
    let (mut skipped_intra, mut skipped_inter, mut skipped_zero) = (0, 0, 0);
    let mut values: [[Vec<f64>; 4]; 2] = Default::default();
    for (ein, eout) in &per_point {
        for (relation, present, d_in, d_out, a_in, a_out) in [
            (Relation::IntraClass, ein.has_intra, ein.far_intra_sq, eout.far_intra_sq, ein.far_intra_angle, eout.far_intra_angle),
            (Relation::InterClass, ein.has_inter, ein.near_inter_sq, eout.near_inter_sq, ein.near_inter_angle, eout.near_inter_angle),
        ] {
            if !present {
                match relation {
                    Relation::IntraClass => skipped_intra += 1,
                    Relation::InterClass => skipped_inter += 1,
                }
                continue;
            }
            observations.push(PairObservation {
                euclid_in_sq: d_in,
                euclid_out_sq: d_out,
                angle_in: a_in,
                angle_out: a_out,
                hamming: None,
                relation,
            });
            let slot = &mut values[relation as usize];
            let (e_in, e_out) = (d_in.sqrt(), d_out.sqrt());
            if e_in > 0.0 {
                slot[0].push(e_out / e_in);
            } else {
                skipped_zero += 1;
            }
            slot[1].push(e_out - e_in);
            if a_in > 0.0 {
                slot[2].push(a_out / a_in);
            } else {
                skipped_zero += 1;
            }
            slot[3].push(a_out - a_in);
        }
    }
    let stats_order = [
        Statistic::RatioEuclid,
        Statistic::DiffEuclid,
        Statistic::RatioAngle,
        Statistic::DiffAngle,
    ];
    let mut histograms = Vec::with_capacity(8);
    for (r, pop) in [Population::BoundaryIntra, Population::BoundaryInter].into_iter().enumerate() {
        for (s, stat) in stats_order.iter().enumerate() {
            histograms.push(DistortionHistogram::from_values(&values[r][s], bins, *stat, pop));
        }
    }
    Ok(BoundaryReport {
        points: labels.len(),
        observations,
        skipped_intra,
        skipped_inter,
        skipped_zero_ratio: skipped_zero,
        histograms,
    })
}

/// A point-cloud map with intermediate outputs.
pub trait Propagate: Sync {
    fn depth(&self) -> usize;
    fn input_dim(&self) -> Option<usize>;
    /// Calls `visit(depth, output)` for depth `1..=self.depth()`.
    fn propagate(&self, points: ArrayView2<f64>, visit: &mut dyn FnMut(usize, &Array2<f64>) -> Result<()>) -> Result<()>;
}

impl Propagate for RandomNetwork {
    fn depth(&self) -> usize {
        self.layers.len()
    }

    fn input_dim(&self) -> Option<usize> {
        Some(RandomNetwork::input_dim(self))
    }

    fn propagate(&self, points: ArrayView2<f64>, visit: &mut dyn FnMut(usize, &Array2<f64>) -> Result<()>) -> Result<()> {
        netsim::forward_each(self, points, |i, out| visit(i + 1, out)).map(|_| ())
    }
}

/// `x ↦ factor^q · x` at depth `q`: identity (`factor = 1`) and scaling fixtures.
#[derive(Clone, Copy, Debug)]
pub struct ScaledIdentity {
    pub factor: f64,
    pub depth: usize,
}

impl Propagate for ScaledIdentity {
    fn depth(&self) -> usize {
        self.depth
    }

    fn input_dim(&self) -> Option<usize> {
        None
    }

    fn propagate(&self, points: ArrayView2<f64>, visit: &mut dyn FnMut(usize, &Array2<f64>) -> Result<()>) -> Result<()> {
        let mut cur = points.to_owned();
        for q in 1..=self.depth {
            cur.mapv_inplace(|v| v * self.factor);
            visit(q, &cur)?;
        }
        Ok(())
    }
}

/// Where angle-bin pairs come from.
pub enum PairSource<'a> {
    /// Unit pairs in `ℝⁿ` with the angle drawn uniformly inside each bin.
    Synthetic { dim: usize },
    /// Random pairs of cloud points whose input angle falls in the bin.
    Cloud(&'a LabeledCloud),
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct DepthSummary {
    pub depth: usize,
    pub mean_ratio: f64,
    pub median_ratio: f64,
    pub mean_output_angle: f64,
    pub histograms: Vec<DistortionHistogram>,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct AngleBinSummary {
    pub lo: f64,
    pub hi: f64,
    pub pairs: usize,
    pub mean_input_angle: f64,
    pub depths: Vec<DepthSummary>,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct AngleBinReport {
    pub bins: Vec<AngleBinSummary>,
}

pub fn validate_bins(bins: &[[f64; 2]]) -> Result<()> {
    let mut sorted: Vec<[f64; 2]> = bins.to_vec();
    sorted.sort_by(|a, b| a[0].total_cmp(&b[0]));
    for b in &sorted {
        if !(0.0 <= b[0] && b[0] <= b[1] && b[1] <= PI) {
            return Err(Error::InvalidArgument(format!("angle bin {b:?} outside [0, π]")));
        }
    }
    // touching endpoints are allowed
    if sorted.windows(2).any(|w| w[1][0] < w[0][1]) {
        return Err(Error::InvalidArgument("angle bins overlap".into()));
    }
    Ok(())
}

/// Samples pairs per angle bin, propagates them, and summarizes output angle,
/// output/input ratio and output − input difference at the requested depths.
pub fn angle_bin_propagation(
    source: PairSource,
    net: &dyn Propagate,
    bins: &[[f64; 2]],
    pairs_per_bin: usize,
    depths: &[usize],
    hist_bins: usize,
    seed: u64,
) -> Result<AngleBinReport> {
    validate_bins(bins)?;
    if let Some(&d) = depths.iter().find(|&&d| d == 0 || d > net.depth()) {
        return Err(Error::InvalidArgument(format!("depth {d} outside 1..={}", net.depth())));
    }
    let mut rows: Vec<Array1<f64>> = Vec::new();
    let mut owners: Vec<(usize, f64)> = Vec::new();
    for (b, bin) in bins.iter().enumerate() {
        let mut s = Stream::derived(seed, &[rng::tag("angle-bin"), b as u64]);
        match &source {
            PairSource::Synthetic { dim } => {
                if *dim < 2 {
                    return Err(Error::InvalidArgument("synthetic pairs need dim ≥ 2".into()));
                }
                for _ in 0..pairs_per_bin {
                    let theta = s.uniform_in(bin[0], bin[1]);
                    let (x, y) = linalg::pair_at_angle(&mut s, *dim, theta);
                    rows.push(x);
                    rows.push(y);
                    owners.push((b, theta));
                }
            }
            PairSource::Cloud(cloud) => {
                if cloud.len() < 2 {
                    continue;
                }
                let mut found = 0;
                for _ in 0..pairs_per_bin.saturating_mul(50) {
                    if found == pairs_per_bin {
                        break;
                    }
                    let i = s.index(cloud.len());
                    let j = s.index(cloud.len());
                    if i == j {
                        continue;
                    }
                    let (a, flagged) = linalg::angle_between(cloud.points.row(i), cloud.points.row(j));
                    if !flagged && a >= bin[0] && a <= bin[1] {
                        rows.push(cloud.points.row(i).to_owned());
                        rows.push(cloud.points.row(j).to_owned());
                        owners.push((b, a));
                        found += 1;
                    }
                }
            }
        }
    }
    let mut per_depth: Vec<(usize, Vec<f64>)> = Vec::new();
    if !rows.is_empty() {
        let dim = rows[0].len();
        if let Some(n) = net.input_dim() {
            if n != dim {
                return Err(Error::InvalidArgument(format!("pairs have dim {dim}, network expects {n}")));
            }
        }
        let views: Vec<_> = rows.iter().map(|r| r.view()).collect();
        let batch = ndarray::stack(Axis(0), &views).expect("equal lengths");
        net.propagate(batch.view(), &mut |q, out| {
            if depths.contains(&q) {
                let angles: Vec<f64> = (0..owners.len())
                    .into_par_iter()
                    .map(|i| linalg::angle(out.row(2 * i), out.row(2 * i + 1)))
                    .collect();
                per_depth.push((q, angles));
            }
            Ok(())
        })?;
    }
    let mut summaries = Vec::with_capacity(bins.len());
    for (b, bin) in bins.iter().enumerate() {
        let idx: Vec<usize> = (0..owners.len()).filter(|&i| owners[i].0 == b).collect();
        let inputs: Vec<f64> = idx.iter().map(|&i| owners[i].1).collect();
        let mut depth_rows = Vec::new();
        for &q in depths {
            let pop = Population::AngleBin { lo: bin[0], hi: bin[1], depth: q };
            let outs: Vec<f64> = per_depth
                .iter()
                .find(|(d, _)| *d == q)
                .map(|(_, a)| idx.iter().map(|&i| a[i]).collect())
                .unwrap_or_default();
            let ratios: Vec<f64> = outs
                .iter()
                .zip(&inputs)
                .filter(|(_, &t)| t > 0.0)
                .map(|(o, t)| o / t)
                .collect();
            let diffs: Vec<f64> = outs.iter().zip(&inputs).map(|(o, t)| o - t).collect();
            depth_rows.push(DepthSummary {
                depth: q,
                mean_ratio: stats::mean(&ratios),
                median_ratio: stats::median(&ratios),
                mean_output_angle: stats::mean(&outs),
                histograms: vec![
                    DistortionHistogram::from_values(&outs, hist_bins, Statistic::OutputAngle, pop),
                    DistortionHistogram::from_values(&ratios, hist_bins, Statistic::RatioAngle, pop),
                    DistortionHistogram::from_values(&diffs, hist_bins, Statistic::DiffAngle, pop),
                ],
            });
        }
        summaries.push(AngleBinSummary {
            lo: bin[0],
            hi: bin[1],
            pairs: idx.len(),
            mean_input_angle: stats::mean(&inputs),
            depths: depth_rows,
        });
    }
    Ok(AngleBinReport { bins: summaries })
}

/// Top-level JSON document written by every report-producing command.
#[derive(Clone, Debug, Serialize)]
pub struct ReportEnvelope<T: Serialize> {
    pub schema: &'static str,
    pub command: String,
    pub seed: u64,
    pub body: T,
}

impl<T: Serialize> ReportEnvelope<T> {
    pub fn new(command: impl Into<String>, seed: u64, body: T) -> Self {
        ReportEnvelope {
            schema: SCHEMA,
            command: command.into(),
            seed,
            body,
        }
    }

    pub fn to_json(&self) -> Result<String> {
        let mut s = serde_json::to_string_pretty(self)?;
        s.push('\n');
        Ok(s)
    }

    pub fn write(&self, path: &Path) -> Result<()> {
        fs::write(path, self.to_json()?).map_err(|e| Error::io(path, e))
    }
}

/// Writes each histogram as `<dir>/<population>_<statistic>.csv`.
pub fn write_histograms(dir: &Path, hists: &[DistortionHistogram]) -> Result<Vec<String>> {
    let mut names = Vec::with_capacity(hists.len());
    for h in hists {
        let name = format!("{}.csv", h.file_stem());
        let path = dir.join(&name);
        fs::write(&path, h.to_csv()).map_err(|e| Error::io(&path, e))?;
        names.push(name);
    }
    Ok(names)
}
