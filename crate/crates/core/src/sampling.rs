//! Seeded generation of labeled Gaussian-mixture data.
//!
//! Determinism contract (also the cross-platform reproducibility contract):
//! every draw comes from a ChaCha12 keystream keyed by the 64-bit seed,
//! written little-endian into the first 8 key bytes with the remaining 24
//! bytes zero. Uniforms in `[0, 1)` map the top 53 bits of `next_u64`;
//! standard normals come from Box–Muller pairs
//! `(√(−2·ln(1−u₁))·cos(2π·u₂), √(−2·ln(1−u₁))·sin(2π·u₂))`.
//!
//! Stream order per mixture point: one uniform for the class choice
//! (`u < p_S` picks the safe class), then `2·⌈d/2⌉` uniforms for the point's
//! standard normals; the unused second normal of the final pair is discarded
//! when `d` is odd, never carried over to the next point. [`mvn_sample`] uses
//! the same per-point order without the class uniform. Shuffles draw index
//! `j = next_u64 mod (i+1)` in a descending Fisher–Yates pass.
//!
//! Everything here is a pure function of `(parameters, seed)`. Parallel
//! generation is only sound via distinct seeds, never by sharing one stream.

use nalgebra::{DMatrix, DVector};
use rand_chacha::rand_core::{RngCore, SeedableRng};
use rand_chacha::ChaCha12Rng;
use serde::{Deserialize, Serialize};
use std::io::{BufRead, BufReader, Read, Write};
use std::path::Path;

use crate::error::{check_dim, check_probability, Error, Result};
use crate::exact_sdr::GaussianClassModel;

/// Seed for the documented ChaCha12 stream. Same seed + same parameters
/// means bit-identical output.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct RngSeed(pub u64);

/// Class label; `Safe` carries sign +1, `Unsafe` −1.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Label {
    Safe,
    Unsafe,
}

impl Label {
    pub fn sign(self) -> f64 {
        match self {
            Label::Safe => 1.0,
            Label::Unsafe => -1.0,
        }
    }

    pub fn from_sign(value: f64) -> Result<Self> {
        if value == 1.0 {
            Ok(Label::Safe)
        } else if value == -1.0 {
            Ok(Label::Unsafe)
        } else {
            Err(Error::InvalidLabel(value))
        }
    }

    pub fn flipped(self) -> Self {
        match self {
            Label::Safe => Label::Unsafe,
            Label::Unsafe => Label::Safe,
        }
    }
}

impl Serialize for Label {
    fn serialize<S: serde::Serializer>(&self, serializer: S) -> std::result::Result<S::Ok, S::Error> {
        serializer.serialize_i8(match self {
            Label::Safe => 1,
            Label::Unsafe => -1,
        })
    }
}

impl<'de> Deserialize<'de> for Label {
    fn deserialize<D: serde::Deserializer<'de>>(deserializer: D) -> std::result::Result<Self, D::Error> {
        let raw = i8::deserialize(deserializer)?;
        Label::from_sign(raw as f64).map_err(serde::de::Error::custom)
    }
}

/// How a dataset was generated, when it came from [`sample_mixture`].
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Provenance {
    pub p_s: f64,
    pub seed: u64,
}

/// `n` points in `d` dimensions with ±1 labels.
#[derive(Debug, Clone, PartialEq)]
pub struct LabeledDataset {
    points: DMatrix<f64>,
    labels: Vec<Label>,
    provenance: Option<Provenance>,
}

impl LabeledDataset {
    /// Builds a dataset from an `n×d` point matrix (one row per point) and
    /// matching labels. Requires `n ≥ 1` and finite coordinates.
    pub fn new(points: DMatrix<f64>, labels: Vec<Label>) -> Result<Self> {
        if points.nrows() == 0 || labels.is_empty() {
            return Err(Error::EmptyDataset);
        }
        check_dim(points.nrows(), labels.len())?;
        if points.iter().any(|v| !v.is_finite()) {
            return Err(Error::NonFiniteData);
        }
        Ok(Self {
            points,
            labels,
            provenance: None,
        })
    }

    pub fn with_provenance(mut self, provenance: Provenance) -> Self {
        self.provenance = Some(provenance);
        self
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

    pub fn points(&self) -> &DMatrix<f64> {
        &self.points
    }

    pub fn labels(&self) -> &[Label] {
        &self.labels
    }

    pub fn label(&self, i: usize) -> Label {
        self.labels[i]
    }

    pub fn point(&self, i: usize) -> DVector<f64> {
        self.points.row(i).transpose()
    }

    pub fn provenance(&self) -> Option<Provenance> {
        self.provenance
    }

    pub fn count(&self, label: Label) -> usize {
        self.labels.iter().filter(|&&l| l == label).count()
    }

    pub fn indices_of(&self, label: Label) -> Vec<usize> {
        (0..self.len()).filter(|&i| self.labels[i] == label).collect()
    }

    /// New dataset holding the given rows, in the given order.
    pub fn subset(&self, indices: &[usize]) -> Result<Self> {
        if indices.is_empty() {
            return Err(Error::EmptyDataset);
        }
        let d = self.dim();
        let mut points = DMatrix::zeros(indices.len(), d);
        let mut labels = Vec::with_capacity(indices.len());
        for (row, &i) in indices.iter().enumerate() {
            points.row_mut(row).copy_from(&self.points.row(i));
            labels.push(self.labels[i]);
        }
        let mut out = Self::new(points, labels)?;
        out.provenance = self.provenance;
        Ok(out)
    }

    /// Writes the dataset as CSV: header `x1,...,xd,y`, one row per point,
    /// LF line endings, coordinates at 17 significant digits (full
    /// round-trip precision), labels as `1` or `-1`.
    pub fn write_csv<W: Write>(&self, mut out: W) -> Result<()> {
        let d = self.dim();
        let header: Vec<String> = (1..=d).map(|i| format!("x{i}")).collect();
        writeln!(out, "{},y", header.join(","))?;
        for i in 0..self.len() {
            let mut fields: Vec<String> =
                (0..d).map(|j| format_full_precision(self.points[(i, j)])).collect();
            fields.push(match self.labels[i] {
                Label::Safe => "1".to_string(),
                Label::Unsafe => "-1".to_string(),
            });
            writeln!(out, "{}", fields.join(","))?;
        }
        Ok(())
    }

    pub fn write_csv_path<P: AsRef<Path>>(&self, path: P) -> Result<()> {
        let file = std::fs::File::create(path)?;
        self.write_csv(std::io::BufWriter::new(file))
    }

    /// Parses the CSV format written by [`LabeledDataset::write_csv`].
    pub fn read_csv<R: Read>(input: R) -> Result<Self> {
        let reader = BufReader::new(input);
        let mut lines = reader.lines();
        let header = lines
            .next()
            .ok_or(Error::EmptyDataset)?
            .map_err(Error::Io)?;
        let columns: Vec<&str> = header.trim_end().split(',').collect();
        if columns.len() < 2 || columns[columns.len() - 1] != "y" {
            return Err(Error::CsvParse {
                line: 1,
                msg: "header must be x1,...,xd,y".into(),
            });
        }
        let d = columns.len() - 1;
        let mut rows: Vec<f64> = Vec::new();
        let mut labels = Vec::new();
        for (idx, line) in lines.enumerate() {
            let line = line.map_err(Error::Io)?;
            let line = line.trim_end();
            if line.is_empty() {
                continue;
            }
            let fields: Vec<&str> = line.split(',').collect();
            if fields.len() != d + 1 {
                return Err(Error::CsvParse {
                    line: idx + 2,
                    msg: format!("expected {} fields, found {}", d + 1, fields.len()),
                });
            }
            for field in &fields[..d] {
                let value: f64 = field.parse().map_err(|e| Error::CsvParse {
                    line: idx + 2,
                    msg: format!("bad float `{field}`: {e}"),
                })?;
                rows.push(value);
            }
            let y: f64 = fields[d].parse().map_err(|e| Error::CsvParse {
                line: idx + 2,
                msg: format!("bad label `{}`: {e}", fields[d]),
            })?;
            labels.push(Label::from_sign(y).map_err(|_| Error::CsvParse {
                line: idx + 2,
                msg: format!("label must be 1 or -1, got {}", fields[d]),
            })?);
        }
        if labels.is_empty() {
            return Err(Error::EmptyDataset);
        }
        let n = labels.len();
        Self::new(DMatrix::from_row_slice(n, d, &rows), labels)
    }

    pub fn read_csv_path<P: AsRef<Path>>(path: P) -> Result<Self> {
        Self::read_csv(std::fs::File::open(path)?)
    }
}

/// 17 significant digits; enough to reproduce any f64 bit pattern on parse.
pub(crate) fn format_full_precision(value: f64) -> String {
    format!("{value:.16e}")
}

/// The documented ChaCha12 uniform/normal stream.
pub(crate) struct MixtureStream {
    rng: ChaCha12Rng,
}

impl MixtureStream {
    pub(crate) fn new(seed: RngSeed) -> Self {
        let mut key = [0u8; 32];
        key[..8].copy_from_slice(&seed.0.to_le_bytes());
        Self {
            rng: ChaCha12Rng::from_seed(key),
        }
    }

    /// Uniform in `[0, 1)` from the top 53 bits of the next stream word.
    pub(crate) fn next_uniform(&mut self) -> f64 {
        (self.rng.next_u64() >> 11) as f64 * 2f64.powi(-53)
    }

    fn next_normal_pair(&mut self) -> (f64, f64) {
        let u1 = self.next_uniform();
        let u2 = self.next_uniform();
        // 1−u₁ ∈ (0, 1], so the log never sees zero.
        let r = (-2.0 * (1.0 - u1).ln()).sqrt();
        let theta = std::f64::consts::TAU * u2;
        (r * theta.cos(), r * theta.sin())
    }

    /// Fills `out` with standard normals, consuming exactly `⌈len/2⌉`
    /// Box–Muller pairs; the spare half of an odd-length fill is dropped.
    fn fill_standard_normals(&mut self, out: &mut [f64]) {
        let mut i = 0;
        while i < out.len() {
            let (z0, z1) = self.next_normal_pair();
            out[i] = z0;
            if i + 1 < out.len() {
                out[i + 1] = z1;
            }
            i += 2;
        }
    }

    /// Index in `[0, bound)` as `next_u64 mod bound`.
    pub(crate) fn next_index(&mut self, bound: usize) -> usize {
        (self.rng.next_u64() % bound as u64) as usize
    }

    /// Descending Fisher–Yates permutation of `0..n`.
    pub(crate) fn shuffled_indices(&mut self, n: usize) -> Vec<usize> {
        let mut perm: Vec<usize> = (0..n).collect();
        for i in (1..n).rev() {
            let j = self.next_index(i + 1);
            perm.swap(i, j);
        }
        perm
    }
}

/// Draws `n` points from one Gaussian class model; row `i` of the result is
/// the `i`-th point `μ + L·z` with `z` standard normal.
pub fn mvn_sample(model: &GaussianClassModel, n: usize, seed: RngSeed) -> DMatrix<f64> {
    let d = model.dim();
    let mut stream = MixtureStream::new(seed);
    let mut out = DMatrix::zeros(n, d);
    let mut z = vec![0.0; d];
    for i in 0..n {
        stream.fill_standard_normals(&mut z);
        write_gaussian_row(model, &z, &mut out, i);
    }
    out
}

fn write_gaussian_row(model: &GaussianClassModel, z: &[f64], out: &mut DMatrix<f64>, row: usize) {
    let l = model.chol_l();
    let mu = model.mu();
    let d = z.len();
    for r in 0..d {
        let mut acc = mu[r];
        for c in 0..=r {
            acc += l[(r, c)] * z[c];
        }
        out[(row, r)] = acc;
    }
}

/// Draws a labeled mixture sample: each point independently takes the safe
/// class with probability `p_s` and is then drawn from that class model.
pub fn sample_mixture(
    n: usize,
    p_s: f64,
    model_s: &GaussianClassModel,
    model_u: &GaussianClassModel,
    seed: RngSeed,
) -> Result<LabeledDataset> {
    if n == 0 {
        return Err(Error::EmptyDataset);
    }
    check_probability("p_s", p_s)?;
    check_dim(model_s.dim(), model_u.dim())?;
    let d = model_s.dim();
    let mut stream = MixtureStream::new(seed);
    let mut points = DMatrix::zeros(n, d);
    let mut labels = Vec::with_capacity(n);
    let mut z = vec![0.0; d];
    for i in 0..n {
        let label = if stream.next_uniform() < p_s {
            Label::Safe
        } else {
            Label::Unsafe
        };
        let model = match label {
            Label::Safe => model_s,
            Label::Unsafe => model_u,
        };
        stream.fill_standard_normals(&mut z);
        write_gaussian_row(model, &z, &mut points, i);
        labels.push(label);
    }
    Ok(LabeledDataset::new(points, labels)?.with_provenance(Provenance { p_s, seed: seed.0 }))
}

/// Splits a dataset into disjoint shuffled parts with the given fractions
/// (positive, summing to 1). Part sizes come from rounding the cumulative
/// fractions, so they are deterministic; a part that rounds to zero is an
/// error.
pub fn split(dataset: &LabeledDataset, fractions: &[f64], seed: RngSeed) -> Result<Vec<LabeledDataset>> {
    if fractions.is_empty() {
        return Err(Error::InvalidParameter("fractions must be nonempty".into()));
    }
    if fractions.iter().any(|&f| !(f > 0.0) || !f.is_finite()) {
        return Err(Error::InvalidParameter("fractions must be positive".into()));
    }
    let total: f64 = fractions.iter().sum();
    if (total - 1.0).abs() > 1e-9 {
        return Err(Error::InvalidParameter(format!(
            "fractions must sum to 1, got {total}"
        )));
    }
    let n = dataset.len();
    let perm = MixtureStream::new(seed).shuffled_indices(n);
    let mut boundaries = Vec::with_capacity(fractions.len() + 1);
    boundaries.push(0usize);
    let mut cum = 0.0;
    for (i, &f) in fractions.iter().enumerate() {
        cum += f;
        let edge = if i + 1 == fractions.len() {
            n
        } else {
            (cum * n as f64).round() as usize
        };
        boundaries.push(edge.min(n));
    }
    let mut parts = Vec::with_capacity(fractions.len());
    for i in 0..fractions.len() {
        let (lo, hi) = (boundaries[i], boundaries[i + 1]);
        if hi <= lo {
            return Err(Error::EmptySplitPart { index: i, n });
        }
        parts.push(dataset.subset(&perm[lo..hi])?);
    }
    Ok(parts)
}

#[cfg(test)]
mod tests {
    use super::*;
    use nalgebra::{DMatrix, DVector};

    fn unit_model(d: usize) -> GaussianClassModel {
        GaussianClassModel::new(DVector::zeros(d), DMatrix::identity(d, d)).unwrap()
    }

    fn example1_safe() -> GaussianClassModel {
        GaussianClassModel::new(
            DVector::from_vec(vec![4.0, 6.0]),
            DMatrix::from_row_slice(2, 2, &[1.3, 0.9, 0.9, 1.3]),
        )
        .unwrap()
    }

    fn example1_unsafe() -> GaussianClassModel {
        GaussianClassModel::new(
            DVector::from_vec(vec![3.0, 8.0]),
            DMatrix::from_row_slice(2, 2, &[0.6, 0.0, 0.0, 1.4]),
        )
        .unwrap()
    }

    #[test]
    fn fixed_seed_reproduces_identical_bits() {
        let s = example1_safe();
        let u = example1_unsafe();
        let a = sample_mixture(500, 0.4, &s, &u, RngSeed(7)).unwrap();
        let b = sample_mixture(500, 0.4, &s, &u, RngSeed(7)).unwrap();
        assert_eq!(a.points().as_slice(), b.points().as_slice());
        assert_eq!(a.labels(), b.labels());
        let c = sample_mixture(500, 0.4, &s, &u, RngSeed(8)).unwrap();
        assert_ne!(a.points().as_slice(), c.points().as_slice());
    }

    #[test]
    fn near_certain_prior_labels_everything_safe() {
        let s = example1_safe();
        let u = example1_unsafe();
        let data = sample_mixture(1000, 1.0 - 1e-12, &s, &u, RngSeed(3)).unwrap();
        assert_eq!(data.count(Label::Safe), 1000);
    }

    #[test]
    fn positive_fraction_tracks_prior() {
        let s = example1_safe();
        let u = example1_unsafe();
        let n = 10_000;
        let data = sample_mixture(n, 0.3, &s, &u, RngSeed(11)).unwrap();
        let frac = data.count(Label::Safe) as f64 / n as f64;
        let band = 3.0 * (0.3 * 0.7 / n as f64).sqrt();
        assert!((frac - 0.3).abs() <= band, "frac={frac} band={band}");
    }

    #[test]
    fn label_marginal_over_repetitions() {
        let s = example1_safe();
        let u = example1_unsafe();
        for p in [0.05, 0.5, 0.95] {
            let mut mean = 0.0;
            let reps = 200;
            for rep in 0..reps {
                let data = sample_mixture(1000, p, &s, &u, RngSeed(1000 + rep)).unwrap();
                mean += data.count(Label::Safe) as f64 / 1000.0;
            }
            mean /= reps as f64;
            assert!((mean - p).abs() <= 0.01, "p={p} mean={mean}");
        }
    }

    #[test]
    fn standard_normal_moments() {
        let model = unit_model(2);
        let n = 100_000;
        let sample = mvn_sample(&model, n, RngSeed(5));
        for j in 0..2 {
            let col = sample.column(j);
            let mean = col.sum() / n as f64;
            let var = col.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / (n - 1) as f64;
            assert!(mean.abs() <= 0.02, "mean={mean}");
            assert!((var - 1.0).abs() <= 0.05, "var={var}");
        }
    }

    #[test]
    fn sample_covariance_approaches_sigma() {
        let model = example1_safe();
        let n = 100_000;
        let sample = mvn_sample(&model, n, RngSeed(9));
        let mut mean = [0.0f64; 2];
        for i in 0..n {
            mean[0] += sample[(i, 0)];
            mean[1] += sample[(i, 1)];
        }
        mean[0] /= n as f64;
        mean[1] /= n as f64;
        let mut cov = [[0.0f64; 2]; 2];
        for i in 0..n {
            let dx = sample[(i, 0)] - mean[0];
            let dy = sample[(i, 1)] - mean[1];
            cov[0][0] += dx * dx;
            cov[0][1] += dx * dy;
            cov[1][1] += dy * dy;
        }
        let norm = (n - 1) as f64;
        let sigma = model.sigma();
        assert!((cov[0][0] / norm - sigma[(0, 0)]).abs() <= 0.05);
        assert!((cov[0][1] / norm - sigma[(0, 1)]).abs() <= 0.05);
        assert!((cov[1][1] / norm - sigma[(1, 1)]).abs() <= 0.05);
    }

    #[test]
    fn single_draw_is_reproducible() {
        let model = example1_safe();
        let a = mvn_sample(&model, 1, RngSeed(21));
        let b = mvn_sample(&model, 1, RngSeed(21));
        assert_eq!(a.as_slice(), b.as_slice());
    }

    #[test]
    fn positives_follow_the_safe_conditional() {
        let s = example1_safe();
        let u = example1_unsafe();
        let n = 20_000;
        let data = sample_mixture(n, 0.5, &s, &u, RngSeed(13)).unwrap();
        let idx = data.indices_of(Label::Safe);
        let n_pos = idx.len() as f64;
        let mut mean = DVector::zeros(2);
        for &i in &idx {
            mean += data.point(i);
        }
        mean /= n_pos;
        // 3σ CLT band per coordinate: σ_jj/√n₊.
        for j in 0..2 {
            let band = 3.0 * (s.sigma()[(j, j)] / n_pos).sqrt();
            assert!((mean[j] - s.mu()[j]).abs() <= band);
        }
        let mut cov = DMatrix::zeros(2, 2);
        for &i in &idx {
            let diff = data.point(i) - &mean;
            cov += &diff * diff.transpose();
        }
        cov /= n_pos - 1.0;
        for j in 0..2 {
            for k in 0..2 {
                // Var of a covariance entry is O(σ²/n); 3σ with a generous constant.
                let band = 3.0 * (2.0f64 * 1.3 * 1.3 / n_pos).sqrt();
                assert!((cov[(j, k)] - s.sigma()[(j, k)]).abs() <= band);
            }
        }
    }

    #[test]
    fn split_identity_partition() {
        let s = example1_safe();
        let u = example1_unsafe();
        let data = sample_mixture(20, 0.5, &s, &u, RngSeed(2)).unwrap();
        let parts = split(&data, &[1.0], RngSeed(0)).unwrap();
        assert_eq!(parts.len(), 1);
        assert_eq!(parts[0].len(), 20);
    }

    #[test]
    fn split_half_half() {
        let s = example1_safe();
        let u = example1_unsafe();
        let data = sample_mixture(10, 0.5, &s, &u, RngSeed(2)).unwrap();
        let parts = split(&data, &[0.5, 0.5], RngSeed(1)).unwrap();
        assert_eq!(parts[0].len(), 5);
        assert_eq!(parts[1].len(), 5);
    }

    #[test]
    fn split_is_a_partition() {
        let s = example1_safe();
        let u = example1_unsafe();
        let data = sample_mixture(1000, 0.5, &s, &u, RngSeed(4)).unwrap();
        let parts = split(&data, &[0.6, 0.2, 0.2], RngSeed(5)).unwrap();
        assert_eq!(parts.iter().map(|p| p.len()).sum::<usize>(), 1000);
        let mut rows: Vec<Vec<u64>> = Vec::new();
        for part in &parts {
            for i in 0..part.len() {
                let mut row: Vec<u64> = part.point(i).iter().map(|v| v.to_bits()).collect();
                row.push(part.label(i).sign().to_bits());
                rows.push(row);
            }
        }
        rows.sort();
        let mut original: Vec<Vec<u64>> = (0..data.len())
            .map(|i| {
                let mut row: Vec<u64> = data.point(i).iter().map(|v| v.to_bits()).collect();
                row.push(data.label(i).sign().to_bits());
                row
            })
            .collect();
        original.sort();
        assert_eq!(rows, original);
    }

    #[test]
    fn split_rejects_empty_parts() {
        let s = example1_safe();
        let u = example1_unsafe();
        let data = sample_mixture(10, 0.5, &s, &u, RngSeed(2)).unwrap();
        assert!(matches!(
            split(&data, &[0.01, 0.99], RngSeed(0)),
            Err(Error::EmptySplitPart { .. })
        ));
        assert!(split(&data, &[0.5, 0.6], RngSeed(0)).is_err());
        assert!(split(&data, &[-0.5, 1.5], RngSeed(0)).is_err());
    }

    #[test]
    fn csv_round_trip_is_bit_exact() {
        let s = example1_safe();
        let u = example1_unsafe();
        let data = sample_mixture(50, 0.5, &s, &u, RngSeed(6)).unwrap();
        let mut buf = Vec::new();
        data.write_csv(&mut buf).unwrap();
        let text = String::from_utf8(buf.clone()).unwrap();
        assert!(text.starts_with("x1,x2,y\n"));
        assert!(!text.contains('\r'));
        let back = LabeledDataset::read_csv(&buf[..]).unwrap();
        assert_eq!(back.points().as_slice(), data.points().as_slice());
        assert_eq!(back.labels(), data.labels());
    }

    #[test]
    fn csv_rejects_bad_labels() {
        let text = "x1,x2,y\n1.0,2.0,0\n";
        assert!(matches!(
            LabeledDataset::read_csv(text.as_bytes()),
            Err(Error::CsvParse { line: 2, .. })
        ));
    }

    #[test]
    fn dataset_rejects_invalid_input() {
        assert!(LabeledDataset::new(DMatrix::zeros(0, 2), vec![]).is_err());
        assert!(LabeledDataset::new(
            DMatrix::from_row_slice(1, 1, &[f64::NAN]),
            vec![Label::Safe]
        )
        .is_err());
        assert!(
            LabeledDataset::new(DMatrix::zeros(2, 1), vec![Label::Safe]).is_err(),
            "label count mismatch"
        );
    }
}
