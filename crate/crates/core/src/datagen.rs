//! Seeded scenario generators, CSV ingestion, normalization and splitting.

use std::path::{Path, PathBuf};

use nalgebra::{DMatrix, DVector};
use rand::seq::SliceRandom;
use rand::Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::error::{AdvError, Result};
use crate::norms::Dataset;
use crate::rng::{stream, Purpose};

pub const DEFAULT_TEST_SIZE: usize = 10_000;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ScenarioKind {
    Gaussian,
    Latent,
    FourierFeatures,
    RandomProjection,
    CsvFile,
}

/// Parameters of a data-generating scenario.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScenarioSpec {
    pub kind: ScenarioKind,
    /// Training samples.
    pub n: usize,
    /// Number of features (projections for the projection scenario).
    pub p: usize,
    /// Noise standard deviation.
    pub sigma: f64,
    /// Covariate scale: `x ~ N(0, r²I)` for the Gaussian scenario, the
    /// standard deviation of the feature noise `u` for the latent one.
    pub r: f64,
    /// Latent dimension, or ambient input dimension for projections.
    pub d: usize,
    /// Standard deviation of the random Fourier frequencies.
    pub sigma_w: f64,
    /// `Some(k)`: k-sparse `±1` coefficients instead of a dense unit vector.
    pub sparsity: Option<usize>,
    pub test_size: usize,
    pub seed: u64,
    pub csv_path: Option<PathBuf>,
    pub target: Option<String>,
}

impl ScenarioSpec {
    /// Defaults `σ = 1`, `r = 1`, `σ_w = 0.01`, `d = 1` (latent) or `1000`
    /// (projection), with a 10000-point test set.
    pub fn new(kind: ScenarioKind, n: usize, p: usize, seed: u64) -> Self {
        ScenarioSpec {
            kind,
            n,
            p,
            sigma: 1.0,
            r: 1.0,
            d: if kind == ScenarioKind::RandomProjection { 1000 } else { 1 },
            sigma_w: 0.01,
            sparsity: None,
            test_size: DEFAULT_TEST_SIZE,
            seed,
            csv_path: None,
            target: None,
        }
    }

    fn validate(&self) -> Result<()> {
        if self.n == 0 || self.p == 0 || self.test_size == 0 {
            return Err(AdvError::InvalidArgument("n, p and test size must be positive".into()));
        }
        if !(self.sigma >= 0.0) || !(self.r >= 0.0) || !(self.sigma_w >= 0.0) {
            return Err(AdvError::InvalidArgument("scales must be non-negative".into()));
        }
        if let Some(k) = self.sparsity {
            if k == 0 || k > self.p {
                return Err(AdvError::InvalidArgument(format!("sparsity {k} must lie in 1..={}", self.p)));
            }
        }
        Ok(())
    }
}

/// Realized ground truth of a synthetic scenario.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Truth {
    /// `β*` (Gaussian), `θ` (latent, projection).
    pub coefficients: Vec<f64>,
    /// Noise realized on the training rows.
    pub train_noise: Vec<f64>,
}

#[derive(Debug, Clone)]
pub struct LabeledSplit {
    pub train: Dataset,
    pub test: Dataset,
    pub truth: Option<Truth>,
}

/// Projection scenario: the observed designs `XSᵀ` plus the raw inputs.
#[derive(Debug, Clone)]
pub struct ProjectionSplit {
    pub projected: LabeledSplit,
    pub raw_train: Dataset,
    pub raw_test: Dataset,
    /// `p × d` Rademacher matrix.
    pub s: DMatrix<f64>,
}

fn normal_matrix<R: Rng>(rng: &mut R, rows: usize, cols: usize, scale: f64) -> DMatrix<f64> {
    // Row-major draw order so a row's entries are consecutive in the stream.
    DMatrix::from_row_iterator(rows, cols, (0..rows * cols).map(|_| scale * <StandardNormal as Distribution<f64>>::sample(&StandardNormal, &mut *rng)))
}

fn normal_vector<R: Rng>(rng: &mut R, len: usize, scale: f64) -> DVector<f64> {
    DVector::from_iterator(len, (0..len).map(|_| scale * <StandardNormal as Distribution<f64>>::sample(&StandardNormal, &mut *rng)))
}

fn coefficients(spec: &ScenarioSpec, len: usize) -> DVector<f64> {
    let mut rng = stream(spec.seed, Purpose::Coefficients);
    match spec.sparsity {
        Some(k) => {
            let mut idx: Vec<usize> = (0..len).collect();
            idx.shuffle(&mut rng);
            let mut b = DVector::zeros(len);
            for &j in &idx[..k] {
                b[j] = if rng.random::<bool>() { 1.0 } else { -1.0 };
            }
            b
        }
        None => {
            let b = normal_vector(&mut rng, len, 1.0);
            let nb = b.norm();
            if nb == 0.0 {
                b
            } else {
                b / nb
            }
        }
    }
}

/// `y = Xβ* + ε` with `x ~ N(0, r²I)`, `ε ~ N(0, σ²)`.
pub fn gen_gaussian(spec: &ScenarioSpec) -> Result<LabeledSplit> {
    spec.validate()?;
    let beta = coefficients(spec, spec.p);
    let x = normal_matrix(&mut stream(spec.seed, Purpose::Design), spec.n, spec.p, spec.r);
    let eps = normal_vector(&mut stream(spec.seed, Purpose::Noise), spec.n, spec.sigma);
    let xt = normal_matrix(&mut stream(spec.seed, Purpose::TestDesign), spec.test_size, spec.p, spec.r);
    let et = normal_vector(&mut stream(spec.seed, Purpose::TestNoise), spec.test_size, spec.sigma);
    let y = &x * &beta + &eps;
    let yt = &xt * &beta + et;
    Ok(LabeledSplit {
        train: Dataset::new(x, y)?,
        test: Dataset::new(xt, yt)?,
        truth: Some(Truth {
            coefficients: beta.as_slice().to_vec(),
            train_noise: eps.as_slice().to_vec(),
        }),
    })
}

/// `p × d` matrix with orthogonal columns and `WᵀW = (p/d)I`.
pub fn latent_loading(p: usize, d: usize, seed: u64) -> Result<DMatrix<f64>> {
    if d == 0 || d > p {
        return Err(AdvError::InvalidArgument(format!("latent dimension {d} must lie in 1..={p}")));
    }
    let g = normal_matrix(&mut stream(seed, Purpose::FeatureMap), p, d, 1.0);
    let q = g.qr().q();
    Ok(q * (p as f64 / d as f64).sqrt())
}

/// `x = Wz + u`, `y = θᵀz + ξ` with `z ~ N(0, I_d)`, `u ~ N(0, r²I_p)`,
/// `ξ ~ N(0, σ²)` and `θ = 1/√d` in every coordinate.
pub fn gen_latent(spec: &ScenarioSpec) -> Result<LabeledSplit> {
    spec.validate()?;
    let w = latent_loading(spec.p, spec.d, spec.seed)?;
    let theta = DVector::from_element(spec.d, 1.0 / (spec.d as f64).sqrt());
    let draw = |rows: usize, zp: Purpose, up: Purpose, np: Purpose| {
        let z = normal_matrix(&mut stream(spec.seed, zp), rows, spec.d, 1.0);
        let u = normal_matrix(&mut stream(spec.seed, up), rows, spec.p, spec.r);
        let xi = normal_vector(&mut stream(spec.seed, np), rows, spec.sigma);
        let x = &z * w.transpose() + u;
        let y = &z * &theta + &xi;
        (x, y, xi)
    };
    let (x, y, xi) = draw(spec.n, Purpose::Latent, Purpose::Design, Purpose::Noise);
    let (xt, yt, _) = draw(spec.test_size, Purpose::Attack, Purpose::TestDesign, Purpose::TestNoise);
    Ok(LabeledSplit {
        train: Dataset::new(x, y)?,
        test: Dataset::new(xt, yt)?,
        truth: Some(Truth {
            coefficients: theta.as_slice().to_vec(),
            train_noise: xi.as_slice().to_vec(),
        }),
    })
}

/// Random Fourier features `x = √(2/p) cos(Wz + b)` of the inputs of `base`,
/// `W_jk ~ N(0, σ_w²)`, `b_j ~ U[0, 2π)`; outputs are kept. The first `n`
/// rows of a seeded permutation train, up to `test_size` of the rest test.
pub fn gen_fourier(spec: &ScenarioSpec, base: &Dataset) -> Result<LabeledSplit> {
    spec.validate()?;
    let m = spec.p;
    let d0 = base.p();
    let mut rng = stream(spec.seed, Purpose::FeatureMap);
    let w = normal_matrix(&mut rng, m, d0, spec.sigma_w);
    let b = DVector::from_iterator(m, (0..m).map(|_| rng.random::<f64>() * std::f64::consts::TAU));
    let amp = (2.0 / m as f64).sqrt();
    let mut feats = &base.x * w.transpose();
    for mut row in feats.row_iter_mut() {
        for j in 0..m {
            row[j] = amp * (row[j] + b[j]).cos();
        }
    }
    let mapped = Dataset::new(feats, base.y.clone())?;
    if spec.n >= mapped.n() {
        return Err(AdvError::InvalidArgument(format!(
            "training size {} leaves no test rows out of {}",
            spec.n,
            mapped.n()
        )));
    }
    let (train, test) = partition(&mapped, spec.n, spec.test_size, spec.seed);
    Ok(LabeledSplit { train, test, truth: None })
}

/// Rademacher `S` (`p × d`), `x ~ N(0, I_d)`, `y = xᵀSᵀθ + ε` with `θ`
/// standard normal rescaled so that `‖Sᵀθ‖₂ = 1`.
pub fn gen_projection(spec: &ScenarioSpec) -> Result<ProjectionSplit> {
    spec.validate()?;
    if spec.p > spec.d {
        return Err(AdvError::InvalidArgument(format!(
            "projection dimension {} exceeds input dimension {}",
            spec.p, spec.d
        )));
    }
    let mut rng = stream(spec.seed, Purpose::Projection);
    let s = DMatrix::from_row_iterator(
        spec.p,
        spec.d,
        (0..spec.p * spec.d).map(|_| if rng.random::<bool>() { 1.0 } else { -1.0 }),
    );
    let theta = normal_vector(&mut stream(spec.seed, Purpose::Coefficients), spec.p, 1.0);
    let scale = s.tr_mul(&theta).norm();
    let theta = if scale > 0.0 { theta / scale } else { theta };
    let st = s.transpose();
    let x = normal_matrix(&mut stream(spec.seed, Purpose::Design), spec.n, spec.d, 1.0);
    let eps = normal_vector(&mut stream(spec.seed, Purpose::Noise), spec.n, spec.sigma);
    let xt = normal_matrix(&mut stream(spec.seed, Purpose::TestDesign), spec.test_size, spec.d, 1.0);
    let et = normal_vector(&mut stream(spec.seed, Purpose::TestNoise), spec.test_size, spec.sigma);
    let z = &x * &st;
    let zt = &xt * &st;
    let y = &z * &theta + &eps;
    let yt = &zt * &theta + et;
    Ok(ProjectionSplit {
        projected: LabeledSplit {
            train: Dataset::new(z, y.clone())?,
            test: Dataset::new(zt, yt.clone())?,
            truth: Some(Truth {
                coefficients: theta.as_slice().to_vec(),
                train_noise: eps.as_slice().to_vec(),
            }),
        },
        raw_train: Dataset::new(x, y)?,
        raw_test: Dataset::new(xt, yt)?,
        s,
    })
}

/// Reads a headered numeric CSV; `target` becomes `y`, every other column
/// (in header order) a feature. Lines starting with `#` are ignored.
pub fn load_csv(path: &Path, target: &str) -> Result<Dataset> {
    let io_err = |e: std::io::Error| AdvError::Io {
        path: path.display().to_string(),
        source: e,
    };
    let file = std::fs::File::open(path).map_err(io_err)?;
    let mut rdr = csv::ReaderBuilder::new()
        .comment(Some(b'#'))
        .flexible(true)
        .trim(csv::Trim::All)
        .from_reader(file);
    let headers: Vec<String> = rdr
        .headers()
        .map_err(|e| csv_err(path, 1, e))?
        .iter()
        .map(str::to_string)
        .collect();
    let t = headers
        .iter()
        .position(|h| h == target)
        .ok_or_else(|| AdvError::MissingColumn(target.to_string()))?;
    let width = headers.len();
    let mut xs = Vec::new();
    let mut ys = Vec::new();
    for (k, rec) in rdr.records().enumerate() {
        let rec = rec.map_err(|e| csv_err(path, k + 2, e))?;
        let row = rec.position().map(|p| p.line() as usize).unwrap_or(k + 2);
        if rec.len() != width {
            return Err(AdvError::RaggedRow {
                row,
                expected: width,
                found: rec.len(),
            });
        }
        for (j, field) in rec.iter().enumerate() {
            let v: f64 = field.parse().ok().filter(|v: &f64| v.is_finite()).ok_or_else(|| AdvError::NonNumeric {
                row,
                column: headers[j].clone(),
                value: field.to_string(),
            })?;
            if j == t {
                ys.push(v);
            } else {
                xs.push(v);
            }
        }
    }
    if ys.is_empty() {
        return Err(AdvError::InvalidDataset(format!("{} has no data rows", path.display())));
    }
    if width < 2 {
        return Err(AdvError::InvalidDataset("need at least one feature column besides the target".into()));
    }
    Dataset::new(
        DMatrix::from_row_slice(ys.len(), width - 1, &xs),
        DVector::from_vec(ys),
    )
}

fn csv_err(path: &Path, row: usize, e: csv::Error) -> AdvError {
    AdvError::Csv {
        location: format!("{}:{}", path.display(), row),
        message: e.to_string(),
    }
}

#[derive(Debug, Clone)]
pub struct Normalized {
    pub data: Dataset,
    pub means: Vec<f64>,
    pub scales: Vec<f64>,
    pub warnings: Vec<String>,
}

/// Centers every column and divides by its root-mean-square; `y` is left
/// untouched. Constant columns are only centered and produce a warning.
pub fn normalize(d: &Dataset) -> Result<Normalized> {
    if d.n() < 2 {
        return Err(AdvError::InvalidArgument("normalization needs at least two rows".into()));
    }
    let nf = d.n() as f64;
    let mut x = d.x.clone();
    let mut means = Vec::with_capacity(d.p());
    let mut scales = Vec::with_capacity(d.p());
    let mut warnings = Vec::new();
    for (j, mut col) in x.column_iter_mut().enumerate() {
        let mean = col.sum() / nf;
        col.add_scalar_mut(-mean);
        // A second pass removes the rounding left by the first.
        let resid = col.sum() / nf;
        col.add_scalar_mut(-resid);
        let scale = (col.norm_squared() / nf).sqrt();
        let scale = if scale > 1e-12 * mean.abs().max(1.0) {
            col /= scale;
            scale
        } else {
            col.fill(0.0);
            warnings.push(format!("column {j} is constant; left centered with scale 1"));
            1.0
        };
        means.push(mean + resid);
        scales.push(scale);
    }
    Ok(Normalized {
        data: Dataset::new(x, d.y.clone())?,
        means,
        scales,
        warnings,
    })
}

/// Seeded random partition with `round(train_fraction·n)` training rows.
pub fn split(d: &Dataset, train_fraction: f64, seed: u64) -> Result<LabeledSplit> {
    if !(train_fraction > 0.0 && train_fraction < 1.0) {
        return Err(AdvError::InvalidArgument(format!("train fraction {train_fraction} must lie in (0, 1)")));
    }
    let n_train = (train_fraction * d.n() as f64).round() as usize;
    if n_train == 0 || n_train == d.n() {
        return Err(AdvError::InvalidArgument("split leaves an empty part".into()));
    }
    let (train, test) = partition(d, n_train, d.n(), seed);
    Ok(LabeledSplit { train, test, truth: None })
}

fn partition(d: &Dataset, n_train: usize, max_test: usize, seed: u64) -> (Dataset, Dataset) {
    let mut idx: Vec<usize> = (0..d.n()).collect();
    idx.shuffle(&mut stream(seed, Purpose::Split));
    let take = |rows: &[usize]| Dataset {
        x: d.x.select_rows(rows),
        y: DVector::from_iterator(rows.len(), rows.iter().map(|&i| d.y[i])),
    };
    let test_end = (n_train + max_test).min(d.n());
    (take(&idx[..n_train]), take(&idx[n_train..test_end]))
}

/// Path of the bundled diabetes table (442 patients, 10 baseline variables,
/// target column `target`).
pub fn diabetes_csv_path() -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("data").join("diabetes.csv")
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::io::Write;

    #[test]
    fn gaussian_is_deterministic_and_shaped() {
        let mut spec = ScenarioSpec::new(ScenarioKind::Gaussian, 60, 200, 7);
        spec.test_size = 50;
        let a = gen_gaussian(&spec).unwrap();
        let b = gen_gaussian(&spec).unwrap();
        assert_eq!(a.train.x, b.train.x);
        assert_eq!(a.test.y, b.test.y);
        assert_eq!((a.train.n(), a.train.p(), a.test.n()), (60, 200, 50));
        let beta = DVector::from_vec(a.truth.unwrap().coefficients);
        assert!((beta.norm() - 1.0).abs() < 1e-12);
    }

    #[test]
    fn noiseless_and_sparse() {
        let mut spec = ScenarioSpec::new(ScenarioKind::Gaussian, 10, 30, 1);
        spec.sigma = 0.0;
        spec.sparsity = Some(5);
        spec.test_size = 5;
        let s = gen_gaussian(&spec).unwrap();
        let beta = DVector::from_vec(s.truth.unwrap().coefficients);
        assert_eq!(beta.iter().filter(|v| v.abs() == 1.0).count(), 5);
        assert!((&s.train.x * &beta - &s.train.y).amax() == 0.0);
    }

    #[test]
    fn latent_loading_is_orthogonal() {
        for seed in 0..5 {
            let w = latent_loading(40, 3, seed).unwrap();
            let g = w.tr_mul(&w) - DMatrix::identity(3, 3) * (40.0 / 3.0);
            assert!(g.amax() <= 1e-8);
        }
        assert!(latent_loading(3, 4, 0).is_err());
    }

    #[test]
    fn fourier_range_and_degenerate_map() {
        let base = load_csv(&diabetes_csv_path(), "target").unwrap();
        let mut spec = ScenarioSpec::new(ScenarioKind::FourierFeatures, 60, 100, 2);
        let s = gen_fourier(&spec, &base).unwrap();
        let amp = (2.0f64 / 100.0).sqrt();
        assert_eq!(s.train.p(), 100);
        assert!(s.train.x.amax() <= amp + 1e-15 && s.test.x.amax() <= amp + 1e-15);
        spec.sigma_w = 0.0;
        let s = gen_fourier(&spec, &base).unwrap();
        assert_eq!(s.train.x.row(0), s.train.x.row(5));
    }

    #[test]
    fn projection_entries_are_signs() {
        let mut spec = ScenarioSpec::new(ScenarioKind::RandomProjection, 20, 30, 3);
        spec.d = 50;
        spec.test_size = 10;
        let s = gen_projection(&spec).unwrap();
        assert!(s.s.iter().all(|&v| v == 1.0 || v == -1.0));
        assert!((&s.raw_train.x * s.s.transpose() - &s.projected.train.x).amax() < 1e-12);
        spec.p = 60;
        assert!(gen_projection(&spec).is_err());
    }

    #[test]
    fn diabetes_shape() {
        let d = load_csv(&diabetes_csv_path(), "target").unwrap();
        assert_eq!((d.n(), d.p()), (442, 10));
    }

    #[test]
    fn csv_errors_are_distinct() {
        let dir = tempfile::tempdir().unwrap();
        let write = |name: &str, body: &str| {
            let p = dir.path().join(name);
            std::fs::File::create(&p).unwrap().write_all(body.as_bytes()).unwrap();
            p
        };
        let ok = write("ok.csv", "# comment\na,b,y\n1,2,3\n4,5,6\n7,8,9\n");
        let d = load_csv(&ok, "y").unwrap();
        assert_eq!((d.n(), d.p()), (3, 2));
        assert!(matches!(load_csv(&ok, "z"), Err(AdvError::MissingColumn(c)) if c == "z"));
        let bad = write("bad.csv", "a,y\n1,2\nx,3\n");
        assert!(matches!(load_csv(&bad, "y"), Err(AdvError::NonNumeric { row: 3, .. })));
        let ragged = write("ragged.csv", "a,y\n1,2\n3\n");
        assert!(matches!(load_csv(&ragged, "y"), Err(AdvError::RaggedRow { row: 3, .. })));
        assert!(matches!(load_csv(&dir.path().join("none.csv"), "y"), Err(AdvError::Io { .. })));
    }

    #[test]
    fn normalize_centers() {
        let spec = ScenarioSpec { test_size: 1, ..ScenarioSpec::new(ScenarioKind::Gaussian, 30, 4, 9) };
        let mut d = gen_gaussian(&spec).unwrap().train;
        d.x.column_mut(2).fill(3.5);
        d.x.column_mut(1).add_scalar_mut(100.0);
        let nd = normalize(&d).unwrap();
        let sums = nd.data.x.row_sum();
        assert!(sums.amax() <= 1e-8 * 30.0 * nd.data.x.amax());
        assert_eq!(nd.warnings.len(), 1);
        assert_eq!(nd.scales[2], 1.0);
    }

    #[test]
    fn split_is_seeded_partition() {
        let d = load_csv(&diabetes_csv_path(), "target").unwrap();
        let a = split(&d, 0.5, 4).unwrap();
        let b = split(&d, 0.5, 4).unwrap();
        assert_eq!(a.train.y, b.train.y);
        assert_eq!(a.train.n() + a.test.n(), 442);
        let mut all: Vec<f64> = a.train.y.iter().chain(a.test.y.iter()).copied().collect();
        let mut orig: Vec<f64> = d.y.iter().copied().collect();
        all.sort_by(|x, y| x.partial_cmp(y).unwrap());
        orig.sort_by(|x, y| x.partial_cmp(y).unwrap());
        assert_eq!(all, orig);
        assert!(split(&d, 1.0, 0).is_err());
    }
}
