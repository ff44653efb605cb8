//! Resampling distributions, i.i.d. sampling with rescaling, and the exact
//! and Monte-Carlo reconstruction error.

use nalgebra::DMatrix;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use crate::cloud::PointCloud;
use crate::error::{bad_params, Error, Result};
use crate::features::{highpass_response, local_variation, FeatureVector};
use crate::filters::IdealLowPass;
use crate::graph::ShiftOperator;

/// Probabilities `π` over the points of a cloud, optionally mixed with the
/// uniform distribution: `π ← (1-β)π + β/N`.
#[derive(Debug, Clone, PartialEq)]
pub struct ResamplingDistribution {
    probs: Vec<f64>,
    floor_mix: f64,
}

impl ResamplingDistribution {
    /// Normalizes non-negative scores to sum to one.
    pub fn from_scores(scores: Vec<f64>) -> Result<Self> {
        if scores.is_empty() {
            return Err(Error::EmptyCloud);
        }
        if scores.iter().any(|s| !s.is_finite() || *s < 0.0) {
            return Err(Error::NonFinite("resampling scores"));
        }
        let total: f64 = scores.iter().sum();
        if total <= 0.0 {
            return Err(Error::AllZeroFeatures);
        }
        Ok(Self {
            probs: scores.into_iter().map(|s| s / total).collect(),
            floor_mix: 0.0,
        })
    }

    pub fn uniform(n: usize) -> Result<Self> {
        Self::from_scores(vec![1.0; n])
    }

    /// Mixes in `β/N` so every point has positive probability.
    pub fn with_floor(&self, beta: f64) -> Result<Self> {
        if !(0.0..=1.0).contains(&beta) {
            return Err(bad_params(format!("floor mix must lie in [0, 1], got {beta}")));
        }
        let uniform = beta / self.probs.len() as f64;
        let probs = self.probs.iter().map(|p| (1.0 - beta) * p + uniform).collect();
        Ok(Self { probs, floor_mix: beta })
    }

    pub fn probs(&self) -> &[f64] {
        &self.probs
    }

    pub fn floor_mix(&self) -> f64 {
        self.floor_mix
    }

    pub fn len(&self) -> usize {
        self.probs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.probs.is_empty()
    }

    pub fn to_csv(&self) -> String {
        let mut out = String::from("index,pi\n");
        for (i, p) in self.probs.iter().enumerate() {
            out.push_str(&format!("{i},{p:.16e}\n"));
        }
        out
    }
}

/// `π_i ∝ ‖f_i‖₂`, optimal for rotation-invariant features.
pub fn dist_invariant(features: &FeatureVector) -> Result<ResamplingDistribution> {
    ResamplingDistribution::from_scores(features.row_norms())
}

/// `π_i ∝ √(c²‖F_i‖² + ‖(F X_o)_i‖²)`, optimal for a linear feature
/// operator `F` applied to coordinates of norm `c` and attributes `X_o`.
pub fn dist_variant(f_row_norms: &[f64], fxo_row_norms: &[f64], c: f64) -> Result<ResamplingDistribution> {
    if !(c > 0.0 && c.is_finite()) {
        return Err(bad_params(format!("c must be positive, got {c}")));
    }
    if !fxo_row_norms.is_empty() && fxo_row_norms.len() != f_row_norms.len() {
        return Err(Error::DimensionMismatch {
            expected: f_row_norms.len(),
            actual: fxo_row_norms.len(),
        });
    }
    let scores = f_row_norms
        .iter()
        .enumerate()
        .map(|(i, f)| {
            let o = fxo_row_norms.get(i).copied().unwrap_or(0.0);
            (c * c * f * f + o * o).sqrt()
        })
        .collect();
    ResamplingDistribution::from_scores(scores)
}

fn row_norms(m: &DMatrix<f64>) -> Vec<f64> {
    m.row_iter().map(|r| r.norm()).collect()
}

/// All-pass (`F = I`): `π_i ∝ √(c² + ‖(X_o)_i‖²)`; uniform without attributes.
pub fn dist_allpass(cloud: &PointCloud, c: f64) -> Result<ResamplingDistribution> {
    dist_variant(&vec![1.0; cloud.len()], &row_norms(cloud.attrs()), c)
}

/// High-pass strategy from the Haar high-pass response on a transition
/// shift: `π_i ∝ ‖(h_HH(A)X)_i‖^exponent` with `exponent ∈ {1, 2}`.
pub fn dist_highpass(shift: &ShiftOperator, cloud: &PointCloud, exponent: u32) -> Result<ResamplingDistribution> {
    match exponent {
        2 => dist_invariant(&FeatureVector::raw(DMatrix::from_vec(
            cloud.len(),
            1,
            local_variation(shift, cloud, false)?.column(),
        ))),
        1 => ResamplingDistribution::from_scores(row_norms(&highpass_response(shift, cloud, false)?)),
        _ => Err(bad_params(format!("high-pass exponent must be 1 or 2, got {exponent}"))),
    }
}

/// Ideal low-pass strategy: with `F = V_(b)·Ṽ_(b)ᵀ`,
/// `π_i ∝ √(c²‖F_i‖² + ‖(F X_o)_i‖²)`. For an orthonormal basis `‖F_i‖`
/// is the row norm of `V_(b)` (the graph leverage score).
pub fn dist_ideal_lowpass(basis: &IdealLowPass, cloud: &PointCloud, c: f64) -> Result<ResamplingDistribution> {
    if basis.len() != cloud.len() {
        return Err(Error::DimensionMismatch {
            expected: basis.len(),
            actual: cloud.len(),
        });
    }
    let v = basis.basis();
    let f_norms = if basis.is_orthonormal() {
        row_norms(v)
    } else {
        let gram = basis.dual().transpose() * basis.dual();
        v.row_iter().map(|r| (r * &gram).dot(&r).max(0.0).sqrt()).collect()
    };
    let fxo = if cloud.attr_dim() > 0 {
        row_norms(&basis.project(cloud.attrs())?)
    } else {
        Vec::new()
    };
    dist_variant(&f_norms, &fxo, c)
}

/// Haar low-pass strategy with `F = I + A/|λ_max|`; row norms come straight
/// from the sparse rows.
pub fn dist_haar_lowpass(shift: &ShiftOperator, cloud: &PointCloud, c: f64) -> Result<ResamplingDistribution> {
    if shift.len() != cloud.len() {
        return Err(Error::DimensionMismatch {
            expected: shift.len(),
            actual: cloud.len(),
        });
    }
    let lambda = shift.lambda_max()?.abs();
    let scale = if lambda > 0.0 { 1.0 / lambda } else { 0.0 };
    let a = shift.matrix();
    let f_norms: Vec<f64> = (0..cloud.len())
        .map(|i| {
            let mut diag = 1.0;
            let mut off = 0.0;
            for (j, v) in a.row(i) {
                if j == i {
                    diag += scale * v;
                } else {
                    off += (scale * v).powi(2);
                }
            }
            (diag * diag + off).sqrt()
        })
        .collect();
    let fxo = if cloud.attr_dim() > 0 {
        let xo = cloud.attrs();
        row_norms(&(xo + a.mul_dense(xo) * scale))
    } else {
        Vec::new()
    };
    dist_variant(&f_norms, &fxo, c)
}

/// `M` draws with replacement; slot `j` carries weight `1/√(M·π_{M_j})`.
#[derive(Debug, Clone, PartialEq)]
pub struct ResampleResult {
    pub indices: Vec<usize>,
    pub weights: Vec<f64>,
    pub seed: u64,
}

impl ResampleResult {
    pub fn len(&self) -> usize {
        self.indices.len()
    }

    pub fn is_empty(&self) -> bool {
        self.indices.is_empty()
    }

    /// Distinct sampled indices in ascending order.
    pub fn unique_indices(&self) -> Vec<usize> {
        let mut out = self.indices.clone();
        out.sort_unstable();
        out.dedup();
        out
    }

    /// Per-point sum of squared slot weights: the diagonal of `SΨᵀΨ`.
    pub fn reconstruction_gains(&self, n: usize) -> Result<Vec<f64>> {
        let mut gains = vec![0.0; n];
        for (&i, &w) in self.indices.iter().zip(&self.weights) {
            if i >= n {
                return Err(Error::DimensionMismatch {
                    expected: n,
                    actual: i + 1,
                });
            }
            gains[i] += w * w;
        }
        Ok(gains)
    }

    pub fn to_csv(&self) -> String {
        let mut out = String::from("slot,index,weight\n");
        for (j, (i, w)) in self.indices.iter().zip(&self.weights).enumerate() {
            out.push_str(&format!("{j},{i},{w:.16e}\n"));
        }
        out
    }
}

fn draw(probs: &[f64], cumulative: &[f64], m: usize, rng: &mut ChaCha8Rng) -> (Vec<usize>, Vec<f64>) {
    let total = *cumulative.last().expect("non-empty");
    let last_positive = probs.iter().rposition(|&p| p > 0.0).expect("positive mass");
    let mut indices = Vec::with_capacity(m);
    let mut weights = Vec::with_capacity(m);
    for _ in 0..m {
        let u = rng.random::<f64>() * total;
        let i = cumulative.partition_point(|&c| c <= u).min(last_positive);
        indices.push(i);
        weights.push(1.0 / (m as f64 * probs[i]).sqrt());
    }
    (indices, weights)
}

fn cumulative(probs: &[f64]) -> Vec<f64> {
    probs
        .iter()
        .scan(0.0, |acc, p| {
            *acc += p;
            Some(*acc)
        })
        .collect()
}

fn check_sample(dist: &ResamplingDistribution, m: usize) -> Result<()> {
    if m == 0 {
        return Err(bad_params("sample size M must be at least 1"));
    }
    if !dist.probs.iter().any(|&p| p > 0.0) {
        return Err(Error::ZeroSupport);
    }
    Ok(())
}

/// Draws `m` i.i.d. indices by inverse CDF; deterministic for a given seed.
pub fn sample(dist: &ResamplingDistribution, m: usize, seed: u64) -> Result<ResampleResult> {
    check_sample(dist, m)?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let (indices, weights) = draw(&dist.probs, &cumulative(&dist.probs), m, &mut rng);
    Ok(ResampleResult { indices, weights, seed })
}

fn trial_rng(seed: u64, trial: usize) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(trial as u64 + 1);
    rng
}

fn check_rows(features: &DMatrix<f64>, dist: &ResamplingDistribution) -> Result<()> {
    if features.nrows() != dist.len() {
        return Err(Error::DimensionMismatch {
            expected: dist.len(),
            actual: features.nrows(),
        });
    }
    Ok(())
}

/// `‖SΨᵀΨ f - f‖_F²` for one resample.
pub fn reconstruction_error(features: &DMatrix<f64>, result: &ResampleResult) -> Result<f64> {
    let gains = result.reconstruction_gains(features.nrows())?;
    Ok(features
        .row_iter()
        .zip(&gains)
        .map(|(r, g)| (g - 1.0).powi(2) * r.norm_squared())
        .sum())
}

/// Per-draw error `Σ_i (1/π_i - 1)‖f_i‖²`; `+∞` when a row with nonzero
/// features has zero probability. This is the exact mean error for a single
/// draw; see [`expected_reconstruction_error`] for `M` draws.
pub fn mse_closed_form(features: &DMatrix<f64>, dist: &ResamplingDistribution) -> Result<f64> {
    check_rows(features, dist)?;
    let mut total = 0.0;
    for (r, &p) in features.row_iter().zip(&dist.probs) {
        let f2 = r.norm_squared();
        if f2 == 0.0 {
            continue;
        }
        if p <= 0.0 {
            return Ok(f64::INFINITY);
        }
        total += (1.0 / p - 1.0) * f2;
    }
    Ok(total)
}

/// Exact expectation of [`reconstruction_error`] over `M` i.i.d. draws:
/// each multiplicity is Binomial(M, π_i), so the per-draw error shrinks by `1/M`.
pub fn expected_reconstruction_error(features: &DMatrix<f64>, dist: &ResamplingDistribution, m: usize) -> Result<f64> {
    if m == 0 {
        return Err(bad_params("sample size M must be at least 1"));
    }
    Ok(mse_closed_form(features, dist)? / m as f64)
}

/// Per-draw error for a linear operator on coordinates of norm `c`:
/// `c²·Σ(1/π_i-1)‖F_i‖² + Σ(1/π_i-1)‖(F X_o)_i‖²`. `fxo` may have zero columns.
pub fn mse_closed_form_variant(
    f_row_norms: &[f64],
    fxo: &DMatrix<f64>,
    dist: &ResamplingDistribution,
    c: f64,
) -> Result<f64> {
    if f_row_norms.len() != dist.len() {
        return Err(Error::DimensionMismatch {
            expected: dist.len(),
            actual: f_row_norms.len(),
        });
    }
    if fxo.ncols() > 0 {
        check_rows(fxo, dist)?;
    }
    let mut total = 0.0;
    for (i, &p) in dist.probs.iter().enumerate() {
        let o2 = if fxo.ncols() > 0 {
            fxo.row(i).norm_squared()
        } else {
            0.0
        };
        let a = c * c * f_row_norms[i] * f_row_norms[i] + o2;
        if a == 0.0 {
            continue;
        }
        if p <= 0.0 {
            return Ok(f64::INFINITY);
        }
        total += (1.0 / p - 1.0) * a;
    }
    Ok(total)
}

const TRIAL_CHUNK: usize = 64;

/// Evaluates `f` for every trial in parallel and returns the results in
/// trial order, so later reductions do not depend on thread scheduling.
fn chunked<T: Send>(trials: usize, f: impl Fn(usize) -> T + Sync) -> Vec<T> {
    let chunks: Vec<Vec<T>> = (0..trials.div_ceil(TRIAL_CHUNK))
        .into_par_iter()
        .map(|c| (c * TRIAL_CHUNK..((c + 1) * TRIAL_CHUNK).min(trials)).map(&f).collect())
        .collect();
    chunks.into_iter().flatten().collect()
}

/// Mean of [`reconstruction_error`] over `trials` independent resamples.
pub fn empirical_mse(
    features: &DMatrix<f64>,
    dist: &ResamplingDistribution,
    m: usize,
    trials: usize,
    seed: u64,
) -> Result<f64> {
    check_rows(features, dist)?;
    check_sample(dist, m)?;
    if trials == 0 {
        return Err(bad_params("trials must be at least 1"));
    }
    let cum = cumulative(&dist.probs);
    let total: f64 = chunked(trials, |t| {
        let (indices, weights) = draw(&dist.probs, &cum, m, &mut trial_rng(seed, t));
        let r = ResampleResult { indices, weights, seed };
        reconstruction_error(features, &r).expect("rows checked")
    })
    .iter()
    .sum();
    Ok(total / trials as f64)
}

/// Whether the reconstruction applies the `S` rescaling.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Weighting {
    Rescaled,
    Unweighted,
}

/// Mean reconstruction `SΨᵀΨf` (or `ΨᵀΨf`) over `trials` resamples.
pub fn empirical_mean(
    features: &DMatrix<f64>,
    dist: &ResamplingDistribution,
    m: usize,
    trials: usize,
    seed: u64,
    weighting: Weighting,
) -> Result<DMatrix<f64>> {
    Ok(gain_moments(features, dist, m, trials, seed, weighting)?.0)
}

fn gain_moments(
    features: &DMatrix<f64>,
    dist: &ResamplingDistribution,
    m: usize,
    trials: usize,
    seed: u64,
    weighting: Weighting,
) -> Result<(DMatrix<f64>, f64)> {
    check_rows(features, dist)?;
    check_sample(dist, m)?;
    if trials == 0 {
        return Err(bad_params("trials must be at least 1"));
    }
    let n = dist.len();
    let cum = cumulative(&dist.probs);
    // per-row sums of the gain and its square, per chunk of trials
    let partials: Vec<(Vec<f64>, Vec<f64>)> = (0..trials.div_ceil(TRIAL_CHUNK))
        .into_par_iter()
        .map(|c| {
            let mut sum = vec![0.0; n];
            let mut sum_sq = vec![0.0; n];
            let mut gains = vec![0.0; n];
            for t in c * TRIAL_CHUNK..((c + 1) * TRIAL_CHUNK).min(trials) {
                gains.iter_mut().for_each(|g| *g = 0.0);
                let (indices, _) = draw(&dist.probs, &cum, m, &mut trial_rng(seed, t));
                for &i in &indices {
                    gains[i] += 1.0;
                }
                for (i, g) in gains.iter().enumerate() {
                    let g = match weighting {
                        Weighting::Rescaled if *g > 0.0 => g / (m as f64 * dist.probs[i]),
                        _ => *g,
                    };
                    sum[i] += g;
                    sum_sq[i] += g * g;
                }
            }
            (sum, sum_sq)
        })
        .collect();
    let mut sum = vec![0.0; n];
    let mut sum_sq = vec![0.0; n];
    for (s, q) in &partials {
        sum.iter_mut().zip(s).for_each(|(a, b)| *a += b);
        sum_sq.iter_mut().zip(q).for_each(|(a, b)| *a += b);
    }
    let t = trials as f64;
    let mut mean = features.clone();
    let mut variance = 0.0;
    for i in 0..n {
        let g = sum[i] / t;
        mean.row_mut(i).scale_mut(g);
        variance += (sum_sq[i] / t - g * g).max(0.0) * features.row(i).norm_squared();
    }
    Ok((mean, variance))
}

/// Monte-Carlo check that `SΨᵀΨf` is an unbiased estimate of `f`.
#[derive(Debug, Clone, PartialEq)]
pub struct UnbiasednessReport {
    /// `‖mean - f‖_F / ‖f‖_F`.
    pub relative_bias: f64,
    /// Mean squared Frobenius deviation of a single estimate from the mean.
    pub variance: f64,
    pub trials: usize,
}

pub fn unbiasedness_check(
    features: &DMatrix<f64>,
    dist: &ResamplingDistribution,
    m: usize,
    trials: usize,
    seed: u64,
) -> Result<UnbiasednessReport> {
    check_rows(features, dist)?;
    if let Some(i) = (0..dist.len()).find(|&i| dist.probs[i] <= 0.0 && features.row(i).norm_squared() > 0.0) {
        return Err(Error::UnsupportedFeature(i));
    }
    let (mean, variance) = gain_moments(features, dist, m, trials, seed, Weighting::Rescaled)?;
    let norm = features.norm();
    let relative_bias = if norm > 0.0 {
        (&mean - features).norm() / norm
    } else {
        0.0
    };
    Ok(UnbiasednessReport {
        relative_bias,
        variance,
        trials,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::cloud::{apply_transform, recenter, scale_normalize, spectral_norm, RigidTransform};
    use crate::filters::ideal_lowpass;
    use crate::graph::{build_graph, shift_operator, IsolatedPolicy, ShiftKind};
    use crate::shapes::{hinge_contour_mask, make_shape, ShapeKind, ShapeParams};
    use nalgebra::{SymmetricEigen, Vector3};
    use proptest::prelude::*;
    use rand::Rng;

    fn random_matrix(rows: usize, cols: usize, seed: u64) -> DMatrix<f64> {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        DMatrix::from_fn(rows, cols, |_, _| rng.random_range(-1.0..1.0))
    }

    fn random_dist(n: usize, seed: u64) -> ResamplingDistribution {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        ResamplingDistribution::from_scores((0..n).map(|_| rng.random_range(0.05..1.0)).collect()).unwrap()
    }

    fn transition(cloud: &PointCloud, sigma: f64, tau: f64) -> ShiftOperator {
        let g = build_graph(cloud, sigma, tau).unwrap();
        shift_operator(&g, ShiftKind::Transition, IsolatedPolicy::SelfLoop).unwrap()
    }

    #[test]
    fn invariant_examples() {
        let f = FeatureVector::raw(DMatrix::from_row_slice(2, 2, &[3.0, 0.0, 0.0, 4.0]));
        let d = dist_invariant(&f).unwrap();
        assert!((d.probs()[0] - 3.0 / 7.0).abs() < 1e-15);
        let z = FeatureVector::raw(DMatrix::from_row_slice(3, 1, &[0.0, 1.0, -1.0]));
        let d = dist_invariant(&z).unwrap();
        assert_eq!(d.probs()[0], 0.0);
        assert!((d.probs()[1] - 0.5).abs() < 1e-15);
        let zero = FeatureVector::raw(DMatrix::zeros(3, 2));
        assert!(matches!(dist_invariant(&zero), Err(Error::AllZeroFeatures)));
    }

    #[test]
    fn floor_mix_bounds_probabilities() {
        let z = FeatureVector::raw(DMatrix::from_row_slice(4, 1, &[0.0, 1.0, 0.0, 3.0]));
        let d = dist_invariant(&z).unwrap().with_floor(0.1).unwrap();
        assert!(d.probs().iter().all(|&p| p >= 0.1 / 4.0));
        assert!((d.probs().iter().sum::<f64>() - 1.0).abs() < 1e-12);
        assert_eq!(d.floor_mix(), 0.1);
        assert!(d.with_floor(1.5).is_err());
    }

    #[test]
    fn variant_and_allpass_examples() {
        let d = dist_variant(&[1.0, 2.0], &[], 3.0).unwrap();
        assert!((d.probs()[0] - 1.0 / 3.0).abs() < 1e-15);
        let cloud = make_shape(ShapeKind::Line, 4, &ShapeParams::default()).unwrap();
        let d = dist_allpass(&cloud, 2.0).unwrap();
        assert!(d.probs().iter().all(|&p| (p - 0.25).abs() < 1e-15));
        let with = cloud
            .with_attrs(DMatrix::from_row_slice(4, 1, &[0.0, 0.0, 0.0, 2.0]))
            .unwrap();
        let d = dist_allpass(&with, 2.0).unwrap();
        let expect = 8f64.sqrt() / (6.0 + 8f64.sqrt());
        assert!((d.probs()[3] - expect).abs() < 1e-14);
    }

    #[test]
    fn highpass_fixtures() {
        let line = make_shape(ShapeKind::Line, 9, &ShapeParams::default()).unwrap();
        let d = dist_highpass(&transition(&line, 1.0, 1.5), &line, 2).unwrap();
        assert!(d.probs()[1..8].iter().all(|&p| p < 1e-20));
        assert!((d.probs()[0] - 0.5).abs() < 1e-12);

        let circle = make_shape(ShapeKind::Circle, 30, &ShapeParams::default()).unwrap();
        let d = dist_highpass(&transition(&circle, 0.3, 0.3), &circle, 1).unwrap();
        assert!(d.probs().iter().all(|&p| (p - 1.0 / 30.0).abs() < 1e-10));
        assert!(dist_highpass(&transition(&circle, 0.3, 0.3), &circle, 3).is_err());
    }

    #[test]
    fn highpass_mass_sits_on_hinge_contour() {
        let n = 12;
        let hinge = make_shape(ShapeKind::Hinge, n, &ShapeParams::default()).unwrap();
        let d = dist_highpass(&transition(&hinge, 1.0, 1.5), &hinge, 2).unwrap();
        let contour = hinge_contour_mask(n);
        let mut order: Vec<usize> = (0..hinge.len()).collect();
        order.sort_by(|&a, &b| d.probs()[b].total_cmp(&d.probs()[a]));
        let top = hinge.len() / 10;
        assert!(order[..top].iter().all(|&i| contour[i]));
    }

    #[test]
    fn highpass_is_rigid_invariant() {
        let cloud = make_shape(
            ShapeKind::Sphere,
            300,
            &ShapeParams {
                seed: 5,
                ..ShapeParams::default()
            },
        )
        .unwrap();
        let base = dist_highpass(&transition(&cloud, 0.2, 0.3), &cloud, 2).unwrap();
        let t = RigidTransform::from_axis_angle(Vector3::new(0.3, -1.0, 0.2), 2.1, Vector3::new(5.0, 1.0, -4.0));
        let moved = apply_transform(&cloud, &t).unwrap();
        let after = dist_highpass(&transition(&moved, 0.2, 0.3), &moved, 2).unwrap();
        for (a, b) in base.probs().iter().zip(after.probs()) {
            assert!((a - b).abs() < 1e-9);
        }
    }

    #[test]
    fn pipeline_is_scale_invariant() {
        let cloud = make_shape(ShapeKind::Hinge, 10, &ShapeParams::default()).unwrap();
        let run = |c: &PointCloud| {
            let x = scale_normalize(&recenter(c), 1.0).unwrap();
            dist_highpass(&transition(&x, 0.1, 0.15), &x, 2).unwrap()
        };
        let base = run(&cloud);
        let scaled = run(&PointCloud::from_coords(cloud.coords() * 7.5).unwrap());
        for (a, b) in base.probs().iter().zip(scaled.probs()) {
            assert!((a - b).abs() < 1e-9);
        }
    }

    #[test]
    fn ideal_lowpass_examples() {
        let cloud = make_shape(
            ShapeKind::Sphere,
            40,
            &ShapeParams {
                seed: 2,
                ..ShapeParams::default()
            },
        )
        .unwrap();
        let g = build_graph(&cloud, 0.5, 0.9).unwrap();
        let op = shift_operator(&g, ShiftKind::NormalizedAdjacency, IsolatedPolicy::SelfLoop).unwrap();
        let full = ideal_lowpass(&op, 40).unwrap();
        let d = dist_ideal_lowpass(&full, &cloud, 1.0).unwrap();
        assert!(d.probs().iter().all(|&p| (p - 1.0 / 40.0).abs() < 1e-10));

        let k3 = PointCloud::from_points(&[[0.0, 0.0, 0.0], [1.0, 0.0, 0.0], [0.5, 0.75f64.sqrt(), 0.0]]).unwrap();
        let g = build_graph(&k3, 1.0, 1.01).unwrap();
        let op = shift_operator(&g, ShiftKind::Adjacency, IsolatedPolicy::Strict).unwrap();
        let d = dist_ideal_lowpass(&ideal_lowpass(&op, 1).unwrap(), &k3, 1.0).unwrap();
        assert!(d.probs().iter().all(|&p| (p - 1.0 / 3.0).abs() < 1e-12));
    }

    #[test]
    fn ideal_lowpass_matches_dense_oracle() {
        let cloud = make_shape(
            ShapeKind::Sphere,
            60,
            &ShapeParams {
                seed: 9,
                ..ShapeParams::default()
            },
        )
        .unwrap();
        let cloud = cloud.with_attrs(random_matrix(60, 2, 4)).unwrap();
        let g = build_graph(&cloud, 0.5, 0.8).unwrap();
        let op = shift_operator(&g, ShiftKind::NormalizedAdjacency, IsolatedPolicy::SelfLoop).unwrap();
        let c = spectral_norm(cloud.coords()).unwrap();
        let d = dist_ideal_lowpass(&ideal_lowpass(&op, 5).unwrap(), &cloud, c).unwrap();

        let eig = SymmetricEigen::new(op.matrix().to_dense());
        let mut order: Vec<usize> = (0..60).collect();
        order.sort_by(|&a, &b| eig.eigenvalues[b].total_cmp(&eig.eigenvalues[a]));
        let v = DMatrix::from_fn(60, 5, |i, k| eig.eigenvectors[(i, order[k])]);
        let proj = &v * (v.transpose() * cloud.attrs());
        let scores: Vec<f64> = (0..60)
            .map(|i| (c * c * v.row(i).norm_squared() + proj.row(i).norm_squared()).sqrt())
            .collect();
        let oracle = ResamplingDistribution::from_scores(scores).unwrap();
        for (a, b) in d.probs().iter().zip(oracle.probs()) {
            assert!((a - b).abs() < 1e-8);
        }
    }

    #[test]
    fn haar_lowpass_examples_and_oracle() {
        let far = PointCloud::from_points(&[[0.0, 0.0, 0.0], [5.0, 0.0, 0.0], [10.0, 0.0, 0.0]]).unwrap();
        let g = build_graph(&far, 1.0, 1.0).unwrap();
        let a = shift_operator(&g, ShiftKind::Adjacency, IsolatedPolicy::SelfLoop).unwrap();
        let d = dist_haar_lowpass(&a, &far, 1.0).unwrap();
        assert!(d.probs().iter().all(|&p| (p - 1.0 / 3.0).abs() < 1e-15));

        let pair = PointCloud::from_points(&[[0.0, 0.0, 0.0], [1.0, 0.0, 0.0]]).unwrap();
        let d = dist_haar_lowpass(&transition(&pair, 1.0, 1.0), &pair, 1.0).unwrap();
        assert_eq!(d.probs(), &[0.5, 0.5]);

        let cloud = make_shape(
            ShapeKind::Sphere,
            50,
            &ShapeParams {
                seed: 1,
                ..ShapeParams::default()
            },
        )
        .unwrap();
        let cloud = cloud.with_attrs(random_matrix(50, 3, 8)).unwrap();
        let g = build_graph(&cloud, 0.6, 0.9).unwrap();
        let op = shift_operator(&g, ShiftKind::Adjacency, IsolatedPolicy::SelfLoop).unwrap();
        let c = 1.7;
        let d = dist_haar_lowpass(&op, &cloud, c).unwrap();
        let dense = op.matrix().to_dense();
        let lambda = SymmetricEigen::new(dense.clone()).eigenvalues.amax();
        let f = DMatrix::identity(50, 50) + dense / lambda;
        let fxo = &f * cloud.attrs();
        let scores = (0..50)
            .map(|i| (c * c * f.row(i).norm_squared() + fxo.row(i).norm_squared()).sqrt())
            .collect();
        let oracle = ResamplingDistribution::from_scores(scores).unwrap();
        for (x, y) in d.probs().iter().zip(oracle.probs()) {
            assert!((x - y).abs() < 1e-10);
        }
    }

    #[test]
    fn sample_degenerate_and_deterministic() {
        let d = ResamplingDistribution::from_scores(vec![1.0, 0.0, 0.0]).unwrap();
        let r = sample(&d, 5, 11).unwrap();
        assert_eq!(r.indices, vec![0; 5]);
        assert!(r.weights.iter().all(|&w| (w - 1.0 / 5f64.sqrt()).abs() < 1e-15));
        let d = random_dist(30, 3);
        assert_eq!(sample(&d, 200, 42).unwrap(), sample(&d, 200, 42).unwrap());
        assert_ne!(
            sample(&d, 200, 42).unwrap().indices,
            sample(&d, 200, 43).unwrap().indices
        );
        assert!(sample(&d, 0, 1).is_err());
    }

    #[test]
    fn sample_frequencies_match_uniform() {
        let d = ResamplingDistribution::uniform(10).unwrap();
        let r = sample(&d, 100_000, 7).unwrap();
        let mut counts = [0usize; 10];
        r.indices.iter().for_each(|&i| counts[i] += 1);
        for c in counts {
            assert!((c as f64 / 1e5 - 0.1).abs() <= 0.005);
        }
    }

    #[test]
    fn zero_probability_points_are_never_drawn() {
        let d = ResamplingDistribution::from_scores(vec![0.0, 1.0, 0.0, 0.0, 2.0, 0.0]).unwrap();
        let r = sample(&d, 5000, 1).unwrap();
        assert!(r.indices.iter().all(|&i| i == 1 || i == 4));
    }

    #[test]
    fn reconstruction_error_examples() {
        let f = DMatrix::from_row_slice(3, 2, &[1.0, 2.0, 0.0, 0.0, 0.0, 0.0]);
        let d = ResamplingDistribution::from_scores(vec![1.0, 0.0, 0.0]).unwrap();
        let r = sample(&d, 4, 0).unwrap();
        assert!(reconstruction_error(&f, &r).unwrap().abs() < 1e-15);

        // each point appears exactly M·π_i times
        let d = ResamplingDistribution::from_scores(vec![1.0, 2.0, 1.0]).unwrap();
        let indices = vec![0, 1, 1, 2];
        let weights = indices.iter().map(|&i| 1.0 / (4.0 * d.probs()[i]).sqrt()).collect();
        let r = ResampleResult {
            indices,
            weights,
            seed: 0,
        };
        let f = random_matrix(3, 4, 1);
        assert!(reconstruction_error(&f, &r).unwrap() < 1e-12);
        let bad = ResampleResult {
            indices: vec![5],
            weights: vec![1.0],
            seed: 0,
        };
        assert!(matches!(
            reconstruction_error(&f, &bad),
            Err(Error::DimensionMismatch { .. })
        ));
    }

    #[test]
    fn closed_form_examples() {
        let f = random_matrix(1, 3, 2);
        assert_eq!(
            mse_closed_form(&f, &ResamplingDistribution::uniform(1).unwrap()).unwrap(),
            0.0
        );
        let f = random_matrix(6, 3, 3);
        let u = mse_closed_form(&f, &ResamplingDistribution::uniform(6).unwrap()).unwrap();
        assert!((u - 5.0 * f.norm_squared()).abs() < 1e-12);
        let opt = dist_invariant(&FeatureVector::raw(f.clone())).unwrap();
        assert!(mse_closed_form(&f, &opt).unwrap() <= u);
        let d = ResamplingDistribution::from_scores(vec![0.0, 1.0, 1.0, 1.0, 1.0, 1.0]).unwrap();
        assert_eq!(mse_closed_form(&f, &d).unwrap(), f64::INFINITY);
        assert_eq!(
            expected_reconstruction_error(&f, &opt, 4).unwrap() * 4.0,
            mse_closed_form(&f, &opt).unwrap()
        );
    }

    #[test]
    fn variant_closed_form_reduces_without_attributes() {
        let d = random_dist(5, 6);
        let norms = [0.3, 1.0, 0.2, 0.0, 0.7];
        let plain = mse_closed_form_variant(&norms, &DMatrix::zeros(5, 0), &d, 2.0).unwrap();
        let f = DMatrix::from_column_slice(5, 1, &norms);
        assert!((plain - 4.0 * mse_closed_form(&f, &d).unwrap()).abs() < 1e-12);
    }

    #[test]
    fn monte_carlo_matches_expected_error() {
        let f = random_matrix(20, 3, 10);
        let d = random_dist(20, 11);
        for m in [1, 100] {
            let mc = empirical_mse(&f, &d, m, 10_000, 5).unwrap();
            let exact = expected_reconstruction_error(&f, &d, m).unwrap();
            assert!((mc - exact).abs() <= 0.02 * exact, "M = {m}: {mc} vs {exact}");
        }
    }

    #[test]
    fn estimator_is_unbiased() {
        let f = random_matrix(20, 3, 12);
        let d = random_dist(20, 13);
        let report = unbiasedness_check(&f, &d, 50, 10_000, 3).unwrap();
        assert!(report.relative_bias <= 0.02, "{}", report.relative_bias);
        let exact = expected_reconstruction_error(&f, &d, 50).unwrap();
        assert!((report.variance - exact).abs() <= 0.05 * exact);
    }

    #[test]
    fn unweighted_mean_scales_by_m_pi() {
        let f = random_matrix(8, 2, 14);
        let d = random_dist(8, 15);
        let mean = empirical_mean(&f, &d, 20, 20_000, 9, Weighting::Unweighted).unwrap();
        for i in 0..8 {
            let expect = f.row(i) * (20.0 * d.probs()[i]);
            assert!((mean.row(i) - &expect).norm() <= 0.03 * expect.norm());
        }
    }

    #[test]
    fn degenerate_support_paths() {
        let f = DMatrix::from_row_slice(3, 1, &[2.0, 0.0, 0.0]);
        let d = ResamplingDistribution::from_scores(vec![1.0, 0.0, 0.0]).unwrap();
        assert_eq!(unbiasedness_check(&f, &d, 3, 10, 0).unwrap().relative_bias, 0.0);
        let g = DMatrix::from_row_slice(3, 1, &[2.0, 1.0, 0.0]);
        assert!(matches!(
            unbiasedness_check(&g, &d, 3, 10, 0),
            Err(Error::UnsupportedFeature(1))
        ));
    }

    #[test]
    fn csv_layouts() {
        let d = ResamplingDistribution::from_scores(vec![1.0, 1.0]).unwrap();
        assert!(d.to_csv().starts_with("index,pi\n0,5.0000000000000000e-1\n"));
        let r = sample(&d, 2, 0).unwrap();
        assert_eq!(r.to_csv().lines().count(), 3);
        assert!(r.to_csv().starts_with("slot,index,weight\n0,"));
    }

    proptest! {
        #[test]
        fn probabilities_sum_to_one(scores in proptest::collection::vec(0.0f64..10.0, 1..40), beta in 0.0f64..1.0) {
            prop_assume!(scores.iter().any(|&s| s > 0.0));
            let d = ResamplingDistribution::from_scores(scores).unwrap().with_floor(beta).unwrap();
            prop_assert!((d.probs().iter().sum::<f64>() - 1.0).abs() < 1e-12);
            prop_assert!(d.probs().iter().all(|&p| p >= 0.0));
        }

        #[test]
        fn weights_match_probabilities(seed in 0u64..1000, m in 1usize..50) {
            let d = random_dist(12, seed);
            let r = sample(&d, m, seed).unwrap();
            for (&i, &w) in r.indices.iter().zip(&r.weights) {
                prop_assert!((w - 1.0 / (m as f64 * d.probs()[i]).sqrt()).abs() < 1e-12);
            }
        }
    }
}
