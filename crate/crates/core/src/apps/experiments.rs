use nalgebra::Vector3;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use rayon::prelude::*;

use super::denoise::denoise_lowpass;
use super::icp::{cloud_rmse, icp_register, IcpOptions, RegistrationReport};
use super::scene::DeskScene;
use super::sphere::fit_sphere;
use crate::cloud::{apply_transform, PointCloud, RigidTransform};
use crate::error::{bad_params, Result};
use crate::filters::ideal_lowpass;
use crate::graph::{build_graph, graph_params, shift_operator, IsolatedPolicy, ShiftKind};
use crate::resampling::{dist_highpass, dist_ideal_lowpass, sample, ResamplingDistribution};
use crate::shapes::{make_shape, ShapeKind, ShapeParams};

fn median(mut v: Vec<f64>) -> f64 {
    v.sort_by(f64::total_cmp);
    let n = v.len();
    if n % 2 == 1 {
        v[n / 2]
    } else {
        0.5 * (v[n / 2 - 1] + v[n / 2])
    }
}

fn draw_count(ratio: f64, n: usize) -> Result<usize> {
    if !(ratio > 0.0 && ratio <= 1.0) {
        return Err(bad_params(format!("sampling ratio must lie in (0, 1], got {ratio}")));
    }
    Ok((ratio * n as f64).ceil() as usize)
}

fn resample(cloud: &PointCloud, dist: &ResamplingDistribution, ratio: f64, seed: u64) -> Result<PointCloud> {
    let r = sample(dist, draw_count(ratio, cloud.len())?, seed)?;
    cloud.select(&r.unique_indices())
}

/// Noisy-sphere modeling: uniform resampling of the noisy cloud against
/// low-pass denoising followed by ideal low-pass resampling.
#[derive(Debug, Clone, PartialEq)]
pub struct SphereConfig {
    pub points: usize,
    pub radius: f64,
    pub center: Vector3<f64>,
    /// Per-coordinate noise variance.
    pub noise_variance: f64,
    pub ratio: f64,
    pub passes: usize,
    pub bandwidth: usize,
    pub seeds: Vec<u64>,
}

impl Default for SphereConfig {
    fn default() -> Self {
        Self {
            points: 2000,
            radius: 0.3182,
            center: Vector3::new(0.0833, 0.1903, 1.1725),
            noise_variance: 0.02,
            ratio: 0.1,
            passes: 6,
            bandwidth: 20,
            seeds: (0..20).collect(),
        }
    }
}

/// Relative radius errors of the four fits for one seed.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SphereTrial {
    pub seed: u64,
    pub noisy: f64,
    pub uniform: f64,
    pub denoised: f64,
    pub lowpass: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SphereSummary {
    pub trials: Vec<SphereTrial>,
    pub median_uniform: f64,
    pub median_lowpass: f64,
}

impl SphereSummary {
    /// Fractional reduction of the median radius error.
    pub fn reduction(&self) -> f64 {
        1.0 - self.median_lowpass / self.median_uniform
    }

    pub fn to_csv(&self) -> String {
        let mut out = String::from("seed,noisy,uniform,denoised,lowpass\n");
        for t in &self.trials {
            out.push_str(&format!(
                "{},{:.6e},{:.6e},{:.6e},{:.6e}\n",
                t.seed, t.noisy, t.uniform, t.denoised, t.lowpass
            ));
        }
        out
    }
}

pub fn sphere_trial(cfg: &SphereConfig, seed: u64) -> Result<SphereTrial> {
    let params = ShapeParams {
        radius: cfg.radius,
        center: cfg.center,
        noise_sigma: cfg.noise_variance.sqrt(),
        seed,
        ..ShapeParams::default()
    };
    let noisy = make_shape(ShapeKind::Sphere, cfg.points, &params)?;
    let err = |c: &PointCloud| fit_sphere(c).map(|f| f.radius_error(cfg.radius));

    let uniform = resample(&noisy, &ResamplingDistribution::uniform(noisy.len())?, cfg.ratio, seed)?;

    let (sigma, tau) = graph_params(&noisy, None, None)?;
    let shift = shift_operator(
        &build_graph(&noisy, sigma, tau)?,
        ShiftKind::Transition,
        IsolatedPolicy::SelfLoop,
    )?;
    let denoised = denoise_lowpass(&noisy, &shift, cfg.passes)?;
    let (sigma, tau) = graph_params(&denoised, None, None)?;
    let smooth = shift_operator(
        &build_graph(&denoised, sigma, tau)?,
        ShiftKind::NormalizedAdjacency,
        IsolatedPolicy::SelfLoop,
    )?;
    let basis = ideal_lowpass(&smooth, cfg.bandwidth)?;
    let dist = dist_ideal_lowpass(&basis, &denoised, 1.0)?;
    let lowpass = resample(&denoised, &dist, cfg.ratio, seed)?;

    Ok(SphereTrial {
        seed,
        noisy: err(&noisy)?,
        uniform: err(&uniform)?,
        denoised: err(&denoised)?,
        lowpass: err(&lowpass)?,
    })
}

pub fn run_sphere_experiment(cfg: &SphereConfig) -> Result<SphereSummary> {
    let trials = cfg
        .seeds
        .par_iter()
        .map(|&s| sphere_trial(cfg, s))
        .collect::<Result<Vec<_>>>()?;
    Ok(SphereSummary {
        median_uniform: median(trials.iter().map(|t| t.uniform).collect()),
        median_lowpass: median(trials.iter().map(|t| t.lowpass).collect()),
        trials,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum RegistrationStrategy {
    Full,
    Uniform,
    Highpass,
}

impl std::str::FromStr for RegistrationStrategy {
    type Err = crate::error::Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "full" => Ok(RegistrationStrategy::Full),
            "uniform" => Ok(RegistrationStrategy::Uniform),
            "highpass" => Ok(RegistrationStrategy::Highpass),
            other => Err(bad_params(format!("unknown registration strategy `{other}`"))),
        }
    }
}

impl RegistrationStrategy {
    pub fn name(self) -> &'static str {
        match self {
            RegistrationStrategy::Full => "full",
            RegistrationStrategy::Uniform => "uniform",
            RegistrationStrategy::Highpass => "highpass",
        }
    }
}

/// Two overlapping views of a desk scene; the source view is displaced by a
/// random rigid transform whose inverse registration must recover.
#[derive(Debug, Clone, PartialEq)]
pub struct RegistrationConfig {
    pub scene: DeskScene,
    /// Target covers `[0, target_end]` and source `[source_start, 1]` of the desk width.
    pub target_end: f64,
    pub source_start: f64,
    pub ratio: f64,
    pub angle_degrees: f64,
    pub shift_norm: f64,
    pub icp: IcpOptions,
    pub seeds: Vec<u64>,
}

impl Default for RegistrationConfig {
    fn default() -> Self {
        Self {
            scene: DeskScene::default(),
            target_end: 0.85,
            source_start: 0.15,
            ratio: 0.05,
            angle_degrees: 5.0,
            shift_norm: 0.05,
            icp: IcpOptions {
                max_iter: 200,
                tol: 1e-10,
            },
            seeds: (0..20).collect(),
        }
    }
}

impl RegistrationConfig {
    /// Ground truth for a seed: rotation by `angle_degrees` about a random
    /// axis and a shift of length `shift_norm` in a random direction.
    pub fn truth(&self, seed: u64) -> RigidTransform {
        let mut rng = ChaCha8Rng::seed_from_u64(seed ^ 0x7265_6769_7374_6572);
        let mut unit = || {
            let v = Vector3::from_fn(|_, _| StandardNormal.sample(&mut rng));
            let v: Vector3<f64> = v;
            v.normalize()
        };
        let axis = unit();
        let dir = unit();
        RigidTransform::from_axis_angle(axis, self.angle_degrees.to_radians(), dir * self.shift_norm)
    }

    /// `(source, target)` where `truth` maps the source onto the target frame.
    pub fn views(&self, truth: &RigidTransform) -> Result<(PointCloud, PointCloud)> {
        let target = self.scene.view(0.0, self.target_end)?;
        let source = apply_transform(&self.scene.view(self.source_start, 1.0)?, &truth.inverse())?;
        Ok((source, target))
    }
}

fn highpass_resample(cloud: &PointCloud, ratio: f64, seed: u64) -> Result<PointCloud> {
    let (sigma, tau) = graph_params(cloud, None, None)?;
    let shift = shift_operator(
        &build_graph(cloud, sigma, tau)?,
        ShiftKind::Transition,
        IsolatedPolicy::SelfLoop,
    )?;
    resample(cloud, &dist_highpass(&shift, cloud, 2)?, ratio, seed)
}

/// Resamples both clouds with `strategy` at `ratio`, registers the samples
/// and scores the recovered transform on the full clouds.
pub fn register_clouds(
    source: &PointCloud,
    target: &PointCloud,
    strategy: RegistrationStrategy,
    ratio: f64,
    seed: u64,
    icp: IcpOptions,
    truth: Option<&RigidTransform>,
) -> Result<RegistrationReport> {
    let (src, tgt) = match strategy {
        RegistrationStrategy::Full => (source.clone(), target.clone()),
        RegistrationStrategy::Uniform => (
            resample(source, &ResamplingDistribution::uniform(source.len())?, ratio, seed)?,
            resample(
                target,
                &ResamplingDistribution::uniform(target.len())?,
                ratio,
                seed.wrapping_add(1),
            )?,
        ),
        RegistrationStrategy::Highpass => (
            highpass_resample(source, ratio, seed)?,
            highpass_resample(target, ratio, seed.wrapping_add(1))?,
        ),
    };
    let mut report = icp_register(&src, &tgt, icp, truth)?;
    // RMSE always over the full clouds so strategies are comparable
    report.rmse = cloud_rmse(&apply_transform(source, &report.recovered)?, target);
    Ok(report)
}

fn registration_run(
    cfg: &RegistrationConfig,
    strategy: RegistrationStrategy,
    seed: u64,
    source: &PointCloud,
    target: &PointCloud,
    truth: &RigidTransform,
) -> Result<RegistrationReport> {
    register_clouds(source, target, strategy, cfg.ratio, seed, cfg.icp, Some(truth))
}

pub fn registration_trial(
    cfg: &RegistrationConfig,
    strategy: RegistrationStrategy,
    seed: u64,
) -> Result<RegistrationReport> {
    let truth = cfg.truth(seed);
    let (source, target) = cfg.views(&truth)?;
    registration_run(cfg, strategy, seed, &source, &target, &truth)
}

#[derive(Debug, Clone, PartialEq)]
pub struct RegistrationTrial {
    pub seed: u64,
    pub full: RegistrationReport,
    pub uniform: RegistrationReport,
    pub highpass: RegistrationReport,
}

/// Medians of `(rmse, shift error, rotation error)` per strategy.
#[derive(Debug, Clone, PartialEq)]
pub struct RegistrationSummary {
    pub trials: Vec<RegistrationTrial>,
    pub full: [f64; 3],
    pub uniform: [f64; 3],
    pub highpass: [f64; 3],
}

impl RegistrationSummary {
    pub fn to_csv(&self) -> String {
        let mut out = String::from("seed,strategy,rmse,shift_error,rotation_error,iterations\n");
        for t in &self.trials {
            for (name, r) in [("full", &t.full), ("uniform", &t.uniform), ("highpass", &t.highpass)] {
                out.push_str(&format!(
                    "{},{name},{:.6e},{:.6e},{:.6e},{}\n",
                    t.seed,
                    r.rmse,
                    r.shift_error.unwrap_or(f64::NAN),
                    r.rotation_error.unwrap_or(f64::NAN),
                    r.iterations
                ));
            }
        }
        out
    }
}

fn medians(reports: Vec<&RegistrationReport>) -> [f64; 3] {
    [
        median(reports.iter().map(|r| r.rmse).collect()),
        median(reports.iter().map(|r| r.shift_error.unwrap_or(f64::NAN)).collect()),
        median(reports.iter().map(|r| r.rotation_error.unwrap_or(f64::NAN)).collect()),
    ]
}

pub fn run_registration_experiment(cfg: &RegistrationConfig) -> Result<RegistrationSummary> {
    let trials = cfg
        .seeds
        .par_iter()
        .map(|&seed| {
            let truth = cfg.truth(seed);
            let (source, target) = cfg.views(&truth)?;
            let run = |s| registration_run(cfg, s, seed, &source, &target, &truth);
            Ok(RegistrationTrial {
                seed,
                full: run(RegistrationStrategy::Full)?,
                uniform: run(RegistrationStrategy::Uniform)?,
                highpass: run(RegistrationStrategy::Highpass)?,
            })
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(RegistrationSummary {
        full: medians(trials.iter().map(|t| &t.full).collect()),
        uniform: medians(trials.iter().map(|t| &t.uniform).collect()),
        highpass: medians(trials.iter().map(|t| &t.highpass).collect()),
        trials,
    })
}
