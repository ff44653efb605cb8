//! Application pipelines: sphere modeling of noisy clouds and
//! resampling-accelerated registration.

mod denoise;
mod experiments;
mod icp;
mod scene;
mod sphere;

pub use denoise::denoise_lowpass;
pub use experiments::{
    register_clouds, registration_trial, run_registration_experiment, run_sphere_experiment, sphere_trial,
    RegistrationConfig, RegistrationStrategy, RegistrationSummary, RegistrationTrial, SphereConfig, SphereSummary,
    SphereTrial,
};
pub use icp::{cloud_rmse, icp_register, kabsch, registration_metrics, IcpOptions, RegistrationReport};
pub use scene::{DeskScene, LatticeBox};
pub use sphere::{fit_sphere, SphereFit};
