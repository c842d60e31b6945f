//! SDE models, Euler schemes on certified skeletons, the tolerance-driven
//! simulation driver and the unbiased estimator built on it.

mod driver;
mod estimator;
mod euler;
mod model;

pub use driver::{localized_solve, simulate_eps_strong, Certificate, EpsStrongPath, Session};
pub use estimator::{estimate_once, unbiased_indicator, EstimatorSettings, Functional, Indicator};
pub use euler::{area_euler_path, euler_path, sup_distance};
pub use model::{
    saturate, saturate_slope, spot_check_bound, ClippedLinear, LinearModel, SdeModel, TrigModel,
    TruncationFamily, SATURATION_D2, SATURATION_D3, SATURATION_LEVEL,
};
