//! Sphere-plate Casimir forces from Lifshitz theory for layered, rough
//! surfaces, plus the torsional-balance calibration pipeline and a
//! synthetic data generator for it.
//!
//! Everything numerical is generic over [`scalar::Real`] (`f32` or `f64`);
//! the aliases below fix the common `f64` instantiations.

// `!(x > 0)` is used on purpose so that NaN fails validation.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod calibration;
pub mod constants;
pub mod dielectric;
pub mod error;
pub mod force_law;
pub mod io;
pub mod lifshitz;
pub mod mtb_sim;
pub mod quadrature;
pub mod roughness;
pub mod scalar;
pub mod stack;

pub use error::{Error, Result};
pub use scalar::Real;

pub type DielectricModel64 = dielectric::DielectricModel<f64>;
pub type OpticalTable64 = dielectric::OpticalTable<f64>;
pub type LayerStack64 = stack::LayerStack<f64>;
pub type Geometry64 = lifshitz::Geometry<f64>;
pub type QuadratureConfig64 = lifshitz::QuadratureConfig<f64>;
pub type ForceResult64 = lifshitz::ForceResult<f64>;
pub type RoughnessProfile64 = roughness::RoughnessProfile<f64>;
pub type HeightMap64 = roughness::HeightMap<f64>;
pub type SweepRecord64 = calibration::SweepRecord<f64>;
pub type CalibrationResult64 = calibration::CalibrationResult<f64>;
pub type MtbParams64 = mtb_sim::MtbParams<f64>;
pub type SweepPlan64 = mtb_sim::SweepPlan<f64>;

pub type DielectricModel32 = dielectric::DielectricModel<f32>;
pub type LayerStack32 = stack::LayerStack<f32>;
pub type QuadratureConfig32 = lifshitz::QuadratureConfig<f32>;
