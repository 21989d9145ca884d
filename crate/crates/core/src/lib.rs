//! Ray tracing of GNSS signals from Earth orbit to lunar receivers through a
//! parameterised ionosphere/plasmasphere, with group-delay decomposition,
//! link budget and tracking-noise models.

pub mod constants;
pub mod delays;
pub mod frames;
pub mod link;
pub mod media;
pub mod raytrace;
pub mod scenario;

/// Cartesian 3-vector, km unless stated otherwise.
pub type Vec3 = nalgebra::Vector3<f64>;
