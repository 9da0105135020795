#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod camera;
pub mod dataset;
pub mod error;
pub mod evo;
pub mod experiment;
pub mod fitness;
pub mod forest;
pub mod mesh;
pub mod scalar;
pub mod visibility;

pub use error::{NbvError, Result};
pub use scalar::Real;

/// Double-precision instantiations used by the experiment and CLI layers.
pub type Mesh = mesh::TriangleMesh<f64>;
pub type Index = mesh::AccelIndex<f64>;
pub type Camera = camera::CameraView<f64>;
pub type Model = visibility::SurfaceModel<f64>;
pub type Context<'m> = fitness::FitnessContext<'m, f64>;

/// Single-precision instantiations for memory-bound workloads.
pub type Mesh32 = mesh::TriangleMesh<f32>;
pub type Camera32 = camera::CameraView<f32>;
pub type Model32 = visibility::SurfaceModel<f32>;
