//! A self-contained platform for studying perceptual-bug detection in 3D
//! game-like environments.
//!
//! The crate provides:
//!
//! - a small scene model (a room with textured props) and a deterministic
//!   software rasterizer that renders two images per step: the first-person
//!   observation and a pixel-level *bug mask* that labels where a bug is
//!   visible on screen ([`scene`], [`render`]);
//! - ten injectable perceptual bugs behind a global controller ([`bugs`]);
//! - an explorative navigation agent with grid pathfinding ([`agent`]);
//! - an episode recorder and dataset builder with normal / bugged / per-bug
//!   test partitions ([`dataset`]);
//! - a from-scratch convolutional autoencoder (convolutions, transposed
//!   convolutions, reverse-mode gradients, Adam) trained with an SSIM + MSE
//!   objective, scoring frames by squared reconstruction error ([`nn`],
//!   [`metrics`]);
//! - precision-oriented evaluation and ranked bug reports ([`eval`]).
//!
//! Numeric code is generic over the scalar type through the [`num::Real`]
//! trait; the shipped pipeline runs in `f32` (see the [`Scalar`] alias) while
//! tests run the same code in `f64` where extra precision helps (e.g.
//! finite-difference gradient checks).

pub mod agent;
pub mod bugs;
pub mod config;
pub mod dataset;
pub mod eval;
pub mod geom;
pub mod metrics;
pub mod nn;
pub mod num;
pub mod ppm;
pub mod render;
pub mod scene;

/// Scalar type used by the shipped pipeline.
pub type Scalar = f32;

/// 2D vector over the pipeline scalar.
pub type Vec2f = geom::Vec2<Scalar>;
/// 3D vector over the pipeline scalar.
pub type Vec3f = geom::Vec3<Scalar>;

/// Tensor specializations for the two supported scalar types.
pub type Tensor32 = nn::Tensor<f32>;
pub type Tensor64 = nn::Tensor<f64>;

/// Observation width/height the dataset contract is built around.
pub const FRAME_DIM: usize = 84;
/// Values per frame at the contract resolution (3 x 84 x 84).
pub const FRAME_LEN: usize = 3 * FRAME_DIM * FRAME_DIM;
