//! Balloon snakes with burning-fire topology adaptation, geodesic active
//! contours on a narrow-band level set, and a template-plane edge potential
//! shared by both.

#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod burn;
pub mod error;
pub mod force;
pub mod geometry;
pub mod grid;
pub mod image;
pub mod io;
pub mod levelset;
pub mod marching;
pub mod overlay;
pub mod phantom;
pub mod snake;
pub mod trace;

pub use burn::{segment_multi, BurnGrid, MultiSegConfig, MultiSegResult};
pub use error::{Error, Result};
pub use force::{
    compute_force, compute_potential, ForceFieldParams, PotentialField, TransferKind, VectorField,
};
pub use geometry::Point;
pub use grid::{Grid, Mask};
pub use image::{EdgeMap, GrayImage};
pub use levelset::{segment_gac, GacConfig, GacParams, GacResult, LevelSetGrid, SeedRegion};
pub use snake::{Orientation, SnakeContour, SnakeParams};
