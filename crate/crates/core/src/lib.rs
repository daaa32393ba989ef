//! First stability eigenvalue of constant mean curvature surfaces in
//! homogeneous 3-manifolds.

pub mod ambient;
pub mod bounds;
pub mod cli;
pub mod config;
pub mod families;
pub mod jet;
pub mod mesh;
pub mod spectrum;
pub mod surface;
