//! Feature grids, the multi-resolution basis, residual composition and the
//! shading network.

mod basis;
mod grid;
mod network;
mod query;

pub use basis::{compose_basis, FrameKind, FrameRepresentation, MultiResBasis};
pub use grid::{Aabb, FeatureGrid, Stencil};
pub use network::{
    direction_encode, direction_encode_into, direction_encoding_width, sigmoid, softplus,
    NetScratch, ShadingNetwork, MAX_SH_DEGREE,
};
pub use query::{
    activate, query_field, FieldGrads, FrameField, GridField, RadianceField, SampleWorkspace,
};
