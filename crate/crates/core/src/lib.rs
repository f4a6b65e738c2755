pub mod adapted;
pub mod commutator;
pub mod beta;
pub mod directional;
pub mod error;
pub mod family;
pub mod frequency;
pub mod grid;
pub mod kakeya;
pub mod knapp;
pub mod numerics;
pub mod profile;
pub mod reduction;
pub mod splitting;
pub mod tiles;

pub use error::{Error, Result};
pub use grid::{SampledField, Spectrum, TorusGrid, C64};
