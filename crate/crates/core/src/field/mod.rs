//! Gridded electrode potentials.
//!
//! Each electrode is stored as its potential for one applied volt on a
//! regular 3D grid. Fields are never stored separately: the sampler returns
//! the exact gradient of its own interpolant, so the sampled force is always
//! conservative.

mod grid;
mod io;
mod layout;
mod null;
mod superpose;

pub use grid::{FieldGrid, GridSpec, SampledField, Stencil};
pub use io::{read_grid, read_layout, write_grid, write_layout, GRID_FORMAT_TAG, LAYOUT_FORMAT_TAG};
pub use layout::{
    generate_rect_electrode_grid, half_space_rect_potential, presets, Electrode, ElectrodeLayout,
    GenerationReport, Layer, Rect, Role, DEFAULT_IMAGE_ORDER,
};
pub use null::{classify_electrode, find_rf_null, rf_sum, NullReport};
pub use superpose::{superpose, ElectrodeDrive, SuperposedField};

/// Samples one electrode of `grid` at `point` with the default stencil.
pub fn catmull_rom_sample(
    grid: &FieldGrid,
    electrode: usize,
    point: &crate::Vec3,
) -> crate::Result<SampledField> {
    grid.sample(electrode, point)
}
