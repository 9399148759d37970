//! Concentration diagnostics, rescaling and bubble extraction.

mod energy;
mod glue;
mod rescale;
mod scan;

pub use energy::{local_energy, quarter_density, LocalEnergy};
pub use glue::{glue_continue, restart_bound};
pub use rescale::{
    bubble_residual, build_phi_r, field_at, line_gagliardo, rescale_extract, BubbleExtract, PhiR,
};
pub use scan::{
    concentration_scan, h1_bound_report, prop1_check, struwe_l4_report, ConcentrationReport,
    FlaggedPoint, Peak, Prop1Sample,
};
