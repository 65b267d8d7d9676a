//! Imaging of the emitted field and the Michelson coherence measurement.

mod contrast;
mod image;
mod michelson;
mod psf;
mod scan;

pub use contrast::{fringe_contrast, FringeContrast, MIN_FRINGE_PHASES};
pub use image::{form_image, ImageField, ImageGrid, OUTSIDE_WARNING_FRACTION};
pub use michelson::{
    assemble_interferogram, default_phases, michelson_interferogram, shot_moments,
    shot_moments_many, EmitterSnapshot, Interferogram, MichelsonSettings, ShotMoments, ShotSource,
};
pub use psf::{coherent_psf, CoherentPsf, DetectionGeometry, PsfModel, J1_FIRST_ZERO};
pub use scan::{
    contrast_scan, gate_weights, CloudShots, ContrastCurve, EmissionModel, Scan, ScanConfig,
};
