//! Semi-classical Gabor frames: windows, analysis and synthesis, frame
//! bounds, canonical duals and the rescaling between Planck constants.

pub mod bounds;
pub mod dual;
pub mod system;
pub mod windows;

pub use bounds::{frame_bounds, FrameBounds};
pub use dual::{canonical_dual, canonical_dual_report, dual_system, reconstruction_error, CgReport};
pub use system::{frame_operator, random_hull_states, rescale_system, GaborSystem, GaussianFrameSpec};
pub use windows::{gaussian_window, WindowKind};
