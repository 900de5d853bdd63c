//! App bundle format, deterministic simulator and screenshot renderer.
//!
//! The simulator is the stand-in for a device plus its UI automation layer:
//! it can launch the app, observe the current screen, apply taps and render
//! screenshots.

mod bundle;
mod fingerprint;
mod parse;
mod render;
mod sim;

pub use bundle::*;
pub use fingerprint::{fingerprint, fnv1a_32, Fingerprint};
pub use parse::{load_bundle, validate, BundleError};
pub use render::{
    fill_color, render_screenshot, render_screenshot_with, PpmImage, RenderError, Rgb, BACKGROUND,
    BORDER, HIGHLIGHT, HIGHLIGHT_WIDTH,
};
pub use sim::{
    apply_action, launch, observe, Override, ScreenObservation, SimError, SimState, StepOutcome,
    Termination, Widget,
};
