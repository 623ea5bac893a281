//! Project configuration and the command implementations behind the CLI.

pub mod commands;
pub mod config;
pub mod demo;

pub use commands::{
    cmd_animate, cmd_edit_propagate, cmd_hlm, cmd_poisson_blend, cmd_render_guidance, AnimateReport, EditRequest,
    HlmReport, Layout,
};
pub use config::{CameraConfig, InputPaths, ModelConfig, Overrides, ProjectConfig, RunInfo};
pub use demo::{demo_project, write_demo_project, DemoOptions, DemoProject};
