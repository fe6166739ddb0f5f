//! Report types and rendering shared by the `gadop` binary and its tests.

pub mod report;
pub mod svg;

pub use report::{Layout, SolveReport};
pub use svg::render_svg;
