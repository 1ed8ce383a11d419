//! File formats, configuration and the experiment runner behind the CLI.

pub mod config;
pub mod grid;
pub mod io;
pub mod render;

pub use config::{load_experiment, load_scene, parse_experiment, parse_scene, DataSource, ExperimentConfig};
pub use grid::{complete, run_cell, run_grid, summarize, CellOutcome, CellSettings, CellSpec, GridReport, Method};
pub use io::{load_mask, load_matrix, save_mask, save_matrix};
pub use render::{encode_pgm, render_figure, write_pgm};
