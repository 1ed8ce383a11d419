#![allow(dead_code)]

use std::path::{Path, PathBuf};

use isar_core::harness::{encode_pgm, load_scene};
use isar_core::radar::{fftshift, rd_image, simulate_echo, to_db_image};

pub fn golden(name: &str) -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("tests/golden").join(name)
}

/// Renders the golden two-point scene the same way `isar image` does.
pub fn render_two_points(center: bool) -> Vec<u8> {
    let scene = load_scene(golden("two_points.ini")).unwrap();
    let db = to_db_image(&rd_image(&simulate_echo(&scene).unwrap()).unwrap(), 20.0).unwrap();
    encode_pgm(&if center { fftshift(&db) } else { db }, 20.0).unwrap()
}

/// Two golden rasters reproduced byte-for-byte.
pub fn rasters_match_golden() -> bool {
    let plain = std::fs::read(golden("two_points.pgm")).unwrap();
    let centered = std::fs::read(golden("two_points_centered.pgm")).unwrap();
    render_two_points(false) == plain && render_two_points(true) == centered
}

/// Small grid over a 16×16 scene covering every method; DIP runs a tiny
/// network for a few iterations.
pub fn small_grid_ini(scene: &Path, out: &Path) -> String {
    format!(
        "[experiment]
scene = {}
methods = zero-fill, nnm, ialm, dip
scenarios = pixel, column
ratios = 0.3
seeds = 0, 1
noise_snr_db = 20
output_dir = {}
artifacts = false

[dip]
depth = 4
channels = 4, 4, 4, 4
skip_channels = 2
max_iters = 20
noise_channels = 4
",
        scene.display(),
        out.display()
    )
}

pub const SMALL_SCENE: &str = "[radar]
n_angle = 16
n_freq = 16

[random]
count = 3
extent = 2
seed = 5
";
