//! Pinning tests for shipped artifacts: the profile config files must
//! match the built-in profiles, and the golden PFM fixture must parse to
//! known values and re-serialize byte-identically.

use std::path::{Path, PathBuf};
use vineyard_nav::depth::reliable_depth;
use vineyard_nav::pfm::{read_intrinsics, read_pfm, write_pfm_to};
use vineyard_nav::simulator::SimConfig;

fn crate_path(rel: &str) -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join(rel)
}

#[test]
fn shipped_profiles_match_builtins() {
    let aliengo = SimConfig::load(crate_path("profiles/aliengo.toml")).unwrap();
    assert_eq!(aliengo, SimConfig::aliengo());
    let hyqreal = SimConfig::load(crate_path("profiles/hyqreal.toml")).unwrap();
    assert_eq!(hyqreal, SimConfig::hyqreal());
}

#[test]
fn golden_pfm_parses_to_known_values() {
    let image = read_pfm(crate_path("tests/data/golden_4x3.pfm")).unwrap();
    assert_eq!((image.width(), image.height()), (4, 3));
    for y in 0..3 {
        for x in 0..4 {
            let got = image.get(x, y).unwrap();
            if (x, y) == (2, 1) {
                assert!(got.is_nan(), "({x},{y}) should be the NaN hole");
            } else {
                assert_eq!(got, 1.0 + x as f32 + 10.0 * y as f32, "({x},{y})");
            }
        }
    }

    // Re-serializing reproduces the on-disk bytes exactly.
    let mut bytes = Vec::new();
    write_pfm_to(&image, &mut bytes).unwrap();
    let disk = std::fs::read(crate_path("tests/data/golden_4x3.pfm")).unwrap();
    assert_eq!(bytes, disk);
}

#[test]
fn golden_intrinsics_back_project_the_hole() {
    let image = read_pfm(crate_path("tests/data/golden_4x3.pfm")).unwrap();
    let k = read_intrinsics(crate_path("tests/data/golden_intrinsics.txt")).unwrap();
    assert_eq!((k.fx, k.fy, k.cx, k.cy), (525.0, 525.5, 319.5, 239.5));

    // The NaN pixel resolves from its neighbours: mean of the 11 valid
    // values in the (clipped) 5x5 window, which covers the whole image.
    let point = reliable_depth(2, 1, &image, &k).unwrap();
    let expected_z = (1.0 + 2.0 + 3.0 + 4.0 + 11.0 + 12.0 + 14.0 + 21.0 + 22.0 + 23.0 + 24.0) / 11.0;
    assert_eq!(point.z, expected_z);
}
