//! Recover a usable depth for a pixel whose reading dropped out, then
//! back-project it to a camera-frame point. Also round-trips the image
//! through the PFM on-disk format with its intrinsics sidecar.
//!
//! ```bash
//! cargo run -p vineyard-nav --example reliable_depth
//! ```

use vineyard_nav::depth::{project, reliable_depth, CameraIntrinsics, DepthImage};
use vineyard_nav::pfm;

fn main() -> Result<(), Box<dyn std::error::Error>> {
    // A 64x48 depth image of a wall 2 m away with a large dropout blob.
    let image = DepthImage::from_fn(64, 48, |x, y| {
        let hole = (18..30).contains(&x) && (12..24).contains(&y);
        if hole {
            f32::NAN
        } else {
            2.0
        }
    })?;
    let k = CameraIntrinsics::new(60.0, 60.0, 32.0, 24.0);

    let dir = std::env::temp_dir().join("vineyard-nav-depth-example");
    std::fs::create_dir_all(&dir)?;
    pfm::write_pfm(&image, dir.join("wall.pfm"))?;
    pfm::write_intrinsics(&k, dir.join("wall.txt"))?;
    let image = pfm::read_pfm(dir.join("wall.pfm"))?;
    let k = pfm::read_intrinsics(dir.join("wall.txt"))?;
    println!("wrote and re-read {}", dir.join("wall.pfm").display());

    // Query deep inside the dropout: the window expands until it finds
    // valid neighbours, then means them.
    let (qx, qy) = (24usize, 18usize);
    println!(
        "pixel ({qx}, {qy}) raw value: {:?}",
        image.get(qx, qy).filter(|v| !v.is_nan())
    );
    let point = reliable_depth(qx, qy, &image, &k)?;
    println!(
        "reliable depth -> camera frame ({:+.3}, {:+.3}, {:.3}) m",
        point.x, point.y, point.z
    );

    let (px, py) = project(&point, &k)?;
    println!("projected back to pixel ({px:.2}, {py:.2})");
    Ok(())
}
