//! The tab-separated observation line: parsing, canonicalization and
//! formatting.
//!
//! `cargo run --example table_format`

use real::imagecore::Rect;
use real::pipeline::{format_observation, parse_observation, FaceObservation, Identity};

const ROWS: [&str; 3] = [
    "Rect(290,467-389,718)\t0\t-4.8975\t-3.3457\t0.0\t1.0\t1.0",
    // Swapped x corners are stored in canonical order.
    "Rect(321,478-311,553)\t0\t-3.6663\t-2.7923\t0.0\t1.0\t0.0",
    "Rect(288,314-420,599)\t0\t-4.1278\t-4.8762\t1.0\t1.0\t1.0",
];

fn main() -> Result<(), Box<dyn std::error::Error>> {
    for row in ROWS {
        let obs = parse_observation(row)?;
        let again = format_observation(&obs);
        println!("{row:?}\n  -> {} {}x{}, yaw {}, roll {}\n  -> {again:?}", obs.rect, obs.rect.width(), obs.rect.height(), obs.euler_y, obs.euler_z);
    }

    let mine = FaceObservation {
        rect: Rect::new(10, 20, 110, 120),
        tracking_id: None,
        euler_y: 1.23456,
        euler_z: -0.5,
        smile_p: 0.731,
        left_eye_open_p: 1.0,
        right_eye_open_p: 0.0,
        identity: Identity::Unidentified,
    };
    println!("untracked: {:?}", format_observation(&mine));

    match parse_observation("Rect(1,2-3)\t0\t0\t0\t0\t0\t0") {
        Ok(_) => unreachable!(),
        Err(e) => println!("malformed line rejected: {e}"),
    }
    Ok(())
}
