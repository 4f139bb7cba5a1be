//! Summed-area tables and Haar feature responses.
//!
//! `cargo run --example integral_image`

use real::detector::{enumerate_features, eval_feature, FeatureKind, HaarFeature, BASE_WINDOW};
use real::imagecore::{integral, GrayImage, Rect};

fn main() {
    // Dark band across the upper half, like an eye region over cheeks.
    let img = GrayImage::from_fn(24, 24, |_, y| if (6..12).contains(&y) { 40 } else { 200 }).unwrap();
    let ii = integral(&img);
    let band = Rect::from_xywh(0, 6, 24, 6);
    let below = Rect::from_xywh(0, 12, 24, 6);
    println!("sum over {band}: {}", ii.rect_sum(&band).unwrap());
    println!("sum over {below}: {}", ii.rect_sum(&below).unwrap());
    let (mean, std) = ii.window_stats(0, 0, 24, 24);
    println!("window mean {mean:.2}, std {std:.2}");

    let features = enumerate_features(BASE_WINDOW).unwrap();
    println!("{} candidate features in a {BASE_WINDOW}x{BASE_WINDOW} window", features.len());
    for kind in FeatureKind::ALL {
        println!("  {kind:?}: {}", features.iter().filter(|f| f.kind == kind).count());
    }

    let edge = HaarFeature::new(FeatureKind::TwoVertical, 0, 6, 24, 6).unwrap();
    println!("two-rect vertical feature at the band edge: {:.3}", eval_feature(&edge, &ii, 0, 0, 1.0).unwrap());
    let best = features
        .iter()
        .map(|f| (f, eval_feature(f, &ii, 0, 0, 1.0).unwrap().abs()))
        .max_by(|a, b| a.1.total_cmp(&b.1))
        .unwrap();
    println!("strongest response {:.3} from {:?}", best.1, best.0);
}
