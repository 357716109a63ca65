//! Construct the default SSD300-style anchor pyramid and inspect it.
//!
//! Run with: cargo run --example build_pyramid

use microtube::pyramid::{build_pyramid, PyramidConfig};

fn main() {
    let config = PyramidConfig::default();
    let anchors = build_pyramid(&config).expect("default config is valid");

    println!("pyramid config hash: {}", anchors.config_hash());
    println!(
        "{:<6} {:>6} {:>8} {:>9} {:>8}",
        "level", "grid", "shapes", "anchors", "scale"
    );
    for (p, lvl) in anchors.levels().iter().enumerate() {
        println!(
            "{:<6} {:>3}x{:<3} {:>7} {:>9} {:>8.3}",
            p,
            lvl.grid,
            lvl.grid,
            lvl.shapes,
            lvl.len(),
            config.scales[p]
        );
    }
    println!("total anchors: {}", anchors.total());

    let center = anchors.level(4).unwrap().anchor(4, 0);
    println!(
        "\nlevel 4, center cell, square shape: [{:.3}, {:.3}, {:.3}, {:.3}]",
        center.x_min, center.y_min, center.x_max, center.y_max
    );
    let cell = anchors.cell_of(4, 0.5, 0.5).unwrap();
    println!("cell_of(level 4, 0.5, 0.5) = {cell}");
}
