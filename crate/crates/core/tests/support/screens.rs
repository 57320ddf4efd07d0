//! Small synthetic screens with text, a block-patterned screenshot and five
//! summaries.

#![allow(dead_code)]

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use uisum_core::corpus::Screen;
use uisum_core::image::RgbImage;
use uisum_core::tree::{NodeSpec, Rect, UiTree};

pub const WIDTH: u32 = 48;
pub const HEIGHT: u32 = 80;

const TOPICS: [&[&str]; 5] = [
    &["sign", "in", "email", "password", "login"],
    &["settings", "notifications", "privacy", "account"],
    &["map", "location", "search", "nearby", "directions"],
    &["music", "play", "song", "album", "artist"],
    &["photo", "gallery", "camera", "share", "album"],
];

const SUMMARIES: [&str; 5] = [
    "login page of an app",
    "settings screen with options",
    "map showing a location",
    "music player screen",
    "photo gallery page",
];

/// Screen `i` of a family of synthetic screens; `seed` varies texts and pixels.
pub fn screen(i: usize, seed: u64) -> Screen {
    let mut rng = ChaCha8Rng::seed_from_u64(seed.wrapping_mul(1000).wrapping_add(i as u64));
    let topic = i % TOPICS.len();
    let words = TOPICS[topic];
    let mut children = Vec::new();
    let rows = rng.random_range(2..6);
    for r in 0..rows {
        let top = 8 + 12 * r as i32;
        let text: Vec<&str> = (0..rng.random_range(1..4))
            .map(|_| words[rng.random_range(0..words.len())])
            .collect();
        let class = if r % 2 == 0 { "TextView" } else { "Button" };
        children.push(
            NodeSpec::new(class, Rect::new(2, top, WIDTH as i32 - 2, top + 10))
                .with_text(text.join(" "))
                .clickable(class == "Button"),
        );
    }
    let root = NodeSpec::new("FrameLayout", Rect::new(0, 0, WIDTH as i32, HEIGHT as i32))
        .with_children(children);
    let mut img = RgbImage::filled(WIDTH, HEIGHT, [250, 250, 250]);
    let shade = [40 * topic as u8 + 20, 255 - 30 * topic as u8, rng.random_range(0..255)];
    let band = rng.random_range(0..HEIGHT / 2);
    for y in band..band + HEIGHT / 3 {
        for x in 0..WIDTH {
            img.put(x, y, shade);
        }
    }
    let summaries = (0..5)
        .map(|k| {
            if k == 0 {
                SUMMARIES[topic].to_string()
            } else {
                format!("{} {}", SUMMARIES[topic], words[k % words.len()])
            }
        })
        .collect();
    Screen {
        screen_id: format!("s{i:03}"),
        app_id: format!("app{}", i / 3),
        tree: UiTree::from_spec(&root),
        screenshot: img,
        summaries,
        sfa_boxes: vec![Rect::new(0, 0, WIDTH as i32 / 2, HEIGHT as i32 / 2)],
        app_description: Some(format!("an app for {}", words[0])),
    }
}

pub fn screens(n: usize, seed: u64) -> Vec<Screen> {
    (0..n).map(|i| screen(i, seed)).collect()
}
