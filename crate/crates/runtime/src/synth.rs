//! Synthetic stand-ins with the shapes of the Ionosphere and Phishing tables.
//!
//! Both generators are deterministic in their seed and write plain CSV with an
//! `id` column first and the class label last.

use std::fmt::Write as _;
use std::path::Path;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::{IoContext, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Shape {
    /// 351 rows, 34 continuous attributes, classes `g` / `b`.
    Ionosphere,
    /// 1353 rows, 10 ternary attributes, classes `-1` / `0` / `1`.
    Phishing,
}

impl std::str::FromStr for Shape {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, String> {
        match s {
            "ionosphere" => Ok(Shape::Ionosphere),
            "phishing" => Ok(Shape::Phishing),
            other => Err(format!("unknown dataset shape `{other}`")),
        }
    }
}

impl Shape {
    pub fn rows(self) -> usize {
        match self {
            Shape::Ionosphere => 351,
            Shape::Phishing => 1353,
        }
    }

    pub fn attributes(self) -> usize {
        match self {
            Shape::Ionosphere => 34,
            Shape::Phishing => 10,
        }
    }

    /// Train/test sizes of the published split.
    pub fn split(self) -> (usize, usize) {
        match self {
            Shape::Ionosphere => (288, 63),
            Shape::Phishing => (1120, 233),
        }
    }
}

pub fn generate(shape: Shape, seed: u64) -> String {
    match shape {
        Shape::Ionosphere => ionosphere(seed),
        Shape::Phishing => phishing(seed),
    }
}

pub fn write(shape: Shape, seed: u64, path: &Path) -> Result<()> {
    std::fs::write(path, generate(shape, seed)).at(path)
}

fn header(out: &mut String, attrs: usize) {
    out.push_str("id");
    for j in 1..=attrs {
        let _ = write!(out, ",a{j:02}");
    }
    out.push_str(",class\n");
}

fn ionosphere(seed: u64) -> String {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let attrs = Shape::Ionosphere.attributes();
    // per-attribute class separation, mostly weak with a few informative ones
    let shift: Vec<f64> = (0..attrs).map(|j| if j % 5 == 0 { 0.2 } else { rng.gen_range(-0.1..0.1) }).collect();
    let mut out = String::new();
    header(&mut out, attrs);
    for r in 0..Shape::Ionosphere.rows() {
        let good = rng.gen_bool(225.0 / 351.0);
        let sign = if good { 1.0 } else { -1.0 };
        let _ = write!(out, "ion-{r:04}");
        for (j, s) in shift.iter().enumerate() {
            let v: f64 = match j {
                0 => f64::from(u8::from(good || rng.gen_bool(0.7))),
                1 => 0.0,
                _ => (sign * s + rng.gen_range(-0.8..0.8)).clamp(-1.0, 1.0),
            };
            let _ = write!(out, ",{v:.5}");
        }
        out.push_str(if good { ",g\n" } else { ",b\n" });
    }
    out
}

fn phishing(seed: u64) -> String {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let attrs = Shape::Phishing.attributes();
    let mut out = String::new();
    header(&mut out, attrs);
    for r in 0..Shape::Phishing.rows() {
        let u: f64 = rng.gen();
        let class: i32 = if u < 702.0 / 1353.0 {
            -1
        } else if u < 805.0 / 1353.0 {
            0
        } else {
            1
        };
        let _ = write!(out, "web-{r:05}");
        for j in 0..attrs {
            // each attribute agrees with the class with an attribute-specific probability
            let agree = 0.45 + 0.04 * j as f64;
            let v = if rng.gen_bool(agree) { class } else { rng.gen_range(-1..=1) };
            let _ = write!(out, ",{v}");
        }
        let _ = writeln!(out, ",{class}");
    }
    out
}
