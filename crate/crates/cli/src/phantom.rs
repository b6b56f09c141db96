//! Synthetic problem generators.

use std::str::FromStr;

use mcrelax::{DataTerm, Error, GridShape, Result, RngSpec};
use rand::Rng;

use crate::formats::Raster;

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Phantom {
    /// Label 0 is free on the left half, label 1 on the right half.
    TwoClassSplit,
    /// Three 120° sectors around the image centre.
    TripleJunction,
    /// Vertical stripes cycling through the labels every `period` columns.
    Stripes,
    /// Distances of image colors to prototype colors.
    NoisyPrototypes,
}

impl FromStr for Phantom {
    type Err = String;

    fn from_str(s: &str) -> std::result::Result<Self, String> {
        match s {
            "two-class-split" => Ok(Self::TwoClassSplit),
            "triple-junction" => Ok(Self::TripleJunction),
            "stripes" => Ok(Self::Stripes),
            "noisy-prototypes" => Ok(Self::NoisyPrototypes),
            _ => Err(format!(
                "unknown phantom {s:?} (expected two-class-split, triple-junction, stripes or noisy-prototypes)"
            )),
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct SynthParams {
    pub width: usize,
    pub height: usize,
    /// Label count for `stripes` (default 2); fixed for the other phantoms.
    pub labels: Option<usize>,
    /// Cost of a wrong label in the geometric phantoms.
    pub strength: f64,
    /// Amplitude of uniform noise added to every cost (geometric phantoms)
    /// or to every normalized color sample (`noisy-prototypes`).
    pub noise: f64,
    pub period: usize,
    pub rng: RngSpec,
    pub image: Option<Raster>,
    /// Prototype colors in the image's sample units.
    pub prototypes: Vec<[f64; 3]>,
}

impl Default for SynthParams {
    fn default() -> Self {
        Self {
            width: 16,
            height: 16,
            labels: None,
            strength: 4.0,
            noise: 0.0,
            period: 2,
            rng: RngSpec::new(0, 0),
            image: None,
            prototypes: Vec::new(),
        }
    }
}

fn fixed_labels(name: &str, requested: Option<usize>, fixed: usize) -> Result<usize> {
    match requested {
        Some(l) if l != fixed => Err(Error::Config(format!("{name} has {fixed} labels, got {l}"))),
        _ => Ok(fixed),
    }
}

/// Builds the data term. Costs are rounded to f32 so the result equals what
/// a problem file stores.
pub fn synth(phantom: Phantom, p: &SynthParams) -> Result<DataTerm> {
    if !(p.strength.is_finite() && p.strength >= 0.0) {
        return Err(Error::Config(format!("strength must be finite and >= 0, got {}", p.strength)));
    }
    if !(p.noise.is_finite() && p.noise >= 0.0) {
        return Err(Error::Config(format!("noise must be finite and >= 0, got {}", p.noise)));
    }
    let mut gen = p.rng.generator();
    match phantom {
        Phantom::NoisyPrototypes => prototypes(p),
        Phantom::TwoClassSplit => {
            let shape = GridShape::new(p.width, p.height, fixed_labels("two-class-split", p.labels, 2)?)?;
            geometric(shape, p, &mut gen, |x, _| usize::from(x >= p.width / 2))
        }
        Phantom::TripleJunction => {
            let shape = GridShape::new(p.width, p.height, fixed_labels("triple-junction", p.labels, 3)?)?;
            let (cx, cy) = (p.width as f64 / 2.0, p.height as f64 / 2.0);
            geometric(shape, p, &mut gen, |x, y| {
                let angle = (y as f64 + 0.5 - cy).atan2(x as f64 + 0.5 - cx) + std::f64::consts::PI;
                ((3.0 * angle / std::f64::consts::TAU) as usize).min(2)
            })
        }
        Phantom::Stripes => {
            let l = p.labels.unwrap_or(2);
            if p.period == 0 {
                return Err(Error::Config("stripe period must be >= 1".into()));
            }
            let shape = GridShape::new(p.width, p.height, l)?;
            geometric(shape, p, &mut gen, |x, _| l * (x % p.period) / p.period)
        }
    }
}

fn geometric(
    shape: GridShape,
    p: &SynthParams,
    gen: &mut impl Rng,
    truth: impl Fn(usize, usize) -> usize,
) -> Result<DataTerm> {
    let l = shape.labels();
    let mut costs = Vec::with_capacity(shape.vector_len());
    for px in 0..shape.pixels() {
        let (x, y) = shape.coords(px);
        let label = truth(x, y);
        for i in 0..l {
            let base = if i == label { 0.0 } else { p.strength };
            let noise = if p.noise > 0.0 { p.noise * gen.gen::<f64>() } else { 0.0 };
            costs.push((base + noise) as f32 as f64);
        }
    }
    DataTerm::new(shape, costs)
}

fn prototypes(p: &SynthParams) -> Result<DataTerm> {
    let img = p
        .image
        .as_ref()
        .ok_or_else(|| Error::Config("noisy-prototypes needs an input image".into()))?;
    if p.prototypes.len() < 2 {
        return Err(Error::Config(format!("need at least 2 prototypes, got {}", p.prototypes.len())));
    }
    let l = fixed_labels("noisy-prototypes", p.labels, p.prototypes.len())?;
    if img.channels != 3 {
        return Err(Error::Config("prototype distances need an RGB image".into()));
    }
    let scale = img.maxval as f64;
    let shape = GridShape::new(img.width, img.height, l)?;
    let mut gen = p.rng.generator();
    let mut costs = Vec::with_capacity(shape.vector_len());
    for px in 0..shape.pixels() {
        let mut color = [0.0; 3];
        for (c, &s) in color.iter_mut().zip(img.pixel(px)) {
            *c = s as f64 / scale;
            if p.noise > 0.0 {
                *c += p.noise * (2.0 * gen.gen::<f64>() - 1.0);
            }
        }
        for mu in &p.prototypes {
            let d2: f64 = color.iter().zip(mu).map(|(c, m)| (c - m / scale).powi(2)).sum();
            costs.push(d2.sqrt() as f32 as f64);
        }
    }
    DataTerm::new(shape, costs)
}
