//! The shipped test instances.
#![allow(dead_code)]

use mcrelax::{DataTerm, GridShape, RegularizerKind, RngSpec};
use mcrelax_cli::config::RegularizerSpec;
use mcrelax_cli::formats::Raster;
use mcrelax_cli::phantom::{synth, Phantom, SynthParams};
use rand::Rng;

pub struct Instance {
    pub name: &'static str,
    pub data: DataTerm,
    pub regularizer: RegularizerSpec,
}

impl Instance {
    pub fn kind(&self) -> RegularizerKind {
        self.regularizer.build().unwrap()
    }

    pub fn is_small(&self) -> bool {
        let s = self.data.shape();
        s.pixels() <= 9 && s.labels() <= 3
    }
}

fn potts() -> RegularizerSpec {
    RegularizerSpec::default()
}

fn envelope(metric: &[&[f64]]) -> RegularizerSpec {
    RegularizerSpec::MetricEnvelope { metric: metric.iter().map(|r| r.to_vec()).collect() }
}

fn aniso(metric: &[&[f64]]) -> RegularizerSpec {
    RegularizerSpec::AnisoMetricL1 { metric: metric.iter().map(|r| r.to_vec()).collect() }
}

const UNIFORM2: &[&[f64]] = &[&[0.0, 1.0], &[1.0, 0.0]];
const LINEAR3: &[&[f64]] = &[&[0.0, 1.0, 2.0], &[1.0, 0.0, 1.0], &[2.0, 1.0, 0.0]];
const SKEWED3: &[&[f64]] = &[&[0.0, 1.0, 3.0], &[1.0, 0.0, 2.0], &[3.0, 2.0, 0.0]];

fn phantom(p: Phantom, width: usize, height: usize, noise: f64, seed: u64) -> DataTerm {
    let params = SynthParams { width, height, noise, rng: RngSpec::new(seed, 0), ..Default::default() };
    synth(p, &params).unwrap()
}

fn random_costs(w: usize, h: usize, l: usize, seed: u64) -> DataTerm {
    let shape = GridShape::new(w, h, l).unwrap();
    let mut gen = RngSpec::new(seed, 99).generator();
    let costs = (0..shape.vector_len()).map(|_| (3.0 * gen.gen::<f64>()) as f32 as f64).collect();
    DataTerm::new(shape, costs).unwrap()
}

/// Four-quadrant RGB image with per-sample noise.
fn quadrant_image(size: usize, seed: u64) -> (Raster, Vec<[f64; 3]>) {
    let colors = [[220.0, 40.0, 40.0], [40.0, 200.0, 60.0], [50.0, 60.0, 210.0], [230.0, 220.0, 60.0]];
    let mut gen = RngSpec::new(seed, 1).generator();
    let mut samples = Vec::new();
    for y in 0..size {
        for x in 0..size {
            let q = usize::from(x >= size / 2) + 2 * usize::from(y >= size / 2);
            for c in colors[q] {
                let v = c + 120.0 * (gen.gen::<f64>() - 0.5);
                samples.push(v.clamp(0.0, 255.0).round() as u16);
            }
        }
    }
    (Raster { width: size, height: size, maxval: 255, channels: 3, samples }, colors.to_vec())
}

/// The pinned reference instance: 8×8 two-class split under Potts, with
/// noise strong enough that the relaxed solution is fractional in places.
pub fn reference() -> Instance {
    let params = SynthParams {
        width: 8,
        height: 8,
        strength: 1.5,
        noise: 2.0,
        rng: RngSpec::new(11, 0),
        ..Default::default()
    };
    Instance { name: "split-8-potts", data: synth(Phantom::TwoClassSplit, &params).unwrap(), regularizer: potts() }
}

pub fn all() -> Vec<Instance> {
    let (image, prototypes) = quadrant_image(12, 7);
    let proto = SynthParams {
        image: Some(image),
        prototypes,
        noise: 0.05,
        rng: RngSpec::new(7, 2),
        ..Default::default()
    };
    let stripes = SynthParams {
        width: 12,
        height: 12,
        labels: Some(3),
        period: 6,
        noise: 1.0,
        rng: RngSpec::new(5, 0),
        ..Default::default()
    };
    vec![
        reference(),
        Instance {
            name: "split-8-aniso",
            data: phantom(Phantom::TwoClassSplit, 8, 8, 0.5, 11),
            regularizer: aniso(UNIFORM2),
        },
        Instance {
            name: "junction-16-potts",
            data: phantom(Phantom::TripleJunction, 16, 16, 1.0, 3),
            regularizer: potts(),
        },
        Instance {
            name: "junction-16-envelope",
            data: phantom(Phantom::TripleJunction, 16, 16, 1.0, 3),
            regularizer: envelope(LINEAR3),
        },
        Instance {
            name: "stripes-12-aniso",
            data: synth(Phantom::Stripes, &stripes).unwrap(),
            regularizer: aniso(LINEAR3),
        },
        Instance {
            name: "prototypes-12-potts",
            data: synth(Phantom::NoisyPrototypes, &proto).unwrap(),
            regularizer: potts(),
        },
        Instance {
            name: "split-3-potts",
            data: phantom(Phantom::TwoClassSplit, 3, 3, 1.0, 21),
            regularizer: potts(),
        },
        Instance {
            name: "junction-3-envelope",
            data: phantom(Phantom::TripleJunction, 3, 3, 1.0, 22),
            regularizer: envelope(SKEWED3),
        },
        Instance { name: "random-3x3-aniso", data: random_costs(3, 3, 3, 23), regularizer: aniso(LINEAR3) },
        Instance { name: "random-3x2-potts", data: random_costs(3, 2, 3, 24), regularizer: potts() },
        Instance { name: "random-3x3-envelope", data: random_costs(3, 3, 2, 25), regularizer: envelope(UNIFORM2) },
    ]
}
