#![allow(dead_code)]

use mcrelax::{DataTerm, GridShape, IntegralField, Metric, RngSpec, SimplexField};
use rand::Rng;
use rand_pcg::Pcg32;

pub fn rng(seed: u64) -> Pcg32 {
    RngSpec::new(seed, 0xda7a).generator()
}

pub fn shape(w: usize, h: usize, l: usize) -> GridShape {
    GridShape::new(w, h, l).unwrap()
}

/// Random interior simplex field (Dirichlet(1) per pixel via exponentials).
pub fn random_simplex(shape: GridShape, gen: &mut Pcg32) -> SimplexField {
    let l = shape.labels();
    let mut values = Vec::with_capacity(shape.vector_len());
    for _ in 0..shape.pixels() {
        let e: Vec<f64> = (0..l).map(|_| -(1.0 - gen.gen::<f64>()).ln()).collect();
        let total: f64 = e.iter().sum();
        values.extend(e.iter().map(|x| x / total));
    }
    SimplexField::from_projection(shape, values).unwrap()
}

pub fn random_costs(shape: GridShape, gen: &mut Pcg32, scale: f64) -> DataTerm {
    DataTerm::new(shape, (0..shape.vector_len()).map(|_| scale * gen.gen::<f64>()).collect())
        .unwrap()
}

pub fn random_labels(shape: GridShape, gen: &mut Pcg32) -> IntegralField {
    let l = shape.labels() as u32;
    IntegralField::new(shape, (0..shape.pixels()).map(|_| gen.gen_range(0..l)).collect()).unwrap()
}

/// Random metric: shortest-path closure of random positive weights.
pub fn random_metric(l: usize, gen: &mut Pcg32) -> Metric {
    let mut d = vec![0.0; l * l];
    for i in 0..l {
        for j in i + 1..l {
            let w = 0.5 + 2.5 * gen.gen::<f64>();
            d[i * l + j] = w;
            d[j * l + i] = w;
        }
    }
    for k in 0..l {
        for i in 0..l {
            for j in 0..l {
                let via = d[i * l + k] + d[k * l + j];
                if via < d[i * l + j] {
                    d[i * l + j] = via;
                }
            }
        }
    }
    Metric::new(l, d).unwrap()
}

pub fn unit_vector(gen: &mut Pcg32) -> [f64; 2] {
    let a = std::f64::consts::TAU * gen.gen::<f64>();
    [a.cos(), a.sin()]
}

/// `ν (e^j − e^i)ᵀ` as a row-major `2 × l` block.
pub fn jump(nu: [f64; 2], i: usize, j: usize, l: usize) -> Vec<f64> {
    let mut z = vec![0.0; 2 * l];
    for k in 0..2 {
        z[k * l + j] += nu[k];
        z[k * l + i] -= nu[k];
    }
    z
}

/// Two-class data: label 0 is cheap for `x < split`, label 1 elsewhere,
/// plus uniform noise in `[0, noise)` on every cost.
pub fn vertical_split(w: usize, h: usize, split: usize, strength: f64, noise: f64, seed: u64) -> DataTerm {
    let shape = shape(w, h, 2);
    let mut gen = rng(seed);
    let mut costs = Vec::with_capacity(shape.vector_len());
    for px in 0..shape.pixels() {
        let (x, _) = shape.coords(px);
        let (a, b) = if x < split { (0.0, strength) } else { (strength, 0.0) };
        costs.push(a + noise * gen.gen::<f64>());
        costs.push(b + noise * gen.gen::<f64>());
    }
    DataTerm::new(shape, costs).unwrap()
}
