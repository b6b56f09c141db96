//! Forward-difference gradient and its negative adjoint.
//!
//! Differences are scaled by `1/h` and vanish across the far edge of the
//! grid (Neumann boundary). `divergence` is built so that
//! `<gradient(u), p> = −<u, divergence(p)>` holds for every `u` and `p`.

use rayon::prelude::*;

use crate::grid::{DualField, GradientField, GridShape, MatrixField, SimplexField, DIM};

/// Discrete gradient of a per-pixel label-vector field.
pub fn gradient(u: &SimplexField) -> GradientField {
    let shape = u.shape();
    MatrixField::new(shape, gradient_values(shape, u.values()))
        .expect("gradient of a finite field is finite")
}

pub(crate) fn gradient_values(shape: GridShape, u: &[f64]) -> Vec<f64> {
    let (w, ht, l) = (shape.width(), shape.height(), shape.labels());
    let inv_h = 1.0 / shape.spacing();
    let mut out = vec![0.0; shape.vector_len() * DIM];
    out.par_chunks_mut(DIM * l).enumerate().for_each(|(px, block)| {
        let (x, y) = shape.coords(px);
        let here = &u[px * l..(px + 1) * l];
        if x + 1 < w {
            let right = &u[(px + 1) * l..(px + 2) * l];
            for i in 0..l {
                block[i] = (right[i] - here[i]) * inv_h;
            }
        }
        if y + 1 < ht {
            let below = &u[(px + w) * l..(px + w + 1) * l];
            for i in 0..l {
                block[l + i] = (below[i] - here[i]) * inv_h;
            }
        }
    });
    out
}

/// Negative adjoint of [`gradient`]; returns a per-pixel label-vector field
/// in the same layout as [`SimplexField::values`].
pub fn divergence(p: &DualField) -> Vec<f64> {
    divergence_values(p.shape(), p.values())
}

pub(crate) fn divergence_values(shape: GridShape, p: &[f64]) -> Vec<f64> {
    let (w, ht, l) = (shape.width(), shape.height(), shape.labels());
    let inv_h = 1.0 / shape.spacing();
    let n = DIM * l;
    let mut out = vec![0.0; shape.vector_len()];
    out.par_chunks_mut(l).enumerate().for_each(|(px, div)| {
        let (x, y) = shape.coords(px);
        let here = &p[px * n..(px + 1) * n];
        for i in 0..l {
            let mut acc = 0.0;
            if x + 1 < w {
                acc += here[i];
            }
            if x > 0 {
                acc -= p[(px - 1) * n + i];
            }
            if y + 1 < ht {
                acc += here[l + i];
            }
            if y > 0 {
                acc -= p[(px - w) * n + l + i];
            }
            div[i] = acc * inv_h;
        }
    });
    out
}
