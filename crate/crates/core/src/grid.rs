//! Grid geometry and the field containers shared by all modules.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::reduce::pairwise_sum;

/// Spatial dimension of every grid.
pub const DIM: usize = 2;

/// Tolerance for simplex feasibility checks.
pub const FEAS_EPS: f64 = 1e-9;

/// Size of a labeling problem: a `width × height` pixel grid with `labels`
/// classes, embedded in the unit square with spacing `h = 1/max(width, height)`.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct GridShape {
    width: usize,
    height: usize,
    labels: usize,
}

impl GridShape {
    pub fn new(width: usize, height: usize, labels: usize) -> Result<Self> {
        if width == 0 || height == 0 {
            return Err(Error::Shape(format!("empty grid {width}x{height}")));
        }
        if labels < 2 {
            return Err(Error::Shape(format!("need at least 2 labels, got {labels}")));
        }
        let entries = width
            .checked_mul(height)
            .and_then(|p| p.checked_mul(labels))
            .and_then(|n| n.checked_mul(DIM));
        if entries.is_none() {
            return Err(Error::Shape(format!(
                "{width}x{height}x{labels} exceeds the addressable range"
            )));
        }
        Ok(Self { width, height, labels })
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn labels(&self) -> usize {
        self.labels
    }

    pub fn pixels(&self) -> usize {
        self.width * self.height
    }

    /// Grid spacing `h`.
    pub fn spacing(&self) -> f64 {
        1.0 / self.width.max(self.height) as f64
    }

    /// Cell area `h²`.
    pub fn cell_area(&self) -> f64 {
        let h = self.spacing();
        h * h
    }

    /// Linear pixel index of `(x, y)`.
    pub fn index(&self, x: usize, y: usize) -> usize {
        y * self.width + x
    }

    pub fn coords(&self, pixel: usize) -> (usize, usize) {
        (pixel % self.width, pixel / self.width)
    }

    /// Number of scalars in a per-pixel label-vector field.
    pub fn vector_len(&self) -> usize {
        self.pixels() * self.labels
    }

    fn ensure_same(&self, other: &GridShape, what: &str) -> Result<()> {
        if self != other {
            return Err(Error::ShapeMismatch(format!("{what}: {self:?} vs {other:?}")));
        }
        Ok(())
    }
}

fn check_len(shape: &GridShape, len: usize, expected: usize) -> Result<()> {
    if len != expected {
        return Err(Error::ShapeMismatch(format!(
            "{shape:?} expects {expected} values, got {len}"
        )));
    }
    Ok(())
}

fn check_finite(values: &[f64]) -> Result<()> {
    match values.iter().position(|v| !v.is_finite()) {
        Some(index) => Err(Error::NonFinite { index }),
        None => Ok(()),
    }
}

/// Relaxed labeling: one point of the unit simplex per pixel.
#[derive(Clone, Debug, PartialEq)]
pub struct SimplexField {
    shape: GridShape,
    values: Vec<f64>,
}

impl SimplexField {
    /// Wraps `values`, checking nonnegativity and unit sums within [`FEAS_EPS`].
    pub fn new(shape: GridShape, values: Vec<f64>) -> Result<Self> {
        check_len(&shape, values.len(), shape.vector_len())?;
        check_finite(&values)?;
        let l = shape.labels();
        for (px, chunk) in values.chunks_exact(l).enumerate() {
            if let Some(i) = chunk.iter().position(|&v| v < -FEAS_EPS) {
                return Err(Error::Infeasible(format!(
                    "pixel {px} label {i} is negative ({})",
                    chunk[i]
                )));
            }
            let sum: f64 = chunk.iter().sum();
            if (sum - 1.0).abs() > FEAS_EPS {
                return Err(Error::Infeasible(format!("pixel {px} sums to {sum}")));
            }
        }
        Ok(Self { shape, values })
    }

    /// Projects every pixel of `values` onto the simplex.
    pub fn from_projection(shape: GridShape, mut values: Vec<f64>) -> Result<Self> {
        check_len(&shape, values.len(), shape.vector_len())?;
        check_finite(&values)?;
        for chunk in values.chunks_exact_mut(shape.labels()) {
            crate::simplex::project_simplex_in_place(chunk);
        }
        Ok(Self { shape, values })
    }

    /// The barycenter `(1/l, …, 1/l)` at every pixel.
    pub fn uniform(shape: GridShape) -> Self {
        let v = 1.0 / shape.labels() as f64;
        Self { shape, values: vec![v; shape.vector_len()] }
    }

    pub fn shape(&self) -> GridShape {
        self.shape
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub(crate) fn values_mut(&mut self) -> &mut [f64] {
        &mut self.values
    }

    pub fn into_values(self) -> Vec<f64> {
        self.values
    }

    pub fn pixel(&self, pixel: usize) -> &[f64] {
        let l = self.shape.labels();
        &self.values[pixel * l..(pixel + 1) * l]
    }

    /// Largest violation of the simplex constraints over all pixels.
    pub fn max_violation(&self) -> f64 {
        self.values
            .chunks_exact(self.shape.labels())
            .map(|c| {
                let neg = c.iter().fold(0.0f64, |m, &v| m.max(-v));
                let sum: f64 = c.iter().sum();
                neg.max((sum - 1.0).abs())
            })
            .fold(0.0, f64::max)
    }
}

/// Integral labeling: one zero-based label index per pixel.
#[derive(Clone, Debug, PartialEq, Eq, Hash)]
pub struct IntegralField {
    shape: GridShape,
    labels: Vec<u32>,
}

impl IntegralField {
    pub fn new(shape: GridShape, labels: Vec<u32>) -> Result<Self> {
        check_len(&shape, labels.len(), shape.pixels())?;
        if let Some(px) = labels.iter().position(|&i| i as usize >= shape.labels()) {
            return Err(Error::Infeasible(format!(
                "pixel {px} has label {} but only {} labels exist",
                labels[px],
                shape.labels()
            )));
        }
        Ok(Self { shape, labels })
    }

    pub fn constant(shape: GridShape, label: u32) -> Result<Self> {
        Self::new(shape, vec![label; shape.pixels()])
    }

    pub(crate) fn from_raw(shape: GridShape, labels: Vec<u32>) -> Self {
        Self { shape, labels }
    }

    pub fn shape(&self) -> GridShape {
        self.shape
    }

    pub fn labels(&self) -> &[u32] {
        &self.labels
    }

    pub fn get(&self, x: usize, y: usize) -> u32 {
        self.labels[self.shape.index(x, y)]
    }
}

/// Per-pixel, per-label nonnegative costs `s`.
#[derive(Clone, Debug, PartialEq)]
pub struct DataTerm {
    shape: GridShape,
    costs: Vec<f64>,
}

impl DataTerm {
    pub fn new(shape: GridShape, costs: Vec<f64>) -> Result<Self> {
        check_len(&shape, costs.len(), shape.vector_len())?;
        check_finite(&costs)?;
        if let Some(index) = costs.iter().position(|&c| c < 0.0) {
            return Err(Error::Infeasible(format!(
                "cost at index {index} is negative ({})",
                costs[index]
            )));
        }
        Ok(Self { shape, costs })
    }

    pub fn zeros(shape: GridShape) -> Self {
        Self { shape, costs: vec![0.0; shape.vector_len()] }
    }

    pub fn shape(&self) -> GridShape {
        self.shape
    }

    pub fn costs(&self) -> &[f64] {
        &self.costs
    }

    pub fn pixel(&self, pixel: usize) -> &[f64] {
        let l = self.shape.labels();
        &self.costs[pixel * l..(pixel + 1) * l]
    }

    /// Adds `offset ≥ 0` to every cost.
    pub fn shifted(&self, offset: f64) -> Result<Self> {
        if !(offset.is_finite() && offset >= 0.0) {
            return Err(Error::Config(format!("data offset must be finite and >= 0, got {offset}")));
        }
        Self::new(self.shape, self.costs.iter().map(|c| c + offset).collect())
    }
}

/// A `dim × l` real matrix per pixel (`dim = DIM`), row-major per pixel.
#[derive(Clone, Debug, PartialEq)]
pub struct MatrixField {
    shape: GridShape,
    values: Vec<f64>,
}

/// Discrete gradient `Du`, one `DIM × l` matrix per pixel.
pub type GradientField = MatrixField;

/// Dual variable of the saddle-point problem, one `DIM × l` matrix per pixel.
pub type DualField = MatrixField;

impl MatrixField {
    pub fn new(shape: GridShape, values: Vec<f64>) -> Result<Self> {
        check_len(&shape, values.len(), shape.vector_len() * DIM)?;
        check_finite(&values)?;
        Ok(Self { shape, values })
    }

    pub fn zeros(shape: GridShape) -> Self {
        Self { shape, values: vec![0.0; shape.vector_len() * DIM] }
    }

    pub fn shape(&self) -> GridShape {
        self.shape
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub(crate) fn values_mut(&mut self) -> &mut [f64] {
        &mut self.values
    }

    pub fn into_values(self) -> Vec<f64> {
        self.values
    }

    /// Number of scalars per pixel.
    pub fn block_len(&self) -> usize {
        DIM * self.shape.labels()
    }

    pub fn pixel(&self, pixel: usize) -> &[f64] {
        let n = self.block_len();
        &self.values[pixel * n..(pixel + 1) * n]
    }
}

/// Data energy `h² Σ_x <u(x), s(x)>`.
///
/// Per-pixel dot products run in label order, the pixel terms are combined
/// with [`pairwise_sum`] in storage order, and the result is multiplied by
/// `h²` last. For integral `u` this makes the value bit-identical to
/// `h² · pairwise_sum([s_{ū(x)}(x)])`.
pub fn datacost(u: &SimplexField, s: &DataTerm) -> Result<f64> {
    u.shape.ensure_same(&s.shape, "datacost")?;
    let l = u.shape.labels();
    let terms: Vec<f64> = u
        .values
        .chunks_exact(l)
        .zip(s.costs.chunks_exact(l))
        .map(|(a, b)| a.iter().zip(b).fold(0.0, |acc, (x, y)| acc + x * y))
        .collect();
    Ok(pairwise_sum(&terms) * u.shape.cell_area())
}

/// Embeds an integral labeling as unit vectors `e^{ū(x)}`.
pub fn embed_integral(labels: &IntegralField) -> SimplexField {
    let l = labels.shape.labels();
    let mut values = vec![0.0; labels.shape.vector_len()];
    for (px, &i) in labels.labels.iter().enumerate() {
        values[px * l + i as usize] = 1.0;
    }
    SimplexField { shape: labels.shape, values }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn shape(w: usize, h: usize, l: usize) -> GridShape {
        GridShape::new(w, h, l).unwrap()
    }

    #[test]
    fn shape_invariants() {
        assert!(GridShape::new(0, 3, 2).is_err());
        assert!(GridShape::new(3, 0, 2).is_err());
        assert!(GridShape::new(3, 3, 1).is_err());
        assert!(GridShape::new(usize::MAX, 2, 2).is_err());
        let g = shape(4, 2, 3);
        assert_eq!(g.pixels(), 8);
        assert_eq!(g.spacing(), 0.25);
        assert_eq!(g.index(1, 1), 5);
        assert_eq!(g.coords(5), (1, 1));
    }

    #[test]
    fn simplex_field_rejects_infeasible() {
        let g = shape(1, 1, 2);
        assert!(SimplexField::new(g, vec![0.5, 0.5]).is_ok());
        assert!(SimplexField::new(g, vec![1.1, -0.1]).is_err());
        assert!(SimplexField::new(g, vec![0.6, 0.6]).is_err());
        assert!(SimplexField::new(g, vec![f64::NAN, 1.0]).is_err());
        assert!(SimplexField::new(g, vec![1.0]).is_err());
    }

    #[test]
    fn data_term_rejects_negative_and_nonfinite() {
        let g = shape(1, 1, 2);
        assert!(DataTerm::new(g, vec![0.0, -1.0]).is_err());
        assert!(DataTerm::new(g, vec![0.0, f64::INFINITY]).is_err());
    }

    #[test]
    fn datacost_examples() {
        let g = shape(1, 1, 2);
        let s = DataTerm::new(g, vec![3.0, 5.0]).unwrap();
        let u = SimplexField::new(g, vec![1.0, 0.0]).unwrap();
        assert_eq!(datacost(&u, &s).unwrap(), 3.0);

        let s = DataTerm::new(g, vec![2.0, 4.0]).unwrap();
        let u = SimplexField::new(g, vec![0.5, 0.5]).unwrap();
        assert_eq!(datacost(&u, &s).unwrap(), 3.0);

        let g = shape(2, 1, 2);
        let s = DataTerm::new(g, vec![1.0, 9.0, 9.0, 1.0]).unwrap();
        let u = SimplexField::new(g, vec![1.0, 0.0, 0.0, 1.0]).unwrap();
        assert_eq!(datacost(&u, &s).unwrap(), 0.5);
    }

    #[test]
    fn datacost_shape_mismatch() {
        let u = SimplexField::uniform(shape(2, 1, 2));
        let s = DataTerm::zeros(shape(1, 2, 2));
        assert!(matches!(datacost(&u, &s), Err(Error::ShapeMismatch(_))));
    }

    #[test]
    fn embed_examples() {
        let g = shape(1, 1, 2);
        let e = embed_integral(&IntegralField::new(g, vec![0]).unwrap());
        assert_eq!(e.values(), &[1.0, 0.0]);
        let g = shape(1, 1, 3);
        let e = embed_integral(&IntegralField::new(g, vec![2]).unwrap());
        assert_eq!(e.values(), &[0.0, 0.0, 1.0]);
        assert!(IntegralField::new(g, vec![3]).is_err());
    }
}
