use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Allowed deviation of a grid measure's total mass from one.
pub const MASS_TOL: f64 = 1e-10;

/// A `p × p` grid of unit cells; `h = 1/p` is the physical cell width when
/// the grid covers the unit square.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct Grid {
    p: usize,
}

impl Grid {
    pub fn new(p: usize) -> Result<Self> {
        if p < 2 {
            return Err(Error::InvalidArgument(format!("grid side must be at least 2, got {p}")));
        }
        Ok(Self { p })
    }

    pub fn side(&self) -> usize {
        self.p
    }

    pub fn cells(&self) -> usize {
        self.p * self.p
    }

    pub fn h(&self) -> f64 {
        1.0 / self.p as f64
    }

    pub fn index(&self, i: usize, j: usize) -> usize {
        i * self.p + j
    }
}

/// Real values on the cells of a grid.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScalarField {
    p: usize,
    values: Vec<f64>,
}

impl ScalarField {
    /// Wraps row-major `values`; their count must be a perfect square.
    pub fn new(p: usize, values: Vec<f64>) -> Result<Self> {
        Grid::new(p)?;
        if values.len() != p * p {
            return Err(Error::InvalidArgument(format!(
                "{} values do not fill a {p}x{p} grid",
                values.len()
            )));
        }
        if values.iter().any(|v| !v.is_finite()) {
            return Err(Error::InvalidArgument("field has non-finite entries".into()));
        }
        Ok(Self { p, values })
    }

    pub fn zeros(p: usize) -> Self {
        Self::constant(p, 0.0)
    }

    pub fn constant(p: usize, c: f64) -> Self {
        Self {
            p,
            values: vec![c; p * p],
        }
    }

    pub fn from_fn(p: usize, mut f: impl FnMut(usize, usize) -> f64) -> Self {
        let mut values = Vec::with_capacity(p * p);
        for i in 0..p {
            for j in 0..p {
                values.push(f(i, j));
            }
        }
        Self { p, values }
    }

    pub fn side(&self) -> usize {
        self.p
    }

    pub fn grid(&self) -> Grid {
        Grid { p: self.p }
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.values[i * self.p + j]
    }

    pub fn set(&mut self, i: usize, j: usize, v: f64) {
        self.values[i * self.p + j] = v;
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.values
    }

    pub fn as_mut_slice(&mut self) -> &mut [f64] {
        &mut self.values
    }

    pub fn into_vec(self) -> Vec<f64> {
        self.values
    }

    pub fn sum(&self) -> f64 {
        self.values.iter().sum()
    }

    pub fn mean(&self) -> f64 {
        self.sum() / self.values.len() as f64
    }

    pub fn dot(&self, other: &Self) -> f64 {
        self.values.iter().zip(&other.values).map(|(a, b)| a * b).sum()
    }

    pub fn norm(&self) -> f64 {
        self.dot(self).sqrt()
    }

    pub fn max_abs(&self) -> f64 {
        self.values.iter().fold(0.0, |m, v| m.max(v.abs()))
    }

    pub fn min(&self) -> f64 {
        self.values.iter().copied().fold(f64::INFINITY, f64::min)
    }

    pub fn max(&self) -> f64 {
        self.values.iter().copied().fold(f64::NEG_INFINITY, f64::max)
    }

    pub fn add_constant(&mut self, c: f64) {
        self.values.iter_mut().for_each(|v| *v += c);
    }

    pub fn scale(&mut self, c: f64) {
        self.values.iter_mut().for_each(|v| *v *= c);
    }

    /// `self += a · x`.
    pub fn axpy(&mut self, a: f64, x: &Self) {
        for (s, v) in self.values.iter_mut().zip(&x.values) {
            *s += a * v;
        }
    }

    /// `self - other`.
    pub fn sub(&self, other: &Self) -> Self {
        let mut out = self.clone();
        out.axpy(-1.0, other);
        out
    }

    /// `Σ_c |self(c)|^q`.
    pub fn lp_sum(&self, q: f64) -> f64 {
        self.values.iter().map(|v| v.abs().powf(q)).sum()
    }
}

/// A probability measure on the grid cells.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "ScalarField", into = "ScalarField")]
pub struct GridMeasure {
    field: ScalarField,
}

impl GridMeasure {
    /// Validates nonnegativity and unit mass (within [`MASS_TOL`]).
    pub fn new(field: ScalarField) -> Result<Self> {
        if let Some(v) = field.values.iter().find(|v| **v < 0.0) {
            return Err(Error::InvalidMeasure(format!("negative cell mass {v}")));
        }
        let total = field.sum();
        if (total - 1.0).abs() > MASS_TOL {
            return Err(Error::InvalidMeasure(format!("total mass {total} is not one")));
        }
        Ok(Self { field })
    }

    /// Rescales a nonnegative field to unit mass.
    pub fn from_density(mut field: ScalarField) -> Result<Self> {
        if let Some(v) = field.values.iter().find(|v| **v < 0.0) {
            return Err(Error::InvalidMeasure(format!("negative cell mass {v}")));
        }
        let total = field.sum();
        if !(total > 0.0) {
            return Err(Error::InvalidMeasure("field has zero mass".into()));
        }
        field.scale(1.0 / total);
        Ok(Self { field })
    }

    pub fn uniform(p: usize) -> Self {
        Self {
            field: ScalarField::constant(p, 1.0 / (p * p) as f64),
        }
    }

    pub fn dirac(p: usize, i: usize, j: usize) -> Self {
        let mut field = ScalarField::zeros(p);
        field.set(i, j, 1.0);
        Self { field }
    }

    pub fn field(&self) -> &ScalarField {
        &self.field
    }

    pub fn into_field(self) -> ScalarField {
        self.field
    }

    pub fn side(&self) -> usize {
        self.field.p
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.field.values
    }

    /// Cell centres in the coordinates `(i + 1/2, j + 1/2)` paired with
    /// their masses, skipping empty cells.
    pub fn weighted_cells(&self) -> impl Iterator<Item = ([f64; 2], f64)> + '_ {
        let p = self.field.p;
        self.field
            .values
            .iter()
            .enumerate()
            .filter(|(_, m)| **m > 0.0)
            .map(move |(c, m)| ([(c / p) as f64 + 0.5, (c % p) as f64 + 0.5], *m))
    }
}

impl TryFrom<ScalarField> for GridMeasure {
    type Error = Error;
    fn try_from(field: ScalarField) -> Result<Self> {
        Self::new(field)
    }
}

impl From<GridMeasure> for ScalarField {
    fn from(m: GridMeasure) -> Self {
        m.field
    }
}

/// A vector field with one 2-vector per cell.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FlowField {
    p: usize,
    vx: Vec<f64>,
    vy: Vec<f64>,
}

impl FlowField {
    pub fn new(p: usize, vx: Vec<f64>, vy: Vec<f64>) -> Result<Self> {
        Grid::new(p)?;
        if vx.len() != p * p || vy.len() != p * p {
            return Err(Error::InvalidArgument("flow components do not fill the grid".into()));
        }
        if vx.iter().chain(&vy).any(|v| !v.is_finite()) {
            return Err(Error::InvalidArgument("flow has non-finite entries".into()));
        }
        Ok(Self { p, vx, vy })
    }

    pub fn zeros(p: usize) -> Self {
        Self {
            p,
            vx: vec![0.0; p * p],
            vy: vec![0.0; p * p],
        }
    }

    pub fn side(&self) -> usize {
        self.p
    }

    pub fn vx(&self) -> &[f64] {
        &self.vx
    }

    pub fn vy(&self) -> &[f64] {
        &self.vy
    }

    pub fn components_mut(&mut self) -> (&mut [f64], &mut [f64]) {
        (&mut self.vx, &mut self.vy)
    }

    pub fn dot(&self, other: &Self) -> f64 {
        let x: f64 = self.vx.iter().zip(&other.vx).map(|(a, b)| a * b).sum();
        let y: f64 = self.vy.iter().zip(&other.vy).map(|(a, b)| a * b).sum();
        x + y
    }

    pub fn norm(&self) -> f64 {
        self.dot(self).sqrt()
    }

    /// Per-cell Euclidean norms.
    pub fn magnitudes(&self) -> ScalarField {
        ScalarField {
            p: self.p,
            values: self.vx.iter().zip(&self.vy).map(|(x, y)| x.hypot(*y)).collect(),
        }
    }

    /// `Σ_c ‖σ(c)‖₂`, the group-Lasso norm.
    pub fn l12_norm(&self) -> f64 {
        self.vx.iter().zip(&self.vy).map(|(x, y)| x.hypot(*y)).sum()
    }

    /// `self += a · x`.
    pub fn axpy(&mut self, a: f64, x: &Self) {
        for (s, v) in self.vx.iter_mut().zip(&x.vx) {
            *s += a * v;
        }
        for (s, v) in self.vy.iter_mut().zip(&x.vy) {
            *s += a * v;
        }
    }

    pub fn sub(&self, other: &Self) -> Self {
        let mut out = self.clone();
        out.axpy(-1.0, other);
        out
    }

    pub fn scale(&mut self, c: f64) {
        self.vx.iter_mut().chain(self.vy.iter_mut()).for_each(|v| *v *= c);
    }
}
