//! Uniform cell-centered grid on the rectangle `(0, l1) x (0, l2)` and grid
//! functions in the weighted space `L2(omega)`.
//!
//! Nodes sit at cell midpoints `x_a(i) = (i + 1/2) h_a`, `i = 0..n_a`, with
//! `h_a * n_a = l_a`. Field values are stored with `i1` fastest.

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Grid2D {
    l1: f64,
    l2: f64,
    n1: usize,
    n2: usize,
    h1: f64,
    h2: f64,
}

impl Grid2D {
    pub fn new(l1: f64, l2: f64, n1: usize, n2: usize) -> Result<Self> {
        if !(l1.is_finite() && l1 > 0.0 && l2.is_finite() && l2 > 0.0) {
            return Err(Error::InvalidArgument(format!(
                "domain lengths must be positive, got ({l1}, {l2})"
            )));
        }
        if n1 < 2 || n2 < 2 {
            return Err(Error::InvalidArgument(format!(
                "cell counts must be at least 2, got ({n1}, {n2})"
            )));
        }
        Ok(Self {
            l1,
            l2,
            n1,
            n2,
            h1: l1 / n1 as f64,
            h2: l2 / n2 as f64,
        })
    }

    /// Unit square with `n x n` cells.
    pub fn unit(n: usize) -> Result<Self> {
        Self::new(1.0, 1.0, n, n)
    }

    pub fn l1(&self) -> f64 {
        self.l1
    }
    pub fn l2(&self) -> f64 {
        self.l2
    }
    pub fn n1(&self) -> usize {
        self.n1
    }
    pub fn n2(&self) -> usize {
        self.n2
    }
    pub fn h1(&self) -> f64 {
        self.h1
    }
    pub fn h2(&self) -> f64 {
        self.h2
    }

    /// Number of nodes, `n1 * n2`.
    pub fn len(&self) -> usize {
        self.n1 * self.n2
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    /// Quadrature weight of a single node, `h1 * h2`.
    pub fn cell_area(&self) -> f64 {
        self.h1 * self.h2
    }

    #[inline]
    pub fn index(&self, i1: usize, i2: usize) -> usize {
        i1 + self.n1 * i2
    }

    #[inline]
    pub fn coords(&self, index: usize) -> (usize, usize) {
        (index % self.n1, index / self.n1)
    }

    #[inline]
    pub fn x1(&self, i1: usize) -> f64 {
        (i1 as f64 + 0.5) * self.h1
    }

    #[inline]
    pub fn x2(&self, i2: usize) -> f64 {
        (i2 as f64 + 0.5) * self.h2
    }

    /// Same domain, cell counts doubled in both directions.
    pub fn refined(&self) -> Self {
        Self::new(self.l1, self.l2, 2 * self.n1, 2 * self.n2).expect("refining a valid grid")
    }
}

/// Scalar grid function.
#[derive(Debug, Clone, PartialEq)]
pub struct GridField {
    grid: Grid2D,
    values: Vec<f64>,
}

impl GridField {
    pub fn zeros(grid: Grid2D) -> Self {
        Self::constant(grid, 0.0)
    }

    pub fn constant(grid: Grid2D, value: f64) -> Self {
        Self {
            grid,
            values: vec![value; grid.len()],
        }
    }

    pub fn from_values(grid: Grid2D, values: Vec<f64>) -> Result<Self> {
        if values.len() != grid.len() {
            return Err(Error::Shape(format!(
                "expected {} values for a {}x{} grid, got {}",
                grid.len(),
                grid.n1(),
                grid.n2(),
                values.len()
            )));
        }
        if let Some(pos) = values.iter().position(|v| !v.is_finite()) {
            let (i1, i2) = grid.coords(pos);
            return Err(Error::NonFinite {
                i1,
                i2,
                value: values[pos],
            });
        }
        Ok(Self { grid, values })
    }

    /// Evaluate `f(x1, x2)` at every node.
    pub fn sample<F>(grid: Grid2D, f: F) -> Result<Self>
    where
        F: Fn(f64, f64) -> f64,
    {
        let mut values = Vec::with_capacity(grid.len());
        for i2 in 0..grid.n2() {
            let x2 = grid.x2(i2);
            for i1 in 0..grid.n1() {
                let value = f(grid.x1(i1), x2);
                if !value.is_finite() {
                    return Err(Error::NonFinite { i1, i2, value });
                }
                values.push(value);
            }
        }
        Ok(Self { grid, values })
    }

    pub fn grid(&self) -> &Grid2D {
        &self.grid
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn values_mut(&mut self) -> &mut [f64] {
        &mut self.values
    }

    pub fn into_values(self) -> Vec<f64> {
        self.values
    }

    pub fn get(&self, i1: usize, i2: usize) -> f64 {
        self.values[self.grid.index(i1, i2)]
    }

    pub fn max_abs(&self) -> f64 {
        self.values.iter().fold(0.0_f64, |m, v| m.max(v.abs()))
    }

    pub fn is_finite(&self) -> bool {
        self.values.iter().all(|v| v.is_finite())
    }

    pub(crate) fn check_same_grid(&self, other: &Grid2D) -> Result<()> {
        if &self.grid != other {
            return Err(Error::Shape(format!(
                "field on {}x{} grid used with {}x{} grid",
                self.grid.n1(),
                self.grid.n2(),
                other.n1(),
                other.n2()
            )));
        }
        Ok(())
    }

    pub fn scale(&mut self, factor: f64) {
        self.values.iter_mut().for_each(|v| *v *= factor);
    }

    /// `self += factor * other`
    pub fn axpy(&mut self, factor: f64, other: &GridField) -> Result<()> {
        other.check_same_grid(&self.grid)?;
        for (a, b) in self.values.iter_mut().zip(&other.values) {
            *a += factor * b;
        }
        Ok(())
    }
}

/// Weighted inner product `sum a(x) b(x) h1 h2`.
pub fn inner_product(a: &GridField, b: &GridField) -> Result<f64> {
    a.check_same_grid(&b.grid)?;
    let sum: f64 = a.values.iter().zip(&b.values).map(|(x, y)| x * y).sum();
    Ok(sum * a.grid.cell_area())
}

pub fn norm(a: &GridField) -> f64 {
    let sum: f64 = a.values.iter().map(|x| x * x).sum();
    (sum * a.grid.cell_area()).sqrt()
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn random_field(grid: Grid2D, rng: &mut ChaCha8Rng) -> GridField {
        let values = (0..grid.len()).map(|_| rng.gen_range(-1.0..1.0)).collect();
        GridField::from_values(grid, values).unwrap()
    }

    #[test]
    fn spacing_and_nodes() {
        let g = Grid2D::new(3.0, 2.0, 6, 5).unwrap();
        assert!((g.h1() * g.n1() as f64 - 3.0).abs() < 1e-15);
        assert!((g.h2() * g.n2() as f64 - 2.0).abs() < 1e-15);
        assert_eq!(g.x1(0), 0.25);
        assert!((g.x1(5) - (3.0 - 0.25)).abs() < 1e-15);
        assert!((g.x2(4) - (2.0 - 0.2)).abs() < 1e-15);
        for i in 0..g.len() {
            let (i1, i2) = g.coords(i);
            assert_eq!(g.index(i1, i2), i);
        }
    }

    #[test]
    fn rejects_bad_grids() {
        assert!(Grid2D::new(1.0, 1.0, 1, 4).is_err());
        assert!(Grid2D::new(0.0, 1.0, 4, 4).is_err());
        assert!(Grid2D::new(1.0, f64::NAN, 4, 4).is_err());
    }

    #[test]
    fn refinement_halves_spacing() {
        let g = Grid2D::new(2.0, 1.5, 4, 3).unwrap();
        let f = g.refined();
        assert_eq!((f.n1(), f.n2()), (8, 6));
        assert!((f.h1() - g.h1() / 2.0).abs() < 1e-15);
        assert!((f.h2() - g.h2() / 2.0).abs() < 1e-15);
        assert!((f.h1() * f.n1() as f64 - 2.0).abs() < 1e-15);
    }

    #[test]
    fn constant_one_integrates_to_area() {
        let g = Grid2D::unit(2).unwrap();
        let one = GridField::constant(g, 1.0);
        assert_eq!(inner_product(&one, &one).unwrap(), 1.0);
        assert_eq!(norm(&one), 1.0);
        assert_eq!(norm(&GridField::zeros(g)), 0.0);
    }

    #[test]
    fn zero_field_is_orthogonal() {
        let g = Grid2D::new(1.0, 2.0, 5, 4).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let a = random_field(g, &mut rng);
        assert_eq!(inner_product(&a, &GridField::zeros(g)).unwrap(), 0.0);
    }

    #[test]
    fn inner_product_matches_double_loop() {
        let g = Grid2D::new(1.3, 0.7, 5, 4).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        let a = random_field(g, &mut rng);
        let b = random_field(g, &mut rng);
        let mut oracle = 0.0;
        for i1 in 0..5 {
            for i2 in 0..4 {
                oracle += a.get(i1, i2) * b.get(i1, i2) * (1.3 / 5.0) * (0.7 / 4.0);
            }
        }
        let ip = inner_product(&a, &b).unwrap();
        assert!((ip - oracle).abs() <= 1e-12 * oracle.abs());
        assert!((norm(&a) - inner_product(&a, &a).unwrap().sqrt()).abs() < 1e-15);
    }

    #[test]
    fn mismatched_grids_are_rejected() {
        let a = GridField::zeros(Grid2D::unit(3).unwrap());
        let b = GridField::zeros(Grid2D::unit(4).unwrap());
        assert!(matches!(inner_product(&a, &b), Err(Error::Shape(_))));
    }

    #[test]
    fn sample_uses_cell_centers() {
        let g = Grid2D::new(1.0, 1.0, 2, 3).unwrap();
        let f = GridField::sample(g, |x1, _| x1).unwrap();
        assert_eq!(f.get(0, 0), 0.25);
        assert_eq!(f.get(1, 2), 0.75);
        let c = GridField::sample(g, |_, _| 2.5).unwrap();
        assert!(c.values().iter().all(|&v| v == 2.5));

        let pi = std::f64::consts::PI;
        let s = GridField::sample(g, |x1, x2| (pi * x1).sin() * (pi * x2).cos()).unwrap();
        for i2 in 0..3 {
            for i1 in 0..2 {
                let x1 = (i1 as f64 + 0.5) * 0.5;
                let x2 = (i2 as f64 + 0.5) / 3.0;
                assert!((s.get(i1, i2) - (pi * x1).sin() * (pi * x2).cos()).abs() < 1e-15);
            }
        }
    }

    #[test]
    fn sample_reports_non_finite_node() {
        let g = Grid2D::unit(4).unwrap();
        let err = GridField::sample(g, |x1, x2| if x1 > 0.5 && x2 > 0.7 { f64::NAN } else { 0.0 })
            .unwrap_err();
        assert!(matches!(err, Error::NonFinite { i1: 2, i2: 3, .. }));
    }

    proptest! {
        #[test]
        fn inner_product_symmetric_and_bounded(
            seed in any::<u64>(), n1 in 2usize..9, n2 in 2usize..9,
        ) {
            let g = Grid2D::new(1.0, 0.5, n1, n2).unwrap();
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let a = random_field(g, &mut rng);
            let b = random_field(g, &mut rng);
            let ab = inner_product(&a, &b).unwrap();
            let ba = inner_product(&b, &a).unwrap();
            prop_assert!((ab - ba).abs() <= 1e-14 * ab.abs().max(f64::MIN_POSITIVE));
            prop_assert!(ab.abs() <= norm(&a) * norm(&b) * (1.0 + 1e-12));
        }
    }
}
