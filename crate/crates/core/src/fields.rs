//! Problem coefficients: diffusion `k` at cell centers, face-staggered
//! velocity `b`, and the reaction coefficient `r = div(b) / 2`.

use crate::error::{Error, Result};
use crate::grid::{Grid2D, GridField};

/// Diffusion coefficient sampled at cell centers; strictly positive.
#[derive(Debug, Clone, PartialEq)]
pub struct DiffusionField {
    grid: Grid2D,
    values: Vec<f64>,
}

impl DiffusionField {
    pub fn new(grid: Grid2D, values: Vec<f64>) -> Result<Self> {
        if values.len() != grid.len() {
            return Err(Error::Shape(format!(
                "diffusion field needs {} values, got {}",
                grid.len(),
                values.len()
            )));
        }
        if let Some(pos) = values.iter().position(|k| !(k.is_finite() && *k > 0.0)) {
            let (i1, i2) = grid.coords(pos);
            return Err(Error::InvalidArgument(format!(
                "diffusion coefficient must be positive and finite, got {} at node ({i1}, {i2})",
                values[pos]
            )));
        }
        Ok(Self { grid, values })
    }

    pub fn constant(grid: Grid2D, k: f64) -> Result<Self> {
        Self::new(grid, vec![k; grid.len()])
    }

    pub fn sample<F: Fn(f64, f64) -> f64>(grid: Grid2D, f: F) -> Result<Self> {
        let field = GridField::sample(grid, f)?;
        Self::new(grid, field.into_values())
    }

    pub fn grid(&self) -> &Grid2D {
        &self.grid
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    /// `(min, max)` over the nodes.
    pub fn bounds(&self) -> (f64, f64) {
        self.values
            .iter()
            .fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), &k| (lo.min(k), hi.max(k)))
    }
}

/// Velocity components on cell faces (MAC layout).
///
/// `b1` lives on x1-faces at `(i1 h1, x2(i2))`, `i1 = 0..=n1`; `b2` lives on
/// x2-faces at `(x1(i1), i2 h2)`, `i2 = 0..=n2`. The normal component on the
/// domain boundary is always zero.
#[derive(Debug, Clone, PartialEq)]
pub struct VelocityField {
    grid: Grid2D,
    b1: Vec<f64>,
    b2: Vec<f64>,
    time: Option<f64>,
}

impl VelocityField {
    pub fn zero(grid: Grid2D) -> Self {
        Self {
            grid,
            b1: vec![0.0; (grid.n1() + 1) * grid.n2()],
            b2: vec![0.0; grid.n1() * (grid.n2() + 1)],
            time: None,
        }
    }

    /// Build from explicit face arrays. Boundary faces must already be zero.
    pub fn from_faces(grid: Grid2D, b1: Vec<f64>, b2: Vec<f64>) -> Result<Self> {
        let (n1, n2) = (grid.n1(), grid.n2());
        if b1.len() != (n1 + 1) * n2 || b2.len() != n1 * (n2 + 1) {
            return Err(Error::Shape(format!(
                "face arrays must have {} and {} entries, got {} and {}",
                (n1 + 1) * n2,
                n1 * (n2 + 1),
                b1.len(),
                b2.len()
            )));
        }
        if let Some(v) = b1.iter().chain(&b2).find(|v| !v.is_finite()) {
            return Err(Error::InvalidArgument(format!("non-finite face velocity {v}")));
        }
        for i2 in 0..n2 {
            for i1 in [0, n1] {
                if b1[i1 + (n1 + 1) * i2] != 0.0 {
                    return Err(Error::NonZeroBoundaryFace(format!("b1({i1}, {i2})")));
                }
            }
        }
        for i2 in [0, n2] {
            for i1 in 0..n1 {
                if b2[i1 + n1 * i2] != 0.0 {
                    return Err(Error::NonZeroBoundaryFace(format!("b2({i1}, {i2})")));
                }
            }
        }
        Ok(Self {
            grid,
            b1,
            b2,
            time: None,
        })
    }

    /// Sample an analytic velocity `v(x1, x2) -> (v1, v2)` at face centers.
    /// Boundary faces are clamped to zero whatever `v` gives there.
    pub fn from_fn<F>(grid: Grid2D, v: F) -> Result<Self>
    where
        F: Fn(f64, f64) -> (f64, f64),
    {
        let (n1, n2) = (grid.n1(), grid.n2());
        let mut field = Self::zero(grid);
        for i2 in 0..n2 {
            for i1 in 1..n1 {
                field.b1[i1 + (n1 + 1) * i2] = v(i1 as f64 * grid.h1(), grid.x2(i2)).0;
            }
        }
        for i2 in 1..n2 {
            for i1 in 0..n1 {
                field.b2[i1 + n1 * i2] = v(grid.x1(i1), i2 as f64 * grid.h2()).1;
            }
        }
        if let Some(v) = field.b1.iter().chain(&field.b2).find(|v| !v.is_finite()) {
            return Err(Error::InvalidArgument(format!("non-finite face velocity {v}")));
        }
        Ok(field)
    }

    /// Discretely divergence-free field from a stream function `psi` sampled
    /// at cell vertices: `b1 = d psi / d x2`, `b2 = -d psi / d x1` as vertex
    /// differences. Vertices on the boundary are taken as `psi = 0`.
    pub fn from_stream_function<F>(grid: Grid2D, psi: F) -> Result<Self>
    where
        F: Fn(f64, f64) -> f64,
    {
        let (n1, n2) = (grid.n1(), grid.n2());
        let vertex = |j1: usize, j2: usize| {
            if j1 == 0 || j2 == 0 || j1 == n1 || j2 == n2 {
                0.0
            } else {
                psi(j1 as f64 * grid.h1(), j2 as f64 * grid.h2())
            }
        };
        let mut field = Self::zero(grid);
        for i2 in 0..n2 {
            for i1 in 1..n1 {
                field.b1[i1 + (n1 + 1) * i2] = (vertex(i1, i2 + 1) - vertex(i1, i2)) / grid.h2();
            }
        }
        for i2 in 1..n2 {
            for i1 in 0..n1 {
                field.b2[i1 + n1 * i2] = -(vertex(i1 + 1, i2) - vertex(i1, i2)) / grid.h1();
            }
        }
        if let Some(v) = field.b1.iter().chain(&field.b2).find(|v| !v.is_finite()) {
            return Err(Error::InvalidArgument(format!("non-finite face velocity {v}")));
        }
        Ok(field)
    }

    pub fn at_time(mut self, t: f64) -> Self {
        self.time = Some(t);
        self
    }

    /// Multiply every face value by `factor` (boundary faces stay zero).
    pub fn scaled(mut self, factor: f64) -> Self {
        self.b1.iter_mut().chain(self.b2.iter_mut()).for_each(|v| *v *= factor);
        self
    }

    pub fn grid(&self) -> &Grid2D {
        &self.grid
    }

    pub fn time(&self) -> Option<f64> {
        self.time
    }

    /// x1-face value, `face` in `0..=n1`.
    #[inline]
    pub fn b1(&self, face: usize, i2: usize) -> f64 {
        self.b1[face + (self.grid.n1() + 1) * i2]
    }

    /// x2-face value, `face` in `0..=n2`.
    #[inline]
    pub fn b2(&self, i1: usize, face: usize) -> f64 {
        self.b2[i1 + self.grid.n1() * face]
    }

    pub fn b1_faces(&self) -> &[f64] {
        &self.b1
    }

    pub fn b2_faces(&self) -> &[f64] {
        &self.b2
    }

    pub fn is_zero(&self) -> bool {
        self.b1.iter().chain(&self.b2).all(|&v| v == 0.0)
    }

    /// Centered face-difference divergence at a node.
    #[inline]
    fn divergence_at(&self, i1: usize, i2: usize) -> f64 {
        (self.b1(i1 + 1, i2) - self.b1(i1, i2)) / self.grid.h1()
            + (self.b2(i1, i2 + 1) - self.b2(i1, i2)) / self.grid.h2()
    }
}

/// Diagonal reaction coefficient at cell centers.
#[derive(Debug, Clone, PartialEq)]
pub struct ReactionField {
    grid: Grid2D,
    values: Vec<f64>,
}

impl ReactionField {
    pub fn new(grid: Grid2D, values: Vec<f64>) -> Result<Self> {
        let field = GridField::from_values(grid, values)?;
        Ok(Self {
            grid,
            values: field.into_values(),
        })
    }

    pub fn zeros(grid: Grid2D) -> Self {
        Self {
            grid,
            values: vec![0.0; grid.len()],
        }
    }

    pub fn grid(&self) -> &Grid2D {
        &self.grid
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn max_abs(&self) -> f64 {
        self.values.iter().fold(0.0_f64, |m, v| m.max(v.abs()))
    }
}

/// `r = div_h(b) / 2` at every node.
pub fn discrete_divergence_half(v: &VelocityField) -> ReactionField {
    let g = v.grid;
    let mut values = Vec::with_capacity(g.len());
    for i2 in 0..g.n2() {
        for i1 in 0..g.n1() {
            values.push(0.5 * v.divergence_at(i1, i2));
        }
    }
    ReactionField { grid: g, values }
}

/// `delta = max |div_h(b)| / 2`, the bound in `|(C y, y)| <= delta ||y||^2`.
pub fn stability_constant(v: &VelocityField) -> f64 {
    let g = v.grid;
    let mut max = 0.0_f64;
    for i2 in 0..g.n2() {
        for i1 in 0..g.n1() {
            max = max.max(v.divergence_at(i1, i2).abs());
        }
    }
    0.5 * max
}

/// Pointwise sign split `r = r_plus + r_minus`, `r_plus >= 0 >= r_minus`.
pub fn split_reaction(r: &ReactionField) -> (ReactionField, ReactionField) {
    let plus = r.values.iter().map(|&x| x.max(0.0)).collect();
    let minus = r.values.iter().map(|&x| x.min(0.0)).collect();
    (
        ReactionField {
            grid: r.grid,
            values: plus,
        },
        ReactionField {
            grid: r.grid,
            values: minus,
        },
    )
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn random_velocity(grid: Grid2D, rng: &mut ChaCha8Rng) -> VelocityField {
        let (n1, n2) = (grid.n1(), grid.n2());
        let mut b1 = vec![0.0; (n1 + 1) * n2];
        let mut b2 = vec![0.0; n1 * (n2 + 1)];
        for i2 in 0..n2 {
            for i1 in 1..n1 {
                b1[i1 + (n1 + 1) * i2] = rng.gen_range(-2.0..2.0);
            }
        }
        for i2 in 1..n2 {
            for i1 in 0..n1 {
                b2[i1 + n1 * i2] = rng.gen_range(-2.0..2.0);
            }
        }
        VelocityField::from_faces(grid, b1, b2).unwrap()
    }

    #[test]
    fn diffusion_rejects_non_positive() {
        let g = Grid2D::unit(3).unwrap();
        assert!(DiffusionField::constant(g, 0.0).is_err());
        let mut vals = vec![1.0; 9];
        vals[4] = -0.1;
        assert!(DiffusionField::new(g, vals).is_err());
        let k = DiffusionField::sample(g, |x1, _| 1.0 + x1).unwrap();
        let (lo, hi) = k.bounds();
        assert!(lo > 1.0 && hi < 2.0);
    }

    #[test]
    fn boundary_faces_are_clamped() {
        let g = Grid2D::new(2.0, 1.0, 4, 3).unwrap();
        let v = VelocityField::from_fn(g, |_, _| (1.0, -1.0)).unwrap();
        for i2 in 0..3 {
            assert_eq!(v.b1(0, i2), 0.0);
            assert_eq!(v.b1(4, i2), 0.0);
            assert_eq!(v.b1(2, i2), 1.0);
        }
        for i1 in 0..4 {
            assert_eq!(v.b2(i1, 0), 0.0);
            assert_eq!(v.b2(i1, 3), 0.0);
            assert_eq!(v.b2(i1, 1), -1.0);
        }
    }

    #[test]
    fn from_faces_checks_boundary() {
        let g = Grid2D::unit(2).unwrap();
        let mut b1 = vec![0.0; 6];
        let b2 = vec![0.0; 6];
        b1[2] = 1.0;
        assert!(matches!(
            VelocityField::from_faces(g, b1, b2),
            Err(Error::NonZeroBoundaryFace(_))
        ));
    }

    #[test]
    fn uniform_interior_is_divergence_free_inside() {
        let g = Grid2D::unit(6).unwrap();
        let v = VelocityField::from_fn(g, |_, _| (0.7, 0.3)).unwrap();
        let r = discrete_divergence_half(&v);
        for i2 in 1..5 {
            for i1 in 1..5 {
                assert_eq!(r.values()[g.index(i1, i2)], 0.0);
            }
        }
        // boundary-adjacent cells see the clamped faces
        assert!(r.values()[g.index(0, 2)] != 0.0);
    }

    #[test]
    fn linear_velocity_has_half_unit_reaction() {
        let g = Grid2D::unit(8).unwrap();
        let v = VelocityField::from_fn(g, |x1, _| (x1, 0.0)).unwrap();
        let r = discrete_divergence_half(&v);
        for i2 in 0..8 {
            for i1 in 0..7 {
                assert!((r.values()[g.index(i1, i2)] - 0.5).abs() < 1e-14);
            }
        }
        // oracle: brute-force max over all nodes, clamped faces included
        let h = 1.0 / 8.0;
        let face = |j: usize| if j == 0 || j == 8 { 0.0 } else { j as f64 * h };
        let mut oracle = 0.0_f64;
        for i1 in 0..8 {
            oracle = oracle.max(((face(i1 + 1) - face(i1)) / h).abs() / 2.0);
        }
        assert!((stability_constant(&v) - oracle).abs() < 1e-14);
        assert!((oracle - 3.5).abs() < 1e-12);
    }

    #[test]
    fn divergence_matches_loop_oracle() {
        let g = Grid2D::new(1.0, 2.0, 5, 4).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let v = random_velocity(g, &mut rng);
        let r = discrete_divergence_half(&v);
        let (h1, h2) = (g.h1(), g.h2());
        for i2 in 0..4 {
            for i1 in 0..5 {
                let b1 = v.b1_faces();
                let b2 = v.b2_faces();
                let div = (b1[i1 + 1 + 6 * i2] - b1[i1 + 6 * i2]) / h1
                    + (b2[i1 + 5 * (i2 + 1)] - b2[i1 + 5 * i2]) / h2;
                assert!((r.values()[g.index(i1, i2)] - div / 2.0).abs() < 1e-14);
            }
        }
    }

    #[test]
    fn stream_function_field_is_divergence_free() {
        let g = Grid2D::new(1.0, 2.0, 9, 7).unwrap();
        let pi = std::f64::consts::PI;
        let v = VelocityField::from_stream_function(g, |x1, x2| {
            (pi * x1).sin() * (pi * x2 / 2.0).sin()
        })
        .unwrap();
        assert!(stability_constant(&v) < 1e-13);
        assert!(!v.is_zero());
    }

    #[test]
    fn split_examples() {
        let g = Grid2D::unit(3).unwrap();
        let (p, m) = split_reaction(&ReactionField::zeros(g));
        assert!(p.values().iter().chain(m.values()).all(|&x| x == 0.0));
        let r = ReactionField::new(g, vec![0.4; 9]).unwrap();
        let (p, m) = split_reaction(&r);
        assert!(p.values().iter().all(|&x| x == 0.4));
        assert!(m.values().iter().all(|&x| x == 0.0));
    }

    proptest! {
        #[test]
        fn delta_is_max_abs_reaction(seed in any::<u64>(), n1 in 2usize..10, n2 in 2usize..10) {
            let g = Grid2D::new(1.0, 1.5, n1, n2).unwrap();
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let v = random_velocity(g, &mut rng);
            let delta = stability_constant(&v);
            let r = discrete_divergence_half(&v);
            prop_assert!(delta >= 0.0);
            prop_assert!((delta - r.max_abs()).abs() <= 1e-15 * delta);

            let (p, m) = split_reaction(&r);
            for ((&x, &a), &b) in r.values().iter().zip(p.values()).zip(m.values()) {
                prop_assert_eq!(a + b, x);
                prop_assert!(a >= 0.0 && b <= 0.0);
                prop_assert_eq!(a * b, 0.0);
                prop_assert!(a <= delta && -b <= delta);
            }
        }
    }
}
