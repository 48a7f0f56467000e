//! Discrete diffusion, convection and reaction operators on the cell-centered
//! grid.
//!
//! * `D`: conservative five-point stencil with face coefficients built from the
//!   two adjacent cell values; boundary faces carry no flux (Neumann).
//! * `C`: divergent (flux) form with centered face averages,
//!   `(C y)_i = sum_a [b(i+1/2) (y_i + y_{i+1})/2 - b(i-1/2) (y_{i-1} + y_i)/2] / h_a`.
//! * `C0`: symmetric form, the off-diagonal part of `C`; skew-adjoint in `H`.
//! * `R`: multiplication by `r = div_h(b) / 2`, so that `C = C0 + R` holds
//!   node by node.
//!
//! The matrix-free routines sweep faces; [`OperatorSet::assemble`] builds
//! rows node by node. The two are kept independent so that one can check the
//! other.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::fields::{
    discrete_divergence_half, split_reaction, stability_constant, DiffusionField, ReactionField,
    VelocityField,
};
use crate::grid::{Grid2D, GridField};
use crate::linalg::SparseMatrix;

/// How the diffusion coefficient on a face is formed from its two cells.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum FaceMean {
    #[default]
    Arithmetic,
    Harmonic,
}

impl FaceMean {
    fn combine(self, a: f64, b: f64) -> f64 {
        match self {
            FaceMean::Arithmetic => 0.5 * (a + b),
            FaceMean::Harmonic => 2.0 * a * b / (a + b),
        }
    }
}

/// Which part of the reaction operator to apply.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ReactionPart {
    Full,
    Plus,
    Minus,
}

/// Weights of a linear combination
/// `identity E + convection C + convection_symmetric C0 + diffusion D
///  + reaction R + reaction_plus R+ + reaction_minus R-`.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct Combination {
    pub identity: f64,
    pub convection: f64,
    pub convection_symmetric: f64,
    pub diffusion: f64,
    pub reaction: f64,
    pub reaction_plus: f64,
    pub reaction_minus: f64,
}

impl Combination {
    pub fn identity() -> Self {
        Self {
            identity: 1.0,
            ..Self::default()
        }
    }

    /// `A = C + D`
    pub fn a() -> Self {
        Self {
            convection: 1.0,
            diffusion: 1.0,
            ..Self::default()
        }
    }

    /// `s E + t A`
    pub fn shifted_a(s: f64, t: f64) -> Self {
        Self {
            identity: s,
            convection: t,
            diffusion: t,
            ..Self::default()
        }
    }

    fn is_finite(&self) -> bool {
        [
            self.identity,
            self.convection,
            self.convection_symmetric,
            self.diffusion,
            self.reaction,
            self.reaction_plus,
            self.reaction_minus,
        ]
        .iter()
        .all(|w| w.is_finite())
    }
}

/// Operators of one convection-diffusion problem at one time level.
#[derive(Debug, Clone)]
pub struct OperatorSet {
    grid: Grid2D,
    diffusion: Option<DiffusionField>,
    velocity: Option<VelocityField>,
    reaction: ReactionField,
    reaction_plus: ReactionField,
    reaction_minus: ReactionField,
    delta: f64,
    face_mean: FaceMean,
    // face diffusion coefficients; zero on boundary faces
    k_faces1: Vec<f64>,
    k_faces2: Vec<f64>,
}

impl OperatorSet {
    pub fn new(k: DiffusionField, v: VelocityField) -> Result<Self> {
        Self::with_face_mean(k, v, FaceMean::Arithmetic)
    }

    pub fn with_face_mean(k: DiffusionField, v: VelocityField, face_mean: FaceMean) -> Result<Self> {
        if k.grid() != v.grid() {
            return Err(Error::Shape(
                "diffusion and velocity fields live on different grids".into(),
            ));
        }
        let grid = *k.grid();
        let reaction = discrete_divergence_half(&v);
        let (reaction_plus, reaction_minus) = split_reaction(&reaction);
        let delta = stability_constant(&v);
        let (k_faces1, k_faces2) = face_coefficients(&k, face_mean);
        Ok(Self {
            grid,
            diffusion: Some(k),
            velocity: Some(v),
            reaction,
            reaction_plus,
            reaction_minus,
            delta,
            face_mean,
            k_faces1,
            k_faces2,
        })
    }

    /// Purely diagonal operator set: `C0 = D = 0` and `C = R = diag(r)`, so
    /// `A = diag(r)`. Used to build cases where the growth bounds of the
    /// schemes are attained exactly.
    pub fn diagonal(r: ReactionField) -> Self {
        let grid = *r.grid();
        let (reaction_plus, reaction_minus) = split_reaction(&r);
        let delta = r.max_abs();
        Self {
            grid,
            diffusion: None,
            velocity: None,
            reaction: r,
            reaction_plus,
            reaction_minus,
            delta,
            face_mean: FaceMean::Arithmetic,
            k_faces1: vec![0.0; (grid.n1() + 1) * grid.n2()],
            k_faces2: vec![0.0; grid.n1() * (grid.n2() + 1)],
        }
    }

    pub fn grid(&self) -> &Grid2D {
        &self.grid
    }

    pub fn diffusion(&self) -> Option<&DiffusionField> {
        self.diffusion.as_ref()
    }

    pub fn velocity(&self) -> Option<&VelocityField> {
        self.velocity.as_ref()
    }

    pub fn reaction(&self, part: ReactionPart) -> &ReactionField {
        match part {
            ReactionPart::Full => &self.reaction,
            ReactionPart::Plus => &self.reaction_plus,
            ReactionPart::Minus => &self.reaction_minus,
        }
    }

    /// Stability constant `delta` with `|(C y, y)| <= delta ||y||^2`.
    pub fn delta(&self) -> f64 {
        self.delta
    }

    pub fn face_mean(&self) -> FaceMean {
        self.face_mean
    }

    fn check(&self, y: &GridField) -> Result<()> {
        y.check_same_grid(&self.grid)
    }

    pub fn apply_d(&self, y: &GridField) -> Result<GridField> {
        self.check(y)?;
        let mut out = vec![0.0; self.grid.len()];
        self.add_d(1.0, y.values(), &mut out);
        GridField::from_values(self.grid, out)
    }

    pub fn apply_c(&self, y: &GridField) -> Result<GridField> {
        self.check(y)?;
        let mut out = vec![0.0; self.grid.len()];
        self.add_c(1.0, y.values(), &mut out);
        GridField::from_values(self.grid, out)
    }

    pub fn apply_c0(&self, y: &GridField) -> Result<GridField> {
        self.check(y)?;
        let mut out = vec![0.0; self.grid.len()];
        self.add_c0(1.0, y.values(), &mut out);
        GridField::from_values(self.grid, out)
    }

    pub fn apply_r(&self, y: &GridField, part: ReactionPart) -> Result<GridField> {
        self.check(y)?;
        let mut out = vec![0.0; self.grid.len()];
        add_diagonal(1.0, self.reaction(part).values(), y.values(), &mut out);
        GridField::from_values(self.grid, out)
    }

    pub fn apply_a(&self, y: &GridField) -> Result<GridField> {
        self.apply(&Combination::a(), y)
    }

    /// Matrix-free action of a [`Combination`].
    pub fn apply(&self, combo: &Combination, y: &GridField) -> Result<GridField> {
        self.check(y)?;
        let mut out = vec![0.0; self.grid.len()];
        self.apply_slice(combo, y.values(), &mut out);
        GridField::from_values(self.grid, out)
    }

    /// `out = combo * y` on raw node arrays.
    pub fn apply_slice(&self, combo: &Combination, y: &[f64], out: &mut [f64]) {
        assert_eq!(y.len(), self.grid.len());
        assert_eq!(out.len(), self.grid.len());
        out.iter_mut().for_each(|o| *o = 0.0);
        if combo.identity != 0.0 {
            for (o, v) in out.iter_mut().zip(y) {
                *o += combo.identity * v;
            }
        }
        if combo.convection != 0.0 {
            self.add_c(combo.convection, y, out);
        }
        if combo.convection_symmetric != 0.0 {
            self.add_c0(combo.convection_symmetric, y, out);
        }
        if combo.diffusion != 0.0 {
            self.add_d(combo.diffusion, y, out);
        }
        for (w, part) in [
            (combo.reaction, ReactionPart::Full),
            (combo.reaction_plus, ReactionPart::Plus),
            (combo.reaction_minus, ReactionPart::Minus),
        ] {
            if w != 0.0 {
                add_diagonal(w, self.reaction(part).values(), y, out);
            }
        }
    }

    /// Diffusion as a sweep over interior faces.
    fn add_d(&self, w: f64, y: &[f64], out: &mut [f64]) {
        let g = &self.grid;
        let (n1, n2) = (g.n1(), g.n2());
        let c1 = w / (g.h1() * g.h1());
        let c2 = w / (g.h2() * g.h2());
        for i2 in 0..n2 {
            for face in 1..n1 {
                let (l, r) = (g.index(face - 1, i2), g.index(face, i2));
                let q = c1 * self.k_faces1[face + (n1 + 1) * i2] * (y[l] - y[r]);
                out[l] += q;
                out[r] -= q;
            }
        }
        for face in 1..n2 {
            for i1 in 0..n1 {
                let (l, r) = (g.index(i1, face - 1), g.index(i1, face));
                let q = c2 * self.k_faces2[i1 + n1 * face] * (y[l] - y[r]);
                out[l] += q;
                out[r] -= q;
            }
        }
    }

    /// Divergent-form convection as a sweep over interior faces.
    fn add_c(&self, w: f64, y: &[f64], out: &mut [f64]) {
        let Some(v) = &self.velocity else {
            add_diagonal(w, self.reaction.values(), y, out);
            return;
        };
        let g = &self.grid;
        let (n1, n2) = (g.n1(), g.n2());
        for i2 in 0..n2 {
            for face in 1..n1 {
                let (l, r) = (g.index(face - 1, i2), g.index(face, i2));
                let flux = w * v.b1(face, i2) * 0.5 * (y[l] + y[r]) / g.h1();
                out[l] += flux;
                out[r] -= flux;
            }
        }
        for face in 1..n2 {
            for i1 in 0..n1 {
                let (l, r) = (g.index(i1, face - 1), g.index(i1, face));
                let flux = w * v.b2(i1, face) * 0.5 * (y[l] + y[r]) / g.h2();
                out[l] += flux;
                out[r] -= flux;
            }
        }
    }

    /// Symmetric-form convection: each face couples its two cells with
    /// opposite signs.
    fn add_c0(&self, w: f64, y: &[f64], out: &mut [f64]) {
        let Some(v) = &self.velocity else {
            return;
        };
        let g = &self.grid;
        let (n1, n2) = (g.n1(), g.n2());
        for i2 in 0..n2 {
            for face in 1..n1 {
                let (l, r) = (g.index(face - 1, i2), g.index(face, i2));
                let c = w * 0.5 * v.b1(face, i2) / g.h1();
                out[l] += c * y[r];
                out[r] -= c * y[l];
            }
        }
        for face in 1..n2 {
            for i1 in 0..n1 {
                let (l, r) = (g.index(i1, face - 1), g.index(i1, face));
                let c = w * 0.5 * v.b2(i1, face) / g.h2();
                out[l] += c * y[r];
                out[r] -= c * y[l];
            }
        }
    }

    /// Sparse matrix of a [`Combination`], rows in [`GridField`] node order,
    /// at most five entries per row.
    pub fn assemble(&self, combo: &Combination) -> Result<SparseMatrix> {
        if !combo.is_finite() {
            return Err(Error::InvalidArgument(format!(
                "non-finite combination weights {combo:?}"
            )));
        }
        let g = &self.grid;
        let (n1, n2) = (g.n1(), g.n2());
        let (h1, h2) = (g.h1(), g.h2());
        let n = g.len();
        let mut row_ptr = Vec::with_capacity(n + 1);
        let mut cols = Vec::with_capacity(5 * n);
        let mut vals = Vec::with_capacity(5 * n);
        row_ptr.push(0);

        let r = self.reaction.values();
        let rp = self.reaction_plus.values();
        let rm = self.reaction_minus.values();
        let (cw, sw) = (combo.convection, combo.convection_symmetric);
        let dw = combo.diffusion;

        for i2 in 0..n2 {
            for i1 in 0..n1 {
                let i = g.index(i1, i2);
                // south, west, center, east, north
                let mut entries = [0.0_f64; 5];
                let mut present = [i2 > 0, i1 > 0, true, i1 + 1 < n1, i2 + 1 < n2];

                entries[2] += combo.identity
                    + combo.reaction * r[i]
                    + combo.reaction_plus * rp[i]
                    + combo.reaction_minus * rm[i];

                // diffusion
                let kw = self.k_faces1[i1 + (n1 + 1) * i2] / (h1 * h1);
                let ke = self.k_faces1[i1 + 1 + (n1 + 1) * i2] / (h1 * h1);
                let ks = self.k_faces2[i1 + n1 * i2] / (h2 * h2);
                let kn = self.k_faces2[i1 + n1 * (i2 + 1)] / (h2 * h2);
                entries[2] += dw * (kw + ke + ks + kn);
                entries[0] -= dw * ks;
                entries[1] -= dw * kw;
                entries[3] -= dw * ke;
                entries[4] -= dw * kn;

                // convection
                match &self.velocity {
                    Some(v) => {
                        let bw = v.b1(i1, i2) / (2.0 * h1);
                        let be = v.b1(i1 + 1, i2) / (2.0 * h1);
                        let bs = v.b2(i1, i2) / (2.0 * h2);
                        let bn = v.b2(i1, i2 + 1) / (2.0 * h2);
                        let off = cw + sw;
                        entries[0] -= off * bs;
                        entries[1] -= off * bw;
                        entries[3] += off * be;
                        entries[4] += off * bn;
                        entries[2] += cw * ((be - bw) + (bn - bs));
                    }
                    None => {
                        entries[2] += cw * r[i];
                    }
                }

                let neighbors = [
                    i.wrapping_sub(n1),
                    i.wrapping_sub(1),
                    i,
                    i + 1,
                    i + n1,
                ];
                if self.velocity.is_none() && self.diffusion.is_none() {
                    present = [false, false, true, false, false];
                }
                for k in 0..5 {
                    if present[k] {
                        cols.push(neighbors[k]);
                        vals.push(entries[k]);
                    }
                }
                row_ptr.push(cols.len());
            }
        }
        SparseMatrix::new(n, row_ptr, cols, vals)
    }
}

fn add_diagonal(w: f64, diag: &[f64], y: &[f64], out: &mut [f64]) {
    for ((o, d), v) in out.iter_mut().zip(diag).zip(y) {
        *o += w * d * v;
    }
}

fn face_coefficients(k: &DiffusionField, mean: FaceMean) -> (Vec<f64>, Vec<f64>) {
    let g = k.grid();
    let (n1, n2) = (g.n1(), g.n2());
    let kv = k.values();
    let mut f1 = vec![0.0; (n1 + 1) * n2];
    let mut f2 = vec![0.0; n1 * (n2 + 1)];
    for i2 in 0..n2 {
        for face in 1..n1 {
            f1[face + (n1 + 1) * i2] = mean.combine(kv[g.index(face - 1, i2)], kv[g.index(face, i2)]);
        }
    }
    for face in 1..n2 {
        for i1 in 0..n1 {
            f2[i1 + n1 * face] = mean.combine(kv[g.index(i1, face - 1)], kv[g.index(i1, face)]);
        }
    }
    (f1, f2)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::grid::{inner_product, norm};
    use proptest::prelude::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn random_field(grid: Grid2D, rng: &mut ChaCha8Rng) -> GridField {
        GridField::from_values(grid, (0..grid.len()).map(|_| rng.gen_range(-1.0..1.0)).collect())
            .unwrap()
    }

    fn random_set(grid: Grid2D, seed: u64) -> OperatorSet {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let k = DiffusionField::new(grid, (0..grid.len()).map(|_| rng.gen_range(0.5..2.0)).collect())
            .unwrap();
        let (a, b) = (rng.gen_range(-2.0..2.0), rng.gen_range(-2.0..2.0));
        let v = VelocityField::from_fn(grid, |x1, x2| (a * x1 + x2 * x2, b * x2 - x1)).unwrap();
        OperatorSet::new(k, v).unwrap()
    }

    /// Column-by-column dense matrix of the matrix-free combination.
    fn dense_of(set: &OperatorSet, combo: &Combination) -> Vec<Vec<f64>> {
        let n = set.grid().len();
        let mut m = vec![vec![0.0; n]; n];
        let mut e = vec![0.0; n];
        let mut col = vec![0.0; n];
        for j in 0..n {
            e[j] = 1.0;
            set.apply_slice(combo, &e, &mut col);
            for i in 0..n {
                m[i][j] = col[i];
            }
            e[j] = 0.0;
        }
        m
    }

    #[test]
    fn diffusion_kills_constants() {
        let g = Grid2D::new(1.0, 2.0, 5, 4).unwrap();
        let set = random_set(g, 1);
        let d = set.apply_d(&GridField::constant(g, 3.7)).unwrap();
        assert!(d.values().iter().all(|&x| x == 0.0));
    }

    #[test]
    fn five_point_delta_response() {
        let g = Grid2D::unit(5).unwrap();
        let k = DiffusionField::constant(g, 1.0).unwrap();
        let set = OperatorSet::new(k, VelocityField::zero(g)).unwrap();
        let mut y = GridField::zeros(g);
        y.values_mut()[g.index(2, 2)] = 1.0;
        let d = set.apply_d(&y).unwrap();
        let h2 = 1.0 / 25.0;
        assert!((d.get(2, 2) - 4.0 / h2).abs() < 1e-10);
        for (i1, i2) in [(1, 2), (3, 2), (2, 1), (2, 3)] {
            assert!((d.get(i1, i2) + 1.0 / h2).abs() < 1e-10);
        }
        assert_eq!(d.get(0, 0), 0.0);
    }

    #[test]
    fn zero_velocity_gives_zero_convection() {
        let g = Grid2D::unit(4).unwrap();
        let set = OperatorSet::new(DiffusionField::constant(g, 1.0).unwrap(), VelocityField::zero(g))
            .unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let y = random_field(g, &mut rng);
        assert!(set.apply_c(&y).unwrap().values().iter().all(|&x| x == 0.0));
        assert!(set.apply_c0(&y).unwrap().values().iter().all(|&x| x == 0.0));
        assert_eq!(set.apply_a(&y).unwrap(), set.apply_d(&y).unwrap());
    }

    #[test]
    fn convection_of_constant_is_divergence() {
        let g = Grid2D::new(1.0, 1.5, 6, 5).unwrap();
        let set = random_set(g, 5);
        let c = set.apply_c(&GridField::constant(g, 2.0)).unwrap();
        let r = set.reaction(ReactionPart::Full).values();
        for (cy, ri) in c.values().iter().zip(r) {
            assert!((cy - 2.0 * 2.0 * ri).abs() < 1e-12 * (1.0 + ri.abs()));
        }
    }

    #[test]
    fn reaction_parts_recombine() {
        let g = Grid2D::unit(6).unwrap();
        let set = random_set(g, 9);
        let mut rng = ChaCha8Rng::seed_from_u64(10);
        let y = random_field(g, &mut rng);
        let mut sum = set.apply_r(&y, ReactionPart::Plus).unwrap();
        sum.axpy(1.0, &set.apply_r(&y, ReactionPart::Minus).unwrap()).unwrap();
        assert_eq!(sum, set.apply_r(&y, ReactionPart::Full).unwrap());
        let full = set.apply_r(&y, ReactionPart::Full).unwrap();
        for i in 0..g.len() {
            assert_eq!(full.values()[i], set.reaction(ReactionPart::Full).values()[i] * y.values()[i]);
        }
    }

    #[test]
    fn skew_and_symmetry_of_dense_forms() {
        let g = Grid2D::new(1.0, 1.0, 4, 3).unwrap();
        let set = random_set(g, 11);
        let md = dense_of(&set, &Combination { diffusion: 1.0, ..Default::default() });
        let mc0 = dense_of(&set, &Combination { convection_symmetric: 1.0, ..Default::default() });
        let n = g.len();
        for i in 0..n {
            for j in 0..n {
                assert!((md[i][j] - md[j][i]).abs() <= 1e-13);
                assert!((mc0[i][j] + mc0[j][i]).abs() <= 1e-14);
            }
        }
    }

    #[test]
    fn assembled_neumann_laplacian_matches_brute_force() {
        let g = Grid2D::unit(3).unwrap();
        let set = OperatorSet::new(DiffusionField::constant(g, 1.0).unwrap(), VelocityField::zero(g))
            .unwrap();
        let m = set
            .assemble(&Combination { diffusion: 1.0, ..Default::default() })
            .unwrap()
            .to_dense();
        let inv_h2 = 9.0;
        for i in 0..9usize {
            let (a1, a2) = (i % 3, i / 3);
            for j in 0..9usize {
                let (b1, b2) = (j % 3, j / 3);
                let expected = if i == j {
                    let neighbors = [a1 > 0, a1 < 2, a2 > 0, a2 < 2].iter().filter(|&&x| x).count();
                    neighbors as f64 * inv_h2
                } else if a1.abs_diff(b1) + a2.abs_diff(b2) == 1 {
                    -inv_h2
                } else {
                    0.0
                };
                assert!((m.get(i, j) - expected).abs() < 1e-12, "({i},{j})");
            }
        }
    }

    #[test]
    fn identity_combination_assembles_to_identity() {
        let g = Grid2D::unit(4).unwrap();
        let set = random_set(g, 3);
        let m = set.assemble(&Combination::identity()).unwrap().to_dense();
        for i in 0..16 {
            for j in 0..16 {
                assert_eq!(m.get(i, j), if i == j { 1.0 } else { 0.0 });
            }
        }
    }

    #[test]
    fn assembled_matches_matrix_free_action() {
        for (n1, n2, seed) in [(4, 4, 1), (7, 5, 2), (32, 32, 3)] {
            let g = Grid2D::new(1.0, 0.8, n1, n2).unwrap();
            let set = random_set(g, seed);
            let tau = 0.37;
            let combo = Combination {
                identity: 1.0,
                convection_symmetric: tau,
                diffusion: tau,
                reaction_plus: tau,
                ..Default::default()
            };
            let full = Combination {
                identity: 0.5,
                convection: 1.3,
                convection_symmetric: -0.2,
                diffusion: 0.7,
                reaction: 0.1,
                reaction_plus: 0.3,
                reaction_minus: -0.4,
            };
            let mut rng = ChaCha8Rng::seed_from_u64(seed + 100);
            let y = random_field(g, &mut rng);
            for c in [combo, full] {
                let m = set.assemble(&c).unwrap();
                assert!(m.max_row_nnz() <= 5);
                let mv = m.mul_vec(y.values());
                let mf = set.apply(&c, &y).unwrap();
                let scale = mf.max_abs().max(1.0);
                for (a, b) in mv.iter().zip(mf.values()) {
                    assert!((a - b).abs() <= 1e-13 * scale, "{a} vs {b}");
                }
            }
        }
    }

    #[test]
    fn diagonal_set_is_pure_reaction() {
        let g = Grid2D::unit(3).unwrap();
        let r = ReactionField::new(g, vec![-1.5; 9]).unwrap();
        let set = OperatorSet::diagonal(r);
        assert_eq!(set.delta(), 1.5);
        let y = GridField::constant(g, 2.0);
        assert!(set.apply_a(&y).unwrap().values().iter().all(|&x| x == -3.0));
        let m = set.assemble(&Combination::shifted_a(1.0, 2.0)).unwrap();
        assert_eq!(m.nnz(), 9);
        assert!(m.mul_vec(y.values()).iter().all(|&x| x == 2.0 - 6.0));
    }

    #[test]
    fn harmonic_faces_keep_symmetry() {
        let g = Grid2D::unit(5).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        let k = DiffusionField::new(g, (0..25).map(|_| rng.gen_range(0.1..10.0)).collect()).unwrap();
        let set = OperatorSet::with_face_mean(k, VelocityField::zero(g), FaceMean::Harmonic).unwrap();
        let md = dense_of(&set, &Combination { diffusion: 1.0, ..Default::default() });
        for i in 0..25 {
            for j in 0..25 {
                assert!((md[i][j] - md[j][i]).abs() <= 1e-12);
            }
        }
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(64))]

        #[test]
        fn energy_identities(seed in any::<u64>(), n1 in 2usize..12, n2 in 2usize..12) {
            let g = Grid2D::new(1.0, 1.0, n1, n2).unwrap();
            let set = random_set(g, seed);
            let mut rng = ChaCha8Rng::seed_from_u64(seed ^ 0xdead_beef);
            let y = random_field(g, &mut rng);
            let yy = norm(&y).powi(2);

            let dyy = inner_product(&set.apply_d(&y).unwrap(), &y).unwrap();
            prop_assert!(dyy >= -1e-12 * yy);

            let c0yy = inner_product(&set.apply_c0(&y).unwrap(), &y).unwrap();
            prop_assert!(c0yy.abs() <= 1e-12 * yy.max(1.0) * (1.0 + set.delta()));

            let cyy = inner_product(&set.apply_c(&y).unwrap(), &y).unwrap();
            prop_assert!(cyy.abs() <= set.delta() * yy * (1.0 + 1e-10) + 1e-13 * yy);

            // C = C0 + R
            let c = set.apply_c(&y).unwrap();
            let c0 = set.apply_c0(&y).unwrap();
            let r = set.apply_r(&y, ReactionPart::Full).unwrap();
            let scale = y.max_abs();
            for i in 0..g.len() {
                let diff = c.values()[i] - c0.values()[i] - r.values()[i];
                prop_assert!(diff.abs() <= 1e-13 * scale);
            }

            // linearity of A
            let z = random_field(g, &mut rng);
            let mut sum = y.clone();
            sum.axpy(1.0, &z).unwrap();
            let lhs = set.apply_a(&sum).unwrap();
            let mut rhs = set.apply_a(&y).unwrap();
            rhs.axpy(1.0, &set.apply_a(&z).unwrap()).unwrap();
            let s = lhs.max_abs().max(1.0);
            for (a, b) in lhs.values().iter().zip(rhs.values()) {
                prop_assert!((a - b).abs() <= 1e-13 * s);
            }
        }
    }
}
