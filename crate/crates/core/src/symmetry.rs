//! Finite groups of signed permutation matrices acting on `ℝⁿ` and on
//! uniform grids.

use std::collections::BTreeSet;

use crate::error::KernelError;
use crate::grid::{Field, UniformGrid};

/// An `n×n` signed permutation matrix, row-major with entries in {-1, 0, 1}.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct SignedPermutation {
    dim: usize,
    entries: Vec<i32>,
}

impl SignedPermutation {
    pub fn new(dim: usize, entries: Vec<i32>) -> Result<Self, KernelError> {
        if entries.len() != dim * dim {
            return Err(KernelError::Generator(format!(
                "expected {} entries, got {}",
                dim * dim,
                entries.len()
            )));
        }
        if entries.iter().any(|v| !(-1..=1).contains(v)) {
            return Err(KernelError::Generator("entries must lie in {-1, 0, 1}".into()));
        }
        // Orthogonal with integer entries means exactly one nonzero per row and column.
        for i in 0..dim {
            let row = (0..dim).filter(|&j| entries[i * dim + j] != 0).count();
            let col = (0..dim).filter(|&j| entries[j * dim + i] != 0).count();
            if row != 1 || col != 1 {
                return Err(KernelError::Generator("matrix is not orthogonal".into()));
            }
        }
        Ok(Self { dim, entries })
    }

    pub fn identity(dim: usize) -> Self {
        let mut entries = vec![0; dim * dim];
        for i in 0..dim {
            entries[i * dim + i] = 1;
        }
        Self { dim, entries }
    }

    /// Reflection `x_axis ↦ -x_axis`.
    pub fn reflection(dim: usize, axis: usize) -> Self {
        let mut g = Self::identity(dim);
        g.entries[axis * dim + axis] = -1;
        g
    }

    pub fn negation(dim: usize) -> Self {
        let mut g = Self::identity(dim);
        for v in g.entries.iter_mut() {
            *v = -*v;
        }
        g
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn entry(&self, i: usize, j: usize) -> i32 {
        self.entries[i * self.dim + j]
    }

    pub fn compose(&self, other: &Self) -> Self {
        let n = self.dim;
        let mut entries = vec![0; n * n];
        for i in 0..n {
            for j in 0..n {
                entries[i * n + j] = (0..n).map(|l| self.entry(i, l) * other.entry(l, j)).sum();
            }
        }
        Self { dim: n, entries }
    }

    pub fn apply(&self, x: &[f64]) -> Vec<f64> {
        (0..self.dim)
            .map(|i| (0..self.dim).map(|j| self.entry(i, j) as f64 * x[j]).sum())
            .collect()
    }

    pub fn apply_int(&self, x: &[i64]) -> Vec<i64> {
        (0..self.dim)
            .map(|i| (0..self.dim).map(|j| self.entry(i, j) as i64 * x[j]).sum())
            .collect()
    }

    pub fn to_matrix(&self) -> nalgebra::DMatrix<f64> {
        nalgebra::DMatrix::from_fn(self.dim, self.dim, |i, j| self.entry(i, j) as f64)
    }
}

/// A finite group generated by signed permutations.
#[derive(Debug, Clone, PartialEq)]
pub struct SymmetryGroup {
    dim: usize,
    generators: Vec<SignedPermutation>,
    elements: Vec<SignedPermutation>,
}

impl SymmetryGroup {
    pub fn new(dim: usize, generators: Vec<SignedPermutation>) -> Result<Self, KernelError> {
        if let Some(g) = generators.iter().find(|g| g.dim() != dim) {
            return Err(KernelError::Generator(format!(
                "generator of dimension {} in a group acting on dimension {dim}",
                g.dim()
            )));
        }
        let mut seen: BTreeSet<SignedPermutation> = BTreeSet::new();
        let mut frontier = vec![SignedPermutation::identity(dim)];
        seen.insert(SignedPermutation::identity(dim));
        while let Some(g) = frontier.pop() {
            for s in &generators {
                let h = s.compose(&g);
                if seen.insert(h.clone()) {
                    frontier.push(h);
                }
            }
        }
        Ok(Self {
            dim,
            generators,
            elements: seen.into_iter().collect(),
        })
    }

    /// Parses generators given as nested integer rows.
    pub fn from_rows(dim: usize, generators: &[Vec<Vec<i32>>]) -> Result<Self, KernelError> {
        let gens = generators
            .iter()
            .map(|rows| SignedPermutation::new(dim, rows.iter().flatten().copied().collect()))
            .collect::<Result<Vec<_>, _>>()?;
        Self::new(dim, gens)
    }

    pub fn trivial(dim: usize) -> Self {
        Self::new(dim, Vec::new()).expect("identity group")
    }

    /// `{±id}`.
    pub fn plus_minus(dim: usize) -> Self {
        Self::new(dim, vec![SignedPermutation::negation(dim)]).expect("valid generator")
    }

    /// Group generated by the coordinate reflections.
    pub fn axis_reflections(dim: usize) -> Self {
        let gens = (0..dim).map(|a| SignedPermutation::reflection(dim, a)).collect();
        Self::new(dim, gens).expect("valid generators")
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn generators(&self) -> &[SignedPermutation] {
        &self.generators
    }

    pub fn elements(&self) -> &[SignedPermutation] {
        &self.elements
    }

    pub fn order(&self) -> usize {
        self.elements.len()
    }

    pub fn contains_negation(&self) -> bool {
        self.elements.contains(&SignedPermutation::negation(self.dim))
    }

    /// Dimension of the common fixed subspace, from the rank of `Σ_γ (γ - I)`.
    pub fn fixed_dimension(&self) -> usize {
        let n = self.dim;
        let mut sum = nalgebra::DMatrix::<f64>::zeros(n, n);
        for g in &self.elements {
            sum += g.to_matrix() - nalgebra::DMatrix::<f64>::identity(n, n);
        }
        let rank = sum.svd(false, false).singular_values.iter().filter(|s| **s > 1e-9).count();
        n - rank
    }

    /// Rejects groups whose fixed subspace is nontrivial.
    pub fn check_fixed_space(&self) -> Result<(), KernelError> {
        match self.fixed_dimension() {
            0 => Ok(()),
            d => Err(KernelError::NontrivialFixedSpace(d)),
        }
    }

    /// Node index of `γ·x_m`, treating the grid as centered at node `N/2`.
    pub fn node_image(grid: &UniformGrid, g: &SignedPermutation, flat: usize) -> usize {
        let n = grid.points() as i64;
        let idx = grid.multi_index(flat);
        let centered: Vec<i64> = (0..grid.dim()).map(|a| idx[a] as i64 - n / 2).collect();
        let image = g.apply_int(&centered);
        let wrapped: Vec<usize> = image.iter().map(|s| (s + n / 2).rem_euclid(n) as usize).collect();
        grid.flat_index(&wrapped)
    }

    /// `(γ·f)(x) = f(γx)` on every component.
    pub fn act(&self, g: &SignedPermutation, f: &Field) -> Field {
        let grid = f.grid();
        let n = grid.node_count();
        let map: Vec<usize> = (0..n).map(|m| Self::node_image(grid, g, m)).collect();
        let values: Vec<f64> = (0..f.components())
            .flat_map(|c| {
                let comp = f.component(c);
                map.iter().map(move |&i| comp[i])
            })
            .collect();
        Field::new(grid, f.components(), values).expect("same shape")
    }

    /// Group average `(1/|Γ|) Σ_γ f(γ·)` applied to a raw scalar array.
    pub fn project_values(&self, grid: &UniformGrid, values: &[f64]) -> Vec<f64> {
        if self.order() == 1 {
            return values.to_vec();
        }
        let n = grid.node_count();
        let mut out = vec![0.0; values.len()];
        let comps = values.len() / n;
        for g in &self.elements {
            for m in 0..n {
                let src = Self::node_image(grid, g, m);
                for c in 0..comps {
                    out[c * n + m] += values[c * n + src];
                }
            }
        }
        let w = 1.0 / self.order() as f64;
        out.iter_mut().for_each(|v| *v *= w);
        out
    }

    pub fn project(&self, f: &Field) -> Field {
        let values = self.project_values(f.grid(), f.values());
        Field::new(f.grid(), f.components(), values).expect("same shape")
    }

    /// Largest `|f(γx) - f(x)|` over elements and nodes.
    pub fn deviation(&self, f: &Field) -> f64 {
        self.elements
            .iter()
            .map(|g| {
                let h = self.act(g, f);
                h.values()
                    .iter()
                    .zip(f.values())
                    .fold(0.0_f64, |m, (a, b)| m.max((a - b).abs()))
            })
            .fold(0.0, f64::max)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::grid::make_grid;

    #[test]
    fn closure_orders() {
        assert_eq!(SymmetryGroup::trivial(2).order(), 1);
        assert_eq!(SymmetryGroup::plus_minus(3).order(), 2);
        assert_eq!(SymmetryGroup::axis_reflections(2).order(), 4);
        let swap = SignedPermutation::new(2, vec![0, 1, 1, 0]).unwrap();
        let g = SymmetryGroup::new(2, vec![swap, SignedPermutation::reflection(2, 0)]).unwrap();
        assert_eq!(g.order(), 8);
    }

    #[test]
    fn fixed_space() {
        assert_eq!(SymmetryGroup::trivial(2).fixed_dimension(), 2);
        assert_eq!(SymmetryGroup::plus_minus(2).fixed_dimension(), 0);
        let one_axis = SymmetryGroup::new(2, vec![SignedPermutation::reflection(2, 0)]).unwrap();
        assert_eq!(one_axis.fixed_dimension(), 1);
        assert_eq!(
            SymmetryGroup::trivial(1).check_fixed_space(),
            Err(KernelError::NontrivialFixedSpace(1))
        );
    }

    #[test]
    fn rejects_bad_generators() {
        assert!(SignedPermutation::new(2, vec![1, 1, 0, 1]).is_err());
        assert!(SignedPermutation::new(2, vec![2, 0, 0, 1]).is_err());
        assert!(SignedPermutation::new(2, vec![1, 0, 0]).is_err());
    }

    #[test]
    fn projection_symmetrizes() {
        let grid = make_grid(2, 4.0, 16).unwrap();
        let f = Field::from_fn(&grid, |x| (x[0] - 0.5).exp() * (1.0 + x[1]));
        let g = SymmetryGroup::axis_reflections(2);
        let p = g.project(&f);
        assert!(g.deviation(&p) < 1e-14);
        let pp = g.project(&p);
        for (a, b) in pp.values().iter().zip(p.values()) {
            assert!((a - b).abs() < 1e-14);
        }
        let even = Field::from_fn(&grid, |x| (-x[0] * x[0] - x[1] * x[1]).exp());
        assert!(g.deviation(&even) < 1e-15);
    }
}
