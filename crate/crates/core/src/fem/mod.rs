//! Structured meshes, Taylor-Hood spaces and operator assembly.

pub mod assembly;
pub mod mesh;
pub mod quadrature;
pub mod space;


pub use assembly::{
    assemble_convection, assemble_convection_first_arg, assemble_divergence, assemble_load,
    assemble_mass, assemble_pressure_mass, assemble_stiffness, pressure_weights,
};
pub use mesh::{build_rect_mesh, BoundaryEdge, BoundaryTag, Mesh, Rect, SideTags};
pub use quadrature::TriangleRule;
pub use space::TaylorHoodSpace;

use crate::linalg::dense::{Cholesky, DMat, SymmetricEigen};
use crate::linalg::sparse::CsrMatrix;
use crate::scalar::Scalar;

/// The time-independent operators of a space, tagged with its fingerprint.
#[derive(Clone, Debug)]
pub struct FemOperators<T> {
    pub fingerprint: u64,
    pub mass: CsrMatrix<T>,
    pub stiffness: CsrMatrix<T>,
    pub divergence: CsrMatrix<T>,
    pub pressure_weights: Vec<T>,
}

impl<T: Scalar> FemOperators<T> {
    pub fn assemble(space: &TaylorHoodSpace<T>) -> Self {
        Self {
            fingerprint: space.fingerprint(),
            mass: assemble_mass(space),
            stiffness: assemble_stiffness(space),
            divergence: assemble_divergence(space),
            pressure_weights: pressure_weights(space),
        }
    }

    pub fn l2_norm(&self, u: &[T]) -> T {
        self.mass.quad_form(u).max(T::zero()).sqrt()
    }

    pub fn h1_semi_norm(&self, u: &[T]) -> T {
        self.stiffness.quad_form(u).max(T::zero()).sqrt()
    }

    /// `‖u‖₁² = uᵀ (M + A) u`.
    pub fn h1_norm_sq(&self, u: &[T]) -> T {
        self.mass.quad_form(u) + self.stiffness.quad_form(u)
    }
}

/// Discrete inf-sup constant on the interior velocity dofs:
/// `β² = min_{q ⊥ 1} (qᵀ B A⁻¹ Bᵀ q) / (qᵀ M_p q)`.
///
/// Dense computation; intended for coarse meshes only.
pub fn inf_sup_constant<T: Scalar>(space: &TaylorHoodSpace<T>) -> T {
    let mask = space.dirichlet_mask();
    let interior: Vec<usize> = (0..space.n_velocity()).filter(|&i| !mask[i]).collect();
    let mut pos = vec![usize::MAX; space.n_velocity()];
    for (k, &i) in interior.iter().enumerate() {
        pos[i] = k;
    }
    let a = assemble_stiffness(space);
    let b = assemble_divergence(space);
    let ni = interior.len();
    let np = space.n_pressure();
    let mut a_i = DMat::zeros(ni, ni);
    for (i, j, v) in a.iter() {
        if pos[i] != usize::MAX && pos[j] != usize::MAX {
            a_i[(pos[i], pos[j])] += v;
        }
    }
    let mut bt = DMat::zeros(ni, np);
    for (q, j, v) in b.iter() {
        if pos[j] != usize::MAX {
            bt[(pos[j], q)] += v;
        }
    }
    let chol = Cholesky::new(&a_i).expect("interior stiffness is SPD");
    let cols: Vec<Vec<T>> = (0..np).map(|q| chol.solve(&bt.column(q))).collect();
    let schur = DMat::from_fn(np, np, |p, q| crate::scalar::dot(&bt.column(p), &cols[q]));
    let mp = assemble_pressure_mass(space).to_dense();
    let lp = Cholesky::new(&mp).expect("pressure mass is SPD");
    // C = L⁻¹ S L⁻ᵀ
    let half: Vec<Vec<T>> = (0..np).map(|q| lp.solve_lower(&schur.column(q))).collect();
    let half_t = DMat::from_fn(np, np, |i, j| half[j][i]);
    let c_cols: Vec<Vec<T>> = (0..np).map(|i| lp.solve_lower(half_t.row(i))).collect();
    let c = DMat::from_fn(np, np, |i, j| c_cols[j][i]);
    let eig = SymmetricEigen::new(&c);
    // The smallest eigenvalue belongs to the constant pressure mode.
    eig.values[np - 2].max(T::zero()).sqrt()
}
