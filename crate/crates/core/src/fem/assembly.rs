//! Element loops for the Taylor-Hood operators.
//!
//! Every operator is assembled with the same degree-5 rule, which integrates
//! all P2 x P2 x ∇P2 products exactly on affine triangles.

use crate::fem::quadrature::TriangleRule;
use crate::fem::space::TaylorHoodSpace;
use crate::linalg::sparse::{CsrMatrix, TripletBuilder};
use crate::scalar::Scalar;

/// P2 shape values and reference gradients at `(ξ, η)`.
pub fn p2_shape<T: Scalar>(xi: T, eta: T) -> ([T; 6], [[T; 2]; 6]) {
    let one = T::one();
    let two = T::lit(2.0);
    let four = T::lit(4.0);
    let l = [one - xi - eta, xi, eta];
    let dl = [[-one, -one], [one, T::zero()], [T::zero(), one]];
    let mut phi = [T::zero(); 6];
    let mut dphi = [[T::zero(); 2]; 6];
    for i in 0..3 {
        phi[i] = l[i] * (two * l[i] - one);
        for d in 0..2 {
            dphi[i][d] = (four * l[i] - one) * dl[i][d];
        }
    }
    for (m, (a, b)) in [(3, (0, 1)), (4, (1, 2)), (5, (2, 0))] {
        phi[m] = four * l[a] * l[b];
        for d in 0..2 {
            dphi[m][d] = four * (l[a] * dl[b][d] + l[b] * dl[a][d]);
        }
    }
    (phi, dphi)
}

/// P1 shape values (barycentric coordinates) at `(ξ, η)`.
#[inline]
pub fn p1_shape<T: Scalar>(xi: T, eta: T) -> [T; 3] {
    [T::one() - xi - eta, xi, eta]
}

/// Shape functions tabulated at the points of a rule.
#[derive(Clone, Debug)]
pub struct Tabulation<T> {
    pub rule: TriangleRule<T>,
    pub phi: Vec<[T; 6]>,
    pub dphi_ref: Vec<[[T; 2]; 6]>,
    pub psi: Vec<[T; 3]>,
}

impl<T: Scalar> Tabulation<T> {
    pub fn new(rule: TriangleRule<T>) -> Self {
        let mut phi = Vec::with_capacity(rule.len());
        let mut dphi_ref = Vec::with_capacity(rule.len());
        let mut psi = Vec::with_capacity(rule.len());
        for p in &rule.points {
            let (v, g) = p2_shape(p[0], p[1]);
            phi.push(v);
            dphi_ref.push(g);
            psi.push(p1_shape(p[0], p[1]));
        }
        Self {
            rule,
            phi,
            dphi_ref,
            psi,
        }
    }

    pub fn standard() -> Self {
        Self::new(TriangleRule::degree5())
    }
}

/// Affine map of one triangle.
#[derive(Clone, Copy, Debug)]
pub struct ElementGeometry<T> {
    origin: [T; 2],
    jac: [[T; 2]; 2],
    det: T,
}

impl<T: Scalar> ElementGeometry<T> {
    pub fn new(space: &TaylorHoodSpace<T>, k: usize) -> Self {
        let tri = space.mesh().triangles()[k];
        let x = space.mesh().nodes();
        let (p0, p1, p2) = (x[tri[0]], x[tri[1]], x[tri[2]]);
        let jac = [[p1[0] - p0[0], p2[0] - p0[0]], [p1[1] - p0[1], p2[1] - p0[1]]];
        let det = jac[0][0] * jac[1][1] - jac[0][1] * jac[1][0];
        Self {
            origin: p0,
            jac,
            det,
        }
    }

    /// `|det J|`, twice the element area.
    #[inline]
    pub fn det(&self) -> T {
        self.det.abs()
    }

    #[inline]
    pub fn map(&self, p: [T; 2]) -> [T; 2] {
        [
            self.origin[0] + self.jac[0][0] * p[0] + self.jac[0][1] * p[1],
            self.origin[1] + self.jac[1][0] * p[0] + self.jac[1][1] * p[1],
        ]
    }

    /// Physical gradient from a reference gradient: `J^{-T} ĝ`.
    #[inline]
    pub fn grad(&self, g: [T; 2]) -> [T; 2] {
        let j = &self.jac;
        [
            (j[1][1] * g[0] - j[1][0] * g[1]) / self.det,
            (-j[0][1] * g[0] + j[0][0] * g[1]) / self.det,
        ]
    }

    pub fn grads(&self, dref: &[[T; 2]; 6]) -> [[T; 2]; 6] {
        let mut out = [[T::zero(); 2]; 6];
        for (o, g) in out.iter_mut().zip(dref) {
            *o = self.grad(*g);
        }
        out
    }
}

/// Value and gradient of a P2 vector field at one quadrature point.
#[inline]
pub fn eval_field<T: Scalar>(
    u: &[T],
    nodes: &[usize; 6],
    phi: &[T; 6],
    grads: &[[T; 2]; 6],
) -> ([T; 2], [[T; 2]; 2]) {
    let mut val = [T::zero(); 2];
    let mut grad = [[T::zero(); 2]; 2];
    for a in 0..6 {
        for c in 0..2 {
            let ua = u[2 * nodes[a] + c];
            val[c] += ua * phi[a];
            grad[c][0] += ua * grads[a][0];
            grad[c][1] += ua * grads[a][1];
        }
    }
    (val, grad)
}

/// Velocity mass matrix: `vᵀ M u = ∫ u·v`.
pub fn assemble_mass<T: Scalar>(space: &TaylorHoodSpace<T>) -> CsrMatrix<T> {
    assemble_mass_with(space, &Tabulation::<T>::standard())
}

pub fn assemble_mass_with<T: Scalar>(space: &TaylorHoodSpace<T>, tab: &Tabulation<T>) -> CsrMatrix<T> {
    let n = space.n_velocity();
    let ne = space.mesh().n_triangles();
    let mut b = TripletBuilder::with_capacity(n, n, ne * 72);
    for k in 0..ne {
        let geo = ElementGeometry::new(space, k);
        let nodes = space.element_nodes(k);
        let mut local = [[T::zero(); 6]; 6];
        for (q, w) in tab.rule.weights.iter().enumerate() {
            let wq = *w * geo.det();
            let phi = &tab.phi[q];
            for i in 0..6 {
                for j in 0..6 {
                    local[i][j] += wq * phi[i] * phi[j];
                }
            }
        }
        push_vector_block(&mut b, nodes, &local);
    }
    b.build()
}

/// Velocity stiffness matrix: `vᵀ A u = ∫ ∇u : ∇v`.
pub fn assemble_stiffness<T: Scalar>(space: &TaylorHoodSpace<T>) -> CsrMatrix<T> {
    assemble_stiffness_with(space, &Tabulation::<T>::standard())
}

pub fn assemble_stiffness_with<T: Scalar>(
    space: &TaylorHoodSpace<T>,
    tab: &Tabulation<T>,
) -> CsrMatrix<T> {
    let n = space.n_velocity();
    let ne = space.mesh().n_triangles();
    let mut b = TripletBuilder::with_capacity(n, n, ne * 72);
    for k in 0..ne {
        let geo = ElementGeometry::new(space, k);
        let nodes = space.element_nodes(k);
        let mut local = [[T::zero(); 6]; 6];
        for (q, w) in tab.rule.weights.iter().enumerate() {
            let wq = *w * geo.det();
            let g = geo.grads(&tab.dphi_ref[q]);
            for i in 0..6 {
                for j in 0..6 {
                    local[i][j] += wq * (g[i][0] * g[j][0] + g[i][1] * g[j][1]);
                }
            }
        }
        push_vector_block(&mut b, nodes, &local);
    }
    b.build()
}

/// Divergence matrix `(B v)_q = ∫ q ∇·v`, of size `n_pressure x n_velocity`.
pub fn assemble_divergence<T: Scalar>(space: &TaylorHoodSpace<T>) -> CsrMatrix<T> {
    let tab = Tabulation::<T>::standard();
    let (np, nu) = (space.n_pressure(), space.n_velocity());
    let ne = space.mesh().n_triangles();
    let mut b = TripletBuilder::with_capacity(np, nu, ne * 36);
    for k in 0..ne {
        let geo = ElementGeometry::new(space, k);
        let nodes = space.element_nodes(k);
        let pdofs = space.element_pressure(k);
        let mut local = [[[T::zero(); 2]; 6]; 3];
        for (q, w) in tab.rule.weights.iter().enumerate() {
            let wq = *w * geo.det();
            let g = geo.grads(&tab.dphi_ref[q]);
            for i in 0..3 {
                for a in 0..6 {
                    for c in 0..2 {
                        local[i][a][c] += wq * tab.psi[q][i] * g[a][c];
                    }
                }
            }
        }
        for i in 0..3 {
            for a in 0..6 {
                for c in 0..2 {
                    b.push(pdofs[i], 2 * nodes[a] + c, local[i][a][c]);
                }
            }
        }
    }
    b.build()
}

/// P1 pressure mass matrix.
pub fn assemble_pressure_mass<T: Scalar>(space: &TaylorHoodSpace<T>) -> CsrMatrix<T> {
    let tab = Tabulation::<T>::standard();
    let np = space.n_pressure();
    let ne = space.mesh().n_triangles();
    let mut b = TripletBuilder::with_capacity(np, np, ne * 9);
    for k in 0..ne {
        let geo = ElementGeometry::new(space, k);
        let p = space.element_pressure(k);
        for (q, w) in tab.rule.weights.iter().enumerate() {
            let wq = *w * geo.det();
            for i in 0..3 {
                for j in 0..3 {
                    b.push(p[i], p[j], wq * tab.psi[q][i] * tab.psi[q][j]);
                }
            }
        }
    }
    b.build()
}

/// `∫ q` for every pressure basis function.
pub fn pressure_weights<T: Scalar>(space: &TaylorHoodSpace<T>) -> Vec<T> {
    let mut m = vec![T::zero(); space.n_pressure()];
    let third = T::one() / T::lit(3.0);
    for k in 0..space.mesh().n_triangles() {
        let area = space.mesh().triangle_area(k);
        for &v in space.element_pressure(k) {
            m[v] += area * third;
        }
    }
    m
}

/// Skew-symmetric convection matrix: `vᵀ N(w) u = b(w, u, v) = ½((w·∇u, v) − (w·∇v, u))`.
pub fn assemble_convection<T: Scalar>(space: &TaylorHoodSpace<T>, w: &[T]) -> CsrMatrix<T> {
    assemble_convection_with(space, w, &Tabulation::<T>::standard())
}

pub fn assemble_convection_with<T: Scalar>(
    space: &TaylorHoodSpace<T>,
    w: &[T],
    tab: &Tabulation<T>,
) -> CsrMatrix<T> {
    assert_eq!(w.len(), space.n_velocity());
    let n = space.n_velocity();
    let ne = space.mesh().n_triangles();
    let half = T::lit(0.5);
    let mut b = TripletBuilder::with_capacity(n, n, ne * 72);
    for k in 0..ne {
        let geo = ElementGeometry::new(space, k);
        let nodes = space.element_nodes(k);
        // adv[i][j] = ∫ (w·∇φ_j) φ_i
        let mut adv = [[T::zero(); 6]; 6];
        for (q, wt) in tab.rule.weights.iter().enumerate() {
            let wq = *wt * geo.det();
            let g = geo.grads(&tab.dphi_ref[q]);
            let (wv, _) = eval_field(w, nodes, &tab.phi[q], &g);
            for j in 0..6 {
                let wdg = wv[0] * g[j][0] + wv[1] * g[j][1];
                for i in 0..6 {
                    adv[i][j] += wq * wdg * tab.phi[q][i];
                }
            }
        }
        let mut local = [[T::zero(); 6]; 6];
        for i in 0..6 {
            for j in 0..6 {
                local[i][j] = half * (adv[i][j] - adv[j][i]);
            }
        }
        push_vector_block(&mut b, nodes, &local);
    }
    b.build()
}

/// Linearization in the first slot: `vᵀ N₁(u) δ = b(δ, u, v)`.
///
/// The Jacobian of `u ↦ N(u) u` is `N(u) + N₁(u)`.
pub fn assemble_convection_first_arg<T: Scalar>(space: &TaylorHoodSpace<T>, u: &[T]) -> CsrMatrix<T> {
    let tab = Tabulation::<T>::standard();
    assert_eq!(u.len(), space.n_velocity());
    let n = space.n_velocity();
    let ne = space.mesh().n_triangles();
    let half = T::lit(0.5);
    let mut b = TripletBuilder::with_capacity(n, n, ne * 144);
    for k in 0..ne {
        let geo = ElementGeometry::new(space, k);
        let nodes = space.element_nodes(k);
        // local[(i,c)][(j,d)] = ½ ∫ φ_j (∂_d u_c) φ_i − φ_j (∂_d φ_i) u_c
        let mut local = [[[[T::zero(); 2]; 6]; 2]; 6];
        for (q, wt) in tab.rule.weights.iter().enumerate() {
            let wq = *wt * geo.det();
            let g = geo.grads(&tab.dphi_ref[q]);
            let phi = &tab.phi[q];
            let (uv, ug) = eval_field(u, nodes, phi, &g);
            for i in 0..6 {
                for c in 0..2 {
                    for j in 0..6 {
                        for d in 0..2 {
                            local[i][c][j][d] +=
                                wq * half * phi[j] * (ug[c][d] * phi[i] - g[i][d] * uv[c]);
                        }
                    }
                }
            }
        }
        for i in 0..6 {
            for c in 0..2 {
                for j in 0..6 {
                    for d in 0..2 {
                        b.push(2 * nodes[i] + c, 2 * nodes[j] + d, local[i][c][j][d]);
                    }
                }
            }
        }
    }
    b.build()
}

/// Element-by-element entries of the convection Jacobian `N(u) + N₁(u)`,
/// passed to `sink(row, col, value)` without forming a global matrix.
pub fn for_each_convection_jacobian_entry<T: Scalar>(
    space: &TaylorHoodSpace<T>,
    u: &[T],
    mut sink: impl FnMut(usize, usize, T),
) {
    let tab = Tabulation::<T>::standard();
    let half = T::lit(0.5);
    for k in 0..space.mesh().n_triangles() {
        let geo = ElementGeometry::new(space, k);
        let nodes = space.element_nodes(k);
        let mut local = [[[[T::zero(); 2]; 6]; 2]; 6];
        for (q, wt) in tab.rule.weights.iter().enumerate() {
            let wq = *wt * geo.det() * half;
            let g = geo.grads(&tab.dphi_ref[q]);
            let phi = &tab.phi[q];
            let (uv, ug) = eval_field(u, nodes, phi, &g);
            for i in 0..6 {
                let udgi = uv[0] * g[i][0] + uv[1] * g[i][1];
                for j in 0..6 {
                    let udgj = uv[0] * g[j][0] + uv[1] * g[j][1];
                    // N(u): ½ ((u·∇φ_j) φ_i − (u·∇φ_i) φ_j) on matching components
                    let skew = wq * (udgj * phi[i] - udgi * phi[j]);
                    for c in 0..2 {
                        local[i][c][j][c] += skew;
                        for d in 0..2 {
                            local[i][c][j][d] += wq * phi[j] * (ug[c][d] * phi[i] - g[i][d] * uv[c]);
                        }
                    }
                }
            }
        }
        for i in 0..6 {
            for c in 0..2 {
                for j in 0..6 {
                    for d in 0..2 {
                        sink(2 * nodes[i] + c, 2 * nodes[j] + d, local[i][c][j][d]);
                    }
                }
            }
        }
    }
}

/// Load vector `F_i = ∫ f·φ_i`.
pub fn assemble_load<T: Scalar>(space: &TaylorHoodSpace<T>, f: impl Fn([T; 2]) -> [T; 2]) -> Vec<T> {
    let tab = Tabulation::<T>::standard();
    let mut out = vec![T::zero(); space.n_velocity()];
    for k in 0..space.mesh().n_triangles() {
        let geo = ElementGeometry::new(space, k);
        let nodes = space.element_nodes(k);
        for (q, wt) in tab.rule.weights.iter().enumerate() {
            let wq = *wt * geo.det();
            let fx = f(geo.map(tab.rule.points[q]));
            for a in 0..6 {
                for c in 0..2 {
                    out[2 * nodes[a] + c] += wq * fx[c] * tab.phi[q][a];
                }
            }
        }
    }
    out
}

fn push_vector_block<T: Scalar>(b: &mut TripletBuilder<T>, nodes: &[usize; 6], local: &[[T; 6]; 6]) {
    for i in 0..6 {
        for j in 0..6 {
            let v = local[i][j];
            for c in 0..2 {
                b.push(2 * nodes[i] + c, 2 * nodes[j] + c, v);
            }
        }
    }
}

/// L² and H¹-seminorm distance between a discrete field and an analytic one.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct FieldError<T> {
    pub l2: T,
    pub h1_semi: T,
}

pub fn velocity_error<T: Scalar>(
    space: &TaylorHoodSpace<T>,
    u: &[T],
    exact: impl Fn([T; 2]) -> [T; 2],
    exact_grad: impl Fn([T; 2]) -> [[T; 2]; 2],
    rule: TriangleRule<T>,
) -> FieldError<T> {
    let tab = Tabulation::new(rule);
    let (mut l2, mut h1) = (T::zero(), T::zero());
    for k in 0..space.mesh().n_triangles() {
        let geo = ElementGeometry::new(space, k);
        let nodes = space.element_nodes(k);
        for (q, wt) in tab.rule.weights.iter().enumerate() {
            let wq = *wt * geo.det();
            let g = geo.grads(&tab.dphi_ref[q]);
            let (v, dv) = eval_field(u, nodes, &tab.phi[q], &g);
            let x = geo.map(tab.rule.points[q]);
            let e = exact(x);
            let de = exact_grad(x);
            for c in 0..2 {
                l2 += wq * (v[c] - e[c]).powi(2);
                for d in 0..2 {
                    h1 += wq * (dv[c][d] - de[c][d]).powi(2);
                }
            }
        }
    }
    FieldError {
        l2: l2.sqrt(),
        h1_semi: h1.sqrt(),
    }
}

/// L² distance between a P1 pressure and an analytic one.
pub fn pressure_error<T: Scalar>(
    space: &TaylorHoodSpace<T>,
    p: &[T],
    exact: impl Fn([T; 2]) -> T,
    rule: TriangleRule<T>,
) -> T {
    let tab = Tabulation::new(rule);
    let mut l2 = T::zero();
    for k in 0..space.mesh().n_triangles() {
        let geo = ElementGeometry::new(space, k);
        let pd = space.element_pressure(k);
        for (q, wt) in tab.rule.weights.iter().enumerate() {
            let wq = *wt * geo.det();
            let ph: T = (0..3).map(|i| p[pd[i]] * tab.psi[q][i]).sum();
            l2 += wq * (ph - exact(geo.map(tab.rule.points[q]))).powi(2);
        }
    }
    l2.sqrt()
}

/// Gradient of a P2 vector field at every quadrature point of every element,
/// laid out as `[element][point]`, together with the quadrature weights
/// (including `|det J|`).
pub fn sample_gradients<T: Scalar>(
    space: &TaylorHoodSpace<T>,
    u: &[T],
    tab: &Tabulation<T>,
) -> (Vec<[[T; 2]; 2]>, Vec<T>) {
    let ne = space.mesh().n_triangles();
    let nq = tab.rule.len();
    let mut grads = Vec::with_capacity(ne * nq);
    let mut weights = Vec::with_capacity(ne * nq);
    for k in 0..ne {
        let geo = ElementGeometry::new(space, k);
        let nodes = space.element_nodes(k);
        for (q, wt) in tab.rule.weights.iter().enumerate() {
            let g = geo.grads(&tab.dphi_ref[q]);
            let (_, du) = eval_field(u, nodes, &tab.phi[q], &g);
            grads.push(du);
            weights.push(*wt * geo.det());
        }
    }
    (grads, weights)
}
