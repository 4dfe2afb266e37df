//! Taylor-Hood P2/P1 degree-of-freedom maps.

use std::collections::HashMap;
use std::hash::Hasher;

use fnv::FnvHasher;

use crate::fem::mesh::{BoundaryTag, Mesh};
use crate::scalar::Scalar;

/// Velocity polynomial degree.
pub const VELOCITY_DEGREE: usize = 2;
/// Pressure polynomial degree.
pub const PRESSURE_DEGREE: usize = VELOCITY_DEGREE - 1;

/// Continuous P2 velocity / P1 pressure space on a triangulation.
///
/// P2 nodes (vertices and edge midpoints) are ordered lexicographically by
/// `(y, x)`, which keeps saddle-point matrices narrowly banded on
/// structured meshes. Velocity dofs are interleaved per node: dof
/// `2 * node + c` is component `c` at `node`. Pressure dofs coincide with
/// mesh vertices.
#[derive(Clone, Debug)]
pub struct TaylorHoodSpace<T> {
    mesh: Mesh<T>,
    p2_coords: Vec<[T; 2]>,
    elem_nodes: Vec<[usize; 6]>,
    vertex_node: Vec<usize>,
    node_vertex: Vec<Option<usize>>,
    node_tag: Vec<Option<BoundaryTag>>,
    dirichlet: Vec<bool>,
    fingerprint: u64,
}

impl<T: Scalar> TaylorHoodSpace<T> {
    pub fn new(mesh: Mesh<T>) -> Self {
        let nv = mesh.n_nodes();
        let half = T::lit(0.5);
        // Provisional numbering: vertices first, then edges in discovery order.
        let mut coords: Vec<[T; 2]> = mesh.nodes().to_vec();
        let mut edge_id: HashMap<(usize, usize), usize> = HashMap::new();
        let mut elem_nodes = Vec::with_capacity(mesh.n_triangles());
        for tri in mesh.triangles() {
            let mut local = [tri[0], tri[1], tri[2], 0, 0, 0];
            for (slot, (a, b)) in [(tri[0], tri[1]), (tri[1], tri[2]), (tri[2], tri[0])]
                .into_iter()
                .enumerate()
            {
                let key = if a < b { (a, b) } else { (b, a) };
                let id = *edge_id.entry(key).or_insert_with(|| {
                    let pa = mesh.nodes()[a];
                    let pb = mesh.nodes()[b];
                    coords.push([(pa[0] + pb[0]) * half, (pa[1] + pb[1]) * half]);
                    coords.len() - 1
                });
                local[3 + slot] = id;
            }
            elem_nodes.push(local);
        }
        let n_nodes = coords.len();
        let mut order: Vec<usize> = (0..n_nodes).collect();
        order.sort_by(|&i, &j| {
            let (a, b) = (coords[i], coords[j]);
            a[1].partial_cmp(&b[1])
                .unwrap_or(std::cmp::Ordering::Equal)
                .then(a[0].partial_cmp(&b[0]).unwrap_or(std::cmp::Ordering::Equal))
                .then(i.cmp(&j))
        });
        let mut new_id = vec![0usize; n_nodes];
        for (new, &old) in order.iter().enumerate() {
            new_id[old] = new;
        }
        let p2_coords: Vec<[T; 2]> = order.iter().map(|&o| coords[o]).collect();
        for e in &mut elem_nodes {
            for v in e.iter_mut() {
                *v = new_id[*v];
            }
        }
        let vertex_node: Vec<usize> = (0..nv).map(|v| new_id[v]).collect();
        let mut node_vertex = vec![None; n_nodes];
        for (v, &n) in vertex_node.iter().enumerate() {
            node_vertex[n] = Some(v);
        }
        let mut node_tag: Vec<Option<BoundaryTag>> = vec![None; n_nodes];
        for be in mesh.boundary() {
            let [a, b] = be.nodes;
            let key = if a < b { (a, b) } else { (b, a) };
            let mid = new_id[edge_id[&key]];
            for n in [vertex_node[a], vertex_node[b], mid] {
                node_tag[n].get_or_insert(be.tag);
            }
        }
        let dirichlet = node_tag
            .iter()
            .flat_map(|t| [t.is_some(), t.is_some()])
            .collect();
        let mut space = Self {
            mesh,
            p2_coords,
            elem_nodes,
            vertex_node,
            node_vertex,
            node_tag,
            dirichlet,
            fingerprint: 0,
        };
        space.fingerprint = space.compute_fingerprint();
        space
    }

    fn compute_fingerprint(&self) -> u64 {
        let mut h = FnvHasher::default();
        h.write(b"taylor-hood-p2p1");
        h.write_u64(self.mesh.n_nodes() as u64);
        for p in self.mesh.nodes() {
            h.write_u64(p[0].as_f64().to_bits());
            h.write_u64(p[1].as_f64().to_bits());
        }
        for t in self.mesh.triangles() {
            for &v in t {
                h.write_u64(v as u64);
            }
        }
        for be in self.mesh.boundary() {
            h.write_u64(be.nodes[0] as u64);
            h.write_u64(be.nodes[1] as u64);
            h.write_u8(be.tag.code());
        }
        for e in &self.elem_nodes {
            for &n in e {
                h.write_u64(n as u64);
            }
        }
        h.finish()
    }

    pub fn mesh(&self) -> &Mesh<T> {
        &self.mesh
    }

    /// 64-bit content hash of the mesh and dof maps.
    pub fn fingerprint(&self) -> u64 {
        self.fingerprint
    }

    pub fn n_nodes(&self) -> usize {
        self.p2_coords.len()
    }

    pub fn n_velocity(&self) -> usize {
        2 * self.p2_coords.len()
    }

    pub fn n_pressure(&self) -> usize {
        self.mesh.n_nodes()
    }

    #[inline]
    pub fn velocity_dof(node: usize, comp: usize) -> usize {
        2 * node + comp
    }

    pub fn node_coords(&self) -> &[[T; 2]] {
        &self.p2_coords
    }

    /// P2 node indices of element `k`: three vertices, then the midpoints of
    /// edges (0,1), (1,2), (2,0).
    pub fn element_nodes(&self, k: usize) -> &[usize; 6] {
        &self.elem_nodes[k]
    }

    /// Pressure dofs of element `k` (its vertices).
    pub fn element_pressure(&self, k: usize) -> &[usize; 3] {
        &self.mesh.triangles()[k]
    }

    pub fn vertex_node(&self, v: usize) -> usize {
        self.vertex_node[v]
    }

    pub fn node_vertex(&self, node: usize) -> Option<usize> {
        self.node_vertex[node]
    }

    pub fn node_tag(&self, node: usize) -> Option<BoundaryTag> {
        self.node_tag[node]
    }

    /// One flag per velocity dof: true on boundary nodes.
    pub fn dirichlet_mask(&self) -> &[bool] {
        &self.dirichlet
    }

    pub fn n_dirichlet(&self) -> usize {
        self.dirichlet.iter().filter(|&&d| d).count()
    }

    /// Nodal interpolant of a vector field.
    pub fn interpolate(&self, f: impl Fn([T; 2]) -> [T; 2]) -> Vec<T> {
        let mut u = vec![T::zero(); self.n_velocity()];
        for (n, &x) in self.p2_coords.iter().enumerate() {
            let v = f(x);
            u[2 * n] = v[0];
            u[2 * n + 1] = v[1];
        }
        u
    }

    /// Nodal P1 interpolant of a scalar (pressure) field.
    pub fn interpolate_pressure(&self, f: impl Fn([T; 2]) -> T) -> Vec<T> {
        self.mesh.nodes().iter().map(|&x| f(x)).collect()
    }
}
