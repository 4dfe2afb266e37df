//! Structured triangulations of rectangles.

use std::collections::HashMap;

use serde::{Deserialize, Serialize};

use crate::error::MeshError;
use crate::scalar::Scalar;

/// Boundary condition class of a boundary edge. Every class is imposed as
/// Dirichlet data; the tag selects which data a problem supplies.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum BoundaryTag {
    Wall,
    Inflow,
    Outflow,
    ExactDirichlet,
}

impl BoundaryTag {
    pub(crate) fn code(self) -> u8 {
        match self {
            BoundaryTag::Wall => 0,
            BoundaryTag::Inflow => 1,
            BoundaryTag::Outflow => 2,
            BoundaryTag::ExactDirichlet => 3,
        }
    }
}

/// Axis-aligned rectangle `[x0, x1] x [y0, y1]`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Rect<T> {
    pub x0: T,
    pub x1: T,
    pub y0: T,
    pub y1: T,
}

impl<T: Scalar> Rect<T> {
    pub fn new(x0: T, x1: T, y0: T, y1: T) -> Self {
        Self { x0, x1, y0, y1 }
    }

    pub fn unit() -> Self {
        Self::new(T::zero(), T::one(), T::zero(), T::one())
    }

    pub fn width(&self) -> T {
        self.x1 - self.x0
    }

    pub fn height(&self) -> T {
        self.y1 - self.y0
    }

    pub fn area(&self) -> T {
        self.width() * self.height()
    }
}

/// Tags for the four sides of a rectangle.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct SideTags {
    pub bottom: BoundaryTag,
    pub right: BoundaryTag,
    pub top: BoundaryTag,
    pub left: BoundaryTag,
}

impl SideTags {
    pub fn uniform(tag: BoundaryTag) -> Self {
        Self {
            bottom: tag,
            right: tag,
            top: tag,
            left: tag,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct BoundaryEdge {
    pub nodes: [usize; 2],
    pub tag: BoundaryTag,
}

#[derive(Clone, Debug)]
pub struct Mesh<T> {
    nodes: Vec<[T; 2]>,
    triangles: Vec<[usize; 3]>,
    boundary: Vec<BoundaryEdge>,
}

#[inline]
fn edge_key(a: usize, b: usize) -> (usize, usize) {
    if a < b {
        (a, b)
    } else {
        (b, a)
    }
}

impl<T: Scalar> Mesh<T> {
    /// Validate and assemble a mesh: node indices in range, counter-clockwise
    /// triangles with positive area, and exactly one tag per boundary edge.
    pub fn new(
        nodes: Vec<[T; 2]>,
        triangles: Vec<[usize; 3]>,
        boundary: Vec<BoundaryEdge>,
    ) -> Result<Self, MeshError> {
        let n = nodes.len();
        let mut edge_count: HashMap<(usize, usize), usize> = HashMap::new();
        for (k, tri) in triangles.iter().enumerate() {
            if tri.iter().any(|&v| v >= n) {
                return Err(MeshError::Invalid(format!("triangle {k} references a missing node")));
            }
            let a = signed_area(nodes[tri[0]], nodes[tri[1]], nodes[tri[2]]);
            if !(a > T::zero()) {
                return Err(MeshError::Invalid(format!("triangle {k} has non-positive signed area")));
            }
            for e in 0..3 {
                *edge_count
                    .entry(edge_key(tri[e], tri[(e + 1) % 3]))
                    .or_insert(0) += 1;
            }
        }
        let mut tagged: HashMap<(usize, usize), usize> = HashMap::new();
        for be in &boundary {
            if be.nodes.iter().any(|&v| v >= n) {
                return Err(MeshError::Invalid("boundary edge references a missing node".into()));
            }
            let key = edge_key(be.nodes[0], be.nodes[1]);
            if edge_count.get(&key) != Some(&1) {
                return Err(MeshError::Invalid(format!("tagged edge {key:?} is not a boundary edge")));
            }
            *tagged.entry(key).or_insert(0) += 1;
        }
        for (key, &count) in &edge_count {
            if count == 1 && tagged.get(key) != Some(&1) {
                return Err(MeshError::Invalid(format!(
                    "boundary edge {key:?} must carry exactly one tag"
                )));
            }
            if count > 2 {
                return Err(MeshError::Invalid(format!("edge {key:?} shared by {count} triangles")));
            }
        }
        Ok(Self {
            nodes,
            triangles,
            boundary,
        })
    }

    pub fn nodes(&self) -> &[[T; 2]] {
        &self.nodes
    }

    pub fn triangles(&self) -> &[[usize; 3]] {
        &self.triangles
    }

    pub fn boundary(&self) -> &[BoundaryEdge] {
        &self.boundary
    }

    pub fn n_nodes(&self) -> usize {
        self.nodes.len()
    }

    pub fn n_triangles(&self) -> usize {
        self.triangles.len()
    }

    pub fn triangle_area(&self, k: usize) -> T {
        let t = self.triangles[k];
        signed_area(self.nodes[t[0]], self.nodes[t[1]], self.nodes[t[2]])
    }

    pub fn area(&self) -> T {
        (0..self.n_triangles()).map(|k| self.triangle_area(k)).sum()
    }

    /// Longest edge over all triangles.
    pub fn h_max(&self) -> T {
        let mut h = T::zero();
        for t in &self.triangles {
            for e in 0..3 {
                let a = self.nodes[t[e]];
                let b = self.nodes[t[(e + 1) % 3]];
                h = h.max(((a[0] - b[0]).powi(2) + (a[1] - b[1]).powi(2)).sqrt());
            }
        }
        h
    }

    /// Re-tag every boundary edge of a rectangle mesh by the side it lies on.
    pub fn with_side_tags(mut self, rect: &Rect<T>, tags: SideTags) -> Self {
        let tol = T::lit(1e-9) * (rect.width() + rect.height());
        for be in &mut self.boundary {
            let a = self.nodes[be.nodes[0]];
            let b = self.nodes[be.nodes[1]];
            let mx = (a[0] + b[0]) * T::lit(0.5);
            let my = (a[1] + b[1]) * T::lit(0.5);
            be.tag = if (my - rect.y0).abs() <= tol {
                tags.bottom
            } else if (my - rect.y1).abs() <= tol {
                tags.top
            } else if (mx - rect.x0).abs() <= tol {
                tags.left
            } else {
                debug_assert!((mx - rect.x1).abs() <= tol);
                tags.right
            };
        }
        self
    }
}

#[inline]
pub(crate) fn signed_area<T: Scalar>(a: [T; 2], b: [T; 2], c: [T; 2]) -> T {
    T::lit(0.5) * ((b[0] - a[0]) * (c[1] - a[1]) - (c[0] - a[0]) * (b[1] - a[1]))
}

/// Uniform `nx x ny` grid of rectangles, each split along the diagonal from
/// its lower-left to its upper-right corner. Vertices are numbered row by
/// row (`j * (nx + 1) + i`). All boundary edges are tagged [`BoundaryTag::Wall`].
pub fn build_rect_mesh<T: Scalar>(nx: usize, ny: usize, rect: Rect<T>) -> Result<Mesh<T>, MeshError> {
    if nx < 2 || ny < 2 {
        return Err(MeshError::TooFewCells { nx, ny });
    }
    let (w, h) = (rect.width(), rect.height());
    if !(w > T::zero() && h > T::zero() && w.is_finite() && h.is_finite()) {
        return Err(MeshError::DegenerateRectangle);
    }
    let coord = |lo: T, hi: T, k: usize, n: usize| -> T {
        if k == n {
            hi
        } else {
            lo + (hi - lo) * T::from_count(k) / T::from_count(n)
        }
    };
    let mut nodes = Vec::with_capacity((nx + 1) * (ny + 1));
    for j in 0..=ny {
        for i in 0..=nx {
            nodes.push([coord(rect.x0, rect.x1, i, nx), coord(rect.y0, rect.y1, j, ny)]);
        }
    }
    let id = |i: usize, j: usize| j * (nx + 1) + i;
    let mut triangles = Vec::with_capacity(2 * nx * ny);
    for j in 0..ny {
        for i in 0..nx {
            let (v00, v10, v11, v01) = (id(i, j), id(i + 1, j), id(i + 1, j + 1), id(i, j + 1));
            triangles.push([v00, v10, v11]);
            triangles.push([v00, v11, v01]);
        }
    }
    let mut boundary = Vec::with_capacity(2 * (nx + ny));
    let wall = BoundaryTag::Wall;
    for i in 0..nx {
        boundary.push(BoundaryEdge { nodes: [id(i, 0), id(i + 1, 0)], tag: wall });
        boundary.push(BoundaryEdge { nodes: [id(i + 1, ny), id(i, ny)], tag: wall });
    }
    for j in 0..ny {
        boundary.push(BoundaryEdge { nodes: [id(nx, j), id(nx, j + 1)], tag: wall });
        boundary.push(BoundaryEdge { nodes: [id(0, j + 1), id(0, j)], tag: wall });
    }
    Mesh::new(nodes, triangles, boundary)
}
