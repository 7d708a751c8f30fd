//! Uniform red refinement.

use std::collections::HashMap;

use super::{build_connectivity, RawMesh, SimplicialMesh};
use crate::linalg::{norm, vsub};
use crate::scalar::Real;

/// Splits every triangle into 4 and every tetrahedron into 8 children.
/// New vertices are appended at edge midpoints in edge order; boundary
/// facets are split alongside and keep their parent's label.
pub fn refine_uniform<T: Real>(mesh: &SimplicialMesh<T>) -> SimplicialMesh<T> {
    let dim = mesh.dim();
    let nv = mesh.num_vertices();
    let mut vertices = mesh.vertices().to_vec();
    vertices.extend((0..mesh.num_edges()).map(|e| mesh.edge_midpoint(e)));
    let edge_index: HashMap<[usize; 2], usize> = mesh.edges().iter().enumerate().map(|(i, e)| (*e, i)).collect();
    let mid = |a: usize, b: usize| nv + edge_index[&[a.min(b), a.max(b)]];

    let mut cells = Vec::with_capacity(mesh.num_cells() * if dim == 2 { 4 } else { 8 });
    for c in 0..mesh.num_cells() {
        let v = mesh.cell(c);
        if dim == 2 {
            let (m01, m12, m02) = (mid(v[0], v[1]), mid(v[1], v[2]), mid(v[0], v[2]));
            cells.push(vec![v[0], m01, m02]);
            cells.push(vec![m01, v[1], m12]);
            cells.push(vec![m02, m12, v[2]]);
            cells.push(vec![m01, m12, m02]);
        } else {
            let m = |i: usize, j: usize| mid(v[i], v[j]);
            cells.push(vec![v[0], m(0, 1), m(0, 2), m(0, 3)]);
            cells.push(vec![m(0, 1), v[1], m(1, 2), m(1, 3)]);
            cells.push(vec![m(0, 2), m(1, 2), v[2], m(2, 3)]);
            cells.push(vec![m(0, 3), m(1, 3), m(2, 3), v[3]]);

            // Inner octahedron, cut along its shortest diagonal.
            let pairs = [((0, 1), (2, 3)), ((0, 2), (1, 3)), ((0, 3), (1, 2))];
            let len = |(a, b): ((usize, usize), (usize, usize))| {
                norm(&vsub(&vertices[m(a.0, a.1)], &vertices[m(b.0, b.1)]))
            };
            let mut best = 0;
            for k in 1..3 {
                if len(pairs[k]) < len(pairs[best]) {
                    best = k;
                }
            }
            let (da, db) = pairs[best];
            let ring: Vec<(usize, usize)> = pairs.iter().enumerate().filter(|(k, _)| *k != best).flat_map(|(_, p)| [p.0, p.1]).collect();
            // Order the four equatorial midpoints into a cycle: consecutive
            // ones share a parent vertex.
            let shares = |a: (usize, usize), b: (usize, usize)| a.0 == b.0 || a.0 == b.1 || a.1 == b.0 || a.1 == b.1;
            let mut cycle = vec![ring[0]];
            let mut rest: Vec<(usize, usize)> = ring[1..].to_vec();
            while !rest.is_empty() {
                let last = *cycle.last().unwrap();
                let pos = rest.iter().position(|&r| shares(last, r)).expect("octahedron ring");
                cycle.push(rest.remove(pos));
            }
            for i in 0..4 {
                let (a, b) = (cycle[i], cycle[(i + 1) % 4]);
                cells.push(vec![m(da.0, da.1), m(db.0, db.1), m(a.0, a.1), m(b.0, b.1)]);
            }
        }
    }

    let mut facets = Vec::with_capacity(mesh.facets().len() * if dim == 2 { 2 } else { 4 });
    for f in 0..mesh.facets().len() {
        let v = mesh.facet_vertices(f);
        let label = mesh.facets()[f].label;
        if dim == 2 {
            let m = mid(v[0], v[1]);
            facets.push((vec![v[0], m], label));
            facets.push((vec![m, v[1]], label));
        } else {
            let (m01, m12, m02) = (mid(v[0], v[1]), mid(v[1], v[2]), mid(v[0], v[2]));
            facets.push((vec![v[0], m01, m02], label));
            facets.push((vec![m01, v[1], m12], label));
            facets.push((vec![m02, m12, v[2]], label));
            facets.push((vec![m01, m12, m02], label));
        }
    }

    build_connectivity(RawMesh { dim, vertices, cells, facets }).expect("refinement of a valid mesh is valid")
}
