//! Gmsh MSH 2.2 ASCII meshes.

use std::collections::{BTreeMap, HashMap};
use std::io::Write;
use std::path::Path;

use super::IoError;
use crate::mesh::{BoundaryLabel, RawMesh, SimplicialMesh};
use crate::scalar::Real;

const LINE: u32 = 1;
const TRIANGLE: u32 = 2;
const TETRAHEDRON: u32 = 4;
const POINT: u32 = 15;

fn node_count(ty: u32) -> Option<usize> {
    match ty {
        LINE => Some(2),
        TRIANGLE => Some(3),
        TETRAHEDRON => Some(4),
        POINT => Some(1),
        _ => None,
    }
}

struct Element {
    line: usize,
    ty: u32,
    tag: Option<u32>,
    nodes: Vec<usize>,
}

/// Reads an MSH 2.2 ASCII file. The highest-dimensional simplices become
/// cells; elements one dimension lower become boundary facets labeled
/// through `tags`, or through `$PhysicalNames` entries that spell a label.
pub fn read_gmsh<T: Real>(path: &Path, tags: &BTreeMap<u32, BoundaryLabel>) -> Result<RawMesh<T>, IoError> {
    let text = std::fs::read_to_string(path).map_err(|e| IoError::File { path: path.to_path_buf(), source: e })?;
    parse_gmsh(&text, tags).map_err(|(line, message)| IoError::Parse { path: path.to_path_buf(), line, message })
}

type ParseResult<T> = Result<T, (usize, String)>;

fn parse_gmsh<T: Real>(text: &str, tags: &BTreeMap<u32, BoundaryLabel>) -> ParseResult<RawMesh<T>> {
    let mut lines = text.lines().enumerate().map(|(i, l)| (i + 1, l.trim())).filter(|(_, l)| !l.is_empty());
    let mut next = |what: &str| lines.next().ok_or_else(|| (0, format!("unexpected end of file, expected {what}")));

    let mut format_seen = false;
    let mut names: HashMap<u32, String> = HashMap::new();
    let mut nodes: HashMap<usize, [f64; 3]> = HashMap::new();
    let mut elements: Vec<Element> = Vec::new();

    while let Ok((ln, header)) = next("a section") {
        match header {
            "$MeshFormat" => {
                let (ln, l) = next("the format line")?;
                let f: Vec<&str> = l.split_whitespace().collect();
                if f.len() < 3 {
                    return Err((ln, "malformed $MeshFormat line".into()));
                }
                if !f[0].starts_with("2.") {
                    return Err((ln, format!("unsupported MSH version {} (only 2.2 ASCII is read)", f[0])));
                }
                if f[1] != "0" {
                    return Err((ln, "binary MSH files are not supported".into()));
                }
                format_seen = true;
            }
            "$PhysicalNames" => {
                let (ln, l) = next("the name count")?;
                let n: usize = l.parse().map_err(|_| (ln, "invalid physical name count".to_string()))?;
                for _ in 0..n {
                    let (ln, l) = next("a physical name")?;
                    let mut it = l.splitn(3, char::is_whitespace);
                    let _dim = it.next();
                    let tag: u32 = it
                        .next()
                        .and_then(|s| s.parse().ok())
                        .ok_or_else(|| (ln, "invalid physical tag".to_string()))?;
                    let name = it.next().unwrap_or("").trim().trim_matches('"').to_string();
                    names.insert(tag, name);
                }
            }
            "$Nodes" => {
                let (ln, l) = next("the node count")?;
                let n: usize = l.parse().map_err(|_| (ln, "invalid node count".to_string()))?;
                for _ in 0..n {
                    let (ln, l) = next("a node")?;
                    let v: Vec<f64> = l
                        .split_whitespace()
                        .map(str::parse)
                        .collect::<Result<_, _>>()
                        .map_err(|_| (ln, "invalid node line".to_string()))?;
                    if v.len() != 4 || v[0] < 1.0 || v[0].fract() != 0.0 {
                        return Err((ln, "expected 'id x y z'".into()));
                    }
                    nodes.insert(v[0] as usize, [v[1], v[2], v[3]]);
                }
            }
            "$Elements" => {
                let (ln, l) = next("the element count")?;
                let n: usize = l.parse().map_err(|_| (ln, "invalid element count".to_string()))?;
                for _ in 0..n {
                    let (ln, l) = next("an element")?;
                    let v: Vec<usize> = l
                        .split_whitespace()
                        .map(str::parse)
                        .collect::<Result<_, _>>()
                        .map_err(|_| (ln, "invalid element line".to_string()))?;
                    if v.len() < 3 || v.len() < 3 + v[2] {
                        return Err((ln, "truncated element line".into()));
                    }
                    let ntags = v[2];
                    let tag = if ntags > 0 { Some(v[3] as u32) } else { None };
                    elements.push(Element { line: ln, ty: v[1] as u32, tag, nodes: v[3 + ntags..].to_vec() });
                }
            }
            s if s.starts_with("$End") => {}
            s if s.starts_with('$') => {
                // Unknown section: skip to its end marker.
                let end = format!("$End{}", &s[1..]);
                while next(&end)?.1 != end {}
            }
            _ => return Err((ln, format!("unexpected line '{header}'"))),
        }
    }
    if !format_seen {
        return Err((1, "missing $MeshFormat section".into()));
    }

    let dim = if elements.iter().any(|e| e.ty == TETRAHEDRON) {
        3
    } else if elements.iter().any(|e| e.ty == TRIANGLE) {
        2
    } else {
        return Err((0, "no triangle or tetrahedron elements".into()));
    };
    let (cell_ty, facet_ty) = if dim == 3 { (TETRAHEDRON, TRIANGLE) } else { (TRIANGLE, LINE) };

    let label_of = |tag: u32| -> Option<BoundaryLabel> {
        tags.get(&tag).copied().or_else(|| names.get(&tag).and_then(|n| n.parse().ok()))
    };

    // Compact numbering over the nodes used by cells, in file order.
    let mut index: HashMap<usize, usize> = HashMap::new();
    let mut vertices = Vec::new();
    let mut cells = Vec::new();
    let mut facets = Vec::new();
    for e in &elements {
        match node_count(e.ty) {
            Some(k) if k != e.nodes.len() => {
                return Err((e.line, format!("element type {} needs {k} nodes, found {}", e.ty, e.nodes.len())))
            }
            None => {
                if e.tag.is_some_and(|t| label_of(t).is_some()) {
                    return Err((e.line, format!("unsupported element type {} carries a boundary tag", e.ty)));
                }
                log::warn!("line {}: skipping unsupported element type {}", e.line, e.ty);
                continue;
            }
            _ => {}
        }
        if e.ty != cell_ty {
            continue;
        }
        let mut cell = Vec::with_capacity(dim + 1);
        for &id in &e.nodes {
            let x = nodes.get(&id).ok_or_else(|| (e.line, format!("unknown node {id}")))?;
            let i = *index.entry(id).or_insert_with(|| {
                vertices.push([T::of(x[0]), T::of(x[1]), if dim == 3 { T::of(x[2]) } else { T::zero() }]);
                vertices.len() - 1
            });
            cell.push(i);
        }
        cells.push(cell);
    }
    for e in elements.iter().filter(|e| e.ty == facet_ty) {
        let tag = e.tag.ok_or_else(|| (e.line, "boundary element without a physical tag".to_string()))?;
        let label = label_of(tag).ok_or_else(|| (e.line, format!("physical tag {tag} has no boundary label")))?;
        let f: Vec<usize> = e
            .nodes
            .iter()
            .map(|id| index.get(id).copied().ok_or_else(|| (e.line, format!("boundary node {id} is not on any cell"))))
            .collect::<Result<_, _>>()?;
        facets.push((f, label));
    }
    Ok(RawMesh { dim, vertices, cells, facets })
}

/// Writes `mesh` as MSH 2.2 ASCII. Each boundary label gets a physical tag
/// named after the label, so the file reads back without a tag table.
pub fn write_gmsh<T: Real>(path: &Path, mesh: &SimplicialMesh<T>) -> Result<(), IoError> {
    let io = |e| IoError::File { path: path.to_path_buf(), source: e };
    let mut w = std::io::BufWriter::new(std::fs::File::create(path).map_err(io)?);
    let d = mesh.dim();
    let labels: Vec<BoundaryLabel> = mesh.boundary_labels();
    let tag = |l: BoundaryLabel| labels.iter().position(|&m| m == l).unwrap() + 1;
    let (cell_ty, facet_ty) = if d == 3 { (TETRAHEDRON, TRIANGLE) } else { (TRIANGLE, LINE) };
    (|| -> std::io::Result<()> {
        writeln!(w, "$MeshFormat\n2.2 0 8\n$EndMeshFormat")?;
        writeln!(w, "$PhysicalNames\n{}", labels.len() + 1)?;
        for (i, l) in labels.iter().enumerate() {
            writeln!(w, "{} {} \"{l}\"", d - 1, i + 1)?;
        }
        writeln!(w, "{d} {} \"domain\"", labels.len() + 1)?;
        writeln!(w, "$EndPhysicalNames")?;
        writeln!(w, "$Nodes\n{}", mesh.num_vertices())?;
        for (i, v) in mesh.vertices().iter().enumerate() {
            writeln!(w, "{} {:e} {:e} {:e}", i + 1, v[0].to_f64_lossy(), v[1].to_f64_lossy(), v[2].to_f64_lossy())?;
        }
        writeln!(w, "$EndNodes")?;
        let nf = mesh.facets().len();
        writeln!(w, "$Elements\n{}", nf + mesh.num_cells())?;
        for (f, facet) in mesh.facets().iter().enumerate() {
            let t = tag(facet.label);
            write!(w, "{} {facet_ty} 2 {t} {t}", f + 1)?;
            for v in mesh.facet_vertices(f) {
                write!(w, " {}", v + 1)?;
            }
            writeln!(w)?;
        }
        let domain = labels.len() + 1;
        for c in 0..mesh.num_cells() {
            write!(w, "{} {cell_ty} 2 {domain} {domain}", nf + c + 1)?;
            for v in mesh.cell(c) {
                write!(w, " {}", v + 1)?;
            }
            writeln!(w)?;
        }
        writeln!(w, "$EndElements")?;
        w.flush()
    })()
    .map_err(io)
}
