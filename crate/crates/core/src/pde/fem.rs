use super::grid::{Field, Grid2D};
use super::linalg::{conjugate_gradient, Csr, CG_TOLERANCE};
use crate::error::{Error, Result};

/// Triangles of the structured mesh as node-index triples, counter-clockwise.
///
/// Cell `(i, j)` is split along the `s1 = s2` diagonal when `i + j` is even and
/// along the other diagonal otherwise, so the mesh alternates orientation in a
/// checkerboard.
pub fn triangulate(g: &Grid2D) -> Vec<[usize; 3]> {
    let mut tris = Vec::with_capacity(2 * (g.n1 - 1) * (g.n2 - 1));
    for i in 0..g.n2 - 1 {
        for j in 0..g.n1 - 1 {
            let p00 = g.index(i, j);
            let p01 = g.index(i, j + 1);
            let p10 = g.index(i + 1, j);
            let p11 = g.index(i + 1, j + 1);
            if (i + j) % 2 == 0 {
                tris.push([p00, p01, p11]);
                tris.push([p00, p11, p10]);
            } else {
                tris.push([p00, p01, p10]);
                tris.push([p01, p11, p10]);
            }
        }
    }
    tris
}

fn coords(g: &Grid2D, k: usize) -> [f64; 2] {
    g.point(k / g.n1, k % g.n1)
}

/// Interior node numbering: `Some(dof)` for free nodes, `None` on the boundary.
fn dof_map(g: &Grid2D) -> (Vec<Option<usize>>, usize) {
    let mut map = vec![None; g.len()];
    let mut n = 0;
    for i in 0..g.n2 {
        for j in 0..g.n1 {
            if !g.is_boundary(i, j) {
                map[g.index(i, j)] = Some(n);
                n += 1;
            }
        }
    }
    (map, n)
}

/// Area and shape-function gradients (scaled by `2A`) of one triangle.
fn element(g: &Grid2D, t: &[usize; 3]) -> (f64, [f64; 3], [f64; 3]) {
    let p = t.map(|k| coords(g, k));
    let mut b = [0.0; 3];
    let mut c = [0.0; 3];
    for a in 0..3 {
        let (q, r) = (p[(a + 1) % 3], p[(a + 2) % 3]);
        b[a] = q[1] - r[1];
        c[a] = r[0] - q[0];
    }
    let area = 0.5 * ((p[1][0] - p[0][0]) * (p[2][1] - p[0][1]) - (p[2][0] - p[0][0]) * (p[1][1] - p[0][1]));
    (area, b, c)
}

fn check_kappa(kappa: &Field) -> Result<()> {
    if let Some(k) = kappa.values.iter().position(|&v| !(v > 0.0)) {
        return Err(Error::invalid(format!(
            "conductivity must be positive, node {k} has {}",
            kappa.values[k]
        )));
    }
    Ok(())
}

/// Stiffness matrix on interior nodes, with element conductivity taken as the
/// mean of its three vertex values.
pub fn assemble_stiffness(kappa: &Field) -> Result<Csr> {
    check_kappa(kappa)?;
    let g = &kappa.grid;
    let (map, n) = dof_map(g);
    let mut trip = Vec::new();
    for t in triangulate(g) {
        let (area, b, c) = element(g, &t);
        let k_t = t.iter().map(|&v| kappa.values[v]).sum::<f64>() / 3.0;
        for a in 0..3 {
            let Some(ra) = map[t[a]] else { continue };
            for e in 0..3 {
                let Some(re) = map[t[e]] else { continue };
                trip.push((ra, re, k_t * (b[a] * b[e] + c[a] * c[e]) / (4.0 * area)));
            }
        }
    }
    Ok(Csr::from_triplets(n, trip))
}

/// Solves `-div(kappa grad u) = b` with `u = 0` on the boundary, constant `b`.
pub fn steady_conduction_fem(kappa: &Field, b: f64) -> Result<Field> {
    steady_conduction_fem_source(kappa, &Field::new(kappa.grid, vec![b; kappa.grid.len()])?)
}

/// As [`steady_conduction_fem`] with a nodal source, integrated exactly as its
/// piecewise-linear interpolant.
pub fn steady_conduction_fem_source(kappa: &Field, b: &Field) -> Result<Field> {
    if kappa.grid != b.grid {
        return Err(Error::shape("steady-conduction", "conductivity and source grids differ"));
    }
    let g = kappa.grid;
    let k = assemble_stiffness(kappa)?;
    let (map, n) = dof_map(&g);
    let mut rhs = vec![0.0; n];
    for t in triangulate(&g) {
        let (area, _, _) = element(&g, &t);
        let total: f64 = t.iter().map(|&v| b.values[v]).sum();
        for &v in &t {
            if let Some(r) = map[v] {
                rhs[r] += area / 12.0 * (b.values[v] + total);
            }
        }
    }
    let mut u = vec![0.0; n];
    conjugate_gradient(|x, y| k.matvec(x, y), &rhs, &mut u, CG_TOLERANCE, 10 * n + 100)?;
    let mut out = vec![0.0; g.len()];
    for (node, dof) in map.iter().enumerate() {
        if let Some(d) = dof {
            out[node] = u[*d];
        }
    }
    Field::new(g, out)
}
