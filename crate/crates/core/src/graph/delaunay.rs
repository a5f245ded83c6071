//! Delaunay triangulation of integer pixel centers.
//!
//! Points are inserted in lexicographic order, each one fanned onto the
//! hull edges it sees, and the resulting triangulation is made Delaunay by
//! Lawson edge flips. Pixel coordinates are small integers, so the
//! orientation and in-circle predicates are evaluated exactly in integer
//! arithmetic.
//!
//! Co-circular quadrilaterals are resolved by keeping the diagonal incident
//! to the lexicographically smallest of the four vertices (smallest x, then
//! smallest y). This is the sign a consistent symbolic perturbation of the
//! lifted points would give, so flipping always terminates and the output
//! does not depend on insertion details: the unit square (0,0), (1,0),
//! (0,1), (1,1) is split along (0,0)-(1,1).

use std::collections::HashMap;

const NONE: usize = usize::MAX;

/// Undirected mesh over active pixels.
#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct PixelMesh {
    /// Pixel coordinates, sorted by x then y.
    pub vertices: Vec<(u32, u32)>,
    /// Sorted `(i, j)` vertex index pairs with `i < j`.
    pub edges: Vec<(usize, usize)>,
    /// Counter-clockwise triangles (empty for degenerate inputs).
    pub triangles: Vec<[usize; 3]>,
}

impl PixelMesh {
    /// Neighbor lists indexed by vertex.
    pub fn adjacency(&self) -> Vec<Vec<usize>> {
        let mut adj = vec![Vec::new(); self.vertices.len()];
        for &(a, b) in &self.edges {
            adj[a].push(b);
            adj[b].push(a);
        }
        for list in &mut adj {
            list.sort_unstable();
        }
        adj
    }

    pub fn vertex_of(&self, pixel: (u32, u32)) -> Option<usize> {
        self.vertices.binary_search(&pixel).ok()
    }
}

type P = (i64, i64);

pub(crate) fn orient(a: P, b: P, c: P) -> i64 {
    (b.0 - a.0) * (c.1 - a.1) - (b.1 - a.1) * (c.0 - a.0)
}

/// Positive when `d` lies strictly inside the circle through the
/// counter-clockwise triangle `a, b, c`.
pub(crate) fn in_circle(a: P, b: P, c: P, d: P) -> i128 {
    let (adx, ady) = ((a.0 - d.0) as i128, (a.1 - d.1) as i128);
    let (bdx, bdy) = ((b.0 - d.0) as i128, (b.1 - d.1) as i128);
    let (cdx, cdy) = ((c.0 - d.0) as i128, (c.1 - d.1) as i128);
    (adx * adx + ady * ady) * (bdx * cdy - cdx * bdy)
        + (bdx * bdx + bdy * bdy) * (cdx * ady - adx * cdy)
        + (cdx * cdx + cdy * cdy) * (adx * bdy - bdx * ady)
}

/// Triangulates the given pixel centers. Fewer than two pixels yield an
/// empty mesh; collinear pixels yield a chain.
pub fn delaunay(pixels: &[(u32, u32)]) -> PixelMesh {
    let mut vertices = pixels.to_vec();
    vertices.sort_unstable();
    vertices.dedup();
    let pts: Vec<P> = vertices.iter().map(|&(x, y)| (x as i64, y as i64)).collect();
    let n = pts.len();
    if n < 2 {
        return PixelMesh {
            vertices,
            ..PixelMesh::default()
        };
    }
    let Some(k) = (2..n).find(|&k| orient(pts[0], pts[1], pts[k]) != 0) else {
        return PixelMesh {
            vertices,
            edges: (0..n - 1).map(|i| (i, i + 1)).collect(),
            triangles: Vec::new(),
        };
    };

    let mut triangles = sweep(&pts, k);
    legalize(&pts, &mut triangles);

    let mut edges: Vec<(usize, usize)> = triangles
        .iter()
        .flat_map(|t| (0..3).map(move |i| (t[i].min(t[(i + 1) % 3]), t[i].max(t[(i + 1) % 3]))))
        .collect();
    edges.sort_unstable();
    edges.dedup();
    triangles.sort_unstable();
    PixelMesh {
        vertices,
        edges,
        triangles,
    }
}

/// Lexicographic sweep triangulation. `pts[..k]` are collinear and `pts[k]`
/// is the first point off their line.
fn sweep(pts: &[P], k: usize) -> Vec<[usize; 3]> {
    let mut triangles = Vec::with_capacity(2 * pts.len());
    let apex = k;
    let mut hull: Vec<usize>;
    if orient(pts[0], pts[1], pts[apex]) > 0 {
        for i in 0..k - 1 {
            triangles.push([i, i + 1, apex]);
        }
        hull = (0..k).collect();
        hull.push(apex);
    } else {
        for i in 0..k - 1 {
            triangles.push([i + 1, i, apex]);
        }
        hull = vec![0, apex];
        hull.extend((1..k).rev());
    }
    let mut last = hull.iter().position(|&v| v == apex).expect("apex on hull");

    for p in k + 1..pts.len() {
        let h = hull.len();
        let visible = |j: usize, hull: &[usize]| {
            orient(pts[hull[j % h]], pts[hull[(j + 1) % h]], pts[p]) < 0
        };
        // the previous point is extreme, so one of its hull edges is visible
        let seed = [last % h, (last + h - 1) % h]
            .into_iter()
            .find(|&j| visible(j, &hull))
            .or_else(|| (0..h).find(|&j| visible(j, &hull)))
            .expect("a point outside the hull sees some edge");
        let (mut first, mut end) = (seed, seed);
        while visible(first + h - 1, &hull) && (first + h - 1) % h != end % h {
            first = (first + h - 1) % h;
        }
        while visible(end + 1, &hull) && (end + 1) % h != first % h {
            end = (end + 1) % h;
        }
        let count = (end + h - first) % h + 1;
        for s in 0..count {
            let j = (first + s) % h;
            triangles.push([hull[(j + 1) % h], hull[j], p]);
        }
        // keep hull[end + 1] .. hull[first] (cyclic), then p
        let mut next = Vec::with_capacity(h + 1 - count + 1);
        let mut j = (end + 1) % h;
        loop {
            next.push(hull[j]);
            if j == first {
                break;
            }
            j = (j + 1) % h;
        }
        next.push(p);
        hull = next;
        last = hull.len() - 1;
    }
    triangles
}

fn build_adjacency(triangles: &[[usize; 3]]) -> Vec<[usize; 3]> {
    let mut owner: HashMap<(usize, usize), (usize, usize)> = HashMap::with_capacity(triangles.len() * 3);
    for (t, tri) in triangles.iter().enumerate() {
        for i in 0..3 {
            owner.insert((tri[(i + 1) % 3], tri[(i + 2) % 3]), (t, i));
        }
    }
    triangles
        .iter()
        .map(|tri| {
            let mut adj = [NONE; 3];
            for (i, slot) in adj.iter_mut().enumerate() {
                if let Some(&(u, _)) = owner.get(&(tri[(i + 2) % 3], tri[(i + 1) % 3])) {
                    *slot = u;
                }
            }
            adj
        })
        .collect()
}

/// Lawson flips until every interior edge is locally Delaunay.
fn legalize(pts: &[P], tris: &mut [[usize; 3]]) {
    let mut adj = build_adjacency(tris);
    let mut stack: Vec<(usize, usize)> = (0..tris.len()).flat_map(|t| (0..3).map(move |i| (t, i))).collect();
    while let Some((t, i)) = stack.pop() {
        let u = adj[t][i];
        if u == NONE {
            continue;
        }
        let (a, b, c) = (tris[t][i], tris[t][(i + 1) % 3], tris[t][(i + 2) % 3]);
        let Some(j) = (0..3).find(|&j| tris[u][j] != b && tris[u][j] != c) else {
            continue;
        };
        let d = tris[u][j];
        let s = in_circle(pts[a], pts[b], pts[c], pts[d]);
        let illegal = s > 0 || (s == 0 && a.min(d) < b.min(c));
        if !illegal || orient(pts[a], pts[b], pts[d]) <= 0 || orient(pts[a], pts[d], pts[c]) <= 0 {
            continue;
        }
        let n_ab = adj[t][(i + 2) % 3];
        let n_ca = adj[t][(i + 1) % 3];
        let n_bd = adj[u][(j + 1) % 3];
        let n_dc = adj[u][(j + 2) % 3];
        tris[t] = [a, b, d];
        adj[t] = [n_bd, u, n_ab];
        tris[u] = [a, d, c];
        adj[u] = [n_dc, n_ca, t];
        relink(&mut adj, n_bd, u, t);
        relink(&mut adj, n_ca, t, u);
        stack.extend([(t, 0), (t, 2), (u, 0), (u, 1)]);
    }
}

fn relink(adj: &mut [[usize; 3]], tri: usize, from: usize, to: usize) {
    if tri == NONE {
        return;
    }
    for slot in adj[tri].iter_mut() {
        if *slot == from {
            *slot = to;
            return;
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    /// Exhaustive empty-circumcircle check.
    pub(crate) fn assert_delaunay(mesh: &PixelMesh) {
        let pts: Vec<P> = mesh.vertices.iter().map(|&(x, y)| (x as i64, y as i64)).collect();
        for t in &mesh.triangles {
            assert!(orient(pts[t[0]], pts[t[1]], pts[t[2]]) > 0, "triangle {t:?} not ccw");
            for (v, &p) in pts.iter().enumerate() {
                if t.contains(&v) {
                    continue;
                }
                assert!(
                    in_circle(pts[t[0]], pts[t[1]], pts[t[2]], p) <= 0,
                    "vertex {v} inside circumcircle of {t:?}"
                );
            }
        }
    }

    #[test]
    fn single_triangle() {
        let m = delaunay(&[(0, 0), (4, 1), (1, 3)]);
        assert_eq!(m.edges.len(), 3);
        assert_eq!(m.triangles.len(), 1);
    }

    #[test]
    fn unit_square_uses_diagonal_from_smallest_vertex() {
        let m = delaunay(&[(1, 1), (0, 1), (1, 0), (0, 0)]);
        assert_eq!(m.edges.len(), 5);
        let a = m.vertex_of((0, 0)).unwrap();
        let b = m.vertex_of((1, 1)).unwrap();
        assert!(m.edges.contains(&(a.min(b), a.max(b))));
        assert_delaunay(&m);
    }

    #[test]
    fn collinear_chain() {
        let m = delaunay(&[(0, 0), (2, 2), (1, 1), (5, 5)]);
        assert_eq!(m.edges, vec![(0, 1), (1, 2), (2, 3)]);
        let m = delaunay(&[(3, 0), (3, 7), (3, 2)]);
        assert_eq!(m.edges.len(), 2);
    }

    #[test]
    fn too_few_points() {
        assert!(delaunay(&[]).edges.is_empty());
        assert!(delaunay(&[(2, 2)]).edges.is_empty());
        assert_eq!(delaunay(&[(2, 2), (5, 1)]).edges, vec![(0, 1)]);
    }

    #[test]
    fn full_grid_is_delaunay_and_planar() {
        let pts: Vec<(u32, u32)> = (0..9).flat_map(|x| (0..7).map(move |y| (x, y))).collect();
        let m = delaunay(&pts);
        assert_delaunay(&m);
        // a triangulated 9x7 grid: 2 * 8 * 6 triangles
        assert_eq!(m.triangles.len(), 96);
        assert!(m.edges.len() <= 3 * pts.len() - 6);
    }

    #[test]
    fn collinear_prefix_then_fan() {
        let m = delaunay(&[(0, 0), (0, 1), (0, 2), (0, 3), (1, 5), (2, 0), (2, 9)]);
        assert_delaunay(&m);
        // every vertex is used
        let adj = m.adjacency();
        assert!(adj.iter().all(|a| !a.is_empty()));
    }

    proptest::proptest! {
        #![proptest_config(proptest::prelude::ProptestConfig::with_cases(64))]

        #[test]
        fn random_point_sets_are_delaunay_triangulations(
            raw in proptest::collection::btree_set((0u32..64, 0u32..64), 3..=200)
        ) {
            let pts: Vec<(u32, u32)> = raw.into_iter().collect();
            let m = delaunay(&pts);
            assert_delaunay(&m);
            let mut counted: HashMap<(usize, usize), usize> = HashMap::new();
            for t in &m.triangles {
                for k in 0..3 {
                    let (a, b) = (t[k], t[(k + 1) % 3]);
                    *counted.entry((a.min(b), a.max(b))).or_default() += 1;
                }
            }
            if !m.triangles.is_empty() {
                // connected planar triangulation: V - E + (T + 1) = 2
                proptest::prop_assert_eq!(m.edges.len() + 1, pts.len() + m.triangles.len());
                proptest::prop_assert!(counted.values().all(|&c| c <= 2));
                proptest::prop_assert_eq!(counted.len(), m.edges.len());
            }
            proptest::prop_assert!(m.adjacency().iter().all(|a| !a.is_empty()));
        }
    }
}
