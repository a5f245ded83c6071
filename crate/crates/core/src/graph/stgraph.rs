use std::fmt::Write as _;

use crate::events::EventWindow;
use crate::graph::delaunay::PixelMesh;

/// Space-time neighborhood graph over the events of a window.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct STGraph {
    /// Sorted neighbor indices per event.
    pub adjacency: Vec<Vec<u32>>,
}

impl STGraph {
    pub fn vertex_count(&self) -> usize {
        self.adjacency.len()
    }

    pub fn degree(&self, i: usize) -> usize {
        self.adjacency[i].len()
    }

    /// Undirected edges `(i, j)` with `i < j`, in sorted order.
    pub fn edges(&self) -> impl Iterator<Item = (usize, usize)> + '_ {
        self.adjacency.iter().enumerate().flat_map(|(i, adj)| {
            adj.iter()
                .map(|&j| j as usize)
                .filter(move |&j| j > i)
                .map(move |j| (i, j))
        })
    }

    pub fn edge_count(&self) -> usize {
        self.adjacency.iter().map(Vec::len).sum::<usize>() / 2
    }

    /// Edge list, one `i j` pair per line.
    pub fn to_edge_list(&self) -> String {
        let mut out = String::new();
        for (i, j) in self.edges() {
            let _ = writeln!(out, "{i} {j}");
        }
        out
    }
}

/// Event indices grouped by mesh vertex, each group in time order (ties by
/// input index), plus the vertex of every event.
pub(crate) struct PixelEvents {
    pub per_vertex: Vec<Vec<u32>>,
    #[allow(dead_code)]
    pub vertex_of_event: Vec<usize>,
}

pub(crate) fn group_by_pixel(window: &EventWindow, mesh: &PixelMesh) -> PixelEvents {
    let mut per_vertex = vec![Vec::new(); mesh.vertices.len()];
    let mut vertex_of_event = Vec::with_capacity(window.len());
    for (i, e) in window.events.iter().enumerate() {
        let (px, py) = e.pixel();
        let v = u32::try_from(px)
            .ok()
            .zip(u32::try_from(py).ok())
            .and_then(|p| mesh.vertex_of(p))
            .unwrap_or(usize::MAX);
        vertex_of_event.push(v);
        if v != usize::MAX {
            per_vertex[v].push(i as u32);
        }
    }
    for list in &mut per_vertex {
        list.sort_by(|&a, &b| {
            let (ta, tb) = (window.events[a as usize].t, window.events[b as usize].t);
            ta.total_cmp(&tb).then(a.cmp(&b))
        });
    }
    PixelEvents {
        per_vertex,
        vertex_of_event,
    }
}

/// Links every event to its temporal predecessor and successor at its own
/// pixel and to the two temporally closest events at each mesh-adjacent
/// pixel, then symmetrizes.
pub fn build_st_graph(window: &EventWindow, mesh: &PixelMesh) -> STGraph {
    let n = window.len();
    let groups = group_by_pixel(window, mesh);
    let mesh_adj = mesh.adjacency();
    let times: Vec<f64> = window.events.iter().map(|e| e.t).collect();

    let mut links: Vec<(u32, u32)> = Vec::with_capacity(n * 8);
    let mut push = |a: u32, b: u32| {
        if a != b {
            links.push((a.min(b), a.max(b)));
        }
    };

    for (v, own) in groups.per_vertex.iter().enumerate() {
        for pair in own.windows(2) {
            push(pair[0], pair[1]);
        }
        for &e in own {
            let t = times[e as usize];
            for &q in &mesh_adj[v] {
                for other in closest_two(&groups.per_vertex[q], &times, t) {
                    push(e, other);
                }
            }
        }
    }

    links.sort_unstable();
    links.dedup();
    let mut adjacency = vec![Vec::new(); n];
    for (a, b) in links {
        adjacency[a as usize].push(b);
        adjacency[b as usize].push(a);
    }
    for list in &mut adjacency {
        list.sort_unstable();
    }
    STGraph { adjacency }
}

/// The (up to) two events of a time-sorted list closest to `t`; ties favor
/// the earlier event.
fn closest_two(list: &[u32], times: &[f64], t: f64) -> impl Iterator<Item = u32> {
    let pos = list.partition_point(|&i| times[i as usize] < t);
    let (mut left, mut right) = (pos, pos);
    let mut picked = [None; 2];
    for slot in &mut picked {
        let dl = (left > 0).then(|| t - times[list[left - 1] as usize]);
        let dr = (right < list.len()).then(|| times[list[right] as usize] - t);
        *slot = match (dl, dr) {
            (Some(a), Some(b)) if a <= b => {
                left -= 1;
                Some(list[left])
            }
            (Some(_), None) => {
                left -= 1;
                Some(list[left])
            }
            (_, Some(_)) => {
                right += 1;
                Some(list[right - 1])
            }
            (None, None) => None,
        };
    }
    picked.into_iter().flatten()
}
