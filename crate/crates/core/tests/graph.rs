mod common;

use std::collections::BTreeSet;

use common::*;
use evseg::events::Event;
use evseg::graph::window_graph;

/// Neighbors chosen by each event, by direct search: its own pixel's
/// predecessor and successor plus the two events closest in time at every
/// mesh-adjacent pixel, earlier first on ties.
fn brute_force_choices(events: &[Event], pixel_of: &[usize], mesh_adj: &[Vec<usize>]) -> Vec<BTreeSet<usize>> {
    (0..events.len())
        .map(|i| {
            let p = pixel_of[i];
            let own: Vec<usize> = (0..events.len()).filter(|&j| pixel_of[j] == p).collect();
            let k = own.iter().position(|&j| j == i).unwrap();
            let mut chosen: BTreeSet<usize> = own[k.saturating_sub(1)..(k + 2).min(own.len())].iter().copied().collect();
            chosen.remove(&i);
            for &q in &mesh_adj[p] {
                let mut at_q: Vec<usize> = (0..events.len()).filter(|&j| pixel_of[j] == q).collect();
                at_q.sort_by(|&a, &b| {
                    (events[a].t - events[i].t)
                        .abs()
                        .total_cmp(&(events[b].t - events[i].t).abs())
                        .then(a.cmp(&b))
                });
                chosen.extend(at_q.into_iter().take(2));
            }
            chosen
        })
        .collect()
}

#[test]
fn graph_matches_brute_force_neighbor_rule() {
    let (scene, window) = generate(&small_two_motion_scene(), 0);
    let events = &scene.events[..1500];
    let window = evseg::events::EventWindow::new(events.to_vec(), window.geometry).unwrap();
    let (mesh, graph) = window_graph(&window);
    let mesh_adj = mesh.adjacency();
    let pixel_of: Vec<usize> = events
        .iter()
        .map(|e| mesh.vertex_of((e.x as u32, e.y as u32)).unwrap())
        .collect();
    let choices = brute_force_choices(events, &pixel_of, &mesh_adj);
    let mut expected = choices.clone();
    for (i, set) in choices.iter().enumerate() {
        for &j in set {
            expected[j].insert(i);
        }
    }
    for (i, set) in expected.iter().enumerate() {
        let want: Vec<u32> = set.iter().map(|&j| j as u32).collect();
        assert_eq!(graph.adjacency[i], want, "event {i}");
    }
}
