//! Event graph construction: activity image, pixel mesh and space-time
//! neighborhoods.

mod activity;
mod delaunay;
mod stgraph;

pub use activity::{activity_image, ActivityImage};
pub use delaunay::{delaunay, PixelMesh};
pub use stgraph::{build_st_graph, STGraph};

use crate::events::EventWindow;

/// Builds the mesh and space-time graph of a window in one call.
pub fn window_graph(window: &EventWindow) -> (PixelMesh, STGraph) {
    let mesh = delaunay(&activity_image(window).active_pixels);
    let graph = build_st_graph(window, &mesh);
    (mesh, graph)
}
