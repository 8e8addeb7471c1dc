//! Greedy geographic routing toward a point.

use serde::Serialize;

use crate::error::{Error, Result};
use crate::geometry::{transmission_radius, Network, Point};
use crate::scalar::Scalar;

/// One greedy route: the visited nodes and where it stopped.
#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct RoutePath {
    /// Visited node ids; the first entry is the source.
    pub hops: Vec<usize>,
    pub terminal: usize,
    pub hop_count: usize,
    /// The route stalled at a local minimum that is not the node nearest the target.
    pub dead_end: bool,
}

/// Forwards from `source` to the neighbor closest to `target` while that strictly
/// improves on the current node. Ties go to the lowest node id.
pub fn greedy_route<S: Scalar>(net: &Network<S>, source: usize, target: &Point<S>) -> RoutePath {
    let mut hops = vec![source];
    let mut current = source;
    let mut current_d = net.positions[source].distance_sq(target);
    loop {
        let mut next = None;
        let mut next_d = current_d;
        // Neighbor lists are sorted, so strict `<` keeps the lowest id on ties.
        for &w in &net.adjacency[current] {
            let d = net.positions[w].distance_sq(target);
            if d < next_d {
                next = Some(w);
                next_d = d;
            }
        }
        match next {
            Some(w) => {
                hops.push(w);
                current = w;
                current_d = next_d;
            }
            None => break,
        }
    }
    let nearest = net.nearest_node(target);
    let dead_end = current_d > net.positions[nearest].distance_sq(target);
    RoutePath {
        hop_count: hops.len() - 1,
        terminal: current,
        hops,
        dead_end,
    }
}

/// Hop budget `ceil(2 / r(n)) + 1` for reaching the node nearest a target.
pub fn route_cost_bound(n: usize) -> Result<usize> {
    let r: f64 = transmission_radius(n)?;
    route_cost_bound_for_radius(r)
}

pub fn route_cost_bound_for_radius(radius: f64) -> Result<usize> {
    if !(radius > 0.0) {
        return Err(Error::param(format!(
            "radius must be positive, got {radius}"
        )));
    }
    Ok((2.0 / radius).ceil() as usize + 1)
}
