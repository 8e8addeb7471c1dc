//! Random geometric graphs on the unit square.

mod voronoi;

use std::cmp::Ordering;
use std::collections::VecDeque;

use rand::Rng;
use serde::{Deserialize, Deserializer, Serialize, Serializer};

use crate::error::{Error, Result};
use crate::rng;
use crate::scalar::Scalar;

pub use voronoi::{polygon_area, voronoi_areas, voronoi_cell};

/// A location in the unit square. Serialized as `[x, y]`.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct Point<S> {
    pub x: S,
    pub y: S,
}

impl<S: Scalar> Point<S> {
    pub fn new(x: S, y: S) -> Self {
        Self { x, y }
    }

    #[inline]
    pub fn distance_sq(&self, other: &Self) -> S {
        let dx = self.x - other.x;
        let dy = self.y - other.y;
        dx * dx + dy * dy
    }

    #[inline]
    pub fn distance(&self, other: &Self) -> S {
        self.distance_sq(other).sqrt()
    }

    pub fn in_unit_square(&self) -> bool {
        let (zero, one) = (S::zero(), S::one());
        self.x >= zero && self.x <= one && self.y >= zero && self.y <= one
    }

    /// Draws a point uniformly from `[0,1)²`.
    pub fn uniform<R: Rng + ?Sized>(rng: &mut R) -> Self {
        let x = rng::unit(rng);
        let y = rng::unit(rng);
        Self { x, y }
    }

    pub(crate) fn lex_cmp(&self, other: &Self) -> Ordering {
        self.x
            .partial_cmp(&other.x)
            .unwrap_or(Ordering::Equal)
            .then(self.y.partial_cmp(&other.y).unwrap_or(Ordering::Equal))
    }
}

impl<S: Serialize> Serialize for Point<S> {
    fn serialize<Ser: Serializer>(&self, s: Ser) -> std::result::Result<Ser::Ok, Ser::Error> {
        [&self.x, &self.y].serialize(s)
    }
}

impl<'de, S: Deserialize<'de>> Deserialize<'de> for Point<S> {
    fn deserialize<D: Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        let [x, y] = <[S; 2]>::deserialize(d)?;
        Ok(Point { x, y })
    }
}

/// An immutable random geometric graph `G(n, r)` together with the Voronoi
/// areas of its nodes.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(bound(serialize = "S: Serialize", deserialize = "S: Deserialize<'de>"))]
pub struct Network<S> {
    pub n: usize,
    pub radius: S,
    pub positions: Vec<Point<S>>,
    /// Sorted neighbor ids per node.
    pub adjacency: Vec<Vec<usize>>,
    /// Voronoi cell area of each node as a fraction of the unit square.
    pub areas: Vec<S>,
}

/// `sqrt(10 ln n / n)`: the radius at which `G(n, r)` is connected with high
/// probability and greedy routing needs `O(1/r)` hops.
pub fn transmission_radius<S: Scalar>(n: usize) -> Result<S> {
    if n < 2 {
        return Err(Error::param(format!(
            "transmission radius needs n >= 2, got {n}"
        )));
    }
    let nf = S::of_usize(n);
    Ok((S::lit(10.0) * nf.ln() / nf).sqrt())
}

/// Side `sqrt(2 ln n / n)` of the occupancy partition used for connectivity.
pub fn occupancy_cell_side<S: Scalar>(n: usize) -> Result<S> {
    if n < 2 {
        return Err(Error::param(format!(
            "occupancy cell side needs n >= 2, got {n}"
        )));
    }
    let nf = S::of_usize(n);
    Ok((S::lit(2.0) * nf.ln() / nf).sqrt())
}

/// Places `n` nodes i.i.d. uniformly in the unit square using `seed`.
pub fn generate_network<S: Scalar>(n: usize, radius: S, seed: u64) -> Result<Network<S>> {
    let mut r = rng::stream(seed, 0);
    generate_network_with(n, radius, &mut r)
}

pub fn generate_network_with<S: Scalar, R: Rng + ?Sized>(
    n: usize,
    radius: S,
    rng: &mut R,
) -> Result<Network<S>> {
    if n < 2 {
        return Err(Error::param(format!("network needs n >= 2, got {n}")));
    }
    if !(radius > S::zero() && radius <= S::SQRT_2()) {
        return Err(Error::param(format!("radius {radius} outside (0, sqrt 2]")));
    }
    let positions = (0..n).map(|_| Point::uniform(rng)).collect();
    Network::from_positions(positions, radius)
}

impl<S: Scalar> Network<S> {
    /// Builds adjacency (distance `<= radius`) and Voronoi areas for fixed positions.
    pub fn from_positions(positions: Vec<Point<S>>, radius: S) -> Result<Self> {
        let areas = voronoi_areas(&positions)?;
        let n = positions.len();
        let r_sq = radius * radius;
        let mut adjacency = vec![Vec::new(); n];
        for i in 0..n {
            for j in (i + 1)..n {
                if positions[i].distance_sq(&positions[j]) <= r_sq {
                    adjacency[i].push(j);
                    adjacency[j].push(i);
                }
            }
        }
        // Pushes happen in increasing id order, so each list is already sorted.
        Ok(Self {
            n,
            radius,
            positions,
            adjacency,
            areas,
        })
    }

    pub fn degree(&self, v: usize) -> usize {
        self.adjacency[v].len()
    }

    /// Node nearest to `target` by linear scan, lowest id on ties.
    pub fn nearest_node(&self, target: &Point<S>) -> usize {
        let mut best = 0;
        let mut best_d = self.positions[0].distance_sq(target);
        for (i, p) in self.positions.iter().enumerate().skip(1) {
            let d = p.distance_sq(target);
            if d < best_d {
                best = i;
                best_d = d;
            }
        }
        best
    }

    /// Checks the structural invariants of a deserialized network.
    pub fn validate(&self) -> Result<()> {
        let n = self.n;
        if self.positions.len() != n || self.adjacency.len() != n || self.areas.len() != n {
            return Err(Error::input("network field lengths disagree with n"));
        }
        voronoi::validate_sites(&self.positions)?;
        let r_sq = self.radius * self.radius;
        for (i, nbrs) in self.adjacency.iter().enumerate() {
            if nbrs.windows(2).any(|w| w[0] >= w[1]) {
                return Err(Error::input(format!(
                    "adjacency of {i} not strictly sorted"
                )));
            }
            for &j in nbrs {
                if j >= n || j == i || self.adjacency[j].binary_search(&i).is_err() {
                    return Err(Error::input(format!("edge {i}-{j} invalid or asymmetric")));
                }
            }
            let expected = (0..n)
                .filter(|&j| j != i && self.positions[i].distance_sq(&self.positions[j]) <= r_sq)
                .count();
            if expected != nbrs.len() {
                return Err(Error::input(format!(
                    "adjacency of {i} violates the radius rule"
                )));
            }
        }
        if self.areas.iter().any(|&a| !(a > S::zero())) {
            return Err(Error::input("non-positive Voronoi area"));
        }
        let total: S = self.areas.iter().copied().sum();
        if (total - S::one()).abs() > S::lit(1e-6) {
            return Err(Error::input(format!("Voronoi areas sum to {total}")));
        }
        Ok(())
    }
}

impl<S: Scalar + Serialize> Network<S> {
    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string(self)?)
    }
}

impl<S: Scalar + for<'de> Deserialize<'de>> Network<S> {
    pub fn from_json(doc: &str) -> Result<Self> {
        let net: Self = serde_json::from_str(doc)?;
        net.validate()?;
        Ok(net)
    }
}

/// True iff every node is reachable from node 0.
pub fn is_connected<S>(net: &Network<S>) -> bool {
    if net.n == 0 {
        return true;
    }
    let mut seen = vec![false; net.n];
    let mut queue = VecDeque::from([0usize]);
    seen[0] = true;
    let mut reached = 1;
    while let Some(v) = queue.pop_front() {
        for &w in &net.adjacency[v] {
            if !seen[w] {
                seen[w] = true;
                reached += 1;
                queue.push_back(w);
            }
        }
    }
    reached == net.n
}

/// True iff each cell of a `ceil(1/cell_side)²` partition of the square holds a node.
pub fn occupancy_check<S: Scalar>(net: &Network<S>, cell_side: S) -> bool {
    if !(cell_side > S::zero()) {
        return false;
    }
    let k = (S::one() / cell_side)
        .ceil()
        .to_usize()
        .unwrap_or(usize::MAX)
        .max(1);
    let Some(cells) = k.checked_mul(k) else {
        return false;
    };
    if cells > net.n {
        return false;
    }
    let mut occupied = vec![false; cells];
    let cell = |c: S| (c / cell_side).floor().to_usize().unwrap_or(0).min(k - 1);
    for p in &net.positions {
        occupied[cell(p.y) * k + cell(p.x)] = true;
    }
    occupied.into_iter().all(|o| o)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn net(raw: &[(f64, f64)], radius: f64) -> Network<f64> {
        let pts = raw.iter().map(|&(x, y)| Point::new(x, y)).collect();
        Network::from_positions(pts, radius).unwrap()
    }

    #[test]
    fn radius_formula() {
        let r2: f64 = transmission_radius(2).unwrap();
        assert!((r2 - (10.0 * 2f64.ln() / 2.0).sqrt()).abs() < 1e-15);
        let r100: f64 = transmission_radius(100).unwrap();
        assert!((r100 - 0.6786).abs() < 1e-4, "{r100}");
        assert!(transmission_radius::<f64>(1).is_err());
        for n in 3..2000 {
            let a: f64 = transmission_radius(n).unwrap();
            let b: f64 = transmission_radius(2 * n).unwrap();
            assert!(b < a);
        }
    }

    #[test]
    fn full_radius_pair_is_adjacent() {
        for seed in 0..20 {
            let g = generate_network::<f64>(2, 2f64.sqrt(), seed).unwrap();
            assert_eq!(g.adjacency, vec![vec![1], vec![0]]);
            assert!(is_connected(&g));
        }
    }

    #[test]
    fn generation_is_deterministic() {
        let a = generate_network::<f64>(64, 0.3, 11).unwrap();
        let b = generate_network::<f64>(64, 0.3, 11).unwrap();
        assert_eq!(a.to_json().unwrap(), b.to_json().unwrap());
        let c = generate_network::<f64>(64, 0.3, 12).unwrap();
        assert_ne!(a, c);
    }

    #[test]
    fn bad_parameters_rejected() {
        assert!(generate_network::<f64>(1, 0.5, 0).is_err());
        assert!(generate_network::<f64>(10, 0.0, 0).is_err());
        assert!(generate_network::<f64>(10, 1.5, 0).is_err());
    }

    #[test]
    fn connectivity_of_pairs() {
        assert!(is_connected(&net(&[(0.1, 0.1), (0.2, 0.1)], 0.2)));
        assert!(!is_connected(&net(&[(0.1, 0.1), (0.9, 0.9)], 0.2)));
    }

    #[test]
    fn adjacency_boundary_is_inclusive() {
        let g = net(&[(0.0, 0.0), (0.5, 0.0)], 0.5);
        assert_eq!(g.adjacency[0], vec![1]);
    }

    #[test]
    fn occupancy_examples() {
        let one = Network::from_positions(vec![Point::new(0.4, 0.7)], 0.1).unwrap();
        assert!(occupancy_check(&one, 1.0));
        let left = net(&[(0.1, 0.2), (0.3, 0.8)], 0.2);
        assert!(!occupancy_check(&left, 0.5));
        let spread = net(&[(0.1, 0.2), (0.7, 0.2), (0.2, 0.9), (0.8, 0.6)], 0.2);
        assert!(occupancy_check(&spread, 0.5));
    }

    #[test]
    fn json_round_trip_and_schema() {
        let g = generate_network::<f64>(12, 0.4, 3).unwrap();
        let doc = g.to_json().unwrap();
        let v: serde_json::Value = serde_json::from_str(&doc).unwrap();
        for key in ["n", "radius", "positions", "adjacency", "areas"] {
            assert!(v.get(key).is_some(), "missing {key}");
        }
        assert_eq!(v["positions"][0].as_array().unwrap().len(), 2);
        assert_eq!(Network::<f64>::from_json(&doc).unwrap(), g);
    }

    #[test]
    fn tampered_json_rejected() {
        let g = generate_network::<f64>(12, 0.4, 3).unwrap();
        let mut bad = g.clone();
        bad.adjacency[0].clear();
        assert!(Network::<f64>::from_json(&bad.to_json().unwrap()).is_err());
    }
}
