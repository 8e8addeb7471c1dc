//! Exact Voronoi cell areas inside the unit square.
//!
//! Each cell starts as the unit square and is clipped by the perpendicular
//! bisector half-plane of every other site, nearest sites first. Clipping stops
//! once the next site is farther than twice the cell's current radius: its
//! bisector can no longer cut the polygon.

use std::cmp::Ordering;

use crate::error::{Error, Result};
use crate::geometry::Point;
use crate::scalar::Scalar;

/// Area of each site's Voronoi cell restricted to `[0,1]²`, in site order.
pub fn voronoi_areas<S: Scalar>(positions: &[Point<S>]) -> Result<Vec<S>> {
    validate_sites(positions)?;
    Ok((0..positions.len())
        .map(|i| polygon_area(&voronoi_cell(positions, i)))
        .collect())
}

/// Vertices (counter-clockwise) of the clipped cell of `site`.
pub fn voronoi_cell<S: Scalar>(positions: &[Point<S>], site: usize) -> Vec<Point<S>> {
    let p = positions[site];
    let (zero, one) = (S::zero(), S::one());
    let mut poly = vec![
        Point::new(zero, zero),
        Point::new(one, zero),
        Point::new(one, one),
        Point::new(zero, one),
    ];

    let mut others: Vec<(S, usize)> = positions
        .iter()
        .enumerate()
        .filter(|&(j, _)| j != site)
        .map(|(j, q)| (p.distance_sq(q), j))
        .collect();
    others.sort_unstable_by(|a, b| {
        a.0.partial_cmp(&b.0)
            .unwrap_or(Ordering::Equal)
            .then(a.1.cmp(&b.1))
    });

    let four = S::lit(4.0);
    let mut reach_sq = max_distance_sq(&poly, p);
    for (d_sq, j) in others {
        if d_sq > four * reach_sq {
            break;
        }
        poly = clip_bisector(&poly, p, positions[j]);
        if poly.is_empty() {
            break;
        }
        reach_sq = max_distance_sq(&poly, p);
    }
    poly
}

/// Shoelace area of a simple polygon.
pub fn polygon_area<S: Scalar>(poly: &[Point<S>]) -> S {
    if poly.len() < 3 {
        return S::zero();
    }
    let mut twice = S::zero();
    for (k, a) in poly.iter().enumerate() {
        let b = poly[(k + 1) % poly.len()];
        twice = twice + (a.x * b.y - b.x * a.y);
    }
    (twice / S::lit(2.0)).abs()
}

fn max_distance_sq<S: Scalar>(poly: &[Point<S>], p: Point<S>) -> S {
    poly.iter()
        .map(|v| v.distance_sq(&p))
        .fold(S::zero(), S::max)
}

/// Keeps the part of `poly` closer to `site` than to `other`.
fn clip_bisector<S: Scalar>(poly: &[Point<S>], site: Point<S>, other: Point<S>) -> Vec<Point<S>> {
    // Inside iff (v - mid)·(other - site) <= 0.
    let half = S::lit(0.5);
    let (nx, ny) = (other.x - site.x, other.y - site.y);
    let (mx, my) = ((site.x + other.x) * half, (site.y + other.y) * half);
    let side = |v: &Point<S>| (v.x - mx) * nx + (v.y - my) * ny;

    let mut out = Vec::with_capacity(poly.len() + 1);
    for (k, cur) in poly.iter().enumerate() {
        let next = &poly[(k + 1) % poly.len()];
        let (sc, sn) = (side(cur), side(next));
        let cur_in = sc <= S::zero();
        let next_in = sn <= S::zero();
        if cur_in {
            out.push(*cur);
        }
        if cur_in != next_in {
            let t = sc / (sc - sn);
            out.push(Point::new(
                cur.x + t * (next.x - cur.x),
                cur.y + t * (next.y - cur.y),
            ));
        }
    }
    out
}

pub(crate) fn validate_sites<S: Scalar>(positions: &[Point<S>]) -> Result<()> {
    if positions.is_empty() {
        return Err(Error::input("no sites"));
    }
    if let Some((i, p)) = positions
        .iter()
        .enumerate()
        .find(|(_, p)| !p.in_unit_square())
    {
        return Err(Error::input(format!(
            "site {i} at ({}, {}) lies outside the unit square",
            p.x, p.y
        )));
    }
    let mut order: Vec<usize> = (0..positions.len()).collect();
    order.sort_unstable_by(|&a, &b| positions[a].lex_cmp(&positions[b]));
    for w in order.windows(2) {
        if positions[w[0]] == positions[w[1]] {
            return Err(Error::input(format!(
                "sites {} and {} coincide",
                w[0].min(w[1]),
                w[0].max(w[1])
            )));
        }
    }
    Ok(())
}
