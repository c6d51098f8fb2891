use std::collections::HashMap;

use super::AdvantageGrid;
use crate::error::{Error, Result};

/// Grid edge: horizontal edges run from node `(i, j)` to `(i + 1, j)`,
/// vertical ones from `(i, j)` to `(i, j + 1)`.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
enum Edge {
    H(usize, usize),
    V(usize, usize),
}

fn crossing(grid: &AdvantageGrid, e: Edge) -> [f64; 2] {
    let a = &grid.mean;
    let (p, q) = (&grid.p_grid, &grid.q_grid);
    match e {
        Edge::H(i, j) => {
            let t = a[i][j] / (a[i][j] - a[i + 1][j]);
            [p[i] + t * (p[i + 1] - p[i]), q[j]]
        }
        Edge::V(i, j) => {
            let t = a[i][j] / (a[i][j] - a[i][j + 1]);
            [p[i], q[j] + t * (q[j + 1] - q[j])]
        }
    }
}

fn cell_segments(grid: &AdvantageGrid, i: usize, j: usize) -> Vec<(Edge, Edge)> {
    let a = &grid.mean;
    let v = [a[i][j], a[i + 1][j], a[i + 1][j + 1], a[i][j + 1]];
    let bits = v.iter().enumerate().fold(0u8, |b, (k, &x)| b | (((x > 0.0) as u8) << k));
    let (b, r, t, l) = (Edge::H(i, j), Edge::V(i + 1, j), Edge::H(i, j + 1), Edge::V(i, j));
    let centre_pos = v.iter().sum::<f64>() / 4.0 > 0.0;
    match bits {
        0 | 15 => vec![],
        1 | 14 => vec![(l, b)],
        2 | 13 => vec![(b, r)],
        4 | 11 => vec![(r, t)],
        8 | 7 => vec![(t, l)],
        3 | 12 => vec![(l, r)],
        6 | 9 => vec![(b, t)],
        5 if centre_pos => vec![(b, r), (t, l)],
        5 => vec![(l, b), (r, t)],
        10 if centre_pos => vec![(l, b), (r, t)],
        10 => vec![(b, r), (t, l)],
        _ => unreachable!(),
    }
}

fn length(line: &[[f64; 2]]) -> f64 {
    line.windows(2).map(|w| ((w[1][0] - w[0][0]).powi(2) + (w[1][1] - w[0][1]).powi(2)).sqrt()).sum()
}

/// All zero-level polylines of the bilinear interpolant, by marching squares.
pub fn zero_polylines(grid: &AdvantageGrid) -> Vec<Vec<[f64; 2]>> {
    let (np, nq) = (grid.p_grid.len(), grid.q_grid.len());
    let mut segs: Vec<(Edge, Edge)> = Vec::new();
    for i in 0..np.saturating_sub(1) {
        for j in 0..nq.saturating_sub(1) {
            segs.extend(cell_segments(grid, i, j));
        }
    }
    let mut by_edge: HashMap<Edge, Vec<usize>> = HashMap::new();
    for (k, &(a, b)) in segs.iter().enumerate() {
        by_edge.entry(a).or_default().push(k);
        by_edge.entry(b).or_default().push(k);
    }

    let mut used = vec![false; segs.len()];
    let mut lines = Vec::new();
    // Open chains start at edges touched once; closed loops are picked up after.
    let mut starts: Vec<usize> =
        (0..segs.len()).filter(|&k| by_edge[&segs[k].0].len() == 1 || by_edge[&segs[k].1].len() == 1).collect();
    starts.extend(0..segs.len());
    for start in starts {
        if used[start] {
            continue;
        }
        used[start] = true;
        let (a, b) = segs[start];
        let (first, mut cur) = if by_edge[&a].len() == 1 { (a, b) } else { (b, a) };
        let mut chain = vec![first, cur];
        while let Some(&next) = by_edge[&cur].iter().find(|&&k| !used[k]) {
            used[next] = true;
            let (x, y) = segs[next];
            cur = if x == cur { y } else { x };
            chain.push(cur);
        }
        let mut pts: Vec<[f64; 2]> = chain.iter().map(|&e| crossing(grid, e)).collect();
        if pts.first().map(|p| p[0]) > pts.last().map(|p| p[0]) {
            pts.reverse();
        }
        lines.push(pts);
    }
    lines
}

/// The longest connected zero-level polyline, oriented with increasing `p`.
pub fn zero_contour(grid: &AdvantageGrid) -> Result<Vec<[f64; 2]>> {
    if !grid.has_sign_change() {
        return Err(Error::NoSignChange);
    }
    zero_polylines(grid).into_iter().max_by(|a, b| length(a).total_cmp(&length(b))).ok_or(Error::NoSignChange)
}
