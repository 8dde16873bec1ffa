//! Ward agglomerative clustering (nearest-neighbour chain) used to seed the
//! expert means.

use crate::error::{Error, Result};
use crate::linalg::Matrix;

/// Cuts a Ward dendrogram of the rows of `points` into `k` clusters.
///
/// Labels are `0..k`, numbered by the smallest row index they contain.
pub fn ward_clusters(points: &Matrix<f64>, k: usize) -> Result<Vec<usize>> {
    let n = points.rows();
    if k == 0 || k > n {
        return Err(Error::InvalidInput(format!("cannot cut {n} points into {k} clusters")));
    }
    let merges = ward_merges(points);
    let mut uf = UnionFind::new(n);
    for m in merges.iter().take(n - k) {
        uf.union(m.a, m.b);
    }
    Ok(relabel(&mut uf, n))
}

#[derive(Debug, Clone, Copy)]
struct Merge {
    a: usize,
    b: usize,
    height: f64,
}

/// Full merge sequence sorted by height. `a`, `b` are representative rows.
fn ward_merges(points: &Matrix<f64>) -> Vec<Merge> {
    let n = points.rows();
    if n < 2 {
        return Vec::new();
    }
    // squared Euclidean distances; Lance–Williams updates keep Ward's criterion
    let mut dist = vec![0.0; n * n];
    for i in 0..n {
        for j in (i + 1)..n {
            let d: f64 = points.row(i).iter().zip(points.row(j)).map(|(a, b)| (a - b) * (a - b)).sum();
            dist[i * n + j] = d;
            dist[j * n + i] = d;
        }
    }
    let mut size = vec![1usize; n];
    let mut active = vec![true; n];
    let mut chain: Vec<usize> = Vec::with_capacity(n);
    let mut merges = Vec::with_capacity(n - 1);
    let mut remaining = n;

    while remaining > 1 {
        if chain.is_empty() {
            chain.push(active.iter().position(|&a| a).unwrap());
        }
        let top = *chain.last().unwrap();
        let prev = if chain.len() >= 2 { Some(chain[chain.len() - 2]) } else { None };
        // nearest active neighbour of `top`; prefer the previous chain element on ties
        let mut best = usize::MAX;
        let mut best_d = f64::INFINITY;
        for j in 0..n {
            if j == top || !active[j] {
                continue;
            }
            let d = dist[top * n + j];
            if d < best_d || (d == best_d && Some(j) == prev) {
                best = j;
                best_d = d;
            }
        }
        if Some(best) == prev {
            chain.pop();
            chain.pop();
            let (a, b) = (top.min(best), top.max(best));
            merges.push(Merge { a, b, height: best_d });
            let (na, nb) = (size[a] as f64, size[b] as f64);
            for k in 0..n {
                if !active[k] || k == a || k == b {
                    continue;
                }
                let nk = size[k] as f64;
                let d = ((na + nk) * dist[a * n + k] + (nb + nk) * dist[b * n + k] - nk * best_d) / (na + nb + nk);
                dist[a * n + k] = d;
                dist[k * n + a] = d;
            }
            active[b] = false;
            size[a] += size[b];
            remaining -= 1;
        } else {
            chain.push(best);
        }
    }
    merges.sort_by(|x, y| x.height.partial_cmp(&y.height).unwrap_or(std::cmp::Ordering::Equal));
    merges
}

struct UnionFind {
    parent: Vec<usize>,
}

impl UnionFind {
    fn new(n: usize) -> Self {
        UnionFind { parent: (0..n).collect() }
    }

    fn find(&mut self, mut i: usize) -> usize {
        while self.parent[i] != i {
            self.parent[i] = self.parent[self.parent[i]];
            i = self.parent[i];
        }
        i
    }

    fn union(&mut self, a: usize, b: usize) {
        let (ra, rb) = (self.find(a), self.find(b));
        if ra != rb {
            self.parent[ra.max(rb)] = ra.min(rb);
        }
    }
}

fn relabel(uf: &mut UnionFind, n: usize) -> Vec<usize> {
    let mut map = vec![usize::MAX; n];
    let mut next = 0;
    let mut labels = vec![0; n];
    for (i, label) in labels.iter_mut().enumerate() {
        let r = uf.find(i);
        if map[r] == usize::MAX {
            map[r] = next;
            next += 1;
        }
        *label = map[r];
    }
    labels
}

/// Greedy farthest-point partition: `k` centres chosen by repeatedly taking the
/// point farthest from the current centres, then nearest-centre assignment.
pub fn farthest_point_clusters(points: &Matrix<f64>, k: usize, first: usize) -> Result<Vec<usize>> {
    let n = points.rows();
    if k == 0 || k > n {
        return Err(Error::InvalidInput(format!("cannot cut {n} points into {k} clusters")));
    }
    let sq = |i: usize, j: usize| -> f64 {
        points.row(i).iter().zip(points.row(j)).map(|(a, b)| (a - b) * (a - b)).sum()
    };
    let mut centres = vec![first % n];
    let mut nearest: Vec<f64> = (0..n).map(|i| sq(i, centres[0])).collect();
    while centres.len() < k {
        let mut far = 0;
        for i in 0..n {
            let taken = centres.contains(&i);
            if !taken && (centres.contains(&far) || nearest[i] > nearest[far]) {
                far = i;
            }
        }
        centres.push(far);
        for i in 0..n {
            nearest[i] = nearest[i].min(sq(i, far));
        }
    }
    let mut labels = vec![0; n];
    for (i, label) in labels.iter_mut().enumerate() {
        if let Some(c) = centres.iter().position(|&c| c == i) {
            *label = c;
            continue;
        }
        let mut best = 0;
        for c in 1..k {
            if sq(i, centres[c]) < sq(i, centres[best]) {
                best = c;
            }
        }
        *label = best;
    }
    Ok(labels)
}
