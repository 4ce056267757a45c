use crate::error::{Error, Result};

/// One agglomeration step. Leaves are clusters `0..n`; the cluster created by
/// step `i` is `n + i`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Merge {
    pub a: usize,
    pub b: usize,
    pub distance: f64,
    pub size: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Dendrogram {
    pub n_points: usize,
    /// `n_points - 1` merges in non-decreasing distance order.
    pub merges: Vec<Merge>,
}

/// Ward update of a squared merge distance (Lance-Williams).
#[inline]
fn lance_williams(d_ki: f64, d_kj: f64, d_ij: f64, n_i: f64, n_j: f64, n_k: f64) -> f64 {
    ((n_i + n_k) * d_ki + (n_j + n_k) * d_kj - n_k * d_ij) / (n_i + n_j + n_k)
}

/// Ward agglomerative clustering under the Euclidean metric.
///
/// Merge distances are `sqrt(2 * increase in within-cluster sum of squares)`,
/// so two singletons merge at their Euclidean distance. Uses the
/// nearest-neighbour chain on a condensed squared-distance matrix.
pub fn ward_linkage<V: AsRef<[f64]>>(points: &[V]) -> Result<Dendrogram> {
    let n = points.len();
    if n < 2 {
        return Err(Error::InsufficientInput("linkage needs at least two points".into()));
    }
    let d = points[0].as_ref().len();
    if points.iter().any(|p| p.as_ref().len() != d) {
        return Err(Error::Shape("points differ in dimension".into()));
    }
    if points.iter().any(|p| p.as_ref().iter().any(|x| !x.is_finite())) {
        return Err(Error::Domain("non-finite coordinate".into()));
    }

    // dist[i][j] for i > j, squared merge distances between active slots
    let mut dist: Vec<Vec<f64>> = (0..n)
        .map(|i| {
            (0..i)
                .map(|j| {
                    points[i]
                        .as_ref()
                        .iter()
                        .zip(points[j].as_ref())
                        .map(|(x, y)| (x - y) * (x - y))
                        .sum()
                })
                .collect()
        })
        .collect();
    let get = |dist: &Vec<Vec<f64>>, i: usize, j: usize| if i > j { dist[i][j] } else { dist[j][i] };
    let mut size = vec![1usize; n];
    let mut active = vec![true; n];
    let mut raw = Vec::with_capacity(n - 1);
    let mut chain: Vec<usize> = Vec::with_capacity(n);

    for _ in 0..n - 1 {
        if chain.is_empty() {
            chain.push(active.iter().position(|&a| a).expect("two active clusters remain"));
        }
        loop {
            let x = *chain.last().unwrap();
            let prev = chain.len().checked_sub(2).map(|i| chain[i]);
            // nearest active neighbour, preferring the chain predecessor on ties
            let mut best = prev;
            let mut best_d = prev.map_or(f64::INFINITY, |p| get(&dist, x, p));
            for y in 0..n {
                if y != x && active[y] {
                    let dy = get(&dist, x, y);
                    if dy < best_d {
                        best_d = dy;
                        best = Some(y);
                    }
                }
            }
            let y = best.expect("another active cluster exists");
            if Some(y) == prev {
                chain.pop();
                chain.pop();
                let (i, j) = (x.min(y), x.max(y));
                raw.push((i, j, best_d));
                // slot i holds the merged cluster, slot j retires
                let (n_i, n_j) = (size[i] as f64, size[j] as f64);
                for k in 0..n {
                    if active[k] && k != i && k != j {
                        let v = lance_williams(get(&dist, k, i), get(&dist, k, j), best_d, n_i, n_j, size[k] as f64);
                        if k > i {
                            dist[k][i] = v;
                        } else {
                            dist[i][k] = v;
                        }
                    }
                }
                size[i] += size[j];
                active[j] = false;
                break;
            }
            chain.push(y);
        }
    }

    // order by distance, then name clusters in merge order
    let mut order: Vec<usize> = (0..raw.len()).collect();
    order.sort_by(|&p, &q| raw[p].2.total_cmp(&raw[q].2).then(p.cmp(&q)));
    let mut parent: Vec<usize> = (0..2 * n - 1).collect();
    let mut label: Vec<usize> = (0..n).collect();
    let mut sizes = vec![1usize; 2 * n - 1];
    fn find(parent: &mut [usize], mut x: usize) -> usize {
        while parent[x] != x {
            parent[x] = parent[parent[x]];
            x = parent[x];
        }
        x
    }
    let mut merges = Vec::with_capacity(n - 1);
    for (step, &k) in order.iter().enumerate() {
        let (i, j, d2) = raw[k];
        let (ri, rj) = (find(&mut parent, i), find(&mut parent, j));
        let (ca, cb) = (label[ri], label[rj]);
        let new_id = n + step;
        let s = sizes[ca] + sizes[cb];
        sizes[new_id] = s;
        merges.push(Merge {
            a: ca.min(cb),
            b: ca.max(cb),
            distance: d2.max(0.0).sqrt(),
            size: s,
        });
        parent[rj] = ri;
        label[ri] = new_id;
    }
    Ok(Dendrogram { n_points: n, merges })
}

/// Flat clusters: the maximal subtrees whose merge distances are all below
/// `t`. Labels are numbered by first appearance in point order.
pub fn flat_clusters(dendrogram: &Dendrogram, t: f64) -> Vec<usize> {
    let n = dendrogram.n_points;
    let mut parent: Vec<usize> = (0..2 * n.max(1) - 1).collect();
    fn find(parent: &mut [usize], mut x: usize) -> usize {
        while parent[x] != x {
            parent[x] = parent[parent[x]];
            x = parent[x];
        }
        x
    }
    // children of a merge below `t` were themselves formed below `t`
    // whenever distances are monotone, which Ward guarantees
    let mut below = vec![true; 2 * n.max(1) - 1];
    for (step, m) in dendrogram.merges.iter().enumerate() {
        let id = n + step;
        below[id] = m.distance < t && below[m.a] && below[m.b];
        if below[id] {
            parent[m.a] = id;
            parent[m.b] = id;
        }
    }
    let mut labels = vec![usize::MAX; n];
    let mut names = std::collections::HashMap::new();
    for (i, l) in labels.iter_mut().enumerate() {
        let root = find(&mut parent, i);
        let next = names.len();
        *l = *names.entry(root).or_insert(next);
    }
    labels
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn two_points() {
        let d = ward_linkage(&[vec![0.0, 0.0], vec![3.0, 4.0]]).unwrap();
        assert_eq!(d.merges, vec![Merge { a: 0, b: 1, distance: 5.0, size: 2 }]);
    }

    #[test]
    fn line_example() {
        let pts: Vec<Vec<f64>> = [0.0, 1.0, 10.0, 11.0].iter().map(|&x| vec![x]).collect();
        let d = ward_linkage(&pts).unwrap();
        assert_eq!((d.merges[0].a, d.merges[0].b), (0, 1));
        assert_eq!((d.merges[1].a, d.merges[1].b), (2, 3));
        assert_eq!((d.merges[2].a, d.merges[2].b), (4, 5));
        // sqrt(2 * 2*2/4 * 10^2)
        assert!((d.merges[2].distance - 200f64.sqrt()).abs() < 1e-12);
        assert_eq!(flat_clusters(&d, 5.0), vec![0, 0, 1, 1]);
        assert_eq!(flat_clusters(&d, 100.0), vec![0, 0, 0, 0]);
        assert_eq!(flat_clusters(&d, 0.5), vec![0, 1, 2, 3]);
        // merges exactly at t stay apart
        assert_eq!(flat_clusters(&d, 1.0), vec![0, 1, 2, 3]);
    }
}
