//! Ward agglomerative clustering and fixed-size repacking.

use serde::{Deserialize, Serialize};

use super::ClusterError;

/// One merge of the dendrogram. Nodes `0..n` are leaves in id order; the
/// merge at step `i` creates node `n + i`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Merge {
    pub left: usize,
    pub right: usize,
    pub height: f64,
    pub size: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ClusterPlan {
    pub clusters: Vec<Vec<String>>,
    pub target_size: usize,
    /// Leaf labels of the trace, sorted.
    pub leaves: Vec<String>,
    pub linkage_trace: Vec<Merge>,
}

fn euclidean(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum::<f64>().sqrt()
}

/// Ward linkage via the Lance–Williams update. Ties go to the pair with
/// the smallest node ids, so equal inputs give equal dendrograms.
pub fn ward_linkage(points: &[Vec<f64>]) -> Vec<Merge> {
    let n = points.len();
    let total = 2 * n.max(1) - 1;
    let mut dist = vec![vec![0.0; total]; total];
    for i in 0..n {
        for j in i + 1..n {
            let d = euclidean(&points[i], &points[j]);
            dist[i][j] = d;
            dist[j][i] = d;
        }
    }
    let mut size = vec![1usize; total];
    let mut active: Vec<usize> = (0..n).collect();
    let mut merges = Vec::with_capacity(n.saturating_sub(1));
    while active.len() > 1 {
        let mut best: Option<(f64, usize, usize)> = None;
        for (x, &a) in active.iter().enumerate() {
            for &b in &active[x + 1..] {
                let d = dist[a][b];
                if best.is_none_or(|(bd, _, _)| d < bd) {
                    best = Some((d, a, b));
                }
            }
        }
        let (height, a, b) = best.expect("two active nodes");
        let node = n + merges.len();
        size[node] = size[a] + size[b];
        for &k in &active {
            if k == a || k == b {
                continue;
            }
            let (na, nb, nk) = (size[a] as f64, size[b] as f64, size[k] as f64);
            let sq = ((na + nk) * dist[a][k].powi(2) + (nb + nk) * dist[b][k].powi(2) - nk * height.powi(2)) / (na + nb + nk);
            let d = sq.max(0.0).sqrt();
            dist[node][k] = d;
            dist[k][node] = d;
        }
        active.retain(|&k| k != a && k != b);
        active.push(node);
        merges.push(Merge {
            left: a,
            right: b,
            height,
            size: size[node],
        });
    }
    merges
}

fn leaves_of(node: usize, n: usize, merges: &[Merge], out: &mut Vec<usize>) {
    if node < n {
        out.push(node);
    } else {
        let m = &merges[node - n];
        leaves_of(m.left, n, merges, out);
        leaves_of(m.right, n, merges, out);
    }
}

fn centroid(points: &[Vec<f64>], members: &[usize]) -> Vec<f64> {
    let dim = points[members[0]].len();
    let mut c = vec![0.0; dim];
    for &m in members {
        for (acc, x) in c.iter_mut().zip(&points[m]) {
            *acc += x;
        }
    }
    c.iter_mut().for_each(|x| *x /= members.len() as f64);
    c
}

fn mean_distance(points: &[Vec<f64>], p: usize, members: &[usize]) -> f64 {
    let others: Vec<usize> = members.iter().copied().filter(|&m| m != p).collect();
    if others.is_empty() {
        return 0.0;
    }
    others.iter().map(|&m| euclidean(&points[p], &points[m])).sum::<f64>() / others.len() as f64
}

fn silhouette(points: &[Vec<f64>], p: usize, own: usize, groups: &[Vec<usize>]) -> f64 {
    let a = mean_distance(points, p, &groups[own]);
    let b = groups
        .iter()
        .enumerate()
        .filter(|(g, members)| *g != own && !members.is_empty())
        .map(|(_, members)| mean_distance(points, p, members))
        .fold(f64::INFINITY, f64::min);
    if !b.is_finite() {
        return 0.0;
    }
    let scale = a.max(b);
    if scale == 0.0 {
        0.0
    } else {
        (b - a) / scale
    }
}

/// Clusters of exactly `s` units, except one remainder cluster when `s`
/// does not divide the unit count.
///
/// The dendrogram is cut into `⌈n/s⌉` subtrees. The smallest subtree is
/// given the remainder capacity `n − (⌈n/s⌉ − 1)·s` and every other one
/// capacity `s`. While a group exceeds its capacity, its member with the
/// lowest silhouette moves to the group with free capacity whose centroid
/// is nearest. Clusters are listed in the order their subtrees were
/// completed in the dendrogram.
pub fn cluster_fixed_size(units: &[(String, Vec<f64>)], s: usize) -> Result<ClusterPlan, ClusterError> {
    if s == 0 {
        return Err(ClusterError::ZeroSize);
    }
    if units.len() < s {
        return Err(ClusterError::TooFewUnits { units: units.len(), size: s });
    }
    let mut sorted: Vec<&(String, Vec<f64>)> = units.iter().collect();
    sorted.sort_by(|a, b| a.0.cmp(&b.0));
    for w in sorted.windows(2) {
        if w[0].0 == w[1].0 {
            return Err(ClusterError::DuplicateUnit(w[0].0.clone()));
        }
    }
    let dim = sorted[0].1.len();
    if let Some(bad) = sorted.iter().find(|u| u.1.len() != dim) {
        return Err(ClusterError::DimensionMismatch {
            unit: bad.0.clone(),
            expected: dim,
            found: bad.1.len(),
        });
    }
    let labels: Vec<String> = sorted.iter().map(|u| u.0.clone()).collect();
    let points: Vec<Vec<f64>> = sorted.iter().map(|u| u.1.clone()).collect();
    let n = points.len();
    let merges = ward_linkage(&points);
    let g = n.div_ceil(s);

    // Roots of the cut: undo the last g − 1 merges.
    let mut roots: Vec<usize> = vec![if n == 1 { 0 } else { 2 * n - 2 }];
    for step in (n - g..n - 1).rev() {
        let node = n + step;
        let m = &merges[step];
        roots.retain(|&r| r != node);
        roots.push(m.left);
        roots.push(m.right);
    }
    let mut groups: Vec<(usize, Vec<usize>)> = roots
        .iter()
        .map(|&r| {
            let mut members = Vec::new();
            leaves_of(r, n, &merges, &mut members);
            members.sort_unstable();
            (r, members)
        })
        .collect();
    // Completion order: leaves count as complete from the start.
    groups.sort_by_key(|(root, members)| (if *root < n { 0 } else { *root + 1 }, members[0]));
    let mut members: Vec<Vec<usize>> = groups.into_iter().map(|(_, m)| m).collect();

    let remainder = n - (g - 1) * s;
    let small = (0..g).min_by_key(|&i| (members[i].len(), i)).expect("at least one group");
    let capacity: Vec<usize> = (0..g).map(|i| if i == small { remainder } else { s }).collect();

    while let Some(over) = (0..g).find(|&i| members[i].len() > capacity[i]) {
        let worst = *members[over]
            .iter()
            .min_by(|&&p, &&q| {
                let sp = silhouette(&points, p, over, &members);
                let sq = silhouette(&points, q, over, &members);
                // Among equally poor fits the last unit in id order moves.
                sp.total_cmp(&sq).then(q.cmp(&p))
            })
            .expect("oversized group is non-empty");
        let target = (0..g)
            .filter(|&i| members[i].len() < capacity[i])
            .min_by(|&i, &j| {
                let di = euclidean(&points[worst], &centroid(&points, &members[i]));
                let dj = euclidean(&points[worst], &centroid(&points, &members[j]));
                di.total_cmp(&dj).then(i.cmp(&j))
            })
            .expect("total capacity equals unit count");
        members[over].retain(|&m| m != worst);
        members[target].push(worst);
        members[target].sort_unstable();
    }

    Ok(ClusterPlan {
        clusters: members
            .into_iter()
            .map(|m| m.into_iter().map(|i| labels[i].clone()).collect())
            .collect(),
        target_size: s,
        leaves: labels,
        linkage_trace: merges,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn units(points: &[(&str, [f64; 2])]) -> Vec<(String, Vec<f64>)> {
        points.iter().map(|(id, p)| (id.to_string(), p.to_vec())).collect()
    }

    #[test]
    fn ward_heights_match_hand_computation() {
        // Points 0, 1 and 3 on a line: merge {0,1} at 1, then Ward distance
        // to {3}: sqrt(((1+1)·9 + (1+1)·4 − 1·1) / 3) = sqrt(25/3).
        let m = ward_linkage(&[vec![0.0], vec![1.0], vec![3.0]]);
        assert_eq!((m[0].left, m[0].right, m[0].height), (0, 1, 1.0));
        assert!((m[1].height - (25.0f64 / 3.0).sqrt()).abs() < 1e-12);
        assert_eq!(m[1].size, 3);
    }

    #[test]
    fn two_blobs_are_recovered() {
        let u = units(&[
            ("a", [0.0, 0.0]),
            ("d", [10.0, 10.0]),
            ("b", [0.1, 0.0]),
            ("e", [10.1, 10.0]),
            ("c", [0.0, 0.2]),
            ("f", [10.0, 10.3]),
        ]);
        let plan = cluster_fixed_size(&u, 3).unwrap();
        let mut got = plan.clusters.clone();
        got.sort();
        assert_eq!(got, vec![vec!["a", "b", "c"], vec!["d", "e", "f"]]);
    }

    #[test]
    fn sizes_with_remainder() {
        let u: Vec<(String, Vec<f64>)> = (0..7).map(|i| (format!("u{i}"), vec![(i * i) as f64])).collect();
        let plan = cluster_fixed_size(&u, 3).unwrap();
        let mut sizes: Vec<usize> = plan.clusters.iter().map(Vec::len).collect();
        sizes.sort_unstable();
        assert_eq!(sizes, vec![1, 3, 3]);
    }

    #[test]
    fn identical_vectors_group_by_id() {
        let u: Vec<(String, Vec<f64>)> = (0..6).map(|i| (format!("u{i}"), vec![1.0, 0.0])).collect();
        let mut got = cluster_fixed_size(&u, 3).unwrap().clusters;
        got.sort();
        assert_eq!(got, vec![vec!["u0", "u1", "u2"], vec!["u3", "u4", "u5"]]);
    }

    #[test]
    fn errors() {
        let u = units(&[("a", [0.0, 0.0])]);
        assert!(matches!(cluster_fixed_size(&u, 0), Err(ClusterError::ZeroSize)));
        assert!(matches!(cluster_fixed_size(&u, 2), Err(ClusterError::TooFewUnits { .. })));
        let bad = vec![("a".to_string(), vec![0.0]), ("b".to_string(), vec![0.0, 1.0])];
        assert!(matches!(cluster_fixed_size(&bad, 1), Err(ClusterError::DimensionMismatch { .. })));
    }
}
