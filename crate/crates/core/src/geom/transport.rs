use super::{dist, PointCloud};
use crate::error::{Error, Result};

/// Minimum-cost perfect matching on a square cost matrix (row-major,
/// `n × n`) by the Hungarian method with potentials, `O(n³)`. Returns the
/// column assigned to each row.
pub fn assignment(cost: &[f64], n: usize) -> Result<Vec<usize>> {
    if cost.len() != n * n {
        return Err(Error::InvalidArgument(format!("cost matrix has {} entries, expected {}", cost.len(), n * n)));
    }
    if cost.iter().any(|c| !c.is_finite()) {
        return Err(Error::InvalidArgument("non-finite cost".into()));
    }
    // 1-based arrays with a virtual column 0, as in the classical version.
    let mut u = vec![0.0; n + 1];
    let mut v = vec![0.0; n + 1];
    let mut matched = vec![0usize; n + 1];
    let mut way = vec![0usize; n + 1];
    for row in 1..=n {
        matched[0] = row;
        let mut j0 = 0;
        let mut minv = vec![f64::INFINITY; n + 1];
        let mut used = vec![false; n + 1];
        loop {
            used[j0] = true;
            let i0 = matched[j0];
            let mut delta = f64::INFINITY;
            let mut j1 = 0;
            for j in 1..=n {
                if used[j] {
                    continue;
                }
                let cur = cost[(i0 - 1) * n + j - 1] - u[i0] - v[j];
                if cur < minv[j] {
                    minv[j] = cur;
                    way[j] = j0;
                }
                if minv[j] < delta {
                    delta = minv[j];
                    j1 = j;
                }
            }
            for j in 0..=n {
                if used[j] {
                    u[matched[j]] += delta;
                    v[j] -= delta;
                } else {
                    minv[j] -= delta;
                }
            }
            j0 = j1;
            if matched[j0] == 0 {
                break;
            }
        }
        loop {
            let j1 = way[j0];
            matched[j0] = matched[j1];
            j0 = j1;
            if j0 == 0 {
                break;
            }
        }
    }
    let mut out = vec![0; n];
    for j in 1..=n {
        out[matched[j] - 1] = j - 1;
    }
    Ok(out)
}

/// Masses closer than this to a multiple of `1/k` count as rational.
const RATIONAL_TOL: f64 = 1e-9;

fn atom_counts(cloud: &PointCloud, k: usize) -> Option<Vec<usize>> {
    let kf = k as f64;
    let mut counts = Vec::with_capacity(cloud.len());
    for m in cloud.masses() {
        let c = (m * kf).round();
        if (m * kf - c).abs() > RATIONAL_TOL * kf {
            return None;
        }
        counts.push(c as usize);
    }
    (counts.iter().sum::<usize>() == k).then_some(counts)
}

fn common_denominator(a: &PointCloud, b: &PointCloud, upto: usize) -> Option<(usize, Vec<usize>, Vec<usize>)> {
    (1..=upto).find_map(|k| Some((k, atom_counts(a, k)?, atom_counts(b, k)?)))
}

/// Exact W₁ between point clouds with rational masses: both are split into
/// `k` equal atoms (`k ≤ atom_budget` the common denominator) and matched
/// optimally.
pub fn w1_exact_small(a: &PointCloud, b: &PointCloud, atom_budget: usize) -> Result<f64> {
    let Some((k, ca, cb)) = common_denominator(a, b, atom_budget) else {
        let needed = common_denominator(a, b, 100_000.max(atom_budget))
            .map_or(usize::MAX, |(k, _, _)| k);
        return Err(Error::BudgetExceeded { needed, budget: atom_budget });
    };
    let expand = |cloud: &PointCloud, counts: &[usize]| {
        cloud
            .points()
            .iter()
            .zip(counts)
            .flat_map(|(p, c)| std::iter::repeat(*p).take(*c))
            .collect::<Vec<_>>()
    };
    let xa = expand(a, &ca);
    let xb = expand(b, &cb);
    let cost: Vec<f64> = xa.iter().flat_map(|p| xb.iter().map(move |q| dist(*p, *q))).collect();
    let matching = assignment(&cost, k)?;
    Ok(matching.iter().enumerate().map(|(i, j)| cost[i * k + j]).sum::<f64>() / k as f64)
}

/// Exact W₁ between point clouds with arbitrary real masses, by successive
/// shortest paths on the complete bipartite transport network. Each round
/// costs `O(nm)`; intended for a few hundred points per side.
pub fn w1_transport(a: &PointCloud, b: &PointCloud) -> f64 {
    let (n, m) = (a.len(), b.len());
    let cost: Vec<f64> = a
        .points()
        .iter()
        .flat_map(|p| b.points().iter().map(move |q| dist(*p, *q)))
        .collect();
    let mut supply = a.masses().to_vec();
    let mut demand = b.masses().to_vec();
    let mut flow = vec![0.0; n * m];
    // Node potentials: sources 0..n, sinks n..n+m. Sources with supply left
    // keep potential zero, so they can all seed the search at distance zero.
    let mut pot = vec![0.0; n + m];
    let eps = 1e-15;
    let mut dist_to = vec![0.0; n + m];
    let mut parent = vec![usize::MAX; n + m];
    let mut done = vec![false; n + m];
    loop {
        if supply.iter().all(|s| *s <= eps) || demand.iter().all(|d| *d <= eps) {
            break;
        }
        dist_to.fill(f64::INFINITY);
        parent.fill(usize::MAX);
        done.fill(false);
        for i in 0..n {
            if supply[i] > eps {
                dist_to[i] = 0.0;
            }
        }
        // Dense Dijkstra on reduced costs.
        loop {
            let mut u = usize::MAX;
            let mut best = f64::INFINITY;
            for v in 0..n + m {
                if !done[v] && dist_to[v] < best {
                    best = dist_to[v];
                    u = v;
                }
            }
            if u == usize::MAX {
                break;
            }
            done[u] = true;
            if u < n {
                for j in 0..m {
                    let v = n + j;
                    let nd = best + (cost[u * m + j] + pot[u] - pot[v]).max(0.0);
                    if nd < dist_to[v] {
                        dist_to[v] = nd;
                        parent[v] = u;
                    }
                }
            } else {
                let j = u - n;
                for i in 0..n {
                    if flow[i * m + j] > eps {
                        let nd = best + (-cost[i * m + j] + pot[u] - pot[i]).max(0.0);
                        if nd < dist_to[i] {
                            dist_to[i] = nd;
                            parent[i] = u;
                        }
                    }
                }
            }
        }
        let Some(t) = (0..m)
            .filter(|j| demand[*j] > eps && dist_to[n + j].is_finite())
            .min_by(|x, y| dist_to[n + x].total_cmp(&dist_to[n + y]))
            .map(|j| n + j)
        else {
            break;
        };
        for v in 0..n + m {
            if dist_to[v].is_finite() {
                pot[v] += dist_to[v].min(dist_to[t]);
            }
        }
        // Bottleneck along the path back to a source with supply.
        let mut amount = demand[t - n];
        let mut v = t;
        while parent[v] != usize::MAX {
            let u = parent[v];
            if u >= n {
                amount = amount.min(flow[v * m + (u - n)]);
            }
            v = u;
        }
        amount = amount.min(supply[v]);
        supply[v] -= amount;
        demand[t - n] -= amount;
        let mut v = t;
        while parent[v] != usize::MAX {
            let u = parent[v];
            if u < n {
                flow[u * m + (v - n)] += amount;
            } else {
                flow[v * m + (u - n)] -= amount;
            }
            v = u;
        }
    }
    flow.iter().zip(&cost).map(|(f, c)| f.max(0.0) * c).sum()
}
