//! Exact solvers for the assignment and transportation problems.

/// Minimum-cost perfect matching on a dense `n x n` cost matrix (row-major).
/// Returns `col_of_row` and the total cost. O(n^3) shortest augmenting paths
/// with dual potentials.
pub fn hungarian(cost: &[f64], n: usize) -> (Vec<usize>, f64) {
    assert_eq!(cost.len(), n * n, "cost matrix must be n x n");
    if n == 0 {
        return (Vec::new(), 0.0);
    }
    const NONE: usize = usize::MAX;
    // 1-based columns; column 0 is the virtual start
    let mut u = vec![0.0f64; n + 1];
    let mut v = vec![0.0f64; n + 1];
    let mut row_of_col = vec![NONE; n + 1];
    let mut way = vec![0usize; n + 1];
    let mut minv = vec![0.0f64; n + 1];
    let mut used = vec![false; n + 1];
    for i in 0..n {
        row_of_col[0] = i;
        let mut j0 = 0usize;
        minv.iter_mut().for_each(|m| *m = f64::INFINITY);
        used.iter_mut().for_each(|x| *x = false);
        loop {
            used[j0] = true;
            let i0 = row_of_col[j0];
            let mut delta = f64::INFINITY;
            let mut j1 = 0;
            for j in 1..=n {
                if used[j] {
                    continue;
                }
                let ui = if i0 == NONE { 0.0 } else { u[i0 + 1] };
                let cur = cost[i0 * n + (j - 1)] - ui - v[j];
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
                    let r = row_of_col[j];
                    u[r + 1] += delta;
                    v[j] -= delta;
                } else {
                    minv[j] -= delta;
                }
            }
            j0 = j1;
            if row_of_col[j0] == NONE {
                break;
            }
        }
        loop {
            let j1 = way[j0];
            row_of_col[j0] = row_of_col[j1];
            j0 = j1;
            if j0 == 0 {
                break;
            }
        }
    }
    let mut col_of_row = vec![0usize; n];
    for j in 1..=n {
        col_of_row[row_of_col[j]] = j - 1;
    }
    let total = col_of_row
        .iter()
        .enumerate()
        .map(|(i, &j)| cost[i * n + j])
        .sum();
    (col_of_row, total)
}

/// Balanced transportation problem with integer supplies and demands on a
/// complete bipartite graph (`cost[i * demand.len() + j]`, all non-negative).
/// Returns the optimal flow matrix and its cost. Successive shortest paths with
/// Dijkstra on reduced costs.
pub fn min_cost_transport(supply: &[u64], demand: &[u64], cost: &[f64]) -> (Vec<u64>, f64) {
    let (m, k) = (supply.len(), demand.len());
    assert_eq!(cost.len(), m * k, "cost matrix must be supply x demand");
    assert_eq!(
        supply.iter().sum::<u64>(),
        demand.iter().sum::<u64>(),
        "transport must be balanced"
    );
    let mut flow = vec![0u64; m * k];
    let mut left = supply.to_vec();
    let mut need = demand.to_vec();
    let mut pot_s = vec![0.0f64; m];
    let mut pot_t = vec![0.0f64; k];
    let mut dist_s = vec![0.0f64; m];
    let mut dist_t = vec![0.0f64; k];
    let mut done_s = vec![false; m];
    let mut done_t = vec![false; k];
    // predecessor of a sink is a source; of a source, a sink (or none at a root)
    let mut pred_t = vec![0usize; k];
    let mut pred_s = vec![usize::MAX; m];

    while need.iter().any(|&d| d > 0) {
        for i in 0..m {
            dist_s[i] = if left[i] > 0 { 0.0 } else { f64::INFINITY };
            pred_s[i] = usize::MAX;
            done_s[i] = false;
        }
        dist_t.iter_mut().for_each(|d| *d = f64::INFINITY);
        done_t.iter_mut().for_each(|d| *d = false);
        let mut target = None;
        loop {
            // dense Dijkstra: pick the closest unsettled node on either side
            let mut best = f64::INFINITY;
            let mut pick = None;
            for i in 0..m {
                if !done_s[i] && dist_s[i] < best {
                    best = dist_s[i];
                    pick = Some((false, i));
                }
            }
            for j in 0..k {
                if !done_t[j] && dist_t[j] < best {
                    best = dist_t[j];
                    pick = Some((true, j));
                }
            }
            let Some((is_sink, x)) = pick else { break };
            if is_sink {
                done_t[x] = true;
                if need[x] > 0 {
                    // unsettled nodes are at least this far; potentials below cap at it
                    target = Some(x);
                    break;
                }
                for i in 0..m {
                    if !done_s[i] && flow[i * k + x] > 0 {
                        let rc = (pot_t[x] - cost[i * k + x] - pot_s[i]).max(0.0);
                        if best + rc < dist_s[i] {
                            dist_s[i] = best + rc;
                            pred_s[i] = x;
                        }
                    }
                }
            } else {
                done_s[x] = true;
                for j in 0..k {
                    if !done_t[j] {
                        let rc = (cost[x * k + j] + pot_s[x] - pot_t[j]).max(0.0);
                        if best + rc < dist_t[j] {
                            dist_t[j] = best + rc;
                            pred_t[j] = x;
                        }
                    }
                }
            }
        }
        let target = target.expect("a balanced complete problem always has an augmenting path");
        let reach = dist_t[target];
        for i in 0..m {
            pot_s[i] += dist_s[i].min(reach);
        }
        for j in 0..k {
            pot_t[j] += dist_t[j].min(reach);
        }
        // bottleneck along the path
        let mut amount = need[target];
        let mut j = target;
        loop {
            let i = pred_t[j];
            match pred_s[i] {
                usize::MAX => {
                    amount = amount.min(left[i]);
                    break;
                }
                prev => {
                    amount = amount.min(flow[i * k + prev]);
                    j = prev;
                }
            }
        }
        let mut j = target;
        need[target] -= amount;
        loop {
            let i = pred_t[j];
            flow[i * k + j] += amount;
            match pred_s[i] {
                usize::MAX => {
                    left[i] -= amount;
                    break;
                }
                prev => {
                    flow[i * k + prev] -= amount;
                    j = prev;
                }
            }
        }
    }
    let total = flow
        .iter()
        .zip(cost)
        .filter(|(&f, _)| f > 0)
        .map(|(&f, &c)| f as f64 * c)
        .sum();
    (flow, total)
}
