//! O(n^3) Hungarian method for square assignment problems.

use crate::error::{Error, Result};

/// Minimum-cost assignment. `costs[i][j]` is the cost of giving row `i`
/// (worker) column `j` (job); returns the column assigned to each row.
pub fn min_cost_assignment(costs: &[Vec<f64>]) -> Result<Vec<usize>> {
    let n = costs.len();
    if costs.iter().any(|r| r.len() != n) {
        return Err(Error::Config("assignment cost matrix must be square".into()));
    }
    if costs.iter().flatten().any(|c| !c.is_finite()) {
        return Err(Error::Domain("assignment costs must be finite".into()));
    }
    if n == 0 {
        return Ok(Vec::new());
    }
    // Row/column potentials with 1-based indexing; slot 0 is the virtual
    // column used to grow each augmenting path.
    let mut u = vec![0.0; n + 1];
    let mut v = vec![0.0; n + 1];
    let mut owner = vec![0usize; n + 1];
    let mut way = vec![0usize; n + 1];
    for row in 1..=n {
        owner[0] = row;
        let mut j0 = 0;
        let mut minv = vec![f64::INFINITY; n + 1];
        let mut used = vec![false; n + 1];
        loop {
            used[j0] = true;
            let i0 = owner[j0];
            let mut delta = f64::INFINITY;
            let mut j1 = 0;
            for j in 1..=n {
                if used[j] {
                    continue;
                }
                let cur = costs[i0 - 1][j - 1] - u[i0] - v[j];
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
                    u[owner[j]] += delta;
                    v[j] -= delta;
                } else {
                    minv[j] -= delta;
                }
            }
            j0 = j1;
            if owner[j0] == 0 {
                break;
            }
        }
        loop {
            let j1 = way[j0];
            owner[j0] = owner[j1];
            j0 = j1;
            if j0 == 0 {
                break;
            }
        }
    }
    let mut assignment = vec![0; n];
    for j in 1..=n {
        assignment[owner[j] - 1] = j - 1;
    }
    Ok(assignment)
}

/// Maximum-value assignment, by negating the values.
pub fn max_value_assignment(values: &[Vec<f64>]) -> Result<Vec<usize>> {
    let negated: Vec<Vec<f64>> = values.iter().map(|r| r.iter().map(|v| -v).collect()).collect();
    min_cost_assignment(&negated)
}
