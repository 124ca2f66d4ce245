//! Rectangular linear assignment with forbidden pairs.

/// Minimum-cost partial matching of rows to columns.
///
/// `f64::INFINITY` marks a forbidden pair. Among all matchings the solver
/// first maximises the number of allowed pairs, then minimises their total
/// cost. Returns `(row, col)` pairs sorted by row.
pub fn lap_solve(cost: &[Vec<f64>]) -> Vec<(usize, usize)> {
    let rows = cost.len();
    let cols = cost.first().map_or(0, Vec::len);
    if rows == 0 || cols == 0 {
        return Vec::new();
    }
    assert!(cost.iter().all(|r| r.len() == cols), "ragged cost matrix");

    // Forbidden pairs get a cost larger than any difference between two
    // matchings built from allowed pairs, so fewer of them always wins.
    let k = rows.min(cols) as f64;
    let largest = cost
        .iter()
        .flatten()
        .filter(|c| c.is_finite())
        .fold(0.0_f64, |m, c| m.max(c.abs()));
    let big = 2.0 * k * largest + 1.0;
    let transposed = rows > cols;
    let (n, m) = if transposed { (cols, rows) } else { (rows, cols) };
    let at = |i: usize, j: usize| {
        let c = if transposed { cost[j][i] } else { cost[i][j] };
        if c.is_finite() {
            c
        } else {
            big
        }
    };

    let matched = hungarian(n, m, at);
    let mut pairs: Vec<(usize, usize)> = matched
        .into_iter()
        .enumerate()
        .map(|(i, j)| if transposed { (j, i) } else { (i, j) })
        .filter(|&(r, c)| cost[r][c].is_finite())
        .collect();
    pairs.sort_unstable();
    pairs
}

/// Shortest augmenting path with potentials for `n <= m`; returns the
/// column of every row.
fn hungarian(n: usize, m: usize, cost: impl Fn(usize, usize) -> f64) -> Vec<usize> {
    // 1-based arrays, column 0 is the virtual source
    let mut u = vec![0.0; n + 1];
    let mut v = vec![0.0; m + 1];
    let mut row_of = vec![0usize; m + 1];
    let mut way = vec![0usize; m + 1];
    for i in 1..=n {
        row_of[0] = i;
        let mut j0 = 0;
        let mut min_to = vec![f64::INFINITY; m + 1];
        let mut used = vec![false; m + 1];
        loop {
            used[j0] = true;
            let i0 = row_of[j0];
            let mut delta = f64::INFINITY;
            let mut j1 = 0;
            for j in 1..=m {
                if used[j] {
                    continue;
                }
                let reduced = cost(i0 - 1, j - 1) - u[i0] - v[j];
                if reduced < min_to[j] {
                    min_to[j] = reduced;
                    way[j] = j0;
                }
                if min_to[j] < delta {
                    delta = min_to[j];
                    j1 = j;
                }
            }
            for j in 0..=m {
                if used[j] {
                    u[row_of[j]] += delta;
                    v[j] -= delta;
                } else {
                    min_to[j] -= delta;
                }
            }
            j0 = j1;
            if row_of[j0] == 0 {
                break;
            }
        }
        loop {
            let j1 = way[j0];
            row_of[j0] = row_of[j1];
            j0 = j1;
            if j0 == 0 {
                break;
            }
        }
    }
    let mut col_of = vec![0; n];
    for j in 1..=m {
        if row_of[j] != 0 {
            col_of[row_of[j] - 1] = j - 1;
        }
    }
    col_of
}

/// Sum of the costs of `pairs`.
pub fn matching_cost(cost: &[Vec<f64>], pairs: &[(usize, usize)]) -> f64 {
    pairs.iter().map(|&(r, c)| cost[r][c]).sum()
}
