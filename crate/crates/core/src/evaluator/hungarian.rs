//! Minimum-cost perfect assignment on a square matrix (Kuhn-Munkres with
//! potentials, O(n^3)).

/// Returns `assignment[row] = column` minimizing the total cost.
///
/// Panics if the matrix is not square.
pub fn min_cost_assignment(cost: &[Vec<i128>]) -> Vec<usize> {
    let n = cost.len();
    assert!(cost.iter().all(|r| r.len() == n), "cost matrix must be square");
    if n == 0 {
        return Vec::new();
    }
    const INF: i128 = i128::MAX / 4;
    // 1-based arrays; column 0 is the virtual start.
    let mut u = vec![0i128; n + 1];
    let mut v = vec![0i128; n + 1];
    let mut p = vec![0usize; n + 1];
    let mut way = vec![0usize; n + 1];
    for i in 1..=n {
        p[0] = i;
        let mut j0 = 0usize;
        let mut minv = vec![INF; n + 1];
        let mut used = vec![false; n + 1];
        loop {
            used[j0] = true;
            let i0 = p[j0];
            let mut delta = INF;
            let mut j1 = 0usize;
            for j in 1..=n {
                if used[j] {
                    continue;
                }
                let cur = cost[i0 - 1][j - 1] - u[i0] - v[j];
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
                    u[p[j]] += delta;
                    v[j] -= delta;
                } else {
                    minv[j] -= delta;
                }
            }
            j0 = j1;
            if p[j0] == 0 {
                break;
            }
        }
        loop {
            let j1 = way[j0];
            p[j0] = p[j1];
            j0 = j1;
            if j0 == 0 {
                break;
            }
        }
    }
    let mut assignment = vec![0usize; n];
    for j in 1..=n {
        if p[j] != 0 {
            assignment[p[j] - 1] = j - 1;
        }
    }
    assignment
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn total(cost: &[Vec<i128>], a: &[usize]) -> i128 {
        a.iter().enumerate().map(|(i, &j)| cost[i][j]).sum()
    }

    fn brute_force(cost: &[Vec<i128>]) -> i128 {
        fn go(cost: &[Vec<i128>], row: usize, used: &mut Vec<bool>) -> i128 {
            if row == cost.len() {
                return 0;
            }
            let mut best = i128::MAX;
            for j in 0..cost.len() {
                if !used[j] {
                    used[j] = true;
                    best = best.min(cost[row][j] + go(cost, row + 1, used));
                    used[j] = false;
                }
            }
            best
        }
        go(cost, 0, &mut vec![false; cost.len()])
    }

    #[test]
    fn textbook_instance() {
        let cost = vec![vec![4, 1, 3], vec![2, 0, 5], vec![3, 2, 2]];
        let a = min_cost_assignment(&cost);
        assert_eq!(total(&cost, &a), 5);
    }

    #[test]
    fn empty_matrix() {
        assert!(min_cost_assignment(&[]).is_empty());
    }

    proptest! {
        #[test]
        fn matches_brute_force(n in 1usize..7, seed in prop::collection::vec(0i128..50, 49)) {
            let cost: Vec<Vec<i128>> = (0..n).map(|i| (0..n).map(|j| seed[i * 7 + j]).collect()).collect();
            let a = min_cost_assignment(&cost);
            let mut cols = a.clone();
            cols.sort();
            prop_assert_eq!(cols, (0..n).collect::<Vec<_>>());
            prop_assert_eq!(total(&cost, &a), brute_force(&cost));
        }
    }
}
