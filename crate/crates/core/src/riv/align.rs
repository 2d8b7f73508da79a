use std::collections::BTreeMap;

use crate::lti::{AdditiveModel, SubsystemOrder};

/// Groups larger than this are matched greedily instead of exhaustively.
const EXHAUSTIVE_LIMIT: usize = 8;

fn sq_dist(a: &AdditiveModel, i: usize, b: &AdditiveModel, j: usize) -> f64 {
    (a.theta(i) - b.theta(j)).norm_squared()
}

/// Reorders the subsystems of `est` to minimize `||beta_est - beta_ref||`,
/// permuting only among subsystems of equal order. Returns the aligned model
/// and the permutation (`aligned[j] = est[perm[j]]`). Structures that do
/// not match group by group are returned unchanged.
pub fn align_submodels(
    est: &AdditiveModel,
    reference: &AdditiveModel,
) -> (AdditiveModel, Vec<usize>) {
    let identity: Vec<usize> = (0..est.k()).collect();
    if est.k() != reference.k() || est.n_u() != reference.n_u() || est.n_y() != reference.n_y() {
        return (est.clone(), identity);
    }
    let mut groups: BTreeMap<SubsystemOrder, (Vec<usize>, Vec<usize>)> = BTreeMap::new();
    for (j, s) in reference.subsystems().iter().enumerate() {
        groups.entry(s.order()).or_default().0.push(j);
    }
    for (i, s) in est.subsystems().iter().enumerate() {
        groups.entry(s.order()).or_default().1.push(i);
    }
    if groups.values().any(|(r, e)| r.len() != e.len()) {
        return (est.clone(), identity);
    }
    let mut perm = vec![0; est.k()];
    for (ref_pos, est_pos) in groups.values() {
        let cost: Vec<Vec<f64>> = ref_pos
            .iter()
            .map(|&j| {
                est_pos
                    .iter()
                    .map(|&i| sq_dist(est, i, reference, j))
                    .collect()
            })
            .collect();
        let assign = if ref_pos.len() <= EXHAUSTIVE_LIMIT {
            exhaustive(&cost)
        } else {
            greedy(&cost)
        };
        for (slot, &choice) in assign.iter().enumerate() {
            perm[ref_pos[slot]] = est_pos[choice];
        }
    }
    (est.permuted(&perm), perm)
}

/// Minimum-cost assignment `slot -> choice` by enumeration. Ties keep the
/// lexicographically first assignment, so the identity wins among equals.
fn exhaustive(cost: &[Vec<f64>]) -> Vec<usize> {
    let n = cost.len();
    let mut best = (f64::INFINITY, (0..n).collect::<Vec<_>>());
    let mut cur = Vec::with_capacity(n);
    let mut used = vec![false; n];
    search(cost, &mut cur, &mut used, 0.0, &mut best);
    best.1
}

fn search(
    cost: &[Vec<f64>],
    cur: &mut Vec<usize>,
    used: &mut [bool],
    acc: f64,
    best: &mut (f64, Vec<usize>),
) {
    let slot = cur.len();
    if slot == cost.len() {
        if acc < best.0 {
            *best = (acc, cur.clone());
        }
        return;
    }
    for c in 0..cost.len() {
        if !used[c] {
            used[c] = true;
            cur.push(c);
            search(cost, cur, used, acc + cost[slot][c], best);
            cur.pop();
            used[c] = false;
        }
    }
}

fn greedy(cost: &[Vec<f64>]) -> Vec<usize> {
    let n = cost.len();
    let mut assign = vec![usize::MAX; n];
    let mut used = vec![false; n];
    for _ in 0..n {
        let mut pick: Option<(f64, usize, usize)> = None;
        for (s, row) in cost
            .iter()
            .enumerate()
            .filter(|(s, _)| assign[*s] == usize::MAX)
        {
            for (c, &v) in row.iter().enumerate().filter(|(c, _)| !used[*c]) {
                if pick.is_none_or(|p| v < p.0) {
                    pick = Some((v, s, c));
                }
            }
        }
        let (_, s, c) = pick.expect("free slot remains");
        assign[s] = c;
        used[c] = true;
    }
    assign
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn greedy_and_exhaustive_agree_on_separated_costs() {
        let cost = vec![
            vec![5.0, 0.1, 9.0],
            vec![0.2, 7.0, 8.0],
            vec![6.0, 4.0, 0.3],
        ];
        assert_eq!(exhaustive(&cost), vec![1, 0, 2]);
        assert_eq!(greedy(&cost), vec![1, 0, 2]);
    }
}
