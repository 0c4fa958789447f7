use serde::{Deserialize, Serialize};

use super::{rotated_iou, DetectionSet, GeometryError};

/// Minimum-cost assignment of rows to columns (Kuhn-Munkres with potentials,
/// shortest augmenting paths, `O(n^2 m)`).
///
/// Works for rectangular matrices; the smaller side is fully assigned.
/// Returns `assignment[row] = Some(col)`.
pub fn solve_assignment(cost: &[Vec<f64>]) -> Vec<Option<usize>> {
    let rows = cost.len();
    if rows == 0 {
        return Vec::new();
    }
    let cols = cost[0].len();
    if cols == 0 {
        return vec![None; rows];
    }
    if rows > cols {
        let transposed: Vec<Vec<f64>> = (0..cols).map(|c| (0..rows).map(|r| cost[r][c]).collect()).collect();
        let by_col = solve_assignment(&transposed);
        let mut out = vec![None; rows];
        for (c, r) in by_col.into_iter().enumerate() {
            if let Some(r) = r {
                out[r] = Some(c);
            }
        }
        return out;
    }

    // 1-based potentials; column 0 is the virtual source.
    let (n, m) = (rows, cols);
    let mut u = vec![0.0; n + 1];
    let mut v = vec![0.0; m + 1];
    let mut owner = vec![0usize; m + 1];
    let mut way = vec![0usize; m + 1];
    for row in 1..=n {
        owner[0] = row;
        let mut j0 = 0usize;
        let mut minv = vec![f64::INFINITY; m + 1];
        let mut used = vec![false; m + 1];
        loop {
            used[j0] = true;
            let i0 = owner[j0];
            let mut delta = f64::INFINITY;
            let mut j1 = 0usize;
            for j in 1..=m {
                if used[j] {
                    continue;
                }
                let reduced = cost[i0 - 1][j - 1] - u[i0] - v[j];
                if reduced < minv[j] {
                    minv[j] = reduced;
                    way[j] = j0;
                }
                // strict < keeps the lowest column on ties
                if minv[j] < delta {
                    delta = minv[j];
                    j1 = j;
                }
            }
            for j in 0..=m {
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
    let mut out = vec![None; n];
    for j in 1..=m {
        if owner[j] != 0 {
            out[owner[j] - 1] = Some(j - 1);
        }
    }
    out
}

/// One matched pair from [`hungarian_match`].
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BoxMatch {
    pub index_a: usize,
    pub index_b: usize,
    pub iou: f64,
}

/// Pairwise rotated IoU, `matrix[i][j] = iou(a[i], b[j])`.
pub fn iou_matrix(a: &DetectionSet, b: &DetectionSet) -> Result<Vec<Vec<f64>>, GeometryError> {
    a.boxes
        .iter()
        .map(|x| b.boxes.iter().map(|y| rotated_iou(x, y)).collect())
        .collect()
}

/// Maximum-total-IoU one-to-one matching between two detection sets.
///
/// Pairs below `match_min_iou`, and non-overlapping pairs, are dropped from
/// the result. Output is sorted by `index_a`.
pub fn hungarian_match(
    a: &DetectionSet,
    b: &DetectionSet,
    match_min_iou: f64,
) -> Result<Vec<BoxMatch>, GeometryError> {
    if a.boxes.is_empty() || b.boxes.is_empty() {
        return Ok(Vec::new());
    }
    let ious = iou_matrix(a, b)?;
    let cost: Vec<Vec<f64>> = ious.iter().map(|row| row.iter().map(|&x| -x).collect()).collect();
    let assignment = solve_assignment(&cost);
    Ok(assignment
        .into_iter()
        .enumerate()
        .filter_map(|(i, j)| j.map(|j| BoxMatch { index_a: i, index_b: j, iou: ious[i][j] }))
        .filter(|m| m.iou > 0.0 && m.iou >= match_min_iou)
        .collect())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::OrientedBox;
    use rand::{Rng, SeedableRng};

    fn permutations(n: usize) -> Vec<Vec<usize>> {
        if n == 0 {
            return vec![vec![]];
        }
        let mut out = Vec::new();
        for p in permutations(n - 1) {
            for pos in 0..=p.len() {
                let mut q = p.clone();
                q.insert(pos, n - 1);
                out.push(q);
            }
        }
        out
    }

    // Best total over all injections of the smaller side into the larger.
    fn brute_force_max(weights: &[Vec<f64>]) -> f64 {
        let (n, m) = (weights.len(), weights.first().map_or(0, |r| r.len()));
        let k = n.max(m);
        let w = |i: usize, j: usize| if i < n && j < m { weights[i][j] } else { 0.0 };
        permutations(k)
            .iter()
            .map(|p| p.iter().enumerate().map(|(i, &j)| w(i, j)).sum::<f64>())
            .fold(f64::NEG_INFINITY, f64::max)
    }

    #[test]
    fn empty_inputs() {
        let empty = DetectionSet::new(0, vec![]);
        let one = DetectionSet::new(0, vec![OrientedBox::new(0.0, 0.0, 4.0, 2.0, 0.0)]);
        assert!(hungarian_match(&empty, &one, 0.0).unwrap().is_empty());
        assert!(hungarian_match(&one, &empty, 0.0).unwrap().is_empty());
        assert!(solve_assignment(&[]).is_empty());
    }

    #[test]
    fn identity_matching() {
        let boxes = vec![OrientedBox::new(0.0, 0.0, 4.0, 2.0, 0.0), OrientedBox::new(10.0, 0.0, 4.0, 2.0, 0.0)];
        let a = DetectionSet::new(0, boxes.clone());
        let b = DetectionSet::new(0, boxes);
        let m = hungarian_match(&a, &b, 0.1).unwrap();
        assert_eq!(m, vec![
            BoxMatch { index_a: 0, index_b: 0, iou: 1.0 },
            BoxMatch { index_a: 1, index_b: 1, iou: 1.0 }
        ]);
    }

    #[test]
    fn greedy_would_be_suboptimal_here() {
        // greedy takes (0,0)=0.9 then (1,1)=0.1; optimum is 0.8 + 0.8
        let w = [[0.9, 0.8], [0.8, 0.1]];
        let cost: Vec<Vec<f64>> = w.iter().map(|r| r.iter().map(|x| -x).collect()).collect();
        assert_eq!(solve_assignment(&cost), vec![Some(1), Some(0)]);
    }

    #[test]
    fn rectangular_assignments() {
        let cost = vec![vec![3.0, 1.0, 2.0]];
        assert_eq!(solve_assignment(&cost), vec![Some(1)]);
        let cost = vec![vec![3.0], vec![1.0], vec![2.0]];
        assert_eq!(solve_assignment(&cost), vec![None, Some(0), None]);
    }

    #[test]
    fn matches_brute_force_on_random_weights() {
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(5);
        for _ in 0..1000 {
            let n = rng.random_range(1..=6);
            let m = rng.random_range(1..=6);
            let w: Vec<Vec<f64>> = (0..n).map(|_| (0..m).map(|_| rng.random::<f64>()).collect()).collect();
            let cost: Vec<Vec<f64>> = w.iter().map(|r| r.iter().map(|x| -x).collect()).collect();
            let assignment = solve_assignment(&cost);
            let total: f64 = assignment.iter().enumerate().filter_map(|(i, j)| j.map(|j| w[i][j])).sum();
            assert_eq!(assignment.iter().filter(|x| x.is_some()).count(), n.min(m));
            assert!((total - brute_force_max(&w)).abs() < 1e-9);
        }
    }

    #[test]
    fn box_matching_4x4_equals_brute_force() {
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(9);
        let random_set = |rng: &mut rand_chacha::ChaCha8Rng| {
            let boxes = (0..4)
                .map(|_| {
                    OrientedBox::new(
                        rng.random_range(0.0..6.0),
                        rng.random_range(0.0..6.0),
                        rng.random_range(2.0..5.0),
                        rng.random_range(1.0..2.5),
                        rng.random_range(-3.0..3.0),
                    )
                })
                .collect();
            DetectionSet::new(0, boxes)
        };
        for _ in 0..50 {
            let (a, b) = (random_set(&mut rng), random_set(&mut rng));
            let total: f64 = hungarian_match(&a, &b, 0.0).unwrap().iter().map(|m| m.iou).sum();
            let brute = brute_force_max(&iou_matrix(&a, &b).unwrap());
            assert!((total - brute).abs() < 1e-9);
        }
    }

    #[test]
    fn low_iou_pairs_are_dropped() {
        let a = DetectionSet::new(0, vec![OrientedBox::new(0.0, 0.0, 4.0, 2.0, 0.0)]);
        let b = DetectionSet::new(0, vec![OrientedBox::new(3.0, 0.0, 4.0, 2.0, 0.0)]);
        assert_eq!(hungarian_match(&a, &b, 0.0).unwrap().len(), 1);
        assert!(hungarian_match(&a, &b, 0.5).unwrap().is_empty());
    }
}
