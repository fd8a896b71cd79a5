use super::ClassifyError;
use crate::geometry::Vec3;

/// Result of aligning two point sequences.
#[derive(Clone, Debug, PartialEq)]
pub struct DtwAlignment {
    /// Sum of point costs along the optimal path.
    pub cost: f64,
    /// Number of cells on the path.
    pub path_len: usize,
    /// Cell indices `(i, j)` from `(0, 0)` to `(n-1, m-1)`.
    pub path: Vec<(usize, usize)>,
}

impl DtwAlignment {
    pub fn normalized(&self) -> f64 {
        self.cost / self.path_len as f64
    }
}

/// Symmetric-step DTW (match, insertion, deletion) with Euclidean point
/// cost. Among minimum-cost paths the shortest one is kept, so the
/// normalized value is deterministic and zero-cost detours cannot dilute it.
pub fn dtw_alignment(a: &[Vec3], b: &[Vec3]) -> Result<DtwAlignment, ClassifyError> {
    let (n, m) = (a.len(), b.len());
    if n == 0 || m == 0 {
        return Err(ClassifyError::EmptyTrajectory);
    }
    // (cost, length) per cell, row-major
    let mut acc = vec![(f64::INFINITY, 0usize); n * m];
    let at = |i: usize, j: usize| i * m + j;
    for i in 0..n {
        for j in 0..m {
            let c = (a[i] - b[j]).norm();
            if i == 0 && j == 0 {
                acc[0] = (c, 1);
                continue;
            }
            let mut best = (f64::INFINITY, 0usize);
            let mut consider = |p: (f64, usize)| {
                if p.0 < best.0 || (p.0 == best.0 && p.1 < best.1) {
                    best = p;
                }
            };
            if i > 0 && j > 0 {
                consider(acc[at(i - 1, j - 1)]);
            }
            if i > 0 {
                consider(acc[at(i - 1, j)]);
            }
            if j > 0 {
                consider(acc[at(i, j - 1)]);
            }
            acc[at(i, j)] = (best.0 + c, best.1 + 1);
        }
    }

    let mut path = vec![(n - 1, m - 1)];
    let (mut i, mut j) = (n - 1, m - 1);
    while i > 0 || j > 0 {
        let mut cands = Vec::with_capacity(3);
        if i > 0 && j > 0 {
            cands.push((i - 1, j - 1));
        }
        if i > 0 {
            cands.push((i - 1, j));
        }
        if j > 0 {
            cands.push((i, j - 1));
        }
        let mut pick = cands[0];
        for &c in &cands[1..] {
            let (pc, pl) = acc[at(pick.0, pick.1)];
            let (cc, cl) = acc[at(c.0, c.1)];
            if cc < pc || (cc == pc && cl < pl) {
                pick = c;
            }
        }
        (i, j) = pick;
        path.push(pick);
    }
    path.reverse();

    let (cost, path_len) = acc[at(n - 1, m - 1)];
    Ok(DtwAlignment {
        cost,
        path_len,
        path,
    })
}

/// Path-length-normalized DTW distance (mean point cost along the path).
pub fn dtw_distance(a: &[Vec3], b: &[Vec3]) -> Result<f64, ClassifyError> {
    dtw_alignment(a, b).map(|al| al.normalized())
}
