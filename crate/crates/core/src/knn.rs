//! Fixed-k nearest-neighbor estimator of `KL(P || Q)`.
//!
//! Exact brute-force search with Euclidean distances. Neighbors are ordered by
//! distance, then by point index.

use std::cmp::Ordering;

use ndarray::{Array2, ArrayView2};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::KnnError;

/// Distances below this are replaced by it and counted.
pub const DISTANCE_CLAMP: f64 = 1e-12;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct KLEstimate {
    /// May be negative.
    pub value: f64,
    pub k: usize,
    pub n: usize,
    pub m: usize,
    pub dim: usize,
    pub clamped_pairs: usize,
}

fn check_finite(x: ArrayView2<f64>) -> Result<(), KnnError> {
    for ((row, col), v) in x.indexed_iter() {
        if !v.is_finite() {
            return Err(KnnError::NonFinite { row, col });
        }
    }
    Ok(())
}

fn order(a: &(f64, usize), b: &(f64, usize)) -> Ordering {
    a.0.total_cmp(&b.0).then(a.1.cmp(&b.1))
}

/// Sorted distances from every query row to its `k` nearest rows of `points`.
///
/// With `exclude_self`, `queries` must be `points` and row `i` skips point `i`.
pub fn knn_distances(
    points: ArrayView2<f64>,
    queries: ArrayView2<f64>,
    k: usize,
    exclude_self: bool,
) -> Result<Array2<f64>, KnnError> {
    if points.ncols() != queries.ncols() {
        return Err(KnnError::DimensionMismatch(points.ncols(), queries.ncols()));
    }
    if exclude_self && points.dim() != queries.dim() {
        return Err(KnnError::SelfExclusionShape);
    }
    let available = points.nrows() - usize::from(exclude_self && points.nrows() > 0);
    if k == 0 || k > available {
        return Err(KnnError::KTooLarge { k, available });
    }
    let points = points.as_standard_layout();
    let queries = queries.as_standard_layout();
    let d = points.ncols();
    let p = points.as_slice().expect("standard layout");
    let q = queries.as_slice().expect("standard layout");
    let n = points.nrows();

    let mut out = vec![0.0; queries.nrows() * k];
    out.par_chunks_mut(k).enumerate().for_each_init(
        || Vec::with_capacity(n),
        |buf: &mut Vec<(f64, usize)>, (qi, row)| {
            buf.clear();
            let x = &q[qi * d..(qi + 1) * d];
            for pi in 0..n {
                if exclude_self && pi == qi {
                    continue;
                }
                let y = &p[pi * d..(pi + 1) * d];
                let mut s = 0.0;
                for j in 0..d {
                    let t = x[j] - y[j];
                    s += t * t;
                }
                buf.push((s, pi));
            }
            if k < buf.len() {
                buf.select_nth_unstable_by(k - 1, order);
            }
            let top = &mut buf[..k];
            top.sort_unstable_by(order);
            for (o, (s, _)) in row.iter_mut().zip(top.iter()) {
                *o = s.sqrt();
            }
        },
    );
    Ok(Array2::from_shape_vec((queries.nrows(), k), out).expect("shape"))
}

/// `(d/n) sum_i [ln nu_k(x_i) - ln rho_k(x_i)] + ln(m/(n-1))`.
pub fn knn_kl(p: ArrayView2<f64>, q: ArrayView2<f64>, k: usize) -> Result<KLEstimate, KnnError> {
    Ok(knn_kl_multi(p, q, &[k])?.remove(0))
}

/// Estimates for several `k` from one neighbor search.
pub fn knn_kl_multi(
    p: ArrayView2<f64>,
    q: ArrayView2<f64>,
    ks: &[usize],
) -> Result<Vec<KLEstimate>, KnnError> {
    let (n, d) = p.dim();
    let m = q.nrows();
    if d != q.ncols() {
        return Err(KnnError::DimensionMismatch(d, q.ncols()));
    }
    for &k in ks {
        if k == 0 || k >= n || k > m {
            return Err(KnnError::KOutOfRange { k, n, m });
        }
    }
    check_finite(p)?;
    check_finite(q)?;
    let k_max = ks.iter().copied().max().unwrap_or(1);
    let rho = knn_distances(p, p, k_max, true)?;
    let nu = knn_distances(q, p, k_max, false)?;
    Ok(ks
        .iter()
        .map(|&k| {
            let mut clamped = 0;
            let mut clamp = |v: f64| {
                if v < DISTANCE_CLAMP {
                    clamped += 1;
                    DISTANCE_CLAMP
                } else {
                    v
                }
            };
            let mut sum = 0.0;
            for i in 0..n {
                let r = clamp(rho[[i, k - 1]]);
                let v = clamp(nu[[i, k - 1]]);
                sum += v.ln() - r.ln();
            }
            KLEstimate {
                value: d as f64 / n as f64 * sum + (m as f64 / (n as f64 - 1.0)).ln(),
                k,
                n,
                m,
                dim: d,
                clamped_pairs: clamped,
            }
        })
        .collect())
}

#[cfg(test)]
mod tests {
    use super::*;
    use ndarray::array;

    #[test]
    fn two_points() {
        let p = array![[0.0], [1.0]];
        let r = knn_distances(p.view(), p.view(), 1, true).unwrap();
        assert_eq!(r, array![[1.0], [1.0]]);
    }

    #[test]
    fn collinear_points() {
        let p = array![[0.0], [1.0], [3.0]];
        let q = array![[0.0]];
        let r = knn_distances(p.view(), q.view(), 2, false).unwrap();
        assert_eq!(r, array![[0.0, 1.0]]);
        let r = knn_distances(p.view(), p.view(), 2, true).unwrap();
        assert_eq!(r.row(0).to_vec(), vec![1.0, 3.0]);
    }

    #[test]
    fn k_checks() {
        let p = array![[0.0], [1.0], [3.0]];
        assert!(matches!(knn_distances(p.view(), p.view(), 3, true), Err(KnnError::KTooLarge { .. })));
        assert!(matches!(knn_kl(p.view(), p.view(), 3), Err(KnnError::KOutOfRange { .. })));
        assert!(matches!(knn_kl(p.view(), p.view(), 0), Err(KnnError::KOutOfRange { .. })));
        let q = array![[0.0, 1.0]];
        assert!(matches!(knn_kl(p.view(), q.view(), 1), Err(KnnError::DimensionMismatch(1, 2))));
    }

    #[test]
    fn nonfinite_input_is_rejected() {
        let p = array![[0.0], [f64::NAN], [3.0]];
        let q = array![[0.0], [1.0]];
        assert_eq!(knn_kl(p.view(), q.view(), 1), Err(KnnError::NonFinite { row: 1, col: 0 }));
    }

    #[test]
    fn duplicates_are_clamped_and_counted() {
        let p = array![[0.0], [0.0], [1.0]];
        let q = array![[0.0], [5.0]];
        let e = knn_kl(p.view(), q.view(), 1).unwrap();
        assert!(e.value.is_finite());
        // rho: rows 0 and 1 see each other at 0; nu: rows 0 and 1 sit on q[0]
        assert_eq!(e.clamped_pairs, 4);
    }

    #[test]
    fn ties_break_by_index() {
        let p = array![[1.0], [-1.0], [1.0]];
        let q = array![[0.0]];
        let r = knn_distances(p.view(), q.view(), 3, false).unwrap();
        assert_eq!(r, array![[1.0, 1.0, 1.0]]);
    }
}
