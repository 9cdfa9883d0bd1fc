//! Lloyd's k-means with k-means++ seeding.
//!
//! Ties in nearest-centroid assignment go to the lowest centroid index. When
//! every remaining point coincides with a chosen centroid, seeding repeats the
//! first centroid. An empty cluster is moved to the point farthest from its
//! centroid, if that distance is positive.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};

pub const MAX_ITERATIONS: usize = 100;

#[derive(Debug, Clone, PartialEq)]
pub struct KMeans {
    pub centroids: Vec<Vec<f64>>,
    /// Mean squared distance to the assigned centroid after each
    /// assignment step.
    pub distortion: Vec<f64>,
    pub iterations: usize,
}

fn dist2(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum()
}

/// Index of the nearest centroid and its squared distance.
pub fn nearest(centroids: &[Vec<f64>], p: &[f64]) -> (usize, f64) {
    centroids
        .iter()
        .enumerate()
        .fold((0, f64::INFINITY), |best, (j, c)| {
            let d = dist2(c, p);
            if d < best.1 {
                (j, d)
            } else {
                best
            }
        })
}

pub fn kmeans(points: &[Vec<f64>], k: usize, seed: u64) -> Result<KMeans> {
    if k == 0 || points.is_empty() {
        return Err(Error::InvalidInput("k-means needs k ≥ 1 and at least one point".into()));
    }
    let dim = points[0].len();
    if points.iter().any(|p| p.len() != dim || p.iter().any(|v| !v.is_finite())) {
        return Err(Error::InvalidInput("points must be finite and of equal dimension".into()));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);

    let mut centroids = vec![points[rng.random_range(0..points.len())].clone()];
    let mut d2: Vec<f64> = points.iter().map(|p| dist2(p, &centroids[0])).collect();
    while centroids.len() < k {
        let total: f64 = d2.iter().sum();
        let next = if total > 0.0 {
            let mut target = rng.random_range(0.0..total);
            let mut pick = d2.iter().rposition(|&d| d > 0.0).unwrap();
            for (i, &d) in d2.iter().enumerate() {
                if target < d {
                    pick = i;
                    break;
                }
                target -= d;
            }
            points[pick].clone()
        } else {
            centroids[0].clone()
        };
        for (d, p) in d2.iter_mut().zip(points) {
            *d = d.min(dist2(p, &next));
        }
        centroids.push(next);
    }

    let mut assignment = vec![usize::MAX; points.len()];
    let mut distortion = Vec::new();
    let mut iterations = 0;
    while iterations < MAX_ITERATIONS {
        iterations += 1;
        let mut changed = false;
        let mut total = 0.0;
        for (a, p) in assignment.iter_mut().zip(points) {
            let (j, d) = nearest(&centroids, p);
            total += d;
            if *a != j {
                *a = j;
                changed = true;
            }
        }
        distortion.push(total / points.len() as f64);
        if !changed {
            break;
        }

        let mut sums = vec![vec![0.0; dim]; k];
        let mut counts = vec![0usize; k];
        for (&a, p) in assignment.iter().zip(points) {
            counts[a] += 1;
            for (s, v) in sums[a].iter_mut().zip(p) {
                *s += v;
            }
        }
        let mut taken = vec![false; points.len()];
        for j in 0..k {
            if counts[j] > 0 {
                centroids[j] = sums[j].iter().map(|s| s / counts[j] as f64).collect();
                continue;
            }
            let far = (0..points.len())
                .filter(|&i| !taken[i])
                .map(|i| (i, dist2(&points[i], &centroids[assignment[i]])))
                .fold((usize::MAX, 0.0), |b, (i, d)| if d > b.1 { (i, d) } else { b });
            if far.0 != usize::MAX {
                taken[far.0] = true;
                centroids[j] = points[far.0].clone();
            }
        }
    }
    Ok(KMeans {
        centroids,
        distortion,
        iterations,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn single_cluster_is_the_mean() {
        let pts = vec![vec![0.0, 0.0], vec![2.0, 0.0], vec![1.0, 3.0]];
        let km = kmeans(&pts, 1, 5).unwrap();
        assert_eq!(km.centroids, vec![vec![1.0, 1.0]]);
    }

    #[test]
    fn k_distinct_points_have_zero_distortion() {
        let pts: Vec<Vec<f64>> = (0..5).map(|i| vec![i as f64, (i * i) as f64]).collect();
        let km = kmeans(&pts, 5, 1).unwrap();
        assert_eq!(*km.distortion.last().unwrap(), 0.0);
    }

    #[test]
    fn identical_points_share_cluster_zero() {
        let pts = vec![vec![0.5; 3]; 20];
        let km = kmeans(&pts, 4, 2).unwrap();
        for p in &pts {
            assert_eq!(nearest(&km.centroids, p).0, 0);
        }
    }

    #[test]
    fn rejects_bad_input() {
        assert!(kmeans(&[], 2, 0).is_err());
        assert!(kmeans(&[vec![1.0]], 0, 0).is_err());
        assert!(kmeans(&[vec![1.0], vec![1.0, 2.0]], 1, 0).is_err());
    }
}
