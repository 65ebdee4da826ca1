use ndarray::{Array2, ArrayView1, ArrayView2, Axis};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Maximum Lloyd iterations.
pub const MAX_ITERATIONS: usize = 300;

/// Fitted k-means model over points given as matrix columns.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ClusterModel {
    /// One centroid per cluster, each of the feature dimension.
    pub centroids: Vec<Vec<f64>>,
    /// Training label of every point.
    pub labels: Vec<usize>,
    /// Sum of squared distances to assigned centroids.
    pub inertia: f64,
    pub iterations: usize,
}

fn dist2(a: ArrayView1<f64>, b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y).powi(2)).sum()
}

/// Index of the nearest centroid, ties to the smaller index.
fn nearest(point: ArrayView1<f64>, centroids: &[Vec<f64>]) -> (usize, f64) {
    let mut best = (0, f64::INFINITY);
    for (c, cen) in centroids.iter().enumerate() {
        let d = dist2(point, cen);
        if d < best.1 {
            best = (c, d);
        }
    }
    best
}

impl ClusterModel {
    pub fn clusters(&self) -> usize {
        self.centroids.len()
    }

    /// Nearest-centroid label for a new feature vector.
    pub fn classify(&self, point: &[f64]) -> Result<usize> {
        let Some(first) = self.centroids.first() else {
            return Err(Error::invalid("cluster model has no centroids"));
        };
        if point.len() != first.len() {
            return Err(Error::DimensionMismatch {
                expected: first.len(),
                actual: point.len(),
            });
        }
        if point.iter().any(|v| !v.is_finite()) {
            return Err(Error::NonFinite("feature vector".into()));
        }
        Ok(nearest(ArrayView1::from(point), &self.centroids).0)
    }

    /// Members of each cluster, in point order.
    pub fn members(&self) -> Vec<Vec<usize>> {
        let mut out = vec![Vec::new(); self.clusters()];
        for (i, &l) in self.labels.iter().enumerate() {
            out[l].push(i);
        }
        out
    }
}

fn check(points: &ArrayView2<f64>, n: usize) -> Result<()> {
    let k = points.ncols();
    if n == 0 {
        return Err(Error::invalid("cluster count must be at least 1"));
    }
    if k < n {
        return Err(Error::invalid(format!(
            "{k} points cannot form {n} clusters"
        )));
    }
    if points.iter().any(|v| !v.is_finite()) {
        return Err(Error::NonFinite("feature matrix".into()));
    }
    Ok(())
}

/// k-means++ restarts used by [`kmeans_fit`].
pub const DEFAULT_RESTARTS: usize = 10;

/// k-means++ seeding followed by Lloyd iterations, best of
/// [`DEFAULT_RESTARTS`] starts. Points are the columns of `points`.
pub fn kmeans_fit(points: ArrayView2<f64>, n: usize, seed: u64) -> Result<ClusterModel> {
    kmeans_fit_restarts(points, n, seed, DEFAULT_RESTARTS)
}

/// Runs `restarts` seeded fits from one random stream and keeps the one
/// with the lowest inertia, the earliest on ties.
pub fn kmeans_fit_restarts(
    points: ArrayView2<f64>,
    n: usize,
    seed: u64,
    restarts: usize,
) -> Result<ClusterModel> {
    check(&points, n)?;
    if restarts == 0 {
        return Err(Error::invalid("k-means needs at least one start"));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut best: Option<ClusterModel> = None;
    for _ in 0..restarts {
        let model = kmeans_from(points, plus_plus(points, n, &mut rng))?;
        if best.as_ref().is_none_or(|b| model.inertia < b.inertia) {
            best = Some(model);
        }
    }
    Ok(best.expect("at least one start"))
}

fn plus_plus(points: ArrayView2<f64>, n: usize, rng: &mut ChaCha8Rng) -> Vec<Vec<f64>> {
    let k = points.ncols();
    let cols: Vec<ArrayView1<f64>> = points.axis_iter(Axis(1)).collect();

    let mut centroids = vec![cols[rng.random_range(0..k)].to_vec()];
    let mut d2: Vec<f64> = cols.iter().map(|c| dist2(*c, &centroids[0])).collect();
    while centroids.len() < n {
        let total: f64 = d2.iter().sum();
        let pick = if total > 0.0 {
            let mut target = rng.random::<f64>() * total;
            let mut pick = k - 1;
            for (i, &d) in d2.iter().enumerate() {
                if d > 0.0 && target < d {
                    pick = i;
                    break;
                }
                target -= d;
            }
            // Never pick a point that already coincides with a centroid.
            if d2[pick] == 0.0 {
                pick = d2.iter().rposition(|&d| d > 0.0).expect("positive total");
            }
            pick
        } else {
            rng.random_range(0..k)
        };
        let c = cols[pick].to_vec();
        for (i, col) in cols.iter().enumerate() {
            d2[i] = d2[i].min(dist2(*col, &c));
        }
        centroids.push(c);
    }
    centroids
}

/// Lloyd iterations from given starting centroids.
///
/// An empty cluster takes the point farthest from its own centroid among
/// clusters with more than one member.
pub fn kmeans_from(points: ArrayView2<f64>, mut centroids: Vec<Vec<f64>>) -> Result<ClusterModel> {
    let n = centroids.len();
    check(&points, n)?;
    let dim = points.nrows();
    if let Some(c) = centroids.iter().find(|c| c.len() != dim) {
        return Err(Error::DimensionMismatch {
            expected: dim,
            actual: c.len(),
        });
    }
    let k = points.ncols();
    let cols: Vec<ArrayView1<f64>> = points.axis_iter(Axis(1)).collect();
    let mut labels = vec![usize::MAX; k];
    let mut iterations = 0;

    while iterations < MAX_ITERATIONS {
        iterations += 1;
        let mut new_labels: Vec<usize> = cols.iter().map(|c| nearest(*c, &centroids).0).collect();
        repair_empty(&cols, &centroids, &mut new_labels, n);
        let changed = new_labels != labels;
        labels = new_labels;
        centroids = means(&cols, &labels, n, dim);
        if !changed {
            break;
        }
    }
    let inertia = cols
        .iter()
        .zip(&labels)
        .map(|(c, &l)| dist2(*c, &centroids[l]))
        .sum();
    Ok(ClusterModel {
        centroids,
        labels,
        inertia,
        iterations,
    })
}

fn repair_empty(cols: &[ArrayView1<f64>], centroids: &[Vec<f64>], labels: &mut [usize], n: usize) {
    loop {
        let mut counts = vec![0usize; n];
        for &l in labels.iter() {
            counts[l] += 1;
        }
        let Some(empty) = counts.iter().position(|&c| c == 0) else {
            return;
        };
        let victim = (0..labels.len())
            .filter(|&i| counts[labels[i]] > 1)
            .max_by(|&a, &b| {
                let da = dist2(cols[a], &centroids[labels[a]]);
                let db = dist2(cols[b], &centroids[labels[b]]);
                // Farthest first; ties to the smaller index.
                da.total_cmp(&db).then(b.cmp(&a))
            })
            .expect("k ≥ n guarantees a cluster with spare points");
        labels[victim] = empty;
    }
}

fn means(cols: &[ArrayView1<f64>], labels: &[usize], n: usize, dim: usize) -> Vec<Vec<f64>> {
    let mut sums = Array2::<f64>::zeros((n, dim));
    let mut counts = vec![0usize; n];
    for (c, &l) in cols.iter().zip(labels) {
        let mut row = sums.row_mut(l);
        row += c;
        counts[l] += 1;
    }
    sums.rows()
        .into_iter()
        .zip(&counts)
        .map(|(r, &c)| r.iter().map(|v| v / c as f64).collect())
        .collect()
}
