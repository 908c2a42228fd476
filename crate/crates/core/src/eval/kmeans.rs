use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::EvalError;

pub const DEFAULT_MAX_ITERS: usize = 300;

#[derive(Debug, Clone, PartialEq)]
pub struct KMeans {
    pub assignments: Vec<usize>,
    pub centroids: Vec<Vec<f64>>,
    /// Sum of squared distances after every assignment step.
    pub objective: Vec<f64>,
    pub iterations: usize,
}

fn dist2(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum()
}

fn nearest(p: &[f64], centroids: &[Vec<f64>]) -> (usize, f64) {
    let mut best = (0, f64::INFINITY);
    for (c, centre) in centroids.iter().enumerate() {
        let d = dist2(p, centre);
        if d < best.1 {
            best = (c, d);
        }
    }
    best
}

/// k-means++ seeding followed by Lloyd iterations until the assignment stops changing.
/// A cluster left empty by an update is re-seeded at the point farthest from its centroid.
pub fn kmeans(
    points: &[Vec<f64>],
    k: usize,
    seed: u64,
    max_iters: usize,
) -> Result<KMeans, EvalError> {
    if k == 0 || k > points.len() {
        return Err(EvalError::Invalid(format!(
            "k = {k} for {} points",
            points.len()
        )));
    }
    let dim = points[0].len();
    if points
        .iter()
        .any(|p| p.len() != dim || p.iter().any(|v| !v.is_finite()))
    {
        return Err(EvalError::Invalid(
            "points must be finite and of equal dimension".into(),
        ));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut centroids = vec![points[rng.random_range(0..points.len())].clone()];
    let mut d2: Vec<f64> = points.iter().map(|p| dist2(p, &centroids[0])).collect();
    while centroids.len() < k {
        let total: f64 = d2.iter().sum();
        let pick = if total > 0.0 {
            let mut target = rng.random::<f64>() * total;
            d2.iter()
                .position(|&d| {
                    target -= d;
                    target < 0.0 && d > 0.0
                })
                .unwrap_or_else(|| d2.iter().rposition(|&d| d > 0.0).expect("positive mass"))
        } else {
            rng.random_range(0..points.len())
        };
        centroids.push(points[pick].clone());
        for (d, p) in d2.iter_mut().zip(points) {
            *d = d.min(dist2(p, &centroids[centroids.len() - 1]));
        }
    }

    let mut assignments = vec![usize::MAX; points.len()];
    let mut objective = Vec::new();
    let mut iterations = 0;
    loop {
        let mut changed = false;
        let mut cost = 0.0;
        for (a, p) in assignments.iter_mut().zip(points) {
            let (c, d) = nearest(p, &centroids);
            changed |= *a != c;
            *a = c;
            cost += d;
        }
        objective.push(cost);
        if !changed || iterations >= max_iters {
            break;
        }
        iterations += 1;

        let mut sums = vec![vec![0.0; dim]; k];
        let mut counts = vec![0usize; k];
        for (&a, p) in assignments.iter().zip(points) {
            counts[a] += 1;
            sums[a].iter_mut().zip(p).for_each(|(s, v)| *s += v);
        }
        for c in 0..k {
            if counts[c] > 0 {
                centroids[c] = sums[c].iter().map(|s| s / counts[c] as f64).collect();
            }
        }
        for c in 0..k {
            if counts[c] == 0 {
                let far = (0..points.len())
                    .max_by(|&i, &j| {
                        let di = dist2(&points[i], &centroids[assignments[i]]);
                        let dj = dist2(&points[j], &centroids[assignments[j]]);
                        di.total_cmp(&dj).then(j.cmp(&i))
                    })
                    .expect("non-empty");
                centroids[c] = points[far].clone();
                assignments[far] = c;
            }
        }
    }
    Ok(KMeans {
        assignments,
        centroids,
        objective,
        iterations,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn blobs(seed: u64) -> (Vec<Vec<f64>>, Vec<usize>) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut pts = Vec::new();
        let mut truth = Vec::new();
        for (b, centre) in [[-20.0, 0.0], [20.0, 5.0]].iter().enumerate() {
            for _ in 0..50 {
                pts.push(vec![
                    centre[0] + rng.random_range(-1.0..1.0),
                    centre[1] + rng.random_range(-1.0..1.0),
                ]);
                truth.push(b);
            }
        }
        (pts, truth)
    }

    #[test]
    fn every_point_its_own_cluster() {
        let pts: Vec<Vec<f64>> = (0..7).map(|i| vec![i as f64, (i * i) as f64]).collect();
        let km = kmeans(&pts, 7, 3, DEFAULT_MAX_ITERS).unwrap();
        assert_eq!(*km.objective.last().unwrap(), 0.0);
        let mut a = km.assignments.clone();
        a.sort_unstable();
        a.dedup();
        assert_eq!(a.len(), 7);
    }

    #[test]
    fn recovers_two_blobs() {
        for seed in 0..10 {
            let (pts, truth) = blobs(seed);
            let km = kmeans(&pts, 2, seed, DEFAULT_MAX_ITERS).unwrap();
            let flip = km.assignments[0] != truth[0];
            for (a, t) in km.assignments.iter().zip(&truth) {
                assert_eq!(*a != *t, flip);
            }
        }
    }

    #[test]
    fn objective_never_increases() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        for inst in 0..30 {
            let pts: Vec<Vec<f64>> = (0..120)
                .map(|_| (0..3).map(|_| rng.random::<f64>()).collect())
                .collect();
            let km = kmeans(&pts, 2 + inst % 6, inst as u64, DEFAULT_MAX_ITERS).unwrap();
            assert!(
                km.objective.windows(2).all(|w| w[1] <= w[0]),
                "{:?}",
                km.objective
            );
        }
    }

    #[test]
    fn rejects_bad_k() {
        assert!(kmeans(&[vec![1.0]], 2, 0, 10).is_err());
        assert!(kmeans(&[vec![1.0]], 0, 0, 10).is_err());
    }
}
