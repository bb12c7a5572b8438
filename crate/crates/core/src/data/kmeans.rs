//! k-means on trip feature vectors `(origin, destination)`.

use rand::distributions::{Distribution, WeightedIndex};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::trips::TripRecord;
use crate::error::{Error, Result};

pub const MAX_LLOYD_ITERATIONS: usize = 300;
pub const INERTIA_REL_TOL: f64 = 1e-6;
/// Independent k-means++ starts; the lowest-inertia run wins.
pub const DEFAULT_RESTARTS: usize = 10;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Clustering {
    pub assignment: Vec<usize>,
    pub centers: Vec<[f64; 4]>,
    pub sizes: Vec<usize>,
    pub inertia: f64,
    pub iterations: usize,
}

fn sq_dist(a: &[f64; 4], b: &[f64; 4]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum()
}

fn nearest(p: &[f64; 4], centers: &[[f64; 4]]) -> (usize, f64) {
    centers
        .iter()
        .enumerate()
        .map(|(k, c)| (k, sq_dist(p, c)))
        .fold(
            (0, f64::INFINITY),
            |best, cur| if cur.1 < best.1 { cur } else { best },
        )
}

fn plus_plus_init(points: &[[f64; 4]], k: usize, rng: &mut ChaCha8Rng) -> Vec<[f64; 4]> {
    let mut chosen = vec![rng.gen_range(0..points.len())];
    let mut d2: Vec<f64> = points
        .iter()
        .map(|p| sq_dist(p, &points[chosen[0]]))
        .collect();
    while chosen.len() < k {
        let next = match WeightedIndex::new(&d2) {
            Ok(w) => w.sample(rng),
            // Every remaining point coincides with a chosen center: pick any
            // point not yet used.
            Err(_) => {
                let free: Vec<usize> = (0..points.len()).filter(|i| !chosen.contains(i)).collect();
                free[rng.gen_range(0..free.len())]
            }
        };
        chosen.push(next);
        for (d, p) in d2.iter_mut().zip(points) {
            *d = d.min(sq_dist(p, &points[next]));
        }
    }
    chosen.into_iter().map(|i| points[i]).collect()
}

fn lloyd(points: &[[f64; 4]], mut centers: Vec<[f64; 4]>) -> Clustering {
    let k = centers.len();
    let mut assignment = vec![0; points.len()];
    let mut prev = f64::INFINITY;
    let mut iterations = 0;
    loop {
        iterations += 1;
        let mut inertia = 0.0;
        let mut dists = vec![0.0; points.len()];
        for (i, p) in points.iter().enumerate() {
            let (c, d) = nearest(p, &centers);
            assignment[i] = c;
            dists[i] = d;
            inertia += d;
        }
        let mut sums = vec![[0.0; 4]; k];
        let mut sizes = vec![0usize; k];
        for (p, &c) in points.iter().zip(&assignment) {
            sizes[c] += 1;
            for d in 0..4 {
                sums[c][d] += p[d];
            }
        }
        // An emptied cluster takes over the point farthest from its center.
        for c in 0..k {
            if sizes[c] == 0 {
                let far = (0..points.len())
                    .filter(|&i| sizes[assignment[i]] > 1)
                    .max_by(|&a, &b| dists[a].total_cmp(&dists[b]))
                    .expect("more points than clusters");
                let old = assignment[far];
                sizes[old] -= 1;
                for d in 0..4 {
                    sums[old][d] -= points[far][d];
                }
                assignment[far] = c;
                sizes[c] = 1;
                sums[c] = points[far];
                dists[far] = 0.0;
            }
        }
        for c in 0..k {
            for d in 0..4 {
                centers[c][d] = sums[c][d] / sizes[c] as f64;
            }
        }
        let change = (prev - inertia).abs();
        if inertia == 0.0 || change <= INERTIA_REL_TOL * prev || iterations >= MAX_LLOYD_ITERATIONS
        {
            break;
        }
        prev = inertia;
    }
    // Reassign against the final centers unless that would empty a cluster.
    let fresh: Vec<usize> = points.iter().map(|p| nearest(p, &centers).0).collect();
    let mut counts = vec![0; k];
    for &c in &fresh {
        counts[c] += 1;
    }
    if !counts.contains(&0) {
        assignment = fresh;
    }
    recentre(points, assignment, k, iterations)
}

fn recentre(
    points: &[[f64; 4]],
    assignment: Vec<usize>,
    k: usize,
    iterations: usize,
) -> Clustering {
    let mut centers = vec![[0.0; 4]; k];
    let mut sizes = vec![0; k];
    for (p, &c) in points.iter().zip(&assignment) {
        sizes[c] += 1;
        for d in 0..4 {
            centers[c][d] += p[d];
        }
    }
    for c in 0..k {
        for d in 0..4 {
            centers[c][d] /= sizes[c].max(1) as f64;
        }
    }
    let inertia = points
        .iter()
        .zip(&assignment)
        .map(|(p, &c)| sq_dist(p, &centers[c]))
        .sum();
    Clustering {
        assignment,
        centers,
        sizes,
        inertia,
        iterations,
    }
}

/// Clusters trips into `n` types. Deterministic in `seed`.
pub fn cluster_trips(trips: &[TripRecord], n: usize, seed: u64) -> Result<Clustering> {
    cluster_trips_with(trips, n, seed, DEFAULT_RESTARTS)
}

pub fn cluster_trips_with(
    trips: &[TripRecord],
    n: usize,
    seed: u64,
    restarts: usize,
) -> Result<Clustering> {
    if n == 0 {
        return Err(Error::Precondition(
            "number of clusters must be at least 1".into(),
        ));
    }
    if trips.len() < n {
        return Err(Error::Precondition(format!(
            "{} trips cannot form {n} clusters",
            trips.len()
        )));
    }
    let points: Vec<[f64; 4]> = trips.iter().map(TripRecord::features).collect();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut best: Option<Clustering> = None;
    for _ in 0..restarts.max(1) {
        let run = lloyd(&points, plus_plus_init(&points, n, &mut rng));
        if best.as_ref().is_none_or(|b| run.inertia < b.inertia) {
            best = Some(run);
        }
    }
    Ok(best.expect("at least one restart"))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn one_cluster_per_trip() {
        let trips: Vec<TripRecord> = (0..6)
            .map(|i| TripRecord::new([i as f64, 0.0], [0.0, (i * i) as f64]))
            .collect();
        let c = cluster_trips(&trips, 6, 3).unwrap();
        assert_eq!(c.inertia, 0.0);
        let mut seen = c.assignment.clone();
        seen.sort();
        assert_eq!(seen, vec![0, 1, 2, 3, 4, 5]);
        for (t, &a) in trips.iter().zip(&c.assignment) {
            assert_eq!(c.centers[a], t.features());
        }
    }

    #[test]
    fn duplicates_still_fill_every_cluster() {
        let trips = vec![TripRecord::new([0.0; 2], [1.0; 2]); 4];
        let c = cluster_trips(&trips, 3, 1).unwrap();
        assert!(c.sizes.iter().all(|&s| s >= 1), "{:?}", c.sizes);
        assert_eq!(c.sizes.iter().sum::<usize>(), 4);
    }

    #[test]
    fn too_few_trips_is_an_error() {
        let trips = vec![TripRecord::new([0.0; 2], [1.0; 2]); 2];
        assert!(cluster_trips(&trips, 3, 1).is_err());
        assert!(cluster_trips(&trips, 0, 1).is_err());
    }

    #[test]
    fn deterministic_in_seed() {
        let trips: Vec<TripRecord> = (0..40)
            .map(|i| {
                let x = (i as f64 * 0.37).sin() * 5.0;
                TripRecord::new([x, x * 0.5], [x.cos(), i as f64 * 0.1])
            })
            .collect();
        let a = cluster_trips(&trips, 4, 9).unwrap();
        let b = cluster_trips(&trips, 4, 9).unwrap();
        assert_eq!(a, b);
    }
}
