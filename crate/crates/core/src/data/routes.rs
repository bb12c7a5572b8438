//! Solo and pooled route lengths between OD centers.

use super::trips::distance;
use crate::error::{Error, Result};

/// Solo lengths below this many miles are raised to it, so types built from
/// zero-length trips still have positive cost and a defined efficiency.
pub const MIN_SOLO_LENGTH: f64 = 1e-3;

/// Origin and destination of a type center.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct OdPair {
    pub origin: [f64; 2],
    pub destination: [f64; 2],
}

impl From<[f64; 4]> for OdPair {
    fn from(f: [f64; 4]) -> Self {
        Self {
            origin: [f[0], f[1]],
            destination: [f[2], f[3]],
        }
    }
}

fn path_length(stops: [[f64; 2]; 4]) -> f64 {
    stops.windows(2).map(|w| distance(w[0], w[1])).sum()
}

/// Shortest shared route serving both trips: both pickups first, then both
/// drop-offs, over the four pickup/drop-off orders.
pub fn pooled_length(a: &OdPair, b: &OdPair) -> f64 {
    [
        [a.origin, b.origin, a.destination, b.destination],
        [a.origin, b.origin, b.destination, a.destination],
        [b.origin, a.origin, b.destination, a.destination],
        [b.origin, a.origin, a.destination, b.destination],
    ]
    .into_iter()
    .map(path_length)
    .fold(f64::INFINITY, f64::min)
}

/// Solo lengths and the symmetric pooled-length matrix, with
/// `pooled[i][j] >= max(solo[i], solo[j])` and `pooled[i][i] = solo[i]`.
pub fn route_lengths(centers: &[OdPair]) -> (Vec<f64>, Vec<Vec<f64>>) {
    let solo: Vec<f64> = centers
        .iter()
        .map(|c| distance(c.origin, c.destination).max(MIN_SOLO_LENGTH))
        .collect();
    let n = centers.len();
    let mut pooled = vec![vec![0.0; n]; n];
    for i in 0..n {
        pooled[i][i] = solo[i];
        for j in i + 1..n {
            let l = pooled_length(&centers[i], &centers[j])
                .max(solo[i])
                .max(solo[j]);
            pooled[i][j] = l;
            pooled[j][i] = l;
        }
    }
    (solo, pooled)
}

/// `(solo_cost, pair_cost)` at `c_per_mile` dollars per mile.
pub fn derive_costs(centers: &[OdPair], c_per_mile: f64) -> Result<(Vec<f64>, Vec<Vec<f64>>)> {
    if !(c_per_mile > 0.0 && c_per_mile.is_finite()) {
        return Err(Error::Precondition(format!(
            "cost per mile must be positive, got {c_per_mile}"
        )));
    }
    let (solo, pooled) = route_lengths(centers);
    Ok((
        solo.iter().map(|l| c_per_mile * l).collect(),
        pooled
            .iter()
            .map(|row| row.iter().map(|l| c_per_mile * l).collect())
            .collect(),
    ))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn od(o: [f64; 2], d: [f64; 2]) -> OdPair {
        OdPair {
            origin: o,
            destination: d,
        }
    }

    #[test]
    fn identical_trips_pool_for_free() {
        let a = od([0.0, 0.0], [3.0, 4.0]);
        let (solo, pooled) = route_lengths(&[a, a]);
        assert_eq!(solo, vec![5.0, 5.0]);
        assert_eq!(pooled[0][1], 5.0);
        assert_eq!(pooled[0][0], 5.0);
    }

    #[test]
    fn collinear_trips_share_the_middle() {
        // 0 -> 2 and 1 -> 3 on a line: shared route 0 -> 1 -> 2 -> 3 is 3 miles.
        let (_, pooled) = route_lengths(&[od([0.0, 0.0], [2.0, 0.0]), od([1.0, 0.0], [3.0, 0.0])]);
        assert!((pooled[0][1] - 3.0).abs() < 1e-15);
    }

    #[test]
    fn zero_length_trip_gets_floor() {
        let (solo, pooled) =
            route_lengths(&[od([1.0, 1.0], [1.0, 1.0]), od([0.0, 0.0], [0.0, 2.0])]);
        assert_eq!(solo[0], MIN_SOLO_LENGTH);
        assert!(pooled[0][1] >= 2.0);
    }

    #[test]
    fn costs_scale_and_reject_nonpositive_rate() {
        let c = [od([0.0, 0.0], [1.0, 0.0]), od([5.0, 5.0], [5.0, 6.0])];
        let (solo, pair) = derive_costs(&c, 0.7).unwrap();
        assert!((solo[0] - 0.7).abs() < 1e-15);
        assert_eq!(pair[0][1], pair[1][0]);
        assert!(derive_costs(&c, 0.0).is_err());
    }
}
