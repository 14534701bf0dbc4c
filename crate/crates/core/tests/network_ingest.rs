use amod_core::fleet::{FleetState, Vehicle, VehicleStatus};
use amod_core::ingest::{aggregate_demand, estimate_transitions, historical_moments, DayWindow, StdDivisor, TripRecord};
use amod_core::network::{normalized_adjacency, DemandTensor, TimeGrid, ZoneNetwork};
use nalgebra::DMatrix;
use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn random_network<R: Rng>(rng: &mut R, n: usize) -> ZoneNetwork {
    let pts: Vec<[f64; 2]> = (0..n).map(|_| [rng.random_range(0.0..5000.0), rng.random_range(0.0..5000.0)]).collect();
    let knn = rng.random_range(1..=3);
    ZoneNetwork::from_centroids((0..n as u32).collect(), pts, 8.0, None, knn).unwrap()
}

fn to_dense(a: &ndarray::Array2<f64>) -> DMatrix<f64> {
    DMatrix::from_fn(a.nrows(), a.ncols(), |i, j| a[[i, j]])
}

#[test]
fn path_graph_against_dense_product() {
    let pts = vec![[0.0, 0.0], [1000.0, 0.0], [2000.0, 0.0]];
    let net = ZoneNetwork::from_centroids(vec![1, 2, 3], pts, 10.0, Some(&[(0, 1), (1, 2)]), 0).unwrap();
    let a = DMatrix::from_row_slice(3, 3, &[1.0, 1.0, 0.0, 1.0, 1.0, 1.0, 0.0, 1.0, 1.0]);
    let d = DMatrix::from_diagonal(&a.row_sum().transpose().map(|v: f64| 1.0 / v.sqrt()));
    let oracle = &d * &a * &d;
    let got = to_dense(&normalized_adjacency(&net).unwrap());
    assert!((got - oracle).abs().max() < 1e-15);
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(60))]

    #[test]
    fn normalized_adjacency_is_symmetric_and_contractive(seed in any::<u64>(), n in 1usize..12) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let net = random_network(&mut rng, n);
        let a = to_dense(&normalized_adjacency(&net).unwrap());
        prop_assert!((&a - a.transpose()).abs().max() <= 1e-12);
        let eig = a.symmetric_eigenvalues();
        prop_assert!(eig.iter().all(|l| l.abs() <= 1.0 + 1e-12));
        // The self-looped normalized adjacency has eigenvalue one.
        prop_assert!((eig.max() - 1.0).abs() <= 1e-9);
    }

    #[test]
    fn aggregation_counts_every_trip_in_the_window(seed in any::<u64>()) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let net = random_network(&mut rng, 5);
        let grid = TimeGrid::default();
        let window = DayWindow { start: 86_400, intervals: 12 };
        let trips: Vec<TripRecord> = (0..rng.random_range(0..200))
            .map(|_| {
                let t = rng.random_range(80_000..92_000);
                TripRecord {
                    pickup_time: t,
                    dropoff_time: t + rng.random_range(0..2000),
                    pickup_zone: rng.random_range(0..5),
                    dropoff_zone: rng.random_range(0..5),
                }
            })
            .collect();
        let inside = trips.iter().filter(|t| window.interval_of(t.pickup_time, &grid).is_some()).count();
        let (tensor, od) = aggregate_demand(&trips, &net, &grid, window);
        prop_assert_eq!(tensor.total(), inside as u64);
        prop_assert_eq!(od.origin_totals(), tensor);
    }

    #[test]
    fn estimated_transitions_are_row_complete(seed in any::<u64>()) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let n = rng.random_range(1..8);
        let net = random_network(&mut rng, n);
        let grid = TimeGrid { delta: rng.random_range(1..10) * 60, ..TimeGrid::default() };
        let trips: Vec<TripRecord> = (0..rng.random_range(0..300))
            .map(|_| {
                let t = rng.random_range(0..20_000);
                TripRecord {
                    pickup_time: t,
                    dropoff_time: t + rng.random_range(-10..3000),
                    pickup_zone: rng.random_range(0..n),
                    dropoff_zone: rng.random_range(0..n),
                }
            })
            .collect();
        let tm = estimate_transitions(&trips, &net, &grid);
        tm.validate().unwrap();
        for i in 0..n {
            let row: f64 = tm.p.row(i).sum() + tm.q.row(i).sum();
            prop_assert!((row - 1.0).abs() <= 1e-9);
        }
    }

    #[test]
    fn moments_use_the_population_divisor(a in 0u32..50, b in 0u32..50) {
        let days = [DemandTensor::from_rows(vec![vec![a]]).unwrap(), DemandTensor::from_rows(vec![vec![b]]).unwrap()];
        let m = historical_moments(&days, StdDivisor::Population).unwrap();
        let (a, b) = (a as f64, b as f64);
        prop_assert!((m.mu(0, 0) - (a + b) / 2.0).abs() < 1e-12);
        prop_assert!((m.sigma(0, 0) - (a - b).abs() / 2.0).abs() < 1e-12);
    }

    #[test]
    fn fleet_recount_is_conservative(seed in any::<u64>()) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let net = random_network(&mut rng, 6);
        let size = rng.random_range(1..60);
        let vehicles: Vec<Vehicle> = (0..size as u32)
            .map(|id| {
                let mut v = Vehicle::idle(id, rng.random_range(0..6));
                let status = [VehicleStatus::Idle, VehicleStatus::Rebalancing, VehicleStatus::Pickup, VehicleStatus::Occupied][rng.random_range(0..4)];
                if status != VehicleStatus::Idle {
                    v.status = status;
                    v.destination = rng.random_range(0..6);
                    v.leg_s = rng.random_range(1.0..900.0);
                    v.remaining_s = rng.random_range(0.0..v.leg_s);
                }
                v
            })
            .collect();
        let fleet = FleetState::new(vehicles, &net);
        fleet.check(size, &net).unwrap();
        prop_assert!(fleet.check(size + 1, &net).is_err());
    }
}
