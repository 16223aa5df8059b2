use bevgrid::io::{read_labels, read_point_stream, read_points, write_labels, write_points, Point};
use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn random_points(n: usize, seed: u64) -> Vec<Point> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    (0..n)
        .map(|i| {
            let label = if rng.random_bool(0.05) { 255 } else { rng.random_range(0..13) };
            Point::new(
                rng.random_range(-1e3..1e3),
                rng.random_range(-1e3..1e3),
                rng.random_range(-50.0..200.0),
                [rng.random(), rng.random(), rng.random()],
                label,
                i as u64,
            )
        })
        .collect()
}

#[test]
fn hundred_thousand_points_in_4096_batches() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("cloud.bin");
    let pts = random_points(100_000, 1);
    write_points(&path, &pts).unwrap();

    let batches: Vec<Vec<Point>> = read_point_stream(&path, 4096).unwrap().map(|b| b.unwrap()).collect();
    assert_eq!(batches.len(), 25);
    assert!(batches[..24].iter().all(|b| b.len() == 4096));
    assert_eq!(batches[24].len(), 1696);
    let flat: Vec<Point> = batches.into_iter().flatten().collect();
    assert_eq!(flat, pts);
}

#[test]
fn label_file_round_trip() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("labels.bin");
    let mut rng = ChaCha8Rng::seed_from_u64(9);
    let labels: Vec<u8> = (0..10_000)
        .map(|_| if rng.random_bool(0.1) { 255 } else { rng.random_range(0..13) })
        .collect();
    write_labels(&path, &labels, labels.len() as u64).unwrap();
    assert_eq!(std::fs::metadata(&path).unwrap().len(), 10_000);
    assert_eq!(read_labels(&path).unwrap(), labels);
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(24))]

    #[test]
    fn batching_does_not_change_contents(n in 0usize..3000, chunk in 1usize..700, seed in any::<u64>()) {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("c.bin");
        let pts = random_points(n, seed);
        write_points(&path, &pts).unwrap();
        let mut count = 0;
        let mut flat = Vec::new();
        for b in read_point_stream(&path, chunk).unwrap() {
            let b = b.unwrap();
            prop_assert!(!b.is_empty() && b.len() <= chunk);
            count += 1;
            flat.extend(b);
        }
        prop_assert_eq!(count, n.div_ceil(chunk));
        prop_assert_eq!(&flat, &pts);
        prop_assert_eq!(read_points(&path).unwrap(), pts);
    }
}
