mod common;

use common::oracle;
use proptest::prelude::*;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use strokeseg_evaluate::*;
use strokeseg_volume::{BinaryMask, VoxelGrid};

fn grid(shape: [usize; 3]) -> VoxelGrid {
    VoxelGrid::las(shape, [1.0; 3]).unwrap()
}

fn mask(g: &VoxelGrid, on: impl Fn([usize; 3]) -> bool) -> BinaryMask {
    BinaryMask::from_fn(g.clone(), on)
}

/// First `n` voxels in scan order starting at `start`.
fn run(g: &VoxelGrid, start: usize, n: usize) -> BinaryMask {
    BinaryMask::new(g.clone(), (0..g.len()).map(|i| u8::from(i >= start && i < start + n)).collect()).unwrap()
}

#[test]
fn dice_examples() {
    let g = grid([8, 8, 8]);
    let a = run(&g, 0, 8);
    assert_eq!(dice(&a, &a).unwrap(), 1.0);
    assert_eq!(dice(&run(&g, 0, 8), &run(&g, 4, 8)).unwrap(), 0.5);
    assert_eq!(dice(&run(&g, 0, 8), &run(&g, 8, 8)).unwrap(), 0.0);
    assert_eq!(dice(&BinaryMask::empty(g.clone()), &BinaryMask::empty(g.clone())).unwrap(), 1.0);
    assert!(dice(&a, &BinaryMask::empty(grid([8, 8, 7]))).is_err());
}

#[test]
fn avd_examples() {
    let g = grid([20, 20, 10]);
    assert_eq!(avd(&run(&g, 0, 1000), &run(&g, 5, 1000)).unwrap(), 0.0);
    assert!((avd(&run(&g, 0, 1500), &run(&g, 0, 1000)).unwrap() - 0.5).abs() < 1e-12);
    assert!((avd(&BinaryMask::empty(g.clone()), &run(&g, 0, 2000)).unwrap() - 2.0).abs() < 1e-12);
}

fn blobs(g: &VoxelGrid, corners: &[[usize; 3]]) -> BinaryMask {
    mask(g, |c| corners.iter().any(|o| (0..3).all(|k| c[k] >= o[k] && c[k] < o[k] + 2)))
}

#[test]
fn ald_and_f1_examples() {
    let g = grid([20, 20, 4]);
    let five = blobs(&g, &[[0, 0, 0], [4, 0, 0], [8, 0, 0], [12, 0, 0], [16, 0, 0]]);
    let two = blobs(&g, &[[0, 8, 0], [8, 8, 0]]);
    assert_eq!(ald(&five, &two).unwrap(), 3);
    assert_eq!(ald(&two, &two).unwrap(), 0);
    assert_eq!(ald(&BinaryMask::empty(g.clone()), &two).unwrap(), 2);

    // 3 GT lesions, prediction hits two of them and adds one elsewhere
    let gt = blobs(&g, &[[0, 0, 0], [6, 0, 0], [12, 0, 0]]);
    let pred = blobs(&g, &[[1, 1, 1], [7, 1, 0], [0, 10, 0]]);
    assert!((lesion_f1(&pred, &gt).unwrap() - 2.0 / 3.0).abs() < 1e-15);
    assert_eq!(lesion_f1(&gt, &gt).unwrap(), 1.0);
    assert_eq!(lesion_f1(&BinaryMask::empty(g.clone()), &gt).unwrap(), 0.0);
    assert_eq!(lesion_f1(&BinaryMask::empty(g.clone()), &BinaryMask::empty(g.clone())).unwrap(), 1.0);
}

#[test]
fn hd95_examples() {
    let g = grid([8, 8, 8]);
    let a = mask(&g, |c| c == [0, 0, 0]);
    let b = mask(&g, |c| c == [3, 0, 0]);
    assert_eq!(hd95(&a, &a).unwrap(), 0.0);
    assert_eq!(hd95(&a, &b).unwrap(), 3.0);
    let e = BinaryMask::empty(g.clone());
    assert_eq!(hd95(&e, &e).unwrap(), 0.0);
    assert!((hd95(&e, &a).unwrap() - (3.0f64 * 64.0).sqrt()).abs() < 1e-12);
    assert_eq!(hd95_with(&a, &e, EmptyDistance::Fixed(100.0)).unwrap(), 100.0);

    let aniso = VoxelGrid::las([8, 8, 8], [0.9, 0.9, 6.0]).unwrap();
    let a = mask(&aniso, |c| c == [1, 1, 1]);
    let b = mask(&aniso, |c| c == [1, 1, 3]);
    assert!((hd95(&a, &b).unwrap() - 12.0).abs() < 1e-12);
}

#[test]
fn precision_recall_examples() {
    let g = grid([8, 8, 8]);
    let p = run(&g, 0, 8);
    assert_eq!(precision_recall(&p, &run(&g, 0, 16)).unwrap().0, 1.0);
    assert_eq!(precision_recall(&p, &run(&g, 4, 16)).unwrap(), (0.5, 0.25));
    assert_eq!(precision_recall(&p, &p).unwrap(), (1.0, 1.0));
    let e = BinaryMask::empty(g.clone());
    assert_eq!(precision_recall(&e, &e).unwrap(), (1.0, 1.0));
    assert_eq!(precision_recall(&e, &p).unwrap(), (0.0, 0.0));
    assert_eq!(precision_recall(&p, &e).unwrap(), (0.0, 0.0));
}

#[test]
fn metrics_match_brute_force_on_random_pairs() {
    let mut rng = ChaCha8Rng::seed_from_u64(2022);
    for k in 0..200 {
        let g = oracle::random_grid(&mut rng);
        let p = oracle::random_mask(&g, &mut rng);
        let t = oracle::random_mask(&g, &mut rng);
        let r = evaluate_case("c", "m", &p, &t, &MetricOptions::default()).unwrap();
        assert_eq!(r.dsc, oracle::dice(&p, &t), "pair {k}");
        assert_eq!(r.avd, oracle::avd(&p, &t), "pair {k}");
        assert_eq!(r.ald, oracle::ald(&p, &t), "pair {k}");
        assert_eq!(r.f1, oracle::f1(&p, &t), "pair {k}");
        assert_eq!((r.precision, r.recall), oracle::precision_recall(&p, &t), "pair {k}");
        assert!((r.hd95 - oracle::hd95(&p, &t)).abs() <= 1e-6, "pair {k}: {} vs {}", r.hd95, oracle::hd95(&p, &t));
    }
}

#[test]
fn component_volumes_follow_spacing() {
    let g = VoxelGrid::las([6, 6, 3], [0.9, 0.9, 6.0]).unwrap();
    let m = blobs(&g, &[[0, 0, 0], [3, 3, 1]]);
    let c = connected_components(&m);
    assert_eq!(c.sizes, vec![8, 8]);
    assert!(c.volumes_ml.iter().all(|v| (v - 8.0 * 0.9 * 0.9 * 6.0 / 1000.0).abs() < 1e-15));
    assert!(c.labels.iter().all(|&l| l <= 2));
}

#[test]
fn strata_boundaries() {
    assert_eq!(Stratum::of_volume(4.99), Stratum::Small);
    assert_eq!(Stratum::of_volume(5.0), Stratum::Medium);
    assert_eq!(Stratum::of_volume(19.999), Stratum::Medium);
    assert_eq!(Stratum::of_volume(20.0), Stratum::Large);
    let rec = |id: &str| MetricRecord { case_id: id.into(), model_id: "m".into(), dsc: 1.0, avd: 0.0, ald: 0, f1: 1.0, hd95: 0.0, precision: 1.0, recall: 1.0 };
    let vols = [("a".to_string(), 0.0), ("b".to_string(), 30.0)].into_iter().collect();
    assert_eq!(stratify(&[rec("a"), rec("b")], &vols).unwrap(), vec![Stratum::Small, Stratum::Large]);
    assert!(matches!(stratify(&[rec("z")], &vols), Err(EvalError::MissingVolume(_))));
}

#[test]
fn metrics_csv_layout() {
    let r = MetricRecord { case_id: "c1".into(), model_id: "m".into(), dsc: 0.5, avd: 1.25, ald: 2, f1: 1.0, hd95: 3.0, precision: 0.25, recall: 1.0 };
    let csv = metrics_csv(&[r], Some(&[Stratum::Medium]));
    assert_eq!(csv, "case_id,model_id,dsc,avd_ml,ald,f1,hd95,precision,recall,stratum\nc1,m,0.5,1.25,2,1,3,0.25,1,medium\n");
}

fn pair() -> impl Strategy<Value = (BinaryMask, BinaryMask)> {
    (any::<u64>()).prop_map(|seed| {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let g = oracle::random_grid(&mut rng);
        (oracle::random_mask(&g, &mut rng), oracle::random_mask(&g, &mut rng))
    })
}

fn shift(m: &BinaryMask, d: [usize; 3]) -> BinaryMask {
    BinaryMask::from_fn(m.grid().clone(), |c| c.iter().zip(d).all(|(&a, b)| a >= b) && m.at(c[0] - d[0], c[1] - d[1], c[2] - d[2]))
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn symmetric_metrics((p, g) in pair()) {
        prop_assert_eq!(dice(&p, &g).unwrap(), dice(&g, &p).unwrap());
        prop_assert_eq!(hd95(&p, &g).unwrap(), hd95(&g, &p).unwrap());
        prop_assert_eq!(avd(&p, &g).unwrap(), avd(&g, &p).unwrap());
    }

    #[test]
    fn hd95_is_translation_invariant(seed in any::<u64>(), d in prop::array::uniform3(0usize..4)) {
        // masks confined to the low corner so the shifted copy stays inside
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let g = oracle::random_grid(&mut rng);
        let crop = |m: BinaryMask| BinaryMask::from_fn(g.clone(), |c| c.iter().all(|&v| v < 8) && m.at(c[0], c[1], c[2]));
        let p = crop(oracle::random_mask(&g, &mut rng));
        let t = crop(oracle::random_mask(&g, &mut rng));
        let a = hd95(&p, &t).unwrap();
        let b = hd95(&shift(&p, d), &shift(&t, d)).unwrap();
        prop_assert!((a - b).abs() < 1e-9, "{} vs {}", a, b);
    }

    #[test]
    fn metrics_stay_in_range((p, g) in pair()) {
        let r = evaluate_case("c", "m", &p, &g, &MetricOptions::default()).unwrap();
        for v in [r.dsc, r.f1, r.precision, r.recall] {
            prop_assert!((0.0..=1.0).contains(&v));
        }
        prop_assert!(r.avd >= 0.0 && r.hd95 >= 0.0 && r.hd95.is_finite());
    }
}
