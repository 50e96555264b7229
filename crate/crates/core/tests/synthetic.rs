use pta_core::geometry::sectorize;
use pta_core::losses::{pt_for_mask, PtaConfig};
use pta_core::synthetic::{generate_image, offset_cases, run_real_overlay, run_table1, SyntheticSpec};
use pta_core::{BinaryMask, GrayImage};

#[test]
fn horizontal_case_peaks_where_edges_are_displaced() {
    let spec = SyntheticSpec::default();
    let gt = spec.gt_mask().unwrap();
    let case4 = offset_cases(&gt, spec.grow, spec.shift).unwrap()[3].clone();
    let cfg = PtaConfig::default();
    let sectors = sectorize(&case4, cfg.band_width, cfg.sectors).unwrap();
    for replicate in 0..5 {
        let (image, _) = generate_image(&spec, replicate).unwrap();
        let report = pt_for_mask(&image, &case4, &cfg).unwrap();
        let (argmax, _) = report
            .per_sector
            .iter()
            .enumerate()
            .filter_map(|(i, s)| s.loss.map(|l| (i, l)))
            .max_by(|a, b| a.1.total_cmp(&b.1))
            .unwrap();
        let s = &sectors.sectors[argmax];
        let touches = s.inner.iter().chain(&s.outer).any(|p| gt.contains(*p) != case4.contains(*p));
        assert!(touches, "replicate {replicate}: sector {} misses the displaced region", argmax + 1);
    }
}

#[test]
fn wider_contrast_lowers_correct_case_loss() {
    let cfg = PtaConfig::default();
    let mean_case1 = |inside_mean: f64| {
        let spec = SyntheticSpec { inside_mean, ..SyntheticSpec::default() };
        let t = run_table1(&spec, &cfg).unwrap();
        t.summary[0].mean_aggregate
    };
    assert!(mean_case1(7.0) < mean_case1(3.5));
}

fn contrasted_scene() -> (GrayImage, BinaryMask) {
    let gt = BinaryMask::from_fn(120, 100, |x, y| {
        let (dx, dy) = (x as f64 - 60.0, y as f64 - 50.0);
        dx * dx / 900.0 + dy * dy / 484.0 < 1.0
    })
    .unwrap();
    let image = GrayImage::from_fn(120, 100, |x, y| {
        let texture = ((x * 37 + y * 91) % 17) as f64 / 17.0;
        if gt.get(x, y) { 10.0 + texture } else { 2.0 + texture }
    })
    .unwrap();
    (image, gt)
}

#[test]
fn overlay_correct_case_is_minimal_and_deterministic() {
    let (image, gt) = contrasted_scene();
    let cfg = PtaConfig::default();
    let a = run_real_overlay(&image, &gt, 3, &cfg).unwrap();
    let b = run_real_overlay(&image, &gt, 3, &cfg).unwrap();
    assert_eq!(a, b);
    assert_eq!(a.len(), 5);
    for r in &a {
        assert!(r.aggregate.is_finite() && r.aggregate > 0.0);
    }
    assert!(a[1..].iter().all(|r| r.aggregate > a[0].aggregate));
    assert_eq!(a[0].f1, 1.0);
}

#[test]
fn dsc_based_total_separates_correct_and_diagonal_cases() {
    use pta_core::losses::{pta_loss, BaseLoss, Prediction, Target};
    use pta_core::ProbabilityMap;

    let spec = SyntheticSpec::default();
    let gt = spec.gt_mask().unwrap();
    let cases = offset_cases(&gt, spec.grow, spec.shift).unwrap();
    let cfg = PtaConfig::default();
    let total = |image: &GrayImage, seg: &BinaryMask| {
        let pred = ProbabilityMap::from_mask(seg);
        pta_loss(image, Target::Binary(&gt), Prediction::Binary(&pred), &BaseLoss::Dsc, &cfg).unwrap()
    };
    let mut case1_pt = 0.0;
    let mut wins = 0;
    for replicate in 0..20 {
        let (image, _) = generate_image(&spec, replicate).unwrap();
        let r1 = total(&image, &cases[0]);
        let r5 = total(&image, &cases[4]);
        assert_eq!(r1.base, 0.0);
        case1_pt += r1.pt.unwrap() / 20.0;
        wins += (r5.total.unwrap() > r1.total.unwrap()) as usize;
    }
    assert!(case1_pt < 0.6, "mean correct-case band term {case1_pt}");
    assert!(wins >= 19, "diagonal above correct on {wins}/20");
}
