use std::collections::BTreeMap;

use tempconv_core::blocks::{BlockKind, Expansion};
use tempconv_core::complexity::{
    analyze, count_macs, count_params, relative_deviation, verify, ExpectedFixture, FixtureRow, InputShape, Metric,
    Scope,
};
use tempconv_core::model::{build_model, Component, ModelConfig};

fn tcn(kind: BlockKind, stages: usize, channels: usize) -> tempconv_core::complexity::ComplexityReport {
    let mut cfg = ModelConfig::tcn_only(kind, stages, channels);
    cfg.tcn.experimental = true;
    let g = build_model::<f32>(&cfg, 0).unwrap();
    analyze(&g, InputShape::default()).unwrap()
}

#[test]
fn one_full_temporal_conv() {
    // k = 3, C = 512, with bias; 29 output steps.
    let c = 512u64;
    assert_eq!(3 * c * c + c, 786_944);
    assert_eq!(3 * c * c * 29, 22_806_528);
    let r = tcn(BlockKind::BaselineTcn, 1, 512);
    let per_conv_params = (r.tcn.params - 4 * c) / 2;
    assert_eq!(per_conv_params, 786_944);
    assert_eq!(r.tcn.macs / 2, 22_806_528);
}

#[test]
fn baseline_tcn_matches_hand_count() {
    let c = 512u64;
    let per_block = 2 * (3 * c * c + c) + 2 * (2 * c);
    let r = tcn(BlockKind::BaselineTcn, 4, 512);
    assert_eq!(r.tcn.params, 4 * per_block);
    assert_eq!(r.tcn.params, 6_303_744);
    assert_eq!(r.tcn.macs, 4 * 2 * 3 * c * c * 29);
    assert!(relative_deviation(r.tcn.params, 6.2e6) <= 0.03);
    assert!(relative_deviation(r.tcn.macs, 0.2e9) <= 0.15);
}

#[test]
fn starv_tcn_matches_published_totals() {
    let r = tcn(BlockKind::StarV, 4, 512);
    // dw7+b, BN, two pw C→4C +b, pw 4C→C +b, BN, dw7+b per block.
    let c = 512u64;
    let e = 4 * c;
    let per_block = (7 * c + c) + 2 * c + 2 * (c * e + e) + (e * c + c) + 2 * c + (7 * c + c);
    assert_eq!(r.tcn.params, 4 * per_block);
    assert_eq!(r.tcn.macs, 4 * 29 * (2 * 7 * c + 3 * c * e));
    assert!(relative_deviation(r.tcn.params, 12.6e6) <= 0.02);
    assert!(relative_deviation(r.tcn.macs, 0.36e9) <= 0.05);
}

#[test]
fn wrong_expansion_is_caught_by_the_fixture_tolerance() {
    let mut cfg = ModelConfig::tcn_only(BlockKind::StarV, 4, 512);
    cfg.tcn.expansion = Some(Expansion::new(8, 1));
    let g = build_model::<f32>(&cfg, 0).unwrap();
    let r = analyze(&g, InputShape::default()).unwrap();
    assert!(relative_deviation(r.tcn.params, 12.6e6) > 0.02);
    assert!(relative_deviation(r.tcn.macs, 0.36e9) > 0.05);
}

#[test]
fn module_costs_add_up() {
    let g = build_model::<f32>(&ModelConfig::default(), 0).unwrap();
    let r = analyze(&g, InputShape::default()).unwrap();
    let params: u64 = r.modules.iter().map(|m| m.params).sum();
    let macs: u64 = r.modules.iter().map(|m| m.macs).sum();
    assert_eq!((params, macs), (r.total.params, r.total.macs));
    let by: u64 = r.by_component.values().map(|c| c.macs).sum();
    assert_eq!(by, r.total.macs);
    assert_eq!(r.total.params, count_params(&g));
    assert_eq!(r.total.params, g.store.num_params());
    assert_eq!(r.total.macs, count_macs(&g, InputShape::default()).unwrap());
    assert_eq!(r.tcn.params, 6_303_744);
    let stem = r.by_component[&Component::Stem];
    assert_eq!(stem.macs, 32 * 75 * 29 * 44 * 44);
    assert_eq!(r.by_component[&Component::Classifier].macs, 512 * 500);
    assert_eq!(r.modules[0].output_shape, [32, 29, 44, 44]);
    assert_eq!(r.modules[1].output_shape, [512, 29]);
}

#[test]
fn macs_scale_linearly_with_frames() {
    let g = build_model::<f32>(&ModelConfig::tcn_only(BlockKind::Uib, 4, 64), 0).unwrap();
    let at = |t| {
        count_macs(
            &g,
            InputShape {
                frames: t,
                ..InputShape::default()
            },
        )
        .unwrap()
    };
    let head = 64 * 500;
    assert_eq!(at(58) - head, 2 * (at(29) - head));
}

#[test]
fn doubling_width_roughly_quadruples_cost() {
    for kind in [BlockKind::BaselineTcn, BlockKind::InvertedResidual, BlockKind::StarV] {
        let a = tcn(kind, 4, 256);
        let b = tcn(kind, 4, 512);
        let pr = b.tcn.params as f64 / a.tcn.params as f64;
        let mr = b.tcn.macs as f64 / a.tcn.macs as f64;
        assert!((3.8..=4.0).contains(&pr), "{kind} params ratio {pr}");
        assert!((3.8..=4.0).contains(&mr), "{kind} macs ratio {mr}");
    }
}

#[test]
fn width_depth_trade_off_trend() {
    let grid = [(8, 128), (6, 256), (4, 512), (3, 768), (2, 1024)];
    let rows: Vec<_> = grid.iter().map(|&(s, c)| tcn(BlockKind::StarV, s, c).tcn).collect();
    assert!(rows[0].params < rows[1].params && rows[1].params < rows[2].params);
    assert!(rows[4].macs > rows[3].macs);
    assert!(rows[3].macs > rows[2].macs && rows[2].macs > rows[1].macs && rows[1].macs > rows[0].macs);
}

#[test]
fn input_shape_round_trips() {
    let s: InputShape = "1x29x88x88".parse().unwrap();
    assert_eq!(s, InputShape::default());
    assert_eq!(s.to_string(), "1x29x88x88");
    assert!("1x29x88".parse::<InputShape>().is_err());
    assert!("0x29x88x88".parse::<InputShape>().is_err());
}

#[test]
fn verify_applies_row_tolerances() {
    let mut reports = BTreeMap::new();
    reports.insert("base".to_string(), tcn(BlockKind::BaselineTcn, 4, 512));
    let row = |tol: f64, gmacs: Option<f64>| FixtureRow {
        id: "base".into(),
        config: "x.toml".into(),
        scope: Scope::Tcn,
        expected_params_m: 6.2,
        params_tolerance: tol,
        expected_gmacs: gmacs,
        macs_tolerance: gmacs.map(|_| 0.15),
        source: String::new(),
    };
    let fx = ExpectedFixture {
        description: String::new(),
        rows: vec![row(0.03, Some(0.2)), row(0.01, None)],
    };
    let v = verify(&reports, &fx).unwrap();
    assert_eq!(v.len(), 3);
    assert!(v[0].pass && v[0].metric == Metric::Params);
    assert!(v[1].pass && v[1].metric == Metric::Macs);
    assert!(!v[2].pass);
    assert!((v[2].relative_deviation - (6_303_744.0 - 6.2e6) / 6.2e6).abs() < 1e-15);
    let mut missing = fx.clone();
    missing.rows[0].id = "nope".into();
    assert!(verify(&reports, &missing).is_err());
    let mut no_tol = fx;
    no_tol.rows[0].macs_tolerance = None;
    assert!(verify(&reports, &no_tol).is_err());
}
