mod common;

use chartloop_core::compose::{compose_chart, ComposeOptions};
use chartloop_core::palette::PaletteTable;
use chartloop_core::render::render_svg;
use chartloop_core::seed::{synthesize_catalog, ChartType};
use proptest::prelude::*;

#[test]
fn rendered_marks_match_ground_truth() {
    let mut seen = std::collections::BTreeSet::new();
    for (_, spec, gt) in common::charts(11, 300) {
        let svg = render_svg(&spec).unwrap();
        if let Err(e) = common::svgcheck::check(&svg, &gt) {
            panic!("{}: {e}", spec.chart_id);
        }
        seen.insert(spec.chart_type);
    }
    assert_eq!(seen.len(), ChartType::ALL.len());
}

#[test]
fn rendering_is_byte_stable() {
    for (_, spec, _) in common::charts(12, 40) {
        assert_eq!(render_svg(&spec).unwrap(), render_svg(&spec.clone()).unwrap());
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(96))]

    #[test]
    fn any_composition_renders_consistently(master in 0u64..1_000, pick in 0usize..50, rng_seed in any::<u64>()) {
        let catalog = synthesize_catalog(master, 50);
        let seed = &catalog.seeds[pick % catalog.len()];
        let (spec, gt) = compose_chart(seed, &PaletteTable::builtin(), rng_seed, &ComposeOptions::default()).unwrap();
        let svg = render_svg(&spec).unwrap();
        prop_assert_eq!(common::svgcheck::check(&svg, &gt), Ok(()));
    }
}

#[test]
fn tampered_svgs_are_rejected() {
    for (_, spec, gt) in common::charts(13, 30) {
        let svg = String::from_utf8(render_svg(&spec).unwrap()).unwrap();
        let first = spec.series[0].rgb;
        let css = format!("fill=\"rgb({},{},{})\"", first[0], first[1], first[2]);
        let recolored = svg.replacen(&css, "fill=\"rgb(1,2,3)\"", 1);
        assert!(common::svgcheck::check(recolored.as_bytes(), &gt).is_err(), "{}", spec.chart_id);
        let v = gt.data_table[0][0];
        let revalued = svg.replacen(&format!("data-value=\"{v}\""), "data-value=\"-12345.5\"", 1);
        if revalued != svg {
            assert!(common::svgcheck::check(revalued.as_bytes(), &gt).is_err(), "{}", spec.chart_id);
        }
    }
}
