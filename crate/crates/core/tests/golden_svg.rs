//! Golden-file checks for the chart emitters: fixed fixtures and seeds must
//! render byte-identical SVGs. Regenerate with `GOLDEN_BLESS=1 cargo test -p
//! semnova --test golden_svg` after an intentional rendering change, and
//! review the diff before committing.

use std::collections::BTreeMap;
use std::path::PathBuf;

use semnova::novelty::NoveltySeries;
use semnova::topics::TopicYearCounts;
use semnova::viz::{emit_coevolution, emit_semantic_map, tsne_2d, SceneSpec, ScenePoint, TsneParams};

fn golden_dir() -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("tests/golden")
}

fn check_golden(name: &str, rendered: &str) {
    let path = golden_dir().join(name);
    if std::env::var("GOLDEN_BLESS").is_ok() {
        std::fs::create_dir_all(golden_dir()).unwrap();
        std::fs::write(&path, rendered).unwrap();
        return;
    }
    let expected = std::fs::read_to_string(&path)
        .unwrap_or_else(|e| panic!("missing golden {name} ({e}); bless with GOLDEN_BLESS=1"));
    assert_eq!(
        rendered, expected,
        "{name} no longer matches its golden; bless intentionally with GOLDEN_BLESS=1"
    );
}

fn coevolution_fixture() -> (NoveltySeries, TopicYearCounts) {
    let mut values = BTreeMap::new();
    for (year, v) in [(2001, 0.115), (2002, 0.310), (2003, 0.240), (2004, 0.095)] {
        values.insert((year, 7u32), v);
    }
    let novelty = NoveltySeries { topic: "ebolavirus".into(), values, ..Default::default() };
    let counts = TopicYearCounts {
        topic: "ebolavirus".into(),
        counts: [(2000i32, 48u64), (2001, 52), (2002, 61), (2003, 96), (2004, 151)]
            .into_iter()
            .collect(),
    };
    (novelty, counts)
}

#[test]
fn golden_coevolution_chart() {
    let (novelty, counts) = coevolution_fixture();
    let out = emit_coevolution(&novelty, 7, &counts, 2001..=2004).unwrap();
    check_golden("coevolution.svg", &out.svg);
    check_golden("coevolution.csv", &out.csv);
}

#[test]
fn golden_semantic_map() {
    // 14 points in 6-D, embedded with a fixed seed, labelled across 3 years
    let mut vectors = Vec::new();
    let mut meta = Vec::new();
    for (i, year) in (0..14).map(|i| (i, 2001 + i % 3)) {
        let angle = i as f64 * 0.7;
        vectors.push(vec![
            angle.cos(),
            angle.sin(),
            (i as f64 * 0.31).cos(),
            (i as f64 * 0.17).sin(),
            i as f64 * 0.05,
            1.0 - i as f64 * 0.03,
        ]);
        meta.push((format!("term{i:02}"), year));
    }
    let params = TsneParams { perplexity: 3.0, iterations: 300, seed: 17, ..Default::default() };
    let coords = tsne_2d(&vectors, &params).unwrap();
    let points: Vec<ScenePoint> = meta
        .into_iter()
        .zip(coords)
        .map(|((token, year), xy)| ScenePoint { token, year, x: xy[0], y: xy[1] })
        .collect();
    let out = emit_semantic_map(&SceneSpec { points }).unwrap();
    check_golden("semantic_map.svg", &out.svg);
    check_golden("semantic_map.csv", &out.csv);
}
