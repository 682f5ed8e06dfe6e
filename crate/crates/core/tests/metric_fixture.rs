mod common;

use chartloop_core::grade::{aggregate, ClassColumn, RetrievalClass};
use chartloop_core::seed::ChartType;

#[test]
fn hand_graded_records_agree() {
    let rows = common::hand_graded();
    assert_eq!(rows.len(), 50);
    common::grade_fixture().unwrap();
}

#[test]
fn accuracy_table_counts_match_hand_tally() {
    let records = common::grade_fixture().unwrap();
    let rows = common::hand_graded();
    let report = aggregate(&records);
    assert_eq!(report.overall.total, 50);
    assert_eq!(report.overall.correct, 32);
    for ct in ChartType::ALL {
        for (class, want) in [
            (ClassColumn::Direct, Some(RetrievalClass::Direct)),
            (ClassColumn::Complex, Some(RetrievalClass::Complex)),
            (ClassColumn::All, None),
        ] {
            let hits: Vec<_> = rows
                .iter()
                .filter(|r| r.chart_type == ct && want.is_none_or(|w| w == r.retrieval_class))
                .collect();
            let cell = report.cell(ct, class);
            if hits.is_empty() {
                assert!(cell.is_none());
                continue;
            }
            let cell = cell.unwrap();
            assert_eq!(cell.total, hits.len(), "{ct} {class:?}");
            assert_eq!(cell.correct, hits.iter().filter(|r| r.expected).count(), "{ct} {class:?}");
        }
    }
}
