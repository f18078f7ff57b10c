//! Report files, scenario round trips and run reproducibility.

mod support;

use std::fs;

use energetics::report::{self, read_metrics, read_summary};
use energetics::{canonical_toml, emit_report, parse_scenario, run_scenario, Summary};
use energetics_core::engine::{self, SerialDecider};
use energetics_core::world::new_world;
use energetics_core::{ledger, RunReport};

fn fuzz_run(seed: u64, weeks: u32) -> RunReport {
    let s = energetics::load_scenario(&support::data_path("fuzz.toml")).unwrap();
    run_scenario(s, Some(seed), Some(weeks)).unwrap()
}

#[test]
fn bundled_scenarios_have_stable_digests() {
    // Frozen when the scenarios were written; any edit must update them.
    let expected = [
        (
            "scenarios/reference.toml",
            "6ddbccd20d83a8b5e4237b91457868c8e8f10ac6b583d42f601de977bda45e3a",
        ),
        (
            "scenarios/reference_cap_half.toml",
            "e51f0009dfc882bb34d12ba5346d22f6c39c811e9f8cfa0be87d411f034e24ba",
        ),
        (
            "scenarios/reference_tax_x2.toml",
            "65885f8a30c3b7ab3f547fc61dfa3c9a2386eaca712cc4551c7726078c37259b",
        ),
    ];
    for (file, digest) in expected {
        assert_eq!(support::scenario(file).digest(), digest, "{file}");
    }
}

#[test]
fn variants_differ_only_in_policy_events() {
    let base = support::scenario("scenarios/reference.toml");
    for file in ["scenarios/reference_cap_half.toml", "scenarios/reference_tax_x2.toml"] {
        let v = support::scenario(file);
        assert_eq!(v.base_digest(), base.base_digest(), "{file}");
        assert_ne!(v.digest(), base.digest());
        assert!(v.policy_events.iter().all(|e| e.week == 26));
    }
}

#[test]
fn reference_run_digest_is_frozen() {
    let report = run_scenario(support::scenario("scenarios/reference.toml"), Some(7), Some(52)).unwrap();
    assert_eq!(
        report.final_digest,
        "22665587cd9068c692a054a3a4fb2cc99067d6ed6ea6f6a01da633efb05f31f9"
    );
    assert_eq!(report.final_drift, 0);
}

#[test]
fn canonical_form_is_a_fixed_point() {
    for file in ["scenarios/reference.toml", "scenarios/reference_tax_x2.toml"] {
        let s = support::scenario(file);
        let text = canonical_toml(&s);
        let again = parse_scenario(&text).unwrap();
        assert_eq!(again, s);
        assert_eq!(canonical_toml(&again), text);
        assert_eq!(again.digest(), s.digest());
    }
}

#[test]
fn seeds_change_the_run() {
    let ra = run_scenario(support::scenario("scenarios/reference.toml"), Some(7), Some(3)).unwrap();
    let rb = run_scenario(support::scenario("scenarios/reference.toml"), Some(8), Some(3)).unwrap();
    assert_ne!(ra.final_digest, rb.final_digest);
    assert_ne!(ra.rows, rb.rows);
}

#[test]
fn serial_and_parallel_deciders_agree() {
    let mut s = support::scenario("scenarios/reference.toml");
    s.seed = 11;
    s.weeks = 8;
    let parallel = run_scenario(s.clone(), None, None).unwrap();
    let mut w = new_world(&s).unwrap();
    let serial = engine::run_with(&mut w, 8, &SerialDecider).unwrap();
    assert_eq!(serial, parallel);
}

#[test]
fn reports_are_byte_stable() {
    let a = fuzz_run(5, 6);
    let b = fuzz_run(5, 6);
    let (da, db) = (tempfile::tempdir().unwrap(), tempfile::tempdir().unwrap());
    emit_report(&a, da.path()).unwrap();
    emit_report(&b, db.path()).unwrap();
    for f in [
        report::METRICS_FILE,
        report::SUMMARY_FILE,
        report::TRADES_FILE,
        report::JOURNAL_FILE,
        report::AUDIT_FILE,
        report::STOCK_FILE,
    ] {
        assert_eq!(
            fs::read(da.path().join(f)).unwrap(),
            fs::read(db.path().join(f)).unwrap(),
            "{f}"
        );
    }
}

#[test]
fn metrics_and_summary_read_back() {
    let r = fuzz_run(2, 5);
    let dir = tempfile::tempdir().unwrap();
    emit_report(&r, dir.path()).unwrap();
    assert_eq!(read_metrics(&dir.path().join(report::METRICS_FILE)).unwrap(), r.rows);
    assert_eq!(
        read_summary(&dir.path().join(report::SUMMARY_FILE)).unwrap(),
        Summary::of(&r)
    );
    let journal = energetics::audit::read_journal(&dir.path().join(report::JOURNAL_FILE)).unwrap();
    assert_eq!(journal, r.journal);
    let stock = energetics::audit::read_stock(&dir.path().join(report::STOCK_FILE)).unwrap();
    assert_eq!(stock, r.final_stock);
    assert!(energetics::audit::audit_entries(&journal, Some(&stock)).is_clean());
}

#[test]
fn zero_week_report_has_only_a_header() {
    let r = fuzz_run(1, 0);
    assert!(r.rows.is_empty());
    assert_eq!(r.initial_digest, r.final_digest);
    let bytes = report::metrics_csv(&r.rows).unwrap();
    let text = String::from_utf8(bytes).unwrap();
    assert_eq!(text.lines().count(), 1);
    let summary = Summary::of(&r);
    assert!(summary.means.is_empty());
}

#[test]
fn summary_means_match_the_rows() {
    let r = fuzz_run(4, 4);
    let s = Summary::of(&r);
    let emitted: i128 = r
        .rows
        .iter()
        .map(|row| row.value("total_emissions_pu").unwrap().0)
        .sum();
    let mean = s.means["total_emissions_pu"].0;
    assert!((mean * 4 - emitted).abs() < 4, "{mean} vs {emitted}");
}

#[test]
fn reference_world_starts_balanced() {
    let w = new_world(&support::scenario("scenarios/reference.toml")).unwrap();
    assert_eq!(w.regions.len(), 4);
    assert_eq!(ledger::ledger_balance(&w), 0);
    assert!(ledger::account_mismatches(&w).is_empty());
}
