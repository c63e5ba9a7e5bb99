use super::*;
use crate::inference::IntervalKind;

fn small_config(r: usize, seed: u64) -> ExperimentConfig {
    let dgp = Dgp::Exact(LogitDgpConfig::new(300, PRule::Explicit(20), 0));
    ExperimentConfig {
        replications: r,
        bootstrap_reps: 19,
        ..ExperimentConfig::new(dgp, seed)
    }
}

#[test]
fn single_replication_cells_are_binary() {
    let table = run_experiment(&small_config(1, 5)).unwrap().table();
    assert_eq!(table.cells.len(), 8 * 2 * 3);
    for c in &table.cells {
        assert!(c.coverage == 0.0 || c.coverage == 1.0, "{c:?}");
        assert_eq!(c.mc_se, 0.0);
    }
}

#[test]
fn mc_se_is_exact() {
    let table = run_experiment(&small_config(3, 9)).unwrap().table();
    for c in &table.cells {
        assert!((0.0..=1.0).contains(&c.coverage));
        assert_eq!(c.mc_se, (c.coverage * (1.0 - c.coverage) / 3.0).sqrt());
    }
    assert_eq!(mc_standard_error(0.9, 100), (0.09f64 / 100.0).sqrt());
}

#[test]
fn deterministic_across_thread_counts() {
    let cfg = small_config(3, 11);
    let run = |threads: usize| {
        rayon::ThreadPoolBuilder::new()
            .num_threads(threads)
            .build()
            .unwrap()
            .install(|| run_experiment(&cfg).unwrap().table())
    };
    let one = run(1);
    let three = run(3);
    assert_eq!(one.to_csv(), three.to_csv());
    assert_eq!(one, three);
}

#[test]
fn toggling_columns_keeps_other_columns() {
    let all = run_experiment(&small_config(2, 13)).unwrap();
    let only = run_experiment(&ExperimentConfig {
        columns: vec![Column::PoBootC1],
        ..small_config(2, 13)
    })
    .unwrap();
    for (a, b) in all.records.iter().zip(&only.records) {
        for coef in [0, 1] {
            for kind in [IntervalKind::Symmetric, IntervalKind::LowerOneSided] {
                let key = (Column::PoBootC1, coef, kind);
                assert_eq!(a.cells[&key], b.cells[&key]);
            }
        }
    }
}

#[test]
fn prefix_tables_match_shorter_runs() {
    let long = run_experiment(&small_config(3, 17)).unwrap();
    let short = run_experiment(&small_config(2, 17)).unwrap().table();
    assert_eq!(long.prefix_table(2), short);
}

#[test]
fn zero_small_coefficients_reduce_to_exact_sparsity() {
    let base = LogitDgpConfig::new(300, PRule::Explicit(20), 0);
    let small = SmallCoefDgpConfig::new(base.clone(), vec![0.0; 4], 0.05).unwrap();
    let cols = vec![Column::OracleAsymp, Column::PoAsympC1];
    let exact = run_experiment(&ExperimentConfig {
        columns: cols.clone(),
        ..ExperimentConfig::new(Dgp::Exact(base), 3)
    })
    .map(|r| r.prefix_table(2));
    let reduced = run_experiment(&ExperimentConfig {
        columns: cols,
        replications: 2,
        ..ExperimentConfig::new(Dgp::SmallCoef(small), 3)
    })
    .map(|r| r.table());
    assert_eq!(exact.unwrap().cells, reduced.unwrap().cells);
}

#[test]
fn column_parsing() {
    assert_eq!(parse_columns("all").unwrap().len(), 8);
    assert_eq!(parse_columns("oracle-only").unwrap(), vec![Column::OracleAsymp, Column::OracleBoot]);
    assert_eq!(
        parse_columns("po-boot-c1, full-asymp").unwrap(),
        vec![Column::FullAsymp, Column::PoBootC1]
    );
    assert!(parse_columns("po-boot-c3").is_err());
    assert_eq!(parse_columns("boot").unwrap().len(), 4);
}

#[test]
fn unselected_coefficient_counts_as_miss() {
    let dgp = Dgp::Exact(LogitDgpConfig {
        theta0: Some(vec![0.02; 15]),
        ..LogitDgpConfig::new(200, PRule::Explicit(20), 0)
    });
    let cfg = ExperimentConfig {
        columns: vec![Column::PoAsympC1],
        replications: 2,
        ..ExperimentConfig::new(dgp, 1)
    };
    let run = run_experiment(&cfg).unwrap();
    for rec in &run.records {
        let sel = &rec.selected[&crate::penalty::BicConstant::One];
        for coef in [0, 1] {
            let cell = rec.cells[&(Column::PoAsympC1, coef, IntervalKind::Symmetric)];
            if !sel.contains(coef) {
                assert!(!cell.covered);
                assert!(cell.interval.is_none());
            }
        }
    }
    let text = run.table().to_text();
    assert!(text.contains("Symmetrical"));
}
