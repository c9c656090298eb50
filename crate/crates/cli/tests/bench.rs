// SPDX-License-Identifier: Apache-2.0

use std::time::Duration;

use qpev_cli::{cmd_bench, BenchOptions};
use qpev_core::property::{Engine, SolverConfig};

fn options(parallel: bool) -> BenchOptions {
    BenchOptions {
        n: 6,
        phases: vec![2, 4, 8, 16, 32, 64],
        engine: Engine::Internal,
        solver: SolverConfig::default(),
        parallel,
        row_timeout: Duration::from_secs(120),
        allow_large: false,
    }
}

#[test]
fn internal_row_times_grow_with_phase_count() {
    // Median over repeated runs; sub-millisecond rows get an absolute slack.
    let runs: Vec<Vec<f64>> = (0..7)
        .map(|_| {
            let report = cmd_bench(&options(false)).unwrap();
            assert!(report.expected_pattern());
            report
                .rows
                .iter()
                .map(|r| r.correct_time_s + r.error_time_s)
                .collect()
        })
        .collect();
    let median: Vec<f64> = (0..6)
        .map(|i| {
            let mut col: Vec<f64> = runs.iter().map(|r| r[i]).collect();
            col.sort_by(f64::total_cmp);
            col[col.len() / 2]
        })
        .collect();
    for w in median.windows(2) {
        assert!(w[1] >= w[0] * 0.8 - 0.002, "{median:?}");
    }
    assert!(median[5] > median[0], "{median:?}");
}

#[test]
fn parallel_rows_keep_verdicts() {
    let seq = cmd_bench(&options(false)).unwrap();
    let par = cmd_bench(&options(true)).unwrap();
    assert_eq!(seq.verdicts(), par.verdicts());
    let phases: Vec<u32> = par.rows.iter().map(|r| r.phase_qubits).collect();
    assert_eq!(phases, [2, 4, 8, 16, 32, 64]);
}
