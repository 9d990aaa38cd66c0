mod common;

use linmdd_core::rng::stream_rng;
use linmdd_core::simulation::{
    emit_table, generate, read_table, replicate_sample, run_grid, GridConfig, Model, ModelCase, PowerRow,
    PowerTable, Profile, TableFormat, TABLE_COLUMNS,
};
use linmdd_core::TestKind;

fn small_grid(seed: u64) -> GridConfig {
    let mut cfg = GridConfig::for_models(&[1, 2], Profile::Desk, vec![TestKind::LinMdd, TestKind::PartialF], seed)
        .unwrap();
    cfg.n_grid = vec![20, 30];
    cfg.replications = 6;
    cfg.num_permutations = 29;
    cfg
}

fn in_pool<T: Send>(threads: usize, f: impl FnOnce() -> T + Send) -> T {
    rayon::ThreadPoolBuilder::new().num_threads(threads).build().unwrap().install(f)
}

#[test]
fn large_sample_moments() {
    let spec = Model::catalog(1).unwrap().spec(0.0);
    let n = 100_000;
    let s = generate(&spec, n, &mut stream_rng(123, 0)).unwrap();
    let z = s.z().column(0);
    let mean_z = z.iter().sum::<f64>() / n as f64;
    assert!(mean_z.abs() < 3.0 / (n as f64).sqrt(), "mean(Z) = {mean_z}");
    // under the null Y = −Z + ε
    let eps: Vec<f64> = (0..n).map(|i| s.y().get(i, 0) + z[i]).collect();
    let m = eps.iter().sum::<f64>() / n as f64;
    let var = eps.iter().map(|e| (e - m).powi(2)).sum::<f64>() / (n - 1) as f64;
    assert!((var - 4.0).abs() < 0.2, "var(eps) = {var}");
}

#[test]
fn grid_is_deterministic_across_thread_counts() {
    let cfg = small_grid(17);
    let a = in_pool(1, || run_grid(&cfg).unwrap());
    let b = in_pool(6, || run_grid(&cfg).unwrap());
    assert_eq!(a, b);
    assert_ne!(a, run_grid(&small_grid(18)).unwrap());
}

#[test]
fn adding_a_test_does_not_perturb_other_cells() {
    let base = small_grid(5);
    let mut wider = base.clone();
    wider.tests.push(TestKind::Mdd);
    let a = run_grid(&base).unwrap();
    let b = run_grid(&wider).unwrap();
    for row in &a.rows {
        let other = b.find(row.model_id, row.c, row.n, row.alpha, row.test).unwrap();
        assert_eq!(row, other);
    }
}

#[test]
fn replicate_samples_depend_on_cell_key() {
    let case = ModelCase {
        model_id: 1,
        spec: Model::catalog(1).unwrap().spec(1.0),
    };
    let a = replicate_sample(1, &case, 20, 0).unwrap();
    assert_eq!(a, replicate_sample(1, &case, 20, 0).unwrap());
    assert_ne!(a, replicate_sample(1, &case, 20, 1).unwrap());
}

#[test]
fn two_model_grid_row_count() {
    let cfg = GridConfig::for_models(&[1, 2], Profile::Paper, TestKind::ALL.to_vec(), 1).unwrap();
    // (4 + 3) c values × 5 sample sizes × 2 levels × 3 tests
    assert_eq!(cfg.cases.len() * cfg.n_grid.len() * cfg.alphas.len() * cfg.tests.len(), 7 * 5 * 2 * 3);
    let mut tiny = cfg.clone();
    tiny.replications = 1;
    tiny.num_permutations = 1;
    tiny.n_grid = vec![20];
    assert_eq!(run_grid(&tiny).unwrap().rows.len(), 7 * 2 * 3);
}

#[test]
fn failed_replicate_aborts_run() {
    let mut cfg = small_grid(2);
    cfg.n_grid = vec![3];
    assert!(run_grid(&cfg).is_err());
}

#[test]
fn csv_and_json_round_trip() {
    let table = run_grid(&small_grid(9)).unwrap();
    let dir = tempfile::tempdir().unwrap();
    for format in [TableFormat::Csv, TableFormat::Json] {
        let path = dir.path().join(format!("t.{format:?}"));
        emit_table(&table, format, &path).unwrap();
        assert_eq!(read_table(&path, format).unwrap(), table);
    }
    let text = std::fs::read_to_string(dir.path().join("t.Csv")).unwrap();
    assert_eq!(text.lines().next().unwrap(), TABLE_COLUMNS.join(","));
}

#[test]
fn empty_table_is_header_only() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("empty.csv");
    emit_table(&PowerTable::default(), TableFormat::Csv, &path).unwrap();
    let text = std::fs::read_to_string(&path).unwrap();
    assert_eq!(text.trim_end(), TABLE_COLUMNS.join(","));
    assert!(read_table(&path, TableFormat::Csv).unwrap().rows.is_empty());
}

#[test]
fn one_cell_table() {
    let case = ModelCase {
        model_id: 2,
        spec: Model::catalog(2).unwrap().spec(1.0 / 3.0),
    };
    let table = PowerTable {
        rows: vec![PowerRow::new(&case, 70, 0.1, TestKind::LinMdd, 1000, 437, u64::MAX)],
    };
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("one.csv");
    emit_table(&table, TableFormat::Csv, &path).unwrap();
    assert_eq!(std::fs::read_to_string(&path).unwrap().lines().count(), 2);
    let back = read_table(&path, TableFormat::Csv).unwrap();
    assert_eq!(back, table);
    assert_eq!(back.rows[0].rate, 0.437);
}

#[test]
fn io_errors_name_the_path() {
    let err = emit_table(&PowerTable::default(), TableFormat::Csv, "/nonexistent/dir/t.csv".as_ref())
        .unwrap_err();
    assert!(err.to_string().contains("/nonexistent/dir/t.csv"));
}
