use ctriv_core::harness::{
    build_three_mass, calibrate_snr, emit_results, gen_noise, measured_snr_db, param_label,
    read_table_csv, render_svg, run_monte_carlo, write_table_csv, Benchmark, BenchmarkSpec,
    McConfig, McResultTable, McRow, NoiseSpec, OutputFormat, Pipeline,
};
use ctriv_core::Error;
use nalgebra::DMatrix;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

fn variance(x: &DMatrix<f64>, ch: usize) -> f64 {
    let c = x.column(ch);
    let m = c.mean();
    c.iter().map(|v| (v - m).powi(2)).sum::<f64>() / c.len() as f64
}

#[test]
fn white_noise_has_unit_variance() {
    let v = gen_noise(100_000, 2, &[1.0], &[1.0], 1).unwrap();
    for ch in 0..2 {
        assert!((variance(&v, ch) - 1.0).abs() < 0.03);
    }
}

#[test]
fn arma_noise_matches_theoretical_variance() {
    let v = gen_noise(100_000, 1, &[1.0, 0.5], &[1.0, -0.85], 2).unwrap();
    let want: f64 = (1.0 + 0.25 + 2.0 * 0.5 * 0.85) / (1.0 - 0.85 * 0.85);
    assert!((want - 7.5676).abs() < 1e-3);
    assert!((variance(&v, 0) - want).abs() < 0.05 * want);
}

#[test]
fn noise_channels_are_independent() {
    let v = gen_noise(50_000, 2, &[1.0], &[1.0], 3).unwrap();
    let cross = v.column(0).dot(&v.column(1)) / 50_000.0;
    assert!(cross.abs() < 0.02);
}

#[test]
fn snr_scale_closed_form_and_idempotence() {
    let x = gen_noise(5000, 3, &[1.0], &[1.0], 4).unwrap() * 2.0;
    let v = gen_noise(5000, 3, &[1.0], &[1.0], 5).unwrap();
    let (scaled, c) = calibrate_snr(&x, &v, 30.0).unwrap();
    let px: f64 = (0..3).map(|j| variance(&x, j)).sum::<f64>() / 3.0;
    let pv: f64 = (0..3).map(|j| variance(&v, j)).sum::<f64>() / 3.0;
    assert!((c - 10f64.powf(-1.5) * (px / pv).sqrt()).abs() < 1e-14);
    assert!((measured_snr_db(&x, &scaled) - 30.0).abs() < 1e-10);
    let (_, c2) = calibrate_snr(&x, &scaled, 30.0).unwrap();
    assert!((c2 - 1.0).abs() < 1e-12);
}

#[test]
fn benchmark_open_loop_snr_is_on_target() {
    let bench = Benchmark::new(BenchmarkSpec::default()).unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(6);
    let real = bench.simulate(4000, &mut rng).unwrap();
    assert!((measured_snr_db(&real.noise_free, &real.noise) - 30.0).abs() < 0.1);
    let y = real.dataset.y();
    assert!((y - &real.noise_free - &real.noise).amax() < 1e-15);
}

#[test]
fn closed_loop_realization_carries_reference() {
    let bench = Benchmark::new(BenchmarkSpec::closed()).unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(7);
    let real = bench.simulate(500, &mut rng).unwrap();
    assert_eq!(real.dataset.r().unwrap().shape(), (500, 3));
    assert!((measured_snr_db(&real.noise_free, &real.noise) - 30.0).abs() < 1e-9);
}

#[test]
fn noiseless_monte_carlo_recovers_truth() {
    let spec = BenchmarkSpec {
        noise: NoiseSpec::none(),
        ..BenchmarkSpec::default()
    };
    let bench = Benchmark::new(spec).unwrap();
    let mc = McConfig {
        sample_sizes: vec![3000],
        runs: 1,
        seed: 8,
        init_perturbation: 0.025,
        tracked_params: vec![],
    };
    for p in [Pipeline::Unstructured, Pipeline::Structured] {
        let table = run_monte_carlo(&bench, &mc, p).unwrap();
        assert_eq!(table.rows.len(), 6);
        assert!(
            table.rows.iter().all(|r| r.mse < 1e-10),
            "{p:?}: {:?}",
            table.rows
        );
    }
}

#[test]
fn monte_carlo_is_deterministic() {
    let bench = Benchmark::new(BenchmarkSpec::default()).unwrap();
    let mc = McConfig {
        sample_sizes: vec![800, 1200],
        runs: 3,
        seed: 9,
        init_perturbation: 0.025,
        tracked_params: vec![],
    };
    let a = run_monte_carlo(&bench, &mc, Pipeline::Structured).unwrap();
    let b = run_monte_carlo(&bench, &mc, Pipeline::Structured).unwrap();
    assert_eq!(a, b);
    let other = McConfig { seed: 10, ..mc };
    assert_ne!(
        a,
        run_monte_carlo(&bench, &other, Pipeline::Structured).unwrap()
    );
}

#[test]
fn too_many_failures_is_unreliable() {
    let bench = Benchmark::new(BenchmarkSpec::default()).unwrap();
    let mc = McConfig {
        sample_sizes: vec![10],
        runs: 4,
        seed: 1,
        init_perturbation: 0.025,
        tracked_params: vec![],
    };
    assert!(matches!(
        run_monte_carlo(&bench, &mc, Pipeline::Unstructured),
        Err(Error::McUnreliable { .. })
    ));
}

#[test]
fn invalid_configurations_rejected() {
    let bench = Benchmark::new(BenchmarkSpec::default()).unwrap();
    let mut mc = McConfig::desk(1);
    assert!(run_monte_carlo(&bench, &mc, Pipeline::OpenOnClosed).is_err());
    mc.runs = 0;
    assert!(mc.validate().is_err());
    mc.runs = 1;
    mc.sample_sizes = vec![5];
    assert!(mc.validate().is_err());
}

#[test]
fn grids_and_labels() {
    assert_eq!(McConfig::log_grid(1e3, 1e5, 3), vec![1000, 10000, 100000]);
    assert_eq!(McConfig::full(0).sample_sizes.len(), 50);
    let s = build_three_mass(&BenchmarkSpec::default())
        .unwrap()
        .structure();
    assert_eq!(param_label(&s, 12), "a2_2");
    assert_eq!(param_label(&s, 10), "B1_0_33");
    assert_eq!(param_label(&s, 3), "B1_0_21");
}

fn row(method: &str, n: usize, param: &str, mse: f64) -> McRow {
    McRow {
        method: method.into(),
        n,
        param: param.into(),
        mse,
    }
}

#[test]
fn csv_has_header_and_one_line_per_row() {
    let table = McResultTable {
        rows: vec![row("unstructured", 1000, "a1_2", 1.5e-7)],
        stats: vec![],
    };
    let mut buf = Vec::new();
    write_table_csv(&table, &mut buf).unwrap();
    let text = String::from_utf8(buf.clone()).unwrap();
    assert_eq!(text.lines().count(), 2);
    assert_eq!(text.lines().next().unwrap(), "method,N,param,mse");
    assert_eq!(read_table_csv(buf.as_slice()).unwrap().rows, table.rows);
}

#[test]
fn empty_table_is_an_error() {
    let dir = tempfile::tempdir().unwrap();
    let empty = McResultTable::default();
    assert!(matches!(
        emit_results(&empty, OutputFormat::Csv, &dir.path().join("x.csv")),
        Err(Error::EmptyTable)
    ));
    assert!(matches!(render_svg(&empty), Err(Error::EmptyTable)));
}

#[test]
fn svg_has_one_series_per_method_and_parameter() {
    let mut rows = Vec::new();
    for m in ["unstructured", "structured"] {
        for p in ["a1_2", "a2_2", "a3_2", "B1_0_33", "B2_0_33", "B3_0_33"] {
            for (i, n) in [1000, 5623, 31623].into_iter().enumerate() {
                rows.push(row(m, n, p, 1e-6 / (i as f64 + 1.0)));
            }
        }
    }
    let table = McResultTable {
        rows,
        stats: vec![],
    };
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("mse.svg");
    emit_results(&table, OutputFormat::SvgLineplot, &path).unwrap();
    let svg = std::fs::read_to_string(path).unwrap();
    assert!(svg.starts_with("<svg"));
    assert_eq!(svg.matches("<polyline").count(), 12);
}
