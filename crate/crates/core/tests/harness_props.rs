use num_complex::Complex64;
use proptest::prelude::*;

use semitrace::harness::{
    load_report_csv, quadratic_spectrum, sweep, torus_spectrum, Config, ReportRow, SpectralDensityReport, SweepOptions,
    TestFunctionPair, Window, DEFAULT_COUNT_CAP,
};

fn brute_quadratic(w: &[f64], h: f64, window: (f64, f64)) -> Vec<f64> {
    let mut out = Vec::new();
    let mut stack = vec![(0usize, 0.0f64)];
    while let Some((depth, partial)) = stack.pop() {
        if depth == w.len() {
            if partial >= window.0 && partial <= window.1 {
                out.push(partial);
            }
            continue;
        }
        let mut k = 0;
        loop {
            let value = partial + h * w[depth] * (k as f64 + 0.5);
            if value > window.1 + 1e-12 {
                break;
            }
            stack.push((depth + 1, value));
            k += 1;
        }
    }
    out.sort_by(f64::total_cmp);
    out
}

fn brute_torus(n: usize, h: f64, window: (f64, f64)) -> usize {
    let reach = ((2.0 * window.1).sqrt() / h).ceil() as i64 + 1;
    let mut count = 0;
    let mut index = vec![-reach; n];
    loop {
        let value: f64 = index.iter().map(|&k| (h * k as f64).powi(2)).sum::<f64>() / 2.0;
        if value >= window.0 && value <= window.1 {
            count += 1;
        }
        let mut d = 0;
        while d < n {
            index[d] += 1;
            if index[d] <= reach {
                break;
            }
            index[d] = -reach;
            d += 1;
        }
        if d == n {
            return count;
        }
    }
}

fn row() -> impl Strategy<Value = ReportRow> {
    (1e-5f64..1.0, -1e3f64..1e3, -1e3f64..1e3, -1e3f64..1e3, -1e3f64..1e3, 0usize..1_000_000, prop::option::of(0.0f64..1e5))
        .prop_map(|(h, qr, qi, sr, si, n, wall)| ReportRow::new(h, Complex64::new(qr, qi), Complex64::new(sr, si), n, wall))
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn csv_round_trip(mut rows in prop::collection::vec(row(), 1..8)) {
        rows.sort_by(|a, b| b.h.total_cmp(&a.h));
        rows.dedup_by(|a, b| a.h == b.h);
        let report = SpectralDensityReport { calibration_h: rows[rows.len() - 1].h, rows: rows.clone(), phases: Default::default(), components: Vec::new() };
        let parsed = load_report_csv(&report.to_csv()).unwrap();
        prop_assert_eq!(parsed, rows);
    }

    #[test]
    fn quadratic_spectrum_is_complete(w in prop::collection::vec(0.5f64..2.0, 1..=3), h in 0.05f64..0.3, lo in 0.0f64..2.0, width in 0.1f64..1.5) {
        let window = (lo, lo + width);
        let s = quadratic_spectrum(&w, h, window, DEFAULT_COUNT_CAP).unwrap();
        let expected = brute_quadratic(&w, h, window);
        prop_assert_eq!(s.len(), expected.len());
        for (a, b) in s.eigenvalues.iter().zip(&expected) {
            prop_assert!((a - b).abs() <= 1e-12);
        }
    }

    #[test]
    fn torus_spectrum_is_complete(n in 1usize..=3, h in 0.1f64..0.5, lo in 0.0f64..1.0, width in 0.1f64..1.0) {
        let window = (lo, lo + width);
        let s = torus_spectrum(n, h, window, &[], DEFAULT_COUNT_CAP).unwrap();
        prop_assert_eq!(s.len(), brute_torus(n, h, window));
    }

    #[test]
    fn counts_follow_weyl_scaling(w in prop::collection::vec(0.5f64..2.0, 1..=3), h in 0.02f64..0.1) {
        let n = w.len() as i32;
        let window = (0.0, 2.0);
        let coarse = quadratic_spectrum(&w, h, window, DEFAULT_COUNT_CAP).unwrap().len() as f64;
        let fine = quadratic_spectrum(&w, h / 2.0, window, DEFAULT_COUNT_CAP).unwrap().len() as f64;
        prop_assume!(coarse >= 10.0);
        let ratio = fine / coarse;
        let expected = 2f64.powi(n);
        prop_assert!(ratio >= expected / 2.0 && ratio <= expected * 2.0, "ratio {ratio}");
    }

    #[test]
    fn torus_spectrum_scales_with_h(n in 1usize..=3, h in 0.1f64..0.4) {
        let small = torus_spectrum(n, h, (0.0, 1.0), &[], DEFAULT_COUNT_CAP).unwrap();
        let large = torus_spectrum(n, 2.0 * h, (0.0, 4.0), &[], DEFAULT_COUNT_CAP).unwrap();
        prop_assert_eq!(small.len(), large.len());
        for (a, b) in small.eigenvalues.iter().zip(&large.eigenvalues) {
            prop_assert!((4.0 * a - b).abs() <= 1e-12 * b.max(1.0));
        }
    }

    #[test]
    fn windows_satisfy_the_fourier_convention(center in -10.0f64..10.0, halfwidth in 0.2f64..3.0, bump in any::<bool>()) {
        let window = if bump { Window::Bump { center, halfwidth } } else { Window::Triangle { center, halfwidth } };
        let pair = TestFunctionPair::new(window).unwrap();
        prop_assert!(pair.validate_convention().is_ok());
        prop_assert!(pair.fhat(center + halfwidth * 1.01) == 0.0);
        prop_assert!(pair.fhat(center) > 0.0);
    }
}

#[test]
fn sweep_is_reproducible() {
    let config = Config::from_json(
        r#"{"system": {"type": "quadratic", "w": [1.0, 2.0]}, "E": 1.0, "epsilon": 0.5, "hs": [0.02, 0.01],
            "fhat": {"type": "triangle", "center": 6.283185307179586, "halfwidth": 0.5}}"#,
    )
    .unwrap();
    let a = sweep(&config, &SweepOptions::default()).unwrap();
    let b = sweep(&config, &SweepOptions::default()).unwrap();
    assert_eq!(a.to_csv(), b.to_csv());
    assert_eq!(a.components_json().unwrap(), b.components_json().unwrap());
}
