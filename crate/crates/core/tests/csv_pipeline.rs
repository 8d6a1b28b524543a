use std::io::Write;

use sobolev_core::estimators::{Quantity, ZnRule};
use sobolev_core::pipeline::{run_estimate, run_test, EstimateRequest, TestRequest};
use sobolev_core::rescale::RescaleMode;
use sobolev_core::samples::read_csv;
use sobolev_core::Error;
use tempfile::NamedTempFile;

fn csv(text: &str) -> NamedTempFile {
    let mut f = NamedTempFile::new().unwrap();
    f.write_all(text.as_bytes()).unwrap();
    f
}

#[test]
fn header_and_blank_lines_are_skipped() {
    let f = csv("x,y\n0.5, 1.0\n\n-1.5,2\n");
    let s = read_csv(f.path()).unwrap();
    assert_eq!(s.dim(), 2);
    assert_eq!(s.len(), 2);
    assert_eq!(s.row(1), &[-1.5, 2.0]);
}

#[test]
fn malformed_files_are_input_errors() {
    for text in ["1\n2\nthree\n", "1,2\n3\n", "1\nNaN\n", "1\ninf\n"] {
        let err = read_csv(csv(text).path()).unwrap_err();
        assert!(err.is_input_error(), "{text:?}: {err}");
        assert!(matches!(err, Error::Csv { .. }), "{text:?}: {err}");
    }
    assert!(read_csv("/nonexistent/sobolev.csv")
        .unwrap_err()
        .is_input_error());
}

#[test]
fn files_feed_the_pipeline() {
    let a: String = (0..300)
        .map(|i| format!("{},{}\n", (i as f64 * 0.3).sin(), (i as f64 * 0.7).cos()))
        .collect();
    let b: String = (0..300)
        .map(|i| {
            format!(
                "{},{}\n",
                (i as f64 * 0.3).sin() + 0.4,
                (i as f64 * 0.7).cos()
            )
        })
        .collect();
    let x = read_csv(csv(&a).path()).unwrap();
    let y = read_csv(csv(&b).path()).unwrap();
    let req = EstimateRequest {
        quantity: Quantity::SquaredDistance,
        order: 0.0,
        zn_rule: ZnRule::Manual { zn: 3 },
        rescale: RescaleMode::FixedBox {
            lo: vec![-2.0, -2.0],
            hi: vec![2.0, 2.0],
        },
        ci_level: None,
        seed: 0,
    };
    let d = run_estimate(&req, &x, Some(&y)).unwrap();
    assert_eq!(d.dim, 2);
    assert_eq!(d.n, vec![300, 300]);
    assert!(d.value > 0.0);
    let t = run_test(
        &TestRequest::new(0.0, ZnRule::Manual { zn: 2 }, 0.05),
        &x,
        &y,
    )
    .unwrap();
    assert_eq!(t.report.dof, 24);
}

#[test]
fn box_of_the_wrong_dimension_is_rejected() {
    let x = read_csv(csv("0,1\n1,0\n").path()).unwrap();
    let req = EstimateRequest {
        quantity: Quantity::SquaredNorm,
        order: 0.0,
        zn_rule: ZnRule::Manual { zn: 1 },
        rescale: RescaleMode::FixedBox {
            lo: vec![-1.0],
            hi: vec![1.0],
        },
        ci_level: None,
        seed: 0,
    };
    assert!(run_estimate(&req, &x, None).is_err());
}
