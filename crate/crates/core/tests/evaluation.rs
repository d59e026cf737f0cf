use fanerv::evaluation::*;
use proptest::prelude::*;

const REF: [(f64, f64); 4] = [(0.05, 30.1), (0.1, 32.4), (0.2, 34.9), (0.4, 37.0)];
const TEST: [(f64, f64); 4] = [(0.045, 30.5), (0.085, 32.6), (0.17, 35.3), (0.36, 37.6)];

fn curve(name: &str, metric: Metric, pts: &[(f64, f64)]) -> RDCurve {
    RDCurve::from_pairs(name, metric, pts).unwrap()
}

fn scaled(pts: &[(f64, f64)], k: f64) -> Vec<(f64, f64)> {
    pts.iter().map(|&(b, q)| (b * k, q)).collect()
}

#[test]
fn closed_forms() {
    let r = curve("ref", Metric::Psnr, &REF);
    assert_eq!(bd_rate(&r, &r).unwrap().abs(), 0.0);
    let half = curve("half", Metric::Psnr, &scaled(&REF, 0.5));
    assert!((bd_rate(&r, &half).unwrap() + 50.0).abs() < 0.01);
    let double = curve("double", Metric::Psnr, &scaled(&REF, 2.0));
    assert!((bd_rate(&r, &double).unwrap() - 100.0).abs() < 0.01);
}

#[test]
fn matches_numpy_polyfit_reference() {
    // Frozen from the classic polyfit/polyint formulation in numpy.
    let r = curve("ref", Metric::Psnr, &REF);
    let t = curve("test", Metric::Psnr, &TEST);
    assert!((bd_rate(&r, &t).unwrap() - -22.371282755520106).abs() < 1e-8);

    let rm: Vec<(f64, f64)> = REF.iter().zip([0.90, 0.94, 0.965, 0.98]).map(|(p, q)| (p.0, q)).collect();
    let tm: Vec<(f64, f64)> = TEST.iter().zip([0.91, 0.945, 0.968, 0.982]).map(|(p, q)| (p.0, q)).collect();
    let v = bd_rate(&curve("ref", Metric::MsSsim, &rm), &curve("test", Metric::MsSsim, &tm)).unwrap();
    assert!((v - -23.38618930559403).abs() < 1e-8, "{v}");

    let r6 = [(0.03, 28.0), (0.06, 30.3), (0.12, 32.9), (0.25, 35.1), (0.5, 37.6), (1.0, 39.2)];
    let t6 = [(0.035, 28.6), (0.065, 30.7), (0.11, 32.8), (0.22, 35.6), (0.41, 37.9), (0.9, 39.9)];
    let v = bd_rate(&curve("a", Metric::Psnr, &r6), &curve("b", Metric::Psnr, &t6)).unwrap();
    assert!((v - -15.257777027179564).abs() < 1e-8, "{v}");
}

#[test]
fn swapping_curves_flips_the_sign() {
    let r = curve("ref", Metric::Psnr, &REF);
    let t = curve("test", Metric::Psnr, &TEST);
    let a = bd_rate(&r, &t).unwrap();
    let b = bd_rate(&t, &r).unwrap();
    assert!(a < 0.0 && b > 0.0);
}

#[test]
fn precondition_errors() {
    let r = curve("ref", Metric::Psnr, &REF);
    let far: Vec<(f64, f64)> = REF.iter().map(|&(b, q)| (b, q + 6.85)).collect();
    assert!(matches!(
        bd_rate(&r, &curve("far", Metric::Psnr, &far)),
        Err(fanerv::Error::DisjointRange { .. })
    ));
    let m = RDCurve::from_pairs("m", Metric::MsSsim, &[(0.1, 0.9), (0.2, 0.92), (0.3, 0.95), (0.4, 0.97)]).unwrap();
    assert!(bd_rate(&r, &m).is_err());
    assert!(matches!(
        RDCurve::from_pairs("short", Metric::Psnr, &REF[..3]),
        Err(fanerv::Error::TooFewPoints { found: 3, .. })
    ));
    assert!(RDPoint::new("x", Metric::Psnr, 0.0, 30.0).is_err());
    assert!(RDPoint::new("x", Metric::Psnr, 0.1, f64::INFINITY).is_err());
    assert!(RDPoint::new("x", Metric::MsSsim, 0.1, 1.2).is_err());
    assert!(RDPoint::new("x", Metric::MsSsim, 0.1, 1.0).is_ok());
}

fn write(dir: &std::path::Path, name: &str, body: &str) -> std::path::PathBuf {
    let p = dir.join(name);
    std::fs::write(&p, body).unwrap();
    p
}

#[test]
fn ingest_examples() {
    let dir = tempfile::tempdir().unwrap();
    let ok = write(
        dir.path(),
        "ok.csv",
        "codec,metric,bpp,quality\nhm,psnr,0.1,31\nhm,psnr,0.2,33\nhm,psnr,0.4,35\nhm,psnr,0.8,37\n",
    );
    let curves = ingest_external_rd(&ok).unwrap();
    assert_eq!(curves.len(), 1);
    assert_eq!(curves[0].points.len(), 4);
    assert_eq!(curves[0].codec, "hm");

    let shuffled = write(
        dir.path(),
        "shuffled.csv",
        "codec,metric,bpp,quality\nhm,psnr,0.4,35\nhm,psnr,0.1,31\nhm,psnr,0.8,37\nhm,psnr,0.2,33\n",
    );
    assert_eq!(ingest_external_rd(&shuffled).unwrap(), curves);

    let bad = write(
        dir.path(),
        "bad.csv",
        "codec,metric,bpp,quality\nvtm,psnr,0.1,31\nvtm,psnr,0.2,30\nvtm,psnr,0.4,35\nvtm,psnr,0.8,37\n",
    );
    match ingest_external_rd(&bad) {
        Err(e @ fanerv::Error::NonMonotone { .. }) => assert!(e.to_string().contains("vtm")),
        other => panic!("{other:?}"),
    }

    let malformed = write(dir.path(), "m.csv", "codec,metric,bpp,quality\nhm,psnr,abc,31\n");
    assert!(matches!(
        ingest_external_rd(&malformed),
        Err(fanerv::Error::MalformedRow { row: 2, .. })
    ));
    let wrong_header = write(dir.path(), "h.csv", "name,metric,bpp,quality\n");
    assert!(ingest_external_rd(&wrong_header).is_err());
    assert!(matches!(
        ingest_external_rd(&dir.path().join("absent.csv")),
        Err(fanerv::Error::MissingPath(_))
    ));
}

#[test]
fn export_round_trips_and_keys_bd_entries() {
    let dir = tempfile::tempdir().unwrap();
    let r = curve("hm", Metric::Psnr, &REF);
    let t = curve("fanerv", Metric::Psnr, &[(0.0451, 30.51), (0.0853, 32.617), (0.1703, 35.3), (0.36, 37.6)]);
    let mut table = BdTable::new();
    let v = bd_rate(&r, &t).unwrap();
    table.insert(bd_key("fanerv", "hm", Metric::Psnr), v);
    let files = export_results(&[t.clone(), r.clone()], &table, dir.path()).unwrap();
    let back = ingest_external_rd(&files.rd_curves).unwrap();
    assert_eq!(back, vec![t, r]);
    let json: serde_json::Value = serde_json::from_slice(&std::fs::read(&files.bd_rates).unwrap()).unwrap();
    let obj = json.as_object().unwrap();
    assert_eq!(obj.len(), 1);
    assert_eq!(obj["fanerv_vs_hm_psnr"].as_f64().unwrap(), v);

    let empty = tempfile::tempdir().unwrap();
    let files = export_results(&[], &BdTable::new(), empty.path()).unwrap();
    let text = std::fs::read_to_string(&files.bd_rates).unwrap();
    assert_eq!(text.trim(), "{}");
    assert_eq!(ingest_external_rd(&files.rd_curves).unwrap(), vec![]);
}

proptest! {
    #[test]
    fn rescaling_both_curves_leaves_bd_rate_unchanged(k in 0.01f64..100.0, shift in -0.4f64..0.4) {
        let t: Vec<(f64, f64)> = TEST.iter().map(|&(b, q)| (b, q + shift)).collect();
        let r = curve("ref", Metric::Psnr, &REF);
        let tc = curve("test", Metric::Psnr, &t);
        let base = bd_rate(&r, &tc).unwrap();
        let rk = curve("ref", Metric::Psnr, &scaled(&REF, k));
        let tk = curve("test", Metric::Psnr, &scaled(&t, k));
        prop_assert!((bd_rate(&rk, &tk).unwrap() - base).abs() < 1e-9);
    }

    #[test]
    fn uniform_rate_scaling_has_closed_form(k in 0.1f64..10.0) {
        let r = curve("ref", Metric::Psnr, &REF);
        let t = curve("t", Metric::Psnr, &scaled(&REF, k));
        prop_assert!((bd_rate(&r, &t).unwrap() - (k - 1.0) * 100.0).abs() < 1e-6);
    }
}
