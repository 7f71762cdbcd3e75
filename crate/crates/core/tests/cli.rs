use mch_lab::cli::{dispatch_to, EXIT_NUMERICAL, EXIT_OK, EXIT_USAGE, EXIT_VALIDATION};

fn call(args: &[&str]) -> (i32, String, String) {
    let mut out = Vec::new();
    let mut err = Vec::new();
    let argv = std::iter::once("mch-lab").chain(args.iter().copied());
    let code = dispatch_to(argv, &mut out, &mut err);
    (code, String::from_utf8(out).unwrap(), String::from_utf8(err).unwrap())
}

fn body(text: &str) -> String {
    text.lines().filter(|l| !l.contains("timestamp")).collect::<Vec<_>>().join("\n")
}

#[test]
fn wave_json() {
    let (code, out, _) = call(&["wave", "--k", "0.5", "--L", "18.8495559", "--n", "256"]);
    assert_eq!(code, EXIT_OK);
    let v: serde_json::Value = serde_json::from_str(&out).unwrap();
    assert_eq!(v["command"], "wave");
    assert_eq!(v["valid"], true);
    assert!(v["ode_residual"].as_f64().unwrap() < 1e-8);
    assert!(v["b"].as_f64().unwrap() < 0.0);
    assert_eq!(v["n"], 256);
}

#[test]
fn pi_suffix_matches_decimal() {
    let (_, a, _) = call(&["wave", "--k", "0.5", "--L", "6pi"]);
    let (_, b, _) = call(&["wave", "--k", "0.5", "--L", "18.84955592153876"]);
    let ca: serde_json::Value = serde_json::from_str(&a).unwrap();
    let cb: serde_json::Value = serde_json::from_str(&b).unwrap();
    assert_eq!(ca["c"], cb["c"]);
}

#[test]
fn invalid_wave_reports_discriminant() {
    let (code, out, err) = call(&["wave", "--k", "0.9", "--L", "3.14159"]);
    assert_eq!(code, EXIT_VALIDATION);
    assert!(out.is_empty());
    assert!(err.contains("discriminant"));
}

#[test]
fn usage_errors() {
    assert_eq!(call(&["wave", "--bogus"]).0, EXIT_USAGE);
    assert_eq!(call(&["frobnicate"]).0, EXIT_USAGE);
    assert_eq!(call(&["wave", "--k", "half", "--L", "6pi"]).0, EXIT_USAGE);
    assert_eq!(call(&["--help"]).0, EXIT_OK);
}

#[test]
fn blown_up_run_is_a_numerical_failure() {
    let (code, out, err) = call(&["evolve", "--k", "0.5", "--L", "6pi", "--n", "128", "--dt", "2", "--t-end", "200"]);
    assert_eq!(code, EXIT_NUMERICAL);
    assert!(out.contains("Blowup"));
    assert!(err.contains("blew up"));
}

#[test]
fn scan_writes_artifact_and_summary() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("scan.csv");
    let p = path.to_str().unwrap();
    let args = [
        "scan", "--k-min", "0.01", "--k-max", "0.2", "--L-min", "9.4248", "--L-max", "18.8496", "--nk", "20", "--nL", "20",
        "--out", p,
    ];
    let (code, out, _) = call(&args);
    assert_eq!(code, EXIT_OK);
    let max: f64 = out.trim().strip_prefix("max I = ").unwrap().parse().unwrap();
    assert!(max < 0.0);
    let first = std::fs::read_to_string(&path).unwrap();
    assert!(first.lines().next().unwrap().starts_with('#'));
    let rows: Vec<&str> = first.lines().filter(|l| !l.starts_with('#')).collect();
    assert_eq!(rows[0], "k,L,I,valid,dA_dk,dc_dk,dV_dk,dF_dk");
    assert_eq!(rows.len(), 401);
    let k: f64 = rows[1].split(',').next().unwrap().parse().unwrap();
    assert_eq!(format!("{k:.16e}"), rows[1].split(',').next().unwrap());

    call(&args);
    let second = std::fs::read_to_string(&path).unwrap();
    assert_eq!(body(&first), body(&second));
}

#[test]
fn outputs_are_deterministic() {
    for args in [
        vec!["orbit", "--k", "0.5", "--L", "6pi", "--n", "64", "--t-end", "2", "--seed", "7"],
        vec!["spectrum", "--k", "0.4", "--L", "5pi", "--n", "64"],
        vec!["evolve", "--k", "0.4", "--L", "5pi", "--n", "64", "--t-end", "1", "--format", "json"],
    ] {
        let (c1, a, _) = call(&args);
        let (c2, b, _) = call(&args);
        assert_eq!((c1, c2), (EXIT_OK, EXIT_OK), "{args:?}");
        assert_eq!(body(&a), body(&b), "{args:?}");
    }
}

#[test]
fn spectrum_reports_counts() {
    let (code, out, _) = call(&["spectrum", "--k", "0.5", "--L", "6pi", "--n", "128"]);
    assert_eq!(code, EXIT_OK);
    let v: serde_json::Value = serde_json::from_str(&out).unwrap();
    assert_eq!(v["n_neg"], 1);
    assert_eq!(v["z_dim"], 1);
    assert!(v["kernel_alignment"].as_f64().unwrap().abs() > 0.999999);
}
