use std::fs;
use std::path::Path;
use std::process::{Command, Output};

use proptest::prelude::*;

use vgcritic::config::{preset, preset_names, Scenario};
use vgcritic::run::{read_key_values, TELEMETRY_FILE};
use vgcritic::telemetry::read_telemetry;

fn cli(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_vgcritic"))
        .args(args)
        .output()
        .expect("binary runs")
}

fn stderr(o: &Output) -> String {
    String::from_utf8_lossy(&o.stderr).into_owned()
}

fn value(path: &Path, key: &str) -> String {
    read_key_values(path)
        .unwrap()
        .into_iter()
        .find(|(k, _)| k == key)
        .unwrap_or_else(|| panic!("{key} missing from {}", path.display()))
        .1
}

fn write_cfg(dir: &Path, name: &str, sc: &Scenario) -> String {
    let p = dir.join(name);
    fs::write(&p, sc.to_config_string()).unwrap();
    p.to_str().unwrap().to_string()
}

#[test]
fn presets_round_trip() {
    for name in preset_names() {
        let sc = preset(name).unwrap();
        let text = sc.to_config_string();
        let back = Scenario::parse(&text).unwrap();
        assert_eq!(back, sc);
        assert_eq!(back.to_config_string(), text);
    }
}

fn finite() -> impl Strategy<Value = f64> {
    prop_oneof![
        -1e6..1e6f64,
        (-300i32..300, 1.0..10.0f64).prop_map(|(e, m)| m * 10f64.powi(e)),
        Just(0.1 + 0.2),
        Just(f64::MIN_POSITIVE),
    ]
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(200))]

    #[test]
    fn parsed_scenarios_round_trip(
        alpha in finite(),
        k1 in prop::collection::vec(finite(), 10),
        x0 in prop::collection::vec(finite(), 2),
        dt in finite(),
        seed in any::<u64>(),
        stride in 1usize..1000,
        dither in any::<bool>(),
    ) {
        let mut sc = preset("um18-constant").unwrap();
        sc.params.alpha = alpha;
        sc.params.k1_gains = k1;
        sc.sim.x0 = x0;
        sc.sim.dt = dt;
        sc.sim.seed = seed;
        sc.sim.record_stride = stride;
        sc.sim.dither_on = dither;
        let back = Scenario::parse(&sc.to_config_string()).unwrap();
        prop_assert_eq!(back, sc);
    }
}

#[test]
fn run_writes_csv_summary_and_bounds() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("run");
    let o = cli(&[
        "run",
        "um9-variable",
        "--out",
        out.to_str().unwrap(),
        "--t-end",
        "3",
        "--seed",
        "7",
    ]);
    assert!(o.status.success(), "{}", stderr(&o));

    let csv = fs::read_to_string(out.join(TELEMETRY_FILE)).unwrap();
    let header = csv.lines().next().unwrap();
    assert_eq!(
        header,
        "t,z1,z2,z3,z4,u1,W1,W2,W3,W4,W5,W6,W7,W8,W9,W10,e_hjb,g1,xi,sigma,V_hat"
    );
    assert_eq!(csv.lines().count(), 1 + 3001);

    let summary = out.join("summary.txt");
    for key in [
        "convergence_time_s",
        "steady_state_rms",
        "max_abs_u",
        "lambda_min_M",
        "pd_ok",
        "gamma_factor",
    ] {
        value(&summary, key);
    }
    assert!(fs::read_to_string(&summary)
        .unwrap()
        .contains("\n[bounds]\n"));

    // the summary agrees with metrics recomputed from the CSV
    let records = read_telemetry(&out.join(TELEMETRY_FILE)).unwrap();
    let sc = Scenario::parse(&fs::read_to_string(out.join("scenario.cfg")).unwrap()).unwrap();
    assert_eq!((sc.sim.t_end, sc.sim.seed), (3.0, 7));
    let m = vgcritic::Metrics::from_records(&records, &sc.sim);
    assert_eq!(
        value(&summary, "steady_state_rms"),
        format!("{}", m.steady_state_rms)
    );
    assert_eq!(value(&summary, "max_abs_u"), format!("{}", m.max_abs_u));
    assert!(m.max_abs_u <= 9.0);
}

#[test]
fn identical_compare_gives_unit_ratios() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("cmp");
    let o = cli(&[
        "compare",
        "um18-variable",
        "um18-variable",
        "--out",
        out.to_str().unwrap(),
        "--t-end",
        "60",
    ]);
    assert!(o.status.success(), "{}", stderr(&o));
    let report = out.join("comparison.txt");
    assert_eq!(value(&report, "ratio.steady_state_rms"), "1");
    assert_eq!(value(&report, "ratio.max_abs_u"), "1");
    let a = fs::read(out.join("a").join(TELEMETRY_FILE)).unwrap();
    let b = fs::read(out.join("b").join(TELEMETRY_FILE)).unwrap();
    assert_eq!(a, b);
}

#[test]
fn compare_ratios_come_from_the_csvs() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("cmp");
    let o = cli(&[
        "compare",
        "um9-variable",
        "um9-constant",
        "--out",
        out.to_str().unwrap(),
        "--t-end",
        "20",
    ]);
    assert!(o.status.success(), "{}", stderr(&o));
    let sim = preset("um9-variable").unwrap().sim;
    let ma = vgcritic::Metrics::from_records(
        &read_telemetry(&out.join("a").join(TELEMETRY_FILE)).unwrap(),
        &sim,
    );
    let mb = vgcritic::Metrics::from_records(
        &read_telemetry(&out.join("b").join(TELEMETRY_FILE)).unwrap(),
        &sim,
    );
    let report = out.join("comparison.txt");
    assert_eq!(
        value(&report, "ratio.steady_state_rms"),
        format!("{}", ma.steady_state_rms / mb.steady_state_rms)
    );
    assert_eq!(value(&report, "a.max_abs_u"), format!("{}", ma.max_abs_u));
    assert_eq!(value(&report, "b.convergence_time_s"), "none");
}

#[test]
fn compare_rejects_mismatched_shared_fields() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("x");
    let o = cli(&[
        "compare",
        "um9-variable",
        "um18-constant",
        "--out",
        out.to_str().unwrap(),
    ]);
    assert_eq!(o.status.code(), Some(2));
    assert!(stderr(&o).contains("u_max"), "{}", stderr(&o));

    let a = preset("um9-variable").unwrap();
    let mut b = preset("um9-constant").unwrap();
    b.sim.seed = 3;
    let (pa, pb) = (
        write_cfg(dir.path(), "a.cfg", &a),
        write_cfg(dir.path(), "b.cfg", &b),
    );
    let o = cli(&["compare", &pa, &pb, "--out", out.to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(2));
    assert!(stderr(&o).contains("seed"));
    b.sim.seed = 0;
    b.sim.x0 = vec![1.0, 1.0];
    let pb = write_cfg(dir.path(), "b.cfg", &b);
    let o = cli(&["compare", &pa, &pb, "--out", out.to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(2));
    assert!(stderr(&o).contains("[sim]"));
    assert!(!out.exists());
}

#[test]
fn invalid_configs_name_the_field() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("x");
    let mut sc = preset("um9-variable").unwrap();
    sc.params.k2_gains.as_mut_slice()[3] = 0.2;
    let p = write_cfg(dir.path(), "k2.cfg", &sc);
    let o = cli(&["run", &p, "--out", out.to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(2));
    let msg = stderr(&o);
    assert!(
        msg.contains("[law]") && msg.contains("symmetric") && msg.contains("M = [[1"),
        "{msg}"
    );

    let text = preset("um9-variable")
        .unwrap()
        .to_config_string()
        .replace("u_max = 9", "u_max = -9");
    let p = dir.path().join("um.cfg");
    fs::write(&p, text).unwrap();
    let o = cli(&["run", p.to_str().unwrap(), "--out", out.to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(2));
    assert!(stderr(&o).contains("[law]"), "{}", stderr(&o));

    let o = cli(&[
        "run",
        "um9-variable",
        "--out",
        out.to_str().unwrap(),
        "--dt=-1",
    ]);
    assert_eq!(o.status.code(), Some(2));
    assert!(stderr(&o).contains("[sim]") && stderr(&o).contains("dt"));
    assert!(!out.exists());
}

#[test]
fn divergence_keeps_partial_telemetry() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("div");
    // dt far beyond the stability limit of the learning dynamics
    let o = cli(&[
        "run",
        "um9-variable",
        "--out",
        out.to_str().unwrap(),
        "--dt",
        "0.05",
        "--t-end",
        "50",
    ]);
    assert_eq!(o.status.code(), Some(1));
    assert!(stderr(&o).contains("diverged"));
    let records = read_telemetry(&out.join(TELEMETRY_FILE)).unwrap();
    assert!(!records.is_empty() && records.len() < 1000);
    assert_eq!(value(&out.join("summary.txt"), "status"), "diverged");
}

#[test]
fn preset_command_prints_parsable_text() {
    let o = cli(&["preset", "um18-variable"]);
    assert!(o.status.success());
    let sc = Scenario::parse(&String::from_utf8(o.stdout).unwrap()).unwrap();
    assert_eq!(sc, preset("um18-variable").unwrap());
    let o = cli(&["preset", "nope"]);
    assert_eq!(o.status.code(), Some(2));
}
