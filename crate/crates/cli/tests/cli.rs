use std::path::PathBuf;

use proptest::prelude::*;
use serde_json::Value;

use dense_egyptian_cli::document::{decode_deltas, encode_deltas, CertificateDocument};
use dense_egyptian_cli::run;

fn call(args: &[&str]) -> (i32, String) {
    let mut out = Vec::new();
    let argv = std::iter::once("dense-egyptian").chain(args.iter().copied());
    let code = run(argv, &mut out);
    (code, String::from_utf8(out).unwrap())
}

fn json(s: &str) -> Value {
    serde_json::from_str(s).unwrap_or_else(|e| panic!("not JSON ({e}): {s}"))
}

fn scratch(name: &str) -> PathBuf {
    let dir = std::env::temp_dir().join(format!("dense-egyptian-cli-{}", std::process::id()));
    std::fs::create_dir_all(&dir).unwrap();
    dir.join(name)
}

#[test]
fn rho_and_constants() {
    let (code, out) = call(&["rho", "--u", "2"]);
    assert_eq!(code, 0);
    let v = json(&out)["rho"].as_f64().unwrap();
    assert!((v - (1.0 - std::f64::consts::LN_2)).abs() < 1e-10);

    let (code, out) = call(&["rho", "--c-of-r", "1"]);
    assert_eq!(code, 0);
    let v = json(&out);
    assert!(v["c_of_r"].as_f64().unwrap() < v["upper_bound"].as_f64().unwrap());

    assert_eq!(call(&["rho", "--u", "-1"]).0, 64);
    assert_eq!(call(&["rho"]).0, 64);
}

#[test]
fn expansions() {
    let (code, out) = call(&["expand", "--mode", "greedy", "--r", "4/17"]);
    assert_eq!(code, 0);
    assert_eq!(out.trim(), r#"{"terms":[5,29,1233,3039345]}"#);
    assert_eq!(call(&["expand", "--mode", "greedy", "--r", "5/6"]).1.trim(), r#"{"terms":[2,3]}"#);

    // terms past u64 survive as exact JSON integers
    let (_, out) = call(&["expand", "--mode", "greedy", "--r", "5/121"]);
    let v = json(&out);
    let last = v["terms"].as_array().unwrap().last().unwrap().to_string();
    assert!(last.len() > 20, "{last}");

    let (code, out) = call(&["expand", "--mode", "odd", "--r", "2/15"]);
    assert_eq!(code, 0);
    assert_eq!(json(&out)["terms"], serde_json::json!([9, 45]));
    assert_eq!(call(&["expand", "--mode", "odd", "--r", "1/2"]).0, 5);
}

#[test]
fn sieve_stats_counts() {
    let (code, out) = call(&["sieve-stats", "--x", "30", "--y", "5", "--w", "30"]);
    assert_eq!(code, 0);
    let v = json(&out);
    assert_eq!(v["count_a0"], 2);
    assert_eq!(v["recip_sum"]["exact"].as_str().is_some(), true);
}

#[test]
fn error_exit_codes() {
    let cases: [(&[&str], i32, &str); 5] = [
        (&["construct", "--r", "10", "--x", "1000"], 2, "x"),
        (&["construct", "--r", "1/1048576", "--x", "100000"], 3, "r"),
        (&["construct", "--r", "0", "--x", "1000"], 64, ""),
        (&["construct", "--r", "1/2", "--x", "abc"], 64, ""),
        (&["nonsense"], 64, ""),
    ];
    for (args, want, param) in cases {
        let (code, out) = call(args);
        assert_eq!(code, want, "{args:?}: {out}");
        if !param.is_empty() {
            let v = json(&out);
            assert_eq!(v["error"]["failing_parameter"], param);
            assert!(v["error"]["suggestion"].is_string());
        }
    }
    assert_eq!(call(&["--help"]).0, 0);
}

#[test]
fn construct_verify_round_trip() {
    let path = scratch("half.json");
    let p = path.to_str().unwrap();
    let (code, out) = call(&["construct", "--r", "1/2", "--x", "20000", "--out", p]);
    assert_eq!(code, 0, "{out}");
    assert_eq!(json(&out)["passed"], true);

    let (code, out) = call(&["verify", p]);
    assert_eq!(code, 0, "{out}");
    let v = json(&out);
    assert_eq!(v["matches_document"], true);
    assert_eq!(v["parts_disjoint"], true);

    // Deterministic: same inputs, same bytes.
    let first = std::fs::read_to_string(&path).unwrap();
    let (_, again) = call(&["construct", "--r", "1/2", "--x", "20000"]);
    assert_eq!(first, again);

    let doc = CertificateDocument::decode(&first).unwrap();
    assert_eq!(doc.encode(), first);
    assert_eq!(doc.decode_parts().unwrap().union().unwrap().len(), doc.certificate.size);
    assert_eq!(call(&["construct", "--r", "1/3", "--x", "0"]).0, 64);

    // Drop one denominator from the first non-empty part.
    let mut doc = CertificateDocument::decode(&first).unwrap();
    let part = doc.parts.iter_mut().find(|p| p.count > 1).unwrap();
    part.deltas.pop();
    part.count -= 1;
    let tampered = scratch("tampered.json");
    std::fs::write(&tampered, doc.encode()).unwrap();
    let (code, out) = call(&["verify", tampered.to_str().unwrap()]);
    assert_eq!(code, 1, "{out}");
    assert_eq!(json(&out)["certificate"]["sum_exact"], false);

    // Structural damage is a usage error, not a failed certificate.
    let broken = scratch("broken.json");
    std::fs::write(&broken, "{ not json").unwrap();
    assert_eq!(call(&["verify", broken.to_str().unwrap()]).0, 64);
    assert_eq!(call(&["verify", "/nonexistent/file.json"]).0, 64);
}

#[test]
fn mode_flag_sets_both_stages() {
    let (code, out) = call(&["construct", "--r", "1/3", "--x", "20000", "--mode", "opportunistic"]);
    assert_eq!(code, 0, "{out}");
    let doc = CertificateDocument::decode(&out).unwrap();
    assert_eq!(doc.parameters.stage_one_mode, "opportunistic");
    assert_eq!(doc.parameters.stage_two_mode, "opportunistic");
    assert!(doc.certificate.passed);
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(1000))]

    #[test]
    fn deltas_round_trip(set in prop::collection::btree_set(1u64..u64::MAX / 2, 0..300)) {
        let sorted: Vec<u64> = set.into_iter().collect();
        let mut shuffled = sorted.clone();
        shuffled.reverse();
        prop_assert_eq!(decode_deltas(&encode_deltas(&shuffled)).unwrap(), sorted);
    }
}
