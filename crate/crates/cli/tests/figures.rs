//! Figure configs regenerate the committed reference curves and show the
//! expected structure around the barriers.

use std::path::{Path, PathBuf};
use std::process::Command;

const FIGS: [&str; 6] = ["fig1", "fig2", "fig3", "fig3_right", "fig4", "fig4_right"];

fn root() -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("../..")
}

fn generate(name: &str, threads: &str) -> String {
    let out = Command::new(env!("CARGO_BIN_EXE_barrier-repl"))
        .arg("--config")
        .arg(root().join(format!("figures/{name}.toml")))
        .args(["--threads", threads])
        .output()
        .expect("binary runs");
    assert!(out.status.success(), "{name}: {}", String::from_utf8_lossy(&out.stderr));
    String::from_utf8(out.stdout).unwrap()
}

/// `(s0, S, re, im)` rows; `s0` is NaN for single-spot curves.
fn parse(text: &str) -> Vec<(f64, f64, f64, f64)> {
    let mut rd = csv::Reader::from_reader(text.as_bytes());
    let multi = rd.headers().unwrap().len() == 4;
    rd.records()
        .map(|r| {
            let r = r.unwrap();
            let v: Vec<f64> = r.iter().map(|x| x.parse().unwrap()).collect();
            if multi {
                (v[0], v[1], v[2], v[3])
            } else {
                (f64::NAN, v[0], v[1], v[2])
            }
        })
        .collect()
}

#[test]
fn references_regenerate_byte_identically() {
    for name in FIGS {
        let want = std::fs::read_to_string(root().join(format!("figures/reference/{name}.csv"))).unwrap();
        assert_eq!(generate(name, "1"), want, "{name} (1 thread)");
        assert_eq!(generate(name, "3"), want, "{name} (3 threads)");
    }
}

fn reference(name: &str) -> Vec<(f64, f64, f64, f64)> {
    parse(&std::fs::read_to_string(root().join(format!("figures/reference/{name}.csv"))).unwrap())
}

#[test]
fn curves_are_real_finite_and_barrier_free() {
    for name in FIGS {
        let rows = reference(name);
        assert!(rows.len() >= 400, "{name}");
        for &(_, s, re, im) in &rows {
            assert!(re.is_finite(), "{name} at {s}");
            assert!(im.abs() < 1e-12, "{name} imaginary part {im} at {s}");
            assert!(s != 90.0 && s != 110.0, "{name} sampled a barrier");
        }
    }
}

#[test]
fn fig1_changes_sign_once_between_barrier_and_beyond_spot() {
    let rows = reference("fig1");
    let flips: Vec<f64> = rows.windows(2).filter(|w| w[0].2 * w[1].2 < 0.0).map(|w| w[1].1).collect();
    assert_eq!(flips.len(), 1);
    assert!(flips[0] > 90.0 && flips[0] < 130.0, "crossing at {}", flips[0]);
    // positive on the knocked-out side
    assert!(rows.iter().filter(|r| r.1 < 90.0).all(|r| r.2 > 0.0));
}

#[test]
fn fig3_knock_ins_vanish_above_barrier() {
    for name in ["fig3", "fig3_right"] {
        let rows = reference(name);
        assert!(rows.iter().filter(|r| r.1 > 90.0).all(|r| r.2 == 0.0), "{name}");
        assert!(rows.iter().filter(|r| r.1 < 89.0).all(|r| r.2 != 0.0), "{name}");
    }
    // volatility claim positive, Sharpe-ratio claim negative below the barrier
    assert!(reference("fig3").iter().filter(|r| r.1 < 89.0).all(|r| r.2 > 0.0));
    assert!(reference("fig3_right").iter().filter(|r| r.1 < 89.0).all(|r| r.2 < 0.0));
}

#[test]
fn fig4_left_decays_above_barrier_and_grows_with_distance() {
    let rows = reference("fig4");
    let spots = [100.0, 100f64.powf(1.25), 1000.0];
    let mut at_30 = Vec::new();
    for s0 in spots {
        let series: Vec<_> = rows.iter().filter(|r| (r.0 - s0).abs() < 1e-6 * s0).collect();
        assert_eq!(series.len(), 400);
        // smoothing leaves a short tail just above the barrier
        assert!(series.iter().filter(|r| r.1 > 130.0).all(|r| r.2.abs() < 1e-6), "s0={s0}");
        assert!(series.iter().filter(|r| r.1 > 95.0).all(|r| r.2.abs() < 5e-3), "s0={s0}");
        at_30.push(series[0].2);
    }
    assert!(at_30[0] > 0.0 && at_30[1] > at_30[0] && at_30[2] > at_30[1], "{at_30:?}");
}

#[test]
fn fig4_right_has_three_distinct_series() {
    let rows = reference("fig4_right");
    let spots = [80.0, 80f64.powf(2.0 / 3.0), 80f64.powf(1.0 / 3.0)];
    let series: Vec<Vec<f64>> =
        spots.iter().map(|&s0| rows.iter().filter(|r| (r.0 - s0).abs() < 1e-6 * s0).map(|r| r.2).collect()).collect();
    for s in &series {
        assert_eq!(s.len(), 400);
    }
    assert!(series[0].iter().zip(&series[1]).any(|(a, b)| (a - b).abs() > 1e-3));
    assert!(series[1].iter().zip(&series[2]).any(|(a, b)| (a - b).abs() > 1e-3));
}
