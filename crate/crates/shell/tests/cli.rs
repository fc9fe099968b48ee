use std::fs;
use std::path::Path;
use std::process::Command;

use vesicle_core::SystemState;
use vesicle_shell::commands;
use vesicle_shell::config::RunConfig;
use vesicle_shell::csv::parse;
use vesicle_shell::snapshot;

const SMALL: &str = r#"
[domain]
modes = 6
[alpha]
alpha = 0.5
nu = 0.2
[energy]
gamma = 0.1
[noise]
zeta_a = 0.2
zeta_b = 0.2
seed = 5
[stepper]
dt = 1e-4
t_final = 0.004
[initial]
preset = "random"
seed = 9
amplitude = 0.2
"#;

fn vesicle(args: &[&str]) -> (i32, String, String) {
    let out = Command::new(env!("CARGO_BIN_EXE_vesicle"))
        .args(args)
        .output()
        .expect("binary runs");
    (
        out.status.code().unwrap_or(-1),
        String::from_utf8_lossy(&out.stdout).into_owned(),
        String::from_utf8_lossy(&out.stderr).into_owned(),
    )
}

fn write_config(dir: &Path, name: &str, text: &str) -> String {
    let p = dir.join(name);
    fs::write(&p, text).unwrap();
    p.to_str().unwrap().to_string()
}

fn path(p: &Path) -> &str {
    p.to_str().unwrap()
}

#[test]
fn equilibrium_without_noise_writes_a_ledger_of_zeros() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = write_config(
        tmp.path(),
        "eq.toml",
        "[domain]\nmodes = 6\n[stepper]\ndt = 1e-3\nt_final = 0.1\n[initial]\npreset = \"equilibrium\"\n",
    );
    let out = tmp.path().join("out");
    let (code, _, err) = vesicle(&["run", "--config", &cfg, "--out", path(&out)]);
    assert_eq!(code, 0, "{err}");
    let rows = parse(&fs::read_to_string(out.join("ledger.csv")).unwrap()).unwrap();
    assert_eq!(rows.len(), 100);
    for r in rows {
        assert!(r[1..].iter().all(|&x| x == 0.0), "{r:?}");
    }
}

#[test]
fn exit_codes_distinguish_failures() {
    let tmp = tempfile::tempdir().unwrap();
    let out = tmp.path().join("out");
    let rough = write_config(tmp.path(), "rough.toml", &SMALL.replace("zeta_b = 0.2", "zeta_b = 0.2\np_b = 1.0"));
    assert_eq!(vesicle(&["run", "--config", &rough, "--out", path(&out)]).0, 4);
    assert_eq!(
        vesicle(&["run", "--config", &rough, "--out", path(&out), "--override-hypothesis"]).0,
        0
    );
    let broken = write_config(tmp.path(), "broken.toml", "[domain]\nmodes = 6\n");
    assert_eq!(vesicle(&["run", "--config", &broken]).0, 2);
    let unknown = write_config(tmp.path(), "unknown.toml", &format!("{SMALL}\n[extra]\nx = 1\n"));
    assert_eq!(vesicle(&["run", "--config", &unknown]).0, 2);
    let stiff = write_config(
        tmp.path(),
        "stiff.toml",
        &SMALL.replace("[stepper]", "[stepper]\nscheme = \"explicit_em\"").replace("dt = 1e-4", "dt = 1e-2").replace("t_final = 0.004", "t_final = 0.1"),
    );
    assert_eq!(vesicle(&["run", "--config", &stiff]).0, 2);
    let blow = write_config(
        tmp.path(),
        "blow.toml",
        &SMALL.replace("[stepper]", "[stepper]\nf_max = 1e-9"),
    );
    let (code, _, _) = vesicle(&["run", "--config", &blow, "--out", path(&out.join("b"))]);
    assert_eq!(code, 3);
    let last = snapshot::read(&out.join("b").join("blowup.vsfl")).unwrap();
    assert!(last.is_finite());
}

#[test]
fn runs_and_manifest_replays_are_byte_identical() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = write_config(tmp.path(), "small.toml", &SMALL.replace("[stepper]", "[output]\nsnapshot_every = 10\nledger_every = 3\n[stepper]"));
    let (a, b, c) = (tmp.path().join("a"), tmp.path().join("b"), tmp.path().join("c"));
    assert_eq!(vesicle(&["run", "--config", &cfg, "--out", path(&a)]).0, 0);
    assert_eq!(vesicle(&["run", "--config", &cfg, "--out", path(&b)]).0, 0);
    let manifest = a.join("manifest.toml");
    assert_eq!(vesicle(&["run", "--config", path(&manifest), "--out", path(&c)]).0, 0);
    for other in [&b, &c] {
        assert_eq!(fs::read(a.join("ledger.csv")).unwrap(), fs::read(other.join("ledger.csv")).unwrap());
        assert_eq!(fs::read(a.join("final.vsfl")).unwrap(), fs::read(other.join("final.vsfl")).unwrap());
        for snap in fs::read_dir(a.join("snapshots")).unwrap() {
            let name = snap.unwrap().file_name();
            assert_eq!(
                fs::read(a.join("snapshots").join(&name)).unwrap(),
                fs::read(other.join("snapshots").join(&name)).unwrap()
            );
        }
    }
    // 40 steps in windows of 3, the last one short
    let rows = parse(&fs::read_to_string(a.join("ledger.csv")).unwrap()).unwrap();
    assert_eq!(rows.len(), 14);
    assert_eq!(fs::read_dir(a.join("snapshots")).unwrap().count(), 5);
    let m = RunConfig::load(&manifest).unwrap();
    assert!(m.energy.a.is_some() && m.energy.b.is_some());
    assert_eq!(m.provenance.unwrap().seed, 5);
}

#[test]
fn seed_flag_changes_the_noise() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = write_config(tmp.path(), "small.toml", SMALL);
    let (a, b) = (tmp.path().join("a"), tmp.path().join("b"));
    vesicle(&["run", "--config", &cfg, "--out", path(&a)]);
    vesicle(&["run", "--config", &cfg, "--out", path(&b), "--seed", "6"]);
    assert_ne!(fs::read(a.join("ledger.csv")).unwrap(), fs::read(b.join("ledger.csv")).unwrap());
}

#[test]
fn restarting_from_a_snapshot_continues_the_same_path() {
    let tmp = tempfile::tempdir().unwrap();
    let fixed = SMALL.replace("gamma = 0.1", "gamma = 0.1\na = -8.0\nb = 2.0");
    let whole = write_config(tmp.path(), "whole.toml", &fixed.replace("t_final = 0.004", "t_final = 0.008"));
    let first = write_config(tmp.path(), "first.toml", &fixed);
    let (w, f, s) = (tmp.path().join("w"), tmp.path().join("f"), tmp.path().join("s"));
    assert_eq!(vesicle(&["run", "--config", &whole, "--out", path(&w)]).0, 0);
    assert_eq!(vesicle(&["run", "--config", &first, "--out", path(&f)]).0, 0);
    let second = write_config(
        tmp.path(),
        "second.toml",
        &format!(
            "{}\n[initial]\npreset = \"from_snapshot\"\npath = \"f/final.vsfl\"\n",
            fixed.split("[initial]").next().unwrap()
        ),
    );
    let (code, _, err) = vesicle(&["run", "--config", &second, "--out", path(&s)]);
    assert_eq!(code, 0, "{err}");
    assert_eq!(fs::read(w.join("final.vsfl")).unwrap(), fs::read(s.join("final.vsfl")).unwrap());
}

#[test]
fn snapshots_round_trip_and_reject_bad_headers() {
    let state = SystemState {
        v: (0..16).map(|i| (i as f64).sin() * 1e-300).collect(),
        phi: (0..16).map(|i| f64::from_bits(0x3ff0_0000_0000_0000 + i)).collect(),
        t: 0.123456789,
        step: u64::MAX - 3,
    };
    let bytes = snapshot::to_bytes(&state);
    assert_eq!(bytes.len(), snapshot::HEADER_LEN + 16 * 16);
    assert_eq!(&bytes[..4], b"VSFL");
    assert_eq!(snapshot::from_bytes(&bytes).unwrap(), state);

    let mut wrong = bytes.clone();
    wrong[4] = 9;
    assert!(snapshot::from_bytes(&wrong).unwrap_err().contains("version"));
    let mut magic = bytes.clone();
    magic[0] = b'X';
    assert!(snapshot::from_bytes(&magic).is_err());
    assert!(snapshot::from_bytes(&bytes[..bytes.len() - 1]).is_err());

    // lowest modes come first
    let first = f64::from_le_bytes(bytes[snapshot::HEADER_LEN..snapshot::HEADER_LEN + 8].try_into().unwrap());
    assert_eq!(first, state.v[0]);
    let big = snapshot::embed(&state, 6).unwrap();
    assert_eq!(big.v[6 + 1], state.v[4 + 1]);
    assert!(snapshot::embed(&big, 4).is_err());
}

#[test]
fn ensembles_are_thread_count_invariant() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = write_config(tmp.path(), "small.toml", SMALL);
    let (a, b) = (tmp.path().join("a"), tmp.path().join("b"));
    let (code, stdout, _) = vesicle(&["ensemble", "--config", &cfg, "--out", path(&a), "--trajectories", "8", "--threads", "1"]);
    assert_eq!(code, 0);
    assert!(stdout.contains("R = 8"));
    assert_eq!(vesicle(&["ensemble", "--config", &cfg, "--out", path(&b), "--trajectories", "8", "--threads", "8"]).0, 0);
    for f in ["moments.csv", "summary.toml"] {
        assert_eq!(fs::read(a.join(f)).unwrap(), fs::read(b.join(f)).unwrap(), "{f}");
    }
    assert_eq!(vesicle(&["ensemble", "--config", &cfg, "--trajectories", "1"]).0, 2);
}

#[test]
fn noiseless_ensemble_members_coincide() {
    let cfg = RunConfig::from_toml(&SMALL.replace("zeta_a = 0.2", "zeta_a = 0.0").replace("zeta_b = 0.2", "zeta_b = 0.0")).unwrap();
    let o = commands::ensemble(&cfg.resolve().unwrap(), 2, None).unwrap();
    assert_eq!(o.records[0], o.records[1]);
    assert!(o.summary.half_width_sup_fk == 0.0);
}

#[test]
fn verify_passes_and_detects_an_impossible_tolerance() {
    let tmp = tempfile::tempdir().unwrap();
    let sweep = "n_samples = 100\nresolutions = [4, 8]\n";
    let ok = write_config(tmp.path(), "sweep.toml", sweep);
    let out = tmp.path().join("v");
    let (code, stdout, _) = vesicle(&["verify", "--config", &ok, "--out", path(&out)]);
    assert_eq!(code, 0, "{stdout}");
    assert_eq!(stdout.lines().count(), 17);
    let csv = fs::read_to_string(out.join("verify.csv")).unwrap();
    assert_eq!(csv.lines().count(), 18);
    let tight = write_config(tmp.path(), "tight.toml", &format!("{sweep}identity_tolerance = 1e-18\n"));
    let (code, _, err) = vesicle(&["verify", "--config", &tight]);
    assert_eq!(code, 5);
    assert!(err.contains("failing reports"));
    let (code, _, _) = vesicle(&["verify", "--config", &ok, "--seed", "99"]);
    assert_eq!(code, 0);
}

#[test]
fn twins_coincide_at_zero_distance_and_relax_near_equilibrium() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = write_config(tmp.path(), "small.toml", SMALL);
    let out = tmp.path().join("t");
    let (code, stdout, _) = vesicle(&["twin", "--config", &cfg, "--out", path(&out), "--delta", "0"]);
    assert_eq!(code, 0);
    assert!(stdout.contains("max distance 0.000000e0"));

    let quiet = RunConfig::from_toml(
        &SMALL
            .replace("zeta_a = 0.2", "zeta_a = 0.0")
            .replace("zeta_b = 0.2", "zeta_b = 0.0")
            .replace("preset = \"random\"\nseed = 9\namplitude = 0.2", "preset = \"equilibrium\"")
            .replace("gamma = 0.1", "gamma = 0.1\na = -9.869604401089358\nb = 0.0"),
    )
    .unwrap();
    let rep = commands::twin(&quiet.resolve().unwrap(), 1e-8, 5, None).unwrap();
    assert!((rep.distance[0] - 1e-8).abs() < 1e-20);
    assert!(rep.distance.windows(2).all(|w| w[1] <= w[0]));
    assert!(*rep.distance.last().unwrap() < rep.distance[0]);
}

#[test]
fn spectrum_lists_modes_in_eigenvalue_order() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = write_config(tmp.path(), "small.toml", SMALL);
    let (code, stdout, _) = vesicle(&["spectrum", "--config", &cfg, "--modes", "5"]);
    assert_eq!(code, 0);
    let lines: Vec<&str> = stdout.lines().collect();
    assert!(lines[1].split_whitespace().collect::<Vec<_>>()[..4] == ["0", "1", "1", "2"]);
    assert!(stdout.contains("holds"));
    let rows = commands::spectrum(&RunConfig::from_toml(SMALL).unwrap(), None).unwrap();
    assert_eq!(rows.len(), 36);
    assert!(rows.windows(2).all(|w| w[0].lambda <= w[1].lambda));
}
