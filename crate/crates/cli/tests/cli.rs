use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use cylpc_core::bitstream::CodecParams;
use cylpc_core::ingest::{load_kitti_bin, load_ply};
use cylpc_core::voxelizer::{devoxelize, voxelize};
use cylpc_core::CoordinateSystem;
use rand::{Rng, SeedableRng};
use tempfile::TempDir;

fn cylpc(args: &[&str], dir: &Path) -> Output {
    Command::new(env!("CARGO_BIN_EXE_cylpc"))
        .args(args)
        .current_dir(dir)
        .output()
        .expect("binary runs")
}

fn ok(args: &[&str], dir: &Path) -> String {
    let out = cylpc(args, dir);
    assert!(
        out.status.success(),
        "{args:?} failed: {}",
        String::from_utf8_lossy(&out.stderr)
    );
    String::from_utf8(out.stdout).unwrap()
}

fn value(stdout: &str, key: &str) -> String {
    stdout
        .lines()
        .find_map(|l| l.strip_prefix(&format!("{key}=")))
        .unwrap_or_else(|| panic!("no {key} in {stdout}"))
        .to_string()
}

/// A small synthetic sweep on disk.
fn fixture(name: &str) -> (TempDir, PathBuf) {
    let dir = tempfile::tempdir().unwrap();
    ok(
        &["synth", "--seed", "11", "--beams", "16", "--azimuth-step", "2", "--out", name],
        dir.path(),
    );
    let path = dir.path().join(name);
    (dir, path)
}

#[test]
fn encode_decode_reproduces_voxel_centers() {
    let (dir, input) = fixture("in.bin");
    for (coords, extra) in [("cartesian", vec!["--depth", "12"]), ("cylindrical", vec!["--log-radial"])] {
        let mut args = vec!["encode", "in.bin", "--coords", coords, "--qstep", "2", "--out", "s.cyl"];
        args.extend(extra.iter().copied());
        let enc = ok(&args, dir.path());
        let dec = ok(&["decode", "s.cyl", "--out", "d.ply"], dir.path());
        assert_eq!(value(&enc, "total_bytes"), value(&dec, "total_bytes"));

        let n: f64 = value(&enc, "points").parse().unwrap();
        let size = fs::metadata(dir.path().join("s.cyl")).unwrap().len() as f64;
        let total: f64 = value(&enc, "total_bpp").parse().unwrap();
        assert!((total - 8.0 * size / n).abs() <= 1e-5 * total);

        let pc = load_kitti_bin(&input).unwrap().cloud;
        let system: CoordinateSystem = coords.parse().unwrap();
        let params = CodecParams {
            depth: if extra.contains(&"--depth") { 12 } else { 13 },
            log_radial: extra.contains(&"--log-radial"),
            ..CodecParams::new(system, 2.0)
        };
        let reference = devoxelize(&voxelize(&pc, &params.grid(&pc).unwrap()).unwrap());
        let decoded = load_ply(dir.path().join("d.ply")).unwrap().cloud;
        assert_eq!(decoded.points(), reference.points(), "{coords}");
        for (a, b) in decoded.attributes().iter().zip(reference.attributes()) {
            assert!((a - b).abs() <= 2.0 * (reference.len() as f64).sqrt());
        }
    }
}

#[test]
fn decoder_needs_only_the_bitstream() {
    let (dir, _) = fixture("in.ply");
    ok(&["encode", "in.ply", "--out", "s.cyl"], dir.path());
    let elsewhere = tempfile::tempdir().unwrap();
    fs::copy(dir.path().join("s.cyl"), elsewhere.path().join("s.cyl")).unwrap();
    drop(dir);
    ok(&["decode", "s.cyl", "--out", "a.ply"], elsewhere.path());
    ok(&["decode", "s.cyl", "--out", "b.ply"], elsewhere.path());
    let a = fs::read(elsewhere.path().join("a.ply")).unwrap();
    assert_eq!(a, fs::read(elsewhere.path().join("b.ply")).unwrap());
    ok(&["decode", "s.cyl", "--binary", "--out", "c.ply"], elsewhere.path());
    let ascii = load_ply(elsewhere.path().join("a.ply")).unwrap();
    let binary = load_ply(elsewhere.path().join("c.ply")).unwrap();
    assert_eq!(ascii, binary);
}

#[test]
fn rd_sweep_csv_is_deterministic() {
    let (dir, _) = fixture("in.bin");
    let args = ["rd-sweep", "in.bin", "--qsteps", "32,16,8,4,2", "--csv", "a.csv"];
    let stdout = ok(&args, dir.path());
    assert_eq!(stdout.lines().filter(|l| l.starts_with("qstep=")).count(), 5);
    ok(&["rd-sweep", "in.bin", "--qsteps", "32,16,8,4,2", "--csv", "b.csv"], dir.path());
    let a = fs::read_to_string(dir.path().join("a.csv")).unwrap();
    assert_eq!(a, fs::read_to_string(dir.path().join("b.csv")).unwrap());
    assert!(a.starts_with("bpp,psnr_db\n"));
    assert!(a.lines().last().unwrap().starts_with("# geometry_bpp="));
}

#[test]
fn compare_and_analyze_outputs() {
    let (dir, _) = fixture("in.bin");
    let out = ok(
        &["compare", "in.bin", "--log-radial", "--out", "r.txt", "--csv", "r.csv"],
        dir.path(),
    );
    assert!(out.contains("bd_delta_psnr_db=") && out.contains("bd_delta_rate_percent="));
    assert!(out.ends_with(&fs::read_to_string(dir.path().join("r.txt")).unwrap()));
    let csv = fs::read_to_string(dir.path().join("r.csv")).unwrap();
    assert!(csv.starts_with("system,depth,qstep,geometry_bpp,attribute_bpp,psnr_db\n"));

    let out = ok(&["analyze", "in.bin", "--csv", "knn.csv", "--occupancy-csv", "occ.csv"], dir.path());
    assert!(out.contains("radius_knn_spearman="));
    let knn = fs::read_to_string(dir.path().join("knn.csv")).unwrap();
    assert_eq!(knn.lines().next(), Some("r,mean_knn_distance"));
    let occ = fs::read_to_string(dir.path().join("occ.csv")).unwrap();
    let lines: Vec<&str> = occ.lines().collect();
    assert_eq!(lines[0], "system,depth,voxels,mean_points");
    assert!(lines[1].starts_with("cartesian,8,") && lines[2].starts_with("cylindrical,8,"));
}

#[test]
fn exit_codes() {
    let dir = tempfile::tempdir().unwrap();
    let code = |args: &[&str]| cylpc(args, dir.path()).status.code();

    assert_eq!(code(&["encode"]), Some(2));
    assert_eq!(code(&["frobnicate"]), Some(2));
    assert_eq!(code(&["synth", "--out", "x.txt"]), Some(2));

    fs::write(dir.path().join("bad.bin"), [0u8; 17]).unwrap();
    assert_eq!(code(&["encode", "bad.bin", "--out", "x"]), Some(3));
    assert_eq!(code(&["encode", "missing.bin", "--out", "x"]), Some(3));
    fs::write(dir.path().join("bad.ply"), "ply\nformat ascii 1.0\nelement vertex 1\nproperty float x\nproperty float y\nproperty float z\nend_header\n1 2 3\n").unwrap();
    let out = cylpc(&["encode", "bad.ply", "--out", "x"], dir.path());
    assert_eq!(out.status.code(), Some(3));
    assert!(String::from_utf8_lossy(&out.stderr).contains("intensity"));

    ok(&["synth", "--beams", "8", "--azimuth-step", "4", "--out", "s.bin"], dir.path());
    assert_eq!(code(&["encode", "s.bin", "--qstep", "0", "--out", "x"]), Some(2));
    ok(&["encode", "s.bin", "--out", "s.cyl"], dir.path());
    let bytes = fs::read(dir.path().join("s.cyl")).unwrap();
    fs::write(dir.path().join("t.cyl"), &bytes[..bytes.len() - 3]).unwrap();
    let out = cylpc(&["decode", "t.cyl", "--out", "t.ply"], dir.path());
    assert_eq!(out.status.code(), Some(4));
    assert!(String::from_utf8_lossy(&out.stderr).contains("offset"));
}

#[test]
fn bit_flips_give_clean_results_or_corrupt_stream() {
    let dir = tempfile::tempdir().unwrap();
    ok(&["synth", "--beams", "8", "--azimuth-step", "4", "--out", "s.bin"], dir.path());
    ok(&["encode", "s.bin", "--depth", "10", "--out", "s.cyl"], dir.path());
    let bytes = fs::read(dir.path().join("s.cyl")).unwrap();
    let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(99);
    for _ in 0..60 {
        let mut b = bytes.clone();
        let i = rng.random_range(0..b.len());
        b[i] ^= 1 << rng.random_range(0..8);
        fs::write(dir.path().join("f.cyl"), &b).unwrap();
        let code = cylpc(&["decode", "f.cyl", "--out", "f.ply"], dir.path()).status.code();
        assert!(matches!(code, Some(0) | Some(4)), "byte {i}: exit {code:?}");
    }
}
