use cylpc_core::bitstream::{decode, encode, CodecParams};
use cylpc_core::experiment::{compare, rd_sweep};
use cylpc_core::ingest::{parse_ply, synth_sweep, write_ply, PlyEncoding, SweepSpec};
use cylpc_core::metrics::{mean_squared_error, psnr_attribute, Psnr};
use cylpc_core::voxelizer::devoxelize;
use cylpc_core::{CoordinateSystem, PointCloud};

fn small_sweep(seed: u64) -> PointCloud {
    let spec = SweepSpec {
        beams: 16,
        azimuth_step: 2f64.to_radians(),
        ..SweepSpec::default()
    };
    synth_sweep(&spec, seed).unwrap()
}

fn all_params(qstep: f64) -> Vec<CodecParams> {
    vec![
        CodecParams::new(CoordinateSystem::Cartesian, qstep),
        CodecParams::new(CoordinateSystem::Cylindrical, qstep),
        CodecParams {
            log_radial: true,
            ..CodecParams::new(CoordinateSystem::Cylindrical, qstep)
        },
    ]
}

#[test]
fn decode_matches_voxel_centers_for_every_grid() {
    let pc = small_sweep(4);
    for params in all_params(2.0) {
        let (enc, vc) = encode(&pc, &params).unwrap();
        let dec = decode(&enc.bytes).unwrap();
        let reference = devoxelize(&vc);
        let cloud = dec.to_cloud();
        assert_eq!(cloud.points(), reference.points());
        assert_eq!(dec.report, enc.report);
        let mse = mean_squared_error(reference.attributes(), cloud.attributes()).unwrap();
        assert!(mse <= 1.0, "{params:?}: mse {mse}");
    }
}

#[test]
fn ply_interchange_preserves_the_bitstream() {
    let pc = small_sweep(5);
    let mut bytes = Vec::new();
    write_ply(&mut bytes, &pc, PlyEncoding::BinaryLittleEndian).unwrap();
    let back = parse_ply(&bytes, "memory").unwrap().cloud;
    let params = CodecParams::new(CoordinateSystem::Cylindrical, 4.0);
    assert_eq!(encode(&pc, &params).unwrap().0.bytes, encode(&back, &params).unwrap().0.bytes);
}

#[test]
fn finer_quantization_costs_rate_and_buys_quality() {
    let pc = small_sweep(6);
    let sweep = rd_sweep(&pc, &CodecParams::new(CoordinateSystem::Cylindrical, 1.0), &[32.0, 8.0, 2.0, 0.5]).unwrap();
    for w in sweep.points.windows(2) {
        assert!(w[1].report.attribute_bpp > w[0].report.attribute_bpp);
        assert!(w[1].mse < w[0].mse);
    }
    let last = sweep.points.last().unwrap();
    assert!(matches!(last.psnr, Psnr::Lossless) || last.psnr.value() > 50.0);
}

#[test]
fn lossless_attributes_report_lossless_psnr() {
    let a = [1.0, 2.0, 3.0];
    assert_eq!(psnr_attribute(&a, &a).unwrap(), Psnr::Lossless);
}

#[test]
fn comparison_is_deterministic() {
    let pc = small_sweep(7);
    let cart = CodecParams::new(CoordinateSystem::Cartesian, 1.0);
    let cyl = CodecParams::new(CoordinateSystem::Cylindrical, 1.0);
    let qsteps = [32.0, 16.0, 8.0, 4.0, 2.0];
    let mut first = Vec::new();
    compare(&pc, &cart, &cyl, &qsteps).unwrap().write_csv(&mut first).unwrap();
    let mut second = Vec::new();
    compare(&pc, &cart, &cyl, &qsteps).unwrap().write_csv(&mut second).unwrap();
    assert_eq!(first, second);
}
