//! `cylpc`: encode, decode and evaluate LiDAR point clouds.
//!
//! Exit codes: 0 success, 2 usage error, 3 malformed input, 4 corrupt
//! bitstream.

use std::fs::{self, File};
use std::io::{self, BufWriter, Write};
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};
use cylpc_core::bitstream::{self, default_depth, CodecParams, RateReport};
use cylpc_core::experiment::{self, DEFAULT_ANALYSIS_DEPTH, DEFAULT_KNN_K, DEFAULT_QSTEPS};
use cylpc_core::ingest::{self, IntensityModel, PlyEncoding, SweepSpec};
use cylpc_core::metrics::format_sig6;
use cylpc_core::voxelizer::DEFAULT_R_MIN;
use cylpc_core::{CoordinateSystem, Error, PointCloud};

#[derive(Parser)]
#[command(name = "cylpc", version, about = "LiDAR point cloud codec with cylindrical voxelization")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Encode a .bin (KITTI) or .ply cloud into a bitstream.
    Encode {
        input: PathBuf,
        #[command(flatten)]
        grid: GridArgs,
        #[arg(long, default_value_t = 4.0)]
        qstep: f64,
        #[arg(long)]
        out: PathBuf,
    },
    /// Decode a bitstream into a PLY cloud of voxel centers.
    Decode {
        input: PathBuf,
        #[arg(long)]
        out: PathBuf,
        /// Write binary little-endian PLY instead of ASCII.
        #[arg(long)]
        binary: bool,
    },
    /// Encode and decode once per qstep and report the attribute RD curve.
    RdSweep {
        input: PathBuf,
        #[command(flatten)]
        grid: GridArgs,
        #[arg(long, value_delimiter = ',', default_values_t = DEFAULT_QSTEPS)]
        qsteps: Vec<f64>,
        #[arg(long)]
        csv: Option<PathBuf>,
    },
    /// Compare Cartesian and cylindrical coding of the same cloud.
    Compare {
        input: PathBuf,
        #[arg(long, default_value_t = default_depth(CoordinateSystem::Cartesian))]
        depth_cart: u32,
        #[arg(long, default_value_t = default_depth(CoordinateSystem::Cylindrical))]
        depth_cyl: u32,
        #[arg(long, value_delimiter = ',', default_values_t = DEFAULT_QSTEPS)]
        qsteps: Vec<f64>,
        /// Logarithmic radial partition for the cylindrical side.
        #[arg(long)]
        log_radial: bool,
        #[arg(long, default_value_t = DEFAULT_R_MIN)]
        r_min: f64,
        /// Text report destination (stdout regardless).
        #[arg(long)]
        out: Option<PathBuf>,
        #[arg(long)]
        csv: Option<PathBuf>,
    },
    /// Radius vs k-NN distance and occupancy statistics as CSV.
    Analyze {
        input: PathBuf,
        #[arg(long, default_value_t = DEFAULT_KNN_K)]
        k: usize,
        #[arg(long, default_value_t = DEFAULT_ANALYSIS_DEPTH)]
        depth: u32,
        #[arg(long)]
        log_radial: bool,
        #[arg(long, default_value_t = DEFAULT_R_MIN)]
        r_min: f64,
        /// k-NN CSV (`r,mean_knn_distance`).
        #[arg(long)]
        csv: Option<PathBuf>,
        /// Occupancy CSV (`system,depth,voxels,mean_points`).
        #[arg(long)]
        occupancy_csv: Option<PathBuf>,
    },
    /// Write a synthetic LiDAR sweep as .bin or .ply.
    Synth {
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long, default_value_t = 64)]
        beams: u32,
        /// Azimuth step in degrees.
        #[arg(long, default_value_t = 0.2)]
        azimuth_step: f64,
        #[arg(long, default_value_t = 0.02)]
        noise: f64,
        #[arg(long, default_value_t = 40)]
        boxes: u32,
        #[arg(long, value_enum, default_value_t = Intensity::RangeDecay)]
        intensity: Intensity,
        #[arg(long)]
        out: PathBuf,
        #[arg(long)]
        binary: bool,
    },
}

#[derive(Args)]
struct GridArgs {
    #[arg(long, default_value = "cylindrical")]
    coords: CoordinateSystem,
    /// Octree depth; 13 for cylindrical and 16 for Cartesian by default.
    #[arg(long)]
    depth: Option<u32>,
    #[arg(long)]
    log_radial: bool,
    #[arg(long, default_value_t = DEFAULT_R_MIN)]
    r_min: f64,
}

impl GridArgs {
    fn params(&self, qstep: f64) -> CodecParams {
        CodecParams {
            depth: self.depth.unwrap_or(default_depth(self.coords)),
            log_radial: self.log_radial,
            r_min: self.r_min,
            ..CodecParams::new(self.coords, qstep)
        }
    }
}

#[derive(Clone, Copy, ValueEnum)]
enum Intensity {
    Constant,
    RangeDecay,
    Checker,
}

/// Failure with the exit code it maps to.
struct Failure {
    code: u8,
    message: String,
}

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        let code = match e {
            Error::InvalidConfig(_) => 2,
            Error::CorruptStream { .. } => 4,
            _ => 3,
        };
        Failure {
            code,
            message: e.to_string(),
        }
    }
}

fn io_failure(path: &Path, e: io::Error) -> Failure {
    Failure {
        code: 3,
        message: format!("{}: {e}", path.display()),
    }
}

fn load(path: &Path) -> Result<PointCloud, Failure> {
    let loaded = ingest::load_point_cloud(path).map_err(|e| match e {
        Error::Io(io) => io_failure(path, io),
        other => other.into(),
    })?;
    println!("input_points={}", loaded.cloud.len());
    println!("dropped_points={}", loaded.dropped);
    Ok(loaded.cloud)
}

fn create(path: &Path) -> Result<BufWriter<File>, Failure> {
    File::create(path).map(BufWriter::new).map_err(|e| io_failure(path, e))
}

fn write_to(path: &Path, f: impl FnOnce(&mut BufWriter<File>) -> cylpc_core::Result<()>) -> Result<(), Failure> {
    let mut w = create(path)?;
    f(&mut w)?;
    w.flush().map_err(|e| io_failure(path, e))
}

fn print_report(r: &RateReport) {
    println!("points={}", r.point_count);
    println!("voxels={}", r.voxel_count);
    println!("geometry_bytes={}", r.geometry_bytes);
    println!("attribute_bytes={}", r.attribute_bytes);
    println!("total_bytes={}", r.total_bytes);
    println!("geometry_bpp={}", format_sig6(r.geometry_bpp));
    println!("attribute_bpp={}", format_sig6(r.attribute_bpp));
    println!("total_bpp={}", format_sig6(r.total_bpp));
}

fn check_qstep(q: f64) -> Result<(), Failure> {
    if q.is_finite() && q > 0.0 {
        Ok(())
    } else {
        Err(Failure {
            code: 2,
            message: format!("qstep must be positive and finite, got {q}"),
        })
    }
}

fn run(cli: Cli) -> Result<(), Failure> {
    match cli.command {
        Command::Encode { input, grid, qstep, out } => {
            check_qstep(qstep)?;
            let pc = load(&input)?;
            let (enc, _) = bitstream::encode(&pc, &grid.params(qstep))?;
            fs::write(&out, &enc.bytes).map_err(|e| io_failure(&out, e))?;
            print_report(&enc.report);
        }
        Command::Decode { input, out, binary } => {
            let bytes = fs::read(&input).map_err(|e| io_failure(&input, e))?;
            let dec = bitstream::decode(&bytes)?;
            let encoding = if binary {
                PlyEncoding::BinaryLittleEndian
            } else {
                PlyEncoding::Ascii
            };
            write_to(&out, |w| ingest::write_ply(w, &dec.to_cloud(), encoding))?;
            print_report(&dec.report);
        }
        Command::RdSweep {
            input,
            grid,
            qsteps,
            csv,
        } => {
            qsteps.iter().try_for_each(|&q| check_qstep(q))?;
            let pc = load(&input)?;
            let sweep = experiment::rd_sweep(&pc, &grid.params(1.0), &qsteps)?;
            println!("geometry_bpp={}", format_sig6(sweep.geometry_bpp()));
            for p in &sweep.points {
                println!(
                    "qstep={} attribute_bpp={} psnr_db={}",
                    format_sig6(p.qstep),
                    format_sig6(p.report.attribute_bpp),
                    format_sig6(p.psnr.value())
                );
            }
            if let Some(path) = csv {
                write_to(&path, |w| experiment::write_sweep_csv(w, &sweep))?;
            }
        }
        Command::Compare {
            input,
            depth_cart,
            depth_cyl,
            qsteps,
            log_radial,
            r_min,
            out,
            csv,
        } => {
            qsteps.iter().try_for_each(|&q| check_qstep(q))?;
            let pc = load(&input)?;
            let cart = CodecParams {
                depth: depth_cart,
                ..CodecParams::new(CoordinateSystem::Cartesian, 1.0)
            };
            let cyl = CodecParams {
                depth: depth_cyl,
                log_radial,
                r_min,
                ..CodecParams::new(CoordinateSystem::Cylindrical, 1.0)
            };
            let cmp = experiment::compare(&pc, &cart, &cyl, &qsteps)?;
            cmp.write_text(io::stdout().lock())?;
            if let Some(path) = out {
                write_to(&path, |w| cmp.write_text(w))?;
            }
            if let Some(path) = csv {
                write_to(&path, |w| cmp.write_csv(w))?;
            }
        }
        Command::Analyze {
            input,
            k,
            depth,
            log_radial,
            r_min,
            csv,
            occupancy_csv,
        } => {
            let pc = load(&input)?;
            let a = experiment::analyze(&pc, k, depth, log_radial, r_min)?;
            for row in &a.occupancy {
                println!(
                    "system={} depth={} voxels={} mean_points={}",
                    row.system,
                    row.depth,
                    row.voxels,
                    format_sig6(row.mean_points)
                );
            }
            println!("radius_knn_spearman={}", format_sig6(a.radius_knn_spearman));
            if let Some(path) = csv {
                write_to(&path, |w| a.write_knn_csv(w))?;
            }
            if let Some(path) = occupancy_csv {
                write_to(&path, |w| a.write_occupancy_csv(w))?;
            }
        }
        Command::Synth {
            seed,
            beams,
            azimuth_step,
            noise,
            boxes,
            intensity,
            out,
            binary,
        } => {
            let spec = SweepSpec {
                beams,
                azimuth_step: azimuth_step.to_radians(),
                noise_sigma: noise,
                boxes,
                intensity: match intensity {
                    Intensity::Constant => IntensityModel::Constant(128.0),
                    Intensity::RangeDecay => IntensityModel::RangeDecay,
                    Intensity::Checker => IntensityModel::Checker(2.0),
                },
                ..SweepSpec::default()
            };
            let pc = ingest::synth_sweep(&spec, seed)?;
            match out.extension().and_then(|e| e.to_str()) {
                Some("bin") => ingest::write_kitti_bin(&out, &pc)?,
                Some("ply") => {
                    let enc = if binary {
                        PlyEncoding::BinaryLittleEndian
                    } else {
                        PlyEncoding::Ascii
                    };
                    write_to(&out, |w| ingest::write_ply(w, &pc, enc))?
                }
                _ => {
                    return Err(Failure {
                        code: 2,
                        message: format!("{}: output must end in .bin or .ply", out.display()),
                    })
                }
            }
            println!("points={}", pc.len());
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = Cli::parse();
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(f) => {
            eprintln!("error: {}", f.message);
            ExitCode::from(f.code)
        }
    }
}
