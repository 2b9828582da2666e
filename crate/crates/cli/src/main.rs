//! `specc`: encode, decode and evaluate multispectral cubes.
//!
//! Exit status: 0 on success, 1 for usage errors, 2 for data or format errors.

use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{anyhow, Context};
use clap::{Args, Parser, Subcommand, ValueEnum};
use rayon::prelude::*;
use specc_core::codec::{decode_cube, encode_cube, EncodeOptions, EncodedCube};
use specc_core::cube::{
    load_cube, load_descriptor, load_pgm_dir, sidecar_path, store_cube, store_pgm_dir,
    synthesize_correlated_cube, Endianness, SpectralCube,
};
use specc_core::metrics::{bd_rate, psnr, psnr_cube, ssim, RDCurve, RDPoint};
use specc_core::predict::PredMode;

const DEFAULT_QPS: [u32; 5] = [17, 22, 27, 32, 37];

#[derive(Parser, Debug)]
#[command(name = "specc", version, about = "Multispectral cube codec with inter-band prediction")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Encode a cube into a .prbp stream.
    Encode(EncodeArgs),
    /// Decode a .prbp stream into a raw cube (plus descriptor) or PGM bands.
    Decode(DecodeArgs),
    /// PSNR and SSIM between two cubes.
    Metrics(MetricsArgs),
    /// Encode at several qps and write the rate-distortion curve as CSV.
    RdSweep(SweepArgs),
    /// BD-rate of a test curve against a reference curve.
    Bdrate(BdrateArgs),
    /// Write a synthetic correlated cube.
    Synth(SynthArgs),
}

#[derive(Args, Debug)]
struct CubeInput {
    /// Planar raw cube, or a directory of .pgm bands.
    input: PathBuf,
    /// Descriptor for a raw cube (default: input with .json extension).
    #[arg(long)]
    descriptor: Option<PathBuf>,
}

#[derive(Args, Debug, Clone, Copy)]
struct CodingFlags {
    /// Disable inter-band prediction.
    #[arg(long)]
    intra_only: bool,
    /// Code bands in index order with a sliding reference window.
    #[arg(long)]
    no_ordering: bool,
    /// Band used as similarity anchor for ordering.
    #[arg(long, default_value_t = 2)]
    anchor: usize,
}

impl CodingFlags {
    fn options(&self, qp: u32) -> EncodeOptions {
        EncodeOptions {
            qp,
            inter_band: !self.intra_only,
            ordering: !self.no_ordering,
            anchor: self.anchor,
        }
    }
}

#[derive(Args, Debug)]
struct EncodeArgs {
    #[command(flatten)]
    cube: CubeInput,
    /// Output stream.
    #[arg(short, long)]
    output: PathBuf,
    #[arg(long, default_value_t = 22, value_parser = clap::value_parser!(u32).range(0..=51))]
    qp: u32,
    #[command(flatten)]
    flags: CodingFlags,
    /// Per-band statistics CSV.
    #[arg(long)]
    stats_out: Option<PathBuf>,
}

#[derive(Clone, Copy, Debug, ValueEnum)]
enum OutputFormat {
    Raw,
    Pgm,
}

#[derive(Clone, Copy, Debug, ValueEnum)]
enum ByteOrder {
    Little,
    Big,
}

#[derive(Args, Debug)]
struct DecodeArgs {
    input: PathBuf,
    /// Raw file (descriptor written next to it) or directory for PGM output.
    #[arg(short, long)]
    output: PathBuf,
    #[arg(long, value_enum, default_value_t = OutputFormat::Raw)]
    format: OutputFormat,
    #[arg(long, value_enum, default_value_t = ByteOrder::Little)]
    endianness: ByteOrder,
}

#[derive(Args, Debug)]
struct MetricsArgs {
    reference: PathBuf,
    distorted: PathBuf,
    #[arg(long)]
    reference_descriptor: Option<PathBuf>,
    #[arg(long)]
    distorted_descriptor: Option<PathBuf>,
}

#[derive(Args, Debug)]
struct SweepArgs {
    #[command(flatten)]
    cube: CubeInput,
    /// Curve CSV.
    #[arg(short, long)]
    output: PathBuf,
    /// Comma-separated qps.
    #[arg(long, value_delimiter = ',', value_parser = clap::value_parser!(u32).range(0..=51))]
    qps: Vec<u32>,
    #[command(flatten)]
    flags: CodingFlags,
}

#[derive(Args, Debug)]
struct BdrateArgs {
    reference: PathBuf,
    test: PathBuf,
}

#[derive(Args, Debug)]
struct SynthArgs {
    /// Raw output; the descriptor is written next to it.
    #[arg(short, long)]
    output: PathBuf,
    #[arg(long, default_value_t = 64)]
    width: usize,
    #[arg(long, default_value_t = 64)]
    height: usize,
    #[arg(long, default_value_t = 8)]
    bands: usize,
    #[arg(long, default_value_t = 8)]
    bit_depth: u8,
    #[arg(long, default_value_t = 1)]
    seed: u64,
    /// Uniform noise amplitude in percent of the sample range.
    #[arg(long, default_value_t = 2.0)]
    noise_percent: f64,
    #[arg(long, value_enum, default_value_t = ByteOrder::Little)]
    endianness: ByteOrder,
}

enum Failure {
    Usage(String),
    Data(anyhow::Error),
}

impl From<anyhow::Error> for Failure {
    fn from(e: anyhow::Error) -> Self {
        Failure::Data(e)
    }
}

impl From<specc_core::Error> for Failure {
    fn from(e: specc_core::Error) -> Self {
        match e {
            specc_core::Error::InvalidOption(_) | specc_core::Error::QpOutOfRange(_) => Failure::Usage(e.to_string()),
            e => Failure::Data(e.into()),
        }
    }
}

type CmdResult = Result<(), Failure>;

fn usage(msg: impl Into<String>) -> Failure {
    Failure::Usage(msg.into())
}

fn distinct(a: &Path, b: &Path) -> Result<(), Failure> {
    let same = a == b
        || matches!((fs::canonicalize(a), fs::canonicalize(b)), (Ok(x), Ok(y)) if x == y);
    if same {
        return Err(usage(format!("input and output are the same path: {}", a.display())));
    }
    Ok(())
}

fn endianness(order: ByteOrder) -> Endianness {
    match order {
        ByteOrder::Little => Endianness::Little,
        ByteOrder::Big => Endianness::Big,
    }
}

fn load_input(path: &Path, descriptor: Option<&Path>) -> anyhow::Result<SpectralCube> {
    if path.is_dir() {
        return load_pgm_dir(path).with_context(|| format!("loading PGM bands from {}", path.display()));
    }
    let desc_path = descriptor.map(Path::to_path_buf).unwrap_or_else(|| sidecar_path(path));
    let desc = load_descriptor(&desc_path).with_context(|| format!("reading descriptor {}", desc_path.display()))?;
    load_cube(path, &desc).with_context(|| format!("loading cube {}", path.display()))
}

fn fmt_db(v: f64) -> String {
    if v.is_finite() {
        format!("{v:.4}")
    } else {
        "inf".into()
    }
}

fn write_stats(path: &Path, enc: &EncodedCube) -> anyhow::Result<()> {
    let h = &enc.header;
    let pixels = (h.width * h.height) as f64;
    let mut w = csv::Writer::from_path(path).with_context(|| format!("creating {}", path.display()))?;
    let mut header: Vec<String> = ["band", "coded_pos", "bits", "bpppb", "psnr_db", "leaves", "inter_leaves"]
        .map(String::from)
        .to_vec();
    header.extend(PredMode::ALL.iter().map(|m| m.name().to_string()));
    w.write_record(&header)?;
    let mut rows: Vec<_> = enc.bands.iter().collect();
    rows.sort_by_key(|r| r.band);
    for r in rows {
        let mut rec = vec![
            r.band.to_string(),
            r.coded_pos.to_string(),
            r.bits.to_string(),
            format!("{:.6}", r.bits as f64 / pixels),
            fmt_db(r.psnr),
            r.leaves().to_string(),
            r.inter_leaves().to_string(),
        ];
        rec.extend(r.mode_counts.iter().map(u64::to_string));
        w.write_record(&rec)?;
    }
    w.flush()?;
    Ok(())
}

fn cmd_encode(args: EncodeArgs) -> CmdResult {
    distinct(&args.cube.input, &args.output)?;
    if let Some(stats) = &args.stats_out {
        distinct(&args.output, stats)?;
    }
    let cube = load_input(&args.cube.input, args.cube.descriptor.as_deref())?;
    let enc = encode_cube(&cube, &args.flags.options(args.qp))?;
    fs::write(&args.output, &enc.bytes).with_context(|| format!("writing {}", args.output.display()))?;
    println!("bytes: {}", enc.bytes.len());
    println!("rate: {:.6} bpppb", enc.bpppb());
    println!("psnr: {} dB", fmt_db(psnr_cube(&cube, &enc.reconstruction)?));
    println!("inter-band share: {:.2} %", 100.0 * enc.stats.inter_share());
    for b in 0..cube.band_count() {
        let r = enc.bands.iter().find(|r| r.band == b).expect("every band reported");
        println!("band {b}: psnr {} dB, {} bits", fmt_db(r.psnr), r.bits);
    }
    if let Some(stats) = &args.stats_out {
        write_stats(stats, &enc)?;
    }
    Ok(())
}

fn cmd_decode(args: DecodeArgs) -> CmdResult {
    distinct(&args.input, &args.output)?;
    let bytes = fs::read(&args.input).with_context(|| format!("reading {}", args.input.display()))?;
    let cube = decode_cube(&bytes).with_context(|| format!("decoding {}", args.input.display()))?;
    match args.format {
        OutputFormat::Raw => {
            store_cube(&args.output, &cube, endianness(args.endianness))?;
        }
        OutputFormat::Pgm => store_pgm_dir(&args.output, &cube)?,
    }
    println!(
        "decoded {}x{}x{} at {} bit",
        cube.width(),
        cube.height(),
        cube.band_count(),
        cube.bit_depth()
    );
    Ok(())
}

fn cmd_metrics(args: MetricsArgs) -> CmdResult {
    let a = load_input(&args.reference, args.reference_descriptor.as_deref())?;
    let b = load_input(&args.distorted, args.distorted_descriptor.as_deref())?;
    let cube_psnr = psnr_cube(&a, &b)?;
    let mut w = csv::Writer::from_writer(std::io::stdout());
    w.write_record(["band", "psnr_db", "ssim"]).map_err(anyhow::Error::from)?;
    let mut ssim_sum = 0.0;
    for (i, (pa, pb)) in a.bands().iter().zip(b.bands()).enumerate() {
        let s = ssim(pa, pb)?;
        ssim_sum += s;
        w.write_record([i.to_string(), fmt_db(psnr(pa, pb)?), format!("{s:.6}")])
            .map_err(anyhow::Error::from)?;
    }
    w.write_record([
        "cube".to_string(),
        fmt_db(cube_psnr),
        format!("{:.6}", ssim_sum / a.band_count() as f64),
    ])
    .map_err(anyhow::Error::from)?;
    w.flush().map_err(anyhow::Error::from)?;
    Ok(())
}

fn cmd_rd_sweep(args: SweepArgs) -> CmdResult {
    distinct(&args.cube.input, &args.output)?;
    let cube = load_input(&args.cube.input, args.cube.descriptor.as_deref())?;
    let qps = if args.qps.is_empty() {
        DEFAULT_QPS.to_vec()
    } else {
        args.qps
    };
    let rows = qps
        .par_iter()
        .map(|&qp| -> anyhow::Result<(u32, f64, f64, f64)> {
            let enc = encode_cube(&cube, &args.flags.options(qp))?;
            Ok((qp, enc.bpppb(), psnr_cube(&cube, &enc.reconstruction)?, enc.stats.inter_share()))
        })
        .collect::<anyhow::Result<Vec<_>>>()?;
    let mut w = csv::Writer::from_path(&args.output).with_context(|| format!("creating {}", args.output.display()))?;
    w.write_record(["qp", "bpppb", "psnr_db", "inter_share"]).map_err(anyhow::Error::from)?;
    for (qp, rate, db, share) in &rows {
        w.write_record([qp.to_string(), format!("{rate:.6}"), fmt_db(*db), format!("{share:.4}")])
            .map_err(anyhow::Error::from)?;
        println!("qp {qp}: {rate:.6} bpppb, {} dB", fmt_db(*db));
    }
    w.flush().map_err(anyhow::Error::from)?;
    Ok(())
}

/// Reads `bpppb` and `psnr_db` columns; rows with non-finite PSNR are skipped.
fn read_curve(path: &Path) -> anyhow::Result<RDCurve> {
    let mut r = csv::Reader::from_path(path).with_context(|| format!("opening {}", path.display()))?;
    let headers = r.headers()?.clone();
    let col = |name: &str| {
        headers
            .iter()
            .position(|h| h == name)
            .ok_or_else(|| anyhow!("{}: missing column '{name}'", path.display()))
    };
    let (rate_col, psnr_col) = (col("bpppb")?, col("psnr_db")?);
    let mut points = Vec::new();
    for (line, rec) in r.records().enumerate() {
        let rec = rec?;
        let field = |i: usize| -> anyhow::Result<f64> {
            let text = rec.get(i).unwrap_or("");
            text.trim()
                .parse::<f64>()
                .map_err(|_| anyhow!("{}: row {}: bad number '{text}'", path.display(), line + 1))
        };
        let (rate, psnr) = (field(rate_col)?, field(psnr_col)?);
        if psnr.is_finite() {
            points.push(RDPoint { rate, psnr });
        }
    }
    RDCurve::new(points).with_context(|| format!("curve {}", path.display()))
}

fn format_percent(v: f64) -> String {
    let s = format!("{v:.2}");
    if s == "-0.00" {
        "0.00 %".into()
    } else {
        format!("{s} %")
    }
}

fn cmd_bdrate(args: BdrateArgs) -> CmdResult {
    let reference = read_curve(&args.reference)?;
    let test = read_curve(&args.test)?;
    println!("{}", format_percent(bd_rate(&reference, &test)?));
    Ok(())
}

fn cmd_synth(args: SynthArgs) -> CmdResult {
    if !(0.0..=100.0).contains(&args.noise_percent) {
        return Err(usage(format!("noise percent {} outside [0, 100]", args.noise_percent)));
    }
    let range = ((1u32 << args.bit_depth.min(16)) - 1) as f64;
    let cube = synthesize_correlated_cube(
        args.width,
        args.height,
        args.bands,
        args.bit_depth,
        args.seed,
        args.noise_percent / 100.0 * range,
    )?;
    store_cube(&args.output, &cube, endianness(args.endianness))?;
    Ok(())
}

fn run(cli: Cli) -> CmdResult {
    match cli.command {
        Command::Encode(a) => cmd_encode(a),
        Command::Decode(a) => cmd_decode(a),
        Command::Metrics(a) => cmd_metrics(a),
        Command::RdSweep(a) => cmd_rd_sweep(a),
        Command::Bdrate(a) => cmd_bdrate(a),
        Command::Synth(a) => cmd_synth(a),
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { ExitCode::from(1) } else { ExitCode::SUCCESS };
        }
    };
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(Failure::Usage(msg)) => {
            eprintln!("error: {msg}");
            ExitCode::from(1)
        }
        Err(Failure::Data(e)) => {
            eprintln!("error: {e:#}");
            ExitCode::from(2)
        }
    }
}
