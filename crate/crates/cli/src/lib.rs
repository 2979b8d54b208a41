//! The `texvc` command line: dataset synthesis, classifier training,
//! segmentation, texture motion estimation, encoding, decoding, RD sweeps
//! and Bjøntegaard reports.
//!
//! [`run`] parses an argument vector and returns the process exit code: 0 on
//! success, 1 when the operation fails, 2 on a usage error.

use std::ffi::OsString;
use std::fs;
use std::io::{self, BufReader, BufWriter, Write};
use std::path::{Path, PathBuf};

use anyhow::{bail, Context, Result};
use clap::{Args, Parser, Subcommand, ValueEnum};

use texvc::analyzer::{
    load_masks, save_masks, segment_sequence, synthesize_dataset, train_classifier, DatasetConfig, PatchDataset,
    TextureMask, TrainOptions, DEFAULT_THRESHOLD,
};
use texvc::codec::{decode_sequence, encode_sequence, EncoderConfig};
use texvc::eval::{bd_psnr, bd_rate, rd_sweep, BdMethod, RdCurve, SweepConfig, DEFAULT_Q_LEVELS};
use texvc::motion::{estimate_texture_motion, MotionConfig, MotionModelKind};
use texvc::nn::{load_params, save_params, NetSpec, TrainConfig};
use texvc::synth::{panning_sequence, PanningConfig};
use texvc::y4m::{read_raw_yuv, read_y4m, write_y4m};
use texvc::Sequence;

/// Exit code of a failed operation.
pub const EXIT_FAILURE: i32 = 1;
/// Exit code of a malformed command line.
pub const EXIT_USAGE: i32 = 2;

fn long_version() -> &'static str {
    concat!(
        env!("CARGO_PKG_VERSION"),
        "\nbitstream TXC1 version 1\nweights TXNN version 1\ndataset TXDS version 1"
    )
}

#[derive(Debug, Parser)]
#[command(name = "texvc", version, long_version = long_version(), about = "Texture analysis/synthesis video coding")]
struct Cli {
    /// Seed for every random choice.
    #[arg(long, global = true, default_value_t = 0)]
    seed: u64,
    /// Worker threads; outputs do not depend on this.
    #[arg(long, global = true, default_value_t = 1, value_parser = clap::value_parser!(u16).range(1..))]
    threads: u16,
    /// Log progress; repeat for more detail.
    #[arg(short, long, global = true, action = clap::ArgAction::Count)]
    verbose: u8,
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Synthesize a classifier training set, optionally with a panning test clip.
    GenData(GenDataArgs),
    /// Train the block classifier.
    Train(TrainArgs),
    /// Write a texture mask per frame.
    Segment(SegmentArgs),
    /// Estimate texture-region motion between two frames.
    Motion(MotionArgs),
    /// Encode a sequence to a TXC1 stream.
    Encode(EncodeArgs),
    /// Decode a TXC1 stream.
    Decode(DecodeArgs),
    /// Compare baseline and texture coding over several q levels.
    RdSweep(RdSweepArgs),
    /// Bjøntegaard deltas between two RD curve files.
    Bd(BdArgs),
}

#[derive(Debug, Args)]
struct InputArgs {
    /// Y4M file, or headerless 4:2:0 when the name ends in .yuv.
    #[arg(long)]
    input: PathBuf,
    /// Luma width of a .yuv input.
    #[arg(long)]
    width: Option<usize>,
    /// Luma height of a .yuv input.
    #[arg(long)]
    height: Option<usize>,
    /// Number of frames to read from a .yuv input.
    #[arg(long)]
    frames: Option<usize>,
}

#[derive(Debug, Args)]
struct GenDataArgs {
    /// Dataset file to write.
    #[arg(long)]
    out: PathBuf,
    /// Total samples at the default class ratio.
    #[arg(long, conflicts_with_all = ["texture", "non_texture"])]
    total: Option<usize>,
    #[arg(long)]
    texture: Option<usize>,
    #[arg(long)]
    non_texture: Option<usize>,
    /// Also write a synthetic panning clip here.
    #[arg(long)]
    clip: Option<PathBuf>,
    /// Directory for the clip's ground-truth masks.
    #[arg(long, requires = "clip")]
    clip_masks: Option<PathBuf>,
    #[arg(long, default_value_t = 192)]
    clip_width: usize,
    #[arg(long, default_value_t = 128)]
    clip_height: usize,
    #[arg(long, default_value_t = 64)]
    clip_frames: usize,
    /// Background pan in pixels per frame.
    #[arg(long, default_value_t = 2.0)]
    clip_speed: f64,
}

#[derive(Debug, Args)]
struct TrainArgs {
    /// Training set written by gen-data.
    #[arg(long)]
    data: PathBuf,
    /// Validation set, evaluated after each epoch.
    #[arg(long)]
    val: Option<PathBuf>,
    /// Weight file to write.
    #[arg(long)]
    out: PathBuf,
    /// Per-epoch log as JSON.
    #[arg(long)]
    log: Option<PathBuf>,
    #[arg(long, default_value_t = 20)]
    epochs: usize,
    #[arg(long, default_value_t = 0.01)]
    lr: f64,
    #[arg(long, default_value_t = 0.9)]
    momentum: f64,
    #[arg(long, default_value_t = 0.0005)]
    weight_decay: f64,
    #[arg(long, default_value_t = 512)]
    batch: usize,
    /// Stop once validation balanced accuracy reaches this value.
    #[arg(long, requires = "val")]
    target_accuracy: Option<f64>,
}

#[derive(Debug, Args)]
struct SegmentArgs {
    /// TXNN weight file.
    #[arg(long)]
    weights: PathBuf,
    #[command(flatten)]
    input: InputArgs,
    #[arg(long)]
    out_dir: PathBuf,
    /// Texture probability at or above which a cell is texture.
    #[arg(long, default_value_t = DEFAULT_THRESHOLD)]
    threshold: f64,
    /// Drop texture regions with fewer cells than this.
    #[arg(long, default_value_t = 0)]
    min_region: usize,
    /// Mask file name prefix; defaults to the input file stem.
    #[arg(long)]
    stem: Option<String>,
}

#[derive(Debug, Args)]
struct MotionArgs {
    /// Y4M holding the current frame.
    #[arg(long)]
    cur: PathBuf,
    /// Y4M holding the reference frame.
    #[arg(long = "ref")]
    reference: PathBuf,
    /// PGM texture mask of the current frame.
    #[arg(long)]
    mask: PathBuf,
    #[arg(long, default_value = "rotzoom")]
    model: MotionModelKind,
    #[arg(long, default_value_t = 0)]
    cur_frame: usize,
    #[arg(long, default_value_t = 0)]
    ref_frame: usize,
    #[arg(long, default_value_t = 32)]
    search_range: i32,
}

#[derive(Debug, Args)]
struct CodingArgs {
    /// Mask directory from segment; needed unless --no-texture.
    #[arg(long)]
    masks: Option<PathBuf>,
    #[arg(long, default_value_t = 8)]
    gf: usize,
    #[arg(long, default_value = "rotzoom")]
    model: MotionModelKind,
    #[arg(long, default_value_t = 32)]
    search_range: i32,
    #[arg(long, default_value_t = 0.85)]
    lambda_factor: f64,
}

#[derive(Debug, Args)]
struct EncodeArgs {
    #[command(flatten)]
    input: InputArgs,
    #[command(flatten)]
    coding: CodingArgs,
    #[arg(long, default_value_t = 24)]
    q: u32,
    /// Code every block without texture synthesis.
    #[arg(long)]
    no_texture: bool,
    #[arg(long)]
    out: PathBuf,
    /// Per-frame statistics as JSON.
    #[arg(long)]
    stats: Option<PathBuf>,
}

#[derive(Debug, Args)]
struct DecodeArgs {
    #[arg(long = "in")]
    input: PathBuf,
    #[arg(long)]
    out: PathBuf,
}

#[derive(Clone, Copy, Debug, ValueEnum)]
enum Method {
    Cubic,
    Pchip,
}

impl From<Method> for BdMethod {
    fn from(m: Method) -> Self {
        match m {
            Method::Cubic => BdMethod::Cubic,
            Method::Pchip => BdMethod::Pchip,
        }
    }
}

#[derive(Debug, Args)]
struct RdSweepArgs {
    #[command(flatten)]
    input: InputArgs,
    #[command(flatten)]
    coding: CodingArgs,
    /// Report JSON; the curves and table are written next to it.
    #[arg(long)]
    out: PathBuf,
    #[arg(long, value_delimiter = ',', num_args = 4, default_values_t = DEFAULT_Q_LEVELS)]
    q: Vec<u32>,
    #[arg(long, value_enum, default_value_t = Method::Cubic)]
    method: Method,
    /// Also keep every encoded stream in this directory.
    #[arg(long)]
    streams_dir: Option<PathBuf>,
}

#[derive(Debug, Args)]
struct BdArgs {
    /// Reference RD curve JSON.
    #[arg(long)]
    baseline: PathBuf,
    /// Tested RD curve JSON.
    #[arg(long)]
    test: PathBuf,
    #[arg(long, value_enum, default_value_t = Method::Cubic)]
    method: Method,
}

/// A command line that parsed but cannot be run as given.
#[derive(Debug)]
struct Usage(String);

impl std::fmt::Display for Usage {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(&self.0)
    }
}

impl std::error::Error for Usage {}

fn usage(msg: impl Into<String>) -> anyhow::Error {
    Usage(msg.into()).into()
}

/// Parse `argv` (program name first) and run the command.
pub fn run<I, T>(argv: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(argv) {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { EXIT_USAGE } else { 0 };
            let _ = e.print();
            return code;
        }
    };
    let level = match cli.verbose {
        0 => log::LevelFilter::Warn,
        1 => log::LevelFilter::Info,
        _ => log::LevelFilter::Debug,
    };
    let _ = env_logger::Builder::new().filter_level(level).format_timestamp(None).try_init();
    let pool = match rayon::ThreadPoolBuilder::new().num_threads(cli.threads as usize).build() {
        Ok(p) => p,
        Err(e) => {
            eprintln!("error: {e}");
            return EXIT_FAILURE;
        }
    };
    match pool.install(|| dispatch(&cli)) {
        Ok(()) => 0,
        Err(e) if e.is::<Usage>() => {
            use clap::CommandFactory;
            eprintln!("error: {e}\n\n{}", Cli::command().render_usage());
            EXIT_USAGE
        }
        Err(e) => {
            eprintln!("error: {e:#}");
            EXIT_FAILURE
        }
    }
}

fn dispatch(cli: &Cli) -> Result<()> {
    match &cli.command {
        Command::GenData(a) => gen_data(a, cli.seed),
        Command::Train(a) => train(a, cli.seed),
        Command::Segment(a) => segment(a),
        Command::Motion(a) => motion(a, cli.seed),
        Command::Encode(a) => encode(a, cli.seed),
        Command::Decode(a) => decode(a),
        Command::RdSweep(a) => sweep(a, cli.seed),
        Command::Bd(a) => bd(a),
    }
}

fn create(path: &Path) -> Result<BufWriter<fs::File>> {
    if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
        fs::create_dir_all(dir).with_context(|| format!("creating {}", dir.display()))?;
    }
    Ok(BufWriter::new(fs::File::create(path).with_context(|| format!("creating {}", path.display()))?))
}

fn open(path: &Path) -> Result<BufReader<fs::File>> {
    Ok(BufReader::new(fs::File::open(path).with_context(|| format!("opening {}", path.display()))?))
}

fn write_json<T: serde::Serialize>(path: &Path, value: &T) -> Result<()> {
    let mut w = create(path)?;
    serde_json::to_writer_pretty(&mut w, value)?;
    w.write_all(b"\n")?;
    w.flush()?;
    Ok(())
}

fn read_input(a: &InputArgs) -> Result<Sequence> {
    let raw = a.input.extension().is_some_and(|e| e.eq_ignore_ascii_case("yuv"));
    let seq = if raw {
        let (Some(w), Some(h)) = (a.width, a.height) else {
            return Err(usage(format!("{} is headerless YUV: pass --width and --height", a.input.display())));
        };
        read_raw_yuv(open(&a.input)?, w, h, a.frames)?
    } else {
        let mut seq = read_y4m(open(&a.input)?)?;
        if let Some(n) = a.frames {
            if n > seq.len() {
                bail!("{} has {} frames, {n} requested", a.input.display(), seq.len());
            }
            seq.frames.truncate(n);
        }
        seq
    };
    Ok(seq)
}

fn stem_of(path: &Path) -> String {
    path.file_stem().map_or_else(|| "input".to_string(), |s| s.to_string_lossy().into_owned())
}

fn load_coding_masks(c: &CodingArgs, input: &Path, frames: usize, required: bool) -> Result<Option<Vec<TextureMask>>> {
    match &c.masks {
        Some(dir) => Ok(Some(load_masks(dir, Some(&stem_of(input)), frames)?)),
        None if required => Err(usage("texture coding needs --masks")),
        None => Ok(None),
    }
}

fn encoder_config(c: &CodingArgs, q: u32, texture_mode: bool, seed: u64) -> EncoderConfig {
    EncoderConfig {
        gf_group_size: c.gf,
        q_level: q,
        texture_mode,
        motion_model: c.model,
        search_range: c.search_range,
        motion_seed: seed,
        lambda_factor: c.lambda_factor,
        record_analysis: false,
    }
}

fn gen_data(a: &GenDataArgs, seed: u64) -> Result<()> {
    let cfg = match (a.total, a.texture, a.non_texture) {
        (Some(t), _, _) => DatasetConfig::with_total(t),
        (None, t, n) => {
            let d = DatasetConfig::default();
            DatasetConfig {
                texture: t.unwrap_or(d.texture),
                non_texture: n.unwrap_or(d.non_texture),
            }
        }
    };
    let data = synthesize_dataset(&cfg, seed);
    data.write(create(&a.out)?)?;
    let [n, t] = data.class_counts();
    log::info!("wrote {} patches ({t} texture, {n} non-texture) to {}", data.len(), a.out.display());
    if let Some(path) = &a.clip {
        let clip = panning_sequence(&PanningConfig {
            width: a.clip_width,
            height: a.clip_height,
            frames: a.clip_frames,
            speed: a.clip_speed,
            seed,
            ..PanningConfig::default()
        });
        write_y4m(&clip.sequence, create(path)?)?;
        if let Some(dir) = &a.clip_masks {
            save_masks(dir, &stem_of(path), &clip.masks)?;
        }
    }
    Ok(())
}

fn train(a: &TrainArgs, seed: u64) -> Result<()> {
    let data = PatchDataset::read(open(&a.data)?)?;
    let val = a.val.as_deref().map(|p| PatchDataset::read(open(p)?).map_err(anyhow::Error::from)).transpose()?;
    let opts = TrainOptions {
        spec: NetSpec::default(),
        config: TrainConfig {
            learning_rate: a.lr,
            momentum: a.momentum,
            weight_decay: a.weight_decay,
            batch_size: a.batch,
            epochs: a.epochs,
            rng_seed: seed,
            ..TrainConfig::default()
        },
        validation: val.as_ref(),
        target_balanced_accuracy: a.target_accuracy,
    };
    let (params, log) = train_classifier(&data, &opts)?;
    let mut w = create(&a.out)?;
    save_params(&params, &mut w)?;
    w.flush()?;
    if let Some(path) = &a.log {
        write_json(path, &log)?;
    }
    if let Some(e) = log.epochs.last() {
        let val = e.val_balanced_accuracy.map_or(String::new(), |v| format!(", validation balanced accuracy {v:.4}"));
        println!("{} epochs, loss {:.4}, train accuracy {:.4}{val}", log.epochs.len(), e.loss, e.train_accuracy);
    }
    Ok(())
}

fn segment(a: &SegmentArgs) -> Result<()> {
    let params = load_params(open(&a.weights)?)?;
    let seq = read_input(&a.input)?;
    let masks = segment_sequence(&seq, &params, a.threshold, a.min_region)?;
    let stem = a.stem.clone().unwrap_or_else(|| stem_of(&a.input.input));
    save_masks(&a.out_dir, &stem, &masks)?;
    let cells: usize = masks.iter().map(|m| m.grid_w * m.grid_h).sum();
    let texture: usize = masks.iter().map(TextureMask::texture_count).sum();
    log::info!("{} masks, {texture} of {cells} cells texture", masks.len());
    Ok(())
}

fn motion(a: &MotionArgs, seed: u64) -> Result<()> {
    let frame = |path: &Path, i: usize| -> Result<texvc::Frame> {
        let seq = read_y4m(open(path)?)?;
        let n = seq.len();
        seq.frames.into_iter().nth(i).with_context(|| format!("{} has {n} frames, no frame {i}", path.display()))
    };
    let cur = frame(&a.cur, a.cur_frame)?;
    let reference = frame(&a.reference, a.ref_frame)?;
    let mask = TextureMask::read_pgm(open(&a.mask)?, cur.index)?;
    let cfg = MotionConfig {
        search_range: a.search_range,
        seed,
        ..MotionConfig::default()
    };
    let est = estimate_texture_motion(&cur, &reference, &mask, a.model, &cfg)?;
    println!("{}", est.motion);
    log::info!(
        "{} model from {} cells, {:.1}% inliers",
        est.kind.name(),
        est.cells,
        100.0 * est.inlier_fraction
    );
    Ok(())
}

fn encode(a: &EncodeArgs, seed: u64) -> Result<()> {
    let seq = read_input(&a.input)?;
    let masks = load_coding_masks(&a.coding, &a.input.input, seq.len(), !a.no_texture)?;
    let cfg = encoder_config(&a.coding, a.q, !a.no_texture, seed);
    let out = encode_sequence(&seq, masks.as_deref(), &cfg)?;
    let mut w = create(&a.out)?;
    w.write_all(&out.bytes)?;
    w.flush()?;
    if let Some(path) = &a.stats {
        write_json(path, &out.stats)?;
    }
    log::info!("{} frames, {} bytes", seq.len(), out.bytes.len());
    Ok(())
}

fn decode(a: &DecodeArgs) -> Result<()> {
    let bytes = fs::read(&a.input).with_context(|| format!("reading {}", a.input.display()))?;
    let seq = decode_sequence(&bytes)?;
    let mut w = create(&a.out)?;
    write_y4m(&seq, &mut w)?;
    w.flush()?;
    Ok(())
}

/// Sibling of the report file with `suffix` replacing its extension.
fn sibling(report: &Path, suffix: &str) -> PathBuf {
    report.with_file_name(format!("{}.{suffix}", stem_of(report)))
}

fn sweep(a: &RdSweepArgs, seed: u64) -> Result<()> {
    let seq = read_input(&a.input)?;
    let masks = load_coding_masks(&a.coding, &a.input.input, seq.len(), true)?.expect("required");
    let cfg = SweepConfig {
        q_levels: a.q.clone(),
        encoder: encoder_config(&a.coding, a.q[0], true, seed),
        method: a.method.into(),
    };
    cfg.encoder.validate()?;
    let (report, encodes) = rd_sweep(&seq, &masks, &cfg)?;
    write_json(&a.out, &report)?;
    write_json(&sibling(&a.out, "baseline.json"), &report.baseline)?;
    write_json(&sibling(&a.out, "texture.json"), &report.texture)?;
    let table = report.to_table();
    fs::write(sibling(&a.out, "txt"), &table)?;
    if let Some(dir) = &a.streams_dir {
        fs::create_dir_all(dir)?;
        for e in &encodes {
            let mode = if e.texture_mode { "texture" } else { "baseline" };
            fs::write(dir.join(format!("{}.{mode}.q{}.txc1", stem_of(&a.input.input), e.q_level)), &e.bytes)?;
        }
    }
    print!("{table}");
    io::stdout().flush()?;
    Ok(())
}

fn bd(a: &BdArgs) -> Result<()> {
    let curve = |p: &Path| -> Result<RdCurve> {
        serde_json::from_reader(open(p)?).with_context(|| format!("reading RD curve {}", p.display()))
    };
    let (base, test) = (curve(&a.baseline)?, curve(&a.test)?);
    let method = a.method.into();
    println!("BD-RATE {} %", bd_rate(&base, &test, method)?);
    println!("BD-PSNR {} dB", bd_psnr(&base, &test, method)?);
    Ok(())
}
