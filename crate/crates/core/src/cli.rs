//! Command line front end. Every stage reads and writes files so pipelines
//! can be assembled from the shell.

use std::ffi::OsString;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use clap::{Args, Parser, Subcommand};
use serde::Serialize;

use crate::dataset_io::{
    load_annotations, load_maps, render_mask, save_annotations, save_maps, synth_scene, write_atomic, AnnotationFile,
    ClassConfig, SceneSpec,
};
use crate::detector_decoder::{decode_detections, DecodeConfig};
use crate::error::{Error, Result};
use crate::evaluator::{evaluate, EvalReport, DEFAULT_THRESHOLDS};
use crate::geometry::{rotated_iou, RBox};
use crate::postprocess::rotated_nms;
use crate::selftest;
use crate::size_prior::refine_scores;
use crate::target_encoder::{encode_targets, EncodingConfig};
use crate::tiling::{
    make_slices, merge_detections, SliceSpec, DEFAULT_MODEL_SIZE, DEFAULT_RNMS_THRESHOLD, DEFAULT_SLICE_SIZE,
    DEFAULT_STRIDE,
};

/// Environment variable naming the default class config file.
pub const CLASS_CONFIG_ENV: &str = "CHPDET_CLASS_CONFIG";
/// Sidecar written by `encode` next to the tensor files.
pub const META_FILE: &str = "meta.json";

#[derive(Debug, Parser)]
#[command(
    name = "chpdet",
    version,
    about = "Center-head-point oriented ship detection toolkit"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Generate a seeded synthetic scene as an annotation file.
    Synth(SynthArgs),
    /// Encode annotations into target tensor files.
    Encode(EncodeArgs),
    /// Decode tensor files into detections.
    Decode(DecodeArgs),
    /// Rotated non-maximum suppression.
    Nms(NmsArgs),
    /// Rescore detections with the ship-length prior.
    Refine(RefineArgs),
    /// Plan slices, split annotations into slices, or merge slice detections.
    Tile {
        #[command(subcommand)]
        command: TileCommand,
    },
    /// Evaluate detections against ground truth.
    Eval(EvalArgs),
    /// IoU of two rotated boxes given as cx,cy,w,h,theta.
    Iou(IouArgs),
    /// Run the built-in oracle checks.
    Selftest(SelftestArgs),
}

#[derive(Debug, Subcommand)]
enum TileCommand {
    /// Write the slice grid for an image size.
    Plan(TilePlanArgs),
    /// Cut an annotation file into per-slice files in model coordinates.
    Split(TileSplitArgs),
    /// Map per-slice detection files back to the image and apply rotated NMS.
    Merge(TileMergeArgs),
}

#[derive(Debug, Args, Serialize)]
struct ClassArgs {
    /// Class config JSON; defaults to the built-in table.
    #[arg(long = "classes", env = CLASS_CONFIG_ENV)]
    #[serde(serialize_with = "class_source")]
    classes: Option<PathBuf>,
}

fn class_source<S: serde::Serializer>(path: &Option<PathBuf>, s: S) -> std::result::Result<S::Ok, S::Error> {
    match path {
        Some(p) => s.serialize_str(&p.display().to_string()),
        None => s.serialize_str("builtin"),
    }
}

impl ClassArgs {
    fn load(&self) -> Result<ClassConfig> {
        match &self.classes {
            Some(p) => ClassConfig::load(p),
            None => Ok(ClassConfig::default()),
        }
    }
}

#[derive(Debug, Args, Serialize)]
struct SynthArgs {
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long, default_value_t = 512)]
    width: usize,
    #[arg(long, default_value_t = 512)]
    height: usize,
    #[arg(long, default_value_t = 3)]
    min_ships: usize,
    #[arg(long, default_value_t = 8)]
    max_ships: usize,
    #[arg(long, default_value_t = 0.15)]
    min_aspect: f64,
    #[arg(long, default_value_t = 0.3)]
    max_aspect: f64,
    /// Largest IoU allowed between two ships.
    #[arg(long, default_value_t = 0.0)]
    max_iou: f64,
    /// Minimum pixel distance between centers and between head points.
    #[arg(long, default_value_t = 16.0)]
    min_gap: f64,
    #[arg(long, default_value_t = 1000)]
    retries: usize,
    #[arg(long)]
    out: PathBuf,
    /// Also write a PGM mask of the scene.
    #[arg(long)]
    mask: Option<PathBuf>,
    #[command(flatten)]
    #[serde(flatten)]
    classes: ClassArgs,
}

#[derive(Debug, Args, Serialize)]
struct EncodeArgs {
    #[arg(long)]
    input: PathBuf,
    /// Output directory for the six tensor files.
    #[arg(long)]
    out: PathBuf,
    #[arg(long, default_value_t = 4)]
    stride: usize,
    #[arg(long, default_value_t = 1.2)]
    alpha: f64,
    #[arg(long, default_value_t = 0.7)]
    min_overlap: f64,
    #[command(flatten)]
    #[serde(flatten)]
    classes: ClassArgs,
}

#[derive(Debug, Args, Serialize)]
struct DecodeArgs {
    /// Directory holding the six tensor files.
    #[arg(long)]
    input: PathBuf,
    #[arg(long)]
    out: PathBuf,
    #[arg(long, default_value_t = 4)]
    stride: usize,
    #[arg(long, default_value_t = 100)]
    top_k: usize,
    #[arg(long, default_value_t = 0.1)]
    head_threshold: f64,
    #[arg(long, default_value_t = 0.0)]
    score_floor: f64,
    #[command(flatten)]
    #[serde(flatten)]
    classes: ClassArgs,
}

#[derive(Debug, Args, Serialize)]
struct NmsArgs {
    #[arg(long)]
    input: PathBuf,
    #[arg(long)]
    out: PathBuf,
    #[arg(long, default_value_t = DEFAULT_RNMS_THRESHOLD)]
    threshold: f64,
    #[arg(long)]
    class_agnostic: bool,
    #[command(flatten)]
    #[serde(flatten)]
    classes: ClassArgs,
}

#[derive(Debug, Args, Serialize)]
struct RefineArgs {
    #[arg(long)]
    input: PathBuf,
    #[arg(long)]
    out: PathBuf,
    /// Overrides the config's length spread coefficient.
    #[arg(long)]
    lambda: Option<f64>,
    #[command(flatten)]
    #[serde(flatten)]
    classes: ClassArgs,
}

#[derive(Debug, Args, Serialize)]
struct SliceArgs {
    #[arg(long, default_value_t = DEFAULT_SLICE_SIZE)]
    slice: usize,
    #[arg(long, default_value_t = DEFAULT_STRIDE)]
    stride: usize,
    #[arg(long, default_value_t = DEFAULT_MODEL_SIZE)]
    model: usize,
}

#[derive(Debug, Args, Serialize)]
struct TilePlanArgs {
    #[arg(long)]
    width: usize,
    #[arg(long)]
    height: usize,
    #[command(flatten)]
    #[serde(flatten)]
    slices: SliceArgs,
    #[arg(long)]
    out: PathBuf,
}

#[derive(Debug, Args, Serialize)]
struct TileSplitArgs {
    #[arg(long)]
    input: PathBuf,
    /// Directory for `<image_id>_<index>.json` slice files.
    #[arg(long)]
    out_dir: PathBuf,
    #[command(flatten)]
    #[serde(flatten)]
    slices: SliceArgs,
    #[command(flatten)]
    #[serde(flatten)]
    classes: ClassArgs,
}

#[derive(Debug, Args, Serialize)]
struct TileMergeArgs {
    /// Slice detection files carrying slice metadata.
    #[arg(long, num_args = 1.., required = true)]
    inputs: Vec<PathBuf>,
    #[arg(long)]
    out: PathBuf,
    #[arg(long, default_value_t = DEFAULT_RNMS_THRESHOLD)]
    threshold: f64,
    #[arg(long)]
    class_agnostic: bool,
    #[command(flatten)]
    #[serde(flatten)]
    classes: ClassArgs,
}

#[derive(Debug, Args, Serialize)]
struct EvalArgs {
    /// Detection files, paired with ground truth by image id.
    #[arg(long, num_args = 1.., required = true)]
    dets: Vec<PathBuf>,
    #[arg(long, num_args = 1.., required = true)]
    gt: Vec<PathBuf>,
    /// Directory for report.txt, report.json and PR curve CSVs.
    #[arg(long)]
    out_dir: PathBuf,
    #[arg(long, value_delimiter = ',', default_values_t = DEFAULT_THRESHOLDS.to_vec())]
    thresholds: Vec<f64>,
    #[arg(long, default_value_t = 0.5)]
    bda_iou: f64,
    #[command(flatten)]
    #[serde(flatten)]
    classes: ClassArgs,
}

/// `cx,cy,w,h,theta` in pixels and degrees.
#[derive(Debug, Clone, Copy, Serialize)]
struct BoxLiteral([f64; 5]);

impl FromStr for BoxLiteral {
    type Err = String;

    fn from_str(s: &str) -> std::result::Result<Self, String> {
        let parts: Vec<&str> = s.split(',').map(str::trim).collect();
        if parts.len() != 5 {
            return Err(format!("expected cx,cy,w,h,theta, got `{s}`"));
        }
        let mut v = [0.0; 5];
        for (slot, p) in v.iter_mut().zip(&parts) {
            *slot = p.parse().map_err(|_| format!("`{p}` is not a number"))?;
        }
        Ok(Self(v))
    }
}

#[derive(Debug, Args, Serialize)]
struct IouArgs {
    #[arg(long, allow_hyphen_values = true)]
    a: BoxLiteral,
    #[arg(long, allow_hyphen_values = true)]
    b: BoxLiteral,
}

#[derive(Debug, Args, Serialize)]
struct SelftestArgs {
    #[arg(long, default_value_t = 0)]
    seed: u64,
}

#[derive(Debug, Serialize, serde::Deserialize)]
struct TensorMeta {
    image_id: String,
    width: usize,
    height: usize,
    gsd: f64,
    stride: usize,
}

fn print_config<T: Serialize>(command: &str, args: &T) {
    let json = serde_json::to_string(args).expect("arguments serialize");
    eprintln!("chpdet {command} config: {json}");
}

fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<()> {
    let mut text = serde_json::to_string_pretty(value).expect("value serializes");
    text.push('\n');
    write_atomic(path, text.as_bytes())
}

fn rewrite_boxes(
    file: &AnnotationFile,
    boxes: &[crate::geometry::ChpBox],
    classes: &ClassConfig,
) -> Result<AnnotationFile> {
    let mut out = AnnotationFile::from_boxes(
        file.image_id.clone(),
        file.width,
        file.height,
        file.gsd,
        boxes,
        classes,
        true,
    )?;
    out.slice = file.slice;
    Ok(out)
}

fn synth(args: &SynthArgs) -> Result<()> {
    let classes = args.classes.load()?;
    let spec = SceneSpec {
        seed: args.seed,
        width: args.width,
        height: args.height,
        count: (args.min_ships, args.max_ships),
        aspect: (args.min_aspect, args.max_aspect),
        max_pair_iou: args.max_iou,
        min_keypoint_gap: args.min_gap,
        max_retries: args.retries,
    };
    let scene = synth_scene(&spec, &classes)?;
    save_annotations(&args.out, &scene)?;
    if let Some(mask) = &args.mask {
        write_atomic(mask, &render_mask(&scene, &classes)?)?;
    }
    println!("wrote {} ships to {}", scene.objects.len(), args.out.display());
    Ok(())
}

fn encode(args: &EncodeArgs) -> Result<()> {
    let classes = args.classes.load()?;
    let ann = load_annotations(&args.input, &classes)?;
    let cfg = EncodingConfig {
        stride: args.stride,
        alpha: args.alpha,
        num_classes: classes.len(),
        gaussian_min_overlap: args.min_overlap,
        input_w: ann.width,
        input_h: ann.height,
    };
    let targets = encode_targets(&ann.boxes(&classes)?, &cfg)?;
    save_maps(&args.out, &targets.maps)?;
    let meta = TensorMeta {
        image_id: ann.image_id.clone(),
        width: ann.width,
        height: ann.height,
        gsd: ann.gsd,
        stride: args.stride,
    };
    write_json(&args.out.join(META_FILE), &meta)?;
    println!("encoded {} objects into {}", targets.num_objects(), args.out.display());
    Ok(())
}

fn decode(args: &DecodeArgs) -> Result<()> {
    let classes = args.classes.load()?;
    let maps = load_maps(&args.input)?;
    if maps.num_classes() != classes.len() {
        return Err(Error::ShapeMismatch(format!(
            "maps have {} classes, config has {}",
            maps.num_classes(),
            classes.len()
        )));
    }
    let cfg = DecodeConfig {
        top_k: args.top_k,
        head_score_threshold: args.head_threshold,
        score_floor: args.score_floor,
        stride: args.stride,
    };
    let dets = decode_detections(&maps, &cfg)?;
    let meta_path = args.input.join(META_FILE);
    let (rows, cols) = maps.grid();
    let meta = if meta_path.exists() {
        let text = std::fs::read_to_string(&meta_path).map_err(|e| Error::io(&meta_path, e))?;
        serde_json::from_str(&text).map_err(|e| Error::Parse {
            path: meta_path.clone(),
            message: e.to_string(),
        })?
    } else {
        TensorMeta {
            image_id: "decoded".into(),
            width: cols * args.stride,
            height: rows * args.stride,
            gsd: classes.gsd,
            stride: args.stride,
        }
    };
    let out = AnnotationFile::from_boxes(meta.image_id, meta.width, meta.height, meta.gsd, &dets, &classes, true)?;
    save_annotations(&args.out, &out)?;
    println!("decoded {} detections to {}", dets.len(), args.out.display());
    Ok(())
}

fn nms(args: &NmsArgs) -> Result<()> {
    let classes = args.classes.load()?;
    let file = load_annotations(&args.input, &classes)?;
    let kept = rotated_nms(&file.boxes(&classes)?, args.threshold, args.class_agnostic);
    save_annotations(&args.out, &rewrite_boxes(&file, &kept, &classes)?)?;
    println!("kept {} of {} detections", kept.len(), file.objects.len());
    Ok(())
}

fn refine(args: &RefineArgs) -> Result<()> {
    let classes = args.classes.load()?;
    let file = load_annotations(&args.input, &classes)?;
    let mut table = classes.length_table()?;
    table.gsd = file.gsd;
    if let Some(lambda) = args.lambda {
        table.lambda = lambda;
    }
    let refined = refine_scores(&file.boxes(&classes)?, &table)?;
    save_annotations(&args.out, &rewrite_boxes(&file, &refined, &classes)?)?;
    println!("rescored {} detections", refined.len());
    Ok(())
}

fn tile_plan(args: &TilePlanArgs) -> Result<()> {
    let specs = make_slices(
        args.width,
        args.height,
        args.slices.slice,
        args.slices.stride,
        args.slices.model,
    )?;
    write_json(&args.out, &specs)?;
    println!("{} slices", specs.len());
    Ok(())
}

fn tile_split(args: &TileSplitArgs) -> Result<()> {
    let classes = args.classes.load()?;
    let file = load_annotations(&args.input, &classes)?;
    let boxes = file.boxes(&classes)?;
    let specs = make_slices(
        file.width,
        file.height,
        args.slices.slice,
        args.slices.stride,
        args.slices.model,
    )?;
    std::fs::create_dir_all(&args.out_dir).map_err(|e| Error::io(&args.out_dir, e))?;
    for (i, spec) in specs.iter().enumerate() {
        let inside: Vec<_> = boxes
            .iter()
            .filter(|b| b.cx >= 0.0 && b.cy >= 0.0 && spec.covers(b.cx as usize, b.cy as usize))
            .map(|b| spec.to_model(b))
            .collect();
        let mut out = rewrite_boxes(&file, &inside, &classes)?;
        out.slice = Some(*spec);
        save_annotations(&args.out_dir.join(format!("{}_{i:03}.json", file.image_id)), &out)?;
    }
    println!("wrote {} slice files to {}", specs.len(), args.out_dir.display());
    Ok(())
}

fn tile_merge(args: &TileMergeArgs) -> Result<()> {
    let classes = args.classes.load()?;
    let mut per_slice: Vec<(SliceSpec, Vec<_>)> = Vec::new();
    let mut first: Option<AnnotationFile> = None;
    for path in &args.inputs {
        let file = load_annotations(path, &classes)?;
        let spec = file.slice.ok_or_else(|| Error::Parse {
            path: path.clone(),
            message: "slice metadata required for merging".into(),
        })?;
        per_slice.push((spec, file.boxes(&classes)?));
        first.get_or_insert(file);
    }
    let first = first.expect("at least one input");
    let merged = merge_detections(&per_slice, args.threshold, args.class_agnostic);
    let mut out = rewrite_boxes(&first, &merged, &classes)?;
    out.slice = None;
    save_annotations(&args.out, &out)?;
    println!("merged into {} detections", merged.len());
    Ok(())
}

fn pr_csv(report: &EvalReport, class: usize, t: usize) -> String {
    let mut csv = String::from("rank,score,recall,precision\n");
    for (i, p) in report.per_class[&class].pr[t].iter().enumerate() {
        csv.push_str(&format!("{},{},{},{}\n", i + 1, p.score, p.recall, p.precision));
    }
    csv
}

fn eval(args: &EvalArgs) -> Result<()> {
    let classes = args.classes.load()?;
    let mut gts = Vec::new();
    let mut ids = Vec::new();
    for path in &args.gt {
        let file = load_annotations(path, &classes)?;
        if ids.contains(&file.image_id) {
            return Err(Error::InvalidArgument(format!(
                "duplicate ground truth image id `{}`",
                file.image_id
            )));
        }
        ids.push(file.image_id.clone());
        gts.push(file.boxes(&classes)?);
    }
    let mut dets = vec![Vec::new(); gts.len()];
    for path in &args.dets {
        let file = load_annotations(path, &classes)?;
        let idx = ids
            .iter()
            .position(|id| *id == file.image_id)
            .ok_or_else(|| Error::InvalidArgument(format!("detections for unknown image `{}`", file.image_id)))?;
        dets[idx].extend(file.boxes(&classes)?);
    }
    let report = evaluate(&dets, &gts, &args.thresholds, args.bda_iou);

    std::fs::create_dir_all(&args.out_dir).map_err(|e| Error::io(&args.out_dir, e))?;
    let mut text = String::new();
    for (id, name) in classes.classes.iter().enumerate() {
        if report.per_class.contains_key(&id) {
            text.push_str(&format!("class {id}: {}\n", name.name));
        }
    }
    text.push_str(&report.to_string());
    write_atomic(&args.out_dir.join("report.txt"), text.as_bytes())?;
    write_json(&args.out_dir.join("report.json"), &report)?;
    for &class in report.per_class.keys() {
        let name = classes.name_of(class)?;
        for (t, thr) in report.thresholds.iter().enumerate() {
            let path = args
                .out_dir
                .join(format!("pr_{name}_iou{:02}.csv", (thr * 100.0).round() as i64));
            write_atomic(&path, pr_csv(&report, class, t).as_bytes())?;
        }
    }
    print!("{text}");
    Ok(())
}

fn iou(args: &IouArgs) -> Result<()> {
    let to_rbox = |l: &BoxLiteral| RBox::new(l.0[0], l.0[1], l.0[2], l.0[3], l.0[4]);
    let value = rotated_iou(&to_rbox(&args.a)?, &to_rbox(&args.b)?);
    println!("{value:.6}");
    Ok(())
}

fn run_selftest(args: &SelftestArgs) -> Result<bool> {
    let checks = selftest::run_all(args.seed);
    for c in &checks {
        println!("{} {}: {}", if c.passed { "PASS" } else { "FAIL" }, c.name, c.detail);
    }
    Ok(checks.iter().all(|c| c.passed))
}

fn dispatch(command: Command) -> Result<bool> {
    match command {
        Command::Synth(a) => {
            print_config("synth", &a);
            synth(&a).map(|_| true)
        }
        Command::Encode(a) => {
            print_config("encode", &a);
            encode(&a).map(|_| true)
        }
        Command::Decode(a) => {
            print_config("decode", &a);
            decode(&a).map(|_| true)
        }
        Command::Nms(a) => {
            print_config("nms", &a);
            nms(&a).map(|_| true)
        }
        Command::Refine(a) => {
            print_config("refine", &a);
            refine(&a).map(|_| true)
        }
        Command::Tile { command } => match command {
            TileCommand::Plan(a) => {
                print_config("tile plan", &a);
                tile_plan(&a).map(|_| true)
            }
            TileCommand::Split(a) => {
                print_config("tile split", &a);
                tile_split(&a).map(|_| true)
            }
            TileCommand::Merge(a) => {
                print_config("tile merge", &a);
                tile_merge(&a).map(|_| true)
            }
        },
        Command::Eval(a) => {
            print_config("eval", &a);
            eval(&a).map(|_| true)
        }
        Command::Iou(a) => {
            print_config("iou", &a);
            iou(&a).map(|_| true)
        }
        Command::Selftest(a) => {
            print_config("selftest", &a);
            run_selftest(&a)
        }
    }
}

/// Parses `args` (program name first) and runs the subcommand.
///
/// Returns the process exit code: 0 on success, 1 on a runtime error or a
/// failed self test, 2 on a usage error.
pub fn run<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() { 2 } else { 0 };
            let _ = e.print();
            return code;
        }
    };
    match dispatch(cli.command) {
        Ok(true) => 0,
        Ok(false) => 1,
        Err(e) => {
            eprintln!("error: {e}");
            1
        }
    }
}
