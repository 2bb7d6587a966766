//! File formats (annotations, class config, tensors) and the seeded
//! synthetic scene generator used as ground truth in tests.

use std::collections::BTreeMap;
use std::fs;
use std::io::Write;
use std::path::Path;

use ndarray::Array3;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geometry::{rbox_to_chp, rbox_to_quad, rotated_iou, ChpBox, Point, RBox};
use crate::maps::{DetectionMaps, MAP_NAMES};
use crate::size_prior::ClassLengthTable;
use crate::tiling::SliceSpec;

/// Writes through a temporary file in the destination directory so readers
/// never see a partial file.
pub fn write_atomic(path: &Path, bytes: &[u8]) -> Result<()> {
    let dir = match path.parent() {
        Some(p) if !p.as_os_str().is_empty() => p,
        _ => Path::new("."),
    };
    let mut tmp = tempfile::NamedTempFile::new_in(dir).map_err(|e| Error::io(dir, e))?;
    tmp.write_all(bytes).map_err(|e| Error::io(path, e))?;
    tmp.persist(path).map_err(|e| Error::io(path, e.error))?;
    Ok(())
}

fn read_text(path: &Path) -> Result<String> {
    fs::read_to_string(path).map_err(|e| Error::io(path, e))
}

fn parse_error(path: &Path, err: serde_json::Error) -> Error {
    Error::Parse {
        path: path.to_path_buf(),
        message: format!("line {} column {}: {err}", err.line(), err.column()),
    }
}

// ---------------------------------------------------------------------------
// Class configuration

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ClassEntry {
    pub name: String,
    /// Meters.
    pub mean_length: f64,
}

/// Ordered class list; a class id is its position.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ClassConfig {
    pub classes: Vec<ClassEntry>,
    #[serde(default = "default_lambda")]
    pub lambda: f64,
    #[serde(default = "default_gsd")]
    pub gsd: f64,
}

fn default_lambda() -> f64 {
    0.2
}

fn default_gsd() -> f64 {
    1.0
}

impl Default for ClassConfig {
    /// One real class (Ticonderoga-class cruiser, 172.8 m) and three synthetic ones.
    fn default() -> Self {
        let entry = |name: &str, mean_length: f64| ClassEntry {
            name: name.to_string(),
            mean_length,
        };
        Self {
            classes: vec![
                entry("ticonderoga", 172.8),
                entry("synthetic_small", 60.0),
                entry("synthetic_medium", 95.0),
                entry("synthetic_large", 130.0),
            ],
            lambda: default_lambda(),
            gsd: default_gsd(),
        }
    }
}

impl ClassConfig {
    pub fn validate(&self) -> Result<()> {
        if self.classes.is_empty() {
            return Err(Error::InvalidArgument("class config lists no classes".into()));
        }
        for (i, c) in self.classes.iter().enumerate() {
            if self.classes[..i].iter().any(|o| o.name == c.name) {
                return Err(Error::InvalidArgument(format!("duplicate class `{}`", c.name)));
            }
        }
        self.length_table().map(|_| ())
    }

    pub fn len(&self) -> usize {
        self.classes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.classes.is_empty()
    }

    pub fn id_of(&self, name: &str) -> Result<usize> {
        self.classes
            .iter()
            .position(|c| c.name == name)
            .ok_or_else(|| Error::UnknownClass(name.to_string()))
    }

    pub fn name_of(&self, id: usize) -> Result<&str> {
        self.classes
            .get(id)
            .map(|c| c.name.as_str())
            .ok_or_else(|| Error::UnknownClass(format!("class id {id}")))
    }

    pub fn length_table(&self) -> Result<ClassLengthTable> {
        let means: BTreeMap<usize, f64> = self
            .classes
            .iter()
            .enumerate()
            .map(|(i, c)| (i, c.mean_length))
            .collect();
        ClassLengthTable::new(means, self.lambda, self.gsd)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let cfg: Self = serde_json::from_str(&read_text(path)?).map_err(|e| parse_error(path, e))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        let text = serde_json::to_string_pretty(self).expect("class config serializes");
        write_atomic(path, format!("{text}\n").as_bytes())
    }
}

// ---------------------------------------------------------------------------
// Annotations

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AnnotatedObject {
    pub class: String,
    pub cx: f64,
    pub cy: f64,
    pub w: f64,
    pub h: f64,
    pub hx: f64,
    pub hy: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub score: Option<f64>,
}

/// One image's annotations or detections.
#[derive(Debug, Clone, PartialEq)]
pub struct AnnotationFile {
    pub image_id: String,
    pub width: usize,
    pub height: usize,
    pub gsd: f64,
    /// Present when the coordinates are relative to a model-resolution slice.
    pub slice: Option<SliceSpec>,
    pub objects: Vec<AnnotatedObject>,
}

#[derive(Serialize, Deserialize)]
struct RawAnnotationFile {
    image_id: String,
    width: usize,
    height: usize,
    gsd: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    slice: Option<SliceSpec>,
    #[serde(default)]
    objects: Vec<AnnotatedObject>,
}

impl AnnotationFile {
    pub fn from_boxes(
        image_id: impl Into<String>,
        width: usize,
        height: usize,
        gsd: f64,
        boxes: &[ChpBox],
        classes: &ClassConfig,
        with_scores: bool,
    ) -> Result<Self> {
        let objects = boxes
            .iter()
            .map(|b| {
                Ok(AnnotatedObject {
                    class: classes.name_of(b.class_id)?.to_string(),
                    cx: b.cx,
                    cy: b.cy,
                    w: b.w,
                    h: b.h,
                    hx: b.hx,
                    hy: b.hy,
                    score: with_scores.then_some(b.score),
                })
            })
            .collect::<Result<Vec<_>>>()?;
        Ok(Self {
            image_id: image_id.into(),
            width,
            height,
            gsd,
            slice: None,
            objects,
        })
    }

    /// Boxes with resolved class ids; a missing score reads as 1.
    pub fn boxes(&self, classes: &ClassConfig) -> Result<Vec<ChpBox>> {
        self.objects
            .iter()
            .map(|o| {
                Ok(ChpBox {
                    cx: o.cx,
                    cy: o.cy,
                    w: o.w,
                    h: o.h,
                    hx: o.hx,
                    hy: o.hy,
                    class_id: classes.id_of(&o.class)?,
                    score: o.score.unwrap_or(1.0),
                })
            })
            .collect()
    }

    pub fn validate(&self, classes: &ClassConfig) -> Result<()> {
        if !(self.gsd > 0.0) {
            return Err(Error::InvalidArgument(format!(
                "gsd must be positive, got {}",
                self.gsd
            )));
        }
        let (w, h) = match self.slice {
            Some(s) => (s.model_size as f64, s.model_size as f64),
            None => (self.width as f64, self.height as f64),
        };
        for (i, b) in self.boxes(classes)?.iter().enumerate() {
            b.validate()
                .map_err(|e| Error::InvalidBox(format!("object {i}: {e}")))?;
            if !(b.cx >= 0.0 && b.cy >= 0.0 && b.cx < w && b.cy < h) {
                return Err(Error::OutOfBounds(format!(
                    "object {i} center ({}, {}) outside {w}x{h}",
                    b.cx, b.cy
                )));
            }
        }
        Ok(())
    }

    pub fn to_json(&self) -> String {
        let raw = RawAnnotationFile {
            image_id: self.image_id.clone(),
            width: self.width,
            height: self.height,
            gsd: Some(self.gsd),
            slice: self.slice,
            objects: self.objects.clone(),
        };
        let mut text = serde_json::to_string_pretty(&raw).expect("annotation serializes");
        text.push('\n');
        text
    }

    pub fn from_json(text: &str, path: &Path, classes: &ClassConfig) -> Result<Self> {
        let raw: RawAnnotationFile = serde_json::from_str(text).map_err(|e| parse_error(path, e))?;
        let gsd = raw.gsd.ok_or_else(|| Error::Parse {
            path: path.to_path_buf(),
            message: "gsd required".into(),
        })?;
        let file = Self {
            image_id: raw.image_id,
            width: raw.width,
            height: raw.height,
            gsd,
            slice: raw.slice,
            objects: raw.objects,
        };
        file.validate(classes).map_err(|e| Error::Parse {
            path: path.to_path_buf(),
            message: e.to_string(),
        })?;
        Ok(file)
    }
}

pub fn load_annotations(path: &Path, classes: &ClassConfig) -> Result<AnnotationFile> {
    AnnotationFile::from_json(&read_text(path)?, path, classes)
}

pub fn save_annotations(path: &Path, file: &AnnotationFile) -> Result<()> {
    write_atomic(path, file.to_json().as_bytes())
}

// ---------------------------------------------------------------------------
// Tensor files

pub const TENSOR_MAGIC: &[u8; 4] = b"CHPT";
pub const TENSOR_VERSION: u16 = 1;
pub const DTYPE_F32_LE: u8 = 0;

/// A dense row-major `f32` tensor.
#[derive(Debug, Clone, PartialEq)]
pub struct TensorFile {
    pub dims: Vec<u32>,
    pub data: Vec<f32>,
}

impl TensorFile {
    pub fn from_array3(a: &Array3<f64>) -> Self {
        let (c, h, w) = a.dim();
        Self {
            dims: vec![c as u32, h as u32, w as u32],
            data: a.iter().map(|&v| v as f32).collect(),
        }
    }

    pub fn to_array3(&self) -> Result<Array3<f64>> {
        let &[c, h, w] = self.dims.as_slice() else {
            return Err(Error::TensorFormat(format!("expected rank 3, got {:?}", self.dims)));
        };
        let data = self.data.iter().map(|&v| f64::from(v)).collect();
        Array3::from_shape_vec((c as usize, h as usize, w as usize), data)
            .map_err(|e| Error::TensorFormat(e.to_string()))
    }

    pub fn to_bytes(&self) -> Result<Vec<u8>> {
        let rank = u8::try_from(self.dims.len())
            .map_err(|_| Error::TensorFormat(format!("rank {} too large", self.dims.len())))?;
        let expected: usize = self.dims.iter().map(|&d| d as usize).product();
        if expected != self.data.len() {
            return Err(Error::TensorFormat(format!(
                "dims {:?} need {expected} values, have {}",
                self.dims,
                self.data.len()
            )));
        }
        let mut out = Vec::with_capacity(8 + 4 * self.dims.len() + 4 * self.data.len());
        out.extend_from_slice(TENSOR_MAGIC);
        out.extend_from_slice(&TENSOR_VERSION.to_le_bytes());
        out.push(DTYPE_F32_LE);
        out.push(rank);
        for d in &self.dims {
            out.extend_from_slice(&d.to_le_bytes());
        }
        for v in &self.data {
            out.extend_from_slice(&v.to_le_bytes());
        }
        Ok(out)
    }

    pub fn from_bytes(bytes: &[u8]) -> Result<Self> {
        if bytes.len() < 8 || &bytes[..4] != TENSOR_MAGIC {
            return Err(Error::TensorFormat("missing CHPT magic".into()));
        }
        let version = u16::from_le_bytes([bytes[4], bytes[5]]);
        if version != TENSOR_VERSION {
            return Err(Error::TensorFormat(format!("unsupported version {version}")));
        }
        if bytes[6] != DTYPE_F32_LE {
            return Err(Error::TensorFormat(format!("unsupported dtype code {}", bytes[6])));
        }
        let rank = bytes[7] as usize;
        let header = 8 + 4 * rank;
        if bytes.len() < header {
            return Err(Error::TensorFormat("truncated dims".into()));
        }
        let dims: Vec<u32> = bytes[8..header]
            .chunks_exact(4)
            .map(|c| u32::from_le_bytes(c.try_into().unwrap()))
            .collect();
        let count: usize = dims.iter().map(|&d| d as usize).product();
        if bytes.len() != header + 4 * count {
            return Err(Error::TensorFormat(format!(
                "payload is {} bytes, dims {:?} need {}",
                bytes.len() - header,
                dims,
                4 * count
            )));
        }
        let data = bytes[header..]
            .chunks_exact(4)
            .map(|c| f32::from_le_bytes(c.try_into().unwrap()))
            .collect();
        Ok(Self { dims, data })
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        write_atomic(path, &self.to_bytes()?)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let bytes = fs::read(path).map_err(|e| Error::io(path, e))?;
        Self::from_bytes(&bytes).map_err(|e| Error::Parse {
            path: path.to_path_buf(),
            message: e.to_string(),
        })
    }
}

/// Writes the six maps as `<dir>/<name>.chpt`.
pub fn save_maps(dir: &Path, maps: &DetectionMaps) -> Result<()> {
    fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    for name in MAP_NAMES {
        let arr = maps.by_name(name).expect("known map name");
        TensorFile::from_array3(arr).save(&dir.join(format!("{name}.chpt")))?;
    }
    Ok(())
}

pub fn load_maps(dir: &Path) -> Result<DetectionMaps> {
    let mut parts = Vec::with_capacity(6);
    for name in MAP_NAMES {
        parts.push(TensorFile::load(&dir.join(format!("{name}.chpt")))?.to_array3()?);
    }
    let parts: [Array3<f64>; 6] = parts.try_into().expect("six maps");
    DetectionMaps::from_parts(parts)
}

// ---------------------------------------------------------------------------
// Synthetic scenes

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SceneSpec {
    pub seed: u64,
    pub width: usize,
    pub height: usize,
    /// Inclusive ship count range.
    pub count: (usize, usize),
    /// Width-to-length ratio range.
    pub aspect: (f64, f64),
    /// Largest IoU allowed between any two ships.
    pub max_pair_iou: f64,
    /// Minimum distance in pixels between any two centers and any two head points.
    pub min_keypoint_gap: f64,
    /// Placement attempts per ship.
    pub max_retries: usize,
}

impl SceneSpec {
    pub fn new(seed: u64) -> Self {
        Self {
            seed,
            width: 512,
            height: 512,
            count: (3, 8),
            aspect: (0.15, 0.3),
            max_pair_iou: 0.0,
            min_keypoint_gap: 16.0,
            max_retries: 1000,
        }
    }

    pub fn validate(&self) -> Result<()> {
        let ok = self.width > 0
            && self.height > 0
            && self.count.0 <= self.count.1
            && self.aspect.0 > 0.0
            && self.aspect.0 <= self.aspect.1
            && (0.0..=1.0).contains(&self.max_pair_iou)
            && self.min_keypoint_gap >= 0.0
            && self.max_retries > 0;
        if ok {
            Ok(())
        } else {
            Err(Error::InvalidArgument(format!("invalid scene spec {self:?}")))
        }
    }
}

/// Draws a length from `Normal(mean, (lambda·mean)²)` truncated to positive values.
pub fn sample_length<R: Rng + ?Sized>(rng: &mut R, mean: f64, lambda: f64) -> f64 {
    let normal = Normal::new(mean, lambda * mean).expect("positive spread");
    loop {
        let l = normal.sample(rng);
        if l > 0.0 {
            return l;
        }
    }
}

pub fn synth_scene(spec: &SceneSpec, classes: &ClassConfig) -> Result<AnnotationFile> {
    spec.validate()?;
    classes.validate()?;
    let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
    let n = rng.random_range(spec.count.0..=spec.count.1);
    let (img_w, img_h) = (spec.width as f64, spec.height as f64);
    let mut placed: Vec<(RBox, ChpBox)> = Vec::with_capacity(n);

    for _ in 0..n {
        let mut done = false;
        for _ in 0..spec.max_retries {
            let class_id = rng.random_range(0..classes.len());
            let length = sample_length(&mut rng, classes.classes[class_id].mean_length, classes.lambda) / classes.gsd;
            let width = length * rng.random_range(spec.aspect.0..=spec.aspect.1);
            let theta = rng.random_range(0.0..360.0);
            let (s, c) = f64::to_radians(theta).sin_cos();
            let ex = (length / 2.0 * s).abs() + (width / 2.0 * c).abs();
            let ey = (length / 2.0 * c).abs() + (width / 2.0 * s).abs();
            if 2.0 * ex >= img_w || 2.0 * ey >= img_h {
                continue;
            }
            let cx = rng.random_range(ex..img_w - ex);
            let cy = rng.random_range(ey..img_h - ey);
            let rbox = RBox::new(cx, cy, width, length, theta)?;
            let chp = rbox_to_chp(&rbox, class_id, 1.0);
            let inside = rbox_to_quad(&rbox)
                .0
                .iter()
                .all(|p| p.x >= 0.0 && p.y >= 0.0 && p.x < img_w && p.y < img_h);
            let clear = placed.iter().all(|(other_r, other)| {
                rotated_iou(&rbox, other_r) <= spec.max_pair_iou
                    && Point::new(cx, cy).dist(Point::new(other.cx, other.cy)) >= spec.min_keypoint_gap
                    && Point::new(chp.hx, chp.hy).dist(Point::new(other.hx, other.hy)) >= spec.min_keypoint_gap
            });
            if inside && clear {
                placed.push((rbox, chp));
                done = true;
                break;
            }
        }
        if !done {
            return Err(Error::Placement {
                achieved: placed.len(),
                requested: n,
            });
        }
    }

    let boxes: Vec<ChpBox> = placed.into_iter().map(|(_, b)| b).collect();
    AnnotationFile::from_boxes(
        format!("synth_{:016x}", spec.seed),
        spec.width,
        spec.height,
        classes.gsd,
        &boxes,
        classes,
        false,
    )
}

/// Binary PGM with ship footprints at 255 and head points at 128.
pub fn render_mask(file: &AnnotationFile, classes: &ClassConfig) -> Result<Vec<u8>> {
    let (w, h) = (file.width, file.height);
    let mut pixels = vec![0u8; w * h];
    for b in file.boxes(classes)? {
        let quad = rbox_to_quad(&b.to_rbox()?);
        let (lo, hi) = quad.bounds();
        let (x0, x1) = (lo.x.floor().max(0.0) as usize, (hi.x.ceil() as usize).min(w));
        let (y0, y1) = (lo.y.floor().max(0.0) as usize, (hi.y.ceil() as usize).min(h));
        for y in y0..y1 {
            for x in x0..x1 {
                if quad.contains(Point::new(x as f64 + 0.5, y as f64 + 0.5)) {
                    pixels[y * w + x] = 255;
                }
            }
        }
        let (hx, hy) = (b.hx.floor() as isize, b.hy.floor() as isize);
        for y in hy - 1..=hy + 1 {
            for x in hx - 1..=hx + 1 {
                if (0..w as isize).contains(&x) && (0..h as isize).contains(&y) {
                    pixels[y as usize * w + x as usize] = 128;
                }
            }
        }
    }
    let mut out = format!("P5\n{w} {h}\n255\n").into_bytes();
    out.extend_from_slice(&pixels);
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn sample_file() -> AnnotationFile {
        let classes = ClassConfig::default();
        let boxes = [
            ChpBox::new(100.25, 80.5, 20.0, 172.8, 100.25, 0.0, 0).with_score(0.75),
            ChpBox::new(300.0, 300.0, 11.0, 61.0, 330.0, 300.0, 1).with_score(0.1 + 0.2),
        ];
        AnnotationFile::from_boxes("img_1", 512, 512, 1.0, &boxes, &classes, true).unwrap()
    }

    #[test]
    fn annotation_round_trip() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("a.json");
        let file = sample_file();
        save_annotations(&path, &file).unwrap();
        let back = load_annotations(&path, &ClassConfig::default()).unwrap();
        assert_eq!(back, file);
        assert_eq!(back.objects[1].score, Some(0.1 + 0.2));
        // Deterministic serialization.
        assert_eq!(back.to_json(), file.to_json());
    }

    #[test]
    fn missing_gsd_rejected() {
        let text = r#"{"image_id": "x", "width": 10, "height": 10, "objects": []}"#;
        let err = AnnotationFile::from_json(text, Path::new("x.json"), &ClassConfig::default()).unwrap_err();
        assert!(err.to_string().contains("gsd required"), "{err}");
    }

    #[test]
    fn malformed_reports_line() {
        let text = "{\n  \"image_id\": \"x\",\n  \"width\": oops\n}";
        let err = AnnotationFile::from_json(text, Path::new("x.json"), &ClassConfig::default()).unwrap_err();
        assert!(err.to_string().contains("line 3"), "{err}");
    }

    #[test]
    fn degenerate_head_and_unknown_class_rejected() {
        let classes = ClassConfig::default();
        let mut file = sample_file();
        file.objects[0].hx = file.objects[0].cx;
        file.objects[0].hy = file.objects[0].cy;
        let err = AnnotationFile::from_json(&file.to_json(), Path::new("x.json"), &classes).unwrap_err();
        assert!(err.to_string().contains("zero-length heading"), "{err}");

        let mut file = sample_file();
        file.objects[1].class = "dinghy".into();
        let err = AnnotationFile::from_json(&file.to_json(), Path::new("x.json"), &classes).unwrap_err();
        assert!(err.to_string().contains("dinghy"), "{err}");
    }

    #[test]
    fn tensor_header_layout() {
        let t = TensorFile {
            dims: vec![1, 2],
            data: vec![1.5, -2.0],
        };
        let bytes = t.to_bytes().unwrap();
        assert_eq!(&bytes[..4], b"CHPT");
        assert_eq!(&bytes[4..8], &[1, 0, 0, 2]);
        assert_eq!(&bytes[8..16], &[1, 0, 0, 0, 2, 0, 0, 0]);
        assert_eq!(&bytes[16..20], &1.5f32.to_le_bytes());
        assert_eq!(bytes.len(), 24);
        assert!(TensorFile::from_bytes(&bytes[..23]).is_err());
        assert!(TensorFile::from_bytes(b"NOPE\x01\x00\x00\x00").is_err());
    }

    #[test]
    fn maps_round_trip_through_files() {
        use crate::target_encoder::{encode_targets, EncodingConfig};
        let dir = tempfile::tempdir().unwrap();
        let cfg = EncodingConfig::new(2, 64, 64);
        let maps = encode_targets(&[ChpBox::new(30.0, 30.0, 6.0, 24.0, 30.0, 18.0, 1)], &cfg)
            .unwrap()
            .maps;
        save_maps(dir.path(), &maps).unwrap();
        let back = load_maps(dir.path()).unwrap();
        for name in MAP_NAMES {
            let a = maps.by_name(name).unwrap().mapv(|v| v as f32 as f64);
            assert_eq!(&a, back.by_name(name).unwrap(), "{name}");
        }
    }

    #[test]
    fn synth_is_deterministic_and_valid() {
        let classes = ClassConfig::default();
        let spec = SceneSpec::new(7);
        let a = synth_scene(&spec, &classes).unwrap();
        let b = synth_scene(&spec, &classes).unwrap();
        assert_eq!(a, b);
        a.validate(&classes).unwrap();

        let exact = SceneSpec {
            count: (5, 5),
            ..SceneSpec::new(11)
        };
        assert_eq!(synth_scene(&exact, &classes).unwrap().objects.len(), 5);
    }

    #[test]
    fn synth_reports_shortfall() {
        let classes = ClassConfig::default();
        let crowded = SceneSpec {
            width: 256,
            height: 256,
            count: (60, 60),
            max_retries: 50,
            ..SceneSpec::new(3)
        };
        match synth_scene(&crowded, &classes) {
            Err(Error::Placement { achieved, requested }) => {
                assert_eq!(requested, 60);
                assert!(achieved < 60);
            }
            other => panic!("expected placement error, got {other:?}"),
        }
    }

    #[test]
    fn sampled_length_mean() {
        let mut rng = ChaCha8Rng::seed_from_u64(42);
        let mean = (0..10_000).map(|_| sample_length(&mut rng, 172.8, 0.2)).sum::<f64>() / 10_000.0;
        assert!((mean - 172.8).abs() / 172.8 < 0.02, "{mean}");
    }

    #[test]
    fn mask_has_header_and_pixels() {
        let classes = ClassConfig::default();
        let file = synth_scene(&SceneSpec::new(5), &classes).unwrap();
        let pgm = render_mask(&file, &classes).unwrap();
        assert!(pgm.starts_with(b"P5\n512 512\n255\n"));
        assert!(pgm.iter().skip(15).any(|&p| p == 255));
    }

    proptest! {
        #[test]
        fn annotation_floats_round_trip(v in proptest::collection::vec(1e-3..1e4f64, 7)) {
            let classes = ClassConfig::default();
            let b = ChpBox::new(v[0], v[1], v[2], v[3], v[0] + v[4], v[1] - v[5], 2).with_score(v[6] / 1e4);
            let file = AnnotationFile::from_boxes("p", 20_000, 20_000, 0.5, &[b], &classes, true).unwrap();
            let back = AnnotationFile::from_json(&file.to_json(), Path::new("p.json"), &classes).unwrap();
            prop_assert_eq!(back, file);
        }

        #[test]
        fn tensor_bytes_round_trip(dims in proptest::collection::vec(0u32..5, 0..4), seed in any::<u64>()) {
            let count: usize = dims.iter().map(|&d| d as usize).product();
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let data: Vec<f32> = (0..count).map(|_| f32::from_bits(rand::Rng::random::<u32>(&mut rng) & 0x7f7f_ffff)).collect();
            let t = TensorFile { dims, data };
            let back = TensorFile::from_bytes(&t.to_bytes().unwrap()).unwrap();
            prop_assert_eq!(back.dims, t.dims);
            prop_assert!(back.data.iter().zip(&t.data).all(|(a, b)| a.to_bits() == b.to_bits()));
        }
    }
}
