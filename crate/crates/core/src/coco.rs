//! COCO-format ground truth and detection results.
//!
//! On disk boxes are `[x, y, width, height]`; they are converted to corner
//! form exactly once while loading and back while saving.

use std::collections::{HashMap, HashSet};
use std::fmt;
use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};

use rayon::prelude::*;
use serde::{Deserialize, Deserializer, Serialize};

use crate::error::{Error, Result};
use crate::geometry::{BBox, ImageSize};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Category {
    pub id: u64,
    pub name: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub supercategory: Option<String>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ImageRecord {
    pub id: u64,
    pub file_name: String,
    pub size: ImageSize,
}

#[derive(Debug, Clone, PartialEq)]
pub struct GroundTruthAnnotation {
    pub id: u64,
    pub image_id: u64,
    pub category_id: u64,
    pub bbox: BBox,
    /// Object area in px², as stored in the file.
    pub area: f64,
    pub iscrowd: bool,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Detection {
    pub image_id: u64,
    pub category_id: u64,
    pub bbox: BBox,
    pub score: f64,
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct Dataset {
    pub images: Vec<ImageRecord>,
    pub annotations: Vec<GroundTruthAnnotation>,
    pub categories: Vec<Category>,
    /// `info` and `licenses` blocks are carried through untouched.
    pub info: Option<serde_json::Value>,
    pub licenses: Option<serde_json::Value>,
}

impl Dataset {
    pub fn image_index(&self) -> HashMap<u64, &ImageRecord> {
        self.images.iter().map(|im| (im.id, im)).collect()
    }

    /// Annotations grouped by image id, in file order.
    pub fn annotations_by_image(&self) -> HashMap<u64, Vec<&GroundTruthAnnotation>> {
        let mut out: HashMap<u64, Vec<&GroundTruthAnnotation>> = HashMap::new();
        for a in &self.annotations {
            out.entry(a.image_id).or_default().push(a);
        }
        out
    }

    /// Checks id uniqueness and that every annotation points at an existing
    /// image and category.
    pub fn check_references(&self) -> Result<()> {
        let mut seen = HashSet::new();
        for im in &self.images {
            if !seen.insert(im.id) {
                return Err(Error::DuplicateId {
                    kind: "image",
                    id: im.id,
                });
            }
        }
        let mut cats = HashSet::new();
        for c in &self.categories {
            if !cats.insert(c.id) {
                return Err(Error::DuplicateId {
                    kind: "category",
                    id: c.id,
                });
            }
        }
        let mut ann_ids = HashSet::new();
        for a in &self.annotations {
            if !ann_ids.insert(a.id) {
                return Err(Error::DuplicateId {
                    kind: "annotation",
                    id: a.id,
                });
            }
            if !seen.contains(&a.image_id) {
                return Err(Error::DanglingReference {
                    kind: "image",
                    id: a.image_id,
                    referrer: format!("annotation {}", a.id),
                });
            }
            if !cats.contains(&a.category_id) {
                return Err(Error::DanglingReference {
                    kind: "category",
                    id: a.category_id,
                    referrer: format!("annotation {}", a.id),
                });
            }
        }
        Ok(())
    }
}

/// What to do with ground-truth boxes that stick out of their image.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct LoadPolicy {
    /// Treat out-of-bounds boxes as errors instead of clamping them.
    pub strict: bool,
}

// ---------------------------------------------------------------------------
// on-disk representation

#[derive(Serialize, Deserialize)]
struct RawDataset {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    info: Option<serde_json::Value>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    licenses: Option<serde_json::Value>,
    images: Vec<RawImage>,
    annotations: Vec<RawAnnotation>,
    categories: Vec<Category>,
}

#[derive(Serialize, Deserialize)]
struct RawImage {
    id: u64,
    file_name: String,
    width: u32,
    height: u32,
}

#[derive(Serialize, Deserialize)]
struct RawAnnotation {
    id: u64,
    image_id: u64,
    category_id: u64,
    bbox: [f64; 4],
    #[serde(default, skip_serializing_if = "Option::is_none")]
    area: Option<f64>,
    #[serde(default, deserialize_with = "flag")]
    iscrowd: u8,
}

#[derive(Serialize, Deserialize)]
struct RawDetection {
    image_id: u64,
    category_id: u64,
    bbox: [f64; 4],
    score: f64,
}

/// Accepts `0`/`1` as well as `true`/`false`.
fn flag<'de, D: Deserializer<'de>>(d: D) -> std::result::Result<u8, D::Error> {
    #[derive(Deserialize)]
    #[serde(untagged)]
    enum Flag {
        Int(u8),
        Bool(bool),
    }
    Ok(match Flag::deserialize(d)? {
        Flag::Int(v) => u8::from(v != 0),
        Flag::Bool(v) => u8::from(v),
    })
}

fn schema(context: impl Into<String>, message: impl Into<String>) -> Error {
    Error::Schema {
        context: context.into(),
        message: message.into(),
    }
}

impl RawDataset {
    fn into_dataset(self) -> Result<Dataset> {
        let images = self
            .images
            .into_iter()
            .map(|im| {
                let size = ImageSize::new(im.width, im.height)
                    .map_err(|e| schema(format!("image {}", im.id), e.to_string()))?;
                Ok(ImageRecord {
                    id: im.id,
                    file_name: im.file_name,
                    size,
                })
            })
            .collect::<Result<Vec<_>>>()?;
        let annotations = self
            .annotations
            .into_iter()
            .map(|a| {
                let [x, y, w, h] = a.bbox;
                let bbox = BBox::from_xywh(x, y, w, h)
                    .map_err(|e| schema(format!("annotation {}", a.id), e.to_string()))?;
                let area = a.area.unwrap_or_else(|| bbox.area());
                if !area.is_finite() || area < 0.0 {
                    return Err(schema(
                        format!("annotation {}", a.id),
                        format!("area {area} is not a non-negative number"),
                    ));
                }
                Ok(GroundTruthAnnotation {
                    id: a.id,
                    image_id: a.image_id,
                    category_id: a.category_id,
                    bbox,
                    area,
                    iscrowd: a.iscrowd != 0,
                })
            })
            .collect::<Result<Vec<_>>>()?;
        Ok(Dataset {
            images,
            annotations,
            categories: self.categories,
            info: self.info,
            licenses: self.licenses,
        })
    }

    fn from_dataset(d: &Dataset) -> Self {
        RawDataset {
            info: d.info.clone(),
            licenses: d.licenses.clone(),
            images: d
                .images
                .iter()
                .map(|im| RawImage {
                    id: im.id,
                    file_name: im.file_name.clone(),
                    width: im.size.width,
                    height: im.size.height,
                })
                .collect(),
            annotations: d
                .annotations
                .iter()
                .map(|a| RawAnnotation {
                    id: a.id,
                    image_id: a.image_id,
                    category_id: a.category_id,
                    bbox: a.bbox.to_xywh(),
                    area: Some(a.area),
                    iscrowd: u8::from(a.iscrowd),
                })
                .collect(),
            categories: d.categories.clone(),
        }
    }
}

// ---------------------------------------------------------------------------
// loading and saving

fn read(path: &Path) -> Result<Vec<u8>> {
    fs::read(path).map_err(|e| Error::io(path, e))
}

fn parse_json<T: serde::de::DeserializeOwned>(path: &Path, bytes: &[u8]) -> Result<T> {
    serde_json::from_slice(bytes).map_err(|source| {
        if source.is_data() {
            // well-formed JSON of the wrong shape: serde names the field
            schema(path.display().to_string(), source.to_string())
        } else {
            Error::Parse {
                path: path.to_path_buf(),
                source,
            }
        }
    })
}

/// Parses a COCO annotation file without checking references or bounds.
pub fn parse_dataset(path: impl AsRef<Path>) -> Result<Dataset> {
    let path = path.as_ref();
    let raw: RawDataset = parse_json(path, &read(path)?)?;
    raw.into_dataset()
}

pub fn dataset_from_slice(bytes: &[u8], policy: LoadPolicy) -> Result<Dataset> {
    let raw: RawDataset = parse_json(Path::new("<memory>"), bytes)?;
    finish_load(raw.into_dataset()?, policy)
}

/// Loads and validates a COCO annotation file. Out-of-bounds boxes are
/// clamped unless `policy.strict` is set.
pub fn load_dataset(path: impl AsRef<Path>, policy: LoadPolicy) -> Result<Dataset> {
    finish_load(parse_dataset(path)?, policy)
}

fn finish_load(mut d: Dataset, policy: LoadPolicy) -> Result<Dataset> {
    d.check_references()?;
    let sizes: HashMap<u64, ImageSize> = d.images.iter().map(|im| (im.id, im.size)).collect();
    for a in &mut d.annotations {
        let size = sizes[&a.image_id];
        let frame = BBox::frame(size);
        if frame.contains(&a.bbox) {
            continue;
        }
        if policy.strict {
            return Err(Error::Validation(format!(
                "annotation {} box {:?} exceeds image {} of size {}",
                a.id, a.bbox, a.image_id, size
            )));
        }
        clamp_annotation(a, size);
    }
    Ok(d)
}

fn clamp_annotation(a: &mut GroundTruthAnnotation, size: ImageSize) {
    let before = a.bbox.area();
    a.bbox = a.bbox.clamp_to(size);
    // keep the stored area consistent with the box it now describes
    if (a.area - before).abs() <= 1.0 || a.area > a.bbox.area() {
        a.area = a.bbox.area();
    }
}

pub fn dataset_to_vec(d: &Dataset) -> Result<Vec<u8>> {
    serde_json::to_vec(&RawDataset::from_dataset(d))
        .map_err(|e| Error::Validation(format!("serializing dataset: {e}")))
}

pub fn save_dataset(d: &Dataset, path: impl AsRef<Path>) -> Result<()> {
    write_atomic(path.as_ref(), &dataset_to_vec(d)?)
}

pub fn detections_to_vec(dets: &[Detection]) -> Result<Vec<u8>> {
    let raw: Vec<RawDetection> = dets
        .iter()
        .map(|d| RawDetection {
            image_id: d.image_id,
            category_id: d.category_id,
            bbox: d.bbox.to_xywh(),
            score: d.score,
        })
        .collect();
    serde_json::to_vec(&raw).map_err(|e| Error::Validation(format!("serializing detections: {e}")))
}

pub fn save_detections(dets: &[Detection], path: impl AsRef<Path>) -> Result<()> {
    write_atomic(path.as_ref(), &detections_to_vec(dets)?)
}

/// Parses a detection-results file, checking only box and score validity.
pub fn parse_detections(path: impl AsRef<Path>) -> Result<Vec<Detection>> {
    let path = path.as_ref();
    let raw: Vec<RawDetection> = parse_json(path, &read(path)?)?;
    raw.into_iter()
        .enumerate()
        .map(|(i, r)| {
            let ctx = || format!("{} detection #{i}", path.display());
            if !(r.score.is_finite() && (0.0..=1.0).contains(&r.score)) {
                return Err(Error::Validation(format!(
                    "{}: score {} outside [0, 1]",
                    ctx(),
                    r.score
                )));
            }
            let [x, y, w, h] = r.bbox;
            let bbox = BBox::from_xywh(x, y, w, h).map_err(|e| schema(ctx(), e.to_string()))?;
            Ok(Detection {
                image_id: r.image_id,
                category_id: r.category_id,
                bbox,
                score: r.score,
            })
        })
        .collect()
}

/// Loads detections and checks that each one refers to an image and a
/// category of `gt`.
pub fn load_detections(path: impl AsRef<Path>, gt: &Dataset) -> Result<Vec<Detection>> {
    let dets = parse_detections(path.as_ref())?;
    check_detections(&dets, gt)?;
    Ok(dets)
}

pub fn check_detections(dets: &[Detection], gt: &Dataset) -> Result<()> {
    let images: HashSet<u64> = gt.images.iter().map(|im| im.id).collect();
    let cats: HashSet<u64> = gt.categories.iter().map(|c| c.id).collect();
    for (i, d) in dets.iter().enumerate() {
        if !images.contains(&d.image_id) {
            return Err(Error::DanglingReference {
                kind: "image",
                id: d.image_id,
                referrer: format!("detection #{i}"),
            });
        }
        if !cats.contains(&d.category_id) {
            return Err(Error::DanglingReference {
                kind: "category",
                id: d.category_id,
                referrer: format!("detection #{i}"),
            });
        }
        if !(d.score.is_finite() && (0.0..=1.0).contains(&d.score)) {
            return Err(Error::Validation(format!(
                "detection #{i}: score {} outside [0, 1]",
                d.score
            )));
        }
    }
    Ok(())
}

/// Writes through a temporary file in the destination directory and renames
/// it into place, so readers never observe a partial file.
pub fn write_atomic(path: &Path, bytes: &[u8]) -> Result<()> {
    let dir = match path.parent() {
        Some(p) if !p.as_os_str().is_empty() => p.to_path_buf(),
        _ => PathBuf::from("."),
    };
    fs::create_dir_all(&dir).map_err(|e| Error::io(&dir, e))?;
    let mut tmp = tempfile::NamedTempFile::new_in(&dir).map_err(|e| Error::io(&dir, e))?;
    tmp.write_all(bytes).map_err(|e| Error::io(path, e))?;
    // temp files are created owner-only; outputs get ordinary permissions
    #[cfg(unix)]
    {
        use std::os::unix::fs::PermissionsExt;
        fs::set_permissions(tmp.path(), fs::Permissions::from_mode(0o644)).map_err(|e| Error::io(path, e))?;
    }
    tmp.persist(path).map_err(|e| Error::io(path, e.error))?;
    Ok(())
}

// ---------------------------------------------------------------------------
// validation

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum FindingKind {
    BrokenImage,
    DuplicateImageId,
    DuplicateAnnotationId,
    DanglingImage,
    DanglingCategory,
    OutOfBounds,
    ZeroArea,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Finding {
    pub kind: FindingKind,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub image_id: Option<u64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub annotation_id: Option<u64>,
    pub detail: String,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct ValidationReport {
    pub images_checked: usize,
    pub annotations_checked: usize,
    pub findings: Vec<Finding>,
}

impl ValidationReport {
    pub fn is_clean(&self) -> bool {
        self.findings.is_empty()
    }

    pub fn count(&self, kind: FindingKind) -> usize {
        self.findings.iter().filter(|f| f.kind == kind).count()
    }
}

impl fmt::Display for ValidationReport {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        writeln!(
            f,
            "checked {} images, {} annotations: {} finding(s)",
            self.images_checked,
            self.annotations_checked,
            self.findings.len()
        )?;
        for x in &self.findings {
            let kind = serde_json::to_value(x.kind)
                .ok()
                .and_then(|v| v.as_str().map(str::to_owned))
                .unwrap_or_default();
            write!(f, "  {kind:<24}")?;
            if let Some(id) = x.image_id {
                write!(f, " image={id}")?;
            }
            if let Some(id) = x.annotation_id {
                write!(f, " annotation={id}")?;
            }
            writeln!(f, " {}", x.detail)?;
        }
        Ok(())
    }
}

/// Why an image file is unusable, or `None` if it decodes.
pub fn image_problem(path: &Path) -> Option<String> {
    match fs::metadata(path) {
        Err(e) => return Some(format!("cannot read {}: {e}", path.display())),
        Ok(m) if m.len() == 0 => return Some(format!("{} is empty", path.display())),
        Ok(_) => {}
    }
    let reader = match image::ImageReader::open(path).and_then(|r| r.with_guessed_format()) {
        Ok(r) => r,
        Err(e) => return Some(format!("cannot open {}: {e}", path.display())),
    };
    match reader.decode() {
        Ok(_) => None,
        Err(e) => Some(format!("cannot decode {}: {e}", path.display())),
    }
}

/// Lists every problem in `d`. With `image_root`, image files are opened and
/// fully decoded; missing, empty and undecodable files are reported as
/// broken.
pub fn validate_dataset(d: &Dataset, image_root: Option<&Path>) -> ValidationReport {
    let mut findings = Vec::new();

    if let Some(root) = image_root {
        let broken: Vec<Finding> = d
            .images
            .par_iter()
            .filter_map(|im| {
                image_problem(&root.join(&im.file_name)).map(|detail| Finding {
                    kind: FindingKind::BrokenImage,
                    image_id: Some(im.id),
                    annotation_id: None,
                    detail,
                })
            })
            .collect();
        findings.extend(broken);
    }

    let mut sizes = HashMap::new();
    for im in &d.images {
        if sizes.insert(im.id, im.size).is_some() {
            findings.push(Finding {
                kind: FindingKind::DuplicateImageId,
                image_id: Some(im.id),
                annotation_id: None,
                detail: format!("image id {} appears more than once", im.id),
            });
        }
    }
    let cats: HashSet<u64> = d.categories.iter().map(|c| c.id).collect();
    let mut ann_ids = HashSet::new();
    for a in &d.annotations {
        let finding = |kind, detail| Finding {
            kind,
            image_id: Some(a.image_id),
            annotation_id: Some(a.id),
            detail,
        };
        if !ann_ids.insert(a.id) {
            findings.push(finding(
                FindingKind::DuplicateAnnotationId,
                format!("annotation id {} appears more than once", a.id),
            ));
        }
        if !cats.contains(&a.category_id) {
            findings.push(finding(
                FindingKind::DanglingCategory,
                format!("category {} does not exist", a.category_id),
            ));
        }
        match sizes.get(&a.image_id) {
            None => findings.push(finding(
                FindingKind::DanglingImage,
                format!("image {} does not exist", a.image_id),
            )),
            Some(size) if !BBox::frame(*size).contains(&a.bbox) => findings.push(finding(
                FindingKind::OutOfBounds,
                format!("box {:?} exceeds image size {}", a.bbox, size),
            )),
            Some(_) => {}
        }
        if a.bbox.area() <= 0.0 {
            findings.push(finding(
                FindingKind::ZeroArea,
                format!("box {:?} has zero area", a.bbox),
            ));
        }
    }

    ValidationReport {
        images_checked: d.images.len(),
        annotations_checked: d.annotations.len(),
        findings,
    }
}

/// Returns a cleaned copy of `d` with the problems of `report` removed:
/// broken and duplicate images are dropped together with their annotations,
/// out-of-bounds boxes are clamped, and dangling, duplicate or zero-area
/// annotations are dropped. Running it on its own output changes nothing.
pub fn exclude_findings(d: &Dataset, report: &ValidationReport) -> Dataset {
    let broken: HashSet<u64> = report
        .findings
        .iter()
        .filter(|f| f.kind == FindingKind::BrokenImage)
        .filter_map(|f| f.image_id)
        .collect();

    let mut seen = HashSet::new();
    let images: Vec<ImageRecord> = d
        .images
        .iter()
        .filter(|im| !broken.contains(&im.id) && seen.insert(im.id))
        .cloned()
        .collect();
    let sizes: HashMap<u64, ImageSize> = images.iter().map(|im| (im.id, im.size)).collect();
    let cats: HashSet<u64> = d.categories.iter().map(|c| c.id).collect();

    let mut ann_ids = HashSet::new();
    let annotations = d
        .annotations
        .iter()
        .filter_map(|a| {
            let size = *sizes.get(&a.image_id)?;
            if !cats.contains(&a.category_id) || !ann_ids.insert(a.id) {
                return None;
            }
            let mut a = a.clone();
            if !BBox::frame(size).contains(&a.bbox) {
                clamp_annotation(&mut a, size);
            }
            (a.bbox.area() > 0.0).then_some(a)
        })
        .collect();

    Dataset {
        images,
        annotations,
        categories: d.categories.clone(),
        info: d.info.clone(),
        licenses: d.licenses.clone(),
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    const MINIMAL: &str = r#"{
        "images": [{"id": 1, "file_name": "a.jpg", "width": 100, "height": 80}],
        "annotations": [{"id": 7, "image_id": 1, "category_id": 1,
                         "bbox": [10, 10, 20, 30], "area": 600, "iscrowd": 0}],
        "categories": [{"id": 1, "name": "object"}]
    }"#;

    #[test]
    fn loads_minimal_file() {
        let d = dataset_from_slice(MINIMAL.as_bytes(), LoadPolicy::default()).unwrap();
        assert_eq!(
            (d.images.len(), d.annotations.len(), d.categories.len()),
            (1, 1, 1)
        );
        let a = &d.annotations[0];
        assert_eq!(a.bbox, BBox::new(10., 10., 30., 40.).unwrap());
        assert_eq!(a.area, 600.0);
        assert!(!a.iscrowd);
    }

    #[test]
    fn dangling_image_is_named() {
        let text = MINIMAL.replace("\"image_id\": 1", "\"image_id\": 42");
        let err = dataset_from_slice(text.as_bytes(), LoadPolicy::default()).unwrap_err();
        assert!(matches!(err, Error::DanglingReference { kind: "image", id: 42, .. }));
        assert!(err.to_string().contains("42"));
    }

    #[test]
    fn missing_field_is_named() {
        let text = MINIMAL.replace("\"file_name\": \"a.jpg\",", "");
        let err = dataset_from_slice(text.as_bytes(), LoadPolicy::default()).unwrap_err();
        assert!(matches!(err, Error::Schema { .. }));
        assert!(err.to_string().contains("file_name"), "{err}");
    }

    #[test]
    fn malformed_json_is_a_parse_error() {
        let err = dataset_from_slice(b"{\"images\": [", LoadPolicy::default()).unwrap_err();
        assert!(matches!(err, Error::Parse { .. }));
    }

    #[test]
    fn out_of_bounds_boxes_clamp_or_fail() {
        let text = MINIMAL.replace("[10, 10, 20, 30]", "[90, 10, 20, 30]");
        let d = dataset_from_slice(text.as_bytes(), LoadPolicy::default()).unwrap();
        assert_eq!(d.annotations[0].bbox, BBox::new(90., 10., 100., 40.).unwrap());
        assert_eq!(d.annotations[0].area, 300.0);
        let err = dataset_from_slice(text.as_bytes(), LoadPolicy { strict: true });
        assert!(matches!(err, Err(Error::Validation(_))));
    }

    #[test]
    fn iscrowd_accepts_bools() {
        let text = MINIMAL.replace("\"iscrowd\": 0", "\"iscrowd\": true");
        let d = dataset_from_slice(text.as_bytes(), LoadPolicy::default()).unwrap();
        assert!(d.annotations[0].iscrowd);
    }

    #[test]
    fn detection_score_out_of_range_is_rejected() {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("d.json");
        fs::write(
            &p,
            r#"[{"image_id": 1, "category_id": 1, "bbox": [0,0,1,1], "score": 1.5}]"#,
        )
        .unwrap();
        assert!(matches!(parse_detections(&p), Err(Error::Validation(_))));
    }

    #[test]
    fn empty_detection_list_is_accepted() {
        let d = dataset_from_slice(MINIMAL.as_bytes(), LoadPolicy::default()).unwrap();
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("d.json");
        fs::write(&p, "[]").unwrap();
        assert!(load_detections(&p, &d).unwrap().is_empty());
    }

    #[test]
    fn detection_on_unknown_image_is_named() {
        let d = dataset_from_slice(MINIMAL.as_bytes(), LoadPolicy::default()).unwrap();
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("d.json");
        fs::write(
            &p,
            r#"[{"image_id": 99, "category_id": 1, "bbox": [0,0,1,1], "score": 0.5}]"#,
        )
        .unwrap();
        let err = load_detections(&p, &d).unwrap_err();
        assert!(err.to_string().contains("99"));
    }

    #[test]
    fn zero_width_box_is_one_finding() {
        let text = MINIMAL.replace("[10, 10, 20, 30]", "[10, 10, 0, 30]");
        let d = dataset_from_slice(text.as_bytes(), LoadPolicy::default()).unwrap();
        let report = validate_dataset(&d, None);
        assert_eq!(report.findings.len(), 1);
        assert_eq!(report.count(FindingKind::ZeroArea), 1);
        let cleaned = exclude_findings(&d, &report);
        assert!(cleaned.annotations.is_empty());
    }

    #[test]
    fn clean_dataset_has_empty_report() {
        let d = dataset_from_slice(MINIMAL.as_bytes(), LoadPolicy::default()).unwrap();
        assert!(validate_dataset(&d, None).is_clean());
    }
}
