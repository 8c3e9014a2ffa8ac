//! Readers and writers for the canonical annotation formats.
//!
//! Six source datasets ship six different annotation layouts, so conversion
//! into one canonical JSON schema happens exactly once, here. Everything
//! downstream consumes the canonical model.
//!
//! Writers are deterministic: fixed key order, images sorted by id, floats
//! rendered with their shortest round-trip representation. Parsers never
//! panic on malformed bytes; they return [`FormatError`] or, in lenient
//! mode, drop the offending piece and record a [`Diagnostic`].

use std::collections::BTreeMap;
use std::fmt::Write as _;

use serde_json::{Map, Value};
use thiserror::Error;

use crate::geometry::{Point, Polygon};
use crate::model::{
    ChallengeCategory, DatasetManifest, DetectionSet, Diagnostic, ImageAnnotation, ScoredPolygon,
    Script, Split, TextInstance,
};

pub const SCHEMA_VERSION: &str = "1.0";

/// Don't-care marker used by ICDAR-style ground truth files.
pub const DONT_CARE_MARKER: &str = "###";

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum FormatError {
    #[error("parse error at line {line}: {message}")]
    Parse { line: usize, message: String },
    #[error("schema error at {path}: {message}")]
    Schema { path: String, message: String },
}

impl FormatError {
    fn parse(line: usize, message: impl Into<String>) -> Self {
        FormatError::Parse {
            line,
            message: message.into(),
        }
    }

    fn schema(path: impl Into<String>, message: impl Into<String>) -> Self {
        FormatError::Schema {
            path: path.into(),
            message: message.into(),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum ParseMode {
    /// Reject unknown keys and malformed entries outright.
    #[default]
    Strict,
    /// Warn on unknown keys and drop malformed instances with a diagnostic.
    Lenient,
}

fn decode_utf8(bytes: &[u8]) -> Result<&str, FormatError> {
    let bytes = bytes.strip_prefix(b"\xef\xbb\xbf").unwrap_or(bytes);
    std::str::from_utf8(bytes).map_err(|e| {
        let line = bytes[..e.valid_up_to()]
            .iter()
            .filter(|&&b| b == b'\n')
            .count()
            + 1;
        FormatError::parse(line, "invalid UTF-8")
    })
}

// ---------------------------------------------------------------------------
// Canonical JSON: annotation manifests
// ---------------------------------------------------------------------------

struct Walker<'a> {
    mode: ParseMode,
    diags: &'a mut Vec<Diagnostic>,
}

impl Walker<'_> {
    fn expect_object<'v>(
        &self,
        v: &'v Value,
        path: &str,
    ) -> Result<&'v Map<String, Value>, FormatError> {
        v.as_object()
            .ok_or_else(|| FormatError::schema(path, "expected an object"))
    }

    fn expect_array<'v>(&self, v: &'v Value, path: &str) -> Result<&'v Vec<Value>, FormatError> {
        v.as_array()
            .ok_or_else(|| FormatError::schema(path, "expected an array"))
    }

    fn field<'v>(
        &self,
        obj: &'v Map<String, Value>,
        path: &str,
        key: &str,
    ) -> Result<&'v Value, FormatError> {
        obj.get(key)
            .ok_or_else(|| FormatError::schema(format!("{path}.{key}"), "missing required key"))
    }

    fn string(
        &self,
        obj: &Map<String, Value>,
        path: &str,
        key: &str,
    ) -> Result<String, FormatError> {
        self.field(obj, path, key)?
            .as_str()
            .map(str::to_owned)
            .ok_or_else(|| FormatError::schema(format!("{path}.{key}"), "expected a string"))
    }

    fn dimension(
        &self,
        obj: &Map<String, Value>,
        path: &str,
        key: &str,
    ) -> Result<u32, FormatError> {
        let p = format!("{path}.{key}");
        let n = self
            .field(obj, path, key)?
            .as_u64()
            .ok_or_else(|| FormatError::schema(&p, "expected a positive integer"))?;
        if n == 0 || n > u32::MAX as u64 {
            return Err(FormatError::schema(&p, "dimension out of range"));
        }
        Ok(n as u32)
    }

    fn check_keys(
        &mut self,
        obj: &Map<String, Value>,
        path: &str,
        known: &[&str],
    ) -> Result<(), FormatError> {
        for key in obj.keys() {
            if !known.contains(&key.as_str()) {
                let at = format!("{path}.{key}");
                match self.mode {
                    ParseMode::Strict => return Err(FormatError::schema(at, "unknown key")),
                    ParseMode::Lenient => {
                        self.diags
                            .push(Diagnostic::warning("unknown key ignored", at));
                    }
                }
            }
        }
        Ok(())
    }

    fn polygon(&self, v: &Value, path: &str) -> Result<Polygon, FormatError> {
        let arr = self.expect_array(v, path)?;
        let mut points = Vec::with_capacity(arr.len());
        for (i, pair) in arr.iter().enumerate() {
            let pp = format!("{path}[{i}]");
            let pair = self.expect_array(pair, &pp)?;
            if pair.len() != 2 {
                return Err(FormatError::schema(&pp, "expected an [x, y] pair"));
            }
            let x = pair[0]
                .as_f64()
                .ok_or_else(|| FormatError::schema(format!("{pp}[0]"), "expected a number"))?;
            let y = pair[1]
                .as_f64()
                .ok_or_else(|| FormatError::schema(format!("{pp}[1]"), "expected a number"))?;
            points.push(Point::new(x, y));
        }
        Polygon::new(points).map_err(|e| FormatError::schema(path, e.to_string()))
    }

    fn instance(&mut self, v: &Value, path: &str) -> Result<Option<TextInstance>, FormatError> {
        let obj = self.expect_object(v, path)?;
        self.check_keys(
            obj,
            path,
            &[
                "polygon",
                "care",
                "transcription",
                "categories",
                "word_level",
                "script",
            ],
        )?;
        let polygon = match self.polygon(
            self.field(obj, path, "polygon")?,
            &format!("{path}.polygon"),
        ) {
            Ok(p) => p,
            Err(e) => match self.mode {
                ParseMode::Strict => return Err(e),
                ParseMode::Lenient => {
                    // Repair by dropping the instance rather than silently
                    // fixing geometry the evaluation would then trust.
                    self.diags
                        .push(Diagnostic::error(format!("instance dropped: {e}"), path));
                    return Ok(None);
                }
            },
        };
        let care = self
            .field(obj, path, "care")?
            .as_bool()
            .ok_or_else(|| FormatError::schema(format!("{path}.care"), "expected a boolean"))?;
        let transcription = match self.field(obj, path, "transcription")? {
            Value::Null => None,
            Value::String(s) => Some(s.clone()),
            _ => {
                return Err(FormatError::schema(
                    format!("{path}.transcription"),
                    "expected a string or null",
                ))
            }
        };
        let (care, transcription) = if transcription.as_deref() == Some(DONT_CARE_MARKER) {
            (false, None)
        } else {
            (care, transcription)
        };
        let mut categories = std::collections::BTreeSet::new();
        let cats_path = format!("{path}.categories");
        for (i, c) in self
            .expect_array(self.field(obj, path, "categories")?, &cats_path)?
            .iter()
            .enumerate()
        {
            let cp = format!("{cats_path}[{i}]");
            let tag = c
                .as_str()
                .ok_or_else(|| FormatError::schema(&cp, "expected a string"))?;
            match tag.parse::<ChallengeCategory>() {
                Ok(cat) => {
                    categories.insert(cat);
                }
                Err(e) => match self.mode {
                    ParseMode::Strict => return Err(FormatError::schema(&cp, e.to_string())),
                    ParseMode::Lenient => self.diags.push(Diagnostic::warning(e.to_string(), cp)),
                },
            }
        }
        let word_level = self
            .field(obj, path, "word_level")?
            .as_bool()
            .ok_or_else(|| {
                FormatError::schema(format!("{path}.word_level"), "expected a boolean")
            })?;
        let script_path = format!("{path}.script");
        let script = self
            .string(obj, path, "script")?
            .parse::<Script>()
            .map_err(|e| FormatError::schema(&script_path, e.to_string()))?;
        Ok(Some(TextInstance {
            polygon,
            care,
            transcription,
            categories,
            word_level,
            script,
        }))
    }

    fn image(&mut self, v: &Value, path: &str) -> Result<ImageAnnotation, FormatError> {
        let obj = self.expect_object(v, path)?;
        self.check_keys(
            obj,
            path,
            &[
                "image_id",
                "file_name",
                "width",
                "height",
                "source_dataset",
                "instances",
            ],
        )?;
        let image_id = self.string(obj, path, "image_id")?;
        let file_name = self.string(obj, path, "file_name")?;
        let width = self.dimension(obj, path, "width")?;
        let height = self.dimension(obj, path, "height")?;
        let source_dataset = self.string(obj, path, "source_dataset")?;
        let list_path = format!("{path}.instances");
        let mut instances = Vec::new();
        for (i, inst) in self
            .expect_array(self.field(obj, path, "instances")?, &list_path)?
            .iter()
            .enumerate()
        {
            if let Some(parsed) = self.instance(inst, &format!("{list_path}[{i}]"))? {
                instances.push(parsed);
            }
        }
        Ok(ImageAnnotation {
            image_id,
            file_name,
            width,
            height,
            source_dataset,
            instances,
        })
    }
}

/// Parse a canonical annotation document (schema 1.0).
pub fn parse_canonical(
    bytes: &[u8],
    mode: ParseMode,
) -> Result<(DatasetManifest, Vec<Diagnostic>), FormatError> {
    let text = decode_utf8(bytes)?;
    let root: Value = serde_json::from_str(text)
        .map_err(|e| FormatError::parse(e.line().max(1), e.to_string()))?;
    let mut diags = Vec::new();
    let mut w = Walker {
        mode,
        diags: &mut diags,
    };

    let root_obj = w.expect_object(&root, "$")?;
    w.check_keys(root_obj, "$", &["schema_version", "dataset"])?;
    let version = w.string(root_obj, "$", "schema_version")?;
    if version != SCHEMA_VERSION {
        return Err(FormatError::schema(
            "schema_version",
            format!("unsupported version {version:?}"),
        ));
    }
    let dataset = w.field(root_obj, "$", "dataset")?;
    let dataset_obj = w.expect_object(dataset, "dataset")?;
    w.check_keys(dataset_obj, "dataset", &["name", "split", "images"])?;
    let name = w.string(dataset_obj, "dataset", "name")?;
    let split = w
        .string(dataset_obj, "dataset", "split")?
        .parse::<Split>()
        .map_err(|e| FormatError::schema("dataset.split", e.to_string()))?;
    let images_path = "dataset.images";
    let mut images = Vec::new();
    for (i, img) in w
        .expect_array(w.field(dataset_obj, "dataset", "images")?, images_path)?
        .iter()
        .enumerate()
    {
        images.push(w.image(img, &format!("{images_path}[{i}]"))?);
    }
    Ok((
        DatasetManifest {
            name,
            split,
            images,
        },
        diags,
    ))
}

fn polygon_value(polygon: &Polygon) -> Value {
    Value::Array(
        polygon
            .vertices()
            .iter()
            .map(|p| Value::Array(vec![p.x.into(), p.y.into()]))
            .collect(),
    )
}

fn instance_value(inst: &TextInstance) -> Value {
    let mut m = Map::new();
    m.insert("polygon".into(), polygon_value(&inst.polygon));
    m.insert("care".into(), inst.care.into());
    m.insert(
        "transcription".into(),
        inst.transcription
            .as_deref()
            .map_or(Value::Null, |s| s.into()),
    );
    m.insert(
        "categories".into(),
        Value::Array(inst.categories.iter().map(|c| c.as_str().into()).collect()),
    );
    m.insert("word_level".into(), inst.word_level.into());
    m.insert("script".into(), inst.script.as_str().into());
    Value::Object(m)
}

/// Serialize a manifest in canonical form: fixed key order, images sorted by
/// id, shortest round-trip float rendering. Two semantically equal manifests
/// always produce identical bytes.
pub fn write_canonical(manifest: &DatasetManifest) -> String {
    let mut images: Vec<&ImageAnnotation> = manifest.images.iter().collect();
    images.sort_by(|a, b| a.image_id.cmp(&b.image_id));
    let images: Vec<Value> = images
        .into_iter()
        .map(|img| {
            let mut m = Map::new();
            m.insert("image_id".into(), img.image_id.as_str().into());
            m.insert("file_name".into(), img.file_name.as_str().into());
            m.insert("width".into(), img.width.into());
            m.insert("height".into(), img.height.into());
            m.insert("source_dataset".into(), img.source_dataset.as_str().into());
            m.insert(
                "instances".into(),
                Value::Array(img.instances.iter().map(instance_value).collect()),
            );
            Value::Object(m)
        })
        .collect();
    let mut dataset = Map::new();
    dataset.insert("name".into(), manifest.name.as_str().into());
    dataset.insert("split".into(), manifest.split.as_str().into());
    dataset.insert("images".into(), Value::Array(images));
    let mut root = Map::new();
    root.insert("schema_version".into(), SCHEMA_VERSION.into());
    root.insert("dataset".into(), Value::Object(dataset));
    let mut out = serde_json::to_string_pretty(&Value::Object(root)).expect("json encoding");
    out.push('\n');
    out
}

// ---------------------------------------------------------------------------
// Canonical JSON: detection results
// ---------------------------------------------------------------------------

/// Parse a canonical detection document.
pub fn parse_detections_json(
    bytes: &[u8],
    mode: ParseMode,
) -> Result<(DetectionSet, Vec<Diagnostic>), FormatError> {
    let text = decode_utf8(bytes)?;
    let root: Value = serde_json::from_str(text)
        .map_err(|e| FormatError::parse(e.line().max(1), e.to_string()))?;
    let mut diags = Vec::new();
    let mut w = Walker {
        mode,
        diags: &mut diags,
    };

    let root_obj = w.expect_object(&root, "$")?;
    w.check_keys(root_obj, "$", &["schema_version", "detector", "results"])?;
    let version = w.string(root_obj, "$", "schema_version")?;
    if version != SCHEMA_VERSION {
        return Err(FormatError::schema(
            "schema_version",
            format!("unsupported version {version:?}"),
        ));
    }
    let detector_name = w.string(root_obj, "$", "detector")?;
    let mut per_image: BTreeMap<String, Vec<ScoredPolygon>> = BTreeMap::new();
    let results = w.expect_array(w.field(root_obj, "$", "results")?, "results")?;
    for (i, entry) in results.iter().enumerate() {
        let path = format!("results[{i}]");
        let obj = w.expect_object(entry, &path)?;
        w.check_keys(obj, &path, &["image_id", "polygons", "scores"])?;
        let image_id = w.string(obj, &path, "image_id")?;
        let polys_path = format!("{path}.polygons");
        let polys = w.expect_array(w.field(obj, &path, "polygons")?, &polys_path)?;
        let scores = match obj.get("scores") {
            None | Some(Value::Null) => None,
            Some(v) => {
                let sp = format!("{path}.scores");
                let arr = w.expect_array(v, &sp)?;
                if arr.len() != polys.len() {
                    return Err(FormatError::schema(
                        &sp,
                        "scores length differs from polygons",
                    ));
                }
                let mut out = Vec::with_capacity(arr.len());
                for (k, s) in arr.iter().enumerate() {
                    let spk = format!("{sp}[{k}]");
                    let val = s
                        .as_f64()
                        .ok_or_else(|| FormatError::schema(&spk, "expected a number"))?;
                    if !(0.0..=1.0).contains(&val) {
                        return Err(FormatError::schema(
                            &spk,
                            format!("score {val} outside [0, 1]"),
                        ));
                    }
                    out.push(val);
                }
                Some(out)
            }
        };
        let entry_polys = per_image.entry(image_id).or_default();
        for (j, poly) in polys.iter().enumerate() {
            let pp = format!("{polys_path}[{j}]");
            match w.polygon(poly, &pp) {
                Ok(polygon) => entry_polys.push(ScoredPolygon {
                    polygon,
                    score: scores.as_ref().map(|s| s[j]),
                }),
                Err(e) => match mode {
                    ParseMode::Strict => return Err(e),
                    ParseMode::Lenient => w
                        .diags
                        .push(Diagnostic::error(format!("polygon dropped: {e}"), pp)),
                },
            }
        }
    }
    Ok((
        DetectionSet {
            detector_name,
            per_image,
        },
        diags,
    ))
}

/// Serialize a detection set in canonical form (results sorted by image id).
pub fn write_detections(det: &DetectionSet) -> String {
    let results: Vec<Value> = det
        .per_image
        .iter()
        .map(|(image_id, polys)| {
            let mut m = Map::new();
            m.insert("image_id".into(), image_id.as_str().into());
            m.insert(
                "polygons".into(),
                Value::Array(polys.iter().map(|s| polygon_value(&s.polygon)).collect()),
            );
            let scores = if polys.iter().all(|s| s.score.is_none()) {
                Value::Null
            } else {
                Value::Array(
                    polys
                        .iter()
                        .map(|s| s.score.unwrap_or(0.0).into())
                        .collect(),
                )
            };
            m.insert("scores".into(), scores);
            Value::Object(m)
        })
        .collect();
    let mut root = Map::new();
    root.insert("schema_version".into(), SCHEMA_VERSION.into());
    root.insert("detector".into(), det.detector_name.as_str().into());
    root.insert("results".into(), Value::Array(results));
    let mut out = serde_json::to_string_pretty(&Value::Object(root)).expect("json encoding");
    out.push('\n');
    out
}

// ---------------------------------------------------------------------------
// ICDAR-style text files
// ---------------------------------------------------------------------------

fn split_fields(line: &str) -> Vec<&str> {
    line.split(',').map(str::trim).collect()
}

fn parse_coord(field: &str) -> Option<f64> {
    let v: f64 = field.parse().ok()?;
    v.is_finite().then_some(v)
}

fn coords_to_polygon(fields: &[&str], line_no: usize) -> Result<Polygon, FormatError> {
    let mut points = Vec::with_capacity(fields.len() / 2);
    for pair in fields.chunks_exact(2) {
        let x = parse_coord(pair[0])
            .ok_or_else(|| FormatError::parse(line_no, format!("bad coordinate {:?}", pair[0])))?;
        let y = parse_coord(pair[1])
            .ok_or_else(|| FormatError::parse(line_no, format!("bad coordinate {:?}", pair[1])))?;
        points.push(Point::new(x, y));
    }
    Polygon::new(points).map_err(|e| FormatError::parse(line_no, e.to_string()))
}

/// Parse one ICDAR-style ground-truth file: one instance per line, formatted
/// `x1,y1,...,xN,yN,transcription` with at least 4 coordinate pairs. The
/// transcription may itself contain commas (URLs, delimited numbers); the
/// longest even run of leading numeric fields that still leaves a
/// transcription is taken as coordinates. `###` marks a don't-care region.
pub fn parse_icdar_gt(
    bytes: &[u8],
    mode: ParseMode,
) -> Result<(Vec<TextInstance>, Vec<Diagnostic>), FormatError> {
    let text = decode_utf8(bytes)?;
    let mut instances = Vec::new();
    let mut diags = Vec::new();
    for (idx, raw) in text.lines().enumerate() {
        let line_no = idx + 1;
        let line = raw.trim_end_matches('\r');
        if line.trim().is_empty() {
            continue;
        }
        let fields = split_fields(line);
        let numeric_prefix = fields
            .iter()
            .take_while(|f| parse_coord(f).is_some())
            .count();

        // Coordinates are the longest even run of leading numeric fields
        // that still leaves a transcription; everything after is the
        // transcription, commas and all.
        let mut k = numeric_prefix.min(fields.len() - 1);
        k -= k % 2;
        let (coord_fields, transcription): (&[&str], Option<String>) = if k >= 8 {
            (&fields[..k], Some(fields[k..].join(",")))
        } else if numeric_prefix == fields.len()
            && fields.len().is_multiple_of(2)
            && fields.len() >= 8
        {
            // Whole line numeric with an even count: a coordinates-only
            // line with the transcription missing.
            match mode {
                ParseMode::Strict => {
                    return Err(FormatError::parse(line_no, "missing transcription field"))
                }
                ParseMode::Lenient => {
                    diags.push(Diagnostic::warning(
                        "no transcription field; treating all fields as coordinates",
                        format!("line {line_no}"),
                    ));
                    (&fields[..], None)
                }
            }
        } else {
            return Err(FormatError::parse(
                line_no,
                "expected at least 4 coordinate pairs",
            ));
        };

        let polygon = match coords_to_polygon(coord_fields, line_no) {
            Ok(p) => p,
            Err(e) => match mode {
                ParseMode::Strict => return Err(e),
                ParseMode::Lenient => {
                    diags.push(Diagnostic::error(e.to_string(), format!("line {line_no}")));
                    continue;
                }
            },
        };
        let (care, transcription) = match transcription.as_deref() {
            Some(DONT_CARE_MARKER) => (false, None),
            _ => (true, transcription),
        };
        instances.push(TextInstance::new(polygon, care, transcription));
    }
    Ok((instances, diags))
}

/// Parse one per-image detection text file: comma-separated coordinates with
/// an optional trailing confidence in [0, 1].
pub fn parse_detection_txt(
    bytes: &[u8],
    mode: ParseMode,
) -> Result<(Vec<ScoredPolygon>, Vec<Diagnostic>), FormatError> {
    let text = decode_utf8(bytes)?;
    let mut out = Vec::new();
    let mut diags = Vec::new();
    for (idx, raw) in text.lines().enumerate() {
        let line_no = idx + 1;
        let line = raw.trim_end_matches('\r');
        if line.trim().is_empty() {
            continue;
        }
        let fields = split_fields(line);
        let values: Vec<f64> = fields
            .iter()
            .map(|f| {
                parse_coord(f)
                    .ok_or_else(|| FormatError::parse(line_no, format!("bad field {f:?}")))
            })
            .collect::<Result<_, _>>()?;
        let (coords, score) = if values.len() % 2 == 1 {
            let score = values[values.len() - 1];
            if !(0.0..=1.0).contains(&score) {
                return Err(FormatError::parse(
                    line_no,
                    format!("score {score} outside [0, 1]"),
                ));
            }
            (&values[..values.len() - 1], Some(score))
        } else {
            (&values[..], None)
        };
        if coords.len() < 6 {
            return Err(FormatError::parse(
                line_no,
                "expected at least 3 coordinate pairs",
            ));
        }
        let points = coords
            .chunks_exact(2)
            .map(|c| Point::new(c[0], c[1]))
            .collect();
        match Polygon::new(points) {
            Ok(polygon) => out.push(ScoredPolygon { polygon, score }),
            Err(e) => match mode {
                ParseMode::Strict => return Err(FormatError::parse(line_no, e.to_string())),
                ParseMode::Lenient => {
                    diags.push(Diagnostic::error(e.to_string(), format!("line {line_no}")))
                }
            },
        }
    }
    Ok((out, diags))
}

// ---------------------------------------------------------------------------
// Reference converters
// ---------------------------------------------------------------------------

/// Convert a COCO-Text-style JSON document to a canonical manifest.
///
/// Mapping: `imgs` entries become images; each annotation's `mask` (flat
/// `x1,y1,...` list) becomes the polygon, falling back to the `bbox`
/// rectangle; `legibility == "illegible"` becomes `care = false`;
/// `utf8_string` becomes the transcription; `language` maps english to
/// latin and everything else to non-latin. `subset` selects which `set`
/// value to export (all images when `None`).
pub fn convert_coco_text(
    bytes: &[u8],
    dataset_name: &str,
    subset: Option<&str>,
    mode: ParseMode,
) -> Result<(DatasetManifest, Vec<Diagnostic>), FormatError> {
    let text = decode_utf8(bytes)?;
    let root: Value = serde_json::from_str(text)
        .map_err(|e| FormatError::parse(e.line().max(1), e.to_string()))?;
    let mut diags = Vec::new();
    let empty = Map::new();
    let w = Walker {
        mode,
        diags: &mut diags,
    };

    let root_obj = w.expect_object(&root, "$")?;
    let imgs = w.expect_object(w.field(root_obj, "$", "imgs")?, "imgs")?;
    let anns: &Map<String, Value> = match root_obj.get("anns") {
        Some(v) => w.expect_object(v, "anns")?,
        None => &empty,
    };

    // Group annotations by image id; iterate in sorted key order so the
    // output is independent of JSON object ordering.
    let mut by_image: BTreeMap<String, Vec<(&String, &Value)>> = BTreeMap::new();
    for (ann_id, ann) in anns {
        let path = format!("anns.{ann_id}");
        let obj = w.expect_object(ann, &path)?;
        let image_id = match obj.get("image_id") {
            Some(Value::String(s)) => s.clone(),
            Some(Value::Number(n)) => n.to_string(),
            _ => {
                return Err(FormatError::schema(
                    format!("{path}.image_id"),
                    "expected a string or number",
                ))
            }
        };
        by_image.entry(image_id).or_default().push((ann_id, ann));
    }
    for list in by_image.values_mut() {
        list.sort_by(|a, b| a.0.cmp(b.0));
    }

    let mut images = Vec::new();
    let image_keys: Vec<&String> = {
        let mut keys: Vec<&String> = imgs.keys().collect();
        keys.sort();
        keys
    };
    for image_id in image_keys {
        let path = format!("imgs.{image_id}");
        let obj = w.expect_object(&imgs[image_id.as_str()], &path)?;
        if let Some(subset) = subset {
            let set = obj.get("set").and_then(Value::as_str).unwrap_or("");
            if set != subset {
                continue;
            }
        }
        let file_name = w.string(obj, &path, "file_name")?;
        let width = w.dimension(obj, &path, "width")?;
        let height = w.dimension(obj, &path, "height")?;
        let mut instances = Vec::new();
        for (ann_id, ann) in by_image
            .get(image_id.as_str())
            .map(Vec::as_slice)
            .unwrap_or(&[])
        {
            let apath = format!("anns.{ann_id}");
            let obj = w.expect_object(ann, &apath)?;
            let polygon = match coco_polygon(&w, obj, &apath) {
                Ok(p) => p,
                Err(e) => match mode {
                    ParseMode::Strict => return Err(e),
                    ParseMode::Lenient => {
                        w.diags
                            .push(Diagnostic::error(format!("instance dropped: {e}"), &apath));
                        continue;
                    }
                },
            };
            let legibility = obj
                .get("legibility")
                .and_then(Value::as_str)
                .unwrap_or("legible");
            let transcription = obj
                .get("utf8_string")
                .and_then(Value::as_str)
                .filter(|s| !s.is_empty())
                .map(str::to_owned);
            let care = legibility != "illegible";
            let (care, transcription) = if transcription.as_deref() == Some(DONT_CARE_MARKER) {
                (false, None)
            } else {
                (care, transcription)
            };
            let script = match obj.get("language").and_then(Value::as_str) {
                Some("english") => Script::Latin,
                Some("not english") => Script::NonLatin,
                _ => Script::Unknown,
            };
            let mut inst = TextInstance::new(polygon, care, transcription);
            inst.script = script;
            instances.push(inst);
        }
        images.push(ImageAnnotation {
            image_id: image_id.clone(),
            file_name,
            width,
            height,
            source_dataset: dataset_name.to_string(),
            instances,
        });
    }
    let split = match subset {
        Some("train") => Split::Train,
        Some("val") | Some("test") => Split::Test,
        _ => Split::Unsplit,
    };
    Ok((
        DatasetManifest {
            name: dataset_name.to_string(),
            split,
            images,
        },
        diags,
    ))
}

fn coco_polygon(w: &Walker, obj: &Map<String, Value>, path: &str) -> Result<Polygon, FormatError> {
    if let Some(mask) = obj.get("mask") {
        let mp = format!("{path}.mask");
        let arr = w.expect_array(mask, &mp)?;
        if arr.len() >= 6 && arr.len() % 2 == 0 {
            let mut points = Vec::with_capacity(arr.len() / 2);
            for pair in arr.chunks_exact(2) {
                let x = pair[0]
                    .as_f64()
                    .ok_or_else(|| FormatError::schema(&mp, "expected numbers"))?;
                let y = pair[1]
                    .as_f64()
                    .ok_or_else(|| FormatError::schema(&mp, "expected numbers"))?;
                points.push(Point::new(x, y));
            }
            return Polygon::new(points).map_err(|e| FormatError::schema(&mp, e.to_string()));
        }
    }
    let bp = format!("{path}.bbox");
    let bbox = w.expect_array(
        obj.get("bbox")
            .ok_or_else(|| FormatError::schema(path, "missing mask and bbox"))?,
        &bp,
    )?;
    if bbox.len() != 4 {
        return Err(FormatError::schema(&bp, "expected [x, y, w, h]"));
    }
    let nums: Vec<f64> = bbox
        .iter()
        .map(|v| {
            v.as_f64()
                .ok_or_else(|| FormatError::schema(&bp, "expected numbers"))
        })
        .collect::<Result<_, _>>()?;
    Polygon::rect(nums[0], nums[1], nums[0] + nums[2], nums[1] + nums[3])
        .map_err(|e| FormatError::schema(&bp, e.to_string()))
}

/// Parse one Total-Text mat-export ground-truth file. Each line looks like:
///
/// ```text
/// x: [[115 503 494 115]], y: [[322 346 426 404]], ornt: [u'c'], transcriptions: [u'nike']
/// ```
///
/// A `#` transcription marks a don't-care region.
pub fn parse_total_text(
    bytes: &[u8],
    mode: ParseMode,
) -> Result<(Vec<TextInstance>, Vec<Diagnostic>), FormatError> {
    let text = decode_utf8(bytes)?;
    let mut instances = Vec::new();
    let mut diags = Vec::new();
    for (idx, raw) in text.lines().enumerate() {
        let line_no = idx + 1;
        let line = raw.trim_end_matches('\r');
        if line.trim().is_empty() {
            continue;
        }
        let result = parse_total_text_line(line, line_no);
        match result {
            Ok(inst) => instances.push(inst),
            Err(e) => match mode {
                ParseMode::Strict => return Err(e),
                ParseMode::Lenient => {
                    diags.push(Diagnostic::error(e.to_string(), format!("line {line_no}")))
                }
            },
        }
    }
    Ok((instances, diags))
}

fn parse_total_text_line(line: &str, line_no: usize) -> Result<TextInstance, FormatError> {
    let xs = bracket_numbers(line, "x:", line_no)?;
    let ys = bracket_numbers(line, "y:", line_no)?;
    if xs.len() != ys.len() {
        return Err(FormatError::parse(
            line_no,
            "x and y lists differ in length",
        ));
    }
    let transcription = bracket_string(line, "transcriptions:");
    let points = xs
        .iter()
        .zip(&ys)
        .map(|(&x, &y)| Point::new(x, y))
        .collect();
    let polygon = Polygon::new(points).map_err(|e| FormatError::parse(line_no, e.to_string()))?;
    let (care, transcription) = match transcription.as_deref() {
        Some("#") | Some(DONT_CARE_MARKER) | None => (false, None),
        Some(_) => (true, transcription),
    };
    Ok(TextInstance::new(polygon, care, transcription))
}

/// Extract the whitespace-separated numbers of a `key: [[...]]` section.
fn bracket_numbers(line: &str, key: &str, line_no: usize) -> Result<Vec<f64>, FormatError> {
    let start = line
        .find(key)
        .ok_or_else(|| FormatError::parse(line_no, format!("missing {key} section")))?;
    let rest = &line[start + key.len()..];
    let open = rest
        .find("[[")
        .ok_or_else(|| FormatError::parse(line_no, format!("missing [[ after {key}")))?;
    let rest = &rest[open + 2..];
    let close = rest
        .find("]]")
        .ok_or_else(|| FormatError::parse(line_no, format!("missing ]] after {key}")))?;
    rest[..close]
        .split_whitespace()
        .map(|f| {
            parse_coord(f).ok_or_else(|| FormatError::parse(line_no, format!("bad number {f:?}")))
        })
        .collect()
}

/// Extract the first quoted string of a `key: [u'...']` section.
fn bracket_string(line: &str, key: &str) -> Option<String> {
    let start = line.find(key)?;
    let rest = &line[start + key.len()..];
    let open = rest.find('\'')?;
    let rest = &rest[open + 1..];
    let close = rest.find('\'')?;
    Some(rest[..close].to_string())
}

// ---------------------------------------------------------------------------
// Gap-report cell files
// ---------------------------------------------------------------------------

/// Parse cross-evaluation cells from CSV lines `train,test,f_measure`. A
/// header line is skipped when the third field is not numeric.
pub fn parse_gap_cells(bytes: &[u8]) -> Result<BTreeMap<(String, String), f64>, FormatError> {
    let text = decode_utf8(bytes)?;
    let mut cells = BTreeMap::new();
    for (idx, raw) in text.lines().enumerate() {
        let line_no = idx + 1;
        let line = raw.trim_end_matches('\r');
        if line.trim().is_empty() {
            continue;
        }
        let fields = split_fields(line);
        if fields.len() != 3 {
            return Err(FormatError::parse(line_no, "expected train,test,f_measure"));
        }
        let Some(f) = parse_coord(fields[2]) else {
            if line_no == 1 {
                continue; // header
            }
            return Err(FormatError::parse(
                line_no,
                format!("bad f_measure {:?}", fields[2]),
            ));
        };
        cells.insert((fields[0].to_string(), fields[1].to_string()), f);
    }
    Ok(cells)
}

/// Render gap cells back to the CSV form accepted by [`parse_gap_cells`].
pub fn write_gap_cells(cells: &BTreeMap<(String, String), f64>) -> String {
    let mut out = String::from("train,test,f_measure\n");
    for ((train, test), f) in cells {
        let _ = writeln!(out, "{train},{test},{f}");
    }
    out
}
