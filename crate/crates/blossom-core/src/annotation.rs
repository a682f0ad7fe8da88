//! YOLO label file parsing and serialization.
//!
//! A label file is UTF-8 text with one object per line. Ground-truth lines
//! carry five whitespace-separated fields (`class cx cy w h`), prediction
//! lines a sixth confidence field. All coordinates are normalized decimals;
//! this crate stays in normalized space throughout, so clustering behaves the
//! same at any image resolution.
//!
//! Parsing is total: every input yields either a validated
//! [`FrameAnnotations`] or a structured error naming the offending line.
//! Serialization is canonical (6 fractional digits, one trailing newline per
//! line), so equal inputs always produce identical bytes and
//! parse ∘ serialize ∘ parse is the identity on values.

use std::fmt;
use std::path::PathBuf;

use thiserror::Error;

/// Index of a detection category (`0` = unopened, `1` = opened by default).
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct CategoryId(pub u32);

impl fmt::Display for CategoryId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.0)
    }
}

/// A named category: an entry of a [`Taxonomy`].
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Category {
    pub id: CategoryId,
    pub name: String,
}

/// The category naming table. Index is the stable identifier; names are for
/// report readability and the renderer's palette.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Taxonomy {
    categories: Vec<Category>,
}

impl Taxonomy {
    /// Category IDs of the default two-class flower taxonomy.
    pub const UNOPENED: CategoryId = CategoryId(0);
    pub const OPENED: CategoryId = CategoryId(1);

    /// The default two-class flower taxonomy: `0 -> unopened`, `1 -> opened`.
    pub fn default_flowers() -> Self {
        Self::from_names(["unopened", "opened"]).expect("default names are distinct")
    }

    /// Build a taxonomy from names in index order.
    pub fn from_names<I, S>(names: I) -> Result<Self, TaxonomyError>
    where
        I: IntoIterator<Item = S>,
        S: Into<String>,
    {
        let mut categories = Vec::new();
        for (index, name) in names.into_iter().enumerate() {
            let name = name.into();
            if name.is_empty() {
                return Err(TaxonomyError::EmptyName { index });
            }
            if categories.iter().any(|c: &Category| c.name == name) {
                return Err(TaxonomyError::DuplicateName { name });
            }
            categories.push(Category {
                id: CategoryId(index as u32),
                name,
            });
        }
        Ok(Self { categories })
    }

    /// Parse a names file: one category name per line, line number = index.
    /// Blank lines are rejected (they would silently shift every index).
    pub fn from_names_file(content: &str) -> Result<Self, TaxonomyError> {
        Self::from_names(content.lines().map(str::trim))
    }

    pub fn len(&self) -> usize {
        self.categories.len()
    }

    pub fn is_empty(&self) -> bool {
        self.categories.is_empty()
    }

    pub fn categories(&self) -> &[Category] {
        &self.categories
    }

    /// Name for a category index, falling back to `class_<i>` for indices the
    /// taxonomy does not cover.
    pub fn name(&self, id: CategoryId) -> String {
        self.categories
            .get(id.0 as usize)
            .map(|c| c.name.clone())
            .unwrap_or_else(|| format!("class_{}", id.0))
    }

    pub fn id_of(&self, name: &str) -> Option<CategoryId> {
        self.categories
            .iter()
            .find(|c| c.name == name)
            .map(|c| c.id)
    }
}

impl Default for Taxonomy {
    fn default() -> Self {
        Self::default_flowers()
    }
}

#[derive(Debug, Error, PartialEq, Eq)]
pub enum TaxonomyError {
    #[error("category name at index {index} is empty")]
    EmptyName { index: usize },
    #[error("duplicate category name `{name}`")]
    DuplicateName { name: String },
}

/// Normalized axis-aligned bounding box in YOLO center/size form.
///
/// The center must lie inside the unit square and the size must be positive;
/// box *edges* may extend past `[0, 1]` (clipping is the renderer's job).
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BoundingBox {
    pub cx: f64,
    pub cy: f64,
    pub w: f64,
    pub h: f64,
}

impl BoundingBox {
    pub fn new(cx: f64, cy: f64, w: f64, h: f64) -> Result<Self, BoxError> {
        let b = Self { cx, cy, w, h };
        b.validate()?;
        Ok(b)
    }

    pub fn validate(&self) -> Result<(), BoxError> {
        let check = |field: &'static str, value: f64, lo_open: bool| {
            let ok = value.is_finite()
                && value <= 1.0
                && if lo_open { value > 0.0 } else { value >= 0.0 };
            if ok {
                Ok(())
            } else {
                Err(BoxError { field, value })
            }
        };
        check("cx", self.cx, false)?;
        check("cy", self.cy, false)?;
        check("w", self.w, true)?;
        check("h", self.h, true)?;
        Ok(())
    }

    /// `(x0, y0, x1, y1)` extents derived from the center/size form.
    pub fn extents(&self) -> (f64, f64, f64, f64) {
        (
            self.cx - self.w / 2.0,
            self.cy - self.h / 2.0,
            self.cx + self.w / 2.0,
            self.cy + self.h / 2.0,
        )
    }

    pub fn area(&self) -> f64 {
        self.w * self.h
    }

    pub fn translate(&self, dx: f64, dy: f64) -> BoundingBox {
        BoundingBox {
            cx: self.cx + dx,
            cy: self.cy + dy,
            ..*self
        }
    }
}

#[derive(Debug, Error, PartialEq)]
#[error("{field} = {value} outside its valid range")]
pub struct BoxError {
    pub field: &'static str,
    pub value: f64,
}

/// One detected flower.
#[derive(Debug, Clone, PartialEq)]
pub struct Detection {
    pub category: CategoryId,
    pub bbox: BoundingBox,
    /// Present for prediction records, absent for ground truth.
    pub confidence: Option<f64>,
}

/// All detections of one image frame, in file line order. Reports reference
/// detections by their index here, so order is part of the contract.
#[derive(Debug, Clone, PartialEq)]
pub struct FrameAnnotations {
    pub frame_id: String,
    pub detections: Vec<Detection>,
    pub source_path: Option<PathBuf>,
}

impl FrameAnnotations {
    pub fn new(frame_id: impl Into<String>, detections: Vec<Detection>) -> Self {
        Self {
            frame_id: frame_id.into(),
            detections,
            source_path: None,
        }
    }
}

/// Whether a label file carries ground truth (no confidence column) or
/// predictions (confidence required).
///
/// The distinction is strict by design: average precision needs a ranking,
/// and a silently defaulted confidence would corrupt the PR curve.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum LabelMode {
    GroundTruth,
    Prediction,
}

impl LabelMode {
    fn field_count(self) -> usize {
        match self {
            LabelMode::GroundTruth => 5,
            LabelMode::Prediction => 6,
        }
    }
}

impl fmt::Display for LabelMode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            LabelMode::GroundTruth => write!(f, "ground-truth"),
            LabelMode::Prediction => write!(f, "prediction"),
        }
    }
}

/// Error for a single label line; [`LabelFileError`] adds the line number.
#[derive(Debug, Error, PartialEq)]
pub enum LineError {
    #[error("malformed line `{text}`: {reason}")]
    Malformed { text: String, reason: String },
    #[error("value out of range in `{text}`: {reason}")]
    OutOfRange { text: String, reason: String },
}

#[derive(Debug, Error, PartialEq)]
#[error("line {line}: {source}")]
pub struct LabelFileError {
    /// 1-based line number in the file.
    pub line: usize,
    #[source]
    pub source: LineError,
}

/// Parse one label line into a [`Detection`].
///
/// Field order is `category cx cy w h` with a trailing confidence in
/// prediction mode. The category must be a non-negative integer and every
/// coordinate a decimal float satisfying the box invariants.
pub fn parse_label_line(line: &str, mode: LabelMode) -> Result<Detection, LineError> {
    let text = line.trim();
    let malformed = |reason: String| LineError::Malformed {
        text: text.to_string(),
        reason,
    };
    let out_of_range = |reason: String| LineError::OutOfRange {
        text: text.to_string(),
        reason,
    };

    if text.is_empty() {
        return Err(malformed("empty line".to_string()));
    }

    let fields: Vec<&str> = text.split_whitespace().collect();
    let expected = mode.field_count();
    if fields.len() != expected {
        return Err(malformed(format!(
            "expected {expected} fields for {mode} mode, found {}",
            fields.len()
        )));
    }

    let category: u32 = fields[0].parse().map_err(|_| {
        malformed(format!(
            "field 1 (category) `{}` is not a non-negative integer",
            fields[0]
        ))
    })?;

    let mut nums = [0.0f64; 5];
    let names = ["cx", "cy", "w", "h", "confidence"];
    for (i, raw) in fields[1..].iter().enumerate() {
        nums[i] = raw.parse().map_err(|_| {
            malformed(format!(
                "field {} ({}) `{raw}` is not a number",
                i + 2,
                names[i]
            ))
        })?;
    }

    let bbox = BoundingBox::new(nums[0], nums[1], nums[2], nums[3]).map_err(|e| {
        out_of_range(format!(
            "field {} ({})",
            2 + names.iter().position(|n| *n == e.field).unwrap(),
            e
        ))
    })?;

    let confidence = match mode {
        LabelMode::GroundTruth => None,
        LabelMode::Prediction => {
            let conf = nums[4];
            if !(conf.is_finite() && (0.0..=1.0).contains(&conf)) {
                return Err(out_of_range(format!(
                    "field 6 (confidence) = {conf} not in [0, 1]"
                )));
            }
            Some(conf)
        }
    };

    Ok(Detection {
        category: CategoryId(category),
        bbox,
        confidence,
    })
}

/// Parse a whole label file. Blank lines are skipped; detection order equals
/// file line order. An empty file is a valid frame with no flowers.
pub fn parse_label_file(
    content: &str,
    frame_id: &str,
    mode: LabelMode,
) -> Result<FrameAnnotations, LabelFileError> {
    let mut detections = Vec::new();
    for (idx, raw) in content.lines().enumerate() {
        if raw.trim().is_empty() {
            continue;
        }
        let det = parse_label_line(raw, mode).map_err(|source| LabelFileError {
            line: idx + 1,
            source,
        })?;
        detections.push(det);
    }
    Ok(FrameAnnotations::new(frame_id, detections))
}

/// Serialize a frame to canonical label-file text: one line per detection,
/// space-separated fields, 6 fractional digits, trailing newline. An empty
/// frame serializes to the empty string.
pub fn serialize_label_file(frame: &FrameAnnotations, mode: LabelMode) -> String {
    let mut out = String::new();
    for det in &frame.detections {
        let b = &det.bbox;
        out.push_str(&format!(
            "{} {:.6} {:.6} {:.6} {:.6}",
            det.category, b.cx, b.cy, b.w, b.h
        ));
        if mode == LabelMode::Prediction {
            // A missing confidence in prediction mode is a caller bug, not a
            // file-format condition; serialize what evaluation would reject.
            out.push_str(&format!(" {:.6}", det.confidence.unwrap_or(0.0)));
        }
        out.push('\n');
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn parses_ground_truth_line() {
        let det = parse_label_line("0 0.5 0.5 0.1 0.2", LabelMode::GroundTruth).unwrap();
        assert_eq!(det.category, CategoryId(0));
        assert_eq!(det.bbox, BoundingBox::new(0.5, 0.5, 0.1, 0.2).unwrap());
        assert_eq!(det.confidence, None);
    }

    #[test]
    fn parses_prediction_line() {
        let det = parse_label_line("1 0.25 0.75 0.05 0.05 0.90", LabelMode::Prediction).unwrap();
        assert_eq!(det.category, CategoryId(1));
        assert_eq!(det.confidence, Some(0.90));
    }

    #[test]
    fn rejects_wrong_field_count() {
        let err = parse_label_line("0 0.5 0.5 0.1", LabelMode::GroundTruth).unwrap_err();
        assert!(matches!(err, LineError::Malformed { .. }), "{err:?}");
    }

    #[test]
    fn rejects_confidence_in_ground_truth_mode() {
        let err = parse_label_line("0 0.5 0.5 0.1 0.2 0.9", LabelMode::GroundTruth).unwrap_err();
        assert!(matches!(err, LineError::Malformed { .. }));
    }

    #[test]
    fn rejects_missing_confidence_in_prediction_mode() {
        let err = parse_label_line("0 0.5 0.5 0.1 0.2", LabelMode::Prediction).unwrap_err();
        assert!(matches!(err, LineError::Malformed { .. }));
    }

    #[test]
    fn rejects_non_numeric_token() {
        let err = parse_label_line("0 0.5 oops 0.1 0.2", LabelMode::GroundTruth).unwrap_err();
        match err {
            LineError::Malformed { reason, .. } => assert!(reason.contains("cy"), "{reason}"),
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn rejects_negative_category() {
        let err = parse_label_line("-1 0.5 0.5 0.1 0.2", LabelMode::GroundTruth).unwrap_err();
        assert!(matches!(err, LineError::Malformed { .. }));
    }

    #[test]
    fn rejects_out_of_range_center() {
        let err = parse_label_line("0 1.5 0.5 0.1 0.2", LabelMode::GroundTruth).unwrap_err();
        assert!(matches!(err, LineError::OutOfRange { .. }));
    }

    #[test]
    fn rejects_zero_width() {
        let err = parse_label_line("0 0.5 0.5 0.0 0.2", LabelMode::GroundTruth).unwrap_err();
        assert!(matches!(err, LineError::OutOfRange { .. }));
    }

    #[test]
    fn rejects_confidence_above_one() {
        let err = parse_label_line("0 0.5 0.5 0.1 0.2 1.5", LabelMode::Prediction).unwrap_err();
        assert!(matches!(err, LineError::OutOfRange { .. }));
    }

    #[test]
    fn edge_box_center_on_boundary_is_valid() {
        // cx may sit on the frame edge even though box edges then poke out.
        let det = parse_label_line("0 0.0 1.0 0.2 0.2", LabelMode::GroundTruth).unwrap();
        assert_eq!(det.bbox.cx, 0.0);
        assert_eq!(det.bbox.cy, 1.0);
    }

    #[test]
    fn file_preserves_line_order_and_skips_blanks() {
        let content = "0 0.5 0.5 0.1 0.2\n\n   \n1 0.2 0.3 0.05 0.05\n";
        let frame = parse_label_file(content, "f1", LabelMode::GroundTruth).unwrap();
        assert_eq!(frame.frame_id, "f1");
        assert_eq!(frame.detections.len(), 2);
        assert_eq!(frame.detections[0].category, CategoryId(0));
        assert_eq!(frame.detections[1].category, CategoryId(1));
    }

    #[test]
    fn empty_file_is_empty_frame() {
        let frame = parse_label_file("", "empty", LabelMode::GroundTruth).unwrap();
        assert!(frame.detections.is_empty());
    }

    #[test]
    fn error_carries_one_based_line_number() {
        let content = "0 0.5 0.5 0.1 0.2\n0 0.5 0.5 0.1\n";
        let err = parse_label_file(content, "f", LabelMode::GroundTruth).unwrap_err();
        assert_eq!(err.line, 2);
    }

    #[test]
    fn serializes_canonical_form() {
        let frame = FrameAnnotations::new(
            "f",
            vec![Detection {
                category: CategoryId(0),
                bbox: BoundingBox::new(0.5, 0.5, 0.1, 0.2).unwrap(),
                confidence: None,
            }],
        );
        assert_eq!(
            serialize_label_file(&frame, LabelMode::GroundTruth),
            "0 0.500000 0.500000 0.100000 0.200000\n"
        );
    }

    #[test]
    fn serializes_empty_frame_to_empty_string() {
        let frame = FrameAnnotations::new("f", vec![]);
        assert_eq!(serialize_label_file(&frame, LabelMode::GroundTruth), "");
    }

    #[test]
    fn parse_serialize_parse_round_trip() {
        let content = "0 0.5 0.5 0.1 0.2\n1 0.25 0.75 0.05 0.05\n";
        let once = parse_label_file(content, "f", LabelMode::GroundTruth).unwrap();
        let text = serialize_label_file(&once, LabelMode::GroundTruth);
        let twice = parse_label_file(&text, "f", LabelMode::GroundTruth).unwrap();
        assert_eq!(once.detections, twice.detections);
    }

    #[test]
    fn taxonomy_defaults_and_fallback() {
        let t = Taxonomy::default_flowers();
        assert_eq!(t.name(CategoryId(0)), "unopened");
        assert_eq!(t.name(CategoryId(1)), "opened");
        assert_eq!(t.name(CategoryId(7)), "class_7");
        assert_eq!(t.id_of("opened"), Some(CategoryId(1)));
    }

    #[test]
    fn taxonomy_rejects_duplicates() {
        let err = Taxonomy::from_names_file("bud\nbud\n").unwrap_err();
        assert_eq!(err, TaxonomyError::DuplicateName { name: "bud".into() });
    }
}
