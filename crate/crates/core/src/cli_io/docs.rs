//! JSON documents for boxes and evaluation inputs, and 9-significant-digit
//! number formatting shared by every writer.

use std::collections::BTreeMap;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geometry::{BBox, PredBox, ScoredBox};

pub const SCHEMA_VERSION: u32 = 1;

/// `%.9g`: nine significant digits, trailing zeros dropped, exponent form
/// below 1e-4 or from 1e9 up.
pub fn fmt_g9(x: f64) -> String {
    if x.is_nan() {
        return "nan".into();
    }
    if x.is_infinite() {
        return if x > 0.0 { "inf".into() } else { "-inf".into() };
    }
    if x == 0.0 {
        return if x.is_sign_negative() { "-0".into() } else { "0".into() };
    }
    let sci = format!("{x:.8e}");
    let (mantissa, exp) = sci.split_once('e').expect("exponent form");
    let exp: i32 = exp.parse().expect("integer exponent");
    if !(-4..9).contains(&exp) {
        let m = strip_zeros(mantissa);
        let sign = if exp < 0 { '-' } else { '+' };
        return format!("{m}e{sign}{:02}", exp.abs());
    }
    let decimals = (8 - exp).max(0) as usize;
    strip_zeros(&format!("{x:.decimals$}")).to_string()
}

fn strip_zeros(s: &str) -> &str {
    if s.contains('.') {
        s.trim_end_matches('0').trim_end_matches('.')
    } else {
        s
    }
}

/// Round to the value printed by [`fmt_g9`].
pub fn round_g9(x: f64) -> f64 {
    if x.is_finite() {
        fmt_g9(x).parse().expect("formatted float parses")
    } else {
        x
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BoxRecord {
    pub cx: f64,
    pub cy: f64,
    pub w: f64,
    pub h: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub score: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub is_object: Option<bool>,
    /// `(object, no-object)` logits of a prediction.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub logits: Option<[f64; 2]>,
}

impl BoxRecord {
    pub fn from_box(b: &BBox) -> Self {
        Self {
            cx: b.cx,
            cy: b.cy,
            w: b.w,
            h: b.h,
            score: None,
            is_object: None,
            logits: None,
        }
    }

    pub fn scored(b: &ScoredBox) -> Self {
        Self {
            score: Some(b.score),
            ..Self::from_box(&b.bbox)
        }
    }

    pub fn bbox(&self) -> BBox {
        BBox::new(self.cx, self.cy, self.w, self.h)
    }

    fn validate(&self, what: &str) -> Result<()> {
        let b = self.bbox();
        if !b.is_valid() {
            return Err(Error::InvalidData(format!("{what}: invalid box {b:?}")));
        }
        if let Some(s) = self.score {
            if !(s.is_finite() && s >= 0.0) {
                return Err(Error::InvalidData(format!("{what}: invalid score {s}")));
            }
        }
        if self.logits.is_some_and(|l| l.iter().any(|v| !v.is_finite())) {
            return Err(Error::InvalidData(format!("{what}: non-finite logits")));
        }
        Ok(())
    }

    /// Corners clipped to the image and every number rounded for output.
    fn for_output(&self) -> Self {
        let b = self.bbox().clamped();
        Self {
            cx: round_g9(b.cx),
            cy: round_g9(b.cy),
            w: round_g9(b.w),
            h: round_g9(b.h),
            score: self.score.map(round_g9),
            is_object: self.is_object,
            logits: self.logits.map(|l| [round_g9(l[0]), round_g9(l[1])]),
        }
    }

    /// A target box; records marked `is_object: false` are padding and
    /// yield `None`. Missing scores count as 1.
    pub fn to_target(&self) -> Option<ScoredBox> {
        (self.is_object != Some(false)).then(|| ScoredBox::new(self.bbox(), self.score.unwrap_or(1.0)))
    }

    /// A prediction from its logits, or from `score` read as the object
    /// probability when no logits are given.
    pub fn to_prediction(&self) -> Result<PredBox> {
        if let Some([lo, lno]) = self.logits {
            return Ok(PredBox::new(self.bbox(), lo, lno));
        }
        match self.score {
            Some(p) if p > 0.0 && p < 1.0 => Ok(PredBox::new(self.bbox(), (p / (1.0 - p)).ln(), 0.0)),
            Some(p) => Err(Error::InvalidData(format!("prediction probability {p} must lie in (0, 1)"))),
            None => Err(Error::InvalidData("prediction needs `logits` or `score`".into())),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BoxDocument {
    pub schema_version: u32,
    pub image_width: u32,
    pub image_height: u32,
    pub boxes: Vec<BoxRecord>,
    #[serde(default)]
    pub metadata: BTreeMap<String, String>,
}

impl BoxDocument {
    pub fn new(image_width: usize, image_height: usize, boxes: Vec<BoxRecord>) -> Self {
        Self {
            schema_version: SCHEMA_VERSION,
            image_width: image_width as u32,
            image_height: image_height as u32,
            boxes,
            metadata: BTreeMap::new(),
        }
    }

    pub fn with_meta(mut self, key: &str, value: impl Into<String>) -> Self {
        self.metadata.insert(key.to_string(), value.into());
        self
    }

    pub fn validate(&self) -> Result<()> {
        check_version(self.schema_version)?;
        for (i, b) in self.boxes.iter().enumerate() {
            b.validate(&format!("box {i}"))?;
        }
        Ok(())
    }

    pub fn targets(&self) -> Vec<ScoredBox> {
        self.boxes.iter().filter_map(BoxRecord::to_target).collect()
    }

    pub fn predictions(&self) -> Result<Vec<PredBox>> {
        self.boxes.iter().map(BoxRecord::to_prediction).collect()
    }

    pub fn to_json(&self) -> String {
        let out = Self {
            boxes: self.boxes.iter().map(BoxRecord::for_output).collect(),
            ..self.clone()
        };
        let mut s = serde_json::to_string_pretty(&out).expect("serializable document");
        s.push('\n');
        s
    }
}

fn check_version(v: u32) -> Result<()> {
    if v != SCHEMA_VERSION {
        return Err(Error::InvalidData(format!("unsupported schema_version {v}")));
    }
    Ok(())
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GroundTruthSample {
    pub id: String,
    pub boxes: Vec<BoxRecord>,
}

/// Ground-truth boxes per evaluation sample.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GroundTruthDocument {
    pub schema_version: u32,
    pub samples: Vec<GroundTruthSample>,
}

impl GroundTruthDocument {
    pub fn validate(&self) -> Result<()> {
        check_version(self.schema_version)?;
        for s in &self.samples {
            for b in &s.boxes {
                b.validate(&format!("sample {}", s.id))?;
            }
        }
        check_unique(self.samples.iter().map(|s| s.id.as_str()))
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PredictionSample {
    pub id: String,
    #[serde(rename = "box")]
    pub bbox: BoxRecord,
}

/// One predicted box per evaluation sample.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PredictionDocument {
    pub schema_version: u32,
    pub samples: Vec<PredictionSample>,
}

impl PredictionDocument {
    pub fn validate(&self) -> Result<()> {
        check_version(self.schema_version)?;
        for s in &self.samples {
            s.bbox.validate(&format!("sample {}", s.id))?;
        }
        check_unique(self.samples.iter().map(|s| s.id.as_str()))
    }
}

fn check_unique<'a>(ids: impl Iterator<Item = &'a str>) -> Result<()> {
    let mut seen = std::collections::HashSet::new();
    for id in ids {
        if !seen.insert(id) {
            return Err(Error::InvalidData(format!("duplicate sample id {id}")));
        }
    }
    Ok(())
}

/// Read and validate a JSON document.
pub fn read_json<T: for<'de> Deserialize<'de>>(path: impl AsRef<Path>) -> Result<T> {
    let text = std::fs::read_to_string(path.as_ref()).map_err(|e| Error::io(path.as_ref(), e))?;
    Ok(serde_json::from_str(&text)?)
}

pub fn read_box_document(path: impl AsRef<Path>) -> Result<BoxDocument> {
    let d: BoxDocument = read_json(path)?;
    d.validate()?;
    Ok(d)
}

pub fn write_text(path: impl AsRef<Path>, text: &str) -> Result<()> {
    std::fs::write(path.as_ref(), text).map_err(|e| Error::io(path.as_ref(), e))
}
