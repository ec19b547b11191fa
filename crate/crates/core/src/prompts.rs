//! Question/answer templates and answer parsing.
//!
//! Templates live in a versioned JSON table compiled into the crate
//! (`templates.json`); callers may load a replacement table with
//! [`TemplateTable::from_json`]. Placeholders are written `{name}`.

use alloc::borrow::ToOwned;
use alloc::format;
use alloc::string::{String, ToString};
use alloc::vec::Vec;
use core::fmt;

use serde::{Deserialize, Serialize};

use crate::augment::ImageDims;
use crate::error::{Error, Result};
use crate::geometry::{Intrinsics, Pixel};
use crate::tasks::TaskKind;

pub const TEMPLATE_SCHEMA_VERSION: &str = "1";
pub const BUILTIN_TEMPLATES: &str = include_str!("templates.json");

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PromptVariant {
    #[default]
    MarkerPlain,
    MarkerGrpo,
    TextCoordinate,
    IntrinsicsInText,
    RayThenDepth,
}

impl PromptVariant {
    pub const ALL: [PromptVariant; 5] = [
        PromptVariant::MarkerPlain,
        PromptVariant::MarkerGrpo,
        PromptVariant::TextCoordinate,
        PromptVariant::IntrinsicsInText,
        PromptVariant::RayThenDepth,
    ];

    pub fn name(&self) -> &'static str {
        match self {
            PromptVariant::MarkerPlain => "marker_plain",
            PromptVariant::MarkerGrpo => "marker_grpo",
            PromptVariant::TextCoordinate => "text_coordinate",
            PromptVariant::IntrinsicsInText => "intrinsics_in_text",
            PromptVariant::RayThenDepth => "ray_then_depth",
        }
    }

    pub fn from_name(s: &str) -> Option<Self> {
        Self::ALL.into_iter().find(|v| v.name() == s)
    }

    /// Whether the query pixel is communicated by a drawn marker.
    pub fn uses_marker(&self) -> bool {
        !matches!(self, PromptVariant::TextCoordinate)
    }
}

impl fmt::Display for PromptVariant {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct TemplateEntry {
    pub task: TaskKind,
    pub variant: PromptVariant,
    pub question: String,
    pub answer: String,
    /// Unit word the lenient parser anchors on.
    pub unit: String,
    /// True when the wording is a reconstruction rather than a published prompt.
    #[serde(default)]
    pub reconstructed: bool,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct TemplateTable {
    pub schema_version: String,
    pub template_version: String,
    pub entries: Vec<TemplateEntry>,
}

impl TemplateTable {
    pub fn builtin() -> Self {
        Self::from_json(BUILTIN_TEMPLATES).expect("built-in template table is valid")
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let table: TemplateTable =
            serde_json::from_str(text).map_err(|e| Error::Template(format!("malformed template table: {e}")))?;
        table.validate()?;
        Ok(table)
    }

    pub fn validate(&self) -> Result<()> {
        if self.schema_version != TEMPLATE_SCHEMA_VERSION {
            return Err(Error::Template(format!(
                "unsupported template schema_version {:?}, expected {TEMPLATE_SCHEMA_VERSION:?}",
                self.schema_version
            )));
        }
        for (i, e) in self.entries.iter().enumerate() {
            if self.entries[..i].iter().any(|o| o.task == e.task && o.variant == e.variant) {
                return Err(Error::Template(format!("duplicate template for {}/{}", e.task, e.variant)));
            }
            let slots = placeholders(&e.answer).map_err(Error::Template)?;
            if !slots.iter().any(|s| *s == "value") {
                return Err(Error::Template(format!("answer template {}/{} lacks {{value}}", e.task, e.variant)));
            }
            if e.variant == PromptVariant::RayThenDepth {
                for need in ["h_angle", "h_dir", "v_angle", "v_dir"] {
                    if !slots.iter().any(|s| *s == need) {
                        return Err(Error::Template(format!("ray_then_depth answer lacks {{{need}}}")));
                    }
                }
            }
            placeholders(&e.question).map_err(Error::Template)?;
            if e.unit.trim().is_empty() {
                return Err(Error::Template(format!("template {}/{} has empty unit", e.task, e.variant)));
            }
        }
        Ok(())
    }

    pub fn get(&self, task: TaskKind, variant: PromptVariant) -> Result<&TemplateEntry> {
        self.entries
            .iter()
            .find(|e| e.task == task && e.variant == variant)
            .ok_or(Error::UnsupportedTask { task: task.name(), variant: variant.name() })
    }
}

/// Inputs a question template may reference.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct QuestionContext {
    pub dims: Option<ImageDims>,
    pub pixel: Option<Pixel>,
    pub intrinsics: Option<Intrinsics>,
    pub given_time: Option<f64>,
    pub given_speed: Option<f64>,
    pub labels: Option<(String, String)>,
}

/// Values an answer template may reference.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AnswerValues {
    pub value: f64,
    /// Signed (horizontal, vertical) ray angles in degrees.
    pub angles: Option<(f64, f64)>,
}

impl AnswerValues {
    pub fn value(value: f64) -> Self {
        Self { value, angles: None }
    }
}

/// Round to two decimals, ties away from zero.
pub fn round2(v: f64) -> f64 {
    libm::round(v * 100.0) / 100.0
}

pub fn round1(v: f64) -> f64 {
    libm::round(v * 10.0) / 10.0
}

pub fn format2(v: f64) -> String {
    format!("{:.2}", round2(v))
}

/// Up to two decimals with trailing zeros dropped: `1000`, `512.5`.
pub fn format_trimmed(v: f64) -> String {
    let s = format!("{:.2}", round2(v));
    let s = s.trim_end_matches('0').trim_end_matches('.');
    if s == "-0" { "0".to_owned() } else { s.to_owned() }
}

enum Piece<'a> {
    Lit(&'a str),
    Slot(&'a str),
}

fn split_template(t: &str) -> core::result::Result<Vec<Piece<'_>>, String> {
    let mut out = Vec::new();
    let mut rest = t;
    while let Some(open) = rest.find('{') {
        if open > 0 {
            out.push(Piece::Lit(&rest[..open]));
        }
        let close = rest[open..].find('}').ok_or_else(|| format!("unclosed placeholder in {t:?}"))? + open;
        let name = &rest[open + 1..close];
        if name.is_empty() || !name.chars().all(|c| c.is_ascii_alphanumeric() || c == '_') {
            return Err(format!("bad placeholder {{{name}}} in {t:?}"));
        }
        out.push(Piece::Slot(name));
        rest = &rest[close + 1..];
    }
    if !rest.is_empty() {
        out.push(Piece::Lit(rest));
    }
    Ok(out)
}

fn placeholders(t: &str) -> core::result::Result<Vec<&str>, String> {
    Ok(split_template(t)?
        .into_iter()
        .filter_map(|p| match p {
            Piece::Slot(s) => Some(s),
            Piece::Lit(_) => None,
        })
        .collect())
}

fn render(template: &str, lookup: impl Fn(&str) -> Result<String>) -> Result<String> {
    let mut out = String::with_capacity(template.len() + 16);
    for piece in split_template(template).map_err(Error::Template)? {
        match piece {
            Piece::Lit(s) => out.push_str(s),
            Piece::Slot(name) => out.push_str(&lookup(name)?),
        }
    }
    Ok(out)
}

pub fn build_question(table: &TemplateTable, task: TaskKind, variant: PromptVariant, ctx: &QuestionContext) -> Result<String> {
    let entry = table.get(task, variant)?;
    render(&entry.question, |name| {
        Ok(match name {
            "width" => ctx.dims.ok_or(Error::MissingMetadata("image width"))?.width.to_string(),
            "height" => ctx.dims.ok_or(Error::MissingMetadata("image height"))?.height.to_string(),
            "x" => format!("{}", libm::round(ctx.pixel.ok_or(Error::MissingMetadata("query pixel"))?.u) as i64),
            "y" => format!("{}", libm::round(ctx.pixel.ok_or(Error::MissingMetadata("query pixel"))?.v) as i64),
            "fx" => format_trimmed(ctx.intrinsics.ok_or(Error::MissingMetadata("intrinsics"))?.fx),
            "fy" => format_trimmed(ctx.intrinsics.ok_or(Error::MissingMetadata("intrinsics"))?.fy),
            "cx" => format_trimmed(ctx.intrinsics.ok_or(Error::MissingMetadata("intrinsics"))?.cx),
            "cy" => format_trimmed(ctx.intrinsics.ok_or(Error::MissingMetadata("intrinsics"))?.cy),
            "given_time" => format!("{:.1}", round1(ctx.given_time.ok_or(Error::MissingMetadata("given time"))?)),
            "given_speed" => format!("{:.1}", round1(ctx.given_speed.ok_or(Error::MissingMetadata("given speed"))?)),
            "label_a" => ctx.labels.as_ref().ok_or(Error::MissingMetadata("point labels"))?.0.clone(),
            "label_b" => ctx.labels.as_ref().ok_or(Error::MissingMetadata("point labels"))?.1.clone(),
            other => return Err(Error::Template(format!("unknown question placeholder {{{other}}}"))),
        })
    })
}

pub fn build_answer(table: &TemplateTable, task: TaskKind, variant: PromptVariant, values: AnswerValues) -> Result<String> {
    if !(values.value.is_finite() && values.value > 0.0) {
        return Err(Error::Domain("answer value must be finite and positive"));
    }
    let entry = table.get(task, variant)?;
    let angles = || -> Result<(f64, f64)> {
        let (h, v) = values.angles.ok_or(Error::MissingMetadata("ray angles"))?;
        if !(h.is_finite() && v.is_finite()) {
            return Err(Error::Domain("ray angles must be finite"));
        }
        Ok((h, v))
    };
    render(&entry.answer, |name| {
        Ok(match name {
            "value" => format2(values.value),
            "h_angle" => format2(libm::fabs(angles()?.0)),
            "v_angle" => format2(libm::fabs(angles()?.1)),
            "h_dir" => (if round2(angles()?.0) < 0.0 { "left" } else { "right" }).to_owned(),
            "v_dir" => (if round2(angles()?.1) < 0.0 { "below" } else { "above" }).to_owned(),
            other => return Err(Error::Template(format!("unknown answer placeholder {{{other}}}"))),
        })
    })
}

/// How far down the leniency ladder the parser had to go.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ParseLevel {
    /// Exact template match.
    Strict,
    /// Number taken from the last `<answer>` block.
    Tagged,
    /// Number nearest (to the left of) the unit word.
    NearestUnit,
    /// Last number anywhere in the text.
    LastNumber,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ParsedAnswer {
    pub value: f64,
    pub raw_text: String,
    /// Signed (horizontal, vertical) degrees, for `ray_then_depth`.
    pub extras: Option<(f64, f64)>,
    pub level: ParseLevel,
    /// Output followed the expected format (template or think/answer tags).
    pub format_ok: bool,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, thiserror::Error)]
#[serde(rename_all = "snake_case")]
pub enum ParseError {
    #[error("no parsable number")]
    NoNumber,
    #[error("more than one number in the answer")]
    Ambiguous,
    #[error("value is not a positive finite number")]
    Domain,
}

/// A number token found in free text: byte span and value.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct NumberToken {
    pub start: usize,
    pub end: usize,
    pub value: f64,
}

/// Length of a decimal/scientific number starting exactly at `s[0]`.
fn number_len(s: &[u8]) -> Option<usize> {
    let mut i = 0;
    if i < s.len() && (s[i] == b'-' || s[i] == b'+') {
        i += 1;
    }
    let int_start = i;
    while i < s.len() && s[i].is_ascii_digit() {
        i += 1;
    }
    let mut digits = i - int_start;
    if i + 1 < s.len() && s[i] == b'.' && s[i + 1].is_ascii_digit() {
        i += 1;
        while i < s.len() && s[i].is_ascii_digit() {
            i += 1;
            digits += 1;
        }
    }
    if digits == 0 {
        return None;
    }
    if i < s.len() && (s[i] == b'e' || s[i] == b'E') {
        let mut j = i + 1;
        if j < s.len() && (s[j] == b'-' || s[j] == b'+') {
            j += 1;
        }
        let exp_start = j;
        while j < s.len() && s[j].is_ascii_digit() {
            j += 1;
        }
        if j > exp_start {
            i = j;
        }
    }
    Some(i)
}

pub fn scan_numbers(text: &str) -> Vec<NumberToken> {
    let bytes = text.as_bytes();
    let mut out = Vec::new();
    let mut i = 0;
    while i < bytes.len() {
        let prev_is_word = i > 0 && (bytes[i - 1].is_ascii_alphanumeric() || bytes[i - 1] == b'.');
        let c = bytes[i];
        if !prev_is_word && (c.is_ascii_digit() || c == b'-' || c == b'+' || c == b'.') {
            if let Some(len) = number_len(&bytes[i..]) {
                if let Ok(value) = text[i..i + len].parse::<f64>() {
                    out.push(NumberToken { start: i, end: i + len, value });
                    i += len;
                    continue;
                }
            }
        }
        i += 1;
    }
    out
}

fn strict_match(template: &str, text: &str) -> Option<Vec<(String, String)>> {
    let pieces = split_template(template).ok()?;
    let mut rest = text;
    let mut caps = Vec::new();
    for piece in pieces {
        match piece {
            Piece::Lit(l) => rest = rest.strip_prefix(l)?,
            Piece::Slot(name @ ("h_dir" | "v_dir")) => {
                let words: &[&str] = if name == "h_dir" { &["right", "left"] } else { &["above", "below"] };
                let w = words.iter().find(|w| rest.starts_with(**w))?;
                caps.push((name.to_owned(), (*w).to_owned()));
                rest = &rest[w.len()..];
            }
            Piece::Slot(name) => {
                let len = number_len(rest.as_bytes())?;
                caps.push((name.to_owned(), rest[..len].to_owned()));
                rest = &rest[len..];
            }
        }
    }
    rest.is_empty().then_some(caps)
}

fn last_answer_block(text: &str) -> Option<&str> {
    let open = text.rfind("<answer>")?;
    let body = &text[open + "<answer>".len()..];
    let close = body.find("</answer>")?;
    Some(&body[..close])
}

fn has_think_answer_format(text: &str) -> bool {
    let (Some(t0), Some(t1)) = (text.find("<think>"), text.find("</think>")) else {
        return false;
    };
    let (Some(a0), Some(a1)) = (text.rfind("<answer>"), text.rfind("</answer>")) else {
        return false;
    };
    t0 < t1 && t1 <= a0 && a0 < a1
}

fn nearest_before_unit(text: &str, unit: &str) -> Option<f64> {
    let numbers = scan_numbers(text);
    let mut best = None;
    for (pos, _) in text.match_indices(unit) {
        if let Some(n) = numbers.iter().rev().find(|n| n.end <= pos) {
            best = Some(n.value);
        }
    }
    best
}

fn check_value(v: f64) -> core::result::Result<f64, ParseError> {
    if v.is_finite() && v > 0.0 { Ok(v) } else { Err(ParseError::Domain) }
}

/// Parse a model answer, walking the leniency ladder
/// strict template -> answer tag -> nearest unit word -> last number.
pub fn parse_answer(
    table: &TemplateTable,
    task: TaskKind,
    variant: PromptVariant,
    text: &str,
) -> core::result::Result<ParsedAnswer, ParseError> {
    let entry = table.get(task, variant).ok();
    let trimmed = text.trim();
    let grpo = variant == PromptVariant::MarkerGrpo;
    let tags_ok = has_think_answer_format(trimmed);
    let done = |value: f64, extras, level| {
        Ok(ParsedAnswer {
            value: check_value(value)?,
            raw_text: text.to_owned(),
            extras,
            level,
            format_ok: level == ParseLevel::Strict || (grpo && tags_ok),
        })
    };

    if let Some(entry) = entry {
        if let Some(caps) = strict_match(&entry.answer, trimmed) {
            let get = |k: &str| caps.iter().find(|(n, _)| n == k).map(|(_, v)| v.as_str());
            let values: Vec<f64> = caps
                .iter()
                .filter(|(n, _)| n == "value")
                .filter_map(|(_, v)| v.parse::<f64>().ok())
                .collect();
            if let Some(&first) = values.first() {
                if values.iter().all(|v| *v == first) {
                    let extras = match (get("h_angle"), get("h_dir"), get("v_angle"), get("v_dir")) {
                        (Some(h), Some(hd), Some(v), Some(vd)) => {
                            let h: f64 = h.parse().map_err(|_| ParseError::NoNumber)?;
                            let v: f64 = v.parse().map_err(|_| ParseError::NoNumber)?;
                            Some((if hd == "left" { -h } else { h }, if vd == "below" { -v } else { v }))
                        }
                        _ => None,
                    };
                    return done(first, extras, ParseLevel::Strict);
                }
            }
        }
    }

    if grpo {
        if let Some(block) = last_answer_block(trimmed) {
            let nums = scan_numbers(block);
            return match nums.as_slice() {
                [] => Err(ParseError::NoNumber),
                [n] => done(n.value, None, ParseLevel::Tagged),
                _ => Err(ParseError::Ambiguous),
            };
        }
    }

    let unit = entry.map(|e| e.unit.as_str()).unwrap_or("meters");
    if let Some(v) = nearest_before_unit(trimmed, unit) {
        return done(v, None, ParseLevel::NearestUnit);
    }
    match scan_numbers(trimmed).last() {
        Some(n) => done(n.value, None, ParseLevel::LastNumber),
        None => Err(ParseError::NoNumber),
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn t() -> TemplateTable {
        TemplateTable::builtin()
    }

    #[test]
    fn builtin_table_is_valid_and_complete() {
        let table = t();
        for task in TaskKind::ALL {
            assert!(table.get(task, PromptVariant::MarkerPlain).is_ok());
            assert!(table.get(task, PromptVariant::MarkerGrpo).is_ok());
        }
        for v in PromptVariant::ALL {
            assert!(table.get(TaskKind::Distance, v).is_ok());
        }
        assert!(matches!(
            table.get(TaskKind::Speed, PromptVariant::TextCoordinate),
            Err(Error::UnsupportedTask { .. })
        ));
    }

    #[test]
    fn published_questions_verbatim() {
        let table = t();
        let q = build_question(&table, TaskKind::Distance, PromptVariant::MarkerPlain, &QuestionContext::default()).unwrap();
        assert_eq!(q, "How many meters is this point from the camera?");
        let q = build_question(&table, TaskKind::Distance, PromptVariant::MarkerGrpo, &QuestionContext::default()).unwrap();
        assert_eq!(
            q,
            "How far is this point from the camera? Output the thinking process in <think> </think> and final answer (the meter number only, without the unit) in <answer> </answer> tags."
        );
        let ctx = QuestionContext {
            dims: Some(ImageDims { width: 800, height: 600 }),
            pixel: Some(Pixel::new(10.0, 20.0)),
            ..Default::default()
        };
        let q = build_question(&table, TaskKind::Distance, PromptVariant::TextCoordinate, &ctx).unwrap();
        assert_eq!(q, "Given this image of size (width = 800, height = 600), how far is the pixel at (10, 20) from the camera?");
    }

    #[test]
    fn intrinsics_question() {
        let ctx = QuestionContext {
            dims: Some(ImageDims { width: 1000, height: 750 }),
            intrinsics: Some(Intrinsics::new(1000.0, 1000.0, 512.5, 374.25).unwrap()),
            ..Default::default()
        };
        let q = build_question(&t(), TaskKind::Distance, PromptVariant::IntrinsicsInText, &ctx).unwrap();
        assert!(q.contains("(fx = 1000, fy = 1000, cx = 512.5, cy = 374.25)"), "{q}");
        assert!(q.starts_with("Given this image of size (width = 1000, height = 750), where the camera intrinsics are"));
        let missing = build_question(&t(), TaskKind::Distance, PromptVariant::IntrinsicsInText, &QuestionContext::default());
        assert!(matches!(missing, Err(Error::MissingMetadata(_))));
    }

    #[test]
    fn answers_round_two_decimals() {
        let table = t();
        let a = build_answer(&table, TaskKind::Distance, PromptVariant::MarkerPlain, AnswerValues::value(3.456)).unwrap();
        assert_eq!(a, "The point is around 3.46 meters away from the camera.");
        let a = build_answer(&table, TaskKind::Distance, PromptVariant::MarkerPlain, AnswerValues::value(2.0)).unwrap();
        assert_eq!(a, "The point is around 2.00 meters away from the camera.");
        let a = build_answer(&table, TaskKind::Distance, PromptVariant::MarkerGrpo, AnswerValues::value(4.2)).unwrap();
        assert_eq!(a, "<think> The point is located about 4.20 meters from the camera. </think> <answer> 4.20 </answer>");
        assert!(build_answer(&table, TaskKind::Distance, PromptVariant::MarkerPlain, AnswerValues::value(0.0)).is_err());
        assert!(build_answer(&table, TaskKind::Distance, PromptVariant::MarkerPlain, AnswerValues::value(-1.0)).is_err());
    }

    #[test]
    fn ray_answer_sign_mapping() {
        let a = build_answer(
            &t(),
            TaskKind::Distance,
            PromptVariant::RayThenDepth,
            AnswerValues { value: 5.0, angles: Some((-3.1, 2.0)) },
        )
        .unwrap();
        assert_eq!(a, "The point is around 3.10 degrees to the left, 2.00 degrees above and 5.00 meters away from the camera.");
        let p = parse_answer(&t(), TaskKind::Distance, PromptVariant::RayThenDepth, &a).unwrap();
        assert_eq!(p.value, 5.0);
        assert_eq!(p.extras, Some((-3.1, 2.0)));
        assert!(build_answer(&t(), TaskKind::Distance, PromptVariant::RayThenDepth, AnswerValues::value(5.0)).is_err());
    }

    #[test]
    fn parse_published_shapes() {
        let table = t();
        let p = parse_answer(&table, TaskKind::Distance, PromptVariant::MarkerPlain, "The point is around 12.50 meters away from the camera.").unwrap();
        assert_eq!((p.value, p.level), (12.5, ParseLevel::Strict));
        let p = parse_answer(
            &table,
            TaskKind::Distance,
            PromptVariant::MarkerGrpo,
            "<think> The point is located about 4.2 meters from the camera. </think> <answer> 4.2 </answer>",
        )
        .unwrap();
        assert_eq!((p.value, p.level, p.format_ok), (4.2, ParseLevel::Strict, true));
        let p = parse_answer(
            &table,
            TaskKind::Distance,
            PromptVariant::MarkerGrpo,
            "<think> The point is located about 4.2 meters from the camera. </think>, <answer> 4.3 </answer>",
        )
        .unwrap();
        assert_eq!((p.value, p.level, p.format_ok), (4.3, ParseLevel::Tagged, true));
    }

    #[test]
    fn parse_errors() {
        let table = t();
        let e = parse_answer(&table, TaskKind::Distance, PromptVariant::MarkerPlain, "I cannot determine the distance.");
        assert_eq!(e, Err(ParseError::NoNumber));
        let e = parse_answer(&table, TaskKind::Distance, PromptVariant::MarkerGrpo, "<answer> 3 or 4 </answer>");
        assert_eq!(e, Err(ParseError::Ambiguous));
        let e = parse_answer(&table, TaskKind::Distance, PromptVariant::MarkerGrpo, "<answer> none </answer>");
        assert_eq!(e, Err(ParseError::NoNumber));
        let e = parse_answer(&table, TaskKind::Distance, PromptVariant::MarkerPlain, "about 0 meters");
        assert_eq!(e, Err(ParseError::Domain));
        let e = parse_answer(&table, TaskKind::Distance, PromptVariant::MarkerPlain, "about -2 meters");
        assert_eq!(e, Err(ParseError::Domain));
    }

    #[test]
    fn lenient_ladder() {
        let table = t();
        let p = parse_answer(&table, TaskKind::Distance, PromptVariant::MarkerPlain, "Roughly 7 meters, maybe 8 feet").unwrap();
        assert_eq!((p.value, p.level, p.format_ok), (7.0, ParseLevel::NearestUnit, false));
        let p = parse_answer(&table, TaskKind::Distance, PromptVariant::MarkerPlain, "Answer: 3.5e1").unwrap();
        assert_eq!((p.value, p.level), (35.0, ParseLevel::LastNumber));
        let p = parse_answer(&table, TaskKind::Time, PromptVariant::MarkerPlain, "It takes 12 s, i.e. 12.5 seconds.").unwrap();
        assert_eq!(p.value, 12.5);
        let p = parse_answer(&table, TaskKind::Distance, PromptVariant::MarkerGrpo, "about 9.1 meters").unwrap();
        assert!(!p.format_ok);
    }

    #[test]
    fn scanner() {
        let n: Vec<f64> = scan_numbers("a 1.5, -2 and .5 then 3e2m x7 12.").iter().map(|t| t.value).collect();
        assert_eq!(n, [1.5, -2.0, 0.5, 300.0, 12.0]);
    }

    #[test]
    fn formatting_helpers() {
        assert_eq!(round2(3.456), 3.46);
        assert_eq!(round2(-1.005 * 1.0), round2(-1.005));
        assert_eq!(format_trimmed(1000.0), "1000");
        assert_eq!(format_trimmed(512.5), "512.5");
        assert_eq!(format_trimmed(0.001), "0");
    }

    #[test]
    fn table_override_validation() {
        let mut table = t();
        table.schema_version = "2".into();
        assert!(table.validate().is_err());
        let mut table = t();
        table.entries[0].answer = "no slot".into();
        assert!(table.validate().is_err());
        let json = serde_json::to_string(&t()).unwrap();
        assert_eq!(TemplateTable::from_json(&json).unwrap(), t());
    }
}
