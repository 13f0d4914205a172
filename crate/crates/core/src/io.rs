//! Text formats: space documents, field, set and map files, reports and
//! tab-separated tables.
//!
//! Every real is written with 17 significant digits so that reading a file
//! back reproduces the exact values. Non-finite numbers in reports are
//! written as the strings `"inf"`, `"-inf"` and `"nan"`.

use std::fmt::Write as _;

use serde::{Serialize, Serializer};
use serde_json::Value;

use crate::bmo_map::PointMap;
use crate::error::{Error, Result};
use crate::field::ScalarField;
use crate::space::{build_space, MetricMeasureSpace, SpaceSpec};
use crate::uchiyama::IndicatorSet;

/// A real with 17 significant digits.
pub fn fmt_real(x: f64) -> String {
    if x.is_finite() {
        // adding zero turns -0 into +0
        format!("{:.16e}", x + 0.0)
    } else {
        nonfinite(x).to_string()
    }
}

fn nonfinite(x: f64) -> &'static str {
    if x.is_nan() {
        "nan"
    } else if x > 0.0 {
        "inf"
    } else {
        "-inf"
    }
}

pub(crate) fn real<S: Serializer>(x: &f64, s: S) -> std::result::Result<S::Ok, S::Error> {
    if x.is_finite() {
        s.serialize_f64(*x + 0.0)
    } else {
        s.serialize_str(nonfinite(*x))
    }
}

pub(crate) fn reals<S: Serializer>(xs: &[f64], s: S) -> std::result::Result<S::Ok, S::Error> {
    use serde::ser::SerializeSeq;
    let mut seq = s.serialize_seq(Some(xs.len()))?;
    for x in xs {
        if x.is_finite() {
            seq.serialize_element(&(x + 0.0))?;
        } else {
            seq.serialize_element(nonfinite(*x))?;
        }
    }
    seq.end()
}

/// Reads a space document: either a generator
/// `{"generator": {"name": "grid1d", "len": 8, "exponent": 0}, "normalize": true}`
/// or an explicit `{"label", "n", "dist", "weights"}` with `dist` the
/// strict lower triangle in row-major order.
pub fn read_space(text: &str) -> Result<MetricMeasureSpace> {
    let doc: Value = serde_json::from_str(text)?;
    if doc.get("generator").is_some() {
        let spec: SpaceSpec = serde_json::from_value(doc)?;
        return build_space(&spec);
    }
    let field = |name: &str| doc.get(name).ok_or_else(|| Error::Parse(format!("space document lacks \"{name}\"")));
    let label = field("label")?
        .as_str()
        .ok_or_else(|| Error::Parse("label must be a string".into()))?
        .to_string();
    let n = field("n")?
        .as_u64()
        .ok_or_else(|| Error::Parse("n must be a non-negative integer".into()))? as usize;
    let dist: Vec<f64> = serde_json::from_value(field("dist")?.clone())?;
    let weights: Vec<f64> = serde_json::from_value(field("weights")?.clone())?;
    if weights.len() != n {
        return Err(Error::Parse(format!("n = {n} but {} weights were given", weights.len())));
    }
    MetricMeasureSpace::from_lower_triangle(label, &dist, weights)
}

/// Writes the explicit form of a space.
pub fn write_space(space: &MetricMeasureSpace) -> String {
    let list = |xs: &[f64]| xs.iter().map(|&x| fmt_real(x)).collect::<Vec<_>>().join(", ");
    let mut out = String::new();
    out.push_str("{\n");
    let _ = writeln!(out, "  \"label\": {},", serde_json::to_string(space.label()).expect("strings serialize"));
    let _ = writeln!(out, "  \"n\": {},", space.len());
    let _ = writeln!(out, "  \"dist\": [{}],", list(&space.lower_triangle()));
    let _ = writeln!(out, "  \"weights\": [{}]", list(space.weights()));
    out.push_str("}\n");
    out
}

/// Non-empty, non-comment lines split on whitespace, with 1-based line
/// numbers.
fn records(text: &str) -> impl Iterator<Item = (usize, Vec<&str>)> {
    text.lines().enumerate().filter_map(|(i, line)| {
        let line = line.split('#').next().unwrap_or("").trim();
        (!line.is_empty()).then(|| (i + 1, line.split_whitespace().collect()))
    })
}

fn parse_id(tok: &str, line: usize, n: usize) -> Result<usize> {
    let id: usize = tok
        .parse()
        .map_err(|_| Error::Parse(format!("line {line}: `{tok}` is not a point id")))?;
    if id >= n {
        return Err(Error::Parse(format!("line {line}: point id {id} out of range for {n} points")));
    }
    Ok(id)
}

/// Reads `id value` pairs covering every point exactly once.
pub fn read_field(space: &MetricMeasureSpace, text: &str) -> Result<ScalarField> {
    let n = space.len();
    let mut values: Vec<Option<f64>> = vec![None; n];
    for (line, cols) in records(text) {
        let [id, v] = cols[..] else {
            return Err(Error::Parse(format!("line {line}: expected `id value`")));
        };
        let id = parse_id(id, line, n)?;
        let v: f64 = v
            .parse()
            .map_err(|_| Error::Parse(format!("line {line}: `{v}` is not a number")))?;
        if values[id].replace(v).is_some() {
            return Err(Error::Parse(format!("line {line}: point {id} appears twice")));
        }
    }
    let values = values
        .into_iter()
        .enumerate()
        .map(|(i, v)| v.ok_or_else(|| Error::Parse(format!("no value for point {i}"))))
        .collect::<Result<Vec<_>>>()?;
    ScalarField::new(space, values)
}

pub fn write_field(f: &ScalarField) -> String {
    let mut out = String::new();
    for (i, &v) in f.values().iter().enumerate() {
        let _ = writeln!(out, "{i}\t{}", fmt_real(v));
    }
    out
}

/// Reads point ids, one per line.
pub fn read_set(space: &MetricMeasureSpace, text: &str) -> Result<IndicatorSet> {
    let mut ids = Vec::new();
    for (line, cols) in records(text) {
        let [id] = cols[..] else {
            return Err(Error::Parse(format!("line {line}: expected a single point id")));
        };
        ids.push(parse_id(id, line, space.len())?);
    }
    IndicatorSet::new(space, &ids)
}

pub fn write_set(set: &IndicatorSet) -> String {
    set.ids().iter().map(|i| format!("{i}\n")).collect()
}

/// Reads `source image` pairs defining the map on every point.
pub fn read_map(space: &MetricMeasureSpace, label: &str, text: &str) -> Result<PointMap> {
    let n = space.len();
    let mut image: Vec<Option<usize>> = vec![None; n];
    for (line, cols) in records(text) {
        let [src, dst] = cols[..] else {
            return Err(Error::Parse(format!("line {line}: expected `source image`")));
        };
        let src = parse_id(src, line, n)?;
        let dst = parse_id(dst, line, n)?;
        if image[src].replace(dst).is_some() {
            return Err(Error::Parse(format!("line {line}: point {src} is mapped twice")));
        }
    }
    let image = image
        .into_iter()
        .enumerate()
        .map(|(i, v)| v.ok_or_else(|| Error::Parse(format!("the map does not define point {i}"))))
        .collect::<Result<Vec<_>>>()?;
    PointMap::new(space, label, image)
}

pub fn write_map(map: &PointMap) -> String {
    map.image().iter().enumerate().map(|(i, y)| format!("{i}\t{y}\n")).collect()
}

/// Pretty JSON with a trailing newline.
pub fn to_report<T: Serialize>(value: &T) -> Result<String> {
    let mut s = serde_json::to_string_pretty(value)?;
    s.push('\n');
    Ok(s)
}

/// A tab-separated table with a header row.
#[derive(Debug, Clone, PartialEq)]
pub struct Table {
    header: Vec<String>,
    rows: Vec<Vec<String>>,
}

/// One cell of a [`Table`].
pub enum Cell<'a> {
    Int(usize),
    Real(f64),
    Text(&'a str),
}

impl Table {
    pub fn new(header: &[&str]) -> Self {
        Self {
            header: header.iter().map(|s| s.to_string()).collect(),
            rows: Vec::new(),
        }
    }

    pub fn push(&mut self, row: &[Cell<'_>]) {
        assert_eq!(row.len(), self.header.len(), "row width must match the header");
        self.rows.push(
            row.iter()
                .map(|c| match c {
                    Cell::Int(i) => i.to_string(),
                    Cell::Real(x) => fmt_real(*x),
                    Cell::Text(t) => t.replace(['\t', '\n'], " "),
                })
                .collect(),
        );
    }

    pub fn len(&self) -> usize {
        self.rows.len()
    }

    pub fn is_empty(&self) -> bool {
        self.rows.is_empty()
    }

    pub fn render(&self) -> String {
        let mut out = self.header.join("\t");
        out.push('\n');
        for r in &self.rows {
            out.push_str(&r.join("\t"));
            out.push('\n');
        }
        out
    }
}
