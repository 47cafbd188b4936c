//! JSON formats for rule sets, instances, and tilings.
//!
//! Rule-set document (see `docs/ruleset.schema.json`):
//! `{"tiles":[..], "horizontal":[[..]], "vertical":[[..]], "boundary":{..},
//! "costBound":[c0, c1, ..], "sentinel": 1000000}` where a weight cell is an
//! integer or the string `"F"` (the sentinel). `boundary` and `costBound` are
//! optional (default open, zero bound).

use serde_json::{json, Map, Value};
use thiserror::Error;

use crate::tiling::{
    BoundaryCondition, Corner, CostBound, RuleSet, Tiling, TilingInstance, DEFAULT_SENTINEL,
};

/// A load failure with a location: `line:column` for syntax errors, a field
/// path such as `horizontal[2][1]` for schema errors.
#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum LoadError {
    #[error("line {line}, column {column}: {message}")]
    Syntax {
        line: usize,
        column: usize,
        message: String,
    },
    #[error("field `{path}`: {message}")]
    Field { path: String, message: String },
}

fn field(path: impl Into<String>, message: impl Into<String>) -> LoadError {
    LoadError::Field {
        path: path.into(),
        message: message.into(),
    }
}

/// Parses JSON text, mapping syntax errors to line/column diagnostics.
pub fn parse_json(text: &str) -> Result<Value, LoadError> {
    serde_json::from_str(text).map_err(|e| LoadError::Syntax {
        line: e.line(),
        column: e.column(),
        message: e.to_string(),
    })
}

fn as_object<'a>(v: &'a Value, path: &str) -> Result<&'a Map<String, Value>, LoadError> {
    v.as_object().ok_or_else(|| field(path, "expected an object"))
}

fn as_array<'a>(v: &'a Value, path: &str) -> Result<&'a Vec<Value>, LoadError> {
    v.as_array().ok_or_else(|| field(path, "expected an array"))
}

fn as_str<'a>(v: &'a Value, path: &str) -> Result<&'a str, LoadError> {
    v.as_str().ok_or_else(|| field(path, "expected a string"))
}

fn as_i64(v: &Value, path: &str) -> Result<i64, LoadError> {
    v.as_i64().ok_or_else(|| field(path, "expected an integer"))
}

fn check_keys(obj: &Map<String, Value>, path: &str, allowed: &[&str]) -> Result<(), LoadError> {
    for k in obj.keys() {
        if !allowed.contains(&k.as_str()) {
            let p = if path.is_empty() {
                k.clone()
            } else {
                format!("{path}.{k}")
            };
            return Err(field(p, "unknown field"));
        }
    }
    Ok(())
}

fn parse_matrix(v: &Value, name: &str, m: usize, sentinel: i64) -> Result<Vec<Vec<i64>>, LoadError> {
    let rows = as_array(v, name)?;
    if rows.len() != m {
        return Err(field(name, format!("expected {m} rows, found {}", rows.len())));
    }
    rows.iter()
        .enumerate()
        .map(|(i, row)| {
            let p = format!("{name}[{i}]");
            let cells = as_array(row, &p)?;
            if cells.len() != m {
                return Err(field(&p, format!("expected {m} cells, found {}", cells.len())));
            }
            cells
                .iter()
                .enumerate()
                .map(|(j, c)| {
                    let p = format!("{name}[{i}][{j}]");
                    match c {
                        Value::String(s) if s == "F" => Ok(sentinel),
                        Value::Number(_) => as_i64(c, &p),
                        _ => Err(field(p, "expected an integer or \"F\"")),
                    }
                })
                .collect()
        })
        .collect()
}

fn parse_corner(v: &Value, path: &str) -> Result<Corner, LoadError> {
    match as_str(v, path)? {
        "topLeft" => Ok(Corner::TopLeft),
        "topRight" => Ok(Corner::TopRight),
        "bottomLeft" => Ok(Corner::BottomLeft),
        "bottomRight" => Ok(Corner::BottomRight),
        other => Err(field(path, format!("unknown corner {other:?}"))),
    }
}

fn corner_name(c: Corner) -> &'static str {
    match c {
        Corner::TopLeft => "topLeft",
        Corner::TopRight => "topRight",
        Corner::BottomLeft => "bottomLeft",
        Corner::BottomRight => "bottomRight",
    }
}

fn parse_boundary(v: &Value, rules: &RuleSet) -> Result<BoundaryCondition, LoadError> {
    let obj = as_object(v, "boundary")?;
    check_keys(obj, "boundary", &["kind", "tile", "corner", "corners"])?;
    let kind = as_str(
        obj.get("kind").ok_or_else(|| field("boundary.kind", "missing"))?,
        "boundary.kind",
    )?;
    let tile = || -> Result<usize, LoadError> {
        let name = as_str(
            obj.get("tile").ok_or_else(|| field("boundary.tile", "missing"))?,
            "boundary.tile",
        )?;
        rules
            .index_of(name)
            .ok_or_else(|| field("boundary.tile", format!("unknown tile {name:?}")))
    };
    match kind {
        "open" => Ok(BoundaryCondition::Open),
        "periodic" => Ok(BoundaryCondition::Periodic),
        "fourCorners" => Ok(BoundaryCondition::FourCorners(tile()?)),
        "oneCorner" => {
            let c = obj
                .get("corner")
                .ok_or_else(|| field("boundary.corner", "missing"))?;
            Ok(BoundaryCondition::OneCorner(tile()?, parse_corner(c, "boundary.corner")?))
        }
        "twoCorners" => {
            let cs = as_array(
                obj.get("corners")
                    .ok_or_else(|| field("boundary.corners", "missing"))?,
                "boundary.corners",
            )?;
            if cs.len() != 2 {
                return Err(field("boundary.corners", "expected exactly two corners"));
            }
            Ok(BoundaryCondition::TwoCorners(
                tile()?,
                [
                    parse_corner(&cs[0], "boundary.corners[0]")?,
                    parse_corner(&cs[1], "boundary.corners[1]")?,
                ],
            ))
        }
        other => Err(field("boundary.kind", format!("unknown kind {other:?}"))),
    }
}

/// Parses a rule-set document into an instance.
pub fn instance_from_json(text: &str) -> Result<TilingInstance, LoadError> {
    instance_from_value(&parse_json(text)?)
}

pub fn instance_from_value(v: &Value) -> Result<TilingInstance, LoadError> {
    let obj = as_object(v, "$")?;
    check_keys(
        obj,
        "",
        &["tiles", "horizontal", "vertical", "boundary", "costBound", "sentinel", "name"],
    )?;
    let tiles: Vec<String> = as_array(
        obj.get("tiles").ok_or_else(|| field("tiles", "missing"))?,
        "tiles",
    )?
    .iter()
    .enumerate()
    .map(|(i, t)| as_str(t, &format!("tiles[{i}]")).map(str::to_string))
    .collect::<Result<_, _>>()?;
    if tiles.is_empty() {
        return Err(field("tiles", "at least one tile is required"));
    }
    for (i, t) in tiles.iter().enumerate() {
        if tiles[..i].contains(t) {
            return Err(field(format!("tiles[{i}]"), format!("duplicate tile {t:?}")));
        }
    }
    let sentinel = match obj.get("sentinel") {
        Some(s) => as_i64(s, "sentinel")?,
        None => DEFAULT_SENTINEL,
    };
    let m = tiles.len();
    let h = parse_matrix(
        obj.get("horizontal")
            .ok_or_else(|| field("horizontal", "missing"))?,
        "horizontal",
        m,
        sentinel,
    )?;
    let vt = parse_matrix(
        obj.get("vertical").ok_or_else(|| field("vertical", "missing"))?,
        "vertical",
        m,
        sentinel,
    )?;
    let rules = RuleSet::new(tiles, h, vt, sentinel).map_err(|e| field("$", e.to_string()))?;
    let bc = match obj.get("boundary") {
        Some(b) => parse_boundary(b, &rules)?,
        None => BoundaryCondition::Open,
    };
    let cost_bound = match obj.get("costBound") {
        Some(c) => CostBound(
            as_array(c, "costBound")?
                .iter()
                .enumerate()
                .map(|(i, x)| as_i64(x, &format!("costBound[{i}]")))
                .collect::<Result<_, _>>()?,
        ),
        None => CostBound::zero(),
    };
    Ok(TilingInstance {
        rules,
        bc,
        cost_bound,
    })
}

fn matrix_value(mat: Vec<Vec<i64>>, sentinel: i64) -> Value {
    Value::Array(
        mat.into_iter()
            .map(|row| {
                Value::Array(
                    row.into_iter()
                        .map(|w| if w == sentinel { json!("F") } else { json!(w) })
                        .collect(),
                )
            })
            .collect(),
    )
}

pub fn boundary_value(bc: &BoundaryCondition, rules: &RuleSet) -> Value {
    match bc {
        BoundaryCondition::Open => json!({"kind": "open"}),
        BoundaryCondition::Periodic => json!({"kind": "periodic"}),
        BoundaryCondition::FourCorners(t) => {
            json!({"kind": "fourCorners", "tile": rules.tile_name(*t)})
        }
        BoundaryCondition::OneCorner(t, c) => {
            json!({"kind": "oneCorner", "tile": rules.tile_name(*t), "corner": corner_name(*c)})
        }
        BoundaryCondition::TwoCorners(t, cs) => json!({
            "kind": "twoCorners",
            "tile": rules.tile_name(*t),
            "corners": [corner_name(cs[0]), corner_name(cs[1])]
        }),
    }
}

pub fn instance_to_value(inst: &TilingInstance) -> Value {
    let r = &inst.rules;
    let mut obj = Map::new();
    obj.insert("tiles".into(), json!(r.tiles()));
    obj.insert(
        "horizontal".into(),
        matrix_value(r.horizontal_matrix(), r.sentinel()),
    );
    obj.insert(
        "vertical".into(),
        matrix_value(r.vertical_matrix(), r.sentinel()),
    );
    obj.insert("boundary".into(), boundary_value(&inst.bc, r));
    obj.insert("costBound".into(), json!(inst.cost_bound.0));
    if r.sentinel() != DEFAULT_SENTINEL {
        obj.insert("sentinel".into(), json!(r.sentinel()));
    }
    Value::Object(obj)
}

/// Tiling document: `{"width":W,"height":H,"rows":[["tile",..],..]}`.
pub fn tiling_to_value(t: &Tiling, rules: &RuleSet) -> Value {
    json!({
        "width": t.width,
        "height": t.height,
        "rows": t.rows().iter().map(|r| r.iter().map(|&x| rules.tile_name(x)).collect::<Vec<_>>()).collect::<Vec<_>>()
    })
}

pub fn tiling_from_json(text: &str, rules: &RuleSet) -> Result<Tiling, LoadError> {
    tiling_from_value(&parse_json(text)?, rules)
}

pub fn tiling_from_value(v: &Value, rules: &RuleSet) -> Result<Tiling, LoadError> {
    let obj = as_object(v, "$")?;
    check_keys(obj, "", &["width", "height", "rows"])?;
    let rows = as_array(obj.get("rows").ok_or_else(|| field("rows", "missing"))?, "rows")?;
    let cells: Vec<Vec<usize>> = rows
        .iter()
        .enumerate()
        .map(|(i, row)| {
            as_array(row, &format!("rows[{i}]"))?
                .iter()
                .enumerate()
                .map(|(j, c)| {
                    let p = format!("rows[{i}][{j}]");
                    let name = as_str(c, &p)?;
                    rules
                        .index_of(name)
                        .ok_or_else(|| field(p, format!("unknown tile {name:?}")))
                })
                .collect()
        })
        .collect::<Result<_, _>>()?;
    let t = Tiling::from_rows(cells).map_err(|e| field("rows", e.to_string()))?;
    for (key, want) in [("width", t.width), ("height", t.height)] {
        if let Some(x) = obj.get(key) {
            if x.as_u64() != Some(want as u64) {
                return Err(field(key, format!("does not match rows ({want})")));
            }
        }
    }
    Ok(t)
}
