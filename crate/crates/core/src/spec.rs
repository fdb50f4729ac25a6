//! YAML specification loader: symbols, field declarations, facets, hooks
//! and the reserved `valasp` blocks.
//!
//! Mapping order is significant (it fixes argument positions), so the YAML
//! is read into an order-preserving node type rather than a hash map.

use std::collections::{BTreeSet, HashMap};
use std::fmt;

use indexmap::IndexMap;
use num_bigint::BigInt;
use serde::de::{self, Deserialize, Deserializer, MapAccess, SeqAccess, Visitor};

use crate::datalog::{parse_program, CmpOp};
use crate::report::Diagnostic;
use crate::script::{eval_const, parse_script};
use crate::term::{is_identifier, parse_term, GroundTerm};

pub const RESERVED: &str = "valasp";
pub const INT32_MIN: i64 = -2_147_483_648;
pub const INT32_MAX: i64 = 2_147_483_647;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Primitive {
    Integer,
    String,
    Alpha,
    Any,
}

impl Primitive {
    fn from_name(name: &str) -> Option<Primitive> {
        Some(match name {
            "Integer" => Primitive::Integer,
            "String" => Primitive::String,
            "Alpha" => Primitive::Alpha,
            "Any" => Primitive::Any,
            _ => return None,
        })
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub enum FieldType {
    Primitive(Primitive),
    /// Reference to another user definition.
    User(String),
}

impl fmt::Display for FieldType {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            FieldType::Primitive(p) => write!(f, "{p:?}"),
            FieldType::User(s) => f.write_str(s),
        }
    }
}

/// Inclusive bounds; `None` leaves that side open.
#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub struct Bounds {
    pub min: Option<BigInt>,
    pub max: Option<BigInt>,
}

impl Bounds {
    pub fn exact(n: impl Into<BigInt>) -> Bounds {
        let n = n.into();
        Bounds { min: Some(n.clone()), max: Some(n) }
    }

    pub fn new(min: impl Into<BigInt>, max: impl Into<BigInt>) -> Bounds {
        Bounds { min: Some(min.into()), max: Some(max.into()) }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub struct Facets {
    pub enum_values: Option<Vec<GroundTerm>>,
    /// Value bound for Integer, length bound for String and Alpha.
    pub min: Option<BigInt>,
    pub max: Option<BigInt>,
    /// Source text; matched as a full (anchored) match.
    pub pattern: Option<String>,
    pub count: Option<Bounds>,
    pub sum_pos: Option<Bounds>,
    pub sum_neg: Option<Bounds>,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct FieldDecl {
    pub name: String,
    pub ty: FieldType,
    pub facets: Facets,
    pub position: usize,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct HavingComparison {
    pub lhs: String,
    pub op: CmpOp,
    pub rhs: String,
}

impl fmt::Display for HavingComparison {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{} {} {}", self.lhs, crate::script::cmp_text(self.op), self.rhs)
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct UserDefinition {
    pub symbol: String,
    pub fields: Vec<FieldDecl>,
    pub having: Vec<HavingComparison>,
    pub before_grounding: Option<String>,
    pub after_init: Option<String>,
    pub after_grounding: Option<String>,
}

impl UserDefinition {
    pub fn arity(&self) -> usize {
        self.fields.len()
    }

    pub fn field(&self, name: &str) -> Option<&FieldDecl> {
        self.fields.iter().find(|f| f.name == name)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum PreludeKey {
    #[default]
    Script,
    /// The legacy `python` key, accepted when its body is valid hook code.
    Python,
}

#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub struct ValidationSpec {
    pub prelude: Option<String>,
    pub prelude_key: PreludeKey,
    pub asp: Option<String>,
    /// Definitions in YAML order.
    pub definitions: IndexMap<String, UserDefinition>,
}

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub struct SpecError {
    pub diagnostics: Vec<Diagnostic>,
}

impl fmt::Display for SpecError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for (i, d) in self.diagnostics.iter().enumerate() {
            if i > 0 {
                f.write_str("\n")?;
            }
            write!(f, "{d}")?;
        }
        Ok(())
    }
}

/// Order-preserving YAML node.
#[derive(Debug, Clone, PartialEq)]
pub(crate) enum Yaml {
    Null,
    Bool(bool),
    Int(BigInt),
    Float(f64),
    Str(String),
    Seq(Vec<Yaml>),
    Map(Vec<(Yaml, Yaml)>),
}

impl<'de> Deserialize<'de> for Yaml {
    fn deserialize<D: Deserializer<'de>>(d: D) -> Result<Self, D::Error> {
        struct V;
        impl<'de> Visitor<'de> for V {
            type Value = Yaml;
            fn expecting(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
                f.write_str("a YAML value")
            }
            fn visit_bool<E>(self, v: bool) -> Result<Yaml, E> {
                Ok(Yaml::Bool(v))
            }
            fn visit_i64<E>(self, v: i64) -> Result<Yaml, E> {
                Ok(Yaml::Int(v.into()))
            }
            fn visit_u64<E>(self, v: u64) -> Result<Yaml, E> {
                Ok(Yaml::Int(v.into()))
            }
            fn visit_i128<E>(self, v: i128) -> Result<Yaml, E> {
                Ok(Yaml::Int(v.into()))
            }
            fn visit_u128<E>(self, v: u128) -> Result<Yaml, E> {
                Ok(Yaml::Int(v.into()))
            }
            fn visit_f64<E>(self, v: f64) -> Result<Yaml, E> {
                Ok(Yaml::Float(v))
            }
            fn visit_str<E>(self, v: &str) -> Result<Yaml, E> {
                Ok(Yaml::Str(v.to_string()))
            }
            fn visit_string<E>(self, v: String) -> Result<Yaml, E> {
                Ok(Yaml::Str(v))
            }
            fn visit_unit<E>(self) -> Result<Yaml, E> {
                Ok(Yaml::Null)
            }
            fn visit_none<E>(self) -> Result<Yaml, E> {
                Ok(Yaml::Null)
            }
            fn visit_some<D: Deserializer<'de>>(self, d: D) -> Result<Yaml, D::Error> {
                Yaml::deserialize(d)
            }
            fn visit_seq<A: SeqAccess<'de>>(self, mut seq: A) -> Result<Yaml, A::Error> {
                let mut items = Vec::new();
                while let Some(item) = seq.next_element()? {
                    items.push(item);
                }
                Ok(Yaml::Seq(items))
            }
            fn visit_map<A: MapAccess<'de>>(self, mut map: A) -> Result<Yaml, A::Error> {
                let mut entries = Vec::new();
                while let Some(entry) = map.next_entry()? {
                    entries.push(entry);
                }
                Ok(Yaml::Map(entries))
            }
            fn visit_enum<A: de::EnumAccess<'de>>(self, _: A) -> Result<Yaml, A::Error> {
                Err(de::Error::custom("YAML tags are not supported"))
            }
        }
        d.deserialize_any(V)
    }
}

impl Yaml {
    fn describe(&self) -> &'static str {
        match self {
            Yaml::Null => "null",
            Yaml::Bool(_) => "a boolean",
            Yaml::Int(_) => "an integer",
            Yaml::Float(_) => "a float",
            Yaml::Str(_) => "a string",
            Yaml::Seq(_) => "a list",
            Yaml::Map(_) => "a mapping",
        }
    }

    fn scalar_text(&self) -> Option<String> {
        match self {
            Yaml::Str(s) => Some(s.clone()),
            Yaml::Int(n) => Some(n.to_string()),
            Yaml::Bool(b) => Some(b.to_string()),
            Yaml::Float(x) => Some(x.to_string()),
            _ => None,
        }
    }
}

pub(crate) fn parse_yaml(text: &str) -> Result<Yaml, String> {
    if text.trim().is_empty() {
        return Ok(Yaml::Null);
    }
    let de = serde_yaml::Deserializer::from_str(text);
    Yaml::deserialize(de).map_err(|e| e.to_string())
}

struct Loader {
    diags: Vec<Diagnostic>,
}

impl Loader {
    fn error(&mut self, symbol: &str, path: &str, msg: impl fmt::Display) {
        self.diags.push(Diagnostic::spec(symbol, format!("at `{path}`: {msg}")));
    }

    /// String keys of a mapping, reporting non-string and duplicate keys.
    fn entries<'y>(&mut self, symbol: &str, path: &str, entries: &'y [(Yaml, Yaml)]) -> Vec<(String, &'y Yaml)> {
        let mut seen = BTreeSet::new();
        let mut out = Vec::new();
        for (k, v) in entries {
            let Some(key) = k.scalar_text().filter(|_| !matches!(k, Yaml::Float(_))) else {
                self.error(symbol, path, format!("keys must be names, found {}", k.describe()));
                continue;
            };
            if !seen.insert(key.clone()) {
                self.error(symbol, &format!("{path}.{key}"), format!("duplicate key `{key}`"));
                continue;
            }
            out.push((key, v));
        }
        out
    }

    fn text_block(&mut self, symbol: &str, path: &str, v: &Yaml) -> Option<String> {
        match v {
            Yaml::Null => None,
            Yaml::Str(s) => Some(s.clone()),
            other => {
                self.error(symbol, path, format!("expected a text block, found {}", other.describe()));
                None
            }
        }
    }

    fn load(&mut self, root: &Yaml) -> ValidationSpec {
        let mut spec = ValidationSpec::default();
        let entries = match root {
            Yaml::Null => return spec,
            Yaml::Map(m) => self.entries(RESERVED, "<root>", m),
            other => {
                self.error(RESERVED, "<root>", format!("expected a mapping of symbols, found {}", other.describe()));
                return spec;
            }
        };
        for (key, value) in entries {
            if key == RESERVED {
                self.global_block(&mut spec, value);
                continue;
            }
            if !is_identifier(&key) {
                self.error(&key, &key, format!("`{key}` is not a valid predicate name"));
                continue;
            }
            if let Some(def) = self.definition(&key, value) {
                spec.definitions.insert(key, def);
            }
        }
        spec
    }

    fn global_block(&mut self, spec: &mut ValidationSpec, value: &Yaml) {
        let Yaml::Map(m) = value else {
            if *value != Yaml::Null {
                self.error(RESERVED, RESERVED, format!("expected a mapping, found {}", value.describe()));
            }
            return;
        };
        let entries = self.entries(RESERVED, RESERVED, m);
        let has_script = entries.iter().any(|(k, _)| k == "script");
        for (key, v) in entries {
            let path = format!("{RESERVED}.{key}");
            match key.as_str() {
                "script" => spec.prelude = self.text_block(RESERVED, &path, v),
                "python" if has_script => {
                    self.error(RESERVED, &path, "both `script` and `python` given; keep only `script`")
                }
                "python" => {
                    spec.prelude = self.text_block(RESERVED, &path, v);
                    spec.prelude_key = PreludeKey::Python;
                }
                "asp" => spec.asp = self.text_block(RESERVED, &path, v),
                "type" => self.error(RESERVED, &path, "`valasp` is reserved and cannot be used as a symbol"),
                _ => self.error(RESERVED, &path, format!("unknown key `{key}` (expected script, asp)")),
            }
        }
    }

    fn definition(&mut self, symbol: &str, value: &Yaml) -> Option<UserDefinition> {
        let Yaml::Map(m) = value else {
            self.error(symbol, symbol, format!("expected a mapping of fields, found {}", value.describe()));
            return None;
        };
        let mut def = UserDefinition {
            symbol: symbol.to_string(),
            fields: Vec::new(),
            having: Vec::new(),
            before_grounding: None,
            after_init: None,
            after_grounding: None,
        };
        let before = self.diags.len();
        for (key, v) in self.entries(symbol, symbol, m) {
            let path = format!("{symbol}.{key}");
            if key == RESERVED {
                let reserved_as_field = match v {
                    Yaml::Str(_) => true,
                    Yaml::Map(inner) => inner.iter().any(|(k, _)| *k == Yaml::Str("type".into())),
                    _ => false,
                };
                if reserved_as_field {
                    self.error(symbol, &path, "`valasp` is reserved and cannot be used as a field name");
                } else {
                    self.symbol_block(&mut def, &path, v);
                }
                continue;
            }
            if !is_identifier(&key) {
                self.error(symbol, &path, format!("`{key}` is not a valid field name"));
                continue;
            }
            let position = def.fields.len();
            if let Some((ty, facets)) = self.field(symbol, &path, v) {
                def.fields.push(FieldDecl { name: key, ty, facets, position });
            }
        }
        if def.fields.is_empty() && self.diags.len() == before {
            self.error(symbol, symbol, "a definition needs at least one field");
        }
        (self.diags.len() == before).then_some(def)
    }

    fn symbol_block(&mut self, def: &mut UserDefinition, path: &str, v: &Yaml) {
        let symbol = def.symbol.clone();
        let Yaml::Map(m) = v else {
            if *v != Yaml::Null {
                self.error(&symbol, path, format!("expected a mapping, found {}", v.describe()));
            }
            return;
        };
        for (key, v) in self.entries(&symbol, path, m) {
            let path = format!("{path}.{key}");
            match key.as_str() {
                "having" => {
                    let items: Vec<&Yaml> = match v {
                        Yaml::Seq(items) => items.iter().collect(),
                        Yaml::Null => Vec::new(),
                        single => vec![single],
                    };
                    for (i, item) in items.into_iter().enumerate() {
                        let p = format!("{path}[{i}]");
                        match item.scalar_text().map(|t| parse_having(&t)) {
                            Some(Ok(h)) => def.having.push(h),
                            Some(Err(e)) => self.error(&symbol, &p, e),
                            None => self.error(&symbol, &p, format!("expected a comparison, found {}", item.describe())),
                        }
                    }
                }
                "before_grounding" => def.before_grounding = self.text_block(&symbol, &path, v),
                "after_init" => def.after_init = self.text_block(&symbol, &path, v),
                "after_grounding" => def.after_grounding = self.text_block(&symbol, &path, v),
                _ => self.error(
                    &symbol,
                    &path,
                    format!("unknown key `{key}` (expected having, before_grounding, after_init, after_grounding)"),
                ),
            }
        }
    }

    fn field(&mut self, symbol: &str, path: &str, v: &Yaml) -> Option<(FieldType, Facets)> {
        match v {
            Yaml::Str(t) => {
                let ty = self.type_ref(symbol, path, t)?;
                let facets = defaults(&ty);
                Some((ty, facets))
            }
            Yaml::Map(m) => {
                let entries = self.entries(symbol, path, m);
                let Some((_, t)) = entries.iter().find(|(k, _)| k == "type") else {
                    self.error(symbol, path, "field declaration needs a `type`");
                    return None;
                };
                let Yaml::Str(t) = t else {
                    self.error(symbol, &format!("{path}.type"), format!("expected a type name, found {}", t.describe()));
                    return None;
                };
                let ty = self.type_ref(symbol, path, t)?;
                let raw: Vec<(String, &Yaml)> = entries.into_iter().filter(|(k, _)| k != "type").collect();
                let before = self.diags.len();
                let facets = self.facets(symbol, path, &raw, &ty);
                (self.diags.len() == before).then_some((ty, facets))
            }
            other => {
                self.error(symbol, path, format!("expected a type name or a mapping, found {}", other.describe()));
                None
            }
        }
    }

    fn type_ref(&mut self, symbol: &str, path: &str, t: &str) -> Option<FieldType> {
        let t = t.trim();
        if let Some(p) = Primitive::from_name(t) {
            return Some(FieldType::Primitive(p));
        }
        if is_identifier(t) {
            return Some(FieldType::User(t.to_string()));
        }
        self.error(symbol, path, format!("unknown type `{t}` (expected Integer, String, Alpha, Any or a symbol)"));
        None
    }

    fn int_value(&mut self, symbol: &str, path: &str, v: &Yaml) -> Option<BigInt> {
        match v {
            Yaml::Int(n) => Some(n.clone()),
            Yaml::Str(s) => match eval_const(s) {
                Ok(n) => Some(n),
                Err(e) => {
                    self.error(symbol, path, format!("expected an integer expression: {e}"));
                    None
                }
            },
            other => {
                self.error(symbol, path, format!("expected an integer, found {}", other.describe()));
                None
            }
        }
    }

    fn bounds(&mut self, symbol: &str, path: &str, v: &Yaml) -> Option<Bounds> {
        let Yaml::Map(m) = v else { unreachable!("caller checks for a mapping") };
        let mut b = Bounds::default();
        for (k, v) in self.entries(symbol, path, m) {
            let p = format!("{path}.{k}");
            match k.as_str() {
                "min" => b.min = Some(self.int_value(symbol, &p, v)?),
                "max" => b.max = Some(self.int_value(symbol, &p, v)?),
                _ => {
                    self.error(symbol, &p, format!("unknown bound `{k}` (expected min, max)"));
                    return None;
                }
            }
        }
        Some(b)
    }

    fn facets(&mut self, symbol: &str, path: &str, raw: &[(String, &Yaml)], ty: &FieldType) -> Facets {
        let mut f = Facets::default();
        let allowed: &[&str] = match ty {
            FieldType::Primitive(Primitive::Integer) => &["enum", "min", "max", "count", "sum+", "sum-"],
            FieldType::Primitive(Primitive::String | Primitive::Alpha) => &["enum", "min", "max", "pattern", "count"],
            _ => &["count"],
        };
        const KNOWN: [&str; 7] = ["enum", "min", "max", "pattern", "count", "sum+", "sum-"];
        for (key, v) in raw {
            let p = format!("{path}.{key}");
            if !KNOWN.contains(&key.as_str()) {
                self.error(symbol, &p, format!("unknown facet `{key}`"));
                continue;
            }
            if !allowed.contains(&key.as_str()) {
                self.error(symbol, &p, format!("facet `{key}` is not allowed for type {ty}"));
                continue;
            }
            match key.as_str() {
                "enum" => {
                    let Yaml::Seq(items) = v else {
                        self.error(symbol, &p, format!("expected a list, found {}", v.describe()));
                        continue;
                    };
                    let mut values = Vec::new();
                    for (i, item) in items.iter().enumerate() {
                        if let Some(t) = self.enum_value(symbol, &format!("{p}[{i}]"), item, ty) {
                            values.push(t);
                        }
                    }
                    f.enum_values = Some(values);
                }
                "min" => f.min = self.int_value(symbol, &p, v),
                "max" => f.max = self.int_value(symbol, &p, v),
                "pattern" => match v {
                    Yaml::Str(s) => match regex::Regex::new(&format!("^(?:{s})$")) {
                        Ok(_) => f.pattern = Some(s.clone()),
                        Err(e) => self.error(symbol, &p, format!("malformed pattern: {e}")),
                    },
                    other => self.error(symbol, &p, format!("expected a pattern, found {}", other.describe())),
                },
                "count" => {
                    f.count = match v {
                        Yaml::Map(_) => self.bounds(symbol, &p, v),
                        _ => self.int_value(symbol, &p, v).map(Bounds::exact),
                    }
                }
                "sum+" => {
                    f.sum_pos = match v {
                        Yaml::Str(s) if s.trim() == "Integer" => Some(Bounds::new(0, INT32_MAX)),
                        Yaml::Map(_) => self.bounds(symbol, &p, v),
                        _ => self.int_value(symbol, &p, v).map(|max| Bounds { min: None, max: Some(max) }),
                    }
                }
                "sum-" => {
                    f.sum_neg = match v {
                        Yaml::Str(s) if s.trim() == "Integer" => Some(Bounds::new(INT32_MIN, 0)),
                        Yaml::Map(_) => self.bounds(symbol, &p, v),
                        _ => self.int_value(symbol, &p, v).map(|min| Bounds { min: Some(min), max: None }),
                    }
                }
                _ => unreachable!(),
            }
        }
        if *ty == FieldType::Primitive(Primitive::Integer) {
            f.min.get_or_insert_with(|| INT32_MIN.into());
            f.max.get_or_insert_with(|| INT32_MAX.into());
        }
        f
    }

    fn enum_value(&mut self, symbol: &str, path: &str, item: &Yaml, ty: &FieldType) -> Option<GroundTerm> {
        let Some(text) = item.scalar_text() else {
            self.error(symbol, path, format!("expected a scalar enum value, found {}", item.describe()));
            return None;
        };
        if *ty == FieldType::Primitive(Primitive::String) {
            return Some(GroundTerm::Str(text));
        }
        match item {
            Yaml::Int(n) => Some(GroundTerm::Number(n.clone())),
            _ => match parse_term(&text) {
                Ok(t) => Some(t),
                Err(e) => {
                    self.error(symbol, path, format!("enum value `{text}` is not a term: {}", e.message));
                    None
                }
            },
        }
    }
}

fn defaults(ty: &FieldType) -> Facets {
    let mut f = Facets::default();
    if *ty == FieldType::Primitive(Primitive::Integer) {
        f.min = Some(INT32_MIN.into());
        f.max = Some(INT32_MAX.into());
    }
    f
}

fn parse_having(text: &str) -> Result<HavingComparison, String> {
    let re = regex::Regex::new(r"^\s*([A-Za-z_][A-Za-z0-9_']*)\s*(==|!=|<=|>=|<|>)\s*([A-Za-z_][A-Za-z0-9_']*)\s*$")
        .expect("static pattern");
    let Some(c) = re.captures(text) else {
        return Err(format!("`{text}` is not a comparison of the form `field op field`"));
    };
    let op = match &c[2] {
        "==" => CmpOp::Eq,
        "!=" => CmpOp::Ne,
        "<" => CmpOp::Lt,
        "<=" => CmpOp::Le,
        ">" => CmpOp::Gt,
        _ => CmpOp::Ge,
    };
    Ok(HavingComparison { lhs: c[1].to_string(), op, rhs: c[3].to_string() })
}

/// Structural load without cross-checks; see [`load_spec`].
pub fn parse_spec(yaml_text: &str) -> Result<ValidationSpec, SpecError> {
    let root = parse_yaml(yaml_text).map_err(|e| SpecError {
        diagnostics: vec![Diagnostic::spec(RESERVED, format!("malformed YAML: {e}"))],
    })?;
    let mut loader = Loader { diags: Vec::new() };
    let spec = loader.load(&root);
    if loader.diags.is_empty() {
        Ok(spec)
    } else {
        Err(SpecError { diagnostics: loader.diags })
    }
}

/// Loads a specification and rejects it unless [`check_spec`] is clean.
pub fn load_spec(yaml_text: &str) -> Result<ValidationSpec, SpecError> {
    let spec = parse_spec(yaml_text)?;
    let diagnostics = check_spec(&spec);
    if diagnostics.is_empty() {
        Ok(spec)
    } else {
        Err(SpecError { diagnostics })
    }
}

/// Normalizes a facet mapping (YAML text, without `type`) for a field of
/// type `declared`: applies defaults and expands the `sum+`/`sum-`/`count`
/// shorthands.
pub fn normalize_facets(yaml_mapping: &str, declared: &FieldType) -> Result<Facets, SpecError> {
    let root = parse_yaml(yaml_mapping).map_err(|e| SpecError {
        diagnostics: vec![Diagnostic::spec(RESERVED, format!("malformed YAML: {e}"))],
    })?;
    let mut loader = Loader { diags: Vec::new() };
    let entries = match &root {
        Yaml::Null => Vec::new(),
        Yaml::Map(m) => loader.entries("field", "field", m),
        other => {
            loader.error("field", "field", format!("expected a mapping, found {}", other.describe()));
            Vec::new()
        }
    };
    let raw: Vec<(String, &Yaml)> = entries.into_iter().filter(|(k, _)| k != "type").collect();
    let facets = loader.facets("field", "field", &raw, declared);
    if loader.diags.is_empty() {
        Ok(facets)
    } else {
        Err(SpecError { diagnostics: loader.diags })
    }
}

fn bounds_ordered(b: &Bounds) -> bool {
    match (&b.min, &b.max) {
        (Some(lo), Some(hi)) => lo <= hi,
        _ => true,
    }
}

/// Cross-checks a loaded specification. Returns no diagnostics iff types
/// resolve without cycles, `having` names existing fields, every hook and
/// the rule block parse, enum values match their field type, and bounds
/// are ordered.
pub fn check_spec(spec: &ValidationSpec) -> Vec<Diagnostic> {
    let mut out = Vec::new();
    let mut push = |symbol: &str, msg: String| out.push(Diagnostic::spec(symbol, msg));

    if let Some(p) = &spec.prelude {
        if let Err(e) = parse_script(p) {
            match spec.prelude_key {
                PreludeKey::Script => push(RESERVED, format!("at `valasp.script`: {e}")),
                PreludeKey::Python => push(
                    RESERVED,
                    format!(
                        "at `valasp.python`: {e}; arbitrary host code is not supported, rename the key to `script` and port the block to the hook language"
                    ),
                ),
            }
        }
    }
    if let Some(asp) = &spec.asp {
        if let Err(e) = parse_program(asp) {
            push(RESERVED, format!("at `valasp.asp`: {e}"));
        }
    }

    for def in spec.definitions.values() {
        let s = &def.symbol;
        let mut names = BTreeSet::new();
        for f in &def.fields {
            let path = format!("{s}.{}", f.name);
            if !names.insert(&f.name) {
                push(s, format!("at `{path}`: duplicate field `{}`", f.name));
            }
            if let FieldType::User(t) = &f.ty {
                if !spec.definitions.contains_key(t) {
                    push(s, format!("at `{path}`: unknown type `{t}`"));
                }
            }
            let fc = &f.facets;
            if let (Some(lo), Some(hi)) = (&fc.min, &fc.max) {
                if lo > hi {
                    push(s, format!("at `{path}`: min {lo} is greater than max {hi}"));
                }
            }
            if let Some(c) = &fc.count {
                if !bounds_ordered(c) || c.min.as_ref().is_some_and(|m| m.sign() == num_bigint::Sign::Minus) {
                    push(s, format!("at `{path}.count`: bounds must satisfy 0 <= min <= max"));
                }
            }
            for (name, b) in [("sum+", &fc.sum_pos), ("sum-", &fc.sum_neg)] {
                if b.as_ref().is_some_and(|b| !bounds_ordered(b)) {
                    push(s, format!("at `{path}.{name}`: min is greater than max"));
                }
            }
            if let (Some(values), FieldType::Primitive(p)) = (&fc.enum_values, &f.ty) {
                for v in values {
                    let ok = matches!(
                        (p, v),
                        (Primitive::Integer, GroundTerm::Number(_))
                            | (Primitive::String, GroundTerm::Str(_))
                            | (Primitive::Alpha, GroundTerm::Const(_))
                    );
                    if !ok {
                        push(s, format!("at `{path}.enum`: value {v} is not of type {}", f.ty));
                    }
                }
            }
            if let Some(p) = &fc.pattern {
                if let Err(e) = regex::Regex::new(&format!("^(?:{p})$")) {
                    push(s, format!("at `{path}.pattern`: malformed pattern: {e}"));
                }
            }
        }
        for h in &def.having {
            for side in [&h.lhs, &h.rhs] {
                if def.field(side).is_none() {
                    push(s, format!("at `{s}.valasp.having`: `{h}` names unknown field `{side}`"));
                }
            }
        }
        for (key, hook) in [
            ("before_grounding", &def.before_grounding),
            ("after_init", &def.after_init),
            ("after_grounding", &def.after_grounding),
        ] {
            if let Some(text) = hook {
                if let Err(e) = parse_script(text) {
                    push(s, format!("at `{s}.valasp.{key}`: {e}"));
                }
            }
        }
    }

    for cycle in type_cycles(spec) {
        let first = cycle[0].clone();
        push(&first, format!("type reference cycle: {}", cycle.join(" -> ")));
    }
    out
}

/// Elementary cycles in the user-type reference graph, one per strongly
/// connected group, each closed (`a -> b -> a`).
fn type_cycles(spec: &ValidationSpec) -> Vec<Vec<String>> {
    let edges: HashMap<&str, Vec<&str>> = spec
        .definitions
        .values()
        .map(|d| {
            let targets = d
                .fields
                .iter()
                .filter_map(|f| match &f.ty {
                    FieldType::User(t) if spec.definitions.contains_key(t) => Some(t.as_str()),
                    _ => None,
                })
                .collect();
            (d.symbol.as_str(), targets)
        })
        .collect();
    let mut reported: BTreeSet<String> = BTreeSet::new();
    let mut out = Vec::new();
    for start in spec.definitions.keys() {
        if reported.contains(start) {
            continue;
        }
        // iterative DFS looking for a path back to `start`
        let mut stack: Vec<(&str, usize)> = vec![(start.as_str(), 0)];
        let mut on_path: Vec<&str> = vec![start.as_str()];
        let mut visited: BTreeSet<&str> = BTreeSet::new();
        while let Some((node, i)) = stack.pop() {
            let next = edges.get(node).and_then(|e| e.get(i)).copied();
            let Some(next) = next else {
                on_path.pop();
                continue;
            };
            stack.push((node, i + 1));
            if next == start {
                let mut cycle: Vec<String> = on_path.iter().map(|s| s.to_string()).collect();
                cycle.push(start.clone());
                reported.extend(on_path.iter().map(|s| s.to_string()));
                out.push(cycle);
                break;
            }
            if visited.insert(next) {
                stack.push((next, 0));
                on_path.push(next);
            }
        }
    }
    out
}
