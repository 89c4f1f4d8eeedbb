//! Data-source schema descriptors.
//!
//! A schema file is TOML:
//!
//! ```toml
//! source_id = "projects_sql"
//! kind = "relational"            # relational | document | graph | search
//! name = "Projects"              # optional display name, used as the graph header
//!
//! [[entities]]
//! name = "Projects"
//! fields = ["project_id:int", "status:string"]
//! values = { status = ["active", "completed"] }   # optional enumerations
//!
//! [[relationships]]              # graph only
//! type = "WORKS_ON"
//! from = "Researcher"
//! to = "Project"
//! ```
//!
//! Every descriptor carries a `rendered_block`, the exact text placed in
//! prompts. Its layout is fixed per kind and is a pure function of the
//! descriptor's fields.

use std::collections::BTreeMap;
use std::fmt;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::model::DataSourceKind;

#[derive(Debug, Error)]
pub enum SchemaError {
    #[error("{path}: schema declares no {what}")]
    EmptySchema { path: String, what: &'static str },
    #[error("{path}: unknown data source kind `{kind}`")]
    UnknownKind { path: String, kind: String },
    #[error("{path}: relationships are only allowed for graph sources, not {kind}")]
    RelationshipsNotAllowed { path: String, kind: DataSourceKind },
    #[error("{path}: duplicate field `{field}`")]
    DuplicateField { path: String, field: String },
    #[error("{path}: duplicate entity `{entity}`")]
    DuplicateEntity { path: String, entity: String },
    #[error("{path}: malformed field declaration `{entry}` (expected name:type)")]
    MalformedField { path: String, entry: String },
    #[error("{path}: unknown field type `{ty}` (expected string, int, float, date or bool)")]
    UnknownFieldType { path: String, ty: String },
    #[error("{path}: invalid identifier `{name}`")]
    InvalidName { path: String, name: String },
    #[error("{path}: enumerated values given for undeclared field `{field}`")]
    UnknownValuesField { path: String, field: String },
    #[error("cannot read schema file {}: {source}", path.display())]
    Read { path: PathBuf, source: std::io::Error },
    #[error("cannot parse schema file {}: {message}", path.display())]
    Parse { path: PathBuf, message: String },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum FieldType {
    String,
    Int,
    Float,
    Date,
    Bool,
}

impl FieldType {
    pub fn as_str(self) -> &'static str {
        match self {
            FieldType::String => "string",
            FieldType::Int => "int",
            FieldType::Float => "float",
            FieldType::Date => "date",
            FieldType::Bool => "bool",
        }
    }
}

impl fmt::Display for FieldType {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for FieldType {
    type Err = ();

    fn from_str(s: &str) -> Result<Self, ()> {
        Ok(match s {
            "string" => FieldType::String,
            "int" => FieldType::Int,
            "float" => FieldType::Float,
            "date" => FieldType::Date,
            "bool" => FieldType::Bool,
            _ => return Err(()),
        })
    }
}

/// Schema document as read from disk, before validation.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RawSchema {
    pub source_id: String,
    pub kind: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub name: Option<String>,
    #[serde(default)]
    pub entities: Vec<RawEntity>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub relationships: Vec<RawRelationship>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RawEntity {
    pub name: String,
    #[serde(default)]
    pub fields: Vec<String>,
    #[serde(default, skip_serializing_if = "BTreeMap::is_empty")]
    pub values: BTreeMap<String, Vec<String>>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RawRelationship {
    #[serde(rename = "type")]
    pub rel_type: String,
    pub from: String,
    pub to: String,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct FieldDescriptor {
    pub name: String,
    pub ty: FieldType,
}

/// A table, collection, index or node label.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct EntityDescriptor {
    pub name: String,
    pub fields: Vec<FieldDescriptor>,
    /// Known values of enumerated string fields, keyed by field name.
    pub values: BTreeMap<String, Vec<String>>,
}

impl EntityDescriptor {
    pub fn field(&self, name: &str) -> Option<&FieldDescriptor> {
        self.fields.iter().find(|f| f.name == name)
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Relationship {
    pub rel_type: String,
    pub from: String,
    pub to: String,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SchemaDescriptor {
    source_id: String,
    kind: DataSourceKind,
    name: Option<String>,
    entities: Vec<EntityDescriptor>,
    relationships: Vec<Relationship>,
    rendered_block: String,
}

impl SchemaDescriptor {
    pub fn load(path: impl AsRef<Path>) -> Result<Self, SchemaError> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path).map_err(|source| SchemaError::Read {
            path: path.to_path_buf(),
            source,
        })?;
        let raw: RawSchema = toml::from_str(&text).map_err(|e| SchemaError::Parse {
            path: path.to_path_buf(),
            message: e.to_string(),
        })?;
        validate_schema_descriptor(&raw)
    }

    pub fn source_id(&self) -> &str {
        &self.source_id
    }

    pub fn kind(&self) -> DataSourceKind {
        self.kind
    }

    /// Display name of the source; defaults to the source id.
    pub fn display_name(&self) -> &str {
        self.name.as_deref().unwrap_or(&self.source_id)
    }

    pub fn entities(&self) -> &[EntityDescriptor] {
        &self.entities
    }

    pub fn entity(&self, name: &str) -> Option<&EntityDescriptor> {
        self.entities.iter().find(|e| e.name == name)
    }

    pub fn relationships(&self) -> &[Relationship] {
        &self.relationships
    }

    pub fn rendered_block(&self) -> &str {
        &self.rendered_block
    }

    /// Converts back to the file representation.
    pub fn to_raw(&self) -> RawSchema {
        RawSchema {
            source_id: self.source_id.clone(),
            kind: self.kind.as_str().to_string(),
            name: self.name.clone(),
            entities: self
                .entities
                .iter()
                .map(|e| RawEntity {
                    name: e.name.clone(),
                    fields: e.fields.iter().map(|f| format!("{}:{}", f.name, f.ty)).collect(),
                    values: e.values.clone(),
                })
                .collect(),
            relationships: self
                .relationships
                .iter()
                .map(|r| RawRelationship {
                    rel_type: r.rel_type.clone(),
                    from: r.from.clone(),
                    to: r.to.clone(),
                })
                .collect(),
        }
    }
}

fn is_identifier(s: &str, allow_dots: bool) -> bool {
    let mut chars = s.chars();
    match chars.next() {
        Some(c) if c.is_ascii_alphabetic() || c == '_' => {}
        _ => return false,
    }
    !s.ends_with('.')
        && !s.contains("..")
        && chars.all(|c| c.is_ascii_alphanumeric() || c == '_' || (allow_dots && c == '.'))
}

/// Validates a parsed schema document and renders its prompt block.
pub fn validate_schema_descriptor(raw: &RawSchema) -> Result<SchemaDescriptor, SchemaError> {
    let kind: DataSourceKind = raw.kind.parse().map_err(|_| SchemaError::UnknownKind {
        path: "kind".into(),
        kind: raw.kind.clone(),
    })?;
    if !is_identifier(&raw.source_id, false) {
        return Err(SchemaError::InvalidName {
            path: "source_id".into(),
            name: raw.source_id.clone(),
        });
    }
    if let Some(name) = &raw.name {
        if !is_identifier(name, false) {
            return Err(SchemaError::InvalidName {
                path: "name".into(),
                name: name.clone(),
            });
        }
    }
    if raw.entities.is_empty() {
        return Err(SchemaError::EmptySchema {
            path: "entities".into(),
            what: "entities",
        });
    }
    if kind != DataSourceKind::Graph && !raw.relationships.is_empty() {
        return Err(SchemaError::RelationshipsNotAllowed {
            path: "relationships".into(),
            kind,
        });
    }

    let mut entities: Vec<EntityDescriptor> = Vec::with_capacity(raw.entities.len());
    for (i, e) in raw.entities.iter().enumerate() {
        let epath = format!("entities[{i}]");
        if !is_identifier(&e.name, false) {
            return Err(SchemaError::InvalidName {
                path: format!("{epath}.name"),
                name: e.name.clone(),
            });
        }
        if entities.iter().any(|prev| prev.name == e.name) {
            return Err(SchemaError::DuplicateEntity {
                path: format!("{epath}.name"),
                entity: e.name.clone(),
            });
        }
        if e.fields.is_empty() {
            return Err(SchemaError::EmptySchema {
                path: format!("{epath}.fields"),
                what: "fields",
            });
        }
        let mut fields: Vec<FieldDescriptor> = Vec::with_capacity(e.fields.len());
        for (j, entry) in e.fields.iter().enumerate() {
            let fpath = format!("{epath}.fields[{j}]");
            let (name, ty) = entry.split_once(':').ok_or_else(|| SchemaError::MalformedField {
                path: fpath.clone(),
                entry: entry.clone(),
            })?;
            let (name, ty) = (name.trim(), ty.trim());
            if !is_identifier(name, kind == DataSourceKind::Document) {
                return Err(SchemaError::MalformedField {
                    path: fpath,
                    entry: entry.clone(),
                });
            }
            let ty: FieldType = ty.parse().map_err(|_| SchemaError::UnknownFieldType {
                path: fpath.clone(),
                ty: ty.to_string(),
            })?;
            if fields.iter().any(|f| f.name == name) {
                return Err(SchemaError::DuplicateField {
                    path: fpath,
                    field: name.to_string(),
                });
            }
            fields.push(FieldDescriptor {
                name: name.to_string(),
                ty,
            });
        }
        for field in e.values.keys() {
            if !fields.iter().any(|f| &f.name == field) {
                return Err(SchemaError::UnknownValuesField {
                    path: format!("{epath}.values.{field}"),
                    field: field.clone(),
                });
            }
        }
        entities.push(EntityDescriptor {
            name: e.name.clone(),
            fields,
            values: e.values.clone(),
        });
    }

    let mut relationships = Vec::with_capacity(raw.relationships.len());
    for (i, r) in raw.relationships.iter().enumerate() {
        let rpath = format!("relationships[{i}]");
        for (what, name) in [("type", &r.rel_type), ("from", &r.from), ("to", &r.to)] {
            if !is_identifier(name, false) {
                return Err(SchemaError::InvalidName {
                    path: format!("{rpath}.{what}"),
                    name: name.clone(),
                });
            }
        }
        relationships.push(Relationship {
            rel_type: r.rel_type.clone(),
            from: r.from.clone(),
            to: r.to.clone(),
        });
    }

    let mut descriptor = SchemaDescriptor {
        source_id: raw.source_id.clone(),
        kind,
        name: raw.name.clone(),
        entities,
        relationships,
        rendered_block: String::new(),
    };
    descriptor.rendered_block = render_block(&descriptor);
    Ok(descriptor)
}

fn json_str(s: &str) -> String {
    serde_json::to_string(s).expect("string serialization is infallible")
}

fn render_json_entity(key: &str, entity: &EntityDescriptor) -> String {
    let mut out = String::new();
    out.push_str("{\n");
    out.push_str(&format!("  {}: {},\n", json_str(key), json_str(&entity.name)));
    out.push_str("  \"fields\": {\n");
    let lines: Vec<String> = entity
        .fields
        .iter()
        .map(|f| format!("    {}: {}", json_str(&f.name), json_str(f.ty.as_str())))
        .collect();
    out.push_str(&lines.join(",\n"));
    out.push_str("\n  }\n}");
    out
}

fn render_block(schema: &SchemaDescriptor) -> String {
    match schema.kind {
        DataSourceKind::Relational => schema
            .entities
            .iter()
            .map(|e| {
                let mut lines = vec![format!("Table: {}", e.name), "Columns:".to_string()];
                lines.extend(e.fields.iter().map(|f| format!("  - {} ({})", f.name, f.ty)));
                lines.join("\n")
            })
            .collect::<Vec<_>>()
            .join("\n\n"),
        DataSourceKind::Document => schema
            .entities
            .iter()
            .map(|e| render_json_entity("collection", e))
            .collect::<Vec<_>>()
            .join("\n"),
        DataSourceKind::Search => schema
            .entities
            .iter()
            .map(|e| render_json_entity("index", e))
            .collect::<Vec<_>>()
            .join("\n"),
        DataSourceKind::Graph => {
            let mut lines = vec![format!("Graph: {}", schema.display_name()), "Nodes:".to_string()];
            for e in &schema.entities {
                let props: Vec<String> = e.fields.iter().map(|f| format!("{}: {}", f.name, f.ty)).collect();
                lines.push(format!("  - {} {{{}}}", e.name, props.join(", ")));
            }
            let mut types: Vec<&str> = Vec::new();
            for r in &schema.relationships {
                if !types.contains(&r.rel_type.as_str()) {
                    types.push(&r.rel_type);
                }
            }
            if !types.is_empty() {
                lines.push("Relationships:".to_string());
                lines.extend(types.iter().map(|t| format!("  - {t}")));
            }
            lines.join("\n")
        }
    }
}
