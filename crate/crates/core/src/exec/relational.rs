use std::sync::RwLock;

use chrono::NaiveDate;
use serde::Serialize;

use super::compare::{check_column, compare_values, order_values};
use super::{dataset_array, digest_of, name_of, Backend, ExecError, Rows};
use crate::dialect::{ParsedQuery, Predicate, Projection, SortDirection, SqlSelect};
use crate::model::{DataSourceKind, Value};
use crate::schema::{FieldType, SchemaDescriptor};

#[derive(Debug, Clone, PartialEq, Serialize)]
struct Table {
    name: String,
    columns: Vec<String>,
    /// Declared types when the schema describes this table.
    types: Option<Vec<FieldType>>,
    rows: Vec<Vec<Value>>,
}

impl Table {
    fn column_index(&self, column: &str) -> Result<usize, ExecError> {
        self.columns
            .iter()
            .position(|c| c == column)
            .ok_or_else(|| ExecError::failed(format!("table `{}` has no column `{column}`", self.name)))
    }
}

/// Tables of typed rows, queried with the SQL subset.
#[derive(Debug)]
pub struct RelationalBackend {
    declared: Vec<Table>,
    tables: RwLock<Vec<Table>>,
}

impl RelationalBackend {
    /// Tables named in `schema` start out empty with declared columns.
    pub fn new(schema: Option<&SchemaDescriptor>) -> Self {
        let declared: Vec<Table> = schema
            .map(|s| {
                s.entities()
                    .iter()
                    .map(|e| Table {
                        name: e.name.clone(),
                        columns: e.fields.iter().map(|f| f.name.clone()).collect(),
                        types: Some(e.fields.iter().map(|f| f.ty).collect()),
                        rows: Vec::new(),
                    })
                    .collect()
            })
            .unwrap_or_default();
        Self {
            tables: RwLock::new(declared.clone()),
            declared,
        }
    }

    fn parse_dataset(&self, dataset: &serde_json::Value) -> Result<Vec<Table>, ExecError> {
        let mut tables = self.declared.clone();
        let mut index = 0usize;
        for entry in dataset_array(dataset, "tables")? {
            let name = name_of(entry, index)?;
            let rows = entry
                .get("rows")
                .and_then(serde_json::Value::as_array)
                .ok_or_else(|| ExecError::malformed(index, "rows", format!("table `{name}` has no rows array")))?;
            let listed: Option<Vec<String>> = match entry.get("columns") {
                None => None,
                Some(serde_json::Value::Array(cs)) => Some(
                    cs.iter()
                        .map(|c| c.as_str().map(str::to_string))
                        .collect::<Option<_>>()
                        .ok_or_else(|| ExecError::malformed(index, "columns", "column names must be strings"))?,
                ),
                Some(_) => return Err(ExecError::malformed(index, "columns", "not an array")),
            };
            let pos = match tables.iter().position(|t| t.name == name) {
                Some(p) => {
                    if listed.as_ref().is_some_and(|l| *l != tables[p].columns) {
                        return Err(ExecError::malformed(index, "columns", format!("differ from the schema of `{name}`")));
                    }
                    p
                }
                None => {
                    let columns = listed.unwrap_or_else(|| {
                        rows.first()
                            .and_then(serde_json::Value::as_object)
                            .map(|o| o.keys().cloned().collect())
                            .unwrap_or_default()
                    });
                    tables.push(Table {
                        name: name.clone(),
                        columns,
                        types: None,
                        rows: Vec::new(),
                    });
                    tables.len() - 1
                }
            };
            let table = &mut tables[pos];
            if !table.rows.is_empty() {
                return Err(ExecError::malformed(index, "name", format!("table `{name}` appears twice")));
            }
            for row in rows {
                table.rows.push(parse_row(table, row, index)?);
                index += 1;
            }
        }
        Ok(tables)
    }
}

fn parse_row(table: &Table, row: &serde_json::Value, index: usize) -> Result<Vec<Value>, ExecError> {
    let obj = row
        .as_object()
        .ok_or_else(|| ExecError::malformed(index, "", "row is not an object"))?;
    if let Some(extra) = obj.keys().find(|k| !table.columns.contains(k)) {
        return Err(ExecError::malformed(
            index,
            extra.clone(),
            format!("column is not declared for `{}`", table.name),
        ));
    }
    let mut out = Vec::with_capacity(table.columns.len());
    for (i, column) in table.columns.iter().enumerate() {
        let raw = obj
            .get(column)
            .ok_or_else(|| ExecError::malformed(index, column.clone(), "missing column"))?;
        let value = Value::from_json(raw)
            .ok_or_else(|| ExecError::malformed(index, column.clone(), "value is not a scalar"))?;
        let value = match table.types.as_ref().map(|t| t[i]) {
            Some(ty) => typed(value, ty).map_err(|reason| ExecError::malformed(index, column.clone(), reason))?,
            None => value,
        };
        out.push(value);
    }
    Ok(out)
}

fn typed(value: Value, ty: FieldType) -> Result<Value, String> {
    Ok(match (ty, value) {
        (_, Value::Null) => Value::Null,
        (FieldType::String, v @ Value::Str(_)) => v,
        (FieldType::Int, v @ Value::Int(_)) => v,
        (FieldType::Float, Value::Int(i)) => Value::Float(i as f64),
        (FieldType::Float, v @ Value::Float(_)) => v,
        (FieldType::Bool, v @ Value::Bool(_)) => v,
        (FieldType::Date, Value::Str(s)) => {
            NaiveDate::parse_from_str(&s, "%Y-%m-%d").map_err(|_| format!("`{s}` is not a YYYY-MM-DD date"))?;
            Value::Date(s)
        }
        (ty, v) => return Err(format!("expected {}, found {} `{v}`", ty.as_str(), v.type_name())),
    })
}

fn check_predicate(table: &Table, predicate: &Predicate) -> Result<(), ExecError> {
    match predicate {
        Predicate::Compare(c) => {
            let i = table.column_index(&c.column)?;
            if let Some(types) = &table.types {
                let probe = match types[i] {
                    FieldType::String => Value::Str(String::new()),
                    FieldType::Date => Value::Date(String::new()),
                    FieldType::Int => Value::Int(0),
                    FieldType::Float => Value::Float(0.0),
                    FieldType::Bool => Value::Bool(false),
                };
                check_column(&c.column, [&probe], &c.value)?;
            }
            check_column(&c.column, table.rows.iter().map(|r| &r[i]), &c.value)
        }
        Predicate::And(ps) | Predicate::Or(ps) => ps.iter().try_for_each(|p| check_predicate(table, p)),
    }
}

fn eval(table: &Table, row: &[Value], predicate: &Predicate) -> Result<bool, ExecError> {
    Ok(match predicate {
        Predicate::Compare(c) => compare_values(&row[table.column_index(&c.column)?], c.op, &c.value)?,
        Predicate::And(ps) => {
            for p in ps {
                if !eval(table, row, p)? {
                    return Ok(false);
                }
            }
            true
        }
        Predicate::Or(ps) => {
            for p in ps {
                if eval(table, row, p)? {
                    return Ok(true);
                }
            }
            false
        }
    })
}

fn select(tables: &[Table], q: &SqlSelect) -> Result<Rows, ExecError> {
    let Some(table) = tables.iter().find(|t| t.name == q.table) else {
        let columns = match &q.columns {
            Projection::Star => Vec::new(),
            Projection::Columns(cs) => cs.clone(),
        };
        return Ok(Rows { columns, rows: Vec::new() });
    };
    let projection: Vec<usize> = match &q.columns {
        Projection::Star => (0..table.columns.len()).collect(),
        Projection::Columns(cs) => cs.iter().map(|c| table.column_index(c)).collect::<Result<_, _>>()?,
    };
    if let Some(p) = &q.predicate {
        check_predicate(table, p)?;
    }
    let order = q.order_by.as_ref().map(|o| table.column_index(&o.column)).transpose()?;

    let mut matched: Vec<&Vec<Value>> = Vec::new();
    for row in &table.rows {
        if match &q.predicate {
            Some(p) => eval(table, row, p)?,
            None => true,
        } {
            matched.push(row);
        }
    }
    if let (Some(i), Some(o)) = (order, &q.order_by) {
        matched.sort_by(|a, b| {
            let ord = order_values(&a[i], &b[i]);
            match o.direction {
                SortDirection::Asc => ord,
                SortDirection::Desc => ord.reverse(),
            }
        });
    }
    if let Some(limit) = q.limit {
        matched.truncate(usize::try_from(limit).unwrap_or(usize::MAX));
    }
    Ok(Rows {
        columns: projection.iter().map(|&i| table.columns[i].clone()).collect(),
        rows: matched
            .into_iter()
            .map(|r| projection.iter().map(|&i| r[i].clone()).collect())
            .collect(),
    })
}

impl Backend for RelationalBackend {
    fn kind(&self) -> DataSourceKind {
        DataSourceKind::Relational
    }

    fn execute(&self, query: &ParsedQuery) -> Result<Rows, ExecError> {
        let ParsedQuery::Sql(q) = query else {
            return Err(ExecError::failed("relational backend only runs SQL"));
        };
        let tables = self.tables.read().unwrap_or_else(|e| e.into_inner());
        select(&tables, q)
    }

    fn load(&self, dataset: &serde_json::Value) -> Result<usize, ExecError> {
        let parsed = self.parse_dataset(dataset)?;
        let count = parsed.iter().map(|t| t.rows.len()).sum();
        *self.tables.write().unwrap_or_else(|e| e.into_inner()) = parsed;
        Ok(count)
    }

    fn state_digest(&self) -> String {
        digest_of(&*self.tables.read().unwrap_or_else(|e| e.into_inner()))
    }
}
