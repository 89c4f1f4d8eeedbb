use std::cmp::Ordering;

use super::ExecError;
use crate::dialect::CompareOp;
use crate::model::Value;

/// Whether two non-null values may be compared.
pub fn type_compatible(a: &Value, b: &Value) -> bool {
    use Value::*;
    matches!(
        (a, b),
        (Int(_) | Float(_), Int(_) | Float(_))
            | (Str(_) | Date(_), Str(_) | Date(_))
            | (Bool(_), Bool(_))
    )
}

fn ordering(a: &Value, b: &Value) -> Option<Ordering> {
    use Value::*;
    match (a, b) {
        (Int(x), Int(y)) => Some(x.cmp(y)),
        (Int(x), Float(y)) => (*x as f64).partial_cmp(y),
        (Float(x), Int(y)) => x.partial_cmp(&(*y as f64)),
        (Float(x), Float(y)) => x.partial_cmp(y),
        (Str(x) | Date(x), Str(y) | Date(y)) => Some(x.as_bytes().cmp(y.as_bytes())),
        (Bool(x), Bool(y)) => Some(x.cmp(y)),
        _ => None,
    }
}

/// Evaluates `cell op literal`. Null on either side is false; a mixed-type
/// pair is an error.
pub fn compare_values(cell: &Value, op: CompareOp, literal: &Value) -> Result<bool, ExecError> {
    if cell.is_null() || literal.is_null() {
        return Ok(false);
    }
    let ord = ordering(cell, literal).ok_or_else(|| {
        ExecError::failed(format!(
            "cannot compare {} value `{cell}` with {} literal `{literal}`",
            cell.type_name(),
            literal.type_name()
        ))
    })?;
    Ok(match op {
        CompareOp::Eq => ord == Ordering::Equal,
        CompareOp::Ne => ord != Ordering::Equal,
        CompareOp::Lt => ord == Ordering::Less,
        CompareOp::Le => ord != Ordering::Greater,
        CompareOp::Gt => ord == Ordering::Greater,
        CompareOp::Ge => ord != Ordering::Less,
    })
}

fn rank(v: &Value) -> u8 {
    match v {
        Value::Null => 0,
        Value::Bool(_) => 1,
        Value::Int(_) | Value::Float(_) => 2,
        Value::Str(_) | Value::Date(_) => 3,
    }
}

/// Total order used for sorting: null first, then bools, numbers, text.
pub fn order_values(a: &Value, b: &Value) -> Ordering {
    rank(a)
        .cmp(&rank(b))
        .then_with(|| ordering(a, b).unwrap_or(Ordering::Equal))
}

/// Fails when any non-null value in `cells` cannot be compared with
/// `literal`, so a bad comparison is reported whatever the data order.
pub(crate) fn check_column<'a>(
    what: &str,
    cells: impl IntoIterator<Item = &'a Value>,
    literal: &Value,
) -> Result<(), ExecError> {
    if literal.is_null() {
        return Ok(());
    }
    for cell in cells {
        if !cell.is_null() && !type_compatible(cell, literal) {
            return Err(ExecError::failed(format!(
                "`{what}` holds {} values, compared with {} literal `{literal}`",
                cell.type_name(),
                literal.type_name()
            )));
        }
    }
    Ok(())
}
