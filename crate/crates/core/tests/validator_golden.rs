mod common;

use common::fixtures;
use common::mutants::{deletions, reference_queries};
use polyrag_core::dialect::validate;

#[test]
fn reference_queries_parse() {
    for (file, text, dialect) in reference_queries(&fixtures()) {
        assert!(validate(dialect, &text).is_ok(), "{file}: {:?}", validate(dialect, &text));
    }
}

#[test]
fn every_single_token_deletion_is_rejected() {
    let mut accepted = Vec::new();
    for (file, text, dialect) in reference_queries(&fixtures()) {
        for (token, mutant) in deletions(&text) {
            if validate(dialect, &mutant).is_ok() {
                accepted.push(format!("{file}: without `{token}`"));
            }
        }
    }
    assert!(accepted.is_empty(), "accepted mutants:\n{}", accepted.join("\n"));
}

#[test]
fn trailing_terminator_is_optional() {
    for (file, text, dialect) in reference_queries(&fixtures()) {
        if let Some(stripped) = text.trim_end().strip_suffix(';') {
            assert!(validate(dialect, stripped).is_ok(), "{file}");
        }
    }
}
