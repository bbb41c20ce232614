//! Token-level C/C++ lexing and heuristic extraction of the four syntactic
//! element kinds: function calls, assignments, control structures and
//! return statements.

mod elements;
mod lexer;
mod subtoken;

pub use elements::{extract_elements, ElementKind, SyntacticElements};
pub use lexer::{is_keyword, lex, CodeToken, TokenKind};
pub use subtoken::split_subtokens;

use crate::error::Result;

/// Lexes and extracts in one step.
pub fn elements_of(source: &str) -> Result<SyntacticElements> {
    extract_elements(&lex(source)?)
}
