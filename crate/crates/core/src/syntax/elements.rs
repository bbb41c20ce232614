use std::collections::BTreeSet;
use std::fmt;

use serde::{Deserialize, Serialize};

use super::lexer::{CodeToken, TokenKind};
use super::subtoken::split_subtokens;
use crate::error::{Error, Result};

/// The four statement-level element kinds tracked for mining.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ElementKind {
    Call,
    Assignment,
    Control,
    Return,
}

impl ElementKind {
    pub const ALL: [ElementKind; 4] = [
        ElementKind::Call,
        ElementKind::Assignment,
        ElementKind::Control,
        ElementKind::Return,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            ElementKind::Call => "call",
            ElementKind::Assignment => "assignment",
            ElementKind::Control => "control",
            ElementKind::Return => "return",
        }
    }

    pub fn parse(s: &str) -> Option<Self> {
        Self::ALL.into_iter().find(|k| k.as_str() == s)
    }
}

impl fmt::Display for ElementKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

/// Token sets of one function bucketed by element kind.
///
/// Serializes as `{"call":[..],"assignment":[..],"control":[..],"return":[..]}`
/// with every key present and values sorted.
#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct SyntacticElements {
    pub call: BTreeSet<String>,
    pub assignment: BTreeSet<String>,
    pub control: BTreeSet<String>,
    #[serde(rename = "return")]
    pub return_: BTreeSet<String>,
}

impl SyntacticElements {
    pub fn bucket(&self, kind: ElementKind) -> &BTreeSet<String> {
        match kind {
            ElementKind::Call => &self.call,
            ElementKind::Assignment => &self.assignment,
            ElementKind::Control => &self.control,
            ElementKind::Return => &self.return_,
        }
    }

    pub fn bucket_mut(&mut self, kind: ElementKind) -> &mut BTreeSet<String> {
        match kind {
            ElementKind::Call => &mut self.call,
            ElementKind::Assignment => &mut self.assignment,
            ElementKind::Control => &mut self.control,
            ElementKind::Return => &mut self.return_,
        }
    }

    pub fn is_empty(&self) -> bool {
        ElementKind::ALL.iter().all(|&k| self.bucket(k).is_empty())
    }

    /// Buckets augmented with the lowercase sub-tokens of every
    /// identifier-like member. This is the token channel used for mining and
    /// for matching during refinement.
    pub fn with_subtokens(&self) -> SyntacticElements {
        let mut out = self.clone();
        for kind in ElementKind::ALL {
            let extra: Vec<String> = self
                .bucket(kind)
                .iter()
                .filter(|t| t.starts_with(|c: char| c == '_' || c.is_ascii_alphabetic()))
                .flat_map(|t| split_subtokens(t))
                .collect();
            out.bucket_mut(kind).extend(extra);
        }
        out
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string(self).expect("string sets always serialize")
    }
}

const CONTROL_KEYWORDS: &[&str] = &["do", "for", "if", "switch", "while"];

const ASSIGNMENT_OPERATORS: &[&str] = &[
    "=", "+=", "-=", "*=", "/=", "%=", "<<=", ">>=", "&=", "|=", "^=",
];

/// Keywords that put a following `name(` into declaration context.
const DECLARATION_KEYWORDS: &[&str] = &[
    "_Bool", "_Complex", "auto", "bool", "char", "class", "const", "constexpr", "double",
    "enum", "explicit", "extern", "float", "inline", "int", "long", "register", "restrict",
    "short", "signed", "static", "struct", "typedef", "typename", "union", "unsigned",
    "virtual", "void", "volatile",
];

/// Tokens allowed between a definition's parameter list and its body.
const HEADER_QUALIFIERS: &[&str] = &["const", "final", "noexcept", "override", "volatile"];

struct Statement {
    start: usize,
    end: usize,
    /// Index of the `;`, `{` or `}` that closed the statement, if any.
    terminator: Option<usize>,
}

/// Buckets a function's tokens into call / assignment / control / return
/// element token sets.
pub fn extract_elements(tokens: &[CodeToken]) -> Result<SyntacticElements> {
    let matching = match_delimiters(tokens)?;
    let mut out = SyntacticElements::default();
    for stmt in statements(tokens) {
        extract_statement(tokens, &matching, &stmt, &mut out);
    }
    Ok(out)
}

fn match_delimiters(tokens: &[CodeToken]) -> Result<Vec<Option<usize>>> {
    let mut matching = vec![None; tokens.len()];
    let mut stack: Vec<usize> = Vec::new();
    for (i, t) in tokens.iter().enumerate() {
        if t.kind != TokenKind::Punctuation {
            continue;
        }
        let open = match t.text.as_str() {
            "(" | "[" | "{" => {
                stack.push(i);
                continue;
            }
            ")" => "(",
            "]" => "[",
            "}" => "{",
            _ => continue,
        };
        match stack.pop() {
            Some(j) if tokens[j].text == open => {
                matching[i] = Some(j);
                matching[j] = Some(i);
            }
            _ => return Err(Error::UnbalancedDelimiters { line: t.line }),
        }
    }
    match stack.pop() {
        Some(j) => Err(Error::UnbalancedDelimiters {
            line: tokens[j].line,
        }),
        None => Ok(matching),
    }
}

fn statements(tokens: &[CodeToken]) -> Vec<Statement> {
    let mut out = Vec::new();
    let mut depth = 0usize;
    let mut start = 0;
    for (i, t) in tokens.iter().enumerate() {
        if t.kind != TokenKind::Punctuation {
            continue;
        }
        match t.text.as_str() {
            "(" | "[" => depth += 1,
            ")" | "]" => depth = depth.saturating_sub(1),
            ";" | "{" | "}" if depth == 0 => {
                out.push(Statement {
                    start,
                    end: i,
                    terminator: Some(i),
                });
                start = i + 1;
            }
            _ => {}
        }
    }
    if start < tokens.len() {
        out.push(Statement {
            start,
            end: tokens.len(),
            terminator: None,
        });
    }
    out
}

fn words(tokens: &[CodeToken]) -> impl Iterator<Item = String> + '_ {
    tokens
        .iter()
        .filter(|t| t.kind.is_word())
        .map(|t| t.text.clone())
}

fn is_text(t: &CodeToken, kind: TokenKind, set: &[&str]) -> bool {
    t.kind == kind && set.contains(&t.text.as_str())
}

fn extract_statement(
    tokens: &[CodeToken],
    matching: &[Option<usize>],
    stmt: &Statement,
    out: &mut SyntacticElements,
) {
    let body = &tokens[stmt.start..stmt.end];
    let opens_block = stmt.terminator.is_some_and(|i| tokens[i].text == "{");
    let mut depth = 0usize;
    let mut has_assignment = false;

    for i in stmt.start..stmt.end {
        let t = &tokens[i];
        let next_is_paren = i + 1 < stmt.end && tokens[i + 1].text == "(";
        match t.kind {
            TokenKind::Identifier if next_is_paren => {
                let close = matching[i + 1].expect("delimiters were matched");
                let definition_header = depth == 0
                    && opens_block
                    && tokens[close + 1..stmt.end]
                        .iter()
                        .all(|q| is_text(q, TokenKind::Keyword, HEADER_QUALIFIERS));
                if !definition_header && !in_declaration_context(tokens, stmt.start, i) {
                    let bucket = &mut out.call;
                    bucket.insert(t.text.clone());
                    bucket.extend(words(&tokens[i + 2..close]));
                }
            }
            TokenKind::Keyword if CONTROL_KEYWORDS.contains(&t.text.as_str()) => {
                out.control.insert(t.text.clone());
                if t.text != "do" && next_is_paren {
                    let close = matching[i + 1].expect("delimiters were matched");
                    out.control.extend(words(&tokens[i + 2..close]));
                }
            }
            TokenKind::Keyword if t.text == "return" => {
                out.return_.insert(t.text.clone());
                out.return_.extend(words(&tokens[i + 1..stmt.end]));
            }
            TokenKind::Operator if depth == 0 && ASSIGNMENT_OPERATORS.contains(&t.text.as_str()) => {
                has_assignment = true;
            }
            TokenKind::Punctuation => match t.text.as_str() {
                "(" | "[" => depth += 1,
                ")" | "]" => depth = depth.saturating_sub(1),
                _ => {}
            },
            _ => {}
        }
    }

    if has_assignment {
        out.assignment.extend(words(body));
    }
}

/// Whether the identifier at `i` names a function being declared, as in
/// `int f(`, `size_t g(` or `struct s *h(`.
fn in_declaration_context(tokens: &[CodeToken], stmt_start: usize, i: usize) -> bool {
    let mut j = i;
    let mut pointers = 0;
    while j > stmt_start && matches!(tokens[j - 1].text.as_str(), "*" | "&" | "&&") {
        j -= 1;
        pointers += 1;
    }
    if j == stmt_start {
        return false;
    }
    let prev = &tokens[j - 1];
    match prev.kind {
        TokenKind::Keyword => DECLARATION_KEYWORDS.contains(&prev.text.as_str()),
        TokenKind::Identifier if pointers == 0 => true,
        TokenKind::Identifier => {
            j - 1 == stmt_start || is_text(&tokens[j - 2], TokenKind::Keyword, DECLARATION_KEYWORDS)
        }
        _ => false,
    }
}
