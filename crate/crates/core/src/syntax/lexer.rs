use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum TokenKind {
    Identifier,
    Keyword,
    Number,
    StringLiteral,
    CharLiteral,
    Operator,
    Punctuation,
}

impl TokenKind {
    /// Kinds whose texts may enter an element bucket.
    pub fn is_word(self) -> bool {
        matches!(
            self,
            TokenKind::Identifier | TokenKind::Keyword | TokenKind::Number
        )
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct CodeToken {
    pub text: String,
    pub kind: TokenKind,
    pub line: usize,
}

const KEYWORDS: &[&str] = &[
    "_Alignas", "_Alignof", "_Atomic", "_Bool", "_Complex", "_Generic", "_Imaginary",
    "_Noreturn", "_Static_assert", "_Thread_local", "alignas", "alignof", "asm", "auto",
    "bool", "break", "case", "catch", "char", "class", "const", "const_cast", "constexpr",
    "continue", "decltype", "default", "delete", "do", "double", "dynamic_cast", "else",
    "enum", "explicit", "extern", "false", "float", "for", "friend", "goto", "if", "inline",
    "int", "long", "mutable", "namespace", "new", "noexcept", "nullptr", "operator",
    "private", "protected", "public", "register", "reinterpret_cast", "restrict", "return",
    "short", "signed", "sizeof", "static", "static_assert", "static_cast", "struct",
    "switch", "template", "this", "throw", "true", "try", "typedef", "typename", "union",
    "unsigned", "using", "virtual", "void", "volatile", "while",
];

pub fn is_keyword(text: &str) -> bool {
    KEYWORDS.binary_search(&text).is_ok()
}

// Longest first within each leading character so greedy matching works.
const OPERATORS: &[&str] = &[
    "<<=", ">>=", "->*", "...", "==", "<=", ">=", "!=", "+=", "-=", "*=", "/=", "%=", "&=",
    "|=", "^=", "->", "++", "--", "&&", "||", "<<", ">>", "::", ".*", "+", "-", "*", "/",
    "%", "=", "<", ">", "!", "~", "&", "|", "^", "?", ":", ".",
];

const PUNCTUATION: &[char] = &[';', ',', '(', ')', '{', '}', '[', ']'];

const LITERAL_PREFIXES: &[&str] = &["L", "u", "U", "u8"];

struct Lexer<'a> {
    src: &'a str,
    bytes: &'a [u8],
    pos: usize,
    line: usize,
    /// True until the first non-whitespace character of the current line.
    line_start: bool,
    tokens: Vec<CodeToken>,
}

/// Splits C/C++ source into tokens. Comments and preprocessor lines are
/// dropped; string and character literals stay whole.
pub fn lex(source: &str) -> Result<Vec<CodeToken>> {
    let mut lx = Lexer {
        src: source,
        bytes: source.as_bytes(),
        pos: 0,
        line: 1,
        line_start: true,
        tokens: Vec::new(),
    };
    lx.run()?;
    Ok(lx.tokens)
}

impl<'a> Lexer<'a> {
    fn peek(&self, off: usize) -> Option<u8> {
        self.bytes.get(self.pos + off).copied()
    }

    fn err(&self, line: usize, reason: impl Into<String>) -> Error {
        Error::Lex {
            line,
            reason: reason.into(),
        }
    }

    fn push(&mut self, start: usize, kind: TokenKind, line: usize) {
        self.tokens.push(CodeToken {
            text: self.src[start..self.pos].to_owned(),
            kind,
            line,
        });
        self.line_start = false;
    }

    fn run(&mut self) -> Result<()> {
        while let Some(c) = self.peek(0) {
            match c {
                b'\n' => {
                    self.pos += 1;
                    self.line += 1;
                    self.line_start = true;
                }
                b' ' | b'\t' | b'\r' | 0x0b | 0x0c => self.pos += 1,
                b'\\' if matches!(self.peek(1), Some(b'\n')) => {
                    self.pos += 2;
                    self.line += 1;
                }
                b'\\' if self.peek(1) == Some(b'\r') && self.peek(2) == Some(b'\n') => {
                    self.pos += 3;
                    self.line += 1;
                }
                b'/' if self.peek(1) == Some(b'/') => self.line_comment(),
                b'/' if self.peek(1) == Some(b'*') => self.block_comment()?,
                b'#' if self.line_start => self.directive(),
                b'#' => return Err(self.err(self.line, "stray '#' outside a preprocessor line")),
                b'"' | b'\'' => self.literal(self.pos)?,
                b'0'..=b'9' => self.number(),
                b'.' if self.peek(1).is_some_and(|d| d.is_ascii_digit()) => self.number(),
                c if c == b'_' || c.is_ascii_alphabetic() => self.word()?,
                _ => self.symbol()?,
            }
        }
        Ok(())
    }

    fn line_comment(&mut self) {
        // A backslash-newline continues a line comment.
        while let Some(c) = self.peek(0) {
            if c == b'\n' {
                if self.pos > 0 && self.bytes[self.pos - 1] == b'\\' {
                    self.line += 1;
                    self.pos += 1;
                    continue;
                }
                break;
            }
            self.pos += 1;
        }
    }

    fn block_comment(&mut self) -> Result<()> {
        let start_line = self.line;
        self.pos += 2;
        loop {
            match self.peek(0) {
                None => return Err(self.err(start_line, "unterminated block comment")),
                Some(b'*') if self.peek(1) == Some(b'/') => {
                    self.pos += 2;
                    return Ok(());
                }
                Some(b'\n') => {
                    self.line += 1;
                    self.pos += 1;
                }
                Some(_) => self.pos += 1,
            }
        }
    }

    /// Skips a preprocessor line including backslash continuations and any
    /// comments that start on it.
    fn directive(&mut self) {
        while let Some(c) = self.peek(0) {
            match c {
                b'\n' => break,
                b'\\' if self.peek(1) == Some(b'\n') => {
                    self.pos += 2;
                    self.line += 1;
                }
                b'/' if self.peek(1) == Some(b'*') => {
                    // An unterminated comment inside a directive swallows the
                    // rest of the file, same as the compiler would.
                    if self.block_comment().is_err() {
                        self.pos = self.bytes.len();
                    }
                }
                _ => self.pos += 1,
            }
        }
    }

    fn literal(&mut self, start: usize) -> Result<()> {
        let quote = self.bytes[self.pos];
        let line = self.line;
        let (kind, what) = if quote == b'"' {
            (TokenKind::StringLiteral, "string literal")
        } else {
            (TokenKind::CharLiteral, "character literal")
        };
        self.pos += 1;
        loop {
            match self.peek(0) {
                None | Some(b'\n') => {
                    return Err(self.err(line, format!("unterminated {what}")));
                }
                Some(b'\\') => {
                    if self.peek(1) == Some(b'\n') {
                        self.line += 1;
                    }
                    self.pos += 2.min(self.bytes.len() - self.pos);
                }
                Some(c) if c == quote => {
                    self.pos += 1;
                    break;
                }
                Some(_) => self.pos += 1,
            }
        }
        self.push(start, kind, line);
        Ok(())
    }

    fn number(&mut self) {
        // pp-number: digits, letters, '_', '.', digit separators and signed
        // exponents.
        let start = self.pos;
        self.pos += 1;
        while let Some(c) = self.peek(0) {
            let exponent_sign = matches!(c, b'+' | b'-')
                && matches!(self.bytes[self.pos - 1], b'e' | b'E' | b'p' | b'P');
            let body = c.is_ascii_alphanumeric() || c == b'_' || c == b'.';
            let separator = c == b'\'' && self.peek(1).is_some_and(|d| d.is_ascii_alphanumeric());
            if !(exponent_sign || body || separator) {
                break;
            }
            self.pos += 1;
        }
        self.push(start, TokenKind::Number, self.line);
    }

    fn word(&mut self) -> Result<()> {
        let start = self.pos;
        while self
            .peek(0)
            .is_some_and(|c| c == b'_' || c.is_ascii_alphanumeric())
        {
            self.pos += 1;
        }
        let text = &self.src[start..self.pos];
        if LITERAL_PREFIXES.contains(&text) && matches!(self.peek(0), Some(b'"' | b'\'')) {
            return self.literal(start);
        }
        let kind = if is_keyword(text) {
            TokenKind::Keyword
        } else {
            TokenKind::Identifier
        };
        self.push(start, kind, self.line);
        Ok(())
    }

    fn symbol(&mut self) -> Result<()> {
        let start = self.pos;
        let c = self.bytes[self.pos];
        if PUNCTUATION.contains(&(c as char)) {
            self.pos += 1;
            self.push(start, TokenKind::Punctuation, self.line);
            return Ok(());
        }
        let rest = &self.src[self.pos..];
        if let Some(op) = OPERATORS.iter().find(|op| rest.starts_with(**op)) {
            self.pos += op.len();
            self.push(start, TokenKind::Operator, self.line);
            return Ok(());
        }
        let ch = rest.chars().next().unwrap_or('?');
        Err(self.err(self.line, format!("unexpected character {ch:?}")))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use TokenKind::*;

    fn kinds(src: &str) -> Vec<(String, TokenKind)> {
        lex(src)
            .unwrap()
            .into_iter()
            .map(|t| (t.text, t.kind))
            .collect()
    }

    fn pairs(v: &[(&str, TokenKind)]) -> Vec<(String, TokenKind)> {
        v.iter().map(|(s, k)| (s.to_string(), *k)).collect()
    }

    #[test]
    fn keyword_table_sorted() {
        assert!(KEYWORDS.windows(2).all(|w| w[0] < w[1]));
    }

    #[test]
    fn compound_assignment() {
        assert_eq!(
            kinds("a+=1;"),
            pairs(&[("a", Identifier), ("+=", Operator), ("1", Number), (";", Punctuation)])
        );
    }

    #[test]
    fn comments_stripped() {
        assert_eq!(kinds("/*x*/y"), pairs(&[("y", Identifier)]));
        assert_eq!(kinds("a // b c\nd"), pairs(&[("a", Identifier), ("d", Identifier)]));
    }

    #[test]
    fn string_literal_kept_whole() {
        assert_eq!(
            kinds("s = \"a;b\";"),
            pairs(&[
                ("s", Identifier),
                ("=", Operator),
                ("\"a;b\"", StringLiteral),
                (";", Punctuation)
            ])
        );
        assert_eq!(kinds(r#""a\"b""#), pairs(&[(r#""a\"b""#, StringLiteral)]));
        assert_eq!(kinds("L\"w\" '\\n'"), pairs(&[("L\"w\"", StringLiteral), ("'\\n'", CharLiteral)]));
    }

    #[test]
    fn greedy_operators() {
        let ops: Vec<_> = kinds("a <<= b >>= c -> d ++ -- && || << >> == != <= >=")
            .into_iter()
            .filter(|(_, k)| *k == Operator)
            .map(|(t, _)| t)
            .collect();
        assert_eq!(
            ops,
            ["<<=", ">>=", "->", "++", "--", "&&", "||", "<<", ">>", "==", "!=", "<=", ">="]
        );
        assert_eq!(
            kinds("i+++j"),
            pairs(&[("i", Identifier), ("++", Operator), ("+", Operator), ("j", Identifier)])
        );
    }

    #[test]
    fn numbers() {
        assert_eq!(
            kinds("0x1F 1e-5 .5f 10UL"),
            pairs(&[("0x1F", Number), ("1e-5", Number), (".5f", Number), ("10UL", Number)])
        );
    }

    #[test]
    fn preprocessor_lines_skipped() {
        let src = "#define M(a) \\\n  (a + (\nint x;\n  # include <x.h>\n";
        assert_eq!(
            kinds(src),
            pairs(&[("int", Keyword), ("x", Identifier), (";", Punctuation)])
        );
    }

    #[test]
    fn line_numbers() {
        let toks = lex("a\n/* \n */ b\n\"s\"").unwrap();
        let lines: Vec<_> = toks.iter().map(|t| t.line).collect();
        assert_eq!(lines, [1, 3, 4]);
    }

    #[test]
    fn strict_errors() {
        assert!(matches!(lex("a /* b"), Err(Error::Lex { line: 1, .. })));
        assert!(matches!(lex("a\n\"abc\nd\""), Err(Error::Lex { line: 2, .. })));
        assert!(matches!(lex("'x"), Err(Error::Lex { .. })));
        assert!(matches!(lex("a @ b"), Err(Error::Lex { .. })));
        assert!(matches!(lex("a # b"), Err(Error::Lex { .. })));
    }
}
