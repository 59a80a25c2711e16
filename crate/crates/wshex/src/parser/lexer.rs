//! Tokenizer shared by the WShEx compact-syntax parser and the ShExC
//! subset reader of the converter.

use std::fmt;

use super::{ParseDiagnostic, SourcePosition};

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum TokenKind {
    /// Bare name: keywords (`PREFIX`, `CLOSED`, `AND`) and datatype names.
    Ident(String),
    /// Prefixed name. `prefix` is `""` for the default `:` prefix;
    /// `local` is `None` for a bare `prefix:` (as in prefix declarations).
    Pname { prefix: String, local: Option<String> },
    /// `<...>` content: shape labels and prefix IRIs.
    Iri(String),
    Int(u64),
    Str(String),
    LBrace,
    RBrace,
    LBracket,
    RBracket,
    LParen,
    RParen,
    /// `{|`
    QualOpenL,
    /// `|}`
    QualOpenR,
    /// `[|`
    QualClosedL,
    /// `|]`
    QualClosedR,
    Semi,
    Comma,
    Pipe,
    Question,
    Star,
    Plus,
    At,
    Dot,
    Percent,
    /// `^^` (typed-literal marker)
    Carets,
}

impl fmt::Display for TokenKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            TokenKind::Ident(s) => write!(f, "`{s}`"),
            TokenKind::Pname { prefix, local: Some(l) } => write!(f, "`{prefix}:{l}`"),
            TokenKind::Pname { prefix, local: None } => write!(f, "`{prefix}:`"),
            TokenKind::Iri(s) => write!(f, "`<{s}>`"),
            TokenKind::Int(n) => write!(f, "`{n}`"),
            TokenKind::Str(s) => write!(f, "{s:?}"),
            TokenKind::LBrace => f.write_str("`{`"),
            TokenKind::RBrace => f.write_str("`}`"),
            TokenKind::LBracket => f.write_str("`[`"),
            TokenKind::RBracket => f.write_str("`]`"),
            TokenKind::LParen => f.write_str("`(`"),
            TokenKind::RParen => f.write_str("`)`"),
            TokenKind::QualOpenL => f.write_str("`{|`"),
            TokenKind::QualOpenR => f.write_str("`|}`"),
            TokenKind::QualClosedL => f.write_str("`[|`"),
            TokenKind::QualClosedR => f.write_str("`|]`"),
            TokenKind::Semi => f.write_str("`;`"),
            TokenKind::Comma => f.write_str("`,`"),
            TokenKind::Pipe => f.write_str("`|`"),
            TokenKind::Question => f.write_str("`?`"),
            TokenKind::Star => f.write_str("`*`"),
            TokenKind::Plus => f.write_str("`+`"),
            TokenKind::At => f.write_str("`@`"),
            TokenKind::Dot => f.write_str("`.`"),
            TokenKind::Percent => f.write_str("`%`"),
            TokenKind::Carets => f.write_str("`^^`"),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Token {
    pub kind: TokenKind,
    pub pos: SourcePosition,
}

fn is_ident_start(c: char) -> bool {
    c.is_ascii_alphabetic() || c == '_'
}

fn is_ident_char(c: char) -> bool {
    c.is_ascii_alphanumeric() || c == '_'
}

struct Cursor<'a> {
    text: &'a str,
    byte: usize,
    line: usize,
    column: usize,
}

impl<'a> Cursor<'a> {
    fn peek(&self) -> Option<char> {
        self.text[self.byte..].chars().next()
    }

    fn bump(&mut self) -> Option<char> {
        let c = self.peek()?;
        self.byte += c.len_utf8();
        if c == '\n' {
            self.line += 1;
            self.column = 1;
        } else {
            self.column += 1;
        }
        Some(c)
    }

    fn pos(&self) -> SourcePosition {
        SourcePosition { line: self.line, column: self.column, byte_offset: self.byte }
    }

    fn take_while(&mut self, pred: impl Fn(char) -> bool) -> &'a str {
        let start = self.byte;
        while self.peek().is_some_and(&pred) {
            self.bump();
        }
        &self.text[start..self.byte]
    }
}

/// Tokenize the whole input. Lexing never aborts: bad characters and
/// unterminated strings/IRIs produce diagnostics and are skipped so the
/// parser can still look at the rest.
pub fn lex(text: &str) -> (Vec<Token>, Vec<ParseDiagnostic>) {
    let mut cur = Cursor { text, byte: 0, line: 1, column: 1 };
    let mut tokens = Vec::new();
    let mut diags = Vec::new();
    let mut push = |kind: TokenKind, pos: SourcePosition| tokens.push(Token { kind, pos });

    loop {
        // Skip whitespace and `#` comments.
        loop {
            match cur.peek() {
                Some(c) if c.is_whitespace() => {
                    cur.bump();
                }
                Some('#') => {
                    cur.take_while(|c| c != '\n');
                }
                _ => break,
            }
        }
        let pos = cur.pos();
        let Some(c) = cur.peek() else { break };

        match c {
            '{' => {
                cur.bump();
                if cur.peek() == Some('|') {
                    cur.bump();
                    push(TokenKind::QualOpenL, pos);
                } else {
                    push(TokenKind::LBrace, pos);
                }
            }
            '[' => {
                cur.bump();
                if cur.peek() == Some('|') {
                    cur.bump();
                    push(TokenKind::QualClosedL, pos);
                } else {
                    push(TokenKind::LBracket, pos);
                }
            }
            '|' => {
                cur.bump();
                match cur.peek() {
                    Some('}') => {
                        cur.bump();
                        push(TokenKind::QualOpenR, pos);
                    }
                    Some(']') => {
                        cur.bump();
                        push(TokenKind::QualClosedR, pos);
                    }
                    _ => push(TokenKind::Pipe, pos),
                }
            }
            '}' => {
                cur.bump();
                push(TokenKind::RBrace, pos);
            }
            ']' => {
                cur.bump();
                push(TokenKind::RBracket, pos);
            }
            '(' => {
                cur.bump();
                push(TokenKind::LParen, pos);
            }
            ')' => {
                cur.bump();
                push(TokenKind::RParen, pos);
            }
            ';' => {
                cur.bump();
                push(TokenKind::Semi, pos);
            }
            ',' => {
                cur.bump();
                push(TokenKind::Comma, pos);
            }
            '?' => {
                cur.bump();
                push(TokenKind::Question, pos);
            }
            '*' => {
                cur.bump();
                push(TokenKind::Star, pos);
            }
            '+' => {
                cur.bump();
                push(TokenKind::Plus, pos);
            }
            '@' => {
                cur.bump();
                push(TokenKind::At, pos);
            }
            '.' => {
                cur.bump();
                push(TokenKind::Dot, pos);
            }
            '%' => {
                cur.bump();
                push(TokenKind::Percent, pos);
            }
            '^' => {
                cur.bump();
                if cur.peek() == Some('^') {
                    cur.bump();
                    push(TokenKind::Carets, pos);
                } else {
                    diags.push(ParseDiagnostic::new(pos, "stray `^` (expected `^^`)"));
                }
            }
            '<' => {
                cur.bump();
                let content = cur.take_while(|c| c != '>' && c != '\n');
                if cur.peek() == Some('>') {
                    cur.bump();
                    push(TokenKind::Iri(content.to_string()), pos);
                } else {
                    diags.push(ParseDiagnostic::new(pos, "unterminated `<...>`"));
                }
            }
            '"' => {
                cur.bump();
                let mut s = String::new();
                let mut terminated = false;
                while let Some(c) = cur.bump() {
                    match c {
                        '"' => {
                            terminated = true;
                            break;
                        }
                        '\\' => match cur.bump() {
                            Some('"') => s.push('"'),
                            Some('\\') => s.push('\\'),
                            Some('n') => s.push('\n'),
                            Some('t') => s.push('\t'),
                            Some(other) => {
                                diags.push(ParseDiagnostic::new(
                                    pos,
                                    format!("unknown string escape `\\{other}`"),
                                ));
                            }
                            None => break,
                        },
                        '\n' => break,
                        _ => s.push(c),
                    }
                }
                if terminated {
                    push(TokenKind::Str(s), pos);
                } else {
                    diags.push(ParseDiagnostic::new(pos, "unterminated string literal"));
                }
            }
            ':' => {
                cur.bump();
                let local = if cur.peek().is_some_and(is_ident_char) {
                    Some(cur.take_while(is_ident_char).to_string())
                } else {
                    None
                };
                push(TokenKind::Pname { prefix: String::new(), local }, pos);
            }
            c if c.is_ascii_digit() => {
                let digits = cur.take_while(|c| c.is_ascii_digit());
                match digits.parse::<u64>() {
                    Ok(n) => push(TokenKind::Int(n), pos),
                    Err(_) => diags.push(ParseDiagnostic::new(pos, "integer literal out of range")),
                }
            }
            c if is_ident_start(c) => {
                let name = cur.take_while(is_ident_char).to_string();
                if cur.peek() == Some(':') {
                    cur.bump();
                    // A prefixed name only swallows a local part glued
                    // directly to the colon.
                    let local = if cur.peek().is_some_and(is_ident_char) {
                        Some(cur.take_while(is_ident_char).to_string())
                    } else {
                        None
                    };
                    push(TokenKind::Pname { prefix: name, local }, pos);
                } else {
                    push(TokenKind::Ident(name), pos);
                }
            }
            other => {
                cur.bump();
                diags.push(ParseDiagnostic::new(pos, format!("unexpected character `{other}`")));
            }
        }
    }

    (tokens, diags)
}
