use std::sync::Arc;

use crate::syntax::{DiagKind, Diagnostic, SourceSpan};

#[derive(Debug, Clone, PartialEq)]
pub(crate) enum StrPart {
    Lit(String),
    /// Raw text of a `${...}` hole and the position of its first character.
    Interp {
        src: String,
        line: u32,
        column: u32,
    },
}

#[derive(Debug, Clone, PartialEq)]
pub(crate) enum Tok {
    Ident(String),
    Str(Vec<StrPart>),
    Num(f64),
    Punct(&'static str),
    Eof,
}

#[derive(Debug, Clone)]
pub(crate) struct Token {
    pub tok: Tok,
    pub span: SourceSpan,
}

const PUNCTS: &[&str] = &[
    "<->", "</", "/>", "..", "::", "==", "!=", "<=", ">=", "&&", "||", "<", ">", "{", "}", "(",
    ")", "[", "]", ",", ":", ".", "=", "?", "+", "-", "*", "/", "@", "!",
];

fn ident_start(c: char) -> bool {
    c.is_alphabetic() || c == '_'
}

fn ident_char(c: char) -> bool {
    c.is_alphanumeric() || c == '_'
}

pub(crate) struct Lexer<'a> {
    chars: Vec<char>,
    pos: usize,
    line: u32,
    column: u32,
    file: &'a Arc<str>,
}

impl<'a> Lexer<'a> {
    pub fn new(text: &str, file: &'a Arc<str>, line: u32, column: u32) -> Self {
        Lexer {
            chars: text.chars().collect(),
            pos: 0,
            line,
            column,
            file,
        }
    }

    fn peek(&self, k: usize) -> Option<char> {
        self.chars.get(self.pos + k).copied()
    }

    fn bump(&mut self) -> Option<char> {
        let c = self.peek(0)?;
        self.pos += 1;
        if c == '\n' {
            self.line += 1;
            self.column = 1;
        } else {
            self.column += 1;
        }
        Some(c)
    }

    fn span(&self, line: u32, column: u32, length: u32) -> SourceSpan {
        SourceSpan {
            file: self.file.clone(),
            line,
            column,
            length: length.max(1),
        }
    }

    fn error(&self, line: u32, column: u32, message: impl Into<String>) -> Diagnostic {
        Diagnostic::new(DiagKind::Syntax, self.span(line, column, 1), message)
    }

    pub fn tokenize(mut self) -> Result<Vec<Token>, Diagnostic> {
        let mut out = Vec::new();
        loop {
            self.skip_trivia();
            let (line, column, start) = (self.line, self.column, self.pos);
            let Some(c) = self.peek(0) else {
                out.push(Token {
                    tok: Tok::Eof,
                    span: self.span(line, column, 1),
                });
                return Ok(out);
            };
            let tok = if ident_start(c) || (c == '$' && self.peek(1).is_some_and(ident_start)) {
                self.bump();
                let mut s = String::from(c);
                while let Some(c) = self.peek(0) {
                    let dash = c == '-' && self.peek(1).is_some_and(|n| n.is_alphabetic());
                    if ident_char(c) || dash {
                        s.push(c);
                        self.bump();
                    } else {
                        break;
                    }
                }
                Tok::Ident(s)
            } else if c.is_ascii_digit() {
                self.number()?
            } else if c == '"' {
                self.string()?
            } else if let Some(p) = PUNCTS.iter().find(|p| self.starts_with(p)) {
                for _ in 0..p.len() {
                    self.bump();
                }
                Tok::Punct(p)
            } else {
                return Err(self.error(line, column, format!("unexpected character `{c}`")));
            };
            let length = (self.pos - start) as u32;
            out.push(Token {
                tok,
                span: self.span(line, column, length),
            });
        }
    }

    fn starts_with(&self, p: &str) -> bool {
        p.chars().enumerate().all(|(i, c)| self.peek(i) == Some(c))
    }

    fn skip_trivia(&mut self) {
        loop {
            match self.peek(0) {
                Some(c) if c.is_whitespace() => {
                    self.bump();
                }
                Some('/') if self.peek(1) == Some('/') => {
                    while let Some(c) = self.bump() {
                        if c == '\n' {
                            break;
                        }
                    }
                }
                _ => return,
            }
        }
    }

    fn number(&mut self) -> Result<Tok, Diagnostic> {
        let (line, column) = (self.line, self.column);
        let mut s = String::new();
        while let Some(c) = self.peek(0).filter(char::is_ascii_digit) {
            s.push(c);
            self.bump();
        }
        if self.peek(0) == Some('.') && self.peek(1).is_some_and(|c| c.is_ascii_digit()) {
            s.push('.');
            self.bump();
            while let Some(c) = self.peek(0).filter(char::is_ascii_digit) {
                s.push(c);
                self.bump();
            }
        }
        if matches!(self.peek(0), Some('e' | 'E'))
            && (self.peek(1).is_some_and(|c| c.is_ascii_digit())
                || (matches!(self.peek(1), Some('+' | '-'))
                    && self.peek(2).is_some_and(|c| c.is_ascii_digit())))
        {
            for _ in 0..2 {
                s.push(self.bump().expect("checked above"));
            }
            while let Some(c) = self.peek(0).filter(char::is_ascii_digit) {
                s.push(c);
                self.bump();
            }
        }
        s.parse::<f64>()
            .map(Tok::Num)
            .map_err(|_| self.error(line, column, format!("invalid number `{s}`")))
    }

    fn string(&mut self) -> Result<Tok, Diagnostic> {
        let (line, column) = (self.line, self.column);
        self.bump();
        let mut parts = Vec::new();
        let mut lit = String::new();
        loop {
            let (cl, cc) = (self.line, self.column);
            match self.bump() {
                None => return Err(self.error(line, column, "unterminated string literal")),
                Some('"') => break,
                Some('\\') => match self.bump() {
                    Some(c @ ('"' | '\\' | '$')) => lit.push(c),
                    Some(c) => return Err(self.error(cl, cc, format!("unknown escape `\\{c}`"))),
                    None => return Err(self.error(line, column, "unterminated string literal")),
                },
                Some('$') if self.peek(0) == Some('{') => {
                    self.bump();
                    let (il, ic) = (self.line, self.column);
                    let mut src = String::new();
                    loop {
                        match self.bump() {
                            None => return Err(self.error(cl, cc, "unterminated interpolation")),
                            Some('}') => break,
                            Some('"') => {
                                return Err(self.error(
                                    cl,
                                    cc,
                                    "string literal inside interpolation",
                                ))
                            }
                            Some(c) => src.push(c),
                        }
                    }
                    if !lit.is_empty() {
                        parts.push(StrPart::Lit(std::mem::take(&mut lit)));
                    }
                    parts.push(StrPart::Interp {
                        src,
                        line: il,
                        column: ic,
                    });
                }
                Some(c) => lit.push(c),
            }
        }
        if !lit.is_empty() || parts.is_empty() {
            parts.push(StrPart::Lit(lit));
        }
        Ok(Tok::Str(parts))
    }
}

/// Token cursor shared by the three parsers.
pub(crate) struct Cursor {
    toks: Vec<Token>,
    pos: usize,
}

impl Cursor {
    pub fn new(toks: Vec<Token>) -> Self {
        Cursor { toks, pos: 0 }
    }

    pub fn peek(&self) -> &Token {
        &self.toks[self.pos.min(self.toks.len() - 1)]
    }

    pub fn peek_at(&self, k: usize) -> &Token {
        &self.toks[(self.pos + k).min(self.toks.len() - 1)]
    }

    pub fn bump(&mut self) -> Token {
        let t = self.peek().clone();
        if self.pos < self.toks.len() - 1 {
            self.pos += 1;
        }
        t
    }

    pub fn at(&self, p: &str) -> bool {
        matches!(&self.peek().tok, Tok::Punct(q) if *q == p)
    }

    pub fn at_ident(&self, word: &str) -> bool {
        matches!(&self.peek().tok, Tok::Ident(w) if w == word)
    }

    pub fn eat(&mut self, p: &str) -> bool {
        if self.at(p) {
            self.bump();
            true
        } else {
            false
        }
    }

    pub fn error(&self, message: impl Into<String>) -> Diagnostic {
        let t = self.peek();
        let found = describe(&t.tok);
        Diagnostic::new(
            DiagKind::Syntax,
            t.span.clone(),
            format!("{}, found {found}", message.into()),
        )
    }

    pub fn expect(&mut self, p: &str) -> Result<SourceSpan, Diagnostic> {
        if self.at(p) {
            Ok(self.bump().span)
        } else {
            Err(self.error(format!("expected `{p}`")))
        }
    }

    pub fn expect_keyword(&mut self, word: &str) -> Result<SourceSpan, Diagnostic> {
        if self.at_ident(word) {
            Ok(self.bump().span)
        } else {
            Err(self.error(format!("expected `{word}`")))
        }
    }

    pub fn ident(&mut self, what: &str) -> Result<(String, SourceSpan), Diagnostic> {
        match &self.peek().tok {
            Tok::Ident(s) if !s.starts_with('$') => {
                let s = s.clone();
                Ok((s, self.bump().span))
            }
            _ => Err(self.error(format!("expected {what}"))),
        }
    }

    pub fn at_eof(&self) -> bool {
        matches!(self.peek().tok, Tok::Eof)
    }
}

pub(crate) fn describe(t: &Tok) -> String {
    match t {
        Tok::Ident(s) => format!("`{s}`"),
        Tok::Str(_) => "string literal".to_string(),
        Tok::Num(n) => format!("number {n}"),
        Tok::Punct(p) => format!("`{p}`"),
        Tok::Eof => "end of input".to_string(),
    }
}

pub(crate) fn tokenize(text: &str, file: &Arc<str>) -> Result<Vec<Token>, Diagnostic> {
    Lexer::new(text, file, 1, 1).tokenize()
}
