//! Line-oriented record reader shared by the scenario, table and verdict formats.

use thiserror::Error;

#[derive(Debug, Clone, PartialEq, Eq, Error)]
#[error("line {line}, column {column}: {message}")]
pub struct ParseError {
    pub line: usize,
    pub column: usize,
    pub message: String,
}

impl ParseError {
    pub fn new(line: usize, column: usize, message: impl Into<String>) -> Self {
        Self { line, column, message: message.into() }
    }
}

/// One whitespace-separated token with its 1-based position.
#[derive(Debug, Clone, Copy)]
pub struct Token<'a> {
    pub text: &'a str,
    pub line: usize,
    pub column: usize,
}

impl<'a> Token<'a> {
    pub fn error(&self, message: impl Into<String>) -> ParseError {
        ParseError::new(self.line, self.column, message)
    }

    pub fn parse<T: std::str::FromStr>(&self, what: &str) -> Result<T, ParseError> {
        self.text.parse().map_err(|_| self.error(format!("expected {what}, found `{}`", self.text)))
    }
}

/// A non-empty, non-comment line split into tokens.
#[derive(Debug, Clone)]
pub struct Record<'a> {
    pub line: usize,
    pub tokens: Vec<Token<'a>>,
}

impl<'a> Record<'a> {
    pub fn keyword(&self) -> &'a str {
        self.tokens[0].text
    }

    pub fn args(&self) -> &[Token<'a>] {
        &self.tokens[1..]
    }

    pub fn error(&self, message: impl Into<String>) -> ParseError {
        ParseError::new(self.line, 1, message)
    }

    pub fn expect_args(&self, n: usize) -> Result<&[Token<'a>], ParseError> {
        if self.args().len() != n {
            return Err(self.error(format!("`{}` takes {n} argument(s), found {}", self.keyword(), self.args().len())));
        }
        Ok(self.args())
    }

    /// Everything after the keyword, verbatim.
    pub fn rest(&self, source_line: &'a str) -> &'a str {
        match self.tokens.get(1) {
            Some(tok) => source_line[tok.column - 1..].trim_end(),
            None => "",
        }
    }
}

/// Splits `text` into records, dropping blank lines and `#` comments.
pub fn records(text: &str) -> Vec<Record<'_>> {
    let mut out = Vec::new();
    for (idx, raw) in text.lines().enumerate() {
        let content = match raw.find('#') {
            Some(pos) => &raw[..pos],
            None => raw,
        };
        let mut tokens = Vec::new();
        let mut start = None;
        for (pos, ch) in content.char_indices() {
            if ch.is_whitespace() {
                if let Some(s) = start.take() {
                    tokens.push(Token { text: &content[s..pos], line: idx + 1, column: s + 1 });
                }
            } else if start.is_none() {
                start = Some(pos);
            }
        }
        if let Some(s) = start {
            tokens.push(Token { text: &content[s..], line: idx + 1, column: s + 1 });
        }
        if !tokens.is_empty() {
            out.push(Record { line: idx + 1, tokens });
        }
    }
    out
}
