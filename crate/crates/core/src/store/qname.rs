use std::fmt;
use std::str::FromStr;

use thiserror::Error;

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum QNameError {
    #[error("empty path")]
    EmptyPath,
    #[error("empty segment in `{0}`")]
    EmptySegment(String),
    #[error("invalid segment `{segment}` in `{path}`")]
    InvalidSegment { path: String, segment: String },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum QNameKind {
    Absolute,
    Relative,
    Simple,
}

/// A slash-delimited path naming an element.
///
/// `a` is simple, `/a/b` absolute, `../a` and `a/b` relative (the latter
/// with zero ascents, descending from the current model).
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct QName {
    kind: QNameKind,
    ups: usize,
    segments: Vec<String>,
}

impl QName {
    pub fn simple(name: impl Into<String>) -> Result<Self, QNameError> {
        let name = name.into();
        check_segment(&name, &name)?;
        Ok(QName {
            kind: QNameKind::Simple,
            ups: 0,
            segments: vec![name],
        })
    }

    pub fn absolute<I, S>(segments: I) -> Result<Self, QNameError>
    where
        I: IntoIterator<Item = S>,
        S: Into<String>,
    {
        let segments: Vec<String> = segments.into_iter().map(Into::into).collect();
        if segments.is_empty() {
            return Err(QNameError::EmptyPath);
        }
        let joined = segments.join("/");
        for s in &segments {
            check_segment(&joined, s)?;
        }
        Ok(QName {
            kind: QNameKind::Absolute,
            ups: 0,
            segments,
        })
    }

    pub fn parse(text: &str) -> Result<Self, QNameError> {
        if text.is_empty() {
            return Err(QNameError::EmptyPath);
        }
        if let Some(rest) = text.strip_prefix('/') {
            if rest.is_empty() {
                return Err(QNameError::EmptyPath);
            }
            let segments = split_segments(text, rest)?;
            return Ok(QName {
                kind: QNameKind::Absolute,
                ups: 0,
                segments,
            });
        }
        let mut rest = text;
        let mut ups = 0;
        while let Some(r) = rest.strip_prefix("../") {
            ups += 1;
            rest = r;
        }
        if rest.is_empty() {
            return Err(QNameError::EmptyPath);
        }
        let segments = split_segments(text, rest)?;
        let kind = if ups == 0 && segments.len() == 1 {
            QNameKind::Simple
        } else {
            QNameKind::Relative
        };
        Ok(QName {
            kind,
            ups,
            segments,
        })
    }

    pub fn kind(&self) -> QNameKind {
        self.kind
    }

    /// Number of leading `../` ascents.
    pub fn ups(&self) -> usize {
        self.ups
    }

    pub fn segments(&self) -> &[String] {
        &self.segments
    }

    pub fn local_name(&self) -> &str {
        self.segments
            .last()
            .expect("qname has at least one segment")
    }

    pub fn is_absolute(&self) -> bool {
        self.kind == QNameKind::Absolute
    }
}

fn split_segments(full: &str, rest: &str) -> Result<Vec<String>, QNameError> {
    rest.split('/')
        .map(|s| check_segment(full, s).map(|_| s.to_string()))
        .collect()
}

fn check_segment(full: &str, s: &str) -> Result<(), QNameError> {
    if s.is_empty() {
        return Err(QNameError::EmptySegment(full.to_string()));
    }
    if s == ".." || s.contains('/') || s.contains('"') {
        return Err(QNameError::InvalidSegment {
            path: full.to_string(),
            segment: s.to_string(),
        });
    }
    Ok(())
}

impl fmt::Display for QName {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.kind == QNameKind::Absolute {
            f.write_str("/")?;
        }
        for _ in 0..self.ups {
            f.write_str("../")?;
        }
        f.write_str(&self.segments.join("/"))
    }
}

impl FromStr for QName {
    type Err = QNameError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        QName::parse(s)
    }
}
