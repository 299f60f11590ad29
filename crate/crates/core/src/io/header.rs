//! Whitespace-separated ASCII headers shared by PFM and PNM.

use crate::error::{Error, Result};

pub(crate) struct HeaderReader<'a> {
    bytes: &'a [u8],
    pos: usize,
}

impl<'a> HeaderReader<'a> {
    pub(crate) fn new(bytes: &'a [u8]) -> Self {
        Self { bytes, pos: 0 }
    }

    /// Next token and its byte offset; `#` starts a comment up to end of line.
    pub(crate) fn token(&mut self) -> Result<(usize, &'a str)> {
        loop {
            match self.bytes.get(self.pos) {
                Some(b) if b.is_ascii_whitespace() => self.pos += 1,
                Some(b'#') => {
                    while self.bytes.get(self.pos).is_some_and(|&b| b != b'\n') {
                        self.pos += 1;
                    }
                }
                Some(_) => break,
                None => return Err(Error::Parse { offset: self.pos, message: "header ends early".into() }),
            }
        }
        let start = self.pos;
        while self.bytes.get(self.pos).is_some_and(|b| !b.is_ascii_whitespace()) {
            self.pos += 1;
        }
        let text = std::str::from_utf8(&self.bytes[start..self.pos])
            .map_err(|_| Error::Parse { offset: start, message: "non-ASCII header".into() })?;
        Ok((start, text))
    }

    pub(crate) fn number(&mut self, what: &str) -> Result<usize> {
        let (at, text) = self.token()?;
        text.parse()
            .map_err(|_| Error::Parse { offset: at, message: format!("bad {what} {text:?}") })
    }

    pub(crate) fn dimension(&mut self) -> Result<usize> {
        let (at, text) = self.token()?;
        match text.parse::<usize>() {
            Ok(n) if n > 0 => Ok(n),
            _ => Err(Error::Parse { offset: at, message: format!("bad dimension {text:?}") }),
        }
    }

    /// Consumes the single whitespace byte that ends the header and returns
    /// the payload offset.
    pub(crate) fn end_of_header(&mut self) -> Result<usize> {
        match self.bytes.get(self.pos) {
            Some(b) if b.is_ascii_whitespace() => Ok(self.pos + 1),
            _ => Err(Error::Parse { offset: self.pos, message: "header not terminated by whitespace".into() }),
        }
    }
}
