//! N-Quads reading and writing.

use super::graph::{Graph, Quad, Triple};
use super::term::{is_absolute_iri, Literal, Term};
use super::RdfError;

/// Serialize quads as N-Quads, one sorted line per quad.
pub fn serialize_nquads<'a>(quads: impl IntoIterator<Item = &'a Quad>) -> String {
    let mut lines: Vec<String> = quads
        .into_iter()
        .map(|q| {
            format!(
                "{} {} {} {} .\n",
                q.triple.subject, q.triple.predicate, q.triple.object, q.graph
            )
        })
        .collect();
    lines.sort();
    lines.dedup();
    lines.concat()
}

/// Parse N-Quads where every statement names its graph.
pub fn parse_nquads(text: &str) -> Result<Vec<Quad>, RdfError> {
    parse_statements(text)?
        .into_iter()
        .map(|(triple, graph, line)| match graph {
            Some(graph) => Ok(Quad { triple, graph }),
            None => Err(RdfError::Syntax {
                line,
                column: 1,
                message: "statement has no graph label".into(),
            }),
        })
        .collect()
}

/// Parse N-Triples or N-Quads, dropping graph labels.
pub fn parse_nquads_as_graph(text: &str) -> Result<Graph, RdfError> {
    Ok(parse_statements(text)?
        .into_iter()
        .map(|(triple, _, _)| triple)
        .collect())
}

fn parse_statements(text: &str) -> Result<Vec<(Triple, Option<Term>, usize)>, RdfError> {
    let mut out = Vec::new();
    for (idx, line) in text.lines().enumerate() {
        let line_no = idx + 1;
        let mut reader = LineReader::new(line, line_no);
        reader.skip_ws();
        if reader.at_end() || reader.peek() == Some('#') {
            continue;
        }
        let subject = reader.term()?;
        reader.skip_ws();
        let predicate = reader.term()?;
        reader.skip_ws();
        let object = reader.term()?;
        reader.skip_ws();
        let graph = if reader.peek() == Some('.') {
            None
        } else {
            let g = reader.term()?;
            if !g.is_iri() && !matches!(g, Term::BlankNode(_)) {
                return Err(reader.error("graph label must be an IRI or blank node"));
            }
            reader.skip_ws();
            Some(g)
        };
        if reader.peek() != Some('.') {
            return Err(reader.error("expected '.'"));
        }
        reader.bump();
        reader.skip_ws();
        if !reader.at_end() && reader.peek() != Some('#') {
            return Err(reader.error("trailing content after '.'"));
        }
        let triple = Triple::new(subject, predicate, object).map_err(|e| RdfError::Syntax {
            line: line_no,
            column: 1,
            message: e.to_string(),
        })?;
        out.push((triple, graph, line_no));
    }
    Ok(out)
}

/// Character cursor over one N-Quads line.
pub(crate) struct LineReader {
    chars: Vec<char>,
    pos: usize,
    line: usize,
}

impl LineReader {
    pub(crate) fn new(src: &str, line: usize) -> Self {
        LineReader {
            chars: src.chars().collect(),
            pos: 0,
            line,
        }
    }

    pub(crate) fn peek(&self) -> Option<char> {
        self.chars.get(self.pos).copied()
    }

    fn bump(&mut self) -> Option<char> {
        let c = self.peek()?;
        self.pos += 1;
        Some(c)
    }

    pub(crate) fn at_end(&self) -> bool {
        self.pos >= self.chars.len()
    }

    pub(crate) fn skip_ws(&mut self) {
        while matches!(self.peek(), Some(' ' | '\t' | '\r')) {
            self.pos += 1;
        }
    }

    fn error(&self, message: &str) -> RdfError {
        RdfError::Syntax {
            line: self.line,
            column: self.pos + 1,
            message: message.to_string(),
        }
    }

    pub(crate) fn term(&mut self) -> Result<Term, RdfError> {
        match self.peek() {
            Some('<') => Ok(Term::Iri(self.iri()?)),
            Some('_') => {
                self.bump();
                if self.bump() != Some(':') {
                    return Err(self.error("expected ':' after '_'"));
                }
                let start = self.pos;
                while self
                    .peek()
                    .is_some_and(|c| c.is_alphanumeric() || matches!(c, '_' | '-' | '.'))
                {
                    self.pos += 1;
                }
                while self.pos > start && self.chars[self.pos - 1] == '.' {
                    self.pos -= 1;
                }
                if self.pos == start {
                    return Err(self.error("empty blank node label"));
                }
                Ok(Term::BlankNode(
                    self.chars[start..self.pos].iter().collect(),
                ))
            }
            Some('"') => {
                self.bump();
                let mut lexical = String::new();
                loop {
                    match self.bump() {
                        None => return Err(self.error("unterminated string")),
                        Some('"') => break,
                        Some('\\') => lexical.push(self.escape()?),
                        Some(c) => lexical.push(c),
                    }
                }
                match self.peek() {
                    Some('@') => {
                        self.bump();
                        let start = self.pos;
                        while self
                            .peek()
                            .is_some_and(|c| c.is_ascii_alphanumeric() || c == '-')
                        {
                            self.pos += 1;
                        }
                        if self.pos == start {
                            return Err(self.error("empty language tag"));
                        }
                        let tag: String = self.chars[start..self.pos].iter().collect();
                        Ok(Term::Literal(Literal::lang(lexical, tag)))
                    }
                    Some('^') => {
                        self.bump();
                        if self.bump() != Some('^') {
                            return Err(self.error("expected '^^'"));
                        }
                        let dt = self.iri()?;
                        Ok(Term::Literal(Literal::typed(lexical, dt)))
                    }
                    _ => Ok(Term::Literal(Literal::plain(lexical))),
                }
            }
            _ => Err(self.error("expected a term")),
        }
    }

    fn iri(&mut self) -> Result<String, RdfError> {
        if self.bump() != Some('<') {
            return Err(self.error("expected '<'"));
        }
        let mut iri = String::new();
        loop {
            match self.bump() {
                None => return Err(self.error("unterminated IRI")),
                Some('>') => break,
                Some('\\') => iri.push(self.escape()?),
                Some(c) if c == ' ' || c == '<' => return Err(self.error("invalid IRI character")),
                Some(c) => iri.push(c),
            }
        }
        if !is_absolute_iri(&iri) {
            return Err(self.error("IRI is not absolute"));
        }
        Ok(iri)
    }

    fn escape(&mut self) -> Result<char, RdfError> {
        match self.bump() {
            Some('t') => Ok('\t'),
            Some('b') => Ok('\u{8}'),
            Some('n') => Ok('\n'),
            Some('r') => Ok('\r'),
            Some('f') => Ok('\u{c}'),
            Some('"') => Ok('"'),
            Some('\'') => Ok('\''),
            Some('\\') => Ok('\\'),
            Some('u') => self.hex(4),
            Some('U') => self.hex(8),
            _ => Err(self.error("invalid escape sequence")),
        }
    }

    fn hex(&mut self, digits: usize) -> Result<char, RdfError> {
        let mut value = 0u32;
        for _ in 0..digits {
            let d = self
                .bump()
                .and_then(|c| c.to_digit(16))
                .ok_or_else(|| self.error("invalid hex escape"))?;
            value = value * 16 + d;
        }
        char::from_u32(value).ok_or_else(|| self.error("invalid code point"))
    }
}
