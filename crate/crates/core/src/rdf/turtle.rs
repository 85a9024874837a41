//! Reader for the Turtle subset used by ontology files.
//!
//! Supported: `@prefix`/`PREFIX`, `@base`/`BASE`, the `a` keyword, predicate
//! and object lists, IRIs, prefixed names, string/numeric/boolean literals
//! with language tags or datatypes, blank node labels, `[]` property lists
//! and `( ... )` collections. Anything else is a syntax error.

use super::graph::{Graph, Triple};
use super::prefix::PrefixMap;
use super::term::{is_absolute_iri, vocab, Literal, Term};
use super::RdfError;

/// Parse a Turtle document.
///
/// The returned prefix map holds the standard prefixes plus every prefix the
/// document declares. Prefixed names in the document itself must be declared.
pub fn parse_turtle(text: &str, base: Option<&str>) -> Result<(Graph, PrefixMap), RdfError> {
    let mut parser = Parser::new(text, base);
    parser.document()?;
    let mut prefixes = PrefixMap::standard();
    for (p, ns) in parser.declared.iter() {
        prefixes.insert(p, ns);
    }
    Ok((parser.graph, prefixes))
}

struct Parser {
    chars: Vec<char>,
    pos: usize,
    line: usize,
    column: usize,
    base: Option<String>,
    declared: PrefixMap,
    graph: Graph,
    next_blank: usize,
}

impl Parser {
    fn new(text: &str, base: Option<&str>) -> Self {
        Parser {
            chars: text.chars().collect(),
            pos: 0,
            line: 1,
            column: 1,
            base: base.map(str::to_string),
            declared: PrefixMap::empty(),
            graph: Graph::new(),
            next_blank: 0,
        }
    }

    fn error(&self, message: impl Into<String>) -> RdfError {
        RdfError::Syntax {
            line: self.line,
            column: self.column,
            message: message.into(),
        }
    }

    fn peek(&self) -> Option<char> {
        self.chars.get(self.pos).copied()
    }

    fn peek_at(&self, offset: usize) -> Option<char> {
        self.chars.get(self.pos + offset).copied()
    }

    fn bump(&mut self) -> Option<char> {
        let c = self.peek()?;
        self.pos += 1;
        if c == '\n' {
            self.line += 1;
            self.column = 1;
        } else {
            self.column += 1;
        }
        Some(c)
    }

    fn expect(&mut self, c: char) -> Result<(), RdfError> {
        self.skip_ws();
        if self.peek() == Some(c) {
            self.bump();
            Ok(())
        } else {
            Err(self.error(format!("expected '{c}'")))
        }
    }

    fn skip_ws(&mut self) {
        loop {
            match self.peek() {
                Some(c) if c.is_whitespace() => {
                    self.bump();
                }
                Some('#') => {
                    while !matches!(self.peek(), None | Some('\n')) {
                        self.bump();
                    }
                }
                _ => break,
            }
        }
    }

    fn starts_with_keyword(&self, keyword: &str) -> bool {
        let n = keyword.chars().count();
        let matches = keyword
            .chars()
            .enumerate()
            .all(|(i, k)| self.peek_at(i).is_some_and(|c| c.eq_ignore_ascii_case(&k)));
        matches && !self.peek_at(n).is_some_and(|c| is_name_char(c) || c == ':')
    }

    fn document(&mut self) -> Result<(), RdfError> {
        loop {
            self.skip_ws();
            match self.peek() {
                None => return Ok(()),
                Some('@') => {
                    self.bump();
                    if self.starts_with_keyword("prefix") {
                        self.advance(6);
                        self.prefix_decl()?;
                        self.expect('.')?;
                    } else if self.starts_with_keyword("base") {
                        self.advance(4);
                        self.base_decl()?;
                        self.expect('.')?;
                    } else {
                        return Err(self.error("unknown directive"));
                    }
                }
                Some(_) if self.starts_with_keyword("PREFIX") => {
                    self.advance(6);
                    self.prefix_decl()?;
                }
                Some(_) if self.starts_with_keyword("BASE") => {
                    self.advance(4);
                    self.base_decl()?;
                }
                Some(_) => {
                    self.triples()?;
                    self.expect('.')?;
                }
            }
        }
    }

    fn advance(&mut self, n: usize) {
        for _ in 0..n {
            self.bump();
        }
    }

    fn prefix_decl(&mut self) -> Result<(), RdfError> {
        self.skip_ws();
        let mut prefix = String::new();
        while let Some(c) = self.peek() {
            if c == ':' {
                break;
            }
            if !is_name_char(c) {
                return Err(self.error("invalid prefix label"));
            }
            prefix.push(c);
            self.bump();
        }
        self.expect(':')?;
        self.skip_ws();
        let ns = self.iri_ref()?;
        self.declared.insert(prefix, ns);
        Ok(())
    }

    fn base_decl(&mut self) -> Result<(), RdfError> {
        self.skip_ws();
        let iri = self.iri_ref()?;
        self.base = Some(iri);
        Ok(())
    }

    fn triples(&mut self) -> Result<(), RdfError> {
        self.skip_ws();
        if self.peek() == Some('[') {
            let subject = self.blank_node_property_list()?;
            self.skip_ws();
            if self.peek() != Some('.') {
                self.predicate_object_list(&subject)?;
            }
            return Ok(());
        }
        let subject = self.subject()?;
        self.predicate_object_list(&subject)
    }

    fn subject(&mut self) -> Result<Term, RdfError> {
        self.skip_ws();
        match self.peek() {
            Some('(') => self.collection(),
            Some('"' | '\'') => Err(self.error("literal in subject position")),
            Some('<') if self.peek_at(1) == Some('<') => {
                Err(self.error("quoted triples are not supported"))
            }
            _ => {
                let t = self.resource_or_blank()?;
                if t.is_literal() {
                    return Err(self.error("literal in subject position"));
                }
                Ok(t)
            }
        }
    }

    fn predicate_object_list(&mut self, subject: &Term) -> Result<(), RdfError> {
        loop {
            let predicate = self.verb()?;
            self.object_list(subject, &predicate)?;
            self.skip_ws();
            if self.peek() != Some(';') {
                return Ok(());
            }
            while self.peek() == Some(';') {
                self.bump();
                self.skip_ws();
            }
            if matches!(self.peek(), Some('.' | ']') | None) {
                return Ok(());
            }
        }
    }

    fn verb(&mut self) -> Result<Term, RdfError> {
        self.skip_ws();
        if self.peek() == Some('a') && !self.peek_at(1).is_some_and(|c| is_name_char(c) || c == ':')
        {
            self.bump();
            return Ok(Term::iri(vocab::RDF_TYPE));
        }
        match self.peek() {
            Some('<') => Ok(Term::Iri(self.iri_ref()?)),
            Some(c) if is_name_start(c) || c == ':' => Ok(Term::Iri(self.prefixed_name()?)),
            _ => Err(self.error("expected a predicate")),
        }
    }

    fn object_list(&mut self, subject: &Term, predicate: &Term) -> Result<(), RdfError> {
        loop {
            let object = self.object()?;
            self.emit(subject.clone(), predicate.clone(), object)?;
            self.skip_ws();
            if self.peek() == Some(',') {
                self.bump();
            } else {
                return Ok(());
            }
        }
    }

    fn emit(&mut self, s: Term, p: Term, o: Term) -> Result<(), RdfError> {
        let triple = Triple::new(s, p, o).map_err(|e| self.error(e.to_string()))?;
        self.graph.insert(triple);
        Ok(())
    }

    fn object(&mut self) -> Result<Term, RdfError> {
        self.skip_ws();
        match self.peek() {
            Some('[') => self.blank_node_property_list(),
            Some('(') => self.collection(),
            Some('<') if self.peek_at(1) == Some('<') => {
                Err(self.error("quoted triples are not supported"))
            }
            Some('"' | '\'') => self.string_literal(),
            Some(c) if c.is_ascii_digit() || matches!(c, '+' | '-' | '.') => self.numeric_literal(),
            _ => self.resource_or_blank(),
        }
    }

    fn resource_or_blank(&mut self) -> Result<Term, RdfError> {
        self.skip_ws();
        match self.peek() {
            Some('<') => Ok(Term::Iri(self.iri_ref()?)),
            Some('_') if self.peek_at(1) == Some(':') => {
                self.advance(2);
                let mut label = String::new();
                while let Some(c) = self.peek() {
                    if is_name_char(c) || c == '.' {
                        label.push(c);
                        self.bump();
                    } else {
                        break;
                    }
                }
                while label.ends_with('.') {
                    label.pop();
                    self.pos -= 1;
                    self.column -= 1;
                }
                if label.is_empty() {
                    return Err(self.error("empty blank node label"));
                }
                if label.starts_with("genid") {
                    label.insert(0, 'u');
                }
                Ok(Term::BlankNode(label))
            }
            Some('[') => {
                self.bump();
                self.skip_ws();
                if self.peek() == Some(']') {
                    self.bump();
                    Ok(self.fresh_blank())
                } else {
                    Err(self.error("expected ']'"))
                }
            }
            Some(_) if self.starts_with_keyword("true") => {
                self.advance(4);
                Ok(Term::literal(Literal::typed("true", vocab::XSD_BOOLEAN)))
            }
            Some(_) if self.starts_with_keyword("false") => {
                self.advance(5);
                Ok(Term::literal(Literal::typed("false", vocab::XSD_BOOLEAN)))
            }
            Some(c) if is_name_start(c) || c == ':' => Ok(Term::Iri(self.prefixed_name()?)),
            Some(c) => Err(self.error(format!("unexpected character '{c}'"))),
            None => Err(self.error("unexpected end of input")),
        }
    }

    fn fresh_blank(&mut self) -> Term {
        let label = format!("genid{}", self.next_blank);
        self.next_blank += 1;
        Term::BlankNode(label)
    }

    fn blank_node_property_list(&mut self) -> Result<Term, RdfError> {
        self.expect('[')?;
        self.skip_ws();
        let node = self.fresh_blank();
        if self.peek() == Some(']') {
            self.bump();
            return Ok(node);
        }
        self.predicate_object_list(&node)?;
        self.expect(']')?;
        Ok(node)
    }

    fn collection(&mut self) -> Result<Term, RdfError> {
        self.expect('(')?;
        let mut items = Vec::new();
        loop {
            self.skip_ws();
            if self.peek() == Some(')') {
                self.bump();
                break;
            }
            if self.peek().is_none() {
                return Err(self.error("unterminated collection"));
            }
            items.push(self.object()?);
        }
        let mut head = Term::iri(vocab::RDF_NIL);
        for item in items.into_iter().rev() {
            let node = self.fresh_blank();
            self.emit(node.clone(), Term::iri(vocab::RDF_FIRST), item)?;
            self.emit(node.clone(), Term::iri(vocab::RDF_REST), head)?;
            head = node;
        }
        Ok(head)
    }

    fn iri_ref(&mut self) -> Result<String, RdfError> {
        self.skip_ws();
        if self.peek() != Some('<') {
            return Err(self.error("expected '<'"));
        }
        self.bump();
        let mut iri = String::new();
        loop {
            match self.bump() {
                None => return Err(self.error("unterminated IRI")),
                Some('>') => break,
                Some('\\') => iri.push(self.escape(false)?),
                Some(c)
                    if c.is_whitespace()
                        || matches!(c, '<' | '"' | '{' | '}' | '|' | '^' | '`') =>
                {
                    return Err(self.error(format!("invalid character '{c}' in IRI")))
                }
                Some(c) => iri.push(c),
            }
        }
        self.resolve(&iri)
    }

    fn resolve(&self, iri: &str) -> Result<String, RdfError> {
        if is_absolute_iri(iri) {
            return Ok(iri.to_string());
        }
        let base = self
            .base
            .as_deref()
            .ok_or_else(|| self.error(format!("relative IRI <{iri}> without a base")))?;
        Ok(resolve_relative(base, iri))
    }

    fn prefixed_name(&mut self) -> Result<String, RdfError> {
        let mut prefix = String::new();
        while let Some(c) = self.peek() {
            if c == ':' {
                break;
            }
            if !is_name_char(c) {
                return Err(self.error(format!("unexpected character '{c}'")));
            }
            prefix.push(c);
            self.bump();
        }
        if self.peek() != Some(':') {
            return Err(self.error(format!("expected ':' after '{prefix}'")));
        }
        self.bump();
        let mut local = String::new();
        loop {
            match self.peek() {
                Some('\\') => {
                    self.bump();
                    match self.bump() {
                        Some(c) if "_~.-!$&'()*+,;=/?#@%".contains(c) => local.push(c),
                        _ => return Err(self.error("invalid local name escape")),
                    }
                }
                Some(c) if is_name_char(c) || matches!(c, '.' | ':' | '%') => {
                    local.push(c);
                    self.bump();
                }
                _ => break,
            }
        }
        while local.ends_with('.') {
            local.pop();
            self.pos -= 1;
            self.column -= 1;
        }
        let ns = self
            .declared
            .get(&prefix)
            .ok_or_else(|| RdfError::UnknownPrefix(prefix.clone()))?;
        Ok(format!("{ns}{local}"))
    }

    fn string_literal(&mut self) -> Result<Term, RdfError> {
        let quote = self.bump().ok_or_else(|| self.error("expected string"))?;
        let long = self.peek() == Some(quote) && self.peek_at(1) == Some(quote);
        let mut lexical = String::new();
        if long {
            self.advance(2);
            loop {
                match self.peek() {
                    None => return Err(self.error("unterminated long string")),
                    Some(c)
                        if c == quote
                            && self.peek_at(1) == Some(quote)
                            && self.peek_at(2) == Some(quote) =>
                    {
                        self.advance(3);
                        // Quotes directly before the closing delimiter belong to the content.
                        while self.peek() == Some(quote) {
                            lexical.push(quote);
                            self.bump();
                        }
                        break;
                    }
                    Some('\\') => {
                        self.bump();
                        lexical.push(self.escape(true)?);
                    }
                    Some(c) => {
                        lexical.push(c);
                        self.bump();
                    }
                }
            }
        } else {
            loop {
                match self.bump() {
                    None | Some('\n') | Some('\r') => return Err(self.error("unterminated string")),
                    Some(c) if c == quote => break,
                    Some('\\') => lexical.push(self.escape(true)?),
                    Some(c) => lexical.push(c),
                }
            }
        }
        match self.peek() {
            Some('@') => {
                self.bump();
                let mut tag = String::new();
                while let Some(c) = self.peek() {
                    if c.is_ascii_alphanumeric() || c == '-' {
                        tag.push(c);
                        self.bump();
                    } else {
                        break;
                    }
                }
                if tag.is_empty() {
                    return Err(self.error("empty language tag"));
                }
                Ok(Term::literal(Literal::lang(lexical, tag)))
            }
            Some('^') if self.peek_at(1) == Some('^') => {
                self.advance(2);
                let dt = match self.peek() {
                    Some('<') => self.iri_ref()?,
                    _ => self.prefixed_name()?,
                };
                Ok(Term::literal(Literal::typed(lexical, dt)))
            }
            _ => Ok(Term::literal(Literal::plain(lexical))),
        }
    }

    fn numeric_literal(&mut self) -> Result<Term, RdfError> {
        let mut text = String::new();
        if let Some(c @ ('+' | '-')) = self.peek() {
            text.push(c);
            self.bump();
        }
        let mut digits_before = 0;
        while let Some(c) = self.peek().filter(char::is_ascii_digit) {
            text.push(c);
            self.bump();
            digits_before += 1;
        }
        let mut datatype = vocab::XSD_INTEGER;
        if self.peek() == Some('.') && self.peek_at(1).is_some_and(|c| c.is_ascii_digit()) {
            datatype = vocab::XSD_DECIMAL;
            text.push('.');
            self.bump();
            while let Some(c) = self.peek().filter(char::is_ascii_digit) {
                text.push(c);
                self.bump();
            }
        } else if digits_before == 0 {
            return Err(self.error("malformed number"));
        }
        if matches!(self.peek(), Some('e' | 'E')) {
            datatype = vocab::XSD_DOUBLE;
            text.push('e');
            self.bump();
            if let Some(c @ ('+' | '-')) = self.peek() {
                text.push(c);
                self.bump();
            }
            let mut exp_digits = 0;
            while let Some(c) = self.peek().filter(char::is_ascii_digit) {
                text.push(c);
                self.bump();
                exp_digits += 1;
            }
            if exp_digits == 0 {
                return Err(self.error("malformed exponent"));
            }
        }
        Ok(Term::literal(Literal::typed(text, datatype)))
    }

    fn escape(&mut self, in_string: bool) -> Result<char, RdfError> {
        let c = self.bump().ok_or_else(|| self.error("dangling escape"))?;
        let simple = match c {
            't' => Some('\t'),
            'b' => Some('\u{8}'),
            'n' => Some('\n'),
            'r' => Some('\r'),
            'f' => Some('\u{c}'),
            '"' => Some('"'),
            '\'' => Some('\''),
            '\\' => Some('\\'),
            _ => None,
        };
        if let Some(s) = simple {
            if in_string {
                return Ok(s);
            }
            return Err(self.error("only \\u escapes are allowed in IRIs"));
        }
        let digits = match c {
            'u' => 4,
            'U' => 8,
            _ => return Err(self.error(format!("invalid escape '\\{c}'"))),
        };
        let mut value = 0u32;
        for _ in 0..digits {
            let d = self
                .bump()
                .and_then(|h| h.to_digit(16))
                .ok_or_else(|| self.error("invalid hex escape"))?;
            value = value * 16 + d;
        }
        char::from_u32(value).ok_or_else(|| self.error("invalid code point"))
    }
}

fn is_name_start(c: char) -> bool {
    c.is_alphabetic() || c == '_'
}

fn is_name_char(c: char) -> bool {
    c.is_alphanumeric() || c == '_' || c == '-'
}

/// Minimal reference resolution against a base IRI.
pub(crate) fn resolve_relative(base: &str, relative: &str) -> String {
    if relative.is_empty() {
        return base.split('#').next().unwrap_or(base).to_string();
    }
    if relative.starts_with('#') {
        let stem = base.split('#').next().unwrap_or(base);
        return format!("{stem}{relative}");
    }
    if let Some(rest) = relative.strip_prefix("//") {
        let scheme = base.split(':').next().unwrap_or("http");
        return format!("{scheme}://{rest}");
    }
    if relative.starts_with('/') {
        if let Some(idx) = base.find("://") {
            let after = &base[idx + 3..];
            let authority_end = after.find('/').map(|i| idx + 3 + i).unwrap_or(base.len());
            return format!("{}{relative}", &base[..authority_end]);
        }
        let scheme_end = base.find(':').map(|i| i + 1).unwrap_or(0);
        return format!("{}{relative}", &base[..scheme_end]);
    }
    let stem = base.split(['#', '?']).next().unwrap_or(base);
    match stem.rfind('/') {
        Some(idx) => format!("{}{relative}", &stem[..=idx]),
        None => format!("{stem}{relative}"),
    }
}
