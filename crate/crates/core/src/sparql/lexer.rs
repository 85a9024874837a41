//! Tokenizer for the SPARQL subset.

use super::QueryError;

#[derive(Clone, Debug, PartialEq)]
pub(crate) enum Tok {
    /// `<...>` with escapes resolved, not yet resolved against BASE.
    Iri(String),
    /// `prefix:local`; an empty prefix is the default namespace.
    Prefixed {
        prefix: String,
        local: String,
    },
    Var(String),
    Blank(String),
    Str(String),
    LangTag(String),
    /// Unsigned numeric literal with its XSD datatype.
    Number {
        text: String,
        datatype: &'static str,
    },
    /// Bare word: keyword, `a`, function name, `true`/`false`.
    Word(String),
    Punct(&'static str),
}

#[derive(Clone, Debug)]
pub(crate) struct Token {
    pub tok: Tok,
    pub start: usize,
    pub end: usize,
    pub line: usize,
    pub column: usize,
}

impl Token {
    pub fn is_word(&self, word: &str) -> bool {
        matches!(&self.tok, Tok::Word(w) if w.eq_ignore_ascii_case(word))
    }

    pub fn is_punct(&self, p: &str) -> bool {
        matches!(&self.tok, Tok::Punct(q) if *q == p)
    }
}

const PUNCTS: [&str; 24] = [
    "^^", "&&", "||", "!=", "<=", ">=", "{", "}", "(", ")", "[", "]", ".", ",", ";", "*", "/", "|",
    "^", "?", "+", "-", "!", "=",
];

pub(crate) fn tokenize(src: &str) -> Result<Vec<Token>, QueryError> {
    Lexer::new(src).run()
}

struct Lexer<'a> {
    src: &'a str,
    pos: usize,
    line: usize,
    line_start: usize,
}

impl<'a> Lexer<'a> {
    fn new(src: &'a str) -> Self {
        Lexer {
            src,
            pos: 0,
            line: 1,
            line_start: 0,
        }
    }

    fn rest(&self) -> &'a str {
        &self.src[self.pos..]
    }

    fn peek(&self) -> Option<char> {
        self.rest().chars().next()
    }

    fn peek_nth(&self, n: usize) -> Option<char> {
        self.rest().chars().nth(n)
    }

    fn bump(&mut self) -> Option<char> {
        let c = self.peek()?;
        self.pos += c.len_utf8();
        if c == '\n' {
            self.line += 1;
            self.line_start = self.pos;
        }
        Some(c)
    }

    fn column(&self) -> usize {
        self.src[self.line_start..self.pos].chars().count() + 1
    }

    fn error(&self, message: impl Into<String>) -> QueryError {
        QueryError::Syntax {
            line: self.line,
            column: self.column(),
            message: message.into(),
        }
    }

    fn run(mut self) -> Result<Vec<Token>, QueryError> {
        let mut tokens = Vec::new();
        loop {
            self.skip_ws();
            if self.pos >= self.src.len() {
                return Ok(tokens);
            }
            let (start, line, column) = (self.pos, self.line, self.column());
            let tok = self.next_tok()?;
            tokens.push(Token {
                tok,
                start,
                end: self.pos,
                line,
                column,
            });
        }
    }

    fn skip_ws(&mut self) {
        while let Some(c) = self.peek() {
            if c.is_whitespace() {
                self.bump();
            } else if c == '#' {
                while !matches!(self.peek(), None | Some('\n')) {
                    self.bump();
                }
            } else {
                break;
            }
        }
    }

    fn next_tok(&mut self) -> Result<Tok, QueryError> {
        let c = self.peek().expect("not at end");
        match c {
            '<' => {
                if let Some(iri) = self.try_iri()? {
                    return Ok(Tok::Iri(iri));
                }
                self.bump();
                if self.peek() == Some('=') {
                    self.bump();
                    return Ok(Tok::Punct("<="));
                }
                Ok(Tok::Punct("<"))
            }
            '>' => {
                self.bump();
                if self.peek() == Some('=') {
                    self.bump();
                    return Ok(Tok::Punct(">="));
                }
                Ok(Tok::Punct(">"))
            }
            '?' | '$' if self.peek_nth(1).is_some_and(is_var_char) => {
                self.bump();
                Ok(Tok::Var(self.take_while(is_var_char)))
            }
            '_' if self.peek_nth(1) == Some(':') => {
                self.bump();
                self.bump();
                let mut label = self.take_while(|c| is_name_char(c) || c == '.');
                self.trim_trailing_dots(&mut label);
                if label.is_empty() {
                    return Err(self.error("empty blank node label"));
                }
                Ok(Tok::Blank(label))
            }
            '"' | '\'' => self.string(),
            '@' => {
                self.bump();
                let tag = self.take_while(|c| c.is_ascii_alphanumeric() || c == '-');
                if tag.is_empty() {
                    return Err(self.error("empty language tag"));
                }
                Ok(Tok::LangTag(tag))
            }
            c if c.is_ascii_digit()
                || (c == '.' && self.peek_nth(1).is_some_and(|d| d.is_ascii_digit())) =>
            {
                self.number()
            }
            c if c.is_alphabetic() || c == '_' || c == ':' => self.word_or_prefixed(),
            _ => {
                for p in PUNCTS {
                    if self.rest().starts_with(p) {
                        for _ in 0..p.len() {
                            self.bump();
                        }
                        return Ok(Tok::Punct(p));
                    }
                }
                Err(self.error(format!("unexpected character '{c}'")))
            }
        }
    }

    fn take_while(&mut self, pred: impl Fn(char) -> bool) -> String {
        let start = self.pos;
        while self.peek().is_some_and(&pred) {
            self.bump();
        }
        self.src[start..self.pos].to_string()
    }

    fn trim_trailing_dots(&mut self, text: &mut String) {
        while text.ends_with('.') {
            text.pop();
            self.pos -= 1;
        }
    }

    /// IRIREF if the text at `<` forms one; otherwise leave the cursor alone.
    fn try_iri(&mut self) -> Result<Option<String>, QueryError> {
        let rest = self.rest();
        let mut iri = String::new();
        let mut chars = rest.char_indices().skip(1);
        while let Some((idx, c)) = chars.next() {
            match c {
                '>' => {
                    let len = idx + 1;
                    for _ in rest[..len].chars() {
                        self.bump();
                    }
                    return Ok(Some(iri));
                }
                '\\' => {
                    let kind = chars.next().map(|(_, k)| k);
                    let digits = match kind {
                        Some('u') => 4,
                        Some('U') => 8,
                        _ => return Ok(None),
                    };
                    let mut value = 0u32;
                    for _ in 0..digits {
                        match chars.next().and_then(|(_, h)| h.to_digit(16)) {
                            Some(d) => value = value * 16 + d,
                            None => return Err(self.error("invalid IRI escape")),
                        }
                    }
                    iri.push(
                        char::from_u32(value).ok_or_else(|| self.error("invalid code point"))?,
                    );
                }
                c if (c as u32) <= 0x20 || matches!(c, '<' | '"' | '{' | '}' | '|' | '^' | '`') => {
                    return Ok(None)
                }
                c => iri.push(c),
            }
        }
        Ok(None)
    }

    fn string(&mut self) -> Result<Tok, QueryError> {
        let quote = self.bump().expect("quote");
        let long = self.peek() == Some(quote) && self.peek_nth(1) == Some(quote);
        let mut value = String::new();
        if long {
            self.bump();
            self.bump();
            loop {
                match self.peek() {
                    None => return Err(self.error("unterminated string")),
                    Some(c)
                        if c == quote
                            && self.peek_nth(1) == Some(quote)
                            && self.peek_nth(2) == Some(quote) =>
                    {
                        self.bump();
                        self.bump();
                        self.bump();
                        while self.peek() == Some(quote) {
                            value.push(quote);
                            self.bump();
                        }
                        return Ok(Tok::Str(value));
                    }
                    Some('\\') => {
                        self.bump();
                        value.push(self.escape()?);
                    }
                    Some(c) => {
                        value.push(c);
                        self.bump();
                    }
                }
            }
        }
        loop {
            match self.bump() {
                None | Some('\n') | Some('\r') => return Err(self.error("unterminated string")),
                Some(c) if c == quote => return Ok(Tok::Str(value)),
                Some('\\') => value.push(self.escape()?),
                Some(c) => value.push(c),
            }
        }
    }

    fn escape(&mut self) -> Result<char, QueryError> {
        let c = self.bump().ok_or_else(|| self.error("dangling escape"))?;
        let digits = match c {
            't' => return Ok('\t'),
            'b' => return Ok('\u{8}'),
            'n' => return Ok('\n'),
            'r' => return Ok('\r'),
            'f' => return Ok('\u{c}'),
            '"' | '\'' | '\\' => return Ok(c),
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

    fn number(&mut self) -> Result<Tok, QueryError> {
        let start = self.pos;
        let mut datatype = crate::rdf::vocab::XSD_INTEGER;
        self.take_while(|c| c.is_ascii_digit());
        if self.peek() == Some('.') && self.peek_nth(1).is_some_and(|c| c.is_ascii_digit()) {
            datatype = crate::rdf::vocab::XSD_DECIMAL;
            self.bump();
            self.take_while(|c| c.is_ascii_digit());
        }
        if matches!(self.peek(), Some('e' | 'E')) {
            let sign = matches!(self.peek_nth(1), Some('+' | '-'));
            let digit_at = if sign { 2 } else { 1 };
            if self.peek_nth(digit_at).is_some_and(|c| c.is_ascii_digit()) {
                datatype = crate::rdf::vocab::XSD_DOUBLE;
                self.bump();
                if sign {
                    self.bump();
                }
                self.take_while(|c| c.is_ascii_digit());
            }
        }
        Ok(Tok::Number {
            text: self.src[start..self.pos].to_string(),
            datatype,
        })
    }

    fn word_or_prefixed(&mut self) -> Result<Tok, QueryError> {
        let prefix = if self.peek() == Some(':') {
            String::new()
        } else {
            let mut p = self.take_while(|c| is_name_char(c) || c == '.');
            self.trim_trailing_dots(&mut p);
            p
        };
        if self.peek() != Some(':') {
            return Ok(Tok::Word(prefix));
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
                Some('%') => {
                    let hex: String = self.rest().chars().skip(1).take(2).collect();
                    if hex.len() == 2 && hex.chars().all(|c| c.is_ascii_hexdigit()) {
                        local.push('%');
                        local.push_str(&hex);
                        self.bump();
                        self.bump();
                        self.bump();
                    } else {
                        return Err(self.error("invalid percent escape"));
                    }
                }
                Some(c) if is_name_char(c) || c == '.' || c == ':' => {
                    local.push(c);
                    self.bump();
                }
                _ => break,
            }
        }
        while local.ends_with('.') {
            local.pop();
            self.pos -= 1;
        }
        Ok(Tok::Prefixed { prefix, local })
    }
}

fn is_var_char(c: char) -> bool {
    c.is_alphanumeric() || c == '_' || c == '\u{b7}'
}

fn is_name_char(c: char) -> bool {
    c.is_alphanumeric() || c == '_' || c == '-'
}
