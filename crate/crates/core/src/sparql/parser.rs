use std::collections::BTreeSet;

use super::ast::*;
use super::lexer::{tokenize, Tok, Token};
use super::QueryError;
use crate::rdf::turtle::resolve_relative;
use crate::rdf::{is_absolute_iri, vocab, Literal, PrefixMap, Term};

const MAX_VALUES_ROWS: usize = 64;

pub(crate) fn parse(src: &str, fallback: &PrefixMap) -> Result<QueryAst, QueryError> {
    let tokens = tokenize(src)?;
    let used_blank_labels = tokens
        .iter()
        .filter_map(|t| match &t.tok {
            Tok::Blank(label) => Some(label.clone()),
            _ => None,
        })
        .collect();
    let mut parser = Parser {
        src,
        tokens,
        pos: 0,
        prefixes: PrefixMap::standard(),
        declared: BTreeSet::new(),
        fallback,
        base: None,
        used_blank_labels,
        next_blank: 0,
        graph_clause: false,
    };
    parser.query()
}

struct Parser<'a> {
    src: &'a str,
    tokens: Vec<Token>,
    pos: usize,
    prefixes: PrefixMap,
    declared: BTreeSet<String>,
    fallback: &'a PrefixMap,
    base: Option<String>,
    used_blank_labels: BTreeSet<String>,
    next_blank: usize,
    graph_clause: bool,
}

impl<'a> Parser<'a> {
    fn peek(&self) -> Option<&Token> {
        self.tokens.get(self.pos)
    }

    fn peek_at(&self, offset: usize) -> Option<&Token> {
        self.tokens.get(self.pos + offset)
    }

    fn next(&mut self) -> Option<Token> {
        let t = self.tokens.get(self.pos).cloned();
        if t.is_some() {
            self.pos += 1;
        }
        t
    }

    fn at_word(&self, word: &str) -> bool {
        self.peek().is_some_and(|t| t.is_word(word))
    }

    fn at_punct(&self, p: &str) -> bool {
        self.peek().is_some_and(|t| t.is_punct(p))
    }

    fn eat_word(&mut self, word: &str) -> bool {
        if self.at_word(word) {
            self.pos += 1;
            true
        } else {
            false
        }
    }

    fn eat_punct(&mut self, p: &str) -> bool {
        if self.at_punct(p) {
            self.pos += 1;
            true
        } else {
            false
        }
    }

    fn error(&self, message: impl Into<String>) -> QueryError {
        let (line, column) = match self.peek() {
            Some(t) => (t.line, t.column),
            None => {
                let line = self.src.lines().count().max(1);
                let column = self.src.lines().last().map_or(0, |l| l.chars().count()) + 1;
                (line, column)
            }
        };
        QueryError::Syntax {
            line,
            column,
            message: message.into(),
        }
    }

    fn expect_punct(&mut self, p: &str) -> Result<(), QueryError> {
        if self.eat_punct(p) {
            Ok(())
        } else {
            Err(self.error(format!("expected '{p}'")))
        }
    }

    fn expect_word(&mut self, w: &str) -> Result<(), QueryError> {
        if self.eat_word(w) {
            Ok(())
        } else {
            Err(self.error(format!("expected {w}")))
        }
    }

    fn query(&mut self) -> Result<QueryAst, QueryError> {
        self.prologue()?;
        for form in ["ASK", "CONSTRUCT", "DESCRIBE"] {
            if self.at_word(form) {
                return Err(QueryError::UnsupportedFeature {
                    name: format!("{form} query"),
                });
            }
        }
        for update in [
            "INSERT", "DELETE", "LOAD", "CLEAR", "DROP", "CREATE", "WITH",
        ] {
            if self.at_word(update) {
                return Err(QueryError::UnsupportedFeature {
                    name: "SPARQL Update".into(),
                });
            }
        }
        let select = self.select(Context::BASE)?;
        let values = if self.at_word("VALUES") {
            Some(self.values_block()?)
        } else {
            None
        };
        if self.peek().is_some() {
            return Err(self.error("unexpected content after query"));
        }
        let mut notices = Vec::new();
        if !select.select_all {
            let mut bound = select.pattern.in_scope_variables();
            if let Some(v) = &values {
                bound.extend(v.variables.iter().cloned());
            }
            for p in &select.projection {
                if p.kind == ProjectionKind::Variable && !bound.contains(&p.name) {
                    notices.push(Notice::ProjectionMismatch {
                        variable: p.name.clone(),
                    });
                }
            }
        }
        if self.graph_clause {
            notices.push(Notice::GraphClauseIgnored);
        }
        let mut prefixes = PrefixMap::standard();
        for (p, ns) in self.fallback.iter() {
            prefixes.insert(p, ns);
        }
        for p in &self.declared {
            if let Some(ns) = self.prefixes.get(p) {
                prefixes.insert(p.clone(), ns);
            }
        }
        Ok(QueryAst {
            prefixes,
            base: self.base.clone(),
            projection: select.projection,
            select_all: select.select_all,
            pattern: select.pattern,
            modifiers: select.modifiers,
            values,
            notices,
        })
    }

    fn prologue(&mut self) -> Result<(), QueryError> {
        loop {
            if self.eat_word("BASE") {
                match self.next().map(|t| t.tok) {
                    Some(Tok::Iri(iri)) => self.base = Some(self.resolve(&iri)?),
                    _ => return Err(self.error("expected IRI after BASE")),
                }
            } else if self.eat_word("PREFIX") {
                let prefix = match self.next().map(|t| t.tok) {
                    Some(Tok::Prefixed { prefix, local }) if local.is_empty() => prefix,
                    _ => return Err(self.error("expected prefix label after PREFIX")),
                };
                match self.next().map(|t| t.tok) {
                    Some(Tok::Iri(iri)) => {
                        let ns = self.resolve(&iri)?;
                        self.prefixes.insert(prefix.clone(), ns);
                        self.declared.insert(prefix);
                    }
                    _ => return Err(self.error("expected namespace IRI")),
                }
            } else {
                return Ok(());
            }
        }
    }

    fn resolve(&self, iri: &str) -> Result<String, QueryError> {
        if is_absolute_iri(iri) {
            return Ok(iri.to_string());
        }
        match &self.base {
            Some(base) => Ok(resolve_relative(base, iri)),
            None => Err(self.error(format!("relative IRI <{iri}> without BASE"))),
        }
    }

    fn expand(&self, prefix: &str, local: &str) -> Result<String, QueryError> {
        let ns = if self.declared.contains(prefix) {
            self.prefixes.get(prefix)
        } else {
            self.fallback
                .get(prefix)
                .or_else(|| self.prefixes.get(prefix))
        };
        match ns {
            Some(ns) => Ok(format!("{ns}{local}")),
            None => Err(QueryError::UnknownPrefix(prefix.to_string())),
        }
    }

    fn select(&mut self, context: Context) -> Result<SubSelect, QueryError> {
        self.expect_word("SELECT")?;
        let mut modifiers = Modifiers {
            distinct: self.eat_word("DISTINCT"),
            ..Modifiers::default()
        };
        if !modifiers.distinct {
            modifiers.reduced = self.eat_word("REDUCED");
        }
        let mut projection = Vec::new();
        let mut select_all = false;
        if self.eat_punct("*") {
            select_all = true;
        } else {
            loop {
                match self.peek().map(|t| &t.tok) {
                    Some(Tok::Var(v)) => {
                        projection.push(Projection::variable(v.clone()));
                        self.pos += 1;
                    }
                    Some(Tok::Punct("(")) => {
                        self.pos += 1;
                        let expression = self.expression_until_as()?;
                        self.expect_word("AS")?;
                        let name = self.variable()?;
                        self.expect_punct(")")?;
                        projection.push(Projection::expression(name, expression));
                    }
                    _ => break,
                }
            }
            if projection.is_empty() {
                return Err(self.error("expected projection variables or '*'"));
            }
        }
        if self.at_word("FROM") {
            return Err(QueryError::UnsupportedFeature {
                name: "FROM dataset clause".into(),
            });
        }
        self.eat_word("WHERE");
        let pattern = self.group(context)?;
        self.solution_modifiers(&mut modifiers)?;
        Ok(SubSelect {
            projection,
            select_all,
            pattern,
            modifiers,
        })
    }

    fn variable(&mut self) -> Result<String, QueryError> {
        match self.next().map(|t| t.tok) {
            Some(Tok::Var(v)) => Ok(v),
            _ => {
                self.pos = self.pos.saturating_sub(1);
                Err(self.error("expected a variable"))
            }
        }
    }

    /// Source text of tokens up to (not including) `AS` at nesting depth 0.
    fn expression_until_as(&mut self) -> Result<String, QueryError> {
        let start = self.pos;
        let mut depth = 0usize;
        loop {
            let Some(t) = self.peek() else {
                return Err(self.error("unterminated expression"));
            };
            if depth == 0 && t.is_word("AS") {
                break;
            }
            if t.is_punct("(") || t.is_punct("{") || t.is_punct("[") {
                depth += 1;
            } else if t.is_punct(")") || t.is_punct("}") || t.is_punct("]") {
                if depth == 0 {
                    return Err(self.error("expected AS"));
                }
                depth -= 1;
            }
            self.pos += 1;
        }
        if self.pos == start {
            return Err(self.error("empty expression"));
        }
        Ok(self.slice(start, self.pos))
    }

    fn slice(&self, from_tok: usize, to_tok: usize) -> String {
        let start = self.tokens[from_tok].start;
        let end = self.tokens[to_tok - 1].end;
        self.src[start..end].to_string()
    }

    fn solution_modifiers(&mut self, m: &mut Modifiers) -> Result<(), QueryError> {
        if self.at_word("GROUP") {
            self.pos += 1;
            self.expect_word("BY")?;
            m.group_by = Some(self.clause_text()?);
        }
        if self.eat_word("HAVING") {
            m.having = Some(self.clause_text()?);
        }
        if self.at_word("ORDER") {
            self.pos += 1;
            self.expect_word("BY")?;
            m.order_by = Some(self.clause_text()?);
        }
        loop {
            if self.eat_word("LIMIT") {
                m.limit = Some(self.integer()?);
            } else if self.eat_word("OFFSET") {
                m.offset = Some(self.integer()?);
            } else {
                return Ok(());
            }
        }
    }

    fn integer(&mut self) -> Result<u64, QueryError> {
        match self.next().map(|t| t.tok) {
            Some(Tok::Number { text, .. }) => text
                .parse()
                .map_err(|_| self.error("expected a non-negative integer")),
            _ => Err(self.error("expected a non-negative integer")),
        }
    }

    /// Balanced token run up to the next solution-modifier keyword.
    fn clause_text(&mut self) -> Result<String, QueryError> {
        let start = self.pos;
        let mut depth = 0usize;
        while let Some(t) = self.peek() {
            if depth == 0
                && (["HAVING", "ORDER", "LIMIT", "OFFSET", "VALUES"]
                    .iter()
                    .any(|w| t.is_word(w))
                    || t.is_punct("}"))
            {
                break;
            }
            if t.is_punct("(") || t.is_punct("{") || t.is_punct("[") {
                depth += 1;
            } else if t.is_punct(")") || t.is_punct("}") || t.is_punct("]") {
                depth = depth.saturating_sub(1);
            }
            self.pos += 1;
        }
        if self.pos == start {
            return Err(self.error("empty clause"));
        }
        Ok(self.slice(start, self.pos))
    }

    fn group(&mut self, context: Context) -> Result<GroupPattern, QueryError> {
        self.expect_punct("{")?;
        if self.at_word("SELECT") {
            let sub = self.select(context.with(ContextFlag::Subquery))?;
            self.expect_punct("}")?;
            return Ok(GroupPattern {
                context,
                elements: vec![PatternElement::SubSelect(Box::new(sub))],
            });
        }
        let mut elements = Vec::new();
        loop {
            let Some(t) = self.peek() else {
                return Err(self.error("expected '}'"));
            };
            if t.is_punct("}") {
                self.pos += 1;
                break;
            }
            if t.is_punct(".") {
                self.pos += 1;
                continue;
            }
            if t.is_word("OPTIONAL") {
                self.pos += 1;
                let g = self.group(context.with(ContextFlag::Optional))?;
                elements.push(PatternElement::Optional(g));
            } else if t.is_word("MINUS") {
                self.pos += 1;
                let g = self.group(context.with(ContextFlag::Minus))?;
                elements.push(PatternElement::Minus(g));
            } else if t.is_word("GRAPH") {
                self.pos += 1;
                let name = self.var_or_iri()?;
                let pattern = self.group(context)?;
                self.graph_clause = true;
                elements.push(PatternElement::Graph { name, pattern });
            } else if t.is_word("SERVICE") {
                return Err(QueryError::UnsupportedFeature {
                    name: "SERVICE (federated query)".into(),
                });
            } else if t.is_word("FILTER") {
                self.pos += 1;
                elements.push(self.filter(context)?);
            } else if t.is_word("BIND") {
                self.pos += 1;
                self.expect_punct("(")?;
                let expression = self.expression_until_as()?;
                self.expect_word("AS")?;
                let variable = self.variable()?;
                self.expect_punct(")")?;
                elements.push(PatternElement::Bind {
                    expression,
                    variable,
                });
            } else if t.is_word("VALUES") {
                elements.push(PatternElement::Values(self.values_block()?));
            } else if t.is_punct("{") {
                elements.push(self.group_or_union(context)?);
            } else {
                self.triples_block(context, &mut elements)?;
                if let Some(next) = self.peek() {
                    let continues = next.is_punct(".")
                        || next.is_punct("}")
                        || next.is_punct("{")
                        || [
                            "OPTIONAL", "MINUS", "GRAPH", "FILTER", "BIND", "VALUES", "SERVICE",
                        ]
                        .iter()
                        .any(|w| next.is_word(w));
                    if !continues {
                        return Err(self.error("expected '.' between triple patterns"));
                    }
                }
            }
        }
        Ok(GroupPattern { context, elements })
    }

    fn group_or_union(&mut self, context: Context) -> Result<PatternElement, QueryError> {
        if !self.peek_union_follows() {
            return Ok(PatternElement::Group(self.group(context)?));
        }
        let branch_ctx = context.with(ContextFlag::Union);
        let mut branches = vec![self.group(branch_ctx)?];
        while self.eat_word("UNION") {
            branches.push(self.group(branch_ctx)?);
        }
        Ok(PatternElement::Union(branches))
    }

    /// Whether the `{` group at the cursor is followed by UNION.
    fn peek_union_follows(&self) -> bool {
        let mut depth = 0usize;
        let mut i = self.pos;
        while let Some(t) = self.tokens.get(i) {
            if t.is_punct("{") {
                depth += 1;
            } else if t.is_punct("}") {
                depth -= 1;
                if depth == 0 {
                    return self.tokens.get(i + 1).is_some_and(|n| n.is_word("UNION"));
                }
            }
            i += 1;
        }
        false
    }

    fn filter(&mut self, context: Context) -> Result<PatternElement, QueryError> {
        let start = self.pos;
        let mut not_exists = Vec::new();
        let nested = context.with(ContextFlag::FilterNotExists);
        if self.at_word("NOT") && self.peek_at(1).is_some_and(|t| t.is_word("EXISTS")) {
            self.pos += 2;
            not_exists.push(self.group(nested)?);
        } else if self.at_word("EXISTS") {
            self.pos += 1;
            self.skip_balanced()?;
        } else {
            // Bracketted expression or function call.
            match self.peek().map(|t| &t.tok) {
                Some(Tok::Punct("(")) => {}
                Some(Tok::Word(_)) | Some(Tok::Iri(_)) | Some(Tok::Prefixed { .. }) => {
                    self.pos += 1;
                    if !self.at_punct("(") {
                        return Err(self.error("expected '(' in FILTER"));
                    }
                }
                _ => return Err(self.error("expected FILTER expression")),
            }
            self.balanced_expression(nested, &mut not_exists)?;
        }
        Ok(PatternElement::Filter {
            expression: self.slice(start, self.pos),
            not_exists,
        })
    }

    /// Consume a `(`...`)` run, parsing any `NOT EXISTS { }` groups inside.
    fn balanced_expression(
        &mut self,
        nested: Context,
        not_exists: &mut Vec<GroupPattern>,
    ) -> Result<(), QueryError> {
        self.expect_punct("(")?;
        let mut depth = 1usize;
        while depth > 0 {
            let Some(t) = self.peek() else {
                return Err(self.error("unbalanced parentheses"));
            };
            if t.is_word("NOT") && self.peek_at(1).is_some_and(|n| n.is_word("EXISTS")) {
                self.pos += 2;
                not_exists.push(self.group(nested)?);
                continue;
            }
            if t.is_word("EXISTS") {
                self.pos += 1;
                self.skip_balanced()?;
                continue;
            }
            if t.is_punct("(") {
                depth += 1;
            } else if t.is_punct(")") {
                depth -= 1;
            }
            self.pos += 1;
        }
        Ok(())
    }

    fn skip_balanced(&mut self) -> Result<(), QueryError> {
        self.expect_punct("{")?;
        let mut depth = 1usize;
        while depth > 0 {
            let Some(t) = self.next() else {
                return Err(self.error("unbalanced braces"));
            };
            if t.is_punct("{") {
                depth += 1;
            } else if t.is_punct("}") {
                depth -= 1;
            }
        }
        Ok(())
    }

    fn values_block(&mut self) -> Result<ValuesBlock, QueryError> {
        let start = self.pos;
        self.expect_word("VALUES")?;
        let mut variables = Vec::new();
        let single = if let Some(Tok::Var(v)) = self.peek().map(|t| &t.tok) {
            variables.push(v.clone());
            self.pos += 1;
            true
        } else {
            self.expect_punct("(")?;
            while let Some(Tok::Var(v)) = self.peek().map(|t| &t.tok) {
                variables.push(v.clone());
                self.pos += 1;
            }
            self.expect_punct(")")?;
            false
        };
        self.expect_punct("{")?;
        let mut rows = 0usize;
        loop {
            let Some(t) = self.next() else {
                return Err(self.error("unterminated VALUES block"));
            };
            if t.is_punct("}") {
                break;
            }
            if single {
                if !t.is_punct("-") && !t.is_punct("+") {
                    rows += 1;
                }
                if matches!(t.tok, Tok::Str(_)) {
                    // Language tag or datatype belong to the same value.
                    if self
                        .peek()
                        .is_some_and(|n| matches!(n.tok, Tok::LangTag(_)))
                    {
                        self.pos += 1;
                    } else if self.at_punct("^^") {
                        self.pos += 2;
                    }
                }
            } else if t.is_punct("(") {
                rows += 1;
                while !self.at_punct(")") {
                    if self.next().is_none() {
                        return Err(self.error("unterminated VALUES row"));
                    }
                }
                self.pos += 1;
            }
        }
        if rows > MAX_VALUES_ROWS {
            return Err(QueryError::UnsupportedFeature {
                name: format!("VALUES with {rows} rows (limit {MAX_VALUES_ROWS})"),
            });
        }
        Ok(ValuesBlock {
            variables,
            rows,
            text: self.slice(start, self.pos),
        })
    }

    fn triples_block(
        &mut self,
        context: Context,
        out: &mut Vec<PatternElement>,
    ) -> Result<(), QueryError> {
        let subject = if self.at_punct("[") {
            let node = self.blank_property_list(context, out)?;
            if self.at_punct(".") || self.at_punct("}") {
                return Ok(());
            }
            node
        } else {
            self.subject_term()?
        };
        self.property_list(&subject, context, out)
    }

    fn subject_term(&mut self) -> Result<VarOrTerm, QueryError> {
        if self.at_punct("(") {
            return Err(QueryError::UnsupportedFeature {
                name: "RDF collection in query pattern".into(),
            });
        }
        if self.at_punct("<") && self.peek_at(1).is_some_and(|t| t.is_punct("<")) {
            return Err(QueryError::UnsupportedFeature {
                name: "quoted triple".into(),
            });
        }
        self.var_or_term()
    }

    fn property_list(
        &mut self,
        subject: &VarOrTerm,
        context: Context,
        out: &mut Vec<PatternElement>,
    ) -> Result<(), QueryError> {
        loop {
            let predicate = self.verb()?;
            loop {
                let object = self.object(context, out)?;
                out.push(PatternElement::Triple(
                    TriplePattern::new(subject.clone(), predicate.clone(), object)
                        .in_context(context),
                ));
                if !self.eat_punct(",") {
                    break;
                }
            }
            if !self.at_punct(";") {
                return Ok(());
            }
            while self.eat_punct(";") {}
            if self.at_punct(".") || self.at_punct("}") || self.at_punct("]") {
                return Ok(());
            }
        }
    }

    fn verb(&mut self) -> Result<VarOrTerm, QueryError> {
        if let Some(t) = self.peek() {
            if t.is_punct("^") || t.is_punct("!") || t.is_punct("(") {
                return Err(property_path());
            }
        }
        let predicate = if self.at_word("a") {
            self.pos += 1;
            VarOrTerm::iri(vocab::RDF_TYPE)
        } else {
            let p = self.var_or_term()?;
            if let VarOrTerm::Term(t) = &p {
                if !t.is_iri() {
                    return Err(self.error("predicate must be an IRI or variable"));
                }
            }
            p
        };
        if let Some(t) = self.peek() {
            if ["/", "|", "*", "+", "?"].iter().any(|p| t.is_punct(p)) {
                return Err(property_path());
            }
        }
        Ok(predicate)
    }

    fn object(
        &mut self,
        context: Context,
        out: &mut Vec<PatternElement>,
    ) -> Result<VarOrTerm, QueryError> {
        if self.at_punct("[") {
            return self.blank_property_list(context, out);
        }
        self.subject_term()
    }

    fn fresh_blank(&mut self) -> VarOrTerm {
        loop {
            let label = format!("b{}", self.next_blank);
            self.next_blank += 1;
            if !self.used_blank_labels.contains(&label) {
                return VarOrTerm::Term(Term::blank(label));
            }
        }
    }

    fn blank_property_list(
        &mut self,
        context: Context,
        out: &mut Vec<PatternElement>,
    ) -> Result<VarOrTerm, QueryError> {
        self.expect_punct("[")?;
        let node = self.fresh_blank();
        if self.eat_punct("]") {
            return Ok(node);
        }
        self.property_list(&node, context, out)?;
        self.expect_punct("]")?;
        Ok(node)
    }

    fn var_or_iri(&mut self) -> Result<VarOrTerm, QueryError> {
        let t = self.var_or_term()?;
        match &t {
            VarOrTerm::Term(term) if !term.is_iri() => Err(self.error("expected IRI or variable")),
            _ => Ok(t),
        }
    }

    fn var_or_term(&mut self) -> Result<VarOrTerm, QueryError> {
        let Some(token) = self.next() else {
            return Err(self.error("unexpected end of query"));
        };
        let term = match token.tok {
            Tok::Var(v) => return Ok(VarOrTerm::Var(v)),
            Tok::Iri(iri) => Term::iri(self.resolve(&iri)?),
            Tok::Prefixed { prefix, local } => Term::iri(self.expand(&prefix, &local)?),
            Tok::Blank(label) => Term::blank(label),
            Tok::Str(lexical) => self.literal_suffix(lexical)?,
            Tok::Number { text, datatype } => Term::literal(Literal::typed(text, datatype)),
            Tok::Punct(sign @ ("+" | "-")) => match self.next().map(|t| t.tok) {
                Some(Tok::Number { text, datatype }) => {
                    let text = if sign == "-" {
                        format!("-{text}")
                    } else {
                        format!("+{text}")
                    };
                    Term::literal(Literal::typed(text, datatype))
                }
                _ => return Err(self.error("expected number after sign")),
            },
            Tok::Word(w) if w == "true" || w == "false" => {
                Term::literal(Literal::typed(w, vocab::XSD_BOOLEAN))
            }
            Tok::Punct("[") if self.at_punct("]") => {
                self.pos += 1;
                return Ok(self.fresh_blank());
            }
            _ => {
                self.pos -= 1;
                return Err(self.error("expected a term or variable"));
            }
        };
        Ok(VarOrTerm::Term(term))
    }

    fn literal_suffix(&mut self, lexical: String) -> Result<Term, QueryError> {
        if let Some(Tok::LangTag(tag)) = self.peek().map(|t| &t.tok) {
            let tag = tag.clone();
            self.pos += 1;
            return Ok(Term::literal(Literal::lang(lexical, tag)));
        }
        if self.eat_punct("^^") {
            let dt = match self.next().map(|t| t.tok) {
                Some(Tok::Iri(iri)) => self.resolve(&iri)?,
                Some(Tok::Prefixed { prefix, local }) => self.expand(&prefix, &local)?,
                _ => return Err(self.error("expected datatype IRI")),
            };
            return Ok(Term::literal(Literal::typed(lexical, dt)));
        }
        Ok(Term::literal(Literal::plain(lexical)))
    }
}

fn property_path() -> QueryError {
    QueryError::UnsupportedFeature {
        name: "property path".into(),
    }
}
