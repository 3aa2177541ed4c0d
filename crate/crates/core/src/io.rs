//! Text formats: ensemble model files, fact bases, example sets and
//! decision lists.
//!
//! All formats share one token language: `%` starts a line comment,
//! unquoted names beginning with a lowercase letter or `_` are variables,
//! names beginning with an uppercase letter or digit are constants, and
//! `"quoted"` strings (with `\"` and `\\` escapes) are constants too.
//! Floats are written in the shortest form that parses back to the same
//! value, so every file round-trips bit-exactly.

use std::collections::HashSet;

use crate::compress::CompressionMode;
use crate::error::{Error, Result};
use crate::logic::{
    apply_substitution, validate_head, Atom, Clause, CombineMode, DecisionList, SignatureTable,
    Term,
};
use crate::tree::{TildeTree, TreeNode};

/// A parsed ensemble: target template, combination mode and the trees.
#[derive(Debug, Clone)]
pub struct Model {
    pub target: Atom,
    pub combine: CombineMode,
    pub trees: Vec<TildeTree>,
}

// ---------------------------------------------------------------------------
// Lexer
// ---------------------------------------------------------------------------

#[derive(Debug, Clone, PartialEq)]
enum Tok {
    Ident(String),
    Quoted(String),
    Number(String),
    LParen,
    RParen,
    LBrace,
    RBrace,
    Comma,
    Dot,
    Colon,
    ColonDash,
    And,
}

impl Tok {
    fn describe(&self) -> String {
        match self {
            Tok::Ident(s) => format!("`{s}`"),
            Tok::Quoted(s) => format!("\"{s}\""),
            Tok::Number(s) => format!("number `{s}`"),
            Tok::LParen => "`(`".to_string(),
            Tok::RParen => "`)`".to_string(),
            Tok::LBrace => "`{`".to_string(),
            Tok::RBrace => "`}`".to_string(),
            Tok::Comma => "`,`".to_string(),
            Tok::Dot => "`.`".to_string(),
            Tok::Colon => "`:`".to_string(),
            Tok::ColonDash => "`:-`".to_string(),
            Tok::And => "`∧`".to_string(),
        }
    }
}

#[derive(Debug, Clone)]
struct Lexeme {
    tok: Tok,
    line: u32,
    col: u32,
}

fn is_ident_start(c: char) -> bool {
    c.is_alphanumeric() || c == '_'
}

fn is_ident_continue(c: char) -> bool {
    c.is_alphanumeric() || c == '_'
}

struct Lexer<'a> {
    chars: std::iter::Peekable<std::str::Chars<'a>>,
    line: u32,
    col: u32,
}

impl<'a> Lexer<'a> {
    fn new(src: &'a str) -> Lexer<'a> {
        Lexer {
            chars: src.chars().peekable(),
            line: 1,
            col: 1,
        }
    }

    fn bump(&mut self) -> Option<char> {
        let c = self.chars.next()?;
        if c == '\n' {
            self.line += 1;
            self.col = 1;
        } else {
            self.col += 1;
        }
        Some(c)
    }

    fn peek(&mut self) -> Option<char> {
        self.chars.peek().copied()
    }

    fn err(&self, msg: impl Into<String>) -> Error {
        Error::parse(self.line, self.col, msg)
    }

    fn lex(mut self) -> Result<Vec<Lexeme>> {
        let mut out = Vec::new();
        while let Some(c) = self.peek() {
            let (line, col) = (self.line, self.col);
            match c {
                ' ' | '\t' | '\r' | '\n' => {
                    self.bump();
                }
                '%' => {
                    while let Some(c) = self.peek() {
                        if c == '\n' {
                            break;
                        }
                        self.bump();
                    }
                }
                '(' => out.push(self.punct(Tok::LParen, line, col)),
                ')' => out.push(self.punct(Tok::RParen, line, col)),
                '{' => out.push(self.punct(Tok::LBrace, line, col)),
                '}' => out.push(self.punct(Tok::RBrace, line, col)),
                ',' => out.push(self.punct(Tok::Comma, line, col)),
                '.' => out.push(self.punct(Tok::Dot, line, col)),
                '∧' => out.push(self.punct(Tok::And, line, col)),
                ':' => {
                    self.bump();
                    if self.peek() == Some('-') {
                        self.bump();
                        out.push(Lexeme {
                            tok: Tok::ColonDash,
                            line,
                            col,
                        });
                    } else {
                        out.push(Lexeme {
                            tok: Tok::Colon,
                            line,
                            col,
                        });
                    }
                }
                '"' => {
                    let s = self.lex_quoted()?;
                    out.push(Lexeme {
                        tok: Tok::Quoted(s),
                        line,
                        col,
                    });
                }
                '\\' => {
                    return Err(self.err(
                        "negated atoms are not supported; bodies are conjunctions of positive atoms",
                    ));
                }
                '!' => {
                    return Err(self.err(
                        "negated atoms are not supported; bodies are conjunctions of positive atoms",
                    ));
                }
                '-' => {
                    let tok = self.lex_number()?;
                    out.push(Lexeme { tok, line, col });
                }
                c if c.is_ascii_digit() => {
                    let tok = self.lex_number_or_constant()?;
                    out.push(Lexeme { tok, line, col });
                }
                c if is_ident_start(c) => {
                    let mut name = String::new();
                    while let Some(c) = self.peek() {
                        if is_ident_continue(c) {
                            name.push(c);
                            self.bump();
                        } else {
                            break;
                        }
                    }
                    out.push(Lexeme {
                        tok: Tok::Ident(name),
                        line,
                        col,
                    });
                }
                other => {
                    return Err(self.err(format!("unexpected character `{other}`")));
                }
            }
        }
        Ok(out)
    }

    fn punct(&mut self, tok: Tok, line: u32, col: u32) -> Lexeme {
        self.bump();
        Lexeme { tok, line, col }
    }

    fn lex_quoted(&mut self) -> Result<String> {
        self.bump(); // opening quote
        let mut s = String::new();
        loop {
            match self.bump() {
                None => return Err(self.err("unterminated string")),
                Some('\n') => return Err(self.err("unterminated string")),
                Some('"') => return Ok(s),
                Some('\\') => match self.bump() {
                    None => return Err(self.err("unterminated string")),
                    Some(c) => s.push(c),
                },
                Some(c) => s.push(c),
            }
        }
    }

    /// A `-` always introduces a number (it only appears before values).
    fn lex_number(&mut self) -> Result<Tok> {
        let mut s = String::from("-");
        self.bump();
        if !matches!(self.peek(), Some(c) if c.is_ascii_digit()) {
            return Err(self.err("expected a digit after `-`"));
        }
        self.lex_digits(&mut s);
        Ok(Tok::Number(s))
    }

    /// A digit may start a number (`0.15`, `1e-3`) or a constant (`2006a`).
    /// The `.` is part of the number only when a digit follows, so the
    /// clause-terminating dot is never swallowed.
    fn lex_number_or_constant(&mut self) -> Result<Tok> {
        let mut s = String::new();
        self.lex_digits(&mut s);
        if matches!(self.peek(), Some(c) if is_ident_continue(c)) {
            // trailing name characters: the whole token is a constant
            while let Some(c) = self.peek() {
                if is_ident_continue(c) {
                    s.push(c);
                    self.bump();
                } else {
                    break;
                }
            }
            return Ok(Tok::Ident(s));
        }
        Ok(Tok::Number(s))
    }

    fn lex_digits(&mut self, s: &mut String) {
        while let Some(c) = self.peek() {
            if c.is_ascii_digit() {
                s.push(c);
                self.bump();
            } else {
                break;
            }
        }
        if self.peek() == Some('.') {
            let mut probe = self.chars.clone();
            probe.next();
            if matches!(probe.peek(), Some(c) if c.is_ascii_digit()) {
                s.push('.');
                self.bump();
                while let Some(c) = self.peek() {
                    if c.is_ascii_digit() {
                        s.push(c);
                        self.bump();
                    } else {
                        break;
                    }
                }
            }
        }
        if matches!(self.peek(), Some('e') | Some('E')) {
            let mut probe = self.chars.clone();
            probe.next();
            let sign = matches!(probe.peek(), Some('+') | Some('-'));
            if sign {
                probe.next();
            }
            if matches!(probe.peek(), Some(c) if c.is_ascii_digit()) {
                s.push(self.bump().unwrap());
                if sign {
                    s.push(self.bump().unwrap());
                }
                while let Some(c) = self.peek() {
                    if c.is_ascii_digit() {
                        s.push(c);
                        self.bump();
                    } else {
                        break;
                    }
                }
            }
        }
    }
}

// ---------------------------------------------------------------------------
// Parser
// ---------------------------------------------------------------------------

struct Parser {
    toks: Vec<Lexeme>,
    pos: usize,
    end: (u32, u32),
}

impl Parser {
    fn new(src: &str) -> Result<Parser> {
        let toks = Lexer::new(src).lex()?;
        let end = toks
            .last()
            .map(|l| (l.line, l.col + 1))
            .unwrap_or((1, 1));
        Ok(Parser { toks, pos: 0, end })
    }

    fn peek(&self) -> Option<&Tok> {
        self.toks.get(self.pos).map(|l| &l.tok)
    }

    fn here(&self) -> (u32, u32) {
        self.toks
            .get(self.pos)
            .map(|l| (l.line, l.col))
            .unwrap_or(self.end)
    }

    fn err_here(&self, msg: impl Into<String>) -> Error {
        let (line, col) = self.here();
        Error::parse(line, col, msg)
    }

    fn next(&mut self, what: &str) -> Result<Lexeme> {
        match self.toks.get(self.pos) {
            Some(l) => {
                self.pos += 1;
                Ok(l.clone())
            }
            None => Err(self.err_here(format!("expected {what}, found end of input"))),
        }
    }

    fn expect(&mut self, tok: Tok, what: &str) -> Result<Lexeme> {
        let l = self.next(what)?;
        if l.tok == tok {
            Ok(l)
        } else {
            Err(Error::parse(
                l.line,
                l.col,
                format!("expected {what}, found {}", l.tok.describe()),
            ))
        }
    }

    fn eat(&mut self, tok: &Tok) -> bool {
        if self.peek() == Some(tok) {
            self.pos += 1;
            true
        } else {
            false
        }
    }

    fn at_end(&self) -> bool {
        self.pos >= self.toks.len()
    }

    fn keyword(&mut self, kw: &str) -> Result<()> {
        let l = self.next(&format!("`{kw}`"))?;
        match &l.tok {
            Tok::Ident(s) if s == kw => Ok(()),
            other => Err(Error::parse(
                l.line,
                l.col,
                format!("expected `{kw}`, found {}", other.describe()),
            )),
        }
    }

    fn term(&mut self) -> Result<Term> {
        let l = self.next("a term")?;
        match l.tok {
            Tok::Ident(name) => {
                if self.peek() == Some(&Tok::LParen) {
                    return Err(Error::parse(
                        l.line,
                        l.col,
                        format!("function symbols are not supported: `{name}(...)` in argument position"),
                    ));
                }
                let first = name.chars().next().unwrap();
                if first.is_lowercase() || first == '_' {
                    Ok(Term::var(name))
                } else {
                    Ok(Term::constant(name))
                }
            }
            Tok::Quoted(s) => Ok(Term::constant(s)),
            Tok::Number(s) => Ok(Term::constant(s)),
            other => Err(Error::parse(
                l.line,
                l.col,
                format!("expected a term, found {}", other.describe()),
            )),
        }
    }

    fn atom(&mut self) -> Result<Atom> {
        let l = self.next("an atom")?;
        let name = match &l.tok {
            Tok::Ident(s) => s.clone(),
            Tok::Quoted(s) => s.clone(),
            other => {
                return Err(Error::parse(
                    l.line,
                    l.col,
                    format!("expected a predicate name, found {}", other.describe()),
                ))
            }
        };
        if name == "not" && self.peek() == Some(&Tok::LParen) {
            return Err(Error::parse(
                l.line,
                l.col,
                "negated atoms are not supported; bodies are conjunctions of positive atoms",
            ));
        }
        let mut args = Vec::new();
        if self.eat(&Tok::LParen) {
            if !self.eat(&Tok::RParen) {
                loop {
                    args.push(self.term()?);
                    if self.eat(&Tok::RParen) {
                        break;
                    }
                    self.expect(Tok::Comma, "`,` or `)`")?;
                }
            }
        }
        Ok(Atom::new(name, args))
    }

    fn number(&mut self, what: &str) -> Result<(f64, u32, u32)> {
        let l = self.next(what)?;
        match &l.tok {
            Tok::Number(s) => {
                let v: f64 = s.parse().map_err(|_| {
                    Error::parse(l.line, l.col, format!("invalid number `{s}`"))
                })?;
                if !v.is_finite() {
                    return Err(Error::parse(
                        l.line,
                        l.col,
                        format!("number `{s}` does not fit a finite value"),
                    ));
                }
                Ok((v, l.line, l.col))
            }
            other => Err(Error::parse(
                l.line,
                l.col,
                format!("expected {what}, found {}", other.describe()),
            )),
        }
    }
}

// ---------------------------------------------------------------------------
// Model files
// ---------------------------------------------------------------------------

/// Parse an ensemble model: a `target:` line, a `combine:` line, then one
/// `tree { ... }` block per tree.  Leaves are indexed depth-first with the
/// `yes` branch first, matching the rule order of the tree's decision list.
pub fn parse_model(src: &str) -> Result<Model> {
    let mut p = Parser::new(src)?;
    let mut signatures = SignatureTable::default();

    p.keyword("target")?;
    p.expect(Tok::Colon, "`:` after `target`")?;
    let (line, col) = p.here();
    let target = p.atom()?;
    p.expect(Tok::Dot, "`.` after the target atom")?;
    validate_head(&target).map_err(|_| {
        Error::parse(
            line,
            col,
            "target arguments must be distinct variables",
        )
    })?;
    register(&mut signatures, &target, line, col)?;

    p.keyword("combine")?;
    p.expect(Tok::Colon, "`:` after `combine`")?;
    let l = p.next("`sum` or `average`")?;
    let combine = match &l.tok {
        Tok::Ident(s) => CombineMode::from_str(s).ok_or_else(|| {
            Error::parse(
                l.line,
                l.col,
                format!("unknown combination mode `{s}` (expected `sum` or `average`)"),
            )
        })?,
        other => {
            return Err(Error::parse(
                l.line,
                l.col,
                format!("expected `sum` or `average`, found {}", other.describe()),
            ))
        }
    };
    p.expect(Tok::Dot, "`.` after the combination mode")?;

    let mut trees = Vec::new();
    while !p.at_end() {
        p.keyword("tree")?;
        p.expect(Tok::LBrace, "`{` after `tree`")?;
        let root = parse_node(&mut p, &mut signatures)?;
        p.expect(Tok::RBrace, "`}` closing the tree")?;
        trees.push(TildeTree::from_unindexed(root).map_err(Error::from)?);
    }
    if trees.is_empty() {
        return Err(p.err_here("model contains no trees"));
    }
    Ok(Model {
        target,
        combine,
        trees,
    })
}

fn register(signatures: &mut SignatureTable, atom: &Atom, line: u32, col: u32) -> Result<()> {
    if let Err(known) = signatures.register(atom.predicate(), atom.arity()) {
        return Err(Error::parse(
            line,
            col,
            format!(
                "predicate `{}` used with arity {} but previously with arity {known}",
                atom.predicate(),
                atom.arity()
            ),
        ));
    }
    Ok(())
}

fn parse_node(p: &mut Parser, signatures: &mut SignatureTable) -> Result<TreeNode> {
    let l = p.next("`node` or `leaf`")?;
    match &l.tok {
        Tok::Ident(s) if s == "leaf" => {
            let (value, _, _) = p.number("a leaf value")?;
            Ok(TreeNode::Leaf {
                value,
                leaf_index: 0,
            })
        }
        Tok::Ident(s) if s == "node" => {
            let mut tests = Vec::new();
            loop {
                let (line, col) = p.here();
                let atom = p.atom()?;
                register(signatures, &atom, line, col)?;
                tests.push(atom);
                if !p.eat(&Tok::Comma) {
                    break;
                }
            }
            p.expect(Tok::LBrace, "`{` after the node's atoms")?;
            p.keyword("yes")?;
            p.expect(Tok::Colon, "`:` after `yes`")?;
            let yes = parse_node(p, signatures)?;
            p.keyword("no")?;
            p.expect(Tok::Colon, "`:` after `no`")?;
            let no = parse_node(p, signatures)?;
            p.expect(Tok::RBrace, "`}` closing the node")?;
            Ok(TreeNode::Inner {
                tests,
                yes: Box::new(yes),
                no: Box::new(no),
            })
        }
        other => Err(Error::parse(
            l.line,
            l.col,
            format!("expected `node` or `leaf`, found {}", other.describe()),
        )),
    }
}

/// Render a model in the same format `parse_model` reads.
pub fn write_model(model: &Model) -> String {
    let mut out = String::new();
    out.push_str(&format!("target: {}.\n", model.target));
    out.push_str(&format!("combine: {}.\n", model.combine.as_str()));
    for tree in &model.trees {
        out.push_str("tree {\n");
        write_node(&mut out, tree.root(), 1);
        out.push_str("}\n");
    }
    out
}

fn write_node(out: &mut String, node: &TreeNode, depth: usize) {
    let pad = "  ".repeat(depth);
    match node {
        TreeNode::Leaf { value, .. } => {
            out.push_str(&format!("{pad}leaf {value:?}\n"));
        }
        TreeNode::Inner { tests, yes, no } => {
            let atoms: Vec<String> = tests.iter().map(|a| a.to_string()).collect();
            out.push_str(&format!("{pad}node {} {{\n", atoms.join(", ")));
            out.push_str(&format!("{pad}  yes:\n"));
            write_node(out, yes, depth + 2);
            out.push_str(&format!("{pad}  no:\n"));
            write_node(out, no, depth + 2);
            out.push_str(&format!("{pad}}}\n"));
        }
    }
}

// ---------------------------------------------------------------------------
// Fact and example files
// ---------------------------------------------------------------------------

/// Parse a fact base: ground atoms, each optionally closed by `.`.
/// Duplicates collapse silently; first occurrence order is kept.
pub fn parse_facts(src: &str) -> Result<Vec<Atom>> {
    let mut p = Parser::new(src)?;
    let mut seen = HashSet::new();
    let mut facts = Vec::new();
    while !p.at_end() {
        let (line, col) = p.here();
        let atom = p.atom()?;
        if !atom.is_ground() {
            return Err(Error::parse(
                line,
                col,
                format!("facts must be ground, but `{atom}` contains a variable"),
            ));
        }
        p.eat(&Tok::Dot);
        if seen.insert(atom.clone()) {
            facts.push(atom);
        }
    }
    Ok(facts)
}

/// Parse labelled examples: ground atoms, each optionally closed by `.`.
/// Duplicates collapse with a warning; order of first occurrence is kept.
pub fn parse_examples(src: &str) -> Result<(Vec<Atom>, Vec<String>)> {
    let mut p = Parser::new(src)?;
    let mut seen = HashSet::new();
    let mut atoms = Vec::new();
    let mut warnings = Vec::new();
    while !p.at_end() {
        let (line, col) = p.here();
        let atom = p.atom()?;
        if !atom.is_ground() {
            return Err(Error::parse(
                line,
                col,
                format!("examples must be ground, but `{atom}` contains a variable"),
            ));
        }
        p.eat(&Tok::Dot);
        if seen.insert(atom.clone()) {
            atoms.push(atom);
        } else {
            warnings.push(format!("{line}:{col}: duplicate example `{atom}` ignored"));
        }
    }
    Ok((atoms, warnings))
}

/// Render atoms one per line, each closed by `.`.
pub fn write_facts(atoms: &[Atom]) -> String {
    let mut out = String::new();
    for a in atoms {
        out.push_str(&format!("{a}.\n"));
    }
    out
}

// ---------------------------------------------------------------------------
// Decision list files
// ---------------------------------------------------------------------------

/// Render a decision list.  Header comments record the combination mode,
/// tree count and summary statistics; each rule is
/// `value: Head :- Atom, Atom.` with `:- .` for the final empty body.
/// Values print in shortest-round-trip form, so reading the file back
/// reproduces them bit for bit.
pub fn write_list(list: &DecisionList, mode: Option<CompressionMode>) -> String {
    let mut out = String::new();
    out.push_str(&format!("% combine: {}\n", list.combine().as_str()));
    out.push_str(&format!("% trees: {}\n", list.tree_count()));
    if let Some(mode) = mode {
        out.push_str(&format!("% mode: {}\n", mode.as_str()));
    }
    out.push_str(&format!("% rules: {}\n", list.rules().len()));
    out.push_str(&format!("% avg_body_len: {:?}\n", list.avg_body_len()));
    for rule in list.rules() {
        out.push_str(&write_rule(rule));
        out.push('\n');
    }
    out
}

fn write_rule(rule: &Clause) -> String {
    let body = if rule.body().is_empty() {
        String::new()
    } else {
        let atoms: Vec<String> = rule.body().iter().map(|a| a.to_string()).collect();
        atoms.join(", ")
    };
    if body.is_empty() {
        format!("{:?}: {} :- .", rule.value(), rule.head())
    } else {
        format!("{:?}: {} :- {}.", rule.value(), rule.head(), body)
    }
}

/// Parse a decision list.  Rule heads are normalized to the first rule's
/// variable names (renaming clashing body variables out of the way first),
/// bodies accept `,` or `∧` separators, and the list must end with an
/// empty-body rule so that prediction is total.
pub fn parse_list(src: &str) -> Result<(DecisionList, Option<CompressionMode>)> {
    let mut combine = CombineMode::Sum;
    let mut tree_count: usize = 1;
    let mut mode = None;
    for line in src.lines() {
        let trimmed = line.trim_start();
        let Some(rest) = trimmed.strip_prefix('%') else {
            continue;
        };
        let rest = rest.trim().trim_end_matches('.');
        if let Some(v) = rest.strip_prefix("combine:") {
            if let Some(m) = CombineMode::from_str(v.trim()) {
                combine = m;
            }
        } else if let Some(v) = rest.strip_prefix("trees:") {
            if let Ok(n) = v.trim().parse::<usize>() {
                if n >= 1 {
                    tree_count = n;
                }
            }
        } else if let Some(v) = rest.strip_prefix("mode:") {
            mode = CompressionMode::from_str(v.trim());
        }
    }

    let mut p = Parser::new(src)?;
    let mut rules: Vec<Clause> = Vec::new();
    let mut target: Option<Atom> = None;
    while !p.at_end() {
        let (value, vline, vcol) = p.number("a rule value")?;
        p.expect(Tok::Colon, "`:` after the rule value")?;
        let (hline, hcol) = p.here();
        let head = p.atom()?;
        validate_head(&head).map_err(|_| {
            Error::parse(hline, hcol, "rule head arguments must be distinct variables")
        })?;
        p.expect(Tok::ColonDash, "`:-` after the rule head")?;
        let mut body = Vec::new();
        if !p.eat(&Tok::Dot) {
            loop {
                body.push(p.atom()?);
                if p.eat(&Tok::Dot) {
                    break;
                }
                if !(p.eat(&Tok::Comma) || p.eat(&Tok::And)) {
                    return Err(p.err_here("expected `,`, `∧` or `.` after a body atom"));
                }
            }
        }
        let head = match &target {
            None => {
                target = Some(head.clone());
                head
            }
            Some(t) => {
                if t.predicate() != head.predicate() || t.arity() != head.arity() {
                    return Err(Error::parse(
                        hline,
                        hcol,
                        format!(
                            "rule head `{}` does not match the list's target `{}`",
                            head, t
                        ),
                    ));
                }
                normalize_head(t, &head, &mut body);
                t.clone()
            }
        };
        let clause = Clause::new(head, body, value, Vec::new()).map_err(|_| {
            Error::parse(vline, vcol, format!("rule value {value} is not finite"))
        })?;
        rules.push(clause);
    }
    if rules.is_empty() {
        return Err(p.err_here("decision list contains no rules"));
    }
    if !rules.last().unwrap().body().is_empty() {
        return Err(p.err_here(
            "decision list must end with an empty-body rule so prediction is total",
        ));
    }
    let head = rules[0].head().clone();
    let list = DecisionList::new(head, rules, combine, tree_count)?;
    Ok((list, mode))
}

/// Rename this rule's head variables to the target's, steering clashing
/// body variables out of the way first so the renaming cannot capture.
fn normalize_head(target: &Atom, head: &Atom, body: &mut [Atom]) {
    let head_vars: Vec<&str> = head.variables().collect();
    let target_vars: Vec<&str> = target.variables().collect();
    if head_vars == target_vars {
        return;
    }
    let body_vars: HashSet<String> = body
        .iter()
        .flat_map(|a| a.variables())
        .map(String::from)
        .collect();
    let mut taken: HashSet<String> = body_vars.clone();
    taken.extend(head_vars.iter().map(|s| s.to_string()));
    taken.extend(target_vars.iter().map(|s| s.to_string()));

    let mut subst: std::collections::HashMap<String, Term> = std::collections::HashMap::new();
    for (h, t) in head_vars.iter().zip(&target_vars) {
        if h != t {
            subst.insert(h.to_string(), Term::var(*t));
        }
    }
    // an existential body variable that happens to share an incoming
    // target name would be captured: move it to a fresh name (head
    // variables are safe — the simultaneous head renaming moves them)
    for tv in &target_vars {
        if !body_vars.contains(*tv) || head_vars.contains(tv) {
            continue;
        }
        let mut fresh = format!("{tv}_r");
        while taken.contains(&fresh) {
            fresh.push('r');
        }
        taken.insert(fresh.clone());
        subst.insert(tv.to_string(), Term::var(fresh));
    }
    if subst.is_empty() {
        return;
    }
    let renamed = apply_substitution(body, &subst);
    body.clone_from_slice(&renamed);
}

#[cfg(test)]
mod tests {
    use super::*;

    const MODEL: &str = "\
% a two-tree advising model
target: AdvisedBy(a, b).
combine: sum.
tree {
  node Professor(b), Publication(c, a) {
    yes: node Publication(c, b) {
      yes: leaf 1.0
      no: leaf 2.0
    }
    no: leaf 5.0
  }
}
tree {
  node TaughtBy(f, b, d) {
    yes: leaf 10.0
    no: leaf 50.0
  }
}
";

    #[test]
    fn model_parses_and_round_trips() {
        let model = parse_model(MODEL).unwrap();
        assert_eq!(model.target.to_string(), "AdvisedBy(a,b)");
        assert_eq!(model.combine, CombineMode::Sum);
        assert_eq!(model.trees.len(), 2);
        assert_eq!(model.trees[0].path_count(), 3);
        let text = write_model(&model);
        let again = parse_model(&text).unwrap();
        assert_eq!(write_model(&again), text);
    }

    #[test]
    fn model_rejects_arity_conflicts() {
        let bad = "target: P(a).\ncombine: sum.\ntree { node Q(a), Q(a, b) { yes: leaf 1.0 no: leaf 2.0 } }";
        let err = parse_model(bad).unwrap_err().to_string();
        assert!(err.contains("arity"), "{err}");
    }

    #[test]
    fn model_rejects_negation_and_function_symbols() {
        let neg = "target: P(a).\ncombine: sum.\ntree { node \\+Q(a) { yes: leaf 1.0 no: leaf 2.0 } }";
        assert!(parse_model(neg).unwrap_err().to_string().contains("negated"));
        let not = "target: P(a).\ncombine: sum.\ntree { node not(Q(a)) { yes: leaf 1.0 no: leaf 2.0 } }";
        assert!(parse_model(not).unwrap_err().to_string().contains("negated"));
        let fun = "target: P(a).\ncombine: sum.\ntree { node Q(f(a)) { yes: leaf 1.0 no: leaf 2.0 } }";
        assert!(parse_model(fun)
            .unwrap_err()
            .to_string()
            .contains("function symbols"));
    }

    #[test]
    fn model_rejects_nondistinct_target() {
        let bad = "target: P(a, a).\ncombine: sum.\ntree { leaf 1.0 }";
        assert!(parse_model(bad)
            .unwrap_err()
            .to_string()
            .contains("distinct variables"));
    }

    #[test]
    fn facts_parse_ground_atoms_and_dedup() {
        let src = "Professor(P1).\nPublication(C1, S1)\nProfessor(P1).\n% comment\nCourse(\"intro to logic\").";
        let facts = parse_facts(src).unwrap();
        assert_eq!(facts.len(), 3);
        assert_eq!(facts[2].to_string(), "Course(\"intro to logic\")");
        let err = parse_facts("Professor(x).").unwrap_err().to_string();
        assert!(err.contains("ground"), "{err}");
    }

    #[test]
    fn examples_warn_on_duplicates() {
        let (atoms, warnings) = parse_examples("P(A). P(B). P(A).").unwrap();
        assert_eq!(atoms.len(), 2);
        assert_eq!(warnings.len(), 1);
        assert!(warnings[0].contains("duplicate"));
    }

    #[test]
    fn numeric_and_quoted_constants_survive_round_trips() {
        let facts = parse_facts("YearsInProgram(S1, 6). Label(S1, \"year 6\").").unwrap();
        let text = write_facts(&facts);
        let again = parse_facts(&text).unwrap();
        assert_eq!(facts, again);
    }

    #[test]
    fn list_round_trips_bit_exactly() {
        let src = "\
% combine: average
% trees: 2
% mode: scote
0.30000000000000004: AdvisedBy(a,b) :- Professor(b), Publication(c,a).
-1.5: AdvisedBy(a,b) :- TaughtBy(f,b,d) ∧ Ta(f,a,d).
0.8: AdvisedBy(a,b) :- .
";
        let (list, mode) = parse_list(src).unwrap();
        assert_eq!(mode, Some(CompressionMode::Scote));
        assert_eq!(list.combine(), CombineMode::Average);
        assert_eq!(list.tree_count(), 2);
        assert_eq!(list.rules()[0].value(), 0.30000000000000004);
        let text = write_list(&list, mode);
        let (again, mode2) = parse_list(&text).unwrap();
        assert_eq!(mode2, mode);
        assert_eq!(write_list(&again, mode2), text);
    }

    #[test]
    fn list_heads_normalize_to_the_first_rule() {
        let src = "\
1.0: P(a, b) :- Q(a, c).
2.0: P(x, y) :- R(y, a).
3.0: P(a, b) :- .
";
        let (list, _) = parse_list(src).unwrap();
        // second rule: head (x,y) -> (a,b); its body var `a` clashes with
        // the new head name and must have been moved aside
        let body = list.rules()[1].body();
        assert_eq!(body[0].predicate(), "R");
        assert_eq!(body[0].args()[0], Term::var("b"));
        assert_ne!(body[0].args()[1], Term::var("a"));
        for rule in list.rules() {
            assert_eq!(rule.head(), list.head());
        }
    }

    #[test]
    fn list_requires_final_empty_body() {
        let src = "1.0: P(a) :- Q(a).\n";
        assert!(parse_list(src)
            .unwrap_err()
            .to_string()
            .contains("empty-body"));
    }

    #[test]
    fn dot_after_digits_is_not_swallowed() {
        let facts = parse_facts("Year(2006).").unwrap();
        assert_eq!(facts[0].to_string(), "Year(2006)");
        let (atoms, _) = parse_examples("P(5).").unwrap();
        assert_eq!(atoms[0].args()[0], Term::constant("5"));
    }
}
