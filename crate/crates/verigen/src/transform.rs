//! Source-to-source rewrite of a stdin/stdout `main` into a pure function.
//!
//! A single-`main` C program in the supported subset (declarations,
//! assignments, `if`/`else`, expressions, `scanf`/`printf` with numeric
//! conversions, no loops) is turned into a `void` function: every value read
//! from stdin becomes an input parameter, every value printed becomes an
//! output pointer parameter, `scanf` statements disappear, `printf` value
//! arguments become assignments through the output pointers — one per branch
//! when the print is branch-dependent — and the stdio include is dropped.
//! Anything outside the subset is rejected loudly, never skipped.

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::signature::{BaseType, Param, Signature};

/// How one I/O call maps onto a parameter.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct IoMapping {
    /// Source text of the `scanf`/`printf` call this parameter replaces.
    pub io_call: String,
    pub param_name: String,
    pub direction: IoDirection,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum IoDirection {
    In,
    Out,
}

/// Result of the rewrite.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TransformResult {
    pub function_source: String,
    pub signature: Signature,
    pub mapping: Vec<IoMapping>,
}

#[derive(Debug, Error, PartialEq, Eq)]
pub enum TransformError {
    #[error("unsupported construct at byte {position}: {reason}")]
    UnsupportedConstruct { position: usize, reason: String },
    #[error("parse error at byte {position}: {reason}")]
    Parse { position: usize, reason: String },
}

fn unsupported<T>(position: usize, reason: impl Into<String>) -> Result<T, TransformError> {
    Err(TransformError::UnsupportedConstruct {
        position,
        reason: reason.into(),
    })
}

fn parse_err<T>(position: usize, reason: impl Into<String>) -> Result<T, TransformError> {
    Err(TransformError::Parse {
        position,
        reason: reason.into(),
    })
}

// ---------------------------------------------------------------- lexing

#[derive(Debug, Clone, PartialEq)]
enum TokKind {
    Ident,
    Num,
    Str,
    Punct(char),
}

#[derive(Debug, Clone)]
struct Tok {
    kind: TokKind,
    start: usize,
    end: usize,
}

struct Lexed<'a> {
    src: &'a str,
    toks: Vec<Tok>,
}

impl<'a> Lexed<'a> {
    fn text(&self, t: &Tok) -> &'a str {
        &self.src[t.start..t.end]
    }

    fn span_text(&self, from: usize, to: usize) -> &'a str {
        if from >= to || from >= self.toks.len() {
            return "";
        }
        let start = self.toks[from].start;
        let end = self.toks[to - 1].end;
        &self.src[start..end]
    }
}

fn lex(src: &str) -> Result<Vec<Tok>, TransformError> {
    let bytes = src.as_bytes();
    let mut toks = Vec::new();
    let mut i = 0;
    while i < bytes.len() {
        let c = bytes[i] as char;
        if c.is_whitespace() {
            i += 1;
            continue;
        }
        if c == '/' && i + 1 < bytes.len() {
            match bytes[i + 1] {
                b'/' => {
                    while i < bytes.len() && bytes[i] != b'\n' {
                        i += 1;
                    }
                    continue;
                }
                b'*' => {
                    let start = i;
                    i += 2;
                    loop {
                        if i + 1 >= bytes.len() {
                            return parse_err(start, "unterminated block comment");
                        }
                        if bytes[i] == b'*' && bytes[i + 1] == b'/' {
                            i += 2;
                            break;
                        }
                        i += 1;
                    }
                    continue;
                }
                _ => {}
            }
        }
        if c.is_ascii_alphabetic() || c == '_' {
            let start = i;
            while i < bytes.len() && ((bytes[i] as char).is_ascii_alphanumeric() || bytes[i] == b'_')
            {
                i += 1;
            }
            toks.push(Tok {
                kind: TokKind::Ident,
                start,
                end: i,
            });
            continue;
        }
        if c.is_ascii_digit() || (c == '.' && i + 1 < bytes.len() && (bytes[i + 1] as char).is_ascii_digit()) {
            let start = i;
            while i < bytes.len() {
                let d = bytes[i] as char;
                let exp_sign = (d == '+' || d == '-')
                    && i > start
                    && matches!(bytes[i - 1], b'e' | b'E');
                if d.is_ascii_alphanumeric() || d == '.' || exp_sign {
                    i += 1;
                } else {
                    break;
                }
            }
            toks.push(Tok {
                kind: TokKind::Num,
                start,
                end: i,
            });
            continue;
        }
        if c == '"' || c == '\'' {
            let quote = bytes[i];
            let start = i;
            i += 1;
            while i < bytes.len() && bytes[i] != quote {
                if bytes[i] == b'\\' {
                    i += 1;
                }
                i += 1;
            }
            if i >= bytes.len() {
                return parse_err(start, "unterminated literal");
            }
            i += 1;
            toks.push(Tok {
                kind: TokKind::Str,
                start,
                end: i,
            });
            continue;
        }
        toks.push(Tok {
            kind: TokKind::Punct(c),
            start: i,
            end: i + 1,
        });
        i += 1;
    }
    Ok(toks)
}

// ------------------------------------------------------------ statements

#[derive(Debug, Clone)]
struct Declarator {
    name: String,
    init: Option<String>,
}

#[derive(Debug, Clone)]
enum Stmt {
    Decl {
        ty: BaseType,
        declarators: Vec<Declarator>,
    },
    Scanf {
        targets: Vec<String>,
        conversions: Vec<BaseType>,
        call_text: String,
        position: usize,
    },
    Printf {
        value_args: Vec<String>,
        conversions: Vec<BaseType>,
        call_text: String,
        position: usize,
        /// Output slot of the first printed value; filled by slot layout.
        slot_start: usize,
    },
    If {
        cond: String,
        then_branch: Box<Stmt>,
        else_branch: Option<Box<Stmt>>,
    },
    Block(Vec<Stmt>),
    Return,
    Other(String),
}

struct Parser<'a> {
    lx: Lexed<'a>,
    pos: usize,
}

const LOOP_KEYWORDS: &[&str] = &["for", "while", "do", "switch", "goto"];

impl<'a> Parser<'a> {
    fn peek(&self) -> Option<&Tok> {
        self.lx.toks.get(self.pos)
    }

    fn peek_text(&self) -> Option<&'a str> {
        self.peek().map(|t| self.lx.text(t))
    }

    fn here(&self) -> usize {
        self.peek().map(|t| t.start).unwrap_or(self.lx.src.len())
    }

    fn bump(&mut self) -> Option<Tok> {
        let t = self.lx.toks.get(self.pos).cloned();
        if t.is_some() {
            self.pos += 1;
        }
        t
    }

    fn eat_punct(&mut self, c: char) -> Result<(), TransformError> {
        match self.peek() {
            Some(t) if t.kind == TokKind::Punct(c) => {
                self.pos += 1;
                Ok(())
            }
            _ => parse_err(self.here(), format!("expected `{c}`")),
        }
    }

    fn at_punct(&self, c: char) -> bool {
        matches!(self.peek(), Some(t) if t.kind == TokKind::Punct(c))
    }

    fn eat_ident(&mut self, word: &str) -> Result<(), TransformError> {
        match self.peek() {
            Some(t) if t.kind == TokKind::Ident && self.lx.text(t) == word => {
                self.pos += 1;
                Ok(())
            }
            _ => parse_err(self.here(), format!("expected `{word}`")),
        }
    }

    /// Consume tokens up to (not including) a depth-0 occurrence of one of
    /// `stops`; returns the covered token range.
    fn consume_until(&mut self, stops: &[char]) -> Result<(usize, usize), TransformError> {
        let from = self.pos;
        let mut depth = 0usize;
        loop {
            let Some(t) = self.peek() else {
                return parse_err(self.here(), "unexpected end of input");
            };
            if let TokKind::Punct(c) = t.kind {
                if depth == 0 && stops.contains(&c) {
                    return Ok((from, self.pos));
                }
                match c {
                    '(' | '[' => depth += 1,
                    ')' | ']' => {
                        if depth == 0 {
                            return parse_err(t.start, "unbalanced bracket");
                        }
                        depth -= 1;
                    }
                    _ => {}
                }
            }
            self.pos += 1;
        }
    }

    fn try_type(&mut self) -> Option<BaseType> {
        let word = |k: usize| {
            self.lx
                .toks
                .get(k)
                .filter(|t| t.kind == TokKind::Ident)
                .map(|t| self.lx.text(t))
        };
        let mut j = self.pos;
        let unsigned = match word(j) {
            Some("unsigned") => {
                j += 1;
                true
            }
            Some("signed") => {
                j += 1;
                false
            }
            _ => false,
        };
        let base = match word(j) {
            Some("int") => {
                j += 1;
                if unsigned {
                    BaseType::UnsignedInt
                } else {
                    BaseType::Int
                }
            }
            Some("long") => {
                j += 1;
                let longs = if word(j) == Some("long") {
                    j += 1;
                    2
                } else {
                    1
                };
                if word(j) == Some("int") {
                    j += 1;
                }
                match (longs, unsigned) {
                    (1, false) => BaseType::Long,
                    (1, true) => BaseType::UnsignedLong,
                    (_, false) => BaseType::LongLong,
                    (_, true) => BaseType::UnsignedLongLong,
                }
            }
            Some("float") if !unsigned => {
                j += 1;
                BaseType::Float
            }
            Some("double") if !unsigned => {
                j += 1;
                BaseType::Double
            }
            _ if unsigned => BaseType::UnsignedInt,
            _ => return None,
        };
        self.pos = j;
        Some(base)
    }

    fn parse_stmt(&mut self) -> Result<Stmt, TransformError> {
        let Some(t) = self.peek() else {
            return parse_err(self.here(), "unexpected end of input");
        };
        let at = t.start;

        if t.kind == TokKind::Punct('{') {
            return self.parse_block();
        }
        if t.kind == TokKind::Punct(';') {
            self.pos += 1;
            return Ok(Stmt::Other(String::new()));
        }

        if t.kind == TokKind::Ident {
            let word = self.lx.text(t);
            if LOOP_KEYWORDS.contains(&word) {
                return unsupported(at, format!("`{word}` statement"));
            }
            match word {
                "if" => return self.parse_if(),
                "return" => {
                    self.pos += 1;
                    self.consume_until(&[';'])?;
                    self.eat_punct(';')?;
                    return Ok(Stmt::Return);
                }
                "scanf" => return self.parse_scanf(),
                "printf" => return self.parse_printf(),
                _ => {}
            }
            if matches!(
                word,
                "int" | "long" | "unsigned" | "signed" | "float" | "double"
            ) {
                return self.parse_decl();
            }
            if matches!(word, "char" | "void" | "struct" | "static" | "const") {
                return unsupported(at, format!("`{word}` declaration"));
            }
        }

        // plain expression/assignment statement, passed through verbatim
        let (from, to) = self.consume_until(&[';'])?;
        self.eat_punct(';')?;
        let text = self.lx.span_text(from, to).to_string();
        for banned in ["scanf", "printf"] {
            if text.contains(banned) {
                return unsupported(at, format!("`{banned}` outside statement position"));
            }
        }
        Ok(Stmt::Other(normalize_stmt_text(&text)))
    }

    fn parse_block(&mut self) -> Result<Stmt, TransformError> {
        self.eat_punct('{')?;
        let mut stmts = Vec::new();
        while !self.at_punct('}') {
            if self.peek().is_none() {
                return parse_err(self.here(), "unterminated block");
            }
            stmts.push(self.parse_stmt()?);
        }
        self.eat_punct('}')?;
        Ok(Stmt::Block(stmts))
    }

    fn parse_if(&mut self) -> Result<Stmt, TransformError> {
        self.eat_ident("if")?;
        self.eat_punct('(')?;
        let (from, to) = self.consume_until(&[')'])?;
        self.eat_punct(')')?;
        let cond = normalize_stmt_text(self.lx.span_text(from, to));
        let then_branch = Box::new(self.parse_stmt()?);
        let else_branch = if self.peek_text() == Some("else") {
            self.pos += 1;
            Some(Box::new(self.parse_stmt()?))
        } else {
            None
        };
        Ok(Stmt::If {
            cond,
            then_branch,
            else_branch,
        })
    }

    fn parse_decl(&mut self) -> Result<Stmt, TransformError> {
        let at = self.here();
        let Some(ty) = self.try_type() else {
            return parse_err(at, "expected type");
        };
        let mut declarators = Vec::new();
        loop {
            if self.at_punct('*') {
                return unsupported(self.here(), "pointer declaration");
            }
            let Some(t) = self.bump() else {
                return parse_err(self.here(), "expected declarator");
            };
            if t.kind != TokKind::Ident {
                return parse_err(t.start, "expected declarator name");
            }
            if matches!(self.peek(), Some(t) if t.kind == TokKind::Punct('[')) {
                return unsupported(self.here(), "array declaration");
            }
            let name = self.lx.text(&t).to_string();
            let init = if self.at_punct('=') {
                self.pos += 1;
                let (from, to) = self.consume_until(&[',', ';'])?;
                Some(normalize_stmt_text(self.lx.span_text(from, to)))
            } else {
                None
            };
            declarators.push(Declarator { name, init });
            if self.at_punct(',') {
                self.pos += 1;
                continue;
            }
            self.eat_punct(';')?;
            break;
        }
        Ok(Stmt::Decl { ty, declarators })
    }

    fn parse_scanf(&mut self) -> Result<Stmt, TransformError> {
        let call_start = self.here();
        self.eat_ident("scanf")?;
        self.eat_punct('(')?;
        let Some(fmt_tok) = self.bump() else {
            return parse_err(self.here(), "expected format string");
        };
        if fmt_tok.kind != TokKind::Str {
            return parse_err(fmt_tok.start, "expected format string literal");
        }
        let conversions = parse_conversions(self.lx.text(&fmt_tok), fmt_tok.start, true)?;
        let mut targets = Vec::new();
        while self.at_punct(',') {
            self.pos += 1;
            self.eat_punct('&').map_err(|_| TransformError::UnsupportedConstruct {
                position: self.here(),
                reason: "scanf target is not `&variable`".into(),
            })?;
            let Some(t) = self.bump() else {
                return parse_err(self.here(), "expected scanf target");
            };
            if t.kind != TokKind::Ident {
                return unsupported(t.start, "scanf target is not `&variable`");
            }
            targets.push(self.lx.text(&t).to_string());
        }
        self.eat_punct(')')?;
        let call_end = self.lx.toks[self.pos - 1].end;
        self.eat_punct(';')?;
        if conversions.len() != targets.len() {
            return unsupported(
                call_start,
                format!(
                    "scanf has {} conversions but {} targets",
                    conversions.len(),
                    targets.len()
                ),
            );
        }
        Ok(Stmt::Scanf {
            targets,
            conversions,
            call_text: self.lx.src[call_start..call_end].to_string(),
            position: call_start,
        })
    }

    fn parse_printf(&mut self) -> Result<Stmt, TransformError> {
        let call_start = self.here();
        self.eat_ident("printf")?;
        self.eat_punct('(')?;
        let Some(fmt_tok) = self.bump() else {
            return parse_err(self.here(), "expected format string");
        };
        if fmt_tok.kind != TokKind::Str {
            return parse_err(fmt_tok.start, "expected format string literal");
        }
        let conversions = parse_conversions(self.lx.text(&fmt_tok), fmt_tok.start, false)?;
        let mut value_args = Vec::new();
        while self.at_punct(',') {
            self.pos += 1;
            let (from, to) = self.consume_until(&[',', ')'])?;
            let text = normalize_stmt_text(self.lx.span_text(from, to));
            if text.contains("scanf") || text.contains("printf") {
                return unsupported(call_start, "nested I/O call in printf argument");
            }
            value_args.push(text);
        }
        self.eat_punct(')')?;
        let call_end = self.lx.toks[self.pos - 1].end;
        self.eat_punct(';')?;
        if conversions.len() != value_args.len() {
            return unsupported(
                call_start,
                format!(
                    "printf has {} conversions but {} value arguments",
                    conversions.len(),
                    value_args.len()
                ),
            );
        }
        Ok(Stmt::Printf {
            value_args,
            conversions,
            call_text: self.lx.src[call_start..call_end].to_string(),
            position: call_start,
            slot_start: 0,
        })
    }
}

/// Collapse a token span back to single-line statement text.
fn normalize_stmt_text(text: &str) -> String {
    text.split_whitespace().collect::<Vec<_>>().join(" ")
}

/// Extract the numeric conversions of a format string. String/char
/// conversions are outside the subset.
fn parse_conversions(
    raw_literal: &str,
    position: usize,
    for_scanf: bool,
) -> Result<Vec<BaseType>, TransformError> {
    let body = raw_literal.trim_matches('"');
    let mut out = Vec::new();
    let mut chars = body.chars().peekable();
    while let Some(c) = chars.next() {
        if c != '%' {
            continue;
        }
        if chars.peek() == Some(&'%') {
            chars.next();
            continue;
        }
        // skip flags, width and precision
        let mut spec = String::new();
        for c in chars.by_ref() {
            if c.is_ascii_alphabetic() {
                spec.push(c);
                if matches!(c, 'd' | 'i' | 'u' | 'f' | 'e' | 'g' | 'c' | 's' | 'x' | 'o') {
                    break;
                }
            } else if c.is_ascii_digit() || matches!(c, '.' | '-' | '+' | ' ' | '#') {
                continue;
            } else {
                spec.push(c);
                break;
            }
        }
        let ty = match spec.as_str() {
            "d" | "i" => BaseType::Int,
            "ld" | "li" => BaseType::Long,
            "lld" | "lli" => BaseType::LongLong,
            "u" => BaseType::UnsignedInt,
            "lu" => BaseType::UnsignedLong,
            "llu" => BaseType::UnsignedLongLong,
            "f" | "e" | "g" => {
                if for_scanf {
                    BaseType::Float
                } else {
                    BaseType::Double
                }
            }
            "lf" | "le" | "lg" => BaseType::Double,
            other => {
                return unsupported(
                    position,
                    format!("format conversion `%{other}` is not numeric"),
                )
            }
        };
        out.push(ty);
    }
    Ok(out)
}

// ------------------------------------------------------------ transform

#[derive(Default)]
struct IoLayout {
    /// input parameter order: (name, type, scanf call text)
    inputs: Vec<(String, BaseType, String)>,
    /// output slot types plus the first claiming call's text
    outputs: Vec<(BaseType, String)>,
    declared: std::collections::HashMap<String, BaseType>,
}

fn collect_declared(stmts: &[Stmt], declared: &mut std::collections::HashMap<String, BaseType>) {
    for stmt in stmts {
        match stmt {
            Stmt::Decl { ty, declarators } => {
                for d in declarators {
                    declared.insert(d.name.clone(), *ty);
                }
            }
            Stmt::Block(inner) => collect_declared(inner, declared),
            Stmt::If {
                then_branch,
                else_branch,
                ..
            } => {
                collect_declared(std::slice::from_ref(then_branch.as_ref()), declared);
                if let Some(e) = else_branch {
                    collect_declared(std::slice::from_ref(e.as_ref()), declared);
                }
            }
            _ => {}
        }
    }
}

fn collect_inputs(stmts: &[Stmt], layout: &mut IoLayout) -> Result<(), TransformError> {
    for stmt in stmts {
        match stmt {
            Stmt::Scanf {
                targets,
                conversions,
                call_text,
                position,
            } => {
                for (target, conv) in targets.iter().zip(conversions) {
                    if layout.inputs.iter().any(|(n, _, _)| n == target) {
                        return unsupported(
                            *position,
                            format!("variable `{target}` is read from stdin more than once"),
                        );
                    }
                    let ty = layout.declared.get(target).copied().unwrap_or(*conv);
                    layout.inputs.push((target.clone(), ty, call_text.clone()));
                }
            }
            Stmt::Block(inner) => collect_inputs(inner, layout)?,
            // a conditional read would make the parameter list input-dependent
            Stmt::If {
                then_branch,
                else_branch,
                ..
            } if branch_has_scanf(then_branch)
                || else_branch.as_deref().is_some_and(branch_has_scanf) =>
            {
                return unsupported(0, "conditional scanf");
            }
            _ => {}
        }
    }
    Ok(())
}

fn branch_has_scanf(stmt: &Stmt) -> bool {
    match stmt {
        Stmt::Scanf { .. } => true,
        Stmt::Block(inner) => inner.iter().any(branch_has_scanf),
        Stmt::If {
            then_branch,
            else_branch,
            ..
        } => {
            branch_has_scanf(then_branch)
                || else_branch.as_deref().is_some_and(branch_has_scanf)
        }
        _ => false,
    }
}

/// Assign output slots: sequential prints advance the slot cursor, the two
/// arms of an `if`/`else` print in parallel and must agree on the count.
fn assign_slots(
    stmts: &mut [Stmt],
    mut cursor: usize,
    layout: &mut IoLayout,
) -> Result<usize, TransformError> {
    for stmt in stmts {
        cursor = assign_slots_stmt(stmt, cursor, layout)?;
    }
    Ok(cursor)
}

fn assign_slots_stmt(
    stmt: &mut Stmt,
    cursor: usize,
    layout: &mut IoLayout,
) -> Result<usize, TransformError> {
    match stmt {
        Stmt::Printf {
            conversions,
            call_text,
            position,
            slot_start,
            ..
        } => {
            *slot_start = cursor;
            for (offset, conv) in conversions.iter().enumerate() {
                let slot = cursor + offset;
                if slot == layout.outputs.len() {
                    layout.outputs.push((*conv, call_text.clone()));
                } else if layout.outputs[slot].0 != *conv {
                    return unsupported(
                        *position,
                        format!(
                            "output {} printed as {} in one branch and {} in another",
                            slot + 1,
                            layout.outputs[slot].0.c_name(),
                            conv.c_name()
                        ),
                    );
                }
            }
            Ok(cursor + conversions.len())
        }
        Stmt::Block(inner) => assign_slots(inner, cursor, layout),
        Stmt::If {
            then_branch,
            else_branch,
            ..
        } => {
            let then_end = assign_slots_stmt(then_branch, cursor, layout)?;
            match else_branch {
                Some(els) => {
                    let else_end = assign_slots_stmt(els, cursor, layout)?;
                    if then_end != else_end {
                        return unsupported(
                            0,
                            "branches print a different number of values",
                        );
                    }
                    Ok(then_end)
                }
                None => {
                    if then_end != cursor {
                        return unsupported(0, "conditional printf without an else branch");
                    }
                    Ok(cursor)
                }
            }
        }
        _ => Ok(cursor),
    }
}

struct Emitter<'a> {
    promoted: &'a std::collections::HashSet<String>,
    out_names: &'a [String],
    out: String,
}

impl Emitter<'_> {
    fn line(&mut self, indent: usize, text: &str) {
        for _ in 0..indent {
            self.out.push_str("    ");
        }
        self.out.push_str(text);
        self.out.push('\n');
    }

    fn emit_stmt(&mut self, stmt: &Stmt, indent: usize) {
        match stmt {
            Stmt::Decl { ty, declarators } => {
                let kept: Vec<String> = declarators
                    .iter()
                    .filter(|d| !self.promoted.contains(&d.name))
                    .map(|d| match &d.init {
                        Some(init) => format!("{} = {}", d.name, init),
                        None => d.name.clone(),
                    })
                    .collect();
                if !kept.is_empty() {
                    self.line(indent, &format!("{} {};", ty.c_name(), kept.join(", ")));
                }
            }
            Stmt::Scanf { .. } => {}
            Stmt::Printf {
                value_args,
                slot_start,
                ..
            } => {
                for (offset, arg) in value_args.iter().enumerate() {
                    let name = &self.out_names[slot_start + offset];
                    self.line(indent, &format!("*{name} = ({arg});"));
                }
            }
            Stmt::If {
                cond,
                then_branch,
                else_branch,
            } => {
                self.line(indent, &format!("if ({cond})"));
                self.emit_branch(then_branch, indent);
                if let Some(els) = else_branch {
                    if matches!(els.as_ref(), Stmt::If { .. }) {
                        // keep `else if` chains flat
                        for _ in 0..indent {
                            self.out.push_str("    ");
                        }
                        self.out.push_str("else ");
                        let mark = self.out.len();
                        self.emit_stmt(els, indent);
                        // splice the `if` onto the `else ` line
                        let rest = self.out.split_off(mark);
                        self.out.push_str(rest.trim_start());
                    } else {
                        self.line(indent, "else");
                        self.emit_branch(els, indent);
                    }
                }
            }
            Stmt::Block(inner) => {
                self.line(indent, "{");
                for s in inner {
                    self.emit_stmt(s, indent + 1);
                }
                self.line(indent, "}");
            }
            Stmt::Return => self.line(indent, "return;"),
            Stmt::Other(text) => {
                if !text.is_empty() {
                    self.line(indent, &format!("{text};"));
                }
            }
        }
    }

    fn emit_branch(&mut self, stmt: &Stmt, indent: usize) {
        if matches!(stmt, Stmt::Block(_)) {
            self.emit_stmt(stmt, indent);
        } else {
            self.emit_stmt(stmt, indent + 1);
        }
    }
}

/// Strip preprocessor lines, remembering whether stdio was included and
/// keeping every other directive for re-emission. Offsets are preserved by
/// blanking the stripped lines.
fn split_preprocessor(src: &str) -> (String, Vec<String>) {
    let mut kept_directives = Vec::new();
    let mut blanked = String::with_capacity(src.len());
    for line in src.split_inclusive('\n') {
        if line.trim_start().starts_with('#') {
            let directive = line.trim_end();
            let squashed: String = directive.split_whitespace().collect();
            if !squashed.contains("stdio.h") {
                kept_directives.push(directive.trim().to_string());
            }
            for c in line.chars() {
                blanked.push(if c == '\n' { '\n' } else { ' ' });
            }
        } else {
            blanked.push_str(line);
        }
    }
    (blanked, kept_directives)
}

/// Apply the five-step rewrite to a single-`main` program.
pub fn transform_main(src: &str, fn_name: &str) -> Result<TransformResult, TransformError> {
    let (blanked, directives) = split_preprocessor(src);
    let toks = lex(&blanked)?;
    let mut parser = Parser {
        lx: Lexed {
            src: &blanked,
            toks,
        },
        pos: 0,
    };

    // exactly one function: int main(void)
    parser
        .eat_ident("int")
        .or_else(|_| parser.eat_ident("void"))
        .and_then(|_| parser.eat_ident("main"))
        .map_err(|_| TransformError::UnsupportedConstruct {
            position: 0,
            reason: "expected a single `main` function".into(),
        })?;
    parser.eat_punct('(')?;
    if parser.peek_text() == Some("void") {
        parser.pos += 1;
    }
    parser.eat_punct(')')?;
    let body = parser.parse_block()?;
    if parser.peek().is_some() {
        return unsupported(parser.here(), "code after `main` (multiple functions?)");
    }

    let Stmt::Block(mut stmts) = body else {
        unreachable!("parse_block returns a block")
    };

    let mut layout = IoLayout::default();
    collect_declared(&stmts, &mut layout.declared);
    collect_inputs(&stmts, &mut layout)?;
    let total = assign_slots(&mut stmts, 0, &mut layout)?;
    debug_assert_eq!(total, layout.outputs.len());

    if layout.outputs.is_empty() {
        return unsupported(0, "program prints nothing: no output channel");
    }

    // inputs in scanf order, then outputs in printf order
    let taken: std::collections::HashSet<String> = layout
        .declared
        .keys()
        .cloned()
        .chain(layout.inputs.iter().map(|(n, _, _)| n.clone()))
        .collect();
    let out_names: Vec<String> = (0..layout.outputs.len())
        .map(|i| {
            let mut name = if layout.outputs.len() == 1 {
                "out".to_string()
            } else {
                format!("out{}", i + 1)
            };
            while taken.contains(&name) {
                name.push('_');
            }
            name
        })
        .collect();

    let mut params: Vec<Param> = layout
        .inputs
        .iter()
        .map(|(name, ty, _)| Param {
            name: name.clone(),
            base_type: *ty,
            is_pointer: false,
        })
        .collect();
    for (name, (ty, _)) in out_names.iter().zip(&layout.outputs) {
        params.push(Param {
            name: name.clone(),
            base_type: *ty,
            is_pointer: true,
        });
    }
    let signature = Signature {
        name: fn_name.to_string(),
        params,
    };

    let mut mapping: Vec<IoMapping> = layout
        .inputs
        .iter()
        .map(|(name, _, call)| IoMapping {
            io_call: call.clone(),
            param_name: name.clone(),
            direction: IoDirection::In,
        })
        .collect();
    for (name, (_, call)) in out_names.iter().zip(&layout.outputs) {
        mapping.push(IoMapping {
            io_call: call.clone(),
            param_name: name.clone(),
            direction: IoDirection::Out,
        });
    }

    let promoted: std::collections::HashSet<String> =
        layout.inputs.iter().map(|(n, _, _)| n.clone()).collect();
    let mut emitter = Emitter {
        promoted: &promoted,
        out_names: &out_names,
        out: String::new(),
    };
    for directive in &directives {
        emitter.out.push_str(directive);
        emitter.out.push('\n');
    }
    if !directives.is_empty() {
        emitter.out.push('\n');
    }
    emitter.out.push_str(&signature.c_decl());
    emitter.out.push('\n');
    emitter.out.push_str("{\n");
    for stmt in &stmts {
        emitter.emit_stmt(stmt, 1);
    }
    emitter.out.push_str("}\n");
    let function_source = emitter.out;

    for banned in ["scanf", "printf", "stdio.h"] {
        debug_assert!(
            !function_source.contains(banned),
            "rewrite left `{banned}` behind"
        );
    }

    Ok(TransformResult {
        function_source,
        signature,
        mapping,
    })
}
