//! Parser for the one-function C declaration that defines a problem's
//! interface. Non-pointer parameters are the inputs, pointer parameters are
//! the output channels.

use serde::{Deserialize, Serialize};
use thiserror::Error;

/// Scalar C types supported in signatures, harnesses and transforms.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum BaseType {
    Int,
    Long,
    LongLong,
    UnsignedInt,
    UnsignedLong,
    UnsignedLongLong,
    Float,
    Double,
}

impl BaseType {
    /// The C spelling of the type.
    pub fn c_name(&self) -> &'static str {
        match self {
            BaseType::Int => "int",
            BaseType::Long => "long",
            BaseType::LongLong => "long long",
            BaseType::UnsignedInt => "unsigned int",
            BaseType::UnsignedLong => "unsigned long",
            BaseType::UnsignedLongLong => "unsigned long long",
            BaseType::Float => "float",
            BaseType::Double => "double",
        }
    }

    /// printf conversion that round-trips the value through text.
    pub fn printf_format(&self) -> &'static str {
        match self {
            BaseType::Int => "%d",
            BaseType::Long => "%ld",
            BaseType::LongLong => "%lld",
            BaseType::UnsignedInt => "%u",
            BaseType::UnsignedLong => "%lu",
            BaseType::UnsignedLongLong => "%llu",
            BaseType::Float => "%.9g",
            BaseType::Double => "%.17g",
        }
    }

    pub fn is_float(&self) -> bool {
        matches!(self, BaseType::Float | BaseType::Double)
    }

    /// Suffix that pins an integer literal to this type.
    pub fn literal_suffix(&self) -> &'static str {
        match self {
            BaseType::Int => "",
            BaseType::Long => "L",
            BaseType::LongLong => "LL",
            BaseType::UnsignedInt => "U",
            BaseType::UnsignedLong => "UL",
            BaseType::UnsignedLongLong => "ULL",
            BaseType::Float | BaseType::Double => "",
        }
    }
}

/// One parameter of a signature.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Param {
    pub name: String,
    pub base_type: BaseType,
    pub is_pointer: bool,
}

/// A parsed `void` function declaration.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Signature {
    pub name: String,
    pub params: Vec<Param>,
}

impl Signature {
    /// Non-pointer parameters, in declaration order.
    pub fn inputs(&self) -> impl Iterator<Item = &Param> {
        self.params.iter().filter(|p| !p.is_pointer)
    }

    /// Pointer parameters, in declaration order.
    pub fn outputs(&self) -> impl Iterator<Item = &Param> {
        self.params.iter().filter(|p| p.is_pointer)
    }

    /// Canonical rendering, e.g. `void f(int x, int *out)`.
    pub fn c_decl(&self) -> String {
        let params = self
            .params
            .iter()
            .map(|p| {
                if p.is_pointer {
                    format!("{} *{}", p.base_type.c_name(), p.name)
                } else {
                    format!("{} {}", p.base_type.c_name(), p.name)
                }
            })
            .collect::<Vec<_>>()
            .join(", ");
        format!("void {}({})", self.name, params)
    }
}

#[derive(Debug, Error, PartialEq, Eq)]
#[error("signature parse error at byte {position}: {reason}")]
pub struct SignatureParseError {
    pub position: usize,
    pub reason: String,
}

fn err<T>(position: usize, reason: impl Into<String>) -> Result<T, SignatureParseError> {
    Err(SignatureParseError {
        position,
        reason: reason.into(),
    })
}

#[derive(Debug, Clone, PartialEq)]
enum Tok {
    Ident(String),
    Star,
    LParen,
    RParen,
    Comma,
    Semi,
    Other(char),
}

fn lex(text: &str) -> Vec<(usize, Tok)> {
    let mut toks = Vec::new();
    let bytes = text.as_bytes();
    let mut i = 0;
    while i < bytes.len() {
        let c = bytes[i] as char;
        if c.is_whitespace() {
            i += 1;
            continue;
        }
        if c.is_ascii_alphabetic() || c == '_' {
            let start = i;
            while i < bytes.len() && ((bytes[i] as char).is_ascii_alphanumeric() || bytes[i] == b'_')
            {
                i += 1;
            }
            toks.push((start, Tok::Ident(text[start..i].to_string())));
            continue;
        }
        let tok = match c {
            '*' => Tok::Star,
            '(' => Tok::LParen,
            ')' => Tok::RParen,
            ',' => Tok::Comma,
            ';' => Tok::Semi,
            other => Tok::Other(other),
        };
        toks.push((i, tok));
        i += 1;
    }
    toks
}

/// Match a run of type keywords starting at `toks[i]`. Returns the parsed
/// type and the index after it, or `None` if the tokens are not a known type.
fn parse_type(toks: &[(usize, Tok)], i: usize) -> Option<(BaseType, usize)> {
    let word = |k: usize| match toks.get(k) {
        Some((_, Tok::Ident(w))) => Some(w.as_str()),
        _ => None,
    };
    let mut j = i;
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
        Some("float") => {
            if unsigned {
                return None;
            }
            j += 1;
            BaseType::Float
        }
        Some("double") => {
            if unsigned {
                return None;
            }
            j += 1;
            BaseType::Double
        }
        _ if unsigned => BaseType::UnsignedInt, // bare `unsigned x`
        _ => return None,
    };
    Some((base, j))
}

/// Parse a single C function declaration with a `void` return type.
pub fn parse_signature(text: &str) -> Result<Signature, SignatureParseError> {
    if text.contains('{') {
        return err(
            text.find('{').unwrap(),
            "expected a declaration, found a function body",
        );
    }
    let toks = lex(text);
    if toks.is_empty() {
        return err(0, "empty signature");
    }
    let pos = |k: usize| toks.get(k).map(|(p, _)| *p).unwrap_or(text.len());

    let mut i = 0;
    match &toks[i] {
        (_, Tok::Ident(w)) if w == "void" => i += 1,
        (p, Tok::Ident(w)) => return err(*p, format!("non-void return type `{w}`")),
        (p, _) => return err(*p, "expected return type"),
    }
    let name = match toks.get(i) {
        Some((_, Tok::Ident(w))) => {
            i += 1;
            w.clone()
        }
        _ => return err(pos(i), "expected function name"),
    };
    match toks.get(i) {
        Some((_, Tok::LParen)) => i += 1,
        _ => return err(pos(i), "expected `(`"),
    }

    let mut params = Vec::new();
    // `void f(void)` and `void f()` both declare zero parameters
    if let Some((_, Tok::Ident(w))) = toks.get(i) {
        if w == "void" && matches!(toks.get(i + 1), Some((_, Tok::RParen))) {
            i += 1;
        }
    }
    while !matches!(toks.get(i), Some((_, Tok::RParen))) {
        let (base_type, next) = match parse_type(&toks, i) {
            Some(r) => r,
            None => return err(pos(i), "expected parameter type"),
        };
        i = next;
        let mut is_pointer = false;
        while matches!(toks.get(i), Some((_, Tok::Star))) {
            if is_pointer {
                return err(pos(i), "multi-level pointers are not supported");
            }
            is_pointer = true;
            i += 1;
        }
        let pname = match toks.get(i) {
            Some((_, Tok::Ident(w))) => {
                i += 1;
                w.clone()
            }
            _ => return err(pos(i), "expected parameter name"),
        };
        if params.iter().any(|p: &Param| p.name == pname) {
            return err(pos(i - 1), format!("duplicate parameter name `{pname}`"));
        }
        params.push(Param {
            name: pname,
            base_type,
            is_pointer,
        });
        match toks.get(i) {
            Some((_, Tok::Comma)) => i += 1,
            Some((_, Tok::RParen)) => {}
            _ => return err(pos(i), "expected `,` or `)`"),
        }
    }
    i += 1; // consume `)`
    if matches!(toks.get(i), Some((_, Tok::Semi))) {
        i += 1;
    }
    if i != toks.len() {
        return err(pos(i), "trailing tokens after declaration");
    }
    Ok(Signature { name, params })
}
