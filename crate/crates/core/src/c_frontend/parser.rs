//! Recursive-descent parser for the supported C subset.
//!
//! Supported: function definitions and prototypes, struct/union/enum
//! definitions, typedefs, globals, object-like and function-like macros
//! (without token pasting), and the usual statement/expression grammar.
//! Anything else is rejected with a `ParseError` carrying file and line.

use std::collections::HashSet;

use super::ast::*;
use super::lexer::{is_keyword, tokenize, Token, TokenKind};

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ParseError {
    pub line: u32,
    pub message: String,
}

type PResult<T> = Result<T, ParseError>;

/// Identifiers that decorate declarations in kernel-style C and carry no
/// meaning for translation.
pub const IGNORED_QUALIFIERS: &[&str] = &[
    "__init",
    "__exit",
    "__user",
    "__iomem",
    "__force",
    "__always_inline",
    "noinline",
    "__must_check",
    "__maybe_unused",
    "__cold",
    "__pure",
    "notrace",
    "__rcu",
];

const BUILTIN_TYPEDEFS: &[&str] = &[
    "size_t",
    "ssize_t",
    "ptrdiff_t",
    "intptr_t",
    "uintptr_t",
    "int8_t",
    "int16_t",
    "int32_t",
    "int64_t",
    "uint8_t",
    "uint16_t",
    "uint32_t",
    "uint64_t",
    "bool",
    "u8",
    "u16",
    "u32",
    "u64",
    "s8",
    "s16",
    "s32",
    "s64",
    "loff_t",
    "umode_t",
    "dev_t",
    "gfp_t",
];

pub fn builtin_typedefs() -> impl Iterator<Item = &'static str> {
    BUILTIN_TYPEDEFS.iter().copied()
}

/// Parses a whole file. `typedefs` is read for disambiguation and extended
/// with every typedef name the file declares.
pub fn parse_translation_unit(src: &str, typedefs: &mut HashSet<String>) -> Result<Vec<TopLevel>, ParseError> {
    let toks = tokenize(src).map_err(|e| ParseError {
        line: e.line,
        message: e.message,
    })?;
    let mut p = Parser {
        toks: &toks,
        pos: 0,
        typedefs,
        src,
    };
    p.translation_unit()
}

/// Parses a single function definition given as standalone text.
pub fn parse_function(src: &str, typedefs: &HashSet<String>) -> Result<FunctionDef, ParseError> {
    let mut local = typedefs.clone();
    let items = parse_translation_unit(src, &mut local)?;
    items
        .into_iter()
        .find_map(|t| match t.kind {
            TopLevelKind::Function(f) => Some(f),
            _ => None,
        })
        .ok_or_else(|| ParseError {
            line: 1,
            message: "no function definition found".into(),
        })
}

/// Parses a standalone expression such as a macro body.
pub fn parse_expression(src: &str, typedefs: &HashSet<String>) -> Result<Expr, ParseError> {
    let toks = tokenize(src).map_err(|e| ParseError {
        line: e.line,
        message: e.message,
    })?;
    let mut local = typedefs.clone();
    let mut p = Parser {
        toks: &toks,
        pos: 0,
        typedefs: &mut local,
        src,
    };
    let e = p.expression()?;
    if p.peek().is_some() {
        return Err(p.err_here("trailing tokens after expression"));
    }
    Ok(e)
}

/// Parses a sequence of statements (e.g. a bare function body without braces).
pub fn parse_statements(src: &str, typedefs: &HashSet<String>) -> Result<Vec<Stmt>, ParseError> {
    let toks = tokenize(src).map_err(|e| ParseError {
        line: e.line,
        message: e.message,
    })?;
    let mut local = typedefs.clone();
    let mut p = Parser {
        toks: &toks,
        pos: 0,
        typedefs: &mut local,
        src,
    };
    let mut out = Vec::new();
    while p.peek().is_some() {
        out.push(p.statement()?);
    }
    Ok(out)
}

#[derive(Default)]
struct Specs {
    base: Option<BaseType>,
    is_const: bool,
    is_typedef: bool,
    is_extern: bool,
    is_static: bool,
    unsigned: Option<bool>,
    longs: u8,
    short: bool,
    int: bool,
    char_: bool,
    float: bool,
    double: bool,
    any: bool,
}

impl Specs {
    fn into_type(self) -> PResult<CType> {
        let base = if let Some(b) = self.base {
            b
        } else if self.char_ {
            BaseType::Char(self.unsigned.map(|u| !u))
        } else if self.short {
            BaseType::Short {
                unsigned: self.unsigned == Some(true),
            }
        } else if self.float {
            BaseType::Float
        } else if self.double {
            BaseType::Double
        } else if self.longs >= 2 {
            BaseType::LongLong {
                unsigned: self.unsigned == Some(true),
            }
        } else if self.longs == 1 {
            BaseType::Long {
                unsigned: self.unsigned == Some(true),
            }
        } else if self.int || self.unsigned.is_some() {
            BaseType::Int {
                unsigned: self.unsigned == Some(true),
            }
        } else {
            return Err(ParseError {
                line: 0,
                message: "missing type specifier".into(),
            });
        };
        Ok(CType::Base {
            base,
            is_const: self.is_const,
        })
    }
}

struct Parser<'a> {
    toks: &'a [Token],
    pos: usize,
    typedefs: &'a mut HashSet<String>,
    src: &'a str,
}

impl<'a> Parser<'a> {
    // ---- token helpers -------------------------------------------------

    fn next_index(&self, from: usize) -> Option<usize> {
        (from..self.toks.len()).find(|&i| self.toks[i].kind != TokenKind::Directive)
    }

    fn peek(&self) -> Option<&'a Token> {
        self.next_index(self.pos).map(|i| &self.toks[i])
    }

    fn peek_n(&self, n: usize) -> Option<&'a Token> {
        let mut i = self.next_index(self.pos)?;
        for _ in 0..n {
            i = self.next_index(i + 1)?;
        }
        Some(&self.toks[i])
    }

    fn bump(&mut self) -> PResult<&'a Token> {
        match self.next_index(self.pos) {
            Some(i) => {
                self.pos = i + 1;
                Ok(&self.toks[i])
            }
            None => Err(self.eof_error()),
        }
    }

    fn eof_error(&self) -> ParseError {
        ParseError {
            line: self.toks.last().map(|t| t.line).unwrap_or(1),
            message: "unexpected end of input".into(),
        }
    }

    fn err_at(&self, tok: Option<&Token>, message: impl Into<String>) -> ParseError {
        ParseError {
            line: tok
                .map(|t| t.line)
                .or_else(|| self.toks.last().map(|t| t.line))
                .unwrap_or(1),
            message: message.into(),
        }
    }

    fn err_here(&self, message: impl Into<String>) -> ParseError {
        self.err_at(self.peek(), message)
    }

    fn at_punct(&self, p: &str) -> bool {
        self.peek().is_some_and(|t| t.is_punct(p))
    }

    fn at_keyword(&self, kw: &str) -> bool {
        self.peek().is_some_and(|t| t.is_keyword(kw))
    }

    fn eat_punct(&mut self, p: &str) -> bool {
        if self.at_punct(p) {
            self.pos = self.next_index(self.pos).unwrap() + 1;
            true
        } else {
            false
        }
    }

    fn eat_keyword(&mut self, kw: &str) -> bool {
        if self.at_keyword(kw) {
            self.pos = self.next_index(self.pos).unwrap() + 1;
            true
        } else {
            false
        }
    }

    fn expect_punct(&mut self, p: &str) -> PResult<&'a Token> {
        if self.at_punct(p) {
            self.bump()
        } else {
            let found = self.peek().map(|t| t.text.clone()).unwrap_or_else(|| "EOF".into());
            Err(self.err_here(format!("expected `{p}`, found `{found}`")))
        }
    }

    fn expect_ident(&mut self) -> PResult<String> {
        match self.peek() {
            Some(t) if t.is_ident() => {
                self.bump()?;
                Ok(t.text.clone())
            }
            other => {
                let found = other.map(|t| t.text.clone()).unwrap_or_else(|| "EOF".into());
                Err(self.err_at(other, format!("expected identifier, found `{found}`")))
            }
        }
    }

    fn skip_balanced(&mut self, open: &str, close: &str) -> PResult<()> {
        self.expect_punct(open)?;
        let mut depth = 1;
        while depth > 0 {
            let t = self.bump()?;
            if t.is_punct(open) {
                depth += 1;
            } else if t.is_punct(close) {
                depth -= 1;
            }
        }
        Ok(())
    }

    fn skip_attributes(&mut self) -> PResult<()> {
        loop {
            if self.at_keyword("__attribute__") {
                self.bump()?;
                self.skip_balanced("(", ")")?;
            } else if self.at_keyword("__extension__")
                || self
                    .peek()
                    .is_some_and(|t| IGNORED_QUALIFIERS.contains(&t.text.as_str()))
            {
                self.bump()?;
            } else {
                return Ok(());
            }
        }
    }

    fn is_type_name(&self, name: &str) -> bool {
        self.typedefs.contains(name) || BUILTIN_TYPEDEFS.contains(&name)
    }

    fn is_type_start(&self, tok: &Token) -> bool {
        if tok.kind != TokenKind::Ident {
            return false;
        }
        matches!(
            tok.text.as_str(),
            "void"
                | "char"
                | "short"
                | "int"
                | "long"
                | "float"
                | "double"
                | "signed"
                | "unsigned"
                | "_Bool"
                | "struct"
                | "union"
                | "enum"
                | "const"
                | "volatile"
                | "restrict"
                | "__restrict"
        ) || (!is_keyword(&tok.text) && self.is_type_name(&tok.text))
    }

    fn is_decl_start(&self) -> bool {
        let Some(t) = self.peek() else { return false };
        if t.kind != TokenKind::Ident {
            return false;
        }
        if matches!(
            t.text.as_str(),
            "static" | "extern" | "register" | "auto" | "typedef" | "inline" | "__inline"
        ) || IGNORED_QUALIFIERS.contains(&t.text.as_str())
        {
            return true;
        }
        if is_keyword(&t.text) {
            return self.is_type_start(t);
        }
        if self.is_type_name(&t.text) {
            // `T x`, `T *x`, `T (*f)(..)` but not `T(...)`, `T = ...`
            return self
                .peek_n(1)
                .is_some_and(|n| n.is_ident() || n.is_punct("*") || n.is_punct("("))
                && !self.peek_n(1).is_some_and(|n| n.is_punct("("))
                || self.peek_n(1).is_some_and(|n| n.is_ident());
        }
        // Unknown type name followed by a declarator name: `u128 x;`
        self.peek_n(1).is_some_and(|n| n.is_ident())
            && self
                .peek_n(2)
                .is_some_and(|n| n.is_punct(";") || n.is_punct("=") || n.is_punct("[") || n.is_punct(","))
    }

    // ---- top level -----------------------------------------------------

    fn translation_unit(&mut self) -> PResult<Vec<TopLevel>> {
        let mut out = Vec::new();
        while self.pos < self.toks.len() {
            let tok = &self.toks[self.pos];
            if tok.kind == TokenKind::Directive {
                out.push(self.directive(tok)?);
                self.pos += 1;
                continue;
            }
            if tok.is_punct(";") {
                self.pos += 1;
                continue;
            }
            self.external_declaration(&mut out)?;
        }
        Ok(out)
    }

    fn directive(&mut self, tok: &Token) -> PResult<TopLevel> {
        let body = tok.text.trim_start_matches('#').trim_start();
        let (word, rest) = split_word(body);
        let kind = match word {
            "define" => {
                let rest = rest.trim_start();
                let name_len = rest
                    .find(|c: char| !(c == '_' || c.is_ascii_alphanumeric()))
                    .unwrap_or(rest.len());
                if name_len == 0 {
                    return Err(self.err_at(Some(tok), "macro without a name"));
                }
                let name = rest[..name_len].to_string();
                let after = &rest[name_len..];
                let (params, body) = if let Some(stripped) = after.strip_prefix('(') {
                    let close = stripped
                        .find(')')
                        .ok_or_else(|| self.err_at(Some(tok), "unterminated macro parameters"))?;
                    let params = stripped[..close]
                        .split(',')
                        .map(|p| p.trim().to_string())
                        .filter(|p| !p.is_empty())
                        .collect::<Vec<_>>();
                    (Some(params), stripped[close + 1..].trim().to_string())
                } else {
                    (None, after.trim().to_string())
                };
                let body = body.replace("\\\r\n", " ").replace("\\\n", " ");
                if tokenize(&body)
                    .map_err(|e| self.err_at(Some(tok), e.message))?
                    .iter()
                    .any(|t| t.is_punct("##"))
                {
                    return Err(self.err_at(Some(tok), "token pasting in macros is not supported"));
                }
                TopLevelKind::Macro(MacroDef { name, params, body })
            }
            "include" => {
                let rest = rest.trim();
                let (path, system) = if let Some(r) = rest.strip_prefix('"') {
                    (r.trim_end_matches('"').to_string(), false)
                } else if let Some(r) = rest.strip_prefix('<') {
                    (r.trim_end_matches('>').to_string(), true)
                } else {
                    return Err(self.err_at(Some(tok), "computed includes are not supported"));
                };
                TopLevelKind::Include { path, system }
            }
            _ => TopLevelKind::OtherDirective,
        };
        Ok(TopLevel {
            kind,
            start: tok.start,
            end: tok.end,
            line: tok.line,
        })
    }

    fn external_declaration(&mut self, out: &mut Vec<TopLevel>) -> PResult<()> {
        let first = self.peek().ok_or_else(|| self.eof_error())?;
        let start = first.start;
        let line = first.line;
        if first.is_keyword("_Static_assert") || first.is_keyword("asm") || first.is_keyword("__asm__") {
            return Err(self.err_at(Some(first), format!("`{}` is outside the supported subset", first.text)));
        }
        let specs = self.decl_specifiers(true)?;
        let is_typedef = specs.is_typedef;
        let is_extern = specs.is_extern;
        let is_static = specs.is_static;
        let base = specs.into_type().map_err(|e| ParseError {
            line,
            message: e.message,
        })?;
        let record_defined = defines_record(&base);

        if self.at_punct(";") {
            let end = self.bump()?.end;
            if record_defined {
                out.push(TopLevel {
                    kind: TopLevelKind::Record { ty: base },
                    start,
                    end,
                    line,
                });
            }
            return Ok(());
        }

        let mut pending = Vec::new();
        let mut first_decl = true;
        loop {
            let (name, ty) = self.declarator(base.clone(), false)?;
            self.skip_attributes()?;
            let name = name.ok_or_else(|| self.err_here("declarator without a name"))?;
            if first_decl && self.at_punct("{") {
                let CType::Function(ft) = ty else {
                    return Err(self.err_here("unexpected `{` after declaration"));
                };
                if is_typedef {
                    return Err(self.err_here("typedef with a body"));
                }
                let body_start = self.peek().unwrap().start;
                let body = self.compound_body()?;
                let end = self.toks[self.pos - 1].end;
                if record_defined {
                    out.push(TopLevel {
                        kind: TopLevelKind::Record { ty: base.clone() },
                        start,
                        end,
                        line,
                    });
                }
                let FnType { ret, params, variadic } = *ft;
                out.push(TopLevel {
                    kind: TopLevelKind::Function(FunctionDef {
                        name,
                        ret,
                        params,
                        variadic,
                        is_static,
                        body,
                        start,
                        end,
                        body_start,
                    }),
                    start,
                    end,
                    line,
                });
                return Ok(());
            }
            if first_decl && self.peek().is_some_and(|t| self.is_type_start(t)) {
                return Err(self.err_here("K&R-style function definitions are not supported"));
            }
            first_decl = false;
            let init = if self.eat_punct("=") {
                Some(self.initializer()?)
            } else {
                None
            };
            let kind = if is_typedef {
                self.typedefs.insert(name.clone());
                TopLevelKind::Typedef { name, ty }
            } else if let CType::Function(ft) = ty {
                TopLevelKind::Prototype {
                    name,
                    fn_type: *ft,
                    is_static,
                }
            } else {
                TopLevelKind::Variable {
                    name,
                    ty,
                    is_extern,
                    is_static,
                    init,
                }
            };
            pending.push(kind);
            if self.eat_punct(",") {
                continue;
            }
            let end = self.expect_punct(";")?.end;
            if record_defined {
                out.push(TopLevel {
                    kind: TopLevelKind::Record { ty: base.clone() },
                    start,
                    end,
                    line,
                });
            }
            for kind in pending {
                out.push(TopLevel { kind, start, end, line });
            }
            return Ok(());
        }
    }

    fn decl_specifiers(&mut self, allow_storage: bool) -> PResult<Specs> {
        let mut s = Specs::default();
        loop {
            self.skip_attributes()?;
            let Some(t) = self.peek() else { break };
            if t.kind != TokenKind::Ident {
                break;
            }
            match t.text.as_str() {
                "typedef" if allow_storage => s.is_typedef = true,
                "extern" if allow_storage => s.is_extern = true,
                "static" => s.is_static = true,
                "auto" | "register" | "inline" | "__inline" | "__inline__" | "_Noreturn" | "volatile"
                | "__volatile__" | "restrict" | "__restrict" | "_Thread_local" => {}
                "const" => s.is_const = true,
                "signed" => s.unsigned = Some(false),
                "unsigned" => s.unsigned = Some(true),
                "short" => s.short = true,
                "long" => s.longs += 1,
                "int" => s.int = true,
                "char" => s.char_ = true,
                "float" => s.float = true,
                "double" => s.double = true,
                "void" => s.base = Some(BaseType::Void),
                "_Bool" => s.base = Some(BaseType::Bool),
                "struct" | "union" => {
                    let is_union = t.text == "union";
                    self.bump()?;
                    let rec = self.record()?;
                    s.base = Some(if is_union {
                        BaseType::Union(rec)
                    } else {
                        BaseType::Struct(rec)
                    });
                    s.any = true;
                    continue;
                }
                "enum" => {
                    self.bump()?;
                    s.base = Some(BaseType::Enum(self.enum_def()?));
                    s.any = true;
                    continue;
                }
                "_Complex" | "_Imaginary" | "_Atomic" | "_Alignas" | "typeof" | "__typeof__" | "_Generic" => {
                    return Err(self.err_at(Some(t), format!("`{}` is outside the supported subset", t.text)))
                }
                name if !is_keyword(name) => {
                    let has_type = s.base.is_some()
                        || s.int
                        || s.char_
                        || s.short
                        || s.longs > 0
                        || s.float
                        || s.double
                        || s.unsigned.is_some();
                    if has_type {
                        break;
                    }
                    let next = self.peek_n(1);
                    let looks_like_type = self.is_type_name(name)
                        || next.is_some_and(|n| n.is_ident() || n.is_punct("*")) && allow_storage;
                    if !looks_like_type {
                        break;
                    }
                    s.base = Some(BaseType::Named(name.to_string()));
                }
                _ => break,
            }
            s.any = true;
            self.bump()?;
        }
        if !s.any {
            return Err(self.err_here(format!(
                "expected declaration, found `{}`",
                self.peek().map(|t| t.text.as_str()).unwrap_or("EOF")
            )));
        }
        Ok(s)
    }

    fn record(&mut self) -> PResult<Record> {
        self.skip_attributes()?;
        let tag = if self.peek().is_some_and(|t| t.is_ident()) {
            Some(self.expect_ident()?)
        } else {
            None
        };
        if !self.eat_punct("{") {
            if tag.is_none() {
                return Err(self.err_here("anonymous record without a body"));
            }
            return Ok(Record { tag, fields: None });
        }
        let mut fields = Vec::new();
        while !self.eat_punct("}") {
            if self.eat_punct(";") {
                continue;
            }
            let specs = self.decl_specifiers(false)?;
            let base = specs.into_type().map_err(|e| self.err_here(e.message))?;
            if self.at_punct(";") {
                // Anonymous nested record; flatten its fields.
                self.bump()?;
                if let CType::Base {
                    base: BaseType::Struct(r) | BaseType::Union(r),
                    ..
                } = base
                {
                    fields.extend(r.fields.unwrap_or_default());
                }
                continue;
            }
            loop {
                let (name, ty) = if self.at_punct(":") {
                    (None, base.clone())
                } else {
                    self.declarator(base.clone(), false)?
                };
                let bit_width = if self.eat_punct(":") {
                    Some(self.conditional()?)
                } else {
                    None
                };
                self.skip_attributes()?;
                if let Some(name) = name {
                    fields.push(Field { name, ty, bit_width });
                }
                if !self.eat_punct(",") {
                    break;
                }
            }
            self.expect_punct(";")?;
        }
        self.skip_attributes()?;
        Ok(Record {
            tag,
            fields: Some(fields),
        })
    }

    fn enum_def(&mut self) -> PResult<EnumDef> {
        let tag = if self.peek().is_some_and(|t| t.is_ident()) {
            Some(self.expect_ident()?)
        } else {
            None
        };
        if !self.eat_punct("{") {
            return Ok(EnumDef { tag, variants: None });
        }
        let mut variants = Vec::new();
        while !self.eat_punct("}") {
            let name = self.expect_ident()?;
            let value = if self.eat_punct("=") {
                Some(self.conditional()?)
            } else {
                None
            };
            variants.push((name, value));
            if !self.eat_punct(",") {
                self.expect_punct("}")?;
                break;
            }
        }
        Ok(EnumDef {
            tag,
            variants: Some(variants),
        })
    }

    /// Parses a (possibly abstract) declarator applied to `base`.
    fn declarator(&mut self, base: CType, abstract_ok: bool) -> PResult<(Option<String>, CType)> {
        let mut ty = base;
        loop {
            self.skip_attributes()?;
            if self.eat_punct("*") {
                let mut is_const = false;
                loop {
                    if self.eat_keyword("const") {
                        is_const = true;
                    } else if self.eat_keyword("volatile")
                        || self.eat_keyword("restrict")
                        || self.eat_keyword("__restrict")
                    {
                    } else if self
                        .peek()
                        .is_some_and(|t| IGNORED_QUALIFIERS.contains(&t.text.as_str()))
                    {
                        self.bump()?;
                    } else {
                        break;
                    }
                }
                ty = CType::Pointer {
                    pointee: Box::new(ty),
                    is_const,
                };
            } else {
                break;
            }
        }

        // Nested declarator: `(*name)(...)`, `(*name)[N]`.
        let nested = self.at_punct("(")
            && self
                .peek_n(1)
                .is_some_and(|t| t.is_punct("*") || t.is_punct("(") || (t.is_ident() && !self.is_type_name(&t.text)))
            && !(abstract_ok
                && self
                    .peek_n(1)
                    .is_some_and(|t| t.is_ident() && self.is_type_name(&t.text)));
        if nested {
            let open = self.next_index(self.pos).unwrap();
            self.pos = open;
            self.skip_balanced("(", ")")?;
            let after_inner = self.pos;
            let outer = self.declarator_suffixes(ty)?;
            let resume = self.pos;
            self.pos = open + 1;
            let (name, full) = self.declarator(outer, abstract_ok)?;
            self.expect_punct(")")?;
            if self.pos != after_inner {
                return Err(self.err_here("malformed nested declarator"));
            }
            self.pos = resume;
            return Ok((name, full));
        }

        let name = if self.peek().is_some_and(|t| t.is_ident()) {
            Some(self.expect_ident()?)
        } else if abstract_ok {
            None
        } else {
            return Err(self.err_here(format!(
                "expected declarator, found `{}`",
                self.peek().map(|t| t.text.as_str()).unwrap_or("EOF")
            )));
        };
        let ty = self.declarator_suffixes(ty)?;
        Ok((name, ty))
    }

    fn declarator_suffixes(&mut self, base: CType) -> PResult<CType> {
        enum Suffix {
            Array(Option<Expr>),
            Func(Vec<Param>, bool),
        }
        let mut suffixes = Vec::new();
        loop {
            if self.eat_punct("[") {
                let len = if self.at_punct("]") {
                    None
                } else {
                    Some(self.expression()?)
                };
                self.expect_punct("]")?;
                suffixes.push(Suffix::Array(len));
            } else if self.at_punct("(") {
                self.bump()?;
                let (params, variadic) = self.parameter_list()?;
                suffixes.push(Suffix::Func(params, variadic));
            } else {
                break;
            }
        }
        let mut ty = base;
        for s in suffixes.into_iter().rev() {
            ty = match s {
                Suffix::Array(len) => CType::Array {
                    elem: Box::new(ty),
                    len: len.map(Box::new),
                },
                Suffix::Func(params, variadic) => CType::Function(Box::new(FnType {
                    ret: ty,
                    params,
                    variadic,
                })),
            };
        }
        Ok(ty)
    }

    fn parameter_list(&mut self) -> PResult<(Vec<Param>, bool)> {
        let mut params = Vec::new();
        if self.eat_punct(")") {
            return Ok((params, false));
        }
        if self.at_keyword("void") && self.peek_n(1).is_some_and(|t| t.is_punct(")")) {
            self.bump()?;
            self.bump()?;
            return Ok((params, false));
        }
        let mut variadic = false;
        loop {
            if self.eat_punct("...") {
                variadic = true;
                self.expect_punct(")")?;
                break;
            }
            if self.peek().is_some_and(|t| t.is_ident() && !self.is_type_name(&t.text))
                && self.peek_n(1).is_some_and(|n| n.is_punct(",") || n.is_punct(")"))
            {
                return Err(self.err_here("K&R-style function definitions are not supported"));
            }
            let specs = self.decl_specifiers(false)?;
            let base = specs.into_type().map_err(|e| self.err_here(e.message))?;
            let (name, ty) = self.declarator(base, true)?;
            let ty = match ty {
                CType::Array { elem, .. } => CType::Pointer {
                    pointee: elem,
                    is_const: false,
                },
                other => other,
            };
            params.push(Param { name, ty });
            if self.eat_punct(",") {
                continue;
            }
            self.expect_punct(")")?;
            break;
        }
        Ok((params, variadic))
    }

    fn type_name(&mut self) -> PResult<CType> {
        let specs = self.decl_specifiers(false)?;
        let base = specs.into_type().map_err(|e| self.err_here(e.message))?;
        let (name, ty) = self.declarator(base, true)?;
        if name.is_some() {
            return Err(self.err_here("unexpected name in type"));
        }
        Ok(ty)
    }

    fn initializer(&mut self) -> PResult<Expr> {
        if self.at_punct("{") {
            self.bump()?;
            let mut items = Vec::new();
            while !self.eat_punct("}") {
                // Designators are dropped; only the values matter downstream.
                loop {
                    if self.eat_punct(".") {
                        self.expect_ident()?;
                    } else if self.at_punct("[") {
                        self.bump()?;
                        self.conditional()?;
                        self.expect_punct("]")?;
                    } else {
                        break;
                    }
                }
                self.eat_punct("=");
                items.push(self.initializer()?);
                if !self.eat_punct(",") {
                    self.expect_punct("}")?;
                    break;
                }
            }
            Ok(Expr::InitList(items))
        } else {
            self.assignment()
        }
    }

    // ---- statements ----------------------------------------------------

    /// Parses `{ ... }` and returns the contained statements.
    fn compound_body(&mut self) -> PResult<Vec<Stmt>> {
        self.expect_punct("{")?;
        let mut items = Vec::new();
        while !self.eat_punct("}") {
            if self.peek().is_none() {
                return Err(self.eof_error());
            }
            items.push(self.statement()?);
        }
        Ok(items)
    }

    fn statement(&mut self) -> PResult<Stmt> {
        let Some(t) = self.peek() else {
            return Err(self.eof_error());
        };
        if t.is_punct("{") {
            return Ok(Stmt::Compound(self.compound_body()?));
        }
        if t.is_punct(";") {
            self.bump()?;
            return Ok(Stmt::Empty);
        }
        if t.kind == TokenKind::Ident {
            match t.text.as_str() {
                "if" => {
                    self.bump()?;
                    self.expect_punct("(")?;
                    let cond = self.expression()?;
                    self.expect_punct(")")?;
                    let then = Box::new(self.statement()?);
                    let els = if self.eat_keyword("else") {
                        Some(Box::new(self.statement()?))
                    } else {
                        None
                    };
                    return Ok(Stmt::If { cond, then, els });
                }
                "while" => {
                    self.bump()?;
                    self.expect_punct("(")?;
                    let cond = self.expression()?;
                    self.expect_punct(")")?;
                    let body = Box::new(self.statement()?);
                    return Ok(Stmt::While { cond, body });
                }
                "do" => {
                    self.bump()?;
                    let body = Box::new(self.statement()?);
                    if !self.eat_keyword("while") {
                        return Err(self.err_here("expected `while` after do body"));
                    }
                    self.expect_punct("(")?;
                    let cond = self.expression()?;
                    self.expect_punct(")")?;
                    self.expect_punct(";")?;
                    return Ok(Stmt::DoWhile { body, cond });
                }
                "for" => {
                    self.bump()?;
                    self.expect_punct("(")?;
                    let init = if self.eat_punct(";") {
                        None
                    } else if self.is_decl_start() {
                        Some(Box::new(self.local_declaration()?))
                    } else {
                        let e = self.expression()?;
                        self.expect_punct(";")?;
                        Some(Box::new(Stmt::Expr(e)))
                    };
                    let cond = if self.at_punct(";") {
                        None
                    } else {
                        Some(self.expression()?)
                    };
                    self.expect_punct(";")?;
                    let step = if self.at_punct(")") {
                        None
                    } else {
                        Some(self.expression()?)
                    };
                    self.expect_punct(")")?;
                    let body = Box::new(self.statement()?);
                    return Ok(Stmt::For { init, cond, step, body });
                }
                "switch" => {
                    self.bump()?;
                    self.expect_punct("(")?;
                    let expr = self.expression()?;
                    self.expect_punct(")")?;
                    let body = Box::new(self.statement()?);
                    return Ok(Stmt::Switch { expr, body });
                }
                "case" => {
                    self.bump()?;
                    let value = self.conditional()?;
                    self.expect_punct(":")?;
                    let body = Box::new(self.case_body()?);
                    return Ok(Stmt::Case { value, body });
                }
                "default" => {
                    self.bump()?;
                    self.expect_punct(":")?;
                    let body = Box::new(self.case_body()?);
                    return Ok(Stmt::Default(body));
                }
                "break" => {
                    self.bump()?;
                    self.expect_punct(";")?;
                    return Ok(Stmt::Break);
                }
                "continue" => {
                    self.bump()?;
                    self.expect_punct(";")?;
                    return Ok(Stmt::Continue);
                }
                "return" => {
                    self.bump()?;
                    let value = if self.at_punct(";") {
                        None
                    } else {
                        Some(self.expression()?)
                    };
                    self.expect_punct(";")?;
                    return Ok(Stmt::Return(value));
                }
                "goto" => {
                    self.bump()?;
                    let label = self.expect_ident()?;
                    self.expect_punct(";")?;
                    return Ok(Stmt::Goto(label));
                }
                "asm" | "__asm__" => {
                    return Err(self.err_at(Some(t), "inline assembly is outside the supported subset"))
                }
                _ => {}
            }
            if t.is_ident() && self.peek_n(1).is_some_and(|n| n.is_punct(":")) {
                let label = self.expect_ident()?;
                self.bump()?;
                let body = if self.at_punct("}") {
                    Box::new(Stmt::Empty)
                } else {
                    Box::new(self.statement()?)
                };
                return Ok(Stmt::Labeled { label, body });
            }
            if self.is_decl_start() {
                return self.local_declaration();
            }
        }
        let e = self.expression()?;
        self.expect_punct(";")?;
        Ok(Stmt::Expr(e))
    }

    /// A case label owns the statements up to the next label or closing brace.
    fn case_body(&mut self) -> PResult<Stmt> {
        let mut items = Vec::new();
        while !(self.at_punct("}") || self.at_keyword("case") || self.at_keyword("default")) {
            if self.peek().is_none() {
                return Err(self.eof_error());
            }
            items.push(self.statement()?);
        }
        Ok(Stmt::Compound(items))
    }

    fn local_declaration(&mut self) -> PResult<Stmt> {
        let specs = self.decl_specifiers(true)?;
        let is_static = specs.is_static;
        let is_typedef = specs.is_typedef;
        let base = specs.into_type().map_err(|e| self.err_here(e.message))?;
        let mut decls = Vec::new();
        if self.eat_punct(";") {
            return Ok(Stmt::Decl(decls));
        }
        loop {
            let (name, ty) = self.declarator(base.clone(), false)?;
            self.skip_attributes()?;
            let name = name.ok_or_else(|| self.err_here("declarator without a name"))?;
            let init = if self.eat_punct("=") {
                Some(self.initializer()?)
            } else {
                None
            };
            if is_typedef {
                self.typedefs.insert(name.clone());
            } else {
                decls.push(LocalDecl {
                    name,
                    ty,
                    init,
                    is_static,
                });
            }
            if !self.eat_punct(",") {
                break;
            }
        }
        self.expect_punct(";")?;
        Ok(Stmt::Decl(decls))
    }

    // ---- expressions ---------------------------------------------------

    fn expression(&mut self) -> PResult<Expr> {
        let first = self.assignment()?;
        if !self.at_punct(",") {
            return Ok(first);
        }
        let mut items = vec![first];
        while self.eat_punct(",") {
            items.push(self.assignment()?);
        }
        Ok(Expr::Comma(items))
    }

    fn assignment(&mut self) -> PResult<Expr> {
        let lhs = self.conditional()?;
        let op = match self.peek() {
            Some(t) if t.kind == TokenKind::Punct => match t.text.as_str() {
                "=" => Some(None),
                "+=" => Some(Some(BinaryOp::Add)),
                "-=" => Some(Some(BinaryOp::Sub)),
                "*=" => Some(Some(BinaryOp::Mul)),
                "/=" => Some(Some(BinaryOp::Div)),
                "%=" => Some(Some(BinaryOp::Rem)),
                "<<=" => Some(Some(BinaryOp::Shl)),
                ">>=" => Some(Some(BinaryOp::Shr)),
                "&=" => Some(Some(BinaryOp::BitAnd)),
                "^=" => Some(Some(BinaryOp::BitXor)),
                "|=" => Some(Some(BinaryOp::BitOr)),
                _ => None,
            },
            _ => None,
        };
        if let Some(op) = op {
            self.bump()?;
            let rhs = self.assignment()?;
            return Ok(Expr::Assign {
                op,
                lhs: Box::new(lhs),
                rhs: Box::new(rhs),
            });
        }
        Ok(lhs)
    }

    fn conditional(&mut self) -> PResult<Expr> {
        let cond = self.binary(0)?;
        if self.eat_punct("?") {
            let then = self.expression()?;
            self.expect_punct(":")?;
            let els = self.conditional()?;
            return Ok(Expr::Ternary {
                cond: Box::new(cond),
                then: Box::new(then),
                els: Box::new(els),
            });
        }
        Ok(cond)
    }

    fn binary(&mut self, min_prec: u8) -> PResult<Expr> {
        let mut lhs = self.cast()?;
        while let Some((op, prec)) = self.peek().and_then(binary_op) {
            if prec < min_prec {
                break;
            }
            self.bump()?;
            let rhs = self.binary(prec + 1)?;
            lhs = Expr::Binary {
                op,
                lhs: Box::new(lhs),
                rhs: Box::new(rhs),
            };
        }
        Ok(lhs)
    }

    fn cast(&mut self) -> PResult<Expr> {
        if self.at_punct("(") && self.peek_n(1).is_some_and(|t| self.is_type_start(t)) {
            self.bump()?;
            let ty = self.type_name()?;
            self.expect_punct(")")?;
            if self.at_punct("{") {
                let Expr::InitList(init) = self.initializer()? else {
                    unreachable!()
                };
                let lit = Expr::CompoundLiteral { ty, init };
                return self.postfix_ops(lit);
            }
            let expr = self.cast()?;
            return Ok(Expr::Cast {
                ty,
                expr: Box::new(expr),
            });
        }
        self.unary()
    }

    fn unary(&mut self) -> PResult<Expr> {
        let Some(t) = self.peek() else {
            return Err(self.eof_error());
        };
        let op = if t.kind == TokenKind::Punct {
            match t.text.as_str() {
                "++" => Some(UnaryOp::PreInc),
                "--" => Some(UnaryOp::PreDec),
                "-" => Some(UnaryOp::Neg),
                "+" => Some(UnaryOp::Plus),
                "!" => Some(UnaryOp::Not),
                "~" => Some(UnaryOp::BitNot),
                "*" => Some(UnaryOp::Deref),
                "&" => Some(UnaryOp::AddrOf),
                _ => None,
            }
        } else {
            None
        };
        if let Some(op) = op {
            self.bump()?;
            let expr = if matches!(op, UnaryOp::PreInc | UnaryOp::PreDec) {
                self.unary()?
            } else {
                self.cast()?
            };
            return Ok(Expr::Unary {
                op,
                expr: Box::new(expr),
            });
        }
        if t.is_keyword("sizeof") {
            self.bump()?;
            if self.at_punct("(") && self.peek_n(1).is_some_and(|n| self.is_type_start(n)) {
                self.bump()?;
                let ty = self.type_name()?;
                self.expect_punct(")")?;
                return Ok(Expr::SizeofType(ty));
            }
            let e = self.unary()?;
            return Ok(Expr::SizeofExpr(Box::new(e)));
        }
        self.postfix()
    }

    fn postfix(&mut self) -> PResult<Expr> {
        let primary = self.primary()?;
        self.postfix_ops(primary)
    }

    fn postfix_ops(&mut self, mut e: Expr) -> PResult<Expr> {
        loop {
            if self.eat_punct("[") {
                let index = self.expression()?;
                self.expect_punct("]")?;
                e = Expr::Index {
                    base: Box::new(e),
                    index: Box::new(index),
                };
            } else if self.eat_punct("(") {
                let mut args = Vec::new();
                if !self.eat_punct(")") {
                    loop {
                        args.push(self.assignment()?);
                        if self.eat_punct(",") {
                            continue;
                        }
                        self.expect_punct(")")?;
                        break;
                    }
                }
                e = Expr::Call {
                    callee: Box::new(e),
                    args,
                };
            } else if self.eat_punct(".") {
                let field = self.expect_ident()?;
                e = Expr::Member {
                    base: Box::new(e),
                    field,
                    arrow: false,
                };
            } else if self.eat_punct("->") {
                let field = self.expect_ident()?;
                e = Expr::Member {
                    base: Box::new(e),
                    field,
                    arrow: true,
                };
            } else if self.eat_punct("++") {
                e = Expr::PostInc(Box::new(e));
            } else if self.eat_punct("--") {
                e = Expr::PostDec(Box::new(e));
            } else {
                return Ok(e);
            }
        }
    }

    fn primary(&mut self) -> PResult<Expr> {
        let t = self.bump()?;
        match t.kind {
            TokenKind::Ident if !is_keyword(&t.text) => Ok(Expr::Ident(t.text.clone())),
            TokenKind::Number => {
                let lower = t.text.to_ascii_lowercase();
                let is_float = !lower.starts_with("0x") && (lower.contains('.') || lower.contains('e'))
                    || lower.starts_with("0x") && lower.contains('p');
                Ok(if is_float {
                    Expr::FloatLit(t.text.clone())
                } else {
                    Expr::IntLit(t.text.clone())
                })
            }
            TokenKind::Str => {
                let mut s = t.text.clone();
                while self.peek().is_some_and(|n| n.kind == TokenKind::Str) {
                    s.push(' ');
                    s.push_str(&self.bump()?.text);
                }
                Ok(Expr::StrLit(s))
            }
            TokenKind::Char => Ok(Expr::CharLit(t.text.clone())),
            TokenKind::Punct if t.text == "(" => {
                if self.at_punct("{") {
                    return Err(self.err_at(Some(t), "statement expressions are outside the supported subset"));
                }
                let e = self.expression()?;
                self.expect_punct(")")?;
                Ok(e)
            }
            _ => Err(self.err_at(Some(t), format!("unexpected token `{}`", t.text))),
        }
    }

    #[allow(dead_code)]
    fn text_between(&self, start: usize, end: usize) -> &str {
        &self.src[start..end]
    }
}

fn split_word(s: &str) -> (&str, &str) {
    let end = s
        .find(|c: char| !(c == '_' || c.is_ascii_alphanumeric()))
        .unwrap_or(s.len());
    (&s[..end], &s[end..])
}

fn defines_record(ty: &CType) -> bool {
    match ty {
        CType::Base {
            base: BaseType::Struct(r) | BaseType::Union(r),
            ..
        } => r.fields.is_some(),
        CType::Base {
            base: BaseType::Enum(e),
            ..
        } => e.variants.is_some(),
        _ => false,
    }
}

fn binary_op(t: &Token) -> Option<(BinaryOp, u8)> {
    if t.kind != TokenKind::Punct {
        return None;
    }
    use BinaryOp::*;
    Some(match t.text.as_str() {
        "||" => (Or, 1),
        "&&" => (And, 2),
        "|" => (BitOr, 3),
        "^" => (BitXor, 4),
        "&" => (BitAnd, 5),
        "==" => (Eq, 6),
        "!=" => (Ne, 6),
        "<" => (Lt, 7),
        ">" => (Gt, 7),
        "<=" => (Le, 7),
        ">=" => (Ge, 7),
        "<<" => (Shl, 8),
        ">>" => (Shr, 8),
        "+" => (Add, 9),
        "-" => (Sub, 9),
        "*" => (Mul, 10),
        "/" => (Div, 10),
        "%" => (Rem, 10),
        _ => return None,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn parse(src: &str) -> Vec<TopLevel> {
        parse_translation_unit(src, &mut HashSet::new()).unwrap()
    }

    fn functions(src: &str) -> Vec<FunctionDef> {
        parse(src)
            .into_iter()
            .filter_map(|t| match t.kind {
                TopLevelKind::Function(f) => Some(f),
                _ => None,
            })
            .collect()
    }

    #[test]
    fn chain_fixture_has_three_functions() {
        let f = functions("int a(void){return b();} int b(void){return c();} int c(void){return 0;}");
        let names: Vec<_> = f.iter().map(|f| f.name.as_str()).collect();
        assert_eq!(names, ["a", "b", "c"]);
    }

    #[test]
    fn define_only_file() {
        let items = parse("#define X 1\n");
        assert_eq!(items.len(), 1);
        assert!(
            matches!(&items[0].kind, TopLevelKind::Macro(m) if m.name == "X" && m.body == "1" && m.params.is_none())
        );
    }

    #[test]
    fn function_like_macro() {
        let items = parse("#define MAX(a, b) ((a) > (b) ? (a) : (b))\n");
        let TopLevelKind::Macro(m) = &items[0].kind else {
            panic!()
        };
        assert_eq!(m.params.as_deref(), Some(&["a".to_string(), "b".to_string()][..]));
    }

    #[test]
    fn token_pasting_is_rejected() {
        let err = parse_translation_unit("#define CAT(a,b) a##b\n", &mut HashSet::new()).unwrap_err();
        assert!(err.message.contains("token pasting"));
        assert_eq!(err.line, 1);
    }

    #[test]
    fn typedef_struct_yields_record_and_typedef() {
        let items = parse("typedef struct node { int v; struct node *next; } node_t;\nnode_t *head;");
        assert!(matches!(items[0].kind, TopLevelKind::Record { .. }));
        assert!(matches!(&items[1].kind, TopLevelKind::Typedef { name, .. } if name == "node_t"));
        assert!(
            matches!(&items[2].kind, TopLevelKind::Variable { name, ty: CType::Pointer { .. }, .. } if name == "head")
        );
    }

    #[test]
    fn function_pointer_declarators() {
        let items = parse("int (*cb)(int, char *);\ntypedef void (*handler_t)(void);\n");
        let TopLevelKind::Variable { name, ty, .. } = &items[0].kind else {
            panic!("{:?}", items[0].kind)
        };
        assert_eq!(name, "cb");
        let CType::Pointer { pointee, .. } = ty else { panic!() };
        assert!(matches!(**pointee, CType::Function(_)));
        assert!(matches!(&items[1].kind, TopLevelKind::Typedef { name, .. } if name == "handler_t"));
    }

    #[test]
    fn prototype_is_not_a_function() {
        let items = parse("static int helper(int x);");
        assert!(matches!(&items[0].kind, TopLevelKind::Prototype { name, is_static: true, .. } if name == "helper"));
    }

    #[test]
    fn statements_and_casts() {
        let src = r#"
typedef unsigned long ulong;
ulong f(int *p, int n) {
    ulong acc = 0;
    for (int i = 0; i < n; i++) {
        if (p[i] > 0) acc += (ulong)p[i]; else continue;
    }
    switch (n) { case 1: acc++; break; default: break; }
    do { n--; } while (n > 0);
    return sizeof(ulong) + sizeof acc;
}"#;
        let f = &functions(src)[0];
        assert_eq!(f.name, "f");
        assert_eq!(f.params.len(), 2);
        assert_eq!(f.body.len(), 5);
    }

    #[test]
    fn compound_literal_and_designators() {
        let src = "struct p { int x, y; };\nint g(void) { struct p a = { .x = 1, .y = 2 }; return (struct p){3, 4}.x + a.y; }";
        assert_eq!(functions(src).len(), 1);
    }

    #[test]
    fn kr_definition_is_rejected() {
        let err = parse_translation_unit("int f(a) int a; { return a; }", &mut HashSet::new()).unwrap_err();
        assert!(err.message.contains("K&R"), "{}", err.message);
    }

    #[test]
    fn statement_expression_is_rejected() {
        let err = parse_translation_unit("int f(void) { return ({ 1; }); }", &mut HashSet::new()).unwrap_err();
        assert!(err.message.contains("statement expressions"));
    }

    #[test]
    fn parse_error_carries_line() {
        let err = parse_translation_unit("int ok;\n\nint f( { }", &mut HashSet::new()).unwrap_err();
        assert_eq!(err.line, 3);
    }

    #[test]
    fn labels_and_goto() {
        let f = &functions("int f(int x) { if (x) goto out; x = 1; out: return x; }")[0];
        assert!(matches!(f.body.last(), Some(Stmt::Labeled { label, .. }) if label == "out"));
    }

    #[test]
    fn unknown_typedef_declaration_in_body() {
        let f = &functions("int f(void) { u128 big = 0; return (int)big; }")[0];
        assert!(matches!(&f.body[0], Stmt::Decl(d) if d[0].name == "big"));
    }

    #[test]
    fn multiplication_is_not_a_declaration() {
        let f = &functions("int f(int a, int b) { a * b; return a; }")[0];
        assert!(matches!(&f.body[0], Stmt::Expr(Expr::Binary { op: BinaryOp::Mul, .. })));
    }

    #[test]
    fn function_byte_range_covers_definition() {
        let src = "/* lead */\nstatic int x(void)\n{\n  return 1;\n}\n";
        let items = parse(src);
        let TopLevelKind::Function(f) = &items[0].kind else {
            panic!()
        };
        assert_eq!(&src[f.start..f.end], "static int x(void)\n{\n  return 1;\n}");
    }
}
