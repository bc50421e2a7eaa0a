//! A deliberately simple statement-by-statement C → unsafe Rust transpiler
//! for the supported C subset. Output keeps C semantics through raw pointers
//! and explicit `as` casts; it makes no attempt at idiomatic Rust.

use std::collections::HashMap;

use crate::c_frontend::ast::*;
use crate::c_frontend::module::ModuleIR;
use crate::error::{Error, Result};
use crate::rust_prober::catalog::{const_env, rust_ident};
use crate::typemap::{builtin_typedef, char_literal, eval_const, int_literal, rust_type, ConstEnv};

/// Typed Rust expression text.
#[derive(Debug, Clone)]
struct Ex {
    text: String,
    ty: CType,
    /// An integer literal whose Rust type can be left to inference.
    int_lit: bool,
}

impl Ex {
    fn new(text: impl Into<String>, ty: CType) -> Self {
        Ex {
            text: text.into(),
            ty,
            int_lit: false,
        }
    }
}

fn unsupported(what: impl Into<String>) -> Error {
    Error::Unsupported(what.into())
}

fn int_bits(prim: &str) -> Option<(u32, bool)> {
    Some(match prim {
        "i8" => (8, true),
        "u8" => (8, false),
        "i16" => (16, true),
        "u16" => (16, false),
        "i32" => (32, true),
        "u32" => (32, false),
        "i64" | "isize" => (64, true),
        "u64" | "usize" => (64, false),
        "i128" => (128, true),
        "u128" => (128, false),
        _ => return None,
    })
}

fn is_float(prim: &str) -> bool {
    prim == "f32" || prim == "f64"
}

fn is_ptr(prim: &str) -> bool {
    prim.starts_with('*')
}

fn ctype_of_prim(prim: &str) -> CType {
    let base = match prim {
        "i8" => BaseType::Char(Some(true)),
        "u8" => BaseType::Char(Some(false)),
        "i16" => BaseType::Short { unsigned: false },
        "u16" => BaseType::Short { unsigned: true },
        "u32" => BaseType::Int { unsigned: true },
        "i64" => BaseType::Long { unsigned: false },
        "u64" => BaseType::Long { unsigned: true },
        "usize" => BaseType::Named("size_t".into()),
        "isize" => BaseType::Named("ssize_t".into()),
        "f32" => BaseType::Float,
        "f64" => BaseType::Double,
        "bool" => BaseType::Bool,
        _ => BaseType::Int { unsigned: false },
    };
    CType::base(base)
}

/// Integer promotion: everything narrower than `int` becomes `int`.
fn promote(prim: &str) -> String {
    match int_bits(prim) {
        Some((b, _)) if b < 32 => "i32".into(),
        None if prim == "bool" => "i32".into(),
        _ => prim.to_string(),
    }
}

/// The usual arithmetic conversions.
fn common(a: &str, b: &str) -> String {
    if a == "f64" || b == "f64" {
        return "f64".into();
    }
    if a == "f32" || b == "f32" {
        return "f32".into();
    }
    let (a, b) = (promote(a), promote(b));
    if a == b {
        return a;
    }
    let (Some((ab, asg)), Some((bb, bsg))) = (int_bits(&a), int_bits(&b)) else {
        return a;
    };
    if asg == bsg {
        return if ab >= bb { a } else { b };
    }
    let (s, sb, u, ub) = if asg { (a, ab, b, bb) } else { (b, bb, a, ab) };
    if ub >= sb {
        u
    } else {
        s
    }
}

fn unsigned_of(prim: &str) -> Option<(u32, bool)> {
    int_bits(prim).filter(|(_, s)| !s)
}

/// Converts the body of a C string literal (possibly several adjacent
/// literals) into the bytes of a Rust byte-string literal.
fn byte_string(lit: &str) -> Result<String> {
    let mut out = String::new();
    let mut rest = lit.trim();
    while !rest.is_empty() {
        let body = rest
            .strip_prefix('"')
            .ok_or_else(|| unsupported(format!("string literal {lit}")))?;
        let mut chars = body.char_indices();
        let mut end = None;
        while let Some((i, c)) = chars.next() {
            match c {
                '\\' => {
                    let (_, e) = chars.next().ok_or_else(|| unsupported("dangling escape"))?;
                    match e {
                        'n' | 't' | 'r' | '\\' | '"' | '\'' => {
                            out.push('\\');
                            out.push(e);
                        }
                        'a' => out.push_str("\\x07"),
                        'b' => out.push_str("\\x08"),
                        'f' => out.push_str("\\x0c"),
                        'v' => out.push_str("\\x0b"),
                        'x' => out.push_str("\\x"),
                        '0'..='7' => {
                            let mut v = e.to_digit(8).unwrap();
                            for _ in 0..2 {
                                match body[i + 2..].chars().next() {
                                    Some(d @ '0'..='7') if v < 0o40 => {
                                        v = v * 8 + d.to_digit(8).unwrap();
                                        chars.next();
                                    }
                                    _ => break,
                                }
                            }
                            out.push_str(&format!("\\x{v:02x}"));
                        }
                        other => out.push(other),
                    }
                }
                '"' => {
                    end = Some(i);
                    break;
                }
                c if c.is_ascii() => out.push(c),
                c => {
                    let mut buf = [0u8; 4];
                    for b in c.encode_utf8(&mut buf).bytes() {
                        out.push_str(&format!("\\x{b:02x}"));
                    }
                }
            }
        }
        let end = end.ok_or_else(|| unsupported("unterminated string literal"))?;
        rest = body[end + 1..].trim_start();
    }
    Ok(out)
}

fn float_text(lit: &str) -> (String, &'static str) {
    let lower = lit.to_ascii_lowercase();
    let (digits, ty) = if let Some(d) = lower.strip_suffix('f') {
        (d.to_string(), "f32")
    } else {
        (lower.trim_end_matches('l').to_string(), "f64")
    };
    let mut d = digits;
    if d.starts_with('.') {
        d.insert(0, '0');
    }
    if let Some(p) = d.find('.') {
        if !d[p + 1..].starts_with(|c: char| c.is_ascii_digit()) {
            d.insert(p + 1, '0');
        }
    }
    (format!("{d}_{ty}"), ty)
}

enum Flow {
    /// `break` leaves this labeled loop or block.
    Break(String),
}

#[derive(Default)]
struct FnState {
    scopes: Vec<HashMap<String, CType>>,
    labels: usize,
    breaks: Vec<Flow>,
    /// `continue` target: (label, is a labeled block rather than the loop).
    continues: Vec<(String, bool)>,
}

impl FnState {
    fn lookup(&self, name: &str) -> Option<&CType> {
        self.scopes.iter().rev().find_map(|s| s.get(name))
    }

    fn label(&mut self, prefix: &str) -> String {
        self.labels += 1;
        format!("'{prefix}{}", self.labels)
    }
}

pub struct NaiveTranspiler<'m> {
    env: ConstEnv,
    typedefs: HashMap<String, CType>,
    records: HashMap<String, Vec<Field>>,
    globals: HashMap<String, CType>,
    functions: HashMap<String, FnType>,
    float_consts: HashMap<String, CType>,
    _module: &'m ModuleIR,
}

impl<'m> NaiveTranspiler<'m> {
    pub fn new(module: &'m ModuleIR) -> Self {
        let env = const_env(module);
        let mut t = NaiveTranspiler {
            env,
            typedefs: HashMap::new(),
            records: HashMap::new(),
            globals: HashMap::new(),
            functions: HashMap::new(),
            float_consts: HashMap::new(),
            _module: module,
        };
        for d in &module.decls {
            match &d.item {
                TopLevelKind::Typedef { name, ty } => {
                    if let CType::Base {
                        base: BaseType::Struct(r) | BaseType::Union(r),
                        ..
                    } = ty
                    {
                        if let (None, Some(fs)) = (&r.tag, &r.fields) {
                            t.records.insert(name.clone(), fs.clone());
                            continue;
                        }
                    }
                    t.typedefs.insert(name.clone(), ty.clone());
                }
                TopLevelKind::Record {
                    ty:
                        CType::Base {
                            base: BaseType::Struct(r) | BaseType::Union(r),
                            ..
                        },
                } => {
                    if let (Some(tag), Some(fs)) = (&r.tag, &r.fields) {
                        t.records.insert(tag.clone(), fs.clone());
                    }
                }
                TopLevelKind::Variable { name, ty, .. } => {
                    t.globals.insert(name.clone(), ty.clone());
                }
                TopLevelKind::Prototype { name, fn_type, .. } => {
                    t.functions.entry(name.clone()).or_insert_with(|| fn_type.clone());
                }
                TopLevelKind::Macro(MacroDef {
                    name,
                    params: None,
                    body,
                }) if t.env.get(name).is_none() => {
                    let lower = body.trim().trim_matches(['(', ')']).to_ascii_lowercase();
                    if lower.parse::<f64>().is_ok() || lower.trim_end_matches(['f', 'l']).parse::<f64>().is_ok() {
                        t.float_consts.insert(name.clone(), CType::base(BaseType::Double));
                    }
                }
                _ => {}
            }
        }
        for def in &module.defs {
            t.functions.insert(
                def.name.clone(),
                FnType {
                    ret: def.ret.clone(),
                    params: def.params.clone(),
                    variadic: def.variadic,
                },
            );
        }
        t
    }

    /// Expands typedef names down to a structural type.
    fn resolve(&self, ty: &CType) -> CType {
        let mut cur = ty.clone();
        for _ in 0..32 {
            match &cur {
                CType::Base {
                    base: BaseType::Named(n),
                    is_const,
                } if builtin_typedef(n).is_none() => match self.typedefs.get(n) {
                    Some(t) => {
                        let mut t = t.clone();
                        if *is_const {
                            if let CType::Base { is_const, .. } = &mut t {
                                *is_const = true;
                            }
                        }
                        cur = t;
                    }
                    None => return cur,
                },
                _ => return cur,
            }
        }
        cur
    }

    /// Rust spelling of the resolved type, used for classification and casts.
    fn prim(&self, ty: &CType) -> String {
        match self.resolve(ty) {
            CType::Base {
                base: BaseType::Enum(_),
                ..
            } => "i32".into(),
            r => rust_type(&r, &self.env),
        }
    }

    fn decl_type(&self, ty: &CType) -> String {
        rust_type(ty, &self.env)
    }

    fn pointee(&self, ty: &CType) -> Option<CType> {
        match self.resolve(ty) {
            CType::Pointer { pointee, .. } => Some(*pointee),
            CType::Array { elem, .. } => Some(*elem),
            _ => None,
        }
    }

    fn fields_of(&self, ty: &CType) -> Result<&Vec<Field>> {
        let key = match self.resolve(ty) {
            CType::Base {
                base: BaseType::Struct(r) | BaseType::Union(r),
                ..
            } => r.tag.clone(),
            CType::Base {
                base: BaseType::Named(n),
                ..
            } => Some(n),
            _ => None,
        };
        key.and_then(|k| self.records.get(&k))
            .ok_or_else(|| unsupported("member access on a type without known fields"))
    }

    fn is_array(&self, ty: &CType) -> bool {
        matches!(self.resolve(ty), CType::Array { .. })
    }

    /// Converts `ex` to type `to`, inserting the casts C would apply implicitly.
    fn coerce(&self, ex: &Ex, to: &CType) -> String {
        let from = self.prim(&ex.ty);
        let to_p = self.prim(to);
        if self.is_array(&ex.ty) {
            return format!("core::ptr::addr_of_mut!({}) as {to_p}", ex.text);
        }
        if from == to_p {
            return ex.text.clone();
        }
        if to_p == "bool" {
            return if is_ptr(&from) {
                format!("!({}).is_null()", ex.text)
            } else if is_float(&from) {
                format!("({} != 0.0)", ex.text)
            } else {
                format!("({} != 0)", ex.text)
            };
        }
        if is_ptr(&to_p) {
            return if is_ptr(&from) {
                format!("({}) as {to_p}", ex.text)
            } else if ex.int_lit {
                format!("{} as {to_p}", ex.text)
            } else {
                format!("({}) as usize as {to_p}", ex.text)
            };
        }
        if ex.int_lit && int_bits(&to_p).is_some() {
            if ex.text.starts_with('-') && unsigned_of(&to_p).is_some() {
                return format!("({}) as {to_p}", ex.text);
            }
            return ex.text.clone();
        }
        if ex.int_lit && is_float(&to_p) {
            return format!("{}.0", ex.text);
        }
        if from == "bool" && is_float(&to_p) {
            return format!("({}) as i32 as {to_p}", ex.text);
        }
        if is_ptr(&from) && int_bits(&to_p).is_some() {
            return format!("({}) as usize as {to_p}", ex.text);
        }
        if (int_bits(&from).is_some() || is_float(&from) || from == "bool")
            && (int_bits(&to_p).is_some() || is_float(&to_p))
        {
            return format!("({}) as {to_p}", ex.text);
        }
        ex.text.clone()
    }

    fn cond(&self, e: &Expr, st: &mut FnState) -> Result<String> {
        let ex = self.expr(e, st)?;
        Ok(self.coerce(&ex, &CType::base(BaseType::Bool)))
    }

    fn lvalue(&self, e: &Expr, st: &mut FnState) -> Result<Ex> {
        match e {
            Expr::Ident(_) | Expr::Member { .. } | Expr::Index { .. } | Expr::Unary { op: UnaryOp::Deref, .. } => {
                self.expr(e, st)
            }
            _ => Err(unsupported("assignment to a non-lvalue expression")),
        }
    }

    fn assign(&self, op: Option<BinaryOp>, lhs: &Expr, rhs: &Expr, st: &mut FnState) -> Result<(String, Ex)> {
        let l = self.lvalue(lhs, st)?;
        let value = match op {
            None => self.expr(rhs, st)?,
            Some(op) => self.binary(op, lhs, rhs, st)?,
        };
        Ok((format!("{} = {}", l.text, self.coerce(&value, &l.ty)), l))
    }

    fn step(&self, target: &Expr, delta: i32, st: &mut FnState) -> Result<(String, Ex)> {
        let l = self.lvalue(target, st)?;
        let p = self.prim(&l.ty);
        let text = if is_ptr(&p) {
            format!("{0} = {0}.offset({delta})", l.text)
        } else if is_float(&p) {
            format!("{} {}= 1.0", l.text, if delta > 0 { "+" } else { "-" })
        } else {
            format!("{} {}= 1", l.text, if delta > 0 { "+" } else { "-" })
        };
        Ok((text, l))
    }

    fn binary(&self, op: BinaryOp, lhs: &Expr, rhs: &Expr, st: &mut FnState) -> Result<Ex> {
        use BinaryOp::*;
        if op.is_logical() {
            let a = self.cond(lhs, st)?;
            let b = self.cond(rhs, st)?;
            return Ok(Ex::new(
                format!("({a} {} {b})", op.symbol()),
                CType::base(BaseType::Bool),
            ));
        }
        let a = self.expr(lhs, st)?;
        let b = self.expr(rhs, st)?;
        let (ap, bp) = (self.prim(&a.ty), self.prim(&b.ty));
        let a_ptr = is_ptr(&ap) || self.is_array(&a.ty);
        let b_ptr = is_ptr(&bp) || self.is_array(&b.ty);
        if a_ptr || b_ptr {
            let isize_ty = CType::base(BaseType::Named("ssize_t".into()));
            return match (op, a_ptr, b_ptr) {
                (Add, true, false) | (Sub, true, false) => {
                    let base_ty = self.decay(&a.ty);
                    let off = self.coerce(&b, &isize_ty);
                    let off = if op == Sub { format!("-({off})") } else { off };
                    Ok(Ex::new(
                        format!("({}).offset({off})", self.coerce(&a, &base_ty)),
                        base_ty,
                    ))
                }
                (Add, false, true) => {
                    let base_ty = self.decay(&b.ty);
                    Ok(Ex::new(
                        format!("({}).offset({})", self.coerce(&b, &base_ty), self.coerce(&a, &isize_ty)),
                        base_ty,
                    ))
                }
                (Sub, true, true) => Ok(Ex::new(
                    format!(
                        "({}).offset_from({}) as i64",
                        self.coerce(&a, &self.decay(&a.ty)),
                        self.coerce(&b, &self.decay(&a.ty))
                    ),
                    CType::base(BaseType::Long { unsigned: false }),
                )),
                (o, _, _) if o.is_comparison() => {
                    let (x, y) = if a_ptr {
                        let t = self.decay(&a.ty);
                        (self.coerce(&a, &t), self.coerce(&b, &t))
                    } else {
                        let t = self.decay(&b.ty);
                        (self.coerce(&a, &t), self.coerce(&b, &t))
                    };
                    Ok(Ex::new(
                        format!("({x} {} {y})", o.symbol()),
                        CType::base(BaseType::Bool),
                    ))
                }
                _ => Err(unsupported(format!("pointer operand to `{}`", op.symbol()))),
            };
        }
        match op {
            Shl | Shr => {
                let t = ctype_of_prim(&promote(&ap));
                let rhs = if b.int_lit {
                    b.text.clone()
                } else {
                    format!("({}) as u32", b.text)
                };
                Ok(Ex::new(format!("({} {} {rhs})", self.coerce(&a, &t), op.symbol()), t))
            }
            o if o.is_comparison() => {
                let t = ctype_of_prim(&common(&ap, &bp));
                Ok(Ex::new(
                    format!("({} {} {})", self.coerce(&a, &t), o.symbol(), self.coerce(&b, &t)),
                    CType::base(BaseType::Bool),
                ))
            }
            _ => {
                if a.int_lit && b.int_lit {
                    if let Some(v) = eval_const(
                        &Expr::Binary {
                            op,
                            lhs: Box::new(lhs.clone()),
                            rhs: Box::new(rhs.clone()),
                        },
                        &self.env,
                    ) {
                        if i32::try_from(v).is_ok() {
                            return Ok(Ex {
                                text: format!("({v})"),
                                ty: CType::int(),
                                int_lit: true,
                            });
                        }
                    }
                }
                let t = ctype_of_prim(&common(&ap, &bp));
                Ok(Ex::new(
                    format!("({} {} {})", self.coerce(&a, &t), op.symbol(), self.coerce(&b, &t)),
                    t,
                ))
            }
        }
    }

    /// Array types decay to pointers to their element.
    fn decay(&self, ty: &CType) -> CType {
        match self.resolve(ty) {
            CType::Array { elem, .. } => CType::Pointer {
                pointee: elem,
                is_const: false,
            },
            _ => ty.clone(),
        }
    }

    fn expr(&self, e: &Expr, st: &mut FnState) -> Result<Ex> {
        Ok(match e {
            Expr::Ident(n) if n == "NULL" && st.lookup(n).is_none() => Ex::new(
                "core::ptr::null_mut::<core::ffi::c_void>()",
                CType::Pointer {
                    pointee: Box::new(CType::base(BaseType::Void)),
                    is_const: false,
                },
            ),
            Expr::Ident(n) => {
                let ty = if let Some(t) = st.lookup(n) {
                    t.clone()
                } else if let Some(t) = self.globals.get(n) {
                    t.clone()
                } else if let Some(v) = self.env.get(n) {
                    let ty = if i32::try_from(v).is_ok() {
                        CType::int()
                    } else if v < 0 || i64::try_from(v).is_ok() {
                        CType::base(BaseType::Long { unsigned: false })
                    } else {
                        CType::base(BaseType::Long { unsigned: true })
                    };
                    return Ok(Ex {
                        text: rust_ident(n),
                        ty,
                        int_lit: false,
                    });
                } else if let Some(t) = self.float_consts.get(n) {
                    t.clone()
                } else {
                    return Err(unsupported(format!("identifier `{n}` has no known declaration")));
                };
                Ex::new(rust_ident(n), ty)
            }
            Expr::IntLit(t) => {
                let (v, unsigned) = int_literal(t).ok_or_else(|| unsupported(format!("literal {t}")))?;
                let long = t.to_ascii_lowercase().contains('l');
                let ty = match (unsigned, long) {
                    (false, false) if i32::try_from(v).is_ok() => CType::int(),
                    (true, false) if u32::try_from(v).is_ok() => CType::base(BaseType::Int { unsigned: true }),
                    (false, _) if i64::try_from(v).is_ok() => CType::base(BaseType::Long { unsigned: false }),
                    _ => CType::base(BaseType::Long { unsigned: true }),
                };
                Ex {
                    text: v.to_string(),
                    ty,
                    int_lit: true,
                }
            }
            Expr::CharLit(t) => {
                let v = char_literal(t).ok_or_else(|| unsupported(format!("character literal {t}")))?;
                Ex {
                    text: v.to_string(),
                    ty: CType::int(),
                    int_lit: true,
                }
            }
            Expr::FloatLit(t) => {
                let (text, ty) = float_text(t);
                Ex::new(text, ctype_of_prim(ty))
            }
            Expr::StrLit(s) => Ex::new(
                format!("b\"{}\\0\".as_ptr() as *mut i8", byte_string(s)?),
                CType::Pointer {
                    pointee: Box::new(CType::base(BaseType::Char(None))),
                    is_const: false,
                },
            ),
            Expr::Call { callee, args } => {
                let Expr::Ident(name) = &**callee else {
                    return Err(unsupported("call through an expression"));
                };
                if st.lookup(name).is_some() {
                    return Err(unsupported(format!("call through function pointer `{name}`")));
                }
                let ft = self
                    .functions
                    .get(name)
                    .ok_or_else(|| unsupported(format!("call to undeclared function `{name}`")))?;
                let mut parts = Vec::new();
                for (i, a) in args.iter().enumerate() {
                    let ex = self.expr(a, st)?;
                    parts.push(match ft.params.get(i) {
                        Some(p) => self.coerce(&ex, &self.decay(&p.ty)),
                        None if ft.variadic => {
                            let p = self.prim(&ex.ty);
                            let promoted = if p == "f32" { "f64".to_string() } else { promote(&p) };
                            if ex.int_lit {
                                format!("({}) as {promoted}", ex.text)
                            } else {
                                self.coerce(&ex, &ctype_of_prim(&promoted))
                            }
                        }
                        None => return Err(unsupported(format!("too many arguments to `{name}`"))),
                    });
                }
                Ex::new(format!("{}({})", rust_ident(name), parts.join(", ")), ft.ret.clone())
            }
            Expr::Member { base, field, arrow } => {
                let b = self.expr(base, st)?;
                let (text, rec_ty) = if *arrow {
                    let p = self
                        .pointee(&b.ty)
                        .ok_or_else(|| unsupported("`->` on a non-pointer"))?;
                    (format!("(*{})", b.text), p)
                } else {
                    (b.text.clone(), b.ty.clone())
                };
                let f = self
                    .fields_of(&rec_ty)?
                    .iter()
                    .find(|f| f.name == *field)
                    .ok_or_else(|| unsupported(format!("unknown field `{field}`")))?;
                Ex::new(format!("{text}.{}", rust_ident(field)), f.ty.clone())
            }
            Expr::Index { base, index } => {
                let b = self.expr(base, st)?;
                let i = self.expr(index, st)?;
                match self.resolve(&b.ty) {
                    CType::Array { elem, .. } => {
                        let idx = self.coerce(&i, &CType::base(BaseType::Named("size_t".into())));
                        Ex::new(format!("{}[{idx}]", b.text), *elem)
                    }
                    CType::Pointer { pointee, .. } => {
                        let idx = self.coerce(&i, &CType::base(BaseType::Named("ssize_t".into())));
                        Ex::new(format!("(*{}.offset({idx}))", b.text), *pointee)
                    }
                    _ => return Err(unsupported("indexing a non-pointer")),
                }
            }
            Expr::Unary { op, expr } => match op {
                UnaryOp::Neg | UnaryOp::Plus | UnaryOp::BitNot => {
                    let x = self.expr(expr, st)?;
                    let p = promote(&self.prim(&x.ty));
                    let t = ctype_of_prim(&p);
                    let inner = self.coerce(&x, &t);
                    match op {
                        UnaryOp::Neg if x.int_lit => Ex {
                            text: format!("-{}", x.text),
                            ty: x.ty,
                            int_lit: true,
                        },
                        UnaryOp::Neg if unsigned_of(&p).is_some() => Ex::new(format!("({inner}).wrapping_neg()"), t),
                        UnaryOp::Neg => Ex::new(format!("-({inner})"), t),
                        UnaryOp::Plus => Ex::new(inner, t),
                        _ => Ex::new(format!("!({inner})"), t),
                    }
                }
                UnaryOp::Not => Ex::new(format!("!{}", self.cond(expr, st)?), CType::base(BaseType::Bool)),
                UnaryOp::Deref => {
                    let x = self.expr(expr, st)?;
                    let p = self
                        .pointee(&x.ty)
                        .ok_or_else(|| unsupported("dereference of a non-pointer"))?;
                    if p.is_void() {
                        return Err(unsupported("dereference of void pointer"));
                    }
                    let base = if self.is_array(&x.ty) {
                        format!("{}[0]", x.text)
                    } else {
                        format!("(*{})", x.text)
                    };
                    return Ok(Ex::new(base, p));
                }
                UnaryOp::AddrOf => {
                    let x = self.lvalue(expr, st)?;
                    let ty = CType::Pointer {
                        pointee: Box::new(x.ty.clone()),
                        is_const: false,
                    };
                    Ex::new(format!("core::ptr::addr_of_mut!({})", x.text), ty)
                }
                UnaryOp::PreInc | UnaryOp::PreDec => {
                    let (s, l) = self.step(expr, if *op == UnaryOp::PreInc { 1 } else { -1 }, st)?;
                    Ex::new(format!("{{ {s}; {} }}", l.text), l.ty)
                }
            },
            Expr::PostInc(x) | Expr::PostDec(x) => {
                let (s, l) = self.step(x, if matches!(e, Expr::PostInc(_)) { 1 } else { -1 }, st)?;
                Ex::new(format!("{{ let __t = {}; {s}; __t }}", l.text), l.ty)
            }
            Expr::Binary { op, lhs, rhs } => self.binary(*op, lhs, rhs, st)?,
            Expr::Assign { op, lhs, rhs } => {
                let (s, l) = self.assign(*op, lhs, rhs, st)?;
                Ex::new(format!("{{ {s}; {} }}", l.text), l.ty)
            }
            Expr::Ternary { cond, then, els } => {
                let c = self.cond(cond, st)?;
                let a = self.expr(then, st)?;
                let b = self.expr(els, st)?;
                let (ap, bp) = (self.prim(&a.ty), self.prim(&b.ty));
                let t = if is_ptr(&ap) || ap == bp || self.is_array(&a.ty) {
                    self.decay(&a.ty)
                } else if is_ptr(&bp) {
                    b.ty.clone()
                } else {
                    ctype_of_prim(&common(&ap, &bp))
                };
                Ex::new(
                    format!(
                        "(if {c} {{ {} }} else {{ {} }})",
                        self.coerce(&a, &t),
                        self.coerce(&b, &t)
                    ),
                    t,
                )
            }
            Expr::Cast { ty, expr } => {
                let x = self.expr(expr, st)?;
                if ty.is_void() {
                    return Ok(Ex::new(format!("{{ let _ = {}; }}", x.text), ty.clone()));
                }
                if matches!(
                    self.resolve(ty),
                    CType::Base {
                        base: BaseType::Struct(_) | BaseType::Union(_),
                        ..
                    }
                ) {
                    return Err(unsupported("cast to a record type"));
                }
                let text = self.coerce(&Ex { int_lit: false, ..x }, ty);
                Ex::new(format!("({text})"), ty.clone())
            }
            Expr::SizeofType(t) => Ex::new(
                format!("core::mem::size_of::<{}>()", self.decl_type(t)),
                CType::base(BaseType::Named("size_t".into())),
            ),
            Expr::SizeofExpr(x) => {
                let x = self.expr(x, st)?;
                Ex::new(
                    format!("core::mem::size_of::<{}>()", self.decl_type(&x.ty)),
                    CType::base(BaseType::Named("size_t".into())),
                )
            }
            Expr::Comma(items) => {
                let mut parts = Vec::new();
                let mut last = None;
                for (i, it) in items.iter().enumerate() {
                    if i + 1 == items.len() {
                        last = Some(self.expr(it, st)?);
                    } else {
                        parts.push(self.expr_stmt(it, st)?);
                    }
                }
                let last = last.ok_or_else(|| unsupported("empty comma expression"))?;
                Ex::new(format!("{{ {} {} }}", parts.join(" "), last.text), last.ty)
            }
            Expr::InitList(_) | Expr::CompoundLiteral { .. } => {
                return Err(unsupported("initializer list outside a declaration"))
            }
        })
    }

    /// An expression used as a statement, with trailing `;`.
    fn expr_stmt(&self, e: &Expr, st: &mut FnState) -> Result<String> {
        Ok(match e {
            Expr::Assign { op, lhs, rhs } => format!("{};", self.assign(*op, lhs, rhs, st)?.0),
            Expr::PostInc(x)
            | Expr::Unary {
                op: UnaryOp::PreInc,
                expr: x,
            } => format!("{};", self.step(x, 1, st)?.0),
            Expr::PostDec(x)
            | Expr::Unary {
                op: UnaryOp::PreDec,
                expr: x,
            } => format!("{};", self.step(x, -1, st)?.0),
            Expr::Call { .. } => format!("{};", self.expr(e, st)?.text),
            Expr::Cast { ty, expr } if ty.is_void() => format!("let _ = {};", self.expr(expr, st)?.text),
            Expr::Comma(items) => {
                let mut out = Vec::new();
                for it in items {
                    out.push(self.expr_stmt(it, st)?);
                }
                out.join(" ")
            }
            _ => format!("let _ = {};", self.expr(e, st)?.text),
        })
    }

    fn init_value(&self, ty: &CType, init: &Expr, st: &mut FnState) -> Result<String> {
        let r = self.resolve(ty);
        match (init, &r) {
            (Expr::InitList(items), CType::Array { elem, len }) => {
                let n = len
                    .as_deref()
                    .and_then(|l| eval_const(l, &self.env))
                    .map(|n| n as usize)
                    .unwrap_or(items.len());
                if items.len() > n {
                    return Err(unsupported("too many array initializers"));
                }
                let mut parts = Vec::new();
                for it in items {
                    parts.push(self.init_value(elem, it, st)?);
                }
                for _ in items.len()..n {
                    parts.push("core::mem::zeroed()".into());
                }
                Ok(format!("[{}]", parts.join(", ")))
            }
            (Expr::StrLit(s), CType::Array { elem, len }) => {
                let bytes = unescape_bytes(&byte_string(s)?);
                let n = len
                    .as_deref()
                    .and_then(|l| eval_const(l, &self.env))
                    .map(|n| n as usize)
                    .unwrap_or(bytes.len() + 1);
                let et = self.prim(elem);
                let mut parts: Vec<String> = bytes.iter().take(n).map(|b| format!("{b}_u8 as {et}")).collect();
                parts.resize(n, "0".into());
                Ok(format!("[{}]", parts.join(", ")))
            }
            (Expr::InitList(items), CType::Base { .. }) if self.fields_of(&r).is_ok() => {
                let fields = self.fields_of(&r)?.clone();
                let mut s = format!("{{ let mut __v: {} = core::mem::zeroed();", self.decl_type(ty));
                for (f, it) in fields.iter().zip(items) {
                    s.push_str(&format!(
                        " __v.{} = {};",
                        rust_ident(&f.name),
                        self.init_value(&f.ty, it, st)?
                    ));
                }
                s.push_str(" __v }");
                Ok(s)
            }
            (Expr::InitList(items), _) if items.len() == 1 => self.init_value(ty, &items[0], st),
            (Expr::InitList(_), _) => Err(unsupported("initializer list for a scalar")),
            _ => {
                let ex = self.expr(init, st)?;
                Ok(self.coerce(&ex, ty))
            }
        }
    }

    fn block(&self, body: &Stmt, st: &mut FnState, out: &mut Vec<String>, ind: usize) -> Result<()> {
        st.scopes.push(HashMap::new());
        let r = match body {
            Stmt::Compound(items) => items.iter().try_for_each(|s| self.stmt(s, st, out, ind)),
            other => self.stmt(other, st, out, ind),
        };
        st.scopes.pop();
        r
    }

    fn stmt(&self, s: &Stmt, st: &mut FnState, out: &mut Vec<String>, ind: usize) -> Result<()> {
        let pad = "    ".repeat(ind);
        match s {
            Stmt::Empty => {}
            Stmt::Expr(e) => out.push(format!("{pad}{}", self.expr_stmt(e, st)?)),
            Stmt::Decl(ds) => {
                for d in ds {
                    if d.is_static {
                        return Err(unsupported(format!("static local `{}`", d.name)));
                    }
                    let mut ty = d.ty.clone();
                    if let (CType::Array { elem, len: None }, Some(init)) = (&d.ty, &d.init) {
                        let n = match init {
                            Expr::InitList(items) => items.len(),
                            Expr::StrLit(s) => unescape_bytes(&byte_string(s)?).len() + 1,
                            _ => return Err(unsupported("unsized array without initializer list")),
                        };
                        ty = CType::Array {
                            elem: elem.clone(),
                            len: Some(Box::new(Expr::IntLit(n.to_string()))),
                        };
                    }
                    let value = match &d.init {
                        Some(init) => self.init_value(&ty, init, st)?,
                        None => "core::mem::zeroed()".into(),
                    };
                    out.push(format!(
                        "{pad}let mut {}: {} = {value};",
                        rust_ident(&d.name),
                        self.decl_type(&ty)
                    ));
                    st.scopes.last_mut().expect("scope").insert(d.name.clone(), ty);
                }
            }
            Stmt::Compound(_) => {
                out.push(format!("{pad}{{"));
                self.block(s, st, out, ind + 1)?;
                out.push(format!("{pad}}}"));
            }
            Stmt::If { cond, then, els } => {
                out.push(format!("{pad}if {} {{", self.cond(cond, st)?));
                self.block(then, st, out, ind + 1)?;
                let mut els = els.as_deref();
                while let Some(e) = els {
                    if let Stmt::If { cond, then, els: next } = e {
                        out.push(format!("{pad}}} else if {} {{", self.cond(cond, st)?));
                        self.block(then, st, out, ind + 1)?;
                        els = next.as_deref();
                    } else {
                        out.push(format!("{pad}}} else {{"));
                        self.block(e, st, out, ind + 1)?;
                        els = None;
                    }
                }
                out.push(format!("{pad}}}"));
            }
            Stmt::While { cond, body } => {
                let l = st.label("l");
                out.push(format!("{pad}{l}: while {} {{", self.cond(cond, st)?));
                st.breaks.push(Flow::Break(l.clone()));
                st.continues.push((l, false));
                self.block(body, st, out, ind + 1)?;
                st.breaks.pop();
                st.continues.pop();
                out.push(format!("{pad}}}"));
            }
            Stmt::DoWhile { body, cond } => {
                let l = st.label("l");
                let c = st.label("c");
                out.push(format!("{pad}{l}: loop {{"));
                out.push(format!("{pad}    {c}: {{"));
                st.breaks.push(Flow::Break(l.clone()));
                st.continues.push((c.clone(), true));
                self.block(body, st, out, ind + 2)?;
                st.breaks.pop();
                st.continues.pop();
                out.push(format!("{pad}    }}"));
                out.push(format!("{pad}    if !{} {{", self.cond(cond, st)?));
                out.push(format!("{pad}        break {l};"));
                out.push(format!("{pad}    }}"));
                out.push(format!("{pad}}}"));
            }
            Stmt::For { init, cond, step, body } => {
                out.push(format!("{pad}{{"));
                st.scopes.push(HashMap::new());
                if let Some(i) = init {
                    self.stmt(i, st, out, ind + 1)?;
                }
                let l = st.label("l");
                let c = st.label("c");
                out.push(format!("{pad}    {l}: loop {{"));
                if let Some(cond) = cond {
                    out.push(format!("{pad}        if !{} {{", self.cond(cond, st)?));
                    out.push(format!("{pad}            break {l};"));
                    out.push(format!("{pad}        }}"));
                }
                out.push(format!("{pad}        {c}: {{"));
                st.breaks.push(Flow::Break(l.clone()));
                st.continues.push((c, true));
                self.block(body, st, out, ind + 3)?;
                st.breaks.pop();
                st.continues.pop();
                out.push(format!("{pad}        }}"));
                if let Some(step) = step {
                    out.push(format!("{pad}        {}", self.expr_stmt(step, st)?));
                }
                out.push(format!("{pad}    }}"));
                st.scopes.pop();
                out.push(format!("{pad}}}"));
            }
            Stmt::Switch { expr, body } => self.switch(expr, body, st, out, ind)?,
            Stmt::Case { .. } | Stmt::Default(_) => return Err(unsupported("case label outside a switch")),
            Stmt::Break => match st.breaks.last() {
                Some(Flow::Break(l)) => out.push(format!("{pad}break {l};")),
                None => return Err(unsupported("break outside a loop or switch")),
            },
            Stmt::Continue => match st.continues.last() {
                Some((l, true)) => out.push(format!("{pad}break {l};")),
                Some((l, false)) => out.push(format!("{pad}continue {l};")),
                None => return Err(unsupported("continue outside a loop")),
            },
            Stmt::Return(None) => out.push(format!("{pad}return;")),
            Stmt::Return(Some(e)) => {
                let ret = st.lookup("\0ret").cloned().unwrap_or_else(CType::int);
                let ex = self.expr(e, st)?;
                out.push(format!("{pad}return {};", self.coerce(&ex, &ret)));
            }
            Stmt::Goto(_) | Stmt::Labeled { .. } => return Err(unsupported("goto and labels")),
        }
        Ok(())
    }

    fn switch(&self, expr: &Expr, body: &Stmt, st: &mut FnState, out: &mut Vec<String>, ind: usize) -> Result<()> {
        let pad = "    ".repeat(ind);
        let Stmt::Compound(items) = body else {
            return Err(unsupported("switch without a braced body"));
        };
        // Group consecutive labels that share one body.
        let mut groups: Vec<(Vec<Option<i128>>, Vec<Stmt>)> = Vec::new();
        let mut pending: Vec<Option<i128>> = Vec::new();
        for it in items {
            let (label, body) = match it {
                Stmt::Case { value, body } => (
                    Some(eval_const(value, &self.env).ok_or_else(|| unsupported("non-constant case label"))?),
                    body,
                ),
                Stmt::Default(body) => (None, body),
                _ => return Err(unsupported("statement before the first case label")),
            };
            pending.push(label);
            let stmts = match &**body {
                Stmt::Compound(v) => v.clone(),
                other => vec![other.clone()],
            };
            if !stmts.is_empty() {
                groups.push((std::mem::take(&mut pending), stmts));
            }
        }
        if !pending.is_empty() {
            groups.push((pending, Vec::new()));
        }
        let x = self.expr(expr, st)?;
        let t = ctype_of_prim(&promote(&self.prim(&x.ty)));
        let l = st.label("s");
        out.push(format!("{pad}{l}: {{"));
        out.push(format!("{pad}    match {} {{", self.coerce(&x, &t)));
        st.breaks.push(Flow::Break(l.clone()));
        let mut has_default = false;
        let n = groups.len();
        for (gi, (labels, stmts)) in groups.into_iter().enumerate() {
            let terminated = matches!(
                stmts.last(),
                Some(Stmt::Break | Stmt::Return(_) | Stmt::Continue | Stmt::Goto(_))
            );
            if !terminated && gi + 1 != n {
                st.breaks.pop();
                return Err(unsupported("switch case falls through"));
            }
            let pat = if labels.contains(&None) {
                has_default = true;
                "_".to_string()
            } else {
                labels
                    .iter()
                    .map(|v| v.unwrap().to_string())
                    .collect::<Vec<_>>()
                    .join(" | ")
            };
            out.push(format!("{pad}        {pat} => {{"));
            let body: Vec<Stmt> = match stmts.last() {
                Some(Stmt::Break) => stmts[..stmts.len() - 1].to_vec(),
                _ => stmts,
            };
            self.block(&Stmt::Compound(body), st, out, ind + 3)?;
            out.push(format!("{pad}        }}"));
        }
        st.breaks.pop();
        if !has_default {
            out.push(format!("{pad}        _ => {{}}"));
        }
        out.push(format!("{pad}    }}"));
        out.push(format!("{pad}}}"));
        Ok(())
    }

    /// Emits `pub fn name(..) -> R { unsafe { .. } }` for a definition.
    pub fn transpile(&self, def: &FunctionDef) -> Result<String> {
        if def.variadic {
            return Err(unsupported("variadic definition"));
        }
        let mut st = FnState::default();
        let mut scope = HashMap::new();
        let mut params = Vec::new();
        for (i, p) in def.params.iter().enumerate() {
            let name = p.name.clone().unwrap_or_else(|| format!("_arg{i}"));
            let ty = self.decay(&p.ty);
            params.push(format!("mut {}: {}", rust_ident(&name), self.decl_type(&ty)));
            scope.insert(name, ty);
        }
        scope.insert("\0ret".to_string(), def.ret.clone());
        st.scopes.push(scope);
        let mut body = Vec::new();
        for s in &def.body {
            self.stmt(s, &mut st, &mut body, 2)?;
        }
        let ret = if def.ret.is_void() {
            String::new()
        } else {
            if !matches!(def.body.last(), Some(Stmt::Return(_))) {
                body.push("        #[allow(unreachable_code)]".into());
                body.push("        return core::mem::zeroed();".into());
            }
            format!(" -> {}", self.decl_type(&def.ret))
        };
        let mut text = format!(
            "pub fn {}({}){ret} {{\n    unsafe {{\n",
            rust_ident(&def.name),
            params.join(", ")
        );
        for line in body {
            text.push_str(&line);
            text.push('\n');
        }
        text.push_str("    }\n}");
        Ok(text)
    }
}

fn unescape_bytes(rust_body: &str) -> Vec<u8> {
    let mut out = Vec::new();
    let b = rust_body.as_bytes();
    let mut i = 0;
    while i < b.len() {
        if b[i] == b'\\' && i + 1 < b.len() {
            let (v, adv) = match b[i + 1] {
                b'n' => (b'\n', 2),
                b't' => (b'\t', 2),
                b'r' => (b'\r', 2),
                b'0' => (0, 2),
                b'x' if i + 3 < b.len() => (
                    u8::from_str_radix(std::str::from_utf8(&b[i + 2..i + 4]).unwrap_or("00"), 16).unwrap_or(0),
                    4,
                ),
                c => (c, 2),
            };
            out.push(v);
            i += adv;
        } else {
            out.push(b[i]);
            i += 1;
        }
    }
    out
}

/// Transpiles every function of `module` the naive transpiler supports,
/// returning `id → Rust item`.
pub fn naive_fallbacks(module: &ModuleIR) -> std::collections::BTreeMap<String, String> {
    let t = NaiveTranspiler::new(module);
    module
        .functions
        .iter()
        .zip(&module.defs)
        .filter_map(|(f, d)| match t.transpile(d) {
            Ok(text) => Some((f.id.clone(), text)),
            Err(e) => {
                log::debug!("no naive fallback for {}: {e}", f.id);
                None
            }
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::c_frontend::module::{parse_sources, SourceFile};

    fn transpile(src: &str, name: &str) -> Result<String> {
        let m = parse_sources(vec![SourceFile::new("a.c", src)]).unwrap();
        let i = m.functions.iter().position(|f| f.name == name).unwrap();
        NaiveTranspiler::new(&m).transpile(&m.defs[i])
    }

    #[test]
    fn call_forwarding() {
        let out = transpile("int b(void);\nint a(void){return b();}", "a").unwrap();
        assert_eq!(out, "pub fn a() -> i32 {\n    unsafe {\n        return b();\n    }\n}");
        crate::rust_syntax::single_item(&out).unwrap();
    }

    #[test]
    fn rejects_goto_and_fallthrough() {
        assert!(matches!(
            transpile("int f(int x){ if (x) goto out; return 1; out: return 0; }", "f"),
            Err(Error::Unsupported(_))
        ));
        assert!(matches!(
            transpile(
                "int f(int x){ switch (x) { case 1: x++; case 2: return 2; } return 0; }",
                "f"
            ),
            Err(Error::Unsupported(_))
        ));
    }

    #[test]
    fn float_literals() {
        assert_eq!(float_text("1.").0, "1.0_f64");
        assert_eq!(float_text(".5f").0, "0.5_f32");
        assert_eq!(float_text("1e3").0, "1e3_f64");
    }

    #[test]
    fn arithmetic_conversions() {
        assert_eq!(common("i32", "u32"), "u32");
        assert_eq!(common("i64", "u32"), "i64");
        assert_eq!(common("u8", "i16"), "i32");
        assert_eq!(common("usize", "i32"), "usize");
        assert_eq!(common("f32", "i64"), "f32");
    }
}
