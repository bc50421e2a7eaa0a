//! Mapping of C types and constant expressions onto Rust.

use std::collections::HashMap;

use crate::c_frontend::ast::*;

/// Known integer constants (object-like macros and enumerators).
#[derive(Debug, Clone, Default)]
pub struct ConstEnv {
    pub values: HashMap<String, i128>,
}

impl ConstEnv {
    pub fn get(&self, name: &str) -> Option<i128> {
        self.values.get(name).copied()
    }
}

/// Parses a C integer literal, returning its value and whether it carries a `u` suffix.
pub fn int_literal(text: &str) -> Option<(i128, bool)> {
    let lower = text.to_ascii_lowercase();
    let digits = lower.trim_end_matches(['u', 'l']);
    let unsigned = lower[digits.len()..].contains('u');
    let v = if let Some(hex) = digits.strip_prefix("0x") {
        i128::from_str_radix(hex, 16).ok()?
    } else if let Some(bin) = digits.strip_prefix("0b") {
        i128::from_str_radix(bin, 2).ok()?
    } else if digits.len() > 1 && digits.starts_with('0') {
        i128::from_str_radix(&digits[1..], 8).ok()?
    } else {
        digits.parse().ok()?
    };
    Some((v, unsigned))
}

/// Value of a C character literal such as `'a'`, `'\n'` or `'\x41'`.
pub fn char_literal(text: &str) -> Option<i128> {
    let inner = text.strip_prefix('\'')?.strip_suffix('\'')?;
    let mut chars = inner.chars();
    let c = chars.next()?;
    if c != '\\' {
        return (chars.next().is_none()).then_some(c as i128);
    }
    let rest: String = chars.collect();
    Some(match rest.as_str() {
        "n" => 10,
        "t" => 9,
        "r" => 13,
        "0" => 0,
        "\\" => 92,
        "'" => 39,
        "\"" => 34,
        "a" => 7,
        "b" => 8,
        "f" => 12,
        "v" => 11,
        "?" => 63,
        r if r.starts_with('x') => i128::from_str_radix(&r[1..], 16).ok()?,
        r if r.chars().all(|c| ('0'..='7').contains(&c)) => i128::from_str_radix(r, 8).ok()?,
        _ => return None,
    })
}

/// Evaluates an integer constant expression.
pub fn eval_const(e: &Expr, env: &ConstEnv) -> Option<i128> {
    Some(match e {
        Expr::IntLit(t) => int_literal(t)?.0,
        Expr::CharLit(t) => char_literal(t)?,
        Expr::Ident(n) => env.get(n)?,
        Expr::Cast { expr, .. } => eval_const(expr, env)?,
        Expr::Unary { op, expr } => {
            let v = eval_const(expr, env)?;
            match op {
                UnaryOp::Neg => -v,
                UnaryOp::Plus => v,
                UnaryOp::Not => (v == 0) as i128,
                UnaryOp::BitNot => !v,
                _ => return None,
            }
        }
        Expr::Binary { op, lhs, rhs } => {
            let a = eval_const(lhs, env)?;
            let b = eval_const(rhs, env)?;
            use BinaryOp::*;
            match op {
                Add => a.checked_add(b)?,
                Sub => a.checked_sub(b)?,
                Mul => a.checked_mul(b)?,
                Div => a.checked_div(b)?,
                Rem => a.checked_rem(b)?,
                Shl => a.checked_shl(u32::try_from(b).ok()?)?,
                Shr => a.checked_shr(u32::try_from(b).ok()?)?,
                Lt => (a < b) as i128,
                Gt => (a > b) as i128,
                Le => (a <= b) as i128,
                Ge => (a >= b) as i128,
                Eq => (a == b) as i128,
                Ne => (a != b) as i128,
                BitAnd => a & b,
                BitOr => a | b,
                BitXor => a ^ b,
                And => (a != 0 && b != 0) as i128,
                Or => (a != 0 || b != 0) as i128,
            }
        }
        Expr::Ternary { cond, then, els } => {
            if eval_const(cond, env)? != 0 {
                eval_const(then, env)?
            } else {
                eval_const(els, env)?
            }
        }
        _ => return None,
    })
}

/// Rust spelling of well-known C typedef names.
pub fn builtin_typedef(name: &str) -> Option<&'static str> {
    Some(match name {
        "size_t" | "uintptr_t" => "usize",
        "ssize_t" | "ptrdiff_t" | "intptr_t" | "loff_t" => "isize",
        "int8_t" | "s8" => "i8",
        "int16_t" | "s16" => "i16",
        "int32_t" | "s32" => "i32",
        "int64_t" | "s64" => "i64",
        "uint8_t" | "u8" => "u8",
        "uint16_t" | "u16" | "umode_t" => "u16",
        "uint32_t" | "u32" | "dev_t" | "gfp_t" => "u32",
        "uint64_t" | "u64" => "u64",
        "bool" => "bool",
        _ => return None,
    })
}

pub fn base_type(base: &BaseType) -> String {
    match base {
        BaseType::Void => "()".into(),
        BaseType::Char(Some(false)) => "u8".into(),
        BaseType::Char(_) => "i8".into(),
        BaseType::Short { unsigned } => if *unsigned { "u16" } else { "i16" }.into(),
        BaseType::Int { unsigned } => if *unsigned { "u32" } else { "i32" }.into(),
        BaseType::Long { unsigned } | BaseType::LongLong { unsigned } => if *unsigned { "u64" } else { "i64" }.into(),
        BaseType::Float => "f32".into(),
        BaseType::Double => "f64".into(),
        BaseType::Bool => "bool".into(),
        BaseType::Named(n) => builtin_typedef(n).map(str::to_string).unwrap_or_else(|| n.clone()),
        BaseType::Struct(r) | BaseType::Union(r) => r.tag.clone().unwrap_or_else(|| "__anon".into()),
        BaseType::Enum(e) => e.tag.clone().unwrap_or_else(|| "i32".into()),
    }
}

/// Rust type for a C type, in the raw-pointer style used for FFI.
pub fn rust_type(ty: &CType, env: &ConstEnv) -> String {
    match ty {
        CType::Base { base, .. } => base_type(base),
        CType::Pointer { pointee, .. } => {
            if let CType::Function(ft) = &**pointee {
                return fn_pointer(ft, env);
            }
            let is_const = matches!(**pointee, CType::Base { is_const: true, .. });
            let inner = if pointee.is_void() {
                "core::ffi::c_void".to_string()
            } else {
                rust_type(pointee, env)
            };
            format!("{} {inner}", if is_const { "*const" } else { "*mut" })
        }
        CType::Array { elem, len } => match len.as_deref().and_then(|l| eval_const(l, env)) {
            Some(n) => format!("[{}; {n}]", rust_type(elem, env)),
            None => format!("*mut {}", rust_type(elem, env)),
        },
        CType::Function(ft) => fn_pointer(ft, env),
    }
}

fn fn_pointer(ft: &FnType, env: &ConstEnv) -> String {
    let params: Vec<String> = ft.params.iter().map(|p| rust_type(&p.ty, env)).collect();
    let ret = if ft.ret.is_void() {
        String::new()
    } else {
        format!(" -> {}", rust_type(&ft.ret, env))
    };
    format!("Option<unsafe extern \"C\" fn({}){ret}>", params.join(", "))
}

/// Rust spelling of a C record or enum name as it appears in a symbol
/// (`struct foo` → `foo`).
pub fn rust_name(c_name: &str) -> &str {
    c_name
        .strip_prefix("struct ")
        .or_else(|| c_name.strip_prefix("union "))
        .or_else(|| c_name.strip_prefix("enum "))
        .unwrap_or(c_name)
}
