//! Tokenizer for the supported C subset.
//!
//! Preprocessor directives are kept as single `Directive` tokens (with
//! backslash continuations folded in) so the parser can record macros and
//! includes while still seeing the rest of the file as ordinary tokens.

use std::fmt;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum TokenKind {
    Ident,
    Number,
    Str,
    Char,
    Punct,
    Directive,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Token {
    pub kind: TokenKind,
    pub text: String,
    /// Byte offset of the first byte.
    pub start: usize,
    /// Byte offset one past the last byte.
    pub end: usize,
    /// 1-based line of the first byte.
    pub line: u32,
}

impl Token {
    pub fn is_punct(&self, p: &str) -> bool {
        self.kind == TokenKind::Punct && self.text == p
    }

    pub fn is_ident(&self) -> bool {
        self.kind == TokenKind::Ident && !is_keyword(&self.text)
    }

    pub fn is_keyword(&self, kw: &str) -> bool {
        self.kind == TokenKind::Ident && self.text == kw
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct LexError {
    pub line: u32,
    pub message: String,
}

impl fmt::Display for LexError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "line {}: {}", self.line, self.message)
    }
}

pub const KEYWORDS: &[&str] = &[
    "auto",
    "break",
    "case",
    "char",
    "const",
    "continue",
    "default",
    "do",
    "double",
    "else",
    "enum",
    "extern",
    "float",
    "for",
    "goto",
    "if",
    "inline",
    "int",
    "long",
    "register",
    "restrict",
    "return",
    "short",
    "signed",
    "sizeof",
    "static",
    "struct",
    "switch",
    "typedef",
    "union",
    "unsigned",
    "void",
    "volatile",
    "while",
    "_Bool",
    "_Complex",
    "_Imaginary",
    "_Alignas",
    "_Alignof",
    "_Atomic",
    "_Generic",
    "_Noreturn",
    "_Static_assert",
    "_Thread_local",
    "__inline",
    "__inline__",
    "__restrict",
    "__volatile__",
    "__asm__",
    "asm",
    "__attribute__",
    "__extension__",
    "typeof",
    "__typeof__",
];

pub fn is_keyword(s: &str) -> bool {
    KEYWORDS.contains(&s)
}

const PUNCTS: &[&str] = &[
    "...", "<<=", ">>=", "->", "++", "--", "<<", ">>", "<=", ">=", "==", "!=", "&&", "||", "+=", "-=", "*=", "/=",
    "%=", "&=", "^=", "|=", "##", "+", "-", "*", "/", "%", "<", ">", "=", "!", "~", "&", "|", "^", "?", ":", ";", ",",
    ".", "(", ")", "[", "]", "{", "}", "#",
];

pub fn tokenize(src: &str) -> Result<Vec<Token>, LexError> {
    Lexer::new(src).run()
}

struct Lexer<'a> {
    src: &'a str,
    bytes: &'a [u8],
    pos: usize,
    line: u32,
    /// True while only whitespace/comments have been seen since the last newline.
    at_line_start: bool,
    out: Vec<Token>,
}

impl<'a> Lexer<'a> {
    fn new(src: &'a str) -> Self {
        Lexer {
            src,
            bytes: src.as_bytes(),
            pos: 0,
            line: 1,
            at_line_start: true,
            out: Vec::new(),
        }
    }

    fn err(&self, message: impl Into<String>) -> LexError {
        LexError {
            line: self.line,
            message: message.into(),
        }
    }

    fn peek_at(&self, off: usize) -> u8 {
        *self.bytes.get(self.pos + off).unwrap_or(&0)
    }

    fn advance(&mut self, n: usize) {
        for _ in 0..n {
            if self.pos < self.bytes.len() {
                if self.bytes[self.pos] == b'\n' {
                    self.line += 1;
                }
                self.pos += 1;
            }
        }
    }

    fn push(&mut self, kind: TokenKind, start: usize, line: u32) {
        self.out.push(Token {
            kind,
            text: self.src[start..self.pos].to_string(),
            start,
            end: self.pos,
            line,
        });
        self.at_line_start = false;
    }

    fn run(mut self) -> Result<Vec<Token>, LexError> {
        while self.pos < self.bytes.len() {
            let c = self.bytes[self.pos];
            match c {
                b'\n' => {
                    self.advance(1);
                    self.at_line_start = true;
                }
                b' ' | b'\t' | b'\r' | 0x0b | 0x0c => self.advance(1),
                b'\\' if self.peek_at(1) == b'\n' => self.advance(2),
                b'\\' if self.peek_at(1) == b'\r' && self.peek_at(2) == b'\n' => self.advance(3),
                b'/' if self.peek_at(1) == b'/' => self.line_comment(),
                b'/' if self.peek_at(1) == b'*' => self.block_comment()?,
                b'#' if self.at_line_start => self.directive()?,
                b'"' => self.quoted(b'"', TokenKind::Str)?,
                b'\'' => self.quoted(b'\'', TokenKind::Char)?,
                b'0'..=b'9' => self.number(),
                b'.' if self.peek_at(1).is_ascii_digit() => self.number(),
                c if c == b'_' || c.is_ascii_alphabetic() => self.ident(),
                _ => self.punct()?,
            }
        }
        Ok(self.out)
    }

    fn line_comment(&mut self) {
        while self.pos < self.bytes.len() && self.bytes[self.pos] != b'\n' {
            self.advance(1);
        }
    }

    fn block_comment(&mut self) -> Result<(), LexError> {
        let line = self.line;
        self.advance(2);
        loop {
            if self.pos >= self.bytes.len() {
                return Err(LexError {
                    line,
                    message: "unterminated block comment".into(),
                });
            }
            if self.bytes[self.pos] == b'*' && self.peek_at(1) == b'/' {
                self.advance(2);
                return Ok(());
            }
            self.advance(1);
        }
    }

    fn directive(&mut self) -> Result<(), LexError> {
        let start = self.pos;
        let line = self.line;
        while self.pos < self.bytes.len() {
            match self.bytes[self.pos] {
                b'\n' => break,
                b'\\' if self.peek_at(1) == b'\n' => self.advance(2),
                b'\\' if self.peek_at(1) == b'\r' && self.peek_at(2) == b'\n' => self.advance(3),
                b'/' if self.peek_at(1) == b'*' => self.block_comment()?,
                b'/' if self.peek_at(1) == b'/' => {
                    // Comment ends the directive; keep it out of the token text.
                    let end = self.pos;
                    self.line_comment();
                    self.out.push(Token {
                        kind: TokenKind::Directive,
                        text: self.src[start..end].trim_end().to_string(),
                        start,
                        end: start + self.src[start..end].trim_end().len(),
                        line,
                    });
                    self.at_line_start = false;
                    return Ok(());
                }
                _ => self.advance(1),
            }
        }
        let text = self.src[start..self.pos].trim_end();
        self.out.push(Token {
            kind: TokenKind::Directive,
            text: text.to_string(),
            start,
            end: start + text.len(),
            line,
        });
        self.at_line_start = false;
        Ok(())
    }

    fn quoted(&mut self, quote: u8, kind: TokenKind) -> Result<(), LexError> {
        let start = self.pos;
        let line = self.line;
        self.advance(1);
        loop {
            match self.bytes.get(self.pos) {
                None | Some(b'\n') => return Err(self.err("unterminated literal")),
                Some(b'\\') => self.advance(2),
                Some(&c) if c == quote => {
                    self.advance(1);
                    break;
                }
                Some(_) => self.advance(1),
            }
        }
        self.push(kind, start, line);
        Ok(())
    }

    fn number(&mut self) {
        let start = self.pos;
        let line = self.line;
        while self.pos < self.bytes.len() {
            let c = self.bytes[self.pos];
            let prev = if self.pos > start { self.bytes[self.pos - 1] } else { 0 };
            let is_hex = self.src[start..self.pos].starts_with("0x") || self.src[start..self.pos].starts_with("0X");
            let exponent_sign = (c == b'+' || c == b'-')
                && ((!is_hex && (prev == b'e' || prev == b'E')) || prev == b'p' || prev == b'P');
            if c.is_ascii_alphanumeric() || c == b'.' || c == b'_' || exponent_sign {
                self.advance(1);
            } else {
                break;
            }
        }
        self.push(TokenKind::Number, start, line);
    }

    fn ident(&mut self) {
        let start = self.pos;
        let line = self.line;
        // Wide/unicode prefixed literals: L"..", u8"..", U'..'
        let rest = &self.src[self.pos..];
        for prefix in ["u8\"", "L\"", "u\"", "U\"", "L'", "u'", "U'"] {
            if rest.starts_with(prefix) {
                let quote = prefix.as_bytes()[prefix.len() - 1];
                self.advance(prefix.len() - 1);
                let kind = if quote == b'"' { TokenKind::Str } else { TokenKind::Char };
                // Reuse the quoted scanner but keep the prefix in the token.
                let inner_start = self.pos;
                if self.quoted(quote, kind).is_ok() {
                    let tok = self.out.last_mut().expect("just pushed");
                    tok.start = start;
                    tok.line = line;
                    tok.text = self.src[start..self.pos].to_string();
                    return;
                }
                self.pos = inner_start;
                break;
            }
        }
        while self.pos < self.bytes.len()
            && (self.bytes[self.pos] == b'_' || self.bytes[self.pos].is_ascii_alphanumeric())
        {
            self.advance(1);
        }
        self.push(TokenKind::Ident, start, line);
    }

    fn punct(&mut self) -> Result<(), LexError> {
        let start = self.pos;
        let line = self.line;
        let rest = &self.src[self.pos..];
        for p in PUNCTS {
            if rest.starts_with(p) {
                self.advance(p.len());
                self.push(TokenKind::Punct, start, line);
                return Ok(());
            }
        }
        let ch = rest.chars().next().unwrap_or('?');
        Err(self.err(format!("unexpected character `{ch}`")))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn kinds(src: &str) -> Vec<(TokenKind, String)> {
        tokenize(src).unwrap().into_iter().map(|t| (t.kind, t.text)).collect()
    }

    #[test]
    fn directives_are_single_tokens() {
        let toks = tokenize("#define A(x) \\\n  ((x) + 1)\nint y;").unwrap();
        assert_eq!(toks[0].kind, TokenKind::Directive);
        assert!(toks[0].text.contains("((x) + 1)"));
        assert_eq!(toks[1].line, 3);
    }

    #[test]
    fn hash_inside_line_is_punct() {
        let k = kinds("a # b");
        assert_eq!(k[1], (TokenKind::Punct, "#".into()));
    }

    #[test]
    fn comments_are_skipped_and_lines_tracked() {
        let toks = tokenize("/* a\n b */ x // y\n z").unwrap();
        assert_eq!(toks.len(), 2);
        assert_eq!(toks[0].line, 2);
        assert_eq!(toks[1].line, 3);
    }

    #[test]
    fn numbers_with_exponents_and_suffixes() {
        let k = kinds("1e-5 0x1fUL 3.5f .5");
        let texts: Vec<_> = k.iter().map(|(_, t)| t.as_str()).collect();
        assert_eq!(texts, ["1e-5", "0x1fUL", "3.5f", ".5"]);
    }

    #[test]
    fn hex_minus_is_not_exponent() {
        let texts: Vec<_> = kinds("0xe-1").into_iter().map(|(_, t)| t).collect();
        assert_eq!(texts, ["0xe", "-", "1"]);
    }

    #[test]
    fn strings_and_prefixes() {
        let k = kinds(r#"L"wide" "a\"b" 'c' u8"x""#);
        assert_eq!(k[0], (TokenKind::Str, "L\"wide\"".into()));
        assert_eq!(k[1], (TokenKind::Str, "\"a\\\"b\"".into()));
        assert_eq!(k[2], (TokenKind::Char, "'c'".into()));
        assert_eq!(k[3], (TokenKind::Str, "u8\"x\"".into()));
    }

    #[test]
    fn longest_punct_match() {
        let texts: Vec<_> = kinds("a->b <<= c ... d").into_iter().map(|(_, t)| t).collect();
        assert_eq!(texts, ["a", "->", "b", "<<=", "c", "...", "d"]);
    }

    #[test]
    fn unterminated_string_is_error() {
        assert!(tokenize("\"abc\nx").is_err());
    }

    #[test]
    fn spans_slice_source() {
        let src = "int  main ( void )";
        for t in tokenize(src).unwrap() {
            assert_eq!(&src[t.start..t.end], t.text);
        }
    }
}
