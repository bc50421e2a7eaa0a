use std::collections::HashMap;

/// Reserved words of the Rust grammar (plus macro fragment specifiers), which
/// get full weight in the weighted n-gram component; every other token gets 0.2.
pub const RUST_KEYWORDS: &[&str] = &[
    "as",
    "async",
    "await",
    "block",
    "bool",
    "break",
    "char",
    "const",
    "continue",
    "crate",
    "default",
    "dyn",
    "else",
    "enum",
    "expr",
    "extern",
    "f32",
    "f64",
    "false",
    "fn",
    "for",
    "i128",
    "i16",
    "i32",
    "i64",
    "i8",
    "ident",
    "if",
    "impl",
    "in",
    "isize",
    "item",
    "let",
    "lifetime",
    "literal",
    "loop",
    "macro_rules!",
    "match",
    "meta",
    "mod",
    "move",
    "mut",
    "pat",
    "path",
    "pub",
    "ref",
    "return",
    "self",
    "static",
    "stmt",
    "str",
    "struct",
    "super",
    "trait",
    "true",
    "tt",
    "ty",
    "type",
    "u128",
    "u16",
    "u32",
    "u64",
    "u8",
    "union",
    "unsafe",
    "use",
    "usize",
    "vis",
    "where",
    "while",
    "yield",
];

const MAX_N: usize = 4;
const EPSILON: f64 = 0.1;
const NON_KEYWORD_WEIGHT: f64 = 0.2;

/// N-gram counts in order of first occurrence.
struct Counts<'a> {
    order: Vec<(&'a [&'a str], usize)>,
    index: HashMap<&'a [&'a str], usize>,
}

impl<'a> Counts<'a> {
    fn new(tokens: &'a [&'a str], n: usize) -> Self {
        let mut c = Counts {
            order: Vec::new(),
            index: HashMap::new(),
        };
        if tokens.len() >= n {
            for g in tokens.windows(n) {
                match c.index.get(g) {
                    Some(&i) => c.order[i].1 += 1,
                    None => {
                        c.index.insert(g, c.order.len());
                        c.order.push((g, 1));
                    }
                }
            }
        }
        c
    }

    fn get(&self, g: &[&str]) -> usize {
        self.index.get(g).map_or(0, |&i| self.order[i].1)
    }

    fn total(&self) -> usize {
        self.order.iter().map(|(_, c)| c).sum()
    }
}

fn brevity_penalty(ref_len: usize, hyp_len: usize) -> f64 {
    if hyp_len > ref_len {
        1.0
    } else if hyp_len == 0 {
        0.0
    } else {
        (1.0 - ref_len as f64 / hyp_len as f64).exp()
    }
}

fn combine(p: &[(f64, f64); MAX_N], ref_len: usize, hyp_len: usize) -> f64 {
    if p[0].0 == 0.0 {
        return 0.0;
    }
    let bp = brevity_penalty(ref_len, hyp_len);
    let sum: f64 = p
        .iter()
        .map(|&(num, den)| {
            let num = if num == 0.0 { EPSILON } else { num };
            0.25 * (num / den).ln()
        })
        .sum();
    bp * sum.exp()
}

/// Sentence BLEU with uniform 1..4-gram weights, clipped precision and
/// epsilon smoothing of zero numerators.
pub fn bleu(reference: &[&str], hypothesis: &[&str]) -> f64 {
    let mut p = [(0.0, 0.0); MAX_N];
    for (i, slot) in p.iter_mut().enumerate() {
        let n = i + 1;
        let hyp = Counts::new(hypothesis, n);
        let refs = Counts::new(reference, n);
        let num: usize = hyp.order.iter().map(|(g, c)| (*c).min(refs.get(g))).sum();
        *slot = (num as f64, hyp.total().max(1) as f64);
    }
    combine(&p, reference.len(), hypothesis.len())
}

fn weight(token: &str) -> f64 {
    if RUST_KEYWORDS.contains(&token) {
        1.0
    } else {
        NON_KEYWORD_WEIGHT
    }
}

/// Reference length the weighted component feeds into the brevity penalty.
/// The reference implementation measures the (tokens, weights) pair it keeps
/// per reference rather than the token list, so this is always 2.
const WEIGHTED_REF_LEN: usize = 2;

/// BLEU variant built on clipped recall, with keyword-weighted unigrams.
pub fn weighted_bleu(reference: &[&str], hypothesis: &[&str]) -> f64 {
    let mut p = [(0.0, 0.0); MAX_N];
    for (i, slot) in p.iter_mut().enumerate() {
        let n = i + 1;
        let hyp = Counts::new(hypothesis, n);
        let refs = Counts::new(reference, n);
        *slot = if n == 1 {
            let mut num = 0.0;
            let mut den = 0.0;
            for (g, c) in &refs.order {
                let w = weight(g[0]);
                num += (*c).min(hyp.get(g)) as f64 * w;
                den += *c as f64 * w;
            }
            (num, den.max(1.0))
        } else {
            let num: usize = refs.order.iter().map(|(g, c)| (*c).min(hyp.get(g))).sum();
            (num as f64, refs.total().max(1) as f64)
        };
    }
    combine(&p, WEIGHTED_REF_LEN, hypothesis.len())
}
