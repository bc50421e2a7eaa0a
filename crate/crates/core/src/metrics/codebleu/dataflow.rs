//! Data-flow extraction and matching.
//!
//! This mirrors the reference extractor closely, including behaviour that
//! looks surprising for Rust: a `function_item` contributes only flows from
//! the tokens of its parameter list into its name (the body is never
//! visited), and `for` bodies are walked once while `while`/`loop` bodies are
//! walked twice. Where the reference merges parent-name lists through an
//! unordered set, the first-occurrence order is kept here.

use std::collections::HashMap;

use tree_sitter::{Node, Point, Tree};

type Key = ((usize, usize), (usize, usize));
type States = HashMap<String, Vec<usize>>;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
enum Rel {
    ComesFrom,
    ComputedFrom,
}

#[derive(Debug, Clone)]
struct Flow {
    code: String,
    idx: usize,
    rel: Rel,
    parents: Vec<String>,
    parent_idx: Vec<usize>,
}

/// Extraction gave up; the reference treats the whole graph as empty then.
struct Abort;

const ASSIGNMENT: &[&str] = &["assignment_expression", "compound_assignment_expr", "let_expression"];
const IF_LIKE: &[&str] = &["if_expression", "if_let_expression", "match_expression", "else"];
const WHILE_LIKE: &[&str] = &["while_expression", "while_let_expression", "loop_expression"];

fn key(node: Node) -> Key {
    let p = |p: Point| (p.row, p.column);
    (p(node.start_position()), p(node.end_position()))
}

fn is_leaf(node: Node) -> bool {
    (node.child_count() == 0 || matches!(node.kind(), "string_literal" | "string" | "character_literal"))
        && node.kind() != "comment"
}

fn children(node: Node) -> Vec<Node> {
    let mut cursor = node.walk();
    node.children(&mut cursor).collect()
}

fn token_keys(node: Node, out: &mut Vec<Key>) {
    if is_leaf(node) {
        out.push(key(node));
    } else {
        for c in children(node) {
            token_keys(c, out);
        }
    }
}

/// Slices by column as a character index, which is what the reference does
/// with tree-sitter's byte columns.
fn slice(line: &[char], from: usize, to: usize) -> String {
    let to = to.min(line.len());
    let from = from.min(to);
    line[from..to].iter().collect()
}

fn token_text(k: Key, lines: &[Vec<char>]) -> String {
    let ((sr, sc), (er, ec)) = k;
    let empty = Vec::new();
    let line = |r: usize| lines.get(r).unwrap_or(&empty);
    if sr == er {
        return slice(line(sr), sc, ec);
    }
    let mut s = slice(line(sr), sc, usize::MAX);
    for r in sr + 1..er {
        s.extend(line(r).iter());
    }
    s + &slice(line(er), 0, ec)
}

struct Tokens {
    map: HashMap<Key, (usize, String)>,
}

impl Tokens {
    fn new(root: Node, code: &str) -> Self {
        let lines: Vec<Vec<char>> = code.split('\n').map(|l| l.chars().collect()).collect();
        let mut keys = Vec::new();
        token_keys(root, &mut keys);
        let map = keys
            .into_iter()
            .enumerate()
            .map(|(i, k)| (k, (i, token_text(k, &lines))))
            .collect();
        Tokens { map }
    }

    fn get(&self, node: Node) -> Result<&(usize, String), Abort> {
        self.map.get(&key(node)).ok_or(Abort)
    }

    /// Leaf tokens under `node` whose text differs from their node kind
    /// (identifiers, literals, primitive types; not keywords or punctuation).
    fn variables(&self, node: Node) -> Result<Vec<(usize, String)>, Abort> {
        let mut out = Vec::new();
        self.collect_variables(node, &mut out)?;
        Ok(out)
    }

    fn collect_variables(&self, node: Node, out: &mut Vec<(usize, String)>) -> Result<(), Abort> {
        if is_leaf(node) {
            let (idx, code) = self.get(node)?;
            if node.kind() != code {
                out.push((*idx, code.clone()));
            }
        } else {
            for c in children(node) {
                self.collect_variables(c, out)?;
            }
        }
        Ok(())
    }
}

fn sort_by_idx(flows: &mut [Flow]) {
    flows.sort_by_key(|f| f.idx);
}

fn union_names(a: &mut Vec<String>, b: &[String]) {
    let mut merged: Vec<String> = Vec::with_capacity(a.len() + b.len());
    for n in a.iter().chain(b) {
        if !merged.contains(n) {
            merged.push(n.clone());
        }
    }
    *a = merged;
}

fn union_sorted(a: &mut Vec<usize>, b: &[usize]) {
    a.extend_from_slice(b);
    a.sort_unstable();
    a.dedup();
}

/// Merges flows sharing (code, idx, relation), as done after loop bodies.
fn merge_loop_flows(flows: Vec<Flow>) -> Vec<Flow> {
    let mut merged: Vec<Flow> = Vec::new();
    let mut at: HashMap<(String, usize, Rel), usize> = HashMap::new();
    for f in flows {
        let k = (f.code.clone(), f.idx, f.rel);
        match at.get(&k) {
            Some(&i) => {
                union_names(&mut merged[i].parents, &f.parents);
                union_sorted(&mut merged[i].parent_idx, &f.parent_idx);
            }
            None => {
                at.insert(k, merged.len());
                merged.push(f);
            }
        }
    }
    sort_by_idx(&mut merged);
    merged
}

fn assign_flows(
    tokens: &Tokens,
    targets: Node,
    sources: Node,
    rel: Rel,
    states: &mut States,
    flows: &mut Vec<Flow>,
) -> Result<(), Abort> {
    let names = tokens.variables(targets)?;
    let values = tokens.variables(sources)?;
    for (idx1, code1) in names {
        for (idx2, code2) in &values {
            flows.push(Flow {
                code: code1.clone(),
                idx: idx1,
                rel,
                parents: vec![code2.clone()],
                parent_idx: vec![*idx2],
            });
        }
        states.insert(code1, vec![idx1]);
    }
    Ok(())
}

fn extract(node: Node, tokens: &Tokens, states: &States) -> Result<(Vec<Flow>, States), Abort> {
    let mut states = states.clone();
    let kind = node.kind();
    if is_leaf(node) {
        let (idx, code) = tokens.get(node)?;
        if kind == code {
            return Ok((Vec::new(), states));
        }
        if let Some(prev) = states.get(code) {
            let flow = Flow {
                code: code.clone(),
                idx: *idx,
                rel: Rel::ComesFrom,
                parents: vec![code.clone()],
                parent_idx: prev.clone(),
            };
            return Ok((vec![flow], states));
        }
        if kind == "identifier" {
            states.insert(code.clone(), vec![*idx]);
        }
        let flow = Flow {
            code: code.clone(),
            idx: *idx,
            rel: Rel::ComesFrom,
            parents: Vec::new(),
            parent_idx: Vec::new(),
        };
        return Ok((vec![flow], states));
    }

    let kids = children(node);
    if kind == "function_item" {
        let name = *kids.get(1).ok_or(Abort)?;
        let mut flows = Vec::new();
        match kids.get(2) {
            None => {
                for (idx, code) in tokens.variables(name)? {
                    flows.push(Flow {
                        code: code.clone(),
                        idx,
                        rel: Rel::ComesFrom,
                        parents: Vec::new(),
                        parent_idx: Vec::new(),
                    });
                    states.insert(code, vec![idx]);
                }
            }
            Some(&value) => {
                let (inner, s) = extract(value, tokens, &states)?;
                states = s;
                flows.extend(inner);
                assign_flows(tokens, name, value, Rel::ComesFrom, &mut states, &mut flows)?;
            }
        }
        sort_by_idx(&mut flows);
        return Ok((flows, states));
    }

    if ASSIGNMENT.contains(&kind) {
        let left = node.child_by_field_name("left").ok_or(Abort)?;
        let right = node.child_by_field_name("right").ok_or(Abort)?;
        let (mut flows, s) = extract(right, tokens, &states)?;
        states = s;
        assign_flows(tokens, left, right, Rel::ComputedFrom, &mut states, &mut flows)?;
        sort_by_idx(&mut flows);
        return Ok((flows, states));
    }

    if IF_LIKE.contains(&kind) {
        let mut flows = Vec::new();
        let mut current = states.clone();
        let mut others: Vec<States> = Vec::new();
        let mut branched = false;
        let mut has_else = kind.contains("else");
        for child in kids {
            if child.kind().contains("else") {
                has_else = true;
            }
            if !IF_LIKE.contains(&child.kind()) && !branched {
                let (f, s) = extract(child, tokens, &current)?;
                current = s;
                flows.extend(f);
            } else {
                branched = true;
                let (f, s) = extract(child, tokens, &states)?;
                flows.extend(f);
                others.push(s);
            }
        }
        others.push(current);
        if !has_else {
            others.push(states);
        }
        let mut merged: States = HashMap::new();
        for dict in others {
            for (k, v) in dict {
                merged.entry(k).or_default().extend(v);
            }
        }
        for v in merged.values_mut() {
            v.sort_unstable();
            v.dedup();
        }
        sort_by_idx(&mut flows);
        return Ok((flows, merged));
    }

    if kind == "for_expression" {
        let mut flows = Vec::new();
        for &child in &kids {
            let (f, s) = extract(child, tokens, &states)?;
            states = s;
            flows.extend(f);
        }
        // The second pass only starts after a `local_variable_declaration`
        // child, which the Rust grammar never produces.
        let mut after_decl = false;
        for &child in &kids {
            if after_decl {
                let (f, s) = extract(child, tokens, &states)?;
                states = s;
                flows.extend(f);
            } else if child.kind() == "local_variable_declaration" {
                after_decl = true;
            }
        }
        return Ok((merge_loop_flows(flows), states));
    }

    if WHILE_LIKE.contains(&kind) {
        let mut flows = Vec::new();
        for _ in 0..2 {
            for &child in &kids {
                let (f, s) = extract(child, tokens, &states)?;
                states = s;
                flows.extend(f);
            }
        }
        return Ok((merge_loop_flows(flows), states));
    }

    let mut flows = Vec::new();
    for child in kids {
        let (f, s) = extract(child, tokens, &states)?;
        states = s;
        flows.extend(f);
    }
    sort_by_idx(&mut flows);
    Ok((flows, states))
}

fn data_flow(tree: &Tree, code: &str) -> Vec<Flow> {
    let root = tree.root_node();
    let tokens = Tokens::new(root, code);
    let mut flows = match extract(root, &tokens, &HashMap::new()) {
        Ok((f, _)) => f,
        Err(Abort) => Vec::new(),
    };
    sort_by_idx(&mut flows);
    let mut linked = std::collections::HashSet::new();
    for f in &flows {
        if !f.parent_idx.is_empty() {
            linked.insert(f.idx);
        }
        linked.extend(f.parent_idx.iter().copied());
    }
    flows.retain(|f| linked.contains(&f.idx));

    let mut merged: Vec<Flow> = Vec::new();
    let mut at: HashMap<usize, usize> = HashMap::new();
    for f in flows {
        match at.get(&f.idx) {
            Some(&i) => {
                let prev = &mut merged[i];
                let mut parents = prev.parents.clone();
                union_names(&mut parents, &f.parents);
                let mut parent_idx = prev.parent_idx.clone();
                union_sorted(&mut parent_idx, &f.parent_idx);
                *prev = Flow {
                    parents,
                    parent_idx,
                    ..f
                };
            }
            None => {
                at.insert(f.idx, merged.len());
                merged.push(f);
            }
        }
    }
    merged
}

type NormFlow = (String, Rel, Vec<String>);

/// Renames variables to `var_<i>` in order of first appearance (parents
/// before the flow's own variable).
fn normalize(flows: &[Flow]) -> Vec<NormFlow> {
    fn name_of(n: &str, names: &mut HashMap<String, String>) -> String {
        let next = format!("var_{}", names.len());
        names.entry(n.to_string()).or_insert(next).clone()
    }
    let mut names: HashMap<String, String> = HashMap::new();
    let mut out = Vec::with_capacity(flows.len());
    for f in flows {
        let parents: Vec<String> = f.parents.iter().map(|p| name_of(p, &mut names)).collect();
        let var = name_of(&f.code, &mut names);
        out.push((var, f.rel, parents));
    }
    out
}

pub(super) fn dataflow_match(cand_tree: &Tree, cand_code: &str, ref_tree: &Tree, ref_code: &str) -> f64 {
    let mut cand = normalize(&data_flow(cand_tree, cand_code));
    let reference = normalize(&data_flow(ref_tree, ref_code));
    if reference.is_empty() {
        log::warn!("reference has no data flows; data-flow match degenerates to 0");
        return 0.0;
    }
    let mut matched = 0usize;
    for r in &reference {
        if let Some(pos) = cand.iter().position(|c| c == r) {
            matched += 1;
            cand.remove(pos);
        }
    }
    matched as f64 / reference.len() as f64
}
