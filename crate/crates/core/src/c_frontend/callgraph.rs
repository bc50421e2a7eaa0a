use std::collections::{BTreeMap, BTreeSet, HashMap};

use petgraph::algo::tarjan_scc;
use petgraph::graph::DiGraph;
use serde::{Deserialize, Serialize};

use super::lexer::tokenize;
use super::module::{FunctionId, ModuleIR};

#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
pub struct MacroCall {
    pub caller: FunctionId,
    pub callee: FunctionId,
    #[serde(rename = "macro")]
    pub macro_name: String,
    pub via_macro: bool,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct CallGraph {
    /// Ordered by (file, start line).
    pub nodes: Vec<FunctionId>,
    pub edges: BTreeSet<(FunctionId, FunctionId)>,
    pub external_calls: BTreeMap<FunctionId, BTreeSet<String>>,
    /// Calls that only happen inside a macro expanded by the caller. Not part of `edges`.
    pub macro_calls: BTreeSet<MacroCall>,
    /// SCC groups, leaves first.
    pub scc_order: Vec<Vec<FunctionId>>,
}

impl CallGraph {
    pub fn callees<'a>(&'a self, id: &'a str) -> impl Iterator<Item = &'a FunctionId> + 'a {
        self.edges.iter().filter(move |(a, _)| a == id).map(|(_, b)| b)
    }

    pub fn callers<'a>(&'a self, id: &'a str) -> impl Iterator<Item = &'a FunctionId> + 'a {
        self.edges.iter().filter(move |(_, b)| b == id).map(|(a, _)| a)
    }

    /// The SCC group containing `id`.
    pub fn group_of(&self, id: &str) -> Option<&[FunctionId]> {
        self.scc_order
            .iter()
            .find(|g| g.iter().any(|m| m == id))
            .map(|g| g.as_slice())
    }

    pub fn to_json(&self) -> serde_json::Value {
        serde_json::json!({
            "nodes": self.nodes,
            "edges": self.edges.iter().map(|(a, b)| [a, b]).collect::<Vec<_>>(),
            "external_calls": self.external_calls,
            "macro_calls": self.macro_calls,
            "scc_order": self.scc_order,
        })
    }
}

/// Resolves a called name from `file` to a module function: a definition in the
/// same file wins, then a non-static definition elsewhere in path order.
pub fn resolve_callee<'m>(module: &'m ModuleIR, file: &str, name: &str) -> Option<&'m FunctionId> {
    let mut candidates = module.functions.iter().filter(|f| f.name == name);
    let all: Vec<_> = candidates.by_ref().collect();
    all.iter()
        .find(|f| f.file == file)
        .or_else(|| all.iter().find(|f| !f.is_static))
        .map(|f| &f.id)
}

pub fn build_call_graph(module: &ModuleIR) -> CallGraph {
    let nodes: Vec<FunctionId> = module.functions.iter().map(|f| f.id.clone()).collect();
    let mut edges = BTreeSet::new();
    let mut external_calls: BTreeMap<FunctionId, BTreeSet<String>> = BTreeMap::new();
    for f in &module.functions {
        let ext = external_calls.entry(f.id.clone()).or_default();
        for c in &f.calls {
            match resolve_callee(module, &f.file, c) {
                Some(g) => {
                    edges.insert((f.id.clone(), g.clone()));
                }
                None => {
                    ext.insert(c.clone());
                }
            }
        }
        ext.extend(f.indirect_calls.iter().cloned());
    }
    external_calls.retain(|_, v| !v.is_empty());
    let macro_calls = macro_calls(module);
    let scc_order = leaves_first(&nodes, &edges);
    CallGraph {
        nodes,
        edges,
        external_calls,
        macro_calls,
        scc_order,
    }
}

fn macro_calls(module: &ModuleIR) -> BTreeSet<MacroCall> {
    let macros: HashMap<&str, &str> = module.macros().map(|m| (m.name.as_str(), m.body.as_str())).collect();
    let mut out = BTreeSet::new();
    for f in &module.functions {
        let mut stack: Vec<&str> = f
            .referenced
            .iter()
            .chain(&f.calls)
            .map(String::as_str)
            .filter(|n| macros.contains_key(n))
            .collect();
        let mut seen = BTreeSet::new();
        while let Some(m) = stack.pop() {
            if !seen.insert(m) {
                continue;
            }
            let Ok(toks) = tokenize(macros[m]) else {
                continue;
            };
            for (i, t) in toks.iter().enumerate() {
                if !t.is_ident() {
                    continue;
                }
                if let Some((name, _)) = macros.get_key_value(t.text.as_str()) {
                    stack.push(name);
                }
                if toks.get(i + 1).is_some_and(|n| n.is_punct("(")) {
                    if let Some(g) = resolve_callee(module, &f.file, &t.text) {
                        out.insert(MacroCall {
                            caller: f.id.clone(),
                            callee: g.clone(),
                            macro_name: m.to_string(),
                            via_macro: true,
                        });
                    }
                }
            }
        }
    }
    out
}

/// Condenses SCCs and orders them leaves first. Ties between ready groups are
/// broken by the position of their first member in `nodes`; members within a
/// group keep `nodes` order.
pub fn leaves_first(nodes: &[FunctionId], edges: &BTreeSet<(FunctionId, FunctionId)>) -> Vec<Vec<FunctionId>> {
    let mut graph = DiGraph::<usize, ()>::new();
    let idx: HashMap<&str, _> = nodes
        .iter()
        .enumerate()
        .map(|(i, n)| (n.as_str(), graph.add_node(i)))
        .collect();
    for (a, b) in edges {
        graph.add_edge(idx[a.as_str()], idx[b.as_str()], ());
    }
    let mut groups: Vec<Vec<usize>> = tarjan_scc(&graph)
        .into_iter()
        .map(|c| {
            let mut g: Vec<usize> = c.into_iter().map(|n| graph[n]).collect();
            g.sort();
            g
        })
        .collect();
    groups.sort_by_key(|g| g[0]);
    let mut group_of = vec![0; nodes.len()];
    for (gi, g) in groups.iter().enumerate() {
        for &m in g {
            group_of[m] = gi;
        }
    }
    // out-degree in the condensation, and reverse adjacency
    let mut pending = vec![BTreeSet::new(); groups.len()];
    let mut dependents = vec![BTreeSet::new(); groups.len()];
    for (a, b) in edges {
        let ga = group_of[graph[idx[a.as_str()]]];
        let gb = group_of[graph[idx[b.as_str()]]];
        if ga != gb {
            pending[ga].insert(gb);
            dependents[gb].insert(ga);
        }
    }
    let mut ready: BTreeSet<(usize, usize)> = (0..groups.len())
        .filter(|&g| pending[g].is_empty())
        .map(|g| (groups[g][0], g))
        .collect();
    let mut order = Vec::with_capacity(groups.len());
    while let Some(&(key, g)) = ready.iter().next() {
        ready.remove(&(key, g));
        order.push(g);
        for &d in &dependents[g] {
            pending[d].remove(&g);
            if pending[d].is_empty() {
                ready.insert((groups[d][0], d));
            }
        }
    }
    debug_assert_eq!(order.len(), groups.len());
    order
        .into_iter()
        .map(|g| groups[g].iter().map(|&i| nodes[i].clone()).collect())
        .collect()
}

/// Alias kept for readability at call sites that only need the schedule.
pub fn leaves_first_schedule(graph: &CallGraph) -> Vec<Vec<FunctionId>> {
    graph.scc_order.clone()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::c_frontend::module::{parse_sources, SourceFile};

    fn graph(src: &str) -> CallGraph {
        build_call_graph(&parse_sources(vec![SourceFile::new("m.c", src)]).unwrap())
    }

    fn ids(v: &[&str]) -> Vec<String> {
        v.iter().map(|n| format!("m.c::{n}")).collect()
    }

    #[test]
    fn chain() {
        let g = graph("int a(void){return b();} int b(void){return c();} int c(void){return 0;}");
        let edges: Vec<_> = g.edges.iter().cloned().collect();
        assert_eq!(
            edges,
            vec![
                ("m.c::a".to_string(), "m.c::b".to_string()),
                ("m.c::b".to_string(), "m.c::c".to_string())
            ]
        );
        assert_eq!(g.scc_order, vec![ids(&["c"]), ids(&["b"]), ids(&["a"])]);
    }

    #[test]
    fn single_isolated() {
        let g = graph("int x(void){return 0;}");
        assert!(g.edges.is_empty());
        assert_eq!(g.scc_order, vec![ids(&["x"])]);
    }

    #[test]
    fn mutual_recursion_is_one_group() {
        let g = graph("int f(int n){return n ? g(n-1) : 0;} int g(int n){return n ? f(n-1) : 1;}");
        assert_eq!(g.scc_order, vec![ids(&["f", "g"])]);
    }

    #[test]
    fn independent_nodes_keep_position_order() {
        let g = graph("int x(void){return 0;}\nint y(void){return 1;}");
        assert_eq!(g.scc_order, vec![ids(&["x"]), ids(&["y"])]);
    }

    #[test]
    fn diamond() {
        let g = graph(
            "int a(void){return b()+c();} int b(void){return d();} int c(void){return d();} int d(void){return 0;}",
        );
        assert_eq!(g.scc_order, vec![ids(&["d"]), ids(&["b"]), ids(&["c"]), ids(&["a"])]);
    }

    #[test]
    fn external_and_macro_calls() {
        let g =
            graph("#define CALL_H(x) h(x)\nint h(int x){return x;}\nint f(int x){ return printf(\"\") + CALL_H(x); }");
        assert!(g.edges.is_empty());
        assert_eq!(
            g.external_calls["m.c::f"],
            ["CALL_H", "printf"].map(String::from).into()
        );
        let mc: Vec<_> = g.macro_calls.iter().collect();
        assert_eq!(mc.len(), 1);
        assert_eq!(mc[0].callee, "m.c::h");
        assert_eq!(mc[0].macro_name, "CALL_H");
    }

    #[test]
    fn self_recursion_is_self_loop_group() {
        let g = graph("int fact(int n){return n ? n*fact(n-1) : 1;}");
        assert!(g.edges.contains(&("m.c::fact".into(), "m.c::fact".into())));
        assert_eq!(g.scc_order, vec![ids(&["fact"])]);
    }

    #[test]
    fn static_functions_resolve_within_file() {
        let m = parse_sources(vec![
            SourceFile::new("a.c", "static int h(void){return 1;} int fa(void){return h();}"),
            SourceFile::new("b.c", "static int h(void){return 2;} int fb(void){return h();}"),
        ])
        .unwrap();
        let g = build_call_graph(&m);
        assert!(g.edges.contains(&("a.c::fa".into(), "a.c::h".into())));
        assert!(g.edges.contains(&("b.c::fb".into(), "b.c::h".into())));
    }
}
