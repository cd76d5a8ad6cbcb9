//! Pattern composition: DAGs of pattern instances linked by directed qubit
//! pairs, the renaming process that binds linked names together, and the
//! merge of the renamed patterns.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt::Write as _;

use thiserror::Error;

use crate::command::QubitName;
use crate::pattern::{validate_pattern, Pattern, Violation};

/// A qubit of one node, named as in that node's pattern.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct NodeQubit {
    pub node: usize,
    pub qubit: QubitName,
}

impl NodeQubit {
    pub fn new(node: usize, qubit: QubitName) -> Self {
        NodeQubit { node, qubit }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Node {
    pub name: String,
    pub pattern: Pattern,
}

/// Pattern instances plus directed (output → input) qubit pairs.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct CompositionExpr {
    pub nodes: Vec<Node>,
    pub pairs: Vec<(NodeQubit, NodeQubit)>,
}

#[derive(Debug, Clone, PartialEq, Error)]
pub enum ComposeError {
    #[error("pair refers to missing node {0}")]
    UnknownNode(usize),
    #[error("{qubit} is not an output of node `{node}`")]
    NotAnOutput { node: String, qubit: String },
    #[error("{qubit} is not an input of node `{node}`")]
    NotAnInput { node: String, qubit: String },
    #[error("{qubit} of node `{node}` appears in more than one pair")]
    ReusedEndpoint { node: String, qubit: String },
    #[error("composition graph has a cycle through {0:?}")]
    CycleDetected(Vec<String>),
    #[error("{a} and {b} are already bound to different names")]
    ConflictingBinding { a: String, b: String },
    #[error("sequential composition of {outputs} outputs with {inputs} inputs")]
    ArityMismatch { outputs: usize, inputs: usize },
    #[error("composed pattern is not well formed: {}", .0.iter().map(|v| v.to_string()).collect::<Vec<_>>().join("; "))]
    Invalid(Vec<Violation>),
}

impl CompositionExpr {
    pub fn new() -> Self {
        Self::default()
    }

    /// Adds a node, returning its index.
    pub fn add(&mut self, name: impl Into<String>, pattern: Pattern) -> usize {
        self.nodes.push(Node {
            name: name.into(),
            pattern,
        });
        self.nodes.len() - 1
    }

    pub fn link(&mut self, from: (usize, QubitName), to: (usize, QubitName)) {
        self.pairs
            .push((NodeQubit::new(from.0, from.1), NodeQubit::new(to.0, to.1)));
    }

    /// Name of a node qubit once its node is instantiated: variables are
    /// qualified by the node name, concrete references are shared.
    pub fn instance_name(&self, nq: &NodeQubit) -> QubitName {
        match &nq.qubit {
            QubitName::Var(v) => QubitName::Var(format!("{}.{v}", self.nodes[nq.node].name)),
            r => r.clone(),
        }
    }

    fn label(&self, nq: &NodeQubit) -> (String, String) {
        (self.nodes[nq.node].name.clone(), nq.qubit.to_string())
    }

    /// Checks that pairs go from outputs to inputs and use each endpoint
    /// once.
    pub fn check_pairs(&self) -> Result<(), ComposeError> {
        let mut used = BTreeSet::new();
        for (from, to) in &self.pairs {
            for nq in [from, to] {
                if nq.node >= self.nodes.len() {
                    return Err(ComposeError::UnknownNode(nq.node));
                }
            }
            if !self.nodes[from.node].pattern.outputs.contains(&from.qubit) {
                let (node, qubit) = self.label(from);
                return Err(ComposeError::NotAnOutput { node, qubit });
            }
            if !self.nodes[to.node].pattern.inputs.contains(&to.qubit) {
                let (node, qubit) = self.label(to);
                return Err(ComposeError::NotAnInput { node, qubit });
            }
            for (side, nq) in [("out", from), ("in", to)] {
                if !used.insert((side, nq.clone())) {
                    let (node, qubit) = self.label(nq);
                    return Err(ComposeError::ReusedEndpoint { node, qubit });
                }
            }
        }
        Ok(())
    }

    /// Graphviz rendering: one box per node listing its inputs and outputs,
    /// one edge per pair.
    pub fn to_dot(&self, title: &str) -> String {
        let mut s = format!("digraph \"{title}\" {{\n  rankdir=LR;\n  node [shape=box];\n");
        for (i, n) in self.nodes.iter().enumerate() {
            let names = |xs: &[QubitName]| xs.iter().map(|q| q.to_string()).collect::<Vec<_>>().join(" ");
            let _ = writeln!(
                s,
                "  n{i} [label=\"{}\\nin: {}\\nout: {}\"];",
                n.name,
                names(&n.pattern.inputs),
                names(&n.pattern.outputs)
            );
        }
        for (from, to) in &self.pairs {
            let _ = writeln!(
                s,
                "  n{} -> n{} [label=\"{} -> {}\"];",
                from.node, to.node, from.qubit, to.qubit
            );
        }
        s.push_str("}\n");
        s
    }
}

/// Topological order of the nodes; among ready nodes the earliest declared
/// goes first.
pub fn toposort(expr: &CompositionExpr) -> Result<Vec<usize>, ComposeError> {
    let n = expr.nodes.len();
    let mut succ: Vec<BTreeSet<usize>> = vec![BTreeSet::new(); n];
    for (from, to) in &expr.pairs {
        for nq in [from, to] {
            if nq.node >= n {
                return Err(ComposeError::UnknownNode(nq.node));
            }
        }
        succ[from.node].insert(to.node);
    }
    let mut indegree = vec![0usize; n];
    for s in &succ {
        for &t in s {
            indegree[t] += 1;
        }
    }
    let mut ready: BTreeSet<usize> = (0..n).filter(|&i| indegree[i] == 0).collect();
    let mut order = Vec::with_capacity(n);
    while let Some(i) = ready.pop_first() {
        order.push(i);
        for &t in &succ[i] {
            indegree[t] -= 1;
            if indegree[t] == 0 {
                ready.insert(t);
            }
        }
    }
    if order.len() < n {
        let cycle = find_cycle(&succ, &indegree);
        return Err(ComposeError::CycleDetected(
            cycle.into_iter().map(|i| expr.nodes[i].name.clone()).collect(),
        ));
    }
    Ok(order)
}

/// Follows predecessors among the unsorted nodes until one repeats.
fn find_cycle(succ: &[BTreeSet<usize>], indegree: &[usize]) -> Vec<usize> {
    let stuck: BTreeSet<usize> = (0..succ.len()).filter(|&i| indegree[i] > 0).collect();
    let Some(&start) = stuck.iter().next() else {
        return Vec::new();
    };
    let mut path = vec![start];
    let mut at = start;
    loop {
        // every stuck node has a stuck predecessor, so walk predecessors
        let prev = (0..succ.len())
            .find(|&p| stuck.contains(&p) && succ[p].contains(&at))
            .expect("stuck node has a stuck predecessor");
        if let Some(pos) = path.iter().position(|&x| x == prev) {
            let mut cycle: Vec<usize> = path[pos..].to_vec();
            cycle.reverse();
            return cycle;
        }
        path.push(prev);
        at = prev;
    }
}

/// Map from instance names to canonical names.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct BindingSet {
    pub map: BTreeMap<QubitName, QubitName>,
}

impl BindingSet {
    pub fn get(&self, q: &QubitName) -> Option<&QubitName> {
        self.map.get(q)
    }

    /// Instance names sharing each canonical name, for names bound by pairs.
    pub fn classes(&self) -> BTreeMap<QubitName, Vec<QubitName>> {
        let mut out: BTreeMap<QubitName, Vec<QubitName>> = BTreeMap::new();
        for (k, v) in &self.map {
            out.entry(v.clone()).or_default().push(k.clone());
        }
        out
    }
}

struct Fresh(usize);

impl Fresh {
    fn next(&mut self) -> QubitName {
        let q = QubitName::Var(format!("c{}", self.0));
        self.0 += 1;
        q
    }
}

fn bindings_in_order(expr: &CompositionExpr, order: &[usize]) -> Result<BindingSet, ComposeError> {
    let rank: BTreeMap<usize, usize> = order.iter().enumerate().map(|(r, &n)| (n, r)).collect();
    let mut pairs: Vec<(usize, &(NodeQubit, NodeQubit))> = expr.pairs.iter().enumerate().collect();
    pairs.sort_by_key(|(i, (from, to))| (rank[&from.node], rank[&to.node], *i));

    let mut fresh = Fresh(0);
    let mut b = BindingSet::default();
    for (_, (from, to)) in pairs {
        let q = expr.instance_name(from);
        let q2 = expr.instance_name(to);
        match (b.map.get(&q).cloned(), b.map.get(&q2).cloned()) {
            (None, None) => {
                let c = fresh.next();
                b.map.insert(q, c.clone());
                b.map.insert(q2, c);
            }
            (Some(c), None) => {
                b.map.insert(q2, c);
            }
            (None, Some(c)) => {
                b.map.insert(q, c);
            }
            (Some(c1), Some(c2)) if c1 == c2 => {}
            (Some(_), Some(_)) => {
                return Err(ComposeError::ConflictingBinding {
                    a: q.to_string(),
                    b: q2.to_string(),
                })
            }
        }
    }
    for &n in order {
        let node = &expr.nodes[n];
        for name in node.pattern.names() {
            if let QubitName::Var(_) = name {
                let inst = expr.instance_name(&NodeQubit::new(n, name));
                b.map.entry(inst).or_insert_with(|| fresh.next());
            }
        }
    }
    Ok(b)
}

/// Runs the binding rules over the pairs in topological order; every other
/// variable gets its own fresh name.
pub fn compute_bindings(expr: &CompositionExpr) -> Result<BindingSet, ComposeError> {
    bindings_in_order(expr, &toposort(expr)?)
}

fn union(a: &[QubitName], b: &[QubitName]) -> Vec<QubitName> {
    let mut out = a.to_vec();
    for q in b {
        if !out.contains(q) {
            out.push(q.clone());
        }
    }
    out
}

fn minus(a: &[QubitName], b: &[QubitName]) -> Vec<QubitName> {
    a.iter().filter(|q| !b.contains(q)).cloned().collect()
}

/// Joins two renamed patterns: `I = I1 ∪ (I2 \ O1)`, `O = (O1 \ I2) ∪ O2`,
/// commands of the first then the second.
pub fn merge_patterns(p1: &Pattern, p2: &Pattern) -> Pattern {
    let mut commands = p1.commands.clone();
    commands.extend(p2.commands.iter().cloned());
    let mut params = p1.params.clone();
    for p in &p2.params {
        if !params.contains(p) {
            params.push(p.clone());
        }
    }
    Pattern {
        space: union(&p1.space, &p2.space),
        inputs: union(&p1.inputs, &minus(&p2.inputs, &p1.outputs)),
        outputs: union(&minus(&p1.outputs, &p2.inputs), &p2.outputs),
        commands,
        params,
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Compiled {
    pub pattern: Pattern,
    pub bindings: BindingSet,
    pub order: Vec<usize>,
}

/// Renames every node through the binding set and merges them in
/// topological order.
pub fn compile_composition(expr: &CompositionExpr) -> Result<Compiled, ComposeError> {
    expr.check_pairs()?;
    let order = toposort(expr)?;
    let bindings = bindings_in_order(expr, &order)?;
    let mut pattern = Pattern::empty();
    for &n in &order {
        let renamed = expr.nodes[n].pattern.rename(&mut |q| match q {
            QubitName::Var(_) => bindings.map[&expr.instance_name(&NodeQubit::new(n, q.clone()))].clone(),
            r => r.clone(),
        });
        pattern = merge_patterns(&pattern, &renamed);
    }
    let violations = validate_pattern(&pattern);
    if !violations.is_empty() {
        return Err(ComposeError::Invalid(violations));
    }
    Ok(Compiled {
        pattern,
        bindings,
        order,
    })
}

/// Expression linking `O1[k]` to `I2[k]` for every k.
pub fn seq_expr(p1: &Pattern, p2: &Pattern) -> Result<CompositionExpr, ComposeError> {
    if p1.outputs.len() != p2.inputs.len() {
        return Err(ComposeError::ArityMismatch {
            outputs: p1.outputs.len(),
            inputs: p2.inputs.len(),
        });
    }
    let mut e = CompositionExpr::new();
    let a = e.add("n0", p1.clone());
    let b = e.add("n1", p2.clone());
    for (o, i) in p1.outputs.iter().zip(&p2.inputs) {
        e.link((a, o.clone()), (b, i.clone()));
    }
    Ok(e)
}

/// `p2 ∘ p1`: run `p1`, then `p2` on its outputs.
pub fn seq_compose(p1: &Pattern, p2: &Pattern) -> Result<Pattern, ComposeError> {
    Ok(compile_composition(&seq_expr(p1, p2)?)?.pattern)
}

/// `p1 ⊗ p2`.
pub fn par_compose(p1: &Pattern, p2: &Pattern) -> Result<Pattern, ComposeError> {
    let mut e = CompositionExpr::new();
    e.add("n0", p1.clone());
    e.add("n1", p2.clone());
    Ok(compile_composition(&e)?.pattern)
}

/// Left-to-right sequential composition of a chain.
pub fn seq_all(patterns: &[Pattern]) -> Result<Pattern, ComposeError> {
    fold(patterns, seq_compose)
}

pub fn par_all(patterns: &[Pattern]) -> Result<Pattern, ComposeError> {
    fold(patterns, par_compose)
}

fn fold(
    patterns: &[Pattern],
    f: impl Fn(&Pattern, &Pattern) -> Result<Pattern, ComposeError>,
) -> Result<Pattern, ComposeError> {
    let mut it = patterns.iter();
    let Some(first) = it.next() else {
        return Ok(Pattern::empty());
    };
    it.try_fold(first.clone(), |acc, p| f(&acc, p))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::pattern::parse_pattern;

    const H: &str = "((?i ?o) (?i) (?o) ((E ?i ?o) (M ?i 0) (X ?o (s ?i))))";
    const CZ: &str = "((?a ?b) (?a ?b) (?a ?b) ((E ?a ?b)))";

    fn v(name: &str) -> QubitName {
        QubitName::var(name)
    }

    fn named(p: &Pattern, names: &[(&str, &str)]) -> Pattern {
        let map: BTreeMap<QubitName, QubitName> = names.iter().map(|(a, b)| (v(a), v(b))).collect();
        p.rename(&mut |q| map.get(q).cloned().unwrap_or_else(|| q.clone()))
    }

    /// The three-node controlled-X expression with qubit names q1..q7.
    fn final_cx() -> CompositionExpr {
        let h = parse_pattern(H).unwrap();
        let cz = parse_pattern(CZ).unwrap();
        let mut e = CompositionExpr::new();
        let h1 = e.add("h1", named(&h, &[("i", "q1"), ("o", "q2")]));
        let z = e.add("cz", named(&cz, &[("a", "q5"), ("b", "q4")]));
        let h2 = e.add("h2", named(&h, &[("i", "q6"), ("o", "q7")]));
        e.link((h1, v("q2")), (z, v("q4")));
        e.link((z, v("q4")), (h2, v("q6")));
        e
    }

    #[test]
    fn chain_sorts_in_order() {
        assert_eq!(toposort(&final_cx()).unwrap(), vec![0, 1, 2]);
    }

    #[test]
    fn declaration_order_breaks_ties() {
        let mut e = CompositionExpr::new();
        e.add("a", Pattern::empty());
        e.add("b", Pattern::empty());
        assert_eq!(toposort(&e).unwrap(), vec![0, 1]);

        let h = parse_pattern(H).unwrap();
        let mut e = CompositionExpr::new();
        let x = e.add("x", h.clone());
        let y = e.add("y", h.clone());
        let z = e.add("z", h);
        e.link((z, v("o")), (x, v("i")));
        // y and z are both ready at the start; y was declared first
        assert_eq!(toposort(&e).unwrap(), vec![y, z, x]);
    }

    #[test]
    fn two_cycle_is_reported() {
        let h = parse_pattern(H).unwrap();
        let mut e = CompositionExpr::new();
        let a = e.add("a", h.clone());
        let b = e.add("b", h);
        e.link((a, v("o")), (b, v("i")));
        e.link((b, v("o")), (a, v("i")));
        match toposort(&e) {
            Err(ComposeError::CycleDetected(names)) => {
                let mut names = names;
                names.sort();
                assert_eq!(names, vec!["a".to_string(), "b".to_string()]);
            }
            other => panic!("expected a cycle, got {other:?}"),
        }
    }

    #[test]
    fn linked_names_share_one_binding() {
        let e = final_cx();
        let b = compute_bindings(&e).unwrap();
        let inst = |n: &str, q: &str| v(&format!("{n}.{q}"));
        let shared = b.get(&inst("h1", "q2")).unwrap();
        assert_eq!(b.get(&inst("cz", "q4")), Some(shared));
        assert_eq!(b.get(&inst("h2", "q6")), Some(shared));
        let others: BTreeSet<_> = [inst("h1", "q1"), inst("cz", "q5"), inst("h2", "q7")]
            .iter()
            .map(|q| b.get(q).unwrap().clone())
            .collect();
        assert_eq!(others.len(), 3);
        assert!(!others.contains(shared));
    }

    #[test]
    fn no_pairs_means_all_distinct() {
        let h = parse_pattern(H).unwrap();
        let mut e = CompositionExpr::new();
        e.add("a", h.clone());
        e.add("b", h);
        let b = compute_bindings(&e).unwrap();
        let values: BTreeSet<_> = b.map.values().collect();
        assert_eq!(values.len(), 4);
    }

    #[test]
    fn single_pair() {
        let h = parse_pattern(H).unwrap();
        let mut e = CompositionExpr::new();
        let a = e.add("a", h.clone());
        let c = e.add("b", h);
        e.link((a, v("o")), (c, v("i")));
        let b = compute_bindings(&e).unwrap();
        assert_eq!(b.get(&v("a.o")), b.get(&v("b.i")));
    }

    #[test]
    fn merge_set_arithmetic() {
        let p1 = Pattern::from_vars(&["a", "b"], &["a"], &["b"], vec![]);
        let p2 = Pattern::from_vars(&["b", "c", "d"], &["b", "c"], &["d"], vec![]);
        let m = merge_patterns(&p1, &p2);
        assert_eq!(m.inputs, vec![v("a"), v("c")]);
        assert_eq!(m.outputs, vec![v("d")]);
        assert_eq!(m.space, vec![v("a"), v("b"), v("c"), v("d")]);

        let q1 = Pattern::from_vars(&["x"], &["x"], &["x"], vec![]);
        let q2 = Pattern::from_vars(&["y"], &["y"], &["y"], vec![]);
        let par = merge_patterns(&q1, &q2);
        assert_eq!(par.inputs, vec![v("x"), v("y")]);
        assert_eq!(par.outputs, vec![v("x"), v("y")]);

        let s1 = Pattern::from_vars(&["a", "b"], &["a"], &["b"], vec![]);
        let s2 = Pattern::from_vars(&["b", "c"], &["b"], &["c"], vec![]);
        let seq = merge_patterns(&s1, &s2);
        assert_eq!(seq.inputs, vec![v("a")]);
        assert_eq!(seq.outputs, vec![v("c")]);
    }

    #[test]
    fn explicit_cx_has_expected_interface() {
        let c = compile_composition(&final_cx()).unwrap();
        assert_eq!(c.pattern.inputs.len(), 2);
        assert_eq!(c.pattern.outputs.len(), 2);
        assert_eq!(c.pattern.commands.len(), 7);
    }

    #[test]
    fn seq_arity_is_checked() {
        let h = parse_pattern(H).unwrap();
        let cz = parse_pattern(CZ).unwrap();
        assert_eq!(
            seq_compose(&h, &cz),
            Err(ComposeError::ArityMismatch { outputs: 1, inputs: 2 })
        );
        let hh = seq_compose(&h, &h).unwrap();
        assert_eq!(hh.inputs.len(), 1);
        assert_eq!(hh.outputs.len(), 1);
        assert_eq!(hh.space.len(), 3);
    }

    #[test]
    fn bad_pairs_are_rejected() {
        let h = parse_pattern(H).unwrap();
        let mut e = CompositionExpr::new();
        let a = e.add("a", h.clone());
        let b = e.add("b", h);
        e.link((a, v("i")), (b, v("i")));
        assert!(matches!(compile_composition(&e), Err(ComposeError::NotAnOutput { .. })));
        e.pairs.clear();
        e.link((a, v("o")), (b, v("o")));
        assert!(matches!(compile_composition(&e), Err(ComposeError::NotAnInput { .. })));
        e.pairs.clear();
        e.link((a, v("o")), (b, v("i")));
        e.link((a, v("o")), (b, v("i")));
        assert!(matches!(compile_composition(&e), Err(ComposeError::ReusedEndpoint { .. })));
    }

    #[test]
    fn unit_of_parallel_composition() {
        let h = parse_pattern(H).unwrap();
        let p = par_compose(&h, &Pattern::empty()).unwrap();
        assert_eq!(p.commands.len(), 3);
        assert_eq!(p.inputs.len(), 1);
    }

    #[test]
    fn dot_output() {
        let dot = final_cx().to_dot("cx");
        assert_eq!(dot.matches("->").count(), 4);
        assert_eq!(dot.matches("[label=\"h").count(), 2);
    }
}
