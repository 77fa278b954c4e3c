//! Explicit control-flow graphs for Python functions, built straight from
//! the syntax tree. Each function is its own connected component with an
//! entry and an exit node; module-level and class-body code forms one more
//! component. Complexity is read off the graph as E - N + 2P.

use rustpython_parser::ast::{self, Expr, Pattern, Ranged, Stmt};
use rustpython_parser::Parse;

#[derive(Debug, Clone)]
pub struct Component {
    pub name: String,
    pub start_line: usize,
    pub nodes: usize,
    pub edges: usize,
    /// Weakly connected pieces of the graph.
    pub parts: usize,
}

impl Component {
    pub fn complexity(&self) -> i64 {
        self.edges as i64 - self.nodes as i64 + 2 * self.parts as i64
    }
}

#[derive(Debug)]
pub struct ProgramGraph {
    pub functions: Vec<Component>,
    pub module: Component,
}

pub fn build(source: &str) -> ProgramGraph {
    let suite = ast::Suite::parse(source, "<oracle>").expect("oracle input parses");
    let lines = LineMap::new(source);
    let mut pending: Vec<Pending> = Vec::new();
    let module = build_component("<module>".into(), 0, &suite, Vec::new(), &mut pending);
    let mut functions = Vec::new();
    while let Some(p) = pending.pop() {
        let line = lines.line(p.offset);
        let c = build_component(p.name, line, p.body, p.scope, &mut pending);
        functions.push(c);
    }
    ProgramGraph { functions, module }
}

struct LineMap {
    starts: Vec<usize>,
}

impl LineMap {
    fn new(source: &str) -> Self {
        let mut starts = vec![0];
        for (i, b) in source.bytes().enumerate() {
            if b == b'\n' {
                starts.push(i + 1);
            }
        }
        Self { starts }
    }

    fn line(&self, offset: usize) -> usize {
        match self.starts.binary_search(&offset) {
            Ok(i) => i + 1,
            Err(i) => i,
        }
    }
}

struct Pending<'a> {
    name: String,
    offset: usize,
    body: &'a [Stmt],
    scope: Vec<String>,
}

struct LoopCtx {
    head: usize,
    breaks: Vec<usize>,
}

struct Graph<'a, 'p> {
    nodes: usize,
    edges: Vec<(usize, usize)>,
    exit: usize,
    loops: Vec<LoopCtx>,
    scope: Vec<String>,
    pending: &'p mut Vec<Pending<'a>>,
}

fn build_component<'a>(
    name: String,
    start_line: usize,
    body: &'a [Stmt],
    scope: Vec<String>,
    pending: &mut Vec<Pending<'a>>,
) -> Component {
    let mut g = Graph {
        nodes: 0,
        edges: Vec::new(),
        exit: 0,
        loops: Vec::new(),
        scope,
        pending,
    };
    let entry = g.node();
    g.exit = g.node();
    let out = g.block(body, vec![entry]);
    let exit = g.exit;
    g.link(&out, exit);
    Component {
        name,
        start_line,
        nodes: g.nodes,
        edges: g.edges.len(),
        parts: connected_parts(g.nodes, &g.edges),
    }
}

fn connected_parts(n: usize, edges: &[(usize, usize)]) -> usize {
    fn find(parent: &mut [usize], mut x: usize) -> usize {
        while parent[x] != x {
            parent[x] = parent[parent[x]];
            x = parent[x];
        }
        x
    }
    let mut parent: Vec<usize> = (0..n).collect();
    let mut parts = n;
    for &(a, b) in edges {
        let (ra, rb) = (find(&mut parent, a), find(&mut parent, b));
        if ra != rb {
            parent[ra] = rb;
            parts -= 1;
        }
    }
    parts
}

impl<'a, 'p> Graph<'a, 'p> {
    fn node(&mut self) -> usize {
        self.nodes += 1;
        self.nodes - 1
    }

    fn link(&mut self, from: &[usize], to: usize) {
        self.edges.extend(from.iter().map(|&f| (f, to)));
    }

    /// A fresh node reached from every predecessor.
    fn step(&mut self, preds: &[usize]) -> usize {
        let n = self.node();
        self.link(preds, n);
        n
    }

    fn block(&mut self, body: &'a [Stmt], mut preds: Vec<usize>) -> Vec<usize> {
        for s in body {
            preds = self.stmt(s, preds);
        }
        preds
    }

    fn exprs<I: IntoIterator<Item = &'a Expr>>(&mut self, exprs: I, mut preds: Vec<usize>) -> Vec<usize> {
        for e in exprs {
            preds = self.expr(e, preds);
        }
        preds
    }

    fn simple<I: IntoIterator<Item = &'a Expr>>(&mut self, exprs: I, preds: Vec<usize>) -> Vec<usize> {
        let f = self.exprs(exprs, preds);
        vec![self.step(&f)]
    }

    fn arguments(&self, args: &'a ast::Arguments) -> Vec<&'a Expr> {
        let mut out = Vec::new();
        for a in args.posonlyargs.iter().chain(&args.args).chain(&args.kwonlyargs) {
            if let Some(ann) = &a.def.annotation {
                out.push(ann.as_ref());
            }
            if let Some(d) = &a.default {
                out.push(d.as_ref());
            }
        }
        for a in args.vararg.iter().chain(args.kwarg.iter()) {
            if let Some(ann) = &a.annotation {
                out.push(ann.as_ref());
            }
        }
        out
    }

    fn function(
        &mut self,
        name: &str,
        offset: usize,
        args: &'a ast::Arguments,
        body: &'a [Stmt],
        decorators: &'a [Expr],
        returns: &'a Option<Box<Expr>>,
        preds: Vec<usize>,
    ) -> Vec<usize> {
        let mut header: Vec<&'a Expr> = decorators.iter().collect();
        header.extend(self.arguments(args));
        header.extend(returns.as_deref());
        let out = self.simple(header, preds);
        let mut scope = self.scope.clone();
        scope.push(name.to_string());
        self.pending.push(Pending {
            name: scope.join("."),
            offset,
            body,
            scope,
        });
        out
    }

    fn stmt(&mut self, s: &'a Stmt, preds: Vec<usize>) -> Vec<usize> {
        match s {
            Stmt::FunctionDef(f) => self.function(
                &f.name,
                usize::from(f.range().start()),
                &f.args,
                &f.body,
                &f.decorator_list,
                &f.returns,
                preds,
            ),
            Stmt::AsyncFunctionDef(f) => self.function(
                &f.name,
                usize::from(f.range().start()),
                &f.args,
                &f.body,
                &f.decorator_list,
                &f.returns,
                preds,
            ),
            Stmt::ClassDef(c) => {
                let header = c
                    .decorator_list
                    .iter()
                    .chain(&c.bases)
                    .chain(c.keywords.iter().map(|k| &k.value));
                let head = self.simple(header, preds);
                self.scope.push(c.name.to_string());
                let out = self.block(&c.body, head);
                self.scope.pop();
                out
            }
            Stmt::Return(r) => {
                let n = self.simple(r.value.as_deref(), preds);
                let exit = self.exit;
                self.link(&n, exit);
                Vec::new()
            }
            Stmt::Raise(r) => {
                let n = self.simple(r.exc.as_deref().into_iter().chain(r.cause.as_deref()), preds);
                let exit = self.exit;
                self.link(&n, exit);
                Vec::new()
            }
            Stmt::Break(_) => {
                let n = self.step(&preds);
                self.loops.last_mut().expect("break inside loop").breaks.push(n);
                Vec::new()
            }
            Stmt::Continue(_) => {
                let n = self.step(&preds);
                let head = self.loops.last().expect("continue inside loop").head;
                self.link(&[n], head);
                Vec::new()
            }
            Stmt::If(i) => {
                let f = self.expr(&i.test, preds);
                let d = self.step(&f);
                let mut out = self.block(&i.body, vec![d]);
                if i.orelse.is_empty() {
                    out.push(d);
                } else {
                    out.extend(self.block(&i.orelse, vec![d]));
                }
                out
            }
            Stmt::While(w) => {
                let head = self.step(&preds);
                let f = self.expr(&w.test, vec![head]);
                let d = self.step(&f);
                self.loop_body(head, d, &w.body, &w.orelse)
            }
            Stmt::For(l) => {
                let f = self.expr(&l.iter, preds);
                let head = self.step(&f);
                self.loop_body(head, head, &l.body, &l.orelse)
            }
            Stmt::AsyncFor(l) => {
                let f = self.expr(&l.iter, preds);
                let head = self.step(&f);
                self.loop_body(head, head, &l.body, &l.orelse)
            }
            Stmt::Try(t) => self.try_stmt(&t.body, &t.handlers, &t.orelse, &t.finalbody, preds),
            Stmt::TryStar(t) => self.try_stmt(&t.body, &t.handlers, &t.orelse, &t.finalbody, preds),
            Stmt::With(w) => {
                let items = w
                    .items
                    .iter()
                    .flat_map(|i| std::iter::once(&i.context_expr).chain(i.optional_vars.as_deref()));
                let n = self.simple(items, preds);
                self.block(&w.body, n)
            }
            Stmt::AsyncWith(w) => {
                let items = w
                    .items
                    .iter()
                    .flat_map(|i| std::iter::once(&i.context_expr).chain(i.optional_vars.as_deref()));
                let n = self.simple(items, preds);
                self.block(&w.body, n)
            }
            Stmt::Match(m) => {
                let f = self.expr(&m.subject, preds);
                let s = self.step(&f);
                let mut untried = vec![s];
                let mut out = Vec::new();
                for case in &m.cases {
                    let mut entry = untried.clone();
                    let mut next = Vec::new();
                    if !always_matches(&case.pattern) {
                        let c = self.step(&entry);
                        entry = vec![c];
                        next.push(c);
                    }
                    if let Some(guard) = &case.guard {
                        let gf = self.expr(guard, entry);
                        let g = self.step(&gf);
                        entry = vec![g];
                        next.push(g);
                    }
                    out.extend(self.block(&case.body, entry));
                    untried = next;
                }
                out.extend(untried);
                out
            }
            Stmt::Delete(d) => self.simple(&d.targets, preds),
            Stmt::Assign(a) => self.simple(std::iter::once(a.value.as_ref()).chain(&a.targets), preds),
            Stmt::AugAssign(a) => self.simple([a.value.as_ref(), a.target.as_ref()], preds),
            Stmt::AnnAssign(a) => self.simple(
                std::iter::once(a.annotation.as_ref())
                    .chain(a.value.as_deref())
                    .chain(std::iter::once(a.target.as_ref())),
                preds,
            ),
            Stmt::TypeAlias(t) => self.simple([t.value.as_ref()], preds),
            Stmt::Assert(a) => self.simple(std::iter::once(a.test.as_ref()).chain(a.msg.as_deref()), preds),
            Stmt::Expr(e) => self.simple([e.value.as_ref()], preds),
            Stmt::Import(_)
            | Stmt::ImportFrom(_)
            | Stmt::Global(_)
            | Stmt::Nonlocal(_)
            | Stmt::Pass(_) => vec![self.step(&preds)],
        }
    }

    /// `decide` branches into the body or out of the loop; the body flows
    /// back to `head`.
    fn loop_body(&mut self, head: usize, decide: usize, body: &'a [Stmt], orelse: &'a [Stmt]) -> Vec<usize> {
        self.loops.push(LoopCtx { head, breaks: Vec::new() });
        let back = self.block(body, vec![decide]);
        self.link(&back, head);
        let ctx = self.loops.pop().unwrap();
        let mut out = if orelse.is_empty() {
            vec![decide]
        } else {
            self.block(orelse, vec![decide])
        };
        out.extend(ctx.breaks);
        out
    }

    fn try_stmt(
        &mut self,
        body: &'a [Stmt],
        handlers: &'a [ast::ExceptHandler],
        orelse: &'a [Stmt],
        finalbody: &'a [Stmt],
        preds: Vec<usize>,
    ) -> Vec<usize> {
        let t = self.step(&preds);
        let normal = self.block(body, vec![t]);
        let mut out = if orelse.is_empty() {
            normal
        } else {
            self.block(orelse, normal)
        };
        for h in handlers {
            let ast::ExceptHandler::ExceptHandler(h) = h;
            let entry = self.step(&[t]);
            let f = self.exprs(h.type_.as_deref(), vec![entry]);
            out.extend(self.block(&h.body, f));
        }
        if finalbody.is_empty() {
            out
        } else {
            let join = self.step(&out);
            self.block(finalbody, vec![join])
        }
    }

    fn comprehension(&mut self, generators: &'a [ast::Comprehension], elts: Vec<&'a Expr>, preds: Vec<usize>) -> Vec<usize> {
        let mut heads = Vec::new();
        let mut cur = preds;
        for g in generators {
            let f = self.expr(&g.iter, cur);
            let head = self.step(&f);
            heads.push(head);
            let body = self.step(&[head]);
            cur = self.expr(&g.target, vec![body]);
            for cond in &g.ifs {
                let f = self.expr(cond, cur);
                let c = self.step(&f);
                self.link(&[c], head);
                cur = vec![self.step(&[c])];
            }
        }
        let done = self.exprs(elts, cur);
        let innermost = *heads.last().expect("at least one generator");
        self.link(&done, innermost);
        for w in heads.windows(2) {
            self.link(&[w[1]], w[0]);
        }
        vec![self.step(&[heads[0]])]
    }

    fn expr(&mut self, e: &'a Expr, preds: Vec<usize>) -> Vec<usize> {
        match e {
            Expr::BoolOp(b) => {
                let mut f = self.expr(&b.values[0], preds);
                let mut short = Vec::new();
                for v in &b.values[1..] {
                    let d = self.step(&f);
                    short.push(d);
                    let next = self.step(&[d]);
                    f = self.expr(v, vec![next]);
                }
                f.extend(short);
                vec![self.step(&f)]
            }
            Expr::IfExp(i) => {
                let f = self.expr(&i.test, preds);
                let d = self.step(&f);
                let then = self.step(&[d]);
                let mut out = self.expr(&i.body, vec![then]);
                let other = self.step(&[d]);
                out.extend(self.expr(&i.orelse, vec![other]));
                vec![self.step(&out)]
            }
            Expr::ListComp(c) => self.comprehension(&c.generators, vec![&c.elt], preds),
            Expr::SetComp(c) => self.comprehension(&c.generators, vec![&c.elt], preds),
            Expr::GeneratorExp(c) => self.comprehension(&c.generators, vec![&c.elt], preds),
            Expr::DictComp(c) => self.comprehension(&c.generators, vec![&c.key, &c.value], preds),
            Expr::Lambda(l) => {
                let defaults = self.arguments(&l.args);
                let f = self.exprs(defaults, preds);
                self.expr(&l.body, f)
            }
            Expr::NamedExpr(x) => self.exprs([x.value.as_ref(), x.target.as_ref()], preds),
            Expr::BinOp(x) => self.exprs([x.left.as_ref(), x.right.as_ref()], preds),
            Expr::UnaryOp(x) => self.expr(&x.operand, preds),
            Expr::Dict(x) => {
                let mut f = preds;
                for (k, v) in x.keys.iter().zip(&x.values) {
                    f = self.exprs(k.iter().chain(std::iter::once(v)), f);
                }
                f
            }
            Expr::Set(x) => self.exprs(&x.elts, preds),
            Expr::List(x) => self.exprs(&x.elts, preds),
            Expr::Tuple(x) => self.exprs(&x.elts, preds),
            Expr::Await(x) => self.expr(&x.value, preds),
            Expr::Yield(x) => self.exprs(x.value.as_deref(), preds),
            Expr::YieldFrom(x) => self.expr(&x.value, preds),
            Expr::Compare(x) => self.exprs(std::iter::once(x.left.as_ref()).chain(&x.comparators), preds),
            Expr::Call(x) => {
                let f = self.expr(&x.func, preds);
                let f = self.exprs(&x.args, f);
                self.exprs(x.keywords.iter().map(|k| &k.value), f)
            }
            Expr::FormattedValue(x) => {
                self.exprs(std::iter::once(x.value.as_ref()).chain(x.format_spec.as_deref()), preds)
            }
            Expr::JoinedStr(x) => self.exprs(&x.values, preds),
            Expr::Attribute(x) => self.expr(&x.value, preds),
            Expr::Subscript(x) => self.exprs([x.value.as_ref(), x.slice.as_ref()], preds),
            Expr::Starred(x) => self.expr(&x.value, preds),
            Expr::Slice(x) => self.exprs(
                x.lower.as_deref().into_iter().chain(x.upper.as_deref()).chain(x.step.as_deref()),
                preds,
            ),
            Expr::Constant(_) | Expr::Name(_) => preds,
        }
    }
}

/// Capture patterns and `_` succeed on any subject.
fn always_matches(p: &Pattern) -> bool {
    match p {
        Pattern::MatchAs(a) => a.pattern.is_none(),
        Pattern::MatchOr(o) => o.patterns.iter().any(always_matches),
        _ => false,
    }
}
