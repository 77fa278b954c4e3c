use std::collections::{BTreeMap, BTreeSet};
use std::sync::Arc;

use rustpython_parser::ast::{self, Constant, Expr, Pattern, Ranged, Stmt};
use rustpython_parser::lexer::lex;
use rustpython_parser::text_size::{TextRange, TextSize};
use rustpython_parser::{Mode, Parse, Tok};

use super::halstead::{HalsteadClass, HalsteadTable};
use super::{
    AstSummary, Definition, DefinitionKind, FunctionSummary, Grammar, HalsteadCounts, ItemKind,
    LineSpan, ParseError, TopLevelItem,
};

pub struct PythonGrammar {
    halstead: Arc<HalsteadTable>,
}

impl PythonGrammar {
    pub fn new(halstead: Arc<HalsteadTable>) -> Self {
        Self { halstead }
    }
}

impl Grammar for PythonGrammar {
    fn name(&self) -> &str {
        "python"
    }

    fn analyze(&self, source: &str) -> Result<AstSummary, ParseError> {
        let index = LineIndex::new(source);
        let suite = parse_suite(source, &index)?;
        let tokens = significant_tokens(source, &index)?;

        let mut walker = Walker::new(&index);
        walker.walk_body(&suite, true);
        let has_module_code = module_code_present(&suite);

        let (operators, operands) = halstead_counts(source, &tokens, &self.halstead);
        let sloc = sloc(source, &tokens, &index);

        let definitions = suite
            .iter()
            .filter_map(|s| match s {
                Stmt::FunctionDef(f) => Some(Definition {
                    name: f.name.to_string(),
                    kind: DefinitionKind::Function,
                }),
                Stmt::AsyncFunctionDef(f) => Some(Definition {
                    name: f.name.to_string(),
                    kind: DefinitionKind::Function,
                }),
                Stmt::ClassDef(c) => Some(Definition {
                    name: c.name.to_string(),
                    kind: DefinitionKind::Class,
                }),
                _ => None,
            })
            .collect();

        Ok(AstSummary {
            functions: walker.functions,
            has_module_code,
            module_decision_points: walker.module_decisions,
            call_sites: walker.calls,
            definitions,
            operators,
            operands,
            sloc,
            physical_lines: index.physical_lines(),
        })
    }

    fn top_level_items(&self, source: &str) -> Result<Vec<TopLevelItem>, ParseError> {
        let index = LineIndex::new(source);
        let suite = parse_suite(source, &index)?;
        Ok(suite
            .iter()
            .map(|stmt| {
                let text = slice(source, item_range(source, stmt)).to_string();
                let (kind, name) = match stmt {
                    Stmt::FunctionDef(f) => (ItemKind::Function, Some(f.name.to_string())),
                    Stmt::AsyncFunctionDef(f) => (ItemKind::Function, Some(f.name.to_string())),
                    Stmt::ClassDef(c) => (ItemKind::Class, Some(c.name.to_string())),
                    Stmt::Import(_) | Stmt::ImportFrom(_) => (ItemKind::Import, None),
                    Stmt::Assign(a) if a.targets.len() == 1 => match &a.targets[0] {
                        Expr::Name(n) => (ItemKind::Assignment, Some(n.id.to_string())),
                        _ => (ItemKind::Other, None),
                    },
                    Stmt::AnnAssign(a) => match a.target.as_ref() {
                        Expr::Name(n) => (ItemKind::Assignment, Some(n.id.to_string())),
                        _ => (ItemKind::Other, None),
                    },
                    _ => (ItemKind::Other, None),
                };
                TopLevelItem { kind, name, text }
            })
            .collect())
    }

    fn rename_identifier(&self, source: &str, old: &str, new: &str) -> Result<String, ParseError> {
        let index = LineIndex::new(source);
        let tokens = significant_tokens(source, &index)?;
        let mut brackets: Vec<&Tok> = Vec::new();
        let mut edits: Vec<TextRange> = Vec::new();
        for (i, (tok, range)) in tokens.iter().enumerate() {
            match tok {
                Tok::Lpar | Tok::Lsqb | Tok::Lbrace => brackets.push(tok),
                Tok::Rpar | Tok::Rsqb | Tok::Rbrace => {
                    brackets.pop();
                }
                Tok::Name { name } if name == old => {
                    let after_dot = i > 0 && matches!(tokens[i - 1].0, Tok::Dot);
                    let keyword_arg = matches!(brackets.last(), Some(Tok::Lpar))
                        && matches!(tokens.get(i + 1), Some((Tok::Equal, _)));
                    if !after_dot && !keyword_arg {
                        edits.push(*range);
                    }
                }
                _ => {}
            }
        }
        let mut out = String::with_capacity(source.len());
        let mut last = 0usize;
        for range in edits {
            let (start, end) = (usize::from(range.start()), usize::from(range.end()));
            out.push_str(&source[last..start]);
            out.push_str(new);
            last = end;
        }
        out.push_str(&source[last..]);
        parse_suite(&out, &LineIndex::new(&out))?;
        Ok(out)
    }
}

/// The statement's range, widened to include any decorators.
fn item_range(source: &str, stmt: &Stmt) -> TextRange {
    let decorators = match stmt {
        Stmt::FunctionDef(f) => &f.decorator_list,
        Stmt::AsyncFunctionDef(f) => &f.decorator_list,
        Stmt::ClassDef(c) => &c.decorator_list,
        _ => return stmt.range(),
    };
    let Some(first) = decorators.iter().map(|d| usize::from(d.range().start())).min() else {
        return stmt.range();
    };
    let at = source[..first].rfind('@').unwrap_or(first);
    TextRange::new(TextSize::from(at as u32), stmt.range().end())
}

fn slice(source: &str, range: TextRange) -> &str {
    &source[usize::from(range.start())..usize::from(range.end())]
}

struct LineIndex {
    starts: Vec<usize>,
    len: usize,
    ends_with_newline: bool,
}

impl LineIndex {
    fn new(source: &str) -> Self {
        let mut starts = vec![0];
        let bytes = source.as_bytes();
        let mut i = 0;
        while i < bytes.len() {
            match bytes[i] {
                b'\n' => starts.push(i + 1),
                b'\r' => {
                    if bytes.get(i + 1) == Some(&b'\n') {
                        i += 1;
                    }
                    starts.push(i + 1);
                }
                _ => {}
            }
            i += 1;
        }
        Self {
            starts,
            len: source.len(),
            ends_with_newline: source.ends_with('\n') || source.ends_with('\r'),
        }
    }

    /// Zero-based line of a byte offset.
    fn line_of(&self, offset: usize) -> usize {
        match self.starts.binary_search(&offset) {
            Ok(i) => i,
            Err(i) => i - 1,
        }
    }

    fn physical_lines(&self) -> usize {
        if self.len == 0 {
            0
        } else if self.ends_with_newline {
            self.starts.len() - 1
        } else {
            self.starts.len()
        }
    }

    fn line_bounds(&self, line: usize) -> (usize, usize) {
        let start = self.starts[line];
        let end = self.starts.get(line + 1).copied().unwrap_or(self.len);
        (start, end)
    }

    fn error(&self, source: &str, offset: TextSize, message: String) -> ParseError {
        let offset = usize::from(offset).min(source.len());
        let line = self.line_of(offset);
        let column = source[self.starts[line]..offset].chars().count() + 1;
        ParseError {
            line: line + 1,
            column,
            message,
        }
    }
}

fn parse_suite(source: &str, index: &LineIndex) -> Result<ast::Suite, ParseError> {
    ast::Suite::parse(source, "<source>")
        .map_err(|e| index.error(source, e.offset, e.error.to_string()))
}

fn significant_tokens(source: &str, index: &LineIndex) -> Result<Vec<(Tok, TextRange)>, ParseError> {
    let mut out = Vec::new();
    for item in lex(source, Mode::Module) {
        let (tok, range) = item.map_err(|e| index.error(source, e.location, e.error.to_string()))?;
        match tok {
            Tok::Newline | Tok::Indent | Tok::Dedent | Tok::EndOfFile => {}
            _ => out.push((tok, range)),
        }
    }
    Ok(out)
}

/// Physical lines that hold part of a significant token, excluding lines
/// that are blank on their own (e.g. inside a triple-quoted string).
fn sloc(source: &str, tokens: &[(Tok, TextRange)], index: &LineIndex) -> usize {
    let mut lines = BTreeSet::new();
    for (_, range) in tokens {
        let first = index.line_of(usize::from(range.start()));
        let last = index.line_of(usize::from(range.end()).saturating_sub(1).max(usize::from(range.start())));
        for line in first..=last {
            lines.insert(line);
        }
    }
    lines
        .into_iter()
        .filter(|&line| {
            let (start, end) = index.line_bounds(line);
            !source[start..end].trim().is_empty()
        })
        .count()
}

/// Marks tokens that begin a logical line. A token begins one when the
/// source between it and the previous token holds a newline outside of
/// brackets, or a semicolon precedes it.
fn logical_line_starts(source: &str, tokens: &[(Tok, TextRange)]) -> Vec<bool> {
    let mut depth = 0i32;
    let mut out = Vec::with_capacity(tokens.len());
    let mut prev_end = 0usize;
    for (i, (tok, range)) in tokens.iter().enumerate() {
        let gap = &source[prev_end..usize::from(range.start())];
        let starts = i == 0
            || matches!(tokens[i - 1].0, Tok::Semi)
            || (depth == 0 && !gap_is_continuation(gap) && gap.contains(['\n', '\r']));
        out.push(starts);
        match tok {
            Tok::Lpar | Tok::Lsqb | Tok::Lbrace => depth += 1,
            Tok::Rpar | Tok::Rsqb | Tok::Rbrace => depth -= 1,
            _ => {}
        }
        prev_end = usize::from(range.end());
    }
    out
}

fn gap_is_continuation(gap: &str) -> bool {
    gap.trim_start_matches([' ', '\t', '\x0c']).starts_with('\\')
}

fn halstead_counts(
    source: &str,
    tokens: &[(Tok, TextRange)],
    table: &HalsteadTable,
) -> (HalsteadCounts, HalsteadCounts) {
    let line_starts = logical_line_starts(source, tokens);
    let mut operators: BTreeMap<&str, u64> = BTreeMap::new();
    let mut operands: BTreeMap<&str, u64> = BTreeMap::new();
    for (i, (tok, range)) in tokens.iter().enumerate() {
        let text = slice(source, *range);
        let key = match tok {
            Tok::Name { .. } => "name",
            Tok::Int { .. } | Tok::Float { .. } | Tok::Complex { .. } => "number",
            Tok::String { .. } => "string",
            Tok::Match | Tok::Case | Tok::Type if !soft_keyword_position(tokens, &line_starts, i) => {
                "name"
            }
            _ => text,
        };
        match table.classify(key) {
            HalsteadClass::Operator => *operators.entry(text).or_default() += 1,
            HalsteadClass::Operand => *operands.entry(text).or_default() += 1,
            HalsteadClass::Ignore => {}
        }
    }
    let counts = |m: &BTreeMap<&str, u64>| HalsteadCounts {
        total: m.values().sum(),
        distinct: m.len() as u64,
    };
    (counts(&operators), counts(&operands))
}

/// `match` and `case` are keywords only when they open a logical line that
/// ends in a colon; `type` only when it opens `type Name = ...` or
/// `type Name[...] = ...`.
fn soft_keyword_position(tokens: &[(Tok, TextRange)], line_starts: &[bool], i: usize) -> bool {
    if !line_starts[i] {
        return false;
    }
    let next = tokens.get(i + 1).map(|t| &t.0);
    if matches!(tokens[i].0, Tok::Type) {
        return matches!(next, Some(Tok::Name { .. }))
            && matches!(tokens.get(i + 2).map(|t| &t.0), Some(Tok::Equal | Tok::Lsqb));
    }
    if matches!(next, None | Some(Tok::Equal | Tok::Dot | Tok::Colon | Tok::Comma)) {
        return false;
    }
    let mut last = None;
    for j in i + 1..tokens.len() {
        if line_starts[j] {
            break;
        }
        last = Some(&tokens[j].0);
    }
    matches!(last, Some(Tok::Colon))
}

fn is_docstring(stmt: &Stmt) -> bool {
    matches!(stmt, Stmt::Expr(e) if matches!(e.value.as_ref(), Expr::Constant(c) if matches!(c.value, Constant::Str(_))))
}

/// Executable statements outside any function body: anything at module or
/// class level other than definitions, imports, docstrings and `pass`.
fn module_code_present(body: &[Stmt]) -> bool {
    body.iter().enumerate().any(|(i, stmt)| match stmt {
        Stmt::FunctionDef(_) | Stmt::AsyncFunctionDef(_) => false,
        Stmt::ClassDef(c) => module_code_present(&c.body),
        Stmt::Import(_) | Stmt::ImportFrom(_) | Stmt::Pass(_) => false,
        s if i == 0 && is_docstring(s) => false,
        _ => true,
    })
}

struct Frame {
    name: String,
    span: LineSpan,
    decisions: u32,
}

struct Walker<'a> {
    index: &'a LineIndex,
    frames: Vec<Frame>,
    scope: Vec<String>,
    functions: Vec<FunctionSummary>,
    module_decisions: u32,
    calls: BTreeMap<String, u32>,
}

impl<'a> Walker<'a> {
    fn new(index: &'a LineIndex) -> Self {
        Self {
            index,
            frames: Vec::new(),
            scope: Vec::new(),
            functions: Vec::new(),
            module_decisions: 0,
            calls: BTreeMap::new(),
        }
    }

    fn add(&mut self, n: usize) {
        let n = n as u32;
        match self.frames.last_mut() {
            Some(f) => f.decisions += n,
            None => self.module_decisions += n,
        }
    }

    fn walk_body(&mut self, body: &[Stmt], _top: bool) {
        for stmt in body {
            self.walk_stmt(stmt);
        }
    }

    fn walk_exprs<'e>(&mut self, exprs: impl IntoIterator<Item = &'e Expr>) {
        for e in exprs {
            self.walk_expr(e);
        }
    }

    fn walk_opt(&mut self, e: &Option<Box<Expr>>) {
        if let Some(e) = e {
            self.walk_expr(e);
        }
    }

    fn walk_arguments(&mut self, args: &ast::Arguments) {
        for a in args.posonlyargs.iter().chain(&args.args).chain(&args.kwonlyargs) {
            self.walk_opt(&a.def.annotation);
            self.walk_opt(&a.default);
        }
        for a in args.vararg.iter().chain(args.kwarg.iter()) {
            self.walk_opt(&a.annotation);
        }
    }

    fn walk_function(
        &mut self,
        name: &str,
        range: TextRange,
        args: &ast::Arguments,
        body: &[Stmt],
        decorators: &[Expr],
        returns: &Option<Box<Expr>>,
    ) {
        self.walk_exprs(decorators);
        self.walk_arguments(args);
        self.walk_opt(returns);

        self.scope.push(name.to_string());
        let start = self.index.line_of(usize::from(range.start())) + 1;
        let end = self.index.line_of(usize::from(range.end()).saturating_sub(1)) + 1;
        self.frames.push(Frame {
            name: self.scope.join("."),
            span: LineSpan { start, end },
            decisions: 0,
        });
        self.walk_body(body, false);
        let frame = self.frames.pop().expect("frame pushed above");
        self.scope.pop();
        self.functions.push(FunctionSummary {
            name: frame.name,
            span: frame.span,
            decision_points: frame.decisions,
        });
    }

    fn walk_stmt(&mut self, stmt: &Stmt) {
        match stmt {
            Stmt::FunctionDef(f) => {
                self.walk_function(&f.name, f.range, &f.args, &f.body, &f.decorator_list, &f.returns)
            }
            Stmt::AsyncFunctionDef(f) => {
                self.walk_function(&f.name, f.range, &f.args, &f.body, &f.decorator_list, &f.returns)
            }
            Stmt::ClassDef(c) => {
                self.walk_exprs(&c.decorator_list);
                self.walk_exprs(&c.bases);
                self.walk_exprs(c.keywords.iter().map(|k| &k.value));
                self.scope.push(c.name.to_string());
                self.walk_body(&c.body, false);
                self.scope.pop();
            }
            Stmt::Return(s) => self.walk_opt(&s.value),
            Stmt::Delete(s) => self.walk_exprs(&s.targets),
            Stmt::Assign(s) => {
                self.walk_exprs(&s.targets);
                self.walk_expr(&s.value);
            }
            Stmt::TypeAlias(s) => {
                self.walk_expr(&s.name);
                self.walk_expr(&s.value);
            }
            Stmt::AugAssign(s) => {
                self.walk_expr(&s.target);
                self.walk_expr(&s.value);
            }
            Stmt::AnnAssign(s) => {
                self.walk_expr(&s.target);
                self.walk_expr(&s.annotation);
                self.walk_opt(&s.value);
            }
            Stmt::For(s) => {
                self.add(1);
                self.walk_expr(&s.target);
                self.walk_expr(&s.iter);
                self.walk_body(&s.body, false);
                self.walk_body(&s.orelse, false);
            }
            Stmt::AsyncFor(s) => {
                self.add(1);
                self.walk_expr(&s.target);
                self.walk_expr(&s.iter);
                self.walk_body(&s.body, false);
                self.walk_body(&s.orelse, false);
            }
            Stmt::While(s) => {
                self.add(1);
                self.walk_expr(&s.test);
                self.walk_body(&s.body, false);
                self.walk_body(&s.orelse, false);
            }
            Stmt::If(s) => {
                self.add(1);
                self.walk_expr(&s.test);
                self.walk_body(&s.body, false);
                self.walk_body(&s.orelse, false);
            }
            Stmt::With(s) => {
                for item in &s.items {
                    self.walk_expr(&item.context_expr);
                    self.walk_opt(&item.optional_vars);
                }
                self.walk_body(&s.body, false);
            }
            Stmt::AsyncWith(s) => {
                for item in &s.items {
                    self.walk_expr(&item.context_expr);
                    self.walk_opt(&item.optional_vars);
                }
                self.walk_body(&s.body, false);
            }
            Stmt::Match(s) => {
                self.walk_expr(&s.subject);
                for case in &s.cases {
                    if !irrefutable(&case.pattern) {
                        self.add(1);
                    }
                    if let Some(guard) = &case.guard {
                        self.add(1);
                        self.walk_expr(guard);
                    }
                    self.walk_body(&case.body, false);
                }
            }
            Stmt::Raise(s) => {
                self.walk_opt(&s.exc);
                self.walk_opt(&s.cause);
            }
            Stmt::Try(s) => {
                self.add(s.handlers.len());
                self.walk_try(&s.body, &s.handlers, &s.orelse, &s.finalbody);
            }
            Stmt::TryStar(s) => {
                self.add(s.handlers.len());
                self.walk_try(&s.body, &s.handlers, &s.orelse, &s.finalbody);
            }
            Stmt::Assert(s) => {
                self.walk_expr(&s.test);
                self.walk_opt(&s.msg);
            }
            Stmt::Expr(s) => self.walk_expr(&s.value),
            Stmt::Import(_)
            | Stmt::ImportFrom(_)
            | Stmt::Global(_)
            | Stmt::Nonlocal(_)
            | Stmt::Pass(_)
            | Stmt::Break(_)
            | Stmt::Continue(_) => {}
        }
    }

    fn walk_try(
        &mut self,
        body: &[Stmt],
        handlers: &[ast::ExceptHandler],
        orelse: &[Stmt],
        finalbody: &[Stmt],
    ) {
        self.walk_body(body, false);
        for handler in handlers {
            let ast::ExceptHandler::ExceptHandler(h) = handler;
            self.walk_opt(&h.type_);
            self.walk_body(&h.body, false);
        }
        self.walk_body(orelse, false);
        self.walk_body(finalbody, false);
    }

    fn walk_generators(&mut self, generators: &[ast::Comprehension]) {
        for g in generators {
            self.add(1 + g.ifs.len());
            self.walk_expr(&g.target);
            self.walk_expr(&g.iter);
            self.walk_exprs(&g.ifs);
        }
    }

    fn walk_expr(&mut self, expr: &Expr) {
        match expr {
            Expr::BoolOp(e) => {
                self.add(e.values.len().saturating_sub(1));
                self.walk_exprs(&e.values);
            }
            Expr::NamedExpr(e) => {
                self.walk_expr(&e.target);
                self.walk_expr(&e.value);
            }
            Expr::BinOp(e) => {
                self.walk_expr(&e.left);
                self.walk_expr(&e.right);
            }
            Expr::UnaryOp(e) => self.walk_expr(&e.operand),
            Expr::Lambda(e) => {
                self.walk_arguments(&e.args);
                self.walk_expr(&e.body);
            }
            Expr::IfExp(e) => {
                self.add(1);
                self.walk_expr(&e.test);
                self.walk_expr(&e.body);
                self.walk_expr(&e.orelse);
            }
            Expr::Dict(e) => {
                self.walk_exprs(e.keys.iter().flatten());
                self.walk_exprs(&e.values);
            }
            Expr::Set(e) => self.walk_exprs(&e.elts),
            Expr::ListComp(e) => {
                self.walk_generators(&e.generators);
                self.walk_expr(&e.elt);
            }
            Expr::SetComp(e) => {
                self.walk_generators(&e.generators);
                self.walk_expr(&e.elt);
            }
            Expr::GeneratorExp(e) => {
                self.walk_generators(&e.generators);
                self.walk_expr(&e.elt);
            }
            Expr::DictComp(e) => {
                self.walk_generators(&e.generators);
                self.walk_expr(&e.key);
                self.walk_expr(&e.value);
            }
            Expr::Await(e) => self.walk_expr(&e.value),
            Expr::Yield(e) => self.walk_opt(&e.value),
            Expr::YieldFrom(e) => self.walk_expr(&e.value),
            Expr::Compare(e) => {
                self.walk_expr(&e.left);
                self.walk_exprs(&e.comparators);
            }
            Expr::Call(e) => {
                if let Some(name) = callee_name(&e.func) {
                    *self.calls.entry(name).or_default() += 1;
                }
                self.walk_expr(&e.func);
                self.walk_exprs(&e.args);
                self.walk_exprs(e.keywords.iter().map(|k| &k.value));
            }
            Expr::FormattedValue(e) => {
                self.walk_expr(&e.value);
                self.walk_opt(&e.format_spec);
            }
            Expr::JoinedStr(e) => self.walk_exprs(&e.values),
            Expr::Constant(_) | Expr::Name(_) => {}
            Expr::Attribute(e) => self.walk_expr(&e.value),
            Expr::Subscript(e) => {
                self.walk_expr(&e.value);
                self.walk_expr(&e.slice);
            }
            Expr::Starred(e) => self.walk_expr(&e.value),
            Expr::List(e) => self.walk_exprs(&e.elts),
            Expr::Tuple(e) => self.walk_exprs(&e.elts),
            Expr::Slice(e) => {
                self.walk_opt(&e.lower);
                self.walk_opt(&e.upper);
                self.walk_opt(&e.step);
            }
        }
    }
}

/// Capture and wildcard patterns always match.
fn irrefutable(pattern: &Pattern) -> bool {
    match pattern {
        Pattern::MatchAs(p) => p.pattern.is_none(),
        Pattern::MatchOr(p) => p.patterns.iter().any(irrefutable),
        _ => false,
    }
}

fn callee_name(func: &Expr) -> Option<String> {
    match func {
        Expr::Name(n) => Some(n.id.to_string()),
        Expr::Attribute(a) => match a.value.as_ref() {
            Expr::Name(n) => Some(format!("{}.{}", n.id, a.attr)),
            _ => Some(format!(".{}", a.attr)),
        },
        _ => None,
    }
}
