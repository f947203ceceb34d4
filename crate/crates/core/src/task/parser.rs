//! Recursive-descent parser for `.task` files.
//!
//! ```text
//! file      := section*
//! section   := "objects" "{" (("element" | "tray") ":" ident ("," ident)*)* "}"
//!            | "predicates" "{" (ident "/" number ("," ident "/" number)* ","?)? "}"
//!            | "steps" "{" step* "}"
//!            | ("initial" | "final") "{" atoms "}"
//! step      := "step" string "{" (("actions" | "pre" | "add" | "del") ":" atoms)* "}"
//! atoms     := (atom ("," atom)* ","?)?
//! atom      := ident "(" (ident ("," ident)*)? ")"
//! ```
//!
//! Whitespace and newlines are insignificant, `#` starts a line comment and
//! identifiers may carry primes (`E4'`). Syntax errors stop the parse; semantic
//! errors are collected and reported together.

use std::collections::{BTreeSet, HashMap, HashSet};
use std::fmt;

use thiserror::Error;

use super::{
    ActionInstance, Configuration, ObjectDecl, ObjectKind, Predicate, PredicateSchema, Step, TaskDefinition,
    ELEMENTARY_ACTIONS, MAX_ARITY,
};

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum DiagnosticKind {
    Syntax,
    Semantic,
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Diagnostic {
    pub line: usize,
    pub column: usize,
    pub kind: DiagnosticKind,
    pub message: String,
}

impl fmt::Display for Diagnostic {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let kind = match self.kind {
            DiagnosticKind::Syntax => "syntax error",
            DiagnosticKind::Semantic => "error",
        };
        write!(f, "{}:{}: {}: {}", self.line, self.column, kind, self.message)
    }
}

#[derive(Debug, Error, Clone, PartialEq)]
#[error("{}", .diagnostics.iter().map(ToString::to_string).collect::<Vec<_>>().join("\n"))]
pub struct ParseError {
    pub diagnostics: Vec<Diagnostic>,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Default)]
struct Pos {
    line: usize,
    column: usize,
}

#[derive(Clone, Debug, PartialEq)]
enum Tok {
    Ident(String),
    Str(String),
    Number(u64),
    LBrace,
    RBrace,
    LParen,
    RParen,
    Comma,
    Colon,
    Slash,
    Eof,
}

impl Tok {
    fn describe(&self) -> String {
        match self {
            Tok::Ident(s) => format!("identifier `{s}`"),
            Tok::Str(s) => format!("string \"{s}\""),
            Tok::Number(n) => format!("number {n}"),
            Tok::LBrace => "`{`".into(),
            Tok::RBrace => "`}`".into(),
            Tok::LParen => "`(`".into(),
            Tok::RParen => "`)`".into(),
            Tok::Comma => "`,`".into(),
            Tok::Colon => "`:`".into(),
            Tok::Slash => "`/`".into(),
            Tok::Eof => "end of input".into(),
        }
    }
}

fn syntax(pos: Pos, message: String) -> Diagnostic {
    Diagnostic {
        line: pos.line,
        column: pos.column,
        kind: DiagnosticKind::Syntax,
        message,
    }
}

fn lex(text: &str) -> Result<Vec<(Tok, Pos)>, Diagnostic> {
    let mut out = Vec::new();
    let mut chars = text.chars().peekable();
    let mut pos = Pos { line: 1, column: 1 };

    fn advance(pos: &mut Pos, c: char) {
        if c == '\n' {
            pos.line += 1;
            pos.column = 1;
        } else {
            pos.column += 1;
        }
    }

    while let Some(&c) = chars.peek() {
        let start = pos;
        match c {
            c if c.is_whitespace() => {
                chars.next();
                advance(&mut pos, c);
            }
            '#' => {
                while let Some(&c) = chars.peek() {
                    if c == '\n' {
                        break;
                    }
                    chars.next();
                    advance(&mut pos, c);
                }
            }
            '{' | '}' | '(' | ')' | ',' | ':' | '/' => {
                chars.next();
                advance(&mut pos, c);
                let tok = match c {
                    '{' => Tok::LBrace,
                    '}' => Tok::RBrace,
                    '(' => Tok::LParen,
                    ')' => Tok::RParen,
                    ',' => Tok::Comma,
                    ':' => Tok::Colon,
                    _ => Tok::Slash,
                };
                out.push((tok, start));
            }
            '"' => {
                chars.next();
                advance(&mut pos, c);
                let mut s = String::new();
                loop {
                    match chars.next() {
                        None | Some('\n') => return Err(syntax(start, "unterminated string literal".into())),
                        Some('"') => {
                            advance(&mut pos, '"');
                            break;
                        }
                        Some('\\') => {
                            advance(&mut pos, '\\');
                            match chars.next() {
                                Some(e @ ('"' | '\\')) => {
                                    advance(&mut pos, e);
                                    s.push(e);
                                }
                                _ => return Err(syntax(pos, "invalid escape in string".into())),
                            }
                        }
                        Some(ch) => {
                            advance(&mut pos, ch);
                            s.push(ch);
                        }
                    }
                }
                out.push((Tok::Str(s), start));
            }
            c if c.is_ascii_digit() => {
                let mut s = String::new();
                while let Some(&d) = chars.peek() {
                    if !d.is_ascii_digit() {
                        break;
                    }
                    s.push(d);
                    chars.next();
                    advance(&mut pos, d);
                }
                let n = s
                    .parse()
                    .map_err(|_| syntax(start, format!("number `{s}` out of range")))?;
                out.push((Tok::Number(n), start));
            }
            c if c.is_alphabetic() || c == '_' => {
                let mut s = String::new();
                while let Some(&d) = chars.peek() {
                    if !(d.is_alphanumeric() || d == '_' || d == '\'') {
                        break;
                    }
                    s.push(d);
                    chars.next();
                    advance(&mut pos, d);
                }
                out.push((Tok::Ident(s), start));
            }
            other => return Err(syntax(start, format!("unexpected character `{other}`"))),
        }
    }
    out.push((Tok::Eof, pos));
    Ok(out)
}

#[derive(Debug, Clone)]
struct Spanned<T> {
    value: T,
    pos: Pos,
}

#[derive(Debug, Clone)]
struct RawAtom {
    name: Spanned<String>,
    args: Vec<Spanned<String>>,
}

#[derive(Debug, Default)]
struct RawStep {
    name: Option<Spanned<String>>,
    actions: Vec<RawAtom>,
    pre: Vec<RawAtom>,
    add: Vec<RawAtom>,
    del: Vec<RawAtom>,
}

#[derive(Debug, Default)]
struct RawTask {
    objects: Vec<(Spanned<String>, ObjectKind)>,
    schemas: Vec<(Spanned<String>, Spanned<u64>)>,
    steps: Vec<RawStep>,
    initial: Option<(Pos, Vec<RawAtom>)>,
    goal: Option<(Pos, Vec<RawAtom>)>,
    duplicate_sections: Vec<Spanned<String>>,
}

struct Parser {
    toks: Vec<(Tok, Pos)>,
    at: usize,
}

impl Parser {
    fn peek(&self) -> &Tok {
        &self.toks[self.at].0
    }

    fn peek2(&self) -> &Tok {
        &self.toks[(self.at + 1).min(self.toks.len() - 1)].0
    }

    fn pos(&self) -> Pos {
        self.toks[self.at].1
    }

    fn bump(&mut self) -> (Tok, Pos) {
        let t = self.toks[self.at].clone();
        if self.at + 1 < self.toks.len() {
            self.at += 1;
        }
        t
    }

    fn unexpected(&self, expected: &[&str]) -> Diagnostic {
        syntax(
            self.pos(),
            format!("expected {}, found {}", expected.join(" or "), self.peek().describe()),
        )
    }

    fn expect(&mut self, tok: Tok, what: &str) -> Result<Pos, Diagnostic> {
        if *self.peek() == tok {
            Ok(self.bump().1)
        } else {
            Err(self.unexpected(&[what]))
        }
    }

    fn ident(&mut self) -> Result<Spanned<String>, Diagnostic> {
        match self.peek().clone() {
            Tok::Ident(s) => {
                let pos = self.bump().1;
                Ok(Spanned { value: s, pos })
            }
            _ => Err(self.unexpected(&["identifier"])),
        }
    }

    fn at_keyword(&self, kw: &str) -> bool {
        matches!(self.peek(), Tok::Ident(s) if s == kw)
    }

    fn file(&mut self) -> Result<RawTask, Diagnostic> {
        let mut task = RawTask::default();
        let mut seen: HashSet<String> = HashSet::new();
        loop {
            let (tok, pos) = (self.peek().clone(), self.pos());
            let name = match tok {
                Tok::Eof => break,
                Tok::Ident(s) if matches!(s.as_str(), "objects" | "predicates" | "steps" | "initial" | "final") => s,
                _ => return Err(self.unexpected(&["`objects`", "`predicates`", "`steps`", "`initial`", "`final`"])),
            };
            self.bump();
            if !seen.insert(name.clone()) {
                task.duplicate_sections.push(Spanned {
                    value: name.clone(),
                    pos,
                });
            }
            self.expect(Tok::LBrace, "`{`")?;
            match name.as_str() {
                "objects" => self.objects(&mut task)?,
                "predicates" => self.schemas(&mut task)?,
                "steps" => {
                    while self.at_keyword("step") {
                        let step = self.step()?;
                        task.steps.push(step);
                    }
                }
                "initial" => task.initial = Some((pos, self.atoms()?)),
                _ => task.goal = Some((pos, self.atoms()?)),
            }
            if *self.peek() != Tok::RBrace {
                let expected: &[&str] = match name.as_str() {
                    "objects" => &["`element`", "`tray`", "`}`"],
                    "predicates" => &["`,`", "`}`"],
                    "steps" => &["`step`", "`}`"],
                    _ => &["`,`", "`}`"],
                };
                return Err(self.unexpected(expected));
            }
            self.bump();
        }
        Ok(task)
    }

    fn objects(&mut self, task: &mut RawTask) -> Result<(), Diagnostic> {
        loop {
            let kind = if self.at_keyword("element") {
                ObjectKind::Element
            } else if self.at_keyword("tray") {
                ObjectKind::Tray
            } else {
                return Ok(());
            };
            self.bump();
            self.expect(Tok::Colon, "`:`")?;
            loop {
                let name = self.ident()?;
                task.objects.push((name, kind));
                if *self.peek() == Tok::Comma {
                    self.bump();
                } else {
                    break;
                }
            }
        }
    }

    fn schemas(&mut self, task: &mut RawTask) -> Result<(), Diagnostic> {
        while matches!(self.peek(), Tok::Ident(_)) {
            let name = self.ident()?;
            self.expect(Tok::Slash, "`/`")?;
            let arity = match self.peek().clone() {
                Tok::Number(n) => Spanned {
                    value: n,
                    pos: self.bump().1,
                },
                _ => return Err(self.unexpected(&["arity"])),
            };
            task.schemas.push((name, arity));
            if *self.peek() == Tok::Comma {
                self.bump();
            } else {
                break;
            }
        }
        Ok(())
    }

    fn step(&mut self) -> Result<RawStep, Diagnostic> {
        self.bump();
        let name = match self.peek().clone() {
            Tok::Str(s) => Spanned {
                value: s,
                pos: self.bump().1,
            },
            _ => return Err(self.unexpected(&["step name string"])),
        };
        self.expect(Tok::LBrace, "`{`")?;
        let mut step = RawStep {
            name: Some(name),
            ..Default::default()
        };
        let mut seen = HashSet::new();
        loop {
            let field = match self.peek() {
                Tok::Ident(s) if matches!(s.as_str(), "actions" | "pre" | "add" | "del") => s.clone(),
                Tok::RBrace => {
                    self.bump();
                    return Ok(step);
                }
                _ => return Err(self.unexpected(&["`actions`", "`pre`", "`add`", "`del`", "`}`"])),
            };
            let pos = self.bump().1;
            if !seen.insert(field.clone()) {
                return Err(syntax(pos, format!("field `{field}` given twice in one step")));
            }
            self.expect(Tok::Colon, "`:`")?;
            let atoms = self.atoms()?;
            match field.as_str() {
                "actions" => step.actions = atoms,
                "pre" => step.pre = atoms,
                "add" => step.add = atoms,
                _ => step.del = atoms,
            }
        }
    }

    fn atom_ahead(&self) -> bool {
        matches!(self.peek(), Tok::Ident(_)) && *self.peek2() == Tok::LParen
    }

    fn atoms(&mut self) -> Result<Vec<RawAtom>, Diagnostic> {
        let mut out = Vec::new();
        while self.atom_ahead() {
            let name = self.ident()?;
            self.bump();
            let mut args = Vec::new();
            if *self.peek() != Tok::RParen {
                loop {
                    args.push(self.ident()?);
                    match self.peek() {
                        Tok::Comma => {
                            self.bump();
                        }
                        Tok::RParen => break,
                        _ => return Err(self.unexpected(&["`,`", "`)`"])),
                    }
                }
            }
            self.bump();
            out.push(RawAtom { name, args });
            if *self.peek() == Tok::Comma {
                self.bump();
            } else {
                break;
            }
        }
        Ok(out)
    }
}

struct Validator<'a> {
    diags: Vec<Diagnostic>,
    objects: HashMap<&'a str, ObjectKind>,
    schemas: HashMap<&'a str, usize>,
}

impl<'a> Validator<'a> {
    fn error(&mut self, pos: Pos, message: String) {
        self.diags.push(Diagnostic {
            line: pos.line,
            column: pos.column,
            kind: DiagnosticKind::Semantic,
            message,
        });
    }

    fn check_args(&mut self, args: &[Spanned<String>]) {
        for arg in args {
            if !self.objects.contains_key(arg.value.as_str()) {
                self.error(arg.pos, format!("undeclared object `{}`", arg.value));
            }
        }
    }

    fn predicate(&mut self, atom: &RawAtom) -> Predicate {
        match self.schemas.get(atom.name.value.as_str()).copied() {
            None => self.error(atom.name.pos, format!("undeclared predicate `{}`", atom.name.value)),
            Some(arity) if arity != atom.args.len() => self.error(
                atom.name.pos,
                format!(
                    "predicate `{}` takes {} argument(s), found {}",
                    atom.name.value,
                    arity,
                    atom.args.len()
                ),
            ),
            Some(_) => {}
        }
        self.check_args(&atom.args);
        Predicate {
            name: atom.name.value.clone(),
            args: atom.args.iter().map(|a| a.value.clone()).collect(),
        }
    }

    fn predicate_set(&mut self, atoms: &[RawAtom]) -> BTreeSet<Predicate> {
        atoms.iter().map(|a| self.predicate(a)).collect()
    }
}

/// Parses and validates a task definition.
pub fn parse_task_definition(text: &str) -> Result<TaskDefinition, ParseError> {
    let toks = lex(text).map_err(|d| ParseError { diagnostics: vec![d] })?;
    let raw = Parser { toks, at: 0 }
        .file()
        .map_err(|d| ParseError { diagnostics: vec![d] })?;

    let mut v = Validator {
        diags: Vec::new(),
        objects: HashMap::new(),
        schemas: HashMap::new(),
    };

    for dup in &raw.duplicate_sections {
        v.error(dup.pos, format!("section `{}` appears more than once", dup.value));
    }

    let mut objects = Vec::new();
    for (name, kind) in &raw.objects {
        if v.objects.insert(name.value.as_str(), *kind).is_some() {
            v.error(name.pos, format!("duplicate object `{}`", name.value));
            continue;
        }
        objects.push(ObjectDecl {
            name: name.value.clone(),
            kind: *kind,
        });
    }
    if !objects.iter().any(|o| o.kind == ObjectKind::Element) {
        v.error(Pos { line: 1, column: 1 }, "task declares no elements".into());
    }
    if !objects.iter().any(|o| o.kind == ObjectKind::Tray) {
        v.error(Pos { line: 1, column: 1 }, "task declares no trays".into());
    }

    let mut predicate_schemas = Vec::new();
    for (name, arity) in &raw.schemas {
        let a = arity.value as usize;
        if a == 0 || a > MAX_ARITY {
            v.error(
                arity.pos,
                format!("predicate `{}` has arity {}, expected 1 or 2", name.value, arity.value),
            );
        }
        if v.schemas.insert(name.value.as_str(), a).is_some() {
            v.error(name.pos, format!("duplicate predicate `{}`", name.value));
            continue;
        }
        predicate_schemas.push(PredicateSchema {
            name: name.value.clone(),
            arity: a,
        });
    }

    let mut steps = Vec::new();
    let mut step_names = HashSet::new();
    for raw_step in &raw.steps {
        let name = raw_step.name.as_ref().expect("parser always sets step names");
        if !step_names.insert(name.value.as_str()) {
            v.error(name.pos, format!("duplicate step `{}`", name.value));
        }
        let mut actions = Vec::new();
        for a in &raw_step.actions {
            if !ELEMENTARY_ACTIONS.contains(&a.name.value.as_str()) {
                v.error(
                    a.name.pos,
                    format!(
                        "unknown action `{}`, expected one of {}",
                        a.name.value,
                        ELEMENTARY_ACTIONS.join(", ")
                    ),
                );
            }
            v.check_args(&a.args);
            actions.push(ActionInstance {
                name: a.name.value.clone(),
                args: a.args.iter().map(|x| x.value.clone()).collect(),
            });
        }
        let preconditions = v.predicate_set(&raw_step.pre);
        let add_effects = v.predicate_set(&raw_step.add);
        let del_effects = v.predicate_set(&raw_step.del);
        for p in add_effects.intersection(&del_effects) {
            v.error(name.pos, format!("step `{}` both adds and deletes `{p}`", name.value));
        }
        steps.push(Step {
            name: name.value.clone(),
            actions,
            preconditions,
            add_effects,
            del_effects,
        });
    }

    let mut config = |section: &Option<(Pos, Vec<RawAtom>)>, label: &str| match section {
        Some((_, atoms)) => Configuration::from(v.predicate_set(atoms)),
        None => {
            v.error(Pos { line: 1, column: 1 }, format!("missing `{label}` section"));
            Configuration::new()
        }
    };
    let initial = config(&raw.initial, "initial");
    let goal = config(&raw.goal, "final");

    if !v.diags.is_empty() {
        let mut diagnostics = v.diags;
        diagnostics.sort_by_key(|d| (d.line, d.column));
        return Err(ParseError { diagnostics });
    }
    Ok(TaskDefinition {
        objects,
        predicate_schemas,
        steps,
        initial,
        goal,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    const TINY: &str = r#"
# two-step toy
objects {
  element: A, B'
  tray: T_in, T_out
}
predicates { do_contain/2, is_free/1 }
steps {
  step "move A" {
    actions: take(A, T_in), put(A, T_out)
    pre: do_contain(T_in, A)
    add: do_contain(T_out, A)
    del: do_contain(T_in, A)
  }
}
initial { do_contain(T_in, A), is_free(B') }
final { is_free(B'), do_contain(T_out, A) }
"#;

    #[test]
    fn parses_a_small_task() {
        let t = parse_task_definition(TINY).unwrap();
        assert_eq!(t.objects.len(), 4);
        assert_eq!(t.elements().collect::<Vec<_>>(), vec!["A", "B'"]);
        assert_eq!(t.steps.len(), 1);
        assert_eq!(t.steps[0].actions.len(), 2);
        assert_eq!(t.goal.len(), 2);
    }

    #[test]
    fn degenerate_task_without_steps() {
        let src = "objects { element: A tray: T }\npredicates { is_free/1 }\nsteps { }\ninitial { is_free(A) }\nfinal { is_free(A) }\n";
        let t = parse_task_definition(src).unwrap();
        assert!(t.steps.is_empty());
        assert_eq!(t.initial, t.goal);
    }

    #[test]
    fn undeclared_object_is_reported_with_its_line() {
        let src = TINY.replace("pre: do_contain(T_in, A)", "pre: do_contain(T_in, E9)");
        let err = parse_task_definition(&src).unwrap_err();
        assert_eq!(err.diagnostics.len(), 1);
        let d = &err.diagnostics[0];
        assert_eq!(d.kind, DiagnosticKind::Semantic);
        assert!(d.message.contains("E9"), "{}", d.message);
        assert_eq!(d.line, 11);
        assert_eq!(d.column, 27);
    }

    #[test]
    fn arity_mismatch_and_duplicates_are_all_reported() {
        let src = TINY
            .replace("initial { do_contain(T_in, A),", "initial { do_contain(T_in),")
            .replace("element: A, B'", "element: A, B', A");
        let err = parse_task_definition(&src).unwrap_err();
        let msgs: Vec<_> = err.diagnostics.iter().map(|d| d.message.clone()).collect();
        assert!(msgs.iter().any(|m| m.contains("duplicate object `A`")), "{msgs:?}");
        assert!(
            msgs.iter().any(|m| m.contains("takes 2 argument(s), found 1")),
            "{msgs:?}"
        );
    }

    #[test]
    fn syntax_error_lists_expected_tokens() {
        let err = parse_task_definition("objects { element A }").unwrap_err();
        let d = &err.diagnostics[0];
        assert_eq!(d.kind, DiagnosticKind::Syntax);
        assert_eq!((d.line, d.column), (1, 19));
        assert!(d.message.contains("expected `:`"), "{}", d.message);
    }

    #[test]
    fn unknown_action_and_conflicting_effects() {
        let src = TINY.replace("take(A, T_in)", "grab(A, T_in)").replace(
            "add: do_contain(T_out, A)",
            "add: do_contain(T_out, A), do_contain(T_in, A)",
        );
        let err = parse_task_definition(&src).unwrap_err();
        let msgs: Vec<_> = err.diagnostics.iter().map(|d| d.message.clone()).collect();
        assert!(msgs.iter().any(|m| m.contains("unknown action `grab`")));
        assert!(msgs.iter().any(|m| m.contains("both adds and deletes")));
    }

    #[test]
    fn missing_sections_and_unterminated_strings() {
        let err = parse_task_definition("objects { element: A tray: T }").unwrap_err();
        assert!(err.diagnostics.iter().any(|d| d.message.contains("missing `initial`")));
        let err = parse_task_definition("steps { step \"oops }").unwrap_err();
        assert!(err.diagnostics[0].message.contains("unterminated"));
    }

    #[test]
    fn predicate_order_in_source_is_irrelevant() {
        let swapped = TINY.replace(
            "initial { do_contain(T_in, A), is_free(B') }",
            "initial { is_free(B'), do_contain(T_in, A), }",
        );
        assert_eq!(
            parse_task_definition(TINY).unwrap(),
            parse_task_definition(&swapped).unwrap()
        );
    }
}
