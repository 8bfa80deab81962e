//! Recursive-descent parser producing [`Domain`] and [`Problem`] values.

use super::ast::*;
use super::lexer::{tokenize, Tok, Token};
use super::nnf::to_nnf;
use num_rational::Rational64;
use std::collections::HashMap;
use std::fmt;

#[derive(Clone, Debug)]
pub struct ParseError {
    pub msg: String,
    pub line: u32,
    pub col: u32,
}

impl fmt::Display for ParseError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "line {}, col {}: {}", self.line, self.col, self.msg)
    }
}

impl std::error::Error for ParseError {}

/// Requirement flags the planner understands. Anything else is a hard error.
const SUPPORTED_REQUIREMENTS: &[&str] = &[
    ":strips",
    ":typing",
    ":equality",
    ":negative-preconditions",
    ":disjunctive-preconditions",
    ":existential-preconditions",
    ":universal-preconditions",
    ":quantified-preconditions",
    ":conditional-effects",
    ":adl",
    ":durative-actions",
];

pub fn parse_domain(text: &str) -> Result<Domain, ParseError> {
    let toks = tokenize(text).map_err(|(msg, line, col)| ParseError { msg, line, col })?;
    let mut p = P { toks, pos: 0 };
    let mut d = DomainBuilder::new();

    p.expect_lparen()?;
    p.expect_kw("define")?;
    p.expect_lparen()?;
    p.expect_kw("domain")?;
    d.domain.name = p.expect_name()?;
    p.expect_rparen()?;

    while !p.at_rparen() {
        p.expect_lparen()?;
        let (kw, line, col) = p.expect_sym()?;
        match kw.as_str() {
            ":requirements" => d.parse_requirements(&mut p)?,
            ":types" => d.parse_types(&mut p)?,
            ":constants" => d.parse_constants(&mut p)?,
            ":predicates" => d.parse_predicates(&mut p)?,
            ":action" => d.parse_action(&mut p, false)?,
            ":durative-action" => d.parse_action(&mut p, true)?,
            ":functions" => {
                return Err(ParseError {
                    msg: "numeric fluents (:functions) are not supported".into(),
                    line,
                    col,
                })
            }
            other => {
                return Err(ParseError {
                    msg: format!("unsupported domain section '{other}'"),
                    line,
                    col,
                })
            }
        }
    }
    p.expect_rparen()?;
    p.expect_eof()?;
    Ok(d.domain)
}

pub fn parse_problem(text: &str, domain: &Domain) -> Result<Problem, ParseError> {
    let toks = tokenize(text).map_err(|(msg, line, col)| ParseError { msg, line, col })?;
    let mut p = P { toks, pos: 0 };
    let mut b = ProblemBuilder::new(domain);

    p.expect_lparen()?;
    p.expect_kw("define")?;
    p.expect_lparen()?;
    p.expect_kw("problem")?;
    b.problem.name = p.expect_name()?;
    p.expect_rparen()?;

    while !p.at_rparen() {
        p.expect_lparen()?;
        let (kw, line, col) = p.expect_sym()?;
        match kw.as_str() {
            ":domain" => {
                b.problem.domain_name = p.expect_name()?;
                if b.problem.domain_name != domain.name {
                    return Err(ParseError {
                        msg: format!(
                            "problem requires domain '{}' but '{}' was loaded",
                            b.problem.domain_name, domain.name
                        ),
                        line,
                        col,
                    });
                }
                p.expect_rparen()?;
            }
            ":requirements" => {
                // Problem-level requirements must be supported too.
                while !p.at_rparen() {
                    let (flag, line, col) = p.expect_sym()?;
                    check_requirement(&flag, line, col)?;
                }
                p.expect_rparen()?;
            }
            ":objects" => b.parse_objects(&mut p)?,
            ":init" => b.parse_init(&mut p)?,
            ":goal" => b.parse_goal(&mut p)?,
            other => {
                return Err(ParseError {
                    msg: format!("unsupported problem section '{other}'"),
                    line,
                    col,
                })
            }
        }
    }
    p.expect_rparen()?;
    p.expect_eof()?;
    Ok(b.problem)
}

fn check_requirement(flag: &str, line: u32, col: u32) -> Result<(), ParseError> {
    if SUPPORTED_REQUIREMENTS.contains(&flag) {
        Ok(())
    } else {
        Err(ParseError { msg: format!("unsupported requirement flag '{flag}'"), line, col })
    }
}

struct P {
    toks: Vec<Token>,
    pos: usize,
}

impl P {
    fn peek(&self) -> &Token {
        &self.toks[self.pos.min(self.toks.len() - 1)]
    }

    fn next(&mut self) -> Token {
        let t = self.toks[self.pos.min(self.toks.len() - 1)].clone();
        if self.pos < self.toks.len() - 1 {
            self.pos += 1;
        }
        t
    }

    fn err_at(&self, msg: impl Into<String>) -> ParseError {
        let t = self.peek();
        ParseError { msg: msg.into(), line: t.line, col: t.col }
    }

    fn at_rparen(&self) -> bool {
        matches!(self.peek().tok, Tok::RParen)
    }

    fn expect_lparen(&mut self) -> Result<(), ParseError> {
        match self.peek().tok {
            Tok::LParen => {
                self.next();
                Ok(())
            }
            ref t => Err(self.err_at(format!("expected '(', found {t}"))),
        }
    }

    fn expect_rparen(&mut self) -> Result<(), ParseError> {
        match self.peek().tok {
            Tok::RParen => {
                self.next();
                Ok(())
            }
            ref t => Err(self.err_at(format!("expected ')', found {t}"))),
        }
    }

    fn expect_eof(&mut self) -> Result<(), ParseError> {
        match self.peek().tok {
            Tok::Eof => Ok(()),
            ref t => Err(self.err_at(format!("expected end of input, found {t}"))),
        }
    }

    fn expect_sym(&mut self) -> Result<(String, u32, u32), ParseError> {
        let t = self.peek().clone();
        match t.tok {
            Tok::Sym(s) => {
                self.next();
                Ok((s, t.line, t.col))
            }
            ref other => Err(self.err_at(format!("expected a symbol, found {other}"))),
        }
    }

    fn expect_name(&mut self) -> Result<String, ParseError> {
        let (s, line, col) = self.expect_sym()?;
        if s.starts_with('?') || s.starts_with(':') {
            return Err(ParseError { msg: format!("expected a name, found '{s}'"), line, col });
        }
        Ok(s)
    }

    fn expect_kw(&mut self, kw: &str) -> Result<(), ParseError> {
        let (s, line, col) = self.expect_sym()?;
        if s == kw {
            Ok(())
        } else {
            Err(ParseError { msg: format!("expected '{kw}', found '{s}'"), line, col })
        }
    }

    fn expect_number(&mut self) -> Result<Rational64, ParseError> {
        let t = self.peek().clone();
        match t.tok {
            Tok::Num(ref s) => match parse_rational(s) {
                Some(r) => {
                    self.next();
                    Ok(r)
                }
                None => Err(self.err_at(format!("malformed number '{s}'"))),
            },
            ref other => Err(self.err_at(format!("expected a number, found {other}"))),
        }
    }
}

/// Parses `3`, `-2`, `3.25`, or `7/2` into an exact rational.
pub(crate) fn parse_rational(s: &str) -> Option<Rational64> {
    if let Some((a, b)) = s.split_once('/') {
        let n: i64 = a.parse().ok()?;
        let d: i64 = b.parse().ok()?;
        if d == 0 {
            return None;
        }
        return Some(Rational64::new(n, d));
    }
    if let Some((whole, frac)) = s.split_once('.') {
        if frac.is_empty() || frac.contains('-') {
            return None;
        }
        let neg = whole.starts_with('-');
        let w: i64 = if whole == "-" { 0 } else { whole.parse().ok()? };
        let scale = 10i64.checked_pow(frac.len() as u32)?;
        let f: i64 = frac.parse().ok()?;
        let n = w.abs().checked_mul(scale)?.checked_add(f)?;
        return Some(Rational64::new(if neg { -n } else { n }, scale));
    }
    s.parse::<i64>().ok().map(Rational64::from_integer)
}

struct DomainBuilder {
    domain: Domain,
    type_ids: HashMap<String, TypeId>,
    pred_ids: HashMap<String, PredId>,
    const_ids: HashMap<String, ObjId>,
}

impl DomainBuilder {
    fn new() -> Self {
        let domain = Domain {
            name: String::new(),
            requirements: Default::default(),
            types: vec![TypeDef { name: "object".into(), parent: TYPE_OBJECT }],
            predicates: vec![PredDecl { name: "=".into(), arg_types: vec![TYPE_OBJECT, TYPE_OBJECT] }],
            constants: vec![],
            schemas: vec![],
        };
        let mut type_ids = HashMap::new();
        type_ids.insert("object".to_string(), TYPE_OBJECT);
        DomainBuilder {
            domain,
            type_ids,
            pred_ids: HashMap::new(),
            const_ids: HashMap::new(),
        }
    }

    fn parse_requirements(&mut self, p: &mut P) -> Result<(), ParseError> {
        while !p.at_rparen() {
            let (flag, line, col) = p.expect_sym()?;
            check_requirement(&flag, line, col)?;
            match flag.as_str() {
                ":adl" => {
                    for f in [
                        ":strips",
                        ":typing",
                        ":equality",
                        ":negative-preconditions",
                        ":disjunctive-preconditions",
                        ":existential-preconditions",
                        ":universal-preconditions",
                        ":conditional-effects",
                    ] {
                        self.domain.requirements.insert(f.into());
                    }
                }
                ":quantified-preconditions" => {
                    self.domain.requirements.insert(":existential-preconditions".into());
                    self.domain.requirements.insert(":universal-preconditions".into());
                }
                other => {
                    self.domain.requirements.insert(other.into());
                }
            }
        }
        p.expect_rparen()
    }

    fn get_or_create_type(&mut self, name: &str) -> TypeId {
        if let Some(&id) = self.type_ids.get(name) {
            return id;
        }
        let id = self.domain.types.len() as TypeId;
        self.domain.types.push(TypeDef { name: name.to_string(), parent: TYPE_OBJECT });
        self.type_ids.insert(name.to_string(), id);
        id
    }

    fn parse_types(&mut self, p: &mut P) -> Result<(), ParseError> {
        let mut pending: Vec<TypeId> = Vec::new();
        while !p.at_rparen() {
            let (s, line, col) = p.expect_sym()?;
            if s == "-" {
                if p.peek().tok == Tok::LParen {
                    return Err(p.err_at("(either ...) types are not supported"));
                }
                let parent_name = p.expect_name()?;
                let parent = self.get_or_create_type(&parent_name);
                for id in pending.drain(..) {
                    if id == parent {
                        return Err(ParseError {
                            msg: format!("type '{}' cannot be its own parent", parent_name),
                            line,
                            col,
                        });
                    }
                    self.domain.types[id as usize].parent = parent;
                }
            } else {
                pending.push(self.get_or_create_type(&s));
            }
        }
        p.expect_rparen()
    }

    fn lookup_type(&self, name: &str, p: &P) -> Result<TypeId, ParseError> {
        self.type_ids
            .get(name)
            .copied()
            .ok_or_else(|| p.err_at(format!("unknown type '{name}'")))
    }

    /// Parses `name name - type ...` up to the closing paren (not consumed).
    fn parse_typed_names(&mut self, p: &mut P) -> Result<Vec<(String, TypeId)>, ParseError> {
        let mut out: Vec<(String, Option<TypeId>)> = Vec::new();
        let mut group_start = 0usize;
        while !p.at_rparen() {
            let (s, _, _) = p.expect_sym()?;
            if s == "-" {
                let tname = p.expect_name()?;
                let ty = self.lookup_type(&tname, p)?;
                for e in &mut out[group_start..] {
                    e.1 = Some(ty);
                }
                group_start = out.len();
            } else {
                out.push((s, None));
            }
        }
        Ok(out
            .into_iter()
            .map(|(n, t)| (n, t.unwrap_or(TYPE_OBJECT)))
            .collect())
    }

    fn parse_constants(&mut self, p: &mut P) -> Result<(), ParseError> {
        let list = self.parse_typed_names(p)?;
        for (name, ty) in list {
            if self.const_ids.contains_key(&name) {
                return Err(p.err_at(format!("duplicate constant '{name}'")));
            }
            let id = self.domain.constants.len() as ObjId;
            self.domain.constants.push(ObjDecl { name: name.clone(), ty });
            self.const_ids.insert(name, id);
        }
        p.expect_rparen()
    }

    fn parse_predicates(&mut self, p: &mut P) -> Result<(), ParseError> {
        while !p.at_rparen() {
            p.expect_lparen()?;
            let (name, line, col) = p.expect_sym()?;
            if name == "=" {
                return Err(ParseError { msg: "'=' is a built-in predicate".into(), line, col });
            }
            if self.pred_ids.contains_key(&name) {
                return Err(ParseError { msg: format!("duplicate predicate '{name}'"), line, col });
            }
            let args = self.parse_typed_names(p)?;
            p.expect_rparen()?;
            let id = self.domain.predicates.len() as PredId;
            self.domain.predicates.push(PredDecl {
                name: name.clone(),
                arg_types: args.into_iter().map(|(_, t)| t).collect(),
            });
            self.pred_ids.insert(name, id);
        }
        p.expect_rparen()
    }

    fn parse_action(&mut self, p: &mut P, durative: bool) -> Result<(), ParseError> {
        let name = p.expect_name()?;
        let mut schema = ActionSchema {
            name,
            n_params: 0,
            vars: vec![],
            durative,
            duration: vec![],
            precondition: vec![],
            effects: vec![],
        };
        let mut scope: Vec<(String, VarId)> = Vec::new();
        let mut saw_effect = false;

        while !p.at_rparen() {
            let (kw, line, col) = p.expect_sym()?;
            match kw.as_str() {
                ":parameters" => {
                    p.expect_lparen()?;
                    let list = self.parse_typed_names(p)?;
                    p.expect_rparen()?;
                    for (vname, ty) in list {
                        if !vname.starts_with('?') {
                            return Err(ParseError {
                                msg: format!("parameter '{vname}' must start with '?'"),
                                line,
                                col,
                            });
                        }
                        let id = schema.vars.len() as VarId;
                        schema.vars.push(VarDecl { name: vname.clone(), ty });
                        scope.push((vname, id));
                    }
                    schema.n_params = schema.vars.len();
                }
                ":duration" => {
                    if !durative {
                        return Err(ParseError {
                            msg: ":duration is only allowed on durative actions".into(),
                            line,
                            col,
                        });
                    }
                    schema.duration = self.parse_duration(p)?;
                }
                ":precondition" => {
                    if durative {
                        return Err(ParseError {
                            msg: "durative actions use :condition, not :precondition".into(),
                            line,
                            col,
                        });
                    }
                    let f = to_nnf(&self.parse_formula(p, &mut schema, &mut scope, false)?);
                    if !f.is_true() {
                        schema.precondition.push(TimedCond { tau: Tau::Start, formula: f });
                    }
                }
                ":condition" => {
                    if !durative {
                        return Err(ParseError {
                            msg: "classical actions use :precondition, not :condition".into(),
                            line,
                            col,
                        });
                    }
                    schema.precondition = self.parse_da_condition(p, &mut schema, &mut scope)?;
                }
                ":effect" => {
                    saw_effect = true;
                    let mut effects = Vec::new();
                    self.parse_effect(
                        p,
                        &mut schema,
                        &mut scope,
                        durative,
                        None,
                        &[],
                        &[],
                        &mut effects,
                    )?;
                    schema.effects = effects;
                }
                other => {
                    return Err(ParseError {
                        msg: format!("unsupported action section '{other}'"),
                        line,
                        col,
                    })
                }
            }
        }
        p.expect_rparen()?;
        if durative && schema.duration.is_empty() {
            return Err(p.err_at(format!("durative action '{}' has no :duration", schema.name)));
        }
        if !saw_effect {
            return Err(p.err_at(format!("action '{}' has no :effect", schema.name)));
        }
        self.domain.schemas.push(schema);
        Ok(())
    }

    fn parse_duration(&mut self, p: &mut P) -> Result<Vec<DurationConstraint>, ParseError> {
        p.expect_lparen()?;
        let (head, line, col) = p.expect_sym()?;
        let mut out = Vec::new();
        match head.as_str() {
            "and" => {
                while !p.at_rparen() {
                    p.expect_lparen()?;
                    out.push(self.parse_duration_atom(p)?);
                }
                p.expect_rparen()?;
            }
            "=" | "<=" | ">=" => {
                out.push(self.parse_duration_atom_tail(p, &head, line, col)?);
            }
            other => {
                return Err(ParseError {
                    msg: format!("expected a duration constraint, found '{other}'"),
                    line,
                    col,
                })
            }
        }
        Ok(out)
    }

    fn parse_duration_atom(&mut self, p: &mut P) -> Result<DurationConstraint, ParseError> {
        let (op, line, col) = p.expect_sym()?;
        self.parse_duration_atom_tail(p, &op, line, col)
    }

    fn parse_duration_atom_tail(
        &mut self,
        p: &mut P,
        op: &str,
        line: u32,
        col: u32,
    ) -> Result<DurationConstraint, ParseError> {
        let op = match op {
            "=" => DurOp::Eq,
            "<=" => DurOp::Le,
            ">=" => DurOp::Ge,
            other => {
                return Err(ParseError {
                    msg: format!("unsupported duration operator '{other}'"),
                    line,
                    col,
                })
            }
        };
        p.expect_kw("?duration")?;
        let value = p.expect_number()?;
        if value < Rational64::from_integer(0) {
            return Err(p.err_at("durations must be non-negative"));
        }
        if p.peek().tok == Tok::LParen {
            return Err(p.err_at("duration must be a numeric constant"));
        }
        p.expect_rparen()?;
        Ok(DurationConstraint { op, value })
    }

    fn parse_da_condition(
        &mut self,
        p: &mut P,
        schema: &mut ActionSchema,
        scope: &mut Vec<(String, VarId)>,
    ) -> Result<Vec<TimedCond>, ParseError> {
        let mut out = Vec::new();
        self.parse_da_gd(p, schema, scope, &mut out)?;
        Ok(out)
    }

    fn parse_da_gd(
        &mut self,
        p: &mut P,
        schema: &mut ActionSchema,
        scope: &mut Vec<(String, VarId)>,
        out: &mut Vec<TimedCond>,
    ) -> Result<(), ParseError> {
        p.expect_lparen()?;
        let (head, line, col) = p.expect_sym()?;
        match head.as_str() {
            "and" => {
                while !p.at_rparen() {
                    self.parse_da_gd(p, schema, scope, out)?;
                }
                p.expect_rparen()?;
            }
            "at" => {
                let (when, wl, wc) = p.expect_sym()?;
                let tau = match when.as_str() {
                    "start" => Tau::Start,
                    "end" => Tau::End,
                    other => {
                        return Err(ParseError {
                            msg: format!("expected 'start' or 'end' after 'at', found '{other}'"),
                            line: wl,
                            col: wc,
                        })
                    }
                };
                let f = to_nnf(&self.parse_formula(p, schema, scope, false)?);
                p.expect_rparen()?;
                if !f.is_true() {
                    out.push(TimedCond { tau, formula: f });
                }
            }
            "over" => {
                p.expect_kw("all")?;
                let f = to_nnf(&self.parse_formula(p, schema, scope, false)?);
                p.expect_rparen()?;
                if !f.is_true() {
                    out.push(TimedCond { tau: Tau::Invariant, formula: f });
                }
            }
            other => {
                return Err(ParseError {
                    msg: format!(
                        "durative conditions must be annotated with at start/at end/over all, found '{other}'"
                    ),
                    line,
                    col,
                })
            }
        }
        Ok(())
    }

    /// Parses a goal-description formula. The opening paren has not been
    /// consumed. Does not NNF-normalize; callers do.
    fn parse_formula(
        &mut self,
        p: &mut P,
        schema: &mut ActionSchema,
        scope: &mut Vec<(String, VarId)>,
        _inner: bool,
    ) -> Result<Formula, ParseError> {
        self.parse_formula_with(p, &mut schema.vars, scope)
    }

    fn parse_formula_with(
        &mut self,
        p: &mut P,
        vars: &mut Vec<VarDecl>,
        scope: &mut Vec<(String, VarId)>,
    ) -> Result<Formula, ParseError> {
        p.expect_lparen()?;
        let (head, line, col) = p.expect_sym()?;
        let f = match head.as_str() {
            "and" => {
                let mut cs = Vec::new();
                while !p.at_rparen() {
                    cs.push(self.parse_formula_with(p, vars, scope)?);
                }
                Formula::And(cs)
            }
            "or" => {
                let mut ds = Vec::new();
                while !p.at_rparen() {
                    ds.push(self.parse_formula_with(p, vars, scope)?);
                }
                Formula::Or(ds)
            }
            "not" => {
                let inner = self.parse_formula_with(p, vars, scope)?;
                Formula::Not(Box::new(inner))
            }
            "imply" => {
                let a = self.parse_formula_with(p, vars, scope)?;
                let b = self.parse_formula_with(p, vars, scope)?;
                Formula::Or(vec![Formula::Not(Box::new(a)), b])
            }
            "exists" | "forall" => {
                let qs = self.parse_quant_vars(p, vars, scope)?;
                let body = self.parse_formula_with(p, vars, scope)?;
                for _ in &qs {
                    scope.pop();
                }
                if head == "exists" {
                    Formula::Exists(qs, Box::new(body))
                } else {
                    Formula::Forall(qs, Box::new(body))
                }
            }
            name => self.parse_atom_tail(p, name, line, col, vars, scope)?,
        };
        p.expect_rparen()?;
        Ok(f)
    }

    fn parse_quant_vars(
        &mut self,
        p: &mut P,
        vars: &mut Vec<VarDecl>,
        scope: &mut Vec<(String, VarId)>,
    ) -> Result<Vec<QuantVar>, ParseError> {
        p.expect_lparen()?;
        let list = self.parse_typed_names(p)?;
        p.expect_rparen()?;
        if list.is_empty() {
            return Err(p.err_at("quantifier binds no variables"));
        }
        let mut qs = Vec::new();
        for (vname, ty) in list {
            if !vname.starts_with('?') {
                return Err(p.err_at(format!("quantified variable '{vname}' must start with '?'")));
            }
            let id = vars.len() as VarId;
            vars.push(VarDecl { name: vname.clone(), ty });
            scope.push((vname, id));
            qs.push(QuantVar { var: id, ty });
        }
        Ok(qs)
    }

    fn parse_atom_tail(
        &mut self,
        p: &mut P,
        name: &str,
        line: u32,
        col: u32,
        vars: &[VarDecl],
        scope: &[(String, VarId)],
    ) -> Result<Formula, ParseError> {
        let pred = if name == "=" {
            PRED_EQ
        } else {
            *self.pred_ids.get(name).ok_or(ParseError {
                msg: format!("unknown predicate '{name}'"),
                line,
                col,
            })?
        };
        let mut args = Vec::new();
        while !p.at_rparen() {
            let (s, sl, sc) = p.expect_sym()?;
            if let Some(v) = s.strip_prefix('?') {
                let _ = v;
                let id = scope
                    .iter()
                    .rev()
                    .find(|(n, _)| *n == s)
                    .map(|(_, id)| *id)
                    .ok_or(ParseError { msg: format!("unbound variable '{s}'"), line: sl, col: sc })?;
                args.push(Term::Var(id));
            } else {
                let id = self.const_ids.get(&s).copied().ok_or(ParseError {
                    msg: format!("unknown constant '{s}'"),
                    line: sl,
                    col: sc,
                })?;
                args.push(Term::Obj(id));
            }
        }
        self.check_atom(pred, &args, vars, line, col)?;
        Ok(Formula::Lit(Literal::new(pred, args, true)))
    }

    fn check_atom(
        &self,
        pred: PredId,
        args: &[Term],
        vars: &[VarDecl],
        line: u32,
        col: u32,
    ) -> Result<(), ParseError> {
        let decl = &self.domain.predicates[pred as usize];
        if args.len() != decl.arg_types.len() {
            return Err(ParseError {
                msg: format!(
                    "predicate '{}' takes {} arguments, got {}",
                    decl.name,
                    decl.arg_types.len(),
                    args.len()
                ),
                line,
                col,
            });
        }
        for (i, (arg, want)) in args.iter().zip(&decl.arg_types).enumerate() {
            let got = match arg {
                Term::Obj(o) => self.domain.constants[*o as usize].ty,
                Term::Var(v) => vars[*v as usize].ty,
            };
            if !self.domain.is_subtype(got, *want) {
                return Err(ParseError {
                    msg: format!(
                        "argument {} of '{}' has type '{}', expected '{}'",
                        i + 1,
                        decl.name,
                        self.domain.types[got as usize].name,
                        self.domain.types[*want as usize].name
                    ),
                    line,
                    col,
                });
            }
        }
        Ok(())
    }

    /// Parses an effect tree into flat [`SchemaEffect`]s. `tau` is `None`
    /// until an `(at start ...)` / `(at end ...)` wrapper fixes it (durative
    /// actions) and defaults to `End` for classical actions.
    #[allow(clippy::too_many_arguments)]
    fn parse_effect(
        &mut self,
        p: &mut P,
        schema: &mut ActionSchema,
        scope: &mut Vec<(String, VarId)>,
        durative: bool,
        tau: Option<EffTime>,
        forall: &[QuantVar],
        condition: &[TimedCond],
        out: &mut Vec<SchemaEffect>,
    ) -> Result<(), ParseError> {
        p.expect_lparen()?;
        let (head, line, col) = p.expect_sym()?;
        match head.as_str() {
            "and" => {
                while !p.at_rparen() {
                    self.parse_effect(p, schema, scope, durative, tau, forall, condition, out)?;
                }
                p.expect_rparen()?;
            }
            "at" if durative && tau.is_none() => {
                let (when, wl, wc) = p.expect_sym()?;
                let t = match when.as_str() {
                    "start" => EffTime::Start,
                    "end" => EffTime::End,
                    other => {
                        return Err(ParseError {
                            msg: format!("expected 'start' or 'end' after 'at', found '{other}'"),
                            line: wl,
                            col: wc,
                        })
                    }
                };
                self.parse_effect(p, schema, scope, durative, Some(t), forall, condition, out)?;
                p.expect_rparen()?;
            }
            "forall" => {
                let qs = self.parse_quant_vars(p, &mut schema.vars, scope)?;
                let mut fa = forall.to_vec();
                fa.extend(qs.iter().copied());
                self.parse_effect(p, schema, scope, durative, tau, &fa, condition, out)?;
                for _ in &qs {
                    scope.pop();
                }
                p.expect_rparen()?;
            }
            "when" => {
                let mut cond = condition.to_vec();
                if durative && self.peeks_annotated(p) {
                    self.parse_da_gd(p, schema, scope, &mut cond)?;
                } else {
                    let tau_c = match tau {
                        Some(EffTime::End) if durative => Tau::End,
                        _ => Tau::Start,
                    };
                    let f = to_nnf(&self.parse_formula(p, schema, scope, false)?);
                    if !f.is_true() {
                        cond.push(TimedCond { tau: tau_c, formula: f });
                    }
                }
                self.parse_effect(p, schema, scope, durative, tau, forall, &cond, out)?;
                p.expect_rparen()?;
            }
            "not" => {
                p.expect_lparen()?;
                let (pname, pl, pc) = p.expect_sym()?;
                let lit = self.parse_effect_literal(p, &pname, pl, pc, schema, scope, false)?;
                p.expect_rparen()?;
                self.push_effect(p, durative, tau, forall, condition, lit, out)?;
            }
            name => {
                let lit = self.parse_effect_literal(p, name, line, col, schema, scope, true)?;
                self.push_effect(p, durative, tau, forall, condition, lit, out)?;
            }
        }
        Ok(())
    }

    /// True when the upcoming form is `(at start|end ...)` or `(over all ...)`.
    fn peeks_annotated(&self, p: &P) -> bool {
        if p.peek().tok != Tok::LParen {
            return false;
        }
        match p.toks.get(p.pos + 1).map(|t| &t.tok) {
            Some(Tok::Sym(s)) if s == "over" => true,
            Some(Tok::Sym(s)) if s == "at" => matches!(
                p.toks.get(p.pos + 2).map(|t| &t.tok),
                Some(Tok::Sym(w)) if w == "start" || w == "end"
            ),
            _ => false,
        }
    }

    #[allow(clippy::too_many_arguments)]
    fn push_effect(
        &mut self,
        p: &mut P,
        durative: bool,
        tau: Option<EffTime>,
        forall: &[QuantVar],
        condition: &[TimedCond],
        literal: Literal,
        out: &mut Vec<SchemaEffect>,
    ) -> Result<(), ParseError> {
        let tau = match tau {
            Some(t) => t,
            None if durative => {
                return Err(p.err_at("durative effects must be annotated with (at start ...) or (at end ...)"))
            }
            None => EffTime::End,
        };
        p.expect_rparen()?;
        out.push(SchemaEffect { tau, forall: forall.to_vec(), condition: condition.to_vec(), literal });
        Ok(())
    }

    #[allow(clippy::too_many_arguments)]
    fn parse_effect_literal(
        &mut self,
        p: &mut P,
        name: &str,
        line: u32,
        col: u32,
        schema: &mut ActionSchema,
        scope: &[(String, VarId)],
        positive: bool,
    ) -> Result<Literal, ParseError> {
        if name == "=" {
            return Err(ParseError { msg: "'=' cannot appear in effects".into(), line, col });
        }
        let f = self.parse_atom_tail(p, name, line, col, &schema.vars, scope)?;
        match f {
            Formula::Lit(mut lit) => {
                lit.positive = positive;
                Ok(lit)
            }
            _ => unreachable!("parse_atom_tail returns literals"),
        }
    }
}

struct ProblemBuilder<'a> {
    domain: &'a Domain,
    problem: Problem,
    obj_ids: HashMap<String, ObjId>,
}

impl<'a> ProblemBuilder<'a> {
    fn new(domain: &'a Domain) -> Self {
        let mut obj_ids = HashMap::new();
        for (i, c) in domain.constants.iter().enumerate() {
            obj_ids.insert(c.name.clone(), i as ObjId);
        }
        ProblemBuilder {
            domain,
            problem: Problem {
                name: String::new(),
                domain_name: String::new(),
                objects: vec![],
                init: vec![],
                goal_vars: vec![],
                goal: Formula::TRUE,
            },
            obj_ids,
        }
    }

    fn lookup_type(&self, name: &str, p: &P) -> Result<TypeId, ParseError> {
        self.domain
            .types
            .iter()
            .position(|t| t.name == name)
            .map(|i| i as TypeId)
            .ok_or_else(|| p.err_at(format!("unknown type '{name}'")))
    }

    fn parse_objects(&mut self, p: &mut P) -> Result<(), ParseError> {
        let mut pending: Vec<String> = Vec::new();
        while !p.at_rparen() {
            let (s, _, _) = p.expect_sym()?;
            if s == "-" {
                let tname = p.expect_name()?;
                let ty = self.lookup_type(&tname, p)?;
                for name in pending.drain(..) {
                    self.add_object(name, ty, p)?;
                }
            } else {
                pending.push(s);
            }
        }
        for name in pending.drain(..) {
            self.add_object(name, TYPE_OBJECT, p)?;
        }
        p.expect_rparen()
    }

    fn add_object(&mut self, name: String, ty: TypeId, p: &P) -> Result<(), ParseError> {
        if self.obj_ids.contains_key(&name) {
            return Err(p.err_at(format!("duplicate object '{name}'")));
        }
        let id = (self.domain.constants.len() + self.problem.objects.len()) as ObjId;
        self.problem.objects.push(ObjDecl { name: name.clone(), ty });
        self.obj_ids.insert(name, id);
        Ok(())
    }

    fn parse_init(&mut self, p: &mut P) -> Result<(), ParseError> {
        let mut seen = std::collections::HashSet::new();
        while !p.at_rparen() {
            p.expect_lparen()?;
            let (name, line, col) = p.expect_sym()?;
            if name == "not" {
                return Err(ParseError {
                    msg: "negated initial literals are redundant under closed-world semantics".into(),
                    line,
                    col,
                });
            }
            if name == "=" || name == "at" && matches!(p.peek().tok, Tok::Num(_)) {
                return Err(ParseError {
                    msg: "numeric fluents and timed initial literals are not supported".into(),
                    line,
                    col,
                });
            }
            let pred = self
                .domain
                .predicates
                .iter()
                .position(|d| d.name == name)
                .map(|i| i as PredId)
                .ok_or(ParseError { msg: format!("unknown predicate '{name}'"), line, col })?;
            let mut args = Vec::new();
            while !p.at_rparen() {
                let (s, sl, sc) = p.expect_sym()?;
                let id = self.obj_ids.get(&s).copied().ok_or(ParseError {
                    msg: format!("unknown object '{s}'"),
                    line: sl,
                    col: sc,
                })?;
                args.push(id);
            }
            p.expect_rparen()?;
            let decl = &self.domain.predicates[pred as usize];
            if args.len() != decl.arg_types.len() {
                return Err(ParseError {
                    msg: format!(
                        "predicate '{}' takes {} arguments, got {}",
                        decl.name,
                        decl.arg_types.len(),
                        args.len()
                    ),
                    line,
                    col,
                });
            }
            for (arg, want) in args.iter().zip(&decl.arg_types) {
                let got = self.problem.object_type(self.domain, *arg);
                if !self.domain.is_subtype(got, *want) {
                    return Err(ParseError {
                        msg: format!("ill-typed initial atom for predicate '{}'", decl.name),
                        line,
                        col,
                    });
                }
            }
            let atom = GroundAtom { pred, args };
            if seen.insert(atom.clone()) {
                self.problem.init.push(atom);
            }
        }
        p.expect_rparen()
    }

    fn parse_goal(&mut self, p: &mut P) -> Result<(), ParseError> {
        // Reuse the domain machinery for formula parsing by building a
        // temporary builder view with the combined object table.
        let mut db = DomainBuilder::new();
        db.domain = self.domain.clone();
        // Give the goal parser the full object universe as "constants".
        db.domain.constants = self
            .domain
            .constants
            .iter()
            .cloned()
            .chain(self.problem.objects.iter().cloned())
            .collect();
        db.const_ids = self.obj_ids.clone();
        db.pred_ids = self
            .domain
            .predicates
            .iter()
            .enumerate()
            .skip(1)
            .map(|(i, d)| (d.name.clone(), i as PredId))
            .collect();
        db.type_ids = self
            .domain
            .types
            .iter()
            .enumerate()
            .map(|(i, t)| (t.name.clone(), i as TypeId))
            .collect();
        let mut vars = Vec::new();
        let mut scope = Vec::new();
        let f = db.parse_formula_with(p, &mut vars, &mut scope)?;
        p.expect_rparen()?;
        self.problem.goal = to_nnf(&f);
        self.problem.goal_vars = vars;
        Ok(())
    }
}
