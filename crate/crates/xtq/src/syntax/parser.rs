//! Recursive-descent parser for query programs.

use crate::error::{Error, Result};

use super::lexer::{lex, Spanned, Tok};
use super::*;

/// Parse a complete program: zero or more function declarations followed by
/// the main query-where-construct statement.
pub fn parse_program(src: &str) -> Result<Program> {
    let mut p = Parser::new(src)?;
    let mut functions = Vec::new();
    while p.at_ident("declare") {
        functions.push(p.fundecl()?);
    }
    let statement = p.qwc()?;
    p.expect_eof()?;
    Ok(Program { functions, statement })
}

/// Parse a user-written matching term (test and tooling helper).
pub fn parse_term(src: &str) -> Result<UTerm> {
    let mut p = Parser::new(src)?;
    let t = p.uterm_list()?;
    p.expect_eof()?;
    Ok(t)
}

/// Parse a bare extraction pattern, desugared (test and tooling helper).
pub fn parse_pattern(src: &str) -> Result<Ep> {
    let mut p = Parser::new(src)?;
    let ep = p.ep()?;
    p.expect_eof()?;
    super::desugar::lower_pattern(ep)
}

/// Parse a bare condition (test and tooling helper).
pub fn parse_condition(src: &str) -> Result<Cond> {
    let mut p = Parser::new(src)?;
    let c = p.cond()?;
    p.expect_eof()?;
    Ok(c)
}

struct Parser {
    toks: Vec<Spanned>,
    pos: usize,
}

impl Parser {
    fn new(src: &str) -> Result<Self> {
        Ok(Parser { toks: lex(src)?, pos: 0 })
    }

    // -- token helpers ------------------------------------------------------

    fn peek(&self) -> Option<&Tok> {
        self.toks.get(self.pos).map(|s| &s.tok)
    }

    fn peek_at(&self, off: usize) -> Option<&Tok> {
        self.toks.get(self.pos + off).map(|s| &s.tok)
    }

    fn here(&self) -> (usize, usize) {
        self.toks
            .get(self.pos)
            .or_else(|| self.toks.last())
            .map(|s| (s.line, s.col))
            .unwrap_or((1, 1))
    }

    fn err(&self, msg: impl Into<String>) -> Error {
        let (line, col) = self.here();
        let found = self.peek().map(|t| t.describe()).unwrap_or_else(|| "end of input".into());
        Error::syntax(line, col, format!("{} (found {})", msg.into(), found))
    }

    fn at_sym(&self, s: &str) -> bool {
        matches!(self.peek(), Some(Tok::Sym(x)) if *x == s)
    }

    fn at_sym_at(&self, off: usize, s: &str) -> bool {
        matches!(self.peek_at(off), Some(Tok::Sym(x)) if *x == s)
    }

    fn eat_sym(&mut self, s: &str) -> bool {
        if self.at_sym(s) {
            self.pos += 1;
            true
        } else {
            false
        }
    }

    fn expect_sym(&mut self, s: &str) -> Result<()> {
        if self.eat_sym(s) {
            Ok(())
        } else {
            Err(self.err(format!("expected '{s}'")))
        }
    }

    fn at_ident(&self, s: &str) -> bool {
        matches!(self.peek(), Some(Tok::Ident(x)) if x == s)
    }

    fn eat_ident(&mut self, s: &str) -> bool {
        if self.at_ident(s) {
            self.pos += 1;
            true
        } else {
            false
        }
    }

    fn expect_ident(&mut self, s: &str) -> Result<()> {
        if self.eat_ident(s) {
            Ok(())
        } else {
            Err(self.err(format!("expected '{s}'")))
        }
    }

    fn ident(&mut self) -> Result<String> {
        match self.peek() {
            Some(Tok::Ident(x)) => {
                let x = x.clone();
                self.pos += 1;
                Ok(x)
            }
            _ => Err(self.err("expected a name")),
        }
    }

    fn var(&mut self) -> Result<String> {
        match self.peek() {
            Some(Tok::Var(x)) => {
                let x = x.clone();
                self.pos += 1;
                Ok(x)
            }
            _ => Err(self.err("expected a variable")),
        }
    }

    fn string(&mut self) -> Result<String> {
        match self.peek() {
            Some(Tok::Str(x)) => {
                let x = x.clone();
                self.pos += 1;
                Ok(x)
            }
            _ => Err(self.err("expected a string literal")),
        }
    }

    fn expect_eof(&self) -> Result<()> {
        if self.pos == self.toks.len() {
            Ok(())
        } else {
            Err(self.err("unexpected trailing input"))
        }
    }

    // -- programs -----------------------------------------------------------

    fn fundecl(&mut self) -> Result<FunctionDecl> {
        self.expect_ident("declare")?;
        let name = self.ident()?;
        self.expect_sym("(")?;
        let input = self.valtype_list()?;
        self.expect_sym(")")?;
        self.expect_sym(":")?;
        let output = self.valtype()?;
        self.expect_ident("as")?;
        self.expect_sym("(")?;
        let body = self.qwc()?;
        self.expect_sym(")")?;
        Ok(FunctionDecl { name, input, output, body })
    }

    /// Inside `declare f(...)` a comma list denotes a tuple input type.
    fn valtype_list(&mut self) -> Result<ValType> {
        let first = self.valtype()?;
        if !self.at_sym(",") {
            return Ok(first);
        }
        let mut items = vec![first];
        while self.eat_sym(",") {
            items.push(self.valtype()?);
        }
        Ok(ValType::Tuple(items))
    }

    fn valtype(&mut self) -> Result<ValType> {
        if self.eat_sym("*") {
            return Ok(ValType::Univ);
        }
        if self.eat_sym("{") {
            let inner = self.valtype_list_grouped()?;
            self.expect_sym("}")?;
            return Ok(ValType::Set(Box::new(inner)));
        }
        if self.eat_sym("(") {
            let inner = self.valtype_list_grouped()?;
            self.expect_sym(")")?;
            return Ok(inner);
        }
        let name = self.ident()?;
        if self.eat_sym("&") {
            let inner = self.valtype()?;
            return Ok(ValType::Labeled(name, Box::new(inner)));
        }
        match name.as_str() {
            "bool" => Ok(ValType::Bool),
            "num" => Ok(ValType::Num),
            "cdata" => Ok(ValType::Cdata),
            "loc" => Ok(ValType::Loc),
            "doc" => Ok(ValType::Doc),
            other => Err(self.err(format!("unknown type '{other}'"))),
        }
    }

    fn valtype_list_grouped(&mut self) -> Result<ValType> {
        let first = self.valtype()?;
        if self.at_sym(",") {
            let mut items = vec![first];
            while self.eat_sym(",") {
                items.push(self.valtype()?);
            }
            Ok(ValType::Tuple(items))
        } else if self.at_sym("||") {
            let mut items = vec![first];
            while self.eat_sym("||") {
                items.push(self.valtype()?);
            }
            Ok(ValType::DUnion(items))
        } else if self.at_sym("|") {
            let mut items = vec![first];
            while self.eat_sym("|") {
                items.push(self.valtype()?);
            }
            Ok(ValType::Opt(items))
        } else {
            Ok(first)
        }
    }

    fn qwc(&mut self) -> Result<QwcStatement> {
        self.expect_ident("query")?;
        let query = self.qexpr()?;
        let where_ = if self.eat_ident("where") { Some(self.cond()?) } else { None };
        self.expect_ident("construct")?;
        let construct = self.cp()?;
        Ok(QwcStatement { query, where_, construct })
    }

    // -- query expressions --------------------------------------------------

    fn qexpr(&mut self) -> Result<QExpr> {
        let first = self.qatom()?;
        if self.at_sym(",") {
            let mut items = vec![first];
            while self.eat_sym(",") {
                items.push(self.qatom()?);
            }
            Ok(QExpr::Conj(items))
        } else if self.at_sym("||") {
            let mut items = vec![first];
            while self.eat_sym("||") {
                items.push(self.qatom()?);
            }
            Ok(QExpr::Disj(items))
        } else {
            Ok(first)
        }
    }

    fn qatom(&mut self) -> Result<QExpr> {
        if self.at_ident("doc") && self.at_sym_at(1, "(") {
            self.pos += 2;
            let doc = self.string()?;
            self.expect_sym(")")?;
            let pattern = if self.starts_ep() { Some(self.ep()?) } else { None };
            return Ok(QExpr::Doc { doc, pattern });
        }
        if let Some(Tok::Hash(h)) = self.peek() {
            let h = h.clone();
            self.pos += 1;
            let pattern = if self.eat_sym("[") {
                let v = self.vp_list()?;
                self.expect_sym("]")?;
                v
            } else if self.eat_sym("(") {
                let v = self.vp_list()?;
                self.expect_sym(")")?;
                v
            } else {
                return Err(self.err(format!("expected a pattern after '#{h}'")));
            };
            return Ok(match h.as_str() {
                "input" => QExpr::Input { pattern },
                _ => QExpr::Func { pattern },
            });
        }
        if self.eat_sym("(") {
            let inner = self.qexpr()?;
            self.expect_sym(")")?;
            if self.starts_ep() {
                let suffix = self.ep()?;
                return Ok(QExpr::Suffixed(Box::new(inner), suffix));
            }
            return Ok(inner);
        }
        Err(self.err("expected a query source"))
    }

    // -- document extraction patterns ----------------------------------------

    fn starts_ep(&self) -> bool {
        self.at_sym("/") || self.at_sym("//") || self.at_sym("@") || self.at_sym("(")
    }

    fn ep(&mut self) -> Result<Ep> {
        let first = self.ep_term()?;
        // `,` and `||` double as source-level connectives, so they extend the
        // pattern only when another pattern actually follows.
        if self.at_sym(",") && self.ep_follows(1) {
            let mut items = vec![first];
            while self.at_sym(",") && self.ep_follows(1) {
                self.pos += 1;
                items.push(self.ep_term()?);
            }
            Ok(Ep::Conj(items))
        } else if self.at_sym("||") && self.ep_follows(1) {
            let mut items = vec![first];
            while self.at_sym("||") && self.ep_follows(1) {
                self.pos += 1;
                items.push(self.ep_term()?);
            }
            Ok(Ep::Disj(items))
        } else if self.eat_sym(";") {
            let rest = self.ep()?;
            Ok(Ep::Fold(Box::new(first), Box::new(rest)))
        } else {
            Ok(first)
        }
    }

    fn ep_follows(&self, off: usize) -> bool {
        match self.peek_at(off) {
            Some(Tok::Sym("/" | "//" | "@")) => true,
            Some(Tok::Sym("(")) => match self.peek_at(off + 1) {
                Some(Tok::Hash(_)) => false,
                Some(Tok::Ident(d)) if d == "doc" => false,
                _ => true,
            },
            _ => false,
        }
    }

    /// A path or group, optionally extended by tree composition; chained
    /// segments nest to the right: `/a/b(/c)` is a(b(c)).
    fn ep_term(&mut self) -> Result<Ep> {
        let mut segs = vec![self.ep_root()?];
        while self.starts_ep() {
            segs.push(self.ep_root()?);
        }
        let mut out = segs.pop().expect("non-empty");
        while let Some(root) = segs.pop() {
            out = Ep::Tree(Box::new(root), Box::new(out));
        }
        Ok(out)
    }

    fn ep_root(&mut self) -> Result<Ep> {
        if self.eat_sym("(") {
            let inner = self.ep()?;
            self.expect_sym(")")?;
            return Ok(inner);
        }
        let axis = if self.eat_sym("//") {
            Axis::Descendant
        } else if self.eat_sym("/") || self.at_sym("@") {
            Axis::Child
        } else {
            return Err(self.err("expected '/', '//', '@' or '(' in a pattern"));
        };
        let atom = self.atom_ptn()?;
        Ok(Ep::Path(axis, atom))
    }

    fn atom_ptn(&mut self) -> Result<AtomPtn> {
        let attr = self.eat_sym("@");
        let name = if self.eat_sym("~") {
            AtomSide::Name("~".into())
        } else if matches!(self.peek(), Some(Tok::Var(_))) {
            AtomSide::Var(self.var()?)
        } else {
            let n = self.ident()?;
            AtomSide::Name(if attr { format!("@{n}") } else { n })
        };
        let content = if self.eat_sym("=>") {
            Some(match self.peek() {
                Some(Tok::Var(_)) => AtomSide::Var(self.var()?),
                Some(Tok::Str(_)) => AtomSide::Const(self.string()?),
                Some(Tok::Num(n)) => {
                    let c = AtomSide::Const(fmt_num(*n));
                    self.pos += 1;
                    c
                }
                Some(Tok::Sym("~")) => {
                    self.pos += 1;
                    AtomSide::Const(String::new())
                }
                _ => return Err(self.err("expected a variable or constant after '=>'")),
            })
        } else {
            None
        };
        Ok(AtomPtn { name, content })
    }

    // -- value extraction patterns -------------------------------------------

    fn vp_list(&mut self) -> Result<Vp> {
        let first = self.vp_cons()?;
        if self.at_sym(",") {
            let mut items = vec![first];
            while self.eat_sym(",") {
                items.push(self.vp_cons()?);
            }
            Ok(Vp::Tuple(items))
        } else if self.at_sym("||") {
            let mut items = vec![first];
            while self.eat_sym("||") {
                items.push(self.vp_cons()?);
            }
            Ok(Vp::DUnion(items))
        } else if self.at_sym("|") {
            let mut items = vec![labelled_vp(first)];
            while self.eat_sym("|") {
                items.push(labelled_vp(self.vp_cons()?));
            }
            Ok(Vp::Opt(items))
        } else {
            Ok(first)
        }
    }

    fn vp_cons(&mut self) -> Result<Vp> {
        let head = self.vp_term()?;
        if self.eat_sym("::") {
            let tail = self.vp_cons()?;
            Ok(Vp::Cons(Box::new(head), Box::new(tail)))
        } else {
            Ok(head)
        }
    }

    fn vp_term(&mut self) -> Result<Vp> {
        if self.eat_sym("*") {
            return Ok(Vp::Univ);
        }
        if let Some(Tok::Str(_)) = self.peek() {
            return Ok(Vp::Const(ValConst::Str(self.string()?)));
        }
        if let Some(Tok::Num(n)) = self.peek() {
            let n = *n;
            self.pos += 1;
            return Ok(Vp::Const(ValConst::Num(n)));
        }
        if self.eat_ident("nil") {
            return Ok(Vp::Const(ValConst::Nil));
        }
        if self.eat_ident("true") {
            return Ok(Vp::Const(ValConst::Bool(true)));
        }
        if self.eat_ident("false") {
            return Ok(Vp::Const(ValConst::Bool(false)));
        }
        if self.eat_sym("[") {
            let inner = self.vp_list()?;
            self.expect_sym("]")?;
            return Ok(Vp::View(Box::new(inner)));
        }
        if self.eat_sym("{") {
            let inner = self.vp_list()?;
            self.expect_sym("}")?;
            return Ok(Vp::Set(Box::new(inner)));
        }
        if self.at_sym("/") || self.at_sym("//") || self.at_sym("@") {
            let ep = self.ep()?;
            return Ok(Vp::Doc(Box::new(ep)));
        }
        if let Some(Tok::Var(_)) = self.peek() {
            let v = self.var()?;
            // postfix destructuring; brackets keep view semantics
            if self.eat_sym("[") {
                let inner = self.vp_list()?;
                self.expect_sym("]")?;
                return Ok(Vp::VarPtn(v, Box::new(Vp::View(Box::new(inner)))));
            }
            if self.at_sym("/") || self.at_sym("//") || self.at_sym("@") {
                let ep = self.ep()?;
                return Ok(Vp::VarPtn(v, Box::new(Vp::Doc(Box::new(ep)))));
            }
            if self.at_sym("(") {
                // `$x(/p...)` applies a document pattern; `$x(p, p')` a value one
                if self.at_sym_at(1, "/") || self.at_sym_at(1, "//") || self.at_sym_at(1, "@") {
                    self.expect_sym("(")?;
                    let ep = self.ep()?;
                    self.expect_sym(")")?;
                    return Ok(Vp::VarPtn(v, Box::new(Vp::Doc(Box::new(ep)))));
                }
                self.expect_sym("(")?;
                let inner = self.vp_list()?;
                self.expect_sym(")")?;
                return Ok(Vp::VarPtn(v, Box::new(inner)));
            }
            return Ok(Vp::Var(v));
        }
        if self.eat_sym("(") {
            let inner = self.vp_list()?;
            self.expect_sym(")")?;
            return Ok(inner);
        }
        // labelled option branch `lab & p`
        if let Some(Tok::Ident(_)) = self.peek() {
            let save = self.pos;
            let name = self.ident()?;
            if self.eat_sym("&") {
                let inner = self.vp_term()?;
                return Ok(Vp::Opt(vec![(Some(name), inner)]));
            }
            self.pos = save;
        }
        Err(self.err("expected a value pattern"))
    }

    // -- user matching terms --------------------------------------------------

    fn uterm_list(&mut self) -> Result<UTerm> {
        let first = self.uterm_factor()?;
        if self.at_sym(",") {
            let mut items = vec![first];
            while self.eat_sym(",") {
                items.push(self.uterm_factor()?);
            }
            Ok(UTerm::Tuple(items))
        } else if self.at_sym("||") {
            let mut items = vec![first];
            while self.eat_sym("||") {
                items.push(self.uterm_factor()?);
            }
            Ok(UTerm::DUnion(items))
        } else if self.at_sym("|") {
            let mut items = vec![first];
            while self.eat_sym("|") {
                items.push(self.uterm_factor()?);
            }
            Ok(UTerm::Opt(items))
        } else {
            Ok(first)
        }
    }

    fn uterm_factor(&mut self) -> Result<UTerm> {
        let base = if let Some(Tok::Var(_)) = self.peek() {
            UTerm::Var(self.var()?)
        } else if self.eat_sym("{") {
            let inner = self.uterm_list()?;
            self.expect_sym("}")?;
            UTerm::Set(Box::new(inner))
        } else if self.eat_sym("(") {
            let inner = self.uterm_list()?;
            self.expect_sym(")")?;
            inner
        } else {
            return Err(self.err("expected a matching term"));
        };
        if self.eat_sym("%") {
            Ok(UTerm::Content(Box::new(base)))
        } else {
            Ok(base)
        }
    }

    // -- construction patterns -------------------------------------------------

    fn cp(&mut self) -> Result<Cp> {
        self.cp_list()
    }

    fn cp_cons(&mut self) -> Result<Cp> {
        let head = self.cp_post()?;
        if self.eat_sym("::") {
            let tail = self.cp_cons()?;
            Ok(Cp::Cons(Box::new(head), Box::new(tail)))
        } else {
            Ok(head)
        }
    }

    /// A construction pattern with `hid`/`elim` postfixes.
    fn cp_post(&mut self) -> Result<Cp> {
        let mut base = self.cp_term()?;
        loop {
            if self.eat_ident("hid") {
                let t = self.uterm_factor()?;
                base = Cp::Hid(Box::new(base), t);
            } else if self.eat_ident("elim") {
                let t = self.uterm_factor()?;
                base = Cp::Elim(Box::new(base), t);
            } else {
                break;
            }
        }
        Ok(base)
    }

    fn cp_list(&mut self) -> Result<Cp> {
        let first = self.cp_cons()?;
        if self.at_sym(",") {
            let mut items = vec![first];
            while self.eat_sym(",") {
                items.push(self.cp_cons()?);
            }
            Ok(Cp::Tuple(items))
        } else if self.at_sym("||") {
            let mut items = vec![first];
            while self.eat_sym("||") {
                items.push(self.cp_cons()?);
            }
            Ok(Cp::DUnion(items))
        } else if self.at_sym("|") {
            let mut items = vec![first];
            while self.eat_sym("|") {
                items.push(self.cp_cons()?);
            }
            Ok(Cp::Opt(items))
        } else {
            Ok(first)
        }
    }

    fn cp_term(&mut self) -> Result<Cp> {
        match self.peek() {
            Some(Tok::Str(_)) => {
                let s = self.string()?;
                Ok(Cp::Str(s))
            }
            Some(Tok::Num(n)) => {
                let n = *n;
                self.pos += 1;
                Ok(Cp::Num(n))
            }
            Some(Tok::Sym("~")) => {
                self.pos += 1;
                Ok(Cp::Empty)
            }
            Some(Tok::Sym("(")) => {
                self.pos += 1;
                let inner = self.cp_list()?;
                self.expect_sym(")")?;
                Ok(inner)
            }
            Some(Tok::Sym("{")) => {
                self.pos += 1;
                let elem = self.cp_list()?;
                self.expect_sym("}")?;
                let groupby =
                    if self.eat_ident("groupby") { Some(self.uterm_factor()?) } else { None };
                let orderby = if self.eat_ident("orderby") {
                    self.order_list()?
                } else {
                    Vec::new()
                };
                Ok(Cp::Set { elem: Box::new(elem), groupby, orderby })
            }
            Some(Tok::Sym("@")) => {
                self.pos += 1;
                let name = if let Some(Tok::Var(_)) = self.peek() {
                    NamePtn::Var(self.var()?)
                } else {
                    NamePtn::Lit(format!("@{}", self.ident()?))
                };
                self.expect_sym("=>")?;
                let inner = self.cp_post()?;
                Ok(Cp::Elem(attr_name(name), Box::new(inner)))
            }
            Some(Tok::Var(_)) => {
                let v = self.var()?;
                if self.eat_sym("=>") {
                    let inner = self.cp_post()?;
                    return Ok(Cp::Elem(NamePtn::Var(v), Box::new(inner)));
                }
                Ok(Cp::Var(v))
            }
            Some(Tok::Ident(name)) => {
                let name = name.clone();
                // `loc($x)`, `nil`, `true` and `false` are reserved forms
                if name == "nil" && !self.at_sym_at(1, "=>") {
                    self.pos += 1;
                    return Ok(Cp::Nil);
                }
                if (name == "true" || name == "false") && !self.at_sym_at(1, "=>") {
                    self.pos += 1;
                    return Ok(Cp::Bool(name == "true"));
                }
                if name == "loc"
                    && self.at_sym_at(1, "(")
                    && matches!(self.peek_at(2), Some(Tok::Var(_)))
                    && self.at_sym_at(3, ")")
                {
                    self.pos += 2;
                    let v = self.var()?;
                    self.expect_sym(")")?;
                    return Ok(Cp::Loc(v));
                }
                self.pos += 1;
                if self.eat_sym("=>") {
                    let inner = self.cp_post()?;
                    return Ok(Cp::Elem(NamePtn::Lit(name), Box::new(inner)));
                }
                if self.eat_sym("&") {
                    let inner = self.cp_term()?;
                    return Ok(Cp::Label(name, Box::new(inner)));
                }
                if self.at_sym("(") {
                    let inv = self.funinvoke_args(name)?;
                    if self.eat_sym("=>") {
                        let inner = self.cp_post()?;
                        return Ok(Cp::Elem(NamePtn::Fun(inv), Box::new(inner)));
                    }
                    return Ok(Cp::Fun(inv));
                }
                Err(self.err(format!("name '{name}' must be followed by '=>', '&' or '('")))
            }
            _ => Err(self.err("expected a construction pattern")),
        }
    }

    fn funinvoke_args(&mut self, name: String) -> Result<FunInvoke> {
        self.expect_sym("(")?;
        let arg = self.cp_list()?;
        self.expect_sym(")")?;
        Ok(FunInvoke { name, arg: Box::new(arg) })
    }

    fn order_list(&mut self) -> Result<Vec<OrderItem>> {
        self.expect_sym("(")?;
        let mut items = Vec::new();
        loop {
            let mut unit = self.cp_post()?;
            if self.at_sym("|") {
                let mut branches = vec![unit];
                while self.eat_sym("|") {
                    branches.push(self.cp_post()?);
                }
                unit = Cp::Opt(branches);
            }
            let asc = if self.eat_ident("asc") { true } else { !self.eat_ident("desc") };
            items.push(OrderItem { unit, asc });
            if !self.eat_sym(",") {
                break;
            }
        }
        self.expect_sym(")")?;
        Ok(items)
    }

    // -- conditions --------------------------------------------------------------

    fn cond(&mut self) -> Result<Cond> {
        let mut left = self.cond_opt()?;
        loop {
            if self.eat_ident("par") {
                let right = self.cond_opt()?;
                left = Cond::Par(Box::new(left), Box::new(right));
            } else if self.eat_ident("with") {
                let right = self.cond_opt()?;
                left = Cond::With(Box::new(left), Box::new(right));
            } else {
                return Ok(left);
            }
        }
    }

    /// `c1 | c2` — option-dispatched branches.
    fn cond_opt(&mut self) -> Result<Cond> {
        let first = self.cond_or()?;
        if !self.at_sym("|") {
            return Ok(first);
        }
        let mut items = vec![first];
        while self.eat_sym("|") {
            items.push(self.cond_or()?);
        }
        Ok(Cond::OptBranch(items))
    }

    fn cond_or(&mut self) -> Result<Cond> {
        let first = self.cond_and()?;
        if !self.at_ident("or") {
            return Ok(first);
        }
        let mut items = vec![first];
        while self.eat_ident("or") {
            items.push(self.cond_and()?);
        }
        Ok(Cond::Or(items))
    }

    fn cond_and(&mut self) -> Result<Cond> {
        let first = self.cond_atom()?;
        if !self.at_ident("and") {
            return Ok(first);
        }
        let mut items = vec![first];
        while self.eat_ident("and") {
            items.push(self.cond_atom()?);
        }
        Ok(Cond::And(items))
    }

    fn cond_atom(&mut self) -> Result<Cond> {
        if self.eat_ident("not") {
            self.expect_sym("(")?;
            let inner = self.cond()?;
            self.expect_sym(")")?;
            return Ok(Cond::Not(Box::new(inner)));
        }
        if self.at_ident("foreach") || self.at_ident("forsome") {
            return self.quantified();
        }
        if self.at_ident("any") && self.at_sym_at(1, "(") {
            self.pos += 2;
            let t = self.uterm_list()?;
            self.expect_sym(")")?;
            return Ok(Cond::Any(t));
        }
        // A parenthesis may open a grouped condition or a comparison operand;
        // try the condition reading first and fall back on failure.
        if self.at_sym("(") {
            let save = self.pos;
            self.pos += 1;
            if let Ok(inner) = self.cond() {
                if self.eat_sym(")") && !self.at_infix() {
                    return Ok(inner);
                }
            }
            self.pos = save;
        }
        self.comparison()
    }

    fn quantified(&mut self) -> Result<Cond> {
        let quant = if self.eat_ident("foreach") {
            Quant::ForEach
        } else {
            self.expect_ident("forsome")?;
            Quant::ForSome
        };
        let term = self.uterm_factor()?;
        let domain = if self.eat_ident("in") { Some(self.uterm_factor()?) } else { None };
        self.expect_sym(".")?;
        let body = self.cond_or()?;
        Ok(Cond::Quantified { quant, term, domain, body: Box::new(body) })
    }

    fn at_infix(&self) -> bool {
        matches!(
            self.peek(),
            Some(Tok::Sym("=" | "!=" | "<" | "<=" | ">" | ">=" | "<<"))
        )
    }

    fn infix_op(&mut self) -> Option<CmpOp> {
        let op = match self.peek() {
            Some(Tok::Sym("=")) => CmpOp::Eq,
            Some(Tok::Sym("!=")) => CmpOp::Ne,
            Some(Tok::Sym("<")) => CmpOp::Lt,
            Some(Tok::Sym("<=")) => CmpOp::Le,
            Some(Tok::Sym(">")) => CmpOp::Gt,
            Some(Tok::Sym(">=")) => CmpOp::Ge,
            Some(Tok::Sym("<<")) => CmpOp::Succ,
            _ => return None,
        };
        self.pos += 1;
        Some(op)
    }

    fn comparison(&mut self) -> Result<Cond> {
        let lhs = self.operand()?;
        if let Some(op) = self.infix_op() {
            let rhs = self.operand()?;
            return Ok(Cond::Cmp { op, lhs, rhs });
        }
        match lhs {
            Operand::Cp(Cp::Fun(f)) => Ok(Cond::Fun(f)),
            Operand::Sel { var, path } => {
                // `$a/last=>"Li"` — existential pattern test
                Ok(Cond::PathTest { var, path })
            }
            _ => Err(self.err("expected a comparison operator or predicate invocation")),
        }
    }

    fn operand(&mut self) -> Result<Operand> {
        if let Some(Tok::Var(_)) = self.peek() {
            if self.at_sym_at(1, "/") || self.at_sym_at(1, "//") {
                let var = self.var()?;
                let path = self.ep()?;
                return Ok(Operand::Sel { var, path });
            }
        }
        Ok(Operand::Cp(self.cp_post()?))
    }
}

fn labelled_vp(vp: Vp) -> (Option<String>, Vp) {
    match vp {
        Vp::Opt(mut items) if items.len() == 1 => items.pop().expect("single"),
        other => (None, other),
    }
}

fn attr_name(name: NamePtn) -> NamePtn {
    match name {
        NamePtn::Var(v) => NamePtn::Var(format!("@{v}")),
        other => other,
    }
}

pub(crate) fn fmt_num(n: f64) -> String {
    if n.fract() == 0.0 && n.abs() < 1e15 {
        format!("{}", n as i64)
    } else {
        format!("{n}")
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn q(src: &str) -> Program {
        parse_program(src).unwrap_or_else(|e| panic!("parse failed: {e}\n{src}"))
    }

    #[test]
    fn parses_simple_query() {
        let p = q(r#"query doc("bib.xml")//book(/title=>$t, /author=>$a)
                     construct {book=>(title=>$t, {author=>$a})}"#);
        assert!(p.functions.is_empty());
        match &p.statement.query {
            QExpr::Doc { doc, pattern } => {
                assert_eq!(doc, "bib.xml");
                match pattern.as_ref().unwrap() {
                    Ep::Tree(root, body) => {
                        assert!(matches!(**root, Ep::Path(Axis::Descendant, _)));
                        assert!(matches!(**body, Ep::Conj(_)));
                    }
                    other => panic!("expected tree, got {other:?}"),
                }
            }
            other => panic!("expected doc source, got {other:?}"),
        }
    }

    #[test]
    fn parses_disjunctive_pattern_with_shared_suffix() {
        let p = q(r#"query doc("bib.xml")//book(/title=>$t,(/author=>$a||/editor=>$e)
                                   (/last=>$l, /first=>$f))
                     where contains($t, ($l hid $a)) or contains($t, ($f hid $a))
                     construct results=>{result=>(person=>(last=>$l, first=>$f),
                                  {book=>(title=>$t,
                                    {(role=>"author" hid $a) |
                                     (role=>"editor" hid $e) })} )}
                                  orderby ($l asc, $f asc)"#);
        assert!(matches!(p.statement.where_, Some(Cond::Or(_))));
        // orderby must have attached to the person set
        match &p.statement.construct {
            Cp::Elem(NamePtn::Lit(n), inner) => {
                assert_eq!(n, "results");
                match &**inner {
                    Cp::Set { orderby, .. } => assert_eq!(orderby.len(), 2),
                    other => panic!("expected set, got {other:?}"),
                }
            }
            other => panic!("expected element, got {other:?}"),
        }
    }

    #[test]
    fn parses_fold_and_option_condition() {
        let p = q(r#"query doc("bib.xml")//book(/title=>$t;(/author=>$a||/editor=>$e))
                     where loc($a)<<loc($t) | loc($t)<loc($e)
                     construct {book=>({author=>$a}||{editor=>$e})}"#);
        match &p.statement.query {
            QExpr::Doc { pattern, .. } => match pattern.as_ref().unwrap() {
                Ep::Tree(_, body) => assert!(matches!(**body, Ep::Fold(_, _))),
                other => panic!("expected tree, got {other:?}"),
            },
            _ => panic!("expected doc"),
        }
        assert!(matches!(p.statement.where_, Some(Cond::OptBranch(_))));
    }

    #[test]
    fn parses_quantifiers_and_boolean_structure() {
        let p = q(r#"query doc("bib.xml")//book(/author=>$a,/editor=>$e/last=>$l)
                     where (foreach $a. not($a/last=>"Li")) and ($l="Liu" or $l="Li")
                     construct {bookinfo=>({author=>$a},{editor=>$e})}"#);
        match p.statement.where_.as_ref().unwrap() {
            Cond::And(items) => {
                assert_eq!(items.len(), 2);
                assert!(matches!(items[0], Cond::Quantified { .. }));
                assert!(matches!(items[1], Cond::Or(_)));
            }
            other => panic!("expected and, got {other:?}"),
        }
    }

    #[test]
    fn parses_par_with_chains() {
        let p = q(r#"query doc("bib.xml")//book((/author=>$a/email=>$ma||/author=>$b),
                                    /editor=>$e/email=>$me)
                     where ((commondomain($ma,$me) with count({$e} hid $a)>1) par
                            ($b=$e with count({$e} hid $b)>2)) with
                           (count({$e} hid {$a|$b})>3)
                     construct {book=>({authorA=>$a|authorB=>$b}, {editor=>$e})}"#);
        match p.statement.where_.as_ref().unwrap() {
            Cond::With(l, r) => {
                assert!(matches!(**l, Cond::Par(_, _)));
                assert!(matches!(**r, Cond::Cmp { op: CmpOp::Gt, .. }));
            }
            other => panic!("expected with, got {other:?}"),
        }
    }

    #[test]
    fn parses_declares_views_and_cons() {
        let p = q(r#"declare successive({(doc,loc)}):{(doc,loc)} as (
                       query #input([($i1, $l1)::nil] ||
                                    [($i2,$l2)::$t[($i3,$l3)::*]]||
                                    [($i4,$l4)::[($i5,$l5)::*]])
                       where $l2<<$l3 par not($l4<<$l5)
                       construct {($i1,$l1)}||($i2,$l2)::successive($t)||{($i4,$l4)} )
                     query doc("bib2.xml")//books(/title=>$t;/author=>$a)
                     where loc($t)<loc($a)
                     construct books=>{book=>(title=>$t, successive({(author=>$a, loc($a))}))}"#);
        assert_eq!(p.functions.len(), 1);
        let f = &p.functions[0];
        assert_eq!(f.name, "successive");
        assert_eq!(f.input, ValType::Set(Box::new(ValType::Tuple(vec![
            ValType::Doc,
            ValType::Loc
        ]))));
        match &f.body.query {
            QExpr::Input { pattern: Vp::DUnion(views) } => {
                assert_eq!(views.len(), 3);
                assert!(views.iter().all(|v| matches!(v, Vp::View(_))));
            }
            other => panic!("expected input d-union, got {other:?}"),
        }
        match &f.body.construct {
            Cp::DUnion(items) => {
                assert_eq!(items.len(), 3);
                assert!(matches!(items[1], Cp::Cons(_, _)));
            }
            other => panic!("expected d-union, got {other:?}"),
        }
    }

    #[test]
    fn parses_func_source_and_groupby() {
        let p = q(r#"query doc("bib.xml")//book(/author=>$a/email=>$m, /title=>$t),
                           #func[{("count",{($in,$out)})}]
                     where endwith($m,"edu") with $in = {$a}
                     construct book=>{(author_number=>$out, {title=>$t})}"#);
        match &p.statement.query {
            QExpr::Conj(items) => {
                assert_eq!(items.len(), 2);
                assert!(matches!(items[1], QExpr::Func { .. }));
            }
            other => panic!("expected conj, got {other:?}"),
        }
    }

    #[test]
    fn parses_group_suffixes() {
        let p = q(r#"query doc("bib.xml")//book=>$b(/author=>$a, /editor=>$e)
                     where $a/last = $e/last
                     construct result=>(pairs=>{{(author=>$a, editor=>$e)}} groupby $b,
                                        grp1=>{{(author=>$a, {editor=>$e})}} groupby $b,
                                        grp2=>{({author=>$a}, {editor=>$e})} groupby $b)"#);
        match p.statement.where_.as_ref().unwrap() {
            Cond::Cmp { lhs: Operand::Sel { .. }, rhs: Operand::Sel { .. }, op: CmpOp::Eq } => {}
            other => panic!("expected selector comparison, got {other:?}"),
        }
        match &p.statement.construct {
            Cp::Elem(_, inner) => match &**inner {
                Cp::Tuple(items) => {
                    assert_eq!(items.len(), 3);
                    for it in items {
                        match it {
                            Cp::Elem(_, s) => match &**s {
                                Cp::Set { groupby, .. } => assert!(groupby.is_some()),
                                other => panic!("expected set, got {other:?}"),
                            },
                            other => panic!("expected element, got {other:?}"),
                        }
                    }
                }
                other => panic!("expected tuple, got {other:?}"),
            },
            other => panic!("expected element, got {other:?}"),
        }
    }

    #[test]
    fn parses_composite_sources() {
        let p = q(r#"query (doc("bsa.xml")||doc("bsb.xml")||doc("bsc.xml"))
                             (/storename=>$n,//book(/title=>$t,/price=>$p,/balance=>$b))
                     construct {bookinfo=>(title=>$t, mincost=>mapget((min({$p}),
                                  {($p, (store=>$n, balance=>$b))})))}"#);
        match &p.statement.query {
            QExpr::Suffixed(inner, _) => match &**inner {
                QExpr::Disj(items) => assert_eq!(items.len(), 3),
                other => panic!("expected disjunction, got {other:?}"),
            },
            other => panic!("expected suffixed source, got {other:?}"),
        }
    }

    #[test]
    fn parses_terms() {
        let t = parse_term("($b,$t,(($a|$e),($l,$f)))").unwrap();
        match t {
            UTerm::Tuple(items) => assert_eq!(items.len(), 3),
            other => panic!("expected tuple, got {other:?}"),
        }
        assert_eq!(
            parse_term("($l,$f)%").unwrap(),
            UTerm::Content(Box::new(UTerm::Tuple(vec![
                UTerm::Var("$l".into()),
                UTerm::Var("$f".into())
            ])))
        );
        assert!(matches!(parse_term("{$a|$b}").unwrap(), UTerm::Set(_)));
    }

    #[test]
    fn rejects_garbage() {
        assert!(parse_program("query construct x").is_err());
        assert!(parse_program(r#"query doc("a.xml")/x=>$x construct"#).is_err());
        assert!(parse_program("nonsense").is_err());
    }
}
