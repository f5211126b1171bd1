use alloc::collections::BTreeMap;
use alloc::format;
use alloc::string::{String, ToString};
use alloc::vec::Vec;

use super::ast::*;
use crate::rat::Rat;

#[derive(Clone, Debug, PartialEq, Eq, thiserror::Error)]
pub enum DslError {
    #[error("{line}:{col}: syntax error: {msg}")]
    Syntax { line: usize, col: usize, msg: String },
    #[error("{line}:{col}: undeclared identifier `{name}`")]
    Undeclared { line: usize, col: usize, name: String },
    #[error("{line}:{col}: symmetry generator `{gen}` references slot {slot}, but `{name}` has {arity} slot(s)")]
    SlotRange { line: usize, col: usize, name: String, gen: String, slot: usize, arity: usize },
}

#[derive(Clone, Debug, PartialEq)]
enum Tok {
    Ident(String),
    Int(u64),
    Punct(char),
}

#[derive(Clone, Debug)]
struct Token {
    tok: Tok,
    col: usize,
}

fn lex(line: &str, lno: usize) -> Result<Vec<Token>, DslError> {
    let chars: Vec<char> = line.chars().collect();
    let mut out = Vec::new();
    let mut i = 0;
    while i < chars.len() {
        let c = chars[i];
        let col = i + 1;
        if c == '#' {
            break;
        }
        if c.is_whitespace() {
            i += 1;
        } else if c.is_ascii_alphabetic() || c == '_' {
            let s = i;
            // identifiers may contain '-' only inside option words
            while i < chars.len() && (chars[i].is_ascii_alphanumeric() || chars[i] == '_') {
                i += 1;
            }
            out.push(Token { tok: Tok::Ident(chars[s..i].iter().collect()), col });
        } else if c.is_ascii_digit() {
            let s = i;
            while i < chars.len() && chars[i].is_ascii_digit() {
                i += 1;
            }
            let text: String = chars[s..i].iter().collect();
            let n = text.parse().map_err(|_| DslError::Syntax {
                line: lno,
                col,
                msg: format!("integer literal `{text}` too large"),
            })?;
            out.push(Token { tok: Tok::Int(n), col });
        } else if "[](),;:=+-*/^$<".contains(c) {
            out.push(Token { tok: Tok::Punct(c), col });
            i += 1;
        } else {
            return Err(DslError::Syntax { line: lno, col, msg: format!("unexpected character `{c}`") });
        }
    }
    Ok(out)
}

struct Cursor<'a> {
    toks: &'a [Token],
    pos: usize,
    line: usize,
    end_col: usize,
}

impl<'a> Cursor<'a> {
    fn new(toks: &'a [Token], line: usize, text: &str) -> Self {
        Cursor { toks, pos: 0, line, end_col: text.chars().count() + 1 }
    }

    fn peek(&self) -> Option<&Tok> {
        self.toks.get(self.pos).map(|t| &t.tok)
    }

    fn peek2(&self) -> Option<&Tok> {
        self.toks.get(self.pos + 1).map(|t| &t.tok)
    }

    fn col(&self) -> usize {
        self.toks.get(self.pos).map(|t| t.col).unwrap_or(self.end_col)
    }

    fn err(&self, msg: impl Into<String>) -> DslError {
        DslError::Syntax { line: self.line, col: self.col(), msg: msg.into() }
    }

    fn at_end(&self) -> bool {
        self.pos >= self.toks.len()
    }

    fn is(&self, c: char) -> bool {
        self.peek() == Some(&Tok::Punct(c))
    }

    fn eat(&mut self, c: char) -> bool {
        if self.is(c) {
            self.pos += 1;
            true
        } else {
            false
        }
    }

    fn expect(&mut self, c: char) -> Result<(), DslError> {
        if self.eat(c) {
            Ok(())
        } else {
            Err(self.err(format!("expected `{c}`")))
        }
    }

    fn ident(&mut self) -> Result<String, DslError> {
        match self.peek() {
            Some(Tok::Ident(s)) => {
                let s = s.clone();
                self.pos += 1;
                Ok(s)
            }
            _ => Err(self.err("expected identifier")),
        }
    }

    fn keyword(&mut self, kw: &str) -> bool {
        if matches!(self.peek(), Some(Tok::Ident(s)) if s == kw) {
            self.pos += 1;
            true
        } else {
            false
        }
    }

    fn int(&mut self) -> Result<u64, DslError> {
        match self.peek() {
            Some(Tok::Int(n)) => {
                let n = *n;
                self.pos += 1;
                Ok(n)
            }
            _ => Err(self.err("expected integer")),
        }
    }

    fn finish(&self) -> Result<(), DslError> {
        if self.at_end() {
            Ok(())
        } else {
            Err(self.err("unexpected trailing input"))
        }
    }

    /// Words like `special-smallest`: identifiers and integers glued by `-`/`<`.
    fn word(&mut self) -> Result<String, DslError> {
        let mut s = String::new();
        loop {
            match self.peek() {
                Some(Tok::Ident(x)) => s.push_str(x),
                Some(Tok::Int(n)) => s.push_str(&n.to_string()),
                Some(Tok::Punct(c @ ('-' | '<' | ','))) => s.push(*c),
                _ => break,
            }
            self.pos += 1;
        }
        if s.is_empty() {
            Err(self.err("expected a value"))
        } else {
            Ok(s)
        }
    }
}

#[derive(Clone, Copy, PartialEq, Eq, Debug)]
enum NameKind {
    Symbol,
    Form,
    Constant,
}

struct Names {
    kinds: BTreeMap<String, (NameKind, usize)>,
    classes: Vec<String>,
}

#[derive(Clone, Copy, PartialEq, Eq)]
enum Ctx {
    Transform,
    Structure,
    Relation,
}

fn parse_size(c: &mut Cursor) -> Result<SizeExpr, DslError> {
    let mut out = SizeExpr { constant: 0, terms: Vec::new() };
    let mut sign = if c.eat('-') { -1 } else { 1 };
    loop {
        match c.peek() {
            Some(Tok::Int(_)) => {
                let k = c.int()? as i64 * sign;
                if c.eat('*') {
                    let p = c.ident()?;
                    out.terms.push((k, p));
                } else {
                    out.constant += k;
                }
            }
            Some(Tok::Ident(_)) => {
                let p = c.ident()?;
                out.terms.push((sign, p));
            }
            _ => return Err(c.err("expected size expression")),
        }
        if c.eat('+') {
            sign = 1;
        } else if c.eat('-') {
            sign = -1;
        } else {
            break;
        }
    }
    Ok(out)
}

fn parse_slots(c: &mut Cursor, names: &Names) -> Result<Vec<String>, DslError> {
    let mut slots = Vec::new();
    if c.eat('[') {
        if !c.is(']') {
            loop {
                let col = c.col();
                let s = c.ident()?;
                if !names.classes.contains(&s) {
                    return Err(DslError::Undeclared { line: c.line, col, name: s });
                }
                slots.push(s);
                if !c.eat(',') {
                    break;
                }
            }
        }
        c.expect(']')?;
    }
    Ok(slots)
}

fn parse_symgens(c: &mut Cursor, name: &str, arity: usize) -> Result<Vec<SymGen>, DslError> {
    let mut gens = Vec::new();
    while c.eat(',') {
        let col = c.col();
        let neg = c.eat('-');
        let kw = c.ident()?;
        c.expect('(')?;
        let mut nums = Vec::new();
        loop {
            nums.push(c.int()? as usize);
            if !c.eat(',') {
                break;
            }
        }
        c.expect(')')?;
        let g = match (kw.as_str(), neg, nums.len()) {
            ("antisym", false, 2) => SymGen::Antisym(nums[0], nums[1]),
            ("sym" | "swap", false, 2) => SymGen::Sym(nums[0], nums[1]),
            ("perm", _, _) => SymGen::Perm { images: nums.clone(), sign: if neg { -1 } else { 1 } },
            _ => {
                return Err(DslError::Syntax {
                    line: c.line,
                    col,
                    msg: format!("unknown symmetry generator `{kw}` with {} argument(s)", nums.len()),
                })
            }
        };
        if let Some(&bad) = nums.iter().find(|&&s| s == 0 || s > arity) {
            return Err(DslError::SlotRange {
                line: c.line,
                col,
                name: name.into(),
                gen: format!("{}{kw}({})", if neg { "-" } else { "" }, nums.iter().map(|n| n.to_string()).collect::<Vec<_>>().join(",")),
                slot: bad,
                arity,
            });
        }
        if let SymGen::Perm { images, .. } = &g {
            let mut seen = images.clone();
            seen.sort_unstable();
            seen.dedup();
            if images.len() != arity || seen.len() != arity {
                return Err(DslError::Syntax {
                    line: c.line,
                    col,
                    msg: format!("`{g}` is not a permutation of {arity} slots"),
                });
            }
        }
        if let SymGen::Antisym(a, b) | SymGen::Sym(a, b) = g {
            if a == b {
                return Err(DslError::Syntax { line: c.line, col, msg: format!("`{g}` swaps a slot with itself") });
            }
        }
        gens.push(g);
    }
    Ok(gens)
}

struct ExprParser<'n> {
    names: &'n Names,
    ctx: Ctx,
}

impl ExprParser<'_> {
    fn expr(&self, c: &mut Cursor) -> Result<Expr, DslError> {
        let mut terms = Vec::new();
        let mut sign = if c.eat('-') {
            -1
        } else {
            c.eat('+');
            1
        };
        loop {
            let mut t = self.term(c)?;
            if sign < 0 {
                t.coeff = -t.coeff;
            }
            terms.push(t);
            if c.eat('+') {
                sign = 1;
            } else if c.eat('-') {
                sign = -1;
            } else {
                break;
            }
        }
        Ok(Expr { terms })
    }

    fn term(&self, c: &mut Cursor) -> Result<Term, DslError> {
        let mut coeff = Rat::ONE;
        let mut factors = Vec::new();
        loop {
            match c.peek() {
                Some(Tok::Int(_)) => {
                    let n = c.int()? as i64;
                    let mut r = Rat::int(n);
                    if c.eat('/') {
                        let d = c.int()? as i64;
                        if d == 0 {
                            return Err(c.err("zero denominator"));
                        }
                        r = Rat::new(n, d);
                    }
                    coeff = &coeff * &r;
                    // a numeric coefficient may be juxtaposed: `1/2 R[i,j,k,l]`
                    if matches!(c.peek(), Some(Tok::Ident(_)) | Some(Tok::Punct('('))) {
                        continue;
                    }
                }
                Some(Tok::Punct('(')) => {
                    c.pos += 1;
                    let e = self.expr(c)?;
                    c.expect(')')?;
                    factors.push(Factor::Paren(e));
                }
                Some(Tok::Ident(_)) => factors.push(Factor::Ref(self.reference(c)?)),
                _ => return Err(c.err("expected a factor")),
            }
            if !(c.eat('*') || c.eat('^')) {
                break;
            }
        }
        Ok(Term { coeff, factors })
    }

    fn reference(&self, c: &mut Cursor) -> Result<Ref, DslError> {
        let col = c.col();
        let name = c.ident()?;
        let kind = if self.ctx == Ctx::Transform && name == SELF {
            None
        } else {
            match self.names.kinds.get(&name) {
                Some(k) => Some(*k),
                None => return Err(DslError::Undeclared { line: c.line, col, name }),
            }
        };
        let (mut primary, mut deriv) = (Vec::new(), Vec::new());
        if c.eat('[') {
            let mut in_deriv = false;
            if !c.is(']') {
                loop {
                    if c.eat(';') {
                        if in_deriv {
                            return Err(c.err("second `;` in index list"));
                        }
                        in_deriv = true;
                        if c.is(']') {
                            break;
                        }
                    }
                    let a = match c.peek() {
                        Some(Tok::Int(_)) => Arg::Lit(c.int()? as u32),
                        Some(Tok::Punct('$')) if self.ctx == Ctx::Transform => {
                            c.pos += 1;
                            Arg::Slot
                        }
                        Some(Tok::Ident(_)) => Arg::Var(c.ident()?),
                        _ => return Err(c.err("expected index")),
                    };
                    if in_deriv {
                        deriv.push(a)
                    } else {
                        primary.push(a)
                    }
                    if c.is(';') {
                        continue;
                    }
                    if !c.eat(',') {
                        break;
                    }
                }
            }
            c.expect(']')?;
        }
        let bad = |msg: String| DslError::Syntax { line: c.line, col, msg };
        match kind {
            None => {
                if !deriv.is_empty() {
                    return Err(bad(format!("`{SELF}` takes no derivation indices")));
                }
            }
            Some((k, arity)) => {
                if primary.len() != arity {
                    return Err(bad(format!("`{name}` takes {arity} index(es), got {}", primary.len())));
                }
                if !deriv.is_empty() && k != NameKind::Symbol {
                    return Err(bad(format!("only invariants carry derivation indices (`{name}`)")));
                }
                if k == NameKind::Form && self.ctx == Ctx::Relation {
                    return Err(bad(format!("form `{name}` cannot appear in a relation")));
                }
            }
        }
        Ok(Ref { name, primary, deriv })
    }
}

fn rel_decl(c: &mut Cursor, ep: &ExprParser, auto: usize) -> Result<RelDecl, DslError> {
    let mut name = format!("r{auto}");
    if let (Some(Tok::Ident(s)), Some(Tok::Punct(':'))) = (c.peek(), c.peek2()) {
        if s != "for" {
            name = s.clone();
            c.pos += 2;
        }
    }
    let mut free = Vec::new();
    if c.keyword("for") {
        loop {
            free.push(c.ident()?);
            if !c.eat(',') {
                break;
            }
        }
        c.expect(':')?;
    }
    let lhs = ep.expr(c)?;
    c.expect('=')?;
    let rhs = ep.expr(c)?;
    c.finish()?;
    Ok(RelDecl { name, free, lhs, rhs })
}

#[derive(Clone, Copy, PartialEq, Eq, Debug)]
enum Section {
    Top,
    Indices,
    Coframe,
    Invariants,
    Constants,
    Transforms,
    Structure,
    Relations,
    Constraints,
    Options,
}

/// Parse `.doa` source text.
pub fn parse_problem(text: &str) -> Result<ProblemSpec, DslError> {
    // pass 1: bucket lines by section
    struct Line {
        section: Section,
        block: usize,
        lno: usize,
        text: String,
    }
    let mut lines: Vec<Line> = Vec::new();
    let mut section = Section::Top;
    let mut block = 0usize;
    let mut blocks: Vec<bool> = Vec::new();
    for (i, raw) in text.lines().enumerate() {
        let lno = i + 1;
        let body = raw.split('#').next().unwrap_or("").trim();
        if body.is_empty() {
            continue;
        }
        if let Some(h) = body.strip_prefix('[') {
            let Some(h) = h.strip_suffix(']') else {
                return Err(DslError::Syntax { line: lno, col: 1, msg: "unterminated section header".into() });
            };
            let mut words = h.split_whitespace();
            let head = words.next().unwrap_or("");
            let tag = words.next();
            section = match head {
                "indices" => Section::Indices,
                "coframe" => Section::Coframe,
                "invariants" => Section::Invariants,
                "constants" => Section::Constants,
                "transforms" => Section::Transforms,
                "structure" => Section::Structure,
                "relations" => Section::Relations,
                "constraints" => {
                    let eom = match tag {
                        None => false,
                        Some("eom") => true,
                        Some(t) => {
                            return Err(DslError::Syntax {
                                line: lno,
                                col: 1,
                                msg: format!("unknown constraint tag `{t}`"),
                            })
                        }
                    };
                    blocks.push(eom);
                    block = blocks.len() - 1;
                    Section::Constraints
                }
                "options" => Section::Options,
                other => {
                    return Err(DslError::Syntax { line: lno, col: 2, msg: format!("unknown section `{other}`") })
                }
            };
            if section != Section::Constraints && tag.is_some() {
                return Err(DslError::Syntax { line: lno, col: 1, msg: "unexpected section tag".into() });
            }
            continue;
        }
        lines.push(Line { section, block, lno, text: raw.to_string() });
    }
    if lines.is_empty() {
        return Err(DslError::Syntax { line: 1, col: 1, msg: "no declarations".into() });
    }

    let mut spec = ProblemSpec {
        name: String::new(),
        params: Vec::new(),
        classes: Vec::new(),
        forms: Vec::new(),
        symbols: Vec::new(),
        constants: Vec::new(),
        transforms: Vec::new(),
        structure: Vec::new(),
        aliases: Vec::new(),
        relations: Vec::new(),
        constraints: blocks.iter().map(|&eom| ConstraintBlock { eom, relations: Vec::new() }).collect(),
        options: Options::default(),
    };
    let mut names = Names { kinds: BTreeMap::new(), classes: Vec::new() };

    let declare = |names: &mut Names, c: &Cursor, col: usize, name: &str, kind: NameKind, arity: usize| {
        if names.kinds.contains_key(name) || names.classes.iter().any(|x| x == name) || name == SELF {
            return Err(DslError::Syntax { line: c.line, col, msg: format!("`{name}` declared twice or reserved") });
        }
        names.kinds.insert(name.into(), (kind, arity));
        Ok(())
    };

    // pass 2a: declarations, in section order so classes precede uses
    for want in [Section::Top, Section::Indices, Section::Coframe, Section::Invariants, Section::Constants, Section::Options] {
        for l in lines.iter().filter(|l| l.section == want) {
            let lno = l.lno;
            let toks = lex(&l.text, lno)?;
            let mut c = Cursor::new(&toks, lno, &l.text);
            match want {
                Section::Top => {
                    if c.keyword("problem") {
                        spec.name = c.word()?;
                    } else if c.keyword("param") {
                        let p = c.ident()?;
                        c.expect('=')?;
                        let v = c.int()? as i64;
                        spec.params.push((p, v));
                    } else {
                        return Err(c.err("expected `problem`, `param` or a section header"));
                    }
                }
                Section::Indices => {
                    let col = c.col();
                    let name = c.ident()?;
                    if names.classes.contains(&name) || names.kinds.contains_key(&name) {
                        return Err(DslError::Syntax { line: lno, col, msg: format!("index class `{name}` declared twice") });
                    }
                    c.expect(':')?;
                    let kcol = c.col();
                    let kind = match c.ident()?.as_str() {
                        "basic" => ClassKind::Basic,
                        "special" => ClassKind::Special,
                        "group" => ClassKind::Group,
                        k => {
                            return Err(DslError::Syntax { line: lno, col: kcol, msg: format!("unknown index kind `{k}`") })
                        }
                    };
                    let mut size = if kind == ClassKind::Special { Some(SizeExpr::lit(1)) } else { None };
                    let mut hint = None;
                    while c.eat(',') {
                        if c.keyword("size") {
                            size = Some(parse_size(&mut c)?);
                        } else if c.keyword("hint") {
                            hint = Some(c.word()?);
                        } else {
                            return Err(c.err("expected `size` or `hint`"));
                        }
                    }
                    c.finish()?;
                    let size = size.ok_or_else(|| DslError::Syntax { line: lno, col, msg: format!("class `{name}` needs a size") })?;
                    names.classes.push(name.clone());
                    spec.classes.push(ClassDecl { name, kind, size, hint });
                }
                Section::Coframe | Section::Invariants => {
                    let col = c.col();
                    let name = c.ident()?;
                    let slots = parse_slots(&mut c, &names)?;
                    c.expect(':')?;
                    let kcol = c.col();
                    let kw = c.ident()?;
                    let syms = parse_symgens(&mut c, &name, slots.len())?;
                    c.finish()?;
                    if want == Section::Coframe {
                        let kind = match kw.as_str() {
                            "basic" => FormKind::Basic,
                            "vertical" => FormKind::Vertical,
                            "group" => FormKind::Group,
                            "alias" => FormKind::Alias,
                            k => {
                                return Err(DslError::Syntax { line: lno, col: kcol, msg: format!("unknown form kind `{k}`") })
                            }
                        };
                        declare(&mut names, &c, col, &name, NameKind::Form, slots.len())?;
                        spec.forms.push(FormDecl { name, slots, kind, syms });
                    } else {
                        let role = match kw.as_str() {
                            "structural" => Role::Structural,
                            "auxiliary" => Role::Auxiliary,
                            "given" => Role::Given,
                            k => {
                                return Err(DslError::Syntax { line: lno, col: kcol, msg: format!("unknown role `{k}`") })
                            }
                        };
                        declare(&mut names, &c, col, &name, NameKind::Symbol, slots.len())?;
                        spec.symbols.push(SymbolDecl { name, slots, role, syms });
                    }
                }
                Section::Constants => {
                    let col = c.col();
                    let name = c.ident()?;
                    let slots = parse_slots(&mut c, &names)?;
                    c.expect('=')?;
                    let mut factor = Rat::ONE;
                    let neg = c.eat('-');
                    if let Some(Tok::Int(_)) = c.peek() {
                        let n = c.int()? as i64;
                        factor = Rat::int(n);
                        if c.eat('/') {
                            let d = c.int()? as i64;
                            if d == 0 {
                                return Err(c.err("zero denominator"));
                            }
                            factor = Rat::new(n, d);
                        }
                    }
                    if neg {
                        factor = -factor;
                    }
                    let kcol = c.col();
                    let kind = match c.ident()?.as_str() {
                        "epsilon" => ConstKind::Epsilon,
                        "delta" => ConstKind::Delta,
                        "zero" => ConstKind::Zero,
                        k => {
                            return Err(DslError::Syntax { line: lno, col: kcol, msg: format!("unknown constant kind `{k}`") })
                        }
                    };
                    c.finish()?;
                    declare(&mut names, &c, col, &name, NameKind::Constant, slots.len())?;
                    spec.constants.push(ConstDecl { name, slots, factor, kind });
                }
                Section::Options => {
                    let col = c.col();
                    let key = c.ident()?;
                    c.expect('=')?;
                    let num = |c: &mut Cursor| c.int().map(|v| v as u32);
                    let o = &mut spec.options;
                    match key.as_str() {
                        "max_order" => o.max_order = Some(num(&mut c)?),
                        "seed_order" => o.seed_order = Some(num(&mut c)?),
                        "trials" => o.trials = Some(num(&mut c)?),
                        "coef_degree" => o.coef_degree = Some(num(&mut c)?),
                        "ordering" => o.ordering = Some(c.word()?),
                        k => {
                            return Err(DslError::Syntax { line: lno, col, msg: format!("unknown option `{k}`") })
                        }
                    }
                    c.finish()?;
                }
                _ => unreachable!(),
            }
        }
    }
    if spec.name.is_empty() {
        spec.name = "problem".into();
    }
    // pass 2b: expressions
    let mut auto = 0usize;
    for l in &lines {
        let lno = l.lno;
        let ctx = match l.section {
            Section::Transforms => Ctx::Transform,
            Section::Structure => Ctx::Structure,
            Section::Relations | Section::Constraints => Ctx::Relation,
            _ => continue,
        };
        let toks = lex(&l.text, lno)?;
        let mut c = Cursor::new(&toks, lno, &l.text);
        let ep = ExprParser { names: &names, ctx };
        match l.section {
            Section::Transforms => {
                let col = c.col();
                let class = c.ident()?;
                if !names.classes.contains(&class) {
                    return Err(DslError::Undeclared { line: lno, col, name: class });
                }
                c.expect(':')?;
                let expr = ep.expr(&mut c)?;
                c.finish()?;
                spec.transforms.push(TransformDecl { class, expr });
            }
            Section::Structure => {
                let is_alias = if c.keyword("d") {
                    false
                } else if c.keyword("alias") {
                    true
                } else {
                    return Err(c.err("expected `d <form> = ...` or `alias <form> = ...`"));
                };
                let col = c.col();
                let lhs = ep.reference(&mut c)?;
                if names.kinds.get(&lhs.name).map(|k| k.0) != Some(NameKind::Form) {
                    return Err(DslError::Syntax { line: lno, col, msg: format!("`{}` is not a coframe form", lhs.name) });
                }
                c.expect('=')?;
                let rhs = ep.expr(&mut c)?;
                c.finish()?;
                if is_alias {
                    spec.aliases.push(AliasDef { lhs, rhs });
                } else {
                    spec.structure.push(StructEq { lhs, rhs });
                }
            }
            Section::Relations => {
                auto += 1;
                let r = rel_decl(&mut c, &ep, auto)?;
                spec.relations.push(r);
            }
            Section::Constraints => {
                auto += 1;
                let r = rel_decl(&mut c, &ep, auto)?;
                spec.constraints[l.block].relations.push(r);
            }
            _ => unreachable!(),
        }
    }
    Ok(spec)
}
