use std::fmt;
use thiserror::Error;

/// Temporal-logic formula over region labels.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub enum Formula {
    True,
    Atom(String),
    Not(Box<Formula>),
    And(Box<Formula>, Box<Formula>),
    Or(Box<Formula>, Box<Formula>),
    Next(Box<Formula>),
    /// `a U b`, or `a U<=k b` when the bound is set.
    Until(Box<Formula>, Box<Formula>, Option<u32>),
    Eventually(Box<Formula>, Option<u32>),
    /// Bounded `G<=k a`.
    Always(Box<Formula>, u32),
}

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum ParseError {
    #[error("unexpected character {ch:?} at {pos}")]
    UnexpectedChar { ch: char, pos: usize },
    #[error("unexpected {found} at {pos}, expected {expected}")]
    Unexpected { found: String, expected: &'static str, pos: usize },
    #[error("unbounded G at {pos} is not co-safe; use G<=k")]
    UnboundedAlways { pos: usize },
    #[error("bound at {pos} is not a non-negative integer")]
    BadBound { pos: usize },
}

#[derive(Debug, Clone, PartialEq)]
enum Tok {
    Ident(String),
    Num(String),
    Not,
    And,
    Or,
    LParen,
    RParen,
    Le,
    End,
}

fn describe(t: &Tok) -> String {
    match t {
        Tok::Ident(s) => format!("identifier {s:?}"),
        Tok::Num(s) => format!("number {s}"),
        Tok::Not => "'!'".into(),
        Tok::And => "'&'".into(),
        Tok::Or => "'|'".into(),
        Tok::LParen => "'('".into(),
        Tok::RParen => "')'".into(),
        Tok::Le => "'<='".into(),
        Tok::End => "end of input".into(),
    }
}

fn lex(src: &str) -> Result<Vec<(Tok, usize)>, ParseError> {
    let b: Vec<char> = src.chars().collect();
    let mut out = Vec::new();
    let mut i = 0;
    while i < b.len() {
        let c = b[i];
        let start = i;
        match c {
            c if c.is_whitespace() => {
                i += 1;
                continue;
            }
            '!' => out.push((Tok::Not, start)),
            '&' => out.push((Tok::And, start)),
            '|' => out.push((Tok::Or, start)),
            '(' => out.push((Tok::LParen, start)),
            ')' => out.push((Tok::RParen, start)),
            '<' if b.get(i + 1) == Some(&'=') => {
                out.push((Tok::Le, start));
                i += 1;
            }
            c if c.is_ascii_digit() => {
                while i + 1 < b.len() && b[i + 1].is_ascii_digit() {
                    i += 1;
                }
                out.push((Tok::Num(b[start..=i].iter().collect()), start));
            }
            c if c.is_ascii_alphabetic() || c == '_' || c == '~' => {
                while i + 1 < b.len() && (b[i + 1].is_ascii_alphanumeric() || b[i + 1] == '_') {
                    i += 1;
                }
                out.push((Tok::Ident(b[start..=i].iter().collect()), start));
            }
            _ => return Err(ParseError::UnexpectedChar { ch: c, pos: start }),
        }
        i += 1;
    }
    out.push((Tok::End, b.len()));
    Ok(out)
}

struct Parser {
    toks: Vec<(Tok, usize)>,
    i: usize,
}

impl Parser {
    fn peek(&self) -> &Tok {
        &self.toks[self.i].0
    }

    fn peek_at(&self, k: usize) -> &Tok {
        &self.toks[(self.i + k).min(self.toks.len() - 1)].0
    }

    fn pos(&self) -> usize {
        self.toks[self.i].1
    }

    fn bump(&mut self) -> Tok {
        let t = self.toks[self.i].0.clone();
        if self.i + 1 < self.toks.len() {
            self.i += 1;
        }
        t
    }

    fn err(&self, expected: &'static str) -> ParseError {
        ParseError::Unexpected { found: describe(self.peek()), expected, pos: self.pos() }
    }

    fn starts_operand(t: &Tok) -> bool {
        match t {
            // `U` is the binary until, never an operand.
            Tok::Ident(s) => s != "U",
            Tok::Not | Tok::LParen => true,
            _ => false,
        }
    }

    fn or(&mut self) -> Result<Formula, ParseError> {
        let mut l = self.and()?;
        while *self.peek() == Tok::Or {
            self.bump();
            l = Formula::Or(Box::new(l), Box::new(self.and()?));
        }
        Ok(l)
    }

    fn and(&mut self) -> Result<Formula, ParseError> {
        let mut l = self.until()?;
        while *self.peek() == Tok::And {
            self.bump();
            l = Formula::And(Box::new(l), Box::new(self.until()?));
        }
        Ok(l)
    }

    fn until(&mut self) -> Result<Formula, ParseError> {
        let l = self.unary()?;
        if matches!(self.peek(), Tok::Ident(s) if s == "U") {
            self.bump();
            let bound = self.bound()?;
            let r = self.until()?;
            return Ok(Formula::Until(Box::new(l), Box::new(r), bound));
        }
        Ok(l)
    }

    fn bound(&mut self) -> Result<Option<u32>, ParseError> {
        if *self.peek() != Tok::Le {
            return Ok(None);
        }
        self.bump();
        let pos = self.pos();
        match self.bump() {
            Tok::Num(n) => n.parse().map(Some).map_err(|_| ParseError::BadBound { pos }),
            _ => Err(ParseError::BadBound { pos }),
        }
    }

    fn unary(&mut self) -> Result<Formula, ParseError> {
        let pos = self.pos();
        match self.peek().clone() {
            Tok::Not => {
                self.bump();
                Ok(Formula::Not(Box::new(self.unary()?)))
            }
            Tok::Ident(s) if (s == "X" || s == "F" || s == "G") => {
                // An operator only if an operand (or a bound) follows;
                // otherwise the letter is an atom.
                let next = self.peek_at(1).clone();
                let bounded = next == Tok::Le;
                if !bounded && !Self::starts_operand(&next) {
                    return self.primary();
                }
                self.bump();
                let bound = if s == "X" { None } else { self.bound()? };
                let arg = Box::new(self.unary()?);
                match s.as_str() {
                    "X" => Ok(Formula::Next(arg)),
                    "F" => Ok(Formula::Eventually(arg, bound)),
                    _ => match bound {
                        Some(k) => Ok(Formula::Always(arg, k)),
                        None => Err(ParseError::UnboundedAlways { pos }),
                    },
                }
            }
            _ => self.primary(),
        }
    }

    fn primary(&mut self) -> Result<Formula, ParseError> {
        match self.peek().clone() {
            Tok::Ident(s) => {
                self.bump();
                Ok(if s == "true" { Formula::True } else { Formula::Atom(s) })
            }
            Tok::LParen => {
                self.bump();
                let f = self.or()?;
                if *self.peek() != Tok::RParen {
                    return Err(self.err("')'"));
                }
                self.bump();
                Ok(f)
            }
            _ => Err(self.err("an operand")),
        }
    }
}

/// Parses a formula. Operators: `!`, `&`, `|`, `X`, `U`, `F`, bounded
/// `U<=k`, `F<=k`, `G<=k`, parentheses and `true`. Negation binds tightest,
/// then the temporal operators, then `&`, then `|`; `U` is
/// right-associative.
pub fn parse(src: &str) -> Result<Formula, ParseError> {
    let mut p = Parser { toks: lex(src)?, i: 0 };
    let f = p.or()?;
    if *p.peek() != Tok::End {
        return Err(p.err("end of input"));
    }
    Ok(f)
}

fn prec(f: &Formula) -> u8 {
    match f {
        Formula::Or(..) => 1,
        Formula::And(..) => 2,
        Formula::Until(..) => 3,
        _ => 4,
    }
}

impl fmt::Display for Formula {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let wrap = |f: &mut fmt::Formatter<'_>, g: &Formula, min: u8| {
            if prec(g) < min {
                write!(f, "({g})")
            } else {
                write!(f, "{g}")
            }
        };
        match self {
            Formula::True => write!(f, "true"),
            Formula::Atom(a) => write!(f, "{a}"),
            Formula::Not(g) => {
                write!(f, "!")?;
                wrap(f, g, 4)
            }
            Formula::And(a, b) => {
                wrap(f, a, 2)?;
                write!(f, " & ")?;
                wrap(f, b, 3)
            }
            Formula::Or(a, b) => {
                wrap(f, a, 1)?;
                write!(f, " | ")?;
                wrap(f, b, 2)
            }
            Formula::Next(g) => {
                write!(f, "X ")?;
                wrap(f, g, 4)
            }
            Formula::Until(a, b, k) => {
                wrap(f, a, 4)?;
                match k {
                    Some(k) => write!(f, " U<={k} ")?,
                    None => write!(f, " U ")?,
                }
                wrap(f, b, 3)
            }
            Formula::Eventually(g, k) => {
                match k {
                    Some(k) => write!(f, "F<={k} ")?,
                    None => write!(f, "F ")?,
                }
                wrap(f, g, 4)
            }
            Formula::Always(g, k) => {
                write!(f, "G<={k} ")?;
                wrap(f, g, 4)
            }
        }
    }
}

/// Fragment a formula belongs to.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Fragment {
    /// Co-safe LTL: negation only on atoms, no bounds.
    CoSafe,
    /// Bounded LTL: every temporal operator is bounded (or `X`).
    Bounded,
    /// Neither (mixed bounded/unbounded, or negation above an atom).
    Other,
}

pub fn classify(f: &Formula) -> Fragment {
    fn walk(f: &Formula, bounded: &mut bool, unbounded: &mut bool, bad_neg: &mut bool) {
        match f {
            Formula::True | Formula::Atom(_) => {}
            Formula::Not(g) => {
                if !matches!(**g, Formula::Atom(_)) {
                    *bad_neg = true;
                }
                walk(g, bounded, unbounded, bad_neg)
            }
            Formula::And(a, b) | Formula::Or(a, b) => {
                walk(a, bounded, unbounded, bad_neg);
                walk(b, bounded, unbounded, bad_neg)
            }
            Formula::Next(g) => walk(g, bounded, unbounded, bad_neg),
            Formula::Until(a, b, k) => {
                if k.is_some() { *bounded = true } else { *unbounded = true }
                walk(a, bounded, unbounded, bad_neg);
                walk(b, bounded, unbounded, bad_neg)
            }
            Formula::Eventually(g, k) => {
                if k.is_some() { *bounded = true } else { *unbounded = true }
                walk(g, bounded, unbounded, bad_neg)
            }
            Formula::Always(g, _) => {
                *bounded = true;
                walk(g, bounded, unbounded, bad_neg)
            }
        }
    }
    let (mut b, mut u, mut n) = (false, false, false);
    walk(f, &mut b, &mut u, &mut n);
    match (n, b, u) {
        (true, _, _) | (_, true, true) => Fragment::Other,
        (_, true, false) => Fragment::Bounded,
        _ => Fragment::CoSafe,
    }
}

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum TranslateError {
    #[error("unknown atom {0:?} under negation")]
    UnknownAtom(String),
    #[error("negation of a non-atomic subformula: !{0}")]
    NonAtomicNegation(String),
}

/// Rewrites every negated atom `!p` into the complement atom `~p`, giving a
/// negation-free formula.
pub fn bar_translate(f: &Formula, regions: &[String]) -> Result<Formula, TranslateError> {
    let rec = |g: &Formula| bar_translate(g, regions).map(Box::new);
    Ok(match f {
        Formula::True | Formula::Atom(_) => f.clone(),
        Formula::Not(g) => match &**g {
            Formula::Atom(p) if regions.iter().any(|r| r == p) => Formula::Atom(format!("~{p}")),
            Formula::Atom(p) => return Err(TranslateError::UnknownAtom(p.clone())),
            other => return Err(TranslateError::NonAtomicNegation(other.to_string())),
        },
        Formula::And(a, b) => Formula::And(rec(a)?, rec(b)?),
        Formula::Or(a, b) => Formula::Or(rec(a)?, rec(b)?),
        Formula::Next(g) => Formula::Next(rec(g)?),
        Formula::Until(a, b, k) => Formula::Until(rec(a)?, rec(b)?, *k),
        Formula::Eventually(g, k) => Formula::Eventually(rec(g)?, *k),
        Formula::Always(g, k) => Formula::Always(rec(g)?, *k),
    })
}

/// Atoms mentioned in the formula, in order of first appearance.
pub fn atoms(f: &Formula) -> Vec<String> {
    fn walk(f: &Formula, out: &mut Vec<String>) {
        match f {
            Formula::True => {}
            Formula::Atom(a) => {
                if !out.contains(a) {
                    out.push(a.clone())
                }
            }
            Formula::Not(g) | Formula::Next(g) | Formula::Eventually(g, _) | Formula::Always(g, _) => walk(g, out),
            Formula::And(a, b) | Formula::Or(a, b) | Formula::Until(a, b, _) => {
                walk(a, out);
                walk(b, out)
            }
        }
    }
    let mut out = Vec::new();
    walk(f, &mut out);
    out
}

/// Three-valued verdict on a finite prefix.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Verdict {
    /// Every extension satisfies the formula.
    True,
    /// No extension satisfies the formula.
    False,
    Undecided,
}

impl Verdict {
    fn and(self, o: Verdict) -> Verdict {
        match (self, o) {
            (Verdict::False, _) | (_, Verdict::False) => Verdict::False,
            (Verdict::True, Verdict::True) => Verdict::True,
            _ => Verdict::Undecided,
        }
    }

    fn or(self, o: Verdict) -> Verdict {
        match (self, o) {
            (Verdict::True, _) | (_, Verdict::True) => Verdict::True,
            (Verdict::False, Verdict::False) => Verdict::False,
            _ => Verdict::Undecided,
        }
    }

    fn not(self) -> Verdict {
        match self {
            Verdict::True => Verdict::False,
            Verdict::False => Verdict::True,
            Verdict::Undecided => Verdict::Undecided,
        }
    }
}

/// Evaluates the formula at position `i` of a finite trace of letters
/// (sets of atoms that hold), with Kleene logic for positions past the end.
/// `G<=k a` is read over positions `i..=i+k`.
pub fn evaluate_prefix(f: &Formula, trace: &[Vec<String>], i: usize) -> Verdict {
    let holds = |a: &str, j: usize| -> Verdict {
        match trace.get(j) {
            Some(l) if l.iter().any(|x| x == a) => Verdict::True,
            Some(_) => Verdict::False,
            None => Verdict::Undecided,
        }
    };
    match f {
        Formula::True => Verdict::True,
        Formula::Atom(a) => holds(a, i),
        Formula::Not(g) => evaluate_prefix(g, trace, i).not(),
        Formula::And(a, b) => evaluate_prefix(a, trace, i).and(evaluate_prefix(b, trace, i)),
        Formula::Or(a, b) => evaluate_prefix(a, trace, i).or(evaluate_prefix(b, trace, i)),
        Formula::Next(g) => {
            if i + 1 <= trace.len() {
                evaluate_prefix(g, trace, i + 1)
            } else {
                Verdict::Undecided
            }
        }
        Formula::Until(a, b, k) => {
            // b at some j >= i (j <= i+k), a on i..j.
            let last = match k {
                Some(k) => i + *k as usize,
                None => usize::MAX,
            };
            let mut acc = Verdict::False;
            let mut prefix_a = Verdict::True;
            let mut j = i;
            loop {
                if j >= trace.len() {
                    // Unknown future positions can still satisfy or not.
                    if j <= last && prefix_a != Verdict::False {
                        acc = acc.or(Verdict::Undecided);
                    }
                    break;
                }
                acc = acc.or(prefix_a.and(evaluate_prefix(b, trace, j)));
                prefix_a = prefix_a.and(evaluate_prefix(a, trace, j));
                if j == last || prefix_a == Verdict::False || acc == Verdict::True {
                    break;
                }
                j += 1;
            }
            acc
        }
        Formula::Eventually(g, k) => {
            evaluate_prefix(&Formula::Until(Box::new(Formula::True), g.clone(), *k), trace, i)
        }
        Formula::Always(g, k) => {
            let mut acc = Verdict::True;
            for j in i..=i + *k as usize {
                acc = acc.and(evaluate_prefix(g, trace, j));
                if acc == Verdict::False {
                    break;
                }
            }
            acc
        }
    }
}
