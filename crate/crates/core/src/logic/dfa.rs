use super::formula::Formula;
use std::fmt::Write as _;
use thiserror::Error;

/// Letters are bit masks over [`Dfa::atoms`]; this many atoms at most.
pub const MAX_ATOMS: usize = 20;

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum DfaError {
    #[error("line {line}: {msg}")]
    Parse { line: usize, msg: String },
    #[error("state {0} out of range")]
    InvalidState(usize),
    #[error("no transition from state {state} on letter {letter:#b}")]
    PartialTransition { state: usize, letter: u64 },
    #[error("several transitions from state {state} on letter {letter:#b}")]
    NondeterministicTransition { state: usize, letter: u64 },
    #[error("unsupported formula: {0}")]
    UnsupportedFormula(String),
    #[error("too many atoms: {0} (at most {MAX_ATOMS})")]
    TooManyAtoms(usize),
}

/// Boolean guard over atom indices.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Guard {
    True,
    False,
    Atom(usize),
    Not(Box<Guard>),
    And(Box<Guard>, Box<Guard>),
    Or(Box<Guard>, Box<Guard>),
}

impl Guard {
    pub fn eval(&self, letter: u64) -> bool {
        match self {
            Guard::True => true,
            Guard::False => false,
            Guard::Atom(i) => letter >> i & 1 == 1,
            Guard::Not(g) => !g.eval(letter),
            Guard::And(a, b) => a.eval(letter) && b.eval(letter),
            Guard::Or(a, b) => a.eval(letter) || b.eval(letter),
        }
    }

    fn not(g: Guard) -> Guard {
        Guard::Not(Box::new(g))
    }

    fn and(a: Guard, b: Guard) -> Guard {
        Guard::And(Box::new(a), Box::new(b))
    }

    fn prec(&self) -> u8 {
        match self {
            Guard::Or(..) => 1,
            Guard::And(..) => 2,
            _ => 3,
        }
    }

    pub fn render(&self, atoms: &[String]) -> String {
        let wrap = |g: &Guard, min: u8| {
            let s = g.render(atoms);
            if g.prec() < min {
                format!("({s})")
            } else {
                s
            }
        };
        match self {
            Guard::True => "true".into(),
            Guard::False => "false".into(),
            Guard::Atom(i) => atoms[*i].clone(),
            Guard::Not(g) => format!("!{}", wrap(g, 3)),
            Guard::And(a, b) => format!("{} & {}", wrap(a, 2), wrap(b, 3)),
            Guard::Or(a, b) => format!("{} | {}", wrap(a, 1), wrap(b, 2)),
        }
    }
}

/// Parses a guard with `!`, `&`, `|`, parentheses, `true`, `false`.
pub fn parse_guard(src: &str, atoms: &[String]) -> Result<Guard, String> {
    let f = super::formula::parse(src).map_err(|e| e.to_string())?;
    fn conv(f: &Formula, atoms: &[String]) -> Result<Guard, String> {
        Ok(match f {
            Formula::True => Guard::True,
            Formula::Atom(a) if a == "false" => Guard::False,
            Formula::Atom(a) => Guard::Atom(atoms.iter().position(|x| x == a).ok_or_else(|| format!("unknown atom {a:?}"))?),
            Formula::Not(g) => Guard::not(conv(g, atoms)?),
            Formula::And(a, b) => Guard::and(conv(a, atoms)?, conv(b, atoms)?),
            Formula::Or(a, b) => Guard::Or(Box::new(conv(a, atoms)?), Box::new(conv(b, atoms)?)),
            other => return Err(format!("temporal operator in guard: {other}")),
        })
    }
    conv(&f, atoms)
}

/// Step budget of a bounded specification.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Horizon {
    pub steps: u32,
    /// States that count as accepting when the budget runs out.
    pub expiry_accepting: Vec<usize>,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Dfa {
    pub atoms: Vec<String>,
    pub n_states: usize,
    pub initial: usize,
    pub accepting: Vec<bool>,
    /// Outgoing edges per state, `(guard, target)`.
    pub edges: Vec<Vec<(Guard, usize)>>,
    pub horizon: Option<Horizon>,
    table: Vec<u32>,
}

impl Dfa {
    /// Validates that the transition function is total and deterministic.
    pub fn new(
        atoms: Vec<String>,
        initial: usize,
        accepting: Vec<bool>,
        edges: Vec<Vec<(Guard, usize)>>,
        horizon: Option<Horizon>,
    ) -> Result<Self, DfaError> {
        let n = edges.len();
        if atoms.len() > MAX_ATOMS {
            return Err(DfaError::TooManyAtoms(atoms.len()));
        }
        if initial >= n || accepting.len() != n {
            return Err(DfaError::InvalidState(initial));
        }
        for e in edges.iter().flatten() {
            if e.1 >= n {
                return Err(DfaError::InvalidState(e.1));
            }
        }
        if let Some(h) = &horizon {
            if let Some(&z) = h.expiry_accepting.iter().find(|&&z| z >= n) {
                return Err(DfaError::InvalidState(z));
            }
        }
        let letters = 1u64 << atoms.len();
        let mut table = vec![0u32; n * letters as usize];
        for z in 0..n {
            for l in 0..letters {
                let mut hit = None;
                for (g, t) in &edges[z] {
                    if g.eval(l) {
                        if hit.is_some() {
                            return Err(DfaError::NondeterministicTransition { state: z, letter: l });
                        }
                        hit = Some(*t);
                    }
                }
                let t = hit.ok_or(DfaError::PartialTransition { state: z, letter: l })?;
                table[z * letters as usize + l as usize] = t as u32;
            }
        }
        Ok(Self { atoms, n_states: n, initial, accepting, edges, horizon, table })
    }

    pub fn step(&self, z: usize, letter: u64) -> usize {
        self.table[(z << self.atoms.len()) + letter as usize] as usize
    }

    /// Letter for a set of atom names; names the DFA does not use are
    /// ignored.
    pub fn letter<S: AsRef<str>>(&self, names: &[S]) -> u64 {
        names
            .iter()
            .filter_map(|n| self.atoms.iter().position(|a| a == n.as_ref()))
            .fold(0, |acc, i| acc | 1 << i)
    }

    /// Final state after reading `letters` from the initial state and whether
    /// it is accepting.
    pub fn run(&self, letters: &[u64]) -> (usize, bool) {
        let z = letters.iter().fold(self.initial, |z, &l| self.step(z, l));
        (z, self.accepting[z])
    }

    pub fn is_accepting(&self, z: usize) -> bool {
        self.accepting[z]
    }

    pub fn is_expiry_accepting(&self, z: usize) -> bool {
        self.accepting[z] || self.horizon.as_ref().is_some_and(|h| h.expiry_accepting.contains(&z))
    }

    /// States from which no accepting (or expiry-accepting) state is
    /// reachable.
    pub fn dead_states(&self) -> Vec<bool> {
        let n = self.n_states;
        let mut live: Vec<bool> = (0..n).map(|z| self.is_expiry_accepting(z)).collect();
        let letters = 1usize << self.atoms.len();
        loop {
            let mut changed = false;
            for z in 0..n {
                if !live[z] && (0..letters).any(|l| live[self.table[z * letters + l] as usize]) {
                    live[z] = true;
                    changed = true;
                }
            }
            if !changed {
                break;
            }
        }
        live.into_iter().map(|l| !l).collect()
    }

    /// Maps letters over `other_atoms` onto this DFA's atoms.
    pub fn letter_map(&self, other_atoms: &[String]) -> Vec<Option<usize>> {
        other_atoms.iter().map(|a| self.atoms.iter().position(|b| b == a)).collect()
    }
}

/// Translates a letter over `from` atoms with a map from [`Dfa::letter_map`].
pub fn translate_letter(mask: u64, map: &[Option<usize>]) -> u64 {
    map.iter()
        .enumerate()
        .filter(|(i, t)| mask >> i & 1 == 1 && t.is_some())
        .fold(0, |acc, (_, t)| acc | 1 << t.unwrap())
}

fn boolean_guard(f: &Formula, atoms: &mut Vec<String>) -> Option<Guard> {
    Some(match f {
        Formula::True => Guard::True,
        Formula::Atom(a) => {
            let i = atoms.iter().position(|x| x == a).unwrap_or_else(|| {
                atoms.push(a.clone());
                atoms.len() - 1
            });
            Guard::Atom(i)
        }
        Formula::And(a, b) => Guard::and(boolean_guard(a, atoms)?, boolean_guard(b, atoms)?),
        Formula::Or(a, b) => Guard::Or(Box::new(boolean_guard(a, atoms)?), Box::new(boolean_guard(b, atoms)?)),
        _ => return None,
    })
}

/// Automaton for the supported templates over negation-free formulas:
/// `A U B`, `F A`, `A U<=k B`, `F<=k A` and `G<=k A`, with `A`, `B` Boolean.
pub fn template_dfa(f: &Formula) -> Result<Dfa, DfaError> {
    let unsupported = || DfaError::UnsupportedFormula(f.to_string());
    let mut atoms = Vec::new();
    match f {
        Formula::Until(a, b, k) => {
            let ga = boolean_guard(a, &mut atoms).ok_or_else(unsupported)?;
            let gb = boolean_guard(b, &mut atoms).ok_or_else(unsupported)?;
            let edges = vec![
                vec![
                    (gb.clone(), 1),
                    (Guard::and(ga.clone(), Guard::not(gb.clone())), 0),
                    (Guard::and(Guard::not(ga), Guard::not(gb)), 2),
                ],
                vec![(Guard::True, 1)],
                vec![(Guard::True, 2)],
            ];
            let horizon = k.map(|k| Horizon { steps: k, expiry_accepting: vec![] });
            Dfa::new(atoms, 0, vec![false, true, false], edges, horizon)
        }
        Formula::Eventually(a, k) => {
            let ga = boolean_guard(a, &mut atoms).ok_or_else(unsupported)?;
            let edges = vec![vec![(ga.clone(), 1), (Guard::not(ga), 0)], vec![(Guard::True, 1)]];
            let horizon = k.map(|k| Horizon { steps: k, expiry_accepting: vec![] });
            Dfa::new(atoms, 0, vec![false, true], edges, horizon)
        }
        Formula::Always(a, k) => {
            let ga = boolean_guard(a, &mut atoms).ok_or_else(unsupported)?;
            let edges = vec![vec![(ga.clone(), 0), (Guard::not(ga), 1)], vec![(Guard::True, 1)]];
            let horizon = Some(Horizon { steps: *k, expiry_accepting: vec![0] });
            Dfa::new(atoms, 0, vec![false, false], edges, horizon)
        }
        _ => Err(unsupported()),
    }
}

pub const DFA_HEADER: &str = "switchsynth-v1 dfa";

/// Text form of a DFA.
pub fn write_dfa(d: &Dfa) -> String {
    let mut s = String::new();
    writeln!(s, "{DFA_HEADER}").unwrap();
    writeln!(s, "atoms{}", d.atoms.iter().map(|a| format!(" {a}")).collect::<String>()).unwrap();
    writeln!(s, "states {}", d.n_states).unwrap();
    writeln!(s, "initial {}", d.initial).unwrap();
    let acc: String = (0..d.n_states).filter(|&z| d.accepting[z]).map(|z| format!(" {z}")).collect();
    writeln!(s, "accepting{acc}").unwrap();
    if let Some(h) = &d.horizon {
        let exp: String = h.expiry_accepting.iter().map(|z| format!(" {z}")).collect();
        writeln!(s, "horizon {}{exp}", h.steps).unwrap();
    }
    for (z, es) in d.edges.iter().enumerate() {
        for (g, t) in es {
            writeln!(s, "edge {z} {t} {}", g.render(&d.atoms)).unwrap();
        }
    }
    s
}

/// Parses the text form written by [`write_dfa`]. Blank lines and `#`
/// comments are ignored.
pub fn read_dfa(text: &str) -> Result<Dfa, DfaError> {
    let perr = |line: usize, msg: &str| DfaError::Parse { line, msg: msg.to_string() };
    let mut lines = text
        .lines()
        .enumerate()
        .map(|(i, l)| (i + 1, l.split('#').next().unwrap_or("").trim()))
        .filter(|(_, l)| !l.is_empty());
    match lines.next() {
        Some((_, l)) if l == DFA_HEADER => {}
        Some((n, _)) => return Err(perr(n, "expected header 'switchsynth-v1 dfa'")),
        None => return Err(perr(0, "empty input")),
    }
    let mut atoms: Option<Vec<String>> = None;
    let mut n_states = None;
    let mut initial = None;
    let mut accepting_list: Vec<usize> = Vec::new();
    let mut horizon = None;
    let mut raw_edges: Vec<(usize, usize, usize, String)> = Vec::new();
    let num = |n: usize, s: &str| s.parse::<usize>().map_err(|_| perr(n, &format!("bad integer {s:?}")));
    for (n, l) in lines {
        let mut parts = l.splitn(2, char::is_whitespace);
        let key = parts.next().unwrap();
        let rest = parts.next().unwrap_or("").trim();
        let words: Vec<&str> = rest.split_whitespace().collect();
        match key {
            "atoms" => atoms = Some(words.iter().map(|s| s.to_string()).collect()),
            "states" => n_states = Some(num(n, rest)?),
            "initial" => initial = Some(num(n, rest)?),
            "accepting" => accepting_list = words.iter().map(|w| num(n, w)).collect::<Result<_, _>>()?,
            "horizon" => {
                let steps = words.first().ok_or_else(|| perr(n, "missing step count"))?;
                let steps = steps.parse::<u32>().map_err(|_| perr(n, "bad step count"))?;
                let exp = words[1..].iter().map(|w| num(n, w)).collect::<Result<_, _>>()?;
                horizon = Some(Horizon { steps, expiry_accepting: exp });
            }
            "edge" => {
                let mut p = rest.splitn(3, char::is_whitespace);
                let from = num(n, p.next().unwrap_or(""))?;
                let to = num(n, p.next().unwrap_or("").trim())?;
                let g = p.next().unwrap_or("").trim().to_string();
                if g.is_empty() {
                    return Err(perr(n, "missing guard"));
                }
                raw_edges.push((n, from, to, g));
            }
            other => return Err(perr(n, &format!("unknown keyword {other:?}"))),
        }
    }
    let atoms = atoms.ok_or_else(|| perr(0, "missing 'atoms' line"))?;
    let n_states = n_states.ok_or_else(|| perr(0, "missing 'states' line"))?;
    let initial = initial.ok_or_else(|| perr(0, "missing 'initial' line"))?;
    let mut accepting = vec![false; n_states];
    for z in accepting_list {
        *accepting.get_mut(z).ok_or(DfaError::InvalidState(z))? = true;
    }
    let mut edges = vec![Vec::new(); n_states];
    for (n, from, to, g) in raw_edges {
        let guard = parse_guard(&g, &atoms).map_err(|m| perr(n, &m))?;
        edges.get_mut(from).ok_or(DfaError::InvalidState(from))?.push((guard, to));
    }
    Dfa::new(atoms, initial, accepting, edges, horizon)
}
