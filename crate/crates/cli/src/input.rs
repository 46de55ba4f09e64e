//! Line-oriented state and operator files.
//!
//! State file:
//!
//! ```text
//! basis 8
//! state psi
//!   0.7071067811865476 [1 2 3]
//!   0.5-0.5i [4 5 6]
//! end
//! mixture rho
//!   0.25 psi
//!   0.75 phi
//! end
//! group g = psi phi
//! ```
//!
//! Operator file (`[I] [J] λ` for `λ a†_I a_J`, missing Hermitian partners are
//! added):
//!
//! ```text
//! rank 1
//! [1] [3] 0.5
//! ```
//!
//! `#` starts a comment. Coefficients are real or `a+bi`.

use std::collections::{BTreeMap, HashMap};
use std::fmt::{self, Write as _};

use fermigrade_core::{Complex64, GroupProduct, MixedState, OrbitalBasis, QOperator, StateVector};

const WEIGHT_SUM_TOL: f64 = 1e-9;
const HERMITIAN_TOL: f64 = 1e-12;

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
#[error("line {line}: {message}")]
pub struct ParseError {
    pub line: usize,
    pub message: String,
}

fn fail<T>(line: usize, message: impl Into<String>) -> Result<T, ParseError> {
    Err(ParseError { line, message: message.into() })
}

/// Parses `1.5`, `-2e-3`, `0.5+0.25i`, `1-i`, `-3.5i`.
pub fn parse_complex(text: &str) -> Option<Complex64> {
    let finite = |x: f64| x.is_finite().then_some(x);
    let real = |s: &str| s.parse::<f64>().ok().and_then(finite);
    let imag = |s: &str| match s {
        "" | "+" => Some(1.0),
        "-" => Some(-1.0),
        _ => real(s),
    };
    let Some(body) = text.strip_suffix('i') else {
        return real(text).map(|re| Complex64::new(re, 0.0));
    };
    let bytes = body.as_bytes();
    let cut = (1..bytes.len())
        .rev()
        .find(|&k| matches!(bytes[k], b'+' | b'-') && !matches!(bytes[k - 1], b'e' | b'E'));
    match cut {
        Some(k) => Some(Complex64::new(real(&body[..k])?, imag(&body[k..])?)),
        None => Some(Complex64::new(0.0, imag(body)?)),
    }
}

/// 17 significant digits, enough to read back the same bits.
pub fn format_f64(x: f64) -> String {
    format!("{x:.16e}")
}

pub fn format_complex(z: Complex64) -> String {
    if z.im.to_bits() == 0 {
        return format_f64(z.re);
    }
    let sign = if z.im.is_sign_negative() { '-' } else { '+' };
    format!("{}{sign}{}i", format_f64(z.re), format_f64(z.im.abs()))
}

fn format_occupation(occ: &[usize]) -> String {
    let inner: Vec<String> = occ.iter().map(usize::to_string).collect();
    format!("[{}]", inner.join(" "))
}

#[derive(Debug, Clone, PartialEq)]
pub struct NamedState {
    pub name: String,
    pub n: usize,
    pub terms: Vec<(Complex64, Vec<usize>)>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct NamedMixture {
    pub name: String,
    pub components: Vec<(f64, String)>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct NamedGroup {
    pub name: String,
    pub factors: Vec<String>,
}

/// Parsed state file. Entries keep their order of appearance.
#[derive(Debug, Clone, PartialEq)]
pub struct StateFile {
    pub dim: usize,
    pub states: Vec<NamedState>,
    pub mixtures: Vec<NamedMixture>,
    pub groups: Vec<NamedGroup>,
}

/// Lookup failures for names given on the command line.
#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum LookupError {
    #[error("no state named `{0}`")]
    NoState(String),
    #[error("no state or mixture named `{0}`")]
    NoStateOrMixture(String),
    #[error("no group or state named `{0}`")]
    NoGroup(String),
    #[error("state `{0}` has zero norm")]
    ZeroNorm(String),
}

fn strip_comment(line: &str) -> &str {
    line.split_once('#').map_or(line, |(head, _)| head).trim()
}

fn valid_name(name: &str) -> bool {
    !name.is_empty() && name.chars().all(|c| c.is_alphanumeric() || matches!(c, '_' | '-' | '.'))
}

fn parse_usize(token: &str, line: usize, what: &str) -> Result<usize, ParseError> {
    token.parse().or_else(|_| fail(line, format!("expected {what}, found `{token}`")))
}

/// `[i j k]` as written, without ordering checks.
fn parse_tuple(text: &str, line: usize) -> Result<Vec<usize>, ParseError> {
    let inner = text
        .strip_prefix('[')
        .and_then(|t| t.strip_suffix(']'))
        .map_or_else(|| fail(line, format!("expected `[...]`, found `{text}`")), Ok)?;
    inner.split_whitespace().map(|t| parse_usize(t, line, "an orbital index")).collect()
}

fn check_range(tuple: &[usize], dim: usize, line: usize) -> Result<(), ParseError> {
    match tuple.iter().find(|&&k| k == 0 || k > dim) {
        Some(k) => fail(line, format!("orbital {k} outside 1..={dim}")),
        None => Ok(()),
    }
}

enum Block {
    State(NamedState, usize),
    Mixture(NamedMixture, usize, Vec<usize>),
}

impl StateFile {
    pub fn parse(text: &str) -> Result<Self, ParseError> {
        let mut dim = None;
        let mut states = Vec::new();
        let mut mixtures = Vec::new();
        let mut groups = Vec::new();
        let mut seen: HashMap<String, usize> = HashMap::new();
        // (line, referenced name) for references checked once everything is read
        let mut mixture_refs: Vec<(usize, String, usize)> = Vec::new();
        let mut group_refs: Vec<(usize, String, usize)> = Vec::new();
        let mut block: Option<Block> = None;

        let mut declare = |name: &str, line: usize| -> Result<(), ParseError> {
            if !valid_name(name) {
                return fail(line, format!("invalid name `{name}`"));
            }
            if let Some(prev) = seen.insert(name.to_string(), line) {
                return fail(line, format!("`{name}` already defined on line {prev}"));
            }
            Ok(())
        };

        let mut last = 0;
        for (k, raw) in text.lines().enumerate() {
            let line = k + 1;
            last = line;
            let content = strip_comment(raw);
            if content.is_empty() {
                continue;
            }
            let mut words = content.split_whitespace();
            let head = words.next().unwrap_or_default();

            if head == "end" {
                if words.next().is_some() {
                    return fail(line, "unexpected text after `end`");
                }
                match block.take() {
                    None => return fail(line, "`end` outside a block"),
                    Some(Block::State(s, start)) => {
                        if s.terms.is_empty() {
                            return fail(start, format!("state `{}` has no determinants", s.name));
                        }
                        states.push(s);
                    }
                    Some(Block::Mixture(m, start, lines)) => {
                        if m.components.is_empty() {
                            return fail(start, format!("mixture `{}` has no components", m.name));
                        }
                        let total: f64 = m.components.iter().map(|(w, _)| w).sum();
                        if (total - 1.0).abs() > WEIGHT_SUM_TOL {
                            return fail(start, format!("weights of `{}` sum to {total}, not 1", m.name));
                        }
                        for ((_, name), l) in m.components.iter().zip(lines) {
                            mixture_refs.push((l, name.clone(), mixtures.len()));
                        }
                        mixtures.push(m);
                    }
                }
                continue;
            }

            match &mut block {
                Some(Block::State(state, _)) => {
                    let Some((coeff, occ)) = content.split_once('[') else {
                        return fail(line, "expected `<coefficient> [orbitals]` or `end`");
                    };
                    let coeff = coeff.trim();
                    let coeff = parse_complex(coeff)
                        .map_or_else(|| fail(line, format!("invalid coefficient `{coeff}`")), Ok)?;
                    let occ = parse_tuple(&format!("[{}", occ.trim()), line)?;
                    let dim = dim.expect("blocks open only after basis");
                    check_range(&occ, dim, line)?;
                    if occ.windows(2).any(|w| w[0] >= w[1]) {
                        return fail(line, format!("orbitals must be strictly increasing: {}", format_occupation(&occ)));
                    }
                    if state.terms.is_empty() {
                        state.n = occ.len();
                    } else if occ.len() != state.n {
                        return fail(line, format!("{} orbitals, but the state has {} particles", occ.len(), state.n));
                    }
                    if state.terms.iter().any(|(_, o)| o == &occ) {
                        return fail(line, format!("determinant {} listed twice", format_occupation(&occ)));
                    }
                    state.terms.push((coeff, occ));
                    continue;
                }
                Some(Block::Mixture(mixture, _, lines)) => {
                    let (Some(w), Some(name), None) = (Some(head), words.next(), words.next()) else {
                        return fail(line, "expected `<weight> <state>` or `end`");
                    };
                    let w: f64 = w.parse().ok().filter(|w: &f64| w.is_finite()).map_or_else(
                        || fail(line, format!("invalid weight `{w}`")),
                        Ok,
                    )?;
                    if w <= 0.0 {
                        return fail(line, format!("weight {w} is not positive"));
                    }
                    mixture.components.push((w, name.to_string()));
                    lines.push(line);
                    continue;
                }
                None => {}
            }

            match head {
                "basis" => {
                    if dim.is_some() {
                        return fail(line, "basis declared twice");
                    }
                    let (Some(d), None) = (words.next(), words.next()) else {
                        return fail(line, "expected `basis <dim>`");
                    };
                    let d = parse_usize(d, line, "a basis dimension")?;
                    if d == 0 {
                        return fail(line, "basis dimension must be at least 1");
                    }
                    dim = Some(d);
                }
                _ if dim.is_none() => return fail(line, "the file must start with `basis <dim>`"),
                "state" | "mixture" => {
                    let (Some(name), None) = (words.next(), words.next()) else {
                        return fail(line, format!("expected `{head} <name>`"));
                    };
                    declare(name, line)?;
                    block = Some(if head == "state" {
                        Block::State(NamedState { name: name.into(), n: 0, terms: Vec::new() }, line)
                    } else {
                        Block::Mixture(NamedMixture { name: name.into(), components: Vec::new() }, line, Vec::new())
                    });
                }
                "group" => {
                    let rest = content["group".len()..].trim();
                    let Some((name, factors)) = rest.split_once('=') else {
                        return fail(line, "expected `group <name> = <state> ...`");
                    };
                    let name = name.trim();
                    declare(name, line)?;
                    let factors: Vec<String> = factors.split_whitespace().map(String::from).collect();
                    if factors.is_empty() {
                        return fail(line, format!("group `{name}` has no factors"));
                    }
                    for f in &factors {
                        group_refs.push((line, f.clone(), groups.len()));
                    }
                    groups.push(NamedGroup { name: name.into(), factors });
                }
                other => return fail(line, format!("unknown keyword `{other}`")),
            }
        }

        if let Some(open) = block {
            let (name, start) = match open {
                Block::State(s, l) => (s.name, l),
                Block::Mixture(m, l, _) => (m.name, l),
            };
            return fail(start, format!("block `{name}` is missing `end`"));
        }
        let Some(dim) = dim else {
            return fail(last.max(1), "missing `basis <dim>`");
        };

        let by_name: BTreeMap<&str, &NamedState> = states.iter().map(|s| (s.name.as_str(), s)).collect();
        let mut mixture_n: HashMap<usize, usize> = HashMap::new();
        for (line, name, idx) in &mixture_refs {
            let Some(s) = by_name.get(name.as_str()) else {
                return fail(*line, format!("unknown state `{name}`"));
            };
            if s.terms.iter().all(|(c, _)| *c == Complex64::default()) {
                return fail(*line, format!("state `{name}` has zero norm"));
            }
            match mixture_n.insert(*idx, s.n) {
                Some(n) if n != s.n => {
                    return fail(*line, format!("`{name}` has {} particles, other components have {n}", s.n));
                }
                _ => {}
            }
        }
        for (line, name, _) in &group_refs {
            if !by_name.contains_key(name.as_str()) {
                return fail(*line, format!("unknown state `{name}`"));
            }
            if by_name[name.as_str()].n == 0 {
                return fail(*line, format!("group factor `{name}` has no particles"));
            }
        }

        Ok(Self { dim, states, mixtures, groups })
    }

    /// Canonical text form; parsing it gives back an identical value.
    pub fn write(&self) -> String {
        let mut out = String::new();
        let _ = writeln!(out, "basis {}", self.dim);
        for s in &self.states {
            let _ = writeln!(out, "\nstate {}", s.name);
            for (c, occ) in &s.terms {
                let _ = writeln!(out, "  {} {}", format_complex(*c), format_occupation(occ));
            }
            out.push_str("end\n");
        }
        for m in &self.mixtures {
            let _ = writeln!(out, "\nmixture {}", m.name);
            for (w, name) in &m.components {
                let _ = writeln!(out, "  {} {name}", format_f64(*w));
            }
            out.push_str("end\n");
        }
        if !self.groups.is_empty() {
            out.push('\n');
        }
        for g in &self.groups {
            let _ = writeln!(out, "group {} = {}", g.name, g.factors.join(" "));
        }
        out
    }

    pub fn basis(&self) -> OrbitalBasis {
        OrbitalBasis::new(self.dim).expect("dimension checked while parsing")
    }

    fn find_state(&self, name: &str) -> Option<&NamedState> {
        self.states.iter().find(|s| s.name == name)
    }

    /// The state exactly as written (not normalized).
    pub fn state(&self, name: &str) -> Result<StateVector, LookupError> {
        let s = self.find_state(name).ok_or_else(|| LookupError::NoState(name.into()))?;
        Ok(StateVector::from_terms(self.basis(), s.n, s.terms.iter().cloned()).expect("terms checked while parsing"))
    }

    fn normalized(&self, name: &str) -> Result<StateVector, LookupError> {
        self.state(name)?.normalized().ok_or_else(|| LookupError::ZeroNorm(name.into()))
    }

    /// A named state as a pure state, or a named mixture; components are normalized.
    pub fn mixed(&self, name: &str) -> Result<MixedState, LookupError> {
        if self.find_state(name).is_some() {
            let psi = self.normalized(name)?;
            return Ok(MixedState::pure(psi).expect("normalized"));
        }
        let m = self
            .mixtures
            .iter()
            .find(|m| m.name == name)
            .ok_or_else(|| LookupError::NoStateOrMixture(name.into()))?;
        let comps = m
            .components
            .iter()
            .map(|(w, s)| Ok((*w, self.normalized(s)?)))
            .collect::<Result<Vec<_>, LookupError>>()?;
        Ok(MixedState::new(comps).expect("weights and particle numbers checked while parsing"))
    }

    /// A named group, or a named state as a one-factor group. Factors are taken as written.
    pub fn group(&self, name: &str) -> Result<GroupProduct, LookupError> {
        let factors = match self.groups.iter().find(|g| g.name == name) {
            Some(g) => g.factors.iter().map(|f| self.state(f)).collect::<Result<Vec<_>, _>>()?,
            None if self.find_state(name).is_some() => vec![self.state(name)?],
            None => return Err(LookupError::NoGroup(name.into())),
        };
        GroupProduct::new(factors).map_err(|_| LookupError::NoGroup(name.into()))
    }
}

impl fmt::Display for StateFile {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.write())
    }
}

/// Parses an operator file against `basis` and completes it to a Hermitian
/// operator.
pub fn parse_operator(text: &str, basis: OrbitalBasis) -> Result<QOperator, ParseError> {
    let mut rank = None;
    let mut entries: BTreeMap<(Vec<usize>, Vec<usize>), (usize, Complex64)> = BTreeMap::new();
    let mut last = 0;
    for (k, raw) in text.lines().enumerate() {
        let line = k + 1;
        last = line;
        let content = strip_comment(raw);
        if content.is_empty() {
            continue;
        }
        if let Some(rest) = content.strip_prefix("rank") {
            if rank.is_some() {
                return fail(line, "rank declared twice");
            }
            let q = parse_usize(rest.trim(), line, "a rank")?;
            if q == 0 {
                return fail(line, "rank must be at least 1");
            }
            rank = Some(q);
            continue;
        }
        let Some(q) = rank else {
            return fail(line, "the file must start with `rank <q>`");
        };
        let (Some(i_end), Some(j_start)) = (content.find(']'), content.rfind('[')) else {
            return fail(line, "expected `[I] [J] <coefficient>`");
        };
        let j_end = content.rfind(']').unwrap_or(0);
        if j_start <= i_end || j_end < j_start {
            return fail(line, "expected `[I] [J] <coefficient>`");
        }
        let i = parse_tuple(content[..=i_end].trim(), line)?;
        let j = parse_tuple(content[j_start..=j_end].trim(), line)?;
        if !content[i_end + 1..j_start].trim().is_empty() {
            return fail(line, "unexpected text between the tuples");
        }
        let coeff = content[j_end + 1..].trim();
        let lam = parse_complex(coeff).map_or_else(|| fail(line, format!("invalid coefficient `{coeff}`")), Ok)?;
        for t in [&i, &j] {
            if t.len() != q {
                return fail(line, format!("tuple {} does not have {q} entries", format_occupation(t)));
            }
            check_range(t, basis.dim(), line)?;
        }
        if let Some((prev, _)) = entries.get(&(i.clone(), j.clone())) {
            return fail(line, format!("duplicate entry, first given on line {prev}"));
        }
        if let Some((prev, partner)) = entries.get(&(j.clone(), i.clone())) {
            if (partner.conj() - lam).norm() > HERMITIAN_TOL {
                return fail(line, format!("not the conjugate of the partner entry on line {prev}"));
            }
        }
        entries.insert((i, j), (line, lam));
    }
    let Some(q) = rank else {
        return fail(last.max(1), "missing `rank <q>`");
    };
    let terms = entries.into_iter().map(|(key, (_, lam))| (key, lam)).collect();
    QOperator::hermitian_closure(basis, q, terms).or_else(|e| fail(last.max(1), e.to_string()))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn complex_literals() {
        let z = |re, im| Some(Complex64::new(re, im));
        assert_eq!(parse_complex("1.5"), z(1.5, 0.0));
        assert_eq!(parse_complex("-2e-3"), z(-2e-3, 0.0));
        assert_eq!(parse_complex("0.5+0.25i"), z(0.5, 0.25));
        assert_eq!(parse_complex("1-i"), z(1.0, -1.0));
        assert_eq!(parse_complex("-3.5i"), z(0.0, -3.5));
        assert_eq!(parse_complex("i"), z(0.0, 1.0));
        assert_eq!(parse_complex("1e-3-2E+2i"), z(1e-3, -200.0));
        assert_eq!(parse_complex("1+"), None);
        assert_eq!(parse_complex("nan"), None);
        assert_eq!(parse_complex("1+2j"), None);
    }

    #[test]
    fn formatting_reads_back_exactly() {
        for z in [
            Complex64::new(0.1, 0.0),
            Complex64::new(-0.0, 1.0 / 3.0),
            Complex64::new(1e-300, -0.0),
            Complex64::new(f64::MAX, -f64::MIN_POSITIVE),
        ] {
            let back = parse_complex(&format_complex(z)).unwrap();
            assert_eq!((back.re.to_bits(), back.im.to_bits()), (z.re.to_bits(), z.im.to_bits()), "{z}");
        }
    }

    const SAMPLE: &str = "basis 5\nstate a\n 1 [1 2]\n 1i [3 4] # comment\nend\nstate b\n 2 [5]\nend\n\
                          mixture m\n 0.5 a\n 0.5 a\nend\ngroup g = a b\n";

    #[test]
    fn parses_sample() {
        let f = StateFile::parse(SAMPLE).unwrap();
        assert_eq!(f.dim, 5);
        assert_eq!(f.states.len(), 2);
        assert_eq!(f.states[0].n, 2);
        assert_eq!(f.groups[0].factors, vec!["a", "b"]);
        assert_eq!(f.group("g").unwrap().sizes(), vec![2, 1]);
        assert_eq!(f.group("b").unwrap().r(), 1);
        assert!((f.mixed("a").unwrap().components()[0].1.norm() - 1.0).abs() < 1e-15);
        assert_eq!(StateFile::parse(&f.write()).unwrap(), f);
    }

    fn error_line(text: &str) -> usize {
        StateFile::parse(text).unwrap_err().line
    }

    #[test]
    fn reports_the_offending_line() {
        assert_eq!(error_line("state a\n"), 1);
        assert_eq!(error_line("basis 3\nstate a\n 1 [2 1]\nend\n"), 3);
        assert_eq!(error_line("basis 3\nstate a\n 1 [1 4]\nend\n"), 3);
        assert_eq!(error_line("basis 3\nstate a\n 1 [1]\n 1 [1 2]\nend\n"), 4);
        assert_eq!(error_line("basis 3\nstate a\n 1 [1]\n 2 [1]\nend\n"), 4);
        assert_eq!(error_line("basis 3\nstate a\n x [1]\nend\n"), 3);
        assert_eq!(error_line("basis 3\nstate a\n 1 [1]\nend\nstate a\n 1 [2]\nend\n"), 5);
        assert_eq!(error_line("basis 3\nstate a\n 1 [1]\nend\nmixture m\n 0.5 a\n 0.4 a\nend\n"), 5);
        assert_eq!(error_line("basis 3\nmixture m\n 1 zz\nend\n"), 3);
        assert_eq!(error_line("basis 3\nstate a\n 1 [1]\nend\ngroup g = a q\n"), 5);
        assert_eq!(error_line("basis 3\nstate a\n 1 [1]\n"), 2);
        assert_eq!(error_line("basis 3\nfoo\n"), 2);
    }

    #[test]
    fn operator_files() {
        let b = OrbitalBasis::new(4).unwrap();
        let op = parse_operator("rank 1\n[1] [3] 0.5+0.5i\n[2] [2] 1\n", b).unwrap();
        assert_eq!(op.q(), 1);
        assert_eq!(op.terms().count(), 3);
        let line = |t: &str| parse_operator(t, b).unwrap_err().line;
        assert_eq!(line("rank 1\n[1] [3] 1\n[1] [3] 1\n"), 3);
        assert_eq!(line("rank 1\n[1] [3] 1\n[3] [1] 2\n"), 3);
        assert_eq!(line("rank 1\n[1 2] [3] 1\n"), 2);
        assert_eq!(line("rank 1\n[5] [3] 1\n"), 2);
        assert_eq!(line("[1] [3] 1\n"), 1);
        assert_eq!(line("rank 2\n[1 2] [3 4] 1 2\n"), 2);
    }
}
