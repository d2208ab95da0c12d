//! Line-oriented text format for reaction networks.
//!
//! ```text
//! # comment
//! species X Y            # dynamic species
//! const A = 10           # chemostatted species with a fixed copy number
//! reaction A + 2 X -> 3 X : 6.0e-3
//! reaction 0 -> X : 5.0   # empty side written as 0
//! pair 0 1               # optional reverse-channel pairing
//! ```

use super::{NetworkError, Reaction, ReactionNetwork, Species, SpeciesKind};

struct Cursor<'a> {
    line: &'a str,
    line_no: usize,
    pos: usize,
}

impl<'a> Cursor<'a> {
    fn new(line: &'a str, line_no: usize) -> Self {
        Cursor { line, line_no, pos: 0 }
    }

    fn error(&self, message: impl Into<String>) -> NetworkError {
        NetworkError::Syntax {
            line: self.line_no,
            column: self.pos + 1,
            message: message.into(),
        }
    }

    fn skip_ws(&mut self) {
        let rest = &self.line[self.pos..];
        let trimmed = rest.trim_start();
        self.pos += rest.len() - trimmed.len();
    }

    fn at_end(&mut self) -> bool {
        self.skip_ws();
        self.pos >= self.line.len()
    }

    fn peek(&mut self) -> Option<char> {
        self.skip_ws();
        self.line[self.pos..].chars().next()
    }

    /// Next whitespace-free token made of the given character class.
    fn take_while(&mut self, pred: impl Fn(char) -> bool) -> &'a str {
        self.skip_ws();
        let start = self.pos;
        for c in self.line[self.pos..].chars() {
            if pred(c) {
                self.pos += c.len_utf8();
            } else {
                break;
            }
        }
        &self.line[start..self.pos]
    }

    fn identifier(&mut self) -> Result<&'a str, NetworkError> {
        self.skip_ws();
        let first = self.line[self.pos..].chars().next();
        match first {
            Some(c) if c.is_ascii_alphabetic() => {}
            _ => return Err(self.error("expected an identifier")),
        }
        Ok(self.take_while(|c| c.is_ascii_alphanumeric() || c == '_'))
    }

    fn expect(&mut self, token: &str) -> Result<(), NetworkError> {
        self.skip_ws();
        if self.line[self.pos..].starts_with(token) {
            self.pos += token.len();
            Ok(())
        } else {
            Err(self.error(format!("expected `{token}`")))
        }
    }

    fn unsigned_integer(&mut self) -> Result<u64, NetworkError> {
        let tok = self.take_while(|c| c.is_ascii_digit());
        if tok.is_empty() {
            return Err(self.error("expected a nonnegative integer"));
        }
        tok.parse()
            .map_err(|_| self.error(format!("integer `{tok}` out of range")))
    }

    fn float(&mut self) -> Result<f64, NetworkError> {
        let tok = self.take_while(|c| {
            c.is_ascii_digit() || matches!(c, '.' | '-' | '+' | 'e' | 'E')
        });
        if tok.is_empty() {
            return Err(self.error("expected a number"));
        }
        tok.parse()
            .map_err(|_| self.error(format!("cannot parse `{tok}` as a number")))
    }
}

/// One side of a reaction: `0` or `term [+ term ...]` with
/// `term = [coefficient] identifier`.
fn parse_side(cur: &mut Cursor) -> Result<Vec<(String, u32, usize)>, NetworkError> {
    if cur.peek() == Some('0') {
        // Lone zero: the empty side. A digit starting a term must be followed
        // by an identifier, so `0` followed by `->`, `:`, or end is empty.
        let save = cur.pos;
        cur.expect("0")?;
        match cur.peek() {
            Some(c) if c.is_ascii_alphabetic() => {
                cur.pos = save; // was a coefficient, fall through
            }
            _ => return Ok(Vec::new()),
        }
    }
    let mut terms = Vec::new();
    loop {
        let coeff = if cur.peek().is_some_and(|c| c.is_ascii_digit()) {
            let n = cur.unsigned_integer()?;
            u32::try_from(n).map_err(|_| cur.error("stoichiometric coefficient too large"))?
        } else {
            1
        };
        let name = cur.identifier()?.to_string();
        let column = cur.pos;
        terms.push((name, coeff, column));
        if cur.peek() == Some('+') {
            cur.expect("+")?;
        } else {
            break;
        }
    }
    Ok(terms)
}

/// Parse the network description format. Declaration order of species and
/// reactions is preserved.
pub fn parse_network(text: &str) -> Result<ReactionNetwork, NetworkError> {
    let mut species: Vec<Species> = Vec::new();
    let mut raw_reactions: Vec<(Vec<(String, u32, usize)>, Vec<(String, u32, usize)>, f64, usize)> =
        Vec::new();
    let mut pairs: Vec<(usize, usize, usize)> = Vec::new();

    fn declare(species: &mut Vec<Species>, s: Species) -> Result<(), NetworkError> {
        if species.iter().any(|t| t.name == s.name) {
            return Err(NetworkError::DuplicateSpecies(s.name));
        }
        species.push(s);
        Ok(())
    }

    for (line_idx, raw_line) in text.lines().enumerate() {
        let line = match raw_line.find('#') {
            Some(i) => &raw_line[..i],
            None => raw_line,
        };
        let mut cur = Cursor::new(line, line_idx + 1);
        if cur.at_end() {
            continue;
        }
        let keyword = cur.identifier()?;
        match keyword {
            "species" => {
                let mut any = false;
                while !cur.at_end() {
                    let name = cur.identifier()?;
                    declare(&mut species, Species::dynamic(name))?;
                    any = true;
                }
                if !any {
                    return Err(cur.error("species declaration lists no names"));
                }
            }
            "const" => {
                let name = cur.identifier()?.to_string();
                cur.expect("=")?;
                let count = cur.unsigned_integer()?;
                if !cur.at_end() {
                    return Err(cur.error("trailing input after const declaration"));
                }
                declare(&mut species, Species::chemostatted(name, count))?;
            }
            "reaction" => {
                let reactants = parse_side(&mut cur)?;
                cur.expect("->")?;
                let products = parse_side(&mut cur)?;
                cur.expect(":")?;
                let rate = cur.float()?;
                if !cur.at_end() {
                    return Err(cur.error("trailing input after reaction"));
                }
                raw_reactions.push((reactants, products, rate, line_idx + 1));
            }
            "pair" => {
                let i = cur.unsigned_integer()? as usize;
                let j = cur.unsigned_integer()? as usize;
                if !cur.at_end() {
                    return Err(cur.error("trailing input after pair directive"));
                }
                pairs.push((i, j, line_idx + 1));
            }
            other => {
                return Err(NetworkError::Syntax {
                    line: line_idx + 1,
                    column: 1,
                    message: format!("unknown directive `{other}`"),
                });
            }
        }
    }

    let lookup = |name: &str| -> Result<usize, NetworkError> {
        species
            .iter()
            .position(|s| s.name == name)
            .ok_or_else(|| NetworkError::UndeclaredSpecies(name.to_string()))
    };

    let mut reactions = Vec::with_capacity(raw_reactions.len());
    for (index, (reactants, products, rate, _line)) in raw_reactions.into_iter().enumerate() {
        let resolve = |terms: Vec<(String, u32, usize)>| -> Result<Vec<(usize, u32)>, NetworkError> {
            let mut out: Vec<(usize, u32)> = Vec::new();
            for (name, coeff, _) in terms {
                let s = lookup(&name)?;
                match out.iter_mut().find(|(t, _)| *t == s) {
                    Some((_, c)) => *c += coeff,
                    None => out.push((s, coeff)),
                }
            }
            Ok(out)
        };
        let reactants = resolve(reactants)?;
        let products = resolve(products)?;
        if !(rate > 0.0) || !rate.is_finite() {
            return Err(NetworkError::NonPositiveRate { index, rate });
        }
        reactions.push(Reaction::new(reactants, products, rate));
    }

    let pairing = if pairs.is_empty() {
        None
    } else {
        let mut map = vec![usize::MAX; reactions.len()];
        for (i, j, line) in pairs {
            if i >= reactions.len() || j >= reactions.len() {
                return Err(NetworkError::Syntax {
                    line,
                    column: 1,
                    message: format!("pair {i} {j} references an undeclared reaction"),
                });
            }
            if map[i] != usize::MAX || map[j] != usize::MAX {
                return Err(NetworkError::Syntax {
                    line,
                    column: 1,
                    message: format!("reaction {i} or {j} is paired twice"),
                });
            }
            map[i] = j;
            map[j] = i;
        }
        if let Some(unpaired) = map.iter().position(|&j| j == usize::MAX) {
            return Err(NetworkError::InvalidPairing(format!(
                "reaction {unpaired} has no pair directive"
            )));
        }
        Some(map)
    };

    ReactionNetwork::new(species, reactions, pairing)
}

impl SpeciesKind {
    pub fn fixed_count(&self) -> Option<u64> {
        match self {
            SpeciesKind::Dynamic => None,
            SpeciesKind::Chemostatted { count } => Some(*count),
        }
    }
}
