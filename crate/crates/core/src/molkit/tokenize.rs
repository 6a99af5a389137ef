//! SMILES tokenization.
//!
//! The grammar is the usual organic-subset SMILES: unbracketed atoms are
//! limited to `B C N O P S F Cl Br I`, the aromatic `b c n o p s` and the
//! wildcard `*`; everything else must be written as a bracket atom.
//! Structural validity (balanced branches, matched ring closures, no
//! dangling bonds) is checked while tokenizing, so any string that
//! tokenizes is a valid molecule for the purposes of this crate.

use super::MolkitError;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum TokenKind {
    BracketAtom,
    OrganicAtom,
    Bond,
    RingClosure,
    Branch,
    Dot,
}

/// Parsed contents of a `[...]` atom.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct BracketAtom<'a> {
    pub isotope: Option<u16>,
    pub symbol: &'a str,
    pub aromatic: bool,
    pub chirality: Option<&'a str>,
    pub hydrogens: u8,
    pub charge: i8,
    pub map_number: Option<u32>,
}

/// One lexical unit of a SMILES string.
///
/// `text` is the exact input slice, so concatenating the texts of all tokens
/// reproduces the input byte for byte (map annotations included).
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SmilesToken<'a> {
    pub kind: TokenKind,
    pub text: &'a str,
    pub map_number: Option<u32>,
    pub bracket: Option<BracketAtom<'a>>,
}

impl<'a> SmilesToken<'a> {
    fn plain(kind: TokenKind, text: &'a str) -> Self {
        Self {
            kind,
            text,
            map_number: None,
            bracket: None,
        }
    }

    pub fn is_atom(&self) -> bool {
        matches!(self.kind, TokenKind::BracketAtom | TokenKind::OrganicAtom)
    }

    /// Token text with any `:N` map annotation removed.
    pub fn text_without_map(&self) -> std::borrow::Cow<'a, str> {
        match (self.kind, self.map_number) {
            (TokenKind::BracketAtom, Some(_)) => {
                // ':' only occurs inside a bracket atom as the map separator.
                let colon = self.text.rfind(':').expect("mapped bracket atom has ':'");
                let mut out = String::with_capacity(colon + 1);
                out.push_str(&self.text[..colon]);
                out.push(']');
                out.into()
            }
            _ => self.text.into(),
        }
    }
}

const ELEMENTS: &[&str] = &[
    "H", "He", "Li", "Be", "B", "C", "N", "O", "F", "Ne", "Na", "Mg", "Al", "Si", "P", "S", "Cl",
    "Ar", "K", "Ca", "Sc", "Ti", "V", "Cr", "Mn", "Fe", "Co", "Ni", "Cu", "Zn", "Ga", "Ge", "As",
    "Se", "Br", "Kr", "Rb", "Sr", "Y", "Zr", "Nb", "Mo", "Tc", "Ru", "Rh", "Pd", "Ag", "Cd", "In",
    "Sn", "Sb", "Te", "I", "Xe", "Cs", "Ba", "La", "Ce", "Pr", "Nd", "Pm", "Sm", "Eu", "Gd", "Tb",
    "Dy", "Ho", "Er", "Tm", "Yb", "Lu", "Hf", "Ta", "W", "Re", "Os", "Ir", "Pt", "Au", "Hg", "Tl",
    "Pb", "Bi", "Po", "At", "Rn", "Fr", "Ra", "Ac", "Th", "Pa", "U", "Np", "Pu", "Am", "Cm", "Bk",
    "Cf", "Es", "Fm", "Md", "No", "Lr", "Rf", "Db", "Sg", "Bh", "Hs", "Mt", "Ds", "Rg", "Cn", "Nh",
    "Fl", "Mc", "Lv", "Ts", "Og",
];

const AROMATIC_BRACKET: &[&str] = &["se", "as", "te", "b", "c", "n", "o", "p", "s"];

fn is_element(s: &str) -> bool {
    ELEMENTS.contains(&s)
}

/// What the previous token was, for the structural checks.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum Prev {
    Start,
    Atom,
    Bond,
    Ring,
    Open,
    Close,
}

struct Lexer<'a> {
    src: &'a str,
    bytes: &'a [u8],
    pos: usize,
}

impl<'a> Lexer<'a> {
    fn err(&self, at: usize, reason: impl Into<String>) -> MolkitError {
        MolkitError::MalformedSmiles {
            smiles: self.src.to_string(),
            position: at,
            reason: reason.into(),
        }
    }

    fn peek(&self) -> Option<u8> {
        self.bytes.get(self.pos).copied()
    }

    fn digits(&mut self) -> Option<&'a str> {
        let start = self.pos;
        while matches!(self.peek(), Some(b'0'..=b'9')) {
            self.pos += 1;
        }
        (self.pos > start).then(|| &self.src[start..self.pos])
    }

    fn bracket_atom(&mut self) -> Result<SmilesToken<'a>, MolkitError> {
        let start = self.pos;
        self.pos += 1; // '['
        let close = match self.src[start..].find(']') {
            Some(off) => start + off,
            None => return Err(self.err(start, "unclosed bracket atom")),
        };
        if close == start + 1 {
            return Err(self.err(start, "empty bracket atom"));
        }
        if let Some(off) = self.src[start + 1..close].find('[') {
            return Err(self.err(start + 1 + off, "nested bracket"));
        }

        let isotope = match self.digits() {
            Some(d) => Some(
                d.parse::<u16>()
                    .map_err(|_| self.err(start + 1, "isotope out of range"))?,
            ),
            None => None,
        };

        let sym_start = self.pos;
        let rest = &self.src[self.pos..close];
        let (symbol, aromatic) = if rest.starts_with('*') {
            ("*", false)
        } else if let Some(a) = AROMATIC_BRACKET.iter().find(|a| rest.starts_with(**a)) {
            (*a, true)
        } else {
            let two = rest.get(..2).filter(|s| is_element(s));
            let one = rest.get(..1).filter(|s| is_element(s));
            match two.or(one) {
                Some(s) => (s, false),
                None => return Err(self.err(sym_start, "unknown element in bracket atom")),
            }
        };
        self.pos += symbol.len();
        let symbol = &self.src[sym_start..sym_start + symbol.len()];

        let chirality = if self.peek() == Some(b'@') {
            let c_start = self.pos;
            self.pos += 1;
            if self.peek() == Some(b'@') {
                self.pos += 1;
            } else {
                let tail = &self.src[self.pos..close];
                for class in ["TH", "AL", "SP", "TB", "OH"] {
                    if tail.starts_with(class) {
                        self.pos += 2;
                        if self.digits().is_none() {
                            return Err(self.err(self.pos, "chirality class without number"));
                        }
                        break;
                    }
                }
            }
            Some(&self.src[c_start..self.pos])
        } else {
            None
        };

        let mut hydrogens = 0u8;
        if self.peek() == Some(b'H') {
            self.pos += 1;
            hydrogens = match self.digits() {
                Some(d) => d
                    .parse()
                    .map_err(|_| self.err(self.pos, "hydrogen count out of range"))?,
                None => 1,
            };
        }

        let mut charge = 0i8;
        if let Some(sign @ (b'+' | b'-')) = self.peek() {
            let unit: i8 = if sign == b'+' { 1 } else { -1 };
            self.pos += 1;
            if let Some(d) = self.digits() {
                let mag: i8 = d
                    .parse()
                    .map_err(|_| self.err(self.pos, "charge out of range"))?;
                charge = unit * mag;
            } else {
                charge = unit;
                while self.peek() == Some(sign) {
                    self.pos += 1;
                    charge = charge.saturating_add(unit);
                }
            }
        }

        let mut map_number = None;
        if self.peek() == Some(b':') {
            self.pos += 1;
            let d = self
                .digits()
                .ok_or_else(|| self.err(self.pos, "atom map without number"))?;
            map_number = Some(
                d.parse::<u32>()
                    .map_err(|_| self.err(self.pos, "atom map out of range"))?,
            );
        }

        if self.pos != close {
            return Err(self.err(self.pos, "unexpected character in bracket atom"));
        }
        self.pos = close + 1;
        Ok(SmilesToken {
            kind: TokenKind::BracketAtom,
            text: &self.src[start..self.pos],
            map_number,
            bracket: Some(BracketAtom {
                isotope,
                symbol,
                aromatic,
                chirality,
                hydrogens,
                charge,
                map_number,
            }),
        })
    }

    fn organic_atom(&mut self) -> Option<&'a str> {
        let rest = &self.src[self.pos..];
        let len = if rest.starts_with("Cl") || rest.starts_with("Br") {
            2
        } else {
            match rest.as_bytes()[0] {
                b'B' | b'C' | b'N' | b'O' | b'P' | b'S' | b'F' | b'I' | b'b' | b'c' | b'n'
                | b'o' | b'p' | b's' | b'*' => 1,
                _ => return None,
            }
        };
        let text = &self.src[self.pos..self.pos + len];
        self.pos += len;
        Some(text)
    }
}

/// Splits a SMILES string into tokens, validating its structure.
pub fn tokenize(smiles: &str) -> Result<Vec<SmilesToken<'_>>, MolkitError> {
    let mut lx = Lexer {
        src: smiles,
        bytes: smiles.as_bytes(),
        pos: 0,
    };
    if smiles.is_empty() {
        return Err(lx.err(0, "empty string"));
    }

    let mut tokens = Vec::with_capacity(smiles.len());
    let mut prev = Prev::Start;
    let mut branch_depth = 0usize;
    // Open ring-closure labels with the position that opened them.
    let mut open_rings: Vec<(u16, usize)> = Vec::new();

    while let Some(b) = lx.peek() {
        let at = lx.pos;
        if !b.is_ascii() {
            return Err(lx.err(at, "non-ASCII character"));
        }
        match b {
            b'[' => {
                tokens.push(lx.bracket_atom()?);
                prev = Prev::Atom;
            }
            b'-' | b'=' | b'#' | b'$' | b':' | b'/' | b'\\' => {
                if !matches!(prev, Prev::Atom | Prev::Ring | Prev::Close | Prev::Open) {
                    return Err(lx.err(at, "bond without preceding atom"));
                }
                lx.pos += 1;
                tokens.push(SmilesToken::plain(TokenKind::Bond, &smiles[at..lx.pos]));
                prev = Prev::Bond;
            }
            b'0'..=b'9' | b'%' => {
                if !matches!(prev, Prev::Atom | Prev::Ring | Prev::Bond) {
                    return Err(lx.err(at, "ring closure without preceding atom"));
                }
                let label = if b == b'%' {
                    lx.pos += 1;
                    let d = &smiles[lx.pos..];
                    if d.len() < 2 || !d.as_bytes()[..2].iter().all(u8::is_ascii_digit) {
                        return Err(lx.err(at, "'%' must be followed by two digits"));
                    }
                    lx.pos += 2;
                    d[..2].parse::<u16>().unwrap()
                } else {
                    lx.pos += 1;
                    u16::from(b - b'0')
                };
                match open_rings.iter().position(|(l, _)| *l == label) {
                    Some(i) => {
                        open_rings.remove(i);
                    }
                    None => open_rings.push((label, at)),
                }
                tokens.push(SmilesToken::plain(
                    TokenKind::RingClosure,
                    &smiles[at..lx.pos],
                ));
                prev = Prev::Ring;
            }
            b'(' => {
                if !matches!(prev, Prev::Atom | Prev::Ring | Prev::Close) {
                    return Err(lx.err(at, "branch without preceding atom"));
                }
                branch_depth += 1;
                lx.pos += 1;
                tokens.push(SmilesToken::plain(TokenKind::Branch, &smiles[at..lx.pos]));
                prev = Prev::Open;
            }
            b')' => {
                if branch_depth == 0 {
                    return Err(lx.err(at, "unbalanced ')'"));
                }
                if !matches!(prev, Prev::Atom | Prev::Ring | Prev::Close) {
                    return Err(lx.err(at, "empty or dangling branch"));
                }
                branch_depth -= 1;
                lx.pos += 1;
                tokens.push(SmilesToken::plain(TokenKind::Branch, &smiles[at..lx.pos]));
                prev = Prev::Close;
            }
            b'.' => {
                if !matches!(prev, Prev::Atom | Prev::Ring | Prev::Close) {
                    return Err(lx.err(at, "empty component"));
                }
                if branch_depth != 0 {
                    return Err(lx.err(at, "'.' inside a branch"));
                }
                if let Some((_, p)) = open_rings.first() {
                    return Err(lx.err(*p, "ring closure spans components"));
                }
                lx.pos += 1;
                tokens.push(SmilesToken::plain(TokenKind::Dot, &smiles[at..lx.pos]));
                prev = Prev::Start;
            }
            _ => match lx.organic_atom() {
                Some(text) => {
                    tokens.push(SmilesToken::plain(TokenKind::OrganicAtom, text));
                    prev = Prev::Atom;
                }
                None => return Err(lx.err(at, format!("unexpected character '{}'", b as char))),
            },
        }
    }

    if branch_depth != 0 {
        return Err(lx.err(smiles.len(), "unbalanced '('"));
    }
    if let Some((_, p)) = open_rings.first() {
        return Err(lx.err(*p, "unmatched ring closure"));
    }
    if !matches!(prev, Prev::Atom | Prev::Ring | Prev::Close) {
        return Err(lx.err(smiles.len(), "dangling bond or trailing '.'"));
    }
    Ok(tokens)
}

pub fn detokenize(tokens: &[SmilesToken<'_>]) -> String {
    tokens.iter().map(|t| t.text).collect()
}
