use std::fmt;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Letter id. Letters are `0..size`; the id `size` is the member separator.
pub type Token = u16;

pub const AMINO_ACIDS: &str = "ACDEFGHIKLMNPQRSTVWY";

/// A fixed letter set plus the separator token.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(try_from = "AlphabetRepr", into = "AlphabetRepr")]
pub struct Alphabet {
    size: usize,
    symbols: Option<Vec<char>>,
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct AlphabetRepr {
    size: usize,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    symbols: Option<String>,
}

impl TryFrom<AlphabetRepr> for Alphabet {
    type Error = Error;

    fn try_from(repr: AlphabetRepr) -> Result<Self> {
        match repr.symbols {
            Some(s) => {
                let a = Alphabet::with_symbols(&s)?;
                if a.size != repr.size {
                    return Err(Error::config(
                        "alphabet.size",
                        format!("size {} does not match {} symbols", repr.size, a.size),
                    ));
                }
                Ok(a)
            }
            None => Alphabet::new(repr.size),
        }
    }
}

impl From<Alphabet> for AlphabetRepr {
    fn from(a: Alphabet) -> Self {
        AlphabetRepr {
            size: a.size,
            symbols: a.symbols.map(|s| s.into_iter().collect()),
        }
    }
}

impl Alphabet {
    pub fn new(size: usize) -> Result<Self> {
        if size < 2 {
            return Err(Error::config("alphabet.size", "need at least 2 letters"));
        }
        if size >= Token::MAX as usize {
            return Err(Error::config("alphabet.size", "too many letters"));
        }
        Ok(Alphabet {
            size,
            symbols: None,
        })
    }

    /// Alphabet whose letters print as the given characters, in order.
    pub fn with_symbols(symbols: &str) -> Result<Self> {
        let chars: Vec<char> = symbols.chars().collect();
        let mut alphabet = Alphabet::new(chars.len())?;
        for (i, c) in chars.iter().enumerate() {
            if c.is_whitespace() || chars[..i].contains(c) {
                return Err(Error::config(
                    "alphabet.symbols",
                    format!("symbol {c:?} is whitespace or repeated"),
                ));
            }
        }
        alphabet.symbols = Some(chars);
        Ok(alphabet)
    }

    pub fn amino_acids() -> Self {
        Alphabet::with_symbols(AMINO_ACIDS).expect("static alphabet is valid")
    }

    pub fn size(&self) -> usize {
        self.size
    }

    pub fn separator(&self) -> Token {
        self.size as Token
    }

    /// Letters plus separator.
    pub fn vocab_size(&self) -> usize {
        self.size + 1
    }

    pub fn symbols(&self) -> Option<&[char]> {
        self.symbols.as_deref()
    }

    pub fn validate(&self, seq: &Sequence) -> Result<()> {
        if seq.is_empty() {
            return Err(Error::InvalidSequence("empty sequence".into()));
        }
        if let Some(pos) = seq.iter().position(|&t| t as usize >= self.size) {
            return Err(Error::InvalidSequence(format!(
                "token {} at position {pos} is outside the alphabet of size {}",
                seq[pos], self.size
            )));
        }
        Ok(())
    }

    /// Renders a sequence using symbols if declared, else space-separated ids.
    pub fn format(&self, seq: &Sequence) -> String {
        match &self.symbols {
            Some(symbols) => seq.iter().map(|&t| symbols[t as usize]).collect(),
            None => {
                let parts: Vec<String> = seq.iter().map(|t| t.to_string()).collect();
                parts.join(" ")
            }
        }
    }

    /// Parses one sequence. On failure returns the 1-based column and a message.
    pub fn parse(&self, text: &str) -> std::result::Result<Sequence, (usize, String)> {
        let trimmed = text.trim_end_matches(['\r', '\n']);
        let lead = trimmed.len() - trimmed.trim_start().len();
        let body = trimmed.trim();
        if body.is_empty() {
            return Err((1, "empty sequence".into()));
        }
        let mut tokens = Vec::new();
        if body.contains(char::is_whitespace) || self.symbols.is_none() {
            let mut offset = lead;
            for word in body.split_whitespace() {
                let start = trimmed[offset..].find(word).unwrap_or(0) + offset;
                offset = start + word.len();
                let column = trimmed[..start].chars().count() + 1;
                tokens.push(self.parse_word(word).map_err(|m| (column, m))?);
            }
        } else {
            for (i, c) in body.chars().enumerate() {
                tokens.push(self.parse_symbol(c).map_err(|m| (lead + i + 1, m))?);
            }
        }
        Ok(Sequence(tokens))
    }

    fn parse_word(&self, word: &str) -> std::result::Result<Token, String> {
        if let Ok(id) = word.parse::<usize>() {
            if id < self.size {
                return Ok(id as Token);
            }
            return Err(format!("letter id {id} out of range 0..{}", self.size));
        }
        let mut chars = word.chars();
        match (chars.next(), chars.next()) {
            (Some(c), None) if self.symbols.is_some() => self.parse_symbol(c),
            _ => Err(format!("cannot parse letter {word:?}")),
        }
    }

    fn parse_symbol(&self, c: char) -> std::result::Result<Token, String> {
        self.symbols
            .as_ref()
            .and_then(|s| s.iter().position(|&x| x == c))
            .map(|i| i as Token)
            .ok_or_else(|| format!("unknown symbol {c:?}"))
    }
}

/// A letter string. Validity against an [`Alphabet`] is checked where the
/// sequence is consumed.
#[derive(Clone, Debug, Default, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(transparent)]
pub struct Sequence(pub Vec<Token>);

impl Sequence {
    pub fn new(tokens: Vec<Token>) -> Self {
        Sequence(tokens)
    }

    pub fn tokens(&self) -> &[Token] {
        &self.0
    }

    pub fn hamming(&self, other: &Sequence) -> usize {
        let diff = self.0.iter().zip(&other.0).filter(|(a, b)| a != b).count();
        diff + self.len().abs_diff(other.len())
    }

    pub fn with_substitution(&self, pos: usize, letter: Token) -> Sequence {
        let mut s = self.clone();
        s.0[pos] = letter;
        s
    }
}

impl std::ops::Deref for Sequence {
    type Target = [Token];

    fn deref(&self) -> &[Token] {
        &self.0
    }
}

impl From<Vec<Token>> for Sequence {
    fn from(v: Vec<Token>) -> Self {
        Sequence(v)
    }
}

impl fmt::Display for Sequence {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let parts: Vec<String> = self.0.iter().map(|t| t.to_string()).collect();
        write!(f, "{}", parts.join(" "))
    }
}

/// A clonal family: the seed `X0` followed by its members.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct CloneStream {
    pub seed: Sequence,
    pub members: Vec<Sequence>,
}

impl CloneStream {
    pub fn new(seed: Sequence) -> Self {
        CloneStream {
            seed,
            members: Vec::new(),
        }
    }

    pub fn with_members(mut self, members: Vec<Sequence>) -> Self {
        self.members = members;
        self
    }

    pub fn num_members(&self) -> usize {
        self.members.len()
    }

    /// Seed, then all members, each followed by the separator.
    pub fn sequences(&self) -> impl Iterator<Item = &Sequence> {
        std::iter::once(&self.seed).chain(&self.members)
    }

    pub fn encode(&self, alphabet: &Alphabet) -> Vec<Token> {
        let sep = alphabet.separator();
        let mut out = Vec::new();
        for s in self.sequences() {
            out.extend_from_slice(s);
            out.push(sep);
        }
        out
    }

    pub fn decode(tokens: &[Token], alphabet: &Alphabet) -> Result<Self> {
        let sep = alphabet.separator();
        if tokens.last() != Some(&sep) {
            return Err(Error::MalformedInput(
                "clone stream must end with a separator".into(),
            ));
        }
        let mut seqs = Vec::new();
        for chunk in tokens[..tokens.len() - 1].split(|&t| t == sep) {
            let seq = Sequence(chunk.to_vec());
            alphabet
                .validate(&seq)
                .map_err(|e| Error::MalformedInput(e.to_string()))?;
            seqs.push(seq);
        }
        let mut it = seqs.into_iter();
        let seed = it.next().expect("split yields at least one chunk");
        Ok(CloneStream {
            seed,
            members: it.collect(),
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn separator_is_size() {
        let a = Alphabet::new(4).unwrap();
        assert_eq!(a.separator(), 4);
        assert_eq!(a.vocab_size(), 5);
        assert!(Alphabet::new(1).is_err());
    }

    #[test]
    fn parse_ids_and_symbols() {
        let a = Alphabet::new(4).unwrap();
        assert_eq!(a.parse("0 3 2").unwrap().tokens(), &[0, 3, 2]);
        let (col, _) = a.parse("0 1 9").unwrap_err();
        assert_eq!(col, 5);

        let dna = Alphabet::with_symbols("ACGT").unwrap();
        assert_eq!(
            dna.parse("GATTACA").unwrap().tokens(),
            &[2, 0, 3, 3, 0, 1, 0]
        );
        assert_eq!(dna.parse("G A 3").unwrap().tokens(), &[2, 0, 3]);
        let (col, msg) = dna.parse("GAXT").unwrap_err();
        assert_eq!(col, 3);
        assert!(msg.contains('X'));
        assert_eq!(dna.format(&Sequence::new(vec![3, 2, 1])), "TGC");
    }

    #[test]
    fn duplicate_symbols_rejected() {
        assert!(Alphabet::with_symbols("ACCA").is_err());
    }

    #[test]
    fn decode_rejects_bad_streams() {
        let a = Alphabet::new(3).unwrap();
        assert!(CloneStream::decode(&[0, 1], &a).is_err());
        assert!(CloneStream::decode(&[0, 3, 3], &a).is_err());
        let s = CloneStream::decode(&[0, 1, 3, 2, 3], &a).unwrap();
        assert_eq!(s.seed.tokens(), &[0, 1]);
        assert_eq!(s.members, vec![Sequence::new(vec![2])]);
    }

    #[test]
    fn seed_only_stream() {
        let a = Alphabet::new(3).unwrap();
        let s = CloneStream::new(Sequence::new(vec![1, 2]));
        assert_eq!(s.encode(&a), vec![1, 2, 3]);
        assert_eq!(CloneStream::decode(&s.encode(&a), &a).unwrap(), s);
    }

    fn arb_stream() -> impl Strategy<Value = CloneStream> {
        let seq = prop::collection::vec(0u16..5, 1..8).prop_map(Sequence::new);
        (seq.clone(), prop::collection::vec(seq, 0..5))
            .prop_map(|(seed, members)| CloneStream { seed, members })
    }

    proptest! {
        #[test]
        fn encoding_round_trips(stream in arb_stream()) {
            let a = Alphabet::new(5).unwrap();
            let flat = stream.encode(&a);
            let back = CloneStream::decode(&flat, &a).unwrap();
            prop_assert_eq!(back.encode(&a), flat);
            prop_assert_eq!(back, stream);
        }

        #[test]
        fn format_parse_round_trips(tokens in prop::collection::vec(0u16..4, 1..20)) {
            let seq = Sequence::new(tokens);
            for a in [Alphabet::new(4).unwrap(), Alphabet::with_symbols("ACGT").unwrap()] {
                prop_assert_eq!(a.parse(&a.format(&seq)).unwrap(), seq.clone());
            }
        }
    }
}
