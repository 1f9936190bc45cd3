//! Alphabets, sequences, corpora and their text formats.
//!
//! Letters are stored as alphabet indices (`u8`), so every downstream kernel
//! works the same for the 3-letter toy alphabet and the 20 amino acids.

use std::collections::HashMap;
use std::fmt::Write as _;
use std::path::Path;

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub const AMINO_ACIDS: &str = "ACDEFGHIKLMNPQRSTVWY";
pub const TOY_SYMBOLS: &str = "ABC";

/// Index of `A` in the toy alphabet.
pub const TOY_A: u8 = 0;
/// Index of `B` in the toy alphabet.
pub const TOY_B: u8 = 1;
/// Index of `C` in the toy alphabet.
pub const TOY_C: u8 = 2;

/// Ordered set of distinct printable symbols with a stable index mapping.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(try_from = "String", into = "String")]
pub struct Alphabet {
    symbols: Vec<char>,
    #[serde(skip)]
    index: HashMap<char, u8>,
}

impl Alphabet {
    pub fn new(symbols: &str) -> Result<Self> {
        let symbols: Vec<char> = symbols.chars().collect();
        if symbols.is_empty() {
            return Err(Error::Alphabet("alphabet is empty".into()));
        }
        if symbols.len() > u8::MAX as usize {
            return Err(Error::Alphabet(format!(
                "at most {} symbols supported, got {}",
                u8::MAX,
                symbols.len()
            )));
        }
        let mut index = HashMap::with_capacity(symbols.len());
        for (i, &c) in symbols.iter().enumerate() {
            if c.is_whitespace() || c.is_control() || c == '>' {
                return Err(Error::Alphabet(format!("symbol {c:?} is not printable")));
            }
            if index.insert(c, i as u8).is_some() {
                return Err(Error::Alphabet(format!("duplicate symbol {c}")));
            }
        }
        Ok(Alphabet { symbols, index })
    }

    pub fn amino_acids() -> Self {
        Alphabet::new(AMINO_ACIDS).expect("static alphabet")
    }

    pub fn toy() -> Self {
        Alphabet::new(TOY_SYMBOLS).expect("static alphabet")
    }

    /// Number of symbols, K.
    pub fn size(&self) -> usize {
        self.symbols.len()
    }

    pub fn symbols(&self) -> &[char] {
        &self.symbols
    }

    pub fn index_of(&self, symbol: char) -> Option<u8> {
        self.index.get(&symbol).copied()
    }

    pub fn symbol(&self, index: u8) -> char {
        self.symbols[index as usize]
    }

    /// Encode a string, reporting the first unknown symbol with a 1-based position.
    pub fn encode_record(&self, text: &str, record: &str) -> Result<Sequence> {
        let letters = text
            .chars()
            .enumerate()
            .map(|(i, c)| {
                self.index_of(c).ok_or_else(|| Error::UnknownSymbol {
                    symbol: c,
                    record: record.to_string(),
                    position: i + 1,
                })
            })
            .collect::<Result<Vec<u8>>>()?;
        Ok(Sequence {
            letters,
            id: if record.is_empty() {
                None
            } else {
                Some(record.to_string())
            },
        })
    }

    pub fn encode(&self, text: &str) -> Result<Sequence> {
        self.encode_record(text, "")
    }

    pub fn decode(&self, seq: &Sequence) -> String {
        seq.letters.iter().map(|&l| self.symbol(l)).collect()
    }

    pub fn as_string(&self) -> String {
        self.symbols.iter().collect()
    }
}

impl TryFrom<String> for Alphabet {
    type Error = Error;

    fn try_from(value: String) -> Result<Self> {
        Alphabet::new(&value)
    }
}

impl From<Alphabet> for String {
    fn from(value: Alphabet) -> Self {
        value.as_string()
    }
}

/// A string of alphabet indices with an optional identifier.
#[derive(Debug, Clone, PartialEq, Eq, Hash, Default)]
pub struct Sequence {
    letters: Vec<u8>,
    id: Option<String>,
}

impl Sequence {
    /// Build from raw indices. The caller is responsible for `letters[i] < K`;
    /// use [`Sequence::checked`] when the alphabet size is known.
    pub fn from_letters(letters: Vec<u8>) -> Self {
        Sequence { letters, id: None }
    }

    pub fn checked(letters: Vec<u8>, alphabet_size: usize) -> Result<Self> {
        if let Some(&bad) = letters.iter().find(|&&l| l as usize >= alphabet_size) {
            return Err(Error::Domain(format!(
                "letter index {bad} out of range for alphabet of size {alphabet_size}"
            )));
        }
        Ok(Sequence::from_letters(letters))
    }

    pub fn with_id(mut self, id: impl Into<String>) -> Self {
        self.id = Some(id.into());
        self
    }

    pub fn letters(&self) -> &[u8] {
        &self.letters
    }

    pub fn into_letters(self) -> Vec<u8> {
        self.letters
    }

    pub fn id(&self) -> Option<&str> {
        self.id.as_deref()
    }

    pub fn len(&self) -> usize {
        self.letters.len()
    }

    pub fn is_empty(&self) -> bool {
        self.letters.is_empty()
    }

    /// Copy of the sequence with position `pos` removed.
    pub fn delete(&self, pos: usize) -> Sequence {
        let mut letters = Vec::with_capacity(self.letters.len().saturating_sub(1));
        letters.extend_from_slice(&self.letters[..pos]);
        letters.extend_from_slice(&self.letters[pos + 1..]);
        Sequence {
            letters,
            id: self.id.clone(),
        }
    }

    /// Per-letter counts for an alphabet of size `k`.
    pub fn letter_counts(&self, k: usize) -> Vec<usize> {
        let mut counts = vec![0; k];
        for &l in &self.letters {
            counts[l as usize] += 1;
        }
        counts
    }

    /// Whether `self` occurs in `other` as an ordered (not necessarily contiguous) subsequence.
    pub fn is_subsequence_of(&self, other: &Sequence) -> bool {
        let mut it = other.letters.iter();
        self.letters.iter().all(|l| it.any(|o| o == l))
    }
}

impl From<Vec<u8>> for Sequence {
    fn from(letters: Vec<u8>) -> Self {
        Sequence::from_letters(letters)
    }
}

/// Sequences sharing one alphabet.
#[derive(Debug, Clone)]
pub struct Corpus {
    pub alphabet: Alphabet,
    pub sequences: Vec<Sequence>,
    pub source: String,
}

impl Corpus {
    pub fn new(alphabet: Alphabet, sequences: Vec<Sequence>, source: impl Into<String>) -> Self {
        Corpus {
            alphabet,
            sequences,
            source: source.into(),
        }
    }

    pub fn len(&self) -> usize {
        self.sequences.len()
    }

    pub fn is_empty(&self) -> bool {
        self.sequences.is_empty()
    }

    pub fn total_letters(&self) -> usize {
        self.sequences.iter().map(Sequence::len).sum()
    }
}

pub fn parse_fasta_str(text: &str, alphabet: &Alphabet, source: &str) -> Result<Corpus> {
    let mut records: Vec<(String, String)> = Vec::new();
    for (lineno, raw) in text.lines().enumerate() {
        let line = raw.trim_end_matches('\r');
        if let Some(header) = line.strip_prefix('>') {
            records.push((header.trim().to_string(), String::new()));
        } else if line.trim().is_empty() {
            continue;
        } else {
            match records.last_mut() {
                Some((_, body)) => body.push_str(line.trim()),
                None => {
                    return Err(Error::Parse(format!(
                        "{source}: line {} has sequence data before any '>' header",
                        lineno + 1
                    )))
                }
            }
        }
    }
    if records.is_empty() {
        return Err(Error::Parse(format!("{source}: no FASTA records")));
    }
    let sequences = records
        .iter()
        .map(|(id, body)| {
            let mut seq = alphabet.encode_record(body, id)?;
            seq.id = Some(id.clone());
            Ok(seq)
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(Corpus::new(alphabet.clone(), sequences, source))
}

pub fn parse_fasta(path: impl AsRef<Path>, alphabet: &Alphabet) -> Result<Corpus> {
    let path = path.as_ref();
    let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    parse_fasta_str(&text, alphabet, &path.display().to_string())
}

/// FASTA text; records without an identifier are named `seq<n>` (1-based).
pub fn format_fasta(corpus: &Corpus, line_width: usize) -> String {
    let width = line_width.max(1);
    let mut out = String::new();
    for (i, seq) in corpus.sequences.iter().enumerate() {
        match seq.id() {
            Some(id) => writeln!(out, ">{id}").unwrap(),
            None => writeln!(out, ">seq{}", i + 1).unwrap(),
        }
        let text: Vec<char> = seq
            .letters()
            .iter()
            .map(|&l| corpus.alphabet.symbol(l))
            .collect();
        if text.is_empty() {
            out.push('\n');
        }
        for chunk in text.chunks(width) {
            out.extend(chunk.iter());
            out.push('\n');
        }
    }
    out
}

pub fn write_fasta(path: impl AsRef<Path>, corpus: &Corpus, line_width: usize) -> Result<()> {
    let path = path.as_ref();
    std::fs::write(path, format_fasta(corpus, line_width)).map_err(|e| Error::io(path, e))
}

/// One sequence per line; blank lines are skipped.
pub fn parse_plain_str(text: &str, alphabet: &Alphabet, source: &str) -> Result<Corpus> {
    let sequences = text
        .lines()
        .map(|l| l.trim())
        .filter(|l| !l.is_empty())
        .enumerate()
        .map(|(i, l)| {
            let name = format!("line{}", i + 1);
            let seq = alphabet.encode_record(l, &name)?;
            Ok(Sequence::from_letters(seq.into_letters()))
        })
        .collect::<Result<Vec<_>>>()?;
    if sequences.is_empty() {
        return Err(Error::Parse(format!("{source}: no sequences")));
    }
    Ok(Corpus::new(alphabet.clone(), sequences, source))
}

pub fn format_plain(corpus: &Corpus) -> String {
    let mut out = String::new();
    for seq in &corpus.sequences {
        out.push_str(&corpus.alphabet.decode(seq));
        out.push('\n');
    }
    out
}

/// Reads FASTA when the first non-blank character is `>`, plain text otherwise.
pub fn read_corpus(path: impl AsRef<Path>, alphabet: &Alphabet) -> Result<Corpus> {
    let path = path.as_ref();
    let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    let source = path.display().to_string();
    if text.trim_start().starts_with('>') {
        parse_fasta_str(&text, alphabet, &source)
    } else if text.trim().is_empty() {
        Err(Error::Parse(format!("{source}: empty file")))
    } else {
        parse_plain_str(&text, alphabet, &source)
    }
}

/// Alternating A/B sequences over the toy alphabet, lengths uniform on `1..=max_len`.
pub fn toy_corpus<R: Rng + ?Sized>(n: usize, max_len: usize, rng: &mut R) -> Result<Corpus> {
    if max_len == 0 {
        return Err(Error::Domain("max_len must be at least 1".into()));
    }
    let sequences = (0..n)
        .map(|i| {
            let len = rng.random_range(1..=max_len);
            let start = if rng.random::<bool>() { TOY_A } else { TOY_B };
            let letters = (0..len).map(|j| start ^ (j as u8 & 1)).collect();
            Sequence::from_letters(letters).with_id(format!("toy{}", i + 1))
        })
        .collect();
    Ok(Corpus::new(Alphabet::toy(), sequences, "toy"))
}

/// Nonempty, no `C`, and no two adjacent letters equal (toy alphabet indices).
pub fn is_alternating(x: &Sequence) -> bool {
    let l = x.letters();
    !l.is_empty()
        && l.iter().all(|&c| c == TOY_A || c == TOY_B)
        && l.windows(2).all(|w| w[0] != w[1])
}
