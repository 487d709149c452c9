//! CMU Pronouncing Dictionary parsing, syllabification and stress labels.
//!
//! Both the classic `WORD  PH1 PH2` layout (uppercase, two-space separator,
//! `WORD(1)` alternates) and the newer lowercase `word ph1 ph2 # comment`
//! layout are accepted.

use std::collections::BTreeMap;
use std::fmt;
use std::fs;
use std::io::{self, BufRead};
use std::path::Path;
use std::str::FromStr;

use serde::{Deserialize, Serialize};
use thiserror::Error;

/// ARPAbet vowel symbols used by CMUdict (without stress digits).
pub const VOWELS: [&str; 15] = ["AA", "AE", "AH", "AO", "AW", "AY", "EH", "ER", "EY", "IH", "IY", "OW", "OY", "UH", "UW"];

#[derive(Debug, Error)]
pub enum LexiconError {
    #[error("dictionary contains no entries")]
    EmptyLexicon,
    #[error("pronunciation of {0:?} has no vowel")]
    NoNucleus(String),
    #[error("unknown vowel symbol {0:?}")]
    UnknownVowel(String),
    #[error("invalid stress digit {0}")]
    InvalidStressDigit(u8),
    #[error("unknown nucleus tag {0:?}")]
    UnknownTag(String),
    #[error(transparent)]
    Io(#[from] io::Error),
}

/// Three-level syllable stress label.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum StressLevel {
    NonStress = 0,
    Primary = 1,
    Secondary = 2,
}

impl StressLevel {
    /// Class order used for logits, confusion matrices and tie-breaking.
    pub const ALL: [StressLevel; 3] = [StressLevel::NonStress, StressLevel::Primary, StressLevel::Secondary];

    #[inline]
    pub fn index(self) -> usize {
        self as usize
    }

    pub fn from_index(i: usize) -> Option<Self> {
        Self::ALL.get(i).copied()
    }

    /// CMUdict digit: 0 unstressed, 1 primary, 2 secondary.
    pub fn from_digit(d: u8) -> Result<Self, LexiconError> {
        match d {
            0 => Ok(StressLevel::NonStress),
            1 => Ok(StressLevel::Primary),
            2 => Ok(StressLevel::Secondary),
            other => Err(LexiconError::InvalidStressDigit(other)),
        }
    }

    pub fn digit(self) -> u8 {
        self as u8
    }

    /// Rank in the prominence order NonStress < Secondary < Primary.
    pub fn ordinal_rank(self) -> usize {
        match self {
            StressLevel::NonStress => 0,
            StressLevel::Secondary => 1,
            StressLevel::Primary => 2,
        }
    }

    pub fn from_ordinal_rank(rank: usize) -> Option<Self> {
        match rank {
            0 => Some(StressLevel::NonStress),
            1 => Some(StressLevel::Secondary),
            2 => Some(StressLevel::Primary),
            _ => None,
        }
    }

    pub fn display_name(self) -> &'static str {
        match self {
            StressLevel::NonStress => "Non stress",
            StressLevel::Primary => "Primary stress",
            StressLevel::Secondary => "Secondary stress",
        }
    }
}

/// Vowel (nucleus) category of a syllable. `Pad` marks empty slots.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum NucleusType {
    Iy,
    Ih,
    Ey,
    Eh,
    Ae,
    Aa,
    Ao,
    Uh,
    Ow,
    Uw,
    Ah,
    Ay,
    Aw,
    Oy,
    Ax,
    Er,
    Pad,
}

impl NucleusType {
    pub const COUNT: usize = 16;

    /// The sixteen real tags, in table order.
    pub const REAL: [NucleusType; 16] = [
        NucleusType::Iy,
        NucleusType::Ih,
        NucleusType::Ey,
        NucleusType::Eh,
        NucleusType::Ae,
        NucleusType::Aa,
        NucleusType::Ao,
        NucleusType::Uh,
        NucleusType::Ow,
        NucleusType::Uw,
        NucleusType::Ah,
        NucleusType::Ay,
        NucleusType::Aw,
        NucleusType::Oy,
        NucleusType::Ax,
        NucleusType::Er,
    ];

    /// Embedding row index; `Pad` is 16.
    #[inline]
    pub fn index(self) -> usize {
        self as usize
    }

    pub fn from_index(i: usize) -> Option<Self> {
        if i == 16 {
            Some(NucleusType::Pad)
        } else {
            Self::REAL.get(i).copied()
        }
    }

    pub fn tag(self) -> &'static str {
        match self {
            NucleusType::Iy => "iy",
            NucleusType::Ih => "ih",
            NucleusType::Ey => "ey",
            NucleusType::Eh => "eh",
            NucleusType::Ae => "ae",
            NucleusType::Aa => "aa",
            NucleusType::Ao => "ao",
            NucleusType::Uh => "uh",
            NucleusType::Ow => "ow",
            NucleusType::Uw => "uw",
            NucleusType::Ah => "ah",
            NucleusType::Ay => "ay",
            NucleusType::Aw => "aw",
            NucleusType::Oy => "oy",
            NucleusType::Ax => "ax",
            NucleusType::Er => "er",
            NucleusType::Pad => "pad",
        }
    }

    pub fn is_pad(self) -> bool {
        self == NucleusType::Pad
    }
}

impl fmt::Display for NucleusType {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.tag())
    }
}

impl FromStr for NucleusType {
    type Err = LexiconError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let lower = s.to_ascii_lowercase();
        Self::REAL
            .iter()
            .chain(std::iter::once(&NucleusType::Pad))
            .copied()
            .find(|t| t.tag() == lower)
            .ok_or_else(|| LexiconError::UnknownTag(s.to_string()))
    }
}

/// Maps a CMUdict vowel and its stress digit to a nucleus type.
///
/// CMUdict has fifteen vowels; unstressed `AH` is split off as the schwa `ax`,
/// which yields sixteen nucleus types.
pub fn nucleus_type_of(vowel: &str, stress_digit: u8) -> Result<NucleusType, LexiconError> {
    if stress_digit > 2 {
        return Err(LexiconError::InvalidStressDigit(stress_digit));
    }
    let upper = vowel.to_ascii_uppercase();
    if !VOWELS.contains(&upper.as_str()) {
        return Err(LexiconError::UnknownVowel(vowel.to_string()));
    }
    if upper == "AH" {
        return Ok(if stress_digit == 0 { NucleusType::Ax } else { NucleusType::Ah });
    }
    upper.parse()
}

/// Splits `"OW2"` into `("OW", Some(2))` and `"K"` into `("K", None)`.
pub fn split_stress(phoneme: &str) -> (&str, Option<u8>) {
    match phoneme.as_bytes().last() {
        Some(b) if b.is_ascii_digit() => (&phoneme[..phoneme.len() - 1], Some(b - b'0')),
        _ => (phoneme, None),
    }
}

fn is_vowel(base: &str) -> bool {
    VOWELS.contains(&base)
}

/// One dictionary pronunciation.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct PronEntry {
    pub word: String,
    pub phonemes: Vec<String>,
    pub variant_index: usize,
}

impl PronEntry {
    /// Builds an entry, checking that vowels carry exactly one digit and consonants none.
    pub fn new(word: &str, phonemes: Vec<String>, variant_index: usize) -> Result<Self, String> {
        if phonemes.is_empty() {
            return Err("no phonemes".into());
        }
        for p in &phonemes {
            let (base, digit) = split_stress(p);
            if base.is_empty() || !base.bytes().all(|b| b.is_ascii_uppercase()) {
                return Err(format!("malformed phoneme {p:?}"));
            }
            match (is_vowel(base), digit) {
                (true, Some(d)) if d <= 2 => {}
                (true, _) => return Err(format!("vowel {p:?} without a valid stress digit")),
                (false, Some(_)) => return Err(format!("consonant {p:?} carries a stress digit")),
                (false, None) => {}
            }
        }
        Ok(Self { word: word.to_string(), phonemes, variant_index })
    }

    /// Number of stress-carrying (vowel) phonemes.
    pub fn vowel_count(&self) -> usize {
        self.phonemes.iter().filter(|p| split_stress(p).1.is_some()).count()
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Syllable {
    pub onset: Vec<String>,
    /// The vowel phoneme as written in the dictionary, e.g. `"AH0"`.
    pub nucleus_phoneme: String,
    pub nucleus: NucleusType,
    pub coda: Vec<String>,
    pub stress: StressLevel,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Syllabification {
    pub syllables: Vec<Syllable>,
}

impl Syllabification {
    pub fn len(&self) -> usize {
        self.syllables.len()
    }

    pub fn is_empty(&self) -> bool {
        self.syllables.is_empty()
    }

    pub fn stresses(&self) -> Vec<StressLevel> {
        self.syllables.iter().map(|s| s.stress).collect()
    }

    pub fn nuclei(&self) -> Vec<NucleusType> {
        self.syllables.iter().map(|s| s.nucleus).collect()
    }

    /// Concatenates onset, nucleus and coda of every syllable.
    pub fn flatten(&self) -> Vec<String> {
        let mut out = Vec::new();
        for s in &self.syllables {
            out.extend(s.onset.iter().cloned());
            out.push(s.nucleus_phoneme.clone());
            out.extend(s.coda.iter().cloned());
        }
        out
    }
}

/// Splits a pronunciation into syllables, one per vowel.
///
/// Consonants between two vowels all go to the onset of the following syllable;
/// trailing consonants form the coda of the last syllable.
pub fn syllabify(entry: &PronEntry) -> Result<Syllabification, LexiconError> {
    let mut syllables: Vec<Syllable> = Vec::new();
    let mut pending: Vec<String> = Vec::new();
    for p in &entry.phonemes {
        let (base, digit) = split_stress(p);
        match digit {
            Some(d) => {
                syllables.push(Syllable {
                    onset: std::mem::take(&mut pending),
                    nucleus_phoneme: p.clone(),
                    nucleus: nucleus_type_of(base, d)?,
                    coda: Vec::new(),
                    stress: StressLevel::from_digit(d)?,
                });
            }
            None => pending.push(p.clone()),
        }
    }
    match syllables.last_mut() {
        Some(last) => last.coda = pending,
        None => return Err(LexiconError::NoNucleus(entry.word.clone())),
    }
    Ok(Syllabification { syllables })
}

/// A line the parser could not turn into an entry.
#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct SkippedLine {
    pub line_no: usize,
    pub reason: String,
}

/// Parsed dictionary: uppercase headword to its pronunciation variants, in file order.
#[derive(Debug, Clone, Default)]
pub struct Lexicon {
    entries: BTreeMap<String, Vec<PronEntry>>,
    skipped: Vec<SkippedLine>,
}

fn split_headword(raw: &str) -> &str {
    match raw.find('(') {
        Some(i) if raw.ends_with(')') && i > 0 && raw[i + 1..raw.len() - 1].bytes().all(|b| b.is_ascii_digit()) => &raw[..i],
        _ => raw,
    }
}

/// Normalizes a query word for lookup: uppercase, surrounding punctuation removed.
pub fn normalize_word(word: &str) -> String {
    let kept: String = word.trim().chars().filter(|c| c.is_alphanumeric() || matches!(c, '\'' | '-' | '.' | '_')).collect();
    kept.trim_matches(|c| matches!(c, '-' | '.' | '_')).to_uppercase()
}

impl Lexicon {
    pub fn open(path: impl AsRef<Path>) -> Result<Self, LexiconError> {
        let file = fs::File::open(path)?;
        Self::parse(io::BufReader::new(file))
    }

    pub fn parse_str(text: &str) -> Result<Self, LexiconError> {
        Self::parse(text.as_bytes())
    }

    /// Parses a CMUdict text stream. Malformed lines are recorded in
    /// [`Lexicon::skipped`] and do not stop the parse.
    pub fn parse(reader: impl BufRead) -> Result<Self, LexiconError> {
        let mut lex = Lexicon::default();
        for (i, line) in reader.lines().enumerate() {
            let line = line?;
            let line_no = i + 1;
            let content = match line.find('#') {
                Some(pos) => &line[..pos],
                None => line.as_str(),
            };
            let trimmed = content.trim();
            if trimmed.is_empty() || trimmed.starts_with(";;;") {
                continue;
            }
            let mut tokens = trimmed.split_whitespace();
            let head = tokens.next().unwrap_or_default();
            let word = split_headword(head).to_uppercase();
            let phonemes: Vec<String> = tokens.map(|t| t.to_uppercase()).collect();
            if phonemes.is_empty() {
                lex.skipped.push(SkippedLine { line_no, reason: "no phonemes".into() });
                continue;
            }
            let variants = lex.entries.entry(word.clone()).or_default();
            match PronEntry::new(&word, phonemes, variants.len()) {
                Ok(entry) => variants.push(entry),
                Err(reason) => {
                    if variants.is_empty() {
                        lex.entries.remove(&word);
                    }
                    lex.skipped.push(SkippedLine { line_no, reason });
                }
            }
        }
        if lex.entries.is_empty() {
            return Err(LexiconError::EmptyLexicon);
        }
        Ok(lex)
    }

    /// Case-insensitive lookup with surrounding punctuation stripped.
    pub fn lookup(&self, word: &str) -> Option<&[PronEntry]> {
        self.entries.get(&normalize_word(word)).map(Vec::as_slice)
    }

    pub fn skipped(&self) -> &[SkippedLine] {
        &self.skipped
    }

    /// Number of headwords.
    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn entry_count(&self) -> usize {
        self.entries.values().map(Vec::len).sum()
    }

    /// Headwords with their variants, in sorted headword order.
    pub fn iter(&self) -> impl Iterator<Item = (&str, &[PronEntry])> {
        self.entries.iter().map(|(k, v)| (k.as_str(), v.as_slice()))
    }

    pub fn entries(&self) -> impl Iterator<Item = &PronEntry> {
        self.entries.values().flatten()
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use StressLevel::*;

    fn entry(phones: &str) -> PronEntry {
        PronEntry::new("W", phones.split_whitespace().map(String::from).collect(), 0).unwrap()
    }

    #[test]
    fn parses_classic_lines() {
        let lex = Lexicon::parse_str(";;; comment\nOVERCOME  OW2 V ER0 K AH1 M\nREAD  R IY1 D\nREAD(1)  R EH1 D\n").unwrap();
        assert_eq!(lex.len(), 2);
        let oc = &lex.lookup("overcome").unwrap()[0];
        assert_eq!(oc.phonemes.len(), 6);
        assert_eq!(oc.vowel_count(), 3);
        let read = lex.lookup("Read,").unwrap();
        assert_eq!(read.len(), 2);
        assert_eq!(read[1].variant_index, 1);
        assert_eq!(read[1].phonemes, vec!["R", "EH1", "D"]);
    }

    #[test]
    fn comment_only_stream_is_empty() {
        assert!(matches!(Lexicon::parse_str(";;; comment\n"), Err(LexiconError::EmptyLexicon)));
        assert!(matches!(Lexicon::parse_str(""), Err(LexiconError::EmptyLexicon)));
    }

    #[test]
    fn skips_malformed_lines() {
        let lex = Lexicon::parse_str("EMPTY\nBAD  K AE T\nCAT  K AE1 T\ndog d ao1 g # trailing\n").unwrap();
        assert_eq!(lex.len(), 2);
        assert_eq!(lex.skipped().len(), 2);
        assert_eq!(lex.skipped()[0].line_no, 1);
        assert_eq!(lex.lookup("DOG").unwrap()[0].phonemes, vec!["D", "AO1", "G"]);
    }

    #[test]
    fn syllabifies_examples() {
        assert_eq!(syllabify(&entry("OW2 V ER0 K AH1 M")).unwrap().stresses(), vec![Secondary, NonStress, Primary]);
        let emotion = syllabify(&entry("IH0 M OW1 SH AH0 N")).unwrap();
        assert_eq!(emotion.stresses(), vec![NonStress, Primary, NonStress]);
        assert_eq!(emotion.nuclei(), vec![NucleusType::Ih, NucleusType::Ow, NucleusType::Ax]);
        assert_eq!(emotion.syllables[2].onset, vec!["SH"]);

        let cat = syllabify(&entry("K AE1 T")).unwrap();
        assert_eq!(cat.len(), 1);
        assert_eq!(cat.syllables[0].onset, vec!["K"]);
        assert_eq!(cat.syllables[0].coda, vec!["T"]);
        assert_eq!(cat.syllables[0].stress, Primary);
    }

    #[test]
    fn no_vowel_is_an_error() {
        let e = PronEntry { word: "HMM".into(), phonemes: vec!["HH".into(), "M".into()], variant_index: 0 };
        assert!(matches!(syllabify(&e), Err(LexiconError::NoNucleus(_))));
    }

    #[test]
    fn nucleus_mapping() {
        assert_eq!(nucleus_type_of("AH", 0).unwrap(), NucleusType::Ax);
        assert_eq!(nucleus_type_of("AH", 1).unwrap(), NucleusType::Ah);
        assert_eq!(nucleus_type_of("AH", 2).unwrap(), NucleusType::Ah);
        assert_eq!(nucleus_type_of("IY", 2).unwrap(), NucleusType::Iy);
        assert!(matches!(nucleus_type_of("XX", 1), Err(LexiconError::UnknownVowel(_))));
    }

    #[test]
    fn stress_digits_are_a_bijection() {
        for d in 0..3u8 {
            assert_eq!(StressLevel::from_digit(d).unwrap().digit(), d);
        }
        assert!(StressLevel::from_digit(3).is_err());
        let ranks: Vec<usize> = StressLevel::ALL.iter().map(|s| s.ordinal_rank()).collect();
        assert_eq!(ranks, vec![0, 2, 1]);
    }

    #[test]
    fn tags_round_trip() {
        for i in 0..17 {
            let t = NucleusType::from_index(i).unwrap();
            assert_eq!(t.index(), i);
            assert_eq!(t.tag().parse::<NucleusType>().unwrap(), t);
        }
    }

    #[test]
    fn normalizes_queries() {
        assert_eq!(normalize_word(" Hello, "), "HELLO");
        assert_eq!(normalize_word("don't"), "DON'T");
        assert_eq!(normalize_word("\"end.\""), "END");
    }
}
