//! Words over the alphabet `{1, …, d}`.
//!
//! Letters are stored 1-based, exactly as they are written and serialized.
//! Words of a fixed length are ordered lexicographically; [`Word::rank`] is
//! the position of a word in that order and doubles as the offset of its
//! coefficient inside a dense tensor level.

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(try_from = "Vec<usize>", into = "Vec<usize>")]
pub struct Word(Vec<usize>);

impl Word {
    /// A word from 1-based letters. Letter `0` is rejected.
    pub fn new(letters: Vec<usize>) -> Result<Self> {
        if let Some(pos) = letters.iter().position(|&l| l == 0) {
            return Err(Error::arg(format!("letter at position {pos} is 0; letters are 1-based")));
        }
        Ok(Word(letters))
    }

    pub fn empty() -> Self {
        Word(Vec::new())
    }

    pub fn letters(&self) -> &[usize] {
        &self.0
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    /// Largest letter, 0 for the empty word.
    pub fn max_letter(&self) -> usize {
        self.0.iter().copied().max().unwrap_or(0)
    }

    pub fn check_alphabet(&self, d: usize) -> Result<()> {
        match self.0.iter().find(|&&l| l > d) {
            Some(l) => Err(Error::Index(format!("letter {l} outside alphabet 1..={d}"))),
            None => Ok(()),
        }
    }

    pub fn reversed(&self) -> Word {
        Word(self.0.iter().rev().copied().collect())
    }

    pub fn concat(&self, other: &Word) -> Word {
        let mut v = self.0.clone();
        v.extend_from_slice(&other.0);
        Word(v)
    }

    /// Lexicographic rank among the `d^len` words of the same length.
    pub fn rank(&self, d: usize) -> Result<usize> {
        self.check_alphabet(d)?;
        Ok(self.0.iter().fold(0, |acc, &l| acc * d + (l - 1)))
    }

    /// Inverse of [`Word::rank`].
    pub fn from_rank(mut rank: usize, len: usize, d: usize) -> Result<Word> {
        if d == 0 {
            return Err(Error::arg("alphabet size must be at least 1"));
        }
        let count = d
            .checked_pow(len as u32)
            .ok_or_else(|| Error::Budget(format!("{d}^{len} words overflow usize")))?;
        if rank >= count {
            return Err(Error::Index(format!("rank {rank} >= {count} words of length {len}")));
        }
        let mut letters = vec![0; len];
        for slot in letters.iter_mut().rev() {
            *slot = rank % d + 1;
            rank /= d;
        }
        Ok(Word(letters))
    }

    /// All words of length `len` over `{1..d}` in lexicographic order.
    pub fn all(d: usize, len: usize) -> impl Iterator<Item = Word> {
        let count = if d == 0 { 0 } else { d.pow(len as u32) };
        (0..count).map(move |r| Word::from_rank(r, len, d).expect("rank in range"))
    }
}

/// Multiset of all interleavings of `u` and `v` that preserve the internal
/// order of both; `C(|u|+|v|, |u|)` entries, duplicates kept.
pub fn shuffle(u: &Word, v: &Word) -> Vec<Word> {
    fn go(u: &[usize], v: &[usize], prefix: &mut Vec<usize>, out: &mut Vec<Word>) {
        if u.is_empty() || v.is_empty() {
            let mut w = prefix.clone();
            w.extend_from_slice(u);
            w.extend_from_slice(v);
            out.push(Word(w));
            return;
        }
        prefix.push(u[0]);
        go(&u[1..], v, prefix, out);
        prefix.pop();
        prefix.push(v[0]);
        go(u, &v[1..], prefix, out);
        prefix.pop();
    }
    let mut out = Vec::new();
    go(&u.0, &v.0, &mut Vec::new(), &mut out);
    out
}

impl TryFrom<Vec<usize>> for Word {
    type Error = Error;

    fn try_from(v: Vec<usize>) -> Result<Self> {
        Word::new(v)
    }
}

impl From<Word> for Vec<usize> {
    fn from(w: Word) -> Self {
        w.0
    }
}

impl fmt::Display for Word {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.0.is_empty() {
            return write!(f, "()");
        }
        let parts: Vec<String> = self.0.iter().map(|l| l.to_string()).collect();
        write!(f, "{}", parts.join(","))
    }
}

/// Parses `1,2,1` (whitespace tolerated); `()` or an empty string is the empty word.
impl FromStr for Word {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let s = s.trim();
        if s.is_empty() || s == "()" {
            return Ok(Word::empty());
        }
        let letters = s
            .split(',')
            .map(|p| {
                p.trim()
                    .parse::<usize>()
                    .map_err(|e| Error::arg(format!("bad letter {p:?}: {e}")))
            })
            .collect::<Result<Vec<_>>>()?;
        Word::new(letters)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn w(l: &[usize]) -> Word {
        Word::new(l.to_vec()).unwrap()
    }

    #[test]
    fn rank_round_trip_and_order() {
        let words: Vec<Word> = Word::all(3, 3).collect();
        assert_eq!(words.len(), 27);
        assert_eq!(words[0], w(&[1, 1, 1]));
        assert_eq!(words[1], w(&[1, 1, 2]));
        assert_eq!(words[26], w(&[3, 3, 3]));
        for (i, word) in words.iter().enumerate() {
            assert_eq!(word.rank(3).unwrap(), i);
        }
        let mut sorted = words.clone();
        sorted.sort();
        assert_eq!(sorted, words);
    }

    #[test]
    fn empty_word_has_rank_zero() {
        assert_eq!(Word::empty().rank(2).unwrap(), 0);
        assert_eq!(Word::all(2, 0).count(), 1);
    }

    #[test]
    fn rejects_zero_letter_and_out_of_alphabet() {
        assert!(Word::new(vec![1, 0]).is_err());
        assert!(matches!(w(&[1, 4]).rank(3), Err(Error::Index(_))));
    }

    #[test]
    fn shuffle_examples() {
        let s = shuffle(&w(&[1]), &w(&[2]));
        assert_eq!(s, vec![w(&[1, 2]), w(&[2, 1])]);

        assert_eq!(shuffle(&Word::empty(), &w(&[2, 1])), vec![w(&[2, 1])]);

        let mut s = shuffle(&w(&[1]), &w(&[1, 2]));
        s.sort();
        assert_eq!(s, vec![w(&[1, 1, 2]), w(&[1, 1, 2]), w(&[1, 2, 1])]);
    }

    #[test]
    fn parse_and_display() {
        let word: Word = "1, 2,1".parse().unwrap();
        assert_eq!(word, w(&[1, 2, 1]));
        assert_eq!(word.to_string(), "1,2,1");
        assert_eq!("()".parse::<Word>().unwrap(), Word::empty());
        assert!("1,x".parse::<Word>().is_err());
    }
}
