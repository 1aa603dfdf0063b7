//! Text ingestion: tokenization, vocabularies and fixed-length windows.
//!
//! Input is UTF-8 for the `chars` and `words` schemes; `bytes` takes raw
//! bytes. Characters are Unicode scalar values.

use std::collections::HashMap;

use crate::error::{arg_err, Error, Result};
use crate::model::{SampleMultiset, SymbolSet};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum Scheme {
    Bytes,
    Chars,
    Words,
}

impl Scheme {
    pub fn name(self) -> &'static str {
        match self {
            Scheme::Bytes => "bytes",
            Scheme::Chars => "chars",
            Scheme::Words => "words",
        }
    }

    pub fn parse(s: &str) -> Result<Self> {
        match s {
            "bytes" => Ok(Scheme::Bytes),
            "chars" => Ok(Scheme::Chars),
            "words" | "whitespace-words" => Ok(Scheme::Words),
            other => arg_err(format!("unknown tokenization scheme {other:?} (expected bytes, chars or words)")),
        }
    }
}

/// Split `text` into raw tokens.
pub fn split_tokens(text: &[u8], scheme: Scheme) -> Result<Vec<&[u8]>> {
    match scheme {
        Scheme::Bytes => Ok(text.chunks(1).collect()),
        Scheme::Chars => {
            let s = utf8(text)?;
            Ok(s.char_indices().map(|(i, c)| &text[i..i + c.len_utf8()]).collect())
        }
        Scheme::Words => Ok(utf8(text)?.split_whitespace().map(str::as_bytes).collect()),
    }
}

fn utf8(text: &[u8]) -> Result<&str> {
    std::str::from_utf8(text).map_err(|e| Error::Argument(format!("input is not valid UTF-8: {e}")))
}

/// Symbols by descending frequency, ties broken by byte order. With more
/// than `max_size` distinct tokens, the most frequent `max_size` are kept
/// and an out-of-vocabulary symbol is appended.
///
/// Empty input is an error except for `bytes`, which then yields all 256
/// byte values.
pub fn build_vocab(text: &[u8], scheme: Scheme, max_size: usize) -> Result<SymbolSet> {
    if max_size == 0 {
        return arg_err("vocabulary size must be positive");
    }
    let tokens = split_tokens(text, scheme)?;
    if tokens.is_empty() {
        if scheme == Scheme::Bytes {
            return SymbolSet::new((0..=255u8).take(max_size).map(|b| vec![b]).collect(), None);
        }
        return arg_err(format!("no {} in the input to build a vocabulary from", scheme.name()));
    }
    let mut counts: HashMap<&[u8], u64> = HashMap::new();
    for t in tokens {
        *counts.entry(t).or_insert(0) += 1;
    }
    let mut ranked: Vec<(&[u8], u64)> = counts.into_iter().collect();
    ranked.sort_by(|a, b| b.1.cmp(&a.1).then_with(|| a.0.cmp(b.0)));
    let truncated = ranked.len() > max_size;
    let mut symbols: Vec<Vec<u8>> = ranked.into_iter().take(max_size).map(|(t, _)| t.to_vec()).collect();
    let oov = truncated.then(|| {
        symbols.push(Vec::new());
        symbols.len() - 1
    });
    SymbolSet::new(symbols, oov)
}

/// Symbol indices of `text`; unknown tokens map to the out-of-vocabulary
/// symbol, or are an error when there is none.
pub fn tokenize(text: &[u8], scheme: Scheme, symbols: &SymbolSet) -> Result<Vec<usize>> {
    let index: HashMap<&[u8], usize> = symbols
        .tokens()
        .iter()
        .enumerate()
        .filter(|(k, _)| Some(*k) != symbols.oov())
        .map(|(k, t)| (t.as_slice(), k))
        .collect();
    split_tokens(text, scheme)?
        .into_iter()
        .map(|t| {
            index.get(t).copied().or(symbols.oov()).ok_or_else(|| {
                Error::Argument(format!("token {:?} is not in the vocabulary", String::from_utf8_lossy(t)))
            })
        })
        .collect()
}

/// Text of a token sequence: bytes and characters concatenate, words are
/// joined by single spaces. The out-of-vocabulary symbol renders as U+FFFD.
pub fn detokenize(indices: &[usize], scheme: Scheme, symbols: &SymbolSet) -> Result<Vec<u8>> {
    let mut out = Vec::new();
    for (k, &i) in indices.iter().enumerate() {
        if i >= symbols.len() {
            return arg_err(format!("symbol {i} outside vocabulary of size {}", symbols.len()));
        }
        if scheme == Scheme::Words && k > 0 {
            out.push(b' ');
        }
        if Some(i) == symbols.oov() {
            out.extend_from_slice("\u{FFFD}".as_bytes());
        } else {
            out.extend_from_slice(symbols.token(i));
        }
    }
    Ok(out)
}

/// Length-`n` windows starting at multiples of `stride`; a short tail is
/// dropped.
pub fn windows(tokens: &[usize], n: usize, stride: usize) -> Result<SampleMultiset> {
    if n == 0 || stride == 0 {
        return arg_err(format!("window length {n} and stride {stride} must be positive"));
    }
    if tokens.len() < n {
        return Err(Error::EmptyMultiset(format!("{} tokens cannot fill a window of length {n}", tokens.len())));
    }
    let mut s = SampleMultiset::new(n)?;
    for start in (0..=tokens.len() - n).step_by(stride) {
        s.add(tokens[start..start + n].to_vec(), 1)?;
    }
    Ok(s)
}

/// Number of windows [`windows`] produces.
pub fn window_count(len: usize, n: usize, stride: usize) -> usize {
    if len < n || n == 0 || stride == 0 {
        0
    } else {
        (len - n) / stride + 1
    }
}

const OOV_LINE: &str = "\\u";

/// One escaped token per line, LF endings; line `k` is symbol `k`.
/// Backslash, newline, carriage return and tab are escaped as `\\`, `\n`,
/// `\r`, `\t`; bytes outside valid UTF-8 as `\xHH`; the out-of-vocabulary
/// symbol is the line `\u`.
pub fn write_vocab(symbols: &SymbolSet) -> String {
    let mut out = String::new();
    for (k, t) in symbols.tokens().iter().enumerate() {
        if Some(k) == symbols.oov() {
            out.push_str(OOV_LINE);
        } else {
            out.push_str(&escape_token(t));
        }
        out.push('\n');
    }
    out
}

/// Single-line form of a token, as used in vocabulary files.
pub fn escape_token(token: &[u8]) -> String {
    let mut out = String::with_capacity(token.len());
    let mut rest = token;
    while !rest.is_empty() {
        let (valid, bad) = match std::str::from_utf8(rest) {
            Ok(s) => (s, 0),
            Err(e) => {
                let s = std::str::from_utf8(&rest[..e.valid_up_to()]).expect("valid prefix");
                (s, e.error_len().unwrap_or(rest.len() - e.valid_up_to()))
            }
        };
        for c in valid.chars() {
            match c {
                '\\' => out.push_str("\\\\"),
                '\n' => out.push_str("\\n"),
                '\r' => out.push_str("\\r"),
                '\t' => out.push_str("\\t"),
                c => out.push(c),
            }
        }
        let after = valid.len();
        for b in &rest[after..after + bad] {
            out.push_str(&format!("\\x{b:02x}"));
        }
        rest = &rest[after + bad..];
    }
    out
}

pub fn read_vocab(text: &str) -> Result<SymbolSet> {
    let body = text.strip_suffix('\n').unwrap_or(text);
    if body.is_empty() {
        return arg_err("vocabulary file is empty");
    }
    let mut tokens = Vec::new();
    let mut oov = None;
    for (k, line) in body.split('\n').enumerate() {
        if line == OOV_LINE {
            if oov.is_some() {
                return arg_err(format!("second out-of-vocabulary line at line {}", k + 1));
            }
            oov = Some(k);
            tokens.push(Vec::new());
        } else {
            tokens.push(unescape_token(line).map_err(|e| Error::Argument(format!("line {}: {e}", k + 1)))?);
        }
    }
    SymbolSet::new(tokens, oov)
}

/// Inverse of [`escape_token`].
pub fn unescape_token(line: &str) -> std::result::Result<Vec<u8>, String> {
    let bytes = line.as_bytes();
    let mut out = Vec::with_capacity(bytes.len());
    let mut k = 0;
    while k < bytes.len() {
        if bytes[k] != b'\\' {
            out.push(bytes[k]);
            k += 1;
            continue;
        }
        match bytes.get(k + 1) {
            Some(b'\\') => out.push(b'\\'),
            Some(b'n') => out.push(b'\n'),
            Some(b'r') => out.push(b'\r'),
            Some(b't') => out.push(b'\t'),
            Some(b'x') => {
                let hex = line.get(k + 2..k + 4).ok_or("truncated \\x escape")?;
                out.push(u8::from_str_radix(hex, 16).map_err(|_| format!("bad \\x escape {hex:?}"))?);
                k += 2;
            }
            other => return Err(format!("unknown escape {:?}", other.map(|&b| b as char))),
        }
        k += 2;
    }
    if out.is_empty() {
        return Err("empty token".into());
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha20Rng;

    fn set(v: &SymbolSet) -> Vec<String> {
        v.tokens().iter().map(|t| String::from_utf8_lossy(t).into_owned()).collect()
    }

    #[test]
    fn vocab_examples() {
        let v = build_vocab(b"abca\xff", Scheme::Bytes, 256).unwrap();
        assert_eq!(v.tokens(), &[b"a".to_vec(), b"b".to_vec(), b"c".to_vec(), vec![0xff]]);
        assert_eq!(v.oov(), None);

        let v = build_vocab(b"a b a", Scheme::Words, 10).unwrap();
        assert_eq!(set(&v), vec!["a", "b"]);

        assert!(build_vocab(b"", Scheme::Chars, 10).is_err());
        assert!(build_vocab(b"  \n", Scheme::Words, 10).is_err());
        assert_eq!(build_vocab(b"", Scheme::Bytes, 300).unwrap().len(), 256);
        assert!(build_vocab(b"\xff", Scheme::Chars, 10).is_err());
    }

    #[test]
    fn zipf_vocab_is_truncated_with_oov() {
        let mut rng = ChaCha20Rng::seed_from_u64(1);
        let weights: Vec<f64> = (1..=400).map(|r| 1.0 / r as f64).collect();
        let total: f64 = weights.iter().sum();
        let mut text = String::new();
        for _ in 0..50_000 {
            let mut u = rng.random::<f64>() * total;
            let mut k = 0;
            while k + 1 < weights.len() && u >= weights[k] {
                u -= weights[k];
                k += 1;
            }
            text.push_str(&format!("w{k} "));
        }
        let v = build_vocab(text.as_bytes(), Scheme::Words, 100).unwrap();
        assert_eq!(v.len(), 101);
        assert_eq!(v.oov(), Some(100));
        let counts: HashMap<&str, usize> = text.split_whitespace().fold(HashMap::new(), |mut m, w| {
            *m.entry(w).or_default() += 1;
            m
        });
        let freq: Vec<usize> = v.tokens()[..100].iter().map(|t| counts[std::str::from_utf8(t).unwrap()]).collect();
        assert!(freq.windows(2).all(|w| w[0] >= w[1]));
    }

    #[test]
    fn ties_break_lexicographically() {
        let v = build_vocab("cba".as_bytes(), Scheme::Chars, 10).unwrap();
        assert_eq!(set(&v), vec!["a", "b", "c"]);
    }

    #[test]
    fn window_examples() {
        let s = windows(&[0, 1, 0, 1], 2, 2).unwrap();
        assert_eq!(s.distinct(), 1);
        assert_eq!(s.multiplicity(&[0, 1]), 2);

        let s = windows(&[0, 1, 0], 2, 1).unwrap();
        assert_eq!(s.multiplicity(&[0, 1]), 1);
        assert_eq!(s.multiplicity(&[1, 0]), 1);

        let tokens: Vec<usize> = (0..10_000).map(|k| (k * 7919) % 5).collect();
        let s = windows(&tokens, 8, 1).unwrap();
        assert_eq!(s.cardinality(), 9993);
        assert_eq!(window_count(10_000, 8, 1), 9993);
        assert_eq!(windows(&tokens, 8, 3).unwrap().cardinality() as usize, window_count(10_000, 8, 3));

        assert!(matches!(windows(&[0, 1], 3, 1), Err(Error::EmptyMultiset(_))));
        assert!(windows(&[0, 1], 0, 1).is_err());
    }

    #[test]
    fn round_trip_through_tokens() {
        let text = "the cat saw the dog";
        let v = build_vocab(text.as_bytes(), Scheme::Words, 10).unwrap();
        let idx = tokenize(text.as_bytes(), Scheme::Words, &v).unwrap();
        let s = windows(&idx, 3, 1).unwrap();
        for (w, _) in s.iter() {
            let span = String::from_utf8(detokenize(w, Scheme::Words, &v).unwrap()).unwrap();
            assert!(text.contains(&span));
        }
        assert_eq!(detokenize(&idx, Scheme::Words, &v).unwrap(), text.as_bytes());

        let text = "héllo, wörld\n";
        let v = build_vocab(text.as_bytes(), Scheme::Chars, 100).unwrap();
        let idx = tokenize(text.as_bytes(), Scheme::Chars, &v).unwrap();
        assert_eq!(detokenize(&idx, Scheme::Chars, &v).unwrap(), text.as_bytes());
    }

    #[test]
    fn unknown_tokens_use_oov_or_fail() {
        let v = build_vocab(b"aab", Scheme::Chars, 1).unwrap();
        assert_eq!(tokenize(b"abz", Scheme::Chars, &v).unwrap(), vec![0, 1, 1]);
        let closed = build_vocab(b"ab", Scheme::Chars, 5).unwrap();
        assert!(tokenize(b"abz", Scheme::Chars, &closed).is_err());
    }

    #[test]
    fn vocab_file_round_trip() {
        let tokens =
            vec![b"a".to_vec(), b"\\".to_vec(), b"\n".to_vec(), vec![0xff, b'x'], "é".as_bytes().to_vec(), Vec::new()];
        let v = SymbolSet::new(tokens, Some(5)).unwrap();
        let text = write_vocab(&v);
        assert_eq!(text, "a\n\\\\\n\\n\n\\xffx\né\n\\u\n");
        assert_eq!(read_vocab(&text).unwrap(), v);
        assert!(read_vocab("").is_err());
        assert!(read_vocab("a\n\\q\n").is_err());
    }
}
