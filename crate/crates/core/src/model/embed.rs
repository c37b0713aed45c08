//! External vector files: per-token contextual vectors and pre-trained word
//! vectors.

use std::collections::HashMap;
use std::fmt::Write as _;
use std::io::BufRead;

use thiserror::Error;

use crate::conll::Sentence;

#[derive(Debug, Error)]
pub enum EmbeddingError {
    #[error("embedding file line {line}: {message}")]
    Format { line: usize, message: String },
    #[error("embedding file has {found} sentences, corpus has {expected}")]
    SentenceCount { expected: usize, found: usize },
    #[error("embedding file sentence {sentence}: {found} tokens, corpus has {expected}")]
    TokenCount {
        sentence: usize,
        expected: usize,
        found: usize,
    },
    #[error("embedding file sentence {sentence} token {token}: {found} values, expected {expected}")]
    Width {
        sentence: usize,
        token: usize,
        expected: usize,
        found: usize,
    },
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

/// Fixed per-token vectors aligned with a corpus; never trained.
#[derive(Clone, Debug, PartialEq)]
pub struct ContextualEmbeddings {
    pub dim: usize,
    /// `sentences[s][t]` is the vector of token `t + 1` of sentence `s + 1`.
    pub sentences: Vec<Vec<Vec<f64>>>,
}

impl ContextualEmbeddings {
    /// Reads the `#dim=D #sentences=S` / `#sent i n` format and checks it
    /// against `corpus` sentence by sentence.
    pub fn read<R: BufRead>(reader: R, corpus: &[Sentence]) -> Result<Self, EmbeddingError> {
        let fmt_err = |line: usize, message: String| EmbeddingError::Format { line, message };
        let mut lines = reader.lines().enumerate().map(|(i, l)| (i + 1, l));
        let (n, header) = match lines.next() {
            Some((n, l)) => (n, l?),
            None => return Err(fmt_err(1, "empty file".into())),
        };
        let mut dim = None;
        let mut n_sent = None;
        for field in header.split_whitespace() {
            if let Some(v) = field.strip_prefix("#dim=") {
                dim = v.parse::<usize>().ok();
            } else if let Some(v) = field.strip_prefix("#sentences=") {
                n_sent = v.parse::<usize>().ok();
            }
        }
        let (dim, n_sent) = match (dim, n_sent) {
            (Some(d), Some(s)) if d > 0 => (d, s),
            _ => return Err(fmt_err(n, format!("bad header {header:?}"))),
        };
        if n_sent != corpus.len() {
            return Err(EmbeddingError::SentenceCount {
                expected: corpus.len(),
                found: n_sent,
            });
        }
        let mut sentences = Vec::with_capacity(n_sent);
        for (s, sentence) in corpus.iter().enumerate() {
            let (n, marker) = loop {
                match lines.next() {
                    Some((n, l)) => {
                        let l = l?;
                        if !l.trim().is_empty() {
                            break (n, l);
                        }
                    }
                    None => {
                        return Err(EmbeddingError::SentenceCount {
                            expected: corpus.len(),
                            found: s,
                        })
                    }
                }
            };
            let parts: Vec<&str> = marker.split_whitespace().collect();
            let (index, n_tok) = match parts.as_slice() {
                ["#sent", i, t] => match (i.parse::<usize>(), t.parse::<usize>()) {
                    (Ok(i), Ok(t)) => (i, t),
                    _ => return Err(fmt_err(n, format!("bad sentence marker {marker:?}"))),
                },
                _ => return Err(fmt_err(n, format!("expected `#sent i n`, got {marker:?}"))),
            };
            if index != s + 1 {
                return Err(fmt_err(
                    n,
                    format!("sentence marker {index} out of order, expected {}", s + 1),
                ));
            }
            if n_tok != sentence.len() {
                return Err(EmbeddingError::TokenCount {
                    sentence: s + 1,
                    expected: sentence.len(),
                    found: n_tok,
                });
            }
            let mut vectors = Vec::with_capacity(n_tok);
            for t in 0..n_tok {
                let (n, line) = match lines.next() {
                    Some((n, l)) => (n, l?),
                    None => {
                        return Err(EmbeddingError::TokenCount {
                            sentence: s + 1,
                            expected: sentence.len(),
                            found: t,
                        })
                    }
                };
                if line.starts_with('#') || line.trim().is_empty() {
                    return Err(EmbeddingError::TokenCount {
                        sentence: s + 1,
                        expected: sentence.len(),
                        found: t,
                    });
                }
                let v: Vec<f64> = line
                    .split_whitespace()
                    .map(|x| x.parse::<f64>().ok().filter(|x| x.is_finite()))
                    .collect::<Option<_>>()
                    .ok_or_else(|| fmt_err(n, "bad number".into()))?;
                if v.len() != dim {
                    return Err(EmbeddingError::Width {
                        sentence: s + 1,
                        token: t + 1,
                        expected: dim,
                        found: v.len(),
                    });
                }
                vectors.push(v);
            }
            sentences.push(vectors);
        }
        if let Some((n, l)) = lines.find(|(_, l)| !matches!(l, Ok(l) if l.trim().is_empty())) {
            let l = l?;
            return Err(fmt_err(n, format!("trailing content {l:?}")));
        }
        Ok(ContextualEmbeddings { dim, sentences })
    }

    pub fn to_text(&self) -> String {
        let mut out = String::new();
        writeln!(out, "#dim={} #sentences={}", self.dim, self.sentences.len()).unwrap();
        for (s, toks) in self.sentences.iter().enumerate() {
            writeln!(out, "#sent {} {}", s + 1, toks.len()).unwrap();
            for v in toks {
                let line: Vec<String> = v.iter().map(f64::to_string).collect();
                writeln!(out, "{}", line.join(" ")).unwrap();
            }
        }
        out
    }
}

/// Word vectors in the common text format `word v1 .. vD`, optionally
/// preceded by a `count dim` header line.
#[derive(Clone, Debug, PartialEq)]
pub struct PretrainedVectors {
    pub dim: usize,
    pub words: Vec<String>,
    /// Row-major `words.len() x dim`.
    pub values: Vec<f64>,
    index: HashMap<String, usize>,
}

impl PretrainedVectors {
    pub fn new(dim: usize, words: Vec<String>, values: Vec<f64>) -> PretrainedVectors {
        assert_eq!(words.len() * dim, values.len());
        let index = words
            .iter()
            .enumerate()
            .map(|(i, w)| (w.clone(), i))
            .collect();
        PretrainedVectors {
            dim,
            words,
            values,
            index,
        }
    }

    pub fn read<R: BufRead>(reader: R) -> Result<Self, EmbeddingError> {
        let mut dim = 0;
        let mut words = Vec::new();
        let mut values = Vec::new();
        for (i, line) in reader.lines().enumerate() {
            let line = line?;
            let mut parts = line.split_whitespace();
            let Some(word) = parts.next() else { continue };
            let rest: Vec<&str> = parts.collect();
            if i == 0 && rest.len() == 1 && word.parse::<usize>().is_ok() && rest[0].parse::<usize>().is_ok() {
                continue;
            }
            let v: Vec<f64> = rest
                .iter()
                .map(|x| x.parse::<f64>().ok().filter(|x| x.is_finite()))
                .collect::<Option<_>>()
                .ok_or_else(|| EmbeddingError::Format {
                    line: i + 1,
                    message: "bad number".into(),
                })?;
            if dim == 0 {
                dim = v.len();
            }
            if v.is_empty() || v.len() != dim {
                return Err(EmbeddingError::Format {
                    line: i + 1,
                    message: format!("{} values, expected {dim}", v.len()),
                });
            }
            words.push(word.to_owned());
            values.extend(v);
        }
        if words.is_empty() {
            return Err(EmbeddingError::Format {
                line: 1,
                message: "no vectors".into(),
            });
        }
        Ok(PretrainedVectors::new(dim, words, values))
    }

    /// Exact match first, then lowercase.
    pub fn lookup(&self, word: &str) -> Option<usize> {
        self.index
            .get(word)
            .or_else(|| self.index.get(&word.to_lowercase()))
            .copied()
    }
}
