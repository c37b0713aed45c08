//! CoNLL-2009 reader, writer and corpus statistics.
//!
//! Rows are tab-separated with the fixed column layout
//! `ID FORM LEMMA PLEMMA POS PPOS FEAT PFEAT HEAD PHEAD DEPREL PDEPREL FILLPRED PRED APRED1..APREDn`,
//! sentences are separated by a blank line and `_` marks an empty optional
//! column. String columns are kept verbatim, so a literal `_` lemma survives a
//! round trip unchanged; only `PRED` and the `APRED` cells map `_` to `None`.

use std::fmt;
use std::io::{self, BufRead, Write};
use std::ops::Add;

use thiserror::Error;

/// Number of fixed columns before the argument block.
pub const FIXED_COLUMNS: usize = 14;

const EMPTY: &str = "_";

#[derive(Debug, Error)]
pub enum ConllError {
    #[error("line {line}: expected {expected} columns (14 fixed + {predicates} predicates), found {found}")]
    Arity {
        line: usize,
        expected: usize,
        predicates: usize,
        found: usize,
    },
    #[error("line {line}: column {column} is not a number: {value:?}")]
    NotNumeric {
        line: usize,
        column: &'static str,
        value: String,
    },
    #[error("line {line}: token id {found}, expected {expected}")]
    IdOutOfSequence {
        line: usize,
        expected: usize,
        found: usize,
    },
    #[error("line {line}: {column} {head} out of range for a sentence of {len} tokens")]
    HeadOutOfRange {
        line: usize,
        column: &'static str,
        head: usize,
        len: usize,
    },
    #[error("line {line}: token {id} is its own {column}")]
    SelfHead {
        line: usize,
        column: &'static str,
        id: usize,
    },
    #[error("line {line}: FILLPRED must be `Y` or `_`, found {value:?}")]
    BadFillpred { line: usize, value: String },
    #[error("line {line}: predicate sense {sense:?} on a token without FILLPRED")]
    SenseWithoutFillpred { line: usize, sense: String },
    #[error("line {line}: input is not valid UTF-8")]
    Utf8 { line: usize },
    #[error(transparent)]
    Io(#[from] io::Error),
}

/// One CoNLL-2009 row.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Token {
    pub id: usize,
    pub form: String,
    pub lemma: String,
    pub plemma: String,
    pub pos: String,
    pub ppos: String,
    pub feat: String,
    pub pfeat: String,
    pub head: usize,
    pub phead: usize,
    pub deprel: String,
    pub pdeprel: String,
    pub fillpred: bool,
    pub pred_sense: Option<String>,
    pub apreds: Vec<Option<String>>,
}

impl Token {
    /// A token with identical gold and predicted columns and no SRL annotation.
    pub fn new(id: usize, form: &str, lemma: &str, pos: &str, head: usize, deprel: &str) -> Token {
        Token {
            id,
            form: form.to_owned(),
            lemma: lemma.to_owned(),
            plemma: lemma.to_owned(),
            pos: pos.to_owned(),
            ppos: pos.to_owned(),
            feat: EMPTY.to_owned(),
            pfeat: EMPTY.to_owned(),
            head,
            phead: head,
            deprel: deprel.to_owned(),
            pdeprel: deprel.to_owned(),
            fillpred: false,
            pred_sense: None,
            apreds: Vec::new(),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Sentence {
    tokens: Vec<Token>,
    predicates: Vec<usize>,
}

impl Sentence {
    /// Builds a sentence, deriving the predicate list from `FILLPRED`.
    ///
    /// The caller is responsible for the token invariants; use
    /// [`Sentence::validate`] when the tokens come from an untrusted source.
    pub fn new(tokens: Vec<Token>) -> Sentence {
        let predicates = tokens.iter().filter(|t| t.fillpred).map(|t| t.id).collect();
        Sentence { tokens, predicates }
    }

    pub fn tokens(&self) -> &[Token] {
        &self.tokens
    }

    /// Mutable access to the tokens. `FILLPRED` must not be changed through
    /// this; the predicate list is not recomputed.
    pub fn tokens_mut(&mut self) -> &mut [Token] {
        &mut self.tokens
    }

    /// Token by 1-based id.
    pub fn token(&self, id: usize) -> &Token {
        &self.tokens[id - 1]
    }

    pub fn len(&self) -> usize {
        self.tokens.len()
    }

    pub fn is_empty(&self) -> bool {
        self.tokens.is_empty()
    }

    /// Token ids (1-based) with `FILLPRED` set, in sentence order.
    pub fn predicates(&self) -> &[usize] {
        &self.predicates
    }

    /// Gold arguments of the `slot`-th predicate as `(token id, role)`.
    pub fn arguments(&self, slot: usize) -> impl Iterator<Item = (usize, &str)> + '_ {
        self.tokens
            .iter()
            .filter_map(move |t| t.apreds[slot].as_deref().map(|r| (t.id, r)))
    }

    /// Checks every row-level and sentence-level invariant. Line numbers in
    /// the error are relative to the first token (line 1).
    pub fn validate(&self) -> Result<(), ConllError> {
        let len = self.tokens.len();
        let n_pred = self.predicates.len();
        for (i, t) in self.tokens.iter().enumerate() {
            let line = i + 1;
            if t.id != i + 1 {
                return Err(ConllError::IdOutOfSequence {
                    line,
                    expected: i + 1,
                    found: t.id,
                });
            }
            check_head(line, "HEAD", t.id, t.head, len)?;
            check_head(line, "PHEAD", t.id, t.phead, len)?;
            if t.apreds.len() != n_pred {
                return Err(ConllError::Arity {
                    line,
                    expected: FIXED_COLUMNS + n_pred,
                    predicates: n_pred,
                    found: FIXED_COLUMNS + t.apreds.len(),
                });
            }
            if let (false, Some(sense)) = (t.fillpred, &t.pred_sense) {
                return Err(ConllError::SenseWithoutFillpred {
                    line,
                    sense: sense.clone(),
                });
            }
        }
        Ok(())
    }
}

fn check_head(
    line: usize,
    column: &'static str,
    id: usize,
    head: usize,
    len: usize,
) -> Result<(), ConllError> {
    if head > len {
        return Err(ConllError::HeadOutOfRange {
            line,
            column,
            head,
            len,
        });
    }
    if head == id {
        return Err(ConllError::SelfHead { line, column, id });
    }
    Ok(())
}

/// Corpus-level counts.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub struct CorpusStats {
    pub n_sentences: usize,
    pub n_tokens: usize,
    pub n_predicates: usize,
    pub n_arguments: usize,
}

impl Add for CorpusStats {
    type Output = CorpusStats;

    fn add(self, rhs: CorpusStats) -> CorpusStats {
        CorpusStats {
            n_sentences: self.n_sentences + rhs.n_sentences,
            n_tokens: self.n_tokens + rhs.n_tokens,
            n_predicates: self.n_predicates + rhs.n_predicates,
            n_arguments: self.n_arguments + rhs.n_arguments,
        }
    }
}

impl fmt::Display for CorpusStats {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(
            f,
            "sentences={} tokens={} predicates={} arguments={}",
            self.n_sentences, self.n_tokens, self.n_predicates, self.n_arguments
        )
    }
}

pub fn corpus_stats(corpus: &[Sentence]) -> CorpusStats {
    corpus
        .iter()
        .map(|s| CorpusStats {
            n_sentences: 1,
            n_tokens: s.len(),
            n_predicates: s.predicates().len(),
            n_arguments: s
                .tokens()
                .iter()
                .map(|t| t.apreds.iter().filter(|a| a.is_some()).count())
                .sum(),
        })
        .fold(CorpusStats::default(), Add::add)
}

/// Reads a whole CoNLL-2009 stream.
pub fn read_conll09<R: BufRead>(mut reader: R) -> Result<Vec<Sentence>, ConllError> {
    let mut corpus = Vec::new();
    let mut block: Vec<(usize, String)> = Vec::new();
    let mut buf = Vec::new();
    let mut line_no = 0;
    loop {
        buf.clear();
        let n = reader.read_until(b'\n', &mut buf)?;
        if n == 0 {
            break;
        }
        line_no += 1;
        let line = std::str::from_utf8(&buf).map_err(|_| ConllError::Utf8 { line: line_no })?;
        let line = line.trim_end_matches(['\n', '\r']);
        if line.trim().is_empty() {
            if !block.is_empty() {
                corpus.push(parse_block(&block)?);
                block.clear();
            }
        } else {
            block.push((line_no, line.to_owned()));
        }
    }
    if !block.is_empty() {
        corpus.push(parse_block(&block)?);
    }
    Ok(corpus)
}

/// Parses CoNLL-2009 text held in memory.
pub fn parse_conll09(text: &str) -> Result<Vec<Sentence>, ConllError> {
    read_conll09(text.as_bytes())
}

fn parse_block(rows: &[(usize, String)]) -> Result<Sentence, ConllError> {
    let len = rows.len();
    let mut tokens = Vec::with_capacity(len);
    let mut n_pred = 0;
    let mut widths = Vec::with_capacity(len);

    for (pos, (line, row)) in rows.iter().enumerate() {
        let line = *line;
        let cols: Vec<&str> = row.split('\t').collect();
        if cols.len() < FIXED_COLUMNS {
            return Err(ConllError::Arity {
                line,
                expected: FIXED_COLUMNS,
                predicates: 0,
                found: cols.len(),
            });
        }
        let id = parse_number(line, "ID", cols[0])?;
        if id != pos + 1 {
            return Err(ConllError::IdOutOfSequence {
                line,
                expected: pos + 1,
                found: id,
            });
        }
        let head = parse_number(line, "HEAD", cols[8])?;
        let phead = parse_number(line, "PHEAD", cols[9])?;
        check_head(line, "HEAD", id, head, len)?;
        check_head(line, "PHEAD", id, phead, len)?;

        let fillpred = match cols[12] {
            "Y" => true,
            EMPTY => false,
            other => {
                return Err(ConllError::BadFillpred {
                    line,
                    value: other.to_owned(),
                })
            }
        };
        let pred_sense = optional(cols[13]);
        if let (false, Some(sense)) = (fillpred, &pred_sense) {
            return Err(ConllError::SenseWithoutFillpred {
                line,
                sense: sense.clone(),
            });
        }
        if fillpred {
            n_pred += 1;
        }
        widths.push((line, cols.len()));
        tokens.push(Token {
            id,
            form: cols[1].to_owned(),
            lemma: cols[2].to_owned(),
            plemma: cols[3].to_owned(),
            pos: cols[4].to_owned(),
            ppos: cols[5].to_owned(),
            feat: cols[6].to_owned(),
            pfeat: cols[7].to_owned(),
            head,
            phead,
            deprel: cols[10].to_owned(),
            pdeprel: cols[11].to_owned(),
            fillpred,
            pred_sense,
            apreds: cols[FIXED_COLUMNS..].iter().map(|c| optional(c)).collect(),
        });
    }

    let expected = FIXED_COLUMNS + n_pred;
    if let Some(&(line, found)) = widths.iter().find(|(_, w)| *w != expected) {
        return Err(ConllError::Arity {
            line,
            expected,
            predicates: n_pred,
            found,
        });
    }
    Ok(Sentence::new(tokens))
}

fn parse_number(line: usize, column: &'static str, value: &str) -> Result<usize, ConllError> {
    value.parse().map_err(|_| ConllError::NotNumeric {
        line,
        column,
        value: value.to_owned(),
    })
}

fn optional(cell: &str) -> Option<String> {
    if cell == EMPTY {
        None
    } else {
        Some(cell.to_owned())
    }
}

/// Writes a corpus; every sentence is followed by one blank line.
pub fn write_conll09<W: Write>(mut writer: W, corpus: &[Sentence]) -> io::Result<()> {
    for sentence in corpus {
        for t in sentence.tokens() {
            write!(
                writer,
                "{}\t{}\t{}\t{}\t{}\t{}\t{}\t{}\t{}\t{}\t{}\t{}\t{}\t{}",
                t.id,
                t.form,
                t.lemma,
                t.plemma,
                t.pos,
                t.ppos,
                t.feat,
                t.pfeat,
                t.head,
                t.phead,
                t.deprel,
                t.pdeprel,
                if t.fillpred { "Y" } else { EMPTY },
                t.pred_sense.as_deref().unwrap_or(EMPTY),
            )?;
            for a in &t.apreds {
                write!(writer, "\t{}", a.as_deref().unwrap_or(EMPTY))?;
            }
            writeln!(writer)?;
        }
        writeln!(writer)?;
    }
    Ok(())
}

pub fn to_conll09_string(corpus: &[Sentence]) -> String {
    let mut out = Vec::new();
    write_conll09(&mut out, corpus).expect("writing to a Vec cannot fail");
    String::from_utf8(out).expect("corpus strings are UTF-8")
}
