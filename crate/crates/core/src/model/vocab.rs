//! Token and label vocabularies.

use std::collections::{BTreeMap, HashMap};
use std::fmt::Write as _;
use std::ops::Range;

use super::ModelError;

pub const UNK: usize = 0;
/// Row reserved for the virtual root token.
pub const VR: usize = 1;
pub const UNK_STR: &str = "<UNK>";
pub const VR_STR: &str = "<VR>";
pub const NONE_LABEL: &str = "<NONE>";

/// String to row index with training counts. Rows 0 and 1 are `<UNK>` and
/// `<VR>`; the rest are sorted.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Vocab {
    items: Vec<String>,
    counts: Vec<u64>,
    index: HashMap<String, usize>,
}

impl Vocab {
    pub fn build<'a>(tokens: impl IntoIterator<Item = &'a str>) -> Vocab {
        let mut counts: BTreeMap<&str, u64> = BTreeMap::new();
        for t in tokens {
            if t != UNK_STR && t != VR_STR {
                *counts.entry(t).or_insert(0) += 1;
            }
        }
        let mut items = vec![UNK_STR.to_owned(), VR_STR.to_owned()];
        let mut c = vec![0, 0];
        for (t, n) in counts {
            items.push(t.to_owned());
            c.push(n);
        }
        Vocab::from_parts(items, c)
    }

    /// Keeps the given order after the reserved rows; later duplicates are
    /// dropped. Nothing counts as a singleton.
    pub fn from_items(items: impl IntoIterator<Item = String>) -> Vocab {
        let mut seen = std::collections::HashSet::new();
        let mut all = vec![UNK_STR.to_owned(), VR_STR.to_owned()];
        for item in items {
            if item != UNK_STR && item != VR_STR && seen.insert(item.clone()) {
                all.push(item);
            }
        }
        let counts = vec![0; all.len()];
        Vocab::from_parts(all, counts)
    }

    fn from_parts(items: Vec<String>, counts: Vec<u64>) -> Vocab {
        let index = items
            .iter()
            .enumerate()
            .map(|(i, s)| (s.clone(), i))
            .collect();
        Vocab {
            items,
            counts,
            index,
        }
    }

    pub fn id(&self, token: &str) -> usize {
        self.index.get(token).copied().unwrap_or(UNK)
    }

    pub fn get(&self, token: &str) -> Option<usize> {
        self.index.get(token).copied()
    }

    pub fn item(&self, id: usize) -> &str {
        &self.items[id]
    }

    pub fn len(&self) -> usize {
        self.items.len()
    }

    pub fn is_empty(&self) -> bool {
        self.items.is_empty()
    }

    /// Seen exactly once in training; such rows are stochastically swapped
    /// for `<UNK>` while training.
    pub fn is_singleton(&self, id: usize) -> bool {
        self.counts[id] == 1
    }

    /// One `item<TAB>count` line per row.
    pub fn to_text(&self) -> String {
        let mut out = String::new();
        for (s, n) in self.items.iter().zip(&self.counts) {
            writeln!(out, "{s}\t{n}").unwrap();
        }
        out
    }

    pub fn from_text(text: &str) -> Result<Vocab, ModelError> {
        let mut items = Vec::new();
        let mut counts = Vec::new();
        for (i, line) in text.lines().enumerate() {
            let (s, n) = line
                .rsplit_once('\t')
                .and_then(|(s, n)| Some((s, n.parse().ok()?)))
                .ok_or_else(|| ModelError::Checkpoint(format!("vocab line {}", i + 1)))?;
            items.push(s.to_owned());
            counts.push(n);
        }
        if items.len() < 2 || items[UNK] != UNK_STR || items[VR] != VR_STR {
            return Err(ModelError::Checkpoint("vocab lacks reserved rows".into()));
        }
        Ok(Vocab::from_parts(items, counts))
    }
}

/// Output labels: the role partition (with `<NONE>` at index 0) followed by
/// the sense partition, which is empty outside end-to-end mode.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct LabelVocab {
    roles: Vec<String>,
    senses: Vec<String>,
}

impl LabelVocab {
    pub fn new(
        roles: impl IntoIterator<Item = String>,
        senses: impl IntoIterator<Item = String>,
    ) -> Result<LabelVocab, ModelError> {
        let mut r: Vec<String> = roles.into_iter().collect();
        let mut s: Vec<String> = senses.into_iter().collect();
        r.sort();
        r.dedup();
        s.sort();
        s.dedup();
        if r.iter().any(|x| x == NONE_LABEL) {
            return Err(ModelError::Data(format!("role label {NONE_LABEL} is reserved")));
        }
        r.insert(0, NONE_LABEL.to_owned());
        Ok(LabelVocab {
            roles: r,
            senses: s,
        })
    }

    pub fn len(&self) -> usize {
        self.roles.len() + self.senses.len()
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    pub fn role_range(&self) -> Range<usize> {
        0..self.roles.len()
    }

    pub fn sense_range(&self) -> Range<usize> {
        self.roles.len()..self.len()
    }

    pub fn role_id(&self, role: &str) -> Option<usize> {
        self.roles.iter().position(|r| r == role)
    }

    pub fn sense_id(&self, sense: &str) -> Option<usize> {
        self.senses
            .iter()
            .position(|s| s == sense)
            .map(|i| i + self.roles.len())
    }

    pub fn label(&self, id: usize) -> &str {
        if id < self.roles.len() {
            &self.roles[id]
        } else {
            &self.senses[id - self.roles.len()]
        }
    }

    pub fn roles(&self) -> &[String] {
        &self.roles
    }

    pub fn senses(&self) -> &[String] {
        &self.senses
    }

    /// `role<TAB>label` and `sense<TAB>label` lines.
    pub fn to_text(&self) -> String {
        let mut out = String::new();
        for r in &self.roles[1..] {
            writeln!(out, "role\t{r}").unwrap();
        }
        for s in &self.senses {
            writeln!(out, "sense\t{s}").unwrap();
        }
        out
    }

    pub fn from_text(text: &str) -> Result<LabelVocab, ModelError> {
        let mut roles = Vec::new();
        let mut senses = Vec::new();
        for (i, line) in text.lines().enumerate() {
            match line.split_once('\t') {
                Some(("role", r)) => roles.push(r.to_owned()),
                Some(("sense", s)) => senses.push(s.to_owned()),
                _ => return Err(ModelError::Checkpoint(format!("label line {}", i + 1))),
            }
        }
        LabelVocab::new(roles, senses)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn reserved_rows_and_sorted_items() {
        let v = Vocab::build(["b", "a", "b", "c"]);
        assert_eq!(v.item(UNK), UNK_STR);
        assert_eq!(v.item(VR), VR_STR);
        assert_eq!((v.id("a"), v.id("b"), v.id("c")), (2, 3, 4));
        assert_eq!(v.id("zzz"), UNK);
        assert!(v.is_singleton(2) && !v.is_singleton(3));
        assert_eq!(Vocab::from_text(&v.to_text()).unwrap(), v);
    }

    #[test]
    fn label_partitions_are_disjoint() {
        let l = LabelVocab::new(
            ["A1", "A0", "A1"].map(String::from),
            ["02", "01"].map(String::from),
        )
        .unwrap();
        assert_eq!(l.roles(), ["<NONE>", "A0", "A1"]);
        assert_eq!(l.role_range(), 0..3);
        assert_eq!(l.sense_range(), 3..5);
        assert_eq!(l.sense_id("01"), Some(3));
        assert_eq!(l.label(4), "02");
        assert_eq!(l.role_id("01"), None);
        assert_eq!(LabelVocab::from_text(&l.to_text()).unwrap(), l);
        assert!(LabelVocab::new(["<NONE>".to_string()], []).is_err());
    }
}
