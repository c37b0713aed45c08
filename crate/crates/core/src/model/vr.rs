//! Virtual-root augmentation for joint sense and role prediction.
//!
//! A `<VR>` token is appended to the sentence. Each predicate's sense label
//! becomes the "role" it assigns to that token, so sense disambiguation is
//! scored by the same pairwise classifier as the arguments.

use crate::conll::{Sentence, Token};

use super::vocab::VR_STR;
use super::ModelError;

/// Languages whose senses are a one-to-one function of the lemma.
const SENSE_DEGENERATE: &[&str] = &["cs", "cz", "czech", "ja", "jp", "japanese"];

pub fn supports_virtual_root(language: &str) -> bool {
    !SENSE_DEGENERATE.contains(&language.to_lowercase().as_str())
}

/// `bark.01` → (`bark`, `01`). A sense without a dot is all label.
pub fn split_sense(sense: &str) -> (&str, &str) {
    match sense.rsplit_once('.') {
        Some((prefix, label)) => (prefix, label),
        None => ("", sense),
    }
}

pub fn join_sense(prefix: &str, label: &str) -> String {
    if prefix.is_empty() {
        label.to_owned()
    } else {
        format!("{prefix}.{label}")
    }
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct VirtualRooted {
    /// The input with senses moved onto the appended `<VR>` token.
    pub sentence: Sentence,
    /// Per predicate slot, the part of the sense before the label.
    pub prefixes: Vec<String>,
}

pub fn to_virtual_root(sentence: &Sentence, language: &str) -> Result<VirtualRooted, ModelError> {
    if !supports_virtual_root(language) {
        return Err(ModelError::Mode(format!(
            "end-to-end mode is unavailable for language {language:?}: senses are determined by the lemma"
        )));
    }
    let n = sentence.len();
    let mut tokens = sentence.tokens().to_vec();
    let mut vr = Token::new(n + 1, VR_STR, VR_STR, VR_STR, 0, "ROOT");
    let mut prefixes = Vec::with_capacity(sentence.predicates().len());
    for &p in sentence.predicates() {
        let t = &mut tokens[p - 1];
        let (prefix, label) = match &t.pred_sense {
            Some(s) => {
                let (prefix, label) = split_sense(s);
                (prefix.to_owned(), Some(label.to_owned()))
            }
            None => (t.plemma.clone(), None),
        };
        t.pred_sense = None;
        prefixes.push(prefix);
        vr.apreds.push(label);
    }
    tokens.push(vr);
    Ok(VirtualRooted {
        sentence: Sentence::new(tokens),
        prefixes,
    })
}

pub fn from_virtual_root(vr: &VirtualRooted) -> Result<Sentence, ModelError> {
    let tokens = vr.sentence.tokens();
    match tokens.last() {
        Some(t) if t.form == VR_STR && !t.fillpred => {}
        _ => {
            return Err(ModelError::Mode(
                "sentence does not end in a virtual root token".into(),
            ))
        }
    }
    if vr.prefixes.len() != vr.sentence.predicates().len() {
        return Err(ModelError::Mode("sense prefixes do not match predicates".into()));
    }
    let (root, rest) = tokens.split_last().expect("nonempty");
    let mut out = rest.to_vec();
    for (slot, &p) in vr.sentence.predicates().iter().enumerate() {
        out[p - 1].pred_sense = root.apreds[slot]
            .as_deref()
            .map(|label| join_sense(&vr.prefixes[slot], label));
    }
    Ok(Sentence::new(out))
}
