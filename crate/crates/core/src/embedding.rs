//! Pretrained word vectors and the embedding table fed to the first LSTM layer.
//!
//! Rows of in-vocabulary words hold their pretrained vectors and never change.
//! The `<OOV>` row (shared by every out-of-vocabulary word) and the four
//! special-meme rows are trainable; `<PAD>` is a fixed zero row.

use alloc::collections::BTreeMap;
use alloc::string::{String, ToString};
use alloc::vec;
use alloc::vec::Vec;
use core::fmt::Write;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::linalg::Matrix;
use crate::text::{TokenId, Vocabulary, WordList};
use crate::{Error, Result};

/// Half-width of the uniform init range for trainable rows.
pub const TRAINABLE_INIT_RANGE: f64 = 0.05;

/// A word seen again later in a GloVe stream. The first vector is kept.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Duplicate {
    pub line: usize,
    pub word: String,
}

/// Parsed GloVe vectors in file order.
#[derive(Debug, Clone, Default)]
pub struct GloveVectors {
    dim: usize,
    words: Vec<String>,
    // word -> row in `data`, `None` when the vector was not retained
    index: BTreeMap<String, Option<usize>>,
    data: Vec<f64>,
    duplicates: Vec<Duplicate>,
}

impl GloveVectors {
    pub fn from_rows<I>(dim: usize, rows: I) -> Result<Self>
    where
        I: IntoIterator<Item = (String, Vec<f64>)>,
    {
        let mut b = GloveBuilder::new(Some(dim));
        for (word, vec) in rows {
            b.line += 1;
            if vec.len() != dim {
                return Err(Error::DimensionMismatch {
                    line: b.line,
                    expected: dim,
                    found: vec.len(),
                });
            }
            b.add(word, &vec)?;
        }
        b.finish()
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn len(&self) -> usize {
        self.words.len()
    }

    pub fn is_empty(&self) -> bool {
        self.words.is_empty()
    }

    /// Distinct words in file order.
    pub fn words(&self) -> &[String] {
        &self.words
    }

    pub fn vector(&self, word: &str) -> Option<&[f64]> {
        let row = (*self.index.get(word)?)?;
        Some(&self.data[row * self.dim..(row + 1) * self.dim])
    }

    pub fn duplicates(&self) -> &[Duplicate] {
        &self.duplicates
    }

    /// Renders the retained vectors in GloVe text format.
    pub fn to_text(&self) -> String {
        let mut out = String::new();
        for w in &self.words {
            if let Some(v) = self.vector(w) {
                out.push_str(w);
                for x in v {
                    let _ = write!(out, " {x}");
                }
                out.push('\n');
            }
        }
        out
    }
}

impl WordList for GloveVectors {
    fn contains_word(&self, word: &str) -> bool {
        self.index.contains_key(word)
    }
}

/// Incremental GloVe parser, one line at a time.
///
/// With [`GloveBuilder::retain_only`] the full word list is still recorded
/// (it is needed for the vocabulary intersection) but vectors are kept only
/// for the listed words.
#[derive(Debug)]
pub struct GloveBuilder {
    expected_dim: Option<usize>,
    retain: Option<alloc::collections::BTreeSet<String>>,
    line: usize,
    out: GloveVectors,
}

impl GloveBuilder {
    /// `expected_dim = None` takes the dimension from the first line.
    pub fn new(expected_dim: Option<usize>) -> Self {
        GloveBuilder {
            expected_dim,
            retain: None,
            line: 0,
            out: GloveVectors::default(),
        }
    }

    pub fn retain_only(mut self, words: alloc::collections::BTreeSet<String>) -> Self {
        self.retain = Some(words);
        self
    }

    pub fn push_line(&mut self, line: &str) -> Result<()> {
        self.line += 1;
        let mut fields = line.split_ascii_whitespace();
        let Some(word) = fields.next() else {
            return Ok(());
        };
        let values: Vec<&str> = fields.collect();
        let dim = *self.expected_dim.get_or_insert(values.len());
        if values.len() != dim || dim == 0 {
            return Err(Error::DimensionMismatch {
                line: self.line,
                expected: dim,
                found: values.len(),
            });
        }
        let mut vec = Vec::with_capacity(dim);
        for f in values {
            let x: f64 = f.parse().map_err(|_| Error::NotANumber {
                line: self.line,
                field: f.to_string(),
            })?;
            vec.push(x);
        }
        self.add(word.to_string(), &vec)
    }

    fn add(&mut self, word: String, vec: &[f64]) -> Result<()> {
        if self.out.index.contains_key(&word) {
            self.out.duplicates.push(Duplicate {
                line: self.line,
                word,
            });
            return Ok(());
        }
        if vec.iter().any(|x| !x.is_finite()) {
            return Err(Error::NonFiniteVector {
                line: self.line,
                word,
            });
        }
        let keep = self.retain.as_ref().is_none_or(|r| r.contains(&word));
        let slot = if keep {
            self.out.data.extend_from_slice(vec);
            Some(self.out.data.len() / vec.len() - 1)
        } else {
            None
        };
        self.out.index.insert(word.clone(), slot);
        self.out.words.push(word);
        Ok(())
    }

    pub fn finish(mut self) -> Result<GloveVectors> {
        if self.out.words.is_empty() {
            return Err(Error::EmptyEmbeddings);
        }
        self.out.dim = self.expected_dim.unwrap_or(0);
        Ok(self.out)
    }
}

/// Parses a whole GloVe stream: `word v1 … vD` per line.
pub fn load_glove<I, S>(lines: I, expected_dim: usize) -> Result<GloveVectors>
where
    I: IntoIterator<Item = S>,
    S: AsRef<str>,
{
    let mut b = GloveBuilder::new(Some(expected_dim));
    for l in lines {
        b.push_line(l.as_ref())?;
    }
    b.finish()
}

#[derive(Debug, Clone, PartialEq)]
pub struct EmbeddingTable {
    rows: Matrix,
    trainable: Vec<bool>,
}

impl EmbeddingTable {
    /// Validates shape and finiteness. The row order follows the vocabulary.
    pub fn from_parts(rows: Matrix, trainable: Vec<bool>) -> Result<Self> {
        if rows.cols() == 0 {
            return Err(Error::Shape("embedding dim must be positive".into()));
        }
        if trainable.len() != rows.rows() {
            return Err(Error::Shape(
                "trainable mask length differs from row count".into(),
            ));
        }
        if rows.as_slice().iter().any(|x| !x.is_finite()) {
            return Err(Error::NonFinite("embedding table".into()));
        }
        Ok(EmbeddingTable { rows, trainable })
    }

    pub fn dim(&self) -> usize {
        self.rows.cols()
    }

    pub fn vocab_size(&self) -> usize {
        self.rows.rows()
    }

    pub fn rows(&self) -> &Matrix {
        &self.rows
    }

    pub fn row(&self, id: TokenId) -> Option<&[f64]> {
        (id.index() < self.vocab_size()).then(|| self.rows.row(id.index()))
    }

    /// The shared out-of-vocabulary vector.
    pub fn oov_vector(&self) -> &[f64] {
        self.rows.row(TokenId::OOV.index())
    }

    pub fn is_trainable(&self, id: TokenId) -> bool {
        self.trainable.get(id.index()).copied().unwrap_or(false)
    }

    pub fn trainable_mask(&self) -> &[bool] {
        &self.trainable
    }

    /// Ids of trainable rows, ascending.
    pub fn trainable_rows(&self) -> Vec<usize> {
        (0..self.trainable.len())
            .filter(|&i| self.trainable[i])
            .collect()
    }

    /// Writable rows for the optimizer; callers must leave fixed rows alone.
    pub(crate) fn rows_mut(&mut self) -> &mut Matrix {
        &mut self.rows
    }

    /// One row per id; errors on ids outside the table.
    pub fn embed_sequence(&self, ids: &[TokenId]) -> Result<Matrix> {
        let mut out = Matrix::zeros(ids.len(), self.dim());
        for (t, &id) in ids.iter().enumerate() {
            let row = self.row(id).ok_or(Error::TokenOutOfRange {
                id: id.0,
                size: self.vocab_size(),
            })?;
            out.row_mut(t).copy_from_slice(row);
        }
        Ok(out)
    }
}

/// Builds the table for `vocab`: pretrained rows fixed, `<PAD>` zero and fixed,
/// `<OOV>` and the special-meme rows drawn from a seeded uniform and trainable.
pub fn build_table(vocab: &Vocabulary, glove: &GloveVectors, seed: u64) -> Result<EmbeddingTable> {
    let dim = glove.dim();
    if dim == 0 {
        return Err(Error::Shape("embedding dim must be positive".into()));
    }
    let mut rows = Matrix::zeros(vocab.len(), dim);
    let mut trainable = vec![false; vocab.len()];
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    for (i, surface) in vocab.surfaces().enumerate() {
        let id = TokenId(i as u32);
        if id == TokenId::PAD {
            continue;
        }
        if id.is_reserved() {
            for x in rows.row_mut(i) {
                *x = rng.gen_range(-TRAINABLE_INIT_RANGE..TRAINABLE_INIT_RANGE);
            }
            trainable[i] = true;
        } else {
            let v = glove
                .vector(surface)
                .ok_or_else(|| Error::MissingVector(surface.to_string()))?;
            rows.row_mut(i).copy_from_slice(v);
        }
    }
    EmbeddingTable::from_parts(rows, trainable)
}

/// Gradient restricted to the trainable rows of a table.
#[derive(Debug, Clone, PartialEq)]
pub struct EmbeddingGrad {
    rows: Vec<usize>,
    data: Matrix,
}

impl EmbeddingGrad {
    pub fn zeros_for(table: &EmbeddingTable) -> Self {
        let rows = table.trainable_rows();
        let data = Matrix::zeros(rows.len(), table.dim());
        EmbeddingGrad { rows, data }
    }

    /// Trainable row ids covered, ascending.
    pub fn row_ids(&self) -> &[usize] {
        &self.rows
    }

    pub fn row(&self, id: TokenId) -> Option<&[f64]> {
        let slot = self.rows.binary_search(&id.index()).ok()?;
        Some(self.data.row(slot))
    }

    pub fn slot(&self, slot: usize) -> &[f64] {
        self.data.row(slot)
    }

    pub fn slot_mut(&mut self, slot: usize) -> &mut [f64] {
        self.data.row_mut(slot)
    }

    pub fn as_slice(&self) -> &[f64] {
        self.data.as_slice()
    }

    pub fn as_mut_slice(&mut self) -> &mut [f64] {
        self.data.as_mut_slice()
    }

    /// Adds `d_inputs` row t into the row of `ids[t]` when that row is trainable.
    pub fn accumulate(&mut self, ids: &[TokenId], d_inputs: &Matrix) {
        for (t, id) in ids.iter().enumerate() {
            if let Ok(slot) = self.rows.binary_search(&id.index()) {
                for (g, d) in self.data.row_mut(slot).iter_mut().zip(d_inputs.row(t)) {
                    *g += d;
                }
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::text::RESERVED;
    use alloc::vec;

    fn vocab_with_cat() -> Vocabulary {
        Vocabulary::from_surfaces(RESERVED.iter().copied().chain(["cat"])).unwrap()
    }

    #[test]
    fn parses_a_line() {
        let g = load_glove(["cat 0.1 -0.2"], 2).unwrap();
        assert_eq!(g.words(), ["cat"]);
        assert_eq!(g.vector("cat").unwrap(), [0.1, -0.2]);
    }

    #[test]
    fn dimension_mismatch_names_the_line() {
        let err = load_glove(["cat 0.1"], 2).unwrap_err();
        assert_eq!(
            err,
            Error::DimensionMismatch {
                line: 1,
                expected: 2,
                found: 1
            }
        );
        let err = load_glove(["a 1 2", "b 1 2 3"], 2).unwrap_err();
        assert!(matches!(err, Error::DimensionMismatch { line: 2, .. }));
    }

    #[test]
    fn first_duplicate_wins() {
        let g = load_glove(["a 1 0", "a 0 1"], 2).unwrap();
        assert_eq!(g.vector("a").unwrap(), [1.0, 0.0]);
        assert_eq!(g.duplicates().len(), 1);
        assert_eq!(
            g.duplicates()[0],
            Duplicate {
                line: 2,
                word: "a".into()
            }
        );
    }

    #[test]
    fn bad_streams_are_rejected() {
        assert_eq!(
            load_glove(Vec::<&str>::new(), 2).unwrap_err(),
            Error::EmptyEmbeddings
        );
        assert!(matches!(
            load_glove(["a 1 x"], 2).unwrap_err(),
            Error::NotANumber { line: 1, .. }
        ));
        assert!(matches!(
            load_glove(["a 1 NaN"], 2).unwrap_err(),
            Error::NonFiniteVector { line: 1, .. }
        ));
    }

    #[test]
    fn inferred_dim_and_retention() {
        let mut b = GloveBuilder::new(None).retain_only(["b".to_string()].into_iter().collect());
        for l in ["a 1 2 3", "b 4 5 6", "", "c 7 8 9"] {
            b.push_line(l).unwrap();
        }
        let g = b.finish().unwrap();
        assert_eq!(g.dim(), 3);
        assert_eq!(g.len(), 3);
        assert!(g.contains_word("a"));
        assert!(g.vector("a").is_none());
        assert_eq!(g.vector("b").unwrap(), [4.0, 5.0, 6.0]);
        assert_eq!(g.to_text(), "b 4 5 6\n");
    }

    #[test]
    fn table_rows_follow_the_rules() {
        let g = load_glove(["cat 1 2 3", "dog 4 5 6"], 3).unwrap();
        let t = build_table(&vocab_with_cat(), &g, 11).unwrap();
        assert_eq!(t.row(TokenId(6)).unwrap(), [1.0, 2.0, 3.0]);
        assert!(!t.is_trainable(TokenId(6)));
        assert_eq!(t.row(TokenId::PAD).unwrap(), [0.0; 3]);
        assert!(!t.is_trainable(TokenId::PAD));
        for id in 1..6 {
            assert!(t.is_trainable(TokenId(id)));
            assert!(t
                .row(TokenId(id))
                .unwrap()
                .iter()
                .all(|x| x.abs() < TRAINABLE_INIT_RANGE));
        }
        let again = build_table(&vocab_with_cat(), &g, 11).unwrap();
        assert_eq!(
            t.oov_vector()
                .iter()
                .map(|x| x.to_bits())
                .collect::<Vec<_>>(),
            again
                .oov_vector()
                .iter()
                .map(|x| x.to_bits())
                .collect::<Vec<_>>()
        );
    }

    #[test]
    fn missing_vector_is_an_error() {
        let g = load_glove(["dog 1 2"], 2).unwrap();
        assert_eq!(
            build_table(&vocab_with_cat(), &g, 0).unwrap_err(),
            Error::MissingVector("cat".into())
        );
    }

    #[test]
    fn embed_sequence_examples() {
        let g = load_glove(["cat 1 2"], 2).unwrap();
        let t = build_table(&vocab_with_cat(), &g, 3).unwrap();
        let m = t.embed_sequence(&[TokenId::OOV]).unwrap();
        assert_eq!(m.row(0), t.oov_vector());
        let m = t.embed_sequence(&[TokenId::PAD, TokenId::PAD]).unwrap();
        assert_eq!(m.as_slice(), [0.0; 4]);
        let m = t.embed_sequence(&[TokenId(6), TokenId::OOV]).unwrap();
        assert_eq!(m.row(0), [1.0, 2.0]);
        assert_eq!(m.row(1), t.oov_vector());
        assert_eq!(
            t.embed_sequence(&[TokenId(7)]).unwrap_err(),
            Error::TokenOutOfRange { id: 7, size: 7 }
        );
    }

    #[test]
    fn oov_gradient_sums_rows_at_oov_positions() {
        let g = load_glove(["cat 1 2"], 2).unwrap();
        let t = build_table(&vocab_with_cat(), &g, 3).unwrap();
        let mut grad = EmbeddingGrad::zeros_for(&t);
        let ids = [TokenId::OOV, TokenId(6), TokenId::OOV, TokenId::PAD];
        let d = Matrix::from_vec(4, 2, vec![1.0, 2.0, 10.0, 10.0, 0.5, -1.0, 7.0, 7.0]);
        grad.accumulate(&ids, &d);
        assert_eq!(grad.row(TokenId::OOV).unwrap(), [1.5, 1.0]);
        assert!(grad.row(TokenId(6)).is_none());
        assert!(grad.row(TokenId::PAD).is_none());
    }
}
