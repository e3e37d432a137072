//! Tweet tokenization, special-token mapping and the vocabulary.

use alloc::borrow::ToOwned;
use alloc::collections::{BTreeMap, BTreeSet};
use alloc::format;
use alloc::string::{String, ToString};
use alloc::vec::Vec;
use core::fmt;

use crate::{Error, Result};

pub const PAD: &str = "<PAD>";
pub const OOV: &str = "<OOV>";
pub const HASHTAG: &str = "<HASHTAG>";
pub const USER: &str = "<USER>";
pub const URL: &str = "<URL>";
pub const RT: &str = "<RT>";

/// Reserved surfaces in id order.
pub const RESERVED: [&str; 6] = [PAD, OOV, HASHTAG, USER, URL, RT];

/// ASCII punctuation split off the ends of a whitespace chunk.
pub const DETACHED_PUNCTUATION: &[char] =
    &['.', ',', '!', '?', ';', ':', '"', '\'', '(', ')', '[', ']'];

/// A normalized, non-empty, whitespace-free token.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct Token(String);

impl Token {
    pub fn new(surface: impl Into<String>) -> Option<Token> {
        let s = surface.into();
        if s.is_empty() || s.chars().any(char::is_whitespace) {
            None
        } else {
            Some(Token(s))
        }
    }

    pub fn as_str(&self) -> &str {
        &self.0
    }

    pub fn is_special(&self) -> bool {
        RESERVED.contains(&self.0.as_str())
    }

    /// True when every character is in [`DETACHED_PUNCTUATION`].
    pub fn is_punctuation(&self) -> bool {
        self.0.chars().all(|c| DETACHED_PUNCTUATION.contains(&c))
    }

    fn special(s: &'static str) -> Token {
        Token(s.to_owned())
    }
}

impl fmt::Display for Token {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.0)
    }
}

impl AsRef<str> for Token {
    fn as_ref(&self) -> &str {
        &self.0
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct TokenId(pub u32);

impl TokenId {
    pub const PAD: TokenId = TokenId(0);
    pub const OOV: TokenId = TokenId(1);
    pub const HASHTAG: TokenId = TokenId(2);
    pub const USER: TokenId = TokenId(3);
    pub const URL: TokenId = TokenId(4);
    pub const RT: TokenId = TokenId(5);

    pub fn index(self) -> usize {
        self.0 as usize
    }

    pub fn is_reserved(self) -> bool {
        self.index() < RESERVED.len()
    }
}

/// Tokenizer settings. `map_retweet` controls whether a bare `RT`/`rt`
/// becomes `<RT>`.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Tokenizer {
    pub map_retweet: bool,
}

impl Default for Tokenizer {
    fn default() -> Self {
        Tokenizer { map_retweet: true }
    }
}

fn is_word_char(c: char) -> bool {
    c.is_alphanumeric() || c == '_'
}

fn starts_with_ignore_case(s: &str, prefix: &str) -> bool {
    s.get(..prefix.len())
        .is_some_and(|p| p.eq_ignore_ascii_case(prefix))
}

fn is_url(raw: &str) -> bool {
    ["http://", "https://"]
        .iter()
        .any(|scheme| starts_with_ignore_case(raw, scheme) && raw.len() > scheme.len())
}

fn sigil_word(raw: &str, sigil: char) -> bool {
    let mut chars = raw.chars();
    chars.next() == Some(sigil) && chars.next().is_some_and(is_word_char)
}

impl Tokenizer {
    /// Maps one whitespace-free chunk to its normalized token.
    ///
    /// Returns `None` only for inputs violating the precondition (empty or
    /// containing whitespace).
    pub fn normalize(&self, raw: &str) -> Option<Token> {
        if raw.is_empty() || raw.chars().any(char::is_whitespace) {
            return None;
        }
        if let Some(&special) = RESERVED.iter().find(|&&s| s == raw) {
            return Some(Token::special(special));
        }
        let token = if sigil_word(raw, '#') {
            Token::special(HASHTAG)
        } else if sigil_word(raw, '@') {
            Token::special(USER)
        } else if is_url(raw) {
            Token::special(URL)
        } else if self.map_retweet && (raw == "RT" || raw == "rt") {
            Token::special(RT)
        } else {
            Token(raw.to_lowercase())
        };
        Some(token)
    }

    pub fn tokenize(&self, tweet: &str) -> Vec<Token> {
        let mut out = Vec::new();
        for chunk in tweet.split(char::is_whitespace).filter(|c| !c.is_empty()) {
            let core = chunk.trim_start_matches(DETACHED_PUNCTUATION);
            let leading = &chunk[..chunk.len() - core.len()];
            let trimmed = core.trim_end_matches(DETACHED_PUNCTUATION);
            let trailing = &core[trimmed.len()..];

            out.extend(leading.chars().map(punct_token));
            if let Some(tok) = self.normalize(trimmed) {
                out.push(tok);
            }
            out.extend(trailing.chars().map(punct_token));
        }
        out
    }
}

fn punct_token(c: char) -> Token {
    Token(c.to_string())
}

pub fn normalize_token(raw: &str) -> Option<Token> {
    Tokenizer::default().normalize(raw)
}

pub fn tokenize(tweet: &str) -> Vec<Token> {
    Tokenizer::default().tokenize(tweet)
}

/// Membership test against a pretrained embedding word list.
pub trait WordList {
    fn contains_word(&self, word: &str) -> bool;
}

impl WordList for BTreeSet<String> {
    fn contains_word(&self, word: &str) -> bool {
        self.contains(word)
    }
}

impl<F: Fn(&str) -> bool> WordList for F {
    fn contains_word(&self, word: &str) -> bool {
        self(word)
    }
}

/// Bijective surface ↔ id map. Ids `0..6` are always the reserved tokens
/// `<PAD>, <OOV>, <HASHTAG>, <USER>, <URL>, <RT>`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Vocabulary {
    ids: BTreeMap<String, TokenId>,
    surfaces: Vec<String>,
}

impl Default for Vocabulary {
    fn default() -> Self {
        Self::reserved()
    }
}

impl Vocabulary {
    /// A vocabulary holding only the reserved tokens.
    pub fn reserved() -> Self {
        let mut v = Vocabulary {
            ids: BTreeMap::new(),
            surfaces: Vec::new(),
        };
        for s in RESERVED {
            v.insert(s);
        }
        v
    }

    fn insert(&mut self, surface: &str) -> TokenId {
        if let Some(&id) = self.ids.get(surface) {
            return id;
        }
        let id = TokenId(self.surfaces.len() as u32);
        self.ids.insert(surface.to_owned(), id);
        self.surfaces.push(surface.to_owned());
        id
    }

    /// Rebuilds a vocabulary from surfaces listed in id order.
    pub fn from_surfaces<I, S>(surfaces: I) -> Result<Self>
    where
        I: IntoIterator<Item = S>,
        S: AsRef<str>,
    {
        let mut v = Vocabulary {
            ids: BTreeMap::new(),
            surfaces: Vec::new(),
        };
        for (i, s) in surfaces.into_iter().enumerate() {
            let s = s.as_ref();
            if Token::new(s).is_none() {
                return Err(Error::InvalidVocabulary(format!(
                    "entry {i} is not a valid token: {s:?}"
                )));
            }
            if i < RESERVED.len() && s != RESERVED[i] {
                return Err(Error::InvalidVocabulary(format!(
                    "id {i} must be {}, found {s:?}",
                    RESERVED[i]
                )));
            }
            if i >= RESERVED.len() && RESERVED.contains(&s) {
                return Err(Error::InvalidVocabulary(format!(
                    "reserved token {s} at id {i}"
                )));
            }
            if v.ids.contains_key(s) {
                return Err(Error::InvalidVocabulary(format!("duplicate surface {s:?}")));
            }
            v.insert(s);
        }
        if v.surfaces.len() < RESERVED.len() {
            return Err(Error::InvalidVocabulary("missing reserved entries".into()));
        }
        Ok(v)
    }

    pub fn len(&self) -> usize {
        self.surfaces.len()
    }

    pub fn is_empty(&self) -> bool {
        self.surfaces.is_empty()
    }

    pub fn id(&self, surface: &str) -> Option<TokenId> {
        self.ids.get(surface).copied()
    }

    pub fn surface(&self, id: TokenId) -> Option<&str> {
        self.surfaces.get(id.index()).map(String::as_str)
    }

    /// Surfaces in id order.
    pub fn surfaces(&self) -> impl ExactSizeIterator<Item = &str> {
        self.surfaces.iter().map(String::as_str)
    }

    /// Serialized as `surface<TAB>id` lines, sorted by id.
    pub fn to_tsv(&self) -> String {
        let mut out = String::new();
        for (i, s) in self.surfaces.iter().enumerate() {
            out.push_str(s);
            out.push('\t');
            out.push_str(&i.to_string());
            out.push('\n');
        }
        out
    }

    pub fn from_tsv(text: &str) -> Result<Self> {
        let mut surfaces = Vec::new();
        for (n, line) in text.lines().enumerate().filter(|(_, l)| !l.is_empty()) {
            let (surface, id) = line
                .rsplit_once('\t')
                .ok_or_else(|| Error::InvalidVocabulary(format!("line {}: missing tab", n + 1)))?;
            let id: usize = id
                .trim()
                .parse()
                .map_err(|_| Error::InvalidVocabulary(format!("line {}: bad id {id:?}", n + 1)))?;
            if id != surfaces.len() {
                return Err(Error::InvalidVocabulary(format!(
                    "line {}: expected id {}, found {id}",
                    n + 1,
                    surfaces.len()
                )));
            }
            surfaces.push(surface);
        }
        Self::from_surfaces(surfaces)
    }
}

/// Reserved tokens plus every corpus token that also has a pretrained vector,
/// in first-appearance order.
pub fn build_vocabulary<'a, I, W>(corpus: I, embedding_words: &W) -> Vocabulary
where
    I: IntoIterator<Item = &'a [Token]>,
    W: WordList + ?Sized,
{
    let mut vocab = Vocabulary::reserved();
    for seq in corpus {
        for tok in seq {
            if tok.is_special() || vocab.ids.contains_key(tok.as_str()) {
                continue;
            }
            if embedding_words.contains_word(tok.as_str()) {
                vocab.insert(tok.as_str());
            }
        }
    }
    vocab
}

/// Maps tokens to ids, sending unknown tokens to `<OOV>`.
pub fn encode(tokens: &[Token], vocab: &Vocabulary) -> Vec<TokenId> {
    tokens
        .iter()
        .map(|t| vocab.id(t.as_str()).unwrap_or(TokenId::OOV))
        .collect()
}

pub fn decode<'v>(ids: &[TokenId], vocab: &'v Vocabulary) -> Vec<Option<&'v str>> {
    ids.iter().map(|&id| vocab.surface(id)).collect()
}
