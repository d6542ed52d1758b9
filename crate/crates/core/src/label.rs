use std::fmt;

use crate::error::{Error, Result};

/// Ordered finite set of atomic proposition names.
///
/// A [`Label`] is a subset of this set stored as a bitmask, so at most 64
/// symbols are supported.
#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub struct PropositionSet {
    symbols: Vec<String>,
}

impl PropositionSet {
    pub const MAX_SYMBOLS: usize = 64;

    pub fn new<I, S>(symbols: I) -> Result<Self>
    where
        I: IntoIterator<Item = S>,
        S: Into<String>,
    {
        let mut out = Vec::new();
        for s in symbols {
            let s = s.into();
            if s.is_empty() {
                return Err(Error::Definition("empty proposition name".into()));
            }
            if out.contains(&s) {
                return Err(Error::Definition(format!("duplicate proposition `{s}`")));
            }
            out.push(s);
        }
        if out.len() > Self::MAX_SYMBOLS {
            return Err(Error::Definition(format!(
                "at most {} propositions are supported",
                Self::MAX_SYMBOLS
            )));
        }
        Ok(Self { symbols: out })
    }

    pub fn len(&self) -> usize {
        self.symbols.len()
    }

    pub fn is_empty(&self) -> bool {
        self.symbols.is_empty()
    }

    pub fn symbols(&self) -> &[String] {
        &self.symbols
    }

    pub fn index_of(&self, name: &str) -> Option<usize> {
        self.symbols.iter().position(|s| s == name)
    }

    /// Builds a label from symbol names. Unknown names are an error.
    pub fn label<S: AsRef<str>>(&self, names: &[S]) -> Result<Label> {
        let mut bits = 0u64;
        for n in names {
            let i = self.index_of(n.as_ref()).ok_or_else(|| {
                Error::Definition(format!("unknown proposition `{}`", n.as_ref()))
            })?;
            bits |= 1 << i;
        }
        Ok(Label(bits))
    }

    /// Every subset of the set, in increasing bitmask order.
    pub fn all_labels(&self) -> impl Iterator<Item = Label> {
        let n = self.symbols.len();
        (0..(1u64 << n)).map(Label)
    }

    pub fn display(&self, label: Label) -> String {
        let names: Vec<&str> = self
            .symbols
            .iter()
            .enumerate()
            .filter(|(i, _)| label.contains(*i))
            .map(|(_, s)| s.as_str())
            .collect();
        format!("{{{}}}", names.join(", "))
    }
}

/// A subset of a [`PropositionSet`], one bit per symbol.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Default)]
pub struct Label(pub u64);

impl Label {
    pub const EMPTY: Label = Label(0);

    pub fn contains(self, index: usize) -> bool {
        self.0 >> index & 1 == 1
    }

    pub fn with(self, index: usize) -> Label {
        Label(self.0 | 1 << index)
    }
}

impl fmt::Display for Label {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{:#b}", self.0)
    }
}
