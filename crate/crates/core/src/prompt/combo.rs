use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use super::{PartKind, PartLibrary, PromptError};

/// One variant choice per part, 1-based. Ordering is lexicographic over
/// (task, ctr, statement, option).
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct PromptCombo {
    pub task: usize,
    pub ctr: usize,
    pub statement: usize,
    pub option: usize,
}

impl PromptCombo {
    pub const fn new(task: usize, ctr: usize, statement: usize, option: usize) -> Self {
        Self {
            task,
            ctr,
            statement,
            option,
        }
    }

    pub fn index(&self, kind: PartKind) -> usize {
        match kind {
            PartKind::TaskDescription => self.task,
            PartKind::CtrDescription => self.ctr,
            PartKind::StatementDescription => self.statement,
            PartKind::OptionDescription => self.option,
        }
    }

    pub fn validate(&self, library: &PartLibrary) -> Result<(), PromptError> {
        for kind in PartKind::ALL {
            let index = self.index(kind);
            let available = library.variants(kind).len();
            if index == 0 || index > available {
                return Err(PromptError::IndexOutOfRange {
                    kind,
                    index,
                    available,
                });
            }
        }
        Ok(())
    }
}

impl fmt::Display for PromptCombo {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "t{}.c{}.s{}.o{}", self.task, self.ctr, self.statement, self.option)
    }
}

impl FromStr for PromptCombo {
    type Err = PromptError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let bad = || PromptError::BadCombo(s.to_string());
        let mut parts = s.trim().split('.');
        let mut field = |prefix: char| -> Result<usize, PromptError> {
            let part = parts.next().ok_or_else(bad)?;
            let digits = part.strip_prefix(prefix).ok_or_else(bad)?;
            if digits.is_empty() || !digits.bytes().all(|b| b.is_ascii_digit()) {
                return Err(bad());
            }
            digits.parse().map_err(|_| bad())
        };
        let combo = PromptCombo::new(field('t')?, field('c')?, field('s')?, field('o')?);
        if parts.next().is_some() {
            return Err(bad());
        }
        Ok(combo)
    }
}

impl Serialize for PromptCombo {
    fn serialize<S: serde::Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        s.collect_str(self)
    }
}

impl<'de> Deserialize<'de> for PromptCombo {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> Result<Self, D::Error> {
        String::deserialize(d)?.parse().map_err(serde::de::Error::custom)
    }
}

/// Every combination for `library`, lexicographically ordered.
pub fn enumerate_combos(library: &PartLibrary) -> Vec<PromptCombo> {
    let count = |k| library.variants(k).len();
    let (nt, nc, ns, no) = (
        count(PartKind::TaskDescription),
        count(PartKind::CtrDescription),
        count(PartKind::StatementDescription),
        count(PartKind::OptionDescription),
    );
    let mut out = Vec::with_capacity(nt * nc * ns * no);
    for task in 1..=nt {
        for ctr in 1..=nc {
            for statement in 1..=ns {
                for option in 1..=no {
                    out.push(PromptCombo::new(task, ctr, statement, option));
                }
            }
        }
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn parse_and_display() {
        let c: PromptCombo = "t4.c1.s5.o4".parse().unwrap();
        assert_eq!(c, PromptCombo::new(4, 1, 5, 4));
        assert_eq!(c.to_string(), "t4.c1.s5.o4");
        for bad in ["", "t4.c1.s5", "t4.c1.s5.o4.x", "c1.t4.s5.o4", "t.c1.s5.o4", "t-1.c1.s1.o1", "tx.c1.s1.o1"] {
            assert!(bad.parse::<PromptCombo>().is_err(), "{bad}");
        }
    }

    proptest! {
        #[test]
        fn string_form_roundtrips(t in 0usize..100, c in 0usize..100, s in 0usize..100, o in 0usize..100) {
            let combo = PromptCombo::new(t, c, s, o);
            prop_assert_eq!(combo.to_string().parse::<PromptCombo>().unwrap(), combo);
        }
    }
}
