//! Total orders over parties, earliest first.

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::scenario::party_label;

#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(try_from = "Vec<usize>", into = "Vec<usize>")]
pub struct Ordering {
    permutation: Vec<usize>,
}

impl Ordering {
    pub fn new(permutation: Vec<usize>) -> Result<Self> {
        let n = permutation.len();
        if n == 0 {
            return Err(Error::InvalidOrdering("empty ordering".into()));
        }
        let mut seen = vec![false; n];
        for &p in &permutation {
            if p >= n || seen[p] {
                return Err(Error::InvalidOrdering(format!(
                    "{permutation:?} is not a permutation of 0..{n}"
                )));
            }
            seen[p] = true;
        }
        Ok(Self { permutation })
    }

    /// Parties in index order: A, B, C, ...
    pub fn identity(n: usize) -> Self {
        Self {
            permutation: (0..n).collect(),
        }
    }

    pub fn parties(&self) -> &[usize] {
        &self.permutation
    }

    pub fn len(&self) -> usize {
        self.permutation.len()
    }

    pub fn is_empty(&self) -> bool {
        self.permutation.is_empty()
    }

    /// Rank of `party` in the order (0 = earliest).
    pub fn position(&self, party: usize) -> usize {
        self.permutation
            .iter()
            .position(|&p| p == party)
            .expect("party belongs to the ordering")
    }

    pub fn precedes(&self, earlier: usize, later: usize) -> bool {
        self.position(earlier) < self.position(later)
    }

    /// Index of this ordering within [`all_orderings`] for the same party count.
    pub fn lex_index(&self) -> usize {
        // Lehmer code.
        let n = self.len();
        let mut index = 0;
        for i in 0..n {
            let smaller_after = self.permutation[i + 1..]
                .iter()
                .filter(|&&p| p < self.permutation[i])
                .count();
            index = index * (n - i) + smaller_after;
        }
        index
    }

    pub fn check_parties(&self, n_parties: usize) -> Result<()> {
        if self.len() != n_parties {
            return Err(Error::InvalidOrdering(format!(
                "ordering {self} has {} parties, scenario has {n_parties}",
                self.len()
            )));
        }
        Ok(())
    }
}

/// All `n!` orderings in lexicographic order of their party sequences.
pub fn all_orderings(n: usize) -> Vec<Ordering> {
    let mut out = Vec::new();
    let mut current = Vec::with_capacity(n);
    let mut used = vec![false; n];
    fn rec(n: usize, current: &mut Vec<usize>, used: &mut [bool], out: &mut Vec<Ordering>) {
        if current.len() == n {
            out.push(Ordering {
                permutation: current.clone(),
            });
            return;
        }
        for p in 0..n {
            if !used[p] {
                used[p] = true;
                current.push(p);
                rec(n, current, used, out);
                current.pop();
                used[p] = false;
            }
        }
    }
    rec(n, &mut current, &mut used, &mut out);
    out
}

impl TryFrom<Vec<usize>> for Ordering {
    type Error = Error;

    fn try_from(v: Vec<usize>) -> Result<Self> {
        Ordering::new(v)
    }
}

impl From<Ordering> for Vec<usize> {
    fn from(o: Ordering) -> Self {
        o.permutation
    }
}

impl fmt::Display for Ordering {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let labels: Vec<String> = self.permutation.iter().map(|&p| party_label(p)).collect();
        write!(f, "{}", labels.join(","))
    }
}

/// Parses `A,B,C` (letters) or `0,1,2` (indices).
impl FromStr for Ordering {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let parties = s
            .split(',')
            .map(|tok| {
                let tok = tok.trim();
                let mut chars = tok.chars();
                match (chars.next(), chars.next()) {
                    (Some(c), None) if c.is_ascii_uppercase() => Ok(c as usize - 'A' as usize),
                    (Some(c), None) if c.is_ascii_lowercase() => Ok(c as usize - 'a' as usize),
                    _ => tok
                        .parse::<usize>()
                        .map_err(|_| Error::InvalidOrdering(format!("bad party `{tok}` in `{s}`"))),
                }
            })
            .collect::<Result<Vec<_>>>()?;
        Ordering::new(parties)
    }
}
