//! Addresses on the genealogy tree.
//!
//! Every potential particle is a vertex of the infinite tree whose root
//! is the initial particle and whose n-th child of a vertex is that
//! particle's n-th birth. Only touched addresses ever exist in memory.

use std::fmt;

/// A finite sequence of positive child indices naming one particle; the
/// empty sequence is the root.
#[derive(Clone, PartialEq, Eq, Hash, PartialOrd, Ord, Debug, Default)]
pub struct TreeAddress {
    path: Vec<u32>,
}

impl TreeAddress {
    pub fn root() -> Self {
        TreeAddress { path: Vec::new() }
    }

    pub fn is_root(&self) -> bool {
        self.path.is_empty()
    }

    /// The n-th child, n >= 1.
    pub fn child(&self, n: u32) -> Self {
        assert!(n >= 1, "child indices start at 1");
        let mut path = Vec::with_capacity(self.path.len() + 1);
        path.extend_from_slice(&self.path);
        path.push(n);
        TreeAddress { path }
    }

    pub fn parent(&self) -> Option<Self> {
        if self.path.is_empty() {
            None
        } else {
            Some(TreeAddress { path: self.path[..self.path.len() - 1].to_vec() })
        }
    }

    /// Child index under the parent (None for the root).
    pub fn child_index(&self) -> Option<u32> {
        self.path.last().copied()
    }

    pub fn depth(&self) -> usize {
        self.path.len()
    }

    /// True when `self` passes through `other` on its way to the root.
    pub fn descends_from(&self, other: &TreeAddress) -> bool {
        self.path.len() >= other.path.len() && self.path[..other.path.len()] == other.path[..]
    }
}

impl fmt::Display for TreeAddress {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.path.is_empty() {
            return write!(f, "o");
        }
        for (i, n) in self.path.iter().enumerate() {
            if i > 0 {
                write!(f, ".")?;
            }
            write!(f, "{n}")?;
        }
        Ok(())
    }
}
