//! Z^d lattice geometry for d in {1, 2, 3}.
//!
//! Sites are points of Z^d; two sites are neighbors when their L1
//! distance is 1. Directions are indexed in the fixed order
//! `+e1, -e1, +e2, -e2, +e3, -e3`; every uniform-neighbor draw and every
//! tie-break downstream inherits this order.

use crate::stream::SeededStream;

pub const MAX_DIM: usize = 3;

/// A point of Z^d. The dimension is carried alongside the coordinates;
/// unused coordinates are zero.
#[derive(Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Debug)]
pub struct Site {
    d: u8,
    coords: [i64; MAX_DIM],
}

impl Site {
    pub fn new(coords: &[i64]) -> Self {
        let d = coords.len();
        assert!(
            (1..=MAX_DIM).contains(&d),
            "site dimension must be 1, 2 or 3, got {d}"
        );
        let mut c = [0i64; MAX_DIM];
        c[..d].copy_from_slice(coords);
        Site { d: d as u8, coords: c }
    }

    pub fn origin(d: usize) -> Self {
        assert!((1..=MAX_DIM).contains(&d));
        Site { d: d as u8, coords: [0; MAX_DIM] }
    }

    #[inline]
    pub fn dim(&self) -> usize {
        self.d as usize
    }

    pub fn coords(&self) -> &[i64] {
        &self.coords[..self.d as usize]
    }

    #[inline]
    pub fn l1_norm(&self) -> i64 {
        self.coords.iter().map(|c| c.abs()).sum()
    }

    #[inline]
    pub fn is_origin(&self) -> bool {
        self.coords == [0; MAX_DIM]
    }

    /// Translate by another site of the same dimension.
    #[inline]
    pub fn translate(&self, by: Site) -> Site {
        debug_assert_eq!(self.d, by.d);
        let mut c = self.coords;
        for (a, b) in c.iter_mut().zip(by.coords.iter()) {
            *a += b;
        }
        Site { d: self.d, coords: c }
    }

    /// Move one step along direction index `k` in `0..2d`.
    #[inline]
    pub fn step(&self, k: usize) -> Site {
        debug_assert!(k < 2 * self.dim());
        let mut c = self.coords;
        c[k / 2] += if k % 2 == 0 { 1 } else { -1 };
        Site { d: self.d, coords: c }
    }

    #[inline]
    pub fn is_adjacent_to(&self, other: &Site) -> bool {
        debug_assert_eq!(self.d, other.d);
        let mut dist = 0i64;
        for i in 0..self.d as usize {
            dist += (self.coords[i] - other.coords[i]).abs();
        }
        dist == 1
    }

    /// True when this site is a neighbor of the origin.
    #[inline]
    pub fn in_neighbor_set(&self) -> bool {
        self.l1_norm() == 1
    }
}

impl std::fmt::Display for Site {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "(")?;
        for (i, c) in self.coords().iter().enumerate() {
            if i > 0 {
                write!(f, ",")?;
            }
            write!(f, "{c}")?;
        }
        write!(f, ")")
    }
}

/// The unit vector for direction index `k` in `0..2d`.
pub fn direction(d: usize, k: usize) -> Site {
    assert!(k < 2 * d, "direction index {k} out of range for d={d}");
    Site::origin(d).step(k)
}

/// The 2d sites at L1 distance 1 from `x`, in the fixed order
/// `+e1, -e1, +e2, -e2, ...`.
pub fn neighbors(x: Site) -> Vec<Site> {
    (0..2 * x.dim()).map(|k| x.step(k)).collect()
}

/// One of the 2d unit vectors, each with probability `1/(2d)`.
#[inline]
pub fn sample_uniform_neighbor(stream: &mut SeededStream, d: usize) -> Site {
    assert!((1..=MAX_DIM).contains(&d));
    direction(d, stream.uniform_index(2 * d))
}
