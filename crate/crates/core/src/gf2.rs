//! Dense binary matrices over GF(2).
//!
//! Rows are packed into `u64` words, so row addition is a word-wise XOR. The
//! row-reduction routine here is the one the recovery pipeline relies on: it
//! produces the block form `[I D; 0 0]` after moving every pivot column to the
//! front, and keeps column means as exact integer ratios.

use std::fmt;

use rand::Rng;

use crate::error::{Error, Result};

const WORD_BITS: usize = 64;

#[inline]
fn words_for(cols: usize) -> usize {
    cols.div_ceil(WORD_BITS)
}

#[inline]
fn tail_mask(cols: usize) -> u64 {
    match cols % WORD_BITS {
        0 => u64::MAX,
        r => (1u64 << r) - 1,
    }
}

/// Row-major packed binary matrix.
///
/// Bits past `cols` in the last word of each row are always zero.
#[derive(Clone, PartialEq, Eq, Hash)]
pub struct BitMatrix {
    rows: usize,
    cols: usize,
    stride: usize,
    words: Vec<u64>,
}

impl BitMatrix {
    pub fn zeros(rows: usize, cols: usize) -> Self {
        let stride = words_for(cols);
        BitMatrix {
            rows,
            cols,
            stride,
            words: vec![0; rows * stride],
        }
    }

    pub fn identity(n: usize) -> Self {
        let mut m = Self::zeros(n, n);
        for i in 0..n {
            m.set(i, i, true);
        }
        m
    }

    pub fn from_fn(rows: usize, cols: usize, mut f: impl FnMut(usize, usize) -> bool) -> Self {
        let mut m = Self::zeros(rows, cols);
        for r in 0..rows {
            for c in 0..cols {
                if f(r, c) {
                    m.set(r, c, true);
                }
            }
        }
        m
    }

    /// Builds a matrix from rows of 0/1 bytes. All rows must share a length.
    pub fn from_rows<R: AsRef<[u8]>>(rows: &[R]) -> Result<Self> {
        let cols = rows.first().map_or(0, |r| r.as_ref().len());
        let mut m = Self::zeros(0, cols);
        for row in rows {
            m.push_row(row.as_ref())?;
        }
        Ok(m)
    }

    /// Uniformly random matrix.
    pub fn random<R: Rng + ?Sized>(rows: usize, cols: usize, rng: &mut R) -> Self {
        let mut m = Self::zeros(rows, cols);
        if m.stride == 0 {
            return m;
        }
        let mask = tail_mask(cols);
        for row in m.words.chunks_exact_mut(m.stride) {
            for w in row.iter_mut() {
                *w = rng.random();
            }
            row[m.stride - 1] &= mask;
        }
        m
    }

    #[inline]
    pub fn rows(&self) -> usize {
        self.rows
    }

    #[inline]
    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn is_empty(&self) -> bool {
        self.rows == 0 || self.cols == 0
    }

    #[inline]
    pub fn get(&self, r: usize, c: usize) -> bool {
        assert!(r < self.rows && c < self.cols, "index ({r}, {c}) out of bounds");
        self.words[r * self.stride + c / WORD_BITS] >> (c % WORD_BITS) & 1 == 1
    }

    #[inline]
    pub fn set(&mut self, r: usize, c: usize, value: bool) {
        assert!(r < self.rows && c < self.cols, "index ({r}, {c}) out of bounds");
        let w = &mut self.words[r * self.stride + c / WORD_BITS];
        let bit = 1u64 << (c % WORD_BITS);
        if value {
            *w |= bit;
        } else {
            *w &= !bit;
        }
    }

    pub fn flip(&mut self, r: usize, c: usize) {
        assert!(r < self.rows && c < self.cols, "index ({r}, {c}) out of bounds");
        self.words[r * self.stride + c / WORD_BITS] ^= 1u64 << (c % WORD_BITS);
    }

    /// Packed words of row `r`.
    #[inline]
    pub fn row_words(&self, r: usize) -> &[u64] {
        &self.words[r * self.stride..(r + 1) * self.stride]
    }

    pub fn row_bits(&self, r: usize) -> Vec<u8> {
        (0..self.cols).map(|c| self.get(r, c) as u8).collect()
    }

    /// Appends a row given as 0/1 bytes.
    pub fn push_row(&mut self, bits: &[u8]) -> Result<()> {
        if bits.len() != self.cols {
            return Err(Error::Dimension(format!(
                "row has {} entries, matrix has {} columns",
                bits.len(),
                self.cols
            )));
        }
        let start = self.words.len();
        self.words.resize(start + self.stride, 0);
        for (c, &b) in bits.iter().enumerate() {
            match b {
                0 => {}
                1 => self.words[start + c / WORD_BITS] |= 1u64 << (c % WORD_BITS),
                other => {
                    self.words.truncate(start);
                    return Err(Error::InvalidParameter(format!(
                        "bit value {other} at column {c} is not 0 or 1"
                    )));
                }
            }
        }
        self.rows += 1;
        Ok(())
    }

    pub fn swap_rows(&mut self, a: usize, b: usize) {
        if a == b {
            return;
        }
        let s = self.stride;
        let (lo, hi) = if a < b { (a, b) } else { (b, a) };
        let (head, tail) = self.words.split_at_mut(hi * s);
        head[lo * s..(lo + 1) * s].swap_with_slice(&mut tail[..s]);
    }

    /// `row[dst] ^= row[src]`, touching only words from `from_word` onward.
    fn xor_row_from(&mut self, dst: usize, src: usize, from_word: usize) {
        debug_assert_ne!(dst, src);
        let s = self.stride;
        let (d, sr) = if dst < src {
            let (head, tail) = self.words.split_at_mut(src * s);
            (&mut head[dst * s..(dst + 1) * s], &tail[..s])
        } else {
            let (head, tail) = self.words.split_at_mut(dst * s);
            (&mut tail[..s], &head[src * s..(src + 1) * s])
        };
        for (x, y) in d[from_word..].iter_mut().zip(&sr[from_word..]) {
            *x ^= *y;
        }
    }

    pub fn xor_rows(&mut self, dst: usize, src: usize) {
        if dst == src {
            let s = self.stride;
            self.words[dst * s..(dst + 1) * s].fill(0);
        } else {
            self.xor_row_from(dst, src, 0);
        }
    }

    pub fn transpose(&self) -> BitMatrix {
        let mut t = BitMatrix::zeros(self.cols, self.rows);
        for r in 0..self.rows {
            for c in self.ones_in_row(r) {
                t.set(c, r, true);
            }
        }
        t
    }

    /// Column indices of the set bits in row `r`, ascending.
    pub fn ones_in_row(&self, r: usize) -> impl Iterator<Item = usize> + '_ {
        self.row_words(r)
            .iter()
            .enumerate()
            .flat_map(|(wi, &w)| {
                let mut w = w;
                std::iter::from_fn(move || {
                    if w == 0 {
                        None
                    } else {
                        let b = w.trailing_zeros() as usize;
                        w &= w - 1;
                        Some(wi * WORD_BITS + b)
                    }
                })
            })
    }

    pub fn row_weight(&self, r: usize) -> usize {
        self.row_words(r).iter().map(|w| w.count_ones() as usize).sum()
    }

    /// Number of ones in each column.
    pub fn column_weights(&self) -> Vec<usize> {
        let mut weights = vec![0usize; self.cols];
        for r in 0..self.rows {
            for c in self.ones_in_row(r) {
                weights[c] += 1;
            }
        }
        weights
    }

    pub fn is_zero(&self) -> bool {
        self.words.iter().all(|&w| w == 0)
    }

    /// GF(2) product `self · other`.
    pub fn multiply(&self, other: &BitMatrix) -> Result<BitMatrix> {
        if self.cols != other.rows {
            return Err(Error::Dimension(format!(
                "cannot multiply {}x{} by {}x{}",
                self.rows, self.cols, other.rows, other.cols
            )));
        }
        let mut out = BitMatrix::zeros(self.rows, other.cols);
        let s = out.stride;
        for r in 0..self.rows {
            let dst = &mut out.words[r * s..(r + 1) * s];
            for j in self.ones_in_row(r) {
                for (x, y) in dst.iter_mut().zip(other.row_words(j)) {
                    *x ^= *y;
                }
            }
        }
        Ok(out)
    }

    /// New matrix whose column `j` is column `perm[j]` of `self`.
    pub fn permute_columns(&self, perm: &[usize]) -> Result<BitMatrix> {
        if perm.len() != self.cols {
            return Err(Error::Dimension(format!(
                "permutation of length {} for {} columns",
                perm.len(),
                self.cols
            )));
        }
        let mut out = BitMatrix::zeros(self.rows, self.cols);
        for r in 0..self.rows {
            for (j, &src) in perm.iter().enumerate() {
                if self.get(r, src) {
                    out.set(r, j, true);
                }
            }
        }
        Ok(out)
    }

    /// Stacks `other` below `self`.
    pub fn vstack(&self, other: &BitMatrix) -> Result<BitMatrix> {
        if self.cols != other.cols {
            return Err(Error::Dimension(format!(
                "cannot stack {} columns on {} columns",
                other.cols, self.cols
            )));
        }
        let mut words = self.words.clone();
        words.extend_from_slice(&other.words);
        Ok(BitMatrix {
            rows: self.rows + other.rows,
            cols: self.cols,
            stride: self.stride,
            words,
        })
    }
}

impl fmt::Debug for BitMatrix {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        writeln!(f, "BitMatrix {}x{} [", self.rows, self.cols)?;
        for r in 0..self.rows {
            let line: String = (0..self.cols)
                .map(|c| if self.get(r, c) { '1' } else { '0' })
                .collect();
            writeln!(f, "  {line}")?;
        }
        write!(f, "]")
    }
}

/// Mean of a column as the exact ratio `ones / rows`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct ColumnMean {
    pub ones: usize,
    pub rows: usize,
}

impl ColumnMean {
    /// `ones / rows <= 1 / m_s`, compared without division.
    pub fn at_most_reciprocal(&self, m_s: usize) -> bool {
        (self.ones as u128) * (m_s as u128) <= self.rows as u128
    }

    pub fn as_f64(&self) -> f64 {
        self.ones as f64 / self.rows as f64
    }
}

/// Row-reduced echelon form with pivot columns moved to the front.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct RrefResult {
    /// `[I D; 0 0]` after column permutation.
    pub reduced: BitMatrix,
    /// `column_permutation[j]` is the input column that sits at position `j`.
    pub column_permutation: Vec<usize>,
    pub pivot_count: usize,
    pub column_means: Vec<ColumnMean>,
}

impl RrefResult {
    /// Input-column indices of the pivots, in pivot order.
    pub fn pivot_columns(&self) -> &[usize] {
        &self.column_permutation[..self.pivot_count]
    }

    pub fn free_columns(&self) -> &[usize] {
        &self.column_permutation[self.pivot_count..]
    }

    /// The reduced matrix with columns returned to input order.
    pub fn unpermuted(&self) -> BitMatrix {
        let mut inverse = vec![0; self.column_permutation.len()];
        for (pos, &col) in self.column_permutation.iter().enumerate() {
            inverse[col] = pos;
        }
        self.reduced
            .permute_columns(&inverse)
            .expect("permutation length matches column count")
    }
}

/// Gauss-Jordan elimination over GF(2).
///
/// Columns are scanned left to right; the pivot for a column is the first row
/// at or below the current rank with a one there. Columns without a pivot are
/// moved behind the pivot block in the order they were met.
pub fn rref(m: &BitMatrix) -> Result<RrefResult> {
    if m.is_empty() {
        return Err(Error::Dimension(format!(
            "cannot row-reduce an empty {}x{} matrix",
            m.rows(),
            m.cols()
        )));
    }
    let mut a = m.clone();
    let rows = a.rows;
    let stride = a.stride;
    let mut pivots = Vec::with_capacity(rows.min(a.cols));
    let mut free = Vec::new();
    let mut rank = 0;

    for c in 0..a.cols {
        if rank == rows {
            free.push(c);
            continue;
        }
        let w = c / WORD_BITS;
        let bit = 1u64 << (c % WORD_BITS);
        let Some(p) = (rank..rows).find(|&i| a.words[i * stride + w] & bit != 0) else {
            free.push(c);
            continue;
        };
        a.swap_rows(rank, p);
        // The pivot row is zero left of `c`, so earlier words never change.
        for i in 0..rows {
            if i != rank && a.words[i * stride + w] & bit != 0 {
                a.xor_row_from(i, rank, w);
            }
        }
        pivots.push(c);
        rank += 1;
    }

    let mut column_permutation = pivots;
    column_permutation.extend(free);
    let reduced = a.permute_columns(&column_permutation)?;
    let column_means = reduced
        .column_weights()
        .into_iter()
        .map(|ones| ColumnMean { ones, rows })
        .collect();

    Ok(RrefResult {
        reduced,
        column_permutation,
        pivot_count: rank,
        column_means,
    })
}

pub fn rank(m: &BitMatrix) -> usize {
    if m.is_empty() {
        return 0;
    }
    rref(m).map(|r| r.pivot_count).unwrap_or(0)
}

/// Counts the columns whose mean is at most `1 / m_s`.
///
/// Pivot columns hold a single one and always pass. All-zero columns pass too,
/// so the count can exceed `pivot_count`.
pub fn rank_by_column_mean(r: &RrefResult, m_s: usize) -> Result<usize> {
    if m_s == 0 || m_s != r.reduced.rows() {
        return Err(Error::Dimension(format!(
            "m_s = {m_s} does not match the {} rows of the reduced matrix",
            r.reduced.rows()
        )));
    }
    Ok(r
        .column_means
        .iter()
        .filter(|mean| mean.at_most_reciprocal(m_s))
        .count())
}

/// Basis of `{x : m · xᵀ = 0}` as the rows of a matrix.
pub fn null_space(m: &BitMatrix) -> Result<BitMatrix> {
    let r = rref(m)?;
    let n = m.cols();
    let mut basis = BitMatrix::zeros(n - r.pivot_count, n);
    for (j, &free_col) in r.free_columns().iter().enumerate() {
        basis.set(j, free_col, true);
        for (i, &pivot_col) in r.pivot_columns().iter().enumerate() {
            if r.reduced.get(i, r.pivot_count + j) {
                basis.set(j, pivot_col, true);
            }
        }
    }
    Ok(basis)
}
