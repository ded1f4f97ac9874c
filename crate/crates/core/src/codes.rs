//! Linear block codes: random full-rank generators, alist-loaded parity-check
//! matrices, and encoding `c = m·G`.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};
use crate::gf2::{self, BitMatrix};

/// An `[n, k]` binary linear code given by a full-rank `k × n` generator.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct LinearCode {
    n: usize,
    k: usize,
    generator: BitMatrix,
    parity_check: Option<BitMatrix>,
}

impl LinearCode {
    /// Wraps a generator matrix, checking that it has full row rank.
    pub fn from_generator(generator: BitMatrix) -> Result<Self> {
        let (k, n) = (generator.rows(), generator.cols());
        if k == 0 || k > n {
            return Err(Error::InvalidParameter(format!(
                "generator must satisfy 0 < k <= n, got {k}x{n}"
            )));
        }
        let r = gf2::rank(&generator);
        if r != k {
            return Err(Error::InvalidParameter(format!(
                "generator has rank {r}, expected {k}"
            )));
        }
        Ok(LinearCode {
            n,
            k,
            generator,
            parity_check: None,
        })
    }

    /// Samples a uniformly random `k × n` generator, redrawing until it has rank `k`.
    pub fn random(n: usize, k: usize, seed: u64) -> Result<Self> {
        if k == 0 || k > n {
            return Err(Error::InvalidParameter(format!(
                "random code needs 0 < k <= n, got n = {n}, k = {k}"
            )));
        }
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        loop {
            let g = BitMatrix::random(k, n, &mut rng);
            if gf2::rank(&g) == k {
                return Ok(LinearCode {
                    n,
                    k,
                    generator: g,
                    parity_check: None,
                });
            }
        }
    }

    /// Parses an alist parity-check matrix and derives a generator spanning its null space.
    pub fn from_alist(text: &str) -> Result<Self> {
        let h = parse_alist(text)?;
        let generator = gf2::null_space(&h)?;
        if generator.rows() == 0 {
            return Err(Error::InvalidParameter(
                "parity-check matrix has full column rank; the code is {0}".into(),
            ));
        }
        Ok(LinearCode {
            n: h.cols(),
            k: generator.rows(),
            generator,
            parity_check: Some(h),
        })
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn k(&self) -> usize {
        self.k
    }

    pub fn rate(&self) -> f64 {
        self.k as f64 / self.n as f64
    }

    pub fn generator(&self) -> &BitMatrix {
        &self.generator
    }

    /// The parity-check matrix, when the code was loaded from one.
    pub fn parity_check(&self) -> Option<&BitMatrix> {
        self.parity_check.as_ref()
    }

    pub fn encode(&self, message: &[u8]) -> Result<Vec<u8>> {
        if message.len() != self.k {
            return Err(Error::Dimension(format!(
                "message has {} bits, code expects k = {}",
                message.len(),
                self.k
            )));
        }
        let m = BitMatrix::from_rows(&[message])?;
        Ok(m.multiply(&self.generator)?.row_bits(0))
    }

    /// Encodes each row of an `M × k` message matrix.
    pub fn encode_rows(&self, messages: &BitMatrix) -> Result<BitMatrix> {
        messages.multiply(&self.generator)
    }
}

fn parse_numbers(line_no: usize, line: &str) -> Result<Vec<usize>> {
    line.split_whitespace()
        .map(|tok| {
            tok.parse::<usize>()
                .map_err(|_| Error::parse(line_no, format!("`{tok}` is not a non-negative integer")))
        })
        .collect()
}

/// Parses the alist sparse-matrix format into a dense `m × n` matrix.
///
/// Layout: `n m`, then the two maximum weights, then the `n` column weights,
/// the `m` row weights, `n` lines of 1-based row indices per column and `m`
/// lines of 1-based column indices per row. Zero entries used as padding are
/// skipped. Both index lists must describe the same matrix.
pub fn parse_alist(text: &str) -> Result<BitMatrix> {
    let mut lines = text
        .lines()
        .enumerate()
        .map(|(i, l)| (i + 1, l.trim()));
    let total_lines = text.lines().count();
    let mut next = |what: &str| {
        lines
            .next()
            .ok_or_else(|| Error::parse(total_lines + 1, format!("unexpected end of file, expected {what}")))
    };

    let (ln, header) = next("header `n m`")?;
    let header = parse_numbers(ln, header)?;
    let [n, m] = header[..] else {
        return Err(Error::parse(ln, "header must hold exactly `n m`"));
    };
    if n == 0 || m == 0 {
        return Err(Error::parse(ln, "matrix dimensions must be positive"));
    }

    let (ln, maxes) = next("maximum column and row weights")?;
    let maxes = parse_numbers(ln, maxes)?;
    let [max_col, max_row] = maxes[..] else {
        return Err(Error::parse(ln, "expected two maximum weights"));
    };

    let (ln, cw) = next("column weights")?;
    let col_weights = parse_numbers(ln, cw)?;
    if col_weights.len() != n {
        return Err(Error::parse(ln, format!("expected {n} column weights, found {}", col_weights.len())));
    }
    if col_weights.iter().any(|&w| w > max_col || w > m) {
        return Err(Error::parse(ln, "column weight exceeds the declared maximum"));
    }

    let (ln, rw) = next("row weights")?;
    let row_weights = parse_numbers(ln, rw)?;
    if row_weights.len() != m {
        return Err(Error::parse(ln, format!("expected {m} row weights, found {}", row_weights.len())));
    }
    if row_weights.iter().any(|&w| w > max_row || w > n) {
        return Err(Error::parse(ln, "row weight exceeds the declared maximum"));
    }

    let mut from_cols = BitMatrix::zeros(m, n);
    for (c, &weight) in col_weights.iter().enumerate() {
        let (ln, list) = next("column index list")?;
        let idx: Vec<usize> = parse_numbers(ln, list)?.into_iter().filter(|&i| i != 0).collect();
        if idx.len() != weight {
            return Err(Error::parse(ln, format!("column {} lists {} entries, weight is {weight}", c + 1, idx.len())));
        }
        for i in idx {
            if i > m {
                return Err(Error::parse(ln, format!("row index {i} out of range 1..={m}")));
            }
            if from_cols.get(i - 1, c) {
                return Err(Error::parse(ln, format!("row index {i} repeated")));
            }
            from_cols.set(i - 1, c, true);
        }
    }

    let mut from_rows = BitMatrix::zeros(m, n);
    for (r, &weight) in row_weights.iter().enumerate() {
        let (ln, list) = next("row index list")?;
        let idx: Vec<usize> = parse_numbers(ln, list)?.into_iter().filter(|&i| i != 0).collect();
        if idx.len() != weight {
            return Err(Error::parse(ln, format!("row {} lists {} entries, weight is {weight}", r + 1, idx.len())));
        }
        for i in idx {
            if i > n {
                return Err(Error::parse(ln, format!("column index {i} out of range 1..={n}")));
            }
            if from_rows.get(r, i - 1) {
                return Err(Error::parse(ln, format!("column index {i} repeated")));
            }
            from_rows.set(r, i - 1, true);
        }
        if (0..n).any(|c| from_rows.get(r, c) != from_cols.get(r, c)) {
            return Err(Error::parse(ln, format!("row {} disagrees with the column lists", r + 1)));
        }
    }

    for (ln, rest) in lines {
        if !rest.is_empty() {
            return Err(Error::parse(ln, "trailing data after the row lists"));
        }
    }
    Ok(from_cols)
}

/// Writes `h` in alist form with variable-width index lists.
pub fn to_alist(h: &BitMatrix) -> String {
    let (m, n) = (h.rows(), h.cols());
    let ht = h.transpose();
    let col_w: Vec<usize> = (0..n).map(|c| ht.row_weight(c)).collect();
    let row_w: Vec<usize> = (0..m).map(|r| h.row_weight(r)).collect();
    let join = |v: &mut dyn Iterator<Item = usize>| {
        v.map(|x| x.to_string()).collect::<Vec<_>>().join(" ")
    };
    let mut out = format!(
        "{n} {m}\n{} {}\n",
        col_w.iter().max().copied().unwrap_or(0),
        row_w.iter().max().copied().unwrap_or(0)
    );
    out.push_str(&join(&mut col_w.iter().copied()));
    out.push('\n');
    out.push_str(&join(&mut row_w.iter().copied()));
    out.push('\n');
    for c in 0..n {
        out.push_str(&join(&mut ht.ones_in_row(c).map(|i| i + 1)));
        out.push('\n');
    }
    for r in 0..m {
        out.push_str(&join(&mut h.ones_in_row(r).map(|i| i + 1)));
        out.push('\n');
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::Rng;

    const SMALL_H: &str = "6 3\n2 3\n2 2 2 1 1 1\n3 3 3\n1 3\n1 2\n2 3\n1\n2\n3\n1 2 4\n2 3 5\n1 3 6\n";

    #[test]
    fn full_rate_code() {
        let code = LinearCode::random(8, 8, 1).unwrap();
        assert_eq!(gf2::rank(code.generator()), 8);
        assert_eq!(code.rate(), 1.0);
    }

    #[test]
    fn large_code_rate() {
        let code = LinearCode::random(544, 176, 2024).unwrap();
        assert_eq!((code.n(), code.k()), (544, 176));
        assert!((code.rate() - 0.3235).abs() < 5e-5);
    }

    #[test]
    fn random_code_is_deterministic() {
        assert_eq!(LinearCode::random(40, 13, 9).unwrap(), LinearCode::random(40, 13, 9).unwrap());
        assert_ne!(LinearCode::random(40, 13, 9).unwrap(), LinearCode::random(40, 13, 10).unwrap());
    }

    #[test]
    fn rejects_bad_dimensions() {
        assert!(LinearCode::random(4, 5, 0).is_err());
        assert!(LinearCode::random(4, 0, 0).is_err());
        let rank_deficient = BitMatrix::from_rows(&[[1u8, 1, 0], [1, 1, 0]]).unwrap();
        assert!(LinearCode::from_generator(rank_deficient).is_err());
    }

    #[test]
    fn alist_small_code() {
        let code = LinearCode::from_alist(SMALL_H).unwrap();
        assert_eq!((code.n(), code.k()), (6, 3));
        let h = code.parity_check().unwrap();
        assert!(h.multiply(&code.generator().transpose()).unwrap().is_zero());
    }

    #[test]
    fn alist_zero_row_reduces_rank() {
        // fourth check row is empty; n - rank(H) is still 3
        let text = "6 4\n2 3\n2 2 2 1 1 1\n3 3 3 0\n1 3\n1 2\n2 3\n1\n2\n3\n1 2 4\n2 3 5\n1 3 6\n\n";
        let code = LinearCode::from_alist(text).unwrap();
        assert_eq!(code.k(), 3);
    }

    #[test]
    fn alist_zero_padding_is_ignored() {
        let text = "6 3\n2 3\n2 2 2 1 1 1\n3 3 3\n1 3\n1 2\n2 3\n1 0\n2 0\n3 0\n1 2 4\n2 3 5\n1 3 6\n";
        assert_eq!(parse_alist(text).unwrap(), parse_alist(SMALL_H).unwrap());
    }

    #[test]
    fn alist_errors_name_the_line() {
        let truncated: String = SMALL_H.lines().take(7).map(|l| format!("{l}\n")).collect();
        assert!(matches!(parse_alist(&truncated), Err(Error::Parse { line: 8, .. })));

        let out_of_range = SMALL_H.replace("1 3\n1 2\n", "1 7\n1 2\n");
        assert!(matches!(parse_alist(&out_of_range), Err(Error::Parse { line: 5, .. })));

        let bad_header = SMALL_H.replacen("6 3", "6 x", 1);
        assert!(matches!(parse_alist(&bad_header), Err(Error::Parse { line: 1, .. })));

        let inconsistent = SMALL_H.replace("1 2 4\n", "1 2 5\n");
        assert!(matches!(parse_alist(&inconsistent), Err(Error::Parse { line: 11, .. })));

        let wrong_weight = SMALL_H.replacen("2 2 2 1 1 1", "2 2 2 1 1 2", 1);
        assert!(matches!(parse_alist(&wrong_weight), Err(Error::Parse { .. })));
    }

    #[test]
    fn alist_round_trip() {
        let h = parse_alist(SMALL_H).unwrap();
        assert_eq!(parse_alist(&to_alist(&h)).unwrap(), h);
    }

    #[test]
    fn encode_basics() {
        let code = LinearCode::random(12, 5, 4).unwrap();
        assert_eq!(code.encode(&[0; 5]).unwrap(), vec![0; 12]);
        assert!(code.encode(&[1; 4]).is_err());

        let ident = LinearCode::from_generator(BitMatrix::identity(6)).unwrap();
        let msg = [1, 0, 1, 1, 0, 1];
        assert_eq!(ident.encode(&msg).unwrap(), msg.to_vec());
    }

    #[test]
    fn codewords_lie_in_row_space() {
        let code = LinearCode::random(12, 5, 4).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        for _ in 0..20 {
            let msg: Vec<u8> = (0..5).map(|_| rng.random_range(0..2)).collect();
            let cw = code.encode(&msg).unwrap();
            let stacked = code.generator().vstack(&BitMatrix::from_rows(&[cw]).unwrap()).unwrap();
            assert_eq!(gf2::rank(&stacked), 5);
        }
    }

    #[test]
    fn encoding_is_injective() {
        for k in 1..=10 {
            let code = LinearCode::random(k + 3, k, k as u64).unwrap();
            let mut seen = std::collections::HashSet::new();
            for v in 0u32..(1 << k) {
                let msg: Vec<u8> = (0..k).map(|i| (v >> i & 1) as u8).collect();
                seen.insert(code.encode(&msg).unwrap());
            }
            assert_eq!(seen.len(), 1 << k);
        }
    }

    mod props {
        use super::*;
        use proptest::prelude::*;
        use rand::Rng;

        proptest! {
            #[test]
            fn encode_is_linear(seed in any::<u64>(), k in 1usize..12, extra in 0usize..20) {
                let code = LinearCode::random(k + extra, k, seed).unwrap();
                let mut rng = ChaCha8Rng::seed_from_u64(seed ^ 0xabcd);
                let a: Vec<u8> = (0..k).map(|_| rng.random_range(0..2)).collect();
                let b: Vec<u8> = (0..k).map(|_| rng.random_range(0..2)).collect();
                let sum: Vec<u8> = a.iter().zip(&b).map(|(x, y)| x ^ y).collect();
                let ca = code.encode(&a).unwrap();
                let cb = code.encode(&b).unwrap();
                let expected: Vec<u8> = ca.iter().zip(&cb).map(|(x, y)| x ^ y).collect();
                prop_assert_eq!(code.encode(&sum).unwrap(), expected);
            }

            #[test]
            fn alist_codewords_satisfy_checks(seed in any::<u64>(), m in 2usize..12, n in 4usize..24) {
                let mut rng = ChaCha8Rng::seed_from_u64(seed);
                let h = BitMatrix::random(m, n, &mut rng);
                prop_assume!(gf2::rank(&h) < n);
                let code = LinearCode::from_alist(&to_alist(&h)).unwrap();
                prop_assert_eq!(code.k(), n - gf2::rank(&h));
                let msg: Vec<u8> = (0..code.k()).map(|_| rng.random_range(0..2)).collect();
                let cw = BitMatrix::from_rows(&[code.encode(&msg).unwrap()]).unwrap();
                prop_assert!(h.multiply(&cw.transpose()).unwrap().is_zero());
            }
        }
    }
}
