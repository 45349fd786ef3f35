use crate::linalg::Matrix;

/// Bits packed little-endian into 64-bit words: bit `i` lives in word
/// `i / 64` at position `i % 64`. Bits at or beyond `width` are always zero, so
/// derived equality, hashing and ordering (word-sequence lexicographic) are
/// canonical.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct BinaryCode {
    words: Vec<u64>,
    width: usize,
}

impl BinaryCode {
    pub fn zeros(width: usize) -> Self {
        BinaryCode {
            words: vec![0; width.div_ceil(64)],
            width,
        }
    }

    pub fn from_bits(bits: &[bool]) -> Self {
        let mut c = BinaryCode::zeros(bits.len());
        for (i, &b) in bits.iter().enumerate() {
            if b {
                c.words[i / 64] |= 1 << (i % 64);
            }
        }
        c
    }

    /// `bit_i = 1` iff `activation_i > threshold`.
    pub fn from_activations(row: &[f64], threshold: f64) -> Self {
        let mut c = BinaryCode::zeros(row.len());
        for (i, &a) in row.iter().enumerate() {
            if a > threshold {
                c.words[i / 64] |= 1 << (i % 64);
            }
        }
        c
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn words(&self) -> &[u64] {
        &self.words
    }

    pub fn bit(&self, i: usize) -> bool {
        assert!(i < self.width);
        self.words[i / 64] >> (i % 64) & 1 == 1
    }

    pub fn count_ones(&self) -> u32 {
        self.words.iter().map(|w| w.count_ones()).sum()
    }

    /// Bits as `'0'`/`'1'`, bit 0 first.
    pub fn to_bit_string(&self) -> String {
        (0..self.width)
            .map(|i| if self.bit(i) { '1' } else { '0' })
            .collect()
    }
}

/// One code per row, strict inequality against `threshold`.
pub fn binarize(activations: &Matrix, threshold: f64) -> Vec<BinaryCode> {
    assert!(threshold.is_finite(), "threshold must be finite");
    activations
        .row_iter()
        .map(|row| BinaryCode::from_activations(row, threshold))
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn strict_threshold() {
        let codes = binarize(&Matrix::from_rows(&[vec![0.1, 0.9, 0.5]]), 0.5);
        assert_eq!(codes[0].to_bit_string(), "010");
    }

    #[test]
    fn equal_activations_give_equal_codes() {
        let m = Matrix::filled_with(5, 7, |_, _| 0.3);
        for t in [0.0, 0.3, 0.5] {
            let codes = binarize(&m, t);
            assert!(codes.windows(2).all(|w| w[0] == w[1]));
        }
    }

    #[test]
    fn wide_codes_span_words() {
        let mut bits = vec![false; 130];
        bits[0] = true;
        bits[64] = true;
        bits[129] = true;
        let c = BinaryCode::from_bits(&bits);
        assert_eq!(c.words(), &[1, 1, 2]);
        assert_eq!(c.count_ones(), 3);
        assert!(c.bit(129) && !c.bit(128));
    }

    proptest! {
        #[test]
        fn rebinarizing_binary_rows_is_identity(bits in proptest::collection::vec(any::<bool>(), 1..150)) {
            let row: Vec<f64> = bits.iter().map(|&b| if b { 1.0 } else { 0.0 }).collect();
            let m = Matrix::from_rows(&[row]);
            let c = &binarize(&m, 0.5)[0];
            prop_assert_eq!(c, &BinaryCode::from_bits(&bits));
            let again: Vec<f64> = (0..c.width()).map(|i| if c.bit(i) { 1.0 } else { 0.0 }).collect();
            prop_assert_eq!(&binarize(&Matrix::from_rows(&[again]), 0.5)[0], c);
        }
    }
}
