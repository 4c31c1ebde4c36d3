use crate::error::{Error, Result};

/// Balanced class weights `(n / 2 n_pos, n / 2 n_neg)`.
pub fn class_weights(labels: &[bool]) -> Result<(f64, f64)> {
    let n = labels.len();
    let pos = labels.iter().filter(|&&y| y).count();
    let neg = n - pos;
    if pos == 0 || neg == 0 {
        return Err(Error::SingleClass);
    }
    let n = n as f64;
    Ok((n / (2.0 * pos as f64), n / (2.0 * neg as f64)))
}

#[cfg(test)]
mod tests {
    use super::*;
    use alloc::vec::Vec;
    use proptest::prelude::*;

    #[test]
    fn balanced_labels_get_unit_weights() {
        let y: Vec<bool> = (0..100).map(|i| i % 2 == 0).collect();
        assert_eq!(class_weights(&y).unwrap(), (1.0, 1.0));
    }

    #[test]
    fn imbalanced_example() {
        let y: Vec<bool> = (0..1000).map(|i| i < 15).collect();
        let (wp, wn) = class_weights(&y).unwrap();
        assert!((wp - 1000.0 / 30.0).abs() < 1e-12);
        assert!((wn - 1000.0 / 1970.0).abs() < 1e-12);
        assert!((wp - 33.33).abs() < 0.01 && (wn - 0.5076).abs() < 1e-4);
    }

    #[test]
    fn single_class_is_an_error() {
        assert_eq!(class_weights(&[true, true]).unwrap_err(), Error::SingleClass);
        assert_eq!(class_weights(&[]).unwrap_err(), Error::SingleClass);
    }

    proptest! {
        #[test]
        fn weights_reweight_to_total(pos in 1usize..500, neg in 1usize..500) {
            let mut y = alloc::vec![true; pos];
            y.extend(core::iter::repeat_n(false, neg));
            let (wp, wn) = class_weights(&y).unwrap();
            prop_assert!((wp * pos as f64 + wn * neg as f64 - (pos + neg) as f64).abs() < 1e-9);
        }
    }
}
