use ndarray::Array2;

use crate::datastore::ParticleEnsemble;
use crate::error::{Error, Result};
use crate::real::Real;

/// Raw moments `M_k = (1/R) Σ x_p^k`, `k = 0..=order`, of the particles in
/// one box, each position rescaled to `[0, 1]` across the box.
pub fn box_moments<T: Real>(
    positions: &[T],
    bounds: (T, T),
    resolution: T,
    order: usize,
) -> Result<Vec<T>> {
    if order < 1 {
        return Err(Error::invalid("moment order must be at least 1"));
    }
    let (lo, hi) = bounds;
    if !(hi > lo) {
        return Err(Error::invalid("box bounds must satisfy lo < hi"));
    }
    let width = hi - lo;
    let mut m = vec![T::zero(); order + 1];
    for &p in positions {
        if p < lo || p > hi {
            return Err(Error::invalid(format!(
                "particle at {p} outside box [{lo}, {hi}]"
            )));
        }
        let x = (p - lo) / width;
        let mut power = T::one();
        for mk in m.iter_mut() {
            *mk += power;
            power *= x;
        }
    }
    let inv_r = T::one() / resolution;
    m.iter_mut().for_each(|v| *v *= inv_r);
    Ok(m)
}

/// Moment vectors of all `n_boxes` equal boxes of an ensemble, one row per box.
pub fn ensemble_moments<T: Real>(
    ensemble: &ParticleEnsemble<T>,
    n_boxes: usize,
    order: usize,
) -> Result<Array2<T>> {
    if order < 1 || n_boxes == 0 {
        return Err(Error::invalid("need order >= 1 and at least one box"));
    }
    let scale = T::lit(n_boxes as f64) / ensemble.domain_length;
    let mut out = Array2::zeros((n_boxes, order + 1));
    for &p in &ensemble.positions {
        let s = p * scale;
        let b = s.floor().to_usize().unwrap_or(0).min(n_boxes - 1);
        let x = s - T::lit(b as f64);
        let mut row = out.row_mut(b);
        let mut power = T::one();
        for mk in row.iter_mut() {
            *mk += power;
            power *= x;
        }
    }
    out.mapv_inplace(|v| v / ensemble.resolution);
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn empty_box_is_zero() {
        assert_eq!(
            box_moments::<f64>(&[], (0.0, 1.0), 1.0, 4).unwrap(),
            vec![0.0; 5]
        );
    }

    #[test]
    fn right_edge_particle_gives_ones() {
        assert_eq!(
            box_moments(&[0.5], (0.25, 0.5), 1.0, 3).unwrap(),
            vec![1.0; 4]
        );
    }

    #[test]
    fn ensemble_rows_match_single_box() {
        let ens = ParticleEnsemble::new(vec![0.1, 0.2, 1.1, 1.7, 3.0], 2.0, 4.0).unwrap();
        let all = ensemble_moments(&ens, 4, 3).unwrap();
        for b in 0..4 {
            let lo = b as f64;
            let inside: Vec<f64> = ens
                .positions
                .iter()
                .copied()
                .filter(|&p| p >= lo && p < lo + 1.0)
                .collect();
            let single = box_moments(&inside, (lo, lo + 1.0), 2.0, 3).unwrap();
            for (a, e) in all.row(b).iter().zip(&single) {
                assert!((a - e).abs() < 1e-15);
            }
        }
    }

    #[test]
    fn rejects_outside_particle() {
        assert!(box_moments(&[2.0], (0.0, 1.0), 1.0, 2).is_err());
    }
}
