//! Finite-difference weights on arbitrary nodes.
use crate::error::{Error, Result};

/// Weights `w` with `f^(order)(x0) ≈ Σ w_j f(nodes_j)`, by Fornberg's
/// recursion. The approximation has the highest order the nodes allow.
pub fn fornberg_weights(x0: f64, nodes: &[f64], order: usize) -> Result<Vec<f64>> {
    let n = nodes.len();
    if n <= order {
        return Err(Error::invalid(format!(
            "{n} nodes cannot resolve derivative order {order}"
        )));
    }
    // c[j][k]: weight of node j for derivative k
    let mut c = vec![vec![0.0; order + 1]; n];
    c[0][0] = 1.0;
    let mut c1 = 1.0;
    let mut c4 = nodes[0] - x0;
    for i in 1..n {
        let mn = i.min(order);
        let mut c2 = 1.0;
        let c5 = c4;
        c4 = nodes[i] - x0;
        for j in 0..i {
            let c3 = nodes[i] - nodes[j];
            if c3 == 0.0 {
                return Err(Error::invalid("stencil nodes must be distinct"));
            }
            c2 *= c3;
            if j == i - 1 {
                for k in (1..=mn).rev() {
                    c[i][k] = c1 * (k as f64 * c[i - 1][k - 1] - c5 * c[i - 1][k]) / c2;
                }
                c[i][0] = -c1 * c5 * c[i - 1][0] / c2;
            }
            for k in (1..=mn).rev() {
                c[j][k] = (c4 * c[j][k] - k as f64 * c[j][k - 1]) / c3;
            }
            c[j][0] = c4 * c[j][0] / c3;
        }
        c1 = c2;
    }
    Ok(c.into_iter().map(|row| row[order]).collect())
}

/// Weights on the integer offsets `start..start + width` for spacing `h`.
pub fn offset_weights(start: isize, width: usize, order: usize, h: f64) -> Result<Vec<f64>> {
    let nodes: Vec<f64> = (0..width as isize).map(|k| (start + k) as f64).collect();
    let w = fornberg_weights(0.0, &nodes, order)?;
    let scale = h.powi(order as i32);
    Ok(w.into_iter().map(|v| v / scale).collect())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn classic_central_stencils() {
        let w = fornberg_weights(0.0, &[-1.0, 0.0, 1.0], 1).unwrap();
        assert_eq!(w, vec![-0.5, 0.0, 0.5]);
        let w = fornberg_weights(0.0, &[-1.0, 0.0, 1.0], 2).unwrap();
        assert_eq!(w, vec![1.0, -2.0, 1.0]);
        let w = fornberg_weights(0.0, &[-2.0, -1.0, 0.0, 1.0, 2.0], 2).unwrap();
        let expect = [
            -1.0 / 12.0,
            16.0 / 12.0,
            -30.0 / 12.0,
            16.0 / 12.0,
            -1.0 / 12.0,
        ];
        for (a, b) in w.iter().zip(expect) {
            assert!((a - b).abs() < 1e-14);
        }
    }

    #[test]
    fn one_sided_first_derivative() {
        let w = fornberg_weights(0.0, &[0.0, 1.0, 2.0], 1).unwrap();
        for (a, b) in w.iter().zip([-1.5, 2.0, -0.5]) {
            assert!((a - b).abs() < 1e-14);
        }
    }

    #[test]
    fn exact_on_polynomials_of_stencil_degree() {
        // nine nodes integrate degree-8 polynomials exactly for any order
        let nodes: Vec<f64> = (0..9).map(|k| k as f64 - 1.0).collect();
        for order in 0..=4 {
            let w = fornberg_weights(0.3, &nodes, order).unwrap();
            for deg in 0..=8i32 {
                let approx: f64 = w.iter().zip(&nodes).map(|(w, x)| w * x.powi(deg)).sum();
                let exact = if deg < order as i32 {
                    0.0
                } else {
                    let falling: f64 = (0..order).map(|i| (deg - i as i32) as f64).product();
                    falling * 0.3f64.powi(deg - order as i32)
                };
                assert!(
                    (approx - exact).abs() < 1e-9 * (1.0 + exact.abs()),
                    "order {order} degree {deg}"
                );
            }
        }
    }

    #[test]
    fn too_few_nodes() {
        assert!(fornberg_weights(0.0, &[0.0, 1.0], 2).is_err());
    }
}
