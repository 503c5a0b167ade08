//! Fourth-order exponential time differencing (Cox–Matthews) coefficients,
//! evaluated by contour averaging so that small `|λ dt|` does not suffer
//! cancellation.

use num_complex::Complex;

use crate::real::Real;

/// Points on the unit circle used for each contour mean.
pub const CONTOUR_POINTS: usize = 32;

/// `φ₁(z) = (eᶻ − 1)/z`, `φ₂(z) = (eᶻ − 1 − z)/z²`, `φ₃(z) = (eᶻ − 1 − z − z²/2)/z³`,
/// each taken as the mean of its closed form over a unit circle centred at `z`.
pub fn phi_functions<T: Real>(z: Complex<T>) -> [Complex<T>; 3] {
    let one = Complex::new(T::one(), T::zero());
    let half = T::lit(0.5);
    let mut acc = [Complex::new(T::zero(), T::zero()); 3];
    for j in 0..CONTOUR_POINTS {
        let theta = T::lit(2.0 * std::f64::consts::PI * (j as f64 + 0.5) / CONTOUR_POINTS as f64);
        let r = z + Complex::new(theta.cos(), theta.sin());
        let er = r.exp();
        let r2 = r * r;
        let r3 = r2 * r;
        acc[0] += (er - one) / r;
        acc[1] += (er - one - r) / r2;
        acc[2] += (er - one - r - r2 * half) / r3;
    }
    let m = T::lit(CONTOUR_POINTS as f64);
    acc.map(|a| a / m)
}

/// Per-mode coefficient tables for one ETDRK4 step of size `dt`.
#[derive(Clone, Debug, PartialEq)]
pub struct EtdCoefficients<T> {
    /// `e^{λ dt}`
    pub e: Vec<Complex<T>>,
    /// `e^{λ dt/2}`
    pub e_half: Vec<Complex<T>>,
    /// `dt/2 · φ₁(λ dt/2)`, weight of the nonlinear term in the half steps
    pub q: Vec<Complex<T>>,
    /// `dt (φ₁ − 3φ₂ + 4φ₃)`
    pub f1: Vec<Complex<T>>,
    /// `dt (φ₂ − 2φ₃)`
    pub f2: Vec<Complex<T>>,
    /// `dt (4φ₃ − φ₂)`
    pub f3: Vec<Complex<T>>,
}

pub fn etdrk_coefficients<T: Real>(linear_eigs: &[Complex<T>], dt: T) -> EtdCoefficients<T> {
    let n = linear_eigs.len();
    let mut c = EtdCoefficients {
        e: Vec::with_capacity(n),
        e_half: Vec::with_capacity(n),
        q: Vec::with_capacity(n),
        f1: Vec::with_capacity(n),
        f2: Vec::with_capacity(n),
        f3: Vec::with_capacity(n),
    };
    let half = T::lit(0.5);
    let (two, three, four) = (T::lit(2.0), T::lit(3.0), T::lit(4.0));
    for &lambda in linear_eigs {
        let z = lambda * dt;
        let [p1, p2, p3] = phi_functions(z);
        let [h1, _, _] = phi_functions(z * half);
        c.e.push(z.exp());
        c.e_half.push((z * half).exp());
        c.q.push(h1 * (dt * half));
        c.f1.push((p1 - p2 * three + p3 * four) * dt);
        c.f2.push((p2 - p3 * two) * dt);
        c.f3.push((p3 * four - p2) * dt);
    }
    c
}

/// One ETDRK4 step for `v' = Λv + N(v)` with diagonal `Λ`.
pub fn etdrk4_step<T: Real>(
    c: &EtdCoefficients<T>,
    v: &mut [Complex<T>],
    mut nonlinear: impl FnMut(&[Complex<T>]) -> Vec<Complex<T>>,
) {
    let two = T::lit(2.0);
    let n = v.len();
    let nv = nonlinear(v);
    let a: Vec<Complex<T>> = (0..n)
        .map(|k| c.e_half[k] * v[k] + c.q[k] * nv[k])
        .collect();
    let na = nonlinear(&a);
    let b: Vec<Complex<T>> = (0..n)
        .map(|k| c.e_half[k] * v[k] + c.q[k] * na[k])
        .collect();
    let nb = nonlinear(&b);
    let d: Vec<Complex<T>> = (0..n)
        .map(|k| c.e_half[k] * a[k] + c.q[k] * (nb[k] * two - nv[k]))
        .collect();
    let nd = nonlinear(&d);
    for k in 0..n {
        v[k] = c.e[k] * v[k] + c.f1[k] * nv[k] + c.f2[k] * (na[k] + nb[k]) * two + c.f3[k] * nd[k];
    }
}
