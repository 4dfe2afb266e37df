//! Quadrature on the reference triangle `{(ξ, η): ξ, η ≥ 0, ξ + η ≤ 1}`.

use crate::scalar::Scalar;

/// Points in reference coordinates; weights sum to the reference area 1/2.
#[derive(Clone, Debug)]
pub struct TriangleRule<T> {
    pub points: Vec<[T; 2]>,
    pub weights: Vec<T>,
    /// Total polynomial degree integrated exactly.
    pub degree: usize,
}

impl<T: Scalar> TriangleRule<T> {
    /// Symmetric 7-point rule exact for polynomials of degree 5.
    pub fn degree5() -> Self {
        let s15 = T::lit(15.0).sqrt();
        let c21 = T::lit(21.0);
        let third = T::one() / T::lit(3.0);
        let b1 = (T::lit(6.0) + s15) / c21;
        let a1 = T::one() - b1 - b1;
        let b2 = (T::lit(6.0) - s15) / c21;
        let a2 = T::one() - b2 - b2;
        let w0 = T::lit(9.0) / T::lit(40.0);
        let w1 = (T::lit(155.0) + s15) / T::lit(1200.0);
        let w2 = (T::lit(155.0) - s15) / T::lit(1200.0);
        let half = T::lit(0.5);
        // Barycentric (L0, L1, L2) -> reference (ξ, η) = (L1, L2).
        let mut points = vec![[third, third]];
        let mut weights = vec![w0 * half];
        for (a, b, w) in [(a1, b1, w1), (a2, b2, w2)] {
            for p in [[b, b], [a, b], [b, a]] {
                points.push(p);
                weights.push(w * half);
            }
        }
        Self {
            points,
            weights,
            degree: 5,
        }
    }

    /// Collapsed (Duffy) tensor Gauss-Legendre rule with `n` points per
    /// direction, exact to degree `2n - 2`.
    pub fn collapsed_gauss(n: usize) -> Self {
        let (x, w) = gauss_legendre_unit(n);
        let mut points = Vec::with_capacity(n * n);
        let mut weights = Vec::with_capacity(n * n);
        for i in 0..n {
            for j in 0..n {
                let u = x[i];
                let v = x[j];
                // (u, v) in the unit square -> (ξ, η) = (u, v (1 - u)), Jacobian 1 - u.
                points.push([u, v * (T::one() - u)]);
                weights.push(w[i] * w[j] * (T::one() - u));
            }
        }
        Self {
            points,
            weights,
            degree: 2 * n - 2,
        }
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }
}

/// Gauss-Legendre nodes and weights on `[0, 1]`.
pub fn gauss_legendre_unit<T: Scalar>(n: usize) -> (Vec<T>, Vec<T>) {
    assert!(n >= 1);
    let mut xs = vec![T::zero(); n];
    let mut ws = vec![T::zero(); n];
    let two = T::lit(2.0);
    let half = T::lit(0.5);
    for i in 0..(n + 1) / 2 {
        // Chebyshev initial guess, then Newton on P_n.
        let mut z = (T::PI() * (T::from_count(i) + T::lit(0.75)) / (T::from_count(n) + half)).cos();
        let mut dp = T::one();
        for _ in 0..100 {
            let (mut p0, mut p1) = (T::one(), z);
            for k in 2..=n {
                let kf = T::from_count(k);
                let p2 = ((two * kf - T::one()) * z * p1 - (kf - T::one()) * p0) / kf;
                p0 = p1;
                p1 = p2;
            }
            let pn = if n == 1 { z } else { p1 };
            let pnm1 = if n == 1 { T::one() } else { p0 };
            dp = T::from_count(n) * (z * pn - pnm1) / (z * z - T::one());
            let dz = pn / dp;
            z -= dz;
            if dz.abs() <= T::epsilon() {
                break;
            }
        }
        let w = two / ((T::one() - z * z) * dp * dp);
        // Map [-1, 1] -> [0, 1].
        xs[i] = half * (T::one() - z);
        xs[n - 1 - i] = half * (T::one() + z);
        ws[i] = half * w;
        ws[n - 1 - i] = half * w;
    }
    (xs, ws)
}
