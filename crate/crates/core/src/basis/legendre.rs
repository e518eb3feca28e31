//! Associated Legendre functions with the Condon-Shortley phase.

/// `P_l^m(x)` for `0 <= m <= l`, `|x| <= 1`, including the Condon-Shortley
/// factor `(-1)^m`.
///
/// Built from the standard stable recurrences
///
/// ```text
/// P_m^m     = (-1)^m (2m-1)!! (1-x^2)^{m/2}
/// P_{m+1}^m = x (2m+1) P_m^m
/// (l-m) P_l^m = x (2l-1) P_{l-1}^m - (l+m-1) P_{l-2}^m
/// ```
pub fn assoc_legendre(l: usize, m: usize, x: f64) -> f64 {
    assert!(m <= l, "order must not exceed degree");
    assert!((-1.0..=1.0).contains(&x), "argument outside [-1, 1]");
    let mut pmm = 1.0;
    if m > 0 {
        let somx2 = ((1.0 - x) * (1.0 + x)).sqrt();
        let mut fact = 1.0;
        for _ in 0..m {
            pmm *= -fact * somx2;
            fact += 2.0;
        }
    }
    if l == m {
        return pmm;
    }
    let mut pmmp1 = x * (2 * m + 1) as f64 * pmm;
    if l == m + 1 {
        return pmmp1;
    }
    let mut pll = 0.0;
    for ll in (m + 2)..=l {
        pll = (x * (2 * ll - 1) as f64 * pmmp1 - (ll + m - 1) as f64 * pmm) / (ll - m) as f64;
        pmm = pmmp1;
        pmmp1 = pll;
    }
    pll
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn low_order_closed_forms() {
        let xs: [f64; 6] = [-0.9, -0.4, 0.0, 0.3, 0.77, 1.0];
        for &x in &xs {
            let s = ((1.0 - x) * (1.0 + x)).sqrt();
            assert!((assoc_legendre(0, 0, x) - 1.0).abs() < 1e-14);
            assert!((assoc_legendre(1, 0, x) - x).abs() < 1e-14);
            assert!((assoc_legendre(1, 1, x) + s).abs() < 1e-14);
            assert!((assoc_legendre(2, 0, x) - 0.5 * (3.0 * x * x - 1.0)).abs() < 1e-14);
            assert!((assoc_legendre(2, 1, x) + 3.0 * x * s).abs() < 1e-13);
            assert!((assoc_legendre(2, 2, x) - 3.0 * (1.0 - x * x)).abs() < 1e-13);
            assert!(
                (assoc_legendre(3, 1, x) + 1.5 * (5.0 * x * x - 1.0) * s).abs() < 1e-13,
                "P_3^1 at {x}"
            );
        }
    }

    #[test]
    fn parity() {
        // P_l^m(-x) = (-1)^{l+m} P_l^m(x).
        for l in 0..=10usize {
            for m in 0..=l {
                for &x in &[0.1, 0.5, 0.95] {
                    let a = assoc_legendre(l, m, -x);
                    let b = assoc_legendre(l, m, x) * if (l + m) % 2 == 0 { 1.0 } else { -1.0 };
                    assert!((a - b).abs() < 1e-11 * b.abs().max(1.0), "l={l} m={m} x={x}");
                }
            }
        }
    }

    #[test]
    fn orthogonality_in_degree() {
        // \int_{-1}^{1} P_l^m P_{l'}^m dx = 2 (l+m)! / ((2l+1)(l-m)!) delta_{ll'}.
        let (nodes, weights) = crate::basis::quadrature::gauss_legendre(64);
        for m in 0..=3usize {
            for l in m..=6 {
                for lp in m..=6 {
                    let got: f64 = nodes
                        .iter()
                        .zip(&weights)
                        .map(|(&x, &w)| w * assoc_legendre(l, m, x) * assoc_legendre(lp, m, x))
                        .sum();
                    let want = if l == lp {
                        let mut r = 2.0 / (2 * l + 1) as f64;
                        for k in (l - m + 1)..=(l + m) {
                            r *= k as f64;
                        }
                        r
                    } else {
                        0.0
                    };
                    assert!(
                        (got - want).abs() < 1e-10 * want.abs().max(1.0),
                        "l={l} l'={lp} m={m}: {got} vs {want}"
                    );
                }
            }
        }
    }
}
