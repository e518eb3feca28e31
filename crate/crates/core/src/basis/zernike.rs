//! Zernike radial polynomials, the expansion basis for the disk prolate
//! radial functions.

/// Values of the Zernike radial polynomials `R^N_{N+2j}(r)` for
/// `j = 0..count` at a single radius, via
///
/// ```text
/// R^N_{N+2j}(r) = (-1)^j r^N P_j^{(N,0)}(1 - 2 r^2)
/// ```
///
/// and the three-term Jacobi recurrence. They are orthogonal on [0, 1] with
/// weight `r`: the L2 norm of `R^N_{N+2j}` is `1 / sqrt(2 (N + 2j + 1))`.
pub fn zernike_radial_all(n_ang: usize, count: usize, r: f64) -> Vec<f64> {
    let x = 1.0 - 2.0 * r * r;
    let jac = jacobi_all(n_ang as f64, count, x);
    let rn = r.powi(n_ang as i32);
    (0..count)
        .map(|j| {
            let sign = if j % 2 == 0 { 1.0 } else { -1.0 };
            sign * rn * jac[j]
        })
        .collect()
}

/// Jacobi polynomials `P_j^{(alpha, 0)}(x)` for `j = 0..count`.
fn jacobi_all(alpha: f64, count: usize, x: f64) -> Vec<f64> {
    let mut out = Vec::with_capacity(count);
    if count == 0 {
        return out;
    }
    out.push(1.0);
    if count == 1 {
        return out;
    }
    out.push(((alpha + 2.0) * x + alpha) / 2.0);
    for j in 2..count {
        let jf = j as f64;
        let a1 = 2.0 * jf * (jf + alpha) * (2.0 * jf + alpha - 2.0);
        let a2 = 2.0 * jf + alpha - 1.0;
        let a3 = (2.0 * jf + alpha) * (2.0 * jf + alpha - 2.0);
        let a4 = alpha * alpha;
        let a5 = 2.0 * (jf + alpha - 1.0) * (jf - 1.0) * (2.0 * jf + alpha);
        let p = (a2 * (a3 * x + a4) * out[j - 1] - a5 * out[j - 2]) / a1;
        out.push(p);
    }
    out
}
