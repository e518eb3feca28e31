//! Spherical and cylindrical Bessel functions of the first kind, plus zeros
//! of the spherical ones.

/// Spherical Bessel function `j_l(x)` for a single order.
pub fn spherical_jn(l: usize, x: f64) -> f64 {
    spherical_jn_all(l, x)[l]
}

/// Spherical Bessel functions `j_0(x) .. j_lmax(x)`.
///
/// Uses the closed forms for `j_0`, `j_1` and Miller's downward recurrence
/// `j_{k-1} = (2k+1)/x j_k - j_{k+1}` normalized against `j_0`; the upward
/// recurrence is unstable for `x < l`.
pub fn spherical_jn_all(lmax: usize, x: f64) -> Vec<f64> {
    assert!(x >= 0.0, "argument must be non-negative");
    let mut out = vec![0.0; lmax + 1];
    if x == 0.0 {
        out[0] = 1.0;
        return out;
    }
    if x < 1e-4 {
        // Series j_l(x) = x^l / (2l+1)!! (1 - x^2/(2(2l+3)) + ...), accurate
        // to ~1e-16 for tiny arguments where the recurrences lose digits.
        for l in 0..=lmax {
            let x2 = x * x;
            out[l] = x.powi(l as i32) / double_factorial(2 * l + 1)
                * (1.0 - x2 / (2.0 * (2 * l + 3) as f64)
                    + x2 * x2 / (8.0 * (2 * l + 3) as f64 * (2 * l + 5) as f64));
        }
        return out;
    }
    let j0 = x.sin() / x;
    out[0] = j0;
    if lmax == 0 {
        return out;
    }
    let j1 = x.sin() / (x * x) - x.cos() / x;
    out[1] = j1;
    if lmax == 1 {
        return out;
    }
    if x > lmax as f64 {
        // Upward recurrence is stable when x dominates the order.
        for l in 1..lmax {
            out[l + 1] = (2 * l + 1) as f64 / x * out[l] - out[l - 1];
        }
        return out;
    }
    // Downward recurrence from a start order well above both lmax and x.
    let start = lmax + (x as usize) + 32;
    let mut jp = 0.0f64;
    let mut jc = 1e-300f64;
    let mut tmp = vec![0.0; lmax + 1];
    for k in (1..=start).rev() {
        let jm = (2 * k + 1) as f64 / x * jc - jp;
        jp = jc;
        jc = jm;
        if k - 1 <= lmax {
            tmp[k - 1] = jc;
        }
        if jc.abs() > 1e250 {
            jp /= 1e250;
            jc /= 1e250;
            for v in tmp.iter_mut() {
                *v /= 1e250;
            }
        }
    }
    let scale = j0 / tmp[0];
    for l in 0..=lmax {
        out[l] = tmp[l] * scale;
    }
    out
}

fn double_factorial(n: usize) -> f64 {
    let mut p = 1.0;
    let mut k = n as i64;
    while k > 1 {
        p *= k as f64;
        k -= 2;
    }
    p
}

/// Cylindrical Bessel functions `J_0(x) .. J_nmax(x)` by Miller's downward
/// recurrence with the normalization `J_0 + 2 sum_{k even} J_k = 1`.
pub fn bessel_jn_all(nmax: usize, x: f64) -> Vec<f64> {
    assert!(x >= 0.0, "argument must be non-negative");
    let mut out = vec![0.0; nmax + 1];
    if x == 0.0 {
        out[0] = 1.0;
        return out;
    }
    let start = {
        let base = nmax.max(x.ceil() as usize) + 40;
        base + (base % 2) // even start keeps the normalization sum aligned
    };
    let mut jp = 0.0f64;
    let mut jc = 1e-300f64;
    let mut norm = 0.0f64;
    let mut tmp = vec![0.0; nmax + 1];
    for k in (1..=start).rev() {
        let jm = 2.0 * k as f64 / x * jc - jp;
        jp = jc;
        jc = jm;
        if k - 1 <= nmax {
            tmp[k - 1] = jc;
        }
        if (k - 1) % 2 == 0 && k - 1 > 0 {
            norm += 2.0 * jc;
        }
        if jc.abs() > 1e250 {
            jp /= 1e250;
            jc /= 1e250;
            norm /= 1e250;
            for v in tmp.iter_mut() {
                *v /= 1e250;
            }
        }
    }
    norm += jc; // J_0 term
    for n in 0..=nmax {
        out[n] = tmp[n] / norm;
    }
    out
}

/// `J_n(x)` for a single integer order.
pub fn bessel_jn(n: usize, x: f64) -> f64 {
    bessel_jn_all(n, x)[n]
}

/// The s-th positive zero `u_{l,s}` of the spherical Bessel function `j_l`
/// (`s` counts from 1).
///
/// Zeros of consecutive orders interlace, `u_{l,s} < u_{l+1,s} < u_{l,s+1}`,
/// so starting from the exact order-0 zeros `s pi` each higher order is
/// obtained by bisection inside a bracket that is guaranteed to contain
/// exactly one root.
pub fn spherical_bessel_zero(l: usize, s: usize) -> f64 {
    assert!(s >= 1, "zero index counts from 1");
    spherical_bessel_zeros_table(l, s)[l][s - 1]
}

/// Table of zeros `u_{l,s}` for `l = 0..=lmax`, `s = 1..=smax`, built row by
/// row through the interlacing brackets.
pub fn spherical_bessel_zeros_table(lmax: usize, smax: usize) -> Vec<Vec<f64>> {
    let need = smax + lmax;
    let mut rows: Vec<Vec<f64>> = Vec::with_capacity(lmax + 1);
    let row0: Vec<f64> = (1..=need).map(|s| s as f64 * std::f64::consts::PI).collect();
    rows.push(row0);
    for l in 1..=lmax {
        let prev = &rows[l - 1];
        let count = need - l;
        let mut row = Vec::with_capacity(count);
        for s in 0..count {
            row.push(bisect_zero(l, prev[s], prev[s + 1]));
        }
        rows.push(row);
    }
    for (l, row) in rows.iter_mut().enumerate() {
        row.truncate(smax.min(need - l));
    }
    rows
}

fn bisect_zero(l: usize, mut a: f64, mut b: f64) -> f64 {
    let fa = spherical_jn(l, a);
    debug_assert!(fa * spherical_jn(l, b) <= 0.0);
    let mut sa = fa.signum();
    for _ in 0..200 {
        let m = 0.5 * (a + b);
        let fm = spherical_jn(l, m);
        if fm == 0.0 {
            return m;
        }
        if fm.signum() == sa {
            a = m;
        } else {
            b = m;
        }
        if b - a < 1e-15 * b {
            break;
        }
        sa = spherical_jn(l, a).signum();
    }
    0.5 * (a + b)
}
