//! Fourier shell correlation between two gridded volumes.

use crate::error::{Error, Result};
use crate::fft::{forward_real_3, Fft3};
use ndarray::Array3;

/// One integer-radius shell of the correlation curve.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FscShell {
    pub shell: usize,
    /// Shell radius in cycles per pixel.
    pub frequency: f64,
    pub value: f64,
}

/// Shell-by-shell correlation; shells whose bins carry no energy in either
/// volume are omitted.
#[derive(Debug, Clone)]
pub struct FscCurve {
    pub shells: Vec<FscShell>,
    /// First listed shell whose correlation drops below 0.5; `None` when the
    /// curve stays at or above 0.5 throughout.
    pub resolution_shell: Option<usize>,
}

impl FscCurve {
    /// Highest shell index carrying axis-aligned frequencies for side `l`.
    pub fn nyquist_shell(l: usize) -> usize {
        l / 2
    }

    pub fn value_at(&self, shell: usize) -> Option<f64> {
        self.shells.iter().find(|s| s.shell == shell).map(|s| s.value)
    }

    /// True when every listed shell up to and including `shell` stays at or
    /// above 0.5.
    pub fn resolved_through(&self, shell: usize) -> bool {
        match self.resolution_shell {
            Some(s) => s > shell,
            None => true,
        }
    }

    /// `shell,frequency,correlation` rows with a header.
    pub fn to_csv(&self) -> String {
        let mut out = String::from("shell,frequency,correlation\n");
        for s in &self.shells {
            out.push_str(&format!("{},{:.6},{:.6}\n", s.shell, s.frequency, s.value));
        }
        out
    }
}

fn signed_index(i: usize, l: usize) -> i64 {
    if i <= l / 2 {
        i as i64
    } else {
        i as i64 - l as i64
    }
}

/// Normalized per-shell correlation of the volumes' DFTs, with integer
/// shells `round(|frequency index|)`.
pub fn fsc(a: &Array3<f64>, b: &Array3<f64>) -> Result<FscCurve> {
    let (l, m, n) = a.dim();
    if l != m || l != n {
        return Err(Error::validation(format!("volume must be cubic, got {:?}", a.dim())));
    }
    if b.dim() != a.dim() {
        return Err(Error::validation(format!(
            "volume sizes differ: {:?} vs {:?}",
            a.dim(),
            b.dim()
        )));
    }
    if l == 0 {
        return Err(Error::validation("empty volume".to_string()));
    }
    let fft = Fft3::new(l);
    let fa = forward_real_3(&fft, a);
    let fb = forward_real_3(&fft, b);

    let h = l / 2;
    let max_shell = ((3.0f64).sqrt() * h as f64).round() as usize + 1;
    let mut num = vec![0.0f64; max_shell + 1];
    let mut da = vec![0.0f64; max_shell + 1];
    let mut db = vec![0.0f64; max_shell + 1];
    for ((i, j, k), va) in fa.indexed_iter() {
        let (x, y, z) = (signed_index(i, l), signed_index(j, l), signed_index(k, l));
        let r = ((x * x + y * y + z * z) as f64).sqrt();
        let shell = r.round() as usize;
        let vb = fb[(i, j, k)];
        num[shell] += (va * vb.conj()).re;
        da[shell] += va.norm_sqr();
        db[shell] += vb.norm_sqr();
    }

    let mut shells = Vec::new();
    let mut resolution_shell = None;
    for s in 0..=max_shell {
        let den = (da[s] * db[s]).sqrt();
        if den == 0.0 {
            continue;
        }
        let value = (num[s] / den).clamp(-1.0, 1.0);
        if resolution_shell.is_none() && value < 0.5 {
            resolution_shell = Some(s);
        }
        shells.push(FscShell { shell: s, frequency: s as f64 / l as f64, value });
    }
    Ok(FscCurve { shells, resolution_shell })
}
