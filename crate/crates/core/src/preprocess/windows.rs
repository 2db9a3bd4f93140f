//! Symmetric one-dimensional tapering windows.

use std::f64::consts::PI;

use num_complex::Complex64;
use rustfft::FftPlanner;
use serde::{Deserialize, Serialize};

use crate::error::{invalid, Result};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Window {
    Tukey { taper: f64 },
    Taylor { nbar: usize, sidelobe_db: f64 },
    Chebyshev { attenuation_db: f64 },
    Blackman,
    FlatTop,
    /// Half-period sine.
    Cosine,
    Hann,
    Rectangular,
}

impl Window {
    /// Looks up a window by name with its default shape parameters.
    pub fn from_name(name: &str) -> Result<Self> {
        let w = match name.to_ascii_lowercase().replace(['-', '_', ' '], "").as_str() {
            "tukey" => Window::Tukey { taper: 0.5 },
            "taylor" => Window::Taylor {
                nbar: 4,
                sidelobe_db: 30.0,
            },
            "chebyshev" | "chebwin" => Window::Chebyshev {
                attenuation_db: 100.0,
            },
            "blackman" => Window::Blackman,
            "flattop" => Window::FlatTop,
            "cosine" => Window::Cosine,
            "hann" => Window::Hann,
            "rectangular" | "rect" | "boxcar" => Window::Rectangular,
            _ => return Err(invalid(format!("unknown window `{name}`"))),
        };
        Ok(w)
    }

    pub fn name(&self) -> &'static str {
        match self {
            Window::Tukey { .. } => "tukey",
            Window::Taylor { .. } => "taylor",
            Window::Chebyshev { .. } => "chebyshev",
            Window::Blackman => "blackman",
            Window::FlatTop => "flattop",
            Window::Cosine => "cosine",
            Window::Hann => "hann",
            Window::Rectangular => "rectangular",
        }
    }

    pub fn samples(&self, len: usize) -> Result<Vec<f64>> {
        if len < 2 {
            return Err(invalid(format!("window length must be >= 2, got {len}")));
        }
        let m = len as f64;
        let w = match *self {
            Window::Rectangular => vec![1.0; len],
            Window::Hann => cosine_sum(len, &[0.5, 0.5]),
            Window::Blackman => cosine_sum(len, &[0.42, 0.5, 0.08]),
            Window::FlatTop => cosine_sum(
                len,
                &[
                    0.215_578_95,
                    0.416_631_58,
                    0.277_263_158,
                    0.083_578_947,
                    0.006_947_368,
                ],
            ),
            Window::Cosine => (0..len)
                .map(|n| (PI * (n as f64 + 0.5) / m).sin())
                .collect(),
            Window::Tukey { taper } => tukey(len, taper)?,
            Window::Taylor { nbar, sidelobe_db } => taylor(len, nbar, sidelobe_db)?,
            Window::Chebyshev { attenuation_db } => chebyshev(len, attenuation_db)?,
        };
        Ok(w)
    }
}

/// `make_window` by name with default parameters.
pub fn make_window(name: &str, len: usize) -> Result<Vec<f64>> {
    Window::from_name(name)?.samples(len)
}

fn cosine_sum(len: usize, coeffs: &[f64]) -> Vec<f64> {
    let denom = (len - 1) as f64;
    (0..len)
        .map(|n| {
            let x = 2.0 * PI * n as f64 / denom;
            coeffs
                .iter()
                .enumerate()
                .map(|(i, a)| {
                    let sign = if i % 2 == 0 { 1.0 } else { -1.0 };
                    sign * a * (i as f64 * x).cos()
                })
                .sum()
        })
        .collect()
}

fn tukey(len: usize, taper: f64) -> Result<Vec<f64>> {
    if !(0.0..=1.0).contains(&taper) {
        return Err(invalid(format!("tukey taper must lie in [0, 1], got {taper}")));
    }
    if taper == 0.0 {
        return Ok(vec![1.0; len]);
    }
    let denom = (len - 1) as f64;
    let width = (taper * denom / 2.0).floor() as usize;
    Ok((0..len)
        .map(|n| {
            let x = n as f64;
            if n <= width {
                0.5 * (1.0 + (PI * (-1.0 + 2.0 * x / taper / denom)).cos())
            } else if n < len - width - 1 {
                1.0
            } else {
                0.5 * (1.0 + (PI * (-2.0 / taper + 1.0 + 2.0 * x / taper / denom)).cos())
            }
        })
        .collect())
}

fn taylor(len: usize, nbar: usize, sidelobe_db: f64) -> Result<Vec<f64>> {
    if nbar < 1 || !(sidelobe_db > 0.0) {
        return Err(invalid("taylor window needs nbar >= 1 and a positive sidelobe level"));
    }
    let m = len as f64;
    let b = 10f64.powf(sidelobe_db / 20.0);
    let a = b.acosh() / PI;
    let nb = nbar as f64;
    let s2 = nb * nb / (a * a + (nb - 0.5).powi(2));
    let ma: Vec<f64> = (1..nbar).map(|i| i as f64).collect();

    let fm: Vec<f64> = ma
        .iter()
        .enumerate()
        .map(|(mi, &mm)| {
            let sign = if mi % 2 == 0 { 1.0 } else { -1.0 };
            let m2 = mm * mm;
            let numer: f64 = ma
                .iter()
                .map(|&x| 1.0 - m2 / s2 / (a * a + (x - 0.5).powi(2)))
                .product();
            let denom: f64 = ma
                .iter()
                .enumerate()
                .filter(|&(j, _)| j != mi)
                .map(|(_, &x)| 1.0 - m2 / (x * x))
                .product();
            sign * numer / (2.0 * denom)
        })
        .collect();

    let eval = |n: f64| -> f64 {
        1.0 + 2.0
            * fm.iter()
                .zip(&ma)
                .map(|(f, &mm)| f * (2.0 * PI * mm * (n - m / 2.0 + 0.5) / m).cos())
                .sum::<f64>()
    };
    let scale = 1.0 / eval((m - 1.0) / 2.0);
    Ok((0..len).map(|n| eval(n as f64) * scale).collect())
}

/// Dolph-Chebyshev window via the inverse DFT of the Chebyshev polynomial
/// sampled on the unit circle.
fn chebyshev(len: usize, attenuation_db: f64) -> Result<Vec<f64>> {
    if !(attenuation_db > 0.0) {
        return Err(invalid("chebyshev attenuation must be positive"));
    }
    let m = len as f64;
    let order = m - 1.0;
    let beta = ((10f64.powf(attenuation_db / 20.0)).acosh() / order).cosh();
    let odd = len % 2 == 1;
    let mut p: Vec<Complex64> = (0..len)
        .map(|k| {
            let x = beta * (PI * k as f64 / m).cos();
            let v = if x > 1.0 {
                (order * x.acosh()).cosh()
            } else if x < -1.0 {
                let sign = if odd { 1.0 } else { -1.0 };
                sign * (order * (-x).acosh()).cosh()
            } else {
                (order * x.acos()).cos()
            };
            let mut z = Complex64::new(v, 0.0);
            if !odd {
                z *= Complex64::from_polar(1.0, PI / m * k as f64);
            }
            z
        })
        .collect();
    FftPlanner::new().plan_fft_forward(len).process(&mut p);
    let re: Vec<f64> = p.iter().map(|z| z.re).collect();

    let w: Vec<f64> = if odd {
        let n = (len + 1) / 2;
        re[1..n].iter().rev().chain(&re[..n]).copied().collect()
    } else {
        let n = len / 2 + 1;
        re[1..n].iter().rev().chain(&re[1..n]).copied().collect()
    };
    let peak = w.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    Ok(w.into_iter().map(|v| v / peak).collect())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn close(a: &[f64], b: &[f64], tol: f64) {
        assert_eq!(a.len(), b.len());
        for (x, y) in a.iter().zip(b) {
            assert!((x - y).abs() < tol, "{a:?} vs {b:?}");
        }
    }

    // Reference samples produced with scipy.signal.windows at length 8.
    #[test]
    fn reference_values() {
        close(
            &make_window("chebyshev", 8).unwrap(),
            &[
                0.03638368090334488,
                0.225355076045345,
                0.6241595403271377,
                1.0,
                1.0,
                0.6241595403271377,
                0.225355076045345,
                0.03638368090334488,
            ],
            1e-12,
        );
        close(
            &make_window("chebyshev", 7).unwrap(),
            &[
                0.05650405062850303,
                0.31660853064847455,
                0.7601208123539082,
                1.0,
                0.7601208123539082,
                0.31660853064847455,
                0.05650405062850303,
            ],
            1e-12,
        );
        close(
            &make_window("taylor", 8).unwrap(),
            &[
                0.2793462998238399,
                0.5149598981910933,
                0.7973015281194145,
                0.9756107180961113,
                0.9756107180961113,
                0.7973015281194145,
                0.5149598981910933,
                0.2793462998238399,
            ],
            1e-12,
        );
        close(
            &make_window("tukey", 8).unwrap(),
            &[0.0, 0.6112604669781572, 1.0, 1.0, 1.0, 1.0, 0.6112604669781576, 0.0],
            1e-12,
        );
        close(
            &make_window("flattop", 8).unwrap(),
            &[
                -0.0004210510000000013,
                -0.03684078115492349,
                0.010703716716153475,
                0.78087391493877,
                0.78087391493877,
                0.010703716716153475,
                -0.03684078115492349,
                -0.0004210510000000013,
            ],
            1e-12,
        );
        close(
            &make_window("cosine", 8).unwrap(),
            &[
                0.19509032201612825,
                0.5555702330196022,
                0.8314696123025452,
                0.9807852804032304,
                0.9807852804032304,
                0.8314696123025455,
                0.5555702330196022,
                0.1950903220161286,
            ],
            1e-12,
        );
        close(
            &make_window("blackman", 8).unwrap(),
            &[
                0.0,
                0.09045342435412808,
                0.45918295754596367,
                0.9203636180999082,
                0.9203636180999082,
                0.45918295754596367,
                0.09045342435412808,
                0.0,
            ],
            1e-12,
        );
    }

    #[test]
    fn rectangular_is_ones() {
        assert_eq!(make_window("Rectangular", 8).unwrap(), vec![1.0; 8]);
    }

    #[test]
    fn hann_endpoints_and_peak() {
        let w = make_window("hann", 9).unwrap();
        assert!(w[0].abs() < 1e-15 && w[8].abs() < 1e-15);
        assert!((w[4] - 1.0).abs() < 1e-15);
    }

    #[test]
    fn bad_inputs() {
        assert!(make_window("kaiser", 8).is_err());
        assert!(make_window("hann", 1).is_err());
        assert!(Window::Tukey { taper: 2.0 }.samples(8).is_err());
    }

    #[test]
    fn all_positive_at_center() {
        for name in [
            "tukey", "taylor", "chebyshev", "blackman", "flattop", "cosine", "hann", "rectangular",
        ] {
            for len in [7, 8, 32, 64] {
                let w = make_window(name, len).unwrap();
                assert!(w[len / 2] > 0.0, "{name} {len}");
                assert!(w.iter().all(|v| v.is_finite()));
            }
        }
    }
}
