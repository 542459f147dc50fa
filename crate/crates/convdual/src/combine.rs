//! Combining weights that turn forward and backward dual-decoder outputs
//! into bidirectional MAP outputs:
//!
//! ```text
//! x̂_{b_k} = ω→_k x̂→_{b_k} + ω←_k x̂←_{b_k}
//! ```
//!
//! The weights are closed-form products of channel soft values, one rule per
//! code. Every rule exists in its printed form; two of them (`FFC_17`,
//! `GC_15_13`) fail oracle verification as printed and have an amended form
//! that is exact. See [`FormulaVariant`].
//!
//! Index notation follows the formulas: `⟨a⟩_N` is `a mod N` in `0..N`,
//! `⌈a/b⌉` the ceiling, `[a/b]` the nearest integer with ties rounded up, and
//! a soft value `x̂_i` with `i < 1` or `i > K` counts as 1.
//!
//! The combined output reproduces the zero-state bidirectional BCJR output on
//! the [`OutputScale::AppDifference`] scale.

use std::fmt;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use thiserror::Error;

use crate::bcjr::{self, BcjrError, BetaInit, OutputScale};
use crate::codes::{build_trellis, CodeError, CodeSpec};
use crate::dualsiso::DualDecoder;

/// Magnitude below which a denominator is clamped.
pub const DIVISION_GUARD: f64 = 1e-12;

/// Errors from weight computation and combining.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum CombineError {
    #[error("sequence lengths differ: {0} vs {1}")]
    LengthMismatch(usize, usize),
    #[error("profile {profile} does not apply to code {code}")]
    ProfileMismatch { profile: ProfileCode, code: String },
    #[error("unknown weight profile {0:?}")]
    UnknownProfile(String),
    #[error(transparent)]
    Soft(#[from] BcjrError),
    #[error(transparent)]
    Code(#[from] CodeError),
}

/// Codes with a combining-weight rule.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum ProfileCode {
    /// `(x^2+1)/(x^2+x+1)`, octal 5/7.
    Gc5_7,
    /// `x^2+1`, octal 5.
    Ffc5,
    /// `x^2+x+1`, octal 7.
    Ffc7,
    /// `x^3+x^2+x+1`, octal 17.
    Ffc17,
    /// `(x^3+x^2+1)/(x^3+x+1)`, octal 15/13.
    Gc15_13,
}

impl ProfileCode {
    pub const ALL: [Self; 5] = [
        Self::Gc5_7,
        Self::Ffc5,
        Self::Ffc7,
        Self::Ffc17,
        Self::Gc15_13,
    ];

    /// Identifier such as `GC_5_7`.
    #[must_use]
    pub fn id(self) -> &'static str {
        match self {
            Self::Gc5_7 => "GC_5_7",
            Self::Ffc5 => "FFC_5",
            Self::Ffc7 => "FFC_7",
            Self::Ffc17 => "FFC_17",
            Self::Gc15_13 => "GC_15_13",
        }
    }

    /// Octal code text.
    #[must_use]
    pub fn code_text(self) -> &'static str {
        match self {
            Self::Gc5_7 => "5/7",
            Self::Ffc5 => "5",
            Self::Ffc7 => "7",
            Self::Ffc17 => "17",
            Self::Gc15_13 => "15/13",
        }
    }

    #[must_use]
    pub fn spec(self) -> CodeSpec {
        CodeSpec::parse(self.code_text()).expect("profile codes are valid")
    }

    /// The profile whose code is `spec`, if any.
    #[must_use]
    pub fn for_spec(spec: &CodeSpec) -> Option<Self> {
        Self::ALL.into_iter().find(|p| p.spec() == *spec)
    }

    /// Accepts an identifier (`GC_5_7`, case-insensitive) or code text
    /// (`5/7`).
    pub fn parse(text: &str) -> Result<Self, CombineError> {
        let t = text.trim();
        Self::ALL
            .into_iter()
            .find(|p| p.id().eq_ignore_ascii_case(t))
            .or_else(|| CodeSpec::parse(t).ok().and_then(|s| Self::for_spec(&s)))
            .ok_or_else(|| CombineError::UnknownProfile(text.to_string()))
    }
}

impl fmt::Display for ProfileCode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.id())
    }
}

/// Which form of a weight rule to evaluate.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum FormulaVariant {
    /// The rule exactly as published.
    Printed,
    /// Corrected rule where the printed one fails verification; identical to
    /// the printed rule for `GC_5_7`, `FFC_5` and `FFC_7`.
    ///
    /// - `FFC_17`: the denominators of `Y_k` and `Z_k` run over
    ///   `j = 0 ..= [k/4]` instead of `[k/4] + 1`.
    /// - `GC_15_13`: the three pair terms use `G_{⟨k⟩+6} G_{⟨k⟩+5}`,
    ///   `G_{⟨k⟩+6} G_{⟨k⟩+3}`, `G_{⟨k⟩+5} G_{⟨k⟩+3}` with
    ///   `W_{k+5} W_{k+3}`, `W_{k+5} W_k`, `W_{k+3} W_k`, and the last two
    ///   divide by `x̂_{c_k}^2`.
    Amended,
}

impl fmt::Display for FormulaVariant {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Self::Printed => "printed",
            Self::Amended => "amended",
        })
    }
}

/// A weight rule: code plus formula variant.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct WeightProfile {
    pub code: ProfileCode,
    pub variant: FormulaVariant,
}

impl WeightProfile {
    #[must_use]
    pub fn printed(code: ProfileCode) -> Self {
        Self {
            code,
            variant: FormulaVariant::Printed,
        }
    }

    #[must_use]
    pub fn amended(code: ProfileCode) -> Self {
        Self {
            code,
            variant: FormulaVariant::Amended,
        }
    }

    /// The oracle-verified rule for `spec`, if the code has one.
    #[must_use]
    pub fn verified_for(spec: &CodeSpec) -> Option<Self> {
        ProfileCode::for_spec(spec).map(Self::amended)
    }
}

impl fmt::Display for WeightProfile {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}:{}", self.code, self.variant)
    }
}

/// Forward and backward weights at one position.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct WeightPair {
    pub fwd: f64,
    pub bwd: f64,
}

/// Weights for a frame plus the number of clamped denominators.
#[derive(Debug, Clone, PartialEq)]
pub struct Weights {
    pub pairs: Vec<WeightPair>,
    pub clamp_count: usize,
}

/// Soft values with the out-of-range convention and a division guard.
struct Frame<'a> {
    soft: &'a [f64],
    clamps: usize,
}

impl Frame<'_> {
    fn k(&self) -> i64 {
        self.soft.len() as i64
    }

    /// `x̂_i`, 1-based; 1 outside `1..=K`.
    fn x(&self, i: i64) -> f64 {
        if i >= 1 && i <= self.k() {
            self.soft[(i - 1) as usize]
        } else {
            1.0
        }
    }

    fn product(&self, lo: i64, hi: i64, index: impl Fn(i64) -> i64) -> f64 {
        (lo..=hi).map(|l| self.x(index(l))).product()
    }

    fn div(&mut self, num: f64, den: f64) -> f64 {
        if den.abs() < DIVISION_GUARD {
            self.clamps += 1;
            let guarded = if den < 0.0 {
                -DIVISION_GUARD
            } else {
                DIVISION_GUARD
            };
            num / guarded
        } else {
            num / den
        }
    }
}

/// `⟨a⟩_n`.
fn modn(a: i64, n: i64) -> i64 {
    a.rem_euclid(n)
}

/// `⌈a/b⌉` for `b > 0`.
fn ceil_div(a: i64, b: i64) -> i64 {
    -(-a).div_euclid(b)
}

/// `[a/b]`, nearest integer with ties rounded up, for `b > 0`.
fn round_half_up(a: i64, b: i64) -> i64 {
    (2 * a + b).div_euclid(2 * b)
}

/// `O = Π x̂_{2l-1}` and `E = Π x̂_{2l}` for `l = 1 ..= ⌈K/2⌉`.
fn odd_even(f: &Frame<'_>) -> (f64, f64) {
    let top = ceil_div(f.k(), 2);
    (
        f.product(1, top, |l| 2 * l - 1),
        f.product(1, top, |l| 2 * l),
    )
}

fn gc_5_7(f: &mut Frame<'_>) -> Vec<WeightPair> {
    let (o, e) = odd_even(f);
    (1..=f.k())
        .map(|k| {
            let x = f.x(k);
            let sel = if k % 2 == 1 { o } else { e };
            let w = (1.0 + f.div(sel, x * x)) / 4.0;
            WeightPair { fwd: w, bwd: w }
        })
        .collect()
}

fn ffc_5(f: &Frame<'_>) -> Vec<WeightPair> {
    let (o, e) = odd_even(f);
    (1..=f.k())
        .map(|k| {
            let w = if k % 2 == 1 {
                (1.0 + e) / 4.0
            } else {
                (1.0 + o) / 4.0
            };
            WeightPair { fwd: w, bwd: w }
        })
        .collect()
}

/// `(P_k, Q_k)` of the `FFC_7` rule.
fn ffc_7_terms(f: &mut Frame<'_>, k: i64) -> (f64, f64) {
    let top = ceil_div(f.k(), 3);
    // I_{d,l} = x̂_{3l - ⟨3-d⟩_3}
    let i_index = |d: i64| move |l: i64| 3 * l - modn(3 - d, 3);
    let p = f.product(0, top, i_index(modn(k - 2, 3)));
    let d = modn(k - 1, 3);
    let t = round_half_up(k, 3);
    let num = f.product(t + 1, top, i_index(d));
    let den = f.product(0, t, i_index(d));
    (p, f.div(num, den))
}

fn ffc_7(f: &mut Frame<'_>) -> Vec<WeightPair> {
    (1..=f.k())
        .map(|k| {
            let (p, q) = ffc_7_terms(f, k);
            WeightPair {
                fwd: (1.0 + p * q) / 4.0,
                bwd: (1.0 + f.div(p, q)) / 4.0,
            }
        })
        .collect()
}

fn ffc_17(f: &mut Frame<'_>, variant: FormulaVariant) -> Vec<WeightPair> {
    let top = ceil_div(f.k(), 4);
    // M_{d,l} = x̂_{4l - ⟨4-d⟩_4}
    let m_index = |d: i64| move |l: i64| 4 * l - modn(4 - d, 4);
    let den_extra = match variant {
        FormulaVariant::Printed => 1,
        FormulaVariant::Amended => 0,
    };
    (1..=f.k())
        .map(|k| {
            let r = |f: &Frame<'_>, k: i64| f.product(0, top, m_index(modn(k - 3, 4)));
            let rk = r(f, k);
            let rn = r(f, modn(k, 4) + 1);
            let t = round_half_up(k, 4);
            let d = if modn(k, 4) <= 1 { 0 } else { 2 };
            let num = f.product(t + 1, top, m_index(d));
            let den = f.product(0, t + den_extra, m_index(d));
            let v = f.div(num, den);
            WeightPair {
                fwd: (1.0 + rk * rn + (rk + rn) * v) / 8.0,
                bwd: (1.0 + rk * rn + f.div(rk + rn, v)) / 8.0,
            }
        })
        .collect()
}

fn gc_15_13(f: &mut Frame<'_>, variant: FormulaVariant) -> Vec<WeightPair> {
    let top = ceil_div(f.k(), 7) + 1;
    // N_{d,l} = x̂_{7(l-1)+d}
    let n_index = |d: i64| move |l: i64| 7 * (l - 1) + d;
    let g = |f: &Frame<'_>, k: i64| f.product(0, top, n_index(modn(k - 3, 7)));
    let w = |f: &mut Frame<'_>, k: i64| {
        let d = modn(k + 1, 7);
        let t = ceil_div(k - d, 7);
        let num = f.product(t + 1, top, n_index(d));
        let den = f.product(0, t, n_index(d));
        f.div(num, den)
    };
    (1..=f.k())
        .map(|k| {
            let c = modn(k, 7);
            // Pair products (G_a G_b, W_a W_b) for the three cross terms, and
            // the power of x̂_{c_k} dividing the last two.
            let (ga, gb, gc, wa, wb, wc, power) = match variant {
                FormulaVariant::Printed => (
                    g(f, k),
                    g(f, c + 1),
                    g(f, c + 3),
                    w(f, k),
                    w(f, k + 2),
                    w(f, k + 5),
                    1,
                ),
                FormulaVariant::Amended => (
                    g(f, c + 6),
                    g(f, c + 5),
                    g(f, c + 3),
                    w(f, k + 5),
                    w(f, k + 3),
                    w(f, k),
                    2,
                ),
            };
            let x = f.x(k).powi(power);
            let t1 = ga * gb;
            let t2 = ga * gc;
            let t3 = gb * gc;
            let fwd = 1.0 + t1 * wa * wb + f.div(t2 * wa * wc, x) + f.div(t3 * wb * wc, x);
            let bwd = 1.0 + f.div(t1, wa * wb) + f.div(t2, wa * wc * x) + f.div(t3, wb * wc * x);
            WeightPair {
                fwd: fwd / 8.0,
                bwd: bwd / 8.0,
            }
        })
        .collect()
}

/// Combining weights for every position of `soft` (length `K`).
pub fn compute_weights(profile: WeightProfile, soft: &[f64]) -> Result<Weights, CombineError> {
    if let Some(&bad) = soft
        .iter()
        .find(|x| x.is_nan() || x.abs() > 1.0 + bcjr::SOFT_TOLERANCE)
    {
        return Err(BcjrError::SoftOutOfRange(bad).into());
    }
    let mut frame = Frame { soft, clamps: 0 };
    let pairs = match profile.code {
        ProfileCode::Gc5_7 => gc_5_7(&mut frame),
        ProfileCode::Ffc5 => ffc_5(&frame),
        ProfileCode::Ffc7 => ffc_7(&mut frame),
        ProfileCode::Ffc17 => ffc_17(&mut frame, profile.variant),
        ProfileCode::Gc15_13 => gc_15_13(&mut frame, profile.variant),
    };
    Ok(Weights {
        pairs,
        clamp_count: frame.clamps,
    })
}

/// `ω→_k fwd_k + ω←_k bwd_k`, clipped to `[-1, 1]`.
pub fn combine_outputs(
    fwd: &[f64],
    bwd: &[f64],
    weights: &[WeightPair],
) -> Result<Vec<f64>, CombineError> {
    if fwd.len() != bwd.len() {
        return Err(CombineError::LengthMismatch(fwd.len(), bwd.len()));
    }
    if fwd.len() != weights.len() {
        return Err(CombineError::LengthMismatch(fwd.len(), weights.len()));
    }
    Ok(fwd
        .iter()
        .zip(bwd)
        .zip(weights)
        .map(|((f, b), w)| (w.fwd * f + w.bwd * b).clamp(-1.0, 1.0))
        .collect())
}

/// Outcome of [`verify_weights`].
#[derive(Debug, Clone, PartialEq)]
pub struct WeightReport {
    pub profile: WeightProfile,
    pub frame_len: usize,
    pub trials: usize,
    /// Largest per-position error of the combined output against the
    /// zero-state bidirectional BCJR oracle.
    pub max_error: f64,
    pub mean_error: f64,
    pub clamp_count: usize,
    /// Largest error of the plain sum `fwd + bwd` against the same oracle.
    pub direct_sum_max_error: f64,
}

impl WeightReport {
    #[must_use]
    pub fn passes(&self, tolerance: f64) -> bool {
        self.max_error <= tolerance
    }
}

impl fmt::Display for WeightReport {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(
            f,
            "profile={} variant={} K={} trials={} max_error={:e} mean_error={:e} clamp_count={} direct_sum_max_error={:e}",
            self.profile.code,
            self.profile.variant,
            self.frame_len,
            self.trials,
            self.max_error,
            self.mean_error,
            self.clamp_count,
            self.direct_sum_max_error
        )
    }
}

/// Random soft values with `|x̂|` uniform in `[0.05, 0.95]` and random sign.
#[must_use]
pub fn restricted_soft_frame<R: Rng>(rng: &mut R, k: usize) -> Vec<f64> {
    (0..k)
        .map(|_| {
            let mag = rng.gen_range(0.05..=0.95);
            if rng.gen::<bool>() {
                -mag
            } else {
                mag
            }
        })
        .collect()
}

/// Compares combined dual outputs with the bidirectional BCJR oracle over
/// `trials` seeded random frames of length `k`.
pub fn verify_weights(
    spec: &CodeSpec,
    profile: WeightProfile,
    trials: usize,
    k: usize,
    seed: u64,
) -> Result<WeightReport, CombineError> {
    if profile.code.spec() != *spec {
        return Err(CombineError::ProfileMismatch {
            profile: profile.code,
            code: spec.to_string(),
        });
    }
    let trellis = build_trellis(spec, false)?;
    let decoder = DualDecoder::new(spec);
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut max_error = 0.0f64;
    let mut sum_error = 0.0;
    let mut clamp_count = 0;
    let mut direct_sum_max_error = 0.0f64;
    for _ in 0..trials {
        let soft = restricted_soft_frame(&mut rng, k);
        let probs = bcjr::soft_to_probs(&soft)?;
        let oracle = bcjr::bidirectional_decode(
            &trellis,
            &probs,
            BetaInit::ZeroState,
            OutputScale::AppDifference,
        )?;
        let fwd = decoder.forward(&soft)?;
        let bwd = decoder.backward(&soft)?;
        let weights = compute_weights(profile, &soft)?;
        clamp_count += weights.clamp_count;
        let combined = combine_outputs(&fwd, &bwd, &weights.pairs)?;
        let unit = vec![WeightPair { fwd: 1.0, bwd: 1.0 }; k];
        let direct = combine_outputs(&fwd, &bwd, &unit)?;
        for i in 0..k {
            let e = (combined[i] - oracle[i]).abs();
            max_error = max_error.max(e);
            sum_error += e;
            direct_sum_max_error = direct_sum_max_error.max((direct[i] - oracle[i]).abs());
        }
    }
    let positions = trials * k;
    Ok(WeightReport {
        profile,
        frame_len: k,
        trials,
        max_error,
        mean_error: if positions > 0 {
            sum_error / positions as f64
        } else {
            0.0
        },
        clamp_count,
        direct_sum_max_error,
    })
}
