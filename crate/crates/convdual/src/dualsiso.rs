//! Log-domain dual-encoder SISO decoders.
//!
//! A soft symbol `x̂ ∈ [-1, 1]` is held as a sign and `ln |x̂|`. Adding two
//! symbols in a dual register multiplies the signs and adds the
//! log-magnitudes, which is the log of the product `x̂_1 x̂_2`. A dual
//! register driven by channel soft values then reproduces the BCJR forward
//! (or backward) soft output exactly, with work per symbol proportional to
//! the number of taps instead of the number of trellis states.
//!
//! The register layout of a dual `num(x)/den(x)` is
//!
//! ```text
//! w_k   = in_k + Σ_{i>=1} den_i w_{k-i}
//! out_k = d·in_k + Σ_j r_j w_{k-j}
//! ```
//!
//! where `d` is the constant quotient and `r` the remainder of `num/den`.
//! Splitting off the direct path keeps every input symbol at most once in
//! every register and output, which is what makes the log-domain sums exact.

use std::fmt;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use thiserror::Error;

use crate::bcjr::{self, BcjrError, BetaInit, OutputScale, SOFT_TOLERANCE};
use crate::codes::{build_trellis, CodeClass, CodeError, CodeSpec, Encoder};
use crate::gf2poly::{min_complementary, poly_divmod, poly_mul, Gf2Poly};

/// Log-magnitude used for `x̂ = 0`, about the log of the smallest positive
/// double. Symbols at this floor convert back to exactly 0.
pub const ERASURE_LOGMAG: f64 = -745.0;

/// Errors from the dual decoders.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum DualError {
    #[error(transparent)]
    Soft(#[from] BcjrError),
    #[error(transparent)]
    Code(#[from] CodeError),
    /// The operation needs a feedback-only code.
    #[error("code class {0} is not FBC")]
    NotFbc(CodeClass),
    /// The symbolic check needs at least two periods of the denominator.
    #[error("horizon {horizon} shorter than the required {required}")]
    HorizonTooShort { horizon: usize, required: usize },
}

/// A soft symbol as sign and log-magnitude.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SoftSymbol {
    /// `true` for a negative `x̂`.
    pub negative: bool,
    /// `ln |x̂|`, at most 0 and at least [`ERASURE_LOGMAG`].
    pub logmag: f64,
}

impl SoftSymbol {
    /// `x̂ = 1`, a certain zero bit; the register start value.
    pub const IDENTITY: Self = Self {
        negative: false,
        logmag: 0.0,
    };

    /// `x̂ = 0`, no information.
    pub const ERASURE: Self = Self {
        negative: false,
        logmag: ERASURE_LOGMAG,
    };

    /// Converts `x̂ ∈ [-1, 1]`.
    pub fn from_soft(x: f64) -> Result<Self, BcjrError> {
        if x.is_nan() || x.abs() > 1.0 + SOFT_TOLERANCE {
            return Err(BcjrError::SoftOutOfRange(x));
        }
        if x == 0.0 {
            return Ok(Self::ERASURE);
        }
        Ok(Self {
            negative: x < 0.0,
            logmag: x.abs().ln().clamp(ERASURE_LOGMAG, 0.0),
        })
    }

    /// Back to `x̂`.
    #[must_use]
    pub fn to_soft(self) -> f64 {
        if self.logmag <= ERASURE_LOGMAG {
            return 0.0;
        }
        let mag = self.logmag.exp();
        if self.negative {
            -mag
        } else {
            mag
        }
    }

    /// Register addition: signs multiply, log-magnitudes add (saturating at
    /// [`ERASURE_LOGMAG`]).
    #[must_use]
    pub fn combine(self, other: Self) -> Self {
        Self {
            negative: self.negative ^ other.negative,
            logmag: (self.logmag + other.logmag).max(ERASURE_LOGMAG),
        }
    }
}

/// Dual encoder description.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct DualSpec {
    numerator: Gf2Poly,
    denominator: Gf2Poly,
    reversed: bool,
    source: CodeSpec,
    z: Gf2Poly,
    l: usize,
}

impl DualSpec {
    /// A dual with an explicit transfer function, for studying rules other
    /// than the derived ones (for instance `1/a(x)` for a feed-forward code).
    #[must_use]
    pub fn with_transfer(source: CodeSpec, numerator: Gf2Poly, denominator: Gf2Poly) -> Self {
        Self {
            numerator,
            denominator,
            reversed: false,
            source,
            z: Gf2Poly::one(),
            l: 0,
        }
    }

    #[must_use]
    pub fn numerator(&self) -> &Gf2Poly {
        &self.numerator
    }

    #[must_use]
    pub fn denominator(&self) -> &Gf2Poly {
        &self.denominator
    }

    /// Whether the registers use reverse memory labeling.
    #[must_use]
    pub fn reversed(&self) -> bool {
        self.reversed
    }

    #[must_use]
    pub fn source(&self) -> &CodeSpec {
        &self.source
    }

    /// Minimum complementary polynomial of the source numerator (1 for FBC).
    #[must_use]
    pub fn z(&self) -> &Gf2Poly {
        &self.z
    }

    /// Degree of [`DualSpec::z`] (0 for FBC).
    #[must_use]
    pub fn l(&self) -> usize {
        self.l
    }

    /// The same dual with reverse memory labeling.
    #[must_use]
    pub fn reverse_labeled(&self) -> Self {
        Self {
            reversed: !self.reversed,
            ..self.clone()
        }
    }

    /// The dual as a binary controller-form encoder (normal labeling), with
    /// memory `max(deg num, deg den)`.
    pub fn binary_encoder(&self) -> Result<Encoder, CodeError> {
        let memory = self
            .numerator
            .degree_or_zero()
            .max(self.denominator.degree_or_zero());
        Encoder::new(&self.numerator, &self.denominator, memory)
    }

    /// Register layout used by [`run_dual_register`].
    #[must_use]
    pub fn layout(&self) -> DualLayout {
        let (direct, taps, feedback) = if self.denominator.is_one() {
            (false, self.numerator.clone(), Gf2Poly::one())
        } else {
            let (q, r) = poly_divmod(&self.numerator, &self.denominator)
                .expect("dual denominators are nonzero");
            if q.degree_or_zero() == 0 {
                (q.is_one(), r, self.denominator.clone())
            } else {
                (false, self.numerator.clone(), self.denominator.clone())
            }
        };
        let registers = taps.degree_or_zero().max(feedback.degree_or_zero());
        if !self.reversed {
            return DualLayout::Register {
                direct,
                taps,
                feedback,
                registers,
            };
        }
        // Reverse labeling mirrors the register taps; the direct path has no
        // register and stays as it is.
        let feedback = feedback.reciprocal(registers);
        if !feedback.coeff(0) {
            return DualLayout::NoInformation;
        }
        DualLayout::Register {
            direct,
            taps: taps.reciprocal(registers),
            feedback,
            registers,
        }
    }
}

/// Shift-register structure of a dual.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum DualLayout {
    /// `w_k = in_k + Σ_{i>=1} feedback_i w_{k-i}`,
    /// `out_k = direct·in_k + Σ_j taps_j w_{k-j}`.
    Register {
        direct: bool,
        taps: Gf2Poly,
        feedback: Gf2Poly,
        registers: usize,
    },
    /// The mirrored feedback has no constant term, so the register would need
    /// future inputs. This happens for the reverse-labeled dual of a
    /// feedback-only code, whose backward decoder carries no information;
    /// every output is `x̂ = 0`.
    NoInformation,
}

/// The dual of `spec` used for forward decoding.
#[must_use]
pub fn derive_forward_dual(spec: &CodeSpec) -> DualSpec {
    let n = spec.memory();
    let (numerator, denominator, z, l) = match spec.class() {
        CodeClass::Fbc => (
            spec.denominator().clone(),
            Gf2Poly::one(),
            Gf2Poly::one(),
            0,
        ),
        _ if n == 0 => (Gf2Poly::one(), Gf2Poly::one(), Gf2Poly::one(), 0),
        class => {
            let (z, l) = min_complementary(spec.numerator())
                .expect("code numerators have degree >= 1 and constant term 1");
            let num = if class == CodeClass::Gc {
                poly_mul(spec.denominator(), &z)
            } else {
                z.clone()
            };
            (num, Gf2Poly::x_pow_plus_one(n + l), z, l)
        }
    };
    DualSpec {
        numerator,
        denominator,
        reversed: false,
        source: spec.clone(),
        z,
        l,
    }
}

/// The reverse-labeled dual of `spec` used for backward decoding.
#[must_use]
pub fn derive_backward_dual(spec: &CodeSpec) -> DualSpec {
    derive_forward_dual(spec).reverse_labeled()
}

/// A dual register ready to run, with tap lists precomputed.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct DualRegister {
    direct: bool,
    /// Feedback delays `i >= 1` with `den_i = 1`.
    feedback: Vec<usize>,
    /// Output delays `j >= 0` with `r_j = 1`.
    taps: Vec<usize>,
    registers: usize,
    no_information: bool,
}

impl DualRegister {
    #[must_use]
    pub fn new(dual: &DualSpec) -> Self {
        match dual.layout() {
            DualLayout::Register {
                direct,
                taps,
                feedback,
                registers,
            } => Self {
                direct,
                feedback: feedback
                    .exponents()
                    .into_iter()
                    .filter(|&e| e > 0)
                    .collect(),
                taps: taps.exponents(),
                registers,
                no_information: false,
            },
            DualLayout::NoInformation => Self {
                direct: false,
                feedback: Vec::new(),
                taps: Vec::new(),
                registers: 0,
                no_information: true,
            },
        }
    }

    /// Register additions per symbol, independent of the trellis size.
    #[must_use]
    pub fn additions_per_symbol(&self) -> usize {
        self.feedback.len() + self.taps.len() + usize::from(self.direct)
    }

    /// Runs the register from the identity state.
    #[must_use]
    pub fn run(&self, input: &[SoftSymbol]) -> Vec<SoftSymbol> {
        if self.no_information {
            return vec![SoftSymbol::ERASURE; input.len()];
        }
        let len = self.registers + 1;
        // history[(pos + len - i) % len] holds w_{k-i}.
        let mut history = vec![SoftSymbol::IDENTITY; len];
        let mut pos = 0;
        input
            .iter()
            .map(|&sym| {
                let mut w = sym;
                for &i in &self.feedback {
                    w = w.combine(history[(pos + len - i) % len]);
                }
                history[pos] = w;
                let mut out = if self.direct {
                    sym
                } else {
                    SoftSymbol::IDENTITY
                };
                for &j in &self.taps {
                    out = out.combine(history[(pos + len - j) % len]);
                }
                pos = (pos + 1) % len;
                out
            })
            .collect()
    }

    /// Runs the register on soft values, converting to and from the log
    /// domain.
    pub fn run_soft(&self, input: &[f64]) -> Result<Vec<f64>, BcjrError> {
        let symbols = input
            .iter()
            .map(|&x| SoftSymbol::from_soft(x))
            .collect::<Result<Vec<_>, _>>()?;
        Ok(self
            .run(&symbols)
            .into_iter()
            .map(SoftSymbol::to_soft)
            .collect())
    }
}

/// Runs a dual register over `input` from the identity state.
#[must_use]
pub fn run_dual_register(dual: &DualSpec, input: &[SoftSymbol]) -> Vec<SoftSymbol> {
    DualRegister::new(dual).run(input)
}

/// Forward and backward dual registers of one code.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct DualDecoder {
    forward: DualRegister,
    backward: DualRegister,
}

impl DualDecoder {
    #[must_use]
    pub fn new(spec: &CodeSpec) -> Self {
        Self {
            forward: DualRegister::new(&derive_forward_dual(spec)),
            backward: DualRegister::new(&derive_backward_dual(spec)),
        }
    }

    /// Forward soft output.
    pub fn forward(&self, soft: &[f64]) -> Result<Vec<f64>, BcjrError> {
        self.forward.run_soft(soft)
    }

    /// Backward soft output: the reverse-labeled dual runs over the
    /// time-reversed input.
    pub fn backward(&self, soft: &[f64]) -> Result<Vec<f64>, BcjrError> {
        let reversed: Vec<f64> = soft.iter().rev().copied().collect();
        let mut out = self.backward.run_soft(&reversed)?;
        out.reverse();
        Ok(out)
    }

    #[must_use]
    pub fn forward_register(&self) -> &DualRegister {
        &self.forward
    }

    #[must_use]
    pub fn backward_register(&self) -> &DualRegister {
        &self.backward
    }
}

/// Forward SISO decoding through the dual encoder.
pub fn forward_decode(spec: &CodeSpec, soft: &[f64]) -> Result<Vec<f64>, DualError> {
    Ok(DualRegister::new(&derive_forward_dual(spec)).run_soft(soft)?)
}

/// Backward SISO decoding through the reverse-labeled dual encoder.
pub fn backward_decode(spec: &CodeSpec, soft: &[f64]) -> Result<Vec<f64>, DualError> {
    let register = DualRegister::new(&derive_backward_dual(spec));
    let reversed: Vec<f64> = soft.iter().rev().copied().collect();
    let mut out = register.run_soft(&reversed)?;
    out.reverse();
    Ok(out)
}

/// Full MAP decoding of a feedback-only code, which is its forward dual
/// decoding.
pub fn fbc_full_map(spec: &CodeSpec, soft: &[f64]) -> Result<Vec<f64>, DualError> {
    if spec.class() != CodeClass::Fbc {
        return Err(DualError::NotFbc(spec.class()));
    }
    forward_decode(spec, soft)
}

/// Where a symbolic violation was found.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SymbolLocation {
    Output,
    /// The value entering register `S_1`.
    Register,
}

/// A coefficient outside `{0, 1}` in the symbolic expansion.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Violation {
    /// Time step, starting at 1.
    pub step: usize,
    pub location: SymbolLocation,
    /// Input symbol index, starting at 1.
    pub input: usize,
    pub coefficient: u32,
}

/// Result of [`symbolic_independence_check`].
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct IndependenceReport {
    pub horizon: usize,
    pub first_violation: Option<Violation>,
}

impl IndependenceReport {
    #[must_use]
    pub fn passed(&self) -> bool {
        self.first_violation.is_none()
    }
}

/// Symbolic run of a dual register: each register content and output is an
/// integer combination of the formal inputs `ln x̂_1 .. ln x̂_horizon`.
/// Returns the output coefficient vectors per step.
#[must_use]
pub fn symbolic_outputs(dual: &DualSpec, horizon: usize) -> Vec<Vec<u32>> {
    symbolic_run(dual, horizon).0
}

fn symbolic_run(dual: &DualSpec, horizon: usize) -> (Vec<Vec<u32>>, Option<Violation>) {
    let DualLayout::Register {
        direct,
        taps,
        feedback,
        ..
    } = dual.layout()
    else {
        return (vec![vec![0; horizon]; horizon], None);
    };
    let add = |acc: &mut Vec<u32>, v: &[u32]| acc.iter_mut().zip(v).for_each(|(a, b)| *a += b);
    let first_bad = |v: &[u32]| v.iter().position(|&c| c > 1).map(|i| (i, v[i]));
    let mut w: Vec<Vec<u32>> = Vec::with_capacity(horizon);
    let mut outputs = Vec::with_capacity(horizon);
    let mut violation = None;
    for k in 0..horizon {
        let mut input = vec![0u32; horizon];
        input[k] = 1;
        let mut wk = input.clone();
        for i in feedback
            .exponents()
            .into_iter()
            .filter(|&i| i > 0 && i <= k)
        {
            add(&mut wk, &w[k - i]);
        }
        w.push(wk);
        let mut out = if direct { input } else { vec![0u32; horizon] };
        for j in taps.exponents().into_iter().filter(|&j| j <= k) {
            add(&mut out, &w[k - j]);
        }
        if violation.is_none() {
            let found = first_bad(&out)
                .map(|hit| (SymbolLocation::Output, hit))
                .or_else(|| first_bad(&w[k]).map(|hit| (SymbolLocation::Register, hit)));
            if let Some((location, (input, coefficient))) = found {
                violation = Some(Violation {
                    step: k + 1,
                    location,
                    input: input + 1,
                    coefficient,
                });
            }
        }
        outputs.push(out);
    }
    (outputs, violation)
}

/// Checks that every register content and output of the dual, expanded over
/// formal inputs, has coefficients in `{0, 1}` for steps `1 ..= horizon`.
pub fn symbolic_independence_check(
    dual: &DualSpec,
    horizon: usize,
) -> Result<IndependenceReport, DualError> {
    let required = 2 * dual.denominator().degree_or_zero();
    if horizon < required {
        return Err(DualError::HorizonTooShort { horizon, required });
    }
    let (_, first_violation) = symbolic_run(dual, horizon);
    Ok(IndependenceReport {
        horizon,
        first_violation,
    })
}

/// Largest deviations of the dual decoders from the BCJR oracle.
#[derive(Debug, Clone, PartialEq)]
pub struct EquivalenceReport {
    pub code: String,
    pub frame_len: usize,
    pub trials: usize,
    /// Forward dual output against the BCJR forward pass.
    pub forward_max_error: f64,
    /// Backward dual output against the zero-state BCJR backward pass.
    pub backward_max_error: f64,
    /// For FBC codes, forward dual output against bidirectional BCJR with
    /// a uniform end state.
    pub full_map_max_error: Option<f64>,
}

impl EquivalenceReport {
    #[must_use]
    pub fn passes(&self, tolerance: f64) -> bool {
        self.forward_max_error <= tolerance
            && self.backward_max_error <= tolerance
            && self.full_map_max_error.is_none_or(|e| e <= tolerance)
    }
}

impl fmt::Display for EquivalenceReport {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(
            f,
            "code={} K={} trials={} forward_max_error={:e} backward_max_error={:e}",
            self.code, self.frame_len, self.trials, self.forward_max_error, self.backward_max_error
        )?;
        if let Some(e) = self.full_map_max_error {
            write!(f, " full_map_max_error={e:e}")?;
        }
        Ok(())
    }
}

/// Runs forward and backward dual decoding and the BCJR oracle on `trials`
/// seeded frames of soft values uniform in `[-1, 1]`.
pub fn check_equivalence(
    spec: &CodeSpec,
    frame_len: usize,
    trials: usize,
    seed: u64,
) -> Result<EquivalenceReport, DualError> {
    let trellis = build_trellis(spec, false)?;
    let decoder = DualDecoder::new(spec);
    let fbc = spec.class() == CodeClass::Fbc;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let max_diff = |a: &[f64], b: &[f64]| {
        a.iter()
            .zip(b)
            .map(|(x, y)| (x - y).abs())
            .fold(0.0, f64::max)
    };
    let mut report = EquivalenceReport {
        code: spec.to_string(),
        frame_len,
        trials,
        forward_max_error: 0.0,
        backward_max_error: 0.0,
        full_map_max_error: fbc.then_some(0.0),
    };
    for _ in 0..trials {
        let soft: Vec<f64> = (0..frame_len).map(|_| rng.gen_range(-1.0..=1.0)).collect();
        let probs = bcjr::soft_to_probs(&soft)?;
        let fwd = decoder.forward(&soft)?;
        let bwd = decoder.backward(&soft)?;
        let oracle_fwd = bcjr::forward_pass(&trellis, &probs)?.soft;
        let oracle_bwd = bcjr::backward_pass(&trellis, &probs, BetaInit::ZeroState)?.soft;
        report.forward_max_error = report.forward_max_error.max(max_diff(&fwd, &oracle_fwd));
        report.backward_max_error = report.backward_max_error.max(max_diff(&bwd, &oracle_bwd));
        if let Some(e) = report.full_map_max_error.as_mut() {
            let bidir = bcjr::bidirectional_decode(
                &trellis,
                &probs,
                BetaInit::Uniform,
                OutputScale::Posterior,
            )?;
            *e = e.max(max_diff(&fwd, &bidir));
        }
    }
    Ok(report)
}
