//! Rate-1 convolutional codes: specifications, binary shift-register
//! encoders, the binary inverse decoder and trellis tabulation.
//!
//! Every code is the rational transfer function `a(x)/q(x)` realized in
//! controller canonical form with `n = max(deg a, deg q)` registers:
//!
//! ```text
//! w_k = b_k + q_1 w_{k-1} + ... + q_n w_{k-n}
//! c_k = a_0 w_k + a_1 w_{k-1} + ... + a_n w_{k-n}
//! ```
//!
//! Register `S_i` holds `w_{k-i+1}` after step `k`. A state index is the
//! integer whose binary digits are `S_1 S_2 ... S_n`, so `S_1` is the most
//! significant bit.

use std::fmt;
use std::str::FromStr;

use thiserror::Error;

use crate::gf2poly::{Gf2Poly, PolyError};

/// Largest memory order for which a trellis is tabulated.
pub const MAX_TRELLIS_MEMORY: usize = 16;

/// Largest memory order a binary encoder supports (state fits in a `u64`).
pub const MAX_ENCODER_MEMORY: usize = 63;

/// Errors from code construction, encoding and trellis building.
#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum CodeError {
    #[error(transparent)]
    Poly(#[from] PolyError),
    /// Code text that is not `a/q` or `a` in octal.
    #[error("invalid code text {0:?}")]
    InvalidText(String),
    /// A generator polynomial that is zero or lacks the constant term.
    #[error("generator {0} must be nonzero with constant term 1")]
    BadGenerator(Gf2Poly),
    /// General codes need numerator and denominator of the same degree.
    #[error("numerator {numerator} and denominator {denominator} must have equal degree")]
    UnequalDegrees {
        numerator: Gf2Poly,
        denominator: Gf2Poly,
    },
    /// Encoder memory beyond what a state word can hold.
    #[error("memory order {0} exceeds the encoder limit {MAX_ENCODER_MEMORY}")]
    MemoryTooLarge(usize),
    /// Trellis tabulation limit exceeded.
    #[error("memory order {0} exceeds the trellis limit {MAX_TRELLIS_MEMORY}")]
    TrellisTooLarge(usize),
    /// Frames must contain at least one bit.
    #[error("empty bit sequence")]
    EmptyInput,
    /// Reverse labeling needs `q_n = 1`; otherwise two backward branches into
    /// the same state carry the same input and no encoder can realize the
    /// backward trellis.
    #[error("encoder {0} has no reverse-labeled realization (denominator degree below memory)")]
    NotReversible(String),
}

/// The three classes of rate-1 codes.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum CodeClass {
    /// Feedback only, `1/q(x)`.
    Fbc,
    /// Feed-forward only, `a(x)`.
    Ffc,
    /// General, `a(x)/q(x)`.
    Gc,
}

impl fmt::Display for CodeClass {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Self::Fbc => "FBC",
            Self::Ffc => "FFC",
            Self::Gc => "GC",
        })
    }
}

/// A rate-1 convolutional code `a(x)/q(x)`.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct CodeSpec {
    class: CodeClass,
    numerator: Gf2Poly,
    denominator: Gf2Poly,
    memory: usize,
}

impl CodeSpec {
    /// Builds a code from its generator polynomials, inferring the class from
    /// which side is 1. The memory-0 passthrough `1/1` is classed as FFC.
    pub fn new(numerator: Gf2Poly, denominator: Gf2Poly) -> Result<Self, CodeError> {
        for g in [&numerator, &denominator] {
            if g.is_zero() || !g.coeff(0) {
                return Err(CodeError::BadGenerator(g.clone()));
            }
        }
        let class = match (numerator.is_one(), denominator.is_one()) {
            (_, true) => CodeClass::Ffc,
            (true, false) => CodeClass::Fbc,
            (false, false) => CodeClass::Gc,
        };
        let dn = numerator.degree_or_zero();
        let dq = denominator.degree_or_zero();
        if class == CodeClass::Gc && dn != dq {
            return Err(CodeError::UnequalDegrees {
                numerator,
                denominator,
            });
        }
        let memory = dn.max(dq);
        if memory > MAX_ENCODER_MEMORY {
            return Err(CodeError::MemoryTooLarge(memory));
        }
        Ok(Self {
            class,
            numerator,
            denominator,
            memory,
        })
    }

    /// Parses `"a/q"` or `"a"` with octal polynomials, e.g. `"5/7"`, `"1/7"`,
    /// `"7"`.
    pub fn parse(text: &str) -> Result<Self, CodeError> {
        let text = text.trim();
        let mut parts = text.split('/');
        let num = parts.next().unwrap_or_default();
        let den = parts.next();
        if parts.next().is_some() {
            return Err(CodeError::InvalidText(text.to_string()));
        }
        let numerator =
            Gf2Poly::from_octal(num).map_err(|_| CodeError::InvalidText(text.to_string()))?;
        let denominator = match den {
            Some(d) => {
                Gf2Poly::from_octal(d).map_err(|_| CodeError::InvalidText(text.to_string()))?
            }
            None => Gf2Poly::one(),
        };
        Self::new(numerator, denominator)
    }

    #[must_use]
    pub fn class(&self) -> CodeClass {
        self.class
    }

    /// `a(x)`.
    #[must_use]
    pub fn numerator(&self) -> &Gf2Poly {
        &self.numerator
    }

    /// `q(x)`.
    #[must_use]
    pub fn denominator(&self) -> &Gf2Poly {
        &self.denominator
    }

    /// Memory order `n`.
    #[must_use]
    pub fn memory(&self) -> usize {
        self.memory
    }

    /// The controller-form binary encoder of this code.
    #[must_use]
    pub fn encoder(&self) -> Encoder {
        Encoder::new(&self.numerator, &self.denominator, self.memory)
            .expect("validated code always yields an encoder")
    }
}

impl fmt::Display for CodeSpec {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self.class {
            CodeClass::Ffc => f.write_str(&self.numerator.to_octal()),
            _ => write!(
                f,
                "{}/{}",
                self.numerator.to_octal(),
                self.denominator.to_octal()
            ),
        }
    }
}

impl FromStr for CodeSpec {
    type Err = CodeError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        Self::parse(s)
    }
}

/// Register labeling of a binary encoder.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Labeling {
    /// New values enter `S_1`; registers shift towards `S_n`.
    Normal,
    /// Reverse memory labeling: new values enter `S_n`; registers shift
    /// towards `S_1`. Runs the normal encoder's trellis backwards in time.
    Reversed,
}

/// A binary shift-register encoder for `num(x)/den(x)` with `memory`
/// registers.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct Encoder {
    memory: usize,
    labeling: Labeling,
    numerator: Gf2Poly,
    denominator: Gf2Poly,
    /// `a_0`.
    direct: bool,
    /// `a_n`, used by the reverse-labeled update.
    last_numerator: bool,
    /// Feed-forward taps `a_1..a_n` placed on the state bits `S_1..S_n`.
    forward_mask: u64,
    /// Feedback taps `q_1..q_n` placed on the state bits `S_1..S_n`.
    feedback_mask: u64,
}

impl Encoder {
    /// Builds the normal-labeled controller-form encoder. Both polynomials
    /// must have degree at most `memory`, and `den` needs constant term 1.
    pub fn new(num: &Gf2Poly, den: &Gf2Poly, memory: usize) -> Result<Self, CodeError> {
        if memory > MAX_ENCODER_MEMORY {
            return Err(CodeError::MemoryTooLarge(memory));
        }
        if den.is_zero() || !den.coeff(0) {
            return Err(CodeError::BadGenerator(den.clone()));
        }
        if num.degree_or_zero() > memory || den.degree_or_zero() > memory {
            return Err(CodeError::MemoryTooLarge(memory));
        }
        let mut forward_mask = 0u64;
        let mut feedback_mask = 0u64;
        for i in 1..=memory {
            let bit = 1u64 << (memory - i);
            if num.coeff(i) {
                forward_mask |= bit;
            }
            if den.coeff(i) {
                feedback_mask |= bit;
            }
        }
        Ok(Self {
            memory,
            labeling: Labeling::Normal,
            numerator: num.clone(),
            denominator: den.clone(),
            direct: num.coeff(0),
            last_numerator: memory > 0 && num.coeff(memory),
            forward_mask,
            feedback_mask,
        })
    }

    #[must_use]
    pub fn memory(&self) -> usize {
        self.memory
    }

    #[must_use]
    pub fn labeling(&self) -> Labeling {
        self.labeling
    }

    /// Number of states, `2^memory`.
    #[must_use]
    pub fn num_states(&self) -> usize {
        1usize << self.memory
    }

    /// Transfer function `(num, den)` this encoder realizes in its own time
    /// direction. A reverse-labeled encoder realizes the reciprocals
    /// `x^n num(1/x) / x^n den(1/x)`.
    #[must_use]
    pub fn transfer(&self) -> (Gf2Poly, Gf2Poly) {
        match self.labeling {
            Labeling::Normal => (self.numerator.clone(), self.denominator.clone()),
            Labeling::Reversed => (
                self.numerator.reciprocal(self.memory),
                self.denominator.reciprocal(self.memory),
            ),
        }
    }

    /// The reverse memory-labeled counterpart of a normal encoder.
    ///
    /// Mirrors register indices (`S_i` becomes `S_{n+1-i}`) and the tap
    /// coefficients (`a_i` becomes `a_{n-i}`, `q_i` becomes `q_{n-i}`).
    /// Requires `q_n = 1`.
    pub fn reverse_labeled(&self) -> Result<Self, CodeError> {
        if self.labeling == Labeling::Reversed {
            return Ok(Self {
                labeling: Labeling::Normal,
                ..self.clone()
            });
        }
        if self.memory > 0 && !self.denominator.coeff(self.memory) {
            return Err(CodeError::NotReversible(format!(
                "{}/{}",
                self.numerator.to_octal(),
                self.denominator.to_octal()
            )));
        }
        Ok(Self {
            labeling: Labeling::Reversed,
            ..self.clone()
        })
    }

    /// One clock of the encoder: returns `(next_state, output_bit)`.
    #[must_use]
    pub fn step(&self, state: u64, input: bool) -> (u64, bool) {
        let n = self.memory;
        if n == 0 {
            return (0, input);
        }
        match self.labeling {
            Labeling::Normal => {
                let w = input ^ parity(state & self.feedback_mask);
                let c = (self.direct & w) ^ parity(state & self.forward_mask);
                ((u64::from(w) << (n - 1)) | (state >> 1), c)
            }
            Labeling::Reversed => {
                // The state holds (w_k, w_{k-1}, ..., w_{k-n+1}); recover
                // w_{k-n} from the feedback relation and drop w_k.
                let top = (state >> (n - 1)) & 1 == 1;
                let inner = (state << 1) & self.state_mask();
                let oldest = input ^ top ^ parity(inner & self.feedback_mask);
                let c = (self.direct & top)
                    ^ parity(inner & self.forward_mask)
                    ^ (self.last_numerator & oldest);
                (inner | u64::from(oldest), c)
            }
        }
    }

    /// Input bit that makes the next fed-back value zero; `memory` such
    /// inputs drive a normal encoder to state 0.
    #[must_use]
    pub fn zeroing_input(&self, state: u64) -> bool {
        parity(state & self.feedback_mask)
    }

    fn state_mask(&self) -> u64 {
        if self.memory == 64 {
            u64::MAX
        } else {
            (1u64 << self.memory) - 1
        }
    }

    /// Runs the encoder from state 0 over `input`.
    #[must_use]
    pub fn run(&self, input: &[bool]) -> Vec<bool> {
        let mut state = 0u64;
        input
            .iter()
            .map(|&b| {
                let (next, c) = self.step(state, b);
                state = next;
                c
            })
            .collect()
    }
}

fn parity(x: u64) -> bool {
    x.count_ones() & 1 == 1
}

/// Encodes `info` from the all-zero state without a termination tail.
pub fn encode(spec: &CodeSpec, info: &[bool]) -> Result<Vec<bool>, CodeError> {
    if info.is_empty() {
        return Err(CodeError::EmptyInput);
    }
    Ok(spec.encoder().run(info))
}

/// Recovers the information bits of a zero-started codeword by running the
/// encoder of `q(x)/a(x)`.
pub fn binary_inverse_decode(spec: &CodeSpec, codeword: &[bool]) -> Result<Vec<bool>, CodeError> {
    if codeword.is_empty() {
        return Err(CodeError::EmptyInput);
    }
    let inverse = Encoder::new(spec.denominator(), spec.numerator(), spec.memory())?;
    Ok(inverse.run(codeword))
}

/// The reverse memory-labeled encoder of `spec`.
pub fn reverse_label(spec: &CodeSpec) -> Result<Encoder, CodeError> {
    spec.encoder().reverse_labeled()
}

/// One branch of a trellis section.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Branch {
    pub from: u32,
    pub to: u32,
    pub output: bool,
}

/// Explicit state-transition table of an encoder.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Trellis {
    memory: usize,
    /// `next[m'][w]`.
    next: Vec<[u32; 2]>,
    /// `output[m'][w]`.
    output: Vec<[bool; 2]>,
    /// Branch sets `U(w)` for `w = 0, 1`.
    branches: [Vec<Branch>; 2],
}

impl Trellis {
    /// Tabulates all transitions of `encoder`.
    pub fn from_encoder(encoder: &Encoder) -> Result<Self, CodeError> {
        let memory = encoder.memory();
        if memory > MAX_TRELLIS_MEMORY {
            return Err(CodeError::TrellisTooLarge(memory));
        }
        let states = encoder.num_states();
        let mut next = Vec::with_capacity(states);
        let mut output = Vec::with_capacity(states);
        let mut branches = [Vec::with_capacity(states), Vec::with_capacity(states)];
        for m in 0..states {
            let mut nx = [0u32; 2];
            let mut out = [false; 2];
            for w in 0..2 {
                let (to, c) = encoder.step(m as u64, w == 1);
                nx[w] = to as u32;
                out[w] = c;
                branches[w].push(Branch {
                    from: m as u32,
                    to: to as u32,
                    output: c,
                });
            }
            next.push(nx);
            output.push(out);
        }
        Ok(Self {
            memory,
            next,
            output,
            branches,
        })
    }

    #[must_use]
    pub fn memory(&self) -> usize {
        self.memory
    }

    #[must_use]
    pub fn num_states(&self) -> usize {
        self.next.len()
    }

    /// Next state from `from` on input `w`.
    #[must_use]
    pub fn next_state(&self, from: usize, w: bool) -> usize {
        self.next[from][usize::from(w)] as usize
    }

    /// Output bit `c_k(m', m)` on the branch leaving `from` with input `w`.
    #[must_use]
    pub fn output(&self, from: usize, w: bool) -> bool {
        self.output[from][usize::from(w)]
    }

    /// Branch set `U(b = w)`.
    #[must_use]
    pub fn branches(&self, w: bool) -> &[Branch] {
        &self.branches[usize::from(w)]
    }

    /// Number of branches entering each state.
    #[must_use]
    pub fn in_degrees(&self) -> Vec<usize> {
        let mut deg = vec![0; self.num_states()];
        for set in &self.branches {
            for b in set {
                deg[b.to as usize] += 1;
            }
        }
        deg
    }
}

/// Tabulates the trellis of `spec`, or of its reverse-labeled encoder.
pub fn build_trellis(spec: &CodeSpec, reversed: bool) -> Result<Trellis, CodeError> {
    if spec.memory() > MAX_TRELLIS_MEMORY {
        return Err(CodeError::TrellisTooLarge(spec.memory()));
    }
    let encoder = if reversed {
        reverse_label(spec)?
    } else {
        spec.encoder()
    };
    Trellis::from_encoder(&encoder)
}

/// Checks that every forward transition `(m' -> m, w, c)` of `encoder` is
/// matched by the transition `(m -> m', w, c)` of its reverse-labeled
/// counterpart. Returns the first mismatching `(m', w)` if any.
pub fn mirroring_violation(encoder: &Encoder) -> Result<Option<(u64, bool)>, CodeError> {
    let reversed = encoder.reverse_labeled()?;
    for from in 0..encoder.num_states() as u64 {
        for w in [false, true] {
            let (to, c) = encoder.step(from, w);
            if reversed.step(to, w) != (from, c) {
                return Ok(Some((from, w)));
            }
        }
    }
    Ok(None)
}
