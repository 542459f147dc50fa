//! Reference BCJR MAP decoder over an explicit trellis.
//!
//! The decoder takes per-position coded-bit probabilities `p(c_k = 0/1)`
//! and produces soft estimates `x̂_{b_k} = p(b_k = 0) - p(b_k = 1)` of the
//! information bits. Branch metrics are the channel probabilities only,
//! `γ_k(m', m) = p(c_k = c(m', m))`; the information bits carry no prior.
//!
//! Forward metrics start from state 0. Backward metrics start either from
//! state 0 or uniformly. Both are renormalized to sum 1 at every step.

use thiserror::Error;

use crate::codes::Trellis;

/// Lower clamp applied to probabilities before use.
pub const PROB_EPSILON: f64 = 1e-300;

/// Slack allowed on `|x̂| <= 1` and `p0 + p1 = 1`.
pub const SOFT_TOLERANCE: f64 = 1e-12;

/// Errors from the BCJR decoder.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum BcjrError {
    /// A soft value outside `[-1, 1]` (or NaN).
    #[error("soft value {0} outside [-1, 1]")]
    SoftOutOfRange(f64),
    /// Probabilities that are negative or do not sum to 1.
    #[error("invalid probability pair ({0}, {1})")]
    InvalidProbabilities(f64, f64),
    /// Frames must contain at least one symbol.
    #[error("empty input sequence")]
    EmptyInput,
}

/// Probabilities of a binary symbol being 0 or 1.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ProbPair {
    pub p0: f64,
    pub p1: f64,
}

impl ProbPair {
    /// Validated constructor.
    pub fn new(p0: f64, p1: f64) -> Result<Self, BcjrError> {
        if !(p0 >= 0.0 && p1 >= 0.0 && (p0 + p1 - 1.0).abs() <= SOFT_TOLERANCE) {
            return Err(BcjrError::InvalidProbabilities(p0, p1));
        }
        Ok(Self { p0, p1 })
    }

    /// `p0 = (1 + x̂)/2`, `p1 = (1 - x̂)/2`.
    pub fn from_soft(x: f64) -> Result<Self, BcjrError> {
        if x.is_nan() || x.abs() > 1.0 + SOFT_TOLERANCE {
            return Err(BcjrError::SoftOutOfRange(x));
        }
        let x = x.clamp(-1.0, 1.0);
        Ok(Self {
            p0: (1.0 + x) / 2.0,
            p1: (1.0 - x) / 2.0,
        })
    }

    /// `x̂ = p0 - p1`.
    #[must_use]
    pub fn to_soft(self) -> f64 {
        self.p0 - self.p1
    }

    /// Probability of `bit`.
    #[must_use]
    pub fn prob(self, bit: bool) -> f64 {
        if bit {
            self.p1
        } else {
            self.p0
        }
    }

    fn clamped(self) -> Self {
        let hi = 1.0 - PROB_EPSILON;
        Self {
            p0: self.p0.clamp(PROB_EPSILON, hi),
            p1: self.p1.clamp(PROB_EPSILON, hi),
        }
    }
}

/// Converts a soft sequence into probability pairs.
pub fn soft_to_probs(soft: &[f64]) -> Result<Vec<ProbPair>, BcjrError> {
    soft.iter().map(|&x| ProbPair::from_soft(x)).collect()
}

/// Initialization of the backward metrics at the end of the frame.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum BetaInit {
    /// `β_K` is a point mass on state 0.
    #[default]
    ZeroState,
    /// `β_K` is uniform over all states.
    Uniform,
}

/// Scale of the bidirectional soft output.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum OutputScale {
    /// Normalized posterior difference `p(b_k=0|y) - p(b_k=1|y)`.
    #[default]
    Posterior,
    /// Unnormalized difference `Σ_{U(0)} αγβ - Σ_{U(1)} αγβ` with `α` and
    /// `β` each normalized to sum 1. This is the posterior difference scaled
    /// by the positive factor `Σ_m α_k(m) β_k(m)`; hard decisions agree.
    AppDifference,
}

/// Soft output of the forward recursion with the metrics `α_0 ..= α_K`.
#[derive(Debug, Clone, PartialEq)]
pub struct ForwardOutput {
    pub soft: Vec<f64>,
    pub alphas: Vec<Vec<f64>>,
}

/// Soft output of the backward recursion with the metrics `β_0 ..= β_K`.
#[derive(Debug, Clone, PartialEq)]
pub struct BackwardOutput {
    pub soft: Vec<f64>,
    pub betas: Vec<Vec<f64>>,
}

fn prepare(probs: &[ProbPair]) -> Result<Vec<ProbPair>, BcjrError> {
    if probs.is_empty() {
        return Err(BcjrError::EmptyInput);
    }
    Ok(probs.iter().map(|p| p.clamped()).collect())
}

fn normalize(v: &mut [f64]) {
    let sum: f64 = v.iter().sum();
    if sum > 0.0 {
        v.iter_mut().for_each(|x| *x /= sum);
    }
}

fn ratio(s0: f64, s1: f64) -> f64 {
    let total = s0 + s1;
    if total > 0.0 {
        ((s0 - s1) / total).clamp(-1.0, 1.0)
    } else {
        0.0
    }
}

fn alphas(trellis: &Trellis, probs: &[ProbPair], renormalize: bool) -> Vec<Vec<f64>> {
    let states = trellis.num_states();
    let mut out = Vec::with_capacity(probs.len() + 1);
    let mut alpha = vec![0.0; states];
    alpha[0] = 1.0;
    out.push(alpha);
    for p in probs {
        let prev = out.last().expect("alpha_0 pushed above");
        let mut next = vec![0.0; states];
        for w in [false, true] {
            for b in trellis.branches(w) {
                next[b.to as usize] += prev[b.from as usize] * p.prob(b.output);
            }
        }
        if renormalize {
            normalize(&mut next);
        }
        out.push(next);
    }
    out
}

fn betas(
    trellis: &Trellis,
    probs: &[ProbPair],
    init: BetaInit,
    renormalize: bool,
) -> Vec<Vec<f64>> {
    let states = trellis.num_states();
    let k_len = probs.len();
    let mut out = vec![Vec::new(); k_len + 1];
    out[k_len] = match init {
        BetaInit::ZeroState => {
            let mut b = vec![0.0; states];
            b[0] = 1.0;
            b
        }
        BetaInit::Uniform => vec![1.0 / states as f64; states],
    };
    for k in (1..=k_len).rev() {
        let p = probs[k - 1];
        let mut prev = vec![0.0; states];
        for w in [false, true] {
            for b in trellis.branches(w) {
                prev[b.from as usize] += p.prob(b.output) * out[k][b.to as usize];
            }
        }
        if renormalize {
            normalize(&mut prev);
        }
        out[k - 1] = prev;
    }
    out
}

fn forward_soft(trellis: &Trellis, probs: &[ProbPair], alphas: &[Vec<f64>]) -> Vec<f64> {
    probs
        .iter()
        .enumerate()
        .map(|(k, p)| {
            let mut s = [0.0; 2];
            for (w, slot) in s.iter_mut().enumerate() {
                *slot = trellis
                    .branches(w == 1)
                    .iter()
                    .map(|b| alphas[k][b.from as usize] * p.prob(b.output))
                    .sum();
            }
            ratio(s[0], s[1])
        })
        .collect()
}

fn backward_soft(trellis: &Trellis, probs: &[ProbPair], betas: &[Vec<f64>]) -> Vec<f64> {
    probs
        .iter()
        .enumerate()
        .map(|(k, p)| {
            let mut s = [0.0; 2];
            for (w, slot) in s.iter_mut().enumerate() {
                *slot = trellis
                    .branches(w == 1)
                    .iter()
                    .map(|b| p.prob(b.output) * betas[k + 1][b.to as usize])
                    .sum();
            }
            ratio(s[0], s[1])
        })
        .collect()
}

fn bidirectional_soft(
    trellis: &Trellis,
    probs: &[ProbPair],
    alphas: &[Vec<f64>],
    betas: &[Vec<f64>],
    scale: OutputScale,
) -> Vec<f64> {
    probs
        .iter()
        .enumerate()
        .map(|(k, p)| {
            let mut s = [0.0; 2];
            for (w, slot) in s.iter_mut().enumerate() {
                *slot = trellis
                    .branches(w == 1)
                    .iter()
                    .map(|b| {
                        alphas[k][b.from as usize] * p.prob(b.output) * betas[k + 1][b.to as usize]
                    })
                    .sum();
            }
            match scale {
                OutputScale::Posterior => ratio(s[0], s[1]),
                OutputScale::AppDifference => s[0] - s[1],
            }
        })
        .collect()
}

/// Forward recursion from state 0 and its soft output
/// `x̂_{b_k} ∝ Σ_{U(0)} α_{k-1}γ_k - Σ_{U(1)} α_{k-1}γ_k`.
pub fn forward_pass(trellis: &Trellis, probs: &[ProbPair]) -> Result<ForwardOutput, BcjrError> {
    let probs = prepare(probs)?;
    let alphas = alphas(trellis, &probs, true);
    let soft = forward_soft(trellis, &probs, &alphas);
    Ok(ForwardOutput { soft, alphas })
}

/// Backward recursion and its soft output
/// `x̂_{b_k} ∝ Σ_{U(0)} γ_k β_k - Σ_{U(1)} γ_k β_k`.
pub fn backward_pass(
    trellis: &Trellis,
    probs: &[ProbPair],
    init: BetaInit,
) -> Result<BackwardOutput, BcjrError> {
    let probs = prepare(probs)?;
    let betas = betas(trellis, &probs, init, true);
    let soft = backward_soft(trellis, &probs, &betas);
    Ok(BackwardOutput { soft, betas })
}

/// Full BCJR MAP soft output combining `α`, `γ` and `β`.
pub fn bidirectional_decode(
    trellis: &Trellis,
    probs: &[ProbPair],
    init: BetaInit,
    scale: OutputScale,
) -> Result<Vec<f64>, BcjrError> {
    let probs = prepare(probs)?;
    let alphas = alphas(trellis, &probs, true);
    let betas = betas(trellis, &probs, init, true);
    Ok(bidirectional_soft(trellis, &probs, &alphas, &betas, scale))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::codes::{binary_inverse_decode, build_trellis, encode, CodeSpec};
    use proptest::prelude::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn trellis(text: &str) -> Trellis {
        build_trellis(&CodeSpec::parse(text).unwrap(), false).unwrap()
    }

    fn probs(soft: &[f64]) -> Vec<ProbPair> {
        soft_to_probs(soft).unwrap()
    }

    fn random_soft(rng: &mut ChaCha8Rng, k: usize) -> Vec<f64> {
        (0..k).map(|_| rng.gen_range(-0.95..0.95)).collect()
    }

    fn bits_of(mut v: u32, k: usize) -> Vec<bool> {
        (0..k)
            .map(|_| {
                let b = v & 1 == 1;
                v >>= 1;
                b
            })
            .collect()
    }

    /// Exact posterior by enumerating every information sequence. With
    /// `terminated` only sequences ending in state 0 count.
    fn enumerate_posterior(text: &str, soft: &[f64], terminated: bool) -> Vec<f64> {
        let spec = CodeSpec::parse(text).unwrap();
        let enc = spec.encoder();
        let k = soft.len();
        let mut s0 = vec![0.0; k];
        let mut s1 = vec![0.0; k];
        for v in 0..(1u32 << k) {
            let info = bits_of(v, k);
            let mut state = 0;
            let mut weight = 1.0;
            for (i, &b) in info.iter().enumerate() {
                let (next, c) = enc.step(state, b);
                state = next;
                weight *= if c {
                    (1.0 - soft[i]) / 2.0
                } else {
                    (1.0 + soft[i]) / 2.0
                };
            }
            if terminated && state != 0 {
                continue;
            }
            for (i, &b) in info.iter().enumerate() {
                if b {
                    s1[i] += weight;
                } else {
                    s0[i] += weight;
                }
            }
        }
        s0.iter().zip(&s1).map(|(a, b)| (a - b) / (a + b)).collect()
    }

    fn max_abs_diff(a: &[f64], b: &[f64]) -> f64 {
        a.iter()
            .zip(b)
            .map(|(x, y)| (x - y).abs())
            .fold(0.0, f64::max)
    }

    #[test]
    fn soft_prob_conversion() {
        assert_eq!(
            ProbPair::from_soft(0.0).unwrap(),
            ProbPair { p0: 0.5, p1: 0.5 }
        );
        assert_eq!(
            ProbPair::from_soft(1.0).unwrap(),
            ProbPair { p0: 1.0, p1: 0.0 }
        );
        let p = ProbPair::from_soft(0.8).unwrap();
        assert!((p.p0 - 0.9).abs() < 1e-15 && (p.p1 - 0.1).abs() < 1e-15);
        assert!((p.to_soft() - 0.8).abs() < 1e-15);
        assert!(ProbPair::from_soft(1.5).is_err());
        assert!(ProbPair::from_soft(f64::NAN).is_err());
        assert!(ProbPair::new(0.7, 0.4).is_err());
        assert!(ProbPair::new(0.7, 0.3).is_ok());
    }

    #[test]
    fn empty_input_is_rejected() {
        let t = trellis("1/7");
        assert_eq!(forward_pass(&t, &[]), Err(BcjrError::EmptyInput));
        assert_eq!(
            backward_pass(&t, &[], BetaInit::ZeroState),
            Err(BcjrError::EmptyInput)
        );
    }

    #[test]
    fn forward_first_step_fbc() {
        let t = trellis("1/7");
        let p = probs(&[0.6, -0.2, 0.3]);
        let out = forward_pass(&t, &p).unwrap();
        assert!((out.alphas[1][0] - p[0].p0).abs() < 1e-15);
        assert!((out.alphas[1][2] - p[0].p1).abs() < 1e-15);
        assert_eq!(out.alphas[1][1], 0.0);
        assert_eq!(out.alphas[1][3], 0.0);
        assert!((out.soft[0] - 0.6).abs() < 1e-15);
    }

    #[test]
    fn forward_fbc_product_rule() {
        let out = forward_pass(&trellis("1/7"), &probs(&[0.8, 0.5, -0.5])).unwrap();
        let expect = [0.8, 0.8 * 0.5, 0.8 * 0.5 * -0.5];
        assert!(max_abs_diff(&out.soft, &expect) < 1e-12, "{:?}", out.soft);
    }

    #[test]
    fn certain_zero_codeword() {
        for text in ["1/7", "7", "5/7", "15/13"] {
            let t = trellis(text);
            let p = vec![ProbPair { p0: 1.0, p1: 0.0 }; 10];
            let out = forward_pass(&t, &p).unwrap();
            assert!(out.soft.iter().all(|&x| (x - 1.0).abs() < 1e-12), "{text}");
        }
    }

    #[test]
    fn fbc_zero_state_beta_near_end() {
        let t = trellis("1/7");
        let soft = [0.3, -0.7, 0.2, 0.9, -0.4];
        let p = probs(&soft);
        let out = backward_pass(&t, &p, BetaInit::ZeroState).unwrap();
        let k = soft.len();
        // Unnormalized β_{K-1}(m) = p_{c_K}(0) for m = 0, 1 and 0 otherwise,
        // so after normalization the two nonzero entries are equal.
        let b = &out.betas[k - 1];
        assert!((b[0] - 0.5).abs() < 1e-15 && (b[1] - 0.5).abs() < 1e-15);
        assert_eq!((b[2], b[3]), (0.0, 0.0));
        let raw = betas(&t, &prepare(&p).unwrap(), BetaInit::ZeroState, false);
        assert!((raw[k - 1][0] - p[k - 1].p0).abs() < 1e-15);
        assert!((raw[k - 1][1] - p[k - 1].p0).abs() < 1e-15);
    }

    #[test]
    fn uniform_beta_without_information() {
        let t = trellis("5/7");
        let p = vec![ProbPair { p0: 0.5, p1: 0.5 }; 12];
        let out = backward_pass(&t, &p, BetaInit::Uniform).unwrap();
        assert!(out.soft.iter().all(|&x| x.abs() < 1e-15));
    }

    #[test]
    fn fbc_beta_is_state_uniform_before_the_tail() {
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        for (text, n) in [("1/7", 2), ("1/13", 3), ("1/23", 4), ("1/3", 1)] {
            let t = trellis(text);
            let p = probs(&random_soft(&mut rng, 20));
            let out = backward_pass(&t, &p, BetaInit::ZeroState).unwrap();
            for k in 0..=20 - n {
                let b = &out.betas[k];
                let spread = b.iter().cloned().fold(f64::MIN, f64::max)
                    - b.iter().cloned().fold(f64::MAX, f64::min);
                assert!(spread <= 1e-12, "{text} k={k} spread={spread}");
            }
        }
    }

    #[test]
    fn fbc_backward_pass_carries_no_information() {
        let mut rng = ChaCha8Rng::seed_from_u64(8);
        for text in ["1/7", "1/13"] {
            let t = trellis(text);
            let p = probs(&random_soft(&mut rng, 16));
            let out = backward_pass(&t, &p, BetaInit::ZeroState).unwrap();
            assert!(out.soft.iter().all(|&x| x.abs() < 1e-12), "{text}");
        }
    }

    #[test]
    fn bidirectional_matches_enumeration() {
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        for text in ["1/7", "7", "5", "17", "15", "5/7", "15/13", "1/13"] {
            let t = trellis(text);
            for k in [1, 5, 10] {
                let soft = random_soft(&mut rng, k);
                let p = probs(&soft);
                let got = bidirectional_decode(&t, &p, BetaInit::Uniform, OutputScale::Posterior)
                    .unwrap();
                let expect = enumerate_posterior(text, &soft, false);
                assert!(max_abs_diff(&got, &expect) < 1e-12, "{text} K={k} uniform");
                let got = bidirectional_decode(&t, &p, BetaInit::ZeroState, OutputScale::Posterior)
                    .unwrap();
                let expect = enumerate_posterior(text, &soft, true);
                assert!(
                    max_abs_diff(&got, &expect) < 1e-12,
                    "{text} K={k} zero-state"
                );
            }
        }
    }

    #[test]
    fn forward_matches_enumeration_of_prefixes() {
        // Forward output at k is the posterior given only c_1..c_k.
        let mut rng = ChaCha8Rng::seed_from_u64(10);
        for text in ["7", "5/7", "15/13", "1/13"] {
            let t = trellis(text);
            let soft = random_soft(&mut rng, 9);
            let out = forward_pass(&t, &probs(&soft)).unwrap();
            for k in 1..=soft.len() {
                let expect = enumerate_posterior(text, &soft[..k], false);
                assert!(
                    (out.soft[k - 1] - expect[k - 1]).abs() < 1e-12,
                    "{text} k={k}"
                );
            }
        }
    }

    #[test]
    fn app_difference_is_positive_rescaling() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        let t = trellis("5/7");
        let p = probs(&random_soft(&mut rng, 12));
        let post =
            bidirectional_decode(&t, &p, BetaInit::ZeroState, OutputScale::Posterior).unwrap();
        let app =
            bidirectional_decode(&t, &p, BetaInit::ZeroState, OutputScale::AppDifference).unwrap();
        for (x, y) in post.iter().zip(&app) {
            assert_eq!(x.signum(), y.signum());
            assert!(y.abs() <= x.abs() + 1e-15);
        }
    }

    #[test]
    fn noiseless_bidirectional_recovers_information() {
        let mut rng = ChaCha8Rng::seed_from_u64(12);
        for text in ["1/7", "7", "5/7", "15/13"] {
            let spec = CodeSpec::parse(text).unwrap();
            let t = build_trellis(&spec, false).unwrap();
            let info: Vec<bool> = (0..24).map(|_| rng.gen()).collect();
            let code = encode(&spec, &info).unwrap();
            let soft: Vec<f64> = code.iter().map(|&c| if c { -1.0 } else { 1.0 }).collect();
            let out =
                bidirectional_decode(&t, &probs(&soft), BetaInit::Uniform, OutputScale::Posterior)
                    .unwrap();
            let decided: Vec<bool> = out.iter().map(|&x| x < 0.0).collect();
            assert_eq!(
                decided,
                binary_inverse_decode(&spec, &code).unwrap(),
                "{text}"
            );
            assert!(out.iter().all(|x| (x.abs() - 1.0).abs() < 1e-12));
        }
    }

    #[test]
    fn fbc_bidirectional_equals_forward() {
        let mut rng = ChaCha8Rng::seed_from_u64(13);
        for (text, n) in [
            ("1/7", 2),
            ("1/13", 3),
            ("1/3", 1),
            ("1/23", 4),
            ("1/31", 4),
        ] {
            let t = trellis(text);
            let p = probs(&random_soft(&mut rng, 24));
            let fwd = forward_pass(&t, &p).unwrap().soft;
            let uni =
                bidirectional_decode(&t, &p, BetaInit::Uniform, OutputScale::Posterior).unwrap();
            assert!(max_abs_diff(&fwd, &uni) <= 1e-12, "{text}");
            let zs =
                bidirectional_decode(&t, &p, BetaInit::ZeroState, OutputScale::Posterior).unwrap();
            assert!(
                max_abs_diff(&fwd[..24 - n], &zs[..24 - n]) <= 1e-12,
                "{text}"
            );
        }
    }

    proptest! {
        #[test]
        fn renormalization_does_not_change_outputs(
            seed in any::<u64>(),
            k in 1usize ..= 20,
            code_idx in 0usize .. 5,
            uniform in any::<bool>(),
        ) {
            let text = ["1/7", "7", "5/7", "15/13", "17"][code_idx];
            let init = if uniform { BetaInit::Uniform } else { BetaInit::ZeroState };
            let t = trellis(text);
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let p = prepare(&probs(&random_soft(&mut rng, k))).unwrap();
            let a_n = alphas(&t, &p, true);
            let a_r = alphas(&t, &p, false);
            let b_n = betas(&t, &p, init, true);
            let b_r = betas(&t, &p, init, false);
            let pairs = [
                (forward_soft(&t, &p, &a_n), forward_soft(&t, &p, &a_r)),
                (backward_soft(&t, &p, &b_n), backward_soft(&t, &p, &b_r)),
                (
                    bidirectional_soft(&t, &p, &a_n, &b_n, OutputScale::Posterior),
                    bidirectional_soft(&t, &p, &a_r, &b_r, OutputScale::Posterior),
                ),
            ];
            for (x, y) in &pairs {
                prop_assert!(max_abs_diff(x, y) <= 1e-12);
            }
        }

        #[test]
        fn outputs_stay_in_range(
            soft in proptest::collection::vec(-1.0f64 ..= 1.0, 1 .. 30),
            code_idx in 0usize .. 4,
        ) {
            let t = trellis(["1/7", "7", "5/7", "15/13"][code_idx]);
            let p = probs(&soft);
            let all = [
                forward_pass(&t, &p).unwrap().soft,
                backward_pass(&t, &p, BetaInit::ZeroState).unwrap().soft,
                bidirectional_decode(&t, &p, BetaInit::Uniform, OutputScale::Posterior).unwrap(),
                bidirectional_decode(&t, &p, BetaInit::ZeroState, OutputScale::AppDifference).unwrap(),
            ];
            for seq in &all {
                prop_assert!(seq.iter().all(|x| x.abs() <= 1.0 + SOFT_TOLERANCE));
            }
        }
    }
}
