//! BPSK over AWGN, a deterministic Monte-Carlo BER harness and a decoder
//! complexity benchmark.
//!
//! Every frame draws its information bits and noise from its own ChaCha
//! stream keyed by `(seed, Eb/N0)` and selected by the frame index, so
//! results do not depend on how frames are spread over threads, and all
//! decoders at one `(seed, Eb/N0)` see the same frames.
//!
//! Frames of feed-forward and general codes end with `n` termination bits
//! that return the encoder to state 0, and their BCJR decoder assumes the
//! zero end state (the convention under which the combining weights are
//! exact). Frames of feedback-only codes are not terminated and their BCJR
//! decoder starts the backward recursion uniformly (the convention under
//! which forward dual decoding is the full MAP decoder at every position).

use std::fmt;
use std::io::Write;
use std::str::FromStr;
use std::time::Instant;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use rayon::prelude::*;
use thiserror::Error;

use crate::bcjr::{self, BcjrError, BetaInit, OutputScale};
use crate::codes::{build_trellis, CodeClass, CodeError, CodeSpec, Trellis};
use crate::combine::{self, CombineError, WeightPair, WeightProfile};
use crate::dualsiso::DualDecoder;
use crate::gf2poly::Gf2Poly;

/// Largest soft value produced by the channel; keeps `|x̂| < 1` strictly.
pub const MAX_CHANNEL_SOFT: f64 = 1.0 - f64::EPSILON / 2.0;

/// Errors from simulation setup and benchmarking.
#[derive(Debug, Error)]
pub enum SimError {
    #[error(transparent)]
    Code(#[from] CodeError),
    #[error(transparent)]
    Soft(#[from] BcjrError),
    #[error(transparent)]
    Combine(#[from] CombineError),
    #[error("decoder {decoder} does not support code {code}: {reason}")]
    Unsupported {
        decoder: DecoderKind,
        code: String,
        reason: &'static str,
    },
    #[error("invalid configuration: {0}")]
    InvalidConfig(String),
    #[error("unknown decoder {0:?}")]
    UnknownDecoder(String),
    #[error("no benchmark polynomial for memory order {0}")]
    UnsupportedOrder(usize),
    #[error(transparent)]
    Csv(#[from] csv::Error),
}

/// AWGN channel for rate-1 BPSK with unit symbol energy.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ChannelParams {
    pub ebn0_db: f64,
    /// Noise standard deviation, `sigma^2 = 1 / (2 * 10^(Eb/N0 / 10))`.
    pub sigma: f64,
}

impl ChannelParams {
    #[must_use]
    pub fn from_ebn0_db(ebn0_db: f64) -> Self {
        let variance = 1.0 / (2.0 * 10f64.powf(ebn0_db / 10.0));
        Self {
            ebn0_db,
            sigma: variance.sqrt(),
        }
    }

    #[must_use]
    pub fn noise_variance(&self) -> f64 {
        self.sigma * self.sigma
    }
}

/// Bit 0 maps to +1, bit 1 to -1.
#[must_use]
pub fn modulate_bpsk(bits: &[bool]) -> Vec<f64> {
    bits.iter().map(|&b| if b { -1.0 } else { 1.0 }).collect()
}

/// Adds Gaussian noise and returns `x̂ = tanh(y / sigma^2)`, the soft
/// estimate from the channel LLR `2y / sigma^2`.
pub fn awgn_soft_estimates<R: Rng + ?Sized>(
    x: &[f64],
    params: &ChannelParams,
    rng: &mut R,
) -> Vec<f64> {
    let variance = params.noise_variance();
    x.iter()
        .map(|&s| {
            let noise: f64 = rng.sample(StandardNormal);
            let y = s + params.sigma * noise;
            (y / variance)
                .tanh()
                .clamp(-MAX_CHANNEL_SOFT, MAX_CHANNEL_SOFT)
        })
        .collect()
}

/// Hard decision: `x̂ >= 0` is bit 0.
#[must_use]
pub fn hard_decision(soft: &[f64]) -> Vec<bool> {
    soft.iter().map(|&x| x < 0.0).collect()
}

/// Decoder variants of the BER harness.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum DecoderKind {
    /// Bidirectional BCJR MAP decoder.
    BcjrBidir,
    /// Forward dual decoder; full MAP for feedback-only codes.
    DualForward,
    /// Plain sum of forward and backward dual outputs.
    DualSum,
    /// Weighted combination of forward and backward dual outputs.
    DualCombined,
}

impl DecoderKind {
    pub const ALL: [Self; 4] = [
        Self::BcjrBidir,
        Self::DualForward,
        Self::DualSum,
        Self::DualCombined,
    ];

    #[must_use]
    pub fn name(self) -> &'static str {
        match self {
            Self::BcjrBidir => "bcjr-bidir",
            Self::DualForward => "dual-forward",
            Self::DualSum => "dual-sum",
            Self::DualCombined => "dual-combined",
        }
    }
}

impl fmt::Display for DecoderKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for DecoderKind {
    type Err = SimError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        Self::ALL
            .into_iter()
            .find(|d| d.name() == s.trim())
            .ok_or_else(|| SimError::UnknownDecoder(s.to_string()))
    }
}

/// Whether frames of this code end in state 0.
#[must_use]
pub fn is_terminated(spec: &CodeSpec) -> bool {
    spec.class() != CodeClass::Fbc
}

/// A ready-to-run decoder for one code.
#[derive(Debug, Clone)]
pub enum FrameDecoder {
    Bcjr {
        trellis: Trellis,
        init: BetaInit,
    },
    DualForward(DualDecoder),
    DualSum(DualDecoder),
    DualCombined {
        dual: DualDecoder,
        profile: WeightProfile,
    },
}

impl FrameDecoder {
    /// Prepares `kind` for `spec`, rejecting unsupported pairings.
    pub fn new(spec: &CodeSpec, kind: DecoderKind) -> Result<Self, SimError> {
        let unsupported = |reason| SimError::Unsupported {
            decoder: kind,
            code: spec.to_string(),
            reason,
        };
        Ok(match kind {
            DecoderKind::BcjrBidir => Self::Bcjr {
                trellis: build_trellis(spec, false)?,
                init: if is_terminated(spec) {
                    BetaInit::ZeroState
                } else {
                    BetaInit::Uniform
                },
            },
            DecoderKind::DualForward => {
                if spec.class() != CodeClass::Fbc {
                    return Err(unsupported(
                        "forward dual decoding is full MAP only for FBC codes",
                    ));
                }
                Self::DualForward(DualDecoder::new(spec))
            }
            DecoderKind::DualSum => Self::DualSum(DualDecoder::new(spec)),
            DecoderKind::DualCombined => Self::DualCombined {
                dual: DualDecoder::new(spec),
                profile: WeightProfile::verified_for(spec)
                    .ok_or_else(|| unsupported("no combining-weight profile for this code"))?,
            },
        })
    }

    /// Soft information-bit estimates for one frame of channel soft values.
    pub fn decode(&self, soft: &[f64]) -> Result<Vec<f64>, SimError> {
        Ok(match self {
            Self::Bcjr { trellis, init } => {
                let probs = bcjr::soft_to_probs(soft)?;
                bcjr::bidirectional_decode(trellis, &probs, *init, OutputScale::Posterior)?
            }
            Self::DualForward(dual) => dual.forward(soft)?,
            Self::DualSum(dual) => {
                let unit = vec![WeightPair { fwd: 1.0, bwd: 1.0 }; soft.len()];
                combine::combine_outputs(&dual.forward(soft)?, &dual.backward(soft)?, &unit)?
            }
            Self::DualCombined { dual, profile } => {
                let weights = combine::compute_weights(*profile, soft)?;
                combine::combine_outputs(
                    &dual.forward(soft)?,
                    &dual.backward(soft)?,
                    &weights.pairs,
                )?
            }
        })
    }
}

/// One transmitted frame.
#[derive(Debug, Clone, PartialEq)]
pub struct Frame {
    pub info: Vec<bool>,
    pub soft: Vec<f64>,
}

/// Deterministic frame generator.
#[derive(Debug, Clone)]
pub struct FrameSource {
    spec: CodeSpec,
    frame_len: usize,
    seed: u64,
}

impl FrameSource {
    pub fn new(spec: CodeSpec, frame_len: usize, seed: u64) -> Result<Self, SimError> {
        if frame_len == 0 {
            return Err(SimError::InvalidConfig(
                "frame length must be at least 1".into(),
            ));
        }
        if is_terminated(&spec) && frame_len <= spec.memory() {
            return Err(SimError::InvalidConfig(format!(
                "frame length {frame_len} leaves no room for {} termination bits",
                spec.memory()
            )));
        }
        Ok(Self {
            spec,
            frame_len,
            seed,
        })
    }

    /// The random stream of frame `index` at `ebn0_db`.
    #[must_use]
    pub fn frame_rng(&self, ebn0_db: f64, index: u64) -> ChaCha8Rng {
        let key = self.seed ^ ebn0_db.to_bits().rotate_left(29);
        let mut rng = ChaCha8Rng::seed_from_u64(key);
        rng.set_stream(index);
        rng
    }

    /// Information bits, encoding, BPSK and AWGN for frame `index`.
    #[must_use]
    pub fn frame(&self, params: &ChannelParams, index: u64) -> Frame {
        let mut rng = self.frame_rng(params.ebn0_db, index);
        let encoder = self.spec.encoder();
        let tail = if is_terminated(&self.spec) {
            self.spec.memory()
        } else {
            0
        };
        let mut state = 0;
        let mut info = Vec::with_capacity(self.frame_len);
        let mut code = Vec::with_capacity(self.frame_len);
        for k in 0..self.frame_len {
            let b = if k < self.frame_len - tail {
                rng.gen::<bool>()
            } else {
                encoder.zeroing_input(state)
            };
            let (next, c) = encoder.step(state, b);
            state = next;
            info.push(b);
            code.push(c);
        }
        let soft = awgn_soft_estimates(&modulate_bpsk(&code), params, &mut rng);
        Frame { info, soft }
    }
}

/// Configuration of a BER run.
#[derive(Debug, Clone, PartialEq)]
pub struct SimConfig {
    pub code: CodeSpec,
    pub decoder: DecoderKind,
    pub frame_len: usize,
    pub frames: u64,
    pub ebn0_list: Vec<f64>,
    pub seed: u64,
}

/// One row of BER output.
#[derive(Debug, Clone, PartialEq)]
pub struct BerRecord {
    pub code: String,
    pub decoder: DecoderKind,
    pub ebn0_db: f64,
    pub frames: u64,
    pub bit_errors: u64,
    /// `bit_errors / (frames * K)`.
    pub ber: f64,
    pub seed: u64,
}

/// Simulates every Eb/N0 point of `config`. Frames run in parallel on the
/// current rayon pool; error counts are summed as integers.
pub fn run_ber(config: &SimConfig) -> Result<Vec<BerRecord>, SimError> {
    if config.frames == 0 {
        return Err(SimError::InvalidConfig("frames must be at least 1".into()));
    }
    if let Some(bad) = config.ebn0_list.iter().find(|v| !v.is_finite()) {
        return Err(SimError::InvalidConfig(format!(
            "Eb/N0 {bad} is not finite"
        )));
    }
    let source = FrameSource::new(config.code.clone(), config.frame_len, config.seed)?;
    let decoder = FrameDecoder::new(&config.code, config.decoder)?;
    config
        .ebn0_list
        .iter()
        .map(|&ebn0_db| {
            let params = ChannelParams::from_ebn0_db(ebn0_db);
            let bit_errors = (0..config.frames)
                .into_par_iter()
                .map(|i| {
                    let frame = source.frame(&params, i);
                    let decided = hard_decision(&decoder.decode(&frame.soft)?);
                    Ok::<u64, SimError>(
                        decided
                            .iter()
                            .zip(&frame.info)
                            .filter(|(a, b)| a != b)
                            .count() as u64,
                    )
                })
                .try_reduce(|| 0, |a, b| Ok(a + b))?;
            Ok(BerRecord {
                code: config.code.to_string(),
                decoder: config.decoder,
                ebn0_db,
                frames: config.frames,
                bit_errors,
                ber: bit_errors as f64 / (config.frames as f64 * config.frame_len as f64),
                seed: config.seed,
            })
        })
        .collect()
}

/// Writes BER records as CSV with a header row.
pub fn write_ber_csv<W: Write>(records: &[BerRecord], out: W) -> Result<(), SimError> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record([
        "code",
        "decoder",
        "ebn0_db",
        "frames",
        "bit_errors",
        "ber",
        "seed",
    ])?;
    for r in records {
        w.write_record([
            r.code.clone(),
            r.decoder.to_string(),
            r.ebn0_db.to_string(),
            r.frames.to_string(),
            r.bit_errors.to_string(),
            r.ber.to_string(),
            r.seed.to_string(),
        ])?;
    }
    w.flush().map_err(csv::Error::from)?;
    Ok(())
}

/// Feedback polynomial `q(x)` (octal) used for the memory-`order` benchmark
/// code `1/q(x)`: a primitive polynomial of that degree.
pub fn benchmark_polynomial(order: usize) -> Result<Gf2Poly, SimError> {
    const PRIMITIVE: [&str; 16] = [
        "3", "7", "13", "23", "45", "103", "211", "435", "1021", "2011", "4005", "10123", "20033",
        "42103", "100003", "210013",
    ];
    let text = order
        .checked_sub(1)
        .and_then(|i| PRIMITIVE.get(i))
        .ok_or(SimError::UnsupportedOrder(order))?;
    Ok(Gf2Poly::from_octal(text).expect("table entries are octal"))
}

/// Median per-frame decoding time of one decoder at one memory order.
#[derive(Debug, Clone, PartialEq)]
pub struct BenchRow {
    pub order: usize,
    pub decoder: DecoderKind,
    pub median_us_per_frame: f64,
}

fn median_us<F: FnMut()>(reps: usize, mut f: F) -> f64 {
    let mut times: Vec<f64> = (0..reps.max(1))
        .map(|_| {
            let start = Instant::now();
            f();
            start.elapsed().as_secs_f64() * 1e6
        })
        .collect();
    times.sort_by(f64::total_cmp);
    let mid = times.len() / 2;
    if times.len() % 2 == 1 {
        times[mid]
    } else {
        (times[mid - 1] + times[mid]) / 2.0
    }
}

/// Times bidirectional BCJR against forward dual decoding on the codes
/// `1/q(x)` with `deg q` in `memory_orders`.
pub fn benchmark_complexity(
    memory_orders: &[usize],
    frame_len: usize,
    reps: usize,
) -> Result<Vec<BenchRow>, SimError> {
    if frame_len == 0 {
        return Err(SimError::InvalidConfig(
            "frame length must be at least 1".into(),
        ));
    }
    let mut rows = Vec::new();
    for &order in memory_orders {
        let spec = CodeSpec::new(Gf2Poly::one(), benchmark_polynomial(order)?)?;
        let source = FrameSource::new(spec.clone(), frame_len, order as u64)?;
        let frame = source.frame(&ChannelParams::from_ebn0_db(2.0), 0);
        let bcjr = FrameDecoder::new(&spec, DecoderKind::BcjrBidir)?;
        let dual = FrameDecoder::new(&spec, DecoderKind::DualForward)?;
        for (kind, decoder) in [
            (DecoderKind::BcjrBidir, &bcjr),
            (DecoderKind::DualForward, &dual),
        ] {
            let t = median_us(reps, || {
                std::hint::black_box(decoder.decode(std::hint::black_box(&frame.soft)).ok());
            });
            rows.push(BenchRow {
                order,
                decoder: kind,
                median_us_per_frame: t,
            });
        }
    }
    Ok(rows)
}

/// Writes benchmark rows as CSV with a header row.
pub fn write_bench_csv<W: Write>(rows: &[BenchRow], out: W) -> Result<(), SimError> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(["order", "decoder", "median_us_per_frame"])?;
    for r in rows {
        w.write_record([
            r.order.to_string(),
            r.decoder.to_string(),
            format!("{:.3}", r.median_us_per_frame),
        ])?;
    }
    w.flush().map_err(csv::Error::from)?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::codes::{binary_inverse_decode, encode};

    fn code(text: &str) -> CodeSpec {
        CodeSpec::parse(text).unwrap()
    }

    #[test]
    fn bpsk_mapping() {
        assert_eq!(modulate_bpsk(&[false, true, false]), vec![1.0, -1.0, 1.0]);
        assert!(modulate_bpsk(&[]).is_empty());
        assert_eq!(modulate_bpsk(&[true; 3]), vec![-1.0; 3]);
    }

    #[test]
    fn noise_variance_convention() {
        let p = ChannelParams::from_ebn0_db(0.0);
        assert!((p.noise_variance() - 0.5).abs() < 1e-15);
        let p = ChannelParams::from_ebn0_db(10.0);
        assert!((p.noise_variance() - 0.05).abs() < 1e-15);
    }

    #[test]
    fn channel_soft_values_are_strictly_inside() {
        let params = ChannelParams::from_ebn0_db(40.0);
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let soft = awgn_soft_estimates(&[1.0, -1.0, 1.0], &params, &mut rng);
        assert!(soft.iter().all(|x| x.abs() < 1.0));
        assert!(soft[0] > 0.999 && soft[1] < -0.999);
    }

    #[test]
    fn zero_observation_is_erasure() {
        assert_eq!((0.0f64 / 0.5).tanh(), 0.0);
        assert_eq!(
            hard_decision(&[0.0, -0.0, -1e-300]),
            vec![false, false, true]
        );
    }

    #[test]
    fn decoder_names_round_trip() {
        for d in DecoderKind::ALL {
            assert_eq!(d.name().parse::<DecoderKind>().unwrap(), d);
        }
        assert!("viterbi".parse::<DecoderKind>().is_err());
    }

    #[test]
    fn unsupported_pairings_fail_before_simulation() {
        assert!(matches!(
            FrameDecoder::new(&code("5/7"), DecoderKind::DualForward),
            Err(SimError::Unsupported { .. })
        ));
        assert!(matches!(
            FrameDecoder::new(&code("15"), DecoderKind::DualCombined),
            Err(SimError::Unsupported { .. })
        ));
        let config = SimConfig {
            code: code("15"),
            decoder: DecoderKind::DualCombined,
            frame_len: 16,
            frames: 1,
            ebn0_list: vec![1.0],
            seed: 0,
        };
        assert!(run_ber(&config).is_err());
    }

    #[test]
    fn frames_are_valid_codewords() {
        for text in ["5/7", "7", "1/7", "15/13"] {
            let spec = code(text);
            let src = FrameSource::new(spec.clone(), 40, 5).unwrap();
            let frame = src.frame(&ChannelParams::from_ebn0_db(60.0), 3);
            let c = hard_decision(&frame.soft);
            assert_eq!(
                binary_inverse_decode(&spec, &c).unwrap(),
                frame.info,
                "{text}"
            );
            assert_eq!(encode(&spec, &frame.info).unwrap(), c);
            if is_terminated(&spec) {
                let mut s = 0;
                for &b in &frame.info {
                    s = spec.encoder().step(s, b).0;
                }
                assert_eq!(s, 0, "{text}");
            }
        }
    }

    #[test]
    fn frame_streams_are_reproducible_and_distinct() {
        let src = FrameSource::new(code("5/7"), 32, 42).unwrap();
        let p = ChannelParams::from_ebn0_db(1.0);
        assert_eq!(src.frame(&p, 7), src.frame(&p, 7));
        assert_ne!(src.frame(&p, 7), src.frame(&p, 8));
        let other = FrameSource::new(code("5/7"), 32, 43).unwrap();
        assert_ne!(src.frame(&p, 7), other.frame(&p, 7));
    }

    #[test]
    fn frame_length_must_cover_the_tail() {
        assert!(FrameSource::new(code("15/13"), 3, 0).is_err());
        assert!(FrameSource::new(code("1/13"), 3, 0).is_ok());
        assert!(FrameSource::new(code("1/13"), 0, 0).is_err());
    }

    #[test]
    fn noiseless_ber_is_zero() {
        for (text, decoders) in [
            ("5/7", &DecoderKind::ALL[..]),
            (
                "1/7",
                &[
                    DecoderKind::BcjrBidir,
                    DecoderKind::DualForward,
                    DecoderKind::DualSum,
                ][..],
            ),
            ("17", &DecoderKind::ALL[..]),
        ] {
            for &decoder in decoders {
                if decoder == DecoderKind::DualForward && text != "1/7" {
                    continue;
                }
                let config = SimConfig {
                    code: code(text),
                    decoder,
                    frame_len: 64,
                    frames: 20,
                    ebn0_list: vec![60.0],
                    seed: 3,
                };
                let r = run_ber(&config).unwrap();
                assert_eq!(r[0].bit_errors, 0, "{text} {decoder}");
            }
        }
    }

    #[test]
    fn csv_layout() {
        let rec = BerRecord {
            code: "5/7".into(),
            decoder: DecoderKind::DualSum,
            ebn0_db: 2.5,
            frames: 10,
            bit_errors: 3,
            ber: 3.0 / 1280.0,
            seed: 42,
        };
        let mut buf = Vec::new();
        write_ber_csv(&[rec], &mut buf).unwrap();
        assert_eq!(
            String::from_utf8(buf).unwrap(),
            "code,decoder,ebn0_db,frames,bit_errors,ber,seed\n5/7,dual-sum,2.5,10,3,0.00234375,42\n"
        );
        let mut buf = Vec::new();
        write_bench_csv(
            &[BenchRow {
                order: 4,
                decoder: DecoderKind::BcjrBidir,
                median_us_per_frame: 12.34567,
            }],
            &mut buf,
        )
        .unwrap();
        assert_eq!(
            String::from_utf8(buf).unwrap(),
            "order,decoder,median_us_per_frame\n4,bcjr-bidir,12.346\n"
        );
    }

    #[test]
    fn benchmark_codes() {
        assert_eq!(benchmark_polynomial(4).unwrap().to_octal(), "23");
        assert_eq!(benchmark_polynomial(8).unwrap().to_octal(), "435");
        assert!(benchmark_polynomial(0).is_err());
        assert!(benchmark_polynomial(17).is_err());
        for order in 1..=16 {
            assert_eq!(benchmark_polynomial(order).unwrap().degree(), Some(order));
        }
        let rows = benchmark_complexity(&[1, 2], 64, 3).unwrap();
        assert_eq!(rows.len(), 4);
        assert!(rows.iter().all(|r| r.median_us_per_frame >= 0.0));
    }
}
