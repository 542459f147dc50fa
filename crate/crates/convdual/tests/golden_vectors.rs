//! Frozen reference vectors. Run with `CONVDUAL_BLESS=1` to rewrite them.

use std::path::PathBuf;

use convdual::bcjr::{bidirectional_decode, soft_to_probs, BetaInit, OutputScale};
use convdual::channel_sim::{awgn_soft_estimates, ChannelParams, FrameSource};
use convdual::codes::build_trellis;
use convdual::golden::{format_values, parse_values};
use convdual::CodeSpec;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

fn golden_path(name: &str) -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR"))
        .join("tests/golden")
        .join(name)
}

/// Compares against the stored file, or writes it when blessing.
fn check(name: &str, actual: &[f64], tol: f64) {
    let path = golden_path(name);
    if std::env::var_os("CONVDUAL_BLESS").is_some() {
        std::fs::write(&path, format_values(actual)).unwrap();
        return;
    }
    let text = std::fs::read_to_string(&path).unwrap_or_else(|e| panic!("{}: {e}", path.display()));
    let expected = parse_values(&text).unwrap();
    assert_eq!(expected.len(), actual.len(), "{name}");
    for (k, (e, a)) in expected.iter().zip(actual).enumerate() {
        if tol == 0.0 {
            assert_eq!(e.to_bits(), a.to_bits(), "{name}[{k}]: {e} vs {a}");
        } else {
            assert!((e - a).abs() <= tol, "{name}[{k}]: {e} vs {a}");
        }
    }
}

fn gc57_inputs() -> Vec<f64> {
    let mut rng = ChaCha8Rng::seed_from_u64(7);
    (0..8).map(|_| rng.gen_range(-0.95..0.95)).collect()
}

#[test]
fn gc57_inputs_are_frozen() {
    check("gc57_k8_input.txt", &gc57_inputs(), 0.0);
}

#[test]
fn gc57_bidirectional_posterior() {
    let spec = CodeSpec::parse("5/7").unwrap();
    let trellis = build_trellis(&spec, false).unwrap();
    let probs = soft_to_probs(&gc57_inputs()).unwrap();
    let out = bidirectional_decode(
        &trellis,
        &probs,
        BetaInit::ZeroState,
        OutputScale::Posterior,
    )
    .unwrap();
    check("gc57_k8_bidir.txt", &out, 1e-12);
}

#[test]
fn seed_42_first_noise_draw() {
    let mut rng = ChaCha8Rng::seed_from_u64(42);
    let noise: f64 = rng.sample(StandardNormal);
    let mut rng = ChaCha8Rng::seed_from_u64(42);
    let params = ChannelParams::from_ebn0_db(0.0);
    let soft = awgn_soft_estimates(&[1.0], &params, &mut rng);
    assert_eq!(
        soft[0],
        ((1.0 + params.sigma * noise) / params.noise_variance()).tanh()
    );
    check("seed42_first_draw.txt", &[noise, soft[0]], 0.0);
}

#[test]
fn seed_42_first_frame() {
    let src = FrameSource::new(CodeSpec::parse("5/7").unwrap(), 16, 42).unwrap();
    let frame = src.frame(&ChannelParams::from_ebn0_db(2.0), 0);
    check("seed42_gc57_frame0_soft.txt", &frame.soft, 0.0);
}
