//! End-to-end properties of the BER harness.

use convdual::channel_sim::{
    hard_decision, run_ber, write_ber_csv, ChannelParams, DecoderKind, FrameDecoder, FrameSource,
    SimConfig,
};
use convdual::CodeSpec;
use proptest::prelude::*;

fn code(text: &str) -> CodeSpec {
    CodeSpec::parse(text).unwrap()
}

fn decisions(spec: &CodeSpec, kind: DecoderKind, soft: &[f64]) -> Vec<bool> {
    hard_decision(&FrameDecoder::new(spec, kind).unwrap().decode(soft).unwrap())
}

#[test]
fn combined_decisions_match_bcjr_on_every_bit() {
    for text in ["5/7", "5", "7", "17", "15/13"] {
        let spec = code(text);
        let src = FrameSource::new(spec.clone(), 64, 11).unwrap();
        for ebn0 in [0.0, 4.0, 8.0] {
            let params = ChannelParams::from_ebn0_db(ebn0);
            for i in 0..40 {
                let frame = src.frame(&params, i);
                assert_eq!(
                    decisions(&spec, DecoderKind::DualCombined, &frame.soft),
                    decisions(&spec, DecoderKind::BcjrBidir, &frame.soft),
                    "{text} Eb/N0={ebn0} frame {i}"
                );
            }
        }
    }
}

#[test]
fn fbc_forward_decisions_match_bcjr_on_every_bit() {
    for text in ["1/3", "1/7", "1/13", "1/23"] {
        let spec = code(text);
        let src = FrameSource::new(spec.clone(), 64, 12).unwrap();
        for ebn0 in [0.0, 5.0] {
            let params = ChannelParams::from_ebn0_db(ebn0);
            for i in 0..40 {
                let frame = src.frame(&params, i);
                assert_eq!(
                    decisions(&spec, DecoderKind::DualForward, &frame.soft),
                    decisions(&spec, DecoderKind::BcjrBidir, &frame.soft),
                    "{text} frame {i}"
                );
            }
        }
    }
}

#[test]
fn ber_is_non_increasing_in_ebn0() {
    let grid = vec![0.0, 2.0, 4.0, 6.0, 8.0];
    for decoder in [
        DecoderKind::BcjrBidir,
        DecoderKind::DualSum,
        DecoderKind::DualCombined,
    ] {
        let config = SimConfig {
            code: code("5/7"),
            decoder,
            frame_len: 128,
            frames: 800,
            ebn0_list: grid.clone(),
            seed: 5,
        };
        let records = run_ber(&config).unwrap();
        for pair in records.windows(2) {
            assert!(pair[1].ber <= pair[0].ber, "{decoder}: {pair:?}");
        }
    }
}

#[test]
fn results_do_not_depend_on_thread_count() {
    let config = SimConfig {
        code: code("15/13"),
        decoder: DecoderKind::DualCombined,
        frame_len: 96,
        frames: 300,
        ebn0_list: vec![2.0, 5.0],
        seed: 99,
    };
    let csv_with = |threads| {
        let pool = rayon::ThreadPoolBuilder::new()
            .num_threads(threads)
            .build()
            .unwrap();
        let records = pool.install(|| run_ber(&config)).unwrap();
        let mut buf = Vec::new();
        write_ber_csv(&records, &mut buf).unwrap();
        buf
    };
    let one = csv_with(1);
    assert_eq!(one, csv_with(3));
    assert_eq!(one, csv_with(8));
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(24))]

    #[test]
    fn combined_agrees_with_bcjr_for_any_seed(
        seed in any::<u64>(),
        ebn0 in -2.0f64 .. 10.0,
        idx in 0usize .. 5,
    ) {
        let text = ["5/7", "5", "7", "17", "15/13"][idx];
        let spec = code(text);
        let frame = FrameSource::new(spec.clone(), 48, seed)
            .unwrap()
            .frame(&ChannelParams::from_ebn0_db(ebn0), 0);
        prop_assert_eq!(
            decisions(&spec, DecoderKind::DualCombined, &frame.soft),
            decisions(&spec, DecoderKind::BcjrBidir, &frame.soft)
        );
    }
}
