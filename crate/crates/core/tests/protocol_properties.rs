use proptest::prelude::*;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use wiretap_chain::experiments::{rate_ramp_with_rate, two_proportion_z, Proportion};
use wiretap_chain::infotheory::mutual_information;
use wiretap_chain::seeding::stream_rng;
use wiretap_chain::*;

fn codes(s: &SlotSchedule, seed: u64) -> CodebookSet {
    CodebookSet::build(s, &InputDist::uniform(2), 1, seed, &CodeLimits::default()).unwrap()
}

#[test]
fn one_time_pad_hides_message() {
    for width in 1..=8usize {
        let m = 1usize << width;
        let mut joint = vec![vec![0.0; m]; m];
        for w in 0..m {
            for k in 0..m {
                let wb = BitString::from_index(w as u64, width).unwrap();
                let kb = BitString::from_index(k as u64, width).unwrap();
                let c = (&wb ^ &kb).to_index().unwrap() as usize;
                joint[w][c] += 1.0 / (m * m) as f64;
            }
        }
        assert_eq!(mutual_information(&joint).unwrap(), 0.0, "width {width}");
        let cipher: Vec<f64> = (0..m).map(|c| joint.iter().map(|r| r[c]).sum()).collect();
        assert!(cipher.iter().all(|&p| (p - 1.0 / m as f64).abs() < 1e-15));
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn key_ledger_never_negative(lambda in 1usize..6, rate in 1usize..4, slots in 1usize..30, restart in 1usize..12) {
        let s = SlotSchedule::with_lambda(lambda, rate, 8, slots, Some(restart)).unwrap();
        for pair in s.slots.windows(2) {
            let (prev, cur) = (&pair[0], &pair[1]);
            if cur.position == 1 {
                prop_assert_eq!(cur.key_bits, 0);
            } else {
                prop_assert!(cur.key_bits <= prev.message_bits);
                if cur.position <= lambda + 1 {
                    prop_assert_eq!(cur.key_bits, prev.message_bits);
                }
            }
        }
    }

    #[test]
    fn sampling_is_reproducible(seed in any::<u64>(), x in prop::collection::vec(0usize..2, 0..32)) {
        let ch = Channel::bsc_pair(0.2, 0.3).unwrap();
        let a = ch.sample_block(&x, &mut ChaCha8Rng::seed_from_u64(seed)).unwrap();
        let b = ch.sample_block(&x, &mut ChaCha8Rng::seed_from_u64(seed)).unwrap();
        prop_assert_eq!(a, b);
    }
}

#[test]
fn key_buffers_track_messages() {
    let ch = Channel::bsc_pair(0.15, 0.2).unwrap();
    let s = SlotSchedule::with_lambda(3, 1, 6, 12, Some(4)).unwrap();
    let cb = codes(&s, 1);
    for trial in 0..200u64 {
        let mut rng = ChaCha8Rng::seed_from_u64(trial);
        let mut alice = ProtocolState::new(Role::Alice, &s, &cb).unwrap();
        let mut bob = ProtocolState::new(Role::Bob, &s, &cb).unwrap();
        let mut clean = true;
        for plan in &s.slots {
            if plan.position == 1 {
                clean = true;
            }
            let msg = BitString::random(plan.message_bits, &mut rng);
            let out = alice.alice_encode_slot(&msg, &mut rng).unwrap();
            assert_eq!(alice.key_buffer(), &msg);
            let ys: Vec<Vec<usize>> = out
                .x_blocks
                .iter()
                .map(|x| ch.sample_block(x, &mut rng).unwrap().0)
                .collect();
            let got = bob.bob_decode_slot(&ys, &ch).unwrap();
            clean &= got == msg;
            if clean {
                assert_eq!(bob.key_buffer(), alice.key_buffer());
            }
        }
    }
}

#[test]
fn error_free_throughput_matches_ramp() {
    let ch = Channel::bsc_pair(0.0, 0.4).unwrap();
    let mut checked = 0;
    for (lambda, restart) in [(1, None), (2, None), (3, Some(4)), (4, Some(7))] {
        let n = 12;
        let s = SlotSchedule::with_lambda(lambda, 2, n, 15, restart).unwrap();
        let cb = codes(&s, 9);
        let t = run_session(&ch, &s, &cb, 15, &mut ChaCha8Rng::seed_from_u64(0)).unwrap();
        if t.error_indicators().iter().any(|&e| e) {
            continue;
        }
        let ramp = rate_ramp_with_rate(2.0 / n as f64, lambda, 15, Some(s.restart_period));
        for (rec, row) in t.slots.iter().zip(&ramp) {
            assert_eq!(rec.plan.mini_slots, row.minislots);
            let predicted = (row.rate * (row.minislots * n) as f64).round() as usize;
            assert_eq!(rec.delivered_bits(), predicted);
        }
        checked += 1;
    }
    assert!(checked >= 3);
}

#[test]
fn errors_independent_across_restart_windows() {
    let ch = Channel::bsc_pair(0.12, 0.2).unwrap();
    let s = SlotSchedule::with_lambda(2, 1, 6, 4, Some(2)).unwrap();
    let cb = codes(&s, 4);
    let session = Session::new(&ch, &s, &cb, ChannelPolicy::CascadeOnly).unwrap();
    let (mut after_err, mut after_ok) = (Proportion::new(0, 0), Proportion::new(0, 0));
    for i in 0..20_000u64 {
        let e = session.run(4, &mut stream_rng(7, i)).unwrap().error_indicators();
        let bucket = if e[1] { &mut after_err } else { &mut after_ok };
        bucket.trials += 1;
        bucket.events += e[2] as u64;
    }
    assert!(after_err.trials > 100);
    let z = two_proportion_z(&after_err, &after_ok);
    assert!(z.abs() < 3.5, "z = {z}");
}
