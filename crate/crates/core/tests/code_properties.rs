use proptest::prelude::*;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use wiretap_chain::experiments::measure_component_errors;
use wiretap_chain::infotheory::mutual_information;
use wiretap_chain::*;

fn noiseless() -> Channel {
    Channel::bsc_pair(0.0, 0.0).unwrap()
}

fn leakage(book: &WiretapCodebook, ch: &Channel) -> f64 {
    exact_block_leakage(book, ch, &CodeLimits::default()).unwrap()
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(48))]

    #[test]
    fn leakage_bounded_by_rate(seed in any::<u64>(), n in 2usize..7, rate in 1usize..3, bin in 0usize..3,
                               p in 0.0f64..0.5, q in 0.0f64..0.5) {
        prop_assume!(rate + bin <= n);
        let ch = Channel::bsc_pair(p, q).unwrap();
        let book = build_wiretap(n, rate, bin, &InputDist::uniform(2), seed, &CodeLimits::default()).unwrap();
        let l = leakage(&book, &ch);
        prop_assert!(l >= 0.0 && l <= rate as f64 + 1e-9);
    }

    #[test]
    fn leakage_invariant_under_bin_permutation(seed in any::<u64>(), perm in Just(vec![0usize, 1, 2, 3]).prop_shuffle()) {
        let ch = Channel::bsc_pair(0.1, 0.2).unwrap();
        let book = build_wiretap(5, 1, 2, &InputDist::uniform(2), seed, &CodeLimits::default()).unwrap();
        let permuted = book.permute_within_bins(&perm).unwrap();
        prop_assert!((leakage(&book, &ch) - leakage(&permuted, &ch)).abs() < 1e-12);
    }

    #[test]
    fn noiseless_round_trip_with_distinct_codewords(seed in any::<u64>(), rate in 1usize..3) {
        let ch = noiseless();
        let book = build_wiretap(8, rate, 1, &InputDist::uniform(2), seed, &CodeLimits::default()).unwrap();
        let rows: Vec<&[usize]> = (0..book.num_bins()).flat_map(|w| book.bin(w)).collect();
        let distinct = rows.iter().enumerate().all(|(i, a)| rows[..i].iter().all(|b| a != b));
        prop_assume!(distinct);
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        for w in 0..book.num_bins() {
            let x = book.encode(w, &mut rng).unwrap();
            prop_assert_eq!(book.decode(&x, &ch).unwrap(), w);
        }
        let code = build_channel(8, 1 << rate, &InputDist::uniform(2), seed, &CodeLimits::default()).unwrap();
        let distinct = (0..code.num_codewords())
            .all(|a| (0..a).all(|b| code.codeword(a) != code.codeword(b)));
        prop_assume!(distinct);
        for c in 0..code.num_codewords() {
            prop_assert_eq!(code.decode(&code.encode(c).unwrap(), &ch).unwrap(), c);
        }
    }
}

fn mean_sd(v: &[f64]) -> (f64, f64) {
    let m = v.iter().sum::<f64>() / v.len() as f64;
    let var = v.iter().map(|x| (x - m).powi(2)).sum::<f64>() / (v.len() - 1) as f64;
    (m, var.sqrt())
}

#[test]
fn averaged_normalized_leakage_drops_with_blocklength() {
    // rate 1/4, randomization 1/2: inside the secrecy region of this cascade
    let ch = Channel::bsc_pair(0.05, 0.3).unwrap();
    let run = |n: usize| -> Vec<f64> {
        (0..24)
            .map(|seed| {
                let book = build_wiretap(n, n / 4, n / 2, &InputDist::uniform(2), seed, &CodeLimits::default())
                    .unwrap();
                leakage(&book, &ch) / n as f64
            })
            .collect()
    };
    let (m4, s4) = mean_sd(&run(4));
    let (m8, s8) = mean_sd(&run(8));
    let se = (s4 * s4 / 24.0 + s8 * s8 / 24.0).sqrt();
    assert!(m8 <= m4 + 3.0 * se, "n=8 {m8} vs n=4 {m4} (se {se})");
}

fn block_error(n: usize, trials: usize) -> f64 {
    let ch = Channel::bsc_pair(0.1, 0.0).unwrap();
    let s = SlotSchedule::with_lambda(1, 1, n, 1, None).unwrap();
    let mut total = 0.0;
    let books = 8;
    for seed in 0..books {
        let cb = CodebookSet::build(&s, &InputDist::uniform(2), 2, seed, &CodeLimits::default()).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        total += measure_component_errors(&ch, &cb, trials, &mut rng).unwrap().epsilon();
    }
    total / books as f64
}

#[test]
fn wiretap_error_falls_with_blocklength() {
    let (e4, e8) = (block_error(4, 10_000), block_error(8, 10_000));
    assert!(e8 < e4, "n=8 {e8} vs n=4 {e4}");
}

#[test]
fn channel_code_baseline() {
    let ch = Channel::bsc_pair(0.1, 0.0).unwrap();
    let code = build_channel(8, 4, &InputDist::uniform(2), 0, &CodeLimits::default()).unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(1);
    let mut errors = 0;
    for i in 0..10_000 {
        let c = i % 4;
        let (y, _) = ch.sample_block(code.codeword(c), &mut rng).unwrap();
        errors += (code.decode(&y, &ch).unwrap() != c) as usize;
    }
    assert!((errors as f64) / 10_000.0 < 0.35);
}

#[test]
fn exact_leakage_agrees_with_monte_carlo() {
    let ch = Channel::bsc_pair(0.1, 0.3).unwrap();
    let book = build_wiretap(6, 1, 2, &InputDist::uniform(2), 17, &CodeLimits::default()).unwrap();
    let exact = leakage(&book, &ch);
    let mut rng = ChaCha8Rng::seed_from_u64(2);
    let samples = 200_000;
    let mut counts = vec![vec![0.0; 64]; 2];
    for i in 0..samples {
        let w = i % 2;
        let x = book.encode(w, &mut rng).unwrap();
        let (_, z) = ch.sample_block(&x, &mut rng).unwrap();
        let idx = z.iter().fold(0, |a, &s| a * 2 + s);
        counts[w][idx] += 1.0 / samples as f64;
    }
    let plug_in = mutual_information(&counts).unwrap();
    // plug-in bias is about (cells - rows - cols + 1) / (2 N ln 2)
    let bias = (2.0 * 64.0 - 2.0 - 64.0 + 1.0) / (2.0 * samples as f64 * std::f64::consts::LN_2);
    assert!((plug_in - bias - exact).abs() < 4e-3, "{plug_in} vs {exact}");
}

#[test]
fn table_dump_restores() {
    let book = build_wiretap(6, 2, 1, &InputDist::uniform(2), 5, &CodeLimits::default()).unwrap();
    let text = book.spec().to_json().unwrap();
    match CodebookSpec::from_json(&text).unwrap().restore(&CodeLimits::default()).unwrap() {
        wiretap_chain::wiretap_code::Codebook::Wiretap(b) => assert_eq!(b, book),
        other => panic!("restored {other:?}"),
    }
}
