//! Distributional checks on the synthetic data generator across the
//! experiment settings.

use senslab_core::synth::{
    generate_dataset, DatasetKind, ExampleInput, Role, SyntheticParams,
};

/// The six (n_s, n_f, n_d, m) settings used by the oracle tables, at full
/// sequence length.
fn table_settings() -> Vec<SyntheticParams> {
    [
        (3usize, 3usize, 1usize, 6usize),
        (3, 5, 1, 16),
        (3, 7, 1, 28),
        (1, 7, 7, 10),
        (1, 17, 7, 20),
        (1, 32, 7, 36),
    ]
    .into_iter()
    .map(|(n_s, n_f, n_d, m)| SyntheticParams::with_defaults(50, m, n_s, n_f, n_d).unwrap())
    .collect()
}

#[test]
fn role_counts_match_everywhere() {
    for p in table_settings() {
        let n = 1_250usize; // 6 settings × 1250 ≈ 10^4 sequences total
        let data = generate_dataset::<f64>(p, n, DatasetKind::Train, 77).unwrap();
        let expect = (
            p.n_sparse,
            p.n_freq_same(),
            p.n_freq_opposite(),
            p.n_irrelevant(),
        );
        for ex in &data.examples {
            let count = |r: Role| ex.roles.iter().filter(|x| **x == r).count();
            let got = (
                count(Role::Sparse),
                count(Role::FrequentSame),
                count(Role::FrequentOpposite),
                count(Role::Irrelevant),
            );
            assert_eq!(got, expect, "setting {p:?}");
        }
    }
}

#[test]
fn label_balance_within_three_sigma() {
    let p = SyntheticParams::with_defaults(50, 16, 3, 5, 1).unwrap();
    let n = 10_000usize;
    let data = generate_dataset::<f64>(p, n, DatasetKind::Train, 2024).unwrap();
    let plus = data.examples.iter().filter(|e| e.label > 0).count() as f64;
    let sigma = (n as f64 * 0.25).sqrt();
    assert!(
        (plus - n as f64 / 2.0).abs() <= 3.0 * sigma,
        "plus count {plus}"
    );
}

#[test]
fn token_ids_always_in_vocabulary() {
    for p in table_settings() {
        let data = generate_dataset::<f64>(p, 300, DatasetKind::TestId, 5).unwrap();
        for ex in &data.examples {
            let ExampleInput::Tokens(ids) = &ex.input else {
                panic!("expected token input");
            };
            assert!(ids.iter().all(|id| (1..=p.vocab_size).contains(id)));
            // One-hot materialization puts a single 1 in each row.
            let x = ex.to_matrix(p.d_tok);
            for row in x.rows() {
                assert_eq!(row.sum(), 1.0);
                assert_eq!(row.iter().filter(|v| **v != 0.0).count(), 1);
            }
        }
    }
}

#[test]
fn ood_datasets_have_no_matching_sparse_tokens() {
    for p in table_settings() {
        let data = generate_dataset::<f64>(p, 400, DatasetKind::TestOod, 9).unwrap();
        for ex in &data.examples {
            let ExampleInput::Tokens(ids) = &ex.input else {
                panic!("expected token input");
            };
            let forbidden = if ex.label > 0 { 1 } else { 2 };
            for (id, role) in ids.iter().zip(&ex.roles) {
                if *role == Role::Sparse {
                    assert_ne!(*id, forbidden, "label {} setting {p:?}", ex.label);
                }
            }
        }
    }
}

#[test]
fn default_vocab_floors_at_sequence_length() {
    // m = 16 would give M = 41 < T = 50; the default floors at T so the
    // one-hot inputs fit the square attention head.
    let p = SyntheticParams::with_defaults(50, 16, 3, 5, 1).unwrap();
    assert_eq!(p.vocab_size, 50);
    assert_eq!(p.d_tok, 50);
    // m = 20 clears the floor on its own.
    let p = SyntheticParams::with_defaults(50, 20, 1, 17, 7).unwrap();
    assert_eq!(p.vocab_size, 51);
}
