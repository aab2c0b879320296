use std::sync::OnceLock;

use blindvote::blindsig::{sign_digest, BallotDigest};
use blindvote::ledger::parse_transcript;
use blindvote::scenario::{run_scenario, Property};
use blindvote::{
    blind, keygen, sign_blinded, unblind, verify, BlindingFactor, KeyPair, Ledger, Outcome, Payload, ScenarioConfig,
    Tally, Uuid, VoterConfig, VoterKind, WindowConfig,
};
use num_bigint::BigUint;
use proptest::prelude::*;

fn key() -> &'static KeyPair {
    static KEY: OnceLock<KeyPair> = OnceLock::new();
    KEY.get_or_init(|| keygen(256, 11).unwrap())
}

fn kind() -> impl Strategy<Value = VoterKind> {
    prop_oneof![
        3 => Just(VoterKind::Honest),
        1 => Just(VoterKind::Ineligible),
        1 => Just(VoterKind::DoubleVote),
        1 => Just(VoterKind::ReplayCast),
        1 => Just(VoterKind::Forger),
    ]
}

fn config() -> impl Strategy<Value = ScenarioConfig> {
    let voter = (kind(), 1u32..=3, prop::sample::select(vec!["A", "B", "C"]));
    (any::<u64>(), prop::collection::vec(voter, 1..6), any::<bool>(), 1u64..5, 1u64..5, 1u64..5).prop_map(
        |(seed, voters, sealed, a, b, c)| {
            let voters = voters
                .into_iter()
                .enumerate()
                .map(|(i, (kind, chances, ballot))| {
                    VoterConfig::honest(format!("v{i}"), ballot).with_kind(kind).with_chances(chances)
                })
                .collect();
            let mut config = ScenarioConfig::new(seed, WindowConfig { st: a, ct: a + b, et: a + b + c }, voters);
            config.key_bits = 64;
            config.sealed = sealed;
            config.forge_attempts = 20;
            config
        },
    )
}

proptest! {
    #[test]
    fn unblinded_signatures_verify(ballot in prop::collection::vec(any::<u8>(), 0..64), uuid in any::<[u8; 16]>(), seed in any::<u64>()) {
        let key = key();
        let digest = BallotDigest::new(&ballot, &Uuid::from_bytes(uuid));
        let mut rng = <rand_chacha::ChaCha20Rng as rand::SeedableRng>::seed_from_u64(seed);
        let r = BlindingFactor::random(key.public(), &mut rng);
        let blinded = blind(&digest, &r, key.public()).unwrap();
        let signed_blinded = sign_blinded(&blinded, key);
        // Signing commutes with blinding: (m·r^e)^d = m^d·r.
        let direct = sign_digest(&digest, key);
        prop_assert_eq!(signed_blinded.value(), &(direct.value() * r.value() % key.public().modulus()));
        let signed = unblind(&signed_blinded, &r, key.public()).unwrap();
        prop_assert_eq!(&signed, &direct);
        prop_assert!(verify(&signed, &digest, key.public()));
        let other = BallotDigest::new(&[ballot.as_slice(), b"x"].concat(), &Uuid::from_bytes(uuid));
        prop_assert!(!verify(&signed, &other, key.public()));
    }

    #[test]
    fn toy_signatures_are_unique(tag in any::<u8>()) {
        let toy = KeyPair::toy();
        let digest = BallotDigest::new(&[tag], &Uuid::from_bytes([tag; 16]));
        let valid = (0u32..3233).filter(|&s| verify(&blindvote::SignedBallot::from_value(BigUint::from(s)), &digest, toy.public())).count();
        prop_assert_eq!(valid, 1);
    }

    #[test]
    fn tally_render_round_trips(ballots in prop::collection::vec(prop::collection::vec(any::<u8>(), 0..6), 0..20)) {
        let tally: Tally = ballots.iter().collect();
        prop_assert_eq!(Tally::parse(&tally.render()).unwrap(), tally.clone());
        prop_assert_eq!(tally.total(), ballots.len() as u64);
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(24))]

    #[test]
    fn scenario_invariants_hold(config in config()) {
        let report = run_scenario(&config).unwrap();
        for property in [Property::Eligibility, Property::PreventionOfMultipleVoting, Property::Verifiability, Property::Robustness] {
            let row = report.assertion(property).unwrap();
            prop_assert!(row.pass, "{}: {}", property, row.detail);
        }
        let chances: u64 = config.voters.iter().filter(|v| v.kind.listed()).map(|v| u64::from(v.chances)).sum();
        prop_assert!(report.tally.as_ref().unwrap().total() <= chances);

        let records = parse_transcript(&report.transcript).unwrap();
        let w = config.windows;
        let mut previous: Vec<(Uuid, Vec<u8>)> = Vec::new();
        for end in 1..=records.len() {
            let ledger = Ledger::replay(&records[..end]).unwrap();
            let (tx, outcome) = ledger.transactions().last().unwrap();
            match (&tx.payload, outcome) {
                (Payload::Cast { .. }, Outcome::Verdict(true)) => prop_assert!((w.ct..w.et).contains(&tx.timestamp)),
                (Payload::Check { .. }, Outcome::Verdict(_)) => prop_assert!((w.st..w.ct).contains(&tx.timestamp)),
                _ => {}
            }
            let current: Vec<(Uuid, Vec<u8>)> = ledger
                .contracts()
                .values()
                .flat_map(|c| c.ballot_box().iter().map(|(u, b)| (*u, b.to_vec())))
                .collect();
            // Entries are only ever added.
            prop_assert!(previous.iter().all(|entry| current.contains(entry)));
            prop_assert!(current.len() - previous.len() <= 1);
            previous = current;
        }
        prop_assert_eq!(Ledger::import(&report.transcript).unwrap().export(), report.transcript);
    }
}
