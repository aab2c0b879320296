//! Acceptance suite: one PASS or FAIL line per criterion, non-zero exit if any fails.

use std::collections::BTreeSet;
use std::panic;
use std::process::ExitCode;
use std::time::{Duration, Instant};

use blindvote::actors::{decide_and_sign, PermissionList};
use blindvote::blindsig::{fdh, sign_digest, BallotDigest};
use blindvote::scenario::{plaintext_leaks, run_attack, run_scenario, verify_transcript, Expectation, Property};
use blindvote::{
    blind, keygen, sign_blinded, unblind, verify, Account, BlindedBallot, BlindingFactor, ContractError,
    ElectionContract, ElectionParams, KeyPair, Ledger, Organizer, Outcome, Payload, ScenarioConfig, SignedBallot,
    Tally, Uuid, VoterConfig, VoterKind, WindowConfig, Windows,
};
use num_bigint::BigUint;
use num_integer::Integer;
use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha20Rng;

/// Seed for every criterion that needs one. Fixed before the suite was first run.
const SEED: u64 = 1;
const TOY_N: u32 = 3233;

type Check = fn() -> Result<String, String>;

macro_rules! ensure {
    ($cond:expr, $($msg:tt)+) => {
        if !$cond {
            return Err(format!($($msg)+));
        }
    };
}

fn main() -> ExitCode {
    let criteria: [(&str, Check); 10] = [
        ("blind-signature laws", blind_signature_laws),
        ("perfect blinding", perfect_blinding),
        ("correctness", correctness),
        ("eligibility", eligibility),
        ("prevention of multiple voting", multiple_voting),
        ("forgery rejection", forgery_rejection),
        ("fairness in sealed mode", fairness),
        ("verifiability", verifiability),
        ("receipt attack pin", receipt_attack),
        ("window discipline", window_discipline),
    ];
    panic::set_hook(Box::new(|_| {}));
    let mut failures = 0;
    for (i, (name, check)) in criteria.iter().enumerate() {
        let result = panic::catch_unwind(check).unwrap_or_else(|payload| {
            let message = payload
                .downcast_ref::<String>()
                .cloned()
                .or_else(|| payload.downcast_ref::<&str>().map(|s| s.to_string()))
                .unwrap_or_default();
            Err(format!("panicked: {message}"))
        });
        match result {
            Ok(detail) => println!("PASS {:>2} {name}: {detail}", i + 1),
            Err(detail) => {
                failures += 1;
                println!("FAIL {:>2} {name}: {detail}", i + 1);
            }
        }
    }
    println!("{} of {} criteria pass", criteria.len() - failures, criteria.len());
    if failures == 0 {
        ExitCode::SUCCESS
    } else {
        ExitCode::FAILURE
    }
}

fn windows() -> WindowConfig {
    WindowConfig { st: 10, ct: 20, et: 30 }
}

fn toy_units(key: &KeyPair) -> Vec<BlindingFactor> {
    (1..TOY_N).filter_map(|r| BlindingFactor::new(r.into(), key.public()).ok()).collect()
}

fn toy_digest(tag: u8) -> BallotDigest {
    BallotDigest::new(&[tag], &Uuid::from_bytes([tag; 16]))
}

fn ten_voters(a: &str, b: &str) -> Vec<VoterConfig> {
    (0..10).map(|i| VoterConfig::honest(format!("voter{i}"), if i < 6 { a } else { b })).collect()
}

fn blind_signature_laws() -> Result<String, String> {
    let start = Instant::now();
    let key = keygen(2048, SEED).map_err(|e| e.to_string())?;
    let mut rng = ChaCha20Rng::seed_from_u64(SEED);
    for i in 0..1000 {
        let digest = BallotDigest::new(&rng.gen::<[u8; 32]>(), &Uuid::random(&mut rng));
        let r = BlindingFactor::random(key.public(), &mut rng);
        let blinded = blind(&digest, &r, key.public()).map_err(|e| e.to_string())?;
        let signed = unblind(&sign_blinded(&blinded, &key), &r, key.public()).map_err(|e| e.to_string())?;
        ensure!(verify(&signed, &digest, key.public()), "2048-bit pair {i} does not verify");
    }
    let elapsed = start.elapsed();
    ensure!(elapsed < Duration::from_secs(60), "2048-bit run took {elapsed:.1?}");

    let toy = KeyPair::toy();
    let units = toy_units(&toy);
    ensure!(units.len() == 3120, "found {} units modulo 3233", units.len());
    for tag in 0..10 {
        let digest = toy_digest(tag);
        for r in &units {
            let blinded = blind(&digest, r, toy.public()).map_err(|e| e.to_string())?;
            let signed = unblind(&sign_blinded(&blinded, &toy), r, toy.public()).map_err(|e| e.to_string())?;
            ensure!(verify(&signed, &digest, toy.public()), "toy digest {tag}, r = {:?} fails", r.value());
        }
    }
    Ok(format!("1000 pairs at 2048 bits in {elapsed:.1?} with key generation, 31200 toy pairs, 0 failures"))
}

fn perfect_blinding() -> Result<String, String> {
    let toy = KeyPair::toy();
    let units = toy_units(&toy);
    let digest = toy_digest(7);
    let n = BigUint::from(TOY_N);
    ensure!(fdh(&digest, &n).gcd(&n) == BigUint::from(1u32), "fdh is not a unit");
    let blinded: Vec<BigUint> = units
        .iter()
        .map(|r| blind(&digest, r, toy.public()).map(|b| b.value().clone()))
        .collect::<Result<_, _>>()
        .map_err(|e| e.to_string())?;
    let image: BTreeSet<&BigUint> = blinded.iter().collect();
    let group: BTreeSet<&BigUint> = units.iter().map(BlindingFactor::value).collect();
    ensure!(blinded.len() == image.len(), "{} collisions", blinded.len() - image.len());
    ensure!(image == group, "image differs from the unit group");
    Ok(format!("{} blinding factors hit each of the {} units exactly once", units.len(), group.len()))
}

fn correctness() -> Result<String, String> {
    let config = ScenarioConfig::new(SEED, windows(), ten_voters("A", "B"));
    let report = run_scenario(&config).map_err(|e| e.to_string())?;
    let tally = report.tally.clone().ok_or("no tally")?;
    let expected: Tally = ["A"; 6].iter().chain(&["B"; 4]).map(|s| s.as_bytes()).collect();
    ensure!(tally == expected, "tally {:?} != {:?}", tally.render(), expected.render());
    ensure!(report.passed(), "failing rows: {:?}", report.assertions.iter().filter(|a| !a.pass).collect::<Vec<_>>());
    let replayed = Ledger::import(&report.transcript).map_err(|e| e.to_string())?;
    ensure!(replayed.export() == report.transcript, "replayed export differs");
    let contract = replayed.contracts().values().next().ok_or("no contract")?;
    ensure!(contract.tally(30).ok() == Some(expected), "replayed contract tally differs");
    let rerun = run_scenario(&config).map_err(|e| e.to_string())?;
    ensure!(rerun.transcript == report.transcript, "rerun produced a different transcript");
    Ok(format!("tally A:6 B:4; {} entries replay byte-identically", report.entries))
}

fn eligibility() -> Result<String, String> {
    let key = KeyPair::toy();
    let voter = Account::from_seed(1).address();
    let stranger = Account::from_seed(2).address();
    let mut list = PermissionList::new([(voter, 1)]).map_err(|e| e.to_string())?;
    let blinded = BlindedBallot::from_value(65u32.into());
    ensure!(decide_and_sign(&stranger, &blinded, &mut list, &key).is_refusal(), "unlisted sender was signed");
    ensure!(!decide_and_sign(&voter, &blinded, &mut list, &key).is_refusal(), "listed sender was refused");
    ensure!(decide_and_sign(&voter, &blinded, &mut list, &key).is_refusal(), "exhausted sender was signed");

    let kinds = [
        VoterKind::Honest,
        VoterKind::Honest,
        VoterKind::Ineligible,
        VoterKind::DoubleVote,
        VoterKind::ReplayCast,
        VoterKind::Forger,
        VoterKind::Linked,
    ];
    let mut rng = ChaCha20Rng::seed_from_u64(SEED);
    let mut max_fill = 0.0f64;
    for scenario in 0..100u64 {
        let voters: Vec<VoterConfig> = (0..rng.gen_range(1..=8))
            .map(|i| {
                VoterConfig::honest(format!("v{i}"), *["A", "B", "C"].choose(&mut rng).unwrap())
                    .with_kind(*kinds.choose(&mut rng).unwrap())
                    .with_chances(rng.gen_range(1..=3))
            })
            .collect();
        let mut config = ScenarioConfig::new(SEED * 1000 + scenario, windows(), voters);
        config.key_bits = 256;
        config.sealed = rng.gen_bool(0.5);
        config.forge_attempts = 100;
        let report = run_scenario(&config).map_err(|e| format!("scenario {scenario}: {e}"))?;
        let chances: u64 = config.voters.iter().filter(|v| v.kind.listed()).map(|v| u64::from(v.chances)).sum();
        let stored = report.tally.as_ref().map_or(0, Tally::total);
        ensure!(stored <= chances, "scenario {scenario}: {stored} ballots for {chances} chances");
        let row = report.assertion(Property::Eligibility).ok_or("no eligibility row")?;
        ensure!(row.pass, "scenario {scenario}: {}", row.detail);
        if chances > 0 {
            max_fill = max_fill.max(stored as f64 / chances as f64);
        }
    }
    Ok(format!("unlisted and exhausted senders get 0; 100 mixed scenarios within bound (max fill {max_fill:.2})"))
}

fn multiple_voting() -> Result<String, String> {
    let mut rejected = 0;
    for seed in 0..100 {
        let config = ScenarioConfig::new(seed, windows(), ten_voters("A", "B")[..3].to_vec());
        for attack in ["replay-cast", "double-vote"] {
            let report = run_attack(attack, &config).map_err(|e| e.to_string())?;
            let adversary = report.voters.iter().find(|v| v.name == "adversary").ok_or("no adversary")?;
            ensure!(adversary.second_attempt == Some(false), "seed {seed} {attack}: {:?}", adversary.second_attempt);
            if attack == "double-vote" {
                ensure!(adversary.extra_signature == Some(false), "seed {seed}: extra signature granted");
            }
            ensure!(report.passed(), "seed {seed} {attack}: report fails");
            rejected += 1;
        }
    }
    Ok(format!("second attempt rejected in {rejected}/200 attack runs"))
}

fn forgery_rejection() -> Result<String, String> {
    let toy = KeyPair::toy();
    for tag in 0..10 {
        let digest = toy_digest(tag);
        let valid = (0..TOY_N)
            .filter(|&s| verify(&SignedBallot::from_value(s.into()), &digest, toy.public()))
            .collect::<Vec<_>>();
        ensure!(valid.len() == 1, "digest {tag} has {} valid signatures", valid.len());
        ensure!(verify(&sign_digest(&digest, &toy), &digest, toy.public()), "the signed value is not the valid one");
    }
    let config = ScenarioConfig::new(SEED, windows(), ten_voters("A", "B")[..3].to_vec());
    let report = run_attack("forge-signature", &config).map_err(|e| e.to_string())?;
    let adversary = report.voters.iter().find(|v| v.name == "adversary").ok_or("no adversary")?;
    let accepted = adversary.forgeries_accepted.ok_or("no forgery count")?;
    let chance = 1.0 - (1.0 - 1.0 / f64::from(TOY_N - 1)).powi(1000);
    ensure!(
        accepted == 0,
        "{accepted} of 1000 accepted; one valid signature per digest makes P(any) = {:.1}% per run",
        chance * 100.0
    );
    Ok(format!(
        "0 of 1000 accepted; exactly one valid signature per digest, so P(any) = {:.1}% per run",
        chance * 100.0
    ))
}

fn fairness() -> Result<String, String> {
    let voters = ten_voters("candidate-alpha", "candidate-bravo");
    let plain = ScenarioConfig::new(SEED, windows(), voters);
    let sealed = ScenarioConfig { sealed: true, ..plain.clone() };
    let sealed_report = run_scenario(&sealed).map_err(|e| e.to_string())?;
    let plain_report = run_scenario(&plain).map_err(|e| e.to_string())?;

    let lines: Vec<&str> = sealed_report.transcript.lines().collect();
    let publish = lines.iter().position(|l| l.split(' ').nth(4) == Some("publish")).ok_or("no key publication")?;
    let before: String = lines[..publish].iter().map(|l| format!("{l}\n")).collect();
    ensure!(
        lines[..publish].iter().any(|l| l.contains(" tally err:result-sealed ")),
        "no sealed tally rejection before publication"
    );
    let ballots = [b"candidate-alpha".to_vec(), b"candidate-bravo".to_vec()];
    let leaks = plaintext_leaks(&before, &ballots);
    ensure!(leaks.is_empty(), "plaintext visible before publication: {leaks:?}");
    ensure!(plaintext_leaks(&sealed_report.transcript, &ballots).is_empty(), "plaintext visible after publication");
    let row = sealed_report.assertion(Property::Fairness).ok_or("no fairness row")?;
    ensure!(row.pass, "{}", row.detail);
    ensure!(sealed_report.tally.is_some(), "no sealed tally");
    ensure!(sealed_report.tally == plain_report.tally, "sealed and plain tallies differ");
    Ok(format!("tally sealed before publication, no plaintext in {publish} entries, tallies agree after"))
}

fn verifiability() -> Result<String, String> {
    let config = ScenarioConfig::new(SEED, windows(), ten_voters("A", "B"));
    let report = run_scenario(&config).map_err(|e| e.to_string())?;
    let anchor = Expectation::from(&report);
    ensure!(verify_transcript(&report.transcript, &anchor).ok(), "untouched transcript fails");
    let lines: Vec<&str> = report.transcript.lines().collect();
    let casts: Vec<usize> = (0..lines.len()).filter(|&i| lines[i].split(' ').nth(4) == Some("cast")).collect();
    let mut rng = ChaCha20Rng::seed_from_u64(SEED);
    let mut detected = 0;
    for trial in 0..50 {
        let mut mutated: Vec<String> = lines.iter().map(|l| l.to_string()).collect();
        if trial % 2 == 0 {
            mutated.remove(rng.gen_range(0..lines.len()));
        } else {
            let target = *casts.choose(&mut rng).unwrap();
            let mut tokens: Vec<String> = mutated[target].split(' ').map(str::to_owned).collect();
            let ballot = &mut tokens[7];
            let pos = rng.gen_range(0..ballot.len());
            let old = ballot.as_bytes()[pos];
            let new = *b"0123456789abcdef".iter().filter(|&&c| c != old).collect::<Vec<_>>().choose(&mut rng).unwrap();
            ballot.replace_range(pos..=pos, &(*new as char).to_string());
            mutated[target] = tokens.join(" ");
        }
        let text: String = mutated.iter().map(|l| format!("{l}\n")).collect();
        if !verify_transcript(&text, &anchor).ok() {
            detected += 1;
        }
    }
    ensure!(detected == 50, "{detected}/50 mutations detected");
    Ok("50/50 delete-one and edit-one mutations detected".to_owned())
}

fn receipt_attack() -> Result<String, String> {
    let mut voters_proven = 0;
    for seed in 0..20 {
        let config = ScenarioConfig::new(seed, windows(), ten_voters("A", "B")[..5].to_vec());
        let report = run_attack("receipt-prove", &config).map_err(|e| e.to_string())?;
        let outcome = report.attack.as_ref().ok_or("no attack outcome")?;
        ensure!(outcome.succeeded, "seed {seed}: {}", outcome.detail);
        ensure!(outcome.detail.starts_with("5 honest voters proved"), "seed {seed}: {}", outcome.detail);
        voters_proven += 5;
    }
    Ok(format!("receipts verify for all {voters_proven} honest voters over 20 seeds"))
}

fn window_discipline() -> Result<String, String> {
    let (st, ct, et) = (10u64, 20, 30);
    let windows = Windows::new(st, ct, et).map_err(|e| e.to_string())?;
    let key = KeyPair::toy();
    let sealing = keygen(512, SEED).map_err(|e| e.to_string())?;
    let params = ElectionParams::new(key.public().clone(), windows, None);
    let sealed_params = ElectionParams::new(key.public().clone(), windows, Some(sealing.public().clone()));
    let digest = toy_digest(1);
    let signed = sign_digest(&digest, &key);
    let blinded = BlindedBallot::from_value(65u32.into());
    let sbb = sign_blinded(&blinded, &key);
    let voter = Account::from_seed(1);
    let mut ledger = Ledger::new();
    let mut organizer =
        Organizer::setup(&mut ledger, Account::from_seed(2), &[(voter.address(), 100)], key.clone(), windows, None)
            .map_err(|e| e.to_string())?;

    let mut cells = 0;
    for now in [0, st - 1, st, ct - 1, ct, et - 1, et, et + 1] {
        let sign_open = (st..ct).contains(&now);
        let vote_open = (ct..et).contains(&now);
        let closed = now >= et;
        let mut contract = ElectionContract::deploy(params.clone());
        let mut sealed_contract = ElectionContract::deploy(sealed_params.clone());
        let rows = [
            ("organizer sign", organizer.sign(&voter.address(), &blinded, now).is_ok(), sign_open),
            ("check_signature", contract.check_signature(&sbb, &blinded, now).is_ok(), sign_open),
            ("cast", contract.cast(&signed, &[1], &Uuid::from_bytes([1; 16]), now).is_ok(), vote_open),
            ("tally", contract.tally(now).is_ok(), closed),
            ("publish_key", sealed_contract.publish_key(&sealing, now).is_ok(), closed),
        ];
        for (what, accepted, expected) in rows {
            ensure!(accepted == expected, "{what} at clock {now}: accepted = {accepted}");
            cells += 1;
        }
    }

    let contract = organizer.contract();
    ledger.advance_clock(ct).map_err(|e| e.to_string())?;
    let request =
        ledger.call(&voter, organizer.address(), Payload::SignRequest { blinded }).map_err(|e| e.to_string())?;
    let served = organizer.serve(&mut ledger, request.index);
    ensure!(served.is_err(), "sign request at ct was served");
    ledger.advance_clock(et - 1).map_err(|e| e.to_string())?;
    let early = ledger.call(&voter, contract, Payload::Tally).map_err(|e| e.to_string())?.outcome;
    ensure!(
        matches!(early, Outcome::Rejected(ContractError::ElectionOpen { .. })),
        "tally at et-1 gave {}",
        early.token()
    );
    ledger.advance_clock(et).map_err(|e| e.to_string())?;
    let cast = Payload::Cast { signed, uuid: Uuid::from_bytes([1; 16]), ballot: vec![1] };
    let late = ledger.call(&Account::from_seed(3), contract, cast).map_err(|e| e.to_string())?.outcome;
    ensure!(matches!(late, Outcome::Rejected(ContractError::OutOfWindow { .. })), "cast at et gave {}", late.token());
    Ok(format!("{cells} boundary cells match; on-ledger sign at ct, cast at et and tally at et-1 rejected"))
}
