//! Full elections and named attacks over a fresh ledger, with a property report.
//!
//! A run deploys at clock 0, runs the sign stage at `st`, the vote stage at `ct` and the
//! count stage at `et`. Every source of randomness is derived from the config seed and a
//! role label, so a config fully determines its transcript.

use std::collections::{BTreeMap, BTreeSet, HashMap};
use std::fmt;
use std::str::FromStr;

use num_bigint::{BigUint, RandBigInt};
use num_integer::Integer;
use num_traits::{One, ToPrimitive};
use rand::SeedableRng;
use rand_chacha::ChaCha20Rng;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};
use thiserror::Error;

use crate::actors::{verify_receipt, ActorError, Organizer, OrganizerBehavior, VoterState};
use crate::blindsig::{self, keygen, BallotDigest, BlindSigError, KeyPair, SignedBallot, Uuid, TOY_KEY_BITS};
use crate::contract::{ContractError, ElectionParams, Tally, Windows};
use crate::ledger::{parse_transcript, Account, Address, Ledger, LedgerError, Outcome, Payload, Record};
use crate::sealing;

/// Largest modulus for which the privacy check enumerates the whole unit group.
const ENUMERATION_LIMIT: u64 = 1 << 20;
const MIN_SEALING_BITS: u64 = 512;
const MAX_KEY_BITS: u64 = 8192;
/// Ballots shorter than this are only reported as leaked when cast in the clear.
const LEAK_SUBSTRING_MIN: usize = 8;

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum ScenarioError {
    #[error("invalid config: {}", .0.join("; "))]
    ConfigInvalid(Vec<String>),
    #[error("unknown attack {0:?}")]
    UnknownAttack(String),
    #[error(transparent)]
    Actor(#[from] ActorError),
    #[error(transparent)]
    Ledger(#[from] LedgerError),
    #[error(transparent)]
    BlindSig(#[from] BlindSigError),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum VoterKind {
    Honest,
    /// Not on the permission list; asks for a signature anyway.
    Ineligible,
    /// Asks for one signature more than allowed and casts its ballot twice.
    DoubleVote,
    /// Resubmits somebody else's accepted cast.
    ReplayCast,
    /// Casts random signature values without asking the organizer.
    Forger,
    /// Honest, but casts from the eligible account instead of a fresh one.
    Linked,
}

impl VoterKind {
    pub fn listed(self) -> bool {
        matches!(self, VoterKind::Honest | VoterKind::DoubleVote | VoterKind::Linked)
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct VoterConfig {
    pub name: String,
    #[serde(default = "default_chances")]
    pub chances: u32,
    #[serde(default)]
    pub ballot: String,
    #[serde(default = "default_kind")]
    pub kind: VoterKind,
}

impl VoterConfig {
    pub fn honest(name: impl Into<String>, ballot: impl Into<String>) -> Self {
        Self { name: name.into(), chances: 1, ballot: ballot.into(), kind: VoterKind::Honest }
    }

    pub fn with_kind(mut self, kind: VoterKind) -> Self {
        self.kind = kind;
        self
    }

    pub fn with_chances(mut self, chances: u32) -> Self {
        self.chances = chances;
        self
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct WindowConfig {
    pub st: u64,
    pub ct: u64,
    pub et: u64,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScenarioConfig {
    pub seed: u64,
    /// Modulus size. 12 selects the fixed toy key `n = 3233`.
    #[serde(default = "default_key_bits")]
    pub key_bits: u64,
    #[serde(default)]
    pub sealed: bool,
    #[serde(default)]
    pub organizer: OrganizerBehavior,
    #[serde(default = "default_forge_attempts")]
    pub forge_attempts: u32,
    pub windows: WindowConfig,
    pub voters: Vec<VoterConfig>,
}

fn default_chances() -> u32 {
    1
}

fn default_kind() -> VoterKind {
    VoterKind::Honest
}

fn default_key_bits() -> u64 {
    TOY_KEY_BITS
}

fn default_forge_attempts() -> u32 {
    1000
}

impl ScenarioConfig {
    pub fn new(seed: u64, windows: WindowConfig, voters: Vec<VoterConfig>) -> Self {
        Self {
            seed,
            key_bits: default_key_bits(),
            sealed: false,
            organizer: OrganizerBehavior::Honest,
            forge_attempts: default_forge_attempts(),
            windows,
            voters,
        }
    }

    pub fn from_toml(text: &str) -> Result<Self, ScenarioError> {
        let config: Self =
            toml::from_str(text).map_err(|e| ScenarioError::ConfigInvalid(vec![e.message().to_owned()]))?;
        config.validate()?;
        Ok(config)
    }

    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("config fields are plain values")
    }

    pub fn validate(&self) -> Result<(), ScenarioError> {
        let mut problems = Vec::new();
        let WindowConfig { st, ct, et } = self.windows;
        if !(st < ct && ct < et) {
            problems.push(format!("windows: need st < ct < et, got {st}, {ct}, {et}"));
        }
        if self.key_bits != TOY_KEY_BITS && !(blindsig::MIN_KEY_BITS..=MAX_KEY_BITS).contains(&self.key_bits) {
            problems.push(format!(
                "key_bits: {} is neither {TOY_KEY_BITS} (toy key) nor in {}..={MAX_KEY_BITS}",
                self.key_bits,
                blindsig::MIN_KEY_BITS
            ));
        }
        if self.voters.is_empty() {
            problems.push("voters: at least one voter is required".to_owned());
        }
        let mut names = BTreeSet::new();
        for (i, voter) in self.voters.iter().enumerate() {
            if voter.name.is_empty() {
                problems.push(format!("voters[{i}].name: empty"));
            } else if !names.insert(voter.name.as_str()) {
                problems.push(format!("voters[{i}].name: {:?} is used twice", voter.name));
            }
            if voter.chances == 0 {
                problems.push(format!("voters[{i}].chances: must be at least 1"));
            }
        }
        if problems.is_empty() {
            Ok(())
        } else {
            Err(ScenarioError::ConfigInvalid(problems))
        }
    }

    fn windows(&self) -> Windows {
        Windows::new(self.windows.st, self.windows.ct, self.windows.et).expect("validated")
    }

    /// Ballots the script intends to have counted: one per chance of every listed voter.
    pub fn expected_tally(&self) -> Tally {
        self.voters
            .iter()
            .filter(|v| v.kind.listed())
            .flat_map(|v| std::iter::repeat_n(v.ballot.as_bytes(), v.chances as usize))
            .collect()
    }
}

/// Rows of the security-property table.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Property {
    Privacy,
    ReceiptFreeness,
    Robustness,
    Verifiability,
    Eligibility,
    PreventionOfMultipleVoting,
    Fairness,
    Correctness,
}

impl fmt::Display for Property {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Property::Privacy => "privacy",
            Property::ReceiptFreeness => "receipt-freeness",
            Property::Robustness => "robustness",
            Property::Verifiability => "verifiability",
            Property::Eligibility => "eligibility",
            Property::PreventionOfMultipleVoting => "prevention-of-multiple-voting",
            Property::Fairness => "fairness",
            Property::Correctness => "correctness",
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Verdict {
    Correct,
    AttackFound,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Assertion {
    pub property: Property,
    pub expected: Verdict,
    pub observed: Verdict,
    pub pass: bool,
    pub detail: String,
}

impl Assertion {
    fn new(property: Property, expected: Verdict, violations: Vec<String>, ok_detail: String) -> Self {
        let observed = if violations.is_empty() { Verdict::Correct } else { Verdict::AttackFound };
        let detail = if violations.is_empty() { ok_detail } else { violations.join("; ") };
        Self { property, expected, observed, pass: observed == expected, detail }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct VoterOutcome {
    pub name: String,
    pub kind: VoterKind,
    pub signatures: usize,
    pub casts_accepted: usize,
    pub casts_rejected: usize,
    #[serde(skip_serializing_if = "Vec::is_empty", default)]
    pub errors: Vec<String>,
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub extra_signature: Option<bool>,
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub second_attempt: Option<bool>,
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub forgeries_accepted: Option<u32>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct AttackOutcome {
    pub name: String,
    pub property: Property,
    pub succeeded: bool,
    pub expected_success: bool,
    pub detail: String,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct RunReport {
    pub seed: u64,
    pub key_bits: u64,
    pub sealed: bool,
    pub contract: String,
    /// Number of ledger entries and the chain hash after the last one.
    pub entries: usize,
    pub head: String,
    /// Final contract tally, absent when the count stage could not produce one.
    pub tally: Option<Tally>,
    pub assertions: Vec<Assertion>,
    pub voters: Vec<VoterOutcome>,
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub attack: Option<AttackOutcome>,
    #[serde(skip)]
    pub transcript: String,
}

impl RunReport {
    /// True iff every assertion and the attack expectation hold.
    pub fn passed(&self) -> bool {
        self.assertions.iter().all(|a| a.pass) && self.attack.as_ref().is_none_or(|a| a.succeeded == a.expected_success)
    }

    pub fn assertion(&self, property: Property) -> Option<&Assertion> {
        self.assertions.iter().find(|a| a.property == property)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Attack {
    DoubleVote,
    Ineligible,
    ForgeSignature,
    ReplayCast,
    ReceiptProve,
    EarlyTally,
    SealedPeek,
}

impl Attack {
    pub const ALL: [Attack; 7] = [
        Attack::DoubleVote,
        Attack::Ineligible,
        Attack::ForgeSignature,
        Attack::ReplayCast,
        Attack::ReceiptProve,
        Attack::EarlyTally,
        Attack::SealedPeek,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Attack::DoubleVote => "double-vote",
            Attack::Ineligible => "ineligible",
            Attack::ForgeSignature => "forge-signature",
            Attack::ReplayCast => "replay-cast",
            Attack::ReceiptProve => "receipt-prove",
            Attack::EarlyTally => "early-tally",
            Attack::SealedPeek => "sealed-peek",
        }
    }

    pub fn property(self) -> Property {
        match self {
            Attack::DoubleVote | Attack::ReplayCast => Property::PreventionOfMultipleVoting,
            Attack::Ineligible | Attack::ForgeSignature => Property::Eligibility,
            Attack::ReceiptProve => Property::ReceiptFreeness,
            Attack::EarlyTally | Attack::SealedPeek => Property::Fairness,
        }
    }

    /// Only the receipt attack is expected to work.
    pub fn expected_success(self) -> bool {
        self == Attack::ReceiptProve
    }

    /// The config the attack runs on: the given one plus an adversary where needed.
    pub fn arm(self, config: &ScenarioConfig) -> ScenarioConfig {
        let mut config = config.clone();
        let kind = match self {
            Attack::DoubleVote => Some(VoterKind::DoubleVote),
            Attack::Ineligible => Some(VoterKind::Ineligible),
            Attack::ForgeSignature => Some(VoterKind::Forger),
            Attack::ReplayCast => Some(VoterKind::ReplayCast),
            Attack::ReceiptProve | Attack::EarlyTally => None,
            Attack::SealedPeek => {
                config.sealed = true;
                None
            }
        };
        if let Some(kind) = kind {
            let mut name = "adversary".to_owned();
            while config.voters.iter().any(|v| v.name == name) {
                name.push('_');
            }
            let ballot = format!("adversary-{}", self.name());
            config.voters.push(VoterConfig { name, chances: 1, ballot, kind });
        }
        config
    }
}

impl fmt::Display for Attack {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Attack {
    type Err = ScenarioError;

    fn from_str(name: &str) -> Result<Self, ScenarioError> {
        Attack::ALL.into_iter().find(|a| a.name() == name).ok_or_else(|| ScenarioError::UnknownAttack(name.to_owned()))
    }
}

pub fn run_scenario(config: &ScenarioConfig) -> Result<RunReport, ScenarioError> {
    config.validate()?;
    Election::run(config, None)
}

pub fn run_attack(name: &str, config: &ScenarioConfig) -> Result<RunReport, ScenarioError> {
    let attack: Attack = name.parse()?;
    let armed = attack.arm(config);
    armed.validate()?;
    Election::run(&armed, Some(attack))
}

/// Deterministic generator for one role of one run.
pub fn role_rng(seed: u64, label: &str) -> ChaCha20Rng {
    let mut hasher = Sha256::new();
    hasher.update(b"blindvote/scenario");
    hasher.update(seed.to_be_bytes());
    hasher.update(label.as_bytes());
    ChaCha20Rng::from_seed(hasher.finalize().into())
}

fn role_seed(seed: u64, label: &str) -> u64 {
    use rand::RngCore;
    role_rng(seed, label).next_u64()
}

/// Signing key for a config: the toy key at 12 bits, otherwise a seeded key.
pub fn election_key(seed: u64, key_bits: u64) -> Result<KeyPair, BlindSigError> {
    if key_bits == TOY_KEY_BITS {
        Ok(KeyPair::toy())
    } else {
        keygen(key_bits, role_seed(seed, "signing-key"))
    }
}

pub fn sealing_key(seed: u64, key_bits: u64) -> Result<KeyPair, BlindSigError> {
    keygen(key_bits.max(MIN_SEALING_BITS), role_seed(seed, "sealing-key"))
}

struct Participant {
    config: VoterConfig,
    account: Account,
    rng: ChaCha20Rng,
    /// One entry per successfully signed chance.
    states: Vec<VoterState>,
    /// First-cast verdict for each entry of `states`.
    casts: Vec<bool>,
    errors: Vec<String>,
    /// Sign failures that surfaced as a refusal or a failed check.
    surfaced: usize,
    extra_state: Option<VoterState>,
    extra_signature: Option<bool>,
    second_attempt: Option<bool>,
    forgeries: Option<(u32, Vec<Uuid>)>,
}

impl Participant {
    fn outcome(&self) -> VoterOutcome {
        VoterOutcome {
            name: self.config.name.clone(),
            kind: self.config.kind,
            signatures: self.states.len() + usize::from(self.extra_state.is_some()),
            casts_accepted: self.casts.iter().filter(|&&c| c).count(),
            casts_rejected: self.casts.iter().filter(|&&c| !c).count(),
            errors: self.errors.clone(),
            extra_signature: self.extra_signature,
            second_attempt: self.second_attempt,
            forgeries_accepted: self.forgeries.as_ref().map(|(n, _)| *n),
        }
    }

    fn accepted_states(&self) -> impl Iterator<Item = &VoterState> {
        self.states.iter().zip(&self.casts).filter(|(_, &c)| c).map(|(s, _)| s)
    }
}

struct Election<'a> {
    config: &'a ScenarioConfig,
    attack: Option<Attack>,
    ledger: Ledger,
    organizer: Organizer,
    participants: Vec<Participant>,
    adversary: Account,
    spectator: Account,
    early_tally: Option<Outcome>,
    sealed_tally: Option<Outcome>,
    sealed_snapshot: Option<String>,
    wrong_publish: Option<Outcome>,
    final_tally: Option<Outcome>,
}

impl<'a> Election<'a> {
    fn run(config: &'a ScenarioConfig, attack: Option<Attack>) -> Result<RunReport, ScenarioError> {
        let mut election = Self::setup(config, attack)?;
        election.sign_stage()?;
        election.vote_stage()?;
        election.count_stage()?;
        Ok(election.report())
    }

    fn setup(config: &'a ScenarioConfig, attack: Option<Attack>) -> Result<Self, ScenarioError> {
        let seed = config.seed;
        let key = election_key(seed, config.key_bits)?;
        let sealing = config.sealed.then(|| sealing_key(seed, config.key_bits)).transpose()?;
        let participants: Vec<Participant> = config
            .voters
            .iter()
            .map(|v| Participant {
                config: v.clone(),
                account: Account::generate(&mut role_rng(seed, &format!("account/{}", v.name))),
                rng: role_rng(seed, &format!("voter/{}", v.name)),
                states: Vec::new(),
                casts: Vec::new(),
                errors: Vec::new(),
                surfaced: 0,
                extra_state: None,
                extra_signature: None,
                second_attempt: None,
                forgeries: None,
            })
            .collect();
        let listed: Vec<(Address, u32)> = participants
            .iter()
            .filter(|p| p.config.kind.listed())
            .map(|p| (p.account.address(), p.config.chances))
            .collect();
        let mut ledger = Ledger::new();
        let organizer_account = Account::generate(&mut role_rng(seed, "organizer"));
        let organizer = Organizer::setup(&mut ledger, organizer_account, &listed, key, config.windows(), sealing)?
            .with_behavior(config.organizer);
        Ok(Self {
            config,
            attack,
            ledger,
            organizer,
            participants,
            adversary: Account::generate(&mut role_rng(seed, "adversary")),
            spectator: Account::generate(&mut role_rng(seed, "spectator")),
            early_tally: None,
            sealed_tally: None,
            sealed_snapshot: None,
            wrong_publish: None,
            final_tally: None,
        })
    }

    fn params(&self) -> ElectionParams {
        self.organizer.params().clone()
    }

    fn sign_stage(&mut self) -> Result<(), ScenarioError> {
        self.ledger.advance_clock(self.config.windows.st)?;
        let params = self.params();
        for p in &mut self.participants {
            let attempts = match p.config.kind {
                VoterKind::Honest | VoterKind::Linked | VoterKind::DoubleVote => p.config.chances,
                VoterKind::Ineligible => 1,
                VoterKind::Forger | VoterKind::ReplayCast => 0,
            };
            for _ in 0..attempts {
                let mut state = VoterState::prepare(p.config.ballot.as_bytes(), p.account.clone(), &params, &mut p.rng);
                match state.obtain_signature(&mut self.ledger, &mut self.organizer) {
                    Ok(()) => p.states.push(state),
                    Err(e) => {
                        if matches!(e, ActorError::SignRefused | ActorError::CheckFailed) {
                            p.surfaced += 1;
                        }
                        p.errors.push(e.to_string());
                    }
                }
            }
            if p.config.kind == VoterKind::DoubleVote {
                let mut extra = VoterState::prepare(p.config.ballot.as_bytes(), p.account.clone(), &params, &mut p.rng);
                let granted = extra.obtain_signature(&mut self.ledger, &mut self.organizer).is_ok();
                p.extra_signature = Some(granted);
                if granted {
                    p.extra_state = Some(extra);
                }
            }
        }
        Ok(())
    }

    fn vote_stage(&mut self) -> Result<(), ScenarioError> {
        self.ledger.advance_clock(self.config.windows.ct)?;
        let contract = self.organizer.contract();
        let modulus = self.organizer.params().pk().modulus().clone();
        for p in self.participants.iter_mut().filter(|p| p.config.kind != VoterKind::ReplayCast) {
            for state in &mut p.states {
                let verdict = match p.config.kind {
                    VoterKind::Linked => state.cast_from(&mut self.ledger, contract, &p.account),
                    _ => state.cast(&mut self.ledger, contract, &mut p.rng),
                };
                p.casts.push(verdict.unwrap_or_else(|e| {
                    p.errors.push(e.to_string());
                    false
                }));
            }
            match p.config.kind {
                VoterKind::DoubleVote => {
                    if let Some(first) = p.states.first_mut() {
                        p.second_attempt = Some(first.cast(&mut self.ledger, contract, &mut p.rng).unwrap_or(false));
                    }
                    if let Some(extra) = &mut p.extra_state {
                        let accepted = extra.cast(&mut self.ledger, contract, &mut p.rng).unwrap_or(false);
                        p.second_attempt = Some(p.second_attempt.unwrap_or(false) || accepted);
                    }
                }
                VoterKind::Forger => {
                    let anon = Account::generate(&mut p.rng);
                    let mut accepted = Vec::new();
                    for _ in 0..self.config.forge_attempts {
                        let uuid = Uuid::random(&mut p.rng);
                        let signed = SignedBallot::from_value(p.rng.gen_biguint_range(&BigUint::one(), &modulus));
                        let payload = Payload::Cast { signed, uuid, ballot: p.config.ballot.clone().into_bytes() };
                        if self.ledger.call(&anon, contract, payload)?.outcome == Outcome::Verdict(true) {
                            accepted.push(uuid);
                        }
                    }
                    p.forgeries = Some((accepted.len() as u32, accepted));
                }
                _ => {}
            }
        }
        let first_accepted = self.ledger.transactions().find_map(|(tx, outcome)| match (&tx.payload, outcome) {
            (Payload::Cast { .. }, Outcome::Verdict(true)) if tx.recipient == contract => Some(tx.payload.clone()),
            _ => None,
        });
        for p in self.participants.iter_mut().filter(|p| p.config.kind == VoterKind::ReplayCast) {
            match &first_accepted {
                Some(payload) => {
                    let outcome = self.ledger.call(&p.account, contract, payload.clone())?.outcome;
                    p.second_attempt = Some(outcome == Outcome::Verdict(true));
                }
                None => p.errors.push("no accepted cast to replay".to_owned()),
            }
        }
        Ok(())
    }

    fn count_stage(&mut self) -> Result<(), ScenarioError> {
        let contract = self.organizer.contract();
        let et = self.config.windows.et;
        if self.attack == Some(Attack::EarlyTally) {
            self.ledger.advance_clock(et - 1)?;
            self.early_tally = Some(self.ledger.call(&self.adversary, contract, Payload::Tally)?.outcome);
        }
        self.ledger.advance_clock(et)?;
        if self.config.sealed {
            let who = if self.attack.is_some() { &self.adversary } else { &self.spectator };
            self.sealed_tally = Some(self.ledger.call(who, contract, Payload::Tally)?.outcome);
            self.sealed_snapshot = Some(self.ledger.export());
            if self.attack == Some(Attack::SealedPeek) {
                let decoy = keygen(
                    self.config.key_bits.max(MIN_SEALING_BITS),
                    role_seed(self.config.seed, "decoy-sealing-key"),
                )?;
                let outcome = self.ledger.call(&self.adversary, contract, Payload::Publish { sealing_key: decoy })?;
                self.wrong_publish = Some(outcome.outcome);
            }
            self.organizer.publish_sealing_key(&mut self.ledger)?;
        }
        self.final_tally = Some(self.ledger.call(&self.spectator, contract, Payload::Tally)?.outcome);
        Ok(())
    }

    fn final_tally(&self) -> Option<&Tally> {
        match &self.final_tally {
            Some(Outcome::Tally(t)) => Some(t),
            _ => None,
        }
    }

    fn plaintexts(&self) -> Vec<Vec<u8>> {
        self.participants.iter().map(|p| p.config.ballot.clone().into_bytes()).collect()
    }

    fn report(&self) -> RunReport {
        let transcript = self.ledger.export();
        let mut assertions = vec![
            self.privacy(),
            self.receipt_freeness(),
            self.robustness(),
            self.verifiability(&transcript),
            self.eligibility(),
            self.multiple_voting(),
        ];
        if self.config.sealed {
            assertions.push(self.fairness(&transcript));
        }
        assertions.push(self.correctness());
        RunReport {
            seed: self.config.seed,
            key_bits: self.config.key_bits,
            sealed: self.config.sealed,
            contract: self.organizer.contract().to_hex(),
            entries: self.ledger.len(),
            head: self.ledger.head(),
            tally: self.final_tally().cloned(),
            assertions,
            voters: self.participants.iter().map(Participant::outcome).collect(),
            attack: self.attack.map(|a| self.attack_outcome(a)),
            transcript,
        }
    }

    fn accepted_casts(&self) -> Vec<(Address, BallotDigest)> {
        let contract = self.organizer.contract();
        self.ledger
            .transactions()
            .filter_map(|(tx, outcome)| match (&tx.payload, outcome) {
                (Payload::Cast { uuid, ballot, .. }, Outcome::Verdict(true)) if tx.recipient == contract => {
                    Some((tx.sender, BallotDigest::new(ballot, uuid)))
                }
                _ => None,
            })
            .collect()
    }

    /// No accepted cast comes from an eligible account, and every blind-sign request is
    /// consistent with every accepted ballot through exactly one blinding factor.
    fn privacy(&self) -> Assertion {
        let mut violations = Vec::new();
        let permissions = self.organizer.permissions();
        let accepted = self.accepted_casts();
        for (sender, _) in &accepted {
            if permissions.is_listed(sender) {
                violations.push(format!("accepted cast sent from eligible account {sender}"));
            }
        }
        let requests: Vec<BigUint> = self
            .ledger
            .transactions()
            .filter_map(|(tx, _)| match &tx.payload {
                Payload::SignRequest { blinded } if tx.recipient == self.organizer.address() => {
                    Some(blinded.value().clone())
                }
                _ => None,
            })
            .collect();
        let pk = self.organizer.params().pk();
        let detail = match pk.modulus().to_u64().filter(|&n| n <= ENUMERATION_LIMIT) {
            Some(n) => {
                let e = pk.public_exponent().to_u64().expect("small modulus implies small exponent");
                let digests: Vec<BallotDigest> = accepted.iter().map(|(_, d)| *d).collect();
                match unlinkability_violations(n, e, &requests, &digests) {
                    0 => format!(
                        "{} requests × {} ballots each explained by exactly one blinding factor",
                        requests.len(),
                        digests.len()
                    ),
                    bad => {
                        violations.push(format!("{bad} request/ballot pairs not explained by exactly one unit"));
                        String::new()
                    }
                }
            }
            None => {
                let non_units = requests.iter().filter(|b| !pk.is_unit(b)).count();
                if non_units > 0 {
                    violations.push(format!("{non_units} blinded requests are not units"));
                }
                format!("{}-bit modulus: enumeration skipped, {} requests are units", pk.bits(), requests.len())
            }
        };
        Assertion::new(Property::Privacy, Verdict::Correct, violations, detail)
    }

    /// Expected to be broken: every honest voter whose ballot was counted can prove it.
    fn receipt_freeness(&self) -> Assertion {
        let contract = self.organizer.contract();
        let mut proven = 0;
        let mut unproven = 0;
        for p in self.participants.iter().filter(|p| p.config.kind == VoterKind::Honest) {
            for state in p.accepted_states() {
                let ok = state.prove_receipt().is_ok_and(|r| verify_receipt(&r, &self.ledger, &contract));
                if ok {
                    proven += 1;
                } else {
                    unproven += 1;
                }
            }
        }
        let detail = format!("{proven} honest voters proved their ballot, {unproven} could not");
        let violations = if proven > 0 && unproven == 0 { vec![detail.clone()] } else { Vec::new() };
        Assertion::new(Property::ReceiptFreeness, Verdict::AttackFound, violations, detail)
    }

    /// Misbehavior is detected: each listed chance ends in a counted ballot or a
    /// surfaced refusal or failed check.
    fn robustness(&self) -> Assertion {
        let mut violations = Vec::new();
        let mut surfaced = 0;
        for p in self.participants.iter().filter(|p| p.config.kind.listed()) {
            surfaced += p.surfaced;
            let counted = p.casts.iter().filter(|&&c| c).count();
            let explained = counted + p.surfaced;
            if explained != p.config.chances as usize {
                violations.push(format!(
                    "{}: {} chances, {counted} counted, {} surfaced failures",
                    p.config.name, p.config.chances, p.surfaced
                ));
            }
        }
        Assertion::new(
            Property::Robustness,
            Verdict::Correct,
            violations,
            format!("every chance accounted for, {surfaced} organizer faults surfaced"),
        )
    }

    fn verifiability(&self, transcript: &str) -> Assertion {
        let expectation = Expectation {
            tally: self.final_tally().cloned(),
            entries: Some(self.ledger.len()),
            head: Some(self.ledger.head()),
        };
        let check = verify_transcript(transcript, &expectation);
        let mut violations = check.findings;
        let ballot_box = self.ledger.contract(&self.organizer.contract()).expect("deployed").ballot_box();
        let mut individual = 0;
        for p in &self.participants {
            for state in p.accepted_states() {
                individual += 1;
                if ballot_box.get(state.uuid()) != Some(state.payload()) {
                    violations.push(format!("{}: ballot not found under its uuid", p.config.name));
                }
            }
        }
        Assertion::new(
            Property::Verifiability,
            Verdict::Correct,
            violations,
            format!("replay and recount agree; {individual} voters found their ballot"),
        )
    }

    fn eligibility(&self) -> Assertion {
        let mut violations = Vec::new();
        let permissions = self.organizer.permissions();
        let ballot_box = self.ledger.contract(&self.organizer.contract()).expect("deployed").ballot_box();
        if ballot_box.len() as u64 > permissions.initial_total() {
            violations.push(format!("{} ballots for {} chances", ballot_box.len(), permissions.initial_total()));
        }
        let spent = permissions.initial_total() - permissions.remaining_total();
        if spent != self.organizer.issued() {
            violations.push(format!("{spent} chances spent but {} signatures issued", self.organizer.issued()));
        }
        let issued: BTreeSet<Uuid> =
            self.participants.iter().flat_map(|p| p.states.iter().chain(&p.extra_state)).map(|s| *s.uuid()).collect();
        let untraced = ballot_box.iter().filter(|(uuid, _)| !issued.contains(uuid)).count();
        if untraced > 0 {
            violations.push(format!("{untraced} ballots trace to no issued signature"));
        }
        for p in &self.participants {
            match p.config.kind {
                VoterKind::Ineligible if !p.states.is_empty() => {
                    violations.push(format!("{} was signed without being listed", p.config.name));
                }
                VoterKind::Forger => {
                    if let Some((accepted @ 1.., _)) = &p.forgeries {
                        violations.push(format!(
                            "{}: {accepted} of {} forged signatures accepted",
                            p.config.name, self.config.forge_attempts
                        ));
                    }
                }
                _ => {}
            }
        }
        Assertion::new(
            Property::Eligibility,
            Verdict::Correct,
            violations,
            format!("{} ballots, each traced to one of {} signatures", ballot_box.len(), self.organizer.issued()),
        )
    }

    fn multiple_voting(&self) -> Assertion {
        let mut violations = Vec::new();
        for p in &self.participants {
            if p.extra_signature == Some(true) {
                violations.push(format!("{} received a signature beyond its chances", p.config.name));
            }
            if p.second_attempt == Some(true) {
                violations.push(format!("{}: second cast accepted", p.config.name));
            }
        }
        let ballot_box = self.ledger.contract(&self.organizer.contract()).expect("deployed").ballot_box();
        let accepted = self.accepted_casts().len();
        if accepted != ballot_box.len() {
            violations.push(format!("{accepted} accepted casts but {} stored ballots", ballot_box.len()));
        }
        if ballot_box.len() as u64 > self.organizer.issued() {
            violations.push(format!("{} ballots from {} signatures", ballot_box.len(), self.organizer.issued()));
        }
        let repeats = self.participants.iter().filter(|p| p.second_attempt.is_some()).count();
        Assertion::new(
            Property::PreventionOfMultipleVoting,
            Verdict::Correct,
            violations,
            format!("{repeats} repeat casts rejected; one ballot per signature"),
        )
    }

    fn fairness(&self, transcript: &str) -> Assertion {
        let mut violations = Vec::new();
        match &self.sealed_tally {
            Some(Outcome::Rejected(ContractError::ResultSealed)) => {}
            other => {
                violations.push(format!("tally before key publication gave {:?}", other.as_ref().map(Outcome::token)))
            }
        }
        if let Some(Outcome::Tally(_)) = &self.early_tally {
            violations.push("tally before the vote window closed".to_owned());
        }
        if let Some(outcome) = &self.wrong_publish {
            if !matches!(outcome, Outcome::Rejected(ContractError::KeyMismatch)) {
                violations.push(format!("wrong sealing key publication gave {}", outcome.token()));
            }
        }
        let plaintexts = self.plaintexts();
        for text in self.sealed_snapshot.iter().map(String::as_str).chain([transcript]) {
            for leak in plaintext_leaks(text, &plaintexts) {
                violations.push(format!("plaintext {:?} visible in transcript", String::from_utf8_lossy(&leak)));
            }
        }
        let ciphertexts: Vec<&[u8]> = self
            .ledger
            .contract(&self.organizer.contract())
            .expect("deployed")
            .ballot_box()
            .iter()
            .map(|(_, b)| b)
            .collect();
        let distinct: BTreeSet<&[u8]> = ciphertexts.iter().copied().collect();
        if distinct.len() != ciphertexts.len() {
            violations.push("two sealed ballots share a ciphertext".to_owned());
        }
        Assertion::new(
            Property::Fairness,
            Verdict::Correct,
            violations,
            format!("{} sealed ballots; tally locked until key publication", ciphertexts.len()),
        )
    }

    fn correctness(&self) -> Assertion {
        let expected = self.config.expected_tally();
        let violations = match self.final_tally() {
            Some(tally) if *tally == expected => Vec::new(),
            Some(tally) => {
                vec![format!("tally {:?} differs from cast ballots {:?}", tally.render(), expected.render())]
            }
            None => vec![format!(
                "no tally: {}",
                self.final_tally.as_ref().map_or("not attempted".to_owned(), Outcome::token)
            )],
        };
        Assertion::new(
            Property::Correctness,
            Verdict::Correct,
            violations,
            format!("{} ballots counted", expected.total()),
        )
    }

    fn attack_outcome(&self, attack: Attack) -> AttackOutcome {
        let of_kind = |kind: VoterKind| self.participants.iter().filter(move |p| p.config.kind == kind);
        let (succeeded, detail) = match attack {
            Attack::DoubleVote => {
                let extra = of_kind(VoterKind::DoubleVote).any(|p| p.extra_signature == Some(true));
                let recast = of_kind(VoterKind::DoubleVote).any(|p| p.second_attempt == Some(true));
                (extra || recast, format!("extra signature granted: {extra}; second cast accepted: {recast}"))
            }
            Attack::Ineligible => {
                let signed = of_kind(VoterKind::Ineligible).any(|p| !p.states.is_empty());
                (signed, format!("unlisted account obtained a signature: {signed}"))
            }
            Attack::ForgeSignature => {
                let accepted: u32 = of_kind(VoterKind::Forger).filter_map(|p| p.forgeries.as_ref()).map(|f| f.0).sum();
                (accepted > 0, format!("{accepted} of {} random signatures accepted", self.config.forge_attempts))
            }
            Attack::ReplayCast => {
                let replayed = of_kind(VoterKind::ReplayCast).any(|p| p.second_attempt == Some(true));
                (replayed, format!("replayed cast accepted: {replayed}"))
            }
            Attack::ReceiptProve => {
                let row = self.receipt_freeness();
                (row.observed == Verdict::AttackFound, row.detail)
            }
            Attack::EarlyTally => {
                let early = matches!(self.early_tally, Some(Outcome::Tally(_)));
                let unsealed = matches!(self.sealed_tally, Some(Outcome::Tally(_)));
                let token = self.early_tally.as_ref().map(Outcome::token).unwrap_or_default();
                (early || unsealed, format!("tally at et-1 gave {token}"))
            }
            Attack::SealedPeek => {
                let leaks =
                    self.sealed_snapshot.as_deref().map(|s| plaintext_leaks(s, &self.plaintexts()).len()).unwrap_or(0);
                let early = matches!(self.sealed_tally, Some(Outcome::Tally(_)));
                let wrong_key = matches!(self.wrong_publish, Some(Outcome::Ack));
                (
                    leaks > 0 || early || wrong_key,
                    format!("plaintexts seen: {leaks}; sealed tally read: {early}; decoy key accepted: {wrong_key}"),
                )
            }
        };
        AttackOutcome {
            name: attack.name().to_owned(),
            property: attack.property(),
            succeeded,
            expected_success: attack.expected_success(),
            detail,
        }
    }
}

fn pow_mod(mut base: u64, mut exp: u64, n: u64) -> u64 {
    let mut acc = 1 % n;
    base %= n;
    while exp > 0 {
        if exp & 1 == 1 {
            acc = acc * base % n;
        }
        base = base * base % n;
        exp >>= 1;
    }
    acc
}

/// Counts `(B, d)` pairs for which the number of units `r` with `fdh(d)·r^e ≡ B` is not
/// exactly one. Enumerates the unit group, so only usable for tiny moduli.
pub fn unlinkability_violations(n: u64, e: u64, requests: &[BigUint], digests: &[BallotDigest]) -> usize {
    let mut preimages: HashMap<u64, u32> = HashMap::new();
    for r in (1..n).filter(|r| r.gcd(&n) == 1) {
        *preimages.entry(pow_mod(r, e, n)).or_default() += 1;
    }
    let modulus = BigUint::from(n);
    let mut bad = 0;
    for b in requests {
        for d in digests {
            let h = blindsig::fdh(d, &modulus);
            let count = h
                .modinv(&modulus)
                .and_then(|inv| (b * inv % &modulus).to_u64())
                .map_or(0, |target| preimages.get(&target).copied().unwrap_or(0));
            if count != 1 {
                bad += 1;
            }
        }
    }
    bad
}

/// Plaintext ballots visible in a transcript. A ballot leaks if its hex encoding is the
/// ballot field of a cast; ballots of at least eight bytes also leak as a raw or hex
/// substring anywhere. Short ballots are not searched as substrings since their hex shows
/// up inside unrelated integers by chance.
pub fn plaintext_leaks(transcript: &str, ballots: &[Vec<u8>]) -> Vec<Vec<u8>> {
    let cast_fields: BTreeSet<&str> = transcript
        .lines()
        .filter_map(|line| {
            let tokens: Vec<&str> = line.split(' ').collect();
            (tokens.get(4) == Some(&"cast")).then(|| tokens.get(7).copied()).flatten()
        })
        .collect();
    let mut leaks: Vec<Vec<u8>> = Vec::new();
    for ballot in ballots.iter().filter(|b| !b.is_empty()) {
        let hex = hex::encode(ballot);
        let long = ballot.len() >= LEAK_SUBSTRING_MIN;
        let raw_visible = long && transcript.as_bytes().windows(ballot.len()).any(|w| w == ballot.as_slice());
        let leaked = cast_fields.contains(hex.as_str()) || raw_visible || (long && transcript.contains(&hex));
        if leaked && !leaks.contains(ballot) {
            leaks.push(ballot.clone());
        }
    }
    leaks
}

/// Recounts a contract's ballots straight from transcript records, without replaying the
/// ledger and without trusting recorded outcomes.
pub fn offchain_tally(records: &[Record], contract: &Address) -> Result<Tally, String> {
    let params = records
        .iter()
        .find_map(|r| match &r.tx.payload {
            Payload::Deploy(params) if r.tx.recipient == *contract => Some(params),
            _ => None,
        })
        .ok_or_else(|| format!("no deployment of {contract}"))?;
    let windows = params.windows();
    let mut seen = BTreeSet::new();
    let mut ballots = Vec::new();
    let mut key = None;
    for record in records.iter().filter(|r| r.tx.recipient == *contract) {
        let ts = record.tx.timestamp;
        match &record.tx.payload {
            Payload::Cast { signed, uuid, ballot } if windows.in_vote_window(ts) && !seen.contains(uuid) => {
                if blindsig::verify(signed, &BallotDigest::new(ballot, uuid), params.pk()) {
                    seen.insert(*uuid);
                    ballots.push(ballot.clone());
                }
            }
            Payload::Publish { sealing_key }
                if key.is_none() && ts >= windows.et() && params.sealing_pk() == Some(sealing_key.public()) =>
            {
                key = Some(sealing_key);
            }
            _ => {}
        }
    }
    if !params.sealed() {
        return Ok(ballots.iter().collect());
    }
    let key = key.ok_or("result sealed: no sealing key published")?;
    let mut tally = Tally::default();
    for sealed in &ballots {
        tally.add(&sealing::open(sealed, key).map_err(|e| e.to_string())?);
    }
    Ok(tally)
}

/// What a transcript is checked against, usually taken from a run report. The head
/// hash anchors the end of the log, so truncation is caught as well.
#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub struct Expectation {
    pub tally: Option<Tally>,
    pub entries: Option<usize>,
    pub head: Option<String>,
}

impl Expectation {
    pub fn tally(tally: Tally) -> Self {
        Self { tally: Some(tally), ..Self::default() }
    }
}

impl From<&RunReport> for Expectation {
    fn from(report: &RunReport) -> Self {
        Self { tally: report.tally.clone(), entries: Some(report.entries), head: Some(report.head.clone()) }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub struct TranscriptCheck {
    pub findings: Vec<String>,
    /// Off-chain recount per deployed contract, where one could be made.
    pub tallies: BTreeMap<Address, Tally>,
}

impl TranscriptCheck {
    pub fn ok(&self) -> bool {
        self.findings.is_empty()
    }
}

/// Replays a transcript, recounts every contract off-chain, and checks the recount
/// against the replayed contract and against whatever `expected` pins down.
pub fn verify_transcript(text: &str, expected: &Expectation) -> TranscriptCheck {
    let mut check = TranscriptCheck::default();
    let records = match parse_transcript(text) {
        Ok(records) => records,
        Err(e) => {
            check.findings.push(e.to_string());
            return check;
        }
    };
    let replayed = Ledger::replay(&records).map_err(|e| check.findings.push(e.to_string())).ok();
    if let Some(entries) = expected.entries {
        if records.len() != entries {
            check.findings.push(format!("transcript has {} entries, expected {entries}", records.len()));
        }
    }
    if let (Some(head), Some(ledger)) = (&expected.head, &replayed) {
        if ledger.head() != *head {
            check.findings.push(format!("chain head {} differs from the expected {head}", ledger.head()));
        }
    }
    let contracts: Vec<Address> =
        records.iter().filter(|r| matches!(r.tx.payload, Payload::Deploy(_))).map(|r| r.tx.recipient).collect();
    for address in &contracts {
        let offchain = offchain_tally(&records, address);
        if let Some(ledger) = &replayed {
            if let Some(contract) = ledger.contract(address) {
                let now = ledger.clock().max(contract.params().windows().et());
                match (contract.tally(now), &offchain) {
                    (Ok(on), Ok(off)) if on != *off => {
                        check.findings.push(format!("{address}: contract tally and off-chain recount disagree"))
                    }
                    (Ok(_), Err(e)) => check.findings.push(format!("{address}: off-chain recount failed: {e}")),
                    (Err(e), Ok(_)) => check.findings.push(format!("{address}: contract tally failed: {e}")),
                    _ => {}
                }
            }
        }
        if let Ok(tally) = offchain {
            check.tallies.insert(*address, tally);
        }
    }
    if let Some(expected) = &expected.tally {
        match (contracts.as_slice(), check.tallies.values().next()) {
            ([_], Some(tally)) if tally == expected => {}
            ([_], Some(tally)) => check.findings.push(format!(
                "recounted tally differs from the expected one:\n{}vs\n{}",
                tally.render(),
                expected.render()
            )),
            ([_], None) => check.findings.push("no tally could be recounted".to_owned()),
            (all, _) => check.findings.push(format!("expected one election, found {}", all.len())),
        }
    }
    check
}

#[cfg(test)]
mod tests {
    use super::*;

    fn windows() -> WindowConfig {
        WindowConfig { st: 10, ct: 20, et: 30 }
    }

    fn ab(a: usize, b: usize) -> Vec<VoterConfig> {
        (0..a)
            .map(|i| VoterConfig::honest(format!("a{i}"), "A"))
            .chain((0..b).map(|i| VoterConfig::honest(format!("b{i}"), "B")))
            .collect()
    }

    #[test]
    fn honest_run_tallies_the_ballots_cast() {
        let report = run_scenario(&ScenarioConfig::new(1, windows(), ab(6, 4))).unwrap();
        let tally = report.tally.clone().unwrap();
        assert_eq!((tally.count(b"A"), tally.count(b"B")), (6, 4));
        assert!(report.passed(), "{:#?}", report.assertions);
        let rows: Vec<Property> = report.assertions.iter().map(|a| a.property).collect();
        assert_eq!(
            rows,
            [
                Property::Privacy,
                Property::ReceiptFreeness,
                Property::Robustness,
                Property::Verifiability,
                Property::Eligibility,
                Property::PreventionOfMultipleVoting,
                Property::Correctness
            ]
        );
        assert_eq!(report.assertion(Property::ReceiptFreeness).unwrap().observed, Verdict::AttackFound);
    }

    #[test]
    fn runs_are_deterministic() {
        let config = ScenarioConfig::new(5, windows(), ab(2, 1));
        assert_eq!(run_scenario(&config).unwrap().transcript, run_scenario(&config).unwrap().transcript);
        let other = ScenarioConfig { seed: 6, ..config.clone() };
        assert_ne!(run_scenario(&config).unwrap().transcript, run_scenario(&other).unwrap().transcript);
    }

    #[test]
    fn invalid_configs_list_every_problem() {
        let mut config = ScenarioConfig::new(1, WindowConfig { st: 5, ct: 5, et: 4 }, vec![]);
        config.key_bits = 8;
        match run_scenario(&config).unwrap_err() {
            ScenarioError::ConfigInvalid(problems) => assert_eq!(problems.len(), 3, "{problems:?}"),
            other => panic!("{other}"),
        }
        let dup = ScenarioConfig::new(1, windows(), vec![VoterConfig::honest("x", "A"), VoterConfig::honest("x", "B")]);
        assert!(matches!(dup.validate(), Err(ScenarioError::ConfigInvalid(_))));
        let zero = ScenarioConfig::new(1, windows(), vec![VoterConfig::honest("x", "A").with_chances(0)]);
        assert!(matches!(zero.validate(), Err(ScenarioError::ConfigInvalid(_))));
    }

    #[test]
    fn config_toml_round_trip_and_defaults() {
        let text = r#"
            seed = 9
            [windows]
            st = 1
            ct = 2
            et = 3
            [[voters]]
            name = "alice"
            ballot = "A"
            [[voters]]
            name = "mallory"
            kind = "double-vote"
            chances = 2
        "#;
        let config = ScenarioConfig::from_toml(text).unwrap();
        assert_eq!(config.key_bits, TOY_KEY_BITS);
        assert_eq!(config.forge_attempts, 1000);
        assert_eq!(config.voters[0].chances, 1);
        assert_eq!(config.voters[1].kind, VoterKind::DoubleVote);
        assert_eq!(ScenarioConfig::from_toml(&config.to_toml()).unwrap(), config);
        assert!(ScenarioConfig::from_toml("seed = 1\nbogus = 2").is_err());
    }

    #[test]
    fn attack_names_parse() {
        for attack in Attack::ALL {
            assert_eq!(attack.name().parse::<Attack>().unwrap(), attack);
        }
        let config = ScenarioConfig::new(1, windows(), ab(1, 0));
        assert_eq!(
            run_attack("ballot-stuffing", &config).unwrap_err(),
            ScenarioError::UnknownAttack("ballot-stuffing".into())
        );
    }

    #[test]
    fn every_attack_meets_its_expectation() {
        let mut config = ScenarioConfig::new(3, windows(), ab(2, 1));
        config.forge_attempts = 50;
        for attack in Attack::ALL {
            let report = run_attack(attack.name(), &config).unwrap();
            let outcome = report.attack.clone().unwrap();
            assert_eq!(outcome.succeeded, attack.expected_success(), "{attack}: {}", outcome.detail);
            assert!(report.passed(), "{attack}: {:#?}", report.assertions);
        }
    }

    #[test]
    fn linked_cast_is_flagged_as_a_privacy_violation() {
        let mut voters = ab(1, 1);
        voters[0].kind = VoterKind::Linked;
        let report = run_scenario(&ScenarioConfig::new(2, windows(), voters)).unwrap();
        let privacy = report.assertion(Property::Privacy).unwrap();
        assert!(!privacy.pass);
        assert!(privacy.detail.contains("eligible account"));
        assert!(report.assertion(Property::Correctness).unwrap().pass);
    }

    #[test]
    fn misbehaving_organizer_is_detected_not_tolerated() {
        for behavior in [OrganizerBehavior::Refuse, OrganizerBehavior::Garbage] {
            let mut config = ScenarioConfig::new(2, windows(), ab(2, 0));
            config.organizer = behavior;
            let report = run_scenario(&config).unwrap();
            assert!(report.assertion(Property::Robustness).unwrap().pass, "{behavior:?}");
            assert!(!report.assertion(Property::Correctness).unwrap().pass);
            assert!(report.voters.iter().all(|v| v.errors.len() == 1));
        }
    }

    #[test]
    fn sealed_run_matches_plain_run() {
        let plain = ScenarioConfig::new(4, windows(), ab(3, 2));
        let sealed = ScenarioConfig { sealed: true, ..plain.clone() };
        let a = run_scenario(&plain).unwrap();
        let b = run_scenario(&sealed).unwrap();
        assert_eq!(a.tally, b.tally);
        assert!(b.passed(), "{:#?}", b.assertions);
        assert!(b.assertion(Property::Fairness).is_some());
        assert!(a.assertion(Property::Fairness).is_none());
    }

    #[test]
    fn multi_chance_voters_cast_once_per_chance() {
        let config = ScenarioConfig::new(
            8,
            windows(),
            vec![VoterConfig::honest("a", "A").with_chances(2), VoterConfig::honest("b", "B")],
        );
        let report = run_scenario(&config).unwrap();
        assert_eq!(report.tally.as_ref().unwrap().count(b"A"), 2);
        assert!(report.passed());
    }

    #[test]
    fn transcript_mutations_are_found() {
        let report = run_scenario(&ScenarioConfig::new(1, windows(), ab(2, 2))).unwrap();
        let expected = report.tally.clone().unwrap();
        let anchored = Expectation::from(&report);
        assert!(verify_transcript(&report.transcript, &anchored).ok());
        let lines: Vec<&str> = report.transcript.lines().collect();
        let cast = lines.iter().position(|l| l.contains(" cast ")).unwrap();
        let deleted: String =
            lines.iter().enumerate().filter(|(i, _)| *i != cast).map(|(_, l)| format!("{l}\n")).collect();
        assert!(!verify_transcript(&deleted, &Expectation::tally(expected.clone())).ok());
        // Dropping the last entry replays cleanly; only the anchor notices.
        let truncated: String = lines[..lines.len() - 1].iter().map(|l| format!("{l}\n")).collect();
        assert!(verify_transcript(&truncated, &Expectation::default()).ok());
        assert!(!verify_transcript(&truncated, &anchored).ok());
        let mut wrong = expected.clone();
        wrong.add(b"A");
        assert!(!verify_transcript(&report.transcript, &Expectation::tally(wrong)).ok());
        assert!(!verify_transcript("garbage", &Expectation::default()).ok());
    }

    #[test]
    fn leak_rules() {
        let ballots = vec![b"candidate-alpha".to_vec(), b"A".to_vec()];
        assert!(plaintext_leaks("0 1 aa bb cast ff ee dd true 00", &ballots).is_empty());
        assert_eq!(plaintext_leaks("0 1 aa bb cast ff ee 41 true 00", &ballots), vec![b"A".to_vec()]);
        assert!(plaintext_leaks("0 1 aa bb request 41 ok 00", &ballots).is_empty());
        assert!(plaintext_leaks("ab4123", &ballots).is_empty());
        let hex = hex::encode("candidate-alpha");
        assert_eq!(plaintext_leaks(&format!("00{hex}00"), &ballots).len(), 1);
        assert_eq!(plaintext_leaks("candidate-alpha", &ballots).len(), 1);
    }

    #[test]
    fn enumeration_accepts_genuine_requests() {
        let key = KeyPair::toy();
        let mut rng = role_rng(0, "test");
        let digest = BallotDigest::new(b"A", &Uuid::random(&mut rng));
        let other = BallotDigest::new(b"B", &Uuid::random(&mut rng));
        let r = blindsig::BlindingFactor::random(key.public(), &mut rng);
        let blinded = blindsig::blind(&digest, &r, key.public()).unwrap();
        assert_eq!(unlinkability_violations(3233, 17, &[blinded.value().clone()], &[digest, other]), 0);
        // 61 shares a factor with n, so no unit explains it.
        assert_eq!(unlinkability_violations(3233, 17, &[BigUint::from(61u32)], &[digest]), 1);
    }
}
