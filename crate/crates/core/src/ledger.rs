//! Deterministic single-node ledger standing in for the blockchain.
//!
//! Accounts are secret-derived addresses; a transaction is admitted only when its
//! submitter proves possession of the sender's secret. Every admitted transaction is
//! appended to the log with the next index and executed at once against the contract
//! registry. Contract rejections are recorded as outcomes, like a reverted call, rather
//! than keeping the transaction off the log. Each log entry is chained to the previous
//! one by SHA-256, and the log can be exported as text and replayed from genesis.
//!
//! Transcript line layout (single spaces, one transaction per line):
//!
//! ```text
//! <index> <timestamp> <sender> <recipient> <kind> <field>* <outcome> <chain hash>
//! ```
//!
//! | kind      | fields                              |
//! |-----------|-------------------------------------|
//! | `deploy`  | `n e st ct et sealing_n sealing_e`  |
//! | `check`   | `signed_blinded blinded`            |
//! | `cast`    | `signed uuid ballot`                |
//! | `publish` | `n e d`                             |
//! | `tally`   |                                     |
//! | `request` | `blinded`                           |
//! | `respond` | `blinded signed_blinded`            |
//!
//! Integer fields are canonical lowercase hex; unsealed elections write `-` for both sealing
//! fields. The outcome is `ok`, `true`, `false`, `tally:<sha256 of the rendered tally>` or
//! `err:<code>`. The chain hash is `SHA-256(previous hash ‖ line up to the outcome)`, with
//! 32 zero bytes before the first entry.

use std::collections::BTreeMap;
use std::fmt;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha20Rng;
use sha2::{Digest, Sha256};
use thiserror::Error;

use crate::blindsig::{BlindedBallot, KeyPair, PublicKey, SignedBallot, SignedBlindedBallot, Uuid};
use crate::contract::{ContractError, ElectionContract, ElectionParams, Tally, Windows};
use crate::hexfmt::{self, HexError};

pub const ADDRESS_LEN: usize = 20;
const GENESIS_HASH: [u8; 32] = [0; 32];

/// 160-bit account or contract address.
#[derive(Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct Address([u8; ADDRESS_LEN]);

impl Address {
    pub fn from_bytes(bytes: [u8; ADDRESS_LEN]) -> Self {
        Self(bytes)
    }

    pub fn as_bytes(&self) -> &[u8; ADDRESS_LEN] {
        &self.0
    }

    pub fn to_hex(&self) -> String {
        hex::encode(self.0)
    }

    pub fn from_hex(text: &str) -> Result<Self, HexError> {
        hexfmt::fixed_from_hex(text).map(Self)
    }

    fn derive(domain: &[u8], parts: &[&[u8]]) -> Self {
        let mut hasher = Sha256::new();
        hasher.update(domain);
        parts.iter().for_each(|p| hasher.update(p));
        let digest = hasher.finalize();
        let mut bytes = [0u8; ADDRESS_LEN];
        bytes.copy_from_slice(&digest[..ADDRESS_LEN]);
        Self(bytes)
    }
}

impl fmt::Display for Address {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.to_hex())
    }
}

impl fmt::Debug for Address {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "Address({})", self.to_hex())
    }
}

/// Possession of this secret is what proves sendership.
#[derive(Clone, PartialEq, Eq)]
pub struct AuthSecret([u8; 32]);

impl AuthSecret {
    pub fn from_bytes(bytes: [u8; 32]) -> Self {
        Self(bytes)
    }

    pub fn to_hex(&self) -> String {
        hex::encode(self.0)
    }

    pub fn from_hex(text: &str) -> Result<Self, HexError> {
        hexfmt::fixed_from_hex(text).map(Self)
    }

    pub fn address(&self) -> Address {
        Address::derive(b"blindvote/account", &[&self.0])
    }
}

impl fmt::Debug for AuthSecret {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str("AuthSecret(..)")
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Account {
    address: Address,
    secret: AuthSecret,
}

impl Account {
    pub fn from_secret(secret: AuthSecret) -> Self {
        Self { address: secret.address(), secret }
    }

    pub fn generate<R: Rng + ?Sized>(rng: &mut R) -> Self {
        Self::from_secret(AuthSecret(rng.gen()))
    }

    pub fn from_seed(seed: u64) -> Self {
        Self::generate(&mut ChaCha20Rng::seed_from_u64(seed))
    }

    pub fn address(&self) -> Address {
        self.address
    }

    pub fn secret(&self) -> &AuthSecret {
        &self.secret
    }
}

/// Address at which `deployer` deploys a contract under `salt`.
pub fn contract_address(deployer: &Address, salt: u64) -> Address {
    Address::derive(b"blindvote/contract", &[deployer.as_bytes(), &salt.to_be_bytes()])
}

/// What a transaction carries. The first five kinds are contract calls; `SignRequest`
/// and `SignResponse` are plain messages between voter and organizer accounts.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Payload {
    Deploy(ElectionParams),
    Check { signed_blinded: SignedBlindedBallot, blinded: BlindedBallot },
    Cast { signed: SignedBallot, uuid: Uuid, ballot: Vec<u8> },
    Publish { sealing_key: KeyPair },
    Tally,
    SignRequest { blinded: BlindedBallot },
    SignResponse { blinded: BlindedBallot, signed_blinded: SignedBlindedBallot },
}

impl Payload {
    pub fn kind(&self) -> &'static str {
        match self {
            Payload::Deploy(_) => "deploy",
            Payload::Check { .. } => "check",
            Payload::Cast { .. } => "cast",
            Payload::Publish { .. } => "publish",
            Payload::Tally => "tally",
            Payload::SignRequest { .. } => "request",
            Payload::SignResponse { .. } => "respond",
        }
    }

    fn field_count(kind: &str) -> Option<usize> {
        Some(match kind {
            "deploy" => 7,
            "check" => 2,
            "cast" => 3,
            "publish" => 3,
            "tally" => 0,
            "request" => 1,
            "respond" => 2,
            _ => return None,
        })
    }

    fn fields(&self) -> Vec<String> {
        let int = hexfmt::int_to_hex;
        match self {
            Payload::Deploy(params) => {
                let w = params.windows();
                let (seal_n, seal_e) = match params.sealing_pk() {
                    Some(pk) => (int(pk.modulus()), int(pk.public_exponent())),
                    None => ("-".to_owned(), "-".to_owned()),
                };
                vec![
                    int(params.pk().modulus()),
                    int(params.pk().public_exponent()),
                    format!("{:x}", w.st()),
                    format!("{:x}", w.ct()),
                    format!("{:x}", w.et()),
                    seal_n,
                    seal_e,
                ]
            }
            Payload::Check { signed_blinded, blinded } => vec![signed_blinded.to_hex(), blinded.to_hex()],
            Payload::Cast { signed, uuid, ballot } => {
                vec![signed.to_hex(), uuid.to_hex(), hexfmt::bytes_to_hex(ballot)]
            }
            Payload::Publish { sealing_key } => vec![
                int(sealing_key.public().modulus()),
                int(sealing_key.public().public_exponent()),
                int(sealing_key.private_exponent()),
            ],
            Payload::Tally => vec![],
            Payload::SignRequest { blinded } => vec![blinded.to_hex()],
            Payload::SignResponse { blinded, signed_blinded } => {
                vec![blinded.to_hex(), signed_blinded.to_hex()]
            }
        }
    }

    fn parse(kind: &str, fields: &[&str]) -> Result<Self, String> {
        let int = |s: &str| hexfmt::int_from_hex(s).map_err(|e| e.to_string());
        let small = |s: &str| -> Result<u64, String> {
            let value = int(s)?;
            u64::try_from(&value).map_err(|_| format!("time field {s} overflows"))
        };
        Ok(match kind {
            "deploy" => {
                let pk = PublicKey::new(int(fields[0])?, int(fields[1])?).map_err(|e| e.to_string())?;
                let windows =
                    Windows::new(small(fields[2])?, small(fields[3])?, small(fields[4])?).map_err(|e| e.to_string())?;
                let sealing_pk = match (fields[5], fields[6]) {
                    ("-", "-") => None,
                    (n, e) => Some(PublicKey::new(int(n)?, int(e)?).map_err(|e| e.to_string())?),
                };
                Payload::Deploy(ElectionParams::new(pk, windows, sealing_pk))
            }
            "check" => Payload::Check {
                signed_blinded: SignedBlindedBallot::from_value(int(fields[0])?),
                blinded: BlindedBallot::from_value(int(fields[1])?),
            },
            "cast" => Payload::Cast {
                signed: SignedBallot::from_value(int(fields[0])?),
                uuid: Uuid::from_hex(fields[1]).map_err(|e| e.to_string())?,
                ballot: hexfmt::bytes_from_hex(fields[2]).map_err(|e| e.to_string())?,
            },
            "publish" => Payload::Publish {
                sealing_key: KeyPair::from_parts(int(fields[0])?, int(fields[1])?, int(fields[2])?)
                    .map_err(|e| e.to_string())?,
            },
            "tally" => Payload::Tally,
            "request" => Payload::SignRequest { blinded: BlindedBallot::from_value(int(fields[0])?) },
            "respond" => Payload::SignResponse {
                blinded: BlindedBallot::from_value(int(fields[0])?),
                signed_blinded: SignedBlindedBallot::from_value(int(fields[1])?),
            },
            other => return Err(format!("unknown payload kind {other:?}")),
        })
    }
}

/// A transaction before admission.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct TxDraft {
    pub sender: Address,
    pub recipient: Address,
    pub timestamp: u64,
    pub payload: Payload,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Transaction {
    pub index: u64,
    pub timestamp: u64,
    pub sender: Address,
    pub recipient: Address,
    pub payload: Payload,
}

/// Result of executing one transaction.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Outcome {
    Ack,
    Verdict(bool),
    Tally(Tally),
    Rejected(ContractError),
}

impl Outcome {
    pub fn token(&self) -> String {
        match self {
            Outcome::Ack => "ok".to_owned(),
            Outcome::Verdict(v) => v.to_string(),
            Outcome::Tally(t) => format!("tally:{}", t.digest()),
            Outcome::Rejected(e) => format!("err:{}", e.code()),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct TxReceipt {
    pub index: u64,
    pub outcome: Outcome,
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum LedgerError {
    #[error("secret does not authenticate sender {0}")]
    AuthFailure(Address),
    #[error("logical time {requested} is before the ledger clock {clock}")]
    ClockViolation { clock: u64, requested: u64 },
    #[error("replay diverges at index {index}: {reason}")]
    ReplayDivergence { index: u64, reason: String },
    #[error("transcript line {line}: {message}")]
    Transcript { line: usize, message: String },
}

#[derive(Debug, Clone)]
struct Entry {
    tx: Transaction,
    outcome: Outcome,
    hash: [u8; 32],
}

/// One parsed transcript line.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Record {
    pub tx: Transaction,
    pub outcome: String,
    pub hash: String,
}

#[derive(Debug, Clone, Default)]
pub struct Ledger {
    entries: Vec<Entry>,
    clock: u64,
    contracts: BTreeMap<Address, ElectionContract>,
}

impl Ledger {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn clock(&self) -> u64 {
        self.clock
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn transaction(&self, index: u64) -> Option<&Transaction> {
        self.entries.get(usize::try_from(index).ok()?).map(|e| &e.tx)
    }

    pub fn outcome(&self, index: u64) -> Option<&Outcome> {
        self.entries.get(usize::try_from(index).ok()?).map(|e| &e.outcome)
    }

    pub fn transactions(&self) -> impl Iterator<Item = (&Transaction, &Outcome)> {
        self.entries.iter().map(|e| (&e.tx, &e.outcome))
    }

    pub fn contract(&self, address: &Address) -> Option<&ElectionContract> {
        self.contracts.get(address)
    }

    pub fn contracts(&self) -> &BTreeMap<Address, ElectionContract> {
        &self.contracts
    }

    /// Chain hash of the last entry.
    pub fn head(&self) -> String {
        hex::encode(self.entries.last().map_or(GENESIS_HASH, |e| e.hash))
    }

    pub fn advance_clock(&mut self, to: u64) -> Result<(), LedgerError> {
        if to < self.clock {
            return Err(LedgerError::ClockViolation { clock: self.clock, requested: to });
        }
        self.clock = to;
        Ok(())
    }

    /// Admits `draft` if `secret` authenticates its sender and its timestamp does not
    /// regress; the ledger clock moves to the transaction's timestamp.
    pub fn submit(&mut self, draft: TxDraft, secret: &AuthSecret) -> Result<TxReceipt, LedgerError> {
        if secret.address() != draft.sender {
            return Err(LedgerError::AuthFailure(draft.sender));
        }
        if draft.timestamp < self.clock {
            return Err(LedgerError::ClockViolation { clock: self.clock, requested: draft.timestamp });
        }
        Ok(self.commit(draft))
    }

    /// Submits from `from` to `to` at the current clock.
    pub fn call(&mut self, from: &Account, to: Address, payload: Payload) -> Result<TxReceipt, LedgerError> {
        let draft = TxDraft { sender: from.address(), recipient: to, timestamp: self.clock, payload };
        self.submit(draft, from.secret())
    }

    fn commit(&mut self, draft: TxDraft) -> TxReceipt {
        let tx = Transaction {
            index: self.entries.len() as u64,
            timestamp: draft.timestamp,
            sender: draft.sender,
            recipient: draft.recipient,
            payload: draft.payload,
        };
        self.clock = tx.timestamp;
        let outcome = self.execute(&tx);
        let prev = self.entries.last().map_or(GENESIS_HASH, |e| e.hash);
        let hash = chain_hash(&prev, &render_body(&tx, &outcome.token()));
        let index = tx.index;
        self.entries.push(Entry { tx, outcome: outcome.clone(), hash });
        TxReceipt { index, outcome }
    }

    fn execute(&mut self, tx: &Transaction) -> Outcome {
        let now = tx.timestamp;
        if let Payload::Deploy(params) = &tx.payload {
            if self.contracts.contains_key(&tx.recipient) {
                return Outcome::Rejected(ContractError::Redeploy(tx.recipient));
            }
            self.contracts.insert(tx.recipient, ElectionContract::deploy(params.clone()));
            return Outcome::Ack;
        }
        if matches!(tx.payload, Payload::SignRequest { .. } | Payload::SignResponse { .. }) {
            return Outcome::Ack;
        }
        let Some(contract) = self.contracts.get_mut(&tx.recipient) else {
            return Outcome::Rejected(ContractError::UnknownContract(tx.recipient));
        };
        let result = match &tx.payload {
            Payload::Check { signed_blinded, blinded } => {
                contract.check_signature(signed_blinded, blinded, now).map(Outcome::Verdict)
            }
            Payload::Cast { signed, uuid, ballot } => contract.cast(signed, ballot, uuid, now).map(Outcome::Verdict),
            Payload::Publish { sealing_key } => contract.publish_key(sealing_key, now).map(|()| Outcome::Ack),
            Payload::Tally => contract.tally(now).map(Outcome::Tally),
            Payload::Deploy(_) | Payload::SignRequest { .. } | Payload::SignResponse { .. } => {
                unreachable!("handled above")
            }
        };
        result.unwrap_or_else(Outcome::Rejected)
    }

    pub fn export(&self) -> String {
        self.entries
            .iter()
            .map(|e| format!("{} {}\n", render_body(&e.tx, &e.outcome.token()), hex::encode(e.hash)))
            .collect()
    }

    /// Re-executes `records` from genesis. Sender authentication is not repeated (secrets
    /// never reach the log); instead every recorded outcome and chain hash must match.
    pub fn replay(records: &[Record]) -> Result<Ledger, LedgerError> {
        let mut ledger = Ledger::new();
        for (position, record) in records.iter().enumerate() {
            let index = position as u64;
            let diverge = |reason: String| LedgerError::ReplayDivergence { index, reason };
            if record.tx.index != index {
                return Err(diverge(format!("record carries index {}", record.tx.index)));
            }
            if record.tx.timestamp < ledger.clock {
                return Err(diverge(format!("timestamp {} precedes clock {}", record.tx.timestamp, ledger.clock)));
            }
            let receipt = ledger.commit(TxDraft {
                sender: record.tx.sender,
                recipient: record.tx.recipient,
                timestamp: record.tx.timestamp,
                payload: record.tx.payload.clone(),
            });
            let token = receipt.outcome.token();
            if token != record.outcome {
                return Err(diverge(format!("recorded outcome {} but replay gives {token}", record.outcome)));
            }
            if ledger.head() != record.hash {
                return Err(diverge("chain hash mismatch".to_owned()));
            }
        }
        Ok(ledger)
    }

    pub fn import(text: &str) -> Result<Ledger, LedgerError> {
        Ledger::replay(&parse_transcript(text)?)
    }
}

fn render_body(tx: &Transaction, outcome: &str) -> String {
    let mut line = format!("{} {} {} {} {}", tx.index, tx.timestamp, tx.sender, tx.recipient, tx.payload.kind());
    for field in tx.payload.fields() {
        line.push(' ');
        line.push_str(&field);
    }
    line.push(' ');
    line.push_str(outcome);
    line
}

fn chain_hash(prev: &[u8; 32], body: &str) -> [u8; 32] {
    let mut hasher = Sha256::new();
    hasher.update(prev);
    hasher.update(body.as_bytes());
    hasher.finalize().into()
}

pub fn parse_transcript(text: &str) -> Result<Vec<Record>, LedgerError> {
    text.lines()
        .enumerate()
        .filter(|(_, line)| !line.is_empty())
        .map(|(i, line)| parse_record(line).map_err(|message| LedgerError::Transcript { line: i + 1, message }))
        .collect()
}

fn parse_record(line: &str) -> Result<Record, String> {
    let tokens: Vec<&str> = line.split(' ').collect();
    if tokens.len() < 7 {
        return Err("too few fields".to_owned());
    }
    let kind = tokens[4];
    let count = Payload::field_count(kind).ok_or_else(|| format!("unknown payload kind {kind:?}"))?;
    if tokens.len() != 5 + count + 2 {
        return Err(format!("{kind} expects {count} payload fields"));
    }
    let number = |s: &str, what: &str| s.parse::<u64>().map_err(|_| format!("bad {what} {s:?}"));
    let address = |s: &str| Address::from_hex(s).map_err(|e| e.to_string());
    let tx = Transaction {
        index: number(tokens[0], "index")?,
        timestamp: number(tokens[1], "timestamp")?,
        sender: address(tokens[2])?,
        recipient: address(tokens[3])?,
        payload: Payload::parse(kind, &tokens[5..5 + count])?,
    };
    Ok(Record { tx, outcome: tokens[5 + count].to_owned(), hash: tokens[6 + count].to_owned() })
}
