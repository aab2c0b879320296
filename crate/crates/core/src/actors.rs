//! Organizer and voter clients.
//!
//! The organizer keeps the permission list and answers blind-sign requests. A voter
//! blinds `Hash(ballot) ‖ uuid`, has it signed from the eligible account, checks the
//! response with the contract, unblinds, and casts from a fresh anonymous account.
//!
//! Everything a voter needs to prove how they voted (`ballot`, `uuid`, `r`) stays in
//! [`VoterState`], which is exactly why the protocol is not receipt-free: see
//! [`VoterState::prove_receipt`] and [`verify_receipt`].

use std::collections::BTreeMap;

use num_bigint::BigUint;
use rand::Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::blindsig::{
    self, BallotDigest, BlindSigError, BlindedBallot, BlindingFactor, KeyPair, PublicKey, SignedBallot,
    SignedBlindedBallot, Uuid,
};
use crate::contract::{ContractError, ElectionParams, Phase, Windows};
use crate::hexfmt::{self, HexError};
use crate::ledger::{contract_address, Account, Address, AuthSecret, Ledger, LedgerError, Outcome, Payload, TxReceipt};
use crate::sealing;

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum ActorError {
    #[error("address {0} is listed twice")]
    DuplicateAddress(Address),
    #[error("address {0} is listed with zero chances")]
    ZeroChances(Address),
    #[error("the organizer refused to sign")]
    SignRefused,
    #[error("the contract rejected the organizer's signature")]
    CheckFailed,
    #[error("the voter holds no signed ballot")]
    NoSignature,
    #[error("transaction {0} is not a sign request to this organizer")]
    NotARequest(u64),
    #[error("no contract at {0}")]
    NoContract(Address),
    #[error("unexpected outcome {0}")]
    UnexpectedOutcome(String),
    #[error("malformed voter state file: {0}")]
    StateFile(String),
    #[error(transparent)]
    Contract(#[from] ContractError),
    #[error(transparent)]
    Ledger(#[from] LedgerError),
    #[error(transparent)]
    BlindSig(#[from] BlindSigError),
}

impl From<HexError> for ActorError {
    fn from(e: HexError) -> Self {
        ActorError::StateFile(e.to_string())
    }
}

/// Eligible addresses and how many more signatures each may receive.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct PermissionList {
    chances: BTreeMap<Address, u32>,
    initial_total: u64,
}

impl PermissionList {
    pub fn new(entries: impl IntoIterator<Item = (Address, u32)>) -> Result<Self, ActorError> {
        let mut chances = BTreeMap::new();
        for (address, count) in entries {
            if count == 0 {
                return Err(ActorError::ZeroChances(address));
            }
            if chances.insert(address, count).is_some() {
                return Err(ActorError::DuplicateAddress(address));
            }
        }
        let initial_total = chances.values().map(|&c| u64::from(c)).sum();
        Ok(Self { chances, initial_total })
    }

    pub fn is_listed(&self, address: &Address) -> bool {
        self.chances.contains_key(address)
    }

    /// Remaining chances; zero for unlisted addresses.
    pub fn chance(&self, address: &Address) -> u32 {
        self.chances.get(address).copied().unwrap_or(0)
    }

    pub fn initial_total(&self) -> u64 {
        self.initial_total
    }

    pub fn remaining_total(&self) -> u64 {
        self.chances.values().map(|&c| u64::from(c)).sum()
    }

    pub fn addresses(&self) -> impl Iterator<Item = &Address> {
        self.chances.keys()
    }

    fn spend(&mut self, address: &Address) -> bool {
        match self.chances.get_mut(address) {
            Some(c) if *c > 0 => {
                *c -= 1;
                true
            }
            _ => false,
        }
    }
}

/// The sign decision: sign and spend one chance if the sender is listed with chances
/// left, otherwise answer with the refusal sentinel `0`.
pub fn decide_and_sign(
    sender: &Address,
    blinded: &BlindedBallot,
    permissions: &mut PermissionList,
    key: &KeyPair,
) -> SignedBlindedBallot {
    if permissions.spend(sender) {
        blindsig::sign_blinded(blinded, key)
    } else {
        SignedBlindedBallot::refusal()
    }
}

/// How the organizer answers sign requests. Only `Honest` follows the protocol; the
/// others exist to exercise detection.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum OrganizerBehavior {
    #[default]
    Honest,
    /// Refuses everyone.
    Refuse,
    /// Spends the chance but returns a value off by one.
    Garbage,
}

#[derive(Debug, Clone)]
pub struct Organizer {
    account: Account,
    key: KeyPair,
    sealing_key: Option<KeyPair>,
    contract: Address,
    params: ElectionParams,
    permissions: PermissionList,
    behavior: OrganizerBehavior,
    issued: u64,
}

impl Organizer {
    /// Builds the permission list and deploys the election contract.
    pub fn setup(
        ledger: &mut Ledger,
        account: Account,
        voters: &[(Address, u32)],
        key: KeyPair,
        windows: Windows,
        sealing_key: Option<KeyPair>,
    ) -> Result<Self, ActorError> {
        let permissions = PermissionList::new(voters.iter().copied())?;
        let params =
            ElectionParams::new(key.public().clone(), windows, sealing_key.as_ref().map(|k| k.public().clone()));
        let contract = contract_address(&account.address(), ledger.len() as u64);
        match ledger.call(&account, contract, Payload::Deploy(params.clone()))?.outcome {
            Outcome::Ack => {}
            Outcome::Rejected(e) => return Err(e.into()),
            other => return Err(ActorError::UnexpectedOutcome(other.token())),
        }
        Ok(Self {
            account,
            key,
            sealing_key,
            contract,
            params,
            permissions,
            behavior: OrganizerBehavior::Honest,
            issued: 0,
        })
    }

    pub fn with_behavior(mut self, behavior: OrganizerBehavior) -> Self {
        self.behavior = behavior;
        self
    }

    pub fn address(&self) -> Address {
        self.account.address()
    }

    pub fn contract(&self) -> Address {
        self.contract
    }

    pub fn params(&self) -> &ElectionParams {
        &self.params
    }

    pub fn permissions(&self) -> &PermissionList {
        &self.permissions
    }

    /// Number of non-refusal answers given so far.
    pub fn issued(&self) -> u64 {
        self.issued
    }

    /// Answers one sign request at logical time `now`.
    pub fn sign(
        &mut self,
        sender: &Address,
        blinded: &BlindedBallot,
        now: u64,
    ) -> Result<SignedBlindedBallot, ActorError> {
        self.params.windows().require(Phase::Sign, now)?;
        let answer = match self.behavior {
            OrganizerBehavior::Honest => decide_and_sign(sender, blinded, &mut self.permissions, &self.key),
            OrganizerBehavior::Refuse => SignedBlindedBallot::refusal(),
            OrganizerBehavior::Garbage => {
                let signed = decide_and_sign(sender, blinded, &mut self.permissions, &self.key);
                if signed.is_refusal() {
                    signed
                } else {
                    let n = self.key.public().modulus();
                    SignedBlindedBallot::from_value((signed.value() + 1u32) % n)
                }
            }
        };
        if !answer.is_refusal() {
            self.issued += 1;
        }
        Ok(answer)
    }

    /// Reads the request at `request_index` from the ledger and posts the answer back
    /// to the requesting account.
    pub fn serve(&mut self, ledger: &mut Ledger, request_index: u64) -> Result<TxReceipt, ActorError> {
        let (sender, blinded) = match ledger.transaction(request_index) {
            Some(tx) if tx.recipient == self.address() => match &tx.payload {
                Payload::SignRequest { blinded } => (tx.sender, blinded.clone()),
                _ => return Err(ActorError::NotARequest(request_index)),
            },
            _ => return Err(ActorError::NotARequest(request_index)),
        };
        let signed_blinded = self.sign(&sender, &blinded, ledger.clock())?;
        Ok(ledger.call(&self.account, sender, Payload::SignResponse { blinded, signed_blinded })?)
    }

    /// Publishes the sealing private key on the ledger, unlocking the tally.
    pub fn publish_sealing_key(&self, ledger: &mut Ledger) -> Result<TxReceipt, ActorError> {
        let sealing_key = self.sealing_key.clone().ok_or(ContractError::NotSealed)?;
        let receipt = ledger.call(&self.account, self.contract, Payload::Publish { sealing_key })?;
        match &receipt.outcome {
            Outcome::Rejected(e) => Err(e.clone().into()),
            _ => Ok(receipt),
        }
    }
}

/// Everything one voter holds locally for one chance.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct VoterState {
    ballot: Vec<u8>,
    payload: Vec<u8>,
    r: BlindingFactor,
    uuid: Uuid,
    blinded: BlindedBallot,
    eligible: Account,
    anon: Option<Account>,
    signed_blinded: Option<SignedBlindedBallot>,
    signed: Option<SignedBallot>,
    sign_tx_index: Option<u64>,
}

impl VoterState {
    /// Draws `r` and the uuid and blinds the ballot. In a sealed election the ballot is
    /// first encrypted under the sealing key and the ciphertext is what gets signed and cast.
    pub fn prepare<R: Rng + ?Sized>(ballot: &[u8], eligible: Account, params: &ElectionParams, rng: &mut R) -> Self {
        let payload = match params.sealing_pk() {
            Some(pk) => sealing::seal(ballot, pk, rng),
            None => ballot.to_vec(),
        };
        let uuid = Uuid::random(rng);
        let r = BlindingFactor::random(params.pk(), rng);
        let blinded = blindsig::blind(&BallotDigest::new(&payload, &uuid), &r, params.pk())
            .expect("r is drawn as a unit of this modulus");
        Self {
            ballot: ballot.to_vec(),
            payload,
            r,
            uuid,
            blinded,
            eligible,
            anon: None,
            signed_blinded: None,
            signed: None,
            sign_tx_index: None,
        }
    }

    pub fn ballot(&self) -> &[u8] {
        &self.ballot
    }

    /// Bytes that are signed and cast: the ballot, or its sealed form.
    pub fn payload(&self) -> &[u8] {
        &self.payload
    }

    pub fn uuid(&self) -> &Uuid {
        &self.uuid
    }

    pub fn blinding_factor(&self) -> &BlindingFactor {
        &self.r
    }

    pub fn blinded(&self) -> &BlindedBallot {
        &self.blinded
    }

    pub fn eligible_account(&self) -> &Account {
        &self.eligible
    }

    pub fn anon_account(&self) -> Option<&Account> {
        self.anon.as_ref()
    }

    pub fn signed(&self) -> Option<&SignedBallot> {
        self.signed.as_ref()
    }

    pub fn sign_tx_index(&self) -> Option<u64> {
        self.sign_tx_index
    }

    /// Sign stage. Retrying after an error reuses the same `r` and uuid.
    pub fn obtain_signature(&mut self, ledger: &mut Ledger, organizer: &mut Organizer) -> Result<(), ActorError> {
        let contract = organizer.contract();
        let pk = contract_pk(ledger, &contract)?;
        let request = Payload::SignRequest { blinded: self.blinded.clone() };
        let request = ledger.call(&self.eligible, organizer.address(), request)?;
        let response = organizer.serve(ledger, request.index)?;
        let signed_blinded = match ledger.transaction(response.index).map(|tx| &tx.payload) {
            Some(Payload::SignResponse { signed_blinded, .. }) => signed_blinded.clone(),
            _ => return Err(ActorError::UnexpectedOutcome("missing sign response".into())),
        };
        self.sign_tx_index = Some(response.index);
        if signed_blinded.is_refusal() {
            return Err(ActorError::SignRefused);
        }
        let check = Payload::Check { signed_blinded: signed_blinded.clone(), blinded: self.blinded.clone() };
        match ledger.call(&self.eligible, contract, check)?.outcome {
            Outcome::Verdict(true) => {}
            Outcome::Verdict(false) => return Err(ActorError::CheckFailed),
            Outcome::Rejected(e) => return Err(e.into()),
            other => return Err(ActorError::UnexpectedOutcome(other.token())),
        }
        self.signed = Some(blindsig::unblind(&signed_blinded, &self.r, &pk)?);
        self.signed_blinded = Some(signed_blinded);
        Ok(())
    }

    /// Vote stage: casts from a freshly generated anonymous account.
    pub fn cast<R: Rng + ?Sized>(
        &mut self,
        ledger: &mut Ledger,
        contract: Address,
        rng: &mut R,
    ) -> Result<bool, ActorError> {
        if self.signed.is_none() {
            return Err(ActorError::NoSignature);
        }
        let anon = loop {
            let candidate = Account::generate(rng);
            if candidate.address() != self.eligible.address() {
                break candidate;
            }
        };
        self.anon = Some(anon.clone());
        self.cast_from(ledger, contract, &anon)
    }

    /// Casts from an arbitrary account. Using the eligible account here links the ballot
    /// to the voter in the public log.
    pub fn cast_from(&self, ledger: &mut Ledger, contract: Address, account: &Account) -> Result<bool, ActorError> {
        let signed = self.signed.clone().ok_or(ActorError::NoSignature)?;
        let payload = Payload::Cast { signed, uuid: self.uuid, ballot: self.payload.clone() };
        match ledger.call(account, contract, payload)?.outcome {
            Outcome::Verdict(accepted) => Ok(accepted),
            Outcome::Rejected(e) => Err(e.into()),
            other => Err(ActorError::UnexpectedOutcome(other.token())),
        }
    }

    /// Packages the local secrets into a receipt a third party can check.
    pub fn prove_receipt(&self) -> Result<Receipt, ActorError> {
        let sign_tx_index = self.sign_tx_index.ok_or(ActorError::NoSignature)?;
        if self.signed.is_none() {
            return Err(ActorError::NoSignature);
        }
        Ok(Receipt {
            ballot: self.payload.clone(),
            uuid: self.uuid,
            r: self.r.value().clone(),
            blinded: self.blinded.clone(),
            sign_tx_index,
        })
    }

    /// Serializes the full local state, secrets included. Whoever obtains this file can
    /// prove how the voter voted.
    pub fn to_state_file(&self) -> String {
        let file = VoterStateFile {
            ballot: hexfmt::bytes_to_hex(&self.ballot),
            payload: hexfmt::bytes_to_hex(&self.payload),
            r: hexfmt::int_to_hex(self.r.value()),
            uuid: self.uuid.to_hex(),
            blinded: self.blinded.to_hex(),
            eligible_secret: self.eligible.secret().to_hex(),
            anon_secret: self.anon.as_ref().map(|a| a.secret().to_hex()),
            signed_blinded: self.signed_blinded.as_ref().map(SignedBlindedBallot::to_hex),
            signed: self.signed.as_ref().map(SignedBallot::to_hex),
            sign_tx_index: self.sign_tx_index,
        };
        toml::to_string(&file).expect("state file fields are plain values")
    }

    pub fn from_state_file(text: &str, pk: &PublicKey) -> Result<Self, ActorError> {
        let file: VoterStateFile = toml::from_str(text).map_err(|e| ActorError::StateFile(e.message().to_owned()))?;
        let account =
            |hex: &str| -> Result<Account, ActorError> { Ok(Account::from_secret(AuthSecret::from_hex(hex)?)) };
        Ok(Self {
            ballot: hexfmt::bytes_from_hex(&file.ballot)?,
            payload: hexfmt::bytes_from_hex(&file.payload)?,
            r: BlindingFactor::new(hexfmt::int_from_hex(&file.r)?, pk)?,
            uuid: Uuid::from_hex(&file.uuid)?,
            blinded: BlindedBallot::from_hex(&file.blinded)?,
            eligible: account(&file.eligible_secret)?,
            anon: file.anon_secret.as_deref().map(account).transpose()?,
            signed_blinded: file.signed_blinded.as_deref().map(SignedBlindedBallot::from_hex).transpose()?,
            signed: file.signed.as_deref().map(SignedBallot::from_hex).transpose()?,
            sign_tx_index: file.sign_tx_index,
        })
    }
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct VoterStateFile {
    ballot: String,
    payload: String,
    r: String,
    uuid: String,
    blinded: String,
    eligible_secret: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    anon_secret: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    signed_blinded: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    signed: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    sign_tx_index: Option<u64>,
}

fn contract_pk(ledger: &Ledger, contract: &Address) -> Result<PublicKey, ActorError> {
    ledger.contract(contract).map(|c| c.params().pk().clone()).ok_or(ActorError::NoContract(*contract))
}

/// What a voter can hand to a third party to prove their vote.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Receipt {
    pub ballot: Vec<u8>,
    pub uuid: Uuid,
    pub r: BigUint,
    pub blinded: BlindedBallot,
    pub sign_tx_index: u64,
}

/// Checks a receipt against public data only. All three links must hold:
/// 1. blinding `Hash(ballot) ‖ uuid` with `r` reproduces `blinded`;
/// 2. the ledger entry at `sign_tx_index` is the organizer's valid answer to `blinded`;
/// 3. the ballot box maps `uuid` to `ballot`.
pub fn verify_receipt(receipt: &Receipt, ledger: &Ledger, contract: &Address) -> bool {
    let Some(contract) = ledger.contract(contract) else {
        return false;
    };
    let pk = contract.params().pk();
    let Ok(r) = BlindingFactor::new(receipt.r.clone(), pk) else {
        return false;
    };
    let digest = BallotDigest::new(&receipt.ballot, &receipt.uuid);
    if blindsig::blind(&digest, &r, pk).ok().as_ref() != Some(&receipt.blinded) {
        return false;
    }
    let answered = matches!(
        ledger.transaction(receipt.sign_tx_index).map(|tx| &tx.payload),
        Some(Payload::SignResponse { blinded, signed_blinded })
            if blinded == &receipt.blinded
                && !signed_blinded.is_refusal()
                && &pk.apply(signed_blinded.value()) == blinded.value()
    );
    answered && contract.ballot_box().get(&receipt.uuid) == Some(receipt.ballot.as_slice())
}
