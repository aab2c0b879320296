//! Blind-signature voting over a simulated append-only ledger.
//!
//! [`blindsig`] holds the RSA blind-signature core, [`ledger`] the transaction log and
//! contract registry, [`contract`] the election state machine, [`actors`] the organizer
//! and voter clients, and [`scenario`] whole elections, attacks and transcript audits.

pub mod actors;
pub mod blindsig;
pub mod contract;
pub mod hexfmt;
pub mod ledger;
pub mod scenario;
pub mod sealing;

pub use actors::{verify_receipt, ActorError, Organizer, OrganizerBehavior, PermissionList, Receipt, VoterState};
pub use blindsig::{
    blind, keygen, sign_blinded, unblind, verify, BallotDigest, BlindSigError, BlindedBallot, BlindingFactor, KeyPair,
    PublicKey, SignedBallot, SignedBlindedBallot, Uuid,
};
pub use contract::{BallotBox, ContractError, ElectionContract, ElectionParams, Phase, Tally, Windows};
pub use ledger::{Account, Address, Ledger, LedgerError, Outcome, Payload, Transaction};
pub use scenario::{
    run_attack, run_scenario, verify_transcript, Attack, Expectation, Property, RunReport, ScenarioConfig,
    ScenarioError, Verdict, VoterConfig, VoterKind, WindowConfig,
};
