use chrono::NaiveDate;

use super::ConsensusError;
use crate::crypto;
use crate::ledger::{endorsement_payload, Endorsement, EndorsedTransaction, TransactionProposal};
use crate::membership::{Membership, PeerNode};
use crate::runtime::{invoke_contract, ContractCatalog, InvocationEnv};

/// Read-only context an endorser needs besides its own ledger.
#[derive(Clone, Copy)]
pub struct EndorsementEnv<'a> {
    pub membership: &'a Membership,
    pub catalog: &'a ContractCatalog,
    pub epoch: NaiveDate,
}

/// Simulate `proposal` on `peer`'s committed state and sign the result.
/// The peer's ledger is not modified.
pub fn simulate_and_endorse(
    env: EndorsementEnv<'_>,
    peer: &PeerNode,
    proposal: &TransactionProposal,
) -> Result<EndorsedTransaction, ConsensusError> {
    let ledger = peer
        .ledger(&proposal.channel_id)
        .ok_or_else(|| ConsensusError::NotInChannel {
            peer: peer.peer_id.clone(),
            channel: proposal.channel_id.clone(),
        })?;
    if !peer.has_installed(&proposal.chaincode_name) {
        return Err(ConsensusError::NotAnEndorser {
            peer: peer.peer_id.clone(),
            chaincode: proposal.chaincode_name.clone(),
        });
    }
    let invoker = env
        .membership
        .client(&proposal.creator)
        .filter(|_| {
            let key = &env.membership.identity(&proposal.creator).expect("client").verify_key;
            proposal.verify_signature(key)
        })
        .ok_or_else(|| ConsensusError::BadClientSignature(proposal.tx_id.clone()))?;
    let member = env
        .membership
        .channel(&proposal.channel_id)
        .is_some_and(|c| c.member_orgs.contains(&invoker.org_id));
    if !member {
        return Err(ConsensusError::CreatorNotMember {
            creator: proposal.creator.clone(),
            channel: proposal.channel_id.clone(),
        });
    }

    let inv = InvocationEnv {
        invoker: invoker.clone(),
        channel_id: proposal.channel_id.clone(),
        tx_id: proposal.tx_id.clone(),
        timestamp: proposal.timestamp,
        epoch: env.epoch,
    };
    let outcome = invoke_contract(
        env.catalog,
        ledger,
        &inv,
        &proposal.chaincode_name,
        &proposal.function,
        &proposal.args,
    )?;
    let signature = crypto::sign(
        &peer.keys.signing_key,
        &endorsement_payload(proposal, &outcome.rwset, &outcome.response),
    );
    Ok(EndorsedTransaction {
        proposal: proposal.clone(),
        rwset: outcome.rwset,
        response: outcome.response,
        endorsements: vec![Endorsement {
            endorser_id: peer.keys.identity_id.clone(),
            org_id: peer.org_id.clone(),
            signature,
        }],
    })
}

/// Gather endorsements from every peer in `endorsers` into one transaction.
/// All endorsers must agree on (rwset, response).
pub fn collect_endorsements(
    env: EndorsementEnv<'_>,
    proposal: &TransactionProposal,
    endorsers: &[&PeerNode],
) -> Result<EndorsedTransaction, ConsensusError> {
    let Some((first, rest)) = endorsers.split_first() else {
        return Err(ConsensusError::EndorsementMismatch(
            "empty endorser set".into(),
        ));
    };
    let mut tx = simulate_and_endorse(env, first, proposal)?;
    for peer in rest {
        let other = simulate_and_endorse(env, peer, proposal)?;
        if other.rwset != tx.rwset || other.response != tx.response {
            return Err(ConsensusError::EndorsementMismatch(format!(
                "{} and {} simulated {} differently",
                first.peer_id, peer.peer_id, proposal.tx_id
            )));
        }
        tx.endorsements.extend(other.endorsements);
    }
    Ok(tx)
}
