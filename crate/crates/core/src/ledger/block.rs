use serde::{Deserialize, Serialize};

use super::{ReadWriteSet, ValidationCode};
use crate::crypto::{self, hash, Digest, IdentityKeys, Signature, VerifyKey};
use crate::encoding::{self, from_canonical, hex_bytes, to_canonical, DecodeError};
use crate::membership::ChannelConfig;

/// A client's signed request to invoke a chaincode function.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct TransactionProposal {
    pub tx_id: String,
    pub channel_id: String,
    pub chaincode_name: String,
    pub function: String,
    pub args: Vec<String>,
    pub creator: String,
    pub nonce: u64,
    pub timestamp: u64,
    pub client_signature: Signature,
}

#[derive(Serialize)]
struct ProposalPayload<'a> {
    channel_id: &'a str,
    chaincode_name: &'a str,
    function: &'a str,
    args: &'a [String],
    timestamp: u64,
}

#[derive(Serialize)]
struct TxIdPreimage<'a> {
    creator: &'a str,
    nonce: u64,
    payload: ProposalPayload<'a>,
}

#[derive(Serialize)]
struct SignedProposalBody<'a> {
    tx_id: &'a str,
    creator: &'a str,
    nonce: u64,
    payload: ProposalPayload<'a>,
}

impl TransactionProposal {
    #[allow(clippy::too_many_arguments)]
    pub fn signed(
        creator: &IdentityKeys,
        channel_id: &str,
        chaincode_name: &str,
        function: &str,
        args: Vec<String>,
        nonce: u64,
        timestamp: u64,
    ) -> Self {
        let mut p = TransactionProposal {
            tx_id: String::new(),
            channel_id: channel_id.to_owned(),
            chaincode_name: chaincode_name.to_owned(),
            function: function.to_owned(),
            args,
            creator: creator.identity_id.clone(),
            nonce,
            timestamp,
            client_signature: Signature::from_bytes(Vec::new()),
        };
        p.tx_id = p.compute_tx_id();
        p.client_signature = crypto::sign(&creator.signing_key, &p.signing_bytes());
        p
    }

    fn payload(&self) -> ProposalPayload<'_> {
        ProposalPayload {
            channel_id: &self.channel_id,
            chaincode_name: &self.chaincode_name,
            function: &self.function,
            args: &self.args,
            timestamp: self.timestamp,
        }
    }

    /// hex(hash(creator, nonce, payload)).
    pub fn compute_tx_id(&self) -> String {
        let pre = TxIdPreimage {
            creator: &self.creator,
            nonce: self.nonce,
            payload: self.payload(),
        };
        hash(&to_canonical(&pre).expect("proposal fields are encodable")).to_hex()
    }

    pub fn signing_bytes(&self) -> Vec<u8> {
        let body = SignedProposalBody {
            tx_id: &self.tx_id,
            creator: &self.creator,
            nonce: self.nonce,
            payload: self.payload(),
        };
        to_canonical(&body).expect("proposal fields are encodable")
    }

    pub fn verify_signature(&self, creator_key: &VerifyKey) -> bool {
        self.tx_id == self.compute_tx_id()
            && crypto::verify(creator_key, &self.signing_bytes(), &self.client_signature)
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Endorsement {
    pub endorser_id: String,
    pub org_id: String,
    pub signature: Signature,
}

/// Bytes an endorser signs: the proposal together with its simulated result.
pub fn endorsement_payload(
    proposal: &TransactionProposal,
    rwset: &ReadWriteSet,
    response: &[u8],
) -> Vec<u8> {
    #[derive(Serialize)]
    struct Payload<'a> {
        proposal: &'a TransactionProposal,
        rwset: &'a ReadWriteSet,
        response: String,
    }
    to_canonical(&Payload {
        proposal,
        rwset,
        response: hex::encode(response),
    })
    .expect("endorsement payload is encodable")
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct EndorsedTransaction {
    pub proposal: TransactionProposal,
    pub rwset: ReadWriteSet,
    #[serde(with = "hex_bytes")]
    pub response: Vec<u8>,
    pub endorsements: Vec<Endorsement>,
}

impl EndorsedTransaction {
    pub fn payload(&self) -> Vec<u8> {
        endorsement_payload(&self.proposal, &self.rwset, &self.response)
    }
}

/// What a block carries: channel configuration (genesis only) or endorsed
/// transactions.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case")]
#[allow(clippy::large_enum_variant)]
pub enum Envelope {
    Config(ChannelConfig),
    Transaction(EndorsedTransaction),
}

impl Envelope {
    pub fn encode(&self) -> Vec<u8> {
        to_canonical(self).expect("envelopes are encodable")
    }

    pub fn decode(bytes: &[u8]) -> Result<Self, DecodeError> {
        from_canonical(bytes)
    }

    pub fn as_transaction(&self) -> Option<&EndorsedTransaction> {
        match self {
            Envelope::Transaction(tx) => Some(tx),
            Envelope::Config(_) => None,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct BlockHeader {
    pub number: u64,
    pub prev_hash: Digest,
    pub data_hash: Digest,
}

impl BlockHeader {
    /// Fixed-width encoding: number (u64 BE), prev_hash, data_hash. Any
    /// bit pattern is representable, tampered ones included.
    pub fn to_bytes(&self) -> [u8; HEADER_IMAGE_LEN] {
        let mut out = [0u8; HEADER_IMAGE_LEN];
        out[..8].copy_from_slice(&self.number.to_be_bytes());
        out[8..40].copy_from_slice(self.prev_hash.as_bytes());
        out[40..].copy_from_slice(self.data_hash.as_bytes());
        out
    }

    pub fn hash(&self) -> Digest {
        hash(&self.to_bytes())
    }
}

/// Length of the fixed header prefix of [`Block::image`].
pub const HEADER_IMAGE_LEN: usize = 8 + 32 + 32;

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Block {
    pub header: BlockHeader,
    /// Canonically encoded [`Envelope`]s, in block order.
    #[serde(with = "hex_bytes::list")]
    pub envelopes: Vec<Vec<u8>>,
    /// Filled in by validation; `None` until then.
    pub validity_flags: Option<Vec<ValidationCode>>,
}

impl Block {
    pub fn new(number: u64, prev_hash: Digest, envelopes: Vec<Vec<u8>>) -> Self {
        Block {
            header: BlockHeader {
                number,
                prev_hash,
                data_hash: Self::compute_data_hash(&envelopes),
            },
            envelopes,
            validity_flags: None,
        }
    }

    /// Genesis block carrying the channel configuration; always VALID.
    pub fn genesis(config: &ChannelConfig) -> Self {
        let mut b = Block::new(0, Digest::ZERO, vec![Envelope::Config(config.clone()).encode()]);
        b.validity_flags = Some(vec![ValidationCode::Valid]);
        b
    }

    /// hash(canonical_encode(transactions)).
    pub fn compute_data_hash(envelopes: &[Vec<u8>]) -> Digest {
        hash(&encoding::frame_encoded_list(envelopes))
    }

    pub fn decode_envelope(&self, index: usize) -> Result<Envelope, DecodeError> {
        Envelope::decode(&self.envelopes[index])
    }

    pub fn transactions(&self) -> Result<Vec<EndorsedTransaction>, DecodeError> {
        let mut out = Vec::new();
        for raw in &self.envelopes {
            if let Envelope::Transaction(tx) = Envelope::decode(raw)? {
                out.push(tx);
            }
        }
        Ok(out)
    }

    /// The tamperable byte image: number (u64 BE), prev_hash, data_hash,
    /// then every envelope back to back.
    pub fn image(&self) -> Vec<u8> {
        let mut out = Vec::with_capacity(self.image_len());
        out.extend_from_slice(&self.header.to_bytes());
        for e in &self.envelopes {
            out.extend_from_slice(e);
        }
        out
    }

    pub fn image_len(&self) -> usize {
        HEADER_IMAGE_LEN + self.envelopes.iter().map(Vec::len).sum::<usize>()
    }

    /// Hash of the full image; unlike the header hash it changes when
    /// payload bytes are altered without fixing up data_hash.
    pub fn fingerprint(&self) -> Digest {
        hash(&self.image())
    }

    /// XOR one byte of the image with `mask`. Returns false if `offset` is
    /// out of range.
    pub(crate) fn xor_image_byte(&mut self, offset: usize, mask: u8) -> bool {
        if offset < 8 {
            let mut n = self.header.number.to_be_bytes();
            n[offset] ^= mask;
            self.header.number = u64::from_be_bytes(n);
            return true;
        }
        if offset < 40 {
            let mut d = *self.header.prev_hash.as_bytes();
            d[offset - 8] ^= mask;
            self.header.prev_hash = Digest::from_bytes(d);
            return true;
        }
        if offset < HEADER_IMAGE_LEN {
            let mut d = *self.header.data_hash.as_bytes();
            d[offset - 40] ^= mask;
            self.header.data_hash = Digest::from_bytes(d);
            return true;
        }
        let mut rest = offset - HEADER_IMAGE_LEN;
        for e in &mut self.envelopes {
            if rest < e.len() {
                e[rest] ^= mask;
                return true;
            }
            rest -= e.len();
        }
        false
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::crypto::generate_identity;

    #[test]
    fn proposal_signature_and_tx_id() {
        let keys = generate_identity(&[3u8; 32]).unwrap();
        let other = generate_identity(&[4u8; 32]).unwrap();
        let p = TransactionProposal::signed(&keys, "ch", "cc", "f", vec!["a".into()], 1, 0);
        assert_eq!(p.tx_id, p.compute_tx_id());
        assert!(p.verify_signature(&keys.verify_key));
        assert!(!p.verify_signature(&other.verify_key));

        let mut tampered = p.clone();
        tampered.args[0] = "b".into();
        assert!(!tampered.verify_signature(&keys.verify_key));

        let q = TransactionProposal::signed(&keys, "ch", "cc", "f", vec!["a".into()], 2, 0);
        assert_ne!(p.tx_id, q.tx_id);
    }

    #[test]
    fn image_flip_round_trips() {
        let mut b = Block::new(4, Digest::ZERO, vec![vec![1, 2, 3], vec![4]]);
        let original = b.clone();
        assert_eq!(b.image_len(), HEADER_IMAGE_LEN + 4);
        for off in [0, 7, 8, 39, 40, 71, 72, 75] {
            assert!(b.xor_image_byte(off, 0xff));
            assert_ne!(b, original);
            assert_ne!(b.fingerprint(), original.fingerprint());
            assert!(b.xor_image_byte(off, 0xff));
            assert_eq!(b, original);
        }
        assert!(!b.xor_image_byte(76, 0xff));
    }
}
