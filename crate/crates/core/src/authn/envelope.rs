//! Encrypt-then-MAC sample envelopes.
//!
//! The keystream is SHA-256 in counter mode and the tag is HMAC-SHA256 over
//! sender, sequence number and ciphertext. Cryptographic strength is not
//! the point; the point is that any bit flip in payload or tag fails
//! verification, and that sender and sequence number are bound to the tag.

use hmac::{KeyInit, Mac};
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::fixed::Fixed4;
use crate::ids::DeviceId;
use crate::trust::Modality;

type HmacSha256 = hmac::Hmac<Sha256>;

pub const TAG_LEN: usize = 32;

#[derive(Clone, PartialEq, Eq, Hash)]
pub struct DeviceKey([u8; 32]);

impl DeviceKey {
    pub fn from_bytes(bytes: [u8; 32]) -> Self {
        DeviceKey(bytes)
    }

    /// Deterministic per-device key from a provisioning seed.
    pub fn derive(seed: u64, device: &DeviceId) -> Self {
        let mut h = Sha256::new();
        h.update(b"healthnet/device-key/v1");
        h.update(seed.to_be_bytes());
        h.update(device.as_str().as_bytes());
        DeviceKey(h.finalize().into())
    }

    fn mac(&self) -> HmacSha256 {
        <HmacSha256 as KeyInit>::new_from_slice(&self.0).expect("hmac accepts any key length")
    }

    fn keystream_block(&self, sender: &DeviceId, sequence_no: u64, counter: u64) -> [u8; 32] {
        let mut h = Sha256::new();
        h.update(b"healthnet/keystream/v1");
        h.update(self.0);
        h.update((sender.as_str().len() as u32).to_be_bytes());
        h.update(sender.as_str().as_bytes());
        h.update(sequence_no.to_be_bytes());
        h.update(counter.to_be_bytes());
        h.finalize().into()
    }

    fn apply_keystream(&self, sender: &DeviceId, sequence_no: u64, data: &mut [u8]) {
        for (counter, chunk) in data.chunks_mut(32).enumerate() {
            let block = self.keystream_block(sender, sequence_no, counter as u64);
            for (b, k) in chunk.iter_mut().zip(block) {
                *b ^= k;
            }
        }
    }
}

impl std::fmt::Debug for DeviceKey {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str("DeviceKey(..)")
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct EncryptedEnvelope {
    pub payload: Vec<u8>,
    pub auth_tag: Vec<u8>,
    pub sender_device_id: DeviceId,
    pub sequence_no: u64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, thiserror::Error)]
pub enum EnvelopeError {
    #[error("authentication tag mismatch")]
    BadTag,
    #[error("payload does not decode as a sample")]
    Malformed,
}

impl EncryptedEnvelope {
    pub fn seal(key: &DeviceKey, sender: DeviceId, sequence_no: u64, plaintext: &[u8]) -> Self {
        let mut payload = plaintext.to_vec();
        key.apply_keystream(&sender, sequence_no, &mut payload);
        let auth_tag = tag(key, &sender, sequence_no, &payload);
        EncryptedEnvelope { payload, auth_tag, sender_device_id: sender, sequence_no }
    }

    pub fn verify(&self, key: &DeviceKey) -> Result<(), EnvelopeError> {
        let mut mac = key.mac();
        feed(&mut mac, &self.sender_device_id, self.sequence_no, &self.payload);
        mac.verify_slice(&self.auth_tag).map_err(|_| EnvelopeError::BadTag)
    }

    /// Verifies, then decrypts.
    pub fn open(&self, key: &DeviceKey) -> Result<Vec<u8>, EnvelopeError> {
        self.verify(key)?;
        let mut plain = self.payload.clone();
        key.apply_keystream(&self.sender_device_id, self.sequence_no, &mut plain);
        Ok(plain)
    }

    /// Total bits across payload and tag, the mutation surface.
    pub fn bit_len(&self) -> usize {
        (self.payload.len() + self.auth_tag.len()) * 8
    }

    /// Copy with one bit of payload-then-tag flipped.
    pub fn with_bit_flipped(&self, bit: usize) -> Self {
        let mut out = self.clone();
        let byte = bit / 8;
        let mask = 1u8 << (bit % 8);
        if byte < out.payload.len() {
            out.payload[byte] ^= mask;
        } else {
            out.auth_tag[byte - out.payload.len()] ^= mask;
        }
        out
    }
}

fn feed(mac: &mut HmacSha256, sender: &DeviceId, sequence_no: u64, payload: &[u8]) {
    mac.update(&(sender.as_str().len() as u32).to_be_bytes());
    mac.update(sender.as_str().as_bytes());
    mac.update(&sequence_no.to_be_bytes());
    mac.update(payload);
}

fn tag(key: &DeviceKey, sender: &DeviceId, sequence_no: u64, payload: &[u8]) -> Vec<u8> {
    let mut mac = key.mac();
    feed(&mut mac, sender, sequence_no, payload);
    mac.finalize().into_bytes().to_vec()
}

/// Plaintext carried inside an envelope: one score per modality.
///
/// Wire layout: `count: u8`, then `count` times `(modality code: u8,
/// scaled score: u16 big-endian)`.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SamplePayload {
    pub scores: Vec<(Modality, Fixed4)>,
}

impl SamplePayload {
    pub fn encode(&self) -> Vec<u8> {
        assert!(self.scores.len() <= u8::MAX as usize, "too many modalities in one sample");
        let mut out = Vec::with_capacity(1 + 3 * self.scores.len());
        out.push(self.scores.len() as u8);
        for (m, v) in &self.scores {
            out.push(m.code());
            out.extend_from_slice(&v.scaled().to_be_bytes());
        }
        out
    }

    pub fn decode(bytes: &[u8]) -> Result<Self, EnvelopeError> {
        let (&count, rest) = bytes.split_first().ok_or(EnvelopeError::Malformed)?;
        if rest.len() != 3 * count as usize {
            return Err(EnvelopeError::Malformed);
        }
        let scores = rest
            .chunks_exact(3)
            .map(|c| {
                let m = Modality::from_code(c[0]).ok_or(EnvelopeError::Malformed)?;
                let v = Fixed4::from_scaled(u16::from_be_bytes([c[1], c[2]]) as u32)
                    .map_err(|_| EnvelopeError::Malformed)?;
                Ok((m, v))
            })
            .collect::<Result<_, _>>()?;
        Ok(SamplePayload { scores })
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn sample() -> SamplePayload {
        SamplePayload {
            scores: vec![(Modality::Face, Fixed4::lit(8000)), (Modality::Keystroke, Fixed4::lit(9000))],
        }
    }

    #[test]
    fn seal_open() {
        let key = DeviceKey::derive(1, &"d1".into());
        let env = EncryptedEnvelope::seal(&key, "d1".into(), 5, &sample().encode());
        assert_ne!(env.payload, sample().encode());
        assert_eq!(env.auth_tag.len(), TAG_LEN);
        let plain = env.open(&key).unwrap();
        assert_eq!(SamplePayload::decode(&plain).unwrap(), sample());
    }

    #[test]
    fn header_is_bound_to_tag() {
        let key = DeviceKey::derive(1, &"d1".into());
        let env = EncryptedEnvelope::seal(&key, "d1".into(), 5, &sample().encode());
        let mut renumbered = env.clone();
        renumbered.sequence_no = 6;
        assert_eq!(renumbered.verify(&key), Err(EnvelopeError::BadTag));
        let mut resent = env.clone();
        resent.sender_device_id = "d2".into();
        assert_eq!(resent.verify(&key), Err(EnvelopeError::BadTag));
        assert_eq!(env.verify(&DeviceKey::derive(2, &"d1".into())), Err(EnvelopeError::BadTag));
    }

    #[test]
    fn truncated_tag_fails() {
        let key = DeviceKey::derive(1, &"d1".into());
        let mut env = EncryptedEnvelope::seal(&key, "d1".into(), 5, &sample().encode());
        env.auth_tag.pop();
        assert_eq!(env.verify(&key), Err(EnvelopeError::BadTag));
    }

    #[test]
    fn payload_decode_errors() {
        assert!(SamplePayload::decode(&[]).is_err());
        assert!(SamplePayload::decode(&[1, 3, 0]).is_err());
        assert!(SamplePayload::decode(&[1, 99, 0, 1]).is_err());
        assert!(SamplePayload::decode(&[1, 3, 0xff, 0xff]).is_err());
        assert_eq!(SamplePayload::decode(&[0]).unwrap().scores, vec![]);
    }

    proptest! {
        #[test]
        fn any_single_bit_flip_is_rejected(seq in any::<u64>(), seed in any::<u64>(), bit in any::<prop::sample::Index>()) {
            let key = DeviceKey::derive(seed, &"dev".into());
            let env = EncryptedEnvelope::seal(&key, "dev".into(), seq, &sample().encode());
            let flipped = env.with_bit_flipped(bit.index(env.bit_len()));
            prop_assert_eq!(flipped.verify(&key), Err(EnvelopeError::BadTag));
        }

        #[test]
        fn payload_codec_roundtrip(raw in prop::collection::vec((0usize..5, 0u32..=10_000), 0..8)) {
            let p = SamplePayload {
                scores: raw.into_iter().map(|(m, v)| (Modality::ALL[m], Fixed4::from_scaled(v).unwrap())).collect(),
            };
            prop_assert_eq!(SamplePayload::decode(&p.encode()).unwrap(), p);
        }
    }
}
