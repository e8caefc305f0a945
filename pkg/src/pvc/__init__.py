"""Primitive vector cipher: vector Diffie-Hellman key agreement with STS
authentication, masked 3x3 matrix block encryption and per-column keystream
offsets, plus analysis tooling."""

from .cipher import Ciphertext, Header, decrypt, deserialize, encrypt, serialize
from .codec import SsmIndexPlan, plan_indices
from .errors import PVCError
from .field import FieldCtx
from .kdfstream import DerivedKeys, derive_keys
from .keyexchange import (
    EphemeralKeypair, HmacSigner, Initiator, PrimitiveVector, Responder, SharedVector,
    derive_shared, generate_ephemeral, sts_handshake,
)
from .matrixcore import KeyMatrices, build_key_matrices

__version__ = "0.1.0"

__all__ = [
    "Ciphertext", "DerivedKeys", "EphemeralKeypair", "FieldCtx", "Header", "HmacSigner",
    "Initiator", "KeyMatrices", "PVCError", "PrimitiveVector", "Responder", "SharedVector",
    "SsmIndexPlan", "build_key_matrices", "decrypt", "derive_keys", "derive_shared",
    "deserialize", "encrypt", "generate_ephemeral", "plan_indices", "serialize", "sts_handshake",
]
