"""Publicly auditable, privacy-preserving electoral roll, desk scale.

The pieces: a bulletin board with a payload registry and decode ledger,
threshold ElGamal with verifiable decryption, a proved re-encryption mix,
four-quadrant registration receipts with cut-and-choose audits, sampled
universal audits, closed-form risk bounds, and an adversarial harness that
checks the empirical detection rates against those bounds.
"""

from .board import (
    AuthRecord,
    Board,
    PayloadRegistry,
    auth_records,
    decoded_rows,
    select_h_alpha,
)
from .audits import (
    AuditReport,
    Disclosure,
    UnivReport,
    ind_cast_audit,
    ind_reg_audit,
    univ_audit,
)
from .elgamal import (
    Ciphertext,
    JointPublicKey,
    KeyShare,
    batch_verify_decryption,
    encrypt,
    keygen,
    reencrypt,
    threshold_decrypt,
    verify_decryption,
)
from .group import PrimeOrderGroup, get_group
from .harness import (
    TrialReport,
    privacy_accounting,
    run_phantom_trials,
    run_receipt_forgery_draws,
    run_shuffle_tampers,
)
from .oracles import World, WorldVoter, make_world
from .protocol import (
    CastAccept,
    CastDupCast,
    CastIneligible,
    CastUnknownVid,
    CastWrongPerson,
    Election,
    ElectionConfig,
    RegAccept,
    RegDupReg,
    RegReject,
    accept_receipt_sizes,
    check_accept_receipt,
    receipt_from_bytes,
)
from .randomness import SeedStream
from .risk import delta, epsilon, hyp, plan
from .shuffle import shuffle_step, verify_shuffle

__version__ = "0.1.0"

__all__ = [
    "AuditReport",
    "AuthRecord",
    "Board",
    "CastAccept",
    "CastDupCast",
    "CastIneligible",
    "CastUnknownVid",
    "CastWrongPerson",
    "Ciphertext",
    "Disclosure",
    "Election",
    "ElectionConfig",
    "JointPublicKey",
    "KeyShare",
    "PayloadRegistry",
    "PrimeOrderGroup",
    "RegAccept",
    "RegDupReg",
    "RegReject",
    "SeedStream",
    "TrialReport",
    "UnivReport",
    "World",
    "WorldVoter",
    "accept_receipt_sizes",
    "auth_records",
    "batch_verify_decryption",
    "check_accept_receipt",
    "decoded_rows",
    "delta",
    "encrypt",
    "epsilon",
    "get_group",
    "hyp",
    "ind_cast_audit",
    "ind_reg_audit",
    "keygen",
    "make_world",
    "plan",
    "privacy_accounting",
    "receipt_from_bytes",
    "reencrypt",
    "run_phantom_trials",
    "run_receipt_forgery_draws",
    "run_shuffle_tampers",
    "select_h_alpha",
    "shuffle_step",
    "threshold_decrypt",
    "univ_audit",
    "verify_decryption",
    "verify_shuffle",
]
