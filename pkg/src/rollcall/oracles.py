"""Simulated physical world: people, photographs, and ground-truth checks.

The protocol never inspects a photograph; it only passes opaque photo
tokens to five world queries:

* ``capture(subject, env)``     take a photo of a present subject
* ``live(photo, env)``          was this photo taken live in this environment
* ``match(photo_a, photo_b)``   same person in both photos
* ``eligible(photo, ed)``       does this person hold this eligibility record
* ``owns_uid(photo, uid)``      is this person the holder of this identifier

A photo token seals the subject identity under the world's secret key
(protocol code sees only pseudorandom bytes), carries its environment and
a fresh nonce in the clear, and is MAC'd so forged or spliced tokens fail
every query. By construction the queries are consistent: two captures of
one subject always match, captures of different subjects never match
(unless the twin violation mode is switched on to study that assumption),
and eligibility/identifier lookups agree with the fixture the world was
built from.

Every query is logged; tests assert, e.g., that an honest run performs no
captures of voters who never showed up, and the harness reads the adversary
bookkeeping (which dishonest subjects were photographed in which official
environment) straight from this log.
"""

from __future__ import annotations

import hashlib
import hmac
from dataclasses import dataclass, field

from .encoding import DecodeError, Decoder, encode
from .randomness import SeedStream

ENV_PRE_REGISTRATION = "env_pr"
ENV_REGISTRATION = "env_r"
ENV_PRE_CASTING = "env_pc"
ENV_CASTING = "env_c"
OFFICIAL_ENVS = (ENV_REGISTRATION, ENV_CASTING)
ALL_ENVS = (ENV_PRE_REGISTRATION, ENV_REGISTRATION, ENV_PRE_CASTING, ENV_CASTING)

_SUBJECT_WIDTH = 8
_MAC_WIDTH = 16
_NONCE_WIDTH = 16


class AccessViolation(PermissionError):
    """A capture request the world's access policy forbids."""


@dataclass(frozen=True)
class PhotoToken:
    """Opaque capability standing in for a photograph."""

    env: str
    nonce: bytes
    sealed_subject: bytes
    mac: bytes

    def to_bytes(self) -> bytes:
        return encode("photo/v1", self.env, self.nonce, self.sealed_subject, self.mac)

    @classmethod
    def from_bytes(cls, raw: bytes) -> "PhotoToken":
        dec = Decoder(raw)
        if dec.read_str() != "photo/v1":
            raise DecodeError("not a photo token")
        env = dec.read_str()
        nonce = dec.read_bytes()
        sealed = dec.read_bytes()
        mac = dec.read_bytes()
        dec.expect_end()
        return cls(env, nonce, sealed, mac)


@dataclass(frozen=True)
class WorldVoter:
    subject_id: int
    uid: str
    honest: bool
    eligibility: tuple  # eligibility records (bytes) this person holds


@dataclass
class OracleLog:
    entries: list = field(default_factory=list)

    def record(self, oracle: str, **info) -> None:
        self.entries.append({"oracle": oracle, **info})

    def count(self, oracle: str) -> int:
        return sum(1 for e in self.entries if e["oracle"] == oracle)

    def captures_of(self, subject_id: int) -> list:
        return [
            e
            for e in self.entries
            if e["oracle"] == "capture" and e.get("subject_id") == subject_id
        ]


def default_capture_policy(world: "World", subject: WorldVoter, env: str, actor: str):
    """Who may photograph whom, mirroring the threat model:

    protocol sessions photograph the person standing in front of them, in
    the session's own environment; an adversary can photograph anyone
    anywhere EXCEPT honest subjects inside official environments.
    """
    if actor == "session":
        return
    if subject.honest and env in OFFICIAL_ENVS:
        raise AccessViolation(
            f"adversary cannot capture honest subject in {env}"
        )


class World:
    """Ground truth of subjects plus the five oracle queries."""

    def __init__(
        self,
        subjects: list[WorldVoter],
        secret_key: bytes,
        capture_policy=default_capture_policy,
        twin_classes: dict | None = None,
    ):
        self.subjects = {s.subject_id: s for s in subjects}
        if len(self.subjects) != len(subjects):
            raise ValueError("duplicate subject ids")
        uids = [s.uid for s in subjects]
        if len(set(uids)) != len(uids):
            raise ValueError("world fixture violates identifier uniqueness")
        self._key = secret_key
        self._nonce_counter = 0
        self.log = OracleLog()
        self.capture_policy = capture_policy
        # Violation mode: map subject_id -> twin class. Subjects sharing a
        # class are visually indistinguishable. Empty = assumption holds.
        self.twin_classes = twin_classes or {}

    # -- token plumbing ----------------------------------------------------

    def _keystream(self, nonce: bytes) -> bytes:
        return hashlib.shake_256(encode("photo-seal/v1", self._key, nonce)).digest(
            _SUBJECT_WIDTH
        )

    def _mac(self, env: str, nonce: bytes, sealed: bytes) -> bytes:
        return hmac.new(
            self._key, encode("photo-mac/v1", env, nonce, sealed), hashlib.sha256
        ).digest()[:_MAC_WIDTH]

    def _seal(self, subject_id: int, env: str) -> PhotoToken:
        self._nonce_counter += 1
        nonce = hashlib.shake_256(
            encode("photo-nonce/v1", self._key, self._nonce_counter)
        ).digest(_NONCE_WIDTH)
        plain = subject_id.to_bytes(_SUBJECT_WIDTH, "big")
        sealed = bytes(a ^ b for a, b in zip(plain, self._keystream(nonce)))
        return PhotoToken(env, nonce, sealed, self._mac(env, nonce, sealed))

    def _unseal(self, photo: PhotoToken) -> WorldVoter | None:
        """Subject behind a token, or None if forged/damaged/unknown."""
        if not isinstance(photo, PhotoToken):
            return None
        if photo.env not in ALL_ENVS:
            return None
        if len(photo.sealed_subject) != _SUBJECT_WIDTH:
            return None
        expected = self._mac(photo.env, photo.nonce, photo.sealed_subject)
        if not hmac.compare_digest(expected, photo.mac):
            return None
        plain = bytes(
            a ^ b
            for a, b in zip(photo.sealed_subject, self._keystream(photo.nonce))
        )
        return self.subjects.get(int.from_bytes(plain, "big"))

    def _visual_identity(self, subject: WorldVoter):
        return self.twin_classes.get(subject.subject_id, ("solo", subject.subject_id))

    # -- the five queries ---------------------------------------------------

    def capture(self, subject_id: int, env: str, actor: str = "session") -> PhotoToken:
        if env not in ALL_ENVS:
            raise ValueError(f"unknown environment {env!r}")
        subject = self.subjects.get(subject_id)
        if subject is None:
            raise ValueError(f"no subject {subject_id}")
        self.capture_policy(self, subject, env, actor)
        self.log.record("capture", subject_id=subject_id, env=env, actor=actor)
        return self._seal(subject_id, env)

    def live(self, photo: PhotoToken, env: str) -> int:
        subject = self._unseal(photo)
        ok = subject is not None and photo.env == env
        self.log.record("live", env=env, result=int(ok))
        return int(ok)

    def match(self, photo_a: PhotoToken, photo_b: PhotoToken) -> int:
        sa = self._unseal(photo_a)
        sb = self._unseal(photo_b)
        ok = (
            sa is not None
            and sb is not None
            and self._visual_identity(sa) == self._visual_identity(sb)
        )
        self.log.record("match", result=int(ok))
        return int(ok)

    def eligible(self, photo: PhotoToken, ed: bytes) -> int:
        subject = self._unseal(photo)
        ok = subject is not None and bytes(ed) in subject.eligibility
        self.log.record("eligible", result=int(ok))
        return int(ok)

    def owns_uid(self, photo: PhotoToken, uid: str) -> int:
        subject = self._unseal(photo)
        ok = subject is not None and subject.uid == uid
        self.log.record("owns_uid", uid=uid, result=int(ok))
        return int(ok)

    # -- adversary bookkeeping ----------------------------------------------

    def official_captures_of_dishonest(self, env: str) -> set:
        """Dishonest subjects the adversary photographed in an official env."""
        out = set()
        for entry in self.log.entries:
            if (
                entry["oracle"] == "capture"
                and entry["env"] == env
                and entry["actor"] == "adversary"
            ):
                subject = self.subjects[entry["subject_id"]]
                if not subject.honest:
                    out.add(subject.subject_id)
        return out


def make_world(
    seed,
    n_honest: int,
    n_dishonest: int = 0,
    n_ineligible: int = 0,
    eligibility_domain: str = "ward-A",
    capture_policy=default_capture_policy,
    twin_pairs: int = 0,
) -> World:
    """Deterministic world fixture.

    ``n_ineligible`` of the honest subjects hold no eligibility record;
    ``twin_pairs`` > 0 enables the identical-twin violation mode for the
    first so-many honest pairs (for tests probing that assumption).
    """
    stream = SeedStream.from_seed(seed, "world-fixture")
    subjects = []
    total = n_honest + n_dishonest
    uid_tags = stream.child("uids")
    used = set()
    for idx in range(total):
        while True:
            tag = int.from_bytes(uid_tags.take(6), "big") % 10**9
            if tag not in used:
                used.add(tag)
                break
        honest = idx < n_honest
        ineligible = honest and idx >= n_honest - n_ineligible
        ed = encode("ed/v1", eligibility_domain, idx)
        subjects.append(
            WorldVoter(
                subject_id=idx + 1,
                uid=f"uid-{tag:09d}",
                honest=honest,
                eligibility=() if ineligible else (ed,),
            )
        )
    twin_classes = {}
    for pair in range(twin_pairs):
        a, b = subjects[2 * pair], subjects[2 * pair + 1]
        twin_classes[a.subject_id] = ("twin", pair)
        twin_classes[b.subject_id] = ("twin", pair)
    return World(
        subjects,
        secret_key=stream.child("world-key").take(32),
        capture_policy=capture_policy,
        twin_classes=twin_classes,
    )
