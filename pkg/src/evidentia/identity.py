"""Principals, roles, credential checks, and signed role tokens.

Tokens use the standard three-part compact serialization
``base64url(header).base64url(claims).base64url(mac)`` with HMAC-SHA256
and key-sorted JSON objects, so a given (key, claims) pair always
serializes to the same bytes. Passwords are stored as salted PBKDF2-SHA256
digests; adequate for a desk-scale deployment and replaceable.

Analyst and authority principals are bound to deterministic chain
addresses (sha256 of the principal id, truncated to 20 bytes) and receive
the matching on-chain role at provisioning time. Admin principals are
bound the same way so any admin can issue on-chain grants, not just the
genesis account. Normal users have no chain presence.
"""

from __future__ import annotations

import base64
import hashlib
import hmac
import json
import os
import threading
import time
from dataclasses import dataclass, replace
from enum import Enum
from typing import Callable

from .chain import ChainAddress, ChainRole, EvidenceChain
from .errors import (
    AccountDisabled,
    DuplicateName,
    Expired,
    Forbidden,
    InvalidArgument,
    InvalidCredentials,
    InvalidSignature,
    NotFound,
)

TOKEN_KEY_ENV = "EVIDENTIA_TOKEN_KEY"
DEFAULT_TTL_S = 3600
PBKDF2_ITERATIONS = 10_000
SALT_BYTES = 16


class PrincipalRole(Enum):
    FORENSIC_ANALYST = "FORENSIC_ANALYST"
    LEGAL_AUTHORITY = "LEGAL_AUTHORITY"
    ADMIN = "ADMIN"
    NORMAL_USER = "NORMAL_USER"


# Chain-facing roles per principal role; NORMAL_USER has no chain presence.
CHAIN_ROLE_FOR = {
    PrincipalRole.FORENSIC_ANALYST: ChainRole.ANALYST_ROLE,
    PrincipalRole.LEGAL_AUTHORITY: ChainRole.AUTHORITY_ROLE,
    PrincipalRole.ADMIN: ChainRole.ADMIN_ROLE,
}


@dataclass(frozen=True)
class Principal:
    id: str
    display_name: str
    role: PrincipalRole
    credential_hash: bytes
    salt: bytes
    chain_address: ChainAddress | None = None
    enabled: bool = True


def hash_password(password: str, salt: bytes) -> bytes:
    return hashlib.pbkdf2_hmac(
        "sha256", password.encode("utf-8"), salt, PBKDF2_ITERATIONS
    )


def _b64url(data: bytes) -> str:
    return base64.urlsafe_b64encode(data).rstrip(b"=").decode("ascii")


def _b64url_decode(text: str) -> bytes:
    padded = text + "=" * (-len(text) % 4)
    try:
        return base64.urlsafe_b64decode(padded.encode("ascii"))
    except (ValueError, UnicodeEncodeError) as exc:
        raise InvalidSignature("token segment is not base64url") from exc


def _canonical_json(obj: dict) -> bytes:
    return json.dumps(obj, sort_keys=True, separators=(",", ":")).encode("utf-8")


TOKEN_HEADER = {"alg": "HS256", "typ": "JWT"}


def issue_token(key: bytes, subject: str, role: PrincipalRole, issued_at: int,
                ttl_s: int = DEFAULT_TTL_S) -> str:
    if ttl_s <= 0:
        raise InvalidArgument("token ttl must be positive")
    claims = {
        "sub": subject,
        "role": role.value,
        "iat": issued_at,
        "exp": issued_at + ttl_s,
    }
    signing_input = _b64url(_canonical_json(TOKEN_HEADER)) + "." + _b64url(_canonical_json(claims))
    mac = hmac.new(key, signing_input.encode("ascii"), hashlib.sha256).digest()
    return signing_input + "." + _b64url(mac)


def decode_token(key: bytes, token: str, now: int) -> dict:
    """Check signature then expiry; returns the claims object."""
    parts = token.split(".")
    if len(parts) != 3:
        raise InvalidSignature("token must have three segments")
    signing_input = parts[0] + "." + parts[1]
    expected = hmac.new(key, signing_input.encode("ascii"), hashlib.sha256).digest()
    if not hmac.compare_digest(expected, _b64url_decode(parts[2])):
        raise InvalidSignature("token mac does not verify")
    try:
        header = json.loads(_b64url_decode(parts[0]))
        claims = json.loads(_b64url_decode(parts[1]))
    except (ValueError, UnicodeDecodeError) as exc:
        raise InvalidSignature("token segments are not valid json") from exc
    if header.get("alg") != "HS256":
        raise InvalidSignature(f"unsupported alg {header.get('alg')!r}")
    for field in ("sub", "role", "iat", "exp"):
        if field not in claims:
            raise InvalidSignature(f"claims missing {field!r}")
    if now >= claims["exp"]:
        raise Expired(f"token expired at {claims['exp']}, now {now}")
    return claims


class IdentityDirectory:
    """Principal table plus token issuance, bound to one evidence chain."""

    def __init__(
        self,
        chain: EvidenceChain,
        token_key: bytes | None = None,
        ttl_s: int = DEFAULT_TTL_S,
        clock: Callable[[], int] | None = None,
    ):
        if token_key is None:
            env = os.environ.get(TOKEN_KEY_ENV)
            token_key = env.encode("utf-8") if env else os.urandom(32)
        if len(token_key) < 16:
            raise InvalidArgument("token key must be at least 16 bytes")
        self._chain = chain
        self._key = token_key
        self._ttl_s = ttl_s
        self._clock = clock or (lambda: int(time.time()))
        self._lock = threading.RLock()
        self._principals: dict[str, Principal] = {}

    # --- bootstrap and provisioning --------------------------------------

    def bootstrap_admin(self, username: str, password: str,
                        display_name: str | None = None) -> Principal:
        """Create the first admin, bound to the chain's genesis account."""
        with self._lock:
            if any(p.role == PrincipalRole.ADMIN for p in self._principals.values()):
                raise Forbidden("an admin already exists; use provision_principal")
            if username in self._principals:
                raise DuplicateName(f"principal {username!r} already exists")
            salt = os.urandom(SALT_BYTES)
            principal = Principal(
                id=username,
                display_name=display_name or username,
                role=PrincipalRole.ADMIN,
                credential_hash=hash_password(password, salt),
                salt=salt,
                chain_address=self._chain.genesis_admin,
            )
            self._principals[username] = principal
            return principal

    def provision_principal(
        self,
        admin: Principal,
        username: str,
        role: PrincipalRole,
        password: str,
        display_name: str | None = None,
    ) -> Principal:
        if admin.role != PrincipalRole.ADMIN:
            raise Forbidden(f"{admin.id} is not an admin")
        if not isinstance(role, PrincipalRole):
            raise InvalidArgument(f"bad role {role!r}")
        with self._lock:
            current = self._principals.get(admin.id)
            if current is None or not current.enabled:
                raise Forbidden(f"{admin.id} is not an active principal")
            if username in self._principals:
                raise DuplicateName(f"principal {username!r} already exists")
            salt = os.urandom(SALT_BYTES)
            chain_address = None
            chain_role = CHAIN_ROLE_FOR.get(role)
            if chain_role is not None:
                chain_address = ChainAddress.derive(username)
                self._chain.grant_role(current.chain_address, chain_address, chain_role)
            principal = Principal(
                id=username,
                display_name=display_name or username,
                role=role,
                credential_hash=hash_password(password, salt),
                salt=salt,
                chain_address=chain_address,
            )
            self._principals[username] = principal
            return principal

    def set_enabled(self, admin: Principal, username: str, enabled: bool) -> Principal:
        if admin.role != PrincipalRole.ADMIN:
            raise Forbidden(f"{admin.id} is not an admin")
        with self._lock:
            principal = self._principals.get(username)
            if principal is None:
                raise NotFound(f"no principal {username!r}")
            principal = replace(principal, enabled=enabled)
            self._principals[username] = principal
            return principal

    # --- authentication ---------------------------------------------------

    def authenticate(self, username: str, password: str) -> str:
        with self._lock:
            principal = self._principals.get(username)
        if principal is None:
            raise InvalidCredentials("unknown principal or bad password")
        if not hmac.compare_digest(principal.credential_hash,
                                   hash_password(password, principal.salt)):
            raise InvalidCredentials("unknown principal or bad password")
        if not principal.enabled:
            raise AccountDisabled(f"{username} is disabled")
        return issue_token(self._key, username, principal.role, self._clock(), self._ttl_s)

    def verify_token(self, token: str, required_roles: set[PrincipalRole]) -> Principal:
        claims = decode_token(self._key, token, self._clock())
        with self._lock:
            principal = self._principals.get(claims["sub"])
        if principal is None:
            raise InvalidSignature(f"token subject {claims['sub']!r} does not exist")
        if not principal.enabled:
            raise AccountDisabled(f"{principal.id} is disabled")
        if claims["role"] != principal.role.value:
            # stale token from before a role change; reject conservatively
            raise InvalidSignature("token role does not match principal")
        if principal.role not in required_roles:
            raise Forbidden(
                f"{principal.role.value} not in "
                f"{{{', '.join(sorted(r.value for r in required_roles))}}}"
            )
        return principal

    def get_principal(self, username: str) -> Principal:
        with self._lock:
            principal = self._principals.get(username)
        if principal is None:
            raise NotFound(f"no principal {username!r}")
        return principal

    def list_principals(self) -> list[Principal]:
        with self._lock:
            return [self._principals[name] for name in sorted(self._principals)]

    # --- persistence for the operator CLI ----------------------------------

    def export_principals(self) -> list[dict]:
        rows = []
        for principal in self.list_principals():
            rows.append({
                "id": principal.id,
                "display_name": principal.display_name,
                "role": principal.role.value,
                "credential_hash": principal.credential_hash.hex(),
                "salt": principal.salt.hex(),
                "chain_address": principal.chain_address.hex if principal.chain_address else None,
                "enabled": principal.enabled,
            })
        return rows

    def import_principals(self, rows: list[dict]):
        """Load a previously exported table; does not re-grant chain roles
        (the chain log carries those grants and replays them itself)."""
        with self._lock:
            for row in rows:
                self._principals[row["id"]] = Principal(
                    id=row["id"],
                    display_name=row["display_name"],
                    role=PrincipalRole(row["role"]),
                    credential_hash=bytes.fromhex(row["credential_hash"]),
                    salt=bytes.fromhex(row["salt"]),
                    chain_address=(ChainAddress.from_hex(row["chain_address"])
                                   if row["chain_address"] else None),
                    enabled=row["enabled"],
                )
