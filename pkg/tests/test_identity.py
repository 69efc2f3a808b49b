"""Principals, tokens, and the principal-to-chain-address binding.

Clock injection keeps every expiry assertion exact to the second. The
token oracle in test_token_wire_format recomputes the compact HS256
serialization with hmac/json directly.
"""

import base64
import hashlib
import hmac
import json

import pytest

from evidentia.chain import ChainAddress, ChainRole, EvidenceChain
from evidentia.errors import (
    AccountDisabled,
    DuplicateName,
    Expired,
    Forbidden,
    InvalidArgument,
    InvalidCredentials,
    InvalidSignature,
    NotFound,
)
from evidentia.identity import (
    DEFAULT_TTL_S,
    IdentityDirectory,
    PrincipalRole,
    decode_token,
    hash_password,
    issue_token,
)

KEY = b"0123456789abcdef0123456789abcdef"


class FakeClock:
    def __init__(self, now=1_700_000_000):
        self.now = now

    def __call__(self):
        return self.now


@pytest.fixture
def clock():
    return FakeClock()


@pytest.fixture
def directory(clock):
    chain = EvidenceChain()
    d = IdentityDirectory(chain, token_key=KEY, clock=clock)
    d.bootstrap_admin("root", "root-pw")
    return d


def b64url(data: bytes) -> str:
    return base64.urlsafe_b64encode(data).rstrip(b"=").decode()


# --- token wire format ---------------------------------------------------------


def test_token_wire_format_matches_manual_hs256():
    token = issue_token(KEY, "alice", PrincipalRole.FORENSIC_ANALYST, 1000, ttl_s=60)
    header = b64url(json.dumps(
        {"alg": "HS256", "typ": "JWT"}, sort_keys=True, separators=(",", ":")
    ).encode())
    claims = b64url(json.dumps(
        {"exp": 1060, "iat": 1000, "role": "FORENSIC_ANALYST", "sub": "alice"},
        sort_keys=True, separators=(",", ":"),
    ).encode())
    mac = b64url(hmac.new(KEY, f"{header}.{claims}".encode(), hashlib.sha256).digest())
    assert token == f"{header}.{claims}.{mac}"


def test_decode_token_round_trip():
    token = issue_token(KEY, "bob", PrincipalRole.ADMIN, 5000)
    claims = decode_token(KEY, token, now=5001)
    assert claims == {"sub": "bob", "role": "ADMIN", "iat": 5000, "exp": 5000 + DEFAULT_TTL_S}


def test_expiry_boundary_exact_to_the_second():
    token = issue_token(KEY, "carol", PrincipalRole.NORMAL_USER, 1000, ttl_s=100)
    assert decode_token(KEY, token, now=1099)["sub"] == "carol"  # 1 s before expiry
    with pytest.raises(Expired):
        decode_token(KEY, token, now=1100)
    with pytest.raises(Expired):
        decode_token(KEY, token, now=1101)


def test_tampered_tokens_rejected_before_claims_are_read():
    token = issue_token(KEY, "dave", PrincipalRole.ADMIN, 1000, ttl_s=10)
    header, claims, mac = token.split(".")
    # expired AND tampered: signature failure must win, not Expired
    forged = f"{header}.{claims[:-2]}aa.{mac}"
    with pytest.raises(InvalidSignature):
        decode_token(KEY, forged, now=99_999)
    with pytest.raises(InvalidSignature):
        decode_token(KEY, f"{header}.{claims}", now=1001)
    with pytest.raises(InvalidSignature):
        decode_token(b"another-key-entirely-32-bytes!!!", token, now=1001)


def test_every_single_byte_flip_invalidates_the_token():
    token = issue_token(KEY, "erin", PrincipalRole.LEGAL_AUTHORITY, 1000, ttl_s=100)
    for i in range(len(token)):
        flipped = token[:i] + ("A" if token[i] != "A" else "B") + token[i + 1:]
        with pytest.raises((InvalidSignature, Expired)) as err:
            decode_token(KEY, flipped, now=1001)
        assert not isinstance(err.value, Expired)  # mac is checked first


def test_issue_token_rejects_bad_ttl():
    with pytest.raises(InvalidArgument):
        issue_token(KEY, "x", PrincipalRole.ADMIN, 0, ttl_s=0)


# --- directory: provisioning -----------------------------------------------------


def test_bootstrap_admin_binds_genesis_address(directory):
    root = directory.get_principal("root")
    assert root.role == PrincipalRole.ADMIN
    assert root.chain_address == directory._chain.genesis_admin
    with pytest.raises(Forbidden):
        directory.bootstrap_admin("root2", "pw")


def test_provision_analyst_grants_chain_role(directory):
    root = directory.get_principal("root")
    p = directory.provision_principal(root, "alice", PrincipalRole.FORENSIC_ANALYST, "pw")
    assert p.chain_address == ChainAddress.derive("alice")
    assert directory._chain.roles_of(p.chain_address) == {ChainRole.ANALYST_ROLE}


def test_provision_authority_and_admin_chain_roles(directory):
    root = directory.get_principal("root")
    la = directory.provision_principal(root, "leah", PrincipalRole.LEGAL_AUTHORITY, "pw")
    assert directory._chain.roles_of(la.chain_address) == {ChainRole.AUTHORITY_ROLE}
    admin2 = directory.provision_principal(root, "amy", PrincipalRole.ADMIN, "pw")
    assert directory._chain.roles_of(admin2.chain_address) == {ChainRole.ADMIN_ROLE}


def test_provision_normal_user_has_no_chain_presence(directory):
    root = directory.get_principal("root")
    txs_before = len(directory._chain.transactions())
    p = directory.provision_principal(root, "norm", PrincipalRole.NORMAL_USER, "pw")
    assert p.chain_address is None
    assert len(directory._chain.transactions()) == txs_before  # no grant tx


def test_provision_rejects_non_admin_and_duplicates(directory):
    root = directory.get_principal("root")
    alice = directory.provision_principal(root, "alice", PrincipalRole.FORENSIC_ANALYST, "pw")
    with pytest.raises(Forbidden):
        directory.provision_principal(alice, "eve", PrincipalRole.ADMIN, "pw")
    with pytest.raises(DuplicateName):
        directory.provision_principal(root, "alice", PrincipalRole.NORMAL_USER, "pw")


def test_disabled_admin_cannot_provision(directory):
    root = directory.get_principal("root")
    amy = directory.provision_principal(root, "amy", PrincipalRole.ADMIN, "pw")
    directory.set_enabled(root, "amy", False)
    with pytest.raises(Forbidden):
        directory.provision_principal(amy, "eve", PrincipalRole.NORMAL_USER, "pw")


# --- directory: authentication -----------------------------------------------------


def test_token_round_trip_for_every_role(directory, clock):
    root = directory.get_principal("root")
    roles = {
        "fa": PrincipalRole.FORENSIC_ANALYST,
        "la": PrincipalRole.LEGAL_AUTHORITY,
        "adm": PrincipalRole.ADMIN,
        "nu": PrincipalRole.NORMAL_USER,
    }
    for name, role in roles.items():
        directory.provision_principal(root, name, role, f"{name}-pw")
    for name, role in roles.items():
        token = directory.authenticate(name, f"{name}-pw")
        principal = directory.verify_token(token, {role})
        assert principal.id == name
        assert principal.role == role


def test_wrong_password_and_unknown_user(directory):
    with pytest.raises(InvalidCredentials):
        directory.authenticate("root", "wrong")
    with pytest.raises(InvalidCredentials):
        directory.authenticate("ghost", "pw")


def test_disabled_account_cannot_login_or_use_tokens(directory, clock):
    root = directory.get_principal("root")
    directory.provision_principal(root, "norm", PrincipalRole.NORMAL_USER, "pw")
    token = directory.authenticate("norm", "pw")
    directory.set_enabled(root, "norm", False)
    with pytest.raises(AccountDisabled):
        directory.authenticate("norm", "pw")
    with pytest.raises(AccountDisabled):
        directory.verify_token(token, {PrincipalRole.NORMAL_USER})
    directory.set_enabled(root, "norm", True)
    assert directory.verify_token(token, {PrincipalRole.NORMAL_USER}).id == "norm"


def test_role_gate_forbids_other_roles(directory):
    root = directory.get_principal("root")
    directory.provision_principal(root, "norm", PrincipalRole.NORMAL_USER, "pw")
    token = directory.authenticate("norm", "pw")
    with pytest.raises(Forbidden):
        directory.verify_token(token, {PrincipalRole.LEGAL_AUTHORITY})
    with pytest.raises(Forbidden):
        directory.verify_token(
            token, {PrincipalRole.FORENSIC_ANALYST, PrincipalRole.ADMIN}
        )


def test_token_expiry_through_directory_clock(directory, clock):
    token = directory.authenticate("root", "root-pw")
    clock.now += DEFAULT_TTL_S - 1
    assert directory.verify_token(token, {PrincipalRole.ADMIN}).id == "root"
    clock.now += 1
    with pytest.raises(Expired):
        directory.verify_token(token, {PrincipalRole.ADMIN})


def test_token_for_deleted_or_stale_role_rejected(directory, clock):
    root = directory.get_principal("root")
    directory.provision_principal(root, "norm", PrincipalRole.NORMAL_USER, "pw")
    token = issue_token(KEY, "nobody", PrincipalRole.ADMIN, clock.now)
    with pytest.raises(InvalidSignature):
        directory.verify_token(token, {PrincipalRole.ADMIN})
    stale = issue_token(KEY, "norm", PrincipalRole.ADMIN, clock.now)  # wrong role claim
    with pytest.raises(InvalidSignature):
        directory.verify_token(stale, {PrincipalRole.ADMIN})


def test_weak_token_key_rejected():
    with pytest.raises(InvalidArgument):
        IdentityDirectory(EvidenceChain(), token_key=b"short")


# --- password hashing ----------------------------------------------------------------


def test_password_hash_is_salted_pbkdf2():
    salt = b"\x01" * 16
    expected = hashlib.pbkdf2_hmac("sha256", b"secret", salt, 10_000)
    assert hash_password("secret", salt) == expected
    assert hash_password("secret", b"\x02" * 16) != expected


# --- persistence ----------------------------------------------------------------------


def test_export_import_round_trip(directory, clock):
    root = directory.get_principal("root")
    directory.provision_principal(root, "alice", PrincipalRole.FORENSIC_ANALYST, "pw")
    directory.provision_principal(root, "norm", PrincipalRole.NORMAL_USER, "pw")
    directory.set_enabled(root, "norm", False)
    rows = directory.export_principals()

    restored = IdentityDirectory(directory._chain, token_key=KEY, clock=clock)
    restored.import_principals(rows)
    assert restored.export_principals() == rows
    assert restored.authenticate("alice", "pw")  # credential hash survived
    with pytest.raises(NotFound):
        restored.get_principal("ghost")
