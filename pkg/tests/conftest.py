import numpy as np
import pytest

from evidentia.chain import ChainAddress, ChainRole, EvidenceChain


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


@pytest.fixture
def chain(tmp_path):
    """Chain with a mined admin genesis and one analyst + one authority."""
    c = EvidenceChain.open(tmp_path / "chain.log")
    admin = c.genesis_admin
    analyst = ChainAddress.derive("test:analyst")
    authority = ChainAddress.derive("test:authority")
    c.grant_role(admin, analyst, ChainRole.ANALYST_ROLE)
    c.grant_role(admin, authority, ChainRole.AUTHORITY_ROLE)
    c.flush()
    yield c
    c.close()


@pytest.fixture
def analyst():
    return ChainAddress.derive("test:analyst")


@pytest.fixture
def authority():
    return ChainAddress.derive("test:authority")
