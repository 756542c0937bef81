"""
Unit tests for the identity provider and authentication tokens.
"""

import sys
from pathlib import Path

import pytest

# Add src to path for imports
sys.path.insert(0, str(Path(__file__).parent.parent.parent / "src"))

from models.identity_provider import AuthToken, DuplicateIdentityError, IdentityProvider, verify_token
from primitives.substrate import Rng


class TestIdentityProvider:
    """Test suite for token issuance and verification."""

    def test_issued_token_verifies(self, sim_params, identity_provider):
        token = identity_provider.issue_token("alice")
        assert token.identity == "alice"
        assert verify_token(sim_params, identity_provider.public_key, token, "alice")

    def test_one_token_per_identity(self, identity_provider):
        identity_provider.issue_token("alice")
        with pytest.raises(DuplicateIdentityError):
            identity_provider.issue_token("alice")

    def test_token_bound_to_identity(self, sim_params, identity_provider):
        token = identity_provider.issue_token("alice")
        assert not verify_token(sim_params, identity_provider.public_key, token, "bob")

    def test_relabelled_token_fails(self, sim_params, identity_provider):
        token = identity_provider.issue_token("alice")
        relabelled = AuthToken(identity="bob", issuer_signature=token.issuer_signature)
        assert not verify_token(sim_params, identity_provider.public_key, relabelled, "bob")

    def test_other_issuer_rejected(self, sim_params, identity_provider):
        rogue = IdentityProvider(sim_params, Rng.from_int(404))
        token = rogue.issue_token("alice")
        assert not verify_token(sim_params, identity_provider.public_key, token, "alice")

    def test_token_bytes(self, identity_provider):
        token = identity_provider.issue_token("ålice")
        assert AuthToken.from_bytes(token.to_bytes()) == token
