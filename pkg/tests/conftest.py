import os
import sys
from datetime import datetime, timezone
from pathlib import Path

import pytest
from hypothesis import HealthCheck, settings

sys.path.insert(0, str(Path(__file__).parent))

from agentfacts.scenario import finance_agent_doc  # noqa: E402
from agentfacts.signing import generate_authority  # noqa: E402

settings.register_profile("default", deadline=None, suppress_health_check=[HealthCheck.too_slow])
settings.register_profile("ci", deadline=None, max_examples=500, suppress_health_check=[HealthCheck.too_slow])
settings.load_profile(os.environ.get("HYPOTHESIS_PROFILE", "default"))

ROOT = Path(__file__).resolve().parent.parent
T0 = datetime(2025, 1, 6, 14, 0, 0, tzinfo=timezone.utc)


@pytest.fixture(scope="session")
def keys():
    """Deterministic authorities: provider (ed25519), compliance (ecdsa-p256), security (ed25519)."""
    return {
        "provider": generate_authority("ed25519", "Provider", ["provider"], seed=b"test:provider"),
        "compliance": generate_authority("ecdsa-p256", "Compliance", ["compliance"], seed=b"test:compliance"),
        "security": generate_authority("ed25519", "Security", ["security"], seed=b"test:security"),
    }


@pytest.fixture
def doc():
    return finance_agent_doc(T0)


@pytest.fixture(scope="session")
def authorities(keys):
    return {rec.authority_id: rec for _k, rec in keys.values()}


@pytest.fixture(scope="session")
def base_doc():
    """Same document as ``doc``; documents are immutable so sharing is safe under hypothesis."""
    return finance_agent_doc(T0)
