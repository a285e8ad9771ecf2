import os

import pytest

ASSET_PACK = os.path.join(os.path.dirname(__file__), "..", "assets", "synthetic_pack.pxvp")


@pytest.fixture(scope="session")
def pack_path() -> str:
    assert os.path.exists(ASSET_PACK), "shipped synthetic pack missing"
    return ASSET_PACK
