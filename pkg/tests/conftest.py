from __future__ import annotations

import numpy as np
import pytest

from abrlab.domain import VideoManifest


def cbr_manifest(rates=(235.0, 500.0, 1000.0, 3000.0), n_chunks=60, chunk_s=4.0, title="t"):
    """Constant-bitrate manifest: every chunk of stream i is chunk_s * rate_i."""
    sizes = np.outer(rates, np.ones(n_chunks)) * chunk_s
    return VideoManifest(title, chunk_s, tuple(float(r) for r in rates), sizes)


@pytest.fixture
def make_cbr():
    return cbr_manifest
