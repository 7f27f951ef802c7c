import itertools

import pytest
from hypothesis import HealthCheck, settings

settings.register_profile("default", deadline=None, max_examples=60,
                          suppress_health_check=[HealthCheck.too_slow])
settings.load_profile("default")


def brute_gl2(N):
    """All invertible 2x2 matrices mod N as entry tuples, by direct enumeration."""
    import math
    return [m for m in itertools.product(range(N), repeat=4)
            if math.gcd((m[0] * m[3] - m[1] * m[2]) % N, N) == 1]


def naive_mul(x, y, N):
    a, b, c, d = x
    e, f, g, h = y
    return ((a * e + b * g) % N, (a * f + b * h) % N, (c * e + d * g) % N, (c * f + d * h) % N)


@pytest.fixture
def cache_dir(tmp_path, monkeypatch):
    monkeypatch.setenv("NILPDIV_CACHE", str(tmp_path / "cache"))
    return tmp_path / "cache"
