import numpy as np
import pytest
from hypothesis import HealthCheck, settings

settings.register_profile("default", max_examples=60, deadline=None,
                          suppress_health_check=[HealthCheck.too_slow])
settings.load_profile("default")

_CRITERIA = pytest.StashKey[dict]()


@pytest.fixture
def criterion(request):
    """Record one PASS/FAIL line per acceptance criterion for the summary."""
    lines = request.config.stash.setdefault(_CRITERIA, {})

    def record(number, ok, detail):
        line = f"criterion {number:>2}: {'PASS' if ok else 'FAIL'}  {detail}"
        lines[number] = line
        print(line)
        return ok
    return record


def pytest_terminal_summary(terminalreporter, exitstatus, config):
    lines = config.stash.get(_CRITERIA, {})
    if lines:
        terminalreporter.section("acceptance criteria")
        for k in sorted(lines):
            terminalreporter.write_line(lines[k])


def knet_text(counts, hz=100, scale="3920(gal)/6182761", duration=None, extra=None,
              mag="5.0", depth="10"):
    """A small record in the fixed-width strong-motion layout."""
    counts = np.asarray(counts, dtype=np.int64)
    if duration is None:
        duration = counts.size / hz
    lines = [
        ("Origin Time", "2004/10/23 17:56:00"),
        ("Lat.", "37.292"),
        ("Long.", "138.867"),
        ("Depth. (km)", depth),
        ("Mag.", mag),
        ("Station Code", "NIG019"),
        ("Station Lat.", "37.3078"),
        ("Station Long.", "138.7887"),
        ("Station Height(m)", "200"),
        ("Record Time", "2004/10/23 17:56:15"),
        ("Sampling Freq(Hz)", f"{hz}Hz"),
        ("Duration Time(s)", f"{duration:g}"),
        ("Dir.", "N-S"),
        ("Scale Factor", scale),
        ("Max. Acc. (gal)", "12.345"),
        ("Last Correction", "2004/10/23 17:56:00"),
    ]
    if extra:
        lines.extend(extra)
    out = [f"{k:<18}{v}" for k, v in lines]
    out.append("Memo.")
    for s in range(0, counts.size, 8):
        out.append(" ".join(f"{v:7d}" for v in counts[s:s + 8]))
    return "\n".join(out) + "\n"


@pytest.fixture
def knet_counts():
    """Quiet first seconds, then a decaying burst; 20 s at 100 Hz."""
    rng = np.random.default_rng(2024)
    n = 2000
    t = np.arange(n) * 0.01
    env = np.where(t > 4.0, np.exp(-(t - 4.0) / 3.0) * (1 - np.exp(-(t - 4.0) * 4)), 0.0)
    sig = env * 8000 * np.sin(2 * np.pi * 3.0 * t + rng.uniform(0, 6.28))
    noise = rng.normal(0, 15, n)
    return np.rint(sig + noise).astype(np.int64)


@pytest.fixture
def knet_file(tmp_path, knet_counts):
    path = tmp_path / "NIG0190410231756.NS"
    path.write_text(knet_text(knet_counts), encoding="ascii")
    return path
