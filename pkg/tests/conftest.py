import numpy as np
import pytest

from decaykit.geno import MarkerMatrix, PhenotypeVector


def make_matrix(counts, prefix="snp"):
    counts = np.asarray(counts, dtype=float)
    n, m = counts.shape
    return MarkerMatrix(counts, [f"{prefix}{j}" for j in range(m)], [f"ind{i}" for i in range(n)])


@pytest.fixture
def tiny_csv(tmp_path):
    def write(text, name="geno.csv"):
        p = tmp_path / name
        p.write_text(text)
        return p
    return write


@pytest.fixture
def planted():
    """Random genotypes with a 3-marker planted signal and small noise."""
    rng = np.random.default_rng(11)
    x = rng.binomial(2, 0.5, size=(120, 60)).astype(float)
    y = 1.5 * x[:, 0] - 1.2 * x[:, 1] + 1.0 * x[:, 2] + rng.normal(scale=0.3, size=120)
    m = make_matrix(x)
    return m, PhenotypeVector(y, "trait", m.individual_ids)


# Acceptance criteria record their outcome here; the summary hook prints one line each.
ACCEPTANCE: dict[int, tuple[bool, str]] = {}


def pytest_terminal_summary(terminalreporter):
    if not ACCEPTANCE:
        return
    terminalreporter.section("acceptance criteria")
    for k in sorted(ACCEPTANCE):
        ok, detail = ACCEPTANCE[k]
        terminalreporter.write_line(f"criterion {k}: {'PASS' if ok else 'FAIL'}  {detail}")
