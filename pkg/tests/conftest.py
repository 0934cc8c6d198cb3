import pytest

from ensemble_runner import EnsembleStats, SweepTable


def make_sweep_table(M, grid, P, tau=None, r_mean=None, R=2000):
    """SweepTable with hand-picked P (and tau) columns."""
    tau = tau if tau is not None else [1.0] * len(grid)
    r_mean = r_mean if r_mean is not None else [max(p, 0.12) for p in P]
    rows = []
    for n, p, t, r in zip(grid, P, tau, r_mean):
        stats = EnsembleStats(
            M=M, N=n, realizations=R, r_mean=r, P=p, tau=t, tau_raw=t * n
        )
        rows.append((n, stats))
    return SweepTable(M=M, rows=rows, seed=0, realizations=R)


@pytest.fixture
def sweep_table():
    return make_sweep_table
