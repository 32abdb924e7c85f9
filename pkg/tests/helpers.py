"""Shared test fixtures: benchmark datasets with independent oracles."""
import numpy as np

from flowdesk import neural as nn

ANTIDERIVATIVE_SENSORS = 100


def antiderivative_dataset(n_functions, n_queries=25, seed=0, kmax=2):
    """Random sine mixtures with targets from a high-resolution quadrature oracle.

    G(u)(y) = int_0^y u(x) dx computed by cumulative trapezoid on 2001 nodes,
    independent of any network code path.
    """
    rng = np.random.default_rng(seed)
    xs = np.linspace(0, 1, ANTIDERIVATIVE_SENSORS)
    fine = np.linspace(0, 1, 2001)
    dx = fine[1] - fine[0]
    samples = []
    for _ in range(n_functions):
        k = np.arange(1, kmax + 1)
        a = rng.normal(size=kmax)
        u_fine = (a[:, None] * np.sin(np.pi * k[:, None] * fine)).sum(axis=0)
        u_sens = (a[:, None] * np.sin(np.pi * k[:, None] * xs)).sum(axis=0)
        anti = np.concatenate(
            [[0.0], np.cumsum((u_fine[1:] + u_fine[:-1]) / 2 * dx)]
        )
        q = np.sort(rng.random(n_queries))
        samples.append(
            nn.OperatorSample(
                u_sensors=u_sens,
                queries=q.reshape(-1, 1),
                targets=np.interp(q, fine, anti),
            )
        )
    return samples


ANTIDERIVATIVE_CONFIG = nn.OperatorTrainConfig(
    epochs=8000,
    lr=3e-3,
    lr_decay=0.9997,
    batch=50,
    seed=3,
    latent_dim=40,
    branch_hidden=(),
    trunk_hidden=(40, 40),
    init="fan_in",
    history_every=40,
)


def heldout_rel_l2(model, samples):
    num = den = 0.0
    for s in samples:
        pred = nn.deeponet_eval(model, s.u_sensors, s.queries)
        num += np.sum((pred - s.targets) ** 2)
        den += np.sum(s.targets**2)
    return float(np.sqrt(num / den))
