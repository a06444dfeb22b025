"""Random instances shared by the property and acceptance tests."""
import numpy as np

from multiclear import AssetMax, MinTrading, MultiLayerNetwork, PriorityProportional, Surplus, ValueMax


def random_instance(seed: int, society: bool | None = None):
    """Network with n <= 10, m <= 3; rules cycle through every payment/utility pairing."""
    rng = np.random.default_rng(seed)
    if society is None:
        society = (seed // 12) % 2 == 0
    n = int(rng.integers(2, 11))
    m = int(rng.integers(1, 4))
    ib = (rng.random((n, n, m)) < 0.4) * rng.uniform(0, 3, (n, n, m))
    ib[np.arange(n), np.arange(n)] = 0.0
    if society:
        ext = rng.uniform(0.1, 2, (n, m))
    else:
        ext = (rng.random((n, m)) < 0.3) * rng.uniform(0, 2, (n, m))
    x = (rng.random((n, m)) < 0.7) * rng.uniform(0, 4, (n, m))
    net = MultiLayerNetwork.from_interbank(ib, x, ext)
    pays = [
        Surplus(),
        PriorityProportional(0),
        PriorityProportional(m),
        PriorityProportional(int(rng.integers(0, m + 1)), order=tuple(int(k) for k in rng.permutation(m))),
    ]
    behs = [MinTrading(), AssetMax(int(rng.integers(m))), ValueMax(tuple(rng.uniform(0.5, 2, m)))]
    pay = pays[seed % 4]
    beh = behs[(seed // 4) % 3]
    q = rng.uniform(0.3, 3, m)
    return net, pay, beh, q
