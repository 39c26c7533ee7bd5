import numpy as np
import pytest

from dirgof.sphere import RngStream, angles_to_circle


@pytest.fixture
def rng():
    return RngStream(20240611)


def circle(*angles):
    return angles_to_circle(np.array(angles, dtype=float))


def random_unit(gen, d):
    v = gen.standard_normal(d)
    return v / np.linalg.norm(v)


def random_rotation(gen, d):
    Q, R = np.linalg.qr(gen.standard_normal((d, d)))
    return Q * np.sign(np.diag(R))
