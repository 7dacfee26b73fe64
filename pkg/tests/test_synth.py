import numpy as np
import pytest

from dcovmat.measure import DiscreteMeasure, point_mass
from dcovmat.rng import stream
from dcovmat.synth import (
    NORMAL,
    RADEMACHER,
    InnovationLaw,
    SpikeSpec,
    gen_independent,
    gen_spiked,
    unit_sphere,
    write_data_csv,
)


@pytest.mark.parametrize("law", [NORMAL, RADEMACHER, InnovationLaw("standardized-chi-square", 2)])
def test_laws_are_standardised(law):
    x = law.sample(stream(3), (200_000,))
    assert abs(x.mean()) < 0.02
    assert abs(x.var() - 1.0) < 0.03


def test_law_parse():
    assert InnovationLaw.parse("chisq:4") == InnovationLaw("standardized-chi-square", 4)
    assert InnovationLaw.parse("normal") == NORMAL
    with pytest.raises(ValueError):
        InnovationLaw.parse("cauchy")


def test_streams_independent_of_order():
    a = stream(5, 3, "w1").standard_normal(4)
    stream(5, 0, "w1").standard_normal(100)
    assert np.array_equal(a, stream(5, 3, "w1").standard_normal(4))
    assert not np.array_equal(a, stream(5, 3, "w2").standard_normal(4))


def test_independent_shapes_and_scaling():
    hx = DiscreteMeasure((0.5, 1.0), (0.5, 0.5))
    d = gen_independent((400, 10, 3000), hx, point_mass())
    assert (d.p, d.q, d.n) == (400, 10, 3000)
    row_var = d.x.var(axis=1)
    assert abs(row_var[:200].mean() - 0.5) < 0.02
    assert abs(row_var[200:].mean() - 1.0) < 0.02


def test_zero_theta_reproduces_independent():
    dims = (20, 30, 50)
    a = gen_independent(dims, point_mass(), point_mass(), seed=9, replicate=2)
    b = gen_spiked(dims, point_mass(), point_mass(), spec=SpikeSpec((0.0,)), seed=9, replicate=2)
    assert np.array_equal(a.x, b.x) and np.array_equal(a.y, b.y)


def test_spike_adds_rank_m_term():
    dims = (20, 30, 50)
    spec = SpikeSpec((3.0, 2.0))
    a = gen_independent(dims, point_mass(), point_mass(), seed=1)
    b = gen_spiked(dims, point_mass(), point_mass(), spec=spec, seed=1)
    assert np.linalg.matrix_rank(b.y - a.y) == 2


def test_spike_rank_too_large():
    with pytest.raises(ValueError):
        gen_spiked((2, 5, 10), point_mass(), point_mass(), spec=SpikeSpec((3, 2, 1)))


def test_thetas_must_decrease():
    with pytest.raises(ValueError):
        SpikeSpec((2.0, 3.0))
    with pytest.raises(ValueError):
        SpikeSpec((-1.0,))


def test_unit_sphere_norms():
    u = unit_sphere(stream(0, 0, "directions"), 7, 3)
    assert np.allclose(np.linalg.norm(u, axis=0), 1.0)


def test_small_dims_rejected():
    with pytest.raises(ValueError):
        gen_independent((1, 3, 3), point_mass(), point_mass())


def test_data_csv(tmp_path):
    d = gen_independent((2, 3, 4), point_mass(), point_mass(), seed=1)
    path = tmp_path / "d.csv"
    write_data_csv(d, path, seed=1)
    lines = path.read_text().splitlines()
    assert lines[0] == "# p=2,q=3,n=4,seed=1"
    back = np.loadtxt(path, delimiter=",", comments="#")
    assert np.array_equal(back, np.vstack([d.x, d.y]))


def test_spiked_pair_is_uncorrelated():
    n = 5000
    d = gen_spiked((100, 100, n), point_mass(), point_mass(), spec=SpikeSpec((2.0,)), seed=21)
    cross = d.x @ d.y.T / n
    assert np.abs(cross).max() < 5 / np.sqrt(n)
