import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from polyharm.conformal import CapBlendSpec, ConformalMapSpec, corner_values, f0, f1
from polyharm.errors import InvalidInputError
from polyharm.trial import corner_map

SPECS = [
    f0(),
    f1(0.1), f1(0.5), f1(0.9),
    ConformalMapSpec(sign=-1),
    ConformalMapSpec(m=1),
    ConformalMapSpec(real_zeros=((0.4, 1),)),
    ConformalMapSpec(imag_zeros=((0.3, 1), (0.7, 1))),
    ConformalMapSpec(complex_zeros=((0.5 * np.exp(0.6j), 1),)),
    ConformalMapSpec(complex_zeros=((0.6 * np.exp(0.3j), -1),), real_zeros=((0.2, 1),)),
    ConformalMapSpec(anticonformal=True),
    ConformalMapSpec(imag_zeros=((0.5, 1),), anticonformal=True),
]


def sample_points(rng, n=1000):
    # log-uniform modulus over several decades, uniform argument
    r = np.exp(rng.uniform(np.log(1e-3), np.log(1e3), n))
    return r * np.exp(1j * rng.uniform(0, 2 * np.pi, n))


def rel(a, b):
    return np.abs(a - b) / np.maximum(1.0, np.maximum(np.abs(a), np.abs(b)))


@pytest.mark.parametrize("spec", SPECS, ids=range(len(SPECS)))
def test_symmetry_identities(spec):
    rng = np.random.default_rng(0)
    w = sample_points(rng)
    f = spec(w)
    theta = rng.uniform(0, 2 * np.pi, 1000)
    assert np.max(np.abs(np.abs(spec(np.exp(1j * theta))) - 1)) < 1e-10
    assert np.max(rel(spec(-w), -f)) < 1e-10
    assert np.max(rel(spec(np.conj(w)), np.conj(f))) < 1e-10
    prod = spec(1 / w) * f
    assert np.max(np.abs(prod - 1)) < 1e-10


@pytest.mark.parametrize("spec", SPECS, ids=range(len(SPECS)))
def test_zero_is_fixed(spec):
    assert spec(0) == 0


def test_named_values():
    assert f0()(2) == pytest.approx(2)
    assert f1(0.5)(1j) == pytest.approx(-1j, abs=1e-14)


@pytest.mark.parametrize("bad", [
    dict(sign=2),
    dict(m=-1),
    dict(real_zeros=((1.2, 1),)),
    dict(real_zeros=((0.5, -1),)),
    dict(imag_zeros=((0.5, -1),)),
    dict(complex_zeros=((0.5j, 1),)),
    dict(complex_zeros=((1.1 * np.exp(0.5j), 1),)),
])
def test_invalid_specs(bad):
    with pytest.raises(InvalidInputError):
        ConformalMapSpec(**bad)


@pytest.mark.parametrize("s", [0.0, 1.0, -0.3, 1.5])
def test_f1_parameter_range(s):
    with pytest.raises(InvalidInputError):
        f1(s)


@pytest.mark.parametrize("spec", SPECS[:10], ids=range(10))
def test_json_roundtrip(spec):
    back = ConformalMapSpec.from_json(spec.to_json())
    w = np.array([0.3 + 0.2j, 2.0 - 1.0j, -0.1j])
    assert np.allclose(back(w), spec(w), rtol=1e-14)


@settings(max_examples=100, deadline=None)
@given(st.floats(0.05, 0.95), st.floats(-3, 3), st.floats(-3, 3))
def test_spherical_derivative_matches_finite_difference(s, x, y):
    spec = f1(s)
    w = complex(x, y)
    if abs(w) < 1e-3:
        w = 1e-3
    h = 1e-6 * max(1.0, abs(w))
    df = (spec(w + h) - spec(w - h)) / (2 * h)
    fw = spec(w)
    if not np.isfinite(fw) or abs(fw) > 1e6:
        return
    expected = abs(df) * (1 + abs(w) ** 2) / (1 + abs(fw) ** 2)
    assert spec.spherical_derivative(w) == pytest.approx(expected, rel=1e-5, abs=1e-8)


@pytest.mark.parametrize("spec", [f0(), f1(0.5), f1(0.9), ConformalMapSpec(anticonformal=True),
                                  CapBlendSpec(f0(), center=tuple(np.ones(3) / np.sqrt(3)), radius=0.4)])
def test_corner_map_boundary_arcs_stay_on_circles(spec):
    s = corner_map(spec, n=32)
    for k in range(3):
        on_arc = np.abs(s.nodes[:, k]) < 1e-14
        assert on_arc.any()
        assert np.max(np.abs(s.values[on_arc, k])) < 1e-10


def test_corner_values_are_unit():
    rng = np.random.default_rng(4)
    e = np.abs(rng.normal(size=(500, 3)))
    e /= np.linalg.norm(e, axis=1)[:, None]
    for spec in SPECS:
        v = corner_values(spec, e)
        assert np.max(np.abs(np.linalg.norm(v, axis=1) - 1)) < 1e-12
