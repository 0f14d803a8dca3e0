import numpy as np
import pytest

from cosshell import _backend
from cosshell.energy import (ARG_SLICES, EnergyParams, LoadSpec, barrier, membrane_density,
                             objectivity_check, phi_membrane_planar, phi_reference,
                             reference_density)
from cosshell.errors import InfeasibleStateError, InvalidInputError
from cosshell.kinematics import minors, orientation_J

E3 = np.array([0.0, 0.0, 1.0])
I32 = np.eye(3, 2)


def feasible_state(rng):
    while True:
        d, F, G = rng.uniform(-1, 1, 3), rng.uniform(-1, 1, (3, 2)), rng.uniform(-1, 1, (3, 2))
        J = orientation_J(d, F)
        if abs(J) > 0.05:
            return (d if J > 0 else -d), F, G


def test_reference_value_defaults():
    # |I|^4 = 4, gamma(1) = 0, G = 0
    ev = reference_density(EnergyParams(), E3, I32, np.zeros((3, 2)))
    assert float(ev.W) == 4.0
    assert float(ev.J) == 1.0


def test_frozen_value():
    P = EnergyParams(p=3.0, q=5.0, s=3.0, a1=0.5, a2=0.25, a3=2.0, c1=1.5, c2=0.75, offset=-1.0)
    F = np.array([[1.0, 0.2], [0.1, 0.9], [0.0, 0.3]])
    G = np.array([[0.1, 0.0], [0.0, -0.2], [0.05, 0.1]])
    d = np.array([0.1, -0.2, 1.1])
    # independent evaluation from the defining formula
    J = np.linalg.det(np.column_stack([F, d]))
    S = np.sum(minors(F, G)[3:] ** 2)
    W = (0.5 * np.sum(F * F) ** 1.5 + 0.25 * np.sum(G * G) ** 2.5 + 2.0 * S ** 1.5
         + 1.5 * (J - 1) ** 2 + 0.75 * (1 / J + J - 2) - 1.0)
    assert float(reference_density(P, d, F, G).W) == pytest.approx(W, rel=1e-14)


@pytest.mark.parametrize("backend", _backend.available_backends())
def test_partials_match_finite_differences(rng, backend):
    P = EnergyParams(p=4.0, q=3.0, s=2.5, a2=0.7, a3=0.4, c1=1.3, c2=0.8)
    d, F, G = feasible_state(rng)
    ev = reference_density(P, d, F, G, backend=backend)
    h = 1e-6

    def W(d, F, G):
        return float(reference_density(P, d, F, G, backend=backend).W)

    for name, base, grad in (("d", d, ev.dd), ("F", F, ev.dF), ("G", G, ev.dG)):
        for idx in np.ndindex(base.shape):
            e = np.zeros_like(base)
            e[idx] = h
            args = {"d": d, "F": F, "G": G}
            args[name] = base + e
            wp = W(**args)
            args[name] = base - e
            wm = W(**args)
            assert (wp - wm) / (2 * h) == pytest.approx(grad[idx], rel=1e-6, abs=1e-6)


def test_membrane_partials(rng):
    P = EnergyParams(c1=2.0, c2=0.5)
    F = rng.uniform(-1, 1, (3, 2))
    ev = membrane_density(P, F)
    assert np.all(ev.dd == 0) and np.all(ev.dG == 0)
    h = 1e-6
    for idx in np.ndindex(3, 2):
        e = np.zeros((3, 2))
        e[idx] = h
        fd = (float(membrane_density(P, F + e).W) - float(membrane_density(P, F - e).W)) / (2 * h)
        assert fd == pytest.approx(ev.dF[idx], rel=1e-6, abs=1e-7)


def test_backends_agree(rng):
    if len(_backend.available_backends()) < 2:
        pytest.skip("compiled backend not built")
    P = EnergyParams(a3=0.3)
    n = 500
    states = [feasible_state(rng) for _ in range(n)]
    d, F, G = (np.array([s[k] for s in states]) for k in range(3))
    a = reference_density(P, d, F, G, backend="python")
    b = reference_density(P, d, F, G, backend="cython")
    for x, y in ((a.W, b.W), (a.dd, b.dd), (a.dF, b.dF), (a.dG, b.dG)):
        np.testing.assert_allclose(x, y, rtol=1e-12, atol=1e-12)
    ma = membrane_density(P, F, backend="python")
    mb = membrane_density(P, F, backend="cython")
    np.testing.assert_allclose(ma.dF, mb.dF, rtol=1e-12, atol=1e-12)


def test_phi_agrees_with_composed_density(rng):
    P = EnergyParams(a3=0.6, q=3.0)
    d, F, G = feasible_state(rng)
    args = np.zeros(25)
    args[ARG_SLICES["F"]] = F.ravel()
    args[ARG_SLICES["G"]] = G.ravel()
    args[ARG_SLICES["J"]] = orientation_J(d, F)
    args[ARG_SLICES["m"]] = minors(F, G)[3:]
    assert float(phi_reference(P, args)) == pytest.approx(float(reference_density(P, d, F, G).W), rel=1e-13)


def test_phi_infinite_off_domain():
    args = np.zeros(25)
    assert phi_reference(EnergyParams(), args) == np.inf
    assert phi_membrane_planar(EnergyParams(), np.zeros(5)) == np.inf


def test_barrier_values():
    val, slope = barrier(np.array([1.0, 0.5, 2.0]), 1.0, 1.0)
    np.testing.assert_allclose(val, [0.0, 0.25 + 0.5, 1.0 + 0.5])
    np.testing.assert_allclose(slope, [0.0, -1.0 - 3.0, 2.0 + 0.75])
    assert float(barrier(1e-8)[0]) >= 1e8 - 2


def test_infeasible_reports_index():
    d = np.tile(E3, (3, 1))
    d[2] = -E3
    with pytest.raises(InfeasibleStateError) as err:
        reference_density(EnergyParams(), d, np.broadcast_to(I32, (3, 3, 2)), np.zeros((3, 3, 2)))
    assert err.value.index == 2


@pytest.mark.parametrize("family", ["reference", "membrane"])
def test_objectivity(family):
    assert objectivity_check(EnergyParams(a3=0.5), 300, seed=1, family=family) <= 1e-10


@pytest.mark.parametrize("kw", [dict(p=2.0), dict(q=1.5), dict(s=1.0), dict(a1=0.0),
                                dict(a2=-1.0), dict(c2=0.0), dict(c1=float("nan")), dict(a1=True)])
def test_params_validation(kw):
    with pytest.raises(InvalidInputError):
        EnergyParams(**kw)


def test_overrides():
    P = EnergyParams()
    a1, *_ = P.coefficient_arrays(3, {"a1": [1.0, 2.0, 3.0]})
    np.testing.assert_array_equal(a1, [1.0, 2.0, 3.0])
    with pytest.raises(InvalidInputError):
        P.coefficient_arrays(3, {"a1": [1.0]})


def test_loadspec():
    assert LoadSpec().is_zero()
    assert not LoadSpec(b=(0, 0, 1)).is_zero()
    with pytest.raises(InvalidInputError):
        LoadSpec(b=(1.0, 2.0))
