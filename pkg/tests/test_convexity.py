import numpy as np
import pytest

from cosshell.convexity import (RankOneWitness, blowup_scan, check_joint_convexity,
                                find_rank_one_violation, membrane_energy, planar_membrane_energy,
                                verify_witness)
from cosshell.energy import EnergyParams, phi_membrane_planar, phi_reference
from cosshell.errors import InvalidInputError

P = EnergyParams(a3=0.5)


def test_reference_family_jointly_convex():
    rep = check_joint_convexity(lambda a: phi_reference(P, a), 5000, seed=3)
    assert rep.violations == 0 and rep.redraws == 0


def test_concave_control_flagged():
    rep = check_joint_convexity(lambda a: -a[..., 12] ** 2, 2000, seed=3)
    assert rep.violations > 0 and rep.max_violation > 0.1


def test_affine_control_clean():
    w = np.linspace(-1, 1, 25)
    rep = check_joint_convexity(lambda a: a @ w, 2000, seed=3)
    assert rep.violations == 0


def test_planar_joint_convexity():
    rep = check_joint_convexity(lambda a: phi_membrane_planar(P, a), 5000, seed=3, dim=5,
                                positive_index=4)
    assert rep.violations == 0


def test_redraws_counted():
    # entry 0 drawn on [-2, 2] is required positive by phi: about half the draws are redrawn
    phi = lambda a: np.where(a[..., 0] > 0, np.sum(a * a, axis=-1), np.inf)
    rep = check_joint_convexity(phi, 500, seed=0, dim=3, positive_index=None)
    assert rep.violations == 0 and rep.redraws > 0


def test_scan_oracle_at_compressive_state():
    # independent 1-D scan on t in [-1, 1]: W(F + t e3 e1^T) at F = (0.5 e1, 0.5 e2)
    F = np.zeros((3, 2))
    F[0, 0] = F[1, 1] = 0.5
    a, b = np.array([0.0, 0.0, 1.0]), np.array([1.0, 0.0])
    ts = np.linspace(-1, 1, 1000)
    Ft = F + ts[:, None, None] * np.outer(a, b)
    nF2 = np.sum(Ft ** 2, axis=(1, 2))
    J = np.linalg.norm(np.cross(Ft[:, :, 0], Ft[:, :, 1]), axis=1)
    w = nF2 ** 2 + (J - 1) ** 2 + (1 / J + J - 2)
    # midpoint defect over symmetric intervals around 0
    defect = 0.5 * (w[::-1] + w) - w[499:501].mean()
    assert defect.min() < -1e-8
    W = membrane_energy(EnergyParams())
    k = int(np.argmin(defect[:500]))
    wit = RankOneWitness(F, a, b, float(ts[k]), float(-ts[k]), 0.0)
    d0 = 0.5 * (W(F + ts[k] * np.outer(a, b)) + W(F - ts[k] * np.outer(a, b))) - W(F)
    wit.violation = float(-d0)
    assert wit.violation > 1e-8 and verify_witness(W, wit)


def test_full_search_finds_verified_witness():
    W = membrane_energy(EnergyParams())
    rep = find_rank_one_violation(W, 20000, seed=0)
    assert rep.found and rep.witness.violation > 1e-8
    assert verify_witness(W, rep.witness)
    w = rep.witness
    for t in (w.t_minus, w.t_plus, 0.5 * (w.t_minus + w.t_plus)):
        Ft = w.F + t * np.outer(w.a, w.b)
        assert np.linalg.norm(np.cross(Ft[:, 0], Ft[:, 1])) > 0


def test_planar_search_finds_nothing():
    rep = find_rank_one_violation(planar_membrane_energy(EnergyParams()), 20000, seed=0, planar=True)
    assert not rep.found and rep.candidates == 0


def test_convex_control_finds_nothing():
    rep = find_rank_one_violation(lambda F: np.sum(F * F, axis=(-2, -1)), 20000, seed=0)
    assert not rep.found


def test_search_is_deterministic():
    W = membrane_energy(EnergyParams())
    a = find_rank_one_violation(W, 3000, seed=7).to_dict()
    b = find_rank_one_violation(W, 3000, seed=7, chunk=1000).to_dict()
    assert a == b


def test_blowup_scan():
    tab = blowup_scan(1.0, 1.0, 8)
    assert tab[0] == (1.0, 0.0)
    vals = [v for _, v in tab]
    assert all(b > a for a, b in zip(vals, vals[1:]))
    assert vals[-1] >= 1e8 - 2
    with pytest.raises(InvalidInputError):
        blowup_scan(1.0, 0.0, 3)
