import numpy as np
import pytest

from rankmin.data_io import MOVIELENS_SCALE
from rankmin.metrics import approx_rank, nmae, rfne
from rankmin.solvers import FactorPair
from rankmin.sparse_ops import ObservationSet


def test_rfne_exact_zero():
    rng = np.random.default_rng(0)
    p_m = rng.standard_normal((12, 3))
    p_n = rng.standard_normal((9, 3))
    assert rfne(FactorPair(p_m, p_n), p_m @ p_n.T) == pytest.approx(0.0, abs=1e-14)


def test_rfne_hand_example():
    fp = FactorPair(np.array([[1.0], [0.0]]), np.array([[1.0], [0.0]]))
    m_true = np.zeros((2, 2))
    m_true[0, 0] = 2.0
    # X = e1 e1^T, error 1 at (0,0); ||M|| = 2
    assert rfne(fp, m_true) == pytest.approx(0.5)


def test_rfne_blocking_agrees_with_direct():
    rng = np.random.default_rng(1)
    fp = FactorPair(rng.standard_normal((300, 4)), rng.standard_normal((150, 4)))
    m_true = rng.standard_normal((300, 150))
    direct = np.linalg.norm(fp.p_m @ fp.p_n.T - m_true) / np.linalg.norm(m_true)
    assert rfne(fp, m_true, block=64) == pytest.approx(direct, rel=1e-12)


def test_rfne_errors():
    fp = FactorPair(np.ones((3, 1)), np.ones((2, 1)))
    with pytest.raises(ValueError):
        rfne(fp, np.ones((4, 2)))
    with pytest.raises(ValueError):
        rfne(fp, np.zeros((3, 2)))


def test_nmae_hand_example():
    # y = [1, 5], y_hat = [2, 4]: mean |diff| = 1, range 4 -> 0.25
    fp = FactorPair(np.array([[2.0], [4.0]]), np.array([[1.0]]))
    test = ObservationSet.from_entries(2, 1, [0, 1], [0, 0], [1.0, 5.0])
    assert nmae(fp, test, MOVIELENS_SCALE) == pytest.approx(0.25)


def test_nmae_clips_predictions():
    # raw prediction 10 clips to 5, so a true 5 scores perfectly
    fp = FactorPair(np.array([[10.0]]), np.array([[1.0]]))
    test = ObservationSet.from_entries(1, 1, [0], [0], [5.0])
    assert nmae(fp, test, MOVIELENS_SCALE) == pytest.approx(0.0)


def test_nmae_empty_test_set():
    fp = FactorPair(np.ones((2, 1)), np.ones((2, 1)))
    with pytest.raises(ValueError):
        nmae(fp, ObservationSet.from_entries(2, 2, [], [], []), MOVIELENS_SCALE)


def test_approx_rank_absolute_and_relative():
    sv = np.array([10.0, 1.0, 0.005, 1e-6])
    assert approx_rank(sv, tau=0.001) == 3
    assert approx_rank(sv, tau=0.001, relative=True) == 2  # cut at 0.01
    assert approx_rank([], tau=0.001) == 0
    assert approx_rank([0.0005]) == 0
    # boundary is strict
    assert approx_rank([1.0, 0.001], tau=0.001, relative=True) == 1
