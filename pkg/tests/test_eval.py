import numpy as np
import pytest
from scipy.spatial.transform import Rotation

from camdyn.errors import ValidationError
from camdyn.eval import (
    Camera2D,
    GroundPlane,
    accel_error,
    annotate_contacts,
    binary_entropy,
    fit_ground_plane,
    foot_sliding,
    g_mpjpe,
    ground_penetration,
    loss_2d,
    loss_3d,
    loss_contact,
    loss_reg,
    loss_trans,
    mpjpe,
    pa_mpjpe,
    similarity_align,
    world_joint_positions,
)


def test_loss_3d_examples(rng):
    X = rng.normal(size=(24, 3))
    q = rng.normal(size=75)
    assert loss_3d(X, X, q, q) == 0.0
    assert loss_3d(X + [1.0, 0.0, 0.0], X, q, q) == pytest.approx(24.0)
    Y, p = rng.normal(size=(24, 3)), rng.normal(size=75)
    from camdyn.body import euler_to_matrix

    expected = np.abs(X - Y).sum() + sum(
        ((euler_to_matrix(q[k:k + 3]) - euler_to_matrix(p[k:k + 3])) ** 2).sum() for k in range(3, 75, 3))
    assert loss_3d(X, Y, q, p) == pytest.approx(expected, rel=1e-12)


def test_loss_2d_examples(rng):
    cam = Camera2D(focal=1000.0, principal=(500.0, 500.0))
    np.testing.assert_allclose(cam.project(np.array([1.0, 0.0, 2.0])), [1000.0, 500.0])
    X = rng.normal(size=(24, 3)) + [0, 0, 5]
    assert loss_2d(X, X, cam) == 0.0
    Y = X + 0.01 * rng.normal(size=X.shape)
    expected = np.abs(1000 * X[:, :2] / X[:, 2:] - 1000 * Y[:, :2] / Y[:, 2:]).sum()
    assert loss_2d(X, Y, cam) == pytest.approx(expected, rel=1e-12)
    with pytest.raises(ValidationError, match="depth"):
        cam.project(np.array([[0.0, 0.0, -1.0]]))


def test_contact_losses():
    b = np.array([1.0, 0.0, 1.0, 0.0])
    assert loss_contact(np.where(b == 1, 1 - 1e-7, 1e-7), b) == pytest.approx(1e-7, abs=1e-9)
    assert loss_contact(np.full(4, 0.5), b) == pytest.approx(np.log(2.0), abs=1e-12)
    assert loss_contact(1.0 - b, b) == pytest.approx(-np.log(1e-7), rel=1e-6)
    assert loss_trans(np.ones(3), np.zeros(3)) == 3.0
    assert loss_reg(np.array([1.0, 2.0, 0.0]), np.array([0.0, 1.0, 0.0, 1.0])) == 5.0
    assert loss_reg(np.zeros(3), np.full(4, 0.5)) == pytest.approx(np.log(2.0))
    assert binary_entropy(np.array([0.5]))[0] == pytest.approx(np.log(2.0))


def test_mpjpe_examples(rng):
    X = rng.normal(size=(5, 24, 3))
    assert mpjpe(X, X) == 0.0
    assert mpjpe(X + [0.0, 0.003, 0.004], X) == pytest.approx(5.0)
    assert mpjpe(X + 1.0, X, root_align=True) == pytest.approx(0.0, abs=1e-9)
    Y = rng.normal(size=X.shape)
    assert mpjpe(X, Y) == pytest.approx(1000 * np.sqrt(((X - Y) ** 2).sum(-1)).mean())


def umeyama_oracle(X, Y):
    """Reference alignment written out from the closed form (scale from traces)."""
    n = X.shape[0]
    mx, my = X.mean(0), Y.mean(0)
    Sxy = (Y - my).T @ (X - mx) / n
    U, D, Vt = np.linalg.svd(Sxy)
    S = np.eye(3)
    if np.linalg.det(Sxy) < 0:
        S[2, 2] = -1
    R = U @ S @ Vt
    sx2 = ((X - mx) ** 2).sum() / n
    c = np.trace(np.diag(D) @ S) / sx2
    return c, R, my - c * R @ mx


def test_similarity_alignment_against_oracle(rng):
    for _ in range(10):
        X, Y = rng.normal(size=(24, 3)), rng.normal(size=(24, 3))
        s, R, t = similarity_align(X, Y)
        s2, R2, t2 = umeyama_oracle(X, Y)
        assert s == pytest.approx(s2, rel=1e-10)
        np.testing.assert_allclose(R, R2, atol=1e-10)
        np.testing.assert_allclose(t, t2, atol=1e-10)
    with pytest.raises(ValidationError):
        similarity_align(np.zeros((5, 3)), rng.normal(size=(5, 3)))


def test_pa_mpjpe_removes_similarity(rng):
    X = rng.normal(size=(4, 24, 3))
    R = Rotation.random(random_state=1).as_matrix()
    Y = 2.5 * X @ R.T + [1.0, -2.0, 3.0]
    assert pa_mpjpe(Y, X) < 1e-9
    assert pa_mpjpe(X, X) < 1e-9


def test_accel_error_examples(rng):
    T = 10
    base = rng.normal(size=(24, 3))
    v = rng.normal(size=(24, 3))
    X = base + np.arange(T)[:, None, None] * v
    Y = base + 1.0 + np.arange(T)[:, None, None] * 0.5 * v
    assert accel_error(X, Y, 0.04) == pytest.approx(0.0, abs=1e-6)
    Z = X.copy()
    Z[5, 0] += [0.001, 0, 0]
    # One displaced point changes three second differences by 1, 2, 1 mm.
    expected = (1 + 2 + 1) / ((T - 2) * 24) / 0.04 ** 2
    assert accel_error(Z, X, 0.04) == pytest.approx(expected, rel=1e-9)


def test_ground_plane_fit_and_metrics():
    plane = GroundPlane(np.array([0.0, 2.0, 0.0]), 0.5)
    np.testing.assert_allclose(plane.normal, [0, 1, 0])
    X = np.array([[[0.0, 0.4, 0.0], [1.0, 0.6, 0.0]], [[0.0, 0.3, 0.0], [0.0, 0.7, 0.0]]])
    # Frame 0: one joint 0.1 below, frame 1: one joint 0.2 below.
    assert ground_penetration(X, plane) == pytest.approx(150.0)
    feet = np.array([[[0.0, 0.5, 0.0]], [[0.003, 0.9, 0.004]], [[0.003, 0.5, 0.004]]])
    contacts = np.array([[True], [True], [False]])
    assert foot_sliding(feet, contacts, plane) == pytest.approx(5.0)
    assert foot_sliding(feet, np.zeros((3, 1), bool), plane) == 0.0


def test_fit_ground_plane_rejects_collinear():
    pts = np.outer(np.arange(5.0), [1.0, 0.0, 0.0])
    with pytest.raises(ValidationError, match="collinear"):
        fit_ground_plane(pts)


def test_annotate_contacts_threshold_rule():
    T = 4
    X = np.zeros((T, 4, 3))
    X[:, 0] = [[0, 0, 0], [1, 0, 0], [0, 0, 1], [1, 0, 1]]      # toe on the ground
    X[:, 1, 1] = 0.03
    X[:, 2, 1] = 0.05
    X[:, 3, 1] = 1.0
    plane, labels = annotate_contacts(X, [0])
    np.testing.assert_allclose(plane.normal, [0, 1, 0], atol=1e-12)
    np.testing.assert_array_equal(labels, np.tile([True, True, False, False], (T, 1)))


def test_g_mpjpe_windows(rng):
    T = 30
    X = rng.normal(size=(T, 5, 3))
    assert g_mpjpe(X + [3.0, 0, 0], X, window_s=0.4, dt=0.04) == pytest.approx(0.0, abs=1e-9)
    drift = X + np.arange(T)[:, None, None] * np.array([0.001, 0.0, 0.0])
    # Within each 10-frame window the error grows 0..9 mm after realignment.
    assert g_mpjpe(drift, X, window_s=0.4, dt=0.04) == pytest.approx(4.5, rel=1e-9)


def test_world_joint_positions_static(body, rng):
    motion = np.zeros((2, 75))
    traj = np.array([[0.0, 0.0, 0.0], [1.0, 2.0, 3.0]])
    W = world_joint_positions(body, motion, traj)
    np.testing.assert_allclose(W[1] - W[0], np.broadcast_to(traj[1], W[0].shape), atol=1e-15)
