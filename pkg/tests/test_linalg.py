import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from oodgraph import errors, linalg

# --- independent oracles ---------------------------------------------------


def eig_oracle(X: np.ndarray) -> np.ndarray:
    """Eigenvalues of the explicit sample covariance, descending."""
    cov = np.cov(np.asarray(X, dtype=np.float64), rowvar=False, ddof=1)
    vals = np.linalg.eigvalsh(np.atleast_2d(cov))
    return vals[::-1]


def gauss_jordan_inverse(M: np.ndarray) -> np.ndarray:
    """Explicit matrix inverse by Gauss-Jordan elimination with pivoting."""
    M = np.asarray(M, dtype=np.float64)
    n = M.shape[0]
    aug = np.hstack([M.copy(), np.eye(n)])
    for col in range(n):
        pivot = col + int(np.argmax(np.abs(aug[col:, col])))
        aug[[col, pivot]] = aug[[pivot, col]]
        aug[col] /= aug[col, col]
        for row in range(n):
            if row != col:
                aug[row] -= aug[row, col] * aug[col]
    return aug[:, n:]


def random_spd(rng: np.random.Generator, dim: int) -> np.ndarray:
    A = rng.normal(size=(dim, dim))
    return A @ A.T + dim * 0.05 * np.eye(dim)


def random_orthogonal(rng: np.random.Generator, dim: int) -> np.ndarray:
    Q, R = np.linalg.qr(rng.normal(size=(dim, dim)))
    return Q * np.sign(np.diag(R))


# --- cosine ----------------------------------------------------------------


def test_cosine_basics():
    assert linalg.cosine_similarity([1, 0], [1, 0]) == 1.0
    assert linalg.cosine_similarity([1, 0], [0, 1]) == 0.0
    assert linalg.cosine_similarity([1, 0], [-2, 0]) == -1.0


def test_cosine_errors():
    with pytest.raises(errors.DimMismatchError):
        linalg.cosine_similarity([1, 0], [1, 0, 0])
    with pytest.raises(errors.ZeroNormError):
        linalg.cosine_similarity([0, 0], [1, 0])


@settings(max_examples=100, deadline=None)
@given(
    seed=st.integers(0, 2**32 - 1),
    alpha=st.floats(1e-3, 1e3),
    beta=st.floats(1e-3, 1e3),
)
def test_cosine_scale_invariance(seed, alpha, beta):
    rng = np.random.default_rng(seed)
    a = rng.normal(size=5) + 0.1
    b = rng.normal(size=5) + 0.1
    base = linalg.cosine_similarity(a, b)
    scaled = linalg.cosine_similarity(alpha * a, beta * b)
    assert abs(base - scaled) <= 1e-9


# --- PCA -------------------------------------------------------------------


def test_pca_rank_one_line():
    t = np.linspace(-3, 3, 30)
    X = np.stack([t, t], axis=1)
    model = linalg.fit_pca(X, variance_fraction=0.99)
    assert model.output_dim == 1
    np.testing.assert_allclose(model.components[0], [2**-0.5, 2**-0.5], atol=1e-9)


def test_pca_full_rank_reconstruction():
    rng = np.random.default_rng(1)
    X = rng.normal(size=(40, 6))
    model = linalg.fit_pca(X, n_components=6)
    T = linalg.pca_transform(model, X)
    recon = np.asarray(T, dtype=np.float64) @ model.components + model.mean
    err = np.linalg.norm(recon - X) / np.linalg.norm(X)
    assert err <= 1e-6


def test_pca_three_factor_oracle():
    rng = np.random.default_rng(42)
    loadings = rng.normal(size=(3, 10))
    factors = rng.normal(size=(200, 3))
    X = factors @ loadings + 1e-3 * rng.normal(size=(200, 10))
    model = linalg.fit_pca(X, variance_fraction=0.999)
    assert model.output_dim == 3
    expected = eig_oracle(X)[:3]
    np.testing.assert_allclose(model.explained_variance, expected, rtol=1e-6)


def test_pca_orthonormality_and_variance_match():
    rng = np.random.default_rng(5)
    X = rng.normal(size=(60, 12)) @ np.diag(np.linspace(3, 0.3, 12))
    model = linalg.fit_pca(X, n_components=8)
    gram = model.components @ model.components.T
    assert np.abs(gram - np.eye(8)).max() <= 1e-8
    T = np.asarray(linalg.pca_transform(model, X), dtype=np.float64)
    coord_var = T.var(axis=0, ddof=1)
    np.testing.assert_allclose(coord_var, model.explained_variance, rtol=1e-6)
    assert (np.diff(model.explained_variance) <= 1e-12).all()


def test_pca_reconstruction_monotone_in_p():
    rng = np.random.default_rng(9)
    X = rng.normal(size=(50, 10)) @ np.diag(np.linspace(2, 0.5, 10))
    errs = []
    for p in range(1, 11):
        model = linalg.fit_pca(X, n_components=p)
        T = np.asarray(linalg.pca_transform(model, X), dtype=np.float64)
        recon = T @ model.components + model.mean
        errs.append(float(np.sum((recon - X) ** 2)))
    assert all(errs[i + 1] <= errs[i] + 1e-9 for i in range(9))


def test_pca_transform_contracts():
    rng = np.random.default_rng(2)
    X = rng.normal(size=(30, 4))
    model = linalg.fit_pca(X, n_components=4)
    zero = linalg.pca_transform(model, model.mean[None, :])
    np.testing.assert_allclose(zero, 0.0, atol=1e-6)
    T = np.asarray(linalg.pca_transform(model, X), dtype=np.float64)
    norms_t = np.linalg.norm(T, axis=1)
    norms_x = np.linalg.norm(X - model.mean, axis=1)
    np.testing.assert_allclose(norms_t, norms_x, rtol=1e-6)

    t = np.linspace(-3, 3, 30)
    line = np.stack([t, t], axis=1)
    rank1 = linalg.fit_pca(line, variance_fraction=0.99)
    coords = linalg.pca_transform(rank1, line)[:, 0]
    signed = (line - rank1.mean) @ np.array([2**-0.5, 2**-0.5])
    np.testing.assert_allclose(coords, signed, atol=1e-6)


def test_pca_errors():
    with pytest.raises(errors.TooFewSamplesError):
        linalg.fit_pca(np.ones((1, 3)), n_components=1)
    with pytest.raises(errors.DegenerateDataError):
        linalg.fit_pca(np.ones((5, 3)), n_components=1)
    X = np.random.default_rng(0).normal(size=(10, 3))
    with pytest.raises(ValueError):
        linalg.fit_pca(X, n_components=1, variance_fraction=0.5)
    with pytest.raises(ValueError):
        linalg.fit_pca(X)
    with pytest.raises(errors.DimMismatchError):
        linalg.pca_transform(linalg.fit_pca(X, n_components=2), np.ones((2, 5)))


def test_pca_variance_fraction_cap():
    rng = np.random.default_rng(11)
    X = rng.normal(size=(50, 10))
    model = linalg.fit_pca(X, variance_fraction=1.0, max_components=4)
    assert model.output_dim == 4


# --- Gaussian / Mahalanobis --------------------------------------------------


def test_fit_gaussian_two_points():
    g = linalg.fit_gaussian(np.array([[0.0, 0.0], [2.0, 0.0]]))
    np.testing.assert_allclose(g.centroid, [1.0, 0.0])
    np.testing.assert_allclose(g.covariance, [[2.0, 0.0], [0.0, 0.0]])
    assert g.member_count == 2


def test_fit_gaussian_single_row():
    g = linalg.fit_gaussian(np.array([[5.0, 5.0]]), ridge_scale=1e-3)
    np.testing.assert_allclose(g.centroid, [5.0, 5.0])
    np.testing.assert_allclose(g.covariance, 0.0)
    assert g.ridge == 1e-3
    np.testing.assert_allclose(g.cholesky, np.sqrt(1e-3) * np.eye(2))


def test_fit_gaussian_monte_carlo():
    rng = np.random.default_rng(123)
    true_cov = np.array([[2.0, 0.5], [0.5, 1.0]])
    L = np.linalg.cholesky(true_cov)
    rows = rng.normal(size=(500, 2)) @ L.T + np.array([1.0, -2.0])
    g = linalg.fit_gaussian(rows)
    assert np.abs(g.covariance - true_cov).max() <= 0.2


def test_mahalanobis_basics():
    g = linalg.fit_gaussian(np.array([[0.0, 0.0], [2.0, 2.0], [-2.0, -2.0], [1.0, -1.0]]))
    assert linalg.mahalanobis(g.centroid, g) == 0.0

    identity = linalg.ClusterGaussian(
        centroid=np.array([1.0, 2.0]),
        covariance=np.eye(2),
        ridge=0.0,
        cholesky=np.eye(2),
        member_count=10,
    )
    x = np.array([4.0, 6.0])
    assert abs(linalg.mahalanobis(x, identity) - 5.0) <= 1e-12

    diag = linalg.ClusterGaussian(
        centroid=np.zeros(2),
        covariance=np.diag([2.0, 0.5]),
        ridge=0.0,
        cholesky=np.linalg.cholesky(np.diag([2.0, 0.5])),
        member_count=10,
    )
    expected = np.sqrt(0.5 + 2.0)
    assert abs(linalg.mahalanobis([1.0, 1.0], diag) - expected) <= 1e-12
    with pytest.raises(errors.DimMismatchError):
        linalg.mahalanobis([1.0, 2.0, 3.0], diag)


def test_mahalanobis_matches_gauss_jordan_oracle():
    rng = np.random.default_rng(77)
    for _ in range(50):
        dim = int(rng.integers(2, 17))
        cov = random_spd(rng, dim)
        mu = rng.normal(size=dim)
        g = linalg.ClusterGaussian(
            centroid=mu,
            covariance=cov,
            ridge=0.0,
            cholesky=np.linalg.cholesky(cov),
            member_count=1,
        )
        x = rng.normal(size=dim) * 3
        inv = gauss_jordan_inverse(cov)
        expected = float(np.sqrt((x - mu) @ inv @ (x - mu)))
        got = linalg.mahalanobis(x, g)
        assert abs(got - expected) <= 1e-6 * max(1.0, expected)


def test_mahalanobis_rotation_invariance():
    rng = np.random.default_rng(31)
    for dim in (2, 5, 9):
        cov = random_spd(rng, dim)
        mu = rng.normal(size=dim)
        x = rng.normal(size=dim)
        Q = random_orthogonal(rng, dim)
        g = linalg.ClusterGaussian(
            centroid=mu, covariance=cov, ridge=0.0,
            cholesky=np.linalg.cholesky(cov), member_count=1,
        )
        cov_rot = Q @ cov @ Q.T
        cov_rot = (cov_rot + cov_rot.T) / 2
        g_rot = linalg.ClusterGaussian(
            centroid=Q @ mu, covariance=cov_rot, ridge=0.0,
            cholesky=np.linalg.cholesky(cov_rot), member_count=1,
        )
        d0 = linalg.mahalanobis(x, g)
        d1 = linalg.mahalanobis(Q @ x, g_rot)
        assert abs(d0 - d1) <= 1e-6 * max(1.0, d0)


def test_mahalanobis_batch_matches_scalar():
    rng = np.random.default_rng(8)
    g = linalg.fit_gaussian(rng.normal(size=(50, 4)))
    X = rng.normal(size=(20, 4))
    batch = linalg.mahalanobis_batch(X, g)
    single = [linalg.mahalanobis(row, g) for row in X]
    np.testing.assert_allclose(batch, single, rtol=1e-12, atol=1e-12)
