"""Two-level operators, closed-form 2x2 linear algebra and the Liouville-space
representation shared by every propagator.

Conventions
-----------
* Basis ordering is ``(|g>, |e>)``; ``SIGMA_MINUS = |g><e|``.
* Operators are plain ``complex128`` numpy arrays of shape ``(2, 2)``
  (or ``(..., 2, 2)`` for batches).
* Liouville vectors stack the columns of rho::

      vec(rho) = [rho_gg, rho_eg, rho_ge, rho_ee]

  so that ``vec(A X B) = kron(B.T, A) @ vec(X)``. ``tr(sigma_minus X)``
  is then component ``1`` and the excited population component ``3``.
"""

import numpy as np

SIGMA_MINUS = np.array([[0, 1], [0, 0]], dtype=complex)
SIGMA_PLUS = SIGMA_MINUS.conj().T.copy()
EXCITED = SIGMA_PLUS @ SIGMA_MINUS
GROUND = np.array([[1, 0], [0, 0]], dtype=complex)
IDENTITY = np.eye(2, dtype=complex)

for _op in (SIGMA_MINUS, SIGMA_PLUS, EXCITED, GROUND, IDENTITY):
    _op.setflags(write=False)

# positions inside vec(rho)
VEC_GG, VEC_EG, VEC_GE, VEC_EE = 0, 1, 2, 3


class PreconditionError(ValueError):
    """An operator argument violates a documented precondition."""


def dag(a):
    return np.conj(np.swapaxes(a, -1, -2))


def matmul(a, b):
    return a @ b


def commutator(a, b):
    return a @ b - b @ a


def is_hermitian(a, atol=1e-10):
    return bool(np.max(np.abs(a - dag(a))) <= atol)


def eig_hermitian_2x2(h, atol=1e-10):
    """Closed-form eigendecomposition of a Hermitian 2x2 matrix.

    Returns ``(evals, evecs)`` with eigenvalues ascending and the
    eigenvectors as the columns of a unitary matrix.
    """
    h = np.asarray(h, dtype=complex)
    if h.shape != (2, 2):
        raise PreconditionError(f"expected a 2x2 matrix, got shape {h.shape}")
    if not is_hermitian(h, atol * max(1.0, float(np.max(np.abs(h))))):
        raise PreconditionError("matrix is not Hermitian")
    a = h[0, 0].real
    d = h[1, 1].real
    b = 0.5 * (h[0, 1] + np.conj(h[1, 0]))
    mean = 0.5 * (a + d)
    half = 0.5 * (a - d)
    r = np.hypot(half, abs(b))
    evals = np.array([mean - r, mean + r])
    if abs(b) == 0.0:
        if a <= d:
            return evals, np.eye(2, dtype=complex)
        return evals, np.array([[0, 1], [1, 0]], dtype=complex)
    # Two algebraically equivalent forms of each eigenvector; take the one
    # whose components do not cancel.
    vecs = np.empty((2, 2), dtype=complex)
    for k, lam in enumerate(evals):
        v1 = np.array([b, lam - a])
        v2 = np.array([lam - d, np.conj(b)])
        v = v1 if np.linalg.norm(v1) >= np.linalg.norm(v2) else v2
        vecs[:, k] = v / np.linalg.norm(v)
    return evals, vecs


def dressed_basis(omega, delta):
    """Vectorised eigenbasis of the real symmetric ``[[0, W/2], [W/2, D]]``.

    Returns ``(evals, evecs)`` with shapes ``(..., 2)`` and ``(..., 2, 2)``;
    the lower eigenvalue comes first. Uses the mixing angle
    ``theta = atan2(W, D)`` so no branch is needed where the two levels
    anticross.
    """
    omega = np.asarray(omega, dtype=float)
    delta = np.asarray(delta, dtype=float)
    omega, delta = np.broadcast_arrays(omega, delta)
    omega_r = np.hypot(omega, delta)
    theta = np.arctan2(omega, delta)
    c = np.cos(0.5 * theta)
    s = np.sin(0.5 * theta)
    evals = np.stack([0.5 * (delta - omega_r), 0.5 * (delta + omega_r)], axis=-1)
    evecs = np.empty(omega.shape + (2, 2), dtype=complex)
    evecs[..., 0, 0] = c
    evecs[..., 1, 0] = -s
    evecs[..., 0, 1] = s
    evecs[..., 1, 1] = c
    return evals, evecs


def expm_skew(h, tau):
    """``exp(-i h tau)`` for Hermitian ``h`` via its closed-form eigenbasis."""
    evals, v = eig_hermitian_2x2(h)
    phase = np.exp(-1j * evals * tau)
    return (v * phase) @ dag(v)


# --- Liouville space ---------------------------------------------------------

def vec(rho):
    """Column-stack ``(..., 2, 2)`` into ``(..., 4)``."""
    rho = np.asarray(rho)
    return np.swapaxes(rho, -1, -2).reshape(rho.shape[:-2] + (4,))


def unvec(v):
    v = np.asarray(v)
    return np.swapaxes(v.reshape(v.shape[:-1] + (2, 2)), -1, -2)


def _bkron(a, b):
    """Batched Kronecker product of 2x2 stacks."""
    a, b = np.broadcast_arrays(a, b)
    out = np.einsum("...ij,...kl->...ikjl", a, b)
    return out.reshape(a.shape[:-2] + (4, 4))


def spre(a):
    """Superoperator of ``X -> a X``."""
    return _bkron(IDENTITY, a)


def spost(a):
    """Superoperator of ``X -> X a``."""
    return _bkron(np.swapaxes(a, -1, -2), IDENTITY)


def sandwich(a, b):
    """Superoperator of ``X -> a X b``."""
    return _bkron(np.swapaxes(b, -1, -2), a)


def hamiltonian_superop(h):
    """``X -> -i [h, X]``."""
    return -1j * (spre(h) - spost(h))


def lindblad_superop(a, rate):
    """``(rate/2) L[a]`` with ``L[a] X = 2 a X a^+ - a^+ a X - X a^+ a``."""
    ada = dag(a) @ a
    return 0.5 * rate * (2.0 * sandwich(a, dag(a)) - spre(ada) - spost(ada))


# --- density-matrix checks ---------------------------------------------------

def density_defects(rho):
    """Invariant residuals for a stack of density matrices ``(..., 2, 2)``.

    Returns ``(hermiticity, trace_error, min_eigenvalue)`` arrays.
    """
    rho = np.asarray(rho)
    herm = np.max(np.abs(rho - dag(rho)), axis=(-1, -2))
    tr = np.trace(rho, axis1=-2, axis2=-1)
    trace_err = np.abs(tr - 1.0)
    # eigenvalues of the Hermitian part, closed form
    a = rho[..., 0, 0].real
    d = rho[..., 1, 1].real
    b = 0.5 * (rho[..., 0, 1] + np.conj(rho[..., 1, 0]))
    min_eig = 0.5 * (a + d) - np.hypot(0.5 * (a - d), np.abs(b))
    return herm, trace_err, min_eig


def purity(rho):
    rho = np.asarray(rho)
    return np.einsum("...ij,...ji->...", rho, rho).real
