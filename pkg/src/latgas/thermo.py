"""Thermodynamics of the product invariant states.

A chemical potential lam = (lam_0, ..., lam_d) defines a product
measure whose site marginals put a particle of velocity v with
probability theta_v(lam).  The map lam -> (density, momentum) is a
diffeomorphism onto the interior of the convex hull of the site
conserved vectors; lambda_of_hydro inverts it with a damped Newton
iteration on the strictly convex log-partition function.
"""

import numpy as np
from scipy.special import expit, rel_entr

from .errors import ConvergenceError

__all__ = [
    "theta_v",
    "hydro_of_lambda",
    "lambda_of_hydro",
    "chi",
    "current_R",
    "canonical_current_F",
    "entropy_product",
]


def theta_v(lam, vs):
    """Occupation probability of each velocity under potential lam.

    theta_v = logistic(lam_0 + sum_k lam_k v_k).  Returns shape (n,).
    """
    lam = np.asarray(lam, dtype=float)
    return expit(lam[0] + vs.vectors @ lam[1:])


def hydro_of_lambda(lam, vs):
    """Density and momentum (rho, p_1, ..., p_d) of the product state."""
    th = theta_v(lam, vs)
    out = np.empty(vs.dim + 1)
    out[0] = th.sum()
    out[1:] = vs.vectors.T @ th
    return out


def _jacobian(lam, vs):
    # d(rho, p)_a / d lam_b = sum_v I_a(v) I_b(v) theta_v (1 - theta_v),
    # the covariance of the site conserved vector: symmetric positive
    # definite whenever every theta_v is strictly inside (0, 1)
    th = theta_v(lam, vs)
    w = th * (1.0 - th)
    m = vs.conserved_matrix()
    return (m * w[:, None]).T @ m


def lambda_of_hydro(target, vs, tol=1e-12, max_iter=100):
    """Invert (rho, p) -> lam by damped Newton from lam = 0.

    target is the (d+1,) vector (rho, p).  The step is halved until the
    residual norm decreases.  Raises ConvergenceError when the residual
    fails to reach tol within max_iter iterations, which includes the
    case of a target outside the admissible open set.
    """
    target = np.asarray(target, dtype=float)
    if target.shape != (vs.dim + 1,):
        raise ValueError("target must have shape (d + 1,)")
    lam = np.zeros(vs.dim + 1)
    res = hydro_of_lambda(lam, vs) - target
    norm = np.max(np.abs(res))
    for _ in range(max_iter):
        if norm <= tol:
            return lam
        j = _jacobian(lam, vs)
        try:
            step = np.linalg.solve(j, -res)
        except np.linalg.LinAlgError as exc:
            raise ConvergenceError(
                f"singular Jacobian at lam={lam}") from exc
        damp = 1.0
        while damp > 2.0 ** -60:
            cand = lam + damp * step
            cres = hydro_of_lambda(cand, vs) - target
            cnorm = np.max(np.abs(cres))
            if cnorm < norm:
                lam, res, norm = cand, cres, cnorm
                break
            damp *= 0.5
        else:
            raise ConvergenceError(
                f"damping underflow at residual {norm:.3e}; "
                "target likely outside the admissible set")
    if norm <= tol:
        return lam
    raise ConvergenceError(
        f"no convergence after {max_iter} iterations, residual {norm:.3e}")


def chi(a):
    """Static compressibility of a Bernoulli marginal, chi(a) = a (1 - a)."""
    a = np.asarray(a, dtype=float)
    return a * (1.0 - a)


def current_R(x, vs):
    """Expected antisymmetric momentum current under the product state.

    R_{j,k}(rho, p) = - sum_v v_k v_j chi(theta_v(Lambda(rho, p))),
    a symmetric d x d matrix.  x is the (d+1,) hydrodynamic vector.
    At (a0, 0) this equals -(B / 4) times the identity.
    """
    lam = lambda_of_hydro(x, vs)
    c = chi(theta_v(lam, vs))
    return -(vs.vectors.T * c) @ vs.vectors


def canonical_current_F(beta, M, gamma_M):
    """Expected currents under the uniform canonical state on a cube.

    For the single-species exclusion on a cube of (2M+1)^d sites at
    density beta, with drift summary gamma_M (length-d vector), the
    expected jump current and gradient-current matrices are

      F_j     = -gamma_M[j] (1 + 1/(|cube| - 1)) beta (1 - beta)
      F_{i,j} = [beta (1 - beta) (1 + 1/(|cube| - 1)) - 1/4] delta_{ij}

    Returns (F_vector, F_matrix).
    """
    gamma_M = np.asarray(gamma_M, dtype=float)
    d = gamma_M.shape[0]
    nsites = (2 * M + 1) ** d
    if nsites < 2:
        raise ValueError("cube must contain at least 2 sites")
    occ = 1.0 + 1.0 / (nsites - 1)
    fvec = -gamma_M * occ * beta * (1.0 - beta)
    fmat = (beta * (1.0 - beta) * occ - 0.25) * np.eye(d)
    return fvec, fmat


def entropy_product(theta_new, theta_ref):
    """Relative entropy between two product Bernoulli measures.

    Both arguments are arrays of marginal occupation probabilities with
    identical shape (e.g. sites x velocities).  Returns
    sum KL(Bern(theta_new) || Bern(theta_ref)), with the usual
    conventions 0 log 0 = 0 and KL = +inf when theta_ref hits {0, 1}
    away from theta_new.
    """
    p = np.asarray(theta_new, dtype=float)
    q = np.asarray(theta_ref, dtype=float)
    if p.shape != q.shape:
        raise ValueError("marginal arrays must have identical shape")
    return float(np.sum(rel_entr(p, q) + rel_entr(1.0 - p, 1.0 - q)))
