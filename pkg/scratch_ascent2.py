"""Scratch pilot 3: clean concave ascent (no flip heuristic), multistart."""
import numpy as np
import sys
sys.path.insert(0, "src")
from mixglm.tensors import symmetrize, multilinear, slice_contract, contract_two


def exact_cp(U, coeffs):
    return symmetrize(np.einsum("j,ij,kj,lj->ikl", coeffs, U, U, U))


def eig_top_r(V, r):
    lam, vecs = np.linalg.eigh(V)
    order = np.argsort(-np.abs(lam))[:r]
    return lam[order], vecs[:, order]


def accept(T, theta, r):
    lam, vecs = eig_top_r(slice_contract(T, theta), r)
    if abs(lam[0]) < 1e-300:
        return None
    cond = abs(lam[-1]) / abs(lam[0])
    homog = np.all(lam > 0) or np.all(lam < 0)
    return (homog, cond)


def find_theta(T, r, rng, max_draws=10, max_ascent=300):
    d = T.shape[0]
    best = None
    for i in range(max_draws):
        theta = rng.standard_normal(d)
        res = accept(T, theta, r)
        if res is None:
            continue
        homog, cond = res
        if homog and cond >= 1e-10:
            return theta, i + 1, "draw"
        if best is None or cond > best[0]:
            best = (cond, theta)
    if best is None:
        return None, max_draws, "ill-conditioned"
    _, theta0 = best
    lam, P = eig_top_r(slice_contract(T, theta0), r)
    Tr = multilinear(T, P, P, P)
    total = max_draws
    starts = [P.T @ theta0]
    for j in range(r):
        starts.append(np.eye(r)[:, j])
        starts.append(-np.eye(r)[:, j])
    for xi in starts:
        xi = xi / np.linalg.norm(xi)
        for t in range(1, max_ascent + 1):
            total += 1
            M = Tr @ xi
            lam_r, vecs_r = np.linalg.eigh(M)
            theta_full = P @ xi
            res = accept(T, theta_full, r)
            if res is not None and res[0] and res[1] >= 1e-10:
                return theta_full, total, "ascent"
            w = vecs_r[:, 0]  # eigvec of smallest eigenvalue
            g = contract_two(Tr, w, w)
            ng = np.linalg.norm(g)
            if ng < 1e-300:
                break
            xi = xi + (1.0 / np.sqrt(t)) * g / ng
            n = np.linalg.norm(xi)
            if n > 1.0:
                xi = xi / n
        if np.linalg.norm(xi) > 0:
            pass
    return None, total, "failed"


rng = np.random.default_rng(7)
fails = 0
steps_hist = []
for trial in range(1000):
    d, r = 8, 3
    u1 = rng.standard_normal(d); u1 /= np.linalg.norm(u1)
    u2 = -u1 + 0.25 * rng.standard_normal(d); u2 /= np.linalg.norm(u2)
    u3 = rng.standard_normal(d); u3 /= np.linalg.norm(u3)
    U = np.stack([u1, u2, u3], axis=1)
    if np.linalg.svd(U, compute_uv=False)[-1] < 0.05:
        continue
    coeffs = rng.uniform(0.5, 2.0, r)
    T = exact_cp(U, coeffs)
    theta, steps, how = find_theta(T, r, rng)
    steps_hist.append(steps)
    if theta is None:
        fails += 1
        print(f"trial {trial}: FAILED ({how}) smin={np.linalg.svd(U, compute_uv=False)[-1]:.3f}")
print(f"adversarial: failures={fails}/1000 steps mean={np.mean(steps_hist):.1f} max={max(steps_hist)}")

# mixed coefficient signs too (regression path can have negative rho*w)
fails = 0
for trial in range(500):
    d, r = 10, 4
    U = rng.standard_normal((d, r)); U /= np.linalg.norm(U, axis=0)
    if np.linalg.svd(U, compute_uv=False)[-1] < 0.2:
        continue
    coeffs = rng.uniform(0.5, 2.0, r) * rng.choice([-1, 1], r)
    T = exact_cp(U, coeffs)
    theta, steps, how = find_theta(T, r, rng)
    if theta is None:
        fails += 1
print(f"mixed-coeff r=4: failures={fails}/500")
