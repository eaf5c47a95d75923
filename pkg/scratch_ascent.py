"""Scratch pilot 2: concave ascent for a sign-homogeneous whitening slice."""
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


def find_theta(T, r, rng, max_draws=10, max_ascent=200):
    d = T.shape[0]
    best = None  # (cond, theta, lam, vecs)
    for i in range(max_draws):
        theta = rng.standard_normal(d)
        lam, vecs = eig_top_r(slice_contract(T, theta), r)
        if abs(lam[-1]) < 1e-300 or abs(lam[0]) < 1e-300:
            continue
        cond = abs(lam[-1]) / abs(lam[0])
        homog = np.all(lam > 0) or np.all(lam < 0)
        if homog and cond >= 1e-10:
            return theta, i + 1, "draw"
        if best is None or cond > best[0]:
            best = (cond, theta, lam, vecs)
    if best is None:
        return None, max_draws, "ill-conditioned"
    _, theta, lam, P = best
    Tr = multilinear(T, P, P, P)
    xi = P.T @ theta
    xi /= np.linalg.norm(xi)
    for t in range(1, max_ascent + 1):
        M = Tr @ xi
        lam_r, vecs_r = np.linalg.eigh(M)
        # ascend the smallest signed eigenvalue (flip xi if mostly negative)
        if np.sum(lam_r > 0) < r / 2:
            xi = -xi
            M = -M
            lam_r, vecs_r = np.linalg.eigh(M)
        theta_full = P @ xi
        lam_f, _ = eig_top_r(slice_contract(T, theta_full), r)
        if (np.all(lam_f > 0) or np.all(lam_f < 0)) and abs(lam_f[-1] / lam_f[0]) >= 1e-10:
            return theta_full, max_draws + t, "ascent"
        w = vecs_r[:, 0]
        g = contract_two(Tr, w, w)
        ng = np.linalg.norm(g)
        if ng < 1e-300:
            break
        xi = xi + (0.4 / np.sqrt(t)) * g / ng
        xi /= np.linalg.norm(xi)
    return None, max_draws + max_ascent, "failed"


rng = np.random.default_rng(7)
fails = 0
steps_hist = []
for trial in range(400):
    d, r = 8, 3
    # adversarial geometry: two nearly antipodal columns
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
        print(f"trial {trial}: FAILED ({how})")
    else:
        mu = coeffs * (U.T @ theta)
        ok = np.all(mu > 0) or np.all(mu < 0)
        if not ok:
            fails += 1
            print(f"trial {trial}: theta accepted but truly mixed! how={how}")
print(f"failures: {fails}/400, steps mean={np.mean(steps_hist):.1f} max={max(steps_hist)}")

# also noisy-tensor behavior: accept best-effort gracefully
rng2 = np.random.default_rng(11)
for rel in (0.01, 0.1, 0.5, 1.0):
    ok = 0
    for trial in range(50):
        d, r = 10, 3
        U = rng2.standard_normal((d, r)); U /= np.linalg.norm(U, axis=0)
        coeffs = rng2.uniform(0.5, 2.0, r)
        T = exact_cp(U, coeffs)
        E = rng2.standard_normal((d, d, d))
        E = symmetrize(E)
        T = T + rel * np.linalg.norm(T) / np.linalg.norm(E) * E
        theta, steps, how = find_theta(T, r, rng2)
        ok += theta is not None
    print(f"rel_noise={rel}: found theta in {ok}/50")
