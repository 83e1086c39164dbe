"""Elementary symmetric function algebra, cone membership, and concavity scans.

The objects here are triples (r00, R, z) with r00 a positive real, R a
symmetric (or Hermitian) n x n matrix and z a vector, together with the
family of operators

    F_k(r00, R, z) = r00 * sigma_k(R) - z^T T_{k-1}(R) z,

where sigma_k is the k-th elementary symmetric function of the eigenvalues
and T_{k-1} is the (k-1)-th Newton transformation. The admissibility cone
requires r00 > 0, R in the Garding cone Gamma_k^+ (sigma_1, ..., sigma_k all
positive) and F_k > 0.

Log-concavity of F_k along segments inside the cone is a theorem for k = 1
(any n) and k = n; for 2 <= k <= n-1 it is scanned as a conjecture, with real
and complex (Hermitian) data flagged separately. The scanners draw random
cone-interior pairs, test midpoint log-concavity, and report worst margins
and any counterexamples at full precision.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np


def _as_square(matrix, dtype_kind: str) -> np.ndarray:
    arr = np.asarray(matrix)
    if arr.ndim != 2 or arr.shape[0] != arr.shape[1]:
        raise ValueError(f"matrix must be square, got shape {arr.shape}")
    if dtype_kind == "real":
        arr = arr.astype(float)
        defect = float(np.max(np.abs(arr - arr.T))) if arr.size else 0.0
    else:
        arr = arr.astype(complex)
        defect = float(np.max(np.abs(arr - arr.conj().T))) if arr.size else 0.0
    scale = 1.0 + (float(np.max(np.abs(arr))) if arr.size else 0.0)
    if defect > 1e-10 * scale:
        kind = "symmetric" if dtype_kind == "real" else "Hermitian"
        raise ValueError(f"matrix is not {kind}: defect {defect!r}")
    return arr


@dataclass
class ConePoint:
    """Real triple (r00, R, z) with R symmetric n x n and z of length n."""

    r00: float
    R: np.ndarray
    z: np.ndarray

    def __post_init__(self) -> None:
        self.r00 = float(self.r00)
        self.R = _as_square(self.R, "real")
        self.z = np.asarray(self.z, dtype=float).reshape(-1)
        if self.z.size != self.R.shape[0]:
            raise ValueError(f"z has length {self.z.size}, expected {self.R.shape[0]}")

    @property
    def n(self) -> int:
        return self.R.shape[0]

    def admissible(self, k: int) -> bool:
        return (
            self.r00 > 0.0
            and gamma_k_membership(self.R, k)
            and F_k_eval(self, k) > 0.0
        )


@dataclass
class HermitianConePoint:
    """Complex triple (r00, R, z) with R Hermitian n x n and z complex of length n."""

    r00: float
    R: np.ndarray
    z: np.ndarray

    def __post_init__(self) -> None:
        self.r00 = float(self.r00)
        self.R = _as_square(self.R, "complex")
        self.z = np.asarray(self.z, dtype=complex).reshape(-1)
        if self.z.size != self.R.shape[0]:
            raise ValueError(f"z has length {self.z.size}, expected {self.R.shape[0]}")

    @property
    def n(self) -> int:
        return self.R.shape[0]

    def admissible(self, k: int) -> bool:
        return (
            self.r00 > 0.0
            and gamma_k_membership(self.R, k)
            and G_k_eval(self, k) > 0.0
        )


def _esym_all(lams: np.ndarray, kmax: int) -> np.ndarray:
    """Elementary symmetric functions e_0..e_kmax of the last axis.

    Stable one-pass recurrence: fold eigenvalues in one at a time, updating
    e_j += lam * e_{j-1} from the top down. Works on any leading batch shape.
    """
    lams = np.asarray(lams, dtype=float)
    n = lams.shape[-1]
    out = np.zeros(lams.shape[:-1] + (kmax + 1,))
    out[..., 0] = 1.0
    for i in range(n):
        lam_i = lams[..., i]
        for j in range(min(i + 1, kmax), 0, -1):
            out[..., j] += lam_i * out[..., j - 1]
    return out


def sigma_k(eigenvalues, k: int) -> float:
    """k-th elementary symmetric function of a list of eigenvalues."""
    lams = np.asarray(eigenvalues, dtype=float).reshape(-1)
    n = lams.size
    if not 1 <= k <= n:
        raise ValueError(f"k must satisfy 1 <= k <= {n}, got {k}")
    return float(_esym_all(lams, k)[k])


def _sigma_loo(lams: np.ndarray, m: int) -> np.ndarray:
    """sigma_m of the eigenvalue list with entry i removed, for every i.

    Input shape (..., n), output shape (..., n). Each leave-one-out value is
    computed by a fresh addition-only recurrence, avoiding the cancellation of
    division- or subtraction-based deflation.
    """
    lams = np.asarray(lams, dtype=float)
    n = lams.shape[-1]
    out = np.empty(lams.shape)
    for i in range(n):
        sub = np.concatenate([lams[..., :i], lams[..., i + 1 :]], axis=-1)
        out[..., i] = _esym_all(sub, m)[..., m]
    return out


def newton_transform(R, k: int) -> np.ndarray:
    """Newton transformation T_{k-1}(R).

    In the eigenbasis of R, T_{k-1} is diagonal with entries
    sigma_{k-1}(eigenvalues with the i-th removed). T_0 is the identity
    (returned exactly), and tr(T_{k-1} R) = k sigma_k(R).
    """
    arr = np.asarray(R)
    kind = "complex" if np.iscomplexobj(arr) else "real"
    arr = _as_square(arr, kind)
    n = arr.shape[0]
    if not 1 <= k <= n:
        raise ValueError(f"k must satisfy 1 <= k <= {n}, got {k}")
    if k == 1:
        return np.eye(n, dtype=arr.dtype)
    lam, u = np.linalg.eigh(arr)
    loo = _sigma_loo(lam, k - 1)
    t = (u * loo) @ u.conj().T
    return 0.5 * (t + t.conj().T)


def _f_from_eig(r00, lam, u, z, k: int):
    """F_k from an eigendecomposition; batched over any leading shape."""
    sig = _esym_all(lam, k)[..., k]
    w = np.einsum("...ij,...j->...i", np.conj(np.swapaxes(u, -1, -2)), z)
    loo = _sigma_loo(lam, k - 1)
    t_form = np.sum(loo * (np.abs(w) ** 2), axis=-1)
    return r00 * sig - t_form


def F_k_eval(point: ConePoint, k: int) -> float:
    """F_k(r00, R, z) = r00 sigma_k(R) - z^T T_{k-1}(R) z for real triples."""
    if not isinstance(point, ConePoint):
        raise TypeError("F_k_eval expects a ConePoint; use G_k_eval for Hermitian triples")
    n = point.n
    if not 1 <= k <= n:
        raise ValueError(f"k must satisfy 1 <= k <= {n}, got {k}")
    lam, u = np.linalg.eigh(point.R)
    return float(_f_from_eig(point.r00, lam, u, point.z, k))


def G_k_eval(point: HermitianConePoint, k: int) -> float:
    """Hermitian counterpart of F_k; the value is real for Hermitian data."""
    if not isinstance(point, HermitianConePoint):
        raise TypeError("G_k_eval expects a HermitianConePoint")
    n = point.n
    if not 1 <= k <= n:
        raise ValueError(f"k must satisfy 1 <= k <= {n}, got {k}")
    lam, u = np.linalg.eigh(point.R)
    return float(np.real(_f_from_eig(point.r00, lam, u, point.z, k)))


def gamma_k_membership(R, k: int) -> bool:
    """True when sigma_1(R), ..., sigma_k(R) are all strictly positive."""
    arr = np.asarray(R)
    kind = "complex" if np.iscomplexobj(arr) else "real"
    arr = _as_square(arr, kind)
    n = arr.shape[0]
    if not 1 <= k <= n:
        raise ValueError(f"k must satisfy 1 <= k <= {n}, got {k}")
    lam = np.linalg.eigvalsh(arr)
    sig = _esym_all(lam, k)
    return bool(np.all(sig[1 : k + 1] > 0.0))


# ---------------------------------------------------------------------------
# Hessian of log(x y - |z|^2).
# ---------------------------------------------------------------------------


def log_q_hessian(x: float, y: float, z) -> np.ndarray:
    """Hessian of f(x, y, z) = log(x y - sum z_i^2), ordered (x, y, z_1..z_n).

    Defined on the cone x > 0, y > 0, x y - |z|^2 > 0, where f is concave;
    the returned matrix is symmetric negative semidefinite there, and scaling
    the argument by lam scales the Hessian by lam^{-2}.
    """
    z = np.asarray(z, dtype=float).reshape(-1)
    x = float(x)
    y = float(y)
    zz = float(z @ z)
    d = x * y - zz
    if x <= 0.0 or y <= 0.0 or d <= 0.0:
        raise ValueError(f"point (x={x!r}, y={y!r}, |z|^2={zz!r}) is outside the admissible cone")
    n = z.size
    d2 = d * d
    h = np.empty((n + 2, n + 2))
    h[0, 0] = -(y * y) / d2
    h[1, 1] = -(x * x) / d2
    h[0, 1] = h[1, 0] = -zz / d2
    h[0, 2:] = h[2:, 0] = 2.0 * y * z / d2
    h[1, 2:] = h[2:, 1] = 2.0 * x * z / d2
    h[2:, 2:] = (-2.0 * d / d2) * np.eye(n) - (4.0 / d2) * np.outer(z, z)
    return h


def log_q_hessian_batch(x: np.ndarray, y: np.ndarray, z: np.ndarray) -> np.ndarray:
    """Batched :func:`log_q_hessian`: x, y of shape (B,), z of shape (B, n)."""
    x = np.asarray(x, dtype=float)
    y = np.asarray(y, dtype=float)
    z = np.asarray(z, dtype=float)
    bsz, n = z.shape
    zz = np.sum(z * z, axis=-1)
    d = x * y - zz
    if np.any(x <= 0.0) or np.any(y <= 0.0) or np.any(d <= 0.0):
        raise ValueError("batch contains points outside the admissible cone")
    d2 = d * d
    h = np.empty((bsz, n + 2, n + 2))
    h[:, 0, 0] = -(y * y) / d2
    h[:, 1, 1] = -(x * x) / d2
    h[:, 0, 1] = h[:, 1, 0] = -zz / d2
    zx = 2.0 * z * (y / d2)[:, None]
    zy = 2.0 * z * (x / d2)[:, None]
    h[:, 0, 2:] = zx
    h[:, 2:, 0] = zx
    h[:, 1, 2:] = zy
    h[:, 2:, 1] = zy
    h[:, 2:, 2:] = (-2.0 * d / d2)[:, None, None] * np.eye(n) - (4.0 / d2)[
        :, None, None
    ] * np.einsum("bi,bj->bij", z, z)
    return h


# ---------------------------------------------------------------------------
# Midpoint concavity scans.
# ---------------------------------------------------------------------------


def _min_shift_into_cone(lams: np.ndarray, k: int, iters: int = 60) -> np.ndarray:
    """Per-row smallest s with spectrum lam + s inside Gamma_k^+, by bisection.

    The admissible set of shifts is an upward half-line, so the indicator is
    monotone and bisection applies. The upper bracket makes the spectrum
    positive definite, the lower bracket makes sigma_1 negative.
    """
    lams = np.asarray(lams, dtype=float)
    scale = 1.0 + np.max(np.abs(lams), axis=-1)
    lo = -np.mean(lams, axis=-1) - 1e-9 * scale
    hi = np.maximum(0.0, -np.min(lams, axis=-1)) + 1e-9 * scale
    for _ in range(iters):
        mid = 0.5 * (lo + hi)
        sig = _esym_all(lams + mid[..., None], k)
        inside = np.all(sig[..., 1 : k + 1] > 0.0, axis=-1)
        hi = np.where(inside, mid, hi)
        lo = np.where(inside, lo, mid)
    return hi


def _sample_cone_batch(rng: np.random.Generator, k: int, n: int, batch: int, hermitian: bool):
    """Draw a batch of cone-interior triples.

    Matrices are symmetrized standard normals shifted into Gamma_k^+ by the
    minimal identity multiple plus a log-uniform margin in [1e-2, 1], so the
    sample covers near-boundary regions while keeping enough slack that the
    scan's floating-point noise stays orders of magnitude below the violation
    threshold. z is drawn isotropically and rescaled to put the operator
    value at a uniform fraction theta in [0, 0.99) of r00 sigma_k.
    """
    if hermitian:
        m = rng.standard_normal((batch, n, n)) + 1j * rng.standard_normal((batch, n, n))
        r = 0.5 * (m + np.conj(np.swapaxes(m, -1, -2)))
    else:
        m = rng.standard_normal((batch, n, n))
        r = 0.5 * (m + np.swapaxes(m, -1, -2))
    lam, u = np.linalg.eigh(r)
    margin = 10.0 ** rng.uniform(-2.0, 0.0, batch)
    shift = _min_shift_into_cone(lam, k) + margin
    eye = np.eye(n)
    r = r + shift[:, None, None] * eye
    lam = lam + shift[:, None]
    r00 = np.exp(rng.normal(0.0, 0.7, batch))
    if hermitian:
        zdir = (rng.standard_normal((batch, n)) + 1j * rng.standard_normal((batch, n))) / math.sqrt(2.0)
    else:
        zdir = rng.standard_normal((batch, n))
    theta = rng.uniform(0.0, 0.99, batch)
    sig = _esym_all(lam, k)[..., k]
    w = np.einsum("bij,bj->bi", np.conj(np.swapaxes(u, -1, -2)), zdir)
    loo = _sigma_loo(lam, k - 1)
    t_form = np.sum(loo * (np.abs(w) ** 2), axis=-1)
    good = (sig > 0.0) & (t_form > 0.0) & np.isfinite(t_form)
    safe_t = np.where(good, t_form, 1.0)
    scale = np.sqrt(np.where(good, theta * r00 * sig / safe_t, 0.0))
    z = zdir * scale[:, None]
    f_val = _f_from_eig(r00, lam, u, z, k)
    f_val = np.real(f_val)
    good &= np.isfinite(f_val) & (f_val > 0.0)
    return r00, r, z, f_val, good


@dataclass
class ScanViolation:
    """Counterexample candidate from a midpoint scan, at full precision."""

    trial: int
    margin: float
    r00_left: float
    r00_right: float
    r_left: np.ndarray
    r_right: np.ndarray
    z_left: np.ndarray
    z_right: np.ndarray
    f_left: float
    f_right: float
    f_mid: float


@dataclass
class ScanReport:
    """Outcome of a midpoint concavity scan.

    ``margins`` holds log F(mid) - (log F(p) + log F(q)) / 2 per trial (nan
    where sampling failed, -inf where F(mid) <= 0). ``theorem_backed`` marks
    parameter pairs where the concavity is a theorem (k = 1 or k = n); other
    pairs are scanned as conjecture and never gate anything.
    """

    k: int
    n: int
    hermitian: bool
    trials: int
    seed: int
    threshold: float
    worst_margin: float
    worst_trial: int
    violation_count: int
    violations: list = field(default_factory=list)
    sampling_failures: int = 0
    margins: np.ndarray | None = None
    f_left: np.ndarray | None = None
    f_right: np.ndarray | None = None
    f_mid: np.ndarray | None = None

    @property
    def theorem_backed(self) -> bool:
        return self.k == 1 or self.k == self.n

    @property
    def variant(self) -> str:
        return "complex" if self.hermitian else "real"


_MAX_RECORDED_VIOLATIONS = 25


def midpoint_concavity_scan(
    k: int,
    n: int,
    trials: int,
    seed: int,
    hermitian: bool = False,
    batch_size: int = 4096,
    threshold: float = -1e-9,
) -> ScanReport:
    """Randomized midpoint log-concavity scan of F_k (or G_k) on the cone.

    For each trial, two independent cone-interior triples p, q are drawn and
    the margin log F(mid) - (log F(p) + log F(q)) / 2 is recorded for their
    average. Margins below ``threshold`` count as violations and the triples
    are kept at full precision (up to a fixed cap). The scan is deterministic
    for a fixed (k, n, trials, seed, hermitian, batch_size).
    """
    if not 1 <= k <= n:
        raise ValueError(f"k must satisfy 1 <= k <= {n}, got {k}")
    if trials < 0:
        raise ValueError(f"trials must be nonnegative, got {trials}")
    rng = np.random.default_rng(seed)
    margins = np.full(trials, np.nan)
    f_left = np.full(trials, np.nan)
    f_right = np.full(trials, np.nan)
    f_mid_all = np.full(trials, np.nan)
    violations: list[ScanViolation] = []
    failures = 0

    done = 0
    while done < trials:
        batch = min(batch_size, trials - done)
        r00p, rp, zp, fp, goodp = _sample_cone_batch(rng, k, n, batch, hermitian)
        r00q, rq, zq, fq, goodq = _sample_cone_batch(rng, k, n, batch, hermitian)
        r00m = 0.5 * (r00p + r00q)
        rm = 0.5 * (rp + rq)
        zm = 0.5 * (zp + zq)
        lam_m, u_m = np.linalg.eigh(rm)
        fm = np.real(_f_from_eig(r00m, lam_m, u_m, zm, k))
        good = goodp & goodq & np.isfinite(fm)
        failures += int(batch - np.count_nonzero(good))

        with np.errstate(divide="ignore", invalid="ignore"):
            batch_margin = np.where(
                good & (fm > 0.0),
                np.log(np.maximum(fm, 1e-300)) - 0.5 * (np.log(fp) + np.log(fq)),
                np.where(good, -np.inf, np.nan),
            )
        sl = slice(done, done + batch)
        margins[sl] = batch_margin
        f_left[sl] = np.where(goodp, fp, np.nan)
        f_right[sl] = np.where(goodq, fq, np.nan)
        f_mid_all[sl] = np.where(good, fm, np.nan)

        bad = np.nonzero(good & (batch_margin < threshold))[0]
        for idx in bad:
            if len(violations) >= _MAX_RECORDED_VIOLATIONS:
                break
            violations.append(
                ScanViolation(
                    trial=done + int(idx),
                    margin=float(batch_margin[idx]),
                    r00_left=float(r00p[idx]),
                    r00_right=float(r00q[idx]),
                    r_left=rp[idx].copy(),
                    r_right=rq[idx].copy(),
                    z_left=zp[idx].copy(),
                    z_right=zq[idx].copy(),
                    f_left=float(fp[idx]),
                    f_right=float(fq[idx]),
                    f_mid=float(fm[idx]),
                )
            )
        done += batch

    finite = np.isfinite(margins) | np.isneginf(margins)
    if np.any(finite):
        masked = np.where(finite, margins, np.inf)
        worst_trial = int(np.argmin(masked))
        worst_margin = float(masked[worst_trial])
    else:
        worst_trial = -1
        worst_margin = math.nan
    violation_count = int(np.count_nonzero(finite & (margins < threshold)))
    return ScanReport(
        k=k,
        n=n,
        hermitian=hermitian,
        trials=trials,
        seed=seed,
        threshold=threshold,
        worst_margin=worst_margin,
        worst_trial=worst_trial,
        violation_count=violation_count,
        violations=violations,
        sampling_failures=failures,
        margins=margins,
        f_left=f_left,
        f_right=f_right,
        f_mid=f_mid_all,
    )


def write_scan_records(report: ScanReport, path) -> None:
    """Line-delimited per-trial records of a scan."""
    with open(path, "w") as fh:
        fh.write("trial,k,n,variant,margin,f_left,f_right,f_mid\n")
        for i in range(report.trials):
            fh.write(
                f"{i},{report.k},{report.n},{report.variant},"
                f"{report.margins[i]:.17g},{report.f_left[i]:.17g},"
                f"{report.f_right[i]:.17g},{report.f_mid[i]:.17g}\n"
            )


def write_counterexamples(report: ScanReport, path) -> None:
    """Full-precision dump of recorded violations (empty file when none)."""
    with open(path, "w") as fh:
        fh.write(
            f"# scan k={report.k} n={report.n} variant={report.variant} "
            f"seed={report.seed} trials={report.trials} threshold={report.threshold:.17g}\n"
        )
        for v in report.violations:
            fh.write(f"trial = {v.trial}\n")
            fh.write(f"margin = {v.margin:.17g}\n")
            fh.write(f"r00_left = {v.r00_left!r}\n")
            fh.write(f"r00_right = {v.r00_right!r}\n")
            fh.write(f"R_left = {v.r_left.tolist()!r}\n")
            fh.write(f"R_right = {v.r_right.tolist()!r}\n")
            fh.write(f"z_left = {v.z_left.tolist()!r}\n")
            fh.write(f"z_right = {v.z_right.tolist()!r}\n")
            fh.write(f"F_left = {v.f_left!r}\n")
            fh.write(f"F_right = {v.f_right!r}\n")
            fh.write(f"F_mid = {v.f_mid!r}\n")
            fh.write("\n")


# ---------------------------------------------------------------------------
# Segment comparison checks (k = 1 specialization).
# ---------------------------------------------------------------------------


def _q_value(point) -> float:
    return float(point.r00 * np.real(np.trace(point.R)) - np.sum(np.abs(point.z) ** 2))


def equalize_value(a: ConePoint, b: ConePoint) -> ConePoint:
    """Scale b so that its Q value matches Q(a); Q scales quadratically."""
    qa = _q_value(a)
    qb = _q_value(b)
    if qa <= 0.0 or qb <= 0.0:
        raise ValueError(f"both points must have positive Q values, got {qa!r} and {qb!r}")
    lam = math.sqrt(qa / qb)
    return ConePoint(lam * b.r00, lam * b.R, lam * b.z)


@dataclass
class ComparisonReport:
    """Segment and difference comparison for one equalized pair.

    ``worst_segment_margin`` is the minimum of Q(s A + (1-s) B) - Q(A) over
    the sampled segment (should be >= -tol scaled); ``diff_value`` is
    Q(A - B) (should be <= tol scaled).
    """

    ok: bool
    value_a: float
    value_b: float
    worst_segment_margin: float
    diff_value: float
    tol: float


def comparison_check(a: ConePoint, b: ConePoint, s_samples: int = 11, tol: float = 1e-10) -> ComparisonReport:
    """Check the two segment inequalities for an equalized admissible pair.

    Requires r00 > 0 and Q > 0 for both points and |Q(A) - Q(B)| below an
    equalization tolerance; use :func:`equalize_value` first. Along the
    segment the value Q(s A + (1 - s) B) must not drop below the common
    value, and the difference point A - B must have a nonpositive value.
    """
    if a.r00 <= 0.0 or b.r00 <= 0.0:
        raise ValueError("comparison_check requires r00 > 0 for both points")
    qa = _q_value(a)
    qb = _q_value(b)
    scale = max(1.0, abs(qa), abs(qb))
    if qa <= 0.0 or qb <= 0.0:
        raise ValueError(f"comparison_check requires positive values, got {qa!r} and {qb!r}")
    if abs(qa - qb) > 1e-8 * scale:
        raise ValueError(f"points are not equalized: Q(A)={qa!r}, Q(B)={qb!r}")
    if s_samples < 2:
        raise ValueError("s_samples must be at least 2")
    svals = np.linspace(0.0, 1.0, s_samples)
    worst = math.inf
    for s in svals:
        combo = ConePoint(
            s * a.r00 + (1.0 - s) * b.r00,
            s * a.R + (1.0 - s) * b.R,
            s * a.z + (1.0 - s) * b.z,
        )
        worst = min(worst, _q_value(combo) - qa)
    diff = ConePoint(a.r00 - b.r00, a.R - b.R, a.z - b.z)
    qdiff = _q_value(diff)
    ok = worst >= -tol * scale and qdiff <= tol * scale
    return ComparisonReport(
        ok=ok,
        value_a=qa,
        value_b=qb,
        worst_segment_margin=worst,
        diff_value=qdiff,
        tol=tol,
    )


@dataclass
class ComparisonScanReport:
    """Batched segment comparison over random equalized pairs."""

    n: int
    pairs: int
    seed: int
    s_samples: int
    tol: float
    worst_segment_margin: float
    worst_diff_value: float
    violation_count: int


def comparison_scan(
    n: int, pairs: int, seed: int, s_samples: int = 11, tol: float = 1e-10
) -> ComparisonScanReport:
    """Randomized battery of :func:`comparison_check` on equalized pairs.

    Points are sampled as triples (r00, trace, z) with the value held at a
    uniform positive fraction of r00 * trace, then the second point of each
    pair is rescaled to equalize values. Deterministic for fixed inputs.
    """
    if pairs < 0:
        raise ValueError(f"pairs must be nonnegative, got {pairs}")
    rng = np.random.default_rng(seed)
    r00 = np.exp(rng.normal(0.0, 0.5, (2, pairs)))
    tr = np.exp(rng.normal(0.0, 0.5, (2, pairs)))
    zdir = rng.standard_normal((2, pairs, n))
    theta = rng.uniform(0.0, 0.95, (2, pairs))
    znorm2 = np.sum(zdir * zdir, axis=-1)
    target = theta * r00 * tr
    z = zdir * np.sqrt(np.where(znorm2 > 0.0, target / np.maximum(znorm2, 1e-300), 0.0))[..., None]
    q = r00 * tr - np.sum(z * z, axis=-1)

    lam = np.sqrt(q[0] / q[1])
    r00[1] *= lam
    tr[1] *= lam
    z[1] *= lam[:, None]
    qa = q[0]

    svals = np.linspace(0.0, 1.0, s_samples)
    worst_margin = math.inf
    violations = 0
    if pairs:
        scale = np.maximum(1.0, np.abs(qa))
        seg_bad = np.zeros(pairs, dtype=bool)
        for s in svals:
            r00_s = s * r00[0] + (1.0 - s) * r00[1]
            tr_s = s * tr[0] + (1.0 - s) * tr[1]
            z_s = s * z[0] + (1.0 - s) * z[1]
            q_s = r00_s * tr_s - np.sum(z_s * z_s, axis=-1)
            worst_margin = min(worst_margin, float(np.min(q_s - qa)))
            seg_bad |= q_s - qa < -tol * scale
        q_d = (r00[0] - r00[1]) * (tr[0] - tr[1]) - np.sum((z[0] - z[1]) ** 2, axis=-1)
        worst_diff = float(np.max(q_d))
        violations = int(np.count_nonzero(seg_bad | (q_d > tol * scale)))
    else:
        worst_diff = math.nan
    return ComparisonScanReport(
        n=n,
        pairs=pairs,
        seed=seed,
        s_samples=s_samples,
        tol=tol,
        worst_segment_margin=worst_margin if pairs else math.nan,
        worst_diff_value=worst_diff,
        violation_count=violations,
    )
