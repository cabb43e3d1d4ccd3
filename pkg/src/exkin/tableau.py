"""Explicit Runge-Kutta tableaux, exponential coefficient functions, and
numerical certificates for the scheme properties (contractivity, equilibrium
projection, convexity).

The integrators in :mod:`exkin.exprk` are built on top of an underlying
explicit method.  For an integrating-factor (IF) scheme the lambda-dependent
coefficients are ``A_ij(lam) = a_ij * exp(-(c_i - c_j) * lam)`` and
``W_i(lam) = w_i * exp(-(1 - c_i) * lam)``; at ``lam = 0`` they reduce to the
underlying tableau.  The one-step amplification bound in the quadratic
Fourier metric is

    R(lam) = exp(-lam) + sum_k lam**(k+1) * |W|^T |A|^k E |1>,

with ``E = diag(exp(-c_i * lam))``.  The certificate checks probe this bound
on a grid and, where available, evaluate the analytic sufficient conditions.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field

import numpy as np

__all__ = [
    "ButcherTableau",
    "SchemeSpec",
    "Certificate",
    "ContractivityCheck",
    "ApCheck",
    "ConvexityCheck",
    "make_underlying",
    "tableau_from_config",
    "parse_scheme",
    "if_coeff",
    "stability_function",
    "check_contractive",
    "check_ap",
    "check_convex_if",
    "certify",
]

# Absolute slack used by every pass/fail comparison; double precision
# evaluation of the exponentials cannot do better.
TOL = 1e-12

UNDERLYING_NAMES = ("euler", "midpoint", "heun3", "rk4")
SCHEME_NAMES = ("euler-if", "midpoint-if", "heun3-if", "rk4-if", "etd1", "tr{m}")


@dataclass(frozen=True)
class ButcherTableau:
    """Coefficients of an explicit Runge-Kutta method.

    Attributes:
        a: strictly lower triangular (stages x stages) coefficient matrix.
        w: weight vector.
        c: abscissae, with c[0] == 0 and c[i] == sum(a[i, :]).
        name: optional identifier for reports.
    """

    a: np.ndarray
    w: np.ndarray
    c: np.ndarray
    name: str = ""

    def __post_init__(self):
        a = np.atleast_2d(np.asarray(self.a, dtype=float))
        w = np.asarray(self.w, dtype=float).ravel()
        c = np.asarray(self.c, dtype=float).ravel()
        nu = w.size
        if a.shape != (nu, nu) or c.size != nu or nu < 1:
            raise ValueError(f"inconsistent tableau shapes: a {a.shape}, w {w.shape}, c {c.shape}")
        if np.any(np.triu(a) != 0.0):
            raise ValueError("tableau must be strictly lower triangular (explicit method)")
        if c[0] != 0.0:
            raise ValueError("first abscissa must be 0")
        if not np.allclose(a.sum(axis=1), c, atol=1e-13):
            raise ValueError("abscissae must equal the row sums of a")
        object.__setattr__(self, "a", a)
        object.__setattr__(self, "w", w)
        object.__setattr__(self, "c", c)

    @property
    def stages(self) -> int:
        return self.w.size

    @property
    def consistent(self) -> bool:
        """True when the weights sum to one (first-order consistency)."""
        return abs(self.w.sum() - 1.0) <= 1e-13

    @property
    def nonnegative(self) -> bool:
        return bool(np.all(self.a >= 0.0) and np.all(self.w >= 0.0))

    def require_consistent(self) -> "ButcherTableau":
        if not self.consistent:
            raise ValueError(f"weights sum to {self.w.sum()}, expected 1")
        return self


@dataclass(frozen=True)
class SchemeSpec:
    """An exponential scheme: underlying tableau plus coefficient family.

    ``family`` is one of ``"if"``, ``"etd1"``, ``"tr"``.  The single-stage
    families (etd1, tr) are only defined over the Euler tableau; ``tr``
    additionally carries the truncation order ``tr_order``.
    """

    tableau: ButcherTableau
    family: str = "if"
    tr_order: int | None = None
    name: str = ""

    def __post_init__(self):
        if self.family not in ("if", "etd1", "tr"):
            raise ValueError(f"unknown scheme family {self.family!r}")
        if self.family in ("etd1", "tr") and self.tableau.stages != 1:
            raise ValueError(f"{self.family} schemes are defined over the 1-stage Euler tableau only")
        if self.family == "tr":
            if self.tr_order is None or not (1 <= int(self.tr_order) <= 16):
                raise ValueError("tr truncation order must be an integer in 1..16")
        elif self.tr_order is not None:
            raise ValueError("tr_order is only meaningful for the tr family")
        if not self.name:
            object.__setattr__(self, "name", self._default_name())

    def _default_name(self) -> str:
        if self.family == "if":
            base = self.tableau.name or f"{self.tableau.stages}stage"
            return f"{base}-if"
        if self.family == "etd1":
            return "etd1"
        return f"tr{self.tr_order}"


def make_underlying(name: str) -> ButcherTableau:
    """Return one of the built-in explicit tableaux.

    Supported names: euler, midpoint (the w=1 member of the two-stage
    second-order family), heun3, rk4 (classical).
    """
    if name == "euler":
        return ButcherTableau(a=np.zeros((1, 1)), w=[1.0], c=[0.0], name="euler")
    if name == "midpoint":
        a = np.zeros((2, 2))
        a[1, 0] = 0.5
        return ButcherTableau(a=a, w=[0.0, 1.0], c=[0.0, 0.5], name="midpoint")
    if name == "heun3":
        a = np.zeros((3, 3))
        a[1, 0] = 1.0 / 3.0
        a[2, 1] = 2.0 / 3.0
        return ButcherTableau(a=a, w=[0.25, 0.0, 0.75], c=[0.0, 1.0 / 3.0, 2.0 / 3.0], name="heun3")
    if name == "rk4":
        a = np.zeros((4, 4))
        a[1, 0] = 0.5
        a[2, 1] = 0.5
        a[3, 2] = 1.0
        return ButcherTableau(
            a=a,
            w=[1.0 / 6.0, 1.0 / 3.0, 1.0 / 3.0, 1.0 / 6.0],
            c=[0.0, 0.5, 0.5, 1.0],
            name="rk4",
        )
    raise ValueError(f"unknown underlying method {name!r}; expected one of {UNDERLYING_NAMES}")


def tableau_from_config(block: dict) -> ButcherTableau:
    """Build a tableau from a config block.

    Keys: ``stages``, ``a`` (row-major lower triangle, ``stages*(stages-1)/2``
    entries), ``w``, ``c``.
    """
    try:
        nu = int(block["stages"])
        lower = [float(x) for x in block.get("a", [])]
        w = [float(x) for x in block["w"]]
        c = [float(x) for x in block["c"]]
    except (KeyError, TypeError, ValueError) as exc:
        raise ValueError(f"invalid tableau config block: {exc}") from exc
    if len(lower) != nu * (nu - 1) // 2:
        raise ValueError(f"expected {nu * (nu - 1) // 2} lower-triangle entries, got {len(lower)}")
    a = np.zeros((nu, nu))
    pos = 0
    for i in range(1, nu):
        a[i, :i] = lower[pos : pos + i]
        pos += i
    return ButcherTableau(a=a, w=w, c=c, name=str(block.get("name", "custom")))


def parse_scheme(name: str) -> SchemeSpec:
    """Parse a scheme name: euler-if | midpoint-if | heun3-if | rk4-if | etd1 | tr{m}."""
    key = name.strip().lower()
    if key.endswith("-if"):
        return SchemeSpec(make_underlying(key[:-3]), family="if")
    if key == "etd1":
        return SchemeSpec(make_underlying("euler"), family="etd1")
    if key.startswith("tr") and key[2:].isdigit():
        return SchemeSpec(make_underlying("euler"), family="tr", tr_order=int(key[2:]))
    raise ValueError(f"unknown scheme {name!r}; expected one of {SCHEME_NAMES}")


def if_coeff(spec: SchemeSpec | ButcherTableau, lam: float) -> tuple[np.ndarray, np.ndarray]:
    """Integrating-factor coefficient functions (A(lam), W(lam)).

    ``A_ij(lam) = a_ij * exp(-(c_i - c_j) lam)`` for i > j and
    ``W_i(lam) = w_i * exp(-(1 - c_i) lam)``.  At lam = 0 these equal the
    underlying tableau.
    """
    if lam < 0:
        raise ValueError(f"lam must be nonnegative, got {lam}")
    tab = spec.tableau if isinstance(spec, SchemeSpec) else spec
    if isinstance(spec, SchemeSpec) and spec.family != "if":
        raise ValueError(f"if_coeff is defined for the IF family, not {spec.family!r}")
    c = tab.c
    lower = np.tril(np.ones((tab.stages, tab.stages), dtype=bool), k=-1)
    expo = np.where(lower, -np.subtract.outer(c, c) * lam, -np.inf)
    big_a = tab.a * np.exp(expo)
    big_w = tab.w * np.exp(-(1.0 - c) * lam)
    return big_a, big_w


def _coeff_functions(spec: SchemeSpec, lam: float) -> tuple[np.ndarray, np.ndarray]:
    """Stage/update coefficient functions for the families covered by the
    generic amplification formula (IF and etd1)."""
    if spec.family == "if":
        return if_coeff(spec, lam)
    if spec.family == "etd1":
        from .exprk import phi  # local import: exprk depends on tableau

        return np.zeros((1, 1)), np.array([phi(lam)])
    raise ValueError("tr schemes have no stage coefficient functions")


def stability_function(spec: SchemeSpec, lam: float) -> float:
    """One-step contraction bound R(lam) of the scheme.

    For IF and etd1 this is the generic bound built from the absolute
    coefficient functions; tr schemes use their closed form, the total
    weight of the non-equilibrium terms.
    """
    if lam < 0:
        raise ValueError(f"lam must be nonnegative, got {lam}")
    if spec.family == "tr":
        tau = -np.expm1(-lam)
        return float(1.0 - tau ** (spec.tr_order + 1))
    big_a, big_w = _coeff_functions(spec, lam)
    nu = spec.tableau.stages
    abs_a = np.abs(big_a)
    abs_w = np.abs(big_w)
    decay = np.exp(-spec.tableau.c * lam)
    acc = 0.0
    vec = decay.copy()  # |A|^k E 1, accumulated by repeated application
    for k in range(nu):
        acc += lam ** (k + 1) * float(abs_w @ vec)
        vec = abs_a @ vec
    return float(np.exp(-lam) + acc)


def stability_function_if_closed(tableau: ButcherTableau, lam: float) -> float:
    """Closed form of R(lam) for IF schemes: exp(-lam) times the polynomial
    with coefficients |w|^T |a|^k 1.  Used as an independent cross-check of
    :func:`stability_function`."""
    abs_a = np.abs(tableau.a)
    abs_w = np.abs(tableau.w)
    ones = np.ones(tableau.stages)
    poly = 1.0
    vec = ones.copy()
    for k in range(tableau.stages):
        poly += lam ** (k + 1) * float(abs_w @ vec)
        vec = abs_a @ vec
    return float(np.exp(-lam) * poly)


def _probe_grid(lam_max: float, n_probe: int) -> np.ndarray:
    if lam_max <= 0 or n_probe < 2:
        raise ValueError("need lam_max > 0 and n_probe >= 2")
    grid = np.geomspace(1e-6, lam_max, n_probe)
    return np.concatenate(([0.0], grid))


@dataclass
class ContractivityCheck:
    passed: bool
    sup_value: float
    sup_lam: float
    samples: list[tuple[float, float]]
    analytic_condition: bool | None = None  # |w|^T|a|^k 1 <= 1/(k+1)!  (IF, nonnegative tableau)
    first_violation: str | None = None


@dataclass
class ApCheck:
    ap: bool
    strong_ap: bool
    limit_value: float  # closed-form limit of R
    tail_value: float  # R at the probe endpoint
    abscissae_bounded: bool  # 0 = c1 <= c2 <= ... <= c_nu <= 1
    abscissae_strict: bool  # 0 = c1 < c2 < ... < c_nu < 1
    note: str = ""


@dataclass
class ConvexityCheck:
    convex: bool
    first_violation: str | None = None
    k_max: int = 0


@dataclass
class Certificate:
    """Aggregated scheme certificate.

    ``contractive`` implies ``sup_R <= 1 + 1e-12`` on the probe grid.
    ``diagnostics`` holds (lam, R(lam)) samples and the first violated
    condition, when any check failed.
    """

    scheme: str
    contractive: bool
    sup_R: float
    ap: bool
    strong_ap: bool
    convex: bool
    diagnostics: dict = field(default_factory=dict)

    def to_dict(self) -> dict:
        return {
            "scheme": self.scheme,
            "contractive": self.contractive,
            "sup_R": self.sup_R,
            "ap": self.ap,
            "strong_ap": self.strong_ap,
            "convex": self.convex,
            "diagnostics": self.diagnostics,
        }

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), indent=2, sort_keys=True)


def check_contractive(spec: SchemeSpec, lam_max: float = 200.0, n_probe: int = 64) -> ContractivityCheck:
    """Probe R(lam) on a geometric grid (plus lam = 0) and compare against 1.

    For IF schemes over a nonnegative tableau the analytic sufficient
    condition ``w^T a^k 1 <= 1/(k+1)!`` is evaluated as well.
    """
    grid = _probe_grid(lam_max, n_probe)
    values = np.array([stability_function(spec, lam) for lam in grid])
    imax = int(np.argmax(values))
    passed = values[imax] <= 1.0 + TOL
    first_violation = None
    if not passed:
        ibad = int(np.argmax(values > 1.0 + TOL))
        first_violation = f"R({grid[ibad]:.6g}) = {values[ibad]:.12g} > 1"
    analytic = None
    if spec.family == "if" and spec.tableau.nonnegative:
        analytic = True
        vec = np.ones(spec.tableau.stages)
        fact = 1.0
        for k in range(spec.tableau.stages):
            fact *= k + 1
            if float(spec.tableau.w @ vec) > 1.0 / fact + TOL:
                analytic = False
                break
            vec = spec.tableau.a @ vec
    step = max(1, len(grid) // 16)
    samples = [(float(l), float(r)) for l, r in zip(grid[::step], values[::step])]
    return ContractivityCheck(
        passed=bool(passed),
        sup_value=float(values[imax]),
        sup_lam=float(grid[imax]),
        samples=samples,
        analytic_condition=analytic,
        first_violation=first_violation,
    )


def check_ap(spec: SchemeSpec, lam_max: float = 200.0) -> ApCheck:
    """Equilibrium-projection checks.

    ``ap`` requires R(lam) -> 0: the closed-form family limit must vanish and
    the probed tail value must be below 1e-10.  IF schemes additionally need
    bounded coefficient functions, i.e. 0 = c1 <= ... <= c_nu <= 1.
    ``strong_ap`` (every stage projected, without using the structure of the
    gain operator) additionally requires the strict chain
    0 = c1 < c2 < ... < c_nu < 1.
    """
    c = spec.tableau.c
    bounded = bool(c[0] == 0.0 and np.all(np.diff(c) >= 0.0) and c[-1] <= 1.0)
    strict = bool(c[0] == 0.0 and np.all(np.diff(c) > 0.0) and c[-1] < 1.0)
    note = ""
    if spec.family == "if":
        limit = 0.0  # exp(-lam) times a polynomial
        ap = bounded and stability_function(spec, lam_max) < 1e-10
        if not bounded:
            note = "abscissae leave [0, 1] or decrease; coefficient functions unbounded"
    elif spec.family == "etd1":
        limit = 1.0  # exp(-lam) + lam*phi(lam) -> 1; equilibrium weight identically 0
        ap = False
        note = "equilibrium weight 1 - exp(-lam) - lam*W1(lam) is identically zero"
    else:  # tr
        limit = 0.0  # 1 - (1 - exp(-lam))**(m+1) -> 0
        ap = stability_function(spec, lam_max) < 1e-10
    tail = stability_function(spec, lam_max)
    return ApCheck(
        ap=bool(ap),
        strong_ap=bool(ap and strict),
        limit_value=limit,
        tail_value=float(tail),
        abscissae_bounded=bounded,
        abscissae_strict=strict,
        note=note,
    )


def check_convex_if(tableau: ButcherTableau, k_max: int = 64, lam_max: float = 200.0, n_probe: int = 64) -> ConvexityCheck:
    """Convexity certificate for an IF scheme over ``tableau``.

    Both checks are required: the Taylor-coefficient conditions

        sum_j a_ij c_j**k <= c_i**k / (k+1),   sum_i w_i c_i**k <= 1 / (k+1)

    for k = 0..k_max, and the exponential-form inequalities

        sum_j a_ij exp(c_j lam) <= (exp(c_i lam) - 1) / lam,
        sum_i w_i exp(c_i lam) <= (exp(lam) - 1) / lam

    on the probe grid (the grid guards large-lam behavior the truncated k
    test can miss).  A tableau with negative entries fails immediately.
    """
    if k_max < 32:
        raise ValueError("k_max must be at least 32")
    if not tableau.nonnegative:
        return ConvexityCheck(convex=False, first_violation="negative tableau entries", k_max=k_max)
    a, w, c = tableau.a, tableau.w, tableau.c
    # 0**0 = 1 convention for the k = 0 terms.
    for k in range(k_max + 1):
        ck = np.ones_like(c) if k == 0 else c**k
        lhs_rows = a @ ck
        rhs_rows = ck / (k + 1)
        if np.any(lhs_rows > rhs_rows + TOL):
            i = int(np.argmax(lhs_rows - rhs_rows))
            return ConvexityCheck(
                convex=False,
                first_violation=f"stage condition: row {i + 1}, k = {k}: {lhs_rows[i]:.12g} > {rhs_rows[i]:.12g}",
                k_max=k_max,
            )
        lhs_w = float(w @ ck)
        if lhs_w > 1.0 / (k + 1) + TOL:
            return ConvexityCheck(
                convex=False,
                first_violation=f"weight condition: k = {k}: {lhs_w:.12g} > {1.0 / (k + 1):.12g}",
                k_max=k_max,
            )
    for lam in np.geomspace(1e-6, lam_max, n_probe):
        grow = np.exp(c * lam)
        lhs_rows = a @ grow
        rhs_rows = np.expm1(c * lam) / lam  # expm1 avoids cancellation at small lam
        if np.any(lhs_rows > rhs_rows + TOL):
            i = int(np.argmax(lhs_rows - rhs_rows))
            return ConvexityCheck(
                convex=False,
                first_violation=f"stage grid condition: row {i + 1}, lam = {lam:.6g}",
                k_max=k_max,
            )
        if float(w @ grow) > np.expm1(lam) / lam + TOL:
            return ConvexityCheck(
                convex=False,
                first_violation=f"weight grid condition: lam = {lam:.6g}",
                k_max=k_max,
            )
    return ConvexityCheck(convex=True, k_max=k_max)


def certify(spec: SchemeSpec, lam_max: float = 200.0, n_probe: int = 64, k_max: int = 64) -> Certificate:
    """Run all certificate checks for a scheme and aggregate the results."""
    contr = check_contractive(spec, lam_max=lam_max, n_probe=n_probe)
    ap = check_ap(spec, lam_max=lam_max)
    if spec.family == "if":
        conv = check_convex_if(spec.tableau, k_max=k_max, lam_max=lam_max, n_probe=n_probe)
        convex = conv.convex
        conv_violation = conv.first_violation
    else:
        # Single-stage etd1/tr updates are convex combinations of densities
        # by construction: nonnegative weights summing to one.
        convex = True
        conv_violation = None
    violations = [v for v in (contr.first_violation, conv_violation) if v]
    diagnostics = {
        "samples": contr.samples,
        "sup_lam": contr.sup_lam,
        "analytic_contractivity_condition": contr.analytic_condition,
        "stability_limit": ap.limit_value,
        "stability_tail": ap.tail_value,
        "abscissae_bounded": ap.abscissae_bounded,
        "abscissae_strict": ap.abscissae_strict,
        "first_violation": violations[0] if violations else None,
    }
    if ap.note:
        diagnostics["note"] = ap.note
    return Certificate(
        scheme=spec.name,
        contractive=contr.passed,
        sup_R=contr.sup_value,
        ap=ap.ap,
        strong_ap=ap.strong_ap,
        convex=convex,
        diagnostics=diagnostics,
    )
