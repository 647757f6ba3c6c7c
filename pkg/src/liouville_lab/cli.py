"""Batch driver: ``construct | growth | energy | stability | report``.

Every command writes CSV files (first line ``# schema=1``) into ``--out``
plus a ``verdicts_<command>.csv`` file consumed by ``report``.  Exit codes:
0 when every claim passes, 1 on a claim failure, 2 on a configuration error.
"""

from __future__ import annotations

import argparse
import csv
import io
import math
import os
import sys
import tempfile
from dataclasses import dataclass, fields, replace
from pathlib import Path

import numpy as np

from .energy import (cutoff_constant, deficit_bound_check, energy_ledgers,
                     geometric_radii, growth_series, holder_constant,
                     lower_bound_from_quotients, modica_check)
from .fields import (constant_field, counterexample, divergence_residual, flux,
                     lift_1d, nested_flux, observed_order)
from .profile import (BracketError, Profile, allen_cahn_potential,
                      hypothesis_H_constant, kink, snoidal_wave)
from .quadrature import QuadratureError, QuadratureSpec
from .stability import (lemma_identity_gap, lemma_inequality,
                        quadratic_form_Q, random_test_functions, smooth_cutoff)

SCHEMA = "# schema=1"
EXIT_OK, EXIT_CLAIM, EXIT_CONFIG = 0, 1, 2
PASS, FAIL, INFO = "PASS", "FAIL", "INFO"

# claim keys in report order
CLAIMS = [
    ("growth_optimality", "nonconstant sigma, div(phi^2 grad sigma)=0, growth <= C R^k"),
    ("modica_bound", "|grad u|^2/2 <= G(u)"),
    ("monotonicity", "Phi(R) nondecreasing"),
    ("stability_identity", "Q(sqrt(G(u)) mu) identity and stability criterion"),
    ("dirichlet_lower_bound", "integral of |grad u|^2 over B_R >= c R^(N-1)"),
    ("energy_ratio", "Dirichlet / potential energy -> 1"),
    ("weighted_deficit_bound", "weighted deficit <= C1 R^(N-2)"),
    ("deficit_bound", "deficit <= C2 R^(N-4/3)"),
]
REQUIRED = {
    "growth": ["growth.csv", "verdicts_growth.csv"],
    "energy": ["energy.csv", "verdicts_energy.csv"],
    "stability": ["stability.csv", "verdicts_stability.csv"],
}


class ConfigError(ValueError):
    pass


class MissingInputs(FileNotFoundError):
    pass


@dataclass(frozen=True)
class RunConfig:
    dimension: int = 2
    k: float = 3.0
    radii_min: float = 1.0
    radii_max: float = 128.0
    radii_ratio: float = math.sqrt(2.0)
    quad_radial: int = 16
    quad_angular: int = 32
    quad_tol: float = 1e-10
    tol_bridge: float = 1e-10
    tol_identity: float = 1e-6
    tol_divergence: float = 1e-8
    fd_step: float = 1e-3
    seed: int = 42
    mode: str = "auto"
    corpus_size: int = 20

    def validate(self) -> "RunConfig":
        if not 1 <= self.dimension <= 8:
            raise ConfigError(f"dimension must be in [1, 8] (got {self.dimension})")
        if not self.k > 2:
            raise ConfigError(f"k must satisfy k > 2 (got k={self.k})")
        if self.mode not in ("ball", "slab", "auto"):
            raise ConfigError(f"mode must be ball, slab or auto (got {self.mode!r})")
        if self.mode == "ball" and self.dimension > 3:
            raise ConfigError("ball mode requires dimension <= 3")
        if not (0 < self.radii_min <= self.radii_max and self.radii_ratio > 1):
            raise ConfigError("radii need 0 < min <= max and ratio > 1")
        for name in ("quad_tol", "tol_bridge", "tol_identity", "tol_divergence", "fd_step"):
            if not getattr(self, name) > 0:
                raise ConfigError(f"{name.replace('_', '.', 1)} must be positive")
        if self.quad_radial < 2 or self.quad_angular < 2:
            raise ConfigError("quadrature orders must be >= 2")
        if self.corpus_size < 1:
            raise ConfigError("corpus.size must be >= 1")
        return self

    @property
    def resolved_mode(self) -> str:
        if self.mode == "auto":
            return "ball" if self.dimension <= 3 else "slab"
        return self.mode

    @property
    def radii(self) -> np.ndarray:
        return geometric_radii(self.radii_min, self.radii_max, self.radii_ratio)

    @property
    def quad(self) -> QuadratureSpec:
        return QuadratureSpec(radial_order=self.quad_radial,
                              angular_order=self.quad_angular, tol=self.quad_tol)


# file key -> (attribute, parser)
CONFIG_KEYS = {
    "dimension": ("dimension", int),
    "k": ("k", float),
    "radii.min": ("radii_min", float),
    "radii.max": ("radii_max", float),
    "radii.ratio": ("radii_ratio", float),
    "quad.radial": ("quad_radial", int),
    "quad.angular": ("quad_angular", int),
    "quad.tol": ("quad_tol", float),
    "tol.bridge": ("tol_bridge", float),
    "tol.identity": ("tol_identity", float),
    "tol.divergence": ("tol_divergence", float),
    "fd.step": ("fd_step", float),
    "seed": ("seed", int),
    "mode": ("mode", str),
    "corpus.size": ("corpus_size", int),
}


def parse_config_text(text: str) -> dict:
    """Flat ``key = value`` lines; ``#`` starts a comment."""
    out = {}
    for lineno, raw in enumerate(text.splitlines(), 1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ConfigError(f"line {lineno}: expected 'key = value'")
        key, value = (s.strip() for s in line.split("=", 1))
        if key not in CONFIG_KEYS:
            raise ConfigError(f"line {lineno}: unknown key {key!r}")
        attr, conv = CONFIG_KEYS[key]
        try:
            out[attr] = conv(value)
        except ValueError:
            raise ConfigError(f"line {lineno}: bad value {value!r} for {key}") from None
    return out


def load_config(path: str | None, overrides: dict) -> RunConfig:
    values = {}
    if path is not None:
        try:
            values.update(parse_config_text(Path(path).read_text()))
        except OSError as exc:
            raise ConfigError(f"cannot read config {path}: {exc}") from None
    values.update({k: v for k, v in overrides.items() if v is not None})
    return RunConfig(**values).validate()


# -- output helpers ----------------------------------------------------------------

def fmt(x) -> str:
    if isinstance(x, (bool, np.bool_)):
        return str(bool(x)).lower()
    if isinstance(x, (int, np.integer)):
        return str(int(x))
    if isinstance(x, (float, np.floating)):
        return repr(float(x))
    return str(x)


def write_csv(path: Path, header: list[str], rows, comments: list[str] = ()):
    """Write atomically: temp file in the same directory, then rename."""
    buf = io.StringIO()
    buf.write(SCHEMA + "\n")
    for c in comments:
        buf.write(f"# {c}\n")
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(header)
    for row in rows:
        w.writerow([fmt(x) for x in row])
    path.parent.mkdir(parents=True, exist_ok=True)
    fd, tmp = tempfile.mkstemp(dir=path.parent, prefix=f".{path.name}.")
    with os.fdopen(fd, "w", newline="") as fh:
        fh.write(buf.getvalue())
    os.replace(tmp, path)


def read_csv(path: Path) -> tuple[list[str], list[dict]]:
    lines = path.read_text().splitlines()
    comments = [ln[1:].strip() for ln in lines if ln.startswith("#")]
    body = [ln for ln in lines if not ln.startswith("#")]
    return comments, list(csv.DictReader(body))


def write_verdicts(out: Path, command: str, verdicts):
    write_csv(out / f"verdicts_{command}.csv", ["claim", "status", "figure", "detail"],
              verdicts)


def status(ok: bool) -> str:
    return PASS if ok else FAIL


def _print_verdicts(verdicts):
    for claim, st, figure, detail in verdicts:
        print(f"  [{st}] {claim}: {detail} ({fmt(figure)})")


def _exit_code(verdicts) -> int:
    return EXIT_CLAIM if any(v[1] == FAIL for v in verdicts) else EXIT_OK


def ball_points(N: int, count: int, radius: float, rng) -> np.ndarray:
    """Uniform random points in B_radius."""
    d = rng.normal(size=(count, N))
    d /= np.linalg.norm(d, axis=1)[:, None]
    return d * radius * rng.uniform(size=(count, 1)) ** (1.0 / N)


# -- commands ----------------------------------------------------------------------

def cmd_construct(cfg: RunConfig, out: Path, args) -> int:
    profile = Profile.build(cfg.k, cfg.tol_bridge)
    t = np.linspace(-5.0, 5.0, 401)
    write_csv(out / "profile.csv", ["t", "g", "g_prime"],
              zip(t, profile.g(t), profile.g_prime(t)),
              [f"k={fmt(cfg.k)} A={fmt(profile.A)}"])
    print(f"bridge amplitude A* = {profile.A!r}")
    print(f"bridge residual     = {profile.bridge_residual!r}")
    print(f"C1 = 8/(k(k-2))     = {profile.C1!r}")
    print(f"C2 = 8*int_0^1 1/g' - C1 = {profile.C2!r}")
    ok = abs(profile.bridge_residual) <= cfg.tol_bridge
    return EXIT_OK if ok else EXIT_CLAIM


def divergence_certificate(cfg: RunConfig, profile: Profile, hard: bool,
                           count: int = 1000, radius: float = 10.0):
    """Max |FD divergence| of the flux over random points of B_radius and,
    in hard mode, the observed order of the nested-difference residual."""
    rng = np.random.default_rng(cfg.seed)
    pts = ball_points(cfg.dimension, count, radius, rng)
    phi, sigma = counterexample(cfg.dimension, profile)
    h = cfg.fd_step
    r = divergence_residual(flux(phi, sigma), pts, h)
    order = math.nan
    if hard:
        r1 = divergence_residual(nested_flux(phi, sigma, h), pts, h)
        r2 = divergence_residual(nested_flux(phi, sigma, h / 2), pts, h / 2)
        order = observed_order(r1, r2)
    return float(np.max(np.abs(r))), order


def cmd_growth(cfg: RunConfig, out: Path, args) -> int:
    if cfg.radii_min < 1:
        raise ConfigError("growth runs need radii.min >= 1")
    mode = cfg.resolved_mode
    profile = Profile.build(cfg.k, cfg.tol_bridge)
    phi, sigma = counterexample(cfg.dimension, profile)
    series = growth_series(phi, sigma, cfg.radii, cfg.quad, mode)
    bound = series.bound
    write_csv(out / "growth.csv", ["R", "value", "error", "bound", "local_slope"],
              zip(series.radii, series.values, series.errors, bound, series.local_slopes),
              [f"mode={mode} N={cfg.dimension} k={fmt(cfg.k)}"])
    # the slab majorant equals the bound exactly, so compare relatively
    excess = float(np.max(series.bound_violations(10.0) / bound))
    max_res, order = divergence_certificate(cfg, profile, args.hard_divergence)
    slope = series.fitted_slope
    verdicts = [
        ("growth_bound", status(excess <= 1e-12), excess,
         "max of (value - 10 err) / (C1 R^k + C2) - 1"),
        ("divergence_free", status(max_res <= cfg.tol_divergence), max_res,
         "max |FD div(phi^2 grad sigma)| over 1000 points of B_10"),
    ]
    if args.hard_divergence:
        verdicts.append(("divergence_order", status(order >= 1.9), order,
                         "observed order of the nested-difference residual"))
    verdicts += [
        ("contrapositive", status(slope > 2), slope, "fitted slope > 2"),
        ("slope_vs_k", INFO, slope - cfg.k, f"fitted slope {slope:.6f} - k"),
    ]
    print(f"mode={mode} N={cfg.dimension} k={cfg.k} fitted slope={slope!r}")
    _print_verdicts(verdicts)
    write_verdicts(out, "growth", verdicts)
    return _exit_code(verdicts)


def cmd_energy(cfg: RunConfig, out: Path, args) -> int:
    N = cfg.dimension
    if N > 3:
        raise ConfigError("energy runs need ball quadrature: dimension <= 3")
    G = allen_cahn_potential()
    u = lift_1d(*kink(), N)
    radii = cfg.radii
    ledgers = energy_ledgers(u, G, radii, cfg.quad)
    write_csv(out / "energy.csv",
              ["R", "dirichlet", "potential", "phi_R", "ratio", "deficit", "weighted_deficit"],
              [(L.R, L.dirichlet, L.potential, L.phi_R, L.ratio, L.deficit,
                L.weighted_deficit) for L in ledgers],
              [f"solution=kink N={N}"])
    rng = np.random.default_rng(cfg.seed)
    pts = ball_points(N, 1000, float(radii[-1]), rng)
    violation = modica_check(u, G, pts)
    phis = np.array([L.phi_R for L in ledgers])
    min_diff = float(np.min(np.diff(phis))) if len(phis) > 1 else math.inf
    ratio_dev = max(abs(L.ratio - 1) for L in ledgers)
    values = u(pts)
    # tanh rounds to +-1 far out; the true range is open
    lo, hi = G.admissible
    span = (max(float(values.min()), np.nextafter(lo, hi)),
            min(float(values.max()), np.nextafter(hi, lo)))
    H = hypothesis_H_constant(G, span)
    M = float(np.max(G.G(values)))
    verdicts = [
        ("modica_bound", status(violation <= 1e-10), violation,
         "max of |grad u|^2/2 - G(u) over 1000 random points"),
        ("monotonicity", status(min_diff >= -1e-8), min_diff,
         "min consecutive difference of Phi(R)"),
        ("energy_ratio", status(ratio_dev <= 1e-8), ratio_dev, "max |ratio - 1|"),
    ]
    verdicts += deficit_verdicts(ledgers, N, H, M)
    q = np.array([2 * L.dirichlet for L in ledgers]) / radii ** (N - 1)
    lb = lower_bound_from_quotients(radii, q)
    verdicts.append(("dirichlet_lower_bound", status(lb.passed), lb.c_measured,
                     f"min quotient for R >= R0 = {fmt(lb.R0_measured)}"))
    _print_verdicts(verdicts)
    write_verdicts(out, "energy", verdicts)
    return _exit_code(verdicts)


def deficit_verdicts(ledgers, N, H, M):
    """Measured deficit constants against the cutoff and Holder constants.

    With five or more radii the no-growth test of ``deficit_bound_check``
    applies as well; shorter grids are judged on the constants alone.
    """
    if H is None:
        why = "concavity hypothesis fails on the sampled range"
        return [("weighted_deficit_bound", FAIL, math.nan, why),
                ("deficit_bound", FAIL, math.nan, why)]
    if len(ledgers) >= 5:
        b = deficit_bound_check(ledgers, N, H.K, M)
        C1m, C2m, ok_i, ok_ii, C1t, C2t = b
    else:
        R = np.array([L.R for L in ledgers])
        C1m = float(np.max([L.weighted_deficit for L in ledgers] / R ** (N - 2)))
        C2m = float(np.max([L.deficit for L in ledgers] / R ** (N - 4 / 3)))
        C1t = cutoff_constant(M, H.K, N)
        C2t = holder_constant(C1t, N)
        ok_i, ok_ii = C1m <= C1t + 1e-9, C2m <= C2t + 1e-9
    return [
        ("weighted_deficit_bound", status(ok_i), C1m,
         f"measured C1 (cutoff constant {C1t:.6g})"),
        ("deficit_bound", status(ok_ii), C2m,
         f"measured C2 (Holder constant {C2t:.6g})"),
    ]


def cmd_stability(cfg: RunConfig, out: Path, args) -> int:
    N = cfg.dimension
    if N > 2:
        raise ConfigError("stability runs support dimension <= 2")
    G = allen_cahn_potential()
    u = lift_1d(*kink(), N)
    wave_u, wave_du, _ = snoidal_wave(0.5)
    wave = lift_1d(wave_u, wave_du, N)
    spec = cfg.quad
    mus = random_test_functions(N, cfg.corpus_size, cfg.seed)
    rows = []
    for i, mu in enumerate(mus):
        Q = quadratic_form_Q(u, G, mu, spec)
        gap_kink = lemma_identity_gap(u, G, mu, spec, mutate=args.mutate_rhs)
        gap_wave = lemma_identity_gap(wave, G, mu, spec, mutate=args.mutate_rhs)
        slack = lemma_inequality(u, G, mu, spec).slack
        rows.append((i, mu.support_radius, Q, gap_kink, gap_wave, slack))
    write_csv(out / "stability.csv",
              ["index", "support_radius", "Q", "gap_kink", "gap_wave", "slack"], rows,
              [f"N={N} seed={cfg.seed} mutate_rhs={fmt(args.mutate_rhs)}"])
    arr = np.array(rows, dtype=float)
    max_gap = float(np.max(arr[:, 3:5]))
    min_slack = float(np.min(arr[:, 5]))
    min_Q = float(np.min(arr[:, 2]))
    Q_unstable = quadratic_form_Q(constant_field(N, 0.0), G, smooth_cutoff(10.0, N), spec)
    verdicts = [
        ("stability_identity", status(max_gap <= cfg.tol_identity), max_gap,
         "max relative identity gap (kink and periodic wave)"),
        ("stability_criterion", status(min_slack >= -1e-8), min_slack,
         "min slack of the stability criterion for the kink"),
        ("kink_stable", status(min_Q >= -1e-8), min_Q, "min Q(v) over the corpus"),
        ("instability_detected", status(Q_unstable < 0), Q_unstable,
         "Q(v) for u = 0 and a cutoff of radius 10"),
    ]
    _print_verdicts(verdicts)
    write_verdicts(out, "stability", verdicts)
    return _exit_code(verdicts)


def _verdict_map(out: Path, command: str) -> dict:
    _, rows = read_csv(out / f"verdicts_{command}.csv")
    return {r["claim"]: r for r in rows}


def build_report(out: Path):
    missing = [name for names in REQUIRED.values() for name in names
               if not (out / name).exists()]
    if missing:
        raise MissingInputs("missing input files: " + ", ".join(missing))
    growth = _verdict_map(out, "growth")
    energy = _verdict_map(out, "energy")
    stab = _verdict_map(out, "stability")

    def combine(*entries):
        ok = all(e["status"] != FAIL for e in entries)
        return status(ok), "; ".join(f"{e['claim']}={e['figure']}" for e in entries)

    div = [growth["divergence_free"]]
    if "divergence_order" in growth:
        div.append(growth["divergence_order"])
    table = {
        "growth_optimality": combine(growth["growth_bound"], *div, growth["contrapositive"]),
        "modica_bound": combine(energy["modica_bound"]),
        "monotonicity": combine(energy["monotonicity"]),
        "stability_identity": combine(stab["stability_identity"], stab["stability_criterion"]),
        "dirichlet_lower_bound": combine(energy["dirichlet_lower_bound"]),
        "energy_ratio": combine(energy["energy_ratio"]),
        "weighted_deficit_bound": combine(energy["weighted_deficit_bound"]),
        "deficit_bound": combine(energy["deficit_bound"]),
    }
    return [(key, desc, *table[key]) for key, desc in CLAIMS], growth["contrapositive"]


def cmd_report(cfg: RunConfig, out: Path, args) -> int:
    rows, contra = build_report(out)
    write_csv(out / "report.csv", ["claim", "statement", "status", "measured"], rows)
    width = max(len(r[0]) for r in rows)
    for claim, desc, st, measured in rows:
        print(f"{claim:<{width}}  {st}  {measured}")
    print(f"contrapositive: fitted slope > 2 -> {contra['status']} "
          f"(slope {contra['figure']})")
    return EXIT_CLAIM if any(r[2] == FAIL for r in rows) else EXIT_OK


COMMANDS = {
    "construct": cmd_construct,
    "growth": cmd_growth,
    "energy": cmd_energy,
    "stability": cmd_stability,
    "report": cmd_report,
}


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="liouville-lab", description=__doc__.splitlines()[0])
    p.add_argument("command", choices=list(COMMANDS))
    p.add_argument("--config", help="flat key = value configuration file")
    p.add_argument("--out", default="out", help="output directory (default: out)")
    p.add_argument("--seed", type=int)
    p.add_argument("--mode", choices=["ball", "slab", "auto"])
    p.add_argument("--dimension", type=int)
    p.add_argument("--k", type=float)
    p.add_argument("--radii-min", type=float)
    p.add_argument("--radii-max", type=float)
    p.add_argument("--radii-ratio", type=float)
    p.add_argument("--quad-radial", type=int)
    p.add_argument("--quad-angular", type=int)
    p.add_argument("--quad-tol", type=float)
    p.add_argument("--tol-bridge", type=float)
    p.add_argument("--tol-identity", type=float)
    p.add_argument("--tol-divergence", type=float)
    p.add_argument("--fd-step", type=float)
    p.add_argument("--corpus-size", type=int)
    p.add_argument("--hard-divergence", action="store_true",
                   help="also certify the nested finite-difference divergence")
    p.add_argument("--mutate-rhs", action="store_true",
                   help="debug: drop the deficit term from the identity's right side")
    return p


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    overrides = {f.name: getattr(args, f.name, None) for f in fields(RunConfig)}
    try:
        cfg = load_config(args.config, overrides)
        return COMMANDS[args.command](cfg, Path(args.out), args)
    except (ConfigError, MissingInputs) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except ValueError as exc:
        # domain rejections from the library (e.g. k below the floor)
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except (BracketError, QuadratureError) as exc:
        print(f"failure: {exc}", file=sys.stderr)
        return EXIT_CLAIM


if __name__ == "__main__":
    sys.exit(main())
