"""Command-line driver: construction, transformation, solving, and the
full verification suite with machine-readable reports.

Exit codes: 0 all checks pass, 1 a verification check failed, 2 usage or
input error. Identical seeds and flags produce identical reports up to
the timing fields. Every verdict carries the identity it certifies.
"""

from __future__ import annotations

import argparse
import json
import sys
import time
from dataclasses import dataclass, field

import numpy as np

from . import __version__, kernels
from .rational import Q
from .poly import MultiPoly
from .quaternion import haar_sample
from .harmonics import (
    harmonic_basis,
    laplace_beltrami_check,
    zonal,
    zonal_identity_suite,
)
from .product import SpectralCoeffs, analyze
from .operators import (
    DEFAULT_EXACT_DEGREE_CAP,
    DEFAULT_FLOAT_DEGREE_CAP,
    NotInKernelError,
    annihilation_check,
    box_apply,
    contraction_and_smoothing_check,
    exactness_report,
    extract_reflection,
    kernel_invariance_check,
    multiplier_witness,
    solve_box,
    xi_spectral,
    xi_symbolic,
    xi_zonal_kernel,
)

DEFAULT_BASIS_CAP = 8


@dataclass
class CheckResult:
    name: str
    identity: str
    mode: str
    passed: bool
    witness: object = None
    seconds: float = 0.0

    def to_json(self) -> dict:
        return {
            "name": self.name,
            "identity": self.identity,
            "mode": self.mode,
            "passed": self.passed,
            "witness": self.witness,
            "seconds": round(self.seconds, 3),
        }


@dataclass
class ReportDocument:
    command: str
    params: dict
    checks: list = field(default_factory=list)
    elapsed_seconds: float = 0.0

    @property
    def passed(self) -> bool:
        return all(c.passed for c in self.checks)

    def add(self, name, identity, mode, passed, witness=None, seconds=0.0):
        self.checks.append(CheckResult(name, identity, mode, bool(passed),
                                       witness, seconds))

    def to_json(self) -> dict:
        return {
            "command": self.command,
            "version": __version__,
            "params": self.params,
            "kernel_backend": kernels.backend(),
            "passed": self.passed,
            "checks": [c.to_json() for c in self.checks],
            "elapsed_seconds": round(self.elapsed_seconds, 3),
        }

    def to_text(self) -> str:
        lines = [f"{self.command} (v{__version__})"]
        for c in self.checks:
            status = "PASS" if c.passed else "FAIL"
            w = "" if c.witness is None else f"  {_short(c.witness)}"
            lines.append(f"[{status}] {c.name} [{c.mode}] :: {c.identity}{w}")
        lines.append(f"{'ALL PASS' if self.passed else 'FAILURES PRESENT'} "
                     f"in {self.elapsed_seconds:.1f}s")
        return "\n".join(lines)


def _short(witness) -> str:
    s = json.dumps(witness, default=str)
    return s if len(s) <= 120 else s[:117] + "..."


def _emit(args, payload: dict, text: str | None = None) -> None:
    if getattr(args, "format", "json") == "text" and text is not None:
        out = text
    else:
        out = json.dumps(payload, indent=2, sort_keys=True, default=str)
    if getattr(args, "output", None):
        with open(args.output, "w") as fh:
            fh.write(out + "\n")
    else:
        print(out)


def _load_json(path: str) -> dict:
    with open(path) as fh:
        return json.load(fh)


# -- subcommands ----------------------------------------------------------------


def cmd_basis(args) -> int:
    cap = args.degree_cap if args.degree_cap is not None else DEFAULT_BASIS_CAP
    if args.k > cap:
        print(f"error: basis degree {args.k} exceeds cap {cap} "
              f"(raise with --degree-cap)", file=sys.stderr)
        return 2
    if args.zonal:
        z = zonal(args.k)
        _emit(args, z.to_json(), z.poly.to_text(
            ["x1", "x2", "x3", "x4", "y1", "y2", "y3", "y4"]))
        return 0
    basis = harmonic_basis(args.k)
    payload = basis.to_json()
    names = ["x1", "x2", "x3", "x4"]
    text = "\n".join(
        [f"degree {basis.degree}, dimension {basis.dim}"]
        + [f"Y{i}: {p.to_text(names)}   |Y{i}|^2 = {g}"
           for i, (p, g) in enumerate(zip(basis.elements, basis.gram_diag))])
    _emit(args, payload, text)
    return 0


def cmd_xi(args) -> int:
    data = _load_json(args.input)
    if args.method == "spectral":
        if "blocks" not in data:
            print("error: spectral method needs spectral-coefficient JSON",
                  file=sys.stderr)
            return 2
        coeffs = SpectralCoeffs.from_json(data)
        out = xi_spectral(coeffs)
        _emit(args, out.to_json())
        return 0
    if "terms" not in data:
        print("error: symbolic/kernel methods need polynomial JSON", file=sys.stderr)
        return 2
    f = MultiPoly.from_json(data)
    if f.nvars != 8:
        print("error: input polynomial must have 8 variables", file=sys.stderr)
        return 2
    if args.method == "symbolic":
        _emit(args, xi_symbolic(f).to_json())
        return 0
    # kernel method: float samples at Haar-random evaluation points
    xs = haar_sample(args.seed, args.points)
    ys = haar_sample(args.seed + 1, args.points)
    values = xi_zonal_kernel(f, list(zip(xs, ys)))
    payload = {
        "method": "kernel",
        "samples": [
            {"x": x.to_json(), "y": y.to_json(), "value": float(v)}
            for x, y, v in zip(xs, ys, values)
        ],
    }
    _emit(args, payload)
    return 0


def cmd_solve_box(args) -> int:
    data = _load_json(args.input)
    if "blocks" not in data or "N" not in data:
        print("error: solve-box needs spectral-coefficient JSON "
              "(with 'N' and 'blocks')", file=sys.stderr)
        return 2
    coeffs = SpectralCoeffs.from_json(data)
    try:
        u = solve_box(coeffs)
    except NotInKernelError as e:
        print(f"error: {e}", file=sys.stderr)
        return 2
    if box_apply(u) != coeffs:
        print("error: round-trip verification failed", file=sys.stderr)
        return 1
    _emit(args, u.to_json())
    return 0


# -- the verification suite -------------------------------------------------------


def _verify_one_mode(doc: ReportDocument, N: int, mode: str, seed: int) -> None:
    tag = mode

    t0 = time.time()
    dims_ok = all(harmonic_basis(k).dim == (k + 1) ** 2 for k in range(N + 1))
    doc.add("dimension_law", "dim of degree-k harmonics = (k+1)^2", tag,
            dims_ok, {"k_max": N}, time.time() - t0)

    t0 = time.time()
    eig_ok, worst = True, 0.0
    for k in range(N + 1):
        for p in harmonic_basis(k).elements[: min(4, (k + 1) ** 2)]:
            r = laplace_beltrami_check(p, seed=seed)
            eig_ok = eig_ok and r["ok"]
            worst = max(worst, r["fd_max_rel_err"])
    doc.add("eigenvalue_law", "sphere Laplacian eigenvalue -k(k+2) on degree-k "
            "harmonics", tag, eig_ok, {"fd_max_rel_err": worst}, time.time() - t0)

    t0 = time.time()
    zonal_ok = all(zonal_identity_suite(k)["ok"] for k in range(N + 1))
    doc.add("zonal_identities", "(k+1)^2 = int |Z_y(x)|^2 dx = int Z_x(x) dx "
            "= Z_e(e)", tag, zonal_ok, {"k_max": N}, time.time() - t0)

    t0 = time.time()
    if mode == "exact":
        ann = annihilation_check(N)
        doc.add("annihilation", "averaging kills every block with k != l", tag,
                ann["ok"], {"pairs_checked": ann["pairs_checked"]}, time.time() - t0)
    else:
        from .operators import float_cross_block_norm
        worst = max(float_cross_block_norm(k, l)
                    for k in range(N + 1) for l in range(N + 1) if k != l)
        doc.add("annihilation", "averaging kills every block with k != l", tag,
                worst <= 1e-9, {"offdiag_max_entry": worst}, time.time() - t0)

    t0 = time.time()
    refl_ok = True
    lambdas = {}
    for k in range(N + 1):
        rep = extract_reflection(k, mode)
        refl_ok = refl_ok and rep.t_square_ok and rep.involution_ok and rep.self_adjoint_ok
        lambdas[k] = str(rep.lam)
    doc.add("multiplier_law", "T^2 = Id/(k+1)^2 on the diagonal block; "
            "reflection factor is a self-adjoint involution", tag, refl_ok,
            {"lambda": lambdas}, time.time() - t0)

    t0 = time.time()
    agree_ok, max_err = _realization_agreement(min(N, 3), seed)
    doc.add("realization_agreement", "symbolic, spectral and kernel-quadrature "
            "realizations agree", tag, agree_ok,
            {"kernel_max_abs_err": max_err}, time.time() - t0)

    t0 = time.time()
    inv_ok, inv_err = True, 0.0
    for k in range(min(N, 1) + 1):
        r = kernel_invariance_check(k, samples=5, seed=seed)
        inv_ok = inv_ok and r["ok"]
        inv_err = max(inv_err, r["max_rel_err"])
    doc.add("kernel_invariance", "K(x''g,y'';xg,y) = K(gx'',y'';gx,y) = K; "
            "same on the y side", tag, inv_ok, {"max_rel_err": inv_err},
            time.time() - t0)

    t0 = time.time()
    wit_ok = True
    for k in range(min(N, 2) + 1):
        w = multiplier_witness(k)
        wit_ok = wit_ok and w["ok"]
    doc.add("multiplier_witness", "(k+1)^4 lambda^2 = integral of the "
            "iterated-kernel diagonal", tag, wit_ok, None, time.time() - t0)

    t0 = time.time()
    cs = contraction_and_smoothing_check(N, trials=40, seed=seed)
    doc.add("contraction_smoothing", "averaging contracts L2; H^s -> H^(s+1) "
            "norm estimate <= sqrt(2)", tag, cs["ok"],
            {"operator_norm_estimate": cs["operator_norm_estimate"]},
            time.time() - t0)

    t0 = time.time()
    ex = exactness_report(N, mode=mode, seed=seed)
    doc.add("exact_couple", "kernel of T = image of Box; kernel of Box = "
            "image of T (truncated)", tag, ex["ok"], ex["checks"], time.time() - t0)


def _realization_agreement(N: int, seed: int, trials: int = 5):
    import random as pyrandom
    rng = pyrandom.Random(seed)
    ok = True
    max_err = 0.0
    for _ in range(trials):
        f = _random_bipoly(rng, N)
        ok = ok and (analyze(xi_symbolic(f), N) == xi_spectral(analyze(f, N)))
    # kernel route needs single-diagonal-block inputs
    for k in range(min(N, 2) + 1):
        basis = harmonic_basis(k)
        f = MultiPoly.zero(8)
        for _ in range(3):
            i, j = rng.randrange(basis.dim), rng.randrange(basis.dim)
            f = f + (basis.elements[i].lift(8, 0)
                     * basis.elements[j].lift(8, 4)).scale(
                         Q(rng.randint(-5, 5), rng.randint(1, 5)))
        if f.is_zero():
            continue
        pts = list(zip(haar_sample(seed + k, 8), haar_sample(seed + k + 50, 8)))
        kv = xi_zonal_kernel(f, pts)
        sym = xi_symbolic(f)
        exps, coefs = sym.to_arrays()
        arr = np.array([np.concatenate([a.to_array(), b.to_array()]) for a, b in pts])
        sv = kernels.eval_poly(arr, exps, coefs)
        max_err = max(max_err, float(np.max(np.abs(kv - sv))))
    return ok and max_err <= 1e-8, max_err


def _random_bipoly(rng, bdeg: int, nterms: int = 6) -> MultiPoly:
    terms = {}
    for _ in range(nterms):
        exp = [0] * 8
        for _ in range(rng.randint(0, bdeg)):
            exp[rng.randrange(4)] += 1
        for _ in range(rng.randint(0, bdeg)):
            exp[4 + rng.randrange(4)] += 1
        terms[tuple(exp)] = Q(rng.randint(-9, 9), rng.randint(1, 9))
    return MultiPoly(8, terms)


def cmd_verify(args) -> int:
    t_start = time.time()
    N = args.max_degree
    exact_cap = args.degree_cap if args.degree_cap is not None else DEFAULT_EXACT_DEGREE_CAP
    float_cap = max(DEFAULT_FLOAT_DEGREE_CAP, exact_cap)
    if args.degree_cap is not None and args.degree_cap > DEFAULT_EXACT_DEGREE_CAP:
        print(f"warning: raising the exact degree cap to {args.degree_cap}; "
              f"expect (k+1)^4 growth in runtime", file=sys.stderr)
    if args.mode in ("exact", "both") and N > exact_cap:
        print(f"error: exact verification capped at max degree {exact_cap} "
              f"(use --degree-cap to override)", file=sys.stderr)
        return 2
    if N > float_cap:
        print(f"error: float verification capped at max degree {float_cap}",
              file=sys.stderr)
        return 2

    doc = ReportDocument("verify", {
        "max_degree": N, "mode": args.mode, "seed": args.seed,
    })
    modes = ["exact", "float"] if args.mode == "both" else [args.mode]
    for mode in modes:
        _verify_one_mode(doc, N, mode, args.seed)
    if args.mode == "both":
        t0 = time.time()
        agree = True
        worst = 0.0
        for k in range(N + 1):
            me = extract_reflection(k, "exact").matrix_float()
            mf = extract_reflection(k, "float").matrix_T
            worst = max(worst, float(np.max(np.abs(me - mf))))
        agree = worst <= 1e-9
        doc.add("exact_float_agreement", "float operator matrices shadow the "
                "exact ones", "both", agree, {"max_abs_err": worst},
                time.time() - t0)
    doc.elapsed_seconds = time.time() - t_start
    _emit(args, doc.to_json(), doc.to_text())
    return 0 if doc.passed else 1


# -- argument parsing --------------------------------------------------------------


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(
        prog="xi-s3",
        description="Exact and floating-point verification of the "
                    "group-averaging / ultrahyperbolic operator pair on S3 x S3.")
    sub = ap.add_subparsers(dest="command", required=True)

    p_basis = sub.add_parser("basis", help="emit a harmonic basis with Gram data")
    p_basis.add_argument("--k", type=int, required=True, help="harmonic degree")
    p_basis.add_argument("--zonal", action="store_true",
                         help="emit the zonal kernel instead of the basis")
    p_basis.add_argument("--degree-cap", type=int, default=None)
    p_basis.add_argument("--output", default=None)
    p_basis.add_argument("--format", choices=["json", "text"], default="json")
    p_basis.set_defaults(func=cmd_basis)

    p_xi = sub.add_parser("xi", help="apply the averaging operator")
    p_xi.add_argument("--input", required=True, help="polynomial or spectral JSON")
    p_xi.add_argument("--method", choices=["symbolic", "spectral", "kernel"],
                      default="symbolic")
    p_xi.add_argument("--points", type=int, default=10,
                      help="evaluation points for the kernel method")
    p_xi.add_argument("--seed", type=int, default=20260810)
    p_xi.add_argument("--output", default=None)
    p_xi.add_argument("--format", choices=["json", "text"], default="json")
    p_xi.set_defaults(func=cmd_xi)

    p_sb = sub.add_parser("solve-box", help="solve the ultrahyperbolic equation "
                          "on the averaging operator's kernel")
    p_sb.add_argument("--input", required=True, help="spectral JSON with zero "
                      "diagonal blocks")
    p_sb.add_argument("--output", default=None)
    p_sb.add_argument("--format", choices=["json", "text"], default="json")
    p_sb.set_defaults(func=cmd_solve_box)

    p_v = sub.add_parser("verify", help="run the full verification suite")
    p_v.add_argument("--max-degree", type=int, default=2)
    p_v.add_argument("--mode", choices=["exact", "float", "both"], default="exact")
    p_v.add_argument("--seed", type=int, default=20260810)
    p_v.add_argument("--degree-cap", type=int, default=None)
    p_v.add_argument("--output", default=None)
    p_v.add_argument("--format", choices=["json", "text"], default="json")
    p_v.set_defaults(func=cmd_verify)

    return ap


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return args.func(args)
    except (OSError, json.JSONDecodeError, KeyError, ValueError) as e:
        print(f"error: {e}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
