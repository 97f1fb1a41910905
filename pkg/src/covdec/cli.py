"""Command-line entry point ``covdec``.

Exit codes: 0 on success or a true verdict, 1 when a checked verdict is
false, 2 on usage or input errors.  Reports are deterministic for fixed
flags and seed; JSON output has sorted keys.
"""

import argparse
import hashlib
import json
import sys

import numpy as np

from . import covariance as cov
from . import dilation as dil
from . import dynamics as dyn
from .basis import build_frobenius_basis
from .errors import CertificateError, CovdecError, InputError
from .linmap import FROBENIUS, cp_check, compose_transpose, is_hermiticity_preserving
from .serialize import (
    decode_array,
    dumps,
    encode_array,
    generator_from_json,
    load_json,
    map_from_json,
    map_to_json,
)

EXIT_OK, EXIT_FALSE, EXIT_USAGE = 0, 1, 2


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        raise InputError("arguments", message)


def _common():
    p = argparse.ArgumentParser(add_help=False)
    p.add_argument("--json", action="store_true", help="emit the report as JSON")
    p.add_argument("--seed", type=int, default=0, help="random seed (default 0)")
    p.add_argument("--tol", type=float, default=None, help="verdict tolerance")
    p.add_argument("--samples", type=int, default=20, help="sampled group elements (default 20)")
    return p


def build_parser():
    common = _common()
    parser = _Parser(prog="covdec", description="Covariant decomposable maps on M_n.")
    sub = parser.add_subparsers(dest="command", required=True, parser_class=_Parser)

    p = sub.add_parser("basis", parents=[common], help="emit the Frobenius basis")
    p.add_argument("--n", type=int, required=True)

    p = sub.add_parser("check", parents=[common], help="HP / CP / coCP / decomposability checks")
    p.add_argument("--map", required=True)
    p.add_argument("--props", default="hp,cp,cocp", help="comma list of hp, cp, cocp, dec")

    p = sub.add_parser("covcheck", parents=[common], help="covariance under the diagonal torus")
    p.add_argument("--map", required=True)
    p.add_argument("--conjugate", action="store_true", help="test conjugate covariance")

    p = sub.add_parser("project", parents=[common], help="project onto covariant maps")
    p.add_argument("--map", required=True)
    p.add_argument("--mode", choices=("closed", "quadrature"), default="closed")
    p.add_argument("--out", help="also write the projected map to this file")

    p = sub.add_parser("random", parents=[common], help="random certified covariant map")
    p.add_argument("--kind", choices=("cp", "cocp", "dec"), required=True)
    p.add_argument("--n", type=int, required=True)
    p.add_argument("--out", help="also write the map to this file")

    p = sub.add_parser("dilate", parents=[common], help="Stinespring-type dilation")
    p.add_argument("--map", required=True)
    p.add_argument("--kind", choices=("auto", "cp", "cocp", "jordan"), default="auto")
    p.add_argument("--verify-covariance", action="store_true")

    p = sub.add_parser("evolve", parents=[common], help="integrate the master equation")
    p.add_argument("--generator", required=True)
    p.add_argument("--t", type=float, required=True, help="horizon T")
    p.add_argument("--h", type=float, default=1e-3, help="RK4 step")
    p.add_argument("--rho0", help="initial density matrix file (default maximally mixed)")
    p.add_argument("--report", default="trace", help="comma list of covariance, trace, divisibility")
    p.add_argument("--trajectory", help="write (t, rho(t), trace residual) as JSON lines")
    p.add_argument("--bound", type=float, default=None, help="regularity bound on sup ||L_t||")

    p = sub.add_parser("selftest", parents=[common], help="run the property suites")
    p.add_argument("--n", type=int, default=3)
    p.add_argument("--scale", type=float, default=0.2, help="sample-count multiplier (default 0.2)")
    p.add_argument("--suites", default="1,2,3,4,5,6,7,8")
    return parser


# -- report plumbing ------------------------------------------------------------


class Report:
    def __init__(self, command, digest):
        self.command = command
        self.digest = digest
        self.verdicts = {}
        self.residuals = {}
        self.tolerances = {}
        self.artifacts = {}
        self.notes = []

    def verdict(self, name, value, residual=None, tol=None):
        self.verdicts[name] = bool(value)
        if residual is not None:
            self.residuals[name] = float(residual)
        if tol is not None:
            self.tolerances[name] = float(tol)

    def as_dict(self):
        out = {
            "command": self.command,
            "inputs_digest": self.digest,
            "verdicts": self.verdicts,
            "residuals": self.residuals,
            "tolerances": self.tolerances,
        }
        if self.artifacts:
            out["artifacts"] = self.artifacts
        if self.notes:
            out["notes"] = self.notes
        return out

    def render(self, as_json):
        if as_json:
            return dumps(self.as_dict())
        lines = [f"command: {' '.join(self.command)}", f"inputs_digest: {self.digest}"]
        for name in sorted(set(self.verdicts) | set(self.residuals)):
            parts = [f"{name}:"]
            if name in self.verdicts:
                parts.append("PASS" if self.verdicts[name] else "FAIL")
            if name in self.residuals:
                parts.append(f"residual={self.residuals[name]:.3e}")
            if name in self.tolerances:
                parts.append(f"tol={self.tolerances[name]:.1e}")
            lines.append("  ".join(parts))
        for note in self.notes:
            lines.append(f"note: {note}")
        for key in sorted(self.artifacts):
            lines.append(f"{key}: {json.dumps(self.artifacts[key], sort_keys=True, default=str)}")
        return "\n".join(lines)


def _digest(args, files):
    h = hashlib.sha256()
    h.update(dumps({k: v for k, v in sorted(vars(args).items())}, indent=None).encode())
    for path in files:
        try:
            with open(path, "rb") as fh:
                h.update(fh.read())
        except OSError:
            pass  # reported with the field name when the file is loaded
    return h.hexdigest()


def _input_files(args):
    return [getattr(args, k) for k in ("map", "generator", "rho0") if getattr(args, k, None)]


def _load_map(path):
    return map_from_json(load_json(path, "map"), "map")


def _tol(args, default):
    return default if args.tol is None else args.tol


def _write_json(path, obj):
    with open(path, "w", encoding="utf-8") as fh:
        fh.write(dumps(obj) + "\n")


# -- subcommands ----------------------------------------------------------------


def cmd_basis(args, rep):
    if args.n < 2:
        raise InputError("--n", "must be >= 2")
    B = build_frobenius_basis(args.n)
    F = B.matrices.reshape(B.size, -1)
    dev = float(np.abs(F.conj() @ F.T - np.eye(B.size)).max())
    tol = _tol(args, 1e-12)
    rep.verdict("orthonormal", dev < tol, dev, tol)
    rep.artifacts["pair_map"] = [list(p) for p in B.pair_map]
    rep.artifacts["matrices"] = encode_array(B.matrices)
    return EXIT_OK if dev < tol else EXIT_FALSE


def cmd_check(args, rep):
    m = _load_map(args.map)
    props = [p.strip() for p in args.props.split(",") if p.strip()]
    bad = set(props) - {"hp", "cp", "cocp", "dec"}
    if bad or not props:
        raise InputError("--props", f"unknown properties {sorted(bad)}; use hp, cp, cocp, dec")
    tol = _tol(args, 1e-9)
    for p in props:
        if p == "hp":
            r = float(np.linalg.norm(m.c - m.c.conj().T))
            rep.verdict("hp", is_hermiticity_preserving(m, tol), r, tol)
        elif p in ("cp", "cocp"):
            target = m if p == "cp" else compose_transpose(m)
            r = cp_check(target, tol)
            rep.verdict(p, r.ok, max(r.hermiticity_residual, max(0.0, -r.min_eigenvalue)), tol)
            rep.artifacts[f"{p}_min_eigenvalue"] = r.min_eigenvalue
        else:
            ok = m.certificate is not None or cp_check(m, tol).ok or cp_check(compose_transpose(m), tol).ok
            rep.verdict("dec", ok, 0.0, tol)
            if ok and m.certificate is None:
                rep.notes.append("dec: trivial certificate (map is CP or coCP)")
            if not ok:
                rep.notes.append("dec: no certificate; general decomposability is not decided")
    return EXIT_OK if all(rep.verdicts.values()) else EXIT_FALSE


def cmd_covcheck(args, rep):
    m = _load_map(args.map)
    tol = _tol(args, 1e-10)
    r = cov.covariance_report(m, args.samples, tol, args.seed, conjugate=args.conjugate)
    name = "conjugate_covariant" if args.conjugate else "covariant"
    rep.verdict(name, r.covariant, max(r.identity_residual, r.commutation_residual), r.tolerance)
    rep.residuals["identity"] = r.identity_residual
    rep.residuals["commutation"] = r.commutation_residual
    rep.artifacts["points"] = r.points
    return EXIT_OK if r.covariant else EXIT_FALSE


def cmd_project(args, rep):
    m = _load_map(args.map)
    mode = "closed_form" if args.mode == "closed" else "quadrature"
    p = cov.project_covariant(m, mode)
    tol = _tol(args, 1e-11)
    idem = cov.project_covariant(p, mode).distance(p)
    rep.verdict("idempotent", idem < tol, idem, tol)
    rep.residuals["distance_to_input"] = p.distance(m)
    out = map_to_json(p)
    rep.artifacts["map"] = out
    if args.out:
        _write_json(args.out, out)
    return EXIT_OK if idem < tol else EXIT_FALSE


def cmd_random(args, rep):
    if args.n < 2:
        raise InputError("--n", "must be >= 2")
    m = cov.random_covariant_map(args.kind, args.n, args.seed)
    tol = _tol(args, 1e-10)
    r = cov.covariance_report(m, args.samples, tol, args.seed)
    rep.verdict("covariant", r.covariant, max(r.identity_residual, r.commutation_residual), r.tolerance)
    out = map_to_json(m)
    rep.artifacts["map"] = out
    if args.out:
        _write_json(args.out, out)
    return EXIT_OK


def cmd_dilate(args, rep):
    m = _load_map(args.map)
    try:
        d = dil.dilate(m, args.kind)
    except CertificateError as exc:
        rep.verdict("dilatable", False)
        rep.notes.append(str(exc))
        return EXIT_FALSE
    tol = _tol(args, 1e-10)
    recon = d.reconstruction_error(m.to_basis(FROBENIUS))
    morph = d.morphism_residual(10, args.seed)
    rep.verdict("reconstruction", recon < tol, recon, tol)
    rep.verdict("morphism_law", morph < 1e-11 * max(1.0, d.K_dim), morph, 1e-11 * max(1.0, d.K_dim))
    rep.artifacts.update({"K_dim": d.K_dim, "kind": d.kind, "multiplicity": d.multiplicity,
                          "truncated_weight": d.truncated_weight})
    if args.verify_covariance:
        try:
            w = dil.covariance_intertwiner(d, args.samples, args.seed)
            rep.verdict("intertwiner", True, w.residual, dil.INTERTWINER_TOL)
            g = cov.structured_points(m.n)[0]
            rep.artifacts["witness_g"] = g.x.tolist()
            rep.artifacts["witness_W"] = encode_array(w.W(g))
        except dil.NoIntertwinerError as exc:
            rep.verdict("intertwiner", False, exc.residual, dil.INTERTWINER_TOL)
    return EXIT_OK if all(rep.verdicts.values()) else EXIT_FALSE


def _rho0(args, n):
    if not args.rho0:
        return np.eye(n, dtype=complex) / n
    rho = decode_array(load_json(args.rho0, "rho0"), "rho0", (n, n))
    try:
        return dyn.check_density(rho, n)
    except ValueError as exc:
        raise InputError("rho0", str(exc)) from None


def cmd_evolve(args, rep):
    H, phi = generator_from_json(load_json(args.generator, "generator"))
    try:
        gen = dyn.build_generator(H, phi)
    except (ValueError, CertificateError) as exc:
        raise InputError("generator.H", str(exc)) from None
    reports = {r.strip() for r in args.report.split(",") if r.strip()}
    bad = reports - {"covariance", "trace", "divisibility"}
    if bad:
        raise InputError("--report", f"unknown reports {sorted(bad)}")
    rho0 = _rho0(args, gen.n)
    try:
        fam = dyn.evolve(gen, args.t, args.h, rho0=rho0, bound=args.bound)
    except ValueError as exc:
        raise InputError("--t/--h", str(exc)) from None
    rep.artifacts["steps"] = len(fam.grid) - 1
    rep.artifacts["rho_final"] = encode_array(fam.trajectory[-1])
    rep.verdict("regular", fam.regular, fam.regularity, args.bound)
    if "trace" in reports:
        drift = max(fam.trace_residual, fam.trajectory_trace_residual())
        tol = _tol(args, 1e-8)
        rep.verdict("trace_preserving", drift <= tol, drift, tol)
    if "covariance" in reports:
        tol = _tol(args, 1e-9)
        g = dyn.generator_covariance_report(gen, args.samples, seed=args.seed)
        f = dyn.dynamics_covariance_check(fam, args.samples, tol, args.seed)
        rep.verdict("generator_covariant", g.covariant, max(g.commutator_residual, g.phi_residual), g.tolerance)
        rep.verdict("family_covariant", f.covariant, f.residual, f.tolerance)
        rep.verdict("covariance_verdicts_agree", g.covariant == f.covariant)
    if "divisibility" in reports:
        w = dyn.d_divisibility_witness(gen, min(args.h, 1e-3))
        rep.verdict("d_divisible_first_order", w.ok, max(0.0, -w.min_eigenvalue), 1e-6)
        rep.notes.append("divisibility is a first-order proxy at the generator level")
    if args.trajectory:
        tr0 = np.trace(rho0).real
        with open(args.trajectory, "w", encoding="utf-8") as fh:
            for t, rho in zip(fam.grid, fam.trajectory):
                line = {"t": float(t), "rho": encode_array(rho), "trace_residual": float(abs(np.trace(rho) - tr0))}
                fh.write(json.dumps(line, sort_keys=True) + "\n")
    checked = {k: v for k, v in rep.verdicts.items() if k != "covariance_verdicts_agree"}
    if "covariance" in reports:
        # covariance itself is informational; disagreement is a failure
        checked.pop("generator_covariant")
        checked.pop("family_covariant")
        checked["agree"] = rep.verdicts["covariance_verdicts_agree"]
    return EXIT_OK if all(checked.values()) else EXIT_FALSE


def cmd_selftest(args, rep):
    from .suites import run_suites

    try:
        numbers = sorted({int(s) for s in args.suites.split(",") if s.strip()})
    except ValueError:
        raise InputError("--suites", "expected a comma list of suite numbers 1-8") from None
    if not numbers or not set(numbers) <= set(range(1, 9)):
        raise InputError("--suites", "suite numbers must lie in 1-8")
    results = run_suites(numbers, seed=args.seed, scale=args.scale, n=args.n)
    for r in results:
        for c in r.checks:
            rep.verdict(f"{r.number}.{r.name}.{c.name}", c.passed, c.value, c.threshold)
        rep.verdict(f"{r.number}.{r.name}", r.passed)
        if not args.json:
            print(f"suite {r.number} {r.name}: {'PASS' if r.passed else 'FAIL'} ({r.elapsed:.2f} s)", file=sys.stderr)
    return EXIT_OK if all(r.passed for r in results) else EXIT_FALSE


COMMANDS = {
    "basis": cmd_basis,
    "check": cmd_check,
    "covcheck": cmd_covcheck,
    "project": cmd_project,
    "random": cmd_random,
    "dilate": cmd_dilate,
    "evolve": cmd_evolve,
    "selftest": cmd_selftest,
}


def run(argv=None, stdout=None):
    """Run one command; returns the exit code."""
    stdout = stdout or sys.stdout
    argv = list(sys.argv[1:] if argv is None else argv)
    try:
        args = build_parser().parse_args(argv)
        rep = Report(argv, _digest(args, _input_files(args)))
        code = COMMANDS[args.command](args, rep)
    except InputError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except CovdecError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    print(rep.render(args.json), file=stdout)
    return code


def main(argv=None):
    code = run(argv)
    sys.exit(code)


if __name__ == "__main__":  # pragma: no cover
    main()
