"""Command line front end: ``kdvsat <subcommand> ...``.

Configuration comes from built-in defaults, then an optional flat
``key = value`` file (``--config``), then the ``KDVSAT_OUTPUT_DIR``
environment variable, then ``--set key=value`` flags and dedicated flags.

Exit codes: 0 success, 1 a certified check failed, 2 bad configuration or input.
"""

from __future__ import annotations

import argparse
import csv
import dataclasses
import io
import json
import math
import os
import sys
import tempfile
from dataclasses import dataclass
from pathlib import Path

from . import synthesis as syn
from .errors import BudgetExceeded, ConfigError, KdvSatError, NormMismatch
from .flows import transport_apply
from .spectral import ControlProfileSet, ControlProgram, SolverConfig, SpectralState, TraceRow, evolve_program
from .trig import TrigPoly
from .verification import (eventually_decreasing, fit_rate, period_study, power_law_envelope, satlimit_study,
                           saturation_report, strang_study, trotter_study, wtn_study)

ENV_OUTPUT_DIR = "KDVSAT_OUTPUT_DIR"


@dataclass
class RunConfig:
    alpha: float = 0.0
    K: int = 32
    oversample: int = 4
    q_modes: int = 2
    profiles_file: str = ""
    dt_rate: float = 1e4
    tail_tol: float = 1e-8
    epsilon: float = 1e-2
    time_budget: float = 0.1
    tau: float = 1e-5
    n: int = 32
    n_outer: int = 8
    n_neg: int = 8
    symmetric: bool = True
    seed: int = 0
    output_dir: str = "out"

    def validate(self):
        if self.K < 4:
            raise ConfigError("K must be at least 4")
        if not self.dt_rate > 0:
            raise ConfigError("dt_rate must be positive")
        if self.oversample < 2:
            raise ConfigError("oversample must be at least 2")
        if self.q_modes < 2 and not self.profiles_file:
            raise ConfigError("q_modes must be at least 2 to span 1, cos x, sin x, cos 2x, sin 2x")
        for name in ("epsilon", "time_budget", "tau"):
            if not getattr(self, name) > 0:
                raise ConfigError(f"{name} must be positive")
        try:
            self.profiles()
        except (ValueError, OSError, KeyError) as exc:
            raise ConfigError(f"control profiles rejected: {exc}") from exc
        return self

    def profiles(self) -> ControlProfileSet:
        if self.profiles_file:
            return ControlProfileSet.from_json(json.loads(Path(self.profiles_file).read_text()))
        return ControlProfileSet.standard(self.q_modes)

    def solver(self) -> SolverConfig:
        return SolverConfig(dt_rate=self.dt_rate, oversample=self.oversample, tail_tol=self.tail_tol)

    def transport(self) -> syn.TransportParams:
        return syn.TransportParams(tau=self.tau, n=self.n, n_outer=self.n_outer, n_neg=self.n_neg,
                                   symmetric=self.symmetric)


def _convert(field: dataclasses.Field, raw: str):
    kind = field.type if isinstance(field.type, str) else field.type.__name__
    try:
        if kind == "bool":
            low = raw.strip().lower()
            if low in ("1", "true", "yes", "on"):
                return True
            if low in ("0", "false", "no", "off"):
                return False
            raise ValueError(raw)
        if kind == "int":
            return int(raw)
        if kind == "float":
            return float(raw)
        return raw.strip()
    except ValueError:
        raise ConfigError(f"bad value {raw!r} for {field.name} ({kind})") from None


def parse_flat(text: str) -> dict:
    """``key = value`` lines; ``#`` starts a comment."""
    out = {}
    for lineno, line in enumerate(text.splitlines(), 1):
        line = line.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ConfigError(f"line {lineno}: expected key = value")
        k, v = line.split("=", 1)
        out[k.strip()] = v.strip()
    return out


def build_config(path: str | None, overrides: dict, env=os.environ) -> RunConfig:
    fields = {f.name: f for f in dataclasses.fields(RunConfig)}
    values = {}
    layers = []
    if path:
        try:
            layers.append(parse_flat(Path(path).read_text()))
        except OSError as exc:
            raise ConfigError(f"cannot read config: {exc}") from exc
    if env.get(ENV_OUTPUT_DIR):
        layers.append({"output_dir": env[ENV_OUTPUT_DIR]})
    layers.append(overrides)
    for layer in layers:
        for k, v in layer.items():
            if k not in fields:
                raise ConfigError(f"unknown config key {k!r}")
            values[k] = v if not isinstance(v, str) else _convert(fields[k], v)
    return RunConfig(**values).validate()


# -- deterministic output ----------------------------------------------------


def fmt(x) -> str:
    if isinstance(x, bool):
        return "true" if x else "false"
    if isinstance(x, int):
        return str(x)
    if isinstance(x, float):
        if math.isnan(x) or math.isinf(x):
            return json.dumps(str(x))
        return format(x, ".17g")
    return str(x)


def dumps(obj, indent: int = 0) -> str:
    """JSON with every float written to 17 significant digits."""
    pad = " " * (indent + 2)
    if isinstance(obj, dict):
        if not obj:
            return "{}"
        items = [f"{pad}{json.dumps(str(k))}: {dumps(v, indent + 2)}" for k, v in obj.items()]
        return "{\n" + ",\n".join(items) + "\n" + " " * indent + "}"
    if isinstance(obj, (list, tuple)):
        if not obj:
            return "[]"
        if all(isinstance(v, (int, float)) and not isinstance(v, bool) for v in obj):
            return "[" + ", ".join(fmt(v) for v in obj) + "]"
        return "[\n" + ",\n".join(pad + dumps(v, indent + 2) for v in obj) + "\n" + " " * indent + "]"
    if obj is None:
        return "null"
    if isinstance(obj, str):
        return json.dumps(obj)
    if hasattr(obj, "item"):  # numpy scalar
        return dumps(obj.item(), indent)
    return fmt(obj)


def write_atomic(path: Path, text: str):
    path.parent.mkdir(parents=True, exist_ok=True)
    fd, tmp = tempfile.mkstemp(dir=path.parent, prefix=f".{path.name}.", suffix=".tmp")
    try:
        with os.fdopen(fd, "w", newline="") as fh:
            fh.write(text)
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise


def csv_text(header, rows) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(header)
    for r in rows:
        w.writerow([fmt(v) if not hasattr(v, "item") else fmt(v.item()) for v in r])
    return buf.getvalue()


def diag(level: str, kind: str, message: str, **extra):
    print(json.dumps({"level": level, "kind": kind, "message": message, **extra}), file=sys.stderr)


def _load_json(arg: str):
    """Inline JSON or a path to a JSON file."""
    text = arg.strip()
    if not text.startswith(("{", "[")):
        try:
            text = Path(arg).read_text()
        except OSError as exc:
            raise ConfigError(f"cannot read {arg}: {exc}") from exc
    try:
        return json.loads(text)
    except json.JSONDecodeError as exc:
        raise ConfigError(f"invalid JSON in {arg[:40]!r}: {exc}") from exc


def _state_arg(arg, cfg: RunConfig) -> SpectralState:
    if not arg:
        return SpectralState.mode(cfg.K, 0, cfg.alpha)
    try:
        return SpectralState.from_json(_load_json(arg))
    except (KeyError, ValueError) as exc:
        raise ConfigError(f"bad state file: {exc}") from exc


def _poly_arg(arg) -> TrigPoly:
    try:
        return TrigPoly.from_json(_load_json(arg))
    except (KeyError, TypeError, ValueError) as exc:
        raise ConfigError(f"bad trigonometric polynomial: {exc}") from exc


def _terms_arg(arg) -> list:
    try:
        return [syn.ConeTerm(float(t["lam"]), TrigPoly.from_json(t["phi"]), int(t.get("sign", 1)))
                for t in _load_json(arg)]
    except (KeyError, TypeError, ValueError) as exc:
        raise ConfigError(f"bad cone terms: {exc}") from exc


def parse_word(obj) -> list:
    """Atoms: ``{"atom": "phase"|"translate"|"global"|"transport", ...}``."""
    word = []
    for a in obj:
        kind = a.get("atom")
        if kind == "phase":
            word.append(syn.Phase(TrigPoly.from_json(a["theta"])))
        elif kind == "translate":
            word.append(syn.Translate(float(a["delta"])))
        elif kind == "global":
            word.append(syn.GlobalPhase(float(a["c"])))
        elif kind == "transport":
            terms = tuple(syn.ConeTerm(float(t["lam"]), TrigPoly.from_json(t["phi"]), int(t.get("sign", 1)))
                          for t in a["terms"])
            word.append(syn.Transport(terms, float(a.get("time", 1.0))))
        else:
            raise ConfigError(f"unknown word atom {kind!r}")
    return word


# -- subcommands -------------------------------------------------------------


def cmd_simulate(args, cfg: RunConfig, out: Path) -> int:
    Q = cfg.profiles()
    psi = _state_arg(args.state, cfg)
    try:
        prog = ControlProgram.from_json(_load_json(args.program)) if args.program else ControlProgram(Q.q, [])
    except (KeyError, ValueError) as exc:
        raise ConfigError(f"bad program file: {exc}") from exc
    final, rows = evolve_program(psi, prog, Q, cfg.solver(), trace=True)
    write_atomic(out / "state_out.json", dumps(final.to_json()) + "\n")
    write_atomic(out / "trace.csv", csv_text(TraceRow.FIELDS,
                                             [(r.segment, r.t_end, r.l2_norm, r.h1_norm, r.tail_mass) for r in rows]))
    drift = abs(final.norm() - psi.norm())
    diag("info", "simulate", "done", segments=len(prog), norm_drift=drift, tail=final.tail)
    return 0


def _write_calibration(out: Path, cal_curve):
    rows = [(t.param, t.error, t.total_time, t.segment_count) for t in cal_curve]
    write_atomic(out / "calibration.csv", csv_text(syn.Calibration.CSV_FIELDS, rows))


def cmd_synth_phase(args, cfg: RunConfig, out: Path) -> int:
    Q = cfg.profiles()
    theta = _poly_arg(args.theta)
    psi = _state_arg(args.state, cfg)
    target = syn.PhaseTarget(theta, cfg.epsilon, cfg.time_budget)
    try:
        prog, err, cal = syn.phase_program(target, Q, psi, cfg.solver())
    except BudgetExceeded as exc:
        _write_calibration(out, exc.curve or [])
        diag("error", "BudgetExceeded", str(exc), best_error=exc.best_error)
        return 1
    write_atomic(out / "program.json", dumps(prog.to_json()) + "\n")
    _write_calibration(out, cal.curve)
    write_atomic(out / "summary.json", dumps({"error": err, "tau": cal.param, "total_time": prog.total_time,
                                              "segments": len(prog), "K": cal.extra.get("K"),
                                              "passed": err < cfg.epsilon}) + "\n")
    return 0


def cmd_synth_transport(args, cfg: RunConfig, out: Path) -> int:
    Q = cfg.profiles()
    params = cfg.transport()
    if args.terms:
        terms = _terms_arg(args.terms)
    else:
        phi = _poly_arg(args.phi or '{"a0": 0, "cos": [0], "sin": [1]}')
        terms = [syn.ConeTerm(3.0, phi)]
    t = args.time
    ops = syn.realize_ops(syn.signed_transport_ops(terms, t, cfg.alpha, params), Q, params.ladder)
    f = syn.cone_field(terms)
    states = [s for s in syn.witness_states(cfg.K, cfg.alpha)]
    targets = [transport_apply(s.resized(4 * cfg.K), f, t, config=cfg.solver()) for s in states]
    err, prog, extra = syn.measure_ops(ops, Q, states, cfg.solver(), targets=targets)
    write_atomic(out / "program.json", dumps(prog.to_json()) + "\n")
    ok = err < cfg.epsilon
    write_atomic(out / "summary.json", dumps({"error": err, "errors": extra["errors"],
                                              "compile_errors": extra["compile_errors"], "K": extra["K"],
                                              "total_time": prog.total_time, "segments": len(prog),
                                              "passed": ok}) + "\n")
    if not ok:
        diag("error", "BudgetExceeded", f"transport error {err:.3e} above {cfg.epsilon:g}")
    return 0 if ok else 1


def cmd_steer(args, cfg: RunConfig, out: Path) -> int:
    Q = cfg.profiles()
    word = parse_word(_load_json(args.word))
    psi = _state_arg(args.state, cfg)
    target = SpectralState.from_json(_load_json(args.target)) if args.target else None
    try:
        res = syn.steer_word(word, psi, cfg.epsilon, Q, cfg.transport(), target, cfg.solver())
    except NormMismatch as exc:
        diag("error", "NormMismatch", str(exc))
        return 2
    except BudgetExceeded as exc:
        diag("error", "BudgetExceeded", str(exc), best_error=exc.best_error)
        return 1
    write_atomic(out / "program.json", dumps(res.program.to_json()) + "\n")
    write_atomic(out / "state_out.json", dumps(res.psi_final.to_json()) + "\n")
    write_atomic(out / "summary.json", dumps({"error": res.error, "beta": res.beta,
                                              "error_mod_phase": res.error_mod_phase,
                                              "compile_error": res.compile_error,
                                              "total_time": res.program.total_time,
                                              "segments": len(res.program), "passed": True}) + "\n")
    return 0


def cmd_saturate(args, cfg: RunConfig, out: Path) -> int:
    rep = saturation_report(args.n, args.nmax, cfg.profiles(), field_N_max=args.field_nmax)
    write_atomic(out / "saturation.json", dumps(rep.to_json()) + "\n")
    rows = [(m["N"], m["parity"], m["depth"], m["tree_size"], m["max_coeff"], m["ok"]) for m in rep.modes]
    write_atomic(out / "saturation.csv", csv_text(("N", "parity", "depth", "tree_size", "max_coeff", "ok"), rows))
    if not rep.passed:
        diag("error", "CertificateFailure", "saturation report has failing entries")
    return 0 if rep.passed else 1


def _study(name: str, args, cfg: RunConfig):
    if name == "strang":
        dts, errs, rep = strang_study(alpha=cfg.alpha)
        ok = abs(rep.slope - 2.0) <= 0.1 and errs[-1] < 1e-6
        return ("dt", "error"), list(zip(dts, errs)), {"slope": rep.slope, "residual": rep.residual,
                                                      "finest_error": errs[-1], "passed": ok}
    if name == "satlimit":
        sign = args.sign
        taus, errs = satlimit_study(cfg.alpha, range(4, args.jmax + 1), sign)
        fin = taus[::-1], errs[::-1]
        C = power_law_envelope(taus, errs, 5 / 24)
        rep = fit_rate(*fin, drop_coarse=False)
        ok = eventually_decreasing(errs) and errs[-1] < 1e-2
        return ("tau", "error"), list(zip(taus, errs)), {"sign": sign, "slope": rep.slope, "envelope_C": C,
                                                        "finest_error": errs[-1], "passed": ok}
    if name == "trotter":
        ns, errs, rep = trotter_study()
        ok = abs(rep.slope - 1.0) <= 0.2
        return ("n", "error"), list(zip(ns, errs)), {"slope": rep.slope, "passed": ok}
    if name == "wtn":
        rows = wtn_study(cfg.alpha, cfg.tau, tuple(args.ns), cfg.symmetric)
        errs = [r["error"] for r in rows]
        ok = all(b < a for a, b in zip(errs, errs[1:])) and errs[-1] < 5e-2
        return (("n", "error", "total_time", "segments"),
                [(r["n"], r["error"], r["total_time"], r["segments"]) for r in rows],
                {"tau": cfg.tau, "symmetric": cfg.symmetric, "finest_error": errs[-1], "passed": ok})
    if name == "period":
        Pi, returns = period_study()
        exact = 2 * math.pi / math.sqrt(2)
        ok = abs(Pi - exact) < 1e-8 and max(returns) < 1e-6
        return ("multiple", "distance_to_identity"), list(zip((1, 2, 3), returns)), {
            "period": Pi, "period_exact": exact, "passed": ok}
    raise ConfigError(f"unknown study {name!r}")


def cmd_convergence(args, cfg: RunConfig, out: Path) -> int:
    header, rows, summary = _study(args.study, args, cfg)
    write_atomic(out / f"convergence_{args.study}.csv", csv_text(header, rows))
    write_atomic(out / f"convergence_{args.study}.json", dumps(summary) + "\n")
    if not summary["passed"]:
        diag("error", "CheckFailed", f"{args.study} study did not meet its tolerance", **{
            k: v for k, v in summary.items() if isinstance(v, (int, float))})
    return 0 if summary["passed"] else 1


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="kdvsat", description=__doc__.splitlines()[0])
    p.add_argument("--config", help="flat key = value configuration file")
    p.add_argument("--set", action="append", default=[], metavar="KEY=VALUE", help="override a config key")
    p.add_argument("--output-dir", help="output directory (overrides config and environment)")
    p.add_argument("--alpha", type=float)
    p.add_argument("-K", type=int, dest="K")
    sub = p.add_subparsers(dest="command", required=True)

    s = sub.add_parser("simulate", help="evolve a state under a program file")
    s.add_argument("--state")
    s.add_argument("--program")
    s.set_defaults(func=cmd_simulate)

    s = sub.add_parser("synth-phase", help="compile exp(i theta) and calibrate")
    s.add_argument("--theta", required=True, help="TrigPoly JSON (inline or file)")
    s.add_argument("--state")
    s.set_defaults(func=cmd_synth_phase)

    s = sub.add_parser("synth-transport", help="compile a transport exp(t T_f)")
    s.add_argument("--phi", help="TrigPoly JSON; field is 3 (phi')^2")
    s.add_argument("--terms", help="JSON list of {sign, lam, phi}; field is sum sign lam (phi')^2")
    s.add_argument("--time", type=float, default=1.0)
    s.set_defaults(func=cmd_synth_transport)

    s = sub.add_parser("steer", help="compile and simulate a word of atoms")
    s.add_argument("--word", required=True)
    s.add_argument("--state")
    s.add_argument("--target", help="state JSON the result is compared against")
    s.set_defaults(func=cmd_steer)

    s = sub.add_parser("saturate", help="closure and certificate report")
    s.add_argument("--n", type=int, default=3)
    s.add_argument("--nmax", type=int, default=16)
    s.add_argument("--field-nmax", type=int, default=None)
    s.set_defaults(func=cmd_saturate)

    s = sub.add_parser("convergence", help="named convergence study")
    s.add_argument("study", choices=["strang", "satlimit", "trotter", "wtn", "period"])
    s.add_argument("--sign", type=int, choices=[-1, 1], default=-1, help="satlimit: sign of the cubic target")
    s.add_argument("--jmax", type=int, default=22, help="satlimit: finest tau is 2**-jmax")
    s.add_argument("--ns", type=int, nargs="+", default=[16, 32, 64], help="wtn: inner step counts")
    s.set_defaults(func=cmd_convergence)
    return p


def run(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return int(exc.code or 0)
    overrides = {}
    for item in args.set:
        if "=" not in item:
            diag("error", "ConfigError", f"--set expects KEY=VALUE, got {item!r}")
            return 2
        k, v = item.split("=", 1)
        overrides[k.strip()] = v.strip()
    for key in ("alpha", "K"):
        if getattr(args, key) is not None:
            overrides[key] = str(getattr(args, key))
    if args.output_dir:
        overrides["output_dir"] = args.output_dir
    try:
        cfg = build_config(args.config, overrides)
        return args.func(args, cfg, Path(cfg.output_dir))
    except ConfigError as exc:
        diag("error", "ConfigError", str(exc))
        return 2
    except KdvSatError as exc:
        diag("error", type(exc).__name__, str(exc))
        return 1


def main():
    sys.exit(run())


if __name__ == "__main__":
    main()
