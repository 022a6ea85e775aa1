"""Command-line runner.

Each experiment is one JSON config holding a ``model`` block plus run
parameters, for example

    {"model": {"L": 4, "J": 1.0, "gamma_l": 0.1, "gamma_g": 0.2},
     "initial": "vacuum",
     "times": {"start": 0, "stop": 50, "num": 21},
     "observables": ["n1nL", "n1", "T:1,5"]}

Observables are ``n<j>`` (site occupation), ``n<i>n<j>``, ``nL``, ``n1nL``,
``cov`` or ``T:<j1>,<j2>,..`` (Majorana product, 1-based labels).

Exit codes: 2 invalid config, 3 method incompatible with the model
(closure violated, or recursion with quadratic dissipators), 4 size guard.
"""
from __future__ import annotations

import argparse
import csv
import io
import json
import re
import sys
from pathlib import Path

import numpy as np

from . import combinatorics as cb
from . import oracle
from . import quad_dynamics as qd
from . import quartic_dynamics as qq
from . import spectrum as spc
from .model import InitialState, ModelError, _cplx, _enc, model_from_dict, validate
from .structure import build_structure, rapid_spectrum

EXIT_CONFIG, EXIT_CLASS, EXIT_SIZE = 2, 3, 4


class CLIError(Exception):
    def __init__(self, msg: str, code: int):
        super().__init__(msg)
        self.code = code


# -- config parsing ----------------------------------------------------------

def load_config(path) -> dict:
    try:
        with open(path) as fh:
            cfg = json.load(fh)
    except (OSError, json.JSONDecodeError) as exc:
        raise CLIError(f"cannot read config: {exc}", EXIT_CONFIG) from exc
    if not isinstance(cfg, dict):
        raise CLIError("config must be a JSON object", EXIT_CONFIG)
    return cfg


def config_model(cfg: dict):
    try:
        return model_from_dict(cfg.get("model", cfg))
    except ModelError as exc:
        raise CLIError(str(exc), EXIT_CONFIG) from exc


def config_initial(cfg: dict, L: int) -> InitialState:
    spec = cfg.get("initial", "vacuum")
    try:
        if isinstance(spec, str):
            return InitialState(spec)
        kind = spec["kind"]
        if kind == "gaussian":
            return InitialState("gaussian", _cplx(spec["T2"], 2))
        if kind == "dense":
            return InitialState("dense", _cplx(spec["psi"], 1))
        return InitialState(kind)
    except (KeyError, TypeError, ModelError) as exc:
        raise CLIError(f"bad initial state: {exc}", EXIT_CONFIG) from exc


def config_times(cfg: dict) -> np.ndarray:
    spec = cfg.get("times")
    try:
        if isinstance(spec, dict):
            ts = np.linspace(float(spec["start"]), float(spec["stop"]), int(spec["num"]))
        else:
            ts = np.asarray(spec if spec is not None else [], dtype=float).ravel()
    except (KeyError, TypeError, ValueError) as exc:
        raise CLIError(f"bad time grid: {exc}", EXIT_CONFIG) from exc
    if ts.size == 0:
        raise CLIError("empty time grid", EXIT_CONFIG)
    if np.any(ts < 0) or np.any(np.diff(ts) <= 0):
        raise CLIError("times must be non-negative and strictly increasing", EXIT_CONFIG)
    return ts


_OCC = re.compile(r"^n(\d+|L)$")
_PAIR = re.compile(r"^n(\d+|L)n(\d+|L)$")


def _site(tok: str, L: int) -> int:
    j = L if tok == "L" else int(tok)
    if not 1 <= j <= L:
        raise CLIError(f"site {tok} out of range 1..{L}", EXIT_CONFIG)
    return j - 1


def normal_order(indices) -> tuple[complex, tuple]:
    """w_{j1}...w_{jn} = coef * (product over a strictly increasing index tuple)."""
    idx = list(indices)
    sign = 1
    for i in range(len(idx)):  # bubble sort; each swap of distinct labels flips the sign
        for k in range(len(idx) - 1 - i):
            if idx[k] > idx[k + 1]:
                idx[k], idx[k + 1] = idx[k + 1], idx[k]
                sign = -sign
    out, coef = [], complex(sign)
    for j in idx:
        if out and out[-1] == j:
            out.pop()
            coef *= 0.5  # w_j^2 = 1/2
        else:
            out.append(j)
    return coef, tuple(out)


def observable_terms(name: str, L: int) -> list[tuple[complex, tuple]]:
    """Expand an observable into sum coef * <w_{j1} ... w_{jn}> (0-based, sorted)."""
    def occ(j):
        return [(0.5, ()), (-1j, (j, L + j))]

    if name == "cov":
        raise CLIError("cov is derived, not linear", EXIT_CONFIG)
    if name.startswith("T:"):
        try:
            js = [int(x) - 1 for x in name[2:].split(",")]
        except ValueError as exc:
            raise CLIError(f"bad observable {name!r}", EXIT_CONFIG) from exc
        if any(not 0 <= j < 2 * L for j in js) or len(js) % 2:
            raise CLIError(f"observable {name!r} needs an even number of labels in 1..{2 * L}", EXIT_CONFIG)
        return [normal_order(js)]
    m = _OCC.match(name)
    if m:
        return occ(_site(m.group(1), L))
    m = _PAIR.match(name)
    if m:
        a, b = _site(m.group(1), L), _site(m.group(2), L)
        terms = []
        for ca, ia in occ(a):
            for cb_, ib in occ(b):
                c, key = normal_order(ia + ib)
                terms.append((ca * cb_ * c, key))
        return terms
    raise CLIError(f"unknown observable {name!r}", EXIT_CONFIG)


def _evaluate(names, L, corr) -> dict:
    out = {}
    for name in names:
        if name == "cov":
            vals = {k: _evaluate([k], L, corr)[k] for k in ("n1", "nL", "n1nL")}
            out[name] = vals["n1nL"] - vals["n1"] * vals["nL"]
            continue
        out[name] = sum(c * (1.0 if not key else corr(key)) for c, key in observable_terms(name, L))
    return out


def _max_order(names, L) -> int:
    n = 2
    for name in names:
        if name == "cov":
            n = max(n, 4)
            continue
        for _, key in observable_terms(name, L):
            n = max(n, len(key))
    return n


# -- method plumbing ---------------------------------------------------------

def _check_method(model, method: str):
    if method == "recursion" and model.quadratic:
        raise CLIError("recursion method needs a quadratic Liouvillian; quadratic dissipators present", EXIT_CLASS)
    if method == "reduced":
        rep = qq.check_closure(model)
        if not rep.closed:
            raise CLIError(f"closure condition violated (residual {rep.residual:.3g})", EXIT_CLASS)
    if method == "oracle" and model.L > oracle.MAX_L:
        raise CLIError(f"oracle limited to L <= {oracle.MAX_L}", EXIT_SIZE)


def _default_method(model, method):
    return method or ("reduced" if model.quadratic else "recursion")


def trajectory(model, state, times, names, method: str) -> list[dict]:
    """Observables at each time for one of the three methods."""
    L, N = model.L, 2 * model.L
    _check_method(model, method)
    order = _max_order(names, L)
    rows = []
    if method == "recursion":
        sm = build_structure(model)
        steady = qd.steady_state_T2(sm)
        if N**order > qd.FULL_TENSOR_BUDGET:
            return _entrywise(sm, steady, state, times, names)
        T_init = qd.initial_corr(state, L, order)
        for t in times:
            tens = {2: qd.evolve_T2(sm, T_init[2], t, steady)}
            for m in range(2, order // 2 + 1):
                tens[2 * m] = qd.high_order(sm, T_init, m, t, steady)
            rows.append(_evaluate(names, L, lambda k: tens[len(k)][k]))
    elif method == "reduced":
        top = order + order % 2
        gens = qq.build_sector_generators(model, orders=range(0, top + 1, 2))
        init = qq.reduced_initial(state, L, top)
        for tens in qq.evolve_reduced(gens, init, times, top):
            rows.append(_evaluate(names, L, lambda k: tens[len(k)][cb.rank(k, N)]))
    elif method == "oracle":
        lv = oracle.build_liouvillian(model)
        rho0 = oracle.initial_density(state, L)
        w = oracle.majoranas(L)
        for t in times:
            rho = lv.evolve(rho0, t) if t else rho0

            def corr(k, rho=rho):
                op = np.eye(lv.dim, dtype=complex)
                for j in k:
                    op = op @ w[j]
                return np.trace(op @ rho)

            rows.append(_evaluate(names, L, corr))
    else:
        raise CLIError(f"unknown method {method!r}", EXIT_CONFIG)
    return rows


def _entrywise(sm, steady, state, times, names) -> list[dict]:
    """Recursion path for large L: Gaussian states stay Gaussian, and a GHZ
    state with L above the order evolves as the vacuum/full average, so only
    the requested entries are formed from T2(t)."""
    L = sm.L
    if state.kind == "ghz":
        parts = [(0.5, InitialState("vacuum")), (0.5, InitialState("full"))]
        if L <= _max_order(names, L):
            raise CLIError("GHZ tensors with L <= order need the full-tensor path", EXIT_SIZE)
    elif state.is_gaussian:
        parts = [(1.0, state)]
    else:
        raise CLIError("full tensors exceed the memory budget for this initial state", EXIT_SIZE)
    T0 = [(w, qd.initial_corr(st, L, 2)[2]) for w, st in parts]
    rows = []
    for t in times:
        T2s = [(w, qd.evolve_T2(sm, T, t, steady)) for w, T in T0]
        rows.append(_evaluate(names, L, lambda k: sum(w * qd.pairing_sum(T2, k) for w, T2 in T2s)))
    return rows


def variants(cfg: dict) -> list[tuple[str, dict]]:
    """Expand ``variants`` (model/initial overrides) into (column suffix, config)."""
    vs = cfg.get("variants")
    if not vs:
        return [("", cfg)]
    out = []
    for k, v in enumerate(vs):
        c = dict(cfg)
        if "model" in v:
            c["model"] = {**cfg.get("model", {}), **v["model"]}
        if "initial" in v:
            c["initial"] = v["initial"]
        out.append((f".v{k + 1}", c))
    return out


# -- output ------------------------------------------------------------------

def fmt(x) -> str:
    """Shortest round-trip float text."""
    if isinstance(x, (bool, np.bool_)):
        return "true" if x else "false"
    if isinstance(x, (int, np.integer)):
        return str(int(x))
    if isinstance(x, str):
        return x
    return repr(float(x))


def write_csv(header, rows, out) -> str:
    buf = io.StringIO()
    wr = csv.writer(buf, lineterminator="\n")
    wr.writerow(header)
    for r in rows:
        wr.writerow([fmt(v) for v in r])
    text = buf.getvalue()
    if out:
        Path(out).write_text(text)
    else:
        sys.stdout.write(text)
    return text


def _jsonable(x):
    if isinstance(x, dict):
        return {str(k): _jsonable(v) for k, v in x.items()}
    if isinstance(x, (list, tuple)):
        return [_jsonable(v) for v in x]
    if isinstance(x, np.ndarray):
        return _enc(x) if np.iscomplexobj(x) else x.tolist()
    if isinstance(x, (complex, np.complexfloating)):
        return [float(np.real(x)), float(np.imag(x))]
    if isinstance(x, (np.floating, np.integer, np.bool_)):
        return x.item()
    return x


def write_json(obj, out=None):
    text = json.dumps(_jsonable(obj), indent=2, sort_keys=True) + "\n"
    if out:
        Path(out).write_text(text)
    else:
        sys.stdout.write(text)
    return text


# -- subcommands -------------------------------------------------------------

def cmd_evolve(args, cfg) -> int:
    times = config_times(cfg)
    names = cfg.get("observables", ["n1nL"])
    header, cols, diffs = ["t"], [], {}
    for suffix, c in variants(cfg):
        model = config_model(c)
        state = config_initial(c, model.L)
        method = _default_method(model, args.method or c.get("method"))
        rows = trajectory(model, state, times, names, method)
        for n in names:
            header += [f"{n}{suffix}_re", f"{n}{suffix}_im"]
            cols.append([r[n] for r in rows])
        if args.compare_oracle:
            ref = trajectory(model, state, times, names, "oracle")
            diffs[suffix or "main"] = max(abs(r[n] - q[n]) for r, q in zip(rows, ref) for n in names)
    body = [[t] + [v for col in cols for v in (np.real(col[i]), np.imag(col[i]))] for i, t in enumerate(times)]
    write_csv(header, body, args.out)
    if args.compare_oracle:
        print(json.dumps({"max_abs_diff_vs_oracle": diffs}, sort_keys=True), file=sys.stderr)
    return 0


def cmd_spectrum(args, cfg) -> int:
    model = config_model(cfg)
    sc = cfg.get("spectrum", {})
    parity = args.parity or sc.get("parity", "even")
    method = args.method or sc.get("method") or ("reduced" if model.quadratic else "recursion")
    if parity not in ("even", "odd", "all"):
        raise CLIError(f"bad parity {parity!r}", EXIT_CONFIG)
    _check_method(model, method)
    if method == "recursion":
        res = spc.quadratic_spectrum(rapid_spectrum(build_structure(model)), parity)
    elif method == "reduced":
        top = args.max_order if args.max_order is not None else sc.get("max_order", 2 * model.L)
        gens = qq.build_sector_generators(model, orders=range(0, top + 1))
        res = spc.quartic_spectrum(gens, (parity,))
    else:
        res = spc.oracle_spectrum(oracle.build_liouvillian(model), parity)
    write_csv(["re", "im", "parity", "sector", "multiplicity", "conjectured"], res.rows(), args.out)
    if args.compare_oracle:
        _check_method(model, "oracle")
        ref = spc.oracle_spectrum(oracle.build_liouvillian(model))
        tol = args.tol
        report = {"method": method, "tol": tol}
        for p in ("even", "odd"):
            mine = res.values(p)
            if mine.size == 0:
                continue
            mr = spc.match_spectra(mine, ref.values(p))
            report[p] = {
                "max_distance": mr.max_distance, "n_computed": mr.n_left, "n_oracle": mr.n_right,
                "pass": mr.ok(tol), "conjectured": p == "odd" and method == "reduced",
            }
        print(json.dumps(report, sort_keys=True), file=sys.stderr)
    return 0


def _steady_quadratic(model) -> dict:
    sm = build_structure(model)
    st = qd.steady_state_T2(sm)
    L, T2 = model.L, st.T2
    # the quadratic NESS is Gaussian, so the order-4 entry is a pairing sum
    idx = [0, L - 1, L, 2 * L - 1]
    T4 = qd.wick(T2[np.ix_(idx, idx)], 4)[0, 1, 2, 3]
    n1, nL = qd.occupation(T2, 0), qd.occupation(T2, L - 1)
    n1nL = qd.n1_nL(T2, T4)
    return {"n1": n1, "nL": nL, "n1nL": n1nL, "cov": n1nL - n1 * nL,
            "non_unique": st.non_unique, "path": "lyapunov"}


def steady_observables(model, method: str) -> dict:
    _check_method(model, method)
    if method == "recursion":
        return _steady_quadratic(model)
    if method == "reduced":
        gens = qq.build_sector_generators(model, orders=(0, 2, 4))
        ness = qq.steady_state_reduced(gens, singular="evolve")
        return {**qq.boundary_observables(ness.tensors, model.L), **ness.method}
    lv = oracle.build_liouvillian(model)
    rho = lv.steady_state()
    a = oracle.annihilators(model.L)
    n1, nL = a[0].conj().T @ a[0], a[-1].conj().T @ a[-1]
    vals = {"n1": np.trace(n1 @ rho), "nL": np.trace(nL @ rho), "n1nL": np.trace(n1 @ nL @ rho)}
    vals["cov"] = vals["n1nL"] - vals["n1"] * vals["nL"]
    return {**vals, "path": "oracle"}


def cmd_steady(args, cfg) -> int:
    results = []
    for suffix, c in variants(cfg):
        model = config_model(c)
        method = _default_method(model, args.method or c.get("method"))
        out = {"variant": suffix.lstrip(".") or "main", "method": method, **steady_observables(model, method)}
        if args.compare_oracle:
            ref = steady_observables(model, "oracle")
            out["max_abs_diff_vs_oracle"] = max(abs(out[k] - ref[k]) for k in ("n1", "nL", "n1nL"))
        results.append(out)
    write_json(results[0] if len(results) == 1 else results, args.out)
    return 0


def fcs_weights(cfg: dict, L: int):
    spec = cfg.get("fcs", {"half_chain": True})
    if spec.get("half_chain"):
        coeffs = [2.0 / L if j < L // 2 else 0.0 for j in range(L)]
    else:
        coeffs = [float(x) for x in spec["coeffs"]]
    if len(coeffs) != L:
        raise CLIError(f"fcs needs {L} coefficients", EXIT_CONFIG)
    return coeffs


def log_generating(model, state, times, coeffs, method: str) -> list[complex]:
    """ln <exp(sum_j x_j n_j)> along the time grid."""
    _check_method(model, method)
    L = model.L
    if method == "recursion":
        if not state.is_gaussian:
            raise CLIError("the determinant formula needs a Gaussian initial state", EXIT_CLASS)
        sm = build_structure(model)
        steady = qd.steady_state_T2(sm)
        T20 = qd.initial_corr(state, L, 2)[2]
        W, c = qd.number_weight(L, coeffs)
        return [c + np.log(qd.fcs(qd.evolve_T2(sm, T20, t, steady), [W])) for t in times]
    if method == "oracle":
        lv = oracle.build_liouvillian(model)
        rho0 = oracle.initial_density(state, L)
        a = oracle.annihilators(L)
        Nop = sum(x * ai.conj().T @ ai for x, ai in zip(coeffs, a))
        E = np.diag(np.exp(np.diag(Nop)))  # number operators are diagonal in the occupation basis
        return [np.log(np.trace(E @ (lv.evolve(rho0, t) if t else rho0))) for t in times]
    raise CLIError("fcs supports the recursion and oracle methods", EXIT_CLASS)


def cmd_fcs(args, cfg) -> int:
    times = config_times(cfg)
    header, cols, diffs = ["t"], [], {}
    for suffix, c in variants(cfg):
        model = config_model(c)
        state = config_initial(c, model.L)
        coeffs = fcs_weights(c, model.L)
        method = args.method or c.get("method") or "recursion"
        vals = log_generating(model, state, times, coeffs, method)
        header += [f"lnZ{suffix}_re", f"lnZ{suffix}_im"]
        cols.append(vals)
        if args.compare_oracle:
            ref = log_generating(model, state, times, coeffs, "oracle")
            diffs[suffix or "main"] = max(abs(a - b) for a, b in zip(vals, ref))
    body = [[t] + [v for col in cols for v in (col[i].real, col[i].imag)] for i, t in enumerate(times)]
    write_csv(header, body, args.out)
    if args.compare_oracle:
        print(json.dumps({"max_abs_diff_vs_oracle": diffs}, sort_keys=True), file=sys.stderr)
    return 0


FAMILIES = {
    # quadratic dissipation as the perturbation
    "quadratic_perturbation": lambda d, eps, s: (s * (1 + d), s * (1 - d), eps),
    # linear dissipation as the perturbation
    "linear_perturbation": lambda d, eps, s: (eps * (1 + d), eps * (1 - d), s),
}


def cov_points(spec: dict) -> list[tuple]:
    """(delta, gamma_l, gamma_g, gamma_t) in output order."""
    if "grid" in spec:
        grids = spec["grid"] if isinstance(spec["grid"], list) else [spec["grid"]]
        pts = []
        for g in grids:
            for gl in g["gamma_l"]:
                for gg in g["gamma_g"]:
                    gt = 0.5 * (gl + gg) if g["gamma_t"] == "mean" else float(g["gamma_t"])
                    d = (gl - gg) / (gl + gg) if gl + gg else 0.0
                    pts.append((d, float(gl), float(gg), gt))
        return pts
    if "families" in spec:
        base = {k: v for k, v in spec.items() if k != "families"}
        return [p for f in spec["families"] for p in cov_points({**base, **f})]
    fam = FAMILIES[spec["family"]]
    eps, strong = float(spec.get("eps", 1e-4)), float(spec.get("strong", 0.5))
    return [(float(d), *fam(float(d), eps, strong)) for d in spec["deltas"]]


def cmd_cov_study(args, cfg) -> int:
    from concurrent.futures import ThreadPoolExecutor

    spec = cfg.get("cov_study")
    if not spec:
        raise CLIError("config needs a cov_study block", EXIT_CONFIG)
    try:
        L, J = int(spec.get("L", 12)), float(spec.get("J", 1.0))
        pts = cov_points(spec)
    except (KeyError, TypeError, ValueError) as exc:
        raise CLIError(f"bad cov_study block: {exc}", EXIT_CONFIG) from exc
    workers = int(spec.get("workers", 1))

    def run(p):
        return qq.covariance_point(L, J, *p[1:])

    with ThreadPoolExecutor(max(1, workers)) as ex:
        res = list(ex.map(run, pts))  # collected in grid order
    rows = [[d, gl, gg, gt, r["cov"].real] for (d, gl, gg, gt), r in zip(pts, res)]
    write_csv(["delta", "gamma_l", "gamma_g", "gamma_t", "cov_re"], rows, args.out)
    tol = args.tol
    signs = {"positive": int(sum(r[4] > tol for r in rows)), "negative": int(sum(r[4] < -tol for r in rows))}
    signs["zero"] = len(rows) - signs["positive"] - signs["negative"]
    print(json.dumps(signs, sort_keys=True), file=sys.stderr)
    return 0


def cmd_validate(args, cfg) -> int:
    model = config_model(cfg)
    rep = validate(model)
    clo = qq.check_closure(model)
    out = {"validation": rep.as_dict(), "closure": {"residual": clo.residual, "closed": clo.closed}}
    if args.compare_oracle or model.L <= 4:
        if model.L <= oracle.MAX_L:
            lv = oracle.build_liouvillian(model)
            out["oracle_trace_residual"] = float(np.abs(np.eye(lv.dim).reshape(-1) @ lv.matrix).max())
    write_json(out, args.out)
    return EXIT_CONFIG if rep.fatal else 0


def cmd_dump_structure(args, cfg) -> int:
    model = config_model(cfg)
    sm = build_structure(model)
    out = sm.as_dict()
    out["f0"] = sm.f0
    try:
        out["alphas"] = rapid_spectrum(sm).alphas
    except np.linalg.LinAlgError as exc:
        out["alphas_error"] = str(exc)
    write_json(out, args.out)
    return 0


COMMANDS = {
    "evolve": cmd_evolve,
    "spectrum": cmd_spectrum,
    "steady": cmd_steady,
    "fcs": cmd_fcs,
    "cov-study": cmd_cov_study,
    "validate": cmd_validate,
    "dump-structure": cmd_dump_structure,
}


def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", required=True, help="experiment JSON")
    common.add_argument("--out", help="output file (default stdout)")
    common.add_argument("--tol", type=float, default=1e-6, help="pass/fail threshold for reports")
    common.add_argument("--method", choices=["recursion", "reduced", "oracle"])
    common.add_argument("--compare-oracle", action="store_true")
    p = argparse.ArgumentParser(prog="fermiclosure", description="Correlation dynamics of open fermionic chains.")
    sub = p.add_subparsers(dest="command", required=True)
    for name in COMMANDS:
        sp_ = sub.add_parser(name, parents=[common])
        if name == "spectrum":
            sp_.add_argument("--parity", choices=["even", "odd", "all"])
            sp_.add_argument("--max-order", type=int)
    return p


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        cfg = load_config(args.config)
        return COMMANDS[args.command](args, cfg)
    except CLIError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return exc.code
    except qq.NotClosed as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_CLASS
    except (oracle.SizeGuardError, qd.MemoryGuardError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_SIZE
    except ModelError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_CONFIG


if __name__ == "__main__":
    sys.exit(main())
