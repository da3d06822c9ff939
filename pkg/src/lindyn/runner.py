"""Config-driven execution of experiment tasks and report assembly.

The canonical report (``report.json``) depends only on the configuration:
keys are sorted, floats are written with ``repr`` and no clock values are
included. Timing goes to ``meta.json``.
"""
from __future__ import annotations

import json
import math
import time
import traceback
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from . import __version__
from .config import ExperimentConfig, finite_or_str, growth_function, parse_scalar, split_list
from .constructions import (
    WordEmbeddingSequence,
    build_star_recurrent,
    build_z_from_y,
    row_start,
)
from .densities import ReturnSet, banach_density_curve, gen_star_family, lower_density_curve, sucheston_M
from .errors import ConfigError, LindynError
from .measures import build_invariant_candidate, default_battery
from .operators import BackwardShift, Birkhoff, Diagonal, DiffOp, MacLane
from .recurrence import (
    Thresholds,
    classify,
    lbo_falsify,
    lbo_search,
    return_set,
    transfer_block_recurrence,
)
from .spaces import KotheMatrix, NeighborhoodSpec, SpaceSpec, TruncatedVector

SCHEMA_VERSION = 1


def _figure(name, method, *args):
    """Defer a plotting call until the figure is rendered."""
    return name, lambda path: getattr(_plotting(), method)(path, *args)


def _plotting():
    # matplotlib is imported only when figures are requested
    from . import plotting

    return plotting


# ---------------------------------------------------------------------------
# building blocks from config
# ---------------------------------------------------------------------------

def build_space(cfg: ExperimentConfig) -> SpaceSpec:
    s = cfg.space
    if s["variant"] == "omega":
        return SpaceSpec.omega()
    if s["variant"] == "entire":
        return SpaceSpec.entire(int(s.get("circle_samples", 1024)))
    k_max = int(s.get("k_max", max(cfg.K, max(cfg.k0_grid))))
    j_max = int(s.get("j_max", max(cfg.J, cfg.K, 64)))
    m = s.get("matrix", "polynomial")
    if m == "polynomial":
        mat = KotheMatrix.polynomial(k_max, j_max)
    elif m == "omega_type":
        mat = KotheMatrix.omega_type(k_max, j_max)
    else:
        mat = KotheMatrix.from_csv(Path(cfg.base_dir) / m)
    p = s.get("p", "inf")
    return SpaceSpec.kothe(mat, math.inf if p == "inf" else float(p))


def build_operator(cfg: ExperimentConfig):
    o = cfg.operator
    scalars = lambda key: np.array([parse_scalar(v) for v in split_list(o[key])])  # noqa: E731
    v = o["variant"]
    if v == "backward_shift":
        return BackwardShift(np.real(scalars("weights")) if "weights" in o else None)
    if v == "diagonal":
        lam = scalars("lambdas")
        n = int(o.get("repeat", 0)) or len(lam)
        return Diagonal(np.resize(lam, max(n, cfg.horizon + cfg.J + 64)))
    if v == "birkhoff":
        return Birkhoff(complex(scalars("a")[0]))
    if v == "maclane":
        return MacLane()
    return DiffOp(scalars("phi"))


@dataclass
class VectorContext:
    vector: object
    kind: str = "inline"
    extra: dict = field(default_factory=dict)


def required_length(cfg: ExperimentConfig) -> int:
    return cfg.horizon + max(cfg.J, cfg.K, max(cfg.k0_grid), 64) + 2


def build_vector(cfg: ExperimentConfig, space: SpaceSpec) -> VectorContext:
    v = cfg.vector
    tag = space.tag
    if v["source"] == "inline":
        vals = np.array([parse_scalar(t) for t in split_list(v["values"])])
        rep = v.get("repeat", "0")
        n = required_length(cfg) if rep == "auto" else int(rep)
        if n:
            vals = np.resize(vals, n)
        return VectorContext(TruncatedVector(vals, None, tag))
    if v["source"] == "file":
        text = (Path(cfg.base_dir) / v["path"]).read_text()
        vals = np.array([parse_scalar(t) for t in split_list(text.replace("\n", ","))
                         if not t.startswith("#")])
        return VectorContext(TruncatedVector(vals, None, tag), "file")
    if tag != "omega":
        raise ConfigError("constructions live in omega", section="vector", field="construction")
    if v["construction"] == "word_embedding":
        seed = [float(t) for t in split_list(v.get("seed", "1,1,1,1"))]
        rounds = int(v.get("rounds", 2))
        y = WordEmbeddingSequence(seed, rounds)
        z = build_z_from_y(y)
        use = v.get("use", "y")
        return VectorContext(y if use == "y" else z, "word_embedding", {"y": y, "z": z, "seed": seed,
                                                                       "rounds": rounds})
    k_max = int(v.get("k_max", 9))
    spacing = int(v.get("block_spacing", 2))
    length = max(int(v.get("length", 0)), required_length(cfg))
    star = gen_star_family(k_max, spacing, length)
    built = build_star_recurrent(star, length)
    return VectorContext(built.vector, "star_recurrent", {"star": star, "log": built.log})


# ---------------------------------------------------------------------------
# tasks
# ---------------------------------------------------------------------------

@dataclass
class TaskOutput:
    result: dict
    curves: dict = field(default_factory=dict)  # file stem -> list of (header, rows)
    figures: list = field(default_factory=list)  # (file name, callable(path))
    summary: list = field(default_factory=list)


def _center(x, k: int) -> TruncatedVector:
    if isinstance(x, TruncatedVector):
        return x
    return TruncatedVector(np.asarray(x.window(0, k)), None, x.space_tag)


def task_classify(cfg, space, op, ctx: VectorContext) -> TaskOutput:
    report = classify(space, op, ctx.vector, cfg.horizon, cfg.grid, Thresholds(N_min=cfg.N_min))
    res = report.to_dict(include_elems=False)
    rows = [[c.k0, repr(c.eps), len(c.returns), repr(c.d_lower_est), repr(c.bd_est), c.max_gap]
            for c in report.cells]
    out = TaskOutput(res, {"classify_cells": (["k0", "eps", "count", "d_lower_est", "bd_est", "max_gap"], rows)})
    cells = [c.to_dict(True) for c in report.cells]
    out.figures.append(_figure("classify_returns.png", "return_raster", cells, cfg.horizon, "return times per cell"))
    for k, v in report.verdicts.items():
        piv = report.pivotal[k]
        out.summary.append(f"{k}: {v} (pivotal cell k0={piv['k0']}, eps={piv['eps']:g})")
    gaps = sorted({c.max_gap for c in report.cells})
    out.summary.append(f"max gaps across cells: {gaps}")
    return out


def task_lbo(cfg, space, op, ctx: VectorContext) -> TaskOutput:
    growth = growth_function(cfg.growth)
    found = lbo_search(space, op, ctx.vector, cfg.horizon, cfg.k0_grid, cfg.eps_grid, cfg.J, cfg.K, growth)
    res = found.to_dict()
    if found.certificate is None and growth is not None:
        k0, eps = cfg.k0_grid[0], cfg.eps_grid[0]
        wit = lbo_falsify(space, op, ctx.vector, cfg.horizon, k0, eps, growth, cfg.J, limit=20)
        res["falsification"] = {"k0": k0, "eps": eps,
                                "witnesses": [w.__dict__ for w in wit]}
    out = TaskOutput(res)
    if found.certificate is not None:
        c = found.certificate
        out.summary.append(f"lbo certificate at k0={c.k0}, eps={c.eps:g} over {c.return_count} returns"
                           f"{' (vacuous)' if c.vacuous else ''}; max w = {float(np.max(c.w)):.6g}")
    else:
        out.summary.append(f"no lbo certificate under growth '{cfg.growth}' up to H={cfg.horizon}")
    return out


def task_densities(cfg, space, op, ctx: VectorContext) -> TaskOutput:
    out = TaskOutput({"cells": []})
    center = _center(ctx.vector, max(cfg.k0_grid))
    for k0 in cfg.k0_grid:
        for i, eps in enumerate(cfg.eps_grid):
            A = return_set(space, op, ctx.vector, NeighborhoodSpec(center, k0, eps), cfg.horizon)
            lower = lower_density_curve(A)
            banach = banach_density_curve(A, N_min=cfg.N_min)
            such = sucheston_M(A.indicator().astype(float), N_min=cfg.N_min)
            agree = bool(np.array_equal(banach.values, such.values))
            out.result["cells"].append({
                "k0": k0, "eps": eps, "count": len(A), "d_lower_est": lower.estimate,
                "bd_est": banach.estimate, "sucheston_M_est": such.estimate,
                "sucheston_equals_banach": agree, "monotonicity_check": banach.consistent,
                "curve": [{"N": int(n), "W_N": float(w), "S_N": float(s), "d_N": float(lower.values[n - 1])}
                          for n, w, s in zip(banach.Ns, banach.values, such.values)],
            })
            stem = f"density_k{k0}_e{i}"
            rows = [[int(n), repr(float(lower.values[n - 1])), repr(float(w)), repr(float(s))]
                    for n, w, s in zip(banach.Ns, banach.values, such.values)]
            out.curves[stem] = (["N", "d_N", "W_N", "S_N"], rows)
            if k0 == cfg.k0_grid[0] and i == 0:
                sampled = type(lower)(banach.Ns, lower.values[banach.Ns - 1], lower.estimate, label="d_N")
                out.figures.append(_figure(f"{stem}.png", "density_figure", (sampled, banach), f"k0={k0}, eps={eps:g}"))
            out.summary.append(f"k0={k0} eps={eps:g}: d_lower_est={lower.estimate:.4g} "
                               f"bd_est={banach.estimate:.4g} sucheston==banach: {agree}")
    return out


def task_construct(cfg, space, op, ctx: VectorContext) -> TaskOutput:
    if ctx.kind == "word_embedding":
        return _construct_word_embedding(cfg, space, ctx)
    if ctx.kind == "star_recurrent":
        return _construct_star(cfg, space, ctx)
    raise ConfigError("the construct task needs [vector] source = construction", section="vector",
                      field="source")


def word_embedding_pair(y: WordEmbeddingSequence, z, H: int, eps_grid, J: int) -> dict:
    """Evidence that ``z`` has a vacuous lbo certificate while ``y`` is falsified at the last round."""
    space, B = SpaceSpec.omega(), BackwardShift()
    zc = _center(z, 1)
    Hz = min(H, z.valid_len - max(J, 1) - 1)
    Az = return_set(space, B, z, NeighborhoodSpec(zc, 1, 0.5), Hz)
    zcert = lbo_search(space, B, z, Hz, (1,), (0.5,), J, J)
    M_max = y.lengths[-2]
    # the row of words ending in M_max, last round; words with i < J expose M_max within J coordinates
    start = y.word_start(y.rounds, M_max, 1)
    span = start + sum(i + 1 for i in range(1, J))
    per_eps = []
    for eps in eps_grid:
        wit = lbo_falsify(space, B, y, span, 1, eps, lambda j: M_max - 0.5, J, start=start, limit=None)
        per_eps.append({"eps": eps, "witnesses": len(wit),
                        "max_magnitude": max((w.magnitude for w in wit), default=0.0)})
    return {"z_return_count": len(Az), "z_horizon": Hz,
            "z_certificate_vacuous": bool(zcert.certificate is not None and zcert.certificate.vacuous),
            "M_max": M_max, "y_scan_window": [start, span], "y_falsified": per_eps,
            "lengths": list(y.lengths)}


def _construct_word_embedding(cfg, space, ctx) -> TaskOutput:
    y, z = ctx.extra["y"], ctx.extra["z"]
    res = word_embedding_pair(y, z, cfg.horizon, cfg.eps_grid, cfg.J)
    out = TaskOutput(res)
    out.summary.append(f"word embedding lengths {res['lengths']}; M_max = {res['M_max']}")
    out.summary.append(f"z: {res['z_return_count']} returns to the (1, 0.5) ball up to {res['z_horizon']}; "
                       f"vacuous certificate: {res['z_certificate_vacuous']}")
    ok = all(r["max_magnitude"] >= res["M_max"] for r in res["y_falsified"])
    out.summary.append(f"y falsified for every eps with magnitude >= M_max: {ok}")
    head = np.asarray(y.window(0, min(y.valid_len, 4096)))
    out.figures.append(_figure("construct_y.png", "coordinate_figure", head, "word-embedding sequence (prefix)"))
    return out


def star_checks(star, x: TruncatedVector, horizon: int) -> dict:
    """Exact prefix matches on odd members, unboundedness and the lbo certificate with ``w_j = j``."""
    matches = {}
    for l in range(1, star.k_max + 1, 2):
        A = star[l]
        A = A[A + l <= min(horizon, x.valid_len)]
        if A.size:
            idx = A[:, None] + np.arange(l)[None, :]
            dev = float(np.max(np.abs(x.coeffs[idx] - x.coeffs[:l][None, :])))
        else:
            dev = 0.0
        matches[str(l)] = {"checked": int(A.size), "max_deviation": dev}
    H = min(horizon, x.valid_len - 65)
    cert = lbo_search(SpaceSpec.omega(), BackwardShift(), x, H, (1,), (0.3,), 64, 64, lambda j: float(j))
    return {"matches": matches, "sup": float(np.max(np.abs(x.valid))), "lbo_w_j": cert.certificate is not None,
            "lbo_horizon": H, "period": star.period, "offsets": list(star.offsets)}


def _construct_star(cfg, space, ctx) -> TaskOutput:
    star, x = ctx.extra["star"], ctx.vector
    res = star_checks(star, x, x.valid_len)
    res["violations"] = star.violations()
    res["words"] = int(len(ctx.extra["log"]))
    out = TaskOutput(res)
    out.summary.append(f"separated family k_max={star.k_max}, period {star.period}, "
                       f"violations: {len(res['violations'])}")
    for l, m in res["matches"].items():
        out.summary.append(f"A_{l}: {m['checked']} returns, max deviation {m['max_deviation']:g}")
    out.summary.append(f"sup |x_j| = {res['sup']:g}; lbo certificate with w_j = j: {res['lbo_w_j']}")
    head = np.asarray(x.valid[:512])
    out.figures.append(_figure("construct_x.png", "coordinate_figure", head, "separated-family sequence (prefix)"))
    return out


def task_measure(cfg, space, op, ctx: VectorContext) -> TaskOutput:
    x = ctx.vector
    if not isinstance(x, TruncatedVector):
        x = TruncatedVector(np.asarray(x.window(0, required_length(cfg))), None, x.space_tag)
    basis = [NeighborhoodSpec(x, k0, eps) for k0, eps in cfg.grid][:20]
    battery = default_battery(min(4, cfg.J))
    rng = np.random.default_rng(cfg.seed)
    for f in battery:
        f.probe(rng, trials=64)
    rep = build_invariant_candidate(space, op, x, basis, cfg.horizon, battery, N_min=cfg.N_min)
    res = rep.to_dict()
    out = TaskOutput(res)
    rows = [[c["index"], c["k0"], repr(c["eps"]), c["window"][0], c["window"][1], repr(c["witness_density"]),
             c["ball_mass"]] for c in rep.components]
    out.curves["measure_components"] = (["index", "k0", "eps", "window_start", "window_end",
                                         "witness_density", "ball_mass"], rows)
    out.figures.append(_figure("measure_masses.png", "mass_figure", rep.components, "ball mass vs window density"))
    worst = min(c["ball_mass_float"] for c in rep.components)
    out.summary.append(f"{len(rep.components)} components; smallest ball mass {worst:.4g}; "
                       f"all defects within bound: {all(d['ok'] for d in rep.defects)}")
    return out


def task_transfer(cfg, space, op, ctx: VectorContext) -> TaskOutput:
    t = cfg.transfer
    kind = t.get("witness", "naturals")
    H = cfg.horizon
    if kind == "naturals":
        W = ReturnSet.naturals(H)
    elif kind.startswith("star:"):
        if ctx.kind != "star_recurrent":
            raise ConfigError("star witnesses need the star_recurrent construction", section="transfer",
                              field="witness")
        W = ctx.extra["star"].as_return_set(int(kind.split(":", 1)[1])).restrict(H)
    else:
        W = ReturnSet(np.array([int(v) for v in split_list(kind)]), H)
    k0, eps = cfg.grid[0]
    nb = NeighborhoodSpec(_center(ctx.vector, k0), k0, eps)
    res = transfer_block_recurrence(space, op, ctx.vector, nb, W, H, depth=int(t.get("depth", 64)),
                                    scale=int(t["scale"]) if "scale" in t else None)
    out = TaskOutput(res.to_dict())
    out.summary.append(f"transfer: {res.depth} stabilized coordinates, {len(res.transferred)} verified "
                       f"returns of x_U up to {res.transferred.horizon}")
    return out


TASK_FUNCS = {"classify": task_classify, "lbo": task_lbo, "densities": task_densities,
              "construct": task_construct, "measure": task_measure, "transfer": task_transfer}


# ---------------------------------------------------------------------------
# report assembly
# ---------------------------------------------------------------------------

def _jsonable(obj):
    if isinstance(obj, dict):
        return {str(k): _jsonable(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_jsonable(v) for v in obj]
    if isinstance(obj, (np.integer,)):
        return int(obj)
    if isinstance(obj, (np.floating, float)):
        return finite_or_str(float(obj))
    if isinstance(obj, (np.bool_,)):
        return bool(obj)
    if isinstance(obj, complex):
        return {"re": obj.real, "im": obj.imag}
    if isinstance(obj, np.ndarray):
        return _jsonable(obj.tolist())
    return obj


def canonical_json(obj) -> str:
    return json.dumps(_jsonable(obj), sort_keys=True, indent=2, allow_nan=False) + "\n"


@dataclass
class RunResult:
    report: dict
    status: int
    files: list
    out_dir: str = ""


def run_experiment(cfg: ExperimentConfig, out_dir=None, formats=None, figures=None) -> RunResult:
    """Execute every task of ``cfg`` sequentially and write the report files."""
    out = Path(out_dir if out_dir is not None else Path(cfg.base_dir) / cfg.out_dir)
    out.mkdir(parents=True, exist_ok=True)
    formats = tuple(formats or cfg.formats)
    figures = cfg.figures if figures is None else figures
    timings, tasks, summary, files = {}, {}, [], []
    status = 0
    try:
        space = build_space(cfg)
        op = build_operator(cfg)
        ctx = build_vector(cfg, space)
    except (LindynError, ValueError, OSError) as exc:
        raise ConfigError(f"cannot build the experiment: {exc}") from exc
    for name in cfg.tasks:
        t0 = time.perf_counter()
        try:
            res = TASK_FUNCS[name](cfg, space, op, ctx)
            tasks[name] = {"status": "ok", "result": res.result}
            summary.append(f"[{name}]")
            summary.extend(f"  {line}" for line in res.summary)
            if "csv" in formats:
                for stem, (header, rows) in res.curves.items():
                    path = out / f"{stem}.csv"
                    with open(path, "w") as fh:
                        fh.write(",".join(header) + "\n")
                        fh.writelines(",".join(str(v) for v in row) + "\n" for row in rows)
                    files.append(path.name)
            if figures:
                for fname, draw in res.figures:
                    draw(out / fname)
                    files.append(fname)
        except Exception as exc:  # per-task isolation: siblings still run
            status = 1
            tasks[name] = {"status": "error", "error": {"type": type(exc).__name__, "message": str(exc)}}
            summary.append(f"[{name}] FAILED: {type(exc).__name__}: {exc}")
            timings[f"{name}_traceback"] = traceback.format_exc()
        timings[name] = time.perf_counter() - t0
    report = {
        "schema_version": SCHEMA_VERSION,
        "config_sha256": cfg.sha256(),
        "config": cfg.canonical(),
        "policy": {"frec_threshold": 0.01, "rrec_threshold": 0.01, "urec_max_gap": 50,
                   "lower_density_estimator": "min of d_N over N in [H/2, H]",
                   "banach_density_estimator": "max of W_N over the geometric N grid",
                   "N_min": cfg.N_min, "k0_grid": list(cfg.k0_grid), "eps_grid": list(cfg.eps_grid),
                   "J": cfg.J, "K": cfg.K, "growth": cfg.growth},
        "tasks": tasks,
    }
    if "json" in formats:
        (out / "report.json").write_text(canonical_json(report))
        files.append("report.json")
    (out / "summary.txt").write_text(
        f"{cfg.name}: tasks {', '.join(cfg.tasks)}; horizon {cfg.horizon}\n" + "\n".join(summary) + "\n")
    files.append("summary.txt")
    (out / "meta.json").write_text(json.dumps({"version": __version__, "timings_s": timings,
                                               "files": sorted(files)}, indent=2, sort_keys=True))
    return RunResult(report, status, sorted(files), str(out.resolve()))
