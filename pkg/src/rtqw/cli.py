"""Command-line interface: model configs in, CSV/JSON reports out.

Exit codes: 0 success, 2 config validation failure, 3 mathematical
assumption failure (spectral gap / irreducibility), 4 numerical
non-convergence.  Complex numbers are serialized as [re, im] pairs and
matrices as row-major nested lists; CSV cells carry 17 significant digits.
"""

from __future__ import annotations

import argparse
import datetime
import hashlib
import json
import sys
from pathlib import Path

import numpy as np

from . import __version__
from .chain import chain_from_ensemble, irreducible
from .ensembles import (
    FiniteCoinEnsemble,
    MarkovCoinProcess,
    PermutationCoinSpec,
    PermutationEnsemble,
    SeededStream,
    enumerate_sequences,
    make_permutation_coin,
)
from .errors import AssumptionFailedError, ConvergenceError, ValidationError
from .markov import check_assumption_s2, markov_averaged_diffusion, markov_diffusion, markov_model
from .mc import mc_averaged_distribution, mc_moment_scaling
from .rates import DiffusionFamily, ld_rate_table, md_rate_table
from .spectral import averaged_model, check_assumption, diffusion_report
from .walk import Coin, JumpFunction, WalkState, evolve, moments, position_distribution

EXIT_CONFIG = 2
EXIT_ASSUMPTION = 3
EXIT_CONVERGENCE = 4

_NAMED_COINS = {
    "identity": lambda d: np.eye(2 * d),
    "swap": lambda d: np.array([[0, 1], [1, 0]], dtype=float) if d == 1 else None,
    "hadamard": lambda d: np.array([[1, 1], [1, -1]]) / np.sqrt(2) if d == 1 else None,
}


class ConfigError(Exception):
    def __init__(self, problems):
        self.problems = list(problems)
        super().__init__("; ".join(self.problems))


def fmt(x: float) -> str:
    return f"{x:.17g}"


def to_jsonable(obj):
    """Recursive JSON encoding with complex -> [re, im]."""
    if isinstance(obj, complex):
        return [obj.real, obj.imag]
    if isinstance(obj, (np.complexfloating,)):
        return [float(obj.real), float(obj.imag)]
    if isinstance(obj, (np.floating, np.integer)):
        return obj.item()
    if isinstance(obj, np.ndarray):
        return [to_jsonable(row) for row in obj.tolist()] if obj.dtype == complex \
            else obj.tolist()
    if isinstance(obj, dict):
        return {str(k): to_jsonable(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [to_jsonable(v) for v in obj]
    return obj


def config_digest(cfg: dict) -> str:
    canonical = json.dumps(cfg, sort_keys=True, separators=(",", ":"), ensure_ascii=True)
    return hashlib.sha256(canonical.encode()).hexdigest()


def _as_complex_matrix(raw, field, problems):
    try:
        arr = np.asarray(raw, dtype=float)
    except (TypeError, ValueError):
        problems.append(f"{field}: matrix entries must be numbers or [re, im] pairs")
        return None
    if arr.ndim == 3 and arr.shape[-1] == 2:
        return arr[..., 0] + 1j * arr[..., 1]
    if arr.ndim == 2:
        return arr.astype(complex)
    problems.append(f"{field}: expected a 2 x 2d nested matrix")
    return None


def _as_complex_vector(raw, field, problems):
    try:
        arr = np.asarray(raw, dtype=float)
    except (TypeError, ValueError):
        problems.append(f"{field}: vector entries must be numbers or [re, im] pairs")
        return None
    if arr.ndim == 2 and arr.shape[-1] == 2:
        return arr[:, 0] + 1j * arr[:, 1]
    if arr.ndim == 1:
        return arr.astype(complex)
    problems.append(f"{field}: expected a flat vector")
    return None


def build_jump(cfg, problems) -> JumpFunction | None:
    d = cfg.get("dimension")
    if not isinstance(d, int) or d < 1:
        problems.append("dimension: must be a positive integer")
        return None
    table = cfg.get("jump")
    if not isinstance(table, dict):
        problems.append("jump: must be a map from labels to displacements")
        return None
    try:
        entries = {int(k): v for k, v in table.items()}
        return JumpFunction.from_map(entries, d)
    except (ValueError, ValidationError) as exc:
        problems.append(f"jump: {exc}")
        return None


def _build_coin(raw, d, field, problems) -> Coin | None:
    if isinstance(raw, dict) and "name" in raw:
        maker = _NAMED_COINS.get(raw["name"])
        mat = maker(d) if maker else None
        if mat is None:
            problems.append(f"{field}: unknown or dimension-incompatible coin name {raw['name']!r}")
            return None
        return Coin(mat)
    if isinstance(raw, dict) and "permutation" in raw:
        try:
            spec = PermutationCoinSpec.from_cycles(
                d, {int(k): int(v) for k, v in raw["permutation"].items()},
                raw.get("phases"))
            return make_permutation_coin(spec)
        except (ValueError, ValidationError) as exc:
            problems.append(f"{field}: {exc}")
            return None
    if isinstance(raw, dict) and "matrix" in raw:
        mat = _as_complex_matrix(raw["matrix"], field, problems)
        if mat is None:
            return None
        try:
            return Coin(mat)
        except ValidationError as exc:
            problems.append(f"{field}: {exc}")
            return None
    problems.append(f"{field}: coin needs 'name', 'permutation' or 'matrix'")
    return None


def build_ensemble(cfg, problems):
    raw = cfg.get("ensemble")
    d = cfg.get("dimension", 1)
    if not isinstance(raw, dict) or "type" not in raw:
        problems.append("ensemble: must be an object with a 'type'")
        return None
    kind = raw["type"]
    coins = []
    for i, c in enumerate(raw.get("coins", [])):
        coin = _build_coin(c, d, f"ensemble.coins[{i}]", problems)
        if coin is not None:
            coins.append(coin)
    if len(coins) != len(raw.get("coins", [])):
        return None
    if not coins:
        problems.append("ensemble.coins: at least one coin is required")
        return None
    try:
        if kind in ("iid", "permutation"):
            probs = np.asarray(raw.get("probs", []), dtype=float)
            ens = FiniteCoinEnsemble(tuple(coins), probs)
            return ens
        if kind == "markov":
            return MarkovCoinProcess(
                tuple(coins),
                np.asarray(raw.get("transition", []), dtype=float),
                np.asarray(raw.get("initial", []), dtype=float),
            )
    except (ValueError, ValidationError) as exc:
        problems.append(f"ensemble: {exc}")
        return None
    problems.append(f"ensemble.type: unknown type {kind!r}")
    return None


def build_initial(cfg, d, problems):
    raw = cfg.get("initial_state")
    if raw is None:
        phi0 = np.zeros(2 * d, dtype=complex)
        phi0[0] = 1.0
        return phi0
    if isinstance(raw, dict) and "amplitudes" in raw:
        vec = _as_complex_vector(raw["amplitudes"], "initial_state.amplitudes", problems)
        if vec is None:
            return None
        if vec.shape != (2 * d,):
            problems.append("initial_state.amplitudes: need exactly 2d components")
            return None
        nrm = np.linalg.norm(vec)
        if abs(nrm - 1.0) > 1e-9:
            problems.append("initial_state.amplitudes: state must be normalized")
            return None
        return vec
    problems.append("initial_state: expected an 'amplitudes' vector")
    return None


def load_config(path: str):
    try:
        text = Path(path).read_text()
    except OSError as exc:
        raise ConfigError([f"config: cannot read {path}: {exc}"])
    try:
        cfg = json.loads(text)
    except json.JSONDecodeError as exc:
        raise ConfigError([f"config: invalid JSON ({exc})"])
    problems: list[str] = []
    jump = build_jump(cfg, problems)
    model = build_ensemble(cfg, problems)
    phi0 = build_initial(cfg, cfg.get("dimension", 1), problems) if jump else None
    if model is not None and jump is not None and \
            getattr(model, "dimension", jump.dimension) != jump.dimension:
        problems.append("ensemble: coin dimension does not match 'dimension'")
    if problems:
        raise ConfigError(problems)
    return cfg, jump, model, phi0


def emit(report: dict, csv_blocks: dict, out_dir: str | None):
    doc = json.dumps(to_jsonable(report), indent=2, sort_keys=True)
    if out_dir:
        out = Path(out_dir)
        out.mkdir(parents=True, exist_ok=True)
        (out / "report.json").write_text(doc + "\n")
        for name, rows in csv_blocks.items():
            (out / f"{name}.csv").write_text("\n".join(rows) + "\n")
        print(f"wrote {out / 'report.json'}")
    else:
        print(doc)
        for name, rows in csv_blocks.items():
            print(f"# {name}.csv")
            for row in rows:
                print(row)


def _result_record(command: str, cfg: dict, outputs: dict) -> dict:
    return {
        "command": command,
        "config_digest": config_digest(cfg),
        "tool_version": __version__,
        "timestamp": datetime.datetime.now(datetime.timezone.utc).isoformat(),
        "outputs": outputs,
    }


def _distribution_csv(sites, mean, stderr=None):
    header = "k,weight" + (",stderr" if stderr is not None else "")
    rows = [header]
    for i, site in enumerate(sites):
        coord = ";".join(str(int(c)) for c in np.atleast_1d(site))
        cells = [coord, fmt(float(mean[i]))]
        if stderr is not None:
            cells.append(fmt(float(stderr[i])))
        rows.append(",".join(cells))
    return rows


def cmd_simulate(args) -> int:
    cfg, jump, model, phi0 = load_config(args.config)
    n = args.n if args.n is not None else 10
    d = jump.dimension
    stream = SeededStream(args.seed if args.seed is not None else cfg.get("seed", 0))
    outputs: dict = {"n": n, "drift": jump.drift}
    if args.enumerate:
        seqs = enumerate_sequences(model, n)
        coins = model.coins
        state0 = WalkState.point(phi0, d=d)
        acc: dict = {}
        for seq, pr in seqs:
            dist = position_distribution(evolve(state0, [coins[i] for i in seq], jump))
            for site, w in dist.to_map().items():
                acc[site] = acc.get(site, 0.0) + pr * w
        sites = sorted(acc)
        mean = np.array([acc[s] for s in sites])
        stderr = None
        outputs["mode"] = "enumerate"
    elif args.samples:
        sites_arr, est = mc_averaged_distribution(model, phi0, jump, n, args.samples, stream)
        if d == 1:
            sites = list(sites_arr)
        else:
            sites = [tuple(s) for s in sites_arr.reshape(-1, d)]
        mean = est.value.reshape(-1)
        stderr = est.stderr.reshape(-1)
        outputs["mode"] = "monte_carlo"
        outputs["samples"] = est.samples
        outputs["seed"] = est.seed
    else:
        if not isinstance(model, FiniteCoinEnsemble) or len(model) != 1:
            raise ConfigError(
                ["simulate: a multi-coin model needs --samples or --enumerate"])
        dist = position_distribution(
            evolve(WalkState.point(phi0, d=d), [model.coins[0]] * n, jump))
        dmap = dist.to_map()
        sites = sorted(dmap)
        mean = np.array([dmap[s] for s in sites])
        stderr = None
        outputs["mode"] = "deterministic"
    dist_map = {s: w for s, w in zip(sites, mean)}
    lat = _weights_to_lattice(dist_map, d)
    mean_vec = [moments(lat, tuple(np.eye(d, dtype=int)[i])) for i in range(d)]
    outputs["total_weight"] = float(mean.sum())
    outputs["mean"] = mean_vec
    outputs["mean_over_n"] = [m / n for m in mean_vec]
    outputs["second_moment"] = [
        [moments(lat, tuple((np.eye(d, dtype=int)[i] + np.eye(d, dtype=int)[j]).tolist()))
         for j in range(d)] for i in range(d)]
    csv_rows = _distribution_csv(sites, mean, stderr)
    emit(_result_record("simulate", cfg, outputs), {"distribution": csv_rows}, args.out)
    return 0


def _weights_to_lattice(dist_map, d):
    from .walk import LatticeDistribution
    total = sum(dist_map.values())
    return LatticeDistribution.from_map(
        {k: v / total for k, v in dist_map.items()}, d)


def cmd_spectral(args) -> int:
    cfg, jump, model, _ = load_config(args.config)
    grid = args.grid or cfg.get("grids", {}).get("quadrature", 64)
    v_points = cfg.get("grids", {}).get("assumption")
    gap_tol = cfg.get("tolerances", {}).get("gap", 1e-6)
    outputs: dict = {"drift": jump.drift}
    if isinstance(model, MarkovCoinProcess):
        mk = markov_model(model, jump)
        rep = check_assumption_s2(mk, v_points=v_points, gap_tol=gap_tol)
        outputs["assumption"] = _assumption_dict(rep)
        if not rep.holds:
            emit(_result_record("spectral", cfg, outputs), {}, args.out)
            return EXIT_ASSUMPTION
        import itertools
        nodes = 2 * np.pi * np.arange(grid) / grid
        vs = [np.asarray(v) for v in itertools.product(nodes, repeat=jump.dimension)]
        dvs = [markov_diffusion(mk, v) for v in vs]
        averaged = markov_averaged_diffusion(mk, grid)
        cross = max(
            float(np.abs(D - markov_diffusion(mk, v, "hessian")).max())
            for v, D in list(zip(vs, dvs))[:: max(1, len(vs) // 8)])
    else:
        am = averaged_model(model, jump)
        rep = check_assumption(am, v_points=v_points, gap_tol=gap_tol)
        outputs["assumption"] = _assumption_dict(rep)
        outputs["cyclic_rank"] = am.subspace.rank
        if not rep.holds:
            emit(_result_record("spectral", cfg, outputs), {}, args.out)
            return EXIT_ASSUMPTION
        dr = diffusion_report(am, grid)
        vs = [v[0] if jump.dimension == 1 else v for v in dr.v_values]
        dvs = dr.d_values
        averaged = dr.averaged
        cross = dr.cross_check_residual
        outputs["v_independent"] = dr.v_independent
    outputs["averaged_diffusion"] = averaged
    outputs["method_cross_check_residual"] = cross
    outputs["diffusion_samples"] = [
        {"v": (float(v) if np.isscalar(v) or np.ndim(v) == 0 else list(map(float, v))),
         "matrix": D} for v, D in zip(vs, dvs)]
    csv_rows = ["v,D"] + [
        f"{fmt(float(np.atleast_1d(v)[0]))},{fmt(float(np.atleast_2d(D)[0, 0]))}"
        for v, D in zip(vs, dvs)]
    emit(_result_record("spectral", cfg, outputs), {"diffusion": csv_rows}, args.out)
    return 0


def _assumption_dict(rep) -> dict:
    return {
        "holds": rep.holds,
        "gap": rep.gap,
        "simplicity_margin": rep.simplicity_margin,
        "degeneracy": rep.degeneracy,
        "full_space_degeneracy": rep.full_degeneracy,
        "offending_v": rep.offending[:16],
        "v_points": rep.v_points,
    }


def _parse_x_grid(spec: str, d: int):
    try:
        lo, hi, count = spec.split(":")
        lo, hi, count = float(lo), float(hi), int(count)
    except ValueError:
        raise ConfigError([f"x-grid: expected 'min:max:count', got {spec!r}"])
    if d != 1:
        raise ConfigError(["x-grid: rate tables are emitted for d = 1 models"])
    return [np.array([x]) for x in np.linspace(lo, hi, count)]


def cmd_rates(args) -> int:
    cfg, jump, model, _ = load_config(args.config)
    xs = _parse_x_grid(args.x_grid, jump.dimension)
    if args.which == "md":
        if isinstance(model, MarkovCoinProcess):
            raise ConfigError(["rates: moderate deviations expect an i.i.d. ensemble"])
        am = averaged_model(model, jump)
        rep = check_assumption(am)
        if not rep.holds:
            emit(_result_record("rates", cfg, {"assumption": _assumption_dict(rep)}), {}, args.out)
            return EXIT_ASSUMPTION
        family = DiffusionFamily.from_model(am)
        table = md_rate_table(family, xs)
        maximizers = [
            ("" if r.maximizer[1] is None else fmt(float(np.atleast_1d(r.maximizer[1])[0])))
            for r in table.rows]
    else:
        try:
            chain = chain_from_ensemble(model, jump)
        except ValidationError as exc:
            raise ConfigError([f"rates: {exc}"])
        if not irreducible(chain.transition):
            emit(_result_record("rates", cfg, {"irreducible": False}), {}, args.out)
            return EXIT_ASSUMPTION
        table = ld_rate_table(chain, xs)
        maximizers = [fmt(float(np.atleast_1d(r.maximizer)[0])) for r in table.rows]
    csv_rows = ["x,rate,maximizer"]
    for row, mx in zip(table.rows, maximizers):
        rate = "inf" if not np.isfinite(row.rate) else fmt(row.rate)
        csv_rows.append(f"{fmt(float(row.x[0]))},{rate},{mx}")
    outputs = {
        "kind": table.kind,
        "x": [float(r.x[0]) for r in table.rows],
        "rate": [("inf" if not np.isfinite(r.rate) else r.rate) for r in table.rows],
    }
    emit(_result_record("rates", cfg, outputs), {"rates": csv_rows}, args.out)
    return 0


def cmd_mc(args) -> int:
    cfg, jump, model, phi0 = load_config(args.config)
    n = args.n if args.n is not None else 100
    samples = args.samples or 1000
    stream = SeededStream(args.seed if args.seed is not None else cfg.get("seed", 0))
    rows = mc_moment_scaling(model, phi0, jump, [n], samples, stream)[0]
    first = rows["first_over_n"]
    second = rows["centered_second_over_n"]
    outputs = {
        "n": n,
        "samples": samples,
        "seed": stream.seed,
        "first_moment_over_n": {"value": first.value, "stderr": first.stderr},
        "centered_second_over_n": {"value": second.value, "stderr": second.stderr},
        "drift": jump.drift,
    }
    csv_rows = ["statistic,value,stderr"]
    for i, (v, se) in enumerate(zip(np.atleast_1d(first.value).ravel(),
                                    np.atleast_1d(first.stderr).ravel())):
        csv_rows.append(f"first[{i}],{fmt(float(v))},{fmt(float(se))}")
    for idx, (v, se) in enumerate(zip(np.atleast_2d(second.value).ravel(),
                                      np.atleast_2d(second.stderr).ravel())):
        csv_rows.append(f"second[{idx}],{fmt(float(v))},{fmt(float(se))}")
    emit(_result_record("mc", cfg, outputs), {"moments": csv_rows}, args.out)
    return 0


def make_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="rtqw",
        description="Quantum walks with random time-dependent coins: "
                    "simulation, spectral analysis, deviation rates.",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    def common(p):
        p.add_argument("--config", required=True, help="model config JSON")
        p.add_argument("--out", help="output directory (default: stdout)")
        p.add_argument("--seed", type=int, help="override the config seed")
        p.add_argument("--grid", type=int, help="torus quadrature points")

    p = sub.add_parser("simulate", help="exact or Monte Carlo position laws")
    common(p)
    p.add_argument("--n", type=int, help="number of steps")
    p.add_argument("--samples", type=int, help="Monte Carlo sample count")
    p.add_argument("--enumerate", action="store_true",
                   help="average exactly over all coin sequences")
    p.set_defaults(func=cmd_simulate)

    p = sub.add_parser("spectral", help="assumption check and diffusion matrices")
    common(p)
    p.set_defaults(func=cmd_spectral)

    p = sub.add_parser("rates", help="moderate/large deviation rate tables")
    common(p)
    p.add_argument("--which", choices=("md", "ld"), required=True)
    p.add_argument("--x-grid", default="-0.9:0.9:19", help="'min:max:count'")
    p.set_defaults(func=cmd_rates)

    p = sub.add_parser("mc", help="Monte Carlo moment estimates")
    common(p)
    p.add_argument("--n", type=int, help="number of steps")
    p.add_argument("--samples", type=int, help="Monte Carlo sample count")
    p.set_defaults(func=cmd_mc)
    return parser


def main(argv=None) -> int:
    parser = make_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except ConfigError as exc:
        for problem in exc.problems:
            print(f"config error: {problem}", file=sys.stderr)
        return EXIT_CONFIG
    except (ValidationError,) as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except AssumptionFailedError as exc:
        print(f"assumption failure: {exc}", file=sys.stderr)
        return EXIT_ASSUMPTION
    except ConvergenceError as exc:
        print(f"non-convergence: {exc}", file=sys.stderr)
        return EXIT_CONVERGENCE


if __name__ == "__main__":
    sys.exit(main())
