"""Batch command-line front end.

    socialmfg --config run.json [--out DIR] [--seed N] [--quiet]

The config's ``command`` selects one of ``solve-horizon``, ``solve-stationary``,
``oracle`` or ``verify``. Every run writes ``result.json`` (deterministic for a
given config and seed) and ``meta.json`` (timestamps, versions); solves also
write a CSV.

Exit codes: 0 success, 2 config error, 3 convergence failure, 4 verification
failure.
"""

from __future__ import annotations

import argparse
import csv
import json
import logging
import platform
import sys
from datetime import datetime, timezone
from pathlib import Path
from typing import Any, Literal, Optional

import numpy as np
from pydantic import BaseModel, ConfigDict, Field, ValidationError, field_validator, model_validator

from socialmfg import __version__
from socialmfg.core import (
    CostVector,
    Distribution,
    HorizonSolution,
    ProblemInstance,
    StationarySolution,
    StrategyMatrix,
    SIMPLEX_TOL,
)
from socialmfg.cost_models import MODELS, make_model
from socialmfg.errors import ConvergenceError, InvalidInputError, SocialMFGError
from socialmfg.horizon import HorizonSolverConfig, residual_p1, solve_p1, solve_p1_multistart, trajectory_spread
from socialmfg.simplex_opt import InnerSolverConfig, solve_stage
from socialmfg.stationary import (
    StationaryConfig,
    critical_value,
    quotient_norm,
    solve_stationary,
    solve_stationary_multistart,
    stationary_residuals,
)
from socialmfg.verification import GridOracleConfig, grid_oracle_min, run_probes

log = logging.getLogger("socialmfg")

EXIT_OK = 0
EXIT_CONFIG = 2
EXIT_CONVERGENCE = 3
EXIT_VERIFY = 4


class ConfigError(SocialMFGError):
    pass


class _Strict(BaseModel):
    model_config = ConfigDict(extra="forbid")


class ModelSpec(_Strict):
    name: str
    params: dict[str, float] = Field(default_factory=dict)

    @field_validator("name")
    @classmethod
    def _known(cls, v: str) -> str:
        if v not in MODELS:
            raise ValueError(f"unknown model {v!r}; available models: {', '.join(sorted(MODELS))}")
        return v


class InstanceSpec(_Strict):
    s: int = Field(ge=2)
    N: Optional[int] = Field(default=None, ge=1)
    m0: Optional[list[float]] = None
    terminal_cost: Optional[list[float]] = None
    model: ModelSpec

    @field_validator("m0")
    @classmethod
    def _simplex(cls, v):
        if v is None:
            return v
        if min(v) < -SIMPLEX_TOL or abs(sum(v) - 1.0) > SIMPLEX_TOL:
            raise ValueError(f"must be a probability vector (entries >= 0, sum 1); sum is {sum(v)!r}")
        return v

    @model_validator(mode="after")
    def _dims(self):
        for name in ("m0", "terminal_cost"):
            v = getattr(self, name)
            if v is not None and len(v) != self.s:
                raise ValueError(f"{name} has {len(v)} entries, expected s={self.s}")
        try:
            make_model(self.model.name, self.model.params)
        except InvalidInputError as exc:
            raise ValueError(str(exc)) from None
        return self


class InnerSpec(_Strict):
    max_iters: int = 5000
    grad_tol: float = 1e-8
    step_init: float = 1.0
    armijo_c: float = 1e-4
    armijo_shrink: float = 0.5
    interior_eps: float = 1e-9


class HorizonSpec(_Strict):
    damping: float = 0.5
    max_outer_iters: int = 1000
    fp_tol: float = 1e-8
    multistart_count: int = 0


class StationarySpec(_Strict):
    damping_m: float = 0.5
    rvi_tol: float = 1e-10
    outer_tol: float = 1e-8
    max_outer: int = 2000
    max_rvi: int = 10_000
    inner: InnerSpec = Field(default_factory=lambda: InnerSpec(grad_tol=1e-11))
    multistart_count: int = 0


class OracleSpec(_Strict):
    resolution: float = 1e-3
    interior_eps: float = 1e-9


class VerifySpec(_Strict):
    samples: int = Field(default=200, ge=1)
    gamma: Optional[float] = None
    a6_bound: Optional[float] = None


class OutputSpec(_Strict):
    dir: str = "out"
    csv: bool = True


class RunConfig(_Strict):
    command: Literal["solve-horizon", "solve-stationary", "oracle", "verify"]
    instance: InstanceSpec
    inner: InnerSpec = Field(default_factory=InnerSpec)
    horizon: HorizonSpec = Field(default_factory=HorizonSpec)
    stationary: StationarySpec = Field(default_factory=StationarySpec)
    oracle: OracleSpec = Field(default_factory=OracleSpec)
    verify: VerifySpec = Field(default_factory=VerifySpec)
    output: OutputSpec = Field(default_factory=OutputSpec)
    seed: int = 0

    @model_validator(mode="after")
    def _required(self):
        need = {
            "solve-horizon": ("N", "m0", "terminal_cost"),
            "oracle": ("m0", "terminal_cost"),
        }.get(self.command, ())
        missing = [f"instance.{k}" for k in need if getattr(self.instance, k) is None]
        if missing:
            raise ValueError(f"command {self.command!r} requires {', '.join(missing)}")
        return self

    # -- builders ---------------------------------------------------------
    def model(self):
        return make_model(self.instance.model.name, self.instance.model.params)

    def inner_config(self) -> InnerSolverConfig:
        return InnerSolverConfig(**self.inner.model_dump())

    def horizon_config(self) -> HorizonSolverConfig:
        return HorizonSolverConfig(inner=self.inner_config(), **self.horizon.model_dump())

    def stationary_config(self) -> StationaryConfig:
        d = self.stationary.model_dump(exclude={"inner", "multistart_count"})
        return StationaryConfig(inner=InnerSolverConfig(**self.stationary.inner.model_dump()), **d)

    def problem(self) -> ProblemInstance:
        i = self.instance
        return ProblemInstance(i.s, i.N, Distribution(i.m0), CostVector(i.terminal_cost), self.model())


def _format_validation(exc: ValidationError) -> str:
    lines = []
    for err in exc.errors():
        path = ".".join(str(p) for p in err["loc"]) or "<root>"
        msg = err["msg"].removeprefix("Value error, ")
        lines.append(f"{path}: {msg}")
    return "; ".join(lines)


def parse_config(text: str) -> RunConfig:
    """Parse and validate a JSON run configuration.

    Raises:
        ConfigError: malformed JSON (with line/column) or a semantic problem
            (with the offending field path).
    """
    try:
        data = json.loads(text)
    except json.JSONDecodeError as exc:
        raise ConfigError(f"invalid JSON at line {exc.lineno}, column {exc.colno}: {exc.msg}") from None
    try:
        return RunConfig.model_validate(data)
    except ValidationError as exc:
        raise ConfigError(_format_validation(exc)) from None
    except InvalidInputError as exc:
        raise ConfigError(str(exc)) from None


# -- serialization -----------------------------------------------------------

def horizon_to_dict(sol: HorizonSolution) -> dict[str, Any]:
    return {
        "distributions": [d.tolist() for d in sol.distributions],
        "costs": [c.tolist() for c in sol.costs],
        "strategies": [p.tolist() for p in sol.strategies],
        "fixed_point_residual": sol.fixed_point_residual,
    }


def horizon_from_dict(d: dict[str, Any]) -> HorizonSolution:
    return HorizonSolution(
        distributions=tuple(Distribution(x) for x in d["distributions"]),
        costs=tuple(CostVector(x) for x in d["costs"]),
        strategies=tuple(StrategyMatrix(x) for x in d["strategies"]),
        fixed_point_residual=d["fixed_point_residual"],
    )


def stationary_to_dict(sol: StationarySolution) -> dict[str, Any]:
    return {
        "m_bar": sol.m_bar.tolist(),
        "u_bar": sol.u_bar.tolist(),
        "lambda_bar": sol.lambda_bar,
        "strategy": sol.strategy.tolist(),
    }


def write_trajectory_csv(path: Path, sol: HorizonSolution) -> None:
    """One row per (time, state); strategy columns ``P_i_j`` filled for row ``i == state``."""
    m, U, P = sol.as_arrays()
    s = m.shape[1]
    pcols = [f"P_{i + 1}_{j + 1}" for i in range(s) for j in range(s)]
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["time", "state", "m", "U", *pcols])
        for n in range(m.shape[0]):
            for i in range(s):
                cells = [""] * (s * s)
                if n < P.shape[0]:
                    cells[i * s:(i + 1) * s] = [repr(float(x)) for x in P[n, i]]
                w.writerow([n, i + 1, repr(float(m[n, i])), repr(float(U[n, i])), *cells])


def write_stationary_csv(path: Path, sol: StationarySolution) -> None:
    s = sol.m_bar.s
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow([*(f"m_{i + 1}" for i in range(s)), *(f"U_{i + 1}" for i in range(s)), "lambda"])
        w.writerow([*map(repr, sol.m_bar.tolist()), *map(repr, sol.u_bar.tolist()), repr(sol.lambda_bar)])


def _dump(path: Path, payload: dict[str, Any]) -> None:
    path.write_text(json.dumps(payload, indent=2, allow_nan=False) + "\n")


def _history(exc: ConvergenceError):
    h = exc.history
    if isinstance(h, dict):
        return {k: list(v) for k, v in h.items()}
    return list(h) if h is not None else None


# -- commands ----------------------------------------------------------------

def _solve_horizon(cfg: RunConfig, out: Path, result: dict[str, Any]) -> int:
    inst, hcfg = cfg.problem(), cfg.horizon_config()
    sol = solve_p1(inst, hcfg)
    cost_gap, evo_gap = residual_p1(sol, inst)
    result.update(
        status="converged",
        solution=horizon_to_dict(sol),
        residuals={"cost_recursion": cost_gap, "evolution": evo_gap},
        iterations={"outer": sol.iterations, "residual_history": list(sol.residual_history)},
    )
    if cfg.horizon.multistart_count > 0:
        starts = solve_p1_multistart(inst, hcfg, np.random.default_rng(cfg.seed))
        result["multistart"] = {
            "count": len(starts),
            "max_disagreement": trajectory_spread([sol, *starts]),
        }
    if cfg.output.csv:
        write_trajectory_csv(out / "trajectory.csv", sol)
    log.info("fixed point residual %.3e after %d outer iterations", sol.fixed_point_residual, sol.iterations)
    return EXIT_OK


def _solve_stationary(cfg: RunConfig, out: Path, result: dict[str, Any]) -> int:
    model, scfg = cfg.model(), cfg.stationary_config()
    s = cfg.instance.s
    sol = solve_stationary(model, scfg, cfg.instance.m0, s=s)
    res_u, res_m = stationary_residuals(sol.m_bar, sol.u_bar, sol.lambda_bar, model, P=sol.strategy)
    result.update(
        status="converged",
        solution=stationary_to_dict(sol),
        residuals={"cost_equation": res_u, "distribution_equation": res_m},
        critical_value=critical_value(sol.m_bar, sol.strategy, model),
        iterations={"outer": sol.outer_iterations},
    )
    if cfg.stationary.multistart_count > 0:
        starts = solve_stationary_multistart(
            model, s, cfg.stationary.multistart_count, scfg, np.random.default_rng(cfg.seed)
        )
        result["multistart"] = {
            "count": len(starts),
            "max_m_disagreement": max(float(np.max(np.abs(x.m_bar.probs - sol.m_bar.probs))) for x in starts),
            "max_lambda_disagreement": max(abs(x.lambda_bar - sol.lambda_bar) for x in starts),
            "max_u_quotient_distance": max(quotient_norm(x.u_bar.values - sol.u_bar.values) for x in starts),
        }
    if cfg.output.csv:
        write_stationary_csv(out / "stationary.csv", sol)
    log.info("critical value %.12g", sol.lambda_bar)
    return EXIT_OK


def _oracle(cfg: RunConfig, out: Path, result: dict[str, Any]) -> int:
    model = cfg.model()
    m, U = cfg.instance.m0, cfg.instance.terminal_cost
    ocfg = GridOracleConfig(**cfg.oracle.model_dump())
    P, value = grid_oracle_min(m, U, model, ocfg)
    stage = solve_stage(m, U, model, cfg.inner_config())
    result.update(
        status="ok",
        oracle={"strategy": P.tolist(), "value": value},
        solver={"strategy": stage.strategy.tolist(), "value": stage.value},
        gap=stage.value - value,
    )
    return EXIT_OK


def _verify(cfg: RunConfig, out: Path, result: dict[str, Any]) -> int:
    probes = run_probes(
        cfg.model(),
        cfg.instance.s,
        seed=cfg.seed,
        samples=cfg.verify.samples,
        inner_cfg=cfg.inner_config(),
        gamma=cfg.verify.gamma,
        a6_bound=cfg.verify.a6_bound,
    )
    passed = all(p.passed for p in probes)
    result.update(status="passed" if passed else "failed", probes=[p.to_dict() for p in probes])
    for p in probes:
        log.info("%-28s %s observed=%s", p.name, "PASS" if p.passed else "FAIL", p.observed)
    return EXIT_OK if passed else EXIT_VERIFY


COMMANDS = {
    "solve-horizon": _solve_horizon,
    "solve-stationary": _solve_stationary,
    "oracle": _oracle,
    "verify": _verify,
}


def run(cfg: RunConfig, out_dir: str | Path | None = None) -> int:
    """Execute ``cfg`` and write its artifacts; returns the process exit code."""
    out = Path(out_dir or cfg.output.dir)
    out.mkdir(parents=True, exist_ok=True)
    result: dict[str, Any] = {
        "command": cfg.command,
        "seed": cfg.seed,
        "config": cfg.model_dump(mode="json"),
    }
    started = datetime.now(timezone.utc)
    try:
        code = COMMANDS[cfg.command](cfg, out, result)
    except ConvergenceError as exc:
        log.error("%s", exc)
        result.update(status="failed", error=str(exc), residual=exc.residual, residual_history=_history(exc))
        code = EXIT_CONVERGENCE
    except InvalidInputError as exc:
        log.error("%s", exc)
        result.update(status="error", error=str(exc))
        code = EXIT_CONFIG
    _dump(out / "result.json", result)
    _dump(
        out / "meta.json",
        {
            "started": started.isoformat(),
            "finished": datetime.now(timezone.utc).isoformat(),
            "version": __version__,
            "python": platform.python_version(),
            "numpy": np.__version__,
            "exit_code": code,
        },
    )
    return code


def main(argv: list[str] | None = None) -> int:
    ap = argparse.ArgumentParser(prog="socialmfg", description=__doc__.split("\n\n")[0])
    ap.add_argument("--config", required=True, help="path to the JSON run configuration")
    ap.add_argument("--out", help="output directory (overrides output.dir)")
    ap.add_argument("--seed", type=int, help="RNG seed (overrides the config)")
    ap.add_argument("--quiet", action="store_true", help="only log warnings and errors")
    args = ap.parse_args(argv)
    logging.basicConfig(
        level=logging.WARNING if args.quiet else logging.INFO,
        format="%(levelname)s %(name)s: %(message)s",
    )
    try:
        text = Path(args.config).read_text(encoding="utf-8")
        cfg = parse_config(text)
        if args.seed is not None:
            cfg = cfg.model_copy(update={"seed": args.seed})
    except (OSError, ConfigError) as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    code = run(cfg, args.out)
    if not args.quiet:
        print(f"{cfg.command}: exit {code}")
    return code


if __name__ == "__main__":
    sys.exit(main())
