"""JSON run configuration: schema validation and problem assembly.

A config fully describes one run: the problem data (chain, activation,
conjugate pair, payoffs, horizon), the command, numerics, and output paths.
Validation reports every problem found as (json-pointer, message) pairs in a
single SchemaError rather than stopping at the first.
"""

import json
import math

import numpy as np

from . import activation as act_mod
from . import graph as graph_mod
from . import lagrangian as lag_mod
from . import mfg as mfg_mod
from .errors import SchemaError

COMMANDS = ("validate", "flow", "wasserstein", "mfg", "twopoint", "master")
TWOPOINT_MODES = ("wasserstein", "planning", "game")
POTENTIAL_FORMS = ("zero", "quadratic_W", "custom_table")


class RunConfig:
    """Validated configuration; ``build_*`` helpers assemble live objects."""

    def __init__(self, raw):
        self.raw = raw
        self.command = raw["command"]
        self.problem = raw["problem"]
        self.numerics = raw.get("numerics", {})
        self.twopoint = raw.get("twopoint", {})
        self.output = raw.get("output", {})

    # -- numerics with defaults -------------------------------------------
    @property
    def n_t(self):
        return int(self.numerics.get("n_t", 256))

    @property
    def dt(self):
        return float(self.numerics.get("dt", 1e-3))

    @property
    def tol(self):
        return float(self.numerics.get("tol", 1e-8))

    @property
    def damping(self):
        return float(self.numerics.get("damping", 0.5))

    @property
    def method(self):
        return self.numerics.get("method", "auto")

    @property
    def grid(self):
        g = self.numerics.get("grid", {})
        return {
            "n_x": int(g.get("n_x", 41)),
            "n_t": int(g.get("n_t", 41)),
            "margin": float(g.get("margin", 0.05)),
        }

    def build_graph(self):
        if "q_matrix" in self.problem:
            return graph_mod.build_from_q(self.problem["q_matrix"])
        w = self.problem["weights"]
        return graph_mod.build_from_weights(w["omega"], w["pi"])

    def build_activation(self):
        return act_mod.builtin(self.problem["activation"]["kind"])

    def build_lagrangian(self):
        return lag_mod.make_power(self.problem["lagrangian"]["alpha"])

    def build_problem(self):
        g = self.build_graph()
        f_vec, f_pot = _payoff_maps(self.problem.get("potential", {"form": "zero"}), g.n)
        g_vec, g_pot = _payoff_maps(self.problem.get("terminal", {"form": "zero"}), g.n)
        # commands that only need the reduction (wasserstein) may omit the
        # initial density and horizon; harmless defaults fill the slots
        p0 = self.problem.get("initial_density", [1.0 / g.n] * g.n)
        horizon = self.problem.get("horizon", [0.0, 1.0])
        return mfg_mod.MFGProblem(
            graph=g,
            activation=self.build_activation(),
            lagrangian=self.build_lagrangian(),
            F=f_vec,
            G=g_vec,
            F_potential=f_pot,
            G_potential=g_pot,
            p0=np.array(p0, dtype=float),
            horizon=tuple(horizon),
        )


def _payoff_maps(entry, n):
    """(vector map, scalar potential or None) for a payoff entry."""
    form = entry["form"]
    if form == "zero":
        return (lambda p: np.zeros(n)), (lambda p: 0.0)
    if form == "custom_table":
        c = np.array(entry["values"], dtype=float)
        return (lambda p: c), (lambda p: float(c @ p))
    w = np.array(entry["W"], dtype=float)
    b = np.array(entry.get("b", np.zeros(n)), dtype=float)
    vec = lambda p: w @ p + b  # noqa: E731
    if np.allclose(w, w.T, atol=1e-12):
        pot = lambda p: 0.5 * float(p @ w @ p) + float(b @ p)  # noqa: E731
        return vec, pot
    # asymmetric W: a genuine non-potential payoff
    return vec, None


def _is_number(x):
    return isinstance(x, (int, float)) and not isinstance(x, bool) and math.isfinite(x)


def _is_matrix(x, n):
    return (
        isinstance(x, list)
        and len(x) == n
        and all(isinstance(r, list) and len(r) == n and all(_is_number(v) for v in r) for r in x)
    )


def _is_vector(x, n):
    return isinstance(x, list) and len(x) == n and all(_is_number(v) for v in x)


def parse_config(text):
    """Parse and validate a JSON config; returns a RunConfig.

    All schema violations are collected with JSON-pointer paths and raised
    together as a single SchemaError.
    """
    errors = []
    try:
        raw = json.loads(text)
    except json.JSONDecodeError as exc:
        raise SchemaError([("", f"not valid JSON: {exc}")]) from exc
    if not isinstance(raw, dict):
        raise SchemaError([("", "top level must be an object")])

    command = raw.get("command")
    if command not in COMMANDS:
        errors.append(("/command", f"must be one of {COMMANDS}"))

    problem = raw.get("problem")
    if not isinstance(problem, dict):
        errors.append(("/problem", "required object"))
        raise SchemaError(errors)

    n = problem.get("states")
    if not isinstance(n, int) or n < 2:
        errors.append(("/problem/states", "integer state count >= 2 required"))
        raise SchemaError(errors)

    has_q = "q_matrix" in problem
    has_w = "weights" in problem
    if has_q == has_w:
        errors.append(("/problem", "exactly one of q_matrix or weights is required"))
    if has_q and not _is_matrix(problem["q_matrix"], n):
        errors.append(("/problem/q_matrix", f"must be a finite {n}x{n} matrix"))
    if has_w:
        w = problem["weights"]
        if not isinstance(w, dict) or not _is_matrix(w.get("omega"), n):
            errors.append(("/problem/weights/omega", f"must be a finite {n}x{n} matrix"))
        if not isinstance(w, dict) or not _is_vector(w.get("pi"), n):
            errors.append(("/problem/weights/pi", f"must be a length-{n} vector"))

    kind = problem.get("activation", {}).get("kind") if isinstance(
        problem.get("activation"), dict
    ) else None
    needs_activation = command in ("flow", "wasserstein", "mfg", "twopoint", "master")
    if needs_activation and kind not in act_mod.BUILTIN_KINDS:
        errors.append(("/problem/activation/kind", f"must be one of {act_mod.BUILTIN_KINDS}"))

    needs_lagrangian = command in ("wasserstein", "mfg", "twopoint", "master")
    lag = problem.get("lagrangian")
    alpha = None
    if needs_lagrangian:
        if not isinstance(lag, dict) or lag.get("type") != "power":
            errors.append(("/problem/lagrangian", 'required, e.g. {"type": "power", "alpha": 2.0}'))
        else:
            alpha = lag.get("alpha")
            if not _is_number(alpha) or not alpha > 1:
                errors.append(("/problem/lagrangian/alpha", "must be a number > 1"))

    needs_horizon = command in ("flow", "mfg", "twopoint", "master")
    horizon = problem.get("horizon")
    if needs_horizon:
        if not (_is_vector(horizon, 2) and horizon[0] < horizon[1]):
            errors.append(("/problem/horizon", "must be [t, T] with t < T"))

    needs_density = command in ("flow", "mfg")
    if needs_density and not _is_vector(problem.get("initial_density"), n):
        errors.append(("/problem/initial_density", f"must be a length-{n} probability vector"))

    for key in ("potential", "terminal"):
        entry = problem.get(key)
        if entry is None:
            continue
        ptr = f"/problem/{key}"
        if not isinstance(entry, dict) or entry.get("form") not in POTENTIAL_FORMS:
            errors.append((ptr + "/form", f"must be one of {POTENTIAL_FORMS}"))
            continue
        if entry["form"] == "quadratic_W":
            if not _is_matrix(entry.get("W"), n):
                errors.append((ptr + "/W", f"must be a finite {n}x{n} matrix"))
            if "b" in entry and not _is_vector(entry["b"], n):
                errors.append((ptr + "/b", f"must be a length-{n} vector"))
        if entry["form"] == "custom_table" and not _is_vector(entry.get("values"), n):
            errors.append((ptr + "/values", f"must be a length-{n} vector"))

    numerics = raw.get("numerics", {})
    if not isinstance(numerics, dict):
        errors.append(("/numerics", "must be an object"))
        numerics = {}
    for key, positive in (
        ("n_t", True), ("dt", True), ("tol", True), ("damping", True),
    ):
        if key in numerics:
            v = numerics[key]
            if not _is_number(v) or (positive and not v > 0):
                errors.append((f"/numerics/{key}", "must be a positive number"))
    if "method" in numerics and numerics["method"] not in ("auto", "convex", "fixedpoint"):
        errors.append(("/numerics/method", "must be auto, convex, or fixedpoint"))

    if command == "mfg" and numerics.get("method") == "convex":
        pot = problem.get("potential", {"form": "zero"})
        if (
            isinstance(pot, dict)
            and pot.get("form") == "quadratic_W"
            and _is_matrix(pot.get("W"), n)
            and not np.allclose(np.array(pot["W"]), np.array(pot["W"]).T, atol=1e-12)
        ):
            errors.append(
                ("/numerics/method", "convex solver requires potential structure; W is asymmetric")
            )

    tp = raw.get("twopoint", {})
    if command in ("wasserstein", "twopoint"):
        if n != 2:
            errors.append(("/problem/states", f"command {command!r} requires exactly 2 states"))
        mode = "wasserstein" if command == "wasserstein" else tp.get("mode")
        if command == "twopoint" and mode not in TWOPOINT_MODES:
            errors.append(("/twopoint/mode", f"must be one of {TWOPOINT_MODES}"))
        if mode in ("wasserstein", "planning"):
            for key in ("p0", "p1"):
                v = tp.get(key)
                if not _is_number(v) or not 0.0 <= v <= 1.0:
                    errors.append((f"/twopoint/{key}", "must be a number in [0, 1]"))
        if mode == "game":
            v = tp.get("p0")
            if not _is_number(v) or not 0.0 < v < 1.0:
                errors.append(("/twopoint/p0", "must be a number in (0, 1)"))
        if mode in ("planning", "game"):
            if alpha is not None and abs(alpha - 2.0) > 1e-12:
                errors.append(
                    ("/problem/lagrangian/alpha", f"mode {mode!r} requires the quadratic pair (alpha = 2)")
                )
            if not (_is_vector(horizon, 2) and horizon[0] < horizon[1]):
                errors.append(("/problem/horizon", "must be [t, T] with t < T"))

    if command == "master" and n != 2:
        errors.append(("/problem/states", "command 'master' requires exactly 2 states"))

    output = raw.get("output", {})
    if not isinstance(output, dict):
        errors.append(("/output", "must be an object"))
    else:
        for key in ("dir", "stem"):
            if key in output and not isinstance(output[key], str):
                errors.append((f"/output/{key}", "must be a string"))

    if errors:
        raise SchemaError(errors)
    return RunConfig(raw)
