"""JSON state recipes.

A recipe describes how a state is prepared::

    {
      "name": "fig6",
      "modes": 2,
      "cutoff": 12,                       # per-mode Fock cutoff, null = automatic
      "squeezing_r": [0.2, -0.2],         # or "squeezing_db"
      "interferometer": {"type": "identity", "params": {}},
      "subtractions": [{"angles": [0.785]}, {"angles": [-0.785]}],
      "loss_eta": [1.0, 1.0],             # per-mode efficiency, or a scalar
      "seed": 0
    }

Preparation order: squeezed vacua, interferometer, photon subtractions,
loss.  Interferometer types are ``identity``, ``clements`` (``theta``,
``phi`` mesh parameters), ``unitary`` (``real`` and ``imag`` parts) and
``cluster`` (``graph`` or adjacency ``V``, ``subtraction_mode``,
``aggregate``), the last one choosing the free orthogonal matrix by
nullifier optimization and subtracting at the designated node.

Optional keys ``description`` and ``sweep`` (``{"subtraction": k, "angles":
[lo, hi, n], "eta": [lo, hi, n]}``) are carried along for the loss-sweep
command.
"""

from __future__ import annotations

import copy
import itertools
import json
from dataclasses import dataclass, field
from importlib import resources
from pathlib import Path

import numpy as np

from . import fock
from .basis import basis_from_params, mesh_params_for, orthogonal_to_unitary
from .cluster import ClusterResult, ClusterSpec, adjacency, cluster_state, optimize_cluster
from .optimize import OptimizerConfig

INTERFEROMETERS = ("identity", "clements", "unitary", "cluster")
FIXTURES = ("fig5", "fig6", "fig7_family", "fig8_family", "fig9_top", "fig9_bottom", "fig10",
            "table1", "table2", "table3")
MAX_SEED_PERMUTATIONS = 120


class RecipeError(ValueError):
    """The recipe is malformed or inconsistent."""


@dataclass
class Recipe:
    modes: int
    squeezing_r: list
    cutoff: int | None = None
    interferometer: dict = field(default_factory=lambda: {"type": "identity", "params": {}})
    subtractions: list = field(default_factory=list)
    loss_eta: list | None = None
    seed: int = 0
    name: str = ""
    description: str = ""
    sweep: dict | None = None
    squeezing_db: list | None = None

    @classmethod
    def from_json(cls, data: dict | str) -> "Recipe":
        if isinstance(data, str):
            data = json.loads(data)
        if not isinstance(data, dict):
            raise RecipeError("a recipe must be a JSON object")
        data = copy.deepcopy(data)
        known = {"modes", "cutoff", "squeezing_db", "squeezing_r", "interferometer", "subtractions",
                 "loss_eta", "seed", "name", "description", "sweep"}
        unknown = set(data) - known
        if unknown:
            raise RecipeError(f"unknown recipe keys: {sorted(unknown)}")
        try:
            m = int(data["modes"])
        except (KeyError, TypeError, ValueError):
            raise RecipeError("'modes' must be a positive integer") from None
        if m < 1:
            raise RecipeError("'modes' must be a positive integer")
        has_db, has_r = "squeezing_db" in data, "squeezing_r" in data
        if has_db == has_r:
            raise RecipeError("give exactly one of 'squeezing_db' and 'squeezing_r'")
        sq_db = None
        if has_db:
            sq_db = [float(x) for x in data["squeezing_db"]]
            r = [fock.db_to_r(x) for x in sq_db]
        else:
            r = [float(x) for x in data["squeezing_r"]]
        if len(r) != m:
            raise RecipeError(f"need {m} squeezing values, got {len(r)}")
        inter = data.get("interferometer") or {"type": "identity", "params": {}}
        if inter.get("type", "identity") not in INTERFEROMETERS:
            raise RecipeError(f"unknown interferometer type {inter.get('type')!r}")
        inter = {"type": inter.get("type", "identity"), "params": dict(inter.get("params", {}))}
        subs = list(data.get("subtractions", []))
        for s in subs:
            if not isinstance(s, dict) or ("angles" in s) == ("coefficients" in s):
                raise RecipeError("each subtraction needs 'angles' or 'coefficients'")
        if inter["type"] == "cluster" and subs:
            raise RecipeError("cluster recipes subtract at 'subtraction_mode'; leave 'subtractions' empty")
        eta = data.get("loss_eta")
        if eta is not None:
            eta = [float(eta)] * m if np.isscalar(eta) else [float(x) for x in eta]
            if len(eta) != m or any(not 0.0 <= x <= 1.0 for x in eta):
                raise RecipeError("'loss_eta' needs one efficiency in [0, 1] per mode")
        cutoff = data.get("cutoff")
        if cutoff is not None and int(cutoff) < 2:
            raise RecipeError("'cutoff' must be at least 2")
        return cls(
            modes=m,
            squeezing_r=r,
            cutoff=None if cutoff is None else int(cutoff),
            interferometer=inter,
            subtractions=subs,
            loss_eta=eta,
            seed=int(data.get("seed", 0)),
            name=str(data.get("name", "")),
            description=str(data.get("description", "")),
            sweep=data.get("sweep"),
            squeezing_db=sq_db,
        )

    def to_json(self) -> dict:
        out = {
            "name": self.name,
            "modes": self.modes,
            "cutoff": self.cutoff,
            "interferometer": self.interferometer,
            "subtractions": self.subtractions,
            "loss_eta": self.loss_eta,
            "seed": self.seed,
        }
        if self.squeezing_db is not None:
            out["squeezing_db"] = self.squeezing_db
        else:
            out["squeezing_r"] = self.squeezing_r
        if self.description:
            out["description"] = self.description
        if self.sweep is not None:
            out["sweep"] = self.sweep
        return out

    def replace(self, **changes) -> "Recipe":
        data = self.to_json()
        data.update(changes)
        if "squeezing_r" in changes:
            data.pop("squeezing_db", None)
        return Recipe.from_json(data)

    def with_subtraction_angle(self, index: int, angle: float) -> "Recipe":
        subs = copy.deepcopy(self.subtractions)
        if not 0 <= index < len(subs) or "angles" not in subs[index]:
            raise RecipeError(f"no angle-parametrized subtraction {index}")
        ang = list(np.atleast_1d(subs[index]["angles"]))
        ang[0] = float(angle)
        subs[index]["angles"] = ang
        return self.replace(subtractions=subs)


@dataclass
class Prepared:
    """A built state plus what was learned while building it."""

    recipe: Recipe
    state: object
    unitary: np.ndarray
    cluster: ClusterResult | None = None

    def seed_bases(self, limit: int = MAX_SEED_PERMUTATIONS) -> list[np.ndarray]:
        """Mesh parameters of the input-squeezer basis and its mode relabelings.

        Useful starting points for the witness minimization: in this basis
        the Gaussian part is a product state.
        """
        m = self.recipe.modes
        if m < 2:
            return []
        back = self.unitary.conj().T
        out = []
        for perm in itertools.islice(itertools.permutations(range(m)), limit):
            out.append(mesh_params_for(back[list(perm)]))
        return out


def load_recipe(path: str | Path) -> Recipe:
    try:
        text = Path(path).read_text(encoding="utf-8")
    except OSError as exc:
        raise RecipeError(f"cannot read recipe {path}: {exc}") from None
    try:
        return Recipe.from_json(json.loads(text))
    except json.JSONDecodeError as exc:
        raise RecipeError(f"{path} is not valid JSON: {exc}") from None


def fixture_path(name: str) -> Path:
    if name not in FIXTURES:
        raise RecipeError(f"unknown fixture {name!r}; available: {', '.join(FIXTURES)}")
    return Path(str(resources.files("modewitness") / "fixtures" / f"{name}.json"))


def load_fixture(name: str) -> Recipe:
    return load_recipe(fixture_path(name))


def resolve_recipe(ref: str | Path) -> Recipe:
    """Load a recipe from a path, or a shipped fixture by name."""
    p = Path(ref)
    if p.exists():
        return load_recipe(p)
    if str(ref) in FIXTURES:
        return load_fixture(str(ref))
    raise RecipeError(f"no recipe file or fixture named {ref!s}")


def _interferometer(recipe: Recipe) -> np.ndarray:
    kind, params = recipe.interferometer["type"], recipe.interferometer["params"]
    m = recipe.modes
    if kind == "identity":
        return np.eye(m, dtype=complex)
    if kind == "clements":
        theta, phi = params.get("theta", []), params.get("phi", [])
        try:
            o = basis_from_params(np.concatenate([theta, phi]), m).O
        except ValueError as exc:
            raise RecipeError(str(exc)) from None
        return orthogonal_to_unitary(o)
    if kind == "unitary":
        u = np.asarray(params["real"], dtype=float) + 1j * np.asarray(params.get("imag", 0.0), dtype=float)
        if u.shape != (m, m) or not np.allclose(u @ u.conj().T, np.eye(m), atol=1e-10):
            raise RecipeError("interferometer matrix is not an m x m unitary")
        return u
    raise RecipeError(f"interferometer {kind!r} is handled elsewhere")


def cluster_spec(recipe: Recipe) -> ClusterSpec:
    params = recipe.interferometer["params"]
    graph = params.get("graph", params.get("V"))
    if graph is None:
        raise RecipeError("cluster interferometer needs 'graph' or 'V'")
    v = adjacency(graph)
    if len(v) != recipe.modes:
        raise RecipeError("cluster graph size does not match 'modes'")
    sq = recipe.squeezing_db or [fock.r_to_db(x) for x in recipe.squeezing_r]
    name = graph if isinstance(graph, str) else recipe.name
    return ClusterSpec(v, tuple(sq), int(params.get("subtraction_mode", 0)), name)


def prepare(recipe: Recipe, *, subtract: bool = True) -> Prepared:
    """Build the state described by ``recipe``.

    With ``subtract=False`` the Gaussian state before subtraction is returned.
    """
    kind = recipe.interferometer["type"]
    if kind == "cluster":
        spec = cluster_spec(recipe)
        params = recipe.interferometer["params"]
        cfg = OptimizerConfig(strategy="genetic", seed=recipe.seed)
        res = optimize_cluster(spec, cfg, aggregate=params.get("aggregate", "sum"))
        state = cluster_state(spec, res.O, subtract=subtract)
        u = res.unitary
    else:
        res = None
        u = _interferometer(recipe)
        state = fock.squeezed_vacuum(recipe.squeezing_r, recipe.cutoff)
        if kind != "identity":
            state = fock.apply_passive_unitary(state, u)
        if subtract:
            for sub in recipe.subtractions:
                if "angles" in sub:
                    state = fock.subtract_photon(state, sub["angles"])
                else:
                    c = np.asarray(sub["coefficients"], dtype=complex)
                    state = fock.subtract_photon(state, coefficients=c)
    if recipe.loss_eta is not None and any(e < 1.0 for e in recipe.loss_eta):
        state = fock.apply_loss(state, recipe.loss_eta)
    return Prepared(recipe, state, u, res)


def angle_grid(spec) -> np.ndarray:
    """``[lo, hi, n]`` to ``n`` evenly spaced values including both ends."""
    lo, hi, n = spec
    return np.linspace(float(lo), float(hi), int(n))

