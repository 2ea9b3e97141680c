"""Per-dataset settings: grid, initial conditions, jet order, thresholds."""
from __future__ import annotations

from dataclasses import asdict, dataclass, field, replace

from .pdegen import GridSpec, kdv_substeps

__all__ = ["Preset", "PRESETS", "PRESET_NAMES", "get_preset", "STATIC_NAMES"]


@dataclass(frozen=True)
class Preset:
    name: str
    dims: int = 1                   # spatial dimensions; 0 for static data
    grid: dict = field(default_factory=dict)     # GridSpec overrides
    N_f: int = 10
    N_ics: int = 10
    scale: float = 1.0              # std of the Fourier coefficients
    order: int = 2                  # prolongation order n
    time_accuracy: int = 4          # order of the central time stencils
    jet_stride: int = 1             # lattice stride applied after differentiating on the full grid
    store_stride: int = 1           # spatial stride of the dataset written by ``gen``
    samples: int = 100              # M
    threshold: float = 0.5          # eps2 of the null-space step
    library: str = "poly2"
    ladmap_eps1: float = 1e-4
    ladmap_eps2: float = 1e-4
    analytic: str = ""              # analytic right-hand side (defaults to the name)
    truth: str = ""                 # reference algebra (defaults to the name)

    @property
    def static(self) -> bool:
        return self.dims == 0

    def grid_spec(self) -> GridSpec:
        g = GridSpec(**{k: v for k, v in self.grid.items() if k != "substeps"})
        sub = self.grid.get("substeps", 1)
        if sub == "auto":
            sub = kdv_substeps(g)
        return replace(g, substeps=int(sub))

    def with_overrides(self, **kw) -> "Preset":
        unknown = set(kw) - set(asdict(self))
        if unknown:
            raise KeyError(f"unknown preset field(s): {', '.join(sorted(unknown))}")
        return replace(self, **kw)

    def to_dict(self) -> dict:
        return asdict(self)


PRESETS = {
    "burgers": Preset("burgers"),
    "heat": Preset("heat"),
    # smaller amplitude keeps the u_t estimate accurate next to the stiff third derivative
    "kdv": Preset("kdv", grid={"substeps": "auto"}, order=3, scale=0.5),
    "wave2d": Preset("wave2d", dims=2, N_f=3, jet_stride=10, store_stride=10, threshold=1.0, ladmap_eps2=1e-3),
    "schrodinger2d": Preset("schrodinger2d", dims=2, N_f=2, jet_stride=10, store_stride=10, threshold=2.0,
                            ladmap_eps2=1e-3),
    "rd2d": Preset("rd2d", dims=2, N_f=2, jet_stride=10, store_stride=10, threshold=1e-2, ladmap_eps2=1e-3),
    "circle": Preset("circle", dims=0, order=0, samples=100, threshold=1e-3, library="linear"),
    "lorentz": Preset("lorentz", dims=0, order=0, samples=100, threshold=1.0, library="linear",
                      ladmap_eps1=1e-2, ladmap_eps2=1e-1, analytic="minkowski", truth="topquark"),
}
PRESET_NAMES = tuple(PRESETS)
STATIC_NAMES = tuple(k for k, p in PRESETS.items() if p.static)


def get_preset(name: str) -> Preset:
    try:
        p = PRESETS[name]
    except KeyError:
        raise KeyError(f"unknown preset {name!r}; valid options: {', '.join(PRESET_NAMES)}") from None
    return replace(p, analytic=p.analytic or p.name, truth=p.truth or p.name)
