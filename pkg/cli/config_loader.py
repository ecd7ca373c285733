import logging
try:
    import tomllib
except ModuleNotFoundError:  # Python < 3.11
    import tomli as tomllib
from pathlib import Path
from typing import Union

import numpy as np
from pydantic import ValidationError

from exceptions import DomainError
from models import GridSection, NetworkSection, ReactionNetwork, RunConfig
from services.gm_service import GMService, ReactionSystem
from services.reaction_network_service import ReactionNetworkService
from services.spatial_service import SpatialGrid

logger = logging.getLogger(__name__)


def load_config(path: Union[str, Path]) -> RunConfig:
    """Parse and validate a TOML run configuration; nothing is computed here"""
    path = Path(path)
    if not path.is_file():
        raise DomainError(f"config file {path} does not exist")
    try:
        raw = tomllib.loads(path.read_text(encoding="utf-8"))
    except tomllib.TOMLDecodeError as exc:
        raise DomainError(f"{path}: {exc}") from exc
    config = RunConfig.model_validate(raw)
    logger.info("Loaded config %s", path)
    return config


def format_validation_error(exc: ValidationError) -> str:
    lines = []
    for error in exc.errors():
        loc = ".".join(str(part) for part in error["loc"]) or "<root>"
        lines.append(f"{loc}: {error['msg']}")
    return "\n".join(lines)


def require(config: RunConfig, *sections: str) -> None:
    missing = [name for name in sections if getattr(config, name) is None]
    if missing:
        raise DomainError(f"config is missing section(s): {', '.join('[' + m + ']' for m in missing)}")


def build_system(section: NetworkSection) -> ReactionSystem:
    if section.model == "gm":
        return GMService.gm_network(section.gm)
    if section.model == "gm-rescaled":
        p = section.gm
        return GMService.rescaled_gm(p.mu1, p.b2, p.D1, p.D2)

    network = ReactionNetwork(species=section.species, reactions=section.reactions)
    tensors = ReactionNetworkService.build_tensors(network, section.sources, section.decay)
    diffusion = np.asarray(section.diffusion if section.diffusion is not None else [0.0] * section.species)
    node_rates = None if section.node_rates is None else np.asarray(section.node_rates, dtype=float)
    return ReactionSystem(network, tensors, diffusion, node_rates)


def build_grid(section: GridSection) -> SpatialGrid:
    return SpatialGrid(d=section.d, n=section.n)


def initial_state(config: RunConfig, grid: SpatialGrid, species: int) -> np.ndarray:
    profile = config.initial.profile
    if profile == "gm-sinusoid":
        if species != 2:
            raise DomainError("initial profile 'gm-sinusoid' needs a two-species network")
        return GMService.initial_condition(grid)
    return np.full(species * grid.n_d, config.initial.value)
