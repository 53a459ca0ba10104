"""Exception types shared across the toolkit."""


class WarpminError(Exception):
    """Base class for all toolkit errors."""


class InvalidProfileError(WarpminError):
    """Warp profile is not evaluable (non-finite values on the check grid)."""


class DomainError(WarpminError):
    """A chart coordinate is outside its admissible range."""


class PerturbationTooLargeError(WarpminError):
    """Graph perturbation degenerates the comparison mesh."""


class GlueConstructionError(WarpminError):
    """A glued tube profile violates one of its defining conditions."""

    def __init__(self, condition: str, detail: str = ""):
        self.condition = condition
        msg = f"glue profile construction failed: {condition}"
        if detail:
            msg += f" ({detail})"
        super().__init__(msg)


class DegenerateMeshError(WarpminError):
    """A triangle fell below the quality floor during a solve."""

    def __init__(self, triangle: int, quality: float):
        self.triangle = int(triangle)
        self.quality = float(quality)
        super().__init__(
            f"mesh degenerated: triangle {triangle} has quality {quality:.3e}"
        )


class AssemblyError(WarpminError):
    """Reflection seams failed the vertex identification safety checks."""


class PipelineError(WarpminError):
    """A pipeline stage produced an unusable intermediate result."""


class ConfigError(WarpminError):
    """A run configuration file is malformed or out of range."""
