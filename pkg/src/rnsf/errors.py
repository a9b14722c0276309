"""Exception types shared across the package."""

from __future__ import annotations


class AdmissibilityError(ValueError):
    """A state violated one of the hyperbolicity/positivity gates.

    ``gate`` names the failed condition ("v > 0", "theta > 0", "e_theta > 0",
    "kappa > 0", "g > 0").
    """

    def __init__(self, gate: str, detail: str = ""):
        self.gate = gate
        msg = f"inadmissible state: gate '{gate}' failed"
        if detail:
            msg += f" ({detail})"
        super().__init__(msg)


class NewtonError(RuntimeError):
    """The pointwise relaxation solve did not converge."""


class SolverAbort(RuntimeError):
    """Time integration could not continue; ``t`` is the failing time."""

    def __init__(self, t: float, reason: str):
        self.t = t
        self.reason = reason
        super().__init__(f"solver aborted at t={t:.6g}: {reason}")


class ConfigError(ValueError):
    """A run configuration file could not be parsed or validated."""
