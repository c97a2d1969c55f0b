"""Result records shared by the solver and the experiment drivers."""

from dataclasses import dataclass

CSV_COLUMNS = ("bc", "L", "t", "x", "p", "error", "std_error", "bound_aL",
               "exact_variance", "n_effective", "seed")


@dataclass(frozen=True)
class LocalizationRecord:
    """Localisation error ``||u(t, x) - u_L(t, x)||_{L^p(Omega)}`` at one cell.

    ``exact_variance`` is NaN unless the linear-case oracle applies;
    ``std_error`` is zero for values computed by quadrature.
    """

    bc: str
    L: float
    t: float
    x: float
    p: float
    error: float
    std_error: float
    bound_aL: float
    exact_variance: float
    n_effective: int
    seed: int

    def __post_init__(self):
        if not self.error >= 0:
            raise ValueError(f"error estimate must be >= 0, got {self.error}")
        if not self.std_error >= 0:
            raise ValueError(f"std_error must be >= 0, got {self.std_error}")

    @property
    def error_estimate(self):
        return self.error
