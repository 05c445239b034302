"""Exception hierarchy for the toolkit.

Every hard failure raises a subclass of SymplagError so callers (and the
CLI) can distinguish library failures from programming errors.
"""


class SymplagError(Exception):
    """Base class for all toolkit errors."""


class ChartDomainError(SymplagError):
    """Lagrangian plane outside the graph chart (top block not positively oriented)."""


class DeterminantError(SymplagError):
    """Complex 2x2 input is not unimodular within tolerance."""


class GridTooSmall(SymplagError):
    """Grid has fewer than the 5 nodes per axis required by the stencils."""


class NonRealH(SymplagError):
    """Field expected to be real-valued has a non-negligible imaginary part."""


class NotClosed(SymplagError):
    """1-form fails the closedness (curl) test; a primitive does not exist."""


class UmbilicPoint(SymplagError):
    """|h| dips below the umbilic tolerance where a division by h is required."""


class NotGeneric(SymplagError):
    """Genericity fails (h = 0 or P2 = 0 somewhere); recovery refuses."""


class NotHolomorphic(SymplagError):
    """Input field has a non-negligible antiholomorphic derivative."""


class NotAdapted(SymplagError):
    """Frame field fails an adapted-gauge residual; the failing residual is named."""

    def __init__(self, residual_name: str, value: float, tol: float):
        self.residual_name = residual_name
        self.value = value
        self.tol = tol
        super().__init__(f"gauge residual {residual_name} = {value:.3e} exceeds {tol:.3e}")


class NotLagrangian(SymplagError):
    """Immersion fails the Lagrangian test Omega(f_x, f_y) = 0."""


class NotElliptic(SymplagError):
    """Induced quadratic form is not positive definite (hyperbolic/parabolic input)."""


class IntegrationBlowup(SymplagError):
    """Frame norm exceeded the blowup guard during integration."""


class FrameDefect(SymplagError):
    """Frame node left the symplectic group beyond repair by projection."""


class ParameterDomain(SymplagError):
    """Closed-form generator parameter outside its admissible domain."""


class ConfigError(SymplagError):
    """CLI configuration is missing, malformed, or inconsistent."""


class UmbilicGaugeWarning(UserWarning):
    """|h| fell below the umbilic tolerance; reductions remain valid but the
    genericity operators will refuse this data."""
