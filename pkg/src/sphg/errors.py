"""Exception types raised across the package."""


class SphgError(Exception):
    """Base class for all package errors."""


class InvalidArgumentError(SphgError, ValueError):
    pass


class PointFormatError(SphgError, ValueError):
    """A point or rule file line could not be parsed."""

    def __init__(self, message, line_number=None):
        self.line_number = line_number
        if line_number is not None:
            message = f"line {line_number}: {message}"
        super().__init__(message)


class PointDataError(SphgError, ValueError):
    """A parsed value is non-finite or otherwise unusable."""


class DuplicatePointError(SphgError, ValueError):
    def __init__(self, i, j, distance):
        self.pair = (int(i), int(j))
        self.distance = float(distance)
        super().__init__(
            f"points {i} and {j} coincide (geodesic distance {distance:.3e})"
        )


class DegenerateGeometryError(SphgError, ArithmeticError):
    """A bordered kernel system could not be factorized."""

    def __init__(self, message, pivot=None):
        self.pivot = pivot
        if pivot is not None:
            message = f"{message} (zero pivot at row {pivot})"
        super().__init__(message)


class FootprintError(SphgError, ValueError):
    """Local footprints too small to carry the polynomial side conditions."""

    def __init__(self, counts, required):
        # counts: {center index: footprint size} for offending centers
        self.counts = dict(counts)
        self.required = required
        shown = ", ".join(f"{k}:{v}" for k, v in list(self.counts.items())[:10])
        more = "" if len(self.counts) <= 10 else f" (+{len(self.counts) - 10} more)"
        super().__init__(
            f"footprint holds fewer than {required} centers for "
            f"{len(self.counts)} centers [{shown}{more}]"
        )


class NotPositiveDefiniteError(SphgError, ArithmeticError):
    def __init__(self, message=None):
        super().__init__(
            message
            or "stiffness matrix is not positive definite; increase the "
            "quadrature set size N_Y (so that h_Y <= q_X) or the "
            "truncation constant K"
        )
