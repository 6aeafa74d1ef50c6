#!/usr/bin/env python3

############################################################################
#
# MODULE:       lib with the exception classes of dlcz_sim
#
# AUTHOR(S):    dlcz_sim developers
#
# PURPOSE:      exception hierarchy shared by all modules
#
# COPYRIGHT:	(C) 2026 by the dlcz_sim developers
#
# 		This program is free software under the GNU General Public
# 		License (>=v2). Read the file COPYING that comes with dlcz_sim
# 		for details.
#
#############################################################################


class DlczSimError(Exception):
    """Base class of all errors raised by dlcz_sim."""


class DomainError(DlczSimError, ValueError):
    """An argument lies outside its mathematical domain."""


class ShapeError(DlczSimError, ValueError):
    """Dimensions of operators, states or registers do not match."""


class ValidationError(DlczSimError, ValueError):
    """An object violates one of its invariants."""


class CompletenessError(ValidationError):
    """A measurement setting set is not informationally complete."""


class InfeasibleTargetsError(ValidationError):
    """Calibration targets cannot be reached by the forward model."""


class ConfigError(ValidationError):
    """Invalid configuration file.

    Args:
        msg (str): The error message
        field (str): Dotted path of the offending field
        line (int): Line in the configuration file, if known

    """

    def __init__(self, msg, field=None, line=None):
        self.field = field
        self.line = line
        location = ""
        if field:
            location += f" [field: {field}"
            location += f", line: {line}]" if line else "]"
        super().__init__(f"{msg}{location}")

    def as_dict(self):
        """Machine readable form of the error."""
        return {
            "error": type(self).__name__,
            "message": str(self),
            "field": self.field,
            "line": self.line,
        }


class HeraldImpossibleError(DlczSimError):
    """The heralding detector can never click for the given parameters."""


class UndefinedEstimateError(DlczSimError):
    """An estimator was called without data to estimate from."""
