# Licensed under a 3-clause BSD style license - see LICENSE.rst
"""
Exceptions and warnings raised by ``holegas``.
"""
from astropy.utils.exceptions import AstropyUserWarning

__all__ = ['HolegasError', 'DomainError', 'ConfigurationError',
           'NumericalError', 'InsufficientStatisticsError', 'UsageError',
           'HolegasWarning', 'UnderResolvedWarning']


class HolegasError(Exception):
    """
    Base class for all errors raised by ``holegas``.
    """


class DomainError(HolegasError, ValueError):
    """
    An argument lies outside the domain of the requested operation.
    """


class ConfigurationError(HolegasError, ValueError):
    """
    A lattice, kernel or simulation configuration is invalid.
    """


class NumericalError(HolegasError, ArithmeticError):
    """
    A quadrature or root bracketing step failed.

    Parameters
    ----------
    message : str
        Description of the failure
    diagnostics : dict, optional
        Values that help reproduce the failure (offending time, bracket
        end points, residuals, ...)
    """
    def __init__(self, message, diagnostics=None):
        super().__init__(message)
        self.diagnostics = dict(diagnostics or {})

    def __str__(self):
        msg = super().__str__()
        if self.diagnostics:
            details = ', '.join('{0}={1!r}'.format(k, v)
                                for k, v in self.diagnostics.items())
            msg = '{0} ({1})'.format(msg, details)
        return msg


class InsufficientStatisticsError(HolegasError):
    """
    Too few surviving particles to estimate a quantity.
    """


class UsageError(HolegasError):
    """
    Bad command-line arguments or malformed input files.

    Parameters
    ----------
    message : str
        Description of the problem
    filename : str, optional
        File in which the problem was found
    line : int, optional
        1-based line number in ``filename``
    """
    def __init__(self, message, filename=None, line=None):
        super().__init__(message)
        self.filename = filename
        self.line = line

    def __str__(self):
        msg = super().__str__()
        if self.filename is not None:
            where = str(self.filename)
            if self.line is not None:
                where += ':{0}'.format(self.line)
            msg = '{0}: {1}'.format(where, msg)
        return msg


class HolegasWarning(AstropyUserWarning):
    """
    Base class for warnings issued by ``holegas``.
    """


class UnderResolvedWarning(HolegasWarning):
    """
    The time step is too coarse to resolve the renewal kernel.
    """
