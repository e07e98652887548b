# ----------------------------------------------------------------------------
# Copyright (c) 2024, hardy-ss development team.
#
# Distributed under the terms of the Modified BSD License.
#
# The full license is in the file LICENSE, distributed with this software.
# ----------------------------------------------------------------------------

from inspect import signature
import logging

from decorator import decorator
import psutil


class HardySSError(Exception):
    """Base class for every error raised by hardy_ss."""


class OutOfRange(HardySSError, ValueError):
    pass


class DomainError(HardySSError, ValueError):
    pass


class NotAFixedPoint(HardySSError, ValueError):
    pass


class BracketNotPositive(HardySSError, ValueError):
    pass


class InsufficientRange(HardySSError, ValueError):
    pass


class NoDominatingRadius(HardySSError, ValueError):
    pass


class SupportViolation(HardySSError, ValueError):
    pass


class IntegrityError(HardySSError):
    pass


class StepFailure(HardySSError, ArithmeticError):
    pass


class BlowupDetected(HardySSError, ArithmeticError):
    pass


class Degenerate(HardySSError, ArithmeticError):
    pass


class BracketFailure(HardySSError, ArithmeticError):
    pass


class NonMonotoneClassification(HardySSError, ArithmeticError):
    pass


class CFLViolation(HardySSError, ArithmeticError):
    pass


class SupportReachedBoundary(HardySSError, ArithmeticError):
    pass


@decorator
def _validate_params(wrapped_function, *args, **kwargs):
    # imported here: core itself decorates its functions with this validator
    from .core import Params

    bound_arguments = signature(wrapped_function).bind(*args, **kwargs)
    params = bound_arguments.arguments.get('params')

    if params is None:
        raise TypeError("The wrapped function is missing argument 'params'")

    if not isinstance(params, Params):
        raise TypeError("Invalid parameter type: params passed as "
                        f"{type(params)}, use core.validate to build them")

    return wrapped_function(*args, **kwargs)


def _cpus_available():
    try:
        return len(psutil.Process().cpu_affinity())
    except AttributeError:
        # no affinity support (macOS)
        return psutil.cpu_count(logical=False)


@decorator
def _validate_requested_cpus(wrapped_function, *args, **kwargs):
    """Resolve ``n_jobs='auto'`` and keep worker counts within the CPUs this
    process may run on."""
    bound_arguments = signature(wrapped_function).bind(*args, **kwargs)
    bound_arguments.apply_defaults()
    if 'n_jobs' not in bound_arguments.arguments:
        raise TypeError(f"{wrapped_function.__name__} has no 'n_jobs' "
                        "parameter to validate")

    available = _cpus_available()
    n_jobs = bound_arguments.arguments['n_jobs']
    if n_jobs == 'auto':
        n_jobs = available
    if not 1 <= n_jobs <= available:
        raise OutOfRange(f"n_jobs={n_jobs} must lie between 1 and the "
                         f"{available} processors available")
    bound_arguments.arguments['n_jobs'] = n_jobs
    return wrapped_function(*bound_arguments.args, **bound_arguments.kwargs)


def configure_logging(verbose=False, quiet=False):
    if verbose:
        level = logging.DEBUG
    elif quiet:
        level = logging.WARNING
    else:
        level = logging.INFO
    logging.basicConfig(
        level=level,
        format='%(asctime)s %(levelname)s %(name)s: %(message)s')
    logging.getLogger('hardy_ss').setLevel(level)
    logging.captureWarnings(True)
