import os

import numpy as np
from scipy import stats

# Dense arrays of 2^24 complex doubles are ~256 MiB.
MAX_QUBITS = 24
# Exhaustive sums over the basis are capped here; above it, estimators only.
MAX_EXACT_QUBITS = 16
# construction-time check; long circuits accumulate ~1e-12 per gate
NORM_CHECK_ATOL = 1e-8


class CapacityError(ValueError):
    """qubit count outside what a dense statevector can hold"""


class ContractError(ValueError):
    """operation called on a state that breaks its precondition (e.g. a projected vector)"""


class DegenerateOracleError(ValueError):
    """oracle marks nothing or everything, so amplitude amplification is meaningless"""


class UnsupportedOracleError(NotImplementedError):
    """predicate has no gate-level lowering"""


class UndefinedRatioError(ZeroDivisionError):
    """biased expectation ratio with zero projected mass"""


class ConfigError(ValueError):
    """experiment config failed validation. `path` names the offending field."""

    def __init__(self, path, message):
        self.path = path
        super().__init__(f"{path}: {message}")


class OutputError(OSError):
    def __init__(self, path, message):
        self.path = path
        super().__init__(f"{path}: {message}")


def check_qubit_count(n, limit=MAX_QUBITS):
    if not isinstance(n, (int, np.integer)) or isinstance(n, bool):
        raise ValueError(f"qubit count must be an integer, got {n!r}")
    if n < 1 or n > limit:
        raise CapacityError(f"qubit count {n} outside [1, {limit}]")


def check_qubit_index(q, n, name="qubit"):
    if not isinstance(q, (int, np.integer)) or isinstance(q, bool):
        raise ValueError(f"{name} index must be an integer, got {q!r}")
    if q < 0 or q >= n:
        raise ValueError(f"{name} index {q} out of range for {n} qubits")


def derive_seed(seed, *stream):
    """Hash (seed, *stream) into an independent 64-bit seed.

    Sub-streams (per trajectory, per Haar sample, per sweep point) are derived
    this way so a run is reproducible regardless of evaluation order.
    """
    ss = np.random.SeedSequence([int(seed) & 0xFFFFFFFFFFFFFFFF, *[int(s) for s in stream]])
    return int(ss.generate_state(1, dtype=np.uint64)[0])


def derive_rng(seed, *stream):
    return np.random.default_rng(np.random.SeedSequence([int(seed) & 0xFFFFFFFFFFFFFFFF, *[int(s) for s in stream]]))


def bitstring(z, n):
    """qubit n-1 leftmost, qubit 0 rightmost"""
    return format(int(z), f"0{n}b")


def standard_error(series):
    clean = np.asarray(series, dtype=float)
    clean = clean[~np.isnan(clean)]
    if len(clean) < 2:
        return 0.0
    return float(stats.sem(clean))


def confidence_interval(series):
    """95% half-width, normal approximation"""
    return 1.96 * standard_error(series)


def get_save_path(save_dir, method, n, T, seed, fmt, suffix=""):
    """Deterministic file name so reruns overwrite instead of piling up."""
    t_str = "" if T is None else f"_T{T}"
    name = f"{method}_n{n}{t_str}_s{seed}{suffix}.{fmt}"
    return os.path.join(save_dir, name)
