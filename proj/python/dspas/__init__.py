"""Transform-coded payload digests and excerpt attribution."""

from ._dspas import (
    Archive,
    CalibrationError,
    ContractViolation,
    DigestParams,
    Error,
    FlowKey,
    InputError,
    IntegrityError,
    NoSignalError,
    ParameterMismatchError,
    QueryTooShortError,
    attribute,
    build_archive,
    calibrate_noise,
    correlate,
    dct_forward,
    dct_inverse,
    fn_probability,
    fp_probability,
    parse_archive,
    q_function,
    read_archive,
    run_experiment,
    select_threshold,
    synthetic_flows,
    table_coefficient,
    write_archive,
)

__version__ = "0.1.0"
