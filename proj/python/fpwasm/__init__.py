"""JavaScript to WebAssembly conversion core."""

from ._fpwasm import (
    ConfigError,
    Error,
    InsufficientPool,
    OversizeError,
    ParseError,
    ProtocolError,
    RangeError,
    check_syntax,
    convert,
    default_watchlist,
    detect_categories,
    encode_request,
    evasion_report,
    extract_tuples,
    largest_remainder,
    mean_sd,
    parse_response,
    rule_names,
    script_id,
    validate,
)

__all__ = [
    "ConfigError",
    "Error",
    "InsufficientPool",
    "OversizeError",
    "ParseError",
    "ProtocolError",
    "RangeError",
    "check_syntax",
    "convert",
    "default_watchlist",
    "detect_categories",
    "encode_request",
    "evasion_report",
    "extract_tuples",
    "largest_remainder",
    "mean_sd",
    "parse_response",
    "rule_names",
    "script_id",
    "validate",
]
