"""Encrypted MPC over labeled homomorphic encryption."""

from ._cipherloop import (
    Error,
    FpParams,
    PaillierKeys,
    condense,
    decode,
    encode,
    fixed_oracle,
    run,
    verify,
)

__all__ = [
    "Error",
    "FpParams",
    "PaillierKeys",
    "condense",
    "decode",
    "encode",
    "fixed_oracle",
    "run",
    "verify",
]
