# Copyright 2026 The symse Authors
# License: Apache 2.0 (http://www.apache.org/licenses/LICENSE-2.0)

from symse._symse import (
    SAMPLE_RATE,
    Checkpoint,
    ContractError,
    DataError,
    IoError,
    NumericError,
    js_divergence,
    js_matrix,
    lps,
    mfcc,
    mix_at_snr,
    nearest_tokens,
    run_cli,
    segmental_snr,
    snr_db,
    stft_roundtrip,
    stoi,
)

__all__ = [
    "SAMPLE_RATE",
    "Checkpoint",
    "ContractError",
    "DataError",
    "IoError",
    "NumericError",
    "js_divergence",
    "js_matrix",
    "lps",
    "mfcc",
    "mix_at_snr",
    "nearest_tokens",
    "run_cli",
    "segmental_snr",
    "snr_db",
    "stft_roundtrip",
    "stoi",
]
