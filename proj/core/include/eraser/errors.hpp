#pragma once

#include <stdexcept>

namespace eraser {

// Misconfiguration: bad hyperparameters, missing templates, vocab mismatch.
struct ConfigError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

// Malformed input files (CSV/JSONL layout problems).
struct FormatError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

// Caller passed a sequence longer than the model context; callers truncate.
struct TruncationError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

// A metric has no defined value (e.g. ASR over zero scored samples).
struct MetricError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

// Training did not reach its target or produced non-finite losses.
struct TrainingError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

}  // namespace eraser
