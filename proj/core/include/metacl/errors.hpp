#pragma once

#include <stdexcept>
#include <string>

namespace metacl {

// Error taxonomy. Everything derives from metacl::error so callers can catch
// the whole family, while tests can assert on the precise kind.
struct error : std::runtime_error {
    using std::runtime_error::runtime_error;
};

// Tensor/batch dimensions disagree (message names both shapes).
struct shape_error : error {
    using error::error;
};

// Malformed bytes in an external format (IDX, CSV, snapshot); message names
// the offending offset or line.
struct format_error : error {
    using error::error;
};

// An argument is out of its documented domain.
struct validation_error : error {
    using error::error;
};

// Paired state drifted apart (e.g. a forward cache reused against a model
// whose geometry changed).
struct consistency_error : error {
    using error::error;
};

// NaN/Inf showed up where finite values are required.
struct numeric_error : error {
    using error::error;
};

// Filesystem-level failure (open/read/write).
struct io_error : error {
    using error::error;
};

} // namespace metacl
