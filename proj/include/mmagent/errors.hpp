#pragma once

#include <stdexcept>
#include <string>

namespace mmagent {

enum class Errc {
    unknown_uid,
    undecodable_image,
    conflicting_source,
    fetch_failed,
    summarizer_unavailable,
    model_unavailable,
    judge_unavailable,
    no_qualifying_image,
    extractor_refusal,
    composer_refusal,
    no_unexpanded_node,
    shape_mismatch,
    non_finite_input,
    dangling_uid,
    empty_dataset,
    empty_benchmark,
    invalid_argument,
    io_error,
};

const char* errc_name(Errc code);

// Single exception type carrying a machine-checkable code. Tool-facing
// layers catch it and turn it into error-as-data results; library callers
// branch on code().
class Error : public std::runtime_error {
public:
    Error(Errc code, const std::string& message)
        : std::runtime_error(message), code_(code) {}

    Errc code() const { return code_; }

private:
    Errc code_;
};

} // namespace mmagent
