#pragma once

#include <cstddef>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

namespace mlcsc {

/// Shapes or channel counts that do not line up.
class DimensionError : public std::invalid_argument {
public:
    using std::invalid_argument::invalid_argument;
};

class IndexError : public std::out_of_range {
public:
    using std::out_of_range::out_of_range;
};

/// Invalid solver or training hyperparameters.
class ParameterError : public std::invalid_argument {
public:
    using std::invalid_argument::invalid_argument;
};

/// A precondition on the data itself failed (e.g. atoms are not unit norm).
class InvariantError : public std::logic_error {
public:
    using std::logic_error::logic_error;
};

/// The least-squares system on a support is singular.
class RankDeficientError : public std::runtime_error {
public:
    RankDeficientError(const std::string& what, std::vector<std::size_t> support)
        : std::runtime_error(what), support_(std::move(support)) {}

    const std::vector<std::size_t>& support() const noexcept { return support_; }

private:
    std::vector<std::size_t> support_;
};

/// Sampling could not produce a stack inside the model.
class ModelInfeasibleError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

/// Training diverged (non-finite loss).
class TrainingError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

/// Malformed file; `offset` is the byte position where parsing failed.
class ParseError : public std::runtime_error {
public:
    ParseError(const std::string& what, std::size_t offset)
        : std::runtime_error(what + " (at byte " + std::to_string(offset) + ")"), offset_(offset) {}

    std::size_t offset() const noexcept { return offset_; }

private:
    std::size_t offset_;
};

}  // namespace mlcsc
